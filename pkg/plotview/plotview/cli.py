"""plot-trace: render a figure from a reflectwave trace CSV."""

from __future__ import annotations

import argparse
import sys

from .figures import PANELS, FigureSpec, PlotError, render


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="plot-trace",
        description="Render oscilloscope-style figures from a trace CSV")
    ap.add_argument("trace", help="input trace.csv")
    ap.add_argument("--out", required=True, help="output image (.png/.svg)")
    ap.add_argument("--panel", choices=PANELS, default="terminals")
    ap.add_argument("--ref", default=None,
                    help="reference trace CSV overlaid on the coil panel")
    ap.add_argument("--vdc", type=float, default=None,
                    help="bus voltage for the guide lines "
                         "(default: estimated from the inverter plateau)")
    ap.add_argument("--duty-band", default="0.05:1.0", metavar="LO:HI",
                    help="duty clamp band drawn on the adaptation panel")
    args = ap.parse_args(argv)

    try:
        lo, hi = (float(x) for x in args.duty_band.split(":"))
        spec = FigureSpec(trace=args.trace, out=args.out, panel=args.panel,
                          reference=args.ref, v_dc=args.vdc,
                          duty_band=(lo, hi))
        out = render(spec)
    except (PlotError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
