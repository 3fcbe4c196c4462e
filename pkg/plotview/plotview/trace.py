"""Reader for the reflectwave trace-CSV contract.

Nine named float columns, comma separated, LF or CRLF line endings.  The
reader never mutates the input file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

COLUMNS = ("t_s", "v_inv_V", "v_mot_V", "v_coil_V", "i_hf_A",
           "i_branch_A", "duty", "zeq_ohm", "lyap_J")


class PlotError(ValueError):
    pass


@dataclass(frozen=True)
class TraceData:
    """Loaded trace columns keyed by the contract names."""

    path: Path
    cols: dict

    def __getitem__(self, name: str) -> np.ndarray:
        return self.cols[name]

    def __len__(self) -> int:
        return len(self.cols["t_s"])

    def estimated_v_dc(self) -> float:
        """Bus voltage from the inverter plateau (median of the top half)."""
        v = self.cols["v_inv_V"]
        top = v[v > 0.5 * v.max()] if v.max() > 0 else v
        if len(top) == 0:
            raise PlotError(f"{self.path}: cannot estimate v_dc from a "
                            f"flat v_inv_V column")
        return float(np.median(top))


def load_trace(path: str | Path) -> TraceData:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PlotError(f"{path}: empty trace file") from None
        header = [h.strip() for h in header]
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise PlotError(f"{path}: missing columns {', '.join(missing)}")
        idx = [header.index(c) for c in COLUMNS]
        rows = [[float(row[i]) for i in idx] for row in reader if row]
    if not rows:
        raise PlotError(f"{path}: trace has a header but no samples")
    data = np.asarray(rows)
    return TraceData(path=path,
                     cols={c: data[:, k] for k, c in enumerate(COLUMNS)})
