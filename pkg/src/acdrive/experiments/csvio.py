"""CSV and report emission.

Floats are written with repr (shortest round-trip decimals), so files
are byte-reproducible across runs and read back to identical values.
NaN or infinity anywhere in an output is a hard error: silent NaN rows
have ruined enough regression baselines.
"""

from __future__ import annotations

import math
from pathlib import Path

from ..dynamics import Trajectory
from ..errors import NonFiniteValue
from ..models import SpectrumScan


def _fmt(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteValue(f"non-finite value {x!r} in output")
    return repr(x)


def trajectory_csv_text(traj: Trajectory) -> str:
    dim = len(traj.points[0].populations) if traj.points else 0
    header = ("t,tau,lambda,fidelity,purity,"
              + ",".join(f"p_{k}" for k in range(1, dim + 1))
              + ",trace_error,min_eig")
    lines = [header]
    for p in traj.points:
        cells = [_fmt(p.t), _fmt(p.tau), _fmt(p.lam), _fmt(p.fidelity),
                 _fmt(p.purity)]
        cells.extend(_fmt(x) for x in p.populations)
        cells.append(_fmt(p.trace_error))
        cells.append(_fmt(p.min_eigenvalue))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def gamma_table_csv_text(rows: list[tuple[float, str, float]]) -> str:
    lines = ["gamma0,method,final_fidelity"]
    for gamma0, method, fidelity in rows:
        lines.append(f"{_fmt(gamma0)},{method},{_fmt(fidelity)}")
    return "\n".join(lines) + "\n"


def spectrum_csv_text(scan: SpectrumScan) -> str:
    dim = scan.branches.shape[1]
    lines = ["lambda," + ",".join(f"e_{k}" for k in range(1, dim + 1))]
    for lam, row in zip(scan.lambdas, scan.branches):
        lines.append(",".join([_fmt(lam)] + [_fmt(e) for e in row]))
    return "\n".join(lines) + "\n"


def write_text(path: Path, text: str) -> Path:
    """Write with exact \\n line endings regardless of platform."""
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path
