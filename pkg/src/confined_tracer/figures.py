"""Data behind the two limit-shape figures, plus seam checks on the written files.

Figure G: the limit rate G(j) at kappa tau = kappa T^2 = 1.
Figure H: the limit CGF H(lambda) at kappa = tau = T^2 = 1.
Both use kappa = tau = T = 1, with kappa taken as a free constant. Seams are
included in the grids exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .io import read_csv
from .rate import limit_curve

FIGURE_PARAMS = {"kappa": 1.0, "tau": 1.0, "T": 1.0}
G_FILE = "figure_G.csv"
H_FILE = "figure_H.csv"
SCRIPT_FILE = "figures.gp"


def _grid(lo: float, hi: float, points: int, seams: list[float]) -> np.ndarray:
    return np.unique(np.concatenate([np.linspace(lo, hi, points), seams]))


def _branches(kind: str, k: float, tau: float, T: float):
    """Explicit branch formulas (name -> callable) and the seams between them."""
    if kind == "G":
        quad = lambda j: (j - k * tau) ** 2 / (4.0 * k * T * T)
        branches = {
            "quadratic-left": quad,
            "linear": lambda j: -j * tau / (T * T),
            "flat": lambda j: 0.0,
            "quadratic-right": quad,
        }
        seams = [(-k * tau, "quadratic-left", "linear"), (0.0, "linear", "flat"), (k * tau, "flat", "quadratic-right")]
    else:
        shift = tau / (T * T)
        branches = {
            "quadratic-left": lambda l: -(l + shift) * k * tau + k * (l + shift) ** 2 * T * T,
            "flat": lambda l: 0.0,
            "quadratic-right": lambda l: l * k * tau + k * l * l * T * T,
        }
        seams = [(-shift, "quadratic-left", "flat"), (0.0, "flat", "quadratic-right")]
    return branches, seams


def write_figures(out_dir: str | Path, points: int = 401, span: float = 3.0) -> list[Path]:
    """Write both curves and a gnuplot script into ``out_dir``."""
    out = Path(out_dir)
    k, tau, T = FIGURE_PARAMS["kappa"], FIGURE_PARAMS["tau"], FIGURE_PARAMS["T"]
    paths = []
    for kind, name in (("G", G_FILE), ("H", H_FILE)):
        seams = [s for s, _, _ in _branches(kind, k, tau, T)[1]]
        curve = limit_curve(kind, _grid(-span, span, points, seams), tau, T, kappa=k)
        path = out / name
        curve.to_csv(path)
        paths.append(path)
    script = out / SCRIPT_FILE
    script.write_text(
        "set datafile separator ','\n"
        "set datafile commentschars '#'\n"
        "set key off\n"
        "set terminal pngcairo size 640,480\n"
        f"set output 'figure_G.png'\nset xlabel 'j'\nset ylabel 'G(j)'\n"
        f"plot '{G_FILE}' every ::1 using 1:2 with lines lw 2\n"
        f"set output 'figure_H.png'\nset xlabel 'lambda'\nset ylabel 'H(lambda)'\n"
        f"plot '{H_FILE}' every ::1 using 1:2 with lines lw 2\n",
        encoding="utf-8",
    )
    paths.append(script)
    return paths


def seam_residuals(path: str | Path, kind: str) -> dict[float, float]:
    """For each seam: max deviation of the file value from both adjoining branch formulas.

    Also fails (returns inf) when the file's parameters differ from the
    figure conventions or a seam point is missing from the grid.
    """
    meta, header, rows = read_csv(path)
    if header != ["x", "value", "region"]:
        raise ValueError(f"unexpected header {header!r}")
    k, tau, T = float(meta["kappa"]), float(meta["tau"]), float(meta["T"])
    if kind == "G":
        conventions = abs(k * tau - 1.0) <= 1e-15 and abs(k * T * T - 1.0) <= 1e-15
    else:
        conventions = all(abs(v - 1.0) <= 1e-15 for v in (k, tau, T * T))
    xs = np.array([float(r[0]) for r in rows])
    vals = np.array([float(r[1]) for r in rows])
    branches, seams = _branches(kind, k, tau, T)
    out = {}
    for s, left, right in seams:
        idx = np.flatnonzero(xs == s)
        if not conventions or idx.size != 1:
            out[s] = float("inf")
            continue
        v = vals[idx[0]]
        out[s] = max(abs(v - branches[left](s)), abs(v - branches[right](s)))
    return out
