"""Wigner functions on phase-space grids.

Normalization: ``int W dx dp = 1`` with the vacuum peaking at ``1/pi``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from . import _core
from .fock import DensityMatrix, expectation, ladder_operators, operator_exponential, pad, quadrature_operators

DEFAULT_HALF_WIDTH = 6.0
DEFAULT_POINTS = 201
COVERAGE_SIGMAS = 5.0
# default grids reach further than the coverage check so x^8 moments converge
DEFAULT_MARGIN_SIGMAS = 7.0


@dataclass(frozen=True, eq=False)
class WignerGrid:
    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray  # values[i, j] = W(x_i, p_j)

    def __post_init__(self) -> None:
        for name in ("x_axis", "p_axis"):
            ax = np.asarray(getattr(self, name), dtype=float)
            if ax.ndim != 1 or ax.size < 2:
                raise ValueError(f"{name} must be a 1-D grid with at least two points")
            step = np.diff(ax)
            if not np.allclose(step, step[0], rtol=1e-9, atol=1e-12) or step[0] <= 0:
                raise ValueError(f"{name} must be uniform and increasing")
            object.__setattr__(self, name, ax)
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.x_axis.size, self.p_axis.size):
            raise ValueError(f"values shape {vals.shape} does not match the axes")
        object.__setattr__(self, "values", vals)

    @property
    def cell_area(self) -> float:
        return float((self.x_axis[1] - self.x_axis[0]) * (self.p_axis[1] - self.p_axis[0]))

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def x_marginal(self) -> np.ndarray:
        return self.values.sum(axis=1) * (self.p_axis[1] - self.p_axis[0])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "p", "w"])
            for i, x in enumerate(self.x_axis):
                for j, p in enumerate(self.p_axis):
                    writer.writerow([repr(float(x)), repr(float(p)), repr(float(self.values[i, j]))])

    def to_json(self) -> dict:
        return {
            "x_axis": self.x_axis.tolist(),
            "p_axis": self.p_axis.tolist(),
            "values": self.values.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> WignerGrid:
        return cls(np.asarray(obj["x_axis"]), np.asarray(obj["p_axis"]), np.asarray(obj["values"]))

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))


def quadrature_moments(rho: DensityMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Mean vector and standard deviations of ``(x, p)``."""
    big = rho.n_levels + 2
    r = DensityMatrix(pad(rho.matrix, big))
    x, p = quadrature_operators(big)
    mean = np.array([expectation(r, x).real, expectation(r, p).real])
    second = np.array([expectation(r, x @ x).real, expectation(r, p @ p).real])
    return mean, np.sqrt(np.clip(second - mean**2, 0.0, None))


def support_box(rho: DensityMatrix, sigmas: float = COVERAGE_SIGMAS) -> tuple[tuple[float, float], tuple[float, float]]:
    mean, std = quadrature_moments(rho)
    lo = mean - sigmas * std
    hi = mean + sigmas * std
    return (lo[0], hi[0]), (lo[1], hi[1])


def default_axes(rho: DensityMatrix | None = None) -> tuple[np.ndarray, np.ndarray]:
    """201 points over [-6, 6] per axis, widened at the same spacing to seven standard deviations around the mean of ``rho``."""
    half = DEFAULT_HALF_WIDTH
    if rho is not None:
        (xlo, xhi), (plo, phi) = support_box(rho, DEFAULT_MARGIN_SIGMAS)
        half = max(half, abs(xlo), abs(xhi), abs(plo), abs(phi))
    step = 2.0 * DEFAULT_HALF_WIDTH / (DEFAULT_POINTS - 1)
    n_side = int(np.ceil(half / step - 1e-9))
    ax = step * np.arange(-n_side, n_side + 1)
    return ax, ax.copy()


def wigner_evaluate(rho: DensityMatrix, x_axis=None, p_axis=None, check_coverage: bool = True) -> WignerGrid:
    """Wigner function of ``rho`` on a rectangular grid.

    Missing axes default to 201 points over [-6, 6], widened at the same
    spacing to seven standard deviations around the mean. With ``check_coverage`` the axes
    must span the quadrature means plus and minus five standard deviations;
    otherwise ``ValueError``.
    """
    dx, dp = default_axes(rho)
    x_axis = dx if x_axis is None else np.asarray(x_axis, dtype=float)
    p_axis = dp if p_axis is None else np.asarray(p_axis, dtype=float)
    if check_coverage:
        (xlo, xhi), (plo, phi) = support_box(rho)
        if x_axis[0] > xlo or x_axis[-1] < xhi or p_axis[0] > plo or p_axis[-1] < phi:
            raise ValueError(
                f"grid [{x_axis[0]:.3g}, {x_axis[-1]:.3g}] x [{p_axis[0]:.3g}, {p_axis[-1]:.3g}] "
                f"does not cover the state support [{xlo:.3g}, {xhi:.3g}] x [{plo:.3g}, {phi:.3g}]"
            )
    return WignerGrid(x_axis, p_axis, _core.wigner_grid(rho.matrix, x_axis, p_axis))


def wigner_at(rho: DensityMatrix, x: float, p: float) -> float:
    return float(_core.wigner_grid(rho.matrix, np.array([x]), np.array([p]))[0, 0])


def wigner_parity(rho: DensityMatrix, x: float, p: float, pad_levels: int = 80) -> float:
    """Displaced-parity route: ``W = Tr[rho D(b) Pi D(b)^dag] / pi``, ``b = (x + ip)/sqrt(2)``.

    Independent of the Laguerre recursion; the displacement is exponentiated
    in a space padded by ``pad_levels`` so it stays accurate on the state.
    """
    big = rho.n_levels + pad_levels
    a, ad = ladder_operators(big)
    beta = (x + 1j * p) / np.sqrt(2.0)
    disp = operator_exponential(beta * ad - np.conj(beta) * a)
    parity = np.diag((-1.0) ** np.arange(big))
    r = pad(rho.matrix, big)
    return float(np.trace(r @ disp @ parity @ disp.conj().T).real / np.pi)


def wigner_minimum(rho: DensityMatrix, points: int = 121) -> tuple[float, tuple[float, float]]:
    """Most negative value of ``W`` and its location.

    Coarse scan over the five-sigma support box, then Nelder-Mead from the
    best grid cell. The returned value never exceeds the best grid sample.
    """
    (xlo, xhi), (plo, phi) = support_box(rho)
    xs = np.linspace(xlo, xhi, points)
    ps = np.linspace(plo, phi, points)
    grid = _core.wigner_grid(rho.matrix, xs, ps)
    i, j = np.unravel_index(np.argmin(grid), grid.shape)
    best_val, best_loc = float(grid[i, j]), (float(xs[i]), float(ps[j]))
    step = max(xs[1] - xs[0], ps[1] - ps[0])
    res = minimize(
        lambda q: wigner_at(rho, q[0], q[1]),
        np.array(best_loc),
        method="Nelder-Mead",
        options={
            "xatol": 1e-8,
            "fatol": 1e-14,
            "initial_simplex": np.array([best_loc, (best_loc[0] + step, best_loc[1]), (best_loc[0], best_loc[1] + step)]),
        },
    )
    if res.fun < best_val:
        best_val, best_loc = float(res.fun), (float(res.x[0]), float(res.x[1]))
    return best_val, best_loc
