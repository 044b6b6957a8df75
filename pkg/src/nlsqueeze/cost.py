"""Cost functions ``f(x, p) = p + sum_k c_k x^k`` and their Gaussian thresholds."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, comb, log2
from typing import TYPE_CHECKING, Mapping

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .fock import DensityMatrix, check_dim, pad, quadrature_operators

if TYPE_CHECKING:
    from .wigner import WignerGrid

SUPPORTED_POWERS = (2, 4)
CUBIC_CONSTANT = 3.0 / 2.0 ** (5.0 / 3.0)


@dataclass(frozen=True)
class CostFunction:
    """``f(x, p) = p + sum_k c_k x^k`` with even powers 2 and 4.

    ``x_coeffs`` maps power to coefficient. Use :meth:`cubic` and
    :meth:`quintic` for the two families.
    """

    x_coeffs: Mapping[int, float]

    def __post_init__(self) -> None:
        coeffs = {}
        for k, c in dict(self.x_coeffs).items():
            if k not in SUPPORTED_POWERS:
                raise ValueError(f"unsupported power x^{k}; supported powers are {SUPPORTED_POWERS}")
            c = float(c)
            if not np.isfinite(c):
                raise ValueError(f"coefficient of x^{k} is not finite")
            coeffs[int(k)] = c
        if not any(c != 0.0 for c in coeffs.values()):
            raise ValueError("cost function needs at least one nonzero coefficient")
        object.__setattr__(self, "x_coeffs", dict(sorted(coeffs.items())))

    def __hash__(self) -> int:
        return hash(tuple(self.x_coeffs.items()))

    @classmethod
    def cubic(cls, z: float = 1.0) -> CostFunction:
        return cls({2: z})

    @classmethod
    def quintic(cls, s: float = 1.0, r4: float = 0.0) -> CostFunction:
        return cls({2: s, 4: r4})

    @property
    def c2(self) -> float:
        return self.x_coeffs.get(2, 0.0)

    @property
    def c4(self) -> float:
        return self.x_coeffs.get(4, 0.0)

    @property
    def degree(self) -> int:
        return max(k for k, c in self.x_coeffs.items() if c != 0.0)

    @property
    def is_pure_cubic(self) -> bool:
        return self.c4 == 0.0

    def coeff_array(self) -> np.ndarray:
        """Coefficients of ``g(x)`` as an array indexed by power (length degree + 1)."""
        out = np.zeros(self.degree + 1)
        for k, c in self.x_coeffs.items():
            if k <= self.degree:
                out[k] = c
        return out

    def __call__(self, x, p):
        x = np.asarray(x, dtype=float)
        return p + sum(c * x**k for k, c in self.x_coeffs.items())

    def to_json(self) -> dict:
        return {f"c{k}": c for k, c in self.x_coeffs.items()}


def cost_operator(cost: CostFunction, n_levels: int) -> np.ndarray:
    """``p + sum_k c_k x^k`` as an ``n_levels`` matrix.

    Matrix powers of the truncated ``x`` are wrong in the last ``degree``
    rows and columns; :func:`variance_of` pads the space to avoid that.
    """
    x, p = quadrature_operators(check_dim(n_levels))
    op = p.copy()
    for k, c in cost.x_coeffs.items():
        op = op + c * np.linalg.matrix_power(x, k)
    return op


def variance_of(rho: DensityMatrix, cost: CostFunction) -> float:
    """``Tr[rho O^2] - Tr[rho O]^2``, exact for the truncated state."""
    n = rho.n_levels
    big = n + 2 * cost.degree
    r = pad(rho.matrix, big)
    op = cost_operator(cost, big)
    mean = np.einsum("ij,ji->", r, op).real
    second = np.einsum("ij,ji->", r, op @ op).real
    return max(second - mean**2, 0.0)


# --- Gaussian moments -------------------------------------------------------


def _double_factorial_moments(order: int) -> np.ndarray:
    # E[y^k] for standard normal y
    m = np.zeros(order + 1)
    m[0] = 1.0
    for k in range(2, order + 1, 2):
        m[k] = m[k - 2] * (k - 1)
    return m


_STD_MOMENTS = _double_factorial_moments(16)


def _centered_poly(coeffs: np.ndarray, mean: float, sigma: float) -> np.ndarray:
    """Coefficients of ``g(mean + sigma*y)`` in powers of ``y``."""
    out = np.zeros(len(coeffs))
    for k, c in enumerate(coeffs):
        if c == 0.0:
            continue
        for j in range(k + 1):
            out[j] += c * comb(k, j) * mean ** (k - j) * sigma**j
    return out


def _poly_gaussian_stats(coeffs: np.ndarray, mean: float, var: float) -> tuple[float, float, float]:
    """Mean, variance of ``g(x)`` and covariance with ``x`` for ``x ~ N(mean, var)``."""
    sigma = np.sqrt(var)
    h = _centered_poly(coeffs, mean, sigma)
    deg = len(h) - 1
    first = sum(h[j] * _STD_MOMENTS[j] for j in range(deg + 1))
    second = sum(h[i] * h[j] * _STD_MOMENTS[i + j] for i in range(deg + 1) for j in range(deg + 1))
    cov = sigma * sum(h[j] * _STD_MOMENTS[j + 1] for j in range(deg + 1))
    return first, second - first**2, cov


def gaussian_cost_stats(cost: CostFunction, mean: np.ndarray, cov: np.ndarray) -> tuple[float, float]:
    """Exact mean and variance of ``f(x, p)`` under a Gaussian Wigner function.

    Conditions ``p`` on ``x``: ``p | x ~ N(p0 + b (x - x0), c)`` with
    ``b = V_xp / V_xx``, ``c = V_pp - V_xp^2 / V_xx``, so
    ``Var f = Var(g(x) + b x) + c``. All moments of ``x`` are Gaussian
    moments up to twice the degree of ``g``.
    """
    x0, p0 = float(mean[0]), float(mean[1])
    vxx, vxp, vpp = float(cov[0, 0]), float(cov[0, 1]), float(cov[1, 1])
    b = vxp / vxx
    coeffs = cost.coeff_array().copy()
    if len(coeffs) < 2:
        coeffs = np.pad(coeffs, (0, 2 - len(coeffs)))
    coeffs[1] += b
    g_mean, g_var, _ = _poly_gaussian_stats(coeffs, x0, vxx)
    f_mean = p0 + g_mean - b * x0
    return f_mean, g_var + vpp - vxp**2 / vxx


def pure_gaussian_covariance(zeta: float, rot: float) -> np.ndarray:
    """Covariance of ``R S(zeta)|0>``: ``(1/2) Rot diag(e^-2z, e^2z) Rot^T``."""
    c, s = np.cos(rot), np.sin(rot)
    rmat = np.array([[c, -s], [s, c]])
    return 0.5 * rmat @ np.diag([np.exp(-2 * zeta), np.exp(2 * zeta)]) @ rmat.T


# --- threshold --------------------------------------------------------------


@dataclass(frozen=True)
class GaussianThreshold:
    """Minimum cost variance over Gaussian states and the pure state attaining it.

    ``argmin_params`` holds ``mean_x``, ``zeta`` (squeezing, positive squeezes
    x) and ``rotation`` of ``R(rotation) S(zeta)|0>`` displaced to ``mean_x``.
    """

    value: float
    argmin_params: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.value > 0:
            raise ValueError(f"Gaussian threshold must be positive, got {self.value}")


def _reduced_objective(coeffs: np.ndarray, mean: float, var: float) -> tuple[float, float]:
    """Variance minimized in closed form over the x-p correlation of the Gaussian.

    For a pure Gaussian with ``Var x = v`` the conditional variance of p is
    ``1/(4v)``; the optimal correlation removes the part of ``g`` linear in x.
    Returns ``(value, optimal slope b)``.

    With ``x = mean + sqrt(v) y`` the removed part is the regression of
    ``g`` on ``y``. Its coefficient is cancelled symbolically rather than by
    subtracting two large numbers, which keeps the value accurate for
    Gaussians placed far from the origin.
    """
    sigma = np.sqrt(var)
    h = _centered_poly(coeffs, mean, sigma)
    deg = len(h) - 1
    # E[y g] = sum_j h_j E[y^(j+1)]; the y-coefficient of the residual is h_1 minus that
    resid = h.copy()
    resid[0] = 0.0
    resid[1] = -sum(h[j] * _STD_MOMENTS[j + 1] for j in range(2, deg + 1))
    first = sum(resid[j] * _STD_MOMENTS[j] for j in range(deg + 1))
    second = sum(resid[i] * resid[j] * _STD_MOMENTS[i + j] for i in range(deg + 1) for j in range(deg + 1))
    cov = sigma * sum(h[j] * _STD_MOMENTS[j + 1] for j in range(1, deg + 1))
    return max(second - first**2, 0.0) + 0.25 / var, -cov / var


def _argmin_params(mean: float, var: float, slope: float) -> dict:
    cov = np.array([[var, slope * var], [slope * var, (0.25 + (slope * var) ** 2) / var]])
    w, v = np.linalg.eigh(cov)
    rot = float(np.arctan2(v[1, 0], v[0, 0]) % np.pi)
    # pure state: the eigenvalues multiply to 1/4, and the large one is the accurate one
    zeta = float(0.5 * np.log(2.0 * w[1]))
    return {"mean_x": float(mean), "zeta": zeta, "rotation": rot, "var_x": float(var), "cov_xp": float(slope * var)}


def cubic_threshold_value(z: float) -> float:
    return CUBIC_CONSTANT * abs(z) ** (2.0 / 3.0)


def _threshold_starts(cost: CostFunction, n_starts: int) -> list[tuple[float, float]]:
    starts = [(0.0, np.log(0.5))]
    if cost.c2 * cost.c4 < 0:
        infl = np.sqrt(-cost.c2 / (6.0 * cost.c4))
        starts += [(infl, np.log(0.5)), (-infl, np.log(0.5))]
    sob = qmc.Sobol(2, scramble=True, seed=20240611).random_base2(max(0, ceil(log2(max(n_starts, 1)))))[:n_starts]
    lo, hi = np.array([-2.0, -2.4 + np.log(0.5)]), np.array([2.0, 2.4 + np.log(0.5)])
    starts += [tuple(lo + u * (hi - lo)) for u in sob]
    return starts


def minimize_threshold(cost: CostFunction, n_starts: int = 16, tol: float = 1e-10) -> GaussianThreshold:
    """Numerical minimum of the cost variance over pure Gaussian states.

    Multi-start Nelder-Mead over ``(mean_x, log Var x)``; the rotation is
    eliminated exactly by :func:`_reduced_objective`. The p-mean drops out
    of the variance and is not a variable.
    """
    coeffs = cost.coeff_array()
    if len(coeffs) < 2:
        coeffs = np.pad(coeffs, (0, 2 - len(coeffs)))

    def objective(q):
        return _reduced_objective(coeffs, q[0], np.exp(q[1]))[0]

    best = None
    unconverged = 0
    for x0 in _threshold_starts(cost, n_starts):
        res = minimize(
            objective,
            np.array(x0),
            method="Nelder-Mead",
            options={"xatol": 1e-9, "fatol": tol, "maxfev": 4000, "maxiter": 4000},
        )
        if not res.success:
            unconverged += 1
        if best is None or res.fun < best.fun:
            best = res
    mean, var = best.x[0], np.exp(best.x[1])
    value, slope = _reduced_objective(coeffs, mean, var)
    return GaussianThreshold(
        float(value),
        _argmin_params(mean, var, slope),
        {"method": "numeric", "n_starts": n_starts, "unconverged_starts": unconverged},
    )


def centered_threshold(c2: float, c4: float) -> tuple[float, float]:
    """Threshold restricted to Gaussians centred at ``x = 0`` for even ``g``.

    ``h(v) = 2 c2^2 v^2 + 24 c2 c4 v^3 + 96 c4^2 v^4 + 1/(4v)`` is minimized
    through the real positive roots of its derivative. Returns
    ``(value, Var x)``. This is the global Gaussian minimum when
    ``c2 * c4 >= 0``; for opposite signs the minimum moves off-centre.
    """
    poly = [384.0 * c4**2, 72.0 * c2 * c4, 4.0 * c2**2, 0.0, 0.0, -0.25]
    while poly and poly[0] == 0.0:
        poly.pop(0)
    roots = np.roots(poly)
    cands = [r.real for r in roots if abs(r.imag) <= 1e-9 * max(1.0, abs(r)) and r.real > 0]
    best = (np.inf, np.nan)
    for v in cands:
        h = 2 * c2**2 * v**2 + 24 * c2 * c4 * v**3 + 96 * c4**2 * v**4 + 0.25 / v
        if h < best[0]:
            best = (h, v)
    return best


def gaussian_threshold(cost: CostFunction, n_starts: int = 16) -> GaussianThreshold:
    """Minimum of the cost variance over Gaussian states and their mixtures.

    Variance is concave in the state, so pure Gaussian states suffice. Pure
    cubic costs return the closed form ``3/2^(5/3) |z|^(2/3)`` (attained by a
    squeezed vacuum); everything else goes through :func:`minimize_threshold`.
    """
    if cost.is_pure_cubic:
        z = cost.c2
        var = (16.0 * z * z) ** (-1.0 / 3.0)
        return GaussianThreshold(
            cubic_threshold_value(z),
            _argmin_params(0.0, var, 0.0),
            {"method": "analytic"},
        )
    return minimize_threshold(cost, n_starts=n_starts)


# --- phase-space picture ----------------------------------------------------


def phase_space_variance(rho: DensityMatrix, cost: CostFunction, grid: WignerGrid) -> float:
    """``int W f^2 - (int W f)^2`` by quadrature over a Wigner grid of ``rho``.

    ``grid`` must hold the Wigner function of ``rho`` (see
    :func:`nlsqueeze.wigner.wigner_evaluate`). Its normalization is checked
    to catch grids that do not cover the state, and its quadrature means
    are compared with those of ``rho`` to catch a grid of another state.
    """
    from .wigner import quadrature_moments

    mass = grid.integral()
    if mass < 0.999:
        raise ValueError(f"grid too small: Wigner function integrates to {mass:.6f} on the grid")
    X, P = np.meshgrid(grid.x_axis, grid.p_axis, indexing="ij")
    w = grid.values * grid.cell_area
    means, _ = quadrature_moments(rho)
    if abs(np.sum(w * X) - means[0]) > 1e-3 or abs(np.sum(w * P) - means[1]) > 1e-3:
        raise ValueError("grid does not hold the Wigner function of this state")
    f = cost(X, P)
    mean = np.sum(w * f)
    return float(np.sum(w * f * f) - mean**2)
