"""Gaussian unitaries ``U = R(theta) D(alpha) S(r) R(phi)`` and their phase-space action.

``R(t) = exp(i t a^dag a)``, ``D(alpha) = exp(alpha a^dag - alpha* a)`` and
``S(r) = exp((r/2)(a^2 - a^dag^2))``. With these conventions the Heisenberg
picture acts affinely on the quadrature vector ``v = (x, p)``::

    U^dag v U = M v + d,
    M = Rot(theta) diag(e^-r, e^r) Rot(phi),   d = Rot(theta) sqrt(2) (Re alpha, Im alpha)

where ``Rot(t) = [[cos t, -sin t], [sin t, cos t]]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import check_dim, ladder_operators, operator_exponential

MAX_ALPHA = 2.5
MAX_SQUEEZE = 1.2


@dataclass(frozen=True)
class GaussianUnitaryParams:
    theta: float = 0.0
    phi: float = 0.0
    r: float = 0.0
    alpha: complex = 0j

    @classmethod
    def from_vector(cls, v) -> GaussianUnitaryParams:
        theta, phi, r, re, im = (float(t) for t in v)
        return cls(theta, phi, r, complex(re, im))

    def as_vector(self) -> np.ndarray:
        return np.array([self.theta, self.phi, self.r, self.alpha.real, self.alpha.imag])

    def check_regime(self) -> None:
        """Raise if the parameters leave the regime where truncated operators are trusted."""
        if abs(self.r) > MAX_SQUEEZE:
            raise ValueError(f"|r| = {abs(self.r):.3g} exceeds supported {MAX_SQUEEZE}")
        if abs(self.alpha) > MAX_ALPHA:
            raise ValueError(f"|alpha| = {abs(self.alpha):.3g} exceeds supported {MAX_ALPHA}")

    def to_json(self) -> dict:
        return {
            "theta": self.theta,
            "phi": self.phi,
            "r": self.r,
            "alpha_re": self.alpha.real,
            "alpha_im": self.alpha.imag,
        }


@dataclass(frozen=True)
class SymplecticAction:
    M: np.ndarray
    d: np.ndarray

    def __post_init__(self) -> None:
        det = np.linalg.det(self.M)
        if abs(det - 1.0) > 1e-10:
            raise ValueError(f"matrix is not symplectic (det = {det!r})")


def rotation_matrix(t: float) -> np.ndarray:
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]])


def symplectic_of(params: GaussianUnitaryParams) -> SymplecticAction:
    """Affine Heisenberg action ``(x, p) -> M (x, p) + d`` of the unitary."""
    squeeze = np.diag([np.exp(-params.r), np.exp(params.r)])
    outer = rotation_matrix(params.theta)
    M = outer @ squeeze @ rotation_matrix(params.phi)
    d = outer @ (np.sqrt(2.0) * np.array([params.alpha.real, params.alpha.imag]))
    return SymplecticAction(M, d)


def rotation(t: float, n_levels: int) -> np.ndarray:
    return np.diag(np.exp(1j * t * np.arange(check_dim(n_levels))))


def displacement(alpha: complex, n_levels: int) -> np.ndarray:
    a, ad = ladder_operators(n_levels)
    return operator_exponential(alpha * ad - np.conj(alpha) * a)


def squeezing(r: float, n_levels: int) -> np.ndarray:
    a, ad = ladder_operators(n_levels)
    return operator_exponential(0.5 * r * (a @ a - ad @ ad))


def build_gaussian_unitary(params: GaussianUnitaryParams, n_levels: int) -> np.ndarray:
    """Truncated matrix of ``R(theta) D(alpha) S(r) R(phi)``.

    Each factor is the exponential of its truncated generator, so the result
    is only unitary on low-occupation states; build in a padded space and crop
    when the action on a specific state matters.
    """
    params.check_regime()
    n_levels = check_dim(n_levels)
    return (
        rotation(params.theta, n_levels)
        @ displacement(params.alpha, n_levels)
        @ squeezing(params.r, n_levels)
        @ rotation(params.phi, n_levels)
    )


def transformed_quadratures(action: SymplecticAction, n_levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Matrices of ``M (x, p) + d`` built directly from truncated ``x`` and ``p``."""
    a, ad = ladder_operators(n_levels)
    x = (a + ad) / np.sqrt(2)
    p = (a - ad) / (1j * np.sqrt(2))
    eye = np.eye(n_levels)
    (m00, m01), (m10, m11) = action.M
    return (
        m00 * x + m01 * p + action.d[0] * eye,
        m10 * x + m11 * p + action.d[1] * eye,
    )


def canonical_params(params: GaussianUnitaryParams) -> GaussianUnitaryParams:
    """Equivalent parameters for costs linear in ``p``.

    A cost ``p + g(x)`` only sees the x-component of the Heisenberg
    displacement; the p-component shifts the mean of the cost and drops out
    of its variance. The returned parameters keep ``d_x`` and set ``d_p = 0``,
    which is the shortest displacement with the same cost variance.
    """
    d = symplectic_of(params).d
    a = rotation_matrix(-params.theta) @ np.array([d[0], 0.0]) / np.sqrt(2.0)
    return GaussianUnitaryParams(params.theta, params.phi, params.r, complex(a[0], a[1]))


__all__ = [
    "GaussianUnitaryParams",
    "SymplecticAction",
    "build_gaussian_unitary",
    "canonical_params",
    "displacement",
    "rotation",
    "rotation_matrix",
    "squeezing",
    "symplectic_of",
    "transformed_quadratures",
]
