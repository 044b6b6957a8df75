"""State factories and decoherence channels."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.special import eval_laguerre, gammaln

from .fock import (
    DensityMatrix,
    check_dim,
    ladder_operators,
    operator_exponential,
)

MAX_ALPHA = 2.5
MAX_SQUEEZE = 1.2
MAX_ADDED = 5

# extra levels used when a state is built through a truncated generator
_PAD = 40


@dataclass(frozen=True)
class PhotonAddedSpec:
    alpha: complex
    n_added: int

    def __post_init__(self) -> None:
        if int(self.n_added) != self.n_added or not 0 <= self.n_added <= MAX_ADDED:
            raise ValueError(f"n_added must be an integer in [0, {MAX_ADDED}], got {self.n_added}")
        if abs(self.alpha) > MAX_ALPHA:
            raise ValueError(f"|alpha| = {abs(self.alpha):.3g} exceeds supported {MAX_ALPHA}")


def _coherent_amplitudes(alpha: complex, n_levels: int) -> np.ndarray:
    amp = np.zeros(n_levels, dtype=complex)
    if alpha == 0:
        amp[0] = 1.0
        return amp
    n = np.arange(n_levels)
    # alpha**n / sqrt(n!) in log space so large n does not overflow
    logmag = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(logmag) * np.exp(1j * n * np.angle(alpha))


def coherent_ket(alpha: complex, n_levels: int) -> np.ndarray:
    """Coherent state ``|alpha>`` with amplitudes ``exp(-|a|^2/2) a^n / sqrt(n!)``."""
    n_levels = check_dim(n_levels)
    alpha = complex(alpha)
    if abs(alpha) > MAX_ALPHA:
        raise ValueError(f"|alpha| = {abs(alpha):.3g} exceeds supported {MAX_ALPHA}")
    ket = _coherent_amplitudes(alpha, n_levels)
    tail = 1.0 - np.vdot(ket, ket).real
    if tail > 1e-8:
        raise ValueError(
            f"coherent state |alpha|={abs(alpha):.3g} loses {tail:.2g} norm at {n_levels} levels"
        )
    return ket


def photon_added_norm(alpha: complex, n_added: int) -> float:
    """Closed form ``<alpha| a^n a^dag^n |alpha> = n! L_n(-|alpha|^2)``."""
    return factorial(n_added) * float(eval_laguerre(n_added, -abs(alpha) ** 2))


def photon_added_coherent(spec: PhotonAddedSpec, n_levels: int) -> np.ndarray:
    """Normalized ``a^dag^n |alpha>``.

    The analytic Laguerre norm only serves as a truncation sentinel: if the
    squared norm of the truncated vector misses it by more than 1e-6
    (relative), the truncation is too small and ``ValueError`` is raised.
    """
    n_levels = check_dim(n_levels)
    n = spec.n_added
    big = n_levels + n
    ket = _coherent_amplitudes(complex(spec.alpha), big)
    _, ad = ladder_operators(big)
    for _ in range(n):
        ket = ad @ ket
    ket = ket[:n_levels]
    norm2 = np.vdot(ket, ket).real
    expected = photon_added_norm(spec.alpha, n)
    if abs(norm2 - expected) > 1e-6 * expected:
        raise ValueError(
            f"truncation overflow: squared norm {norm2:.10g} vs analytic {expected:.10g} "
            f"at {n_levels} levels"
        )
    return ket / np.sqrt(norm2)


def squeeze_generator(r: float, n_levels: int) -> np.ndarray:
    a, ad = ladder_operators(n_levels)
    return 0.5 * r * (a @ a - ad @ ad)


def squeezed_vacuum_ket(r: float, n_levels: int) -> np.ndarray:
    """``S(r)|0>`` with ``S = exp((r/2)(a^2 - a^dag^2))``; ``r > 0`` squeezes x."""
    n_levels = check_dim(n_levels)
    if abs(r) > MAX_SQUEEZE:
        raise ValueError(f"|r| = {abs(r):.3g} exceeds supported {MAX_SQUEEZE}")
    big = n_levels + _PAD
    vac = np.zeros(big, dtype=complex)
    vac[0] = 1.0
    ket = (operator_exponential(squeeze_generator(r, big)) @ vac)[:n_levels]
    norm2 = np.vdot(ket, ket).real
    if 1.0 - norm2 > 1e-8:
        raise ValueError(f"squeezed vacuum r={r} loses {1 - norm2:.2g} norm at {n_levels} levels")
    return ket / np.sqrt(norm2)


def loss_kraus(eta: float, n_levels: int) -> list[np.ndarray]:
    """Kraus operators ``sqrt((1-eta)^k / k!) eta^(n/2) a^k`` for k < n_levels."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"transmittance must lie in (0, 1], got {eta}")
    a, _ = ladder_operators(n_levels)
    damp = np.diag(eta ** (np.arange(n_levels) / 2.0)).astype(complex)
    kraus = []
    ak = np.eye(n_levels, dtype=complex)
    for k in range(n_levels):
        weight = np.sqrt((1.0 - eta) ** k / factorial(k))
        kraus.append(weight * damp @ ak)
        ak = a @ ak
    return kraus


def loss_channel(rho: DensityMatrix, eta: float) -> DensityMatrix:
    """Pure-loss channel at power transmittance ``eta``."""
    if eta == 1.0:
        return rho
    out = np.zeros_like(rho.matrix)
    for k in loss_kraus(eta, rho.n_levels):
        out += k @ rho.matrix @ k.conj().T
    return DensityMatrix(0.5 * (out + out.conj().T))


def loss_adjoint(op: np.ndarray, eta: float) -> np.ndarray:
    """Heisenberg-picture loss map ``sum_k K_k^dag op K_k``."""
    op = np.asarray(op, dtype=complex)
    if eta == 1.0:
        return op.copy()
    out = np.zeros_like(op)
    for k in loss_kraus(eta, op.shape[0]):
        out += k.conj().T @ op @ k
    return out


def dephasing_channel(rho: DensityMatrix, sigma: float) -> DensityMatrix:
    """Gaussian phase diffusion: ``rho_mn *= exp(-sigma^2 (m-n)^2 / 2)``."""
    if sigma < 0:
        raise ValueError(f"dephasing sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return rho
    n = np.arange(rho.n_levels)
    decay = np.exp(-0.5 * sigma**2 * (n[:, None] - n[None, :]) ** 2)
    return DensityMatrix(rho.matrix * decay)
