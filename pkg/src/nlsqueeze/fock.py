"""Truncated Fock-space linear algebra.

Kets and operators are plain complex numpy arrays; only density matrices get
a dedicated type because they carry invariants (Hermitian, PSD, unit trace)
that are checked at construction time.

Conventions: hbar = 1, ``x = (a + a^dag)/sqrt(2)``, ``p = (a - a^dag)/(i sqrt(2))``,
so the vacuum quadrature variance is 1/2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

import numpy as np
import scipy.linalg

DEFAULT_N_LEVELS = 60

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10


def check_dim(n_levels: int) -> int:
    """Validate a Fock truncation and return it as ``int``."""
    if isinstance(n_levels, bool) or int(n_levels) != n_levels:
        raise ValueError(f"n_levels must be an integer, got {n_levels!r}")
    n_levels = int(n_levels)
    if n_levels < 2:
        raise ValueError(f"n_levels must be >= 2, got {n_levels}")
    return n_levels


def ladder_operators(n_levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(a, a_dag)`` truncated to ``n_levels`` Fock levels."""
    n_levels = check_dim(n_levels)
    a = np.diag(np.sqrt(np.arange(1, n_levels, dtype=float)), 1).astype(complex)
    return a, a.conj().T


def number_operator(n_levels: int) -> np.ndarray:
    return np.diag(np.arange(check_dim(n_levels), dtype=float)).astype(complex)


def quadrature_operators(n_levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Return the position and momentum quadratures ``(x, p)``."""
    a, ad = ladder_operators(n_levels)
    x = (a + ad) / np.sqrt(2)
    p = (a - ad) / (1j * np.sqrt(2))
    return x, p


def fock_ket(n: int, n_levels: int) -> np.ndarray:
    n_levels = check_dim(n_levels)
    if not 0 <= n < n_levels:
        raise ValueError(f"Fock level {n} outside truncation of {n_levels} levels")
    ket = np.zeros(n_levels, dtype=complex)
    ket[n] = 1.0
    return ket


def operator_exponential(gen: np.ndarray) -> np.ndarray:
    """Matrix exponential of a square generator (Pade scaling-and-squaring)."""
    gen = np.asarray(gen, dtype=complex)
    if gen.ndim != 2 or gen.shape[0] != gen.shape[1]:
        raise ValueError(f"generator must be square, got shape {gen.shape}")
    if not np.all(np.isfinite(gen)):
        raise ValueError("generator has non-finite entries")
    return scipy.linalg.expm(gen)


def pad(matrix: np.ndarray, n_levels: int) -> np.ndarray:
    """Embed a ket or square matrix into a larger Fock space with zeros."""
    matrix = np.asarray(matrix)
    n = matrix.shape[0]
    if n_levels < n:
        raise ValueError("pad cannot shrink a matrix")
    if matrix.ndim == 1:
        out = np.zeros(n_levels, dtype=complex)
        out[:n] = matrix
        return out
    out = np.zeros((n_levels, n_levels), dtype=complex)
    out[:n, :n] = matrix
    return out


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Validated density matrix in a truncated Fock basis.

    Construction checks Hermiticity, positivity and unit trace within 1e-10
    and raises ``ValueError`` otherwise. Nothing is repaired silently; use
    :meth:`repaired` at explicit validation points (file import, tomography
    output).
    """

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {m.shape}")
        check_dim(m.shape[0])
        if not np.all(np.isfinite(m)):
            raise ValueError("density matrix has non-finite entries")
        herm_err = np.max(np.abs(m - m.conj().T))
        if herm_err > HERMITIAN_TOL:
            raise ValueError(f"density matrix not Hermitian (max deviation {herm_err:.3g})")
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        lowest = np.linalg.eigvalsh(m)[0]
        if lowest < -PSD_TOL:
            raise ValueError(f"density matrix has negative eigenvalue {lowest:.3g}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_levels(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_ket(cls, ket: np.ndarray) -> DensityMatrix:
        ket = np.asarray(ket, dtype=complex)
        norm = np.linalg.norm(ket)
        if not np.isfinite(norm) or norm == 0:
            raise ValueError("ket is not normalizable")
        ket = ket / norm
        return cls(np.outer(ket, ket.conj()))

    @classmethod
    def repaired(cls, matrix: np.ndarray, tol: float = PSD_TOL) -> DensityMatrix:
        """Hermitize, clip eigenvalues in ``[-tol, 0)`` to zero, renormalize.

        Eigenvalues below ``-tol`` are a genuine defect and raise.
        """
        m = np.asarray(matrix, dtype=complex)
        m = 0.5 * (m + m.conj().T)
        w, v = np.linalg.eigh(m)
        if w[0] < -tol * max(1.0, abs(np.trace(m))):
            raise ValueError(f"matrix has negative eigenvalue {w[0]:.3g}")
        w = np.clip(w, 0.0, None)
        if w.sum() <= 0:
            raise ValueError("matrix has zero trace")
        m = (v * (w / w.sum())) @ v.conj().T
        return cls(0.5 * (m + m.conj().T))

    def spectral_factor(self, cutoff: float = 1e-14) -> np.ndarray:
        """Return ``V`` with ``rho = V V^dag``, dropping eigenvalues below ``cutoff``."""
        w, v = np.linalg.eigh(self.matrix)
        keep = w > cutoff
        if not np.any(keep):
            keep = w == w.max()
        return v[:, keep] * np.sqrt(w[keep])

    def truncated(self, n_levels: int) -> DensityMatrix:
        """Resize the truncation. Growing pads with zeros; shrinking must be lossless."""
        n_levels = check_dim(n_levels)
        if n_levels >= self.n_levels:
            return DensityMatrix(pad(self.matrix, n_levels))
        block = self.matrix[:n_levels, :n_levels]
        lost = 1.0 - np.trace(block).real
        if lost > 1e-8:
            raise ValueError(f"shrinking to {n_levels} levels drops population {lost:.3g}")
        return DensityMatrix.repaired(block)

    def to_json(self) -> dict[str, Any]:
        return {
            "n_levels": self.n_levels,
            "re": self.matrix.real.tolist(),
            "im": self.matrix.imag.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> DensityMatrix:
        for key in ("n_levels", "re", "im"):
            if key not in obj:
                raise ValueError(f"density matrix JSON is missing field {key!r}")
        n = obj["n_levels"]
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
        if re.shape != (n, n):
            raise ValueError(f"field 're' has shape {re.shape}, expected ({n}, {n})")
        if im.shape != (n, n):
            raise ValueError(f"field 'im' has shape {im.shape}, expected ({n}, {n})")
        return cls.repaired(re + 1j * im)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def expectation(rho: DensityMatrix, obs: np.ndarray) -> complex:
    """``Tr[rho obs]``."""
    obs = np.asarray(obs)
    if obs.shape != rho.matrix.shape:
        raise ValueError(f"operator shape {obs.shape} does not match state shape {rho.matrix.shape}")
    return complex(np.einsum("ij,ji->", rho.matrix, obs))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``.

    States of different truncation are compared in the larger space.
    """
    n = max(rho.n_levels, sigma.n_levels)
    a, b = pad(rho.matrix, n), pad(sigma.matrix, n)
    # trace norm of sqrt(a) sqrt(b); better conditioned than sqrt of sqrt(a) b sqrt(a)
    f = float(np.sum(np.linalg.svd(_psd_sqrt(a) @ _psd_sqrt(b), compute_uv=False)) ** 2)
    return min(max(f, 0.0), 1.0)
