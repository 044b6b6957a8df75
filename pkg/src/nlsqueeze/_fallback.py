"""Pure-numpy implementations of the hot kernels.

Signatures match the compiled ``_kernels`` module exactly; ``_core`` picks
one of the two at import time.
"""

import numpy as np


def _apply_linear(v, kappa, shift, amp):
    # (kappa a + conj(kappa) a^dag)/sqrt(2) + shift, acting on the columns of v
    out = shift * v
    out[:-1] += kappa * amp * v[1:]
    out[1:] += np.conj(kappa) * amp * v[:-1]
    return out


def moment_amplitudes(n):
    """Ladder amplitudes ``sqrt(i/2)``, i = 1..n-1, shared by both kernels."""
    return np.sqrt(np.arange(1, n, dtype=float) / 2.0)


def cost_moments(vt, amp, kx, dx, kp, dp, coeffs):
    """First and second moment of ``O = p' + sum_k c_k x'^k`` in the state ``V V^dag``.

    ``x' = (kx a + conj(kx) a^dag)/sqrt(2) + dx`` and likewise ``p'``.
    ``vt`` holds ``V`` transposed, shape (K, L), C-contiguous; its last
    ``len(coeffs) - 1`` columns must be zero padding so every ladder
    application stays exact. ``amp`` comes from :func:`moment_amplitudes`.
    Returns ``(Re Tr[rho O], Tr[rho O^2])``.
    """
    v = vt.T
    amp = amp[:, None]
    out = _apply_linear(v, kp, dp, amp)
    if coeffs[0] != 0.0:
        out += coeffs[0] * v
    power = v
    for k in range(1, coeffs.shape[0]):
        power = _apply_linear(power, kx, dx, amp)
        if coeffs[k] != 0.0:
            out += coeffs[k] * power
    mean = np.vdot(v, out).real
    second = np.vdot(out, out).real
    return mean, second


def wigner_grid(rho, xvec, pvec):
    """Wigner function ``W[i, j] = W(x_i, p_j)`` by the Laguerre recursion in the Fock basis."""
    rho = np.asarray(rho, dtype=complex)
    n = rho.shape[0]
    X, P = np.meshgrid(np.asarray(xvec, float), np.asarray(pvec, float), indexing="ij")
    beta2 = np.sqrt(2.0) * (X + 1j * P)  # twice the coherent amplitude
    basis = [None] * n
    basis[0] = np.exp(-0.5 * np.abs(beta2) ** 2) / np.pi
    w = rho[0, 0].real * basis[0].real
    for col in range(1, n):
        basis[col] = beta2 * basis[col - 1] / np.sqrt(col)
        w += 2.0 * np.real(rho[0, col] * basis[col])
    cbeta2 = np.conj(beta2)
    for row in range(1, n):
        sr = np.sqrt(row)
        prev = basis[row]
        basis[row] = (cbeta2 * prev - sr * basis[row - 1]) / sr
        w += rho[row, row].real * basis[row].real
        for col in range(row + 1, n):
            nxt = (beta2 * basis[col - 1] - sr * prev) / np.sqrt(col)
            prev = basis[col]
            basis[col] = nxt
            w += 2.0 * np.real(rho[row, col] * nxt)
    return w
