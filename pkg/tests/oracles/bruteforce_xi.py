"""Independent brute-force oracle for regression values of xi.

Builds every Gaussian unitary as a dense matrix in a large Fock space (from
one-off eigendecompositions of the squeeze and displacement generators),
transforms the state in the Schrodinger picture, and evaluates the cost
variance with dense operator products. A coarse grid over
(phi, r, theta, x-displacement, quartic coefficient) picks the start for a
Nelder-Mead polish. Thresholds come from ``threshold_grid``. Nothing is
imported from the package.

Run from the repository root: ``python3 -m tests.oracles.bruteforce_xi``.
The printed values are frozen in the witness and acceptance tests.
"""

import itertools
import math

import numpy as np
from scipy.optimize import minimize

from tests.oracles.threshold_grid import threshold, threshold_near, threshold_with_argmin

DIM = 220
KEEP = 60

_A = np.diag(np.sqrt(np.arange(1, DIM)), 1).astype(complex)
_AD = _A.conj().T
_X = (_A + _AD) / math.sqrt(2)
_P = (_A - _AD) / (1j * math.sqrt(2))
_X2 = _X @ _X
_X4 = _X2 @ _X2
# exp(r (a^2 - a^dag^2)/2) = exp(-i r H_s) with H_s Hermitian
_HS_W, _HS_V = np.linalg.eigh(1j * 0.5 * (_A @ _A - _AD @ _AD))
# exp(d (a^dag - a)/sqrt(2)) = exp(-i d p)
_P_W, _P_V = np.linalg.eigh(_P)


def _squeeze(r):
    return (_HS_V * np.exp(-1j * r * _HS_W)) @ _HS_V.conj().T


def _shift_x(d):
    return (_P_V * np.exp(-1j * d * _P_W)) @ _P_V.conj().T


def _rotate(rho, t):
    ph = np.exp(1j * t * np.arange(DIM))
    return ph[:, None] * rho * ph.conj()[None, :]


def pacs(alpha, n):
    k = np.arange(DIM + n)
    if alpha == 0:
        v = (k == 0).astype(complex)
    else:
        v = np.exp(-abs(alpha) ** 2 / 2 + k * math.log(abs(alpha)) - 0.5 * np.array([math.lgamma(i + 1) for i in k])).astype(complex)
    up = np.diag(np.sqrt(np.arange(1, DIM + n)), -1)
    for _ in range(n):
        v = up @ v
    v = v[:DIM]
    v[KEEP:] = 0
    return np.outer(v, v.conj()) / np.vdot(v, v).real


def fock(n):
    rho = np.zeros((DIM, DIM), complex)
    rho[n, n] = 1
    return rho


def loss(rho, eta):
    out = np.zeros_like(rho)
    n = np.arange(DIM)
    for k in range(KEEP):
        c = np.zeros((DIM, DIM))
        m = n[k:]
        c[m - k, m] = np.sqrt(np.array([math.comb(int(i), k) for i in m], float) * eta ** (m - k) * (1 - eta) ** k)
        out += c @ rho @ c.T
    return out


def cost_variance(rho, c4):
    op = _P + _X2 + c4 * _X4
    m = np.trace(rho @ op).real
    return np.trace(rho @ op @ op).real - m * m


def transform(rho, theta, phi, r, dx):
    rho = _rotate(rho, phi)
    s = _squeeze(r)
    rho = s @ rho @ s.conj().T
    d = _shift_x(dx)
    return _rotate(d @ rho @ d.conj().T, theta)


def centre(rho):
    a_mean = np.trace(rho @ _A)
    x0, p0 = math.sqrt(2) * a_mean.real, math.sqrt(2) * a_mean.imag
    # exp(-i x0 p) shifts x by x0; exp(i p0 x) shifts p by p0
    w, v = np.linalg.eigh(_X)
    dp = (v * np.exp(1j * -p0 * w)) @ v.conj().T
    d = _shift_x(-x0) @ dp
    return d @ rho @ d.conj().T


def xi_brute(rho, c4_grid=(0.0,), grid=(10, 10, 9, 9)):
    """Minimum over unitaries and quartic coefficients of variance / threshold."""
    rho = centre(rho)
    fits = {c: threshold_with_argmin(1.0, c) for c in c4_grid}
    thr = {c: v for c, (v, _) in fits.items()}
    best = (np.inf, None)
    for phi, r in itertools.product(np.linspace(0, np.pi, grid[0], endpoint=False), np.linspace(-1.2, 1.2, grid[2])):
        s = _squeeze(r)
        sq = s @ _rotate(rho, phi) @ s.conj().T
        for dx in np.linspace(-2, 2, grid[3]):
            d = _shift_x(dx)
            shifted = d @ sq @ d.conj().T
            for theta in np.linspace(0, np.pi, grid[1], endpoint=False):
                t = _rotate(shifted, theta)
                for c in c4_grid:
                    val = cost_variance(t, c) / thr[c]
                    if val < best[0]:
                        best = (val, (theta, phi, r, dx, c))
    theta, phi, r, dx, c = best[1]
    quintic = len(c4_grid) > 1

    warm = [fits[c][1]]
    anchors = [a for _, a in fits.values()]

    def f(q):
        if not quintic:
            return cost_variance(transform(rho, *q[:4]), 0.0) / thr[0.0]
        # a single warm start can follow a local branch of the Gaussian minimum, which
        # inflates the threshold; polish from every grid argmin too and keep the lowest
        value, warm[0] = min((threshold_near(1.0, q[4], w) for w in [warm[0], *anchors]), key=lambda t: t[0])
        return cost_variance(transform(rho, *q[:4]), q[4]) / value

    x0 = [theta, phi, r, dx] + ([c] if quintic else [])
    res = minimize(f, x0, method="Nelder-Mead", options={"xatol": 1e-8, "fatol": 1e-11, "maxfev": 3000})
    if quintic:
        # report against the global threshold at the final coefficient
        return float(cost_variance(transform(rho, *res.x[:4]), res.x[4]) / threshold(1.0, res.x[4])), res.x
    return float(res.fun), res.x


def main(which):
    if which == "cubic":
        for label, rho in [
            ("fock 1", fock(1)),
            ("pacs 0.5 1", pacs(0.5, 1)),
            ("pacs 1.0 1", pacs(1.0, 1)),
            ("pacs 1.5 1", pacs(1.5, 1)),
            ("pacs 1.43 1 eta 0.6", loss(pacs(1.43, 1), 0.6)),
        ]:
            val, x = xi_brute(rho)
            print(label, repr(val), np.round(x, 4).tolist(), flush=True)
    else:
        for label, rho in [("pacs 1.0 1", pacs(1.0, 1)), ("pacs 0.84 2", pacs(0.84, 2))]:
            val, x = xi_brute(rho, c4_grid=(-0.2, -0.1, -0.05, 0.0, 0.05), grid=(8, 8, 7, 7))
            print(label, repr(val), np.round(x, 4).tolist(), flush=True)


if __name__ == "__main__":
    import sys

    main(sys.argv[1] if len(sys.argv) > 1 else "cubic")
