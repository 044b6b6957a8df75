import os
import subprocess
import sys

import numpy as np
import pytest

from nlsqueeze import _core, _fallback

from conftest import random_state

try:
    from nlsqueeze import _kernels
except ImportError:  # pragma: no cover - extension not built
    _kernels = None

needs_compiled = pytest.mark.skipif(_kernels is None, reason="compiled extension not built")


def _moment_inputs(seed, degree=4):
    rho = random_state(seed, n_levels=10)
    v = rho.spectral_factor()
    vt = np.zeros((v.shape[1], rho.n_levels + degree), complex)
    vt[:, : rho.n_levels] = v.T
    rng = np.random.default_rng(seed)
    kx, kp = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
    coeffs = np.array([0.0, 0.0, rng.normal(), 0.0, rng.normal()])
    return rho, vt, kx, float(rng.normal()), kp, float(rng.normal()), coeffs


@pytest.mark.parametrize("seed", range(5))
def test_fallback_cost_moments_against_dense_operators(seed):
    rho, vt, kx, dx, kp, dp, coeffs = _moment_inputs(seed)
    n = vt.shape[1]
    a = np.diag(np.sqrt(np.arange(1, n)), 1)
    xp = (kx * a + np.conj(kx) * a.T) / np.sqrt(2) + dx * np.eye(n)
    pp = (kp * a + np.conj(kp) * a.T) / np.sqrt(2) + dp * np.eye(n)
    op = pp + sum(c * np.linalg.matrix_power(xp, k) for k, c in enumerate(coeffs))
    r = np.zeros((n, n), complex)
    r[: rho.n_levels, : rho.n_levels] = rho.matrix
    mean, second = _fallback.cost_moments(vt, _fallback.moment_amplitudes(n), kx, dx, kp, dp, coeffs)
    assert mean == pytest.approx(np.trace(r @ op).real, rel=1e-12, abs=1e-10)
    assert second == pytest.approx(np.trace(r @ op.conj().T @ op).real, rel=1e-12, abs=1e-10)


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_compiled_cost_moments_match_fallback(seed):
    _, vt, kx, dx, kp, dp, coeffs = _moment_inputs(seed)
    amp = _fallback.moment_amplitudes(vt.shape[1])
    ref = _fallback.cost_moments(vt, amp, kx, dx, kp, dp, coeffs)
    got = _kernels.cost_moments(vt, amp, kx, dx, kp, dp, coeffs)
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


@needs_compiled
@pytest.mark.parametrize("seed", range(3))
def test_compiled_wigner_matches_fallback(seed):
    rho = random_state(seed)
    xs, ps = np.linspace(-4, 4, 17), np.linspace(-3, 5, 11)
    np.testing.assert_allclose(_kernels.wigner_grid(rho.matrix, xs, ps), _fallback.wigner_grid(rho.matrix, xs, ps), atol=1e-13)


def test_backend_reported():
    assert _core.BACKEND in ("compiled", "python")


def test_environment_forces_fallback():
    env = dict(os.environ, NLSQUEEZE_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from nlsqueeze import _core; print(_core.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
