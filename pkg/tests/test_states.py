from math import comb, factorial

import numpy as np
import pytest

from nlsqueeze.fock import DensityMatrix, expectation, fock_ket, ladder_operators, operator_exponential, quadrature_operators
from nlsqueeze.states import (
    PhotonAddedSpec,
    coherent_ket,
    dephasing_channel,
    loss_adjoint,
    loss_channel,
    loss_kraus,
    photon_added_coherent,
    photon_added_norm,
    squeezed_vacuum_ket,
)

from conftest import random_state


@pytest.mark.parametrize("alpha", [0.3, 1.0 - 0.5j, 2.0j, -1.7])
def test_coherent_matches_displaced_vacuum(alpha):
    big = 90
    a, ad = ladder_operators(big)
    vac = np.zeros(big, complex)
    vac[0] = 1
    ref = (operator_exponential(alpha * ad - np.conj(alpha) * a) @ vac)[:40]
    np.testing.assert_allclose(coherent_ket(alpha, 40), ref, atol=1e-10)


def test_coherent_is_annihilation_eigenstate():
    ket = coherent_ket(0.8 + 0.4j, 40)
    a, _ = ladder_operators(40)
    np.testing.assert_allclose((a @ ket)[:30], (0.8 + 0.4j) * ket[:30], atol=1e-12)


def test_coherent_truncation_guard():
    with pytest.raises(ValueError, match="loses"):
        coherent_ket(2.4, 8)
    with pytest.raises(ValueError, match="exceeds"):
        coherent_ket(3.0, 60)


@pytest.mark.parametrize("n", range(5))
def test_laguerre_norm_against_direct_sum(n):
    alpha = 1.3
    # <alpha| a^n a^dag^n |alpha> = sum_k |alpha|^(2k) e^-|alpha|^2 (k+n)!/k!^2 ... computed as a series
    k = np.arange(80)
    w = np.exp(-alpha**2) * np.array([alpha ** (2 * i) / factorial(i) for i in k])
    direct = np.sum(w * np.array([factorial(i + n) / factorial(i) for i in k]))
    assert photon_added_norm(alpha, n) == pytest.approx(direct, rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_photon_added_at_zero_is_fock(n):
    ket = photon_added_coherent(PhotonAddedSpec(0.0, n), 20)
    np.testing.assert_allclose(np.abs(ket), np.abs(fock_ket(n, 20)), atol=1e-14)


def test_photon_added_mean_number_closed_form():
    # <n> for a^dag |alpha>: (|a|^4 + 3|a|^2 + 1) / (1 + |a|^2)
    a = 1.1
    ket = photon_added_coherent(PhotonAddedSpec(a, 1), 60)
    nbar = np.sum(np.arange(60) * np.abs(ket) ** 2)
    assert nbar == pytest.approx((a**4 + 3 * a**2 + 1) / (1 + a**2), rel=1e-10)


def test_photon_added_validation():
    with pytest.raises(ValueError):
        PhotonAddedSpec(0.5, 6)
    with pytest.raises(ValueError):
        PhotonAddedSpec(0.5, -1)
    with pytest.raises(ValueError, match="truncation overflow"):
        photon_added_coherent(PhotonAddedSpec(2.4, 3), 12)


@pytest.mark.parametrize("r", [-0.8, 0.25, 1.0])
def test_squeezed_vacuum_closed_form(r):
    ket = squeezed_vacuum_ket(r, 80)
    m = np.arange(40)
    amp = np.array([(-np.tanh(r)) ** i * np.sqrt(float(factorial(2 * i))) / (2.0**i * factorial(i)) for i in range(40)])
    ref = np.zeros(80, complex)
    ref[::2] = amp / np.sqrt(np.cosh(r))
    np.testing.assert_allclose(ket, ref, atol=1e-9)
    x, p = quadrature_operators(80)
    rho = DensityMatrix.from_ket(ket)
    assert expectation(rho, x @ x).real == pytest.approx(0.5 * np.exp(-2 * r), rel=1e-7)
    assert expectation(rho, p @ p).real == pytest.approx(0.5 * np.exp(2 * r), rel=1e-7)


@pytest.mark.parametrize("eta", [0.2, 0.6, 0.95])
def test_loss_on_fock_is_binomial(eta):
    rho = loss_channel(DensityMatrix.from_ket(fock_ket(3, 8)), eta)
    ref = [comb(3, k) * eta**k * (1 - eta) ** (3 - k) for k in range(4)]
    np.testing.assert_allclose(np.diag(rho.matrix).real[:4], ref, atol=1e-13)


def test_loss_on_coherent_shrinks_amplitude():
    rho = loss_channel(DensityMatrix.from_ket(coherent_ket(1.2, 40)), 0.49)
    ref = coherent_ket(0.7 * 1.2, 40)
    assert np.vdot(ref, rho.matrix @ ref).real == pytest.approx(1.0, abs=1e-10)


def test_kraus_completeness():
    n = 12
    total = sum(k.conj().T @ k for k in loss_kraus(0.7, n))
    np.testing.assert_allclose(total, np.eye(n), atol=1e-12)
    with pytest.raises(ValueError):
        loss_kraus(0.0, n)


@pytest.mark.parametrize("seed", range(4))
def test_loss_adjoint_duality(seed):
    rho = random_state(seed)
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(rho.n_levels,) * 2) + 1j * rng.normal(size=(rho.n_levels,) * 2)
    obs = g + g.conj().T
    lhs = np.trace(loss_channel(rho, 0.55).matrix @ obs)
    rhs = np.trace(rho.matrix @ loss_adjoint(obs, 0.55))
    assert lhs == pytest.approx(rhs, abs=1e-11)


def test_loss_composes():
    rho = random_state(7)
    twice = loss_channel(loss_channel(rho, 0.8), 0.5)
    once = loss_channel(rho, 0.4)
    np.testing.assert_allclose(twice.matrix, once.matrix, atol=1e-12)


def test_dephasing_keeps_populations_and_damps_coherences():
    rho = DensityMatrix.from_ket(coherent_ket(1.0, 30))
    out = dephasing_channel(rho, 0.3)
    np.testing.assert_allclose(np.diag(out.matrix), np.diag(rho.matrix), atol=1e-15)
    assert abs(out.matrix[0, 2]) == pytest.approx(abs(rho.matrix[0, 2]) * np.exp(-0.5 * 0.09 * 4))
    assert dephasing_channel(rho, 0.0) is rho
    with pytest.raises(ValueError):
        dephasing_channel(rho, -0.1)


def test_coherent_examples():
    assert np.allclose(coherent_ket(0.0, 5), fock_ket(0, 5))
    ket = coherent_ket(1.0, 40)
    assert ket[0].real == pytest.approx(np.exp(-0.5))
    a, _ = ladder_operators(40)
    assert np.vdot(ket, a @ ket) == pytest.approx(1.0, abs=1e-8)


def test_photon_added_examples():
    assert photon_added_norm(1.0, 1) == pytest.approx(2.0)
    np.testing.assert_allclose(photon_added_coherent(PhotonAddedSpec(0.0, 0), 6), fock_ket(0, 6), atol=1e-15)


@pytest.mark.parametrize("n", [0, 1, 2, 3])
@pytest.mark.parametrize("alpha", [0.4, 1.0, 2.0])
def test_truncated_norm_matches_laguerre(n, alpha):
    # unnormalized a^dag^n |alpha> built from explicit amplitudes in a generous space
    big = 120
    k = np.arange(big)
    from scipy.special import gammaln

    amp = np.exp(-alpha**2 / 2 + k * np.log(alpha) - 0.5 * gammaln(k + 1))
    shifted = np.zeros(big + n)
    # a^dag^n |k> = sqrt((k+1)...(k+n)) |k+n>
    shifted[n:] = amp * np.exp(0.5 * (gammaln(k + n + 1) - gammaln(k + 1)))
    assert np.sum(shifted**2) == pytest.approx(photon_added_norm(alpha, n), rel=1e-6)


def test_squeezed_examples():
    np.testing.assert_allclose(squeezed_vacuum_ket(0.0, 10), fock_ket(0, 10), atol=1e-15)
    rho = DensityMatrix.from_ket(squeezed_vacuum_ket(0.5, 60))
    x, p = quadrature_operators(60)
    vx, vp = expectation(rho, x @ x).real, expectation(rho, p @ p).real
    assert vx == pytest.approx(np.exp(-1) / 2, abs=1e-8)
    assert vx * vp == pytest.approx(0.25, abs=1e-6)


def test_loss_examples():
    rho = random_state(2)
    assert loss_channel(rho, 1.0) is rho
    vac = DensityMatrix.from_ket(fock_ket(0, rho.n_levels))
    from nlsqueeze.fock import fidelity

    assert fidelity(loss_channel(rho, 1e-6), vac) > 1 - 1e-4
    out = loss_channel(DensityMatrix.from_ket(fock_ket(1, 4)), 0.7)
    np.testing.assert_allclose(out.matrix, np.diag([0.3, 0.7, 0, 0]), atol=1e-15)


def test_full_dephasing_leaves_poissonian_mixture():
    rho = DensityMatrix.from_ket(coherent_ket(1.0, 30))
    out = dephasing_channel(rho, 10.0).matrix
    off = out - np.diag(np.diag(out))
    assert np.abs(off).max() < 1e-10
    np.testing.assert_allclose(np.diag(out).real, np.abs(coherent_ket(1.0, 30)) ** 2, atol=1e-15)
