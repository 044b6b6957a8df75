import itertools

import numpy as np
import pytest
from scipy import stats

from nlsqueeze.fock import DensityMatrix, fidelity, fock_ket, pad, quadrature_operators
from nlsqueeze.homodyne import (
    QuadratureRecord,
    QuadratureSet,
    ReconstructionStalled,
    TomographyConfig,
    bin_operators,
    bin_records,
    bootstrap_xi,
    estimate_weyl_moment,
    exact_frequencies,
    hermite_functions,
    ml_reconstruct,
    ml_reconstruct_frequencies,
    ml_reconstruct_full,
    quadrature_pdf,
    sample_quadratures,
    uniform_phases,
    weyl_moment_coefficients,
    weyl_moment_exact,
)
from nlsqueeze.states import PhotonAddedSpec, coherent_ket, loss_channel, photon_added_coherent, squeezed_vacuum_ket
from nlsqueeze.witness import OptimizerBudget

from conftest import random_state


def symmetrized_moment(rho, m, n):
    """<x^m p^n> Weyl-ordered, as the average over every distinct ordering of the factors."""
    big = rho.n_levels + m + n
    x, p = quadrature_operators(big)
    r = pad(rho.matrix, big)
    words = set(itertools.permutations("x" * m + "p" * n))
    total = 0.0
    for w in words:
        op = np.eye(big, dtype=complex)
        for c in w:
            op = op @ (x if c == "x" else p)
        total += np.trace(r @ op).real
    return total / len(words)


def test_hermite_functions_orthonormal():
    x, w = np.polynomial.hermite.hermgauss(80)
    psi = hermite_functions(20, x) * np.exp(0.5 * x**2)
    np.testing.assert_allclose((psi * w) @ psi.T, np.eye(20), atol=1e-12)


@pytest.mark.parametrize("theta", [0.0, 0.7, np.pi / 2, 2.0])
def test_coherent_quadrature_pdf(theta):
    alpha = 0.8 + 0.5j
    pdf = quadrature_pdf(DensityMatrix.from_ket(coherent_ket(alpha, 40)), theta)
    mu = np.sqrt(2) * (alpha.real * np.cos(theta) + alpha.imag * np.sin(theta))
    xs = np.linspace(-4, 4, 41)
    np.testing.assert_allclose(pdf(xs), stats.norm.pdf(xs, mu, np.sqrt(0.5)), atol=1e-12)
    assert isinstance(pdf(0.3), float)


def test_squeezed_pdf_variance_by_phase():
    rho = DensityMatrix.from_ket(squeezed_vacuum_ket(0.4, 60))
    xs = np.linspace(-10, 10, 4001)
    for theta, var in [(0.0, 0.5 * np.exp(-0.8)), (np.pi / 2, 0.5 * np.exp(0.8))]:
        dens = quadrature_pdf(rho, theta)(xs)
        assert np.trapezoid(xs**2 * dens, xs) == pytest.approx(var, rel=1e-8)


def test_sampling_is_deterministic_and_distributed():
    rho = DensityMatrix.from_ket(fock_ket(0, 10))
    a = sample_quadratures(rho, [0.0, 1.0], 20000, seed=5)
    b = sample_quadratures(rho, [0.0, 1.0], 20000, seed=5)
    assert a == b
    assert a != sample_quadratures(rho, [0.0, 1.0], 20000, seed=6)
    for _, vals in a.groups():
        assert stats.kstest(vals, stats.norm(0, np.sqrt(0.5)).cdf).pvalue > 1e-3


def test_sampling_validation():
    rho = DensityMatrix.from_ket(fock_ket(0, 4))
    with pytest.raises(ValueError):
        sample_quadratures(rho, [], 10, 0)
    with pytest.raises(ValueError):
        sample_quadratures(rho, [0.0], 0, 0)


def test_records_and_csv(tmp_path):
    assert QuadratureRecord(7.0, 1.0).theta == pytest.approx(7.0 - 2 * np.pi)
    with pytest.raises(ValueError):
        QuadratureRecord(np.nan, 0.0)
    data = QuadratureSet([0.0, 0.5, 0.0], [1.0, -2.0, 3.5])
    assert len(data) == 3 and [t for t, _ in data.groups()] == [0.0, 0.5]
    assert QuadratureSet.coerce(list(data)) == data
    path = tmp_path / "q.csv"
    data.write_csv(path)
    assert QuadratureSet.read_csv(path) == data


@pytest.mark.parametrize(
    "text, message",
    [
        ("t,v\n0,1\n", "header"),
        ("theta,value\n0,1,2\n", "row 2 has 3 fields"),
        ("theta,value\n0,1\n0,abc\n", "row 3 is not numeric"),
        ("theta,value\n0,inf\n", "row 2 is not finite"),
        ("theta,value\n", "no records"),
    ],
)
def test_csv_errors_name_the_problem(tmp_path, text, message):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ValueError, match=message):
        QuadratureSet.read_csv(path)


@pytest.mark.parametrize(
    "m, n, thetas",
    [
        (1, 0, [0.0]),
        (0, 1, [np.pi / 2]),
        (2, 1, [0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4]),
        (1, 1, [0.0, np.pi / 3, 2 * np.pi / 3]),
        (2, 2, uniform_phases(5)),
        (3, 1, uniform_phases(5)),
    ],
)
@pytest.mark.parametrize("seed", range(3))
def test_weyl_moment_matches_symmetrized_operator(m, n, thetas, seed):
    rho = random_state(seed, n_levels=8)
    assert weyl_moment_exact(rho, m, n, thetas) == pytest.approx(symmetrized_moment(rho, m, n), abs=1e-8)


def test_weyl_needs_enough_angles():
    with pytest.raises(ValueError, match="cannot express"):
        weyl_moment_coefficients(2, 1, [0.0, np.pi / 3, 2 * np.pi / 3])
    with pytest.raises(ValueError, match="outside"):
        weyl_moment_coefficients(4, 3, uniform_phases(8))
    with pytest.raises(ValueError, match="outside"):
        weyl_moment_coefficients(0, 0, [0.0])


def test_weyl_estimate_within_standard_errors():
    rho = DensityMatrix.from_ket(photon_added_coherent(PhotonAddedSpec(0.7, 1), 40))
    data = sample_quadratures(rho, uniform_phases(5), 20000, seed=2)
    for m, n in [(1, 0), (0, 1), (1, 1), (2, 0), (2, 2)]:
        est = estimate_weyl_moment(data, m, n)
        assert abs(est.value - symmetrized_moment(rho, m, n)) < 4 * est.std_error


def test_bin_operators_resolve_identity():
    for eff in (1.0, 0.8):
        ops = bin_operators(TomographyConfig(n_levels=15, efficiency=eff))
        np.testing.assert_allclose(ops.sum(axis=0), np.eye(15), atol=1e-10)
        assert ops.shape[0] == TomographyConfig().edges.size + 1


def test_bin_records_counts_everything():
    data = QuadratureSet([0.0] * 4 + [1.0] * 2, [-9.0, 0.01, 0.02, 9.0, 0.0, 5.99])
    phases, counts = bin_records(data, TomographyConfig(n_levels=4))
    np.testing.assert_array_equal(phases, [0.0, 1.0])
    assert counts[0, 0] == 1 and counts[0, -1] == 1 and counts.sum() == 6


@pytest.mark.parametrize(
    "rho",
    [
        DensityMatrix.from_ket(fock_ket(0, 30)),
        DensityMatrix.from_ket(photon_added_coherent(PhotonAddedSpec(1.0, 1), 30)),
        loss_channel(DensityMatrix.from_ket(fock_ket(2, 30)), 0.7),
    ],
)
def test_ml_recovers_state_from_exact_frequencies(rho):
    cfg = TomographyConfig()
    phases = uniform_phases(12)
    res = ml_reconstruct_frequencies(phases, exact_frequencies(rho, phases, cfg), cfg)
    assert res.converged
    assert 1 - fidelity(res.state, rho) < 1e-5
    assert np.all(np.diff(res.log_likelihoods) >= -1e-12)


def test_ml_with_efficiency_undoes_detector_loss():
    rho = DensityMatrix.from_ket(fock_ket(1, 30))
    cfg = TomographyConfig(efficiency=0.92)
    phases = uniform_phases(12)
    freqs = exact_frequencies(loss_channel(rho, 0.92), phases, cfg)
    res = ml_reconstruct_frequencies(phases, freqs, cfg)
    assert fidelity(res.state, rho) > 0.999


def test_ml_stalls_loudly():
    rho = DensityMatrix.from_ket(fock_ket(1, 10))
    data = sample_quadratures(rho, uniform_phases(4), 500, seed=0)
    cfg = TomographyConfig(n_levels=10, max_iters=2)
    assert not ml_reconstruct_full(data, cfg).converged
    with pytest.raises(ReconstructionStalled):
        ml_reconstruct(data, cfg)


def test_frequency_table_shape_checked():
    cfg = TomographyConfig(n_levels=5)
    with pytest.raises(ValueError, match="does not match"):
        ml_reconstruct_frequencies([0.0], np.ones((1, 3)), cfg)


def test_tomography_config_validation():
    with pytest.raises(ValueError):
        TomographyConfig(efficiency=0.0)
    with pytest.raises(ValueError):
        TomographyConfig(bin_width=-1)


def test_bootstrap_is_reproducible():
    rho = DensityMatrix.from_ket(photon_added_coherent(PhotonAddedSpec(1.0, 1), 20))
    data = sample_quadratures(rho, uniform_phases(6), 3000, seed=1)
    cfg = TomographyConfig(n_levels=10, bin_width=0.1)
    budget = OptimizerBudget(n_starts=4)
    a = bootstrap_xi(data, cfg, "cubic", 3, seed=9, budget=budget)
    b = bootstrap_xi(data, cfg, "cubic", 3, seed=9, budget=budget)
    assert a == b and a[1] > 0
    with pytest.raises(ValueError):
        bootstrap_xi(data, cfg, "cubic", 1, seed=9)


ORDERS = [(m, k - m) for k in range(1, 5) for m in range(k + 1)]


@pytest.mark.parametrize("m,n", ORDERS)
def test_weyl_combination_on_many_states(m, n):
    thetas = uniform_phases(5)
    for seed in range(50):
        rho = random_state(100 + seed, n_levels=6)
        assert weyl_moment_exact(rho, m, n, thetas) == pytest.approx(symmetrized_moment(rho, m, n), abs=1e-8)


def test_fock_one_density():
    pdf = quadrature_pdf(DensityMatrix.from_ket(fock_ket(1, 10)), 0.3)
    xs = np.linspace(-4, 4, 33)
    np.testing.assert_allclose(pdf(xs), 2 * xs**2 * np.exp(-(xs**2)) / np.sqrt(np.pi), atol=1e-14)


def test_vacuum_sample_variance():
    vals = sample_quadratures(DensityMatrix.from_ket(fock_ket(0, 10)), [0.0], 100_000, seed=0).values
    # the sample variance of a normal has standard error var * sqrt(2 / (n - 1))
    assert abs(vals.var(ddof=1) - 0.5) < 3 * 0.5 * np.sqrt(2 / (vals.size - 1))


def test_fock_one_samples_avoid_the_origin():
    vals = sample_quadratures(DensityMatrix.from_ket(fock_ket(1, 10)), [0.0], 100_000, seed=0).values
    # exact mass of |x| < 0.1 is about 7.5e-4
    assert np.mean(np.abs(vals) < 0.1) < 0.004


def test_weyl_estimates_on_simple_states():
    phases = uniform_phases(5)
    vac = sample_quadratures(DensityMatrix.from_ket(fock_ket(0, 10)), phases, 20000, seed=3)
    for (m, n), exact in [((2, 0), 0.5), ((1, 1), 0.0)]:
        est = estimate_weyl_moment(vac, m, n)
        assert abs(est.value - exact) < 3 * est.std_error
    one = sample_quadratures(DensityMatrix.from_ket(fock_ket(1, 10)), phases, 20000, seed=3)
    est = estimate_weyl_moment(one, 2, 0)
    assert abs(est.value - 1.5) < 3 * est.std_error


@pytest.mark.slow
def test_vacuum_tomography_from_samples():
    rho = DensityMatrix.from_ket(fock_ket(0, 30))
    data = sample_quadratures(rho, uniform_phases(12), 100_000 // 12 + 1, seed=0)
    assert fidelity(ml_reconstruct(data), rho) > 0.999


def test_bootstrap_on_gaussian_data():
    rho = DensityMatrix.from_ket(coherent_ket(0.5 + 0.3j, 20))
    data = sample_quadratures(rho, uniform_phases(6), 3000, seed=4)
    cfg = TomographyConfig(n_levels=10, bin_width=0.1)
    mean, std = bootstrap_xi(data, cfg, "cubic", 4, seed=2, budget=OptimizerBudget(n_starts=4))
    assert std > 0
    assert abs(mean - 1) < 2 * std + 1e-3
