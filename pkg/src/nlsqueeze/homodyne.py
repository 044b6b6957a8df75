"""Synthetic homodyne detection: quadrature statistics, sampling, moment estimation and tomography.

The rotated quadrature is ``X(theta) = cos(theta) x + sin(theta) p``. Its
outcome distribution is ``<x| R(theta)^dag rho R(theta) |x>`` with
``R(t) = exp(i t n)`` and ``<n|x>`` the Hermite functions.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import comb
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import minimize

from .fock import DensityMatrix, check_dim, pad, quadrature_operators
from .states import loss_adjoint

TWO_PI = 2.0 * np.pi
MAX_MOMENT_ORDER = 6
_TAIL_END = 16.0
EM_SWITCH_GAP = 1e-3


# --- records --------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRecord:
    theta: float
    value: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.theta) and np.isfinite(self.value)):
            raise ValueError("quadrature record must be finite")
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)
        object.__setattr__(self, "value", float(self.value))


class QuadratureSet:
    """Columnar store of quadrature records; iterates as :class:`QuadratureRecord`."""

    def __init__(self, thetas, values):
        thetas = np.asarray(thetas, dtype=float).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if thetas.shape != values.shape:
            raise ValueError("thetas and values differ in length")
        bad = np.flatnonzero(~(np.isfinite(thetas) & np.isfinite(values)))
        if bad.size:
            raise ValueError(f"record {bad[0]} is not finite")
        self.thetas = np.mod(thetas, TWO_PI)
        self.values = values

    @classmethod
    def coerce(cls, records) -> QuadratureSet:
        if isinstance(records, cls):
            return records
        records = list(records)
        return cls([r.theta for r in records], [r.value for r in records])

    def __len__(self) -> int:
        return self.values.size

    def __iter__(self) -> Iterator[QuadratureRecord]:
        for t, v in zip(self.thetas, self.values):
            yield QuadratureRecord(t, v)

    def __eq__(self, other) -> bool:
        return isinstance(other, QuadratureSet) and np.array_equal(self.thetas, other.thetas) and np.array_equal(self.values, other.values)

    def phases(self) -> np.ndarray:
        return np.unique(self.thetas)

    def groups(self) -> list[tuple[float, np.ndarray]]:
        """``(theta, values)`` per distinct phase, in increasing phase order."""
        return [(t, self.values[self.thetas == t]) for t in self.phases()]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["theta", "value"])
            for t, v in zip(self.thetas, self.values):
                writer.writerow([repr(float(t)), repr(float(v))])

    @classmethod
    def read_csv(cls, path) -> QuadratureSet:
        thetas, values = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["theta", "value"]:
                raise ValueError(f"{path}: header must be 'theta,value', got {header!r}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 2:
                    raise ValueError(f"{path}: row {lineno} has {len(row)} fields, expected 2")
                try:
                    t, v = float(row[0]), float(row[1])
                except ValueError:
                    raise ValueError(f"{path}: row {lineno} is not numeric: {row!r}") from None
                if not (np.isfinite(t) and np.isfinite(v)):
                    raise ValueError(f"{path}: row {lineno} is not finite")
                thetas.append(t)
                values.append(v)
        if not values:
            raise ValueError(f"{path}: no records")
        return cls(thetas, values)


# --- distributions ---------------------------------------------------------------


def hermite_functions(n_levels: int, x) -> np.ndarray:
    """``psi_n(x)`` for n < n_levels as an (n_levels, len(x)) array, by the stable three-term recursion."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((n_levels, x.size))
    out[0] = np.pi**-0.25 * np.exp(-0.5 * x * x)
    if n_levels > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, n_levels - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


def _phase_factors(theta: float, n_levels: int) -> np.ndarray:
    return np.exp(1j * theta * np.arange(n_levels))


def rotated_state(rho: DensityMatrix, theta: float) -> np.ndarray:
    """``R(theta)^dag rho R(theta)``; its x-distribution is that of ``X(theta)`` in ``rho``."""
    ph = _phase_factors(theta, rho.n_levels)
    return ph.conj()[:, None] * rho.matrix * ph[None, :]


def quadrature_pdf(rho: DensityMatrix, theta: float):
    """Probability density of ``X(theta)`` as a vectorized function of the outcome."""
    r = rotated_state(rho, theta)

    def pdf(x):
        psi = hermite_functions(rho.n_levels, x)
        dens = np.einsum("mk,mn,nk->k", psi, r, psi).real
        dens = np.clip(dens, 0.0, None)
        return dens if np.ndim(x) else float(dens[0])

    return pdf


def _sampling_grid(rho: DensityMatrix, theta: float, points: int) -> np.ndarray:
    x_op, p_op = quadrature_operators(rho.n_levels + 2)
    r = pad(rho.matrix, rho.n_levels + 2)
    X = np.cos(theta) * x_op + np.sin(theta) * p_op
    mean = np.trace(r @ X).real
    std = np.sqrt(max(np.trace(r @ X @ X).real - mean**2, 0.0))
    half = max(6.0, abs(mean) + 10.0 * std)
    return np.linspace(-half, half, points)


def sample_quadratures(
    rho: DensityMatrix, phases: Sequence[float], n_per_phase: int, seed: int, grid_points: int = 8001
) -> QuadratureSet:
    """I.i.d. homodyne outcomes by inverse-CDF sampling of a dense tabulated density.

    Each phase draws from its own child of ``SeedSequence(seed)``, so the
    output is a deterministic function of the arguments.
    """
    phases = [float(t) for t in phases]
    if not phases:
        raise ValueError("need at least one phase")
    if n_per_phase < 1:
        raise ValueError("n_per_phase must be positive")
    children = np.random.SeedSequence(seed).spawn(len(phases))
    thetas, values = [], []
    for theta, child in zip(phases, children):
        grid = _sampling_grid(rho, theta, grid_points)
        dens = quadrature_pdf(rho, theta)(grid)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
        cdf /= cdf[-1]
        u = np.random.default_rng(child).random(n_per_phase)
        values.append(np.interp(u, cdf, grid))
        thetas.append(np.full(n_per_phase, theta))
    return QuadratureSet(np.concatenate(thetas), np.concatenate(values))


# --- Weyl moments -------------------------------------------------------------------


@dataclass(frozen=True)
class MomentEstimate:
    m: int
    n: int
    value: float
    std_error: float

    def __post_init__(self) -> None:
        if self.m < 0 or self.n < 0 or self.m + self.n > MAX_MOMENT_ORDER:
            raise ValueError(f"moment order ({self.m}, {self.n}) outside the supported range")


def _check_order(m: int, n: int) -> int:
    if m < 0 or n < 0 or m + n < 1 or m + n > MAX_MOMENT_ORDER:
        raise ValueError(f"moment order ({m}, {n}) outside 1 <= m + n <= {MAX_MOMENT_ORDER}")
    return m + n


def weyl_moment_coefficients(m: int, n: int, thetas: Sequence[float], tol: float = 1e-10) -> np.ndarray:
    """Weights ``A_k`` with ``sum_k A_k X(theta_k)^(m+n)`` equal to the Weyl-ordered ``x^m p^n``.

    The symbol of ``X(theta)^N`` is ``(cos x + sin p)^N``; matching its
    binomial expansion to the single monomial gives ``N + 1`` equations,
    solved in the least-squares sense. A residual above ``tol`` means the
    angle set cannot express the monomial.
    """
    order = _check_order(m, n)
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size == 0:
        raise ValueError("need at least one angle")
    j = np.arange(order + 1)
    binom = np.array([comb(order, int(k)) for k in j], dtype=float)
    c, s = np.cos(thetas), np.sin(thetas)
    system = binom[:, None] * c[None, :] ** j[:, None] * s[None, :] ** (order - j)[:, None]
    target = (j == m).astype(float)
    coeffs, *_ = np.linalg.lstsq(system, target, rcond=None)
    resid = np.max(np.abs(system @ coeffs - target))
    if resid > tol:
        raise ValueError(
            f"angle set cannot express x^{m} p^{n} (residual {resid:.2e}); "
            f"use at least {order + 1} distinct angles modulo pi"
        )
    return coeffs


def weyl_moment_exact(rho: DensityMatrix, m: int, n: int, thetas: Sequence[float]) -> float:
    """The weighted combination evaluated with exact quadrature moments of ``rho``."""
    order = _check_order(m, n)
    coeffs = weyl_moment_coefficients(m, n, thetas)
    big = rho.n_levels + order
    x_op, p_op = quadrature_operators(big)
    r = pad(rho.matrix, big)
    total = 0.0
    for a, t in zip(coeffs, thetas):
        X = np.cos(t) * x_op + np.sin(t) * p_op
        total += a * np.trace(r @ np.linalg.matrix_power(X, order)).real
    return float(total)


def estimate_weyl_moment(records, m: int, n: int) -> MomentEstimate:
    """Weyl-ordered ``<x^m p^n>`` from sample power means, with a delta-method standard error."""
    data = QuadratureSet.coerce(records)
    order = _check_order(m, n)
    groups = data.groups()
    coeffs = weyl_moment_coefficients(m, n, [t for t, _ in groups])
    value, var = 0.0, 0.0
    for a, (_, vals) in zip(coeffs, groups):
        powers = vals**order
        value += a * powers.mean()
        if vals.size > 1:
            var += a * a * powers.var(ddof=1) / vals.size
    return MomentEstimate(m, n, float(value), float(np.sqrt(var)))


# --- maximum-likelihood tomography -----------------------------------------------------


@dataclass(frozen=True)
class TomographyConfig:
    """Binned-likelihood reconstruction settings.

    Bins of ``bin_width`` tile ``[-x_max, x_max]``; two tail bins take the rest.
    ``efficiency`` below 1 folds detector loss into the measurement model so
    the estimate is the state before the detector.
    """

    n_levels: int = 30
    bin_width: float = 0.05
    efficiency: float = 1.0
    max_iters: int = 5000
    stop_tol: float = 1e-6
    x_max: float = 6.0

    def __post_init__(self) -> None:
        check_dim(self.n_levels)
        if not (self.bin_width > 0 and self.max_iters > 0 and self.stop_tol > 0 and self.x_max > 0):
            raise ValueError("tomography settings must be positive")
        if not 0 < self.efficiency <= 1:
            raise ValueError(f"efficiency must lie in (0, 1], got {self.efficiency}")

    @property
    def edges(self) -> np.ndarray:
        n_bins = int(round(2 * self.x_max / self.bin_width))
        return np.linspace(-self.x_max, self.x_max, n_bins + 1)


class ReconstructionStalled(RuntimeError):
    pass


def bin_operators(config: TomographyConfig) -> np.ndarray:
    """``B_b = int_bin |x><x| dx`` in the Fock basis, tail bins first and last, loss-adjusted.

    Gauss-Legendre quadrature inside each bin; the bins sum to the identity.
    """
    n = config.n_levels
    edges = config.edges
    nodes, weights = np.polynomial.legendre.leggauss(12)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    xs = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    ws = (half[:, None] * weights[None, :]).ravel()
    psi = hermite_functions(n, xs).reshape(n, mid.size, nodes.size)
    inner = np.einsum("mbq,nbq,bq->bmn", psi, psi, ws.reshape(mid.size, nodes.size))
    # upper tail by composite quadrature on [x_max, TAIL_END]; the lower one by parity
    tail_edges = np.linspace(config.x_max, max(_TAIL_END, config.x_max + 4.0), 65)
    tmid = 0.5 * (tail_edges[1:] + tail_edges[:-1])
    thalf = 0.5 * np.diff(tail_edges)
    txs = (tmid[:, None] + thalf[:, None] * nodes[None, :]).ravel()
    tws = (thalf[:, None] * weights[None, :]).ravel()
    tpsi = hermite_functions(n, txs)
    upper = (tpsi * tws) @ tpsi.T
    sign = (-1.0) ** np.add.outer(np.arange(n), np.arange(n))
    ops = np.concatenate([(sign * upper)[None], inner, upper[None]])
    if config.efficiency < 1.0:
        ops = np.array([loss_adjoint(b.astype(complex), config.efficiency).real for b in ops])
    return ops


def _rotations(phases: np.ndarray, n: int) -> np.ndarray:
    return np.exp(1j * np.outer(phases, np.arange(n)))  # (K, n)


def _phase_probabilities(rho: np.ndarray, rot: np.ndarray, flat_ops: np.ndarray) -> np.ndarray:
    # Tr[B R^dag rho R] for real symmetric B only needs the real part of the rotated state
    rotated = (rot.conj()[:, :, None] * rho[None] * rot[:, None, :]).real
    return rotated.reshape(rot.shape[0], -1) @ flat_ops.T


def _r_operator(weights: np.ndarray, rot: np.ndarray, flat_ops: np.ndarray) -> np.ndarray:
    n = rot.shape[1]
    per_phase = (weights @ flat_ops).reshape(-1, n, n)
    return np.einsum("km,kmn,kn->mn", rot, per_phase, rot.conj())


def _log_likelihood(freqs: np.ndarray, probs: np.ndarray) -> float:
    mask = freqs > 0
    return float(np.sum(freqs[mask] * np.log(np.maximum(probs[mask], 1e-300))))


@dataclass
class TomographyResult:
    state: DensityMatrix
    log_likelihoods: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    optimality_gap: float = np.inf


def _normalized_gradient(freqs, probs, rot, flat_ops):
    """``R = sum f/p Pi``; the model probability of (phase k, bin b) is ``probs / K``."""
    k = rot.shape[0]
    weights = np.where(freqs > 0, freqs / np.maximum(probs / k, 1e-300), 0.0) / k
    R = _r_operator(weights, rot, flat_ops)
    return 0.5 * (R + R.conj().T)


def ml_reconstruct_frequencies(phases, freqs, config: TomographyConfig, initial: DensityMatrix | None = None) -> TomographyResult:
    """Maximum-likelihood state for binned frequencies ``freqs[k, b]`` at ``phases[k]``.

    Each phase row is normalized and the phases weighted equally. Then
    ``Tr[R rho] = 1`` and, the likelihood being concave, no state beats the
    current one by more than ``gap = lambda_max(R) - 1`` per sample.

    RrhoR iteration runs until the gap falls below ``EM_SWITCH_GAP``; a
    full step that would lower the likelihood is diluted,
    ``rho -> (1 + eps R) rho (1 + eps R)`` with ``eps`` halved until it
    rises. RrhoR slows to a crawl near rank-deficient optima, so the last
    stretch is L-BFGS on a factor ``A`` with ``rho = A A^dag / Tr``. Both
    stages only accept likelihood-increasing steps. Converged means
    ``gap <= stop_tol``.
    """
    phases = np.asarray(phases, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    ops = bin_operators(config)
    if freqs.shape != (phases.size, ops.shape[0]):
        raise ValueError(f"frequency table shape {freqs.shape} does not match {phases.size} phases x {ops.shape[0]} bins")
    rows = freqs.sum(axis=1, keepdims=True)
    if np.any(rows <= 0):
        raise ValueError("every phase needs at least one record")
    freqs = freqs / rows / phases.size
    n = config.n_levels
    flat_ops = ops.reshape(ops.shape[0], -1)
    rot = _rotations(phases, n)
    rho = np.eye(n, dtype=complex) / n if initial is None else pad(initial.matrix, n)
    probs = _phase_probabilities(rho, rot, flat_ops)
    logl = _log_likelihood(freqs, probs)
    history = [logl]
    eye = np.eye(n)
    it = 0
    gap = np.inf
    while it < config.max_iters:
        R = _normalized_gradient(freqs, probs, rot, flat_ops)
        gap = float(np.linalg.eigvalsh(R)[-1] - 1.0)
        if gap <= max(config.stop_tol, EM_SWITCH_GAP):
            break
        it += 1
        eps = None
        while True:
            step = R if eps is None else eye + eps * R
            cand = step @ rho @ step.conj().T
            cand = 0.5 * (cand + cand.conj().T)
            cand /= np.trace(cand).real
            cprobs = _phase_probabilities(cand, rot, flat_ops)
            clogl = _log_likelihood(freqs, cprobs)
            if clogl >= logl or (eps is not None and eps < 1e-10):
                break
            eps = 1.0 if eps is None else eps / 2.0
        if clogl < logl:
            break
        rho, probs, logl = cand, cprobs, clogl
        history.append(logl)

    if gap > config.stop_tol and it < config.max_iters:
        rho, it = _polish(rho, freqs, rot, flat_ops, history, config.max_iters - it, it)
        probs = _phase_probabilities(rho, rot, flat_ops)
        gap = float(np.linalg.eigvalsh(_normalized_gradient(freqs, probs, rot, flat_ops))[-1] - 1.0)
    return TomographyResult(DensityMatrix.repaired(rho), history, it, gap <= config.stop_tol, gap)


def _polish(rho, freqs, rot, flat_ops, history, budget, it):
    n = rho.shape[0]
    k = rot.shape[0]
    w, v = np.linalg.eigh(rho)
    A0 = v * np.sqrt(np.clip(w, 0.0, None))
    base = history[-1]  # objective measured from here keeps the relative tolerance meaningful

    def unpack(z):
        return (z[: n * n] + 1j * z[n * n :]).reshape(n, n)

    def objective(z):
        A = unpack(z)
        t = np.vdot(A, A).real
        r = A @ A.conj().T / t
        probs = _phase_probabilities(r, rot, flat_ops)
        logl = _log_likelihood(freqs, probs)
        R = _normalized_gradient(freqs, probs, rot, flat_ops)
        G = 2.0 * (R - np.eye(n)) @ A / t
        return -(logl - base), -np.concatenate([G.real.ravel(), G.imag.ravel()])

    def record(z):
        history.append(base - objective(z)[0])

    res = minimize(
        objective,
        np.concatenate([A0.real.ravel(), A0.imag.ravel()]),
        jac=True,
        method="L-BFGS-B",
        callback=record,
        options={"maxiter": budget, "ftol": 1e-15, "gtol": 1e-14, "maxcor": 30},
    )
    A = unpack(res.x)
    out = A @ A.conj().T
    return out / np.trace(out).real, it + res.nit


def bin_records(records, config: TomographyConfig) -> tuple[np.ndarray, np.ndarray]:
    """Phases and count table (phases x bins, tails first and last)."""
    data = QuadratureSet.coerce(records)
    edges = config.edges
    groups = data.groups()
    counts = np.zeros((len(groups), edges.size + 1))
    for k, (_, vals) in enumerate(groups):
        idx = np.searchsorted(edges, vals, side="right")  # 0: lower tail, len(edges): upper tail
        counts[k] = np.bincount(idx, minlength=edges.size + 1)
    return np.array([t for t, _ in groups]), counts


def ml_reconstruct_full(records, config: TomographyConfig | None = None) -> TomographyResult:
    config = config or TomographyConfig()
    data = QuadratureSet.coerce(records)
    if len(data) == 0:
        raise ValueError("no records to reconstruct from")
    phases, counts = bin_records(data, config)
    return ml_reconstruct_frequencies(phases, counts, config)


def ml_reconstruct(records, config: TomographyConfig | None = None) -> DensityMatrix:
    """Maximum-likelihood density matrix from homodyne records.

    Raises :class:`ReconstructionStalled` when ``max_iters`` runs out before
    the likelihood settles to ``stop_tol``.
    """
    config = config or TomographyConfig()
    result = ml_reconstruct_full(records, config)
    if not result.converged:
        raise ReconstructionStalled(
            f"likelihood still changing after {result.iterations} iterations "
            f"(last log-likelihood {result.log_likelihoods[-1]:.12g})"
        )
    return result.state


def exact_frequencies(rho: DensityMatrix, phases, config: TomographyConfig) -> np.ndarray:
    """Bin probabilities of ``rho`` itself, for infinite-data checks."""
    ops = bin_operators(TomographyConfig(config.n_levels, config.bin_width, 1.0, config.max_iters, config.stop_tol, config.x_max))
    r = rho.truncated(config.n_levels).matrix if rho.n_levels >= config.n_levels else pad(rho.matrix, config.n_levels)
    phases = np.asarray(phases, float)
    return _phase_probabilities(r, _rotations(phases, config.n_levels), ops.reshape(ops.shape[0], -1))


# --- bootstrap -------------------------------------------------------------------------


def _resample(data: QuadratureSet, seed_seq: np.random.SeedSequence) -> QuadratureSet:
    rng = np.random.default_rng(seed_seq)
    thetas, values = [], []
    for t, vals in data.groups():
        values.append(vals[rng.integers(0, vals.size, vals.size)])
        thetas.append(np.full(vals.size, t))
    return QuadratureSet(np.concatenate(thetas), np.concatenate(values))


def _bootstrap_one(args) -> float:
    from .witness import nonlinear_squeezing

    data, seed_seq, config, family, budget = args
    result = ml_reconstruct_full(_resample(data, seed_seq), config)
    return nonlinear_squeezing(result.state, family, budget).xi


def bootstrap_xi(records, config: TomographyConfig, family: str, n_resamples: int, seed: int, budget=None, jobs: int = 1):
    """Mean and sample standard deviation of ``xi`` over per-phase resamples of the records.

    Resample ``i`` uses child ``i`` of ``SeedSequence(seed)``; results are
    merged in resample order, so the output does not depend on ``jobs``.
    """
    if n_resamples < 2:
        raise ValueError("bootstrap needs at least two resamples")
    data = QuadratureSet.coerce(records)
    tasks = [(data, child, config, family, budget) for child in np.random.SeedSequence(seed).spawn(n_resamples)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            xis = list(pool.map(_bootstrap_one, tasks))
    else:
        xis = [_bootstrap_one(t) for t in tasks]
    xis = np.asarray(xis)
    return float(xis.mean()), float(xis.std(ddof=1))


def uniform_phases(count: int = 12) -> np.ndarray:
    """``count`` equally spaced phases over [0, pi)."""
    return np.arange(count) * np.pi / count


__all__ = [
    "MomentEstimate",
    "QuadratureRecord",
    "QuadratureSet",
    "ReconstructionStalled",
    "TomographyConfig",
    "TomographyResult",
    "bin_operators",
    "bin_records",
    "bootstrap_xi",
    "estimate_weyl_moment",
    "exact_frequencies",
    "hermite_functions",
    "ml_reconstruct",
    "ml_reconstruct_frequencies",
    "ml_reconstruct_full",
    "quadrature_pdf",
    "rotated_state",
    "sample_quadratures",
    "uniform_phases",
    "weyl_moment_coefficients",
    "weyl_moment_exact",
]
