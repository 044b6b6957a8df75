"""Command-line interface: curves, loss sweeps, certification and synthetic homodyne runs.

Exit codes: 0 success, 2 usage error, 3 numeric failure, 4 I/O or input-file error.

Examples::

    nlsqueeze curve --state pacs:n=1 --alpha-range 0:1.5:0.1 --cost cubic --out curve.csv
    nlsqueeze loss-sweep --state pacs:alpha=1.43,n=1 --eta-range 0.3:1:0.05 --out loss.csv
    nlsqueeze certify --state pacs:alpha=0.84,n=2
    nlsqueeze sample --state pacs:alpha=1,n=1 --samples 200000 --seed 1 --out data.csv
    nlsqueeze tomography --input data.csv --reference pacs:alpha=1,n=1 --out state.json
    nlsqueeze certify --input data.csv --bootstrap 20
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .cost import CostFunction, gaussian_threshold
from .fock import DEFAULT_N_LEVELS, DensityMatrix, fidelity, fock_ket
from .gaussian import GaussianUnitaryParams
from .homodyne import QuadratureSet, ReconstructionStalled, TomographyConfig, bootstrap_xi, ml_reconstruct_full, sample_quadratures, uniform_phases
from .states import PhotonAddedSpec, coherent_ket, dephasing_channel, loss_channel, photon_added_coherent, squeezed_vacuum_ket
from .wigner import WignerGrid, wigner_evaluate, wigner_minimum
from .witness import FAMILIES, OptimizerBudget, certify, nonlinear_squeezing, xi_at

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

CURVE_HEADER = ["alpha", "xi", "nominator", "denominator", "best_params_json"]
LOSS_HEADER = ["eta", "xi_cubic", "wigner_min"]


class UsageError(ValueError):
    pass


class InputFileError(ValueError):
    pass


# --- spec strings ------------------------------------------------------------------


def parse_complex(text: str) -> complex:
    """``1.0``, ``1.0+0.5i``, ``-0.3i`` and the like."""
    t = text.strip().replace(" ", "").replace("I", "i").replace("j", "i")
    try:
        return complex(t.replace("i", "j")) if "i" in t else complex(float(t))
    except ValueError:
        raise UsageError(f"not a number: {text!r}") from None


def _fields(body: str) -> tuple[list[str], dict[str, str]]:
    positional, named = [], {}
    for part in filter(None, (p.strip() for p in body.split(","))):
        if "=" in part:
            key, val = part.split("=", 1)
            named[key.strip()] = val.strip()
        else:
            positional.append(part)
    return positional, named


def _float(named: dict, key: str, default=None) -> float:
    if key not in named:
        if default is None:
            raise UsageError(f"missing field {key!r}")
        return default
    try:
        return float(named.pop(key))
    except ValueError:
        raise UsageError(f"field {key!r} is not a number") from None


STATE_FAMILIES = ("vacuum", "fock", "coherent", "squeezed", "pacs")


def parse_state(spec: str, n_levels: int = DEFAULT_N_LEVELS, alpha_override: complex | None = None) -> DensityMatrix:
    """Build a state from ``family:key=value,...``.

    Families: ``vacuum``, ``fock:N``, ``coherent:ALPHA``, ``squeezed:r=R``,
    ``pacs:alpha=A,n=N``. Any family accepts ``eta=`` (pure loss) and
    ``dephasing=`` (phase-noise std in radians), applied in that order.
    """
    family, _, body = spec.partition(":")
    family = family.strip().lower()
    if family not in STATE_FAMILIES:
        raise UsageError(f"unknown state family {family!r}; expected one of {', '.join(STATE_FAMILIES)}")
    positional, named = _fields(body)
    try:
        if family == "vacuum":
            ket = fock_ket(0, n_levels)
        elif family == "fock":
            n = named.pop("n", positional.pop(0) if positional else None)
            if n is None:
                raise UsageError("fock state needs a photon number, e.g. fock:1")
            ket = fock_ket(int(n), n_levels)
        elif family == "coherent":
            a = named.pop("alpha", positional.pop(0) if positional else None)
            if a is None:
                raise UsageError("coherent state needs an amplitude, e.g. coherent:0.84")
            ket = coherent_ket(parse_complex(a), n_levels)
        elif family == "squeezed":
            r = named.pop("r", positional.pop(0) if positional else None)
            if r is None:
                raise UsageError("squeezed state needs r, e.g. squeezed:r=0.5")
            ket = squeezed_vacuum_ket(float(r), n_levels)
        else:
            if "n" not in named:
                raise UsageError("pacs needs n, e.g. pacs:alpha=1.0,n=1")
            n = int(named.pop("n"))
            a = alpha_override if alpha_override is not None else parse_complex(named.pop("alpha", "0"))
            named.pop("alpha", None)
            ket = photon_added_coherent(PhotonAddedSpec(a, n), n_levels)
        eta = _float(named, "eta", 1.0)
        deph = _float(named, "dephasing", 0.0)
        if positional or named:
            raise UsageError(f"unexpected fields in state spec: {positional + list(named)}")
        rho = DensityMatrix.from_ket(ket)
        if eta != 1.0:
            rho = loss_channel(rho, eta)
        return dephasing_channel(rho, deph)
    except UsageError:
        raise
    except ValueError as exc:
        raise UsageError(f"invalid state spec {spec!r}: {exc}") from None


def parse_cost(spec: str) -> CostFunction:
    """``cubic:z=1.0`` or ``quintic:s=1.0,r4=0.2``; a bare family name takes the defaults."""
    family, _, body = spec.partition(":")
    family = family.strip().lower()
    _, named = _fields(body)
    try:
        if family == "cubic":
            cost = CostFunction.cubic(_float(named, "z", 1.0))
        elif family == "quintic":
            cost = CostFunction.quintic(_float(named, "s", 1.0), _float(named, "r4", 0.0))
        else:
            raise UsageError(f"unknown cost family {family!r}; expected one of {', '.join(FAMILIES)}")
    except UsageError:
        raise
    except ValueError as exc:
        raise UsageError(f"invalid cost spec {spec!r}: {exc}") from None
    if named:
        raise UsageError(f"unexpected fields in cost spec: {list(named)}")
    return cost


def cost_family(spec: str) -> str:
    family = spec.partition(":")[0].strip().lower()
    if family not in FAMILIES:
        raise UsageError(f"unknown cost family {family!r}; expected one of {', '.join(FAMILIES)}")
    return family


def parse_range(text: str, name: str) -> np.ndarray:
    """Inclusive ``start:stop:step`` grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"{name} must look like start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"{name} has a non-numeric part: {text!r}") from None
    if not step > 0:
        raise UsageError(f"{name} step must be positive")
    if stop < start:
        raise UsageError(f"{name} is empty: stop {stop} < start {start}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(count), 12)


def parse_budget(text: str | None) -> OptimizerBudget:
    if text is None:
        return OptimizerBudget()
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--budget must look like starts:evals:tol, got {text!r}")
    try:
        return OptimizerBudget(int(parts[0]), int(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise UsageError(f"invalid --budget {text!r}: {exc}") from None


# --- output helpers ------------------------------------------------------------------


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _write_csv(path, header, rows) -> None:
    fh, close = _open_out(path)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if close:
            fh.close()


def _write_json(path, obj) -> None:
    text = json.dumps(obj, indent=2)
    if path in (None, "-"):
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def _map(fn, items, jobs: int):
    """Ordered map, in a process pool when ``jobs > 1``."""
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


# --- commands -------------------------------------------------------------------------


def _curve_point(task):
    spec, alpha, family, n_levels, budget = task
    rho = parse_state(spec, n_levels, alpha_override=alpha)
    res = nonlinear_squeezing(rho, family, budget)
    params = {"unitary": res.best_unitary.to_json(), "cost": res.best_cost.to_json()}
    return [_fmt(alpha), _fmt(res.xi), _fmt(res.nominator), _fmt(res.denominator), json.dumps(params, sort_keys=True)]


def cmd_curve(args) -> int:
    family = cost_family(args.cost)
    if not args.state.lower().startswith("pacs"):
        raise UsageError("curve sweeps the amplitude of a pacs state, e.g. --state pacs:n=1")
    alphas = parse_range(args.alpha_range, "--alpha-range")
    parse_state(args.state, args.n_levels, alpha_override=complex(alphas[-1]))  # validate before the sweep
    budget = parse_budget(args.budget)
    tasks = [(args.state, float(a), family, args.n_levels, budget) for a in alphas]
    _write_csv(args.out, CURVE_HEADER, _map(_curve_point, tasks, args.jobs))
    return EXIT_OK


def _loss_point(task):
    spec, eta, n_levels, budget = task
    rho = parse_state(spec, n_levels)
    if eta != 1.0:
        rho = loss_channel(rho, eta)
    res = nonlinear_squeezing(rho, "cubic", budget)
    wmin, _ = wigner_minimum(rho)
    return [_fmt(eta), _fmt(res.xi), _fmt(wmin)]


def cmd_loss_sweep(args) -> int:
    etas = parse_range(args.eta_range, "--eta-range")
    if etas[0] <= 0 or etas[-1] > 1:
        raise UsageError("--eta-range must lie in (0, 1]")
    parse_state(args.state, args.n_levels)
    budget = parse_budget(args.budget)
    tasks = [(args.state, float(e), args.n_levels, budget) for e in etas]
    _write_csv(args.out, LOSS_HEADER, _map(_loss_point, tasks, args.jobs))
    return EXIT_OK


def _load_input(path):
    """A state JSON or a quadrature CSV, told apart by content."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc.strerror}") from None
    if text.lstrip().startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputFileError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        try:
            return DensityMatrix.from_json(obj)
        except (ValueError, TypeError) as exc:
            raise InputFileError(f"{path}: {exc}") from None
    try:
        return QuadratureSet.read_csv(path)
    except ValueError as exc:
        raise InputFileError(str(exc)) from None


def _tomography_config(args) -> TomographyConfig:
    try:
        return TomographyConfig(n_levels=args.tomo_levels, efficiency=args.efficiency, bin_width=args.bin_width)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_certify(args) -> int:
    if (args.state is None) == (args.input is None):
        raise UsageError("give exactly one of --state or --input")
    budget = parse_budget(args.budget)
    data = None
    if args.state is not None:
        rho = parse_state(args.state, args.n_levels)
    else:
        loaded = _load_input(args.input)
        if isinstance(loaded, QuadratureSet):
            data = loaded
            cfg = _tomography_config(args)
            tomo = ml_reconstruct_full(data, cfg)
            if not tomo.converged:
                raise ReconstructionStalled(f"reconstruction stalled after {tomo.iterations} iterations")
            rho = tomo.state
        else:
            rho = loaded
    report = certify(rho, budget)
    if data is not None:
        report["diagnostics"]["tomography"] = {"iterations": tomo.iterations, "optimality_gap": tomo.optimality_gap}
        if args.bootstrap:
            boot = {}
            for family in FAMILIES:
                mean, std = bootstrap_xi(data, cfg, family, args.bootstrap, args.seed, budget, jobs=args.jobs)
                boot[family] = {"mean": mean, "std": std, "n_resamples": args.bootstrap, "seed": args.seed}
            report["diagnostics"]["bootstrap"] = boot
    _write_json(args.out, report)
    return EXIT_OK


def cmd_xi(args) -> int:
    rho = parse_state(args.state, args.n_levels)
    cost = parse_cost(args.cost)
    thr = gaussian_threshold(cost)
    ident = GaussianUnitaryParams()
    _write_json(args.out, {"xi": xi_at(rho, cost, ident, thr), "threshold": thr.value, "cost": cost.to_json()})
    return EXIT_OK


def cmd_sample(args) -> int:
    rho = parse_state(args.state, args.n_levels)
    phases = uniform_phases(args.phases)
    per_phase = max(1, args.samples // args.phases)
    data = sample_quadratures(rho, phases, per_phase, args.seed)
    fh, close = _open_out(args.out)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["theta", "value"])
        writer.writerows(zip(map(_fmt, data.thetas), map(_fmt, data.values)))
    finally:
        if close:
            fh.close()
    return EXIT_OK


def cmd_tomography(args) -> int:
    loaded = _load_input(args.input)
    if not isinstance(loaded, QuadratureSet):
        raise InputFileError(f"{args.input}: expected a quadrature CSV with header 'theta,value'")
    cfg = _tomography_config(args)
    tomo = ml_reconstruct_full(loaded, cfg)
    if not tomo.converged:
        raise ReconstructionStalled(f"reconstruction stalled after {tomo.iterations} iterations")
    out = tomo.state.to_json()
    if args.reference:
        ref = parse_state(args.reference, args.n_levels)
        out["fidelity"] = fidelity(tomo.state, ref)
        print(f"fidelity {out['fidelity']:.6f}", file=sys.stderr)
    _write_json(args.out, out)
    return EXIT_OK


def cmd_wigner(args) -> int:
    rho = parse_state(args.state, args.n_levels)
    axes = None
    if args.grid:
        axes = parse_range(args.grid, "--grid")
    grid = wigner_evaluate(rho, axes, axes)
    if args.out and str(args.out).endswith(".json"):
        grid.write_json(args.out)
    elif args.out in (None, "-"):
        _write_csv(None, ["x", "p", "w"], _grid_rows(grid))
    else:
        grid.write_csv(args.out)
    return EXIT_OK


def _grid_rows(grid: WignerGrid):
    for i, x in enumerate(grid.x_axis):
        for j, p in enumerate(grid.p_axis):
            yield [_fmt(x), _fmt(p), _fmt(grid.values[i, j])]


# --- parser ------------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n-levels", type=_positive_int, default=DEFAULT_N_LEVELS, help="Fock truncation for model states")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output path; stdout when omitted")
    common.add_argument("--budget", default=None, metavar="STARTS:EVALS:TOL", help="optimizer budget")
    common.add_argument("--jobs", type=_positive_int, default=1, help="worker processes for sweeps and bootstrap")

    tomo = argparse.ArgumentParser(add_help=False)
    tomo.add_argument("--efficiency", type=float, default=1.0, help="detector efficiency folded into the likelihood")
    tomo.add_argument("--tomo-levels", type=_positive_int, default=TomographyConfig().n_levels)
    tomo.add_argument("--bin-width", type=float, default=TomographyConfig().bin_width)

    ap = argparse.ArgumentParser(prog="nlsqueeze", description="Nonlinear squeezing witness toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curve", parents=[common], help="xi against coherent amplitude")
    p.add_argument("--state", required=True, help="pacs spec; alpha is swept")
    p.add_argument("--alpha-range", required=True, metavar="A:B:STEP")
    p.add_argument("--cost", default="cubic", help="cost family: cubic or quintic")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("loss-sweep", parents=[common], help="xi_cubic and Wigner minimum against transmittance")
    p.add_argument("--state", required=True)
    p.add_argument("--eta-range", required=True, metavar="A:B:STEP")
    p.set_defaults(func=cmd_loss_sweep)

    p = sub.add_parser("certify", parents=[common, tomo], help="witness report for a state or quadrature data")
    p.add_argument("--state", default=None)
    p.add_argument("--input", default=None, help="state JSON or quadrature CSV")
    p.add_argument("--bootstrap", type=int, default=0, metavar="N", help="bootstrap resamples for data input")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("xi", parents=[common], help="cost variance ratio without optimization")
    p.add_argument("--state", required=True)
    p.add_argument("--cost", required=True, help="cubic:z=Z or quintic:s=S,r4=R4")
    p.set_defaults(func=cmd_xi)

    p = sub.add_parser("sample", parents=[common], help="synthetic homodyne records as CSV")
    p.add_argument("--state", required=True)
    p.add_argument("--samples", type=_positive_int, default=200000, help="total records")
    p.add_argument("--phases", type=_positive_int, default=12, help="equally spaced phases over [0, pi)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("tomography", parents=[common, tomo], help="maximum-likelihood state from quadrature CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--reference", default=None, help="state spec to report fidelity against")
    p.set_defaults(func=cmd_tomography)

    p = sub.add_parser("wigner", parents=[common], help="Wigner function grid as CSV or JSON")
    p.add_argument("--state", required=True)
    p.add_argument("--grid", default=None, metavar="A:B:STEP", help="axis grid used for both x and p")
    p.set_defaults(func=cmd_wigner)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        ap.error(str(exc))  # exits with status 2
    except (InputFileError, OSError) as exc:
        print(f"nlsqueeze: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ReconstructionStalled, FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"nlsqueeze: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
