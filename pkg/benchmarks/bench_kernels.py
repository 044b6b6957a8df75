"""Compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Times the cost-moment kernel (one optimizer objective evaluation) and the
Wigner grid kernel on representative inputs, checks that both backends
agree, and prints a table of median times and speedups.
"""

import argparse
import timeit

import numpy as np

from nlsqueeze import _fallback
from nlsqueeze.fock import DensityMatrix
from nlsqueeze.states import PhotonAddedSpec, loss_channel, photon_added_coherent

try:
    from nlsqueeze import _kernels
except ImportError:
    _kernels = None


def moment_case(n_levels: int, eta: float):
    rho = DensityMatrix.from_ket(photon_added_coherent(PhotonAddedSpec(1.43, 1), n_levels))
    rho = loss_channel(rho, eta) if eta < 1 else rho
    v = rho.spectral_factor()
    vt = np.zeros((v.shape[1], n_levels + 4), complex)
    vt[:, :n_levels] = v.T
    amp = _fallback.moment_amplitudes(n_levels + 4)
    args = (vt, amp, 0.8 - 0.3j, 0.4, 0.2 + 1.1j, -0.1, np.array([0.0, 0.0, 1.0, 0.0, -0.1]))
    return f"cost_moments N={n_levels} rank={v.shape[1]}", lambda mod: mod.cost_moments(*args)


def wigner_case(n_levels: int, points: int):
    rho = DensityMatrix.from_ket(photon_added_coherent(PhotonAddedSpec(1.0, 2), n_levels)).matrix
    ax = np.linspace(-6, 6, points)
    return f"wigner_grid N={n_levels} {points}x{points}", lambda mod: mod.wigner_grid(rho, ax, ax)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
    cases = [moment_case(60, 1.0), moment_case(60, 0.6), wigner_case(30, 101), wigner_case(60, 201)]
    print(f"{'kernel':<36}{'fallback ms':>14}{'compiled ms':>14}{'speedup':>10}")
    for name, call in cases:
        times = {}
        for label, mod in (("fallback", _fallback), ("compiled", _kernels)):
            if mod is None:
                continue
            runs = timeit.repeat(lambda: call(mod), number=1, repeat=args.repeat)
            times[label] = 1e3 * float(np.median(runs))
        if _kernels is not None:
            np.testing.assert_allclose(call(_kernels), call(_fallback), rtol=1e-10, atol=1e-12)
            print(f"{name:<36}{times['fallback']:>14.3f}{times['compiled']:>14.3f}{times['fallback'] / times['compiled']:>9.1f}x")
        else:
            print(f"{name:<36}{times['fallback']:>14.3f}{'-':>14}{'-':>10}")


if __name__ == "__main__":
    main()
