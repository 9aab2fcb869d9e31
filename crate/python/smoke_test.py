"""Smoke test for the Python extension.

Build first:
    cargo build --release -p dpc-precoding-py --features extension-module
then run `python3 python/smoke_test.py`. If the module is not installed, the
freshly built shared library is loaded from target/release.
"""

import importlib.util
import math
import pathlib
import shutil
import sys
import tempfile

import numpy as np


def load():
    try:
        import dpc_precoding_py

        return dpc_precoding_py
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    for name in ("libdpc_precoding_py.so", "libdpc_precoding_py.dylib"):
        lib = root / "target" / "release" / name
        if lib.exists():
            tmp = pathlib.Path(tempfile.mkdtemp()) / "dpc_precoding_py.so"
            shutil.copy(lib, tmp)
            spec = importlib.util.spec_from_file_location("dpc_precoding_py", tmp)
            mod = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(mod)
            return mod
    sys.exit("extension not built; see the module docstring")


def main():
    dp = load()

    one = dp.ProblemInstance([[1 + 0j]], [1.0])
    assert abs(dp.solve_fixed_order(one)["sum_power"] - 1.0) < 1e-12
    assert dp.certify(one)["verdict"] == "Optimal"

    inst = dp.ProblemInstance.sample(3, 3, 2.0, 7)
    assert inst.num_users == 3 and inst.num_tx_antennas == 3
    again = dp.ProblemInstance.from_json(inst.to_json())
    assert again.channels == inst.channels

    sol = dp.solve_fixed_order(inst, [2, 0, 1])
    # SIC rates recomputed here with numpy.
    H = np.array(inst.channels)
    p = np.array(sol["powers"])

    def logdet(users):
        Z = np.eye(3, dtype=complex)
        for u in users:
            Z += p[u] * np.outer(H[u], H[u].conj())
        return math.log2(np.linalg.det(Z).real)

    order = [2, 0, 1]
    for pos, u in enumerate(order):
        rate = logdet(order[pos:]) - logdet(order[pos + 1:])
        assert abs(rate - 2.0) < 1e-9, rate

    relax = dp.ellipsoid_solve(inst)
    best = dp.exhaustive_search(inst)
    heur = dp.heuristic_search(inst, [2, 0, 1])
    assert relax["sum_power"] <= best["sum_power"] + 1e-6
    assert best["sum_power"] <= heur["sum_power"] <= sol["sum_power"] + 1e-12
    assert dp.capacity_region_check(inst, relax["powers"], tol=1e-7)

    dl = dp.mac_to_bc(inst, best["order"])
    assert abs(dl["sum_power"] - best["sum_power"]) < 1e-8 * best["sum_power"]
    assert all(abs(s - 3.0) < 1e-6 * 3.0 for s in dl["sinrs"])

    lam_n = dp.lagrange_multipliers(inst, order)
    lam_b = dp.lagrange_multipliers(inst, order, unit="bits")
    assert all(abs(b - n * math.log(2)) < 1e-12 * abs(b) for b, n in zip(lam_b, lam_n))

    try:
        dp.solve_fixed_order(inst, [0, 0, 1])
    except ValueError:
        pass
    else:
        raise AssertionError("bad permutation accepted")

    print(f"ok: relaxation {relax['sum_power']:.6f}, exhaustive {best['sum_power']:.6f}, "
          f"heuristic {heur['sum_power']:.6f} ({heur['termination']})")


if __name__ == "__main__":
    main()
