"""Smoke test for the lstar_py extension.

Build and run:
    pip install maturin
    cd crates/python && maturin develop --release
    python python/smoke_test.py
"""
import json
import math

import lstar_py as ls


def close(a, b, tol=1e-8):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    x = [[3.0, 0.0], [0.0, 4.0]]
    assert close(ls.nuclear_norm(x), 7.0)
    assert close(ls.lstar_rank(x), 49.0 / 25.0)
    assert close(ls.prox_nuclear(x, 1.0)[1][1], 3.0)

    op = ls.Operator.random("gaussian", 4, 4, 40, seed=1, normalize=True)
    assert op.shape == (4, 4) and op.m == 40
    signal = [[1.0 if i == j == 0 else 0.0 for j in range(4)] for i in range(4)]
    y = op.apply(signal)
    res = ls.solve(op, y, "mbp", 0.0)
    err = math.sqrt(sum((a - b) ** 2 for ra, rb in zip(res["x_hat"], signal) for a, b in zip(ra, rb)))
    assert err < 1e-4, err

    ident = ls.Operator.identity(3, 3)
    lo, _ = ls.estimate_cmsv(ident, 2.0, "min", starts=4, seed=0)
    assert close(lo, 1.0)
    assert close(ls.bound_mbp(0.1, 0.5), 0.4)
    assert close(ls.mric_upper_bound(0.8, 1.1), 0.36)

    small = ls.Operator.random("gaussian", 2, 2, 3, seed=2)
    assert ls.brute_force_cmsv(small, 1.0, "max", samples=10000) >= ls.estimate_rcsv(small, 1, "max") * 0.98

    cfg = {"kind": "cmsv", "ensemble": {"kind": "gaussian", "n1": 2, "n2": 2, "m": 4}, "tau": 1.5, "starts": 2}
    files = ls.run_experiment(json.dumps(cfg))
    assert sorted(files) == ["cmsv.csv", "cmsv.json"]
    assert files == ls.run_experiment(json.dumps(cfg))
    print("lstar_py", ls.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
