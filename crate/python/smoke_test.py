"""Smoke test for the `elsa` extension module.

Build and install first, e.g.

    cd crates/python && maturin develop --release

then run `python python/smoke_test.py`.
"""

import math
import random

import elsa


def close(a, b, tol):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def main():
    rng = random.Random(7)

    a = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]
    moved = elsa.mskmov(a, (1, 1, 1, 2), (1, 1))
    assert moved == [[0.0, 0.0, 0.0], [0.0, 1.0, 2.0]], moved

    x = [[rng.uniform(-1, 1) for _ in range(3)] for _ in range(2)]
    y = [[rng.uniform(-1, 1) for _ in range(4)] for _ in range(3)]
    want = [[sum(x[i][k] * y[k][j] for k in range(3)) for j in range(4)] for i in range(2)]
    for variant in ("lsa", "v1", "v2"):
        got = elsa.attention_matmul(x, y, variant)
        assert all(close(g, w, 1e-12) for g, w in zip(got, want)), variant

    skip = elsa.skip_params(2, 3)
    h = [[rng.uniform(-1, 1) for _ in range(3)] for _ in range(2)]
    assert elsa.elsa_forward(h, *(skip[k] for k in ("w1", "w2", "w3", "b1", "b2", "b3"))) == h

    p = elsa.RidgeProblem.random(20, 4, 0.5, 2000, seed=3)
    closed = p.closed_form()
    for form in ("lsa", "elsa", "lsa-as-elsa"):
        rep = p.run(form)
        assert rep["max_step_deviation"] <= 1e-10, (form, rep["max_step_deviation"])
        assert close(rep["w_trace"][-1], closed, 1e-8), form
        assert close(rep["w_trace"][-1], p.gd_trace()[-1], 1e-10), form

    f = [[4.0, 1.0, 0.0], [1.0, 5.0, 2.0], [0.0, 2.0, 6.0]]
    alpha = [1.0, 2.0, 3.0]
    sol, report = elsa.solve(f, alpha)
    residual = [sum(f[i][j] * sol[j] for j in range(3)) - alpha[i] for i in range(3)]
    assert max(map(abs, residual)) <= 1e-12, residual
    approx, _ = elsa.solve(f, alpha, mode="relu")
    assert close(approx, sol, 1e-2)

    try:
        elsa.solve([[1.0, 1.0], [1.0, 1.0]], [1.0, 1.0])
    except ValueError as e:
        assert str(e).startswith("PivotBelowTolerance"), e
    else:
        raise AssertionError("singular system accepted")

    inv = elsa.InvSqr("explicit:1,2")
    assert inv(1.5) == 0.625 and inv(-1.5) == 0.625 and inv(5.0) == 0.0
    assert math.isclose(elsa.InvSqr()(0.5), 4.0, rel_tol=1e-2)

    rep = elsa.verify_lemmas(trials=5, max_dim=4)
    assert all(s["failed"] == 0 for s in rep["suites"]), rep

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
