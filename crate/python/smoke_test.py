"""Smoke test for the ppclf extension module.

Build and install first:  pip install --no-build-isolation ./crates/python
"""
import json
import math
import sys
import tempfile

import ppclf


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def main():
    # equilibrium identities
    for clf in ppclf.Clf.catalog(0.5):
        assert abs(clf.value(1.0, 1.0)) < 1e-12, clf
        gx, gy = clf.gradient(1.0, 1.0)
        assert abs(gx) < 1e-12 and abs(gy) < 1e-12, clf
    for model in ("predator-only", "simultaneous"):
        dx, dy = ppclf.vector_field_at(model, 1.0, 1.0, 1.0)
        assert dx == 0.0 and dy == 0.0

    v = ppclf.Clf("V_SF_STRICT")
    assert close(v.value(2.0, 1.0), math.log(2.0))
    assert v.is_strict() and v.model == "predator-only"

    fwd = ppclf.Controller("forwarding")
    assert fwd(0.5, 0.1) < 0.0
    assert ppclf.Controller("backstepping-positive")(0.01, 50.0) > 0.0

    bad = [("Controller", ("mixed-linear",), {"eps": 1.5}), ("State", (0.0, 1.0), {})]
    for name, args, kw in bad:
        try:
            getattr(ppclf, name)(*args, **kw)
        except ValueError:
            pass
        else:
            raise AssertionError(f"{name}{args} accepted")

    traj = ppclf.simulate(
        "predator-only", ppclf.Controller("predator-linear"), 2.0, 1.0,
        t_end=60.0, tol=1e-10, samples=601, clfs=[v],
    )
    assert len(traj["t"]) == 601
    assert min(traj["X"]) > 0.0 and min(traj["Y"]) > 0.0
    assert abs(traj["X"][-1] - 1.0) < 1e-4 and abs(traj["Y"][-1] - 1.0) < 1e-4
    series = traj["V_SF_STRICT"]
    assert all(b - a <= 1e-9 for a, b in zip(series, series[1:]))
    assert traj["csv"].splitlines()[0] == "t,X,Y,U,V_SF_STRICT"

    reports = ppclf.verify(v, grid_n=60)
    assert all(r.passed for r in reports), reports
    weak = ppclf.verify(ppclf.Clf("V1_SF"), grid_n=60, strict=True)
    failed = [r for r in weak if not r.passed]
    assert failed and failed[0].worst_point[1] == 1.0
    doc = json.loads(failed[0].to_json())
    assert set(doc) == {"check", "verdict", "worst_point", "margin", "points", "params"}

    assert all(r.passed for r in ppclf.sweep(grid_n=20))

    with tempfile.TemporaryDirectory() as out:
        assert ppclf.run_cli(["invariant", "--out", out]) == 0
        assert ppclf.run_cli(["verify", "--clf", "V_BOTH_STRICT", "--eps", "1.5", "--out", out]) == 2

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
