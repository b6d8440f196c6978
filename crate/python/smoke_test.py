"""Smoke test for the `todp` extension module.

Build it first, e.g. `maturin develop -m crates/py/Cargo.toml`, or copy
`target/release/libtodp.so` to `todp.so` somewhere on PYTHONPATH.
"""

import math
import sys
import tempfile

import todp


def main():
    assert abs(todp.speed(0.0) - 586.8) < 1e-9
    assert todp.speed(4500.0) == 0.0

    day = todp.simulate_day([0.0], [4693.44])
    assert day["peak_accumulation"] == 1
    assert abs(day["travel_times"][0] - 4693.44 / todp.speed(1.0)) < 1e-9

    pop = todp.build_population(n_travelers=50, seed=3)
    assert len(pop["L"]) == 50
    assert all(0.3 <= s <= 0.7 for s in pop["sde"])

    toll = todp.TollProfile([(11.0, 80.0, 18.0)])
    assert abs(toll.eval(80.0) - 11.0) < 1e-12
    assert toll.to_vector() == [11.0, 80.0, 18.0]
    assert todp.TollProfile.from_vector([11.0, 80.0, 18.0], 1).components() == toll.components()

    exp = todp.Experiment("[population]\nn_travelers = 200\n[dynamics]\nmax_days = 40\n")
    assert exp.mode == "nte"
    nte = exp.equilibrium()
    tolled = exp.equilibrium(toll)
    assert tolled["rr"] > 0.0
    assert math.isclose(tolled["cs"] + tolled["rr"], tolled["welfare"], rel_tol=0, abs_tol=1e-9)
    print(f"no toll welfare {nte['welfare']:.3f}, tolled {tolled['welfare']:.3f}")

    with tempfile.TemporaryDirectory() as out:
        summary = exp.run(out)
        assert summary["mode"] == "nte"
        assert len(summary["scenarios"]) == 1

    def neg_sphere(x):
        return -sum(v * v for v in x)

    res = todp.run_bo(neg_sphere, [(-1.0, 2.0)] * 2, n_init=8, budget=20, seed=1)
    assert len(res["objectives"]) == 20
    assert res["incumbent"] == sorted(res["incumbent"])
    assert res["best_objective"] > -0.05, res["best_objective"]

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
