"""Smoke test for the pe3d extension module.

Build and import:
    cargo build --release -p pe3d-python --features extension-module
    cp target/release/libpe3d.so python/pe3d.so
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pe3d  # noqa: E402


def main():
    g = pe3d.Grid.cube(8)
    assert g.shape == (9, 9, 9)

    v = pe3d.Field.random(g, seed=1, e2=1.0)
    n = v.norms()
    assert math.isclose(n["E2"], 1.0, rel_tol=1e-12), n
    assert v.constraint_residual() <= 1e-8
    assert v.bc_residual() <= 1e-12

    # Projection is idempotent on a field that already satisfies the constraint.
    p = v.project()
    diff = (p - v).norms()["H2"]
    assert diff <= 1e-18 * n["H2"] + 1e-30, diff

    # Unforced decay.
    sim = pe3d.Simulator(g, dt_max=1e-3)
    w = sim.advance(v, 0.05)
    assert w.norms()["H2"] < n["H2"]
    _, dt, slack = sim.step(w)
    assert dt > 0 and slack <= 1e-12

    trace = pe3d.kick_chain(v.scaled(0.5), t_kick=0.01, r=0.25, n_steps=5, seed=3)
    assert len(trace) == 6
    assert all(row["E2"] <= 1.0 * (1 + 1e-6) for row in trace)

    assert pe3d.wasserstein1([0.0, 1.0], [1.0, 2.0]) == 1.0

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "v.pe3d")
        v.save(path, 0.25)
        back, t = pe3d.Field.load(path)
        assert back == v and t == 0.25

        cfg = "experiment = decay\n[grid]\nn1 = 6\nn2 = 6\nnz = 6\n[sim]\nt_end = 0.05\n[decay]\nn_initial = 1\neps = 1\n"
        parsed = pe3d.parse_config(cfg)
        assert parsed["grid"]["n1"] == 6
        summary = pe3d.run_experiment(cfg, output_dir=os.path.join(d, "out"))
        assert summary["passed"], summary

    try:
        pe3d.parse_config("[sim]\ncfl = 1.5\n")
    except ValueError as e:
        assert "sim.cfl" in str(e)
    else:
        raise AssertionError("cfl = 1.5 accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
