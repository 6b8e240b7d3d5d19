"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Statistical criteria run at fixed master seeds, so their outcomes are
deterministic; tolerances and thresholds are stated inline next to each
assertion.
"""

import json
import math
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

from urnfield import embedding as emb, ensembles as ens, meanfield as mf
from urnfield import reinforcement as rf, urns
from urnfield.cli import main as cli_main
from urnfield.seeds import derive_seed

P = mf.ModelParams


@contextmanager
def criterion(num, desc):
    try:
        yield
    except BaseException:
        print(f"[FAIL] criterion {num:02d}: {desc}", file=sys.stderr, flush=True)
        raise
    print(f"[PASS] criterion {num:02d}: {desc}", flush=True)


def example_i_seq():
    return rf.make_table(
        [], rf.TailRule((rf.PolyBranch((0, 0, 0, 0, 1)), rf.PolyBranch((1, 0, 0, -1, 1))))
    )


def test_c01_gradient_identity():
    with criterion(1, "central-difference gradient of the potential matches the field"):
        rng = np.random.default_rng(20240101)
        h = 1e-6
        t0 = time.perf_counter()
        worst = 0.0
        for m in (2, 3, 5):
            for p in (0.0, 0.3, 0.5):
                params = P(m, p)
                for _ in range(100):
                    x, y = rng.uniform(h, 1 - h, 2)
                    gx = (mf.lyapunov(params, x + h, y) - mf.lyapunov(params, x - h, y)) / (2 * h)
                    gy = (mf.lyapunov(params, x, y + h) - mf.lyapunov(params, x, y - h)) / (2 * h)
                    f1, f2 = mf.field(params, x, y)
                    worst = max(worst, abs(gx - f1), abs(gy - f2))
        elapsed = time.perf_counter() - t0
        assert worst < 1e-6, f"max gradient error {worst}"
        assert elapsed < 1.0, f"runtime {elapsed:.2f}s exceeds 1s"


def test_c02_closed_form_oracle():
    with criterion(2, "quadrature potential matches the m=2,3 closed forms to 1e-8"):
        rng = np.random.default_rng(20240102)
        for m in (2, 3):
            for _ in range(100):
                x, y, p = rng.random(3)
                got = mf.lyapunov(P(m, p), x, y)
                want = mf.lyapunov_closed(m, p, x, y)
                assert abs(got - want) < 1e-8, (m, p, x, y, got - want)


def test_c03_eigenvalue_anchors():
    with criterion(3, "eigenvalue anchors at the center and the corners"):
        for m in range(2, 11):
            for p in (0.0, 0.25, 0.5, 0.75):
                params = P(m, p)
                assert abs(mf.eigenvalues(params, 0.5, 0.5)[1] - (m - 1)) < 1e-9
                assert abs(mf.eigenvalues(params, 0.0, 0.0)[1] + 1.0) < 1e-9
                assert abs(mf.eigenvalues(params, 1.0, 1.0)[1] + 1.0) < 1e-9


def test_c04_equilibria_at_p_zero():
    with criterion(4, "equilibria at p=0 are exactly the 3x3 product grid"):
        expected = {(a, b) for a in (0.0, 0.5, 1.0) for b in (0.0, 0.5, 1.0)}
        for m in (2, 3, 5):
            eqs = mf.find_equilibria(P(m, 0.0), grid_n=128, tol=1e-10)
            assert len(eqs) == 9, f"m={m}: found {len(eqs)}"
            got = {(round(e.x, 8), round(e.y, 8)) for e in eqs}
            assert got == expected


def test_c05_m2_stability_threshold():
    with criterion(5, "m=2 stability threshold at 1 - sqrt(2)/2 and the closed form"):
        lo, hi = 0.2, 0.4
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if mf.um_stability_margin(P(2, mid)) < 0:
                lo = mid
            else:
                hi = mid
        crossing = 0.5 * (lo + hi)
        assert abs(crossing - (1 - math.sqrt(2) / 2)) < 1e-6, crossing
        for p in np.linspace(0.0, 0.49, 100):
            u = mf.solve_um(P(2, float(p)))
            assert abs(u - (0.5 - 0.5 * math.sqrt(1 - 2 * p))) < 1e-10


def test_c06_classification_at_large_p():
    with criterion(6, "every off-corner equilibrium is unstable for p >= 1/2"):
        for m in (3, 5):
            for p in (0.5, 0.6):
                for e in mf.find_equilibria(P(m, p), grid_n=128, tol=1e-10):
                    is_corner = (abs(e.x) < 1e-9 and abs(e.y) < 1e-9) or (
                        abs(e.x - 1) < 1e-9 and abs(e.y - 1) < 1e-9
                    )
                    if not is_corner:
                        assert e.stability == "unstable", (m, p, e)


def test_c07_offdiagonal_equilibrium_convergence():
    with criterion(7, "off-diagonal equilibria converge to (0.3, 1) along m"):
        t0 = time.perf_counter()
        dists = []
        for m in (20, 30, 40):
            eq = mf.solve_sm(P(m, 0.3))
            assert eq.stability == "strictly_stable", (m, eq)
            dists.append(math.hypot(eq.x - 0.3, eq.y - 1.0))
        elapsed = time.perf_counter() - t0
        assert all(a > b for a, b in zip(dists, dists[1:])), dists
        assert dists[-1] < 0.05, dists
        assert elapsed < 1.0, f"runtime {elapsed:.2f}s exceeds 1s"


def test_c08_inequality_grids():
    with criterion(8, "symmetric ratio and antidiagonal margins hold on grids"):
        hs = np.linspace(0.0, 1.0 / math.sqrt(5.0), 10_002, endpoint=False)[1:]
        for m in range(3, 13):
            bad = [h for h in hs if mf.odd_power_ratio(m, float(h)) < 2 * h]
            assert not bad, (m, bad[:3])
        hs2 = np.linspace(0.0, 0.5, 10_002, endpoint=False)[1:]
        for m in range(2, 13):
            bad = [h for h in hs2 if mf.beta_margin(m, float(h)) <= 0]
            assert not bad, (m, bad[:3])


def test_c09_coupling_pathwise():
    with criterion(9, "pathwise dominance of the coupled processes, 0 violations"):
        n2 = rf.make_polynomial([0, 0, 1])
        for p in (0.2, 0.8):
            for seed in range(100):
                _, _, violations = urns.run_coupled(
                    (1, 1), (1, 1), p, n2, seed=seed, n_steps=10_000, record_every=10_000
                )
                assert violations == 0, (p, seed, violations)


def test_c10_embedding_law_check():
    with criterion(10, "embedded counts match the discrete urn in law"):
        n2 = rf.make_polynomial([0, 0, 1])
        for k in (1, 2, 3):
            rejected = 0
            for rep in range(100):
                sa = derive_seed(777000 + rep, 2 * k)
                sb = derive_seed(777000 + rep, 2 * k + 1)
                za = emb.sample_embedding_counts(n2, 2, (1, 1), 2, k, 100_000, seed=sa)
                zb = emb.sample_multicolor_counts(n2, 2, (1, 1), 2, k, 100_000, seed=sb)
                if emb.compare_laws(za, zb).p_value <= 1e-3:
                    rejected += 1
            assert rejected <= 1, f"k={k}: {rejected} of 100 meta-repetitions rejected"
        # negative control: per-jump rate updates break the law visibly for
        # weights with strong within-block variation
        rho = rf.make_exponential(4.0)
        za = emb.sample_embedding_counts(
            rho, 2, (1, 1), 2, 3, 100_000, seed=55, refresh_every_jump=True
        )
        zb = emb.sample_multicolor_counts(rho, 2, (1, 1), 2, 3, 100_000, seed=56)
        assert emb.compare_laws(za, zb).p_value < 1e-3


def test_c11_monopoly_at_full_interaction():
    with criterion(11, "strong weights monopolize at full interaction; linear do not"):
        cube1 = rf.make_polynomial([1, 3, 3, 1])  # (n+1)^3
        for seq in (cube1, example_i_seq()):
            for nc in (2, 3):
                cfg = ens.EnsembleConfig(
                    model="multicolor", seq=seq, nc=nc, a=(1,) * nc, d=2,
                    n_steps=100_000, n_runs=500, seed=4040, record_every=1000,
                )
                est = ens.estimate_monopoly_prob(cfg)
                assert est.frequency >= 0.95, (seq.kind, nc, est.frequency)
                assert est.ci[0] > 0.5, (seq.kind, nc, est.ci)
        linear = rf.make_polynomial([0, 1])
        cfg = ens.EnsembleConfig(
            model="multicolor", seq=linear, nc=2, a=(1, 1), d=2,
            n_steps=100_000, n_runs=500, seed=4040, record_every=1000,
        )
        est = ens.estimate_monopoly_prob(cfg)
        assert est.frequency <= 0.05, est.frequency


def test_c12_mixed_limit_at_small_p():
    with criterion(12, "the mixed limit cell and both corners get mass at m=2, p=0.2"):
        n2 = rf.make_polynomial([0, 0, 1])
        cfg = ens.EnsembleConfig(
            model="ium", seq=n2, p=0.2, d=2, black0=(1, 1), red0=(1, 1),
            n_steps=100_000, n_runs=1000, seed=2025, record_every=100,
        )
        rep = ens.run_ensemble(cfg)
        u2 = mf.solve_um(P(2, 0.2))
        wanted = [(u2, 1 - u2), (0.0, 0.0), (1.0, 1.0)]
        for target in wanted:
            cell = min(
                rep.cells,
                key=lambda c: math.hypot(c.location[0] - target[0], c.location[1] - target[1]),
            )
            assert math.hypot(cell.location[0] - target[0], cell.location[1] - target[1]) < 1e-6
            assert cell.count >= 1 and cell.ci[0] > 0.0, (target, cell)


def test_c13_domination_at_large_p():
    with criterion(13, "domination frequency >= 0.95 at m=3, p=0.55"):
        n3 = rf.make_polynomial([0, 0, 0, 1])
        cfg = ens.EnsembleConfig(
            model="ium", seq=n3, p=0.55, d=2, black0=(1, 1), red0=(1, 1),
            n_steps=100_000, n_runs=500, seed=2024, record_every=100,
        )
        rep = ens.run_ensemble(cfg)
        assert rep.domination_frequency >= 0.95, rep.domination_frequency


def test_c14_cli_determinism(tmp_path):
    with criterion(14, "repeated command invocations produce byte-identical data"):
        sim = ["simulate", "--model", "ium", "--m", "3", "--p", "0.2",
               "--steps", "2000", "--seed", "11", "--record-every", "100"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert cli_main(sim + ["--out", str(a)]) == 0
        assert cli_main(sim + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

        fld = ["field", "--m", "4", "--p", "0.35", "--resolution", "17"]
        fa, fb = tmp_path / "fa.csv", tmp_path / "fb.csv"
        assert cli_main(fld + ["--out", str(fa)]) == 0
        assert cli_main(fld + ["--out", str(fb)]) == 0
        assert fa.read_bytes() == fb.read_bytes()

        cfg = {
            "schema": 1, "model": "ium",
            "seq": {"kind": "polynomial", "coeffs": [0, 0, 1]},
            "p": 0.3, "n_steps": 1000, "n_runs": 20, "seed": 5,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        ra, rb = tmp_path / "ra.json", tmp_path / "rb.json"
        assert cli_main(["mc", "--config", str(cfg_path), "--out", str(ra)]) == 0
        assert cli_main(["mc", "--config", str(cfg_path), "--out", str(rb)]) == 0
        assert ra.read_bytes() == rb.read_bytes()

        et = ["embed-test", "--nc", "2", "--a", "1,1", "--d", "2", "--m", "2",
              "--k", "2", "--samples", "1000", "--seed", "9"]
        ea, eb = tmp_path / "ea.json", tmp_path / "eb.json"
        assert cli_main(et + ["--out", str(ea)]) == 0
        assert cli_main(et + ["--out", str(eb)]) == 0
        assert ea.read_bytes() == eb.read_bytes()
