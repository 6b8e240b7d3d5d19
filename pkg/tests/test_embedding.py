import math

import numpy as np
import pytest

from urnfield import embedding as emb, reinforcement as rf
from urnfield.errors import InternalConsistencyError

N2 = rf.make_polynomial([0, 0, 1])
N3 = rf.make_polynomial([0, 0, 0, 1])


class TestInit:
    def test_unit_rates(self):
        st = emb.init_embedding(2, (1, 1), 1, N2, seed=1)
        assert st.rate.tolist() == [1.0, 1.0]

    def test_mixed_rates(self):
        st = emb.init_embedding(3, (2, 1, 1), 1, N2, seed=1)
        assert st.rate.tolist() == [4.0, 1.0, 1.0]

    def test_zero_weight_rejected(self):
        with pytest.raises(ValueError):
            emb.init_embedding(2, (0, 1), 1, N2, seed=1)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            emb.init_embedding(1, (1,), 1, N2, seed=1)
        with pytest.raises(ValueError):
            emb.init_embedding(2, (1, 1, 1), 1, N2, seed=1)
        with pytest.raises(ValueError):
            emb.init_embedding(2, (1, 1), 0, N2, seed=1)


class TestAdvance:
    def test_deterministic_race(self):
        st = emb.init_embedding(2, (1, 1), 2, N2, seed=1)
        st.mass[:] = [0.1, 5.0]
        st.xi[:] = [0.1, 5.0]
        st, ev = emb.advance_to_next_jump(st)
        assert ev.edge == 0
        assert ev.time == pytest.approx(0.1)
        assert st.z.tolist() == [2, 1]
        # the loser consumed rate * dt = 0.1 of its mass
        assert st.mass[1] == pytest.approx(4.9)

    def test_jump_count_invariant(self):
        st = emb.init_embedding(3, (1, 2, 1), 2, N3, seed=3)
        for k in range(1, 31):
            st, ev = emb.advance_to_next_jump(st)
            assert st.z.sum() - 4 == k
            assert ev.refresh == (k % 2 == 0)
        assert np.all(np.diff([e.time for e in st.jump_log]) > 0)

    def test_refresh_boundary_flag_and_log(self):
        st = emb.init_embedding(2, (1, 1), 3, N2, seed=5)
        for _ in range(9):
            st, _ = emb.advance_to_next_jump(st)
        assert len(st.refresh_log) == 4  # k = 0..3
        assert emb.extract_discrete(st, 0) == (1, 1)
        assert sum(emb.extract_discrete(st, 3)) == 2 + 9

    def test_refresh_precondition(self):
        st = emb.init_embedding(2, (1, 1), 2, N2, seed=5)
        st, _ = emb.advance_to_next_jump(st)
        with pytest.raises(ValueError):
            emb.refresh_rates(st)

    def test_extract_unrealized(self):
        st = emb.init_embedding(2, (1, 1), 2, N2, seed=5)
        with pytest.raises(ValueError):
            emb.extract_discrete(st, 1)


class TestDecomposition:
    def test_single_rate_for_d1(self):
        st = emb.init_embedding(2, (1, 1), 1, N2, seed=7)
        xi0 = st.xi.copy()
        st, ev = emb.advance_to_next_jump(st)
        dec = emb.sigma_decomposition(st, ev.edge, 1)
        assert len(dec) == 1
        rate, mass = dec[0]
        assert rate == 1.0  # W(1)
        assert mass == pytest.approx(xi0[ev.edge])

    def test_reconstruction_matches_holding_times(self):
        st = emb.init_embedding(2, (1, 1), 2, N2, seed=11)
        for _ in range(60):
            emb.advance_to_next_jump(st)
        sigma = {0: [0.0], 1: [0.0]}  # per-edge visit times, starting at 0
        for ev in st.jump_log:
            sigma[ev.edge].append(ev.time)
        checked = 0
        for (edge, visit), dec in st.visit_decomp.items():
            times = sigma[edge]
            idx = visit - 1  # visit v realized at the (v - a_i)-th ring
            if idx >= len(times):
                continue
            holding = sum(c / r for r, c in dec)
            assert holding == pytest.approx(times[idx] - times[idx - 1], rel=1e-10)
            assert all(c >= 0 for _, c in dec)
            checked += 1
        assert checked > 40

    def test_masses_sum_to_exponential_draw(self):
        st = emb.init_embedding(3, (1, 1, 1), 2, N3, seed=13)
        draws = {}
        for _ in range(50):
            before = {i: st.xi[i] for i in range(3)}
            st, ev = emb.advance_to_next_jump(st)
            dec = st.visit_decomp[(ev.edge, int(st.z[ev.edge]))]
            assert sum(c for _, c in dec) == pytest.approx(before[ev.edge], rel=1e-12)
            draws[ev.edge] = True

    def test_holding_time_sandwich(self):
        # each reconstruction lies between xi/max(rates) and xi/min(rates)
        st = emb.init_embedding(2, (1, 1), 3, N2, seed=17)
        for _ in range(60):
            emb.advance_to_next_jump(st)
        for (edge, visit), dec in st.visit_decomp.items():
            xi = sum(c for _, c in dec)
            holding = sum(c / r for r, c in dec)
            rates = [r for r, _ in dec]
            assert xi / max(rates) <= holding * (1 + 1e-12)
            assert holding <= xi / min(rates) * (1 + 1e-12)

    def test_at_most_two_rates_per_timer(self):
        # an armed timer's count is frozen, so only the arming-block snapshot
        # and the settled count can appear as denominators
        st = emb.init_embedding(2, (1, 1), 4, N2, seed=19)
        for _ in range(80):
            emb.advance_to_next_jump(st)
        for dec in st.visit_decomp.values():
            assert len({r for r, _ in dec}) <= 2

    def test_unrealized_visit(self):
        st = emb.init_embedding(2, (1, 1), 2, N2, seed=5)
        with pytest.raises(ValueError):
            emb.sigma_decomposition(st, 0, 500)


class TestRaceDistribution:
    def test_first_jump_probability(self):
        # rates (4, 1): edge 1 wins with probability 0.8
        counts = emb.sample_embedding_counts(N2, 2, (2, 1), 1, 1, 100_000, seed=23)
        frac = float(np.mean(counts[:, 0] == 3))
        assert abs(frac - 0.8) < 3 * math.sqrt(0.8 * 0.2 / 100_000)

    def test_symmetric_first_block(self):
        counts = emb.sample_embedding_counts(N2, 2, (1, 1), 1, 1, 50_000, seed=29)
        frac = float(np.mean(counts[:, 0] == 2))
        assert abs(frac - 0.5) < 3 * math.sqrt(0.25 / 50_000)

    def test_totals_exact(self):
        counts = emb.sample_embedding_counts(N3, 3, (1, 2, 1), 2, 4, 5_000, seed=31)
        assert np.all(counts.sum(axis=1) == 4 + 8)


class TestCompareLaws:
    def test_same_generator_two_seeds_not_rejected(self):
        rejections = 0
        for rep in range(20):
            za = emb.sample_multicolor_counts(N2, 2, (1, 1), 2, 3, 4_000, seed=1000 + rep)
            zb = emb.sample_multicolor_counts(N2, 2, (1, 1), 2, 3, 4_000, seed=5000 + rep)
            if emb.compare_laws(za, zb).p_value < 0.01:
                rejections += 1
        assert rejections <= 3

    def test_embedding_matches_discrete(self):
        za = emb.sample_embedding_counts(N2, 2, (1, 1), 2, 3, 50_000, seed=41)
        zb = emb.sample_multicolor_counts(N2, 2, (1, 1), 2, 3, 50_000, seed=42)
        assert emb.compare_laws(za, zb).p_value > 1e-3

    def test_broken_refresh_rejected(self):
        rho = rf.make_exponential(4.0)
        za = emb.sample_embedding_counts(
            rho, 2, (1, 1), 2, 3, 50_000, seed=43, refresh_every_jump=True
        )
        zb = emb.sample_multicolor_counts(rho, 2, (1, 1), 2, 3, 50_000, seed=44)
        assert emb.compare_laws(za, zb).p_value < 1e-3

    def test_refresh_every_jump_harmless_when_d1(self):
        rho = rf.make_exponential(3.0)
        za = emb.sample_embedding_counts(
            rho, 2, (1, 1), 1, 6, 40_000, seed=45, refresh_every_jump=True
        )
        zb = emb.sample_multicolor_counts(rho, 2, (1, 1), 1, 6, 40_000, seed=46)
        assert emb.compare_laws(za, zb).p_value > 1e-3

    def test_small_samples_rejected(self):
        za = np.ones((50, 2), dtype=np.int64)
        with pytest.raises(ValueError):
            emb.compare_laws(za, za)

    def test_identical_single_outcome(self):
        za = np.ones((200, 2), dtype=np.int64)
        rep = emb.compare_laws(za, za)
        assert rep.p_value == 1.0


class TestJumpLogExport:
    def test_csv_columns_and_rows(self, tmp_path):
        st = emb.init_embedding(3, (1, 1, 1), 2, N2, seed=3)
        for _ in range(10):
            emb.advance_to_next_jump(st)
        path = tmp_path / "log.csv"
        emb.save_jump_log(st, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "jump_index,tau,edge,Z_1,Z_2,Z_3,refresh_flag"
        assert len(lines) == 11
        last = lines[-1].split(",")
        assert sum(int(v) for v in last[3:6]) == 3 + 10
        assert last[-1] == "1"  # jump 10 lands on a block boundary (d=2)


class TestVisitTimes:
    def test_matches_jump_log(self):
        st = emb.init_embedding(2, (1, 1), 2, N2, seed=3)
        for _ in range(20):
            emb.advance_to_next_jump(st)
        t0 = emb.visit_times(st, 0)
        t1 = emb.visit_times(st, 1)
        assert len(t0) + len(t1) == 20
        assert len(t0) == st.z[0] - 1
        assert all(a < b for a, b in zip(t0, t0[1:]))
        with pytest.raises(ValueError):
            emb.visit_times(st, 5)


class TestMassIntegrity:
    def test_corrupted_mass_detected(self):
        st = emb.init_embedding(2, (1, 1), 2, N2, seed=3)
        emb.advance_to_next_jump(st)
        st.mass[0] = -1.0
        with pytest.raises(InternalConsistencyError):
            emb.advance_to_next_jump(st)
            emb.advance_to_next_jump(st)
            emb.refresh_rates(st)
