import numpy as np
import pytest

from nashbench.bounds import (
    EnvelopeState,
    acquisition,
    compose_table,
    monotone_envelope,
    slice_reduce_max,
    u_bounds,
)
from nashbench.gp import SurrogateModel
from nashbench.kernels import KernelParams
from nashbench.solver import theoretical_beta
from nashbench.space import JointSpace, unit_grid

from _oracles import brute_slice_max


def _tiny_space():
    return JointSpace([unit_grid(3, 1), unit_grid(3, 1)])


class TestUBounds:
    def test_plain_arithmetic(self):
        mean = np.array([0.0, 1.0, -2.0])
        var = np.array([1.0, 4.0, 0.25])
        lcb, ucb = u_bounds(mean, var, beta=4.0)
        np.testing.assert_allclose(lcb, [-2.0, -3.0, -3.0])
        np.testing.assert_allclose(ucb, [2.0, 5.0, -1.0])

    def test_beta_zero_collapses_to_mean(self):
        mean = np.array([0.3, -0.7])
        lcb, ucb = u_bounds(mean, np.array([1.0, 1.0]), beta=0.0)
        np.testing.assert_array_equal(lcb, mean)
        np.testing.assert_array_equal(ucb, mean)

    def test_negative_beta_rejected(self):
        with pytest.raises(ValueError, match="beta"):
            u_bounds(np.zeros(2), np.ones(2), beta=-1.0)

    def test_negative_variance_clamped(self):
        lcb, ucb = u_bounds(np.zeros(1), np.array([-1e-15]), beta=2.0)
        assert lcb[0] == ucb[0] == 0.0


class TestSliceReduce:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_matches_brute_force(self, seed, saddle_small):
        space = saddle_small.space
        rng = np.random.default_rng(seed)
        values = rng.normal(size=len(space))
        region = rng.uniform(size=len(space)) < 0.6 if seed % 2 else None
        for agent in range(2):
            fast = slice_reduce_max(values, space, agent, region)
            mask = region if region is not None else np.ones(len(space), bool)
            for cid in rng.integers(0, len(space), size=12):
                brute = brute_slice_max(values, space, agent, int(cid),
                                        region_mask=mask)
                got = fast[int(cid)]
                if np.isnan(brute):
                    assert np.isnan(got)
                else:
                    assert got == pytest.approx(brute, abs=1e-12)

    def test_empty_slice_is_nan(self):
        space = _tiny_space()
        region = np.zeros(9, dtype=bool)
        region[4] = True  # only the joint center; every other row of agent 0's
        # slice structure misses it
        out = slice_reduce_max(np.arange(9.0), space, 0, region)
        assert np.isnan(out).sum() > 0
        assert np.isfinite(out[4])

    def test_constant_within_slice(self, saddle_small):
        space = saddle_small.space
        values = np.random.default_rng(5).normal(size=len(space))
        out = slice_reduce_max(values, space, 1)
        for row in range(space.slice_rows[1].shape[0]):
            members = space.slice_rows[1][row]
            assert np.ptp(out[members]) == 0.0


class TestCompose:
    def test_hand_built_two_by_two(self):
        # two agents, two options each; utilities known exactly (zero width)
        space = JointSpace([unit_grid(2, 1), unit_grid(2, 1)])
        # candidate order: (0,0), (0,1), (1,0), (1,1)
        u0 = np.array([3.0, 1.0, 0.0, 2.0])
        u1 = np.array([1.0, 4.0, 2.0, 0.0])
        lcb_u = np.stack([u0, u1])
        table = compose_table(lcb_u, lcb_u.copy(), space, round_index=0, beta=0.0)
        # v for agent 0 at (0,0): max over own deviations {(0,0),(1,0)} = 3
        np.testing.assert_allclose(table.ucb_v[0], [3.0, 2.0, 3.0, 2.0])
        np.testing.assert_allclose(table.ucb_v[1], [4.0, 4.0, 2.0, 2.0])
        # zero-width inputs give exact loss at both levels
        expected_loss = np.array([0.0 + 3.0, 1.0 + 0.0, 3.0 + 0.0, 0.0 + 2.0])
        np.testing.assert_allclose(table.ucb_f, expected_loss)
        np.testing.assert_allclose(table.lcb_f, expected_loss)
        assert table.region.all()

    def test_interval_orientation(self, saddle_small):
        space = saddle_small.space
        rng = np.random.default_rng(6)
        mean = rng.normal(size=(2, len(space)))
        var = rng.uniform(0.01, 1.0, size=(2, len(space)))
        lcb_u, ucb_u = u_bounds(mean, var, beta=2.0)
        table = compose_table(lcb_u, ucb_u, space, 0, 2.0)
        assert np.all(table.lcb_u <= table.ucb_u)
        assert np.all(table.lcb_v <= table.ucb_v)
        assert np.all(table.lcb_f <= table.ucb_f)
        # the true loss of the bound midpoints has to sit inside [lcb_f, ucb_f]
        # when intervals are valid for some utility function; check the
        # defining inequality directly on the construction instead
        re_lcb = (table.lcb_v - table.ucb_u).sum(axis=0)
        np.testing.assert_allclose(table.lcb_f, re_lcb)

    def test_region_restriction_tightens_upper(self, saddle_small):
        space = saddle_small.space
        rng = np.random.default_rng(7)
        mean = rng.normal(size=(2, len(space)))
        var = rng.uniform(0.01, 1.0, size=(2, len(space)))
        lcb_u, ucb_u = u_bounds(mean, var, beta=2.0)
        full = compose_table(lcb_u, ucb_u, space, 0, 2.0)
        region = np.ones(len(space), dtype=bool)
        region[rng.integers(0, len(space), size=20)] = False
        sub = compose_table(lcb_u, ucb_u, space, 0, 2.0, region=region)
        ok = ~np.isnan(sub.ucb_f)
        assert np.all(sub.ucb_f[ok] <= full.ucb_f[ok] + 1e-12)


class TestEnvelope:
    def test_disabled_passes_through(self):
        state = EnvelopeState(enabled=False)
        lcb = np.array([0.0, 1.0])
        ucb = np.array([2.0, 3.0])
        out_l, out_u = state.intersect(lcb, ucb)
        assert out_l is lcb and out_u is ucb

    def test_running_intersection(self):
        state = EnvelopeState()
        l1, u1 = state.intersect(np.array([0.0]), np.array([4.0]))
        l2, u2 = state.intersect(np.array([1.0]), np.array([5.0]))
        l3, u3 = state.intersect(np.array([-2.0]), np.array([3.0]))
        assert (l1[0], u1[0]) == (0.0, 4.0)
        assert (l2[0], u2[0]) == (1.0, 4.0)  # lower tightened, upper kept
        assert (l3[0], u3[0]) == (1.0, 3.0)  # lower kept, upper tightened

    def test_tables_nest_across_rounds(self, saddle_small):
        space = saddle_small.space
        rng = np.random.default_rng(8)
        state = EnvelopeState()
        prev = None
        for t in range(5):
            mean = rng.normal(scale=0.2, size=(2, len(space)))
            var = rng.uniform(0.05, 1.0, size=(2, len(space)))
            lcb_u, ucb_u = u_bounds(mean, var, beta=2.0)
            raw = compose_table(lcb_u, ucb_u, space, t, 2.0)
            table = monotone_envelope(state, raw, space)
            if prev is not None:
                assert np.all(table.lcb_u >= prev.lcb_u - 1e-12)
                assert np.all(table.ucb_u <= prev.ucb_u + 1e-12)
                assert np.all(table.lcb_v >= prev.lcb_v - 1e-12)
                assert np.all(table.ucb_v <= prev.ucb_v + 1e-12)
                assert np.all(table.lcb_f >= prev.lcb_f - 1e-12)
                assert np.all(table.ucb_f <= prev.ucb_f + 1e-12)
            prev = table


class TestAcquisition:
    def test_width_and_clamp(self, saddle_small):
        space = saddle_small.space
        rng = np.random.default_rng(9)
        mean = rng.normal(size=(2, len(space)))
        var = rng.uniform(0.01, 1.0, size=(2, len(space)))
        lcb_u, ucb_u = u_bounds(mean, var, beta=2.0)
        table = compose_table(lcb_u, ucb_u, space, 0, 2.0)
        width = acquisition(table)
        np.testing.assert_allclose(width, table.ucb_f - table.lcb_f)
        assert np.all(width >= 0.0)
        sub = acquisition(table, candidate_ids=np.array([3, 1, 4]))
        np.testing.assert_allclose(sub, width[[3, 1, 4]])

    def test_nan_entry_raises(self):
        space = _tiny_space()
        lcb_u = np.zeros((2, 9))
        ucb_u = np.ones((2, 9))
        region = np.zeros(9, dtype=bool)
        region[4] = True
        table = compose_table(lcb_u, ucb_u, space, 0, 1.0, region=region)
        with pytest.raises(ValueError, match="NaN"):
            acquisition(table)
        # restricted to the region itself the widths are defined
        assert acquisition(table, candidate_ids=np.array([4])).shape == (1,)


class TestCoverage:
    def test_saddle_surrogates_cover_exact_loss(self, saddle_oracle):
        """Fit both agents' surrogates on noisy draws, compose at the
        theoretical confidence level, and check the exact loss is inside the
        loss interval for nearly every candidate."""
        space = saddle_oracle.space
        rng = np.random.default_rng(10)
        beta = theoretical_beta(2, len(space), 60, 0.05)
        picks = rng.choice(len(space), size=40, replace=False)
        models = [SurrogateModel(space.dim, KernelParams(lengthscales=0.3,
                                                         noise_variance=0.01))
                  for _ in range(2)]
        for cid in picks:
            obs = saddle_oracle.query(int(cid), rng)
            for i, m in enumerate(models):
                m.update(space.X[int(cid)], obs[i])
        stats = [m.posterior_batch(space.X) for m in models]
        lcb_u, ucb_u = u_bounds(np.stack([s[0] for s in stats]),
                                np.stack([s[1] for s in stats]), beta)
        table = compose_table(lcb_u, ucb_u, space, 0, beta)
        exact_f = np.array([saddle_oracle.exact_loss(c)
                            for c in range(len(space))])
        inside = (table.lcb_f <= exact_f + 1e-9) & (exact_f <= table.ucb_f + 1e-9)
        assert inside.mean() >= 0.95
        # true utilities inside the u-level intervals nearly everywhere too
        exact_u = saddle_oracle.utilities_batch(np.arange(len(space))).T
        cover_u = (lcb_u <= exact_u + 1e-9) & (exact_u <= ucb_u + 1e-9)
        assert cover_u.mean() >= 0.95
