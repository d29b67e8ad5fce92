import math

import numpy as np
import pytest

from superpack.errors import ComputationError, InputError
from superpack.geometry import SpaceParams, SuperballRegion, TorusRegion
from superpack.gibbs import (
    Configuration,
    ModelParams,
    canonical_partition,
    estimate_alpha_curve,
    exact_moments,
    grand_partition,
    intersection_volume_check,
    intersection_volume_mc,
    merge_estimates,
    run_chain,
)

LINE = SpaceParams.create(2.0, (0, 1))


def ring(L, lam, radius=0.5):
    return ModelParams(LINE, TorusRegion(L), lam, radius=radius)


def rod_interval(half_length, lam, radius=0.5):
    return ModelParams(LINE, SuperballRegion(half_length), lam, radius=radius)


def ring_zhat(L, sigma, t):
    if t == 0:
        return 1.0
    gap = L - t * sigma
    return L * gap ** (t - 1) / math.factorial(t) if gap > 0 else 0.0


class TestCanonicalPartition:
    def test_t0_is_one(self):
        assert canonical_partition(0, ring(20.0, 1.0)).value == 1.0

    def test_t1_is_volume(self):
        assert canonical_partition(1, ring(20.0, 1.0)).value == pytest.approx(20.0)
        assert canonical_partition(1, rod_interval(5.0, 1.0)).value == pytest.approx(10.0)

    def test_hard_rod_t3(self):
        # interval length 10, exclusion 1: (10 - 2)^3 / 3!
        est = canonical_partition(3, rod_interval(5.0, 1.0))
        assert est.method == "closed_form"
        assert est.value == pytest.approx(512.0 / 6.0, rel=1e-14)

    @pytest.mark.parametrize("t", [2, 3, 5])
    def test_ring_closed_form_vs_mc(self, t):
        params = ring(20.0, 1.0)
        cf = canonical_partition(t, params, "closed_form")
        assert cf.value == pytest.approx(ring_zhat(20.0, 1.0, t), rel=1e-14)
        mc = canonical_partition(t, params, "mc", mc_samples=200_000, seed=31 + t)
        assert abs(mc.value - cf.value) <= 4 * mc.se

    def test_interval_closed_form_vs_mc(self):
        params = rod_interval(5.0, 1.0)
        cf = canonical_partition(4, params)
        mc = canonical_partition(4, params, "mc", mc_samples=200_000, seed=17)
        assert abs(mc.value - cf.value) <= 4 * mc.se

    def test_quadrature_1d_against_closed_form(self):
        params = ring(20.0, 1.0)
        q = canonical_partition(3, params, "quadrature")
        assert q.value == pytest.approx(ring_zhat(20.0, 1.0, 3), rel=2e-2)

    def test_quadrature_2d_pair_formula(self):
        # torus pair integral: (V^2 - V * vol(B(2r))) / 2 when 2r < L/2
        space = SpaceParams.create(1.5, (0, 1, 2))
        L = 8 * space.r_unit
        params = ModelParams(space, TorusRegion(L), 1.0)
        V = L**2
        exact = (V * V - V * 2.0**2) / 2.0
        q = canonical_partition(2, params, "quadrature")
        assert q.value == pytest.approx(exact, rel=2e-2)
        mc = canonical_partition(2, params, "mc", mc_samples=200_000, seed=3)
        assert abs(mc.value - exact) <= 4 * mc.se

    def test_quadrature_rejects_large_t(self):
        with pytest.raises(InputError):
            canonical_partition(5, ring(20.0, 1.0), "quadrature")

    def test_capacity_zero(self):
        # interval shorter than the exclusion cannot hold two rods
        assert canonical_partition(2, rod_interval(0.4, 1.0)).value == 0.0

    def test_rejects_bad_t(self):
        with pytest.raises(InputError):
            canonical_partition(-1, ring(20.0, 1.0))
        with pytest.raises(InputError):
            canonical_partition(2, ring(20.0, 1.0), "nonsense")


class TestGrandPartition:
    def test_small_fugacity_limit(self):
        gp = grand_partition(ring(20.0, 1e-12))
        assert gp.value == pytest.approx(1.0, abs=3e-11)

    def test_two_point_capacity_exact(self):
        params = rod_interval(0.4, 2.0)  # diameter 0.8 < exclusion
        gp = grand_partition(params)
        assert gp.capacity_truncated
        assert gp.value == pytest.approx(1.0 + 2.0 * 0.8, rel=1e-14)

    def test_matches_direct_summation(self):
        lam = 1.0
        gp = grand_partition(ring(20.0, lam))
        direct = sum(lam**t * ring_zhat(20.0, 1.0, t) for t in range(40))
        assert gp.value == pytest.approx(direct, rel=1e-13)

    def test_log_bound(self):
        for lam in (0.25, 1.0, 4.0):
            gp = grand_partition(ring(20.0, lam))
            assert gp.log_value <= lam * 20.0

    def test_tail_enforcement(self):
        with pytest.raises(ComputationError):
            grand_partition(ring(20.0, 1.0), t_max=3)

    def test_short_t_max_fine_when_capacity_reached(self):
        gp = grand_partition(rod_interval(0.4, 50.0), t_max=2)
        assert gp.value == pytest.approx(1.0 + 50.0 * 0.8, rel=1e-14)

    def test_needs_deterministic_route(self):
        space = SpaceParams.create(2.0, (0, 3))
        params = ModelParams(space, TorusRegion(8.0), 1.0)
        with pytest.raises(ComputationError):
            grand_partition(params)

    def test_moments_match_test_side_sum(self):
        lam = 1.0
        m = exact_moments(ring(20.0, lam))
        ws = [lam**t * ring_zhat(20.0, 1.0, t) for t in range(40)]
        Z = sum(ws)
        mean = sum(t * w for t, w in enumerate(ws)) / Z
        var = sum(t * t * w for t, w in enumerate(ws)) / Z - mean**2
        assert m["mean_count"] == pytest.approx(mean, rel=1e-12)
        assert m["var_count"] == pytest.approx(var, rel=1e-10)
        assert m["alpha"] == pytest.approx(mean / 20.0, rel=1e-12)
        assert m["log_z"] == pytest.approx(math.log(Z), rel=1e-13)


class TestModelParams:
    def test_default_radius_is_r_unit(self):
        space = SpaceParams.create(1.5, (0, 2))
        params = ModelParams(space, TorusRegion(5.0), 1.0)
        assert params.radius == space.r_unit
        assert params.exclusion == 2 * space.r_unit

    def test_rejects_bad_fugacity(self):
        with pytest.raises(InputError):
            ModelParams(LINE, TorusRegion(5.0), 0.0)
        with pytest.raises(InputError):
            ModelParams(LINE, TorusRegion(5.0), math.inf)

    def test_rejects_bad_radius(self):
        with pytest.raises(InputError):
            ModelParams(LINE, TorusRegion(5.0), 1.0, radius=-0.5)

    def test_warns_on_wrapping_exclusion(self):
        with pytest.warns(UserWarning):
            ModelParams(LINE, TorusRegion(3.0), 1.0, radius=1.0)

    def test_json(self):
        d = ModelParams(LINE, TorusRegion(5.0), 1.5, radius=0.5).to_json()
        assert d["fugacity"] == 1.5 and d["region"]["kind"] == "torus"


class TestConfiguration:
    def test_validate_good(self):
        params = ring(20.0, 1.0)
        c = Configuration(np.array([[0.5], [2.0], [19.0]]), params)
        assert c.validate() == pytest.approx(1.5)

    def test_validate_wrap_violation(self):
        params = ring(20.0, 1.0)
        # 0.2 and 19.9 are 0.3 apart through the seam
        c = Configuration(np.array([[0.2], [19.9]]), params)
        with pytest.raises(ComputationError):
            c.validate()

    def test_validate_outside_region(self):
        params = rod_interval(5.0, 1.0)
        c = Configuration(np.array([[5.5]]), params)
        with pytest.raises(ComputationError):
            c.validate()


class TestRunChain:
    def test_near_zero_fugacity(self):
        est = run_chain(ring(10.0, 1e-8), steps=20_000, burn_in=1_000, seed=0)
        assert est.alpha_hat <= 1e-5
        assert est.fv_hat >= 0.999

    def test_matches_exact_density(self):
        params = ring(20.0, 1.0)
        exact = exact_moments(params)
        est = run_chain(params, steps=150_000, burn_in=15_000, seed=42)
        assert abs(est.alpha_hat - exact["alpha"]) <= 4 * est.alpha_se
        assert abs(est.var_count - exact["var_count"]) <= 4 * est.var_count_se

    def test_free_volume_identity(self):
        params = ring(20.0, 1.0)
        est = run_chain(params, steps=150_000, burn_in=15_000, seed=7)
        combined = math.hypot(est.alpha_se, params.fugacity * est.fv_se)
        assert abs(est.alpha_hat - params.fugacity * est.fv_hat) <= 4 * combined

    def test_reproducible(self):
        params = ring(20.0, 1.0)
        a = run_chain(params, steps=5_000, burn_in=500, seed=123)
        b = run_chain(params, steps=5_000, burn_in=500, seed=123)
        c = run_chain(params, steps=5_000, burn_in=500, seed=124)
        assert a.to_json() == b.to_json()
        assert a.to_json() != c.to_json()

    def test_counters_consistent(self):
        est = run_chain(ring(20.0, 1.0), steps=5_000, burn_in=0, seed=5)
        assert est.accepted_births + est.accepted_deaths + est.rejections == est.steps
        assert est.rejections >= 0

    def test_validate_every_accepted_move(self):
        est = run_chain(ring(20.0, 1.0), steps=3_000, burn_in=0, seed=8, validate_every=1)
        est.final_configuration.validate()

    def test_cell_list_matches_direct(self):
        params = ring(600.0, 1.0)
        a = run_chain(params, steps=30_000, burn_in=3_000, seed=9, cell_list_min=128)
        b = run_chain(params, steps=30_000, burn_in=3_000, seed=9, cell_list_min=10**9)
        assert a.to_json() == b.to_json()
        assert a.mean_count > 128  # the threshold was actually crossed

    def test_cell_list_matches_direct_2d(self):
        space = SpaceParams.create(1.5, (0, 1, 2))
        params = ModelParams(space, TorusRegion(16 * space.r_unit), 1.0)
        a = run_chain(params, steps=20_000, burn_in=2_000, seed=11, cell_list_min=8)
        b = run_chain(params, steps=20_000, burn_in=2_000, seed=11, cell_list_min=10**9)
        assert a.to_json() == b.to_json()

    def test_ball_region_chain(self):
        params = rod_interval(10.0, 1.0)
        exact = exact_moments(params)
        est = run_chain(params, steps=120_000, burn_in=12_000, seed=13)
        assert abs(est.alpha_hat - exact["alpha"]) <= 4 * est.alpha_se

    def test_trace_arrays(self):
        est = run_chain(ring(20.0, 1.0), steps=64, burn_in=16, seed=1,
                        fv_stride=4, collect_trace=True)
        tr = est.trace
        assert set(tr) == {"count", "fv_probe_hits", "accepted", "birth"}
        assert len(tr["count"]) == 64
        probed = tr["fv_probe_hits"][16::4]
        assert (probed >= 0).all()

    def test_rejects_bad_schedule(self):
        with pytest.raises(InputError):
            run_chain(ring(20.0, 1.0), steps=100, burn_in=100, seed=0)

    def test_detailed_balance_two_cell_toy(self):
        # interval of length 1.8 with unit exclusion holds at most two
        # rods; compare empirical count occupancy to the exact weights
        lam = 1.0
        params = rod_interval(0.9, lam)
        zs = [1.0, 1.8, (1.8 - 1.0) ** 2 / 2.0]
        Z = sum(lam**t * z for t, z in enumerate(zs))
        target = np.array([lam**t * z / Z for t, z in enumerate(zs)])

        est = run_chain(params, steps=200_000, burn_in=20_000, seed=21, collect_trace=True)
        counts = est.trace["count"][20_000:]
        assert counts.max() == 2
        for t in range(3):
            ind = (counts == t).astype(np.float64)
            freq = ind.mean()
            bm = ind[: 32 * (len(ind) // 32)].reshape(32, -1).mean(axis=1)
            se = bm.std(ddof=1) / math.sqrt(32)
            assert abs(freq - target[t]) <= 4 * se


class TestAlphaCurve:
    def test_monotone_in_fugacity(self):
        params = ring(20.0, 1.0)
        curve = estimate_alpha_curve(params, [0.25, 1.0, 4.0], steps=80_000,
                                     burn_in=8_000, seed=3)
        for (_, a), (_, b) in zip(curve, curve[1:]):
            assert b.alpha_hat >= a.alpha_hat - 3 * (a.alpha_se + b.alpha_se)

    def test_variance_matches_fugacity_derivative(self):
        # lam * V * d alpha / d lam equals Var|X|; central difference
        lam, V = 1.0, 20.0
        params = ring(V, lam)
        curve = estimate_alpha_curve(params, [0.9 * lam, lam, 1.1 * lam],
                                     steps=400_000, burn_in=40_000, seed=29)
        (_, lo), (_, mid), (_, hi) = curve
        slope = (hi.alpha_hat - lo.alpha_hat) / (0.2 * lam)
        slope_se = math.hypot(hi.alpha_se, lo.alpha_se) / (0.2 * lam)
        lhs = lam * V * slope
        se = math.hypot(lam * V * slope_se, mid.var_count_se)
        assert abs(lhs - mid.var_count) <= 3 * se

    def test_requires_increasing_grid(self):
        with pytest.raises(InputError):
            estimate_alpha_curve(ring(20.0, 1.0), [1.0, 0.5], steps=100, burn_in=10, seed=0)

    def test_merge(self):
        params = ring(20.0, 1.0)
        ests = [run_chain(params, steps=20_000, burn_in=2_000, seed=s) for s in (1, 2, 3, 4)]
        merged = merge_estimates(ests)
        exact = exact_moments(params)["alpha"]
        assert abs(merged.alpha_hat - exact) <= 4 * merged.alpha_se
        assert merged.steps == 80_000

    def test_merge_rejects_mixed_lengths(self):
        params = ring(20.0, 1.0)
        a = run_chain(params, steps=2_000, burn_in=200, seed=1)
        b = run_chain(params, steps=3_000, burn_in=200, seed=2)
        with pytest.raises(InputError):
            merge_estimates([a, b])


class TestIntersectionVolume:
    def test_u_zero(self):
        space = SpaceParams.create(1.5, (0, 1, 2))
        assert intersection_volume_mc(space, np.zeros(2), 1000, 0) == (0.0, 0.0)

    def test_euclidean_lens_formula(self):
        # independent oracle: closed-form volume of two intersecting
        # Euclidean balls with radii 2r and |u| at center distance |u|
        space = SpaceParams.create(2.0, (0, 3))
        r = space.r_unit

        def lens(R1, R2, d):
            return (math.pi * (R1 + R2 - d) ** 2
                    * (d**2 + 2 * d * (R1 + R2) - 3 * (R1 - R2) ** 2)) / (12 * d)

        u = np.array([1.3 * r, 0.0, 0.0])
        vol, se = intersection_volume_mc(space, u, 400_000, 17)
        assert abs(vol - lens(2 * r, 1.3 * r, 1.3 * r)) <= 4 * se

    def test_containment_in_outer_ball(self):
        # intersection always fits inside B(0, |u|), so vol <= (|u|/r)^n
        space = SpaceParams.create(1.5, (0, 1, 2))
        u = np.array([0.7, 0.4])
        vol, se = intersection_volume_mc(space, u, 50_000, 23)
        from superpack.geometry import norm

        assert vol <= (norm(u, space) / space.r_unit) ** 2 + 4 * se

    def test_check_report_2d(self):
        space = SpaceParams.create(1.5, (0, 1, 2))
        rep = intersection_volume_check(space, trials=60, seed=11, samples_per_trial=20_000)
        assert rep.all_ok and rep.containment_ok
        assert any(r["containment_checked"] for r in rep.records)

    def test_check_report_4d(self):
        space = SpaceParams.create(1.5, (0, 1, 2, 3, 4))
        rep = intersection_volume_check(space, trials=40, seed=13, samples_per_trial=50_000)
        assert rep.all_ok and rep.containment_ok

    def test_dimension_cap(self):
        space = SpaceParams.create(1.5, tuple(range(10)))
        with pytest.raises(InputError):
            intersection_volume_check(space, trials=1, seed=0)
