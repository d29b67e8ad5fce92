import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from superpack.errors import InputError
from superpack.geometry import (
    BlockSpec,
    SpaceParams,
    SuperballRegion,
    TorusRegion,
    contains,
    distance,
    norm,
    norm_batch,
    r_unit,
    region_from_json,
    unit_ball_volume,
)

from conftest import block_specs, bounded_floats, points, spaces


class TestBlockSpec:
    def test_basic_fields(self):
        b = BlockSpec((0, 2, 3))
        assert b.n == 3
        assert b.m == 2
        assert b.block_dims == (2, 1)

    @pytest.mark.parametrize("cuts", [(1, 3), (0,), (0, 2, 2, 4), (0, 3, 1), (0, -1, 2)])
    def test_rejects_bad_cuts(self, cuts):
        with pytest.raises(InputError):
            BlockSpec(cuts)

    def test_json_round_trip(self):
        b = BlockSpec((0, 1, 4, 6))
        assert BlockSpec.from_json(b.to_json()) == b


class TestNorm:
    def test_single_block_is_euclidean(self):
        space = SpaceParams.create(1.5, (0, 2))
        assert norm(np.array([3.0, 4.0]), space) == pytest.approx(5.0, abs=1e-12)

    def test_unit_blocks_give_ell_1(self):
        space = SpaceParams.create(1.0, (0, 1, 2))
        assert norm(np.array([3.0, 4.0]), space) == pytest.approx(7.0, abs=1e-12)

    def test_mixed_two_blocks(self):
        space = SpaceParams.create(2.0, (0, 2, 4))
        assert norm(np.ones(4), space) == pytest.approx(2.0, abs=1e-12)

    def test_two_blocks_p_three_halves(self):
        # block norms are 1 and 1, so the result is 2^(2/3)
        space = SpaceParams.create(1.5, (0, 1, 2))
        assert norm(np.array([1.0, 1.0]), space) == pytest.approx(2 ** (2 / 3), rel=1e-14)

    def test_batch_shape(self):
        space = SpaceParams.create(1.5, (0, 1, 3))
        X = np.arange(24.0).reshape(2, 4, 3)
        out = norm_batch(X, space)
        assert out.shape == (2, 4)

    def test_dimension_mismatch(self):
        space = SpaceParams.create(1.5, (0, 2))
        with pytest.raises(InputError):
            norm(np.ones(3), space)

    @given(spaces(max_n=8), st.data())
    def test_triangle_inequality(self, space, data):
        x = data.draw(points(space.n))
        y = data.draw(points(space.n))
        nx, ny, nxy = norm(x, space), norm(y, space), norm(x + y, space)
        assert nxy <= nx + ny + 1e-9 * (nx + ny + 1)

    @given(spaces(max_n=8), st.data())
    def test_homogeneity(self, space, data):
        c = data.draw(bounded_floats(1e3))
        x = data.draw(points(space.n))
        assert norm(c * x, space) == pytest.approx(abs(c) * norm(x, space), rel=1e-12, abs=0.0)

    @given(spaces(max_n=8), st.data())
    def test_coordinatewise_monotone(self, space, data):
        y = data.draw(points(space.n))
        u = data.draw(
            st.lists(st.floats(0, 1, allow_nan=False), min_size=space.n, max_size=space.n)
        )
        x = y * np.asarray(u)
        assert norm(x, space) <= norm(y, space) * (1 + 1e-12) + 1e-300

    @given(block_specs(max_n=8), st.data())
    def test_p2_ignores_blocks(self, blocks, data):
        space = SpaceParams.create(2.0, blocks.cuts)
        x = data.draw(points(space.n))
        assert norm(x, space) == pytest.approx(float(np.linalg.norm(x)), rel=1e-12, abs=0.0)

    @given(st.floats(1.0, 2.0), st.data())
    def test_unit_cuts_match_classical(self, p, data):
        n = data.draw(st.integers(1, 8))
        space = SpaceParams.create(p, tuple(range(n + 1)))
        x = data.draw(points(n, magnitude=1e3))
        ref = float(np.sum(np.abs(x) ** p) ** (1 / p))
        assert norm(x, space) == pytest.approx(ref, rel=1e-12, abs=1e-300)

    @given(block_specs(max_n=8), st.data())
    def test_whole_block_matches_euclidean(self, blocks, data):
        space = SpaceParams.create(1.37, (0, blocks.n))
        x = data.draw(points(blocks.n))
        assert norm(x, space) == pytest.approx(float(np.linalg.norm(x)), rel=1e-12, abs=0.0)


class TestDistance:
    def test_plain(self):
        space = SpaceParams.create(2.0, (0, 2))
        assert distance(np.zeros(2), np.array([3.0, 4.0]), space) == pytest.approx(5.0)

    def test_torus_wrap(self):
        space = SpaceParams.create(2.0, (0, 1))
        region = TorusRegion(10.0)
        assert distance(np.array([9.5]), np.array([0.5]), space, region) == pytest.approx(1.0)

    def test_torus_wrap_mixed(self):
        space = SpaceParams.create(1.5, (0, 1, 2))
        region = TorusRegion(4.0)
        d = distance(np.array([3.5, 0.0]), np.array([0.5, 1.0]), space, region)
        assert d == pytest.approx(2 ** (2 / 3), rel=1e-14)

    @given(st.data())
    def test_torus_symmetry_and_triangle(self, data):
        space = SpaceParams.create(1.5, (0, 1, 2, 3))
        region = TorusRegion(7.0)
        x = np.asarray(data.draw(st.lists(st.floats(0, 7, exclude_max=True), min_size=3, max_size=3)))
        y = np.asarray(data.draw(st.lists(st.floats(0, 7, exclude_max=True), min_size=3, max_size=3)))
        z = np.asarray(data.draw(st.lists(st.floats(0, 7, exclude_max=True), min_size=3, max_size=3)))
        assert distance(x, y, space, region) == distance(y, x, space, region)
        assert distance(x, z, space, region) <= (
            distance(x, y, space, region) + distance(y, z, space, region) + 1e-9
        )


class TestVolume:
    def test_disk(self):
        assert unit_ball_volume(2.0, BlockSpec((0, 2))) == pytest.approx(math.pi, rel=1e-14)

    def test_cross_polytope(self):
        assert unit_ball_volume(1.0, BlockSpec((0, 1, 2))) == pytest.approx(2.0, rel=1e-14)

    def test_r_unit_disk(self):
        assert r_unit(2.0, BlockSpec((0, 2))) == pytest.approx(math.pi ** -0.5, rel=1e-14)

    def test_interval(self):
        # n = 1: ball of radius 1 is [-1, 1], volume 2
        assert unit_ball_volume(1.7, BlockSpec((0, 1))) == pytest.approx(2.0, rel=1e-14)

    @pytest.mark.parametrize(
        "p,cuts",
        [(1.5, (0, 2, 3)), (1.25, (0, 1, 2)), (2.0, (0, 3)), (1.05, (0, 1, 3, 4))],
    )
    def test_against_rejection_mc(self, p, cuts, rng):
        space = SpaceParams.create(p, cuts)
        n = space.n
        samples = 400_000
        pts = rng.uniform(-1, 1, size=(samples, n))
        frac = float((norm_batch(pts, space) <= 1.0).mean())
        est = frac * 2**n
        se = 2**n * math.sqrt(frac * (1 - frac) / samples)
        assert abs(unit_ball_volume(p, space.blocks) - est) <= 3 * se

    @pytest.mark.parametrize("R", [0.5, 1.0, 3.7])
    def test_region_volume_scaling(self, R):
        space = SpaceParams.create(1.5, (0, 2, 3))
        ball = SuperballRegion(R)
        assert ball.volume(space) == pytest.approx((R / space.r_unit) ** 3, rel=1e-12)

    def test_volume_requires_valid_p(self):
        with pytest.raises(InputError):
            unit_ball_volume(0.8, BlockSpec((0, 2)))


class TestSpaceParams:
    def test_conjugate_exponent(self):
        assert SpaceParams.create(1.5, (0, 1)).q == pytest.approx(3.0, rel=1e-14)
        assert SpaceParams.create(1.0, (0, 1)).q == math.inf

    def test_rejects_p_below_one(self):
        with pytest.raises(InputError):
            SpaceParams.create(0.99, (0, 2))

    def test_warns_above_two(self):
        with pytest.warns(UserWarning):
            SpaceParams.create(2.5, (0, 2))

    def test_unit_volume_radius_invariant(self):
        space = SpaceParams.create(1.3, (0, 2, 5))
        assert unit_ball_volume(space.p, space.blocks) * space.r_unit**space.n == pytest.approx(1.0, rel=1e-12)

    def test_json_round_trip(self):
        space = SpaceParams.create(1.5, (0, 2, 3))
        back = SpaceParams.from_json(json.loads(json.dumps(space.to_json())))
        assert back == space


class TestRegions:
    def test_ball_contains_boundary(self):
        space = SpaceParams.create(1.5, (0, 1, 2))
        assert contains(np.zeros(2), 1.0, np.array([1.0, 0.0]), space)
        assert not contains(np.zeros(2), 1.0, np.array([0.9, 0.9]), space)

    def test_ball_sampling_stays_inside(self, rng):
        space = SpaceParams.create(1.5, (0, 1, 2))
        region = SuperballRegion(2.5)
        pts = region.sample(space, rng, 500)
        assert pts.shape == (500, 2)
        assert region.contains_points(pts, space).all()

    def test_torus_sampling_in_box(self, rng):
        space = SpaceParams.create(2.0, (0, 3))
        region = TorusRegion(4.0)
        pts = region.sample(space, rng, 500)
        assert ((pts >= 0) & (pts < 4.0)).all()
        assert region.contains_points(pts, space).all()

    def test_sampling_deterministic(self):
        space = SpaceParams.create(1.5, (0, 2))
        region = SuperballRegion(1.0)
        a = region.sample(space, np.random.default_rng(7), 64)
        b = region.sample(space, np.random.default_rng(7), 64)
        assert (a == b).all()

    def test_region_json_round_trip(self):
        space = SpaceParams.create(2.0, (0, 2))
        for region in (SuperballRegion(2.0), TorusRegion(5.0)):
            back = region_from_json(region.to_json())
            assert type(back) is type(region)
            assert back.volume(space) == region.volume(space)

    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_rejects_nonpositive_size(self, bad):
        with pytest.raises(InputError):
            SuperballRegion(bad)
        with pytest.raises(InputError):
            TorusRegion(bad)
