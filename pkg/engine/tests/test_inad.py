import numpy as np
import pytest

from app.errors import ErrorCode, ShapeError
from app.inad import compute_inad_field, fold_degrees, inad_from_pairs, inad_pair, inter_normal_angles, reject_outliers
from app.models import NormalField, PointCloud
from app.spatial_index import build_index, radius_neighbors


def _code(fn, *args, **kwargs) -> ErrorCode:
    with pytest.raises(ShapeError) as info:
        fn(*args, **kwargs)
    return info.value.code


class TestAngles:
    def test_folding(self):
        np.testing.assert_allclose(fold_degrees(np.array([1.0, 0.0, -1.0, -0.5])), [0.0, 90.0, 0.0, 60.0], atol=1e-12)

    def test_opposite_normals_give_zero(self):
        normals = NormalField(normals=[[0, 0, 1], [0, 0, -1], [1, 0, 0]], valid=[True, True, True], radius=0.1, viewpoint=(0, 0, 0))
        np.testing.assert_allclose(inter_normal_angles(normals, 0, [1, 2]), [0.0, 90.0], atol=1e-12)

    def test_invalid_neighbors_are_skipped(self):
        normals = NormalField(normals=[[0, 0, 1], [0, 0, 0], [1, 0, 0]], valid=[True, False, True], radius=0.1, viewpoint=(0, 0, 0))
        assert inter_normal_angles(normals, 0, [1, 2]).tolist() == [90.0]

    def test_invalid_center(self):
        normals = NormalField(normals=[[0, 0, 0], [0, 0, 1]], valid=[False, True], radius=0.1, viewpoint=(0, 0, 0))
        assert _code(inter_normal_angles, normals, 0, [1]) == ErrorCode.INVALID_CENTER_NORMAL
        assert _code(inter_normal_angles, normals, 5, [1]) == ErrorCode.INVALID_ID


class TestOutlierRejection:
    def test_drops_far_values(self):
        kept = reject_outliers([10, 10, 10, 10, 80], c=1.0)
        assert kept.tolist() == [10, 10, 10, 10]

    def test_constant_input_kept(self):
        assert reject_outliers([5.0, 5.0, 5.0]).tolist() == [5.0, 5.0, 5.0]

    def test_closest_value_always_survives(self):
        kept = reject_outliers([0.0, 90.0], c=0.5)
        assert kept.tolist() == [0.0, 90.0]

    def test_empty(self):
        assert _code(reject_outliers, []) == ErrorCode.EMPTY_INPUT
        assert _code(inad_pair, []) == ErrorCode.EMPTY_INPUT

    def test_inad_pair_uses_population_sigma(self):
        pair = inad_pair([0.0, 10.0])
        assert pair.mu == 5.0 and pair.sigma == 5.0 and pair.inlier_count == 2

    def test_single_far_value_is_dropped(self):
        # mean 18, sigma 36: the 90 sits two sigmas out
        assert reject_outliers([0, 0, 0, 0, 90], c=1.0).tolist() == [0, 0, 0, 0]

    @pytest.mark.parametrize(
        "alphas, mu, sigma",
        [([10.0, 20.0, 30.0], 20.0, 8.1650), ([0.0, 90.0], 45.0, 45.0)],
    )
    def test_inad_pair_values(self, alphas, mu, sigma):
        pair = inad_pair(alphas)
        assert pair.mu == pytest.approx(mu, abs=1e-9)
        assert pair.sigma == pytest.approx(sigma, abs=1e-4)
        assert pair.inlier_count == len(alphas)


class TestVectorizedKernel:
    def test_matches_scalar_path(self, rng):
        groups = [rng.uniform(0, 90, size=rng.integers(1, 30)) for _ in range(40)]
        owner = np.concatenate([np.full(len(g), i) for i, g in enumerate(groups)])
        mu, sigma, inliers = inad_from_pairs(owner, np.concatenate(groups), len(groups), c=1.0)
        for i, g in enumerate(groups):
            pair = inad_pair(reject_outliers(g, c=1.0))
            assert inliers[i] == pair.inlier_count
            assert mu[i] == pytest.approx(pair.mu, abs=1e-9)
            assert sigma[i] == pytest.approx(pair.sigma, abs=1e-9)

    def test_owner_without_angles(self):
        mu, sigma, inliers = inad_from_pairs(np.array([0, 0]), np.array([1.0, 3.0]), 2, c=1.0)
        assert np.isnan(mu[1]) and inliers[1] == 0


class TestInadField:
    def test_plane_is_all_zero(self, plane_scene):
        cloud = plane_scene.cloud
        field = compute_inad_field(cloud, NormalField.from_cloud(cloud), build_index(cloud), 0.011)
        assert field.valid.all()
        np.testing.assert_allclose(field.mu, 0.0, atol=1e-6)
        np.testing.assert_allclose(field.sigma, 0.0, atol=1e-6)

    def test_matches_per_point_definition(self, cylinder_scene):
        cloud = cylinder_scene.cloud
        normals = NormalField.from_cloud(cloud)
        index = build_index(cloud)
        field = compute_inad_field(cloud, normals, index, 0.012, c=1.0, chunk_size=100)
        for point_id in range(0, len(cloud), 37):
            alphas = inter_normal_angles(normals, point_id, radius_neighbors(index, point_id, 0.012))
            pair = inad_pair(reject_outliers(alphas, c=1.0))
            assert field.mu[point_id] == pytest.approx(pair.mu, abs=1e-9)
            assert field.sigma[point_id] == pytest.approx(pair.sigma, abs=1e-9)
            assert field.inliers[point_id] == pair.inlier_count

    def test_mean_mu_grows_with_radius(self, cylinder_scene):
        cloud = cylinder_scene.cloud
        normals = NormalField.from_cloud(cloud)
        index = build_index(cloud)
        means = []
        for r in (0.006, 0.011, 0.016, 0.021, 0.026):
            field = compute_inad_field(cloud, normals, index, r)
            means.append(field.mu[field.valid].mean())
        assert np.all(np.diff(means) >= -1e-9)
        assert means[-1] > means[0]

    def test_isolated_point_is_invalid(self, plane_scene):
        points = np.vstack([plane_scene.cloud.points, [[5.0, 5.0, 5.0]]])
        cloud = PointCloud(points=points, normals=np.tile([0, 0, 1.0], (len(points), 1)))
        field = compute_inad_field(cloud, NormalField.from_cloud(cloud), build_index(cloud), 0.011)
        assert not field.valid[-1]
        assert field.pair(len(cloud) - 1) is None

    def test_length_mismatch(self, plane_scene, cylinder_scene):
        cloud = plane_scene.cloud
        normals = NormalField.from_cloud(cylinder_scene.cloud)
        assert _code(compute_inad_field, cloud, normals, build_index(cloud), 0.011) == ErrorCode.LENGTH_MISMATCH

    def test_bad_outlier_rate(self, plane_scene):
        cloud = plane_scene.cloud
        assert _code(compute_inad_field, cloud, NormalField.from_cloud(cloud), build_index(cloud), 0.011, c=0.0) == ErrorCode.INVARIANT_VIOLATION
