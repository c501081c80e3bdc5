import numpy as np
import pytest

from app.errors import ErrorCode, ShapeError
from app.models import PointCloud
from app.spatial_index import brute_force_radius, build_index, k_nearest, knn_pairs, radius_neighbors, radius_pairs


class TestRadiusNeighbors:
    def test_matches_brute_force(self, random_cloud, rng):
        index = build_index(random_cloud)
        for point_id in rng.integers(0, len(random_cloud), size=1000):
            r = float(rng.uniform(0.01, 0.3))
            expected = brute_force_radius(random_cloud, int(point_id), r)
            np.testing.assert_array_equal(radius_neighbors(index, int(point_id), r), expected)

    def test_boundary_distance_is_included(self):
        cloud = PointCloud(points=[[0, 0, 0], [0.5, 0, 0], [1.0, 0, 0]])
        index = build_index(cloud)
        assert radius_neighbors(index, 0, 0.5).tolist() == [1]

    def test_excludes_self_and_sorted(self, plane_scene):
        ids = radius_neighbors(build_index(plane_scene.cloud), 220, 0.011)
        assert 220 not in ids
        assert np.all(np.diff(ids) > 0)

    @pytest.mark.parametrize("bad", [-1, 500, 2.5, True])
    def test_invalid_id(self, random_cloud, bad):
        with pytest.raises(ShapeError) as info:
            radius_neighbors(build_index(random_cloud), bad, 0.1)
        assert info.value.code == ErrorCode.INVALID_ID

    def test_non_positive_radius(self, random_cloud):
        with pytest.raises(ShapeError) as info:
            radius_neighbors(build_index(random_cloud), 0, 0.0)
        assert info.value.code == ErrorCode.NON_POSITIVE_RADIUS

    def test_empty_cloud_has_no_index(self):
        with pytest.raises(ShapeError) as info:
            build_index(PointCloud(points=np.empty((0, 3))))
        assert info.value.code == ErrorCode.EMPTY_CLOUD


class TestNearest:
    def test_k_nearest_sorted_by_distance(self, random_cloud):
        index = build_index(random_cloud)
        ids = k_nearest(index, 7, 10)
        assert len(ids) == 10 and 7 not in ids
        d = np.linalg.norm(random_cloud.points[ids] - random_cloud.points[7], axis=1)
        assert np.all(np.diff(d) >= 0)

    def test_knn_pairs_shape(self, random_cloud):
        owner, neighbor = knn_pairs(build_index(random_cloud), np.arange(50), 5)
        assert len(owner) == len(neighbor) == 250
        assert not np.any(owner == neighbor)


class TestRadiusPairs:
    def test_groups_follow_ids(self, plane_scene):
        index = build_index(plane_scene.cloud)
        ids = np.array([3, 100, 220])
        owner, neighbor = radius_pairs(index, ids, 0.0051)
        for point_id in ids:
            np.testing.assert_array_equal(neighbor[owner == point_id], radius_neighbors(index, int(point_id), 0.0051))

    def test_include_self(self, plane_scene):
        index = build_index(plane_scene.cloud)
        owner, neighbor = radius_pairs(index, np.array([220]), 0.0051, include_self=True)
        assert 220 in neighbor and len(neighbor) == 5
