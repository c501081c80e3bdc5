import json

import numpy as np
import pytest

from app.errors import ErrorCode, ShapeError
from app.models import SurfaceClass
from app.schemas import SceneSpec
from app.synth import gen_box_scene, gen_cylinder, gen_plane, gen_scene, load_scene_spec


class TestPrimitives:
    def test_plane_grid(self):
        scene = gen_plane(4, 3, 0.01)
        assert len(scene.cloud) == 12
        assert scene.labels.count(SurfaceClass.PLANAR) == 12
        np.testing.assert_allclose(scene.cloud.points[:, 2], 0.0)
        assert scene.viewpoint == pytest.approx((0.015, 0.01, 1.0))

    def test_plane_noise_is_seeded(self):
        a = gen_plane(10, 10, 0.01, noise_sigma=0.001, seed=3).cloud.points
        b = gen_plane(10, 10, 0.01, noise_sigma=0.001, seed=3).cloud.points
        c = gen_plane(10, 10, 0.01, noise_sigma=0.001, seed=4).cloud.points
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
        assert 0.0005 < np.std(a[:, 2]) < 0.0015

    def test_cylinder_on_surface(self):
        scene = gen_cylinder(0.05, 0.1, 0.005)
        radii = np.linalg.norm(scene.cloud.points[:, :2], axis=1)
        np.testing.assert_allclose(radii, 0.05)
        assert scene.labels.count(SurfaceClass.CURVED) == len(scene.cloud)
        assert scene.cloud.points[:, 2].max() < 0.1

    def test_cylinder_resolution_must_be_below_radius(self):
        with pytest.raises(ShapeError) as info:
            gen_cylinder(0.01, 0.1, 0.01)
        assert info.value.code == ErrorCode.BAD_SPEC

    def test_box_faces_and_edge_band(self):
        scene = gen_box_scene(0.02, 0.001, edge_band=2.0)
        n = 21
        assert len(scene.cloud) == n * n + n * (n - 1) + (n - 1) * (n - 1)
        pts = scene.cloud.points
        edge = scene.labels.labels == SurfaceClass.EDGE.value
        # floor points two samples away from both creases are edges, three samples away are not
        floor = np.isclose(pts[:, 2], 0.0)
        near = floor & np.isclose(pts[:, 0], 0.002) & np.isclose(pts[:, 1], 0.01)
        far = floor & np.isclose(pts[:, 0], 0.003) & np.isclose(pts[:, 1], 0.01)
        assert edge[near].all() and not edge[far].any()
        assert len(np.unique(np.round(pts, 9), axis=0)) == len(pts)

    def test_box_rejects_coarse_resolution(self):
        with pytest.raises(ShapeError):
            gen_box_scene(0.02, 0.005)


class TestSceneSpec:
    def test_composed_scene(self):
        spec = SceneSpec.model_validate(
            {
                "primitives": [
                    {"kind": "plane", "extent": 0.1, "resolution": 0.01},
                    {"kind": "cylinder", "radius": 0.02, "height": 0.05, "resolution": 0.005, "origin": [0.5, 0, 0]},
                ],
                "seed": 7,
            }
        )
        scene = gen_scene(spec)
        assert scene.labels.count(SurfaceClass.PLANAR) == 121
        curved = scene.cloud.points[scene.labels.labels == SurfaceClass.CURVED.value]
        np.testing.assert_allclose(np.linalg.norm(curved[:, :2] - [0.5, 0.0], axis=1), 0.02)
        assert scene.viewpoint == pytest.approx((0.05, 0.05, 1.0))

    def test_identical_seed_identical_scene(self):
        spec = SceneSpec.model_validate(
            {"primitives": [{"kind": "plane", "extent": 0.05, "resolution": 0.01}], "noise_sigma": 0.001, "seed": 1}
        )
        np.testing.assert_array_equal(gen_scene(spec).cloud.points, gen_scene(spec).cloud.points)

    def test_malformed_spec_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"primitives": [{"kind": "sphere", "resolution": 0.01}]}))
        with pytest.raises(ShapeError) as info:
            load_scene_spec(path)
        assert info.value.code == ErrorCode.BAD_SPEC
        assert info.value.exit_code == 2
