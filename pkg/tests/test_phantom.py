import numpy as np
import pytest

from angiokit import phantom
from angiokit.core import GrayImage


class TestRender:
    def test_straight_tube_thickness(self):
        spec = phantom.straight_tube("t", 9.0)
        img, truth = phantom.render_phantom(spec, 0)
        mask = truth.mask
        cols = range(80, 320)
        thickness = [int(mask[:, x].sum()) for x in cols]
        assert all(abs(t - 9) <= 1 for t in thickness)
        assert np.mean(thickness) == pytest.approx(9, abs=0.5)

    def test_stenosis_truth_degree(self):
        spec = phantom.stenosed_tube("s", 0.6)
        _, truth = phantom.render_phantom(spec, 0)
        assert len(truth.stenoses) == 1
        st = truth.stenoses[0]
        assert st.residual == 0.6
        sm = truth.samples[0]
        in_interval = (sm["s"] >= st.s0) & (sm["s"] <= st.s1)
        assert sm["w"][in_interval].min() == pytest.approx(0.6 * 9.0, abs=1e-9)

    def test_y_has_one_bifurcation(self):
        spec = phantom.y_phantom("y", 60.0)
        _, truth = phantom.render_phantom(spec, 0)
        assert len(truth.bifurcations) == 1
        b = truth.bifurcations[0]
        assert (b.x, b.y) == (190.0, 200.0)

    def test_determinism(self):
        spec = phantom.straight_tube("d", 6.0, noise_sigma=8.0)
        img1, _ = phantom.render_phantom(spec, 42)
        img2, _ = phantom.render_phantom(spec, 42)
        assert np.array_equal(img1.data, img2.data)
        img3, _ = phantom.render_phantom(spec, 43)
        assert not np.array_equal(img1.data, img3.data)

    def test_escaping_path_rejected(self):
        spec = phantom.PhantomSpec(
            name="bad", canvas=(100, 100),
            paths=(phantom.VesselPath(phantom.LinePath(2, 50, 98, 50),
                                      phantom.WidthProfile(8.0)),))
        with pytest.raises(ValueError, match="escape"):
            phantom.render_phantom(spec, 0)

    def test_gaussian_profile_renders(self):
        spec = phantom.straight_tube("g", 8.0, profile="gaussian")
        img, _ = phantom.render_phantom(spec, 0)
        assert isinstance(img, GrayImage)
        assert img.data.max() > 150


class TestTruthConsistency:
    def test_samples_inside_mask(self):
        spec = phantom.arc_tube("a", 80.0)
        _, truth = phantom.render_phantom(spec, 0)
        sm = truth.samples[0]
        mask = truth.mask
        xi = np.clip(np.rint(sm["x"]).astype(int), 0, mask.shape[1] - 1)
        yi = np.clip(np.rint(sm["y"]).astype(int), 0, mask.shape[0] - 1)
        assert mask[yi, xi].mean() > 0.99

    def test_boundary_at_half_width(self):
        spec = phantom.straight_tube("b", 8.0)
        _, truth = phantom.render_phantom(spec, 0)
        mask = truth.mask
        # Walk the normal (vertical) from centerline samples; the boundary
        # crossing must sit at width/2 within the supersampling quantum.
        for x in (100, 200, 300):
            col = mask[:, x]
            ys = np.nonzero(col)[0]
            top, bottom = ys.min(), ys.max()
            assert abs((bottom - top + 1) / 2.0 - 4.0) <= 0.75

    def test_contains_matches_mask(self):
        spec = phantom.y_phantom("y", 90.0)
        _, truth = phantom.render_phantom(spec, 0)
        rng = np.random.default_rng(0)
        xs = rng.uniform(0, 399, 500)
        ys = rng.uniform(0, 399, 500)
        inside = truth.contains(xs, ys)
        mask = truth.mask
        agree = 0
        for x, y, i in zip(xs, ys, inside):
            d, w = truth.distance_and_width([x], [y])
            if abs(d[0] - w[0] / 2.0) < 0.75:
                agree += 1  # boundary band: either answer is acceptable
            elif mask[int(round(y)), int(round(x))] == i:
                agree += 1
        assert agree / len(xs) > 0.98


class TestSuite:
    def test_size_and_names_unique(self):
        specs = phantom.standard_suite()
        assert len(specs) >= 20
        names = [s.name for s in specs]
        assert len(set(names)) == len(names)

    def test_catalog_deterministic(self):
        a = phantom.standard_suite()
        b = phantom.standard_suite()
        assert [s.name for s in a] == [s.name for s in b]
        assert all(x == y for x, y in zip(a, b))

    def test_all_render_at_400(self):
        for spec in phantom.standard_suite():
            img, truth = phantom.render_phantom(spec, 0)
            assert img.shape == (400, 400)
            assert truth.total_length() > 0

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            phantom.suite_spec("nope")

    def test_expected_families_present(self):
        names = {s.name for s in phantom.standard_suite()}
        assert {"straight_w4", "straight_w12", "incline_0", "incline_90",
                "arc_r40", "arc_r150", "y_sep30", "y_sep120", "ring",
                "sten_r40", "sten_r90", "sten_double", "lowcontrast_w8",
                "noisy_w8", "gaussian_w8"} <= names


class TestFixtures:
    def test_spec_json_roundtrip(self):
        for name in ("sten_double", "y_sep60", "ring"):
            spec = phantom.suite_spec(name)
            back = phantom.spec_from_jsonable(phantom.spec_to_jsonable(spec))
            assert back == spec

    def test_save_fixture(self, tmp_path):
        phantom.save_fixture(phantom.suite_spec("sten_r60"), 5, tmp_path)
        import json

        from angiokit.core import load_gray_image

        img = load_gray_image(tmp_path / "image.pgm")
        assert img.shape == (400, 400)
        truth = json.loads((tmp_path / "truth.json").read_text())
        assert truth["stenoses"][0]["residual"] == 0.6
        spec = phantom.spec_from_jsonable(
            json.loads((tmp_path / "spec.json").read_text()))
        assert spec.name == "sten_r60"
