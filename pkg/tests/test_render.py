import json
import math

import numpy as np
import pytest

from dfdkit import dataset as dset
from dfdkit.optics import CameraConfig, blur_diameter_px, invert_blur, signed_blur_px
from dfdkit.psf import convolve, disk_kernel
from dfdkit.render import (
    DepthLayering,
    Layer,
    cumulative_occlusion,
    extend_layer,
    quantize_depth,
    render_defocus,
    render_dataset,
)

from conftest import conv_naive, edge_spread_sigma


def procedural_depth(h, w):
    """Ramp background with three boxes at distinct depths."""
    d = np.full((h, w), 3.0) + np.linspace(0.0, 2.0, w)[None, :]
    d[h // 6 : h // 2, w // 8 : w // 3] = 1.2
    d[h // 3 : 2 * h // 3, w // 2 : 4 * w // 5] = 2.0
    d[2 * h // 3 :, w // 10 : w // 4] = 0.8
    return d


class TestQuantizeDepth:
    def test_constant_depth_single_layer(self, cfg_2m):
        lay = quantize_depth(np.full((8, 10), 1.3), cfg_2m)
        assert len(lay) == 1
        assert lay.layers[0].mask.all()
        assert lay.layers[0].representative_depth == pytest.approx(1.3)

    def test_two_plane_partition(self, cfg_2m):
        depth = np.full((16, 16), 3.0)
        depth[4:12, 4:12] = 1.0
        lay = quantize_depth(depth, cfg_2m)
        assert len(lay) == 2
        union = np.zeros((16, 16), dtype=bool)
        for layer in lay.layers:
            assert not (union & layer.mask).any()
            union |= layer.mask
        assert union.all()
        # back-to-front: 3 m layer first, 1 m layer last
        assert lay.layers[0].representative_depth == pytest.approx(3.0)
        assert lay.layers[1].representative_depth == pytest.approx(1.0)

    def test_layer_count_matches_histogram_oracle(self, cfg_2m):
        depth = procedural_depth(48, 64)
        step = 0.25
        lay = quantize_depth(depth, cfg_2m, step)
        # independent bucket count on signed blur
        s = cfg_2m.sensor_distance
        d_ap = cfg_2m.aperture_diameter
        signed = d_ap * s * (1.0 / cfg_2m.focus_distance - 1.0 / depth) / cfg_2m.pixel_pitch
        n_buckets = len(np.unique(np.floor(signed / step).astype(int)))
        assert len(lay) == n_buckets

    def test_equal_blur_opposite_sides_stay_distinct(self, cfg_2m):
        near, far = invert_blur(cfg_2m, 3.0 * cfg_2m.pixel_pitch)  # 3 px on both sides
        assert not math.isinf(far)
        depth = np.full((4, 8), near)
        depth[:, 4:] = far
        lay = quantize_depth(depth, cfg_2m)
        assert len(lay) == 2
        signs = sorted(layer.signed_blur_px for layer in lay.layers)
        assert signs[0] < 0 < signs[1]

    def test_representative_blur_within_half_step(self, cfg_2m):
        step = 0.25
        lay = quantize_depth(procedural_depth(40, 52), cfg_2m, step)
        for layer in lay.layers:
            assert abs(layer.blur_px - blur_diameter_px(cfg_2m, layer.representative_depth)) <= step / 2
            member_signed = signed_blur_px(cfg_2m, np.array([layer.representative_depth]))
            # representative depth lands inside the layer's own bucket
            lo = np.floor(layer.signed_blur_px / step) * step
            assert lo <= member_signed[0] < lo + step

    def test_back_to_front_ordering(self, cfg_2m):
        lay = quantize_depth(procedural_depth(40, 52), cfg_2m)
        reps = [layer.representative_depth for layer in lay.layers]
        assert all(a > b for a, b in zip(reps, reps[1:]))

    def test_invalid_depth_rejected(self, cfg_2m):
        bad = np.full((4, 4), 2.0)
        bad[1, 1] = np.nan
        with pytest.raises(ValueError):
            quantize_depth(bad, cfg_2m)
        bad[1, 1] = 0.0
        with pytest.raises(ValueError):
            quantize_depth(bad, cfg_2m)
        with pytest.raises(ValueError):
            quantize_depth(np.full((4, 4), 2.0), cfg_2m, step_px=0.0)


class TestExtendLayer:
    def test_full_mask_returns_input(self):
        rng = np.random.default_rng(0)
        img = rng.random((10, 12))
        out = extend_layer(img, np.ones((10, 12), dtype=bool), 4)
        np.testing.assert_array_equal(out, img)

    def test_constant_fills_constant(self):
        img = np.full((12, 12), 0.6)
        mask = np.zeros((12, 12), dtype=bool)
        mask[4:8, 4:8] = True
        out = extend_layer(img, mask, 3)
        from scipy.ndimage import distance_transform_edt

        halo = (distance_transform_edt(~mask) <= 3) & ~mask
        assert np.abs(out[halo] - 0.6).max() <= 1e-12
        assert (out[~(mask | halo)] == 0).all()

    def test_two_tone_halo_matches_nearest_fill_oracle(self):
        img = np.zeros((10, 16))
        img[:, :8] = 0.2
        img[:, 8:] = 0.9
        mask = np.zeros((10, 16), dtype=bool)
        mask[:, :8] = True
        out = extend_layer(img, mask, 4)
        from scipy.ndimage import distance_transform_edt

        halo = (distance_transform_edt(~mask) <= 4) & ~mask
        # nearest-valid fill of a constant-valued mask region is that constant
        assert np.abs(out[halo] - 0.2).max() <= 1e-12
        assert (out[~(mask | halo)] == 0).all()

    def test_infinite_halo_covers_frame(self):
        img = np.full((8, 8), 0.4)
        mask = np.zeros((8, 8), dtype=bool)
        mask[0, 0] = True
        out = extend_layer(img, mask, math.inf)
        assert np.abs(out - 0.4).max() <= 1e-12

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError):
            extend_layer(np.zeros((4, 4)), np.zeros((4, 4), dtype=bool), 2)


def layering_from_masks(masks, blurs):
    layers = [
        Layer(mask=m, representative_depth=float(10 - i), blur_px=b, signed_blur_px=b)
        for i, (m, b) in enumerate(zip(masks, blurs))
    ]
    return DepthLayering(layers=layers, quantization_step=0.25)


class TestCumulativeOcclusion:
    def test_single_layer_all_ones(self):
        lay = layering_from_masks([np.ones((6, 6), dtype=bool)], [2.0])
        (m,) = cumulative_occlusion(lay, [disk_kernel(2.0)])
        np.testing.assert_array_equal(m, np.ones((6, 6)))

    def test_full_front_layer_blocks_back(self):
        masks = [np.zeros((6, 6), dtype=bool), np.ones((6, 6), dtype=bool)]
        masks[0][2:4, 2:4] = True
        lay = layering_from_masks(masks, [2.0, 0.0])
        back_m, front_m = cumulative_occlusion(lay, [disk_kernel(2.0), disk_kernel(0.0)])
        np.testing.assert_array_equal(front_m, np.ones((6, 6)))
        np.testing.assert_array_equal(back_m, np.zeros((6, 6)))

    def test_matches_product_oracle(self):
        rng = np.random.default_rng(9)
        masks = [rng.random((14, 14)) > 0.5 for _ in range(3)]
        kernels = [disk_kernel(d) for d in (2.0, 3.0, 2.5)]
        lay = layering_from_masks(masks, [2.0, 3.0, 2.5])
        got = cumulative_occlusion(lay, kernels)
        for k in range(3):
            want = np.ones((14, 14))
            for k2 in range(k + 1, 3):
                want = want * (1.0 - conv_naive(masks[k2].astype(float), kernels[k2].taps))
            assert np.abs(got[k] - np.clip(want, 0, 1)).max() <= 1e-9

    def test_kernel_count_mismatch(self):
        lay = layering_from_masks([np.ones((4, 4), dtype=bool)], [1.0])
        with pytest.raises(ValueError):
            cumulative_occlusion(lay, [])


class TestRenderDefocus:
    def test_constant_depth_equals_convolution(self, cfg_2m):
        rng = np.random.default_rng(1)
        rgb = rng.random((32, 32, 3))
        depth = np.full((32, 32), 1.0)
        out = render_defocus(rgb, depth, cfg_2m)
        blur = quantize_depth(depth, cfg_2m).layers[0].blur_px
        ref = np.clip(convolve(rgb, disk_kernel(blur)), 0, 1)
        assert np.abs(out - ref).max() <= 1e-5

    def test_at_focus_is_identity(self, cfg_2m):
        rng = np.random.default_rng(2)
        rgb = rng.random((24, 24, 3))
        out = render_defocus(rgb, np.full((24, 24), 2.0), cfg_2m)
        assert np.abs(out - rgb).max() <= 1e-6

    def test_dimension_mismatch_rejected(self, cfg_2m):
        with pytest.raises(ValueError):
            render_defocus(np.zeros((8, 8, 3)), np.full((8, 9), 2.0), cfg_2m)

    def test_edge_spread_matches_blur_extent(self, cfg_2m):
        # a 1 m plane under the 2 m focus blurs by ~7.23 px; the rendered
        # edge must spread like a direct disk-blurred step of that diameter
        step_img = np.zeros((48, 64, 3))
        step_img[:, 32:] = 0.9
        step_img[:, :32] = 0.1
        out = render_defocus(step_img, np.full((48, 64), 1.0), cfg_2m)
        ref = convolve(step_img[:, :, 0], disk_kernel(blur_diameter_px(cfg_2m, 1.0)))
        assert abs(edge_spread_sigma(out[:, :, 0]) - edge_spread_sigma(ref)) <= 0.2

    def test_background_bleed_at_occlusion_boundary(self, cfg_2m):
        # blurred 1 m foreground over an in-focus 2 m background: background
        # pixels near the boundary catch foreground bleed, far ones do not
        rng = np.random.default_rng(3)
        rgb = rng.random((64, 64, 3))
        depth = np.full((64, 64), 2.0)
        depth[8:24, 8:24] = 1.0
        out = render_defocus(rgb, depth, cfg_2m)
        rmax = disk_kernel(blur_diameter_px(cfg_2m, 1.0)).radius_px
        near_band = np.abs(out - rgb)[24 : 24 + 2, 8:24].max()
        assert near_band > 1e-3
        far = np.abs(out - rgb)[24 + rmax + 1 :, 24 + rmax + 1 :]
        assert far.max() <= 1e-6

    def test_in_focus_passthrough_mid_stack(self, cfg_2m):
        # focal plane sandwiched between a blurred near box and a blurred
        # far box: focal pixels whose whole max-kernel neighborhood is
        # focal must come through untouched
        rng = np.random.default_rng(8)
        rgb = rng.random((72, 72, 3))
        depth = np.full((72, 72), 2.0)
        depth[4:20, 4:20] = 1.0   # near occluder, ~7 px blur
        depth[48:68, 48:68] = 6.0  # far background patch, ~5 px blur
        out = render_defocus(rgb, depth, cfg_2m)
        lay = quantize_depth(depth, cfg_2m)
        rmax = max(disk_kernel(l.blur_px).radius_px for l in lay.layers)
        focal = np.zeros((72, 72), dtype=bool)
        focal[20 + rmax + 1 : 48 - rmax - 1, 20 + rmax + 1 : 48 - rmax - 1] = True
        assert np.abs(out - rgb)[focal].max() <= 1e-6

    def test_composite_weight_coverage(self, cfg_2m):
        depth = procedural_depth(72, 96)
        out = render_defocus(np.ones((72, 96)), depth, cfg_2m)
        lay = quantize_depth(depth, cfg_2m)
        rmax = max(disk_kernel(l.blur_px).radius_px for l in lay.layers)
        interior = out[rmax:-rmax, rmax:-rmax]
        assert interior.min() >= 0.999

    def test_telescoping_identity_random_stacks(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            masks = [rng.random((20, 20)) > 0.5 for _ in range(3)]
            kernels = [disk_kernel(float(rng.choice([2.5, 4.0]))) for _ in range(3)]
            b = [convolve(m.astype(float), k) for m, k in zip(masks, kernels)]
            m2 = np.ones((20, 20))
            m1 = np.clip(1 - b[2], 0, 1)
            m0 = np.clip((1 - b[1]) * (1 - b[2]), 0, 1)
            lhs = b[0] * m0 + b[1] * m1 + b[2] * m2
            rhs = 1.0 - (1 - b[0]) * (1 - b[1]) * (1 - b[2])
            assert np.abs(lhs - rhs).max() <= 1e-6

    def test_grayscale_input_supported(self, cfg_2m):
        rng = np.random.default_rng(4)
        img = rng.random((20, 20))
        out = render_defocus(img, np.full((20, 20), 1.5), cfg_2m)
        assert out.shape == (20, 20)


class TestRenderDataset:
    def write_pair(self, root, name, rgb, depth):
        dset.save_rgb(root / f"{name}.png", rgb)
        dset.save_depth_png16(root / f"{name}_depth.png", depth)
        return f"{name}.png", f"{name}_depth.png"

    def make_manifest(self, root, pairs):
        lines = ["rgb_path,depth_path,split"]
        lines += [f"{r},{d},test" for r, d in pairs]
        path = root / "manifest.csv"
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_single_entry(self, cfg_2m, tmp_path):
        rng = np.random.default_rng(0)
        pair = self.write_pair(tmp_path, "scene", rng.random((24, 24, 3)), np.full((24, 24), 1.5))
        manifest = self.make_manifest(tmp_path, [pair])
        out_dir = tmp_path / "out"
        report = render_dataset(manifest, cfg_2m, out_dir)
        assert report["n_ok"] == 1 and report["n_failed"] == 0
        assert (out_dir / "scene_defocus.png").exists()
        sidecar = json.loads((out_dir / "render_config.json").read_text())
        assert sidecar["focal_length_m"] == cfg_2m.focal_length
        assert sidecar["f_number"] == cfg_2m.f_number
        assert sidecar["pixel_pitch_m"] == cfg_2m.pixel_pitch
        assert sidecar["focus_distance_m"] == cfg_2m.focus_distance
        assert sidecar["quantization_px"] == 0.25
        assert "tool_version" in sidecar

    def test_deterministic_outputs(self, cfg_2m, tmp_path):
        rng = np.random.default_rng(1)
        pairs = []
        for i in range(2):
            depth = np.full((20, 28), 1.0 + 0.7 * i)
            depth[5:12, 8:20] = 0.9
            pairs.append(self.write_pair(tmp_path, f"s{i}", rng.random((20, 28, 3)), depth))
        manifest = self.make_manifest(tmp_path, pairs)
        render_dataset(manifest, cfg_2m, tmp_path / "a")
        render_dataset(manifest, cfg_2m, tmp_path / "b")
        for i in range(2):
            b1 = (tmp_path / "a" / f"s{i}_defocus.png").read_bytes()
            b2 = (tmp_path / "b" / f"s{i}_defocus.png").read_bytes()
            assert b1 == b2

    def test_unreadable_entry_recorded_and_skipped(self, cfg_2m, tmp_path):
        rng = np.random.default_rng(2)
        good = self.write_pair(tmp_path, "good", rng.random((16, 16, 3)), np.full((16, 16), 1.5))
        manifest = self.make_manifest(tmp_path, [good, ("missing.png", "missing_d.png")])
        report = render_dataset(manifest, cfg_2m, tmp_path / "out")
        assert report["n_ok"] == 1 and report["n_failed"] == 1
        failed = [e for e in report["entries"] if e["status"] == "error"]
        assert len(failed) == 1 and "missing" in failed[0]["entry"]

    def test_empty_manifest_rejected(self, cfg_2m, tmp_path):
        manifest = self.make_manifest(tmp_path, [])
        with pytest.raises(ValueError):
            render_dataset(manifest, cfg_2m, tmp_path / "out")

    def test_focus_setting_blur_ordering(self, tmp_path):
        # blur at 1 m under 2/4/8 m focus settings, ordered by the closed
        # form; measured edge spread of the renders must order the same way
        step_img = np.zeros((48, 64, 3))
        step_img[:, 32:] = 0.9
        step_img[:, :32] = 0.1
        pair = self.write_pair(tmp_path, "plane", step_img, np.full((48, 64), 1.0))
        manifest = self.make_manifest(tmp_path, [pair])
        spreads, blurs = {}, {}
        for focus in (2.0, 4.0, 8.0):
            cfg = CameraConfig(0.015, 2.8, 5.6e-6, focus)
            out_dir = tmp_path / f"f{focus}"
            report = render_dataset(manifest, cfg, out_dir)
            assert report["n_failed"] == 0
            rendered = dset.load_rgb(out_dir / "plane_defocus.png")
            spreads[focus] = edge_spread_sigma(rendered[:, :, 0])
            blurs[focus] = blur_diameter_px(cfg, 1.0)
        assert sorted(spreads, key=spreads.get) == sorted(blurs, key=blurs.get)
