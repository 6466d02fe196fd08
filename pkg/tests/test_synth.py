import json

import numpy as np
import pytest
from scipy import ndimage as ndi

from fingerunet.imageio import read_pgm_u8
from fingerunet.synth import (AugmentParams, DegradeConfig, MinutiaPoint, OrientationField, SamplePair, augment_pair,
                              degrade, extract_minutiae, gen_orientation_field, generate_sample, load_sample,
                              make_dataset, render_ridge_pattern)
from fingerunet.synth.augment import rotate_angles
from fingerunet.synth.dataset import SAMPLE_FILES, DatasetError, load_dataset
from fingerunet.synth.minutiae import crossing_number, minutiae_from_skeleton, paint_minutiae, thin


def angdiff(a, b):
    """Unsigned difference of two axial angles (period pi)."""
    return np.abs(np.angle(np.exp(2j * (np.asarray(a) - np.asarray(b))))) / 2


def const_field(theta, h=64, w=64):
    return OrientationField(np.full((h, w), theta), np.ones((h, w), np.uint8))


# - orientation fields ---------------------------------------------------------

def test_field_deterministic_and_in_range():
    a, b = gen_orientation_field(3, 48, 64), gen_orientation_field(3, 48, 64)
    assert np.array_equal(a.theta, b.theta) and np.array_equal(a.mask, b.mask)
    assert a.theta.min() >= 0 and a.theta.max() < np.pi
    with pytest.raises(ValueError):
        gen_orientation_field(0, 16, 64)


def test_field_smoothness_and_mask():
    # 99th percentile pooled over all neighbour pairs of 50 fields; single fields
    # with a near-singular point (core-like) may exceed it locally
    diffs = []
    for seed in range(50):
        f = gen_orientation_field(seed, 64, 64)
        diffs += [angdiff(f.theta[1:], f.theta[:-1]).ravel(), angdiff(f.theta[:, 1:], f.theta[:, :-1]).ravel()]
        _, n = ndi.label(f.mask)
        assert n == 1 and f.mask.mean() >= 0.30
    assert np.percentile(np.concatenate(diffs), 99) < 0.2


# - ridge rendering ------------------------------------------------------------

def test_render_deterministic_and_foreground_mean():
    means = []
    for seed in range(50):
        f = gen_orientation_field(seed, 64, 64)
        img = render_ridge_pattern(f, 8.0, seed)
        if seed == 0:
            assert np.array_equal(img, render_ridge_pattern(f, 8.0, seed))
        assert np.all(img[f.mask == 0] == 1.0) and 0 <= img.min() and img.max() <= 1
        means.append(img[f.mask > 0].mean())
    assert 0.35 <= min(means) and max(means) <= 0.65


@pytest.mark.parametrize("seed", range(5))
def test_render_spectrum_peak(seed):
    img = render_ridge_pattern(const_field(0.0), 8.0, seed)
    spec = np.abs(np.fft.fftshift(np.fft.fft2(img - img.mean())))
    r, c = np.unravel_index(np.argmax(spec), spec.shape)
    fr, fc = r - 32, c - 32
    # ridges run along the columns, so the peak sits on the row-frequency axis
    assert abs(np.hypot(fr, fc) - 64 / 8) <= 1.5
    assert abs(fc) <= 1 and abs(fr) >= 7


def test_render_period_range():
    with pytest.raises(ValueError):
        render_ridge_pattern(const_field(0.0), 5.0, 0)
    with pytest.raises(ValueError):
        render_ridge_pattern(const_field(0.0), 8.0, 0, iterations=2)


def test_render_follows_field_structure_tensor():
    for seed in range(20):
        f = gen_orientation_field(seed, 64, 64)
        img = render_ridge_pattern(f, 8.0, seed)
        gr, gc = ndi.sobel(img, axis=0), ndi.sobel(img, axis=1)
        jcc, jrr, jcr = (ndi.gaussian_filter(v, 2.0) for v in (gc * gc, gr * gr, gc * gr))
        tangent = 0.5 * np.arctan2(2 * jcr, jcc - jrr) + np.pi / 2
        fg = ndi.binary_erosion(f.mask > 0, iterations=3)  # drop the ridge/background seam
        assert (angdiff(tangent, f.theta)[fg] < np.radians(15)).mean() >= 0.80


# - minutiae ---------------------------------------------------------------------

def test_line_two_endings():
    sk = np.zeros((20, 30), np.uint8)
    sk[10, 5:25] = 1
    pts = minutiae_from_skeleton(sk, None)
    assert sorted((p.row, p.col, p.kind) for p in pts) == [(10, 5, "ending"), (10, 24, "ending")]


def test_y_skeleton():
    sk = np.zeros((40, 40), np.uint8)
    sk[20:36, 20] = 1  # stem
    for i in range(1, 14):
        sk[20 - i, 20 - i] = 1  # left arm
        sk[20 - i, 20 + i] = 1  # right arm
    kinds = sorted(p.kind for p in minutiae_from_skeleton(sk, None))
    assert kinds == ["bifurcation", "ending", "ending", "ending"]
    cn = crossing_number(sk)
    assert cn[20, 20] == 3 and cn[35, 20] == 1


def test_crossing_number_hand_values():
    sk = np.zeros((5, 5), np.uint8)
    sk[2, 1:4] = 1
    cn = crossing_number(sk)
    assert cn[2, 1] == 1 and cn[2, 2] == 2 and cn[2, 3] == 1
    assert cn[0, 0] == 0  # background pixels carry no crossing number


def test_thinning_is_one_pixel_and_idempotent():
    img = np.zeros((30, 40), np.uint8)
    img[10:16, 4:36] = 1
    img[4:26, 18:23] = 1
    sk = thin(img)
    assert np.array_equal(thin(sk), sk)
    assert sk.sum() < img.sum() / 3
    # no 2x2 fully set block survives
    assert not (sk[:-1, :-1] & sk[1:, :-1] & sk[:-1, 1:] & sk[1:, 1:]).any()
    _, n = ndi.label(sk, structure=np.ones((3, 3)))
    assert n == 1


def test_margin_and_distance_filters():
    sk = np.zeros((40, 40), np.uint8)
    sk[20, 2:15] = 1  # left end close to the mask edge
    sk[5:9, 30] = 1  # two endings 3 px apart
    mask = np.ones((40, 40), np.uint8)
    pts = minutiae_from_skeleton(sk, mask)
    assert (20, 2) not in {(p.row, p.col) for p in pts}
    assert (20, 14) in {(p.row, p.col) for p in pts}
    for a in pts:
        for b in pts:
            if a != b:
                assert np.hypot(a.row - b.row, a.col - b.col) >= 8


def test_empty_foreground():
    pts, m = extract_minutiae(np.ones((32, 32)), np.zeros((32, 32)))
    assert pts == [] and not m.any()
    pts, m = extract_minutiae(np.ones((32, 32)), np.ones((32, 32)))
    assert pts == [] and not m.any()


def test_paint_radius():
    m = paint_minutiae([MinutiaPoint(10, 10, "ending")], (21, 21))
    assert m.sum() == 29  # lattice points with r^2 <= 9
    assert m[10, 13] == 1 and m[10, 14] == 0 and m[12, 12] == 1 and m[13, 13] == 0


# - degradation -------------------------------------------------------------------

def _clean(seed=0):
    f = gen_orientation_field(seed, 64, 64)
    return render_ridge_pattern(f, 8.0, seed)


def test_severity_zero_identity():
    c = _clean()
    cfg = DegradeConfig.from_severity(0.0, 5)
    assert cfg.applied() == []
    assert np.array_equal(degrade(c, cfg), c)
    with pytest.raises(ValueError):
        DegradeConfig(0.0, 0.1, 0, 1.0, 0, 0, 0)
    with pytest.raises(ValueError):
        DegradeConfig.from_severity(1.5, 0)


def test_degrade_monotone_deterministic_pure():
    for seed in range(10):
        c = _clean(seed)
        keep = c.copy()
        errs = []
        for s in (0, 0.25, 0.5, 0.75, 1.0):
            d = degrade(c, DegradeConfig.from_severity(s, seed))
            assert 0 <= d.min() and d.max() <= 1
            errs.append(np.sqrt(np.mean((d - c) ** 2)))
        assert all(a <= b for a, b in zip(errs, errs[1:]))
        assert np.array_equal(c, keep)
    cfg = DegradeConfig.from_severity(0.6, 3)
    assert np.array_equal(degrade(c, cfg), degrade(c, cfg))
    assert set(cfg.applied()) == {"gaussian_noise", "box_blur", "gamma_contrast", "scratches", "blobs"}


# - augmentation -------------------------------------------------------------------

def _sample(theta=np.pi / 4, seed=0):
    f = const_field(theta)
    clean = render_ridge_pattern(f, 8.0, seed)
    pts, mm = extract_minutiae(clean, f.mask)
    return SamplePair(degrade(clean, DegradeConfig.from_severity(0.5, seed)), clean, mm, f, {})


def test_identity_augment():
    s = _sample()
    t = augment_pair(s, AugmentParams())
    for a, b in ((s.degraded, t.degraded), (s.clean, t.clean), (s.minutia_map, t.minutia_map),
                 (s.orientation.theta, t.orientation.theta)):
        assert np.array_equal(a, b) and a is not b


def test_rotation_shifts_angle():
    t = augment_pair(_sample(), AugmentParams(rotation_deg=15.0))
    inner = ndi.binary_erosion(t.orientation.mask > 0, iterations=4)
    assert inner.mean() > 0.4
    assert angdiff(t.orientation.theta, np.pi / 4 + np.pi / 12)[inner].max() < 0.02


def test_flip_angle_maps():
    theta = np.linspace(0, np.pi, 50, endpoint=False)
    for p in (AugmentParams(hflip=True), AugmentParams(vflip=True)):
        assert angdiff(rotate_angles(theta, p), np.pi - theta).max() < 1e-12


def test_hflip_involution():
    s = _sample(theta=0.3)
    p = AugmentParams(hflip=True)
    t = augment_pair(augment_pair(s, p), p)
    assert np.abs(t.clean - s.clean).max() < 1e-6 and np.abs(t.degraded - s.degraded).max() < 1e-6
    assert np.array_equal(t.minutia_map, s.minutia_map)
    assert np.array_equal(t.orientation.mask, s.orientation.mask)
    assert angdiff(t.orientation.theta, s.orientation.theta).max() < 1e-9


def test_augment_range_errors():
    s = _sample()
    for p in (AugmentParams(rotation_deg=16), AugmentParams(dx=7), AugmentParams(shear=0.2)):
        with pytest.raises(ValueError):
            augment_pair(s, p)


def test_random_params_in_range():
    g = np.random.default_rng(0)
    for _ in range(200):
        AugmentParams.random(g, 64, 48).validate(64, 48)


# - on-disk dataset -----------------------------------------------------------------

def test_make_dataset_layout(tmp_path):
    m = make_dataset(5, 11, tmp_path / "ds", (64, 64), (0.2, 0.8))
    dirs = sorted(p for p in (tmp_path / "ds").iterdir() if p.is_dir())
    assert len(dirs) == 5 and m["count"] == 5
    for i, d in enumerate(dirs):
        assert all((d / f).exists() for f in SAMPLE_FILES)
        meta = json.loads((d / "meta.json").read_text())
        assert meta["seed"] == 11 + i and meta["dims"] == [64, 64]
        assert 0.2 <= meta["severity"] <= 0.8
    assert all(0.2 <= e["severity"] <= 0.8 for e in m["samples"])
    hdr = (dirs[0] / "clean.pgm").read_bytes()[:13]
    assert hdr == b"P5\n64 64\n255\n"


def test_dataset_byte_identical(tmp_path):
    make_dataset(3, 2, tmp_path / "a", (64, 32))
    make_dataset(3, 2, tmp_path / "b", (64, 32))
    fa = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    fb = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert fa == fb
    assert all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in fa)


def test_sample_reload_matches_memory(tmp_path):
    make_dataset(2, 7, tmp_path / "ds")
    s = generate_sample(8, 64, 64)
    r = load_sample(tmp_path / "ds" / "sample_00001")
    assert np.array_equal(r.clean, s.clean) and np.array_equal(r.minutia_map, s.minutia_map)
    assert np.array_equal(r.orientation.theta, s.orientation.theta.astype(np.float32))
    assert np.abs(r.degraded - s.degraded).max() <= 0.5 / 255 + 1e-12
    assert np.array_equal(read_pgm_u8(tmp_path / "ds" / "sample_00001" / "minutiae.pgm") > 0, s.minutia_map > 0)


def test_dataset_errors(tmp_path):
    make_dataset(2, 0, tmp_path / "ds")
    (tmp_path / "ds" / "sample_00001" / "orient.bin").unlink()
    with pytest.raises(DatasetError, match="sample_00001: missing orient.bin"):
        load_dataset(tmp_path / "ds")
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "nowhere")
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        make_dataset(1, 0, blocker / "sub")


def test_generate_sample_rejects_bad_range():
    with pytest.raises(ValueError):
        generate_sample(0, 64, 64, (0.8, 0.2))
