import numpy as np
import pytest

from _oracles import EnergyOracle, gaussian_weight
from tsgc.errors import SegmentationError
from tsgc.features import MedianScalar, Multiscale, TimeSeries
from tsgc.graphbuild import Gaussian
from tsgc.pipeline import SegmentationRequest, energy, segment
from tsgc.volume_io import Label, TimeSeriesVolume


def test_energy_hand_values():
    f = np.array([[[0.0], [2.0]]])
    e = energy(np.array([[1, 2]]), f, [0.0], [2.0], normalized=False)
    assert (e.data_term, e.perimeter_term, e.total) == (0.0, 0.5, 0.5)
    e = energy(np.array([[1, 1]]), f, [0.0], [2.0], normalized=False)
    assert (e.data_term, e.perimeter_term, e.total) == (2.0, 0.0, 2.0)


def test_energy_zero_on_constant_image():
    f = np.full((3, 4, 2), 5.0)
    e = energy(np.ones((3, 4), int), f, [5.0, 5.0], [1.0, 0.0])
    assert e.total == 0.0


def test_energy_lambda():
    f = np.array([[[0.0], [2.0]]])
    e = energy(np.array([[1, 2]]), f, [0.0], [2.0], lam=3.0, normalized=False)
    assert e.total == pytest.approx(1.5)


def test_energy_errors():
    f = np.zeros((2, 2, 1))
    with pytest.raises(SegmentationError):
        energy(np.ones((2, 3), int), f, [0.0], [0.0])
    with pytest.raises(SegmentationError):
        energy(np.ones((2, 2), int), f, [0.0, 1.0], [0.0])
    with pytest.raises(SegmentationError):
        energy(np.full((2, 2), 3), f, [0.0], [0.0])


def test_energy_matches_oracle(rng):
    f = rng.normal(size=(4, 5, 3))
    region = rng.random((4, 5)) < 0.7
    labels = np.where(rng.random((4, 5)) < 0.5, 1, 2) * region
    pixels = [tuple(p) for p in np.argwhere(region)]
    mu1, mu2 = rng.normal(size=3), rng.normal(size=3)
    for normalized in (False, True):
        oracle = EnergyOracle(f, pixels, mu1, mu2, normalized=normalized)
        data, per = oracle.terms({p: labels[p] for p in pixels})
        e = energy(labels, f, mu1, mu2, region, normalized=normalized)
        assert e.data_term == pytest.approx(data, rel=1e-12)
        assert e.perimeter_term == pytest.approx(per, rel=1e-12)
    weight = lambda p, q: gaussian_weight(f[p], f[q], p, q, 1.3)  # noqa: E731
    oracle = EnergyOracle(f, pixels, mu1, mu2, weight=weight)
    e = energy(labels, f, mu1, mu2, region, boundary=Gaussian(1.3))
    assert e.total == pytest.approx(oracle({p: labels[p] for p in pixels}), rel=1e-12)


def random_request(rng, h=4, w=4, t=3, fill=0.8, **kw):
    data = rng.normal(0, 30, size=(t, h, w)).astype(np.float32)
    liver = rng.random((h, w)) < fill
    liver.flat[rng.integers(h * w)] = True
    inside = np.flatnonzero(liver)
    rois = []
    for _ in range(3):
        roi = np.zeros((h, w), bool)
        roi.flat[rng.choice(inside, size=min(2, len(inside)), replace=False)] = True
        rois.append(roi)
    return SegmentationRequest(TimeSeriesVolume(data), liver, *rois, **kw)


@pytest.mark.parametrize("seed", range(25))
def test_stage1_is_global_minimum(seed):
    rng = np.random.default_rng(seed)
    req = random_request(rng)
    result = segment(req)
    f = np.moveaxis(req.volume.data.astype(np.float64), 0, -1)
    s1 = result.stage1
    pixels = [tuple(p) for p in np.argwhere(s1.region)]
    mu_h = f[req.roi_healthy].mean(axis=0)
    mu_t = f[req.roi_tumor].mean(axis=0)
    oracle = EnergyOracle(f, pixels, mu_h, mu_t)
    got = oracle({p: s1.labels[p] for p in pixels})
    assert got == pytest.approx(oracle.minimum(), abs=1e-9)
    assert s1.energy.total == pytest.approx(got, abs=1e-9)
    assert s1.flow_value == pytest.approx(s1.energy.data_term + s1.energy.perimeter_term, abs=1e-9)
    if result.stage2 is not None:
        s2 = result.stage2
        assert np.array_equal(s2.region, s1.labels == 2)
        pix2 = [tuple(p) for p in np.argwhere(s2.region)]
        mu_v = f[req.roi_vessel].mean(axis=0)
        o2 = EnergyOracle(f, pix2, mu_v, mu_t)
        assert o2({p: s2.labels[p] for p in pix2}) == pytest.approx(o2.minimum(), abs=1e-9)
        assert s2.flow_value == pytest.approx(s2.energy.total, abs=1e-9)


def test_identical_means_still_optimal():
    vol = TimeSeriesVolume(np.full((3, 4, 4), 50.0))
    liver = np.ones((4, 4), bool)
    roi = np.zeros((4, 4), bool)
    roi[1, 1] = True
    result = segment(SegmentationRequest(vol, liver, roi, roi, roi))
    s1 = result.stage1
    assert s1.flow_value == 0.0
    assert set(np.unique(result.labels)) <= {Label.HEALTHY, Label.TUMOR, Label.VESSEL}
    f = np.moveaxis(vol.data.astype(float), 0, -1)
    pixels = [(r, c) for r in range(4) for c in range(4)]
    oracle = EnergyOracle(f, pixels, f[1, 1], f[1, 1])
    assert s1.energy.total == pytest.approx(oracle.minimum(), abs=1e-12)


def test_no_tumor_after_stage1_skips_stage2():
    # a lone corner tumor-ROI pixel 0.5 HU from its neighbours: its three
    # n-links (weight 1 each) outweigh its normalised data cost of 1
    data = np.full((1, 3, 3), 10.0)
    data[0, 0, 0] = 10.5
    liver = np.ones((3, 3), bool)
    healthy = np.zeros((3, 3), bool)
    healthy[1, 1] = True
    tumor = np.zeros((3, 3), bool)
    tumor[0, 0] = True
    result = segment(SegmentationRequest(TimeSeriesVolume(data), liver, healthy, tumor, tumor))
    assert result.stage2 is None
    assert result.energy_stage2 is None
    assert (result.labels == Label.HEALTHY).all()
    assert "stage2" not in result.timings
    assert result.stage1.energy.total == pytest.approx(1.0)


def test_labels_background_outside_liver(rng):
    req = random_request(rng, 6, 6, fill=0.5)
    result = segment(req)
    assert (result.labels[~req.liver_mask] == Label.BACKGROUND).all()
    assert (result.labels[req.liver_mask] != Label.BACKGROUND).all()


def test_vessel_and_tumor_only_inside_stage1_tumor(rng):
    for _ in range(10):
        req = random_request(rng, 7, 7, t=4)
        result = segment(req)
        tumor1 = result.stage1.labels == 2
        assert np.array_equal(np.isin(result.labels, (Label.TUMOR, Label.VESSEL)), tumor1 & req.liver_mask)


def test_full_image_mode(rng):
    req = random_request(rng, 6, 6, fill=0.6, full_image=True)
    result = segment(req)
    assert result.stage1.region.all()
    assert (result.labels[~req.liver_mask] == Label.BACKGROUND).all()
    if result.stage2 is not None:
        assert np.array_equal(result.stage2.region, result.stage1.labels == 2)


@pytest.mark.parametrize("mode", [TimeSeries(), Multiscale(4), MedianScalar()])
def test_modes_and_smoothing_run(rng, mode):
    req = random_request(rng, 8, 8, t=5, mode=mode, smoothing=3)
    result = segment(req)
    assert result.labels.shape == (8, 8)
    assert result.stage1.flow_value == pytest.approx(result.stage1.energy.total, abs=1e-9)


def test_lambda_and_unnormalized_cut_cost_identity(rng):
    for lam, normalized in ((2.5, True), (1.0, False), (0.3, False)):
        req = random_request(rng, 5, 5, t=3, lam=lam, normalized=normalized)
        result = segment(req)
        e = result.stage1.energy
        assert e.lam == lam
        assert result.stage1.flow_value == pytest.approx(e.data_term + lam * e.perimeter_term, rel=1e-9)


def test_deterministic(rng):
    req = random_request(rng, 10, 10, t=6)
    a, b = segment(req), segment(req)
    assert np.array_equal(a.labels, b.labels)
    assert a.stage1.flow_value == b.stage1.flow_value


@pytest.mark.parametrize("which", ["liver", "healthy", "tumor", "vessel"])
def test_request_validation_empty(rng, which):
    req = random_request(rng)
    empty = np.zeros((4, 4), bool)
    fields = {"liver": "liver_mask", "healthy": "roi_healthy", "tumor": "roi_tumor", "vessel": "roi_vessel"}
    kwargs = dict(
        volume=req.volume, liver_mask=req.liver_mask, roi_healthy=req.roi_healthy,
        roi_tumor=req.roi_tumor, roi_vessel=req.roi_vessel,
    )
    kwargs[fields[which]] = empty
    with pytest.raises(SegmentationError, match="empty"):
        segment(SegmentationRequest(**kwargs))


def test_request_validation_shape_and_containment(rng):
    req = random_request(rng)
    with pytest.raises(SegmentationError, match="shape"):
        segment(SegmentationRequest(req.volume, np.ones((3, 4), bool), req.roi_healthy, req.roi_tumor, req.roi_vessel))
    liver = np.zeros((4, 4), bool)
    liver[0] = True
    roi = np.zeros((4, 4), bool)
    roi[3, 3] = True
    inside = np.zeros((4, 4), bool)
    inside[0, 0] = True
    with pytest.raises(SegmentationError, match="outside"):
        segment(SegmentationRequest(req.volume, liver, roi, inside, inside))
