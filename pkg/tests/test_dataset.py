import numpy as np
import pytest

from optislip.dataset import (
    DatasetError,
    FrictionCube,
    build_dataset,
    discretize_curve,
    extract_windows,
    load_dataset,
    reference_split,
    sample_diagonal,
    sample_hypercube,
    save_dataset,
    sidecar_path,
)
from optislip.friction import REFERENCE_SURFACES, FrictionParams, mu, optimal_slip
from optislip.sensing import NoiseConfig

CUBE = FrictionCube()


def test_cube_contains_reference_surfaces():
    for params in REFERENCE_SURFACES.values():
        assert CUBE.contains(params)
    with pytest.raises(DatasetError):
        FrictionCube(b1_range=(0.0, 1.0))
    with pytest.raises(DatasetError):
        FrictionCube(b2_range=(5.0, 1.0))


def test_diagonal_examples():
    assert sample_diagonal(0) == []
    (mid,) = sample_diagonal(1)
    assert mid.as_tuple() == pytest.approx((0.75, 60.0, 0.3))
    lo, hi = sample_diagonal(2)
    assert lo.as_tuple() == (0.15, 20.0, 0.05)
    assert hi.as_tuple() == (1.35, 100.0, 0.55)
    assert all(p.beta1 * p.beta2 > p.beta3 for p in sample_diagonal(50))


def test_diagonal_drops_invalid_points():
    # the low corner has beta1*beta2 < beta3
    cube = FrictionCube((0.01, 1.0), (1.0, 50.0), (0.5, 0.6))
    pts = sample_diagonal(5, cube)
    assert 0 < len(pts) < 5
    assert all(p.beta1 * p.beta2 > p.beta3 for p in pts)


@pytest.mark.parametrize("seed", range(100))
def test_hypercube_stratification(seed):
    n = 10
    pts = np.array([p.as_tuple() for p in sample_hypercube(n, CUBE, seed)])
    unit = (pts - CUBE.lower) / (CUBE.upper - CUBE.lower)
    for axis in range(3):
        counts = np.bincount(np.minimum((unit[:, axis] * n).astype(int), n - 1), minlength=n)
        assert np.all(counts == 1)


def test_hypercube_seeding():
    a = sample_hypercube(20, CUBE, 1)
    assert a == sample_hypercube(20, CUBE, 1)
    assert a != sample_hypercube(20, CUBE, 2)
    (single,) = sample_hypercube(1, CUBE, 0)
    assert CUBE.contains(single)


def test_hypercube_resamples_invalid_cells_in_place():
    cube = FrictionCube((0.01, 1.0), (1.0, 50.0), (0.5, 0.6))
    n = 8
    pts = np.array([p.as_tuple() for p in sample_hypercube(n, cube, 3)])
    assert np.all(pts[:, 0] * pts[:, 1] > pts[:, 2])
    unit = (pts - cube.lower) / (cube.upper - cube.lower)
    for axis in range(3):
        assert sorted((unit[:, axis] * n).astype(int)) == list(range(n))


def test_discretize_curve():
    curve = discretize_curve(REFERENCE_SURFACES["D"])
    assert curve.shape == (1000, 2)
    assert curve[0, 0] == 0.0 and curve[-1, 0] == 1.0
    assert np.allclose(np.diff(curve[:, 0]), 1 / 999)
    assert curve[-1, 1] == pytest.approx(0.7601, abs=1e-9)
    with pytest.raises(DatasetError):
        discretize_curve(REFERENCE_SURFACES["D"], 1)


def test_window_counts_and_noiseless_segments():
    curve = discretize_curve(REFERENCE_SURFACES["W"])
    feats, labels = extract_windows(curve, 50, 1, NoiseConfig(0.0), 0.13)
    assert feats.shape == (951, 100)
    assert np.all(labels == 0.13)
    assert extract_windows(curve, 50, 50, NoiseConfig(0.0), 0.13)[0].shape == (20, 100)
    assert np.array_equal(feats[7].reshape(50, 2), curve[7:57])
    assert extract_windows(curve[:10], 50)[0].shape == (0, 100)


def test_window_noise_only_touches_friction():
    curve = discretize_curve(REFERENCE_SURFACES["S"])
    feats, _ = extract_windows(curve, 50, 1, NoiseConfig(0.005, seed=2), 0.06)
    clean, _ = extract_windows(curve, 50, 1, NoiseConfig(0.0), 0.06)
    assert np.array_equal(feats[:, 0::2], clean[:, 0::2])
    resid = (feats - clean)[:, 1::2]
    assert resid.std() == pytest.approx(0.005, rel=0.02)


@pytest.fixture(scope="module")
def small():
    return build_dataset(n_diag=6, n_hyp=14, stride=25, seed=11)


def test_build_partitions_whole_curves(small):
    owners = {}
    for name in ("train", "validation", "test"):
        for cid in np.unique(small.split(name).curve_ids):
            assert owners.setdefault(int(cid), name) == name
            assert small.curves[int(cid)].split == name
    assert len(owners) == len(small.curves) == 20
    assert [sum(c.split == s for c in small.curves.values()) for s in ("train", "validation", "test")] == [14, 3, 3]


def test_labels_match_provenance(small):
    for name in ("train", "validation", "test"):
        data = small.split(name)
        for cid, label in zip(data.curve_ids, data.labels):
            assert label == optimal_slip(small.curves[int(cid)].params).lambda_star
            assert 0 < label < 1


def test_reference_surfaces_excluded():
    ds = build_dataset(n_diag=30, n_hyp=300, stride=500, seed=0)
    refs = [optimal_slip(p).lambda_star for p in REFERENCE_SURFACES.values()]
    assert ds.meta["dropped_near_reference"] > 0
    for info in ds.curves.values():
        lam = optimal_slip(info.params).lambda_star
        assert min(abs(lam - r) for r in refs) > 1e-3


def test_build_is_deterministic(small, tmp_path):
    again = build_dataset(n_diag=6, n_hyp=14, stride=25, seed=11)
    save_dataset(small, tmp_path / "a.csv")
    save_dataset(again, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    other = build_dataset(n_diag=6, n_hyp=14, stride=25, seed=12)
    assert not np.array_equal(other.train.features, small.train.features)


def test_split_configuration_errors():
    with pytest.raises(DatasetError):
        build_dataset(n_diag=2, n_hyp=0, stride=100)
    with pytest.raises(DatasetError):
        build_dataset(n_diag=5, n_hyp=0, split_ratios=(0.5, 0.5, 0.5))
    tiny = build_dataset(n_diag=3, n_hyp=0, stride=100)
    assert [len(set(tiny.split(s).curve_ids)) for s in ("train", "validation", "test")] == [1, 1, 1]


def test_round_trip(small, tmp_path):
    path = tmp_path / "ds.csv"
    save_dataset(small, path)
    back = load_dataset(path)
    for name in ("train", "validation", "test"):
        a, b = small.split(name), back.split(name)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.curve_ids, b.curve_ids)
    assert back.curves.keys() == small.curves.keys()
    for cid, info in small.curves.items():
        assert back.curves[cid].params == info.params
        assert back.curves[cid].split == info.split
    assert back.meta["seed"] == 11 and back.meta["P"] == 50
    header = path.read_text().splitlines()[0].split(",")
    assert header[:6] == ["curve_id", "split", "beta1", "beta2", "beta3", "label"]
    assert header[-1] == "f99"


def test_empty_dataset_is_header_only(tmp_path):
    ds = build_dataset(n_diag=3, n_hyp=0, stride=100)
    for name in ("train", "validation", "test"):
        data = ds.split(name)
        data.features, data.labels, data.curve_ids = data.features[:0], data.labels[:0], data.curve_ids[:0]
    path = tmp_path / "empty.csv"
    save_dataset(ds, path)
    assert len(path.read_text().splitlines()) == 1
    back = load_dataset(path)
    assert len(back.train) == 0 and back.train.features.shape == (0, 100)


def test_truncated_file_reports_line(small, tmp_path):
    path = tmp_path / "ds.csv"
    save_dataset(small, path)
    text = path.read_text()
    cut = tmp_path / "cut.csv"
    cut.write_text(text[: len(text) // 2])
    with pytest.raises(DatasetError, match="line"):
        load_dataset(cut)
    lines = text.splitlines(keepends=True)
    lines[4] = lines[4].replace(",", ",x", 1)
    bad = tmp_path / "bad.csv"
    bad.write_text("".join(lines))
    with pytest.raises(DatasetError, match="line 5"):
        load_dataset(bad)
    lines = text.splitlines(keepends=True)
    lines[3] = lines[3].rstrip("\n") + ",0.5\n"
    extra = tmp_path / "extra.csv"
    extra.write_text("".join(lines))
    with pytest.raises(DatasetError, match="line 4"):
        load_dataset(extra)
    assert sidecar_path(path).exists()


def test_reference_split_labels():
    ref = reference_split(stride=100, noise=NoiseConfig(0.0))
    assert set(np.round(np.unique(ref.labels), 4)) == {0.17, 0.1308, 0.06}
    first = ref.features[0].reshape(50, 2)
    assert np.allclose(first[:, 1], mu(REFERENCE_SURFACES["D"], first[:, 0]), atol=1e-6)
    assert isinstance(REFERENCE_SURFACES["D"], FrictionParams)
