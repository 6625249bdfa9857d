"""Synthetic training data: friction-cube sampling, curve windows, splits and files."""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .friction import REFERENCE_SURFACES, FrictionParams, is_valid_triple, mu, optimal_slip
from .sensing import DEFAULT_WINDOW, NoiseConfig

FEATURE_DECIMALS = 6
SPLIT_NAMES = ("train", "validation", "test")
REFERENCE_EXCLUSION = 1e-3


class DatasetError(ValueError):
    """Bad dataset configuration or malformed dataset file."""


@dataclass(frozen=True)
class FrictionCube:
    b1_range: tuple = (0.15, 1.35)
    b2_range: tuple = (20.0, 100.0)
    b3_range: tuple = (0.05, 0.55)

    def __post_init__(self):
        for lo, hi in self.bounds:
            if not 0 < lo <= hi:
                raise DatasetError(f"cube interval [{lo}, {hi}] must be non-empty and positive")

    @property
    def bounds(self):
        return (tuple(self.b1_range), tuple(self.b2_range), tuple(self.b3_range))

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds], dtype=float)

    def contains(self, params: FrictionParams) -> bool:
        return all(lo <= x <= hi for x, (lo, hi) in zip(params.as_tuple(), self.bounds))


@dataclass
class LabeledSample:
    features: np.ndarray
    label: float


@dataclass
class SplitData:
    """Samples of one split as stacked arrays."""

    features: np.ndarray  # (n, 2P)
    labels: np.ndarray  # (n,)
    curve_ids: np.ndarray  # (n,)

    def __len__(self):
        return len(self.labels)

    def samples(self) -> Iterator[LabeledSample]:
        for x, y in zip(self.features, self.labels):
            yield LabeledSample(x, float(y))

    @classmethod
    def empty(cls, width: int) -> "SplitData":
        return cls(np.zeros((0, width)), np.zeros(0), np.zeros(0, dtype=int))


@dataclass
class CurveInfo:
    params: FrictionParams
    origin: str  # "diag" or "hyp"
    split: str


@dataclass
class DatasetSplits:
    train: SplitData
    validation: SplitData
    test: SplitData
    curves: dict = field(default_factory=dict)  # curve_id -> CurveInfo
    meta: dict = field(default_factory=dict)

    def split(self, name: str) -> SplitData:
        return getattr(self, name)

    @property
    def window(self) -> int:
        return self.train.features.shape[1] // 2


def sample_diagonal(n: int, cube: FrictionCube = FrictionCube()) -> list[FrictionParams]:
    """``n`` evenly spaced triples on the segment from the lower to the upper cube corner."""
    if n <= 0:
        return []
    steps = np.array([0.5]) if n == 1 else np.linspace(0.0, 1.0, n)
    lo, hi = cube.lower, cube.upper
    out = []
    for s in steps:
        b = lo + s * (hi - lo)
        if is_valid_triple(*b):
            out.append(FrictionParams(*map(float, b)))
    return out


def sample_hypercube(
    n: int, cube: FrictionCube = FrictionCube(), seed=0, max_tries: int = 1000
) -> list[FrictionParams]:
    """Latin-hypercube sample of ``n`` triples.

    Every axis is cut into ``n`` equal strata and each stratum holds exactly one
    sample. A triple failing validity is redrawn inside the same cell.
    """
    if n <= 0:
        return []
    rng = np.random.default_rng(seed)
    lo, hi = cube.lower, cube.upper
    strata = np.stack([rng.permutation(n) for _ in range(3)], axis=1)
    out = []
    for cell in strata:
        for _ in range(max_tries):
            unit = (cell + rng.random(3)) / n
            b = lo + unit * (hi - lo)
            if is_valid_triple(*b):
                out.append(FrictionParams(*map(float, b)))
                break
        else:
            raise DatasetError(f"no valid friction triple found in cell {cell.tolist()}")
    return out


def discretize_curve(params: FrictionParams, n_points: int = 1000) -> np.ndarray:
    """Noiseless ``(lambda, mu)`` pairs on a uniform slip grid over [0, 1], shape ``(n_points, 2)``."""
    if n_points < 2:
        raise DatasetError("need at least two points to discretize a curve")
    lam = np.linspace(0.0, 1.0, n_points)
    return np.column_stack([lam, mu(params, lam)])


def extract_windows(
    curve: np.ndarray,
    P: int = DEFAULT_WINDOW,
    stride: int = 1,
    noise: NoiseConfig = NoiseConfig(0.0),
    label: float = math.nan,
    rng: np.random.Generator | None = None,
):
    """Slide a ``P``-pair window along ``curve``.

    Returns ``(features, labels)`` with features flattened as
    ``(lam1, mu1, ..., lamP, muP)``. Each window gets its own noise draw on
    the friction entries.
    """
    curve = np.asarray(curve, dtype=float)
    if stride < 1:
        raise DatasetError("stride must be >= 1")
    if len(curve) < P:
        return np.zeros((0, 2 * P)), np.zeros(0)
    starts = np.arange(0, len(curve) - P + 1, stride)
    idx = starts[:, None] + np.arange(P)[None, :]
    windows = curve[idx]  # (n, P, 2)
    if noise.sigma > 0:
        rng = rng if rng is not None else noise.rng()
        windows = windows.copy()
        windows[:, :, 1] += noise.sigma * rng.standard_normal(windows.shape[:2])
    feats = windows.reshape(len(starts), 2 * P)
    return feats, np.full(len(starts), float(label))


def _split_counts(n: int, ratios: Sequence[float]) -> list[int]:
    wanted = sum(1 for r in ratios if r > 0)
    if n < wanted:
        raise DatasetError(f"{n} curves cannot fill {wanted} non-empty splits")
    counts = [0, 0, 0]
    for i in (1, 2):
        if ratios[i] > 0:
            counts[i] = max(1, int(round(ratios[i] * n)))
    counts[0] = n - counts[1] - counts[2]
    if ratios[0] > 0 and counts[0] < 1:
        raise DatasetError(f"{n} curves leave no training curve for ratios {tuple(ratios)}")
    return counts


def build_dataset(
    cube: FrictionCube = FrictionCube(),
    n_diag: int = 50,
    n_hyp: int = 150,
    P: int = DEFAULT_WINDOW,
    stride: int = 1,
    noise: NoiseConfig = NoiseConfig(),
    split_ratios: Sequence[float] = (0.7, 0.15, 0.15),
    seed: int = 0,
    n_points: int = 1000,
) -> DatasetSplits:
    """Sample surfaces, window their curves and assign whole curves to splits.

    Curves whose optimal slip falls within 1e-3 of a reference surface's are
    dropped so that the three reference roads stay unseen.
    """
    if len(split_ratios) != 3 or abs(sum(split_ratios) - 1.0) > 1e-9 or min(split_ratios) < 0:
        raise DatasetError(f"split ratios must be three non-negative numbers summing to 1, got {split_ratios}")
    ss = np.random.SeedSequence(seed)
    hyp_seed, noise_seed, split_seed = ss.spawn(3)

    params = [(p, "diag") for p in sample_diagonal(n_diag, cube)]
    params += [(p, "hyp") for p in sample_hypercube(n_hyp, cube, hyp_seed)]
    ref_slips = [optimal_slip(p).lambda_star for p in REFERENCE_SURFACES.values()]
    kept = [
        (p, origin) for p, origin in params
        if all(abs(optimal_slip(p).lambda_star - r) > REFERENCE_EXCLUSION for r in ref_slips)
    ]
    dropped = len(params) - len(kept)

    counts = _split_counts(len(kept), split_ratios)
    order = np.random.default_rng(split_seed).permutation(len(kept))
    assignment = np.empty(len(kept), dtype=object)
    assignment[order[: counts[0]]] = "train"
    assignment[order[counts[0]: counts[0] + counts[1]]] = "validation"
    assignment[order[counts[0] + counts[1]:]] = "test"

    noise_rng = np.random.default_rng(noise_seed)
    parts = {name: ([], [], []) for name in SPLIT_NAMES}
    curves = {}
    for cid, ((p, origin), split) in enumerate(zip(kept, assignment)):
        curves[cid] = CurveInfo(p, origin, split)
        label = optimal_slip(p).lambda_star
        feats, labels = extract_windows(
            discretize_curve(p, n_points), P, stride, noise, label, noise_rng
        )
        f, y, c = parts[split]
        f.append(np.round(feats, FEATURE_DECIMALS))
        y.append(labels)
        c.append(np.full(len(labels), cid, dtype=int))

    def stack(name):
        f, y, c = parts[name]
        if not f:
            return SplitData.empty(2 * P)
        return SplitData(np.concatenate(f), np.concatenate(y), np.concatenate(c))

    meta = {
        "cube": [list(b) for b in cube.bounds],
        "n_diag": n_diag,
        "n_hyp": n_hyp,
        "n_curves": len(kept),
        "dropped_near_reference": dropped,
        "seed": seed,
        "sigma": noise.sigma,
        "P": P,
        "stride": stride,
        "n_points": n_points,
        "split_ratios": list(split_ratios),
    }
    return DatasetSplits(stack("train"), stack("validation"), stack("test"), curves, meta)


def reference_split(
    P: int = DEFAULT_WINDOW, stride: int = 1, noise: NoiseConfig = NoiseConfig(), n_points: int = 1000
) -> SplitData:
    """Windows from the three published surfaces, used as an extra held-out test bench."""
    rng = noise.rng()
    f, y, c = [], [], []
    for i, params in enumerate(REFERENCE_SURFACES.values()):
        feats, labels = extract_windows(
            discretize_curve(params, n_points), P, stride, noise, optimal_slip(params).lambda_star, rng
        )
        f.append(np.round(feats, FEATURE_DECIMALS))
        y.append(labels)
        c.append(np.full(len(labels), -1 - i, dtype=int))
    return SplitData(np.concatenate(f), np.concatenate(y), np.concatenate(c))


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def save_dataset(splits: DatasetSplits, path) -> None:
    """Write the samples CSV and a JSON sidecar next to it."""
    path = Path(path)
    width = 2 * splits.window
    header = ["curve_id", "split", "beta1", "beta2", "beta3", "label"] + [f"f{i}" for i in range(width)]
    feat_fmt = ",".join([f"%.{FEATURE_DECIMALS}f"] * width)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for name in SPLIT_NAMES:
            data = splits.split(name)
            for cid, label, row in zip(data.curve_ids, data.labels, data.features):
                p = splits.curves[int(cid)].params
                fh.write(
                    f"{int(cid)},{name},{p.beta1!r},{p.beta2!r},{p.beta3!r},{float(label)!r},"
                    + feat_fmt % tuple(row)
                    + "\n"
                )
    meta = dict(splits.meta)
    meta["counts"] = {name: len(splits.split(name)) for name in SPLIT_NAMES}
    meta["curves"] = {
        str(cid): {"origin": info.origin, "split": info.split, **asdict(info.params)}
        for cid, info in splits.curves.items()
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")


def _locate_bad_line(lines: list[str], ncols: int) -> str:
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.rstrip("\n").split(",")
        if len(cells) != ncols:
            return f"line {lineno}: expected {ncols} fields, found {len(cells)}"
        if cells[1] not in SPLIT_NAMES:
            return f"line {lineno}: unknown split {cells[1]!r}"
        try:
            int(cells[0])
            [float(c) for c in cells[2:]]
        except ValueError as exc:
            return f"line {lineno}: {exc}"
    return "unknown location"


def load_dataset(path) -> DatasetSplits:
    """Read a dataset written by :func:`save_dataset`; raises DatasetError with a line number on bad input."""
    path = Path(path)
    text = path.read_text()
    lines = text.splitlines(keepends=True)
    if not lines:
        raise DatasetError(f"{path}: line 1: missing header")
    header = lines[0].rstrip("\n").split(",")
    if header[:6] != ["curve_id", "split", "beta1", "beta2", "beta3", "label"]:
        raise DatasetError(f"{path}: line 1: unexpected header")
    width = len(header) - 6
    if width < 2 or width % 2 or header[6:] != [f"f{i}" for i in range(width)]:
        raise DatasetError(f"{path}: line 1: feature columns must be f0..f(2P-1)")
    ncols = len(header)
    if text and not text.endswith("\n"):
        raise DatasetError(f"{path}: line {len(lines)}: truncated final line")

    body = "".join(lines[1:])
    splits_col = []
    rows = np.zeros((0, ncols - 1))
    if body:
        try:
            split_text = [ln.split(",", 2)[1] for ln in lines[1:]]
            if any(s not in SPLIT_NAMES for s in split_text):
                raise ValueError("bad split")
            numeric = np.loadtxt(
                io.StringIO(body), delimiter=",", usecols=[0] + list(range(2, ncols)), ndmin=2
            )
            if numeric.shape[1] != ncols - 1:
                raise ValueError("column count")
            # loadtxt ignores extra trailing fields when usecols is given
            if any(ln.count(",") != ncols - 1 for ln in lines[1:]):
                raise ValueError("column count")
        except (ValueError, IndexError):
            raise DatasetError(f"{path}: {_locate_bad_line(lines, ncols)}") from None
        splits_col = split_text
        rows = numeric

    sidecar = sidecar_path(path)
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    curves = {}
    for cid, info in meta.get("curves", {}).items():
        params = FrictionParams(info["beta1"], info["beta2"], info["beta3"])
        curves[int(cid)] = CurveInfo(params, info["origin"], info["split"])

    split_arr = np.asarray(splits_col, dtype=object)
    parts = {}
    for name in SPLIT_NAMES:
        mask = split_arr == name if len(split_arr) else np.zeros(0, dtype=bool)
        sub = rows[mask] if len(rows) else rows
        ids = sub[:, 0].astype(int)
        parts[name] = SplitData(sub[:, 5:].copy(), sub[:, 4].copy(), ids)
        for cid, b1, b2, b3 in np.unique(sub[:, :4], axis=0):
            cid = int(cid)
            if cid not in curves:
                curves[cid] = CurveInfo(FrictionParams(b1, b2, b3), "unknown", name)

    meta = {k: v for k, v in meta.items() if k not in ("curves", "counts")}
    for name in SPLIT_NAMES:
        if len(parts[name]) == 0:
            parts[name] = SplitData.empty(width)
    return DatasetSplits(parts["train"], parts["validation"], parts["test"], curves, meta)
