"""Labeled dataset generation: Gaussian sampling around the reference plate,
oracle labeling, JSONL persistence, and the 9/1 train/test split."""

from __future__ import annotations

import gzip
import json
from dataclasses import dataclass, field
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import oracle
from .errors import OracleFailureRate, PlateOptError
from .geometry import (
    PlateParams,
    ReferencePlate,
    make_reference_plate,
    perturb,
    realize,
    reference_params,
)

_REF: ReferencePlate | None = None


def default_reference() -> ReferencePlate:
    global _REF
    if _REF is None:
        _REF = make_reference_plate()
    return _REF


@dataclass(frozen=True)
class GenConfig:
    n: int = 3000
    sigma_outline: float = 0.05
    sigma_thickness: float = 0.05
    sigma_material: float = 0.05
    seed: int = 0
    resolution: float = oracle.DEFAULT_RESOLUTION
    workers: int = 0  # 0 = serial

    def sigma_dict(self) -> dict:
        return {
            "outline": self.sigma_outline,
            "thickness": self.sigma_thickness,
            "material": self.sigma_material,
        }


@dataclass
class SampleSet:
    """Dataset of (params, freqs) pairs plus generator metadata and split."""

    params: list[PlateParams]
    freqs: np.ndarray  # (n, 10) Hz
    meta: dict
    train_idx: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    test_idx: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    def __len__(self) -> int:
        return len(self.params)

    @property
    def has_split(self) -> bool:
        return len(self.train_idx) + len(self.test_idx) == len(self)

    def design_matrix(self) -> np.ndarray:
        return np.stack([p.to_vector() for p in self.params])

    def save(self, path: str) -> None:
        opener = gzip.open if str(path).endswith(".gz") else open
        with opener(path, "wt") as fh:
            meta = dict(self.meta)
            if self.has_split:
                meta["split"] = {
                    "train": self.train_idx.tolist(),
                    "test": self.test_idx.tolist(),
                }
            fh.write(json.dumps({"kind": "meta", **meta}) + "\n")
            for p, f in zip(self.params, self.freqs):
                fh.write(
                    json.dumps({"params": p.to_json_dict(), "freqs_hz": f.tolist()})
                    + "\n"
                )

    @classmethod
    def load(cls, path: str) -> "SampleSet":
        opener = gzip.open if str(path).endswith(".gz") else open
        params, freqs = [], []
        with opener(path, "rt") as fh:
            meta = json.loads(fh.readline())
            if meta.pop("kind", None) != "meta":
                raise PlateOptError(f"{path}: missing metadata header record")
            for line in fh:
                rec = json.loads(line)
                params.append(PlateParams.from_json_dict(rec["params"]))
                freqs.append(rec["freqs_hz"])
        split = meta.pop("split", None)
        out = cls(params=params, freqs=np.asarray(freqs), meta=meta)
        if split is not None:
            out.train_idx = np.asarray(split["train"], dtype=int)
            out.test_idx = np.asarray(split["test"], dtype=int)
        return out


def _label_one(args) -> tuple[list[float] | None, str | None]:
    vec, resolution = args
    try:
        params = PlateParams.from_vector(np.asarray(vec))
        plate = oracle.discretize(realize(params, default_reference()), resolution)
        return oracle.solve_modes(plate).freqs.tolist(), None
    except PlateOptError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _draw_params(ref, cfg: GenConfig, rng) -> PlateParams:
    """One feasible perturbed design (feasible at the geometry level)."""
    sig = cfg.sigma_dict()
    while True:
        p = reference_params()
        for fam in ("outline", "thickness", "material"):
            p = perturb(p, {fam}, sig[fam], rng)
        try:
            realize(p, ref)
            return p
        except PlateOptError:
            continue


def generate(
    ref: ReferencePlate | None = None, cfg: GenConfig = GenConfig()
) -> SampleSet:
    """Sample cfg.n designs around the reference and label with the oracle.

    Deterministic given cfg.seed regardless of worker count: draws are
    sequential, labeling is an order-preserving parallel map.
    """
    if cfg.n < 1:
        raise ValueError("n must be >= 1")
    ref = ref or default_reference()
    rng = np.random.default_rng(cfg.seed)

    params: list[PlateParams] = []
    freqs: list[list[float]] = []
    oracle_failures = 0
    max_failures = max(1, int(0.01 * cfg.n))

    while len(params) < cfg.n:
        need = cfg.n - len(params)
        batch = [_draw_params(ref, cfg, rng) for _ in range(need)]
        args = [(p.to_vector().tolist(), cfg.resolution) for p in batch]
        if cfg.workers and cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(_label_one, args, chunksize=8))
        else:
            results = [_label_one(a) for a in args]
        for p, (f, err) in zip(batch, results):
            if f is None:
                oracle_failures += 1
                if oracle_failures > max_failures:
                    raise OracleFailureRate(
                        f"oracle failed on >{max_failures} samples; last: {err}"
                    )
            else:
                params.append(p)
                freqs.append(f)

    meta = {
        "n": cfg.n,
        "sigma": cfg.sigma_dict(),
        "seed": cfg.seed,
        "resolution": cfg.resolution,
        "oracle_failures": oracle_failures,
        "version": 1,
    }
    return SampleSet(params=params, freqs=np.asarray(freqs), meta=meta)


def split(samples: SampleSet, seed: int) -> SampleSet:
    """Attach a shuffled 9/1 train/test split (in place, also returned)."""
    n = len(samples)
    if n < 10:
        raise ValueError("need at least 10 samples to split")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(0.9 * n))
    samples.train_idx = np.sort(perm[:n_train])
    samples.test_idx = np.sort(perm[n_train:])
    samples.meta["split_seed"] = seed
    return samples
