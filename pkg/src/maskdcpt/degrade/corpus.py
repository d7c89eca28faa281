"""Building, persisting and loading paired degradation corpora.

A corpus is a directory holding ``lq/`` and ``gt/`` 8-bit PNGs plus a
``manifest.json`` index with keys ``version``, ``seed``, ``counts``,
``param_ranges`` and ``entries``.  Paths inside the manifest are relative to
the manifest's directory, so corpora can be moved as a whole.
"""

from __future__ import annotations

import hashlib
import json
import os
from collections import Counter
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from PIL import Image

from ..errors import CorruptCorpusError, InvalidParameterError
from ..seeding import derive_seed
from .ops import DEFAULT_PARAM_RANGES, DegradationSpec, Family, PairedSample
from .textures import to_uint8

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


def read_image(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return arr / 255.0


def write_image(path, img) -> None:
    Image.fromarray(to_uint8(img)).save(path, format="PNG")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class CorpusEntry:
    id: str
    family: Family
    params: dict
    seed: int
    lq_path: str
    gt_path: str
    shape: tuple
    lq_sha256: str = ""
    gt_sha256: str = ""
    source: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "family": self.family.name,
            "params": self.params,
            "seed": self.seed,
            "lq": self.lq_path,
            "gt": self.gt_path,
            "shape": list(self.shape),
            "lq_sha256": self.lq_sha256,
            "gt_sha256": self.gt_sha256,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d) -> "CorpusEntry":
        return cls(
            id=d["id"],
            family=Family.parse(d["family"]),
            params=dict(d["params"]),
            seed=int(d["seed"]),
            lq_path=d["lq"],
            gt_path=d["gt"],
            shape=tuple(d["shape"]),
            lq_sha256=d.get("lq_sha256", ""),
            gt_sha256=d.get("gt_sha256", ""),
            source=d.get("source", ""),
        )

    @property
    def spec(self) -> DegradationSpec:
        return DegradationSpec(self.family, self.params, self.seed)


@dataclass
class CorpusManifest:
    root: Path
    entries: list[CorpusEntry]
    counts: dict[Family, int]
    seed: int
    version: int = MANIFEST_VERSION
    param_ranges: dict = field(default_factory=dict)

    @property
    def path(self) -> Path:
        return self.root / MANIFEST_NAME

    def to_json(self) -> str:
        doc = {
            "version": self.version,
            "seed": self.seed,
            "counts": {f.name: int(n) for f, n in sorted(self.counts.items())},
            "param_ranges": self.param_ranges,
            "entries": [e.to_dict() for e in self.entries],
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def read(cls, path) -> "CorpusManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise CorruptCorpusError(f"manifest not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise CorruptCorpusError(f"manifest is not valid JSON: {path}") from exc
        if doc.get("version") != MANIFEST_VERSION:
            raise CorruptCorpusError(f"unsupported manifest version {doc.get('version')!r}")
        entries = [CorpusEntry.from_dict(e) for e in doc["entries"]]
        counts = {Family.parse(k): int(v) for k, v in doc["counts"].items()}
        man = cls(path.parent, entries, counts, int(doc["seed"]), doc["version"], doc.get("param_ranges", {}))
        man.validate()
        return man

    def validate(self) -> None:
        hist = Counter(e.family for e in self.entries)
        for fam in set(hist) | set(self.counts):
            if hist.get(fam, 0) != self.counts.get(fam, 0):
                raise CorruptCorpusError(
                    f"{fam.name}: manifest count {self.counts.get(fam, 0)} but {hist.get(fam, 0)} entries"
                )
        for e in self.entries:
            for rel in (e.lq_path, e.gt_path):
                if not (self.root / rel).is_file():
                    raise CorruptCorpusError(f"entry {e.id}: missing file {rel}")


def _normalize_counts(counts: Mapping) -> dict[Family, int]:
    out = {}
    for k, v in counts.items():
        if int(v) < 0:
            raise InvalidParameterError(f"count for {k} must be >= 0")
        out[Family.parse(k)] = int(v)
    return out


def _normalize_ranges(param_ranges: Mapping | None) -> dict[Family, dict[str, tuple[float, float]]]:
    ranges = {f: dict(r) for f, r in DEFAULT_PARAM_RANGES.items()}
    for k, r in (param_ranges or {}).items():
        ranges[Family.parse(k)] = {name: tuple(v) for name, v in r.items()}
    return ranges


def draw_params(family: Family, ranges: Mapping[str, tuple], rng: np.random.Generator) -> dict:
    params = {}
    for name in sorted(ranges):
        lo, hi = ranges[name]
        if name == "kernel_length":
            odds = np.arange(int(lo) | 1, int(hi) + 1, 2)
            params[name] = int(rng.choice(odds))
        else:
            params[name] = float(rng.uniform(lo, hi))
    return params


def list_clean_images(clean_dir) -> list[Path]:
    d = Path(clean_dir)
    if not d.is_dir():
        raise InvalidParameterError(f"clean_dir {d} is not a directory")
    files = sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise InvalidParameterError(f"clean_dir {d} contains no readable images")
    return files


def build_corpus(
    clean_dir,
    out_dir,
    counts: Mapping,
    param_ranges: Mapping | None = None,
    seed: int = 0,
    workers: int = 1,
) -> CorpusManifest:
    """Synthesize ``counts[family]`` degraded pairs per family under ``out_dir``.

    Sample ``i`` (in family order, then index) uses the seed
    ``derive_seed(seed, i)`` for picking its clean source, drawing its
    parameters uniformly from ``param_ranges`` and realizing the degradation,
    so the result does not depend on ``workers``.
    """
    sources = list_clean_images(clean_dir)
    counts = _normalize_counts(counts)
    ranges = _normalize_ranges(param_ranges)
    root = Path(out_dir)
    try:
        (root / "lq").mkdir(parents=True, exist_ok=True)
        (root / "gt").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InvalidParameterError(f"cannot create corpus root {root}: {exc}") from exc
    if not os.access(root, os.W_OK):
        raise InvalidParameterError(f"corpus root {root} is not writable")

    jobs = []
    index = 0
    for fam in sorted(counts):
        for j in range(counts[fam]):
            jobs.append((index, fam, j))
            index += 1

    clean_cache: dict[int, np.ndarray] = {}

    def clean(k: int) -> np.ndarray:
        if k not in clean_cache:
            clean_cache[k] = read_image(sources[k]).astype(np.float64)
        return clean_cache[k]

    def make(job) -> CorpusEntry:
        i, fam, j = job
        sample_seed = derive_seed(seed, i)
        rng = np.random.default_rng(sample_seed)
        k = int(rng.integers(len(sources)))
        params = draw_params(fam, ranges[fam], rng)
        spec = DegradationSpec(fam, params, sample_seed)
        gt = clean(k)
        lq = spec.apply(gt)
        sid = f"{fam.abbrev}_{j:05d}"
        lq_rel, gt_rel = f"lq/{sid}.png", f"gt/{sid}.png"
        write_image(root / lq_rel, lq)
        write_image(root / gt_rel, gt)
        return CorpusEntry(
            sid, fam, params, sample_seed, lq_rel, gt_rel, tuple(gt.shape),
            _sha256(root / lq_rel), _sha256(root / gt_rel), sources[k].name,
        )

    # Warm the cache serially so worker threads only read it.
    for k in range(len(sources)):
        clean(k)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(make, jobs))
    else:
        entries = [make(job) for job in jobs]

    manifest = CorpusManifest(
        root=root,
        entries=entries,
        counts=counts,
        seed=int(seed),
        param_ranges={f.name: {n: list(v) for n, v in sorted(r.items())} for f, r in sorted(ranges.items())},
    )
    manifest.path.write_text(manifest.to_json())
    return manifest


class Corpus(Sequence):
    """Random-access view over a manifest; images are read lazily and checksummed."""

    def __init__(self, manifest: CorpusManifest, verify_checksums: bool = True):
        self.manifest = manifest
        self.verify_checksums = verify_checksums

    def __len__(self) -> int:
        return len(self.manifest.entries)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        e = self.manifest.entries[i]
        root = self.manifest.root
        for rel, digest in ((e.lq_path, e.lq_sha256), (e.gt_path, e.gt_sha256)):
            path = root / rel
            if not path.is_file():
                raise CorruptCorpusError(f"entry {e.id}: missing file {rel}")
            if self.verify_checksums and digest and _sha256(path) != digest:
                raise CorruptCorpusError(f"entry {e.id}: checksum mismatch for {rel}")
        lq, gt = read_image(root / e.lq_path), read_image(root / e.gt_path)
        if lq.shape != tuple(e.shape) or gt.shape != tuple(e.shape):
            raise CorruptCorpusError(f"entry {e.id}: shape mismatch, expected {tuple(e.shape)}")
        return PairedSample(lq, gt, e.spec, e.id)

    @property
    def labels(self) -> np.ndarray:
        return np.array([int(e.family) for e in self.manifest.entries], dtype=np.int64)

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.manifest.entries]

    def histogram(self) -> dict[Family, int]:
        return dict(Counter(e.family for e in self.manifest.entries))

    def subset(self, indices) -> "CorpusView":
        return CorpusView(self, list(indices))


class CorpusView(Sequence):
    """An index-subset of a corpus that behaves like a corpus."""

    def __init__(self, base, indices):
        self.base = base
        self.indices = list(indices)

    def __len__(self):
        return len(self.indices)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return self.base[self.indices[i]]

    @property
    def labels(self) -> np.ndarray:
        return self.base.labels[self.indices]

    @property
    def ids(self) -> list[str]:
        ids = self.base.ids
        return [ids[i] for i in self.indices]

    def subset(self, indices) -> "CorpusView":
        return CorpusView(self.base, [self.indices[i] for i in indices])


def load_corpus(manifest_path, verify_checksums: bool = True) -> Corpus:
    """Open a corpus; missing files or inconsistent counts raise CorruptCorpusError."""
    return Corpus(CorpusManifest.read(manifest_path), verify_checksums)
