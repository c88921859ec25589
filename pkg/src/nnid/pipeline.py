"""End-to-end dataset construction: crops, payloads, splits, manifests.

Every stage is a pure function of (inputs, config, global seed): mothers
are processed in sorted-name order, per-entry seeds derive from stable
hashes, and manifests serialize as sorted-key JSON, so reruns and any
worker-pool width produce byte-identical outputs.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .cost_model import DEFAULT_SIGMA, compute_cost_map
from .errors import CapacityError, DataError, DomainError
from .histogram import BinningSpec, build_histogram, kl_sym, search_binning
from .image import read_image, write_image
from .embedding import compute_change_probabilities, simulate_embedding
from .seeding import philox, stable_hash64
from .smart_crop import (
    center_crop_distance,
    random_crop_distances,
    smart_crop_2,
)

logger = logging.getLogger(__name__)

DEFAULT_SIZES = (256, 512, 1024, 2048)
DEFAULT_ALPHA_TABLE = {256: 0.4, 512: 0.3204, 1024: 0.28895}

# reference protocol split sizes at scale 1.0
DEFAULT_PAIRS = 12000
DEFAULT_TRAIN_IMAGES = 19200
DEFAULT_VAL_IMAGES = 4800
DEFAULT_TEST_PAIRS = 3000
DEFAULT_PAIRS_PER_DIM = 4000


@dataclass
class ManifestEntry:
    """One cover/stego pair traced back to its mother image."""

    entry_id: str
    mother_id: str
    crop_x: int
    crop_y: int
    crop_size: int
    cover_path: str
    distance: float
    distance_recomputed: float | None = None
    stego_path: str | None = None
    alpha: float | None = None
    seed: int | None = None
    realized_bits: float | None = None
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "mother_id": self.mother_id,
            "crop_x": self.crop_x,
            "crop_y": self.crop_y,
            "crop_size": self.crop_size,
            "cover_path": self.cover_path,
            "distance": self.distance,
            "distance_recomputed": self.distance_recomputed,
            "stego_path": self.stego_path,
            "alpha": self.alpha,
            "seed": self.seed,
            "realized_bits": self.realized_bits,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestEntry":
        return cls(
            entry_id=d["entry_id"],
            mother_id=d["mother_id"],
            crop_x=int(d["crop_x"]),
            crop_y=int(d["crop_y"]),
            crop_size=int(d["crop_size"]),
            cover_path=d["cover_path"],
            distance=float(d["distance"]),
            distance_recomputed=d.get("distance_recomputed"),
            stego_path=d.get("stego_path"),
            alpha=d.get("alpha"),
            seed=d.get("seed"),
            realized_bits=d.get("realized_bits"),
            flags=list(d.get("flags", [])),
        )


@dataclass
class DatasetManifest:
    """Declarative record of one dataset: entries, splits, seeds, skips.

    Entry paths are stored relative to the manifest file's directory, so a
    dataset tree can be moved or compared byte-for-byte across locations.
    ``root`` tracks that directory in memory and is never serialized.
    """

    name: str
    dim_policy: str  # "fixed" or "mixed"
    size: int | None
    entries: list[ManifestEntry]
    splits: dict[str, list[int]] = field(
        default_factory=lambda: {"train": [], "val": [], "test": []}
    )
    global_seed: int = 0
    tool_version: str = __version__
    skipped_too_small: int = 0
    skipped_undecodable: list[str] = field(default_factory=list)
    root: Path | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.dim_policy not in ("fixed", "mixed"):
            raise DomainError(f"dim_policy must be fixed|mixed, got {self.dim_policy}")
        self.validate_splits()

    def resolve(self, rel_path: str) -> Path:
        """Entry path -> filesystem path, anchored at the manifest root."""
        p = Path(rel_path)
        if self.root is None or p.is_absolute():
            return p
        return self.root / p

    def validate_splits(self) -> None:
        """All-empty splits mean unassigned; otherwise disjoint + exhaustive."""
        idx = [i for part in ("train", "val", "test") for i in self.splits.get(part, [])]
        if not idx:
            return
        if len(set(idx)) != len(idx):
            raise DomainError("split index lists overlap")
        if set(idx) != set(range(len(self.entries))):
            raise DomainError("splits must cover every entry exactly once")
        if self.dim_policy == "fixed":
            sizes = {e.crop_size for e in self.entries}
            if len(sizes) > 1:
                raise DomainError(f"fixed-dim manifest holds sizes {sorted(sizes)}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dim_policy": self.dim_policy,
            "size": self.size,
            "entries": [e.to_dict() for e in self.entries],
            "splits": {k: list(v) for k, v in sorted(self.splits.items())},
            "global_seed": self.global_seed,
            "tool_version": self.tool_version,
            "skipped_too_small": self.skipped_too_small,
            "skipped_undecodable": list(self.skipped_undecodable),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        return cls(
            name=d["name"],
            dim_policy=d["dim_policy"],
            size=d.get("size"),
            entries=[ManifestEntry.from_dict(e) for e in d["entries"]],
            splits={k: [int(i) for i in v] for k, v in d["splits"].items()},
            global_seed=int(d["global_seed"]),
            tool_version=d["tool_version"],
            skipped_too_small=int(d.get("skipped_too_small", 0)),
            skipped_undecodable=list(d.get("skipped_undecodable", [])),
        )

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n")
        self.root = path.parent

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        path = Path(path)
        try:
            manifest = cls.from_dict(json.loads(path.read_text()))
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"malformed manifest {path}: {exc}") from exc
        manifest.root = path.parent
        return manifest


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs shared by the construction stages."""

    sigma: float = DEFAULT_SIGMA
    stride: int = 1
    search_bins: int = 64
    global_seed: int = 0
    threads: int = 1
    recompute_final: bool = False

    def binning(self) -> BinningSpec:
        return search_binning(self.search_bins)


def list_mothers(mother_dir: str | Path) -> list[Path]:
    """Candidate mother images in deterministic (sorted-name) order."""
    mother_dir = Path(mother_dir)
    if not mother_dir.is_dir():
        raise DataError(f"mother directory not found: {mother_dir}")
    exts = {".pgm", ".png"}
    return sorted(p for p in mother_dir.iterdir() if p.suffix.lower() in exts)


def _process_mother(
    path: Path, sizes: tuple[int, ...], out_dir: Path, config: PipelineConfig
) -> dict:
    """Cost map once, then one smart crop + cover file per feasible size."""
    mother_id = path.stem
    try:
        pixels = read_image(path)
    except DataError as exc:
        logger.warning("skipping undecodable mother %s: %s", path, exc)
        return {"mother_id": mother_id, "undecodable": True, "entries": {}}
    costs = compute_cost_map(pixels, sigma=config.sigma)
    spec = config.binning()
    result: dict = {"mother_id": mother_id, "undecodable": False, "entries": {}}
    for size in sizes:
        if size > costs.height or size > costs.width:
            result["entries"][size] = None
            continue
        crop = smart_crop_2(costs, size, stride=config.stride, spec=spec)
        cover = pixels[crop.y : crop.y + size, crop.x : crop.x + size]
        cover_rel = f"cover/{mother_id}.pgm"
        write_image(out_dir / f"UNI_{size}" / cover_rel, cover)
        entry = ManifestEntry(
            entry_id=f"{mother_id}_{size}",
            mother_id=mother_id,
            crop_x=crop.x,
            crop_y=crop.y,
            crop_size=size,
            cover_path=cover_rel,
            distance=crop.distance,
        )
        if config.recompute_final:
            mother_hist = build_histogram(costs.costs, spec)
            crop_costs = compute_cost_map(cover, sigma=config.sigma)
            entry.distance_recomputed = kl_sym(
                mother_hist, build_histogram(crop_costs.costs, spec)
            )
        result["entries"][size] = entry
    return result


def build_nnid(
    mother_dir: str | Path,
    sizes: tuple[int, ...] = DEFAULT_SIZES,
    out_dir: str | Path = "nnid-out",
    config: PipelineConfig = PipelineConfig(),
) -> dict[int, DatasetManifest]:
    """Construct one fixed-size dataset per requested crop size.

    Each mother's cost map is computed once and searched at every size.
    Undecodable images are skipped with a manifest note; too-small
    (image, size) pairs are skipped and counted.
    """
    sizes = tuple(sorted(set(int(s) for s in sizes)))
    if not sizes:
        raise DomainError("no crop sizes requested")
    out_dir = Path(out_dir)
    mothers = list_mothers(mother_dir)
    worker = lambda p: _process_mother(p, sizes, out_dir, config)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(worker, mothers))
    else:
        results = [worker(p) for p in mothers]
    results.sort(key=lambda r: r["mother_id"])

    manifests: dict[int, DatasetManifest] = {}
    for size in sizes:
        entries = []
        skipped_small = 0
        undecodable = []
        for r in results:
            if r["undecodable"]:
                undecodable.append(r["mother_id"])
                continue
            entry = r["entries"][size]
            if entry is None:
                skipped_small += 1
            else:
                entries.append(entry)
        manifest = DatasetManifest(
            name=f"UNI_{size}",
            dim_policy="fixed",
            size=size,
            entries=entries,
            global_seed=config.global_seed,
            skipped_too_small=skipped_small,
            skipped_undecodable=undecodable,
        )
        manifest.save(out_dir / f"UNI_{size}" / "manifest.json")
        manifests[size] = manifest
    return manifests


def scaled_split_counts(scale: float = 1.0) -> tuple[int, int, int, int]:
    """(pairs, train_images, val_images, test_pairs) at a given scale.

    Image counts stay even so they always decompose into pairs.
    """
    if scale <= 0:
        raise DomainError(f"scale must be positive, got {scale}")
    pairs = max(1, round(DEFAULT_PAIRS * scale))
    train_images = 2 * round(DEFAULT_TRAIN_IMAGES * scale / 2)
    train_images = min(max(train_images, 0), 2 * pairs)
    val_images = 2 * pairs - train_images
    test_pairs = round(DEFAULT_TEST_PAIRS * scale)
    return pairs, train_images, val_images, test_pairs


def assemble_splits(
    manifest: DatasetManifest,
    pairs: int = DEFAULT_PAIRS,
    train_images: int = DEFAULT_TRAIN_IMAGES,
    val_images: int = DEFAULT_VAL_IMAGES,
    test_pairs: int = DEFAULT_TEST_PAIRS,
    seed: int | None = None,
) -> DatasetManifest:
    """Seeded shuffle into train/val/test; pairs never straddle splits.

    Splits are lists of entry indices; an entry carries both images of a
    pair, so image counts are twice the entry counts.
    """
    if train_images + val_images != 2 * pairs:
        raise DomainError(
            f"train ({train_images}) + val ({val_images}) images must equal "
            f"2 * pairs ({2 * pairs})"
        )
    if train_images % 2 or val_images % 2:
        raise DomainError("image counts must be even (cover/stego pairs)")
    needed = pairs + test_pairs
    if len(manifest.entries) < needed:
        raise CapacityError(
            f"need {needed} entries for the requested splits, manifest has "
            f"{len(manifest.entries)} (short by {needed - len(manifest.entries)})"
        )
    if seed is None:
        seed = manifest.global_seed
    rng = philox(stable_hash64(seed, manifest.name, "splits"))
    order = rng.permutation(len(manifest.entries)).tolist()
    n_train = train_images // 2
    n_val = val_images // 2
    splits = {
        "train": sorted(order[:n_train]),
        "val": sorted(order[n_train : n_train + n_val]),
        "test": sorted(order[n_train + n_val : n_train + n_val + test_pairs]),
    }
    leftover = order[n_train + n_val + test_pairs :]
    if leftover:
        # unassigned entries would break exhaustiveness; drop them instead
        keep = sorted(order[: n_train + n_val + test_pairs])
        remap = {old: new for new, old in enumerate(keep)}
        entries = [manifest.entries[i] for i in keep]
        splits = {k: sorted(remap[i] for i in v) for k, v in splits.items()}
        out = replace(manifest, entries=entries, splits=splits)
    else:
        out = replace(manifest, splits=splits)
    out.validate_splits()
    return out


def build_multi(
    uni_manifests: list[DatasetManifest],
    pairs_per_dim: int = DEFAULT_PAIRS_PER_DIM,
    seed: int = 0,
    train_images: int | None = None,
    val_images: int | None = None,
    out_root: str | Path | None = None,
) -> DatasetManifest:
    """Mixed-dimension dataset: a seeded selection of pairs from each UNI.

    Defaults select 4000 pairs per source and split the combined entries
    19200/4800 train/val images (scaled proportionally when the selection
    is smaller). ``out_root`` is the directory the combined manifest will
    live in; entry paths are rewritten relative to it.
    """
    if len(uni_manifests) != 3:
        raise DomainError(f"expected 3 source manifests, got {len(uni_manifests)}")
    if pairs_per_dim < 1:
        raise DomainError("pairs_per_dim must be >= 1")
    combined: list[ManifestEntry] = []
    for m in uni_manifests:
        pool_idx = sorted(m.splits.get("train", []) + m.splits.get("val", []))
        pool = [m.entries[i] for i in pool_idx] if pool_idx else list(m.entries)
        if len(pool) < pairs_per_dim:
            raise CapacityError(
                f"{m.name} has {len(pool)} eligible pairs, need {pairs_per_dim}"
            )
        rng = philox(stable_hash64(seed, "multi-select", m.name))
        chosen = sorted(rng.permutation(len(pool))[:pairs_per_dim].tolist())
        for i in chosen:
            combined.append(_rebase_entry(pool[i], m.root, out_root))

    total_pairs = len(combined)
    if train_images is None or val_images is None:
        train_images = round(2 * total_pairs * DEFAULT_TRAIN_IMAGES / (2 * DEFAULT_PAIRS))
        if train_images % 2:
            train_images += 1
        val_images = 2 * total_pairs - train_images
    manifest = DatasetManifest(
        name="MULTI",
        dim_policy="mixed",
        size=None,
        entries=combined,
        global_seed=seed,
        root=Path(out_root) if out_root is not None else None,
    )
    out = assemble_splits(
        manifest,
        pairs=total_pairs,
        train_images=train_images,
        val_images=val_images,
        test_pairs=0,
        seed=seed,
    )
    return out


def _rebase_entry(
    entry: ManifestEntry, src_root: Path | None, out_root: str | Path | None
) -> ManifestEntry:
    """Rewrite an entry's file paths relative to a new manifest directory."""

    def rebase(rel: str | None) -> str | None:
        if rel is None:
            return None
        src = (src_root / rel) if src_root is not None else Path(rel)
        if out_root is None:
            return str(src)
        return Path(os.path.relpath(src, out_root)).as_posix()

    return replace(
        entry, cover_path=rebase(entry.cover_path), stego_path=rebase(entry.stego_path)
    )


def _embed_entry(
    entry: ManifestEntry,
    alpha: float,
    global_seed: int,
    sigma: float,
    root: Path,
    stego_rel: str,
) -> ManifestEntry:
    cover = read_image(root / entry.cover_path)
    seed = stable_hash64(global_seed, entry.mother_id, entry.crop_size, "embed")
    entry = replace(entry, alpha=alpha, seed=seed)
    if alpha == 0.0:
        stego = cover
        entry.realized_bits = 0.0
    else:
        costs = compute_cost_map(cover, sigma=sigma)
        try:
            plan = compute_change_probabilities(costs, alpha * cover.size)
        except CapacityError as exc:
            entry.flags = entry.flags + ["infeasible_alpha"]
            logger.warning("entry %s: %s", entry.entry_id, exc)
            return entry
        stego = simulate_embedding(cover, plan, seed)
        entry.realized_bits = plan.realized_bits
    rel = f"{stego_rel}/{entry.entry_id}.pgm"
    write_image(root / rel, stego)
    entry.stego_path = rel
    return entry


def embed_dataset(
    manifest: DatasetManifest,
    alpha_table: dict[int, float] | None = None,
    seed: int | None = None,
    sigma: float = DEFAULT_SIGMA,
    stego_subdir: str = "stego",
    threads: int = 1,
) -> DatasetManifest:
    """Embed every cover at its dimension's payload; returns the updated manifest.

    Each entry's change probabilities come from the cover's own cost map;
    the per-entry seed is a stable hash of (seed, mother id, size, role),
    so partial rebuilds and reordering cannot change any stego byte.
    Entries with an infeasible payload are flagged and skipped.
    """
    alpha_table = dict(DEFAULT_ALPHA_TABLE if alpha_table is None else alpha_table)
    if seed is None:
        seed = manifest.global_seed
    dims = {e.crop_size for e in manifest.entries}
    missing = sorted(d for d in dims if d not in alpha_table)
    if missing:
        raise DataError(f"no payload configured for dimensions {missing}")
    root = manifest.root if manifest.root is not None else Path(".")

    def worker(entry: ManifestEntry) -> ManifestEntry:
        return _embed_entry(
            entry, alpha_table[entry.crop_size], seed, sigma, root, stego_subdir
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            new_entries = list(pool.map(worker, manifest.entries))
    else:
        new_entries = [worker(e) for e in manifest.entries]
    # entry order (and with it split index mapping) is preserved
    return replace(manifest, entries=new_entries)


def difficulty_report(
    manifest: DatasetManifest,
    mother_dir: str | Path | None = None,
    baselines: int = 0,
    spec: BinningSpec | None = None,
    sigma: float = DEFAULT_SIGMA,
    seed: int = 0,
) -> dict:
    """Distance statistics of a dataset, optionally against crop baselines.

    The smart-crop distances come from the manifest. With ``mother_dir``
    and ``baselines`` > 0, each mother's cost map is recomputed to score
    the center crop and ``baselines`` random crops for comparison.
    """
    spec = spec or search_binning()
    dists = np.array([e.distance for e in manifest.entries], dtype=np.float64)
    report: dict = {
        "name": manifest.name,
        "entries": len(manifest.entries),
        "search_bins": spec.bin_count,
        "distance": _stats(dists),
        "alpha": sorted({e.alpha for e in manifest.entries if e.alpha is not None}),
        "flagged": sum(1 for e in manifest.entries if e.flags),
    }
    if mother_dir is not None and baselines > 0:
        center = []
        rand_means = []
        for e in manifest.entries:
            mother_path = _find_mother(Path(mother_dir), e.mother_id)
            costs = compute_cost_map(read_image(mother_path), sigma=sigma)
            center.append(center_crop_distance(costs, e.crop_size, spec))
            rand = random_crop_distances(
                costs,
                e.crop_size,
                baselines,
                stable_hash64(seed, e.entry_id, "baseline"),
                spec,
            )
            rand_means.append(float(rand.mean()))
        report["baselines"] = {
            "center_crop": _stats(np.array(center)),
            "random_crop_mean": _stats(np.array(rand_means)),
            "random_crops_per_image": baselines,
        }
    return report


def _find_mother(mother_dir: Path, mother_id: str) -> Path:
    for ext in (".pgm", ".png"):
        p = mother_dir / f"{mother_id}{ext}"
        if p.is_file():
            return p
    raise DataError(f"mother image {mother_id} not found under {mother_dir}")


def _stats(values: np.ndarray) -> dict:
    if values.size == 0:
        return {"count": 0}
    return {
        "count": int(values.size),
        "mean": float(values.mean()),
        "min": float(values.min()),
        "max": float(values.max()),
        "median": float(np.median(values)),
    }
