"""Dataset ingestion, resizing, splitting, and synthetic spine generation.

Manifests are line-delimited JSON: one header record followed by one
record per image. Subject ids must never span splits. Images are 8-bit
grayscale PNGs, normalized to [0, 1] single-channel at load time.

The synthetic generator renders a vertical chain of quadrilateral
"vertebrae" with smooth correlated pose perturbations plus per-vertebra
jitter, and optionally renders one vertebra at near-background intensity.
A nearly invisible vertebra makes its corners ambiguous from the image
alone, so user clicks carry real information: exactly the regime an
interactive model must exploit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from interkey.keypoints import KeypointSet
from interkey.morphology import RelationSets

MANIFEST_VERSION = 1


@dataclass
class ManifestRecord:
    image: str                  # path relative to the manifest file
    coords: np.ndarray          # (K, 2)
    visibility: np.ndarray      # (K,)
    subject: str
    split: str                  # train | val | test

    def keypoints(self) -> KeypointSet:
        return KeypointSet(self.coords.copy(), self.visibility.copy())


@dataclass
class DatasetManifest:
    name: str
    k: int
    keypoint_names: list[str]
    image_size: tuple[int, int]          # (W, H) working size
    records: list[ManifestRecord] = field(default_factory=list)
    root: Path | None = None             # directory containing the manifest
    topology: RelationSets | None = None  # optional adjacency (edges / internal angles)

    def split_records(self, split: str) -> list[ManifestRecord]:
        return [r for r in self.records if r.split == split]

    def validate(self, check_images: bool = True) -> None:
        split_of_subject: dict[str, str] = {}
        missing: list[str] = []
        for rec in self.records:
            if rec.coords.shape != (self.k, 2):
                raise ValueError(f"record {rec.image}: expected {self.k} keypoints, "
                                 f"got {rec.coords.shape[0]}")
            if not np.isfinite(rec.coords).all():
                raise ValueError(f"record {rec.image}: non-finite coordinates")
            prev = split_of_subject.setdefault(rec.subject, rec.split)
            if prev != rec.split:
                raise ValueError(f"subject {rec.subject!r} appears in both "
                                 f"{prev!r} and {rec.split!r} splits")
            if check_images and self.root is not None:
                if not (self.root / rec.image).exists():
                    missing.append(rec.image)
        if missing:
            raise FileNotFoundError(f"missing image files: {missing}")


def save_manifest(manifest: DatasetManifest, path: Path) -> None:
    path = Path(path)
    with path.open("w") as f:
        header = {
            "type": "header",
            "version": MANIFEST_VERSION,
            "name": manifest.name,
            "k": manifest.k,
            "keypoint_names": manifest.keypoint_names,
            "image_size": list(manifest.image_size),
        }
        if manifest.topology is not None:
            header["topology"] = {
                "pairs": [list(p) for p in manifest.topology.pairs],
                "triples": [list(t) for t in manifest.topology.triples],
            }
        f.write(json.dumps(header) + "\n")
        for rec in manifest.records:
            f.write(json.dumps({
                "type": "record",
                "image": rec.image,
                "coords": np.asarray(rec.coords, dtype=float).round(4).tolist(),
                "visibility": np.asarray(rec.visibility, dtype=bool).tolist(),
                "subject": rec.subject,
                "split": rec.split,
            }) + "\n")


def load_manifest(path: Path, check_images: bool = True) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with path.open() as f:
        lines = [json.loads(line) for line in f if line.strip()]
    if not lines or lines[0].get("type") != "header":
        raise ValueError(f"{path}: first line must be a header record")
    header = lines[0]
    if header.get("version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version: {header.get('version')}")
    topology = None
    if "topology" in header:
        topology = RelationSets(
            pairs=[tuple(p) for p in header["topology"]["pairs"]],
            triples=[tuple(t) for t in header["topology"]["triples"]],
        )
    manifest = DatasetManifest(
        name=header["name"],
        k=int(header["k"]),
        keypoint_names=list(header["keypoint_names"]),
        image_size=tuple(header["image_size"]),
        root=path.parent,
        topology=topology,
    )
    for row in lines[1:]:
        manifest.records.append(ManifestRecord(
            image=row["image"],
            coords=np.asarray(row["coords"], dtype=np.float64),
            visibility=np.asarray(row.get("visibility", [True] * manifest.k), dtype=bool),
            subject=row["subject"],
            split=row["split"],
        ))
    manifest.validate(check_images=check_images)
    return manifest


def load_image(manifest: DatasetManifest, rec: ManifestRecord) -> np.ndarray:
    """Load one image as a (H, W) float array in [0, 1]."""
    img = Image.open(manifest.root / rec.image).convert("L")
    return np.asarray(img, dtype=np.float64) / 255.0


def resize_sample(image: np.ndarray, kps: KeypointSet,
                  target: tuple[int, int]) -> tuple[np.ndarray, KeypointSet]:
    """Resize an (H, W) image to target (W, H), scaling keypoints to match."""
    tw, th = target
    if tw <= 0 or th <= 0:
        raise ValueError("target dimensions must be positive")
    sh, sw = image.shape
    if sh == 0 or sw == 0:
        raise ValueError("zero-sized source image")
    pil = Image.fromarray((np.clip(image, 0, 1) * 255.0).astype(np.uint8))
    resized = np.asarray(pil.resize((tw, th), Image.BILINEAR), dtype=np.float64) / 255.0
    scale = np.array([tw / sw, th / sh])
    return resized, KeypointSet(kps.coords * scale, kps.visibility.copy())


@dataclass(frozen=True)
class SyntheticSpineConfig:
    num_vertebrae: int = 4
    corners: int = 4                   # corners per vertebra (quadrilateral)
    image_size: tuple[int, int] = (64, 64)   # (W, H)
    pose_variance: float = 3.0         # std of the global chain x-offset, px
    shape_variance: float = 0.5        # std of per-vertebra width/height, px
    deform_strength: float = 1.5       # std of the correlated chain wiggle, px
    vertebra_jitter: float = 2.0       # std of independent per-vertebra center jitter, px
    corner_jitter: float = 0.2         # std of independent per-corner jitter, px
    faint_prob: float = 0.9            # probability that one vertebra renders near-invisibly
    noise_sigma: float = 0.04          # additive pixel noise std
    num_samples: int = 200
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("pose_variance", "shape_variance", "deform_strength",
                     "vertebra_jitter", "corner_jitter", "noise_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.corners != 4:
            raise ValueError("only quadrilateral vertebrae are supported")

    @property
    def k(self) -> int:
        return self.num_vertebrae * self.corners


def spine_topology(num_vertebrae: int) -> RelationSets:
    """Edges and internal-angle triples of each quadrilateral vertebra."""
    pairs: list[tuple[int, int]] = []
    triples: list[tuple[int, int, int]] = []
    for v in range(num_vertebrae):
        base = 4 * v
        ring = [base, base + 1, base + 2, base + 3]  # tl, tr, br, bl
        for i in range(4):
            a, b = ring[i], ring[(i + 1) % 4]
            pairs.append((min(a, b), max(a, b)))
        for i in range(4):
            m, n, l = ring[(i - 1) % 4], ring[i], ring[(i + 1) % 4]
            triples.append((min(m, l), n, max(m, l)))
    return RelationSets(sorted(set(pairs)), sorted(set(triples)))


def _render_spine(corners_per_vertebra: list[np.ndarray], intensities: list[float],
                  size: tuple[int, int], noise_sigma: float,
                  rng: np.random.Generator) -> np.ndarray:
    w, h = size
    up = 4  # supersampling factor for smoother polygon edges
    img = Image.new("F", (w * up, h * up), 0.12)
    draw = ImageDraw.Draw(img)
    for quad, c in zip(corners_per_vertebra, intensities):
        draw.polygon([(x * up, y * up) for x, y in quad], fill=float(c))
    arr = np.asarray(img.resize((w, h), Image.BILINEAR), dtype=np.float64)
    arr += rng.normal(0.0, noise_sigma, size=arr.shape)
    return np.clip(arr, 0.0, 1.0)


def generate_synthetic_spine(cfg: SyntheticSpineConfig, out_dir: Path,
                             splits: tuple[float, float] = (0.7, 0.05)
                             ) -> DatasetManifest:
    """Generate a synthetic spine dataset under `out_dir`.

    Writes `manifest.jsonl` plus one PNG per sample; returns the loaded
    manifest. Deterministic for a fixed config (seed included).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    w, h = cfg.image_size
    v = cfg.num_vertebrae
    margin = max(6.0, 0.09 * h)
    spacing = (h - 2 * margin) / v
    base_w = 0.28 * w
    base_h = 0.55 * spacing

    names = [f"v{i}_{c}" for i in range(v) for c in ("tl", "tr", "br", "bl")]
    manifest = DatasetManifest(
        name="synthetic-spine", k=cfg.k, keypoint_names=names,
        image_size=cfg.image_size, root=out_dir,
        topology=spine_topology(v),
    )

    n_train = int(round(splits[0] * cfg.num_samples))
    n_val = max(1, int(round(splits[1] * cfg.num_samples)))

    for s in range(cfg.num_samples):
        global_dx = rng.normal(0.0, cfg.pose_variance)
        wiggle = np.cumsum(rng.normal(0.0, cfg.deform_strength, size=v))
        wiggle -= wiggle.mean()
        tilt = rng.normal(0.0, 0.06) + np.cumsum(rng.normal(0.0, 0.03, size=v))
        faint_idx = int(rng.integers(v)) if rng.random() < cfg.faint_prob else -1

        quads: list[np.ndarray] = []
        intensities: list[float] = []
        coords = np.zeros((cfg.k, 2))
        for i in range(v):
            cx = w / 2 + global_dx + wiggle[i] + rng.normal(0.0, cfg.vertebra_jitter)
            cy = margin + spacing * (i + 0.5) + rng.normal(0.0, 0.3 * cfg.vertebra_jitter)
            vw = base_w + rng.normal(0.0, cfg.shape_variance)
            vh = base_h + rng.normal(0.0, cfg.shape_variance)
            c, si = math.cos(tilt[i]), math.sin(tilt[i])
            local = np.array([[-vw / 2, -vh / 2], [vw / 2, -vh / 2],
                              [vw / 2, vh / 2], [-vw / 2, vh / 2]])
            rot = local @ np.array([[c, si], [-si, c]])
            quad = rot + np.array([cx, cy]) + rng.normal(0.0, cfg.corner_jitter, size=(4, 2))
            quads.append(quad)
            # A faint vertebra renders at exactly background intensity: its
            # corners are invisible and only inferable from context or clicks.
            intensities.append(0.12 if i == faint_idx else float(rng.uniform(0.5, 0.9)))
            coords[4 * i:4 * i + 4] = quad

        if not ((coords[:, 0] > 1) & (coords[:, 0] < w - 1)
                & (coords[:, 1] > 1) & (coords[:, 1] < h - 1)).all():
            raise ValueError("degenerate config: vertebra rendered out of frame; "
                             "reduce pose/deformation variances")

        arr = _render_spine(quads, intensities, cfg.image_size, cfg.noise_sigma, rng)
        fname = f"spine_{s:04d}.png"
        Image.fromarray((arr * 255.0).astype(np.uint8)).save(out_dir / fname)

        split = "train" if s < n_train else ("val" if s < n_train + n_val else "test")
        manifest.records.append(ManifestRecord(
            image=fname, coords=coords,
            visibility=np.ones(cfg.k, dtype=bool),
            subject=f"subj_{s:04d}", split=split,
        ))

    save_manifest(manifest, out_dir / "manifest.jsonl")
    return load_manifest(out_dir / "manifest.jsonl")


def convert_aasce(landmark_dir: Path, image_dir: Path, out_path: Path,
                  val_fraction: float = 0.2, seed: int = 0) -> DatasetManifest:
    """Convert SpineWeb-style landmark text files into a manifest.

    Each `<name>.txt` holds 68 x-coordinates then 68 y-coordinates (one
    value per line, normalized to [0, 1]) for `<name>` in `image_dir`.
    The train/val partition is a seeded random split by file; this mirrors
    common practice rather than any single canonical partition.
    """
    landmark_dir, image_dir, out_path = Path(landmark_dir), Path(image_dir), Path(out_path)
    files = sorted(landmark_dir.glob("*.txt"))
    if not files:
        raise FileNotFoundError(f"no landmark files in {landmark_dir}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(files))
    n_val = int(round(val_fraction * len(files)))
    val_set = {files[i].stem for i in order[:n_val]}

    manifest = DatasetManifest(
        name="aasce", k=68,
        keypoint_names=[f"vert{i // 4}_c{i % 4}" for i in range(68)],
        image_size=(256, 512), root=out_path.parent,
        topology=spine_topology(17),
    )
    for f in files:
        vals = np.loadtxt(f).reshape(-1)
        if vals.size != 136:
            raise ValueError(f"{f}: expected 136 values, got {vals.size}")
        img_path = _find_image(image_dir, f.stem)
        with Image.open(img_path) as im:
            iw, ih = im.size
        coords = np.stack([vals[:68] * iw, vals[68:] * ih], axis=1)
        manifest.records.append(ManifestRecord(
            image=str(img_path.relative_to(out_path.parent)),
            coords=coords, visibility=np.ones(68, dtype=bool),
            subject=f.stem, split="val" if f.stem in val_set else "train",
        ))
    save_manifest(manifest, out_path)
    return manifest


def _find_image(image_dir: Path, stem: str) -> Path:
    for ext in (".jpg", ".png", ".jpeg", ".bmp"):
        cand = image_dir / (stem + ext)
        if cand.exists():
            return cand
        cand = image_dir / stem  # stem may already carry the extension
        if cand.exists():
            return cand
    raise FileNotFoundError(f"no image for {stem} in {image_dir}")
