"""YAML manifest per sequence: the durable record of a filtering run plus
scene tags, and tag-based retrieval across a directory of manifests.

Key order is fixed at construction so identical manifests serialize to
identical bytes; writes go through a temp file and an atomic rename.
"""

import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping

import yaml

from .errors import ConfigError, ManifestError, ValidationError
from .filtering import FilterConfig, FilterOutcome, VolStats
from .scenes import SceneCategory, SequenceCategorization

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MANIFEST_SUFFIX = ".manifest.yaml"

ROLES = ("train", "test")
REMOVAL_STAGES = ("none", "vol", "ssim")
_CATEGORY_NAMES = {cat.value for cat in SceneCategory}


@dataclass
class FrameRecord:
    frame_id: str
    path: str
    vol: float
    role: str
    removal_stage: str
    ssim: float | None = None
    scene: str = SceneCategory.UNKNOWN.value

    def to_dict(self) -> dict:
        d = {
            "frame_id": self.frame_id,
            "path": self.path,
            "vol": float(self.vol),
            "role": self.role,
            "removal_stage": self.removal_stage,
        }
        if self.ssim is not None:
            d["ssim"] = float(self.ssim)
        d["scene"] = self.scene
        return d


@dataclass
class SequenceManifest:
    sequence_id: str
    created_at: str
    config: dict
    frame_count: int
    vol_stats: VolStats
    frames: list[FrameRecord]
    sequence_scene: str = SceneCategory.UNKNOWN.value
    histogram: dict[str, float] = field(default_factory=dict)
    removal_ratio_vol: float = 0.0
    removal_ratio_ssim: float = 0.0
    elapsed_seconds: float = 0.0
    mean_objectness: float | None = None
    errors: list[dict] = field(default_factory=list)

    def validate(self) -> None:
        if not self.sequence_id:
            raise ValidationError("sequence_id", "must be a non-empty string")
        _parse_timestamp(self.created_at)
        if self.frame_count != len(self.frames):
            raise ValidationError(
                "frame_count",
                f"is {self.frame_count} but frames list has {len(self.frames)} entries",
            )
        if not self.vol_stats.min <= self.vol_stats.median <= self.vol_stats.max:
            raise ValidationError(
                "vol_stats", f"min <= median <= max violated: {self.vol_stats}"
            )
        for ratio_key in ("removal_ratio_vol", "removal_ratio_ssim"):
            ratio = getattr(self, ratio_key)
            if not 0.0 <= ratio <= 1.0:
                raise ValidationError(ratio_key, f"must be in [0, 1], got {ratio}")
        if self.elapsed_seconds < 0:
            raise ValidationError("elapsed_seconds", "must be >= 0")
        if self.sequence_scene not in _CATEGORY_NAMES:
            raise ValidationError("sequence_scene", f"unknown category {self.sequence_scene!r}")

        total = sum(self.histogram.values())
        if self.histogram and abs(total - 100.0) > 0.01:
            raise ValidationError("histogram", f"percentages sum to {total}, expected 100")
        for name in self.histogram:
            if name not in _CATEGORY_NAMES:
                raise ValidationError("histogram", f"unknown category {name!r}")

        stage_counts = {"vol": 0, "ssim": 0}
        for i, fr in enumerate(self.frames):
            key = f"frames[{i}]"
            if fr.role not in ROLES:
                raise ValidationError(f"{key}.role", f"must be one of {ROLES}, got {fr.role!r}")
            if fr.removal_stage not in REMOVAL_STAGES:
                raise ValidationError(
                    f"{key}.removal_stage",
                    f"must be one of {REMOVAL_STAGES}, got {fr.removal_stage!r}",
                )
            expected_role = "train" if fr.removal_stage == "none" else "test"
            if fr.role != expected_role:
                raise ValidationError(
                    f"{key}.role",
                    f"removal_stage={fr.removal_stage} requires role={expected_role}, got {fr.role}",
                )
            if (fr.ssim is not None) != (fr.removal_stage == "ssim"):
                raise ValidationError(
                    f"{key}.ssim", "must be present exactly when removal_stage=ssim"
                )
            if fr.scene not in _CATEGORY_NAMES:
                raise ValidationError(f"{key}.scene", f"unknown category {fr.scene!r}")
            if fr.removal_stage in stage_counts:
                stage_counts[fr.removal_stage] += 1
        if self.frames:
            for stage, ratio_key in (("vol", "removal_ratio_vol"), ("ssim", "removal_ratio_ssim")):
                expected = stage_counts[stage] / self.frame_count
                if abs(getattr(self, ratio_key) - expected) > 1e-6:
                    raise ValidationError(
                        ratio_key,
                        f"is {getattr(self, ratio_key)} but {stage_counts[stage]} of "
                        f"{self.frame_count} frames have removal_stage={stage}",
                    )

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "sequence_id": self.sequence_id,
            "created_at": self.created_at,
            "config": dict(self.config),
            "frame_count": self.frame_count,
            "vol_stats": {
                "min": float(self.vol_stats.min),
                "max": float(self.vol_stats.max),
                "median": float(self.vol_stats.median),
            },
            "removal_ratio_vol": float(self.removal_ratio_vol),
            "removal_ratio_ssim": float(self.removal_ratio_ssim),
            "elapsed_seconds": float(self.elapsed_seconds),
            "sequence_scene": self.sequence_scene,
            "histogram": {k: float(v) for k, v in self.histogram.items()},
        }
        if self.mean_objectness is not None:
            d["mean_objectness"] = float(self.mean_objectness)
        d["frames"] = [fr.to_dict() for fr in self.frames]
        if self.errors:
            d["errors"] = [dict(e) for e in self.errors]
        return d


def _parse_timestamp(value) -> None:
    if not isinstance(value, str):
        raise ValidationError("created_at", f"must be a string, got {type(value).__name__}")
    try:
        datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError:
        raise ValidationError("created_at", f"not an RFC 3339 timestamp: {value!r}") from None


def utc_timestamp(now: datetime | None = None) -> str:
    now = now or datetime.now(timezone.utc)
    return now.astimezone(timezone.utc).replace(microsecond=0).isoformat().replace("+00:00", "Z")


def _require(doc: Mapping, key: str, kind, context: str = ""):
    label = f"{context}{key}"
    if key not in doc:
        raise ValidationError(label, "missing")
    value = doc[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ValidationError(label, f"must be a number, got {type(value).__name__}")
        return float(value)
    if not isinstance(value, kind):
        raise ValidationError(label, f"must be {kind.__name__}, got {type(value).__name__}")
    return value


def _frame_from_dict(doc: Mapping, index: int) -> FrameRecord:
    if not isinstance(doc, Mapping):
        raise ValidationError(f"frames[{index}]", "must be a mapping")
    ctx = f"frames[{index}]."
    ssim_value = doc.get("ssim")
    if ssim_value is not None:
        ssim_value = float(_require(doc, "ssim", float, ctx))
    return FrameRecord(
        frame_id=str(_require(doc, "frame_id", (str, int), ctx)),
        path=_require(doc, "path", str, ctx),
        vol=_require(doc, "vol", float, ctx),
        role=_require(doc, "role", str, ctx),
        removal_stage=_require(doc, "removal_stage", str, ctx),
        ssim=ssim_value,
        scene=_require(doc, "scene", str, ctx),
    )


def manifest_from_dict(doc) -> SequenceManifest:
    if not isinstance(doc, Mapping):
        raise ManifestError(f"manifest must be a mapping, got {type(doc).__name__}")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError("schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")
    stats_doc = _require(doc, "vol_stats", Mapping)
    stats = VolStats(
        min=_require(stats_doc, "min", float, "vol_stats."),
        max=_require(stats_doc, "max", float, "vol_stats."),
        median=_require(stats_doc, "median", float, "vol_stats."),
    )
    frames_doc = _require(doc, "frames", list)
    frames = [_frame_from_dict(fr, i) for i, fr in enumerate(frames_doc)]
    histogram = doc.get("histogram") or {}
    if not isinstance(histogram, Mapping):
        raise ValidationError("histogram", "must be a mapping")
    mean_obj = doc.get("mean_objectness")
    manifest = SequenceManifest(
        sequence_id=str(_require(doc, "sequence_id", (str, int))),
        created_at=_require(doc, "created_at", str),
        config=dict(_require(doc, "config", Mapping)),
        frame_count=_require(doc, "frame_count", int),
        vol_stats=stats,
        frames=frames,
        sequence_scene=_require(doc, "sequence_scene", str),
        histogram={str(k): float(v) for k, v in histogram.items()},
        removal_ratio_vol=_require(doc, "removal_ratio_vol", float),
        removal_ratio_ssim=_require(doc, "removal_ratio_ssim", float),
        elapsed_seconds=_require(doc, "elapsed_seconds", float),
        mean_objectness=None if mean_obj is None else float(mean_obj),
        errors=list(doc.get("errors") or []),
    )
    manifest.validate()
    return manifest


def build_manifest(
    sequence_id: str,
    config: FilterConfig,
    outcome: FilterOutcome,
    categorization: SequenceCategorization | None = None,
    mean_objectness: float | None = None,
    created_at: str | None = None,
) -> SequenceManifest:
    """Assemble the manifest for one run. ``created_at`` is injectable so
    repeated builds can be byte-identical."""
    removed_vol = dict(outcome.removed_by_vol)
    removed_ssim = dict(outcome.removed_by_ssim)
    per_frame = categorization.per_frame if categorization else {}

    frames = []
    for q in outcome.scores:
        fid = q.frame.frame_id
        if fid in removed_vol:
            role, stage, ssim_value = "test", "vol", None
        elif fid in removed_ssim:
            role, stage, ssim_value = "test", "ssim", removed_ssim[fid]
        else:
            role, stage, ssim_value = "train", "none", None
        scene = per_frame.get(fid, SceneCategory.UNKNOWN)
        frames.append(
            FrameRecord(
                frame_id=fid,
                path=str(q.frame.path),
                vol=q.vol,
                role=role,
                removal_stage=stage,
                ssim=ssim_value,
                scene=scene.value,
            )
        )

    if categorization is not None:
        sequence_scene = categorization.final.value
        histogram = {cat.value: pct for cat, pct in categorization.histogram.items()}
    else:
        sequence_scene = SceneCategory.UNKNOWN.value
        histogram = {cat.value: (100.0 if cat is SceneCategory.UNKNOWN else 0.0) for cat in SceneCategory}

    return SequenceManifest(
        sequence_id=sequence_id,
        created_at=created_at or utc_timestamp(),
        config=config.snapshot(),
        frame_count=len(frames),
        vol_stats=outcome.vol_stats,
        frames=frames,
        sequence_scene=sequence_scene,
        histogram=histogram,
        removal_ratio_vol=outcome.removal_ratio_vol,
        removal_ratio_ssim=outcome.removal_ratio_ssim,
        elapsed_seconds=outcome.elapsed_seconds,
        mean_objectness=mean_objectness,
        errors=[
            {"frame_id": e.frame_id, "path": e.path, "message": e.message}
            for e in outcome.errors
        ],
    )


def manifest_path(manifest_dir: str | Path, sequence_id: str) -> Path:
    return Path(manifest_dir) / f"{sequence_id}{MANIFEST_SUFFIX}"


def write_manifest(m: SequenceManifest, path: str | Path) -> None:
    """Validate, then write atomically (temp file + rename)."""
    m.validate()
    path = Path(path)
    text = yaml.safe_dump(m.to_dict(), sort_keys=False, default_flow_style=False)
    tmp = path.parent / f".{path.name}.{os.getpid()}.tmp"
    tmp.write_text(text)
    os.replace(tmp, path)


def read_manifest(path: str | Path) -> SequenceManifest:
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ManifestError(f"cannot parse {path}: {exc}") from None
    return manifest_from_dict(doc)


@dataclass
class Query:
    scenes: set[SceneCategory]
    role: str | None = None
    min_vol: float | None = None

    def validate(self) -> None:
        if not self.scenes:
            raise ConfigError("query needs at least one scene")
        if self.role is not None and self.role not in ROLES:
            raise ConfigError(f"role must be one of {ROLES}, got {self.role!r}")

    def matches(self, fr: FrameRecord) -> bool:
        if fr.scene not in {c.value for c in self.scenes}:
            return False
        if self.role is not None and fr.role != self.role:
            return False
        if self.min_vol is not None and fr.vol < self.min_vol:
            return False
        return True


@dataclass(frozen=True)
class QueryHit:
    sequence_id: str
    frame_id: str
    path: str
    scene: str


def iter_manifests(manifest_dir: str | Path) -> Iterable[Path]:
    return sorted(Path(manifest_dir).glob(f"*{MANIFEST_SUFFIX}"))


def query(manifest_dir: str | Path, q: Query) -> list[QueryHit]:
    """All frames matching the query across every manifest in the directory,
    ordered by sequence then frame position. Unreadable manifests are
    logged and skipped."""
    q.validate()
    hits: list[QueryHit] = []
    for path in iter_manifests(manifest_dir):
        try:
            m = read_manifest(path)
        except (OSError, ManifestError, ValidationError) as exc:
            log.warning("skipping unreadable manifest %s: %s", path, exc)
            continue
        for fr in m.frames:
            if q.matches(fr):
                hits.append(QueryHit(m.sequence_id, fr.frame_id, fr.path, fr.scene))
    return hits
