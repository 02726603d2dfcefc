"""Per-frame object detections from three interchangeable sources: KITTI
tracking label files, detection JSON files, or an HTTP detector service.

All sources funnel into the same Detection record and pass through the same
objectness floor, so downstream scene tagging never cares where boxes came
from. Ground-truth labels carry score 1.0 and therefore always clear any
floor below 1.
"""

import json
import time
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import requests

from .errors import ConfigError, InputError, LabelParseError, ProtocolError, ServiceError
from .frames import FrameRef

DETECTOR_SOURCES = ("kitti_labels", "json_file", "service")
DEFAULT_DROP_LABELS = frozenset({"DontCare"})

# KITTI tracking layout: frame, track_id, type, truncated, occluded, alpha,
# 4 bbox fields, 3 dimensions, 3 location, rotation_y, optional score.
_TRACKING_FIELDS = 17


@dataclass(frozen=True)
class Detection:
    label: str
    score: float
    bbox: tuple[float, float, float, float]

    def __post_init__(self):
        left, top, right, bottom = self.bbox
        if not left < right:
            raise ValueError(f"bbox left must be < right, got {self.bbox}")
        if not top < bottom:
            raise ValueError(f"bbox top must be < bottom, got {self.bbox}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass
class DetectorConfig:
    """Where detections come from and how they are floored.

    ``labels_path`` points at the sequence's tracking label file for the
    kitti_labels source. ``endpoint`` is the full URL of the detector
    route for the service source.
    """

    min_objectness: float = 0.1
    source: str = "kitti_labels"
    endpoint: str | None = None
    labels_path: str | Path | None = None
    timeout_seconds: float = 5.0

    def validate(self) -> None:
        if not 0.0 <= self.min_objectness <= 1.0:
            raise ConfigError(
                f"min_objectness must be in [0, 1], got {self.min_objectness}"
            )
        if self.source not in DETECTOR_SOURCES:
            raise ConfigError(
                f"source must be one of {DETECTOR_SOURCES}, got {self.source!r}"
            )
        if self.source == "service" and not self.endpoint:
            raise ConfigError("service source requires an endpoint URL")
        if self.source == "kitti_labels" and not self.labels_path:
            raise ConfigError("kitti_labels source requires labels_path")
        if not self.timeout_seconds > 0:
            raise ConfigError(f"timeout_seconds must be > 0, got {self.timeout_seconds}")


def parse_kitti_tracking_labels(
    text: str, drop_labels: frozenset[str] = DEFAULT_DROP_LABELS
) -> dict[int, list[Detection]]:
    """Parse tracking label text into frame index -> detections.

    Every frame index that appears in the file gets an entry, even when all
    of its lines are dropped (so a DontCare-only frame maps to []). Lines
    carry a trailing score only when the file includes one; ground truth
    defaults to 1.0.
    """
    out: dict[int, list[Detection]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) < _TRACKING_FIELDS:
            raise LabelParseError(
                f"expected at least {_TRACKING_FIELDS} fields, got {len(fields)}", lineno
            )
        try:
            frame_idx = int(fields[0])
            label = fields[2]
            bbox = tuple(float(x) for x in fields[6:10])
            score = float(fields[17]) if len(fields) > _TRACKING_FIELDS else 1.0
        except ValueError as exc:
            raise LabelParseError(f"non-numeric field: {exc}", lineno) from None
        bucket = out.setdefault(frame_idx, [])
        if label in drop_labels:
            continue
        try:
            bucket.append(Detection(label=label, score=score, bbox=bbox))
        except ValueError as exc:
            raise LabelParseError(str(exc), lineno) from None
    return out


def filter_by_objectness(dets: list[Detection], floor: float) -> list[Detection]:
    """Keep detections strictly above the floor; order preserved."""
    if not 0.0 <= floor <= 1.0:
        raise ConfigError(f"objectness floor must be in [0, 1], got {floor}")
    return [d for d in dets if d.score > floor]


def parse_detection_json(text: str) -> list[Detection]:
    """Detection JSON contract: array of {label, score, bbox: [l, t, r, b]}."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"invalid detection JSON: {exc}") from None
    if not isinstance(payload, list):
        raise ProtocolError(f"detection JSON must be an array, got {type(payload).__name__}")
    dets: list[Detection] = []
    for i, item in enumerate(payload):
        if not isinstance(item, dict):
            raise ProtocolError(f"entry {i} must be an object, got {type(item).__name__}")
        try:
            label = item["label"]
            score = item["score"]
            bbox = item["bbox"]
        except KeyError as exc:
            raise ProtocolError(f"entry {i} missing key {exc}") from None
        if not isinstance(label, str):
            raise ProtocolError(f"entry {i}: label must be a string")
        if not isinstance(bbox, list) or len(bbox) != 4:
            raise ProtocolError(f"entry {i}: bbox must be an array of 4 numbers")
        try:
            dets.append(
                Detection(label=label, score=float(score), bbox=tuple(float(v) for v in bbox))
            )
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"entry {i}: {exc}") from None
    return dets


def dump_detection_map(det_map: dict[int, list[Detection]]) -> str:
    """Serialize a detection map to JSON; load_detection_map inverts it."""
    payload = {
        str(idx): [
            {"label": d.label, "score": d.score, "bbox": list(d.bbox)} for d in dets
        ]
        for idx, dets in det_map.items()
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def load_detection_map(text: str) -> dict[int, list[Detection]]:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"invalid detection map JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ProtocolError("detection map JSON must be an object")
    out: dict[int, list[Detection]] = {}
    for key, items in payload.items():
        try:
            idx = int(key)
        except ValueError:
            raise ProtocolError(f"frame key {key!r} is not an integer") from None
        out[idx] = parse_detection_json(json.dumps(items))
    return out


@lru_cache(maxsize=32)
def _load_label_file(path_str: str) -> dict[int, list[Detection]]:
    path = Path(path_str)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read label file {path}: {exc}") from None
    return parse_kitti_tracking_labels(text)


def _frame_index(frame: FrameRef) -> int:
    # KITTI frame files are zero-padded frame numbers; fall back to the
    # position in the listing when the stem is not numeric.
    try:
        return int(frame.frame_id)
    except ValueError:
        return frame.index


def _service_detections(frame: FrameRef, config: DetectorConfig) -> list[Detection]:
    last_error = None
    for attempt in range(3):
        if attempt:
            time.sleep(0.1 * 2 ** (attempt - 1))
        try:
            resp = requests.post(
                config.endpoint,
                json={"image_path": str(frame.path)},
                timeout=config.timeout_seconds,
            )
        except requests.RequestException as exc:
            last_error = f"{type(exc).__name__}: {exc}"
            continue
        if resp.status_code >= 500:
            last_error = f"HTTP {resp.status_code}"
            continue
        if resp.status_code >= 400:
            raise ProtocolError(f"detector rejected request: HTTP {resp.status_code}")
        return parse_detection_json(resp.text)
    raise ServiceError(
        f"detector service failed after 3 attempts ({last_error}) at {config.endpoint}"
    )


def fetch_detections(frame: FrameRef, config: DetectorConfig) -> list[Detection]:
    """Detections for one frame from the configured source, objectness floor
    already applied."""
    config.validate()
    if config.source == "kitti_labels":
        det_map = _load_label_file(str(config.labels_path))
        dets = det_map.get(_frame_index(frame), [])
    elif config.source == "json_file":
        json_path = frame.path.with_suffix(".json")
        try:
            dets = parse_detection_json(json_path.read_text())
        except OSError as exc:
            raise InputError(f"cannot read detection file {json_path}: {exc}") from None
    else:
        dets = _service_detections(frame, config)
    return filter_by_objectness(dets, config.min_objectness)
