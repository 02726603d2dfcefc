"""Per-batch online metrics, baseline drift checks, and a plain-text
exposition format for scraping or file drops."""

import re
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ConfigError
from .detections import Detection

EXPOSITION_METRICS = (
    "vdp_batch_seconds_per_frame",
    "vdp_batch_mean_objectness",
    "vdp_batch_frame_count",
)

_LINE_RE = re.compile(r'^(?P<name>\w+)\{batch="(?P<batch>[^"]*)"\}\s+(?P<value>\S+)$')


@dataclass(frozen=True)
class BatchMetrics:
    batch_id: str
    frame_count: int
    elapsed_seconds: float
    mean_objectness: float

    def __post_init__(self):
        if self.frame_count <= 0:
            raise ValueError(f"frame_count must be positive, got {self.frame_count}")
        if self.elapsed_seconds <= 0:
            raise ValueError(f"elapsed_seconds must be > 0, got {self.elapsed_seconds}")
        if not 0.0 <= self.mean_objectness <= 1.0:
            raise ValueError(f"mean_objectness must be in [0, 1], got {self.mean_objectness}")

    @property
    def seconds_per_frame(self) -> float:
        return self.elapsed_seconds / self.frame_count


def batch_metrics(
    dets_per_frame: Sequence[Sequence[Detection]],
    elapsed_seconds: float,
    batch_id: str = "batch",
) -> BatchMetrics:
    """Pool every detection score in the batch into one mean; a batch with
    no detections reports 0.0 rather than failing."""
    if not dets_per_frame:
        raise ValueError("batch must contain at least one frame")
    if elapsed_seconds <= 0:
        raise ValueError(f"elapsed_seconds must be > 0, got {elapsed_seconds}")
    scores = [d.score for dets in dets_per_frame for d in dets]
    mean = sum(scores) / len(scores) if scores else 0.0
    return BatchMetrics(
        batch_id=batch_id,
        frame_count=len(dets_per_frame),
        elapsed_seconds=elapsed_seconds,
        mean_objectness=mean,
    )


@dataclass
class DriftPolicy:
    baseline_mean_objectness: float
    baseline_seconds_per_frame: float
    max_objectness_drop: float = 0.25
    max_latency_ratio: float = 2.0

    def validate(self) -> None:
        if not 0.0 <= self.baseline_mean_objectness <= 1.0:
            raise ConfigError(
                f"baseline_mean_objectness must be in [0, 1], got {self.baseline_mean_objectness}"
            )
        if not self.baseline_seconds_per_frame > 0:
            raise ConfigError("baseline_seconds_per_frame must be > 0")
        if not 0.0 < self.max_objectness_drop < 1.0:
            raise ConfigError("max_objectness_drop must be in (0, 1)")
        if not self.max_latency_ratio > 1.0:
            raise ConfigError("max_latency_ratio must be > 1")


@dataclass(frozen=True)
class DriftVerdict:
    ok: bool
    reasons: tuple[str, ...] = field(default=())


def drift_check(m: BatchMetrics, policy: DriftPolicy) -> DriftVerdict:
    """Drift when objectness falls below baseline*(1 - drop) or latency
    exceeds baseline*ratio; every violated condition is reported."""
    policy.validate()
    reasons = []
    objectness_floor = policy.baseline_mean_objectness * (1.0 - policy.max_objectness_drop)
    if m.mean_objectness < objectness_floor:
        reasons.append(
            f"mean_objectness {m.mean_objectness:.4f} below floor {objectness_floor:.4f} "
            f"(baseline {policy.baseline_mean_objectness:.4f})"
        )
    latency_ceiling = policy.baseline_seconds_per_frame * policy.max_latency_ratio
    if m.seconds_per_frame > latency_ceiling:
        reasons.append(
            f"seconds_per_frame {m.seconds_per_frame:.4f} above ceiling {latency_ceiling:.4f} "
            f"(baseline {policy.baseline_seconds_per_frame:.4f})"
        )
    return DriftVerdict(ok=not reasons, reasons=tuple(reasons))


def expose_metrics(history: Sequence[BatchMetrics]) -> str:
    """One line per metric per batch; float values use repr so parsing the
    text recovers them exactly."""
    lines = []
    for m in history:
        lines.append(f'vdp_batch_seconds_per_frame{{batch="{m.batch_id}"}} {m.seconds_per_frame!r}')
        lines.append(f'vdp_batch_mean_objectness{{batch="{m.batch_id}"}} {m.mean_objectness!r}')
        lines.append(f'vdp_batch_frame_count{{batch="{m.batch_id}"}} {m.frame_count}')
    return "".join(line + "\n" for line in lines)


def parse_metrics(text: str) -> list[BatchMetrics]:
    """Invert expose_metrics. Batches must carry all three metric lines."""
    by_batch: dict[str, dict[str, float]] = {}
    order: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        match = _LINE_RE.match(line)
        if not match or match["name"] not in EXPOSITION_METRICS:
            raise ValueError(f"line {lineno}: not a metric line: {line!r}")
        batch = match["batch"]
        if batch not in by_batch:
            by_batch[batch] = {}
            order.append(batch)
        by_batch[batch][match["name"]] = float(match["value"])
    out = []
    for batch in order:
        values = by_batch[batch]
        missing = [name for name in EXPOSITION_METRICS if name not in values]
        if missing:
            raise ValueError(f"batch {batch!r} missing metrics: {missing}")
        frame_count = int(values["vdp_batch_frame_count"])
        out.append(
            BatchMetrics(
                batch_id=batch,
                frame_count=frame_count,
                elapsed_seconds=values["vdp_batch_seconds_per_frame"] * frame_count,
                mean_objectness=values["vdp_batch_mean_objectness"],
            )
        )
    return out
