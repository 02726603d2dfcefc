"""Two-step frame filtering: parallel quality scoring with a threshold,
then redundancy removal by structural similarity.

Quality scoring is an order-preserving parallel map over frames; similarity
scoring of adjacent pairs parallelises the same way. Anchor-mode similarity
is inherently sequential (each decision depends on the last retained frame)
and runs single-threaded.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, InputError
from .frames import FrameRef, list_frames, load_gray
from .imageproc import SsimParams, ssim, vol

SSIM_MODES = ("consecutive", "anchor")

PairScorer = Callable[[FrameRef, FrameRef], float]


@dataclass
class FilterConfig:
    """Thresholds and execution knobs for one pipeline run."""

    vol_threshold: float = 500.0
    ssim_threshold: float = 0.7
    ssim_mode: str = "consecutive"
    workers: int = 1
    stack_mode: bool = False

    def validate(self) -> None:
        if not self.vol_threshold > 0:
            raise ConfigError(f"vol_threshold must be > 0, got {self.vol_threshold}")
        if not 0.0 <= self.ssim_threshold <= 1.0:
            raise ConfigError(
                f"ssim_threshold must be in [0, 1], got {self.ssim_threshold}"
            )
        if self.ssim_mode not in SSIM_MODES:
            raise ConfigError(f"ssim_mode must be one of {SSIM_MODES}, got {self.ssim_mode!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    def snapshot(self) -> dict:
        return {
            "vol_threshold": self.vol_threshold,
            "ssim_threshold": self.ssim_threshold,
            "ssim_mode": self.ssim_mode,
            "workers": self.workers,
            "stack_mode": self.stack_mode,
        }


@dataclass(frozen=True)
class QualityScore:
    frame: FrameRef
    vol: float


@dataclass(frozen=True)
class SimilarityScore:
    reference_frame_id: str
    candidate_frame_id: str
    ssim: float


@dataclass(frozen=True)
class FrameError:
    """A frame that could not be decoded; recorded, never fatal on its own."""

    frame_id: str
    path: str
    message: str


@dataclass(frozen=True)
class VolStats:
    min: float
    max: float
    median: float


@dataclass
class FilterOutcome:
    """Full record of one filtering run.

    ``scores`` holds the pre-filter quality score of every decodable frame
    (input order); ``retained`` + ``removed_by_vol`` + ``removed_by_ssim``
    partition exactly those frames. Undecodable frames land in ``errors``.
    """

    retained: list[FrameRef]
    removed_by_vol: list[tuple[str, float]]
    removed_by_ssim: list[tuple[str, float]]
    vol_stats: VolStats
    removal_ratio_vol: float
    removal_ratio_ssim: float
    elapsed_seconds: float
    scores: list[QualityScore]
    errors: list[FrameError] = field(default_factory=list)

    @property
    def frame_count(self) -> int:
        return len(self.scores)


def _vol_task(path: str) -> tuple[float | None, str | None]:
    try:
        return vol(load_gray(path)), None
    except Exception as exc:  # per-frame failures must not kill the batch
        return None, f"{type(exc).__name__}: {exc}"


def _pair_task(args: tuple[str, str, SsimParams]) -> tuple[float | None, str | None]:
    a_path, b_path, params = args
    try:
        return ssim(load_gray(a_path), load_gray(b_path), params), None
    except Exception as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _pool_map(task, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [task(item) for item in items]
    chunksize = max(1, len(items) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, items, chunksize=chunksize))


def score_frames(
    frames: Sequence[FrameRef], workers: int = 1
) -> tuple[list[QualityScore], list[FrameError]]:
    """Quality-score every frame; output order equals input order for any
    worker count. Returns (scores, per-frame errors)."""
    results = _pool_map(_vol_task, [str(f.path) for f in frames], workers)
    scores: list[QualityScore] = []
    errors: list[FrameError] = []
    for frame, (value, err) in zip(frames, results):
        if err is None:
            scores.append(QualityScore(frame=frame, vol=value))
        else:
            errors.append(FrameError(frame_id=frame.frame_id, path=str(frame.path), message=err))
    return scores, errors


def vol_filter(
    scores: Sequence[QualityScore], v: float
) -> tuple[list[FrameRef], list[tuple[str, float]]]:
    """Keep frames whose score is >= v (tie retains); order preserved."""
    retained: list[FrameRef] = []
    removed: list[tuple[str, float]] = []
    for q in scores:
        if q.vol >= v:
            retained.append(q.frame)
        else:
            removed.append((q.frame.frame_id, q.vol))
    return retained, removed


def consecutive_scores(
    frames: Sequence[FrameRef],
    params: SsimParams | None = None,
    workers: int = 1,
    pair_ssim: PairScorer | None = None,
) -> list[SimilarityScore]:
    """Similarity of every adjacent pair (frame i-1, frame i), i >= 1."""
    params = params or SsimParams()
    if len(frames) < 2:
        return []
    if pair_ssim is not None:
        return [
            SimilarityScore(a.frame_id, b.frame_id, pair_ssim(a, b))
            for a, b in zip(frames, frames[1:])
        ]
    jobs = [(str(a.path), str(b.path), params) for a, b in zip(frames, frames[1:])]
    results = _pool_map(_pair_task, jobs, workers)
    out: list[SimilarityScore] = []
    for (a, b), (value, err) in zip(zip(frames, frames[1:]), results):
        if err is not None:
            raise DimensionError(
                f"ssim between frames {a.frame_id!r} and {b.frame_id!r} failed: {err}"
            )
        out.append(SimilarityScore(a.frame_id, b.frame_id, value))
    return out


def _anchor_pass(
    frames: Sequence[FrameRef],
    s: float,
    params: SsimParams,
    pair_ssim: PairScorer | None,
) -> tuple[list[FrameRef], list[tuple[str, float]]]:
    retained = [frames[0]]
    removed: list[tuple[str, float]] = []
    anchor = frames[0]
    anchor_gray = None if pair_ssim else load_gray(anchor.path)
    for cand in frames[1:]:
        if pair_ssim:
            value = pair_ssim(anchor, cand)
        else:
            cand_gray = load_gray(cand.path)
            try:
                value = ssim(anchor_gray, cand_gray, params)
            except DimensionError as exc:
                raise DimensionError(
                    f"ssim between frames {anchor.frame_id!r} and {cand.frame_id!r}: {exc}"
                ) from exc
        if value > s:
            removed.append((cand.frame_id, value))
        else:
            retained.append(cand)
            anchor = cand
            if pair_ssim is None:
                anchor_gray = cand_gray
    return retained, removed


def ssim_filter(
    frames: Sequence[FrameRef],
    s: float,
    mode: str = "consecutive",
    *,
    params: SsimParams | None = None,
    workers: int = 1,
    pair_ssim: PairScorer | None = None,
) -> tuple[list[FrameRef], list[tuple[str, float]]]:
    """Drop structurally-redundant frames: similarity above ``s`` removes.

    The first frame is always retained. ``consecutive`` compares each frame
    against its predecessor in the input list; ``anchor`` compares against
    the most recently retained frame. Removed frames carry the similarity
    value that triggered removal. ``pair_ssim`` substitutes the image-based
    scorer (used by tests and custom pipelines).
    """
    if mode not in SSIM_MODES:
        raise ConfigError(f"ssim_mode must be one of {SSIM_MODES}, got {mode!r}")
    params = params or SsimParams()
    if not frames:
        return [], []
    if mode == "anchor":
        return _anchor_pass(frames, s, params, pair_ssim)

    pair_scores = consecutive_scores(frames, params, workers, pair_ssim)
    retained = [frames[0]]
    removed: list[tuple[str, float]] = []
    for cand, pair in zip(frames[1:], pair_scores):
        if pair.ssim > s:
            removed.append((cand.frame_id, pair.ssim))
        else:
            retained.append(cand)
    return retained, removed


def run_pipeline(sequence_dir: str | Path, config: FilterConfig) -> FilterOutcome:
    """Score, threshold, de-duplicate: the full two-step filter for one
    sequence (or filename-ordered stack) directory."""
    config.validate()
    frames = list_frames(sequence_dir)
    if not frames:
        raise InputError(f"no frames found in {sequence_dir}")

    started = time.perf_counter()
    scores, errors = score_frames(frames, config.workers)
    if not scores:
        raise InputError(
            f"all {len(frames)} frames in {sequence_dir} failed to decode"
        )

    vols = np.array([q.vol for q in scores])
    stats = VolStats(min=float(vols.min()), max=float(vols.max()), median=float(np.median(vols)))

    kept_after_vol, removed_by_vol = vol_filter(scores, config.vol_threshold)
    retained, removed_by_ssim = ssim_filter(
        kept_after_vol,
        config.ssim_threshold,
        config.ssim_mode,
        workers=config.workers,
    )
    elapsed = time.perf_counter() - started

    total = len(scores)
    return FilterOutcome(
        retained=retained,
        removed_by_vol=removed_by_vol,
        removed_by_ssim=removed_by_ssim,
        vol_stats=stats,
        removal_ratio_vol=len(removed_by_vol) / total,
        removal_ratio_ssim=len(removed_by_ssim) / total,
        elapsed_seconds=elapsed,
        scores=scores,
        errors=errors,
    )


@dataclass
class SweepResult:
    """Retention fractions per threshold, each filter applied independently.

    Raw fractions are kept; CSV output rounds to one decimal percent.
    """

    frame_count: int
    vol_retention: list[tuple[float, float]]
    ssim_retention: list[tuple[float, float]]

    @staticmethod
    def _csv(rows: Iterable[tuple[float, float]]) -> str:
        lines = ["threshold,percent_retained"]
        lines += [f"{t:g},{100.0 * frac:.1f}" for t, frac in rows]
        return "\n".join(lines) + "\n"

    def vol_csv(self) -> str:
        return self._csv(self.vol_retention)

    def ssim_csv(self) -> str:
        return self._csv(self.ssim_retention)


def sweep(
    sequence_dir: str | Path,
    v_values: Sequence[float],
    s_values: Sequence[float],
    *,
    ssim_mode: str = "consecutive",
    workers: int = 1,
    params: SsimParams | None = None,
) -> SweepResult:
    """Percent of frames each threshold would retain, with the quality and
    similarity filters applied independently to the full sequence."""
    params = params or SsimParams()
    frames = list_frames(sequence_dir)
    if not frames:
        raise InputError(f"no frames found in {sequence_dir}")
    scores, _errors = score_frames(frames, workers)
    if not scores:
        raise InputError(f"all {len(frames)} frames in {sequence_dir} failed to decode")
    total = len(scores)
    vols = np.array([q.vol for q in scores])
    vol_rows = [(float(v), float(np.mean(vols >= v))) for v in v_values]

    ssim_rows: list[tuple[float, float]] = []
    if s_values:
        ok_frames = [q.frame for q in scores]
        if ssim_mode == "consecutive":
            pairs = consecutive_scores(ok_frames, params, workers)
            values = np.array([p.ssim for p in pairs])
            ssim_rows = [
                (float(s), (1 + int(np.sum(values <= s))) / total) for s in s_values
            ]
        else:
            for s in s_values:
                retained, _ = ssim_filter(ok_frames, float(s), ssim_mode, params=params)
                ssim_rows.append((float(s), len(retained) / total))
    return SweepResult(frame_count=total, vol_retention=vol_rows, ssim_retention=ssim_rows)
