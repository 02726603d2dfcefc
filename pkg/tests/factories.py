"""Deterministic random builders shared between unit and acceptance tests."""

from vdp.filtering import FilterConfig, FilterOutcome, FrameError, QualityScore, VolStats
from vdp.frames import FrameRef
from vdp.manifest import SequenceManifest, build_manifest
from vdp.scenes import SceneCategory, classify_sequence

from pathlib import Path


def random_outcome(rng, n_frames: int, vol_threshold=500.0, ssim_threshold=0.7):
    """A structurally consistent FilterOutcome with random scores, removal
    stages, and decode errors, without touching any image files."""
    frames = [
        FrameRef("seq", f"{i:06d}", Path(f"seq/{i:06d}.png"), i) for i in range(n_frames)
    ]
    scores = [QualityScore(f, float(rng.uniform(0, 2000))) for f in frames]

    retained, removed_vol, removed_ssim = [], [], []
    prev_kept = None
    for q in scores:
        if q.vol < vol_threshold:
            removed_vol.append((q.frame.frame_id, q.vol))
        elif prev_kept is not None and rng.random() < 0.3:
            removed_ssim.append((q.frame.frame_id, float(rng.uniform(ssim_threshold, 1.0))))
        else:
            retained.append(q.frame)
            prev_kept = q.frame

    vols = [q.vol for q in scores]
    vols_sorted = sorted(vols)
    mid = len(vols) // 2
    median = vols_sorted[mid] if len(vols) % 2 else (vols_sorted[mid - 1] + vols_sorted[mid]) / 2
    errors = []
    if rng.random() < 0.2:
        errors.append(FrameError("broken", "seq/broken.png", "UnidentifiedImageError: bad file"))
    return FilterOutcome(
        retained=retained,
        removed_by_vol=removed_vol,
        removed_by_ssim=removed_ssim,
        vol_stats=VolStats(min(vols), max(vols), median),
        removal_ratio_vol=len(removed_vol) / n_frames,
        removal_ratio_ssim=len(removed_ssim) / n_frames,
        elapsed_seconds=float(rng.uniform(0.01, 30.0)),
        scores=scores,
        errors=errors,
    )


def random_manifest(rng, sequence_id="seq", n_frames=None, created_at="2024-01-02T03:04:05Z") -> SequenceManifest:
    n_frames = n_frames or int(rng.integers(1, 40))
    outcome = random_outcome(rng, n_frames)
    categories = [c for c in SceneCategory]
    per_frame = {
        q.frame.frame_id: categories[int(rng.integers(0, len(categories)))]
        for q in outcome.scores
    }
    manifest = build_manifest(
        sequence_id,
        FilterConfig(),
        outcome,
        categorization=classify_sequence(per_frame),
        mean_objectness=float(rng.uniform(0, 1)) if rng.random() < 0.7 else None,
        created_at=created_at,
    )
    manifest.sequence_id = sequence_id
    return manifest
