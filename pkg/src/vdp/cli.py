"""Command-line entry point: filter, sweep, tag, query, report.

Exit codes are a stable contract: 0 success, 2 configuration error,
3 input or I/O error. Human summaries go to standard output; machine
artifacts (YAML, CSV, JSONL) go to files or, on request, to stdout.
"""

import functools
import json
import os
import sys
from collections import Counter
from pathlib import Path

import click

from .detections import DetectorConfig, fetch_detections
from .errors import ConfigError, InputError, VdpError
from .filtering import FilterConfig, SweepResult, run_pipeline, sweep
from .frames import FrameRef
from .manifest import (
    Query,
    SequenceManifest,
    build_manifest,
    iter_manifests,
    query as run_query,
    read_manifest,
    write_manifest,
)
from .monitoring import BatchMetrics, expose_metrics
from .scenes import (
    RuleSet,
    SceneCategory,
    classify_frame,
    classify_sequence,
    group_counts,
)

WORKERS_ENV = "VDP_WORKERS"


def _default_workers() -> int:
    return os.cpu_count() or 1


def handle_errors(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except (VdpError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)

    return wrapper


def parse_threshold_range(text: str) -> list[float]:
    """A single value, or inclusive `start:stop:step`."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) == 3:
            start, stop, step = (float(p) for p in parts)
        else:
            raise ValueError("wrong number of fields")
    except ValueError:
        raise ConfigError(
            f"threshold must be a number or start:stop:step, got {text!r}"
        ) from None
    if step <= 0:
        raise ConfigError(f"step must be > 0 in {text!r}")
    if stop < start:
        raise ConfigError(f"stop must be >= start in {text!r}")
    count = int((stop - start) / step + 1e-9) + 1
    return [start + i * step for i in range(count)]


def _detector_config(labels, detector_url, min_objectness) -> DetectorConfig:
    if labels and detector_url:
        raise ConfigError("--labels and --detector-url are mutually exclusive")
    if labels:
        return DetectorConfig(
            min_objectness=min_objectness, source="kitti_labels", labels_path=labels
        )
    return DetectorConfig(
        min_objectness=min_objectness, source="service", endpoint=detector_url
    )


def _load_rules(rules_path) -> RuleSet:
    if rules_path is None:
        return RuleSet.default()
    return RuleSet.from_yaml(Path(rules_path).read_text())


def _tag_frames(frames, det_config, rules):
    """Classify every frame; returns (per-frame category map, pooled mean
    objectness over all fetched detections)."""
    per_frame = {}
    pooled: list[float] = []
    for frame in frames:
        dets = fetch_detections(frame, det_config)
        pooled.extend(d.score for d in dets)
        per_frame[frame.frame_id] = classify_frame(group_counts(dets, rules.groups), rules)
    mean_objectness = sum(pooled) / len(pooled) if pooled else 0.0
    return per_frame, mean_objectness


@click.group()
def main():
    """Key-frame selection and tagging for image sequences."""


@main.command("filter")
@click.option("--input", "input_dir", required=True, help="Directory of frames.")
@click.option("--out", "out_path", required=True, help="Manifest file to write.")
@click.option("--vol", default=500.0, show_default=True, help="Quality threshold; frames below are removed.")
@click.option("--ssim", default=0.7, show_default=True, help="Similarity threshold; frames above are removed.")
@click.option("--ssim-mode", type=click.Choice(["consecutive", "anchor"]), default="consecutive", show_default=True)
@click.option("--mode", type=click.Choice(["sequence", "stack"]), default="sequence", show_default=True,
              help="stack treats a non-sequential collection as a filename-ordered pseudo-sequence.")
@click.option("--workers", type=int, default=None, envvar=WORKERS_ENV,
              help=f"Worker processes [default: logical cores; ${WORKERS_ENV} as fallback].")
@click.option("--labels", default=None, help="Tracking label file; enables scene tagging.")
@click.option("--detector-url", default=None, help="Detector service URL; enables scene tagging.")
@click.option("--min-objectness", default=0.1, show_default=True)
@click.option("--rules", "rules_path", default=None, help="Scene rules YAML override.")
@click.option("--sequence-id", default=None, help="Defaults to the input directory name.")
@handle_errors
def cmd_filter(input_dir, out_path, vol, ssim, ssim_mode, mode, workers, labels,
               detector_url, min_objectness, rules_path, sequence_id):
    """Run the two-step filter, optionally tag scenes, write the manifest."""
    config = FilterConfig(
        vol_threshold=vol,
        ssim_threshold=ssim,
        ssim_mode=ssim_mode,
        workers=workers if workers is not None else _default_workers(),
        stack_mode=(mode == "stack"),
    )
    config.validate()
    tagging = bool(labels or detector_url)
    det_config = _detector_config(labels, detector_url, min_objectness) if tagging else None
    rules = _load_rules(rules_path)

    outcome = run_pipeline(input_dir, config)
    sequence_id = sequence_id or Path(input_dir).name

    categorization = None
    mean_objectness = None
    if tagging:
        per_frame, mean_objectness = _tag_frames(
            [q.frame for q in outcome.scores], det_config, rules
        )
        categorization = classify_sequence(per_frame)

    m = build_manifest(
        sequence_id, config, outcome,
        categorization=categorization, mean_objectness=mean_objectness,
    )
    write_manifest(m, out_path)

    total = outcome.frame_count
    retained = len(outcome.retained)
    click.echo(
        f"sequence {sequence_id}: {total} frames in, {retained} retained "
        f"({100.0 * retained / total:.1f}%), "
        f"{len(outcome.removed_by_vol)} removed by vol ({100.0 * outcome.removal_ratio_vol:.1f}%), "
        f"{len(outcome.removed_by_ssim)} removed by ssim ({100.0 * outcome.removal_ratio_ssim:.1f}%)"
    )
    if categorization is not None:
        click.echo(f"sequence scene: {categorization.final.value}")
    if outcome.errors:
        click.echo(f"warning: {len(outcome.errors)} frames failed to decode", err=True)
    click.echo(f"elapsed: {outcome.elapsed_seconds:.2f}s")
    click.echo(f"manifest written to {out_path}")


def _wide_csv(prefix: str, rows: list[tuple[float, float]]) -> str:
    header = ",".join(f"{prefix}={t:g}" for t, _ in rows)
    values = ",".join(f"{100.0 * frac:.1f}" for _, frac in rows)
    return f"{header}\n{values}\n"


@main.command("sweep")
@click.option("--input", "input_dir", required=True, help="Directory of frames.")
@click.option("--vol", "vol_range", default=None, help="Threshold or start:stop:step range.")
@click.option("--ssim", "ssim_range", default=None, help="Threshold or start:stop:step range.")
@click.option("--ssim-mode", type=click.Choice(["consecutive", "anchor"]), default="consecutive", show_default=True)
@click.option("--mode", type=click.Choice(["sequence", "stack"]), default="sequence", show_default=True)
@click.option("--workers", type=int, default=None, envvar=WORKERS_ENV)
@click.option("--out", "out_prefix", default=None,
              help="Write <prefix>_vol.csv / <prefix>_ssim.csv instead of stdout.")
@click.option("--long", "long_format", is_flag=True,
              help="Long format (threshold,percent_retained rows) instead of wide.")
@handle_errors
def cmd_sweep(input_dir, vol_range, ssim_range, ssim_mode, mode, workers, out_prefix, long_format):
    """Retention percentages over threshold ranges, one CSV per metric."""
    if not vol_range and not ssim_range:
        raise ConfigError("provide --vol and/or --ssim")
    v_values = parse_threshold_range(vol_range) if vol_range else []
    s_values = parse_threshold_range(ssim_range) if ssim_range else []
    for s in s_values:
        if not 0.0 <= s <= 1.0:
            raise ConfigError(f"ssim threshold must be in [0, 1], got {s:g}")
    workers = workers if workers is not None else _default_workers()
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")

    result: SweepResult = sweep(
        input_dir, v_values, s_values, ssim_mode=ssim_mode, workers=workers
    )
    tables = []
    if v_values:
        text = result.vol_csv() if long_format else _wide_csv("v", result.vol_retention)
        tables.append(("vol", text))
    if s_values:
        text = result.ssim_csv() if long_format else _wide_csv("s", result.ssim_retention)
        tables.append(("ssim", text))

    if out_prefix:
        for name, text in tables:
            path = Path(f"{out_prefix}_{name}.csv")
            path.write_text(text)
            click.echo(f"wrote {path}")
    else:
        click.echo("\n".join(text for _, text in tables), nl=False)


@main.command("tag")
@click.option("--manifest", "manifest_file", required=True, help="Manifest to update in place.")
@click.option("--labels", default=None, help="Tracking label file.")
@click.option("--detector-url", default=None, help="Detector service URL.")
@click.option("--min-objectness", default=0.1, show_default=True)
@click.option("--rules", "rules_path", default=None, help="Scene rules YAML override.")
@handle_errors
def cmd_tag(manifest_file, labels, detector_url, min_objectness, rules_path):
    """Tag (or re-tag) every frame of an existing manifest with scenes."""
    if not labels and not detector_url:
        raise ConfigError("provide --labels or --detector-url")
    det_config = _detector_config(labels, detector_url, min_objectness)
    rules = _load_rules(rules_path)

    m = read_manifest(manifest_file)
    frames = [
        FrameRef(sequence_id=m.sequence_id, frame_id=fr.frame_id, path=Path(fr.path), index=i)
        for i, fr in enumerate(m.frames)
    ]
    if not frames:
        raise ConfigError(f"manifest {manifest_file} has no frames to tag")
    per_frame, mean_objectness = _tag_frames(frames, det_config, rules)
    categorization = classify_sequence(per_frame)

    for fr in m.frames:
        fr.scene = per_frame[fr.frame_id].value
    m.sequence_scene = categorization.final.value
    m.histogram = {cat.value: pct for cat, pct in categorization.histogram.items()}
    m.mean_objectness = mean_objectness
    write_manifest(m, manifest_file)
    click.echo(
        f"tagged {len(frames)} frames in {manifest_file}: "
        f"sequence scene {m.sequence_scene}, mean objectness {mean_objectness:.4f}"
    )


@main.command("query")
@click.option("--input", "manifest_dir", required=True, help="Directory of manifests.")
@click.option("--scene", "scene_names", multiple=True, required=True,
              type=click.Choice([c.value for c in SceneCategory]))
@click.option("--role", type=click.Choice(["train", "test"]), default=None)
@click.option("--min-vol", type=float, default=None)
@click.option("--format", "out_format", type=click.Choice(["csv", "jsonl"]),
              default="csv", show_default=True)
@click.option("--out", "out_path", default=None, help="Write to a file instead of stdout.")
@handle_errors
def cmd_query(manifest_dir, scene_names, role, min_vol, out_format, out_path):
    """Frames matching scene tags (plus optional role / min-vol filters)."""
    if not Path(manifest_dir).is_dir():
        raise InputError(f"not a directory: {manifest_dir}")
    q = Query(scenes={SceneCategory(s) for s in scene_names}, role=role, min_vol=min_vol)
    hits = run_query(manifest_dir, q)
    if out_format == "csv":
        lines = ["sequence_id,frame_id,path,scene"]
        lines += [f"{h.sequence_id},{h.frame_id},{h.path},{h.scene}" for h in hits]
        text = "\n".join(lines) + "\n"
    else:
        text = "".join(
            json.dumps(
                {"sequence_id": h.sequence_id, "frame_id": h.frame_id,
                 "path": h.path, "scene": h.scene}
            ) + "\n"
            for h in hits
        )
    if out_path:
        Path(out_path).write_text(text)
        click.echo(f"wrote {len(hits)} rows to {out_path}")
    else:
        click.echo(text, nl=False)


@main.command("report")
@click.option("--input", "manifest_dir", required=True, help="Directory of manifests.")
@click.option("--metrics", is_flag=True, help="Append metrics exposition text.")
@handle_errors
def cmd_report(manifest_dir, metrics):
    """Aggregate totals across every manifest in a directory."""
    if not Path(manifest_dir).is_dir():
        raise InputError(f"not a directory: {manifest_dir}")
    manifests: list[SequenceManifest] = []
    for path in iter_manifests(manifest_dir):
        try:
            manifests.append(read_manifest(path))
        except (VdpError, OSError) as exc:
            click.echo(f"warning: skipping {path}: {exc}", err=True)

    frames_in = sum(m.frame_count for m in manifests)
    removed_vol = sum(1 for m in manifests for fr in m.frames if fr.removal_stage == "vol")
    removed_ssim = sum(1 for m in manifests for fr in m.frames if fr.removal_stage == "ssim")
    retained = frames_in - removed_vol - removed_ssim
    errors = sum(len(m.errors) for m in manifests)
    elapsed = sum(m.elapsed_seconds for m in manifests)
    scene_counts = Counter(fr.scene for m in manifests for fr in m.frames)

    click.echo(f"sequences: {len(manifests)}")
    click.echo(f"frames in: {frames_in}")
    pct = (100.0 * retained / frames_in) if frames_in else 0.0
    click.echo(f"retained: {retained} ({pct:.1f}%)")
    click.echo(f"removed by vol: {removed_vol}")
    click.echo(f"removed by ssim: {removed_ssim}")
    click.echo(f"decode errors: {errors}")
    click.echo(f"total elapsed seconds: {elapsed:.2f}")
    if frames_in:
        parts = [
            f"{cat.value} {100.0 * scene_counts.get(cat.value, 0) / frames_in:.2f}"
            for cat in SceneCategory
        ]
        click.echo("scenes (% of frames): " + ", ".join(parts))

    if metrics:
        history = []
        for m in manifests:
            if m.elapsed_seconds <= 0 or m.frame_count <= 0:
                continue
            history.append(
                BatchMetrics(
                    batch_id=m.sequence_id,
                    frame_count=m.frame_count,
                    elapsed_seconds=m.elapsed_seconds,
                    mean_objectness=m.mean_objectness or 0.0,
                )
            )
        click.echo(expose_metrics(history), nl=False)


if __name__ == "__main__":
    main()
