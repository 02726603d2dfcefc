import re

import numpy as np
import pytest
from PIL import Image

ACCEPTANCE_MODULE = "test_acceptance"


def _criterion_label(nodeid: str) -> str | None:
    if ACCEPTANCE_MODULE not in nodeid:
        return None
    match = re.search(r"::test_criterion_(\d+)_(\w+)", nodeid)
    if not match:
        return None
    number, slug = match.groups()
    return f"criterion {number} ({slug.replace('_', ' ')})"


def pytest_terminal_summary(terminalreporter):
    rows = []
    for outcome, label in (("passed", "PASS"), ("failed", "FAIL"),
                           ("error", "FAIL"), ("skipped", "SKIP")):
        for report in terminalreporter.stats.get(outcome, []):
            name = _criterion_label(getattr(report, "nodeid", ""))
            if name:
                rows.append((name, label))
    if not rows:
        return
    rows.sort(key=lambda r: r[0])
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance summary:")
    for name, label in rows:
        terminalreporter.write_line(f"[acceptance] {name}: {label}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_frame(path, array):
    """Save a float array in [0, 255] as an 8-bit grayscale PNG."""
    Image.fromarray(np.clip(array, 0, 255).astype(np.uint8), "L").save(path)


@pytest.fixture
def make_sequence(tmp_path):
    """Write arrays as numbered PNG frames into a fresh sequence dir."""

    def _make(arrays, name="seq"):
        seq_dir = tmp_path / name
        seq_dir.mkdir(exist_ok=True)
        for i, arr in enumerate(arrays):
            write_frame(seq_dir / f"{i:06d}.png", arr)
        return seq_dir

    return _make
