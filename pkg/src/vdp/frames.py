"""Frame discovery and image decoding for sequence directories."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputError
from .imageproc import to_grayscale

FRAME_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class FrameRef:
    """Identity of one frame within a sequence.

    ``index`` is the 0-based position after filename sorting; ``frame_id``
    is the filename stem (zero-padded numeric for KITTI-style data).
    """

    sequence_id: str
    frame_id: str
    path: Path
    index: int


def list_frames(sequence_dir: str | Path, sequence_id: str | None = None) -> list[FrameRef]:
    """All image frames in a directory, ordered by ascending filename.

    Zero-padded names make lexicographic order numeric order; non-sequential
    stacks are ordered the same way.
    """
    directory = Path(sequence_dir)
    if not directory.is_dir():
        raise InputError(f"not a directory: {directory}")
    paths = sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in FRAME_SUFFIXES
    )
    if sequence_id is None:
        sequence_id = directory.name
    return [
        FrameRef(sequence_id=sequence_id, frame_id=p.stem, path=p, index=i)
        for i, p in enumerate(paths)
    ]


def load_gray(path: str | Path) -> np.ndarray:
    """Decode an image file to a float64 luminance raster in [0, 255]."""
    with Image.open(path) as img:
        if img.mode == "L":
            return np.asarray(img, dtype=np.float64)
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
    return to_grayscale(rgb[..., 0], rgb[..., 1], rgb[..., 2])
