"""Pure image mathematics: grayscale conversion, Laplacian response,
variance and windowed structural similarity.

All functions take and return plain 2-D float64 arrays with luminance in
[0, 255]; conversion happens once at load time (see ``vdp.frames``).
Everything here is a pure function, safe to call from any number of workers.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionError

# ITU-R BT.601 luma weights
GRAY_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class SsimParams:
    """Window size and stabilization constants for the similarity index.

    The defaults (uniform 7x7 window, k1=0.01, k2=0.03 over a 255 span)
    follow the most common open implementation; window statistics are
    population-normalised and only fully-interior windows contribute.
    """

    window_side: int = 7
    data_range: float = 255.0
    k1: float = 0.01
    k2: float = 0.03

    def __post_init__(self):
        if self.window_side < 3 or self.window_side % 2 == 0:
            raise ValueError(f"window_side must be odd and >= 3, got {self.window_side}")
        if self.data_range <= 0:
            raise ValueError(f"data_range must be positive, got {self.data_range}")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be positive so c1, c2 > 0")

    @property
    def c1(self) -> float:
        return (self.k1 * self.data_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.data_range) ** 2


def _as_image(arr, name: str = "image") -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def to_grayscale(red, green, blue) -> np.ndarray:
    """Weighted luminance 0.299 R + 0.587 G + 0.114 B, clamped to [0, 255]."""
    r = _as_image(red, "red")
    g = _as_image(green, "green")
    b = _as_image(blue, "blue")
    if r.shape != g.shape or r.shape != b.shape:
        raise DimensionError(
            f"channel shapes differ: {r.shape}, {g.shape}, {b.shape}"
        )
    wr, wg, wb = GRAY_WEIGHTS
    return np.clip(wr * r + wg * g + wb * b, 0.0, 255.0)


def laplacian(img) -> np.ndarray:
    """4-neighbour Laplacian response; borders are mirror-extended without
    repeating the edge pixel, so the output keeps the input shape."""
    img = _as_image(img)
    h, w = img.shape
    if h < 3 or w < 3:
        raise DimensionError(f"image must be at least 3x3, got {h}x{w}")
    return kernels.laplacian_response(img)


def variance(values) -> float:
    """Population variance (divide by N)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("variance of an empty array is undefined")
    return float(np.var(arr))


def vol(img) -> float:
    """Variance of the Laplacian response: higher for sharp, well-focused
    frames, 0 for constant ones."""
    return variance(laplacian(img))


def ssim(a, b, params: SsimParams | None = None) -> float:
    """Structural similarity in [-1, 1]; 1.0 for identical images.

    Mean over all fully-interior sliding windows of
    ``((2 mu_a mu_b + c1) (2 cov + c2)) / ((mu_a^2 + mu_b^2 + c1) (var_a + var_b + c2))``.
    Symmetric in (a, b).
    """
    params = params or SsimParams()
    a = _as_image(a, "a")
    b = _as_image(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    win = params.window_side
    if a.shape[0] < win or a.shape[1] < win:
        raise DimensionError(
            f"images ({a.shape[0]}x{a.shape[1]}) are smaller than the "
            f"{win}x{win} window"
        )
    return kernels.ssim_mean(a, b, win, params.c1, params.c2)
