"""Pure-numpy kernels: the fallback backend.

Same contracts as ``_kernels_numba``; selected via the ``VDP_BACKEND``
environment variable (see ``vdp.kernels``).
"""

import numpy as np


def laplacian_response(gray: np.ndarray) -> np.ndarray:
    """4-neighbour Laplacian with mirrored borders (edge pixel not repeated)."""
    p = np.pad(gray, 1, mode="reflect")
    return (
        p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:]
        - 4.0 * p[1:-1, 1:-1]
    )


def _integral(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    s = np.zeros((h + 1, w + 1))
    np.cumsum(img, axis=0, out=s[1:, 1:])
    np.cumsum(s[1:, 1:], axis=1, out=s[1:, 1:])
    return s


def _box_sums(integral: np.ndarray, win: int) -> np.ndarray:
    return (
        integral[win:, win:] - integral[:-win, win:]
        - integral[win:, :-win] + integral[:-win, :-win]
    )


def ssim_mean(a: np.ndarray, b: np.ndarray, win: int, c1: float, c2: float) -> float:
    """Mean local similarity over all fully-interior ``win``x``win`` windows.

    Window statistics use population normalisation (divide by the pixel
    count, not count - 1). Box sums come from integral images, so every
    window costs O(1).
    """
    n = float(win * win)
    sa = _box_sums(_integral(a), win)
    sb = _box_sums(_integral(b), win)
    saa = _box_sums(_integral(a * a), win)
    sbb = _box_sums(_integral(b * b), win)
    sab = _box_sums(_integral(a * b), win)

    mu_a = sa / n
    mu_b = sb / n
    var_a = saa / n - mu_a * mu_a
    var_b = sbb / n - mu_b * mu_b
    cov = sab / n - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))
