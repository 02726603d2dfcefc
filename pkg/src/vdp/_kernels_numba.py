"""numba-compiled kernels: the default backend for the hot inner loops.

Compiled lazily on first call and cached on disk (``cache=True``), so forked
worker processes reuse the parent's compilation. ``nogil=True`` lets thread
pools overlap kernel execution.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def laplacian_response(gray: np.ndarray) -> np.ndarray:
    """4-neighbour Laplacian with mirrored borders (edge pixel not repeated)."""
    h, w = gray.shape
    out = np.empty((h, w))
    for i in range(h):
        up = i - 1 if i > 0 else 1
        dn = i + 1 if i < h - 1 else h - 2
        for j in range(w):
            lf = j - 1 if j > 0 else 1
            rt = j + 1 if j < w - 1 else w - 2
            out[i, j] = (
                gray[up, j] + gray[dn, j] + gray[i, lf] + gray[i, rt]
                - 4.0 * gray[i, j]
            )
    return out


@njit(cache=True, nogil=True)
def _integral(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    s = np.zeros((h + 1, w + 1))
    for i in range(h):
        row = 0.0
        for j in range(w):
            row += img[i, j]
            s[i + 1, j + 1] = s[i, j + 1] + row
    return s


@njit(cache=True, nogil=True)
def _integral_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    h, w = a.shape
    s = np.zeros((h + 1, w + 1))
    for i in range(h):
        row = 0.0
        for j in range(w):
            row += a[i, j] * b[i, j]
            s[i + 1, j + 1] = s[i, j + 1] + row
    return s


@njit(cache=True, nogil=True)
def ssim_mean(a: np.ndarray, b: np.ndarray, win: int, c1: float, c2: float) -> float:
    """Mean local similarity over all fully-interior ``win``x``win`` windows.

    Window statistics use population normalisation. Box sums come from
    integral images, so every window costs O(1).
    """
    h, w = a.shape
    ia = _integral(a)
    ib = _integral(b)
    iaa = _integral_product(a, a)
    ibb = _integral_product(b, b)
    iab = _integral_product(a, b)

    n = float(win * win)
    rows = h - win + 1
    cols = w - win + 1
    acc = 0.0
    for i in range(rows):
        for j in range(cols):
            sa = ia[i + win, j + win] - ia[i, j + win] - ia[i + win, j] + ia[i, j]
            sb = ib[i + win, j + win] - ib[i, j + win] - ib[i + win, j] + ib[i, j]
            saa = iaa[i + win, j + win] - iaa[i, j + win] - iaa[i + win, j] + iaa[i, j]
            sbb = ibb[i + win, j + win] - ibb[i, j + win] - ibb[i + win, j] + ibb[i, j]
            sab = iab[i + win, j + win] - iab[i, j + win] - iab[i + win, j] + iab[i, j]

            mu_a = sa / n
            mu_b = sb / n
            var_a = saa / n - mu_a * mu_a
            var_b = sbb / n - mu_b * mu_b
            cov = sab / n - mu_a * mu_b

            num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
            den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
            acc += num / den
    return acc / (rows * cols)
