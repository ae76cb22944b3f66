"""Frame handling and the spatial filters shared by both networks.

Frames are plain numpy arrays:

* a raw frame is ``uint8`` with shape ``(height, width, 3)`` (RGB);
* a gray frame is ``float64`` with shape ``(height, width)`` and values in [0, 1];
* a kernel is a ``float64`` 2-D array with odd side lengths.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

DIRECTIONS = ("left", "right", "up", "down")

_LUMA = np.array([0.299, 0.587, 0.114])


class FrameError(ValueError):
    """Raised for malformed frames, kernels or size arguments."""


def check_raw(frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise FrameError(f"raw frame must be (h, w, 3), got {frame.shape}")
    if frame.shape[0] < 3 or frame.shape[1] < 3:
        raise FrameError(f"raw frame must be at least 3x3, got {frame.shape[:2]}")
    if frame.dtype != np.uint8:
        if np.any(frame < 0) or np.any(frame > 255):
            raise FrameError("raw frame samples must lie in [0, 255]")
    return frame


def check_gray(frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2:
        raise FrameError(f"gray frame must be 2-D, got shape {frame.shape}")
    if not np.all(np.isfinite(frame)):
        raise FrameError("gray frame contains non-finite values")
    return frame


def to_grayscale(frame: np.ndarray) -> np.ndarray:
    """Luma conversion of an RGB frame to intensities in [0, 1]."""
    frame = check_raw(frame)
    gray = (frame.astype(np.float64) @ _LUMA) / 255.0
    return np.clip(gray, 0.0, 1.0)


def resize(frame: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize with pixel-centre alignment and edge clamping."""
    frame = check_gray(frame)
    if out_w < 3 or out_h < 3:
        raise FrameError(f"target size must be at least 3x3, got {out_w}x{out_h}")
    h, w = frame.shape
    if (h, w) == (out_h, out_w):
        return frame.copy()

    def axis(n_in: int, n_out: int):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1)
        lo = np.floor(src).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = axis(h, out_h)
    x0, x1, fx = axis(w, out_w)
    fy = fy[:, None]
    top = frame[y0][:, x0] * (1 - fx) + frame[y0][:, x1] * fx
    bottom = frame[y1][:, x0] * (1 - fx) + frame[y1][:, x1] * fx
    return np.clip(top * (1 - fy) + bottom * fy, 0.0, 1.0)


@dataclass
class WhitenModel:
    mean: np.ndarray
    transform: np.ndarray
    epsilon: float
    shape: tuple[int, int]


def whiten_fit(frames, epsilon: float = 1e-5) -> WhitenModel:
    """Fit a ZCA whitening transform on flattened frames."""
    frames = [check_gray(f) for f in frames]
    if len(frames) < 2:
        raise FrameError("whitening needs at least 2 frames")
    if epsilon <= 0:
        raise FrameError("epsilon must be positive")
    shape = frames[0].shape
    if any(f.shape != shape for f in frames):
        raise FrameError("all frames must share the same dimensions")
    x = np.stack([f.ravel() for f in frames])
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (len(frames) - 1)
    eigval, eigvec = np.linalg.eigh(cov)
    eigval = np.clip(eigval, 0.0, None)
    transform = (eigvec / np.sqrt(eigval + epsilon)) @ eigvec.T
    return WhitenModel(mean=mean, transform=transform, epsilon=epsilon, shape=shape)


def whiten_transform(model: WhitenModel, frame: np.ndarray) -> np.ndarray:
    """Whitened frame before rescaling (zero-mean, unbounded)."""
    frame = check_gray(frame)
    if frame.shape != model.shape:
        raise FrameError(f"frame {frame.shape} does not match model {model.shape}")
    return (model.transform @ (frame.ravel() - model.mean)).reshape(model.shape)


def whiten_apply(model: WhitenModel, frame: np.ndarray) -> np.ndarray:
    """Whiten then min-max rescale to [0, 1]. A constant result maps to zeros."""
    out = whiten_transform(model, frame)
    lo, hi = out.min(), out.max()
    if hi - lo <= 0:
        return np.zeros_like(out)
    return (out - lo) / (hi - lo)


def _check_window(n: int, name: str, minimum: int = 1) -> None:
    if n < minimum or n % 2 == 0:
        raise FrameError(f"{name} must be odd and >= {minimum}, got {n}")


def box_filter(mask: np.ndarray, u: int, v: int) -> np.ndarray:
    """Mean over a ``v`` rows by ``u`` columns window, zero padded at the border."""
    mask = check_gray(mask)
    _check_window(u, "u")
    _check_window(v, "v")
    if u == 1 and v == 1:
        return mask.copy()
    summed = ndimage.correlate(mask, np.ones((v, u)), mode="constant", cval=0.0)
    out = summed / (u * v)
    # zero padding can only pull values toward 0; clip away summation round-off
    return np.clip(out, min(0.0, mask.min()), max(0.0, mask.max()))


def median_filter(mask: np.ndarray, k: int) -> np.ndarray:
    mask = check_gray(mask)
    _check_window(k, "k", minimum=3)
    return ndimage.median_filter(mask, size=k, mode="nearest")


def dog_kernel(size: int = 3, sigma_center: float = 0.5, ratio: float = 1.6) -> np.ndarray:
    """Zero-sum difference of Gaussians: narrow positive centre, wide negative surround.

    The surround sigma is ``ratio * sigma_center``. After sampling, the kernel
    mean is subtracted so the weights sum to zero.
    """
    _check_window(size, "size", minimum=3)
    if sigma_center <= 0 or ratio <= 0:
        raise FrameError("sigmas must be positive")
    sigma_s = ratio * sigma_center
    half = size // 2
    y, x = np.mgrid[-half : half + 1, -half : half + 1]
    r2 = (x * x + y * y).astype(np.float64)
    center = np.exp(-r2 / (2 * sigma_center**2)) / (2 * np.pi * sigma_center**2)
    surround = np.exp(-r2 / (2 * sigma_s**2)) / (2 * np.pi * sigma_s**2)
    k = center - surround
    k -= k.mean()
    # one correction pass brings the sum to within a few ulps of zero
    k[half, half] -= k.sum()
    return k


def directional_kernel(direction: str, size: int = 3) -> np.ndarray:
    """Linear-ramp gradient kernel for one of ``left``, ``right``, ``up``, ``down``.

    ``left`` weights column ``j`` by ``(size - 1) / 2 - j``, giving columns
    ``[1, 0, -1]`` at size 3; ``right`` is its negation. ``down`` is the row
    analogue of ``left`` and ``up`` its negation.
    """
    _check_window(size, "size", minimum=3)
    ramp = (size - 1) / 2 - np.arange(size, dtype=np.float64)
    if direction == "left":
        return np.tile(ramp, (size, 1))
    if direction == "right":
        return -np.tile(ramp, (size, 1))
    if direction == "down":
        return np.tile(ramp[:, None], (1, size))
    if direction == "up":
        return -np.tile(ramp[:, None], (1, size))
    raise FrameError(f"unknown direction {direction!r}; expected one of {DIRECTIONS}")


def convolve_valid(frame: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Stride-1 correlation without padding: output shrinks by ``kernel - 1``."""
    kh, kw = kernel.shape
    h, w = frame.shape
    out = np.zeros((h - kh + 1, w - kw + 1))
    for a in range(kh):
        for b in range(kw):
            wgt = kernel[a, b]
            if wgt != 0.0:
                out += wgt * frame[a : a + h - kh + 1, b : b + w - kw + 1]
    return out


def convolve_same(frame: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Stride-1 correlation, zero padded, output the same size as the input."""
    return ndimage.correlate(np.asarray(frame, dtype=np.float64), kernel, mode="constant")


# -- file I/O ----------------------------------------------------------------

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


def read_raw(path: str | Path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()


def read_gray8(path: str | Path) -> np.ndarray:
    """Single-channel 8-bit image (e.g. a ground-truth or mask PNG)."""
    from PIL import Image

    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.uint8).copy()


def write_gray8(path: str | Path, data: np.ndarray) -> None:
    from PIL import Image

    Image.fromarray(np.asarray(data, dtype=np.uint8), mode="L").save(path)


def write_raw(path: str | Path, frame: np.ndarray) -> None:
    from PIL import Image

    Image.fromarray(check_raw(frame).astype(np.uint8), mode="RGB").save(path)


def gray_to_uint8(frame: np.ndarray) -> np.ndarray:
    return np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)
