"""Pose images: a window of poses as a time-by-joint matrix, min-max scaled
to [0, 255] and resized, then embedded with a convolutional encoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import core
from .core import PoselangError

# Column order chains body parts head-first: nose, left arm, right arm,
# neck, left leg, right leg, eyes, ears.
CHAIN_ORDER = (
    core.NOSE,
    core.L_SHOULDER, core.L_ELBOW, core.L_WRIST,
    core.R_SHOULDER, core.R_ELBOW, core.R_WRIST,
    core.NECK,
    core.L_HIP, core.L_KNEE, core.L_ANKLE,
    core.R_HIP, core.R_KNEE, core.R_ANKLE,
    core.L_EYE, core.R_EYE,
    core.L_EAR, core.R_EAR,
)


class EmptyWindow(PoselangError):
    pass


class ShapeMismatch(PoselangError):
    pass


def chain_order() -> tuple[int, ...]:
    return CHAIN_ORDER


@dataclass
class PoseImage:
    """Resized 2-channel (x, y) matrix with values in [0, 255]."""

    values: np.ndarray  # (H, W, 2)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def bilinear_resize(mat: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Align-corners bilinear resize of a 2D matrix.

    With matching input and output sizes the sample grid lands exactly on
    the source grid, so the resize is the identity.
    """
    h, w = mat.shape
    H, W = out_hw

    def grid(n_in, n_out):
        if n_out == 1 or n_in == 1:
            return np.zeros(n_out)
        return np.arange(n_out) * (n_in - 1) / (n_out - 1)

    ys, xs = grid(h, H), grid(w, W)
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = mat[np.ix_(y0, x0)] * (1 - fx) + mat[np.ix_(y0, x1)] * fx
    bot = mat[np.ix_(y1, x0)] * (1 - fx) + mat[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def encode_pose_image(window_xy: np.ndarray,
                      out_size: tuple[int, int]) -> PoseImage:
    """Encode a window of preprocessed poses as a pose image.

    window_xy is (frames, 18, 2).  Rows are frames; columns follow
    CHAIN_ORDER.  Each channel is min-max mapped to [0, 255] per image
    (a constant channel maps to 127.5) and bilinearly resized.
    """
    window_xy = np.asarray(window_xy, dtype=np.float64)
    if window_xy.ndim != 3 or window_xy.shape[0] == 0:
        raise EmptyWindow("window must hold at least one (18, 2) pose")
    if window_xy.shape[1:] != (core.N_JOINTS, 2):
        raise ShapeMismatch(f"window shape {window_xy.shape}")

    chained = window_xy[:, CHAIN_ORDER, :]  # (frames, 18, 2)
    channels = []
    for c in range(2):
        mat = chained[:, :, c]
        lo, hi = mat.min(), mat.max()
        if hi - lo < 1e-12:
            scaled = np.full_like(mat, 127.5)
        else:
            scaled = (mat - lo) * (255.0 / (hi - lo))
        channels.append(bilinear_resize(scaled, out_size))
    values = np.clip(np.stack(channels, axis=-1), 0.0, 255.0)
    return PoseImage(values=values)


def embed(image: PoseImage, encoder) -> np.ndarray:
    """L2-normalized penultimate-layer embedding of a pose image."""
    vec = encoder.embed_one(image.values)
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        return vec
    return vec / norm


def save_pgm(image: PoseImage, path_prefix) -> None:
    """Dump each channel as an 8-bit PGM for eyeballing."""
    for c, name in enumerate(("x", "y")):
        mat = np.round(image.values[:, :, c]).astype(np.uint8)
        header = f"P5\n{mat.shape[1]} {mat.shape[0]}\n255\n".encode("ascii")
        with open(f"{path_prefix}_{name}.pgm", "wb") as fh:
            fh.write(header + mat.tobytes())
