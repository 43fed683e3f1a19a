"""Trajectory descriptors: per-joint position/motion streams plus
pairwise-orientation and triple inner-angle relational streams."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import JointSubset, PoseSequence, PoselangError, joint_subset_view

DEGENERATE_SUM = 1e-8

NTRAJ = "ntraj"
NTRAJ_PLUS = "ntraj+"


class SequenceTooShort(PoselangError):
    pass


def stream_kinds(gaps, feature_kind: str = NTRAJ_PLUS) -> list[str]:
    """Canonical stream-kind order; codebooks and histograms follow it."""
    kinds = ["posx", "posy"]
    for prefix in ("dx", "dy", "angle"):
        kinds += [f"{prefix}{s}" for s in sorted(gaps)]
    if feature_kind == NTRAJ_PLUS:
        kinds += ["pair_orient", "inner_angle"]
    return kinds


@dataclass(frozen=True)
class StreamId:
    """Identity of one value stream: kind, optional gap, joint scope."""

    kind: str
    gap: int | None
    joints: tuple[int, ...]


@dataclass(frozen=True)
class TrajectoryDescriptor:
    stream: StreamId
    start_frame: int
    values: np.ndarray
    degenerate: bool


@dataclass
class StreamBlock:
    """All streams of one kind, stacked: values is (time, n_streams)."""

    kind: str
    gap: int | None
    values: np.ndarray
    scopes: list[tuple[int, ...]]


def _wrap_angle(a: np.ndarray) -> np.ndarray:
    # Map the -pi branch onto +pi so angles live in (-pi, pi].
    return np.where(a <= -np.pi, np.pi, a)


def raw_streams(seq: PoseSequence | object, subset: JointSubset,
                gaps, feature_kind: str = NTRAJ_PLUS) -> dict[str, StreamBlock]:
    """Compute every per-frame stream value for the subset's joints.

    Returns one block per stream kind.  Motion blocks at gap s are s frames
    shorter than the sequence.
    """
    if isinstance(seq, PoseSequence):
        view = joint_subset_view(seq, subset)
    else:
        view = seq
    pos = view.xy  # (L, J, 2)
    n, J = pos.shape[0], pos.shape[1]
    gaps = tuple(sorted(gaps))
    if n < max(gaps) + 1:
        raise SequenceTooShort(f"{n} frames < max gap {max(gaps)} + 1")

    joints = view.indices
    blocks: dict[str, StreamBlock] = {}
    single = [(j,) for j in joints]
    blocks["posx"] = StreamBlock("posx", None, pos[:, :, 0], single)
    blocks["posy"] = StreamBlock("posy", None, pos[:, :, 1], single)

    for s in gaps:
        d = pos[s:] - pos[:-s]  # (L-s, J, 2)
        ang = _wrap_angle(np.arctan2(d[:, :, 1], d[:, :, 0]))
        # A joint that barely moved has no meaningful direction; atan2 of
        # rounding noise would otherwise yield an arbitrary angle.
        ang[np.hypot(d[:, :, 0], d[:, :, 1]) < 1e-9] = 0.0
        blocks[f"dx{s}"] = StreamBlock("dx", s, d[:, :, 0], single)
        blocks[f"dy{s}"] = StreamBlock("dy", s, d[:, :, 1], single)
        blocks[f"angle{s}"] = StreamBlock("angle", s, ang, single)

    if feature_kind == NTRAJ_PLUS:
        pairs = list(combinations(range(J), 2))
        if pairs:
            pi = np.array([p[0] for p in pairs])
            pj = np.array([p[1] for p in pairs])
            d = pos[:, pj, :] - pos[:, pi, :]
            vals = _wrap_angle(np.arctan2(d[:, :, 1], d[:, :, 0]))
        else:
            vals = np.zeros((n, 0))
        blocks["pair_orient"] = StreamBlock(
            "pair_orient", None, vals,
            [(joints[i], joints[j]) for i, j in pairs])

        scopes: list[tuple[int, ...]] = []
        cols = []
        for a, b, c in combinations(range(J), 3):
            for vertex, arms in ((a, (b, c)), (b, (a, c)), (c, (a, b))):
                u = pos[:, arms[0], :] - pos[:, vertex, :]
                w = pos[:, arms[1], :] - pos[:, vertex, :]
                cross = u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0]
                dot = (u * w).sum(axis=1)
                cols.append(np.arctan2(np.abs(cross), dot))
                scopes.append((joints[vertex], joints[arms[0]], joints[arms[1]]))
        vals = np.stack(cols, axis=1) if cols else np.zeros((n, 0))
        blocks["inner_angle"] = StreamBlock("inner_angle", None, vals, scopes)

    return blocks


@dataclass
class DescriptorBlock:
    """L1-normalized T-step trajectories for one stream kind.

    values is (n_starts, n_streams, T); descriptor (t, c) covers start
    frame t of stream scopes[c].
    """

    kind: str
    gap: int | None
    values: np.ndarray
    start_frames: np.ndarray
    scopes: list[tuple[int, ...]]
    degenerate: np.ndarray  # (n_starts, n_streams) bool


def _normalize_block(windows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sums = np.abs(windows).sum(axis=-1, keepdims=True)
    degenerate = sums[..., 0] < DEGENERATE_SUM
    safe = np.where(sums < DEGENERATE_SUM, 1.0, sums)
    out = windows / safe
    out[degenerate] = 0.0
    return out, degenerate


def extract_descriptors(seq, subset: JointSubset, traj_len: int, gaps,
                        feature_kind: str = NTRAJ_PLUS) -> dict[str, DescriptorBlock]:
    """Slide a length-T window over every stream and L1-normalize.

    Zero-sum trajectories come out as all-zero vectors tagged degenerate so
    descriptor counts stay independent of content.
    """
    gaps = tuple(sorted(gaps))
    n = seq.n_frames if hasattr(seq, "n_frames") else seq.xy.shape[0]
    if n < traj_len + max(gaps):
        raise SequenceTooShort(
            f"{n} frames < traj_len {traj_len} + max gap {max(gaps)}")
    blocks = raw_streams(seq, subset, gaps, feature_kind)
    out: dict[str, DescriptorBlock] = {}
    for key, blk in blocks.items():
        if blk.values.shape[1] == 0:
            out[key] = DescriptorBlock(
                blk.kind, blk.gap,
                np.zeros((0, 0, traj_len)), np.zeros(0, dtype=int), [],
                np.zeros((0, 0), dtype=bool))
            continue
        # (n_starts, n_streams, T)
        windows = sliding_window_view(blk.values, traj_len, axis=0).copy()
        values, degenerate = _normalize_block(windows)
        out[key] = DescriptorBlock(
            blk.kind, blk.gap, values,
            np.arange(values.shape[0]), blk.scopes, degenerate)
    return out


def iter_descriptors(blocks: dict[str, DescriptorBlock]):
    """Flatten descriptor blocks into TrajectoryDescriptor records."""
    for blk in blocks.values():
        for c, scope in enumerate(blk.scopes):
            sid = StreamId(blk.kind, blk.gap, scope)
            for t in blk.start_frames:
                yield TrajectoryDescriptor(
                    stream=sid, start_frame=int(t),
                    values=blk.values[t, c], degenerate=bool(blk.degenerate[t, c]))


def descriptor_census(n_joints: int, gaps, feature_kind: str) -> dict[str, int]:
    """Number of streams per kind for a J-joint subset."""
    J = n_joints
    census = {"posx": J, "posy": J}
    for s in sorted(gaps):
        census[f"dx{s}"] = J
        census[f"dy{s}"] = J
        census[f"angle{s}"] = J
    if feature_kind == NTRAJ_PLUS:
        census["pair_orient"] = comb(J, 2)
        census["inner_angle"] = 3 * comb(J, 3)
    return census


def descriptor_count(n_frames: int, traj_len: int, gap: int | None) -> int:
    """Start-frame count for one stream."""
    s = gap or 0
    return max(0, n_frames - traj_len + 1 - s)
