"""Vectorized planar collision primitives.

All functions broadcast over leading batch axes; the last axis of every
point array has length 2.  Discs overlap when the distance between centers
is strictly below the sum of radii, so touching bodies do not collide.
"""

from __future__ import annotations

import numpy as np


def point_segment_distance(p, a, b):
    """Euclidean distance from points ``p`` to segments ``[a, b]``."""
    ab = b - a
    ap = p - a
    denom = np.einsum("...i,...i->...", ab, ab)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.einsum("...i,...i->...", ap, ab) / denom
    t = np.where(denom > 0, np.clip(t, 0.0, 1.0), 0.0)
    closest = a + t[..., None] * ab
    return np.linalg.norm(p - closest, axis=-1)


def point_box_distance(p, center, half):
    """Distance from points to axis-aligned boxes (0 inside)."""
    d = np.maximum(np.abs(p - center) - half, 0.0)
    return np.linalg.norm(d, axis=-1)


def segment_hits_box(a, b, center, half):
    """Closed segment vs closed axis-aligned box, by Liang-Barsky clipping."""
    lo = center - half
    hi = center + half
    d = b - a
    shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1], center.shape[:-1], half.shape[:-1])
    t0 = np.zeros(shape)
    t1 = np.ones(shape)
    ok = np.ones(shape, dtype=bool)
    for k in range(2):
        dk = d[..., k]
        ak = a[..., k]
        flat = dk == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            te = (lo[..., k] - ak) / dk
            tx = (hi[..., k] - ak) / dk
        near = np.where(flat, -np.inf, np.minimum(te, tx))
        far = np.where(flat, np.inf, np.maximum(te, tx))
        ok &= ~flat | ((ak >= lo[..., k]) & (ak <= hi[..., k]))
        t0 = np.maximum(t0, near)
        t1 = np.minimum(t1, far)
    return ok & (t0 <= t1)


def _orient(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def _on_box(a, b, p):
    return (
        (np.minimum(a[..., 0], b[..., 0]) <= p[..., 0])
        & (p[..., 0] <= np.maximum(a[..., 0], b[..., 0]))
        & (np.minimum(a[..., 1], b[..., 1]) <= p[..., 1])
        & (p[..., 1] <= np.maximum(a[..., 1], b[..., 1]))
    )


def segments_intersect(a, b, c, d):
    """Closed segment intersection test for ``[a, b]`` and ``[c, d]``."""
    o1 = _orient(a, b, c)
    o2 = _orient(a, b, d)
    o3 = _orient(c, d, a)
    o4 = _orient(c, d, b)
    proper = (o1 * o2 < 0) & (o3 * o4 < 0)
    touch = (
        ((o1 == 0) & _on_box(a, b, c))
        | ((o2 == 0) & _on_box(a, b, d))
        | ((o3 == 0) & _on_box(c, d, a))
        | ((o4 == 0) & _on_box(c, d, b))
    )
    return proper | touch


def arm_joints(angles, base, lengths):
    """Forward kinematics of a planar serial arm.

    ``angles`` has shape ``(..., L)`` with relative joint angles; the result
    has shape ``(..., L + 1, 2)`` and starts with the base point.
    """
    phi = np.cumsum(angles, axis=-1)
    steps = np.stack([np.cos(phi), np.sin(phi)], axis=-1) * np.asarray(lengths)[:, None]
    joints = np.cumsum(steps, axis=-2) + base
    base_row = np.broadcast_to(np.asarray(base, dtype=float), joints.shape[:-2] + (1, 2))
    return np.concatenate([base_row, joints], axis=-2)
