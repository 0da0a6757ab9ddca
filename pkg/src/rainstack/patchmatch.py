"""
Reference-value estimation by exhaustive patch search.

A square patch around the query pixel is compared, by sum of squared
differences over all pixels and channels, with every candidate patch on a
stride grid of every library ``median_image``. The estimate for the query
pixel is the per-channel spatial mean of the co-located patch in the
matching ``clean_image``, averaged over the ``top_m`` best matches.

Search runs in two passes. The expanded form ``|B|^2 - 2 A.B + |A|^2``
scores all candidates for a batch of queries with one matrix product per
chunk of candidates; the best few of those are then rescored with the
direct difference form, which alone decides the ranking. Ties go to the
earlier candidate in (pair, row, column) order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .scene_io import ReferencePair

# Extra candidates kept from the first pass, to absorb its rounding error.
SHORTLIST_SLACK = 8
CHUNK_CANDIDATES = 16384


@dataclass(frozen=True)
class PatchMatchConfig:
    patch_size: int = 9
    top_m: int = 1
    search_stride: int = 1

    def __post_init__(self):
        if self.patch_size < 3 or self.patch_size % 2 == 0:
            raise ValueError(f"patch_size must be odd and >= 3, got {self.patch_size}")
        if self.top_m < 1:
            raise ValueError(f"top_m must be >= 1, got {self.top_m}")
        if self.search_stride < 1:
            raise ValueError(f"search_stride must be >= 1, got {self.search_stride}")

    @property
    def radius(self) -> int:
        return self.patch_size // 2


class Match(NamedTuple):
    ssd: float
    pair_index: int
    top: int
    left: int


def clamp_center(pos, shape, radius):
    """Shift ``pos`` inward so a patch of the given radius lies inside ``shape``."""
    y, x = int(pos[0]), int(pos[1])
    h, w = shape[0], shape[1]
    if not (0 <= y < h and 0 <= x < w):
        raise IndexError(f"position {(y, x)} outside image of shape {(h, w)}")
    return min(max(y, radius), h - 1 - radius), min(max(x, radius), w - 1 - radius)


def extract_patch(img: np.ndarray, pos, cfg: PatchMatchConfig) -> np.ndarray:
    p, r = cfg.patch_size, cfg.radius
    if img.shape[0] < p or img.shape[1] < p:
        raise ValueError(f"patch of size {p} does not fit in image of shape {img.shape[:2]}")
    cy, cx = clamp_center(pos, img.shape, r)
    return img[cy - r:cy + r + 1, cx - r:cx + r + 1]


def patch_ssd(a: np.ndarray, b: np.ndarray) -> float:
    d = a - b
    return float(np.sum(d * d))


def _candidate_windows(image: np.ndarray, p: int, stride: int) -> np.ndarray:
    """View of shape ``(rows, cols, p, p, C)`` over the stride-grid candidates."""
    win = sliding_window_view(image, (p, p), axis=(0, 1))[::stride, ::stride]
    return win.transpose(0, 1, 3, 4, 2)


def _shortlist(patches: np.ndarray, library, cfg: PatchMatchConfig, keep: int):
    """First pass: per query, the ``keep`` lowest approximate SSDs as (pair, row, col) arrays."""
    q = patches.shape[0]
    flat_q = patches.reshape(q, -1)
    q_norm = np.einsum("ij,ij->i", flat_q, flat_q)
    p, s = cfg.patch_size, cfg.search_stride

    best_score = np.full((q, 0), np.inf)
    best_ids = np.zeros((q, 0, 3), dtype=np.int64)
    for pi, pair in enumerate(library):
        med = pair.median_image
        if med.shape[0] < p or med.shape[1] < p:
            continue
        win = _candidate_windows(med, p, s)
        rows, cols = win.shape[:2]
        rows_per_chunk = max(1, CHUNK_CANDIDATES // cols)
        for r0 in range(0, rows, rows_per_chunk):
            block = win[r0:r0 + rows_per_chunk].reshape(-1, flat_q.shape[1])
            b_norm = np.einsum("ij,ij->i", block, block)
            approx = b_norm[None, :] - 2.0 * (flat_q @ block.T) + q_norm[:, None]
            n = approx.shape[1]
            ids = np.empty((n, 3), dtype=np.int64)
            local = np.arange(n)
            ids[:, 0] = pi
            ids[:, 1] = (r0 + local // cols) * s
            ids[:, 2] = (local % cols) * s
            if n > keep:
                part = np.argpartition(approx, keep - 1, axis=1)[:, :keep]
                approx = np.take_along_axis(approx, part, axis=1)
                chunk_ids = ids[part]
            else:
                chunk_ids = np.broadcast_to(ids, (q, n, 3))
            best_score = np.concatenate([best_score, approx], axis=1)
            best_ids = np.concatenate([best_ids, chunk_ids], axis=1)
            if best_score.shape[1] > keep:
                part = np.argpartition(best_score, keep - 1, axis=1)[:, :keep]
                best_score = np.take_along_axis(best_score, part, axis=1)
                best_ids = np.take_along_axis(best_ids, part[..., None], axis=1)
    if best_ids.shape[1] == 0:
        raise ValueError(f"no library image is large enough for a {p}x{p} patch")
    return best_ids


def find_matches_batch(patches, library: Sequence[ReferencePair], cfg: PatchMatchConfig | None = None) -> list[list[Match]]:
    """For each query patch in ``patches`` (shape ``(Q, p, p, 3)``), its ``top_m`` best matches."""
    cfg = cfg or PatchMatchConfig()
    if not library:
        raise ValueError("reference library is empty")
    patches = np.asarray(patches, dtype=np.float64)
    p = cfg.patch_size
    if patches.ndim != 4 or patches.shape[1:3] != (p, p):
        raise ValueError(f"patches must have shape (Q, {p}, {p}, C), got {patches.shape}")

    shortlist = _shortlist(patches, library, cfg, cfg.top_m + SHORTLIST_SLACK)
    results = []
    for a, ids in zip(patches, shortlist):
        scored = []
        for pi, top, left in ids:
            cand = library[pi].median_image[top:top + p, left:left + p]
            scored.append(Match(patch_ssd(a, cand), int(pi), int(top), int(left)))
        scored.sort()
        results.append(scored[:cfg.top_m])
    return results


def find_matches(patch, library: Sequence[ReferencePair], cfg: PatchMatchConfig | None = None) -> list[Match]:
    """The ``top_m`` lowest-SSD candidates for a single ``(p, p, 3)`` query patch."""
    return find_matches_batch(np.asarray(patch)[None], library, cfg)[0]


def estimate_pixels(query_img, positions, library: Sequence[ReferencePair],
                    cfg: PatchMatchConfig | None = None) -> np.ndarray:
    """Estimated clean RGB values, shape ``(Q, 3)``, at each of ``positions``."""
    cfg = cfg or PatchMatchConfig()
    query_img = np.asarray(query_img, dtype=np.float64)
    if not library:
        raise ValueError("reference library is empty")
    positions = list(positions)
    if not positions:
        return np.zeros((0, 3))
    patches = np.stack([extract_patch(query_img, pos, cfg) for pos in positions])
    p = cfg.patch_size
    out = []
    for matches in find_matches_batch(patches, library, cfg):
        means = [
            library[m.pair_index].clean_image[m.top:m.top + p, m.left:m.left + p].mean(axis=(0, 1))
            for m in matches
        ]
        out.append(np.mean(means, axis=0))
    return np.array(out)


def estimate_pixel(query_img, pos, library: Sequence[ReferencePair],
                   cfg: PatchMatchConfig | None = None) -> np.ndarray:
    """Estimated clean RGB value at ``pos`` of ``query_img``."""
    return estimate_pixels(query_img, [pos], library, cfg)[0]
