"""
Global per-channel affine brightness correction.

A handful of pixels is sampled from the image being corrected; a reference
value for each one is estimated with :mod:`rainstack.patchmatch`; the gain
and offset of each channel are then the ordinary least-squares fit of the
reference values on the observed values. Averaging the fits of several
independent sample sets trades a few extra searches for a steadier result.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFitError, DegenerateSampleError
from .patchmatch import PatchMatchConfig, estimate_pixels
from .scene_io import as_image

logger = logging.getLogger(__name__)

DEFAULT_K = 10
DEFAULT_N = 10
# Applied to (K * sum(x^2) - sum(x)^2) / K^2, i.e. the population variance of x.
DENOM_TOL = 1e-12


@dataclass(frozen=True)
class PixelSampleSet:
    indices: np.ndarray    # (K, 2) row, column
    observed: np.ndarray   # (K, 3)
    estimated: np.ndarray  # (K, 3)

    def __post_init__(self):
        k = len(self.indices)
        if k < 2:
            raise ValueError(f"a sample set needs K >= 2 pixels, got {k}")
        if self.observed.shape != (k, 3) or self.estimated.shape != (k, 3):
            raise ValueError("observed and estimated must both have shape (K, 3)")

    @property
    def K(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class ChannelAffine:
    gain: np.ndarray
    offset: np.ndarray
    n_fits: int = 1
    skipped: tuple = field(default=())

    def __post_init__(self):
        gain = np.asarray(self.gain, dtype=np.float64).reshape(3)
        offset = np.asarray(self.offset, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(gain)) and np.all(np.isfinite(offset))):
            raise ValueError("affine coefficients must be finite")
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "offset", offset)

    @classmethod
    def identity(cls):
        return cls(np.ones(3), np.zeros(3))


def _normalized_denominators(x: np.ndarray) -> np.ndarray:
    k = x.shape[0]
    return (k * np.sum(x * x, axis=0) - np.sum(x, axis=0) ** 2) / (k * k)


def _draw_positions(img: np.ndarray, K: int, rng_seed: int, max_retries: int):
    if K < 2:
        raise ValueError(f"K must be >= 2, got {K}")
    h, w = img.shape[:2]
    if h * w < K:
        raise ValueError(f"image with {h * w} pixels cannot supply {K} samples")

    flat_img = img.reshape(-1, 3)
    if np.any(_normalized_denominators(flat_img) <= DENOM_TOL):
        raise DegenerateSampleError("image is constant in at least one channel")

    rng = np.random.default_rng(rng_seed)
    for _ in range(max_retries + 1):
        flat = rng.choice(h * w, size=K, replace=False)
        observed = flat_img[flat]
        if np.all(_normalized_denominators(observed) > DENOM_TOL):
            return np.stack(np.divmod(flat, w), axis=1), observed.copy()
    raise DegenerateSampleError(f"no non-degenerate sample set after {max_retries} redraws")


def _query_for(img, query_img):
    if query_img is None:
        return img
    query = as_image(query_img, "query_img")
    if query.shape[:2] != img.shape[:2]:
        raise ValueError(f"query image {query.shape[:2]} and image {img.shape[:2]} differ in size")
    return query


def draw_sample_set(img, K: int = DEFAULT_K, rng_seed: int = 0, library=(), cfg: PatchMatchConfig | None = None,
                    query_img=None, max_retries: int = 100) -> PixelSampleSet:
    """
    Sample ``K`` distinct pixels uniformly without replacement and estimate their references.

    Observed values come from ``img``; patches are matched on ``query_img``
    (``img`` itself when omitted). A draw whose observed values have no
    spread in some channel is replaced by a fresh draw from the same
    generator, at most ``max_retries`` times.
    """
    img = as_image(img)
    query = _query_for(img, query_img)
    indices, observed = _draw_positions(img, K, rng_seed, max_retries)
    estimated = estimate_pixels(query, indices, library, cfg)
    return PixelSampleSet(indices=indices, observed=observed, estimated=estimated)


def fit_affine(samples: PixelSampleSet) -> ChannelAffine:
    """Closed-form least squares of ``estimated`` on ``observed``, per channel."""
    x, y = samples.observed, samples.estimated
    k = samples.K
    gains, offsets = np.empty(3), np.empty(3)
    for c in range(3):
        xc, yc = x[:, c], y[:, c]
        sx, sy = xc.sum(), yc.sum()
        sxy, sxx = (xc * yc).sum(), (xc * xc).sum()
        den = k * sxx - sx * sx
        if den / (k * k) <= DENOM_TOL:
            raise DegenerateFitError(c, den)
        gains[c] = (k * sxy - sx * sy) / den
        offsets[c] = sy / k - gains[c] * sx / k
    return ChannelAffine(gains, offsets)


def apply_affine(img, coeffs: ChannelAffine) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    return np.clip(coeffs.gain * img + coeffs.offset, 0.0, 1.0)


def fit_affine_plus(img, N: int = DEFAULT_N, K: int = DEFAULT_K, base_seed: int = 0, library=(),
                    cfg: PatchMatchConfig | None = None, query_img=None) -> ChannelAffine:
    """
    Mean of the per-set fits over ``N`` sample sets seeded ``base_seed .. base_seed + N - 1``.

    Sets that fail to yield a fit are skipped and listed in ``skipped``.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    img = as_image(img)
    query = _query_for(img, query_img)
    drawn, skipped = [], []
    for seed in range(base_seed, base_seed + N):
        try:
            drawn.append((seed,) + _draw_positions(img, K, seed, 100))
        except DegenerateSampleError as exc:
            logger.warning("sample set with seed %d skipped: %s", seed, exc)
            skipped.append(seed)

    # One batched search for every sampled pixel of every set.
    estimated = estimate_pixels(query, [pos for _, idx, _ in drawn for pos in idx], library, cfg) \
        if drawn else np.zeros((0, 3))
    fits, start = [], 0
    for seed, indices, observed in drawn:
        samples = PixelSampleSet(indices, observed, estimated[start:start + len(indices)])
        start += len(indices)
        try:
            fits.append(fit_affine(samples))
        except DegenerateFitError as exc:
            logger.warning("sample set with seed %d skipped: %s", seed, exc)
            skipped.append(seed)
    if not fits:
        raise DegenerateSampleError(f"all {N} sample sets were degenerate")
    return ChannelAffine(
        gain=np.mean([f.gain for f in fits], axis=0),
        offset=np.mean([f.offset for f in fits], axis=0),
        n_fits=len(fits),
        skipped=tuple(sorted(skipped)),
    )


def format_coefficients(scene_id: str, coeffs: ChannelAffine) -> str:
    """Key-value text sidecar describing a fitted correction."""
    lines = [f"scene_id={scene_id}"]
    for c, name in enumerate("rgb"):
        lines.append(f"gain_{name}={float(coeffs.gain[c])!r}")
        lines.append(f"offset_{name}={float(coeffs.offset[c])!r}")
    lines.append(f"n_fits={coeffs.n_fits}")
    lines.append("skipped_seeds=" + ",".join(str(s) for s in coeffs.skipped))
    return "\n".join(lines) + "\n"


def parse_coefficients(text: str) -> tuple[str, ChannelAffine]:
    kv = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
    gain = [float(kv[f"gain_{n}"]) for n in "rgb"]
    offset = [float(kv[f"offset_{n}"]) for n in "rgb"]
    skipped = tuple(int(s) for s in kv.get("skipped_seeds", "").split(",") if s)
    return kv["scene_id"], ChannelAffine(gain, offset, int(kv.get("n_fits", 1)), skipped)
