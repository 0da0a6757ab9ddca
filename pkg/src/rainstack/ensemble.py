"""Convex blending of the mean restored image with the temporal median."""

import numpy as np

from .scene_io import check_same_shape

DEFAULT_WEIGHT = 0.9


def check_weight(w) -> float:
    w = float(w)
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"ensemble weight must lie in [0, 1], got {w}")
    return w


def weighted_average(mean_img, median_img, w=DEFAULT_WEIGHT) -> np.ndarray:
    """
    ``w * mean_img + (1 - w) * median_img``, elementwise.

    Evaluated as ``median + w * (mean - median)`` so that equal inputs come
    back unchanged for every ``w``.
    """
    w = check_weight(w)
    mean_img = np.asarray(mean_img, dtype=np.float64)
    median_img = np.asarray(median_img, dtype=np.float64)
    check_same_shape(mean_img, median_img, "mean and median images")
    if w == 1.0:
        return mean_img.copy()
    if w == 0.0:
        return median_img.copy()
    return median_img + w * (mean_img - median_img)


def weight_grid(step=0.01):
    n = int(round(1.0 / step))
    return np.arange(n + 1) / n


def tune_weight(mean_imgs, median_imgs, ground_truths, step=0.01):
    """
    Grid search for the ensemble weight maximizing mean PSNR over scenes.

    Returns ``(best_w, scores)`` where ``scores`` maps every grid weight to
    its mean PSNR. Ties resolve to the smallest weight.
    """
    from .metrics import psnr

    mean_imgs, median_imgs, ground_truths = list(mean_imgs), list(median_imgs), list(ground_truths)
    if not (len(mean_imgs) == len(median_imgs) == len(ground_truths)) or not mean_imgs:
        raise ValueError("need equally many (>= 1) mean, median and ground-truth images")

    scores = {}
    for w in weight_grid(step):
        vals = [psnr(weighted_average(m, d, w), gt)
                for m, d, gt in zip(mean_imgs, median_imgs, ground_truths)]
        scores[float(w)] = float(np.mean(vals))
    best = max(scores, key=lambda k: (scores[k], -k))
    return best, scores
