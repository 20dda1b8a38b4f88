"""
Verification error rates and latent-space separation measures.
"""
from dataclasses import dataclass, field

import numpy as np

FORGERY_KINDS = ('skilled', 'random')


@dataclass
class ScoreSet:
    """
    Classifier scores of genuine signatures and forgeries.

    ``forgery_kinds`` runs parallel to ``forgery_scores`` ('skilled' or
    'random'). Higher scores mean "more genuine".
    """

    genuine_scores: np.ndarray
    forgery_scores: np.ndarray
    forgery_kinds: list = field(default_factory=list)

    def __post_init__(self):
        self.genuine_scores = np.asarray(self.genuine_scores, dtype=np.float64).reshape(-1)
        self.forgery_scores = np.asarray(self.forgery_scores, dtype=np.float64).reshape(-1)
        if not self.forgery_kinds:
            self.forgery_kinds = ['skilled'] * self.forgery_scores.size
        if len(self.forgery_kinds) != self.forgery_scores.size:
            raise ValueError("forgery_kinds must match forgery_scores in length")

    def only(self, kind):
        """ScoreSet restricted to one forgery kind."""
        mask = np.array([k == kind for k in self.forgery_kinds], dtype=bool)
        return ScoreSet(self.genuine_scores, self.forgery_scores[mask], [kind] * int(mask.sum()))

    def has_both_classes(self):
        return self.genuine_scores.size > 0 and self.forgery_scores.size > 0


def frr_far(scores, t):
    """
    Error rates at threshold ``t`` with the accept rule score >= t.

    Args:
        scores (ScoreSet): Scores to evaluate
        t (float): Threshold; may be +/- inf

    Returns:
        tuple: (frr, far)

    Raises:
        ValueError: If either class is empty
    """
    if not scores.has_both_classes():
        raise ValueError("frr_far needs genuine and forgery scores")
    frr = np.count_nonzero(scores.genuine_scores < t) / scores.genuine_scores.size
    far = np.count_nonzero(scores.forgery_scores >= t) / scores.forgery_scores.size
    return float(frr), float(far)


def candidate_thresholds(scores):
    """
    Sorted sweep points: every distinct score, the midpoints between
    neighbours, and one point beyond each end.
    """
    distinct = np.unique(np.concatenate([scores.genuine_scores, scores.forgery_scores]))
    mids = 0.5 * (distinct[:-1] + distinct[1:])
    return np.sort(np.concatenate([[distinct[0] - 1.0], distinct, mids, [distinct[-1] + 1.0]]))


def eer(scores):
    """
    Equal error rate by threshold sweep.

    FRR rises and FAR falls along the sweep. The first sweep point where
    FRR >= FAR is located; an exact tie returns that point, otherwise the
    crossing is linearly interpolated with the previous point.

    Args:
        scores (ScoreSet): Both classes nonempty

    Returns:
        tuple: (eer, threshold)
    """
    if not scores.has_both_classes():
        raise ValueError("eer needs genuine and forgery scores")
    thresholds = candidate_thresholds(scores)
    genuine = np.sort(scores.genuine_scores)
    forgery = np.sort(scores.forgery_scores)
    n_g, n_f = genuine.size, forgery.size
    fr_count = np.searchsorted(genuine, thresholds, side='left')
    fa_count = n_f - np.searchsorted(forgery, thresholds, side='left')
    frr = fr_count / n_g
    far = fa_count / n_f

    # sign of frr - far from integer counts, so exact ties stay ties
    cross = fr_count * n_f - fa_count * n_g
    k = int(np.argmax(cross >= 0))
    if cross[k] == 0 or k == 0:
        return float(frr[k]), float(thresholds[k])

    diff = frr - far

    lam = -diff[k - 1] / (diff[k] - diff[k - 1])
    rate = frr[k - 1] + lam * (frr[k] - frr[k - 1])
    threshold = thresholds[k - 1] + lam * (thresholds[k] - thresholds[k - 1])
    return float(rate), float(threshold)


def separation_score(features_by_class):
    """
    Minimum distance between class centroids divided by the largest
    within-class RMS spread.

    Args:
        features_by_class (dict): Class name -> (n, d) feature array

    Returns:
        float: Larger means better separated classes
    """
    centroids = {}
    spreads = []
    for name, feats in features_by_class.items():
        feats = np.asarray(feats, dtype=np.float64)
        centroids[name] = feats.mean(axis=0)
        spreads.append(np.sqrt(np.mean(np.sum((feats - centroids[name]) ** 2, axis=1))))

    names = sorted(centroids)
    gaps = [
        np.linalg.norm(centroids[a] - centroids[b])
        for i, a in enumerate(names) for b in names[i + 1:]
    ]
    spread = max(spreads)
    return float(min(gaps) / spread) if spread > 0 else float('inf')


def gauss_separation_ratio(genuine, forgeries):
    """
    Mean Gaussian distance genuine-vs-forgery over mean distance
    genuine-vs-genuine (distinct pairs).

    Args:
        genuine (LatentGaussian): Encodings of genuine signatures, one per row
        forgeries (LatentGaussian): Encodings of forgeries, one per row

    Returns:
        tuple: (ratio, mean_gg, mean_gf)
    """
    def pairwise(a_mu, a_sigma, b_mu, b_sigma):
        d_mu = np.sum((a_mu[:, None, :] - b_mu[None, :, :]) ** 2, axis=2)
        d_sigma = np.sum((a_sigma[:, None, :] - b_sigma[None, :, :]) ** 2, axis=2)
        return d_mu + d_sigma

    gg = pairwise(genuine.mu, genuine.sigma, genuine.mu, genuine.sigma)
    n = gg.shape[0]
    mean_gg = float(gg[~np.eye(n, dtype=bool)].mean()) if n > 1 else 0.0
    mean_gf = float(pairwise(genuine.mu, genuine.sigma, forgeries.mu, forgeries.sigma).mean())
    ratio = mean_gf / mean_gg if mean_gg > 0 else float('inf')
    return ratio, mean_gg, mean_gf
