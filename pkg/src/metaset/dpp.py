"""Joint DPP kernels, subset likelihoods and greedy diversity maximization."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

JITTER = 1e-10
PSD_TOL = 1e-8
MAX_EXACT_LIKELIHOOD = 20


class NotPSDError(ValueError):
    """Kernel has eigenvalues below the PSD tolerance."""


@dataclass
class SelectionResult:
    indices: list
    gains: list
    score: float
    w: float | None = None
    score_shape: float | None = None
    score_property: float | None = None
    likelihood: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "w": self.w,
            "k": len(self.indices),
            "indices": [int(i) for i in self.indices],
            "gains": [float(g) for g in self.gains],
            "score": float(self.score),
            "score_shape": None if self.score_shape is None else float(self.score_shape),
            "score_property": None if self.score_property is None else float(self.score_property),
        }
        out.update(self.extra)
        return out


def _check_square(L):
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError(f"kernel must be square, got shape {L.shape}")
    return L


def joint_kernel(LP, LS, w, tol=PSD_TOL):
    """``(1 - w) * LP + w * LS``.

    Both inputs must already be PSD (within ``tol``); a convex combination
    of PSD matrices stays PSD.  No repair is applied, so ``w=0`` and
    ``w=1`` reproduce the inputs exactly.
    """
    LP, LS = _check_square(LP), _check_square(LS)
    if LP.shape != LS.shape:
        raise ValueError(f"kernel shapes differ: {LP.shape} vs {LS.shape}")
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"weight must lie in [0, 1], got {w}")
    for name, K in (("property", LP), ("shape", LS)):
        lam = np.linalg.eigvalsh(0.5 * (K + K.T)).min()
        if lam < -tol:
            raise NotPSDError(f"{name} kernel has eigenvalue {lam:.3e} < -{tol}")
    return (1.0 - w) * LP + w * LS


def dpp_likelihood(L, subset):
    """``P(M) = det(L_M) / det(L + I)`` for ground sets of at most 20 items."""
    L = _check_square(L)
    n = L.shape[0]
    if n > MAX_EXACT_LIKELIHOOD:
        raise ValueError(f"exact likelihood limited to n <= {MAX_EXACT_LIKELIHOOD}, got {n}")
    idx = list(subset)
    num = np.linalg.det(L[np.ix_(idx, idx)]) if idx else 1.0
    return float(num / np.linalg.det(L + np.eye(n)))


def diversity_score(L, subset, jitter=JITTER):
    """``log det(L_M + jitter * I)`` via Cholesky; ``-inf`` if that fails."""
    L = _check_square(L)
    idx = list(subset)
    if not idx:
        return 0.0
    sub = L[np.ix_(idx, idx)] + jitter * np.eye(len(idx))
    try:
        chol = np.linalg.cholesky(sub)
    except np.linalg.LinAlgError:
        return float("-inf")
    return float(2.0 * np.sum(np.log(np.diag(chol))))


def greedy_select(L, k, jitter=JITTER, tol=PSD_TOL):
    """Greedy log-det maximization with an incrementally grown Cholesky factor.

    At each step the gain of item ``i`` is ``log(L_ii + jitter - |c_i|^2)``,
    where ``c_i`` is the row of the factor against the items chosen so far.
    Ties go to the lowest index.  Runs in ``O(N k^2)``.
    """
    L = _check_square(L)
    n = L.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"subset size must lie in [1, {n}], got {k}")
    residual = np.diag(L).astype(float) + jitter  # Schur complements d_i^2
    factor = np.zeros((k, n))
    available = np.ones(n, dtype=bool)
    indices, gains = [], []
    for step in range(k):
        cand = np.where(available, residual, -np.inf)
        best = int(np.argmax(cand))
        d2 = residual[best]
        if d2 < -tol:
            raise NotPSDError(f"negative Schur complement {d2:.3e}; kernel is not PSD")
        d2 = max(d2, jitter)
        gain = float(np.log(d2))
        if gains and gain > gains[-1] + 1e-9 * max(1.0, abs(gains[-1])):
            raise NotPSDError("greedy gains increased; kernel is not PSD")
        indices.append(best)
        gains.append(gain)
        available[best] = False
        if step == k - 1:
            break
        d = np.sqrt(d2)
        row = (L[best] - factor[:step, best] @ factor[:step]) / d
        factor[step] = row
        residual = residual - row * row
    result = SelectionResult(indices, gains, diversity_score(L, indices, jitter))
    return result


def subset_scores(L, k, jitter=JITTER):
    """All ``C(N, k)`` subsets with their log-det scores (small N only)."""
    L = _check_square(L)
    combos = list(itertools.combinations(range(L.shape[0]), k))
    scores = np.array([diversity_score(L, c, jitter) for c in combos])
    return combos, scores


def exhaustive_map(L, k, jitter=JITTER):
    combos, scores = subset_scores(L, k, jitter)
    best = int(np.argmax(scores))
    return list(combos[best]), float(scores[best])


def normalization_by_enumeration(L):
    """``sum_M det(L_M)`` over all ``2^N`` subsets (the empty set counts 1)."""
    L = _check_square(L)
    n = L.shape[0]
    total = 1.0
    for r in range(1, n + 1):
        for c in itertools.combinations(range(n), r):
            total += np.linalg.det(L[np.ix_(c, c)])
    return float(total)


def sweep(LP, LS, weights, k, jitter=JITTER):
    """Greedy selections over a list of weights, scored in each space."""
    results = []
    for w in weights:
        res = greedy_select(joint_kernel(LP, LS, w), k, jitter)
        res.w = float(w)
        res.score_shape = diversity_score(LS, res.indices, jitter)
        res.score_property = diversity_score(LP, res.indices, jitter)
        results.append(res)
    return results


@dataclass
class BaselineScores:
    scores: np.ndarray
    subsets: list

    def quantile(self, q):
        return float(np.quantile(self.scores, q))

    def rank_of(self, score):
        """Fraction of random subsets scoring strictly below ``score``."""
        return float(np.mean(self.scores < score))

    def summary(self):
        qs = (0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0)
        return {f"q{int(q * 100):02d}": self.quantile(q) for q in qs}


def random_subsets(n, k, trials, seed):
    rng = np.random.default_rng(seed)
    return [np.sort(rng.choice(n, size=k, replace=False)) for _ in range(trials)]


def random_baseline(L, k, trials, seed, jitter=JITTER):
    """Log-det scores of ``trials`` uniform random ``k``-subsets."""
    L = _check_square(L)
    subsets = random_subsets(L.shape[0], k, trials, seed)
    scores = np.array([diversity_score(L, s, jitter) for s in subsets])
    return BaselineScores(scores, subsets)
