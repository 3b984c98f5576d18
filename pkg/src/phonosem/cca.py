"""Canonical correlation between the phonetic and semantic embedding
spaces, plus the loadings-based pole extraction used for interpretation.

The fit standardizes both matrices, adds a small ridge to each
within-space covariance block (the semantic dimensionality approaches
the sample size, so bare CCA is ill-conditioned), whitens via symmetric
eigendecomposition, and reads the canonical directions off an SVD of the
whitened cross-covariance. Signs are oriented so that the phonetic
loading of largest magnitude is positive in every component, which makes
reports and tests deterministic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import EmbeddingMatrix, Lexicon
from .errors import AnalysisError
from .stats import (AlignmentResult, _summarize, permutation_pvalue,
                    shuffle_rng, spearman_rho)

log = logging.getLogger(__name__)

DEFAULT_RIDGE = 1e-8


@dataclass(frozen=True)
class CcaModel:
    n_components: int
    weights_phonetic: np.ndarray   # (dx, k), act on standardized columns
    weights_semantic: np.ndarray   # (dy, k)
    scores_phonetic: np.ndarray    # (n, k)
    scores_semantic: np.ndarray    # (n, k)
    canonical_pearson: np.ndarray  # (k,)
    mean_phonetic: np.ndarray
    scale_phonetic: np.ndarray
    mean_semantic: np.ndarray
    scale_semantic: np.ndarray
    ridge: float

    @property
    def n_items(self) -> int:
        return self.scores_phonetic.shape[0]


def _standardize(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    if np.any(scale <= 0.0):
        raise AnalysisError("constant column; CCA requires varying inputs")
    return (x - mean) / scale, mean, scale


def _inv_sqrt(cov: np.ndarray, ridge: float) -> np.ndarray:
    cov = cov + ridge * np.eye(cov.shape[0])
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] <= 0.0:
        raise AnalysisError("covariance not positive definite despite ridge")
    return evecs @ ((evecs / np.sqrt(evals)).T)


def fit_cca(
    X: EmbeddingMatrix | np.ndarray,
    Y: EmbeddingMatrix | np.ndarray,
    n_components: int = 5,
    ridge: float = DEFAULT_RIDGE,
) -> CcaModel:
    """Fit ridge-stabilized CCA between two per-item matrices.

    X holds the phonetic space, Y the semantic space; rows must be the
    same items in the same order.
    """
    xs = X.vectors if isinstance(X, EmbeddingMatrix) else np.asarray(X, dtype=np.float64)
    ys = Y.vectors if isinstance(Y, EmbeddingMatrix) else np.asarray(Y, dtype=np.float64)
    n = xs.shape[0]
    if ys.shape[0] != n:
        raise AnalysisError("X and Y row counts differ")
    dx, dy = xs.shape[1], ys.shape[1]
    if n_components > min(dx, dy):
        raise AnalysisError(
            f"n_components={n_components} exceeds min(dims)={min(dx, dy)}"
        )
    if n <= max(dx, dy):
        raise AnalysisError("need more items than the larger dimensionality")

    xs, mx, sx = _standardize(xs)
    ys, my, sy = _standardize(ys)
    cxx = xs.T @ xs / n
    cyy = ys.T @ ys / n
    cxy = xs.T @ ys / n
    wx_white = _inv_sqrt(cxx, ridge)
    wy_white = _inv_sqrt(cyy, ridge)
    u, s, vt = np.linalg.svd(wx_white @ cxy @ wy_white, full_matrices=False)

    wx = wx_white @ u[:, :n_components]
    wy = wy_white @ vt[:n_components].T
    scores_x = xs @ wx
    scores_y = ys @ wy

    # orient each variate pair so the dominant phonetic loading is positive
    for c in range(n_components):
        loadings = structure_loadings(xs, scores_x[:, c])
        if loadings[np.argmax(np.abs(loadings))] < 0:
            wx[:, c] *= -1
            wy[:, c] *= -1
            scores_x[:, c] *= -1
            scores_y[:, c] *= -1

    pearson = np.empty(n_components)
    for c in range(n_components):
        a, b = scores_x[:, c], scores_y[:, c]
        pearson[c] = np.dot(a - a.mean(), b - b.mean()) / (
            n * a.std() * b.std())

    return CcaModel(
        n_components=n_components,
        weights_phonetic=wx,
        weights_semantic=wy,
        scores_phonetic=scores_x,
        scores_semantic=scores_y,
        canonical_pearson=pearson,
        mean_phonetic=mx,
        scale_phonetic=sx,
        mean_semantic=my,
        scale_semantic=sy,
        ridge=ridge,
    )


def structure_loadings(original: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Pearson correlation of each original column with the variate scores.

    Constant columns get loading 0 (logged) rather than NaN.
    """
    x = np.asarray(original, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    if x.shape[0] != s.shape[0]:
        raise AnalysisError("loadings: row counts differ")
    xc = x - x.mean(axis=0)
    sc = s - s.mean()
    denom = np.sqrt((xc ** 2).sum(axis=0)) * np.sqrt((sc ** 2).sum())
    out = np.zeros(x.shape[1])
    ok = denom > 0.0
    if not np.all(ok):
        log.warning("loadings: %d constant columns set to 0", int((~ok).sum()))
    out[ok] = (xc.T @ sc)[ok] / denom[ok]
    return np.clip(out, -1.0, 1.0)


def canonical_rank_correlations(
    model: CcaModel,
    X: EmbeddingMatrix | np.ndarray | None = None,
    Y: EmbeddingMatrix | np.ndarray | None = None,
    n_shuffles: int = 1000,
    null_points: int = 500,
    seed: int = 0,
    refit: bool = True,
) -> list[AlignmentResult]:
    """Per-component Spearman correlation of the paired variate scores.

    With ``refit`` (default) every shuffle permutes the item assignment
    of the semantic matrix and re-fits the full CCA, so the null reflects
    the whole estimation pipeline. The cheaper scores-only shuffle is
    available with ``refit=False`` and is flagged in the result notes.
    """
    k = model.n_components
    observed = np.array([
        spearman_rho(model.scores_phonetic[:, c], model.scores_semantic[:, c])
        for c in range(k)
    ])
    n = model.n_items
    null = np.empty((n_shuffles, k))
    if refit:
        if X is None or Y is None:
            raise AnalysisError("refit nulls require the original X and Y")
        ys = Y.vectors if isinstance(Y, EmbeddingMatrix) else np.asarray(Y)
        for i in range(n_shuffles):
            perm = shuffle_rng(seed, i).permutation(n)
            shuffled = fit_cca(X, ys[perm], n_components=k, ridge=model.ridge)
            for c in range(k):
                null[i, c] = spearman_rho(shuffled.scores_phonetic[:, c],
                                          shuffled.scores_semantic[:, c])
        notes = ()
    else:
        for i in range(n_shuffles):
            perm = shuffle_rng(seed, i).permutation(n)
            for c in range(k):
                null[i, c] = spearman_rho(model.scores_phonetic[:, c],
                                          model.scores_semantic[perm, c])
        notes = ("fast mode: scores shuffled without re-fitting",)

    results = []
    for c in range(k):
        sample = null[:null_points, c]
        p = permutation_pvalue(observed[c], sample, "greater")
        results.append(_summarize(
            f"cca_cv{c + 1}", float(observed[c]), sample, p, n_shuffles,
            seed, "greater", notes=notes))
    return results


# ---------------------------------------------------------------------------
# Pole extraction

def extract_phonetic_pole(
    loadings: np.ndarray,
    feature_names: Sequence[str],
    sign: str,
    percentile: float = 75.0,
    threshold: float = 0.05,
) -> list[tuple[str, float]]:
    """Features in the top quartile of one loading sign.

    For sign "+": among strictly positive loadings, keep those at or
    above the given percentile of the positive subset (linear
    interpolation) and at or above the absolute threshold. Sign "-" is
    symmetric on magnitudes of the negative loadings. Sorted by |loading|
    descending, ties by feature name.
    """
    loadings = np.asarray(loadings, dtype=np.float64)
    if sign not in ("+", "-"):
        raise AnalysisError(f"sign must be '+' or '-', got {sign!r}")
    if sign == "+":
        idx = np.flatnonzero(loadings > 0)
        mags = loadings[idx]
    else:
        idx = np.flatnonzero(loadings < 0)
        mags = -loadings[idx]
    if idx.size == 0:
        return []
    cut = np.percentile(mags, percentile)  # linear interpolation
    kept = [(feature_names[i], float(loadings[i]))
            for i, m in zip(idx, mags) if m >= cut and m >= threshold]
    kept.sort(key=lambda t: (-abs(t[1]), t[0]))
    return kept


def semantic_pole_neighbors(
    model: CcaModel,
    component: int,
    sign: str,
    vocabulary: EmbeddingMatrix,
    lexicon: Lexicon,
    k: int = 10,
    zipf_cutoff: float = 4.5,
) -> tuple[list[tuple[str, float]], bool]:
    """Nearest vocabulary words to one semantic pole direction.

    The pole direction is the signed semantic weight vector mapped back
    to raw embedding coordinates (weights divided by the per-dimension
    standardization scale, so that raw-space projections reproduce the
    variate up to a constant). Candidates are restricted to words above
    the zipf cutoff. Returns (neighbors, short_flag); short_flag is set
    when fewer than k candidates exist.
    """
    if sign not in ("+", "-"):
        raise AnalysisError(f"sign must be '+' or '-', got {sign!r}")
    if not 0 <= component < model.n_components:
        raise AnalysisError(f"component {component} out of range")
    direction = model.weights_semantic[:, component] / model.scale_semantic
    if sign == "-":
        direction = -direction
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        raise AnalysisError("zero pole direction")
    direction = direction / norm

    zipf = {lx.word: lx.zipf for lx in lexicon}
    cand_idx = [i for i, w in enumerate(vocabulary.ids)
                if zipf.get(w, -np.inf) > zipf_cutoff]
    if not cand_idx:
        log.warning("semantic pole: no candidates above zipf %.2f", zipf_cutoff)
        return [], True
    vecs = vocabulary.vectors[cand_idx]
    norms = np.linalg.norm(vecs, axis=1)
    ok = norms > 0.0
    sims = np.full(len(cand_idx), -np.inf)
    sims[ok] = (vecs[ok] @ direction) / norms[ok]
    order = sorted(range(len(cand_idx)), key=lambda j: (-sims[j], vocabulary.ids[cand_idx[j]]))
    top = order[:k]
    short = len(top) < k
    if short:
        log.warning("semantic pole: only %d candidates for k=%d", len(top), k)
    return [(vocabulary.ids[cand_idx[j]], float(sims[j])) for j in top], short


@dataclass(frozen=True)
class PoleReport:
    component: int  # 1-based, matching report tables
    phonetic_pos: tuple[tuple[str, float], ...]
    phonetic_neg: tuple[tuple[str, float], ...]
    semantic_pos: tuple[tuple[str, float], ...]
    semantic_neg: tuple[tuple[str, float], ...]

    def to_record(self) -> dict:
        def fmt(items):
            return [{"item": name, "value": val} for name, val in items]
        return {
            "component": self.component,
            "phonetic_pos": fmt(self.phonetic_pos),
            "phonetic_neg": fmt(self.phonetic_neg),
            "semantic_pos": fmt(self.semantic_pos),
            "semantic_neg": fmt(self.semantic_neg),
            "interpretation_semantic": "",
            "interpretation_phonetic": "",
        }


def build_pole_report(
    model: CcaModel,
    component: int,
    phonetic_matrix: EmbeddingMatrix | np.ndarray,
    feature_names: Sequence[str],
    vocabulary: EmbeddingMatrix,
    lexicon: Lexicon,
    k: int = 10,
    zipf_cutoff: float = 4.5,
    percentile: float = 75.0,
    threshold: float = 0.05,
) -> PoleReport:
    """Assemble the interpretation table row for one canonical variate."""
    xs = (phonetic_matrix.vectors if isinstance(phonetic_matrix, EmbeddingMatrix)
          else np.asarray(phonetic_matrix))
    loadings = structure_loadings(xs, model.scores_phonetic[:, component])
    pos, _ = semantic_pole_neighbors(model, component, "+", vocabulary, lexicon,
                                     k=k, zipf_cutoff=zipf_cutoff)
    neg, _ = semantic_pole_neighbors(model, component, "-", vocabulary, lexicon,
                                     k=k, zipf_cutoff=zipf_cutoff)
    return PoleReport(
        component=component + 1,
        phonetic_pos=tuple(extract_phonetic_pole(loadings, feature_names, "+",
                                                 percentile, threshold)),
        phonetic_neg=tuple(extract_phonetic_pole(loadings, feature_names, "-",
                                                 percentile, threshold)),
        semantic_pos=tuple(pos),
        semantic_neg=tuple(neg),
    )
