"""Phonetic embeddings and pairwise similarity matrices.

IPA strings are tokenized into segments by greedy longest match against
the feature table, mean-pooled into one vector per item, and the
resulting matrix is cleaned (zero-variance dimensions dropped) and
dataset-normalized. Cosine similarity is used for both modalities.

All operations here are pure; similarity construction uses a fixed
summation order so results do not depend on parallelism.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import EmbeddingMatrix, SegmentFeatureTable
from .errors import AnalysisError, InputError

log = logging.getLogger(__name__)

ZERO_VARIANCE_TOL = 1e-12


class EmptyTokenizationError(AnalysisError):
    """No segment of the transcription matched the feature table."""


def tokenize_ipa(
    transcription: str, table: SegmentFeatureTable
) -> tuple[list[str], str]:
    """Greedy longest-match segmentation of an IPA string.

    Returns ``(segments, dropped)`` where ``dropped`` collects characters
    that matched no table key (stress and length marks, typically).
    Raises :class:`EmptyTokenizationError` if nothing matched at all.
    """
    if not transcription:
        raise InputError("empty transcription")
    max_len = max((len(s) for s in table.vectors), default=0)
    segments: list[str] = []
    dropped: list[str] = []
    i = 0
    while i < len(transcription):
        for width in range(min(max_len, len(transcription) - i), 0, -1):
            cand = transcription[i:i + width]
            if cand in table:
                segments.append(cand)
                i += width
                break
        else:
            dropped.append(transcription[i])
            i += 1
    if not segments:
        raise EmptyTokenizationError(
            f"no segment of {transcription!r} matched the feature table"
        )
    if dropped:
        log.debug("tokenize %r: dropped unknown chars %r", transcription, dropped)
    return segments, "".join(dropped)


def mean_pool(segments: Sequence[str], table: SegmentFeatureTable) -> np.ndarray:
    """Component-wise arithmetic mean of the segments' feature vectors."""
    if not segments:
        raise InputError("cannot pool an empty segment list")
    try:
        stack = np.vstack([table[s] for s in segments])
    except KeyError as exc:
        raise InputError(f"unknown segment {exc.args[0]!r}") from None
    return stack.mean(axis=0)


def drop_zero_variance(
    matrix: EmbeddingMatrix, tol: float = ZERO_VARIANCE_TOL
) -> tuple[EmbeddingMatrix, list[int]]:
    """Remove columns whose sample variance is <= tol.

    Returns the reduced matrix and the kept column indices in original
    order. Raises if every column is constant.
    """
    if matrix.n_items < 2:
        raise AnalysisError("need at least 2 rows to estimate variance")
    var = matrix.vectors.var(axis=0)
    kept = [i for i in range(matrix.n_dims) if var[i] > tol]
    if not kept:
        raise AnalysisError("all columns are zero-variance; degenerate space")
    if len(kept) < matrix.n_dims:
        log.info("dropped %d zero-variance dimensions", matrix.n_dims - len(kept))
    return (
        EmbeddingMatrix(ids=matrix.ids, vectors=matrix.vectors[:, kept]),
        kept,
    )


def normalize_dataset(
    matrix: EmbeddingMatrix, mode: str = "zscore"
) -> EmbeddingMatrix:
    """Standardize columns over the dataset.

    ``zscore`` (default) maps each column to mean 0, standard deviation 1
    using the population (n) divisor; ``minmax`` maps to [0, 1]. Rank and
    cosine statistics downstream are insensitive to the divisor choice.
    """
    x = matrix.vectors
    if mode == "zscore":
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        if np.any(std <= ZERO_VARIANCE_TOL):
            raise AnalysisError("zero-variance column; run drop_zero_variance first")
        out = (x - mean) / std
    elif mode == "minmax":
        lo, hi = x.min(axis=0), x.max(axis=0)
        if np.any(hi - lo <= ZERO_VARIANCE_TOL):
            raise AnalysisError("zero-range column; run drop_zero_variance first")
        out = (x - lo) / (hi - lo)
    else:
        raise InputError(f"unknown normalization mode {mode!r}")
    return EmbeddingMatrix(ids=matrix.ids, vectors=out)


def build_phonetic_embeddings(
    items: Sequence[tuple[str, str]],
    table: SegmentFeatureTable,
    normalize: str | None = "zscore",
) -> tuple[EmbeddingMatrix, list[str], list[str]]:
    """Tokenize + mean-pool a batch of (item id, IPA) pairs.

    Items whose transcription matches nothing are excluded and returned
    in the skipped list. Returns ``(matrix, kept_feature_names, skipped)``;
    the matrix has zero-variance dimensions dropped and, unless
    ``normalize`` is None, dataset-normalized columns.
    """
    ids: list[str] = []
    rows: list[np.ndarray] = []
    skipped: list[str] = []
    for item_id, ipa in items:
        if not ipa:
            skipped.append(item_id)
            continue
        try:
            segments, _ = tokenize_ipa(ipa, table)
        except EmptyTokenizationError:
            skipped.append(item_id)
            continue
        ids.append(item_id)
        rows.append(mean_pool(segments, table))
    if not ids:
        raise AnalysisError("no item produced a phonetic embedding")
    matrix = EmbeddingMatrix(ids=tuple(ids), vectors=np.vstack(rows))
    matrix, kept = drop_zero_variance(matrix)
    names = [table.feature_names[i] for i in kept]
    if normalize is not None:
        matrix = normalize_dataset(matrix, mode=normalize)
    if skipped:
        log.info("phonetic embeddings: skipped %d untokenizable items", len(skipped))
    return matrix, names, skipped


# ---------------------------------------------------------------------------
# Similarity matrices

@dataclass(frozen=True)
class SimilarityMatrix:
    ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        n = len(self.ids)
        if self.values.shape != (n, n):
            raise InputError(
                f"similarity shape {self.values.shape} does not match {n} ids"
            )
        if not np.allclose(self.values, self.values.T, atol=1e-12, rtol=0.0):
            raise AnalysisError("similarity matrix is not symmetric")

    @property
    def n_items(self) -> int:
        return len(self.ids)

    def pair_vector(self) -> np.ndarray:
        """Strict upper triangle in fixed (i < j) row-major order."""
        iu = np.triu_indices(self.n_items, k=1)
        return self.values[iu]

    def permuted(self, perm: np.ndarray) -> "SimilarityMatrix":
        """Apply one item permutation to rows and columns."""
        return SimilarityMatrix(
            ids=tuple(self.ids[i] for i in perm),
            values=self.values[np.ix_(perm, perm)],
        )

    # -- serialization ------------------------------------------------------

    def save_binary(self, path: str | Path) -> None:
        """Row-major float64 matrix next to a ``.ids`` sidecar."""
        path = Path(path)
        np.ascontiguousarray(self.values, dtype=np.float64).tofile(path)
        path.with_suffix(path.suffix + ".ids").write_text(
            "\n".join(self.ids) + "\n", encoding="utf-8")

    @classmethod
    def load_binary(cls, path: str | Path) -> "SimilarityMatrix":
        path = Path(path)
        ids = tuple(
            path.with_suffix(path.suffix + ".ids")
            .read_text(encoding="utf-8").splitlines()
        )
        n = len(ids)
        values = np.fromfile(path, dtype=np.float64).reshape(n, n)
        return cls(ids=ids, values=values)

    def save_tsv(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write("item\t" + "\t".join(self.ids) + "\n")
            for item, row in zip(self.ids, self.values):
                fh.write(item + "\t" + "\t".join(repr(float(v)) for v in row) + "\n")


def cosine_similarity_matrix(
    matrix: EmbeddingMatrix,
) -> tuple[SimilarityMatrix, list[str]]:
    """Pairwise cosine similarity; zero-norm rows are excluded and reported."""
    norms = np.linalg.norm(matrix.vectors, axis=1)
    bad = norms <= 0.0
    excluded = [matrix.ids[i] for i in np.flatnonzero(bad)]
    if excluded:
        log.warning("cosine similarity: excluding %d zero-norm items", len(excluded))
        matrix = matrix.subset(list(np.flatnonzero(~bad)))
        norms = norms[~bad]
    unit = matrix.vectors / norms[:, None]
    values = unit @ unit.T
    np.clip(values, -1.0, 1.0, out=values)
    values = (values + values.T) / 2.0
    np.fill_diagonal(values, 1.0)
    return SimilarityMatrix(ids=matrix.ids, values=values), excluded
