"""Input data model and loaders.

All loaders are pure functions of file contents. Text is normalized to
Unicode NFC at load time so that composed/decomposed IPA diacritics
cannot break segment lookup later. Loaded structures are immutable and
safe to share across threads.

File formats:

* Lexicon: UTF-8 TSV, header ``word  lemma  zipf  ipa``.
* Feature table: UTF-8 TSV, first column ``segment``, remaining columns
  feature names, cells in {-1, 0, 1}.
* Semantic vectors: word2vec-style text, optional ``N D`` first line,
  then ``token v1 ... vD``.
* Scale config: JSON listing per-scale phonetic exemplar segments and
  per-language semantic exemplar words.
"""

from __future__ import annotations

import json
import logging
import math
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import InputError, ParseError

log = logging.getLogger(__name__)

LEXICON_HEADER = ("word", "lemma", "zipf", "ipa")


def _nfc(s: str) -> str:
    return unicodedata.normalize("NFC", s)


def _open_input(path: Path):
    try:
        return path.open(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None


@dataclass(frozen=True)
class Lexeme:
    word: str
    lemma: str
    zipf: float
    ipa: str  # empty string marks an untranscribable lexeme

    @property
    def transcribable(self) -> bool:
        return bool(self.ipa)


@dataclass(frozen=True)
class Lexicon:
    language: str
    lexemes: tuple[Lexeme, ...]

    def __len__(self) -> int:
        return len(self.lexemes)

    def __iter__(self) -> Iterator[Lexeme]:
        return iter(self.lexemes)

    def words(self) -> list[str]:
        return [lx.word for lx in self.lexemes]

    def by_word(self) -> dict[str, Lexeme]:
        return {lx.word: lx for lx in self.lexemes}


@dataclass(frozen=True)
class Morpheme:
    form: str
    transcription: str
    sources: frozenset[str]
    language: str

    def key(self) -> tuple[str, str]:
        return (self.form, self.transcription)


@dataclass(frozen=True)
class MorphemeSet:
    language: str
    morphemes: tuple[Morpheme, ...]

    def __post_init__(self):
        keys = [m.key() for m in self.morphemes]
        if len(set(keys)) != len(keys):
            raise InputError("duplicate (form, transcription) in MorphemeSet")

    def __len__(self) -> int:
        return len(self.morphemes)

    def __iter__(self) -> Iterator[Morpheme]:
        return iter(self.morphemes)


@dataclass(frozen=True)
class SegmentFeatureTable:
    feature_names: tuple[str, ...]
    vectors: Mapping[str, np.ndarray]  # segment -> ternary vector

    def __contains__(self, segment: str) -> bool:
        return segment in self.vectors

    def __getitem__(self, segment: str) -> np.ndarray:
        return self.vectors[segment]

    @property
    def segments(self) -> list[str]:
        return list(self.vectors)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Rows are items, columns are dimensions."""

    ids: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.ids):
            raise InputError(
                f"embedding shape {self.vectors.shape} does not match "
                f"{len(self.ids)} ids"
            )

    @property
    def n_items(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_dims(self) -> int:
        return self.vectors.shape[1]

    def row(self, item_id: str) -> np.ndarray:
        return self.vectors[self.ids.index(item_id)]

    def subset(self, keep: Sequence[int]) -> "EmbeddingMatrix":
        keep = list(keep)
        return EmbeddingMatrix(
            ids=tuple(self.ids[i] for i in keep),
            vectors=self.vectors[keep],
        )


@dataclass(frozen=True)
class ScaleConfig:
    """One hypothesized sound/meaning scale.

    Phonetic exemplars are single IPA segments shared across languages;
    semantic exemplars are words, per language.
    """

    name: str
    phonetic_pos: tuple[str, ...]
    phonetic_neg: tuple[str, ...]
    semantic_pos: Mapping[str, tuple[str, ...]]
    semantic_neg: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        if not self.phonetic_pos or not self.phonetic_neg:
            raise InputError(f"scale {self.name}: empty phonetic exemplar list")
        if set(self.phonetic_pos) & set(self.phonetic_neg):
            raise InputError(f"scale {self.name}: phonetic pos/neg overlap")
        for lang in self.semantic_pos:
            pos, neg = self.semantic_pos[lang], self.semantic_neg.get(lang, ())
            if not pos or not neg:
                raise InputError(
                    f"scale {self.name}/{lang}: empty semantic exemplar list"
                )
            if set(pos) & set(neg):
                raise InputError(f"scale {self.name}/{lang}: semantic pos/neg overlap")


# ---------------------------------------------------------------------------
# Lexicon

def load_lexicon(path: str | Path, language: str) -> Lexicon:
    """Load a TSV lexicon, dedupe by word (highest zipf wins), sort by
    descending zipf with lexicographic tie-break."""
    path = Path(path)
    best: dict[str, Lexeme] = {}
    with _open_input(path) as fh:
        header = fh.readline()
        if header and tuple(_nfc(header).rstrip("\n").split("\t")) != LEXICON_HEADER:
            raise ParseError(f"{path}:1: expected header {'/'.join(LEXICON_HEADER)}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = _nfc(line).split("\t")
            if len(parts) != 4:
                raise ParseError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
            word, lemma, zipf_s, ipa = parts
            if not word:
                raise ParseError(f"{path}:{lineno}: empty word")
            try:
                zipf = float(zipf_s)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric zipf {zipf_s!r}") from None
            if not math.isfinite(zipf):
                raise ParseError(f"{path}:{lineno}: non-finite zipf for {word!r}")
            lx = Lexeme(word=word, lemma=lemma, zipf=zipf, ipa=ipa)
            prev = best.get(word)
            if prev is not None and prev.ipa != lx.ipa:
                log.warning("%s:%d: duplicate %r with differing IPA, first kept",
                            path, lineno, word)
            if prev is None:
                best[word] = lx
            elif lx.zipf > prev.zipf:
                # highest zipf wins, but a conflicting IPA never displaces
                # the first-seen transcription
                best[word] = lx if prev.ipa == lx.ipa else Lexeme(
                    word=word, lemma=lx.lemma, zipf=lx.zipf, ipa=prev.ipa)
    ordered = sorted(best.values(), key=lambda lx: (-lx.zipf, lx.word))
    return Lexicon(language=language, lexemes=tuple(ordered))


def save_lexicon(lexicon: Lexicon, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("\t".join(LEXICON_HEADER) + "\n")
        for lx in lexicon:
            fh.write(f"{lx.word}\t{lx.lemma}\t{lx.zipf!r}\t{lx.ipa}\n")


def top_n(lexicon: Lexicon, n: int) -> Lexicon:
    """First min(n, |lexicon|) lexemes; lexicon order already encodes the
    descending-zipf, lexicographic-tie ordering."""
    if n < 0:
        raise InputError(f"n must be >= 0, got {n}")
    return Lexicon(language=lexicon.language, lexemes=lexicon.lexemes[:n])


def zipf_filter(lexicon: Lexicon, cutoff: float) -> Lexicon:
    """Keep lexemes with zipf strictly greater than the cutoff."""
    kept = tuple(lx for lx in lexicon if lx.zipf > cutoff)
    return Lexicon(language=lexicon.language, lexemes=kept)


# ---------------------------------------------------------------------------
# Segment feature table

def load_feature_table(path: str | Path) -> SegmentFeatureTable:
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    with _open_input(path) as fh:
        header = _nfc(fh.readline()).rstrip("\n").split("\t")
        if not header or header[0] != "segment":
            raise ParseError(f"{path}:1: first column must be 'segment'")
        feature_names = tuple(header[1:])
        if len(set(feature_names)) != len(feature_names):
            raise ParseError(f"{path}:1: duplicate feature names")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = _nfc(line).split("\t")
            seg = parts[0]
            if not seg:
                raise ParseError(f"{path}:{lineno}: empty segment key")
            if seg in vectors:
                raise ParseError(f"{path}:{lineno}: duplicate segment {seg!r}")
            if len(parts) - 1 != len(feature_names):
                raise ParseError(
                    f"{path}:{lineno}: ragged row for segment {seg!r} "
                    f"({len(parts) - 1} values, expected {len(feature_names)})"
                )
            vals = []
            for name, cell in zip(feature_names, parts[1:]):
                try:
                    v = int(cell)
                except ValueError:
                    v = None
                if v not in (-1, 0, 1):
                    raise ParseError(
                        f"{path}:{lineno}: segment {seg!r} feature {name!r} "
                        f"value {cell!r} not in -1/0/1"
                    )
                vals.append(v)
            vectors[seg] = np.asarray(vals, dtype=np.float64)
    table = SegmentFeatureTable(feature_names=feature_names, vectors=vectors)
    log.info("%s: %d segments x %d features", path, len(vectors), table.n_features)
    return table


def save_feature_table(table: SegmentFeatureTable, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("segment\t" + "\t".join(table.feature_names) + "\n")
        for seg, vec in table.vectors.items():
            fh.write(seg + "\t" + "\t".join(str(int(v)) for v in vec) + "\n")


# ---------------------------------------------------------------------------
# Semantic vectors

def load_semantic_embeddings(
    path: str | Path, vocabulary: Iterable[str]
) -> tuple[EmbeddingMatrix, list[str]]:
    """Load vectors for the given vocabulary from a word2vec-style text file.

    Returns the matrix (rows in file order of first occurrence) and the
    sorted list of vocabulary items not found in the file.
    """
    path = Path(path)
    wanted = {_nfc(w) for w in vocabulary}
    ids: list[str] = []
    rows: list[np.ndarray] = []
    dim: int | None = None
    with _open_input(path) as fh:
        first = fh.readline()
        lineno = 1
        parts = first.split()
        # optional "N D" count header
        if len(parts) == 2 and all(p.isdigit() for p in parts):
            pass
        else:
            lineno = 0
            fh.seek(0)
        for lineno, line in enumerate(fh, start=lineno + 1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            token = _nfc(parts[0])
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise ParseError(
                    f"{path}:{lineno}: dimension {len(parts) - 1} != {dim}"
                )
            if token in wanted and token not in ids:
                try:
                    vec = np.asarray([float(v) for v in parts[1:]], dtype=np.float64)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: non-numeric vector value") from None
                ids.append(token)
                rows.append(vec)
    if not ids:
        raise InputError(f"{path}: no vocabulary items matched")
    missing = sorted(wanted - set(ids))
    if missing:
        log.info("%s: %d vocabulary items missing", path, len(missing))
    return EmbeddingMatrix(ids=tuple(ids), vectors=np.vstack(rows)), missing


def save_semantic_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"{matrix.n_items} {matrix.n_dims}\n")
        for token, vec in zip(matrix.ids, matrix.vectors):
            fh.write(token + " " + " ".join(repr(float(v)) for v in vec) + "\n")


# ---------------------------------------------------------------------------
# Morpheme sets

def load_morpheme_set(path: str | Path, language: str) -> MorphemeSet:
    path = Path(path)
    morphemes = []
    with _open_input(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            morphemes.append(Morpheme(
                form=_nfc(rec["form"]),
                transcription=_nfc(rec["transcription"]),
                sources=frozenset(_nfc(w) for w in rec["sources"]),
                language=language,
            ))
    return MorphemeSet(language=language, morphemes=tuple(morphemes))


def save_morpheme_set(mset: MorphemeSet, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for m in mset:
            fh.write(json.dumps(
                {"form": m.form, "transcription": m.transcription,
                 "sources": sorted(m.sources)},
                ensure_ascii=False, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Scale configs

def _load_scales_obj(obj: dict) -> list[ScaleConfig]:
    scales = []
    for name, entry in obj["scales"].items():
        scales.append(ScaleConfig(
            name=name,
            phonetic_pos=tuple(_nfc(s) for s in entry["phonetic"]["pos"]),
            phonetic_neg=tuple(_nfc(s) for s in entry["phonetic"]["neg"]),
            semantic_pos={lang: tuple(_nfc(w) for w in d["pos"])
                          for lang, d in entry["semantic"].items()},
            semantic_neg={lang: tuple(_nfc(w) for w in d["neg"])
                          for lang, d in entry["semantic"].items()},
        ))
    return scales


def load_scale_configs(path: str | Path | None = None) -> list[ScaleConfig]:
    """Load scale definitions; with no path, the shipped defaults."""
    if path is None:
        text = resources.files("phonosem.data").joinpath("scales.json").read_text("utf-8")
    else:
        with _open_input(Path(path)) as fh:
            text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"scale config: {exc}") from None
    return _load_scales_obj(obj)


def save_scale_configs(scales: Sequence[ScaleConfig], path: str | Path) -> None:
    obj = {"scales": {}}
    for sc in scales:
        langs = sorted(sc.semantic_pos)
        obj["scales"][sc.name] = {
            "phonetic": {"pos": list(sc.phonetic_pos), "neg": list(sc.phonetic_neg)},
            "semantic": {lang: {"pos": list(sc.semantic_pos[lang]),
                                "neg": list(sc.semantic_neg[lang])}
                         for lang in langs},
        }
    # insertion order preserved so load -> save -> load is the identity
    Path(path).write_text(
        json.dumps(obj, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8")
