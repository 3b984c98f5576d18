"""End-to-end orchestration: configuration, seeding, analysis runs, and
report rendering.

Seeds fan out from the master seed through a hash of (seed, analysis
name, language), so adding or toggling one analysis never perturbs
another's randomness. All JSON payloads are written with sorted keys and
no timestamps, so identical configs and inputs reproduce byte-identical
results; wall-clock metadata lives only in the run manifest.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import (EmbeddingMatrix, Lexicon, load_feature_table,
                     load_lexicon, load_scale_configs,
                     load_semantic_embeddings)
from .cca import build_pole_report, canonical_rank_correlations, fit_cca
from .errors import AnalysisError, InputError
from .phonetic import build_phonetic_embeddings, cosine_similarity_matrix
from .segmentation import (dedupe_into_morpheme_set, perplexity_filter,
                           read_segmentation_cache)
from .stats import knn_overlap, mi_alignment, rsa, stars
from .subspace import scale_alignment

log = logging.getLogger(__name__)

DEFAULT_PARAMS = {
    "k": 10,
    "bins": 20,
    "n_components": 5,
    "shuffles": 1000,
    "null_points": 500,
    "subspace_shuffles": 5000,
    "subspace_null_points": 5000,
    "percentile": 75.0,
    "threshold": 0.05,
    "zipf_cutoff": 4.5,
    "top_words": 5000,
    "subspace_pool": 10000,
    "cca_ridge": 1e-8,
    "cca_refit": True,
    "perplexity_threshold": 1.4,
    "scatter": False,
}

_PARAM_BOUNDS = {
    "k": (1, None),
    "bins": (2, None),
    "n_components": (1, None),
    "shuffles": (1, None),
    "null_points": (1, None),
    "subspace_shuffles": (1, None),
    "subspace_null_points": (1, None),
    "percentile": (0.0, 100.0),
    "threshold": (0.0, 1.0),
    "top_words": (0, None),
    "subspace_pool": (1, None),
    "cca_ridge": (0.0, None),
    "perplexity_threshold": (1.0, None),
}


@dataclass(frozen=True)
class RunConfig:
    languages: tuple[str, ...]
    feature_table: str
    inputs: dict[str, dict[str, str]]  # language -> {lexicon, vectors, segmentations}
    output_dir: str = "results"
    scales: str | None = None
    analyses: dict[str, bool] = field(default_factory=lambda: {
        "rsa": True, "mi": True, "knn": True, "cca": True, "subspace": True})
    params: dict = field(default_factory=lambda: dict(DEFAULT_PARAMS))
    seed: int = 0

    def __post_init__(self):
        merged = dict(DEFAULT_PARAMS)
        merged.update(self.params)
        object.__setattr__(self, "params", merged)
        for name, (lo, hi) in _PARAM_BOUNDS.items():
            v = merged[name]
            if (lo is not None and v < lo) or (hi is not None and v > hi):
                raise InputError(f"parameter {name}={v} outside documented bounds")
        if merged["null_points"] > merged["shuffles"]:
            raise InputError("null_points exceeds shuffles")
        if merged["subspace_null_points"] > merged["subspace_shuffles"]:
            raise InputError("subspace_null_points exceeds subspace_shuffles")
        for lang in self.languages:
            if lang not in self.inputs:
                raise InputError(f"no inputs configured for language {lang!r}")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "RunConfig":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        obj.update({k: v for k, v in overrides.items() if v is not None})
        return cls(
            languages=tuple(obj["languages"]),
            feature_table=obj["feature_table"],
            inputs=obj["inputs"],
            output_dir=obj.get("output_dir", "results"),
            scales=obj.get("scales"),
            analyses=obj.get("analyses", dict(rsa=True, mi=True, knn=True,
                                              cca=True, subspace=True)),
            params=obj.get("params", {}),
            seed=int(obj.get("seed", 0)),
        )

    def to_obj(self) -> dict:
        return {
            "languages": list(self.languages),
            "feature_table": self.feature_table,
            "inputs": self.inputs,
            "output_dir": self.output_dir,
            "scales": self.scales,
            "analyses": self.analyses,
            "params": self.params,
            "seed": self.seed,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_obj(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def derive_seed(master: int, analysis: str, language: str) -> int:
    """Deterministic per-(analysis, language) substream seed."""
    digest = hashlib.sha256(f"{master}:{analysis}:{language}".encode()).digest()
    return int.from_bytes(digest[:8], "big") & 0x7FFFFFFFFFFFFFFF


def _dump_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8")


def _file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(config: RunConfig, records: dict) -> Path:
    """Run manifest with wall-clock metadata; kept apart from payloads."""
    out = Path(config.output_dir)
    digests = {config.feature_table: _file_digest(config.feature_table)}
    for lang in config.languages:
        for role, path in config.inputs[lang].items():
            digests[path] = _file_digest(path)
    manifest = {
        "config": config.to_obj(),
        "config_hash": config.config_hash(),
        "input_digests": digests,
        "results": records,
        "tool_version": __version__,
        "timestamp": time.time(),
    }
    path = out / "manifest.json"
    _dump_json(manifest, path)
    return path


# ---------------------------------------------------------------------------
# Shared loading

def morpheme_items(config: RunConfig, language: str) -> list[tuple[str, str, str]]:
    """(item id, form, transcription) triples in deterministic order."""
    segs = read_segmentation_cache(config.inputs[language]["segmentations"])
    if all(s.perplexity is not None for s in segs):
        segs, _ = perplexity_filter(segs, config.params["perplexity_threshold"])
    else:
        log.warning("%s: segmentations lack perplexities; filter skipped", language)
    mset = dedupe_into_morpheme_set(segs, language)
    return [(f"{m.form}|{m.transcription}", m.form, m.transcription) for m in mset]


def load_language_spaces(config: RunConfig, language: str):
    """Aligned phonetic and semantic embedding matrices over morphemes."""
    table = load_feature_table(config.feature_table)
    items = morpheme_items(config, language)
    if not items:
        raise InputError(f"{language}: empty morpheme set")

    phon_matrix, feature_names, skipped = build_phonetic_embeddings(
        [(item_id, tr) for item_id, _, tr in items], table)
    sem_by_form, _ = load_semantic_embeddings(
        config.inputs[language]["vectors"], {form for _, form, _ in items})
    form_index = {w: i for i, w in enumerate(sem_by_form.ids)}

    keep = [i for i, item_id in enumerate(phon_matrix.ids)
            if item_id.split("|", 1)[0] in form_index]
    if len(keep) < 3:
        raise AnalysisError(f"{language}: fewer than 3 morphemes in both spaces")
    phon = phon_matrix.subset(keep)
    sem_rows = np.vstack([
        sem_by_form.vectors[form_index[item_id.split("|", 1)[0]]]
        for item_id in phon.ids])
    sem = EmbeddingMatrix(ids=phon.ids, vectors=sem_rows)
    return phon, sem, feature_names, len(items), skipped


# ---------------------------------------------------------------------------
# Analysis runs

def run_global(config: RunConfig) -> dict[str, Path]:
    """Per-language global alignment grid (RSA, MI, kNN, CCA CV1-CV5)."""
    p = config.params
    out_dir = Path(config.output_dir)
    written: dict[str, Path] = {}
    grid_rows = []
    for lang in config.languages:
        phon, sem, feature_names, n_total, skipped = load_language_spaces(config, lang)
        sim_phon, _ = cosine_similarity_matrix(phon)
        sim_sem, _ = cosine_similarity_matrix(sem)
        if sim_phon.ids != sim_sem.ids:
            common = [i for i, x in enumerate(phon.ids) if x in set(sim_phon.ids) & set(sim_sem.ids)]
            phon, sem = phon.subset(common), sem.subset(common)
            sim_phon, _ = cosine_similarity_matrix(phon)
            sim_sem, _ = cosine_similarity_matrix(sem)

        results: dict[str, object] = {}
        if config.analyses.get("rsa", True):
            results["rsa"] = rsa(
                sim_phon, sim_sem, n_shuffles=p["shuffles"],
                null_points=p["null_points"],
                seed=derive_seed(config.seed, "rsa", lang)).to_record()
        if config.analyses.get("mi", True):
            results["mi"] = mi_alignment(
                sim_phon, sim_sem, bins=p["bins"], n_shuffles=p["shuffles"],
                null_points=p["null_points"],
                seed=derive_seed(config.seed, "mi", lang)).to_record()
        if config.analyses.get("knn", True):
            results["knn"] = knn_overlap(
                sim_phon, sim_sem, k=p["k"], n_shuffles=p["shuffles"],
                null_points=p["null_points"],
                seed=derive_seed(config.seed, "knn", lang)).to_record()
        if config.analyses.get("cca", True):
            n_components = min(p["n_components"], phon.n_dims, sem.n_dims)
            model = fit_cca(phon, sem, n_components=n_components,
                            ridge=p["cca_ridge"])
            cv_results = canonical_rank_correlations(
                model, X=phon, Y=sem, n_shuffles=p["shuffles"],
                null_points=p["null_points"],
                seed=derive_seed(config.seed, "cca", lang),
                refit=p["cca_refit"])
            results["cca"] = [r.to_record() for r in cv_results]
            _save_cca_artifacts(out_dir / lang, model, phon, feature_names)

        payload = {
            "language": lang,
            "n_morphemes": sim_phon.n_items,
            "n_morphemes_segmented": n_total,
            "n_skipped_phonetics": len(skipped),
            "config_hash": config.config_hash(),
            "params": p,
            "results": results,
            "notes": [
                "null distribution: first null_points of shuffles",
                "MI computed on pair vectors",
            ],
        }
        path = out_dir / lang / "global.json"
        _dump_json(payload, path)
        written[f"global:{lang}"] = path
        grid_rows.append(payload)

    md_path = out_dir / "global.md"
    md_path.parent.mkdir(parents=True, exist_ok=True)
    md_path.write_text(render_global_grid(grid_rows), encoding="utf-8")
    written["global:grid"] = md_path
    return written


def _save_cca_artifacts(lang_dir: Path, model, phon: EmbeddingMatrix,
                        feature_names) -> None:
    lang_dir.mkdir(parents=True, exist_ok=True)
    np.savez(
        lang_dir / "cca_model.npz",
        weights_phonetic=model.weights_phonetic,
        weights_semantic=model.weights_semantic,
        scores_phonetic=model.scores_phonetic,
        scores_semantic=model.scores_semantic,
        canonical_pearson=model.canonical_pearson,
        mean_phonetic=model.mean_phonetic,
        scale_phonetic=model.scale_phonetic,
        mean_semantic=model.mean_semantic,
        scale_semantic=model.scale_semantic,
        ridge=model.ridge,
        phonetic_vectors=phon.vectors,
        phonetic_ids=np.array(phon.ids, dtype=object),
        feature_names=np.array(list(feature_names), dtype=object),
    )


def _load_cca_artifacts(lang_dir: Path):
    from .cca import CcaModel

    path = lang_dir / "cca_model.npz"
    if not path.exists():
        raise InputError(f"{path}: no fitted CCA artifacts; run analyze-global first")
    z = np.load(path, allow_pickle=True)
    model = CcaModel(
        n_components=z["weights_phonetic"].shape[1],
        weights_phonetic=z["weights_phonetic"],
        weights_semantic=z["weights_semantic"],
        scores_phonetic=z["scores_phonetic"],
        scores_semantic=z["scores_semantic"],
        canonical_pearson=z["canonical_pearson"],
        mean_phonetic=z["mean_phonetic"],
        scale_phonetic=z["scale_phonetic"],
        mean_semantic=z["mean_semantic"],
        scale_semantic=z["scale_semantic"],
        ridge=float(z["ridge"]),
    )
    phon = EmbeddingMatrix(ids=tuple(z["phonetic_ids"].tolist()),
                           vectors=z["phonetic_vectors"])
    return model, phon, [str(x) for x in z["feature_names"].tolist()]


def run_subspace(config: RunConfig) -> dict[str, Path]:
    """Languages x scales grid of projection rank correlations."""
    p = config.params
    out_dir = Path(config.output_dir)
    table = load_feature_table(config.feature_table)
    scales = load_scale_configs(config.scales)
    cells = []
    written: dict[str, Path] = {}
    for lang in config.languages:
        lexicon = load_lexicon(config.inputs[lang]["lexicon"], lang)
        vocab, _ = load_semantic_embeddings(
            config.inputs[lang]["vectors"], lexicon.words())
        for scale in scales:
            if lang not in scale.semantic_pos:
                raise InputError(
                    f"scale {scale.name!r} lacks exemplars for language {lang!r}")
            result = scale_alignment(
                scale, lang, vocab, lexicon, table,
                n_words=p["subspace_pool"],
                n_shuffles=p["subspace_shuffles"],
                null_points=p["subspace_null_points"],
                seed=derive_seed(config.seed, f"subspace:{scale.name}", lang))
            cells.append(result.to_record())
            if p.get("scatter"):
                scatter = out_dir / "scatter" / f"{lang}_{scale.name}.tsv"
                scatter.parent.mkdir(parents=True, exist_ok=True)
                with scatter.open("w", encoding="utf-8") as fh:
                    fh.write("word\tsemantic_coord\tphonetic_coord\n")
                    for w, s, ph in zip(result.words, result.semantic_coords,
                                        result.phonetic_coords):
                        fh.write(f"{w}\t{s!r}\t{ph!r}\n")
                written[f"scatter:{lang}:{scale.name}"] = scatter

    payload = {
        "config_hash": config.config_hash(),
        "params": p,
        "cells": cells,
        "notes": ["two-sided permutation test; "
                  "phonetic post-processing computed over the selected word set"],
    }
    path = out_dir / "subspace.json"
    _dump_json(payload, path)
    written["subspace"] = path
    md_path = out_dir / "subspace.md"
    md_path.write_text(render_subspace_grid(payload), encoding="utf-8")
    written["subspace:grid"] = md_path
    return written


def run_interpret(config: RunConfig) -> dict[str, Path]:
    """Pole reports for every significant canonical variate (p < 0.05)."""
    p = config.params
    out_dir = Path(config.output_dir)
    written: dict[str, Path] = {}
    for lang in config.languages:
        lang_dir = out_dir / lang
        global_path = lang_dir / "global.json"
        if not global_path.exists():
            raise InputError(f"{global_path}: run analyze-global first")
        payload = json.loads(global_path.read_text(encoding="utf-8"))
        cca_records = payload.get("results", {}).get("cca")
        if cca_records is None:
            raise InputError(f"{lang}: no CCA results to interpret")
        model, phon, feature_names = _load_cca_artifacts(lang_dir)
        lexicon = load_lexicon(config.inputs[lang]["lexicon"], lang)
        vocab, _ = load_semantic_embeddings(
            config.inputs[lang]["vectors"], lexicon.words())

        reports = []
        for c, rec in enumerate(cca_records):
            if rec["p"] < 0.05:
                report = build_pole_report(
                    model, c, phon, feature_names, vocab, lexicon,
                    k=p["k"], zipf_cutoff=p["zipf_cutoff"],
                    percentile=p["percentile"], threshold=p["threshold"])
                reports.append(report.to_record())
        if not reports:
            log.info("%s: no significant components; empty pole report", lang)
        out = {
            "language": lang,
            "config_hash": config.config_hash(),
            "components": reports,
            "notes": [] if reports else ["no significant canonical variates"],
        }
        path = lang_dir / "poles.json"
        _dump_json(out, path)
        written[f"poles:{lang}"] = path
        md = lang_dir / "poles.md"
        md.write_text(render_pole_tables(out), encoding="utf-8")
        written[f"poles:{lang}:md"] = md
    return written


# ---------------------------------------------------------------------------
# Markdown rendering (derived from the JSON payloads, never recomputed)

def _fmt_stat(rec: dict) -> str:
    return f"{rec['value']:.3f}{rec['stars']}"


def render_global_grid(payloads: list[dict]) -> str:
    n_cv = max((len(p["results"].get("cca", [])) for p in payloads), default=0)
    header = ["Language", "n morphemes", "RSA (rho)", "MI (bits)", "kNN overlap"]
    header += [f"CCA CV{i + 1} (rho)" for i in range(n_cv)]
    lines = ["| " + " | ".join(header) + " |",
             "|" + "---|" * len(header)]
    for p in payloads:
        r = p["results"]
        row = [p["language"], str(p["n_morphemes"])]
        for key in ("rsa", "mi", "knn"):
            row.append(_fmt_stat(r[key]) if key in r else "-")
        cca = r.get("cca", [])
        row += [_fmt_stat(c) for c in cca] + ["-"] * (n_cv - len(cca))
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")
    lines.append("Significance: * p < 0.05, ** p < 0.01, *** p < 0.001.")
    return "\n".join(lines) + "\n"


def render_subspace_grid(payload: dict) -> str:
    scales = sorted({c["scale"] for c in payload["cells"]})
    langs = sorted({c["language"] for c in payload["cells"]})
    by_key = {(c["language"], c["scale"]): c for c in payload["cells"]}
    lines = ["| Language | " + " | ".join(scales) + " |",
             "|" + "---|" * (len(scales) + 1)]
    for lang in langs:
        row = [lang]
        for scale in scales:
            c = by_key.get((lang, scale))
            row.append(f"{c['rho']:.3f}{c['stars']}" if c else "-")
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")
    lines.append("Significance: * p < 0.05, ** p < 0.01, *** p < 0.001.")
    return "\n".join(lines) + "\n"


def render_pole_tables(payload: dict) -> str:
    lines = [f"# Canonical variate poles: {payload['language']}", ""]
    if not payload["components"]:
        lines.append("No significant canonical variates.")
        return "\n".join(lines) + "\n"
    header = ["CV", "Semantic Pole (+)", "Phonetic Pole (+)",
              "Semantic Pole (-)", "Phonetic Pole (-)",
              "Semantic Interpretation", "Phonetic Interpretation"]
    lines += ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for rec in payload["components"]:
        sem_pos = ", ".join(x["item"] for x in rec["semantic_pos"])
        sem_neg = ", ".join(x["item"] for x in rec["semantic_neg"])
        phon_pos = ", ".join(x["item"] for x in rec["phonetic_pos"])
        phon_neg = ", ".join(x["item"] for x in rec["phonetic_neg"])
        lines.append(f"| {rec['component']} | {sem_pos} | {phon_pos} | "
                     f"{sem_neg} | {phon_neg} |  |  |")
    return "\n".join(lines) + "\n"
