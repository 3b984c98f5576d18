"""Command-line entry points.

Exit codes: 0 success, 1 input error, 2 analysis error, 3 provider
error.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from .corpus import (load_feature_table, load_lexicon, load_scale_configs,
                     load_semantic_embeddings, top_n)
from .errors import AnalysisError, InputError, ProviderError
from .phonetic import cosine_similarity_matrix
from .pipeline import (RunConfig, render_global_grid, render_pole_tables,
                       render_subspace_grid, run_global, run_interpret,
                       run_subspace, write_manifest)
from .segmentation import (HttpProvider, ReplayProvider, sample_for_verification,
                           dedupe_into_morpheme_set, read_segmentation_cache,
                           segment_words, write_verification_sheet)

log = logging.getLogger(__name__)


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InputError as exc:
            click.echo(f"input error: {exc}", err=True)
            sys.exit(1)
        except ProviderError as exc:
            click.echo(f"provider error: {exc}", err=True)
            sys.exit(3)
        except AnalysisError as exc:
            click.echo(f"analysis error: {exc}", err=True)
            sys.exit(2)
    return wrapper


config_option = click.option("--config", "config_path", required=True,
                             type=click.Path(exists=True, dir_okay=False),
                             help="Run configuration JSON.")
seed_option = click.option("--seed", type=int, default=None,
                           help="Override the master seed.")


def _load_config(config_path, seed=None, **overrides) -> RunConfig:
    return RunConfig.from_file(config_path, seed=seed, **overrides)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@config_option
@_exit_codes
def ingest(config_path):
    """Validate all configured inputs and print a summary."""
    config = _load_config(config_path)
    table = load_feature_table(config.feature_table)
    click.echo(f"feature table: {len(table.segments)} segments x "
               f"{table.n_features} features")
    for lang in config.languages:
        paths = config.inputs[lang]
        lexicon = load_lexicon(paths["lexicon"], lang)
        vocab, missing = load_semantic_embeddings(paths["vectors"],
                                                  lexicon.words())
        click.echo(f"{lang}: {len(lexicon)} lexemes, {vocab.n_items} with "
                   f"embeddings ({len(missing)} missing), dim {vocab.n_dims}")
    scales = load_scale_configs(config.scales)
    click.echo(f"scales: {', '.join(s.name for s in scales)}")


@main.command()
@config_option
@seed_option
@click.option("--provider-url", default=None, help="HTTP provider endpoint.")
@click.option("--provider-model", default="gpt-4.1", show_default=True)
@click.option("--replay", "replay_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Replay recorded responses from this JSONL file.")
@_exit_codes
def segment(config_path, seed, provider_url, provider_model, replay_path):
    """Segment the top-frequency words of each language via the provider."""
    config = _load_config(config_path, seed=seed)
    if replay_path:
        provider = ReplayProvider(replay_path)
    elif provider_url:
        provider = HttpProvider(provider_url, provider_model,
                                audit_path=Path(config.output_dir) / "provider_audit.jsonl")
    else:
        raise InputError("provide --replay or --provider-url")
    for lang in config.languages:
        lexicon = top_n(load_lexicon(config.inputs[lang]["lexicon"], lang),
                        config.params["top_words"])
        words = [(lx.word, lx.lemma, lx.ipa) for lx in lexicon if lx.transcribable]
        segs = segment_words(words, lang, provider,
                             config.inputs[lang]["segmentations"],
                             perplexity_threshold=config.params["perplexity_threshold"])
        mset = dedupe_into_morpheme_set(segs, lang)
        click.echo(f"{lang}: {len(segs)} segmentations kept, "
                   f"{len(mset)} unique morphemes")


@main.command()
@config_option
@seed_option
@click.option("-n", "sample_n", type=int, default=150, show_default=True)
@_exit_codes
def verify(config_path, seed, sample_n):
    """Draw the native-speaker verification sample per language."""
    config = _load_config(config_path, seed=seed)
    for lang in config.languages:
        segs = read_segmentation_cache(config.inputs[lang]["segmentations"])
        mset = dedupe_into_morpheme_set(segs, lang)
        sample, short = sample_for_verification(mset, n=sample_n, seed=config.seed)
        path = Path(config.output_dir) / lang / "verification.tsv"
        path.parent.mkdir(parents=True, exist_ok=True)
        write_verification_sheet(sample, path)
        note = " (fewer morphemes than requested)" if short else ""
        click.echo(f"{lang}: wrote {len(sample)} rows to {path}{note}")


@main.command()
@config_option
@_exit_codes
def embed(config_path):
    """Build and export similarity matrices for inspection."""
    config = _load_config(config_path)
    from .pipeline import load_language_spaces
    for lang in config.languages:
        phon, sem, _, _, _ = load_language_spaces(config, lang)
        out = Path(config.output_dir) / lang
        out.mkdir(parents=True, exist_ok=True)
        for name, matrix in (("phonetic", phon), ("semantic", sem)):
            sim, _ = cosine_similarity_matrix(matrix)
            sim.save_binary(out / f"sim_{name}.bin")
            sim.save_tsv(out / f"sim_{name}.tsv")
        click.echo(f"{lang}: exported similarity matrices for "
                   f"{phon.n_items} morphemes to {out}")


@main.command("analyze-global")
@config_option
@seed_option
@click.option("--shuffles", type=int, default=None)
@_exit_codes
def analyze_global(config_path, seed, shuffles):
    """Run the global alignment suite (RSA, MI, kNN, CCA)."""
    config = _load_config(config_path, seed=seed)
    if shuffles is not None:
        params = dict(config.params)
        params["shuffles"] = shuffles
        params["null_points"] = min(params["null_points"], shuffles)
        config = RunConfig(**{**config.to_obj(), "params": params,
                              "languages": config.languages})
    written = run_global(config)
    write_manifest(config, {k: str(v) for k, v in written.items()})
    for key, path in written.items():
        click.echo(f"{key}: {path}")


@main.command("analyze-subspace")
@config_option
@seed_option
@click.option("--scatter/--no-scatter", default=None,
              help="Also write per-word projection TSVs.")
@_exit_codes
def analyze_subspace(config_path, seed, scatter):
    """Run the hypothesized-scale subspace analyses."""
    config = _load_config(config_path, seed=seed)
    if scatter is not None:
        params = dict(config.params)
        params["scatter"] = scatter
        config = RunConfig(**{**config.to_obj(), "params": params,
                              "languages": config.languages})
    written = run_subspace(config)
    write_manifest(config, {k: str(v) for k, v in written.items()})
    for key, path in written.items():
        click.echo(f"{key}: {path}")


@main.command()
@config_option
@_exit_codes
def interpret(config_path):
    """Emit pole reports for significant canonical variates."""
    config = _load_config(config_path)
    written = run_interpret(config)
    for key, path in written.items():
        click.echo(f"{key}: {path}")


@main.command()
@config_option
@_exit_codes
def report(config_path):
    """Re-render markdown reports from existing JSON payloads."""
    config = _load_config(config_path)
    out = Path(config.output_dir)
    payloads = []
    for lang in config.languages:
        path = out / lang / "global.json"
        if path.exists():
            payloads.append(json.loads(path.read_text(encoding="utf-8")))
    if payloads:
        (out / "global.md").write_text(render_global_grid(payloads),
                                       encoding="utf-8")
        click.echo(f"rendered {out / 'global.md'}")
    sub = out / "subspace.json"
    if sub.exists():
        payload = json.loads(sub.read_text(encoding="utf-8"))
        (out / "subspace.md").write_text(render_subspace_grid(payload),
                                         encoding="utf-8")
        click.echo(f"rendered {out / 'subspace.md'}")
    for lang in config.languages:
        poles = out / lang / "poles.json"
        if poles.exists():
            payload = json.loads(poles.read_text(encoding="utf-8"))
            (out / lang / "poles.md").write_text(render_pole_tables(payload),
                                                 encoding="utf-8")
            click.echo(f"rendered {out / lang / 'poles.md'}")


if __name__ == "__main__":
    main()
