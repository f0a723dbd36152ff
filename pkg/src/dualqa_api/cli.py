"""``dualqa`` command line: train, generate, eval, stats and gradcheck.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import Dict, Optional, Sequence

import click
import numpy

from squad_connector.squad import DatasetStats, SquadFormatError, dataset_stats, read_squad
from tensor_api.tensor import NumericError

from dualqa_api.checkpoint import load_checkpoint, save_checkpoint
from dualqa_api.config import ConfigError, load_config
from dualqa_api.decoding import generate_for
from dualqa_api.diagnostics import GRADCHECK_CONFIG, run_gradient_suite
from dualqa_api.evaluation import evaluate_model, format_reports
from dualqa_api.model import assemble_model
from dualqa_api.synthetic import corpus_tokens
from dualqa_api.training import Trainer
from dualqa_api.vocabulary import build_vocabulary, load_word_embeddings

logger = logging.getLogger(__name__)

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

UNSHARE_FLAGS = {
    "output-projection": "unshare_output_projection",
    "qa-encoders": "unshare_qa_encoders",
    "context-encoder": "unshare_context_encoder",
}
ENCODER_FLAGS = {"no-lstm": "encoder_no_lstm", "no-selfattn": "encoder_no_selfattn"}


class GradientCheckFailed(NumericError):
    """A finite-difference check exceeded its tolerance."""


def _setup_logging(verbose: int) -> None:
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _parse_settings(settings: Sequence[str]) -> Dict[str, str]:
    values = {}
    for item in settings:
        if "=" not in item:
            raise click.BadParameter(f"expected KEY=VALUE, got {item!r}", param_hint="--set")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _dump_attention(directory: Path, task: str, index: int, matrix: Optional[numpy.ndarray]) -> None:
    if matrix is None:
        return
    directory.mkdir(parents=True, exist_ok=True)
    numpy.savetxt(directory / f"{task}_{index:05d}.txt", matrix, fmt="%.6e")


@click.group()
@click.option("-v", "--verbose", count=True, help="-v for INFO, -vv for DEBUG logging.")
def cli(verbose: int) -> None:
    """Joint question answering and question generation."""
    _setup_logging(verbose)


@cli.command()
@click.option("--data", "data_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--steps", type=click.IntRange(min=1), required=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--embeddings", type=click.Path(dir_okay=False, path_type=Path),
              help="Word vectors in text format (word followed by d_word floats).")
@click.option("--mode", type=click.Choice(["dual", "qa-only", "qg-only"]))
@click.option("--seed", type=int)
@click.option("--no-copy", is_flag=True)
@click.option("--no-context-attention", is_flag=True)
@click.option("--share-attention", is_flag=True)
@click.option("--unshare", multiple=True, type=click.Choice(sorted(UNSHARE_FLAGS)))
@click.option("--encoder", type=click.Choice(sorted(ENCODER_FLAGS)))
@click.option("--set", "settings", multiple=True, metavar="KEY=VALUE", help="Any other configuration field.")
@click.option("--quiet", is_flag=True, help="Hide the progress bar.")
def train(data_path, config_path, steps, out_path, embeddings, mode, seed, no_copy, no_context_attention,
          share_attention, unshare, encoder, settings, quiet) -> None:
    """Train a model on a SQuAD-format file and write a checkpoint."""
    overrides: Dict[str, object] = dict(_parse_settings(settings))
    overrides.update({"mode": mode, "seed": seed})
    for flag, enabled in (("no_copy", no_copy), ("no_context_attention", no_context_attention),
                          ("share_attention", share_attention)):
        if enabled:
            overrides[flag] = True
    for name in unshare:
        overrides[UNSHARE_FLAGS[name]] = True
    if encoder:
        overrides[ENCODER_FLAGS[encoder]] = True
    config = load_config(config_path, overrides)

    triplets = read_squad(data_path).triplets
    if not triplets:
        raise SquadFormatError("<root>", "no usable triplets")
    vocab = build_vocabulary(corpus_tokens(triplets), config.min_count)
    words = load_word_embeddings(embeddings, vocab, config.d_word, config.seed) if embeddings else None
    model = assemble_model(config, vocab, words)
    trainer = Trainer(model, triplets)
    metrics = trainer.run(steps, progress=not quiet)
    save_checkpoint(out_path, model, trainer.state)
    click.echo(f"trained {len(metrics)} steps, final loss {metrics[-1].loss:.4f}, wrote {out_path}")


@cli.command()
@click.option("--ckpt", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--data", "data_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--task", required=True, type=click.Choice(["qa", "qg"]))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--cap", type=click.IntRange(min=1), help="Maximum generated length.")
@click.option("--dump-attention", type=click.Path(file_okay=False, path_type=Path),
              help="Directory for per-example attention matrices.")
def generate(ckpt, data_path, task, out_path, cap, dump_attention) -> None:
    """Write one generation per line, conditioned on the gold counterpart."""
    model = load_checkpoint(ckpt).model
    if task not in model.tasks:
        raise click.UsageError(f"checkpoint was trained in {model.config.mode} mode and cannot run {task}")
    lines = []
    for i, triplet in enumerate(read_squad(data_path).triplets):
        generation = generate_for(model, triplet, task, cap, return_attention=dump_attention is not None)
        lines.append(generation.text)
        if dump_attention is not None:
            _dump_attention(dump_attention, task, i, generation.attention)
    out_path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    click.echo(f"wrote {len(lines)} generations to {out_path}")


@cli.command(name="eval")
@click.option("--ckpt", "ckpts", required=True, multiple=True,
              type=click.Path(dir_okay=False, path_type=Path))
@click.option("--data", "data_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--corpus-bleu", is_flag=True, help="Pool n-gram counts over the corpus.")
@click.option("--rouge-beta", type=click.FloatRange(min=0, min_open=True), default=1.0, show_default=True)
@click.option("--dump-attention", type=click.Path(file_okay=False, path_type=Path))
def evaluate(ckpts, data_path, corpus_bleu, rouge_beta, dump_attention) -> None:
    """BLEU-1..4 and ROUGE-L for QA and QG, one row per checkpoint and task."""
    triplets = read_squad(data_path).triplets
    if not triplets:
        raise SquadFormatError("<root>", "no usable triplets")
    reports = {}
    for ckpt in ckpts:
        model = load_checkpoint(ckpt).model
        report = evaluate_model(model, triplets, corpus_bleu, rouge_beta, return_attention=dump_attention is not None)
        if dump_attention is not None:
            for task, generations in report.generations.items():
                for i, generation in enumerate(generations):
                    _dump_attention(dump_attention / ckpt.stem, task, i, generation.attention)
        label = ckpt.stem if ckpt.stem not in reports else str(ckpt)
        reports[label] = report
    click.echo(format_reports(reports), nl=False)


@cli.command()
@click.option("--data", "data_paths", required=True, multiple=True,
              type=click.Path(dir_okay=False, path_type=Path))
def stats(data_paths) -> None:
    """Triplet count and mean context, question and answer lengths per file."""
    click.echo(DatasetStats.header())
    for path in data_paths:
        click.echo(dataset_stats(read_squad(path).triplets).to_row(path.stem))


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--seeds", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--per-tensor", type=click.IntRange(min=1), default=3, show_default=True,
              help="Sampled coordinates per parameter tensor.")
@click.option("--tolerance", type=float, default=1e-4, show_default=True)
def gradcheck(config_path, seeds, per_tensor, tolerance) -> None:
    """Compare analytic gradients with central finite differences."""
    if config_path is None:
        config = GRADCHECK_CONFIG
    else:
        config = load_config(config_path, {"keep": 1.0})
    worst = run_gradient_suite(config, range(seeds), per_tensor)
    for name, error in worst.items():
        click.echo(f"{name:<24}{error:.3e}")
    overall = max(worst.values())
    click.echo(f"{'max':<24}{overall:.3e}")
    if overall >= tolerance:
        raise GradientCheckFailed(f"max relative error {overall:.3e} exceeds {tolerance:.1e}")


def exit_code(exc: BaseException) -> int:
    """Usage errors 1, numeric failures 3, everything data-related 2."""
    if isinstance(exc, (click.UsageError, ConfigError)):
        return EXIT_USAGE
    if isinstance(exc, ArithmeticError):
        return EXIT_NUMERIC
    return EXIT_DATA


def main(argv: Optional[Sequence[str]] = None) -> None:
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="dualqa", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        sys.exit(EXIT_USAGE)
    except (click.ClickException, ValueError, OSError, ArithmeticError) as exc:
        code = exit_code(exc)
        message = exc.format_message() if isinstance(exc, click.ClickException) else str(exc)
        click.echo(f"Error: {message}", err=True)
        sys.exit(code)
    sys.exit(result if isinstance(result, int) else 0)


if __name__ == "__main__":
    main()
