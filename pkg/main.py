#!/usr/bin/env python3
"""
Main CLI interface for APC/CPC speech representation experiments.
"""

import logging
import sys
from functools import wraps

import click
from pydantic import ValidationError

from src.errors import ConfigError, SpeechReprError
from src.models.schema import (
    ApcTrainConfig,
    CpcTrainConfig,
    MelConfig,
    ProbeConfig,
    SpeakerEvalConfig,
    SweepConfig,
    SynthConfig,
)
from src.parsers.config_parser import load_config
from src.pipeline.experiment import ExperimentPipeline

CONFIG_OPTION = click.option(
    "--config", "config_path", type=click.Path(dir_okay=False), help="key = value config file"
)
SET_OPTION = click.option(
    "--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override one config value (repeatable)"
)


def _fail(category: str, exit_code: int, message: str) -> None:
    click.echo(f"error={category} message={' '.join(str(message).split())}", err=True)
    sys.exit(exit_code)


def reports_errors(command):
    """Turn package errors into one `error=<category>` line and the category's exit code."""

    @wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except SpeechReprError as e:
            _fail(e.category, e.exit_code, e)
        except ValidationError as e:
            _fail(ConfigError.category, ConfigError.exit_code, e)
        except Exception as e:
            logging.getLogger("src").exception("Unhandled error")
            _fail(SpeechReprError.category, SpeechReprError.exit_code, e)

    return wrapper


def _parse_layer(value: str):
    if value == "all":
        return "all"
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"--layer must be an integer or 'all', got {value!r}") from None


@click.group()
@click.option(
    "--output-root",
    envvar="APC_SPEECH_OUTPUT_ROOT",
    type=click.Path(file_okay=False),
    help="Directory that relative output paths are resolved under",
)
@click.option("--verbose", is_flag=True, help="Log debug messages")
@click.pass_context
def cli(ctx, output_root, verbose):
    """APC/CPC speech representation learning with phone and speaker probes."""
    ctx.ensure_object(dict)
    ctx.obj["pipeline"] = ExperimentPipeline(output_root, verbose)


@cli.command("gen-synth")
@click.argument("out_dir", type=click.Path(file_okay=False))
@CONFIG_OPTION
@SET_OPTION
@reports_errors
def gen_synth(out_dir, config_path, overrides):
    """Generate the synthetic phone/speaker corpus into OUT_DIR."""
    pipeline = click.get_current_context().obj["pipeline"]
    cfg = load_config(SynthConfig, config_path, overrides)
    manifest = pipeline.gen_synth(cfg, out_dir)
    click.echo(f"manifest={manifest}")


@cli.command()
@click.argument("wave_dir", type=click.Path())
@click.argument("out_dir", type=click.Path(file_okay=False))
@CONFIG_OPTION
@SET_OPTION
@reports_errors
def featurize(wave_dir, out_dir, config_path, overrides):
    """Compute speaker-normalized log-Mel features for WAVE_DIR/<speaker>/*.wav."""
    pipeline = click.get_current_context().obj["pipeline"]
    cfg = load_config(MelConfig, config_path, overrides)
    manifest = pipeline.featurize(wave_dir, out_dir, cfg)
    click.echo(f"manifest={manifest}")


@cli.command()
@click.argument("kind", type=click.Choice(["apc", "cpc"]))
@click.argument("manifest", type=click.Path())
@click.argument("out_dir", type=click.Path(file_okay=False))
@CONFIG_OPTION
@SET_OPTION
@click.option("--plot", is_flag=True, help="Also write the loss curve as loss.svg")
@reports_errors
def train(kind, manifest, out_dir, config_path, overrides, plot):
    """Train an APC or CPC model on the corpus in MANIFEST."""
    pipeline = click.get_current_context().obj["pipeline"]
    cfg = load_config(ApcTrainConfig if kind == "apc" else CpcTrainConfig, config_path, overrides)
    checkpoint = pipeline.train(kind, manifest, out_dir, cfg, plot)
    click.echo(f"checkpoint={checkpoint}")


@cli.command()
@click.argument("checkpoint", type=click.Path())
@click.argument("manifest", type=click.Path())
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--layer", default="-1", help="APC layer (1-based), -1 for the last, or 'all'")
@click.option("--tap", type=click.Choice(["frame", "context"]), help="CPC tap (defaults to the variant's)")
@reports_errors
def extract(checkpoint, manifest, out_dir, layer, tap):
    """Write the representations of a trained model for every utterance in MANIFEST."""
    pipeline = click.get_current_context().obj["pipeline"]
    out_manifest = pipeline.extract(checkpoint, manifest, out_dir, _parse_layer(layer), tap)
    click.echo(f"manifest={out_manifest}")


@cli.command("probe-phone")
@click.argument("manifest", type=click.Path())
@click.argument("report_path", type=click.Path(dir_okay=False))
@click.option("--probe", "probe_kind", type=click.Choice(["linear", "mlp1", "mlp3"]), help="Probe classifier")
@CONFIG_OPTION
@SET_OPTION
@reports_errors
def probe_phone(manifest, report_path, probe_kind, config_path, overrides):
    """Frame error rate of a phone probe trained on the features in MANIFEST."""
    pipeline = click.get_current_context().obj["pipeline"]
    overrides = overrides + ((f"kind={probe_kind}",) if probe_kind else ())
    cfg = load_config(ProbeConfig, config_path, overrides)
    per = pipeline.probe_phone(manifest, report_path, cfg)
    click.echo(f"metric=per value={per!r}")


@cli.command("probe-speaker")
@click.argument("manifest", type=click.Path())
@click.argument("report_path", type=click.Path(dir_okay=False))
@click.option("--trials", "trials_path", type=click.Path(), help="Trial list; built from the corpus when omitted")
@CONFIG_OPTION
@SET_OPTION
@reports_errors
def probe_speaker(manifest, report_path, trials_path, config_path, overrides):
    """Speaker verification EER with LDA and cosine scoring."""
    pipeline = click.get_current_context().obj["pipeline"]
    cfg = load_config(SpeakerEvalConfig, config_path, overrides)
    eer = pipeline.probe_speaker(manifest, report_path, cfg, trials_path)
    click.echo(f"metric=eer value={eer!r}")


@cli.command()
@click.argument("manifest", type=click.Path())
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option(
    "--speaker-manifest",
    type=click.Path(),
    help="Corpus for the EER column, e.g. the speaker_probe/ copy written by gen-synth",
)
@CONFIG_OPTION
@SET_OPTION
@reports_errors
def sweep(manifest, out_dir, speaker_manifest, config_path, overrides):
    """Phone and speaker probes over a grid of variants, prediction steps and layers."""
    pipeline = click.get_current_context().obj["pipeline"]
    cfg = load_config(SweepConfig, config_path, overrides)
    rows = pipeline.sweep(manifest, out_dir, cfg, speaker_manifest)
    click.echo(f"rows={len(rows)} report={pipeline.resolve(out_dir) / 'sweep.txt'}")


if __name__ == "__main__":
    cli()
