"""
Experiment pipeline behind the command-line interface.

Each public method runs one command end to end: it validates inputs, writes
its artifacts under an output directory, and records the run's configuration
in run.json next to them.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import scipy
from pydantic import BaseModel
from scipy.io import wavfile

from .. import __version__
from ..data.synthetic import gen_synthetic_corpus
from ..errors import ConfigError, ContractError, MissingInputError, ParseError, SpeakerLookupError
from ..frontend.mel import log_mel
from ..frontend.normalize import corpus_normalize, speaker_normalize
from ..models.apc import ApcModel, extract_apc, train_apc
from ..models.cpc import CpcModel, extract_cpc, train_cpc
from ..models.schema import (
    ApcTrainConfig,
    CpcTrainConfig,
    CpcVariant,
    FeatureSequence,
    Gender,
    MelConfig,
    ProbeConfig,
    RunRecord,
    SpeakerEvalConfig,
    SweepConfig,
    SynthConfig,
    Waveform,
)
from ..parsers.trial_parser import TrialListParser
from ..probes.classifier import evaluate_phone_probe
from ..probes.speaker import evaluate_speaker_verification
from ..storage.atomic import atomic_write_text
from ..storage.checkpoint_store import load_model, save_checkpoint
from ..storage.corpus_store import load_corpus, save_corpus
from ..storage.reports import plot_loss_history, write_loss_history, write_report, write_scores, write_speaker_stats

PACKAGE_LOGGER = "src"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
SPEAKER_PROBE_DIR = "speaker_probe"


def config_hash(config: Union[BaseModel, Dict]) -> str:
    """sha256 of the canonical JSON form of a configuration."""
    data = config.model_dump(mode="json") if isinstance(config, BaseModel) else config
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ExperimentPipeline:
    """Runs data generation, training, extraction and probing commands."""

    def __init__(self, output_root: Optional[str] = None, verbose: bool = False):
        self.output_root = Path(output_root) if output_root else None
        self.logger = self._setup_logging(verbose)
        self._run_handler: Optional[logging.Handler] = None

    def _setup_logging(self, verbose: bool) -> logging.Logger:
        """Console logging for the whole package."""
        package_logger = logging.getLogger(PACKAGE_LOGGER)
        package_logger.setLevel(logging.DEBUG if verbose else logging.INFO)

        if not package_logger.handlers:
            handler = logging.StreamHandler()
            handler.setFormatter(logging.Formatter(LOG_FORMAT))
            package_logger.addHandler(handler)

        return logging.getLogger(__name__)

    def resolve(self, path: Union[str, Path]) -> Path:
        """Relative output paths live under the output root when one is set."""
        path = Path(path)
        if self.output_root is not None and not path.is_absolute():
            return self.output_root / path
        return path

    def _start_run(self, command: str, out_dir: Path, config: Union[BaseModel, Dict], seed: Optional[int]) -> str:
        out_dir.mkdir(parents=True, exist_ok=True)
        self._finish_run()
        handler = logging.FileHandler(out_dir / "run.log", encoding="utf-8")
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logging.getLogger(PACKAGE_LOGGER).addHandler(handler)
        self._run_handler = handler

        digest = config_hash(config)
        record = RunRecord(
            command=command,
            config=config.model_dump(mode="json") if isinstance(config, BaseModel) else config,
            config_hash=digest,
            seed=seed,
            versions={"package": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        )
        atomic_write_text(out_dir / "run.json", json.dumps(record.model_dump(), indent=2, sort_keys=True) + "\n")
        self.logger.info("Running %s (config %s) into %s", command, digest[:12], out_dir)
        return digest

    def _finish_run(self) -> None:
        if self._run_handler is not None:
            logging.getLogger(PACKAGE_LOGGER).removeHandler(self._run_handler)
            self._run_handler.close()
            self._run_handler = None

    def _require(self, path: Union[str, Path], what: str) -> Path:
        path = Path(path)
        if not path.exists():
            raise MissingInputError(f"{what} not found: {path}")
        return path

    # data

    def gen_synth(self, cfg: SynthConfig, out_dir: Union[str, Path]) -> Path:
        """
        Generate, speaker-normalize and save the synthetic corpus.

        Speaker identity in this corpus is an additive offset, which the
        per-speaker statistics remove. A second copy normalized with
        corpus-wide statistics goes to speaker_probe/ for speaker probes.
        """
        out_dir = self.resolve(out_dir)
        digest = self._start_run("gen-synth", out_dir, cfg, cfg.seed)
        try:
            corpus = gen_synthetic_corpus(cfg)
            normalized, stats = speaker_normalize(corpus.utterances)
            manifest = save_corpus(normalized, out_dir)
            write_speaker_stats(out_dir / "speaker_stats.txt", stats)
            speaker_manifest = save_corpus(corpus_normalize(corpus.utterances)[0], out_dir / SPEAKER_PROBE_DIR)
            self.logger.info("Speaker-probe corpus (corpus-wide normalization) at %s", speaker_manifest)
            write_report(
                out_dir / "report.txt",
                [
                    {
                        "metric": "oracle_phone_accuracy",
                        "value": corpus.oracle_accuracy,
                        "config_hash": digest,
                        "seed": cfg.seed,
                    }
                ],
            )
            return manifest
        finally:
            self._finish_run()

    def featurize(self, wave_dir: Union[str, Path], out_dir: Union[str, Path], cfg: Optional[MelConfig] = None) -> Path:
        """
        Log-Mel features for wave_dir/<speaker>/<utterance>.wav.

        wave_dir/speakers.tsv lists `speaker gender` per line. Features are
        normalized per speaker before saving.
        """
        cfg = cfg or MelConfig()
        wave_dir = self._require(wave_dir, "Wave directory")
        genders = self._read_speaker_genders(self._require(wave_dir / "speakers.tsv", "Speaker list"))
        out_dir = self.resolve(out_dir)
        self._start_run("featurize", out_dir, cfg, None)
        try:
            corpus: List[FeatureSequence] = []
            for speaker_dir in sorted(p for p in wave_dir.iterdir() if p.is_dir()):
                speaker = speaker_dir.name
                if speaker not in genders:
                    raise SpeakerLookupError(f"Speaker {speaker} is missing from speakers.tsv")
                for wav in sorted(speaker_dir.glob("*.wav")):
                    features = log_mel(self._read_wave(wav), cfg, f"{speaker}_{wav.stem}", speaker)
                    corpus.append(
                        FeatureSequence(
                            utterance_id=features.utterance_id,
                            speaker_id=speaker,
                            frames=features.frames,
                            gender=genders[speaker],
                        )
                    )
            if not corpus:
                raise MissingInputError(f"No .wav files under {wave_dir}")
            normalized, stats = speaker_normalize(corpus)
            write_speaker_stats(out_dir / "speaker_stats.txt", stats)
            self.logger.info("Featurized %d utterances from %d speakers", len(corpus), len(stats.speakers()))
            return save_corpus(normalized, out_dir)
        finally:
            self._finish_run()

    def _read_speaker_genders(self, path: Path) -> Dict[str, Gender]:
        genders: Dict[str, Gender] = {}
        for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 2 or fields[1] not in ("F", "M"):
                raise ParseError(f"Line {number} is not 'speaker F|M'", path=str(path))
            genders[fields[0]] = Gender(fields[1])
        return genders

    def _read_wave(self, path: Path) -> Waveform:
        try:
            rate, data = wavfile.read(path)
        except ValueError as exc:
            raise ParseError(f"Unreadable wave file: {exc}", path=str(path)) from exc
        if data.ndim != 1:
            raise ContractError(f"{path} has {data.shape[1]} channels; only mono is supported")
        if np.issubdtype(data.dtype, np.integer):
            data = data / float(np.iinfo(data.dtype).max + 1)
        try:
            return Waveform(samples=data, sample_rate=rate)
        except ValueError as exc:
            raise ContractError(f"{path}: {exc}") from exc

    # training and extraction

    def train(
        self,
        kind: str,
        manifest: Union[str, Path],
        out_dir: Union[str, Path],
        cfg: Union[ApcTrainConfig, CpcTrainConfig],
        plot: bool = False,
    ) -> Path:
        """Train APC or CPC; writes model.ckpt(+.meta), loss.txt and optionally loss.svg."""
        corpus = load_corpus(self._require(manifest, "Manifest"))
        out_dir = self.resolve(out_dir)
        self._start_run(f"train-{kind}", out_dir, cfg, cfg.seed)
        try:
            if kind == "apc":
                result = train_apc(corpus, cfg)
                history = result.history
            elif kind == "cpc":
                result = train_cpc(corpus, cfg)
                history = result.history
                self.logger.info("CPC loss before training %.6f", result.initial_loss)
            else:
                raise ConfigError(f"Unknown model kind: {kind}")
            write_loss_history(out_dir / "loss.txt", history)
            if plot:
                plot_loss_history(out_dir / "loss.svg", history, f"{kind} training loss")
            return save_checkpoint(result.model, out_dir / "model.ckpt")
        finally:
            self._finish_run()

    def extract(
        self,
        checkpoint: Union[str, Path],
        manifest: Union[str, Path],
        out_dir: Union[str, Path],
        layer: Union[int, str] = -1,
        tap: Optional[str] = None,
    ) -> Path:
        """Run a trained model over a corpus and save its representations as a new corpus."""
        model = load_model(self._require(checkpoint, "Checkpoint"))
        corpus = load_corpus(self._require(manifest, "Manifest"))
        out_dir = self.resolve(out_dir)
        settings = {"checkpoint": str(checkpoint), "manifest": str(manifest), "layer": layer, "tap": tap}
        self._start_run("extract", out_dir, settings, None)
        try:
            extracted = [
                sequence.with_frames(self._represent(model, sequence.frames, layer, tap).astype(np.float32))
                for sequence in corpus
            ]
            return save_corpus(extracted, out_dir)
        finally:
            self._finish_run()

    def _represent(
        self, model: Union[ApcModel, CpcModel], frames: np.ndarray, layer: Union[int, str], tap: Optional[str]
    ) -> np.ndarray:
        if isinstance(model, ApcModel):
            return extract_apc(model, frames, layer)
        return extract_cpc(model, frames, tap or model.tap)

    # probes

    def probe_phone(self, manifest: Union[str, Path], report_path: Union[str, Path], cfg: ProbeConfig) -> float:
        """Frame error rate of a phone probe; returns the test error."""
        corpus = load_corpus(self._require(manifest, "Manifest"))
        report_path = self.resolve(report_path)
        digest = self._start_run("probe-phone", report_path.parent, cfg, cfg.seed)
        try:
            result = evaluate_phone_probe(corpus, cfg)
            write_report(
                report_path,
                [
                    {"metric": "per", "value": result.test_error, "probe": cfg.kind.value, "config_hash": digest, "seed": cfg.seed},
                    {"metric": "train_per", "value": result.train_error, "probe": cfg.kind.value, "config_hash": digest, "seed": cfg.seed},
                ],
            )
            return result.test_error
        finally:
            self._finish_run()

    def probe_speaker(
        self,
        manifest: Union[str, Path],
        report_path: Union[str, Path],
        cfg: SpeakerEvalConfig,
        trials_path: Optional[Union[str, Path]] = None,
    ) -> float:
        """EER of LDA/cosine speaker verification; scores go next to the report."""
        corpus = load_corpus(self._require(manifest, "Manifest"))
        trials = TrialListParser().parse_file(str(self._require(trials_path, "Trial list"))) if trials_path else None
        report_path = self.resolve(report_path)
        digest = self._start_run("probe-speaker", report_path.parent, cfg, cfg.seed)
        try:
            result = evaluate_speaker_verification(corpus, cfg, trials)
            write_scores(report_path.with_suffix(".scores"), result.scores)
            write_report(
                report_path,
                [
                    {
                        "metric": "eer",
                        "value": result.eer.eer,
                        "threshold": result.eer.threshold,
                        "n_target": result.eer.n_target,
                        "n_nontarget": result.eer.n_nontarget,
                        "lda_dim": result.lda.out_dim,
                        "config_hash": digest,
                        "seed": cfg.seed,
                    }
                ],
            )
            return result.eer.eer
        finally:
            self._finish_run()

    # grids

    def sweep(
        self,
        manifest: Union[str, Path],
        out_dir: Union[str, Path],
        cfg: SweepConfig,
        speaker_manifest: Optional[Union[str, Path]] = None,
    ) -> List[Dict[str, object]]:
        """
        Train every (variant, n_steps) pair, probe each requested APC layer or
        the CPC variant's tap, and write one report row per grid cell.

        Models train on manifest. EER uses representations of speaker_manifest
        when given (see gen_synth), otherwise of manifest.
        """
        corpus = load_corpus(self._require(manifest, "Manifest"))
        speaker_corpus = load_corpus(self._require(speaker_manifest, "Speaker manifest")) if speaker_manifest else corpus
        if "apc" in cfg.variants and max(cfg.layers) > cfg.apc.num_layers:
            raise ConfigError(f"Sweep layers {cfg.layers} exceed apc.num_layers={cfg.apc.num_layers}")
        out_dir = self.resolve(out_dir)
        digest = self._start_run("sweep", out_dir, cfg, cfg.apc.seed)
        try:
            rows: List[Dict[str, object]] = []
            if cfg.include_surface:
                rows.append(self._grid_row("mel", 0, "surface", corpus, speaker_corpus, cfg, digest))
            for variant in cfg.variants:
                for n in cfg.n_steps:
                    if variant == "apc":
                        model = train_apc(corpus, cfg.apc.model_copy(update={"n_steps": n})).model
                        for layer in cfg.layers:
                            phone_features = [s.with_frames(extract_apc(model, s.frames, layer)) for s in corpus]
                            speaker_features = [s.with_frames(extract_apc(model, s.frames, layer)) for s in speaker_corpus]
                            rows.append(self._grid_row(variant, n, layer, phone_features, speaker_features, cfg, digest))
                    else:
                        cpc_cfg = cfg.cpc.model_copy(update={"n_steps": n, "variant": CpcVariant(variant[len("cpc_") :])})
                        model = train_cpc(corpus, cpc_cfg).model
                        phone_features = [s.with_frames(extract_cpc(model, s.frames, cpc_cfg.tap)) for s in corpus]
                        speaker_features = [s.with_frames(extract_cpc(model, s.frames, cpc_cfg.tap)) for s in speaker_corpus]
                        rows.append(self._grid_row(variant, n, cpc_cfg.tap, phone_features, speaker_features, cfg, digest))
            write_report(out_dir / "sweep.txt", rows)
            return rows
        finally:
            self._finish_run()

    def _grid_row(
        self,
        variant: str,
        n_steps: int,
        layer: Union[int, str],
        phone_corpus: List[FeatureSequence],
        speaker_corpus: List[FeatureSequence],
        cfg: SweepConfig,
        digest: str,
    ) -> Dict[str, object]:
        per = evaluate_phone_probe(phone_corpus, cfg.probe).test_error
        eer = evaluate_speaker_verification(speaker_corpus, cfg.speaker).eer.eer
        self.logger.info("%s n=%d layer=%s: PER %.4f EER %.4f", variant, n_steps, layer, per, eer)
        return {
            "variant": variant,
            "n_steps": n_steps,
            "layer": layer,
            "per": per,
            "eer": eer,
            "config_hash": digest,
            "seed": cfg.apc.seed,
        }
