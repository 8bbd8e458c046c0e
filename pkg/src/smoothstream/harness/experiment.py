"""Config-driven training and evaluation on synthetic streams."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from ..errors import ConfigError

from ..model import ModelConfig, ModelParams, init_params, run_stream
from ..model.config import coerce_fields
from ..model.training import OptimConfig, train
from .metrics import MetricReport, evaluate_outputs
from .synth import ClipDataset, SynthConfig, gen_stream

EVAL_SEED_OFFSET = 1_000_003


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    steps_per_epoch: int = 50
    batch_size: int = 16
    lr: float = 7e-4
    weight_decay: float = 5e-5
    warmup_frac: float = 0.1
    p_mc: float = 0.0
    train_streams: int = 5
    eval_T: int = 5000

    def optim(self) -> OptimConfig:
        return OptimConfig(
            lr=self.lr,
            weight_decay=self.weight_decay,
            warmup_frac=self.warmup_frac,
            batch_size=self.batch_size,
            steps_per_epoch=self.steps_per_epoch,
        )


# default desk setup: K=5 classes, d=16 features, 5 x 10^4 training frames
DEFAULT_MODEL = ModelConfig(d=16, C=32, heads=4, M=8, M2=8, enc_layers=1, dec_layers=1, L=8, L_a=8, N=32, K=5)
DEFAULT_SYNTH = SynthConfig(K=5, d=16, T=10000)


def split_config(raw: dict):
    """Route flat key=value settings to the model, synth and training configs."""
    known = {f.name for cls in (ModelConfig, SynthConfig, TrainConfig) for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    model = replace(DEFAULT_MODEL, **coerce_fields(ModelConfig, raw))
    synth = replace(DEFAULT_SYNTH, **coerce_fields(SynthConfig, raw))
    training = TrainConfig(**coerce_fields(TrainConfig, raw))
    if model.K != synth.K or model.d != synth.d:
        synth = replace(synth, K=model.K, d=model.d)
    return model, synth, training


def training_streams(synth: SynthConfig, n: int, seed: int):
    return [gen_stream(synth, seed=seed * 1000 + i, source=i) for i in range(n)]


def train_synthetic(model: ModelConfig, synth: SynthConfig, training: TrainConfig, seed: int = 0):
    streams = training_streams(synth, training.train_streams, seed)
    data = ClipDataset(streams, model, p_mc=training.p_mc)
    return train(init_params(model, seed), data, training.optim(), training.epochs, seed=seed)


def evaluate_synthetic(params: ModelParams, synth: SynthConfig, horizons=(0,), seed: int = 0, T: int = 5000, drift_seed=None) -> MetricReport:
    """Stream a held-out synthetic sequence through the model and score it."""
    cfg = replace(synth, T=T)
    stream = gen_stream(cfg, seed=EVAL_SEED_OFFSET + seed if drift_seed is None else drift_seed)
    return evaluate_outputs(run_stream(params, stream.features), stream.labels, horizons)


def checkpoint_metadata(synth: SynthConfig, training: TrainConfig, seed: int) -> dict:
    meta = {f"synth.{k}": v for k, v in asdict(synth).items()}
    meta.update({f"train.{k}": v for k, v in asdict(training).items()})
    meta["seed"] = seed
    return meta


def synth_from_metadata(meta: dict) -> SynthConfig:
    raw = {k[len("synth.") :]: v for k, v in meta.items() if k.startswith("synth.")}
    return SynthConfig(**coerce_fields(SynthConfig, raw))


def summarize(history) -> str:
    last = history[-1]
    return f"epochs={len(history)} final_loss={last['loss']:.4f} final_acc={last['accuracy']:.3f}"
