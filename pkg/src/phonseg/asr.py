"""Frame-feature recognizer trained with the CTC objective.

Trunk (two odd-kernel convolutions and one BiLSTM) produces per-frame
context vectors; a pure affine bottleneck compresses them and an affine
classifier with log-softmax yields per-frame category log-probabilities,
blank in the last column. The bottleneck output is what the segment
extraction in `reprext` averages.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import ctc
from .errors import ConfigError, DimensionError, TrainingError
from .layers import BiLSTM, Conv1d, Linear
from .metrics import corpus_error_rate
from .params import ParamStore, adam_step
from .rng import Rng


@dataclass
class AsrConfig:
    d_feat: int = 20
    n_conv: int = 2
    conv_kernel: int = 3
    conv_channels: int = 48
    lstm_hidden: int = 32  # context dim is twice this
    d_bottleneck: int = 32
    n_phonemes: int = 16
    bottleneck_nonlinearity: str = "none"  # affine by design, recorded here
    seed: int = 0

    @property
    def d_context(self) -> int:
        return 2 * self.lstm_hidden

    @property
    def n_categories(self) -> int:
        return self.n_phonemes + 1  # trailing blank

    @property
    def receptive_radius(self) -> int:
        """Frames to each side feeding one bottleneck vector (conv taps only)."""
        return self.n_conv * (self.conv_kernel // 2)

    def validate(self) -> "AsrConfig":
        if self.conv_kernel % 2 != 1:
            raise ConfigError("conv kernel must be odd")
        if self.d_bottleneck >= self.d_context:
            raise ConfigError(
                f"bottleneck dim {self.d_bottleneck} must be below context "
                f"dim {self.d_context}"
            )
        if self.bottleneck_nonlinearity != "none":
            raise ConfigError("bottleneck layer is affine only")
        if self.n_phonemes < 1:
            raise ConfigError("need at least one phoneme")
        return self

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, blob: dict) -> "AsrConfig":
        return cls(**blob).validate()


@dataclass
class AsrOutputs:
    context: np.ndarray  # (T x d_context)
    bottleneck: np.ndarray  # (T x d_bottleneck)
    log_posteriors: np.ndarray  # (T x K+1), rows normalized


class AsrModel:
    def __init__(self, config: AsrConfig):
        self.config = config.validate()
        self.store = ParamStore()
        rng = Rng(config.seed).substream("asr-init")
        channels = config.d_feat
        self.convs = []
        for i in range(config.n_conv):
            self.convs.append(
                Conv1d(
                    self.store, f"conv{i}", config.conv_kernel,
                    channels, config.conv_channels, rng,
                )
            )
            channels = config.conv_channels
        self.bilstm = BiLSTM(self.store, "bilstm", channels, config.lstm_hidden, rng)
        self.bottleneck = Linear(
            self.store, "bottleneck", config.d_context, config.d_bottleneck, rng
        )
        self.classifier = Linear(
            self.store, "classifier", config.d_bottleneck, config.n_categories, rng
        )

    def forward_nodes(self, features: np.ndarray):
        """Graph nodes (context, bottleneck, logits) for one utterance."""
        if features.ndim != 2 or features.shape[1] != self.config.d_feat:
            raise DimensionError(
                f"features must be (T x {self.config.d_feat}), got {features.shape}"
            )
        x = ad.constant(features)
        for conv in self.convs:
            x = ad.relu(conv(x))
        context = self.bilstm(x)
        bottleneck = self.bottleneck(context)  # affine, no nonlinearity
        logits = self.classifier(bottleneck)
        return context, bottleneck, logits

    def save(self, dirpath):
        self.store.save(dirpath, extra={"kind": "asr", "config": self.config.to_dict()})

    @classmethod
    def load(cls, dirpath) -> "AsrModel":
        from . import tensorio

        _, _, extra = tensorio.load_checkpoint(dirpath)
        if not extra or extra.get("kind") != "asr":
            raise ConfigError(f"{dirpath} is not an ASR checkpoint")
        model = cls(AsrConfig.from_dict(extra["config"]))
        model.store.load_values(dirpath)
        return model


def asr_forward(model: AsrModel, features: np.ndarray) -> AsrOutputs:
    """Pure evaluation pass; same input gives bit-identical output."""
    context, bottleneck, logits = model.forward_nodes(features)
    log_post = ad.log_softmax_rows(logits)
    return AsrOutputs(context.value, bottleneck.value, log_post.value)


def decode_utterance(model: AsrModel, features: np.ndarray) -> list:
    return ctc.greedy_decode(asr_forward(model, features).log_posteriors)


@dataclass
class TrainConfig:
    epochs: int = 10
    lr: float = 1e-3
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    batch_size: int = 1
    seed: int = 0

    def to_dict(self) -> dict:
        blob = {k: getattr(self, k) for k in self.__dataclass_fields__}
        blob["betas"] = list(self.betas)
        return blob

    @classmethod
    def from_dict(cls, blob: dict) -> "TrainConfig":
        blob = dict(blob)
        blob["betas"] = tuple(blob.get("betas", (0.9, 0.999)))
        return cls(**blob)


@dataclass
class AsrTrainReport:
    epoch_loss: list = field(default_factory=list)
    epoch_val_per: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_per: float = float("inf")
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "epoch_loss": self.epoch_loss,
            "epoch_val_per": self.epoch_val_per,
            "best_epoch": self.best_epoch,
            "best_val_per": self.best_val_per,
            "wall_time": self.wall_time,
        }


def validation_per(model: AsrModel, utterances) -> float:
    pairs = [
        (decode_utterance(model, utt.features), utt.phonemes) for utt in utterances
    ]
    return corpus_error_rate(pairs)


def asr_train(model: AsrModel, corpus, hyper: TrainConfig) -> AsrTrainReport:
    """CTC training with per-epoch validation; keeps the checkpoint with the
    lowest validation error rate."""
    k = model.config.n_phonemes
    for utt in corpus.train:
        if utt.phonemes.size and utt.phonemes.max() >= k:
            raise ConfigError("corpus phoneme ids exceed model inventory")

    started = time.perf_counter()
    shuffle_rng = Rng(hyper.seed).substream("asr-shuffle")
    report = AsrTrainReport()
    best_snapshot = model.store.snapshot()
    best_loss = float("inf")

    for epoch in range(hyper.epochs):
        order = shuffle_rng.substream(("epoch", epoch)).permutation(len(corpus.train))
        losses = []
        for chunk_start in range(0, len(order), hyper.batch_size):
            chunk = order[chunk_start : chunk_start + hyper.batch_size]
            batch_nodes = []
            for idx in chunk:
                utt = corpus.train[int(idx)]
                _, _, logits = model.forward_nodes(utt.features)
                batch_nodes.append(ctc.ctc_loss(logits, utt.phonemes))
            total = batch_nodes[0]
            for node in batch_nodes[1:]:
                total = ad.add(total, node)
            mean_loss = ad.scale(total, 1.0 / len(batch_nodes))
            if not np.isfinite(mean_loss.value[0, 0]):
                raise TrainingError(f"CTC loss diverged at epoch {epoch}")
            ad.backward(mean_loss)
            adam_step(model.store, hyper.lr, hyper.betas, hyper.eps)
            losses.append(float(mean_loss.value[0, 0]))
        epoch_loss = float(np.mean(losses))
        report.epoch_loss.append(epoch_loss)
        per = validation_per(model, corpus.val)
        report.epoch_val_per.append(per)
        # ties on validation error go to the epoch with the lower loss
        if (per, epoch_loss) < (report.best_val_per, best_loss):
            report.best_val_per = per
            report.best_epoch = epoch
            best_loss = epoch_loss
            best_snapshot = model.store.snapshot()

    model.store.restore(best_snapshot)
    report.wall_time = time.perf_counter() - started
    return report
