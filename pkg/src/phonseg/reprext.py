"""Phonetic representation extraction.

Segment-level vectors: take the recognizer's per-frame argmax categories,
group maximal runs of equal labels, drop the blank runs, and average each
remaining run's bottleneck rows. Grouping runs first keeps blank-separated
repeats as distinct segments, which matches how the decoder collapses the
same grid.

Frame-level vectors come from a small self-supervised encoder trained to
reconstruct masked input frames from context; its latents keep one vector
per frame, which is exactly the granularity contrast the length metrics
measure.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .asr import AsrModel, AsrOutputs, asr_forward, TrainConfig
from .errors import ConfigError, DimensionError, TrainingError
from .layers import BiLSTM, Conv1d, Linear
from .params import ParamStore, adam_step
from .rng import Rng


@dataclass
class FrameLabeled:
    bottleneck: np.ndarray  # (T x d_bottleneck)
    labels: np.ndarray  # (T,) category ids in [0, K]
    blank: int  # blank category id, always K

    def __post_init__(self):
        if self.labels.shape[0] != self.bottleneck.shape[0]:
            raise DimensionError("one label per bottleneck frame required")


@dataclass
class SprSeq:
    vectors: np.ndarray  # (N x d_bottleneck)
    categories: np.ndarray  # (N,) phoneme ids, never blank
    spans: list  # [(start, end)) frame spans, ordered, non-overlapping

    @property
    def n_segments(self) -> int:
        return self.vectors.shape[0]


@dataclass
class UprSeq:
    vectors: np.ndarray  # (T x d_upr), one row per input frame

    @property
    def n_frames(self) -> int:
        return self.vectors.shape[0]


def categorize(outputs: AsrOutputs) -> FrameLabeled:
    """Label every bottleneck frame with its argmax posterior category.

    Ties break to the lowest category index.
    """
    labels = np.argmax(outputs.log_posteriors, axis=1).astype(np.int64)
    blank = outputs.log_posteriors.shape[1] - 1
    return FrameLabeled(outputs.bottleneck, labels, blank)


def label_runs(labels: np.ndarray) -> list:
    """Maximal runs of equal values as (label, start, end) with end exclusive."""
    runs = []
    start = 0
    n = labels.shape[0]
    while start < n:
        end = start + 1
        while end < n and labels[end] == labels[start]:
            end += 1
        runs.append((int(labels[start]), start, end))
        start = end
    return runs


def merge(frame_labeled: FrameLabeled) -> SprSeq:
    """Group label runs, drop blank runs, average each survivor's frames.

    All-blank input yields a valid empty sequence.
    """
    bottleneck = frame_labeled.bottleneck
    vectors, categories, spans = [], [], []
    for category, start, end in label_runs(frame_labeled.labels):
        if category == frame_labeled.blank:
            continue
        vectors.append(bottleneck[start:end].mean(axis=0))
        categories.append(category)
        spans.append((start, end))
    matrix = (
        np.vstack(vectors) if vectors else np.zeros((0, bottleneck.shape[1]))
    )
    return SprSeq(matrix, np.asarray(categories, dtype=np.int64), spans)


def extract_spr(model: AsrModel, features: np.ndarray) -> SprSeq:
    """Full segment extraction for one utterance."""
    return merge(categorize(asr_forward(model, features)))


# ---------------------------------------------------------------------------
# frame-level encoder trained by masked reconstruction


@dataclass
class UprConfig:
    d_feat: int = 20
    conv_kernel: int = 3
    conv_channels: int = 32
    lstm_hidden: int = 16
    d_upr: int = 32
    mask_prob: float = 0.15
    seed: int = 0

    @property
    def receptive_radius(self) -> int:
        return self.conv_kernel // 2

    def validate(self) -> "UprConfig":
        if self.conv_kernel % 2 != 1:
            raise ConfigError("conv kernel must be odd")
        if not 0.0 <= self.mask_prob < 1.0:
            raise ConfigError("mask_prob must be in [0, 1)")
        return self

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, blob: dict) -> "UprConfig":
        return cls(**blob).validate()


class UprEncoder:
    """Conv + BiLSTM + linear latent head, with a reconstruction head used
    only during training."""

    def __init__(self, config: UprConfig):
        self.config = config.validate()
        self.store = ParamStore()
        rng = Rng(config.seed).substream("upr-init")
        self.conv = Conv1d(
            self.store, "conv", config.conv_kernel, config.d_feat,
            config.conv_channels, rng,
        )
        self.bilstm = BiLSTM(
            self.store, "bilstm", config.conv_channels, config.lstm_hidden, rng
        )
        self.latent = Linear(
            self.store, "latent", 2 * config.lstm_hidden, config.d_upr, rng
        )
        self.recon = Linear(self.store, "recon", config.d_upr, config.d_feat, rng)

    def latent_nodes(self, features: np.ndarray):
        if features.ndim != 2 or features.shape[1] != self.config.d_feat:
            raise DimensionError(
                f"features must be (T x {self.config.d_feat}), got {features.shape}"
            )
        x = ad.relu(self.conv(ad.constant(features)))
        return self.latent(self.bilstm(x))

    def reconstruction_loss(self, features: np.ndarray, rng: Rng) -> ad.Node:
        """Masked-frame objective: zero out a random subset of frames and
        reconstruct their original values from context. With no frames
        masked (mask_prob 0) this degrades to plain autoencoding over all
        frames."""
        t_total = features.shape[0]
        masked = rng.random(size=t_total) < self.config.mask_prob
        if not masked.any():
            masked = np.ones(t_total, dtype=bool)
        corrupted = features.copy()
        corrupted[masked] = 0.0
        recon = self.recon(self.latent_nodes(corrupted))
        weights = np.zeros_like(features)
        weights[masked] = 1.0
        diff = ad.mul(ad.sub(recon, ad.constant(features)), ad.constant(weights))
        denominator = float(masked.sum() * features.shape[1])
        return ad.scale(sum_of_squares(diff), 1.0 / denominator)

    def save(self, dirpath):
        self.store.save(dirpath, extra={"kind": "upr", "config": self.config.to_dict()})

    @classmethod
    def load(cls, dirpath) -> "UprEncoder":
        from . import tensorio

        _, _, extra = tensorio.load_checkpoint(dirpath)
        if not extra or extra.get("kind") != "upr":
            raise ConfigError(f"{dirpath} is not a frame-encoder checkpoint")
        model = cls(UprConfig.from_dict(extra["config"]))
        model.store.load_values(dirpath)
        return model


def sum_of_squares(node: ad.Node) -> ad.Node:
    return ad.sum_all(ad.square(node))


@dataclass
class UprTrainReport:
    initial_loss: float = 0.0
    epoch_loss: list = None
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "initial_loss": self.initial_loss,
            "epoch_loss": self.epoch_loss,
            "wall_time": self.wall_time,
        }


def train_upr_encoder(corpus, config: UprConfig, hyper: TrainConfig) -> tuple:
    """Returns (encoder, report)."""
    encoder = UprEncoder(config)
    mask_rng = Rng(hyper.seed).substream("upr-mask")
    shuffle_rng = Rng(hyper.seed).substream("upr-shuffle")
    report = UprTrainReport(epoch_loss=[])
    started = time.perf_counter()

    initial = [
        float(encoder.reconstruction_loss(
            utt.features, mask_rng.substream(("init", utt.utt_id))
        ).value[0, 0])
        for utt in corpus.train[: min(16, len(corpus.train))]
    ]
    report.initial_loss = float(np.mean(initial))

    for epoch in range(hyper.epochs):
        order = shuffle_rng.substream(("epoch", epoch)).permutation(len(corpus.train))
        losses = []
        for idx in order:
            utt = corpus.train[int(idx)]
            loss = encoder.reconstruction_loss(
                utt.features, mask_rng.substream((epoch, utt.utt_id))
            )
            if not np.isfinite(loss.value[0, 0]):
                raise TrainingError(f"reconstruction loss diverged at epoch {epoch}")
            ad.backward(loss)
            adam_step(encoder.store, hyper.lr, hyper.betas, hyper.eps)
            losses.append(float(loss.value[0, 0]))
        report.epoch_loss.append(float(np.mean(losses)))
    report.wall_time = time.perf_counter() - started
    return encoder, report


def extract_upr(encoder: UprEncoder, features: np.ndarray) -> UprSeq:
    """Per-frame latents in eval mode (no masking)."""
    return UprSeq(encoder.latent_nodes(features).value)
