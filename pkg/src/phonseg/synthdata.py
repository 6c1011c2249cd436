"""Deterministic toy-language corpus generation.

A toy language is a phoneme inventory with one feature prototype and one
mel prototype per phoneme, plus longest-match character rules mapping
character n-grams to phoneme sequences. Utterances are random character
strings rendered into per-frame features (prototype plus Gaussian noise)
with exact alignments, so every downstream claim can be checked against
the generating truth.

Character sequences whose phoneme expansion would contain adjacent
identical phonemes are redrawn: frame-level decoding of mel output has no
blank symbol, so a repeat could never be reconstructed after collapsing
runs. Recognition-side repeat handling is still exercised by unit tests
with synthetic label arrays.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensorio
from .errors import DataError, G2PError, SpecValidationError
from .rng import Rng

SEPARATION_SIGMA_FACTOR = 6.0


@dataclass
class ToyLangSpec:
    n_phonemes: int = 16
    n_chars: int = 12
    rules: dict = field(default_factory=dict)  # tuple(char ids) -> tuple(phoneme ids)
    dur_min: int = 3
    dur_max: int = 8
    d_feat: int = 20
    d_mel: int = 20
    sigma: float = 0.05
    feat_prototypes: np.ndarray | None = None  # (K x d_feat)
    mel_prototypes: np.ndarray | None = None  # (K x d_mel)

    def validate(self):
        if self.n_phonemes < 2 or self.n_chars < 2:
            raise SpecValidationError("need at least 2 phonemes and 2 characters")
        if self.dur_min < 1 or self.dur_max < self.dur_min:
            raise SpecValidationError("bad duration range")
        if self.feat_prototypes is None or self.mel_prototypes is None:
            raise SpecValidationError("prototypes missing")
        for name, protos, dim in (
            ("feature", self.feat_prototypes, self.d_feat),
            ("mel", self.mel_prototypes, self.d_mel),
        ):
            if protos.shape != (self.n_phonemes, dim):
                raise SpecValidationError(f"{name} prototype shape {protos.shape}")
            _check_separation(protos, self.sigma, name)
        if not self.rules:
            raise SpecValidationError("empty rule set")
        for chars, phones in self.rules.items():
            if any(c < 0 or c >= self.n_chars for c in chars):
                raise SpecValidationError(f"rule {chars} uses unknown characters")
            if any(p < 0 or p >= self.n_phonemes for p in phones):
                raise SpecValidationError(f"rule {chars} maps to unknown phonemes")
        return self

    @property
    def max_rule_len(self) -> int:
        return max(len(k) for k in self.rules)

    @classmethod
    def default(cls, seed: int = 0, **overrides) -> "ToyLangSpec":
        """Seeded spec with unigram rules plus context-dependent digram rules
        covering the phonemes no single character maps to."""
        spec = cls(**overrides)
        rng = Rng(seed).substream("toy-spec")
        if not spec.rules:
            rules = {}
            for c in range(spec.n_chars):
                rules[(c,)] = (c % spec.n_phonemes,)
            leftover = list(range(spec.n_chars, spec.n_phonemes))
            pair = 0
            while leftover and pair * 2 + 1 < spec.n_chars:
                chunk = tuple(leftover[:2])
                del leftover[:2]
                rules[(2 * pair, 2 * pair + 1)] = chunk
                pair += 1
            if leftover:
                raise SpecValidationError(
                    "cannot cover phoneme inventory with digram rules; "
                    "reduce n_phonemes or raise n_chars"
                )
            spec.rules = rules
        if spec.feat_prototypes is None:
            spec.feat_prototypes = _sample_prototypes(
                rng.substream("feat"), spec.n_phonemes, spec.d_feat, spec.sigma
            )
        if spec.mel_prototypes is None:
            spec.mel_prototypes = _sample_prototypes(
                rng.substream("mel"), spec.n_phonemes, spec.d_mel, spec.sigma
            )
        return spec.validate()

    def to_dict(self) -> dict:
        return {
            "n_phonemes": self.n_phonemes,
            "n_chars": self.n_chars,
            "rules": [
                [list(k), list(v)] for k, v in sorted(self.rules.items())
            ],
            "dur_min": self.dur_min,
            "dur_max": self.dur_max,
            "d_feat": self.d_feat,
            "d_mel": self.d_mel,
            "sigma": self.sigma,
            "feat_prototypes": self.feat_prototypes.tolist(),
            "mel_prototypes": self.mel_prototypes.tolist(),
        }

    @classmethod
    def from_dict(cls, blob: dict) -> "ToyLangSpec":
        spec = cls(
            n_phonemes=blob["n_phonemes"],
            n_chars=blob["n_chars"],
            rules={tuple(k): tuple(v) for k, v in blob["rules"]},
            dur_min=blob["dur_min"],
            dur_max=blob["dur_max"],
            d_feat=blob["d_feat"],
            d_mel=blob["d_mel"],
            sigma=blob["sigma"],
            feat_prototypes=np.array(blob["feat_prototypes"], dtype=np.float64),
            mel_prototypes=np.array(blob["mel_prototypes"], dtype=np.float64),
        )
        return spec.validate()


def _check_separation(protos: np.ndarray, sigma: float, name: str):
    k = protos.shape[0]
    if sigma <= 0:
        return
    limit = SEPARATION_SIGMA_FACTOR * sigma
    diffs = protos[:, None, :] - protos[None, :, :]
    dist = np.sqrt((diffs**2).sum(axis=2))
    dist[np.arange(k), np.arange(k)] = np.inf
    if dist.min() <= limit:
        raise SpecValidationError(
            f"{name} prototypes separated by {dist.min():.3f} <= {limit:.3f}"
        )


def _sample_prototypes(rng: Rng, k: int, dim: int, sigma: float) -> np.ndarray:
    limit = SEPARATION_SIGMA_FACTOR * sigma
    protos = rng.uniform(k, dim, -1.0, 1.0)
    for _ in range(100):
        diffs = protos[:, None, :] - protos[None, :, :]
        dist = np.sqrt((diffs**2).sum(axis=2))
        dist[np.arange(k), np.arange(k)] = np.inf
        bad = np.where(dist.min(axis=1) <= limit)[0]
        if bad.size == 0:
            return protos
        protos[bad] = rng.uniform(bad.size, dim, -1.0, 1.0)
    raise SpecValidationError("could not separate prototypes; lower sigma")


def g2p_apply(spec: ToyLangSpec, chars) -> np.ndarray:
    """Left-to-right longest-match rule application."""
    chars = list(int(c) for c in chars)
    for c in chars:
        if c < 0 or c >= spec.n_chars:
            raise G2PError(f"character id {c} outside inventory")
    phones: list[int] = []
    i = 0
    longest = spec.max_rule_len
    while i < len(chars):
        for width in range(min(longest, len(chars) - i), 0, -1):
            hit = spec.rules.get(tuple(chars[i : i + width]))
            if hit is not None:
                phones.extend(hit)
                i += width
                break
        else:
            raise G2PError(f"no rule covers character {chars[i]} at position {i}")
    return np.asarray(phones, dtype=np.int64)


@dataclass
class Utterance:
    utt_id: str
    chars: np.ndarray
    phonemes: np.ndarray
    features: np.ndarray  # (T x d_feat)
    mel: np.ndarray  # (T x d_mel), frame-synchronous with features
    alignment: list  # [(phoneme id, start frame, end frame)), end exclusive

    @property
    def n_frames(self) -> int:
        return self.features.shape[0]


@dataclass
class Corpus:
    spec: ToyLangSpec
    train: list
    val: list
    test: list
    seed: int

    def split(self, name: str) -> list:
        return {"train": self.train, "val": self.val, "test": self.test}[name]


def _sample_utterance(spec: ToyLangSpec, rng: Rng, utt_id: str,
                      min_chars=3, max_chars=12) -> Utterance:
    for _ in range(1000):
        length = int(rng.integers(min_chars, max_chars + 1))
        chars = np.asarray(rng.integers(0, spec.n_chars, size=length), dtype=np.int64)
        phonemes = g2p_apply(spec, chars)
        if phonemes.size and not np.any(phonemes[1:] == phonemes[:-1]):
            break
    else:
        raise DataError("could not draw a repeat-free utterance")
    features, mel, alignment = render_phonemes(spec, phonemes, rng)
    return Utterance(utt_id, chars, phonemes, features, mel, alignment)


def render_phonemes(spec: ToyLangSpec, phonemes, rng: Rng):
    """Durations, noisy frame features and mel frames for a phoneme string."""
    phonemes = np.asarray(phonemes, dtype=np.int64)
    durations = np.asarray(
        rng.integers(spec.dur_min, spec.dur_max + 1, size=phonemes.size),
        dtype=np.int64,
    )
    total = int(durations.sum())
    frame_labels = np.repeat(phonemes, durations)
    features = spec.feat_prototypes[frame_labels]
    mel = spec.mel_prototypes[frame_labels]
    if spec.sigma > 0:
        features = features + rng.normal(total, spec.d_feat, spec.sigma)
        mel = mel + rng.normal(total, spec.d_mel, spec.sigma)
    alignment = []
    start = 0
    for p, d in zip(phonemes, durations):
        alignment.append((int(p), start, start + int(d)))
        start += int(d)
    return np.ascontiguousarray(features), np.ascontiguousarray(mel), alignment


def gen_corpus(spec: ToyLangSpec, sizes, seed: int,
               min_chars=3, max_chars=12) -> Corpus:
    """Generate disjoint train/val/test splits, bit-identical per seed.

    The train split is resampled (bounded attempts) until every phoneme in
    the inventory occurs at least once.
    """
    spec.validate()
    n_train, n_val, n_test = sizes
    if min(n_train, n_val, n_test) < 1:
        raise DataError("every split needs at least one utterance")
    root = Rng(seed)

    def draw_split(name: str, count: int, attempt: int) -> list:
        stream = root.substream(("split", name, attempt))
        return [
            _sample_utterance(
                spec, stream.substream(("utt", i)), f"{name}-{i:04d}",
                min_chars, max_chars,
            )
            for i in range(count)
        ]

    train = None
    for attempt in range(100):
        candidate = draw_split("train", n_train, attempt)
        seen = set()
        for utt in candidate:
            seen.update(int(p) for p in utt.phonemes)
        if len(seen) == spec.n_phonemes:
            train = candidate
            break
    if train is None:
        raise DataError("train split never covered the phoneme inventory")
    return Corpus(
        spec=spec,
        train=train,
        val=draw_split("val", n_val, 0),
        test=draw_split("test", n_test, 0),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# nearest-prototype decoding (oracle for sigma = 0, evaluation for synthesis)


def nearest_prototype_labels(matrix: np.ndarray, prototypes: np.ndarray) -> np.ndarray:
    """Per-row index of the closest prototype (Euclidean)."""
    d2 = ((matrix[:, None, :] - prototypes[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def decode_mel_to_phonemes(mel: np.ndarray, spec: ToyLangSpec) -> np.ndarray:
    """Frame-wise nearest mel prototype, collapsed over runs."""
    labels = nearest_prototype_labels(mel, spec.mel_prototypes)
    keep = np.ones(labels.size, dtype=bool)
    keep[1:] = labels[1:] != labels[:-1]
    return labels[keep]


# ---------------------------------------------------------------------------
# on-disk corpus layout: manifest.json plus one PTNS1 per utterance stream


def save_corpus(corpus: Corpus, dirpath):
    dirpath = Path(dirpath)
    (dirpath / "utt").mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": "phonseg-corpus",
        "version": 1,
        "seed": corpus.seed,
        "spec": corpus.spec.to_dict(),
        "splits": {},
    }
    for name in ("train", "val", "test"):
        entries = []
        for utt in corpus.split(name):
            feat_file = f"utt/{utt.utt_id}.feat.ptns"
            mel_file = f"utt/{utt.utt_id}.mel.ptns"
            tensorio.write_tensor(dirpath / feat_file, utt.features)
            tensorio.write_tensor(dirpath / mel_file, utt.mel)
            entries.append(
                {
                    "id": utt.utt_id,
                    "chars": utt.chars.tolist(),
                    "phonemes": utt.phonemes.tolist(),
                    "alignment": [list(span) for span in utt.alignment],
                    "features": feat_file,
                    "mel": mel_file,
                }
            )
        manifest["splits"][name] = entries
    tensorio.write_json(dirpath / "manifest.json", manifest)


def load_corpus(dirpath) -> Corpus:
    dirpath = Path(dirpath)
    manifest = tensorio.read_json(dirpath / "manifest.json")
    if manifest.get("format") != "phonseg-corpus":
        raise DataError(f"{dirpath} is not a corpus directory")
    spec = ToyLangSpec.from_dict(manifest["spec"])
    splits = {}
    for name, entries in manifest["splits"].items():
        utts = []
        for entry in entries:
            utts.append(
                Utterance(
                    utt_id=entry["id"],
                    chars=np.asarray(entry["chars"], dtype=np.int64),
                    phonemes=np.asarray(entry["phonemes"], dtype=np.int64),
                    features=tensorio.read_tensor(dirpath / entry["features"]),
                    mel=tensorio.read_tensor(dirpath / entry["mel"]),
                    alignment=[tuple(span) for span in entry["alignment"]],
                )
            )
        splits[name] = utts
    return Corpus(
        spec=spec,
        train=splits["train"],
        val=splits["val"],
        test=splits["test"],
        seed=manifest["seed"],
    )
