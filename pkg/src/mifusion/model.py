"""The full trainable model: per-modality encoders, fusion network and
regression head, variational predictors for the inter-modality bound and
reverse predictors for the fusion-level contrastive bound.
"""

from dataclasses import dataclass

import numpy as np

from .ba_bound import VariationalPredictor, validate_pair
from .cpc import ReversePredictor
from .encoders import LstmEncoder, TextEncoder
from .errors import ConfigError
from .fusion import FusionNetwork, RegressionHead
from .nn import merge_params

BA_TARGETS = ("v", "a")  # history memory exists only for these modalities


@dataclass
class ModelConfig:
    d_text: int = 64
    d_visual: int = 32
    d_acoustic: int = 16
    text_mode: str = "vectors"  # "vectors" | "tokens"
    vocab_size: int | None = None
    d_token_embed: int = 32
    d_text_in: int | None = None  # vector-mode input widths, usually from data
    d_visual_in: int | None = None
    d_acoustic_in: int | None = None
    fusion_hidden: int = 128
    fusion_dim: int = 128
    head_hidden: tuple = (64,)
    predictor_hidden: int = 64
    cpc_hidden: int = 64
    ba_pairs: tuple = ("tv", "ta")
    cpc_modalities: tuple = ("t", "v", "a")

    def __post_init__(self):
        self.head_hidden = tuple(self.head_hidden)
        self.ba_pairs = tuple(self.ba_pairs)
        self.cpc_modalities = tuple(self.cpc_modalities)
        for pair in self.ba_pairs:
            validate_pair(pair)
            if pair[1] not in BA_TARGETS:
                raise ConfigError(f"pair {pair!r}: only v/a can be bound targets")
        if len(set(self.ba_pairs)) != len(self.ba_pairs):
            raise ConfigError("duplicate entries in ba_pairs")
        for m in self.cpc_modalities:
            if m not in ("t", "v", "a"):
                raise ConfigError(f"unknown modality {m!r} in cpc_modalities")
        if len(set(self.cpc_modalities)) != len(self.cpc_modalities):
            raise ConfigError("duplicate entries in cpc_modalities")
        if self.text_mode not in ("vectors", "tokens"):
            raise ConfigError(f"text_mode must be 'vectors' or 'tokens', got {self.text_mode!r}")
        if self.text_mode == "tokens" and not self.vocab_size:
            raise ConfigError("token mode needs vocab_size")
        if self.text_mode == "vectors" and not self.d_text_in:
            raise ConfigError("vector mode needs d_text_in")
        if not self.d_visual_in or not self.d_acoustic_in:
            raise ConfigError("visual/acoustic input widths are required")

    def embed_dim(self, m: str) -> int:
        return {"t": self.d_text, "v": self.d_visual, "a": self.d_acoustic}[m]


class MultimodalModel:
    """Owns every parameter group; construction order is fixed so a seed
    fully determines the initialization."""

    def __init__(self, cfg: ModelConfig, rng):
        self.cfg = cfg
        if cfg.text_mode == "tokens":
            self.text_encoder = TextEncoder(
                "enc_t", cfg.d_text, rng, vocab_size=cfg.vocab_size, d_embed=cfg.d_token_embed
            )
        else:
            self.text_encoder = TextEncoder("enc_t", cfg.d_text, rng, d_in=cfg.d_text_in)
        self.visual_encoder = LstmEncoder("enc_v", cfg.d_visual_in, cfg.d_visual, rng)
        self.acoustic_encoder = LstmEncoder("enc_a", cfg.d_acoustic_in, cfg.d_acoustic, rng)
        self.fusion = FusionNetwork(
            "fusion", cfg.d_text, cfg.d_visual, cfg.d_acoustic, rng,
            d_hidden=cfg.fusion_hidden, d_z=cfg.fusion_dim,
        )
        self.head = RegressionHead("head", cfg.fusion_dim, rng, hidden=cfg.head_hidden)
        self.q_preds = {}
        for pair in cfg.ba_pairs:
            self.q_preds[pair] = VariationalPredictor(
                f"q_{pair}", cfg.embed_dim(pair[0]), cfg.embed_dim(pair[1]), rng,
                hidden=cfg.predictor_hidden,
            )
        self.cpc_preds = {}
        for m in cfg.cpc_modalities:
            self.cpc_preds[m] = ReversePredictor(
                f"cpc_{m}", cfg.fusion_dim, cfg.embed_dim(m), rng, hidden=cfg.cpc_hidden
            )

    # parameter access -----------------------------------------------------

    def params(self) -> dict:
        return merge_params(
            self.text_encoder, self.visual_encoder, self.acoustic_encoder,
            self.fusion, self.head,
            *self.q_preds.values(), *self.cpc_preds.values(),
        )

    def q_params(self) -> dict:
        if not self.q_preds:
            return {}
        return merge_params(*self.q_preds.values())

    def main_params(self) -> dict:
        q_names = set(self.q_params())
        return {name: t for name, t in self.params().items() if name not in q_names}

    def zero_grads(self):
        for t in self.params().values():
            t.grad = None

    def param_arrays(self) -> dict:
        """Deep copies of every parameter array, for snapshots/checkpoints."""
        return {name: t.data.copy() for name, t in self.params().items()}

    def load_param_arrays(self, arrays: dict):
        params = self.params()
        if set(arrays) != set(params):
            missing = set(params) ^ set(arrays)
            raise ConfigError(f"parameter names do not match the model: {sorted(missing)}")
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != params[name].data.shape:
                raise ConfigError(
                    f"shape mismatch for {name}: {arr.shape} vs {params[name].data.shape}"
                )
            params[name].data[...] = arr

    # forward passes -------------------------------------------------------

    def encode(self, samples, detach=False) -> dict:
        """Per-modality (N, d) embedding Tensors for a list of RawSamples."""
        emb = {
            "t": self.text_encoder.encode([s.text for s in samples]),
            "v": self.visual_encoder.encode([s.visual for s in samples]),
            "a": self.acoustic_encoder.encode([s.acoustic for s in samples]),
        }
        if detach:
            emb = {m: t.detach() for m, t in emb.items()}
        return emb

    def forward(self, samples):
        """(embeddings, fusion vectors, predictions) with gradients attached."""
        emb = self.encode(samples)
        z = self.fusion.fuse(emb["t"], emb["v"], emb["a"])
        preds = self.head.predict(z)
        return emb, z, preds

    def predict(self, samples) -> np.ndarray:
        """Plain prediction array for evaluation."""
        _, _, preds = self.forward(samples)
        return preds.data.copy()
