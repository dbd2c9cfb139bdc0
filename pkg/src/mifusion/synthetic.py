"""Synthetic ground truth: jointly Gaussian pairs with closed-form mutual
information, Monte-Carlo entropy, and a latent-linear multimodal regression
dataset. These oracles are what make the MI machinery testable end to end.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .ba_bound import VariationalPredictor, log_likelihood_rows
from .cpc import ReversePredictor, cosine_matrix, nce_loss_from_cosines
from .encoders import RawSample
from .numeric import blas_single_thread
from .trainer import AdamState, adam_step

LOG_2PI_E = float(np.log(2.0 * np.pi * np.e))


@dataclass
class GaussianPairSpec:
    """Per-dimension bivariate-normal pairs with correlation rho; dimensions
    are independent, so the true MI is exactly -(k/2) ln(1 - rho^2)."""

    dim: int = 1
    rho: float = 0.9
    var_x: float = 1.0
    var_y: float = 1.0

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise ValueError("|rho| must be < 1")
        if self.var_x <= 0 or self.var_y <= 0:
            raise ValueError("marginal variances must be positive")


def gen_gaussian_pair(spec: GaussianPairSpec, rng, n: int):
    """(X, Y) arrays of shape (n, dim) with the specified joint law."""
    u = rng.standard_normal((int(n), spec.dim))
    w = rng.standard_normal((int(n), spec.dim))
    x = math.sqrt(spec.var_x) * u
    y = math.sqrt(spec.var_y) * (spec.rho * u + math.sqrt(1.0 - spec.rho**2) * w)
    return x, y


def true_gaussian_mi(spec: GaussianPairSpec) -> float:
    """Closed-form MI in nats, summed over the independent dimensions."""
    return -0.5 * spec.dim * math.log(1.0 - spec.rho**2) + 0.0  # +0.0 avoids -0.0


def marginal_entropy_y(spec: GaussianPairSpec) -> float:
    """Exact differential entropy of the Y marginal."""
    return 0.5 * spec.dim * (LOG_2PI_E + math.log(spec.var_y))


def mc_entropy(log_density, sampler, n: int, rng):
    """Monte-Carlo entropy -(1/n) sum log p(x_i) with its standard error.

    ``sampler(rng, n)`` draws rows from p; ``log_density(rows)`` evaluates
    log p per row.
    """
    if n < 1000:
        raise ValueError("use at least 1e3 samples for a meaningful estimate")
    rows = sampler(rng, n)
    vals = -np.asarray(log_density(rows), dtype=np.float64)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))


def diag_gaussian_log_density(mu, var):
    """log N(x; mu, diag var) evaluated per row."""
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    var = np.atleast_1d(np.asarray(var, dtype=np.float64))
    const = -0.5 * (np.log(2.0 * np.pi * var)).sum()

    def logp(rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        resid = rows - mu
        return const - 0.5 * (resid * resid / var).sum(axis=1)

    return logp


def two_component_log_density(mu1, var1, mu2, var2):
    """Equal-weight two-component diagonal-Gaussian mixture log-density."""
    l1 = diag_gaussian_log_density(mu1, var1)
    l2 = diag_gaussian_log_density(mu2, var2)

    def logp(rows):
        return np.logaddexp(l1(rows), l2(rows)) + math.log(0.5)

    return logp


def two_component_sampler(mu1, var1, mu2, var2):
    mu1, mu2 = np.atleast_1d(mu1).astype(float), np.atleast_1d(mu2).astype(float)
    sd1, sd2 = np.sqrt(np.atleast_1d(var1)), np.sqrt(np.atleast_1d(var2))

    def sample(rng, n):
        pick = rng.random(n) < 0.5
        z = rng.standard_normal((n, mu1.shape[0]))
        a = mu1 + z * sd1
        b = mu2 + z * sd2
        return np.where(pick[:, None], a, b)

    return sample


# --- bound-recovery harnesses (used by the mi-oracle command and tests) ---


def fit_ba_predictor(spec: GaussianPairSpec, rng, steps=2000, lr=5e-3, batch_size=128,
                     hidden=64) -> VariationalPredictor:
    """Likelihood-maximization loop on fresh pair samples, as in stage 1."""
    pred = VariationalPredictor("q_oracle", spec.dim, spec.dim, rng, hidden=hidden)
    params = pred.params()
    arrays = {name: t.data for name, t in params.items()}
    state = AdamState()
    with blas_single_thread():
        for _ in range(int(steps)):
            x, y = gen_gaussian_pair(spec, rng, batch_size)
            loss = -ad.tmean(log_likelihood_rows(pred, x, y))
            for t in params.values():
                t.grad = None
            loss.backward()
            adam_step(arrays, {name: t.grad for name, t in params.items()}, state, lr)
    return pred


def ba_estimate(pred: VariationalPredictor, spec: GaussianPairSpec, rng, n=100_000):
    """Monte-Carlo I_BA = E[log q] + exact H(Y); returns value and SE of E[log q]."""
    x, y = gen_gaussian_pair(spec, rng, int(n))
    ll = log_likelihood_rows(pred, x, y).data
    e_log_q = float(ll.mean())
    se = float(ll.std(ddof=1) / math.sqrt(len(ll)))
    h_y = marginal_entropy_y(spec)
    return {"i_ba": e_log_q + h_y, "e_log_q": e_log_q, "entropy": h_y, "se": se}


def fit_infonce_predictor(spec: GaussianPairSpec, rng, steps=800, lr=1e-3, batch_size=128,
                          hidden=64) -> ReversePredictor:
    """Contrastive reverse predictor from X to Y for the in-batch NCE bound."""
    pred = ReversePredictor("g_oracle", spec.dim, spec.dim, rng, hidden=hidden)
    params = pred.params()
    arrays = {name: t.data for name, t in params.items()}
    state = AdamState()
    with blas_single_thread():
        for _ in range(int(steps)):
            x, y = gen_gaussian_pair(spec, rng, batch_size)
            loss = nce_loss_from_cosines(cosine_matrix(pred, x, y))
            for t in params.values():
                t.grad = None
            loss.backward()
            adam_step(arrays, {name: t.grad for name, t in params.items()}, state, lr)
    return pred


def infonce_estimate(pred: ReversePredictor, spec: GaussianPairSpec, rng, batches=50,
                     batch_size=128):
    """Mean of log N - L_N over fresh batches; bounded above by log N."""
    vals = []
    for _ in range(int(batches)):
        x, y = gen_gaussian_pair(spec, rng, batch_size)
        loss = nce_loss_from_cosines(cosine_matrix(pred, x, y)).item()
        vals.append(math.log(batch_size) - loss)
    vals = np.asarray(vals)
    return {"infonce": float(vals.mean()), "se": float(vals.std(ddof=1) / math.sqrt(len(vals)))}


# --- synthetic multimodal regression dataset ---


@dataclass
class SynthMsaSpec:
    """Latent-linear multimodal data.

    One shared latent per clip; every modality sequence is a noisy linear
    readout of it, and the label is a clamped linear map of the same latent
    plus small noise, keeping polarity classes near 50/50. The default
    noise scales leave text informative on its own while the one-step
    visual/acoustic snapshots add signal that fusion has to pull in.
    """

    latent_dim: int = 4
    text_len: int = 3
    visual_len: int = 1
    acoustic_len: int = 1
    d_text_in: int = 12
    d_visual_in: int = 8
    d_acoustic_in: int = 6
    noise_text: float = 0.5
    noise_visual: float = 1.2
    noise_acoustic: float = 1.4
    label_noise: float = 0.1
    label_scale: float = 1.5
    label_coeffs: tuple | None = None  # explicit latent-to-label weights; drawn if None
    n_train: int = 2000
    n_val: int = 250
    n_test: int = 250

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        for name in ("text_len", "visual_len", "acoustic_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("noise_text", "noise_visual", "noise_acoustic", "label_noise"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.label_scale <= 0:
            raise ValueError("label_scale must be positive")
        if self.label_coeffs is not None:
            self.label_coeffs = tuple(float(c) for c in self.label_coeffs)
            if len(self.label_coeffs) != self.latent_dim:
                raise ValueError("label_coeffs length must equal latent_dim")


def gen_msa_dataset(spec: SynthMsaSpec, rng):
    """(train, val, test) lists of RawSample, fully determined by the rng."""
    k = spec.latent_dim
    d_in = {"text": spec.d_text_in, "visual": spec.d_visual_in, "acoustic": spec.d_acoustic_in}
    reads = {m: rng.normal(size=(d_in[m], k)) / math.sqrt(k) for m in ("text", "visual", "acoustic")}
    if spec.label_coeffs is not None:
        w = np.asarray(spec.label_coeffs, dtype=np.float64)
    else:
        w = rng.normal(size=k)
        w *= spec.label_scale / np.linalg.norm(w)
    noise = {"text": spec.noise_text, "visual": spec.noise_visual, "acoustic": spec.noise_acoustic}
    length = {"text": spec.text_len, "visual": spec.visual_len, "acoustic": spec.acoustic_len}

    def one_modality(m, u):
        return reads[m] @ u + noise[m] * rng.standard_normal((length[m], d_in[m]))

    def one_split(n, prefix):
        samples = []
        for i in range(n):
            u = rng.standard_normal(k)
            y = float(np.clip(w @ u, -3.0, 3.0))
            if spec.label_noise:
                y = float(np.clip(y + spec.label_noise * rng.standard_normal(), -3.0, 3.0))
            samples.append(RawSample(
                id=f"{prefix}{i:05d}", label=y,
                text=one_modality("text", u),
                visual=one_modality("visual", u),
                acoustic=one_modality("acoustic", u),
            ))
        return samples

    return (
        one_split(spec.n_train, "train-"),
        one_split(spec.n_val, "val-"),
        one_split(spec.n_test, "test-"),
    )
