"""Rayleigh MIMO with power on/off beamforming and finite-rate feedback.

The receiver sees ``Y = H P X + W`` with ``s`` equal-power streams
(``P_on = rho / s``). With perfect channel knowledge the transmitter uses the
top-``s`` right singular vectors ``V_s``. With ``R_fb`` feedback bits it uses
the codeword of a ``2**R_fb``-point codebook on G(L_T, s) that is
chordal-closest to span(V_s).

All rates are in nats per channel use.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from ._random import RandomLike, as_generator, map_chunks, mean_and_stderr
from .bounds import drf_lower, drf_upper
from .codebook import (
    Codebook,
    design_maxmin,
    load_codebook,
    quantize,
    quantize_bases,
    random_codebook,
    save_codebook,
)
from .core import ArgumentError, FieldTag, ShapeError, Subspace
from .volume import ball_volume_model

log = logging.getLogger(__name__)

CACHE_ENV = "GRASSQ_CACHE"


@dataclass(frozen=True)
class MimoConfig:
    L_T: int
    L_R: int
    rho: float
    R_fb: int = 0
    s: int | None = None

    def __post_init__(self):
        if self.L_T < 1 or self.L_R < 1:
            raise ArgumentError(f"antenna counts must be >= 1, got L_T={self.L_T}, L_R={self.L_R}")
        if self.s is None:
            object.__setattr__(self, "s", min(self.L_T, self.L_R))
        if not 1 <= self.s <= self.L_T:
            raise ArgumentError(f"need 1 <= s <= L_T, got s={self.s}, L_T={self.L_T}")
        if not self.rho >= 0:
            raise ArgumentError(f"SNR must be nonnegative, got {self.rho}")
        if self.R_fb < 0:
            raise ArgumentError(f"feedback rate must be nonnegative, got {self.R_fb}")

    @property
    def P_on(self) -> float:
        return self.rho / self.s

    @property
    def m(self) -> int:
        return min(self.L_T, self.L_R)

    @property
    def K(self) -> int:
        return 2 ** int(self.R_fb)


@dataclass(frozen=True)
class ChannelSample:
    H: np.ndarray
    singular_values: np.ndarray
    V_s: np.ndarray
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class RateEstimate:
    value: float
    std_error: float
    samples: int


@dataclass(frozen=True)
class MimoReport:
    """One feedback rate of a sweep.

    ``rate_pred_lo`` / ``rate_pred_hi`` are the predictions obtained from
    the lower / upper distortion bound. Because a smaller distortion means a
    larger rate, ``rate_pred_lo >= rate_pred_hi``.
    """

    R_fb: int
    K: int
    rate_sim: float
    se_sim: float
    rate_pred_lo: float
    rate_pred_hi: float
    rate_pred_measured: float
    rate_opt: float
    se_opt: float
    eta_lower_bound: float
    eta_upper_bound: float
    eta_measured: float
    distortion_measured: float
    samples: int
    unit: str = "nats"

    def R_fb_over_m2(self, m: int) -> float:
        return self.R_fb / m**2


@dataclass
class MimoSweep:
    config: MimoConfig
    rows: list[MimoReport] = dc_field(default_factory=list)
    skipped: list[int] = dc_field(default_factory=list)

    @property
    def partial(self) -> bool:
        return bool(self.skipped)


def _channels(cfg: MimoConfig, size: int, gen: np.random.Generator):
    """H stack, eigenvalues of H H^H padded to length s (descending), V_s stack."""
    shape = (size, cfg.L_R, cfg.L_T)
    H = (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) / math.sqrt(2.0)
    _, sv, Vh = np.linalg.svd(H)
    lam = sv**2
    if lam.shape[1] < cfg.s:
        lam = np.pad(lam, ((0, 0), (0, cfg.s - lam.shape[1])))
    V_s = np.swapaxes(Vh.conj(), 1, 2)[:, :, : cfg.s]
    return H, sv, lam[:, : cfg.s], V_s


def sample_channel(cfg: MimoConfig, rng: RandomLike) -> ChannelSample:
    """One i.i.d. CN(0, 1) channel with its SVD."""
    H, sv, _, V_s = _channels(cfg, 1, as_generator(rng))
    return ChannelSample(H[0], sv[0], V_s[0], sv[0] ** 2)


def log_det_rate(H: np.ndarray, P: np.ndarray, P_on: float) -> np.ndarray:
    """ln det(I_s + P_on P^H H^H H P); equal to ln det(I_LR + P_on H P P^H H^H).

    Broadcasts over leading stack dimensions.
    """
    HP = np.asarray(H) @ np.asarray(P)
    s = HP.shape[-1]
    gram = np.eye(s) + P_on * (np.swapaxes(HP.conj(), -1, -2) @ HP)
    sign, logdet = np.linalg.slogdet(gram)
    return logdet


def log_det_rate_receive_side(H: np.ndarray, P: np.ndarray, P_on: float) -> np.ndarray:
    HP = np.asarray(H) @ np.asarray(P)
    L_R = HP.shape[-2]
    gram = np.eye(L_R) + P_on * (HP @ np.swapaxes(HP.conj(), -1, -2))
    return np.linalg.slogdet(gram)[1]


def _check_codebook(cfg: MimoConfig, C: Codebook) -> None:
    if C.shape_key != (cfg.L_T, cfg.s, FieldTag.COMPLEX):
        raise ShapeError(
            f"beamforming codebook must live on G({cfg.L_T},{cfg.s}) over C, got "
            f"G({C.n},{C.p}) over {C.field.value}"
        )


def feedback_index(C: Codebook, sample: ChannelSample) -> int:
    """Index of the codeword whose span is chordal-closest to span(V_s)."""
    if C.field is not FieldTag.COMPLEX or C.shape_key[:2] != sample.V_s.shape:
        raise ShapeError(f"codebook G({C.n},{C.p}) does not match V_s of shape {sample.V_s.shape}")
    return quantize(C, Subspace(sample.V_s, FieldTag.COMPLEX))[0]


def _check_samples(samples: int) -> None:
    if samples < 10**3:
        raise ArgumentError(f"need at least 10^3 samples, got {samples}")


def _on_off_rate(lam: np.ndarray, gain: float) -> np.ndarray:
    return np.log1p(gain * lam).sum(axis=1)


def rate_perfect_csi(cfg: MimoConfig, samples: int = 10**4, rng: RandomLike = 0, workers: int = 1) -> RateEstimate:
    """E_H[sum_{i<=s} ln(1 + P_on lambda_i)]."""
    _check_samples(samples)

    def chunk(size, gen):
        return _on_off_rate(_channels(cfg, size, gen)[2], cfg.P_on)

    return RateEstimate(*mean_and_stderr(map_chunks(chunk, samples, rng, workers)))


def eta_sup(distortion: float, s: int) -> float:
    """Power efficiency factor 1 - D/s."""
    if not 0 <= distortion <= s:
        raise ArgumentError(f"distortion {distortion} outside [0, {s}]")
    return 1.0 - distortion / s


def rate_predicted(
    cfg: MimoConfig, drf_value: float, samples: int = 10**4, rng: RandomLike = 0, workers: int = 1
) -> RateEstimate:
    """E_H[sum_{i<=s} ln(1 + eta P_on lambda_i)] with eta = 1 - drf_value / s."""
    _check_samples(samples)
    eta = eta_sup(drf_value, cfg.s)

    def chunk(size, gen):
        return _on_off_rate(_channels(cfg, size, gen)[2], eta * cfg.P_on)

    return RateEstimate(*mean_and_stderr(map_chunks(chunk, samples, rng, workers)))


def simulate_feedback(
    cfg: MimoConfig, C: Codebook, samples: int = 10**4, rng: RandomLike = 0, workers: int = 1
) -> tuple[RateEstimate, RateEstimate]:
    """Rate with chordal feedback over C, and the mean squared chordal error of that feedback."""
    _check_codebook(cfg, C)
    _check_samples(samples)

    def chunk(size, gen):
        H, _, _, V_s = _channels(cfg, size, gen)
        idx, d2 = quantize_bases(C, V_s)
        return np.stack([log_det_rate(H, C.bases[idx], cfg.P_on), d2])

    parts = map_chunks(chunk, samples, rng, workers)
    rate = RateEstimate(*mean_and_stderr([p[0] for p in parts]))
    dist = RateEstimate(*mean_and_stderr([p[1] for p in parts]))
    return rate, dist


def rate_finite_feedback(
    cfg: MimoConfig, C: Codebook, samples: int = 10**4, rng: RandomLike = 0, workers: int = 1
) -> RateEstimate:
    """E_H[ln det(I + P_on H P P^H H^H)] with P chosen per channel by chordal feedback."""
    return simulate_feedback(cfg, C, samples, rng, workers)[0]


def cache_dir() -> Path | None:
    path = os.environ.get(CACHE_ENV)
    return Path(path) if path else None


def beamforming_codebook(
    L_T: int,
    s: int,
    K: int,
    seed: int,
    source: str = "maxmin",
    iterations: int = 5000,
    restarts: int = 16,
    cache: Path | None = None,
) -> Codebook:
    """Codebook on G(L_T, s)(C), read from / written to the cache directory when given.

    K = 1 always yields one Haar-random beamformer.
    """
    if source not in ("maxmin", "random"):
        raise ArgumentError(f"unknown codebook source {source!r}")
    if K == 1 or source == "random":
        return random_codebook(L_T, s, FieldTag.COMPLEX, K, rng=seed)
    path = None
    if cache is not None:
        path = Path(cache) / f"maxmin_LT{L_T}_s{s}_K{K}_seed{seed}_it{iterations}_r{restarts}.gqcb"
        if path.exists():
            log.debug("codebook cache hit %s", path)
            return load_codebook(path)
    C = design_maxmin(L_T, s, FieldTag.COMPLEX, K, iterations=iterations, restarts=restarts, rng=seed)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_codebook(C, path)
    return C


def mimo_sweep(
    L_T: int,
    L_R: int,
    rho: float,
    rfb_grid,
    s: int | None = None,
    samples: int = 10**4,
    seed: int = 0,
    source: str = "maxmin",
    iterations: int = 5000,
    restarts: int = 16,
    max_K: int = 2**14,
    cache: Path | None = None,
    workers: int = 1,
) -> MimoSweep:
    """Simulated vs. predicted finite-feedback rates over a grid of feedback bits.

    Every grid point reuses the same channel stream so the rows differ only
    through the codebook. Predictions use the distortion-bound constants on
    G(L_T, s)(C), clipped to [0, s], and a third prediction uses the distortion
    measured during the simulation. Rates whose codebook would exceed
    ``max_K`` codewords are skipped and reported in ``skipped``.
    """
    base = MimoConfig(L_T, L_R, rho, 0, s)
    s = base.s
    grid = sorted(int(r) for r in rfb_grid)
    if not grid:
        raise ArgumentError("empty feedback-rate grid")
    channel_seed = np.random.SeedSequence(seed).spawn(1)[0]
    sweep = MimoSweep(base)
    opt = rate_perfect_csi(base, samples, channel_seed, workers)
    model = ball_volume_model(L_T, s, FieldTag.COMPLEX) if s < L_T else None
    for rfb in grid:
        cfg = MimoConfig(L_T, L_R, rho, rfb, s)
        if cfg.K > max_K:
            sweep.skipped.append(rfb)
            continue
        C = beamforming_codebook(L_T, s, cfg.K, seed, source, iterations, restarts, cache)
        rate, dist = simulate_feedback(cfg, C, samples, channel_seed, workers)
        if model is None:
            # s = L_T: one codeword spans everything, feedback is irrelevant.
            d_lo = d_hi = 0.0
        else:
            d_lo = min(max(drf_lower(model, cfg.K), 0.0), s)
            d_hi = min(max(drf_upper(model, cfg.K), 0.0), s)
        d_meas = min(max(dist.value, 0.0), s)
        pred_lo = rate_predicted(cfg, d_lo, samples, channel_seed, workers)
        pred_hi = rate_predicted(cfg, d_hi, samples, channel_seed, workers)
        pred_meas = rate_predicted(cfg, d_meas, samples, channel_seed, workers)
        sweep.rows.append(
            MimoReport(
                R_fb=rfb,
                K=cfg.K,
                rate_sim=rate.value,
                se_sim=rate.std_error,
                rate_pred_lo=pred_lo.value,
                rate_pred_hi=pred_hi.value,
                rate_pred_measured=pred_meas.value,
                rate_opt=opt.value,
                se_opt=opt.std_error,
                eta_lower_bound=eta_sup(d_lo, s),
                eta_upper_bound=eta_sup(d_hi, s),
                eta_measured=eta_sup(d_meas, s),
                distortion_measured=dist.value,
                samples=rate.samples,
            )
        )
    return sweep
