"""Sphere-packing and distortion-rate bounds derived from the ball-volume law.

All four bounds are asymptotic statements (they hold up to a ``1 + o(1)``
factor for small radius / large code size); the functions return the plain
formula values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ArgumentError
from .volume import BallVolumeModel


class RangeError(ArgumentError):
    """Radius outside the range where the volume law backs the bound."""


@dataclass(frozen=True)
class PackingBounds:
    gv_min_size: float
    hamming_max_size: float
    delta: float


@dataclass(frozen=True)
class DrfBounds:
    lower: float
    upper: float
    K: int
    t: int


def _check_model(model: BallVolumeModel) -> None:
    if model.t == 0:
        raise ArgumentError("G(n, n) is a single point; packing and distortion bounds are trivial")


def gv_bound(model: BallVolumeModel, delta: float, extrapolate: bool = False) -> float:
    """Gilbert-Varshamov size ``1 / (c * delta**t)``: a code with minimum distance delta exists.

    ``delta`` must lie in (0, 1]; ``extrapolate=True`` admits radii up to the
    manifold diameter.
    """
    _check_model(model)
    top = model.diameter if extrapolate else 1.0
    if not 0 < delta <= top:
        raise RangeError(f"radius {delta} outside (0, {top:g}]")
    return math.exp(-model.log_c - model.t * math.log(delta))


def hamming_bound(model: BallVolumeModel, delta: float, extrapolate: bool = False) -> float:
    """Hamming size ``1 / (c * (delta/2)**t)``: no code with minimum distance delta is larger."""
    _check_model(model)
    top = model.diameter if extrapolate else 1.0
    if not 0 < delta / 2 <= top:
        raise RangeError(f"half-radius {delta / 2} outside (0, {top:g}]")
    return math.exp(-model.log_c - model.t * math.log(delta / 2))


def packing_bounds(model: BallVolumeModel, delta: float) -> PackingBounds:
    return PackingBounds(gv_bound(model, delta), hamming_bound(model, delta), delta)


def max_min_distance(model: BallVolumeModel, K: int) -> float:
    """Largest minimum distance a K-point code can have, from inverting the Hamming bound."""
    _check_model(model)
    return 2.0 * math.exp(-(model.log_c + math.log(K)) / model.t)


def _scale(model: BallVolumeModel, K: int) -> float:
    _check_model(model)
    if int(K) != K or K < 1:
        raise ArgumentError(f"code size must be an integer >= 1, got {K}")
    return math.exp(-2.0 * (model.log_c + math.log(K)) / model.t)


def drf_lower(model: BallVolumeModel, K: int) -> float:
    """``t/(t+2) * (c K)**(-2/t)``: no K-point code has smaller mean distortion."""
    scale = _scale(model, K)
    t = model.t
    return t / (t + 2) * scale


def drf_upper(model: BallVolumeModel, K: int) -> float:
    """``2 Gamma(2/t)/t * (c K)**(-2/t)``: the large-K random-code average distortion."""
    scale = _scale(model, K)
    t = model.t
    return 2.0 * math.gamma(2.0 / t) / t * scale


def random_code_constant(model: BallVolumeModel) -> float:
    """Limit of ``K**(2/t) * E[min_i d^2]`` for i.i.d. Haar codewords."""
    t = model.t
    _check_model(model)
    return 2.0 * math.gamma(2.0 / t) / t * math.exp(-2.0 * model.log_c / t)


def drf_bounds(model: BallVolumeModel, K: int) -> DrfBounds:
    return DrfBounds(drf_lower(model, K), drf_upper(model, K), int(K), model.t)
