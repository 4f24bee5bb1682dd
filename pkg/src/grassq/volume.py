"""Volumes of chordal-distance balls on G(n, p).

For small radius the invariant measure of a ball is a power law,
``mu(B(delta)) ~= c * delta**t`` with ``t = beta * p * (n - p)``. Over the
complex field the law is exact for ``delta <= 1`` and ``c`` is a ratio of
factorials. Over the reals ``c`` is an integral over an ordered simplex,
estimated here by Monte Carlo, and the law only holds to first order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._random import RandomLike, map_chunks, mean_and_stderr
from .core import (
    ArgumentError,
    FieldTag,
    check_dimensions,
    distances_to_reference,
    haar_bases,
    max_chordal_distance,
)

# Above this p*(n-p) the exact factorial ratio gets slow; switch to log-gamma.
EXACT_FACTORIAL_LIMIT = 2000


class ExtrapolationWarning(UserWarning):
    """The radius lies outside the range where the power law is guaranteed."""


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    std_error: float
    samples: int

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0 and not math.isnan(self.value):
            raise ValueError(f"volume estimate {self.value} outside [0, 1]")
        if self.std_error < 0:
            raise ValueError("negative standard error")


@dataclass(frozen=True)
class BallVolumeModel:
    """Power-law ball volume ``c * delta**t`` on G(n, p) over ``field``.

    ``c_std_error`` is zero for the complex field (closed form) and the Monte
    Carlo error of ``c`` for the real field. ``log_c`` stays finite when ``c``
    itself underflows (large manifolds); everything downstream uses it.
    """

    n: int
    p: int
    field: FieldTag
    c: float
    t: int
    c_std_error: float = 0.0
    log_c: float | None = None

    def __post_init__(self):
        check_dimensions(self.n, self.p)
        object.__setattr__(self, "field", FieldTag.parse(self.field))
        if self.t != self.field.beta * self.p * (self.n - self.p):
            raise ValueError(f"exponent t={self.t} inconsistent with (n, p, field)")
        if self.log_c is None:
            if not self.c > 0:
                raise ValueError(f"constant must be positive, got {self.c}")
            object.__setattr__(self, "log_c", math.log(self.c))
        elif not math.isfinite(self.log_c):
            raise ValueError(f"log constant must be finite, got {self.log_c}")

    @property
    def q(self) -> int:
        return min(self.p, self.n - self.p)

    @property
    def diameter(self) -> float:
        return max_chordal_distance(self.n, self.p)

    def __call__(self, delta: float) -> float:
        return ball_volume(self, delta)


def log_complex_constant(n: int, p: int) -> float:
    """ln c_{n,p,2} via log-gamma; usable for dimensions in the hundreds."""
    check_dimensions(n, p)
    q = min(p, n - p)
    out = -math.lgamma(p * (n - p) + 1)
    for i in range(1, q + 1):
        out += math.lgamma(n - i + 1) - math.lgamma(q - i + 1)
    return out


def complex_constant(n: int, p: int) -> float:
    """Constant of the exact complex ball volume ``c * delta**(2p(n-p))``.

    Equal to ``prod_{i<=q} (n-i)!/(q-i)!`` over ``(p(n-p))!`` with
    ``q = min(p, n-p)``, which covers both ``p <= n/2`` and its dual.
    Evaluated as an exact rational and rounded once, falling back to
    log-gamma for very large manifolds.
    """
    check_dimensions(n, p)
    q = min(p, n - p)
    if p * (n - p) > EXACT_FACTORIAL_LIMIT:
        return math.exp(log_complex_constant(n, p))
    num = 1
    den = math.factorial(p * (n - p))
    for i in range(1, q + 1):
        num *= math.factorial(n - i)
        den *= math.factorial(q - i)
    value = float(Fraction(num, den))
    return value if value > 0 else math.exp(log_complex_constant(n, p))


def _log_sphere_area(k: int) -> float:
    # ln A(k), A(k) = 2 pi^{k/2} / Gamma(k/2): area of the unit sphere in R^k
    return math.log(2.0) + 0.5 * k * math.log(math.pi) - math.lgamma(0.5 * k)


def log_real_prefactor(n: int, q: int) -> float:
    """ln V_{n,q,1}, the product of sphere-area ratios multiplying the simplex integral."""
    out = 0.0
    for i in range(1, q + 1):
        out += (
            2 * _log_sphere_area(q - i + 1)
            + _log_sphere_area(n - q - i + 1)
            - math.log(2.0)
            - _log_sphere_area(n - i + 1)
        )
    return out


def _abs_vandermonde(x: np.ndarray) -> np.ndarray:
    q = x.shape[1]
    out = np.ones(x.shape[0])
    for i in range(q):
        for j in range(i + 1, q):
            out *= np.abs(x[:, i] - x[:, j])
    return out


def real_constant(
    n: int, p: int, samples: int = 10**6, rng: RandomLike = 0, workers: int = 1
) -> VolumeEstimate:
    """Monte Carlo estimate of c_{n,p,1}, the real-field ball volume constant.

    With ``q = min(p, n-p)`` and ``a = (n - 2q + 1)/2`` the constant is
    ``V_{n,q,1} / 2**q`` times the integral of ``|Vandermonde(x)| prod x_i**(a-1)``
    over the ordered simplex ``x_1 >= ... >= x_q >= 0, sum x <= 1``.

    The integrand is symmetric, so the ordered integral is the unordered one
    over ``q!``. The power-law weight is absorbed exactly by drawing ``x`` from
    Dirichlet(a, ..., a, 1) (the last coordinate is the slack), leaving only
    the bounded ``|Vandermonde|`` factor to average. This keeps the variance
    finite even when ``a < 1`` and the weight is singular at the faces.

    ``std_error`` is zero when ``q <= 1`` because the remaining factor is
    constant. The degenerate case ``p == n`` (a single point) returns 1.
    """
    check_dimensions(n, p)
    if samples < 10**4:
        raise ArgumentError(f"need at least 10^4 samples, got {samples}")
    q = min(p, n - p)
    if q == 0:
        return VolumeEstimate(1.0, 0.0, int(samples))
    a = 0.5 * (n - 2 * q + 1)
    log_pref = (
        log_real_prefactor(n, q)
        - q * math.log(2.0)
        - math.lgamma(q + 1)
        + q * math.lgamma(a)
        - math.lgamma(q * a + 1)
    )
    pref = math.exp(log_pref)

    def chunk(size: int, gen: np.random.Generator) -> np.ndarray:
        g = gen.standard_gamma(a, size=(size, q))
        slack = gen.standard_exponential(size)
        x = g / (g.sum(axis=1) + slack)[:, None]
        return _abs_vandermonde(x)

    mean, se, count = mean_and_stderr(map_chunks(chunk, samples, rng, workers))
    if q == 1:
        se = 0.0
    return _estimate(pref * mean, pref * se, count, clip=False)


def _estimate(value: float, se: float, count: int, clip: bool = True) -> VolumeEstimate:
    if clip:
        value = min(max(value, 0.0), 1.0)
    return VolumeEstimate(float(value), float(se), int(count))


def ball_volume_model(
    n: int,
    p: int,
    field: FieldTag | str,
    samples: int = 10**6,
    rng: RandomLike = 0,
    workers: int = 1,
) -> BallVolumeModel:
    """Build the power-law model, estimating c by Monte Carlo for the real field."""
    check_dimensions(n, p)
    f = FieldTag.parse(field)
    t = f.beta * p * (n - p)
    if f is FieldTag.COMPLEX:
        c = complex_constant(n, p)
        log_c = math.log(c) if c > 0 else log_complex_constant(n, p)
        return BallVolumeModel(n, p, f, c, t, log_c=log_c)
    est = real_constant(n, p, samples, rng, workers)
    return BallVolumeModel(n, p, f, est.value, t, est.std_error)


def is_extrapolated(model: BallVolumeModel, delta: float) -> bool:
    """True when the power law is used outside 0 <= delta <= 1 or clamped at 1."""
    if model.t == 0:
        return False
    return bool(delta > 1.0 or _log_power_law(model, delta) > 0.0)


def _log_power_law(model: BallVolumeModel, delta: float) -> float:
    return -math.inf if delta == 0 else model.log_c + model.t * math.log(delta)


def ball_volume(model: BallVolumeModel, delta: float) -> float:
    """``min(1, c * delta**t)``.

    Exact for the complex field when ``delta <= 1``; first-order accurate for
    the real field. Radii beyond the diameter ``sqrt(min(p, n-p))`` give the
    total volume 1 and raise an :class:`ExtrapolationWarning`.
    """
    if not delta >= 0:
        raise ArgumentError(f"radius must be nonnegative, got {delta}")
    if model.t == 0:
        return 1.0
    if delta > model.diameter:
        warnings.warn(
            f"radius {delta} exceeds the diameter {model.diameter:.6g}; clamped to 1",
            ExtrapolationWarning,
            stacklevel=2,
        )
        return 1.0
    return float(math.exp(min(0.0, _log_power_law(model, delta))))


def _hits_below(d2: np.ndarray, deltas: np.ndarray, diameter: float) -> np.ndarray:
    r2 = deltas**2
    hits = (d2[:, None] <= r2[None, :]).sum(axis=0)
    hits[deltas >= diameter] = d2.size
    return hits


def empirical_volumes(
    n: int,
    p: int,
    field: FieldTag | str,
    deltas,
    samples: int = 10**5,
    rng: RandomLike = 0,
    workers: int = 1,
) -> list[VolumeEstimate]:
    """Fraction of Haar-uniform planes within chordal distance delta of span(e_1..e_p).

    All radii share the same draws. By invariance of the measure the choice of
    the fixed plane does not matter. Standard errors are binomial.
    """
    check_dimensions(n, p)
    f = FieldTag.parse(field)
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if np.any(~(deltas >= 0)):
        raise ArgumentError("radii must be nonnegative")
    if samples < 10**3:
        raise ArgumentError(f"need at least 10^3 samples, got {samples}")
    diameter = max_chordal_distance(n, p)

    def chunk(size: int, gen: np.random.Generator) -> np.ndarray:
        d2 = distances_to_reference(haar_bases(n, p, f, size, gen))
        return _hits_below(d2, deltas, diameter)

    hits = np.sum(map_chunks(chunk, samples, rng, workers), axis=0)
    frac = hits / samples
    se = np.sqrt(frac * (1 - frac) / samples)
    return [VolumeEstimate(float(v), float(s), int(samples)) for v, s in zip(frac, se)]


def empirical_volume(
    n: int,
    p: int,
    field: FieldTag | str,
    delta: float,
    samples: int = 10**5,
    rng: RandomLike = 0,
    workers: int = 1,
) -> VolumeEstimate:
    return empirical_volumes(n, p, field, [delta], samples, rng, workers)[0]


def barg_volume(n: int, p: int, field: FieldTag | str, delta: float) -> float:
    """Large-n approximation ``(delta / sqrt(p)) ** (beta * n * p)``, capped at 1."""
    check_dimensions(n, p)
    f = FieldTag.parse(field)
    if not delta > 0:
        raise ArgumentError(f"radius must be positive, got {delta}")
    return float(min(1.0, (delta / math.sqrt(p)) ** (f.beta * n * p)))


def barg_exponent_gap(n: int, p: int) -> float:
    """Per-dimension gap between ln c_{n,p,2} and the large-n exponent.

    Returns ``|ln c_{n,p,2} - 2p(n-p) ln(1/sqrt(p))| / n``, which stays bounded
    (and in fact decays) as n grows with p fixed.
    """
    return abs(log_complex_constant(n, p) + p * (n - p) * math.log(p)) / n
