"""Log-density kernels, samplers, and constraint transforms.

Families cover the priors and likelihoods used by the shipped models:
Normal, HalfNormal, HalfCauchy, Gamma, Uniform, and MultivariateNormal.
``log_pdf`` accepts plain numbers/arrays or taped ``Var`` values; the taped
path runs the identical forward kernels, so the primal agrees bit for bit
with the untaped one. A point outside the support yields -inf, never an
exception, so the inference engines see a total function.

When a scalar-parameter family is evaluated at a vector, the result is the
joint log density of i.i.d. components (the sum), which is what parameter
blocks need.

Transforms map constrained parameters to the unconstrained real line and
carry the log-Jacobian of the inverse map: identity for real support, log
for positive support, a scaled logit for intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import UsageError

_LOG_2PI = math.log(2.0 * math.pi)

REAL = "real"
POSITIVE = "positive"
INTERVAL = "interval"
REAL_VECTOR = "real_vector"


@dataclass(frozen=True)
class Support:
    kind: str
    low: float = -math.inf
    high: float = math.inf

    def contains(self, x) -> bool:
        x = np.asarray(ad.value_of(x))
        if self.kind in (REAL, REAL_VECTOR):
            return True
        if self.kind == POSITIVE:
            return bool(np.all(x > 0.0))
        if self.kind == INTERVAL:
            return bool(np.all((x > self.low) & (x < self.high)))
        raise UsageError(f"unknown support kind: {self.kind}")


def _size_of(x) -> int:
    sh = np.shape(ad.value_of(x))
    return 1 if sh == () else int(np.prod(sh))


def _sumsq(r):
    """Sum of squares of a scalar or vector, via the shared ops."""
    if np.shape(ad.value_of(r)) == ():
        return ad.mul(r, r)
    return ad.dot(r, r)


class Normal:
    """Normal(loc, scale); vector arguments are treated as i.i.d."""

    def __init__(self, loc=0.0, scale=1.0):
        if not ad.is_var(scale) and not np.all(np.asarray(scale) > 0):
            raise UsageError("Normal: scale must be positive")
        self.loc = loc
        self.scale = scale

    support = Support(REAL)

    def log_pdf(self, x):
        k = _size_of(x)
        r = ad.sub(x, self.loc)
        q = ad.div(_sumsq(r), ad.mul(2.0, ad.mul(self.scale, self.scale)))
        return ad.sub(ad.mul(-float(k), ad.add(ad.log(self.scale), 0.5 * _LOG_2PI)), q)

    def sample(self, rng: np.random.Generator, n: int):
        _check_count(n)
        return rng.normal(float(self.loc), float(self.scale), size=n)


class HalfNormal:
    """Normal(0, scale) folded onto the positive reals."""

    def __init__(self, scale=1.0):
        if float(scale) <= 0:
            raise UsageError("HalfNormal: scale must be positive")
        self.scale = float(scale)

    support = Support(POSITIVE)

    def log_pdf(self, x):
        if not self.support.contains(x):
            return -math.inf
        k = _size_of(x)
        q = ad.div(_sumsq(x), 2.0 * self.scale * self.scale)
        const = k * (math.log(2.0) - math.log(self.scale) - 0.5 * _LOG_2PI)
        return ad.sub(const, q)

    def sample(self, rng: np.random.Generator, n: int):
        _check_count(n)
        return np.abs(rng.normal(0.0, self.scale, size=n))


class HalfCauchy:
    """Cauchy(0, scale) folded onto the positive reals."""

    def __init__(self, scale=1.0):
        if float(scale) <= 0:
            raise UsageError("HalfCauchy: scale must be positive")
        self.scale = float(scale)

    support = Support(POSITIVE)

    def log_pdf(self, x):
        if not self.support.contains(x):
            return -math.inf
        k = _size_of(x)
        z = ad.div(x, self.scale)
        body = ad.log(ad.add(1.0, _sumsq_elementwise(z)))
        const = k * (math.log(2.0) - math.log(math.pi) - math.log(self.scale))
        if np.shape(ad.value_of(x)) == ():
            return ad.sub(const, body)
        return ad.sub(const, ad.vsum(body))

    def sample(self, rng: np.random.Generator, n: int):
        _check_count(n)
        return np.abs(self.scale * rng.standard_cauchy(size=n))


def _sumsq_elementwise(z):
    # elementwise square (no reduction), for densities that need log(1+z^2)
    return ad.mul(z, z)


class Gamma:
    """Gamma with shape/rate parameterization."""

    def __init__(self, shape, rate):
        if float(shape) <= 0 or float(rate) <= 0:
            raise UsageError("Gamma: shape and rate must be positive")
        self.shape = float(shape)
        self.rate = float(rate)

    support = Support(POSITIVE)

    def log_pdf(self, x):
        if not self.support.contains(x):
            return -math.inf
        k = _size_of(x)
        const = k * (self.shape * math.log(self.rate) - math.lgamma(self.shape))
        lx = ad.log(x)
        if np.shape(ad.value_of(x)) != ():
            lx = ad.vsum(lx)
            sx = ad.vsum(x)
        else:
            sx = x
        return ad.add(const, ad.sub(ad.mul(self.shape - 1.0, lx), ad.mul(self.rate, sx)))

    def sample(self, rng: np.random.Generator, n: int):
        _check_count(n)
        return rng.gamma(self.shape, 1.0 / self.rate, size=n)


class Uniform:
    def __init__(self, low, high):
        if not float(low) < float(high):
            raise UsageError("Uniform: requires low < high")
        self.low = float(low)
        self.high = float(high)

    @property
    def support(self) -> Support:
        return Support(INTERVAL, self.low, self.high)

    def log_pdf(self, x):
        if not self.support.contains(x):
            return -math.inf
        k = _size_of(x)
        const = -k * math.log(self.high - self.low)
        if ad.is_var(x):
            # density is flat on the support: constant w.r.t. x
            return ad.mul(0.0, _sumsq(x)) + const
        return const

    def sample(self, rng: np.random.Generator, n: int):
        _check_count(n)
        return rng.uniform(self.low, self.high, size=n)


class MultivariateNormal:
    """Dense-covariance Gaussian, evaluated via Cholesky.

    The covariance may be a taped matrix, which makes the log density
    differentiable in it — the route Gaussian-process marginal likelihoods
    take.
    """

    def __init__(self, mean, cov):
        self.mean = mean
        self.cov = cov

    support = Support(REAL_VECTOR)

    def log_pdf(self, x):
        n = _size_of(x)
        r = ad.sub(x, self.mean)
        l = ad.cholesky(self.cov)
        a = ad.solve_lower(l, r)
        return ad.sub(
            ad.mul(-0.5, ad.dot(a, a)),
            ad.add(ad.log_diag_sum(l), 0.5 * n * _LOG_2PI),
        )

    def sample(self, rng: np.random.Generator, n: int):
        _check_count(n)
        mean = np.asarray(ad.value_of(self.mean), dtype=float)
        cov = np.asarray(ad.value_of(self.cov), dtype=float)
        l = np.linalg.cholesky(cov)
        z = rng.standard_normal((n, mean.shape[0]))
        return mean + z @ l.T


def _check_count(n: int):
    if int(n) < 1:
        raise UsageError("sample: count must be >= 1")


# ---------------------------------------------------------------------------
# constraint transforms
# ---------------------------------------------------------------------------


class IdentityTransform:
    kind = "identity"

    def forward(self, theta):
        return np.asarray(theta, dtype=float) + 0.0

    def inverse(self, zeta):
        return zeta

    def log_jacobian(self, zeta):
        return 0.0


class LogTransform:
    """Positive reals <-> all reals via log/exp; log|J|(zeta) = sum(zeta)."""

    kind = "log"

    def forward(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta <= 0):
            raise UsageError("log transform: value must be positive")
        return np.log(theta)

    def inverse(self, zeta):
        return ad.exp(zeta)

    def log_jacobian(self, zeta):
        if np.shape(ad.value_of(zeta)) == ():
            return zeta
        return ad.vsum(zeta)


class LogitIntervalTransform:
    """(low, high) <-> all reals via a scaled logit."""

    kind = "logit-interval"

    def __init__(self, low: float, high: float):
        if not low < high:
            raise UsageError("interval transform: requires low < high")
        self.low = float(low)
        self.high = float(high)

    def forward(self, theta):
        theta = np.asarray(theta, dtype=float)
        u = (theta - self.low) / (self.high - self.low)
        if np.any((u <= 0) | (u >= 1)):
            raise UsageError("interval transform: value outside the open interval")
        return np.log(u) - np.log1p(-u)

    def inverse(self, zeta):
        s = ad.div(1.0, ad.add(1.0, ad.exp(ad.neg(zeta))))
        return ad.add(self.low, ad.mul(self.high - self.low, s))

    def log_jacobian(self, zeta):
        # d/dzeta inverse = (high-low) * sigmoid(zeta) * sigmoid(-zeta)
        sp = ad.log(ad.add(1.0, ad.exp(ad.neg(zeta))))
        sm = ad.log(ad.add(1.0, ad.exp(zeta)))
        width = math.log(self.high - self.low)
        per = ad.sub(width, ad.add(sp, sm))
        if np.shape(ad.value_of(zeta)) == ():
            return per
        return ad.vsum(per)


def transform_for(support: Support):
    """The unconstraining transform for a support descriptor."""
    if support.kind in (REAL, REAL_VECTOR):
        return IdentityTransform()
    if support.kind == POSITIVE:
        return LogTransform()
    if support.kind == INTERVAL:
        return LogitIntervalTransform(support.low, support.high)
    raise UsageError(f"no transform for support kind: {support.kind!r}")


_TRANSFORMS_BY_KIND = {
    "identity": lambda low, high: IdentityTransform(),
    "log": lambda low, high: LogTransform(),
    "logit-interval": LogitIntervalTransform,
}


def transform_from_kind(kind: str, low: float = 0.0, high: float = 1.0):
    """Rebuild a transform from its persisted kind tag."""
    try:
        return _TRANSFORMS_BY_KIND[kind](low, high)
    except KeyError:
        raise UsageError(f"unknown transform kind: {kind!r}") from None
