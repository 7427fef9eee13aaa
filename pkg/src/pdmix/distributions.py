"""Random variate generation and density evaluation used by the samplers.

Everything takes an explicit ``numpy.random.Generator``, so all draws are
deterministic under a fixed seed and safe to run concurrently with distinct
streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import NumericalError, ParameterError

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class KernelParam:
    """A single mixture atom: location and precision of the kernel.

    For the log-normal kernel ``mu`` is the log-location.
    """

    mu: float
    tau: float

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise ParameterError(f"mu must be finite, got {self.mu}")
        if not (self.tau > 0 and np.isfinite(self.tau)):
            raise ParameterError(f"tau must be a positive real, got {self.tau}")


@dataclass(frozen=True)
class BaseMeasureHyper:
    """Hyperparameters of the normal-gamma base measure.

    The measure draws the precision tau ~ Gamma(eps1, eps2) and,
    independently, the location mu ~ Normal(mu0, 1/tau0); mu's precision is
    not scaled by tau.
    """

    mu0: float
    tau0: float
    eps1: float
    eps2: float

    def __post_init__(self):
        if not np.isfinite(self.mu0):
            raise ParameterError(f"mu0 must be finite, got {self.mu0}")
        for name in ("tau0", "eps1", "eps2"):
            v = getattr(self, name)
            if not (v > 0 and np.isfinite(v)):
                raise ParameterError(f"{name} must be positive, got {v}")


def spawn_rngs(master_seed: int, n: int) -> list[np.random.Generator]:
    """Split a master seed into ``n`` independent, reproducible streams."""
    seq = np.random.SeedSequence(master_seed)
    return [np.random.default_rng(child) for child in seq.spawn(n)]


def sample_beta(a: float, b: float, rng: np.random.Generator, size=None):
    """Draw from Beta(a, b)."""
    if not (a > 0 and b > 0):
        raise ParameterError(f"beta shapes must be positive, got a={a}, b={b}")
    return rng.beta(a, b, size=size)


def sample_gamma(shape: float, rate: float, rng: np.random.Generator, size=None):
    """Draw from Gamma(shape, rate), mean shape/rate."""
    if not (shape > 0 and rate > 0):
        raise ParameterError(
            f"gamma parameters must be positive, got shape={shape}, rate={rate}"
        )
    return rng.gamma(shape, 1.0 / rate, size=size)


def sample_dirichlet(alpha, rng: np.random.Generator) -> np.ndarray:
    """Draw a probability vector from Dirichlet(alpha).

    The result is renormalized so it sums to one within 1e-12 even after
    floating-point rounding.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 1 or alpha.size < 1:
        raise ParameterError("alpha must be a non-empty vector")
    if np.any(alpha <= 0) or not np.all(np.isfinite(alpha)):
        raise ParameterError(f"alpha components must be positive, got {alpha}")
    if alpha.size == 1:
        return np.ones(1)
    out = rng.dirichlet(alpha)
    return out / out.sum()


def nb2_pmf(r, lam: float):
    """Mass function r * lam^2 * (1-lam)^(r-1) on r >= 1; zero below 1."""
    if not (0.0 < lam < 1.0):
        raise ParameterError(f"lambda must lie in (0,1), got {lam}")
    r = np.asarray(r)
    out = np.where(r >= 1, r * lam**2 * (1.0 - lam) ** (r - 1), 0.0)
    return out if out.ndim else float(out)


def sample_truncated_geometric(
    lam: float, lower: int, rng: np.random.Generator, size=None
):
    """Draw N with P(N=r) proportional to (1-lam)^r on {lower, lower+1, ...}.

    Uses the closed-form inverse CDF ``N = lower + floor(log(1-u)/log(1-lam))``;
    exact and O(1), no rejection.
    """
    if not (0.0 < lam < 1.0):
        raise ParameterError(f"lambda must lie in (0,1), got {lam}")
    if lower < 1:
        raise ParameterError(f"lower must be >= 1, got {lower}")
    u = rng.random(size)
    step = np.floor(np.log1p(-u) / math.log1p(-lam))
    if size is None:
        return int(lower + step)
    return (lower + step).astype(np.int64)


def tg_logpdf(lam, a: float, b: float):
    """Unnormalized log-density of the gamma prior pushed through c -> 1/(1+c).

    Returns -(a+1)*log(lam) - b/lam + (a-1)*log(1-lam); -inf outside (0,1).
    """
    if not a > 1:
        raise ParameterError(f"transformed-gamma prior requires a > 1, got {a}")
    if not b > 0:
        raise ParameterError(f"b must be positive, got {b}")
    lam = np.asarray(lam, dtype=float)
    inside = (lam > 0.0) & (lam < 1.0)
    out = np.full(lam.shape, -np.inf)
    lv = lam[inside]
    out[inside] = -(a + 1.0) * np.log(lv) - b / lv + (a - 1.0) * np.log1p(-lv)
    return out if out.ndim else float(out)


def sample_truncated_power(
    exponent: float, lo: float, hi: float, rng: np.random.Generator
) -> float:
    """Draw from the density proportional to x^exponent on (lo, hi).

    Inverse-CDF in log space, so large |exponent| (posterior counts in the
    hundreds) does not overflow. ``exponent == -1`` is handled by the
    logarithmic antiderivative branch; exponents within 1e-10 of -1 are
    routed there for stability.
    """
    if not (0.0 <= lo < hi <= 1.0):
        raise ParameterError(f"need 0 <= lo < hi <= 1, got lo={lo}, hi={hi}")
    p = exponent + 1.0
    u = rng.random()
    if abs(p) < 1e-10:
        if lo <= 0.0:
            raise ParameterError("exponent -1 requires lo > 0")
        return lo * (hi / lo) ** u
    if lo <= 0.0 and p < 0.0:
        raise ParameterError("density not integrable at 0 for exponent <= -1")
    with np.errstate(divide="ignore"):
        log_lo = np.log(lo) if lo > 0.0 else -np.inf
        # x^p is uniform between lo^p and hi^p
        log_t = np.logaddexp(np.log1p(-u) + p * log_lo, np.log(u) + p * math.log(hi))
    return float(np.exp(log_t / p))


def normal_logpdf(x, mu, tau):
    """Log-density of Normal(mu, 1/tau); broadcasts over array arguments."""
    x = np.asarray(x, dtype=float)
    return 0.5 * (np.log(tau) - LOG_2PI) - 0.5 * tau * (x - mu) ** 2


def kernel_pdf(kind: str, x, theta: KernelParam):
    """Evaluate the mixture kernel density at x.

    ``normal`` is Normal(mu, 1/tau); ``lognormal`` is the log-normal density
    with log-location mu and log-scale 1/sqrt(tau), zero for x <= 0.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if kind == "normal":
        out = np.exp(normal_logpdf(xs, theta.mu, theta.tau))
    elif kind == "lognormal":
        out = np.zeros(xs.shape)
        pos = xs > 0
        out[pos] = np.exp(normal_logpdf(np.log(xs[pos]), theta.mu, theta.tau)) / xs[pos]
    else:
        raise ParameterError(f"unknown kernel kind {kind!r}")
    return out if np.ndim(x) else float(out[0])


def sample_base_measure_many(
    hyper: BaseMeasureHyper, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw n atoms from the base measure; returns (mu, tau) arrays.

    Consumption order is tau first, then mu, which fixes the determinism
    contract for a given stream. Precisions are clamped to the smallest
    normal double: near-flat gamma priors (eps ~ 1e-3) underflow to exact
    zero with non-negligible probability, which would break the tau > 0
    invariant downstream.
    """
    tau = np.maximum(rng.gamma(hyper.eps1, 1.0 / hyper.eps2, size=n), 1e-300)
    mu = rng.normal(hyper.mu0, 1.0 / math.sqrt(hyper.tau0), size=n)
    return mu, tau


def sample_base_measure(hyper: BaseMeasureHyper, rng: np.random.Generator) -> KernelParam:
    """Draw one atom (mu, tau) from the base measure."""
    mu, tau = sample_base_measure_many(hyper, 1, rng)
    return KernelParam(float(mu[0]), float(tau[0]))


def _log_gamma_density_logtau(s: np.ndarray, eps1: float, eps2: float) -> np.ndarray:
    # density of tau ~ Gamma(eps1, eps2) expressed in s = log(tau), Jacobian included
    return eps1 * math.log(eps2) - gammaln(eps1) + eps1 * s - eps2 * np.exp(s)


def _predictive_normal_grid(hyper: BaseMeasureHyper, xs: np.ndarray) -> np.ndarray:
    """Marginal kernel density under the base measure, normal kernel.

    Integrates Normal(x | mu0, 1/tau0 + 1/tau) against the gamma prior on tau
    by Simpson's rule on the log-tau axis, doubling the node count until two
    successive refinements agree.
    """
    # support of the integrand: gamma mass cut off above s ~ log(large/eps2);
    # below, the N factor decays like exp(s/2)
    s_hi = math.log(1e6 / hyper.eps2 + 1e6)
    s_lo = -120.0 / max(hyper.eps1, 0.5) - 40.0
    prev = None
    n_nodes = 2049
    while n_nodes <= 32769:
        s = np.linspace(s_lo, s_hi, n_nodes)
        log_w = _log_gamma_density_logtau(s, hyper.eps1, hyper.eps2)
        var = 1.0 / hyper.tau0 + np.exp(-s)
        # integrand[node, x]
        log_f = (
            log_w[:, None]
            - 0.5 * (np.log(var)[:, None] + LOG_2PI)
            - 0.5 * (xs[None, :] - hyper.mu0) ** 2 / var[:, None]
        )
        f = np.exp(log_f)
        h = (s_hi - s_lo) / (n_nodes - 1)
        weights = np.full(n_nodes, 2.0)
        weights[1::2] = 4.0
        weights[0] = weights[-1] = 1.0
        cur = (h / 3.0) * (weights[:, None] * f).sum(axis=0)
        if prev is not None:
            err = np.max(np.abs(cur - prev))
            scale = max(float(np.max(cur)), 1e-300)
            if err <= 1e-10 + 1e-8 * scale:
                return cur
        prev = cur
        n_nodes = 2 * (n_nodes - 1) + 1
    raise NumericalError(
        "prior predictive quadrature did not converge: "
        f"hyper={hyper}, nodes={n_nodes // 2}, last_delta={err:.3e}"
    )


@lru_cache(maxsize=32)
def _predictive_cached(hyper: BaseMeasureHyper, kind: str, xs_bytes: bytes, n: int):
    xs = np.frombuffer(xs_bytes, dtype=float, count=n)
    if kind == "normal":
        return _predictive_normal_grid(hyper, xs)
    if kind == "lognormal":
        out = np.zeros(xs.shape)
        pos = xs > 0
        out[pos] = _predictive_normal_grid(hyper, np.log(xs[pos])) / xs[pos]
        return out
    raise ParameterError(f"unknown kernel kind {kind!r}")


def prior_predictive_pdf(hyper: BaseMeasureHyper, kind: str, x):
    """Density of one observation under kernel and base measure jointly.

    There is no closed form because mu's precision is not scaled by tau, so
    the tau integral is done by adaptive quadrature. Results are cached per
    evaluation grid.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = _predictive_cached(hyper, kind, xs.tobytes(), xs.size).copy()
    return out if np.ndim(x) else float(out[0])
