"""Shared oracles and fixtures for the test suite."""

import math
import zlib

import numpy as np
from scipy.integrate import quad

from pdmix.distributions import BaseMeasureHyper
from pdmix.model import AtomTable
from pdmix.pdgsbp import PdgsbpState
from pdmix.rpddp import RpddpState

BENIGN_HYPER = BaseMeasureHyper(0.0, 1.0, 2.0, 2.0)


def rng_for(name: str) -> np.random.Generator:
    """Stable per-test stream (str hash randomization would break reruns)."""
    return np.random.default_rng(zlib.crc32(name.encode()))


def sup_cdf_distance(draws: np.ndarray, xs: np.ndarray, cdf: np.ndarray) -> float:
    """Kolmogorov distance of the empirical CDF against a tabulated CDF."""
    srt = np.sort(draws)
    at_draws = np.interp(srt, xs, cdf)
    n = srt.size
    emp_hi = np.arange(1, n + 1) / n
    emp_lo = np.arange(0, n) / n
    return float(max(np.max(np.abs(at_draws - emp_hi)), np.max(np.abs(at_draws - emp_lo))))


def kernel_moment(hyper: BaseMeasureHyper, x: float, power: int) -> float:
    """E[K(x|theta)^power] under the base measure, by quadrature over log tau.

    Independent of the library's predictive quadrature: the mu integral is
    done analytically and scipy handles the tau axis.
    """
    if power == 1:
        def integrand(s):
            tau = math.exp(s)
            var = 1.0 / hyper.tau0 + 1.0 / tau
            dens = math.exp(-0.5 * (x - hyper.mu0) ** 2 / var) / math.sqrt(2 * math.pi * var)
            logw = hyper.eps1 * math.log(hyper.eps2) - math.lgamma(hyper.eps1) \
                + hyper.eps1 * s - hyper.eps2 * tau
            return dens * math.exp(logw)
    elif power == 2:
        def integrand(s):
            tau = math.exp(s)
            var = 0.5 / tau + 1.0 / hyper.tau0
            dens = (
                math.sqrt(tau / (4 * math.pi))
                * math.exp(-0.5 * (x - hyper.mu0) ** 2 / var)
                / math.sqrt(2 * math.pi * var)
            )
            logw = hyper.eps1 * math.log(hyper.eps2) - math.lgamma(hyper.eps1) \
                + hyper.eps1 * s - hyper.eps2 * tau
            return dens * math.exp(logw)
    else:
        raise ValueError("only first and second moments supported")
    val, _ = quad(integrand, -60.0, 40.0, limit=400)
    return val


def make_gsb_state(
    p,
    lam,
    depth: int,
    rng: np.random.Generator,
    hyper: BaseMeasureHyper = BENIGN_HYPER,
    kernel: str = "normal",
    sizes=None,
) -> PdgsbpState:
    """A geometric-weights state with prior atoms and minimal allocations."""
    p = np.asarray(p, dtype=float)
    lam = np.asarray(lam, dtype=float)
    m = p.shape[0]
    atoms = AtomTable(m, hyper)
    for j in range(m):
        for l in range(j, m):
            atoms.ensure_depth(j, l, depth, rng)
    sizes = list(sizes or []) + [0] * (m - len(sizes or []))
    return PdgsbpState(
        m=m,
        kernel=kernel,
        hyper=hyper,
        atoms=atoms,
        N=[np.ones(n, dtype=np.int64) for n in sizes],
        d=[np.ones(n, dtype=np.int64) for n in sizes],
        delta=[np.full(n, j, dtype=np.int64) for j, n in enumerate(sizes)],
        p=p,
        lam=lam,
        dirichlet_alpha=np.ones((m, m)),
        lambda_prior=("tg", 1.1, 1.1),
    )


def make_dp_state(
    p,
    c,
    sticks: dict,
    rng: np.random.Generator,
    hyper: BaseMeasureHyper = BENIGN_HYPER,
    kernel: str = "normal",
    sizes=None,
) -> RpddpState:
    """A Dirichlet-process state with caller-chosen stick fractions."""
    p = np.asarray(p, dtype=float)
    c = np.asarray(c, dtype=float)
    m = p.shape[0]
    atoms = AtomTable(m, hyper)
    stick_arrays = {}
    for j in range(m):
        for l in range(j, m):
            v = np.asarray(sticks[(j, l)], dtype=float)
            stick_arrays[(j, l)] = v
            atoms.ensure_depth(j, l, v.size, rng)
    sizes = sizes or [0] * m
    state = RpddpState(
        m=m,
        kernel=kernel,
        hyper=hyper,
        atoms=atoms,
        sticks=stick_arrays,
        u=[np.full(n, 1e-3) for n in sizes],
        d=[np.ones(n, dtype=np.int64) for n in sizes],
        delta=[np.full(n, j, dtype=np.int64) for j, n in enumerate(sizes)],
        p=p,
        c=c,
        dirichlet_alpha=np.ones((m, m)),
        conc_prior=(1.1, 1.1),
    )
    return state
