"""Shared mixture-measure machinery and closed-form moment formulas.

Conventions used throughout the package: group indices ``j``, ``l`` are
0-based; cluster labels ``d`` and slice counts ``N`` are 1-based, matching
the usual mixture notation (atom k=1 is the first array element).
"""

from __future__ import annotations

import numpy as np

from .distributions import (
    LOG_2PI,
    BaseMeasureHyper,
    KernelParam,
    nb2_pmf,
    prior_predictive_pdf,
    sample_base_measure_many,
)
from .errors import InvariantViolation, NumericalError, ParameterError


def canonical_pair(j: int, l: int) -> tuple[int, int]:
    """Storage key of the measure shared by groups j and l (order-free)."""
    return (j, l) if j <= l else (l, j)


class AtomTable:
    """Growable table of mixture atoms, one sequence per group pair.

    The pair (j, l) and its mirror (l, j) resolve to the same storage, which
    enforces the shared-measure symmetry structurally. Atoms appended by
    ``ensure_depth`` are fresh draws from the base measure.
    """

    def __init__(self, m: int, hyper: BaseMeasureHyper):
        self.m = m
        self.hyper = hyper
        self._mu: dict[tuple[int, int], np.ndarray] = {}
        self._tau: dict[tuple[int, int], np.ndarray] = {}
        for j in range(m):
            for l in range(j, m):
                self._mu[(j, l)] = np.empty(0)
                self._tau[(j, l)] = np.empty(0)

    def _check(self, j: int, l: int) -> tuple[int, int]:
        if not (0 <= j < self.m and 0 <= l < self.m):
            raise ParameterError(f"pair ({j},{l}) outside 0..{self.m - 1}")
        return canonical_pair(j, l)

    def depth(self, j: int, l: int) -> int:
        return self._mu[self._check(j, l)].size

    def mu(self, j: int, l: int) -> np.ndarray:
        return self._mu[self._check(j, l)]

    def tau(self, j: int, l: int) -> np.ndarray:
        return self._tau[self._check(j, l)]

    def ensure_depth(self, j: int, l: int, depth: int, rng: np.random.Generator):
        """Extend pair (j,l) with prior draws until it holds >= depth atoms."""
        key = self._check(j, l)
        have = self._mu[key].size
        if depth > have:
            mu_new, tau_new = sample_base_measure_many(self.hyper, depth - have, rng)
            self._mu[key] = np.concatenate([self._mu[key], mu_new])
            self._tau[key] = np.concatenate([self._tau[key], tau_new])

    def trim(self, j: int, l: int, depth: int):
        key = self._check(j, l)
        if self._mu[key].size > depth:
            self._mu[key] = self._mu[key][:depth].copy()
            self._tau[key] = self._tau[key][:depth].copy()

    def get(self, j: int, l: int, k: int) -> KernelParam:
        """Atom k (1-based) of pair (j,l)."""
        key = self._check(j, l)
        if not (1 <= k <= self._mu[key].size):
            raise ParameterError(f"atom index {k} outside 1..{self._mu[key].size}")
        return KernelParam(float(self._mu[key][k - 1]), float(self._tau[key][k - 1]))

    def set(self, j: int, l: int, k: int, theta: KernelParam):
        key = self._check(j, l)
        if not (1 <= k <= self._mu[key].size):
            raise ParameterError(f"atom index {k} outside 1..{self._mu[key].size}")
        self._mu[key][k - 1] = theta.mu
        self._tau[key][k - 1] = theta.tau


def validate_selection_matrix(p: np.ndarray, m: int, tol: float = 1e-12):
    """Check p is m-by-m, entries in [0,1], rows summing to one."""
    p = np.asarray(p, dtype=float)
    if p.shape != (m, m):
        raise ParameterError(f"selection matrix must be {m}x{m}, got {p.shape}")
    if np.any(p < 0) or np.any(p > 1):
        raise ParameterError("selection probabilities must lie in [0,1]")
    if np.max(np.abs(p.sum(axis=1) - 1.0)) > tol:
        raise ParameterError("selection matrix rows must sum to 1")
    return p


def validate_geometric_matrix(lam: np.ndarray, m: int):
    """Check lam is m-by-m, symmetric, entries strictly inside (0,1)."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (m, m):
        raise ParameterError(f"geometric matrix must be {m}x{m}, got {lam.shape}")
    if np.any(lam <= 0) or np.any(lam >= 1):
        raise ParameterError("geometric probabilities must lie strictly in (0,1)")
    if not np.allclose(lam, lam.T, rtol=0, atol=0):
        raise ParameterError("geometric matrix must be symmetric")
    return lam


def geometric_weight(lam: float, k: int) -> float:
    """Weight of atom k (1-based) in a geometric-weights measure."""
    if not (0.0 < lam < 1.0):
        raise ParameterError(f"lambda must lie in (0,1), got {lam}")
    if k < 1:
        raise ParameterError(f"atom index must be >= 1, got {k}")
    return lam * (1.0 - lam) ** (k - 1)


def geometric_weights(lam: float, depth: int) -> np.ndarray:
    """First ``depth`` geometric weights lam*(1-lam)^(k-1)."""
    return lam * (1.0 - lam) ** np.arange(depth)


def kernel_logpdf_matrix(ys: np.ndarray, mu: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Normal log-kernel values, shape (len(mu), len(ys))."""
    return (
        0.5 * (np.log(tau)[:, None] - LOG_2PI)
        - 0.5 * tau[:, None] * (ys[None, :] - mu[:, None]) ** 2
    )


def _pair_density_rows(xs, mu, tau, weights, kernel):
    """weights @ K(xs | atoms) for one pair, on the original x axis."""
    xs = np.asarray(xs, dtype=float)
    if kernel == "normal":
        return weights @ np.exp(kernel_logpdf_matrix(xs, mu, tau))
    if kernel == "lognormal":
        out = np.zeros(xs.shape)
        pos = xs > 0
        if np.any(pos):
            out[pos] = (weights @ np.exp(kernel_logpdf_matrix(np.log(xs[pos]), mu, tau))) / xs[pos]
        return out
    raise ParameterError(f"unknown kernel kind {kernel!r}")


def joint_density_with_slice(x, r: int, j: int, state):
    """Joint density of (x, slice count = r) for group j, slice marginalized
    over cluster and selector labels.

    Equals r^-1 * sum_l p_jl * f_N(r|lam_jl) * sum_{k<=r} K(x|theta_jlk).
    """
    if r < 1:
        raise ParameterError(f"slice count must be >= 1, got {r}")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    total = np.zeros(xs.shape)
    for l in range(state.m):
        if state.atoms.depth(j, l) < r:
            raise InvariantViolation(
                f"pair ({j},{l}) holds {state.atoms.depth(j, l)} atoms, need {r}"
            )
        mu = state.atoms.mu(j, l)[:r]
        tau = state.atoms.tau(j, l)[:r]
        ksum = _pair_density_rows(xs, mu, tau, np.ones(r), state.kernel)
        total += state.p[j, l] * nb2_pmf(r, state.lam[j, l]) * ksum
    total /= r
    return total if np.ndim(x) else float(total[0])


def conditional_mixture_weights(r: int, j: int, p_row, lambda_row) -> np.ndarray:
    """Posterior probabilities of each pair measure given slice count r."""
    if r < 1:
        raise ParameterError(f"slice count must be >= 1, got {r}")
    p_row = np.asarray(p_row, dtype=float)
    lambda_row = np.asarray(lambda_row, dtype=float)
    num = np.array([p_row[l] * nb2_pmf(r, lambda_row[l]) for l in range(p_row.size)])
    tot = num.sum()
    if tot <= 0:
        raise NumericalError(
            f"all mixture-weight numerators vanished at r={r}; lambda row {lambda_row}"
        )
    return num / tot


def density_eval(x, j: int, state, tail: str = "prior_predictive"):
    """Mixture density of group j at x under the current state.

    Instantiated atoms carry their weights exactly; the residual weight mass
    of each pair is either handed to the base-measure predictive density
    (``prior_predictive``) or dropped with the kept weights renormalized
    (``truncate``).
    """
    if tail not in ("prior_predictive", "truncate"):
        raise ParameterError(f"unknown tail mode {tail!r}")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    pp = None
    if tail == "prior_predictive":
        pp = prior_predictive_pdf(state.hyper, state.kernel, xs)
        pp = np.atleast_1d(pp)
    total = np.zeros(xs.shape)
    for l in range(state.m):
        if state.p[j, l] == 0.0:
            continue
        weights, residual, mu, tau = state.pair_mixture(j, l)
        rows = _pair_density_rows(xs, mu, tau, weights, state.kernel)
        if tail == "prior_predictive":
            rows = rows + residual * pp
        else:
            kept = weights.sum()
            if kept > 0:
                rows = rows / kept
        total += state.p[j, l] * rows
    return total if np.ndim(x) else float(total[0])


def second_moment_g(lam: float, kernel_second_moment: float, kernel_mean_sq: float) -> float:
    """Second moment of a geometric-weights random density at a fixed point.

    Inputs are E[K(x|theta)^2] and (E[K(x|theta)])^2 under the base measure.
    """
    if not (0.0 < lam <= 1.0):
        raise ParameterError(f"lambda must lie in (0,1], got {lam}")
    return (lam * kernel_second_moment + 2.0 * (1.0 - lam) * kernel_mean_sq) / (2.0 - lam)


def cov_pdgsbp(p, lam, j: int, i: int, kernel_second_moment: float, kernel_mean_sq: float) -> float:
    """Covariance of the group-j and group-i random densities at a fixed point.

    Equals p_ji * p_ij * lam_ji/(2-lam_ji) * Var(K(x|theta)).
    """
    if j == i:
        raise ParameterError("covariance requires two distinct groups")
    p = np.asarray(p, dtype=float)
    lam = np.asarray(lam, dtype=float)
    var_k = kernel_second_moment - kernel_mean_sq
    return p[j, i] * p[i, j] * lam[j, i] / (2.0 - lam[j, i]) * var_k


def corr_pdgsbp(p, lam, j: int, i: int) -> float:
    """Correlation of two geometric-weights random densities; kernel-free."""
    if j == i:
        raise ParameterError("correlation requires two distinct groups")
    p = np.asarray(p, dtype=float)
    lam = np.asarray(lam, dtype=float)
    num = lam[j, i] * p[j, i] * p[i, j] / (2.0 - lam[j, i])
    row_j = np.sum(p[j] ** 2 * lam[j] / (2.0 - lam[j]))
    row_i = np.sum(p[i] ** 2 * lam[i] / (2.0 - lam[i]))
    denom = np.sqrt(row_j * row_i)
    if denom == 0.0:
        raise NumericalError("correlation denominator vanished; degenerate p rows")
    return float(num / denom)


def corr_rpddp(p, c, j: int, i: int) -> float:
    """Correlation of two Dirichlet-process random densities; kernel-free."""
    if j == i:
        raise ParameterError("correlation requires two distinct groups")
    p = np.asarray(p, dtype=float)
    c = np.asarray(c, dtype=float)
    num = p[j, i] * p[i, j] / (1.0 + c[j, i])
    row_j = np.sum(p[j] ** 2 / (1.0 + c[j]))
    row_i = np.sum(p[i] ** 2 / (1.0 + c[i]))
    denom = np.sqrt(row_j * row_i)
    if denom == 0.0:
        raise NumericalError("correlation denominator vanished; degenerate p rows")
    return float(num / denom)


def d12_case(lambda11: float, lambda22: float, lambda12: float, p=None) -> str:
    """Which of the two synchronized models (c = 1/lam - 1) correlates more.

    Returns ``"gsb_greater"``, ``"dp_greater"`` or ``"equal"``. The extreme
    orderings of lambda12 against the idiosyncratic parameters settle the
    comparison regardless of the selection matrix; between them the sign
    depends on p (defaults to the symmetric 2x2 matrix with entries 1/2).
    """
    for v in (lambda11, lambda22, lambda12):
        if not (0.0 < v < 1.0):
            raise ParameterError(f"lambda values must lie in (0,1), got {v}")
    p = np.full((2, 2), 0.5) if p is None else np.asarray(p, dtype=float)
    if p[0, 1] * p[1, 0] == 0.0:
        return "equal"
    if lambda11 == lambda22 == lambda12:
        return "equal"
    if lambda12 > max(lambda11, lambda22):
        return "gsb_greater"
    if lambda12 < min(lambda11, lambda22):
        return "dp_greater"
    r1 = (2.0 - lambda12) / (2.0 - lambda11)
    r2 = (2.0 - lambda12) / (2.0 - lambda22)
    d12 = (p[0, 1] ** 2 * lambda12 + r1 * p[0, 0] ** 2 * lambda11) * (
        p[1, 0] ** 2 * lambda12 + r2 * p[1, 1] ** 2 * lambda22
    ) - (p[0, 1] ** 2 * lambda12 + p[0, 0] ** 2 * lambda11) * (
        p[1, 0] ** 2 * lambda12 + p[1, 1] ** 2 * lambda22
    )
    if d12 < 0.0:
        return "gsb_greater"
    if d12 > 0.0:
        return "dp_greater"
    return "equal"
