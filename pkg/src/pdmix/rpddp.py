"""Slice Gibbs sampler for the pairwise-dependent Dirichlet-process model
with gamma-randomized concentration masses.

Sweep order: atom locations, stick fractions, slice thresholds, stick
extension, the (cluster, selector) block over the slice sets, selection
rows, concentration masses. Stick arrays are trimmed at sweep end to the
largest slice-set member plus one.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .distributions import BaseMeasureHyper, sample_dirichlet, sample_gamma
from .errors import ConfigError, InvariantViolation, ParameterError
from .model import AtomTable, canonical_pair, density_eval, validate_selection_matrix
from .pdgsbp import (
    DEFAULT_HYPER,
    prepare_data,
    resolve_alpha,
    update_locations,
    update_selection,
)
from .trace import ChainTrace, occupied_cluster_count

DEFAULT_CONC_PRIOR = (1.1, 1.1)


@dataclass
class SliceSet:
    """Membership of one pair's stick weights above a slice threshold."""

    pair: tuple[int, int]
    u: float
    members: np.ndarray  # 1-based stick indices
    comparisons: int  # weights scanned to build the set


@dataclass
class RpddpState:
    """All latent variables and parameters at one Gibbs iteration."""

    m: int
    kernel: str
    hyper: BaseMeasureHyper
    atoms: AtomTable
    sticks: dict[tuple[int, int], np.ndarray]
    u: list[np.ndarray]
    d: list[np.ndarray]
    delta: list[np.ndarray]
    p: np.ndarray
    c: np.ndarray
    dirichlet_alpha: np.ndarray
    conc_prior: tuple

    def stick_depth(self, j: int, l: int) -> int:
        return self.sticks[canonical_pair(j, l)].size

    def weights(self, j: int, l: int) -> np.ndarray:
        """Stick-breaking weights w_k = v_k * prod_{r<k} (1 - v_r)."""
        v = self.sticks[canonical_pair(j, l)]
        if v.size == 0:
            return v
        left = np.cumprod(1.0 - v)
        return v * np.concatenate([[1.0], left[:-1]])

    def residual(self, j: int, l: int) -> float:
        return float(np.prod(1.0 - self.sticks[canonical_pair(j, l)]))

    def occupied_depth(self, j: int, l: int) -> int:
        """Largest cluster label allocated to pair (j, l), pooling both
        groups; sticks past this point hold no observations."""
        labels = [self.d[j][self.delta[j] == l]]
        if l != j:
            labels.append(self.d[l][self.delta[l] == j])
        return max((int(ks.max()) for ks in labels if ks.size), default=0)

    def pair_mixture(self, j: int, l: int):
        """Occupied-depth weights, residual mass, and atoms of pair (j, l);
        unoccupied sticks count toward the residual (their atoms are fresh
        base-measure draws)."""
        depth = max(self.occupied_depth(j, l), 1)
        w = self.weights(j, l)[:depth]
        residual = 1.0 - float(w.sum())
        return w, residual, self.atoms.mu(j, l)[:depth], self.atoms.tau(j, l)[:depth]


def init_state(
    ys: list[np.ndarray],
    kernel: str,
    hyper: BaseMeasureHyper,
    conc_prior: tuple,
    dirichlet_alpha,
    rng: np.random.Generator,
    init_clusters: int = 10,
) -> RpddpState:
    """Start from a random partition over ``init_clusters`` sticks per pair.

    A one-cluster start is a near-absorbing state here: the occupied stick's
    posterior weight approaches one, slice sets stop reaching fresh sticks,
    and with a near-flat base measure cluster births become vanishingly
    rare. Scattering labels over a handful of clusters (whose atoms the
    first location update immediately fits to the data) removes the
    bottleneck without touching the target distribution.
    """
    a, b = conc_prior
    if not a > 1:
        raise ConfigError(f"concentration prior requires a > 1, got a={a}")
    m = len(ys)
    alpha = resolve_alpha(dirichlet_alpha, m)
    atoms = AtomTable(m, hyper)
    c = np.empty((m, m))
    sticks = {}
    k0 = max(1, init_clusters)
    for j in range(m):
        for l in range(j, m):
            c[j, l] = c[l, j] = sample_gamma(a, b, rng)
            draw = rng.beta(1.0, c[j, l], size=k0)
            sticks[(j, l)] = np.clip(draw, 1e-12, 1.0 - 1e-12)
            atoms.ensure_depth(j, l, k0, rng)
    p = np.stack([sample_dirichlet(alpha[j], rng) for j in range(m)])
    d = [rng.integers(1, k0 + 1, size=len(y)).astype(np.int64) for y in ys]
    delta = [np.full(len(y), j, dtype=np.int64) for j, y in enumerate(ys)]
    state = RpddpState(
        m=m, kernel=kernel, hyper=hyper, atoms=atoms, sticks=sticks,
        u=[np.empty(len(y)) for y in ys], d=d, delta=delta, p=p, c=c,
        dirichlet_alpha=alpha, conc_prior=tuple(conc_prior),
    )
    update_slice_u(state, ys, rng)
    return state


update_locations_dp = update_locations
update_selection_dp = update_selection


def update_sticks(state, ys: list[np.ndarray], rng: np.random.Generator):
    """Conjugate beta update of every instantiated stick fraction.

    Counts pool both groups of an off-diagonal pair, mirroring the location
    update.
    """
    for j in range(state.m):
        for l in range(j, state.m):
            depth = state.stick_depth(j, l)
            parts = [state.d[j][state.delta[j] == l]]
            if l != j:
                parts.append(state.d[l][state.delta[l] == j])
            kv = np.concatenate(parts) - 1
            mk = np.bincount(kv, minlength=depth).astype(float)
            beyond = kv.size - np.cumsum(mk)
            draw = rng.beta(1.0 + mk, state.c[j, l] + beyond)
            # keep fractions interior: tiny concentrations push draws onto 1.0
            state.sticks[(j, l)] = np.clip(draw, 1e-12, 1.0 - 1e-12)


def update_slice_u(state, ys: list[np.ndarray], rng: np.random.Generator):
    """Redraw each slice threshold uniformly below its allocated weight."""
    for j in range(state.m):
        n_j = len(state.d[j])
        if n_j == 0:
            continue
        w_sel = np.empty(n_j)
        for l in range(state.m):
            mask = state.delta[j] == l
            if np.any(mask):
                w_sel[mask] = state.weights(j, l)[state.d[j][mask] - 1]
        state.u[j] = rng.random(n_j) * w_sel


def pair_u_min(state, j: int, l: int) -> float | None:
    """Least slice threshold among all observations of groups j and l.

    Every observation of either group consults pair (j, l) during the block
    update, so this is the level the pair's sticks must be instantiated to.
    """
    vals = []
    if len(state.u[j]):
        vals.append(float(state.u[j].min()))
    if l != j and len(state.u[l]):
        vals.append(float(state.u[l].min()))
    return min(vals) if vals else None


def extend_sticks(state, pair: tuple[int, int], rng: np.random.Generator) -> float:
    """Grow one pair's sticks until the residual mass drops below the least
    relevant slice threshold, guaranteeing that every slice-set member is
    instantiated. Returns the expected depth 1 + c * (-log u*) implied by
    the renewal representation (for instrumentation; the extension itself is
    the deterministic residual-mass criterion).
    """
    j, l = pair
    key = canonical_pair(j, l)
    u_star = pair_u_min(state, j, l)
    if u_star is None:
        return 1.0
    c = state.c[key]
    v = state.sticks[key]
    residual = float(np.prod(1.0 - v))
    new = []
    while residual >= u_star:
        vk = min(max(rng.beta(1.0, c), 1e-12), 1.0 - 1e-12)
        new.append(vk)
        residual *= 1.0 - vk
    if new:
        state.sticks[key] = np.concatenate([v, np.asarray(new)])
    state.atoms.ensure_depth(j, l, state.stick_depth(j, l), rng)
    return 1.0 + c * (-math.log(u_star))


def build_slice_set(state, pair: tuple[int, int], u: float) -> SliceSet:
    """Exact membership {k : w_k > u}; a full scan of the weight array."""
    j, l = pair
    w = state.weights(j, l)
    members = np.nonzero(w > u)[0] + 1
    if members.size == 0:
        raise InvariantViolation(
            f"empty slice set for pair {pair} at u={u}; sticks not extended?"
        )
    return SliceSet(pair=canonical_pair(j, l), u=u, members=members, comparisons=w.size)


def update_alloc_block_dp(
    state, ys: list[np.ndarray], rng: np.random.Generator
) -> tuple[int, float]:
    """Joint (cluster, selector) draw over the union of per-pair slice sets.

    Mass is p_jl * K(y_ji | atom_jlk) on member cells, sampled exactly in
    log space by Gumbel-max. Returns (weights scanned, mean slice-set
    cardinality per observation).
    """
    comparisons = 0
    card_sum = 0
    n_total = 0
    for j in range(state.m):
        n_j = len(ys[j])
        if n_j == 0:
            continue
        depths = [state.stick_depth(j, l) for l in range(state.m)]
        dmax = max(depths)
        w_mat = np.zeros((state.m, dmax))
        mu = np.ones((state.m, dmax))
        tau = np.ones((state.m, dmax))
        for l in range(state.m):
            w_mat[l, : depths[l]] = state.weights(j, l)
            mu[l, : depths[l]] = state.atoms.mu(j, l)[: depths[l]]
            tau[l, : depths[l]] = state.atoms.tau(j, l)[: depths[l]]
        member = state.u[j][:, None, None] < w_mat[None, :, :]
        with np.errstate(divide="ignore"):
            logp = np.log(state.p[j])
        ll = (
            0.5 * np.log(tau)[None, :, :]
            - 0.5 * tau[None, :, :] * (ys[j][:, None, None] - mu[None, :, :]) ** 2
            + logp[None, :, None]
        )
        ll[~member] = -np.inf
        gumbel = rng.gumbel(size=ll.shape)
        flat = (ll + gumbel).reshape(n_j, state.m * dmax)
        idx = np.argmax(flat, axis=1)
        state.delta[j] = (idx // dmax).astype(np.int64)
        state.d[j] = (idx % dmax + 1).astype(np.int64)
        comparisons += n_j * int(sum(depths))
        card_sum += int(member.sum())
        n_total += n_j
    return comparisons, (card_sum / n_total if n_total else 0.0)


def update_concentration(state, ys: list[np.ndarray], rng: np.random.Generator):
    """Auxiliary-beta update of each concentration mass.

    Draws beta ~ Beta(c+1, n), then c from the two-component gamma mixture
    whose odds are (a + rho - 1) / (n (b - log beta)), with rho the number
    of occupied clusters of the pair (pooled across both groups when
    off-diagonal). With no observations the posterior is the prior.
    """
    a, b = state.conc_prior
    if not a > 1:
        raise ConfigError(f"concentration prior requires a > 1, got a={a}")
    for j in range(state.m):
        for l in range(j, state.m):
            if l == j:
                n = len(ys[j])
                rho = np.unique(state.d[j][state.delta[j] == j]).size
            else:
                n = len(ys[j]) + len(ys[l])
                rho = (
                    np.unique(state.d[j][state.delta[j] == l]).size
                    + np.unique(state.d[l][state.delta[l] == j]).size
                )
            if n == 0:
                draw = sample_gamma(a, b, rng)
            else:
                beta = max(rng.beta(state.c[j, l] + 1.0, n), 1e-300)
                rate = b - math.log(beta)
                odds = (a + rho - 1.0) / (n * rate)
                pi = odds / (1.0 + odds)
                shape = a + rho if rng.random() < pi else a + rho - 1.0
                draw = rng.gamma(shape, 1.0 / rate)
            state.c[j, l] = state.c[l, j] = draw


def trim_sticks(state):
    """Drop sticks beyond the largest slice-set member plus one."""
    for j in range(state.m):
        for l in range(j, state.m):
            u_star = pair_u_min(state, j, l)
            if u_star is None:
                keep = 1
            else:
                above = np.nonzero(state.weights(j, l) > u_star)[0]
                keep = (int(above[-1]) + 1 if above.size else 0) + 1
            keep = max(keep, 1)
            key = (j, l)
            if state.sticks[key].size > keep:
                state.sticks[key] = state.sticks[key][:keep].copy()
            state.atoms.trim(j, l, state.sticks[key].size)


def gibbs_sweep(
    state, ys: list[np.ndarray], rng: np.random.Generator
) -> tuple[int, float, float, float]:
    """One full scan; returns (comparisons, mean slice-set cardinality,
    mean predicted stick depth, mean actual stick depth)."""
    update_locations(state, ys, rng)
    update_sticks(state, ys, rng)
    update_slice_u(state, ys, rng)
    predicted = []
    for j in range(state.m):
        for l in range(j, state.m):
            predicted.append(extend_sticks(state, (j, l), rng))
    comparisons, mean_card = update_alloc_block_dp(state, ys, rng)
    update_selection(state, ys, rng)
    update_concentration(state, ys, rng)
    actual = [
        state.stick_depth(j, l) for j in range(state.m) for l in range(j, state.m)
    ]
    trim_sticks(state)
    return comparisons, mean_card, float(np.mean(predicted)), float(np.mean(actual))


def check_invariants(state, ys: list[np.ndarray]):
    """Raise InvariantViolation on any broken structural constraint."""
    for j in range(state.m):
        if len(state.d[j]) == 0:
            continue
        if np.any(state.d[j] < 1):
            raise InvariantViolation(f"group {j}: cluster label below 1")
        if np.any(state.delta[j] < 0) or np.any(state.delta[j] >= state.m):
            raise InvariantViolation(f"group {j}: selector outside group range")
        w_sel = np.empty(len(state.d[j]))
        for l in range(state.m):
            mask = state.delta[j] == l
            if np.any(mask):
                if np.any(state.d[j][mask] > state.stick_depth(j, l)):
                    raise InvariantViolation(f"group {j}: label beyond stick depth")
                w_sel[mask] = state.weights(j, l)[state.d[j][mask] - 1]
        if np.any(state.u[j] <= 0) or np.any(state.u[j] >= w_sel):
            raise InvariantViolation(f"group {j}: slice threshold outside (0, w)")
    try:
        validate_selection_matrix(state.p, state.m)
    except ParameterError as exc:
        raise InvariantViolation(str(exc)) from exc
    if np.any(state.c <= 0) or not np.allclose(state.c, state.c.T, rtol=0, atol=0):
        raise InvariantViolation("concentration matrix must be symmetric positive")
    for j in range(state.m):
        for l in range(j, state.m):
            if state.atoms.depth(j, l) < state.stick_depth(j, l):
                raise InvariantViolation(f"pair ({j},{l}) atoms shallower than sticks")
            if not 0.0 <= state.residual(j, l) < 1.0:
                raise InvariantViolation(f"pair ({j},{l}) residual mass degenerate")


def run_chain(
    data,
    *,
    iterations: int,
    seed: int,
    burn_in: int = 0,
    thin: int = 1,
    kernel: str = "normal",
    hyper: BaseMeasureHyper = DEFAULT_HYPER,
    conc_prior: tuple = DEFAULT_CONC_PRIOR,
    dirichlet_alpha=1.0,
    grid: np.ndarray | None = None,
    tail: str = "prior_predictive",
    record_predictive_samples: bool = False,
    check: bool = False,
) -> ChainTrace:
    """Run a full chain and record per-iteration quantities; see the GSB
    counterpart for the recording conventions."""
    if iterations < 0 or burn_in < 0 or thin < 1:
        raise ConfigError("need iterations >= 0, burn_in >= 0, thin >= 1")
    if iterations and burn_in >= iterations:
        raise ConfigError(f"burn_in {burn_in} must be < iterations {iterations}")
    if seed is None:
        raise ConfigError("a seed is required; no entropy-source default")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    ys = prepare_data(data, kernel)
    state = init_state(ys, kernel, hyper, conc_prior, dirichlet_alpha, rng)
    m = state.m
    p_rec = np.empty((iterations, m, m))
    c_rec = np.empty((iterations, m, m))
    nclus = np.zeros(iterations, dtype=np.int64)
    wall = np.zeros(iterations, dtype=np.int64)
    comps = np.zeros(iterations, dtype=np.int64)
    cards = np.zeros(iterations)
    pred_depth = np.zeros(iterations)
    act_depth = np.zeros(iterations)
    dens_rows, dens_iters, pred_rows = [], [], []
    for t in range(iterations):
        t0 = time.perf_counter_ns()
        comps[t], cards[t], pred_depth[t], act_depth[t] = gibbs_sweep(state, ys, rng)
        wall[t] = time.perf_counter_ns() - t0
        p_rec[t] = state.p
        c_rec[t] = state.c
        nclus[t] = occupied_cluster_count(m, state.d, state.delta)
        if check:
            check_invariants(state, ys)
        if t >= burn_in and (t - burn_in) % thin == 0:
            if grid is not None:
                dens_rows.append(
                    np.stack([density_eval(grid, j, state, tail) for j in range(m)])
                )
                dens_iters.append(t)
            if record_predictive_samples:
                pred_rows.append(_sample_predictive(state, rng))
    return ChainTrace(
        sampler="rpddp",
        m=m,
        iterations=iterations,
        burn_in=burn_in,
        thin=thin,
        seed=seed,
        kernel=kernel,
        p=p_rec,
        rates=c_rec,
        rate_name="c",
        n_clusters=nclus,
        wall_nanos=wall,
        comparisons=comps,
        mean_slice_card=cards,
        grid=None if grid is None else np.asarray(grid, dtype=float),
        density=np.stack(dens_rows) if dens_rows else None,
        density_iters=np.asarray(dens_iters, dtype=np.int64) if dens_iters else None,
        predictive_samples=np.stack(pred_rows) if pred_rows else None,
        meta={
            "hyper": hyper,
            "conc_prior": tuple(conc_prior),
            "tail": tail,
            "predicted_depth": pred_depth,
            "actual_depth": act_depth,
            "state": state,
        },
    )


def _sample_predictive(state, rng: np.random.Generator) -> np.ndarray:
    """One draw per group from the occupied cells of its mixture; see the
    GSB counterpart for why the residual mass is excluded."""
    from .pdgsbp import _sample_predictive as _gsb_impl

    return _gsb_impl(state, rng)
