"""Synthetic data generators, real-data ingestion, predictive construction,
Hellinger evaluation, and the runtime benchmark harness."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import gaussian_kde

from . import pdgsbp, rpddp
from .distributions import BaseMeasureHyper
from .errors import ParameterError
from .trace import ChainTrace


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    family: str  # "normal" (mean, sd) or "gamma" (shape, rate)
    params: tuple[float, float]


@dataclass
class MixtureSpec:
    """Closed-form finite mixture used as a data model and Hellinger target."""

    components: tuple[MixtureComponent, ...]

    def __post_init__(self):
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-12:
            raise ParameterError(f"mixture weights sum to {total}, expected 1")
        for c in self.components:
            if c.family == "gamma" and (c.params[0] <= 0 or c.params[1] <= 0):
                raise ParameterError(f"gamma component needs positive params, got {c.params}")
            if c.family == "normal" and c.params[1] <= 0:
                raise ParameterError(f"normal component needs positive sd, got {c.params}")

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for c in self.components:
            if c.family == "normal":
                mean, sd = c.params
                out += c.weight * np.exp(-0.5 * ((x - mean) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
            elif c.family == "gamma":
                shape, rate = c.params
                pos = x > 0
                val = np.zeros(x.shape)
                lg = (
                    shape * math.log(rate)
                    - math.lgamma(shape)
                    + (shape - 1.0) * np.log(x[pos])
                    - rate * x[pos]
                )
                val[pos] = np.exp(lg)
                out += c.weight * val
            else:
                raise ParameterError(f"unknown component family {c.family!r}")
        return out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        weights = np.array([c.weight for c in self.components])
        counts = rng.multinomial(n, weights)
        parts = []
        for c, k in zip(self.components, counts):
            if k == 0:
                continue
            if c.family == "normal":
                parts.append(rng.normal(c.params[0], c.params[1], size=k))
            else:
                parts.append(rng.gamma(c.params[0], 1.0 / c.params[1], size=k))
        draws = np.concatenate(parts) if parts else np.empty(0)
        return draws[rng.permutation(n)]

    def mean(self) -> float:
        total = 0.0
        for c in self.components:
            if c.family == "normal":
                total += c.weight * c.params[0]
            else:
                total += c.weight * c.params[0] / c.params[1]
        return total


def _normals(entries) -> list[MixtureComponent]:
    return [MixtureComponent(w, "normal", (mean, sd)) for w, mean, sd in entries]


def _gammas(entries) -> list[MixtureComponent]:
    return [MixtureComponent(w, "gamma", (shape, rate)) for w, shape, rate in entries]


def _blend(parts: list[tuple[float, list[MixtureComponent]]]) -> MixtureSpec:
    comps = []
    for outer, inner in parts:
        if outer == 0.0:
            continue
        comps.extend(
            MixtureComponent(outer * c.weight, c.family, c.params) for c in inner
        )
    return MixtureSpec(tuple(comps))


@dataclass
class GroupedDataset:
    """Ordered groups of observations plus experiment presets.

    ``true`` holds the generating mixture of each group when known (used as
    a Hellinger target). ``hyper`` and ``kernel`` carry the base-measure and
    kernel presets of the experiment that produced the data.
    """

    groups: list[np.ndarray]
    name: str = "dataset"
    true: list[MixtureSpec] | None = None
    kernel: str = "normal"
    hyper: BaseMeasureHyper | None = None
    dirichlet_alpha: float | np.ndarray = 1.0
    p_true: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> list[int]:
        return [len(g) for g in self.groups]


# 4x10 activation matrix of the nested normal mixtures: at most two ones per
# column (shared component), exactly four per row.
NESTED_M = np.array(
    [
        [1, 1, 1, 1, 0, 0, 0, 0, 0, 0],
        [0, 0, 1, 0, 1, 0, 0, 1, 1, 0],
        [0, 1, 0, 0, 0, 1, 0, 1, 0, 1],
        [1, 0, 0, 0, 0, 0, 1, 0, 1, 1],
    ]
)
NESTED_SIZES = {2: 60, 3: 120, 4: 200}


def gen_nested(m: int, n_per_group: int | None = None, seed: int = 0) -> GroupedDataset:
    """Nested normal mixtures driven by the fixed 4x10 activation matrix.

    Group j mixes unit-variance normals at means 10(k-6) over the active
    columns k in {5-m, ..., 2(m+1)} of row j, equally weighted.
    """
    if m not in (2, 3, 4):
        raise ParameterError(f"nested design defined for m in {{2,3,4}}, got {m}")
    n = NESTED_SIZES[m] if n_per_group is None else n_per_group
    col_lo, col_hi = 5 - m, 2 * (m + 1)  # 1-based inclusive
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    specs, groups = [], []
    for j in range(m):
        active = [k for k in range(col_lo, col_hi + 1) if NESTED_M[j, k - 1] == 1]
        w = 1.0 / len(active)
        spec = MixtureSpec(tuple(_normals([(w, 10.0 * (k - 6), 1.0) for k in active])))
        specs.append(spec)
        groups.append(spec.sample(n, rng))
    return GroupedDataset(groups=groups, name=f"nested_m{m}", true=specs)


def gen_sparse_scalable(
    m: int, n: int = 20, xi: float = 10.0, seed: int = 0
) -> GroupedDataset:
    """Unimodal groups at separation xi plus one group mixing all modes.

    Groups 1..m-1 are N((j-1)*xi, 1) with n observations each; group m is
    the equally weighted (m-1)-mixture with n*(m-1) observations.
    """
    if m < 2:
        raise ParameterError(f"need m >= 2, got {m}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    specs, groups = [], []
    for j in range(m - 1):
        spec = MixtureSpec(tuple(_normals([(1.0, j * xi, 1.0)])))
        specs.append(spec)
        groups.append(spec.sample(n, rng))
    w = 1.0 / (m - 1)
    spec_m = MixtureSpec(tuple(_normals([(w, k * xi, 1.0) for k in range(m - 1)])))
    specs.append(spec_m)
    groups.append(spec_m.sample(n * (m - 1), rng))
    return GroupedDataset(groups=groups, name=f"sparse_m{m}", true=specs)


SEVEN_MIX_HYPER = BaseMeasureHyper(0.0, 1e-3, 1.0, 1e-2)


def gen_seven_mix(seed: int = 0) -> GroupedDataset:
    """Two 7-component normal mixtures sharing a reweighted 4-mixture."""
    g11 = _normals([(2 / 7, -8.0, 0.25), (3 / 7, 1.0, 0.5), (2 / 7, 10.0, 1.0)])
    g12 = _normals(
        [(1 / 7, -10.0, 0.5), (3 / 7, -3.0, 0.75), (1 / 7, 3.0, 0.25), (2 / 7, 7.0, 0.25)]
    )
    g21 = _normals(
        [(2 / 8, -10.0, 0.5), (3 / 8, -3.0, 0.75), (2 / 8, 3.0, 0.25), (1 / 8, 7.0, 0.25)]
    )
    g22 = _normals([(1 / 3, -6.0, 0.5), (1 / 3, -1.0, 0.25), (1 / 3, 5.0, 0.5)])
    f1 = _blend([(0.5, g11), (0.5, g12)])
    f2 = _blend([(4 / 7, g21), (3 / 7, g22)])
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    groups = [f1.sample(200, rng), f2.sample(200, rng)]
    return GroupedDataset(
        groups=groups, name="seven_mix", true=[f1, f2], hyper=SEVEN_MIX_HYPER
    )


def gen_gamma_mix(seed: int = 0) -> GroupedDataset:
    """Two gamma 4-mixtures sharing an identically weighted gamma 2-mixture.

    Fitted with the log-normal kernel; the base-measure location preset is
    the pooled mean of the log observations.
    """
    g11 = _gammas([(2 / 3, 2.0, 1.1), (1 / 3, 80.0, 2.0)])
    g12 = _gammas([(8 / 14, 10.0, 0.9), (6 / 14, 200.0, 8.1)])
    g22 = _gammas([(2 / 3, 105.0, 3.0), (1 / 3, 500.0, 10.0)])
    f1 = _blend([(2 / 5, g11), (3 / 5, g12)])
    f2 = _blend([(7 / 10, g12), (3 / 10, g22)])
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    groups = [f1.sample(160, rng), f2.sample(160, rng)]
    s_bar = float(np.mean(np.log(np.concatenate(groups))))
    return GroupedDataset(
        groups=groups,
        name="gamma_mix",
        true=[f1, f2],
        kernel="lognormal",
        hyper=BaseMeasureHyper(s_bar, 0.5, 2.0, 0.01),
        p_true=np.array([[0.4, 0.6], [0.7, 0.3]]),
    )


BORROWING_F = _normals(
    [(3 / 10, -10.0, 1.0), (2 / 10, -6.0, 1.0), (2 / 10, 6.0, 1.0), (3 / 10, 10.0, 1.0)]
)
BORROWING_G1 = _normals([(0.5, -4.0, 1.0), (0.5, 4.0, 1.0)])
BORROWING_G2 = _normals([(0.5, -12.0, 1.0), (0.5, 12.0, 1.0)])


def gen_borrowing(scenario: int, seed: int = 0) -> GroupedDataset:
    """Three populations whose shared part shrinks with the scenario.

    Scenario 1 draws all groups from the common 4-mixture; scenario 2 blends
    half idiosyncratic 2-mixtures into groups 1 and 3; scenario 3 removes
    the common part from them entirely. Sizes are fixed at (200, 50, 200).
    """
    if scenario not in (1, 2, 3):
        raise ParameterError(f"scenario must be 1, 2 or 3, got {scenario}")
    q = {1: 0.0, 2: 0.5, 3: 1.0}[scenario]
    f1 = _blend([(1.0 - q, BORROWING_F), (q, BORROWING_G1)])
    f2 = _blend([(1.0, BORROWING_F)])
    f3 = _blend([(1.0 - q, BORROWING_F), (q, BORROWING_G2)])
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    groups = [f1.sample(200, rng), f2.sample(50, rng), f3.sample(200, rng)]
    return GroupedDataset(
        groups=groups, name=f"borrowing_s{scenario}", true=[f1, f2, f3]
    )


@dataclass(frozen=True)
class PbcseqColumns:
    """0-based column positions in the liver-study longitudinal file."""

    id: int = 0
    status: int = 2
    day: int = 6
    sgot: int = 15


PBCSEQ_ALPHA = np.array([[10.0, 1.0, 1.0], [1.0, 1.0, 1.0], [1.0, 1.0, 10.0]])


def load_pbcseq(
    path,
    columns: PbcseqColumns = PbcseqColumns(),
    status_codes: tuple[int, int, int] = (2, 1, 0),
    missing_tokens: frozenset = frozenset({"", ".", "NA", "na"}),
) -> GroupedDataset:
    """Last-recorded SGOT per individual, grouped by outcome.

    Groups come out in the order (dead without transplant, transplanted,
    alive without transplant) according to ``status_codes``, each mean-
    normalized to zero. Rows whose SGOT field is a missing-value token are
    skipped; structurally unparseable rows raise with their line numbers.
    """
    per_id: dict[int, tuple[float, float]] = {}
    id_status: dict[int, int] = {}
    bad_lines = []
    try:
        fh = open(path)
    except OSError as exc:
        raise ParameterError(f"cannot open pbcseq file {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = [f.strip() for f in (line.split(",") if "," in line else line.split())]
            try:
                ind = int(float(fields[columns.id]))
                status = int(float(fields[columns.status]))
                day = float(fields[columns.day])
                sgot_raw = fields[columns.sgot]
            except (ValueError, IndexError):
                if lineno == 1:
                    continue  # header line
                bad_lines.append(lineno)
                continue
            id_status[ind] = status
            if sgot_raw in missing_tokens:
                continue
            try:
                sgot = float(sgot_raw)
            except ValueError:
                bad_lines.append(lineno)
                continue
            prev = per_id.get(ind)
            if prev is None or day >= prev[0]:
                per_id[ind] = (day, sgot)
    if bad_lines:
        raise ParameterError(f"unparseable pbcseq rows at lines {bad_lines}")
    unknown = sorted({s for s in id_status.values() if s not in status_codes})
    if unknown:
        raise ParameterError(f"unknown status codes in pbcseq file: {unknown}")
    groups = []
    for code in status_codes:
        vals = np.array(
            [per_id[i][1] for i in sorted(per_id) if id_status[i] == code], dtype=float
        )
        groups.append(vals - vals.mean() if vals.size else vals)
    return GroupedDataset(
        groups=groups,
        name="pbcseq_sgot",
        dirichlet_alpha=PBCSEQ_ALPHA,
        meta={"individuals": len(per_id)},
    )


def save_dataset(dataset: GroupedDataset, path):
    """Write observations as CSV rows (group, value); 0-based group index."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "value"])
        for j, g in enumerate(dataset.groups):
            for v in g:
                writer.writerow([j, repr(float(v))])


def load_dataset(path, name: str = "file") -> GroupedDataset:
    """Read a (group, value) CSV written by ``save_dataset``."""
    by_group: dict[int, list[float]] = {}
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParameterError(f"cannot open dataset file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParameterError(f"dataset file {path} is empty")
        for row in reader:
            by_group.setdefault(int(row[0]), []).append(float(row[1]))
    m = max(by_group) + 1
    groups = [np.array(by_group.get(j, []), dtype=float) for j in range(m)]
    return GroupedDataset(groups=groups, name=name)


@dataclass
class DensityGrid:
    """Uniform evaluation grid with per-group density values."""

    x: np.ndarray
    values: np.ndarray  # (m, len(x))

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[1] != self.x.size:
            raise ParameterError("density values do not match grid length")
        if np.any(self.values < 0):
            raise ParameterError("density values must be non-negative")

    def integral(self, j: int = 0) -> float:
        return float(np.trapezoid(self.values[j], self.x))


def evaluation_grid(
    dataset, points: int = 4096, pad_sd: float = 4.0, positive: bool | None = None
) -> np.ndarray:
    """Uniform grid spanning the pooled data range plus pad_sd pooled
    standard deviations on each side (clipped to positive support for the
    log-normal kernel)."""
    groups = dataset.groups if hasattr(dataset, "groups") else dataset
    pooled = np.concatenate([np.asarray(g, dtype=float) for g in groups])
    sd = float(pooled.std())
    lo = float(pooled.min()) - pad_sd * sd
    hi = float(pooled.max()) + pad_sd * sd
    if positive is None:
        positive = hasattr(dataset, "kernel") and dataset.kernel == "lognormal"
    if positive:
        lo = max(lo, 1e-6)
    return np.linspace(lo, hi, points)


def predictive_grid(trace: ChainTrace, grid: np.ndarray | None = None) -> DensityGrid:
    """Pointwise posterior average of the conditional density over retained
    states (the low-variance alternative to KDE over predictive draws)."""
    if trace.density is None or len(trace.density) == 0:
        raise ParameterError("trace recorded no density rows; pass a grid to run_chain")
    if grid is not None and not np.array_equal(np.asarray(grid), trace.grid):
        raise ParameterError("requested grid differs from the trace's recorded grid")
    return DensityGrid(x=trace.grid, values=trace.density.mean(axis=0))


def kde_predictive(trace: ChainTrace, grid: np.ndarray | None = None) -> DensityGrid:
    """Gaussian KDE with Silverman bandwidth over one predictive draw per
    group per retained iteration (the sampling-based predictive pipeline).

    Samples landing further than one grid span outside the evaluation
    window are dropped before bandwidth selection: newly born clusters
    carry near-flat precisions for a sweep, and a single such draw (at
    |x| ~ 1e100) would blow up any variance-based bandwidth.
    """
    if trace.predictive_samples is None or len(trace.predictive_samples) == 0:
        raise ParameterError(
            "trace recorded no predictive samples; "
            "pass record_predictive_samples=True to run_chain"
        )
    x = trace.grid if grid is None else np.asarray(grid, dtype=float)
    if x is None:
        raise ParameterError("no grid available for KDE evaluation")
    span = x[-1] - x[0]
    rows = []
    for j in range(trace.m):
        samples = trace.predictive_samples[:, j]
        keep = samples[(samples >= x[0] - span) & (samples <= x[-1] + span)]
        if keep.size < 2:
            raise ParameterError(f"group {j}: too few in-window predictive samples")
        rows.append(gaussian_kde(keep, bw_method="silverman")(x))
    return DensityGrid(x=x, values=np.clip(np.stack(rows), 0.0, None))


def hellinger(f: np.ndarray, g: np.ndarray, x: np.ndarray) -> float:
    """Hellinger distance between two densities tabulated on one grid."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    x = np.asarray(x, dtype=float)
    if f.shape != g.shape or f.shape != x.shape:
        raise ParameterError("hellinger requires both densities on the same grid")
    bc = float(np.trapezoid(np.sqrt(f * g), x))
    return math.sqrt(max(0.0, 1.0 - bc))


def posterior_selection_mean(trace: ChainTrace) -> np.ndarray:
    """Elementwise average of the selection matrix over retained states."""
    if trace.iterations == 0:
        raise ParameterError("empty trace")
    return trace.p[trace.burn_in :].mean(axis=0)


@dataclass
class BenchResult:
    """Wall-clock MET (seconds per 1e3 sweeps) plus hardware-free counters."""

    sampler: str
    m: int
    n_total: int
    iterations_per_block: int
    blocks: int
    met_mean: float
    met_se: float
    comparisons_per_iter: float
    block_met: np.ndarray
    extra: dict = field(default_factory=dict)


def benchmark_met(
    sampler: str,
    data,
    iterations: int,
    seed: int,
    blocks: int = 10,
    **chain_kwargs,
) -> BenchResult:
    """Time ``blocks`` blocks of ``iterations`` sweeps after one discarded
    warm-up block; reports mean seconds per 1e3 iterations with its standard
    error and the instrumented per-iteration comparison count."""
    if sampler not in ("pdgsbp", "rpddp"):
        raise ParameterError(f"unknown sampler {sampler!r}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    mod = pdgsbp if sampler == "pdgsbp" else rpddp
    kernel = chain_kwargs.pop("kernel", getattr(data, "kernel", "normal"))
    hyper = chain_kwargs.pop("hyper", None) or getattr(data, "hyper", None) or pdgsbp.DEFAULT_HYPER
    ys = pdgsbp.prepare_data(data, kernel)
    if sampler == "pdgsbp":
        prior = chain_kwargs.pop("lambda_prior", pdgsbp.DEFAULT_LAMBDA_PRIOR)
        state = pdgsbp.init_state(ys, kernel, hyper, prior, chain_kwargs.pop("dirichlet_alpha", 1.0), rng)
    else:
        prior = chain_kwargs.pop("conc_prior", rpddp.DEFAULT_CONC_PRIOR)
        state = rpddp.init_state(ys, kernel, hyper, prior, chain_kwargs.pop("dirichlet_alpha", 1.0), rng)
    if chain_kwargs:
        raise ParameterError(f"unknown benchmark options: {sorted(chain_kwargs)}")

    def run_block():
        comps = 0
        extras = []
        for _ in range(iterations):
            out = mod.gibbs_sweep(state, ys, rng)
            if sampler == "pdgsbp":
                comps += out
            else:
                comps += out[0]
                extras.append(out[1:])
        return comps, extras

    run_block()  # warm-up, discarded
    mets = np.empty(blocks)
    comp_total = 0
    card, pred_depth, act_depth = [], [], []
    for b in range(blocks):
        t0 = time.perf_counter_ns()
        comps, extras = run_block()
        dt = time.perf_counter_ns() - t0
        mets[b] = dt * 1e-9 * (1000.0 / iterations)
        comp_total += comps
        for e in extras:
            card.append(e[0])
            pred_depth.append(e[1])
            act_depth.append(e[2])
    extra = {}
    if sampler == "rpddp":
        extra = {
            "mean_slice_cardinality": float(np.mean(card)),
            "poisson_predicted_depth": float(np.mean(pred_depth)),
            "actual_depth": float(np.mean(act_depth)),
        }
    return BenchResult(
        sampler=sampler,
        m=data.m if hasattr(data, "m") else len(data),
        n_total=int(sum(len(g) for g in (data.groups if hasattr(data, "groups") else data))),
        iterations_per_block=iterations,
        blocks=blocks,
        met_mean=float(mets.mean()),
        met_se=float(mets.std(ddof=1) / math.sqrt(blocks)) if blocks > 1 else 0.0,
        comparisons_per_iter=comp_total / (blocks * iterations),
        block_met=mets,
        extra=extra,
    )
