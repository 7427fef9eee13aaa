"""Command-line orchestration: configuration, experiment pipelines, reports.

Subcommands: generate | fit | compare | bench | reproduce. A YAML config
file supplies defaults; command-line flags override file values; the fully
resolved configuration is echoed into the output directory next to every
report.
"""

from __future__ import annotations

import argparse
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import experiments, pdgsbp, reports, rpddp
from .distributions import BaseMeasureHyper
from .errors import ConfigError, InvariantViolation, NumericalError, ParameterError

_ERRORS = (ConfigError, ParameterError, NumericalError, InvariantViolation)

CONFIG_KEYS = {
    "sampler", "seed", "iterations", "burn_in", "thin", "kernel",
    "lambda_prior", "conc_prior", "base_measure", "dirichlet_alpha",
    "dataset", "grid_points", "tail", "out", "jobs", "deterministic", "kde",
}


@dataclass
class RunConfig:
    """Resolved settings of one CLI invocation."""

    sampler: str = "pdgsbp"
    seed: int | None = None
    iterations: int = 20000
    burn_in: int = 5000
    thin: int = 10
    kernel: str | None = None
    lambda_prior: tuple = ("tg", 1.1, 1.1)
    conc_prior: tuple = (1.1, 1.1)
    base_measure: tuple | None = None
    dirichlet_alpha: object = None
    dataset: dict = field(default_factory=dict)
    grid_points: int = 4096
    tail: str = "prior_predictive"
    out: str = "pdmix_out"
    jobs: int = 1
    deterministic: bool = False
    kde: bool = False

    def validate(self):
        if self.seed is None:
            raise ConfigError("field 'seed': required; no entropy-source default")
        if self.sampler not in ("pdgsbp", "rpddp"):
            raise ConfigError(f"field 'sampler': unknown value {self.sampler!r}")
        if self.iterations <= 0:
            raise ConfigError("field 'iterations': must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError(
                f"field 'burn_in': need 0 <= burn_in < iterations, "
                f"got {self.burn_in} vs {self.iterations}"
            )
        if self.thin < 1:
            raise ConfigError("field 'thin': must be >= 1")
        kind, a, _b = self.lambda_prior
        if kind not in ("beta", "tg"):
            raise ConfigError(f"field 'lambda_prior': unknown kind {kind!r}")
        if kind == "tg" and not a > 1:
            raise ConfigError("field 'lambda_prior': transformed-gamma needs a > 1")
        if not self.conc_prior[0] > 1:
            raise ConfigError("field 'conc_prior': concentration updates need a > 1")
        if self.tail not in ("prior_predictive", "truncate"):
            raise ConfigError(f"field 'tail': unknown mode {self.tail!r}")
        if self.grid_points < 8:
            raise ConfigError("field 'grid_points': must be >= 8")
        if self.jobs < 1:
            raise ConfigError("field 'jobs': must be >= 1")
        return self


def _parse_prior(value, name: str) -> tuple:
    if isinstance(value, str):
        parts = value.split(",")
        if name == "lambda_prior":
            if len(parts) != 3:
                raise ConfigError(f"field '{name}': expected kind,a,b got {value!r}")
            return (parts[0], float(parts[1]), float(parts[2]))
        if len(parts) != 2:
            raise ConfigError(f"field '{name}': expected a,b got {value!r}")
        return (float(parts[0]), float(parts[1]))
    if isinstance(value, dict):
        if name == "lambda_prior":
            return (value.get("kind", "tg"), float(value["a"]), float(value["b"]))
        return (float(value["a"]), float(value["b"]))
    if isinstance(value, (list, tuple)):
        if name == "lambda_prior":
            return (value[0], float(value[1]), float(value[2]))
        return (float(value[0]), float(value[1]))
    raise ConfigError(f"field '{name}': cannot parse {value!r}")


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a key/value mapping")
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return raw


def build_config(args) -> RunConfig:
    """File values first, then CLI overrides, then validation."""
    raw = load_config_file(args.config) if getattr(args, "config", None) else {}
    cfg = RunConfig()
    if "lambda_prior" in raw:
        cfg.lambda_prior = _parse_prior(raw["lambda_prior"], "lambda_prior")
    if "conc_prior" in raw:
        cfg.conc_prior = _parse_prior(raw["conc_prior"], "conc_prior")
    if "base_measure" in raw:
        bm = raw["base_measure"]
        cfg.base_measure = (
            float(bm["mu0"]), float(bm["tau0"]), float(bm["eps1"]), float(bm["eps2"])
        )
    for key in ("sampler", "seed", "iterations", "burn_in", "thin", "kernel",
                "dirichlet_alpha", "dataset", "grid_points", "tail", "out",
                "jobs", "deterministic", "kde"):
        if key in raw:
            setattr(cfg, key, raw[key])
    for key in ("sampler", "seed", "iterations", "burn_in", "thin", "kernel",
                "grid_points", "tail", "out", "jobs"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "deterministic", False):
        cfg.deterministic = True
    if getattr(args, "kde", False):
        cfg.kde = True
    if getattr(args, "lambda_prior", None):
        cfg.lambda_prior = _parse_prior(args.lambda_prior, "lambda_prior")
    if getattr(args, "conc_prior", None):
        cfg.conc_prior = _parse_prior(args.conc_prior, "conc_prior")
    ds = dict(cfg.dataset or {})
    if getattr(args, "generator", None):
        ds = {"generator": args.generator}
        for k in ("m", "n", "xi", "scenario"):
            v = getattr(args, k, None)
            if v is not None:
                ds[k] = v
    if getattr(args, "data_file", None):
        ds = {"file": args.data_file}
    if getattr(args, "pbcseq", None):
        ds = {"pbcseq": args.pbcseq}
    cfg.dataset = ds
    return cfg.validate()


def child_seed(seed: int, index: int) -> int:
    """Deterministic derived seed for sub-tasks (data vs chains, replicas)."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def resolve_dataset(cfg: RunConfig) -> experiments.GroupedDataset:
    ds = cfg.dataset
    if not ds:
        raise ConfigError("field 'dataset': no generator or file given")
    if "file" in ds:
        return experiments.load_dataset(ds["file"], name=Path(ds["file"]).stem)
    if "pbcseq" in ds:
        return experiments.load_pbcseq(ds["pbcseq"])
    gen = ds.get("generator")
    data_seed = ds.get("seed", child_seed(cfg.seed, 0))
    if gen == "nested":
        return experiments.gen_nested(int(ds.get("m", 4)), ds.get("n"), seed=data_seed)
    if gen == "sparse":
        return experiments.gen_sparse_scalable(
            int(ds.get("m", 2)), int(ds.get("n", 20)), float(ds.get("xi", 10.0)),
            seed=data_seed,
        )
    if gen == "seven_mix":
        return experiments.gen_seven_mix(seed=data_seed)
    if gen == "gamma_mix":
        return experiments.gen_gamma_mix(seed=data_seed)
    if gen == "borrowing":
        return experiments.gen_borrowing(int(ds.get("scenario", 1)), seed=data_seed)
    raise ConfigError(f"field 'dataset': unknown generator {gen!r}")


def chain_kwargs(cfg: RunConfig, dataset, sampler: str, seed: int, grid) -> dict:
    kernel = cfg.kernel or dataset.kernel
    hyper = (
        BaseMeasureHyper(*cfg.base_measure)
        if cfg.base_measure is not None
        else (dataset.hyper or pdgsbp.DEFAULT_HYPER)
    )
    alpha = (
        cfg.dirichlet_alpha
        if cfg.dirichlet_alpha is not None
        else dataset.dirichlet_alpha
    )
    kwargs = dict(
        iterations=cfg.iterations,
        burn_in=cfg.burn_in,
        thin=cfg.thin,
        seed=seed,
        kernel=kernel,
        hyper=hyper,
        dirichlet_alpha=alpha,
        tail=cfg.tail,
        grid=None if cfg.kde else grid,
        record_predictive_samples=cfg.kde,
    )
    if sampler == "pdgsbp":
        kwargs["lambda_prior"] = cfg.lambda_prior
    else:
        kwargs["conc_prior"] = cfg.conc_prior
    return kwargs


def _chain_task(payload):
    sampler, dataset, kwargs = payload
    mod = pdgsbp if sampler == "pdgsbp" else rpddp
    return mod.run_chain(dataset, **kwargs)


def run_chains(tasks: list[tuple], jobs: int) -> list:
    """Run (sampler, dataset, kwargs) tasks, concurrently when jobs > 1."""
    if jobs <= 1 or len(tasks) <= 1:
        return [_chain_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_chain_task, tasks))


def predictive_of(trace, cfg: RunConfig, grid):
    if cfg.kde:
        return experiments.kde_predictive(trace, grid)
    return experiments.predictive_grid(trace)


def _echo(cfg: RunConfig, outdir: Path, extra: dict | None = None):
    resolved = asdict(cfg)
    resolved["lambda_prior"] = list(cfg.lambda_prior)
    resolved["conc_prior"] = list(cfg.conc_prior)
    if extra:
        resolved.update(extra)
    reports.echo_config(outdir / "config.yaml", resolved)


def _hellinger_rows(dataset, grids: dict) -> tuple[list[str], list[list]]:
    header = ["group", "n"] + [f"hellinger_{label}" for label in grids]
    rows = []
    for j in range(dataset.m):
        row = [j + 1, len(dataset.groups[j])]
        for label, grid in grids.items():
            if dataset.true is None:
                row.append("")
            else:
                truth = dataset.true[j].pdf(grid.x)
                row.append(repr(experiments.hellinger(truth, grid.values[j], grid.x)))
        rows.append(row)
    return header, rows


def _selection_rows(dataset, traces: dict, m: int) -> tuple[list[str], list[list]]:
    header = ["source", "row"] + [f"p_{l + 1}" for l in range(m)]
    rows = []
    for label, trace in traces.items():
        mean = experiments.posterior_selection_mean(trace)
        for j in range(m):
            rows.append([label, j + 1] + [repr(float(v)) for v in mean[j]])
    if dataset.p_true is not None:
        for j in range(m):
            rows.append(["true", j + 1] + [repr(float(v)) for v in dataset.p_true[j]])
    return header, rows


def cmd_generate(args) -> int:
    cfg = build_config(args)
    dataset = resolve_dataset(cfg)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    experiments.save_dataset(dataset, outdir / "data.csv")
    _echo(cfg, outdir, {"command": "generate", "sizes": dataset.sizes})
    print(f"wrote {outdir / 'data.csv'} ({dataset.m} groups, sizes {dataset.sizes})")
    return 0


def cmd_fit(args) -> int:
    cfg = build_config(args)
    dataset = resolve_dataset(cfg)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = experiments.evaluation_grid(dataset, cfg.grid_points)
    kwargs = chain_kwargs(cfg, dataset, cfg.sampler, child_seed(cfg.seed, 1), grid)
    trace = _chain_task((cfg.sampler, dataset, kwargs))
    predictive = predictive_of(trace, cfg, grid)
    experiments.save_dataset(dataset, outdir / "data.csv")
    trace.to_csv(outdir / f"trace_{cfg.sampler}.csv", deterministic=cfg.deterministic)
    if trace.density is not None:
        trace.density_to_csv(outdir / "grid.csv", outdir / f"density_{cfg.sampler}.csv")
    header, rows = _hellinger_rows(dataset, {cfg.sampler: predictive})
    reports.write_table(outdir / "report.csv", header, rows)
    sel_header, sel_rows = _selection_rows(dataset, {cfg.sampler: trace}, dataset.m)
    reports.write_table(outdir / "selection.csv", sel_header, sel_rows)
    reports.plot_predictive(
        outdir / "predictive.svg", dataset, {cfg.sampler: predictive}, cfg.deterministic
    )
    _echo(cfg, outdir, {"command": "fit", "sizes": dataset.sizes})
    print(f"fit complete: {outdir / 'report.csv'}")
    return 0


def cmd_compare(args) -> int:
    cfg = build_config(args)
    dataset = resolve_dataset(cfg)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = experiments.evaluation_grid(dataset, cfg.grid_points)
    tasks = [
        ("pdgsbp", dataset, chain_kwargs(cfg, dataset, "pdgsbp", child_seed(cfg.seed, 1), grid)),
        ("rpddp", dataset, chain_kwargs(cfg, dataset, "rpddp", child_seed(cfg.seed, 2), grid)),
    ]
    traces = dict(zip(("pdgsbp", "rpddp"), run_chains(tasks, cfg.jobs)))
    grids = {name: predictive_of(t, cfg, grid) for name, t in traces.items()}
    experiments.save_dataset(dataset, outdir / "data.csv")
    for name, trace in traces.items():
        trace.to_csv(outdir / f"trace_{name}.csv", deterministic=cfg.deterministic)
    header, rows = _hellinger_rows(dataset, grids)
    reports.write_table(outdir / "report.csv", header, rows)
    sel_header, sel_rows = _selection_rows(dataset, traces, dataset.m)
    reports.write_table(outdir / "selection.csv", sel_header, sel_rows)
    met_rows = [
        [name, repr(float(t.wall_nanos.mean() * 1e-9 * 1000))] for name, t in traces.items()
    ]
    reports.write_table(outdir / "met.csv", ["sampler", "met_seconds_per_1e3"], met_rows)
    reports.plot_predictive(outdir / "predictive.svg", dataset, grids, cfg.deterministic)
    _echo(cfg, outdir, {"command": "compare", "sizes": dataset.sizes})
    print(f"comparison complete: {outdir / 'report.csv'}")
    return 0


def cmd_bench(args) -> int:
    cfg = build_config(args)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    ms = [int(v) for v in args.ms.split(",")]
    generator = args.generator or "nested"
    rows = []
    met_by_model = {"pdgsbp": [], "rpddp": []}
    for m in ms:
        if generator == "nested":
            data = experiments.gen_nested(m, seed=child_seed(cfg.seed, m))
        else:
            data = experiments.gen_sparse_scalable(m, seed=child_seed(cfg.seed, m))
        results = {}
        for sampler in ("pdgsbp", "rpddp"):
            res = experiments.benchmark_met(
                sampler, data, iterations=args.block_iters, blocks=args.blocks,
                seed=child_seed(cfg.seed, 100 + m),
            )
            results[sampler] = res
            met_by_model[sampler].append(res.met_mean)
        ratio = results["rpddp"].met_mean / results["pdgsbp"].met_mean
        comp_ratio = (
            results["rpddp"].comparisons_per_iter / results["pdgsbp"].comparisons_per_iter
        )
        for sampler in ("pdgsbp", "rpddp"):
            res = results[sampler]
            rows.append(
                [
                    m, sampler, res.n_total,
                    repr(res.met_mean), repr(res.met_se),
                    repr(res.comparisons_per_iter),
                    repr(ratio) if sampler == "rpddp" else "",
                    repr(comp_ratio) if sampler == "rpddp" else "",
                ]
            )
    reports.write_table(
        outdir / "bench.csv",
        ["m", "sampler", "n_total", "met_seconds_per_1e3", "met_se",
         "comparisons_per_iter", "met_ratio", "comparison_ratio"],
        rows,
    )
    reports.plot_met_curve(outdir / "bench.svg", ms, met_by_model, cfg.deterministic)
    _echo(cfg, outdir, {"command": "bench", "ms": ms,
                        "block_iters": args.block_iters, "blocks": args.blocks})
    print(f"benchmark complete: {outdir / 'bench.csv'}")
    return 0


REPRODUCE_TARGETS = {
    "table1": "nested m=4 Hellinger distances, both samplers",
    "figure2": "nested m=4 histograms with predictive overlays (same run as table1)",
    "table2": "nested m in {2,3,4} mean execution times and ratios",
    "table3": "sparse m=10 Hellinger distances, both samplers",
    "figure4": "sparse m=10 histograms with overlays (same run as table3)",
    "figure3": "sparse-design MET scaling curve over m",
    "table4": "seven-component normal mixtures, Hellinger distances",
    "figure5": "seven-mix histograms with overlays (same run as table4)",
    "table5": "gamma mixtures: Hellinger distances and selection matrices",
    "figure6": "gamma-mix histograms with overlays (same run as table5)",
    "table6": "borrowing-of-strength scenarios, Hellinger medians over seeds",
    "figure7": "borrowing-scenario histograms with overlays (same run as table6)",
    "figure8": "liver-study SGOT comparison (requires --pbcseq PATH)",
}


def _reproduce_compare(cfg: RunConfig, dataset, outdir: Path) -> dict:
    grid = experiments.evaluation_grid(dataset, cfg.grid_points)
    tasks = [
        (s, dataset, chain_kwargs(cfg, dataset, s, child_seed(cfg.seed, i + 1), grid))
        for i, s in enumerate(("pdgsbp", "rpddp"))
    ]
    traces = dict(zip(("pdgsbp", "rpddp"), run_chains(tasks, cfg.jobs)))
    grids = {name: predictive_of(t, cfg, grid) for name, t in traces.items()}
    header, rows = _hellinger_rows(dataset, grids)
    reports.write_table(outdir / "hellinger.csv", header, rows)
    sel_header, sel_rows = _selection_rows(dataset, traces, dataset.m)
    reports.write_table(outdir / "selection.csv", sel_header, sel_rows)
    reports.plot_predictive(outdir / "predictive.svg", dataset, grids, cfg.deterministic)
    return traces


def cmd_reproduce(args) -> int:
    target = args.target
    if target not in REPRODUCE_TARGETS:
        raise ConfigError(
            f"unknown reproduce target {target!r}; choose from {sorted(REPRODUCE_TARGETS)}"
        )
    cfg = build_config(args)
    outdir = Path(cfg.out) / target
    outdir.mkdir(parents=True, exist_ok=True)
    if target in ("table1", "figure2"):
        dataset = experiments.gen_nested(4, seed=child_seed(cfg.seed, 0))
        _reproduce_compare(cfg, dataset, outdir)
    elif target == "table2":
        args.ms = "2,3,4"
        args.generator = "nested"
        args.out = str(outdir)
        return cmd_bench(args)
    elif target in ("table3", "figure4"):
        cfg.thin = max(cfg.thin, 20)
        cfg.grid_points = min(cfg.grid_points, 1024)
        dataset = experiments.gen_sparse_scalable(10, seed=child_seed(cfg.seed, 0))
        _reproduce_compare(cfg, dataset, outdir)
    elif target == "figure3":
        args.ms = args.ms or "2,3,4,5,6"
        args.generator = "sparse"
        args.out = str(outdir)
        return cmd_bench(args)
    elif target in ("table4", "figure5"):
        dataset = experiments.gen_seven_mix(seed=child_seed(cfg.seed, 0))
        _reproduce_compare(cfg, dataset, outdir)
    elif target in ("table5", "figure6"):
        dataset = experiments.gen_gamma_mix(seed=child_seed(cfg.seed, 0))
        _reproduce_compare(cfg, dataset, outdir)
    elif target in ("table6", "figure7"):
        _reproduce_borrowing(cfg, outdir)
    elif target == "figure8":
        if not getattr(args, "pbcseq", None):
            raise ConfigError("figure8 needs --pbcseq PATH (the data is not bundled)")
        dataset = experiments.load_pbcseq(args.pbcseq)
        _reproduce_compare(cfg, dataset, outdir)
    _echo(cfg, outdir, {"command": f"reproduce {target}"})
    print(f"reproduce {target}: outputs in {outdir}")
    return 0


def _reproduce_borrowing(cfg: RunConfig, outdir: Path, n_seeds: int = 5):
    rows = []
    med_rows = []
    for scenario in (1, 2, 3):
        locals_h = {j: [] for j in range(3)}
        tasks = []
        datasets = []
        for rep in range(n_seeds):
            data_seed = child_seed(cfg.seed, 10 * scenario + rep)
            dataset = experiments.gen_borrowing(scenario, seed=data_seed)
            grid = experiments.evaluation_grid(dataset, cfg.grid_points)
            kwargs = chain_kwargs(
                cfg, dataset, "pdgsbp", child_seed(cfg.seed, 1000 + 10 * scenario + rep), grid
            )
            tasks.append(("pdgsbp", dataset, kwargs))
            datasets.append((dataset, grid))
        traces = run_chains(tasks, cfg.jobs)
        for rep, (trace, (dataset, grid)) in enumerate(zip(traces, datasets)):
            predictive = predictive_of(trace, cfg, grid)
            if rep == 0:
                reports.plot_predictive(
                    outdir / f"predictive_s{scenario}.svg", dataset,
                    {"pdgsbp": predictive}, cfg.deterministic,
                )
            for j in range(3):
                truth = dataset.true[j].pdf(predictive.x)
                h = experiments.hellinger(truth, predictive.values[j], predictive.x)
                locals_h[j].append(h)
                rows.append([scenario, rep, j + 1, repr(h)])
        med_rows.append(
            [scenario] + [repr(statistics.median(locals_h[j])) for j in range(3)]
        )
    reports.write_table(
        outdir / "hellinger_all.csv", ["scenario", "replicate", "group", "hellinger"], rows
    )
    reports.write_table(
        outdir / "hellinger_median.csv",
        ["scenario", "median_h_group1", "median_h_group2", "median_h_group3"],
        med_rows,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdmix",
        description="Pairwise-dependent mixture inference for grouped data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def shared(p):
        p.add_argument("--config", help="YAML config file; flags override its values")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--jobs", type=int)
        p.add_argument("--deterministic", action="store_true",
                       help="suppress timestamp metadata for byte-identical SVGs")
        p.add_argument("--kde", action="store_true",
                       help="predictive via KDE over sampled draws instead of "
                            "pointwise posterior averaging")

    def dataset_flags(p):
        p.add_argument("--generator",
                       choices=["nested", "sparse", "seven_mix", "gamma_mix", "borrowing"])
        p.add_argument("--m", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--xi", type=float)
        p.add_argument("--scenario", type=int)
        p.add_argument("--data-file", dest="data_file")
        p.add_argument("--pbcseq")

    def chain_flags(p):
        p.add_argument("--sampler", choices=["pdgsbp", "rpddp"])
        p.add_argument("--iterations", type=int)
        p.add_argument("--burn-in", dest="burn_in", type=int)
        p.add_argument("--thin", type=int)
        p.add_argument("--kernel", choices=["normal", "lognormal"])
        p.add_argument("--grid-points", dest="grid_points", type=int)
        p.add_argument("--tail", choices=["prior_predictive", "truncate"])
        p.add_argument("--lambda-prior", dest="lambda_prior",
                       help="kind,a,b e.g. tg,1.1,1.1 or beta,1,1")
        p.add_argument("--conc-prior", dest="conc_prior", help="a,b e.g. 1.1,1.1")

    p_gen = sub.add_parser("generate", help="write a dataset CSV")
    shared(p_gen)
    dataset_flags(p_gen)
    p_gen.set_defaults(func=cmd_generate)

    p_fit = sub.add_parser("fit", help="run one sampler and report")
    shared(p_fit)
    dataset_flags(p_fit)
    chain_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_cmp = sub.add_parser("compare", help="run both samplers side by side")
    shared(p_cmp)
    dataset_flags(p_cmp)
    chain_flags(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_bench = sub.add_parser("bench", help="mean execution times over m")
    shared(p_bench)
    p_bench.add_argument("--ms", default="2,3,4", help="comma-separated group counts")
    p_bench.add_argument("--generator", choices=["nested", "sparse"], default="nested")
    p_bench.add_argument("--block-iters", dest="block_iters", type=int, default=120)
    p_bench.add_argument("--blocks", type=int, default=10)
    p_bench.set_defaults(func=cmd_bench)

    p_rep = sub.add_parser("reproduce", help="recreate a study table or figure at desk scale")
    p_rep.add_argument("target", help="; ".join(f"{k}: {v}" for k, v in REPRODUCE_TARGETS.items()))
    shared(p_rep)
    chain_flags(p_rep)
    p_rep.add_argument("--pbcseq")
    p_rep.add_argument("--ms", default=None)
    p_rep.add_argument("--block-iters", dest="block_iters", type=int, default=120)
    p_rep.add_argument("--blocks", type=int, default=10)
    p_rep.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
