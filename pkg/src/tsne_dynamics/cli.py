"""Command-line experiments.

    tsne-dynamics run        --preset gmm --theory-delta 0.333 --seed 7 --out out/
    tsne-dynamics compare    --preset gmm --theory-delta 0.5 --sweep 100,200,400
    tsne-dynamics early-stop --preset gmm --n 600 --rho2 21.54

Exit codes: 0 ok, 1 bad configuration, 2 input/output error, 3 numerical
failure (divergence, calibration).
"""

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import datagen, diagnostics, output
from .affinity import joint_affinities
from .engine import resolve_init, run
from .errors import CSVFormatError, IDXFormatError, NumericalError
from .spectral import ComponentLabels
from .theory import early_stop_schedule, theory_tuning

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_DELTA = 1.0 / 3.0


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    preset: str = None
    idx: str = None
    idx_labels: str = None
    csv: str = None
    csv_labels: bool = False
    digits: tuple = (2, 4, 6, 8)
    per_digit: int = None
    n: int = None
    p: int = None
    rho2: float = None
    clusters: int = None
    theory_delta: float = None
    alpha: float = None
    h: float = None
    h_prime: float = None
    k0: int = None
    k1: int = None
    perplexity: float = 30.0
    perplexity_per_cluster: float = None
    init: str = "random"
    sigma_n: float = None
    seed: int = 0
    out: str = "out"
    stride: int = 10
    sweep: tuple = None
    schedule_only: bool = False
    extra: dict = field(default_factory=dict)

    def source(self):
        given = [s for s in ("preset", "idx", "csv") if getattr(self, s) is not None]
        if len(given) > 1:
            raise ConfigError(f"choose one data source, got {', '.join(given)}")
        return given[0] if given else "preset"

    def describe(self):
        d = dataclasses.asdict(self)
        d.pop("extra")
        d.pop("out")
        return d


# ---------------------------------------------------------------------------
# config -> data, params


def load_data(cfg, n=None):
    src = cfg.source()
    n = n if n is not None else cfg.n
    if src == "preset":
        name = cfg.preset or "gmm"
        if name == "gmm":
            kw = {k: v for k, v in (("n", n), ("p", cfg.p), ("rho2", cfg.rho2)) if v is not None}
            if cfg.clusters is not None and cfg.clusters != len(datagen.GMM_PROPORTIONS):
                # other cluster counts get uniform weights
                kw.update(R=cfg.clusters, pi=np.full(cfg.clusters, 1.0 / cfg.clusters))
            return datagen.gmm_preset(seed=cfg.seed, **kw)
        if name == "spheres":
            kw = {k: v for k, v in (("n", n), ("p", cfg.p)) if v is not None}
            return datagen.spheres_preset(seed=cfg.seed, **kw)
        raise ConfigError(f"unknown preset {name!r}")
    if src == "idx":
        if cfg.idx_labels is None:
            X = datagen.load_idx(cfg.idx)
            if n is not None:
                X = X[:n]
            return datagen.LabeledData(X, np.zeros(X.shape[0], dtype=np.int64), 1)
        return datagen.mnist_subset(cfg.idx, cfg.idx_labels, cfg.digits,
                                    cfg.per_digit, seed=cfg.seed)
    data = datagen.load_csv(cfg.csv, has_labels=cfg.csv_labels)
    if n is not None:
        data = datagen.LabeledData(data.data[:n], *datagen.remap_labels(data.labels[:n]))
    return data


def build_params(cfg, n, **override):
    """Theory tuning for ``n`` (delta defaults to 1/3), then explicit flags on top."""
    delta = cfg.theory_delta if cfg.theory_delta is not None else DEFAULT_DELTA
    if not 0 < delta < 1:
        raise ConfigError("--theory-delta must lie in (0, 1)")
    if n < 10:
        raise ConfigError("need at least 10 points")
    base = theory_tuning(n, delta, override.pop("perplexity", cfg.perplexity),
                         K1=cfg.k1, seed=cfg.seed)
    fields = {"alpha": cfg.alpha, "h": cfg.h, "h_prime": cfg.h_prime,
              "K0": cfg.k0, "K1": cfg.k1, "sigma_n": cfg.sigma_n}
    fields.update(override)
    changes = {k: v for k, v in fields.items() if v is not None}
    if cfg.theory_delta is None and changes:
        changes["delta"] = None
    try:
        return dataclasses.replace(base, **changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def perplexity_for(cfg, data):
    """Fixed ``--perplexity``, or a fraction of the average cluster size."""
    if cfg.perplexity_per_cluster is None:
        return cfg.perplexity
    return cfg.perplexity_per_cluster * data.n / data.R


def _affinities(cfg, data):
    perp = perplexity_for(cfg, data)
    if not 1 < perp <= data.n - 1:
        raise ConfigError(f"perplexity must lie in (1, {data.n - 1}], got {perp:g}")
    P, _ = joint_affinities(data.data, perp)
    return P


def _labels(data):
    lab = data.labels
    if np.bincount(lab, minlength=data.R).min() == 0:
        lab, _ = datagen.remap_labels(lab)
    return ComponentLabels.from_labels(lab)


def _prepare_out(path):
    os.makedirs(path, exist_ok=True)
    probe = os.path.join(path, ".write-test")
    with open(probe, "w"):
        pass
    os.remove(probe)


def _dump_json(path, obj):
    with open(path, "w") as f:
        json.dump(diagnostics._jsonable(obj), f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# commands


def cmd_run(cfg):
    """One two-stage run; writes the final embedding, trajectory, report and plot."""
    data = load_data(cfg)
    params = build_params(cfg, data.n, perplexity=perplexity_for(cfg, data))
    _prepare_out(cfg.out)
    P = _affinities(cfg, data)
    log = run(P, params, init=cfg.init, ee_stride=1, embed_stride=cfg.stride)
    labels = _labels(data)
    report = diagnostics.build_report(
        log, P, labels,
        metadata={"config": cfg.describe(), "data": data.metadata},
    )
    output.write_embedding_csv(os.path.join(cfg.out, "embedding_final.csv"), log.final, data.labels)
    output.write_trajectory_jsonl(os.path.join(cfg.out, "trajectory.jsonl"), log.snapshots)
    output.write_report(os.path.join(cfg.out, "report.json"), report)
    output.render_svg(log.final, data.labels, os.path.join(cfg.out, "final.svg"))
    output.render_svg(log.end_of_ee, data.labels, os.path.join(cfg.out, "end_of_ee.svg"))
    return EXIT_OK


def _compare_one(cfg, n):
    data = load_data(cfg, n=n)
    params = build_params(cfg, data.n, K1=0, perplexity=perplexity_for(cfg, data))
    P = _affinities(cfg, data)
    log = run(P, params, init=cfg.init, ee_stride=1)
    dev = diagnostics.surrogate_deviation(log, P)
    return {"n": data.n, "K0": params.K0, "alpha": params.alpha, "h": params.h,
            "k": dev.ks, "deviation": dev.values, "sup": float(dev.values.max())}


def cmd_compare(cfg):
    """Engine vs linear-surrogate deviation over the exaggeration stage.

    With ``sweep`` the comparison runs once per sample size and reports
    whether the sup deviation is non-increasing in n (20% slack).
    """
    _prepare_out(cfg.out)
    sizes = list(cfg.sweep) if cfg.sweep else [None]
    runs = [_compare_one(cfg, n) for n in sizes]
    sups = [r["sup"] for r in runs]
    result = {"config": cfg.describe(), "runs": runs}
    if len(runs) > 1:
        result["non_increasing"] = all(b <= 1.2 * a for a, b in zip(sups, sups[1:]))
    _dump_json(os.path.join(cfg.out, "compare.json"), result)
    output.render_series_svg([r["deviation"] for r in runs],
                             os.path.join(cfg.out, "compare.svg"),
                             labels=["n=%d" % r["n"] for r in runs])
    return EXIT_OK


def cmd_early_stop_study(cfg):
    """Three runs differing only in the exaggeration length, from one initialization."""
    n_target = cfg.n
    if cfg.schedule_only:
        if n_target is None:
            raise ConfigError("--schedule-only needs --n")
        _prepare_out(cfg.out)
        sched = early_stop_schedule(n_target)
        _dump_json(os.path.join(cfg.out, "early_stop.json"), {"n": n_target, "K0": list(sched)})
        return EXIT_OK
    data = load_data(cfg)
    n = data.n
    sched = early_stop_schedule(n)
    _prepare_out(cfg.out)
    P = _affinities(cfg, data)
    labels = _labels(data)
    base = build_params(cfg, n, perplexity=perplexity_for(cfg, data))
    init = resolve_init(cfg.init, P, base)
    total = base.K0 + base.K1
    rows, ee_states, final_states = [], [], []
    for K0 in sched:
        K1 = cfg.k1 if cfg.k1 is not None else max(0, total - K0)
        params = dataclasses.replace(base, K0=K0, K1=K1)
        log = run(P, params, init=init, ee_stride=max(1, K0), embed_stride=max(1, K1))
        ee_states.append(log.end_of_ee)
        final_states.append(log.final)
        rows.append({
            "K0": K0, "K1": K1,
            "separation_ratio_end_of_ee": diagnostics.separation_ratio(log.end_of_ee, labels),
            "separation_ratio_final": diagnostics.separation_ratio(log.final, labels),
            "initial_checksum": float(np.abs(log.initial.coords).sum()),
        })
    _dump_json(os.path.join(cfg.out, "early_stop.json"),
               {"n": n, "K0": list(sched), "runs": rows, "config": cfg.describe()})
    caps = ["K0=%d" % k for k in sched]
    output.render_panels(ee_states, data.labels, os.path.join(cfg.out, "early_stop_ee.svg"), caps)
    output.render_panels(final_states, data.labels, os.path.join(cfg.out, "early_stop_final.svg"), caps)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "early-stop": cmd_early_stop_study}


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_common(p):
    src = p.add_argument_group("data")
    src.add_argument("--preset", choices=("gmm", "spheres"))
    src.add_argument("--idx", help="IDX image file (optionally .gz)")
    src.add_argument("--idx-labels", help="IDX label file; enables digit subsetting")
    src.add_argument("--digits", type=_int_list, default=(2, 4, 6, 8))
    src.add_argument("--per-digit", type=int)
    src.add_argument("--csv", help="numeric CSV file")
    src.add_argument("--csv-labels", action="store_true", help="last CSV column is a label")
    src.add_argument("--n", type=int, help="sample size (presets) or row limit")
    src.add_argument("--p", type=int, help="dimension for presets")
    src.add_argument("--rho2", type=float, help="squared mean separation for the gmm preset")
    src.add_argument("--clusters", type=int, help="number of gmm preset components (uniform weights unless 6)")

    tune = p.add_argument_group("tuning")
    tune.add_argument("--theory-delta", type=float)
    tune.add_argument("--alpha", type=float)
    tune.add_argument("--h", type=float)
    tune.add_argument("--h-prime", type=float)
    tune.add_argument("--k0", type=int)
    tune.add_argument("--k1", type=int)
    tune.add_argument("--perplexity", type=float, default=30.0)
    tune.add_argument("--perplexity-per-cluster", type=float,
                      help="perplexity as this fraction of n / R instead of --perplexity")
    tune.add_argument("--init", choices=("random", "spectral"), default="random")
    tune.add_argument("--sigma-n", type=float)
    tune.add_argument("--seed", type=int, default=0)

    io = p.add_argument_group("output")
    io.add_argument("--out", default="out")
    io.add_argument("--stride", type=int, default=10, help="embedding-stage snapshot stride")


def build_parser():
    parser = _Parser(prog="tsne-dynamics", description="Exact two-stage t-SNE experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add_common(sub.add_parser("run", help="run the two-stage iteration and write artifacts"))
    cmp_ = sub.add_parser("compare", help="engine vs linear surrogate over early exaggeration")
    _add_common(cmp_)
    cmp_.add_argument("--sweep", type=_int_list, help="sample sizes, e.g. 100,200,400")
    es = sub.add_parser("early-stop", help="compare three early exaggeration lengths")
    _add_common(es)
    es.add_argument("--schedule-only", action="store_true",
                    help="only write the three exaggeration lengths for --n")
    return parser


def config_from_args(args):
    cfg = ExperimentConfig()
    for f in dataclasses.fields(ExperimentConfig):
        if f.name != "extra" and hasattr(args, f.name):
            setattr(cfg, f.name, getattr(args, f.name))
    if cfg.stride < 1:
        raise ConfigError("--stride must be >= 1")
    return cfg


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse: --help (0) or usage error (1)
        return exc.code
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, (IDXFormatError, CSVFormatError)):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
