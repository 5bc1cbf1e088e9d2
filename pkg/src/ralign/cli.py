"""``ralign`` command line.

Exit codes: 0 success, 1 internal error, 2 invalid input, 3 an asserted
inequality failed. Errors are written to stderr as one JSON object with a
machine-readable ``error`` code. Reports go to ``--out`` as canonical JSON
(or CSV with ``--format csv``) and a readable table goes to stdout.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, field

import numpy as np

from . import _accel, concentration, io_formats, metrics, stitching, synth, task
from .core import PairedDataset, RepresentationSet
from .errors import AlignmentError, MismatchedSampleCount, ValidationError
from .kernels import KernelSpec, center_matrix, gram

DEFAULT_SEED = 0
TASK_METRICS = ("kta", "kare", "cumulative_power", "source_condition", "parzen")
STITCH_MODES = ("lemma2", "thm2", "lower", "sandwich", "fit-only")

# flags that change how a run executes but never what it outputs
_NOT_ECHOED = {"seed_given", "threads", "out", "left_out", "right_out", "targets_out", "csv_out", "func"}


@dataclass
class RunConfig:
    subcommand: str
    options: dict = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    threads: int = 1

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        opts = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED and k != "command"}
        return cls(args.command, opts, args.seed, args.threads)

    def echo(self) -> dict:
        return {"subcommand": self.subcommand, **{k: v for k, v in self.options.items() if v is not None}}


# ------------------------------------------------------------------ helpers


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse number list {text!r}") from None


def _ints(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse integer list {text!r}") from None


def _metric_list(text: str, allowed) -> list:
    if text == "all":
        return list(allowed)
    names = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in allowed]
    if bad:
        raise ValidationError(f"unknown metric(s) {bad}; choose from {list(allowed)}")
    return names


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _table(rows) -> str:
    rows = [(str(k), _fmt(v)) for k, v in rows]
    if not rows:
        return ""
    w = max(len(k) for k, _ in rows)
    return "".join(f"{k.ljust(w)}  {v}\n" for k, v in rows)


def _metric_csv(values: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "value"])
    for k in sorted(values):
        v = values[k]
        if isinstance(v, (list, tuple)):
            for item in v:
                w.writerow([k, _fmt(item)])
        else:
            w.writerow([k, _fmt(v)])
    return buf.getvalue()


def _emit(args, payload, table_rows, csv_text: str | None = None) -> None:
    cfg = RunConfig.from_args(args)
    if args.out:
        if getattr(args, "format", "json") == "csv" and csv_text is not None:
            io_formats._write_bytes(args.out, csv_text.encode("utf-8"))
        else:
            io_formats.write_report(payload, args.out, cfg.echo())
    sys.stdout.write(_table(table_rows))


def _kernels(args) -> tuple[KernelSpec, KernelSpec]:
    k1 = KernelSpec.parse(args.kernel, args.normalize)
    k2 = KernelSpec.parse(args.kernel2, args.normalize) if args.kernel2 else k1
    return k1, k2


def _pair(args, targets=None) -> PairedDataset:
    left = io_formats.read_any_repr(args.left, args.has_header)
    right = io_formats.read_any_repr(args.right, args.has_header)
    return PairedDataset(left, right, targets)


def _head(args, d2: int):
    kind = getattr(args, "head", "linear")
    if args.head_weights is None:
        if kind == "tanh":
            raise ValidationError("--head tanh needs --head-weights")
        return None
    V = io_formats.read_matrix(args.head_weights)
    if kind == "linear":
        return stitching.HeadFunction.linear(V)
    out = io_formats.read_matrix(args.head_out) if args.head_out else None
    bias = io_formats.read_matrix(args.head_bias).reshape(-1) if args.head_bias else None
    return stitching.HeadFunction.tanh_linear(V, bias, out)


# -------------------------------------------------------------- subcommands


def cmd_align(args) -> int:
    spec1, spec2 = _kernels(args)
    names = _metric_list(args.metric, metrics.METRIC_NAMES)
    p = _pair(args)
    rep = metrics.align(
        p, names, spec1, spec2, kappa=args.kappa, ridge=args.ridge, centered=args.center, unbiased=args.unbiased
    )
    rep.validate()
    _emit(args, rep, [(k, rep.metrics[k]) for k in names], _metric_csv(rep.metrics))
    return 0


def cmd_task(args) -> int:
    spec = KernelSpec.parse(args.kernel, args.normalize)
    f = io_formats.read_any_repr(args.repr, args.has_header)
    y = io_formats.read_matrix(args.targets, args.has_header)
    if y.shape[0] != f.sample_count:
        raise MismatchedSampleCount(f"targets have {y.shape[0]} rows, representation has {f.sample_count}")
    K = gram(f, spec).entries
    if args.center:
        K = center_matrix(K)
    explicit = args.metric != "all"
    names = _metric_list(args.metric, TASK_METRICS)
    vec = y[:, 0] if y.ndim == 2 and y.shape[1] == 1 else y
    out, extras = {}, {}
    for name in names:
        if name == "kta":
            out["kta"] = task.kta(K, vec)
        elif name == "kare":
            lams = _floats(args.lambdas)
            est = task.KareEstimator(K, y)
            out["kare"] = [[lam, v] for lam, v in est.sweep(lams)]
        elif name == "cumulative_power":
            out["cumulative_power"] = task.cumulative_power(task.TaskSpectrumProfile.from_gram(K, vec)).tolist()
        elif name == "source_condition":
            res = task.source_condition_diagnostic(task.TaskSpectrumProfile.from_gram(K, vec), args.source_r)
            out["source_condition"] = res.partial_sum
            extras["source_condition"] = res.to_dict()
        elif name == "parzen":
            binary = vec.ndim == 1 and np.all(np.isin(vec, (-1.0, 1.0)))
            if not binary and not explicit:
                extras["parzen"] = "skipped: targets are not in {-1, +1}"
                continue
            res = task.parzen_risk_from_gram(K, vec)
            out["parzen_risk"] = res.risk
            out["parzen_bound"] = res.bound
            extras["parzen"] = res.to_dict()
    rep = metrics.AlignmentReport(
        metrics=out,
        conventions={"centered": bool(args.center), "kare_normalization": "eigenvalues of K/n"},
        n=f.sample_count,
        kernels={"repr": spec.describe()},
        extras=extras,
    )
    d = rep.to_dict()
    d["kind"] = "task"
    _emit(args, d, list(out.items()), _metric_csv(out))
    return 0


def cmd_stitch(args) -> int:
    y = io_formats.read_matrix(args.targets, args.has_header)
    p = _pair(args, y)
    head = _head(args, p.right.dim)
    ff = None if args.fit_fraction in ("none", "1", "1.0") else float(args.fit_fraction)
    if args.mode == "fit-only":
        rep = stitching.fit_only(p, args.method, args.lam)
    else:
        inst = stitching.StitchInstance(p, head)
        if args.mode == "lemma2":
            rep = stitching.check_lemma_linear_heads(inst, ff, args.seed)
        elif args.mode == "thm2":
            rep = stitching.check_theorem2_bound(inst, ff, args.seed)
        elif args.mode == "lower":
            rep = stitching.check_lower_bound(inst, ff, args.seed)
        else:
            rep = stitching.check_theorem3_sandwich(inst, ff, args.seed)
    rows = [
        ("mode", rep.mode),
        ("stitch_risk", rep.stitch_risk),
        ("a_tilde", rep.a_tilde),
        ("bound_value", rep.bound_value),
    ]
    rows += [(f"R[{k}]", v) for k, v in rep.reference_risks.items()]
    rows += [(f"slack[{q.name}]", q.slack) for q in rep.inequalities]
    rows.append(("ok", rep.ok))
    rows = [(k, v) for k, v in rows if v is not None]
    csv_text = "name,lhs,rhs,slack,satisfied\n" + "".join(
        f"{q.name},{_fmt(q.lhs)},{_fmt(q.rhs)},{_fmt(q.slack)},{q.satisfied}\n" for q in rep.inequalities
    )
    _emit(args, rep, rows, csv_text)
    rep.raise_on_violation()
    return 0


def cmd_synth(args) -> int:
    spec = io_formats.read_spec_config(args.config)
    if args.seed_given:
        spec = spec.with_seed(args.seed)
    else:
        args.seed = spec.seed
        sys.stderr.write(f"ralign: seed={args.seed}\n")
    head = _head(args, spec.d2) if args.head_weights else None
    if head is not None:
        p, oracle = synth.generate_task(spec, head, args.n, args.noise)
    else:
        p, oracle = synth.generate(spec, args.n)
    writer = io_formats.write_csv_repr if args.data_format == "csv" else io_formats.write_repr
    if args.left_out:
        writer(p.left, args.left_out)
    if args.right_out:
        writer(p.right, args.right_out)
    if args.targets_out:
        if p.targets is None:
            raise ValidationError("--targets-out needs a head (--head-weights)")
        writer(RepresentationSet(p.target_matrix(), "targets"), args.targets_out)
    payload = {"kind": "synth", "n": args.n, "spec": spec.to_dict(), "oracles": oracle.to_dict()}
    _emit(args, payload, list(oracle.to_dict().items()))
    return 0


def cmd_concentrate(args) -> int:
    spec = io_formats.read_spec_config(args.config)
    if not args.seed_given:
        args.seed = spec.seed
        sys.stderr.write(f"ralign: seed={args.seed}\n")
    kernel = KernelSpec.parse(args.kernel)
    st = concentration.study(
        spec, _ints(args.n_grid), args.trials, args.delta, kernel, seed=args.seed, threads=args.threads
    )
    rows = []
    for r in st.results:
        rows += [
            (f"n={r.n} bound", r.bound),
            (f"n={r.n} violation_rate", r.violation_rate),
            (f"n={r.n} median_deviation", r.median_deviation),
        ]
    rows.append(("rate_exponent", st.rate_exponent))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "trial", "deviation"])
    for n, t, dev in st.csv_rows():
        w.writerow([n, t, _fmt(dev)])
    if args.csv_out:
        io_formats._write_bytes(args.csv_out, buf.getvalue().encode("utf-8"))
    _emit(args, st, rows, buf.getvalue())
    st.raise_on_violation()
    return 0


# ------------------------------------------------------------------ parsing


class _SeedAction(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        if not 0 <= values < 2**64:
            parser.error("--seed must be an unsigned 64-bit integer")
        setattr(namespace, self.dest, values)
        namespace.seed_given = True


def _common(p: argparse.ArgumentParser, kernels: bool = True) -> None:
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, action=_SeedAction, help="u64 seed (default 0)")
    p.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    p.add_argument("--out", help="write the report here")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="format of --out")
    p.add_argument("--has-header", action="store_true", help="CSV inputs start with a header row")
    if kernels:
        p.add_argument("--kernel", default="linear", help="linear | rbf:<gamma> | rbf:median | precomputed")
        p.add_argument("--normalize", action="store_true", help="rescale kernels to unit diagonal")
        p.add_argument("--center", action="store_true", help="centre Gram matrices")


def _head_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--head", choices=("linear", "tanh"), default="linear", help="kind of the model-2 head")
    p.add_argument("--head-weights", help="matrix W (linear) or V (tanh), one row per output/hidden unit")
    p.add_argument("--head-out", help="tanh output weights (t x hidden)")
    p.add_argument("--head-bias", help="tanh hidden bias")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ralign", description="Representation alignment and stitching diagnostics.")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("align", help="alignment metrics between two representations")
    a.add_argument("left")
    a.add_argument("right")
    _common(a)
    a.add_argument("--kernel2", help="kernel for the right side (default: same as --kernel)")
    a.add_argument("--metric", default="ka,cka,hsic", help="comma list or 'all'")
    a.add_argument("--unbiased", action="store_true", help="unbiased HSIC")
    a.add_argument("--kappa", type=float, default=1e-3, help="KCC regulariser")
    a.add_argument("--ridge", type=float, default=None, help="covariance ridge for the Gaussian measures")
    a.set_defaults(func=cmd_align)

    t = sub.add_parser("task", help="kernel-task alignment diagnostics")
    t.add_argument("repr")
    t.add_argument("targets")
    _common(t)
    t.add_argument("--metric", default="all", help=f"comma list of {','.join(TASK_METRICS)} or 'all'")
    t.add_argument("--lambdas", default="1e-4,1e-2,1,1e2", help="KARE ridge grid")
    t.add_argument("--source-r", type=float, default=0.5, help="source-condition exponent r")
    t.set_defaults(func=cmd_task)

    s = sub.add_parser("stitch", help="fit a linear stitcher and check the risk bounds")
    s.add_argument("left")
    s.add_argument("right")
    s.add_argument("targets")
    _common(s, kernels=False)
    s.add_argument("--mode", choices=STITCH_MODES, default="thm2")
    s.add_argument("--method", choices=("ols", "ridge"), default="ols")
    s.add_argument("--lam", type=float, default=0.0)
    s.add_argument("--fit-fraction", default="0.5", help="held-out split fraction, or 'none' for in-sample")
    _head_flags(s)
    s.set_defaults(func=cmd_stitch)

    y = sub.add_parser("synth", help="generate paired Gaussian representations")
    y.add_argument("config")
    y.add_argument("--n", type=int, required=True)
    _common(y, kernels=False)
    y.add_argument("--left-out")
    y.add_argument("--right-out")
    y.add_argument("--targets-out")
    y.add_argument("--data-format", choices=("raln", "csv"), default="raln")
    y.add_argument("--noise", type=float, default=None, help="target noise (default: config noise_level)")
    _head_flags(y)
    y.set_defaults(func=cmd_synth)

    c = sub.add_parser("concentrate", help="Monte Carlo check of the alignment concentration bound")
    c.add_argument("config")
    c.add_argument("--n-grid", default="64,256,1024")
    c.add_argument("--trials", type=int, default=1000)
    c.add_argument("--delta", type=float, default=0.05)
    c.add_argument("--kernel", default="linear", help="linear | rbf:<gamma> | rbf:median (unit diagonal is forced)")
    c.add_argument("--csv-out", help="per-trial deviations as CSV")
    _common(c, kernels=False)
    c.set_defaults(func=cmd_concentrate)
    return ap


def _error(code: str, message: str) -> None:
    sys.stderr.write(io_formats.canonical_json({"error": code, "message": message}))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    seed_given = getattr(args, "seed_given", False)
    args.seed_given = seed_given
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    if not seed_given and args.command not in ("synth", "concentrate"):
        sys.stderr.write(f"ralign: seed={args.seed}\n")
    _accel.set_threads(args.threads)
    try:
        return args.func(args)
    except AlignmentError as exc:
        _error(exc.code, str(exc))
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - last-resort triage
        _error("InternalError", f"{type(exc).__name__}: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
