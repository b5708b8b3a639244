"""Command-line pipeline: analyze -> optimize -> export -> eval / compare.

Exit codes: 0 success, 1 computation infeasible (e.g. an empty search
space), 2 I/O, parse or input-shape errors.

Randomness: the config's top-level ``seed`` is the only seed.  Each component
gets ``derive_seed(seed, name)`` with names ``"ga"`` and
``"objective.sampling"``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data_path
from .approxflow.archive import ArchiveError
from .approxflow.graph import GraphError, accuracy_eval, load_dataset, load_model
from .approxflow.layers import MulBackend, Recorder
from .distribution import (
    Histogram,
    OperandDistribution,
    load_distribution,
    mode,
    product_joint,
    save_distribution,
    save_histogram,
    uniform,
)
from .ga import GAConfig, optimize, theta_document
from .lut import LUTFormatError, build_lut, error_stats, exact_lut, load_lut, lut_to_bytes, zero_lut
from .netlist import cost_report, emit_hdl, emit_netlist
from .objective import ErrorEvaluator, ObjectiveConfig, make_evaluator, penalty
from .ppmatrix import GroupingPlan, SearchSpace, default_grouping, enumerate_search_space, theta_from_bits

EXIT_OK, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2


class CLIError(Exception):
    def __init__(self, message: str, code: int = EXIT_IO):
        super().__init__(message)
        self.code = code


def derive_seed(seed: int, component: str) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(component.encode()),))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass
class RunConfig:
    n: int = 8
    m: int = 8
    compressed_rows: list[int] = field(default_factory=lambda: [0, 1, 2, 3])
    grouping: str | None = None
    allowed_columns: list[int] | None = None
    objective: dict = field(default_factory=dict)
    ga: dict = field(default_factory=dict)
    seed: int = 0
    distribution: str | None = None
    output_dir: str = "out"

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        d = _read_json(path)
        base = path.parent
        mul = d.get("multiplier", {})
        paths = d.get("paths", {})

        def rel(p):
            return None if p is None else str((base / p) if not Path(p).is_absolute() else Path(p))

        cfg = cls(
            n=int(mul.get("n", 8)),
            m=int(mul.get("m", 8)),
            compressed_rows=list(mul.get("compressed_rows", [0, 1, 2, 3])),
            grouping=rel(mul.get("grouping")),
            allowed_columns=mul.get("allowed_columns"),
            objective=dict(d.get("objective", {})),
            ga=dict(d.get("ga", {})),
            seed=int(d.get("seed", 0)),
            distribution=rel(paths.get("distribution")),
            output_dir=rel(paths.get("output_dir", "out")),
        )
        for p in (cfg.grouping, cfg.distribution):
            if p is not None and not Path(p).exists():
                raise CLIError(f"{path}: referenced file {p} does not exist")
        return cfg

    def space(self) -> SearchSpace:
        if self.grouping:
            plan = GroupingPlan.from_dict(_read_json(self.grouping))
        else:
            plan = default_grouping(self.n, self.m, self.compressed_rows)
        return enumerate_search_space(self.n, self.m, plan, self.allowed_columns)

    def objective_config(self) -> ObjectiveConfig:
        d = dict(self.objective)
        d["seed"] = derive_seed(self.seed, "objective.sampling")
        return ObjectiveConfig.from_dict(d)

    def ga_config(self) -> GAConfig:
        d = dict(self.ga)
        d["seed"] = derive_seed(self.seed, "ga")
        return GAConfig.from_dict(d)

    def dist(self) -> OperandDistribution:
        if self.distribution is None:
            return uniform(self.n, self.m)
        dist = load_distribution(self.distribution)
        if (dist.n, dist.m) != (self.n, self.m):
            raise CLIError(f"distribution is {dist.n}x{dist.m}, multiplier is {self.n}x{self.m}")
        return dist


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise CLIError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CLIError(f"{path}: invalid JSON ({exc})") from exc


def _write(path: Path, text: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(text, bytes):
        path.write_bytes(text)
    else:
        path.write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def load_theta_file(path) -> tuple[SearchSpace, np.ndarray]:
    d = _read_json(path)
    try:
        space = SearchSpace.from_dict(d["space"])
        return space, theta_from_bits(d["theta"], space.Z)
    except (KeyError, TypeError, ValueError) as exc:
        raise CLIError(f"{path}: malformed theta file ({exc})") from exc


def _load_model_and_data(model_path, dataset_path):
    model = load_model(model_path)
    ds = load_dataset(dataset_path)
    if tuple(ds.images.shape[1:]) != tuple(model.input_shape):
        raise CLIError(f"dataset images are {ds.images.shape[1:]}, model expects {tuple(model.input_shape)}")
    if ds.images.qparams != model.input_qparams:
        raise CLIError("dataset quantization does not match the model input")
    return model, ds


def _record(model, ds, backend) -> tuple[float, Recorder]:
    rec = Recorder()
    acc = accuracy_eval(model, ds.images, ds.labels, backend, record=rec)
    return acc, rec


def cmd_analyze(args) -> int:
    model, ds = _load_model_and_data(args.model, args.dataset)
    acc, rec = _record(model, ds, MulBackend())
    out = Path(args.out)
    for layer in rec.inputs:
        for tag, counts in (("inputs", rec.inputs[layer]), ("weights", rec.weights[layer])):
            h = Histogram(8, counts)
            save_histogram(h, _mk(out / f"{tag}.{layer}.json"))
            _write(out / f"{tag}.{layer}.csv", h.to_csv())
    hx, hw = (Histogram(8, c) for c in rec.merged())
    for tag, h in (("inputs", hx), ("weights", hw)):
        save_histogram(h, _mk(out / f"{tag}.json"))
        _write(out / f"{tag}.csv", h.to_csv())
    save_distribution(product_joint(hx, hw, args.alpha), out / "distribution.json")
    summary = {
        "samples": len(ds),
        "exact_accuracy": acc,
        "multiplications": int(hx.total),
        "per_sample_multiplications": model.multiplications_per_sample(),
        "input_mode": mode(hx),
        "weight_mode": mode(hw),
    }
    _write(out / "summary.json", _dump(summary))
    print(f"recorded {hx.total} multiplications over {len(ds)} samples; "
          f"input mode {summary['input_mode']}, weight mode {summary['weight_mode']}")
    return EXIT_OK


def _mk(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def run_optimize(cfg: RunConfig) -> dict:
    space = cfg.space()
    if space.Z == 0:
        raise CLIError("search space is empty (Z=0): nothing to optimize", EXIT_INFEASIBLE)
    dist = cfg.dist()
    obj_cfg = cfg.objective_config()
    ga_cfg = cfg.ga_config()
    result = optimize(space, dist, obj_cfg, ga_cfg)
    theta = result.best.theta
    # the report always states the exhaustive error when the grid is small enough
    exhaustive = ErrorEvaluator.exhaustive(space, dist).error(theta) if space.n + space.m <= 20 else None
    sampled = make_evaluator(space, dist, obj_cfg).error(theta) if obj_cfg.mode == "sampled" else None
    lut = build_lut(space, theta)
    report = {
        "expected_error": exhaustive,
        "sampled_expected_error": sampled,
        "penalty": penalty(theta, obj_cfg.lambda1),
        "objective": result.best.fitness,
        "lambda1": obj_cfg.lambda1,
        "Z": space.Z,
        "selected_terms": int(theta.sum()),
        "generations_run": result.generations_run,
        "evaluations": result.evaluations_count,
        "lut_saturated": lut.saturated,
        "cost": cost_report(space, theta).to_dict(),
    }
    out = Path(cfg.output_dir)
    _write(out / "theta.json", theta_document(space, theta))
    _write(out / "history.csv", result.history_csv())
    _write(out / "report.json", _dump(report))
    _write(out / "multiplier.lut", lut_to_bytes(lut))
    return report


def cmd_optimize(args) -> int:
    cfg = RunConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.lambda1 is not None:
        cfg.objective["lambda1"] = args.lambda1
    if args.generations is not None:
        cfg.ga["max_generations"] = args.generations
    if args.distribution is not None:
        cfg.distribution = args.distribution
    if args.out is not None:
        cfg.output_dir = args.out
    report = run_optimize(cfg)
    print(f"terms {report['selected_terms']}/{report['Z']}  E_d {report['expected_error']}  "
          f"R {report['penalty']}  objective {report['objective']}")
    return EXIT_OK


def cmd_export(args) -> int:
    space, theta = load_theta_file(args.theta)
    out = Path(args.out)
    if args.kind == "lut":
        _write(out, lut_to_bytes(build_lut(space, theta)))
    elif args.kind == "netlist":
        _write(out, emit_netlist(space, theta).to_json())
    elif args.kind == "hdl":
        try:
            text = emit_hdl(emit_netlist(space, theta), args.module_name)
        except ValueError as exc:
            raise CLIError(str(exc)) from exc
        _write(out, text)
    elif args.kind == "cost":
        _write(out, _dump(cost_report(space, theta).to_dict()))
    return EXIT_OK


def cmd_eval(args) -> int:
    model, ds = _load_model_and_data(args.model, args.dataset)
    lut = load_lut(args.lut) if args.lut else None
    if lut is not None and (lut.n, lut.m) != (8, 8):
        raise CLIError(f"LUT is {lut.n}x{lut.m}; the inference pipeline needs 8x8")
    acc, rec = _record(model, ds, MulBackend(lut))
    hx, hw = (Histogram(8, c) for c in rec.merged())
    dist = product_joint(hx, hw, 1.0)
    stats = error_stats(lut if lut is not None else exact_lut(), dist)
    result = {"backend": "lut" if lut is not None else "exact", "accuracy": acc, "samples": len(ds), **stats}
    print(f"accuracy {acc:.4f} on {len(ds)} samples ({result['backend']} backend)")
    print(f"expected squared error {stats['expected_squared_error']:.6g}  "
          f"max |err| {stats['max_absolute_error']}  mean |err| {stats['mean_absolute_error']:.6g}")
    if args.json:
        _write(Path(args.json), _dump(result))
    return EXIT_OK


def _compare_item(item: str):
    """(label, lut, term count or None, space/theta or None)."""
    if item == "exact":
        return "exact", exact_lut(), None, None
    if item == "zero":
        return "zero", zero_lut(), None, None
    if item.endswith(".json"):
        space, theta = load_theta_file(item)
        return item, build_lut(space, theta), int(theta.sum()), (space, theta)
    return item, load_lut(item), None, None


def compare_rows(items, model, ds, dist: OperandDistribution) -> list[dict]:
    rows = []
    for item in items:
        label, lut, terms, st = _compare_item(item)
        if (lut.n, lut.m) != (dist.n, dist.m):
            raise CLIError(f"{item}: LUT is {lut.n}x{lut.m}, distribution is {dist.n}x{dist.m}")
        stats = error_stats(lut, dist)
        if st is not None and not lut.saturated:
            e_d = ErrorEvaluator.exhaustive(st[0], dist).error(st[1])
        else:
            e_d = stats["expected_squared_error"]
        rows.append({
            "multiplier": label,
            "terms": "" if terms is None else terms,
            "expected_error": e_d,
            "max_error": stats["max_absolute_error"],
            "accuracy": accuracy_eval(model, ds.images, ds.labels, MulBackend(lut)),
        })
    return rows


def format_table(rows: list[dict]) -> str:
    head = ["multiplier", "terms", "E_d", "max_err", "accuracy"]
    body = [[r["multiplier"], str(r["terms"]), f"{r['expected_error']:.6g}", str(r["max_error"]),
             f"{100 * r['accuracy']:.2f}%"] for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(head)]
    fmt = lambda cells: "  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(cells, widths)))
    return "\n".join([fmt(head), fmt(["-" * w for w in widths])] + [fmt(b) for b in body]) + "\n"


def cmd_compare(args) -> int:
    model, ds = _load_model_and_data(args.model, args.dataset)
    if args.distribution:
        dist = load_distribution(args.distribution)
    else:
        _, rec = _record(model, ds, MulBackend())
        dist = product_joint(*(Histogram(8, c) for c in rec.merged()), 1.0)
    rows = compare_rows(args.items, model, ds, dist)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["multiplier", "terms", "expected_error", "max_error", "accuracy"],
                       lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "expected_error": repr(r["expected_error"]), "accuracy": repr(r["accuracy"])})
    table = format_table(rows)
    if args.out:
        out = Path(args.out)
        _write(out / "compare.csv", buf.getvalue())
        _write(out / "compare.txt", table)
    print(table, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="approxmul", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    model_default = str(data_path("lenet_digits.graph.json"))
    data_default = str(data_path("digits_test.json"))

    a = sub.add_parser("analyze", help="record operand histograms of a quantized model")
    a.add_argument("--model", default=model_default)
    a.add_argument("--dataset", default=data_default)
    a.add_argument("--out", required=True)
    a.add_argument("--alpha", type=float, default=1.0, help="Laplace smoothing for distribution.json")
    a.set_defaults(func=cmd_analyze)

    o = sub.add_parser("optimize", help="search for a theta minimizing expected error plus penalty")
    o.add_argument("--config", required=True)
    o.add_argument("--seed", type=int)
    o.add_argument("--lambda1", type=float)
    o.add_argument("--generations", type=int)
    o.add_argument("--distribution")
    o.add_argument("--out")
    o.set_defaults(func=cmd_optimize)

    e = sub.add_parser("export", help="write a LUT, netlist JSON, Verilog or cost report for a theta file")
    e.add_argument("--theta", required=True)
    e.add_argument("--kind", required=True, choices=["lut", "netlist", "hdl", "cost"])
    e.add_argument("--out", required=True)
    e.add_argument("--module-name", default="approx_mul")
    e.set_defaults(func=cmd_export)

    v = sub.add_parser("eval", help="accuracy and error statistics of a multiplier inside the model")
    v.add_argument("--model", default=model_default)
    v.add_argument("--dataset", default=data_default)
    v.add_argument("--lut")
    v.add_argument("--json")
    v.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="tabulate several multipliers (LUT files, theta files, 'exact', 'zero')")
    c.add_argument("items", nargs="+")
    c.add_argument("--model", default=model_default)
    c.add_argument("--dataset", default=data_default)
    c.add_argument("--distribution")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (OSError, LUTFormatError, ArchiveError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
