"""Command-line front end: ``evanskit <command> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 partial results (some contour nodes failed).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, EvansError
from .evans import METHODS, EvansEvaluator, sample_contour, winding_number
from .experiments import (compare_methods, converge_in_m, kato_order_study, mesh_count_study,
                          stiefel_experiment)
from .kato import Contour
from .problems import PROBLEM_NAMES, ScalarTestbed, build_problem
from .shooting import SCHEMES, MeshSpec, default_truncation

SCHEMA_VERSION = 1
COMMANDS = ("winding", "sample", "converge-m", "stiefel", "mesh-study", "kato-order", "compare-methods")

# keys a config file may set, with defaults
DEFAULTS = {
    "problem": None,
    "params": {},
    "method": "exterior",
    "contour": None,
    "nodes": 64,
    "lambdas": None,
    "truncation": None,
    "mode": "adaptive",
    "scheme": "erk4embedded",
    "step": None,
    "abs_tol": 1e-8,
    "rel_tol": 1e-8,
    "bvp_step": 2e-3,
    "truncations": list(range(4, 13)),
    "seed": 0,
    "eps": 1e-3,
    "variant": "drury",
    "direction": "backward",
    "matrix": [-1.0, -2.0, 3.0],
    "k": 2,
    "a_values": [2.0 ** i for i in range(9)],
    "tol": 1e-6,
    "node_counts": [64, 128, 256, 512],
    "order": 2,
    "metric": "closure",
    "exclusion_radius": 1e-4,
    "budget": 4096,
    "output": None,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="evanskit", description="Evans function computations and experiments.")
    parser.add_argument("--version", action="version", version=f"evanskit {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON file or key = value lines")
        p.add_argument("--problem", choices=PROBLEM_NAMES)
        p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                       help="problem parameter (repeatable; values parsed as JSON when possible)")
        p.add_argument("--method", choices=METHODS)
        p.add_argument("--contour", help="circle:center,radius or polyline:l1;l2;...")
        p.add_argument("--nodes", type=int)
        p.add_argument("--lambdas", help="comma-separated lambda values (sample)")
        p.add_argument("--truncation", "-M", type=float, dest="truncation")
        p.add_argument("--mode", choices=("fixed", "adaptive"))
        p.add_argument("--scheme", choices=SCHEMES)
        p.add_argument("--step", type=float)
        p.add_argument("--abs-tol", type=float, dest="abs_tol")
        p.add_argument("--rel-tol", type=float, dest="rel_tol")
        p.add_argument("--bvp-step", type=float, dest="bvp_step")
        p.add_argument("--seed", type=int)
        p.add_argument("--variant", choices=("drury", "davey"))
        p.add_argument("--direction", choices=("backward", "forward"))
        p.add_argument("--order", type=int, choices=(1, 2))
        p.add_argument("--metric", choices=("closure", "pointwise"))
        p.add_argument("--exclusion-radius", type=float, dest="exclusion_radius")
        p.add_argument("--budget", type=int)
        p.add_argument("--output", "-o", help="output prefix: writes PREFIX.csv and PREFIX.json")
    return parser


def _parse_value(text):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path):
    """Read a JSON object or ``key = value`` lines (``#`` comments allowed)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    else:
        data = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            data[key.strip().replace("-", "_")] = _parse_value(value)
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def resolve_config(args):
    cfg = json.loads(json.dumps(DEFAULTS))
    if args.config:
        cfg.update(load_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None and key != "params":
            cfg[key] = value
    params = dict(cfg.get("params") or {})
    for item in args.param:
        if "=" not in item:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        params[key.strip()] = _parse_value(value)
    cfg["params"] = params
    cfg["command"] = args.command
    return cfg


def _complex_list(text):
    if isinstance(text, (list, tuple)):
        return [complex(v) if not isinstance(v, list) else complex(*v) for v in text]
    return [complex(v.strip().replace(" ", "")) for v in str(text).split(",") if v.strip()]


def _mesh(cfg, system, lam):
    m = cfg["truncation"] or default_truncation(system, lam)
    if cfg["mode"] == "fixed":
        step = cfg["step"] or 0.01
        return MeshSpec(m, "fixed", cfg["scheme"], m / max(1, round(m / step)))
    return MeshSpec(m, "adaptive", "erk4embedded", abs_tol=cfg["abs_tol"], rel_tol=cfg["rel_tol"])


def _bvp_mesh(cfg, mesh):
    step = cfg["bvp_step"]
    return MeshSpec(mesh.truncation, "fixed", "midpoint", mesh.truncation / max(3, round(mesh.truncation / step)))


def _system(cfg):
    if not cfg["problem"]:
        raise UsageError("no problem given (use --problem or a config file)")
    return build_problem(cfg["problem"], **cfg["params"])


def _contour(cfg):
    if not cfg["contour"]:
        raise UsageError("no contour given (use --contour or a config file)")
    return Contour.parse(cfg["contour"], nodes=int(cfg["nodes"]))


def _fmt(v):
    return repr(float(v))


# ---------------------------------------------------------------------------
# commands return (summary dict, csv header, csv rows, exit status)


def _sample_rows(samples):
    rows = []
    for s in samples:
        rows.append([_fmt(s.lam.real), _fmt(s.lam.imag), _fmt(s.value.real), _fmt(s.value.imag),
                     "1" if s.ok else "0"])
    return ["re_lambda", "im_lambda", "re_D", "im_D", "ok"], rows


def cmd_winding(cfg):
    system = _system(cfg)
    contour = _contour(cfg)
    mesh = _mesh(cfg, system, contour.points[0])
    result = winding_number(system, contour, cfg["method"], mesh, budget=int(cfg["budget"]),
                            order=int(cfg["order"]),
                            bvp_mesh=_bvp_mesh(cfg, mesh), exclusion_radius=cfg["exclusion_radius"])
    header, rows = _sample_rows(result.samples)
    return result.to_dict(), header, rows, 0


def cmd_sample(cfg):
    system = _system(cfg)
    lams = _complex_list(cfg["lambdas"]) if cfg["lambdas"] else None
    contour = Contour(np.array(lams)) if lams and len(lams) > 1 else (None if lams else _contour(cfg))
    base = lams[0] if lams else contour.points[0]
    mesh = _mesh(cfg, system, base)
    options = dict(bvp_mesh=_bvp_mesh(cfg, mesh), exclusion_radius=cfg["exclusion_radius"],
                   order=int(cfg["order"]))
    if contour is None:
        ev = EvansEvaluator(system, cfg["method"], mesh, **options)
        samples = ev.evaluate_many([ev.node_at(base)])
    else:
        samples = sample_contour(system, contour, cfg["method"], mesh, **options)
    failed = [s for s in samples if not s.ok]
    header, rows = _sample_rows(samples)
    summary = {"samples": [s.to_dict() for s in samples], "failed": len(failed)}
    if failed and len(failed) == len(samples):
        return summary, header, rows, 2
    return summary, header, rows, 3 if failed else 0


def _report_rows(report, label):
    return [label, "error"], [[_fmt(a), _fmt(e)] for a, e in zip(report.abscissae, report.errors)]


def cmd_converge_m(cfg):
    params = cfg["params"]
    if (cfg["problem"] or "scalar-testbed") != "scalar-testbed":
        raise ConfigError("converge-m needs a closed-form reference; use problem scalar-testbed")
    tb = ScalarTestbed(float(params.get("a", 1.0)), float(params.get("b", 1.0)), float(params.get("theta", 1.0)))
    report = converge_in_m(tb, cfg["truncations"], method=cfg["method"])
    header, rows = _report_rows(report, "M")
    return report.to_dict(), header, rows, 0


def cmd_stiefel(cfg):
    matrix = np.asarray(cfg["matrix"], dtype=complex)
    if matrix.ndim == 1:
        matrix = np.diag(matrix)
    report = stiefel_experiment(matrix, int(cfg["k"]), eps=float(cfg["eps"]), seed=int(cfg["seed"]),
                                truncation=float(cfg["truncation"] or 10.0), variant=cfg["variant"],
                                direction=cfg["direction"])
    header, rows = _report_rows(report, "distance")
    return report.to_dict(), header, rows, 0


def cmd_mesh_study(cfg):
    report = mesh_count_study(cfg["a_values"], tol=float(cfg["tol"]))
    header = ["a", "steps", "centered_steps"]
    rows = [[_fmt(a), str(int(j)), str(c)] for a, j, c in
            zip(report.abscissae, report.errors, report.extra["centered_steps"])]
    return report.to_dict(), header, rows, 0


def cmd_kato_order(cfg):
    system = _system(cfg) if cfg["problem"] else build_problem("convected-heat", eta=0.0)
    contour = cfg["contour"] or "circle:2,1"
    kind, _, body = contour.partition(":")
    if kind.strip() != "circle":
        raise ConfigError("kato-order runs on circle contours")
    center, radius = body.split(",")
    reports = [kato_order_study(system, complex(center.strip()), float(radius), cfg["node_counts"], order,
                                cfg["metric"]) for order in (1, 2)]
    header = ["nodes", "error_order1", "error_order2"]
    rows = [[str(int(j)), _fmt(e1), _fmt(e2)] for j, e1, e2 in
            zip(reports[0].abscissae, reports[0].errors, reports[1].errors)]
    return {"reports": [r.to_dict() for r in reports]}, header, rows, 0


def cmd_compare_methods(cfg):
    system = _system(cfg)
    contour = _contour(cfg)
    mesh = _mesh(cfg, system, contour.points[0])
    if mesh.mode != "adaptive" and cfg["truncation"] is None:
        raise ConfigError("compare-methods needs a truncation for fixed meshes")
    out = compare_methods(system, contour, METHODS, mesh, _bvp_mesh(cfg, mesh))
    header = ["re_lambda", "im_lambda"] + [f"{p}_{m}" for m in METHODS for p in ("re", "im")]
    rows = []
    for j, lam in enumerate(contour.points):
        row = [_fmt(lam.real), _fmt(lam.imag)]
        for m in METHODS:
            v = out["values"][m][j]
            row += [_fmt(v.real), _fmt(v.imag)]
        rows.append(row)
    summary = {"pairwise_max_rel": out["pairwise_max_rel"], "seconds": out["seconds"],
               "winding": out.get("winding")}
    return summary, header, rows, 0


HANDLERS = {
    "winding": cmd_winding,
    "sample": cmd_sample,
    "converge-m": cmd_converge_m,
    "stiefel": cmd_stiefel,
    "mesh-study": cmd_mesh_study,
    "kato-order": cmd_kato_order,
    "compare-methods": cmd_compare_methods,
}


def render_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def run_cli(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("no command given")
        if args.config is None and args.problem is None and args.command in (
                "winding", "sample", "compare-methods"):
            raise UsageError("missing config: give --config or --problem")
        cfg = resolve_config(args)
        summary, header, rows, status = HANDLERS[args.command](cfg)
    except UsageError as exc:
        stderr.write(parser.format_usage())
        stderr.write(f"evanskit: error: {exc}\n")
        return 1
    except (ConfigError, ValueError) as exc:
        stderr.write(f"evanskit: configuration error: {exc}\n")
        return 1
    except EvansError as exc:
        stderr.write(f"evanskit: numerical failure: {type(exc).__name__}: {exc}\n")
        return 2
    document = {"schema_version": SCHEMA_VERSION, "command": args.command, "config": cfg, "status": status,
                "result": summary}
    text = json.dumps(document, indent=2, default=_json_default)
    if cfg["output"]:
        prefix = Path(cfg["output"])
        prefix.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{prefix}.csv").write_text(render_csv(header, rows))
        Path(f"{prefix}.json").write_text(text + "\n")
    else:
        stdout.write(text + "\n")
    if status == 3:
        stderr.write("evanskit: some nodes failed; partial results written\n")
    return status


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def main():
    sys.exit(run_cli())
