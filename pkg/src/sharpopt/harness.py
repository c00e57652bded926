"""Experiment runner: build problems from JSON configs, drive any solver,
emit delimited traces, markdown/JSON reports and convergence figures, and
execute the certificate suites."""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import plots, subgradient, triangles
from .core import (
    IterationLimitError,
    SharpnessSpec,
    SolveResult,
    SolverConfig,
)
from .geometry import set_from_config
from .problems import (
    BuiltinProblem,
    CertificateResult,
    check_finite_differences,
    check_homogeneity_floor,
    check_lower_bound,
    check_quasiconvexity,
    check_sharpness,
    check_weak_quasiconvexity,
    distance_to_set,
    generate_linear_residual,
    linear_residual,
    norm_shifted_ball,
    power_norm,
    projection_certificates,
    scaled_abs_sum,
    sharpen_power,
    weakly_quasiconvex_scalar,
)

LARGE_DIMENSION = 10 ** 6

SOLVERS = ("ast", "polyak", "normalized", "normalized-inexact")

AST_COLUMNS = ("k", "f_x", "L_k", "alpha_k", "A_k", "delta_k", "bound6",
               "oracle_calls", "elapsed_s")
SUBGRAD_COLUMNS = ("k", "f_x", "grad_norm", "h_k", "dist2", "factor",
                   "product_bound", "geom_bound", "inexact_bound", "elapsed_s")

_PROBLEM_PARAMS = {
    "norm-shifted-ball": {"dimension"},
    "linear-residual": {"dimension", "condition", "seed", "matrix", "solution",
                        "feasible"},
    "distance-to-set": {"target", "feasible"},
    "weakly-quasiconvex-scalar": {"dimension"},
    "power-norm": {"exponent", "center", "feasible"},
    "scaled-abs-sum": {"weights", "feasible"},
}
_DECLARE_KEYS = {
    "holder_exponent", "gradient_holder_constant", "function_holder_constant",
    "lipschitz_constant", "homogeneity_floor", "optimal_value",
    "sharp_modulus", "weak_quasiconvexity", "growth_order", "growth_modulus",
}
_SPEC_KEYS = {"holder_exponent", "gradient_holder_constant",
              "function_holder_constant", "lipschitz_constant",
              "homogeneity_floor", "optimal_value"}
_OPTION_KEYS = {
    "relative_accuracy", "epsilon", "radius_estimate", "initial_constant",
    "max_iterations", "max_backtracks_per_step", "inexactness", "target_value",
    "seed", "scale_constant", "start", "iterations", "slack",
}
_REPORT_KEYS = {"checkpoints", "figure"}


class ConfigError(ValueError):
    """Malformed experiment config; the message names the offending field."""


def _reject_unknown(section: dict, allowed, where: str):
    extra = sorted(set(section) - set(allowed))
    if extra:
        raise ConfigError(f"{where}.{extra[0]}: unknown field")


@dataclass
class ExperimentConfig:
    raw: dict
    name: str
    problem: dict
    solver: str
    options: dict
    report: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self.raw))


def load_config(source) -> ExperimentConfig:
    """Parse and fully validate an experiment config (dict or JSON path)."""
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            raw = json.load(fh)
    else:
        raw = json.loads(json.dumps(source))
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    _reject_unknown(raw, {"name", "problem", "solver", "options", "report"}, "config")
    for required in ("problem", "solver"):
        if required not in raw:
            raise ConfigError(f"config.{required}: missing")

    problem = raw["problem"]
    if not isinstance(problem, dict) or "name" not in problem:
        raise ConfigError("problem.name: missing")
    tag = problem["name"]
    if tag not in _PROBLEM_PARAMS:
        raise ConfigError(f"problem.name: unknown problem {tag!r}")
    _reject_unknown(problem, _PROBLEM_PARAMS[tag] | {"name", "declare", "sharpen"},
                    "problem")
    if "declare" in problem:
        _reject_unknown(problem["declare"], _DECLARE_KEYS, "problem.declare")
    if "sharpen" in problem:
        _reject_unknown(problem["sharpen"], {"order"}, "problem.sharpen")
        if "order" not in problem["sharpen"]:
            raise ConfigError("problem.sharpen.order: missing")

    solver = raw["solver"]
    if solver not in SOLVERS:
        raise ConfigError(f"solver: unknown solver {solver!r}")

    options = raw.get("options", {})
    if not isinstance(options, dict):
        raise ConfigError("options: expected an object")
    _reject_unknown(options, _OPTION_KEYS, "options")

    report = raw.get("report", {})
    if not isinstance(report, dict):
        raise ConfigError("report: expected an object")
    _reject_unknown(report, _REPORT_KEYS, "report")
    checkpoints = report.get("checkpoints")
    if checkpoints is not None:
        if (not isinstance(checkpoints, list)
                or any(not isinstance(c, int) or c < 0 for c in checkpoints)
                or sorted(checkpoints) != checkpoints):
            raise ConfigError("report.checkpoints: expected an increasing list "
                              "of nonnegative integers")

    cfg = ExperimentConfig(
        raw=raw,
        name=raw.get("name", f"{tag}-{solver}"),
        problem=problem,
        solver=solver,
        options=options,
        report=report,
    )
    _validate_compatibility(cfg)
    return cfg


def build_problem(cfg: ExperimentConfig, large_n: bool = False) -> BuiltinProblem:
    """Instantiate the built-in named by the config, apply declared-constant
    overrides, and optionally sharpen the optimality gap."""
    p = cfg.problem
    tag = p["name"]
    dim = int(p.get("dimension", 1000 if tag == "norm-shifted-ball" else 1))
    if large_n and "dimension" in _PROBLEM_PARAMS[tag]:
        dim = LARGE_DIMENSION
    feasible = set_from_config(p["feasible"]) if "feasible" in p else None

    if tag == "norm-shifted-ball":
        problem = norm_shifted_ball(dim)
    elif tag == "linear-residual":
        if "matrix" in p or "solution" in p:
            if "matrix" not in p or "solution" not in p:
                raise ConfigError("problem.matrix: explicit instances need both "
                                  "matrix and solution")
            problem = linear_residual(p["matrix"], p["solution"], feasible)
        else:
            problem = generate_linear_residual(
                dim if "dimension" in p else 2,
                condition=float(p.get("condition", 1.0)),
                seed=int(p.get("seed", 0)),
                feasible=feasible)
    elif tag == "distance-to-set":
        if "target" not in p:
            raise ConfigError("problem.target: missing")
        problem = distance_to_set(set_from_config(p["target"]), feasible)
    elif tag == "weakly-quasiconvex-scalar":
        problem = weakly_quasiconvex_scalar(dim)
    elif tag == "power-norm":
        if "exponent" not in p or "center" not in p:
            raise ConfigError("problem.exponent: power-norm needs exponent "
                              "and center")
        problem = power_norm(float(p["exponent"]), p["center"], feasible)
    else:
        if "weights" not in p:
            raise ConfigError("problem.weights: missing")
        problem = scaled_abs_sum(p["weights"], feasible)

    if "sharpen" in p:
        problem = sharpen_power(problem, float(p["sharpen"]["order"]))
    if "declare" in p:
        problem = _apply_declarations(problem, p["declare"])
    return problem


def _apply_declarations(problem: BuiltinProblem, declare: dict) -> BuiltinProblem:
    spec_updates = {k: v for k, v in declare.items() if k in _SPEC_KEYS}
    sharp_updates = {k: v for k, v in declare.items() if k not in _SPEC_KEYS}
    spec = dataclasses.replace(problem.spec, **spec_updates) \
        if spec_updates else problem.spec
    sharp = problem.sharpness or SharpnessSpec()
    if sharp_updates:
        sharp = dataclasses.replace(sharp, **sharp_updates)
    return dataclasses.replace(problem, spec=spec, sharpness=sharp)


def build_solver_config(options: dict) -> SolverConfig:
    fields = {k: options[k] for k in options
              if k in {f.name for f in dataclasses.fields(SolverConfig)}}
    return SolverConfig(**fields)


def _validate_compatibility(cfg: ExperimentConfig) -> None:
    opts = cfg.options
    if cfg.solver == "ast":
        fixed = "iterations" in opts
        if not fixed and "relative_accuracy" not in opts:
            raise ConfigError("options.relative_accuracy: required for the "
                              "adaptive triangle solver (or set options.iterations)")
        if not fixed and "start" in opts:
            raise ConfigError("options.start: relative-accuracy runs always "
                              "start at the minimal-norm feasible point")
        if opts.get("slack") not in (None, "none", "machine", "stopping-rule"):
            raise ConfigError("options.slack: expected 'none', 'machine' or "
                              "'stopping-rule'")
    else:
        for key in ("iterations", "slack"):
            if key in opts:
                raise ConfigError(f"options.{key}: only valid for the ast solver")
    if cfg.solver == "normalized-inexact" and "target_value" not in opts:
        raise ConfigError("options.target_value: required in inexact mode")
    if cfg.solver in ("polyak",) and "target_value" in opts:
        raise ConfigError("options.target_value: not used by the polyak solver")


def execute(cfg: ExperimentConfig, large_n: bool = False,
            keep_iterates: bool = False):
    """Build the problem and run the configured solver.

    Returns (problem, result); iteration-limit exits are reported in the
    result status rather than raised so traces are always available.
    """
    problem = build_problem(cfg, large_n)
    solver_config = build_solver_config(cfg.options)
    opts = cfg.options
    sharp = problem.sharpness or SharpnessSpec()
    start = np.asarray(opts["start"], dtype=float) if "start" in opts else None

    if cfg.solver == "ast":
        if "iterations" in opts:
            result = triangles.run_adaptive(
                problem.spec, solver_config,
                radius=solver_config.radius_estimate,
                epsilon=solver_config.epsilon,
                iterations=int(opts["iterations"]),
                slack=opts.get("slack", "none"),
                start=start,
                solution_set=sharp.solution_set)
        else:
            try:
                result = triangles.solve_relative(
                    problem.spec, float(opts["relative_accuracy"]),
                    solver_config, solution_set=sharp.solution_set)
            except IterationLimitError as err:
                result = err.result
    elif cfg.solver == "polyak":
        result = subgradient.solve_polyak(problem.spec, sharp, solver_config,
                                          start=start,
                                          keep_iterates=keep_iterates)
    else:
        result = subgradient.solve_normalized(
            problem.spec, sharp, solver_config,
            scale_constant=opts.get("scale_constant"),
            start=start,
            keep_iterates=keep_iterates)
    return problem, result


# --- delimited trace output ---

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def trace_rows(solver: str, trace) -> list[list[str]]:
    rows = []
    for rec in trace:
        if solver == "ast":
            rows.append([_fmt(rec.iteration), _fmt(rec.objective),
                         _fmt(rec.local_constant), _fmt(rec.coupling),
                         _fmt(rec.accumulator), _fmt(rec.step_slack),
                         _fmt(rec.bound), _fmt(rec.oracle_calls),
                         _fmt(rec.elapsed)])
        else:
            rows.append([_fmt(rec.iteration), _fmt(rec.objective),
                         _fmt(rec.grad_norm), _fmt(rec.step),
                         _fmt(rec.distance_sq), _fmt(rec.factor),
                         _fmt(rec.product_bound), _fmt(rec.geometric_bound),
                         _fmt(rec.inexact_bound), _fmt(rec.elapsed)])
    return rows


def write_trace_csv(path, solver: str, trace) -> None:
    """Write the fixed per-solver column set; the file is replaced atomically."""
    columns = AST_COLUMNS if solver == "ast" else SUBGRAD_COLUMNS
    _atomic_write(path, _csv_text(columns, trace_rows(solver, trace)))


def _csv_text(columns, rows) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


def read_trace_csv(path):
    """Read a trace written by :func:`write_trace_csv`.

    Returns (columns, rows) with numeric fields parsed and blanks as None.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        rows = []
        for raw in reader:
            row = {}
            for name, cell in zip(columns, raw):
                if cell == "":
                    row[name] = None
                elif name in ("k", "oracle_calls"):
                    row[name] = int(cell)
                else:
                    row[name] = float(cell)
            rows.append(row)
    return columns, rows


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- report assembly ---

def emit_table(trace, checkpoints) -> str:
    """Three-column markdown table (iterations, bound, elapsed seconds) at
    the requested checkpoint iterations."""
    by_iteration = {rec.iteration: rec for rec in trace}
    lines = ["| iterations | bound | elapsed_s |", "|---:|---:|---:|"]
    for ck in checkpoints:
        if ck not in by_iteration:
            raise ValueError(f"checkpoint {ck} beyond the trace")
        rec = by_iteration[ck]
        bound = "-" if rec.bound is None else f"{rec.bound:.3e}"
        lines.append(f"| {ck} | {bound} | {rec.elapsed:.3f} |")
    return "\n".join(lines) + "\n"


def emit_table_from_rows(columns, rows, checkpoints) -> str:
    """Markdown checkpoint table from a parsed trace CSV."""
    if "bound6" in columns:
        bound_col = "bound6"
    else:
        bound_col = next(
            (c for c in ("geom_bound", "inexact_bound", "product_bound")
             if c in columns and any(r[c] is not None for r in rows)), None)
    by_iteration = {r["k"]: r for r in rows}
    lines = ["| iterations | bound | elapsed_s |", "|---:|---:|---:|"]
    for ck in checkpoints:
        if ck not in by_iteration:
            raise ValueError(f"checkpoint {ck} beyond the trace")
        row = by_iteration[ck]
        value = row.get(bound_col) if bound_col else None
        bound = "-" if value is None else f"{value:.3e}"
        lines.append(f"| {ck} | {bound} | {row['elapsed_s']:.3f} |")
    return "\n".join(lines) + "\n"


def _default_checkpoints(trace) -> list[int]:
    last = trace[-1].iteration
    if last < 1:
        return []
    marks = sorted({max(1, round(last * i / 10)) for i in range(1, 11)})
    return [m for m in marks if m <= last]


@dataclass
class Report:
    name: str
    problem: str
    solver: str
    status: str
    constants: dict
    checkpoints: list
    certificates: list
    final_objective: float
    iterations: int
    oracle_calls: int
    outputs: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    def to_markdown(self) -> str:
        lines = [f"# {self.name}", "",
                 f"problem: `{self.problem}`  |  solver: `{self.solver}`  |  "
                 f"status: `{self.status}`", "", "## Resolved constants", ""]
        for key in sorted(self.constants):
            lines.append(f"- {key}: {self.constants[key]}")
        lines += ["", "## Progress", ""]
        lines.append("| iterations | bound | elapsed_s | oracle_calls |")
        lines.append("|---:|---:|---:|---:|")
        for row in self.checkpoints:
            bound = "-" if row["bound"] is None else f"{row['bound']:.3e}"
            lines.append(f"| {row['iteration']} | {bound} | "
                         f"{row['elapsed_s']:.3f} | {row['oracle_calls']} |")
        lines += ["", "## Certificates", ""]
        if not self.certificates:
            lines.append("- none evaluated")
        for cert in self.certificates:
            verdict = "PASS" if cert["passed"] else "FAIL"
            detail = f" ({cert['detail']})" if cert.get("detail") else ""
            lines.append(f"- {verdict} {cert['name']}: worst margin "
                         f"{cert['worst']:.3e}{detail}")
        lines += ["", f"final objective: {self.final_objective!r} after "
                  f"{self.iterations} iterations, {self.oracle_calls} oracle calls",
                  ""]
        return "\n".join(lines)


def trace_certificates(solver: str, result: SolveResult,
                       problem: BuiltinProblem) -> list[CertificateResult]:
    """Check the theoretical guarantees recorded along a finished run."""
    certs = []
    trace = result.trace

    if solver == "ast":
        residuals = [r.certificate_residual for r in trace
                     if r.certificate_residual is not None]
        if residuals:
            worst = min(residuals)
            certs.append(CertificateResult(
                "gap-bound", worst >= -1e-7, worst,
                "observed gap within the a-posteriori bound"))
        return certs

    rows = [r for r in trace if r.distance_sq is not None]
    if len(rows) >= 2:
        # inexact runs contract up to an additive noise term slack^2 / M^2
        noise = 0.0
        if result.constants.get("inexactness") is not None:
            noise = (result.constants["inexactness"]
                     / result.constants["scale_constant"]) ** 2
        worst = 0.0
        ok = True
        for prev, cur in zip(rows, rows[1:]):
            if prev.factor is None:
                continue
            margin = prev.factor * prev.distance_sq + noise - cur.distance_sq
            worst = min(worst, margin)
            ok = ok and margin >= -1e-10
        certs.append(CertificateResult(
            "per-step-contraction", ok, worst,
            "dist^2 contracts by the per-step factor"))

    sharp = problem.sharpness
    if solver == "polyak" and rows and sharp and sharp.sharp_modulus is not None:
        try:
            _, holds = subgradient.product_certificate(
                trace, sharp.sharp_modulus, sharp.weak_quasiconvexity)
            certs.append(CertificateResult(
                "product-bound", holds, 0.0 if holds else -1.0,
                "cumulative product bound on dist^2"))
        except ValueError as err:
            certs.append(CertificateResult("product-bound", False, -1.0, str(err)))

    for attr, name in (("geometric_bound", "geometric-bound"),
                       ("inexact_bound", "inexact-bound")):
        margins = [getattr(r, attr) - r.distance_sq for r in rows
                   if getattr(r, attr) is not None]
        if margins:
            worst = min(margins)
            certs.append(CertificateResult(
                name, worst >= -1e-10, worst, "rate bound on dist^2"))

    if (result.iterates and sharp and sharp.solution_set is not None
            and problem.spec.optimal_value is not None):
        scale = result.constants.get("scale_constant")
        if scale:
            certs.append(_alignment_certificate(problem, result.iterates, scale))
    return certs


def _alignment_certificate(problem, iterates, scale) -> CertificateResult:
    sols = problem.sharpness.solution_set
    f_star = problem.spec.optimal_value
    margins = [0.0]
    for x in iterates:
        value, grad = problem.eval(x)
        if not np.any(grad):
            continue
        if hasattr(sols, "project"):
            star = sols.project(x)
        else:
            star = min((np.asarray(p, dtype=float) for p in sols),
                       key=lambda p: np.linalg.norm(x - p))
        if np.array_equal(np.asarray(x, dtype=float), star):
            continue
        v = subgradient.alignment(x, star, grad)
        margins.append(v - (value - f_star) / scale)
    worst = min(margins)
    return CertificateResult(
        "alignment-bound", worst >= -1e-9, worst,
        "value gap bounded by scale * alignment along the run")


def run(cfg: ExperimentConfig, out_dir, large_n: bool = False) -> Report:
    """Run one experiment and write trace CSV, reports and the figure."""
    out = Path(out_dir)
    problem, result = execute(cfg, large_n)
    certs = trace_certificates(cfg.solver, result, problem)

    checkpoints = cfg.report.get("checkpoints") or _default_checkpoints(result.trace)
    by_iteration = {rec.iteration: rec for rec in result.trace}
    for ck in checkpoints:
        if ck not in by_iteration:
            raise ValueError(f"checkpoint {ck} beyond the trace")
    rows = [{"iteration": ck,
             "bound": by_iteration[ck].bound,
             "elapsed_s": by_iteration[ck].elapsed,
             "oracle_calls": by_iteration[ck].oracle_calls}
            for ck in checkpoints]

    constants = {k: v for k, v in result.constants.items() if v is not None}
    for key, value in (("optimal_value", problem.spec.optimal_value),
                       ("lipschitz_constant", problem.spec.lipschitz_constant),
                       ("homogeneity_floor", problem.spec.homogeneity_floor)):
        if value is not None:
            constants.setdefault(key, value)

    report = Report(
        name=cfg.name,
        problem=problem.name,
        solver=cfg.solver,
        status=result.status,
        constants=constants,
        checkpoints=rows,
        certificates=[dataclasses.asdict(c) for c in certs],
        final_objective=result.objective,
        iterations=result.iterations,
        oracle_calls=result.oracle_calls,
    )

    stem = cfg.name
    trace_path = out / f"{stem}.trace.csv"
    write_trace_csv(trace_path, cfg.solver, result.trace)
    report.outputs["trace"] = str(trace_path)

    if cfg.report.get("figure", True):
        fig = plots.convergence_figure(result.trace, cfg.solver, title=cfg.name)
        figure_path = out / f"{stem}.convergence.png"
        plots.save_figure(fig, figure_path)
        report.outputs["figure"] = str(figure_path)

    report_json = out / f"{stem}.report.json"
    _atomic_write(report_json, report.to_json())
    report.outputs["report_json"] = str(report_json)
    report_md = out / f"{stem}.report.md"
    _atomic_write(report_md, report.to_markdown())
    report.outputs["report_md"] = str(report_md)
    return report


def run_certificates(cfg: ExperimentConfig, large_n: bool = False,
                     samples: int = 1000) -> list[CertificateResult]:
    """Static oracle/geometry suites plus the trace certificates of one run."""
    problem = build_problem(cfg, large_n)
    seed = int(cfg.options.get("seed", 0))
    results = [
        check_finite_differences(problem, count=100, seed=seed),
        check_lower_bound(problem, count=samples, seed=seed),
        check_homogeneity_floor(problem, count=samples, seed=seed),
        check_sharpness(problem, count=samples, seed=seed),
        check_weak_quasiconvexity(problem, count=samples, seed=seed),
        check_quasiconvexity(problem, count=samples, seed=seed),
    ]
    results.extend(projection_certificates(problem.spec.feasible_set,
                                           count=samples, seed=seed))
    try:
        _, run_result = execute(cfg, large_n, keep_iterates=True)
    except Exception as err:  # incompatible config: report, don't crash
        results.append(CertificateResult("solver-run", False, -1.0, str(err)))
        return results
    results.extend(trace_certificates(cfg.solver, run_result, problem))
    return results
