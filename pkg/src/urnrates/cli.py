"""Command-line front end.

Subcommands map one-to-one onto the solver layers: rate and path for
endpoint constraints, classical / overflow / coupon for the dedicated
event solvers, simulate and oracle for the independent ground-truth
machinery, verify for the self-check battery.

Exit codes: 0 success, 1 malformed input, 2 infeasible problem,
3 solver failure.  Every successful solver JSON carries the defining
equation residuals; a residual norm above 1e-8 is treated as a solver
failure even if the library returned a value.

Numbers are serialized with 17 significant digits so output files are
bit-stable and can be re-ingested as config files (--config accepts
both flat key=value text and a previously emitted JSON document).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .applications import (LinearTerminalConstraint, classical_rate,
                           coupon_rate, overflow_rate, terminal_set_rate)
from .entropy import poisson_pmf, relative_entropy
from .errors import (BoundaryEvaluation, BracketFailure, DegenerateSplit,
                     DomainError, InfeasibleInput, InfeasibleTruncation,
                     InvalidPath, NewtonDivergence, SolverFailure,
                     UnsupportedConstraintFamily, UrnRatesError)
from .extremal import (build_empty_extremal, build_general_extremal,
                       closed_form_cost, el_residual)
from .feasibility import feasibility_check, feasibility_violation, \
    irreducible_decompose
from .kernel import available_lanes, kernel_info
from .oracle import endpoint_program, entropy_min_oracle
from .paths import LinearPath, path_cost
from .simulate import SimConfig, simulate
from .twist import minimizer_general, terminal_rate_general
from .types import EndpointConstraint, SimplexVector

__all__ = ["ProblemSpec", "parse_problem", "run", "main"]

_VECTOR_TOL = 1e-6


class _CliError(Exception):
    """Carries the exit code alongside the diagnostic."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; remap to the documented
    # parse-error code by raising instead
    def error(self, message):
        raise _CliError(1, message)


# ---------------------------------------------------------------------------
# serialization


def _fmt_float(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def _to_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if math.isfinite(obj):
            return _fmt_float(obj)
        return json.dumps(_fmt_float(obj))
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [_to_json(v, indent + 1) for v in obj]
        if all(isinstance(v, (int, float)) for v in obj) and len(obj) <= 12:
            return "[" + ", ".join(parts) + "]"
        return ("[\n" + ",\n".join(inner + p for p in parts)
                + "\n" + pad + "]")
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [f"{inner}{json.dumps(str(k))}: {_to_json(v, indent + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv(columns: list[str], rows: list[list[float]]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt_float(float(v)) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# problem parsing


_REQUIRED = object()

# name -> (type, default); _REQUIRED marks mandatory parameters
_SCHEMAS: dict[str, dict] = {
    "rate": {"omega": ("vector", _REQUIRED), "alpha": ("vector", None),
             "beta": ("number", _REQUIRED)},
    "path": {"omega": ("vector", _REQUIRED), "alpha": ("vector", None),
             "beta": ("number", _REQUIRED), "grid": ("integer", 201)},
    "classical": {"omega0": ("number", _REQUIRED),
                  "beta": ("number", _REQUIRED)},
    "overflow": {"capacity": ("integer", _REQUIRED),
                 "beta": ("number", _REQUIRED), "eta": ("number", _REQUIRED),
                 "below_mean": ("boolean", False)},
    "coupon": {"alpha": ("vector", _REQUIRED),
               "capacity": ("integer", _REQUIRED),
               "beta": ("number", _REQUIRED), "xi": ("number", _REQUIRED)},
    "simulate": {"n": ("integer", _REQUIRED), "beta": ("number", _REQUIRED),
                 "alpha": ("vector", None), "capacity": ("integer", None),
                 "seed": ("integer", 0), "trials": ("integer", 1),
                 "grid": ("integer", 0)},
    "oracle": {"omega": ("vector", _REQUIRED), "alpha": ("vector", None),
               "beta": ("number", _REQUIRED), "bound": ("integer", None)},
    "verify": {"seed": ("integer", 0)},
}

_DEFAULT_FORMAT = {"path": "csv", "verify": "text"}


@dataclass(frozen=True)
class ProblemSpec:
    """One validated CLI invocation: kind, typed parameters, format."""

    kind: str
    params: dict
    fmt: str
    output: str | None = field(default=None, compare=False)


def _convert(kind: str, name: str, typ: str, raw):
    token = str(raw).strip()
    if typ == "number":
        try:
            value = float(token)
        except ValueError:
            raise _CliError(1, f"{kind}: --{name} expects a number, "
                            f"got {token!r}") from None
        if not math.isfinite(value):
            raise _CliError(1, f"{kind}: --{name} must be finite, got {token!r}")
        return value
    if typ == "integer":
        try:
            return int(token)
        except ValueError:
            raise _CliError(1, f"{kind}: --{name} expects an integer, "
                            f"got {token!r}") from None
    if typ == "boolean":
        low = token.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise _CliError(1, f"{kind}: --{name} expects a boolean, got {token!r}")
    if typ == "vector":
        pieces = [p.strip() for p in token.split(",")]
        if pieces == [""]:
            raise _CliError(1, f"{kind}: --{name} is empty")
        values = []
        for p in pieces:
            try:
                values.append(float(p))
            except ValueError:
                raise _CliError(1, f"{kind}: --{name} has a bad entry "
                                f"{p!r}") from None
        return tuple(values)
    raise AssertionError(typ)


def _config_values(path: str) -> dict[str, str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise _CliError(1, f"cannot read config {path!r}: {exc}") from None
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise _CliError(1, f"config {path!r}: bad JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise _CliError(1, f"config {path!r}: expected a JSON object")
        section = doc.get("problem", doc)
        if not isinstance(section, dict):
            raise _CliError(1, f"config {path!r}: \"problem\" must be an object")
        out = {}
        for key, value in section.items():
            key = str(key).strip().lower().replace("-", "_")
            if value is None:
                continue
            if isinstance(value, (list, tuple)):
                out[key] = ",".join(_fmt_float(float(v)) for v in value)
            elif isinstance(value, bool):
                out[key] = "true" if value else "false"
            elif isinstance(value, float):
                out[key] = _fmt_float(value)
            else:
                out[key] = str(value)
        return out
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise _CliError(1, f"config {path!r} line {lineno}: expected "
                            f"key = value, got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip().lower().replace("-", "_")] = value.strip()
    return out


def _build_parser() -> _Parser:
    parser = _Parser(prog="urnrates", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="kind", metavar="COMMAND")
    flag_help = {
        "alpha": "initial occupancy fractions / class weights, comma-separated",
        "omega": "target occupancy fractions, comma-separated, overflow last",
        "omega0": "target empty-urn fraction",
        "beta": "balls thrown per urn",
        "capacity": "capacity index I (levels 0..I are tracked)",
        "eta": "demanded overflow per urn",
        "xi": "demanded low-occupancy fraction",
        "n": "urn count",
        "seed": "64-bit random seed",
        "trials": "independent simulation runs",
        "grid": "number of sample points along the time axis",
        "bound": "oracle support truncation per class",
        "below_mean": "solve the below-typical overflow direction",
    }
    for kind, schema in _SCHEMAS.items():
        p = sub.add_parser(kind, add_help=True)
        for name, (typ, _default) in schema.items():
            flag = "--" + name.replace("_", "-")
            if typ == "boolean":
                p.add_argument(flag, dest=name, nargs="?", const="true",
                               default=None, metavar="BOOL",
                               help=flag_help.get(name, ""))
            else:
                p.add_argument(flag, dest=name, default=None,
                               metavar=typ.upper(),
                               help=flag_help.get(name, ""))
        p.add_argument("--format", dest="fmt", default=None,
                       metavar="{json,csv}", help="output format")
        p.add_argument("--config", default=None, metavar="FILE",
                       help="key = value defaults (flags win); also accepts "
                            "a previously emitted JSON document")
        p.add_argument("--output", default=None, metavar="FILE",
                       help="write results here instead of stdout")
    return parser


def parse_problem(argv: list[str]) -> ProblemSpec:
    """Parse flags (and an optional config file) into a ProblemSpec."""
    ns = _build_parser().parse_args(argv)
    if ns.kind is None:
        raise _CliError(1, "missing command; expected one of "
                        + ", ".join(_SCHEMAS))
    schema = _SCHEMAS[ns.kind]
    config = _config_values(ns.config) if ns.config else {}
    if "kind" in config and config["kind"] != ns.kind:
        raise _CliError(1, f"config is for {config['kind']!r} but the "
                        f"command is {ns.kind!r}")
    known = set(schema) | {"kind", "format", "output"}
    for key in config:
        if key not in known:
            raise _CliError(1, f"config key {key!r} is not valid for "
                            f"{ns.kind!r}")
    params = {}
    for name, (typ, default) in schema.items():
        raw = getattr(ns, name)
        if raw is None:
            raw = config.get(name)
        if raw is None:
            if default is _REQUIRED:
                raise _CliError(1, f"{ns.kind}: missing required "
                                f"--{name.replace('_', '-')}")
            params[name] = default
        else:
            params[name] = _convert(ns.kind, name, typ, raw)
    fmt = ns.fmt or config.get("format") \
        or _DEFAULT_FORMAT.get(ns.kind, "json")
    if fmt not in ("json", "csv", "text"):
        raise _CliError(1, f"unknown format {fmt!r}")
    output = ns.output or config.get("output")
    return ProblemSpec(ns.kind, params, fmt, output)


# ---------------------------------------------------------------------------
# shared handler helpers


def _simplex(kind: str, name: str, values: tuple[float, ...]) -> SimplexVector:
    if len(values) < 2:
        raise _CliError(1, f"{kind}: --{name} needs at least two entries "
                        f"(levels plus the overflow slot)")
    if any(v < 0.0 for v in values):
        raise _CliError(1, f"{kind}: --{name} has a negative entry")
    total = math.fsum(values)
    if abs(total - 1.0) > _VECTOR_TOL:
        raise _CliError(1, f"{kind}: --{name} sums to {total:.12g}; "
                        f"refusing to renormalize")
    return SimplexVector(values, len(values) - 2, tolerance=2 * _VECTOR_TOL)


def _empty_like(length: int) -> SimplexVector:
    return SimplexVector((1.0,) + (0.0,) * (length - 1), length - 2)


def _constraint(spec: ProblemSpec) -> EndpointConstraint:
    omega = _simplex(spec.kind, "omega", spec.params["omega"])
    if spec.params["alpha"] is None:
        alpha = _empty_like(len(omega.entries))
    else:
        alpha = _simplex(spec.kind, "alpha", spec.params["alpha"])
        if len(alpha.entries) != len(omega.entries):
            raise _CliError(1, f"{spec.kind}: --alpha has "
                            f"{len(alpha.entries)} entries but --omega has "
                            f"{len(omega.entries)}")
    beta = spec.params["beta"]
    if beta < 0.0:
        raise _CliError(1, f"{spec.kind}: --beta must be nonnegative")
    constraint = EndpointConstraint(alpha, omega, beta)
    violation = feasibility_violation(constraint)
    if violation is not None:
        raise _CliError(2, f"infeasible constraint: {violation}")
    return constraint


def _problem_block(spec: ProblemSpec) -> dict:
    block: dict = {"kind": spec.kind}
    for name, value in spec.params.items():
        if value is None:
            continue
        block[name] = list(value) if isinstance(value, tuple) else value
    block["format"] = spec.fmt
    return block


def _gate_residuals(residuals: dict[str, float]) -> float:
    norm = max((abs(v) for v in residuals.values()), default=0.0)
    if norm > 1e-8:
        detail = ", ".join(f"{k} = {v:.3e}" for k, v in residuals.items())
        raise _CliError(3, f"solver residual norm {norm:.3e} exceeds 1e-8 "
                        f"({detail})")
    return norm


# ---------------------------------------------------------------------------
# handlers


def _run_rate(spec: ProblemSpec):
    c = _constraint(spec)
    verdict = feasibility_check(c)
    value = terminal_rate_general(c)
    payload = {"problem": _problem_block(spec), "case": verdict.name,
               "J": value}
    if math.isinf(value):
        payload["residuals"] = {}
        payload["residual_norm"] = 0.0
        return payload, None
    if c.beta == 0.0:
        payload["pieces"] = 0
        payload["residuals"] = {}
        payload["residual_norm"] = 0.0
        return payload, None

    dists = minimizer_general(c)
    cap = c.capacity_index
    recon = []
    for i in range(cap + 1):
        recon.append(math.fsum(c.alpha.head[k] * dists[k].pmf(i - k)
                               for k in dists if k <= i))
    endpoint_worst = max(abs(r - w) for r, w in zip(recon, c.omega.head))
    over = 1.0 - math.fsum(recon)
    endpoint_worst = max(endpoint_worst, abs(over - c.omega.overflow))
    added = math.fsum(c.alpha.head[k] * dists[k].mean() for k in dists)
    residuals = {"endpoint_worst": endpoint_worst,
                 "conservation": (added - c.beta) / max(1.0, c.beta)}
    payload["pieces"] = len(irreducible_decompose(c))
    payload["residuals"] = residuals
    payload["residual_norm"] = _gate_residuals(residuals)
    payload["argmin"] = {
        str(k): {"head": list(d.head), "tail_scale": d.tail_scale,
                 "tail_rate": d.tail_rate}
        for k, d in sorted(dists.items())}
    return payload, None


def _extremal_for(c: EndpointConstraint):
    if c.alpha.entries[0] == 1.0:
        return build_empty_extremal(c.omega, c.beta)
    return build_general_extremal(c)


def _run_path(spec: ProblemSpec):
    c = _constraint(spec)
    grid = spec.params["grid"]
    if grid < 2:
        raise _CliError(1, "path: --grid must be at least 2")
    path = _extremal_for(c)
    cap = c.capacity_index
    columns = (["x"]
               + [f"gamma_{i}" for i in range(cap + 1)] + ["gamma_over"]
               + [f"theta_{i}" for i in range(cap + 1)] + ["theta_over"]
               + [f"psi_{i}" for i in range(cap + 1)])
    rows = []
    for x in np.linspace(0.0, c.beta, grid):
        x = float(x)
        gam = path.gamma(x)
        tht = path.theta(x)
        rows.append([x, *gam.entries, *tht.entries, *gam.psi()])
    payload = {"problem": _problem_block(spec), "columns": columns,
               "rows": rows, "J": closed_form_cost(path)}
    return payload, (columns, rows)


def _run_classical(spec: ProblemSpec):
    solution = classical_rate(spec.params["omega0"], spec.params["beta"])
    residuals = solution.residuals()
    payload = {
        "problem": _problem_block(spec),
        "rho": solution.rho,
        "C": solution.C,
        "J": solution.rate,
        "omega0_zero_cost": math.exp(-solution.beta),
        "residuals": residuals,
        "residual_norm": _gate_residuals(residuals),
    }
    return payload, None


def _run_overflow(spec: ProblemSpec):
    solution = overflow_rate(spec.params["capacity"], spec.params["beta"],
                             spec.params["eta"],
                             allow_below_mean=spec.params["below_mean"])
    residuals = solution.residuals()
    i_cap, beta = solution.capacity_index, solution.beta
    zeta_zero = math.fsum((i_cap - i) * poisson_pmf(i, beta)
                          for i in range(i_cap + 1))
    payload = {
        "problem": _problem_block(spec),
        "rho": solution.rho,
        "nu": solution.nu,
        "C": solution.C,
        "zeta": solution.zeta,
        "eta": solution.eta,
        "zeta_zero_cost": zeta_zero,
        "J": solution.J_O,
        "residuals": residuals,
        "residual_norm": _gate_residuals(residuals),
        "argmin_omega": list(solution.terminal_occupancy().entries),
    }
    return payload, None


def _run_coupon(spec: ProblemSpec):
    weights = spec.params["alpha"]
    if any(v < 0.0 for v in weights):
        raise _CliError(1, "coupon: --alpha has a negative entry")
    total = math.fsum(weights)
    if abs(total - 1.0) > _VECTOR_TOL:
        raise _CliError(1, f"coupon: --alpha sums to {total:.12g}; "
                        f"refusing to renormalize")
    solution = coupon_rate(weights, spec.params["capacity"],
                           spec.params["beta"], spec.params["xi"])
    residuals = solution.residuals()
    i_cap, beta = solution.capacity_index, solution.beta
    xi_zero = math.fsum(
        a * math.fsum(poisson_pmf(j, beta) for j in range(i_cap - k + 1))
        for k, a in enumerate(solution.class_weights))
    payload = {
        "problem": _problem_block(spec),
        "rho": solution.rho,
        "W": solution.W,
        "C": [solution.class_scales[k]
              for k in range(len(solution.class_weights))],
        "xi": solution.xi,
        "xi_zero_cost": xi_zero,
        "J": solution.J_C,
        "residuals": residuals,
        "residual_norm": _gate_residuals(residuals),
        "argmin_omega": list(solution.terminal_occupancy().entries),
    }
    return payload, None


def _run_simulate(spec: ProblemSpec):
    p = spec.params
    if p["alpha"] is not None:
        alpha = _simplex("simulate", "alpha", p["alpha"])
    elif p["capacity"] is not None:
        if p["capacity"] < 0:
            raise _CliError(1, "simulate: --capacity must be >= 0")
        alpha = _empty_like(p["capacity"] + 2)
    else:
        raise _CliError(1, "simulate: need --alpha or --capacity")
    grid = p["grid"]
    if grid < 0:
        raise _CliError(1, "simulate: --grid must be >= 0")
    times = tuple(float(t) for t in np.linspace(0.0, p["beta"], grid)) \
        if grid >= 2 else ()
    try:
        cfg = SimConfig(n=p["n"], beta=p["beta"], alpha=alpha,
                        seed=p["seed"], trials=p["trials"],
                        snapshot_times=times)
    except DomainError as exc:
        raise _CliError(1, f"simulate: {exc}") from None
    result = simulate(cfg)
    mean = result.mean_fractions()
    if cfg.trials > 1:
        stderr = result.fractions.std(axis=0, ddof=1) / math.sqrt(cfg.trials)
    else:
        stderr = np.zeros_like(mean)
    payload = {
        "problem": _problem_block(spec),
        "n": cfg.n,
        "throws": cfg.throws,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "lane": kernel_info()["lane"],
        "mean_terminal": [float(v) for v in mean],
        "stderr_terminal": [float(v) for v in stderr],
    }
    cap = alpha.capacity_index
    columns = ["x"] + [f"gamma_{i}" for i in range(cap + 1)] + ["gamma_over"]
    rows = []
    if result.snapshots is not None:
        snap_mean = result.snapshots.mean(axis=0) / cfg.n
        for throw, state in zip(result.snapshot_throws, snap_mean):
            rows.append([throw / cfg.n, *(float(v) for v in state)])
        payload["snapshot_times"] = [r[0] for r in rows]
        payload["snapshot_mean"] = [r[1:] for r in rows]
    else:
        rows.append([cfg.throws / cfg.n, *(float(v) for v in mean)])
    return payload, (columns, rows)


def _run_oracle(spec: ProblemSpec):
    c = _constraint(spec)
    bound = spec.params["bound"]
    program = endpoint_program(c, support_bound=bound)
    value, argmins = entropy_min_oracle(program)
    classes = [k for k, a in enumerate(c.alpha.head) if a > 0.0]
    payload = {
        "problem": _problem_block(spec),
        "J": value,
        "bound": program.support_bound,
        "reference_rate": program.reference_rate,
        "argmin": {str(k): [float(v) for v in pi]
                   for k, pi in zip(classes, argmins)},
    }
    return payload, None


# ---------------------------------------------------------------------------
# verify battery


def _check_entropy():
    pairs = [((0.2, 0.3, 0.5), (0.5, 0.25, 0.25)),
             ((1.0, 0.0, 0.0), (0.4, 0.3, 0.3)),
             ((0.1, 0.6, 0.3), (0.1, 0.6, 0.3))]
    worst = -math.inf
    for p, q in pairs:
        value = relative_entropy(p, q)
        if value < -1e-15:
            raise AssertionError(f"negative divergence {value}")
        worst = max(worst, -value)
    same = relative_entropy(pairs[2][0], pairs[2][1])
    if abs(same) > 1e-15:
        raise AssertionError(f"D(p||p) = {same}")
    return "nonnegative on probes, zero at equality"

def _check_classical():
    rho, scale, value = classical_rate(0.15, 3.0)
    if abs(rho - 1.1377213911576848) > 1e-12:
        raise AssertionError(f"rho = {rho!r}")
    if abs(value - 0.09165154217768184) > 1e-12:
        raise AssertionError(f"J = {value!r}")
    return f"rho = {rho:.12g}, J = {value:.12g}"


def _check_cost_triangle():
    omega = SimplexVector((0.15, 0.85), 0)
    path = build_empty_extremal(omega, 3.0)
    closed = closed_form_cost(path)
    from .twist import terminal_rate_empty
    generic = terminal_rate_empty(omega, 3.0)
    quad = path_cost(path, points=4001)
    spread = max(abs(closed - generic), abs(closed - quad))
    if spread > 1e-6:
        raise AssertionError(f"triangle spread {spread:.3e}")
    return f"closed/entropy/quadrature within {spread:.1e}"


def _check_euler_lagrange():
    alpha = SimplexVector((0.6, 0.4, 0.0, 0.0), 2)
    omega = SimplexVector((0.25, 0.3, 0.25, 0.2), 2)
    c = EndpointConstraint(alpha, omega, 1.5)
    xs = tuple(float(x) for x in np.linspace(0.15, 1.35, 25))
    best = float(np.max(el_residual(build_general_extremal(c), xs)))
    straight = float(np.max(el_residual(LinearPath(c), xs)))
    if best >= 1e-6:
        raise AssertionError(f"extremal residual {best:.3e}")
    if straight <= 1e-2:
        raise AssertionError(f"linear path residual only {straight:.3e}")
    return f"extremal {best:.1e}, linear path {straight:.1e}"


def _check_oracle_agreement():
    omega = SimplexVector((0.1, 0.25, 0.3, 0.2, 0.15), 3)
    beta = 2.2
    value = terminal_rate_general(
        EndpointConstraint(_empty_like(5), omega, beta))
    oracle_value, _ = entropy_min_oracle(
        endpoint_program(EndpointConstraint(_empty_like(5), omega, beta),
                         support_bound=60))
    gap = abs(value - oracle_value)
    if gap > 1e-5:
        raise AssertionError(f"twist vs oracle gap {gap:.3e}")
    return f"twist vs oracle gap {gap:.1e}"


def _check_decomposition():
    alpha = SimplexVector((0.5, 0.5, 0.0), 1)
    omega = SimplexVector((0.5, 0.0, 0.5), 1)
    value = terminal_rate_general(EndpointConstraint(alpha, omega, 1.0))
    target = 0.7827668758354633
    if abs(value - target) > 1e-10:
        raise AssertionError(f"reducible rate {value!r} != {target!r}")
    return f"reducible split rate matches to {abs(value - target):.1e}"


def _check_overflow():
    solution = overflow_rate(2, 3.0, 1.5)
    if not solution.nu > solution.rho > 1.0:
        raise AssertionError(
            f"sign law broken: rho {solution.rho}, nu {solution.nu}")
    norm = max(abs(v) for v in solution.residuals().values())
    if norm > 1e-9:
        raise AssertionError(f"residual norm {norm:.3e}")
    return f"nu > rho > 1, residuals {norm:.1e}"


def _check_coupon():
    solution = coupon_rate((0.5, 0.3, 0.2), 3, 2.0, 0.55)
    if abs(solution.J_C - 0.18) > 0.01:
        raise AssertionError(f"J_C = {solution.J_C!r}")
    alpha = SimplexVector((0.5, 0.3, 0.2, 0.0, 0.0), 3)
    constraint = LinearTerminalConstraint((1.0,) * 4 + (0.0,), "<=", 0.55)
    via_dispatch, _ = terminal_set_rate(alpha, 2.0, constraint)
    if abs(via_dispatch - solution.J_C) > 1e-12:
        raise AssertionError("dispatch disagrees with coupon_rate")
    return f"J_C = {solution.J_C:.6g}, dispatch agrees"


def _check_kernel_parity(seed: int):
    lanes = available_lanes()
    init = np.array([64, 0, 0, 0], dtype=np.int64)
    ts = np.array([], dtype=np.int64)
    outs = {}
    for name, fn in lanes.items():
        finals, _ = fn(seed, 0, 32, 64, 128, init, ts)
        outs[name] = finals
    if len(outs) == 1:
        return "single lane only (" + next(iter(outs)) + ")"
    vals = list(outs.values())
    if not (vals[0] == vals[1]).all():
        raise AssertionError("lanes disagree")
    return "lanes bit-identical on probe block"


def _check_simulation(seed: int):
    cfg = SimConfig(n=400, beta=2.0, alpha=_empty_like(4), seed=seed,
                    trials=8)
    result = simulate(cfg)
    sums = result.counts.sum(axis=1)
    if not (sums == cfg.n).all():
        raise AssertionError("urn count not conserved")
    again = simulate(cfg)
    if not (again.counts == result.counts).all():
        raise AssertionError("same seed gave different trajectories")
    return "urn count conserved, seeding deterministic"


def _run_verify(spec: ProblemSpec):
    seed = spec.params["seed"]
    checks = [
        ("entropy", _check_entropy),
        ("classical-constants", _check_classical),
        ("cost-triangle", _check_cost_triangle),
        ("euler-lagrange", _check_euler_lagrange),
        ("oracle-agreement", _check_oracle_agreement),
        ("decomposition", _check_decomposition),
        ("overflow-sign-law", _check_overflow),
        ("coupon-instance", _check_coupon),
        ("kernel-parity", lambda: _check_kernel_parity(seed)),
        ("simulation", lambda: _check_simulation(seed)),
    ]
    lines = []
    results = []
    failed = 0
    for name, fn in checks:
        try:
            detail = fn()
            passed = True
        except AssertionError as exc:
            detail = str(exc)
            passed = False
        except UrnRatesError as exc:
            detail = f"{type(exc).__name__}: {exc}"
            passed = False
        if not passed:
            failed += 1
        lines.append(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        results.append({"name": name, "passed": passed, "detail": detail})
    lines.append(f"{len(checks) - failed}/{len(checks)} checks passed")
    payload = {"problem": _problem_block(spec), "checks": results,
               "passed": failed == 0}
    return payload, ("\n".join(lines) + "\n", failed)


# ---------------------------------------------------------------------------
# entry points


_HANDLERS = {
    "rate": _run_rate,
    "path": _run_path,
    "classical": _run_classical,
    "overflow": _run_overflow,
    "coupon": _run_coupon,
    "simulate": _run_simulate,
    "oracle": _run_oracle,
    "verify": _run_verify,
}


def run(spec: ProblemSpec, sink=None) -> int:
    """Execute a parsed problem; write results; return the exit code."""
    out = sink if sink is not None else sys.stdout
    try:
        payload, extra = _HANDLERS[spec.kind](spec)
    except _CliError:
        raise
    except DomainError as exc:
        raise _CliError(1, str(exc)) from exc
    except (InfeasibleInput, InfeasibleTruncation, DegenerateSplit) as exc:
        raise _CliError(2, str(exc)) from exc
    except (SolverFailure, BracketFailure, NewtonDivergence, InvalidPath,
            BoundaryEvaluation, UnsupportedConstraintFamily) as exc:
        raise _CliError(3, str(exc)) from exc

    code = 0
    if spec.kind == "verify":
        text, failed = extra
        code = 3 if failed else 0
        rendered = _to_json(payload) + "\n" if spec.fmt == "json" else text
    elif spec.fmt == "csv":
        if extra is None:
            raise _CliError(1, f"{spec.kind} has no csv form; use json")
        columns, rows = extra
        rendered = _csv(columns, rows)
    else:
        rendered = _to_json(payload) + "\n"

    if spec.output:
        try:
            with open(spec.output, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(rendered)
        except OSError as exc:
            raise _CliError(1, f"cannot write {spec.output!r}: {exc}") from None
    else:
        out.write(rendered)
    return code


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        spec = parse_problem(argv)
        return run(spec)
    except _CliError as exc:
        print(f"urnrates: error: {exc}", file=sys.stderr)
        return exc.code
    except UrnRatesError as exc:
        # anything not mapped above is a library defect surfacing late
        print(f"urnrates: error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    main()
