"""Config-driven convergence experiments and their CSV tables.

A config file is flat ``key = value`` text; ``#`` starts a comment.  Keys:

    experiment      flat-lagrange | sphere-fixed-eps | penalty-sweep |
                    coupled-sweep | probes                    (required)
    levels          "1-5", "0,1,2" or "3"
    epsilon         fixed epsilon, first epsilon of a geometric sweep, or the
                    epsilon paired with the coarsest level of a coupled sweep
    epsilon_ratio   geometric ratio (default 0.5)
    epsilon_count   number of geometric steps (default 5)
    coupled_c       C in epsilon = C h^2, or "auto" (default)
    quad_degree     quadrature degree for loads and errors (default 4)
    output          CSV (or probe report) path
    mesh_family     polar | octa, sphere experiments only (default polar)
    constraint_mode penalty | lagrange, sphere-fixed-eps only (default penalty)
    penalty_weight  multiplies the penalty term (default 1)
    epsilon0        coercivity probe parameter (default 0.01)
    coplanar_level  octasphere level of the coplanar probe (default 4)
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .assembly import FESpace, assemble_forms, assemble_load
from .exceptions import ConfigError
from .mesh import (
    TriangleMesh,
    build_disc_mesh,
    build_octasphere,
    build_polar_sphere,
    mesh_size,
)
from .metrics import H1, L2, W1p, ErrorRow, fe_error_norm, fill_eocs, lambda_error
from .problems import ExactProblem, SPHERE_W_MEAN, flat_problem, sphere_problem
from .saddle import HARD_CONSTRAINT_EPSILON, SaddleConfig, SolutionBundle, solve_lagrange, solve_penalty

EXPERIMENTS = ("flat-lagrange", "sphere-fixed-eps", "penalty-sweep", "coupled-sweep", "probes")
W_EXPONENT = 4.0 / 3.0

_DEFAULT_LEVELS = {
    "flat-lagrange": (0, 1, 2, 3, 4),
    "sphere-fixed-eps": (1, 2, 3, 4, 5),
    "penalty-sweep": (5,),
    "coupled-sweep": (1, 2, 3, 4, 5),
    "probes": (1, 2, 3),
}


@dataclass(frozen=True)
class EpsilonSchedule:
    kind: str  # "none", "fixed", "geometric" or "coupled"
    value: float = 0.0
    ratio: float = 0.5
    count: int = 5
    C: Optional[float] = None  # coupled only; None means "epsilon at the coarsest level"
    exponent: float = 2.0

    def __post_init__(self):
        if self.kind not in ("none", "fixed", "geometric", "coupled"):
            raise ConfigError(f"unknown epsilon schedule {self.kind!r}")
        if self.kind != "none" and not self.value > 0:
            raise ConfigError("epsilon must be positive")
        if self.kind == "geometric" and not (0 < self.ratio < 1 and self.count >= 1):
            raise ConfigError("geometric schedule needs 0 < ratio < 1 and count >= 1")

    def sweep(self) -> list[float]:
        return [self.value * self.ratio**k for k in range(self.count)]

    def coupled_constant(self, h_coarsest: float) -> float:
        return self.C if self.C is not None else self.value / h_coarsest**self.exponent

    def describe(self, h_coarsest: float | None = None) -> str:
        if self.kind == "none":
            return "none"
        if self.kind == "fixed":
            return f"fixed({self.value:g})"
        if self.kind == "geometric":
            return f"geometric(eps0={self.value:g}, ratio={self.ratio:g}, count={self.count})"
        C = self.coupled_constant(h_coarsest) if h_coarsest else self.C
        return f"coupled(C={C:.6e}, exponent={self.exponent:g})"


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    levels: tuple
    schedule: EpsilonSchedule = EpsilonSchedule("none")
    quad_degree: int = 4
    output: Optional[str] = None
    mesh_family: str = "polar"
    constraint_mode: str = "penalty"
    penalty_weight: float = 1.0
    epsilon0: float = 0.01
    coplanar_level: int = 4

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.name!r}; choose from {EXPERIMENTS}")
        if not self.levels or any(int(k) < 0 for k in self.levels):
            raise ConfigError("levels must be a nonempty list of nonnegative integers")
        if list(self.levels) != sorted(set(self.levels)):
            raise ConfigError("levels must be strictly increasing")
        if self.mesh_family not in ("polar", "octa"):
            raise ConfigError(f"unknown mesh_family {self.mesh_family!r}")
        if self.constraint_mode not in ("penalty", "lagrange"):
            raise ConfigError(f"unknown constraint_mode {self.constraint_mode!r}")
        if not self.penalty_weight > 0:
            raise ConfigError("penalty_weight must be positive")
        if self.quad_degree not in (1, 2, 3, 4, 5, 6):
            raise ConfigError("quad_degree must be in 1..6")
        if self.name in ("penalty-sweep",) and self.schedule.kind != "geometric":
            raise ConfigError("penalty-sweep needs a geometric epsilon schedule")
        if self.name == "coupled-sweep" and self.schedule.kind != "coupled":
            raise ConfigError("coupled-sweep needs a coupled epsilon schedule")


def parse_levels(text: str) -> tuple:
    text = text.strip()
    try:
        if "-" in text:
            lo, hi = (int(t) for t in text.split("-", 1))
            levels = tuple(range(lo, hi + 1))
        else:
            levels = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse levels {text!r}") from exc
    if not levels:
        raise ConfigError(f"empty level range {text!r}")
    return levels


def read_config(text: str) -> dict:
    """Parse key = value lines into a dict of strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


_KEYS = {
    "experiment", "levels", "epsilon", "epsilon_ratio", "epsilon_count", "coupled_c",
    "quad_degree", "output", "mesh_family", "constraint_mode", "penalty_weight",
    "epsilon0", "coplanar_level",
}


def _num(raw: dict, key: str, default, cast=float):
    if key not in raw:
        return default
    try:
        return cast(raw[key])
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw[key]!r}") from exc


def spec_from_mapping(raw: dict) -> ExperimentSpec:
    unknown = set(raw) - _KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "experiment" not in raw:
        raise ConfigError("config needs an 'experiment' key")
    name = raw["experiment"]
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    levels = parse_levels(raw["levels"]) if "levels" in raw else _DEFAULT_LEVELS[name]
    if name == "flat-lagrange" or name == "probes":
        schedule = EpsilonSchedule("none")
    elif name == "sphere-fixed-eps":
        schedule = EpsilonSchedule("fixed", _num(raw, "epsilon", HARD_CONSTRAINT_EPSILON))
    elif name == "penalty-sweep":
        schedule = EpsilonSchedule(
            "geometric",
            _num(raw, "epsilon", 0.2),
            _num(raw, "epsilon_ratio", 0.5),
            _num(raw, "epsilon_count", 5, int),
        )
    else:
        c_raw = raw.get("coupled_c", "auto").strip().lower()
        C = None if c_raw == "auto" else _num(raw, "coupled_c", None)
        if C is not None and not C > 0:
            raise ConfigError("coupled_c must be positive")
        schedule = EpsilonSchedule("coupled", _num(raw, "epsilon", 0.2), C=C)
    return ExperimentSpec(
        name=name,
        levels=levels,
        schedule=schedule,
        quad_degree=_num(raw, "quad_degree", 4, int),
        output=raw.get("output"),
        mesh_family=raw.get("mesh_family", "polar"),
        constraint_mode=raw.get("constraint_mode", "penalty"),
        penalty_weight=_num(raw, "penalty_weight", 1.0),
        epsilon0=_num(raw, "epsilon0", 0.01),
        coplanar_level=_num(raw, "coplanar_level", 4, int),
    )


def load_spec(path: str | Path, overrides: dict | None = None) -> ExperimentSpec:
    """Read a config file; ``overrides`` (key -> string) replace file values."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    raw = read_config(text)
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = str(v)
    return spec_from_mapping(raw)


# ---------------------------------------------------------------- tables


@dataclass
class EOCTable:
    """Rows of one experiment plus '#' provenance lines for the CSV."""

    columns: list
    rows: list  # list of ErrorRow
    header: list = field(default_factory=list)
    eoc_variable: str = "h"

    def value(self, row: ErrorRow, col: str):
        if col == "h":
            return row.h
        if col == "epsilon":
            return row.epsilon
        if col.startswith("EOC_"):
            return row.eocs.get(col[4:])
        if col.startswith("E_"):
            return row.errors.get(col[2:])
        return row.extra.get(col)

    def column(self, col: str) -> list:
        return [self.value(r, col) for r in self.rows]

    def to_csv(self) -> str:
        lines = [f"# {h}" for h in self.header]
        lines.append(",".join(self.columns))
        for row in self.rows:
            lines.append(",".join(_fmt(self.value(row, c)) for c in self.columns))
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_csv())


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.5e}"


def read_csv(path: str | Path) -> tuple[list, list]:
    """Header comments and rows (dicts of floats or None) of a written table."""
    header, rows, cols = [], [], None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            header.append(line[1:].strip())
        elif cols is None:
            cols = line.split(",")
        else:
            vals = [float(t) if t else None for t in line.split(",")]
            rows.append(dict(zip(cols, vals)))
    return header, rows


# ---------------------------------------------------------------- running


@dataclass
class LevelResult:
    mesh: TriangleMesh
    space: FESpace
    bundle: SolutionBundle
    h: float


def _sphere_mesh(family: str, level: int) -> TriangleMesh:
    return build_polar_sphere(level) if family == "polar" else build_octasphere(level)


def mesh_for(problem: str, level: int, family: str = "polar") -> TriangleMesh:
    if problem == "flat":
        return build_disc_mesh(level)
    if problem == "sphere":
        return _sphere_mesh(family, level)
    raise ConfigError(f"unknown problem {problem!r}")


def solve_problem(
    problem: ExactProblem,
    mesh: TriangleMesh,
    epsilon: float | None = None,
    quad_degree: int = 4,
    penalty_weight: float = 1.0,
    space: FESpace | None = None,
    forms=None,
) -> LevelResult:
    """Assemble and solve one instance; ``epsilon=None`` selects hard constraints."""
    sphere = mesh.geometry.is_sphere
    if space is None:
        space = FESpace(mesh, dirichlet=not sphere)
    if forms is None:
        forms = assemble_forms(space, problem.c_weights)
    F = assemble_load(space, problem.f, quad_degree)
    G = assemble_load(space, problem.g, quad_degree)
    mode = "lagrange" if epsilon is None else "penalty"
    config = SaddleConfig(
        problem.points,
        problem.Z,
        mode,
        epsilon,
        mean_constraint_u=sphere,
        mean_constraint_w=sphere,
        dirichlet=not sphere,
        penalty_weight=penalty_weight,
    )
    solver = solve_lagrange if mode == "lagrange" else solve_penalty
    bundle = solver(forms, space, F, G, config)
    return LevelResult(mesh, space, bundle, mesh_size(mesh).h)


def error_row(
    problem: ExactProblem, res: LevelResult, quad_degree: int, epsilon: float | None = None
) -> ErrorRow:
    V, b = res.space, res.bundle
    wk = W1p(W_EXPONENT)
    errors = {
        "L2_u": fe_error_norm(V, b.u, problem.u, L2, quad_degree)[1],
        "H1_u": fe_error_norm(V, b.u, problem.u, H1, quad_degree)[1],
        "L2_w": fe_error_norm(V, b.w, problem.w, L2, quad_degree)[1],
        "W1p_w": fe_error_norm(V, b.w, problem.w, wk, quad_degree)[1],
    }
    lam = b.lam if b.lam is not None else b.multiplier_recovery
    extra = {"level": res.mesh.level, "ndof": V.ndof}
    if problem.lambda_exact is not None and lam is not None:
        errors["l2_lambda"] = lambda_error(lam, problem.lambda_exact)
    if lam is not None:
        for label, val in zip(problem.labels, lam):
            extra[f"lam_{label}"] = float(val)
    if problem.w_unshifted is not None:
        extra["E_L2_w_unshifted"] = fe_error_norm(V, b.w, problem.w_unshifted, L2, quad_degree)[1]
        extra["E_W1p_w_unshifted"] = fe_error_norm(V, b.w, problem.w_unshifted, wk, quad_degree)[1]
    if b.p_bar is not None:
        extra["p_bar"] = b.p_bar
    if b.q_bar is not None:
        extra["q_bar"] = b.q_bar
    extra["relative_residual"] = b.diagnostics.get("relative_residual")
    return ErrorRow(h=res.h, epsilon=epsilon, errors=errors, extra=extra)


_ERROR_COLUMNS = [
    "E_L2_u", "E_H1_u", "EOC_L2_u", "EOC_H1_u",
    "E_L2_w", "E_W1p_w", "EOC_L2_w", "EOC_W1p_w",
    "E_l2_lambda", "EOC_l2_lambda",
]


def _columns(problem: ExactProblem, with_eps: bool) -> list:
    cols = ["level", "h"] + (["epsilon"] if with_eps else []) + ["ndof"] + _ERROR_COLUMNS
    if problem.w_unshifted is not None:
        cols += ["E_L2_w_unshifted", "E_W1p_w_unshifted", "p_bar", "q_bar"]
    cols += [f"lam_{label}" for label in problem.labels]
    return cols + ["relative_residual"]


def _header(spec: ExperimentSpec, problem: ExactProblem, family: str, schedule: str,
            mode: str, eoc_var: str) -> list:
    lam = problem.lambda_exact
    lines = [
        f"membrane-split {__version__}",
        f"experiment: {spec.name}",
        f"problem: {problem.name}",
        f"mesh_family: {family}",
        f"quad_degree: {spec.quad_degree}",
        f"epsilon_schedule: {schedule}",
        f"constraint_mode: {mode}",
        f"penalty_weight: {spec.penalty_weight:g}",
        f"lambda_order: {','.join(problem.labels)}",
        "lambda_exact: " + ("absent" if lam is None else ",".join(f"{v:.6e}" for v in lam)),
        "W1p exponent: 4/3 (full norm)",
        f"eoc_variable: {eoc_var}",
        "errors: relative, on the discrete surface",
    ]
    if problem.w_unshifted is not None:
        lines.append(
            f"w_shift: exact w = log(1-x3) - ({SPHERE_W_MEAN:.6e}) to satisfy the mean-zero "
            "constraint; E_*_w_unshifted compare against log(1-x3)"
        )
    return lines


def run_experiment(spec: ExperimentSpec, write: bool = True):
    """Run one experiment; returns an EOCTable (or probe reports for "probes")."""
    if spec.name == "probes":
        from .probes import run_probe_suite

        reports = run_probe_suite(
            levels=spec.levels, epsilon0=spec.epsilon0, coplanar_level=spec.coplanar_level
        )
        if write and spec.output:
            path = Path(spec.output)
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="\n") as fh:
                fh.write("".join(r.line() + "\n" for r in reports))
        return reports

    qd = spec.quad_degree
    if spec.name == "flat-lagrange":
        problem = flat_problem()
        family = "ring-disc"
        rows = [
            error_row(problem, solve_problem(problem, build_disc_mesh(k), None, qd), qd)
            for k in spec.levels
        ]
        table = EOCTable(
            _columns(problem, False), rows,
            _header(spec, problem, family, "none", "lagrange", "h"),
        )
    else:
        problem = sphere_problem()
        family = "polar-sphere" if spec.mesh_family == "polar" else "octasphere"
        pw = spec.penalty_weight
        if spec.name == "sphere-fixed-eps":
            lagrange = spec.constraint_mode == "lagrange"
            eps = None if lagrange else spec.schedule.value
            rows = []
            for k in spec.levels:
                res = solve_problem(problem, _sphere_mesh(spec.mesh_family, k), eps, qd, pw)
                rows.append(error_row(problem, res, qd, eps))
            mode = "lagrange" if lagrange else "penalty"
            sched = "none" if lagrange else spec.schedule.describe()
            table = EOCTable(
                _columns(problem, True), rows, _header(spec, problem, family, sched, mode, "h")
            )
        elif spec.name == "penalty-sweep":
            mesh = _sphere_mesh(spec.mesh_family, max(spec.levels))
            space = FESpace(mesh)
            forms = assemble_forms(space, problem.c_weights)
            rows = []
            for eps in spec.schedule.sweep():
                res = solve_problem(problem, mesh, eps, qd, pw, space, forms)
                rows.append(error_row(problem, res, qd, eps))
            table = EOCTable(
                _columns(problem, True), rows,
                _header(spec, problem, family, spec.schedule.describe(), "penalty", "epsilon"),
                eoc_variable="epsilon",
            )
        else:
            meshes = [_sphere_mesh(spec.mesh_family, k) for k in spec.levels]
            hs = [mesh_size(m).h for m in meshes]
            C = spec.schedule.coupled_constant(hs[0])
            rows = []
            for m, h in zip(meshes, hs):
                eps = C * h**spec.schedule.exponent
                rows.append(error_row(problem, solve_problem(problem, m, eps, qd, pw), qd, eps))
            table = EOCTable(
                _columns(problem, True), rows,
                _header(spec, problem, family, spec.schedule.describe(hs[0]), "penalty", "h"),
            )
    fill_eocs(table.rows, by=table.eoc_variable)
    if write and spec.output:
        table.write(spec.output)
    return table

