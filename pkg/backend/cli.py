import argparse
import io
import json
import logging
import sys
from fractions import Fraction
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from nrspace import curvature
from nrspace.algebra import AlgebraSpec, reconcile_with_oracle, resolve_space, save_spec, spec_to_json, validate, vector
from nrspace.config import get_log_level, get_rk_step, get_sample_count, get_seed, get_taylor_order, get_truncation_tolerance
from nrspace.errors import DirectionError, NRSpaceError, SpecError, TruncationError, UnsupportedSpaceError
from nrspace.jacobi import evaluate_A, fitted_series, jacobi_field_grid, ode_trajectory, taylor_series
from nrspace.scalars import Radical, binomial_identity_report
from nrspace.volume import QuadratureConfig, volume_table

logger = logging.getLogger("nrspace.cli")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class CliConfig(BaseModel):
    command: str
    space: str = "sp2_su2"
    direction: str = "random:0"
    t_start: float = 0.0
    t_stop: float = 1.0
    t_steps: int = Field(default=10, ge=1)
    output: Optional[str] = None
    format: Literal["csv", "json"] = "csv"
    samples: int = Field(default_factory=get_sample_count, ge=1)
    seed: int = Field(default_factory=get_seed, ge=0)
    order: int = Field(default_factory=get_taylor_order, ge=2)
    rk: bool = False
    field: Optional[str] = None
    integrator: Literal["simpson", "gauss"] = "simpson"
    antithetic: bool = False
    max_k: int = Field(default=20, ge=0)

    def grid(self) -> List[float]:
        return [float(t) for t in np.linspace(self.t_start, self.t_stop, self.t_steps + 1)]


def positive_int(value: str) -> int:
    ivalue = int(value)
    if ivalue < 1:
        raise argparse.ArgumentTypeError("Value must be positive")
    return ivalue


def parse_direction(spec: AlgebraSpec, text: str):
    """Comma-separated coordinates on m (normalized), or random:<seed>."""
    text = text.strip()
    if text.startswith("random:"):
        try:
            seed = int(text.split(":", 1)[1])
        except ValueError as exc:
            raise DirectionError(f"bad random direction {text!r}") from exc
        rng = np.random.default_rng(seed)
        return curvature.normalize_direction(rng.standard_normal(spec.dim_m))
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != spec.dim_m:
        raise DirectionError(f"direction needs {spec.dim_m} coordinates, got {len(parts)}")
    try:
        exact = [Fraction(p.strip()) for p in parts]
    except ValueError:
        exact = None
    if exact is not None and sum(q * q for q in exact) == 1:
        return vector(spec, exact)
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise DirectionError(f"direction coordinates must be numbers: {text!r}") from exc
    return curvature.normalize_direction(values)


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _cell(x) -> str:
    return str(x) if isinstance(x, Radical) else "%.17g" % x


def _matrix_json(E: np.ndarray):
    return [[str(x) if isinstance(x, Radical) else float(x) for x in row] for row in E]


def cmd_validate(config: CliConfig) -> int:
    spec = resolve_space(config.space)
    report = validate(spec)
    oracle_pairs = None
    if spec.name == "sp2_su2":
        _, differing = reconcile_with_oracle(spec)
        oracle_pairs = differing
    if config.format == "json":
        payload = report.model_dump()
        payload["ok"] = report.ok
        if oracle_pairs is not None:
            payload["oracle_disagreements"] = [list(p) for p in oracle_pairs]
        _emit(json.dumps(payload, indent=2) + "\n", config.output)
    else:
        lines = [f"{spec.name}: {len(report.violations)} violations"]
        for kind, count in report.checked.items():
            lines.append(f"  {kind}: {count} checked, {report.count(kind)} violated")
        for violation in report.violations:
            lines.append(f"  {violation.kind} {tuple(violation.indices)}: {violation.detail}")
        if oracle_pairs is not None:
            if oracle_pairs:
                lines.append(f"matrix oracle disagrees on {len(oracle_pairs)} pairs: {oracle_pairs}")
            else:
                lines.append("matrix oracle: all 45 pairs agree")
        _emit("\n".join(lines) + "\n", config.output)
    return EXIT_OK if report.ok else EXIT_FAILURE


def _rank_line(spec: AlgebraSpec, v) -> str:
    if spec.osculating is not None:
        if len(spec.osculating) == 0:
            return "osculating rank: 0 (locally symmetric space)"
        shown = ", ".join(str(c) for c in spec.osculating)
        return f"osculating rank: {len(spec.osculating)} (coefficients {shown})"
    return curvature.osculating_rank(spec, v).describe()


def cmd_curvature(config: CliConfig) -> int:
    spec = resolve_space(config.space)
    v = parse_direction(spec, config.direction)
    matrices = {
        "R_0": curvature.jacobi_operator(spec, v),
        "R^(1)_0": curvature.jacobi_derivative(spec, v, 1),
        "R^(2)_0": curvature.jacobi_derivative(spec, v, 2),
    }
    rank = _rank_line(spec, v)
    first = matrices["R^(1)_0"]
    flat_first = not any(first.flat) if curvature.is_exact(first) else float(np.max(np.abs(first))) <= 1e-12
    if config.format == "json":
        payload = {name: _matrix_json(E) for name, E in matrices.items()}
        payload["rank"] = rank
        payload["locally_symmetric_direction"] = bool(flat_first)
        _emit(json.dumps(payload, indent=2) + "\n", config.output)
        return EXIT_OK
    out = io.StringIO()
    for name, E in matrices.items():
        out.write(f"# {name}\n")
        out.write(curvature.endo_to_csv(E))
    out.write(f"# {rank}\n")
    if flat_first:
        out.write("# locally symmetric along this direction (R^(1)_0 = 0)\n")
    _emit(out.getvalue(), config.output)
    return EXIT_OK


def _field_initial(spec: AlgebraSpec, text: str) -> np.ndarray:
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != spec.dim_m:
        raise DirectionError(f"field initial derivative needs {spec.dim_m} coordinates, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise DirectionError(f"field coordinates must be numbers: {text!r}") from exc


def cmd_jacobi(config: CliConfig) -> int:
    spec = resolve_space(config.space)
    v = parse_direction(spec, config.direction)
    grid = config.grid()
    tolerance = None if config.rk else get_truncation_tolerance()
    explicit_order = "order" in config.model_fields_set
    d = spec.dim_m
    if config.field is not None:
        field = jacobi_field_grid(spec, v, _field_initial(spec, config.field), grid, config.order if explicit_order else None, tolerance)
        header = ["t"] + [f"Y{i}" for i in range(1, d + 1)] + [f"dY{i}" for i in range(1, d + 1)]
        rows = [[t] + list(Y) + list(dY) for t, Y, dY in zip(field.times, field.values, field.derivatives)]
        return _emit_table(config, header, rows)

    if explicit_order:
        series = taylor_series(spec, v, config.order)
    else:
        series = fitted_series(spec, v, max(abs(t) for t in grid), config.order)
    trajectory = ode_trajectory(spec, v, grid, get_rk_step()) if config.rk else None
    header = ["t"] + [f"A{i}_{j}" for i in range(1, d + 1) for j in range(1, d + 1)] + ["det"]
    if config.rk:
        header += ["rk_det", "rk_max_diff"]
    rows = []
    for index, t in enumerate(grid):
        A = evaluate_A(series, t, tolerance).A
        row = [t] + list(A.ravel()) + [float(np.linalg.det(A))]
        if trajectory is not None:
            A_rk = trajectory[index][1]
            row += [float(np.linalg.det(A_rk)), float(np.max(np.abs(A - A_rk)))]
        rows.append(row)
    return _emit_table(config, header, rows)


def _emit_table(config: CliConfig, header: List[str], rows: List[list]) -> int:
    if config.format == "json":
        _emit(json.dumps([dict(zip(header, [float(x) for x in row])) for row in rows], indent=2) + "\n", config.output)
    else:
        text = ",".join(header) + "\n" + "".join(",".join(_cell(x) for x in row) + "\n" for row in rows)
        _emit(text, config.output)
    return EXIT_OK


def cmd_volume(config: CliConfig) -> int:
    spec = resolve_space(config.space)
    quad = QuadratureConfig(
        sample_count=config.samples,
        seed=config.seed,
        t_integrator=config.integrator,
        order=config.order,
        antithetic=config.antithetic,
    )
    rows = volume_table(spec, config.grid(), quad)
    if config.format == "json":
        payload = {
            "config": {"space": spec.name, "seed": quad.seed, "samples": quad.sample_count, "N": quad.order},
            "rows": [row.model_dump() for row in rows],
        }
        _emit(json.dumps(payload, indent=2) + "\n", config.output)
    else:
        fields = ["t", "theta_mean", "theta_stderr", "area", "volume"]
        text = ",".join(fields) + "\n"
        text += "".join(",".join("%.17g" % getattr(row, f) for f in fields) + "\n" for row in rows)
        _emit(text, config.output)
    return EXIT_OK


def cmd_identities(config: CliConfig) -> int:
    report = binomial_identity_report(config.max_k)
    payload = {
        "max_k": report["max_k"],
        "checked": report["checked"],
        "doubled_identities_hold": report["doubled_identities_hold"],
        "shifted_sign_holds": report["shifted_sign_holds"],
        "printed_sign_failures": len(report["printed_sign_failures"]),
    }
    if config.format == "json":
        _emit(json.dumps(payload, indent=2) + "\n", config.output)
    else:
        _emit("".join(f"{k}: {v}\n" for k, v in payload.items()), config.output)
    ok = report["shifted_sign_holds"] and report["doubled_identities_hold"]
    return EXIT_OK if ok else EXIT_FAILURE


def cmd_export(config: CliConfig) -> int:
    spec = resolve_space(config.space)
    if config.output:
        save_spec(spec, config.output)
    else:
        _emit(spec_to_json(spec) + "\n", None)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "curvature": cmd_curvature,
    "jacobi": cmd_jacobi,
    "volume": cmd_volume,
    "identities": cmd_identities,
    "export": cmd_export,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Curvature, Jacobi fields and geodesic volumes on naturally reductive spaces")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--space", type=str, default="sp2_su2", help="Builtin name or spec-file path")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--output", type=str, default=None, help="Output path (stdout when omitted)")

    def grid(p: argparse.ArgumentParser) -> None:
        p.add_argument("--t-start", type=float, default=0.0)
        p.add_argument("--t-stop", type=float, default=1.0)
        p.add_argument("--t-steps", type=positive_int, default=10)
        p.add_argument("--order", type=int, default=None, help="Taylor truncation order N")

    common(sub.add_parser("validate", help="Check the algebraic hypotheses of a space"))

    p = sub.add_parser("curvature", help="Print R_0, R^(1)_0, R^(2)_0 and the osculating rank")
    common(p)
    p.add_argument("--direction", type=str, default="random:0", help='Comma-separated coordinates or "random:<seed>"')

    p = sub.add_parser("jacobi", help="Tabulate A_t and det A_t")
    common(p)
    grid(p)
    p.add_argument("--direction", type=str, default="random:0")
    p.add_argument("--rk", action="store_true", help="Add RK4 oracle columns")
    p.add_argument("--field", type=str, default=None, help="Tabulate the Jacobi field with Y(0) = 0 and this Y'(0) on m")

    p = sub.add_parser("volume", help="Tabulate sphere areas and ball volumes")
    common(p)
    grid(p)
    p.add_argument("--samples", type=positive_int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--integrator", choices=["simpson", "gauss"], default="simpson")
    p.add_argument("--antithetic", action="store_true")

    p = sub.add_parser("identities", help="Brute-force the binomial identities")
    p.add_argument("--max-k", type=int, default=20)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--output", type=str, default=None)

    p = sub.add_parser("export", help="Write a space as a JSON spec file")
    p.add_argument("--space", type=str, default="sp2_su2")
    p.add_argument("--output", type=str, default=None)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=get_log_level(), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    values = {k: v for k, v in vars(args).items() if v is not None}
    try:
        config = CliConfig(**values)
        return COMMANDS[config.command](config)
    except (SpecError, UnsupportedSpaceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TruncationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except NRSpaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except ValueError as exc:
        # pydantic ValidationError is a ValueError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
