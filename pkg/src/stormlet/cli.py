"""Command-line interface: load a model, check properties, report results.

Exit codes: 0 all checks completed; 1 usage or parse error; 2 some bounded
property is false at an initial state (only with --fail-on-false);
3 numerical non-convergence; 4 semantic model error.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, checkers, explicit, props
from .errors import (
    InputError,
    ModelError,
    NotConverged,
    ParseError,
    PropertyError,
    SolverError,
    StormletError,
)
from .prism import ExploreOptions, explore, parse_program, typecheck
from .prism.semantics import TypecheckError
from .solvers import SolverEnvironment

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PROPERTY_FALSE = 2
EXIT_NOT_CONVERGED = 3
EXIT_MODEL_ERROR = 4


@dataclass
class RunConfig:
    explicit_paths: tuple = None  # (tra, lab)
    srew_path: str = None
    trew_path: str = None
    prism_path: str = None
    constants: dict = field(default_factory=dict)
    properties: list = field(default_factory=list)
    env: SolverEnvironment = None
    exact: bool = False
    fix_deadlocks: bool = False
    fail_on_false: bool = False
    export_model: str = None
    output_format: str = "human"  # human | json


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_argparser():
    p = _Parser(prog="stormlet", description="Probabilistic model checker for DTMCs, CTMCs and MDPs.")
    src = p.add_argument_group("model input")
    src.add_argument("--explicit", nargs=2, metavar=("TRA", "LAB"),
                     help="explicit transitions file and labels file")
    src.add_argument("--srew", metavar="FILE", help="state rewards file (with --explicit)")
    src.add_argument("--trew", metavar="FILE", help="action rewards file (with --explicit)")
    src.add_argument("--prism", metavar="FILE", help="program file in the supported language subset")
    src.add_argument("--constants", metavar="K=V,...", default="",
                     help="comma-separated bindings for undefined program constants")
    prop = p.add_argument_group("properties")
    prop.add_argument("--prop", action="append", default=[], metavar="PROPERTY",
                      help="property string (repeatable)")
    prop.add_argument("--prop-file", metavar="FILE", help="property file, one property per line")
    solver = p.add_argument_group("solver")
    solver.add_argument("--solver", choices=["jacobi", "gauss-seidel", "exact"],
                        default="gauss-seidel", help="linear equation method")
    solver.add_argument("--minmax", choices=["vi", "pi"], default="vi",
                        help="Bellman equation method (value/policy iteration)")
    solver.add_argument("--precision", type=float, default=1e-6)
    solver.add_argument("--absolute", action="store_true",
                        help="absolute instead of relative convergence criterion")
    solver.add_argument("--max-iter", type=int, default=1_000_000)
    solver.add_argument("--exact", action="store_true",
                        help="exact rational arithmetic end to end")
    p.add_argument("--fix-deadlocks", action="store_true",
                   help="patch deadlock states with a self-loop instead of failing")
    p.add_argument("--fail-on-false", action="store_true",
                   help="exit with code 2 if a bounded property is false at an initial state")
    p.add_argument("--export-model", metavar="DIR",
                   help="write the built model in explicit format to this directory")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--version", action="version", version=f"stormlet {__version__}")
    return p


def _parse_constants(text):
    constants = {}
    if not text:
        return constants
    for part in text.split(","):
        if "=" not in part:
            raise ParseError(f"constant binding {part!r} is not of the form name=value")
        name, value = part.split("=", 1)
        name = name.strip()
        value = value.strip()
        if not name:
            raise ParseError(f"empty constant name in {part!r}")
        if value in ("true", "false"):
            constants[name] = value == "true"
        else:
            try:
                constants[name] = int(value)
            except ValueError:
                try:
                    constants[name] = Fraction(value)
                except (ValueError, ZeroDivisionError):
                    raise ParseError(f"cannot parse constant value {value!r}")
    return constants


def parse_args(argv):
    ns = _build_argparser().parse_args(argv)
    if (ns.explicit is None) == (ns.prism is None):
        _fail_usage("exactly one of --explicit and --prism is required")
    if ns.prism is None and (ns.constants or "") != "" and ns.constants:
        _fail_usage("--constants needs --prism")
    if (ns.srew or ns.trew) and ns.explicit is None:
        _fail_usage("--srew/--trew need --explicit")

    properties = list(ns.prop)
    if ns.prop_file:
        try:
            text = Path(ns.prop_file).read_text(encoding="utf-8")
        except OSError as exc:
            _fail_usage(f"cannot read property file: {exc}")
        for line in text.splitlines():
            if "//" in line:
                line = line[: line.index("//")]
            line = line.strip()
            if line:
                properties.append(line)
    if not properties:
        _fail_usage("at least one property is required (--prop or --prop-file)")

    if ns.exact:
        env = SolverEnvironment(
            linear_method="exact",
            minmax_method="policy_iteration",
            precision=ns.precision,
            criterion="absolute" if ns.absolute else "relative",
            max_iterations=ns.max_iter,
            exact=True,
        )
    else:
        env = SolverEnvironment(
            linear_method=ns.solver.replace("-", "_"),
            minmax_method="policy_iteration" if ns.minmax == "pi" else "value_iteration",
            precision=ns.precision,
            criterion="absolute" if ns.absolute else "relative",
            max_iterations=ns.max_iter,
        )
    return RunConfig(
        explicit_paths=tuple(ns.explicit) if ns.explicit else None,
        srew_path=ns.srew,
        trew_path=ns.trew,
        prism_path=ns.prism,
        constants=_parse_constants(ns.constants),
        properties=properties,
        env=env,
        exact=ns.exact,
        fix_deadlocks=ns.fix_deadlocks,
        fail_on_false=ns.fail_on_false,
        export_model=ns.export_model,
        output_format="json" if ns.json else "human",
    )


def _fail_usage(message):
    print(f"stormlet: error: {message}", file=sys.stderr)
    raise SystemExit(EXIT_USAGE)


def _load_model(config):
    if config.explicit_paths is not None:
        tra, lab = config.explicit_paths
        bundle = explicit.ExplicitBundle(
            Path(tra).read_text(encoding="utf-8"),
            Path(lab).read_text(encoding="utf-8"),
            Path(config.srew_path).read_text(encoding="utf-8") if config.srew_path else None,
            Path(config.trew_path).read_text(encoding="utf-8") if config.trew_path else None,
        )
        model = explicit.build_model(
            bundle, rational=config.exact, fix_deadlocks=config.fix_deadlocks
        )
        return model, None
    source = Path(config.prism_path).read_text(encoding="utf-8")
    program = parse_program(source)
    typed = typecheck(program, config.constants)
    options = ExploreOptions(fix_deadlocks=config.fix_deadlocks, exact=config.exact)
    return explore(typed, options)


def _value_text(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return str(v)
    v = float(v)
    if math.isinf(v):
        return "inf"
    if math.isnan(v):
        return "NaN"
    return f"{v:.6g}"


def _value_json(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, Fraction):
        return str(v)
    v = float(v)
    if math.isinf(v):
        return "inf"
    if math.isnan(v):
        return "NaN"
    return v


def format_result(result, fmt, property_text, initial_states):
    """Render a check result for the given initial states."""
    if fmt == "human":
        lines = [f"Property: {property_text}"]
        for s in initial_states:
            lines.append(f"Result (state {s}): {_value_text(result.values[s])}")
        return "\n".join(lines) + "\n"
    meta = {
        k: v
        for k, v in result.metadata.items()
        if k in ("iterations", "method", "prob0", "prob1", "direction", "product_states")
    }
    payload = {
        "property": property_text,
        "values": {str(s): _value_json(result.values[s]) for s in initial_states},
        "metadata": meta,
    }
    return json.dumps(payload, sort_keys=True) + "\n"


def _export(model, directory):
    bundle = explicit.write_model(model)
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.tra").write_text(bundle.transitions_text, encoding="utf-8")
    (out / "model.lab").write_text(bundle.labels_text, encoding="utf-8")
    if bundle.state_rewards_text is not None:
        (out / "model.srew").write_text(bundle.state_rewards_text, encoding="utf-8")
    if bundle.action_rewards_text is not None:
        (out / "model.trew").write_text(bundle.action_rewards_text, encoding="utf-8")


def run(config):
    # STORMLET_THREADS caps internal parallelism; the built-in solvers are
    # sequential by contract, so any value behaves like 1.
    os.environ.get("STORMLET_THREADS")
    try:
        model, state_map = _load_model(config)
    except (ParseError, TypecheckError) as exc:
        print(f"stormlet: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, StormletError) as exc:
        print(f"stormlet: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL_ERROR

    if config.export_model:
        _export(model, config.export_model)

    initial = [int(s) for s in np.flatnonzero(model.initial_states)]
    if not initial:
        initial = [0]

    outputs = []
    some_false = False
    for text in config.properties:
        try:
            ast = props.parse_property(text)
            resolved = props.resolve_atoms(ast, model, state_map)
            result = checkers.check(model, resolved, config.env)
        except ParseError as exc:
            print(f"stormlet: property parse error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        except NotConverged as exc:
            print(f"stormlet: {exc}", file=sys.stderr)
            return EXIT_NOT_CONVERGED
        except (PropertyError, SolverError, ModelError) as exc:
            print(f"stormlet: {exc}", file=sys.stderr)
            return EXIT_MODEL_ERROR
        outputs.append(format_result(result, config.output_format, text, initial))
        values = result.values
        if isinstance(values, np.ndarray) and values.dtype == bool:
            if not all(bool(values[s]) for s in initial):
                some_false = True

    sys.stdout.write("".join(outputs))
    if config.fail_on_false and some_false:
        return EXIT_PROPERTY_FALSE
    return EXIT_OK


def main(argv=None):
    try:
        config = parse_args(sys.argv[1:] if argv is None else argv)
    except ParseError as exc:
        print(f"stormlet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
