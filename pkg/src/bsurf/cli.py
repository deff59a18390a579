"""Command line front end: `bsurf <command> [options] <file|flags>`

Scenario files are JSON objects with `"version": 1`. Matrices are lists of integer
rows and are reduced modulo n on load. Exit codes: 0 success, 2 malformed input,
3 violated precondition or cap, 4 a certificate contradicting the theory it checks.
"""

import argparse
import json
import logging
import sys
from numbers import Integral
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import pandas as pd

from bsurf import config
from bsurf.brauer import (
    IntegerActionGroup,
    SurfaceKind,
    SurfaceScenario,
    abelian_level_required,
    brauer_n_torsion_bound,
    brauer_n_torsion_order,
    c_constant,
    exactness_status,
    field_degree_budget,
    h1_integer_action,
    over_q_bound,
)
from bsurf.errors import PreconditionError, SchemaError, TheoremViolation
from bsurf.gl2 import (
    MatrixGroup,
    RealQuadMatrix,
    classify_abelian,
    classify_finite_real,
    commutant,
    enumerate_abelian,
)
from bsurf.lattice import (
    build_family_gram,
    build_kummer_lattice,
    build_lambda_prod,
    hyperbolic_plane,
    lattice_report,
)
from bsurf.modring import ModMatrix, ResidueMatrix, prime_factors
from bsurf.simulation import INSTANCE_KINDS, random_equivariant_instance
from bsurf.torsionhom import (
    ActionPair,
    EndStructure,
    IsogenyData,
    PairAction,
    end_structure_for_action,
    end_structure_from_commutant,
    end_structure_from_divisors,
    geometric_hom_fixed,
    invariant_homs,
    synthesize_isogeny,
    transcendental_quotient,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_PRECONDITION = 3
EXIT_THEOREM = 4

Report = Tuple[Dict[str, Any], pd.DataFrame]


# scenario files


def load_scenario(path: str | Path) -> Dict[str, Any]:
    """Read and version-check a scenario file

    Raises:
        SchemaError: Unreadable file, invalid JSON, not an object, or an unsupported version
    """
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise SchemaError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path} is not valid JSON: {e}") from e

    if not isinstance(payload, dict):
        raise SchemaError("a scenario file holds a JSON object")
    if payload.get("version") != config.SCHEMA_VERSION:
        raise SchemaError(f"unsupported scenario version {payload.get('version')!r}, expected {config.SCHEMA_VERSION}")
    return payload


def _is_int(value: Any) -> bool:
    return isinstance(value, Integral) and not isinstance(value, bool)


def _integer(payload: Dict[str, Any], key: str, default: int | None = None, minimum: int | None = None) -> int:
    if key not in payload:
        if default is None:
            raise SchemaError(f"missing integer field {key!r}")
        return default
    value = payload[key]
    if not _is_int(value):
        raise SchemaError(f"field {key!r} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise SchemaError(f"field {key!r} must be at least {minimum}, got {value}")
    return int(value)


def _boolean(payload: Dict[str, Any], key: str, default: bool = False) -> bool:
    value = payload.get(key, default)
    if not isinstance(value, bool):
        raise SchemaError(f"field {key!r} must be true or false, got {value!r}")
    return value


def _int_matrix(value: Any, size: int | None = 2, what: str = "matrix") -> List[List[int]]:
    if not isinstance(value, list) or not value or not all(isinstance(row, list) for row in value):
        raise SchemaError(f"{what} must be a list of integer rows, got {value!r}")
    width = len(value[0])
    if any(len(row) != width for row in value) or (size is not None and (len(value), width) != (size, size)):
        raise SchemaError(f"{what} has the wrong shape: {value!r}")
    if not all(_is_int(x) for row in value for x in row):
        raise SchemaError(f"{what} entries must be integers: {value!r}")
    return [[int(x) for x in row] for row in value]


def _residue(value: Any, n: int, what: str = "matrix") -> ResidueMatrix:
    return ResidueMatrix(_int_matrix(value, 2, what), n)


def _matrix_list(payload: Dict[str, Any], key: str, n: int) -> List[ResidueMatrix]:
    value = payload.get(key)
    if not isinstance(value, list):
        raise SchemaError(f"field {key!r} must be a list of matrices")
    return [_residue(m, n, f"{key}[{i}]") for i, m in enumerate(value)]


def _prime_power(n: int) -> Tuple[int, int]:
    factors = prime_factors(n)
    if len(factors) != 1:
        raise PreconditionError(f"modulus {n} is not a prime power")
    ((ell, s),) = factors.items()
    return ell, s


def _rows(matrix: ModMatrix) -> List[List[int]]:
    return matrix.array.tolist()


def _fields(values: Dict[str, Any]) -> pd.DataFrame:
    return pd.DataFrame({"field": list(values), "value": [str(v) for v in values.values()]})


def _action(payload: Dict[str, Any], n: int) -> PairAction:
    pairs = payload.get("pairs")
    if not isinstance(pairs, list):
        raise SchemaError("field 'pairs' must be a list of {source, target, chi} objects")
    parsed = []
    for i, pair in enumerate(pairs):
        if not isinstance(pair, dict):
            raise SchemaError(f"pairs[{i}] must be an object")
        chi = _integer(pair, "chi", 1)
        if chi not in (1, -1):
            raise SchemaError(f"pairs[{i}].chi must be 1 or -1, got {chi}")
        parsed.append(
            ActionPair(
                _residue(pair.get("source"), n, f"pairs[{i}].source"),
                _residue(pair.get("target"), n, f"pairs[{i}].target"),
                chi,
            )
        )
    return PairAction(parsed, n)


def _isogeny(payload: Dict[str, Any], n: int) -> IsogenyData:
    d = _integer(payload, "d", minimum=1)
    if "phi" in payload or "phi_dual" in payload:
        return IsogenyData(d, _residue(payload.get("phi"), n, "phi"), _residue(payload.get("phi_dual"), n, "phi_dual"), n)
    return synthesize_isogeny(d, n)


# commands


def cmd_commutant(args: argparse.Namespace) -> Report:
    payload = load_scenario(args.file)
    n = _integer(payload, "modulus", minimum=2)
    matrix = _residue(payload.get("matrix"), n)
    ell, s = _prime_power(n)
    result = commutant(matrix, ell, s)

    report = {
        "modulus": n,
        "matrix": _rows(matrix),
        "mu": result.mu,
        "generators": [_rows(g) for g in result.generators],
        "shape": list(result.shape.factors),
        "order": result.shape.order,
    }
    table = _fields({"modulus": n, "mu": result.mu, "shape": result.shape, "order": result.shape.order})
    return report, table


def cmd_end_invariants(args: argparse.Namespace) -> Report:
    payload = load_scenario(args.file)
    n = _integer(payload, "modulus", minimum=2)
    image = MatrixGroup(_matrix_list(payload, "generators", n), n, args.cap)

    structural = end_structure_from_commutant(image)
    scanned = end_structure_from_divisors(image)
    agree = (structural.n1, structural.n2) == (scanned.n1, scanned.n2)

    report = {
        "modulus": n,
        "commutant": {"n1": structural.n1, "n2": structural.n2},
        "divisor_scan": {"n1": scanned.n1, "n2": scanned.n2},
        "agree": agree,
    }
    table = pd.DataFrame(
        {
            "method": ["commutant", "divisor scan"],
            "n": [n, n],
            "n1": [structural.n1, scanned.n1],
            "n2": [structural.n2, scanned.n2],
            "status": ["AGREE" if agree else "DISAGREE"] * 2,
        }
    )
    if not agree:
        _emit(args, report, table)
        raise TheoremViolation("commutant and divisor scan disagree on (n1, n2)", report)
    return report, table


def cmd_hom_invariants(args: argparse.Namespace) -> Report:
    payload = load_scenario(args.file)
    n = _integer(payload, "modulus", minimum=2)
    if "random" in payload:
        options = payload["random"]
        if not isinstance(options, dict):
            raise SchemaError("field 'random' must be an object")
        kind = options.get("kind", "random")
        if kind not in INSTANCE_KINDS:
            raise SchemaError(f"random.kind must be one of {INSTANCE_KINDS}, got {kind!r}")
        action, iso = random_equivariant_instance(
            n,
            _integer(options, "d", minimum=1),
            _boolean(options, "twisted"),
            kind,
            _integer(options, "generators", 2, minimum=1),
            args.seed,
        )
    else:
        action, iso = _action(payload, n), _isogeny(payload, n)

    homs = invariant_homs(action)
    geometric = geometric_hom_fixed(iso, action.twist_nontrivial)
    quotient = transcendental_quotient(action, iso)

    report = {
        "modulus": n,
        "d": iso.d,
        "seed": args.seed,
        "twisted": action.twist_nontrivial,
        "pairs": [[_rows(p.source), _rows(p.target), p.chi] for p in action.pairs],
        "invariant_homs": list(homs.shape.factors),
        "geometric": list(geometric.shape.factors),
        "quotient": list(quotient.factors),
        "quotient_order": quotient.order,
    }
    table = _fields(
        {
            "modulus": n,
            "d": iso.d,
            "twisted": action.twist_nontrivial,
            "Hom_k": homs.shape,
            "geometric": geometric.shape,
            "quotient": quotient,
            "quotient order": quotient.order,
        }
    )
    return report, table


def cmd_classify_abelian(args: argparse.Namespace) -> Report:
    payload = load_scenario(args.file)
    ell = _integer(payload, "ell", minimum=2)
    s = _integer(payload, "s", minimum=1)
    group = MatrixGroup(_matrix_list(payload, "generators", ell**s), ell**s, args.cap)
    tag = classify_abelian(group, ell, s)

    report = {
        "ell": ell,
        "s": s,
        "kind": tag.kind.value,
        "label": tag.label,
        "level": tag.level,
        "t": tag.t,
        "epsilon": tag.epsilon,
        "conjugator": _rows(tag.conjugator),
    }
    table = _fields({"normal form": tag.label, "level": tag.level, "conjugator": _rows(tag.conjugator)})
    return report, table


def cmd_enumerate_abelian(args: argparse.Namespace) -> Report:
    result = enumerate_abelian(args.ell, args.s, threads=args.threads)
    report = {
        "ell": result.ell,
        "s": result.s,
        "count": result.count,
        "max_order": result.max_order,
        "bound": result.bound,
        "histogram": result.histogram,
    }
    table = pd.DataFrame(
        {
            "order": [c.order for c in result.classes],
            "normal form": [c.tag.label for c in result.classes],
            "generators": [[list(g.entries) for g in c.generators] for c in result.classes],
        }
    )
    return report, table


def _scenario(payload: Dict[str, Any]) -> SurfaceScenario:
    if not isinstance(payload, dict):
        raise SchemaError("field 'scenario' must be an object")
    kind = payload.get("surface_kind", SurfaceKind.ABELIAN_TORSOR.value)
    try:
        surface_kind = SurfaceKind(kind)
    except ValueError as e:
        raise SchemaError(f"unknown surface kind {kind!r}") from e
    return SurfaceScenario(
        n=_integer(payload, "n", minimum=1),
        d=_integer(payload, "d", minimum=1),
        period=_integer(payload, "period", 1, minimum=1),
        twist_nontrivial=_boolean(payload, "twist_nontrivial"),
        base_change_degree=_integer(payload, "base_change_degree", 1),
        surface_kind=surface_kind,
    )


def cmd_brauer_bound(args: argparse.Namespace) -> Report:
    payload = load_scenario(args.file)
    if payload.get("preset") == "over-q":
        certificate = over_q_bound(_integer(payload, "d", minimum=1))
        report = {"preset": "over-q", **certificate.as_dict()}
        return report, _certificate_table(certificate.as_dict())

    scenario = _scenario(payload.get("scenario"))
    n = scenario.n
    hom_quotient = None
    if "end_structure" in payload:
        end = payload["end_structure"]
        if not isinstance(end, dict):
            raise SchemaError("field 'end_structure' must be an object")
        ratio = end.get("twisted_ratio_order")
        if ratio is not None and not _is_int(ratio):
            raise SchemaError("end_structure.twisted_ratio_order must be an integer")
        try:
            end_struct = EndStructure(n, _integer(end, "n1", minimum=1), _integer(end, "n2", minimum=1), ratio)
        except ValueError as e:
            raise SchemaError(str(e)) from e
    elif "pairs" in payload:
        action = _action(payload, n)
        end_struct = end_structure_for_action(action)
        hom_quotient = brauer_n_torsion_order(scenario, action, _isogeny({**payload, "d": scenario.d}, n))
    else:
        raise SchemaError("brauer-bound needs 'end_structure', 'pairs' or the 'over-q' preset")

    certificate = brauer_n_torsion_bound(scenario, end_struct)
    report = {
        "scenario": {
            "n": n,
            "d": scenario.d,
            "period": scenario.period,
            "twist_nontrivial": scenario.twist_nontrivial,
            "base_change_degree": scenario.base_change_degree,
            "surface_kind": scenario.surface_kind.value,
        },
        "field_degree_budget": field_degree_budget(scenario),
        "c": c_constant(scenario),
        "abelian_level": abelian_level_required(scenario),
        "embedding": exactness_status(scenario).value,
        **certificate.as_dict(),
    }
    table = _certificate_table(certificate.as_dict())
    if hom_quotient is not None:
        report["hom_quotient"] = hom_quotient.as_dict()
        row = {"factor": ["Hom quotient"], "value": [str(hom_quotient.value)], "status": [hom_quotient.exactness.value]}
        table = pd.concat([table, pd.DataFrame(row)], ignore_index=True)
    return report, table


def _certificate_table(certificate: Dict[str, Any]) -> pd.DataFrame:
    factors = certificate["factors"]
    return pd.DataFrame(
        {
            "factor": [f["label"] for f in factors] + ["bound"],
            "value": [f"{f['base']}^{f['exponent']}" for f in factors] + [str(certificate["value"])],
            "status": [""] * len(factors) + [certificate["exactness"]],
        }
    )


def cmd_lattice(args: argparse.Namespace) -> Report:
    if args.family_d is not None:
        lattice = build_family_gram(args.family_d)
    elif args.kummer:
        lattice = build_kummer_lattice()
    elif args.lambda_prod:
        lattice = build_lambda_prod()
    else:
        lattice = hyperbolic_plane()
    report = lattice_report(lattice).as_dict()
    return report, _fields(report)


def cmd_h1(args: argparse.Namespace) -> Report:
    payload = load_scenario(args.file)
    rank = _integer(payload, "rank", minimum=1)
    generators = payload.get("generators", [])
    if not isinstance(generators, list):
        raise SchemaError("field 'generators' must be a list of integer matrices")
    matrices = [_int_matrix(g, rank, f"generators[{i}]") for i, g in enumerate(generators)]
    abstract = payload.get("abstract_order")
    if abstract is not None and (not _is_int(abstract) or abstract < 1):
        raise SchemaError("abstract_order must be a positive integer")

    group = IntegerActionGroup(matrices, rank=rank, closure_cap=args.cap, abstract_order=abstract)
    order = h1_integer_action(group)
    report = {
        "rank": rank,
        "group_order": group.order(),
        "h1_order": order,
        "divides": group.order() ** rank % order == 0,
    }
    return report, _fields(report)


def cmd_finite_gl2r(args: argparse.Namespace) -> Report:
    payload = load_scenario(args.file)
    d = _integer(payload, "d", minimum=2)
    generators = payload.get("generators")
    if not isinstance(generators, list):
        raise SchemaError("field 'generators' must be a list of matrices")

    matrices = []
    for i, g in enumerate(generators):
        if not isinstance(g, list) or len(g) != 2 or any(not isinstance(row, list) or len(row) != 2 for row in g):
            raise SchemaError(f"generators[{i}] must be a 2x2 matrix")
        for value in (x for row in g for x in row):
            pair = value if isinstance(value, list) else [value, 0]
            if len(pair) != 2 or not all(_is_int(x) for x in pair):
                raise SchemaError(f"generators[{i}] entries are integers or [a, b] for a + b*sqrt(d)")
        matrices.append(RealQuadMatrix([[tuple(x) if isinstance(x, list) else x for x in row] for row in g], d))

    kind = classify_finite_real(matrices)
    report = {"family": kind.family, "order": kind.order, "contains_minus_identity": kind.contains_minus_identity}
    return report, _fields({"type": kind.label, "-I in G": kind.contains_minus_identity})


COMMANDS = {
    "commutant": (cmd_commutant, "Commutant of a matrix over Z/l^s"),
    "end-invariants": (cmd_end_invariants, "(n, n1, n2) of End_k(E_n) for a Galois image"),
    "hom-invariants": (cmd_hom_invariants, "Galois-invariant Hom(E_n, E'_n) modulo the geometric part"),
    "classify-abelian": (cmd_classify_abelian, "Normal form of an abelian subgroup of GL2(Z/l^s)"),
    "enumerate-abelian": (cmd_enumerate_abelian, "Abelian subgroups of GL2(Z/l^s) up to conjugacy"),
    "brauer-bound": (cmd_brauer_bound, "Bound on the transcendental Brauer n-torsion"),
    "lattice": (cmd_lattice, "Rank, determinant, parity and signature of a named lattice"),
    "h1-bound": (cmd_h1, "Order of H^1(G, Z^r) for a finite integer action"),
    "finite-gl2r": (cmd_finite_gl2r, "Type of a finite rational-trace subgroup of GL2(R)"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="Print machine-readable JSON.")
    common.add_argument("--seed", type=int, default=config.DEFAULT_SEED, help="Seed for randomized inputs.")
    common.add_argument("--threads", type=int, default=1, help="Worker threads for enumeration.")
    common.add_argument("--cap", type=int, default=None, help=f"Closure cap; overrides ${config.CAP_ENV_VAR}.")
    common.add_argument("-v", "--verbose", action="count", default=0, help="Log more; repeat for debug output.")

    parser = argparse.ArgumentParser(prog="bsurf", description="Exact computations behind Brauer group bounds")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name, (_, description) in COMMANDS.items():
        sub = subparsers.add_parser(name, parents=[common], help=description, description=description)
        if name == "enumerate-abelian":
            sub.add_argument("--ell", type=int, required=True, help="Odd prime l.")
            sub.add_argument("--s", type=int, required=True, help="Exponent s.")
        elif name == "lattice":
            selector = sub.add_mutually_exclusive_group(required=True)
            selector.add_argument("--family-d", type=int, help="NS lattice of the product family with isogeny degree d.")
            selector.add_argument("--kummer", action="store_true", help="The Kummer lattice.")
            selector.add_argument("--lambda-prod", action="store_true", help="Kummer lattice plus a hyperbolic plane.")
            selector.add_argument("--hyperbolic", action="store_true", help="The hyperbolic plane U.")
        else:
            sub.add_argument("file", help="Scenario file (JSON, version 1).")

    return parser


def _emit(args: argparse.Namespace, report: Dict[str, Any], table: pd.DataFrame):
    if args.json:
        print(json.dumps(report, sort_keys=True, indent=2))
    else:
        print(table.to_string(index=False))


def main(argv: Sequence[str] | None = None) -> int:
    """Run one command and return its exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_SCHEMA

    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        args.cap = config.closure_cap(args.cap)
        command, _ = COMMANDS[args.command]
        report, table = command(args)
    except SchemaError as e:
        print(f"bsurf: invalid input: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except TheoremViolation as e:
        print(f"bsurf: certificate failed: {e}", file=sys.stderr)
        print(json.dumps(e.data, sort_keys=True, default=str), file=sys.stderr)
        return EXIT_THEOREM
    except (PreconditionError, ValueError) as e:
        print(f"bsurf: {e}", file=sys.stderr)
        return EXIT_PRECONDITION

    _emit(args, report, table)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
