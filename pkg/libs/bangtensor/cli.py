"""
Command-Line Driver
`bt` subcommands: check, normalize, op, instantiate, prove, eval and render
"""
from __future__ import annotations

import argparse
import sys
from typing import Callable, Dict, List, Optional, Sequence

from libs.bangtensor.boxops import BoxOp, OpKind, apply_op, fresh_for, weaken
from libs.bangtensor.calculus import Equation, ProofChecker
from libs.bangtensor.core import check_wellformed, normalize
from libs.bangtensor.errors import BangTensorError, NotFoundError, ParseError
from libs.bangtensor.instantiate import enumerate_instances
from libs.bangtensor.model import check_equation_instances, load_model
from libs.bangtensor.render import to_dot
from libs.bangtensor.syntax import load_proof, load_tensor, load_theory, parse_tensor
from libs.common.audit import ProofAuditLogger
from libs.common.config import get_settings
from libs.common.log_config import configure_logging, get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _out(line: object = "") -> None:
    print(line)


# =============================================================================
# Commands
# =============================================================================


def cmd_check(args: argparse.Namespace) -> int:
    violations = check_wellformed(load_tensor(args.file))
    if not violations:
        _out("well-formed")
        return EXIT_OK
    for violation in violations:
        _out(violation)
    return EXIT_FAILURE


def cmd_normalize(args: argparse.Namespace) -> int:
    _out(normalize(load_tensor(args.file)))
    return EXIT_OK


def cmd_op(args: argparse.Namespace) -> int:
    expr = load_tensor(args.file)
    if args.weaken is not None:
        if args.with_expr is None:
            raise argparse.ArgumentTypeError("--weaken needs --with EXPR")
        _out(weaken(args.weaken, parse_tensor(args.with_expr, source="--with"), expr))
        return EXIT_OK
    for kind in OpKind:
        target = getattr(args, kind.value)
        if target is not None:
            fr = fresh_for([expr]) if kind.needs_fresh else None
            _out(apply_op(BoxOp(kind=kind, target=target, fr=fr), expr))
            return EXIT_OK
    raise argparse.ArgumentTypeError("op needs one of --exp, --kill, --copy, --drop, --weaken")


def cmd_instantiate(args: argparse.Namespace) -> int:
    bound = args.bound if args.bound is not None else get_settings().default_bound
    for instance in enumerate_instances(load_tensor(args.file), bound):
        _out(instance)
    return EXIT_OK


def cmd_prove(args: argparse.Namespace) -> int:
    theory = load_theory(args.theory)
    problems = theory.validate_axioms()
    if problems:
        for problem in problems:
            _out(problem)
        return EXIT_FAILURE

    checker = ProofChecker(theory)
    audit = ProofAuditLogger()
    accepted = True
    for path in args.proofs:
        script = load_proof(path)
        report = checker.check(script)
        for line in report.lines():
            _out(line)
        for verdict in report.theorems:
            audit.log_verdict(verdict.name, verdict.accepted, verdict.errors, script.source)
        accepted = accepted and report.accepted
    return EXIT_OK if accepted else EXIT_FAILURE


def _find_equation(args: argparse.Namespace) -> Equation:
    theory = load_theory(args.theory)
    if args.equation in theory.axioms:
        return theory.axioms[args.equation]
    for path in args.proof or []:
        for theorem in load_proof(path).theorems:
            if theorem.name == args.equation:
                return theorem.statement
    raise NotFoundError(f"no axiom or theorem named {args.equation}")


def cmd_eval(args: argparse.Namespace) -> int:
    equation = _find_equation(args)
    model = load_model(args.model)
    bound = args.bound if args.bound is not None else get_settings().default_bound
    report = check_equation_instances(equation, model, bound)
    for line in report.lines():
        _out(line)
    return EXIT_OK if report.passed else EXIT_FAILURE


def cmd_render(args: argparse.Namespace) -> int:
    sys.stdout.write(to_dot(load_tensor(args.file)).text)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "check": cmd_check,
    "normalize": cmd_normalize,
    "op": cmd_op,
    "instantiate": cmd_instantiate,
    "prove": cmd_prove,
    "eval": cmd_eval,
    "render": cmd_render,
}


# =============================================================================
# Entry point
# =============================================================================


def _nonnegative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("bound must be nonnegative")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bt", description="Non-commutative !-tensor toolkit")
    parser.add_argument(
        "--log-level", default=None, help="structlog level (default from BT_LOG_LEVEL)"
    )
    parser.add_argument("--log-json", action="store_true", help="emit log events as JSON lines")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="report well-formedness violations")
    check.add_argument("file")

    norm = sub.add_parser("normalize", help="print the canonical form")
    norm.add_argument("file")

    op = sub.add_parser("op", help="apply one !-box operation")
    group = op.add_mutually_exclusive_group(required=True)
    for kind in OpKind:
        group.add_argument(f"--{kind.value}", metavar="BOX", default=None)
    group.add_argument("--weaken", metavar="BOX", default=None)
    op.add_argument("--with", dest="with_expr", metavar="EXPR", default=None)
    op.add_argument("file")

    inst = sub.add_parser("instantiate", help="print the concrete instances within a bound")
    inst.add_argument("--bound", type=_nonnegative, default=None)
    inst.add_argument("file")

    prove = sub.add_parser("prove", help="check proof scripts against a theory")
    prove.add_argument("theory")
    prove.add_argument("proofs", nargs="+")

    ev = sub.add_parser("eval", help="check equation instances numerically")
    ev.add_argument("--model", required=True)
    ev.add_argument("--bound", type=_nonnegative, default=None)
    ev.add_argument("--proof", action="append", help="proof file whose theorems may be named")
    ev.add_argument("theory")
    ev.add_argument("equation")

    render = sub.add_parser("render", help="print a DOT rendering")
    render.add_argument("file")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one `bt` command

    Returns:
        0 on success, 1 on a domain failure, 2 on a usage or parse error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK

    settings = get_settings()
    configure_logging(args.log_level or settings.log_level, args.log_json or settings.log_json)
    logger.debug("command_started", command=args.command)

    try:
        return COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except argparse.ArgumentTypeError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BangTensorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def run(argv: Optional[List[str]] = None) -> None:
    sys.exit(main(argv))


if __name__ == "__main__":
    run()
