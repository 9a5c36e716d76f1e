"""Command-line front end: ``tcid <verb> [options]``, JSON on stdout.

Exit codes: 0 success or a positive answer, 3 a negative answer (not
separated, not identifiable, rule inapplicable, Markov violation),
1 usage error, 2 unreadable or invalid input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any, Sequence

from .calculus import CalculusError, backdoor, rule1, rule2, rule3, verify_markov
from .cbn import LiCbn, ModelError, observable_kernel, oracle_do
from .contkernel import DEMOS
from .graph import GraphError, MixedGraph, NotFixableError, fix_graph, fixable, id_separated, latent_project
from .identify import IdentifyError, evaluate, fix_kernel, one_line_identify
from .kernel import KernelError, Rational, marginalize

OK, NEGATIVE, USAGE, BAD_INPUT = 0, 3, 1, 2


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _plain(x: Any) -> Any:
    """Recursively convert to JSON-ready values with 12 significant digits for floats."""
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, float):
        return float(f"{x:.12g}")
    if isinstance(x, Rational):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (frozenset, set)):
        return sorted(_plain(v) for v in x)
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if hasattr(x, "item"):
        return _plain(x.item())
    return str(x)


def dumps(obj: Any) -> str:
    return json.dumps(_plain(obj), sort_keys=True, ensure_ascii=False)


def _read_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from None


def _load_graph(path: str) -> MixedGraph:
    data = _read_json(path)
    try:
        return MixedGraph.from_dict(data)
    except (GraphError, KeyError, TypeError, AttributeError) as exc:
        raise InputError(f"{path}: invalid graph: {exc}") from None


def _load_model(path: str) -> LiCbn:
    data = _read_json(path)
    try:
        return LiCbn.from_dict(data)
    except (ModelError, GraphError, KernelError, KeyError, TypeError, AttributeError) as exc:
        raise InputError(f"{path}: invalid model: {exc}") from None


def _names(s: str | None) -> list[str]:
    if not s:
        return []
    return [n.strip() for n in s.split(",") if n.strip()]


def _projected(g: MixedGraph) -> MixedGraph:
    return latent_project(g) if g.latent else g


def threads() -> int:
    """Parallelism cap from ``TCID_THREADS`` (all current verbs run single-threaded)."""
    raw = os.environ.get("TCID_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"TCID_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"TCID_THREADS must be a positive integer, got {raw!r}")
    return n


# -- verbs


def cmd_sep(args) -> tuple[int, dict]:
    g = _projected(_load_graph(args.graph))
    try:
        sep = id_separated(g, _names(args.a), _names(args.b), _names(args.c))
    except GraphError as exc:
        raise InputError(str(exc)) from None
    return (OK if sep else NEGATIVE), {"separated": sep}


def cmd_identify(args) -> tuple[int, dict]:
    g = _projected(_load_graph(args.graph))
    A, B = _names(args.outcome), _names(args.treatment)
    try:
        res = one_line_identify(g, A, B)
    except (IdentifyError, GraphError) as exc:
        raise InputError(str(exc)) from None
    out: dict = {"status": res.status, "formula_string": res.formula_string()}
    if res.failing_district is not None:
        out["failing_district"] = res.failing_district
    if res.identifiable and args.model:
        m = _load_model(args.model)
        try:
            got = evaluate(res.formula, observable_kernel(m), B)
        except (IdentifyError, KernelError) as exc:
            raise InputError(f"cannot evaluate on this model: {exc}") from None
        out["evaluated_table"] = got.to_dict()
        out["matches_oracle"] = got == marginalize(oracle_do(m, B), A)
    return (OK if res.identifiable else NEGATIVE), out


def cmd_verify_markov(args) -> tuple[int, dict]:
    if args.budget is not None and args.seed is None:
        raise UsageError("--budget samples triples at random and needs --seed")
    m = _load_model(args.model)
    try:
        rep = verify_markov(m, max_subsets=args.budget, seed=args.seed or 0)
    except CalculusError as exc:
        raise InputError(str(exc)) from None
    out = {
        "violations": [
            {"A": A, "B": B, "C": C, "witness": list(map(str, v))} for A, B, C, v in rep.violations
        ],
        "checked": rep.checked,
        "separated": rep.separated,
        "total": rep.total,
        "budget_exhausted": rep.exhausted,
    }
    return (OK if rep.ok else NEGATIVE), out


RULES = {"1": rule1, "2": rule2, "3": rule3, "backdoor": backdoor}


def _parse_sets(items: Sequence[str], allowed: str) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for item in items:
        key, eq, val = item.partition("=")
        if not eq or key not in allowed:
            raise UsageError(f"--sets takes KEY=a,b with KEY in {', '.join(allowed)}; got {item!r}")
        out[key] = _names(val)
    return out


def cmd_calculus(args) -> tuple[int, dict]:
    allowed = "ABF" if args.rule == "backdoor" else "ABCD"
    sets = _parse_sets(args.sets, allowed)
    m = _load_model(args.model)
    try:
        rep = RULES[args.rule](m, **sets)
    except (CalculusError, ModelError) as exc:
        raise InputError(str(exc)) from None
    good = rep.applicable and rep.equality_ok is True
    return (OK if good else NEGATIVE), rep.to_dict()


def cmd_demos(args) -> tuple[int, dict]:
    report = DEMOS[args.name]()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(dumps(report) + "\n")
    return OK, report


def cmd_fix(args) -> tuple[int, dict]:
    g = _projected(_load_graph(args.graph))
    try:
        if not fixable(g, args.node):
            return NEGATIVE, {"fixable": False}
        out: dict = {"fixable": True, "graph": fix_graph(g, args.node).to_dict()}
    except GraphError as exc:
        raise InputError(str(exc)) from None
    if args.model:
        m = _load_model(args.model)
        try:
            out["kernel"] = fix_kernel(observable_kernel(m), args.node, g).to_dict()
        except (IdentifyError, NotFixableError, KernelError) as exc:
            raise InputError(str(exc)) from None
    return OK, out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tcid", description="Exact causal identification checks on finite models.")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    s = sub.add_parser("sep", help="id-separation query")
    s.add_argument("--graph", required=True)
    s.add_argument("--a", required=True, help="comma-separated node ids")
    s.add_argument("--b", default="")
    s.add_argument("--c", default="")
    s.set_defaults(fn=cmd_sep)

    s = sub.add_parser("identify", help="identify P(outcome || do(treatment))")
    s.add_argument("--graph", required=True)
    s.add_argument("--treatment", required=True)
    s.add_argument("--outcome", required=True)
    s.add_argument("--model")
    s.set_defaults(fn=cmd_identify)

    s = sub.add_parser("verify-markov", help="check the global Markov property on a model")
    s.add_argument("--model", required=True)
    s.add_argument("--budget", type=int)
    s.add_argument("--seed", type=int)
    s.set_defaults(fn=cmd_verify_markov)

    s = sub.add_parser("calculus", help="evaluate one calculus rule or back-door adjustment")
    s.add_argument("--rule", required=True, choices=sorted(RULES))
    s.add_argument("--model", required=True)
    s.add_argument("--sets", nargs="*", default=[], metavar="KEY=a,b")
    s.set_defaults(fn=cmd_calculus)

    s = sub.add_parser("demos", help="run a continuous demo")
    s.add_argument("--name", required=True, choices=sorted(DEMOS))
    s.add_argument("--out")
    s.set_defaults(fn=cmd_demos)

    s = sub.add_parser("fix", help="fix one node of a graph (and optionally its observable kernel)")
    s.add_argument("--graph", required=True)
    s.add_argument("--node", required=True)
    s.add_argument("--model")
    s.set_defaults(fn=cmd_fix)
    return p


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        threads()
        if argv is not None and len(argv) == 0:
            raise UsageError("a verb is required")
        args = parser.parse_args(argv)
        code, payload = args.fn(args)
    except UsageError as exc:
        print(f"tcid: usage error: {exc}", file=stderr)
        return USAGE
    except InputError as exc:
        print(f"tcid: input error: {exc}", file=stderr)
        return BAD_INPUT
    stdout.write(dumps(payload) + "\n")
    return code


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
