"""Command line interface: tree combinatorics, Morse tables, verification."""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from typing import Optional

from . import countfile
from .algebra import degree_defects, verify
from .monoid import UnknownClassError
from .morse import MorseSolverError, SolverSettings, build_morse_table, get_model
from .novikov import EnergyCutoff, NovikovElement, NovikovError, parse_element
from .trees import TreeError, contraction_poset, enumerate_trees


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ainfty",
        description="Curved A-infinity operation tables on Morse complexes: "
                    "enumerate ribbon trees, count gradient flow trees on the "
                    "model manifolds, verify the relations on count files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    trees = sub.add_parser("trees", help="ribbon tree combinatorics")
    tsub = trees.add_subparsers(dest="trees_command", required=True)
    te = tsub.add_parser("enumerate", help="list trees as canonical strings")
    te.add_argument("--external", type=int, required=True,
                    help="number of external vertices (root plus leaves)")
    te.add_argument("--adjacency", action="store_true",
                    help="also print indented adjacency listings")
    tp = tsub.add_parser("poset", help="covering relations of the contraction order")
    tp.add_argument("--external", type=int, required=True)
    tp.add_argument("--figures", metavar="DIR",
                    help="render the Hasse diagram into DIR")

    morse = sub.add_parser("morse", help="gradient flow tree counts")
    msub = morse.add_subparsers(dest="morse_command", required=True)
    mt = msub.add_parser("table", help="emit the zero-class operation table")
    mt.add_argument("--model", required=True, choices=["circle", "torus", "flat_torus_2d"])
    mt.add_argument("--max-k", type=int, default=2)
    mt.add_argument("--figures", metavar="DIR",
                    help="render the model's flow portrait into DIR")
    mh = msub.add_parser("homology", help="free homology ranks of (CM, m_1)")
    mh.add_argument("--model", required=True, choices=["circle", "torus", "flat_torus_2d"])

    nov = sub.add_parser("novikov", help="Novikov ring arithmetic")
    nsub = nov.add_subparsers(dest="novikov_command", required=True)
    ne = nsub.add_parser("eval", help="evaluate a ring expression")
    ne.add_argument("expression", help="terms like 2*T^1/2*e^1 combined with + - * ( )")
    ne.add_argument("--cutoff", metavar="P/Q", help="energy window")

    ver = sub.add_parser("verify", help="check the relations on a count file")
    ver.add_argument("--input", required=True, metavar="FILE")
    ver.add_argument("--bound", type=int, required=True,
                     help="check every (k, beta) with norm(beta)+k <= bound")
    ver.add_argument("--cutoff", metavar="P/Q",
                     help="monoid closure window (default: largest declared omega)")
    ver.add_argument("--strict-degree", action="store_true",
                     help="also require deg(out) = sum deg(in) + 2 - k - maslov")
    ver.add_argument("--format", choices=["text", "machine"], default="text")
    ver.add_argument("--figures", metavar="DIR",
                     help="render the per-relation status strip into DIR")
    return parser


def _novikov_eval(expression: str, cutoff) -> NovikovElement:
    """Tiny recursive-descent evaluator over the term grammar.

    Atoms are integers, T^<p/q> and e^<int>; the element syntax
    2*T^1/2*e^1 is the product of its atoms, so plain elements evaluate to
    themselves.
    """
    import re

    tokens = re.findall(r"T\^\d+(?:/\d+)?|e\^[+-]?\d+|\d+|[()+\-*]",
                        expression.replace(" ", ""))
    if "".join(tokens) != expression.replace(" ", ""):
        raise NovikovError(f"cannot tokenize {expression!r}")
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        return tok

    def atom() -> NovikovElement:
        tok = peek()
        if tok is None:
            raise NovikovError("unexpected end of expression")
        if tok == "(":
            take()
            value = expr()
            if peek() != ")":
                raise NovikovError("missing closing parenthesis")
            take()
            return value
        if tok == "-":
            take()
            return -atom()
        take()
        if tok.startswith("T^"):
            return NovikovElement.monomial(1, Fraction(tok[2:]), 0, cutoff=cutoff)
        if tok.startswith("e^"):
            return NovikovElement.monomial(1, 0, int(tok[2:]), cutoff=cutoff)
        if tok.isdigit():
            return NovikovElement.monomial(int(tok), 0, 0, cutoff=cutoff)
        raise NovikovError(f"unexpected token {tok!r}")

    def product() -> NovikovElement:
        value = atom()
        while peek() == "*":
            take()
            value = value * atom()
        return value

    def expr() -> NovikovElement:
        if peek() == "-":
            take()
            value = -product()
        else:
            value = product()
        while peek() in ("+", "-"):
            op = take()
            rhs = product()
            value = value + rhs if op == "+" else value - rhs
        return value

    result = expr()
    if pos != len(tokens):
        raise NovikovError(f"trailing tokens near {tokens[pos]!r}")
    return result


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    out = sys.stdout
    try:
        if args.command == "trees":
            if args.trees_command == "enumerate":
                for t in enumerate_trees(args.external):
                    print(t.canonical(), file=out)
                    if args.adjacency:
                        print(t.adjacency_listing(), file=out)
            else:
                poset = contraction_poset(args.external)
                for i, j in sorted(poset.covers):
                    print(f"{poset.trees[i].canonical()} > "
                          f"{poset.trees[j].canonical()}", file=out)
                if args.figures:
                    from . import figures
                    print(f"# figure: {figures.poset_figure(poset, args.figures)}",
                          file=sys.stderr)
            return 0

        if args.command == "morse":
            model = get_model(args.model)
            if args.morse_command == "table":
                table = build_morse_table(model, args.max_k)
                out.write(countfile.emit(table))
                if args.figures:
                    from . import figures
                    print(f"# figure: {figures.morse_figure(model, args.figures)}",
                          file=sys.stderr)
            else:
                from .algebra import homology_ranks
                table = build_morse_table(model, 1)
                ranks = homology_ranks(table)
                print(" ".join(f"H^{i}={r}" for i, r in enumerate(ranks)), file=out)
            return 0

        if args.command == "novikov":
            cutoff = Fraction(args.cutoff) if args.cutoff else None
            print(_novikov_eval(args.expression, cutoff), file=out)
            return 0

        if args.command == "verify":
            with open(args.input, "r", encoding="utf-8") as handle:
                text = handle.read()
            cf = countfile.parse(text)
            window = EnergyCutoff(Fraction(args.cutoff)) if args.cutoff else None
            table = cf.table(window)
            reports = verify(table, args.bound)
            failed = any(r.status == "defect" for r in reports)
            out.write(countfile.render_report(reports, args.format))
            if args.strict_degree or table.strict_degree:
                degree_bad = degree_defects(table)
                for (k, beta, inputs), name, expected in degree_bad:
                    print(f"degree k={k} beta={beta.ident} "
                          f"in={','.join(inputs) or '-'} out={name} "
                          f"expected_degree={expected}", file=out)
                if degree_bad:
                    failed = True
            if args.figures:
                from . import figures
                print(f"# figure: {figures.report_figure(reports, args.figures)}",
                      file=sys.stderr)
            return 1 if failed else 0

    except (NovikovError, TreeError, UnknownClassError, MorseSolverError,
            countfile.ParseError, countfile.MergeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
