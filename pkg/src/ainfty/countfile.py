"""Line-oriented count files: parse, canonical emission, merge, reports.

Grammar (one record per line, `#` starts a comment, whitespace-separated):

    format ainfty-counts 1
    arity <int>                       # optional; defaults to max op arity
    strict-degree                     # optional flag
    generator <name> degree=<int>
    beta <id> omega=<p/q> maslov=<int> [generator]
    op k=<int> beta=<id> in=<name,...|-> out=<name> coeff=<int>

`in=-` denotes arity 0.  A combination with several outputs uses one op line
per output; repeating the full (k, beta, in, out) key is an error.  Canonical
emission sorts betas by (omega, maslov) and ops by (k, class, inputs, out),
so emit(parse(emit(t))) == emit(t) byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .algebra import Generator, KeyReport, OperationTable, TableError
from .monoid import BetaClass, MonoidTable, ZERO_CLASS
from .novikov import EnergyCutoff, as_energy, format_rational

FORMAT_LINE = "format ainfty-counts 1"


class ParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class MergeError(ValueError):
    """Incompatible tables handed to merge."""


@dataclass(frozen=True)
class OpLine:
    k: int
    beta: str
    inputs: tuple[str, ...]
    out: str
    coeff: int
    line: int = 0


@dataclass
class CountFile:
    """Parsed count file prior to table assembly."""

    generators: list[Generator] = field(default_factory=list)
    betas: list[tuple[BetaClass, bool]] = field(default_factory=list)  # (class, is_generator)
    ops: list[OpLine] = field(default_factory=list)
    arity: Optional[int] = None
    strict_degree: bool = False

    def beta_by_id(self) -> dict[str, BetaClass]:
        return {b.ident: b for b, _ in self.betas}

    def monoid(self, window: Optional[EnergyCutoff] = None) -> MonoidTable:
        if window is None:
            top = max((b.omega for b, _ in self.betas), default=Fraction(0))
            window = EnergyCutoff(top)
        return MonoidTable([b for b, gen in self.betas if gen], window)

    def table(self, window: Optional[EnergyCutoff] = None) -> OperationTable:
        monoid = self.monoid(window)
        by_id = self.beta_by_id()
        entries: dict[tuple, dict[str, int]] = {}
        for op in self.ops:
            beta = monoid.resolve(by_id[op.beta])
            key = (op.k, beta, op.inputs)
            combo = entries.setdefault(key, {})
            combo[op.out] = combo.get(op.out, 0) + op.coeff
        return OperationTable(
            self.generators, monoid, entries,
            max_arity=self.arity, strict_degree=self.strict_degree,
        )


def _split_kv(token: str, key: str, line: int) -> str:
    if not token.startswith(key + "="):
        raise ParseError(f"expected {key}=..., got {token!r}", line)
    return token[len(key) + 1:]


def parse(text: str) -> CountFile:
    cf = CountFile()
    seen_format = False
    gen_names: dict[str, int] = {}
    beta_ids: dict[str, int] = {}
    op_keys: dict[tuple, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if not seen_format:
            if line != FORMAT_LINE:
                raise ParseError(f"first record must be {FORMAT_LINE!r}", lineno)
            seen_format = True
            continue
        kind = tokens[0]
        if kind == "arity":
            if len(tokens) != 2:
                raise ParseError("arity takes one integer", lineno)
            cf.arity = int(tokens[1])
        elif kind == "strict-degree":
            if len(tokens) != 1:
                raise ParseError("strict-degree takes no arguments", lineno)
            cf.strict_degree = True
        elif kind == "generator":
            if len(tokens) != 3:
                raise ParseError("generator <name> degree=<int>", lineno)
            name = tokens[1]
            if name in gen_names:
                raise ParseError(
                    f"generator {name!r} already declared on line {gen_names[name]}",
                    lineno,
                )
            try:
                degree = int(_split_kv(tokens[2], "degree", lineno))
                cf.generators.append(Generator(name, degree))
            except TableError as exc:
                raise ParseError(str(exc), lineno)
            gen_names[name] = lineno
        elif kind == "beta":
            if len(tokens) not in (4, 5):
                raise ParseError("beta <id> omega=<p/q> maslov=<int> [generator]", lineno)
            ident = tokens[1]
            if ident in beta_ids:
                raise ParseError(
                    f"beta {ident!r} already declared on line {beta_ids[ident]}", lineno
                )
            try:
                omega = as_energy(Fraction(_split_kv(tokens[2], "omega", lineno)))
            except (ValueError, ZeroDivisionError) as exc:
                raise ParseError(f"bad omega: {exc}", lineno)
            try:
                maslov = int(_split_kv(tokens[3], "maslov", lineno))
            except ValueError:
                raise ParseError("maslov must be an integer", lineno)
            is_gen = False
            if len(tokens) == 5:
                if tokens[4] != "[generator]":
                    raise ParseError(f"unexpected trailer {tokens[4]!r}", lineno)
                is_gen = True
            try:
                cf.betas.append((BetaClass(ident, omega, maslov), is_gen))
            except ValueError as exc:
                raise ParseError(str(exc), lineno)
            beta_ids[ident] = lineno
        elif kind == "op":
            if len(tokens) != 6:
                raise ParseError(
                    "op k=<int> beta=<id> in=<names|-> out=<name> coeff=<int>", lineno
                )
            try:
                k = int(_split_kv(tokens[1], "k", lineno))
                beta = _split_kv(tokens[2], "beta", lineno)
                raw_in = _split_kv(tokens[3], "in", lineno)
                out = _split_kv(tokens[4], "out", lineno)
                coeff = int(_split_kv(tokens[5], "coeff", lineno))
            except ValueError as exc:
                raise ParseError(str(exc), lineno)
            inputs: tuple[str, ...] = () if raw_in == "-" else tuple(raw_in.split(","))
            if k != len(inputs):
                raise ParseError(f"k={k} but {len(inputs)} inputs", lineno)
            if beta not in beta_ids:
                raise ParseError(f"undeclared beta {beta!r}", lineno)
            for name in inputs + (out,):
                if name not in gen_names:
                    raise ParseError(f"undeclared generator {name!r}", lineno)
            key = (k, beta, inputs, out)
            if key in op_keys:
                raise ParseError(
                    f"duplicate op key (also on line {op_keys[key]})", lineno
                )
            op_keys[key] = lineno
            if coeff != 0:
                cf.ops.append(OpLine(k, beta, inputs, out, coeff, lineno))
        else:
            raise ParseError(f"unknown record {kind!r}", lineno)
    if not seen_format:
        raise ParseError(f"missing {FORMAT_LINE!r} header")
    return cf


def emit(table: OperationTable) -> str:
    """Canonical count-file text for a table."""
    lines = [FORMAT_LINE, f"arity {table.max_arity}"]
    if table.strict_degree:
        lines.append("strict-degree")
    for g in table.generators:
        lines.append(f"generator {g.name} degree={g.degree}")

    used = {beta.key for (_, beta, _), _ in table.entries()}
    declared: dict[tuple, BetaClass] = {ZERO_CLASS.key: ZERO_CLASS}
    for g in table.monoid.generators:
        declared[g.key] = g
    for key in used:
        if key not in declared:
            declared[key] = table.monoid.resolve(BetaClass("tmp", *key))
    gen_keys = {g.key for g in table.monoid.generators}
    for key in sorted(declared):
        beta = declared[key]
        trailer = " [generator]" if key in gen_keys else ""
        lines.append(
            f"beta {beta.ident} omega={format_rational(beta.omega)} "
            f"maslov={beta.maslov}{trailer}"
        )

    ident_of = {key: b.ident for key, b in declared.items()}
    for (k, beta, inputs), combo in table.entries():
        raw_in = ",".join(inputs) if inputs else "-"
        for out in sorted(combo):
            lines.append(
                f"op k={k} beta={ident_of[beta.key]} in={raw_in} "
                f"out={out} coeff={combo[out]}"
            )
    return "\n".join(lines) + "\n"


def merge(morse: OperationTable, external: OperationTable) -> OperationTable:
    """Union of a computed zero-class table with external curved counts.

    The zero class is owned by the Morse computation: any external entry at
    beta = 0 is rejected.  Generator lists must agree exactly.  Absent
    combinations of arity up to the merged declared arity count as zero for
    every class, so the external block should declare its arity to cover
    whatever level it solved.
    """
    if morse.generators != external.generators:
        raise MergeError("generator sets differ between the tables")
    for (k, beta, inputs), _ in morse.entries():
        if not beta.is_zero():
            raise MergeError("the computed table may only populate the zero class")
    entries: dict[tuple, dict[str, int]] = {}
    for (k, beta, inputs), combo in morse.entries():
        entries[(k, external.monoid.resolve(beta), inputs)] = combo
    for (k, beta, inputs), combo in external.entries():
        if beta.is_zero():
            raise MergeError(
                f"external entry at the zero class (k={k}, in={','.join(inputs) or '-'}): "
                "beta = 0 is owned by the Morse computation"
            )
        key = (k, beta, inputs)
        if key in entries:
            raise MergeError(f"colliding entry {key}")
        entries[key] = combo
    return OperationTable(
        morse.generators, external.monoid, entries,
        max_arity=max(morse.max_arity, external.max_arity),
        strict_degree=morse.strict_degree or external.strict_degree,
    )


def render_report(reports: Sequence[KeyReport], fmt: str = "text") -> str:
    """Human or machine rendering of verifier output."""
    checked = sum(1 for r in reports if r.status != "skipped")
    defects = sum(1 for r in reports if r.status == "defect")
    skipped = sum(1 for r in reports if r.status == "skipped")
    lines = []
    if fmt == "machine":
        for r in reports:
            lines.append(f"key k={r.k} beta={r.beta.ident} status={r.status}")
            if r.defect is not None:
                for inputs, combo in r.defect.value.items():
                    raw_in = ",".join(inputs) if inputs else "-"
                    for out in sorted(combo):
                        lines.append(
                            f"defect k={r.k} beta={r.beta.ident} in={raw_in} "
                            f"out={out} coeff={combo[out]}"
                        )
        lines.append(f"summary checked={checked} defects={defects} skipped={skipped}")
    elif fmt == "text":
        for r in reports:
            head = f"relation k={r.k} beta={r.beta.ident}: {r.status}"
            if r.status == "skipped":
                head += f" ({r.reason})"
            lines.append(head)
            if r.defect is not None:
                for inputs, combo in r.defect.value.items():
                    shown = " + ".join(
                        f"{combo[out]}*{out}" for out in sorted(combo)
                    )
                    lines.append(f"  on ({','.join(inputs) or '-'}): {shown}")
        verdict = "FAIL" if defects else "PASS"
        lines.append(
            f"{verdict}: {checked} relations checked, {defects} with defects, "
            f"{skipped} skipped"
        )
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return "\n".join(lines) + "\n"
