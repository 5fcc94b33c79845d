import itertools
from fractions import Fraction

import pytest

from ainfty.algebra import Generator, OperationTable, verify
from ainfty.countfile import MergeError, ParseError, emit, merge, parse, render_report
from ainfty.monoid import BetaClass, MonoidTable, ZERO_CLASS
from ainfty.novikov import EnergyCutoff

MINIMAL = """\
format ainfty-counts 1
generator a degree=0
beta 0 omega=0 maslov=0
"""

CURVED = """\
format ainfty-counts 1
arity 2
generator u degree=0
generator x degree=1
beta 0 omega=0 maslov=0
beta g omega=1 maslov=2 [generator]
op k=1 beta=0 in=x out=u coeff=2
op k=0 beta=g in=- out=u coeff=-1
op k=2 beta=g in=x,x out=u coeff=3
"""


class TestParse:
    def test_minimal_file(self):
        cf = parse(MINIMAL)
        table = cf.table()
        assert table.entries() == []
        assert [g.name for g in table.generators] == ["a"]

    def test_full_file(self):
        table = parse(CURVED).table()
        assert table.max_arity == 2
        g = BetaClass("g", Fraction(1), 2)
        assert table.op(0, g, ()) == {"u": -1}
        assert table.op(1, ZERO_CLASS, ("x",)) == {"u": 2}

    def test_missing_header(self):
        with pytest.raises(ParseError):
            parse("generator a degree=0\n")

    def test_duplicate_op_key_reports_both_lines(self):
        text = CURVED + "op k=1 beta=0 in=x out=u coeff=5\n"
        with pytest.raises(ParseError) as err:
            parse(text)
        assert "line 10" in str(err.value) and "line 7" in str(err.value)

    def test_undeclared_symbols(self):
        with pytest.raises(ParseError, match="undeclared beta"):
            parse(MINIMAL + "op k=0 beta=g in=- out=a coeff=1\n")
        with pytest.raises(ParseError, match="undeclared generator"):
            parse(MINIMAL + "beta 0b omega=1 maslov=0 [generator]\n"
                  "op k=1 beta=0b in=zz out=a coeff=1\n")

    def test_odd_maslov_and_negative_omega(self):
        with pytest.raises(ParseError, match="even"):
            parse("format ainfty-counts 1\nbeta b omega=1 maslov=3\n")
        with pytest.raises(ParseError, match="omega"):
            parse("format ainfty-counts 1\nbeta b omega=-1 maslov=2\n")

    def test_arity_mismatch(self):
        with pytest.raises(ParseError, match="inputs"):
            parse(MINIMAL + "beta g omega=1 maslov=0 [generator]\n"
                  "op k=2 beta=g in=a out=a coeff=1\n")

    def test_comments_and_blank_lines(self):
        text = "# leading comment\n\n" + CURVED.replace(
            "generator u degree=0", "generator u degree=0   # unit-like")
        assert emit(parse(text).table()) == emit(parse(CURVED).table())


class TestEmit:
    def test_roundtrip_fixed_point(self):
        table = parse(CURVED).table()
        text = emit(table)
        again = emit(parse(text).table())
        assert text == again

    def test_canonical_sorting(self):
        # ops shuffled on input come out sorted by (k, class, inputs, out)
        shuffled = CURVED.replace(
            "op k=1 beta=0 in=x out=u coeff=2\n", ""
        ) + "op k=1 beta=0 in=x out=u coeff=2\n"
        assert emit(parse(shuffled).table()) == emit(parse(CURVED).table())

    def test_strict_degree_flag_survives(self):
        text = CURVED.replace("arity 2", "arity 2\nstrict-degree")
        table = parse(text).table()
        assert table.strict_degree
        assert "strict-degree" in emit(table)


def small_monoid(window=2):
    return MonoidTable([BetaClass("g", Fraction(1), 2)], EnergyCutoff(Fraction(window)))


class TestMerge:
    GENS = (Generator("u", 0), Generator("x", 1))

    def morse_side(self):
        return OperationTable(
            self.GENS, MonoidTable([], EnergyCutoff(Fraction(0))),
            {(2, ZERO_CLASS, ("u", "u")): {"u": 1}}, max_arity=2)

    def test_disjoint_union(self):
        g = BetaClass("g", Fraction(1), 2)
        external = OperationTable(self.GENS, small_monoid(),
                                  {(0, g, ()): {"x": 1}}, max_arity=2)
        merged = merge(self.morse_side(), external)
        assert merged.op(2, ZERO_CLASS, ("u", "u")) == {"u": 1}
        assert merged.op(0, g, ()) == {"x": 1}

    def test_external_zero_class_rejected(self):
        external = OperationTable(self.GENS, small_monoid(),
                                  {(1, ZERO_CLASS, ("x",)): {"x": 1}},
                                  max_arity=1)
        with pytest.raises(MergeError, match="owned by the Morse computation"):
            merge(self.morse_side(), external)

    def test_generator_mismatch_rejected(self):
        other = (Generator("u", 0), Generator("y", 1))
        external = OperationTable(other, small_monoid(), {}, max_arity=1)
        with pytest.raises(MergeError, match="generator sets differ"):
            merge(self.morse_side(), external)


class TestReport:
    def test_machine_format_lines(self):
        table = parse(CURVED).table()
        reports = verify(table, 2)
        text = render_report(reports, "machine")
        assert text.splitlines()[-1].startswith("summary checked=")
        assert any(line.startswith("key k=") for line in text.splitlines())

    def test_text_format_verdict(self):
        # a file with no ops declares arity 0: everything above the
        # curvature level is unknown and gets skipped, not failed
        table = parse(MINIMAL).table()
        text = render_report(verify(table, 1), "text")
        assert "PASS" in text and "2 skipped" in text

    def test_text_format_on_complete_table(self):
        table = parse(CURVED).table()
        text = render_report(verify(table, 1), "text")
        assert "PASS" in text and "0 skipped" in text
