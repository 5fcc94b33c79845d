import itertools
import random
from fractions import Fraction

import pytest

from ainfty.algebra import (
    Generator,
    OperationTable,
    TableError,
    ank_defect,
    assemble_mk,
    degree_defects,
    homology_ranks,
    relation_is_checkable,
    verify,
)
from ainfty.monoid import BetaClass, MonoidTable, ZERO_CLASS
from ainfty.novikov import EnergyCutoff, NovikovElement

Z = ZERO_CLASS
G = BetaClass("g", Fraction(1), 2)


def trivial_monoid():
    return MonoidTable([], EnergyCutoff(Fraction(0)))


def one_gen_monoid(window=2):
    return MonoidTable([G], EnergyCutoff(Fraction(window)))


# a two-step chain complex: d(a) = b, d(b) = 0, plus a spectator c
CHAIN_GENS = (Generator("a", 0), Generator("b", 1), Generator("c", 1))


def chain_table():
    return OperationTable(
        CHAIN_GENS, trivial_monoid(), {(1, Z, ("a",)): {"b": 1}}, max_arity=2
    )


# the exterior-algebra style product used across the morse tests:
# unit u, odd x, y with xy = -yx = w, all signs in the coherent convention
# m2(p, q) = (-1)^{deg p} (p wedge q)
EXT_GENS = (Generator("u", 0), Generator("x", 1), Generator("y", 1),
            Generator("w", 2))


def wedge(p, q):
    table = {
        ("u", "u"): ("u", 1), ("u", "x"): ("x", 1), ("u", "y"): ("y", 1),
        ("u", "w"): ("w", 1), ("x", "u"): ("x", 1), ("y", "u"): ("y", 1),
        ("w", "u"): ("w", 1), ("x", "y"): ("w", 1), ("y", "x"): ("w", -1),
    }
    return table.get((p, q))


def ext_entries():
    deg = {"u": 0, "x": 1, "y": 1, "w": 2}
    entries = {}
    for p, q in itertools.product(["u", "x", "y", "w"], repeat=2):
        hit = wedge(p, q)
        if hit:
            out, c = hit
            entries[(2, Z, (p, q))] = {out: c * (-1) ** deg[p]}
    return entries


def ext_table(monoid=None, extra=None, max_arity=2):
    entries = ext_entries()
    if extra:
        entries.update(extra)
    return OperationTable(EXT_GENS, monoid or trivial_monoid(), entries,
                          max_arity=max_arity)


class TestTableIntegrity:
    def test_curvature_at_zero_class_rejected(self):
        with pytest.raises(TableError):
            OperationTable(CHAIN_GENS, trivial_monoid(), {(0, Z, ()): {"a": 1}})

    def test_gapped_check(self):
        t = ext_table(one_gen_monoid(), {(0, G, ()): {"w": 1}})
        assert t.gapped_check()
        stray = BetaClass("far", Fraction(5), 2)
        bad = OperationTable(EXT_GENS, one_gen_monoid(),
                             {(1, stray, ("x",)): {"x": 1}}, validate=False)
        assert not bad.gapped_check()

    def test_undeclared_generator(self):
        with pytest.raises(TableError):
            OperationTable(CHAIN_GENS, trivial_monoid(),
                           {(1, Z, ("nope",)): {"b": 1}})

    def test_arity_below_entries_rejected(self):
        with pytest.raises(TableError):
            OperationTable(CHAIN_GENS, trivial_monoid(),
                           {(1, Z, ("a",)): {"b": 1}}, max_arity=0)


class TestAssemble:
    def test_single_zero_energy_term(self):
        t = chain_table()
        got = assemble_mk(t, 1, EnergyCutoff(Fraction(3)))
        assert got == {("a",): {"b": NovikovElement.one(Fraction(3))}}

    def test_empty_table(self):
        t = OperationTable(CHAIN_GENS, trivial_monoid(), {})
        assert assemble_mk(t, 1, EnergyCutoff(Fraction(3))) == {}

    def test_curvature_scaling_matches_hand_expansion(self):
        mono = one_gen_monoid()
        t = OperationTable(EXT_GENS, mono, {(0, G, ()): {"x": 2}}, max_arity=1)
        got = assemble_mk(t, 0, EnergyCutoff(Fraction(3)))
        assert got == {(): {"x": NovikovElement.monomial(2, Fraction(1), 1,
                                                         cutoff=Fraction(3))}}

    def test_window_drops_heavy_classes(self):
        mono = one_gen_monoid(window=4)
        heavy = BetaClass("h", Fraction(2), 4)
        t = OperationTable(EXT_GENS, mono,
                           {(0, G, ()): {"x": 1}, (0, heavy, ()): {"y": 1}},
                           max_arity=1)
        got = assemble_mk(t, 0, EnergyCutoff(Fraction(3, 2)))
        assert set(got[()].keys()) == {"x"}

    def test_filtration_valuations(self):
        mono = one_gen_monoid(window=4)
        entries = dict(ext_entries())
        entries[(1, G, ("x",))] = {"y": 1}
        t = OperationTable(EXT_GENS, mono, entries, max_arity=2)
        least = min(g.omega for g in mono.generators)
        for k in (1, 2):
            for combo in assemble_mk(t, k, EnergyCutoff(Fraction(4))).values():
                for elem in combo.values():
                    positive = [term for term in elem.terms if term.energy > 0]
                    for term in positive:
                        assert term.energy >= least
                    if any(term.energy == 0 for term in elem.terms):
                        assert elem.valuation() == 0


class TestDefect:
    def test_differential_squares_to_zero(self):
        t = chain_table()
        for name in ("a", "b", "c"):
            assert ank_defect(t, 1, Z, (name,)) == {}

    def test_broken_differential_detected(self):
        t = OperationTable(
            CHAIN_GENS, trivial_monoid(),
            {(1, Z, ("a",)): {"b": 1}, (1, Z, ("b",)): {"c": 1}}, max_arity=1,
        )
        assert ank_defect(t, 1, Z, ("a",)) == {"c": 1}

    def test_associativity_of_the_exterior_model(self):
        t = ext_table()
        for triple in itertools.product(["u", "x", "y", "w"], repeat=3):
            assert ank_defect(t, 3, Z, triple) == {}, triple

    def test_curved_arity_one_relation_matches_brute_force(self):
        # m0 = c at class g, m1 = d at zero class, m2 = the wedge model
        mono = one_gen_monoid()
        d = {("x",): {"y": 1}}
        entries = ext_entries()
        entries[(0, G, ())] = {"w": 1}
        entries[(1, Z, ("x",))] = {"y": 1}
        t = OperationTable(EXT_GENS, mono, entries, max_arity=2)

        def brute(x):
            # independent expansion of the relation at (1, g)
            deg = {g.name: g.degree for g in EXT_GENS}
            total = {}

            def acc(combo, scale):
                for name, c in combo.items():
                    total[name] = total.get(name, 0) + scale * c
                    if total[name] == 0:
                        del total[name]

            # (k1,k2)=(0,2): insert m_{0,g} on either side of x
            acc(t.op(2, Z, ("w", x)), 1)
            acc(t.op(2, Z, (x, "w")), (-1) ** (deg[x] - 1))
            # (k1,k2)=(1,1): m_{1,g} absent; m_{1,0} against m_{1,g} absent
            inner = t.op(1, Z, (x,))
            for mid, c in inner.items():
                acc(t.op(1, G, (mid,)), c)
            for mid, c in t.op(1, G, (x,)).items():
                acc(t.op(1, Z, (mid,)), c)
            return total

        for x in ("u", "x", "y", "w"):
            assert ank_defect(t, 1, G, (x,)) == brute(x), x

    def test_multilinearity_in_entries(self):
        rng = random.Random(4)
        mono = trivial_monoid()
        names = [g.name for g in EXT_GENS]

        def random_entries():
            entries = {}
            for _ in range(6):
                k = rng.choice([1, 2])
                key = (k, Z, tuple(rng.choice(names) for _ in range(k)))
                combo = {rng.choice(names): rng.randrange(-3, 4)}
                combo = {n: c for n, c in combo.items() if c}
                if combo and key not in entries:
                    entries[key] = combo
            return entries

        for _ in range(30):
            e1, e2 = random_entries(), random_entries()
            merged = {}
            for k, v in itertools.chain(e1.items(), e2.items()):
                slot = merged.setdefault(k, {})
                for n, c in v.items():
                    slot[n] = slot.get(n, 0) + c
            t1 = OperationTable(EXT_GENS, mono, e1, max_arity=2, validate=False)
            t2 = OperationTable(EXT_GENS, mono, e2, max_arity=2, validate=False)
            ts = OperationTable(EXT_GENS, mono, merged, max_arity=2, validate=False)
            inputs = tuple(rng.choice(names) for _ in range(2))
            d1 = ank_defect(t1, 2, Z, inputs)
            d2 = ank_defect(t2, 2, Z, inputs)
            ds = ank_defect(ts, 2, Z, inputs)
            # the defect is quadratic in the table; cross terms remain
            lin = {}
            for src, scale in ((d1, 1), (d2, 1)):
                for n, c in src.items():
                    lin[n] = lin.get(n, 0) + scale * c
            cross = {}
            for n in set(ds) | set(lin):
                c = ds.get(n, 0) - lin.get(n, 0)
                if c:
                    cross[n] = c
            # verify the bilinear expansion: defect(t1+t2) - defect(t1)
            # - defect(t2) equals the mixed compositions
            mixed = {}

            def acc_mixed(outer_t, inner_t):
                degs = [outer_t.degree(n) for n in inputs]
                for k1 in range(0, 3):
                    k2 = 3 - k1
                    sign = 1
                    for i in range(0, 2 - k1 + 1):
                        if i > 0 and (degs[i - 1] - 1) % 2 == 1:
                            sign = -sign
                        inner = inner_t.op(k1, Z, inputs[i:i + k1])
                        for mid, c in inner.items():
                            outer = outer_t.op(
                                k2, Z, inputs[:i] + (mid,) + inputs[i + k1:])
                            for n, c2 in outer.items():
                                mixed[n] = mixed.get(n, 0) + sign * c * c2
                                if mixed[n] == 0:
                                    del mixed[n]

            acc_mixed(t1, t2)
            acc_mixed(t2, t1)
            assert cross == mixed


class TestVerify:
    def test_trivial_table_passes(self):
        t = OperationTable(EXT_GENS, one_gen_monoid(), {}, max_arity=3)
        reports = verify(t, 3)
        assert reports and all(r.status == "ok" for r in reports)

    def test_exterior_model_passes_and_mutations_mostly_fail(self):
        t = ext_table(max_arity=3)
        reports = verify(t, 2)
        assert all(r.status == "ok" for r in reports)
        escaped = set()
        for (k, beta, inputs), combo in t.entries():
            for out in combo:
                mutated = t.with_entry(k, beta, inputs, out, 1)
                bad = verify(mutated, 2, fail_fast=True)
                if not any(r.status == "defect" for r in bad):
                    escaped.add(inputs)
        # rescaling the top coefficient x^y -> lambda x^y stays associative,
        # so pure zero-class relations cannot pin exactly those two entries;
        # the curved layer is what pins them (see the acceptance suite)
        assert escaped == {("x", "y"), ("y", "x")}

    def test_report_order_is_monotone_in_the_norm_sum(self):
        t = OperationTable(EXT_GENS, one_gen_monoid(), {}, max_arity=6)
        reports = verify(t, 3)
        sums = [t.monoid.norm(r.beta) + r.k for r in reports]
        assert sums == sorted(sums)

    def test_defects_monotone_in_bound(self):
        entries = {(1, Z, ("x",)): {"y": 1}, (1, Z, ("y",)): {"x": 1}}
        t = OperationTable(EXT_GENS, one_gen_monoid(), entries, max_arity=3)
        small = {(r.k, r.beta.key) for r in verify(t, 1) if r.status == "defect"}
        large = {(r.k, r.beta.key) for r in verify(t, 3) if r.status == "defect"}
        assert small <= large

    def test_arity_skipping(self):
        # m2 populated, arity 2: the relation at k=3 only meets the unknown
        # m3 behind the known-zero m1, but k=4 needs m3 against m2 itself
        t = ext_table(max_arity=2)
        ok, _ = relation_is_checkable(t, 3, Z)
        assert ok
        ok, reason = relation_is_checkable(t, 4, Z)
        assert not ok and "beyond declared arity" in reason
        statuses = {r.k: r.status for r in verify(t, 4, beta_filter=lambda b: b.is_zero())}
        assert statuses[3] == "ok"
        assert statuses[4] == "skipped" and statuses[5] == "skipped"
        # declaring m3 known-zero makes k=4 checkable again
        t3 = ext_table(max_arity=3)
        ok, _ = relation_is_checkable(t3, 4, Z)
        assert ok
        assert not relation_is_checkable(t3, 5, Z)[0]

    def test_basis_permutation_preserves_emptiness(self):
        t = ext_table()
        renamed = {"u": "p", "x": "q", "y": "r", "w": "s"}
        gens = tuple(Generator(renamed[g.name], g.degree) for g in EXT_GENS)
        entries = {}
        for (k, beta, inputs), combo in t.entries():
            entries[(k, beta, tuple(renamed[n] for n in inputs))] = {
                renamed[n]: c for n, c in combo.items()}
        t2 = OperationTable(gens, trivial_monoid(), entries, max_arity=2)
        assert all(r.status == "ok" for r in verify(t2, 2))


class TestDegreeMode:
    def test_exterior_model_is_strict(self):
        assert degree_defects(ext_table()) == []

    def test_violation_reported(self):
        t = OperationTable(CHAIN_GENS, trivial_monoid(),
                           {(1, Z, ("a",)): {"a": 1}}, max_arity=1)
        bad = degree_defects(t)
        assert bad and bad[0][1] == "a"


class TestHomology:
    def test_chain_complex_ranks(self):
        # d(a) = b kills one class in degree 0 and one in degree 1
        assert homology_ranks(chain_table()) == (0, 1)

    def test_zero_differential_counts_generators(self):
        t = OperationTable(EXT_GENS, trivial_monoid(), {})
        assert homology_ranks(t) == (1, 2, 1)
