import datetime as dt
import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupcast.errors import EmptyBottom, KeyOutsideSchema, NonFiniteQuantity, UnknownAttribute, DataError
from groupcast.grouping import (
    AttributeSchema,
    GroupStructure,
    SeriesKey,
    WeekCalendar,
    aggregate_matrix,
    aggregate_records,
    build_structure,
    build_summing_matrix,
)

SCHEMA = AttributeSchema((("g1", ("A", "B")), ("g2", ("X", "Y"))))
LEVELS = [["g1"], ["g2"], ["g1", "g2"]]


def all_bottoms(schema):
    return [schema.key(zip(schema.names, combo)) for combo in itertools.product(*(vs for _, vs in schema.attributes))]


def labels(structure):
    return ["".join(v for _, v in k.items()) or "root" for k in structure.nodes]


class TestSchemaAndKeys:
    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError):
            AttributeSchema((("a", ("1",)), ("a", ("2",))))

    def test_empty_value_set_rejected(self):
        with pytest.raises(ValueError):
            AttributeSchema((("a", ()),))

    def test_key_order_does_not_matter(self):
        a = SCHEMA.key(g1="A", g2="X")
        b = SCHEMA.key(g2="X", g1="A")
        assert a == b and hash(a) == hash(b)
        assert SeriesKey((("g2", "X"), ("g1", "A"))) == a
        assert a.bindings == (("g1", "A"), ("g2", "X"))

    def test_unknown_attribute_and_value(self):
        with pytest.raises(UnknownAttribute):
            SCHEMA.key(g3="A")
        with pytest.raises(KeyOutsideSchema):
            SCHEMA.key(g1="C")

    def test_root_label(self):
        assert SeriesKey().label() == "total" and SeriesKey().is_root


class TestBuildStructure:
    def test_two_by_two_grouping(self):
        st_ = build_structure(SCHEMA, LEVELS, all_bottoms(SCHEMA))
        assert labels(st_) == ["root", "A", "B", "X", "Y", "AX", "AY", "BX", "BY"]
        assert st_.nodes.count(SeriesKey()) == 1

    def test_single_attribute(self):
        schema = AttributeSchema((("brand", ("1", "2")),))
        st_ = build_structure(schema, [["brand"]], all_bottoms(schema))
        assert st_.n_nodes == 3
        assert np.array_equal(build_summing_matrix(st_).entries, [[1, 1], [1, 0], [0, 1]])

    def test_unobserved_combination_dropped(self):
        bottoms = [k for k in all_bottoms(SCHEMA) if k != SCHEMA.key(g1="B", g2="Y")]
        st_ = build_structure(SCHEMA, LEVELS, bottoms)
        assert labels(st_) == ["root", "A", "B", "X", "Y", "AX", "AY", "BX"]

    def test_errors(self):
        with pytest.raises(UnknownAttribute):
            build_structure(SCHEMA, [["g9"]], all_bottoms(SCHEMA))
        with pytest.raises(EmptyBottom):
            build_structure(SCHEMA, LEVELS, [])
        with pytest.raises(KeyOutsideSchema):
            build_structure(SCHEMA, LEVELS, [SCHEMA.key(g1="A")])
        with pytest.raises(ValueError):
            build_structure(SCHEMA, [], all_bottoms(SCHEMA))

    def test_duplicate_bottoms_ignored(self):
        b = all_bottoms(SCHEMA)
        assert build_structure(SCHEMA, LEVELS, b + b).n_nodes == 9

    @given(st.lists(st.integers(1, 3), min_size=1, max_size=3), st.data())
    @settings(max_examples=60, deadline=None)
    def test_node_count_formula(self, sizes, data):
        schema = AttributeSchema(tuple((f"a{i}", tuple(str(v) for v in range(n))) for i, n in enumerate(sizes)))
        names = schema.names
        subsets = [list(c) for r in range(1, len(names) + 1) for c in itertools.combinations(names, r)]
        levels = data.draw(st.lists(st.sampled_from(subsets), min_size=1, max_size=4, unique_by=tuple))
        st_ = build_structure(schema, levels, all_bottoms(schema))
        # brute-force enumeration of distinct restricted keys
        distinct = {SeriesKey()}
        for lv in levels + [list(names)]:
            for b in all_bottoms(schema):
                distinct.add(b.restrict(lv))
        assert st_.n_nodes == len(distinct)
        formula = 1 + sum(int(np.prod([len(schema.values(n)) for n in lv]))
                          for lv in {frozenset(x) for x in levels + [list(names)]})
        assert st_.n_nodes == formula

    def test_serialization_round_trip(self):
        bottoms = [k for k in all_bottoms(SCHEMA) if k != SCHEMA.key(g1="A", g2="Y")]
        st_ = build_structure(SCHEMA, [["g2"], ["g1"]], bottoms)
        back = GroupStructure.from_dict(json.loads(json.dumps(st_.to_dict())))
        assert back.nodes == st_.nodes
        assert [k.bindings for k in back.nodes] == [k.bindings for k in st_.nodes]

    def test_node_levels(self):
        st_ = build_structure(SCHEMA, [["g1"], ["g2"]], all_bottoms(SCHEMA))
        lv = [st_.node_level(k) for k in st_.nodes]
        assert lv == [0, 1, 1, 2, 2, 3, 3, 3, 3]


class TestSummingMatrix:
    def test_consistency_oracle(self):
        st_ = build_structure(SCHEMA, LEVELS, all_bottoms(SCHEMA))
        S = build_summing_matrix(st_)
        assert S.shape == (9, 4)
        for i, node in enumerate(st_.nodes):
            for j, b in enumerate(st_.bottom):
                consistent = all(b.as_dict()[n] == v for n, v in node.items())
                assert S.entries[i, j] == float(consistent)
        assert np.array_equal(S.entries[S.row_index[SCHEMA.key(g1="A")]], [1, 1, 0, 0])
        assert np.array_equal(S.entries[0], np.ones(4))
        assert np.array_equal(S.entries[-4:], np.eye(4))
        assert np.all(S.entries.sum(axis=0) >= 2)

    def test_read_only(self):
        S = build_summing_matrix(build_structure(SCHEMA, LEVELS, all_bottoms(SCHEMA)))
        with pytest.raises(ValueError):
            S.entries[0, 0] = 5


class TestAggregation:
    def setup_method(self):
        self.st = build_structure(SCHEMA, LEVELS, all_bottoms(SCHEMA))
        self.AX = SCHEMA.key(g1="A", g2="X")

    def test_single_record(self):
        out = aggregate_records([(2, self.AX, 5)], self.st, 4)
        for k in (self.AX, SCHEMA.key(g1="A"), SCHEMA.key(g2="X"), SeriesKey()):
            assert np.array_equal(out[k].values, [0, 0, 5, 0])
        assert np.array_equal(out[SCHEMA.key(g1="B")].values, np.zeros(4))

    def test_same_week_summed(self):
        out = aggregate_records([(1, self.AX, 5), (1, self.AX, 2)], self.st, 3)
        assert out[self.AX].values[1] == 7

    def test_brute_force_oracle(self, rng):
        bottoms = all_bottoms(SCHEMA)
        recs = [(int(rng.integers(0, 10)), bottoms[rng.integers(0, 4)], int(rng.integers(0, 50)))
                for _ in range(200)]
        out = aggregate_records(recs, self.st, 10)
        for node in self.st.nodes:
            want = np.zeros(10)
            for t, k, q in recs:
                if all(k.as_dict()[n] == v for n, v in node.items()):
                    want[t] += q
            assert np.array_equal(out[node].values, want)

    def test_real_valued_coherence(self, rng):
        bottoms = all_bottoms(SCHEMA)
        recs = [(int(rng.integers(0, 6)), bottoms[rng.integers(0, 4)], rng.normal(10, 3)) for _ in range(100)]
        Y = aggregate_matrix(recs, self.st, 6)
        S = build_summing_matrix(self.st).entries
        assert np.max(np.abs(Y - S @ Y[-4:])) <= 1e-9

    def test_errors(self):
        with pytest.raises(KeyOutsideSchema):
            aggregate_records([(0, SCHEMA.key(g1="A"), 1)], self.st, 2)
        with pytest.raises(NonFiniteQuantity):
            aggregate_records([(0, self.AX, float("nan"))], self.st, 2)
        with pytest.raises(DataError):
            aggregate_records([(5, self.AX, 1)], self.st, 2)

    def test_unobserved_bottom_rejected(self):
        bottoms = [k for k in all_bottoms(SCHEMA) if k != SCHEMA.key(g1="B", g2="Y")]
        st_ = build_structure(SCHEMA, LEVELS, bottoms)
        with pytest.raises(KeyOutsideSchema):
            aggregate_records([(0, SCHEMA.key(g1="B", g2="Y"), 1)], st_, 2)


class TestWeekCalendar:
    def test_anchor_moves_to_week_start(self):
        cal = WeekCalendar(dt.date(2016, 12, 14), 3, "sunday")
        assert cal.start == dt.date(2016, 12, 11)
        assert cal.index(dt.date(2016, 12, 17)) == 0
        assert cal.index(dt.date(2016, 12, 18)) == 1
        assert cal.week_date(2) == dt.date(2016, 12, 25)

    def test_out_of_range(self):
        cal = WeekCalendar("2017-01-02", 2, "monday")
        with pytest.raises(DataError):
            cal.index(dt.date(2017, 1, 1))

    def test_spanning(self):
        cal = WeekCalendar.spanning([dt.date(2017, 1, 4), dt.date(2017, 1, 20)])
        assert cal.start == dt.date(2017, 1, 1) and len(cal) == 3

    def test_dated_aggregation(self):
        cal = WeekCalendar("2016-12-11", 2)
        st_ = build_structure(SCHEMA, LEVELS, all_bottoms(SCHEMA))
        out = aggregate_records([(dt.date(2016, 12, 20), SCHEMA.key(g1="B", g2="Y"), 3)], st_, cal, 52)
        assert np.array_equal(out[SeriesKey()].values, [0, 3])
        assert out[SeriesKey()].period_length == 52
