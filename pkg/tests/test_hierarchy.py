from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chunkanon.datagen import medical_schema
from chunkanon.errors import LevelOutOfRange, ValueNotInDomain
from chunkanon.hierarchy import (
    bin_bounds,
    bin_index,
    bin_indices,
    bins_at_level,
    category_ids,
    category_labels,
    category_lift,
    generalise_categorical,
    generalise_numerical,
    lift_bins,
    render_range,
    to_units,
)
from chunkanon.schema import NumericalLadder

SCHEMA = medical_schema()
BLOOD = SCHEMA.qid("Blood Group").rules
JOBS = SCHEMA.qid("Profession").rules
AGE = SCHEMA.qid("Age").rules
BMI = SCHEMA.qid("BMI").rules


def test_blood_group_levels():
    assert generalise_categorical("O+", BLOOD, 1) == "O+"
    assert generalise_categorical("O+", BLOOD, 2) == "O"
    assert generalise_categorical("B-", BLOOD, 3) == "*"


def test_profession_levels():
    assert [generalise_categorical("Data Scientist", JOBS, l) for l in (1, 2, 3, 4)] == [
        "Data Scientist",
        "Engineering",
        "Non-Service",
        "*",
    ]


def test_categorical_errors():
    with pytest.raises(ValueNotInDomain):
        generalise_categorical("Q+", BLOOD, 1)
    with pytest.raises(LevelOutOfRange):
        generalise_categorical("O+", BLOOD, 4)
    with pytest.raises(LevelOutOfRange):
        generalise_categorical("O+", BLOOD, 0)


def test_category_tables():
    assert category_labels(BLOOD, 2) == ("A", "B", "AB", "O")
    assert category_labels(BLOOD, 3) == ("*",)
    ids = category_ids(BLOOD, 2)
    assert ids.tolist() == [0, 0, 1, 1, 2, 2, 3, 3]
    # Lifting level-2 ids to level 3 sends everything to the single top label.
    assert category_lift(BLOOD, 2, 3).tolist() == [0, 0, 0, 0]
    assert category_lift(JOBS, 1, 3)[category_ids(JOBS, 1)].tolist() == category_ids(JOBS, 3).tolist()


def test_age_bins():
    b = generalise_numerical(33, AGE, 3)
    assert (b.lo, b.hi, b.display) == (32, 35, "[32 - 35]")
    assert generalise_numerical(33, AGE, 1).display == "[33 - 33]"
    assert generalise_numerical(33, AGE, 8).display == "[19 - 85]"
    # Edge bins are clamped to the domain.
    assert generalise_numerical(19, AGE, 3).display == "[19 - 19]"
    assert generalise_numerical(85, AGE, 7).display == "[64 - 85]"


def test_age_bin_counts_match_enumeration():
    for level, w in enumerate(AGE.widths[:-1], start=1):
        assert bins_at_level(AGE, level) == len({v // w for v in range(19, 86)})
    assert bins_at_level(AGE, 1) == 67
    assert bins_at_level(AGE, AGE.num_levels) == 1


def test_bmi_bins():
    v = to_units(23.8, BMI.unit)
    assert v == 238
    assert generalise_numerical(v, BMI, 2).display == "[23 - 24)"
    assert generalise_numerical(v, BMI, 3).display == "[23 - 25)"
    assert generalise_numerical(v, BMI, BMI.num_levels).display == "[12 - 36)"
    assert generalise_numerical(v, BMI, 1).display == "[23.8 - 23.9)"
    assert bins_at_level(BMI, 2) == 24


def test_pin_code_bins_match_enumeration():
    ladder = NumericalLadder(1, 0, 1346, tuple(2**i for i in range(11)) + (1347,))
    assert bins_at_level(ladder, 6) == len({c // 32 for c in range(1347)}) == 43
    assert bin_bounds(1, ladder, 6) == (32, 63)
    assert bin_bounds(42, ladder, 6) == (1344, 1346)


def test_out_of_domain():
    with pytest.raises(ValueNotInDomain):
        bin_index(18, AGE, 1)
    with pytest.raises(ValueNotInDomain):
        generalise_numerical(86, AGE, 2)


def test_render_range():
    assert render_range(32, 35, 1) == "[32 - 35]"
    assert render_range(120, 359, 0.1) == "[12 - 36)"
    assert render_range(238, 238, 0.1) == "[23.8 - 23.9)"


@st.composite
def ladders(draw):
    lo = draw(st.integers(-500, 500))
    span = draw(st.integers(2, 400))
    widths = [1]
    for _ in range(draw(st.integers(0, 4))):
        widths.append(widths[-1] * draw(st.integers(2, 4)))
    widths.append(draw(st.integers(widths[-1] + 1, widths[-1] + 500)))
    anchor = draw(st.integers(-50, 50))
    return NumericalLadder(1, lo, lo + span - 1, tuple(widths), anchor=anchor)


@given(ladders(), st.data())
def test_bins_nest_and_lift(ladder, data):
    values = np.arange(ladder.domain_min, ladder.domain_max + 1)
    for fine in range(1, ladder.num_levels + 1):
        idx = bin_indices(values, ladder, fine)
        assert idx.min() == 0 and idx.max() == bins_at_level(ladder, fine) - 1
        # Indices are contiguous and non-decreasing in the value.
        assert np.all(np.diff(idx) >= 0) and set(idx.tolist()) == set(range(bins_at_level(ladder, fine)))
        for coarse in range(fine, ladder.num_levels + 1):
            assert np.array_equal(lift_bins(idx, ladder, fine, coarse), bin_indices(values, ladder, coarse))
    level = data.draw(st.integers(1, ladder.num_levels))
    v = data.draw(st.integers(ladder.domain_min, ladder.domain_max))
    i = bin_index(v, ladder, level)
    lo, hi = bin_bounds(i, ladder, level)
    assert lo <= v <= hi
    assert i == int(bin_indices(np.array([v]), ladder, level)[0])


@given(ladders())
def test_bins_partition_domain(ladder):
    for level in range(1, ladder.num_levels + 1):
        bounds = [bin_bounds(i, ladder, level) for i in range(bins_at_level(ladder, level))]
        assert bounds[0][0] == ladder.domain_min and bounds[-1][1] == ladder.domain_max
        for (_, a_hi), (b_lo, _) in zip(bounds, bounds[1:]):
            assert b_lo == a_hi + 1
