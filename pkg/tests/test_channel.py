import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from wncs.channel import ChannelModel, error_prob, validate
from wncs.errors import DomainError

unit_open = st.floats(0.0, 1.0, exclude_min=True, exclude_max=True)


def test_exponential_examples():
    ch = ChannelModel.exponential(0.8, 0.5)
    assert error_prob(ch, 1) == 0.8
    assert error_prob(ch, 3) == pytest.approx(0.2, rel=1e-15)
    assert error_prob(ch, 5) == pytest.approx(0.05, rel=1e-15)
    assert validate(ch) == []


def test_table_examples():
    bad = validate(ChannelModel.from_table([0.5, 0.6]))
    assert [v.l for v in bad] == [2] and "not below" in bad[0].reason
    bad = validate(ChannelModel.from_table([0.5, 0.0]))
    assert [v.l for v in bad] == [2] and "outside" in bad[0].reason
    assert validate(ChannelModel.from_table([0.9, 0.5, 0.1])) == []


def test_domain_errors():
    ch = ChannelModel.from_table([0.5, 0.4])
    for l in (0, 3, -1, 1.5):
        with pytest.raises(DomainError):
            ch.error_prob(l)
    with pytest.raises(DomainError):
        ChannelModel.exponential(0.8, 0.5).error_prob(0)


@given(unit_open, unit_open, st.integers(1, 200))
def test_exponential_ratio(p0, r, l):
    ch = ChannelModel.exponential(p0, r)
    a, b = ch.error_prob(l), ch.error_prob(l + 1)
    if b >= sys.float_info.min:
        # equal to r up to the rounding of two powers (subnormals lose precision)
        assert b / a == pytest.approx(r, rel=8e-16 * l + 1e-15)


@given(st.lists(st.floats(-0.5, 1.5, allow_nan=False), min_size=1, max_size=8))
def test_validate_iff_invariants(values):
    ch = ChannelModel.from_table(values)
    ok = all(0 < v < 1 for v in values) and all(b < a for a, b in zip(values, values[1:]))
    assert ch.is_valid() == ok
    if not ok:
        assert all(1 <= v.l <= len(values) for v in validate(ch))


@given(unit_open, unit_open)
def test_exponential_validate(p0, r):
    assert ChannelModel.exponential(p0, r).is_valid()


def test_exponential_bad_parameters():
    assert ChannelModel.exponential(1.0, 0.5).validate()
    assert ChannelModel.exponential(0.5, 1.0).validate()
