import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wncs.channel import ChannelModel
from wncs.errors import ConvergenceError, DomainError, PreconditionError
from wncs.lti import SystemModel
from wncs.smdp import Policy, SmdpSpec, evaluate_policy, solve_rvi, transform
from wncs.stability import (
    BoundaryWarning,
    fixed_length_stable,
    stability_report,
    variable_length_stable,
)

unit_open = st.floats(0.01, 0.99)


def test_reference_products(base_system, base_channel):
    v1 = fixed_length_stable(base_system, base_channel, 1)
    assert not v1.stable and v1.product == pytest.approx(1.152, rel=1e-15)
    v2 = fixed_length_stable(base_system, base_channel, 2)
    assert v2.stable and v2.product == pytest.approx(0.82944, rel=1e-15)
    v = variable_length_stable(base_system, base_channel, 5)
    assert v.stable and v.stable_within and v.exact and v.argmin == 5


def test_report_csv(base_system, base_channel):
    rep = stability_report(base_system, base_channel, 5)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "l,g,rho2l,product,stable"
    assert [r.stable for r in rep.records] == [False, True, True, True, True]
    assert lines[1].endswith("1.152,false")
    assert "stabilizable" in rep.verdict_line()


def test_table_channel_unstable():
    system = SystemModel.scalar(1.5)
    ch = ChannelModel.from_table([0.9, 0.89, 0.88, 0.87, 0.86])
    v = variable_length_stable(system, ch, 5)
    assert not v.stable and not v.stable_within and not v.exact
    assert v.min_product > 1


def test_unit_radius_always_stable(base_channel):
    system = SystemModel.scalar(1.0)
    assert all(fixed_length_stable(system, base_channel, l).stable for l in range(1, 30))
    v = variable_length_stable(system, base_channel, 7)
    assert v.stable and v.argmin == 7
    assert all(r.stable for r in stability_report(system, base_channel, 5).records)


@given(st.floats(0.05, 1.0), unit_open, unit_open, st.integers(1, 40))
def test_contractive_plants_stable(a, p0, r, l):
    assert fixed_length_stable(SystemModel.scalar(a), ChannelModel.exponential(p0, r), l).stable


@given(st.floats(0.5, 2.5), unit_open, unit_open, st.integers(1, 12))
def test_fixed_implies_variable(a, p0, r, l_max):
    system, ch = SystemModel.scalar(a), ChannelModel.exponential(p0, r)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        if any(fixed_length_stable(system, ch, l).stable for l in range(1, l_max + 1)):
            v = variable_length_stable(system, ch, l_max)
            assert v.stable and v.stable_within


@given(st.floats(0.5, 2.5), unit_open, unit_open, st.integers(1, 30))
def test_geometric_products(a, p0, r, l):
    system, ch = SystemModel.scalar(a), ChannelModel.exponential(p0, r)
    p0_, p1 = (fixed_length_stable(system, ch, k).product for k in (l, l + 1))
    assert p1 / p0_ == pytest.approx(r * system.rho**2, rel=1e-12)


def test_exact_rule_beyond_search_range():
    # every product over 1..3 exceeds 1 but r*rho^2 < 1, so long packets do stabilize
    system = SystemModel.scalar(1.4)
    ch = ChannelModel.exponential(0.95, 0.5)
    v = variable_length_stable(system, ch, 3)
    assert v.stable and not v.stable_within


def test_boundary_warning():
    ch = ChannelModel.from_table([0.5, 0.25])
    system = SystemModel.scalar(np.sqrt(2.0))
    with pytest.warns(BoundaryWarning):
        v = fixed_length_stable(system, ch, 1)
    assert not v.stable


def test_preconditions():
    A = np.diag([1.5, 0.5])
    blind = SystemModel(A=A, B=np.eye(2), K=-A, R=np.eye(2), Q=np.diag([0.0, 1.0]))
    ch = ChannelModel.exponential(0.8, 0.5)
    with pytest.raises(PreconditionError):
        fixed_length_stable(blind, ch, 2)
    with pytest.raises(PreconditionError):
        variable_length_stable(blind, ch, 3)
    with pytest.raises(DomainError):
        fixed_length_stable(SystemModel.scalar(1.2), ch, 0)


def test_solver_cross_validation():
    stable = SmdpSpec(SystemModel.scalar(1.3), ChannelModel.exponential(0.6, 0.4), 40, 4)
    assert variable_length_stable(stable.system, stable.channel, 4).stable
    solve_rvi(transform(stable))

    # all products >= 1 and r*rho^2 >= 1: the truncated gains blow up with N
    system = SystemModel.scalar(1.5, d_max=512)
    ch = ChannelModel.exponential(0.9, 0.5)
    assert not variable_length_stable(system, ch, 3).stable
    gains = []
    for N in (50, 100, 200):
        spec = SmdpSpec(system, ch, N, 3)
        gains.append(min(evaluate_policy(spec, Policy.fixed(N, l)) for l in (1, 2, 3)))
    assert gains[1] > 1.1 * gains[0] and gains[2] > 1.1 * gains[1]
    with pytest.raises(ConvergenceError):
        solve_rvi(transform(SmdpSpec(system, ch, 200, 3)), stall_window=500)
