import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fuzzyvault.geometry import Ellipse
from fuzzyvault.security import (NoFeasibleParams, ReferenceTables, attack_cost_bits,
                                 brute_force_trials_log2, chaff_capacity, chi_for_ratio,
                                 expected_matches, param_search, security_report, zeta,
                                 zeta_inclusion_exclusion)
from fuzzyvault.vault import SystemParams


def zeta_enumerated(t, chi, f):
    """Direct enumeration of all f**t finger assignments."""
    good = sum(1 for a in itertools.product(range(f), repeat=t)
               if min(a.count(i) for i in range(f)) >= chi)
    return good / f**t


def test_zeta_examples():
    assert zeta(10, 0, 3) == 1.0
    assert zeta(2, 1, 2) == 0.5
    assert zeta(5, 3, 2) == 0.0
    assert zeta(6, 3, 2) == pytest.approx(20 / 64)


@pytest.mark.parametrize("t,chi,f", [(6, 2, 2), (7, 2, 3), (8, 1, 4), (9, 3, 3), (10, 4, 2)])
def test_zeta_matches_enumeration(t, chi, f):
    assert zeta(t, chi, f) == pytest.approx(zeta_enumerated(t, chi, f), abs=1e-12)


@given(st.integers(1, 60), st.integers(0, 12), st.integers(1, 5))
@settings(max_examples=60)
def test_inclusion_exclusion_agrees(t, chi, f):
    assert zeta_inclusion_exclusion(t, chi, f) == pytest.approx(zeta(t, chi, f), abs=1e-9)


def test_inclusive_bound_variant_differs():
    # counting chi itself as a shortfall under-estimates zeta
    assert zeta_inclusion_exclusion(10, 3, 2, upper=3) < zeta(10, 3, 2)


def test_zeta_monotone():
    for f in (2, 3):
        for t in range(6, 40, 3):
            vals = [zeta(t, chi, f) for chi in range(0, 12)]
            assert all(a >= b for a, b in zip(vals, vals[1:]))
        for chi in range(1, 8):
            vals = [zeta(t, chi, f) for t in range(1, 60)]
            assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("row,want", [
    ((2, 62, 240, 27), 68), ((3, 90, 202, 45), 69), ((3, 90, 351, 41), 97),
    ((3, 70, 360, 34), 97),
])
def test_attack_cost_table_rows(row, want):
    f, t, r, k = row
    assert abs(attack_cost_bits(t, r, k, 9, f) - want) <= 2
    assert abs(attack_cost_bits(t, r, k, 9, f, log_base=math.e) - want) <= 2


def test_attack_cost_frozen_values():
    # base-2 and natural-log readings for table row 1
    assert attack_cost_bits(62, 240, 27, 9, 2) == pytest.approx(68.9877, abs=1e-3)
    assert attack_cost_bits(62, 240, 27, 9, 2, log_base=math.e) == pytest.approx(67.93, abs=0.01)


@given(st.integers(20, 80), st.integers(2, 30), st.integers(1, 200))
def test_doubling_r_adds_k_bits(t, k, extra):
    r = t + extra
    gain = attack_cost_bits(t, 2 * r, k, 5, 2) - attack_cost_bits(t, r, k, 5, 2)
    assert gain == pytest.approx(k, abs=1e-9)


@given(st.integers(20, 80), st.integers(2, 30), st.integers(1, 200))
def test_attack_cost_increasing_in_r(t, k, extra):
    r = t + extra
    assert attack_cost_bits(t, r + 1, k, 5, 2) > attack_cost_bits(t, r, k, 5, 2)


def test_attack_cost_preconditions():
    with pytest.raises(ValueError):
        attack_cost_bits(10, 10, 3, 1, 2)
    with pytest.raises(ValueError):
        attack_cost_bits(10, 30, 1, 1, 2)


def test_brute_force_trials():
    assert 2 ** brute_force_trials_log2(10, 30, 4) == pytest.approx(27405 / 210)


def test_expected_matches_plug_in():
    m_c, m_f = expected_matches(6, 120, 400, 7, 0.85, 50)
    assert m_c == pytest.approx(102)
    assert m_f == pytest.approx(1.4 * 280 * 33 * 145 / 86855)
    assert abs(m_f - 21.6) <= 0.5


def test_expected_matches_zero_cases():
    assert expected_matches(2, 20, 20, 7, 0.8, 50)[1] == 0
    assert expected_matches(2, 20, 80, 7, 0.8, 8.0)[1] == 0
    assert expected_matches(2, 20, 80, 7, 0.8, 1.0)[1] == 0      # clamped surplus


def test_chaff_capacity():
    assert chaff_capacity(7) == (math.floor(0.45 * 86855 / 145), math.floor(0.2 * 86855 / 145))
    big = Ellipse()
    assert chaff_capacity(1, big)[0] == math.floor(0.45 * big.area_px)
    for d in range(1, 30):
        cap, safe = chaff_capacity(d)
        assert safe < cap


def test_chaff_capacity_at_nominal_area():
    class Nominal:
        area_px = 87000
    assert chaff_capacity(7, Nominal())[0] == 270


def test_security_report_lines():
    rep = security_report(2, 62, 240, 27, 9, 7, 5, 0.66, 50)
    lines = dict(line.split("=") for line in rep.as_lines())
    assert float(lines["attack_ops_log2"]) == pytest.approx(68.99, abs=0.01)
    assert 0 < rep.zeta <= 1 and rep.m_c <= 62
    assert "attack cost" in rep.as_table()


def test_reference_tables():
    tables = ReferenceTables.load()
    assert tables.reliable[(2, 7.0)] == 32
    assert tables.reliable[(3, 15.0)] == 35
    assert tables.match_rate[(4, 7.0)] == pytest.approx(0.85)
    assert tables.tau[0.3] == 48
    assert tables.delta_e_values() == [5.0, 7.0, 10.0, 15.0]


def test_reference_tables_custom_file(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("[reliable]\ndelta_e 5\n2 10\n[match_rate]\ndelta_v 5\n2 50\n"
                    "[tau]\nQ tau\n0.3 40\n")
    tables = ReferenceTables.load(path)
    assert tables.reliable == {(2, 5.0): 10}
    assert tables.match_rate == {(2, 5.0): 0.5}


@pytest.mark.parametrize("ratio,chi", [(5.0, 9), (2.7, 9), (2.35, 12), (2.0, 15), (1.99, None)])
def test_chi_for_ratio(ratio, chi):
    assert chi_for_ratio(ratio) == chi


@pytest.fixture(scope="module")
def row1_search():
    return param_search(2, 2, 68)


def test_param_search_table_row_one(row1_search):
    near = [r for r in row1_search
            if abs(r.t - 62) <= 4 and abs(r.r - 240) <= 20 and abs(r.k - 27) <= 3]
    assert near and all(r.bits >= 68 for r in near)


def test_param_search_rows_are_valid(row1_search):
    tables = ReferenceTables.load()
    bits = [r.bits for r in row1_search]
    assert bits == sorted(bits, reverse=True)
    for row in row1_search[::25]:
        assert row.m_c / row.m_f >= 2 if row.m_f else True
        assert row.t <= 2 * tables.reliable[(2, row.delta_e)]
        assert 0.75 * (row.m_c - row.m_f) - 1e-9 <= row.k <= 0.9 * (row.m_c - row.m_f) + 1e-9
        assert row.bits == pytest.approx(attack_cost_bits(row.t, row.r, row.k, row.chi, 2))
        SystemParams(f=2, u=2, t=row.t, r=row.r, k=row.k, chi=row.chi, d=row.d,
                     delta_e=row.delta_e, delta_v=row.delta_v, Q=row.Q).validate()


def test_param_search_is_pareto(row1_search):
    pts = np.array([(r.t, r.k_fraction, -r.bits) for r in row1_search])
    for i in range(0, len(pts), 37):
        dominated = np.all(pts <= pts[i], axis=1) & np.any(pts < pts[i], axis=1)
        assert not dominated.any()


def test_param_search_unreachable():
    with pytest.raises(NoFeasibleParams):
        param_search(2, 2, 10_000)
    with pytest.raises(ValueError):
        param_search(2, 2, 0)
