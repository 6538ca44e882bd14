from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from conftest import profile
from gexprobe.pattern_rules import (PatternKind, detect_0dte, detect_gamma_positioning, detect_stock_pinning,
                                    evaluate_all, read_signals_csv, write_signals_csv)
from gexprobe.thresholds import Thresholds


def test_gamma_positioning_triggers():
    s = detect_gamma_positioning(profile(net_gex=-2.5e9, spot=500, flip_point=505, call_gamma_concentration=0.75))
    assert s.triggered and all(c.passed for c in s.details.values())


def test_gamma_positioning_regime_boundary():
    assert not detect_gamma_positioning(profile(net_gex=-1.9e9)).triggered
    assert not detect_gamma_positioning(profile(net_gex=-2e9)).triggered


def test_gamma_positioning_needs_flip():
    s = detect_gamma_positioning(profile(flip_point=None))
    assert not s.triggered and not s.details["flip_distance"].passed


def test_gamma_positioning_side_setting():
    put_heavy = profile(call_gamma_concentration=0.2)
    assert detect_gamma_positioning(put_heavy).triggered
    assert not detect_gamma_positioning(put_heavy, Thresholds(gp_concentration_side="call")).triggered


def test_pinning_rules():
    base = profile(top_strike_oi_share=0.85, spot=500, top_strike=499, min_dte=2)
    assert detect_stock_pinning(base).triggered
    assert not detect_stock_pinning(replace(base, min_dte=5)).triggered
    assert not detect_stock_pinning(replace(base, top_strike_oi_share=0.80)).triggered
    assert not detect_stock_pinning(replace(base, top_strike=None, top_strike_oi_share=None)).triggered


def test_zero_dte_rules():
    base = profile(min_dte=0, net_gex=-3.5e9, call_gamma_concentration=0.80)
    assert detect_0dte(base).triggered
    assert not detect_0dte(replace(base, min_dte=1)).triggered
    assert detect_0dte(replace(base, net_gex=3.5e9, call_gamma_concentration=0.22)).triggered
    assert not detect_0dte(replace(base, net_gex=3e9)).triggered


def test_evaluate_all_enum_order():
    assert [s.kind for s in evaluate_all(profile())] == list(PatternKind)


@given(net=st.floats(-50e9, 50e9), extra=st.floats(0, 50e9), conc=st.floats(0, 1),
       flip=st.one_of(st.none(), st.floats(450, 550)))
def test_more_negative_never_untriggers(net, extra, conc, flip):
    p = profile(net_gex=net, call_gamma_concentration=conc, flip_point=flip)
    if detect_gamma_positioning(p).triggered:
        assert detect_gamma_positioning(replace(p, net_gex=net - extra)).triggered


@given(net=st.floats(-50e9, 50e9), conc=st.floats(0, 1), dte=st.integers(0, 10),
       share=st.one_of(st.none(), st.floats(0, 1)))
def test_determinism_and_details(net, conc, dte, share):
    p = profile(net_gex=net, call_gamma_concentration=conc, min_dte=dte, top_strike_oi_share=share)
    a, b = evaluate_all(p), evaluate_all(p)
    assert a == b
    for s in a:
        assert s.triggered == all(c.passed for c in s.details.values())


def test_signals_csv_round_trip(tmp_path):
    rows = [(profile().as_of, evaluate_all(profile())),
            (profile().as_of.replace(day=2), evaluate_all(profile(min_dte=0, net_gex=-4e9, flip_point=None)))]
    path = tmp_path / "signals.csv"
    write_signals_csv(path, rows)
    back = read_signals_csv(path)
    for d, sigs in rows:
        assert [(s.kind, s.triggered) for s in back[d]] == [(s.kind, s.triggered) for s in sigs]


def test_threshold_validation():
    with pytest.raises(ValueError):
        Thresholds(gp_concentration_side="puts")
    with pytest.raises(KeyError):
        Thresholds.from_dict({"nonsense": "1"})
    assert Thresholds.from_dict({"pin_max_dte": "3"}).pin_max_dte == 3
