import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import _shared
from ladderdyn.analysis import (ScalingReport, alignment_residual, detect_early_maximum,
                                linear_fit, time_shift_align)
from ladderdyn.errors import InsufficientOverlapError, NotEquilibratedError

DT = 0.5
T = np.arange(0, 100 + DT / 2, DT)


def relax(t, x0=4.0, rate=0.1):
    return x0 * np.exp(-rate * np.clip(t, 0, None))


def test_identical_traces():
    y = relax(T)
    np.testing.assert_array_equal(time_shift_align([y, y, y], DT), [0, 0, 0])


@settings(max_examples=20, deadline=None)
@given(delay=st.floats(-20, 20))
def test_recovers_constructed_delay(delay):
    # a smooth curve without a flat start so every delay is identifiable
    f = lambda t: np.tanh((t - 40) / 8)
    shifts = time_shift_align([f(T), f(T - delay)], DT)
    assert shifts[0] == 0
    assert abs(shifts[1] - delay) <= DT / 2


def test_delayed_relaxation_copy():
    late = np.interp(T - 3.0, T, relax(T), left=4.0)
    shifts = time_shift_align([relax(T), late], DT)
    assert shifts[1] == pytest.approx(3.0, abs=DT / 2)
    assert alignment_residual([relax(T), late], shifts, DT) < 1e-2


def test_three_way_chain():
    f = lambda t: np.tanh((t - 50) / 10)
    traces = [f(T), f(T - 4.0), f(T + 6.0)]
    shifts = time_shift_align(traces, DT)
    np.testing.assert_allclose(shifts, [0, 4.0, -6.0], atol=DT / 2)


def test_insufficient_overlap():
    short = np.arange(0, 8, DT)
    with pytest.raises(InsufficientOverlapError):
        time_shift_align([relax(short), relax(short)], DT)
    with pytest.raises(ValueError):
        time_shift_align([relax(T)], DT)


def test_monotone_rise_has_no_distinct_maximum():
    var = 5 * (1 - np.exp(-T / 10))
    mean = relax(T, rate=0.2)
    em = detect_early_maximum(T, var, mean)
    assert not em.distinct and em.value is None
    assert em.plateau == pytest.approx(5, abs=1e-3)


def test_constructed_early_maximum():
    var = 4 + 3 * np.exp(-((T - 15) / 5) ** 2)
    mean = relax(T, rate=0.1)  # settles below 0.2 at t = 10 ln 20
    em = detect_early_maximum(T, var, mean)
    assert em.distinct and em.time == pytest.approx(15.0) and em.value == pytest.approx(7.0)
    assert em.t_equilibrated == pytest.approx(10 * np.log(20), abs=DT)


def test_maximum_after_equilibration_ignored():
    var = 4 + 3 * np.exp(-((T - 80) / 3) ** 2)
    mean = relax(T, rate=0.5)
    assert not detect_early_maximum(T, var, mean).distinct


def test_not_equilibrated():
    with pytest.raises(NotEquilibratedError):
        detect_early_maximum(T, np.ones_like(T), relax(T, rate=0.001))


def test_linear_fit():
    fit = linear_fit([12, 16, 20], [3.0, 4.0, 5.0])
    assert fit.slope == pytest.approx(0.25) and fit.intercept == pytest.approx(0.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)


def test_scaling_report_assembly():
    rep = ScalingReport()
    for N, fin, typ, em in [(12, 3.0, 3.1, 6.0), (16, 4.0, 4.1, 7.1), (20, 5.0, 5.1, 7.9)]:
        rep.add(N, [fin, fin], typ, 0.1, em, {})
    rep.fit()
    assert rep.typical_fit.slope == pytest.approx(0.25)
    np.testing.assert_allclose(rep.early_max_shift(), [3.0, 3.1, 2.9])
    d = rep.to_dict()
    assert d["early_max_fit"]["r_squared"] > 0.9
    rep2 = ScalingReport()
    for N in (12, 16):
        rep2.add(N, [1.0], 1.0, 0.1, None, {})
    assert rep2.fit().typical_fit is None


# ---- desk-scale checks on the shared N=12/16/20 data (slow) ----

@pytest.mark.slow
def test_n16_alignment_residual():
    series = [np.array(_shared.trace(16, X).mean_x) for X in (6, 4, 2)]
    shifts = time_shift_align(series, DT)
    spread = max(s[0] for s in series) - min(s[0] for s in series)
    assert alignment_residual(series, shifts, DT) < 0.1 * spread
    # the near-equilibrium curves sit later on the common clock
    assert shifts[1] < 0 and shifts[2] < shifts[1]


@pytest.mark.slow
def test_n16_most_off_equilibrium_maximum():
    tr = _shared.trace(16, 6)
    T_, _, m, v, *_ = tr.arrays()
    em = detect_early_maximum(T_, v, m)
    assert em.distinct and em.value > tr.late(v)


@pytest.mark.slow
def test_early_maximum_shift_size_independent():
    res = _shared.scaling()[0]["results"]
    shift = np.array(res["largest_early_maximum"], dtype=float) - np.array(res["mean_final_variance"])
    assert np.all(np.isfinite(shift)) and np.all(shift > 0)
    assert np.ptp(shift) < shift.mean()


@pytest.mark.slow
def test_scaling_fit_slopes_agree():
    res = _shared.scaling()[0]["results"]
    typ, em = res["typical_fit"], res["early_max_fit"]
    assert em is not None
    err = np.hypot(typ["slope_stderr"], em["slope_stderr"])
    assert abs(typ["slope"] - em["slope"]) < 2 * err
