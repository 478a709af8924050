import numpy as np
import pytest

from spinphonon.angular import AngularMomentum
from spinphonon.dynamics import (
    AmbiguousEigenvectorError,
    PositivityError,
    RateReport,
    extract_tau,
    fit_regimes,
    pair_sums_to_times,
    pair_t1,
    pair_t2,
    pair_t2star,
    propagate,
)
from spinphonon.constants import KB_CM1_PER_K
from spinphonon.generators import JumpOperator, PairRateSums, Superoperator, assemble_generator
from spinphonon.spin_model import KramersPair, SpinModel, eigensystem_for

PAIR01 = KramersPair(a=0, b=1, jz_a=0.5, jz_b=-0.5)
ES2 = eigensystem_for(SpinModel(angular_momentum=AngularMomentum(1)))
ES4 = eigensystem_for(SpinModel(angular_momentum=AngularMomentum(3)))


def hop(p, q, rate, dim):
    m = np.zeros((dim, dim), dtype=complex)
    m[p, q] = 1.0
    return JumpOperator(gamma=rate, matrix=m, frequency_cm1=0.0, label=("hop", p, q), basis="x")


def two_state_superoperator(up, down):
    """Classical 0 <-> 1 exchange embedded as a Lindblad generator."""
    jumps = [hop(1, 0, up, 2), hop(0, 1, down, 2)]
    return assemble_generator(jumps, order=2, dim=2, basis="x"), jumps


def test_extract_tau_two_state_exchange():
    up, down = 3.0, 5.0
    sup, _ = two_state_superoperator(up, down)
    res = extract_tau(sup, ES2, PAIR01)
    assert res.tau_s == pytest.approx(1.0 / (up + down), rel=1e-12)
    assert res.overlap_score == pytest.approx(1.0, abs=1e-9)
    assert res.eigenvalue_per_s.real == pytest.approx(-(up + down), rel=1e-12)


def test_extract_tau_zero_generator_is_blocked():
    sup = Superoperator(order=2, matrix=np.zeros((4, 4), dtype=complex), basis="x", dim=2)
    res = extract_tau(sup, ES2, PAIR01)
    assert res.tau_s == np.inf
    assert res.overlap_score == pytest.approx(1.0, abs=1e-12)


def test_extract_tau_untouched_pair_is_blocked():
    # dynamics lives entirely on 2 <-> 3; the probe difference on (0,1)
    # never decays and must be reported as blocked, not picked from noise
    jumps = [hop(3, 2, 1.0, 4), hop(2, 3, 2.0, 4)]
    sup = assemble_generator(jumps, order=2, dim=4, basis="x")
    res = extract_tau(sup, ES4, PAIR01)
    assert res.tau_s == np.inf
    assert res.overlap_score == pytest.approx(1.0, abs=1e-9)


def test_extract_tau_ambiguous_raises_with_table():
    # asymmetric network spreads the probe over several modes, none dominant
    a, b, c, d = 4.0, 1.0, 1.0, 0.6
    rates = [(2, 0, a), (0, 2, a), (3, 1, b), (1, 3, b),
             (1, 0, c), (0, 1, c), (3, 2, d), (2, 3, d)]
    jumps = [hop(p, q, r, 4) for p, q, r in rates]
    sup = assemble_generator(jumps, order=2, dim=4, basis="x")
    with pytest.raises(AmbiguousEigenvectorError) as err:
        extract_tau(sup, ES4, PAIR01)
    table = err.value.table
    assert len(table) == 16
    amps = [amp for _, amp in table]
    assert max(amps) < 0.5
    assert amps == sorted(amps, reverse=True)


def test_pair_t1_closed_form():
    l_mat = np.zeros((3, 3), dtype=complex)
    l_mat[2, 0] = 0.6  # leak out of a
    l_mat[2, 1] = 0.8  # leak out of b
    l_mat[0, 0] = 9.9  # diagonal does not count as loss
    jump = JumpOperator(gamma=2.0, matrix=l_mat, frequency_cm1=0.0, label=("x",), basis="x")
    expected_half = 2.0 * 0.5 * (0.6**2 + 0.8**2)
    assert pair_t1([jump], 0, 1) == pytest.approx(1.0 / (2.0 * expected_half), rel=1e-12)


def test_pair_t2star_closed_form():
    l_mat = np.diag([0.3, -0.1, 0.0]).astype(complex)
    jump = JumpOperator(gamma=4.0, matrix=l_mat, frequency_cm1=0.0, label=("x",), basis="x")
    rate = 4.0 * 0.5 * abs(0.3 - (-0.1)) ** 2
    assert pair_t2star([jump], 0, 1) == pytest.approx(1.0 / rate, rel=1e-12)


def test_pair_sums_to_times_inverts_and_handles_zero():
    t1, t2star = pair_sums_to_times(PairRateSums(half_t1_rate=2.5, dephasing_rate=0.0))
    assert t1 == pytest.approx(1.0 / 5.0, rel=1e-12)
    assert t2star == np.inf


def test_identity_residual_closed():
    rep = RateReport(temperature_k=1.0, order=2, tau_s=1.0,
                     t1_s=0.5, t2_s=0.25, t2star_s=0.5, overlap_score=1.0)
    # 1/t2 = 4 = 1/(2*0.5) + 1/0.5 = 1 + 2 = 3 -> residual (4-3)/4
    assert rep.identity_residual() == pytest.approx(0.25, rel=1e-12)


def test_pair_t2_uncoupled_flag():
    up, down = 1.0, 2.0
    sup, _ = two_state_superoperator(up, down)
    res = pair_t2(sup, 0, 1)
    # coherence decays at half the population exchange rate
    assert res.t2_s == pytest.approx(2.0 / (up + down), rel=1e-12)
    assert not res.coupled
    assert res.effective_t2_s == res.t2_s


def test_propagate_matches_two_state_analytics():
    up, down = 40.0, 10.0
    sup, _ = two_state_superoperator(up, down)
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    t = np.linspace(0.0, 0.2, 9)
    traj = propagate(sup, rho0, t)
    p_stat = down / (up + down)
    expected = p_stat + (1.0 - p_stat) * np.exp(-(up + down) * t)
    assert np.allclose(traj[:, 0, 0].real, expected, atol=1e-10)
    assert np.allclose(np.einsum("tii->t", traj).real, 1.0, atol=1e-12)


def test_propagate_rejects_bad_inputs():
    sup, _ = two_state_superoperator(1.0, 1.0)
    good = np.eye(2, dtype=complex) / 2.0
    with pytest.raises(ValueError):
        propagate(sup, np.diag([2.0, -1.0]).astype(complex), [0.0, 1.0])
    with pytest.raises(ValueError):
        propagate(sup, np.array([[0.5, 0.3], [0.1, 0.5]], dtype=complex), [0.0, 1.0])
    with pytest.raises(ValueError):
        propagate(sup, good, [1.0, 0.5])


def test_propagate_flags_trace_violating_generator():
    sup, _ = two_state_superoperator(1.0, 1.0)
    bad = Superoperator(order=2, matrix=sup.matrix + 0.05 * np.eye(4), basis="x", dim=2)
    with pytest.raises(PositivityError):
        propagate(bad, np.eye(2, dtype=complex) / 2.0, [0.0, 1.0])


def test_fit_regimes_recovers_arrhenius_exactly():
    u, pref = 35.0, 2.0e9
    temps = np.array([2.0, 3.0, 4.5, 7.0, 11.0])
    rates = pref * np.exp(-u / (KB_CM1_PER_K * temps))
    fit = fit_regimes(list(zip(temps, rates)), "arrhenius")
    assert fit.u_cm1 == pytest.approx(u, rel=1e-10)
    assert fit.prefactor_per_s == pytest.approx(pref, rel=1e-9)
    assert fit.residual < 1e-12
    assert fit.window_k == (2.0, 11.0)


def test_fit_regimes_recovers_power_law_exactly():
    n, scale = 3.0, 7.5e4
    temps = np.array([1.0, 2.0, 4.0, 8.0])
    rates = scale * temps**n
    fit = fit_regimes(list(zip(temps, rates)), "power_law")
    assert fit.exponent == pytest.approx(n, rel=1e-12)
    assert fit.scale == pytest.approx(scale, rel=1e-10)


def test_fit_regimes_input_guards():
    with pytest.raises(ValueError):
        fit_regimes([(1.0, 1.0)] * 5, "stretched")
    with pytest.raises(ValueError):
        fit_regimes([(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)], "arrhenius")
    # blocked points (rate 0) are dropped; too few survivors must raise
    curve = [(1.0, 0.0), (2.0, 0.0), (3.0, 1.0), (4.0, 2.0), (5.0, 3.0)]
    with pytest.raises(ValueError):
        fit_regimes(curve, "arrhenius")


def test_two_phonon_tau_window_shows_cubic_trend(four_level_engine):
    # in the window where kT spans the difference-mode pair the
    # cumulative fourth-order 1/tau climbs like a power law near T^3
    eng = four_level_engine
    curve = []
    for t_k in eng.config.temperatures_k:
        if 2.83 <= t_k <= 11.3:
            rep = eng.rates(t_k, (2, 4), workers=1)[4]
            curve.append((t_k, 1.0 / rep.tau_s))
    fit = fit_regimes(curve, "power_law")
    assert abs(fit.exponent - 3.0) <= 0.5
