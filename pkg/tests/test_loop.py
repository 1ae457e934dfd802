"""Unit tests for shot noise, the servo, and the loop RIN spectra."""

import math

import numpy as np
import pytest

from sqzfilter import (
    BeamSplitter,
    CavityParams,
    DetectionParams,
    LoopInstabilityWarning,
    NoiseFloors,
    ServoModel,
    SingularityError,
    Spectrum,
    Unit,
    cross_cavity_normalization,
    db_from_linear,
    freq_noise_from_phase,
    inloop_rin2,
    log_spaced_grid,
    outofloop_rin2_closed,
    outofloop_rin2_open,
    phase_noise_from_freq,
    servo_gain,
    shot_noise_rsn2,
    suppression_factor,
)

DET = DetectionParams(50e-6, 1550e-9)
OCC = CavityParams.from_linewidth_hz(7.5e6, "three_times_half_detuned", excess_loss=0.016)
IMC = CavityParams.from_linewidth_hz(6.8e6, "half_detuned")
TAP = BeamSplitter.from_reflectivity(0.99)
GRID = log_spaced_grid(1e3, 1e5, 7)


def floors_flat(rin_x2=0.0, phase=0.0, electronic=0.0, grid=GRID):
    n = len(grid)
    return NoiseFloors(
        Spectrum(grid, np.full(n, rin_x2), Unit.RIN),
        Spectrum(grid, np.full(n, electronic), Unit.RIN),
        Spectrum(grid, np.full(n, phase), Unit.PHASE_NOISE),
    )


# ---------------------------------------------------------------- shot noise


def test_shot_noise_paper_power():
    rsn2 = shot_noise_rsn2(DET)
    assert db_from_linear(rsn2) == pytest.approx(-142.9, abs=0.05)


def test_shot_noise_scales_inversely_with_power():
    double = shot_noise_rsn2(DetectionParams(100e-6, 1550e-9))
    assert db_from_linear(double) - db_from_linear(shot_noise_rsn2(DET)) == pytest.approx(
        -3.01, abs=0.01
    )
    five_mw = shot_noise_rsn2(DetectionParams(5e-3, 1550e-9))
    assert db_from_linear(five_mw) == pytest.approx(-162.9, abs=0.05)


def test_detection_params_validation():
    with pytest.raises(ValueError):
        DetectionParams(0.0, 1550e-9)
    with pytest.raises(ValueError):
        DetectionParams(50e-6, -1.0)


# ---------------------------------------------------------------- servo


def test_servo_gain_unity_crossing():
    servo = ServoModel(1e5)
    g = servo_gain(servo, 1e5)
    assert abs(g) == pytest.approx(1.0, rel=1e-12)
    assert math.degrees(np.angle(g)) == pytest.approx(-90.0, abs=1e-9)
    assert abs(servo_gain(servo, 1e6)) == pytest.approx(0.1, rel=1e-12)


def test_servo_delay_adds_phase():
    base = ServoModel(1e5, integrator_slope=2)
    delayed = ServoModel(1e5, integrator_slope=2, delay_s=1e-6)
    extra = np.angle(servo_gain(delayed, 1e5) / servo_gain(base, 1e5))
    assert math.degrees(extra) == pytest.approx(-36.0, abs=1e-6)


def test_servo_low_pass_and_domain():
    lp = ServoModel(1e5, low_pass_hz=1e4)
    plain = ServoModel(1e5)
    ratio = abs(servo_gain(lp, 1e4)) / abs(servo_gain(plain, 1e4))
    assert ratio == pytest.approx(1 / math.sqrt(2), rel=1e-12)
    with pytest.raises(ValueError):
        servo_gain(plain, 0.0)
    with pytest.raises(ValueError):
        ServoModel(-1.0)
    with pytest.raises(ValueError):
        ServoModel(1e5, integrator_slope=0)


def test_suppression_factor_integrator_form():
    servo = ServoModel(1e6)
    f = np.array([1e3, 1e4, 1e5])
    got = suppression_factor(servo, TAP, f)
    assert np.allclose(got, 1.0 + 0.01 * (1e6 / f) ** 2, rtol=1e-12)


def test_suppression_singularity_and_instability():
    # a 4th-order integrator crosses G real-positive; sqrt(t)*G = 1 is singular
    servo = ServoModel(1e5, integrator_slope=4)
    f_sing = 1e5 * 0.01 ** (1.0 / 8.0)
    with pytest.raises(SingularityError) as err:
        suppression_factor(servo, BeamSplitter(0.01, 0.99), f_sing)
    assert err.value.frequency_hz == pytest.approx(f_sing)

    with pytest.warns(LoopInstabilityWarning):
        suppression_factor(servo, BeamSplitter(0.01, 0.99), 1.3 * f_sing)


# ---------------------------------------------------------------- in-loop RIN


def test_inloop_shot_limited():
    floors = floors_flat()
    got = inloop_rin2(floors, OCC, DET, 1.0, 8e3)
    assert got == shot_noise_rsn2(DET)


def test_inloop_with_squeezing_is_8p1_db_down():
    floors = floors_flat()
    got = inloop_rin2(floors, OCC, DET, 0.155, 8e3)
    assert db_from_linear(got) == pytest.approx(-151.0, abs=0.05)


def test_inloop_with_paper_floors():
    floors = floors_flat(rin_x2=10 ** (-15.7))
    got = inloop_rin2(floors, OCC, DET, 0.155, 2e3)
    oracle = 10 ** (-15.7) + 0.155 * shot_noise_rsn2(DET)
    assert got == pytest.approx(oracle, rel=1e-9)
    assert db_from_linear(got) == pytest.approx(-149.9, abs=0.2)


def test_inloop_never_below_scaled_shot():
    rng = np.random.default_rng(31)
    for _ in range(200):
        floors = floors_flat(rin_x2=rng.uniform(0, 1e-15), phase=rng.uniform(0, 1e-8))
        s = rng.uniform(0.05, 2.0)
        f = rng.uniform(1e3, 1e5)
        assert inloop_rin2(floors, OCC, DET, s, f) >= shot_noise_rsn2(DET) * s


# ---------------------------------------------------------------- out-of-loop RIN


def test_open_loop_limits():
    floors = floors_flat(rin_x2=3e-16)
    assert outofloop_rin2_open(floors, IMC, 5e3) == 3e-16  # no phase noise

    floors = floors_flat(phase=1e-9)
    lo = outofloop_rin2_open(floors, IMC, 1e3)
    assert outofloop_rin2_open(floors, IMC, 2e3) == pytest.approx(4 * lo, rel=1e-12)
    assert lo < 1e-15  # conversion vanishes toward DC


def test_closed_loop_off_equals_open_plus_readout():
    floors = floors_flat(rin_x2=2e-16, phase=1e-9)
    servo = ServoModel(1e-3)  # negligible gain in band
    bs = BeamSplitter.from_reflectivity(1.0 - 1e-9)
    f = 1e4
    closed = outofloop_rin2_closed(floors, IMC, servo, bs, DET, 1.0, f)
    theta2 = (2 * math.pi * f / IMC.kappa) ** 2
    open_val = outofloop_rin2_open(floors, IMC, f)
    assert closed == pytest.approx(open_val + theta2 * shot_noise_rsn2(DET) / bs.r, rel=1e-6)


def test_closed_loop_infinite_gain_limit():
    floors = floors_flat(rin_x2=2e-16, phase=1e-9)
    servo = ServoModel(1e12)
    f = 1e4
    closed = outofloop_rin2_closed(floors, IMC, servo, TAP, DET, 0.155, f)
    theta2 = (2 * math.pi * f / IMC.kappa) ** 2
    expect = 2e-16 + theta2 * shot_noise_rsn2(DET) * 0.155 / 0.99
    assert closed == pytest.approx(expect, rel=1e-6)


def test_closed_loop_squeezing_ratio_in_suppressed_band():
    # with technical floors at zero, the phase-converted readout terms for
    # squeezed vs vacuum injection differ by exactly the squeezed variance
    floors = floors_flat()
    servo = ServoModel(1e6)
    f = 2e4
    sq = outofloop_rin2_closed(floors, IMC, servo, TAP, DET, 0.155, f)
    cl = outofloop_rin2_closed(floors, IMC, servo, TAP, DET, 1.0, f)
    assert db_from_linear(cl) - db_from_linear(sq) == pytest.approx(8.1, abs=0.05)


def test_closed_loop_requires_reflectivity():
    floors = floors_flat()
    with pytest.raises(ValueError):
        outofloop_rin2_closed(floors, IMC, ServoModel(1e5), BeamSplitter(1.0, 0.0), DET, 1.0, 1e4)


# ---------------------------------------------------------------- conversions


def test_freq_noise_from_phase_anchor():
    grid = log_spaced_grid(1e3, 1e5, 3)
    s_phi = Spectrum(grid, np.full(3, 1.0), Unit.PHASE_NOISE)
    s_nu = freq_noise_from_phase(s_phi)
    assert s_nu.unit is Unit.FREQ_NOISE
    assert s_nu.values[0] == pytest.approx(1e6)


def test_white_frequency_noise_is_flat():
    grid = log_spaced_grid(1e3, 1e5, 9)
    s_phi = Spectrum(grid, 1e4 / grid.points**2, Unit.PHASE_NOISE)
    s_nu = freq_noise_from_phase(s_phi)
    assert np.allclose(s_nu.values, 1e4, rtol=1e-12)


def test_phase_freq_round_trip():
    grid = log_spaced_grid(1e3, 1e5, 9)
    s_phi = Spectrum(grid, 1e3 / grid.points**1.5, Unit.PHASE_NOISE)
    back = phase_noise_from_freq(freq_noise_from_phase(s_phi))
    assert np.allclose(back.values, s_phi.values, rtol=1e-12)
    with pytest.raises(ValueError):
        freq_noise_from_phase(Spectrum(grid, s_phi.values, Unit.RIN))
    with pytest.raises(ValueError):
        phase_noise_from_freq(s_phi)


def test_cross_cavity_normalization_values():
    assert cross_cavity_normalization(OCC, IMC) == pytest.approx(8.22e-3, rel=1e-3)
    assert db_from_linear(cross_cavity_normalization(OCC, IMC)) == pytest.approx(-20.85, abs=0.01)
    # matched conversion coefficients
    small = CavityParams.from_linewidth_hz(0.1 * 6.8e6, "three_times_half_detuned")
    assert cross_cavity_normalization(small, IMC) == pytest.approx(1.0, rel=1e-12)
    assert cross_cavity_normalization(IMC, IMC) == pytest.approx(1.0, rel=1e-12)


# ---------------------------------------------------------------- noise floor bundle


def test_noise_floors_unit_and_grid_checks():
    n = len(GRID)
    rin = Spectrum(GRID, np.full(n, 1e-16), Unit.RIN)
    phase = Spectrum(GRID, np.full(n, 1e-8), Unit.PHASE_NOISE)
    with pytest.raises(ValueError):
        NoiseFloors(rin, rin, rin)  # wrong unit for the phase floor
    with pytest.raises(ValueError):
        NoiseFloors(phase, rin, phase)
    other = log_spaced_grid(1e3, 1e5, 5)
    with pytest.raises(ValueError):
        NoiseFloors(rin, Spectrum(other, np.full(5, 1e-16), Unit.RIN), phase)
