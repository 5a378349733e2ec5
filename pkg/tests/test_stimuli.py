import numpy as np
import pytest
from hypothesis import given, strategies as st

from bmldroom.binaural import HeadModel, render_point_source
from bmldroom.stimuli import (HctSpec, NoiseSpec, Signal, band_noise, critical_bandwidth,
                              envelope, gaussian_ramp, hct_amplitudes, level,
                              normalize_across_conditions, pad_to, set_level, spatialize,
                              synth_hct, synth_uen)

FS = 44100


def test_critical_bandwidth_values():
    # 25 + 75 (1 + 1.4 F^2)^0.69, F in kHz
    assert critical_bandwidth(0.0) == pytest.approx(100.0)
    assert critical_bandwidth(500.0) == pytest.approx(25 + 75 * 1.35 ** 0.69)
    assert critical_bandwidth(1000.0) == pytest.approx(25 + 75 * 2.4 ** 0.69)


def test_hct_effective_duration():
    sig = synth_hct(HctSpec(), FS)
    env = np.abs(np.asarray(envelope(sig.n_samples, FS, 0.010)))
    above = np.sum(env >= 0.9) / FS
    assert above == pytest.approx(0.5, abs=0.002)


def test_hct_level_and_spectrum():
    spec = HctSpec()
    sig = synth_hct(spec, FS)
    assert level(sig) == pytest.approx(60.0)
    x = sig.data[0]
    X = np.abs(np.fft.rfft(x * np.hanning(len(x)), 8 * len(x))) ** 2
    f = np.fft.rfftfreq(8 * len(x), 1 / FS)
    peaks = [X[abs(f - fh) < 10.0].sum() for fh in spec.frequencies]
    # energy per critical band constant: a_h^2 CB(f_h) / f0 equal
    ratio = np.array(peaks) * critical_bandwidth(spec.frequencies)
    assert np.ptp(ratio) / ratio.mean() < 0.02
    assert np.allclose(hct_amplitudes(spec) ** 2 * critical_bandwidth(spec.frequencies), 50.0)


def test_hct_envelope_symmetric():
    env = envelope(2000, FS, 0.01)
    assert np.allclose(env, env[::-1])
    r = gaussian_ramp(0.01, FS)
    assert r[0] == pytest.approx(0.0)
    assert np.all(np.diff(r) > 0)


def test_hct_random_phase_seeded():
    a = synth_hct(HctSpec(random_phase=True, seed=3), FS)
    b = synth_hct(HctSpec(random_phase=True, seed=3), FS)
    c = synth_hct(HctSpec(random_phase=True, seed=4), FS)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def _band_power(x, lo, hi):
    X = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(len(x), 1 / FS)
    return X[(f >= lo) & (f < hi)].sum()


def test_uen_equal_power_per_critical_band():
    x = synth_uen(NoiseSpec(duration=4.0, seed=2)).data[0]
    powers = []
    for fc in (320.0, 500.0, 680.0):
        half = critical_bandwidth(fc) / 2
        powers.append(_band_power(x, fc - half, fc + half))
    powers = np.array(powers)
    assert np.ptp(10 * np.log10(powers)) < 0.6
    assert _band_power(x, 800, 5000) < 1e-6 * powers.sum()


def test_uen_level_and_seed():
    a = synth_uen(NoiseSpec(seed=1))
    assert level(a) == pytest.approx(60.0)
    assert a.duration == pytest.approx(0.9)
    assert np.array_equal(a.data, synth_uen(NoiseSpec(seed=1)).data)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(f_lo=800, f_hi=700)


@pytest.mark.property
@given(st.floats(20.0, 90.0), st.floats(1e-3, 1e3))
def test_set_level_is_gain_invariant(target, g):
    x = band_noise(200, 2000, 0.1, FS, seed=0)
    y = set_level(x.scaled(g), target)
    assert level(y) == pytest.approx(target, abs=1e-9)
    assert np.allclose(y.data, set_level(x, target).data, rtol=1e-9, atol=0)


def test_set_level_silent_raises():
    with pytest.raises(ValueError):
        set_level(Signal(np.zeros(10), FS), 60.0)


def test_spatialize_and_pad():
    h = HeadModel([2.0, 2.0, 1.4])
    b = render_point_source(0.0, 1.0, h, FS)
    x = synth_hct(HctSpec(), FS)
    y = spatialize(x, b)
    assert y.data.shape == (2, x.n_samples + b.n_samples - 1)
    assert np.array_equal(y.data[0], y.data[1])
    z = pad_to(y, y.n_samples + 100, 50)
    assert np.array_equal(z.data[:, 50:50 + y.n_samples], y.data)
    with pytest.raises(ValueError):
        pad_to(y, y.n_samples, 1)
    with pytest.raises(ValueError):
        spatialize(y, b)


def test_normalize_across_conditions():
    sigs = [band_noise(200, 800, 0.2, FS, seed=s, level_db=50 + 5 * s) for s in range(3)]
    out = normalize_across_conditions(sigs)
    assert all(s.energy == pytest.approx(out[0].energy) for s in out)
