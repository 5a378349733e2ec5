import numpy as np
import pytest
from hypothesis import given, strategies as st

from bmldroom.frontend import (FilterbankSpec, FrameGrid, binaural_cues, bark_to_hz,
                               exp_filter, filterbank, gammatone_analytic,
                               gammatone_response, hz_to_bark, interaural_cue)
from bmldroom.stimuli import critical_bandwidth

FS = 44100


def test_bark_scale():
    # Traunmueller: z = 26.81 f / (1960 + f) - 0.53
    assert bark_to_hz(5.0) == pytest.approx(1960 * 5.53 / 21.28)
    assert bark_to_hz(5.0) == pytest.approx(509.34, abs=0.01)
    f = np.array([100.0, 500.0, 3000.0])
    assert np.allclose(bark_to_hz(hz_to_bark(f)), f)


def test_default_filterbank_spans_barks():
    spec = FilterbankSpec()
    assert len(spec.cfs) == 21
    assert np.all(np.diff(spec.cfs) > 0)
    spec.check(FS)
    with pytest.raises(ValueError):
        FilterbankSpec(barks=(25,)).check(16000)


@pytest.mark.parametrize("cf", [200.0, 509.34, 2000.0])
def test_gammatone_unit_gain_and_bandwidth(cf):
    bw = critical_bandwidth(cf)
    f = np.linspace(1.0, FS / 2 - 1, 400001)
    H = np.abs(gammatone_response(f, cf, bw, FS)) ** 2
    assert f[np.argmax(H)] == pytest.approx(cf, abs=1.0)
    assert H.max() == pytest.approx(1.0, abs=1e-3)
    erb = np.trapezoid(H, f)
    assert erb == pytest.approx(bw, rel=0.01)


def test_gammatone_tone_envelope_flat():
    cf = 509.34
    t = np.arange(int(0.3 * FS)) / FS
    y = gammatone_analytic(np.sin(2 * np.pi * cf * t), cf, critical_bandwidth(cf), FS)
    env = 20 * np.log10(np.abs(y[int(0.05 * FS):]))
    assert np.ptp(env) < 0.1
    # a real sine carries half its amplitude at positive frequencies
    assert np.mean(np.abs(y[int(0.05 * FS):])) == pytest.approx(0.5, abs=0.005)


def test_gammatone_impulse_envelope_unimodal():
    x = np.zeros(4000)
    x[0] = 1.0
    env = np.abs(gammatone_analytic(x, 1000.0, critical_bandwidth(1000.0), FS))
    k = np.argmax(env)
    assert np.all(np.diff(env[:k + 1]) >= 0)
    assert np.all(np.diff(env[k:]) <= 0)


def test_filterbank_shape():
    y = filterbank(np.zeros((2, 100)), FS)
    assert y.shape == (21, 2, 100)
    assert np.iscomplexobj(y)


def test_hann_frames_overlap_add_to_constant():
    g = FrameGrid(FS)
    w = g.window
    n = 20 * g.n_hop + g.n_len
    acc = np.zeros(n)
    for s in g.starts(n):
        acc[s:s + g.n_len] += w
    inner = acc[g.n_len:-g.n_len]
    assert np.allclose(inner, 1.0, atol=1e-12)


def test_frame_effective_length():
    w = FrameGrid(FS).window
    width = np.sum(20 * np.log10(np.maximum(w, 1e-12)) >= -6.0) / FS
    assert width == pytest.approx(0.012, abs=0.0005)


def test_frame_centres():
    g = FrameGrid(FS)
    n = FS // 2
    c = g.centres(n)
    assert len(c) == g.n_frames(n) == 1 + (n - g.n_len) // g.n_hop
    assert c[0] == pytest.approx(0.012, abs=1 / FS)
    assert np.allclose(np.diff(c), g.n_hop / FS)
    assert g.n_frames(10) == 0


def test_interaural_cue_identical_and_shifted():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(512) + 1j * rng.standard_normal(512)
    rho, phi, ok = interaural_cue(x, x)
    assert rho == pytest.approx(1.0) and phi == pytest.approx(0.0) and ok
    rho, phi, ok = interaural_cue(x * np.exp(1j * 0.7), x)
    assert phi == pytest.approx(0.7)
    rho, phi, ok = interaural_cue(np.zeros(8), x[:8])
    assert not ok and rho == 0 and phi == 0


def test_interaural_cue_independent_noise_low_coherence():
    rng = np.random.default_rng(1)
    a = rng.standard_normal(20000) + 1j * rng.standard_normal(20000)
    b = rng.standard_normal(20000) + 1j * rng.standard_normal(20000)
    rho, _, _ = interaural_cue(a, b)
    assert rho < 0.05


def test_binaural_cues_itd_in_phase():
    # a 500 Hz tone leading in the left ear by 200 us gives IPD 2 pi f tau
    t = np.arange(int(0.2 * FS)) / FS
    tau = 200e-6
    data = np.vstack([np.sin(2 * np.pi * 500 * (t + tau)), np.sin(2 * np.pi * 500 * t)])
    cues = binaural_cues(data, FS, spec=FilterbankSpec(barks=(5,)))
    k = len(cues.times) // 2
    assert cues.phi[0, k] == pytest.approx(2 * np.pi * 500 * tau, abs=0.01)
    assert cues.rho[0, k] == pytest.approx(1.0, abs=1e-6)


def test_exp_filter_step_response():
    hop = 0.012
    y = exp_filter(np.ones(200), 0.3, hop, initial=0.0)
    t = (np.arange(200) + 1) * hop
    k = np.argmax(y >= 1 - np.exp(-1))
    assert t[k] == pytest.approx(0.3, abs=hop)


def test_exp_filter_impulse_decay():
    hop, tau = 0.001, 0.05
    x = np.zeros(1000)
    x[0] = 1.0
    y = exp_filter(x, tau, hop, initial=0.0)
    n = int(round(tau / hop))
    assert y[n] / y[0] == pytest.approx(np.exp(-1), rel=1e-9)


def test_exp_filter_initial_state():
    y = exp_filter(np.ones(10), 0.3, 0.012, initial=1.0)
    assert np.allclose(y, 1.0)
    with pytest.raises(ValueError):
        exp_filter(np.ones(3), 0.0, 0.012)


@pytest.mark.property
@given(st.floats(-1e3, 1e3), st.floats(0.01, 1.0))
def test_exp_filter_dc_gain(c, tau):
    hop = 0.012
    n = int(np.ceil(10 * tau / hop)) + 1
    assert np.allclose(exp_filter(np.full(n, c), tau, hop), c, rtol=0, atol=1e-9)
    # from a zero state the error after 10 tau is c exp(-10)
    y = exp_filter(np.full(n, c), tau, hop, initial=0.0)
    assert abs(y[-1] - c) <= abs(c) * np.exp(-10) * 1.0001 + 1e-12


@pytest.mark.property
@given(st.integers(200, 900), st.integers(1, 4))
def test_hann_cola_property(n_len, k):
    n_len = 2 * n_len
    g = FrameGrid(float(n_len) / 0.024 * k / k, 0.024, 0.012)
    w = g.window
    hop = g.n_hop
    acc = np.zeros(12 * hop + g.n_len)
    for s in g.starts(len(acc)):
        acc[s:s + g.n_len] += w
    assert np.allclose(acc[g.n_len:-g.n_len], 1.0, atol=1e-12)


@pytest.mark.property
@given(st.floats(0.0, 2 * np.pi), st.floats(1e-3, 1e3))
def test_cue_gain_and_phase_invariance(theta, g):
    rng = np.random.default_rng(5)
    x = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    y = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    r0, p0, _ = interaural_cue(x, y)
    r1, p1, _ = interaural_cue(g * x * np.exp(1j * theta), g * y * np.exp(1j * theta))
    assert r1 == pytest.approx(r0, rel=1e-9)
    assert np.cos(p1 - p0) == pytest.approx(1.0, abs=1e-9)
