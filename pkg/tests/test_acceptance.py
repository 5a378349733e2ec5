"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line that is printed in the terminal
summary under "acceptance criteria".  Tolerances are fixed here and never
relaxed to make a result pass.
"""
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from bmldroom.experiments import (ConditionSpec, build_conditions, condition_signals,
                                  ic_timeseries, read_results_csv, replicate_braasch,
                                  replicate_zurek, rmse_against, run_conditions)
from bmldroom.model import bmld_ratio, k_factor
from bmldroom.rir import (RIR, direct_to_reverberant, hybrid_rir, lab_tail_targets,
                          rt60_schroeder)
from bmldroom.room import (compute_image_sources, lattice_image_sources, lab_receiver,
                           lab_room, pose_at, shoebox)
from bmldroom.staircase import StaircaseConfig, run_tracks

pytestmark = pytest.mark.acceptance
JOBS = os.cpu_count() or 1
ROOT = Path(__file__).resolve().parents[1]
BRAASCH_DATA_ENV = "BMLDROOM_BRAASCH_DATA"


def record(n, ok, detail):
    ACCEPTANCE_LINES[n] = f"ACCEPTANCE {n:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    assert ok, ACCEPTANCE_LINES[n]


def _benefits(rows, variant, **sel):
    out = {}
    for r in rows:
        if r.variant == variant and all(getattr(r, k) == v for k, v in sel.items()):
            out[r.t_ms] = r.benefit_db
    return out


@pytest.fixture(scope="module")
def exp1():
    t0 = time.perf_counter()
    rows = run_conditions(build_conditions(1), jobs=JOBS)
    return rows, time.perf_counter() - t0


@pytest.fixture(scope="module")
def exp2():
    t0 = time.perf_counter()
    rows = run_conditions(build_conditions(2), jobs=JOBS)
    return rows, time.perf_counter() - t0


def test_criterion_01_bmld_formula():
    t0 = time.perf_counter()
    k = float(k_factor(500.0))
    n0s0 = float(10 * np.log10(bmld_ratio(0.0, 0.0, 1.0, 500.0)))
    n0spi = float(10 * np.log10(bmld_ratio(np.pi, 0.0, 1.0, 500.0)))
    dt = time.perf_counter() - t0
    ok = abs(k - 1.1846) <= 1e-4 and n0s0 == 0.0 and abs(n0spi - 10.73) <= 0.01 and dt < 1
    record(1, ok, f"k(500)={k:.5f} N0S0={n0s0:g} dB N0Spi={n0spi:.4f} dB ({dt:.3f} s)")


def test_criterion_02_ism_lattice():
    t0 = time.perf_counter()
    dims, src, rec = (4.3, 5.7, 2.9), np.array([1.13, 3.71, 1.27]), np.array([2.61, 1.49, 1.58])
    worst, counts_ok = 0.0, True
    for order in range(5):
        ism = compute_image_sources(shoebox(*dims, 0.1), src, rec, order)
        lat_p, lat_o = lattice_image_sources(dims, src, order)
        for n in range(order + 1):
            a, b = ism.positions[ism.orders == n], lat_p[lat_o == n]
            if len(a) != len(b):
                counts_ok = False
                continue
            a, b = a[np.lexsort(a.T[::-1])], b[np.lexsort(b.T[::-1])]
            worst = max(worst, float(np.abs(a - b).max()))
    dt = time.perf_counter() - t0
    ok = counts_ok and worst < 1e-9 and dt < 10
    record(2, ok, f"orders 0-4 counts equal={counts_ok} max position error={worst:.1e} m "
                  f"({dt:.2f} s)")


def test_criterion_03_rir_roundtrip():
    t0 = time.perf_counter()
    fs = 44100
    rng = np.random.default_rng(0)
    t = np.arange(int(1.5 * fs)) / fs
    h = rng.standard_normal(t.size) * np.exp(-t / 0.1)
    h[: int(0.005 * fs)] = 0.0
    rt_exp = rt60_schroeder(RIR(h, fs, t_direct=0.005))
    ok = abs(rt_exp - 0.691) <= 0.010
    parts = [f"exp tau=100 ms RT60={rt_exp * 1e3:.1f} ms"]
    n = int(1.2 * fs)
    for alpha in (0.1, 0.5):
        room = lab_room(alpha)
        rec = lab_receiver(room)
        for az in (0.0, 60.0):
            rt, drr = lab_tail_targets(alpha, az)
            src = pose_at(rec, (0, 1, 0), az, 5.0)
            full = hybrid_rir(room, src, rec, fs=fs, rt60=rt, drr_db=drr, n_samples=n)
            early = hybrid_rir(room, src, rec, fs=fs, rt60=rt, drr_db=np.inf, n_samples=n)
            rt_tail = rt60_schroeder(RIR(full.data - early.data, fs))
            rt_full = rt60_schroeder(full)
            d = direct_to_reverberant(full)
            ok &= abs(rt_tail - rt) <= 0.05 * rt and abs(d - drr) <= 2.0
            parts.append(f"a={alpha} az={az:g}: tail RT60={rt_tail * 1e3:.0f} ms "
                         f"(full {rt_full * 1e3:.0f}, target {rt * 1e3:.0f}) "
                         f"DRR={d:+.1f} dB (target {drr:+.1f})")
    dt = time.perf_counter() - t0
    ok &= dt < 60
    record(3, ok, "; ".join(parts) + f" ({dt:.1f} s)")


def test_criterion_04_frontal_trend(exp1):
    rows, dt = exp1
    ok, parts = dt < 300, []
    for alpha in (0.1, 0.5):
        b = _benefits(rows, "fast", alpha=alpha, azimuth_deg=0.0)
        drop = b[45.0] - b[15.0]
        plateau = abs(b[150.0] - b[500.0])
        ok &= drop >= 4.0 and plateau <= 1.5
        parts.append(f"a={alpha}: b45-b15={drop:.2f} dB |b150-b500|={plateau:.2f} dB")
    record(4, ok, "; ".join(parts) + f" (exp 1 run {dt:.0f} s)")


def test_criterion_05_lateral_flatness(exp1):
    rows, dt = exp1
    ok, parts = dt < 300, []
    for alpha in (0.1, 0.5):
        b = np.array(list(_benefits(rows, "fast", alpha=alpha, azimuth_deg=60.0).values()))
        rng = float(b.max() - b.min())
        ok &= rng <= 3.0
        parts.append(f"a={alpha} 60 deg range={rng:.2f} dB")
    for alpha in (0.1, 0.5):
        lat = _benefits(rows, "fast", alpha=alpha, azimuth_deg=60.0)[15.0]
        front = _benefits(rows, "fast", alpha=alpha, azimuth_deg=0.0)[15.0]
        ok &= abs((lat - front) - 15.0) <= 5.0
        parts.append(f"a={alpha} direct-only 60-0 deg={lat - front:.2f} dB")
    record(5, ok, "; ".join(parts))


def test_criterion_06_fast_slow_separation(exp2):
    rows, dt = exp2
    fast = _benefits(rows, "fast", alpha=0.1)
    slow = _benefits(rows, "slow", alpha=0.1)
    ok, parts = dt < 300, []
    for t in (150.0, 250.0, 500.0):
        d = fast[t] - slow[t]
        ok &= d >= 2.0
        parts.append(f"cut{t:g} fast-slow={d:+.2f} dB")
    late = fast[250.0] - fast[500.0]
    ok &= late >= 2.0
    parts.append(f"fast cut250 - direct-only={late:+.2f} dB")
    record(6, ok, "; ".join(parts) + f" (exp 2 run {dt:.0f} s)")


def test_criterion_07_ic(exp1):
    t0 = time.perf_counter()
    rows, _ = exp1
    ic = {r.t_ms: r.mean_ic for r in rows
          if r.variant == "fast" and r.alpha == 0.1 and r.azimuth_deg == 0.0}
    early = [ic[t] for t in (15.0, 20.0, 45.0, 75.0)]
    late = [ic[t] for t in (75.0, 150.0, 250.0, 500.0)]
    spread = max(late) - min(late)
    tgt, _, _ = condition_signals(ConditionSpec(1, 0.1, 0.0, "truncate", 15.0))
    vals, _, valid = ic_timeseries(tgt)
    anechoic = float(vals[valid].min())
    dt = time.perf_counter() - t0
    ok = bool(np.all(np.diff(early) < 0)) and spread <= 0.05 and anechoic >= 0.99 and dt < 120
    record(7, ok, "IC 15/20/45/75 ms=" + "/".join(f"{v:.3f}" for v in early)
           + f"; 75-500 ms spread={spread:.3f}; anechoic min IC={anechoic:.4f}")


def test_criterion_08_literature_trends():
    t0 = time.perf_counter()
    braasch = replicate_braasch()
    zurek = replicate_zurek()
    ok, parts = True, []
    for v in ("fast", "slow"):
        th = [r.threshold_db for r in braasch if r.variant == v]
        ok &= bool(np.all(np.diff(th) < 0))
        parts.append(f"Braasch {v} thresholds 0/2/20 deg=" + "/".join(f"{x:.2f}" for x in th))
    data_path = os.environ.get(BRAASCH_DATA_ENV)
    if data_path:
        ev = rmse_against(braasch, read_results_csv(data_path))
        ok &= ev["fast"].rmse <= ev["slow"].rmse
        parts.append(f"RMSE fast={ev['fast'].rmse:.2f} slow={ev['slow'].rmse:.2f} dB")
    else:
        parts.append(f"RMSE comparison not run (set {BRAASCH_DATA_ENV} to a digitized CSV)")
    zb = [r.benefit_db for r in zurek if r.variant == "fast"]
    ok &= bool(np.all(np.diff(zb) < 0))
    parts.append("Zurek fast benefit by alpha=" + "/".join(f"{x:.2f}" for x in zb))
    dt = time.perf_counter() - t0
    ok &= dt < 600
    record(8, ok, "; ".join(parts) + f" ({dt:.0f} s)")


def _track_ok(res, cfg):
    tr = res.trials
    run = 0
    for prev, nxt in zip(tr, tr[1:]):
        if not prev.correct:
            if nxt.level <= prev.level:
                return False
            run = 0
            continue
        run += 1
        if run == cfg.n_down:
            if nxt.level >= prev.level:
                return False
            run = 0
        elif nxt.level != prev.level:
            return False
    n_rev = np.cumsum([t.reversal for t in tr])
    expect = np.array([cfg.step_for(n) for n in n_rev])
    final = res.reversal_levels[cfg.step_change_reversals[-1]:]
    return (np.array_equal(expect, [t.step for t in tr]) and res.converged
            and len(final) == cfg.final_reversals
            and np.isclose(res.threshold, np.mean(final[-cfg.n_average:])))


def test_criterion_09_staircase():
    t0 = time.perf_counter()
    cfg = StaircaseConfig()
    tracks = run_tracks(1000, 40.0, 2.0, cfg, seed=2024)
    mean = float(np.mean([r.threshold for r in tracks]))
    n_bad = sum(not _track_ok(r, cfg) for r in tracks)
    dt = time.perf_counter() - t0
    ok = abs(mean - 40.0) <= 1.0 and n_bad == 0 and dt < 30
    record(9, ok, f"1000 tracks mean threshold={mean:.2f} dB, rule violations={n_bad} "
                  f"({dt:.1f} s)")


CLI_COMMANDS = [
    ["rir", "--room", "lab", "--alpha", "0.5", "--src-az", "60", "--cut", "45"],
    ["stimuli", "--kind", "uen", "--seed", "3"],
    ["render", "--room", "zurek", "--alpha", "0.3", "--signal", "{out}/stimulus.wav"],
    ["staircase", "--n-tracks", "50"],
    ["experiment", "--exp", "2", "--variant", "fast", "--jobs", str(JOBS)],
]


def _cli(out, args):
    cmd = [sys.executable, "-m", "bmldroom.cli", "--out", str(out)] + args
    return subprocess.run(cmd, capture_output=True, text=True)


def test_criterion_10_determinism(tmp_path):
    snaps = []
    for rep in ("a", "b"):
        out = tmp_path / rep
        for args in CLI_COMMANDS:
            r = _cli(out, [a.format(out=out) for a in args])
            assert r.returncode == 0, r.stderr
        ears = out / "brir_signal.wav"
        r = _cli(out, ["predict", "--target", str(ears), "--masker", str(ears),
                       "--matrices"])
        assert r.returncode == 0, r.stderr
        snaps.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    same = snaps[0] == snaps[1]
    record(10, same, f"{len(CLI_COMMANDS) + 1} commands rerun, {len(snaps[0])} artifacts "
                     f"byte-identical={same}")


def test_criterion_11_property_suites():
    t0 = time.perf_counter()
    r = subprocess.run([sys.executable, "-m", "pytest", "-q", "-m", "property",
                        "-p", "no:cacheprovider", str(ROOT / "tests")],
                       capture_output=True, text=True, cwd=ROOT)
    summary = r.stdout.strip().splitlines()[-1] if r.stdout.strip() else r.stderr[-200:]
    dt = time.perf_counter() - t0
    record(11, r.returncode == 0, f"pytest -m property: {summary} ({dt:.0f} s)")
