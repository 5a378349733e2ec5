"""Command-line interface.

Every command writes into an output root (``--out``, else the
``BMLDROOM_OUT`` environment variable, else ``./bmldroom_out``).  Artifacts
carry the tool version, a hash of the command's configuration and the seed;
rerunning a command with the same configuration rewrites identical bytes.

Exit codes: 0 success, 2 configuration error, 3 numeric or convergence error.
"""
import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .binaural import HeadModel, hybrid_brir
from .errors import (BmldroomError, ContractError, GeometryError, InsufficientDecayError,
                     NoValidFrameError)
from .experiments import (FACING, BraaschConfig, ZurekConfig, build_conditions,
                          ic_timeseries, read_results_csv, replicate_braasch, replicate_zurek,
                          run_conditions, write_results_csv)
from .io import file_digest, load_rir, provenance, read_json, read_wav, save_rir, write_json, write_wav
from .model import ModelConfig, VARIANTS, evaluate, predict
from .rir import (analyze_rir, direct_to_reverberant, hybrid_rir, manipulate_rir,
                  lab_tail_targets)
from .room import lab_receiver, lab_room, pose_at, shoebox
from .staircase import StaircaseConfig, run_tracks
from .stimuli import (HctSpec, NoiseSpec, Signal, band_noise, spatialize, synth_hct,
                      synth_uen)

OUT_ENV = "BMLDROOM_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
ROOMS = ("lab", "braasch", "zurek")
DEFAULT_DISTANCE = {"lab": 5.0, "braasch": 2.0, "zurek": 1.0}
_NOT_CONFIG = ("command", "out", "config", "jobs", "func", "name")
_INPUT_FILES = ("signal", "target", "masker", "pred", "data", "rir")


class ConfigError(Exception):
    pass


def _config_of(args):
    """Hashable configuration; input files enter by content, not by path."""
    cfg = {}
    for k, v in sorted(vars(args).items()):
        if k in _NOT_CONFIG:
            continue
        cfg[k] = file_digest(v) if k in _INPUT_FILES and v is not None else v
    return cfg


def _outdir(args):
    d = Path(args.out or os.environ.get(OUT_ENV) or "bmldroom_out")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _fmt_db(x):
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return f"{x:+.2f}"


def _room_setup(name, alpha):
    """(room, receiver, facing) of a built-in room."""
    if name == "lab":
        return lab_room(alpha), lab_receiver(), np.array(FACING)
    if name == "braasch":
        c = BraaschConfig()
        return shoebox(*c.dims, alpha), np.array(c.receiver), np.array(c.facing)
    if name == "zurek":
        c = ZurekConfig()
        return shoebox(*c.dims, alpha), np.array(c.receiver), np.array(c.facing)
    raise ConfigError(f"unknown room {name!r}")


def _tail_targets(args):
    if args.room == "lab":
        return lab_tail_targets(args.alpha, args.src_az) or (None, None)
    return None, None


def _source(args, receiver, facing):
    dist = args.distance if args.distance is not None else DEFAULT_DISTANCE[args.room]
    return pose_at(receiver, facing, args.src_az, dist)


def _manipulate(rir, args):
    if args.truncate is not None:
        return manipulate_rir(rir, "truncate", args.truncate)
    if args.cut is not None:
        return manipulate_rir(rir, "cut", args.cut)
    return rir


def _rir_summary(rir):
    drr = direct_to_reverberant(rir)
    try:
        rt = analyze_rir(rir).rt60
    except InsufficientDecayError:
        rt = float("nan")
    return rt, drr


def _response_info(args, room, source, receiver):
    return {"room": args.room, "alpha": args.alpha, "source": source, "receiver": receiver,
            "max_order": args.max_order}


def cmd_rir(args):
    room, receiver, facing = _room_setup(args.room, args.alpha)
    src = _source(args, receiver, facing)
    rt60, drr = _tail_targets(args)
    rir = hybrid_rir(room, src, receiver, fs=args.fs, max_order=args.max_order, rt60=rt60,
                     drr_db=drr, seed=args.seed, n_samples=int(round(args.length * args.fs)))
    rir = _manipulate(rir, args)
    rt, d = _rir_summary(rir)
    info = _response_info(args, room, src, receiver)
    info.update(provenance(_config_of(args), args.seed), rt60_s=rt, drr_db=d)
    path = _outdir(args) / f"{args.name}.wav"
    save_rir(rir, path, info)
    print(f"{path}: RT60 {rt * 1e3:.1f} ms  DRR {_fmt_db(d)} dB")
    return EXIT_OK


def cmd_render(args):
    room, receiver, facing = _room_setup(args.room, args.alpha)
    src = _source(args, receiver, facing)
    head = HeadModel(receiver, facing)
    rt60, drr = _tail_targets(args)
    brir = hybrid_brir(room, src, head, fs=args.fs, max_order=args.max_order, rt60=rt60,
                       drr_db=drr, seed=args.seed, n_samples=int(round(args.length * args.fs)))
    brir = _manipulate(brir, args)
    rt, d = _rir_summary(brir)
    info = _response_info(args, room, src, receiver)
    info.update(provenance(_config_of(args), args.seed), facing=facing, rt60_s=rt, drr_db=d)
    out = _outdir(args)
    save_rir(brir, out / f"{args.name}.wav", info)
    print(f"{out / (args.name + '.wav')}: RT60 {rt * 1e3:.1f} ms  DRR {_fmt_db(d)} dB")
    if args.signal:
        x, fs = read_wav(args.signal)
        if x.shape[0] != 1:
            raise ConfigError("--signal must be a mono WAV")
        y = spatialize(Signal(x, fs), brir)
        write_wav(out / f"{args.name}_signal.wav", y.data, fs)
        write_json(out / f"{args.name}_signal.json",
                   dict(provenance(_config_of(args), args.seed),
                        source_signal=file_digest(args.signal)))
    return EXIT_OK


def cmd_stimuli(args):
    if args.kind == "hct":
        sig = synth_hct(HctSpec(level_db=args.level, random_phase=args.random_phase,
                                seed=args.seed), args.fs)
    elif args.kind == "uen":
        sig = synth_uen(NoiseSpec(f_lo=args.f_lo, f_hi=args.f_hi, duration=args.duration,
                                  level_db=args.level, seed=args.seed, fs=args.fs))
    else:
        sig = band_noise(args.f_lo, args.f_hi, args.duration, args.fs, seed=args.seed,
                         level_db=args.level)
    path = _outdir(args) / f"{args.name}.wav"
    write_wav(path, sig.data, sig.fs)
    write_json(path.with_suffix(".json"),
               dict(provenance(_config_of(args), args.seed), kind=args.kind, fs=sig.fs,
                    level_db=args.level, cal_db=sig.cal_db, n_samples=sig.n_samples))
    print(f"{path}: {sig.duration * 1e3:.1f} ms at {args.level:g} dB")
    return EXIT_OK


def _variants(v):
    return VARIANTS if v == "both" else (v,)


def cmd_predict(args):
    t, fs_t = read_wav(args.target)
    m, fs_m = read_wav(args.masker)
    if fs_t != fs_m:
        raise ConfigError("target and masker sample rates differ")
    out = _outdir(args)
    result = {}
    for v in _variants(args.variant):
        p = predict(Signal(t, fs_t), Signal(m, fs_m), ModelConfig(variant=v),
                    window=tuple(args.window) if args.window else None)
        result[v] = p.summary()
        if args.matrices:
            p.to_csv(out / f"{args.name}_{v}.csv")
        print(f"{v}: benefit {p.benefit:.2f} dB")
    result.update(provenance(_config_of(args), None))
    write_json(out / f"{args.name}.json", result)
    return EXIT_OK


def cmd_experiment(args):
    variants = _variants(args.variant)
    if args.exp in ("1", "2"):
        conds = build_conditions(int(args.exp), seed=args.seed)
        rows = run_conditions(conds, variants, jobs=args.jobs)
    elif args.exp == "braasch":
        rows = replicate_braasch(BraaschConfig(seed=args.seed, variants=variants))
    else:
        rows = replicate_zurek(ZurekConfig(seed=args.seed, variants=variants))
    prov = provenance(_config_of(args), args.seed)
    path = _outdir(args) / f"{args.name or 'exp' + args.exp}.csv"
    write_results_csv(rows, path, header_comment=" ".join(f"{k}={prov[k]}" for k in sorted(prov)))
    write_json(path.with_suffix(".json"), dict(prov, experiment=args.exp, variants=variants,
                                               rows=len(rows)))
    print(f"{path}: {len(rows)} rows")
    return EXIT_OK


def _key_of(row, keys):
    out = []
    for k in keys:
        v = row.get(k)
        if v is None:
            raise ConfigError(f"column {k!r} missing")
        try:
            v = f"{float(v):g}"
        except ValueError:
            pass
        out.append(v)
    return tuple(out)


def cmd_evaluate(args):
    keys = tuple(k.strip() for k in args.key.split(","))
    pred = read_results_csv(args.pred)
    data = read_results_csv(args.data)
    measured = {}
    for d in data:
        measured[_key_of(d, keys)] = float(d["threshold_db"])
    metrics = {}
    status = EXIT_OK
    for v in sorted({r["variant"] for r in pred}):
        by_key = {_key_of(r, keys): float(r["threshold_db"]) for r in pred if r["variant"] == v}
        missing = sorted(k for k in measured if k not in by_key)
        if missing:
            for k in missing:
                print(f"unmatched key ({v}): {','.join(k)}", file=sys.stderr)
            status = EXIT_CONFIG
            continue
        common = sorted(measured)
        if len(common) < 2:
            raise ConfigError("fewer than two matched rows")
        ev = evaluate([by_key[k] for k in common], [measured[k] for k in common])
        metrics[v] = ev.to_dict()
        print(f"{v}: RMSE {ev.rmse:.2f} dB  rho {ev.pearson:.2f}  offset {ev.offset:+.2f} dB"
              f"  n={ev.n}")
    if status != EXIT_OK:
        return status
    metrics.update(provenance(_config_of(args), None))
    write_json(_outdir(args) / f"{args.name}.json", metrics)
    return EXIT_OK


def cmd_analyze(args):
    rir, side = load_rir(args.rir)
    if rir.t_direct is None:
        rir.t_direct = float(np.argmax(np.max(np.abs(rir.data), axis=0)) / rir.fs)
    rt, drr = _rir_summary(rir)
    result = {"rir": Path(args.rir).name, "rt60_s": rt, "drr_db": drr, "t_direct": rir.t_direct,
              "manipulations": rir.manipulations}
    if args.signal:
        x, fs = read_wav(args.signal)
        ic, t, ok = ic_timeseries(Signal(x, fs))
        result["mean_ic"] = float(np.mean(ic[ok])) if ok.any() else float("nan")
    result.update(provenance(_config_of(args), side.get("seed")))
    write_json(_outdir(args) / f"{args.name}.json", result)
    print(f"RT60 {rt * 1e3:.1f} ms  DRR {_fmt_db(drr)} dB")
    return EXIT_OK


def cmd_staircase(args):
    cfg = StaircaseConfig(max_trials=args.max_trials)
    tracks = run_tracks(args.n_tracks, args.threshold, args.slope, cfg, seed=args.seed)
    th = np.array([t.threshold for t in tracks])
    out = _outdir(args)
    with open(out / f"{args.name}.csv", "w") as fh:
        fh.write("track,threshold_db,trials,converged\n")
        for i, t in enumerate(tracks):
            fh.write(f"{i},{t.threshold:.6f},{len(t.trials)},{int(t.converged)}\n")
    write_json(out / f"{args.name}.json",
               dict(provenance(_config_of(args), args.seed), mean_threshold_db=float(th.mean()),
                    sd_threshold_db=float(th.std()), n_tracks=len(tracks)))
    print(f"mean threshold {th.mean():.2f} dB over {len(tracks)} tracks")
    return EXIT_OK


def _response_args(p):
    p.add_argument("--room", choices=ROOMS, default="lab")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--src-az", type=float, default=0.0, help="source azimuth (deg, + right)")
    p.add_argument("--distance", type=float, default=None)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--truncate", type=float, default=None, metavar="MS")
    g.add_argument("--cut", type=float, default=None, metavar="MS")
    p.add_argument("--fs", type=int, default=44100)
    p.add_argument("--max-order", type=int, default=8)
    p.add_argument("--length", type=float, default=0.5, help="response length (s)")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="bmldroom", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--out", default=None, help=f"output root (default ${OUT_ENV})")
    parser.add_argument("--config", default=None,
                        help="JSON file with default values for the command's options")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rir", help="omnidirectional room response")
    _response_args(p)
    p.add_argument("--name", default="rir")
    p.set_defaults(func=cmd_rir)

    p = sub.add_parser("render", help="binaural room response, optionally applied to a signal")
    _response_args(p)
    p.add_argument("--signal", default=None, help="mono WAV to convolve")
    p.add_argument("--name", default="brir")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("stimuli", help="synthesize a target or masker")
    p.add_argument("--kind", choices=("hct", "uen", "band"), default="hct")
    p.add_argument("--level", type=float, default=60.0)
    p.add_argument("--f-lo", type=float, default=250.0)
    p.add_argument("--f-hi", type=float, default=750.0)
    p.add_argument("--duration", type=float, default=0.9)
    p.add_argument("--random-phase", action="store_true")
    p.add_argument("--fs", type=int, default=44100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="stimulus")
    p.set_defaults(func=cmd_stimuli)

    p = sub.add_parser("predict", help="binaural benefit of a target in a masker")
    p.add_argument("--target", required=True)
    p.add_argument("--masker", required=True)
    p.add_argument("--variant", choices=VARIANTS + ("both",), default="both")
    p.add_argument("--window", type=float, nargs=2, default=None, metavar=("START", "STOP"))
    p.add_argument("--matrices", action="store_true", help="also write per band x frame CSVs")
    p.add_argument("--name", default="prediction")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("experiment", help="run a condition matrix or a replication")
    p.add_argument("--exp", choices=("1", "2", "braasch", "zurek"), required=True)
    p.add_argument("--variant", choices=VARIANTS + ("both",), default="both")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("evaluate", help="offset, RMSE and Pearson against measured thresholds")
    p.add_argument("--pred", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--key", default="condition_id", help="comma-separated join columns")
    p.add_argument("--name", default="evaluation")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="RT60 and DRR of a stored response")
    p.add_argument("--rir", required=True)
    p.add_argument("--signal", default=None, help="binaural WAV for the mean 500 Hz IC")
    p.add_argument("--name", default="analysis")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("staircase", help="simulated adaptive tracks")
    p.add_argument("--n-tracks", type=int, default=1000)
    p.add_argument("--threshold", type=float, default=40.0)
    p.add_argument("--slope", type=float, default=2.0)
    p.add_argument("--max-trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="staircase")
    p.set_defaults(func=cmd_staircase)
    return parser


def _parse(parser, argv):
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_json(args.config)
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def main(argv=None):
    parser = build_parser()
    try:
        args = _parse(parser, argv)
        return args.func(args)
    except (InsufficientDecayError, NoValidFrameError, ContractError, FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, GeometryError, ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except BmldroomError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
