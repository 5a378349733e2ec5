"""Transformed up-down staircase with simulated forced-choice observers.

The default track is a three-interval, two-down/one-up staircase starting
at 65 dB with steps of 5, 2 and 1 dB.  The step shrinks after the first and
the fourth reversal; the track stops after 12 reversals at the final step
and the threshold is the mean of the last 10 reversal levels.
"""
from dataclasses import dataclass, field
import csv

import numpy as np

from .errors import ContractError


@dataclass
class StaircaseConfig:
    start_level: float = 65.0
    steps: tuple = (5.0, 2.0, 1.0)
    step_change_reversals: tuple = (1, 4)
    n_down: int = 2
    n_up: int = 1
    alternatives: int = 3
    final_reversals: int = 12
    n_average: int = 10
    max_trials: int = None

    def __post_init__(self):
        self.steps = tuple(float(s) for s in self.steps)
        self.step_change_reversals = tuple(int(r) for r in self.step_change_reversals)
        if any(s <= 0 for s in self.steps) or any(np.diff(self.steps) >= 0):
            raise ValueError("steps must be positive and strictly decreasing")
        if len(self.step_change_reversals) != len(self.steps) - 1:
            raise ValueError("need one step-change reversal per step change")
        if any(r <= 0 for r in self.step_change_reversals) \
                or any(np.diff(self.step_change_reversals) <= 0):
            raise ValueError("step-change reversals must be positive and increasing")
        if self.n_down < 1 or self.n_up != 1:
            raise ValueError("only n-down/one-up rules are supported")
        if self.alternatives < 2:
            raise ValueError("need at least two alternatives")
        if not 0 < self.n_average <= self.final_reversals:
            raise ValueError("n_average must lie in 1..final_reversals")
        if self.max_trials is not None and self.max_trials < 1:
            raise ValueError("max_trials must be positive")

    @property
    def chance(self):
        return 1.0 / self.alternatives

    def step_for(self, n_reversals):
        """Step size after ``n_reversals`` reversals."""
        return self.steps[int(np.searchsorted(self.step_change_reversals, n_reversals,
                                              side="right"))]


def levitt_target(n_down=2, n_up=1):
    """Proportion correct tracked by an n-down/one-up rule: 0.5 ** (1 / n_down)."""
    if n_up != 1 or n_down < 1:
        raise ValueError(f"unsupported rule {n_down}-down/{n_up}-up")
    return 0.5 ** (1.0 / n_down)


class Observer:
    """Forced-choice observer answering correctly with probability ``p_correct(level)``."""

    def __init__(self, p_correct, chance=1.0 / 3.0, seed=0):
        self._p = p_correct
        self.chance = chance
        self.rng = np.random.default_rng(seed)

    def p_correct(self, level):
        p = float(self._p(level))
        if not (self.chance - 1e-12 <= p <= 1.0 + 1e-12):
            raise ContractError(f"p_correct({level}) = {p} outside [{self.chance:.4g}, 1]")
        return p

    def respond(self, level):
        return bool(self.rng.random() < self.p_correct(level))


class LogisticObserver(Observer):
    """Logistic psychometric function with a chance floor.

    ``threshold`` is the level at which p = ``target`` (the two-down/one-up
    convergence point by default); ``slope`` is the logistic scale in dB.
    """

    def __init__(self, threshold=40.0, slope=2.0, chance=1.0 / 3.0, target=None, seed=0):
        target = levitt_target(2) if target is None else target
        if not chance < target < 1:
            raise ValueError("target must lie between chance and 1")
        self.threshold = threshold
        self.slope = slope
        q = (target - chance) / (1.0 - chance)
        self.midpoint = threshold - slope * np.log(q / (1.0 - q))
        super().__init__(self._logistic, chance, seed)

    def _logistic(self, level):
        return self.chance + (1.0 - self.chance) / (1.0 + np.exp(-(level - self.midpoint) / self.slope))


@dataclass
class Trial:
    trial: int
    level: float
    interval: int
    response: int
    correct: bool
    reversal: bool
    step: float


@dataclass
class TrackResult:
    threshold: float
    reversal_levels: list
    trials: list = field(default_factory=list)
    converged: bool = True

    @property
    def levels(self):
        return np.array([t.level for t in self.trials])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "level_db", "interval", "response", "correct", "reversal", "step_db"])
            for t in self.trials:
                w.writerow([t.trial, f"{t.level:.6g}", t.interval, t.response, int(t.correct),
                            int(t.reversal), f"{t.step:.6g}"])


def run_track(observer, cfg=None, seed=None):
    """Run one adaptive track.

    Without ``cfg.max_trials`` a track only ends through reversals, so an
    observer that never errs needs a cap.  The target interval and the
    wrong-answer choice are drawn from ``seed`` (or the observer's
    generator when ``seed`` is None).
    """
    cfg = cfg or StaircaseConfig()
    rng = np.random.default_rng(seed) if seed is not None else observer.rng
    level = cfg.start_level
    n_correct = 0
    direction = 0
    reversals = []
    final_start = cfg.step_change_reversals[-1]
    trials = []
    converged = True
    while len(reversals) - final_start < cfg.final_reversals:
        if cfg.max_trials is not None and len(trials) >= cfg.max_trials:
            converged = False
            break
        interval = int(rng.integers(cfg.alternatives))
        correct = observer.respond(level)
        if correct:
            response = interval
        else:
            response = int((interval + 1 + rng.integers(cfg.alternatives - 1)) % cfg.alternatives)
        move = 0
        if correct:
            n_correct += 1
            if n_correct == cfg.n_down:
                move, n_correct = -1, 0
        else:
            move, n_correct = 1, 0
        reversal = bool(move and direction and move != direction)
        if reversal:
            reversals.append(level)
        if move:
            direction = move
        step = cfg.step_for(len(reversals))
        trials.append(Trial(len(trials) + 1, level, interval + 1, response + 1, correct,
                            reversal, step))
        level += move * step
    tail = reversals[final_start:][-cfg.n_average:]
    if tail:
        threshold = float(np.mean(tail))
    elif reversals:
        threshold = float(np.mean(reversals[-cfg.n_average:]))
    else:  # capped without reversals: the track's last level
        threshold = float(level)
    return TrackResult(threshold, reversals, trials, converged)


def run_tracks(n_tracks, threshold=40.0, slope=2.0, cfg=None, seed=0):
    """Thresholds of ``n_tracks`` logistic-observer tracks with independent seeds."""
    cfg = cfg or StaircaseConfig()
    seeds = np.random.SeedSequence(seed).spawn(n_tracks)
    out = []
    for s in seeds:
        obs = LogisticObserver(threshold, slope, cfg.chance, seed=s)
        out.append(run_track(obs, cfg))
    return out
