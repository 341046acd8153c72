"""Evaluation harness: decoding curves, bandpass sweeps, and the one-sided
paired Wilcoxon signed-rank test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from . import cca as cca_mod
from . import umm as umm_mod
from .cca import CcaDecoder, CcaState
from .codegen import BitSequence
from .encoding import StructureMatrix, structure_for_code
from .errors import ConfigError, DegenerateSample, InvalidCutoff
from .sigproc import ContinuousRecording, FilterSpec, Trial, apply_zero_phase
from .simulate import CYCLE_S, Session
from .umm import UmmDecoder, UmmState

METHOD_TAGS = ("cca_e1", "cca_ec", "umm_t11", "umm_tcw")

ALPHA = 0.025

#: 1.05 s (half a cycle) to 10.5 s in 1.05 s steps, then to 31.5 s in 2.1 s steps
DEFAULT_DURATIONS_S = tuple(
    round(1.05 * k, 2) for k in range(1, 11)
) + tuple(round(10.5 + 2.1 * k, 2) for k in range(1, 11))

DEFAULT_HIGHPASS_GRID = (0.1, 0.5, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0)
DEFAULT_LOWPASS_GRID = tuple(float(f) for f in range(10, 100, 10))
SWEEP_FIXED_LOWPASS = 40.0
SWEEP_FIXED_HIGHPASS = 6.0


def canonical_tag(tag: str) -> str:
    t = tag.strip().lower()
    if t not in METHOD_TAGS:
        raise ConfigError(f"unknown method tag {tag!r}; expected one of {METHOD_TAGS}")
    return t


class DecoderBank:
    """Caches per-duration CCA decoders (the structure grams are the
    expensive part) and the UMM decoder for one code set."""

    def __init__(self, codes: list[BitSequence], max_dur_s: float = 31.5, gamma=None):
        self.codes = codes
        n_cycles = max(1, math.ceil(max_dur_s / CYCLE_S))
        self.structures = [structure_for_code(c, n_cycles) for c in codes]
        self.gamma = gamma
        self._cca_cache: dict[int, CcaDecoder] = {}
        self._umm = UmmDecoder(codes, n_cycles, gamma=gamma)

    def cca(self, n_samples: int) -> CcaDecoder:
        if n_samples not in self._cca_cache:
            self._cca_cache[n_samples] = CcaDecoder(self.structures, n_samples)
        return self._cca_cache[n_samples]

    def umm(self) -> UmmDecoder:
        return self._umm


def decode_session(
    session: Session,
    method_tag: str,
    duration_s: float,
    bank: DecoderBank | None = None,
) -> list:
    """Decode every trial of the session at one duration, in session order,
    with one cumulative state update per trial. Returns the outcomes."""
    tag = canonical_tag(method_tag)
    if bank is None:
        bank = DecoderBank(session.codes)
    n_samples = int(round(duration_s * session.fs))
    outcomes = []
    if tag.startswith("cca"):
        decoder = bank.cca(n_samples)
        state = CcaState(mode=cca_mod.MODE_CUMULATIVE) if tag == "cca_ec" else None
        for trial in session.trials:
            outcome = decoder.decode(trial, state)
            outcomes.append(outcome)
            if state is not None:
                state = decoder.update_cumulative(state, trial, outcome.label)
    else:
        decoder = bank.umm()
        state = UmmState(mode=umm_mod.MODE_CUMULATIVE) if tag == "umm_tcw" else None
        for trial in session.trials:
            ep = umm_mod.slice_epochs(trial.prefix(duration_s))
            outcome = decoder.decode_epochs(ep, state)
            outcomes.append(outcome)
            if state is not None:
                state = decoder.update_cumulative(state, ep, outcome)
    return outcomes


def accuracy_of(outcomes, trials) -> tuple[int, float]:
    correct = sum(
        1 for o, t in zip(outcomes, trials) if o.label == t.code_index_true
    )
    return correct, correct / len(trials)


@dataclass
class DecodingCurve:
    """Accuracy as a function of per-trial data duration for one method."""

    method_tag: str
    durations_s: tuple[float, ...]
    n_trials: int
    n_correct: list[int] = field(default_factory=list)

    @property
    def accuracy(self) -> NDArray:
        return np.array(self.n_correct) / self.n_trials


def decoding_curve(
    session: Session,
    method_tag: str,
    durations_s: Iterable[float] | None = None,
    bank: DecoderBank | None = None,
) -> DecodingCurve:
    """Per-duration accuracy; cumulative state is reset between durations so
    every point is an independent operating condition."""
    tag = canonical_tag(method_tag)
    durations = tuple(durations_s) if durations_s is not None else DEFAULT_DURATIONS_S
    if bank is None:
        bank = DecoderBank(session.codes, max_dur_s=max(durations))
    curve = DecodingCurve(method_tag=tag, durations_s=durations, n_trials=session.n_trials)
    for dur in durations:
        outcomes = decode_session(session, tag, dur, bank)
        n_correct, _ = accuracy_of(outcomes, session.trials)
        curve.n_correct.append(n_correct)
    return curve


# -- Wilcoxon signed-rank ----------------------------------------------------

EXACT_MAX_N = 20


def _signed_ranks(a, b):
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if len(np.asarray(a)) != len(np.asarray(b)):
        raise ValueError("paired samples must have equal length")
    d = d[d != 0.0]
    if len(d) == 0:
        raise DegenerateSample("all paired differences are zero")
    ranks = stats.rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    return d, ranks, w_plus


def _exact_tail_p(ranks: NDArray, w_obs: float) -> float:
    """P(W+ >= w_obs) under uniform random signs, by convolution over the
    realized rank multiset (average ranks doubled to stay integral)."""
    r2 = np.round(2 * ranks).astype(int)
    total = int(r2.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in r2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total - r + 1]
        counts += shifted
    w2 = int(round(2 * w_obs))
    return float(counts[w2:].sum() / 2 ** len(ranks))


def _normal_tail_p(d: NDArray, ranks: NDArray, w_plus: float) -> float:
    n = len(d)
    mu = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(((tie_counts**3 - tie_counts).sum())) / 48.0
    z = (w_plus - mu - 0.5) / math.sqrt(var)
    return float(stats.norm.sf(z))


def wilcoxon_one_sided(a, b) -> tuple[float, float]:
    """Paired signed-rank test of H1: a > b.

    Zero differences are dropped; the null is exact sign enumeration for
    n <= 20 and a tie-corrected, continuity-corrected normal approximation
    beyond. Returns (W+, p).
    """
    d, ranks, w_plus = _signed_ranks(a, b)
    if len(d) <= EXACT_MAX_N:
        p = _exact_tail_p(ranks, w_plus)
    else:
        p = _normal_tail_p(d, ranks, w_plus)
    return w_plus, p


# -- bandpass sweep ----------------------------------------------------------

@dataclass
class SweepGrid:
    axis: str
    cutoffs_hz: tuple[float, ...]
    n_trials: int
    n_correct: dict[str, list[int]] = field(default_factory=dict)

    def accuracy(self, method_tag: str) -> NDArray:
        return np.array(self.n_correct[method_tag]) / self.n_trials


def filtered_session(session: Session, highpass_hz: float, lowpass_hz: float) -> Session:
    """Re-filter every trial of an archived session with a zero-phase
    bandpass at its native rate.

    A lowpass at the Nyquist frequency is a pass-through (the archived data
    carry no content there); cutoffs beyond Nyquist are rejected.
    """
    nyq = session.fs / 2.0
    if highpass_hz >= nyq or lowpass_hz > nyq:
        raise InvalidCutoff(
            f"cutoffs ({highpass_hz}, {lowpass_hz}) Hz invalid at fs={session.fs} Hz"
        )
    if lowpass_hz == nyq:
        # nothing above Nyquist to remove; keep the highpass edge only
        spec = FilterSpec(kind="bandpass", highpass_hz=highpass_hz, lowpass_hz=nyq * 0.999)
    else:
        spec = FilterSpec(kind="bandpass", highpass_hz=highpass_hz, lowpass_hz=lowpass_hz)
    trials = []
    for trial in session.trials:
        rec = ContinuousRecording(samples=trial.samples, fs=session.fs)
        filtered = apply_zero_phase(spec, rec)
        trials.append(
            Trial(
                samples=filtered.samples,
                fs=trial.fs,
                frame_rate_hz=trial.frame_rate_hz,
                code_index_true=trial.code_index_true,
            )
        )
    return Session(trials=trials, codes=session.codes, fs=session.fs, seed=session.seed)


def bandpass_sweep(
    session_source: Callable[[float, float], Session],
    method_tags: Iterable[str],
    axis: str,
    cutoffs_hz: Iterable[float] | None = None,
    duration_s: float = 31.5,
) -> SweepGrid:
    """Accuracy per cutoff per method at full trial duration.

    The highpass axis keeps the lowpass fixed at 40 Hz; the lowpass axis
    keeps the highpass fixed at 6 Hz. ``session_source(highpass, lowpass)``
    must return the re-preprocessed session for those cutoffs.
    """
    if axis not in ("highpass", "lowpass"):
        raise ConfigError(f"unknown sweep axis {axis!r}")
    if cutoffs_hz is None:
        cutoffs_hz = DEFAULT_HIGHPASS_GRID if axis == "highpass" else DEFAULT_LOWPASS_GRID
    cutoffs = tuple(float(c) for c in cutoffs_hz)
    tags = [canonical_tag(t) for t in method_tags]
    grid = SweepGrid(axis=axis, cutoffs_hz=cutoffs, n_trials=0)
    grid.n_correct = {t: [] for t in tags}
    for cutoff in cutoffs:
        if axis == "highpass":
            session = session_source(cutoff, SWEEP_FIXED_LOWPASS)
        else:
            session = session_source(SWEEP_FIXED_HIGHPASS, cutoff)
        grid.n_trials = session.n_trials
        bank = DecoderBank(session.codes, max_dur_s=duration_s)
        for tag in tags:
            outcomes = decode_session(session, tag, duration_s, bank)
            n_correct, _ = accuracy_of(outcomes, session.trials)
            grid.n_correct[tag].append(n_correct)
    return grid


# -- CSV / JSON emission -----------------------------------------------------

CURVE_CSV_HEADER = "method,duration_s,seed,n_trials,n_correct,accuracy"


def curve_csv_rows(curve: DecodingCurve, seed) -> list[str]:
    rows = []
    for dur, n_corr in zip(curve.durations_s, curve.n_correct):
        acc = n_corr / curve.n_trials
        rows.append(
            f"{curve.method_tag},{dur:g},{seed},{curve.n_trials},{n_corr},{acc:.6f}"
        )
    return rows


SWEEP_CSV_HEADER = "method,axis,cutoff_hz,n_trials,n_correct,accuracy"


def sweep_csv_rows(grid: SweepGrid) -> list[str]:
    rows = []
    for tag, corr in grid.n_correct.items():
        for cutoff, n_corr in zip(grid.cutoffs_hz, corr):
            acc = n_corr / grid.n_trials
            rows.append(
                f"{tag},{grid.axis},{cutoff:g},{grid.n_trials},{n_corr},{acc:.6f}"
            )
    return rows
