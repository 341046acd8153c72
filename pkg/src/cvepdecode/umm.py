"""Unsupervised mean-difference maximization (UMM) decoding.

Trials are sliced into overlapping 300 ms epochs locked to the 60 Hz
stimulus frames. Each candidate code splits the epochs into flash and
non-flash sets; the hypothesis whose flash/non-flash mean difference has
the largest Mahalanobis norm wins. The covariance is estimated with
block-Toeplitz structure, lag tapering, and shrinkage toward a scaled
identity; its inverse is applied through a block-Levinson recursion that
never materializes the dense matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy import linalg

from .codegen import BitSequence
from .errors import (
    DegenerateHypothesis,
    InsufficientEpochs,
    NumericalFailure,
    ShapeError,
    TrialTooShort,
)
from .outcome import DecodeOutcome, top2_confidence
from .sigproc import Trial

EPOCH_LEN = 54        # 300 ms at 180 Hz
SAMPLES_PER_FRAME = 3

MODE_INSTANTANEOUS = "instantaneous"
MODE_CUMULATIVE = "cumulative"


@dataclass(frozen=True)
class EpochSet:
    """Overlapping bit-locked epochs of one trial.

    epochs: (n_epochs, n_features) with time-major feature layout, i.e.
    feature (t * C + c) is channel c at epoch sample t. Only 300 ms
    windows fully contained in the trial are kept.
    onsets: 60 Hz frame index of each epoch.
    """

    epochs: NDArray[np.floating]
    onsets: NDArray[np.int_]
    n_channels: int
    epoch_len: int = EPOCH_LEN

    @property
    def n_epochs(self) -> int:
        return self.epochs.shape[0]

    @property
    def n_features(self) -> int:
        return self.epochs.shape[1]


def slice_epochs(trial: Trial, epoch_len: int = EPOCH_LEN) -> EpochSet:
    """One epoch per 60 Hz frame whose full window fits inside the trial."""
    x = trial.samples
    n_channels, n_samples = x.shape
    if n_samples < epoch_len:
        raise TrialTooShort(
            f"trial of {n_samples} samples cannot hold a {epoch_len}-sample epoch"
        )
    k = (n_samples - epoch_len) // SAMPLES_PER_FRAME + 1
    idx = np.arange(k) * SAMPLES_PER_FRAME
    # (K, epoch_len, C) -> (K, epoch_len * C), time-major
    windows = np.lib.stride_tricks.sliding_window_view(x, epoch_len, axis=1)
    epochs = windows[:, idx, :].transpose(1, 2, 0).reshape(k, epoch_len * n_channels)
    return EpochSet(
        epochs=np.ascontiguousarray(epochs, dtype=np.float64),
        onsets=idx // SAMPLES_PER_FRAME,
        n_channels=n_channels,
        epoch_len=epoch_len,
    )


def _epoch_bits(ep: EpochSet, code: BitSequence, n_cycles: int) -> NDArray[np.int8]:
    tiled = np.tile(code.array, n_cycles)
    if ep.onsets[-1] >= len(tiled):
        raise ShapeError(
            f"code tiled over {n_cycles} cycles covers {len(tiled)} frames, "
            f"epochs extend to frame {ep.onsets[-1]}"
        )
    return tiled[ep.onsets]


def mean_difference(ep: EpochSet, code: BitSequence, n_cycles: int) -> NDArray:
    """Flash-ERP minus non-flash-ERP under the hypothesis that ``code``
    drove the trial."""
    bits = _epoch_bits(ep, code, n_cycles)
    pos = bits == 1
    if not pos.any() or pos.all():
        raise DegenerateHypothesis("hypothesis yields an empty flash or non-flash set")
    return ep.epochs[pos].mean(axis=0) - ep.epochs[~pos].mean(axis=0)


# -- covariance --------------------------------------------------------------

def block_levinson_solve(blocks: NDArray, y: NDArray) -> NDArray:
    """Solve T x = y for symmetric positive-definite block-Toeplitz T.

    blocks: (n_lags, C, C) with T[i, j] = blocks[i - j] and
    B(-l) = B(l)^T. y: (n_lags * C,) or (n_lags * C, m).

    Classic forward/backward Levinson recursion on block vectors; O(n^2)
    block operations instead of the dense O(n^3).
    """
    n, c, _ = blocks.shape
    bpos = blocks
    bneg = blocks.transpose(0, 2, 1)
    squeeze = y.ndim == 1
    y = y.reshape(n, c, -1)
    eye = np.eye(c)

    b0inv = linalg.inv(bpos[0])
    f = b0inv[np.newaxis]            # (k, c, c): T_k f = [I, 0, ..., 0]
    g = b0inv[np.newaxis]            # (k, c, c): T_k g = [0, ..., 0, I]
    x = (b0inv @ y[0])[np.newaxis]
    for k in range(1, n):
        eps_f = np.einsum("jab,jbc->ac", bpos[k:0:-1], f)
        eps_b = np.einsum("jab,jbc->ac", bneg[1 : k + 1], g)
        a = linalg.inv(eye - eps_b @ eps_f)
        ct = linalg.inv(eye - eps_f @ eps_b)
        f_new = np.concatenate([f @ a, np.zeros((1, c, c))])
        f_new[1:] -= g @ (eps_f @ a)
        g_new = np.concatenate([np.zeros((1, c, c)), g @ ct])
        g_new[:-1] -= f @ (eps_b @ ct)
        resid = y[k] - np.einsum("jab,jbm->am", bpos[k:0:-1], x)
        x = np.concatenate([x, np.zeros((1, c, x.shape[2]))]) + g_new @ resid
        f, g = f_new, g_new
    out = x.reshape(n * c, -1)
    return out[:, 0] if squeeze else out


@dataclass(frozen=True)
class CovModel:
    """Regularized block-Toeplitz covariance with a structured solver.

    blocks[l] is the tapered, shrunk C x C cross-channel block at lag l;
    the represented matrix has T[(t1, c1), (t2, c2)] = blocks[t1 - t2]
    under the time-major feature layout of :class:`EpochSet`.
    """

    blocks: NDArray[np.floating]      # (epoch_len, C, C)
    shrinkage_gamma: float
    taper: NDArray[np.floating]       # (epoch_len,)

    @property
    def n_features(self) -> int:
        n, c, _ = self.blocks.shape
        return n * c

    def dense(self) -> NDArray:
        """Materialize the full covariance; for oracles and small problems."""
        n, c, _ = self.blocks.shape
        out = np.zeros((n * c, n * c))
        for i in range(n):
            for j in range(n):
                lag = i - j
                block = self.blocks[lag] if lag >= 0 else self.blocks[-lag].T
                out[i * c : (i + 1) * c, j * c : (j + 1) * c] = block
        return out

    def solve(self, v: NDArray) -> NDArray:
        """Sigma^{-1} v through the block-Levinson recursion."""
        return block_levinson_solve(self.blocks, np.asarray(v, dtype=float))


def _lag_blocks(cov: NDArray, n_lags: int, c: int) -> NDArray:
    """Average the C x C block diagonals of a dense covariance (block
    Toeplitz projection)."""
    blocks = np.empty((n_lags, c, c))
    view = cov.reshape(n_lags, c, n_lags, c)
    for lag in range(n_lags):
        idx = np.arange(n_lags - lag)
        blocks[lag] = view[idx + lag, :, idx, :].mean(axis=0)
    blocks[0] = (blocks[0] + blocks[0].T) / 2.0
    return blocks


def _lw_gamma(sq_norms4: float, cov: NDArray, n: int) -> float:
    """Ledoit-Wolf shrinkage intensity toward mu*I from accumulated
    fourth moments; sq_norms4 = sum over epochs of ||x_k - mean||^4."""
    d = cov.shape[0]
    mu = np.trace(cov) / d
    delta2 = float(np.sum((cov - mu * np.eye(d)) ** 2)) / d
    if delta2 <= 0:
        return 0.0
    beta2 = (sq_norms4 / n**2 - float(np.sum(cov**2)) / n) / d
    return float(np.clip(beta2 / delta2, 0.0, 1.0))


def _regularize(blocks: NDArray, gamma: float, epoch_len: int) -> tuple[NDArray, NDArray]:
    taper = 1.0 - np.arange(epoch_len) / epoch_len
    tapered = blocks * taper[:, np.newaxis, np.newaxis]
    nu = float(np.trace(tapered[0]) / tapered.shape[1])
    out = (1.0 - gamma) * tapered
    out[0] += gamma * nu * np.eye(tapered.shape[1])
    return out, taper


def estimate_covariance(
    ep: EpochSet, gamma: float | None = None, taper_len: int | None = None
) -> CovModel:
    """Tapered block-Toeplitz covariance of the epochs with shrinkage
    toward nu*I (nu = mean diagonal). With ``gamma`` unset, an analytic
    Ledoit-Wolf intensity is used; the epoch count in a single trial is
    small against the feature dimension, so automatic regularization is
    the default.
    """
    if ep.n_epochs < 2:
        raise InsufficientEpochs(f"need at least 2 epochs, got {ep.n_epochs}")
    if taper_len is not None and taper_len != ep.epoch_len:
        raise ShapeError("taper length must match the epoch length")
    centered = ep.epochs - ep.epochs.mean(axis=0)
    cov = centered.T @ centered / ep.n_epochs
    if gamma is None:
        gamma = _lw_gamma(float(np.sum(np.sum(centered**2, axis=1) ** 2)), cov, ep.n_epochs)
    blocks = _lag_blocks(cov, ep.epoch_len, ep.n_channels)
    reg_blocks, taper = _regularize(blocks, gamma, ep.epoch_len)
    return CovModel(blocks=reg_blocks, shrinkage_gamma=gamma, taper=taper)


def score_hypotheses(deltas: NDArray, cov: CovModel) -> DecodeOutcome:
    """Mahalanobis energy of each hypothesis' mean difference."""
    deltas = np.atleast_2d(np.asarray(deltas, dtype=float))
    sol = cov.solve(deltas.T)                      # (D, N)
    scores = np.einsum("nd,dn->n", deltas, sol)
    if not np.all(np.isfinite(scores)):
        raise NumericalFailure("non-finite Mahalanobis scores")
    label = int(np.argmax(scores))
    return DecodeOutcome(label=label, scores=scores, confidence=top2_confidence(scores))


# -- state / cumulative learning --------------------------------------------

@dataclass
class UmmState:
    """Pooled covariance statistics (label-free) plus confidence-weighted
    flash/non-flash ERP sums under naive labeling.

    The ERP estimates are global: each finished trial contributes its
    flash and non-flash epoch means, split by its own predicted code,
    weighted by the decoder's confidence in that prediction.
    """

    mode: str = MODE_INSTANTANEOUS
    scatter: NDArray | None = None          # sum of per-trial centered scatter, (D, D)
    sq_norms4: float = 0.0                  # sum of ||x_k - trial mean||^4
    n_epochs: int = 0
    flash_sum: NDArray | None = None        # (D,), confidence-weighted
    nonflash_sum: NDArray | None = None     # (D,)
    weight_total: float = 0.0
    n_trials_seen: int = 0

    def is_empty(self) -> bool:
        return self.n_trials_seen == 0


class UmmDecoder:
    """UMM decoding against a fixed code set.

    Epoch labels per hypothesis are looked up from the codes tiled over
    enough cycles to cover the longest trial.
    """

    def __init__(self, codes: list[BitSequence], n_cycles: int, gamma: float | None = None):
        self.codes = codes
        self.n_cycles = n_cycles
        self.gamma = gamma

    @property
    def n_hypotheses(self) -> int:
        return len(self.codes)

    def _deltas(self, ep: EpochSet, state: UmmState | None) -> NDArray:
        deltas = np.empty((self.n_hypotheses, ep.n_features))
        cumulative = (
            state is not None
            and state.mode == MODE_CUMULATIVE
            and not state.is_empty()
        )
        for i, code in enumerate(self.codes):
            bits = _epoch_bits(ep, code, self.n_cycles)
            pos = bits == 1
            if not pos.any() or pos.all():
                raise DegenerateHypothesis(
                    f"hypothesis {i} yields an empty flash or non-flash set"
                )
            mu_pos = ep.epochs[pos].mean(axis=0)
            mu_neg = ep.epochs[~pos].mean(axis=0)
            if cumulative and state.weight_total > 0:
                w = state.weight_total
                mu_pos = (state.flash_sum + mu_pos) / (w + 1.0)
                mu_neg = (state.nonflash_sum + mu_neg) / (w + 1.0)
            deltas[i] = mu_pos - mu_neg
        return deltas

    def _covariance(self, ep: EpochSet, state: UmmState | None) -> CovModel:
        centered = ep.epochs - ep.epochs.mean(axis=0)
        scatter = centered.T @ centered
        sq4 = float(np.sum(np.sum(centered**2, axis=1) ** 2))
        n = ep.n_epochs
        if (
            state is not None
            and state.mode == MODE_CUMULATIVE
            and not state.is_empty()
        ):
            if state.scatter.shape[0] != ep.n_features:
                raise ShapeError("accumulated covariance has a different feature count")
            scatter = scatter + state.scatter
            sq4 += state.sq_norms4
            n += state.n_epochs
        if n < 2:
            raise InsufficientEpochs("pooled epoch count below 2")
        cov = scatter / n
        gamma = self.gamma if self.gamma is not None else _lw_gamma(sq4, cov, n)
        blocks = _lag_blocks(cov, ep.epoch_len, ep.n_channels)
        reg_blocks, taper = _regularize(blocks, gamma, ep.epoch_len)
        return CovModel(blocks=reg_blocks, shrinkage_gamma=gamma, taper=taper)

    def decode(self, trial: Trial, state: UmmState | None = None) -> DecodeOutcome:
        ep = slice_epochs(trial)
        return self.decode_epochs(ep, state)

    def decode_epochs(self, ep: EpochSet, state: UmmState | None = None) -> DecodeOutcome:
        cov = self._covariance(ep, state)
        deltas = self._deltas(ep, state)
        return score_hypotheses(deltas, cov)

    def update_cumulative(
        self, state: UmmState, ep: EpochSet, outcome: DecodeOutcome
    ) -> UmmState:
        """Pool the trial's covariance statistics unconditionally; add its
        flash/non-flash means to the predicted hypothesis' sums with the
        outcome's confidence as weight."""
        if state.mode != MODE_CUMULATIVE:
            raise ValueError("update_cumulative requires a cumulative-mode state")
        centered = ep.epochs - ep.epochs.mean(axis=0)
        scatter = centered.T @ centered
        sq4 = float(np.sum(np.sum(centered**2, axis=1) ** 2))

        d = ep.n_features
        if state.is_empty():
            state = UmmState(
                mode=MODE_CUMULATIVE,
                scatter=np.zeros((d, d)),
                flash_sum=np.zeros(d),
                nonflash_sum=np.zeros(d),
            )
        elif state.scatter.shape[0] != d:
            raise ShapeError("epoch dimensions inconsistent with accumulated state")

        bits = _epoch_bits(ep, self.codes[outcome.label], self.n_cycles)
        pos = bits == 1
        if not pos.any() or pos.all():
            raise DegenerateHypothesis("predicted hypothesis has a degenerate epoch split")
        w = float(outcome.confidence)
        return UmmState(
            mode=MODE_CUMULATIVE,
            scatter=state.scatter + scatter,
            sq_norms4=state.sq_norms4 + sq4,
            n_epochs=state.n_epochs + ep.n_epochs,
            flash_sum=state.flash_sum + w * ep.epochs[pos].mean(axis=0),
            nonflash_sum=state.nonflash_sum + w * ep.epochs[~pos].mean(axis=0),
            weight_total=state.weight_total + w,
            n_trials_seen=state.n_trials_seen + 1,
        )


def decode(
    trial: Trial,
    codes: list[BitSequence],
    state: UmmState | None = None,
    n_cycles: int | None = None,
    gamma: float | None = None,
) -> DecodeOutcome:
    if n_cycles is None:
        frames_per_cycle = len(codes[0])
        n_frames = trial.n_samples // SAMPLES_PER_FRAME
        n_cycles = max(1, -(-n_frames // frames_per_cycle))
    return UmmDecoder(codes, n_cycles, gamma).decode(trial, state)
