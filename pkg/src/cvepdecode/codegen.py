"""Stimulus code generation: m-sequences, Gold sets, run-length-limited
modulation, and greedy subset selection.

All sequences are degree-6 (period 63) as used by the 60 Hz speller grid;
modulated codes are 126 bits long with flashes of one or two frames only.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
from numpy.typing import NDArray

from .errors import (
    DegeneratePair,
    InsufficientCodes,
    InvalidSeed,
    LengthMismatch,
    NotPrimitive,
)

DEGREE = 6
RAW_LENGTH = 2 ** DEGREE - 1           # 63
MODULATED_LENGTH = 2 * RAW_LENGTH      # 126
PRESENTATION_RATE_HZ = 60.0

#: Default preferred pair of primitive polynomials for degree 6
#: (octal 103 and 147), as tap positions.
DEFAULT_TAPS_A = (6, 1)
DEFAULT_TAPS_B = (6, 5, 2, 1)


@dataclass(frozen=True)
class BitSequence:
    """A binary stimulus sequence presented at a fixed frame rate."""

    bits: tuple[int, ...]
    rate_hz: float = PRESENTATION_RATE_HZ

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0 or 1")

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def array(self) -> NDArray[np.int8]:
        return np.array(self.bits, dtype=np.int8)

    def to_line(self) -> str:
        return "".join(str(b) for b in self.bits)

    @classmethod
    def from_line(cls, line: str, rate_hz: float = PRESENTATION_RATE_HZ) -> "BitSequence":
        stripped = line.strip()
        if stripped and set(stripped) - {"0", "1"}:
            raise ValueError(f"invalid code line: {line!r}")
        return cls(bits=tuple(int(c) for c in stripped), rate_hz=rate_hz)


def generate_m_sequence(taps=DEFAULT_TAPS_A, init=None) -> BitSequence:
    """Generate a degree-6 maximal-length sequence from a Fibonacci LFSR.

    Parameters
    ----------
    taps:
        Feedback tap positions, 1-indexed; must include the degree (6) and
        define a primitive polynomial.
    init:
        Initial register contents (length 6, not all zero). Defaults to
        all ones.

    Returns
    -------
    BitSequence of length 63.
    """
    if max(taps) != DEGREE:
        raise NotPrimitive(f"taps {taps} do not describe a degree-{DEGREE} polynomial")
    state = list(init) if init is not None else [1] * DEGREE
    if len(state) != DEGREE:
        raise InvalidSeed(f"register state must have {DEGREE} bits, got {len(state)}")
    if not any(state):
        raise InvalidSeed("all-zero register state is degenerate")

    start = tuple(state)
    out = []
    for step in range(RAW_LENGTH):
        out.append(state[-1])
        feedback = 0
        for t in taps:
            feedback ^= state[t - 1]
        state = [feedback] + state[:-1]
        if tuple(state) == start and step < RAW_LENGTH - 1:
            # the register cycled early: period divides 63 but is smaller
            raise NotPrimitive(f"taps {taps} yield period {step + 1}, not {RAW_LENGTH}")
    if tuple(state) != start:
        raise NotPrimitive(f"taps {taps} do not yield a maximal-length sequence")
    return BitSequence(bits=tuple(out))


def gold_set(seq_a: BitSequence, seq_b: BitSequence) -> list[BitSequence]:
    """Build the 65-member Gold family from a preferred pair of m-sequences.

    The family is the two parents plus the XOR of ``seq_a`` with every
    cyclic shift of ``seq_b``.
    """
    a, b = seq_a.array, seq_b.array
    if len(a) != RAW_LENGTH or len(b) != RAW_LENGTH:
        raise LengthMismatch("Gold construction requires two period-63 sequences")
    if np.array_equal(a, b):
        raise DegeneratePair("identical m-sequences form no Gold family")
    codes = [seq_a, seq_b]
    for k in range(RAW_LENGTH):
        codes.append(BitSequence(bits=tuple(int(v) for v in a ^ np.roll(b, k))))
    return codes


def modulate(code: BitSequence) -> BitSequence:
    """Expand a 63-bit code to its 126-bit run-length-limited form.

    Every bit b becomes the pair (b, not b), which limits flashes to one
    frame (short) or two frames (long) and balances ones and zeros.
    """
    if len(code) != RAW_LENGTH:
        raise LengthMismatch(f"expected {RAW_LENGTH} bits, got {len(code)}")
    out = []
    for b in code.bits:
        out.extend((b, 1 - b))
    return BitSequence(bits=tuple(out), rate_hz=code.rate_hz)


def demodulate(code: BitSequence) -> BitSequence:
    """Invert :func:`modulate` by keeping the even-indexed bits."""
    if len(code) != MODULATED_LENGTH:
        raise LengthMismatch(f"expected {MODULATED_LENGTH} bits, got {len(code)}")
    return BitSequence(bits=code.bits[0::2], rate_hz=code.rate_hz)


def periodic_cross_correlation(x: BitSequence, y: BitSequence) -> NDArray[np.int_]:
    """Periodic cross-correlation in the +/-1 alphabet, one value per shift."""
    if len(x) != len(y):
        raise LengthMismatch("sequences differ in length")
    px = 1 - 2 * x.array.astype(float)
    py = 1 - 2 * y.array.astype(float)
    n = len(px)
    # circular correlation via FFT; values are exact integers
    corr = np.fft.irfft(np.fft.rfft(px) * np.conj(np.fft.rfft(py)), n=n)
    return np.round(corr).astype(int)


def _max_abs_xcorr(codes: list[BitSequence]) -> int:
    worst = 0
    for x, y in combinations(codes, 2):
        worst = max(worst, int(np.max(np.abs(periodic_cross_correlation(x, y)))))
    return worst


def select_subset(codes: list[BitSequence], n: int = 20) -> list[BitSequence]:
    """Pick ``n`` codes greedily minimizing the maximum pairwise periodic
    cross-correlation magnitude. Ties break to the lowest index.
    """
    if n > len(codes):
        raise InsufficientCodes(f"asked for {n} codes from a pool of {len(codes)}")
    if n == len(codes):
        return list(codes)
    selected = [0]
    remaining = list(range(1, len(codes)))
    while len(selected) < n:
        best_idx = None
        best_cost = None
        for idx in remaining:
            cost = max(
                int(np.max(np.abs(periodic_cross_correlation(codes[idx], codes[j]))))
                for j in selected
            )
            if best_cost is None or cost < best_cost:
                best_cost = cost
                best_idx = idx
        selected.append(best_idx)
        remaining.remove(best_idx)
    return [codes[i] for i in sorted(selected)]


@lru_cache(maxsize=8)
def _default_code_set_cached(n: int) -> tuple[BitSequence, ...]:
    a = generate_m_sequence(DEFAULT_TAPS_A)
    b = generate_m_sequence(DEFAULT_TAPS_B)
    family = [modulate(c) for c in gold_set(a, b)]
    return tuple(select_subset(family, n))


def default_code_set(n: int = 20) -> list[BitSequence]:
    """The stimulus set used throughout: n modulated codes selected from
    the degree-6 Gold family built on the default preferred pair."""
    return list(_default_code_set_cached(n))


def save_codes(codes: list[BitSequence], path) -> None:
    """One code per line, '0'/'1' characters, newline-terminated."""
    with open(path, "w") as fh:
        for code in codes:
            fh.write(code.to_line() + "\n")


def load_codes(path, rate_hz: float = PRESENTATION_RATE_HZ) -> list[BitSequence]:
    with open(path) as fh:
        return [BitSequence.from_line(line, rate_hz) for line in fh if line.strip()]
