"""Single-file trial archive: one JSON header line followed by raw 32-bit
little-endian floats, channel-major within each trial.
"""
from __future__ import annotations

import json

import numpy as np

from .codegen import BitSequence
from .errors import CorruptArchive, UnsupportedVersion
from .sigproc import Trial
from .simulate import Session

ARCHIVE_VERSION = 1


def write_archive(session: Session, path) -> None:
    if not session.trials:
        raise CorruptArchive("refusing to write an empty session")
    n_channels = session.trials[0].n_channels
    trial_len = session.trials[0].n_samples
    for t in session.trials:
        if t.n_channels != n_channels or t.n_samples != trial_len:
            raise CorruptArchive("trials differ in shape; archive requires uniform trials")
    labels = [t.code_index_true for t in session.trials]
    header = {
        "version": ARCHIVE_VERSION,
        "channels": n_channels,
        "fs_hz": session.fs,
        "frame_rate_hz": session.trials[0].frame_rate_hz,
        "n_trials": len(session.trials),
        "trial_len_samples": trial_len,
        "codes": [c.to_line() for c in session.codes],
        "labels": labels if all(l is not None for l in labels) else None,
        "seed": session.seed,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for t in session.trials:
            fh.write(np.ascontiguousarray(t.samples, dtype="<f4").tobytes())


def read_archive(path) -> Session:
    try:
        with open(path, "rb") as fh:
            header_line = fh.readline()
            payload = fh.read()
    except OSError as exc:
        raise CorruptArchive(f"cannot read archive {path}: {exc}") from exc
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptArchive(f"unreadable archive header: {exc}") from exc

    version = header.get("version")
    if version != ARCHIVE_VERSION:
        raise UnsupportedVersion(f"archive version {version!r}, expected {ARCHIVE_VERSION}")
    try:
        channels = int(header["channels"])
        fs = float(header["fs_hz"])
        frame_rate = float(header["frame_rate_hz"])
        n_trials = int(header["n_trials"])
        trial_len = int(header["trial_len_samples"])
        code_lines = header["codes"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptArchive(f"incomplete archive header: {exc}") from exc

    if len({len(c) for c in code_lines}) > 1:
        raise CorruptArchive("header codes have unequal lengths")
    expected = n_trials * channels * trial_len * 4
    if len(payload) != expected:
        raise CorruptArchive(
            f"payload holds {len(payload)} bytes, header implies {expected}"
        )
    try:
        codes = [BitSequence.from_line(line) for line in code_lines]
    except ValueError as exc:
        raise CorruptArchive(str(exc)) from exc

    labels = header.get("labels") or [None] * n_trials
    data = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    data = data.reshape(n_trials, channels, trial_len)
    trials = [
        Trial(
            samples=data[i],
            fs=fs,
            frame_rate_hz=frame_rate,
            code_index_true=labels[i],
        )
        for i in range(n_trials)
    ]
    return Session(trials=trials, codes=codes, fs=fs, seed=header.get("seed"))
