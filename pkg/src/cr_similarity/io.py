"""Reading and writing two-group event files.

Format::

    #tau=90
    subject_id,group,time,state
    a,1,90,0
    b,2,30,1

``group`` is 1 or 2, ``time`` the exit time from the initial state and
``state`` the state entered (0 = censored). The observation window must be
given by a ``#tau=<days>`` line or explicitly by the caller; it is never
guessed from the data.
"""

from __future__ import annotations

import csv
import io
import math
import os
from typing import Optional, TextIO, Union

import numpy as np

from .model import GroupSample

__all__ = ["ParseError", "parse_events", "read_events", "write_events", "sample_from_stats"]

HEADER = ["subject_id", "group", "time", "state"]


class ParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(message if line is None else f"{message} at line {line}")


def read_events(stream: TextIO, tau: Optional[float] = None, k: Optional[int] = None,
                allow_random_censoring: bool = True) -> tuple[GroupSample, GroupSample]:
    """Parse an event file from an open text stream. See :func:`parse_events`."""
    file_tau = None
    header_seen = False
    rows = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("tau="):
                try:
                    file_tau = float(body[4:])
                except ValueError:
                    raise ParseError(f"invalid tau directive {body!r}", lineno) from None
            continue
        fields = next(csv.reader([line]))
        if not header_seen:
            if [f.strip().lower() for f in fields] != HEADER:
                raise ParseError(f"expected header {','.join(HEADER)}", lineno)
            header_seen = True
            continue
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields, got {len(fields)}", lineno)
        sid, group, time, state = (f.strip() for f in fields)
        try:
            time_value = float(time)
        except ValueError:
            raise ParseError(f"invalid time {time!r}", lineno) from None
        try:
            state_value = int(state)
        except ValueError:
            raise ParseError(f"invalid state {state!r}", lineno) from None
        if group not in ("1", "2"):
            raise ParseError(f"unknown group label {group!r}", lineno)
        rows.append((lineno, sid, int(group), time_value, state_value))

    if not header_seen and not rows:
        raise ParseError("empty input")
    if tau is None:
        tau = file_tau
    if tau is None:
        raise ParseError("missing tau: add a '#tau=<days>' line or pass --tau")
    if not (tau > 0 and math.isfinite(tau)):
        raise ParseError(f"tau must be positive, got {tau}")

    for lineno, _, _, time_value, state_value in rows:
        if not (time_value > 0 and math.isfinite(time_value)):
            raise ParseError("time must be positive", lineno)
        if time_value > tau:
            raise ParseError("time exceeds tau", lineno)
        if state_value < 0:
            raise ParseError("negative state", lineno)
        if state_value == 0 and time_value < tau and not allow_random_censoring:
            raise ParseError("censored before tau but censoring mode is 'none'", lineno)

    k_data = max([r[4] for r in rows], default=0)
    if k is None:
        k = max(k_data, 1)
    elif k_data > k:
        line = next(r[0] for r in rows if r[4] > k)
        raise ParseError(f"unknown state (data has {k_data} states, expected {k})", line)

    groups = []
    for label in (1, 2):
        members = [r for r in rows if r[2] == label]
        if not members:
            raise ParseError(f"group {label} has no subjects")
        groups.append(GroupSample(
            exit_times=np.array([r[3] for r in members]),
            outcomes=np.array([r[4] for r in members], dtype=np.int64),
            tau=tau, k=k, group_label=label,
            subject_ids=tuple(r[1] for r in members),
        ))
    return groups[0], groups[1]


def parse_events(path: Union[str, os.PathLike], tau: Optional[float] = None,
                 k: Optional[int] = None,
                 allow_random_censoring: bool = True) -> tuple[GroupSample, GroupSample]:
    """Read a two-group event file.

    Parameters
    ----------
    path : path-like
        CSV with header ``subject_id,group,time,state``.
    tau : float, optional
        Observation window; overrides the file's ``#tau=`` line.
    k : int, optional
        Number of competing states. Defaults to the largest state observed.
    allow_random_censoring : bool
        If False, censorings before ``tau`` are rejected.

    Raises
    ------
    ParseError
        With the offending line number where one applies.
    """
    with open(path, newline="") as fh:
        return read_events(fh, tau=tau, k=k, allow_random_censoring=allow_random_censoring)


def write_events(target: Union[str, os.PathLike, TextIO], sample1: GroupSample,
                 sample2: GroupSample) -> None:
    """Write both groups in the format read by :func:`parse_events`."""
    if sample1.tau != sample2.tau:
        raise ValueError("groups have different tau")
    buf = io.StringIO()
    buf.write(f"#tau={sample1.tau!r}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for label, sample in ((1, sample1), (2, sample2)):
        for sid, t, o in zip(sample.subject_ids, sample.exit_times, sample.outcomes):
            writer.writerow([sid, label, repr(float(t)), int(o)])
    if hasattr(target, "write"):
        target.write(buf.getvalue())
    else:
        with open(target, "w", newline="") as fh:
            fh.write(buf.getvalue())


def sample_from_stats(counts, exposure: float, n: int, tau: float,
                      group_label: int = 1) -> GroupSample:
    """A deterministic sample with exactly the given counts and exposure.

    Subjects without an event are censored at ``tau``; all events share one
    exit time chosen so that the exposures add up. Useful for rebuilding a
    data set when only summary numbers are published.
    """
    counts = np.asarray(counts, dtype=np.int64)
    events = int(counts.sum())
    if events > n:
        raise ValueError("more events than subjects")
    event_time_total = exposure - (n - events) * tau
    if events == 0:
        if not math.isclose(exposure, n * tau):
            raise ValueError("without events the exposure must equal n * tau")
        event_time = None
    else:
        event_time = event_time_total / events
        if not 0 < event_time <= tau:
            raise ValueError("exposure incompatible with counts, n and tau")
    outcomes = np.concatenate([np.repeat(np.arange(1, counts.size + 1), counts),
                               np.zeros(n - events, dtype=np.int64)])
    times = np.where(outcomes > 0, event_time if event_time else tau, float(tau))
    return GroupSample(times, outcomes, tau=tau, k=counts.size, group_label=group_label,
                       subject_ids=tuple(f"g{group_label}-{i + 1}" for i in range(n)))
