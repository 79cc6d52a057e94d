"""Plain-text formats for MDPs, trajectories and policies.

MDP file::

    MDP <S> <A> <H>
    P0 <S reals>
    R <S reals>
    T <t> <s> <a> <s'> <prob>      # one line per nonzero transition

``t`` may be ``*`` for a transition shared by every step (stationary MDPs are
written this way). Blank lines and ``#`` comments are ignored.

Trajectory file: one trajectory per line, ``s0 a0 s1 a1 ... sH aH``.

Policy file: ``POLICY <H> <S> <A>`` then ``PI <t> <s> <a> <prob>`` for every
nonzero entry.
"""

from collections import defaultdict

import numpy as np

from valueprior.mdp import FiniteHorizonMdp, MdpValidationError, validate_mdp

REAL = "%.17g"


class FormatError(ValueError):
    """Malformed file contents; the message names the offending line."""


def _fmt(x):
    return REAL % float(x)


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for number, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                yield number, text.split()


def _ints(tokens, number):
    try:
        return [int(tok) for tok in tokens]
    except ValueError:
        raise FormatError(f"line {number}: expected integers, got {' '.join(tokens)!r}") from None


def _reals(tokens, number):
    try:
        return [float(tok) for tok in tokens]
    except ValueError:
        raise FormatError(f"line {number}: expected reals, got {' '.join(tokens)!r}") from None


def write_mdp(mdp, path):
    S, A, H = mdp.num_states, mdp.num_actions, mdp.horizon
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"MDP {S} {A} {H}\n")
        fh.write("P0 " + " ".join(_fmt(x) for x in mdp.initial_dist) + "\n")
        fh.write("R " + " ".join(_fmt(x) for x in mdp.rewards) + "\n")
        # one shared table is written once, under "*"
        steps = ["*"] if mdp.stationary and H > 1 else range(H)
        for t_label in steps:
            nxt, prob = mdp.transition_arrays(0 if t_label == "*" else t_label)
            for s in range(S):
                for a in range(A):
                    merged = defaultdict(float)
                    for j, p in zip(nxt[s, a], prob[s, a]):
                        if p > 0:
                            merged[int(j)] += float(p)
                    for j in sorted(merged):
                        fh.write(f"T {t_label} {s} {a} {j} {_fmt(merged[j])}\n")


def read_mdp(path):
    """Parse an MDP file; raises ``FormatError`` or ``MdpValidationError`` on bad content."""
    lines = _lines(path)
    try:
        number, head = next(lines)
    except StopIteration:
        raise FormatError("empty MDP file") from None
    if head[0] != "MDP" or len(head) != 4:
        raise FormatError(f"line {number}: expected 'MDP <S> <A> <H>'")
    S, A, H = _ints(head[1:], number)
    if S < 1 or A < 1 or H < 0:
        raise FormatError(f"line {number}: need S >= 1, A >= 1, H >= 0")

    p0 = rewards = None
    shared = defaultdict(dict)
    timed = defaultdict(dict)
    for number, tokens in lines:
        tag = tokens[0]
        if tag in ("P0", "R"):
            vals = _reals(tokens[1:], number)
            if len(vals) != S:
                raise FormatError(f"line {number}: {tag} needs {S} values, got {len(vals)}")
            if tag == "P0":
                p0 = vals
            else:
                rewards = vals
        elif tag == "T":
            if len(tokens) != 6:
                raise FormatError(f"line {number}: expected 'T t s a s' prob'")
            s, a, j = _ints(tokens[2:5], number)
            (p,) = _reals(tokens[5:], number)
            if not (0 <= s < S and 0 <= a < A and 0 <= j < S):
                raise FormatError(f"line {number}: state or action id out of range")
            if tokens[1] == "*":
                shared[(s, a)][j] = shared[(s, a)].get(j, 0.0) + p
            else:
                (t,) = _ints(tokens[1:2], number)
                if not 0 <= t < H:
                    raise FormatError(f"line {number}: step {t} outside [0, {H})")
                timed[(t, s, a)][j] = timed[(t, s, a)].get(j, 0.0) + p
        else:
            raise FormatError(f"line {number}: unknown record {tag!r}")
    if p0 is None or rewards is None:
        raise FormatError("MDP file needs both P0 and R lines")
    if shared and timed:
        raise FormatError("mixing '*' and explicit steps in one file is not supported")

    if timed:
        T = H
        rows = {(t, s, a): timed.get((t, s, a), {}) for t in range(T) for s in range(S) for a in range(A)}
    else:
        T = 1
        rows = {(0, s, a): shared.get((s, a), {}) for s in range(S) for a in range(A)}
    K = max(1, max((len(r) for r in rows.values()), default=1))
    nxt = np.zeros((T, S, A, K), dtype=np.intp)
    prob = np.zeros((T, S, A, K))
    for (t, s, a), row in rows.items():
        ids = sorted(row)
        nxt[t, s, a, : len(ids)] = ids
        prob[t, s, a, : len(ids)] = [row[j] for j in ids]
    mdp = FiniteHorizonMdp(S, A, H, np.asarray(rewards), np.asarray(p0), nxt, prob)
    validate_mdp(mdp)
    return mdp


def write_trajectories(dataset, path):
    data = np.asarray(dataset, dtype=np.int64)
    with open(path, "w", encoding="utf-8") as fh:
        for traj in data:
            fh.write(" ".join(str(int(x)) for x in traj.reshape(-1)) + "\n")


def read_trajectories(path, horizon=None):
    """Trajectories as int64 ``[m, H + 1, 2]``; every line must have the same length."""
    rows = []
    width = None
    for number, tokens in _lines(path):
        ids = _ints(tokens, number)
        if len(ids) % 2 or not ids:
            raise FormatError(f"line {number}: odd number of ids")
        if width is None:
            width = len(ids)
        elif len(ids) != width:
            raise FormatError(f"line {number}: {len(ids) // 2} pairs, expected {width // 2}")
        rows.append(ids)
    if horizon is not None and width is not None and width != 2 * (horizon + 1):
        raise FormatError(f"trajectories have {width // 2} pairs; horizon {horizon} needs {horizon + 1}")
    if not rows:
        pairs = 0 if horizon is None else horizon + 1
        return np.zeros((0, pairs, 2), dtype=np.int64)
    return np.asarray(rows, dtype=np.int64).reshape(len(rows), -1, 2)


def policy_lines(policy, header_comments=()):
    """Lines of a policy file, without trailing newlines."""
    pi = np.asarray(policy, dtype=float)
    H1, S, A = pi.shape
    yield from (f"# {line}" for line in header_comments)
    yield f"POLICY {H1 - 1} {S} {A}"
    for t, s, a in zip(*np.nonzero(pi)):
        yield f"PI {t} {s} {a} {_fmt(pi[t, s, a])}"


def write_policy(policy, path, header_comments=()):
    with open(path, "w", encoding="utf-8") as fh:
        for line in policy_lines(policy, header_comments):
            fh.write(line + "\n")


def read_policy(path):
    lines = _lines(path)
    try:
        number, head = next(lines)
    except StopIteration:
        raise FormatError("empty policy file") from None
    if head[0] != "POLICY" or len(head) != 4:
        raise FormatError(f"line {number}: expected 'POLICY <H> <S> <A>'")
    H, S, A = _ints(head[1:], number)
    pi = np.zeros((H + 1, S, A))
    for number, tokens in lines:
        if tokens[0] != "PI" or len(tokens) != 5:
            raise FormatError(f"line {number}: expected 'PI t s a prob'")
        t, s, a = _ints(tokens[1:4], number)
        if not (0 <= t <= H and 0 <= s < S and 0 <= a < A):
            raise FormatError(f"line {number}: index out of range")
        pi[t, s, a] = _reals(tokens[4:], number)[0]
    return pi


__all__ = [
    "FormatError",
    "MdpValidationError",
    "policy_lines",
    "read_mdp",
    "read_policy",
    "read_trajectories",
    "write_mdp",
    "write_policy",
    "write_trajectories",
]
