"""Streaming fair feature selection.

Each arriving feature is routed to the sensitive blanket ``mb_s`` when it
stays dependent on S under every small subset of ``mb_s``; otherwise it joins
the target blanket ``mb_t`` when it is dependent on T. After each arrival,
members of ``mb_s`` that turn out to be marginally independent of S but
dependent on T are moved to ``mb_t``.
"""

import json
import math
from dataclasses import dataclass, field, replace

from .citest import DEFAULT_ALPHA, DEFAULT_MAX_K, G2Tester, candidate_subsets, ci_test, is_dep

TO_MB_S = "to_MB_S"
TO_MB_T = "to_MB_T"
DISCARDED = "discarded"
RESCUED = "rescued_to_MB_T"
ACTIONS = (TO_MB_S, TO_MB_T, DISCARDED, RESCUED)

RESCUE_MODES = ("every_step", "final_only")


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class SelectorConfig:
    alpha: float = DEFAULT_ALPHA
    max_k: int | None = DEFAULT_MAX_K
    rescue_mode: str = "every_step"
    # ablation: let a subset of mb_s (not only the empty set) certify a rescue
    rescue_subsets: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise SelectionError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.max_k is not None and self.max_k < 0:
            raise SelectionError(f"max_k must be >= 0, got {self.max_k}")
        if self.rescue_mode not in RESCUE_MODES:
            raise SelectionError(f"rescue_mode must be one of {RESCUE_MODES}")


@dataclass(frozen=True)
class TraceEvent:
    step: int
    feature: int
    action: str
    tests: tuple = ()


@dataclass(frozen=True)
class SelectionState:
    mb_s: tuple = ()
    mb_t: tuple = ()
    processed: int = 0
    seen: frozenset = frozenset()
    trace: tuple = field(default=(), repr=False)

    def check(self, table):
        if set(self.mb_s) & set(self.mb_t):
            raise AssertionError("mb_s and mb_t overlap")
        roles = {table.sensitive_index, table.target_index}
        if roles & (set(self.mb_s) | set(self.mb_t)):
            raise AssertionError("sensitive or target column inside a blanket")
        if not (set(self.mb_s) | set(self.mb_t)) <= self.seen:
            raise AssertionError("blanket holds a feature that has not arrived")


def _roles(table):
    s, t = table.sensitive_index, table.target_index
    if s is None or t is None:
        raise SelectionError("table needs sensitive and target columns")
    return s, t


def _tester(table, cfg, tester):
    return tester if tester is not None else G2Tester(table, cfg.alpha)


def step1_classify(state, x, table, cfg=SelectorConfig(), tester=None):
    s, t = _roles(table)
    if x in state.seen:
        raise SelectionError(f"feature {x} was already processed")
    if x in (s, t):
        raise SelectionError("the sensitive and target columns cannot be streamed")
    tester = _tester(table, cfg, tester)
    tests = []
    mb_s, mb_t = state.mb_s, state.mb_t
    if is_dep(table, s, x, mb_s, cfg.max_k, cfg.alpha, tester, tests):
        action, mb_s = TO_MB_S, mb_s + (x,)
    elif is_dep(table, t, x, mb_t, cfg.max_k, cfg.alpha, tester, tests):
        action, mb_t = TO_MB_T, mb_t + (x,)
    else:
        action = DISCARDED
    step = state.processed + 1
    return replace(
        state,
        mb_s=mb_s,
        mb_t=mb_t,
        processed=step,
        seen=state.seen | {x},
        trace=state.trace + (TraceEvent(step, x, action, tuple(tests)),),
    )


def _independent_of_s(table, s, a, mb_s, cfg, tester, tests):
    if not cfg.rescue_subsets:
        res = tester.test(s, a, ())
        tests.append((s, a, (), res))
        return res.independent
    pool = [v for v in mb_s if v != a]
    return not is_dep(table, s, a, pool, cfg.max_k, cfg.alpha, tester, tests)


def step2_rescue(state, table, cfg=SelectorConfig(), tester=None):
    """Move members of ``mb_s`` that are independent of S and dependent on T."""
    s, t = _roles(table)
    tester = _tester(table, cfg, tester)
    mb_s, mb_t, trace = list(state.mb_s), state.mb_t, state.trace
    moved = True
    while moved:
        moved = False
        for a in list(mb_s):
            tests = []
            if not _independent_of_s(table, s, a, mb_s, cfg, tester, tests):
                continue
            if is_dep(table, t, a, mb_t, cfg.max_k, cfg.alpha, tester, tests):
                mb_s.remove(a)
                mb_t = mb_t + (a,)
                trace = trace + (TraceEvent(state.processed, a, RESCUED, tuple(tests)),)
                moved = True
    return replace(state, mb_s=tuple(mb_s), mb_t=mb_t, trace=trace)


def run(table, stream, cfg=SelectorConfig(), tester=None):
    """Consume ``stream`` and return ``(selected, final_state)``."""
    _roles(table)
    tester = _tester(table, cfg, tester)
    state = SelectionState()
    for x in stream:
        state = step1_classify(state, x, table, cfg, tester)
        if cfg.rescue_mode == "every_step":
            state = step2_rescue(state, table, cfg, tester)
    if cfg.rescue_mode == "final_only":
        state = step2_rescue(state, table, cfg, tester)
    return list(state.mb_t), state


def baseline_relevance_only(table, stream, cfg=SelectorConfig(), tester=None):
    """Add each feature that stays dependent on T given the current selection."""
    _, t = _roles(table)
    tester = _tester(table, cfg, tester)
    selected = []
    for x in stream:
        if is_dep(table, t, x, selected, cfg.max_k, cfg.alpha, tester):
            selected.append(x)
    return selected


def audit_fairness(table, selected, cfg=SelectorConfig(), mb_s=(), tester=None):
    """Check that every selected feature can be separated from S.

    A feature passes when a reliable test finds it independent of S given
    some subset (size at most ``max_k``, the empty set included) of
    ``mb_s``. Returns ``(ok, report)`` where ``report`` maps each feature to
    its certifying conditioning set, or ``None`` when none exists.
    """
    s, _ = _roles(table)
    tester = _tester(table, cfg, tester)
    report = {}
    for x in selected:
        if x == s:
            report[x] = None
            continue
        pool = sorted(v for v in mb_s if v != x)
        report[x] = None
        for z in candidate_subsets(pool, cfg.max_k):
            res = tester.test(s, x, z)
            if res.reliable and res.independent:
                report[x] = tuple(z)
                break
    return all(v is not None for v in report.values()), report


# -- trace I/O -----------------------------------------------------------

def _num(x):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def trace_records(state, table):
    names = table.names
    for ev in state.trace:
        yield {
            "step": ev.step,
            "feature": names[ev.feature],
            "action": ev.action,
            "tests": [
                [names[x], names[y], [names[v] for v in z], _num(r.g2), r.dof, r.p_value,
                 r.reliable, r.independent]
                for x, y, z, r in ev.tests
            ],
        }


def write_trace(path, state, table):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in trace_records(state, table):
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_trace(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def replay_trace(records, table, alpha=DEFAULT_ALPHA):
    """Re-run every recorded test; return the records that do not reproduce."""
    bad = []
    for rec in records:
        for x, y, z, g2, dof, p, reliable, independent in rec["tests"]:
            res = ci_test(table, table.index_of(x), table.index_of(y),
                          [table.index_of(v) for v in z], alpha)
            if (_num(res.g2), res.dof, res.p_value, res.reliable, res.independent) != (
                    g2, dof, p, reliable, independent):
                bad.append((rec["step"], x, y, z))
    return bad
