"""
Linearizability checking for histories recorded under the simulated scheduler.

Programs wrap each operation with ``recorded`` so invocations and responses
land in the execution log as notes. ``check_linearizable`` searches for a
legal sequential order (depth-first, linearizing only operations that are
minimal in the real-time order, memoizing failed ``(done-set, state)``
pairs). ``explore_and_check`` drives a scenario through the scheduler and
aggregates checker verdicts with post-hoc step-log audits.
"""

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ValidationError

from .memcell import (
    NIL,
    Execution,
    ExecutionStatus,
    Note,
    OpStats,
    Program,
    Scheduler,
    Segment,
    StepCounter,
    StepKind,
    Strategy,
)
from .llsc import LLResult
from .swcopy import DestinationLayout
from .weak_llsc import WeakLayout, WLLResult

logger = logging.getLogger("LinHarness")

DEFAULT_MAX_OPS = 16
MAX_REPORTED_VIOLATIONS = 25


class HistoryError(ValueError):
    pass


class EventKind(str, Enum):
    INVOKE = "invoke"
    RESPOND = "respond"


class HistoryEvent(BaseModel):
    proc: int
    op: str
    args: List[Any] = []
    kind: EventKind
    result: Optional[Any] = None
    seq: int


class Verdict(BaseModel):
    linearizable: bool
    witness: List[int] = []
    violating: List[int] = []
    operations: List[str] = []
    reason: str = ""


class Violation(BaseModel):
    execution: int
    kind: str
    detail: str
    schedule: List[int] = []
    history: List[HistoryEvent] = []


class VerificationReport(BaseModel):
    scenario: str
    strategy: Strategy
    seed: int
    budget: int
    preemption_bound: Optional[int] = None
    interleavings: int = 0
    truncated: bool = False
    step_limited: int = 0
    errored: int = 0
    distinct_histories: int = 0
    violations_total: int = 0
    violation_kinds: Dict[str, int] = {}
    violations: List[Violation] = []
    op_stats: Dict[str, OpStats] = {}

    @property
    def ok(self) -> bool:
        return self.violations_total == 0


# ---------------------------------------------------------------------------
# Recording
# ---------------------------------------------------------------------------


def encode_result(value: Any) -> Any:
    """JSON-friendly form of an operation result."""
    if isinstance(value, WLLResult):
        return list(value.value) if value.ok else None
    if isinstance(value, LLResult):
        return [list(value.value), value.handle.slot]
    if isinstance(value, tuple):
        return [encode_result(v) for v in value]
    return value


def recorded(op: str, args: Sequence[Any], program: Program) -> Program:
    yield Note("invoke", {"op": op, "args": [encode_result(a) for a in args]})
    result = yield from program
    yield Note("respond", {"op": op, "result": encode_result(result)})
    return result


def history_from_notes(notes: Iterable[tuple]) -> List[HistoryEvent]:
    events = []
    for seq, proc, kind, payload in notes:
        if kind == "invoke":
            events.append(HistoryEvent(proc=proc, op=payload["op"], args=payload["args"], kind=EventKind.INVOKE, seq=seq))
        elif kind == "respond":
            events.append(
                HistoryEvent(proc=proc, op=payload["op"], kind=EventKind.RESPOND, result=payload["result"], seq=seq)
            )
    return events


def dump_history(events: Iterable[HistoryEvent], path: Union[str, Path]) -> None:
    with open(path, "w") as f:
        for event in events:
            f.write(event.model_dump_json() + "\n")


def load_history(path: Union[str, Path]) -> List[HistoryEvent]:
    events = []
    try:
        with open(path) as f:
            for line_no, line in enumerate(f, start=1):
                if line.strip():
                    events.append(HistoryEvent.model_validate_json(line))
    except ValidationError as e:
        raise HistoryError(f"{path}:{line_no}: {e.errors()[0]['msg']}") from e
    except OSError as e:
        raise HistoryError(f"Cannot read history {path}: {e}") from e
    return events


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def freeze(value: Any) -> Hashable:
    if isinstance(value, (list, tuple)):
        return tuple(freeze(v) for v in value)
    if isinstance(value, dict):
        return tuple(sorted((k, freeze(v)) for k, v in value.items()))
    return value


@dataclass(frozen=True)
class Operation:
    index: int
    proc: int
    name: str
    args: Tuple
    result: Hashable
    invoked: int
    responded: Optional[int]

    @property
    def pending(self) -> bool:
        return self.responded is None

    def describe(self) -> str:
        args = ", ".join(repr(a) for a in self.args)
        outcome = "pending" if self.pending else repr(self.result)
        return f"p{self.proc}:{self.name}({args}) -> {outcome}"


def operations_from_history(events: Sequence[HistoryEvent]) -> List[Operation]:
    """Pair invocations with responses; rejects ill-formed histories."""
    ordered = sorted(events, key=lambda e: e.seq)
    seen_seq = set()
    open_ops: Dict[int, Tuple[HistoryEvent, int]] = {}
    ops: List[Optional[Operation]] = []
    for event in ordered:
        if event.seq in seen_seq:
            raise HistoryError(f"Duplicate sequence number {event.seq}")
        seen_seq.add(event.seq)
        if event.kind is EventKind.INVOKE:
            if event.proc in open_ops:
                raise HistoryError(f"Process {event.proc} invoked {event.op} with an operation still open")
            open_ops[event.proc] = (event, len(ops))
            ops.append(None)
            continue
        if event.proc not in open_ops:
            raise HistoryError(f"Process {event.proc} responded to {event.op} without an invocation")
        invoke, index = open_ops.pop(event.proc)
        if invoke.op != event.op:
            raise HistoryError(f"Process {event.proc} invoked {invoke.op} but responded to {event.op}")
        ops[index] = Operation(index, event.proc, invoke.op, freeze(invoke.args), freeze(event.result), invoke.seq, event.seq)
    for invoke, index in open_ops.values():
        ops[index] = Operation(index, invoke.proc, invoke.op, freeze(invoke.args), None, invoke.seq, None)
    return ops  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# Sequential specifications
# ---------------------------------------------------------------------------


class SequentialSpec:
    """``outcomes(state, op)`` lists every legal ``(result, next_state)``."""

    name = "abstract"

    def initial(self) -> Hashable:
        raise NotImplementedError

    def outcomes(self, state: Hashable, op: Operation) -> List[Tuple[Hashable, Hashable]]:
        raise NotImplementedError

    def history_violations(self, ops: Sequence[Operation]) -> List[Tuple[int, str]]:
        return []

    def _unknown(self, op: Operation):
        raise HistoryError(f"{self.name} has no operation {op.name!r}")


class RegisterSpec(SequentialSpec):
    name = "register"

    def __init__(self, initial: int = 0):
        self._initial = initial

    def initial(self):
        return self._initial

    def outcomes(self, state, op):
        if op.name == "read":
            return [(state, state)]
        if op.name == "write":
            return [(None, op.args[0])]
        if op.name == "cas":
            expected, desired = op.args
            return [(True, desired)] if state == expected else [(False, state)]
        self._unknown(op)


def _initial_values(objects: int, width: int, initial: Optional[Sequence]) -> Tuple:
    if initial is None:
        return tuple((0,) * width for _ in range(objects))
    return tuple(freeze(v) if isinstance(v, (list, tuple)) else (v,) for v in initial)


class WeakLLSCSpec(SequentialSpec):
    """Weak LL/SC: state is ``(values, links)`` with ``links`` the set of ``(proc, object)`` still valid.

    An empty ``wll`` is always a legal step here; ``history_violations``
    separately requires an overlapping successful ``wsc`` on the same object.
    """

    name = "weakllsc"

    def __init__(self, objects: int = 1, width: int = 1, initial: Optional[Sequence] = None):
        self._values = _initial_values(objects, width, initial)

    def initial(self):
        return (self._values, frozenset())

    def outcomes(self, state, op):
        values, links = state
        p, x = op.proc, op.args[0]
        if op.name == "wll":
            doomed = links - {(p, y) for y in range(len(values))}
            return [(values[x], (values, doomed | {(p, x)})), (None, (values, doomed))]
        if op.name == "vl":
            return [((p, x) in links, state)]
        if op.name == "wsc":
            if (p, x) in links:
                new_values = values[:x] + (op.args[1],) + values[x + 1:]
                return [(True, (new_values, frozenset(l for l in links if l[1] != x)))]
            return [(False, (values, links - {(p, x)}))]
        self._unknown(op)

    def history_violations(self, ops):
        out = []
        for op in ops:
            if op.name != "wll" or op.pending or op.result is not None:
                continue
            if not any(_overlapping_success(op, other) for other in ops):
                out.append((op.index, "empty wll with no overlapping successful wsc"))
        return out


def _overlapping_success(op: Operation, other: Operation) -> bool:
    if other.name != "wsc" or other.args[0] != op.args[0]:
        return False
    if not other.pending and other.result is not True:
        return False
    ends_after = other.responded is None or other.responded > op.invoked
    return other.invoked < op.responded and ends_after


class LLSCSpec(SequentialSpec):
    """Full LL/SC with handles: links are ``(proc, slot, object)`` triples."""

    name = "llsc"

    def __init__(self, objects: int = 1, width: int = 1, initial: Optional[Sequence] = None):
        self._values = _initial_values(objects, width, initial)

    def initial(self):
        return (self._values, frozenset())

    def outcomes(self, state, op):
        values, links = state
        p, x = op.proc, op.args[0]
        if op.name == "ll":
            slot = op.result[1] if op.result is not None else -1
            return [((values[x], slot), (values, links | {(p, slot, x)}))]
        slot = op.args[-1]
        link = (p, slot, x)
        if op.name == "vl":
            return [(link in links, state)]
        if op.name == "cl":
            return [(None, (values, links - {link}))]
        if op.name == "sc":
            if link in links:
                new_values = values[:x] + (op.args[1],) + values[x + 1:]
                return [(True, (new_values, frozenset(l for l in links if l[2] != x)))]
            return [(False, (values, links - {link}))]
        self._unknown(op)


class DestinationSpec(SequentialSpec):
    """Single-writer register that can copy a source word; state is ``(destination, source)``."""

    name = "destination"

    def __init__(self, initial: int = 0, source: int = 0):
        self._initial = (initial, source)

    def initial(self):
        return self._initial

    def outcomes(self, state, op):
        dst, src = state
        if op.name == "read":
            return [(dst, state)]
        if op.name == "write":
            return [(None, (op.args[0], src))]
        if op.name == "swcopy":
            return [(None, (src, src))]
        if op.name == "src_read":
            return [(src, state)]
        if op.name == "src_write":
            return [(None, (dst, op.args[0]))]
        if op.name == "src_cas":
            expected, desired = op.args
            return [(True, (dst, desired))] if src == expected else [(False, state)]
        self._unknown(op)


class CounterSpec(SequentialSpec):
    name = "counter"

    def __init__(self, initial: int = 0):
        self._initial = initial

    def initial(self):
        return self._initial

    def outcomes(self, state, op):
        if op.name == "increment":
            return [(state + 1, state + 1)]
        if op.name == "read":
            return [(state, state)]
        self._unknown(op)


class StackSpec(SequentialSpec):
    name = "stack"

    def initial(self):
        return ()

    def outcomes(self, state, op):
        if op.name == "push":
            return [(None, state + (op.args[0],))]
        if op.name == "pop":
            return [(state[-1], state[:-1])] if state else [(None, state)]
        self._unknown(op)


SPECS = {
    spec.name: spec for spec in (RegisterSpec, WeakLLSCSpec, LLSCSpec, DestinationSpec, CounterSpec, StackSpec)
}


def make_spec(name: str, **kwargs) -> SequentialSpec:
    try:
        return SPECS[name](**kwargs)
    except KeyError:
        raise HistoryError(f"Unknown specification {name!r}; choose from {', '.join(sorted(SPECS))}") from None


# ---------------------------------------------------------------------------
# Checker
# ---------------------------------------------------------------------------


def check_linearizable(
    history: Union[Sequence[HistoryEvent], Sequence[Operation]],
    spec: SequentialSpec,
    max_ops: int = DEFAULT_MAX_OPS,
) -> Verdict:
    ops = list(history) if history and isinstance(history[0], Operation) else operations_from_history(history)
    if len(ops) > max_ops:
        raise HistoryError(f"History has {len(ops)} operations; the checker handles at most {max_ops}")
    described = [op.describe() for op in ops]

    flagged = spec.history_violations(ops)
    if flagged:
        return Verdict(
            linearizable=False,
            violating=[i for i, _ in flagged],
            operations=described,
            reason="; ".join(f"{described[i]}: {why}" for i, why in flagged),
        )

    by_invoke = sorted(ops, key=lambda op: op.invoked)
    required = 0
    for op in ops:
        if not op.pending:
            required |= 1 << op.index
    failed = set()
    path: List[int] = []
    deepest: List[int] = []
    stuck: List[int] = []

    def search(done: int, state: Hashable) -> bool:
        nonlocal deepest, stuck
        if done & required == required:
            return True
        if (done, state) in failed:
            return False
        horizon = min(op.responded for op in ops if not op.pending and not done >> op.index & 1)
        candidates = []
        for op in by_invoke:
            if op.invoked > horizon:
                break
            if done >> op.index & 1:
                continue
            candidates.append(op.index)
            for result, nxt in spec.outcomes(state, op):
                if not op.pending and result != op.result:
                    continue
                path.append(op.index)
                if search(done | 1 << op.index, nxt):
                    return True
                path.pop()
        failed.add((done, state))
        if len(path) > len(deepest) or not stuck:
            deepest, stuck = list(path), candidates
        return False

    if search(0, spec.initial()):
        return Verdict(linearizable=True, witness=list(path), operations=described)
    return Verdict(
        linearizable=False,
        witness=deepest,
        violating=stuck,
        operations=described,
        reason="no operation can follow " + (", ".join(described[i] for i in deepest) or "the initial state"),
    )


# ---------------------------------------------------------------------------
# Step-log audits
# ---------------------------------------------------------------------------


def _apply(cells: List[int], step: tuple) -> None:
    _seq, _proc, c, kind, args, result, _copy = step
    if kind == StepKind.WRITE.value:
        cells[c] = args[0]
    elif kind == StepKind.CAS.value and result:
        cells[c] = args[1]


def announcement_violations(execution: Execution, layout: WeakLayout) -> List[str]:
    """A buffer a process found installed and announced must not be reinitialized until it re-announces."""
    cells = list(execution.initial)
    protected: Dict[int, int] = {}
    out = []
    for step in execution.steps:
        seq, proc, c, kind, args, result, copy = step
        _apply(cells, step)
        if kind == StepKind.READ.value and layout.is_buf(c):
            if result != NIL and cells[layout.ann_cell(proc)] == result:
                protected[proc] = result
        elif kind == StepKind.WRITE.value:
            if layout.is_ann(c):
                protected.pop(c - layout.ann_base, None)
            elif copy:
                b = layout.payload_owner(c)
                holders = [p for p, held in protected.items() if held == b]
                if b is not None and holders:
                    out.append(f"step {seq}: process {proc} reinitialized buffer {b} protected by {holders}")
    return out


def src_window_violations(execution: Execution, layout: DestinationLayout) -> List[str]:
    """The src word is set only by the owner's swcopy and cleared exactly once before that swcopy returns."""
    data = layout.data
    cells = list(execution.initial)
    owners = layout.owners
    in_swcopy: Dict[int, bool] = {}
    target: Dict[int, int] = {}
    open_ = [False] * data.objects
    completed = [False] * data.objects
    out = []
    events = sorted([(s[0], 0, s) for s in execution.steps] + [(n[0], 1, n) for n in execution.notes])
    for seq, is_note, item in events:
        if is_note:
            _seq, proc, kind, payload = item
            if payload != "swcopy" or kind not in ("enter", "exit"):
                continue
            if kind == "enter":
                in_swcopy[proc] = True
                continue
            in_swcopy[proc] = False
            x = target.pop(proc, None)
            if x is None:
                out.append(f"seq {seq}: swcopy by process {proc} never published its source")
                continue
            if open_[x]:
                out.append(f"seq {seq}: swcopy on destination {x} returned with src still set")
            elif not completed[x]:
                out.append(f"seq {seq}: swcopy on destination {x} had no completer")
            completed[x] = False
            continue
        _apply(cells, item)
        _s, proc, c, kind, args, result, _copy = item
        if kind != StepKind.CAS.value or not result or not data.is_buf(c):
            continue
        x = c - data.buf_base
        src = cells[layout.src_cell(args[1])]
        owner = owners[x]
        if src != NIL:
            if proc != owner or not in_swcopy.get(owner):
                out.append(f"seq {seq}: process {proc} set src of destination {x} outside a swcopy")
            if open_[x] or completed[x]:
                out.append(f"seq {seq}: src of destination {x} changed more than twice in one swcopy")
            open_[x] = True
            target[owner] = x
        elif open_[x]:
            open_[x] = False
            completed[x] = True
        elif completed[x] and in_swcopy.get(owner):
            out.append(f"seq {seq}: destination {x} had a second completer")
    return out


# ---------------------------------------------------------------------------
# Exploration
# ---------------------------------------------------------------------------


def _history_key(events: Sequence[HistoryEvent]) -> Tuple:
    return tuple((e.proc, e.kind.value, e.op, freeze(e.args), freeze(e.result)) for e in events)


def explore_and_check(
    scenario,
    strategy: Strategy = Strategy.EXHAUSTIVE,
    budget: Optional[int] = None,
    *,
    seed: int = 0,
    preemption_bound: Optional[int] = None,
    schedule: Optional[Sequence[Segment]] = None,
    max_ops: int = DEFAULT_MAX_OPS,
) -> VerificationReport:
    """Run ``scenario`` under the scheduler and check every explored execution.

    ``scenario`` provides ``name``, ``spec``, ``build(memory)`` returning
    ``(programs, context)`` and ``invariants(execution)`` returning
    ``(kind, detail)`` pairs. An exception raised by a program ends that
    interleaving and is reported as an ``exception`` violation.
    """
    counter = StepCounter()
    scheduler = Scheduler(
        scenario.build,
        strategy=strategy,
        budget=budget,
        seed=seed,
        preemption_bound=preemption_bound,
        schedule=schedule,
        counter=counter,
    )
    report = VerificationReport(
        scenario=scenario.name,
        strategy=scheduler.strategy,
        seed=seed,
        budget=scheduler.budget,
        preemption_bound=preemption_bound,
    )
    verdicts: Dict[Tuple, Verdict] = {}

    def flag(execution: Execution, kind: str, detail: str, history: Sequence[HistoryEvent] = ()) -> None:
        report.violations_total += 1
        report.violation_kinds[kind] = report.violation_kinds.get(kind, 0) + 1
        if len(report.violations) < MAX_REPORTED_VIOLATIONS:
            report.violations.append(
                Violation(execution=execution.index, kind=kind, detail=detail, schedule=execution.schedule, history=list(history))
            )

    for execution in scheduler.executions():
        history = history_from_notes(execution.notes)
        key = _history_key(history)
        verdict = verdicts.get(key)
        if verdict is None:
            verdict = verdicts[key] = check_linearizable(history, scenario.spec, max_ops=max_ops)
        if not verdict.linearizable:
            flag(execution, "linearizability", verdict.reason, history)
        if execution.status is ExecutionStatus.ERROR:
            flag(execution, "exception", execution.error, history)
        elif execution.status is ExecutionStatus.COMPLETE:
            for kind, detail in scenario.invariants(execution):
                flag(execution, kind, detail)

    report.interleavings = scheduler.interleavings
    report.truncated = scheduler.truncated
    report.step_limited = scheduler.step_limited
    report.errored = scheduler.errored
    report.distinct_histories = len(verdicts)
    report.op_stats = counter.merged()
    if report.violations_total:
        logger.warning(f"{scenario.name}: {report.violations_total} violations over {report.interleavings} interleavings")
    else:
        logger.info(f"{scenario.name}: {report.interleavings} interleavings, {len(verdicts)} distinct histories, no violations")
    return report
