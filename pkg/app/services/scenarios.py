from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from .buffer_pool import PoolMode, make_pool_config
from .derived_structures import LLSCCounter, LLSCStack
from .lin_harness import (
    CounterSpec,
    DestinationSpec,
    LLSCSpec,
    SequentialSpec,
    StackSpec,
    WeakLLSCSpec,
    announcement_violations,
    recorded,
    src_window_violations,
)
from .llsc import LLSCFamily
from .memcell import Execution, Memory, Program, Segment, cell_cas
from .swcopy import BOTTOM, DestinationFamily
from .weak_llsc import Mutation, WeakLLSCFamily

Finding = Tuple[str, str]


def _state_findings(violations: Iterable[str], kind: str = "single-state") -> List[Finding]:
    return [(kind, v) for v in violations]


def _destination_findings(family: DestinationFamily, execution: Execution) -> List[Finding]:
    layout = family.layout()
    findings = _state_findings(announcement_violations(execution, layout.data), "announcement")
    findings += _state_findings(src_window_violations(execution, layout), "src-window")
    if family.audit.owner_failures:
        findings.append(("owner-failure", f"{family.audit.owner_failures} owner wll/wsc failures"))
    return findings


@dataclass
class WeakLLSCScenario:
    """Each process runs ``rounds`` of wll then (if it got a value) wsc on object 0."""

    processes: int = 2
    rounds: Union[int, Sequence[int]] = 1
    with_vl: bool = False
    mode: PoolMode = PoolMode.DEAMORTIZED
    scan_budget: Optional[int] = None
    mutations: Sequence[Mutation] = ()
    name: str = "weakllsc"

    @property
    def spec(self) -> SequentialSpec:
        return WeakLLSCSpec(objects=1, width=1)

    def _rounds(self, p: int) -> int:
        return self.rounds if isinstance(self.rounds, int) else self.rounds[p]

    def build(self, memory: Memory):
        family = WeakLLSCFamily(
            memory, 1, self.processes, width=1, mode=self.mode, scan_budget=self.scan_budget, mutations=self.mutations
        )

        def program(p: int) -> Program:
            for r in range(self._rounds(p)):
                got = yield from recorded("wll", [0], family.wll(0, p))
                if not got.ok:
                    continue
                if self.with_vl:
                    yield from recorded("vl", [0], family.vl(0, p))
                v = 100 * (p + 1) + r + 1
                yield from recorded("wsc", [0, [v]], family.wsc(0, p, (v,)))

        return {p: program(p) for p in range(self.processes)}, family

    def invariants(self, execution: Execution) -> List[Finding]:
        family: WeakLLSCFamily = execution.context
        findings = _state_findings(family.check_single_state())
        findings += _state_findings(announcement_violations(execution, family.layout()), "announcement")
        return findings


@dataclass
class RecycleScenario:
    """Directed run where process 0 reads buf, stalls, and announces a buffer process 1 has since freed.

    Process 1 retires the buffer process 0 saw, its scan frees it, and its
    last round reinstalls it. A wll that skips the re-read of buf then
    returns a stale value and the following wsc succeeds. Run it with
    ``Strategy.DIRECTED`` and ``schedule()``.
    """

    mutations: Sequence[Mutation] = ()
    name: str = "weakllsc-recycle"

    @property
    def threshold(self) -> int:
        return make_pool_config(1, 2).threshold

    @property
    def rounds(self) -> List[int]:
        # a scan frees the first retired buffer last-in, so it is reused in round 2T - 1
        return [1, 2 * self.threshold - 1]

    def _weak(self) -> WeakLLSCScenario:
        return WeakLLSCScenario(
            processes=2, rounds=self.rounds, mode=PoolMode.AMORTIZED, mutations=self.mutations, name=self.name
        )

    @property
    def spec(self) -> SequentialSpec:
        return self._weak().spec

    def build(self, memory: Memory):
        return self._weak().build(memory)

    def invariants(self, execution: Execution) -> List[Finding]:
        return self._weak().invariants(execution)

    def schedule(self) -> List[Segment]:
        t = self.threshold
        return [
            Segment(0, steps=1),
            Segment(1, ops=2 * t),
            Segment(0, ops=1),
            Segment(1, ops=2 * (t - 1)),
        ]


@dataclass
class DestinationScenario:
    """Owner 0 runs ``owner_ops`` on one Destination, readers read it, an optional mutator CASes the source 7 -> 8."""

    owner_ops: Sequence[Tuple] = (("write", 5), ("swcopy",))
    readers: int = 2
    reads_per_reader: int = 1
    mutator: bool = False
    source_initial: int = 7
    mode: PoolMode = PoolMode.DEAMORTIZED
    scan_budget: Optional[int] = None
    mutations: Sequence[Mutation] = ()
    name: str = "destination"

    @property
    def spec(self) -> SequentialSpec:
        return DestinationSpec(initial=BOTTOM, source=self.source_initial)

    def build(self, memory: Memory):
        P = 1 + self.readers
        family = DestinationFamily(
            memory, owners=[0], num_processes=P, mode=self.mode, scan_budget=self.scan_budget, mutations=self.mutations
        )
        src = memory.alloc(1, self.source_initial)

        def owner() -> Program:
            for op in self.owner_ops:
                if op[0] == "write":
                    yield from recorded("write", [op[1]], family.write(0, 0, op[1]))
                elif op[0] == "swcopy":
                    yield from recorded("swcopy", [], family.swcopy(0, 0, src))
                else:
                    yield from recorded("read", [], family.read(0, 0))

        def reader(p: int) -> Program:
            for _ in range(self.reads_per_reader):
                yield from recorded("read", [], family.read(0, p))

        def mutate() -> Program:
            yield from recorded("src_cas", [7, 8], _cas_program(src, 7, 8))

        programs = {0: owner()}
        for p in range(1, P):
            programs[p] = reader(p)
        if self.mutator:
            programs[P] = mutate()
        return programs, family

    def invariants(self, execution: Execution) -> List[Finding]:
        family: DestinationFamily = execution.context
        return _state_findings(family.check_single_state()) + _destination_findings(family, execution)


def _cas_program(c: int, expected: int, desired: int) -> Program:
    return (yield cell_cas(c, expected, desired))


@dataclass
class LLSCScenario:
    """Each process follows a script of ``ll``/``vl``/``sc``/``cl`` on object 0.

    ``vl``, ``sc`` and ``cl`` act on the most recent outstanding handle.
    """

    processes: int = 2
    outstanding: int = 1
    script: Sequence[str] = ("ll", "sc")
    mode: PoolMode = PoolMode.DEAMORTIZED
    scan_budget: Optional[int] = None
    mutations: Sequence[Mutation] = ()
    name: str = "llsc"

    @property
    def spec(self) -> SequentialSpec:
        return LLSCSpec(objects=1, width=1)

    def build(self, memory: Memory):
        family = LLSCFamily(
            memory,
            1,
            self.processes,
            outstanding=self.outstanding,
            mode=self.mode,
            scan_budget=self.scan_budget,
            mutations=self.mutations,
        )

        def program(p: int) -> Program:
            handles = []
            for i, action in enumerate(self.script):
                if action == "ll":
                    _value, h = yield from recorded("ll", [0], family.ll(0, p))
                    handles.append(h)
                elif action == "vl":
                    h = handles[-1]
                    yield from recorded("vl", [0, h.slot], family.vl(0, p, h))
                elif action == "sc":
                    h = handles.pop()
                    v = 100 * (p + 1) + i
                    yield from recorded("sc", [0, [v], h.slot], family.sc(0, p, (v,), h))
                elif action == "cl":
                    h = handles.pop()
                    yield from recorded("cl", [0, h.slot], family.cl(0, p, h))
                else:
                    raise ValueError(f"Unknown script action {action!r}")

        return {p: program(p) for p in range(self.processes)}, family

    def invariants(self, execution: Execution) -> List[Finding]:
        family: LLSCFamily = execution.context
        findings = _state_findings(family.check_single_state())
        findings += _state_findings(family.check_slots(), "slots")
        findings += _destination_findings(family.announcements, execution)
        return findings


@dataclass
class CounterScenario:
    processes: int = 2
    increments: int = 1
    name: str = "counter"

    @property
    def spec(self) -> SequentialSpec:
        return CounterSpec()

    def build(self, memory: Memory):
        counter = LLSCCounter(memory, self.processes)

        def program(p: int) -> Program:
            for _ in range(self.increments):
                yield from recorded("increment", [], counter.increment(p))

        return {p: program(p) for p in range(self.processes)}, counter

    def invariants(self, execution: Execution) -> List[Finding]:
        counter: LLSCCounter = execution.context
        findings = _state_findings(counter.llsc.check_single_state())
        expected = self.processes * self.increments
        if counter.value() != expected:
            findings.append(("conservation", f"counter is {counter.value()}, expected {expected}"))
        return findings


@dataclass
class StackScenario:
    """Pushers push their listed values; poppers pop ``pops`` times each."""

    pushes: Sequence[Sequence[int]] = ((1,), (2,))
    poppers: int = 1
    pops: int = 1
    name: str = "stack"

    @property
    def spec(self) -> SequentialSpec:
        return StackSpec()

    def build(self, memory: Memory):
        P = len(self.pushes) + self.poppers
        stack = LLSCStack(memory, P, nodes_per_process=max([len(v) for v in self.pushes] + [1]) + self.pops)

        def pusher(p: int) -> Program:
            for v in self.pushes[p]:
                yield from recorded("push", [v], stack.push(p, v))

        def popper(p: int) -> Program:
            for _ in range(self.pops):
                yield from recorded("pop", [], stack.pop(p))

        programs = {p: pusher(p) for p in range(len(self.pushes))}
        for p in range(len(self.pushes), P):
            programs[p] = popper(p)
        return programs, stack

    def invariants(self, execution: Execution) -> List[Finding]:
        stack: LLSCStack = execution.context
        return _state_findings(stack.head.check_single_state())


IMPLS = ("weakllsc", "llsc", "swcopy", "counter", "stack")
VARIANTS = ("default", "recycle")


def build_scenario(
    impl: str,
    procs: int = 2,
    k: int = 1,
    mutations: Sequence[Mutation] = (),
    mode: PoolMode = PoolMode.DEAMORTIZED,
    scan_budget: Optional[int] = None,
    variant: str = "default",
):
    """Verification scenario for an implementation name.

    ``variant="recycle"`` selects the directed buffer-recycling run for
    weakllsc; it fixes its own process count and pool mode.
    """
    if procs < 1:
        raise ValueError("procs must be at least 1")
    if variant not in VARIANTS:
        raise ValueError(f"Unknown scenario {variant!r}; choose from {', '.join(VARIANTS)}")
    if variant == "recycle":
        if impl != "weakllsc":
            raise ValueError(f"The recycle scenario drives weakllsc, not {impl}")
        return RecycleScenario(mutations=mutations)
    if impl == "weakllsc":
        return WeakLLSCScenario(processes=procs, mode=mode, scan_budget=scan_budget, mutations=mutations)
    if impl == "llsc":
        script = ("ll", "sc") if k == 1 else ("ll", "ll", "vl", "sc", "cl")
        return LLSCScenario(processes=procs, outstanding=k, script=script, mode=mode, scan_budget=scan_budget, mutations=mutations)
    if impl in ("swcopy", "destination"):
        # a lone reader races a source mutator; more readers race each other
        return DestinationScenario(
            owner_ops=(("write", 5), ("swcopy",), ("read",)),
            readers=max(1, procs - 1),
            reads_per_reader=2,
            mutator=procs <= 2,
            mode=mode,
            scan_budget=scan_budget,
            mutations=mutations,
        )
    if impl == "counter":
        return CounterScenario(processes=procs)
    if impl == "stack":
        return StackScenario(pushes=[(i + 1,) for i in range(max(1, procs - 1))], poppers=1)
    raise ValueError(f"Unknown implementation {impl!r}; choose from {', '.join(IMPLS)}")
