import logging
import random
import threading
import time
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, Field, model_validator

from .buffer_pool import BufferPool, PoolMode, default_scan_budget, make_pool_config
from .derived_structures import LLSCCounter, LLSCStack
from .lin_harness import VerificationReport, explore_and_check
from .llsc import SPACE_CONSTANT, LLSCFamily
from .memcell import (
    NIL,
    HardwareMemory,
    Memory,
    OpStats,
    Program,
    Scheduler,
    StepCounter,
    Strategy,
    cell_read,
)
from .scenarios import IMPLS, build_scenario
from .swcopy import DestinationFamily
from .weak_llsc import Mutation, WeakLLSCFamily

logger = logging.getLogger("Bench")

# Documented worst-case shared steps per operation, with weak primitives
# counted as one step and reclamation scans accounted separately.
STEP_BOUNDS: Dict[str, int] = {
    "wll": 5,
    "vl": 2,
    "wsc": 8,
    "dst_read": 10,
    "dst_write": 5,
    "swcopy": 8,
    "ll": 10,
    "llsc_vl": 11,
    "sc": 16,
    "cl": 5,
}

DEFAULT_MIX: Dict[str, Dict[str, float]] = {
    "weakllsc": {"wsc": 0.8, "vl": 0.2},
    "llsc": {"sc": 0.7, "vl": 0.2, "cl": 0.1},
    "swcopy": {"read": 0.6, "write": 0.2, "swcopy": 0.2},
    "counter": {"increment": 1.0},
    "stack": {"push": 0.5, "pop": 0.5},
}


class Backend(str, Enum):
    HW = "hw"
    SIM = "sim"


class BenchConfig(BaseModel):
    impl: str = "llsc"
    backend: Backend = Backend.HW
    threads: int = Field(default=1, ge=1)
    objects: int = Field(default=1, ge=1)
    width: int = Field(default=1, ge=1)
    outstanding: int = Field(default=1, ge=1)
    ops: int = Field(default=1000, ge=1)
    duration_s: Optional[float] = Field(default=None, gt=0)
    mix: Optional[Dict[str, float]] = None
    seed: int = 0
    mode: PoolMode = PoolMode.DEAMORTIZED
    scan_budget: Optional[int] = Field(default=None, ge=1)
    strategy: Strategy = Strategy.EXHAUSTIVE
    budget: Optional[int] = Field(default=None, ge=1)
    preemption_bound: Optional[int] = Field(default=None, ge=0)
    mutations: List[Mutation] = []

    @model_validator(mode="after")
    def check_impl_and_mix(self) -> "BenchConfig":
        if self.impl == "destination":
            self.impl = "swcopy"
        if self.impl not in IMPLS:
            raise ValueError(f"impl must be one of {', '.join(IMPLS)}")
        if self.mix is None:
            self.mix = dict(DEFAULT_MIX[self.impl])
        unknown = set(self.mix) - set(DEFAULT_MIX[self.impl])
        if unknown:
            raise ValueError(f"mix keys {sorted(unknown)} do not apply to {self.impl}")
        if any(r < 0 for r in self.mix.values()) or abs(sum(self.mix.values()) - 1.0) > 1e-9:
            raise ValueError("mix ratios must be non-negative and sum to 1")
        return self


class BenchReport(BaseModel):
    config: BenchConfig
    completed_ops: int = 0
    per_thread_ops: List[int] = []
    elapsed_s: Optional[float] = None
    ops_per_sec: Optional[float] = None
    op_stats: Dict[str, OpStats] = {}
    step_bound_violations: List[str] = []
    pool: Optional[dict] = None
    shared_words: int = 0
    allocations_after_init: int = 0
    violations: List[str] = []
    verification: Optional[VerificationReport] = None

    @property
    def ok(self) -> bool:
        return not self.violations


def _pick(rng: random.Random, mix: Dict[str, float]) -> str:
    r = rng.random()
    acc = 0.0
    for key in sorted(mix):
        acc += mix[key]
        if r < acc:
            return key
    return max(mix, key=mix.get)


def _bump(value: Tuple[int, ...]) -> Tuple[int, ...]:
    return tuple((v + 1) & 0xFFFF_FFFF for v in value)


class _Workload:
    """One library family plus the transaction a benchmark thread repeats."""

    def __init__(self, memory: Memory, cfg: BenchConfig, ops_per_thread: Sequence[int]):
        self.memory = memory
        self.cfg = cfg
        self.completed = [0] * cfg.threads
        self.pushes = 0
        self.nonempty_pops = 0
        self._lock = threading.Lock()
        M, P, L, k = cfg.objects, cfg.threads, cfg.width, cfg.outstanding
        common = {"mode": cfg.mode, "scan_budget": cfg.scan_budget}
        if cfg.impl == "weakllsc":
            self.family = WeakLLSCFamily(memory, M, P, width=L, mutations=cfg.mutations, **common)
        elif cfg.impl == "llsc":
            self.family = LLSCFamily(memory, M, P, outstanding=k, width=L, mutations=cfg.mutations, **common)
        elif cfg.impl == "swcopy":
            self.family = DestinationFamily(memory, owners=list(range(P)), num_processes=P, mutations=cfg.mutations, **common)
            self.sources = memory.alloc(M, 0)
            for i in range(M):
                memory.poke(self.sources + i, 1000 + i)
        elif cfg.impl == "counter":
            self.family = LLSCCounter(memory, P, **common)
        else:
            self.family = LLSCStack(memory, P, nodes_per_process=max(ops_per_thread) + 1, **common)

    @property
    def pool(self) -> Optional[BufferPool]:
        family = self.family
        if isinstance(family, LLSCCounter):
            return family.llsc.pool
        if isinstance(family, LLSCStack):
            return family.head.pool
        if isinstance(family, DestinationFamily):
            return family.data.pool
        return family.pool

    def transaction(self, p: int, rng: random.Random) -> Program:
        cfg, family = self.cfg, self.family
        kind = _pick(rng, cfg.mix)
        if cfg.impl == "weakllsc":
            x = rng.randrange(cfg.objects)
            r = yield from family.wll(x, p)
            if r.ok:
                if kind == "vl":
                    yield from family.vl(x, p)
                yield from family.wsc(x, p, _bump(r.value))
        elif cfg.impl == "llsc":
            x = rng.randrange(cfg.objects)
            value, h = yield from family.ll(x, p)
            if kind == "cl":
                yield from family.cl(x, p, h)
            else:
                if kind == "vl":
                    yield from family.vl(x, p, h)
                yield from family.sc(x, p, _bump(value), h)
        elif cfg.impl == "swcopy":
            if kind == "read":
                yield from family.read(rng.randrange(cfg.threads), p)
            elif kind == "write":
                yield from family.write(p, p, rng.randrange(1 << 16))
            else:
                yield from family.swcopy(p, p, self.sources + rng.randrange(cfg.objects))
        elif cfg.impl == "counter":
            yield from family.increment(p)
        elif kind == "push":
            yield from family.push(p, rng.randrange(1 << 16))
            with self._lock:
                self.pushes += 1
        else:
            got = yield from family.pop(p)
            if got is not None:
                with self._lock:
                    self.nonempty_pops += 1

    def audit(self) -> List[str]:
        family = self.family
        out: List[str] = []
        if isinstance(family, LLSCCounter):
            out += family.llsc.check_single_state()
            total = sum(self.completed)
            if family.value() != total:
                out.append(f"counter holds {family.value()} after {total} increments")
        elif isinstance(family, LLSCStack):
            out += family.head.check_single_state()
            expected = self.pushes - self.nonempty_pops
            size = len(family.contents())
            if size != expected:
                out.append(f"stack holds {size} nodes, expected {expected}")
        else:
            out += family.check_single_state()
        if isinstance(family, LLSCFamily):
            out += family.check_slots()
            if family.announcements.audit.owner_failures:
                out.append(f"{family.announcements.audit.owner_failures} announcement owner failures")
        if isinstance(family, DestinationFamily) and family.audit.owner_failures:
            out.append(f"{family.audit.owner_failures} destination owner failures")
        pool_audit = self.pool.audit
        if pool_audit.empty_events:
            out.append(f"{pool_audit.empty_events} empty free-list events")
        if pool_audit.retire_errors:
            out.append(f"{pool_audit.retire_errors} invalid retires")
        return out


def _split(total: int, parts: int) -> List[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def check_step_bounds(stats: Dict[str, OpStats], bounds: Dict[str, int] = STEP_BOUNDS) -> List[str]:
    return [
        f"{label}: {stats[label].max_units} steps exceeds bound {bound}"
        for label, bound in bounds.items()
        if label in stats and stats[label].max_units > bound
    ]


def run_bench(cfg: BenchConfig) -> BenchReport:
    """Run a benchmark (hardware backend) or a verification sweep (simulated backend)."""
    if cfg.backend is Backend.SIM:
        return _run_sim(cfg)

    counter = StepCounter()
    memory = HardwareMemory(counter)
    quotas = _split(cfg.ops, cfg.threads)
    workload = _Workload(memory, cfg, quotas)
    memory.freeze()
    frozen_size = memory.size
    errors: List[str] = []
    deadline = None if cfg.duration_s is None else time.perf_counter() + cfg.duration_s

    def worker(p: int) -> None:
        rng = random.Random(cfg.seed * 7919 + p)
        try:
            while workload.completed[p] < quotas[p]:
                if deadline is not None and time.perf_counter() >= deadline:
                    break
                memory.run(p, workload.transaction(p, rng))
                workload.completed[p] += 1
        except Exception as e:
            logger.error(f"Worker {p} failed: {str(e)}")
            errors.append(f"worker {p}: {type(e).__name__}: {e}")

    threads = [threading.Thread(target=worker, args=(p,), name=f"llsc-bench-{p}") for p in range(cfg.threads)]
    started = time.perf_counter()
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    elapsed = time.perf_counter() - started

    stats = counter.merged()
    report = BenchReport(
        config=cfg,
        completed_ops=sum(workload.completed),
        per_thread_ops=list(workload.completed),
        elapsed_s=round(elapsed, 6),
        ops_per_sec=round(sum(workload.completed) / elapsed, 2) if elapsed > 0 else None,
        op_stats=stats,
        step_bound_violations=check_step_bounds(stats),
        pool=workload.pool.snapshot_audit().model_dump(mode="json"),
        shared_words=frozen_size,
        allocations_after_init=memory.size - frozen_size,
    )
    report.violations = errors + workload.audit() + report.step_bound_violations
    if report.allocations_after_init:
        report.violations.append(f"{report.allocations_after_init} words allocated after initialization")
    logger.info(
        f"{cfg.impl}: {report.completed_ops} ops on {cfg.threads} threads in {elapsed:.3f}s "
        f"({report.ops_per_sec} ops/s), {len(report.violations)} violations"
    )
    return report


def _run_sim(cfg: BenchConfig) -> BenchReport:
    scenario = build_scenario(
        cfg.impl, procs=cfg.threads, k=cfg.outstanding, mutations=cfg.mutations, mode=cfg.mode, scan_budget=cfg.scan_budget
    )
    verification = explore_and_check(
        scenario, cfg.strategy, cfg.budget, seed=cfg.seed, preemption_bound=cfg.preemption_bound
    )
    report = BenchReport(
        config=cfg,
        completed_ops=verification.interleavings,
        op_stats=verification.op_stats,
        step_bound_violations=check_step_bounds(verification.op_stats),
        verification=verification,
    )
    report.violations = [f"{v.kind}: {v.detail}" for v in verification.violations] + report.step_bound_violations
    if verification.violations_total > len(verification.violations):
        report.violations.append(f"... {verification.violations_total - len(verification.violations)} more violations")
    return report


# ---------------------------------------------------------------------------
# Audits
# ---------------------------------------------------------------------------


class SetDifferenceAudit(BaseModel):
    instances: int = 0
    mismatches: int = 0
    pid_reset_failures: int = 0
    max_rlist: int = 0


class ScanAudit(BaseModel):
    mode: PoolMode
    processes: int
    outstanding: int
    scans: int = 0
    min_transferred: Optional[int] = None
    required: int = 0


class StepBoundRow(BaseModel):
    processes: int
    objects: int
    label: str
    max_units: int
    max_raw: int
    max_copies: int
    bound: Optional[int] = None


class SpaceRow(BaseModel):
    family: str
    objects: int
    processes: int
    outstanding: int
    width: int
    shared_words: int
    limit: int


class AuditReport(BaseModel):
    seed: int
    set_difference: SetDifferenceAudit
    scans: List[ScanAudit] = []
    step_bounds: List[StepBoundRow] = []
    max_scan_units: int = 0
    scan_budget: int = 0
    space: List[SpaceRow] = []
    violations: List[str] = []

    @property
    def ok(self) -> bool:
        return not self.violations


def audit_set_difference(instances: int, seed: int = 0) -> SetDifferenceAudit:
    """Compare the pid/seen set difference with a hash-set oracle on random inputs."""
    memory = HardwareMemory()
    cfg = make_pool_config(1, 8, 4, 1)
    pool = BufferPool(memory, cfg, 0, _no_announcements)
    memory.freeze()
    rng = random.Random(seed)
    audit = SetDifferenceAudit()
    for _ in range(instances):
        p = rng.randrange(cfg.processes)
        size = rng.randint(0, cfg.threshold)
        rlist = rng.sample(range(pool.size), size)
        reserved = rng.sample(rlist, min(size, rng.randint(0, cfg.outstanding * cfg.processes)))
        reserved += [rng.randrange(pool.size) for _ in range(rng.randint(0, 3))] + [NIL]
        rng.shuffle(reserved)
        got = memory.run(p, pool.set_difference(rlist, reserved, p))
        excluded = set(reserved)
        if got != [b for b in rlist if b not in excluded]:
            audit.mismatches += 1
        if any(memory.peek(pool.pid_cell(b)) != NIL for b in rlist):
            audit.pid_reset_failures += 1
        audit.instances += 1
        audit.max_rlist = max(audit.max_rlist, size)
    return audit


def _no_announcements(p: int, i: int) -> Program:
    return (yield cell_read(0))


def audit_scans(min_scans: int, processes: int, outstanding: int, mode: PoolMode, seed: int = 0) -> ScanAudit:
    """Run random LL/SC traffic until at least ``min_scans`` reclamation scans have completed."""
    holder: Dict[str, LLSCFamily] = {}

    def build(memory: Memory):
        family = LLSCFamily(memory, 1, processes, outstanding=outstanding, mode=mode)
        holder["family"] = family

        def program(p: int) -> Program:
            i = 0
            while family.pool.audit.scans < min_scans:
                value, h = yield from family.ll(0, p)
                yield from family.sc(0, p, ((value[0] + p + 1 + i) & 0xFFFF,), h)
                i += 1

        return {p: program(p) for p in range(processes)}, family

    scheduler = Scheduler(build, strategy=Strategy.RANDOM, budget=1, seed=seed, step_limit=50_000_000)
    for _ in scheduler.executions():
        pass
    audit = holder["family"].pool.audit
    return ScanAudit(
        mode=mode,
        processes=processes,
        outstanding=outstanding,
        scans=audit.scans,
        min_transferred=audit.min_transferred,
        required=outstanding * processes,
    )


def _grid_program(kind: str, memory: Memory, P: int, M: int, rounds: int, rng: random.Random):
    if kind == "weakllsc":
        family = WeakLLSCFamily(memory, M, P)

        def program(p: int) -> Program:
            for _ in range(rounds):
                x = rng.randrange(M)
                r = yield from family.wll(x, p)
                if r.ok:
                    yield from family.vl(x, p)
                    yield from family.wsc(x, p, _bump(r.value))
    elif kind == "llsc":
        family = LLSCFamily(memory, M, P)

        def program(p: int) -> Program:
            for i in range(rounds):
                x = rng.randrange(M)
                value, h = yield from family.ll(x, p)
                yield from family.vl(x, p, h)
                if i % 4 == 3:
                    yield from family.cl(x, p, h)
                else:
                    yield from family.sc(x, p, _bump(value), h)
    else:
        family = DestinationFamily(memory, owners=[p % P for p in range(M)], num_processes=P)
        src = memory.alloc(1, 7)

        def program(p: int) -> Program:
            for i in range(rounds):
                d = rng.randrange(M)
                if family.owners[d] != p:
                    yield from family.read(d, p)
                elif i % 2:
                    yield from family.swcopy(d, p, src)
                else:
                    yield from family.write(d, p, i)
    return {p: program(p) for p in range(P)}, family


def audit_step_bounds(
    processes: Sequence[int], objects: Sequence[int], rounds: Optional[int] = None, seed: int = 0
) -> Tuple[List[StepBoundRow], int]:
    """Max instrumented steps per operation over a P x M grid of random simulated runs."""
    rows: List[StepBoundRow] = []
    max_scan_units = 0
    for P in processes:
        for M in objects:
            counter = StepCounter()
            for kind in ("weakllsc", "swcopy", "llsc"):
                n = rounds if rounds is not None else 2 * P + 2
                rng = random.Random(seed * 31 + P * 1009 + M)
                families = []

                def build(memory: Memory, kind=kind, n=n, rng=rng):
                    programs, family = _grid_program(kind, memory, P, M, n, rng)
                    families.append(family)
                    return programs, family

                for _ in Scheduler(build, strategy=Strategy.RANDOM, budget=1, seed=seed, counter=counter).executions():
                    pass
                for family in families:
                    pool = family.data.pool if isinstance(family, DestinationFamily) else family.pool
                    max_scan_units = max(max_scan_units, pool.audit.max_scan_units)
            for label, stats in counter.merged().items():
                rows.append(
                    StepBoundRow(
                        processes=P,
                        objects=M,
                        label=label,
                        max_units=stats.max_units,
                        max_raw=stats.max_raw,
                        max_copies=stats.max_copies,
                        bound=STEP_BOUNDS.get(label),
                    )
                )
    return rows, max_scan_units


def audit_space(
    processes: Sequence[int] = (1, 2, 4, 8), objects: Sequence[int] = (1, 16, 256), outstanding: Sequence[int] = (1, 2), widths: Sequence[int] = (1, 4)
) -> List[SpaceRow]:
    rows = []
    for P in processes:
        for M in objects:
            for L in widths:
                memory = HardwareMemory()
                weak = WeakLLSCFamily(memory, M, P, width=L)
                rows.append(
                    SpaceRow(
                        family="weakllsc", objects=M, processes=P, outstanding=1, width=L,
                        shared_words=weak.allocated_words, limit=SPACE_CONSTANT * (M + P * P) * L,
                    )
                )
                for k in outstanding:
                    family = LLSCFamily(HardwareMemory(), M, P, outstanding=k, width=L)
                    rows.append(
                        SpaceRow(
                            family="llsc", objects=M, processes=P, outstanding=k, width=L,
                            shared_words=family.allocated_words, limit=family.space_limit(),
                        )
                    )
    return rows


def run_audit(
    instances: int = 10_000,
    min_scans: int = 100,
    processes: Sequence[int] = (1, 2, 4, 8),
    objects: Sequence[int] = (1, 16, 256),
    rounds: Optional[int] = None,
    seed: int = 0,
) -> AuditReport:
    """Set-difference oracle, scan lower bound, step bounds and space bounds in one report."""
    report = AuditReport(seed=seed, set_difference=audit_set_difference(instances, seed), scan_budget=default_scan_budget())
    sd = report.set_difference
    if sd.mismatches or sd.pid_reset_failures:
        report.violations.append(f"set difference: {sd.mismatches} mismatches, {sd.pid_reset_failures} pid reset failures")

    for mode in (PoolMode.AMORTIZED, PoolMode.DEAMORTIZED):
        for P, k in ((2, 1), (2, 2), (3, 1)):
            scan = audit_scans(min_scans, P, k, mode, seed)
            report.scans.append(scan)
            if scan.scans < min_scans:
                report.violations.append(f"{mode.value} P={P} k={k}: only {scan.scans} scans completed")
            if scan.min_transferred is not None and scan.min_transferred < scan.required:
                report.violations.append(
                    f"{mode.value} P={P} k={k}: a scan transferred {scan.min_transferred} < {scan.required} buffers"
                )

    report.step_bounds, report.max_scan_units = audit_step_bounds(processes, objects, rounds, seed)
    for row in report.step_bounds:
        if row.bound is not None and row.max_units > row.bound:
            report.violations.append(f"P={row.processes} M={row.objects} {row.label}: {row.max_units} > {row.bound}")
    if report.max_scan_units > report.scan_budget:
        report.violations.append(f"scan step did {report.max_scan_units} units, budget {report.scan_budget}")

    report.space = audit_space(processes, objects)
    for row in report.space:
        if row.shared_words > row.limit:
            report.violations.append(
                f"{row.family} M={row.objects} P={row.processes} k={row.outstanding} L={row.width}: "
                f"{row.shared_words} words > {row.limit}"
            )
    if report.violations:
        logger.warning(f"Audit found {len(report.violations)} violations")
    else:
        logger.info("Audit passed")
    return report
