"""
Single-writer atomic copy.

A Destination holds one word. Its owner may ``write`` a value or ``swcopy``
the current contents of any readable source cell into it; any process may
``read`` it. Internally each Destination is a two-word weak LL/SC value
``(val, src)`` plus an ``old`` word. While a swcopy is in flight ``src``
names the source cell, and readers that notice it help finish the copy.
"""

import logging
import threading
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

from pydantic import BaseModel

from .buffer_pool import PoolMode
from .memcell import NIL, WORD_MASK, Memory, Program, cell_read, cell_write, operation
from .weak_llsc import Mutation, WeakLayout, WeakLLSCFamily

logger = logging.getLogger("Destination")

# Reserved word for the never-written value; distinct from NIL.
BOTTOM = WORD_MASK - 1


class OwnershipError(PermissionError):
    pass


class DestinationAudit(BaseModel):
    owner_failures: int = 0
    helped_copies: int = 0
    fallback_reads: int = 0


@dataclass(frozen=True)
class DestinationLayout:
    data: WeakLayout
    old_base: int
    owners: List[int]

    def src_cell(self, b: int) -> int:
        """Payload cell holding the ``src`` word of buffer ``b``."""
        return self.data.val_base + b * self.data.width + 1


class DestinationFamily:
    def __init__(
        self,
        memory: Memory,
        owners: Sequence[int],
        num_processes: int,
        initial: int = BOTTOM,
        mode: PoolMode = PoolMode.DEAMORTIZED,
        scan_budget: Optional[int] = None,
        mutations: Iterable[Mutation] = (),
    ):
        start = memory.size
        self.memory = memory
        self.owners = list(owners)
        for owner in self.owners:
            if not 0 <= owner < num_processes:
                raise OwnershipError(f"Owner {owner} is not one of the {num_processes} processes")
        self.mutations = frozenset(Mutation(m) for m in mutations)
        self.data = WeakLLSCFamily(
            memory,
            len(self.owners),
            num_processes,
            width=2,
            initial_values=[(initial, NIL)] * len(self.owners),
            mode=mode,
            scan_budget=scan_budget,
            mutations=self.mutations & {Mutation.SKIP_RECHECK},
        )
        self.old_base = memory.alloc(len(self.owners), initial)
        self.allocated_words = memory.size - start
        self.audit = DestinationAudit()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.owners)

    def _require_owner(self, d: int, p: int, what: str) -> None:
        if self.owners[d] != p:
            logger.error(f"Process {p} attempted {what} on destination {d} owned by {self.owners[d]}")
            raise OwnershipError(f"Only process {self.owners[d]} may {what} destination {d}")

    def _owner_failure(self, d: int, p: int, step: str) -> None:
        with self._lock:
            self.audit.owner_failures += 1
        logger.error(f"Owner {p} saw its {step} fail on destination {d}")

    @operation("dst_write")
    def write(self, d: int, p: int, v: int) -> Program:
        self._require_owner(d, p, "write")
        r = yield from self.data.wll(d, p)
        if r.ok:
            yield cell_write(self.old_base + d, r.value[0])
        else:
            self._owner_failure(d, p, "wll")
        if not (yield from self.data.wsc(d, p, (v, NIL))):
            self._owner_failure(d, p, "wsc")

    @operation("swcopy")
    def swcopy(self, d: int, p: int, src: int) -> Program:
        self._require_owner(d, p, "swcopy")
        r = yield from self.data.wll(d, p)
        if r.ok:
            current = r.value[0]
            yield cell_write(self.old_base + d, current)
        else:
            current = BOTTOM
            self._owner_failure(d, p, "wll")
        if not (yield from self.data.wsc(d, p, (current, src))):
            self._owner_failure(d, p, "wsc")
        v = yield cell_read(src)
        r = yield from self.data.wll(d, p)
        if r.ok and r.value[1] != NIL:
            # A helping reader may have finished already; failure here is expected.
            yield from self.data.wsc(d, p, (v, NIL))

    @operation("dst_read")
    def read(self, d: int, p: int) -> Program:
        r = yield from self.data.wll(d, p)
        if not r.ok:
            r = yield from self.data.wll(d, p)
            if not r.ok:
                return (yield from self._fallback(d))
        val, src = r.value
        if src == NIL:
            return val
        v = yield cell_read(src)
        if Mutation.SKIP_HELP in self.mutations:
            return v
        if (yield from self.data.wsc(d, p, (v, NIL))):
            with self._lock:
                self.audit.helped_copies += 1
            return v
        r = yield from self.data.wll(d, p)
        if r.ok and r.value[1] == NIL:
            return r.value[0]
        return (yield from self._fallback(d))

    def _fallback(self, d: int) -> Program:
        with self._lock:
            self.audit.fallback_reads += 1
        return (yield cell_read(self.old_base + d))

    # -- audits --------------------------------------------------------------

    def layout(self) -> DestinationLayout:
        return DestinationLayout(data=self.data.layout(), old_base=self.old_base, owners=list(self.owners))

    def value_of(self, d: int) -> int:
        return self.data.value_of(d)[0]

    def src_of(self, d: int) -> int:
        return self.data.value_of(d)[1]

    def check_single_state(self) -> List[str]:
        return self.data.check_single_state()
