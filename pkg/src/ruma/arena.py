"""Size-class arena allocator with byte-granularity address randomization.

Every chunk is reserved ``pointer_width`` extra bytes and starts at a
uniformly random offset of 0..pointer_width-1 inside its slot, so chunk
addresses carry no predictable word alignment. Slot strides are powers of
two sized to the class reserve, so they divide the cache line (small
classes) or the page (medium classes): by construction no chunk whose
reserve fits a cache line spans a line border, and no chunk whose reserve
fits a page spans a page border. Requests too big for the class pools are
carved page-aligned from a separate region at the top of the arena, with
the random offset applied and no border handling beyond that.

Arenas come in two flavors. A simulation arena manages a purely virtual
address range and never touches real memory, which makes 32-bit address
space experiments cheap inside a 64-bit process. A backed arena
(``Arena(config, backed=True)``) additionally owns a contiguous byte
buffer and supports :meth:`Arena.write` / :meth:`Arena.read` through live
allocations.

Concurrency contract: an arena has a single logical owner. Operations on
one arena must be externally serialized; distinct arenas are fully
independent. Nothing here locks.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bsi import BSI_PERIOD, range_contains_bsi_counted
from .errors import AccessError, CapacityError, ConfigError, HandleError

__all__ = [
    "Allocation",
    "Arena",
    "ArenaConfig",
    "ArenaCounters",
    "LARGE_CLASS",
    "ReplayStats",
    "SizeClass",
    "build_class_table",
]

LARGE_CLASS = -1  # size_class_index of chunks served outside the class pools

_OFFSET_BATCH = 8192
_USER_SPACE_BITS = 47  # 64-bit base addresses are drawn below this, like user space


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


_BOOL_WORDS = {
    "true": True, "false": False, "on": True, "off": False,
    "yes": True, "no": False, "1": True, "0": False,
}


@dataclass(frozen=True)
class ArenaConfig:
    """Arena construction parameters.

    The same fields, with the same names, form the flat ``key=value``
    config file format accepted by :meth:`from_file`.
    """

    pointer_width: int = 8
    cache_line: int = 64
    page_size: int = 4096
    randomize: bool = True
    filter_bsi: bool = False
    address_space_bits: int = 64
    rng_seed: int = 1
    arena_capacity: int = 1 << 26

    def validate(self) -> None:
        if self.pointer_width not in (4, 8):
            raise ConfigError(f"pointer_width must be 4 or 8, got {self.pointer_width}")
        if not _is_pow2(self.cache_line):
            raise ConfigError(f"cache_line must be a power of two, got {self.cache_line}")
        if not _is_pow2(self.page_size):
            raise ConfigError(f"page_size must be a power of two, got {self.page_size}")
        if self.cache_line >= self.page_size:
            raise ConfigError(
                f"cache_line ({self.cache_line}) must be smaller than "
                f"page_size ({self.page_size})"
            )
        if self.address_space_bits not in (32, 64):
            raise ConfigError(
                f"address_space_bits must be 32 or 64, got {self.address_space_bits}"
            )
        if not 0 <= self.rng_seed < 1 << 64:
            raise ConfigError("rng_seed must fit in an unsigned 64-bit integer")
        if self.arena_capacity <= 0:
            raise ConfigError("arena_capacity must be positive")
        # Room is needed for a page-aligned base strictly inside the space.
        if self.arena_capacity + 2 * self.page_size > 1 << self.address_space_bits:
            raise ConfigError(
                f"arena_capacity {self.arena_capacity} does not fit a "
                f"{self.address_space_bits}-bit address space"
            )

    @classmethod
    def from_text(cls, text: str) -> "ArenaConfig":
        """Parse the flat key=value config format ('#' starts a comment)."""
        bool_keys = {"randomize", "filter_bsi"}
        known = {f for f in cls.__dataclass_fields__}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
            key, val = key.strip(), val.strip()
            if key not in known:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            if key in bool_keys:
                try:
                    values[key] = _BOOL_WORDS[val.lower()]
                except KeyError:
                    raise ConfigError(f"line {lineno}: bad boolean {val!r}") from None
            else:
                try:
                    values[key] = int(val, 0)
                except ValueError:
                    raise ConfigError(f"line {lineno}: bad integer {val!r}") from None
        return cls(**values)

    @classmethod
    def from_file(cls, path) -> "ArenaConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class SizeClass:
    max_size: int  # largest request served by this class
    stride: int  # slot spacing inside a run; a power of two
    slots_per_run: int  # runs are one page


def build_class_table(pointer_width: int, cache_line: int, page_size: int):
    """Build the geometric class ladder 16, 24, 32, 48, ... up to page_size/2.

    Each stride is the smallest power of two covering max_size plus the
    randomization pad, so it divides the cache line for small classes and
    the page for medium classes. Runs are page-aligned, which makes every
    slot border-free for its class by construction.
    """
    maxes = []
    base = 16
    half_page = page_size // 2
    while base <= half_page:
        maxes.append(base)
        if base + base // 2 <= half_page:
            maxes.append(base + base // 2)
        base *= 2
    table = []
    for m in maxes:
        stride = _next_pow2(m + pointer_width)
        table.append(SizeClass(m, stride, page_size // stride))
    return table


@dataclass(slots=True)
class Allocation:
    """One live chunk. ``start`` is the address handed to the caller."""

    id: int
    start: int
    requested: int
    reserved: int
    offset: int
    size_class_index: int


@dataclass
class ArenaCounters:
    """Cumulative event counters, kept since arena creation."""

    total_allocs: int = 0
    total_frees: int = 0
    total_reallocs: int = 0
    aligned_allocs: int = 0
    promotions: int = 0
    bsi_span_checks: int = 0
    bsi_candidates: int = 0
    bsi_quarantined: int = 0
    # Chunks whose size made a border guarantee apply but that straddled
    # anyway. Placement is structural, so these must stay at zero.
    line_rule_violations: int = 0
    page_rule_violations: int = 0


@dataclass
class ReplayStats:
    """Structured measurement output of :meth:`Arena.stats` and trace replay.

    ``offset_histogram`` counts the start offsets of every allocation ever
    made (length ``pointer_width``); straddle counts cover live chunks
    only. ``peak_reserved`` and ``size_histogram`` are filled by trace
    replay and omitted from the JSON dict otherwise.
    """

    live_bytes: int
    reserved_bytes: int
    overhead_ratio: float
    offset_histogram: list
    line_straddles: int
    page_straddles: int
    per_class: list
    promotions: int
    aligned_allocs: int
    peak_reserved: int | None = None
    size_histogram: list | None = None

    def as_dict(self) -> dict:
        out = {
            "live_bytes": self.live_bytes,
            "reserved_bytes": self.reserved_bytes,
            "overhead_ratio": self.overhead_ratio,
            "offset_histogram": list(self.offset_histogram),
            "line_straddles": self.line_straddles,
            "page_straddles": self.page_straddles,
            "per_class": [dict(c) for c in self.per_class],
            "promotions": self.promotions,
            "aligned_allocs": self.aligned_allocs,
        }
        if self.peak_reserved is not None:
            out["peak_reserved"] = self.peak_reserved
        if self.size_histogram is not None:
            out["histogram"] = [dict(b) for b in self.size_histogram]
        return out


class Arena:
    """Pooled allocator over one contiguous address range.

    Identical (config, seed, operation sequence) produce an identical
    address sequence; all randomness flows from one counter-based PRNG
    stream seeded with ``config.rng_seed``.
    """

    def __init__(self, config: ArenaConfig, *, backed: bool = False):
        config.validate()
        self._cfg = config
        self._table = build_class_table(
            config.pointer_width, config.cache_line, config.page_size
        )
        self._class_maxes = [c.max_size for c in self._table]
        self._rng = np.random.Generator(np.random.Philox(config.rng_seed))
        # The base is drawn before any offset so that randomize on/off runs
        # of the same seed share the exact same slot layout.
        self._base = self._pick_base()
        usable = (config.arena_capacity // config.page_size) * config.page_size
        self._end = self._base + usable
        self._run_bump = self._base  # class runs grow upward
        self._large_bump = self._end  # large carving grows downward
        n = len(self._table)
        self._free_slots = [[] for _ in range(n)]
        self._quarantine = [[] for _ in range(n)]
        self._large_free = {}  # span pages -> list of span bases
        self._large_quarantine = []  # (base, span_pages)
        self._live = {}
        self._next_id = 1
        self._offset_buf = None
        self._offset_pos = 0
        self._mem = bytearray(usable) if backed else None

        self.counters = ArenaCounters()
        self._live_bytes = 0
        self._reserved_bytes = 0
        self._peak_reserved = 0
        self._offset_hist = [0] * config.pointer_width
        self._line_straddles = 0
        self._page_straddles = 0
        self._class_live = [0] * n
        self._class_capacity = [0] * n

    # -- construction helpers -------------------------------------------

    def _pick_base(self) -> int:
        cfg = self._cfg
        space = 1 << min(cfg.address_space_bits, _USER_SPACE_BITS)
        if cfg.arena_capacity + 2 * cfg.page_size > space:
            space = 1 << cfg.address_space_bits
        top = space - cfg.arena_capacity - cfg.page_size
        pages = max(top // cfg.page_size, 1)
        return cfg.page_size * (1 + int(self._rng.integers(0, pages)))

    def _next_offset(self) -> int:
        if self._offset_buf is None or self._offset_pos >= len(self._offset_buf):
            self._offset_buf = self._rng.integers(
                0, self._cfg.pointer_width, size=_OFFSET_BATCH, dtype=np.int64
            )
            self._offset_pos = 0
        off = int(self._offset_buf[self._offset_pos])
        self._offset_pos += 1
        return off

    # -- class/placement machinery --------------------------------------

    @property
    def config(self) -> ArenaConfig:
        return self._cfg

    @property
    def base(self) -> int:
        return self._base

    @property
    def size_class_table(self):
        return list(self._table)

    @property
    def peak_reserved(self) -> int:
        return self._peak_reserved

    def class_index_for(self, size: int) -> int:
        """Class pool serving ``size``, or LARGE_CLASS for the carve path."""
        i = bisect_left(self._class_maxes, size)
        return i if i < len(self._table) else LARGE_CLASS

    def _filter_span(self, start: int, size: int) -> bool:
        """True when the span must be withheld from the caller."""
        hit, checked = range_contains_bsi_counted(start, size)
        self.counters.bsi_span_checks += 1
        self.counters.bsi_candidates += checked
        return hit

    def _filter_active(self, size: int) -> bool:
        cfg = self._cfg
        return cfg.filter_bsi and cfg.address_space_bits == 32 and size < BSI_PERIOD

    def _carve_run(self, ci: int) -> int:
        cls = self._table[ci]
        page = self._cfg.page_size
        if self._run_bump + page > self._large_bump:
            raise CapacityError(
                f"arena exhausted carving a run for class {cls.max_size}"
            )
        run = self._run_bump
        self._run_bump += page
        self._class_capacity[ci] += cls.slots_per_run
        free = self._free_slots[ci]
        for k in reversed(range(cls.slots_per_run)):
            free.append(run + k * cls.stride)
        return free.pop()

    def _take_slot(self, ci: int, offset: int, size: int) -> int:
        check = self._filter_active(size)
        if check:
            quarantined = self._quarantine[ci]
            for i, slot in enumerate(quarantined):
                if not self._filter_span(slot + offset, size):
                    return quarantined.pop(i)
        free = self._free_slots[ci]
        while True:
            slot = free.pop() if free else self._carve_run(ci)
            if not check or not self._filter_span(slot + offset, size):
                return slot
            self._quarantine[ci].append(slot)
            self.counters.bsi_quarantined += 1

    def _span_pages(self, size: int) -> int:
        # Physical span of a carved chunk; the randomization pad is always
        # laid out so that on/off modes keep identical geometry.
        page = self._cfg.page_size
        return max(1, -(-(size + self._cfg.pointer_width) // page))

    def _carve_large(self, pages: int) -> int:
        span = pages * self._cfg.page_size
        if self._large_bump - span < self._run_bump:
            raise CapacityError(f"arena exhausted carving {pages} pages")
        self._large_bump -= span
        return self._large_bump

    def _take_large(self, offset: int, size: int) -> int:
        pages = self._span_pages(size)
        check = self._filter_active(size)
        if check:
            for i, (base, p) in enumerate(self._large_quarantine):
                if p == pages and not self._filter_span(base + offset, size):
                    del self._large_quarantine[i]
                    return base
        pool = self._large_free.get(pages)
        while pool:
            base = pool.pop()
            if not check or not self._filter_span(base + offset, size):
                return base
            self._large_quarantine.append((base, pages))
            self.counters.bsi_quarantined += 1
        while True:
            base = self._carve_large(pages)
            if not check or not self._filter_span(base + offset, size):
                return base
            self._large_quarantine.append((base, pages))
            self.counters.bsi_quarantined += 1

    def _spans_border(self, start: int, size: int, border: int) -> bool:
        if size <= 1:
            return False
        return start // border != (start + size - 1) // border

    # -- operations ------------------------------------------------------

    def alloc(self, size: int, *, align: int | None = None) -> Allocation:
        """Allocate ``size`` bytes and return the live chunk record.

        ``align`` requests an explicitly aligned start; such chunks are
        exempt from randomization and flagged in the counters.
        """
        if not isinstance(size, int) or isinstance(size, bool) or size < 0:
            raise ValueError(f"allocation size must be a non-negative int, got {size!r}")
        cfg = self._cfg
        offset = 0
        if align is not None:
            if not _is_pow2(align):
                raise ValueError(f"alignment must be a power of two, got {align}")
            if align > cfg.page_size:
                raise ValueError(
                    f"alignment {align} beyond the page size is not supported"
                )
            self.counters.aligned_allocs += 1
        elif cfg.randomize:
            offset = self._next_offset()

        pad = cfg.pointer_width if cfg.randomize else 0
        ci = self.class_index_for(size)
        if ci != LARGE_CLASS and align is not None:
            natural = ci
            while ci < len(self._table) and self._table[ci].stride % align:
                ci += 1
            if ci == len(self._table):
                ci = LARGE_CLASS
            if ci != natural:
                self.counters.promotions += 1

        if ci == LARGE_CLASS:
            base = self._take_large(offset, size)
            start = base + offset
            reserved = size + pad
        else:
            slot = self._take_slot(ci, offset, size)
            start = slot + offset
            reserved = self._table[ci].max_size + pad
            self._class_live[ci] += 1

        rec = Allocation(self._next_id, start, size, reserved, offset, ci)
        self._next_id += 1
        self._live[rec.id] = rec

        self.counters.total_allocs += 1
        self._live_bytes += size
        self._reserved_bytes += reserved
        self._peak_reserved = max(self._peak_reserved, self._reserved_bytes)
        self._offset_hist[offset] += 1
        line_s = self._spans_border(start, size, cfg.cache_line)
        page_s = self._spans_border(start, size, cfg.page_size)
        self._line_straddles += line_s
        self._page_straddles += page_s
        guarded = size + cfg.pointer_width
        if guarded <= cfg.cache_line and line_s:
            self.counters.line_rule_violations += 1
        elif cfg.cache_line < guarded <= cfg.page_size and page_s:
            self.counters.page_rule_violations += 1
        return rec

    def free(self, alloc_id: int) -> None:
        rec = self._live.pop(alloc_id, None)
        if rec is None:
            raise HandleError(f"unknown or already freed allocation id {alloc_id}")
        self.counters.total_frees += 1
        self._release(rec)

    def _release(self, rec: Allocation) -> None:
        cfg = self._cfg
        self._live_bytes -= rec.requested
        self._reserved_bytes -= rec.reserved
        self._line_straddles -= self._spans_border(rec.start, rec.requested, cfg.cache_line)
        self._page_straddles -= self._spans_border(rec.start, rec.requested, cfg.page_size)
        slot = rec.start - rec.offset
        if rec.size_class_index == LARGE_CLASS:
            pages = self._span_pages(rec.requested)
            self._large_free.setdefault(pages, []).append(slot)
        else:
            self._class_live[rec.size_class_index] -= 1
            self._free_slots[rec.size_class_index].append(slot)

    def realloc(self, alloc_id: int, new_size: int) -> Allocation:
        """Move ``alloc_id`` to a fresh placement of ``new_size`` bytes.

        The old handle is consumed. In backed mode the first
        min(old, new) bytes are preserved.
        """
        rec = self._live.get(alloc_id)
        if rec is None:
            raise HandleError(f"unknown or already freed allocation id {alloc_id}")
        new = self.alloc(new_size)
        if self._mem is not None:
            n = min(rec.requested, new.requested)
            src = rec.start - self._base
            dst = new.start - self._base
            self._mem[dst : dst + n] = self._mem[src : src + n]
        self.free(alloc_id)
        self.counters.total_reallocs += 1
        return new

    # -- backed-mode data access ----------------------------------------

    def _backed_span(self, alloc_id: int, at: int, length: int) -> int:
        if self._mem is None:
            raise AccessError("simulation arena has no backing memory")
        rec = self._live.get(alloc_id)
        if rec is None:
            raise HandleError(f"unknown or already freed allocation id {alloc_id}")
        if at < 0 or length < 0 or at + length > rec.requested:
            raise AccessError(
                f"access [{at}, {at + length}) outside allocation of {rec.requested} bytes"
            )
        return rec.start - self._base + at

    def write(self, alloc_id: int, data: bytes, at: int = 0) -> None:
        idx = self._backed_span(alloc_id, at, len(data))
        self._mem[idx : idx + len(data)] = data

    def read(self, alloc_id: int, length: int, at: int = 0) -> bytes:
        idx = self._backed_span(alloc_id, at, length)
        return bytes(self._mem[idx : idx + length])

    # -- inspection -------------------------------------------------------

    def live_allocations(self):
        """Current live chunks, in allocation order."""
        return list(self._live.values())

    def live_count(self) -> int:
        return len(self._live)

    def stats(self) -> ReplayStats:
        per_class = [
            {
                "max_size": cls.max_size,
                "live": self._class_live[i],
                "capacity": self._class_capacity[i],
            }
            for i, cls in enumerate(self._table)
        ]
        ratio = (
            self._reserved_bytes / self._live_bytes if self._live_bytes > 0 else 1.0
        )
        return ReplayStats(
            live_bytes=self._live_bytes,
            reserved_bytes=self._reserved_bytes,
            overhead_ratio=ratio,
            offset_histogram=list(self._offset_hist),
            line_straddles=self._line_straddles,
            page_straddles=self._page_straddles,
            per_class=per_class,
            promotions=self.counters.promotions,
            aligned_allocs=self.counters.aligned_allocs,
        )
