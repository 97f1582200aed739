"""Byte-shift-independent (BSI) address detection.

A 32-bit value whose four bytes are all equal (for example 0x35353535)
reads back identically at any byte shift of a sprayed buffer, so a
filtering arena refuses to hand out chunks that cover such an address.
Detection does not scan every address in a range: it steps candidate
repeated-byte values starting from the most significant byte of the range
start, which costs at most ceil(length / 0x01010101) + 2 candidate checks.

All functions here are pure and safe for unrestricted parallel use.
"""

from __future__ import annotations

BSI_PERIOD = 0x01010101  # distance between consecutive repeated-byte values
HALFWORD_PERIOD = 0x00010001  # distance between repeated-halfword values
ADDRESS_SPACE = 1 << 32

ACCEPT = "accept"
QUARANTINE = "quarantine"

__all__ = [
    "ACCEPT",
    "ADDRESS_SPACE",
    "BSI_PERIOD",
    "HALFWORD_PERIOD",
    "QUARANTINE",
    "is_bsi_address",
    "range_contains_bsi",
    "range_contains_bsi_counted",
    "slot_verdict",
]


def is_bsi_address(addr: int, *, strict: bool = False) -> bool:
    """True when all four bytes of ``addr`` are equal.

    With ``strict=True`` repeated-halfword values such as 0x35343534 are
    reported as well. Those defeat byte randomization only half of the
    time, so they are excluded by default.
    """
    if not 0 <= addr < ADDRESS_SPACE:
        raise ValueError(f"not a 32-bit address: {addr:#x}")
    if addr % BSI_PERIOD == 0:
        return True
    return strict and addr % HALFWORD_PERIOD == 0


def _checked_range(start: int, length: int) -> int:
    if length < 0:
        raise ValueError("negative range length")
    if not 0 <= start < ADDRESS_SPACE:
        raise ValueError(f"not a 32-bit address: {start:#x}")
    end = start + length
    if end > ADDRESS_SPACE:
        raise ValueError(
            f"address range [{start:#x}, {start:#x}+{length}) wraps past 2**32"
        )
    return end


def _stepped_scan(start: int, end: int, period: int, top_shift: int):
    # Candidates are multiples of ``period``, beginning with the repeated
    # value built from the top byte (or halfword) of ``start``.  The first
    # candidate at or past ``end`` terminates the walk.
    repeated = start >> top_shift
    checked = 0
    while True:
        candidate = repeated * period
        checked += 1
        if candidate >= end:
            return False, checked
        if candidate >= start:
            return True, checked
        repeated += 1


def range_contains_bsi_counted(start: int, length: int, *, strict: bool = False):
    """Like :func:`range_contains_bsi`, also returning the number of
    candidate values evaluated by the stepping walk."""
    end = _checked_range(start, length)
    if length == 0:
        return False, 0
    hit, checked = _stepped_scan(start, end, BSI_PERIOD, 24)
    if not hit and strict:
        hit, extra = _stepped_scan(start, end, HALFWORD_PERIOD, 16)
        checked += extra
    return hit, checked


def range_contains_bsi(start: int, length: int, *, strict: bool = False) -> bool:
    """True when [start, start+length) covers a byte-shift-independent
    address. Any non-wrapping range of length >= 0x01010101 does."""
    return range_contains_bsi_counted(start, length, strict=strict)[0]


def slot_verdict(
    start: int, length: int, *, filter_enabled: bool = True, strict: bool = False
) -> str:
    """Decide whether a candidate span may be handed to a caller.

    Returns ``"accept"`` when filtering is disabled or the span is clean,
    ``"quarantine"`` when the span covers a BSI address.
    """
    if not filter_enabled:
        return ACCEPT
    if range_contains_bsi(start, length, strict=strict):
        return QUARANTINE
    return ACCEPT
