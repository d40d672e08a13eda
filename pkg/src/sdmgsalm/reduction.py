"""Deterministic reduce-sum over per-block packets.

Totals are accumulated strictly in ascending block order, no matter how the
packets arrive or how blocks are spread over workers, so the result is
bitwise identical for any worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingPacket


@dataclass(frozen=True)
class ReducePacket:
    """Fixed-width payload contributed by one block to a reduce."""

    block_index: int
    payload: np.ndarray


def deterministic_reduce_sum(packets, n_blocks=None) -> np.ndarray:
    """Sum packet payloads in ascending block order.

    Expects exactly one packet per block index 0..n_blocks-1 (n_blocks
    defaults to the packet count).
    """
    packets = list(packets)
    expected = len(packets) if n_blocks is None else int(n_blocks)
    by_index = {}
    for p in packets:
        if p.block_index in by_index:
            raise MissingPacket(f"duplicate packet for block {p.block_index}")
        by_index[p.block_index] = p
    total = None
    for i in range(expected):
        p = by_index.get(i)
        if p is None:
            raise MissingPacket(f"no packet for block {i}")
        if total is None:
            total = np.array(p.payload, dtype=float)
        else:
            total += np.asarray(p.payload, dtype=float)
    if len(by_index) != expected:
        extra = sorted(set(by_index) - set(range(expected)))
        raise MissingPacket(f"unexpected packet(s) for block(s) {extra}")
    return total
