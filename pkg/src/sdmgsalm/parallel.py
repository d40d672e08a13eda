"""Deterministic block-parallel execution.

Workers are separate processes, each owning a fixed set of blocks
(round-robin by index); the coordinator broadcasts the group means plus a
handful of scalars and reduces per-block packets strictly in block order,
so trajectories are bitwise identical for every worker count.  The packet
boundary is the only cross-process data flow, which keeps the door open
for a message-passing backend with the same protocol.
"""

from __future__ import annotations

import multiprocessing as mp
from dataclasses import dataclass

import numpy as np

from . import model
from .alm import AlmConfig, BlockEngine, build_engines, drive
from .errors import InstanceValidationError, WorkerFailure
from .reduction import ReducePacket, deterministic_reduce_sum
from .subsolvers import DEFAULT_TOLERANCES

__all__ = [
    "WorkerPartition",
    "ReducePacket",
    "deterministic_reduce_sum",
    "ProcessExecutor",
    "run_parallel",
]


@dataclass(frozen=True)
class WorkerPartition:
    """Static block -> worker assignment."""

    assignment: tuple
    n_workers: int

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(int(w) for w in self.assignment))
        if self.n_workers < 1:
            raise ValueError("need at least one worker")
        for i, w in enumerate(self.assignment):
            if not 0 <= w < self.n_workers:
                raise ValueError(f"block {i} assigned to invalid worker {w}")

    @classmethod
    def round_robin(cls, n_blocks, n_workers):
        n_workers = min(int(n_workers), int(n_blocks))
        return cls(tuple(i % n_workers for i in range(n_blocks)), n_workers)

    def blocks_of(self, worker):
        return [i for i, w in enumerate(self.assignment) if w == worker]


def _worker_main(conn, inst, block_ids, omega0, tol):
    engines = []
    for i in block_ids:
        engines.append(
            BlockEngine(
                i,
                inst.blocks[i],
                inst.local_groups[i],
                np.asarray(omega0)[inst.block_coords(i)],
                inst.linkage.n_groups,
                tol,
            )
        )
    while True:
        msg = conn.recv()
        if msg[0] == "stop":
            conn.close()
            return
        _, method, payload = msg
        current = block_ids[0] if block_ids else -1
        try:
            results = []
            for e in engines:
                current = e.index
                results.append(getattr(e, method)(payload))
            conn.send(("ok", results))
        except Exception as exc:  # surfaced as WorkerFailure by the coordinator
            conn.send(("error", current, repr(exc)))


class ProcessExecutor:
    """Persistent pool of block workers driven in lockstep phases."""

    def __init__(self, inst, omega0, partition: WorkerPartition,
                 tol=DEFAULT_TOLERANCES, start_method="fork"):
        self.partition = partition
        ctx = mp.get_context(start_method)
        self._conns = []
        self._procs = []
        self._first_block = []
        for w in range(partition.n_workers):
            ids = partition.blocks_of(w)
            parent, child = ctx.Pipe()
            proc = ctx.Process(
                target=_worker_main,
                args=(child, inst, ids, np.asarray(omega0, dtype=float), tol),
                daemon=True,
            )
            proc.start()
            child.close()
            self._conns.append(parent)
            self._procs.append(proc)
            self._first_block.append(ids[0] if ids else -1)

    def _round(self, method, payload):
        for conn in self._conns:
            conn.send(("map", method, payload))
        flat = []
        failure = None
        for w, conn in enumerate(self._conns):
            try:
                reply = conn.recv()
            except (EOFError, OSError):
                failure = failure or WorkerFailure(self._first_block[w], "connection lost")
                continue
            if reply[0] == "error":
                failure = failure or WorkerFailure(reply[1], reply[2])
            else:
                flat.extend(reply[1])
        if failure is not None:
            self.close()
            raise failure
        return flat

    def map(self, method, payload=None):
        return self._round(method, payload)

    def broadcast(self, method, payload=None):
        self._round(method, payload)

    def collect(self):
        return self._round("collect", None)

    def close(self):
        for conn, proc in zip(self._conns, self._procs):
            try:
                conn.send(("stop",))
                conn.close()
            except (BrokenPipeError, OSError):
                pass
        for proc in self._procs:
            proc.join(timeout=10)
            if proc.is_alive():
                proc.terminate()


def run_parallel(inst, cfg: AlmConfig, n_workers, omega0=None,
                 tol=DEFAULT_TOLERANCES, start_method="fork",
                 return_stats=False):
    """Same outputs as the serial entry point, computed by n_workers
    processes; the bound trajectory is bitwise identical to the serial one."""
    violations = model.validate_instance(inst)
    if violations:
        raise InstanceValidationError(violations)
    omega0 = np.zeros(inst.q) if omega0 is None else np.asarray(omega0, dtype=float)
    omega0 = model.project_onto_Zperp(inst, omega0)
    partition = WorkerPartition.round_robin(inst.n_blocks, n_workers)
    executor = ProcessExecutor(inst, omega0, partition, tol, start_method)
    try:
        state, records, stats = drive(inst, cfg, executor)
    finally:
        executor.close()
    if return_stats:
        return state, records, stats
    return state, records


def run_serial_engines(inst, cfg: AlmConfig, omega0=None, tol=DEFAULT_TOLERANCES):
    """In-process run through the identical engine code path (stats variant)."""
    from .alm import SerialExecutor

    omega0 = np.zeros(inst.q) if omega0 is None else np.asarray(omega0, dtype=float)
    omega0 = model.project_onto_Zperp(inst, omega0)
    executor = SerialExecutor(build_engines(inst, omega0, tol))
    return drive(inst, cfg, executor)
