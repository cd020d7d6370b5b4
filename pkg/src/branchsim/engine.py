"""Event-driven simulation of the branching dynamics.

Each particle carries an independent Exp(r) branching clock; a global
priority queue orders the clocks and states advance lazily — a particle's
position is updated only at its own branch time and at snapshot times, which
is exact by the Markov property. At a branch event the parent dies and is
replaced in place by m i.i.d. offspring.

Lineages absorbed by the motion are dropped immediately: all descendants of
an absorbed particle are absorbed and contribute nothing to the live
empirical measure, so only the absorption events of tracked lineages are
counted.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace

import numpy as np

from .branching import BranchingLaw
from .errors import ConfigurationError
from .motions import MotionModel
from .parallel import map_replicas, replica_rng
from .states import is_absorbed

DEFAULT_POPULATION_CAP = 10**6


@dataclass
class Particle:
    id: int
    parent_id: int | None
    birth_time: float
    state: object
    next_branch_time: float
    last_update: float = field(default=0.0)


@dataclass(frozen=True)
class PopulationSnapshot:
    """Live (non-absorbed) states at a fixed time plus absorption bookkeeping."""

    time: float
    live_states: tuple
    absorbed_count: int
    dead_count: int
    truncated: bool

    @property
    def size(self) -> int:
        return len(self.live_states)


@dataclass(frozen=True)
class SimulationConfig:
    horizon: float
    snapshot_times: tuple
    population_cap: int = DEFAULT_POPULATION_CAP
    seed: int = 0
    replica_index: int = 0

    def __post_init__(self):
        problems = []
        if not self.horizon > 0:
            problems.append(f"horizon must be > 0, got {self.horizon}")
        times = tuple(float(t) for t in self.snapshot_times)
        if not times:
            problems.append("snapshot_times must be nonempty")
        elif any(b <= a for a, b in zip(times, times[1:])):
            problems.append("snapshot_times must be strictly increasing")
        elif not (times[0] > 0 and times[-1] <= self.horizon):
            problems.append("snapshot_times must lie in (0, horizon]")
        if not self.population_cap >= 1:
            problems.append(f"population_cap must be >= 1, got {self.population_cap}")
        if problems:
            raise ConfigurationError(*problems)
        object.__setattr__(self, "snapshot_times", times)


def run_replica(
    motion: MotionModel,
    law: BranchingLaw,
    x0,
    cfg: SimulationConfig,
    rng: np.random.Generator = None,
) -> list:
    """Simulate one replica; snapshots at exactly cfg.snapshot_times.

    If the live population would exceed the cap the replica stops advancing
    and all snapshots at or after the stop time are flagged truncated.
    """
    if is_absorbed(x0):
        raise ConfigurationError("x0 must be non-absorbed")
    motion.validate_state(x0)
    if rng is None:
        rng = replica_rng(cfg.seed, cfg.replica_index)

    r = law.rate_r
    particles: dict[int, Particle] = {}
    events: list = []  # (branch_time, id) min-heap
    next_id = 1

    root = Particle(0, None, 0.0, x0, rng.exponential(1.0 / r), 0.0)
    particles[0] = root
    heapq.heappush(events, (root.next_branch_time, 0))

    absorbed_count = 0
    dead_count = 0
    truncated = False
    snapshots = []

    for s in cfg.snapshot_times:
        while not truncated and events and events[0][0] <= s:
            tb, pid = heapq.heappop(events)
            p = particles.pop(pid, None)
            if p is None:
                continue
            state = p.state
            if tb > p.last_update:
                state = motion.step(state, tb - p.last_update, rng)
            if is_absorbed(state):
                absorbed_count += 1
                continue
            m = law.sample_offspring(rng)
            if m == 0:
                dead_count += 1
                continue
            for _ in range(m):
                child = Particle(next_id, pid, tb, state, tb + rng.exponential(1.0 / r), tb)
                particles[next_id] = child
                heapq.heappush(events, (child.next_branch_time, next_id))
                next_id += 1
            if len(particles) > cfg.population_cap:
                truncated = True

        if truncated:
            # report the frozen population without further advancement
            live = tuple(particles[pid].state for pid in sorted(particles))
        else:
            live = []
            for pid in sorted(particles):  # fixed order: deterministic RNG usage
                p = particles[pid]
                if s > p.last_update:
                    p.state = motion.step(p.state, s - p.last_update, rng)
                    p.last_update = s
                if is_absorbed(p.state):
                    absorbed_count += 1
                    del particles[pid]
                else:
                    live.append(p.state)
            live = tuple(live)
        snapshots.append(
            PopulationSnapshot(
                time=s,
                live_states=live,
                absorbed_count=absorbed_count,
                dead_count=dead_count,
                truncated=truncated,
            )
        )
    return snapshots


@dataclass(frozen=True)
class _ReplicaTask:
    motion: MotionModel
    law: BranchingLaw
    x0: object
    cfg: SimulationConfig

    def __call__(self, replica_index, rng):
        cfg = replace(self.cfg, replica_index=replica_index)
        return run_replica(self.motion, self.law, self.x0, cfg, rng)


def run_replicas(motion, law, x0, cfg: SimulationConfig, n_replicas: int, threads: int = 1):
    """n independent replicas, in replica-index order regardless of threads."""
    task = _ReplicaTask(motion, law, x0, cfg)
    return map_replicas(task, n_replicas, cfg.seed, threads)


def survival_indicator(snapshots) -> list:
    """True iff the live population is nonempty at each snapshot time."""
    return [snap.size > 0 or snap.truncated for snap in snapshots]
