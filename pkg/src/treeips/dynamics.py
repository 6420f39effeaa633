"""Forward and dual evolutions, from event logs and directly from generators."""
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .events import reverse_log

SEMANTICS = ("reset_to_parity", "flip_when_odd", "rate_one_on_disagreement")
_FWD_MODE = {"reset_to_parity": K.VOTER_PARITY, "flip_when_odd": K.VOTER_ODDFLIP,
             "rate_one_on_disagreement": K.VOTER_DISAGREE}


@dataclass(frozen=True)
class ModelSpec:
    """Which particle system to run.

    kind is "contact" (rate ``lam``), "voter_death" (rate ``delta``) or
    "voter" (delta = 0).  ``semantics`` selects the forward voter rule and is
    ignored for the contact process.
    """
    kind: str
    lam: float = 0.0
    delta: float = 0.0
    semantics: str = "reset_to_parity"

    def __post_init__(self):
        if self.kind not in ("contact", "voter_death", "voter"):
            raise ValueError("unknown model kind %r" % (self.kind,))
        if self.kind == "contact" and not self.lam >= 0:
            raise ValueError("lambda must be non-negative")
        if self.kind != "contact" and not self.delta >= 0:
            raise ValueError("delta must be non-negative")
        if self.kind == "voter" and self.delta != 0:
            raise ValueError("pure voter model has delta = 0")
        if self.semantics not in SEMANTICS:
            raise ValueError("unknown voter semantics %r" % (self.semantics,))

    @classmethod
    def contact(cls, lam):
        return cls("contact", lam=float(lam))

    @classmethod
    def voter_with_death(cls, delta, semantics="reset_to_parity"):
        return cls("voter_death", delta=float(delta), semantics=semantics)

    @classmethod
    def voter(cls, semantics="reset_to_parity"):
        return cls("voter", semantics=semantics)

    @property
    def log_model(self):
        return "contact" if self.kind == "contact" else "voter"

    @property
    def rate(self):
        return self.lam if self.kind == "contact" else self.delta

    def mode(self, direction):
        if direction not in ("forward", "dual"):
            raise ValueError("direction must be 'forward' or 'dual'")
        if self.kind == "contact":
            return K.CONTACT_FWD if direction == "forward" else K.CONTACT_DUAL
        return _FWD_MODE[self.semantics] if direction == "forward" else K.VOTER_DUAL

    def stops_at_full(self, direction):
        # consensus on all ones is absorbing only for the pure voter rules that preserve it
        return (self.kind == "voter" and direction == "forward"
                and self.semantics != "flip_when_odd")


@dataclass
class Trajectory:
    """Piecewise-constant path of an occupied set.

    ``changes`` are (time, vertex, new value) records in time order.
    """
    tree: object
    initial: np.ndarray
    times: np.ndarray
    vertices: np.ndarray
    values: np.ndarray
    T: float
    direction: str = "forward"
    extinction_time: float = None
    absorption_time: float = None
    absorbed_state: str = None
    touched_time: float = None
    meta: dict = field(default_factory=dict)

    @property
    def boundary_touched(self):
        return self.touched_time is not None

    def state_at(self, t):
        if t < 0 or t > self.T + 1e-12:
            raise ValueError("time %r outside [0, %r]" % (t, self.T))
        state = self.initial.copy()
        n = np.searchsorted(self.times, t, side="right")
        state[self.vertices[:n]] = self.values[:n]
        return state

    def set_at(self, t):
        return frozenset(np.flatnonzero(self.state_at(t)).tolist())

    def final(self):
        return self.state_at(self.T)

    def summary(self, t_grid=()):
        return {"replicate": self.meta.get("replicate"), "seed": self.meta.get("seed"),
                "extinction_time": self.extinction_time,
                "boundary_touched": self.boundary_touched,
                "census": [int(c) for c in census(self, t_grid)]}


def as_state(tree, initial):
    """Occupation vector (uint8) from a set of vertices or a 0/1 array."""
    if isinstance(initial, np.ndarray) and initial.shape == (tree.V,):
        return initial.astype(np.uint8)
    state = np.zeros(tree.V, np.uint8)
    idx = np.fromiter(initial, dtype=np.int64) if not isinstance(initial, np.ndarray) else initial
    if idx.size:
        if idx.min() < 0 or idx.max() >= tree.V:
            raise IndexError("initial set has vertices outside the tree")
        state[idx] = 1
    return state


def _opt(x):
    return None if x < 0 else float(x)


def _check_tag(log, spec):
    if log.model != spec.log_model:
        raise ValueError("log model %r does not match spec %r" % (log.model, spec.kind))
    if not np.isclose(log.rate, spec.rate, rtol=0, atol=1e-15):
        raise ValueError("log rate %r does not match spec rate %r" % (log.rate, spec.rate))


def run_log(log, state0, spec, direction="forward", grid=(), snaps=False, record=False):
    """Low-level sweep returning the kernel tuple; see ``evolve``."""
    _check_tag(log, spec)
    src = reverse_log(log, log.T) if direction == "dual" and len(log) else log
    grid = np.asarray(grid, dtype=float)
    tree = log.tree
    return K.sweep(src.times, src.vertices, src.kinds, src.masks, tree.nbr, tree.depth, tree.R,
                   spec.mode(direction), state0, log.T, grid, snaps, record,
                   spec.stops_at_full(direction))


def evolve(log, initial, spec, direction="forward"):
    """Evolve a process through a log.

    ``direction="dual"`` runs the dual process on the time reversal of the
    log over its whole window, so dual time s corresponds to forward time
    ``log.T - s``.
    """
    tree = log.tree
    state0 = as_state(tree, initial)
    out = run_log(log, state0, spec, direction, record=True)
    _, _, _, ct, cv, cval, _, atime, astate, ttime = out
    absorbed = None if atime < 0 else ("empty" if astate == 0 else "full")
    return Trajectory(tree, state0, ct, cv, cval, log.T, direction,
                      extinction_time=_opt(atime) if astate == 0 else None,
                      absorption_time=_opt(atime), absorbed_state=absorbed,
                      touched_time=_opt(ttime),
                      meta={"seed": log.seed, "replicate": log.replicate})


def run_gillespie(tree, spec, state0, T, seed, replicate=0, direction="forward", grid=(),
                  snaps=False, hits=False, record=False, pop_cap=None, stop_on_touch=False):
    """Low-level direct simulation returning the kernel tuple."""
    if not np.isfinite(T) or T < 0:
        raise ValueError("bad horizon %r" % (T,))
    grid = np.asarray(grid, dtype=float)
    if grid.size and grid.max() > T + 1e-12:
        raise ValueError("grid extends beyond the horizon")
    cap = tree.V + 1 if pop_cap is None else int(pop_cap)
    return K.gillespie(tree.nbr, tree.depth, tree.R, spec.mode(direction), float(spec.lam),
                       float(spec.delta), state0, float(T), int(seed), int(replicate), grid,
                       snaps, hits, record, spec.stops_at_full(direction), cap, stop_on_touch)


def gillespie_evolve(tree, spec, initial, T, seed, replicate=0, direction="forward"):
    """Direct continuous-time simulation from the generator."""
    state0 = as_state(tree, initial)
    out = run_gillespie(tree, spec, state0, T, seed, replicate, direction, record=True)
    _, _, _, _, ct, cv, cval, atime, astate, ttime, _, _ = out
    absorbed = None if atime < 0 else ("empty" if astate == 0 else "full")
    return Trajectory(tree, state0, ct, cv, cval, float(T), direction,
                      extinction_time=_opt(atime) if astate == 0 else None,
                      absorption_time=_opt(atime), absorbed_state=absorbed,
                      touched_time=_opt(ttime), meta={"seed": seed, "replicate": replicate})


def census(traj, t_grid):
    """Exact cardinalities |xi_t| at the grid times."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size and (t_grid.max() > traj.T + 1e-12 or t_grid.min() < 0):
        raise ValueError("grid outside [0, %r]" % traj.T)
    if not t_grid.size:
        return np.zeros(0, np.int64)
    steps = np.where(traj.values == 1, 1, -1)
    csum = int(traj.initial.sum()) + np.concatenate([[0], np.cumsum(steps)])
    idx = np.searchsorted(traj.times, t_grid, side="right")
    return csum[idx]
