"""Graphical representations as materialized event logs.

A contact log holds, per vertex, birth events at rate lambda (arrows from
every neighbor into the vertex) and death marks at rate 1.  A voter log
holds reset events at total rate 1, each carrying an odd subset S of the
neighbor slots drawn uniformly, and death marks at rate delta.  Neighbors
outside the ball do not exist, so on the last sphere the subsets are drawn
among the neighbors that remain.
"""
import io
import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K

LOG_FORMAT_VERSION = 1
KIND_NAMES = {K.BIRTH: "ContactBirth", K.DEATH: "ContactDeath",
              K.RESET: "VoterReset", K.VDEATH: "VoterDeath"}


@dataclass(frozen=True, eq=False)
class EventLog:
    """Events of one replicate, sorted by (time, vertex, kind).

    ``masks`` stores the arrow slots of each event as a bitmask over the
    neighbor slots of its vertex (all present slots for contact births,
    the odd subset S for voter resets, 0 for death marks).
    """
    tree: object
    T: float
    model: str            # "contact" or "voter"
    rate: float           # lambda for contact, delta for voter
    seed: int
    replicate: int
    times: np.ndarray
    vertices: np.ndarray
    kinds: np.ndarray
    masks: np.ndarray
    reversed: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.times.shape[0])

    def vertex_events(self, v):
        """Time-sorted (times, kinds, masks) of vertex v."""
        sel = self.vertices == v
        return self.times[sel], self.kinds[sel], self.masks[sel]

    def counts(self):
        """Number of events of each kind."""
        return {KIND_NAMES[k]: int(np.sum(self.kinds == k)) for k in np.unique(self.kinds)}

    def subset(self, v, mask):
        """Neighbor vertices encoded by an event mask at v."""
        return [int(self.tree.nbr[v, s]) for s in range(self.tree.d + 1) if (mask >> s) & 1]

    def same_events(self, other):
        return (self.model == other.model and len(self) == len(other)
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.kinds, other.kinds)
                and np.array_equal(self.masks, other.masks))


def _check_T(T):
    if not np.isfinite(T) or T < 0:
        raise ValueError("horizon T must be a finite non-negative number, got %r" % (T,))


def _build(tree, model, rate, T, seed, replicate):
    if T == 0:
        e = np.empty(0)
        return e, e.astype(np.int64), e.astype(np.int8), e.astype(np.int16), e
    return K.sample_log(tree.nbr, 0 if model == "contact" else 1, float(rate),
                        float(T), int(seed), int(replicate))


def sample_contact_log(tree, lam, T, seed, replicate=0):
    """Birth events at rate ``lam`` and death marks at rate 1 on every vertex."""
    if not lam > 0:
        raise ValueError("lambda must be positive, got %r" % (lam,))
    _check_T(T)
    t, v, k, m, _ = _build(tree, "contact", lam, T, seed, replicate)
    return EventLog(tree, float(T), "contact", float(lam), int(seed), int(replicate), t, v, k, m)


def sample_voter_log(tree, delta, T, seed, replicate=0):
    """Reset events at rate 1 (uniform odd subsets) and death marks at rate ``delta``."""
    if not delta >= 0:
        raise ValueError("delta must be non-negative, got %r" % (delta,))
    _check_T(T)
    t, v, k, m, _ = _build(tree, "voter", delta, T, seed, replicate)
    return EventLog(tree, float(T), "voter", float(delta), int(seed), int(replicate), t, v, k, m)


def sample_coupled_contact_logs(tree, lam1, lam2, T, seed, replicate=0):
    """Logs at rates lam1 < lam2 sharing deaths, with births of the first
    obtained by thinning those of the second (keep probability lam1/lam2)."""
    if not 0 < lam1 <= lam2:
        raise ValueError("need 0 < lam1 <= lam2, got %r, %r" % (lam1, lam2))
    _check_T(T)
    t, v, k, m, keep = _build(tree, "contact", lam2, T, seed, replicate)
    log2 = EventLog(tree, float(T), "contact", float(lam2), int(seed), int(replicate), t, v, k, m)
    sel = (k != K.BIRTH) | (keep < lam1 / lam2)
    log1 = EventLog(tree, float(T), "contact", float(lam1), int(seed), int(replicate),
                    t[sel], v[sel], k[sel], m[sel])
    return log1, log2


def reverse_log(log, at=None):
    """Time reversal on the window [0, at]: t -> at - t, event order reversed."""
    at = log.T if at is None else float(at)
    if not 0 < at <= log.T:
        raise ValueError("reversal time %r outside (0, %r]" % (at, log.T))
    sel = log.times <= at
    t = at - log.times[sel]
    v, k, m = log.vertices[sel], log.kinds[sel], log.masks[sel]
    order = np.lexsort((k, v, t))
    return replace(log, T=at, times=t[order], vertices=v[order], kinds=k[order],
                   masks=m[order], reversed=not log.reversed)


def restrict_log(log, upto):
    sel = log.times <= upto
    return replace(log, T=float(upto), times=log.times[sel], vertices=log.vertices[sel],
                   kinds=log.kinds[sel], masks=log.masks[sel])


def save_log(log, path):
    """Binary dump: a JSON header plus the event arrays (npz container)."""
    header = {"version": LOG_FORMAT_VERSION, "d": log.tree.d, "R": log.tree.R, "T": log.T,
              "model": log.model, "rate": log.rate, "seed": log.seed,
              "replicate": log.replicate, "reversed": log.reversed}
    np.savez(path, header=np.array(json.dumps(header, sort_keys=True)), times=log.times,
             vertices=log.vertices, kinds=log.kinds, masks=log.masks)


def load_log(path, tree=None):
    from .tree import build_ball
    with np.load(path) as z:
        header = json.loads(str(z["header"]))
        if header.get("version") != LOG_FORMAT_VERSION:
            raise ValueError("unsupported log format version %r" % header.get("version"))
        if tree is None:
            tree = build_ball(header["d"], header["R"])
        elif (tree.d, tree.R) != (header["d"], header["R"]):
            raise ValueError("log was sampled on a different ball")
        return EventLog(tree, header["T"], header["model"], header["rate"], header["seed"],
                        header["replicate"], z["times"], z["vertices"], z["kinds"],
                        z["masks"], header["reversed"])


def log_bytes(log):
    buf = io.BytesIO()
    for a in (log.times, log.vertices, log.kinds, log.masks):
        buf.write(np.ascontiguousarray(a).tobytes())
    return buf.getvalue()
