"""Counter-based random streams.

Every random quantity is a pure function of ``(seed, replicate, vertex,
channel, counter)``.  A stream key is obtained by chaining the splitmix64
finalizer over the identifying integers, and the ``k``-th uniform of a
stream is the finalizer applied to ``key + k * golden``.  Because nothing
is stateful, logs can be generated in any order (or in parallel) and are
reproduced bit for bit.
"""
import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO53 = 1.0 / 9007199254740992.0

# channel identifiers
CH_BIRTH = 1
CH_DEATH = 2
CH_RESET = 3
CH_SUBSET = 4
CH_VDEATH = 5
CH_KEEP = 6
CH_GILLESPIE = 7
CH_INITIAL = 8
CH_AUX = 9


@njit(cache=True, inline="always")
def mix64(x):
    """splitmix64 finalizer on a uint64."""
    z = x + _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def stream_key(seed, replicate, vertex, channel):
    """Key of the stream identified by four non-negative integers."""
    h = mix64(np.uint64(seed))
    h = mix64(h ^ np.uint64(replicate))
    h = mix64(h ^ np.uint64(vertex))
    h = mix64(h ^ np.uint64(channel))
    return h


@njit(cache=True, inline="always")
def uniform(key, counter):
    """The ``counter``-th uniform of a stream, strictly inside (0, 1)."""
    z = mix64(key + np.uint64(counter) * _GOLDEN)
    return (np.float64(z >> _S11) + 0.5) * _TWO53


@njit(cache=True)
def exponential(key, counter, rate):
    return -np.log(uniform(key, counter)) / rate


def uniforms(seed, replicate, vertex, channel, n):
    """Vector of the first ``n`` uniforms of a stream (convenience for tests)."""
    return _uniforms(np.uint64(seed), np.uint64(replicate), np.uint64(vertex),
                     np.uint64(channel), n)


@njit(cache=True)
def _uniforms(seed, replicate, vertex, channel, n):
    key = stream_key(seed, replicate, vertex, channel)
    out = np.empty(n)
    for k in range(n):
        out[k] = uniform(key, k)
    return out
