"""Ball truncations of the homogeneous tree T_d.

Vertices carry the canonical address ``(n, r)``: ``x_{-n}`` is the most
recent common ancestor of the vertex and the root ``o`` on the upward spine,
and ``r`` is the label sequence leading down from ``x_{-n}``.  For ``n >= 1``
the first label differs from 1, because child 1 of ``x_{-n}`` is
``x_{-n+1}``.  The root is ``(0, ())``, ``spine(k)`` is ``(0, (1,)*k)`` for
``k >= 0`` and ``(-k, ())`` for ``k < 0``.

Neighbor slots are fixed: slot 0 is the parent, slot ``c`` is child ``c``.
Vertices outside the ball do not exist and show up as ``-1``.
"""
from collections import deque
from itertools import combinations
from typing import NamedTuple

import numpy as np

DEFAULT_VERTEX_CAP = 2_000_000


def ball_size(d, R):
    """Number of vertices of B(o, R) in T_d."""
    return 1 + (d + 1) * sum(d ** (k - 1) for k in range(1, R + 1))


def parent_address(addr):
    n, r = addr
    if r:
        return (n, r[:-1])
    return (n + 1, ())


def child_address(addr, c):
    n, r = addr
    if not r and n >= 1 and c == 1:
        return (n - 1, ())
    return (n, r + (c,))


def address_depth(addr):
    return addr[0] + len(addr[1])


def format_address(addr):
    """Serialize an address as ``"(n; r1.r2...)"``."""
    n, r = addr
    return "(%d; %s)" % (n, ".".join(str(c) for c in r))


def parse_address(text):
    body = text.strip()[1:-1]
    n, _, r = body.partition(";")
    r = r.strip()
    return (int(n), tuple(int(c) for c in r.split(".")) if r else ())


class Boundary(NamedTuple):
    vertices: frozenset   # in-ball part of the outer boundary
    size: int             # |∂A| in the infinite tree
    clipped: bool         # some boundary vertex lies outside the ball


class TreeIndex:
    """Enumerated ball B(o, R) of T_d.

    Attributes
    ----------
    d, R : int
    V : int
        Number of vertices; vertex 0 is the root.
    nbr : ndarray (V, d+1)
        Neighbor table by slot (0 = parent, c = child c), -1 if absent.
    depth : ndarray (V,)
        Distance from the root.
    up : ndarray (V,)
        Neighbor one step closer to the root (-1 for the root).
    addresses : list of (n, r)
    """

    def __init__(self, d, R, vertex_cap=DEFAULT_VERTEX_CAP):
        d, R = int(d), int(R)
        if d < 2:
            raise ValueError("d must be >= 2, got %d" % d)
        if R < 1:
            raise ValueError("R must be >= 1, got %d" % R)
        V = ball_size(d, R)
        if V > vertex_cap:
            raise ValueError("ball has %d vertices, above the cap %d" % (V, vertex_cap))
        self.d, self.R, self.V = d, R, V
        addresses = [(0, ())]
        index = {(0, ()): 0}
        nbr = np.full((V, d + 1), -1, dtype=np.int64)
        up = np.full(V, -1, dtype=np.int64)
        queue = deque([0])
        while queue:
            v = queue.popleft()
            a = addresses[v]
            for slot in range(d + 1):
                b = parent_address(a) if slot == 0 else child_address(a, slot)
                if address_depth(b) > R:
                    continue
                w = index.get(b)
                if w is None:
                    w = len(addresses)
                    index[b] = w
                    addresses.append(b)
                    up[w] = v
                    queue.append(w)
                nbr[v, slot] = w
        assert len(addresses) == V
        self.addresses = addresses
        self._index = index
        self.nbr = nbr
        self.up = up
        self.depth = np.array([address_depth(a) for a in addresses], dtype=np.int64)
        self.degree = (nbr >= 0).sum(axis=1)
        for arr in (self.nbr, self.up, self.depth, self.degree):
            arr.setflags(write=False)

    def __repr__(self):
        return "TreeIndex(d=%d, R=%d, V=%d)" % (self.d, self.R, self.V)

    # -- addressing ---------------------------------------------------
    def vertex(self, addr):
        """Vertex id of an address; KeyError if outside the ball."""
        n, r = addr
        return self._index[(int(n), tuple(int(c) for c in r))]

    def spine(self, k):
        if abs(k) > self.R:
            raise KeyError("spine(%d) outside B(o,%d)" % (k, self.R))
        return self.vertex((0, (1,) * k) if k >= 0 else (-k, ()))

    def parent(self, v):
        return int(self.nbr[v, 0])

    def children(self, v):
        return [int(w) for w in self.nbr[v, 1:]]

    def neighbors(self, v):
        return [int(w) for w in self.nbr[v] if w >= 0]

    def generation(self, v):
        n, r = self.addresses[v]
        return len(r) - n

    def sphere(self, n):
        return frozenset(np.flatnonzero(self.depth == n).tolist())

    def interior(self, A):
        return all(self.depth[v] < self.R for v in A)

    def _check(self, A):
        for v in A:
            if not 0 <= v < self.V:
                raise IndexError("vertex %r outside the tree" % (v,))


def build_ball(d, R, vertex_cap=DEFAULT_VERTEX_CAP):
    return TreeIndex(d, R, vertex_cap)


def canonical_address(tree, v):
    tree._check([v])
    n, r = tree.addresses[v]
    return n, list(r)


def distance(tree, u, v):
    """Graph distance, by climbing to the lowest common ancestor."""
    du, dv = tree.depth[u], tree.depth[v]
    dist = 0
    while du > dv:
        u, du, dist = tree.up[u], du - 1, dist + 1
    while dv > du:
        v, dv, dist = tree.up[v], dv - 1, dist + 1
    while u != v:
        u, v, dist = tree.up[u], tree.up[v], dist + 2
    return int(dist)


def path(tree, u, v):
    """Vertices on the geodesic between u and v (inclusive)."""
    left, right = [u], [v]
    while left[-1] != right[-1]:
        if tree.depth[left[-1]] >= tree.depth[right[-1]]:
            left.append(int(tree.up[left[-1]]))
        else:
            right.append(int(tree.up[right[-1]]))
    return left + right[-2::-1]


def sphere(tree, n):
    return tree.sphere(n)


def subtree_membership(tree, x):
    """x together with all of its descendants (children, grandchildren, ...)."""
    out, stack = set(), [x]
    while stack:
        v = stack.pop()
        out.add(v)
        stack.extend(int(w) for w in tree.nbr[v, 1:] if w >= 0)
    return frozenset(out)


def connected_hull(tree, B):
    """Smallest connected set containing B."""
    B = list(B)
    if not B:
        raise ValueError("hull of the empty set")
    tree._check(B)
    hull = {B[0]}
    for b in B[1:]:
        hull.update(path(tree, B[0], b))
    return frozenset(hull)


def is_connected(tree, A):
    A = set(A)
    if not A:
        return True
    start = next(iter(A))
    seen, stack = {start}, [start]
    while stack:
        v = stack.pop()
        for w in tree.nbr[v]:
            w = int(w)
            if w in A and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(A)


def components(tree, A):
    """Connected components of A, each as a frozenset, in order of min vertex."""
    A = set(A)
    out = []
    while A:
        start = min(A)
        comp, stack = {start}, [start]
        while stack:
            v = stack.pop()
            for w in tree.nbr[v]:
                w = int(w)
                if w in A and w not in comp:
                    comp.add(w)
                    stack.append(w)
        A -= comp
        out.append(frozenset(comp))
    return out


def min_generation_vertex(tree, A):
    """Member of A with the least generation m - n, ties broken lexicographically
    on (n, r(1), r(2), ...)."""
    A = list(A)
    if not A:
        raise ValueError("empty set")
    tree._check(A)

    def key(v):
        n, r = tree.addresses[v]
        return (len(r) - n, n) + r

    return min(A, key=key)


def boundary(tree, A):
    """Outer vertex boundary of A, with neighbors taken in the infinite tree."""
    A = set(A)
    tree._check(A)
    inside = set()
    clipped_count = 0
    for v in A:
        for w in tree.nbr[v]:
            w = int(w)
            if w >= 0 and w not in A:
                inside.add(w)
        clipped_count += tree.d + 1 - tree.degree[v]
    return Boundary(frozenset(inside), len(inside) + int(clipped_count), clipped_count > 0)


def partition_KLK(tree, B):
    """Split a connected set B (d = 2, |B| > 1) by in-set degree.

    Returns ``(K, L, Kp)``: members with 3, 2 and 1 neighbors in B.  The
    degree-one members are the leaves of B, and a tree with maximal degree
    three always has ``|Kp| = |K| + 2``.
    """
    B = set(B)
    if tree.d != 2:
        raise ValueError("partition_KLK needs d = 2")
    if len(B) < 2 or not is_connected(tree, B):
        raise ValueError("B must be connected with at least two vertices")
    if not tree.interior(B):
        raise ValueError("B touches the truncation boundary")
    K, L, Kp = set(), set(), set()
    for v in B:
        k = sum(1 for w in tree.nbr[v] if int(w) in B)
        (K if k == 3 else L if k == 2 else Kp).add(v)
    assert len(Kp) == len(K) + 2
    return frozenset(K), frozenset(L), frozenset(Kp)


def connected_sets(tree, max_size, within=None, containing=None):
    """All connected vertex sets of size 1..max_size inside ``within``.

    Sets are produced once each (as frozensets).  ``containing`` restricts
    to sets that contain that vertex.
    """
    allowed = set(range(tree.V)) if within is None else set(within)
    seen = set()
    roots = [containing] if containing is not None else sorted(allowed)
    out = []

    def grow(current, frontier):
        key = frozenset(current)
        if key in seen:
            return
        seen.add(key)
        out.append(key)
        if len(current) == max_size:
            return
        for w in sorted(frontier):
            new_frontier = (frontier | {int(u) for u in tree.nbr[w] if u >= 0 and int(u) in allowed}) - current - {w}
            current.add(w)
            grow(current, new_frontier)
            current.remove(w)

    for r in roots:
        if r in allowed:
            grow({r}, {int(u) for u in tree.nbr[r] if u >= 0 and int(u) in allowed})
    return out


def random_subsets(tree, within, size, rng, count):
    within = sorted(within)
    return [frozenset(rng.choice(within, size=size, replace=False).tolist()) for _ in range(count)]


def all_subsets(vertices, max_size):
    vertices = sorted(vertices)
    for k in range(1, max_size + 1):
        for c in combinations(vertices, k):
            yield frozenset(c)
