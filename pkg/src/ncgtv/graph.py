"""Sparse undirected graphs, Laplacians, incidence matrices and regularizers.

All containers are immutable after construction; the operations are pure
functions, so everything here is safe to share across threads.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import kernels

#: hard cap for the dense eigenvalue oracle
DENSE_EIG_CAP = 256


@dataclass(frozen=True)
class Graph:
    """Positive undirected graph: N nodes plus weighted edges with i < j.

    Each undirected edge is stored once.  Duplicate (i, j) pairs are
    rejected at construction; merging them silently would hide input bugs.
    """

    num_nodes: int
    edge_i: np.ndarray
    edge_j: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        n = self.num_nodes
        if n <= 0:
            raise ValueError("graph needs at least one node")
        ei = np.ascontiguousarray(self.edge_i, dtype=np.int64)
        ej = np.ascontiguousarray(self.edge_j, dtype=np.int64)
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        if not (ei.shape == ej.shape == w.shape) or ei.ndim != 1:
            raise ValueError("edge arrays must be 1-d and of equal length")
        if ei.size:
            if np.any(ei < 0) or np.any(ej >= n) or np.any(ei >= ej):
                raise ValueError("edges must satisfy 0 <= i < j < num_nodes")
            if np.any(w < 0):
                raise ValueError("edge weights must be nonnegative")
            key = ei * n + ej
            if np.unique(key).size != key.size:
                raise ValueError("duplicate edges are not allowed")
        for name, arr in (("edge_i", ei), ("edge_j", ej), ("weights", w)):
            object.__setattr__(self, name, arr)
        self.edge_i.setflags(write=False)
        self.edge_j.setflags(write=False)
        self.weights.setflags(write=False)

    @classmethod
    def from_edges(cls, num_nodes, edges):
        """Build from an iterable of (i, j, w) triples."""
        edges = list(edges)
        if edges:
            ei, ej, w = (np.asarray(c) for c in zip(*edges))
        else:
            ei = ej = np.zeros(0, dtype=np.int64)
            w = np.zeros(0)
        return cls(num_nodes, ei, ej, w)

    @property
    def num_edges(self):
        return self.edge_i.size

    def degrees(self):
        """Weighted degree of every node."""
        d = np.bincount(self.edge_i, weights=self.weights, minlength=self.num_nodes)
        d += np.bincount(self.edge_j, weights=self.weights, minlength=self.num_nodes)
        return d


@dataclass(frozen=True)
class IncidenceMatrix:
    """Edge-node incidence matrix: row m holds +w at the start node and -w
    at the end node of edge m.  Orientation is deterministic: the smaller
    node index is the start node."""

    num_nodes: int
    start: np.ndarray
    end: np.ndarray
    weights: np.ndarray

    @property
    def num_edges(self):
        return self.start.size

    def matvec(self, x):
        """C x: weighted differences across edges."""
        x = as_signal(x, self.num_nodes)
        return self.weights * (x[self.start] - x[self.end])

    def rmatvec(self, z):
        """C^T z: scatter edge values back to nodes."""
        z = np.ascontiguousarray(z, dtype=np.float64)
        if z.shape != (self.num_edges,):
            raise ValueError(f"expected length-{self.num_edges} edge vector")
        return kernels.scatter_add_signed(
            self.num_nodes, self.start, self.end, self.weights * z
        )

    def to_dense(self):
        c = np.zeros((self.num_edges, self.num_nodes))
        c[np.arange(self.num_edges), self.start] = self.weights
        c[np.arange(self.num_edges), self.end] = -self.weights
        return c


@dataclass(frozen=True)
class SparseSymmetric:
    """Symmetric sparse matrix stored as a diagonal plus the strict upper
    triangle (ui < uj); the mirrored lower-triangle entries are implicit."""

    diag: np.ndarray
    ui: np.ndarray
    uj: np.ndarray
    uv: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(self.diag, dtype=np.float64)
        ui = np.ascontiguousarray(self.ui, dtype=np.int64)
        uj = np.ascontiguousarray(self.uj, dtype=np.int64)
        uv = np.ascontiguousarray(self.uv, dtype=np.float64)
        if ui.size and (np.any(ui < 0) or np.any(uj >= d.size) or np.any(ui >= uj)):
            raise ValueError("off-diagonal entries must satisfy 0 <= i < j < n")
        for name, arr in (("diag", d), ("ui", ui), ("uj", uj), ("uv", uv)):
            object.__setattr__(self, name, arr)

    @property
    def n(self):
        return self.diag.size

    @classmethod
    def zeros(cls, n):
        z = np.zeros(0, dtype=np.int64)
        return cls(np.zeros(n), z, z, np.zeros(0))

    def add_identity(self, alpha):
        """self + alpha * I."""
        return SparseSymmetric(self.diag + alpha, self.ui, self.uj, self.uv)

    def scaled(self, alpha):
        return SparseSymmetric(alpha * self.diag, self.ui, self.uj, alpha * self.uv)

    def add(self, other):
        """Matrix sum; patterns are merged and duplicate entries coalesced."""
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        ui = np.concatenate([self.ui, other.ui])
        uj = np.concatenate([self.uj, other.uj])
        uv = np.concatenate([self.uv, other.uv])
        if ui.size:
            key = ui * self.n + uj
            order = np.argsort(key, kind="stable")
            key = key[order]
            uv = uv[order]
            uniq, start = np.unique(key, return_index=True)
            sums = np.add.reduceat(uv, start) if key.size else uv
            ui = (uniq // self.n).astype(np.int64)
            uj = (uniq % self.n).astype(np.int64)
            uv = sums
        return SparseSymmetric(self.diag + other.diag, ui, uj, uv)

    def row_abs_offdiag_sums(self):
        """Per-row sum of |off-diagonal| entries (Gershgorin radii)."""
        r = np.zeros(self.n)
        if self.ui.size:
            av = np.abs(self.uv)
            r += np.bincount(self.ui, weights=av, minlength=self.n)
            r += np.bincount(self.uj, weights=av, minlength=self.n)
        return r

    def to_dense(self):
        a = np.diag(self.diag).astype(np.float64)
        a[self.ui, self.uj] = self.uv
        a[self.uj, self.ui] = self.uv
        return a


def as_signal(x, n=None):
    """Validate/convert a node signal to a contiguous float64 vector."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("signal must be a 1-d vector")
    if n is not None and x.size != n:
        raise ValueError(f"signal length {x.size} does not match graph size {n}")
    return x


def laplacian(g: Graph) -> SparseSymmetric:
    """Combinatorial Laplacian diag(W 1) - W; row sums are zero."""
    return SparseSymmetric(g.degrees(), g.edge_i, g.edge_j, -g.weights)


def laplacian_from_weights(g: Graph, weights) -> SparseSymmetric:
    """Laplacian of ``g`` with its edge weights replaced by ``weights``."""
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if w.shape != (g.num_edges,):
        raise ValueError("one weight per edge required")
    d = np.bincount(g.edge_i, weights=w, minlength=g.num_nodes)
    d += np.bincount(g.edge_j, weights=w, minlength=g.num_nodes)
    return SparseSymmetric(d, g.edge_i, g.edge_j, -w)


def incidence(g: Graph) -> IncidenceMatrix:
    """One row per edge with +w at the smaller-index endpoint."""
    return IncidenceMatrix(g.num_nodes, g.edge_i, g.edge_j, g.weights)


def gtv(c: IncidenceMatrix, x) -> float:
    """Graph total variation: sum of w_ij |x_i - x_j| = ||C x||_1."""
    return float(np.sum(np.abs(c.matvec(x))))


def glr(lap: SparseSymmetric, x) -> float:
    """Graph Laplacian regularizer x^T L x."""
    x = as_signal(x, lap.n)
    return float(x @ spmv(lap, x))


def spmv(a: SparseSymmetric, x):
    """Sparse symmetric matrix-vector product."""
    x = as_signal(x, a.n)
    return kernels.spmv_sym(a.diag, a.ui, a.uj, a.uv, x)


def dense_min_eig(a: SparseSymmetric, max_n: int = DENSE_EIG_CAP) -> float:
    """Smallest eigenvalue via cyclic Jacobi rotations.

    Test/diagnostic oracle only; refuses matrices larger than ``max_n``.
    """
    if a.n > max_n:
        raise ValueError(f"dense eigenvalue oracle capped at n={max_n}, got {a.n}")
    return float(kernels.jacobi_min_eig(a.to_dense(), 64))


# ---------------------------------------------------------------------------
# line-oriented text serialization: "N M" header, then "i j w" per edge

def save_graph(g: Graph, path):
    with open(path, "w") as fh:
        fh.write(f"{g.num_nodes} {g.num_edges}\n")
        for i, j, w in zip(g.edge_i, g.edge_j, g.weights):
            fh.write(f"{i} {j} {float(w)!r}\n")


def load_graph(path) -> Graph:
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 2:
        raise ValueError(f"{path}: missing graph header")
    n, m = int(tokens[0]), int(tokens[1])
    body = tokens[2:]
    if len(body) != 3 * m:
        raise ValueError(f"{path}: expected {3 * m} edge fields, got {len(body)}")
    ei = np.array([int(body[3 * k]) for k in range(m)], dtype=np.int64)
    ej = np.array([int(body[3 * k + 1]) for k in range(m)], dtype=np.int64)
    w = np.array([float(body[3 * k + 2]) for k in range(m)])
    return Graph(n, ei, ej, w)


def save_signal(x, path):
    x = as_signal(x)
    with open(path, "w") as fh:
        for v in x:
            fh.write(f"{float(v)!r}\n")


def load_signal(path):
    vals = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                vals.append(float(line))
    return np.array(vals)
