"""Expression graphs with exact first- and second-order differentiation.

A :class:`Graph` owns a pool of scalar nodes (constants, variables and
elementary operations).  Expressions are built through operator overloading
on :class:`Expr` handles.  The module provides

* ``evaluate`` / ``Expr.eval`` -- forward evaluation,
* ``gradient`` -- exact reverse-mode gradient of a scalar expression,
* ``jacobian`` -- exact sparse Jacobian of a list of expressions,
* ``hessian`` -- sparse symmetric Hessian (reverse mode applied to the
  symbolic gradient),
* ``grad_graph`` -- the symbolic gradient as first-class expressions, so
  stationarity conditions can be used as constraints of an outer problem.

Evaluation sweeps run as numba kernels over flat arrays; per-output tapes
(the ancestor sub-graphs) are collected once and reused, so a Jacobian costs
O(sum of row sub-graph sizes) regardless of the number of variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "Graph",
    "Expr",
    "SparsePattern",
    "DomainError",
    "VectorFunction",
    "evaluate",
    "gradient",
    "jacobian",
    "hessian",
    "grad_graph",
    "exp",
    "log",
    "sin",
    "tanh",
    "logistic",
    "smooth_max",
    "dump",
]

# Opcodes (int8 in the frozen arrays).
CONST = 0
VAR = 1
ADD = 2
SUB = 3
MUL = 4
DIV = 5
POW = 6  # exponent is a compile-time float in aux
NEG = 7
EXP = 8
LOG = 9
SIN = 10
TANH = 11
LOGISTIC = 12
SMAX = 13  # smooth max(a, b), sqrt-regularized with width SMOOTH_MAX_BETA

# Smoothing width of the smooth-max primitive.  |smax(a,b) - max(a,b)| is
# at most SMOOTH_MAX_BETA/2 and decays quadratically away from a == b.
SMOOTH_MAX_BETA = 1e-3

_OP_NAMES = {
    CONST: "const", VAR: "var", ADD: "add", SUB: "sub", MUL: "mul",
    DIV: "div", POW: "pow", NEG: "neg", EXP: "exp", LOG: "log",
    SIN: "sin", TANH: "tanh", LOGISTIC: "logistic", SMAX: "smax",
}


class DomainError(ValueError):
    """Raised when evaluation hits a guarded domain violation."""

    def __init__(self, node, op):
        self.node = node
        self.op = op
        super().__init__(f"domain violation in node {node} ({_OP_NAMES.get(op, op)})")


@dataclass(frozen=True)
class SparsePattern:
    """Sorted, deduplicated (row, col) index pairs of a sparse matrix."""

    rows: np.ndarray
    cols: np.ndarray
    shape: tuple[int, int]

    def __post_init__(self):
        if len(self.rows) != len(self.cols):
            raise ValueError("rows and cols must have equal length")
        if len(self.rows) and (self.rows.max() >= self.shape[0] or self.cols.max() >= self.shape[1]):
            raise ValueError("pattern index out of matrix bounds")

    @property
    def nnz(self):
        return len(self.rows)


def _stable_logistic(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _smax_value(x, y):
    d = x - y
    return 0.5 * (x + y + math.sqrt(d * d + SMOOTH_MAX_BETA * SMOOTH_MAX_BETA))


class Expr:
    """Handle to one node of a :class:`Graph`; supports arithmetic operators."""

    __slots__ = ("graph", "nid")

    def __init__(self, graph, nid):
        self.graph = graph
        self.nid = nid

    def _lift(self, other):
        if isinstance(other, Expr):
            if other.graph is not self.graph:
                raise ValueError("cannot mix expressions from different graphs")
            return other
        return self.graph.const(float(other))

    def __add__(self, other):
        return self.graph._emit(ADD, self.nid, self._lift(other).nid)

    def __radd__(self, other):
        return self.graph._emit(ADD, self._lift(other).nid, self.nid)

    def __sub__(self, other):
        return self.graph._emit(SUB, self.nid, self._lift(other).nid)

    def __rsub__(self, other):
        return self.graph._emit(SUB, self._lift(other).nid, self.nid)

    def __mul__(self, other):
        return self.graph._emit(MUL, self.nid, self._lift(other).nid)

    def __rmul__(self, other):
        return self.graph._emit(MUL, self._lift(other).nid, self.nid)

    def __truediv__(self, other):
        return self.graph._emit(DIV, self.nid, self._lift(other).nid)

    def __rtruediv__(self, other):
        return self.graph._emit(DIV, self._lift(other).nid, self.nid)

    def __pow__(self, p):
        if isinstance(p, Expr):
            raise TypeError("power supports constant exponents only")
        return self.graph._emit(POW, self.nid, -1, aux=float(p))

    def __neg__(self):
        return self.graph._emit(NEG, self.nid, -1)

    def eval(self, x):
        return float(evaluate(self.graph, [self.nid], x)[0])

    def __repr__(self):
        return f"Expr({_OP_NAMES[self.graph.op[self.nid]]}@{self.nid})"


def _as_nid(e):
    return e.nid if isinstance(e, Expr) else int(e)


class Graph:
    """Append-only DAG of scalar expression nodes with hash-consing."""

    def __init__(self):
        self.op = []
        self.a = []
        self.b = []
        self.aux = []
        self.var_nodes = []  # variable index -> node id
        self._memo = {}
        self._frozen = None

    # -- construction -----------------------------------------------------

    def var(self):
        idx = len(self.var_nodes)
        nid = self._append(VAR, idx, -1, 0.0)
        self.var_nodes.append(nid)
        return Expr(self, nid)

    def vars(self, k):
        return [self.var() for _ in range(k)]

    def const(self, v):
        v = float(v)
        key = (CONST, v)
        nid = self._memo.get(key)
        if nid is None:
            nid = self._append(CONST, -1, -1, v)
            self._memo[key] = nid
        return Expr(self, nid)

    @property
    def n_vars(self):
        return len(self.var_nodes)

    @property
    def size(self):
        return len(self.op)

    def _append(self, op, a, b, aux):
        self.op.append(op)
        self.a.append(a)
        self.b.append(b)
        self.aux.append(aux)
        self._frozen = None
        return len(self.op) - 1

    def _const_val(self, nid):
        if self.op[nid] == CONST:
            return self.aux[nid]
        return None

    def _emit(self, op, a, b, aux=0.0):
        """Create (or reuse) an operation node, with light constant folding."""
        ca = self._const_val(a)
        cb = self._const_val(b) if b >= 0 else None

        # Constant folding whenever all children are constants and the value
        # is well defined.
        if ca is not None and (b < 0 or cb is not None):
            v = self._try_fold(op, ca, cb, aux)
            if v is not None:
                return self.const(v)

        # Identity simplifications (keep symbolic gradients lean).
        if op == ADD:
            if ca == 0.0:
                return Expr(self, b)
            if cb == 0.0:
                return Expr(self, a)
        elif op == SUB:
            if cb == 0.0:
                return Expr(self, a)
            if ca == 0.0:
                return self._emit(NEG, b, -1)
        elif op == MUL:
            if ca == 1.0:
                return Expr(self, b)
            if cb == 1.0:
                return Expr(self, a)
            if ca == 0.0 or cb == 0.0:
                return self.const(0.0)
            if ca == -1.0:
                return self._emit(NEG, b, -1)
            if cb == -1.0:
                return self._emit(NEG, a, -1)
        elif op == DIV:
            if ca == 0.0:
                return self.const(0.0)
            if cb == 1.0:
                return Expr(self, a)
        elif op == POW:
            if aux == 1.0:
                return Expr(self, a)
            if aux == 0.0:
                return self.const(1.0)
        elif op == NEG:
            if self.op[a] == NEG:
                return Expr(self, self.a[a])

        key = (op, a, b, aux)
        nid = self._memo.get(key)
        if nid is None:
            nid = self._append(op, a, b, aux)
            self._memo[key] = nid
        return Expr(self, nid)

    @staticmethod
    def _try_fold(op, ca, cb, aux):
        try:
            if op == ADD:
                return ca + cb
            if op == SUB:
                return ca - cb
            if op == MUL:
                return ca * cb
            if op == DIV:
                return ca / cb if cb != 0.0 else None
            if op == NEG:
                return -ca
            if op == EXP:
                return math.exp(ca) if ca < 700.0 else None
            if op == LOG:
                return math.log(ca) if ca > 0.0 else None
            if op == SIN:
                return math.sin(ca)
            if op == TANH:
                return math.tanh(ca)
            if op == LOGISTIC:
                return _stable_logistic(ca)
            if op == SMAX:
                return _smax_value(ca, cb)
            if op == POW:
                if ca < 0.0 and aux != round(aux):
                    return None
                if ca == 0.0 and aux < 1.0:
                    return None
                return ca ** aux
        except (OverflowError, ValueError):
            return None
        return None

    # -- frozen array views ------------------------------------------------

    def freeze(self):
        if self._frozen is None:
            self._frozen = (
                np.asarray(self.op, dtype=np.int8),
                np.asarray(self.a, dtype=np.int32),
                np.asarray(self.b, dtype=np.int32),
                np.asarray(self.aux, dtype=np.float64),
            )
        return self._frozen

    def tape_for(self, out):
        """Ancestor node ids of ``out`` in topological (ascending) order."""
        op, a, b, _ = self.freeze()
        return _collect_tape_py(op, a, b, _as_nid(out))

    def forward(self, x, tape=None):
        """Evaluate the graph; returns the full value array.

        With ``tape`` given, only those (ancestor-closed, ascending) nodes
        are computed; other entries of the result are unspecified.
        """
        op, a, b, aux = self.freeze()
        x = np.ascontiguousarray(x, dtype=np.float64)
        if len(x) != self.n_vars:
            raise ValueError(f"expected {self.n_vars} variable values, got {len(x)}")
        vals = np.empty(self.size, dtype=np.float64)
        if tape is None:
            bad = _forward_kernel(op, a, b, aux, x, vals)
        else:
            bad = _forward_tape_kernel(op, a, b, aux, x, vals, tape)
        if bad >= 0:
            raise DomainError(bad, int(op[bad]))
        return vals


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _eval_node(op, a, b, aux, x, vals, i):
    """Evaluate node i into vals[i]; returns False on a domain violation."""
    o = op[i]
    if o == CONST:
        vals[i] = aux[i]
    elif o == VAR:
        vals[i] = x[a[i]]
    elif o == ADD:
        vals[i] = vals[a[i]] + vals[b[i]]
    elif o == SUB:
        vals[i] = vals[a[i]] - vals[b[i]]
    elif o == MUL:
        vals[i] = vals[a[i]] * vals[b[i]]
    elif o == DIV:
        den = vals[b[i]]
        if den == 0.0:
            return False
        vals[i] = vals[a[i]] / den
    elif o == POW:
        base = vals[a[i]]
        p = aux[i]
        if base < 0.0:
            if p != math.floor(p):
                return False
        elif base == 0.0 and p < 1.0:
            return False
        vals[i] = base ** p
    elif o == NEG:
        vals[i] = -vals[a[i]]
    elif o == EXP:
        vals[i] = math.exp(min(vals[a[i]], 709.0))
    elif o == LOG:
        arg = vals[a[i]]
        if arg <= 0.0:
            return False
        vals[i] = math.log(arg)
    elif o == SIN:
        vals[i] = math.sin(vals[a[i]])
    elif o == TANH:
        vals[i] = math.tanh(vals[a[i]])
    elif o == LOGISTIC:
        arg = vals[a[i]]
        if arg >= 0.0:
            vals[i] = 1.0 / (1.0 + math.exp(-arg))
        else:
            e = math.exp(arg)
            vals[i] = e / (1.0 + e)
    elif o == SMAX:
        va = vals[a[i]]
        vb = vals[b[i]]
        d = va - vb
        vals[i] = 0.5 * (va + vb + math.sqrt(d * d + SMOOTH_MAX_BETA * SMOOTH_MAX_BETA))
    return True


@njit(cache=True)
def _forward_tape_kernel(op, a, b, aux, x, vals, tape):
    for t in range(tape.shape[0]):
        i = tape[t]
        if not _eval_node(op, a, b, aux, x, vals, i):
            return i
    return -1


@njit(cache=True)
def _forward_kernel(op, a, b, aux, x, vals):
    n = op.shape[0]
    for i in range(n):
        if not _eval_node(op, a, b, aux, x, vals, i):
            return i
    return -1


@njit(cache=True)
def _reverse_segment(op, a, b, aux, vals, tape, adj):
    """One reverse sweep over ``tape`` (descending); adj must be seeded."""
    for t in range(tape.shape[0] - 1, -1, -1):
        i = tape[t]
        g = adj[i]
        if g == 0.0:
            continue
        o = op[i]
        if o == ADD:
            adj[a[i]] += g
            adj[b[i]] += g
        elif o == SUB:
            adj[a[i]] += g
            adj[b[i]] -= g
        elif o == MUL:
            adj[a[i]] += g * vals[b[i]]
            adj[b[i]] += g * vals[a[i]]
        elif o == DIV:
            den = vals[b[i]]
            adj[a[i]] += g / den
            adj[b[i]] -= g * vals[i] / den
        elif o == POW:
            p = aux[i]
            base = vals[a[i]]
            adj[a[i]] += g * p * base ** (p - 1.0)
        elif o == NEG:
            adj[a[i]] -= g
        elif o == EXP:
            adj[a[i]] += g * vals[i]
        elif o == LOG:
            adj[a[i]] += g / vals[a[i]]
        elif o == SIN:
            adj[a[i]] += g * math.sin(vals[a[i]] + 0.5 * math.pi)
        elif o == TANH:
            y = vals[i]
            adj[a[i]] += g * (1.0 - y * y)
        elif o == LOGISTIC:
            y = vals[i]
            adj[a[i]] += g * y * (1.0 - y)
        elif o == SMAX:
            va = vals[a[i]]
            vb = vals[b[i]]
            r = 2.0 * vals[i] - va - vb
            d = (va - vb) / r
            adj[a[i]] += g * 0.5 * (1.0 + d)
            adj[b[i]] += g * 0.5 * (1.0 - d)


@njit(cache=True)
def _collect_tape(op, a, b, out, visited, epoch, stack, buf):
    top = 0
    cnt = 0
    stack[top] = out
    top += 1
    while top > 0:
        top -= 1
        nid = stack[top]
        if visited[nid] == epoch:
            continue
        visited[nid] = epoch
        buf[cnt] = nid
        cnt += 1
        o = op[nid]
        if o != CONST and o != VAR:
            stack[top] = a[nid]
            top += 1
            if b[nid] >= 0:
                stack[top] = b[nid]
                top += 1
    return cnt


def _collect_tape_py(op, a, b, out):
    n = op.shape[0]
    visited = np.full(n, -1, dtype=np.int32)
    stack = np.empty(2 * n + 2, dtype=np.int32)
    buf = np.empty(n, dtype=np.int32)
    cnt = _collect_tape(op, a, b, out, visited, 0, stack, buf)
    tape = buf[:cnt].copy()
    tape.sort()
    return tape


@njit(cache=True)
def _jacobian_sweep(op, a, b, aux, vals, tapes, offsets, seeds,
                    gather_nodes, indptr, adj, out_data):
    n_rows = seeds.shape[0]
    for r in range(n_rows):
        lo = offsets[r]
        hi = offsets[r + 1]
        for t in range(lo, hi):
            adj[tapes[t]] = 0.0
        adj[seeds[r]] = 1.0
        _reverse_segment(op, a, b, aux, vals, tapes[lo:hi], adj)
        for p in range(indptr[r], indptr[r + 1]):
            out_data[p] = adj[gather_nodes[p]]


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------


def evaluate(graph, outs, x):
    """Evaluate a list of output nodes/exprs at the point ``x``.

    Only the ancestors of the requested outputs are computed, so unrelated
    guarded nodes sharing the graph cannot raise spurious domain errors.
    """
    out_ids = [_as_nid(o) for o in outs]
    tape = np.unique(np.concatenate([graph.tape_for(o) for o in out_ids]))
    vals = graph.forward(x, tape=tape.astype(np.int32))
    return np.array([vals[o] for o in out_ids], dtype=np.float64)


def gradient(expr, at, graph=None):
    """Exact reverse-mode gradient of a scalar expression over all variables."""
    if isinstance(expr, Expr):
        graph = expr.graph
    out = _as_nid(expr)
    op, a, b, aux = graph.freeze()
    tape = graph.tape_for(out)
    vals = graph.forward(at, tape=tape)
    adj = np.zeros(graph.size, dtype=np.float64)
    adj[out] = 1.0
    _reverse_segment(op, a, b, aux, vals, tape, adj)
    g = np.zeros(graph.n_vars, dtype=np.float64)
    for idx, nid in enumerate(graph.var_nodes):
        g[idx] = adj[nid]
    return g


class VectorFunction:
    """Compiled value/Jacobian oracle for a fixed list of output expressions.

    The sparsity pattern is determined by the graph structure alone and is
    therefore independent of the evaluation point.  ``wrt`` restricts the
    Jacobian columns to a subset of the graph's variables.
    """

    def __init__(self, graph, outs, wrt=None):
        self.graph = graph
        self.out_ids = np.array([_as_nid(o) for o in outs], dtype=np.int32)
        if wrt is None:
            wrt_idx = np.arange(graph.n_vars, dtype=np.int32)
        else:
            idxs = []
            for w in wrt:
                if isinstance(w, Expr):
                    if graph.op[w.nid] != VAR:
                        raise ValueError("wrt entries must be variable expressions or indices")
                    idxs.append(graph.a[w.nid])
                else:
                    idxs.append(int(w))
            wrt_idx = np.array(idxs, dtype=np.int32)
        self.wrt_idx = wrt_idx
        self.n_cols = len(wrt_idx)
        self._build()

    def _build(self):
        g = self.graph
        op, a, b, aux = g.freeze()
        n = g.size
        col_of_var = np.full(g.n_vars, -1, dtype=np.int32)
        for c, vi in enumerate(self.wrt_idx):
            col_of_var[vi] = c

        visited = np.full(n, -1, dtype=np.int32)
        stack = np.empty(2 * n + 2, dtype=np.int32)
        buf = np.empty(n, dtype=np.int32)

        tape_list = []
        offsets = [0]
        gather_nodes = []
        gather_cols = []
        indptr = [0]
        for epoch, out in enumerate(self.out_ids):
            cnt = _collect_tape(op, a, b, out, visited, epoch, stack, buf)
            tape = np.sort(buf[:cnt])
            tape_list.append(tape)
            offsets.append(offsets[-1] + cnt)
            # variable nodes reachable from this output, in column order
            entries = []
            for nid in tape:
                if op[nid] == VAR:
                    c = col_of_var[a[nid]]
                    if c >= 0:
                        entries.append((c, nid))
            entries.sort()
            for c, nid in entries:
                gather_cols.append(c)
                gather_nodes.append(nid)
            indptr.append(len(gather_nodes))

        self.tapes = np.concatenate(tape_list) if tape_list else np.empty(0, np.int32)
        self.tapes = self.tapes.astype(np.int32)
        self.union_tape = np.unique(self.tapes).astype(np.int32)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.gather_nodes = np.asarray(gather_nodes, dtype=np.int32)
        self.indices = np.asarray(gather_cols, dtype=np.int32)
        self.indptr = np.asarray(indptr, dtype=np.int32)
        rows = np.repeat(np.arange(len(self.out_ids), dtype=np.int32),
                         np.diff(self.indptr))
        self.pattern = SparsePattern(rows, self.indices.copy(),
                                     (len(self.out_ids), self.n_cols))

    @property
    def total_tape_len(self):
        return int(self.offsets[-1])

    def value(self, x, vals=None):
        if vals is None:
            vals = self.graph.forward(x, tape=self.union_tape)
        return vals[self.out_ids].copy()

    def jacobian(self, x, vals=None):
        from scipy.sparse import csr_matrix

        if vals is None:
            vals = self.graph.forward(x, tape=self.union_tape)
        op, a, b, aux = self.graph.freeze()
        adj = np.zeros(self.graph.size, dtype=np.float64)
        data = np.empty(len(self.gather_nodes), dtype=np.float64)
        _jacobian_sweep(op, a, b, aux, vals, self.tapes, self.offsets,
                        self.out_ids, self.gather_nodes, self.indptr, adj, data)
        return csr_matrix((data, self.indices, self.indptr),
                          shape=(len(self.out_ids), self.n_cols))


def jacobian(exprs, at):
    """Sparse Jacobian of a list of expressions; returns (csr, pattern)."""
    exprs = list(exprs)
    if not exprs:
        raise ValueError("need at least one output expression")
    graph = exprs[0].graph
    vf = VectorFunction(graph, exprs)
    return vf.jacobian(at), vf.pattern


def grad_graph(expr, wrt):
    """Symbolic reverse-mode gradient of ``expr`` w.r.t. a list of variables.

    Returns one expression per entry of ``wrt``; evaluating them equals
    ``gradient`` restricted to those variables.
    """
    g = expr.graph
    out = _as_nid(expr)
    tape = g.tape_for(out)
    adj = {out: g.const(1.0)}

    def acc(nid, contrib):
        cur = adj.get(nid)
        adj[nid] = contrib if cur is None else cur + contrib

    for nid in tape[::-1]:
        gbar = adj.get(int(nid))
        if gbar is None:
            continue
        nid = int(nid)
        o = g.op[nid]
        if o in (CONST, VAR):
            continue
        ea = Expr(g, g.a[nid])
        y = Expr(g, nid)
        if o == ADD:
            acc(g.a[nid], gbar)
            acc(g.b[nid], gbar)
        elif o == SUB:
            acc(g.a[nid], gbar)
            acc(g.b[nid], -gbar)
        elif o == MUL:
            eb = Expr(g, g.b[nid])
            acc(g.a[nid], gbar * eb)
            acc(g.b[nid], gbar * ea)
        elif o == DIV:
            eb = Expr(g, g.b[nid])
            acc(g.a[nid], gbar / eb)
            acc(g.b[nid], -(gbar * y / eb))
        elif o == POW:
            p = g.aux[nid]
            acc(g.a[nid], gbar * (ea ** (p - 1.0) * p))
        elif o == NEG:
            acc(g.a[nid], -gbar)
        elif o == EXP:
            acc(g.a[nid], gbar * y)
        elif o == LOG:
            acc(g.a[nid], gbar / ea)
        elif o == SIN:
            # cos(x) written as sin(x + pi/2): keeps the op set closed
            acc(g.a[nid], gbar * g._emit(SIN, (ea + 0.5 * math.pi).nid, -1))
        elif o == TANH:
            acc(g.a[nid], gbar * (1.0 - y * y))
        elif o == LOGISTIC:
            acc(g.a[nid], gbar * (y * (1.0 - y)))
        elif o == SMAX:
            eb = Expr(g, g.b[nid])
            r = 2.0 * y - ea - eb
            d = (ea - eb) / r
            acc(g.a[nid], gbar * ((1.0 + d) * 0.5))
            acc(g.b[nid], gbar * ((1.0 - d) * 0.5))
        else:  # pragma: no cover
            raise AssertionError(f"unhandled op {o}")

    zero = g.const(0.0)
    result = []
    for w in wrt:
        wn = _as_nid(w)
        if g.op[wn] != VAR:
            raise ValueError("wrt entries must be variable expressions")
        result.append(adj.get(wn, zero))
    return result


def hessian(expr, at):
    """Sparse symmetric Hessian of a scalar expression at ``at``.

    Computed by reverse-mode differentiation of the symbolic gradient, so
    only one level of symbolic differentiation is ever required of callers.
    """
    from scipy.sparse import csr_matrix

    g = expr.graph
    rows = grad_graph(expr, [Expr(g, nid) for nid in g.var_nodes])
    vf = VectorFunction(g, rows)
    H = vf.jacobian(at)
    H = (H + H.T) * 0.5
    return csr_matrix(H)


def _wrap_unary(op):
    def f(e):
        if isinstance(e, Expr):
            return e.graph._emit(op, e.nid, -1)
        v = Graph._try_fold(op, float(e), None, 0.0)
        if v is None:
            raise DomainError(-1, op)
        return v
    return f


exp = _wrap_unary(EXP)
log = _wrap_unary(LOG)
sin = _wrap_unary(SIN)
tanh = _wrap_unary(TANH)
logistic = _wrap_unary(LOGISTIC)


def smooth_max(a, b):
    """Twice-differentiable max(a, b); see SMOOTH_MAX_BETA for the width."""
    if isinstance(a, Expr):
        return a.graph._emit(SMAX, a.nid, a._lift(b).nid)
    if isinstance(b, Expr):
        return b.graph._emit(SMAX, b._lift(a).nid, b.nid)
    return _smax_value(float(a), float(b))


def dump(graph, outs=None):
    """Plain-text listing of the graph (debugging aid)."""
    lines = []
    for i in range(graph.size):
        o = graph.op[i]
        if o == CONST:
            lines.append(f"{i}: const {graph.aux[i]!r}")
        elif o == VAR:
            lines.append(f"{i}: var x[{graph.a[i]}]")
        elif o == POW:
            lines.append(f"{i}: pow {graph.a[i]} ** {graph.aux[i]!r}")
        elif graph.b[i] >= 0:
            lines.append(f"{i}: {_OP_NAMES[o]} {graph.a[i]} {graph.b[i]}")
        else:
            lines.append(f"{i}: {_OP_NAMES[o]} {graph.a[i]}")
    if outs is not None:
        lines.append("outputs: " + " ".join(str(_as_nid(o)) for o in outs))
    return "\n".join(lines)
