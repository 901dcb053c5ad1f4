"""Direct multiple-shooting transcription of the single-car lap problem.

States (v, E_f, E_b, t) live on all N grid nodes, inputs (P_k, P_f, P_brk)
on the N-1 intervals; the dynamics enter as Euler-forward defect equality
constraints.  The decision vector is laid out state-family-wise, then
input-family-wise, and is shared verbatim by the two-car game assembly.

Inequality rows are normalized by fixed, declared scales (bound ranges,
capacities) so that row gradients and multipliers are O(1); this keeps the
complementarity products of the game reformulation in well-scaled units.
The decision variables themselves stay in SI units.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import vehicle as veh
from . import wake as wk
from .track import TrackData
from .vehicle import AgentParams, AgentInput, AgentState, V_FLOOR

__all__ = [
    "BoundaryConditions",
    "VarLayout",
    "NlpProblem",
    "Trajectory",
    "build_single",
    "initial_guess",
    "extract_trajectory",
    "pack_trajectory",
    "export_trajectory_csv",
    "TRAJECTORY_CSV_HEADER",
]

TRAJECTORY_CSV_HEADER = "k,s_m,v_mps,Ef_J,Eb_J,t_s,Pk_W,Pf_W,Pbrk_W,delta"

# tie-break regularizer: suppresses simultaneous throttle-and-brake input
# permutations on flat sections without disturbing the lap time (the brake
# power is normalized to MW so the term stays ~1e-9 * O(1) per node)
BRAKE_REG_WEIGHT = 1e-9
BRAKE_REG_SCALE = 1e6


@dataclass(frozen=True)
class BoundaryConditions:
    """Per-lap boundary conditions of one agent."""

    v_init: float
    t_init: float
    E_b_init: float
    dE_b: float          # allocated battery delta: E_b(S) >= E_b_init + dE_b
    E_f_target: float    # allocated fuel energy: E_f(S) <= E_f_target

    def validate(self, params: AgentParams):
        if self.v_init <= 0:
            raise ValueError("v_init must be positive")
        if not 0 <= self.E_b_init <= params.E_b_max:
            raise ValueError("E_b_init outside battery capacity")
        if not 0 <= self.E_b_init + self.dE_b <= params.E_b_max:
            raise ValueError("E_b_init + dE_b outside battery capacity")
        if self.E_f_target < 0:
            raise ValueError("E_f_target must be non-negative")


@dataclass(frozen=True)
class VarLayout:
    """Index map of the 7N-3 decision variables of one agent."""

    N: int

    @property
    def n_primal(self):
        return 7 * self.N - 3

    def v(self, k):
        return k

    def E_f(self, k):
        return self.N + k

    def E_b(self, k):
        return 2 * self.N + k

    def t(self, k):
        return 3 * self.N + k

    def P_k(self, k):
        return 4 * self.N + k

    def P_f(self, k):
        return 5 * self.N - 1 + k

    def P_brk(self, k):
        return 6 * self.N - 2 + k

    def state_slices(self):
        N = self.N
        return {"v": slice(0, N), "E_f": slice(N, 2 * N),
                "E_b": slice(2 * N, 3 * N), "t": slice(3 * N, 4 * N)}

    def input_slices(self):
        N = self.N
        return {"P_k": slice(4 * N, 5 * N - 1),
                "P_f": slice(5 * N - 1, 6 * N - 2),
                "P_brk": slice(6 * N - 2, 7 * N - 3)}


class NlpProblem:
    """Assembled sparse NLP over an expression graph.

    Exposes the evaluation interface consumed by :func:`apexgame.solver.solve`:
    values, first-order oracles (one shared forward sweep for f, h, g and
    their derivatives) and the Lagrangian Hessian obtained by differentiating
    the symbolic gradient.  ``g_shift`` is added to the inequality values at
    evaluation time (used for the relaxed complementarity rows); it does not
    affect derivatives, so shifted copies share all compiled machinery.
    """

    def __init__(self, graph, objective, h, g, lb, ub, layout, x0,
                 var_scales=None, name="nlp", meta=None, g_shift=None):
        self.graph = graph
        self.objective = objective
        self.h = list(h)
        self.g = list(g)
        self.lb = np.asarray(lb, dtype=float)
        self.ub = np.asarray(ub, dtype=float)
        self.layout = layout
        self.x0 = np.asarray(x0, dtype=float)
        self.var_scales = None if var_scales is None else np.asarray(var_scales, float)
        self.name = name
        self.meta = meta or {}
        self.g_shift = (np.zeros(len(self.g)) if g_shift is None
                        else np.asarray(g_shift, dtype=float))
        if len(self.g_shift) != len(self.g):
            raise ValueError("g_shift length mismatch")
        self._shared = {"primal_vars": list(range(self.n_vars))}

    # -- dimensions ---------------------------------------------------------

    @property
    def n_vars(self):
        return len(self.lb)

    @property
    def n_eq(self):
        return len(self.h)

    @property
    def n_ineq(self):
        return len(self.g)

    # -- compiled oracles ---------------------------------------------------

    def _first_order_fn(self):
        vf = self._shared.get("first_order")
        if vf is None:
            outs = [self.objective] + self.h + self.g
            vf = ad.VectorFunction(self.graph, outs,
                                   wrt=self._shared["primal_vars"])
            self._shared["first_order"] = vf
        return vf

    def _hessian_fn(self):
        entry = self._shared.get("hessian")
        if entry is None:
            g = self.graph
            n_before = g.n_vars
            lam = g.vars(self.n_eq)
            mu = g.vars(self.n_ineq)
            L = self.objective
            for li, hi in zip(lam, self.h):
                L = L + li * hi
            for mj, gj in zip(mu, self.g):
                L = L + mj * gj
            xs = [ad.Expr(g, g.var_nodes[i]) for i in self._shared["primal_vars"]]
            rows = ad.grad_graph(L, xs)
            vf = ad.VectorFunction(g, rows, wrt=self._shared["primal_vars"])
            entry = (vf, n_before)
            self._shared["hessian"] = entry
        return entry

    def eval_all(self, x):
        vf = self._first_order_fn()
        vals = vf.value(self._full_x(x))
        f = float(vals[0])
        h = vals[1:1 + self.n_eq]
        g = vals[1 + self.n_eq:] + self.g_shift
        return f, h, g

    def first_order(self, x):
        vf = self._first_order_fn()
        full = self._full_x(x)
        vals = vf.value(full)
        J = vf.jacobian(full)
        f = float(vals[0])
        h = vals[1:1 + self.n_eq]
        g = vals[1 + self.n_eq:] + self.g_shift
        grad_f = J[0].toarray().ravel()
        Jh = J[1:1 + self.n_eq]
        Jg = J[1 + self.n_eq:]
        return f, h, g, grad_f, Jh, Jg

    def lag_hessian(self, x, w_obj, w_h, w_g):
        """Sparse Hessian of  w_obj*f + w_h'h + w_g'g  at x.

        Symmetrized via a cached union-pattern mapping so the sparsity is
        identical on every call (scipy's sparse arithmetic would prune
        value-dependent zeros otherwise).
        """
        from scipy.sparse import csr_matrix

        vf, n_before = self._hessian_fn()
        w_obj = float(w_obj)
        if w_obj == 0.0:
            raise ValueError("w_obj must be nonzero")
        full = np.zeros(self.graph.n_vars)
        full[:self.n_vars] = np.asarray(x, dtype=float)
        full[n_before:n_before + self.n_eq] = np.asarray(w_h, dtype=float) / w_obj
        full[n_before + self.n_eq:n_before + self.n_eq + self.n_ineq] = \
            np.asarray(w_g, dtype=float) / w_obj
        J = vf.jacobian(full)

        sym = self._shared.get("hess_sym")
        if sym is None:
            n = self.n_vars
            rows = np.repeat(np.arange(n), np.diff(J.indptr)).astype(np.int64)
            cols = J.indices.astype(np.int64)
            keys_a = rows * n + cols
            keys_b = cols * n + rows
            uniq = np.unique(np.concatenate([keys_a, keys_b]))
            pos_a = np.searchsorted(uniq, keys_a)
            pos_b = np.searchsorted(uniq, keys_b)
            out_rows = (uniq // n).astype(np.int32)
            out_cols = (uniq % n).astype(np.int32)
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.add.at(indptr, out_rows + 1, 1)
            indptr = np.cumsum(indptr)
            sym = (pos_a, pos_b, out_cols, indptr, len(uniq))
            self._shared["hess_sym"] = sym
        pos_a, pos_b, out_cols, indptr, nnz = sym
        data = np.bincount(pos_a, weights=0.5 * J.data, minlength=nnz)
        data += np.bincount(pos_b, weights=0.5 * J.data, minlength=nnz)
        return csr_matrix((data * w_obj, out_cols, indptr),
                          shape=(self.n_vars, self.n_vars))

    def _full_x(self, x):
        x = np.asarray(x, dtype=float)
        if len(x) != self.n_vars:
            raise ValueError(f"expected {self.n_vars} variables, got {len(x)}")
        extra = self.graph.n_vars - self.n_vars
        if extra:
            return np.concatenate([x, np.zeros(extra)])
        return x

    @property
    def jacobian_patterns(self):
        vf = self._first_order_fn()
        pat = vf.pattern
        h_mask = (pat.rows >= 1) & (pat.rows <= self.n_eq)
        g_mask = pat.rows > self.n_eq
        return (
            ad.SparsePattern(pat.rows[h_mask] - 1, pat.cols[h_mask],
                             (self.n_eq, self.n_vars)),
            ad.SparsePattern(pat.rows[g_mask] - 1 - self.n_eq, pat.cols[g_mask],
                             (self.n_ineq, self.n_vars)),
        )

    def with_g_shift(self, g_shift):
        """Copy sharing the graph and compiled oracles, new inequality shift."""
        clone = NlpProblem.__new__(NlpProblem)
        clone.__dict__.update(self.__dict__)
        clone.g_shift = np.asarray(g_shift, dtype=float).copy()
        if len(clone.g_shift) != len(self.g):
            raise ValueError("g_shift length mismatch")
        return clone


# ---------------------------------------------------------------------------
# row emission (shared between the single-agent build and the game assembly)
# ---------------------------------------------------------------------------


def _check_uniform(track: TrackData):
    ds = np.diff(track.s)
    if not np.allclose(ds, ds[0], rtol=1e-9, atol=1e-9):
        raise ValueError("track grid must be uniform; resample it first")
    return float(ds[0])


class _AgentVars:
    """Expression handles of one agent's decision variables."""

    def __init__(self, graph, layout, offset):
        self.layout = layout
        self.offset = offset
        idx = lambda i: ad.Expr(graph, graph.var_nodes[offset + i])
        N = layout.N
        self.v = [idx(layout.v(k)) for k in range(N)]
        self.E_f = [idx(layout.E_f(k)) for k in range(N)]
        self.E_b = [idx(layout.E_b(k)) for k in range(N)]
        self.t = [idx(layout.t(k)) for k in range(N)]
        self.P_k = [idx(layout.P_k(k)) for k in range(N - 1)]
        self.P_f = [idx(layout.P_f(k)) for k in range(N - 1)]
        self.P_brk = [idx(layout.P_brk(k)) for k in range(N - 1)]


def _row_scales(params: AgentParams, bc: BoundaryConditions):
    return {
        "P_k": max(params.P_k_max - params.P_k_min, 1.0),
        "P_f": params.P_f_max,
        "P_brk": params.P_f_max,
        "E_b": params.E_b_max,
        "v": 100.0,
        "E_f": max(bc.E_f_target, 1e6),
    }


def _emit_agent(track: TrackData, params: AgentParams, bc: BoundaryConditions,
                av: _AgentVars, opponent_t, wake: wk.WakeModel | None):
    """Objective, equality rows and inequality rows for one agent.

    ``opponent_t`` is None (free stream), a float vector (fixed opponent,
    +inf entries disable the interaction at a node) or a list of time
    expressions (coupled game build).  Returns (objective, h, g, deltas).
    """
    N = av.layout.N
    ds = _check_uniform(track)
    bc.validate(params)
    sc = _row_scales(params, bc)

    deltas = []
    for k in range(N - 1):
        if opponent_t is None:
            deltas.append(0.0)
            continue
        t_oth = opponent_t[k]
        if not isinstance(t_oth, ad.Expr) and np.isinf(t_oth):
            deltas.append(0.0)
            continue
        if wake is None:
            raise ValueError("a wake model is required when an opponent is present")
        deltas.append(wk.delta_smooth(wake, av.t[k] - t_oth))

    # equality rows: initial conditions, then Euler-forward shooting defects.
    # Energy rows are normalized like the inequality rows so the associated
    # multipliers are O(1); otherwise the stationarity block of the game
    # couples the fuel-multiplier chain to the rest of the problem only
    # through ~1/E_scale coefficients and turns numerically singular.
    s_ef = sc["E_f"]
    s_eb = sc["E_b"]
    h = [
        av.v[0] - bc.v_init,
        (av.E_f[0] - 0.0) / s_ef,
        (av.E_b[0] - bc.E_b_init) / s_eb,
        av.t[0] - bc.t_init,
    ]
    for k in range(N - 1):
        state = AgentState(v=av.v[k], E_f=av.E_f[k], E_b=av.E_b[k], t=av.t[k])
        u = AgentInput(P_k=av.P_k[k], P_f=av.P_f[k], P_brk=av.P_brk[k])
        rates = veh.dynamics_rhs(params, state, u, track.node(k), deltas[k])
        h.append(av.v[k + 1] - av.v[k] - ds * rates.dv_ds)
        h.append((av.E_f[k + 1] - av.E_f[k] - ds * rates.dEf_ds) / s_ef)
        h.append((av.E_b[k + 1] - av.E_b[k] - ds * rates.dEb_ds) / s_eb)
        h.append(av.t[k + 1] - av.t[k] - ds * rates.dt_ds)

    # inequality rows, oriented g <= 0 and normalized by declared scales
    g = []
    for k in range(N - 1):
        g.append((params.P_k_min - av.P_k[k]) / sc["P_k"])
        g.append((av.P_k[k] - params.P_k_max) / sc["P_k"])
        g.append((0.0 - av.P_f[k]) / sc["P_f"])
        g.append((av.P_f[k] - params.P_f_max) / sc["P_f"])
        g.append((0.0 - av.P_brk[k]) / sc["P_brk"])
    for k in range(N):
        g.append((0.0 - av.E_b[k]) / sc["E_b"])
        g.append((av.E_b[k] - params.E_b_max) / sc["E_b"])
    for k in range(N):
        g.append((av.v[k] - float(track.v_max[k])) / sc["v"])
    g.append((av.E_f[N - 1] - bc.E_f_target) / sc["E_f"])
    g.append(((bc.E_b_init + bc.dE_b) - av.E_b[N - 1]) / sc["E_b"])

    obj = av.t[N - 1]
    reg = None
    for k in range(N - 1):
        term = (av.P_brk[k] / BRAKE_REG_SCALE) ** 2.0
        reg = term if reg is None else reg + term
    if reg is not None:
        obj = obj + BRAKE_REG_WEIGHT * reg
    return obj, h, g, deltas


def _agent_bounds_scales(layout: VarLayout, params: AgentParams,
                         bc: BoundaryConditions):
    n = layout.n_primal
    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    lb[layout.state_slices()["v"]] = V_FLOOR
    d = np.empty(n)
    d[layout.state_slices()["v"]] = 100.0
    d[layout.state_slices()["E_f"]] = max(bc.E_f_target, 1e6)
    d[layout.state_slices()["E_b"]] = params.E_b_max
    d[layout.state_slices()["t"]] = 100.0
    for name in ("P_k", "P_f", "P_brk"):
        d[layout.input_slices()[name]] = 1e6
    return lb, ub, d


def build_single(track: TrackData, params: AgentParams, bc: BoundaryConditions,
                 opponent_time=None, wake: wk.WakeModel | None = None) -> NlpProblem:
    """Assemble the single-agent lap NLP on a uniform N-node grid.

    Without ``opponent_time`` the drag-reduction input is identically zero
    (free stream).  With a fixed opponent time vector the interaction enters
    through the agent's own time state; +inf entries are treated as "no
    opponent at this node" and produce a build identical to free stream.
    """
    N = track.n_nodes
    layout = VarLayout(N)
    if opponent_time is not None and len(opponent_time) != N:
        raise ValueError(f"opponent_time must have length {N}")
    graph = ad.Graph()
    graph.vars(layout.n_primal)
    av = _AgentVars(graph, layout, 0)
    obj, h, g, deltas = _emit_agent(track, params, bc, av, opponent_time, wake)
    lb, ub, d = _agent_bounds_scales(layout, params, bc)
    x0 = initial_guess(track, params, bc)
    meta = {"track": track, "params": params, "bc": bc, "wake": wake,
            "opponent_time": opponent_time, "deltas": deltas, "agent_vars": av}
    return NlpProblem(graph, obj, h, g, lb, ub, layout, x0,
                      var_scales=d, name=f"single-{track.name}-N{N}", meta=meta)


def initial_guess(track: TrackData, params: AgentParams,
                  bc: BoundaryConditions) -> np.ndarray:
    """Warm-start vector: near-v_max speeds, integrated time, energy ramps,
    steady-state inputs from the power balance clipped into their boxes."""
    N = track.n_nodes
    ds = _check_uniform(track)
    layout = VarLayout(N)
    x = np.zeros(layout.n_primal)
    v = np.maximum(0.9 * track.v_max, V_FLOOR)
    x[layout.state_slices()["v"]] = v
    t = np.empty(N)
    t[0] = bc.t_init
    for k in range(N - 1):
        t[k + 1] = t[k] + ds / v[k]
    x[layout.state_slices()["t"]] = t
    x[layout.state_slices()["E_f"]] = np.linspace(0.0, bc.E_f_target, N)
    x[layout.state_slices()["E_b"]] = np.linspace(bc.E_b_init,
                                                  bc.E_b_init + bc.dE_b, N)
    P_k = np.zeros(N - 1)
    P_f = np.zeros(N - 1)
    P_brk = np.zeros(N - 1)
    for k in range(N - 1):
        node = track.node(k)
        need = veh.external_force(params, v[k], node.gamma, node.alpha, 0.0) * v[k]
        pf = (need + params.P_e0) / params.eta_e
        pf = float(np.clip(pf, 0.0, params.P_f_max))
        resid = need - (params.eta_e * pf - params.P_e0)
        pk = float(np.clip(resid, params.P_k_min, params.P_k_max))
        resid -= pk
        P_f[k] = pf
        P_k[k] = pk
        P_brk[k] = max(0.0, -resid)
    x[layout.input_slices()["P_k"]] = P_k
    x[layout.input_slices()["P_f"]] = P_f
    x[layout.input_slices()["P_brk"]] = P_brk
    return x


@dataclass
class Trajectory:
    """Per-node states/inputs of one agent plus derived lap quantities."""

    s: np.ndarray
    v: np.ndarray
    E_f: np.ndarray
    E_b: np.ndarray
    t: np.ndarray
    P_k: np.ndarray
    P_f: np.ndarray
    P_brk: np.ndarray
    delta: np.ndarray   # per interval (length N-1)

    @property
    def N(self):
        return len(self.s)

    @property
    def lap_time(self):
        return float(self.t[-1] - self.t[0])


def extract_trajectory(problem: NlpProblem, x) -> Trajectory:
    """Unpack a solution vector of the single-agent problem."""
    x = np.asarray(x, dtype=float)
    layout = problem.layout
    if len(x) != layout.n_primal:
        raise ValueError(f"expected {layout.n_primal} entries, got {len(x)}")
    track: TrackData = problem.meta["track"]
    wake = problem.meta.get("wake")
    opp = problem.meta.get("opponent_time")
    sl = layout.state_slices()
    il = layout.input_slices()
    t = x[sl["t"]]
    N = layout.N
    delta = np.zeros(N - 1)
    if opp is not None and wake is not None and not isinstance(opp[0], ad.Expr):
        opp_arr = np.asarray(opp, dtype=float)[: N - 1]
        finite = np.isfinite(opp_arr)
        delta[finite] = wk.delta_smooth(wake, t[: N - 1][finite] - opp_arr[finite])
    return Trajectory(
        s=track.s.copy(), v=x[sl["v"]].copy(), E_f=x[sl["E_f"]].copy(),
        E_b=x[sl["E_b"]].copy(), t=t.copy(),
        P_k=x[il["P_k"]].copy(), P_f=x[il["P_f"]].copy(),
        P_brk=x[il["P_brk"]].copy(), delta=delta,
    )


def pack_trajectory(problem: NlpProblem, traj: Trajectory) -> np.ndarray:
    """Inverse of :func:`extract_trajectory`."""
    layout = problem.layout
    x = np.zeros(layout.n_primal)
    sl = layout.state_slices()
    il = layout.input_slices()
    x[sl["v"]] = traj.v
    x[sl["E_f"]] = traj.E_f
    x[sl["E_b"]] = traj.E_b
    x[sl["t"]] = traj.t
    x[il["P_k"]] = traj.P_k
    x[il["P_f"]] = traj.P_f
    x[il["P_brk"]] = traj.P_brk
    return x


def export_trajectory_csv(traj: Trajectory, path):
    """Write the per-node CSV (inputs and delta are interval quantities;
    the final row leaves them empty)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TRAJECTORY_CSV_HEADER + "\n")
        for k in range(traj.N):
            row = [str(k + 1), f"{traj.s[k]:.17g}", f"{traj.v[k]:.17g}",
                   f"{traj.E_f[k]:.17g}", f"{traj.E_b[k]:.17g}",
                   f"{traj.t[k]:.17g}"]
            if k < traj.N - 1:
                row += [f"{traj.P_k[k]:.17g}", f"{traj.P_f[k]:.17g}",
                        f"{traj.P_brk[k]:.17g}", f"{traj.delta[k]:.17g}"]
            else:
                row += ["", "", "", ""]
            fh.write(",".join(row) + "\n")
