"""Two-car Stackelberg game: bilevel formulation and single-level solve.

The leader (the car starting behind, B by default) commits to a strategy
anticipating the follower's optimal response.  The follower's lap problem
is replaced by its KKT conditions: stationarity of its Lagrangian enters
as equality constraints, its primal constraints and multiplier sign stay,
and complementary slackness is relaxed Scholtes-style
(``mu_j * g_j >= -eps``) so constraint qualifications hold; a homotopy
drives ``eps`` to its target while warm-starting each stage.  The inner
cost is added to the outer objective to steer the stationarity manifold
toward inner minima rather than maxima.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import solver as slv
from . import track as trk
from . import transcription as tc
from . import wake as wk
from .vehicle import AgentParams, V_FLOOR, default_params

__all__ = [
    "GameSpec",
    "GameProblem",
    "GameSolution",
    "FreeStreamSolution",
    "GameError",
    "solve_freestream",
    "build_game",
    "scholtes_relax",
    "solve_game",
    "best_response_check",
    "BestResponseReport",
    "epsilon_schedule",
    "save_solution",
]

KMH_300 = 300.0 / 3.6
DEFAULT_E_B_INIT = 2.0e6
DEFAULT_E_F_TARGET = 5.5e7


class GameError(RuntimeError):
    pass


@dataclass(frozen=True)
class GameSpec:
    """Boundary conditions and shared settings of a two-car game."""

    # varied boundary conditions
    dE_b_A: float
    dE_b_B: float
    t_gap_init: float
    # shared settings
    track: trk.TrackData
    N: int
    params_A: AgentParams = field(default_factory=default_params)
    params_B: AgentParams = field(default_factory=default_params)
    wake: wk.WakeModel = field(default_factory=wk.WakeModel)
    v_init: float = KMH_300
    E_b_init: float = DEFAULT_E_B_INIT
    E_f_target: float = DEFAULT_E_F_TARGET
    leader: str = "B"

    def __post_init__(self):
        if self.t_gap_init < 0:
            raise ValueError("t_gap_init must be >= 0 (the leader starts behind)")
        if self.leader not in ("A", "B"):
            raise ValueError("leader must be 'A' or 'B'")
        if self.N < trk.SOLVER_MIN_NODES:
            raise ValueError(f"N must be >= {trk.SOLVER_MIN_NODES}")

    def bc(self, agent: str) -> tc.BoundaryConditions:
        """Boundary conditions of one agent; the leader starts behind."""
        t_init = self.t_gap_init if agent == self.leader else 0.0
        dE_b = self.dE_b_A if agent == "A" else self.dE_b_B
        return tc.BoundaryConditions(
            v_init=self.v_init, t_init=t_init, E_b_init=self.E_b_init,
            dE_b=dE_b, E_f_target=self.E_f_target)

    def params(self, agent: str) -> AgentParams:
        return self.params_A if agent == "A" else self.params_B

    @property
    def follower(self) -> str:
        return "A" if self.leader == "B" else "B"

    def grid(self) -> trk.TrackData:
        return trk.resample(self.track, self.N)


@dataclass
class FreeStreamSolution:
    agent: str
    problem: tc.NlpProblem
    report: slv.SolverReport
    trajectory: tc.Trajectory

    @property
    def lap_time(self):
        return self.trajectory.lap_time


@dataclass
class GameProblem:
    """Single-level NLP of the relaxed game plus its block structure."""

    nlp: tc.NlpProblem
    N: int
    epsilon: float
    sl_leader: slice          # leader's primal block in z
    sl_follower: slice        # follower's primal block
    sl_lam: slice             # inner equality multipliers
    sl_mu: slice              # inner inequality multipliers
    rows_h_leader: slice      # leader rows inside h
    rows_stat: slice          # stationarity rows inside h
    rows_h_follower: slice
    rows_g_leader: slice      # leader rows inside g
    rows_g_follower: slice
    rows_comp_upper: slice    # mu_j * g_j <= 0 rows
    rows_comp_lower: slice    # -mu_j * g_j - eps <= 0 rows
    leader: str = "B"
    y_eq0: np.ndarray | None = None
    y_in0: np.ndarray | None = None
    stat_scale: np.ndarray | None = None

    @property
    def n_primal(self):
        return self.nlp.n_vars

    def follower_inequality_values(self, z):
        _, _, g = self.nlp.eval_all(z)
        return g[self.rows_g_follower]

    def complementarity_products(self, z):
        z = np.asarray(z, dtype=float)
        mu = z[self.sl_mu]
        g_f = self.follower_inequality_values(z)
        return mu * g_f

    def stationarity_values(self, z):
        """Raw inner-Lagrangian gradient (scaled rows divided back out)."""
        _, h, _ = self.nlp.eval_all(z)
        vals = h[self.rows_stat]
        if self.stat_scale is not None:
            vals = vals / self.stat_scale
        return vals


def solve_freestream(spec: GameSpec, agent: str,
                     opts: slv.SolverOptions | None = None) -> FreeStreamSolution:
    """Solve one agent's lap alone on the track (no interaction)."""
    grid = spec.grid()
    problem = tc.build_single(grid, spec.params(agent), spec.bc(agent))
    opts = opts or slv.SolverOptions()
    report = slv.solve(problem, problem.x0, opts)
    if not report.converged:
        raise GameError(f"free-stream solve for agent {agent} did not converge "
                        f"({report.status}); boundary conditions inconsistent?")
    traj = tc.extract_trajectory(problem, report.x)
    return FreeStreamSolution(agent, problem, report, traj)


@dataclass
class KktStructure:
    """Row/variable bookkeeping of a KKT-reformulated bilevel program."""

    nlp: tc.NlpProblem
    stat_scale: np.ndarray
    sl_lam: slice
    sl_mu: slice
    rows_h_outer: slice
    rows_stat: slice
    rows_h_inner: slice
    rows_g_outer: slice
    rows_g_inner: slice
    rows_comp_upper: slice
    rows_comp_lower: slice


def kkt_single_level(graph, outer_obj, outer_h, outer_g,
                     inner_obj, inner_h, inner_g, inner_vars,
                     lb, ub, x0, var_scales=None, mu0=None, lam0=None,
                     inner_var_scales=None, name="bilevel", meta=None,
                     augment_inner_cost=True,
                     include_upper_guard=False) -> KktStructure:
    """Reformulate a bilevel program into one smooth NLP via the inner KKT.

    Appends inner multipliers (lambda free, mu >= 0) as decision variables,
    adds the stationarity of the inner Lagrangian w.r.t. ``inner_vars`` as
    equality rows, keeps the inner primal constraints, and adds the
    complementarity products both as an upper guard (mu_j*g_j <= 0) and in
    relaxable lower form (-mu_j*g_j <= eps, see :func:`scholtes_relax`).
    The inner cost is added to the outer objective by default so stationary
    points of the inner problem are steered toward minima.
    """
    n_exist = graph.n_vars
    m_h = len(inner_h)
    m_g = len(inner_g)
    lam = graph.vars(m_h)
    mu = graph.vars(m_g)

    L = inner_obj
    for li, hi in zip(lam, inner_h):
        L = L + li * hi
    for mj, gj in zip(mu, inner_g):
        L = L + mj * gj
    stationarity = ad.grad_graph(L, inner_vars)
    # stationarity rows are gradients w.r.t. the inner variables; expressing
    # them in scaled variable units keeps their magnitudes O(1) regardless
    # of the physical units of the differentiated coordinate
    if inner_var_scales is None:
        stat_scale = np.ones(len(inner_vars))
    else:
        stat_scale = np.asarray(inner_var_scales, dtype=float)
    stationarity = [float(sc_i) * row for sc_i, row in zip(stat_scale, stationarity)]

    # The upper side mu_j*g_j <= 0 already follows from mu >= 0 and g <= 0.
    # Enforcing it as its own row is structurally degenerate (it duplicates
    # the mu bound at inactive rows and the inner row's slack at active
    # ones) and destabilizes the interior-point solve, so it stays off by
    # default and is only available for experiments.
    comp_upper = [mj * gj for mj, gj in zip(mu, inner_g)] if include_upper_guard else []
    comp_lower = [-(mj * gj) for mj, gj in zip(mu, inner_g)]

    h_all = list(outer_h) + stationarity + list(inner_h)
    g_all = list(outer_g) + list(inner_g) + comp_upper + comp_lower

    lb_full = np.concatenate([lb, np.full(m_h, -np.inf), np.zeros(m_g)])
    ub_full = np.concatenate([ub, np.full(m_h + m_g, np.inf)])
    d_full = np.ones(n_exist + m_h + m_g)
    if var_scales is not None:
        d_full[:n_exist] = var_scales
    mu0 = np.zeros(m_g) if mu0 is None else np.maximum(np.asarray(mu0, float), 0.0)
    lam0 = np.zeros(m_h) if lam0 is None else np.asarray(lam0, float)
    x0_full = np.concatenate([x0, lam0, mu0])

    obj = outer_obj + inner_obj if augment_inner_cost else outer_obj
    nlp = tc.NlpProblem(graph, obj, h_all, g_all, lb_full, ub_full, None,
                        x0_full, var_scales=d_full, name=name, meta=meta or {})

    n_stat = len(inner_vars)
    mo_h = len(outer_h)
    mo_g = len(outer_g)
    return KktStructure(
        nlp=nlp,
        stat_scale=stat_scale,
        sl_lam=slice(n_exist, n_exist + m_h),
        sl_mu=slice(n_exist + m_h, n_exist + m_h + m_g),
        rows_h_outer=slice(0, mo_h),
        rows_stat=slice(mo_h, mo_h + n_stat),
        rows_h_inner=slice(mo_h + n_stat, mo_h + n_stat + m_h),
        rows_g_outer=slice(0, mo_g),
        rows_g_inner=slice(mo_g, mo_g + m_g),
        rows_comp_upper=slice(mo_g + m_g, mo_g + m_g + len(comp_upper)),
        rows_comp_lower=slice(mo_g + m_g + len(comp_upper),
                              mo_g + m_g + len(comp_upper) + m_g),
    )


def build_game(spec: GameSpec, warm) -> GameProblem:
    """Assemble the KKT single-level NLP from two free-stream solutions.

    ``warm`` is the pair of free-stream solutions (agents A and B, either
    order); both must be converged.  The decision vector is
    z = (x_leader, u_leader, x_follower, u_follower, lambda, mu).
    """
    fs_a, fs_b = warm
    if {fs_a.agent, fs_b.agent} != {"A", "B"}:
        raise GameError("warm must hold one solution per agent")
    if fs_a.agent == "B":
        fs_a, fs_b = fs_b, fs_a
    for fs in (fs_a, fs_b):
        if not fs.report.converged:
            raise GameError(f"warm-start solution for agent {fs.agent} not converged")

    grid = spec.grid()
    N = spec.N
    layout = tc.VarLayout(N)
    n_agent = layout.n_primal
    m_h = 4 * N
    m_g = 8 * N - 3

    fs_leader = fs_b if spec.leader == "B" else fs_a
    fs_follower = fs_a if spec.leader == "B" else fs_b
    p_leader = spec.params(spec.leader)
    p_follower = spec.params(spec.follower)
    bc_leader = spec.bc(spec.leader)
    bc_follower = spec.bc(spec.follower)

    graph = ad.Graph()
    graph.vars(2 * n_agent)
    av_led = tc._AgentVars(graph, layout, 0)
    av_fol = tc._AgentVars(graph, layout, n_agent)

    obj_led, h_led, g_led, _ = tc._emit_agent(grid, p_leader, bc_leader,
                                              av_led, av_fol.t, spec.wake)
    obj_fol, h_fol, g_fol, _ = tc._emit_agent(grid, p_follower, bc_follower,
                                              av_fol, av_led.t, spec.wake)

    lb = np.full(2 * n_agent, -np.inf)
    ub = np.full(2 * n_agent, np.inf)
    lb_led, _, d_led = tc._agent_bounds_scales(layout, p_leader, bc_leader)
    lb_fol, _, d_fol = tc._agent_bounds_scales(layout, p_follower, bc_follower)
    lb[:n_agent] = lb_led
    lb[n_agent:] = lb_fol
    d = np.concatenate([d_led, d_fol])
    x0 = np.concatenate([fs_leader.report.x, fs_follower.report.x])
    fol_vars = [ad.Expr(graph, graph.var_nodes[n_agent + i]) for i in range(n_agent)]

    ks = kkt_single_level(
        graph, obj_led, h_led, g_led, obj_fol, h_fol, g_fol, fol_vars,
        lb, ub, x0, var_scales=d,
        mu0=fs_follower.report.y_ineq,
        lam0=fs_follower.report.y_eq,
        inner_var_scales=d_fol,
        name=f"game-{grid.name}-N{N}",
        meta={"track": grid, "spec": spec, "wake": spec.wake,
              "bc_leader": bc_leader, "bc_follower": bc_follower})
    ks.nlp.layout = layout

    # dual warm start for the game's own rows: free-stream multipliers on
    # the agents' constraint blocks, zeros on stationarity/complementarity
    y_eq0 = np.concatenate([fs_leader.report.y_eq, np.zeros(n_agent),
                            fs_follower.report.y_eq])
    n_comp_rows = ks.nlp.n_ineq - 2 * m_g
    y_in0 = np.concatenate([fs_leader.report.y_ineq, fs_follower.report.y_ineq,
                            np.full(n_comp_rows, 1e-6)])

    gp = GameProblem(
        nlp=ks.nlp, N=N, epsilon=0.0,
        sl_leader=slice(0, n_agent),
        sl_follower=slice(n_agent, 2 * n_agent),
        sl_lam=ks.sl_lam,
        sl_mu=ks.sl_mu,
        rows_h_leader=ks.rows_h_outer,
        rows_stat=ks.rows_stat,
        rows_h_follower=ks.rows_h_inner,
        rows_g_leader=ks.rows_g_outer,
        rows_g_follower=ks.rows_g_inner,
        rows_comp_upper=ks.rows_comp_upper,
        rows_comp_lower=ks.rows_comp_lower,
        leader=spec.leader,
        y_eq0=y_eq0,
        y_in0=y_in0,
        stat_scale=ks.stat_scale,
    )
    return scholtes_relax(gp, 0.0)


def scholtes_relax(problem: GameProblem, epsilon: float) -> GameProblem:
    """Set the complementarity relaxation: every row reads mu_j*g_j >= -eps.

    Returns a copy sharing the compiled problem; only the inequality shift
    on the relaxed rows changes.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    shift = np.zeros(problem.nlp.n_ineq)
    shift[problem.rows_comp_lower] = -epsilon
    return replace(problem, nlp=problem.nlp.with_g_shift(shift),
                   epsilon=float(epsilon))


def epsilon_schedule(eps_start=1e-2, eps_min=1e-6):
    """Decade homotopy from eps_start down to eps_min, plus a tightening
    half-step so the complementarity target is met strictly at the end."""
    if eps_min <= 0 or eps_start < eps_min:
        raise ValueError("need eps_start >= eps_min > 0")
    out = []
    eps = eps_start
    while eps > eps_min * (1 + 1e-12):
        out.append(eps)
        eps /= 10.0
    out.append(eps_min)
    out.append(0.5 * eps_min)
    return out


@dataclass
class GameSolution:
    spec: GameSpec
    z: np.ndarray
    traj_A: tc.Trajectory
    traj_B: tc.Trajectory
    lam: np.ndarray
    mu: np.ndarray
    t_fs_A: float
    t_fs_B: float
    t_g_A: float
    t_g_B: float
    gap_trace: np.ndarray      # t_B - t_A per node
    overtake_s: float | None
    n_gap_crossings: int
    diagnostics: dict

    @property
    def dt_lap_A(self):
        return self.t_g_A - self.t_fs_A

    @property
    def dt_lap_B(self):
        return self.t_g_B - self.t_fs_B

    @property
    def converged(self):
        return bool(self.diagnostics.get("converged", False))


def _pin_initial_states(x, layout, bc):
    x = x.copy()
    x[layout.v(0)] = bc.v_init
    x[layout.E_f(0)] = 0.0
    x[layout.E_b(0)] = bc.E_b_init
    x[layout.t(0)] = bc.t_init
    return x


def _extract_agent(x_block, layout, grid, wake, t_other):
    sl = layout.state_slices()
    il = layout.input_slices()
    t = x_block[sl["t"]]
    delta = wk.delta_smooth(wake, t[:-1] - t_other[:-1])
    return tc.Trajectory(
        s=grid.s.copy(), v=x_block[sl["v"]].copy(), E_f=x_block[sl["E_f"]].copy(),
        E_b=x_block[sl["E_b"]].copy(), t=t.copy(),
        P_k=x_block[il["P_k"]].copy(), P_f=x_block[il["P_f"]].copy(),
        P_brk=x_block[il["P_brk"]].copy(), delta=np.asarray(delta),
    )


def count_sign_crossings(gap):
    """Strict sign changes between consecutive nodes of the gap trace."""
    sign = np.where(gap >= 0, 1, -1)
    return int(np.sum(sign[1:] != sign[:-1]))


def first_negative_crossing(gap, s):
    """Track position where the gap first turns negative (the overtake)."""
    for k in range(1, len(gap)):
        if gap[k] < 0.0 and gap[k - 1] >= 0.0:
            return float(s[k])
    return None


def solve_game(spec: GameSpec, opts: slv.SolverOptions | None = None,
               eps_min: float = 1e-6, eps_start: float = 1e-2,
               warm=None) -> GameSolution:
    """Full pipeline: free-stream solves, game assembly, eps-homotopy.

    Each homotopy stage warm-starts from the previous stage's primal and
    dual vectors.  On a stage failure the last converged stage is reported
    with ``diagnostics["converged"] = False``.
    """
    t_start = time.perf_counter()
    opts = opts or slv.SolverOptions()
    fs_opts = replace(opts, hessian_mode="exact", max_iter=max(opts.max_iter, 3000))
    if warm is None:
        fs_a = solve_freestream(spec, "A", fs_opts)
        fs_b = solve_freestream(spec, "B", fs_opts)
    else:
        fs_a, fs_b = warm
        if fs_a.agent == "B":
            fs_a, fs_b = fs_b, fs_a
    gp0 = build_game(spec, (fs_a, fs_b))

    stage_tol = min(opts.tol, 1e-8)

    x = gp0.nlp.x0
    y_eq = gp0.y_eq0
    y_in = gp0.y_in0
    last_good = None
    stages = []
    total_iters = 0
    first = True
    for eps in epsilon_schedule(eps_start, eps_min):
        gp = scholtes_relax(gp0, eps)
        stage_opts = replace(opts, tol=stage_tol, hessian_mode="exact",
                             mu_init=1e-2 if first else 1e-4)
        first = False
        report = slv.solve(gp.nlp, x, stage_opts, y_eq0=y_eq, y_in0=y_in)
        total_iters += report.iterations
        stages.append({"epsilon": eps, "status": report.status,
                       "iterations": report.iterations,
                       "kkt": report.residuals.max()})
        if report.converged:
            last_good = (gp, report)
            x, y_eq, y_in = report.x, report.y_eq, report.y_ineq
        else:
            break
    if last_good is None:
        raise GameError(f"no homotopy stage converged; first stage: {stages[0]}")
    gp, report = last_good
    final = stages[-1]["status"] == "converged" and abs(gp.epsilon - 0.5 * eps_min) < 1e-18

    wall = time.perf_counter() - t_start
    return _assemble_solution(spec, gp, report, (fs_a, fs_b), eps_min, wall,
                              final, stages, total_iters)


def _assemble_solution(spec, gp, report, fs_pair, eps_min, wall, converged,
                       stages, total_iters) -> GameSolution:
    fs_a, fs_b = fs_pair
    grid = spec.grid()
    layout = tc.VarLayout(spec.N)
    z = report.x
    x_led = z[gp.sl_leader]
    x_fol = z[gp.sl_follower]
    bc_led = spec.bc(spec.leader)
    bc_fol = spec.bc(spec.follower)
    tol_pin = 1e-6
    sl_t = layout.state_slices()["t"]
    for blk, bc in ((x_led, bc_led), (x_fol, bc_fol)):
        if abs(blk[layout.t(0)] - bc.t_init) > tol_pin or \
           abs(blk[layout.v(0)] - bc.v_init) > tol_pin * 100:
            raise GameError("initial states drifted beyond tolerance")
    x_led = _pin_initial_states(x_led, layout, bc_led)
    x_fol = _pin_initial_states(x_fol, layout, bc_fol)

    traj_led = _extract_agent(x_led, layout, grid, spec.wake, x_fol[sl_t])
    traj_fol = _extract_agent(x_fol, layout, grid, spec.wake, x_led[sl_t])
    if spec.leader == "B":
        traj_B, traj_A = traj_led, traj_fol
    else:
        traj_B, traj_A = traj_fol, traj_led

    gap = traj_B.t - traj_A.t
    mu = z[gp.sl_mu]
    comp = gp.complementarity_products(z)
    stat = gp.stationarity_values(z)
    diagnostics = {
        "converged": bool(converged),
        "epsilon_final": eps_min,
        "epsilon_last_stage": gp.epsilon,
        "kkt_residual": report.residuals.max(),
        "complementarity_violation": float(np.max(np.abs(comp))),
        "inner_stationarity": float(np.max(np.abs(stat))),
        "wall_time": wall,
        "iterations": total_iters,
        "stages": stages,
    }
    return GameSolution(
        spec=spec, z=z, traj_A=traj_A, traj_B=traj_B,
        lam=z[gp.sl_lam].copy(), mu=mu.copy(),
        t_fs_A=fs_a.lap_time, t_fs_B=fs_b.lap_time,
        t_g_A=traj_A.lap_time, t_g_B=traj_B.lap_time,
        gap_trace=gap,
        overtake_s=first_negative_crossing(gap, grid.s),
        n_gap_crossings=count_sign_crossings(gap),
        diagnostics=diagnostics,
    )


@dataclass
class BestResponseReport:
    cost_game: float
    cost_resolve: float
    cost_gap: float
    stationarity_residual: float
    max_state_deviation: dict
    resolve_status: str

    @property
    def passed(self):
        return self.resolve_status == "converged"


def best_response_check(sol: GameSolution, spec: GameSpec,
                        opts: slv.SolverOptions | None = None,
                        lam=None, mu=None) -> BestResponseReport:
    """Oracle for the inner argmin: freeze the leader's time vector and
    re-solve the follower's single-agent problem against it.

    Reports the follower's cost change and the stationarity residual of
    the follower's Lagrangian at the game solution (with optionally
    overridden multipliers, which makes perturbation tests possible).
    """
    opts = opts or slv.SolverOptions()
    grid = spec.grid()
    traj_led = sol.traj_B if spec.leader == "B" else sol.traj_A
    traj_fol = sol.traj_A if spec.leader == "B" else sol.traj_B
    problem = tc.build_single(grid, spec.params(spec.follower),
                              spec.bc(spec.follower),
                              opponent_time=traj_led.t, wake=spec.wake)
    x_sol = tc.pack_trajectory(problem, traj_fol)
    lam = sol.lam if lam is None else np.asarray(lam, dtype=float)
    mu = sol.mu if mu is None else np.asarray(mu, dtype=float)
    res = slv.kkt_residuals(problem, x_sol, lam, mu)

    f_sol, _, _ = problem.eval_all(x_sol)
    report = slv.solve(problem, x_sol, replace(opts, hessian_mode="exact"))
    traj_re = tc.extract_trajectory(problem, report.x)
    dev = {
        "v": float(np.max(np.abs(traj_re.v - traj_fol.v))),
        "t": float(np.max(np.abs(traj_re.t - traj_fol.t))),
        "E_b": float(np.max(np.abs(traj_re.E_b - traj_fol.E_b))),
    }
    return BestResponseReport(
        cost_game=float(f_sol),
        cost_resolve=float(report.f),
        cost_gap=float(abs(report.f - f_sol)),
        stationarity_residual=res.stationarity,
        max_state_deviation=dev,
        resolve_status=report.status,
    )


def save_solution(sol: GameSolution, out_dir, basename="game"):
    """Persist the JSON summary, per-agent trajectory CSVs, gap-time CSV."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    spec = sol.spec
    summary = {
        "boundary_conditions": {
            "dE_b_A_J": spec.dE_b_A,
            "dE_b_B_J": spec.dE_b_B,
            "t_gap_init_s": spec.t_gap_init,
            "v_init_mps": spec.v_init,
            "E_b_init_J": spec.E_b_init,
            "E_f_target_J": spec.E_f_target,
            "N": spec.N,
            "track": spec.track.name,
            "leader": spec.leader,
        },
        "lap_times_s": {
            "free_stream_A": sol.t_fs_A, "free_stream_B": sol.t_fs_B,
            "game_A": sol.t_g_A, "game_B": sol.t_g_B,
        },
        "improvements_s": {"A": sol.dt_lap_A, "B": sol.dt_lap_B},
        "overtake_s": sol.overtake_s,
        "gap_crossings": sol.n_gap_crossings,
        "diagnostics": sol.diagnostics,
    }
    with open(os.path.join(out_dir, f"{basename}_summary.json"), "w",
              encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    tc.export_trajectory_csv(sol.traj_A, os.path.join(out_dir, f"{basename}_agent_A.csv"))
    tc.export_trajectory_csv(sol.traj_B, os.path.join(out_dir, f"{basename}_agent_B.csv"))
    with open(os.path.join(out_dir, f"{basename}_gap.csv"), "w",
              encoding="utf-8") as fh:
        fh.write("k,s_m,t_gap_s\n")
        for k in range(len(sol.gap_trace)):
            fh.write(f"{k + 1},{sol.traj_A.s[k]:.17g},{sol.gap_trace[k]:.17g}\n")
