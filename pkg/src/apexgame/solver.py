"""Primal-dual interior-point method for sparse smooth NLPs.

Solves problems of the form

    min f(x)   s.t.  h(x) = 0,  g(x) <= 0,  lb <= x <= ub

by introducing slacks on the inequalities, a log barrier on slacks and
variable bounds with monotone barrier reduction, Newton steps on the
primal-dual system factored as a sparse symmetric-indefinite matrix with
inertia-correcting regularization, fraction-to-boundary step limits and a
backtracking line search on an l1 merit function.

Problems are duck-typed; anything exposing the attributes used by
``_ProblemView`` works (see :mod:`apexgame.transcription` for the main
implementation).  All reported vectors and residuals are in the problem's
original units; scaling is internal.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix

from .linalg import KktMatrix

__all__ = ["SolverOptions", "SolverReport", "KktResiduals", "solve", "kkt_residuals"]


@dataclass
class SolverOptions:
    tol: float = 1e-6
    max_iter: int = 3000
    # barrier schedule
    mu_init: float = 1e-1
    mu_warm_from_duals: bool = False  # infer the initial barrier from injected duals
    kappa_mu: float = 0.2        # linear reduction factor
    theta_mu: float = 1.5        # superlinear exponent
    kappa_eps: float = 10.0      # subproblem tolerance = kappa_eps * mu
    tau_min: float = 0.99        # fraction-to-boundary parameter
    # regularization
    reg_floor: float = 1e-8     # always-on primal diagonal regularization
    delta_w0: float = 1e-4
    delta_w_min: float = 1e-20
    delta_w_max: float = 1e40
    delta_c: float = 1e-8
    # hessian
    hessian_mode: str = "exact"  # "exact" or "quasi_newton"
    quasi_newton_max_n: int = 800
    # line search
    max_ls: int = 40
    armijo: float = 1e-8
    merit_rho: float = 0.1
    # misc
    bound_push: float = 1e-2
    auto_scale: bool = True
    max_grad_scale: float = 100.0
    seed: int = 0                # reserved; the solver itself is deterministic
    log_path: str | None = None

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter <= 0:
            raise ValueError("max_iter must be positive")
        if self.hessian_mode not in ("exact", "quasi_newton"):
            raise ValueError("hessian_mode must be 'exact' or 'quasi_newton'")


@dataclass
class KktResiduals:
    stationarity: float
    primal_eq: float
    primal_ineq: float
    dual: float
    complementarity: float

    def max(self):
        return max(self.stationarity, self.primal_eq, self.primal_ineq,
                   self.dual, self.complementarity)


@dataclass
class SolverReport:
    status: str               # converged | max_iter | restoration_failed | infeasible_detected
    iterations: int
    residuals: KktResiduals
    wall_time: float
    x: np.ndarray
    y_eq: np.ndarray
    y_ineq: np.ndarray
    z_lower: np.ndarray
    z_upper: np.ndarray
    f: float
    mu_final: float
    log: list = field(default_factory=list)
    merit_log: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status == "converged"


def kkt_residuals(problem, x, lam, mu):
    """Infinity norms of the first-order optimality residuals at (x, lam, mu).

    Returns stationarity ||grad f + Jh' lam + Jg' mu||, primal feasibility
    ||h|| and ||max(0, g)||, dual feasibility ||min(mu, 0)|| and
    complementarity ||mu * g||, all in the problem's own units and without
    any contribution from native variable bounds.
    """
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    f, h, g, grad_f, Jh, Jg = problem.first_order(x)
    r = grad_f.copy()
    if len(lam):
        r += Jh.T @ lam
    if len(mu):
        r += Jg.T @ mu
    def norm(v):
        return float(np.max(np.abs(v))) if len(v) else 0.0
    return KktResiduals(
        stationarity=norm(r),
        primal_eq=norm(h),
        primal_ineq=norm(np.maximum(0.0, g)) if len(g) else 0.0,
        dual=norm(np.minimum(mu, 0.0)) if len(mu) else 0.0,
        complementarity=norm(mu * g) if len(g) else 0.0,
    )


# ---------------------------------------------------------------------------
# internals
# ---------------------------------------------------------------------------


def _ftb(v, dv, tau):
    """Largest alpha in (0, 1] with v + alpha*dv >= (1 - tau)*v  (v > 0)."""
    if len(v) == 0:
        return 1.0
    neg = dv < 0
    if not neg.any():
        return 1.0
    return float(min(1.0, np.min(-tau * v[neg] / dv[neg])))


class _ProblemView:
    """Scaled view of a problem: x = D*xs, rows scaled to O(1) gradients."""

    def __init__(self, problem, x0, opts):
        self.problem = problem
        self.n = problem.n_vars
        self.m_eq = problem.n_eq
        self.m_in = problem.n_ineq

        d = getattr(problem, "var_scales", None)
        if not opts.auto_scale:
            d = np.ones(self.n)
        elif d is None:
            d = np.clip(np.abs(np.asarray(x0, dtype=float)), 1.0, 1e12)
        self.d = np.asarray(d, dtype=float)

        f, h, g, grad_f, Jh, Jg = problem.first_order(np.asarray(x0, dtype=float))
        gmax = opts.max_grad_scale
        def row_scales(J):
            if J.shape[0] == 0:
                return np.ones(0)
            Js = J.multiply(self.d[None, :]).tocsr()
            mx = np.zeros(J.shape[0])
            absdata = np.abs(Js.data)
            for i in range(J.shape[0]):
                lo, hi = Js.indptr[i], Js.indptr[i + 1]
                mx[i] = absdata[lo:hi].max() if hi > lo else 0.0
            return np.clip(gmax / np.maximum(mx, gmax), 1e-8, 1.0)
        if opts.auto_scale:
            self.sig_h = row_scales(Jh)
            self.sig_g = row_scales(Jg)
            gf = float(np.max(np.abs(grad_f * self.d))) if self.n else 0.0
            self.sig_f = float(np.clip(gmax / max(gf, gmax), 1e-8, 1.0))
        else:
            self.sig_h = np.ones(self.m_eq)
            self.sig_g = np.ones(self.m_in)
            self.sig_f = 1.0

        lb = np.asarray(problem.lb, dtype=float) / self.d
        ub = np.asarray(problem.ub, dtype=float) / self.d
        self.lb, self.ub = lb, ub
        self.has_lb = np.isfinite(lb)
        self.has_ub = np.isfinite(ub)

    # -- scaled evaluations -------------------------------------------------

    def eval_all(self, xs):
        f, h, g = self.problem.eval_all(xs * self.d)
        return self.sig_f * f, self.sig_h * h, self.sig_g * g

    def first_order(self, xs):
        f, h, g, grad_f, Jh, Jg = self.problem.first_order(xs * self.d)
        gf = self.sig_f * (grad_f * self.d)
        Jh_s = self._row_col_scale(Jh, self.sig_h)
        Jg_s = self._row_col_scale(Jg, self.sig_g)
        return self.sig_f * f, self.sig_h * h, self.sig_g * g, gf, Jh_s, Jg_s

    def _row_col_scale(self, J, sig):
        if J.shape[0] == 0:
            return J
        J = J.tocsr(copy=True)
        rows = np.repeat(np.arange(J.shape[0]), np.diff(J.indptr))
        J.data *= sig[rows] * self.d[J.indices]
        return J

    def lag_hessian(self, xs, lam_s, mu_s):
        W = self.problem.lag_hessian(xs * self.d, self.sig_f,
                                     self.sig_h * lam_s, self.sig_g * mu_s)
        W = W.tocsr()
        rows = np.repeat(np.arange(W.shape[0]), np.diff(W.indptr))
        W = csr_matrix((W.data * self.d[rows] * self.d[W.indices],
                        W.indices, W.indptr), shape=W.shape)
        return W

    # -- unscaling ----------------------------------------------------------

    def unscale_x(self, xs):
        return xs * self.d

    def unscale_duals(self, lam_s, mu_s, zl_s, zu_s):
        y_eq = self.sig_h * lam_s / self.sig_f
        y_in = self.sig_g * mu_s / self.sig_f
        zl = zl_s / (self.d * self.sig_f)
        zu = zu_s / (self.d * self.sig_f)
        return y_eq, y_in, zl, zu


class _DampedBfgs:
    """Dense damped BFGS approximation of the scaled Lagrangian Hessian."""

    def __init__(self, n, init_scale=1.0):
        self.B = np.eye(n) * init_scale
        self.n = n

    def update(self, s, y):
        sy = float(s @ y)
        Bs = self.B @ s
        sBs = float(s @ Bs)
        if sBs <= 0:
            return
        # Powell damping
        if sy < 0.2 * sBs:
            theta = 0.8 * sBs / (sBs - sy)
            y = theta * y + (1.0 - theta) * Bs
            sy = float(s @ y)
        if sy <= 1e-14 * max(1.0, sBs):
            return
        self.B += np.outer(y, y) / sy - np.outer(Bs, Bs) / sBs

    def as_csr(self):
        return csr_matrix(self.B)


def solve(problem, x0, opts: SolverOptions | None = None,
          y_eq0=None, y_in0=None) -> SolverReport:
    """Solve an NLP from the starting point ``x0``.

    ``y_eq0``/``y_in0`` optionally inject multiplier warm starts (used by
    the homotopy over relaxed games).  The iterate sequence is a
    deterministic function of the inputs and options.
    """
    opts = opts or SolverOptions()
    t_start = time.perf_counter()

    n = problem.n_vars
    m_eq = problem.n_eq
    m_in = problem.n_ineq
    view = _ProblemView(problem, x0, opts)

    # initial point: push into the strict interior of the bounds
    xs = np.asarray(x0, dtype=float) / view.d
    lb, ub, has_lb, has_ub = view.lb, view.ub, view.has_lb, view.has_ub
    kap1 = opts.bound_push
    push_l = np.full(n, -np.inf)
    push_u = np.full(n, np.inf)
    push_l[has_lb] = lb[has_lb] + kap1 * np.maximum(1.0, np.abs(lb[has_lb]))
    push_u[has_ub] = ub[has_ub] - kap1 * np.maximum(1.0, np.abs(ub[has_ub]))
    both = has_lb & has_ub
    xs = np.minimum(np.maximum(xs, push_l), np.maximum(push_u, push_l))
    if both.any():
        mid = 0.5 * (lb[both] + ub[both])
        xs[both] = np.clip(xs[both], np.minimum(push_l[both], mid),
                           np.maximum(push_u[both], mid))

    f0, h0, g0 = view.eval_all(xs)
    s = np.maximum(-g0, 1e-4) if m_in else np.zeros(0)

    mu_floor = max(opts.tol / 20.0, 1e-14)
    if m_in == 0 and not (has_lb.any() or has_ub.any()):
        mu = mu_floor
    else:
        mu = opts.mu_init

    lam = np.zeros(m_eq) if y_eq0 is None else (np.asarray(y_eq0, float) * view.sig_f / np.maximum(view.sig_h, 1e-300))
    if y_in0 is not None:
        muI = np.maximum(np.asarray(y_in0, float) * view.sig_f / np.maximum(view.sig_g, 1e-300), 1e-8)
        if m_in and opts.mu_warm_from_duals:
            mu = float(np.clip(np.mean(s * muI), 10.0 * mu_floor, opts.mu_init))
    else:
        muI = np.full(m_in, max(mu, 1e-4)) if m_in else np.zeros(0)
        if m_in:
            muI = np.minimum(np.maximum(mu / s, 1e-6), 1e6)
    zl = np.where(has_lb, mu / np.maximum(xs - lb, 1e-12), 0.0)
    zu = np.where(has_ub, mu / np.maximum(ub - xs, 1e-12), 0.0)
    zl = np.clip(zl, 0.0, 1e8) * has_lb
    zu = np.clip(zu, 0.0, 1e8) * has_ub

    # Hessian machinery
    use_bfgs = opts.hessian_mode == "quasi_newton"
    if use_bfgs and n > opts.quasi_newton_max_n:
        raise ValueError(
            f"quasi_newton mode is dense and capped at n={opts.quasi_newton_max_n}; "
            f"problem has n={n} (use hessian_mode='exact')")
    bfgs = None

    kkt = None
    w_nnz = None
    delta_w_last = 0.0
    nu = 1.0
    tau = max(opts.tau_min, 1.0 - mu)
    log_rows = []
    merit_log = []
    status = "max_iter"
    it = 0
    f = h = g = gf = Jh = Jg = None
    x_prev_grad = None

    def barrier_value(f_val, xs_val, s_val):
        val = f_val
        if m_in:
            val -= mu * float(np.sum(np.log(s_val)))
        if has_lb.any():
            val -= mu * float(np.sum(np.log(xs_val[has_lb] - lb[has_lb])))
        if has_ub.any():
            val -= mu * float(np.sum(np.log(ub[has_ub] - xs_val[has_ub])))
        return val

    def theta(h_val, g_val, s_val):
        t = 0.0
        if m_eq:
            t += float(np.sum(np.abs(h_val)))
        if m_in:
            t += float(np.sum(np.abs(g_val + s_val)))
        return t

    def orig_residuals(xs_v, s_v, lam_v, muI_v, zl_v, zu_v, fo):
        f_v, h_v, g_v, gf_v, Jh_v, Jg_v = fo
        r = gf_v.copy()
        if m_eq:
            r += Jh_v.T @ lam_v
        if m_in:
            r += Jg_v.T @ muI_v
        r -= zl_v
        r += zu_v
        r_orig = r / (view.d * view.sig_f)
        stat = float(np.max(np.abs(r_orig))) if n else 0.0
        pe = float(np.max(np.abs(h_v / view.sig_h))) if m_eq else 0.0
        pi = float(np.max(np.maximum(0.0, g_v / view.sig_g))) if m_in else 0.0
        comp = 0.0
        if m_in:
            comp = max(comp, float(np.max(s_v * muI_v)) / view.sig_f)
        if has_lb.any():
            comp = max(comp, float(np.max((xs_v - lb)[has_lb] * zl_v[has_lb])) / view.sig_f)
        if has_ub.any():
            comp = max(comp, float(np.max((ub - xs_v)[has_ub] * zu_v[has_ub])) / view.sig_f)
        dual = float(np.max(np.maximum(-muI_v * view.sig_g / view.sig_f, 0.0))) if m_in else 0.0
        return KktResiduals(stat, pe, pi, dual, comp)

    def scaled_error(fo, xs_v, s_v, lam_v, muI_v, zl_v, zu_v, mu_v):
        f_v, h_v, g_v, gf_v, Jh_v, Jg_v = fo
        r = gf_v.copy()
        if m_eq:
            r += Jh_v.T @ lam_v
        if m_in:
            r += Jg_v.T @ muI_v
        r -= zl_v
        r += zu_v
        s_max = 100.0
        total = float(np.sum(np.abs(lam_v)) + np.sum(np.abs(muI_v))
                      + np.sum(np.abs(zl_v)) + np.sum(np.abs(zu_v)))
        count = m_eq + m_in + int(has_lb.sum()) + int(has_ub.sum())
        s_d = max(s_max, total / max(1, count)) / s_max
        e = float(np.max(np.abs(r))) / s_d if n else 0.0
        if m_eq:
            e = max(e, float(np.max(np.abs(h_v))))
        if m_in:
            e = max(e, float(np.max(np.abs(g_v + s_v))))
            e = max(e, float(np.max(np.abs(s_v * muI_v - mu_v))) / s_d)
        if has_lb.any():
            e = max(e, float(np.max(np.abs((xs_v[has_lb] - lb[has_lb]) * zl_v[has_lb] - mu_v))) / s_d)
        if has_ub.any():
            e = max(e, float(np.max(np.abs((ub[has_ub] - xs_v[has_ub]) * zu_v[has_ub] - mu_v))) / s_d)
        return e

    fo = view.first_order(xs)
    n_restorations = 0

    while it < opts.max_iter:
        f, h, g, gf, Jh, Jg = fo
        res = orig_residuals(xs, s, lam, muI, zl, zu, fo)
        if res.max() <= opts.tol:
            status = "converged"
            break

        # barrier update: loop so mu can shrink several times at one iterate
        while mu > mu_floor and scaled_error(fo, xs, s, lam, muI, zl, zu, mu) <= opts.kappa_eps * mu:
            mu = max(mu_floor, min(opts.kappa_mu * mu, mu ** opts.theta_mu))
            tau = max(opts.tau_min, 1.0 - mu)
            nu = 1.0  # fresh merit penalty for the new barrier subproblem

        # Hessian of the Lagrangian (scaled space)
        if use_bfgs:
            if bfgs is None:
                bfgs = _DampedBfgs(n, init_scale=max(1.0, float(np.max(np.abs(gf)))))
            W = bfgs.as_csr()
        else:
            W = view.lag_hessian(xs, lam, muI)

        # W comes back symmetric with a static pattern; keep its upper triangle
        if kkt is None:
            Wc = W.tocoo()
            w_upper_sel = np.flatnonzero(Wc.row <= Wc.col)
            w_rows = Wc.row[w_upper_sel].copy()
            w_cols = Wc.col[w_upper_sel].copy()
            w_nnz = len(W.data)
            rows = [w_rows, np.arange(n)]
            cols = [w_cols, np.arange(n)]
            if m_eq:
                JhC = Jh.tocoo()
                rows.append(JhC.row + n); cols.append(JhC.col)
                rows.append(np.arange(n, n + m_eq)); cols.append(np.arange(n, n + m_eq))
            if m_in:
                JgC = Jg.tocoo()
                rows.append(JgC.row + n + m_eq); cols.append(JgC.col)
                rows.append(np.arange(n + m_eq, n + m_eq + m_in))
                cols.append(np.arange(n + m_eq, n + m_eq + m_in))
            kkt = KktMatrix(np.concatenate(rows), np.concatenate(cols), n + m_eq + m_in)
            kkt_upper_sel = w_upper_sel
        if len(W.data) != w_nnz:
            raise RuntimeError("Hessian sparsity changed between iterations")
        w_upper_vals = W.data[kkt_upper_sel]

        sigma_l = np.where(has_lb, zl / np.maximum(xs - lb, 1e-300), 0.0)
        sigma_u = np.where(has_ub, zu / np.maximum(ub - xs, 1e-300), 0.0)
        diag_x = sigma_l + sigma_u
        dvec_in = (s / muI) if m_in else np.zeros(0)

        # dual residual (scaled space) with current multipliers
        r_dual = gf.copy()
        if m_eq:
            r_dual += Jh.T @ lam
        if m_in:
            r_dual += Jg.T @ muI
        rhs = np.zeros(n + m_eq + m_in)
        rhs[:n] = -(r_dual
                    - np.where(has_lb, mu / np.maximum(xs - lb, 1e-300), 0.0)
                    + np.where(has_ub, mu / np.maximum(ub - xs, 1e-300), 0.0))
        if m_eq:
            rhs[n:n + m_eq] = -h
        if m_in:
            rhs[n + m_eq:] = -(g + mu / muI)

        # inertia-corrected factorization
        delta_w = opts.reg_floor
        delta_c = opts.delta_c
        attempts = 0
        while True:
            vals = [w_upper_vals, diag_x + delta_w]
            if m_eq:
                vals.append(Jh.data)
                vals.append(np.full(m_eq, -delta_c))
            if m_in:
                vals.append(Jg.data)
                vals.append(-(dvec_in + delta_c))
            kkt.set_values(np.concatenate(vals))
            ok, n_pos, n_neg = kkt.factor(pivot_floor=1e-100)
            if ok and n_pos == n and n_neg == m_eq + m_in:
                break
            attempts += 1
            if attempts > 60:
                break
            if delta_w <= opts.reg_floor:
                delta_w = opts.delta_w0 if delta_w_last <= opts.reg_floor else max(
                    opts.delta_w_min, delta_w_last / 3.0)
            else:
                delta_w *= 8.0
            if delta_w > opts.delta_w_max:
                break
        delta_w_last = delta_w

        step = kkt.solve(rhs)
        dx = step[:n]
        dlam = step[n:n + m_eq]
        dmuI = step[n + m_eq:]
        if m_in:
            ds = -(g + s) - (Jg @ dx)
        else:
            ds = np.zeros(0)
        dzl = np.zeros(n)
        dzu = np.zeros(n)
        if has_lb.any():
            gap = (xs - lb)[has_lb]
            dzl[has_lb] = (mu - gap * zl[has_lb]) / gap - sigma_l[has_lb] * dx[has_lb]
        if has_ub.any():
            gap = (ub - xs)[has_ub]
            dzu[has_ub] = (mu - gap * zu[has_ub]) / gap + sigma_u[has_ub] * dx[has_ub]

        # fraction to boundary
        alpha_max = 1.0
        if m_in:
            alpha_max = min(alpha_max, _ftb(s, ds, tau))
        if has_lb.any():
            alpha_max = min(alpha_max, _ftb((xs - lb)[has_lb], dx[has_lb], tau))
        if has_ub.any():
            alpha_max = min(alpha_max, _ftb((ub - xs)[has_ub], -dx[has_ub], tau))
        alpha_z = 1.0
        if m_in:
            alpha_z = min(alpha_z, _ftb(muI, dmuI, tau))
        if has_lb.any():
            alpha_z = min(alpha_z, _ftb(zl[has_lb], dzl[has_lb], tau))
        if has_ub.any():
            alpha_z = min(alpha_z, _ftb(zu[has_ub], dzu[has_ub], tau))

        # l1 merit line search
        phi0 = barrier_value(f, xs, s)
        th0 = theta(h, g, s)
        d_barrier = float(gf @ dx)
        if m_in:
            d_barrier -= mu * float(np.sum(ds / s))
        if has_lb.any():
            d_barrier -= mu * float(np.sum(dx[has_lb] / (xs - lb)[has_lb]))
        if has_ub.any():
            d_barrier += mu * float(np.sum(dx[has_ub] / (ub - xs)[has_ub]))
        if th0 > opts.tol * 1e-3:
            nu_req = d_barrier / ((1.0 - opts.merit_rho) * th0)
            nu = max(nu, nu_req + 1.0)
        dphi = d_barrier - nu * th0

        alpha = alpha_max
        accepted = False
        f_t = h_t = g_t = None
        for _ in range(opts.max_ls):
            x_t = xs + alpha * dx
            s_t = s + alpha * ds if m_in else s
            try:
                f_t, h_t, g_t = view.eval_all(x_t)
                bad = not (np.isfinite(f_t) and np.all(np.isfinite(h_t))
                           and np.all(np.isfinite(g_t)))
            except Exception:
                bad = True
            if not bad:
                merit_t = barrier_value(f_t, x_t, s_t) + nu * theta(h_t, g_t, s_t)
                merit_0 = phi0 + nu * th0
                if merit_t <= merit_0 + opts.armijo * alpha * dphi + 1e-14 * abs(merit_0):
                    accepted = True
                    break
            alpha *= 0.5
            if alpha < 1e-11:
                break

        if not accepted:
            # feasibility restoration
            n_restorations += 1
            xs_r, s_r, rest_ok, rest_stationary = _restore(view, xs, s, lb, ub,
                                                           has_lb, has_ub, opts)
            if rest_ok:
                xs, s = xs_r, s_r
                fo = view.first_order(xs)
                f0n, h0n, g0n = fo[0], fo[1], fo[2]
                if m_in:
                    s = np.maximum(np.maximum(-g0n, 0.5 * s), 1e-10)
                it += 1
                continue
            status = "infeasible_detected" if rest_stationary else "restoration_failed"
            break

        merit_log.append({"mu": mu, "merit_before": phi0 + nu * th0,
                          "merit_after": merit_t + 0.0})
        xs = xs + alpha * dx
        if m_in:
            s = s + alpha * ds
        # Multiplier step length: the x-row residual after the step is
        # approximately (r + alpha*H*dx) - a*(r + H*dx); pick the a in
        # [0, alpha_z] that minimizes it.  This keeps duals consistent when
        # the primal line search is short instead of letting them run ahead.
        r_hat = -rhs[:n]
        Hdx = np.asarray(W @ dx).ravel() + (diag_x + delta_w) * dx
        q = r_hat + Hdx
        p = r_hat + alpha * Hdx
        qq = float(q @ q)
        if qq > 1e-300:
            alpha_y = float(np.clip((p @ q) / qq, 0.0, alpha_z))
        else:
            alpha_y = alpha_z
        lam = lam + alpha_y * dlam
        if m_in:
            muI = muI + alpha_y * dmuI
        zl = zl + alpha_z * dzl
        zu = zu + alpha_z * dzu
        # keep bound duals consistent with the barrier (IPOPT's kappa_Sigma)
        if has_lb.any():
            base = mu / np.maximum(xs - lb, 1e-300)
            zl = np.where(has_lb, np.clip(zl, base / 1e10, base * 1e10), 0.0)
        if has_ub.any():
            base = mu / np.maximum(ub - xs, 1e-300)
            zu = np.where(has_ub, np.clip(zu, base / 1e10, base * 1e10), 0.0)

        fo_new = view.first_order(xs)
        if use_bfgs:
            gl_old = gf.copy()
            if m_eq:
                gl_old += Jh.T @ lam
            if m_in:
                gl_old += Jg.T @ muI
            f2, h2, g2, gf2, Jh2, Jg2 = fo_new
            gl_new = gf2.copy()
            if m_eq:
                gl_new += Jh2.T @ lam
            if m_in:
                gl_new += Jg2.T @ muI
            if alpha > 0:
                bfgs.update(alpha * dx, gl_new - gl_old)
        fo = fo_new
        it += 1
        log_rows.append((it, mu, f / view.sig_f, res.primal_eq + res.primal_ineq,
                         res.stationarity, alpha, delta_w))

    wall = time.perf_counter() - t_start
    res = orig_residuals(xs, s, lam, muI, zl, zu, fo)
    y_eq, y_in, zl_o, zu_o = view.unscale_duals(lam, muI, zl, zu)
    report = SolverReport(
        status=status,
        iterations=it,
        residuals=res,
        wall_time=wall,
        x=view.unscale_x(xs),
        y_eq=y_eq,
        y_ineq=y_in,
        z_lower=zl_o,
        z_upper=zu_o,
        f=float(fo[0]) / view.sig_f,
        mu_final=mu,
        log=log_rows,
        merit_log=merit_log,
    )
    if opts.log_path:
        with open(opts.log_path, "w", encoding="utf-8") as fh:
            fh.write("iter,mu_barrier,obj,inf_pr,inf_du,step,regularization\n")
            for row in log_rows:
                fh.write(f"{row[0]},{row[1]:.6e},{row[2]:.10e},{row[3]:.6e},"
                         f"{row[4]:.6e},{row[5]:.6e},{row[6]:.6e}\n")
    return report


def _restore(view, xs, s, lb, ub, has_lb, has_ub, opts, max_iter=30):
    """Gauss-Newton feasibility restoration: reduce the constraint violation.

    Returns (x, s, success, stationary_infeasible).
    """
    from scipy.sparse import bmat, eye as sp_eye, csc_matrix
    from scipy.sparse.linalg import splu

    m_in = view.m_in
    m_eq = view.m_eq
    xs = xs.copy()
    s = s.copy()

    def violation(x_v, s_v):
        _, h_v, g_v = view.eval_all(x_v)
        c = []
        if m_eq:
            c.append(h_v)
        if m_in:
            c.append(g_v + s_v)
        return (np.concatenate(c) if c else np.zeros(0)), h_v, g_v

    c0, _, _ = violation(xs, s)
    th_enter = float(np.sum(np.abs(c0)))
    if th_enter == 0.0:
        return xs, s, True, False
    lam_lm = 1e-4
    for _ in range(max_iter):
        f, h, g, gf, Jh, Jg = view.first_order(xs)
        blocks_c = []
        if m_eq:
            blocks_c.append(h)
        if m_in:
            blocks_c.append(g + s)
        c = np.concatenate(blocks_c)
        th = float(np.sum(np.abs(c)))
        if th <= max(0.25 * th_enter, 0.1 * opts.tol):
            return xs, s, True, False
        if m_in:
            J = bmat([[Jh, None], [Jg, sp_eye(m_in)]]) if m_eq else \
                bmat([[Jg, sp_eye(m_in)]])
        else:
            J = Jh
        Jc = J.T @ c
        if float(np.max(np.abs(Jc))) <= 1e-12 * max(1.0, th):
            return xs, s, False, True  # stationary point of infeasibility
        A = (J.T @ J).tocsc() + lam_lm * sp_eye(J.shape[1], format="csc")
        try:
            d = splu(A).solve(-Jc)
        except RuntimeError:
            lam_lm *= 10.0
            continue
        dx, ds = d[:view.n], d[view.n:]
        alpha = 1.0
        tau = 0.99
        if has_lb.any():
            alpha = min(alpha, _ftb((xs - lb)[has_lb], dx[has_lb], tau))
        if has_ub.any():
            alpha = min(alpha, _ftb((ub - xs)[has_ub], -dx[has_ub], tau))
        if m_in:
            alpha = min(alpha, _ftb(s, ds, tau))
        improved = False
        for _ in range(20):
            c_t, _, _ = violation(xs + alpha * dx, s + alpha * ds if m_in else s)
            if float(np.sum(np.abs(c_t))) < th:
                xs = xs + alpha * dx
                if m_in:
                    s = s + alpha * ds
                improved = True
                lam_lm = max(1e-8, lam_lm * 0.3)
                break
            alpha *= 0.5
        if not improved:
            lam_lm *= 10.0
            if lam_lm > 1e8:
                return xs, s, False, False
    c_end, _, _ = violation(xs, s)
    ok = float(np.sum(np.abs(c_end))) <= 0.5 * th_enter
    return xs, s, ok, False
