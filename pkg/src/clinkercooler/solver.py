"""Implicit Euler for semi-explicit index-1 DAEs and a steady-state solver.

A problem exposes ``nx``, ``ny``, ``f(x, y)`` and ``g(x, y)``. Optional hooks:

``x_scale(x)``
    typical magnitude of every differential state (residual weights).
``w_scale``
    typical magnitude of every unknown of ``[x; y]`` (difference increments).
``sparsity()``
    boolean ``(nx+ny, nx+ny)`` dependency pattern of ``[f; g]`` on ``[x; y]``;
    enables column-grouped finite differences.
``batched``
    true when ``f`` and ``g`` accept leading batch axes.
``clip(x)``
    returns ``(x_clipped, clipped_amount)`` after every accepted step.
``max_step_fraction(x, y, dx, dy)``
    largest fraction in (0, 1] of a Newton update that keeps iterates physical.

Both ``x(n+1) - x(n) - dt f = 0`` and ``g = 0`` are solved together by Newton
on the combined unknown vector, so every accepted step satisfies the algebraic
constraints to the Newton tolerance.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

log = logging.getLogger(__name__)

NOT_SETTLED = math.inf


class SolverError(RuntimeError):
    pass


class StiffFailure(SolverError):
    """Step size fell below ``dt_min`` without a converged Newton solve."""


class SingularJacobian(SolverError):
    pass


class SteadyStateError(SolverError):
    def __init__(self, msg, best_x=None, best_y=None, history=()):
        super().__init__(msg)
        self.best_x = best_x
        self.best_y = best_y
        self.history = list(history)


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1.0
    t_end: float = 7200.0
    newton_tol: float = 1e-8
    max_newton_iter: int = 25
    jacobian_mode: str = "finite-difference"
    jacobian_reuse: bool = False
    adaptive: bool = True
    dt_min: float = 1e-4
    dt_max: float = 30.0
    growth: float = 1.5
    shrink: float = 0.5

    def check(self):
        if not (self.dt > 0 and self.newton_tol > 0 and self.t_end >= 0):
            raise ValueError("dt and newton_tol must be positive, t_end non-negative")
        if not self.dt_min <= self.dt <= self.dt_max:
            raise ValueError("need dt_min <= dt <= dt_max")
        if self.max_newton_iter < 1:
            raise ValueError("max_newton_iter must be >= 1")
        if self.jacobian_mode not in ("finite-difference", "user-supplied"):
            raise ValueError(f"unknown jacobian_mode {self.jacobian_mode!r}")
        if not (self.growth >= 1.0 and 0 < self.shrink < 1.0):
            raise ValueError("growth must be >= 1 and shrink in (0, 1)")


@dataclass
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    stats: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.x[-1], self.y[-1]


# Jacobian ---------------------------------------------------------------------

def column_groups(pattern: np.ndarray) -> list[np.ndarray]:
    """Greedy grouping of columns that never share a nonzero row."""
    pattern = np.asarray(pattern, dtype=bool)
    n = pattern.shape[1]
    groups: list[list[int]] = []
    rows_used: list[np.ndarray] = []
    for j in range(n):
        col = pattern[:, j]
        for g, used in zip(groups, rows_used):
            if not np.any(used & col):
                g.append(j)
                used |= col
                break
        else:
            groups.append([j])
            rows_used.append(col.copy())
    return [np.array(g) for g in groups]


def _fg(problem, w):
    x, y = w[..., :problem.nx], w[..., problem.nx:]
    return np.concatenate([problem.f(x, y), problem.g(x, y)], axis=-1)


class _Jacobian:
    """Finite-difference Jacobian of [f; g], column-grouped when possible."""

    def __init__(self, problem):
        self.problem = problem
        n = problem.nx + problem.ny
        self.n = n
        pat = problem.sparsity() if hasattr(problem, "sparsity") else None
        if pat is None:
            self.pattern = None
            self.groups = [np.array([j]) for j in range(n)]
        else:
            self.pattern = np.asarray(pat, dtype=bool)
            self.groups = column_groups(self.pattern)
        self.n_evals = 0

    def __call__(self, w, F0=None):
        p = self.problem
        if hasattr(p, "jacobian") and getattr(p, "jacobian_mode", "") == "user-supplied":
            return p.jacobian(w[:p.nx], w[p.nx:])
        if F0 is None:
            F0 = _fg(p, w)
        ws = getattr(p, "w_scale", None)
        ws = np.ones(self.n) if ws is None else np.asarray(ws)
        h = np.sqrt(np.finfo(float).eps) * np.maximum(np.abs(w), ws)
        # make the increment exactly representable
        h = (w + h) - w
        W = np.repeat(w[None, :], len(self.groups), axis=0)
        for i, g in enumerate(self.groups):
            W[i, g] += h[g]
        if getattr(p, "batched", False):
            Fp = _fg(p, W)
        else:
            Fp = np.stack([_fg(p, Wi) for Wi in W])
        self.n_evals += len(self.groups)
        J = np.zeros((self.n, self.n))
        for i, g in enumerate(self.groups):
            dF = (Fp[i] - F0)
            if self.pattern is None:
                J[:, g[0]] = dF / h[g[0]]
            else:
                cols = self.pattern[:, g]
                rows = np.nonzero(cols)
                J[rows[0], g[rows[1]]] = dF[rows[0]] / h[g[rows[1]]]
        if not np.all(np.isfinite(J)):
            raise SolverError("non-finite entries in the finite-difference Jacobian")
        return J


# Implicit Euler ----------------------------------------------------------------

def _x_scale(problem, x):
    if hasattr(problem, "x_scale"):
        return np.asarray(problem.x_scale(x))
    return np.maximum(np.abs(x), 1.0)


class ImplicitEuler:
    """Stateful stepper that caches and reuses the Jacobian between steps."""

    def __init__(self, problem, config: IntegratorConfig = IntegratorConfig()):
        config.check()
        self.problem = problem
        self.config = config
        self.jac = _Jacobian(problem)
        self.J = None          # Jacobian of [f; g]
        self.J_w = None        # where it was evaluated
        self.lu = None
        self.lu_key = None
        self.stats = {"steps": 0, "rejected": 0, "newton_iterations": 0,
                      "jacobians": 0, "factorizations": 0, "clipped": 0.0}

    def _refresh_jacobian(self, w):
        self.J = self.jac(w)
        self.J_w = w.copy()
        self.lu = None
        self.stats["jacobians"] += 1

    def _factor(self, dt, rs):
        p = self.problem
        nx = p.nx
        A = self.J.copy()
        A[:nx] *= -dt
        A[np.arange(nx), np.arange(nx)] += 1.0
        A[:nx] /= rs[:, None]
        try:
            with np.errstate(all="raise"):
                self.lu = lu_factor(A, check_finite=True)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            raise SingularJacobian(f"Newton matrix could not be factored: {exc}") from exc
        if np.any(np.abs(np.diag(self.lu[0])) < 1e-300):
            raise SingularJacobian("Newton matrix is singular (index or conditioning)")
        self.lu_key = dt
        self.rs_f = rs
        self.stats["factorizations"] += 1

    def _residual(self, x0, w, dt, rs):
        p = self.problem
        x, y = w[:p.nx], w[p.nx:]
        r = np.empty(p.nx + p.ny)
        r[:p.nx] = (x - x0 - dt * p.f(x, y)) / rs
        r[p.nx:] = p.g(x, y)
        return r

    def _newton(self, x0, w, dt, rs, refreshes=0):
        """Newton on the step residual.

        Without ``jacobian_reuse`` the Jacobian is refreshed at every iterate.
        With reuse it is kept until contraction slows, then re-evaluated at the
        current iterate up to ``refreshes`` times.
        """
        p = self.problem
        cfg = self.config
        r = self._residual(x0, w, dt, rs)
        norm = np.max(np.abs(r))
        prev = np.inf
        since = 0
        for it in range(cfg.max_newton_iter + 1):
            if not np.isfinite(norm):
                return None, it
            if norm <= cfg.newton_tol:
                return w, it
            if it == cfg.max_newton_iter:
                break
            if since >= 2 and norm > 0.5 * prev:
                if refreshes <= 0 and norm > 0.9 * prev:
                    break
                if refreshes > 0:
                    refreshes -= 1
                    self._refresh_jacobian(w)
                    since = 0
            if it > 0 and not cfg.jacobian_reuse:
                self._refresh_jacobian(w)
            if self.lu is None or self.lu_key != dt:
                self._factor(dt, rs)
            rhs = r.copy()
            rhs[:p.nx] *= rs / self.rs_f
            d = -lu_solve(self.lu, rhs)
            alpha = 1.0
            if hasattr(p, "max_step_fraction"):
                alpha = p.max_step_fraction(w[:p.nx], w[p.nx:], d[:p.nx], d[p.nx:])
            w = w + alpha * d
            self.stats["newton_iterations"] += 1
            since += 1
            prev = norm
            with np.errstate(all="ignore"):
                r = self._residual(x0, w, dt, rs)
            norm = np.max(np.abs(r))
        return None, cfg.max_newton_iter

    def step(self, x0, y0, dt):
        """Advance one implicit-Euler step of size ``dt`` (no retries)."""
        p = self.problem
        rs = _x_scale(p, x0)
        w0 = np.concatenate([x0, y0])
        fresh = False
        if self.J is None or not self.config.jacobian_reuse:
            self._refresh_jacobian(w0)
            fresh = True
        w, iters = self._newton(x0, w0, dt, rs)
        if w is None and self.config.jacobian_reuse:
            if not fresh:
                self._refresh_jacobian(w0)
            w, iters = self._newton(x0, w0, dt, rs, refreshes=4)
        if w is None:
            return None
        x, y = w[:p.nx], w[p.nx:]
        if hasattr(p, "clip"):
            x, amount = p.clip(x)
            if amount:
                self.stats["clipped"] += amount
                log.debug("clipped %.3e at dt=%g", amount, dt)
        self.stats["steps"] += 1
        self._last_iters = iters
        return x, y

    def advance(self, x0, y0, dt):
        """Step with halving retries; returns ``(x, y, dt_taken)``."""
        cfg = self.config
        while True:
            out = self.step(x0, y0, dt)
            if out is not None:
                return out[0], out[1], dt
            self.stats["rejected"] += 1
            dt *= cfg.shrink
            if dt < cfg.dt_min:
                raise StiffFailure(f"step size fell below dt_min={cfg.dt_min:g}")
            self.lu = None


def step(x, y, dt, problem, config: IntegratorConfig = IntegratorConfig()):
    """One implicit-Euler step with halving retries down to ``dt_min``."""
    x1, y1, _ = ImplicitEuler(problem, config).advance(np.asarray(x, float),
                                                       np.asarray(y, float), dt)
    return x1, y1


def integrate(x0, y0, problem, config: IntegratorConfig = IntegratorConfig(),
              sample_interval=None, observers=()):
    """Integrate from t=0 to ``config.t_end``.

    Samples are stored at multiples of ``sample_interval`` (default: every
    accepted step) and at ``t_end``; steps are shortened to land on them.
    ``observers`` are called as ``obs(t, x, y)`` at every sample.
    """
    cfg = config
    stepper = ImplicitEuler(problem, cfg)
    x = np.asarray(x0, dtype=float).copy()
    y = np.asarray(y0, dtype=float).copy()
    times, xs, ys = [0.0], [x.copy()], [y.copy()]
    for obs in observers:
        obs(0.0, x, y)
    t = 0.0
    dt = cfg.dt
    next_sample = sample_interval if sample_interval else None
    eps = 1e-9 * max(cfg.t_end, 1.0)
    while t < cfg.t_end - eps:
        target = cfg.t_end if next_sample is None else min(next_sample, cfg.t_end)
        h = min(dt, target - t)
        x, y, h_taken = stepper.advance(x, y, h)
        t += h_taken
        if abs(t - target) <= eps:
            t = target
        if cfg.adaptive:
            if h_taken < h:
                dt = h_taken
            elif stepper._last_iters <= 3 and h_taken >= dt * (1 - 1e-12):
                dt = min(dt * cfg.growth, cfg.dt_max)
        at_sample = next_sample is None or t >= next_sample - eps or t >= cfg.t_end - eps
        if at_sample:
            times.append(t)
            xs.append(x.copy())
            ys.append(y.copy())
            for obs in observers:
                obs(t, x, y)
            if next_sample is not None:
                while next_sample <= t + eps:
                    next_sample += sample_interval
    return Trajectory(np.array(times), np.array(xs), np.array(ys), dict(stepper.stats))


# Steady state ------------------------------------------------------------------

def steady_residual(problem, x, y):
    """Scaled [f; g] with f weighted by a 1 s reference time."""
    rs = _x_scale(problem, x)
    return np.concatenate([problem.f(x, y) / rs, problem.g(x, y)])


def find_steady_state(x_guess, y_guess, problem, config: IntegratorConfig = IntegratorConfig(),
                      max_newton_iter=30, ptc_dt0=None, ptc_growth=10.0, ptc_dt_final=1e9,
                      max_ptc_steps=200):
    """Solve f = 0, g = 0 by Newton, falling back to pseudo-transient continuation.

    Returns ``(x, y, info)``. Raises :class:`SteadyStateError` carrying the best
    iterate and the residual history when both strategies fail.
    """
    p = problem
    tol = config.newton_tol
    jac = _Jacobian(p)
    w = np.concatenate([np.asarray(x_guess, float), np.asarray(y_guess, float)])
    history = []
    best = (np.inf, w.copy())

    def resid(w):
        with np.errstate(all="ignore"):
            return steady_residual(p, w[:p.nx], w[p.nx:])

    r = resid(w)
    norm = np.max(np.abs(r))
    history.append(norm)
    iters = 0
    while np.isfinite(norm) and norm > tol and iters < max_newton_iter:
        J = jac(w)
        rs = _x_scale(p, w[:p.nx])
        J[:p.nx] /= rs[:, None]
        try:
            d = -np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            break
        alpha = 1.0
        if hasattr(p, "max_step_fraction"):
            alpha = p.max_step_fraction(w[:p.nx], w[p.nx:], d[:p.nx], d[p.nx:])
        w_new = w + alpha * d
        r_new = resid(w_new)
        n_new = np.max(np.abs(r_new))
        iters += 1
        history.append(n_new)
        if not np.isfinite(n_new) or (iters > 3 and n_new > norm):
            break
        w, r, norm = w_new, r_new, n_new
        if norm < best[0]:
            best = (norm, w.copy())
    if np.isfinite(norm) and norm <= tol:
        x, y = w[:p.nx], w[p.nx:]
        if hasattr(p, "clip"):
            x, _ = p.clip(x)
        return x, y, {"method": "newton", "iterations": iters, "history": history}

    # pseudo-transient continuation from the original guess
    cfg = IntegratorConfig(**{**config.__dict__, "dt_max": max(ptc_dt_final, config.dt_max),
                              "jacobian_reuse": False})
    stepper = ImplicitEuler(p, cfg)
    x = np.asarray(x_guess, float).copy()
    y = np.asarray(y_guess, float).copy()
    dt = ptc_dt0 or config.dt
    for k in range(max_ptc_steps):
        try:
            x, y, dt_taken = stepper.advance(x, y, dt)
        except SolverError as exc:
            raise SteadyStateError(f"pseudo-transient continuation failed: {exc}",
                                   best[1][:p.nx], best[1][p.nx:], history) from exc
        r = resid(np.concatenate([x, y]))
        norm = np.max(np.abs(r))
        history.append(norm)
        if norm < best[0]:
            best = (norm, np.concatenate([x, y]))
        if norm <= tol:
            return x, y, {"method": "ptc", "iterations": k + 1, "history": history}
        dt = min(dt_taken * (ptc_growth if dt_taken >= dt else 1.0), ptc_dt_final)
    raise SteadyStateError("steady state not reached", best[1][:p.nx], best[1][p.nx:],
                           history)


# Post-processing -----------------------------------------------------------------

def settling_times(times, values, threshold=0.01, floors=None, groups=None):
    """Settling time of each group of columns of ``values`` (samples x signals).

    A signal is inside its band when ``|v(t) - v_final| <= threshold *
    max(|v_final|, floor)``. A group settles at the first sample after which all
    its signals stay inside. Returns one time per group (default: one group with
    every column); :data:`NOT_SETTLED` when the group only enters its band at
    the last sample.
    """
    times = np.asarray(times, dtype=float)
    V = np.asarray(values, dtype=float).reshape(len(times), -1)
    final = V[-1]
    floors = np.zeros(V.shape[1]) if floors is None else \
        np.broadcast_to(np.asarray(floors, float), final.shape)
    inside = np.abs(V - final) <= threshold * np.maximum(np.abs(final), floors)
    if groups is None:
        groups = [np.arange(V.shape[1])]
    out = []
    for g in groups:
        bad = np.nonzero(~np.all(inside[:, g], axis=1))[0]
        if bad.size == 0:
            out.append(float(times[0]))
        elif bad[-1] == len(times) - 2:
            out.append(NOT_SETTLED)
        else:
            out.append(float(times[bad[-1] + 1]))
    return out


def settling_time(traj: Trajectory, threshold=0.01, groups=None, floors=None):
    """:func:`settling_times` over the concatenated ``[x, y]`` samples of a trajectory."""
    V = np.concatenate([traj.x, traj.y], axis=1)
    return settling_times(traj.times, V, threshold, floors, groups)
