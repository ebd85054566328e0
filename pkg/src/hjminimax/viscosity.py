"""Independent viscosity-solution oracles.

Lax-Oleinik (variational, convex H(p)) and an explicit monotone
Lax-Friedrichs scheme for general H. Both emit the same GridSolution
schema as the minimax path, with a distinguishing provenance tag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .characteristics import Periodic, ProblemSpec
from .errors import CFLViolation, MalformedInput, NonFinite, OutOfRange
from .expr import Expression
from .selector import GridSolution

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ConvexHamiltonian:
    """H depending on p only, convex on the given p-window."""
    H: Expression
    p_window: tuple[float, float]

    def __post_init__(self):
        extra = self.H.variables - {"p"}
        if extra:
            raise MalformedInput(f"convex Hamiltonian must depend on p only, uses {sorted(extra)}")
        if not _convexity_certificate(self.H, self.p_window):
            raise MalformedInput("sampled second differences are not positive: H is not convex "
                                 "on the window")

    def slope_range(self, samples: int = 4097):
        ps = np.linspace(*self.p_window, samples)
        _, hp = self.H.eval_d(p=ps, wrt="p")
        return float(hp.min()), float(hp.max())


def _convexity_certificate(H: Expression, window, samples: int = 2048,
                           tol: float = 1e-8) -> bool:
    """Sampled second-difference positivity: H'' > 0 on the window."""
    ps = np.linspace(window[0], window[1], samples)
    vals = H.eval(p=ps)
    dp = ps[1] - ps[0]
    d2 = (vals[2:] - 2.0 * vals[1:-1] + vals[:-2]) / (dp * dp)
    return bool(np.all(d2 > tol))


def is_convex_in_p(H: Expression, window=(-5.0, 5.0)) -> bool:
    """Convexity certificate usable on general H(p) candidates."""
    if H.variables - {"p"}:
        return False
    return _convexity_certificate(H, window)


def legendre(Hc: ConvexHamiltonian, v: float) -> float:
    """L(v) = sup_p (v p - H(p)), golden-section refinement; accuracy ~1e-8."""
    lo, hi = Hc.p_window
    smin, smax = Hc.slope_range()
    if not (smin - 1e-12 <= v <= smax + 1e-12):
        raise OutOfRange(f"slope {v} outside attainable range [{smin}, {smax}]")

    def g(p):
        return v * p - float(Hc.H.eval(p=p))

    # coarse bracket around the sampled maximizer
    ps = np.linspace(lo, hi, 2049)
    gs = v * ps - Hc.H.eval(p=ps)
    k = int(np.argmax(gs))
    a = ps[max(0, k - 1)]
    b = ps[min(len(ps) - 1, k + 1)]
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = g(c), g(d)
    for _ in range(80):
        if b - a < 1e-12 * max(1.0, abs(a) + abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = g(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = g(d)
    return max(fc, fd)


class _LegendreTable:
    """Dense tabulation of the conjugate for vectorized Lax-Oleinik."""

    def __init__(self, Hc: ConvexHamiltonian, n_v: int = 8192, n_p: int = 8192):
        self.Hc = Hc
        self.vmin, self.vmax = Hc.slope_range()
        self.vs = np.linspace(self.vmin, self.vmax, n_v)
        ps = np.linspace(*Hc.p_window, n_p)
        hs = Hc.H.eval(p=ps)
        dp = ps[1] - ps[0]
        Ls = np.empty(n_v)
        chunk = 512
        for i0 in range(0, n_v, chunk):
            v = self.vs[i0:i0 + chunk, None]
            g = v * ps[None, :] - hs[None, :]
            k = np.argmax(g, axis=1)
            k = np.clip(k, 1, n_p - 2)
            rows = np.arange(len(k))
            gm1, g0, gp1 = g[rows, k - 1], g[rows, k], g[rows, k + 1]
            denom = gm1 - 2 * g0 + gp1
            off = np.where(denom < 0, 0.5 * (gm1 - gp1) / denom, 0.0)
            off = np.clip(off, -1.0, 1.0)
            p_star = ps[k] + off * dp
            Ls[i0:i0 + chunk] = v[:, 0] * p_star - Hc.H.eval(p=p_star)
        self.Ls = Ls

    def __call__(self, v):
        out = np.interp(v, self.vs, self.Ls)
        return out


def lax_oleinik(Hc: ConvexHamiltonian, u0: Expression, t: float, q_grid,
                n_seed: int = 2049, table: _LegendreTable | None = None,
                period: float | None = None):
    """u(t,q) = min_{q0} [u0(q0) + t L((q-q0)/t)] over a seed grid, with
    3-point parabolic refinement of the argmin. Returns values on q_grid."""
    q_grid = np.asarray(q_grid, dtype=float)
    if t == 0:
        return u0.eval(q=q_grid)
    if table is None:
        table = _LegendreTable(Hc)
    vmin, vmax = table.vmin, table.vmax
    lo = float(q_grid.min()) + vmin * t
    hi = float(q_grid.max()) + vmax * t
    q0s = np.linspace(lo, hi, n_seed)
    u0s = u0.eval(q=q0s)
    v = (q_grid[:, None] - q0s[None, :]) / t
    phi = np.where((v >= vmin) & (v <= vmax),
                   u0s[None, :] + t * table(np.clip(v, vmin, vmax)),
                   np.inf)
    if not np.all(np.isfinite(phi).any(axis=1)):
        raise OutOfRange("no admissible seed for some grid point; widen the p-window")
    k = np.argmin(phi, axis=1)
    u = phi[np.arange(len(q_grid)), k]

    # parabolic refinement of the minimizing seed
    kk = np.clip(k, 1, n_seed - 2)
    rows = np.arange(len(q_grid))
    f0, fm, fp = phi[rows, kk], phi[rows, kk - 1], phi[rows, kk + 1]
    good = np.isfinite(fm) & np.isfinite(fp) & (fm - 2 * f0 + fp > 0)
    dq0 = q0s[1] - q0s[0]
    off = np.zeros(len(q_grid))
    off[good] = 0.5 * (fm[good] - fp[good]) / (fm[good] - 2 * f0[good] + fp[good])
    off = np.clip(off, -1.0, 1.0)
    q0_star = q0s[kk] + off * dq0
    v_star = (q_grid - q0_star) / t
    ok = good & (v_star >= vmin) & (v_star <= vmax)
    refined = u0.eval(q=q0_star) + t * table(np.clip(v_star, vmin, vmax))
    u = np.where(ok & (refined < u), refined, u)
    return u


def lax_oleinik_grid(Hc: ConvexHamiltonian, u0: Expression, t_grid, q_grid,
                     n_seed: int = 2049) -> GridSolution:
    t_grid = np.asarray(t_grid, dtype=float)
    q_grid = np.asarray(q_grid, dtype=float)
    table = _LegendreTable(Hc)
    u = np.empty((len(t_grid), len(q_grid)))
    for i, t in enumerate(t_grid):
        u[i] = lax_oleinik(Hc, u0, float(t), q_grid, n_seed=n_seed, table=table)
    zeros = np.zeros_like(u, dtype=int)
    return GridSolution(t=t_grid, q=q_grid, u=u, branch=zeros,
                        branch_count=np.ones_like(zeros), provenance="viscosity")


def lax_friedrichs(spec: ProblemSpec, t_grid, q_grid, cfl: float = 0.5) -> GridSolution:
    """Explicit monotone scheme
    u+ = u - dt [H(t, q, Dc u) - theta (u_{j+1} - 2 u_j + u_{j-1}) / (2 dq)],
    Dc the centered slope, theta = 1.05 x max sampled |H_p|."""
    if cfl > 0.9:
        raise CFLViolation(f"cfl={cfl} exceeds the 0.9 bound")
    t_grid = np.asarray(t_grid, dtype=float)
    q_grid = np.asarray(q_grid, dtype=float)
    dq = float(q_grid[1] - q_grid[0])
    periodic = isinstance(spec.domain, Periodic)

    u = np.asarray(spec.u0.eval(q=q_grid), dtype=float) + 0.0 * q_grid
    _, du0 = spec.u0.eval_d(q=q_grid, wrt="q")
    pmax = 1.5 * float(np.max(np.abs(du0))) + 1.0
    ps = np.linspace(-pmax, pmax, 513)
    theta = 0.0
    for tt in np.linspace(float(t_grid[0]), float(t_grid[-1]), 5):
        _, hp = spec.H.eval_d(t=tt, q=q_grid[:, None], p=ps[None, :], wrt="p")
        theta = max(theta, float(np.max(np.abs(hp))))
    theta *= 1.05
    theta = max(theta, 1e-8)
    dt_max = cfl * dq / theta

    out = np.empty((len(t_grid), len(q_grid)))
    t = float(t_grid[0])
    out[0] = u

    def slopes(w):
        if periodic:
            return (np.roll(w, -1) - np.roll(w, 1)) / (2 * dq), \
                   (np.roll(w, -1) - 2 * w + np.roll(w, 1)) / (2 * dq)
        wp = np.concatenate([[2 * w[0] - w[1]], w, [2 * w[-1] - w[-2]]])
        return (wp[2:] - wp[:-2]) / (2 * dq), (wp[2:] - 2 * w + wp[:-2]) / (2 * dq)

    for i in range(1, len(t_grid)):
        t_target = float(t_grid[i])
        while t < t_target - 1e-14:
            dt = min(dt_max, t_target - t)
            dc, diff2 = slopes(u)
            u = u - dt * (spec.H.eval(t=t, q=q_grid, p=dc) - theta * diff2)
            t += dt
            if not np.all(np.isfinite(u)):
                raise NonFinite(f"Lax-Friedrichs blow-up at t={t}")
        out[i] = u
    zeros = np.zeros(out.shape, dtype=int)
    return GridSolution(t=t_grid, q=q_grid, u=out, branch=zeros,
                        branch_count=np.ones_like(zeros), provenance="viscosity")
