"""Exact steady state of the m-server two-queue pool with a switch-off threshold.

With i foreground jobs (i < m) the remaining m - i servers work on the
background queue, so the transform equations couple the per-level generating
functions g_0(z) .. g_{m-1}(z) through a tridiagonal matrix A(z) whose last
diagonal entry absorbs the saturated region via the small kernel root y1(z).
Cramer's rule gives g_i = D_i/D; the determinant D has exactly m-1 simple
real zeros in (0,1), located by descending the interlacing zeros of its
leading principal minors (a Sturm-like bisection cascade).  Those zeros,
the balance equations of the boundary states, and the idle-server identity

    E[servers not working] = m - rho1 - rho2

close a dense linear system for the boundary probabilities.  Determinants
are always evaluated through the tridiagonal three-term recurrences (never
generic elimination); their shared zero at z = 1 is removed by truncated
series division, which yields g_i(1) and g_i'(1) in one pass.

The switch-off policy stops all m servers when the total job count drops to
a threshold K (restarting them at the next arrival), which zeroes the states
below the K-diagonal and modifies the inhomogeneous terms b_i(z) for i <= K;
everything else is shared with the uncontrolled pool (K = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .linsys import solve_probability_system
from .models import (
    CostCoefficients,
    ModelError,
    MultiServerModel,
    SolverError,
    require_stable_multi,
)
from .series import PowerSeries, kernel_root_pair_at_1

SERIES_ORDER = 3
ROOT_REL_WIDTH = 1e-13


@dataclass(frozen=True)
class MultiServerSolution:
    """Stationary metrics of a solved multiserver model."""

    boundary: dict            # (i, j) -> pi_{i,j} on the solver's unknown set
    g_at_1: list[float]       # foreground marginal P(fg = i), i = 0 .. m-1
    g_m_at_1: float           # P(fg = m)
    L1: float
    L2: float
    L: float
    U: float                  # mean number of operative servers
    p: list[float]            # total-count marginal p_0 .. p_{m-1}
    tail_mass: float          # P(total >= m)
    roots: list[float]        # zeros of the transform determinant in (0,1)
    threshold: int

    def to_json(self) -> dict:
        return {
            "L1": self.L1,
            "L2": self.L2,
            "L": self.L,
            "p": list(self.p),
            "tail_mass": self.tail_mass,
            "energy_rate": self.U,
            "boundary": [[i, j, v] for (i, j), v in sorted(self.boundary.items())],
            "U": self.U,
            "threshold": self.threshold,
            "roots": list(self.roots),
        }


# --- kernel root and matrix entries ------------------------------------------


def _y1_float(model: MultiServerModel, z: float) -> float:
    rho = model.lam / (model.m * model.mu1)
    disc = (1.0 - rho) ** 2 - 4.0 * rho * model.q * (z - 1.0)
    if disc <= 0:
        raise SolverError(f"kernel discriminant {disc:.3e} <= 0 at z={z}")
    return (1.0 + rho - math.sqrt(disc)) / (2.0 * rho)


def _matrix_entries(model: MultiServerModel, z, zm1, y1):
    """Diagonal a_i(z) and products alpha_i(z)*lam*z of the transform matrix.

    Works on floats and on power series alike; `zm1` must be z - 1 formed so
    that its zero at z = 1 is exact.
    """
    lam, mu1, mu2, q, m = model.lam, model.mu1, model.mu2, model.q, model.m
    a = []
    for i in range(m - 1):
        a.append(lam * z + i * mu1 * z + (m - i) * mu2 * zm1)
    a.append(lam * z * (1.0 - y1) + (m - 1) * mu1 * z + mu2 * zm1)
    alpha = [None]
    for i in range(1, m):
        alpha.append(i * mu1 * z * (1.0 - q + q * z))
    alam = [None] + [alpha[i] * (lam * z) for i in range(1, m)]
    return a, alpha, alam


def _q_sequence(a, alam):
    """Leading principal minors Q_0 .. Q_{m-1} of the transform matrix."""
    m = len(a)
    Q = [1.0 if not isinstance(a[0], PowerSeries) else PowerSeries.constant(1.0, a[0].order)]
    if m >= 2:
        Q.append(a[0])
    for i in range(2, m):
        Q.append(a[i - 1] * Q[i - 1] - alam[i - 1] * Q[i - 2])
    return Q  # exactly Q[0 .. m-1]


def _r_sequence(a, alam):
    """Trailing principal minors R_m .. R_0; R_0 is the determinant."""
    m = len(a)
    one = 1.0 if not isinstance(a[0], PowerSeries) else PowerSeries.constant(1.0, a[0].order)
    R = [None] * (m + 1)
    R[m] = one
    R[m - 1] = a[m - 1]
    for t in range(m - 2, -1, -1):
        R[t] = a[t] * R[t + 1] - alam[t + 1] * R[t + 2]
    return R


def _det_at(model: MultiServerModel, z: float) -> float:
    a, _, alam = _matrix_entries(model, z, z - 1.0, _y1_float(model, z))
    return _r_sequence(a, alam)[0]


@dataclass(frozen=True)
class TriDiagonalSystem:
    """The z-parametrised tridiagonal matrix coupling the per-level
    generating functions, with its principal-minor machinery.

    Diagonal entries a_i(z) = lam z + i mu1 z + (m-i) mu2 (z-1) for
    i <= m-2; the last one folds in the saturated region through the small
    kernel root.  Off-diagonals are -lam z below and -alpha_i(z) =
    -i mu1 z (1-q+qz) above.  The determinant vanishes at z = 1 and at
    exactly m-1 interior points that close the boundary linear system.
    """

    model: MultiServerModel

    def matrix(self, z: float):
        return _dense_matrix(self.model, z)

    def determinant(self, z: float) -> float:
        return _det_at(self.model, z)

    def principal_minors(self, z: float) -> list[float]:
        """Q_0 .. Q_{m-1}, the leading principal minors (three-term
        recurrence); their interlaced zeros bracket the determinant's."""
        y1 = _y1_float(self.model, z) if 0.0 <= z <= 1.0 else 0.0
        a, _, alam = _matrix_entries(self.model, z, z - 1.0, y1)
        return list(_q_sequence(a, alam))


def _b_coefficients(model: MultiServerModel, K: int, t: int, z, zm1):
    """Linear coefficients of b_t(z) in the unknown boundary probabilities."""
    lam, mu1, mu2, q, m = model.lam, model.mu1, model.mu2, model.q, model.m
    coeffs = {}
    if K >= 1 and t <= K:
        zpow = _pow(z, K - t)
        coeffs[(t, K - t)] = (t * mu1 * z + (m - t) * mu2 * zm1) * zpow
        if t <= K - 1:
            coeffs[(t + 1, K - t - 1)] = -(t + 1) * mu1 * (1.0 - q + q * z) * zpow
        for j in range(K - t + 1, m - t):
            coeffs[(t, j)] = mu2 * zm1 * (m - t - j) * _pow(z, j)
    else:
        for j in range(0, m - t):
            coeffs[(t, j)] = mu2 * zm1 * (m - t - j) * _pow(z, j)
    return coeffs


def _pow(z, p: int):
    if isinstance(z, PowerSeries):
        return z.pow(p)
    return z**p


# --- root isolation -----------------------------------------------------------


def _bisect(f, lo: float, hi: float, flo: float, fhi: float) -> float:
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise SolverError(f"no sign change on [{lo:.6g}, {hi:.6g}]")
    while hi - lo > ROOT_REL_WIDTH * hi:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if flo * fm < 0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def d_roots(model: MultiServerModel) -> list[float]:
    """The m-1 zeros of the transform determinant in (0,1).

    Descends the interlacing tree of the principal minors: the i zeros of
    Q_i in (0,1) bracket the i+1 zeros of Q_{i+1} together with the interval
    endpoints, and the zeros of Q_{m-1} bracket those of the determinant.
    Bisection inside each bracket is unconditionally convergent.
    """
    require_stable_multi(model)
    m = model.m
    if m == 1:
        return []

    def q_level(i):
        # Q_i as a float evaluator
        def f(z):
            a, _, alam = _matrix_entries(model, z, z - 1.0, _y1_float(model, z))
            return _q_sequence(a, alam)[i]
        return f

    roots = []
    for i in range(1, m):
        f = q_level(i)
        brackets = [0.0] + roots + [1.0]
        new = []
        vals = [f(x) for x in brackets]
        for k in range(len(brackets) - 1):
            try:
                new.append(_bisect(f, brackets[k], brackets[k + 1], vals[k], vals[k + 1]))
            except SolverError as exc:
                raise SolverError(
                    f"minor Q_{i} lost a bracketed zero: {exc}; "
                    f"D'(1) = {dprime_at_1(model):.6g}"
                ) from exc
        roots = new

    vals = [_det_at(model, x) for x in [0.0] + roots]
    brackets = [0.0] + roots
    out = []
    for k in range(len(brackets) - 1):
        try:
            out.append(_bisect(lambda z: _det_at(model, z),
                               brackets[k], brackets[k + 1], vals[k], vals[k + 1]))
        except SolverError as exc:
            raise SolverError(
                f"determinant lost a bracketed zero (instability or precondition "
                f"violation): {exc}; D'(1) = {dprime_at_1(model):.6g}"
            ) from exc
    return out


def dprime_at_1(model: MultiServerModel) -> float:
    """Closed-form derivative of the transform determinant at z = 1.

    Obtained by summing all rows into the last one, dividing it by z - 1 and
    expanding; positive exactly when the model is stable.
    """
    m, mu1, mu2 = model.m, model.mu1, model.mu2
    rho1, rho2 = model.rho1, model.rho2
    if rho1 == m:
        raise ModelError("rho1 equals the server count; derivative form is singular")
    bracket = sum(rho1**j / math.factorial(j) for j in range(m))
    bracket += m * rho1**m / ((m - rho1) * math.factorial(m))
    return mu1 ** (m - 1) * math.factorial(m - 1) * mu2 * (m - rho1 - rho2) * bracket


# --- the linear system ---------------------------------------------------------


def _unknowns(m: int, K: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(m) for j in range(max(0, K - i), m - i)]


def _dense_matrix(model: MultiServerModel, z: float) -> np.ndarray:
    lam, m = model.lam, model.m
    a, alpha, _ = _matrix_entries(model, z, z - 1.0, _y1_float(model, z))
    out = np.zeros((m, m))
    for i in range(m):
        out[i, i] = a[i]
        if i + 1 < m:
            out[i, i + 1] = -alpha[i + 1]
        if i > 0:
            out[i, i - 1] = -lam * z
    return out


def _null_vectors(a0: np.ndarray):
    """Left and right null vectors of a (numerically) singular matrix."""
    u_svd, sv, vt = scipy.linalg.svd(a0)
    if sv[-1] > 1e-6 * sv[0]:
        raise SolverError(f"matrix expected singular has sigma_min/sigma_max = {sv[-1] / sv[0]:.3e}")
    return u_svd[:, -1], vt[-1, :]


def _solve_threshold(model: MultiServerModel, K: int) -> MultiServerSolution:
    require_stable_multi(model)
    if model.lam == 0:
        raise ModelError("arrival rate must be positive to solve the chain")
    lam, mu1, mu2, q, m = model.lam, model.mu1, model.mu2, model.q, model.m
    if not 0 <= K <= m - 1:
        raise ModelError(f"threshold {K} outside [0, {m - 1}]")

    states = _unknowns(m, K)
    idx = {s: k for k, s in enumerate(states)}
    n = len(states)
    rows = [[0.0] * n for _ in range(n)]
    rhs = [0.0] * n
    r = 0

    # balance equations that close inside the unknown set
    for i in range(m - 1):
        for j in range(max(0, K - i), m - i - 1):
            row = rows[r]
            if K >= 1 and i + j == K:
                # servers stopped on the threshold diagonal: arrivals out,
                # service inflows from the diagonal above
                row[idx[(i, j)]] += lam
                row[idx[(i + 1, j)]] -= (i + 1) * (1.0 - q) * mu1
                row[idx[(i, j + 1)]] -= (j + 1) * mu2
            else:
                row[idx[(i, j)]] += lam + i * mu1 + min(j, m - i) * mu2
                if i > 0:
                    row[idx[(i - 1, j)]] -= lam
                row[idx[(i + 1, j)]] -= (i + 1) * mu1 * (1.0 - q)
                if j > 0:
                    row[idx[(i + 1, j - 1)]] -= (i + 1) * mu1 * q
                row[idx[(i, j + 1)]] -= min(j + 1, m - i) * mu2
            r += 1

    # at each zero of the determinant the transform system A(z) g = b stays
    # solvable only if b is orthogonal to the left null vector of A(z)
    roots = d_roots(model)
    for zk in roots:
        u, _ = _null_vectors(_dense_matrix(model, zk))
        row = rows[r]
        for t in range(m):
            for state, coef in _b_coefficients(model, K, t, zk, zk - 1.0).items():
                row[idx[state]] += u[t] * coef
        r += 1

    # idle-or-stopped server identity as the normalisation
    row = rows[r]
    for (i, j), k in idx.items():
        t = i + j
        row[k] += float(m) if t == K else float(m - t)
    rhs[r] = m - model.rho1 - model.rho2

    x = solve_probability_system(rows, rhs)
    boundary = {s: float(x[k]) for s, k in idx.items()}
    return _finish(model, K, boundary, roots)


def _finish(model: MultiServerModel, K: int, boundary: dict, roots: list[float]) -> MultiServerSolution:
    lam, mu1, q, m = model.lam, model.mu1, model.q, model.m
    R_ORD = SERIES_ORDER
    rho_hat = lam / (m * mu1)
    y1s, y2s = kernel_root_pair_at_1(rho_hat, q, R_ORD)
    z = PowerSeries.variable(1.0, R_ORD)
    zm1 = PowerSeries([0.0, 1.0] + [0.0] * (R_ORD - 1))

    # Taylor data of the transform system at z = 1: A(z) g(z) = b(z) expanded
    # as (A0 + A1 t + A2 t^2)(g0 + g1 t + ...) = b0 + b1 t + b2 t^2 + ...
    a, alpha, _ = _matrix_entries(model, z, zm1, y1s)
    amats = [np.zeros((m, m)) for _ in range(3)]
    for order in range(3):
        for i in range(m):
            amats[order][i, i] = a[i].c[order]
            if i + 1 < m:
                amats[order][i, i + 1] = -alpha[i + 1].c[order]
            if i > 0:
                amats[order][i, i - 1] = -(lam * z).c[order] if order <= 1 else 0.0
    a0, a1, a2 = amats

    bvec = [np.zeros(m) for _ in range(3)]
    for t in range(m):
        acc = PowerSeries.constant(0.0, R_ORD)
        for state, coef in _b_coefficients(model, K, t, z, zm1).items():
            acc = acc + coef * boundary[state]
        for order in range(3):
            bvec[order][t] = acc.c[order]
    b0, b1, b2 = bvec

    # A0 is singular (that is how the saturated region enters), so the Taylor
    # cascade needs one solvability condition per order: each particular
    # solution is completed with the right-null-vector component that keeps
    # the next order consistent.
    u, v = _null_vectors(a0)
    uA1v = u @ a1 @ v
    if abs(uA1v) < 1e-12 * np.abs(a1).max():
        raise SolverError("transform system is degenerate at z = 1 (vanishing drift)")
    scale = np.abs(b0).max() + np.abs(b1).max()
    if abs(u @ b0) > 1e-7 * max(scale, 1e-300):
        raise SolverError(f"solvability residual {u @ b0:.3e} at z = 1; boundary solve inconsistent")
    p0 = scipy.linalg.lstsq(a0, b0)[0]
    c0 = (u @ b1 - u @ a1 @ p0) / uA1v
    g0 = p0 + c0 * v
    p1 = scipy.linalg.lstsq(a0, b1 - a1 @ g0)[0]
    c1 = (u @ b2 - u @ a2 @ g0 - u @ a1 @ p1) / uA1v
    g1 = p1 + c1 * v

    gv1 = [float(x) for x in g0]       # g_i(1)
    gd1 = [float(x) for x in g1]       # g_i'(1)
    r = rho_hat
    gm1 = r * gv1[m - 1]

    if K == 0:
        _, L1 = mmm_marginal(m, model.rho1)
    else:
        L1 = sum(i * gv1[i] for i in range(m)) + gm1 * (m * (1.0 - r) + r) / (1.0 - r) ** 2

    # saturated-tail contribution g(1,z) = g_{m-1}(z) / (y2(z) - 1)
    y2v, y2d = y2s.c[0], y2s.c[1]
    tail_deriv = (gd1[m - 1] * (y2v - 1.0) - gv1[m - 1] * y2d) / (y2v - 1.0) ** 2
    L2 = sum(gd1) + tail_deriv

    diag = sum(boundary.get((i, K - i), 0.0) for i in range(K + 1))
    U = m * (1.0 - diag)
    p = [sum(boundary.get((i, t - i), 0.0) for i in range(t + 1)) for t in range(m)]

    return MultiServerSolution(
        boundary=boundary,
        g_at_1=gv1,
        g_m_at_1=gm1,
        L1=L1,
        L2=L2,
        L=L1 + L2,
        U=U,
        p=p,
        tail_mass=1.0 - sum(p),
        roots=list(roots),
        threshold=K,
    )


def solve_fixed_m(model: MultiServerModel) -> MultiServerSolution:
    """Steady state of the uncontrolled pool (all servers always available)."""
    return _solve_threshold(model, 0)


def solve_threshold(model: MultiServerModel) -> MultiServerSolution:
    """Steady state under the model's switch-off threshold."""
    return _solve_threshold(model, model.threshold)


def evaluate_cost_multi(solution: MultiServerSolution, costs: CostCoefficients) -> float:
    """Holding cost of the jobs plus energy cost of the operative servers."""
    return costs.c1 * (solution.L1 + solution.L2) + costs.c2 * solution.U


def mmm_marginal(m: int, rho1: float) -> tuple[list[float], float]:
    """Erlang-C marginals p_0 .. p_m and mean count for an m-server queue."""
    if rho1 >= m:
        raise ModelError(f"foreground load {rho1} >= m = {m}")
    p0 = 1.0 / (sum(rho1**k / math.factorial(k) for k in range(m))
                + m * rho1**m / ((m - rho1) * math.factorial(m)))
    p = [p0 * rho1**i / math.factorial(i) for i in range(m + 1)]
    rr = rho1 / m
    L1 = rho1 + p[m] * rr / (1.0 - rr) ** 2
    return p, L1


# --- consistency checks --------------------------------------------------------


def verify_multi(model: MultiServerModel, sol: MultiServerSolution) -> dict:
    """Residuals of the structural identities; all should be ~ 0 on a valid solve."""
    lam, mu1, m, K = model.lam, model.mu1, model.m, sol.threshold
    res = {}
    lhs = sum((float(m) if i + j == K else float(m - i - j)) * v for (i, j), v in sol.boundary.items())
    res["idle_server_identity"] = abs(lhs - (m - model.rho1 - model.rho2))
    r = lam / (m * mu1)
    res["normalization"] = abs(sum(sol.g_at_1) + sol.g_at_1[m - 1] * r / (1.0 - r) - 1.0)
    if K == 0:
        p, _ = mmm_marginal(m, model.rho1)
        res["fg_marginal"] = max(abs(sol.g_at_1[i] - p[i]) for i in range(m))
        res["fg_marginal"] = max(res["fg_marginal"], abs(sol.g_m_at_1 - p[m]))
    # the saturated foreground tail is geometric with ratio r; extend it with
    # the three-term recurrence and compare
    g_prev, g_cur = sol.g_at_1[m - 1], sol.g_m_at_1
    worst = 0.0
    for k in range(1, 4):
        g_next = ((lam + m * mu1) * g_cur - lam * g_prev) / (m * mu1)
        worst = max(worst, abs(g_next / sol.g_m_at_1 - r**k))
        g_prev, g_cur = g_cur, g_next
    res["geometric_tail"] = worst
    scale = max(abs(_det_at(model, 0.02 * k)) for k in range(1, 50))
    res["det_at_roots"] = max((abs(_det_at(model, zk)) / scale for zk in sol.roots), default=0.0)
    return res
