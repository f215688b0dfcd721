"""Exact steady state of the speed-modulated single-server two-queue system.

The chain is solved by the transform method: over the saturated region
(total count >= K) the stationary probabilities are carried by generating
functions whose two-dimensional transform kernel has a small root y1(z); the
finite set of unknowns pi_{i,j} with i+j <= K is pinned down by a dense
linear system made of

  * the balance equations of the sub-threshold states (i+j < K),
  * K vanishing-coefficient conditions at z = 0, which force the
    foreground-empty generating function to start at order z^K, and
  * one normalisation row expressing the total saturated mass through the
    foreground restriction of the transform.

All limit evaluations at z = 1 (where numerator and denominator of the
transform ratios vanish together) are done with truncated power series, so
values and derivatives come out of a single expansion rather than repeated
numerical differentiation.  Closed forms are provided for the two-speed case
K = 1 and for profiles whose sub-threshold speeds are all zero.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .linsys import solve_probability_system
from .models import (
    CostCoefficients,
    SingleServerModel,
    ModelError,
    SpeedProfile,
    require_stable_single,
)
from .series import PowerSeries, cancel_divide, divide, kernel_root_series

log = logging.getLogger("fbq.single")

SERIES_ORDER = 4          # expansion order used for the z = 1 limit passes


@dataclass(frozen=True)
class BoundaryProbabilities:
    """Triangular array pi_{i,j} for i + j <= K."""

    K: int
    values: dict

    def __post_init__(self):
        want = (self.K + 1) * (self.K + 2) // 2
        if len(self.values) != want:
            raise ValueError(f"boundary needs {want} entries for K={self.K}, got {len(self.values)}")

    def get(self, i: int, j: int) -> float:
        return self.values[(i, j)]

    def as_triples(self) -> list:
        return [[i, j, self.values[(i, j)]] for (i, j) in sorted(self.values)]


@dataclass(frozen=True)
class SingleServerSolution:
    """Stationary metrics of a solved single-server model."""

    boundary: BoundaryProbabilities
    g0_at_1: float          # mass of foreground-empty states in the saturated region
    L1: float               # mean foreground jobs
    L2: float               # mean background jobs
    L: float                # mean total jobs
    p_below_K: list[float]  # total-count marginal p_0 .. p_{K-1}
    tail_mass: float        # P(total >= K)
    energy_rate: float      # sum_n p_n s_n^alpha + s_K^alpha * tail

    def to_json(self) -> dict:
        return {
            "L1": self.L1,
            "L2": self.L2,
            "L": self.L,
            "p": list(self.p_below_K),
            "tail_mass": self.tail_mass,
            "energy_rate": self.energy_rate,
            "boundary": self.boundary.as_triples(),
        }


def y1_series_at(model: SingleServerModel, z0: float, order: int) -> PowerSeries:
    """Taylor expansion at z0 of the small kernel root, top-speed rates."""
    require_stable_single(model)
    return kernel_root_series(model.rho1, model.q, z0, order)


def _stable_y1_at_0(rho: float, q: float) -> float:
    # rationalised root: no cancellation when q -> 1 drives the root to 0
    disc = (1.0 + rho) ** 2 - 4.0 * rho * (1.0 - q)
    return 2.0 * (1.0 - q) / (1.0 + rho + math.sqrt(disc))


def solve_general(model: SingleServerModel) -> SingleServerSolution:
    """Exact solution for an arbitrary speed staircase (positive above idle).

    Speeds s_1 .. s_K must be positive; all-zero sub-threshold profiles have
    their own closed form in solve_zero_speed.
    """
    require_stable_single(model)
    K = model.K
    if model.lam == 0:
        raise ModelError("arrival rate must be positive to solve the chain")
    if any(model.speeds.levels[n] <= 0 for n in range(1, K + 1)):
        if all(model.speeds.levels[n] == 0 for n in range(K)):
            raise ModelError("all sub-threshold speeds are zero: use solve_zero_speed")
        raise ModelError("speed levels 1..K must be positive for the general solver")

    lam, q = model.lam, model.q
    mu1, mu2 = model.mu1, model.mu2
    rho1 = model.rho1

    idx = {}
    for t in range(K + 1):
        for i in range(t + 1):
            idx[(i, t - i)] = len(idx)
    n_unknown = len(idx)

    rows = [[0.0] * n_unknown for _ in range(n_unknown)]
    rhs = [0.0] * n_unknown
    r = 0

    # balance of the sub-threshold states
    for t in range(K):
        for i in range(t + 1):
            j = t - i
            row = rows[r]
            if i == 0 and j == 0:
                row[idx[(0, 0)]] += lam
                row[idx[(0, 1)]] -= model.mu2_at(1)
                row[idx[(1, 0)]] -= model.mu1_at(1) * (1 - q)
            elif i == 0:
                row[idx[(0, j)]] += lam + model.mu2_at(j)
                row[idx[(0, j + 1)]] -= model.mu2_at(j + 1)
                row[idx[(1, j - 1)]] -= model.mu1_at(j) * q
                row[idx[(1, j)]] -= model.mu1_at(j + 1) * (1 - q)
            else:
                row[idx[(i, j)]] += lam + model.mu1_at(t)
                row[idx[(i - 1, j)]] -= lam
                if j > 0:
                    row[idx[(i + 1, j - 1)]] -= model.mu1_at(t) * q
                row[idx[(i + 1, j)]] -= model.mu1_at(t + 1) * (1 - q)
            r += 1

    # vanishing Maclaurin coefficients at z = 0 of the boundary combination
    # sum_j z^{K-j} y1(z)^{j-1} [lam y1(z) pi_{j-1,K-j} - mu1 (1-q) pi_{j,K-j}]
    y0 = kernel_root_series(rho1, q, 0.0, max(K - 1, 0))
    ypow = [PowerSeries.constant(1.0, y0.order)]
    for _ in range(K):
        ypow.append(ypow[-1] * y0)
    for t in range(K):
        row = rows[r]
        for j in range(1, K + 1):
            s = t - (K - j)
            if s < 0:
                continue
            row[idx[(j - 1, K - j)]] += lam * ypow[j].c[s]
            row[idx[(j, K - j)]] -= mu1 * (1 - q) * ypow[j - 1].c[s]
        r += 1

    # normalisation: interior mass plus the saturated mass G(1,1), the latter
    # expressed through the foreground restriction of the transform,
    #   G(1,1) = [mu1 g0(1) + d/dy b(y,1)|_{y=1}] / (mu1 - lam),
    # with g0(1) given by the limit ratio of the boundary combination.
    dprime = lam * q / (1.0 - rho1) - mu2          # kernel-side derivative at z=1
    yp1 = q / (1.0 - rho1)                         # y1'(1)
    g0_coef = [0.0] * n_unknown                    # linear functional for g0(1)
    b1_coef = [0.0] * n_unknown                    # linear functional for d/dy b(y,1)
    g0_coef[idx[(0, K)]] += mu2 * K / dprime
    b1_coef[idx[(0, K)]] -= mu2
    for j in range(1, K + 1):
        g0_coef[idx[(j - 1, K - j)]] -= lam * ((K + 1 - j) + j * yp1) / dprime
        g0_coef[idx[(j, K - j)]] += mu1 * (1 - q) * ((K + 1 - j) + (j - 1) * yp1) / dprime
        b1_coef[idx[(j - 1, K - j)]] += (j + 1) * lam
        b1_coef[idx[(j, K - j)]] -= j * mu1 * (1 - q)
    row = rows[r]
    for t in range(K):
        for i in range(t + 1):
            row[idx[(i, t - i)]] += 1.0
    for k in range(n_unknown):
        row[k] += (mu1 * g0_coef[k] + b1_coef[k]) / (mu1 - lam)
    rhs[r] = 1.0

    x = solve_probability_system(rows, rhs)
    boundary = {state: float(x[k]) for state, k in idx.items()}
    return _finish(model, boundary)


def _binomial_poly(terms, order: int) -> PowerSeries:
    """sum_k coef_k * z^{p_k} expanded around z = 1 as a series in t = z - 1."""
    c = [0.0] * (order + 1)
    for coef, p in terms:
        for k in range(min(p, order) + 1):
            c[k] += coef * math.comb(p, k)
    return PowerSeries(c)


def _finish(model: SingleServerModel, boundary: dict) -> SingleServerSolution:
    """Assemble all summary metrics from the solved boundary probabilities."""
    K, lam, q = model.K, model.lam, model.q
    mu1, mu2 = model.mu1, model.mu2
    R = SERIES_ORDER

    p = [sum(boundary[(i, t - i)] for i in range(t + 1)) for t in range(K)]
    tail = 1.0 - sum(p)
    sum_i = sum(i * boundary[(i, t - i)] for t in range(K) for i in range(t + 1))
    sum_j = sum((t - i) * boundary[(i, t - i)] for t in range(K) for i in range(t + 1))

    y1 = kernel_root_series(model.rho1, q, 1.0, R)
    z = PowerSeries.variable(1.0, R)
    ypow = [PowerSeries.constant(1.0, R)]
    for _ in range(K):
        ypow.append(ypow[-1] * y1)

    # foreground-empty generating function as a limit ratio at z = 1;
    # an all-roundoff numerator (q = 0: no background mass at all) is zero
    num = mu2 * boundary[(0, K)] * z.pow(K)
    for j in range(1, K + 1):
        combo = lam * boundary[(j - 1, K - j)] * ypow[j] - mu1 * (1 - q) * boundary[(j, K - j)] * ypow[j - 1]
        num = num - z.pow(K + 1 - j) * combo
    den = PowerSeries([0.0, -mu2] + [0.0] * (R - 1)) - lam * z * (1.0 - y1)
    floor = 1e-12 * (lam + mu1 + mu2) * 2.0**K
    g0 = cancel_divide(num, den, 1, num_floor=floor)
    g0_at_1 = g0.c[0]

    # mean total count via the diagonal transform
    p_km1 = p[K - 1] if K >= 1 else 0.0
    num_d = (mu1 * (1 - q) - mu2) * g0 + lam * p_km1 * PowerSeries(z.pow(K).c[: g0.order + 1])
    den_d = PowerSeries([mu1 * (1 - q) - lam, -lam] + [0.0] * (g0.order - 1))
    if abs(mu1 * (1 - q) - lam) > 1e-9 * (mu1 * (1 - q) + lam):
        gzz = divide(num_d, den_d)
    else:
        gzz = cancel_divide(num_d, den_d, 1)
    L = sum_i + sum_j + gzz.c[1]

    # mean foreground count via the y-restriction at z = 1
    terms = [(-mu2 * boundary[(0, K)], 1)]
    for j in range(1, K + 1):
        terms.append((lam * boundary[(j - 1, K - j)], j + 1))
        terms.append((-mu1 * (1 - q) * boundary[(j, K - j)], j))
    num_y = _binomial_poly(terms, R)
    num_y.c[1] += mu1 * g0_at_1
    den_y = PowerSeries([0.0, mu1 - lam, -lam] + [0.0] * (R - 2))
    gy = cancel_divide(num_y, den_y, 1)
    L1 = sum_i + gy.c[1]

    # mean background count via the z-restriction
    if q == 0.0:
        L2 = sum_j
    else:
        termsz = [(-mu2 * boundary[(0, K)], K)]
        for j in range(1, K + 1):
            termsz.append((lam * boundary[(j - 1, K - j)], K + 1 - j))
            termsz.append((-mu1 * (1 - q) * boundary[(j, K - j)], K + 1 - j))
        num_z = _binomial_poly(termsz, R) + PowerSeries([0.0, -1.0] + [0.0] * (R - 1)) * (mu1 * q * z + mu2) * g0
        den_z = PowerSeries([0.0, -mu1 * q, -mu1 * q] + [0.0] * (R - 2))
        gz = cancel_divide(num_z, den_z, 1)
        L2 = sum_j + gz.c[1]

    energy = sum(p[t] * model.speeds.power(t) for t in range(K)) + model.speeds.power(K) * tail
    return SingleServerSolution(
        boundary=BoundaryProbabilities(K=K, values=boundary),
        g0_at_1=g0_at_1,
        L1=L1,
        L2=L2,
        L=L,
        p_below_K=p,
        tail_mass=tail,
        energy_rate=energy,
    )


def solve_k1_closed_form(model: SingleServerModel) -> SingleServerSolution:
    """Closed form for the two-speed profile: the foreground queue is M/M/1."""
    if model.K != 1:
        raise ModelError(f"closed form requires K = 1, got K = {model.K}")
    require_stable_single(model)
    if model.lam == 0:
        raise ModelError("arrival rate must be positive to solve the chain")
    lam, q, mu1, mu2 = model.lam, model.q, model.mu1, model.mu2
    rho1, rho2 = model.rho1, model.rho2

    pi00 = 1.0 - rho1 - rho2 * q
    g0_at_1 = rho2 * q
    L1 = rho1 / (1.0 - rho1)
    bracket = 1.0 - rho1 + rho1 * q / (1.0 - rho1)
    L2 = (rho1 + rho2 * q) / (1.0 - rho1 - rho2 * q) * bracket - rho1

    y10_over = _stable_y1_at_0(rho1, q) / (1.0 - q) if q < 1.0 else 1.0 / (1.0 + rho1)
    pi10 = lam * pi00 * y10_over / mu1          # y1(0)/(1-q) stays finite as q -> 1
    pi01 = (lam * pi00 - mu1 * (1 - q) * pi10) / mu2

    boundary = {(0, 0): pi00, (0, 1): pi01, (1, 0): pi10}
    energy = pi00 * model.speeds.power(0) + model.speeds.power(1) * (1.0 - pi00)
    return SingleServerSolution(
        boundary=BoundaryProbabilities(K=1, values=boundary),
        g0_at_1=g0_at_1,
        L1=L1,
        L2=L2,
        L=L1 + L2,
        p_below_K=[pi00],
        tail_mass=1.0 - pi00,
        energy_rate=energy,
    )


def solve_zero_speed(model: SingleServerModel) -> SingleServerSolution:
    """Closed form when every sub-threshold speed is zero.

    The processor only works with K or more jobs present, so the background
    queue can never drop below K-1: states with j < K-1 are transient.  The
    recurrent chain is the K = 1 chain shifted up by K-1 background jobs,
    giving L2 = (K-1) + L2(K=1).  (Note the shift contributes the full K-1,
    the sum of the saturated share (K-1)(rho1 + rho2 q) and the boundary
    share (K-1) pi_{0,K-1}.)
    """
    require_stable_single(model)
    K = model.K
    if model.lam == 0:
        raise ModelError("arrival rate must be positive to solve the chain")
    if any(model.speeds.levels[n] != 0 for n in range(K)):
        raise ModelError("zero-speed closed form requires s_n = 0 for every n < K")
    lam, q, mu1, mu2 = model.lam, model.q, model.mu1, model.mu2
    rho1, rho2 = model.rho1, model.rho2

    pi0 = 1.0 - rho1 - rho2 * q                  # mass of the frozen state (0, K-1)
    g0_at_1 = rho2 * q
    L1 = rho1 / (1.0 - rho1)
    bracket = 1.0 - rho1 + rho1 * q / (1.0 - rho1)
    L2_k1 = (rho1 + rho2 * q) / (1.0 - rho1 - rho2 * q) * bracket - rho1
    L2 = (K - 1) + L2_k1

    y10 = _stable_y1_at_0(rho1, q)
    pi_0K = rho2 * pi0 * (1.0 - y10)
    y10_over = _stable_y1_at_0(rho1, q) / (1.0 - q) if q < 1.0 else 1.0 / (1.0 + rho1)
    pi_1Km1 = lam * pi0 * y10_over / mu1

    boundary = {(i, t - i): 0.0 for t in range(K + 1) for i in range(t + 1)}
    boundary[(0, K - 1)] = pi0
    boundary[(0, K)] = pi_0K
    boundary[(1, K - 1)] = pi_1Km1

    p = [0.0] * K
    p[K - 1] = pi0
    tail = 1.0 - pi0
    energy = model.speeds.power(K) * tail  # sub-threshold levels draw nothing
    return SingleServerSolution(
        boundary=BoundaryProbabilities(K=K, values=boundary),
        g0_at_1=g0_at_1,
        L1=L1,
        L2=L2,
        L=L1 + L2,
        p_below_K=p,
        tail_mass=tail,
        energy_rate=energy,
    )


def evaluate_cost_single(solution: SingleServerSolution, speeds: SpeedProfile,
                         costs: CostCoefficients) -> float:
    """Linear holding + energy cost of a solved stationary state."""
    K = speeds.K
    energy = sum(solution.p_below_K[n] * speeds.power(n) for n in range(K))
    energy += speeds.power(K) * solution.tail_mass
    return costs.c1 * solution.L + costs.c2 * energy


# --- consistency checks ------------------------------------------------------


def _numerator_at(model: SingleServerModel, boundary: dict, zv: float) -> float:
    """Direct float evaluation of the boundary combination at a point z."""
    K, lam, q, mu1, mu2 = model.K, model.lam, model.q, model.mu1, model.mu2
    y = kernel_root_series(model.rho1, q, zv, 0).value()
    acc = mu2 * boundary[(0, K)] * zv**K
    for j in range(1, K + 1):
        acc -= zv ** (K + 1 - j) * y ** (j - 1) * (
            lam * y * boundary[(j - 1, K - j)] - mu1 * (1 - q) * boundary[(j, K - j)]
        )
    return acc


def verify_single(model: SingleServerModel, sol: SingleServerSolution) -> dict:
    """Residuals of the structural identities; all should be ~ 0 on a valid solve."""
    K, lam, q, mu1, mu2 = model.K, model.lam, model.q, model.mu1, model.mu2
    b = sol.boundary.values
    res = {}
    res["normalization"] = abs(sum(sol.p_below_K) + sol.tail_mass - 1.0)
    res["L_sum"] = abs(sol.L - sol.L1 - sol.L2)
    # flow balance across the saturation boundary
    up = lam * sum(b[(j - 1, K - j)] for j in range(1, K + 1))
    down = mu2 * b[(0, K)] + mu1 * (1 - q) * sum(b[(j, K - j)] for j in range(1, K + 1))
    res["flow_balance"] = abs(up - down)
    # the boundary combination must vanish to order K-1 at z = 0
    r3 = abs(_numerator_at(model, b, 1e-3)) / 1e-3 ** max(K - 1, 0)
    r4 = abs(_numerator_at(model, b, 1e-4)) / 1e-4 ** max(K - 1, 0)
    res["maclaurin_at_1e3"] = r3
    res["maclaurin_decay"] = r4 / r3 if r3 > 0 else 0.0
    # pi_{0,K} must reappear as the z^K Maclaurin coefficient of g0
    if model.speeds.levels[1] > 0 or K == 1:
        y0 = kernel_root_series(model.rho1, q, 0.0, K)
        z0 = PowerSeries.variable(0.0, K)
        ypow = [PowerSeries.constant(1.0, K)]
        for _ in range(K):
            ypow.append(ypow[-1] * y0)
        num = mu2 * b[(0, K)] * z0.pow(K)
        for j in range(1, K + 1):
            combo = lam * b[(j - 1, K - j)] * ypow[j] - mu1 * (1 - q) * b[(j, K - j)] * ypow[j - 1]
            num = num - z0.pow(K + 1 - j) * combo
        den = mu2 * (1.0 - z0) - lam * z0 * (1.0 - y0)
        g0z = divide(num, den)
        res["g0_leading_coeffs"] = max(abs(c) for c in g0z.c[:K]) if K > 0 else 0.0
        res["pi0K_recovery"] = abs(g0z.c[K] - b[(0, K)])
    return res
