"""Two-moment recurrence of a symmetric Gaussian weight family and its bounds.

Under unit sparsity (p_e = 1/N) and symmetric families, the mean ``mu`` and
variance ``sigma_sq`` of the target-0 family evolve by the affine map

    mu' = m mu + c,    sigma_sq' = m^2 sigma_sq

with ``m = 1 - (2 alpha / N) A^(N-1)`` and ``c = (alpha / N)(A^(N-1) - B^(N-1))``,
``A = 1 + 4(mu^2 + sigma_sq - mu)/N`` and ``B = 1 - 2 mu / N``. The target-1
family mirrors it through ``mu -> 1 - mu``.

The recurrence itself uses exact powers. Everything in :func:`bounds` comes
from the exponential approximation ``(1 + x)^(N-1) = exp(N x + eta)`` and
its worst-case truncation error over the domain
``mu in [-1/4, 1/2], sigma_sq in (0, 1/4]``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import brentq

MU_DOMAIN = (-0.25, 0.5)
SIGMA_SQ_DOMAIN = (0.0, 0.25)
LOG_POWER_MIN_N = 1000


@dataclass(frozen=True)
class DistState:
    mu: float
    sigma_sq: float
    k: int = 0

    def in_domain(self) -> bool:
        return MU_DOMAIN[0] <= self.mu <= MU_DOMAIN[1] and SIGMA_SQ_DOMAIN[0] < self.sigma_sq <= SIGMA_SQ_DOMAIN[1]


INIT_STATE = DistState(0.5, 0.25, 0)


@dataclass(frozen=True)
class UpdateCoeffs:
    m: float
    c: float
    xi: float
    zeta: float


def _power(x: float, n: int) -> float:
    if n > LOG_POWER_MIN_N and x > 0:
        return math.exp(n * math.log(x))
    return float(x) ** n


def ab_powers(state: DistState, N: int) -> tuple[float, float]:
    """Exact ``A^(N-1)`` and ``B^(N-1)`` at p_e = 1/N."""
    p = 1.0 / N
    A = 4 * p * (state.mu**2 + state.sigma_sq) - 4 * p * state.mu + 1
    B = 1 - 2 * p * state.mu
    return _power(A, N - 1), _power(B, N - 1)


def update_coeffs(state: DistState, alpha: float, N: int) -> UpdateCoeffs:
    An, Bn = ab_powers(state, N)
    return UpdateCoeffs(
        m=1.0 - 2.0 * alpha / N * An,
        c=alpha / N * (An - Bn),
        xi=4.0 * (state.mu**2 + state.sigma_sq - state.mu),
        zeta=-2.0 * state.mu,
    )


def step_dist(state: DistState, alpha: float, N: int) -> DistState:
    co = update_coeffs(state, alpha, N)
    return DistState(co.m * state.mu + co.c, co.m**2 * state.sigma_sq, state.k + 1)


def fixed_point(state: DistState, N: int, alpha: float = 1.0) -> float | None:
    """Instantaneous fixed point ``c / (1 - m)``; ``None`` when undefined (alpha = 0)."""
    co = update_coeffs(state, alpha, N)
    if co.m == 1.0:
        return None
    return co.c / (1.0 - co.m)


@dataclass
class Trajectory:
    k: np.ndarray
    mu: np.ndarray
    sigma_sq: np.ndarray
    m: np.ndarray
    c: np.ndarray
    fp: np.ndarray

    @property
    def final(self) -> DistState:
        return DistState(float(self.mu[-1]), float(self.sigma_sq[-1]), int(self.k[-1]))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "mu", "sigma_sq", "m", "c", "fp"])
            for row in zip(self.k, self.mu, self.sigma_sq, self.m, self.c, self.fp):
                w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


def iterate(
    state: DistState,
    alpha: float,
    N: int,
    steps: int,
    stop: Callable[[DistState], bool] | None = None,
    record_every: int = 1,
) -> Trajectory:
    """Apply :func:`step_dist` up to ``steps`` times, recording every ``record_every`` steps.

    Columns ``m``, ``c`` and ``fp`` hold the coefficients evaluated at the
    recorded state (the ones that produce the next state).
    """
    rows = []

    def record(s: DistState) -> None:
        co = update_coeffs(s, alpha, N)
        fp = np.nan if co.m == 1.0 else co.c / (1.0 - co.m)
        rows.append((s.k, s.mu, s.sigma_sq, co.m, co.c, fp))

    s = state
    record(s)
    for _ in range(steps):
        s = step_dist(s, alpha, N)
        done = stop is not None and stop(s)
        if done or s.k % record_every == 0:
            record(s)
        if done:
            break
    if rows[-1][0] != s.k:
        record(s)
    cols = list(zip(*rows))
    return Trajectory(np.asarray(cols[0], dtype=np.int64), *(np.asarray(c, dtype=np.float64) for c in cols[1:]))


# ------------------------------------------------------------------ bounds


def eta_xi_max(N: int) -> float:
    return 153.0 / (32 * N - 72)


def eta_zeta_max(N: int) -> float:
    return 3.0 / (2 * N)


def eta_xi_max_zero_var(N: int) -> float:
    return 65.0 / (32 * N - 40)


def epsilon(N: int) -> float:
    return (402 * N - 216) / (2 * N * (32 * N - 72))


def step_constant(N: int) -> float:
    """``delta_max`` divided by ``alpha / N``."""
    return 1.5 * math.exp(2.25) * math.exp(eta_xi_max(N)) - math.exp(-1.0) * math.exp(-eta_zeta_max(N))


def alpha0(N: int) -> float:
    return N * math.exp(-(72 * N - 9) / (32 * N - 72))


def alpha1(N: int) -> float:
    return alpha0(N) / 2


def alpha2(N: int) -> float:
    return N * (3 - 2 * math.exp(epsilon(N))) / (4 * step_constant(N))


def delta_max(N: int, alpha: float) -> float:
    return alpha / N * step_constant(N)


@dataclass(frozen=True)
class BoundSet:
    N: int
    alpha: float
    eta_xi_max: float
    eta_zeta_max: float
    eta_xi_max_zero_var: float
    epsilon: float
    alpha0: float
    alpha1: float
    alpha2: float
    delta_max: float
    phi_min_prime: float
    phi_max_prime: float

    def row(self) -> list[float]:
        return [self.N, self.alpha0, self.alpha1, self.alpha2, self.epsilon,
                self.phi_min_prime, self.phi_max_prime, self.delta_max]


BOUNDS_HEADER = ["N", "alpha0", "alpha1", "alpha2", "epsilon", "phi_min", "phi_max", "delta_max"]


def bounds(N: int, alpha: float = 0.0) -> BoundSet:
    if N <= 2:
        raise ValueError("bounds require N > 2")
    eps = epsilon(N)
    return BoundSet(
        N=N,
        alpha=alpha,
        eta_xi_max=eta_xi_max(N),
        eta_zeta_max=eta_zeta_max(N),
        eta_xi_max_zero_var=eta_xi_max_zero_var(N),
        epsilon=eps,
        alpha0=alpha0(N),
        alpha1=alpha1(N),
        alpha2=alpha2(N),
        delta_max=delta_max(N, alpha),
        phi_min_prime=0.5 * (1 - math.exp(eps)),
        phi_max_prime=0.5 * (1 - math.exp(-eps)),
    )


def write_bounds_csv(Ns: Iterable[int], alpha: float, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BOUNDS_HEADER)
        for N in Ns:
            w.writerow([repr(v) for v in bounds(int(N), alpha).row()])


def envelopes(state: DistState, N: int) -> tuple[float, float]:
    """Bounds on the instantaneous fixed point that hold for any truncation error."""
    g = math.exp(-4 * state.mu**2 - 4 * state.sigma_sq + 2 * state.mu)
    eps = epsilon(N)
    return 0.5 * (1 - g * math.exp(eps)), 0.5 * (1 - g * math.exp(-eps))


@dataclass(frozen=True)
class ConvergenceInterval:
    lo: float
    hi: float
    proven: bool

    def __iter__(self):
        return iter((self.lo, self.hi))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, x: float) -> bool:
        return self.lo <= x <= self.hi


def convergence_interval(N: int, alpha: float) -> ConvergenceInterval:
    """Terminal region for the mean. Only guaranteed for N >= 18 and alpha < alpha2."""
    b = bounds(N, alpha)
    proven = N >= 18
    if not proven:
        warnings.warn(f"N={N} is outside the regime where the interval is guaranteed", stacklevel=2)
    return ConvergenceInterval(b.phi_min_prime - b.delta_max, b.phi_max_prime + b.delta_max, proven)


# ---------------------------------------------------- supporting analysis


def exp_approx_error(x: float, N: int) -> tuple[float, float]:
    """Exact ``eta = (N-1) ln(1+x) - N x`` and its bound ``(N-1)x^2/(2(1-|x|)) + |x|``."""
    if abs(x) >= 1:
        raise ValueError("|x| must be below 1")
    eta = (N - 1) * math.log1p(x) - N * x
    bound = (N - 1) * x * x / (2 * (1 - abs(x))) + abs(x)
    if abs(eta) > bound * (1 + 1e-12) + 1e-300:
        raise ArithmeticError(f"bound violated at x={x}, N={N}: |{eta}| > {bound}")
    return eta, bound


@dataclass
class AffineRun:
    x: np.ndarray
    a: np.ndarray
    distance: np.ndarray | None
    contraction_violations: list[int] = field(default_factory=list)
    hypothesis_violations: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.contraction_violations and not self.hypothesis_violations


def envelope_distance(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x - hi, 0.0) + np.maximum(lo - x, 0.0)


def variable_affine_iterate(
    a_fn: Callable[[float], float],
    b_fn: Callable[[float], float],
    x0: float,
    steps: int,
    envelope: tuple[float, float] | None = None,
    tol: float = 1e-12,
) -> AffineRun:
    """Iterate ``x <- a(x) x + b(x)`` and audit the envelope contraction property.

    Steps where ``a`` leaves (0, 1) are recorded as hypothesis violations and
    skipped by the contraction audit, so oscillatory maps can still be traced.
    """
    xs = [float(x0)]
    a_vals = []
    for _ in range(steps):
        x = xs[-1]
        a = float(a_fn(x))
        a_vals.append(a)
        xs.append(a * x + float(b_fn(x)))
    xs_arr = np.asarray(xs)
    a_arr = np.asarray(a_vals)
    run = AffineRun(xs_arr, a_arr, None)
    run.hypothesis_violations = [k for k, a in enumerate(a_vals) if not 0.0 < a < 1.0]
    if envelope is not None:
        d = envelope_distance(xs_arr, *envelope)
        run.distance = d
        bad = d[1:] > a_arr * d[:-1] + tol
        bad &= (a_arr > 0) & (a_arr < 1)
        run.contraction_violations = np.nonzero(bad)[0].tolist()
    return run


@dataclass(frozen=True)
class IntersectionBounds:
    phi_lo: float
    phi_hi: float
    root: float | None

    @property
    def root_inside(self) -> bool:
        return self.root is not None and self.phi_lo - 1e-12 <= self.root <= self.phi_hi + 1e-12


def intersection_bounds_check(f: Callable[[float], float], a: float, b: float, grid: int = 1001) -> IntersectionBounds:
    """For decreasing ``f`` on [a, b], any solution of f(x) = x lies in [f(b), f(a)]."""
    xs = np.linspace(a, b, grid)
    fs = np.array([f(x) for x in xs])
    if np.any(np.diff(fs) > 1e-12 * max(1.0, float(np.max(np.abs(fs))))):
        raise ValueError("f is not decreasing on the sampled grid")
    lo = min(max(f(b), a), b)
    hi = min(max(f(a), a), b)
    g = lambda x: f(x) - x  # noqa: E731
    root = None
    if g(a) == 0:
        root = a
    elif g(b) == 0:
        root = b
    elif g(a) * g(b) < 0:
        root = brentq(g, a, b, xtol=1e-14)
    return IntersectionBounds(lo, hi, root)


# --------------------------------------------------------------- regimes


@dataclass(frozen=True)
class InvarianceReport:
    N: int
    alpha: float
    global_containment: bool
    global_closed_form: bool
    interval_containment: bool
    interval_closed_form: bool
    relaxed: bool
    relaxed_closed_form: bool
    relaxed_buffer: bool
    envelope_lo_min: float
    envelope_hi_max: float
    threshold_order: bool


def invariance_report(N: int, alpha: float = 0.0) -> InvarianceReport:
    """Evaluate the three forward-invariance conditions at integer ``N``.

    Each condition is checked twice: directly on the envelope functions and
    via its closed-form inequality on ``epsilon(N)``.
    """
    b = bounds(N, alpha)
    ln15 = math.log(1.5)
    # lower envelope is smallest where exp(-4mu^2 + 2mu - 4sigma^2) peaks: mu = 1/4, sigma^2 -> 0
    grid = [envelopes(DistState(m, s), N) for m in np.linspace(*MU_DOMAIN, 31) for s in np.linspace(*SIGMA_SQ_DOMAIN, 11)]
    lo_min = min([envelopes(DistState(0.25, 0.0), N)[0]] + [g[0] for g in grid])
    hi_max = max(g[1] for g in grid)
    buffer_mu = MU_DOMAIN[0] + b.delta_max
    return InvarianceReport(
        N=N,
        alpha=alpha,
        global_containment=lo_min >= -0.25 and hi_max <= 0.5,
        global_closed_form=b.epsilon <= ln15 - 0.25,
        interval_containment=b.phi_min_prime > -0.25 and b.phi_max_prime < 0.25,
        interval_closed_form=b.epsilon < ln15,
        relaxed=envelopes(DistState(-0.25, 0.0), N)[0] > -0.25,
        relaxed_closed_form=b.epsilon < ln15 + 0.75,
        relaxed_buffer=envelopes(DistState(buffer_mu, 0.0), N)[0] >= -0.25,
        envelope_lo_min=lo_min,
        envelope_hi_max=hi_max,
        threshold_order=b.alpha2 < b.alpha1 < b.alpha0,
    )
