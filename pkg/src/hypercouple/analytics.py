"""Closed-form quantities: edge-process loss probabilities, mixing-time
bounds and the colouring threshold constants.

Functions taking a fugacity ``lam`` work exactly when it is an ``int`` or
:class:`fractions.Fraction` and return a ``Fraction``; a ``float`` gives a
float result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Union

import numpy as np
from scipy import integrate, optimize, special

Number = Union[int, float, Fraction]

# integrand of the success integral is bounded by exp(-z); exp(-40) < 1e-17
_INF_PROXY = 40.0


class PreconditionError(ValueError):
    """An input lies outside the range where a bound is valid."""


class QuadratureError(ArithmeticError):
    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error {achieved:.3g})")
        self.achieved = achieved


class SeriesConvergenceError(ArithmeticError):
    pass


def _exact(x) -> bool:
    return isinstance(x, Rational) and not isinstance(x, bool)


def _num(lam: Number):
    return Fraction(lam) if _exact(lam) else float(lam)


# -- edge process -------------------------------------------------------------


@dataclass(frozen=True)
class EdgeProcessTable:
    """Loss probabilities p_1..p_{m-1} of the single-edge game."""

    m: int
    lam: Number
    p: tuple

    def __getitem__(self, k: int):
        if not 1 <= k <= self.m - 1:
            raise IndexError(f"k must be in 1..{self.m - 1}")
        return self.p[k - 1]

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "lambda": str(self.lam),
            "p": [str(x) if isinstance(x, Fraction) else x for x in self.p],
        }


def _check_edge_args(m: int, lam: Number):
    if m < 2:
        raise ValueError(f"edge size must be at least 2, got {m}")
    if not lam > 0:
        raise ValueError(f"fugacity must be positive, got {lam}")


def _thomas(sub, diag, sup, rhs):
    """Tridiagonal solve without pivoting; fine for diagonally dominant systems."""
    n = len(diag)
    c = [None] * n
    d = [None] * n
    c[0] = sup[0] / diag[0] if n > 1 else 0
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - sub[i] * c[i - 1]
        if denom == 0:
            raise ZeroDivisionError("singular tridiagonal system")
        c[i] = sup[i] / denom if i < n - 1 else 0
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom
    x = [None] * n
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def edge_process_solve(m: int, lam: Number) -> EdgeProcessTable:
    """Solve the (m-1)-dimensional tridiagonal recurrence for p_1..p_{m-1}.

    Row k balances the game from k units: insertion of a unit with rate k*lam
    (towards p_{k-1}, with p_0 = 1), deletion with rate m-k-1 (towards
    p_{k+1}), and the coupling move at rate 1+lam.
    """
    _check_edge_args(m, lam)
    x = _num(lam)
    size = m - 1
    sub, diag, sup, rhs = [], [], [], []
    for k in range(1, m):
        sub.append(-k * x if k > 1 else 0 * x)
        diag.append((m - k) + (k + 1) * x)
        sup.append(-(m - k - 1) + 0 * x)
        rhs.append(x if k == 1 else 0 * x)
    if size == 0:
        return EdgeProcessTable(m, lam, ())
    p = _thomas(sub, diag, sup, rhs)
    return EdgeProcessTable(m, lam, tuple(p))


def edge_process_closed(m: int, lam: Number, k: int):
    """Closed-form loss probability from ``k`` units.

    p_k = sum_{i=k+1}^{m} C(m,i) lam^(m+k-i) / (((1+lam)^m - lam^m) C(m-1,k)).
    The denominator is expanded as sum_{i<m} C(m,i) lam^i so that float
    evaluation (in the log domain) involves no cancellation.
    """
    _check_edge_args(m, lam)
    if not 1 <= k <= m - 1:
        raise ValueError(f"k must be in 1..{m - 1}, got {k}")
    if _exact(lam):
        x = Fraction(lam)
        num = sum(math.comb(m, i) * x ** (m + k - i) for i in range(k + 1, m + 1))
        den = ((1 + x) ** m - x**m) * math.comb(m - 1, k)
        return num / den
    return float(_closed_float(m, float(lam), np.array([k]))[0])


def _log_comb(n, k):
    return special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)


def _closed_float(m: int, lam: float, ks: np.ndarray) -> np.ndarray:
    """Log-domain evaluation of the closed form for the indices ``ks``."""
    lx = math.log(lam)
    i = np.arange(m + 1)
    log_den = special.logsumexp(_log_comb(m, i[:m]) + i[:m] * lx)
    out = np.empty(len(ks))
    for j, k in enumerate(ks):
        ii = i[k + 1 :]
        log_num = special.logsumexp(_log_comb(m, ii) + (m + k - ii) * lx)
        out[j] = math.exp(log_num - log_den - _log_comb(m - 1, k))
    if not np.isfinite(out).all():
        raise OverflowError(f"loss probabilities not representable for m={m}, lam={lam}")
    return out


def edge_process_table(m: int, lam: Number) -> EdgeProcessTable:
    """All p_k from the closed form."""
    _check_edge_args(m, lam)
    if _exact(lam):
        return EdgeProcessTable(m, lam, tuple(edge_process_closed(m, lam, k) for k in range(1, m)))
    vals = _closed_float(m, float(lam), np.arange(1, m))
    return EdgeProcessTable(m, lam, tuple(float(v) for v in vals))


def last_unit_probability(m: int, lam: Number):
    """p_{m-1} = lam^(m-1) / ((1+lam)^m - lam^m), evaluated directly."""
    x = _num(lam)
    return x ** (m - 1) / ((1 + x) ** m - x**m)


# -- independent-set bounds ---------------------------------------------------


@dataclass(frozen=True)
class AlphaBound:
    m: int
    lam: Number
    max_degree: int
    value: Number

    @property
    def rapid(self) -> bool:
        """True when the expected distance at the stopping time is below 1."""
        return self.value < 1


def indset_alpha_bound(m: int, lam: Number, max_degree: int) -> AlphaBound:
    """Upper bound 2*Delta*p_1 on the expected distance at the stopping time."""
    p1 = edge_process_closed(m, lam, 1)
    return AlphaBound(m, lam, max_degree, 2 * max_degree * p1)


def threshold_alpha(lam: Number, max_degree: int):
    """1 - (2 lam D + 1) lam^(2 lam D) / ((1+lam)^(2 lam D + 1) - lam^(2 lam D + 1)).

    This is 2*D*p_1 at the threshold edge size m = 2 lam D + 1.
    """
    x = _num(lam)
    s = 2 * x * max_degree
    if isinstance(s, Fraction) and s.denominator == 1:
        s = int(s)
    return 1 - (s + 1) * x**s / ((1 + x) ** (s + 1) - x ** (s + 1))


def _growth_factor(lam: float, max_degree: int) -> float:
    """((1+lam)^(s+1) - lam^(s+1)) / ((s+1) lam^s) with s = 2 lam D."""
    s = 2 * lam * max_degree
    return ((1 + lam) ** (s + 1) - lam ** (s + 1)) / ((s + 1) * lam**s)


@dataclass(frozen=True)
class BoundReport:
    variant: str
    inputs: dict
    tau: float
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"variant": self.variant, **self.inputs, "tau": self.tau, "notes": list(self.notes)}


def stopping_time_bound(p: float, alpha: float, d1: float, d2: float, eps: float) -> float:
    """(1/p) (3/(1-alpha)) ln(e*d2) ln(2*d1/(eps*(1-alpha)))."""
    if not 0 < p <= 1:
        raise PreconditionError(f"need 0 < p <= 1, got {p}")
    if not 0 <= alpha < 1:
        raise PreconditionError(f"need 0 <= alpha < 1, got {alpha}")
    if d1 < 1 or d2 < 1:
        raise PreconditionError("distances D1, D2 must be at least 1")
    if not 0 < eps < 1:
        raise PreconditionError(f"need 0 < eps < 1, got {eps}")
    g = 1.0 / (1.0 - alpha)
    return (1.0 / p) * 3.0 * g * math.log(math.e * d2) * math.log(2.0 * d1 * g / eps)


def stopping_time_report(p, alpha, d1, d2, eps) -> BoundReport:
    tau = stopping_time_bound(p, alpha, d1, d2, eps)
    return BoundReport("stopping", {"p": p, "alpha": alpha, "d1": d1, "d2": d2, "eps": eps}, tau)


def gambler_horizon(p: float, alpha: float, d1: float, d2: float, eps: float) -> int:
    """Integer horizon at which the game's expected active count is below eps/d1."""
    return math.ceil(stopping_time_bound(p, alpha, d1, d2, eps))


INDSET_VARIANTS = ("growth", "linear", "linear-simple", "margin")


def indset_mixing_bound(
    n: int,
    lam: float,
    max_degree: int,
    eps: float,
    variant: str = "growth",
    m: int | None = None,
) -> BoundReport:
    """Mixing-time bound for independent-set Glauber dynamics.

    ``growth``: 6 n R ln(n R / eps), R the growth factor at m = 2 lam D + 1.
    ``linear``: 6 (2 lam D + 1) n ln(n (2 lam D + 1) / eps), needs m >= 2 lam D + 2.
    ``linear-simple``: 12 (2 lam D + 1) n ln(n / eps), same precondition.
    ``margin``: c n ln(n/eps), with c derived from 2 D p_1 at the given m;
    needs m given, 2 D p_1 < 1 and n/eps >= e.
    """
    if variant not in INDSET_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {INDSET_VARIANTS}")
    if n < 1 or not 0 < eps < 1:
        raise PreconditionError("need n >= 1 and 0 < eps < 1")
    lam_f = float(lam)
    s = 2 * lam_f * max_degree
    inputs = {"n": n, "lambda": lam_f, "delta": max_degree, "eps": eps, "m": m}
    notes = []

    if variant == "growth":
        if m is not None and m < s + 1:
            notes.append(f"m={m} below 2*lambda*Delta+1={s + 1:g}; bound not guaranteed")
        R = _growth_factor(lam_f, max_degree)
        tau = 6 * n * R * math.log(n * R / eps)
    elif variant in ("linear", "linear-simple"):
        if m is None or m < s + 2:
            raise PreconditionError(f"{variant} needs m >= 2*lambda*Delta+2 = {s + 2:g}")
        if variant == "linear":
            tau = 6 * (s + 1) * n * math.log(n * (s + 1) / eps)
        else:
            tau = 12 * (s + 1) * n * math.log(n / eps)
    else:
        if m is None:
            raise PreconditionError("margin variant needs the edge size m")
        alpha = float(indset_alpha_bound(m, lam, max_degree).value)
        if alpha >= 1:
            raise PreconditionError(f"2*Delta*p_1 = {alpha:.6g} >= 1 at m={m}")
        if n / eps < math.e:
            raise PreconditionError("margin variant needs n/eps >= e")
        c = delta_constant(alpha)
        inputs["c_delta"] = c
        tau = c * n * math.log(n / eps)
    return BoundReport(variant, inputs, tau, notes)


def delta_constant(alpha: float) -> float:
    """Constant c with  stopping-time bound(p=1/n, alpha, D1=n, D2=2) <= c n ln(n/eps)
    whenever n/eps >= e."""
    g = 1.0 / (1.0 - alpha)
    return 3.0 * g * math.log(2 * math.e) * (1.0 + math.log(2.0 * g))


def colouring_path_bound(n: int, q: int, max_degree: int, m: int, eps: float) -> BoundReport:
    """n q ln(n/eps), valid for edge size m >= 4 and q > max degree."""
    if m < 4:
        raise PreconditionError(f"m={m} < 4: one-step path coupling does not apply; use the m=3 threshold machinery")
    if q <= max_degree:
        raise PreconditionError(f"need q > Delta, got q={q}, Delta={max_degree}")
    if n < 1 or not 0 < eps < 1:
        raise PreconditionError("need n >= 1 and 0 < eps < 1")
    tau = n * q * math.log(n / eps)
    return BoundReport("colouring", {"n": n, "q": q, "delta": max_degree, "m": m, "eps": eps}, tau)


# -- colouring threshold (m = 3) -------------------------------------------------


def phi(d: float, t: float, q: float, max_degree: float, M: float) -> float:
    """1 - d (1 - exp(-(q-D+d) t / (M q))) / (q - D + d)."""
    kappa = q - max_degree + d
    return 1.0 - d * (-math.expm1(-kappa * t / (M * q))) / kappa


@dataclass(frozen=True)
class QuadResult:
    value: float
    abserr: float


def _success_integrand(z: float, a: float, b: float) -> float:
    return math.exp(-z + a * math.expm1(-b * z))


def success_integral(a: float, b: float, upper: float = math.inf, tol: float = 1e-10) -> QuadResult:
    """Integral of exp(-z - a (1 - exp(-b z))) over [0, upper].

    An infinite upper limit is truncated at z = 40, where the integrand is
    below exp(-40); the truncation is included in ``abserr``.
    """
    if a < 0 or b <= 0 or upper <= 0:
        raise ValueError("need a >= 0, b > 0, upper > 0")
    tail = 0.0
    if upper > _INF_PROXY:
        tail = math.exp(-_INF_PROXY)
        upper = _INF_PROXY
    val, err = integrate.quad(
        _success_integrand, 0.0, upper, args=(a, b), epsabs=tol / 10, epsrel=0.0, limit=200
    )
    err += tail
    if err > tol:
        raise QuadratureError(f"tolerance {tol:g} not reached", err)
    return QuadResult(val, err)


@dataclass(frozen=True)
class SeriesResult:
    value: float
    terms: int


def series_value(beta: float, n_terms: int = 10_000, tol: float = 1e-14) -> SeriesResult:
    """Partial sum of sum_i (-2)^i (1-beta)^i / prod_{j<=i} (1 + j beta).

    Summation stops at the first term (past the largest one) of magnitude
    below ``tol``.
    """
    if not 0 < beta <= 1:
        raise ValueError(f"need 0 < beta <= 1, got {beta}")
    term = 1.0
    parts = [term]
    peak = 1.0
    for i in range(1, n_terms):
        term *= -2.0 * (1.0 - beta) / (1.0 + i * beta)
        parts.append(term)
        peak = max(peak, abs(term))
        if abs(term) < tol and abs(term) < peak:
            return SeriesResult(math.fsum(parts), i + 1)
    raise SeriesConvergenceError(f"series did not converge in {n_terms} terms at beta={beta}")


def threshold_integral(beta: float) -> float:
    """Integral over [0, inf) with a = 2(1-beta)/beta and b = beta."""
    return success_integral(2.0 * (1.0 - beta) / beta, beta).value


@dataclass(frozen=True)
class ThresholdReport:
    beta: float
    q_factor: float
    method: str
    residual: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def beta_star(method: str = "integral", lo: float = 0.2, hi: float = 0.6, xtol: float = 1e-12) -> ThresholdReport:
    """Root of (value - 1/2) in beta by bisection; ``q_factor`` is 1/(1-beta)."""
    if method == "integral":
        f = lambda b: threshold_integral(b) - 0.5  # noqa: E731
    elif method == "series":
        f = lambda b: series_value(b).value - 0.5  # noqa: E731
    else:
        raise ValueError(f"method must be 'integral' or 'series', got {method!r}")
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise ValueError(f"no sign change on [{lo}, {hi}]: f={flo:.3g}, {fhi:.3g}")
    root = optimize.bisect(f, lo, hi, xtol=xtol, maxiter=200)
    return ThresholdReport(root, 1.0 / (1.0 - root), method, f(root))


def success_to_alpha(success: float) -> float:
    """Expected distance at the stopping time when it ends at 0 or 2."""
    return 2.0 * (1.0 - success)


def threshold_constants(ratio: float = 1.65, upper: float = 20.0) -> dict:
    """Success-probability integral at q = ratio * Delta, M = 2 Delta.

    Reports both the rounded constants (3.077, 0.3941) and the exact
    values 2/(ratio-1), (ratio-1)/ratio, with the implied expected distance.
    """
    exact_a = 2.0 / (ratio - 1.0)
    exact_b = (ratio - 1.0) / ratio
    rows = {}
    for label, a, b in (("literal", 3.077, 0.3941), ("exact", exact_a, exact_b)):
        res = success_integral(a, b, upper)
        rows[label] = {
            "a": a,
            "b": b,
            "upper": upper,
            "integral": res.value,
            "abserr": res.abserr,
            "alpha": success_to_alpha(res.value),
        }
    return rows
