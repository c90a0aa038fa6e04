"""Entry kernels for the Taylor, inverse-Taylor and Euler matrices.

Rows of T(r) are generated with the multiplicative recurrence

    t[n, k+1] = t[n, k] * r * (k + 1) / (k + 1 - n),   t[n, n] = (1 - r)**(n + 1)

so that no factorial is ever formed.  When the seed leaves the normal
floating range the same recurrence is run on logarithms with the sign
tracked separately.  The inverse matrix is T(s) with s = -r / (1 - r).

This module also owns the semi-decision report type (`CheckReport`) and the
ladder classifiers that turn a sequence of truncated statistics into a
verdict.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np
from scipy.special import bdtr

UNIT_ROUNDOFF = 2.0**-53

# Seeds outside this window switch the row kernel to the log domain.
_SEED_LO = 1e-280
_SEED_HI = 1e280


class PreconditionError(ValueError):
    """An argument violates the documented contract of an operation."""


@dataclass(frozen=True)
class TaylorParams:
    """Order r of the Taylor method.

    ``regular=True`` restricts r to [0, 1), where T(r) is a regular
    summability matrix.  ``regular=False`` admits any finite real r != 1,
    which is what the inverse parameter -r/(1-r) needs.
    """

    r: float
    regular: bool = True

    def __post_init__(self) -> None:
        r = self.r
        if not math.isfinite(r):
            raise PreconditionError(f"r must be finite, got {r!r}")
        if r == 1.0:
            raise PreconditionError("r = 1 is excluded: T(1) is not invertible")
        if self.regular and not (0.0 <= r < 1.0):
            raise PreconditionError(f"regular mode needs 0 <= r < 1, got {r!r}")

    @property
    def inverse_r(self) -> float:
        return -self.r / (1.0 - self.r)

    def inverse(self) -> "TaylorParams":
        """Parameters of T(r)^{-1} = T(-r/(1-r))."""
        return TaylorParams(self.inverse_r, regular=False)


def as_params(params: TaylorParams | float) -> TaylorParams:
    if isinstance(params, TaylorParams):
        return params
    r = float(params)
    return TaylorParams(r, regular=0.0 <= r < 1.0)


@dataclass(frozen=True)
class TruncationBudget:
    """Cutoffs and tolerances for every semi-infinite computation.

    ``dps`` forces a working precision (decimal digits, via mpmath) for
    finite-support transforms; ``None`` means float64, escalated
    automatically by the operations that estimate their own conditioning
    when ``auto_precision`` is set.
    """

    max_row: int = 128
    max_col: int = 512
    ladder: tuple[int, ...] = (32, 64, 128, 256, 512)
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    stabilization_window: int = 3
    dps: int | None = None
    auto_precision: bool = True

    def __post_init__(self) -> None:
        ladder = tuple(int(c) for c in self.ladder)
        object.__setattr__(self, "ladder", ladder)
        if not ladder:
            raise PreconditionError("ladder must be nonempty")
        if any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise PreconditionError(f"ladder must be strictly increasing: {ladder}")
        if ladder[0] < 0 or ladder[-1] > self.max_col:
            raise PreconditionError("ladder rungs must lie in [0, max_col]")
        if self.max_row < 0:
            raise PreconditionError("max_row must be >= 0")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise PreconditionError("abs_tol and rel_tol must be positive")
        if self.stabilization_window < 1:
            raise PreconditionError("stabilization_window must be >= 1")
        if self.dps is not None and self.dps < 15:
            raise PreconditionError("dps must be >= 15 when given")

    @classmethod
    def with_cutoff(cls, max_col: int, **kw) -> "TruncationBudget":
        """Budget whose ladder is the powers of two from 32 up to ``max_col``."""
        rungs = [c for c in (2**j for j in range(5, 40)) if c < max_col]
        rungs.append(max_col)
        return cls(max_col=max_col, ladder=tuple(rungs), **kw)

    def tol_for(self, value: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))


DEFAULT_BUDGET = TruncationBudget()


# --------------------------------------------------------------------------
# semi-decision reports


class Verdict(str, enum.Enum):
    HOLDS_UP_TO_BUDGET = "HOLDS_UP_TO_BUDGET"
    FAILS_AT = "FAILS_AT"
    DIVERGENCE_SUSPECTED = "DIVERGENCE_SUSPECTED"


@dataclass(frozen=True)
class CheckReport:
    verdict: Verdict
    statistic: float
    ladder_values: tuple[tuple[int, float], ...]
    growth_exponent: float | None = None
    fail_index: int | None = None
    fail_value: float | None = None
    notes: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "ladder_values", tuple((int(c), float(v)) for c, v in self.ladder_values)
        )
        if not self.ladder_values:
            raise ValueError("ladder_values must be nonempty")
        last = self.ladder_values[-1][1]
        if not (last == self.statistic or (math.isnan(last) and math.isnan(self.statistic))):
            raise ValueError("statistic must equal the last ladder value")
        diverging = self.verdict is Verdict.DIVERGENCE_SUSPECTED
        if diverging != (self.growth_exponent is not None):
            raise ValueError("growth_exponent is present iff verdict is DIVERGENCE_SUSPECTED")
        if (self.verdict is Verdict.FAILS_AT) != (self.fail_index is not None):
            raise ValueError("fail_index is present iff verdict is FAILS_AT")

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS_UP_TO_BUDGET

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict.value,
            "statistic": self.statistic,
            "ladder_values": [list(cv) for cv in self.ladder_values],
            "growth_exponent": self.growth_exponent,
            "notes": self.notes,
        }
        if self.verdict is Verdict.FAILS_AT:
            out["fail_index"] = self.fail_index
            out["fail_value"] = self.fail_value
        return out


def conjunction(reports: Sequence[CheckReport]) -> Verdict:
    """HOLDS only if every member holds; a definite failure outranks suspected divergence."""
    verdicts = {rep.verdict for rep in reports}
    if Verdict.FAILS_AT in verdicts:
        return Verdict.FAILS_AT
    if Verdict.DIVERGENCE_SUSPECTED in verdicts:
        return Verdict.DIVERGENCE_SUSPECTED
    return Verdict.HOLDS_UP_TO_BUDGET


def growth_exponent(ladder: Sequence[tuple[int, float]], window: int) -> float:
    """Log-log slope of |value| against cutoff over the last ``window`` rungs."""
    pts = [(c, abs(v)) for c, v in ladder[-max(window, 2):] if c > 0]
    if any(not math.isfinite(v) for _, v in pts):
        return math.inf
    pts = [(c, v) for c, v in pts if v > 0]
    if len(pts) < 2:
        return 0.0
    xs = np.log([c for c, _ in pts])
    ys = np.log([v for _, v in pts])
    slope = np.polyfit(xs, ys, 1)[0]
    return float(slope)


def _stable(values: Sequence[float], budget: TruncationBudget) -> bool:
    w = min(budget.stabilization_window, len(values))
    tail = values[-w:]
    if any(not math.isfinite(v) for v in tail):
        return False
    if len(values) < 2:
        return True
    tol = budget.tol_for(max(abs(v) for v in tail))
    return max(tail) - min(tail) <= tol


def _first_nonfinite(ladder: Sequence[tuple[int, float]]) -> tuple[int, float] | None:
    for c, v in ladder:
        if not math.isfinite(v):
            return c, v
    return None


def sup_report(
    ladder: Sequence[tuple[int, float]], budget: TruncationBudget, notes: str = ""
) -> CheckReport:
    """Verdict for a ``sup ... < inf`` condition from truncated sups."""
    ladder = list(ladder)
    stat = ladder[-1][1]
    if _first_nonfinite(ladder) is not None:
        return CheckReport(Verdict.DIVERGENCE_SUSPECTED, stat, ladder, math.inf,
                           notes=_join(notes, "non-finite truncated statistic"))
    values = [v for _, v in ladder]
    if _stable(values, budget):
        return CheckReport(Verdict.HOLDS_UP_TO_BUDGET, stat, ladder, notes=notes)
    g = growth_exponent(ladder, budget.stabilization_window)
    return CheckReport(Verdict.DIVERGENCE_SUSPECTED, stat, ladder, g,
                       notes=_join(notes, "not stabilized within budget"))


def limit_report(
    ladder: Sequence[tuple[int, float]], budget: TruncationBudget, notes: str = ""
) -> CheckReport:
    """Verdict for a ``limit exists`` condition.

    Ladder values are Cauchy defects (distance between consecutive truncated
    limit estimates); the limit is accepted when the last window of defects
    is within ``abs_tol`` scaled by the estimate's magnitude, which callers
    fold into the defect they pass.
    """
    return zero_report(ladder, budget, notes)


def zero_report(
    ladder: Sequence[tuple[int, float]], budget: TruncationBudget, notes: str = "",
    scale: float = 1.0,
) -> CheckReport:
    """Verdict for a quantity that must tend to zero.

    HOLDS when the last ``stabilization_window`` values are within
    ``max(abs_tol, rel_tol * scale)``, or when they decrease monotonically
    and the final one is within it; FAILS_AT when they have settled on a
    nonzero value; DIVERGENCE_SUSPECTED otherwise.
    """
    ladder = list(ladder)
    stat = ladder[-1][1]
    bad = _first_nonfinite(ladder)
    if bad is not None:
        return CheckReport(Verdict.FAILS_AT, stat, ladder, fail_index=bad[0],
                           fail_value=bad[1], notes=_join(notes, "non-finite value"))
    tol = max(budget.abs_tol, budget.rel_tol * abs(scale))
    w = min(budget.stabilization_window, len(ladder))
    tail = [abs(v) for _, v in ladder[-w:]]
    decaying = all(b <= a for a, b in zip(tail, tail[1:]))
    if max(tail) <= tol or (decaying and tail[-1] <= tol):
        return CheckReport(Verdict.HOLDS_UP_TO_BUDGET, stat, ladder, notes=notes)
    if len(ladder) >= 2 and _stable([v for _, v in ladder], budget):
        c, v = ladder[-1]
        return CheckReport(Verdict.FAILS_AT, stat, ladder, fail_index=c, fail_value=v,
                           notes=_join(notes, "settled on a nonzero value"))
    g = growth_exponent(ladder, budget.stabilization_window)
    return CheckReport(Verdict.DIVERGENCE_SUSPECTED, stat, ladder, g,
                       notes=_join(notes, "not settled within budget"))


def agreement_report(
    lhs: Sequence[tuple[int, float]], rhs: Sequence[tuple[int, float]],
    budget: TruncationBudget, notes: str = "",
) -> CheckReport:
    """Verdict for ``lim lhs == rhs`` with both sides laddered.

    Agreement tolerance is ``10 * abs_tol`` (relative to the magnitude),
    since each side carries its own truncation error.
    """
    ladder = [(c, abs(a - b)) for (c, a), (_, b) in zip(lhs, rhs)]
    if not ladder:
        raise ValueError("empty ladders")
    stat = ladder[-1][1]
    lv = [v for _, v in lhs]
    rv = [v for _, v in rhs]
    if not (_stable(lv, budget) and _stable(rv, budget)):
        g = growth_exponent(list(lhs), budget.stabilization_window)
        return CheckReport(Verdict.DIVERGENCE_SUSPECTED, stat, ladder, g,
                           notes=_join(notes, "a side did not stabilize"))
    tol = 10 * max(budget.abs_tol, budget.rel_tol * max(abs(lv[-1]), abs(rv[-1])))
    if stat <= tol:
        return CheckReport(Verdict.HOLDS_UP_TO_BUDGET, stat, ladder, notes=notes)
    return CheckReport(Verdict.FAILS_AT, stat, ladder, fail_index=ladder[-1][0],
                       fail_value=stat, notes=_join(notes, "limits disagree"))


def _join(a: str, b: str) -> str:
    return f"{a}; {b}" if a else b


# --------------------------------------------------------------------------
# entries


def signed_pow(base: float, k: int) -> tuple[float, int]:
    """base**k as (mantissa, binary exponent); never over- or underflows."""
    m, e = math.frexp(base)
    acc_m, acc_e = 1.0, 0
    while k:
        if k & 1:
            acc_m, de = math.frexp(acc_m * m)
            acc_e += e + de
        k >>= 1
        if k:
            m, de = math.frexp(m * m)
            e = 2 * e + de
    return acc_m, acc_e


def scaled_cumprod(mant: float, exp2: int, ratios: np.ndarray) -> np.ndarray:
    """[v, v*q_1, v*q_1*q_2, ...] for v = mant * 2**exp2.

    The running product is renormalised every few steps, so intermediate
    values never leave the floating range even when the seed does; only
    the final entries are rounded to float64 (inf/0 when out of range).
    """
    out = np.empty(len(ratios) + 1)
    if mant == 0.0:
        out[:] = 0.0
        return out
    m, de = math.frexp(mant)
    e = exp2 + de
    out[0] = math.ldexp(m, e) if -1074 < e < 1024 else (0.0 if e <= -1074 else math.copysign(math.inf, m))
    if len(ratios) == 0:
        return out
    with np.errstate(divide="ignore"):
        logs = np.cumsum(np.log2(np.abs(ratios)))
    if len(logs) and logs.max() < 1000.0 and logs.min() > -1000.0:
        # single pass: the scaled product stays in range
        with np.errstate(under="ignore", over="ignore"):
            out[1:] = np.ldexp(m * np.cumprod(ratios), e)
        return out
    big = float(np.max(np.abs(ratios)))
    chunk = max(1, min(64, int(600.0 / max(1.0, math.log2(big + 2.0)))))
    with np.errstate(over="ignore", under="ignore"):
        for i in range(0, len(ratios), chunk):
            c = m * np.cumprod(ratios[i:i + chunk])
            out[i + 1:i + 1 + len(c)] = np.ldexp(c, e)
            last = c[-1]
            if last == 0.0:
                out[i + 1 + len(c):] = 0.0
                break
            m, de = math.frexp(float(last))
            e += de
    return out


def taylor_row(params: TaylorParams | float, n: int, cutoff: int) -> np.ndarray:
    """Entries t[n, k] for k = n..cutoff as a float64 array."""
    r = as_params(params).r
    if n < 0 or cutoff < 0:
        raise PreconditionError("indices must be >= 0")
    if cutoff < n:
        return np.zeros(0)
    k = np.arange(n + 1, cutoff + 1, dtype=np.float64)
    ratios = r * k / (k - n)
    try:
        seed = (1.0 - r) ** (n + 1)
    except OverflowError:
        seed = math.inf
    if _SEED_LO <= abs(seed) <= _SEED_HI or r == 0.0:
        out = np.empty(cutoff - n + 1)
        out[0] = seed
        with np.errstate(over="ignore", under="ignore"):
            out[1:] = seed * np.cumprod(ratios)
        if np.all(np.isfinite(out)):
            return out
    m, e = signed_pow(1.0 - r, n + 1)
    return scaled_cumprod(m, e, ratios)


def taylor_entry(params: TaylorParams | float, n: int, k: int) -> float:
    """t[n, k] = C(k, n) (1-r)^(n+1) r^(k-n) for k >= n, else 0."""
    if n < 0 or k < 0:
        raise PreconditionError("indices must be >= 0")
    if k < n:
        return 0.0
    return float(taylor_row(params, n, k)[-1])


def taylor_entry_lgamma(params: TaylorParams | float, n: int, k: int) -> float:
    """Direct evaluation of t[n, k] through log-gamma (independent of the recurrence)."""
    r = as_params(params).r
    if k < n:
        return 0.0
    if r == 0.0:
        return 1.0 if k == n else 0.0
    logv = (math.lgamma(k + 1) - math.lgamma(n + 1) - math.lgamma(k - n + 1)
            + (n + 1) * math.log(abs(1.0 - r)) + (k - n) * math.log(abs(r)))
    sign = 1.0
    if r < 0 and (k - n) % 2:
        sign = -sign
    if (1.0 - r) < 0 and (n + 1) % 2:
        sign = -sign
    return sign * math.exp(logv)


def euler_entry(params: TaylorParams | float, n: int, k: int) -> float:
    """Euler mean entry C(n, k) (1-r)^(n-k) r^k for 0 <= k <= n, else 0.

    Accepts a bare float so that the degenerate order r = 1 (the identity)
    can be evaluated.
    """
    r = params.r if isinstance(params, TaylorParams) else float(params)
    if n < 0 or k < 0:
        raise PreconditionError("indices must be >= 0")
    if k > n:
        return 0.0
    if r == 0.0:
        return 1.0 if k == 0 else 0.0
    if r == 1.0:
        return 1.0 if k == n else 0.0
    try:
        val = float(math.comb(n, k)) * (1.0 - r) ** (n - k) * r**k
        if val != 0.0 and math.isfinite(val) and abs(val) > _SEED_LO:
            return val
    except OverflowError:
        pass
    logv = (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
            + (n - k) * math.log(abs(1.0 - r)) + k * math.log(abs(r)))
    sign = (-1.0 if (r < 0 and k % 2) else 1.0) * (-1.0 if (1.0 - r < 0 and (n - k) % 2) else 1.0)
    return sign * math.exp(logv)


def inverse_taylor_entry(params: TaylorParams | float, n: int, k: int) -> float:
    """Entry of T(r)^{-1}: C(k, n) (-r)^(k-n) (1-r)^-(k+1) for k >= n, else 0.

    Evaluated from the closed form; `taylor_entry` at -r/(1-r) is the
    independent second route.
    """
    r = as_params(params).r
    if n < 0 or k < 0:
        raise PreconditionError("indices must be >= 0")
    if k < n:
        return 0.0
    if r == 0.0:
        return 1.0 if k == n else 0.0
    try:
        val = float(math.comb(k, n)) * (-r) ** (k - n) * (1.0 - r) ** (-(k + 1))
        if val != 0.0 and math.isfinite(val) and _SEED_LO < abs(val) < _SEED_HI:
            return val
    except OverflowError:
        pass
    logv = (math.lgamma(k + 1) - math.lgamma(n + 1) - math.lgamma(k - n + 1)
            + (k - n) * math.log(abs(r)) - (k + 1) * math.log(abs(1.0 - r)))
    sign = -1.0 if (r > 0 and (k - n) % 2) else 1.0
    if (1.0 - r) < 0 and (k + 1) % 2:
        sign = -sign
    try:
        return sign * math.exp(logv)
    except OverflowError:
        return sign * math.inf


def inverse_taylor_row(params: TaylorParams | float, n: int, cutoff: int) -> np.ndarray:
    """Row n of T(r)^{-1}, columns n..cutoff, via the recurrence at -r/(1-r)."""
    return taylor_row(as_params(params).inverse(), n, cutoff)


def row_tail_mass(params: TaylorParams | float, n: int, cutoff: int) -> float:
    """1 - sum_{k=n}^{cutoff} t[n, k]; rows of T(r) sum to one for 0 < r < 1."""
    r = as_params(params).r
    if not (0.0 < r < 1.0):
        raise PreconditionError(f"row_tail_mass needs 0 < r < 1, got {r!r}")
    if cutoff < n:
        raise PreconditionError("cutoff must be >= n")
    partial = math.fsum(taylor_row(r, n, cutoff).tolist())
    return min(1.0, max(0.0, 1.0 - partial))


def binomial_series_tail(n: int, cutoff: int | np.ndarray, z: float) -> np.ndarray | float:
    """Normalised tail  (1-z)^(n+1) * sum_{k>cutoff} C(k, n) z^(k-n)  for 0 <= z < 1.

    Equals P[Binomial(cutoff+1, 1-z) <= n]; evaluated through the regularised
    incomplete beta function so tiny tails keep their relative accuracy.
    """
    if not (0.0 <= z < 1.0):
        raise PreconditionError(f"binomial_series_tail needs 0 <= z < 1, got {z!r}")
    cut = np.asarray(cutoff)
    if z == 0.0:
        out = np.where(cut >= n, 0.0, 1.0)
    else:
        out = bdtr(np.full_like(cut, n), cut + 1, 1.0 - z)
        out = np.where(cut < n, 1.0, out)
    return float(out) if np.ndim(out) == 0 else out


def log_envelope_tail(
    n: int, cutoff: int, sigma: float, log_m0: float, rho: float
) -> float:
    """log of a bound on  sum_{k>cutoff} |t_sigma[n, k]| * M0 * rho^k.

    ``t_sigma`` is the Taylor matrix of (possibly non-regular) order sigma
    and the input obeys the envelope |x_k| <= M0 rho^k beyond ``cutoff``.
    Returns +inf when the weighted row is not summable (|sigma| rho >= 1).
    """
    if rho == 0.0 or log_m0 == -math.inf:
        return -math.inf
    z = abs(sigma) * rho
    if z >= 1.0:
        return math.inf
    tail = binomial_series_tail(n, cutoff, z)
    if tail <= 0.0:
        return -math.inf
    return (log_m0 + (n + 1) * math.log(abs(1.0 - sigma)) + n * math.log(rho)
            - (n + 1) * math.log1p(-z) + math.log(tail))


# --------------------------------------------------------------------------
# extended precision


def taylor_row_mp(r, n: int, cutoff: int) -> list:
    """Row n of T(r) at the current mpmath precision (r may be an mpf)."""
    r = mpmath.mpf(r)
    if cutoff < n:
        return []
    t = (1 - r) ** (n + 1)
    out = [t]
    for k in range(n + 1, cutoff + 1):
        t = t * r * k / (k - n)
        out.append(t)
    return out


def inverse_r_mp(r):
    r = mpmath.mpf(r)
    return -r / (1 - r)


def rounding_factor(n: int, cutoff: int, length: int) -> np.ndarray:
    """Per-term multiplier of unit roundoff in the row-sum error bound.

    Covers the seed power, the k-n recurrence steps and the summation.
    """
    k = np.arange(n, cutoff + 1, dtype=np.float64)
    return 4.0 * (k - n) + 2.0 * n + 10.0 + length


@dataclass
class _RowCache:
    """Small memo for repeated row requests with the same parameter."""

    sigma: float
    rows: dict = field(default_factory=dict)

    def row(self, n: int, cutoff: int) -> np.ndarray:
        hit = self.rows.get(n)
        if hit is None or len(hit) < cutoff - n + 1:
            hit = taylor_row(TaylorParams(self.sigma, regular=False), n, cutoff)
            self.rows[n] = hit
        return hit[: cutoff - n + 1]
