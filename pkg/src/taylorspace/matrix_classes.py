"""Matrix classes (X : Y) between classical spaces and the Taylor spaces.

A matrix map out of t_p^r (or t_inf^r) is reduced to one out of ell_p by
E = A T(r)^{-1}, applied row by row (`row_inverse_transform`), together
with beta-dual membership of every row.  A map into t_p^r is reduced to
one into ell_p by B = T(r) A (`column_taylor_transform`).  The reduced
classical pair is then looked up in a fixed routing table whose cells
name bundles of Stieglitz-Tietz conditions; each condition is a
semi-decision evaluated on the budget's cutoff ladder.

Truncation convention: at ladder rung K a condition sees rows
0..min(K, max_row) and columns 0..K.  Conditions involving lim_n use
single far rows instead: n = K on the first columns for lim_n a_nk, and
n = K // 2 at width 4 * max_col for lim_n sum_k |a_nk|.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np

from . import duals
from . import sequences as sq
from .duals import DEFAULT_SUBSETS, DualQuery, SubsetBudget, subset_sup
from .numerics_core import (
    DEFAULT_BUDGET,
    CheckReport,
    PreconditionError,
    TaylorParams,
    TruncationBudget,
    Verdict,
    agreement_report,
    as_params,
    conjunction,
    euler_entry,
    inverse_taylor_row,
    row_tail_mass,
    sup_report,
    taylor_row,
    taylor_row_mp,
    zero_report,
)
from .sequences import SpaceId


class UnsupportedPairError(PreconditionError):
    """The (from, to) pair has no cell in the routing tables."""


# --------------------------------------------------------------------------
# matrices


@dataclass(frozen=True, eq=False)
class MatrixSpec:
    """An infinite matrix given by a row generator.

    ``row_fn(n, cutoff)`` returns a_nk for k = 0..cutoff.  ``lower``/``upper``
    are band offsets (a_nk = 0 unless n - lower <= k <= n + upper); ``n_rows``
    marks all later rows as zero; ``sup_bound`` is a certified bound on
    |a_nk| used for tail estimates.  ``row_mp`` optionally gives the same
    row as mpmath numbers at the working precision.
    """

    kind: str
    row_fn: Callable[[int, int], np.ndarray]
    lower: int | None = None
    upper: int | None = None
    n_rows: int | None = None
    sup_bound: float | None = None
    certified: bool = True
    info: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict, repr=False)
    row_mp: Callable[[int, int], list] | None = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def row(self, n: int, cutoff: int) -> np.ndarray:
        if n < 0 or cutoff < 0:
            raise PreconditionError("indices must be >= 0")
        if self.n_rows is not None and n >= self.n_rows:
            return np.zeros(cutoff + 1)
        hit = self._cache.get(n)
        if hit is None or len(hit) < cutoff + 1:
            hit = np.asarray(self.row_fn(n, cutoff), dtype=float)
            if len(hit) != cutoff + 1:
                raise ValueError("row generator returned the wrong length")
            self._cache[n] = hit
        return hit[: cutoff + 1]

    def entry(self, n: int, k: int) -> float:
        return float(self.row(n, k)[k])

    def block(self, rows: int, cols: int) -> np.ndarray:
        """Entries a_nk for n < rows, k < cols."""
        out = np.zeros((rows, cols))
        for n in range(rows):
            if self.n_rows is not None and n >= self.n_rows:
                break
            out[n] = self.row(n, cols - 1)
        return out

    def row_support_end(self, n: int) -> int | None:
        """Last possibly nonzero column of row n, or None if unbounded."""
        if self.n_rows is not None and n >= self.n_rows:
            return -1
        if self.upper is None:
            return None
        return n + self.upper

    def to_json_obj(self) -> dict:
        return dict(self.info)


def _pad(vals, cutoff: int, start: int = 0) -> np.ndarray:
    out = np.zeros(cutoff + 1)
    m = min(len(vals), cutoff + 1 - start)
    if m > 0:
        out[start:start + m] = vals[:m]
    return out


def taylor_matrix(r: float) -> MatrixSpec:
    p = as_params(r)

    def row_mp(n, c):
        return [mpmath.mpf(0)] * n + taylor_row_mp(p.r, n, c) if c >= n else [mpmath.mpf(0)] * (c + 1)
    return MatrixSpec("taylor", lambda n, c: _pad(taylor_row(p, n, c), c, n) if c >= n else np.zeros(c + 1),
                      lower=0, sup_bound=1.0, info={"kind": "taylor", "r": p.r}, row_mp=row_mp)


def taylor_inverse_matrix(r: float) -> MatrixSpec:
    p = as_params(r)
    return MatrixSpec("taylor_inverse",
                      lambda n, c: _pad(inverse_taylor_row(p, n, c), c, n) if c >= n else np.zeros(c + 1),
                      lower=0, info={"kind": "taylor_inverse", "r": p.r})


def euler_matrix(r: float) -> MatrixSpec:
    r = float(r)

    def rowf(n, c):
        return _pad(np.array([euler_entry(r, n, k) for k in range(n + 1)]), c)
    return MatrixSpec("euler", rowf, upper=0, sup_bound=1.0 if 0 <= r <= 1 else None,
                      info={"kind": "euler", "r": r})


def identity_matrix() -> MatrixSpec:
    def rowf(n, c):
        out = np.zeros(c + 1)
        if n <= c:
            out[n] = 1.0
        return out
    return MatrixSpec("identity", rowf, lower=0, upper=0, sup_bound=1.0, info={"kind": "identity"})


def zero_matrix() -> MatrixSpec:
    return MatrixSpec("zero", lambda n, c: np.zeros(c + 1), lower=0, upper=0, n_rows=0,
                      sup_bound=0.0, info={"kind": "zero"})


def banded_matrix(block, lower: int, upper: int) -> MatrixSpec:
    """Finite block (rows x cols, zero beyond) whose entries respect the band."""
    B = np.asarray(block, dtype=float)
    if B.ndim != 2:
        raise PreconditionError("banded block must be a rectangular 2-d array")
    if lower < 0 or upper < 0:
        raise PreconditionError("band offsets must be >= 0")
    if not np.all(np.isfinite(B)):
        raise PreconditionError("banded block entries must be finite")
    n_idx, k_idx = np.nonzero(B)
    if np.any(k_idx < n_idx - lower) or np.any(k_idx > n_idx + upper):
        raise PreconditionError("banded block has nonzero entries outside the declared band")
    rows, cols = B.shape

    def rowf(n, c):
        if n >= rows:
            return np.zeros(c + 1)
        return _pad(B[n], c)
    return MatrixSpec("banded", rowf, lower=lower, upper=upper, n_rows=rows,
                      sup_bound=float(np.max(np.abs(B))) if B.size else 0.0,
                      info={"kind": "banded", "lower": lower, "upper": upper, "block": B.tolist()})


def alpha_dual_matrix(a: sq.SequenceSpec, r: float) -> MatrixSpec:
    """C(r) of a candidate a: c_nk = inv[n, k] a_n."""
    p = as_params(r)

    def rowf(n, c):
        an = float(sq.evaluate(a, n))
        if an == 0.0 or c < n:
            return np.zeros(c + 1)
        return _pad(inverse_taylor_row(p, n, c) * an, c, n)
    return MatrixSpec("alpha_dual", rowf, lower=0, info={"kind": "alpha_dual", "r": p.r})


def beta_dual_triangle(a: sq.SequenceSpec, r: float) -> MatrixSpec:
    """D(r) of a candidate a: row n is the prefix (d_0, ..., d_n)."""
    p = as_params(r)
    memo: dict = {}

    def rowf(n, c):
        need = max(n, c)
        d = memo.get("d")
        if d is None or len(d) < need + 1:
            d = duals.dual_sequence(a, p, need)
            memo["d"] = d
        out = np.zeros(c + 1)
        m = min(n, c)
        out[: m + 1] = d[: m + 1]
        return out
    return MatrixSpec("beta_dual_triangle", rowf, upper=0, info={"kind": "beta_dual_triangle", "r": p.r})


def user_matrix(entry: Callable[[int, int], float], lower=None, upper=None, n_rows=None,
                sup_bound=None) -> MatrixSpec:
    def rowf(n, c):
        lo = 0 if lower is None else max(0, n - lower)
        hi = c if upper is None else min(c, n + upper)
        out = np.zeros(c + 1)
        for k in range(lo, hi + 1):
            out[k] = entry(n, k)
        return out
    return MatrixSpec("user", rowf, lower=lower, upper=upper, n_rows=n_rows, sup_bound=sup_bound,
                      info={"kind": "user"})


def matrix_from_json_obj(obj) -> MatrixSpec:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise PreconditionError('matrix spec must be a JSON object with a "kind" field')
    kind = obj["kind"]
    try:
        if kind == "taylor":
            return taylor_matrix(float(obj["r"]))
        if kind == "euler":
            return euler_matrix(float(obj["r"]))
        if kind == "identity":
            return identity_matrix()
        if kind == "zero":
            return zero_matrix()
        if kind == "banded":
            return banded_matrix(obj["block"], int(obj["lower"]), int(obj["upper"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, PreconditionError):
            raise
        raise PreconditionError(f"malformed {kind!r} matrix spec: {exc}") from exc
    raise PreconditionError(f"unknown matrix kind {kind!r}")


def matrix_loads(text: str) -> MatrixSpec:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PreconditionError(f"matrix spec is not valid JSON: {exc}") from exc
    return matrix_from_json_obj(obj)


# --------------------------------------------------------------------------
# reductions


def row_inverse_transform(A: MatrixSpec, params: TaylorParams | float, dps: int | None = None) -> MatrixSpec:
    """E = A T(r)^{-1}: e_nk = sum_{j<=k} C(k, j) (-r)^(k-j) (1-r)^-(k+1) a_nj.

    Each row of A is pushed through the inverse prefix transform that also
    defines D(r).  With ``dps`` the sums run in mpmath (the inverse rows
    alternate in sign and cancel heavily for r near 1).
    """
    params = as_params(params)
    diag: dict = {}

    def rowf(n, c):
        a = A.row(n, c)
        nz = np.flatnonzero(a)
        if dps is None:
            out = np.zeros(c + 1)
            mag = np.zeros(c + 1)
            with np.errstate(over="ignore", invalid="ignore"):
                for j in nz:
                    t = a[j] * inverse_taylor_row(params, int(j), c)
                    out[j:] += t
                    mag[j:] += np.abs(t)
                # rounding bound of the accumulated sums against the row's l1 mass,
                # which is what the row-sum conditions consume
                err = mag * (np.finfo(float).eps * (len(nz) + 2 * np.arange(c + 1) + 10))
                cum_err = np.cumsum(err)
                cum_mass = np.cumsum(np.abs(out))
                bad = ~(cum_err <= np.maximum(1e-12, 1e-10 * cum_mass))
            if bad.any():
                k = int(np.flatnonzero(bad)[0])
                prev = diag.get("lossy_from")
                if prev is None or (n, k) < prev:
                    diag["lossy_from"] = (n, k)
            return out
        with mpmath.workdps(dps):
            sig = -mpmath.mpf(params.r) / (1 - mpmath.mpf(params.r))
            acc = [mpmath.mpf(0)] * (c + 1)
            exact = A.row_mp(n, c) if A.row_mp is not None else None
            for j in nz:
                row = taylor_row_mp(sig, int(j), c)
                aj = exact[j] if exact is not None else mpmath.mpf(float(a[j]))
                for i, t in enumerate(row):
                    acc[j + i] += aj * t
            return np.array([float(v) for v in acc])
    return MatrixSpec("row_inverse", rowf, n_rows=A.n_rows, certified=A.certified,
                      info={"kind": "row_inverse", "r": params.r, "of": A.info},
                      diagnostics=diag)


def column_taylor_transform(A: MatrixSpec, params: TaylorParams | float,
                            budget: TruncationBudget = DEFAULT_BUDGET) -> MatrixSpec:
    """B = T(r) A: b_nk = sum_{j>=n} C(j, n) (1-r)^(n+1) r^(j-n) a_jk.

    Finite-row matrices give exact sums.  Otherwise row n is cut where
    row_tail_mass(n, J) * sup|a| drops below abs_tol / 1000 (at most
    max_col); without a sup bound the result is flagged uncertified.
    """
    params = as_params(params)
    r = params.r
    certified = A.certified and (A.n_rows is not None or A.sup_bound is not None)

    def last_row(n: int) -> int:
        if A.n_rows is not None:
            return A.n_rows - 1
        if r == 0.0:
            return n
        if A.sup_bound is None:
            return n + budget.max_col
        if A.sup_bound == 0.0:
            return n
        target = budget.abs_tol * 1e-3 / A.sup_bound
        J = n + 16
        while J < n + budget.max_col and row_tail_mass(params, n, J) > target:
            J *= 2
        return min(J, n + budget.max_col)

    def rowf(n, c):
        J = last_row(n)
        out = np.zeros(c + 1)
        if J < n:
            return out
        t = taylor_row(params, n, J)
        rows = np.vstack([A.row(j, c) for j in range(n, J + 1)])
        return t @ rows
    return MatrixSpec("column_taylor", rowf, n_rows=A.n_rows, certified=certified,
                      sup_bound=A.sup_bound, info={"kind": "column_taylor", "r": r, "of": A.info})


# --------------------------------------------------------------------------
# conditions


@dataclass(frozen=True)
class ConditionId:
    """A named condition with its exponent parameters.

    ``q`` is used by C90, C92 and C14; ``p`` by C17, C20 and C5C;
    ``alpha_zero`` selects the alpha_k = 0 form of C91.
    """

    tag: str
    q: float | None = None
    p: float | None = None
    alpha_zero: bool = False

    def __post_init__(self) -> None:
        if self.tag not in CONDITIONS:
            raise PreconditionError(f"unknown condition {self.tag!r}")
        needs_q = self.tag in ("C90", "C92", "C14")
        needs_p = self.tag in ("C17", "C20", "C5C")
        if needs_q != (self.q is not None):
            raise PreconditionError(f"{self.tag} {'needs' if needs_q else 'takes no'} q")
        if needs_p != (self.p is not None):
            raise PreconditionError(f"{self.tag} {'needs' if needs_p else 'takes no'} p")
        if self.alpha_zero and self.tag != "C91":
            raise PreconditionError("alpha_zero only applies to C91")

    def label(self) -> str:
        extra = []
        if self.q is not None:
            extra.append(f"q={self.q:g}")
        if self.p is not None:
            extra.append(f"p={self.p:g}")
        if self.alpha_zero:
            extra.append("alpha_k=0")
        return self.tag + (f"({', '.join(extra)})" if extra else "")


def _rows(budget: TruncationBudget, K: int) -> int:
    return min(K, budget.max_row) + 1


def _far_row(K: int) -> int:
    return max(1, K // 2)


def _far_width(budget: TruncationBudget) -> int:
    # far rows of upper-band matrices carry mass well past column n
    return 4 * budget.max_col


def _pow_sum(M: np.ndarray, q: float, axis: int) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return np.sum(np.abs(M) ** q, axis=axis)


def _c90(A, budget, sb, cond):
    ladder, exact = [], True
    for K in budget.ladder:
        M = A.block(_rows(budget, K), K + 1)
        v, ex = subset_sup(M.T, "power", cond.q, sb)
        exact &= ex
        ladder.append((K, v))
    return sup_report(ladder, budget, "sup_{N finite} sum_k |sum_{n in N} a_nk|^q"
                      + ("" if exact else "; lower bound from subset search"))


def _c91(A, budget, sb, cond):
    # rows n = K lie beyond every tested column k <= K_0 / 2
    k_cap = max(1, budget.ladder[0] // 2)
    ladder = []
    prev = A.row(max(k_cap + 1, (3 * budget.ladder[0]) // 4), k_cap)
    for K in budget.ladder:
        cur = A.row(K, k_cap)
        if cond.alpha_zero:
            val = float(np.max(np.abs(cur)))
        else:
            val = float(np.max(np.abs(cur - prev)))
        ladder.append((K, val))
        prev = cur
    what = "lim_n a_nk = 0" if cond.alpha_zero else "lim_n a_nk exists (Cauchy defect)"
    return zero_report(ladder, budget, f"{what}, columns k <= {k_cap}, rows n = K")


def _c92(A, budget, sb, cond):
    ladder = []
    for K in budget.ladder:
        M = A.block(_rows(budget, K), K + 1)
        v = _pow_sum(M, cond.q, 1)
        ladder.append((K, float(np.max(v)) if len(v) else 0.0))
    return sup_report(ladder, budget, f"sup_n sum_k |a_nk|^q, q={cond.q:g}")


def _colsums(A, budget, K):
    M = A.block(_rows(budget, K), K + 1)
    return np.cumsum(M, axis=0)


def _c3(A, budget, sb, cond):
    k_cap = min(budget.ladder[0], budget.max_col)
    ladder, prev = [], None
    for K in budget.ladder:
        S = _colsums(A, budget, K)[-1, : k_cap + 1]
        val = 0.0 if prev is None else float(np.max(np.abs(S - prev)))
        if prev is None:
            half = _colsums(A, budget, max(1, K // 2))[-1, : k_cap + 1]
            val = float(np.max(np.abs(S - half[: len(S)]))) if len(half) == len(S) else 0.0
        ladder.append((K, val))
        prev = S
    return zero_report(ladder, budget, f"sum_n a_nk convergent (Cauchy defect), columns k <= {k_cap}")


def _c5(A, budget, sb, cond):
    ladder = [(K, float(np.max(np.abs(_colsums(A, budget, K))))) for K in budget.ladder]
    return sup_report(ladder, budget, "sup_{k,m} |sum_{n<=m} a_nk|")


def _c6(A, budget, sb, cond):
    ladder = [(K, float(np.max(np.abs(A.block(_rows(budget, K), K + 1))))) for K in budget.ladder]
    return sup_report(ladder, budget, "sup_{n,k} |a_nk|")


def _c7(A, budget, sb, cond):
    k_cap = min(budget.ladder[0], budget.max_col)
    ladder = [(K, float(np.max(np.abs(_colsums(A, budget, K)[-1, : k_cap + 1])))) for K in budget.ladder]
    return zero_report(ladder, budget, f"sum_n a_nk = 0, columns k <= {k_cap}")


def _c10(A, budget, sb, cond):
    deep = _colsums(A, budget, budget.ladder[-1])[-1]
    lhs, rhs = [], []
    for K in budget.ladder:
        S = _colsums(A, budget, K)[-1]
        lhs.append((K, float(np.sum(np.abs(S)))))
        rhs.append((K, float(np.sum(np.abs(deep[: K + 1])))))
    return agreement_report(lhs, rhs, budget,
                            "lim_m sum_k |sum_{n<=m} a_nk| = sum_k |sum_n a_nk|")


def _c11(A, budget, sb, cond):
    ladder = [(K, float(np.sum(np.abs(_colsums(A, budget, K)[-1])))) for K in budget.ladder]
    return zero_report(ladder, budget, "lim_m sum_k |sum_{n<=m} a_nk| = 0")


def _c14(A, budget, sb, cond):
    ladder = []
    for K in budget.ladder:
        S = _colsums(A, budget, K)
        ladder.append((K, float(np.max(_pow_sum(S, cond.q, 1)))))
    return sup_report(ladder, budget, f"sup_m sum_k |sum_{{n<=m}} a_nk|^q, q={cond.q:g}")


def _c15(A, budget, sb, cond):
    n_cap = min(max(1, budget.ladder[0] // 4), budget.max_row)
    ladder, lo = [], budget.ladder[0] // 2
    scale = float(np.max(np.abs(A.block(n_cap + 1, budget.ladder[0] + 1)), initial=0.0))
    for K in budget.ladder:
        M = A.block(n_cap + 1, K + 1)[:, lo + 1:]
        ladder.append((K, float(np.max(np.abs(M))) if M.size else 0.0))
        lo = K
    return zero_report(ladder, budget, f"lim_k a_nk = 0 for rows n <= {n_cap} (max over new columns)",
                       scale=scale)


def _diff_block(A, budget, K, forward: bool):
    M = A.block(_rows(budget, K), K + 2)
    if forward:
        return M[:, :-1] - M[:, 1:]
    left = np.hstack([np.zeros((M.shape[0], 1)), M[:, :-2]])
    return M[:, :-1] - left


def _c16(A, budget, sb, cond):
    ladder = [(K, float(np.max(np.sum(np.abs(_diff_block(A, budget, K, True)), axis=1))))
              for K in budget.ladder]
    return sup_report(ladder, budget, "sup_n sum_k |a_nk - a_{n,k+1}|")


def _subset_diff(A, budget, sb, forward, objective, p, what):
    ladder, exact = [], True
    for K in budget.ladder:
        D = _diff_block(A, budget, K, forward)
        v, ex = subset_sup(D, objective, p if p is not None else 1.0, sb)
        exact &= ex
        ladder.append((K, v))
    return sup_report(ladder, budget, what + ("" if exact else "; lower bound from subset search"))


def _c17(A, budget, sb, cond):
    return _subset_diff(A, budget, sb, True, "power", cond.p,
                        f"sup_K sum_n |sum_{{k in K}} (a_nk - a_{{n,k+1}})|^p, p={cond.p:g}")


def _c18(A, budget, sb, cond):
    return _subset_diff(A, budget, sb, True, "signed", None,
                        "sup_{K,N} |sum_{n in N} sum_{k in K} (a_nk - a_{n,k+1})|")


def _c19(A, budget, sb, cond):
    ladder = []
    # rows n <= K/2 only, so column K sits well past any diagonal band
    for K in budget.ladder:
        rows = min(K // 2, budget.max_row) + 1
        M = A.block(rows, K + 1)
        ladder.append((K, float(np.max(np.abs(M[:, -1])))))
    return sup_report(ladder, budget, "sup_n |lim_k a_nk| (limit estimated by column K, rows n <= K/2)")


def _c20(A, budget, sb, cond):
    return _subset_diff(A, budget, sb, False, "power", cond.p,
                        f"sup_K sum_n |sum_{{k in K}} (a_nk - a_{{n,k-1}})|^p, p={cond.p:g}")


def _c21(A, budget, sb, cond):
    return _subset_diff(A, budget, sb, False, "signed", None,
                        "sup_{K,N} |sum_{n in N} sum_{k in K} (a_nk - a_{n,k-1})|")


def _c5a(A, budget, sb, cond):
    lhs, rhs = [], []
    n_last = _far_row(budget.ladder[-1])
    lim = A.row(n_last, _far_width(budget))
    for K in budget.ladder:
        lhs.append((K, float(np.sum(np.abs(A.row(_far_row(K), _far_width(budget)))))))
        rhs.append((K, float(np.sum(np.abs(lim[: max(1, K // 4) + 1])))))
    return agreement_report(lhs, rhs, budget, "lim_n sum_k |a_nk| = sum_k |lim_n a_nk|")


def _c5b(A, budget, sb, cond):
    ladder = [(K, float(np.sum(np.abs(A.row(_far_row(K), _far_width(budget)))))) for K in budget.ladder]
    return zero_report(ladder, budget, "lim_n sum_k |a_nk| = 0 (rows n = K/2)")


def _c5c(A, budget, sb, cond):
    ladder, exact = [], True
    for K in budget.ladder:
        M = A.block(_rows(budget, K), K + 1)
        v, ex = subset_sup(M, "power", cond.p, sb)
        exact &= ex
        ladder.append((K, v))
    return sup_report(ladder, budget, f"sup_K sum_n |sum_{{k in K}} a_nk|^p, p={cond.p:g}"
                      + ("" if exact else "; lower bound from subset search"))


CONDITIONS: dict[str, Callable] = {
    "C90": _c90, "C91": _c91, "C92": _c92, "C3": _c3, "C5": _c5, "C6": _c6, "C7": _c7,
    "C10": _c10, "C11": _c11, "C14": _c14, "C15": _c15, "C16": _c16, "C17": _c17,
    "C18": _c18, "C19": _c19, "C20": _c20, "C21": _c21, "C5A": _c5a, "C5B": _c5b, "C5C": _c5c,
}


def condition_eval(cond: ConditionId, A: MatrixSpec, budget: TruncationBudget = DEFAULT_BUDGET,
                   subset_budget: SubsetBudget = DEFAULT_SUBSETS) -> CheckReport:
    """Evaluate one condition on A as a ladder semi-decision."""
    rep = CONDITIONS[cond.tag](A, budget, subset_budget, cond)
    extra = []
    if not A.certified:
        extra.append("matrix entries uncertified")
    lossy = A.diagnostics.get("lossy_from")
    if lossy is not None:
        extra.append(f"entries uncertified from (n, k) = {lossy}: float cancellation in A T^-1")
    if extra:
        rep = CheckReport(rep.verdict, rep.statistic, rep.ladder_values, rep.growth_exponent,
                          rep.fail_index, rep.fail_value, "; ".join([rep.notes] + extra))
    return rep


# Bundle members: (tag, exponent source, fixed kwargs).  The exponent source
# says which query exponent fills the slot: "q" is the conjugate of the
# source ell_p, "p" the exponent of the target ell_p.
BUNDLES: dict[int, tuple] = {
    1: (("C90", "q", {}),),
    2: (("C91", None, {}), ("C92", "q", {})),
    3: (("C92", "q", {}),),
    4: (("C92", None, {"q": 1.0}),),
    5: (("C91", None, {}), ("C5A", None, {})),
    6: (("C5B", None, {}),),
    7: (("C91", None, {"alpha_zero": True}), ("C92", "q", {})),
    8: (("C6", None, {}),),
    9: (("C91", None, {}), ("C6", None, {})),
    10: (("C91", None, {"alpha_zero": True}), ("C6", None, {})),
    11: (("C5C", "p", {}),),
    12: (("C5C", None, {"p": 1.0}),),
    13: (("C14", "q", {}),),
    14: (("C3", None, {}), ("C14", "q", {})),
    15: (("C7", None, {}), ("C14", "q", {})),
    16: (("C5", None, {}),),
    17: (("C3", None, {}), ("C5", None, {})),
    18: (("C5", None, {}), ("C7", None, {})),
    19: (("C14", None, {"q": 1.0}),),
    20: (("C3", None, {}),),
    21: (("C11", None, {}),),
    22: (("C15", None, {}), ("C16", None, {})),
    23: (("C15", None, {}), ("C17", "p", {})),
    24: (("C15", None, {}), ("C18", None, {})),
    25: (("C16", None, {}), ("C19", None, {})),
    26: (("C20", "p", {}),),
    27: (("C21", None, {}),),
    28: (("C16", None, {}),),
    29: (("C17", "p", {}),),
    30: (("C18", None, {}),),
}


def bundle_conditions(bundle: int, q: float | None = None, p: float | None = None) -> list[ConditionId]:
    if bundle not in BUNDLES:
        raise PreconditionError(f"unknown bundle {bundle!r}; bundles are 1..30")
    out = []
    for tag, slot, kw in BUNDLES[bundle]:
        kw = dict(kw)
        if slot == "q":
            if q is None:
                raise PreconditionError(f"bundle {bundle} needs the conjugate exponent q")
            kw["q"] = q
        elif slot == "p":
            if p is None:
                raise PreconditionError(f"bundle {bundle} needs the target exponent p")
            kw["p"] = p
        out.append(ConditionId(tag, **kw))
    return out


@dataclass(frozen=True)
class BundleResult:
    bundle: int
    conditions: tuple
    reports: tuple
    verdict: Verdict

    def to_dict(self) -> dict:
        return {"bundle": self.bundle, "verdict": self.verdict.value,
                "conditions": [{"condition": c.label(), **r.to_dict()}
                               for c, r in zip(self.conditions, self.reports)]}


def bundle_eval(bundle: int, A: MatrixSpec, budget: TruncationBudget = DEFAULT_BUDGET,
                subset_budget: SubsetBudget = DEFAULT_SUBSETS, q: float | None = None,
                p: float | None = None) -> BundleResult:
    conds = bundle_conditions(bundle, q, p)
    reps = [condition_eval(c, A, budget, subset_budget) for c in conds]
    return BundleResult(bundle, tuple(conds), tuple(reps), conjunction(reps))


# --------------------------------------------------------------------------
# routing


ROUTES: dict[tuple[str, str], int] = {
    ("lp", "l1"): 1, ("lp", "c"): 2, ("lp", "linf"): 3,
    ("linf", "linf"): 4, ("linf", "c"): 5, ("linf", "c0"): 6, ("lp", "c0"): 7,
    ("l1", "linf"): 8, ("l1", "c"): 9, ("l1", "c0"): 10,
    ("c", "linf"): 4, ("c0", "linf"): 4,
    ("linf", "lp"): 11, ("c", "lp"): 11, ("c0", "lp"): 11,
    ("linf", "l1"): 12, ("c", "l1"): 12, ("c0", "l1"): 12,
    ("lp", "bs"): 13, ("lp", "cs"): 14, ("lp", "c0s"): 15,
    ("l1", "bs"): 16, ("l1", "cs"): 17, ("l1", "c0s"): 18,
    ("linf", "bs"): 19, ("linf", "cs"): 20, ("linf", "c0s"): 21,
    ("bs", "linf"): 22, ("bs", "lp"): 23, ("bs", "l1"): 24,
    ("cs", "linf"): 25, ("cs", "lp"): 26, ("cs", "l1"): 27,
    ("c0s", "linf"): 28, ("c0s", "lp"): 29, ("c0s", "l1"): 30,
}


def supported_pairs() -> list[str]:
    return sorted(f"{a}->{b}" for a, b in ROUTES)


def route(source: SpaceId, target: SpaceId) -> tuple[int, tuple[str, str]]:
    """Bundle id for the classical pair the query reduces to."""
    pair = (source.classical_name, target.classical_name)
    if pair not in ROUTES:
        raise UnsupportedPairError(
            f"unsupported pair {source.label()} -> {target.label()} (reduces to {pair[0]}->{pair[1]}); "
            f"supported classical pairs: {', '.join(supported_pairs())}; "
            "either side may be replaced by its Taylor domain (lp->tp, l1->t1, linf->tinf)")
    return ROUTES[pair], pair


@dataclass(frozen=True)
class ClassQuery:
    A: MatrixSpec
    source: SpaceId
    target: SpaceId
    params: TaylorParams | None = None
    budget: TruncationBudget = DEFAULT_BUDGET
    subset_budget: SubsetBudget = DEFAULT_SUBSETS
    beta_rows: int = 16


@dataclass(frozen=True)
class ClassReport:
    bundle: int
    reduced_pair: tuple
    reduced_matrix: str
    bundle_result: BundleResult
    row_beta: tuple
    verdict: Verdict

    @property
    def reports(self) -> list[CheckReport]:
        return list(self.bundle_result.reports) + [r for _, r in self.row_beta]

    @property
    def certified(self) -> bool:
        return not any("uncertified" in r.notes for r in self.reports)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "certified": self.certified,
            "bundle": self.bundle,
            "reduced_pair": list(self.reduced_pair),
            "reduced_matrix": self.reduced_matrix,
            "conditions": self.bundle_result.to_dict()["conditions"],
            "row_beta": [{"row": n, **r.to_dict()} for n, r in self.row_beta],
        }


def _space_r(space: SpaceId, params: TaylorParams | None) -> TaylorParams:
    if space.r is not None:
        return as_params(space.r)
    if params is None:
        raise PreconditionError(f"{space.label()} needs an order r")
    return as_params(params)


def _row_as_sequence(M: MatrixSpec, n: int, width: int) -> sq.SequenceSpec:
    end = M.row_support_end(n)
    if end is not None and end < width:
        return sq.FiniteSupport(M.row(n, max(end, 0)).tolist())
    return sq.Tabulated(M.row(n, width).tolist(), None)


def class_check(query: ClassQuery) -> ClassReport:
    """Decide A in (source : target) through the reductions and the routing table."""
    src, tgt = query.source, query.target
    bundle, pair = route(src, tgt)
    M = query.A
    steps = []
    if tgt.is_taylor:
        M = column_taylor_transform(M, _space_r(tgt, query.params), query.budget)
        steps.append("B = T(r) A")
    row_beta = []
    if src.is_taylor:
        pr = _space_r(src, query.params)
        rows = min(query.budget.max_row, query.beta_rows)
        for n in range(rows + 1):
            a = _row_as_sequence(M, n, query.budget.max_col)
            dq = DualQuery(a, pr, SpaceId(src.tag, src.p, pr.r), "beta",
                           query.subset_budget, query.budget)
            rep = duals.check_beta(dq)
            merged = _merge_beta(rep)
            row_beta.append((n, merged))
        M = row_inverse_transform(M, pr)
        steps.append("E = A T(r)^-1")
    q = src.q if src.classical_name == "lp" else None
    p_tgt = tgt.exponent if tgt.classical_name == "lp" else None
    res = bundle_eval(bundle, M, query.budget, query.subset_budget, q=q, p=p_tgt)
    verdict = conjunction(list(res.reports) + [r for _, r in row_beta])
    return ClassReport(bundle, pair, " then ".join(steps) or "A", res, tuple(row_beta), verdict)


def _merge_beta(rep: duals.DualReport) -> CheckReport:
    """One report per row: the first non-holding governing component, else the last one."""
    gov = [rep.components[g] for g in rep.governing]
    pick = next((g for g in gov if not g.holds), gov[-1])
    names = "&".join(rep.governing)
    return CheckReport(pick.verdict, pick.statistic, pick.ladder_values, pick.growth_exponent,
                       pick.fail_index, pick.fail_value, f"row in beta-dual ({names}): {pick.notes}")
