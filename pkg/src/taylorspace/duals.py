"""Membership checks for the alpha-, beta- and gamma-duals of t_p^r, t_1^r and t_inf^r.

All three reduce to conditions on two matrices built from a candidate a:

* C(r): c[n, k] = inv[n, k] * a_n  (a row-scaled copy of T(r)^{-1}),
* D(r): the lower triangle whose row n is the prefix (d_0, ..., d_n) of the
  single sequence d_k = sum_{j<=k} inv[j, k] a_j.

Each condition quantifies over infinitely many indices, so it is evaluated
on the cutoff ladder of a `TruncationBudget` and returned as a
`CheckReport`.  Conditions over finite index subsets are sups over 2^N
choices; they are enumerated exactly for small supports and otherwise
bounded from below by a monotone ascent (see `subset_sup`).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import sequences as sq
from .numerics_core import (
    DEFAULT_BUDGET,
    CheckReport,
    PreconditionError,
    TaylorParams,
    TruncationBudget,
    Verdict,
    as_params,
    conjunction,
    inverse_taylor_entry,
    inverse_taylor_row,
    sup_report,
    zero_report,
)
from .sequences import SequenceSpec, SpaceId


@dataclass(frozen=True)
class SubsetBudget:
    """Limits for sups over finite index subsets.

    Supports of at most ``exact_limit`` indices are enumerated exhaustively
    (2**exact_limit subsets); larger ones use up to ``heuristic_iters``
    ascent steps from each of ``starts`` starting points.
    """

    exact_limit: int = 16
    heuristic_iters: int = 200
    starts: int = 6
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0 <= self.exact_limit <= 20):
            raise PreconditionError("exact_limit must lie in [0, 20]")
        if self.heuristic_iters < 1 or self.starts < 1:
            raise PreconditionError("heuristic_iters and starts must be >= 1")


DEFAULT_SUBSETS = SubsetBudget()


@dataclass(frozen=True)
class DualQuery:
    a: SequenceSpec
    params: TaylorParams
    space: SpaceId
    kind: str = "beta"
    subset_budget: SubsetBudget = DEFAULT_SUBSETS
    budget: TruncationBudget = DEFAULT_BUDGET

    def __post_init__(self) -> None:
        if self.kind not in ("alpha", "beta", "gamma"):
            raise PreconditionError(f"kind must be alpha, beta or gamma, got {self.kind!r}")
        if not self.space.is_taylor:
            raise PreconditionError("dual queries need a Taylor space (tp or tinf)")
        if self.space.r is not None and float(self.space.r) != as_params(self.params).r:
            raise PreconditionError("space order r and query params disagree")


@dataclass(frozen=True)
class DualReport:
    """Per-component reports plus the conjunction over the governing ones."""

    components: dict
    governing: tuple
    verdict: Verdict
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "governing": list(self.governing),
            "components": {k: v.to_dict() for k, v in self.components.items()},
            "notes": self.notes,
        }


# --------------------------------------------------------------------------
# finite-subset sups


def _objective(kind: str, q: float):
    if kind == "power":
        def f(S):
            return np.sum(np.abs(S) ** q, axis=-1)

        def grad(S):
            return q * np.abs(S) ** (q - 1.0) * np.sign(S)
        return f, grad
    if kind == "signed":
        def f(S):
            return np.maximum(np.sum(np.clip(S, 0, None), axis=-1),
                              np.sum(np.clip(-S, 0, None), axis=-1))

        def grad(S):
            pos = np.sum(np.clip(S, 0, None))
            neg = np.sum(np.clip(-S, 0, None))
            return (S > 0).astype(float) if pos >= neg else -(S < 0).astype(float)
        return f, grad
    raise ValueError(kind)


def subset_sup(M: np.ndarray, objective: str = "power", q: float = 1.0,
               subset_budget: SubsetBudget = DEFAULT_SUBSETS) -> tuple[float, bool]:
    """max over column subsets K of f(sum_{k in K} M[:, k]).

    ``objective="power"`` is f(S) = sum_n |S_n|^q; ``"signed"`` is
    max(sum S^+, sum S^-), i.e. sup over row subsets of |sum_n S_n|.
    Returns (value, exact).  Both objectives are convex in S, so choosing
    K' = {k : g . M[:, k] > 0} for a subgradient g at the current S never
    decreases f; the ascent alternates this step with single flips.
    """
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0, True
    keep = np.any(M != 0.0, axis=0)
    M = M[:, keep]
    rows_keep = np.any(M != 0.0, axis=1)
    M = M[rows_keep]
    n_cols = M.shape[1]
    if n_cols == 0:
        return 0.0, True
    f, grad = _objective(objective, q)
    if not np.all(np.isfinite(M)):
        return math.inf, True
    if n_cols <= subset_budget.exact_limit:
        best = 0.0
        # enumerate in blocks to bound memory
        bits = np.array(list(itertools.product((0.0, 1.0), repeat=min(n_cols, 12))))
        rest = n_cols - bits.shape[1]
        for tail in itertools.product((0.0, 1.0), repeat=rest):
            sel = np.hstack([bits, np.tile(tail, (len(bits), 1))]) if rest else bits
            S = sel @ M.T
            best = max(best, float(np.max(f(S))))
        return best, True
    rng = np.random.default_rng(subset_budget.seed)
    starts = [np.ones(M.shape[0]), np.sign(M.sum(axis=1))]
    order = np.argsort(-np.abs(M).sum(axis=1))
    for i in order[:2]:
        e = np.zeros(M.shape[0])
        e[i] = 1.0
        starts.extend([e, -e])
    while len(starts) < subset_budget.starts:
        starts.append(rng.choice([-1.0, 1.0], size=M.shape[0]))
    best = 0.0
    for g in starts[: max(subset_budget.starts, 2)]:
        sel = (g @ M) > 0
        val = float(f(M[:, sel].sum(axis=1)))
        for _ in range(subset_budget.heuristic_iters):
            S = M[:, sel].sum(axis=1)
            g = grad(S)
            new = (g @ M) > 0
            if np.array_equal(new, sel):
                # polish with the best single flip
                flipped = S[:, None] + M * np.where(sel, -1.0, 1.0)[None, :]
                vals = f(flipped.T)
                j = int(np.argmax(vals))
                if vals[j] <= val * (1 + 1e-15):
                    break
                sel = sel.copy()
                sel[j] = not sel[j]
                val = float(vals[j])
                continue
            new_val = float(f(M[:, new].sum(axis=1)))
            if new_val <= val:
                break
            sel, val = new, new_val
        best = max(best, val)
    return best, False


# --------------------------------------------------------------------------
# matrices C(r) and D(r)


def _a_values(a: SequenceSpec, cutoff: int) -> np.ndarray:
    return np.asarray([float(sq.evaluate(a, k)) for k in range(cutoff + 1)])


def alpha_matrix_entry(query_or_a, params_or_n, n=None, k=None) -> float:
    """c[n, k] = C(k, n) (-r)^(k-n) (1-r)^-(k+1) a_n for k >= n, else 0.

    Called either as (query, n, k) or as (a, params, n, k).
    """
    if isinstance(query_or_a, DualQuery):
        a, params, n, k = query_or_a.a, query_or_a.params, params_or_n, n
    else:
        a, params = query_or_a, params_or_n
    an = float(sq.evaluate(a, n))
    if an == 0.0 or k < n:
        return 0.0
    return inverse_taylor_entry(params, n, k) * an


def dual_sequence(a: SequenceSpec, params: TaylorParams | float, cutoff: int) -> np.ndarray:
    """d_k = sum_{j <= k} inv[j, k] a_j for k = 0..cutoff."""
    params = as_params(params)
    av = _a_values(a, cutoff)
    d = np.zeros(cutoff + 1)
    with np.errstate(over="ignore", invalid="ignore"):
        for j in np.flatnonzero(av):
            d[j:] += av[j] * inverse_taylor_row(params, int(j), cutoff)
    return d


def beta_triangle_entry(a: SequenceSpec, params: TaylorParams | float, n: int, k: int) -> float:
    """d[n, k] of D(r): the prefix entry d_k for k <= n, 0 above the diagonal."""
    if n < 0 or k < 0:
        raise PreconditionError("indices must be >= 0")
    if k > n:
        return 0.0
    params = as_params(params)
    return math.fsum(inverse_taylor_entry(params, j, k) * float(sq.evaluate(a, j))
                     for j in range(k + 1))


def triangle_remainder(a: SequenceSpec, params: TaylorParams | float, y: SequenceSpec, n: int) -> float:
    """R_n in  sum_{k<=n} a_k x_k = sum_{k<=n} d_k y_k + R_n  for x = T^{-1} y.

    R_n = sum_{j>n} y_j sum_{k<=n} a_k inv[k, j]; it vanishes once n reaches
    the end of a finite support of y.
    """
    params = as_params(params)
    ylen = len(y.coeffs) if isinstance(y, sq.FiniteSupport) else len(y.values)
    total = []
    for j in range(n + 1, ylen):
        yj = float(sq.evaluate(y, j))
        if yj == 0.0:
            continue
        inner = math.fsum(float(sq.evaluate(a, k)) * inverse_taylor_entry(params, k, j)
                          for k in range(n + 1))
        total.append(yj * inner)
    return math.fsum(total)


# --------------------------------------------------------------------------
# checks


def _q_of(space: SpaceId) -> float:
    return space.q


def _rows_for(budget: TruncationBudget, K: int) -> int:
    return min(K, budget.max_row)


def _alpha_inf(query: DualQuery) -> CheckReport:
    b = query.budget
    params = as_params(query.params)
    av = _a_values(query.a, b.max_col)
    ladder = []
    with np.errstate(over="ignore", invalid="ignore"):
        for K in b.ladder:
            best = 0.0
            for n in range(_rows_for(b, K) + 1):
                if av[n] == 0.0:
                    continue
                s = float(np.sum(np.abs(inverse_taylor_row(params, n, K)))) * abs(av[n])
                best = max(best, s) if math.isfinite(s) else math.inf
            ladder.append((K, best))
    return sup_report(ladder, b, "alpha_inf: sup_n sum_k |c_nk|")


def _c_block(query: DualQuery, K: int) -> np.ndarray:
    params = as_params(query.params)
    b = query.budget
    R = _rows_for(b, K)
    av = _a_values(query.a, R)
    C = np.zeros((R + 1, K + 1))
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(R + 1):
            if av[n] != 0.0:
                C[n, n:] = inverse_taylor_row(params, n, K) * av[n]
    return C


def _alpha_r(query: DualQuery, q: float, standard: bool) -> CheckReport:
    b = query.budget
    ladder = []
    exact_all = True
    for K in b.ladder:
        C = _c_block(query, K)
        M = C.T if standard else C
        val, exact = subset_sup(M, "power", q, query.subset_budget)
        exact_all &= exact
        ladder.append((K, val))
    what = ("sup_N sum_k |sum_{n in N} c_nk|^q" if standard
            else "sup_{N,K} sum_{n in N} |sum_{k in K} c_nk|^q")
    note = f"alpha_r (q={q:g}): {what}"
    if not exact_all:
        note += "; lower bound from subset search"
    return sup_report(ladder, b, note)


def check_alpha(query: DualQuery, condition: str | None = None) -> CheckReport:
    """Alpha-dual membership.

    ``condition`` selects the set: ``"alpha_inf"`` (sup_n sum_k |c_nk|),
    ``"alpha_r"`` (the finite-subset sum with rows outside, as displayed
    for t_p^r) or ``"alpha_r_standard"`` (the transposed, Stieglitz-Tietz
    form of (ell_p : ell_1)).  By default t_1^r uses alpha_inf and the
    other spaces use alpha_r with their conjugate exponent.
    """
    space = query.space
    if condition is None:
        condition = "alpha_inf" if (space.tag == "tp" and space.p == 1.0) else "alpha_r"
    if condition == "alpha_inf":
        return _alpha_inf(query)
    q = 1.0 if space.tag == "tinf" else _q_of(space)
    if math.isinf(q):
        raise PreconditionError("alpha_r needs a finite conjugate exponent; use alpha_inf for t_1^r")
    if condition == "alpha_r":
        return _alpha_r(query, q, standard=False)
    if condition == "alpha_r_standard":
        return _alpha_r(query, q, standard=True)
    raise PreconditionError(f"unknown alpha condition {condition!r}")


def beta_components(query: DualQuery) -> dict:
    """All five component reports beta_1..beta_5 on the ladder."""
    b = query.budget
    space = query.space
    q = 1.0 if space.tag == "tinf" else _q_of(space)
    d = dual_sequence(query.a, query.params, b.max_col)
    absd = np.abs(d)
    out = {}
    if math.isfinite(q):
        with np.errstate(over="ignore", invalid="ignore"):
            pw = np.cumsum(absd ** q)
        out["beta1"] = sup_report([(K, float(pw[K])) for K in b.ladder], b,
                                  f"beta1: sup_n sum_k |d_nk|^q, q={q:g}")
    # rows of D are prefixes, so d_nk is constant in n once n >= k
    k_cap = min(b.ladder[0], b.max_col)
    cauchy = []
    prev = None
    for K in b.ladder:
        cur = d[: k_cap + 1].copy()
        cur[np.arange(k_cap + 1) > K] = 0.0
        diff = 0.0 if prev is None else float(np.max(np.abs(cur - prev)))
        if not np.all(np.isfinite(cur)):
            diff = math.inf
        cauchy.append((K, diff))
        prev = cur
    out["beta2"] = zero_report(cauchy, b, f"beta2: Cauchy defect of d_nk in n, columns k <= {k_cap}")
    with np.errstate(over="ignore", invalid="ignore"):
        s1 = np.cumsum(absd)
        m = np.maximum.accumulate(absd)
    out["beta3"] = sup_report([(K, float(s1[K])) for K in b.ladder], b,
                              "beta3: lim_n sum_k |d_nk| (ladder of partial sums)")
    out["beta4"] = sup_report([(K, float(m[K])) for K in b.ladder], b, "beta4: sup_{n,k} |d_nk|")
    out["beta5"] = sup_report([(K, float(s1[K])) for K in b.ladder], b, "beta5: sup_n sum_k |d_nk|")
    return out


_BETA_GOVERNING = {"t1": ("beta2", "beta4"), "tp": ("beta1", "beta2"), "tinf": ("beta2", "beta3")}
_GAMMA_GOVERNING = {"t1": "beta4", "tp": "beta1", "tinf": "beta5"}


def _space_key(space: SpaceId) -> str:
    if space.tag == "tinf":
        return "tinf"
    return "t1" if space.p == 1.0 else "tp"


def check_beta(query: DualQuery) -> DualReport:
    """Beta-dual membership: beta2&beta4 (t_1), beta1&beta2 (t_p), beta2&beta3 (t_inf)."""
    comps = beta_components(query)
    gov = _BETA_GOVERNING[_space_key(query.space)]
    return DualReport(comps, gov, conjunction([comps[g] for g in gov]))


def check_gamma(query: DualQuery) -> CheckReport:
    """Gamma-dual membership: beta4 (t_1), beta1 (t_p), beta5 (t_inf)."""
    comps = beta_components(query)
    return comps[_GAMMA_GOVERNING[_space_key(query.space)]]


def run_query(query: DualQuery) -> DualReport:
    """Dispatch on ``query.kind`` and wrap the result as a `DualReport`."""
    if query.kind == "beta":
        return check_beta(query)
    if query.kind == "gamma":
        rep = check_gamma(query)
        name = _GAMMA_GOVERNING[_space_key(query.space)]
        return DualReport({name: rep}, (name,), rep.verdict)
    rep = check_alpha(query)
    return DualReport({"alpha": rep}, ("alpha",), rep.verdict)
