"""Geometry of t_p^r: Gurarii and Clarkson moduli, Banach-Saks selection,
and the Garcia-Falset coefficient.

T(r) is an isometry of t_p^r onto ell_p, so every search here runs on
images (transform coordinates).  Heads and tails of a sequence are taken
with respect to the basis b^(k), whose coefficients are exactly the image
coordinates.
"""

from __future__ import annotations

import csv
import dataclasses
import io
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
    zero_report,
)
from .sequences import FiniteSupport, SpaceId
from .taylor_ops import Preimage, apply_inverse, image_of, space_norm

TOL = 1e-9


def _check_theta(theta: float) -> None:
    if not (0.0 <= theta <= 2.0):
        raise PreconditionError(f"theta must lie in [0, 2], got {theta!r}")


def _check_p(p: float, allow_one: bool = True) -> None:
    if not (p >= 1.0) or math.isinf(p) or (not allow_one and p == 1.0):
        raise PreconditionError(f"p must be a finite real >= 1, got {p!r}")


def _pnorm_rows(v: np.ndarray, p: float) -> np.ndarray:
    """Row-wise ell_p norms of a 2-D array, scaled against overflow."""
    a = np.abs(v)
    m = a.max(axis=-1)
    safe = np.where(m > 0, m, 1.0)
    return np.where(m > 0, safe * np.sum((a / safe[..., None]) ** p, axis=-1) ** (1.0 / p), 0.0)


def _image_vector(x, params: TaylorParams, budget: TruncationBudget) -> tuple[np.ndarray, float | None]:
    """Image of x as a dense vector plus an ell_inf-ish error allowance."""
    tab, errs, cert = image_of(x, params, budget)
    vec = np.array([float(v) for v in tab.values])
    if not cert:
        return vec, None
    err = max(errs, default=0.0)
    if tab.tail_bound not in (None, 0.0):
        err = max(err, tab.tail_sup)
    return vec, float(err)


def _pad_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = max(len(a), len(b), 1)
    return np.pad(a, (0, n - len(a))), np.pad(b, (0, n - len(b)))


# --------------------------------------------------------------------------
# Gurarii modulus


def gurarii_bound(theta: float, p: float) -> float:
    """1 - [1 - (theta/2)^p]^(1/p)."""
    _check_theta(theta)
    _check_p(p)
    return 1.0 - max(0.0, 1.0 - (theta / 2.0) ** p) ** (1.0 / p)


@dataclass(frozen=True)
class GurariiQuery:
    theta: float
    p: float
    params: TaylorParams
    alpha_tol: float = 1e-12

    def __post_init__(self) -> None:
        _check_theta(self.theta)
        _check_p(self.p)
        object.__setattr__(self, "params", as_params(self.params))
        if not (0.0 < self.alpha_tol < 0.5):
            raise PreconditionError("alpha_tol must lie in (0, 1/2)")

    @property
    def space(self) -> SpaceId:
        return sq.taylor_p(self.p, self.params.r)


def gurarii_construct(query: GurariiQuery) -> tuple[FiniteSupport, FiniteSupport]:
    """The pair T^{-1}(u, theta/2) and T^{-1}(u, -theta/2), u = [1 - (theta/2)^p]^(1/p)."""
    half = query.theta / 2.0
    u = max(0.0, 1.0 - half ** query.p) ** (1.0 / query.p)
    x = apply_inverse(query.params, FiniteSupport([u, half])).as_floats()
    y = apply_inverse(query.params, FiniteSupport([u, -half])).as_floats()
    return FiniteSupport(x), FiniteSupport(y)


def _ternary(g, lo: float, hi: float, tol: float) -> float:
    while hi - lo > tol:
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if g(m1) <= g(m2):
            hi = m2
        else:
            lo = m1
    return 0.5 * (lo + hi)


def _inf_alpha_vectors(a: np.ndarray, b: np.ndarray, p: float, tol: float) -> tuple[float, float]:
    a, b = _pad_pair(a, b)
    g = lambda t: float(_pnorm_rows((t * a + (1.0 - t) * b)[None, :], p)[0])
    t = _ternary(g, 0.0, 1.0, tol)
    cands = [(g(t), t), (g(0.0), 0.0), (g(1.0), 1.0)]
    val, t = min(cands)
    return t, val


def _even_p_inf(a: np.ndarray, b: np.ndarray, p: float) -> float | None:
    """Exact minimum of sum (b + t(a - b))^p over [0, 1] for even integer p."""
    if p != int(p) or int(p) % 2:
        return None
    a, b = _pad_pair(a, b)
    P = np.polynomial.Polynomial
    poly = sum((P([bk, ak - bk]) ** int(p) for ak, bk in zip(a, b)), P([0.0]))
    crit = [t.real for t in poly.deriv().roots() if abs(t.imag) < 1e-9 and 0.0 <= t.real <= 1.0]
    val = min(poly(t) for t in crit + [0.0, 1.0])
    return float(max(val, 0.0) ** (1.0 / p))


def gurarii_inf_alpha(x, y, space: SpaceId, alpha_tol: float = 1e-12,
                      budget: TruncationBudget = DEFAULT_BUDGET) -> tuple[float, float]:
    """(alpha*, inf over alpha in [0,1] of ||alpha x + (1-alpha) y||) by ternary search."""
    if not space.is_taylor or math.isinf(space.exponent):
        raise PreconditionError("the Gurarii search needs a t_p^r space with finite p")
    params = as_params(space.r)
    a, _ = _image_vector(x, params, budget)
    b, _ = _image_vector(y, params, budget)
    return _inf_alpha_vectors(a, b, space.exponent, alpha_tol)


@dataclass(frozen=True)
class ModulusReport:
    theta: float
    p: float
    r: float
    norm_x: float
    norm_y: float
    dist: float
    alpha_star: float
    inf_value: float
    beta_value: float
    analytic_bound: float
    closed_form_inf: float | None = None
    delta_estimate: float | None = None
    beta_search: float | None = None

    @property
    def construction_ok(self) -> bool:
        return (abs(self.norm_x - 1.0) <= TOL and abs(self.norm_y - 1.0) <= TOL
                and abs(self.dist - self.theta) <= TOL)

    @property
    def convexity_flag(self) -> bool:
        """Raised when the measured modulus is positive."""
        return self.beta_value > TOL

    @property
    def uniform_criterion(self) -> bool:
        """The sufficient condition 0 < beta(theta) < 1 for uniform convexity."""
        return TOL < self.beta_value < 1.0 - TOL

    def to_dict(self) -> dict:
        return {
            "theta": self.theta, "p": self.p, "r": self.r,
            "norm_x": self.norm_x, "norm_y": self.norm_y, "dist": self.dist,
            "alpha_star": self.alpha_star, "inf_value": self.inf_value,
            "beta_value": self.beta_value, "analytic_bound": self.analytic_bound,
            "closed_form_inf": self.closed_form_inf,
            "delta_estimate": self.delta_estimate, "beta_search": self.beta_search,
            "delta_is_upper_bound": self.delta_estimate is not None,
            "construction_ok": self.construction_ok,
            "convexity_flag": self.convexity_flag,
            "uniform_criterion": self.uniform_criterion,
        }


def gurarii_report(query: GurariiQuery, with_delta: bool = False, dim: int = 4,
                   samples: int = 2000, seed: int = 0,
                   budget: TruncationBudget = DEFAULT_BUDGET) -> ModulusReport:
    """Construct the pair, certify it, and measure 1 - inf_alpha ||alpha x + (1-alpha) y||."""
    x, y = gurarii_construct(query)
    sp = query.space
    nx = space_norm(x, sp, budget).value
    ny = space_norm(y, sp, budget).value
    dist = space_norm(sq.add(x, sq.scale(y, -1.0)), sp, budget).value
    a, _ = _image_vector(x, query.params, budget)
    b, _ = _image_vector(y, query.params, budget)
    alpha, inf_val = _inf_alpha_vectors(a, b, query.p, query.alpha_tol)
    delta = beta_s = None
    if with_delta:
        c = clarkson_search(query.p, query.theta, dim=dim, samples=samples,
                            params=query.params, seed=seed)
        delta, beta_s = c.delta_estimate, c.beta_search
    return ModulusReport(query.theta, query.p, query.params.r, nx, ny, dist, alpha, inf_val,
                         1.0 - inf_val, gurarii_bound(query.theta, query.p),
                         _even_p_inf(a, b, query.p), delta, beta_s)


def parse_grid(spec: str) -> list[float]:
    """'a:b:step' -> [a, a+step, ..., b] (inclusive, rounded to the step)."""
    try:
        a, b, h = (float(t) for t in spec.split(":"))
    except ValueError:
        raise PreconditionError(f"grid must look like a:b:step, got {spec!r}") from None
    if not h > 0 or b < a:
        raise PreconditionError("grid needs step > 0 and b >= a")
    n = int(math.floor((b - a) / h + 1e-9))
    digits = max(0, -int(math.floor(math.log10(h))) + 2)
    return [round(a + i * h, digits) for i in range(n + 1)]


def gurarii_grid(params, p: float, thetas, **kw) -> list[ModulusReport]:
    params = as_params(params)
    return [gurarii_report(GurariiQuery(t, p, params), **kw) for t in thetas]


def modulus_csv(reports, with_delta: bool = False) -> str:
    """CSV with header theta,beta,bound (plus delta when requested)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["theta", "beta", "bound"] + (["delta"] if with_delta else [])
    w.writerow(head)
    for m in reports:
        row = [repr(m.theta), repr(m.beta_value), repr(m.analytic_bound)]
        if with_delta:
            row.append(repr(m.delta_estimate))
        w.writerow(row)
    return buf.getvalue()


# --------------------------------------------------------------------------
# Clarkson modulus


@dataclass(frozen=True)
class ClarksonResult:
    """Upper-bound estimates of delta(theta), and of beta over the same pairs."""

    p: float
    theta: float
    delta_estimate: float
    beta_search: float
    best_source: str
    best_pair: tuple
    searched_pairs: int
    upper_bound: bool = True

    def to_dict(self) -> dict:
        return {
            "p": self.p, "theta": self.theta, "delta_estimate": self.delta_estimate,
            "beta_search": self.beta_search, "best_source": self.best_source,
            "best_pair": [list(v) for v in self.best_pair],
            "searched_pairs": self.searched_pairs, "upper_bound": self.upper_bound,
        }


def _beta_rows(X: np.ndarray, Y: np.ndarray, p: float, iters: int = 80) -> np.ndarray:
    """1 - min_alpha ||alpha x + (1-alpha) y|| row-wise (vectorized ternary search)."""
    lo = np.zeros(len(X))
    hi = np.ones(len(X))
    g = lambda t: _pnorm_rows(t[:, None] * X + (1.0 - t[:, None]) * Y, p)
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        left = g(m1) <= g(m2)
        hi = np.where(left, m2, hi)
        lo = np.where(left, lo, m1)
    t = 0.5 * (lo + hi)
    best = np.minimum(g(t), np.minimum(g(np.zeros_like(t)), g(np.ones_like(t))))
    return 1.0 - best


def _solve_along(X: np.ndarray, V: np.ndarray, theta: float, p: float,
                 iters: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """For each row find t with ||x - normalize(x + t v)|| = theta; returns (Y, ok)."""
    def yof(t):
        Z = X + t[:, None] * V
        return Z / _pnorm_rows(Z, p)[:, None]

    big = 1e8
    hi = np.full(len(X), big)
    ok = _pnorm_rows(X - yof(hi), p) >= theta
    lo = np.zeros(len(X))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        up = _pnorm_rows(X - yof(mid), p) < theta
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    return yof(hi), ok


def _unit_rows(Z: np.ndarray, p: float) -> np.ndarray:
    return Z / _pnorm_rows(Z, p)[:, None]


def _two_coordinate_pairs(p: float, theta: float, n_phi: int = 241, n_psi: int = 720):
    """All admissible pairs on a grid of the 2-D unit sphere, roots refined by bisection."""
    phis = np.linspace(0.0, math.pi / 4.0, n_phi)
    psis = np.linspace(0.0, 2.0 * math.pi, n_psi + 1)
    X = _unit_rows(np.stack([np.cos(phis), np.sin(phis)], axis=1), p)
    Ygrid = _unit_rows(np.stack([np.cos(psis), np.sin(psis)], axis=1), p)
    D = _pnorm_rows(X[:, None, :] - Ygrid[None, :, :], p) - theta
    i, j = np.nonzero(np.sign(D[:, :-1]) * np.sign(D[:, 1:]) <= 0)
    if len(i) == 0:
        return np.zeros((0, 2)), np.zeros((0, 2))
    lo, hi = psis[j].copy(), psis[j + 1].copy()
    Xi = X[i]
    flo = D[i, j]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        Ym = _unit_rows(np.stack([np.cos(mid), np.sin(mid)], axis=1), p)
        fm = _pnorm_rows(Xi - Ym, p) - theta
        same = np.sign(fm) == np.sign(flo)
        lo = np.where(same, mid, lo)
        flo = np.where(same, fm, flo)
        hi = np.where(same, hi, mid)
    psi = 0.5 * (lo + hi)
    Y = _unit_rows(np.stack([np.cos(psi), np.sin(psi)], axis=1), p)
    return Xi, Y


def clarkson_search(p: float, theta: float, dim: int = 4, samples: int = 2000,
                    params: TaylorParams | float | None = None, seed: int = 0) -> ClarksonResult:
    """Search admissible pairs (unit norms, distance theta) in transform coordinates.

    The searched set is the symmetric pair (u, +-theta/2), a refined grid of
    the 2-coordinate unit sphere, and random pairs in dimension ``dim``
    (half of them perturbations of the best 2-coordinate pair).  Both
    returned values are infima over the same finite set of pairs, hence
    upper bounds for the true moduli.
    """
    _check_theta(theta)
    _check_p(p)
    if params is not None:
        as_params(params)
    if dim < 2:
        raise PreconditionError("dim must be >= 2")
    half = theta / 2.0
    u = max(0.0, 1.0 - half ** p) ** (1.0 / p)
    Xs = [np.array([[u, half]])]
    Ys = [np.array([[u, -half]])]
    tags = ["symmetric"]
    if theta > 0.0:
        X2, Y2 = _two_coordinate_pairs(p, theta)
        if len(X2):
            Xs.append(X2)
            Ys.append(Y2)
            tags.append("two-coordinate")
    X = np.vstack(Xs)
    Y = np.vstack(Ys)
    src = np.concatenate([np.full(len(a), k) for k, a in enumerate(Xs)])

    if theta > 0.0 and samples > 0:
        rng = np.random.default_rng(seed)
        d = (1.0 - _pnorm_rows(X + Y, p) / 2.0)
        b = int(np.argmin(d))
        x0 = np.zeros(dim); x0[:2] = X[b]
        y0 = np.zeros(dim); y0[:2] = Y[b]
        n_pert = samples // 2
        scale = rng.uniform(1e-4, 0.2, size=(n_pert, 1))
        Xp = _unit_rows(x0 + scale * rng.standard_normal((n_pert, dim)), p)
        Vp = (y0 - x0) + scale * rng.standard_normal((n_pert, dim))
        Xr = _unit_rows(rng.standard_normal((samples - n_pert, dim)), p)
        Vr = rng.standard_normal((samples - n_pert, dim))
        XX = np.vstack([Xp, Xr])
        VV = np.vstack([Vp, Vr])
        YY, ok = _solve_along(XX, VV, theta, p)
        keep = ok & (np.abs(_pnorm_rows(XX - YY, p) - theta) <= 1e-12)
        if keep.any():
            pad = lambda A: np.hstack([A, np.zeros((len(A), dim - A.shape[1]))])
            X = np.vstack([pad(X), XX[keep]])
            Y = np.vstack([pad(Y), YY[keep]])
            src = np.concatenate([src, np.full(int(keep.sum()), len(tags))])
            tags.append("random")

    delta = 1.0 - _pnorm_rows(X + Y, p) / 2.0
    beta = _beta_rows(X, Y, p)
    i = int(np.argmin(delta))
    return ClarksonResult(p, theta, float(max(delta[i], 0.0)), float(max(beta.min(), 0.0)),
                          tags[int(src[i])], (tuple(X[i].tolist()), tuple(Y[i].tolist())), len(X))


def clarkson_estimate(p: float, theta: float, dim: int = 4, samples: int = 2000,
                      params: TaylorParams | float | None = None, seed: int = 0) -> float:
    """Upper-bound estimate of the Clarkson modulus delta(theta) of t_p^r."""
    return clarkson_search(p, theta, dim, samples, params, seed).delta_estimate


# --------------------------------------------------------------------------
# Banach-Saks type p


def default_eps(n: int) -> tuple[float, ...]:
    """eps_j = 2^-(j+2) for j = 1..n; the whole series sums to 1/4."""
    return tuple(2.0 ** -(j + 3) for j in range(n))


def orthogonal_image_family(params, n: int) -> list[Preimage]:
    """x_k = T^{-1}(e^(k)) for k < n, unit vectors of every t_p^r."""
    params = as_params(params)
    return [Preimage(sq.unit(k), params) for k in range(n)]


@dataclass(frozen=True)
class BanachSaksConfig:
    eps: tuple
    family: tuple
    p: float
    params: TaylorParams
    budget: TruncationBudget = DEFAULT_BUDGET

    def __post_init__(self) -> None:
        _check_p(self.p)
        object.__setattr__(self, "params", as_params(self.params))
        object.__setattr__(self, "eps", tuple(float(e) for e in self.eps))
        object.__setattr__(self, "family", tuple(self.family))
        if any(not (e > 0.0) for e in self.eps):
            raise PreconditionError("every eps_j must be positive")
        if math.fsum(self.eps) > 0.5:
            raise PreconditionError("the eps schedule must sum to at most 1/2")
        sp = sq.taylor_p(self.p, self.params.r)
        for i, x in enumerate(self.family):
            nrm = space_norm(x, sp, self.budget).value
            if nrm > 1.0 + TOL:
                raise PreconditionError(f"family member {i} has norm {nrm} > 1")


@dataclass(frozen=True)
class BanachSaksSelection:
    indices: tuple
    splits: tuple
    partial_sum_norms: tuple
    bound_margin: tuple
    stages: int
    stalled: bool
    notes: str = ""

    def to_dict(self) -> dict:
        return {"indices": list(self.indices), "splits": list(self.splits),
                "partial_sum_norms": list(self.partial_sum_norms),
                "bound_margin": list(self.bound_margin), "stages": self.stages,
                "stalled": self.stalled, "notes": self.notes}


def _images(config: BanachSaksConfig) -> list[tuple[np.ndarray, float]]:
    """Image vectors plus the p-norm mass beyond the table."""
    out = []
    for x in config.family:
        tab, errs, cert = image_of(x, config.params, config.budget)
        vec = np.array([float(v) for v in tab.values])
        tail = sq.p_norm(tab, config.p).error_bound
        out.append((vec, math.inf if (tail is None or not cert) else tail))
    return out


def _seg_norm(v: np.ndarray, p: float, lo: int, hi: int | None = None) -> float:
    seg = v[lo:hi] if hi is not None else v[lo:]
    if seg.size == 0:
        return 0.0
    return float(_pnorm_rows(seg[None, :], p)[0])


def banach_saks_select(config: BanachSaksConfig) -> BanachSaksSelection:
    """Greedy choice of indices n_j and split points t_j.

    t_j is the smallest cutoff past t_{j-1} whose tail of s_j = x_{n_j} has
    norm < eps_j; n_{j+1} is the first unused index whose head up to t_j has
    norm < eps_j.  Selection stops at the end of the family or of the eps
    schedule, or when no index qualifies (a stall).
    """
    imgs = _images(config)
    p = config.p
    if not imgs:
        return BanachSaksSelection((), (), (), (), 0, False, "empty family")
    idx, splits = [0], []
    stalled = False
    notes = ""
    j = 0
    while True:
        if j >= len(config.eps):
            notes = "eps schedule exhausted"
            break
        vec, tail = imgs[idx[-1]]
        eps = config.eps[j]
        t = splits[-1] + 1 if splits else 0
        while t < len(vec) and _seg_norm(vec, p, t + 1) + tail >= eps:
            t += 1
        if _seg_norm(vec, p, t + 1) + tail >= eps:
            stalled = True
            notes = f"tail of s_{j} never drops below eps_{j} within the table"
            break
        splits.append(t)
        nxt = None
        for n in range(idx[-1] + 1, len(imgs)):
            if _seg_norm(imgs[n][0], p, 0, t + 1) < eps:
                nxt = n
                break
        if nxt is None:
            if idx[-1] + 1 < len(imgs):
                stalled = True
                notes = f"no family member has head up to t_{j} below eps_{j}"
            else:
                notes = "family exhausted"
            break
        idx.append(nxt)
        j += 1
    # make the splits cover every chosen s_j
    while len(splits) < len(idx):
        splits.append((splits[-1] + 1) if splits else 0)
    sums, margins = [], []
    acc = np.zeros(max(len(v) for v, _ in imgs))
    extra = 0.0
    for n, k in enumerate(idx):
        v, tail = imgs[k]
        acc[: len(v)] += v
        extra += tail
        nrm = _seg_norm(acc, p, 0) + (0.0 if math.isinf(extra) else extra)
        sums.append(nrm if not math.isinf(extra) else math.inf)
        margins.append(2.0 * (n + 1) ** (1.0 / p) - sums[-1])
    return BanachSaksSelection(tuple(idx), tuple(splits), tuple(sums), tuple(margins),
                               len(idx), stalled, notes)


def banach_saks_check(selection: BanachSaksSelection, config: BanachSaksConfig) -> CheckReport:
    """||sum_{j<=n} s_j|| <= 2 (n+1)^(1/p) for every prefix; the ladder holds the margins."""
    if not selection.bound_margin:
        return CheckReport(Verdict.HOLDS_UP_TO_BUDGET, 0.0, ((0, 0.0),), notes="empty selection")
    ladder = tuple(enumerate(selection.bound_margin))
    for n, m in ladder:
        if not (m >= 0.0):
            return CheckReport(Verdict.FAILS_AT, ladder[-1][1], ladder, fail_index=n, fail_value=m,
                               notes="prefix bound 2 (n+1)^(1/p) exceeded")
    return CheckReport(Verdict.HOLDS_UP_TO_BUDGET, ladder[-1][1], ladder,
                       notes="margins 2 (n+1)^(1/p) - ||sum s_j||, all nonnegative")


def weak_null_check(family, params, coords: int = 8,
                    budget: TruncationBudget = DEFAULT_BUDGET) -> CheckReport:
    """Coordinatewise convergence to 0 in basis coordinates along the family.

    The ladder records max_{k < coords} |(T x_n)_k| at n = 1, 2, 4, ...
    """
    params = as_params(params)
    fam = list(family)
    if not fam:
        raise PreconditionError("empty family")
    vals = []
    for x in fam:
        v, _ = _image_vector(x, params, budget)
        vals.append(float(np.max(np.abs(v[:coords]), initial=0.0)))
    ladder, n = [], 1
    while n <= len(fam):
        ladder.append((n - 1, max(vals[n - 1:])))
        n *= 2
    note = "basis coordinates"
    if params.r >= 0.5:
        note += "; original coordinates are not bounded along T^{-1}(e^(n)) when r >= 1/2"
    return zero_report(ladder, budget, note)


# --------------------------------------------------------------------------
# Garcia-Falset coefficient


@dataclass(frozen=True)
class GfcReport:
    per_x: tuple
    R_estimate: float
    analytic: float
    p: float
    r: float
    n_max: int
    certified: bool = True
    notes: str = ""

    def to_dict(self) -> dict:
        return {"per_x": list(self.per_x), "R_estimate": self.R_estimate,
                "analytic": self.analytic, "p": self.p, "r": self.r, "n_max": self.n_max,
                "certified": self.certified, "R_below_2": self.R_estimate < 2.0,
                "notes": self.notes}


def default_probes(params) -> list:
    """Unit finite-support probes: x_0 = b^(0) and two spread combinations."""
    params = as_params(params)
    out = [Preimage(sq.unit(0), params)]
    for c in ([1.0, 1.0], [3.0, -1.0, 2.0]):
        out.append(Preimage(FiniteSupport(c), params))
    return out


def garcia_falset_estimate(params, p: float, n_max: int = 512, probes=None,
                           budget: TruncationBudget = DEFAULT_BUDGET,
                           normalize: bool = True) -> GfcReport:
    """max over probes of liminf_n ||x_n + x|| with x_n = T^{-1}(e^(n)).

    For each probe the liminf is estimated as the minimum of the norms over
    n in [n_max/2, n_max].  Default probes are scaled to unit norm; explicit
    probes must lie in the unit ball.
    """
    params = as_params(params)
    _check_p(p)
    if n_max < 2:
        raise PreconditionError("n_max must be >= 2")
    if probes is None:
        probes = default_probes(params)
    else:
        normalize = False
    b = dataclasses.replace(budget, max_row=max(budget.max_row, n_max))
    ests, certified = [], True
    for x in probes:
        tab, errs, cert = image_of(x, params, b)
        z = np.array([float(v) for v in tab.values])
        S_base = sq.p_norm(tab, p)
        norm = S_base.value
        if normalize and norm > 0:
            z = z / norm
            norm = 1.0
        if norm > 1.0 + TOL:
            raise PreconditionError(f"probe outside the unit ball (norm {norm})")
        if not cert or S_base.error_bound is None or len(z) <= n_max:
            if tab.tail_bound not in (0.0,):
                certified = False
        z = np.pad(z, (0, max(0, n_max + 1 - len(z))))
        S = norm ** p
        n = np.arange(n_max // 2, n_max + 1)
        zn = z[n]
        vals = np.maximum(S - np.abs(zn) ** p, 0.0) + np.abs(1.0 + zn) ** p
        ests.append(float(np.min(vals) ** (1.0 / p)))
    R = max(ests) if ests else 1.0
    return GfcReport(tuple(ests), R, 2.0 ** (1.0 / p), p, params.r, n_max, certified,
                     "liminf estimated as min over n in [n_max/2, n_max]")
