"""Transforms by T(r), its inverse and the Euler mean; norms and identities on t_p^r.

Every transform returns per-row error bounds.  Two error sources are
tracked: the discarded row tail (bounded through the input's geometric
envelope and the binomial-series tail) and floating-point rounding
(bounded by a running-error estimate on the summed terms).

Finite-support work may run in extended precision.  Inverse rows have
large alternating entries, so the float64 result of T(r)^{-1} T(r) x can
lose most of its digits for r near 1.  `roundtrip_defect` and
`basis_expand` therefore estimate their own amplification and raise the
mpmath working precision until the rounding bound is negligible.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from . import sequences as sq
from .numerics_core import (
    DEFAULT_BUDGET,
    UNIT_ROUNDOFF,
    PreconditionError,
    TaylorParams,
    TruncationBudget,
    as_params,
    binomial_series_tail,
    euler_entry,
    rounding_factor,
    scaled_cumprod,
    signed_pow,
    taylor_entry,
    taylor_row,
    taylor_row_mp,
)
from .sequences import FiniteSupport, Geometric, NormResult, SequenceSpec, SpaceId, Tabulated


@dataclass(frozen=True)
class Preimage:
    """The sequence T(r)^{-1}(image), held in transform coordinates.

    Preimages of far-out unit vectors have entries of size
    (1+r)^k / (1-r)^(k+1) that cancel almost completely under T(r); keeping
    the image instead makes their norms exact.  Only operations that are
    linear in the image are offered.
    """

    image: SequenceSpec
    params: TaylorParams

    kind = "preimage"

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", as_params(self.params))

    def __add__(self, other: "Preimage") -> "Preimage":
        _same_params(self, other)
        return Preimage(sq.add(self.image, other.image), self.params)

    def __sub__(self, other: "Preimage") -> "Preimage":
        _same_params(self, other)
        return Preimage(sq.add(self.image, sq.scale(other.image, -1.0)), self.params)

    def __mul__(self, lam: float) -> "Preimage":
        return Preimage(sq.scale(self.image, lam), self.params)

    __rmul__ = __mul__

    def __neg__(self) -> "Preimage":
        return self * -1.0


def _same_params(a: Preimage, b) -> None:
    if not isinstance(b, Preimage) or b.params.r != a.params.r:
        raise PreconditionError("preimages can only be combined at the same r")


@dataclass(frozen=True)
class TransformResult:
    """y = M x for M = T(sigma): tabulated rows, their error bounds, and status.

    ``values`` carries, beyond its tabulated rows, a certified envelope for
    the remaining rows when one exists.  ``per_row_error[n]`` bounds
    |computed y_n - true y_n|; it is ``inf`` for rows that cannot be
    certified at this budget.
    """

    values: Tabulated
    per_row_error: tuple
    certified: bool
    cutoffs: tuple = ()
    dps: int | None = None
    notes: str = ""

    def __len__(self) -> int:
        return len(self.values.values)

    @property
    def max_error(self) -> float:
        return max(self.per_row_error, default=0.0)

    def as_floats(self) -> list[float]:
        return [float(v) for v in self.values.values]

    def to_dict(self) -> dict:
        return {
            "values": self.as_floats(),
            "per_row_error": [float(e) for e in self.per_row_error],
            "certified": self.certified,
            "tail_bound": self.values.tail_bound,
            "tail_ratio": self.values.tail_ratio,
            "cutoffs": list(self.cutoffs),
            "dps": self.dps,
            "notes": self.notes,
        }


@dataclass(frozen=True)
class BasisExpansion:
    """Coefficients lambda_k = (T x)_k and the residual norm after each partial sum."""

    coefficients: tuple
    reconstruction_error: tuple
    error_bounds: tuple
    p: float
    certified: bool
    dps: int | None = None


# --------------------------------------------------------------------------
# finite support: exact sums, float or mpmath


def _finite_values(x) -> tuple | None:
    if isinstance(x, FiniteSupport):
        return x.coeffs
    if isinstance(x, Tabulated) and x.tail_bound == 0.0:
        return FiniteSupport(x.values).coeffs
    return None


def _has_mp(vals) -> bool:
    return any(isinstance(v, mpmath.mpf) for v in vals)


def _abs_amplification(sigma: float, vals) -> float:
    """max_n sum_k |t_sigma[n, k] x_k| in float64 (inf on overflow)."""
    a = np.abs(np.asarray([float(v) for v in vals]))
    best = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(len(a)):
            row = np.abs(taylor_row(TaylorParams(sigma, regular=False), n, len(a) - 1))
            best = max(best, float(np.dot(row, a[n:])))
    return best if math.isfinite(best) else math.inf


def _auto_dps(amp: float, budget: TruncationBudget, extra: float = 0.0) -> int:
    """Digits needed so that amp * 10^-dps stays well under abs_tol."""
    if budget.dps is not None:
        return budget.dps
    if not math.isfinite(amp):
        amp = 1e300
    need = math.log10(max(amp, 1.0)) + extra - math.log10(budget.abs_tol) + 4
    return max(20, int(math.ceil(need)))


def _apply_finite_float(sigma: float, vals) -> tuple[list, list]:
    x = np.asarray([float(v) for v in vals])
    L = len(x)
    ys, errs = [], []
    p = TaylorParams(sigma, regular=False)
    for n in range(L):
        row = taylor_row(p, n, L - 1)
        terms = row * x[n:]
        ys.append(math.fsum(terms.tolist()))
        errs.append(UNIT_ROUNDOFF * float(np.dot(np.abs(terms), rounding_factor(n, L - 1, L))))
    return ys, errs


def _apply_finite_mp(sigma, vals, dps: int) -> tuple[list, list]:
    with mpmath.workdps(dps):
        x = [mpmath.mpf(v) for v in vals]
        L = len(x)
        sig = mpmath.mpf(sigma)
        ys, errs = [], []
        eps = float(mpmath.mpf(2) ** (-mpmath.mp.prec))
        for n in range(L):
            row = taylor_row_mp(sig, n, L - 1)
            terms = [t * v for t, v in zip(row, x[n:])]
            ys.append(mpmath.fsum(terms))
            mag = float(mpmath.fsum(abs(t) for t in terms))
            errs.append(eps * mag * (4.0 * (L - n) + 2.0 * n + 10.0 + L))
    return ys, errs


def _finite_transform(sigma, vals, budget: TruncationBudget, regular: float | None = None) -> TransformResult:
    if not vals:
        return TransformResult(Tabulated((), 0.0), (), True)
    if sigma == 0.0:
        return TransformResult(Tabulated(vals, 0.0), (0.0,) * len(vals), True, dps=None,
                               notes="identity (r = 0)")
    if budget.dps is not None or _has_mp(vals):
        dps = budget.dps if budget.dps is not None else mpmath.mp.dps
        ys, errs = _apply_finite_mp(sigma, vals, dps)
        return TransformResult(Tabulated(ys, 0.0), tuple(errs), True, dps=dps)
    ys, errs = _apply_finite_float(float(sigma), vals)
    scale = max(1.0, max(abs(y) for y in ys))
    if budget.auto_precision and max(errs) > budget.abs_tol * scale:
        amp = _abs_amplification(float(sigma), vals)
        dps = _auto_dps(amp, budget)
        yp, ep = _apply_finite_mp(sigma, vals, dps)
        ys = [float(v) for v in yp]
        errs = [e + UNIT_ROUNDOFF * abs(y) for e, y in zip(ep, ys)]
        return TransformResult(Tabulated(ys, 0.0), tuple(errs), True, dps=dps,
                               notes="extended precision (float rounding bound too large)")
    return TransformResult(Tabulated(ys, 0.0), tuple(errs), True)


# --------------------------------------------------------------------------
# infinite inputs: adaptive per-row cutoffs with envelope tails


def _row_terms_geometric(sigma: float, a: float, s: float, n: int, cutoff: int) -> np.ndarray:
    """t_sigma[n, k] * a * s**k for k = n..cutoff without intermediate overflow."""
    k = np.arange(n + 1, cutoff + 1, dtype=np.float64)
    ratios = sigma * s * k / (k - n)
    m1, e1 = signed_pow(1.0 - sigma, n + 1)
    m2, e2 = signed_pow(s, n) if n else (1.0, 0)
    return scaled_cumprod(m1 * m2 * a, e1 + e2, ratios)


def _log_tail(sigma: float, n: int, cutoff: int, log_m0: float, rho: float) -> float:
    """log of sum_{k > cutoff} |t_sigma[n, k]| M0 rho^k (inf if not summable)."""
    if log_m0 == -math.inf:
        return -math.inf
    z = abs(sigma) * rho
    if z >= 1.0:
        return math.inf
    if rho == 0.0:
        return -math.inf if cutoff >= 0 else log_m0
    tail = binomial_series_tail(n, cutoff, z)
    if tail <= 0.0:
        return -math.inf
    return (log_m0 + (n + 1) * math.log(abs(1.0 - sigma)) + n * math.log(rho)
            - (n + 1) * math.log1p(-z) + math.log(tail))


def _log_full(sigma: float, n: int, log_m0: float, rho: float) -> float:
    """log of sum_{k >= n} |t_sigma[n, k]| M0 rho^k."""
    if log_m0 == -math.inf:
        return -math.inf
    z = abs(sigma) * rho
    if z >= 1.0:
        return math.inf
    lr = n * math.log(rho) if rho > 0 else (0.0 if n == 0 else -math.inf)
    return log_m0 + (n + 1) * (math.log(abs(1.0 - sigma)) - math.log1p(-z)) + lr


def _choose_cutoff(sigma, n, lo, hi, log_m0, rho, log_target) -> int:
    """Smallest K in [lo, hi] whose envelope tail is below target (hi if none)."""
    if _log_tail(sigma, n, hi, log_m0, rho) > log_target:
        return hi
    if _log_tail(sigma, n, lo, log_m0, rho) <= log_target:
        return lo
    a, b = lo, hi
    while b - a > 1:
        mid = (a + b) // 2
        if _log_tail(sigma, n, mid, log_m0, rho) <= log_target:
            b = mid
        else:
            a = mid
    return b


def _infinite_transform(sigma: float, x: SequenceSpec, budget: TruncationBudget) -> TransformResult:
    is_geo = isinstance(x, Geometric)
    n_tab = None if is_geo else len(x.values)
    n_rows = budget.max_row + 1 if is_geo else min(budget.max_row + 1, max(n_tab, 1))
    env0 = sq.tail_envelope(x, 0)
    values, errs, cuts = [], [], []
    certified = True
    notes = []
    p = TaylorParams(sigma, regular=False)
    for n in range(n_rows):
        env = sq.tail_envelope(x, n) if is_geo else None
        if is_geo:
            log_m0, rho = env
            log_full = _log_full(sigma, n, log_m0, rho)
            if math.isinf(log_full) and log_full > 0:
                cut = budget.max_col
            else:
                log_target = math.log(UNIT_ROUNDOFF) + log_full
                cut = _choose_cutoff(sigma, n, n, max(n, budget.max_col), log_m0, rho, log_target)
            terms = _row_terms_geometric(sigma, x.a, x.s, n, cut)
            tail_env = (log_m0, rho)
        else:
            cut = min(n_tab - 1, budget.max_col)
            if cut < n:
                terms = np.zeros(0)
                cut = n - 1
            else:
                row = taylor_row(p, n, cut)
                xv = np.asarray([float(v) for v in x.values[n:cut + 1]])
                with np.errstate(over="ignore", invalid="ignore"):
                    terms = row * xv
            tail_env = sq.tail_envelope(x, cut + 1)
        y = float(np.sum(terms)) if len(terms) else 0.0  # pairwise; covered by the length term
        rnd = (UNIT_ROUNDOFF * float(np.dot(np.abs(terms), rounding_factor(n, cut, len(terms))))
               if len(terms) else 0.0)
        if tail_env is None:
            tail = math.inf
        else:
            lt = _log_tail(sigma, n, cut, *tail_env)
            tail = math.exp(lt) if lt < 700 else math.inf
        err = rnd + tail
        if not math.isfinite(err) or not math.isfinite(y):
            certified = False
        values.append(y)
        errs.append(err)
        cuts.append(cut)
    # envelope of the rows beyond the table
    tb, tr = None, None
    if env0 is not None:
        env_r = sq.tail_envelope(x, n_rows)
        log_m0, rho = env_r
        z = abs(sigma) * rho
        if log_m0 == -math.inf:
            tb = 0.0
        elif z < 1.0:
            ratio = rho * abs(1.0 - sigma) / (1.0 - z)
            lb = _log_full(sigma, n_rows, log_m0, rho)
            tb = math.exp(lb) if lb < 700 else math.inf
            tr = ratio
            if not math.isfinite(tb):
                tb = None
    if tb is None:
        certified = False
        notes.append("rows beyond the table are uncertified")
    if env0 is None:
        notes.append("input has no tail bound: uncertified")
    elif abs(sigma) * env0[1] >= 1.0:
        notes.append("uncertifiable at this budget: weighted rows are not absolutely summable")
    return TransformResult(Tabulated(values, tb, tr), tuple(errs), certified, tuple(cuts),
                           notes="; ".join(notes))


def _transform(sigma, x, budget: TruncationBudget) -> TransformResult:
    vals = _finite_values(x)
    if vals is not None:
        return _finite_transform(sigma, vals, budget)
    if float(sigma) == 0.0:
        tab = sq.tabulate(x, budget.max_row + 1)
        return TransformResult(tab, (0.0,) * len(tab.values), tab.certified,
                               notes="identity (r = 0)")
    return _infinite_transform(float(sigma), x, budget)


def apply_taylor(params: TaylorParams | float, x, budget: TruncationBudget = DEFAULT_BUDGET) -> TransformResult:
    """y_n = sum_{k >= n} t[n, k] x_k with certified per-row error."""
    params = as_params(params)
    if isinstance(x, Preimage):
        if x.params.r != params.r:
            raise PreconditionError("preimage was built for a different r")
        tab = x.image if isinstance(x.image, Tabulated) else sq.tabulate(x.image, _image_len(x.image, budget))
        return TransformResult(tab, (0.0,) * len(tab.values), tab.certified,
                               notes="preimage: image taken as given")
    return _transform(params.r, x, budget)


def apply_inverse(params: TaylorParams | float, y, budget: TruncationBudget = DEFAULT_BUDGET) -> TransformResult:
    """x = T(r)^{-1} y = T(-r/(1-r)) y.

    Rows of the inverse have absolute sums (1-2r)^-(n+1) for r < 1/2 and
    diverge for r >= 1/2, so bounded infinite inputs cannot be certified
    there; such rows come back with an infinite error bound.
    """
    params = as_params(params)
    return _transform(params.inverse_r, y, budget)


def apply_euler(params: TaylorParams | float, x: SequenceSpec, n_rows: int) -> list[float]:
    """(E^r x)_n for n < n_rows; rows of the Euler mean are finite."""
    r = params.r if isinstance(params, TaylorParams) else float(params)
    return [math.fsum(euler_entry(r, n, k) * float(sq.evaluate(x, k)) for k in range(n + 1))
            for n in range(n_rows)]


def _image_len(image, budget) -> int:
    if isinstance(image, FiniteSupport):
        return len(image.coeffs)
    return budget.max_row + 1


# --------------------------------------------------------------------------
# closed forms and identities


def transform_geometric(params: TaylorParams | float, a: float, s: float) -> tuple[float, float]:
    """T(r) (a s^k) = c rho^n with c = a(1-r)/(1-rs), rho = s(1-r)/(1-rs)."""
    r = as_params(params).r
    if not abs(r * s) < 1.0:
        raise PreconditionError(f"|r s| must be < 1 for the series to converge (r={r}, s={s})")
    den = 1.0 - r * s
    return a * (1.0 - r) / den, s * (1.0 - r) / den


def roundtrip_defect(params: TaylorParams | float, x: SequenceSpec,
                     budget: TruncationBudget = DEFAULT_BUDGET) -> float:
    """sup_k |(T^{-1} T x)_k - x_k| over the rows both passes certify.

    Finite support runs at a precision chosen from the amplification
    max_n sum_k |inv[n, k]| sum_j t[k, j] |x_j| unless ``budget.dps`` is set
    or ``auto_precision`` is off.
    """
    params = as_params(params)
    if params.r == 0.0:
        return 0.0
    vals = _finite_values(x)
    if vals is not None:
        if not vals:
            return 0.0
        if budget.dps is None and not budget.auto_precision:
            ys, _ = _apply_finite_float(params.r, vals)
            xs, _ = _apply_finite_float(params.inverse_r, ys)
            return max(abs(a - float(b)) for a, b in zip(xs, vals))
        inner = np.abs(_apply_finite_float(params.r, [abs(float(v)) for v in vals])[0])
        amp = _abs_amplification(params.inverse_r, list(inner))
        dps = _auto_dps(amp, budget)
        b = dataclasses.replace(budget, dps=dps)
        with mpmath.workdps(dps):
            y = _finite_transform(mpmath.mpf(params.r), vals, b)
            back = _finite_transform(inverse_mp(params.r), y.values.values, b)
            return float(max(abs(u - mpmath.mpf(v)) for u, v in zip(back.values.values, vals)))
    # the forward table runs well past max_row so inverse rows see enough columns
    fwd = dataclasses.replace(budget, max_row=4 * budget.max_row + 64,
                              max_col=max(budget.max_col, 4 * budget.max_row + 64),
                              ladder=budget.ladder)
    y = apply_taylor(params, x, fwd)
    back = apply_inverse(params, y.values, budget)
    worst = 0.0
    for k, (u, e) in enumerate(zip(back.values.values, back.per_row_error)):
        xk = float(sq.evaluate(x, k))
        if not e <= budget.tol_for(xk):
            continue  # row not certified to tolerance
        worst = max(worst, abs(float(u) - xk))
    return worst


def inverse_mp(r):
    r = mpmath.mpf(r)
    return -r / (1 - r)


def compose_defect(r: float, s: float, budget: TruncationBudget = DEFAULT_BUDGET,
                   grid: int = 40) -> tuple[float, float]:
    """Max entry deviations of T(r)T(s) on a grid x grid window.

    Returns (vs T(r+s-rs), vs the transpose of q E^q with q = (1-r)(1-s)).
    Both matrices are upper triangular, so each product entry is a finite
    sum and the window is exact.
    """
    pr, ps = as_params(r), as_params(s)
    u = pr.r + ps.r - pr.r * ps.r
    q = (1.0 - pr.r) * (1.0 - ps.r)
    rows_r = [taylor_row(pr, n, grid - 1) for n in range(grid)]
    rows_s = [taylor_row(ps, n, grid - 1) for n in range(grid)]
    d_comp = d_claim = 0.0
    for n in range(grid):
        for k in range(n, grid):
            prod = math.fsum(rows_r[n][j - n] * rows_s[j][k - j] for j in range(n, k + 1))
            d_comp = max(d_comp, abs(prod - taylor_entry(TaylorParams(u), n, k)))
            d_claim = max(d_claim, abs(prod - q * euler_entry(q, k, n)))
    return d_comp, d_claim


# --------------------------------------------------------------------------
# norms


def _taylor_space(space: SpaceId) -> tuple[TaylorParams, float]:
    if not space.is_taylor:
        raise PreconditionError(f"{space.label()} is not a Taylor space")
    return as_params(space.r), space.exponent


def image_of(x, params: TaylorParams, budget: TruncationBudget = DEFAULT_BUDGET):
    """(Tabulated image, per-row error list, certified) of x under T(r)."""
    res = apply_taylor(params, x, budget)
    return res.values, list(res.per_row_error), res.certified


def _combine_norm(tab: Tabulated, errs, certified: bool, p: float) -> NormResult:
    base = sq.p_norm(tab, p)
    if base.divergent:
        return base
    if not certified or base.error_bound is None:
        return NormResult(base.value, None)
    e = sq.p_norm(FiniteSupport(errs), p).value if errs else 0.0
    return NormResult(base.value, base.error_bound + e)


def space_norm(x, space: SpaceId, budget: TruncationBudget = DEFAULT_BUDGET) -> NormResult:
    """||x||_{t_p^r} = ||T(r) x||_p (sup norm for t_inf^r)."""
    params, p = _taylor_space(space)
    if isinstance(x, Geometric):
        if not abs(params.r * x.s) < 1.0:
            return NormResult(math.inf, None, True)
        c, rho = transform_geometric(params, x.a, x.s)
        return sq.p_norm(Geometric(c, rho), p)
    tab, errs, cert = image_of(x, params, budget)
    return _combine_norm(tab, errs, cert, p)


def inner_product_t2(x, y, params: TaylorParams | float,
                     budget: TruncationBudget = DEFAULT_BUDGET) -> NormResult:
    """<T x, T y> with a Cauchy-Schwarz error bound."""
    params = as_params(params)
    tx, ex, cx = image_of(x, params, budget)
    ty, ey, cy = image_of(y, params, budget)
    n = max(len(tx.values), len(ty.values))
    a = [float(sq.evaluate(tx, i)) for i in range(n)]
    b = [float(sq.evaluate(ty, i)) for i in range(n)]
    val = math.fsum(u * v for u, v in zip(a, b))
    if not (cx and cy):
        return NormResult(val, None)
    l2 = lambda v: math.sqrt(math.fsum(t * t for t in v))
    na, nb = l2(a), l2(b)
    ea = l2(ex) + (_tail_l2(tx) or 0.0)
    eb = l2(ey) + (_tail_l2(ty) or 0.0)
    bound = ea * nb + na * eb + ea * eb
    return NormResult(val, bound)


def _tail_l2(tab: Tabulated) -> float | None:
    if tab.tail_bound is None:
        return None
    if tab.tail_bound == 0.0:
        return 0.0
    rho = tab.tail_ratio
    if rho is None or rho >= 1.0:
        return math.inf
    return tab.tail_bound / math.sqrt(1.0 - rho * rho)


def parallelogram_defect(x, y, space: SpaceId, budget: TruncationBudget = DEFAULT_BUDGET) -> float:
    """| ||x+y||^2 + ||x-y||^2 - 2||x||^2 - 2||y||^2 | in t_p^r."""
    nrm = lambda v: space_norm(v, space, budget).value
    s = _lin(x, y, 1.0)
    d = _lin(x, y, -1.0)
    return abs(nrm(s) ** 2 + nrm(d) ** 2 - 2.0 * nrm(x) ** 2 - 2.0 * nrm(y) ** 2)


def _lin(x, y, lam: float):
    if isinstance(x, Preimage):
        return x + y * lam
    return sq.add(x, sq.scale(y, lam))


# --------------------------------------------------------------------------
# Schauder basis


def basis_vector(params: TaylorParams | float, k: int, dps: int | None = None) -> FiniteSupport:
    """b^(k): entries C(k, n) (1-r)^-(k+1) (-r)^(k-n) for n <= k.

    With ``dps`` the entries are mpf values at that precision.
    """
    params = as_params(params)
    if k < 0:
        raise PreconditionError("k must be >= 0")
    if dps is None:
        from .numerics_core import inverse_taylor_entry
        return FiniteSupport([inverse_taylor_entry(params, n, k) for n in range(k + 1)])
    with mpmath.workdps(dps):
        r = mpmath.mpf(params.r)
        base = (1 - r) ** (-(k + 1))
        return FiniteSupport([mpmath.binomial(k, n) * base * (-r) ** (k - n) for n in range(k + 1)])


def basis_preimage(params: TaylorParams | float, k: int) -> Preimage:
    """b^(k) in transform coordinates (its image is e^(k))."""
    return Preimage(sq.unit(k), as_params(params))


def _basis_log10_mass(r: float, k: int) -> float:
    # ||b^(k)||_1 = (1+r)^k / (1-r)^(k+1) bounds the amplification of T b^(k)
    return (k * math.log10(1.0 + abs(r)) - (k + 1) * math.log10(abs(1.0 - r)))


def basis_expand(params: TaylorParams | float, x, K: int, p: float = 2.0,
                 budget: TruncationBudget = DEFAULT_BUDGET) -> BasisExpansion:
    """lambda_k = (T x)_k for k <= K and ||x - sum_{k<=j} lambda_k b^(k)|| for j <= K.

    The partial sums are formed in original coordinates from exact basis
    vectors and transformed back, at a precision large enough for the
    cancellation inside T b^(k).
    """
    params = as_params(params)
    r = params.r
    if isinstance(x, Geometric) and abs(r * x.s) < 1.0:
        c, rho = transform_geometric(params, x.a, x.s)
        ytab = sq.tabulate(Geometric(c, rho), max(K + 1, budget.max_row + 1))
        yerr = [abs(v) * 4 * UNIT_ROUNDOFF * (i + 2) for i, v in enumerate(ytab.values)]
        ycert = True
    else:
        res = apply_taylor(params, x, budget)
        ytab, yerr, ycert = res.values, list(res.per_row_error), res.certified
    lam = [float(sq.evaluate(ytab, k)) for k in range(K + 1)]
    n_rows = max(K + 1, len(ytab.values))
    dps = budget.dps if budget.dps is not None else max(20, int(math.ceil(
        _basis_log10_mass(r, K) - math.log10(budget.abs_tol) + 6)))
    errs, bounds = [], []
    with mpmath.workdps(dps):
        rm = mpmath.mpf(r)
        eps = mpmath.mpf(2) ** (-mpmath.mp.prec)
        image = [mpmath.mpf(0)] * (K + 1)  # T(partial sum), rows 0..K
        for j in range(K + 1):
            bj = basis_vector(params, j, dps=dps).coeffs
            # T b^(j), rows 0..j (it vanishes below row j+1 exactly)
            for n in range(j + 1):
                row = taylor_row_mp(rm, n, j)
                image[n] += lam[j] * mpmath.fsum(t * b for t, b in zip(row, bj[n:]))
            resid = [float(sq.evaluate(ytab, n)) - (image[n] if n <= K else 0)
                     for n in range(n_rows)]
            resid_f = [float(v) for v in resid]
            if n_rows == len(ytab.values) or ytab.tail_bound == 0.0:
                tail_b, tail_r = ytab.tail_bound, ytab.tail_ratio
            else:
                tail_b, tail_r = None, None
            head = sq.p_norm(Tabulated(resid_f, tail_b, tail_r), p)
            val = head.value
            if ycert and head.error_bound is not None:
                e_y = sq.p_norm(FiniteSupport(yerr), p).value if yerr else 0.0
                e_mp = float(eps) * 10.0 ** _basis_log10_mass(r, j) * (j + 1) * 20 * max(1.0, max(abs(v) for v in lam))
                bounds.append(head.error_bound + e_y + e_mp)
            else:
                bounds.append(None)
            errs.append(val)
    return BasisExpansion(tuple(lam), tuple(errs), tuple(bounds), p,
                          certified=all(b is not None for b in bounds), dps=dps)
