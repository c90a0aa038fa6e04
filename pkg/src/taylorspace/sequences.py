"""Real sequences with enough structure for exact oracles and certified tails.

Three variants:

* ``FiniteSupport(coeffs)`` -- exact, trailing zeros stripped.
* ``Geometric(a, s)`` -- x_k = a * s**k.
* ``Tabulated(values, tail_bound, tail_ratio)`` -- the first N terms plus an
  envelope |x_{N+j}| <= tail_bound * tail_ratio**j.  Without ``tail_ratio``
  the bound is a plain sup bound; without ``tail_bound`` every tail-dependent
  number is uncertified.

Coefficients may be floats or mpmath ``mpf`` values; the latter survive
through transforms run at extended precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Union

import mpmath
import numpy as np

from .numerics_core import PreconditionError, TruncationBudget


def _is_mp(v) -> bool:
    return isinstance(v, mpmath.mpf)


def _clean(values) -> tuple:
    out = []
    for v in values:
        if _is_mp(v):
            out.append(v)
        else:
            f = float(v)
            if math.isnan(f):
                raise PreconditionError("sequence values must not be NaN")
            out.append(f)
    return tuple(out)


@dataclass(frozen=True)
class FiniteSupport:
    coeffs: tuple = ()

    kind = "finite"

    def __post_init__(self) -> None:
        vals = list(_clean(self.coeffs))
        while vals and vals[-1] == 0:
            vals.pop()
        object.__setattr__(self, "coeffs", tuple(vals))

    def __len__(self) -> int:
        return len(self.coeffs)

    @property
    def certified(self) -> bool:
        return True

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, lam):
        return scale(self, lam)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Geometric:
    a: float
    s: float

    kind = "geometric"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and math.isfinite(self.s)):
            raise PreconditionError("Geometric needs finite a and s")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "s", float(self.s))

    @property
    def certified(self) -> bool:
        return True

    def __mul__(self, lam):
        return scale(self, lam)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))


@dataclass(frozen=True)
class Tabulated:
    values: tuple = ()
    tail_bound: float | None = None
    tail_ratio: float | None = None

    kind = "tabulated"

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _clean(self.values))
        if self.tail_bound is not None:
            tb = float(self.tail_bound)
            if not tb >= 0:
                raise PreconditionError("tail_bound must be >= 0")
            object.__setattr__(self, "tail_bound", tb)
        if self.tail_ratio is not None:
            tr = float(self.tail_ratio)
            if not tr >= 0:
                raise PreconditionError("tail_ratio must be >= 0")
            object.__setattr__(self, "tail_ratio", tr)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def certified(self) -> bool:
        return self.tail_bound is not None

    @property
    def tail_sup(self) -> float | None:
        """Bound on sup_{k >= N} |x_k|, or None when uncertified."""
        if self.tail_bound is None:
            return None
        if self.tail_bound == 0.0:
            return 0.0
        if self.tail_ratio is not None and self.tail_ratio > 1.0:
            return math.inf
        return self.tail_bound

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, lam):
        return scale(self, lam)

    __rmul__ = __mul__


SequenceSpec = Union[FiniteSupport, Geometric, Tabulated]


def zero() -> FiniteSupport:
    return FiniteSupport(())


def unit(k: int) -> FiniteSupport:
    """The unit sequence e^(k)."""
    return FiniteSupport([0.0] * k + [1.0])


def evaluate(x: SequenceSpec, k: int) -> float:
    """k-th term.  Tabulated sequences read 0 beyond their range (see ``certified``)."""
    if k < 0:
        raise PreconditionError("index must be >= 0")
    if isinstance(x, Geometric):
        return x.a * x.s**k
    vals = x.coeffs if isinstance(x, FiniteSupport) else x.values
    return vals[k] if k < len(vals) else 0.0


def tail_envelope(x: SequenceSpec, start: int) -> tuple[float, float] | None:
    """(log M0, rho) with |x_k| <= M0 * rho**k for every k >= ``start``.

    Returns ``(-inf, 1)`` for an identically zero tail and None when the
    sequence carries no certified tail information.
    """
    if isinstance(x, Geometric):
        if x.a == 0.0 or (x.s == 0.0 and start > 0):
            return -math.inf, 1.0
        if x.s == 0.0:
            return math.log(abs(x.a)), 1.0
        return math.log(abs(x.a)), abs(x.s)
    if isinstance(x, FiniteSupport):
        rest = [abs(float(v)) for v in x.coeffs[start:]]
        m = max(rest, default=0.0)
        if m == 0.0:
            return -math.inf, 1.0
        # finitely many nonzero terms: a flat envelope suffices
        return math.log(m), 1.0
    if x.tail_bound is None:
        return None
    n_tab = len(x.values)
    rho = 1.0 if x.tail_ratio is None else x.tail_ratio
    head = [(k, abs(float(x.values[k]))) for k in range(start, n_tab)]
    if rho == 0.0:
        # only x_N can be nonzero past the table
        m = max([v for _, v in head] + [x.tail_bound if start <= n_tab else 0.0])
        return (math.log(m), 1.0) if m > 0.0 else (-math.inf, 1.0)
    lr = math.log(rho)
    # tight pointwise envelope: M0 = max_k |x_k| rho^-k
    cands = [math.log(v) - k * lr for k, v in head if v > 0.0]
    if x.tail_bound > 0.0:
        cands.append(math.log(x.tail_bound) - n_tab * lr)
    if not cands:
        return -math.inf, 1.0
    return max(cands), rho


def tabulate(x: SequenceSpec, n: int) -> Tabulated:
    """First ``n`` terms of ``x`` with the tail envelope attached."""
    if isinstance(x, Tabulated):
        if n >= len(x.values):
            return x
        env = tail_envelope(x, n)
        if env is None:
            return Tabulated(x.values[:n], None)
        log_m0, rho = env
        tb = 0.0 if log_m0 == -math.inf else math.exp(log_m0) * rho**n
        return Tabulated(x.values[:n], tb, None if rho == 1.0 else rho)
    if isinstance(x, FiniteSupport):
        head = x.coeffs[:n] + (0.0,) * max(0, n - len(x.coeffs))
        rest = max((abs(float(v)) for v in x.coeffs[n:]), default=0.0)
        return Tabulated(head, rest)
    vals = [x.a * x.s**k for k in range(n)]
    return Tabulated(vals, abs(x.a) * abs(x.s) ** n, abs(x.s))


def scale(x: SequenceSpec, lam: float) -> SequenceSpec:
    if isinstance(x, FiniteSupport):
        return FiniteSupport([lam * v for v in x.coeffs])
    if isinstance(x, Geometric):
        return Geometric(lam * x.a, x.s)
    tb = None if x.tail_bound is None else abs(float(lam)) * x.tail_bound
    return Tabulated([lam * v for v in x.values], tb, x.tail_ratio)


def add(x: SequenceSpec, y: SequenceSpec) -> SequenceSpec:
    """Termwise sum.  Geometric operands are tabulated first."""
    if isinstance(x, FiniteSupport) and isinstance(y, FiniteSupport):
        a, b = x.coeffs, y.coeffs
        m = max(len(a), len(b))
        return FiniteSupport([(a[i] if i < len(a) else 0.0) + (b[i] if i < len(b) else 0.0)
                              for i in range(m)])
    n = max(_natural_length(x), _natural_length(y))
    tx, ty = tabulate(x, n), tabulate(y, n)
    vals = [evaluate(tx, i) + evaluate(ty, i) for i in range(n)]
    if tx.tail_bound is None or ty.tail_bound is None:
        return Tabulated(vals, None)
    rx = tx.tail_ratio if tx.tail_ratio is not None else 1.0
    ry = ty.tail_ratio if ty.tail_ratio is not None else 1.0
    if tx.tail_bound == 0.0:
        return Tabulated(vals, ty.tail_bound, ty.tail_ratio)
    if ty.tail_bound == 0.0:
        return Tabulated(vals, tx.tail_bound, tx.tail_ratio)
    ratio = max(rx, ry)
    return Tabulated(vals, tx.tail_bound + ty.tail_bound, None if ratio == 1.0 else ratio)


def _natural_length(x: SequenceSpec) -> int:
    if isinstance(x, FiniteSupport):
        return len(x.coeffs)
    if isinstance(x, Tabulated):
        return len(x.values)
    return 256


@dataclass(frozen=True)
class NormResult:
    """A norm value with a certified error bound (None = uncertified).

    ``divergent`` marks a sequence that is provably outside the space;
    ``value`` is then ``inf``.
    """

    value: float
    error_bound: float | None
    divergent: bool = False

    @property
    def certified(self) -> bool:
        return self.error_bound is not None

    def to_dict(self) -> dict:
        return {"value": self.value, "error_bound": self.error_bound,
                "divergent": self.divergent, "certified": self.certified}


def _finite_pnorm(vals, p: float):
    if not vals:
        return 0.0
    if any(_is_mp(v) for v in vals):
        if math.isinf(p):
            return max(abs(mpmath.mpf(v)) for v in vals)
        return mpmath.fsum(abs(mpmath.mpf(v)) ** p for v in vals) ** (1 / mpmath.mpf(p))
    arr = np.abs(np.asarray(vals, dtype=np.float64))
    if math.isinf(p):
        return float(arr.max())
    m = float(arr.max())
    if m == 0.0:
        return 0.0
    # scale to avoid overflow in |v|^p
    return m * math.fsum(((arr / m) ** p).tolist()) ** (1.0 / p)


def p_norm(x: SequenceSpec, p: float, budget: TruncationBudget | None = None) -> NormResult:
    """ell_p norm (p = inf for the sup norm)."""
    if not (p >= 1.0):
        raise PreconditionError(f"p must be >= 1, got {p!r}")
    if isinstance(x, Geometric):
        a, s = abs(x.a), abs(x.s)
        if a == 0.0:
            return NormResult(0.0, 0.0)
        if math.isinf(p):
            if s > 1.0:
                return NormResult(math.inf, None, True)
            return NormResult(a, 0.0)
        if s >= 1.0:
            return NormResult(math.inf, None, True)
        return NormResult(a * (1.0 - s**p) ** (-1.0 / p), 0.0)
    if isinstance(x, FiniteSupport):
        return NormResult(float(_finite_pnorm(x.coeffs, p)), 0.0)
    head = float(_finite_pnorm(x.values, p))
    if x.tail_bound is None:
        return NormResult(head, None)
    if x.tail_bound == 0.0:
        return NormResult(head, 0.0)
    rho = x.tail_ratio
    if math.isinf(p):
        tsup = x.tail_sup
        if math.isinf(tsup):
            return NormResult(head, None)
        return NormResult(head, max(0.0, tsup - head))
    if rho is None or rho >= 1.0:
        return NormResult(head, None)
    tail = x.tail_bound * (1.0 - rho**p) ** (-1.0 / p)
    return NormResult(head, tail)


def partial_p_norms(x: SequenceSpec, p: float, cutoffs) -> list[float]:
    """Truncated norms ||(x_0..x_K)||_p for each K in ``cutoffs``."""
    out = []
    for K in cutoffs:
        vals = [float(evaluate(x, k)) for k in range(K + 1)]
        out.append(float(_finite_pnorm(vals, p)))
    return out


# --------------------------------------------------------------------------
# JSON format: {"kind": "finite"|"geometric"|"tabulated", ...}


def to_json_obj(x: SequenceSpec) -> dict[str, Any]:
    if isinstance(x, FiniteSupport):
        return {"kind": "finite", "coeffs": [float(v) for v in x.coeffs]}
    if isinstance(x, Geometric):
        return {"kind": "geometric", "a": x.a, "s": x.s}
    return {"kind": "tabulated", "values": [float(v) for v in x.values],
            "tail_bound": x.tail_bound, "tail_ratio": x.tail_ratio}


def from_json_obj(obj: dict[str, Any]) -> SequenceSpec:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise PreconditionError('sequence spec must be a JSON object with a "kind" field')
    kind = obj["kind"]
    try:
        if kind == "finite":
            return FiniteSupport([float(v) for v in obj["coeffs"]])
        if kind == "geometric":
            return Geometric(float(obj["a"]), float(obj["s"]))
        if kind == "tabulated":
            tb = obj.get("tail_bound")
            tr = obj.get("tail_ratio")
            return Tabulated([float(v) for v in obj["values"]],
                             None if tb is None else float(tb),
                             None if tr is None else float(tr))
    except (KeyError, TypeError, ValueError) as exc:
        raise PreconditionError(f"malformed {kind!r} sequence spec: {exc}") from exc
    raise PreconditionError(f"unknown sequence kind {kind!r}")


def loads(text: str) -> SequenceSpec:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PreconditionError(f"sequence spec is not valid JSON: {exc}") from exc
    return from_json_obj(obj)


# --------------------------------------------------------------------------
# spaces


_CLASSICAL = ("lp", "linf", "c", "c0", "bs", "cs", "c0s")
_TAYLOR = ("tp", "tinf")


@dataclass(frozen=True)
class SpaceId:
    """A sequence space tag with its exponent (and Taylor order, if any).

    ``lp`` with p = 1 is ell_1 and ``tp`` with p = 1 is t_1^r.
    """

    tag: str
    p: float | None = None
    r: float | None = None

    def __post_init__(self) -> None:
        if self.tag not in _CLASSICAL + _TAYLOR:
            raise PreconditionError(f"unknown space tag {self.tag!r}")
        if self.tag in ("lp", "tp"):
            if self.p is None or not (1.0 <= self.p < math.inf):
                raise PreconditionError(f"{self.tag} needs 1 <= p < inf, got {self.p!r}")
        if self.tag in _TAYLOR and self.r is None:
            raise PreconditionError(f"{self.tag} needs a Taylor order r")

    @property
    def is_taylor(self) -> bool:
        return self.tag in _TAYLOR

    @property
    def exponent(self) -> float:
        """p for the ell_p-type spaces, inf for sup-type ones."""
        if self.tag in ("lp", "tp"):
            return float(self.p)
        return math.inf

    @property
    def q(self) -> float:
        """Conjugate exponent, 1/p + 1/q = 1 (q = inf when p = 1)."""
        p = self.exponent
        if p == 1.0:
            return math.inf
        if math.isinf(p):
            return 1.0
        return p / (p - 1.0)

    @property
    def classical_name(self) -> str:
        """Registry key of the underlying classical space (ell_p with p=1 is 'l1')."""
        if self.tag in ("lp", "tp"):
            return "l1" if self.p == 1.0 else "lp"
        if self.tag == "tinf":
            return "linf"
        return self.tag

    @classmethod
    def parse(cls, name: str, p: float | None = None, r: float | None = None) -> "SpaceId":
        if name == "l1":
            return cls("lp", 1.0)
        if name == "t1":
            return cls("tp", 1.0, r)
        if name in ("lp", "tp"):
            return cls(name, p, r if name == "tp" else None)
        if name == "tinf":
            return cls(name, None, r)
        return cls(name)

    def label(self) -> str:
        if self.tag in ("lp", "tp"):
            base = "l" if self.tag == "lp" else "t"
            return f"{base}_{self.p:g}" + (f"^{self.r:g}" if self.tag == "tp" else "")
        if self.tag == "tinf":
            return f"t_inf^{self.r:g}"
        return self.tag


def taylor_p(p: float, r: float) -> SpaceId:
    return SpaceId("tp", p, r)


def taylor_inf(r: float) -> SpaceId:
    return SpaceId("tinf", None, r)


def ell_p(p: float) -> SpaceId:
    return SpaceId("lp", p)
