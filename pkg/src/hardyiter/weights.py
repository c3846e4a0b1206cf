"""Weight functions on (0, inf) with closed-form cumulative integrals.

Every supported weight is a piecewise power function: on each piece
``[lo, hi)`` it equals ``c * x**a``.  Cumulative integrals are therefore
available in closed form, and divergent integrals are returned as ``inf``
rather than raised.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np
from scipy.special import exprel

INF = math.inf


class DomainError(ValueError):
    """Raised when a weight is evaluated or integrated outside (0, inf)."""


class UnsupportedTransform(ValueError):
    """Raised when a transform is not defined for a weight variant."""


class WeightFormatError(ValueError):
    """Raised for malformed weight descriptions; ``path`` names the field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# Extended reals
# ---------------------------------------------------------------------------


class ExtendedValue(float):
    """Nonnegative real or ``+inf`` with the conventions 0*inf = 0,
    inf/inf = 0 and 0/0 = 0."""

    def __new__(cls, value=0.0):
        value = float(value)
        if math.isnan(value) or value < 0:
            raise ValueError(f"extended value must be nonnegative, got {value}")
        return super().__new__(cls, value)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self)

    def __mul__(self, other):
        return ExtendedValue(ext_mul(float(self), float(other)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ExtendedValue(ext_div(float(self), float(other)))

    def __rtruediv__(self, other):
        return ExtendedValue(ext_div(float(other), float(self)))

    def __add__(self, other):
        return ExtendedValue(float(self) + float(other))

    __radd__ = __add__

    def __pow__(self, exponent):
        return ExtendedValue(ext_pow(float(self), float(exponent)))

    def __repr__(self) -> str:
        return f"ExtendedValue({float(self)!r})"


def ext_mul(a, b):
    """Product with 0 * inf = 0; works on scalars and arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        out = a * b
    out = np.where((a == 0) | (b == 0), 0.0, out)
    return out[()] if out.ndim == 0 else out


def ext_div(a, b):
    """Quotient with 0/0 = 0 and inf/inf = 0; ``x/0 = inf`` for x > 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = a / b
    out = np.where(b == 0, np.where(a == 0, 0.0, INF), out)
    out = np.where(np.isinf(a) & np.isinf(b), 0.0, out)
    return out[()] if out.ndim == 0 else out


def ext_pow(a, e):
    """``a**e`` for a in [0, inf] with 0**neg = inf, inf**neg = 0, x**0 = 1."""
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.power(a, e)
    if np.ndim(e) == 0 and e == 0:
        out = np.ones_like(a)
    return out[()] if out.ndim == 0 else out


def powprod(*factors):
    """Product of powers ``prod(a_i ** e_i)`` evaluated in log space.

    Each factor is a pair ``(a, e)`` with ``a`` in [0, inf].  A factor that is
    zero annihilates the product even when another factor is infinite, which
    is the 0 * inf = 0 convention applied to the whole product.
    """
    logs = None
    zero = None
    infinite = None
    for a, e in factors:
        a = np.asarray(a, dtype=float)
        if np.ndim(e) == 0 and e == 0:
            continue
        with np.errstate(divide="ignore"):
            la = np.log(a)
        z = ((a == 0) & (np.asarray(e) > 0)) | (np.isinf(a) & (np.asarray(e) < 0))
        i = ((a == 0) & (np.asarray(e) < 0)) | (np.isinf(a) & (np.asarray(e) > 0))
        with np.errstate(invalid="ignore"):
            term = np.where(z | i, 0.0, e * np.where(np.isfinite(la), la, 0.0))
        logs = term if logs is None else logs + term
        zero = z if zero is None else (zero | z)
        infinite = i if infinite is None else (infinite | i)
    if logs is None:
        return 1.0
    with np.errstate(over="ignore"):
        out = np.exp(logs)
    out = np.where(infinite, INF, out)
    out = np.where(zero, 0.0, out)
    return out[()] if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Piecewise powers
# ---------------------------------------------------------------------------


def _piece_integral(c, a, lo, hi):
    """Integral of ``c * x**a`` over [lo, hi] for 0 <= lo <= hi <= inf (arrays)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    lo, hi = np.broadcast_arrays(lo, hi)
    out = np.zeros(lo.shape)
    empty = hi <= lo
    if c == 0:
        return out
    if math.isinf(c):
        return np.where(empty, 0.0, INF)
    e = a + 1.0
    from_zero = (lo == 0) & ~empty
    to_inf = np.isinf(hi) & ~empty
    finite = ~empty & ~from_zero & ~to_inf
    if e > 0:
        with np.errstate(over="ignore"):
            out = np.where(from_zero & ~to_inf, c * np.power(np.where(from_zero, hi, 1.0), e) / e, out)
        out = np.where(to_inf, INF, out)
    elif e < 0:
        with np.errstate(over="ignore", divide="ignore"):
            out = np.where(to_inf & ~from_zero, c * np.power(np.where(to_inf, lo, 1.0), e) / (-e), out)
        out = np.where(from_zero, INF, out)
    else:
        out = np.where(from_zero | to_inf, INF, out)
    if np.any(finite):
        lo_f = np.where(finite, lo, 1.0)
        hi_f = np.where(finite, hi, 1.0)
        span = np.log(hi_f / lo_f)
        with np.errstate(over="ignore"):
            val = c * np.power(lo_f, e) * span * exprel(e * span)
        out = np.where(finite, val, out)
    return out


@dataclass(frozen=True)
class PiecewisePower:
    """``c_i * x**a_i`` on ``[edges[i], edges[i+1])``; edges start at 0 and end at inf.

    Coefficients may be 0 or inf (the latter arises from negative powers of a
    vanishing weight).
    """

    edges: tuple
    coeffs: tuple
    alphas: tuple

    def __post_init__(self):
        if len(self.edges) != len(self.coeffs) + 1 or len(self.coeffs) != len(self.alphas):
            raise ValueError("edges must have one more entry than coeffs and alphas")
        if self.edges[0] != 0 or self.edges[-1] != INF:
            raise ValueError("pieces must cover (0, inf)")

    @property
    def breakpoints(self) -> tuple:
        return tuple(self.edges[1:-1])

    def pieces(self):
        for i, (c, a) in enumerate(zip(self.coeffs, self.alphas)):
            yield self.edges[i], self.edges[i + 1], c, a

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for lo, hi, c, a in self.pieces():
            mask = (x >= lo) & (x < hi)
            if c == 0 or not np.any(mask):
                continue
            with np.errstate(over="ignore", divide="ignore"):
                out = np.where(mask, c * np.power(np.where(mask, x, 1.0), a) if math.isfinite(c) else INF, out)
        return out[()] if out.ndim == 0 else out

    def integral(self, lo, hi):
        """Integral over [lo, hi] with 0 <= lo <= hi <= inf (vectorised)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        lo, hi = np.broadcast_arrays(lo, hi)
        total = np.zeros(lo.shape)
        for plo, phi, c, a in self.pieces():
            a_ = np.maximum(lo, plo)
            b_ = np.minimum(hi, phi)
            total = total + _piece_integral(c, a, a_, np.maximum(a_, b_))
        return total[()] if total.ndim == 0 else total

    def lower(self, t):
        return self.integral(0.0, t)

    def upper(self, t):
        return self.integral(t, INF)

    def total(self) -> float:
        return float(self.integral(0.0, INF))

    def power(self, gamma: float) -> "PiecewisePower":
        coeffs = []
        for c in self.coeffs:
            if gamma == 0:
                coeffs.append(1.0)
            elif c == 0:
                coeffs.append(INF if gamma < 0 else 0.0)
            elif math.isinf(c):
                coeffs.append(0.0 if gamma < 0 else INF)
            else:
                coeffs.append(c**gamma)
        return PiecewisePower(self.edges, tuple(coeffs), tuple(a * gamma for a in self.alphas))

    def scale(self, lam: float) -> "PiecewisePower":
        return PiecewisePower(self.edges, tuple(float(ext_mul(c, lam)) for c in self.coeffs), self.alphas)

    def times_power(self, k: float) -> "PiecewisePower":
        """Multiply by ``x**k``."""
        return PiecewisePower(self.edges, self.coeffs, tuple(a + k for a in self.alphas))

    def esup(self, lo, hi) -> float:
        """Essential supremum over the open interval (lo, hi)."""
        best = 0.0
        for plo, phi, c, a in self.pieces():
            a_ = max(lo, plo)
            b_ = min(hi, phi)
            if b_ <= a_ or c == 0:
                continue
            if math.isinf(c):
                return INF
            if a > 0:
                val = INF if math.isinf(b_) else c * b_**a
            elif a < 0:
                val = INF if a_ == 0 else c * a_**a
            else:
                val = c
            best = max(best, val)
        return best


# ---------------------------------------------------------------------------
# Public weight variants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Power:
    """``c * x**alpha``."""

    c: float
    alpha: float

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise WeightFormatError("c", "coefficient must be positive and finite")
        if not math.isfinite(self.alpha):
            raise WeightFormatError("alpha", "exponent must be finite")


@dataclass(frozen=True)
class TwoPiecePower:
    """``c1 * x**alpha`` below ``knot`` and ``c2 * x**beta`` from ``knot`` on."""

    c1: float
    alpha: float
    c2: float
    beta: float
    knot: float

    def __post_init__(self):
        for name in ("c1", "c2", "knot"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise WeightFormatError(name, "must be positive and finite")
        for name in ("alpha", "beta"):
            if not math.isfinite(getattr(self, name)):
                raise WeightFormatError(name, "exponent must be finite")


@dataclass(frozen=True)
class StepTable:
    """Right-continuous step function, zero outside ``[breaks[0], breaks[-1])``.

    ``values[i]`` is taken on ``[breaks[i], breaks[i+1])``.  A leading
    breakpoint of 0 lets the first step reach down to the origin.
    """

    breaks: tuple
    values: tuple

    def __post_init__(self):
        breaks = tuple(float(b) for b in self.breaks)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "values", values)
        if len(breaks) < 2:
            raise WeightFormatError("breaks", "need at least two breakpoints")
        if len(values) != len(breaks) - 1:
            raise WeightFormatError("values", "need exactly one value per step")
        if breaks[0] < 0 or not all(math.isfinite(b) for b in breaks):
            raise WeightFormatError("breaks", "breakpoints must be finite and nonnegative")
        if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
            raise WeightFormatError("breaks", "breakpoints must be strictly increasing")
        if any(not (v >= 0 and math.isfinite(v)) for v in values):
            raise WeightFormatError("values", "step values must be finite and nonnegative")


@dataclass(frozen=True)
class Zero:
    """The zero weight."""


WeightSpec = Union[Power, TwoPiecePower, StepTable, Zero]


def to_pieces(w) -> PiecewisePower:
    """Piecewise-power representation of a weight."""
    if isinstance(w, PiecewisePower):
        return w
    if isinstance(w, Power):
        return PiecewisePower((0.0, INF), (w.c,), (w.alpha,))
    if isinstance(w, TwoPiecePower):
        return PiecewisePower((0.0, w.knot, INF), (w.c1, w.c2), (w.alpha, w.beta))
    if isinstance(w, Zero):
        return PiecewisePower((0.0, INF), (0.0,), (0.0,))
    if isinstance(w, StepTable):
        edges = list(w.breaks) + [INF]
        coeffs = list(w.values) + [0.0]
        if edges[0] > 0:
            edges = [0.0] + edges
            coeffs = [0.0] + coeffs
        return PiecewisePower(tuple(edges), tuple(coeffs), tuple(0.0 for _ in coeffs))
    raise TypeError(f"not a weight: {w!r}")


def breakpoints(w) -> tuple:
    return to_pieces(w).breakpoints


def _check_positive(x):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("argument must be a positive real")
    return arr


def evaluate(w, x):
    """Pointwise value of ``w`` at ``x > 0`` (scalar or array)."""
    _check_positive(x)
    out = to_pieces(w)(x)
    return float(out) if np.ndim(out) == 0 else out


def integrate_lower(w, t):
    """``int_0^t w``; ``inf`` when the integral diverges at the origin."""
    _check_positive(t)
    out = to_pieces(w).lower(t)
    return ExtendedValue(out) if np.ndim(out) == 0 else out


def integrate_upper(w, t):
    """``int_t^inf w``; ``inf`` when the tail diverges."""
    _check_positive(t)
    out = to_pieces(w).upper(t)
    return ExtendedValue(out) if np.ndim(out) == 0 else out


def total_mass(w) -> ExtendedValue:
    return ExtendedValue(to_pieces(w).total())


def scale_weight(w, lam: float):
    """``lam * w`` within the same variant."""
    if lam <= 0:
        raise ValueError("scale factor must be positive")
    if isinstance(w, Power):
        return Power(w.c * lam, w.alpha)
    if isinstance(w, TwoPiecePower):
        return TwoPiecePower(w.c1 * lam, w.alpha, w.c2 * lam, w.beta, w.knot)
    if isinstance(w, StepTable):
        return StepTable(w.breaks, tuple(v * lam for v in w.values))
    if isinstance(w, Zero):
        return w
    raise TypeError(f"not a weight: {w!r}")


def dual_transform(w, kind: str):
    """Image of ``w`` under ``x -> 1/t``.

    ``kind="density"`` gives ``w(1/t) / t**2`` (a weight integrated against
    ``dt``), ``kind="plain"`` gives ``w(1/t)``.
    """
    kind = kind.lower()
    if kind not in ("density", "plain"):
        raise UnsupportedTransform(f"unknown transform kind {kind!r}")
    shift = 2.0 if kind == "density" else 0.0
    if isinstance(w, Zero):
        return w
    if isinstance(w, Power):
        return Power(w.c, -w.alpha - shift)
    if isinstance(w, TwoPiecePower):
        return TwoPiecePower(w.c2, -w.beta - shift, w.c1, -w.alpha - shift, 1.0 / w.knot)
    if isinstance(w, StepTable):
        if w.breaks[0] == 0:
            raise UnsupportedTransform("a step reaching the origin maps to an unbounded support")
        new_breaks = tuple(1.0 / b for b in reversed(w.breaks))
        values = tuple(reversed(w.values))
        if kind == "plain":
            return StepTable(new_breaks, values)
        # keep the mass of each reflected step: int v/t^2 over [a, b) is v (b - a)
        # in the original variable, spread uniformly over the new step
        old = tuple(reversed(w.breaks))
        new_vals = []
        for i, v in enumerate(values):
            length_old = old[i] - old[i + 1]
            length_new = new_breaks[i + 1] - new_breaks[i]
            new_vals.append(v * length_old / length_new)
        return StepTable(new_breaks, tuple(new_vals))
    raise UnsupportedTransform(f"no dual transform for {type(w).__name__}")


# ---------------------------------------------------------------------------
# Cumulative profiles and grids
# ---------------------------------------------------------------------------


@dataclass
class CumulativeProfile:
    """Cached ``t -> int_0^t w`` (``direction="lower"``) or ``int_t^inf w``."""

    weight: object
    direction: str = "lower"
    cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.direction not in ("lower", "upper"):
            raise ValueError("direction must be 'lower' or 'upper'")
        self._pieces = to_pieces(self.weight)
        self._lock = threading.Lock()

    def __call__(self, t: float) -> ExtendedValue:
        t = float(t)
        hit = self.cache.get(t)
        if hit is not None:
            return hit
        val = integrate_lower(self.weight, t) if self.direction == "lower" else integrate_upper(self.weight, t)
        with self._lock:
            self.cache[t] = val
        return val

    def warm(self, points: Iterable[float]) -> None:
        for t in points:
            self(t)

    def table(self):
        items = sorted(self.cache.items())
        return [(t, float(v)) for t, v in items]


@dataclass(frozen=True)
class Grid:
    """Log-spaced points from ``a`` to ``b`` inclusive."""

    a: float
    b: float
    n: int
    points: np.ndarray = field(repr=False, compare=False)

    @property
    def ratio(self) -> float:
        return (self.b / self.a) ** (1.0 / (self.n - 1))


def make_log_grid(a: float, b: float, n: int) -> Grid:
    if not (a > 0 and b > a and math.isfinite(b)):
        raise ValueError(f"need 0 < a < b < inf, got a={a}, b={b}")
    if int(n) != n or n < 2:
        raise ValueError(f"need an integer n >= 2, got {n}")
    n = int(n)
    pts = np.exp(np.linspace(math.log(a), math.log(b), n))
    pts[0], pts[-1] = a, b
    pts.setflags(write=False)
    return Grid(float(a), float(b), n, pts)


# ---------------------------------------------------------------------------
# JSON form
# ---------------------------------------------------------------------------

_FIELDS = {
    "power": ("c", "alpha"),
    "two_piece": ("c1", "alpha", "c2", "beta", "knot"),
    "step": ("breaks", "values"),
    "zero": (),
}


def weight_from_dict(data, path: str = "weight"):
    """Parse the JSON weight form, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise WeightFormatError(path, "expected an object")
    kind = data.get("kind")
    if kind not in _FIELDS:
        raise WeightFormatError(f"{path}.kind", f"unknown weight kind {kind!r}")
    allowed = set(_FIELDS[kind]) | {"kind"}
    for key in data:
        if key not in allowed:
            raise WeightFormatError(f"{path}.{key}", "unknown key")
    for key in _FIELDS[kind]:
        if key not in data:
            raise WeightFormatError(f"{path}.{key}", "missing required key")
    try:
        if kind == "power":
            return Power(_num(data, "c", path), _num(data, "alpha", path))
        if kind == "two_piece":
            return TwoPiecePower(*(_num(data, k, path) for k in _FIELDS[kind]))
        if kind == "step":
            return StepTable(_nums(data, "breaks", path), _nums(data, "values", path))
    except WeightFormatError as err:
        if err.path.startswith(path):
            raise
        raise WeightFormatError(f"{path}.{err.path}", str(err).split(": ", 1)[-1]) from None
    return Zero()


def _num(data, key, path) -> float:
    val = data[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise WeightFormatError(f"{path}.{key}", "expected a number")
    return float(val)


def _nums(data, key, path) -> tuple:
    val = data[key]
    if not isinstance(val, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in val):
        raise WeightFormatError(f"{path}.{key}", "expected a list of numbers")
    return tuple(float(x) for x in val)


def weight_to_dict(w) -> dict:
    if isinstance(w, Power):
        return {"kind": "power", "c": w.c, "alpha": w.alpha}
    if isinstance(w, TwoPiecePower):
        return {"kind": "two_piece", "c1": w.c1, "alpha": w.alpha, "c2": w.c2, "beta": w.beta, "knot": w.knot}
    if isinstance(w, StepTable):
        return {"kind": "step", "breaks": list(w.breaks), "values": list(w.values)}
    if isinstance(w, Zero):
        return {"kind": "zero"}
    raise TypeError(f"not a weight: {w!r}")

