"""Auxiliary weights built from base weights, and a tabulated weight type.

``WeightFn`` wraps any vectorised nonnegative function on (0, inf) and
provides its lower and upper cumulative integrals.  Closed forms are used
when the caller supplies them; otherwise the integrals are tabulated once by
Gauss-Legendre quadrature in ``log x`` with power-law extrapolation beyond
the table range.
"""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np

from .weights import (
    INF,
    PiecewisePower,
    Zero,
    ext_div,
    ext_pow,
    powprod,
    to_pieces,
)

TABLE_RANGE = (1e-12, 1e12)
NODES_PER_DECADE = 48
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_SLOPE_EPS = 1e-9


class ConditionError(ValueError):
    """Raised when a weight violates the integrability hypothesis of a construction."""


def _clean(values):
    arr = np.asarray(values, dtype=float)
    if np.any(np.isnan(arr)):
        arr = np.where(np.isnan(arr), 0.0, arr)
    return arr


def merge_breaks(*groups) -> tuple:
    out = set()
    for g in groups:
        out.update(float(b) for b in g if b > 0 and math.isfinite(b))
    return tuple(sorted(out))


def _power_tail(f0, x0, slope, towards_zero: bool):
    """Integral of ``f0 * (x/x0)**slope`` from 0 to x0 or from x0 to inf."""
    f0 = np.asarray(f0, dtype=float)
    out = np.zeros(f0.shape)
    pos = f0 > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if towards_zero:
            ok = slope + 1.0 > _SLOPE_EPS
            val = f0 * x0 / (slope + 1.0)
        else:
            ok = slope + 1.0 < -_SLOPE_EPS
            val = f0 * x0 / (-slope - 1.0)
    out = np.where(pos, np.where(ok & np.isfinite(f0), val, INF), 0.0)
    return out


def _log_slope(f1, f2, x1, x2):
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.log(f2 / f1) / math.log(x2 / x1)
    return np.where(np.isfinite(s), s, 0.0)


def stable_difference(fa, fb, ra, rb):
    """``int_a^b`` from forward (``fa``, ``fb``) and reverse (``ra``, ``rb``)
    antiderivatives, taking whichever anchor carries less mass at the far end
    so the subtraction does not cancel."""
    return np.where(fb <= ra, fb - fa, ra - rb)


class WeightFn:
    """A nonnegative function on (0, inf) with lower/upper cumulatives.

    Parameters
    ----------
    fn : callable
        Vectorised evaluator; may return ``inf``.
    label : str
        Provenance tag shown in reports.
    breaks : sequence of float
        Points where ``fn`` or its derivatives jump; added to the table nodes.
    lower, upper : callable, optional
        Closed forms of ``int_0^t fn`` and ``int_t^inf fn``.
    """

    def __init__(self, fn, label: str = "", breaks=(), lower=None, upper=None, table_range=TABLE_RANGE):
        self._fn = fn
        self.label = label
        self.breaks = merge_breaks(breaks)
        self._lower_cf = lower
        self._upper_cf = upper
        self.table_range = table_range

    def __call__(self, x):
        out = _clean(self._fn(np.asarray(x, dtype=float)))
        return out[()] if out.ndim == 0 else out

    # -- table ------------------------------------------------------------

    @cached_property
    def _table(self):
        lo, hi = self.table_range
        decades = math.log10(hi / lo)
        base = np.exp(np.linspace(math.log(lo), math.log(hi), int(round(decades * NODES_PER_DECADE)) + 1))
        extra = [b for b in self.breaks if lo < b < hi]
        nodes = np.unique(np.concatenate([base, extra])) if extra else base
        logs = np.log(nodes)
        half = 0.5 * np.diff(logs)
        mid = 0.5 * (logs[1:] + logs[:-1])
        ys = mid[:, None] + half[:, None] * _GL_X[None, :]
        xs = np.exp(ys)
        fv = np.asarray(self(xs.ravel()), dtype=float).reshape(xs.shape)
        weights = half[:, None] * _GL_W[None, :] * xs
        with np.errstate(invalid="ignore", over="ignore"):
            cells = np.sum(np.where(fv == 0, 0.0, fv * weights), axis=1)
        cells = np.where(np.isnan(cells), INF, cells)
        f_nodes = np.asarray(self(nodes[:2]), dtype=float)
        f_tail = np.asarray(self(nodes[-2:]), dtype=float)
        head = float(_power_tail(f_nodes[0], nodes[0], _log_slope(f_nodes[0], f_nodes[1], nodes[0], nodes[1]), True))
        tail = float(_power_tail(f_tail[1], nodes[-1], _log_slope(f_tail[0], f_tail[1], nodes[-2], nodes[-1]), False))
        inf_cells = ~np.isfinite(cells)
        finite_cells = np.where(inf_cells, 0.0, cells)
        anti = np.concatenate([[0.0], np.cumsum(finite_cells)])
        n_inf = np.concatenate([[0], np.cumsum(inf_cells)])
        rev = np.concatenate([np.cumsum(finite_cells[::-1])[::-1], [0.0]])
        return {
            "nodes": nodes,
            "anti": anti,
            "n_inf": n_inf,
            "rev": rev,
            "head": head,
            "tail": tail,
        }

    def _partial(self, a, b):
        """Gauss-Legendre integral over [a, b] (arrays, a <= b, both positive)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        la, lb = np.log(a), np.log(b)
        half = 0.5 * (lb - la)
        mid = 0.5 * (lb + la)
        ys = mid[..., None] + half[..., None] * _GL_X
        xs = np.exp(ys)
        fv = np.asarray(self(xs.reshape(-1)), dtype=float).reshape(xs.shape)
        w = half[..., None] * _GL_W * xs
        with np.errstate(invalid="ignore", over="ignore"):
            out = np.sum(np.where(fv == 0, 0.0, fv * w), axis=-1)
        return np.where(np.isnan(out), INF, out)

    def _anti(self, t):
        """Return (finite part, count of infinite cells) of int_{nodes[0]}^t."""
        tab = self._table
        nodes = tab["nodes"]
        k = np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, len(nodes) - 2)
        part = self._partial(nodes[k], np.maximum(t, nodes[k]))
        inf_part = ~np.isfinite(part)
        return tab["anti"][k] + np.where(inf_part, 0.0, part), tab["n_inf"][k] + inf_part

    def _anti_rev(self, t):
        """Finite part of int_t^{nodes[-1]}; pairs with ``_anti`` for differences."""
        tab = self._table
        nodes = tab["nodes"]
        k = np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, len(nodes) - 2)
        part = self._partial(np.minimum(t, nodes[k + 1]), nodes[k + 1])
        return tab["rev"][k + 1] + np.where(np.isfinite(part), part, 0.0)

    def _outside(self, t, towards_zero: bool):
        f1 = np.asarray(self(t), dtype=float)
        f2 = np.asarray(self(t * 1.01), dtype=float)
        slope = _log_slope(f1, f2, 1.0, 1.01)
        return _power_tail(f1, t, slope, towards_zero)

    def lower(self, t):
        """``int_0^t fn``."""
        t = np.asarray(t, dtype=float)
        if self._lower_cf is not None:
            out = np.asarray(self._lower_cf(t), dtype=float)
            return out[()] if out.ndim == 0 else out
        tab = self._table
        nodes = tab["nodes"]
        tt = np.clip(t, nodes[0], nodes[-1])
        fin, n_inf = self._anti(tt)
        inside = np.where(n_inf > 0, INF, tab["head"] + fin)
        out = inside
        if np.any(t < nodes[0]):
            out = np.where(t < nodes[0], self._outside(np.minimum(t, nodes[0]), True), out)
        if np.any(t > nodes[-1]):
            far = np.maximum(t, nodes[-1])
            out = np.where(t > nodes[-1], inside + self._partial(np.full(far.shape, nodes[-1]), far), out)
        return out[()] if out.ndim == 0 else out

    def upper(self, t):
        """``int_t^inf fn``."""
        t = np.asarray(t, dtype=float)
        if self._upper_cf is not None:
            out = np.asarray(self._upper_cf(t), dtype=float)
            return out[()] if out.ndim == 0 else out
        tab = self._table
        nodes = tab["nodes"]
        tt = np.clip(t, nodes[0], nodes[-1])
        k = np.clip(np.searchsorted(nodes, tt, side="right") - 1, 0, len(nodes) - 2)
        part = self._partial(tt, np.maximum(nodes[k + 1], tt))
        has_inf = (tab["n_inf"][-1] - tab["n_inf"][k + 1]) > 0
        inside = np.where(has_inf, INF, tab["tail"] + tab["rev"][k + 1] + part)
        out = inside
        if np.any(t > nodes[-1]):
            out = np.where(t > nodes[-1], self._outside(np.maximum(t, nodes[-1]), False), out)
        if np.any(t < nodes[0]):
            near = np.minimum(t, nodes[0])
            out = np.where(t < nodes[0], inside + self._partial(near, np.full(near.shape, nodes[0])), out)
        return out[()] if out.ndim == 0 else out

    def total(self) -> float:
        if self._lower_cf is not None and self._upper_cf is not None:
            return float(self._lower_cf(1.0)) + float(self._upper_cf(1.0))
        tab = self._table
        if tab["n_inf"][-1] > 0:
            return INF
        return float(tab["head"] + tab["anti"][-1] + tab["tail"])

    def between(self, a, b):
        """``int_a^b fn`` for 0 < a <= b < inf (vectorised)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self._lower_cf is not None:
            la = np.asarray(self.lower(a), dtype=float)
            if np.all(np.isfinite(la)):
                return np.asarray(self.lower(b), dtype=float) - la
        nodes = self._table["nodes"]
        if np.all(a >= nodes[0]) and np.all(b <= nodes[-1]):
            fa, ia = self._anti(a)
            fb, ib = self._anti(b)
            return np.where(ib > ia, INF, np.maximum(stable_difference(fa, fb, self._anti_rev(a), self._anti_rev(b)), 0.0))
        return self._partial(a, b)


class ExactWeight(WeightFn):
    """A base weight with closed-form cumulatives."""

    def __init__(self, w, label: str = ""):
        pieces = to_pieces(w)
        super().__init__(pieces, label or type(w).__name__, pieces.breakpoints, pieces.lower, pieces.upper)
        self.spec = w
        self.pieces = pieces

    def between(self, a, b):
        return np.asarray(self.pieces.integral(a, b), dtype=float)

    def total(self) -> float:
        return self.pieces.total()

    def esup(self, lo, hi) -> float:
        return self.pieces.esup(lo, hi)


def as_weight_fn(w, label: str = "") -> WeightFn:
    if isinstance(w, WeightFn):
        return w
    return ExactWeight(w, label)


def is_zero(w) -> bool:
    if isinstance(w, Zero):
        return True
    if isinstance(w, ExactWeight):
        return all(c == 0 for c in w.pieces.coeffs)
    if isinstance(w, PiecewisePower):
        return all(c == 0 for c in w.coeffs)
    return False


def product(label: str, *factors) -> WeightFn:
    """Pointwise product of powers ``prod(f_i ** e_i)`` as a ``WeightFn``."""
    fns = [(as_weight_fn(f), e) for f, e in factors]
    breaks = merge_breaks(*(f.breaks for f, _ in fns))
    return WeightFn(lambda x: powprod(*((f(x), e) for f, e in fns)), label, breaks)


def _conj(s: float) -> float:
    if s <= 1:
        raise ValueError(f"exponent must exceed 1, got {s}")
    return s / (s - 1.0)


def _base_power(v, gamma: float):
    """``v**gamma`` as an exact piecewise power when possible."""
    if isinstance(v, WeightFn) and not isinstance(v, ExactWeight):
        return WeightFn(lambda x: ext_pow(v(x), gamma), f"{v.label}^{gamma:g}", v.breaks)
    return ExactWeight(to_pieces(v.spec if isinstance(v, ExactWeight) else v).power(gamma))


def _lower_finite_everywhere(g: WeightFn) -> bool:
    probe = max(g.breaks + (1.0,)) * 2.0
    if isinstance(g, ExactWeight):
        return bool(np.isfinite(g.lower(probe))) and math.isfinite(g.pieces.coeffs[-1])
    return bool(np.isfinite(g.lower(g.table_range[1])))


def _upper_finite_everywhere(g: WeightFn) -> bool:
    probe = min(g.breaks + (1.0,)) * 0.5
    if isinstance(g, ExactWeight):
        return bool(np.isfinite(g.upper(probe))) and math.isfinite(g.pieces.coeffs[0])
    return bool(np.isfinite(g.upper(g.table_range[0])))


def phi_pair(v, s: float):
    """Return ``(phi, Phi)`` with ``Phi(x) = (int_0^x v^(1-s'))^(1/(s'+1))``.

    ``phi`` is normalised so that ``Phi`` is exactly its lower cumulative,
    i.e. ``phi = Phi'``; ``Phi^{-s} phi^{1-s}`` is then a constant multiple
    ``(s'+1)^(s-1)`` of ``v``.
    """
    sp = _conj(s)
    g = _base_power(as_weight_fn(v), 1.0 - sp)
    if not _lower_finite_everywhere(g):
        raise ConditionError("int_0^x v^(1-s') is infinite for some x > 0")
    k = 1.0 / (sp + 1.0)
    F_inf = g.total()

    def Phi_fn(x):
        return ext_pow(g.lower(x), k)

    def phi_fn(x):
        return powprod((g.lower(x), -sp * k), (g(x), 1.0)) * k

    def phi_upper(x):
        return np.maximum(ext_pow(F_inf, k) - Phi_fn(x), 0.0) if math.isfinite(F_inf) else np.full(np.shape(x), INF)

    tag = getattr(v, "label", type(v).__name__)
    phi = WeightFn(phi_fn, f"phi[{tag};{s:g}]", g.breaks, lower=Phi_fn, upper=phi_upper)
    Phi = WeightFn(Phi_fn, f"Phi[{tag};{s:g}]", g.breaks)
    return phi, Phi


def psi_pair(v, s: float):
    """Return ``(psi, Psi)`` with ``Psi(x) = (int_x^inf v^(1-s'))^(1/(s'+1))``
    and ``Psi`` exactly the upper cumulative of ``psi``."""
    sp = _conj(s)
    g = _base_power(as_weight_fn(v), 1.0 - sp)
    if not _upper_finite_everywhere(g):
        raise ConditionError("int_x^inf v^(1-s') is infinite for some x > 0")
    k = 1.0 / (sp + 1.0)
    G_0 = g.total()

    def Psi_fn(x):
        return ext_pow(g.upper(x), k)

    def psi_fn(x):
        return powprod((g.upper(x), -sp * k), (g(x), 1.0)) * k

    def psi_lower(x):
        return np.maximum(ext_pow(G_0, k) - Psi_fn(x), 0.0) if math.isfinite(G_0) else np.full(np.shape(x), INF)

    tag = getattr(v, "label", type(v).__name__)
    psi = WeightFn(psi_fn, f"psi[{tag};{s:g}]", g.breaks, lower=psi_lower, upper=Psi_fn)
    Psi = WeightFn(Psi_fn, f"Psi[{tag};{s:g}]", g.breaks)
    return psi, Psi


def v1(v) -> WeightFn:
    """``V_1(x) = (int_x^inf V^{-2} v)^(1/3)``, requires ``V(x) < inf``."""
    vf = as_weight_fn(v)
    if is_zero(vf):
        return WeightFn(lambda x: np.zeros(np.shape(x)), "V1[0]")
    if not _lower_finite_everywhere(vf):
        raise ConditionError("V(x) = int_0^x v is infinite for some x > 0")
    V_inf = vf.total()

    def fn(x):
        V = vf.lower(x)
        if math.isinf(V_inf):
            return ext_pow(V, -1.0 / 3.0)
        # 1/V(x) - 1/V(inf) written without cancellation
        return ext_pow(ext_div(vf.upper(x), V * V_inf), 1.0 / 3.0)

    return WeightFn(fn, f"V1[{vf.label}]", vf.breaks)


def v1_star(v) -> WeightFn:
    """``V_1^*(x) = (int_0^x V_*^{-2} v)^(1/3)``, requires ``V_*(x) < inf``."""
    vf = as_weight_fn(v)
    if is_zero(vf):
        return WeightFn(lambda x: np.zeros(np.shape(x)), "V1*[0]")
    if not _upper_finite_everywhere(vf):
        raise ConditionError("V_*(x) = int_x^inf v is infinite for some x > 0")
    V0 = vf.total()

    def fn(x):
        Vs = vf.upper(x)
        if math.isinf(V0):
            return ext_pow(Vs, -1.0 / 3.0)
        return ext_pow(ext_div(vf.lower(x), Vs * V0), 1.0 / 3.0)

    return WeightFn(fn, f"V1*[{vf.label}]", vf.breaks)


def composite_kernel(u, base, exponent: float, direction: str, label: str = "") -> WeightFn:
    """``tau -> int u * base**exponent`` from 0 (``"from_zero"``) or to inf
    (``"from_infinity"``), returned as a function of ``tau``."""
    uf = as_weight_fn(u)
    if direction not in ("from_zero", "from_infinity"):
        raise ValueError("direction must be 'from_zero' or 'from_infinity'")
    if is_zero(uf):
        return WeightFn(lambda x: np.zeros(np.shape(x)), label or "0")
    integrand = product(f"{uf.label}*{getattr(base, 'label', '')}^{exponent:g}", (uf, 1.0), (base, exponent))
    cum = integrand.lower if direction == "from_zero" else integrand.upper
    kernel = WeightFn(cum, label or f"K[{integrand.label}]", integrand.breaks)
    kernel.density = integrand
    return kernel


def u1(u, v, p: float, direction: str) -> WeightFn:
    """``U_1(x) = int_x^inf u V_1^{4/p}`` (``"upper"``) or
    ``U_1^*(x) = int_0^x u [V_1^*]^{4/p}`` (``"lower_star"``)."""
    if direction == "upper":
        return composite_kernel(u, v1(v), 4.0 / p, "from_infinity", "U1")
    if direction == "lower_star":
        return composite_kernel(u, v1_star(v), 4.0 / p, "from_zero", "U1*")
    raise ValueError("direction must be 'upper' or 'lower_star'")


def inner_transform_weights(v, s: float, side: str):
    """Closed-form inner weights used by the second and fourth iterated
    inequalities.

    ``side="c2"`` returns ``(phi_hat, Phi_hat)`` with
    ``Phi_hat(x) = (int_0^x G^{-2s'/(1+s')} g)^{1/(1+s')}`` where
    ``g = v^(1-s')`` and ``G(t) = int_t^inf g``; ``side="c4"`` returns
    ``(psi_hat, Psi_hat)``, the mirror image built from ``F(t) = int_0^t g``.
    In both cases the density is the exact derivative of its cumulative.
    """
    sp = _conj(s)
    g = _base_power(as_weight_fn(v), 1.0 - sp)
    k = 1.0 / (1.0 + sp)
    kappa = (sp - 1.0) / (sp + 1.0)
    coef = (1.0 + sp) / (sp - 1.0)
    tag = getattr(v, "label", type(v).__name__)
    if side == "c2":
        if not _upper_finite_everywhere(g):
            raise ConditionError("int_x^inf v^(1-s') is infinite for some x > 0")
        G0 = g.total()
        G0_term = 0.0 if math.isinf(G0) else G0 ** (-kappa)

        def J(x):
            return np.maximum(coef * (ext_pow(g.upper(x), -kappa) - G0_term), 0.0)

        def Phi_hat(x):
            return ext_pow(J(x), k)

        def phi_hat(x):
            return k * powprod((J(x), -sp * k), (g.upper(x), -2.0 * sp * k), (g(x), 1.0))

        dens = WeightFn(phi_hat, f"phi_hat[{tag};{s:g}]", g.breaks, lower=Phi_hat)
        return dens, WeightFn(Phi_hat, f"Phi_hat[{tag};{s:g}]", g.breaks)
    if side == "c4":
        if not _lower_finite_everywhere(g):
            raise ConditionError("int_0^x v^(1-s') is infinite for some x > 0")
        Finf = g.total()
        F_term = 0.0 if math.isinf(Finf) else Finf ** (-kappa)

        def K(x):
            return np.maximum(coef * (ext_pow(g.lower(x), -kappa) - F_term), 0.0)

        def Psi_hat(x):
            return ext_pow(K(x), k)

        def psi_hat(x):
            return k * powprod((K(x), -sp * k), (g.lower(x), -2.0 * sp * k), (g(x), 1.0))

        dens = WeightFn(psi_hat, f"psi_hat[{tag};{s:g}]", g.breaks, upper=Psi_hat)
        return dens, WeightFn(Psi_hat, f"Psi_hat[{tag};{s:g}]", g.breaks)
    raise ValueError("side must be 'c2' or 'c4'")
