"""Brute-force estimation of best constants on a log grid.

Test functions are piecewise constant on the geometric cells of a grid.  The
inner Hardy/Copson operators are applied exactly (cell masses of the weight
against the constant pieces); the outer power lift and the target norm use
Gauss-Legendre quadrature in log x on every cell.  The grid is padded by a
few coarse decades on both sides so that the left-hand side keeps most of its
mass; whatever lies beyond the padding is dropped, which only lowers the
reported ratios.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .transforms import ExactWeight, WeightFn, as_weight_fn, is_zero
from .weights import INF, Grid, ext_div, ext_pow, make_log_grid, powprod

__all__ = [
    "CONES",
    "FORMS",
    "DiscreteFunction",
    "InequalitySpec",
    "OracleEstimate",
    "apply_T_pu",
    "apply_copson",
    "apply_hardy",
    "best_constant_estimate",
    "cone_project",
    "default_grid",
    "discrete_norm",
    "evaluate_ratio",
    "fubini_sides",
    "inherit",
    "stieltjes_sides",
]

FORMS = ("IHI1", "IHI2", "IHI3", "IHI4", "PlainHardy", "PlainCopson", "ConeHardy", "ConeCopson")
CONES = ("Nonneg", "Dec", "Inc")

# (direction of the inner cumulative of h, direction of the outer lift)
_ITERATED = {
    "IHI1": ("lower", "lower"),
    "IHI2": ("upper", "lower"),
    "IHI3": ("upper", "upper"),
    "IHI4": ("lower", "upper"),
}
_SINGLE = {"PlainHardy": "lower", "ConeHardy": "lower", "PlainCopson": "upper", "ConeCopson": "upper"}

_GL_M = 4
_PAD_DECADES = 6
_PAD_PER_DECADE = 4


def default_grid() -> Grid:
    return make_log_grid(1e-6, 1e6, 4096)


def _gl_partial_matrix(m: int):
    """Nodes, weights and ``A[k, l] = int_{-1}^{xi_k} ell_l`` for the
    Lagrange basis through the Gauss-Legendre nodes."""
    xi, wt = np.polynomial.legendre.leggauss(m)
    A = np.empty((m, m))
    P = np.polynomial.polynomial
    for l in range(m):
        others = np.delete(xi, l)
        coef = P.polyfromroots(others) / np.prod(xi[l] - others)
        anti = P.polyint(coef)
        A[:, l] = P.polyval(xi, anti) - P.polyval(-1.0, anti)
    return xi, wt, A


_XI, _WT, _A = _gl_partial_matrix(_GL_M)


def _mul(a, b):
    """``a * b`` with ``0 * inf = 0``."""
    with np.errstate(invalid="ignore"):
        out = np.multiply(a, b)
    bad = np.isnan(out)
    if bad.any():
        out[bad] = 0.0
    return out


def _pow(a, e):
    """``a ** e`` for nonnegative ``a`` with ``0 ** 0 = 1`` and ``0 ** neg = inf``."""
    with np.errstate(divide="ignore", over="ignore"):
        return np.power(a, e)


@dataclass(frozen=True)
class DiscreteFunction:
    """A nonnegative function sampled on a log grid.

    ``values`` has one entry per cell (piecewise constant, cell ``j`` is
    ``[x_j, x_{j+1})``) or one per grid point (piecewise linear).  For cell
    functions ``extend="left"`` continues the first value down to 0 and
    ``extend="right"`` continues the last value to infinity; otherwise the
    function vanishes off ``[a, b]``.
    """

    grid: Grid
    values: np.ndarray
    extend: str = "none"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or len(vals) not in (self.grid.n - 1, self.grid.n):
            raise ValueError(f"expected {self.grid.n - 1} cell values or {self.grid.n} node values, got {vals.shape}")
        if np.any(vals < 0) or np.any(np.isnan(vals)):
            raise ValueError("values must be nonnegative")
        if self.extend not in ("none", "left", "right"):
            raise ValueError("extend must be 'none', 'left' or 'right'")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def at(self) -> str:
        return "cells" if len(self.values) == self.grid.n - 1 else "nodes"

    @property
    def edges(self) -> np.ndarray:
        return self.grid.points

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        e = self.edges
        if self.at == "nodes":
            return np.interp(x, e, self.values)
        k = np.searchsorted(e, x, side="right") - 1
        inside = (k >= 0) & (k < len(self.values))
        out = np.where(inside, self.values[np.clip(k, 0, len(self.values) - 1)], 0.0)
        if self.extend == "left":
            out = np.where(x < e[0], self.values[0], out)
        if self.extend == "right":
            out = np.where(x >= e[-1], self.values[-1], out)
        return out

    def scaled(self, lam: float) -> "DiscreteFunction":
        return DiscreteFunction(self.grid, self.values * lam, self.extend)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["node", "value"])
        nodes = self.edges if self.at == "nodes" else self.edges[:-1]
        for x, val in zip(nodes, self.values):
            writer.writerow([f"{x:.12g}", f"{val:.12g}"])
        return buf.getvalue()


def inherit(h: DiscreteFunction, grid: Grid) -> DiscreteFunction:
    """The same piecewise-constant function on a finer grid whose cells nest
    inside those of ``h.grid``."""
    if h.at != "cells":
        raise ValueError("only cell functions can be transferred")
    mids = np.sqrt(grid.points[:-1] * grid.points[1:])
    k = np.clip(np.searchsorted(h.edges, mids, side="right") - 1, 0, len(h.values) - 1)
    return DiscreteFunction(grid, h.values[k], h.extend)


def cone_project(h: DiscreteFunction, cone: str) -> DiscreteFunction:
    """Smallest monotone majorant in the cone (running max from the right for
    ``Dec``, from the left for ``Inc``)."""
    vals = np.maximum(np.asarray(h.values, dtype=float), 0.0)
    return DiscreteFunction(h.grid, _project(vals, cone), h.extend)


def _project(vals, cone: str):
    if cone == "Dec":
        return np.maximum.accumulate(vals[..., ::-1], axis=-1)[..., ::-1]
    if cone == "Inc":
        return np.maximum.accumulate(vals, axis=-1)
    if cone == "Nonneg":
        return vals
    raise ValueError(f"unknown cone {cone!r}")


# ---------------------------------------------------------------------------
# Direct operators
# ---------------------------------------------------------------------------


def _cell_masses(weight: WeightFn, edges):
    return np.asarray(weight.between(edges[:-1], edges[1:]), dtype=float)


def _node_cumulative(h: DiscreteFunction, weight: WeightFn, direction: str, power: float = 1.0):
    if h.at != "cells":
        raise ValueError("operators act on cell functions")
    e = h.edges
    masses = _cell_masses(weight, e)
    pieces = powprod((h.values, power), (masses, 1.0))
    if direction == "lower":
        head = 0.0
        if h.extend == "left" and h.values[0] > 0:
            head = float(powprod((h.values[0], power), (weight.lower(e[0]), 1.0)))
        return head + np.concatenate([[0.0], np.cumsum(pieces)])
    tail = 0.0
    if h.extend == "right" and h.values[-1] > 0:
        tail = float(powprod((h.values[-1], power), (weight.upper(e[-1]), 1.0)))
    return tail + np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])


def _lebesgue() -> WeightFn:
    from .weights import Power

    return as_weight_fn(Power(1.0, 0.0), "dx")


def apply_hardy(h: DiscreteFunction) -> DiscreteFunction:
    """``t -> int_0^t h`` at the grid points."""
    return DiscreteFunction(h.grid, _node_cumulative(h, _lebesgue(), "lower"))


def apply_copson(h: DiscreteFunction) -> DiscreteFunction:
    """``t -> int_t^inf h`` at the grid points."""
    return DiscreteFunction(h.grid, _node_cumulative(h, _lebesgue(), "upper"))


def apply_T_pu(h: DiscreteFunction, u, p: float, base: str = "H") -> DiscreteFunction:
    """``(T(h^p u))^(1/p)`` at the grid points with ``T`` the Hardy (``"H"``)
    or Copson (``"Hstar"``) operator."""
    if not p > 0:
        raise ValueError("p must be positive")
    direction = {"H": "lower", "Hstar": "upper"}[base]
    vals = _node_cumulative(h, as_weight_fn(u, "u"), direction, power=p)
    return DiscreteFunction(h.grid, ext_pow(vals, 1.0 / p))


def discrete_norm(f: DiscreteFunction, p: float, w, interval=(0.0, INF)) -> float:
    """Weighted norm of a discrete function restricted to ``interval``."""
    wf = as_weight_fn(w, "w")
    lo, hi = interval
    e = f.edges
    if f.at == "cells":
        a = np.clip(e[:-1], lo, hi)
        b = np.clip(e[1:], lo, hi)
        vals = f.values
        if math.isinf(p):
            sups = np.array([_esup(wf, x, y) if y > x else 0.0 for x, y in zip(a, b)])
            return float(np.max(powprod((vals, 1.0), (sups, 1.0)), initial=0.0))
        masses = np.where(b > a, wf.between(a, np.maximum(a, b)), 0.0)
        total = np.sum(powprod((vals, p), (masses, 1.0)))
        return float(ext_pow(total, 1.0 / p))
    a = np.clip(e[:-1], lo, hi)
    b = np.clip(e[1:], lo, hi)
    la, lb = np.log(a), np.log(np.maximum(a, b))
    half = 0.5 * (lb - la)
    xs = np.exp(0.5 * (la + lb)[:, None] + half[:, None] * _XI[None, :])
    fx = f(xs)
    if math.isinf(p):
        return float(np.max(powprod((fx, 1.0), (wf(xs), 1.0)), initial=0.0))
    wq = half[:, None] * _WT[None, :] * xs
    total = np.sum(powprod((fx, p), (wf(xs), 1.0), (wq, 1.0)))
    return float(ext_pow(total, 1.0 / p))


def _esup(wf: WeightFn, lo: float, hi: float) -> float:
    if isinstance(wf, ExactWeight):
        return float(wf.esup(lo, hi))
    xs = np.exp(np.linspace(math.log(lo), math.log(hi), 9))
    return float(np.max(wf(xs)))


# ---------------------------------------------------------------------------
# Inequality description
# ---------------------------------------------------------------------------


@dataclass
class InequalitySpec:
    """An inequality ``||LHS(h)||_{q,w} <= c ||h||_{rhs,v}``.

    Iterated forms ``IHI1``-``IHI4`` apply the lift ``H_{p,u}`` or
    ``H*_{p,u}`` to ``int_0^x h`` or ``int_x^inf h`` and measure ``h`` in
    ``L^s_v``.  Single forms apply ``(T(f^lift u))^(1/lift)`` with ``T`` the
    Hardy (``PlainHardy``, ``ConeHardy``) or Copson operator and measure
    ``f`` in ``L^p_v``.
    """

    form: str
    u: object
    v: object
    w: object
    p: float
    q: float
    s: float | None = None
    cone: str | None = None
    lift: float = 1.0
    grid: Grid = field(default_factory=default_grid)

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown form {self.form!r}")
        if self.cone is None:
            self.cone = "Dec" if self.form.startswith("Cone") else "Nonneg"
        if self.cone not in CONES:
            raise ValueError(f"unknown cone {self.cone!r}")
        if self.form in _ITERATED:
            if self.s is None:
                raise ValueError("iterated forms need s")
            if self.cone != "Nonneg":
                raise ValueError("iterated forms act on nonnegative h")
            if math.isinf(self.p):
                raise ValueError("iterated forms need a finite p")
        elif self.form.startswith("Plain") and self.cone != "Nonneg":
            raise ValueError("plain forms act on nonnegative h")
        if not (self.p > 0 and self.q > 0 and self.lift > 0):
            raise ValueError("exponents must be positive")
        self.u = as_weight_fn(self.u, "u")
        self.v = as_weight_fn(self.v, "v")
        self.w = as_weight_fn(self.w, "w")

    @property
    def rhs_exponent(self) -> float:
        return self.s if self.form in _ITERATED else self.p

    @property
    def extend(self) -> str:
        return {"Dec": "left", "Inc": "right"}.get(self.cone, "none")


# ---------------------------------------------------------------------------
# Discretised ratio
# ---------------------------------------------------------------------------


class _Problem:
    """Vectorised evaluation of the ratio for batches of cell vectors."""

    def __init__(self, spec: InequalitySpec):
        self.spec = spec
        g = spec.grid
        a, b = g.points[0], g.points[-1]
        k = _PAD_DECADES * _PAD_PER_DECADE
        head = a * 10.0 ** (-np.arange(k, 0, -1) / _PAD_PER_DECADE)
        tail = b * 10.0 ** (np.arange(1, k + 1) / _PAD_PER_DECADE)
        self.edges = np.concatenate([head, g.points, tail])
        self.nh = len(head)
        self.nmain = g.n - 1
        self.nt = len(tail)
        e = self.edges
        la, lb = np.log(e[:-1]), np.log(e[1:])
        half = 0.5 * (lb - la)
        self.xs = np.exp(0.5 * (la + lb)[:, None] + half[:, None] * _XI[None, :])
        self.wq = half[:, None] * _WT[None, :] * self.xs
        self.P = half[:, None, None] * _A[None, :, :] * self.xs[:, None, :]
        self.ww = powprod((spec.w(self.xs), 1.0), (self.wq, 1.0))
        self.w_nodes = spec.w(self.xs)
        self.zero_lhs = is_zero(spec.w) or is_zero(spec.u)
        self._rhs_setup()

    # -- right-hand side ---------------------------------------------------

    def _rhs_setup(self):
        spec = self.spec
        pts = spec.grid.points
        v = spec.v
        m = np.asarray(v.between(pts[:-1], pts[1:]), dtype=float)
        if spec.extend == "left":
            m[0] = m[0] + float(v.lower(pts[0]))
        elif spec.extend == "right":
            m[-1] = m[-1] + float(v.upper(pts[-1]))
        self.masses = m
        if math.isinf(spec.rhs_exponent):
            lo = pts[:-1].copy()
            hi = pts[1:].copy()
            sups = np.array([_esup(v, x, y) for x, y in zip(lo, hi)])
            if spec.extend == "left":
                sups[0] = max(sups[0], _esup(v, 1e-300, pts[0]) if isinstance(v, ExactWeight) else sups[0])
            elif spec.extend == "right":
                sups[-1] = max(sups[-1], _esup(v, pts[-1], INF) if isinstance(v, ExactWeight) else sups[-1])
            self.vsup = sups

    def rhs(self, c):
        s = self.spec.rhs_exponent
        if math.isinf(s):
            return np.max(_mul(c, self.vsup), axis=-1)
        return _pow(np.sum(_mul(_pow(c, s), self.masses), axis=-1), 1.0 / s)

    # -- left-hand side ----------------------------------------------------

    def expand(self, c):
        c = np.atleast_2d(c)
        B = c.shape[0]
        head = np.zeros((B, self.nh))
        tail = np.zeros((B, self.nt))
        if self.spec.extend == "left":
            head[:] = c[:, :1]
        elif self.spec.extend == "right":
            tail[:] = c[:, -1:]
        return np.concatenate([head, c, tail], axis=1)

    @cached_property
    def _lebesgue_masses(self):
        e = self.edges
        return e[1:] - e[:-1], self.xs - e[:-1, None]

    @cached_property
    def _u_masses(self):
        u = self.spec.u
        e = self.edges
        M = np.asarray(u.between(e[:-1], e[1:]), dtype=float)
        Mp = np.asarray(u.between(np.broadcast_to(e[:-1, None], self.xs.shape), self.xs), dtype=float)
        return M, Mp

    @staticmethod
    def _exact_cum(Y, M, Mp, direction, offset):
        """Cumulative of cell constants ``Y`` against a measure with cell masses
        ``M`` and in-cell partial masses ``Mp`` at the quadrature nodes."""
        pieces = _mul(Y, M[None, :])
        part = _mul(Y[:, :, None], Mp[None, :, :])
        if direction == "lower":
            before = np.cumsum(pieces, axis=1) - pieces
            return offset[:, None, None] + before[:, :, None] + part
        after = np.cumsum(pieces[:, ::-1], axis=1)[:, ::-1] - pieces
        rest = _mul(Y[:, :, None], np.maximum(M[:, None] - Mp, 0.0)[None, :, :])
        return offset[:, None, None] + after[:, :, None] + rest

    def _quad_cum(self, Y, direction, offset):
        cell = np.sum(Y * self.wq[None], axis=2)
        part = self.P[None, :, :, 0] * Y[:, :, 0, None]
        for l in range(1, _GL_M):
            part += self.P[None, :, :, l] * Y[:, :, l, None]
        if direction == "lower":
            before = np.cumsum(cell, axis=1) - cell
            out = offset[:, None, None] + before[:, :, None] + part
        else:
            after = np.cumsum(cell[:, ::-1], axis=1)[:, ::-1] - cell
            out = offset[:, None, None] + after[:, :, None] + cell[:, :, None] - part
        # the in-cell interpolation may undershoot by rounding
        return np.maximum(out, 0.0)

    def lhs_profile(self, c):
        """Left-hand-side function at the quadrature nodes, shape (B, C, m),
        plus the intermediate arrays needed by the gradient."""
        spec = self.spec
        full = self.expand(c)
        B = full.shape[0]
        e = self.edges
        if spec.form in _SINGLE:
            direction = _SINGLE[spec.form]
            Y = _pow(full, spec.lift)
            M, Mp = self._u_masses
            offset = np.zeros(B)
            if direction == "lower" and spec.extend == "left":
                offset = powprod((Y[:, 0], 1.0), (float(spec.u.lower(e[0])), 1.0))
            elif direction == "upper" and spec.extend == "right":
                offset = powprod((Y[:, -1], 1.0), (float(spec.u.upper(e[-1])), 1.0))
            Gl = self._exact_cum(Y, M, Mp, direction, np.atleast_1d(offset))
            return _pow(Gl, 1.0 / spec.lift), {"Gl": Gl, "full": full}
        inner, outer = _ITERATED[spec.form]
        M, Mp = self._lebesgue_masses
        F = self._exact_cum(full, M, Mp, inner, np.zeros(B))
        p = spec.p
        u_nodes = spec.u(self.xs)
        Y = _mul(_pow(F, p), u_nodes[None])
        offset = np.zeros(B)
        if outer == "lower" and inner == "upper":
            F0 = np.sum(_mul(full, M[None, :]), axis=1)
            offset = powprod((F0, p), (float(spec.u.lower(e[0])), 1.0))
        elif outer == "upper" and inner == "lower":
            Fend = np.sum(_mul(full, M[None, :]), axis=1)
            offset = powprod((Fend, p), (float(spec.u.upper(e[-1])), 1.0))
        Gp = self._quad_cum(Y, outer, np.atleast_1d(offset))
        return _pow(Gp, 1.0 / p), {"F": F, "Gp": Gp, "full": full, "u_nodes": u_nodes}

    def lhs(self, c):
        c = np.atleast_2d(c)
        if self.zero_lhs:
            return np.zeros(c.shape[0])
        G, _ = self.lhs_profile(c)
        q = self.spec.q
        if math.isinf(q):
            return np.max(_mul(G, self.w_nodes[None]).reshape(len(G), -1), axis=1)
        tot = np.sum(_mul(_pow(G, q), self.ww[None]).reshape(len(G), -1), axis=1)
        return _pow(tot, 1.0 / q)

    def ratio(self, c):
        c = np.atleast_2d(np.asarray(c, dtype=float))
        return ext_div(self.lhs(c), self.rhs(c))

    # -- gradient of the left-hand side (nonnegative cone, finite exponents) --

    def lhs_grad(self, c):
        spec = self.spec
        c = np.atleast_2d(c)
        G, cache = self.lhs_profile(c)
        q = spec.q
        L = self.lhs(c)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            dG = np.where(G > 0, L[:, None, None] ** (1 - q) * G ** (q - 1) * self.ww[None], 0.0)
            if spec.form in _SINGLE:
                direction = _SINGLE[spec.form]
                lift = spec.lift
                Gl = cache["Gl"]
                dGl = np.where(Gl > 0, dG * Gl ** (1.0 / lift - 1.0) / lift, 0.0)
                M, Mp = self._u_masses
                dY = self._exact_cum_adjoint(dGl, M, Mp, direction)
                full = cache["full"]
                dfull = np.where(full > 0, dY * lift * full ** (lift - 1.0), 0.0) if lift != 1 else dY
            else:
                inner, outer = _ITERATED[spec.form]
                p = spec.p
                Gp, F = cache["Gp"], cache["F"]
                dGp = np.where(Gp > 0, dG * Gp ** (1.0 / p - 1.0) / p, 0.0)
                dY = self._quad_cum_adjoint(dGp, outer)
                dF = np.where(F > 0, dY * p * F ** (p - 1.0) * cache["u_nodes"][None], 0.0)
                M, Mp = self._lebesgue_masses
                dfull = self._exact_cum_adjoint(dF, M, Mp, inner)
        dfull = np.nan_to_num(dfull, nan=0.0, posinf=0.0)
        return dfull[:, self.nh : self.nh + self.nmain]

    @staticmethod
    def _exact_cum_adjoint(Z, M, Mp, direction):
        tot = np.sum(Z, axis=2)
        if direction == "lower":
            later = np.cumsum(tot[:, ::-1], axis=1)[:, ::-1] - tot
            return M[None] * later + np.sum(Z * Mp[None], axis=2)
        earlier = np.cumsum(tot, axis=1) - tot
        return M[None] * earlier + np.sum(Z * (M[:, None] - Mp)[None], axis=2)

    def _quad_cum_adjoint(self, Z, direction):
        tot = np.sum(Z, axis=2)
        partT = np.stack([np.sum(self.P[None, :, :, l] * Z, axis=2) for l in range(_GL_M)], axis=2)
        if direction == "lower":
            later = np.cumsum(tot[:, ::-1], axis=1)[:, ::-1] - tot
            return self.wq[None] * later[:, :, None] + partT
        upto = np.cumsum(tot, axis=1)
        return self.wq[None] * upto[:, :, None] - partT


def evaluate_ratio(spec: InequalitySpec, h: DiscreteFunction) -> float:
    """Left-hand norm over right-hand norm for the test function ``h``."""
    if h.grid.n != spec.grid.n or h.grid.a != spec.grid.a or h.grid.b != spec.grid.b:
        raise ValueError("test function lives on a different grid")
    return float(_Problem(spec).ratio(h.values)[0])


# ---------------------------------------------------------------------------
# Maximisation
# ---------------------------------------------------------------------------


@dataclass
class OracleEstimate:
    lower_bound: float
    heuristic_best: float
    witness: DiscreteFunction
    iterations: int
    grid: Grid
    stable: bool = True
    strategy: str = ""
    history: tuple = ()

    def to_dict(self) -> dict:
        return {
            "lower_bound": float(self.lower_bound),
            "heuristic_best": float(self.heuristic_best),
            "iterations": int(self.iterations),
            "stable": bool(self.stable),
            "strategy": self.strategy,
            "grid": {"a": self.grid.a, "b": self.grid.b, "n": self.grid.n},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)


class _Search:
    def __init__(self, prob: _Problem, cone: str):
        self.prob = prob
        self.cone = cone
        self.best = -1.0
        self.best_c = None
        self.best_tag = ""
        self.evals = 0

    def offer(self, cands, tag):
        cands = np.atleast_2d(cands)
        out = np.empty(len(cands))
        for start in range(0, len(cands), 32):
            chunk = cands[start : start + 32]
            out[start : start + 32] = _finite_ratio(self.prob.ratio(chunk))
        self.evals += len(cands)
        k = int(np.argmax(out))
        if out[k] > self.best:
            self.best = float(out[k])
            self.best_c = cands[k].copy()
            self.best_tag = tag
        return out


def _finite_ratio(r):
    r = np.asarray(r, dtype=float)
    return np.where(np.isnan(r), 0.0, r)


def _indicator_batch(n, positions, kind):
    out = np.zeros((len(positions), n))
    for i, j in enumerate(positions):
        if kind == "head":
            out[i, : j + 1] = 1.0
        else:
            out[i, j:] = 1.0
    return out


def _strategy_indicators(search: _Search, n: int):
    cone = search.cone
    kinds = {"Dec": ("head",), "Inc": ("tail",), "Nonneg": ("head", "tail")}[cone]
    stride = max(1, n // 256)
    for kind in kinds:
        pos = np.arange(0, n, stride)
        vals = search.offer(_indicator_batch(n, pos, kind), "indicator")
        k = int(pos[int(np.argmax(vals))])
        local = np.arange(max(0, k - stride), min(n, k + stride + 1))
        search.offer(_indicator_batch(n, local, kind), "indicator")


def _strategy_pairs(search: _Search, n: int):
    pos = np.unique(np.linspace(0, n - 1, 32).astype(int))
    cands = []
    for i, a in enumerate(pos):
        for b_ in pos[i + 1 :]:
            c = np.zeros(n)
            if search.cone == "Nonneg":
                c[a : b_ + 1] = 1.0
            elif search.cone == "Dec":
                c[: a + 1] += 1.0
                c[: b_ + 1] += 1.0
            else:
                c[a:] += 1.0
                c[b_:] += 1.0
            cands.append(c)
    if cands:
        search.offer(np.array(cands), "pair")


def _strategy_power(search: _Search, n: int, iters: int):
    """Nonlinear power iteration ``c <- (grad L / m)^(1/(s-1))`` followed by
    a cone projection."""
    prob = search.prob
    s = prob.spec.rhs_exponent
    m = prob.masses
    c = search.best_c.copy()
    last = search.best
    history = []
    for _ in range(iters):
        g = prob.lhs_grad(c)[0]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            new = np.where(m > 0, ext_pow(np.where(m > 0, g / m, 0.0), 1.0 / (s - 1.0)), 0.0)
        new = np.nan_to_num(new, nan=0.0, posinf=0.0)
        if not np.any(new > 0):
            break
        new = _project(new / np.max(new), search.cone)
        val = search.offer(new, "power")[0]
        history.append(val)
        c = new
        if last > 0 and abs(val - last) <= 1e-7 * last:
            break
        last = val
    return history


def _strategy_ascent(search: _Search, n: int, sweeps: int, rng):
    """Multiplicative block coordinate ascent with geometric cooling."""
    history = []
    per_level = max(1, sweeps // 3)
    for blocks in (8, 24, 64):
        bounds = np.unique(np.linspace(0, n, min(blocks, n) + 1).astype(int))
        step = 1.0
        for _ in range(per_level):
            base = search.best_c
            cands = []
            for lo, hi in zip(bounds[:-1], bounds[1:]):
                for sign in (1.0, -1.0):
                    c = base.copy()
                    c[lo:hi] *= math.exp(sign * step)
                    cands.append(c)
            for _r in range(4):
                c = base * np.exp(step * rng.choice([-1.0, 0.0, 1.0], size=len(bounds) - 1)).repeat(np.diff(bounds))
                cands.append(c)
            cands = _project(np.array(cands), search.cone)
            before = search.best
            search.offer(cands, "ascent")
            history.append(search.best)
            if search.best <= before * (1 + 1e-9):
                step *= 0.5
                if step < 1e-3:
                    break
    return history


def best_constant_estimate(
    spec: InequalitySpec, budget: int = 60, seed: int = 0, init: DiscreteFunction | None = None
) -> OracleEstimate:
    """Maximise the discretised ratio with indicators, indicator pairs,
    block coordinate ascent and (when the exponents allow) nonlinear power
    iteration.  ``init`` seeds the search with an inherited witness."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    grid = spec.grid
    n = grid.n - 1
    prob = _Problem(spec)
    if prob.zero_lhs:
        zero = DiscreteFunction(grid, np.zeros(n), spec.extend)
        return OracleEstimate(0.0, 0.0, zero, 0, grid, True, "zero")
    rng = np.random.default_rng(seed)
    search = _Search(prob, spec.cone)
    if init is not None:
        search.offer(inherit(init, grid).values if init.grid.n != grid.n else init.values, "inherited")
    _strategy_indicators(search, n)
    if math.isinf(search.best):
        return _finish(spec, prob, search, True, ())
    _strategy_pairs(search, n)
    history = []
    s = spec.rhs_exponent
    finite = math.isfinite(s) and math.isfinite(spec.q)
    convex = finite and s > 1 and spec.q >= 1 and (spec.form in _SINGLE and spec.lift >= 1 or spec.form in _ITERATED and spec.p >= 1)
    if convex:
        history += _strategy_power(search, n, budget)
    history += _strategy_ascent(search, n, budget, rng)
    if convex:
        history += _strategy_power(search, n, budget)
    stable = len(history) < 2 or history[-2] <= 0 or abs(history[-1] - history[-2]) <= 0.01 * history[-2]
    return _finish(spec, prob, search, stable, tuple(history))


def _finish(spec, prob, search, stable, history):
    c = search.best_c
    witness = DiscreteFunction(spec.grid, np.nan_to_num(c / np.max(c) if np.max(c) > 0 else c), spec.extend)
    value = float(prob.ratio(witness.values)[0])
    return OracleEstimate(value, max(value, search.best), witness, search.evals, spec.grid, stable, search.best_tag, history)


# ---------------------------------------------------------------------------
# Kernel identities
# ---------------------------------------------------------------------------


def _fine_cells(h: DiscreteFunction, u: WeightFn):
    e = h.edges
    extra = [b for b in u.breaks if e[0] < b < e[-1]]
    edges = np.unique(np.concatenate([e, extra])) if extra else e
    mids = np.sqrt(edges[:-1] * edges[1:])
    vals = h(mids)
    return edges, vals


def _gl8(edges):
    xi, wt = np.polynomial.legendre.leggauss(8)
    la, lb = np.log(edges[:-1]), np.log(edges[1:])
    half = 0.5 * (lb - la)
    xs = np.exp(0.5 * (la + lb)[:, None] + half[:, None] * xi[None, :])
    return xs, half[:, None] * wt[None, :] * xs


def fubini_sides(h: DiscreteFunction, u):
    """Both sides of ``int_0^x (int_0^t h) u dt = int_0^x k(x,tau) h(tau) dtau``
    with ``k(x, y) = int_y^x u``, at every grid point ``x``.

    The left side integrates the exact primitive of ``h`` against ``u``; the
    right side integrates ``U(x) - U(tau)`` against ``h`` cell by cell.
    """
    uf = as_weight_fn(u, "u")
    edges, vals = _fine_cells(h, uf)
    xs, wq = _gl8(edges)
    lens = edges[1:] - edges[:-1]
    prim_start = np.concatenate([[0.0], np.cumsum(vals * lens)])[:-1]
    Hh = prim_start[:, None] + vals[:, None] * (xs - edges[:-1, None])
    left_cells = np.sum(Hh * uf(xs) * wq, axis=1)
    left = np.concatenate([[0.0], np.cumsum(left_cells)])
    Ux = np.asarray(uf.lower(edges), dtype=float)
    intU = np.sum(np.asarray(uf.lower(xs), dtype=float) * wq, axis=1)
    c_len = np.concatenate([[0.0], np.cumsum(vals * lens)])
    c_intU = np.concatenate([[0.0], np.cumsum(vals * intU)])
    right = Ux * c_len - c_intU
    keep = np.isin(edges, h.edges)
    return left[keep], right[keep]


def stieltjes_sides(h: DiscreteFunction, u):
    """``int_0^x (int_t^inf h) u dt`` and ``U(x) S(hU)(x)`` at every grid
    point, where ``S g(x) = int_0^inf g(t) / (U(x) + U(t)) dt``."""
    uf = as_weight_fn(u, "u")
    edges, vals = _fine_cells(h, uf)
    xs, wq = _gl8(edges)
    lens = edges[1:] - edges[:-1]
    tail_end = np.concatenate([np.cumsum((vals * lens)[::-1])[::-1][1:], [0.0]])
    Hs = tail_end[:, None] + vals[:, None] * (edges[1:, None] - xs)
    head = float(np.sum(vals * lens)) * float(uf.lower(edges[0]))
    left = head + np.concatenate([[0.0], np.cumsum(np.sum(Hs * uf(xs) * wq, axis=1))])
    Ux = np.asarray(uf.lower(edges), dtype=float)
    Ut = np.asarray(uf.lower(xs), dtype=float)
    hU = vals[:, None] * Ut * wq
    right = np.array([X * np.sum(hU / (X + Ut)) for X in Ux])
    keep = np.isin(edges, h.edges)
    return left[keep], right[keep]
