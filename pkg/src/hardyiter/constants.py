"""Best-constant characterizations for Hardy-type inequalities on monotone
cones and for the iterated Hardy-type inequalities.

All formulas are evaluated by one engine, ``_cone_terms``, which computes the
term set of the Hardy operator on the cone of nonincreasing functions
(``side="lower"``) or of the Copson operator on the cone of nondecreasing
functions (``side="upper"``).  The remaining characterizations are obtained
by feeding the engine substituted weights, exponents and cumulatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import minimize_scalar

from .transforms import (
    ConditionError,
    ExactWeight,
    WeightFn,
    _GL_W,
    _GL_X,
    as_weight_fn,
    composite_kernel,
    inner_transform_weights,
    is_zero,
    merge_breaks,
    phi_pair,
    product,
    psi_pair,
    stable_difference,
    v1,
    v1_star,
)
from .weights import INF, ext_div, ext_pow, powprod

__all__ = [
    "ConditionError",
    "ConstantReport",
    "Params",
    "Regime",
    "ScanGrid",
    "classify",
    "copson_decreasing_constant",
    "hardy_decreasing_constant",
    "hardy_dual_increasing_constant",
    "hardy_increasing_constant",
    "iterated_constant",
    "iterated_constant_s1",
    "lebesgue_norm",
    "ratio_term",
]


class Regime(str, Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    V = "V"
    VI = "VI"
    VII = "VII"
    VIII = "VIII"
    i = "i"
    ii = "ii"
    iii = "iii"
    iv = "iv"
    v = "v"
    vi = "vi"


_ROMAN_TO_ITERATED = {
    Regime.I: Regime.i,
    Regime.II: Regime.ii,
    Regime.III: Regime.iii,
    Regime.IV: Regime.iv,
    Regime.V: Regime.v,
    Regime.VI: Regime.vi,
}

_EQUAL_CASES = {Regime.IV, Regime.V, Regime.VI, Regime.VII, Regime.VIII}


@dataclass(frozen=True)
class Params:
    """Exponents of an inequality with the derived ``r``, ``p'`` and ``s'``."""

    p: float
    q: float
    s: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if not self.p > 0 or not self.q > 0:
            raise ValueError("p and q must be positive")
        if self.s is not None and not (1 <= self.s < INF):
            raise ValueError("s must lie in [1, inf)")
        if self.delta is not None and (self.s is None or not (0 < self.delta <= self.s)):
            raise ValueError("delta must lie in (0, s]")

    @property
    def r(self) -> float | None:
        if self.q < self.p < INF:
            return 1.0 / (1.0 / self.q - 1.0 / self.p)
        return None

    @property
    def p_conj(self) -> float | None:
        return conjugate(self.p) if self.p >= 1 else None

    @property
    def s_conj(self) -> float | None:
        return conjugate(self.s) if self.s is not None else None


def conjugate(p: float) -> float:
    if p == 1:
        return INF
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def classify(p: float, q: float, s: float | None = None) -> Regime:
    """Parameter case of the cone characterization, or of the iterated one
    when ``s`` is given."""
    if not (p > 0 and q > 0):
        raise ValueError("p and q must be positive")
    if s is not None:
        if math.isinf(p):
            raise ValueError("iterated inequalities need a finite p")
        return _ROMAN_TO_ITERATED[classify(s / p, q / p if math.isfinite(q) else INF)]
    if math.isinf(p):
        return Regime.VIII if math.isinf(q) else Regime.VII
    if math.isinf(q):
        return Regime.V if p <= 1 else Regime.VI
    if p <= q:
        return Regime.I if p > 1 else Regime.IV
    return Regime.II if p > 1 else Regime.III


@dataclass(frozen=True)
class ScanGrid:
    """Log grid scanned for suprema; also bounds the reported numerics."""

    a: float = 1e-8
    b: float = 1e8
    n: int = 4096

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "n": self.n}


DEFAULT_SCAN = ScanGrid()


@dataclass
class ConstantReport:
    total: float
    terms: dict
    regime: Regime
    exactness: str
    grid: ScanGrid = DEFAULT_SCAN
    theorem: str = ""
    boundary: tuple = ()
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "terms": dict(self.terms),
            "regime": self.regime.value,
            "exactness": self.exactness,
            "grid": self.grid.to_dict(),
        }


# ---------------------------------------------------------------------------
# Numerical primitives
# ---------------------------------------------------------------------------


def _scan_points(scan: ScanGrid, breaks) -> np.ndarray:
    base = np.exp(np.linspace(math.log(scan.a), math.log(scan.b), scan.n))
    extra = [b for b in breaks if scan.a < b < scan.b]
    extra += [b * (1 - 1e-9) for b in extra]
    return np.unique(np.concatenate([base, extra])) if extra else base


def _finite_or(values, fill=0.0):
    arr = np.asarray(values, dtype=float)
    return np.where(np.isnan(arr), fill, arr)


@dataclass
class _Sup:
    value: float
    at: float
    boundary: bool


def supremum(obj, scan: ScanGrid, breaks=()) -> _Sup:
    """Supremum over t > 0 of a vectorised objective.

    The grid maximum is refined by bounded Brent search between its
    neighbours.  A maximum on the edge of the grid is followed three decades
    further; sustained power growth is reported as ``inf``, otherwise the
    largest value seen is returned with ``boundary=True``.
    """
    ts = _scan_points(scan, breaks)
    vals = _finite_or(obj(ts))
    if np.all(vals == 0):
        return _Sup(0.0, float(ts[0]), False)
    k = int(np.argmax(vals))
    best = float(vals[k])
    if math.isinf(best):
        return _Sup(INF, float(ts[k]), False)
    if k in (0, len(ts) - 1):
        step = 10.0 if k else 0.1
        probe = ts[k] * step ** np.arange(0, 4)
        pv = _finite_or(obj(probe))
        if np.any(np.isinf(pv)):
            return _Sup(INF, float(ts[k]), True)
        with np.errstate(divide="ignore", invalid="ignore"):
            slopes = np.diff(np.log(pv)) / math.log(10.0)
        if np.all(pv > 0) and np.all(slopes > 1e-2):
            return _Sup(INF, float(ts[k]), True)
        return _Sup(float(np.max(pv)), float(ts[k]), True)
    lo, hi = math.log(ts[k - 1]), math.log(ts[k + 1])
    res = minimize_scalar(
        lambda y: -float(_finite_or(obj(np.array([math.exp(y)])))[0]),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    if -res.fun > best:
        return _Sup(float(-res.fun), math.exp(res.x), False)
    return _Sup(best, float(ts[k]), False)


def _integral(fn: WeightFn) -> float:
    return float(fn.total())


def running_esup(fn, side: str, breaks=(), table=None):
    """``t -> esup fn`` over (0, t) (``side="lower"``) or (t, inf).

    Tabulated on a dense log grid; between nodes the running value is
    combined with ``fn(t)`` itself.
    """
    if isinstance(fn, ExactWeight):
        pieces = fn.pieces

        def exact(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            if side == "lower":
                out = np.array([pieces.esup(0.0, x) for x in t])
            else:
                out = np.array([pieces.esup(x, INF) for x in t])
            return out

        return exact
    lo, hi = table or (1e-12, 1e12)
    nodes = np.exp(np.linspace(math.log(lo), math.log(hi), int(24 * 48) + 1))
    extra = [b for b in breaks if lo < b < hi]
    if extra:
        nodes = np.unique(np.concatenate([nodes, extra, [b * (1 - 1e-9) for b in extra]]))
    vals = _finite_or(fn(nodes))
    # power growth towards the open end of the running range makes the
    # supremum infinite everywhere
    if side == "lower" and _grows(vals[1], vals[0], nodes[1], nodes[0]):
        vals[:] = INF
    if side == "upper" and _grows(vals[-2], vals[-1], nodes[-2], nodes[-1]):
        vals[:] = INF
    if side == "lower":
        run = np.maximum.accumulate(vals)

        def lower_fn(t):
            t = np.asarray(t, dtype=float)
            k = np.searchsorted(nodes, t, side="right") - 1
            prev = np.where(k >= 0, run[np.clip(k, 0, len(run) - 1)], 0.0)
            return np.maximum(prev, _finite_or(fn(t)))

        return lower_fn
    run = np.maximum.accumulate(vals[::-1])[::-1]

    def upper_fn(t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(nodes, t, side="left")
        nxt = np.where(k < len(run), run[np.clip(k, 0, len(run) - 1)], 0.0)
        return np.maximum(nxt, _finite_or(fn(t)))

    return upper_fn


def _grows(inner, outer, x_inner, x_outer) -> bool:
    if math.isinf(outer):
        return True
    if not (inner > 0 and outer > 0):
        return False
    slope = math.log(outer / inner) / abs(math.log(x_outer / x_inner))
    return slope > 1e-3


class _DoubleIntegral:
    """``t -> int_0^t (int_tau^t k)^e m(tau) dtau`` (or its mirror image on
    (t, inf)) for the single-supremum cases with an infinite outer exponent."""

    def __init__(self, k: WeightFn, m: WeightFn, e: float, side: str):
        self.k = k
        self.m = m
        self.e = e
        self.side = side
        tab = k._table
        nodes = tab["nodes"]
        logs = np.log(nodes)
        half = 0.5 * np.diff(logs)
        mid = 0.5 * (logs[1:] + logs[:-1])
        xs = np.exp(mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
        ws = (half[:, None] * _GL_W[None, :]).ravel() * xs
        self.tau = xs
        self.mw = _finite_or(m(xs)) * ws
        self.K, self.Kinf = k._anti(xs)
        self.R = k._anti_rev(xs)
        self.nodes = nodes

    def _edge(self, t):
        """Contribution of the cell containing t and of the region beyond the table."""
        nodes = self.nodes
        tc = np.clip(t, nodes[0], nodes[-1])
        k = np.clip(np.searchsorted(nodes, tc, side="right") - 1, 0, len(nodes) - 2)
        if self.side == "lower":
            a, b = nodes[k], tc
        else:
            a, b = tc, nodes[k + 1]
        la, lb = np.log(a), np.log(np.maximum(b, a))
        half = 0.5 * (lb - la)
        xs = np.exp(0.5 * (lb + la)[:, None] + half[:, None] * _GL_X[None, :])
        ws = half[:, None] * _GL_W[None, :] * xs
        Kx, Kxi = self.k._anti(xs.ravel())
        Kx, Kxi = Kx.reshape(xs.shape), Kxi.reshape(xs.shape)
        Kt, Kti = self.k._anti(tc)
        Rx = self.k._anti_rev(xs.ravel()).reshape(xs.shape)
        Rt = self.k._anti_rev(tc)
        if self.side == "lower":
            diff = stable_difference(Kx, Kt[:, None], Rx, Rt[:, None])
            inf_diff = Kti[:, None] > Kxi
            far = np.where(Kti > self.Kinf[0], INF, np.maximum(Kt - self.k._anti(np.array([nodes[0]]))[0], 0.0))
            rest = powprod((far, self.e), (self.m.lower(nodes[0]), 1.0))
        else:
            diff = stable_difference(Kt[:, None], Kx, Rt[:, None], Rx)
            inf_diff = Kxi > Kti[:, None]
            Kend, Kendi = self.k._anti(np.array([nodes[-1]]))
            far = np.where(Kendi > Kti, INF, np.maximum(Rt, 0.0))
            rest = powprod((far, self.e), (self.m.upper(nodes[-1]), 1.0))
        diff = np.where(inf_diff, INF, np.maximum(diff, 0.0))
        cell = np.sum(powprod((diff, self.e), (_finite_or(self.m(xs)) * ws, 1.0)), axis=1)
        return cell + rest

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(t.shape)
        tc = np.clip(t, self.nodes[0], self.nodes[-1])
        Kt, Ktinf = self.k._anti(tc)
        Rt = self.k._anti_rev(tc)
        cell = np.searchsorted(self.nodes, np.clip(t, self.nodes[0], self.nodes[-1]), side="right") - 1
        cell_of_tau = np.repeat(np.arange(len(self.nodes) - 1), len(_GL_X))
        for start in range(0, len(t), 128):
            sl = slice(start, start + 128)
            ck = cell[sl][:, None]
            if self.side == "lower":
                mask = cell_of_tau[None, :] < ck
                diff = stable_difference(self.K[None, :], Kt[sl][:, None], self.R[None, :], Rt[sl][:, None])
                inf_diff = Ktinf[sl][:, None] > self.Kinf[None, :]
            else:
                mask = cell_of_tau[None, :] > ck
                diff = stable_difference(Kt[sl][:, None], self.K[None, :], Rt[sl][:, None], self.R[None, :])
                inf_diff = self.Kinf[None, :] > Ktinf[sl][:, None]
            diff = np.where(inf_diff, INF, np.maximum(diff, 0.0))
            vals = powprod((diff, self.e), (np.broadcast_to(self.mw, diff.shape), 1.0))
            vals = np.where(mask, vals, 0.0)
            out[sl] = np.sum(vals, axis=1)
        return out + self._edge(t)


@dataclass
class _ConeInputs:
    """Density ``u`` and its near cumulative ``U``, density ``v`` and the
    cumulative ``V`` paired with it, target weight ``w`` and its far
    cumulative, all on one side."""

    u: WeightFn
    U: object
    v: WeightFn
    V: object
    w: WeightFn
    W_far: object
    side: str
    v_esup: object = None


def _near(fn: WeightFn, side: str):
    return fn.lower if side == "lower" else fn.upper


def _cone_terms(inp: _ConeInputs, P: float, Q: float, scan: ScanGrid):
    """Terms of the cone characterization for exponents (P, Q).

    Returns ``(regime, terms, boundary_names)``.
    """
    regime = classify(P, Q)
    side = inp.side
    U, V, W_far, u, v, w = inp.U, inp.V, inp.W_far, inp.u, inp.v, inp.w
    breaks = merge_breaks(u.breaks, v.breaks, w.breaks)
    terms = {}
    boundary = []

    def record(name, sup: _Sup):
        terms[name] = sup.value
        if sup.boundary:
            boundary.append(name)

    if regime in (Regime.I, Regime.II, Regime.III, Regime.IV):
        g1 = WeightFn(lambda x: powprod((U(x), Q), (w(x), 1.0)), "U^q w", breaks)
        inner1 = _near(g1, side)
    if regime in (Regime.I, Regime.II):
        Pc = conjugate(P)
        g2 = WeightFn(lambda x: powprod((U(x), Pc), (V(x), -Pc), (v(x), 1.0)), "(U/V)^p' v", breaks)
        inner2 = _near(g2, side)

    if regime == Regime.I:
        record("A0", supremum(lambda t: powprod((inner1(t), 1.0 / Q), (V(t), -1.0 / P)), scan, breaks))
        record("A1", supremum(lambda t: powprod((W_far(t), 1.0 / Q), (inner2(t), 1.0 / Pc)), scan, breaks))
    elif regime in (Regime.II, Regime.III):
        r = 1.0 / (1.0 / Q - 1.0 / P)
        b0 = WeightFn(
            lambda x: powprod((V(x), -r / P), (inner1(x), r / P), (U(x), Q), (w(x), 1.0)), "B0 integrand", breaks
        )
        terms["B0"] = ext_pow(_integral(b0), 1.0 / r)
        if regime == Regime.II:
            b1 = WeightFn(
                lambda x: powprod((W_far(x), r / P), (inner2(x), r / Pc), (w(x), 1.0)), "B1 integrand", breaks
            )
            terms["B1"] = ext_pow(_integral(b1), 1.0 / r)
        else:
            ratio = WeightFn(lambda x: powprod((U(x), P), (V(x), -1.0)), "U^p/V", breaks)
            M = running_esup(ratio, side, breaks)
            c1 = WeightFn(
                lambda x: powprod((M(x), r / P), (W_far(x), r / P), (w(x), 1.0)), "C1 integrand", breaks
            )
            terms["C1"] = ext_pow(_integral(c1), 1.0 / r)
    elif regime == Regime.IV:
        record(
            "D0",
            supremum(
                lambda t: powprod((V(t), -1.0 / P), (inner1(t) + powprod((U(t), Q), (W_far(t), 1.0)), 1.0 / Q)),
                scan,
                breaks,
            ),
        )
    elif regime == Regime.V:
        Uw = WeightFn(lambda x: powprod((U(x), 1.0), (w(x), 1.0)), "U w", breaks)
        M1 = running_esup(Uw, side, breaks)
        M2 = running_esup(w, "upper" if side == "lower" else "lower", breaks)
        record(
            "E0",
            supremum(
                lambda t: powprod((V(t), -1.0 / P), (np.maximum(M1(t), powprod((U(t), 1.0), (M2(t), 1.0))), 1.0)),
                scan,
                breaks,
            ),
        )
    elif regime == Regime.VI:
        Pc = conjugate(P)
        k = WeightFn(lambda x: powprod((u(x), 1.0), (V(x), -1.0)), "u/V", breaks)
        dbl = _DoubleIntegral(k, v, Pc, side)
        record("F0", supremum(lambda t: powprod((w(t), 1.0), (dbl(t), 1.0 / Pc)), scan, breaks))
    else:
        ve = inp.v_esup
        if ve is None:
            ve = running_esup(v, side, breaks)
        g = WeightFn(lambda x: ext_div(u(x), ve(x)), "u / esup v", breaks)
        inner = _near(g, side)
        if regime == Regime.VII:
            gq = WeightFn(lambda x: powprod((inner(x), Q), (w(x), 1.0)), "G0 integrand", breaks)
            terms["G0"] = ext_pow(_integral(gq), 1.0 / Q)
        else:
            record("H0", supremum(lambda t: powprod((inner(t), 1.0), (w(t), 1.0)), scan, breaks))
    return regime, {k: float(v_) for k, v_ in terms.items()}, tuple(boundary)


def _report(theorem, regime, terms, boundary, exactness, scan, extra_terms=None, notes=()):
    terms = dict(terms)
    if extra_terms:
        terms.update(extra_terms)
    total = float(sum(terms.values()))
    return ConstantReport(total, terms, regime, exactness, scan, theorem, boundary, tuple(notes))


def _exactness(regime: Regime) -> str:
    return "Equal" if regime in _EQUAL_CASES else "Equivalent"


# ---------------------------------------------------------------------------
# Norms and ratio terms
# ---------------------------------------------------------------------------


def lebesgue_norm(f, p: float, w, interval=(0.0, INF), scan: ScanGrid = DEFAULT_SCAN) -> float:
    """``(int_I |f|^p w)^(1/p)``, or ``esup_I |f| w`` when ``p = inf``.

    ``f`` may be a callable, a ``WeightFn`` or a discrete function from the
    oracle module.
    """
    from .oracle import DiscreteFunction, discrete_norm

    if isinstance(f, DiscreteFunction):
        return discrete_norm(f, p, w, interval)
    wf = as_weight_fn(w)
    lo, hi = interval
    if math.isinf(p):
        a = max(lo, scan.a) if lo > 0 else scan.a
        b = min(hi, scan.b)
        pts = _scan_points(ScanGrid(a, b, scan.n), wf.breaks)
        vals = powprod((np.abs(np.asarray(f(pts), dtype=float)), 1.0), (wf(pts), 1.0))
        return float(np.max(_finite_or(vals)))
    g = WeightFn(lambda x: powprod((np.abs(np.asarray(f(x), dtype=float)), p), (wf(x), 1.0)), "|f|^p w", wf.breaks)
    if lo <= 0 and math.isinf(hi):
        val = g.total()
    elif lo <= 0:
        val = g.lower(hi)
    elif math.isinf(hi):
        val = g.upper(lo)
    else:
        val = g.between(lo, hi)
    return float(ext_pow(float(val), 1.0 / p))


def _norm_of(fn, q: float, w: WeightFn, scan: ScanGrid) -> float:
    return lebesgue_norm(fn, q, w, (0.0, INF), scan)


def _one_norm(p: float, v: WeightFn, scan: ScanGrid) -> float:
    if math.isinf(p):
        return lebesgue_norm(lambda x: np.ones(np.shape(x)), INF, v, (0.0, INF), scan)
    return float(ext_pow(float(v.total()), 1.0 / p))


def ratio_term(kind: str, u, v, w, p: float, q: float, s: float | None = None, scan: ScanGrid = DEFAULT_SCAN):
    """Norm-ratio correction terms.

    ``hardy_one``: ``||H_u 1||_{q,w} / ||1||_{p,v}``.
    ``copson_one``: ``||H*_u 1||_{q,w} / ||1||_{p,v}``.
    ``nested_one``: ``|| ||1||_{p, Psi^{2p} u, (0,t)} ||_{q,w} / ||1||_{s,psi}`` with
    ``psi, Psi`` built from ``(v, s)``; ``nested_one_upper`` uses ``Phi, phi``
    on ``(t, inf)``.  ``nested_one_s1`` and ``nested_one_s1_upper`` are the
    ``s = 1`` analogues with ``V_*^{2p} u`` on ``(0,t)`` and ``V^{2p} u`` on
    ``(t, inf)`` over ``||1||_{1,v}``.
    """
    uf, vf, wf = as_weight_fn(u), as_weight_fn(v), as_weight_fn(w)
    if kind == "hardy_one":
        num = _norm_of(uf.lower, q, wf, scan)
        den = _one_norm(p, vf, scan)
    elif kind == "copson_one":
        num = _norm_of(uf.upper, q, wf, scan)
        den = _one_norm(p, vf, scan)
    elif kind in ("nested_one", "nested_one_upper", "nested_one_s1", "nested_one_s1_upper"):
        if is_zero(uf):
            return 0.0
        if kind == "nested_one":
            dens, base = psi_pair(vf, s)
            inner = composite_kernel(uf, base, 2 * p, "from_zero")
            den = _one_norm(s, dens, scan)
        elif kind == "nested_one_upper":
            dens, base = phi_pair(vf, s)
            inner = composite_kernel(uf, base, 2 * p, "from_infinity")
            den = _one_norm(s, dens, scan)
        elif kind == "nested_one_s1":
            base = WeightFn(vf.upper, "V*", vf.breaks)
            inner = composite_kernel(uf, base, 2 * p, "from_zero")
            den = _one_norm(1.0, vf, scan)
        else:
            base = WeightFn(vf.lower, "V", vf.breaks)
            inner = composite_kernel(uf, base, 2 * p, "from_infinity")
            den = _one_norm(1.0, vf, scan)
        num = _norm_of(lambda x: ext_pow(inner(x), 1.0 / p), q, wf, scan)
    else:
        raise ValueError(f"unknown ratio kind {kind!r}")
    return float(ext_div(num, den))


# ---------------------------------------------------------------------------
# Cone characterizations
# ---------------------------------------------------------------------------


def _base_inputs(u, v, w, side: str) -> _ConeInputs:
    uf, vf, wf = as_weight_fn(u, "u"), as_weight_fn(v, "v"), as_weight_fn(w, "w")
    if side == "lower":
        return _ConeInputs(uf, uf.lower, vf, vf.lower, wf, wf.upper, side, running_esup(vf, "lower"))
    return _ConeInputs(uf, uf.upper, vf, vf.upper, wf, wf.lower, side, running_esup(vf, "upper"))


def hardy_decreasing_constant(u, v, w, p: float, q: float, scan: ScanGrid = DEFAULT_SCAN) -> ConstantReport:
    """Best constant of ``||H_u f||_{q,w} <= c ||f||_{p,v}`` over nonincreasing ``f``,
    where ``H_u f(t) = int_0^t f u``."""
    regime, terms, boundary = _cone_terms(_base_inputs(u, v, w, "lower"), p, q, scan)
    return _report("hardy_decreasing", regime, terms, boundary, _exactness(regime), scan)


def hardy_dual_increasing_constant(u, v, w, p: float, q: float, scan: ScanGrid = DEFAULT_SCAN) -> ConstantReport:
    """Best constant of ``||H*_u f||_{q,w} <= c ||f||_{p,v}`` over nondecreasing ``f``."""
    regime, terms, boundary = _cone_terms(_base_inputs(u, v, w, "upper"), p, q, scan)
    terms = {f"{k}*": val for k, val in terms.items()}
    return _report(
        "hardy_dual_increasing", regime, terms, tuple(f"{b}*" for b in boundary), _exactness(regime), scan
    )


def _swap_inputs(u, v, w, p: float, side: str) -> _ConeInputs:
    uf, vf, wf = as_weight_fn(u, "u"), as_weight_fn(v, "v"), as_weight_fn(w, "w")
    if side == "lower":
        Vt = v1_star(vf)
        Vcum = vf.upper
        W_far = wf.upper
    else:
        Vt = v1(vf)
        Vcum = vf.lower
        W_far = wf.lower
    ut = product("u V1^{4/p}", (uf, 1.0), (Vt, 4.0 / p))
    vt = WeightFn(
        lambda x: powprod((Vt(x), -2.0), (Vcum(x), -2.0), (vf(x), 1.0)), "{V1 V}^-2 v", merge_breaks(vf.breaks)
    )
    return _ConeInputs(ut, _near(ut, side), vt, Vt, wf, W_far, side)


def hardy_increasing_constant(u, v, w, p: float, q: float, scan: ScanGrid = DEFAULT_SCAN) -> ConstantReport:
    """Best constant of ``||H_u f||_{q,w} <= c ||f||_{p,v}`` over nondecreasing ``f``;
    requires ``V_*(x) < inf`` for every x."""
    if math.isinf(p):
        raise ValueError("the nondecreasing-cone Hardy constant is not available for p = inf")
    inp = _swap_inputs(u, v, w, p, "lower")
    regime, terms, boundary = _cone_terms(inp, p, q, scan)
    terms = {f"{k}~": val for k, val in terms.items()}
    boundary = tuple(f"{b}~" for b in boundary)
    ratio = ratio_term("hardy_one", u, v, w, p, q, scan=scan)
    notes = ("ambiguous_equality",) if regime in _EQUAL_CASES else ()
    return _report("hardy_increasing", regime, terms, boundary, _exactness(regime), scan, {"norm_ratio": ratio}, notes)


def copson_decreasing_constant(u, v, w, p: float, q: float, scan: ScanGrid = DEFAULT_SCAN) -> ConstantReport:
    """Best constant of ``||H*_u f||_{q,w} <= c ||f||_{p,v}`` over nonincreasing ``f``;
    requires ``V(x) < inf`` for every x."""
    if math.isinf(p):
        raise ValueError("the nonincreasing-cone Copson constant is not available for p = inf")
    inp = _swap_inputs(u, v, w, p, "upper")
    regime, terms, boundary = _cone_terms(inp, p, q, scan)
    terms = {f"{k}~*": val for k, val in terms.items()}
    boundary = tuple(f"{b}~*" for b in boundary)
    ratio = ratio_term("copson_one", u, v, w, p, q, scan=scan)
    notes = ("ambiguous_equality",) if regime in _EQUAL_CASES else ()
    return _report("copson_decreasing", regime, terms, boundary, _exactness(regime), scan, {"norm_ratio": ratio}, notes)


# ---------------------------------------------------------------------------
# Iterated inequalities
# ---------------------------------------------------------------------------


def _lifted(inp: _ConeInputs, p: float, q: float, s_eff: float, scan: ScanGrid, prefix: str):
    """Run the engine with exponents (s/p, q/p) and return terms to the power 1/p."""
    P = s_eff / p
    Q = q / p if math.isfinite(q) else INF
    if math.isinf(q):
        w = inp.w
        inp.w = product(f"{w.label}^p", (w, p))
    regime, terms, boundary = _cone_terms(inp, P, Q, scan)
    terms = {f"{prefix}{k}": float(ext_pow(val, 1.0 / p)) for k, val in terms.items()}
    return _ROMAN_TO_ITERATED[regime], terms, tuple(f"{prefix}{b}" for b in boundary)


def iterated_constant(variant: str, u, v, w, p: float, q: float, s: float, scan: ScanGrid = DEFAULT_SCAN):
    """Best constant of the iterated inequality ``variant`` in {C1, C2, C3, C4}:

    C1: ``||H_{p,u}(int_0^x h)||_{q,w} <= c ||h||_{s,v}``
    C2: ``||H_{p,u}(int_x^inf h)||_{q,w} <= c ||h||_{s,v}``
    C3: ``||H*_{p,u}(int_x^inf h)||_{q,w} <= c ||h||_{s,v}``
    C4: ``||H*_{p,u}(int_0^x h)||_{q,w} <= c ||h||_{s,v}``
    """
    variant = variant.upper()
    if not (1 < s < INF):
        raise ValueError("s must lie in (1, inf)")
    if not (0 < p < INF):
        raise ValueError("p must be positive and finite")
    uf, vf, wf = as_weight_fn(u, "u"), as_weight_fn(v, "v"), as_weight_fn(w, "w")
    extra = {}
    if variant == "C1":
        phi, Phi = phi_pair(vf, s)
        ut = product("u Phi^{2p}", (uf, 1.0), (Phi, 2 * p))
        inp = _ConeInputs(ut, ut.lower, phi, Phi, wf, wf.upper, "lower")
    elif variant == "C2":
        _, Psi = psi_pair(vf, s)
        phi_h, Phi_h = inner_transform_weights(vf, s, "c2")
        ut = product("u (Psi Phi_hat)^{2p}", (uf, 1.0), (Psi, 2 * p), (Phi_h, 2 * p))
        inp = _ConeInputs(ut, ut.lower, phi_h, Phi_h, wf, wf.upper, "lower")
        extra["norm_ratio"] = ratio_term("nested_one", uf, vf, wf, p, q, s, scan)
    elif variant == "C3":
        psi, Psi = psi_pair(vf, s)
        ut = product("u Psi^{2p}", (uf, 1.0), (Psi, 2 * p))
        inp = _ConeInputs(ut, ut.upper, psi, Psi, wf, wf.lower, "upper")
    elif variant == "C4":
        _, Phi = phi_pair(vf, s)
        psi_h, Psi_h = inner_transform_weights(vf, s, "c4")
        ut = product("u (Phi Psi_hat)^{2p}", (uf, 1.0), (Phi, 2 * p), (Psi_h, 2 * p))
        inp = _ConeInputs(ut, ut.upper, psi_h, Psi_h, wf, wf.lower, "upper")
        extra["norm_ratio"] = ratio_term("nested_one_upper", uf, vf, wf, p, q, s, scan)
    else:
        raise ValueError(f"unknown iterated variant {variant!r}")
    regime, terms, boundary = _lifted(inp, p, q, s, scan, "")
    terms = {f"{k}_{variant[1]}": val for k, val in terms.items()}
    return _report(variant, regime, terms, boundary, "Equivalent", scan, extra)


def iterated_constant_s1(variant: str, u, v, w, p: float, q: float, scan: ScanGrid = DEFAULT_SCAN):
    """Iterated constants with ``s = 1``; the right-hand side is
    ``||h||_{1,V^{-1}}`` (C1s1, C4s1) or ``||h||_{1,V_*^{-1}}`` (C2s1, C3s1)."""
    variant = variant.upper()
    if not (0 < p < INF):
        raise ValueError("p must be positive and finite")
    uf, vf, wf = as_weight_fn(u, "u"), as_weight_fn(v, "v"), as_weight_fn(w, "w")
    extra = {}
    V = WeightFn(vf.lower, "V", vf.breaks)
    Vs = WeightFn(vf.upper, "V*", vf.breaks)
    if variant in ("C1S1", "C4S1"):
        if not np.isfinite(vf.lower(max(vf.breaks + (1.0,)) * 2.0)):
            raise ConditionError("V(x) = int_0^x v is infinite for some x > 0")
    else:
        if not np.isfinite(vf.upper(min(vf.breaks + (1.0,)) * 0.5)):
            raise ConditionError("V_*(x) = int_x^inf v is infinite for some x > 0")
    if variant == "C1S1":
        ut = product("u V^{2p}", (uf, 1.0), (V, 2 * p))
        inp = _ConeInputs(ut, ut.lower, vf, vf.lower, wf, wf.upper, "lower")
    elif variant == "C2S1":
        V1s = v1_star(vf)
        ut = product("u {V* V1*^2}^{2p}", (uf, 1.0), (Vs, 2 * p), (V1s, 4 * p))
        vt = product("{V* V1*}^-2 v", (Vs, -2.0), (V1s, -2.0), (vf, 1.0))
        inp = _ConeInputs(ut, ut.lower, vt, V1s, wf, wf.upper, "lower")
        extra["norm_ratio"] = ratio_term("nested_one_s1", uf, vf, wf, p, q, scan=scan)
    elif variant == "C3S1":
        ut = product("u V*^{2p}", (uf, 1.0), (Vs, 2 * p))
        inp = _ConeInputs(ut, ut.upper, vf, vf.upper, wf, wf.lower, "upper")
    elif variant == "C4S1":
        V1 = v1(vf)
        ut = product("u {V V1^2}^{2p}", (uf, 1.0), (V, 2 * p), (V1, 4 * p))
        vt = product("{V V1}^-2 v", (V, -2.0), (V1, -2.0), (vf, 1.0))
        inp = _ConeInputs(ut, ut.upper, vt, V1, wf, wf.lower, "upper")
        extra["norm_ratio"] = ratio_term("nested_one_s1_upper", uf, vf, wf, p, q, scan=scan)
    else:
        raise ValueError(f"unknown iterated variant {variant!r}")
    regime, terms, boundary = _lifted(inp, p, q, 1.0, scan, "")
    terms = {f"{k}_{variant[1]}^1": val for k, val in terms.items()}
    return _report(variant.replace("S1", "s1"), regime, terms, boundary, "Equivalent", scan, extra)
