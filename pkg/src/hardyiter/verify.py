"""Verification harness: formula constants against oracle estimates, and
both sides of the reduction theorems against each other."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import constants as K
from .constants import ConditionError, ScanGrid
from .oracle import InequalitySpec, best_constant_estimate
from .transforms import WeightFn, as_weight_fn, phi_pair, product, psi_pair, v1, v1_star
from .weights import INF, Power, TwoPiecePower, ext_div, ext_pow, make_log_grid, powprod, weight_to_dict

__all__ = [
    "EQUAL_WINDOW",
    "EQUIV_WINDOW",
    "REDUCTIONS",
    "SuiteConfig",
    "Verdict",
    "check_formula_vs_oracle",
    "check_reduction",
    "compare",
    "formula_for",
    "run_suite",
    "sample_instance",
]

EQUIV_WINDOW = (1.0 / 8.0, 8.0)
EQUAL_WINDOW = (1.0 / 1.25, 1.25)
EQUAL_ALLOWANCE = 0.05

REDUCTIONS = ("RT3", "RT4", "GS3.1", "GS3.3", "Cone16", "Cone17")


@dataclass
class Verdict:
    theorem: str
    case: str
    left: float
    right: float
    window: tuple
    status: str
    reason: str = ""
    inputs: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return _ratio(self.left, self.right)

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "case": self.case,
            "inputs": self.inputs,
            "left": self.left,
            "right": self.right,
            "ratio": self.ratio,
            "window": list(self.window),
            "status": self.status,
            "reason": self.reason,
        }


def _ratio(left: float, right: float) -> float:
    if left == right and (left == 0 or math.isinf(left)):
        return 1.0
    if right == 0:
        return INF
    if math.isinf(right):
        return 0.0
    return left / right


def compare(left: float, right: float, window) -> str:
    """``Pass`` iff ``low <= left/right <= high``; both zero or both infinite pass."""
    lo, hi = window
    r = _ratio(left, right)
    return "Pass" if lo <= r <= hi else "Fail"


# ---------------------------------------------------------------------------
# Formula lookup
# ---------------------------------------------------------------------------

_ITERATED_VARIANT = {"IHI1": "C1", "IHI2": "C2", "IHI3": "C3", "IHI4": "C4"}


def formula_for(spec: InequalitySpec, scan: ScanGrid = K.DEFAULT_SCAN) -> K.ConstantReport:
    """Characterization constant for the inequality an oracle problem describes."""
    u, v, w = spec.u, spec.v, spec.w
    if spec.form in _ITERATED_VARIANT:
        variant = _ITERATED_VARIANT[spec.form]
        if spec.s == 1:
            return K.iterated_constant_s1(variant + "s1", u, v, w, spec.p, spec.q, scan)
        return K.iterated_constant(variant, u, v, w, spec.p, spec.q, spec.s, scan)
    if spec.lift != 1:
        raise ValueError("no characterization for lifted cone operators")
    table = {
        ("ConeHardy", "Dec"): K.hardy_decreasing_constant,
        ("ConeHardy", "Inc"): K.hardy_increasing_constant,
        ("ConeCopson", "Inc"): K.hardy_dual_increasing_constant,
        ("ConeCopson", "Dec"): K.copson_decreasing_constant,
    }
    key = (spec.form, spec.cone)
    if key not in table:
        raise ValueError(f"no characterization for {spec.form} on {spec.cone}")
    return table[key](u, v, w, spec.p, spec.q, scan)


def oracle_spec(spec: InequalitySpec) -> InequalitySpec:
    """The inequality the oracle should maximise.  For ``s = 1`` the
    right-hand weight is ``1/V`` (IHI1, IHI4) or ``1/V_*`` (IHI2, IHI3)."""
    if spec.form in _ITERATED_VARIANT and spec.s == 1:
        v = spec.v
        cum = v.lower if spec.form in ("IHI1", "IHI4") else v.upper
        rhs = WeightFn(lambda x: 1.0 / np.asarray(cum(x), dtype=float), "1/V", v.breaks)
        return replace(spec, v=rhs)
    return spec


def check_formula_vs_oracle(
    spec: InequalitySpec,
    window=None,
    budget: int = 30,
    seed: int = 0,
    formula_spec: InequalitySpec | None = None,
    scan: ScanGrid = K.DEFAULT_SCAN,
    theorem: str = "",
) -> Verdict:
    """Compare the characterization constant (left) with the oracle estimate
    (right).  ``formula_spec`` overrides the specification used for the
    formula; it exists for negative controls."""
    report = formula_for(formula_spec or spec, scan)
    if window is None:
        window = EQUAL_WINDOW if report.exactness == "Equal" else EQUIV_WINDOW
    est = best_constant_estimate(oracle_spec(spec), budget=budget, seed=seed)
    left, right = report.total, est.heuristic_best
    status = compare(left, right, window)
    reason = ""
    if status == "Pass" and report.exactness == "Equal" and left < est.lower_bound * (1 - EQUAL_ALLOWANCE):
        status, reason = "Fail", "formula below the certified oracle bound"
    if status == "Fail" and not reason:
        reason = "ratio outside window"
    if report.boundary:
        status, reason = "Inconclusive", "boundary supremum: " + ",".join(report.boundary)
    elif not est.stable and status == "Fail":
        status, reason = "Inconclusive", "oracle did not stabilise"
    return Verdict(
        theorem or report.theorem,
        report.regime.value,
        float(left),
        float(right),
        tuple(window),
        status,
        reason,
        _describe(spec),
    )


def _describe(spec: InequalitySpec) -> dict:
    def wdict(f):
        return weight_to_dict(f.spec) if hasattr(f, "spec") else {"kind": "derived", "label": f.label}

    out = {"form": spec.form, "cone": spec.cone, "p": spec.p, "q": spec.q}
    if spec.s is not None:
        out["s"] = spec.s
    if spec.lift != 1:
        out["lift"] = spec.lift
    out.update({"u": wdict(spec.u), "v": wdict(spec.v), "w": wdict(spec.w)})
    return out


# ---------------------------------------------------------------------------
# Reductions
# ---------------------------------------------------------------------------


def _lift_weight(u: WeightFn, factor: WeightFn, power: float, label: str) -> WeightFn:
    return product(label, (u, 1.0), (factor, power))


def _t_one_ratio(u, v, w, p, q, s, base, scan) -> float:
    """``||T 1||_{q,w} / ||1||_{s,v}`` for ``T = H_{p,u}`` or ``H*_{p,u}``."""
    uf = as_weight_fn(u)
    cum = uf.lower if base == "H" else uf.upper
    num = K.lebesgue_norm(lambda x: ext_pow(cum(x), 1.0 / p), q, w, scan=scan)
    den = K._one_norm(s, as_weight_fn(v), scan)
    return float(ext_div(num, den))


def reduction_pair(theorem: str, u, v, w, p: float, q: float, s: float, base: str = "H", grid=None):
    """Original and reduced oracle problems of a reduction theorem with
    ``T = H_{p,u}`` (``base="H"``) or ``H*_{p,u}``, plus a flag saying whether
    the reduced side also takes the ``||T 1||`` ratio into account."""
    uf, vf, wf = as_weight_fn(u, "u"), as_weight_fn(v, "v"), as_weight_fn(w, "w")
    grid = grid or make_log_grid(1e-6, 1e6, 4096)
    single = "ConeHardy" if base == "H" else "ConeCopson"
    inner_lower = "IHI1" if base == "H" else "IHI4"
    inner_upper = "IHI2" if base == "H" else "IHI3"
    if theorem == "RT3":
        phi, Phi = phi_pair(vf, s)
        orig = InequalitySpec(inner_lower, uf, vf, wf, p, q, s, grid=grid)
        red = InequalitySpec(single, _lift_weight(uf, Phi, 2 * p, "u Phi^2p"), phi, wf, s, q, cone="Dec", lift=p, grid=grid)
        return orig, red, False
    if theorem == "RT4":
        psi, Psi = psi_pair(vf, s)
        orig = InequalitySpec(inner_upper, uf, vf, wf, p, q, s, grid=grid)
        red = InequalitySpec(single, _lift_weight(uf, Psi, 2 * p, "u Psi^2p"), psi, wf, s, q, cone="Inc", lift=p, grid=grid)
        return orig, red, False
    if theorem in ("GS3.1", "GS3.3"):
        cone = "Dec" if theorem == "GS3.1" else "Inc"
        cum = vf.lower if cone == "Dec" else vf.upper
        rhs = WeightFn(lambda x: _gs_weight(cum(x), vf(x), s), "V^s v^(1-s)", vf.breaks)
        orig = InequalitySpec(single, uf, vf, wf, s, q, cone=cone, lift=p, grid=grid)
        form = inner_upper if cone == "Dec" else inner_lower
        red = InequalitySpec(form, uf, rhs, wf, p, q, s, grid=grid)
        limit = vf.total()
        return orig, red, math.isfinite(limit)
    if theorem in ("Cone17", "Cone16"):
        if theorem == "Cone17":
            Vt, cum, cone, target = v1(vf), vf.lower, "Dec", "Inc"
        else:
            Vt, cum, cone, target = v1_star(vf), vf.upper, "Inc", "Dec"
        vt = WeightFn(lambda x: _swap_weight(Vt(x), cum(x), vf(x)), "{V1 V}^-2 v", vf.breaks)
        orig = InequalitySpec(single, uf, vf, wf, s, q, cone=cone, lift=p, grid=grid)
        red = InequalitySpec(single, _lift_weight(uf, Vt, 4.0 * p / s, "u V1^(4p/s)"), vt, wf, s, q, cone=target, lift=p, grid=grid)
        return orig, red, True
    raise ValueError(f"unknown reduction {theorem!r}")


def _gs_weight(V, v, s):
    return powprod((V, s), (v, 1.0 - s))


def _swap_weight(V1, V, v):
    return powprod((V1, -2.0), (V, -2.0), (v, 1.0))


def check_reduction(
    theorem: str,
    u,
    v,
    w,
    params: K.Params,
    window=EQUIV_WINDOW,
    budget: int = 30,
    seed: int = 0,
    base: str = "H",
    grid=None,
    scan: ScanGrid = K.DEFAULT_SCAN,
) -> Verdict:
    """Oracle constants of both sides of a reduction theorem.

    ``params.p`` is the lift exponent of ``T = H_{p,u}``, ``params.q`` the
    target exponent and ``params.s`` the right-hand exponent.
    """
    p, q, s = params.p, params.q, params.s
    try:
        orig, red, with_ratio = reduction_pair(theorem, u, v, w, p, q, s, base, grid)
    except ConditionError as exc:
        return Verdict(theorem, "", math.nan, math.nan, tuple(window), "Inconclusive", f"hypothesis fails: {exc}")
    left = best_constant_estimate(orig, budget=budget, seed=seed)
    right = best_constant_estimate(red, budget=budget, seed=seed)
    rv = right.heuristic_best
    if with_ratio:
        rv = max(rv, _t_one_ratio(u, v, w, p, q, s, base, scan))
    status = compare(left.heuristic_best, rv, window)
    reason = "" if status == "Pass" else "ratio outside window"
    if status == "Fail" and not (left.stable and right.stable):
        status, reason = "Inconclusive", "oracle did not stabilise"
    case = K.classify(s, q if math.isfinite(q) else INF).value
    return Verdict(theorem, case, float(left.heuristic_best), float(rv), tuple(window), status, reason, _describe(orig))


# ---------------------------------------------------------------------------
# Sampling and suites
# ---------------------------------------------------------------------------

# exponent boxes per case: ranges for (p, q) of the cone theorem or (s, p, q)
# of the iterated ones; q ranges given as offsets from the relevant exponent
_CONE_BOXES = {
    "I": lambda r: (p := r.uniform(1.2, 4.0), r.uniform(p, p + 3.0)),
    "II": lambda r: (p := r.uniform(1.5, 4.0), r.uniform(0.5, p - 0.3)),
    "III": lambda r: (p := r.uniform(0.4, 1.0), r.uniform(0.2, p - 0.1)),
    "IV": lambda r: (p := r.uniform(0.3, 1.0), r.uniform(p, 3.0)),
    "V": lambda r: (r.uniform(0.3, 1.0), INF),
    "VI": lambda r: (r.uniform(1.2, 4.0), INF),
}
_ITER_BOXES = {
    "i": lambda r: (s := r.uniform(1.5, 3.0), r.uniform(0.5, s - 0.3), r.uniform(s, s + 2.0)),
    "ii": lambda r: (s := r.uniform(1.5, 3.0), r.uniform(0.5, s - 0.3), r.uniform(0.5, s - 0.2)),
    "iii": lambda r: (s := r.uniform(1.2, 2.5), r.uniform(s, s + 2.0), r.uniform(0.5, s - 0.2)),
    "iv": lambda r: (s := r.uniform(1.2, 2.5), r.uniform(s, s + 2.0), r.uniform(s, s + 2.0)),
    "v": lambda r: (s := r.uniform(1.2, 2.5), r.uniform(s, s + 2.0), INF),
    "vi": lambda r: (s := r.uniform(1.5, 3.0), r.uniform(0.5, s - 0.3), INF),
}

THEOREMS = {
    "Thm2.5": ("ConeHardy", "Dec"),
    "Thm2.5.00": ("ConeCopson", "Inc"),
    "Thm2.5.0": ("ConeHardy", "Inc"),
    "Thm2.5.0000": ("ConeCopson", "Dec"),
    "C1": ("IHI1", None),
    "C2": ("IHI2", None),
    "C3": ("IHI3", None),
    "C4": ("IHI4", None),
}


def _exponent(r, lo, hi, band):
    while True:
        x = r.uniform(lo, hi)
        if abs(x + 1.0) >= band:
            return round(x, 6)


def _balanced_w(a, b, p_op, rhs, q, delta, rhs_dim_shift=1.0):
    """Two-piece target weight centred on the scale-invariant exponent, so
    every supremum is attained in the interior."""
    lhs_dim = p_op(a)
    rhs_dim = (b + rhs_dim_shift) / rhs
    if math.isinf(q):
        g = rhs_dim - lhs_dim
    else:
        g = q * (rhs_dim - lhs_dim) - 1.0
    g = round(g, 9)
    return TwoPiecePower(1.0, g + delta, 1.0, g - delta, 1.0)


def sample_instance(theorem: str, case: str, rng, grid, exp_range=(-3.0, 3.0), band=0.05, scan=K.DEFAULT_SCAN, tries=60):
    """Draw an inequality in the requested case whose characterization is
    finite, nonzero and attained in the interior."""
    form, cone = THEOREMS[theorem]
    for _ in range(tries):
        a = _exponent(rng, *exp_range, band)
        b = _exponent(rng, *exp_range, band)
        delta = round(rng.uniform(0.3, 1.5), 6)
        if form in _ITERATED_VARIANT:
            s, p, q = (round(x, 6) if math.isfinite(x) else x for x in _ITER_BOXES[case](rng))
            w = _balanced_w(a, b, lambda a_: 1.0 + (a_ + 1.0) / p, s, q, delta)
            spec = InequalitySpec(form, Power(1.0, a), Power(1.0, b), w, p, q, s, grid=grid)
        else:
            p, q = (round(x, 6) if math.isfinite(x) else x for x in _CONE_BOXES[case](rng))
            w = _balanced_w(a, b, lambda a_: a_ + 1.0, p, q, delta)
            spec = InequalitySpec(form, Power(1.0, a), Power(1.0, b), w, p, q, cone=cone, grid=grid)
        try:
            rep = formula_for(spec, scan)
        except (ConditionError, ValueError):
            continue
        if rep.boundary or not (0 < rep.total < INF) or not math.isfinite(rep.total):
            continue
        return spec
    return None


@dataclass
class SuiteConfig:
    theorems: tuple = ("Thm2.5",)
    cases: tuple = ("I", "II", "III", "IV")
    samples: int = 20
    grid: tuple = (1e-6, 1e6, 4096)
    equiv_window: tuple = EQUIV_WINDOW
    equal_window: tuple = EQUAL_WINDOW
    seed: int = 0
    budget: int = 30
    exp_range: tuple = (-3.0, 3.0)
    band: float = 0.05
    negative_control: bool = False

    def to_dict(self) -> dict:
        return {
            "theorems": list(self.theorems),
            "cases": list(self.cases),
            "samples": self.samples,
            "grid": list(self.grid),
            "equiv_window": list(self.equiv_window),
            "equal_window": list(self.equal_window),
            "seed": self.seed,
            "budget": self.budget,
            "exp_range": list(self.exp_range),
            "band": self.band,
            "negative_control": self.negative_control,
        }


def _cases_for(theorem: str, cases) -> list:
    if theorem in REDUCTIONS:
        return [c for c in cases if c in _ITER_BOXES] or ["i"]
    valid = _ITER_BOXES if THEOREMS[theorem][0] in _ITERATED_VARIANT else _CONE_BOXES
    return [c for c in cases if c in valid]


def run_suite(config: SuiteConfig) -> dict:
    """Run every (theorem, case, sample) triple and aggregate the verdicts.

    Each triple draws from its own generator seeded by ``(seed, theorem,
    case, sample)`` so the report does not depend on execution order.
    """
    grid = make_log_grid(*config.grid)
    instances = []
    for theorem in config.theorems:
        for case in _cases_for(theorem, config.cases):
            for k in range(config.samples):
                rng = np.random.default_rng([config.seed, _stable_hash(theorem), _stable_hash(case), k])
                instances.append(_run_one(theorem, case, k, rng, grid, config))
    if config.negative_control:
        instances.append(_negative_control(grid, config))
    summary = {}
    for inst in instances:
        key = f"{inst['theorem']}/{inst['case']}"
        bucket = summary.setdefault(key, {"Pass": 0, "Fail": 0, "Inconclusive": 0})
        bucket[inst["status"]] += 1
    return {"config": config.to_dict(), "instances": instances, "summary": summary}


def _stable_hash(text: str) -> int:
    return int.from_bytes(text.encode("utf-8"), "little") % (2**31)


def _reduction_v_range(theorem: str, s: float) -> tuple:
    """Exponents ``b`` of ``v = x^b`` that satisfy the reduction's
    integrability hypothesis with some margin."""
    if theorem == "RT3":
        return (-0.5, min(0.5, s - 1.2))
    if theorem == "RT4":
        return (s - 0.8, s + 0.5)
    if theorem == "Cone16":
        return (-2.5, -1.3)
    return (-0.5, 0.5)


def _run_one(theorem, case, k, rng, grid, config) -> dict:
    ident = f"{theorem}/{case}/{k}"
    if theorem in REDUCTIONS:
        s, p, q = _ITER_BOXES[case](rng)
        a = _exponent(rng, -0.9, 1.5, config.band)
        b = _exponent(rng, *_reduction_v_range(theorem, s), config.band)
        # the cone reductions start from the lifted single operator, one order lower
        shift = 0.0 if theorem in ("Cone16", "Cone17") else 1.0
        w = _balanced_w(a, b, lambda a_: shift + (a_ + 1.0) / p, s, q, round(rng.uniform(0.3, 1.5), 6))
        verdict = check_reduction(
            theorem, Power(1.0, a), Power(1.0, b), w, K.Params(p, q, s), config.equiv_window, config.budget,
            config.seed, grid=grid,
        )
        verdict.case = case
    else:
        spec = sample_instance(theorem, case, rng, grid, config.exp_range, config.band)
        if spec is None:
            verdict = Verdict(theorem, case, math.nan, math.nan, config.equiv_window, "Inconclusive", "no admissible sample")
        else:
            rep = formula_for(spec)
            window = config.equal_window if rep.exactness == "Equal" else config.equiv_window
            verdict = check_formula_vs_oracle(spec, window, config.budget, config.seed, theorem=theorem)
    out = {"id": ident}
    out.update(verdict.to_dict())
    return out


# v is cheap beyond the knot, which the second form exploits and the first
# cannot; the two constants differ by a factor of several hundred
NEGATIVE_CONTROL_WEIGHTS = (
    Power(1.0, -0.7),
    TwoPiecePower(1.0, 0.3, 1e-4, 1.2, 1.0),
    TwoPiecePower(1.0, -0.6, 1e-4, -7.4, 1.0),
)


def _negative_control(grid, config) -> dict:
    """Formula of the first iterated inequality against the oracle of the
    second on weights for which the two constants differ by orders of
    magnitude."""
    u, v, w = NEGATIVE_CONTROL_WEIGHTS
    spec = InequalitySpec("IHI2", u, v, w, 1.0, 2.0, 2.0, grid=grid)
    formula = InequalitySpec("IHI1", u, v, w, 1.0, 2.0, 2.0, grid=grid)
    verdict = check_formula_vs_oracle(spec, config.equiv_window, config.budget, config.seed, formula_spec=formula, theorem="negative_control")
    out = {"id": "negative_control"}
    out.update(verdict.to_dict())
    return out
