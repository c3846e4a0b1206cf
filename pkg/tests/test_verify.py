import json
import math

import numpy as np
import pytest

import hardyiter.constants as K
from hardyiter.oracle import InequalitySpec
from hardyiter.verify import (
    EQUAL_WINDOW,
    EQUIV_WINDOW,
    REDUCTIONS,
    SuiteConfig,
    THEOREMS,
    Verdict,
    check_formula_vs_oracle,
    check_reduction,
    compare,
    formula_for,
    reduction_pair,
    run_suite,
    sample_instance,
)
from hardyiter.weights import INF, Power, TwoPiecePower, Zero, make_log_grid

ONE = Power(1, 0)
DROP = TwoPiecePower(1, 0, 1, -4, 1)
GRID = make_log_grid(1e-6, 1e6, 1025)


class TestCompare:
    @pytest.mark.parametrize("l,r", [(1, 1), (2, 1.7), (0, 0), (INF, INF)])
    def test_pass(self, l, r):
        assert compare(l, r, EQUAL_WINDOW) == "Pass"

    @pytest.mark.parametrize("l,r", [(1, 2), (0, 1), (1, 0), (INF, 5)])
    def test_fail(self, l, r):
        assert compare(l, r, EQUAL_WINDOW) == "Fail"

    def test_window_edges_inclusive(self):
        assert compare(8, 1, EQUIV_WINDOW) == "Pass"
        assert compare(1, 8, EQUIV_WINDOW) == "Pass"
        assert compare(8.001, 1, EQUIV_WINDOW) == "Fail"

    def test_verdict_dict(self):
        v = Verdict("Thm2.5", "I", 2.0, 1.0, EQUIV_WINDOW, "Pass")
        d = v.to_dict()
        assert d["ratio"] == 2.0 and d["window"] == [0.125, 8.0]
        json.dumps(d)


class TestFormulaVsOracle:
    def test_golden(self):
        spec = InequalitySpec("ConeHardy", ONE, ONE, DROP, 2, 2, cone="Dec", grid=GRID)
        v = check_formula_vs_oracle(spec, budget=10)
        assert v.status == "Pass"
        # A0 = A1 = 2/3
        assert v.left == pytest.approx(4 / 3, rel=1e-6)
        assert v.window == EQUIV_WINDOW  # p = q is case I

    def test_zero_w(self):
        spec = InequalitySpec("ConeHardy", ONE, ONE, Zero(), 2, 2, cone="Dec", grid=GRID)
        v = check_formula_vs_oracle(spec, budget=5)
        assert v.status == "Pass" and v.left == 0 and v.right == 0

    def test_negative_control_fails(self):
        report = run_suite(SuiteConfig(samples=0, negative_control=True, budget=10, grid=(1e-6, 1e6, 1025)))
        (inst,) = report["instances"]
        assert inst["id"] == "negative_control"
        assert inst["status"] == "Fail"
        assert inst["ratio"] < 1 / 8

    def test_formula_for_routes(self):
        spec = InequalitySpec("IHI1", ONE, ONE, DROP, 1, 2, 1, grid=GRID)
        assert formula_for(spec).theorem.startswith("C1")
        with pytest.raises(ValueError):
            formula_for(InequalitySpec("PlainHardy", ONE, ONE, DROP, 2, 2, grid=GRID))


class TestReduction:
    @pytest.mark.parametrize("theorem", ["RT3", "GS3.1", "Cone17"])
    def test_simple_weights(self, theorem):
        v = check_reduction(theorem, ONE, ONE, TwoPiecePower(1, 0, 1, -4, 1), K.Params(1, 2, 2), budget=10, grid=GRID)
        assert v.status == "Pass", v

    def test_rt4(self):
        w = TwoPiecePower(1, -1.5, 1, -3.5, 1)
        v = check_reduction("RT4", ONE, Power(1, 1.5), w, K.Params(1, 2, 2), budget=10, grid=GRID)
        assert v.status == "Pass", v

    def test_hypothesis_failure_is_inconclusive(self):
        # psi needs int_x^inf v^(1-s') < inf, false for v = 1
        v = check_reduction("RT4", ONE, ONE, DROP, K.Params(1, 2, 2), budget=5, grid=GRID)
        assert v.status == "Inconclusive" and "hypothesis" in v.reason

    def test_zero_u(self):
        v = check_reduction("RT3", Zero(), ONE, DROP, K.Params(1, 2, 2), budget=5, grid=GRID)
        assert v.status == "Pass" and v.left == 0 and v.right == 0

    def test_unknown(self):
        with pytest.raises(ValueError):
            reduction_pair("RT9", ONE, ONE, DROP, 1, 2, 2)


class TestSampling:
    @pytest.mark.parametrize("theorem", sorted(THEOREMS))
    def test_sampled_in_case(self, theorem):
        cases = ("i", "ii", "iii", "iv") if theorem.startswith("C") else ("I", "II", "III", "IV")
        for case in cases:
            rng = np.random.default_rng([3, len(theorem), len(case)])
            spec = sample_instance(theorem, case, rng, GRID)
            if spec is None:
                continue
            rep = formula_for(spec)
            assert 0 < rep.total < INF and not rep.boundary
            assert rep.regime.value == case

    def test_deterministic(self):
        a = sample_instance("C2", "iii", np.random.default_rng(7), GRID)
        b = sample_instance("C2", "iii", np.random.default_rng(7), GRID)
        assert (a.p, a.q, a.s) == (b.p, b.q, b.s)
        assert (a.u.spec, a.v.spec, a.w.spec) == (b.u.spec, b.v.spec, b.w.spec)


class TestSuite:
    def test_empty(self):
        report = run_suite(SuiteConfig(samples=0))
        assert report["instances"] == [] and report["summary"] == {}

    def test_small_suite_deterministic(self):
        cfg = SuiteConfig(theorems=("Thm2.5", "C1"), cases=("I", "i"), samples=1, budget=8, grid=(1e-5, 1e5, 513))
        a, b = run_suite(cfg), run_suite(cfg)
        assert json.dumps(a, sort_keys=True, default=str) == json.dumps(b, sort_keys=True, default=str)
        assert set(a["summary"]) == {"Thm2.5/I", "C1/i"}
        assert all(i["status"] == "Pass" for i in a["instances"])

    def test_order_independent(self):
        # each instance draws from its own generator
        one = run_suite(SuiteConfig(cases=("II",), samples=1, budget=5, grid=(1e-4, 1e4, 257)))
        both = run_suite(SuiteConfig(cases=("I", "II"), samples=1, budget=5, grid=(1e-4, 1e4, 257)))
        assert one["instances"][0] == both["instances"][1]

    def test_reductions_listed(self):
        assert set(REDUCTIONS) == {"RT3", "RT4", "GS3.1", "GS3.3", "Cone16", "Cone17"}
        cfg = SuiteConfig(theorems=("RT3",), cases=("ii",), samples=1, budget=5, grid=(1e-4, 1e4, 257))
        (inst,) = run_suite(cfg)["instances"]
        assert inst["case"] == "ii" and not math.isnan(inst["left"])
