import math

import numpy as np
import pytest
from scipy.integrate import quad

from hardyiter.weights import (
    INF,
    DomainError,
    ExtendedValue,
    Power,
    StepTable,
    TwoPiecePower,
    UnsupportedTransform,
    WeightFormatError,
    Zero,
    dual_transform,
    evaluate,
    ext_div,
    ext_mul,
    ext_pow,
    integrate_lower,
    integrate_upper,
    make_log_grid,
    scale_weight,
    total_mass,
    weight_from_dict,
    weight_to_dict,
)

DROP = TwoPiecePower(1, 0, 1, -4, 1)


class TestEvaluate:
    def test_constant(self):
        assert evaluate(Power(1, 0), 5) == 1

    def test_two_piece_above_knot(self):
        assert evaluate(DROP, 2) == pytest.approx(0.0625, rel=1e-15)

    def test_two_piece_at_knot_uses_upper_piece(self):
        assert evaluate(TwoPiecePower(2, 0, 3, 0, 1), 1) == 3

    def test_zero(self):
        assert evaluate(Zero(), 1) == 0

    def test_step_outside_support(self):
        w = StepTable((1, 2, 3), (4, 5))
        assert evaluate(w, np.array([0.5, 1.0, 2.5, 3.0])).tolist() == [0, 4, 5, 0]

    @pytest.mark.parametrize("x", [0, -1])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            evaluate(Power(1, 0), x)


class TestIntegrate:
    def test_lower_constant(self):
        assert integrate_lower(Power(1, 0), 3) == 3

    def test_lower_divergent(self):
        assert integrate_lower(Power(1, -2), 1) == INF

    def test_lower_divergence_matches_cutoff_growth(self):
        vals = [quad(lambda x: x**-2, eps, 1)[0] for eps in (1e-2, 1e-4, 1e-6)]
        assert vals[0] < vals[1] < vals[2] and vals[2] > 1e5

    def test_upper(self):
        assert integrate_upper(Power(1, -2), 1) == pytest.approx(1.0, rel=1e-14)
        assert integrate_upper(Power(1, -2), 1) == pytest.approx(quad(lambda x: x**-2, 1, np.inf)[0], rel=1e-10)

    def test_upper_divergent(self):
        assert integrate_upper(Power(1, 0), 1) == INF

    def test_zero(self):
        assert integrate_lower(Zero(), 1) == 0
        assert integrate_upper(Zero(), 7) == 0

    @pytest.mark.parametrize("c,alpha", [(1.0, 0.0), (2.5, -0.5), (0.3, 1.7), (1.0, -0.95)])
    @pytest.mark.parametrize("t", [0.01, 1.0, 37.0])
    def test_power_rule_against_quadrature(self, c, alpha, t):
        exact = c * t ** (alpha + 1) / (alpha + 1)
        assert integrate_lower(Power(c, alpha), t) == pytest.approx(exact, rel=1e-13)
        num = quad(lambda x: c * x**alpha, 0, t, epsrel=1e-13, limit=200)[0]
        assert integrate_lower(Power(c, alpha), t) == pytest.approx(num, rel=1e-10)

    def test_two_piece(self):
        assert integrate_lower(DROP, 2) == pytest.approx(1 + (1 - 2**-3) / 3, rel=1e-14)
        assert integrate_upper(DROP, 0.5) == pytest.approx(0.5 + 1 / 3, rel=1e-14)
        assert total_mass(DROP) == pytest.approx(4 / 3, rel=1e-14)

    def test_step(self):
        w = StepTable((0, 1, 3), (2, 0.5))
        assert integrate_lower(w, 2) == pytest.approx(2.5)
        assert integrate_upper(w, 2) == pytest.approx(0.5)
        assert total_mass(w) == pytest.approx(3.0)

    @pytest.mark.parametrize("w", [Power(1, -0.3), DROP, StepTable((0.5, 1, 4), (1, 3)), TwoPiecePower(2, -2.5, 1, 0.5, 3)])
    def test_monotone(self, w):
        ts = np.geomspace(1e-3, 1e3, 101)
        lo = np.asarray(integrate_lower(w, ts))
        hi = np.asarray(integrate_upper(w, ts))
        assert np.all(lo[:-1] <= lo[1:])
        assert np.all(hi[:-1] >= hi[1:])


class TestDualTransform:
    @pytest.mark.parametrize("alpha", [0.0, -1.3, 2.2])
    def test_density_power(self, alpha):
        assert dual_transform(Power(1, alpha), "density") == Power(1, -alpha - 2)

    @pytest.mark.parametrize("alpha", [0.0, -1.3, 2.2])
    def test_plain_power(self, alpha):
        assert dual_transform(Power(1, alpha), "plain") == Power(1, -alpha)

    def test_involution(self):
        w = Power(1, 0)
        assert dual_transform(dual_transform(w, "density"), "density") == w

    @pytest.mark.parametrize("w", [Power(3, 0.7), TwoPiecePower(2, 0.5, 0.25, -3, 4.0)])
    def test_involution_fields(self, w):
        back = dual_transform(dual_transform(w, "density"), "density")
        assert type(back) is type(w)
        for name, val in weight_to_dict(w).items():
            if name != "kind":
                assert weight_to_dict(back)[name] == pytest.approx(val, rel=1e-15, abs=1e-15)

    def test_density_preserves_mass(self):
        w = TwoPiecePower(2, 0.5, 0.25, -3, 4.0)
        d = dual_transform(w, "density")
        # int_a^b w = int_{1/b}^{1/a} w(1/t)/t^2
        assert integrate_upper(w, 0.5) - integrate_upper(w, 8) == pytest.approx(
            integrate_lower(d, 2) - integrate_lower(d, 1 / 8), rel=1e-12
        )

    def test_step_plain_reverses(self):
        w = StepTable((1, 2, 4), (5, 7))
        d = dual_transform(w, "plain")
        assert d.breaks == (0.25, 0.5, 1.0)
        assert d.values == (7, 5)

    def test_step_density_preserves_step_masses(self):
        w = StepTable((1, 2, 4), (5, 7))
        d = dual_transform(w, "density")
        assert total_mass(d) == pytest.approx(total_mass(w))

    def test_step_at_origin_unsupported(self):
        with pytest.raises(UnsupportedTransform):
            dual_transform(StepTable((0, 1), (1,)), "density")

    def test_unknown_kind(self):
        with pytest.raises(UnsupportedTransform):
            dual_transform(Power(1, 0), "shift")


class TestGrid:
    def test_three_points(self):
        g = make_log_grid(1, 100, 3)
        assert g.points.tolist() == pytest.approx([1, 10, 100], rel=1e-14)

    def test_decades(self):
        g = make_log_grid(1e-6, 1e6, 13)
        assert g.points == pytest.approx(10.0 ** np.arange(-6, 7), rel=1e-12)

    def test_endpoints_and_ratio(self):
        g = make_log_grid(1e-6, 1e6, 4096)
        assert g.points[0] == 1e-6 and g.points[-1] == 1e6
        r = g.points[1:] / g.points[:-1]
        assert np.allclose(r, g.ratio, rtol=1e-12)

    @pytest.mark.parametrize("args", [(2, 2, 2), (0, 1, 4), (1, 2, 1), (1, 2, 2.5)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            make_log_grid(*args)


class TestExtended:
    def test_conventions(self):
        assert ext_mul(0.0, INF) == 0
        assert ext_div(INF, INF) == 0
        assert ext_div(0.0, 0.0) == 0
        assert ext_div(1.0, 0.0) == INF
        assert ext_pow(0.0, -1.0) == INF
        assert ext_pow(INF, -0.5) == 0

    def test_extended_value(self):
        zero, inf = ExtendedValue(0), ExtendedValue(INF)
        assert zero * inf == 0
        assert inf / inf == 0
        assert zero / zero == 0
        assert not inf.is_finite

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            ExtendedValue(-1)


class TestJson:
    @pytest.mark.parametrize("w", [Power(1, 0), DROP, StepTable((0, 1), (1,)), Zero()])
    def test_round_trip(self, w):
        assert weight_from_dict(weight_to_dict(w)) == w

    def test_unknown_key(self):
        with pytest.raises(WeightFormatError) as exc:
            weight_from_dict({"kind": "power", "c": 1, "alpha": 0, "beta": 2}, "u")
        assert exc.value.path == "u.beta"

    def test_missing_key(self):
        with pytest.raises(WeightFormatError) as exc:
            weight_from_dict({"kind": "power", "c": 1}, "v")
        assert exc.value.path == "v.alpha"

    def test_invalid_values(self):
        with pytest.raises(WeightFormatError):
            weight_from_dict({"kind": "step", "breaks": [1, 0.5], "values": [1]})
        with pytest.raises(WeightFormatError):
            weight_from_dict({"kind": "power", "c": -1, "alpha": 0})

    def test_scale(self):
        assert scale_weight(DROP, 2) == TwoPiecePower(2, 0, 2, -4, 1)
        assert math.isclose(total_mass(scale_weight(StepTable((0, 2), (1,)), 3)), 6)
