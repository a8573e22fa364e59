import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renewrisk.marginals import (
    ExponentialTail,
    LogPareto,
    Lognormal,
    Pareto,
    PointMass,
    WeibullHeavy,
    marginal_from_dict,
    quantile,
    sample,
    tail,
)

CONTINUOUS = [Pareto(2.0), Pareto(1.5, 3.0), Lognormal(0.0, 1.0), Lognormal(1.0, 0.5),
              WeibullHeavy(0.5), WeibullHeavy(0.3, 2.0), LogPareto(2.0)]


def test_tail_examples():
    assert tail(Pareto(2, 1), 10) == pytest.approx(0.01, rel=1e-15)
    assert tail(WeibullHeavy(0.5, 1), 4) == pytest.approx(math.exp(-2), rel=1e-15)
    assert tail(Lognormal(0, 1), 1) == pytest.approx(0.5, abs=1e-15)


def test_tail_below_support_is_one():
    assert tail(Pareto(2, 3), 1.0) == 1.0
    assert tail(Lognormal(0, 1), -1.0) == 1.0
    assert tail(PointMass(5), 4.9) == 1.0
    assert tail(PointMass(5), 5.0) == 0.0


def test_quantile_examples():
    assert quantile(Pareto(2, 1), 0.01) == pytest.approx(10.0, rel=1e-14)
    assert quantile(Pareto(2, 1), 0.5) == pytest.approx(math.sqrt(2), rel=1e-14)
    assert quantile(PointMass(5), 0.3) == 5.0


def test_sample_examples():
    assert sample(Pareto(2, 1), 0.25) == pytest.approx(2.0, rel=1e-15)
    assert sample(WeibullHeavy(0.5, 1), math.exp(-2)) == pytest.approx(4.0, rel=1e-14)
    assert sample(Lognormal(0, 1), 0.5) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("q", [0.0, -0.1, 1.1, np.nan])
def test_quantile_domain(q):
    with pytest.raises(ValueError):
        quantile(Pareto(2), q)


@pytest.mark.parametrize("m", CONTINUOUS, ids=repr)
def test_round_trip(m):
    # quantiles must be representable: LogPareto passes 1e308 near q = 2e-6
    q = np.geomspace(max(1e-12, float(m.tail(1e300))), 1.0, 400)[:-1]
    assert np.max(np.abs(m.tail(m.quantile(q)) - q)) <= 1e-9


@pytest.mark.parametrize("m", CONTINUOUS, ids=repr)
def test_tail_nonincreasing_and_vanishing(m):
    x = np.concatenate([[0.0], np.geomspace(1e-6, 1e12, 2000)])
    t = m.tail(x)
    assert np.all(np.diff(t) <= 1e-15)
    assert t[0] <= 1.0
    assert t[-1] < 0.05


@pytest.mark.parametrize("m", CONTINUOUS + [ExponentialTail(1.0)], ids=repr)
def test_log_tail_matches_tail(m):
    lx = np.linspace(-3, 6, 50)
    expect = np.log(m.tail(np.exp(lx)))
    assert np.allclose(m.log_tail_at(lx), expect, rtol=1e-10, atol=1e-12)


def test_log_tail_far_beyond_float_range():
    # log(1 + log(1 + x)) with x = e^3000
    assert LogPareto(2).log_tail_at(3000.0) == pytest.approx(-2 * math.log(3001.0), rel=1e-12)
    assert Pareto(2).log_tail_at(3000.0) == -6000.0


@pytest.mark.parametrize("m", [Pareto(2.0), Lognormal(0, 1), WeibullHeavy(0.5), LogPareto(2.0)], ids=repr)
def test_empirical_quantile_levels(m):
    rng = np.random.default_rng(11)
    n = 10**6
    xs = m.sample(1.0 - rng.random(n))
    for level in (0.1, 0.01, 0.001):
        p = np.mean(xs > m.quantile(level))
        assert abs(p - level) <= 3 * math.sqrt(level * (1 - level) / n)


@settings(max_examples=100, deadline=None)
@given(st.floats(1.0, 1e6), st.floats(1.0001, 100.0), st.floats(0.1, 5.0))
def test_pareto_scaling_exact(x, v, alpha):
    m = Pareto(alpha)
    assert m.tail(v * x) / m.tail(x) == pytest.approx(v**-alpha, rel=1e-12)


def test_invalid_parameters():
    for bad in (lambda: Pareto(0), lambda: Pareto(1, -1), lambda: Lognormal(0, 0),
                lambda: WeibullHeavy(1.0), lambda: PointMass(-1), lambda: LogPareto(np.inf)):
        with pytest.raises(ValueError):
            bad()


@pytest.mark.parametrize("m", CONTINUOUS + [PointMass(5.0), ExponentialTail(2.0)], ids=repr)
def test_dict_round_trip(m):
    assert marginal_from_dict(m.to_dict()) == m


def test_unknown_kind():
    with pytest.raises(ValueError, match="unknown marginal"):
        marginal_from_dict({"kind": "cauchy"})
