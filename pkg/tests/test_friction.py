import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from optislip.friction import (
    FrictionParams,
    InvalidSurfaceError,
    grid_optimal_slip,
    is_valid_triple,
    mu,
    mu_slope,
    optimal_slip,
    reference_surface,
)

# Frozen from a 40-digit mpmath bisection on the stationarity condition.
REFERENCE_OPTIMA = {
    "D": (0.17000840951, 1.17001992885),
    "W": (0.130838643988, 0.801339396189),
    "S": (0.05999636606, 0.190037942537),
}

cube_params = st.builds(
    lambda b1, b2, b3: (b1, b2, b3),
    st.floats(0.15, 1.35),
    st.floats(20.0, 100.0),
    st.floats(0.05, 0.55),
)


def valid(triple):
    assume(is_valid_triple(*triple))
    return FrictionParams(*triple)


def test_reference_triples_are_published_values():
    assert reference_surface("D").as_tuple() == (1.2801, 23.99, 0.52)
    assert reference_surface("W").as_tuple() == (0.857, 33.822, 0.347)
    assert reference_surface("S").as_tuple() == (0.1946, 94.129, 0.0646)


def test_unknown_surface_tag():
    with pytest.raises(KeyError):
        reference_surface("ice")


def test_mu_examples():
    dry = reference_surface("D")
    assert mu(dry, 0.0) == 0.0
    assert mu(dry, 0.17) == pytest.approx(1.17001992841, abs=1e-10)
    assert mu(reference_surface("S"), 1.0) == pytest.approx(0.13, abs=1e-12)


def test_mu_rejects_out_of_range_slip():
    dry = reference_surface("D")
    for bad in (-0.01, 1.01, float("nan")):
        with pytest.raises(ValueError):
            mu(dry, bad)
    with pytest.raises(ValueError):
        mu_slope(dry, 1.5)
    with pytest.raises(ValueError):
        mu(dry, np.array([0.1, 2.0]))


def test_mu_slope_examples():
    dry = reference_surface("D")
    assert mu_slope(dry, 0.0) == pytest.approx(30.189599, abs=1e-9)
    assert abs(mu_slope(dry, optimal_slip(dry).lambda_star)) < 1e-9
    assert mu_slope(dry, 1.0) == pytest.approx(-0.52, abs=1e-8)


@pytest.mark.parametrize("tag", ["D", "W", "S"])
def test_reference_optima(tag):
    params = reference_surface(tag)
    lam, peak = REFERENCE_OPTIMA[tag]
    point = optimal_slip(params)
    assert point.lambda_star == pytest.approx(lam, abs=1e-10)
    assert point.mu_star == pytest.approx(peak, abs=1e-10)
    brute = grid_optimal_slip(params, 1000)
    assert abs(brute.lambda_star - point.lambda_star) <= 1e-3


def test_invalid_triples_rejected():
    with pytest.raises(InvalidSurfaceError):
        FrictionParams(0.0, 20.0, 0.1)
    with pytest.raises(InvalidSurfaceError):
        FrictionParams(0.01, 2.0, 0.5)  # b1*b2 < b3
    with pytest.raises(InvalidSurfaceError):
        FrictionParams(1.0, 2.0, 0.1)  # peak beyond slip 1


def test_json_round_trip():
    dry = reference_surface("D")
    assert json.loads(dry.to_json()) == {"beta1": 1.2801, "beta2": 23.99, "beta3": 0.52}
    assert FrictionParams.from_json(dry.to_json()) == dry


@given(cube_params)
def test_mu_at_zero_slip_is_zero(triple):
    assert mu(valid(triple), 0.0) == 0.0


@settings(max_examples=100)
@given(cube_params)
def test_unimodal_on_grid(triple):
    params = valid(triple)
    lam_star = optimal_slip(params).lambda_star
    grid = np.linspace(0.0, 1.0, 1000)
    values = mu(params, grid)
    rising = grid < lam_star
    assert np.all(np.diff(values[rising]) > 0)
    assert np.all(np.diff(values[~rising]) < 0)
    assert values.max() <= optimal_slip(params).mu_star + 1e-15


@settings(max_examples=200)
@given(cube_params)
def test_closed_form_matches_grid_argmax(triple):
    params = valid(triple)
    assert abs(optimal_slip(params).lambda_star - grid_optimal_slip(params).lambda_star) <= 1e-3


@settings(max_examples=100)
@given(cube_params, st.floats(0.01, 0.99))
def test_slope_matches_central_differences(triple, lam):
    params = valid(triple)
    h = 1e-6
    fd = (mu(params, lam + h) - mu(params, lam - h)) / (2 * h)
    exact = mu_slope(params, lam)
    # relative error on the derivative, floored where the slope crosses zero
    assert abs(fd - exact) <= 1e-6 * max(abs(exact), 1.0)


def test_slope_limit_is_minus_beta3():
    params = reference_surface("S")
    assert math.isclose(mu_slope(params, 1.0), -params.beta3, rel_tol=1e-12)
