import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from foilmesh import FoilReconstructor
from foilmesh.errors import InsufficientInputError
from foilmesh.geometry import watertight_check
from foilmesh.io import box_scenario
from foilmesh.validation import check_points


def test_params_round_trip():
    est = FoilReconstructor(point_count=120, pressure_p=3.0)
    params = est.get_params()
    assert params["point_count"] == 120 and params["pressure_p"] == 3.0
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(epsilon=1e-3)
    assert est.epsilon == 1e-3


def test_fit_transform_box():
    X = box_scenario()
    est = FoilReconstructor(point_count=200).fit(X)
    assert est.termination_reason_ == "converged"
    assert watertight_check(est.mesh_).is_closed
    assert est.vertices_.shape[1] == 3 and est.faces_.shape[1] == 3
    assert est.n_iter_ == len(est.history_)
    assert 0 < est.pressure_ < 20
    # the fixed points are mesh vertices, so their distance is exactly zero
    assert np.all(est.transform(X) == 0)
    d = est.transform([[0, 0, 0]])
    assert d.shape == (1, 1) and d[0, 0] > 0.5
    assert est.score(X) == 0.0


def test_transform_before_fit():
    with pytest.raises(NotFittedError):
        FoilReconstructor().transform([[0, 0, 0]])


def test_check_points():
    assert check_points([[1, 2, 3]]).dtype == np.float64
    for bad in ([[1, 2]], [[np.nan, 0, 0]], np.zeros((0, 3))):
        with pytest.raises(InsufficientInputError):
            check_points(bad)
    with pytest.raises(InsufficientInputError):
        check_points([[0, 0, 0]], min_points=2)


def test_invalid_params_raise_at_fit():
    with pytest.raises(ValueError):
        FoilReconstructor(k_base=-1).fit(box_scenario())


def test_explicit_pressure_is_used():
    est = FoilReconstructor(point_count=200, pressure_p=2.5, max_iterations=5).fit(box_scenario())
    assert est.pressure_ == 2.5
