import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from wstate_optomech.analysis import random_w_states
from wstate_optomech.estimator import CrabTransfer, SequentialTransfer, check_params, check_w_states
from wstate_optomech.model import SystemParams

P2 = SystemParams(n=2, kappa0=10.0, gamma_m=1e-3)


@pytest.fixture(scope="module")
def fitted():
    return CrabTransfer(P2, duration=30.0, n_restarts=1, max_evals=200, random_state=3).fit()


def test_check_w_states():
    X = check_w_states([[1.0, 0.0], [0.6, 0.8j]], 2)
    assert X.dtype == complex and X.shape == (2, 2)
    assert check_w_states([0.0, 1.0]).shape == (1, 2)
    np.testing.assert_allclose(check_w_states([[3.0, 4.0]], normalize=True), [[0.6, 0.8]])
    with pytest.raises(ValueError, match="normalized"):
        check_w_states([[1.0, 1.0]])
    with pytest.raises(ValueError, match="expected 2"):
        check_w_states([[1.0, 0.0, 0.0]], 2)
    with pytest.raises(ValueError, match="finite"):
        check_w_states([[np.nan, 1.0]])
    with pytest.raises(ValueError, match="zero"):
        check_w_states([[0.0, 0.0]], normalize=True)


def test_check_params():
    assert check_params(P2, 2) is P2
    with pytest.raises(TypeError):
        check_params({"n": 2})
    with pytest.raises(ValueError, match="cavities"):
        check_params(P2, 3)


def test_get_params_and_clone():
    est = CrabTransfer(P2, duration=12.0, n_harmonics=4)
    params = est.get_params()
    assert params["duration"] == 12.0 and params["n_harmonics"] == 4 and params["params"] is P2
    twin = clone(est).set_params(random_state=9)
    assert twin.random_state == 9 and est.random_state == 0


def test_unfitted_estimator_raises():
    with pytest.raises(NotFittedError):
        CrabTransfer(P2).transform([[1.0, 0.0]])


def test_fit_transform_inverse_roundtrip(fitted):
    assert fitted.n_features_in_ == 2 and fitted.report_.evaluations > 0
    X = np.array([[1.0, 0.0], [0.6, -0.8]])
    F = fitted.transform(X)
    assert F.shape == (2, fitted.grid_.N + 1)
    # conjugate emission then reversal reconstructs the input
    psi = fitted.inverse_transform(fitted.transform(np.conj(X)))
    overlap = np.abs(np.sum(np.conj(X) * psi[:, 1:-1], axis=1)) ** 2
    assert np.all(overlap > 0.98)


def test_score_defaults_to_basis_states(fitted):
    s = fitted.score()
    assert 0.98 < s <= 1.0
    states = np.array([w.w for w in random_w_states(2, 3, 0)])
    assert fitted.score(states) > 0.98


def test_sequential_transfer_bump_and_crab():
    bump = SequentialTransfer(P2, duration=40.0, reference="bump").fit()
    assert bump.schedule_.n == 2 and bump.score() > 0.8
    crab = SequentialTransfer(P2, duration=40.0, reference="crab", n_restarts=1, max_evals=150).fit()
    assert crab.score() > bump.score() - 0.05
    with pytest.raises(ValueError, match="reference"):
        SequentialTransfer(P2, reference="spline").fit()
