import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from tfelab.estimators import (
    PowerLawFit,
    QuasiStaticModel,
    ThinFilmSimulator,
    check_profiles,
    check_times,
)
from tfelab.solver import SolverAbort, parabola_profile


def test_get_params_and_clone():
    for est in (ThinFilmSimulator(epsilon=3e-3, n_cells=64), QuasiStaticModel(total_mass=2.0),
                PowerLawFit(window=(1, 2))):
        params = est.get_params()
        twin = clone(est)
        assert twin.get_params() == params
        assert twin is not est
    sim = ThinFilmSimulator().set_params(n=1.5)
    assert sim.get_params()["n"] == 1.5


def test_validation_helpers():
    with pytest.raises(ValueError):
        check_profiles([[1.0, -1.0]])
    with pytest.raises(ValueError):
        check_profiles(np.ones((2, 3)), n_cells=4)
    with pytest.raises(ValueError):
        check_profiles([[np.nan, 1.0]])
    assert check_times([[1.0], [2.0]]).shape == (2,)
    with pytest.raises(ValueError):
        check_times([-1.0])
    with pytest.raises(ValueError):
        check_times(np.ones((2, 2)))


def test_simulator_transform():
    sim = ThinFilmSimulator(n_cells=128, t_end=1e-5, dt_max=1e-6).fit()
    x = sim.grid_.centers
    X = np.vstack([parabola_profile(x, 0.3, 0.7, 1.0), parabola_profile(x, 0.2, 0.6, 0.5)])
    out = sim.transform(X)
    assert out.shape == X.shape
    np.testing.assert_allclose(out.sum(axis=1), X.sum(axis=1), rtol=1e-12)
    assert len(sim.trajectories_) == 2
    assert sim.n_features_in_ == 128
    with pytest.raises(ValueError):
        sim.transform(np.ones((1, 10)))


def test_simulator_not_fitted_and_abort():
    with pytest.raises(NotFittedError):
        ThinFilmSimulator().transform(np.ones((1, 512)))
    sim = ThinFilmSimulator(n_cells=32, t_end=1e-3, dt_init=1e-4, dt_min=1e-4, dt_max=1e-4,
                            newton_max_iter=1).fit()
    X = parabola_profile(sim.grid_.centers, 0.3, 0.7, 1.0)[None, :]
    with pytest.raises(SolverAbort):
        sim.fit_transform(X)


def test_quasistatic_predict():
    model = QuasiStaticModel(domain=(-10, 10)).fit([[0.0, 1.0]])
    t = np.array([1.0, 0.0, 0.5])
    pred = model.predict(t)
    np.testing.assert_allclose(pred, (1 + 1008 * t) ** (1 / 7), rtol=1e-6)
    with pytest.raises(ValueError):
        QuasiStaticModel().fit([[0.0, 1.0, 2.0]])
    with pytest.raises(NotFittedError):
        QuasiStaticModel().predict([1.0])


def test_power_law_estimator():
    t = np.linspace(10, 100, 40)
    y = (1008 * t + 1) ** (1 / 7)
    est = PowerLawFit(window=(10, 100)).fit(t, y)
    assert abs(est.exponent_ - 1 / 7) <= 0.005
    assert est.score(t[:, None], y) > 0.999
    np.testing.assert_allclose(est.predict(t), y, rtol=1e-3)
    default = PowerLawFit().fit(t, y)
    assert default.window_ == pytest.approx((100 - 0.7 * 90, 100))
    with pytest.raises(ValueError):
        PowerLawFit().fit(t, y[:-1])
