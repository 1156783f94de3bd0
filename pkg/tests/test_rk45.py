"""Reference integrator: accuracy, dense output, accounting, failure modes."""

import numpy as np
import pytest

from lvim.core import OdeSystem
from lvim.errors import ConvergenceError, DomainViolationError
from lvim.rk45 import RkConfig, RkTrajectory, rk45_integrate, sample_at

DECAY = OdeSystem(dim=1, rhs=lambda t, x: -x, jac=None, name="decay")

OSC = OdeSystem(
    dim=2,
    rhs=lambda t, x: np.array([x[1], -x[0]]),
    jac=None,
    name="osc",
)


def test_decay_matches_exponential():
    tr = rk45_integrate(DECAY, 0.0, 5.0, np.array([1.0]), RkConfig())
    assert np.max(np.abs(tr.states[:, 0] - np.exp(-tr.times))) < 1e-12
    assert tr.times[0] == 0.0 and tr.times[-1] == 5.0


def test_oscillator_long_run_amplitude():
    tr = rk45_integrate(OSC, 0.0, 100.0, np.array([1.0, 0.0]),
                        RkConfig(rel_tol=1e-12, abs_tol=1e-14))
    energy = 0.5 * (tr.states[:, 0] ** 2 + tr.states[:, 1] ** 2)
    assert np.max(np.abs(energy - 0.5)) < 1e-10


def test_dense_output_between_steps():
    tr = rk45_integrate(OSC, 0.0, 10.0, np.array([1.0, 0.0]), RkConfig())
    t_query = np.linspace(0.0, 10.0, 401)
    vals = sample_at(tr, t_query)
    assert np.max(np.abs(vals[:, 0] - np.cos(t_query))) < 1e-10


def test_dense_output_exact_at_stored_steps():
    tr = rk45_integrate(DECAY, 0.0, 3.0, np.array([1.0]), RkConfig())
    vals = sample_at(tr, tr.times)
    assert np.array_equal(vals, tr.states)


def test_sample_outside_span_raises():
    tr = rk45_integrate(DECAY, 0.0, 1.0, np.array([1.0]), RkConfig())
    with pytest.raises(ValueError):
        sample_at(tr, np.array([1.5]))


def test_eval_accounting_exact():
    # first stage is reused across rejected retries of the same step and
    # one evaluation seeds the initial-step heuristic
    for cfg in (RkConfig(), RkConfig(rel_tol=1e-6, abs_tol=1e-9)):
        tr = rk45_integrate(OSC, 0.0, 20.0, np.array([1.0, 0.0]), cfg)
        assert tr.total_rhs_evals == \
            7 * tr.steps_accepted + 6 * tr.steps_rejected + 1


def test_tolerance_controls_error():
    errs = []
    for rel in (1e-6, 1e-9, 1e-12):
        tr = rk45_integrate(OSC, 0.0, 10.0, np.array([1.0, 0.0]),
                            RkConfig(rel_tol=rel, abs_tol=1e-15))
        errs.append(np.max(np.abs(tr.states[:, 0] - np.cos(tr.times))))
    assert errs[0] > errs[1] > errs[2]


def test_max_steps_exhaustion():
    with pytest.raises(ConvergenceError):
        rk45_integrate(OSC, 0.0, 1000.0, np.array([1.0, 0.0]),
                       RkConfig(max_steps=10))


@pytest.mark.filterwarnings("ignore:overflow")
def test_domain_violation_propagates():
    blowup = OdeSystem(dim=1, rhs=lambda t, x: x * x, jac=None, name="blowup")
    with pytest.raises((DomainViolationError, ConvergenceError)):
        rk45_integrate(blowup, 0.0, 5.0, np.array([1.0]), RkConfig())


def test_trajectory_is_core_trajectory():
    from lvim.core import Trajectory
    tr = rk45_integrate(DECAY, 0.0, 1.0, np.array([1.0]), RkConfig())
    assert isinstance(tr, Trajectory)
    assert isinstance(tr, RkTrajectory)
    assert len(tr.segment_iterations) == 0
