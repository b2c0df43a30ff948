"""Tests for constraint restoration and the projected-gradient minimizer."""

import numpy as np
import pytest

from conftest import make_rng, random_measure_for, random_positive
from kreinact import (
    MinimizeConfig,
    MomentumBox,
    OperatorMeasure,
    RestorationError,
    SignatureSpace,
    ValidationError,
    action,
    check_first_order,
    config_from_dict,
    config_to_dict,
    constraint_values,
    minimize_action,
    restore_constraints,
)

SP1 = SignatureSpace(1)

# A deliberately small, well-conditioned instance: two grid momenta, a
# coarse position grid, mild smoothing.  The run is deterministic (seeded
# initial stack) and converges in a couple of seconds.
TOY = MinimizeConfig(n=1, c=0.5, f=1.0, seed=0, smoothing_delta=1e-2)


@pytest.fixture(scope="module")
def toy_result():
    return minimize_action(TOY)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def test_config_round_trip():
    config = MinimizeConfig(n=2, c=0.3, f=0.9, seed=7, smoothing_delta=0.5,
                            momentum_shape=(2, 1, 1, 2), position_shape=(3, 1, 1, 3))
    assert config_from_dict(config_to_dict(config)) == config


def test_config_rejects_unknown_keys():
    data = config_to_dict(MinimizeConfig())
    data["reticulation"] = True
    with pytest.raises(ValidationError):
        config_from_dict(data)


def test_config_validation():
    with pytest.raises(ValidationError):
        MinimizeConfig(n=0)
    with pytest.raises(ValidationError):
        MinimizeConfig(c=2.0, f=1.0)
    with pytest.raises(ValidationError):
        MinimizeConfig(smoothing_delta=-0.1)
    with pytest.raises(ValidationError):
        MinimizeConfig(initial_step=0.0)
    with pytest.raises(ValidationError):
        MinimizeConfig(backtrack_factor=1.0)
    with pytest.raises(ValidationError):
        MinimizeConfig(max_iterations=0)
    with pytest.raises(ValidationError):
        MinimizeConfig(position_radius=0.0)
    with pytest.raises(ValidationError):
        MinimizeConfig(momentum_shape=(0, 1, 1, 1))


def test_config_helpers_build_consistent_objects():
    config = MinimizeConfig()
    box = config.momentum_box()
    assert isinstance(box, MomentumBox)
    assert len(box.grid_points()) == int(np.prod(config.momentum_shape))
    assert config.space().n == config.n
    grid = config.position_grid()
    assert len(grid.points) == int(np.prod(config.position_shape))


# ---------------------------------------------------------------------------
# Constraint restoration
# ---------------------------------------------------------------------------

def test_restore_case_a_is_uniform_and_exact():
    rng = make_rng(2)
    measure = random_measure_for(SP1, rng)
    total_trace = float(np.trace(measure.operators.sum(axis=0)).real)
    if total_trace <= 0:  # make the uniform target reachable
        bump = np.zeros((2, 2), complex)
        bump[0, 0] = 2.0 * abs(total_trace) + 1.0
        ops = measure.operators.copy()
        ops[0] = ops[0] + bump
        measure = measure.with_operators(ops)
    restored = restore_constraints(measure, "a", 0.8, 2.0)
    values = constraint_values(restored)
    assert values.trace == pytest.approx(0.8, abs=1e-13)
    lam = 0.8 / float(np.trace(measure.operators.sum(axis=0)).real)
    np.testing.assert_allclose(restored.operators, lam * measure.operators, rtol=1e-12)
    np.testing.assert_array_equal(restored.momenta, measure.momenta)


def test_restore_case_b_pins_both_constraints():
    for n in (1, 2):
        sp = SignatureSpace(n)
        measure = random_measure_for(sp, make_rng(3), n_atoms=3)
        restored = restore_constraints(measure, "b", 0.8, 2.0)
        values = constraint_values(restored)
        assert values.trace == pytest.approx(0.8, abs=1e-13)
        assert values.mod_dim == pytest.approx(2.0, abs=1e-13)
        sig = sp.signature
        for A in restored.operators:
            H = sig[:, None] * A
            assert np.linalg.eigvalsh(0.5 * (H + H.conj().T))[0] > -1e-12


def test_restore_rejects_unreachable_targets():
    # All mass in the negative-signature block: no positive uniform scaling
    # reaches a positive trace, and the positive block is empty for case b.
    rng = make_rng(4)
    box = MomentumBox((-1.0, -0.5, -0.5, -0.5), (1.0, 0.5, 0.5, 0.5), (2, 1, 1, 1))
    pts = box.grid_points()
    A = np.zeros((2, 2), complex)
    A[1, 1] = -1.0  # positive operator: S A = diag(0, 1)
    measure = OperatorMeasure(SP1, box, pts[:1], [A])
    with pytest.raises(RestorationError):
        restore_constraints(measure, "a", 0.5, 1.0)
    with pytest.raises(RestorationError):
        restore_constraints(measure, "b", 0.5, 1.0)
    with pytest.raises(ValidationError):
        restore_constraints(measure, "z", 0.5, 1.0)
    with pytest.raises(ValidationError):
        restore_constraints(measure, "b", 1.5, 1.0)


# ---------------------------------------------------------------------------
# Minimization on the toy instance
# ---------------------------------------------------------------------------

def test_toy_run_converges(toy_result):
    assert toy_result.converged
    assert toy_result.case_tag == "b"
    # Deterministic seeded run; value frozen from a converged instance.
    assert toy_result.action_value == pytest.approx(18.3103641117, rel=1e-6)


def test_toy_run_is_feasible(toy_result):
    values = constraint_values(toy_result.measure)
    assert values.trace == pytest.approx(TOY.c, abs=1e-12)
    assert values.mod_dim == pytest.approx(TOY.f, abs=1e-12)


def test_toy_run_satisfies_first_order_conditions(toy_result):
    report = toy_result.report
    checks = check_first_order(report, TOY.tol_el)
    assert checks["all"] and all(checks.values())
    assert report.probe_margins.min() >= -1e-6
    assert max(report.atom_residual_left.max(), report.atom_residual_right.max()) <= 1e-6
    assert report.beta <= 1e-9
    assert report.alpha == toy_result.alpha
    assert report.beta == toy_result.beta
    assert report.case_tag == toy_result.case_tag


def test_toy_run_action_trace_is_monotone(toy_result):
    actions = np.array([entry["action"] for entry in toy_result.trace])
    assert len(actions) >= 2
    assert np.all(np.diff(actions) <= 1e-12)
    assert actions[-1] < actions[0]
    for key in ("iteration", "trace", "signed_trace", "step", "grad_norm", "escapes"):
        assert key in toy_result.trace[0]


def test_toy_run_reports_its_own_measure(toy_result):
    recomputed = action(toy_result.measure, TOY.position_grid(), TOY.smoothing_delta)
    assert recomputed == pytest.approx(toy_result.action_value, rel=1e-12)
    # The returned measure re-validates positivity and box membership.
    assert toy_result.measure.n_atoms == len(TOY.momentum_box().grid_points())


def test_minimize_is_deterministic_for_fixed_seed(toy_result):
    again = minimize_action(TOY)
    assert again.action_value == toy_result.action_value
    np.testing.assert_array_equal(again.measure.operators, toy_result.measure.operators)
    assert again.alpha == toy_result.alpha
    assert again.beta == toy_result.beta
