"""Right-hand sides, integration accuracy and switch handling."""

import math

import numpy as np
import pytest

import swingcert as sc
from swingcert.dynamics import (FULL, REDUCED, IntegratorConfig, SwitchSchedule,
                                SystemState, integrate, reduced_jacobian,
                                reduced_rhs, total_energy)
from swingcert.errors import ValidationError


def two_identical(p=0.5, j=1.0, d=1.0, k=1.0):
    return sc.NetworkModel(ids=("a", "b"), p_ref=np.array([p, -p]),
                           inertia=np.array([j, j]), droop=np.array([d, d]),
                           k_matrix=np.array([[0.0, k], [k, 0.0]]))


class TestFullRhs:
    def test_zero_at_equilibrium(self, smib):
        eq = sc.solve_equilibrium(smib)
        state = SystemState.at_rest(eq.theta_star)
        dtheta, domega = sc.full_rhs(state, smib)
        assert np.abs(dtheta).max() == 0.0
        assert np.abs(domega).max() < 1e-15

    def test_smib_arithmetic(self, smib):
        # twin of (J=1, D=1, P*=0.5, K=1) at theta=0, omega=0: the pair
        # acceleration equals the single-machine value P*/J = 0.5
        state = SystemState(theta=[0.0, 0.0], omega=[0.0, 0.0])
        dtheta, domega = sc.full_rhs(state, smib)
        assert np.array_equal(dtheta, [0.0, 0.0])
        assert domega[0] - domega[1] == pytest.approx(0.5, abs=1e-15)

    def test_antisymmetric_states(self, rng):
        model = two_identical()
        for _ in range(20):
            x, y = rng.uniform(-2.0, 2.0, size=2)
            state = SystemState(theta=[x, -x], omega=[y, -y])
            _, domega = sc.full_rhs(state, model)
            assert domega[0] == pytest.approx(-domega[1], abs=1e-14)

    def test_zero_inertia_directs_to_reduced(self):
        model = two_identical(j=0.0)
        state = SystemState(theta=[0.0, 0.0], omega=[0.0, 0.0])
        with pytest.raises(ValidationError, match="reduced"):
            sc.full_rhs(state, model)


class TestReducedRhs:
    def test_zero_at_equilibrium(self, smib):
        eq = sc.solve_equilibrium(smib)
        assert np.abs(reduced_rhs(eq.theta_star, smib)).max() < 1e-15

    def test_smib_arithmetic(self, smib):
        v = reduced_rhs(np.array([0.0, -math.pi / 2]), smib)
        assert v[0] - v[1] == pytest.approx(-0.5, abs=1e-15)

    def test_droop_scaling(self, rng):
        model = two_identical()
        for c in (2.0, 10.0, 0.25):
            scaled = model.with_params(droop=c * model.droop)
            theta = rng.uniform(-1.0, 1.0, size=2)
            assert np.allclose(reduced_rhs(theta, scaled),
                               reduced_rhs(theta, model) / c, rtol=1e-14)


class TestReducedJacobian:
    def test_smib_scalar_value(self, smib):
        eq = sc.solve_equilibrium(smib)
        spectrum = sc.deflated_spectrum(eq.theta_star, smib)
        assert spectrum[0] == pytest.approx(-math.cos(math.pi / 6), abs=1e-12)

    def test_rows_sum_to_zero(self, rng):
        model = sc.ring3()
        for _ in range(10):
            theta = rng.uniform(-3.0, 3.0, size=3)
            jac = reduced_jacobian(theta, model)
            assert np.abs(jac.sum(axis=1)).max() < 1e-14

    def test_matches_central_differences(self, rng):
        model = sc.ring3(droop=0.7)
        h = 1e-5
        for _ in range(10):
            theta = rng.uniform(-2.0, 2.0, size=3)
            jac = reduced_jacobian(theta, model)
            fd = np.zeros((3, 3))
            for q in range(3):
                up, dn = theta.copy(), theta.copy()
                up[q] += h
                dn[q] -= h
                fd[:, q] = (reduced_rhs(up, model) - reduced_rhs(dn, model)) / (2 * h)
            assert np.abs(jac - fd).max() < 1e-6


class TestShiftEquivariance:
    def test_bitwise_on_dyadic_states(self, smib):
        # dyadic angles and shifts add exactly in binary, so the pairwise
        # differences (and thus the right-hand sides) are bit-identical
        theta = np.array([0.25, -0.5])
        omega = np.array([0.125, 0.0625])
        for shift in (0.5, 2.0, -3.25):
            a = sc.full_rhs(SystemState(theta=theta, omega=omega), smib)
            b = sc.full_rhs(SystemState(theta=theta + shift, omega=omega), smib)
            assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
            assert np.array_equal(reduced_rhs(theta, smib),
                                  reduced_rhs(theta + shift, smib))

    def test_tolerance_on_random_states(self, smib, rng):
        for _ in range(20):
            theta = rng.uniform(-2.0, 2.0, size=2)
            shift = rng.uniform(-5.0, 5.0)
            a = reduced_rhs(theta, smib)
            b = reduced_rhs(theta + shift, smib)
            assert np.abs(a - b).max() < 1e-12


class TestIntegrate:
    def test_constant_at_equilibrium(self, smib):
        eq = sc.solve_equilibrium(smib)
        tr = integrate(smib, SystemState.at_rest(eq.theta_star), t_end=2.0,
                       mode=FULL)
        assert np.abs(tr.theta - eq.theta_star).max() < 1e-12
        assert np.abs(tr.omega).max() < 1e-12

    def test_rk4_convergence_order(self, smib):
        x0 = SystemState(theta=[0.9, -0.9], omega=[0.0, 0.0])
        ref = integrate(smib, x0, t_end=2.0, mode=FULL,
                        config=IntegratorConfig(step_full=1e-5,
                                                record_stride_full=10**9))
        errs = []
        for h in (0.04, 0.02, 0.01):
            tr = integrate(smib, x0, t_end=2.0, mode=FULL,
                           config=IntegratorConfig(step_full=h,
                                                   record_stride_full=10**9))
            errs.append(np.abs(tr.theta[-1] - ref.theta[-1]).max())
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert min(orders) >= 3.8

    def test_fault_on_matches_exact_damped_solution(self):
        model = sc.smib_model(0.5, 1.0, inertia=1.0, droop=0.01)
        eq = sc.solve_equilibrium(model)
        tr = integrate(model, SystemState.at_rest(eq.theta_star),
                       [(0.0, np.zeros((2, 2)), "fault")], t_end=0.5, mode=FULL,
                       config=IntegratorConfig(step_full=1e-4, record_stride_full=10))
        delta = tr.theta[:, 0] - tr.theta[:, 1]
        tau = 1.0 / 0.01
        exact = math.asin(0.5) + (0.5 / 0.01) * (
            tr.times - tau * (1.0 - np.exp(-tr.times / tau)))
        assert np.abs(delta - exact).max() < 1e-9

    def test_fault_on_parabola_negligible_droop(self):
        # the no-droop parabola needs a droop small enough that the cubic
        # damping correction P*D*t^3/(6 J^2) stays under the tolerance
        model = sc.smib_model(0.5, 1.0, inertia=1.0, droop=1e-6)
        eq = sc.solve_equilibrium(model)
        tr = integrate(model, SystemState.at_rest(eq.theta_star),
                       [(0.0, np.zeros((2, 2)), "fault")], t_end=0.5, mode=FULL,
                       config=IntegratorConfig(step_full=1e-4, record_stride_full=10))
        delta = tr.theta[:, 0] - tr.theta[:, 1]
        parabola = math.asin(0.5) + 0.5 * tr.times**2 / 2.0
        assert np.abs(delta - parabola).max() < 1e-6

    def test_zero_length_fault_equals_unfaulted(self, smib):
        # dyadic step and switch times make the step sequences identical
        h = 2.0**-10
        x0 = SystemState(theta=[0.5, -0.25], omega=[0.0, 0.0])
        cfg = IntegratorConfig(step_full=h, record_stride_full=4)
        plain = integrate(smib, x0, t_end=2.0, config=cfg, mode=FULL)
        k = smib.k_matrix.copy()
        zero_fault = integrate(
            smib, x0,
            SwitchSchedule([(1.0, np.zeros((2, 2)), "fault_on"), (1.0, k, "clear")]),
            t_end=2.0, config=cfg, mode=FULL)
        assert np.array_equal(plain.theta, zero_fault.theta)
        assert np.array_equal(plain.omega, zero_fault.omega)
        assert np.array_equal(plain.times, zero_fault.times)

    def test_energy_conserved_without_droop(self):
        model = sc.NetworkModel(ids=("a", "b"), p_ref=np.array([0.5, -0.5]),
                                inertia=np.array([2.0, 2.0]), droop=np.zeros(2),
                                k_matrix=np.array([[0.0, 1.0], [1.0, 0.0]]))
        tr = integrate(model, SystemState(theta=[0.6, -0.6], omega=[0.1, -0.1]),
                       t_end=10.0, mode=FULL,
                       config=IntegratorConfig(step_full=1e-4, record_stride_full=100))
        energy = np.array([total_energy(tr.theta[i], tr.omega[i], model)
                           for i in range(tr.n_samples)])
        assert np.abs(energy - energy[0]).max() / abs(energy[0]) < 1e-6

    def test_switch_instants_in_samples(self, smib):
        k = smib.k_matrix.copy()
        tr = integrate(smib, SystemState(theta=[0.1, 0.0], omega=[0.0, 0.0]),
                       [(0.0333, 0.5 * k, "fault_on"), (0.0777, k, "clear")],
                       t_end=0.2, mode=FULL)
        for instant, _label in tr.events:
            assert instant in tr.times
        assert [label for _, label in tr.events] == ["fault_on", "clear"]
        assert (np.diff(tr.times) > 0).all()

    def test_substepping_below_switch_gap(self, smib):
        # gap of 0.3 ms with a 1 ms step: the segment is sub-stepped
        k = smib.k_matrix.copy()
        tr = integrate(smib, SystemState(theta=[0.2, 0.0], omega=[0.0, 0.0]),
                       [(0.0101, 0.0 * k, "fault_on"), (0.0104, k, "clear")],
                       t_end=0.05, mode=FULL,
                       config=IntegratorConfig(step_full=1e-3, record_stride_full=1))
        assert 0.0101 in tr.times and 0.0104 in tr.times
        assert not tr.diverged

    def test_divergence_truncates_and_flags(self):
        # an absurdly large step makes the stiff frequency state explode
        model = sc.smib_model(0.5, 1.0, inertia=1e-8, droop=1.0)
        tr = integrate(model, SystemState(theta=[0.4, 0.0], omega=[0.0, 0.0]),
                       t_end=30.0, mode=FULL,
                       config=IntegratorConfig(step_full=0.5, record_stride_full=1))
        assert tr.diverged
        assert tr.n_samples >= 1
        assert np.isfinite(tr.theta).all()

    def test_reduced_omega_is_algebraic(self, smib):
        tr = integrate(smib, SystemState(theta=[0.7, -0.2], omega=[0.0, 0.0]),
                       t_end=0.5, mode=REDUCED)
        for i in range(0, tr.n_samples, 100):
            assert np.allclose(tr.omega[i], reduced_rhs(tr.theta[i], smib),
                               atol=1e-12)

    def test_adaptive_cross_check(self, smib):
        x0 = SystemState(theta=[0.8, -0.8], omega=[0.0, 0.0])
        rk4 = integrate(smib, x0, t_end=1.0, mode=FULL)
        rk45 = integrate(smib, x0, t_end=1.0, mode=FULL,
                         config=IntegratorConfig(method="rk45", rtol=1e-10,
                                                 atol=1e-12))
        assert np.abs(rk4.theta[-1] - rk45.theta[-1]).max() < 1e-6

    def test_initial_after_first_switch_rejected(self, smib):
        with pytest.raises(ValidationError, match="switch"):
            integrate(smib, SystemState(theta=[0.0, 0.0], omega=[0.0, 0.0], time=1.0),
                      [(0.5, smib.k_matrix.copy(), "late")], t_end=2.0, mode=FULL)

    def test_full_mode_rejects_zero_inertia(self):
        model = two_identical(j=0.0)
        with pytest.raises(ValidationError, match="reduced"):
            integrate(model, SystemState(theta=[0.0, 0.0], omega=[0.0, 0.0]),
                      t_end=1.0, mode=FULL)
