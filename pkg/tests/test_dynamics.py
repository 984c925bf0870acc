"""Evolution-layer tests.

Closed-form two-level and dissipative laws pin the integrators; the
slice-product propagator cross-checks the adaptive path on random
systems; the Uhlmann fidelity is verified against a direct sqrtm route.
"""

import math
import warnings

import numpy as np
import pytest
from scipy.linalg import expm, sqrtm

from ionlc.dynamics import (
    EvolutionSpec,
    RabiFit,
    evolve_lindblad,
    evolve_pure,
    extract_rabi_frequency,
    fidelity,
    propagate_columns,
    propagator,
)
from ionlc.errors import ConvergenceError, StepUnderflowError
from ionlc.hamiltonians import (
    HarmonicEnvelope,
    TimeDependentHamiltonian,
    rwa_hamiltonian,
)
from ionlc.qalgebra import (
    ModeLayout,
    QOperator,
    QState,
    annihilation,
    coherent_state,
    fock_state,
    number_operator,
    product_state,
)

TWO_PI = 2.0 * math.pi
G_SWAP = TWO_PI * 0.4


@pytest.fixture(scope="module")
def pair_layout():
    return ModeLayout((2, 2), ("lc", "motion"))


@pytest.fixture(scope="module")
def swap_spec(pair_layout):
    h = rwa_hamiltonian(G_SWAP, 0.0, pair_layout)
    return EvolutionSpec(hamiltonian=h, t_final=math.pi / (2.0 * G_SWAP))


def _one_lc_state(layout):
    return product_state(
        layout, {"lc": fock_state(layout.dim("lc"), 1), "motion": fock_state(layout.dim("motion"), 0)}
    )


def _projector(layout, n_lc, n_mot):
    v = np.zeros(layout.total_dim, dtype=np.complex128)
    v[n_lc * layout.dim("motion") + n_mot] = 1.0
    return QOperator(layout, np.outer(v, v.conj()))


def _random_harmonic_system(seed, dim=5):
    rng = np.random.default_rng(seed)
    layout = ModeLayout((dim,), ("lc",))

    def herm():
        m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        return QOperator(layout, 0.5 * (m + m.conj().T) / math.sqrt(dim))

    w = 2.0
    return layout, TimeDependentHamiltonian(
        layout,
        [
            (herm(), HarmonicEnvelope((1.0,), (0.0,))),
            (herm(), HarmonicEnvelope((0.5, 0.5), (w, -w))),
        ],
        frame="rotating",
    )


class TestEvolvePure:
    def test_beam_splitter_rabi_law(self, pair_layout, swap_spec):
        t_swap = swap_spec.t_final
        spec = EvolutionSpec(hamiltonian=swap_spec.hamiltonian, t_final=2 * t_swap)
        ts = np.linspace(0.0, 2 * t_swap, 81)
        res = evolve_pure(
            spec,
            _one_lc_state(pair_layout),
            sample_times=ts,
            observables={"p01": _projector(pair_layout, 0, 1)},
        )
        expected = np.sin(G_SWAP * res.times) ** 2
        np.testing.assert_allclose(res.expectations["p01"].real, expected, atol=1e-7)

    def test_full_transfer_at_quarter_period(self, pair_layout, swap_spec):
        res = evolve_pure(swap_spec, _one_lc_state(pair_layout))
        target = product_state(
            pair_layout, {"lc": fock_state(2, 0), "motion": fock_state(2, 1)}
        )
        assert fidelity(res.final_state, target) == pytest.approx(1.0, abs=1e-6)

    def test_zero_hamiltonian_freezes_state(self, pair_layout):
        zero = QOperator(pair_layout, np.zeros((4, 4)))
        h = TimeDependentHamiltonian(
            pair_layout, [(zero, HarmonicEnvelope((1.0,), (0.0,)))], frame="lab"
        )
        psi0 = _one_lc_state(pair_layout)
        res = evolve_pure(EvolutionSpec(hamiltonian=h, t_final=1.7), psi0)
        np.testing.assert_allclose(res.final_state.vector, psi0.vector, atol=1e-14)

    def test_norm_drift_recorded_and_small(self, pair_layout, swap_spec):
        res = evolve_pure(swap_spec, _one_lc_state(pair_layout))
        assert 0.0 <= res.conservation_drift < 1e-9

    def test_energy_conserved_for_static_h(self, pair_layout):
        h = rwa_hamiltonian(G_SWAP, 0.0, pair_layout)
        v = np.zeros(4, dtype=np.complex128)
        v[2] = v[1] = 1.0 / math.sqrt(2.0)  # (|1,0> + |0,1>)/sqrt2
        spec = EvolutionSpec(hamiltonian=h, t_final=5.0, tolerance=1e-9)
        res = evolve_pure(
            spec,
            QState(pair_layout, vector=v),
            sample_times=np.linspace(0.0, 5.0, 50),
            observables={"h": QOperator(pair_layout, h.value(0.0).matrix)},
        )
        e = res.expectations["h"].real
        assert np.max(np.abs(e - e[0])) < 10 * spec.tolerance * abs(e[0])

    def test_number_conserved_on_beam_splitter(self, pair_layout, swap_spec):
        n_tot = QOperator(
            pair_layout,
            pair_layout.lift({"lc": number_operator(2)})
            + pair_layout.lift({"motion": number_operator(2)}),
        )
        spec = EvolutionSpec(hamiltonian=swap_spec.hamiltonian, t_final=6 * swap_spec.t_final)
        res = evolve_pure(
            spec,
            _one_lc_state(pair_layout),
            sample_times=np.linspace(0.0, spec.t_final, 61),
            observables={"n": n_tot},
        )
        n = res.expectations["n"].real
        assert np.max(np.abs(n - 1.0)) < 1e-8

    def test_sample_grid_normalized(self, pair_layout, swap_spec):
        res = evolve_pure(
            swap_spec, _one_lc_state(pair_layout), sample_times=[0.3 * swap_spec.t_final]
        )
        assert res.times[0] == 0.0
        assert res.times[-1] == pytest.approx(swap_spec.t_final)
        assert res.times.size == 3

    def test_sample_grid_rejects_outside_horizon(self, pair_layout, swap_spec):
        with pytest.raises(ValueError, match="within"):
            evolve_pure(
                swap_spec, _one_lc_state(pair_layout), sample_times=[2 * swap_spec.t_final]
            )

    def test_snapshots_kept_on_request(self, pair_layout, swap_spec):
        ts = np.linspace(0.0, swap_spec.t_final, 9)
        res = evolve_pure(
            swap_spec, _one_lc_state(pair_layout), sample_times=ts, keep_states=True
        )
        assert res.snapshots is not None and res.snapshots.shape == (9, 4)
        res2 = evolve_pure(swap_spec, _one_lc_state(pair_layout), sample_times=ts)
        assert res2.snapshots is None

    def test_deterministic_across_runs(self, pair_layout, swap_spec):
        ts = np.linspace(0.0, swap_spec.t_final, 17)
        runs = [
            evolve_pure(
                swap_spec,
                _one_lc_state(pair_layout),
                sample_times=ts,
                observables={"p01": _projector(pair_layout, 0, 1)},
            )
            for _ in range(2)
        ]
        assert (
            runs[0].expectations["p01"].tobytes() == runs[1].expectations["p01"].tobytes()
        )

    def test_backends_agree(self, pair_layout, swap_spec):
        ts = np.linspace(0.0, swap_spec.t_final, 11)
        finals = []
        for backend in ("numpy", "numba"):
            res = evolve_pure(
                swap_spec, _one_lc_state(pair_layout), sample_times=ts, backend=backend
            )
            assert res.backend == backend
            finals.append(res.final_state)
        assert fidelity(*finals) > 1.0 - 1e-12

    def test_step_underflow_diagnostic(self):
        layout = ModeLayout((3,), ("lc",))
        huge = QOperator(layout, 1e200 * number_operator(3))
        h = TimeDependentHamiltonian(
            layout, [(huge, HarmonicEnvelope((1.0,), (0.0,)))], frame="lab"
        )
        psi0 = QState(layout, vector=fock_state(3, 1))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            with pytest.raises(StepUnderflowError) as err:
                evolve_pure(EvolutionSpec(hamiltonian=h, t_final=1.0), psi0)
        assert err.value.t_fail is not None

    def test_rejects_density_input(self, pair_layout, swap_spec):
        rho = QState(pair_layout, density=np.eye(4) / 4.0)
        with pytest.raises(ValueError, match="density"):
            evolve_pure(swap_spec, rho)

    def test_rejects_collapse_ops(self, pair_layout, swap_spec):
        a_op = QOperator(pair_layout, pair_layout.lift({"lc": annihilation(2)}))
        spec = EvolutionSpec(
            hamiltonian=swap_spec.hamiltonian, t_final=1.0, collapse_ops=((a_op, 0.1),)
        )
        with pytest.raises(ValueError, match="collapse"):
            evolve_pure(spec, _one_lc_state(pair_layout))

    def test_truncation_tail_reported(self):
        # resonant displacement drive leaks population to the top level
        for dim, check in ((6, lambda d: d > 1e-3), (12, lambda d: d < 1e-5)):
            layout = ModeLayout((dim,), ("lc",))
            a = annihilation(dim)
            drive = QOperator(layout, a + a.conj().T)
            h = TimeDependentHamiltonian(
                layout, [(drive, HarmonicEnvelope((1.0,), (0.0,)))], frame="lab"
            )
            psi0 = QState(layout, vector=fock_state(dim, 0))
            res = evolve_pure(EvolutionSpec(hamiltonian=h, t_final=1.2), psi0)
            assert check(res.convergence_delta)


class TestEvolveLindblad:
    def _single_mode_decay(self, kappa, t_final, n0=2, dim=4):
        layout = ModeLayout((dim,), ("lc",))
        n_op = QOperator(layout, number_operator(dim))
        h = TimeDependentHamiltonian(
            layout, [(n_op, HarmonicEnvelope((1.0,), (0.0,)))], frame="lab"
        )
        a_op = QOperator(layout, annihilation(dim))
        spec = EvolutionSpec(
            hamiltonian=h, t_final=t_final, collapse_ops=((a_op, kappa),)
        )
        rho0 = QState(layout, density=np.outer(fock_state(dim, n0), fock_state(dim, n0)))
        ts = np.linspace(0.0, t_final, 41)
        return evolve_lindblad(spec, rho0, sample_times=ts, observables={"n": n_op})

    def test_decay_law(self):
        kappa, t_final = 0.35, 3.0
        res = self._single_mode_decay(kappa, t_final)
        expected = 2.0 * np.exp(-kappa * res.times)
        np.testing.assert_allclose(res.expectations["n"].real, expected, atol=1e-6)

    def test_trace_and_positivity_diagnostics(self):
        res = self._single_mode_decay(0.35, 3.0)
        assert 0.0 <= res.conservation_drift < 1e-9
        assert res.positivity_floor is not None and res.positivity_floor > -1e-8

    def test_zero_rates_match_pure_evolution(self, pair_layout, swap_spec):
        psi0 = _one_lc_state(pair_layout)
        pure = evolve_pure(swap_spec, psi0)
        spec = EvolutionSpec(
            hamiltonian=swap_spec.hamiltonian, t_final=swap_spec.t_final
        )
        rho0 = QState(pair_layout, density=psi0.density)
        mixed = evolve_lindblad(spec, rho0)
        assert fidelity(pure.final_state, mixed.final_state) > 1.0 - 1e-8

    def test_heating_law_short_and_exact(self):
        gamma, t_final = 0.08, 0.1  # gamma * t = 8e-3 stays well below 1
        layout = ModeLayout((4,), ("lc",))
        zero = QOperator(layout, np.zeros((4, 4)))
        h = TimeDependentHamiltonian(
            layout, [(zero, HarmonicEnvelope((1.0,), (0.0,)))], frame="lab"
        )
        up = QOperator(layout, annihilation(4).conj().T)
        spec = EvolutionSpec(hamiltonian=h, t_final=t_final, collapse_ops=((up, gamma),))
        rho0 = QState(layout, density=np.outer(fock_state(4, 0), fock_state(4, 0)))
        n_op = QOperator(layout, number_operator(4))
        res = evolve_lindblad(spec, rho0, observables={"n": n_op})
        n_final = float(res.expectations["n"].real[-1])
        assert n_final == pytest.approx(gamma * t_final, rel=1e-2)
        assert n_final == pytest.approx(math.expm1(gamma * t_final), rel=1e-6)

    def test_pure_initial_state_accepted(self, pair_layout, swap_spec):
        spec = EvolutionSpec(hamiltonian=swap_spec.hamiltonian, t_final=swap_spec.t_final)
        res = evolve_lindblad(spec, _one_lc_state(pair_layout))
        assert res.final_state.min_eigenvalue() > -1e-8


class TestPropagator:
    def test_zero_hamiltonian_identity(self, pair_layout):
        zero = QOperator(pair_layout, np.zeros((4, 4)))
        h = TimeDependentHamiltonian(
            pair_layout, [(zero, HarmonicEnvelope((1.0,), (0.0,)))], frame="lab"
        )
        u = propagator(h, 2.0, 4)
        np.testing.assert_allclose(u.matrix, np.eye(4), atol=1e-14)

    def test_static_h_equals_expm(self, pair_layout):
        h = rwa_hamiltonian(G_SWAP, 0.0, pair_layout)
        t_final = 0.37
        u = propagator(h, t_final, 64)
        direct = expm(-1j * t_final * h.value(0.0).matrix)
        np.testing.assert_allclose(u.matrix, direct, atol=1e-12)

    def test_unitary_within_budget(self):
        _, h = _random_harmonic_system(2)
        u = propagator(h, 0.5, 2048)
        assert u.unitarity_defect() < 1e-8

    def test_agrees_with_adaptive_integration(self):
        layout, h = _random_harmonic_system(5)
        t_final = 0.5
        u = propagator(h, t_final, 4096)
        psi0 = QState(layout, vector=fock_state(5, 2))
        res = evolve_pure(
            EvolutionSpec(hamiltonian=h, t_final=t_final, tolerance=1e-10), psi0
        )
        assert fidelity(res.final_state, u @ psi0) > 1.0 - 1e-7

    def test_nonconvergence_raises(self):
        layout = ModeLayout((3,), ("lc",))
        n_op = QOperator(layout, number_operator(3))
        h = TimeDependentHamiltonian(
            layout, [(n_op, HarmonicEnvelope((0.5, 0.5), (50.0, -50.0)))], frame="lab"
        )
        with pytest.raises(ConvergenceError) as err:
            propagator(h, 1.0, 1)
        assert err.value.residual is not None

    def test_column_block_matches_slice_product(self):
        layout, h = _random_harmonic_system(5)
        t_final = 0.5
        u_oracle = propagator(h, t_final, 4096)
        block, n_steps = propagate_columns(
            h, t_final, np.eye(5, dtype=np.complex128), tolerance=1e-10
        )
        assert n_steps > 0
        assert np.max(np.abs(block - u_oracle.matrix)) < 1e-7

    def test_column_subset_matches_full_block(self):
        layout, h = _random_harmonic_system(11)
        full, _ = propagate_columns(h, 0.4, np.eye(5, dtype=np.complex128))
        cols = np.eye(5, dtype=np.complex128)[:, [1, 3]]
        sub, _ = propagate_columns(h, 0.4, cols)
        np.testing.assert_allclose(sub, full[:, [1, 3]], atol=1e-12)

    def test_column_block_validates_shape(self, pair_layout):
        h = rwa_hamiltonian(G_SWAP, 0.0, pair_layout)
        with pytest.raises(ValueError, match="total_dim"):
            propagate_columns(h, 1.0, np.eye(3, dtype=np.complex128))
        with pytest.raises(ValueError, match="positive"):
            propagate_columns(h, 0.0, np.eye(4, dtype=np.complex128))

    def test_tolerance_ladder_converges_to_oracle(self):
        layout, h = _random_harmonic_system(9)
        t_final = 0.5
        u = propagator(h, t_final, 4096)
        psi0 = QState(layout, vector=fock_state(5, 0))
        target = (u @ psi0).vector
        errs = []
        for tol in (1e-4, 1e-5, 1e-6, 1e-7, 1e-8):
            res = evolve_pure(
                EvolutionSpec(hamiltonian=h, t_final=t_final, tolerance=tol), psi0
            )
            errs.append(float(np.linalg.norm(res.final_state.vector - target)))
        for coarse, fine in zip(errs, errs[1:]):
            assert fine < coarse or fine < 5e-9
        assert errs[-1] < 1e-6


class TestFidelity:
    def test_identical_pure_states(self, pair_layout):
        psi = _one_lc_state(pair_layout)
        assert fidelity(psi, psi) == pytest.approx(1.0, abs=1e-15)

    def test_orthogonal_fock_states(self, pair_layout):
        a = _one_lc_state(pair_layout)
        b = product_state(
            pair_layout, {"lc": fock_state(2, 0), "motion": fock_state(2, 1)}
        )
        assert fidelity(a, b) == 0.0

    def test_vacuum_vs_coherent(self):
        layout = ModeLayout((18,), ("lc",))
        alpha = 0.6
        vac = QState(layout, vector=fock_state(18, 0))
        coh = QState(layout, vector=coherent_state(alpha, 18))
        assert fidelity(vac, coh) == pytest.approx(math.exp(-abs(alpha) ** 2), abs=1e-8)

    def _random_density(self, rng, dim):
        m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        rho = m @ m.conj().T
        return rho / np.trace(rho).real

    def test_uhlmann_against_sqrtm_route(self):
        rng = np.random.default_rng(5)
        layout = ModeLayout((4,), ("lc",))
        rho = self._random_density(rng, 4)
        sigma = self._random_density(rng, 4)
        a = QState(layout, density=rho)
        b = QState(layout, density=sigma)
        s = sqrtm(rho)
        direct = float(np.real(np.trace(sqrtm(s @ sigma @ s)))) ** 2
        assert fidelity(a, b) == pytest.approx(direct, rel=1e-9)
        assert fidelity(a, b) == pytest.approx(fidelity(b, a), rel=1e-10)
        assert fidelity(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_pure_mixed_consistency(self, pair_layout):
        psi = _one_lc_state(pair_layout)
        rho = QState(pair_layout, density=psi.density)
        assert fidelity(psi, rho) == pytest.approx(1.0, abs=1e-12)
        assert fidelity(rho, psi) == pytest.approx(1.0, abs=1e-12)

    def test_layout_mismatch(self, pair_layout):
        other = ModeLayout((3, 2), ("lc", "motion"))
        a = _one_lc_state(pair_layout)
        b = product_state(other, {"lc": fock_state(3, 0), "motion": fock_state(2, 0)})
        with pytest.raises(ValueError, match="layout"):
            fidelity(a, b)


class TestRabiFit:
    def test_recovers_sin_squared_frequency(self):
        g = TWO_PI * 1.3
        ts = np.linspace(0.0, 5.0 * math.pi / g, 400)
        fit = extract_rabi_frequency(ts, np.sin(g * ts) ** 2)
        assert fit.omega == pytest.approx(2.0 * g, rel=1e-3)
        assert fit.amplitude == pytest.approx(0.5, rel=1e-3)
        assert fit.offset == pytest.approx(0.5, rel=1e-3)
        assert fit.confident

    def test_constant_series_flagged(self):
        ts = np.linspace(0.0, 1.0, 64)
        fit = extract_rabi_frequency(ts, np.full_like(ts, 0.7))
        assert not fit.confident
        assert fit.omega == 0.0

    def test_noisy_series_within_one_percent(self):
        g = TWO_PI * 1.3
        rng = np.random.default_rng(17)
        ts = np.linspace(0.0, 5.0 * math.pi / g, 400)
        y = np.sin(g * ts) ** 2 + rng.normal(0.0, 0.005, size=ts.size)
        fit = extract_rabi_frequency(ts, y)
        assert fit.omega == pytest.approx(2.0 * g, rel=1e-2)
        assert fit.confident

    def test_short_span_lowers_confidence(self):
        g = TWO_PI * 1.0
        ts = np.linspace(0.0, 0.8 * math.pi / g, 64)  # under two periods of sin^2
        fit = extract_rabi_frequency(ts, np.sin(g * ts) ** 2)
        assert fit.n_periods < 3.0
        assert not fit.confident

    def test_input_validation(self):
        with pytest.raises(ValueError, match="samples"):
            extract_rabi_frequency([0.0, 1.0], [1.0, 2.0])


class TestEvolutionSpecValidation:
    def test_horizon_positive(self, pair_layout):
        h = rwa_hamiltonian(1.0, 0.0, pair_layout)
        with pytest.raises(ValueError, match="t_final"):
            EvolutionSpec(hamiltonian=h, t_final=0.0)

    @pytest.mark.parametrize("tol", [1e-13, 1e-3])
    def test_tolerance_window(self, pair_layout, tol):
        h = rwa_hamiltonian(1.0, 0.0, pair_layout)
        with pytest.raises(ValueError, match="tolerance"):
            EvolutionSpec(hamiltonian=h, t_final=1.0, tolerance=tol)

    def test_negative_rate_rejected(self, pair_layout):
        h = rwa_hamiltonian(1.0, 0.0, pair_layout)
        a_op = QOperator(pair_layout, pair_layout.lift({"lc": annihilation(2)}))
        with pytest.raises(ValueError, match=">= 0"):
            EvolutionSpec(hamiltonian=h, t_final=1.0, collapse_ops=((a_op, -0.1),))

    def test_collapse_layout_checked(self, pair_layout):
        h = rwa_hamiltonian(1.0, 0.0, pair_layout)
        other = ModeLayout((3,), ("lc",))
        bad = QOperator(other, annihilation(3))
        with pytest.raises(ValueError, match="layout"):
            EvolutionSpec(hamiltonian=h, t_final=1.0, collapse_ops=((bad, 0.1),))
