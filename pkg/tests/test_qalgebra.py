"""Checks for the Fock-space algebra layer.

Ladder and Pauli identities are asserted against their defining matrix
elements. Displacement operators are checked two independent ways: the
matrix-exponential constructor against the analytic coherent-state series.
"""

import math
import warnings

import numpy as np
import pytest

from ionlc.qalgebra import (
    ModeLayout,
    QOperator,
    QState,
    TruncationWarning,
    annihilation,
    cat_state,
    coherent_state,
    creation,
    displacement,
    embed,
    fock_state,
    identity,
    number_operator,
    partial_trace,
    pauli,
    product_state,
    quadratures,
    spin_state,
)


@pytest.mark.parametrize("dim", [2, 3, 8, 17])
def test_annihilation_matrix_elements(dim):
    a = annihilation(dim)
    for n in range(1, dim):
        assert a[n - 1, n] == pytest.approx(math.sqrt(n), abs=0.0)
    # everything off the first superdiagonal is exactly zero
    mask = np.ones_like(a, dtype=bool)
    mask[np.arange(dim - 1), np.arange(1, dim)] = False
    assert np.all(a[mask] == 0.0)


@pytest.mark.parametrize("dim", [1, 0, -3])
def test_ladder_rejects_degenerate_dimension(dim):
    with pytest.raises(ValueError, match="dimension"):
        annihilation(dim)
    with pytest.raises(ValueError, match="dimension"):
        quadratures(dim)


@pytest.mark.parametrize("dim", [2, 5, 12])
def test_ladder_commutator_and_truncation_defect(dim):
    a = annihilation(dim)
    comm = a @ creation(dim) - creation(dim) @ a
    # [a, a^dag] = 1 on all levels below the cutoff ...
    expect = np.eye(dim)
    # ... and the top diagonal entry carries the truncation defect 1 - dim
    expect[-1, -1] = 1 - dim
    np.testing.assert_allclose(comm, expect, atol=1e-12)


def test_number_operator_is_ad_a():
    dim = 9
    np.testing.assert_allclose(
        number_operator(dim), creation(dim) @ annihilation(dim), atol=1e-12
    )


@pytest.mark.parametrize("dim", [4, 10])
def test_quadrature_commutator(dim):
    x, p, q = quadratures(dim)
    np.testing.assert_array_equal(q, x)
    comm = x @ p - p @ x
    # canonical [x, p] = i holds below the truncation edge
    np.testing.assert_allclose(
        comm[: dim - 1, : dim - 1], 1j * np.eye(dim - 1), atol=1e-12
    )


def test_pauli_algebra():
    sx, sy, sz = pauli("x"), pauli("y"), pauli("z")
    for s in (sx, sy, sz):
        np.testing.assert_allclose(s @ s, np.eye(2), atol=0.0)
    np.testing.assert_allclose(sx @ sy - sy @ sx, 2j * sz, atol=0.0)
    np.testing.assert_allclose(pauli("+"), (sx + 1j * sy) / 2, atol=0.0)
    np.testing.assert_allclose(pauli("-"), (sx - 1j * sy) / 2, atol=0.0)
    with pytest.raises(ValueError):
        pauli("q")


class TestModeLayout:
    def test_validation(self):
        with pytest.raises(ValueError):
            ModeLayout((2, 3), ("a",))
        with pytest.raises(ValueError):
            ModeLayout((2, 0), ("a", "b"))
        with pytest.raises(ValueError):
            ModeLayout((2, 3), ("a", "a"))

    def test_total_dim_and_lookup(self):
        lay = ModeLayout((2, 3, 5), ("spin", "lc", "motion"))
        assert lay.total_dim == 30
        assert lay.index("lc") == 1
        assert lay.dim("motion") == 5
        with pytest.raises(KeyError):
            lay.index("cavity")

    def test_lift_ordering(self):
        # kron order: first label is the slowest index
        lay = ModeLayout((2, 3), ("spin", "lc"))
        m = lay.lift({"spin": pauli("z")})
        np.testing.assert_allclose(m, np.kron(pauli("z"), np.eye(3)), atol=0.0)
        m = lay.lift({"lc": number_operator(3)})
        np.testing.assert_allclose(m, np.kron(np.eye(2), number_operator(3)), atol=0.0)

    def test_lift_rejects_bad_shapes_and_labels(self):
        lay = ModeLayout((2, 3), ("spin", "lc"))
        with pytest.raises(ValueError):
            lay.lift({"lc": np.eye(4)})
        with pytest.raises(KeyError):
            lay.lift({"cavity": np.eye(3)})

    def test_with_dims_and_doubled(self):
        lay = ModeLayout((2, 6, 10), ("spin", "lc", "motion"))
        assert lay.with_dims(lc=9).dims == (2, 9, 10)
        # doubling leaves the spin slot alone
        assert lay.doubled().dims == (2, 12, 20)
        assert lay.doubled(("motion",)).dims == (2, 6, 20)


def test_embed_preserves_spectrum():
    lay = ModeLayout((2, 4, 3), ("spin", "lc", "motion"))
    op = embed(lay, "lc", number_operator(4))
    got = np.sort(np.linalg.eigvalsh(op.matrix))
    # each single-mode eigenvalue repeats (product of other dims) = 6 times
    expect = np.sort(np.repeat(np.arange(4.0), 6))
    np.testing.assert_allclose(got, expect, atol=1e-12)


class TestQOperator:
    def test_layout_mismatch_rejected(self):
        a = identity(ModeLayout((2,), ("spin",)))
        b = identity(ModeLayout((3,), ("lc",)))
        with pytest.raises(ValueError):
            a @ b

    def test_hermiticity_and_unitarity_defects(self):
        lay = ModeLayout((4,), ("lc",))
        n_op = embed(lay, "lc", number_operator(4))
        assert n_op.is_hermitian()
        assert n_op.hermiticity_defect() == 0.0
        u = QOperator(lay, displacement(0.3, 4))
        assert u.unitarity_defect() < 1e-12

    def test_expectation_pure_and_mixed(self):
        lay = ModeLayout((3,), ("lc",))
        n_op = embed(lay, "lc", number_operator(3))
        psi = QState.pure(lay, fock_state(3, 2))
        assert n_op.expectation(psi) == pytest.approx(2.0)
        rho = QState.mixed(lay, np.diag([0.5, 0.25, 0.25]).astype(complex))
        assert n_op.expectation(rho) == pytest.approx(0.75)


class TestQState:
    def test_norm_contract(self):
        lay = ModeLayout((3,), ("lc",))
        with pytest.raises(ValueError):
            QState.pure(lay, [1.0, 1.0, 0.0])
        QState.pure(lay, np.array([1.0, 1.0, 0.0]) / np.sqrt(2))

    def test_density_contracts(self):
        lay = ModeLayout((2,), ("spin",))
        with pytest.raises(ValueError):
            QState.mixed(lay, np.diag([0.6, 0.6]))
        with pytest.raises(ValueError):
            QState.mixed(lay, np.array([[0.5, 0.1], [0.3, 0.5]]))
        rho = QState.mixed(lay, np.diag([0.5, 0.5]).astype(complex))
        assert rho.min_eigenvalue() >= -1e-10

    def test_exactly_one_representation(self):
        lay = ModeLayout((2,), ("spin",))
        with pytest.raises(ValueError):
            QState(lay)
        with pytest.raises(ValueError):
            QState(lay, vector=spin_state("up"), density=np.eye(2) / 2)

    def test_density_of_pure_state(self):
        lay = ModeLayout((2,), ("spin",))
        psi = QState.pure(lay, spin_state("+x"))
        np.testing.assert_allclose(psi.density, np.full((2, 2), 0.5), atol=1e-15)


@pytest.mark.parametrize(
    "alpha", [0.3, -0.7, 0.5 + 0.25j, 1.1j], ids=["re", "neg", "cmplx", "im"]
)
def test_displacement_two_routes(alpha):
    # route 1: matrix exponential applied to vacuum
    # route 2: analytic coherent amplitudes exp(-|a|^2/2) a^n / sqrt(n!)
    dim = 24
    via_expm = displacement(alpha, dim) @ fock_state(dim, 0)
    via_series = coherent_state(alpha, dim)
    assert np.abs(np.vdot(via_series, via_expm)) == pytest.approx(1.0, abs=1e-8)
    np.testing.assert_allclose(via_expm, via_series, atol=1e-8)


def test_displacement_inverse():
    dim = 20
    d_plus = displacement(0.6 - 0.2j, dim)
    d_minus = displacement(-0.6 + 0.2j, dim)
    np.testing.assert_allclose(d_plus @ d_minus, np.eye(dim), atol=1e-8)


def test_displacement_truncation_warning_fields():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        displacement(3.0, 8)  # |alpha|^2 = 9 > 8/4
    tw = [w for w in caught if issubclass(w.category, TruncationWarning)]
    assert len(tw) == 1
    assert tw[0].message.amplitude == pytest.approx(3.0)
    assert tw[0].message.dim == 8
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        displacement(0.5, 8)  # comfortably inside: no warning


def test_coherent_mean_occupation():
    alpha = 0.5 + 0.25j
    dim = 24
    v = coherent_state(alpha, dim)
    n_mean = np.real(np.vdot(v, number_operator(dim) @ v))
    assert n_mean == pytest.approx(abs(alpha) ** 2, rel=1e-10)
    # a|alpha> = alpha |alpha> up to truncation
    av = annihilation(dim) @ v
    np.testing.assert_allclose(av[: dim - 2], alpha * v[: dim - 2], atol=1e-10)


def test_even_cat_has_only_even_levels():
    v = cat_state(1.2, 32, phase=0.0)
    assert np.max(np.abs(v[1::2])) < 1e-14
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    w = cat_state(1.2, 32, phase=np.pi)  # odd cat
    assert np.max(np.abs(w[0::2])) < 1e-14


def test_product_state_and_partial_trace():
    lay = ModeLayout((2, 3), ("spin", "lc"))
    psi = product_state(lay, {"spin": spin_state("up"), "lc": fock_state(3, 1)})
    red = partial_trace(psi, ("lc",))
    expect = np.zeros((3, 3), dtype=complex)
    expect[1, 1] = 1.0
    np.testing.assert_allclose(red, expect, atol=1e-14)
    with pytest.raises(ValueError):
        product_state(lay, {"spin": spin_state("up")})


def test_partial_trace_of_entangled_state_is_maximally_mixed():
    lay = ModeLayout((2, 2), ("spin", "lc"))
    bell = np.zeros(4, dtype=complex)
    bell[0] = bell[3] = 1 / np.sqrt(2)  # |up,0> + |down,1>
    psi = QState.pure(lay, bell)
    for kept in (("spin",), ("lc",)):
        red = partial_trace(psi, kept)
        np.testing.assert_allclose(red, np.eye(2) / 2, atol=1e-14)
    # trace over nothing returns the full density
    np.testing.assert_allclose(
        partial_trace(psi, ("spin", "lc")), psi.density, atol=0.0
    )


def test_partial_trace_three_slot_middle():
    lay = ModeLayout((2, 3, 2), ("spin", "lc", "motion"))
    rng = np.random.default_rng(7)
    v = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    v /= np.linalg.norm(v)
    psi = QState.pure(lay, v)
    red = partial_trace(psi, ("spin", "motion"))
    # oracle: explicit index contraction
    t = v.reshape(2, 3, 2)
    expect = np.einsum("ajb,cjd->abcd", t, t.conj()).reshape(4, 4)
    np.testing.assert_allclose(red, expect, atol=1e-14)
    assert np.trace(red) == pytest.approx(1.0)


def test_construction_is_deterministic():
    a1 = displacement(0.37 + 0.11j, 16)
    a2 = displacement(0.37 + 0.11j, 16)
    assert a1.tobytes() == a2.tobytes()
    c1 = cat_state(0.9, 24, phase=0.3)
    c2 = cat_state(0.9, 24, phase=0.3)
    assert c1.tobytes() == c2.tobytes()
