"""Operator and state algebra on truncated Fock spaces.

Everything downstream (Hamiltonians, integrators, protocols) works with dense
complex matrices on a tensor product of small Hilbert spaces: a spin-1/2 slot,
an LC resonator slot and a motional slot, each truncated to a finite ladder.
This module owns the layout bookkeeping (which slot is which factor of the
Kronecker product), the standard operator constructors, and the state
constructors, so truncation conventions live in exactly one place.

Conventions: annihilation operators satisfy <n-1|a|n> = sqrt(n); quadratures
are x = (b + b^dag)/sqrt(2), p = -i(b - b^dag)/sqrt(2); the dimensionless LC
charge quadrature q coincides with x. All matrices are C-contiguous
complex128.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

__all__ = [
    "TruncationWarning",
    "ModeLayout",
    "QOperator",
    "QState",
    "annihilation",
    "creation",
    "number_operator",
    "quadratures",
    "pauli",
    "identity",
    "embed",
    "displacement",
    "fock_state",
    "coherent_state",
    "cat_state",
    "spin_state",
    "product_state",
    "partial_trace",
]


class TruncationWarning(UserWarning):
    """A requested operation strains the chosen Fock truncation.

    Carries the offending amplitude and the dimension so callers can attach it
    to run metadata instead of parsing the message.
    """

    def __init__(self, message, amplitude=None, dim=None):
        super().__init__(message)
        self.amplitude = amplitude
        self.dim = dim


@dataclass(frozen=True)
class ModeLayout:
    """Ordered tensor-product structure of the composite Hilbert space.

    Factors appear in Kronecker order: ``dims[0]`` is the leftmost (slowest)
    index. Labels are free-form but must be unique; the conventional ones are
    ``"spin"``, ``"lc"`` and ``"motion"``.
    """

    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        labels = tuple(str(s) for s in self.labels)
        if len(dims) != len(labels):
            raise ValueError("dims and labels must have equal length")
        if not dims:
            raise ValueError("layout needs at least one mode")
        if any(d < 1 for d in dims):
            raise ValueError(f"mode dimensions must be >= 1, got {dims}")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate mode labels in {labels}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"no mode {label!r} in layout {self.labels}") from None

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def lift(self, ops: dict[str, np.ndarray]) -> np.ndarray:
        """Kronecker-embed per-slot matrices, identity on unnamed slots."""
        for label in ops:
            self.index(label)  # validates the label
        out = np.ones((1, 1), dtype=np.complex128)
        for label, d in zip(self.labels, self.dims):
            block = ops.get(label)
            if block is None:
                block = np.eye(d, dtype=np.complex128)
            else:
                block = np.asarray(block, dtype=np.complex128)
                if block.shape != (d, d):
                    raise ValueError(
                        f"operator for {label!r} has shape {block.shape}, "
                        f"layout expects {(d, d)}"
                    )
            out = np.kron(out, block)
        return np.ascontiguousarray(out)

    def with_dims(self, **overrides: int) -> "ModeLayout":
        """Copy of the layout with some mode dimensions replaced."""
        dims = list(self.dims)
        for label, d in overrides.items():
            dims[self.index(label)] = int(d)
        return ModeLayout(tuple(dims), self.labels)

    def doubled(self, labels: tuple[str, ...] | None = None) -> "ModeLayout":
        """Layout with doubled truncation on the given (default: all non-spin,
        i.e. dims > 2) bosonic slots. Used for convergence re-runs."""
        if labels is None:
            labels = tuple(s for s, d in zip(self.labels, self.dims) if d > 2)
        return self.with_dims(**{s: 2 * self.dim(s) for s in labels})


@dataclass(frozen=True)
class QOperator:
    """Dense operator attached to a layout."""

    layout: ModeLayout
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.ascontiguousarray(np.asarray(self.matrix, dtype=np.complex128))
        n = self.layout.total_dim
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} != layout dim {(n, n)}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def dagger(self) -> "QOperator":
        return QOperator(self.layout, self.matrix.conj().T)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.hermiticity_defect() < tol

    def unitarity_defect(self) -> float:
        n = self.layout.total_dim
        return float(
            np.max(np.abs(self.matrix.conj().T @ self.matrix - np.eye(n)))
        )

    def __matmul__(self, other):
        if isinstance(other, QOperator):
            self._check_layout(other)
            return QOperator(self.layout, self.matrix @ other.matrix)
        if isinstance(other, QState):
            return other.__rmatmul__(self)
        return NotImplemented

    def __add__(self, other):
        if not isinstance(other, QOperator):
            return NotImplemented
        self._check_layout(other)
        return QOperator(self.layout, self.matrix + other.matrix)

    def __sub__(self, other):
        if not isinstance(other, QOperator):
            return NotImplemented
        self._check_layout(other)
        return QOperator(self.layout, self.matrix - other.matrix)

    def __mul__(self, scalar):
        return QOperator(self.layout, self.matrix * complex(scalar))

    __rmul__ = __mul__

    def expectation(self, state: "QState") -> complex:
        self._check_layout(state)
        if state.is_pure:
            v = state.vector
            return complex(np.vdot(v, self.matrix @ v))
        return complex(np.trace(self.matrix @ state.density))

    def _check_layout(self, other):
        if other.layout != self.layout:
            raise ValueError(
                f"layout mismatch: {self.layout.labels}{self.layout.dims} vs "
                f"{other.layout.labels}{other.layout.dims}"
            )


class QState:
    """Pure state vector or density matrix on a layout.

    Constructed states are validated against the type contract: pure states
    normalized to 1 within 1e-9; densities trace-one within 1e-9 and Hermitian
    within 1e-12. Positivity is an O(n^3) eigenvalue check, so it is exposed
    as :meth:`min_eigenvalue` rather than run on every construction; solver
    post-conditions and the property tests call it with their own floors.
    """

    __slots__ = ("layout", "_vector", "_density")

    def __init__(self, layout, *, vector=None, density=None):
        if (vector is None) == (density is None):
            raise ValueError("exactly one of vector/density required")
        self.layout = layout
        n = layout.total_dim
        if vector is not None:
            v = np.ascontiguousarray(np.asarray(vector, dtype=np.complex128)).reshape(-1)
            if v.shape != (n,):
                raise ValueError(f"vector length {v.shape} != layout dim {n}")
            norm = float(np.linalg.norm(v))
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"pure state norm {norm!r} deviates from 1 by > 1e-9")
            v.setflags(write=False)
            self._vector, self._density = v, None
        else:
            m = np.ascontiguousarray(np.asarray(density, dtype=np.complex128))
            if m.shape != (n, n):
                raise ValueError(f"density shape {m.shape} != layout dim {(n, n)}")
            tr = complex(np.trace(m))
            if abs(tr - 1.0) > 1e-9:
                raise ValueError(f"density trace {tr!r} deviates from 1 by > 1e-9")
            defect = float(np.max(np.abs(m - m.conj().T)))
            if defect > 1e-12:
                raise ValueError(f"density hermiticity defect {defect:g} > 1e-12")
            m.setflags(write=False)
            self._vector, self._density = None, m

    @classmethod
    def pure(cls, layout, vector) -> "QState":
        return cls(layout, vector=vector)

    @classmethod
    def mixed(cls, layout, density) -> "QState":
        return cls(layout, density=density)

    @property
    def is_pure(self) -> bool:
        return self._vector is not None

    @property
    def vector(self) -> np.ndarray:
        if self._vector is None:
            raise ValueError("state is a density matrix, not a vector")
        return self._vector

    @property
    def density(self) -> np.ndarray:
        if self._density is not None:
            return self._density
        v = self._vector
        return np.outer(v, v.conj())

    def min_eigenvalue(self) -> float:
        if self.is_pure:
            return 0.0
        return float(np.linalg.eigvalsh(self._density)[0])

    def __rmatmul__(self, op: QOperator) -> "QState":
        op._check_layout(self)
        if self.is_pure:
            return QState(self.layout, vector=op.matrix @ self._vector)
        u = op.matrix
        return QState(self.layout, density=u @ self._density @ u.conj().T)


def annihilation(dim: int) -> np.ndarray:
    """Ladder lowering operator: <n-1|a|n> = sqrt(n)."""
    if dim < 2:
        raise ValueError(f"mode dimension must be >= 2, got {dim}")
    a = np.zeros((dim, dim), dtype=np.complex128)
    ns = np.arange(1, dim)
    a[ns - 1, ns] = np.sqrt(ns)
    return a


def creation(dim: int) -> np.ndarray:
    return annihilation(dim).conj().T


def number_operator(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=np.complex128))


def quadratures(dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (x, p, q) for one mode.

    q is the dimensionless charge quadrature of the LC mode and is the same
    matrix as x; it is returned separately so call sites read physically.
    """
    a = annihilation(dim)
    ad = a.conj().T
    x = (a + ad) / np.sqrt(2.0)
    p = -1j * (a - ad) / np.sqrt(2.0)
    return x, p, x.copy()


_PAULI = {
    "i": np.eye(2, dtype=np.complex128),
    "x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
    "+": np.array([[0, 1], [0, 0]], dtype=np.complex128),  # |up><down|
    "-": np.array([[0, 0], [1, 0]], dtype=np.complex128),
}


def pauli(which: str) -> np.ndarray:
    """Pauli matrix in the {|up>, |down>} = {index 0, index 1} basis."""
    try:
        return _PAULI[which].copy()
    except KeyError:
        raise ValueError(f"unknown Pauli label {which!r}") from None


def identity(layout: ModeLayout) -> QOperator:
    return QOperator(layout, np.eye(layout.total_dim, dtype=np.complex128))


def embed(layout: ModeLayout, label: str, matrix: np.ndarray) -> QOperator:
    """Lift a single-mode operator into the composite space.

    The spectrum of the result is the spectrum of ``matrix`` with every
    eigenvalue repeated (product of the other dimensions) times.
    """
    return QOperator(layout, layout.lift({label: matrix}))


def displacement(alpha: complex, dim: int) -> np.ndarray:
    """D(alpha) = exp(alpha a^dag - alpha^* a) on a dim-level ladder.

    Faithful only while the displaced state fits the truncation; warns when
    |alpha|^2 exceeds dim/4.
    """
    alpha = complex(alpha)
    if abs(alpha) ** 2 > dim / 4:
        warnings.warn(
            TruncationWarning(
                f"displacement |alpha|^2 = {abs(alpha)**2:.3g} strains "
                f"truncation dim = {dim}",
                amplitude=abs(alpha),
                dim=dim,
            ),
            stacklevel=2,
        )
    a = annihilation(dim)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def fock_state(dim: int, n: int) -> np.ndarray:
    if not 0 <= n < dim:
        raise ValueError(f"Fock level {n} outside [0, {dim})")
    v = np.zeros(dim, dtype=np.complex128)
    v[n] = 1.0
    return v


def _coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    # exp(-|a|^2/2) a^n / sqrt(n!), accumulated multiplicatively for stability
    amps = np.empty(dim, dtype=np.complex128)
    amps[0] = np.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, dim):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    return amps


def coherent_state(alpha: complex, dim: int) -> np.ndarray:
    """Truncated coherent state, renormalized on the kept levels."""
    alpha = complex(alpha)
    if abs(alpha) ** 2 > dim / 4:
        warnings.warn(
            TruncationWarning(
                f"coherent |alpha|^2 = {abs(alpha)**2:.3g} strains "
                f"truncation dim = {dim}",
                amplitude=abs(alpha),
                dim=dim,
            ),
            stacklevel=2,
        )
    v = _coherent_amplitudes(alpha, dim)
    return v / np.linalg.norm(v)


def cat_state(alpha: complex, dim: int, phase: float = 0.0) -> np.ndarray:
    """Normalized superposition |alpha> + e^{i phase} |-alpha>."""
    v = _coherent_amplitudes(complex(alpha), dim)
    w = _coherent_amplitudes(-complex(alpha), dim)
    out = v + np.exp(1j * phase) * w
    norm = np.linalg.norm(out)
    if norm < 1e-300:
        raise ValueError("cat components cancel exactly; adjust phase")
    return out / norm


_SPIN = {
    "up": np.array([1, 0], dtype=np.complex128),
    "down": np.array([0, 1], dtype=np.complex128),
    "+x": np.array([1, 1], dtype=np.complex128) / np.sqrt(2),
    "-x": np.array([1, -1], dtype=np.complex128) / np.sqrt(2),
    "+y": np.array([1, 1j], dtype=np.complex128) / np.sqrt(2),
    "-y": np.array([1, -1j], dtype=np.complex128) / np.sqrt(2),
}


def spin_state(which: str) -> np.ndarray:
    try:
        return _SPIN[which].copy()
    except KeyError:
        raise ValueError(f"unknown spin label {which!r}") from None


def product_state(layout: ModeLayout, factors: dict[str, np.ndarray]) -> QState:
    """Pure product state; every slot must be given a factor."""
    missing = set(layout.labels) - set(factors)
    if missing:
        raise ValueError(f"missing factors for {sorted(missing)}")
    v = np.ones(1, dtype=np.complex128)
    for label, d in zip(layout.labels, layout.dims):
        f = np.asarray(factors[label], dtype=np.complex128).reshape(-1)
        if f.shape != (d,):
            raise ValueError(f"factor for {label!r} has length {f.shape[0]}, expected {d}")
        v = np.kron(v, f)
    v = v / np.linalg.norm(v)
    return QState(layout, vector=v)


def partial_trace(state: QState, keep: tuple[str, ...]) -> np.ndarray:
    """Reduced density matrix over the named slots (in layout order)."""
    layout = state.layout
    keep_idx = sorted(layout.index(s) for s in keep)
    dims = layout.dims
    rho = state.density.reshape(dims + dims)
    n_modes = len(dims)
    traced = [i for i in range(n_modes) if i not in keep_idx]
    for offset, i in enumerate(traced):
        ax = i - offset
        rho = np.trace(rho, axis1=ax, axis2=ax + n_modes - offset)
    d_keep = math.prod(dims[i] for i in keep_idx)
    return rho.reshape(d_keep, d_keep)
