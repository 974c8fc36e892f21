"""Dense linear algebra for three-qubit polarization states.

Computational basis ordering is |HHH>, |HHV>, ..., |VVV> with H -> 0 and
V -> 1, Alice being the most significant qubit. Every matrix literal in the
package is written against this ordering.

States and observables are plain numpy arrays. Constructors here return
read-only arrays so they can be shared freely.
"""
from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np

from .errors import DomainError

ALGEBRA_TOL = 1e-12
PSD_TOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)

for _m in (SIGMA_X, SIGMA_Y, SIGMA_Z, I2):
    _m.flags.writeable = False

# (first, second) basis labels of |GHZ_i^±> = (|first> ± |second>)/sqrt(2)
_GHZ_SUPPORT = {
    1: ("HHH", "VVV"),
    2: ("HHV", "VVH"),
    3: ("HVH", "VHV"),
    4: ("VHH", "HVV"),
}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


def basis_index(label: str) -> int:
    """Index of a computational basis label such as ``"HVH"``."""
    if any(c not in "HV" for c in label):
        raise DomainError(f"basis label must use H/V only, got {label!r}")
    return int(label.replace("H", "0").replace("V", "1"), 2)


def ket(label: str) -> np.ndarray:
    n = len(label)
    v = np.zeros(2**n, dtype=complex)
    v[basis_index(label)] = 1.0
    return _frozen(v)


def ghz(variant: int = 1, sign: str | int = "+") -> np.ndarray:
    """One of the eight GHZ basis kets.

    ``ghz(1, "+")`` is the protocol's target state (|HHH> + |VVV>)/sqrt(2).

    Args:
        variant: 1..4, selecting which pair of basis states is superposed.
        sign: ``"+"``/``"-"`` or ``+1``/``-1``.
    """
    if variant not in _GHZ_SUPPORT:
        raise DomainError(f"GHZ variant must be 1..4, got {variant!r}")
    if sign in ("+", 1):
        s = 1.0
    elif sign in ("-", -1):
        s = -1.0
    else:
        raise DomainError(f"GHZ sign must be '+' or '-', got {sign!r}")
    first, second = _GHZ_SUPPORT[variant]
    v = np.zeros(8, dtype=complex)
    v[basis_index(first)] = 1 / np.sqrt(2)
    v[basis_index(second)] = s / np.sqrt(2)
    return _frozen(v)


def ghz_basis() -> list[tuple[int, str, np.ndarray]]:
    """All eight GHZ kets as ``(variant, sign, ket)`` triples."""
    return [(i, s, ghz(i, s)) for i in range(1, 5) for s in ("+", "-")]


def equatorial_observable(theta: float) -> np.ndarray:
    """cos(theta) sigma_x + sin(theta) sigma_y.

    The +1 eigenvector is (|H> + e^{i theta}|V>)/sqrt(2). Every basis used by
    the protocol is one of these: theta=0 is sigma_x, pi/2 is sigma_y,
    -pi/2 is -sigma_y and -pi/4, pi/4 are (sigma_x -+ sigma_y)/sqrt(2).
    """
    if not np.isfinite(theta):
        raise DomainError(f"angle must be finite, got {theta!r}")
    return _frozen(np.cos(theta) * SIGMA_X + np.sin(theta) * SIGMA_Y)


def projector(theta: float, outcome: int) -> np.ndarray:
    """Projector onto the ``outcome`` (+1/-1) eigenspace of E(theta)."""
    if outcome not in (1, -1):
        raise DomainError(f"outcome must be +1 or -1, got {outcome!r}")
    return _frozen((I2 + outcome * equatorial_observable(theta)) / 2)


def tensor(*mats: np.ndarray) -> np.ndarray:
    """Kronecker product of the arguments, left to right."""
    if not mats:
        raise DomainError("tensor needs at least one factor")
    return reduce(np.kron, (np.asarray(m, dtype=complex) for m in mats))


def pure(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    norm = np.vdot(psi, psi).real
    if abs(norm - 1) > ALGEBRA_TOL:
        raise DomainError(f"ket is not normalized (|psi|^2 = {norm!r})")
    return _frozen(np.outer(psi, psi.conj()))


def as_density(state: np.ndarray) -> np.ndarray:
    """Accept a ket or a density matrix and return a density matrix."""
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return pure(state)
    return state


def mix(weights: Sequence[float], states: Sequence[np.ndarray]) -> np.ndarray:
    """Convex combination of kets and/or density matrices."""
    w = np.asarray(weights, dtype=float)
    if len(w) != len(states):
        raise DomainError("weights and states differ in length")
    if np.any(w < 0) or abs(w.sum() - 1) > ALGEBRA_TOL:
        raise DomainError(f"weights must be a probability vector, got {list(w)}")
    rho = sum(wi * as_density(s) for wi, s in zip(w, states))
    check_density(rho)
    return _frozen(rho)


def maximally_mixed(n_qubits: int = 3) -> np.ndarray:
    d = 2**n_qubits
    return _frozen(np.eye(d, dtype=complex) / d)


def check_density(rho: np.ndarray) -> None:
    """Raise DomainError unless ``rho`` is Hermitian, trace one and PSD."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DomainError(f"density matrix must be square, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > ALGEBRA_TOL:
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > ALGEBRA_TOL:
        raise DomainError(f"density matrix trace is {np.trace(rho)!r}")
    if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
        raise DomainError("density matrix has a negative eigenvalue")


def is_density(rho: np.ndarray) -> bool:
    try:
        check_density(rho)
    except DomainError:
        return False
    return True


def is_hermitian(op: np.ndarray, tol: float = ALGEBRA_TOL) -> bool:
    op = np.asarray(op)
    return op.ndim == 2 and op.shape[0] == op.shape[1] and np.max(np.abs(op - op.conj().T)) <= tol


def is_measurement_observable(op: np.ndarray) -> bool:
    """Hermitian and squares to the identity, i.e. spectrum in {-1, +1}."""
    op = np.asarray(op)
    return is_hermitian(op) and np.allclose(op @ op, np.eye(op.shape[0]), atol=PSD_TOL, rtol=0)


def expectation(rho: np.ndarray, op: np.ndarray) -> float:
    """Tr[rho O] for Hermitian O."""
    rho = as_density(rho)
    op = np.asarray(op, dtype=complex)
    if rho.shape != op.shape:
        raise DomainError(f"shape mismatch: state {rho.shape} vs observable {op.shape}")
    if not is_hermitian(op):
        raise DomainError("observable is not Hermitian")
    val = np.trace(rho @ op)
    assert abs(val.imag) < PSD_TOL, f"non-real expectation {val!r}"
    return float(val.real)


def partial_trace(rho: np.ndarray, keep: Sequence[int], n_qubits: int = 3) -> np.ndarray:
    """Reduced state on the qubits listed in ``keep`` (0 = Alice)."""
    keep = sorted(keep)
    t = np.asarray(rho, dtype=complex).reshape([2] * (2 * n_qubits))
    traced = [q for q in range(n_qubits) if q not in keep]
    # trace out from the highest index so axis numbers stay valid
    n = n_qubits
    for q in reversed(traced):
        t = np.trace(t, axis1=q, axis2=q + n)
        n -= 1
    d = 2 ** len(keep)
    return t.reshape(d, d)


def random_density(rng: np.random.Generator, dim: int = 8, rank: int | None = None) -> np.ndarray:
    """Random density matrix from the Ginibre ensemble (for tests and checks)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return _frozen(rho / np.trace(rho).real)
