"""Dense complex linear algebra for two- and four-dimensional quantum systems.

States, operators, POVMs, tensor products, Born-rule probabilities, Kraus-map
application and partial traces -- everything downstream modules need to push
density matrices through measurements and channels. All values are immutable
after construction and every operation is pure, so they can be shared freely
across worker threads.

Two tolerance regimes are used throughout the package:

* ``ATOL_CONSTRUCT`` (1e-12) for construction-time invariants (norms, traces,
  hermiticity), and
* ``ATOL_DERIVED`` (1e-10) for derived quantities (completeness sums,
  positivity of POVM elements, Kraus trace preservation).

Dimensions are restricted to 2 and 4: one qubit per party, two parties.
"""

from __future__ import annotations

from typing import Iterable, Sequence, Union

import numpy as np

ATOL_CONSTRUCT = 1e-12
ATOL_DERIVED = 1e-10

_ALLOWED_DIMS = (2, 4)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
for _m in (PAULI_X, PAULI_Y, PAULI_Z):
    _m.setflags(write=False)


def identity(dim: int) -> np.ndarray:
    """Complex identity matrix of dimension ``dim``."""
    if dim not in _ALLOWED_DIMS:
        raise ValueError(f"dimension must be one of {_ALLOWED_DIMS}, got {dim}")
    return np.eye(dim, dtype=complex)


def _frozen_complex_array(values, shape_kind: str) -> np.ndarray:
    arr = np.array(values, dtype=complex)
    if shape_kind == "vector":
        if arr.ndim != 1 or arr.shape[0] not in _ALLOWED_DIMS:
            raise ValueError(f"expected a complex vector of dimension 2 or 4, got shape {arr.shape}")
    else:
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] not in _ALLOWED_DIMS:
            raise ValueError(f"expected a square 2x2 or 4x4 matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr.view(float))):
        raise ValueError("entries must be finite")
    arr.setflags(write=False)
    return arr


class StateVector:
    """A pure state of dimension 2 or 4, stored in the computational (Z) basis.

    Parameters
    ----------
    amplitudes : sequence of complex
        Probability amplitudes; squared norm must equal 1 within 1e-12.
    """

    def __init__(self, amplitudes: Iterable[complex]):
        self._amp = _frozen_complex_array(amplitudes, "vector")
        norm_sq = float(np.vdot(self._amp, self._amp).real)
        if abs(norm_sq - 1.0) > ATOL_CONSTRUCT:
            raise ValueError(f"state vector is not normalized: |psi|^2 = {norm_sq!r}")

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amp

    @property
    def dim(self) -> int:
        return self._amp.shape[0]

    def to_density(self) -> "DensityMatrix":
        """Rank-1 density matrix |psi><psi|."""
        return DensityMatrix(np.outer(self._amp, self._amp.conj()))

    def overlap(self, other: "StateVector") -> complex:
        """Inner product <self|other>."""
        if other.dim != self.dim:
            raise ValueError("dimension mismatch in overlap")
        return complex(np.vdot(self._amp, other._amp))

    def __repr__(self) -> str:
        return f"StateVector({np.array2string(self._amp, precision=6)})"


class DensityMatrix:
    """A mixed state: Hermitian, positive semidefinite, trace 1.

    A subnormalized matrix (trace < 1) represents the post-selected branch of
    a lossy or branching process; pass ``subnormalized=True`` to mark that the
    trace carries the branch probability instead of being 1.
    """

    def __init__(self, matrix, subnormalized: bool = False):
        mat = _frozen_complex_array(matrix, "matrix")
        if not np.allclose(mat, mat.conj().T, atol=ATOL_CONSTRUCT, rtol=0.0):
            raise ValueError("density matrix must be Hermitian within 1e-12")
        tr = float(np.trace(mat).real)
        if subnormalized:
            if tr < -ATOL_CONSTRUCT or tr > 1.0 + ATOL_CONSTRUCT:
                raise ValueError(f"subnormalized trace must lie in [0, 1], got {tr!r}")
        elif abs(tr - 1.0) > ATOL_CONSTRUCT:
            raise ValueError(f"trace must equal 1 within 1e-12, got {tr!r}")
        eig_min = float(np.linalg.eigvalsh(mat).min())
        if eig_min < -ATOL_DERIVED:
            raise ValueError(f"density matrix has a negative eigenvalue: {eig_min!r}")
        self._mat = mat
        self._subnormalized = bool(subnormalized)

    @property
    def matrix(self) -> np.ndarray:
        return self._mat

    @property
    def dim(self) -> int:
        return self._mat.shape[0]

    @property
    def subnormalized(self) -> bool:
        return self._subnormalized

    @property
    def trace(self) -> float:
        return float(np.trace(self._mat).real)

    def __repr__(self) -> str:
        tag = ", subnormalized" if self._subnormalized else ""
        return f"DensityMatrix(dim={self.dim}, trace={self.trace:.6f}{tag})"


class Operator:
    """A square complex matrix acting on a 2- or 4-dimensional system."""

    def __init__(self, matrix):
        self._mat = _frozen_complex_array(matrix, "matrix")

    @property
    def matrix(self) -> np.ndarray:
        return self._mat

    @property
    def dim(self) -> int:
        return self._mat.shape[0]

    def __repr__(self) -> str:
        return f"Operator(dim={self.dim})"


class Povm:
    """A positive-operator-valued measure: elements summing to the identity.

    Each element must be positive semidefinite within 1e-10 and the element
    sum must equal the identity within 1e-10. ``labels`` names the outcomes,
    one string per element, aligned with ``born_probabilities`` output.
    """

    def __init__(self, elements: Sequence[Union[Operator, np.ndarray]], labels: Sequence[str]):
        ops = tuple(e if isinstance(e, Operator) else Operator(e) for e in elements)
        if not ops:
            raise ValueError("a POVM needs at least one element")
        if len(labels) != len(ops):
            raise ValueError("one label per POVM element required")
        dim = ops[0].dim
        total = np.zeros((dim, dim), dtype=complex)
        for op in ops:
            m = op.matrix
            if op.dim != dim:
                raise ValueError("POVM elements must share one dimension")
            if not np.allclose(m, m.conj().T, atol=ATOL_DERIVED, rtol=0.0):
                raise ValueError("POVM elements must be Hermitian")
            if float(np.linalg.eigvalsh(m).min()) < -ATOL_DERIVED:
                raise ValueError("POVM elements must be positive semidefinite within 1e-10")
            total = total + m
        if not np.allclose(total, np.eye(dim), atol=ATOL_DERIVED, rtol=0.0):
            raise ValueError("POVM elements must sum to the identity within 1e-10")
        self._elements = ops
        self._labels = tuple(str(l) for l in labels)

    @property
    def elements(self) -> tuple:
        return self._elements

    @property
    def labels(self) -> tuple:
        return self._labels

    @property
    def dim(self) -> int:
        return self._elements[0].dim

    def __len__(self) -> int:
        return len(self._elements)

    def __repr__(self) -> str:
        return f"Povm(dim={self.dim}, outcomes={self._labels})"


def tensor(a, b):
    """Kronecker product of two dimension-2 objects, subsystem A on the left.

    Accepts two ``StateVector`` or two ``Operator`` operands and returns the
    same kind with dimension 4. Row-major ordering: basis state ``|i>|j>``
    sits at index ``2*i + j``.
    """
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        if a.dim != 2 or b.dim != 2:
            raise ValueError("tensor operands must both have dimension 2")
        return StateVector(np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, Operator) and isinstance(b, Operator):
        if a.dim != 2 or b.dim != 2:
            raise ValueError("tensor operands must both have dimension 2")
        return Operator(np.kron(a.matrix, b.matrix))
    raise ValueError("tensor takes two StateVector or two Operator operands")


def born_probabilities(rho: DensityMatrix, m: Povm) -> np.ndarray:
    """Outcome probabilities p_k = Tr(E_k rho) for a POVM measurement.

    Entries are clamped to [0, 1] after a -1e-10 tolerance check; an entry
    below -1e-8 signals inconsistent inputs and raises. For a subnormalized
    state the probabilities sum to its trace (the branch weight).
    """
    if m.dim != rho.dim:
        raise ValueError(f"dimension mismatch: state dim {rho.dim}, POVM dim {m.dim}")
    probs = np.empty(len(m), dtype=float)
    for k, element in enumerate(m.elements):
        p = float(np.trace(element.matrix @ rho.matrix).real)
        if p < -1e-8:
            raise ValueError(f"outcome {m.labels[k]!r} has probability {p!r}; invalid state/POVM pair")
        probs[k] = min(max(p, 0.0), 1.0)
    return probs


def apply_channel(rho: DensityMatrix, kraus: Sequence[Union[Operator, np.ndarray]],
                  subnormalized: bool = False) -> DensityMatrix:
    """Apply a Kraus map: rho' = sum_i K_i rho K_i^dagger.

    The Kraus set must be trace-preserving (sum K^dagger K = identity within
    1e-10) unless ``subnormalized=True``, in which case a trace-decreasing set
    is allowed and the output is flagged subnormalized.
    """
    ops = [k.matrix if isinstance(k, Operator) else np.asarray(k, dtype=complex) for k in kraus]
    if not ops:
        raise ValueError("empty Kraus set")
    dim = rho.dim
    for k in ops:
        if k.shape != (dim, dim):
            raise ValueError("Kraus operator dimension mismatch")
    total = sum(k.conj().T @ k for k in ops)
    trace_preserving = np.allclose(total, np.eye(dim), atol=ATOL_DERIVED, rtol=0.0)
    if not trace_preserving and not subnormalized:
        raise ValueError("Kraus set is not trace-preserving; pass subnormalized=True if intended")
    out = np.zeros((dim, dim), dtype=complex)
    for k in ops:
        out += k @ rho.matrix @ k.conj().T
    return DensityMatrix(out, subnormalized=rho.subnormalized or subnormalized)


def partial_trace(rho: DensityMatrix, keep: str) -> DensityMatrix:
    """Reduced state of one qubit of a two-qubit state.

    ``keep`` is ``"A"`` (left factor) or ``"B"`` (right factor). The trace of
    the input is preserved, as is its subnormalized flag.
    """
    if rho.dim != 4:
        raise ValueError("partial_trace requires a dimension-4 state")
    if keep not in ("A", "B"):
        raise ValueError('keep must be "A" or "B"')
    blocks = rho.matrix.reshape(2, 2, 2, 2)
    if keep == "A":
        reduced = np.einsum("ikjk->ij", blocks)
    else:
        reduced = np.einsum("kikj->ij", blocks)
    return DensityMatrix(reduced, subnormalized=rho.subnormalized)
