"""Dense complex linear algebra primitives.

Matrices are plain ``numpy`` arrays of dtype ``complex128``; every function
here is pure and never mutates its arguments.
"""

from typing import NamedTuple

import numpy as np

from .config import DEFAULT_TOL
from .errors import ShapeError, ValidationError


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # ascending, real
    eigenvectors: np.ndarray  # columns orthonormal

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(a):
    """Coerce to a finite 2-D complex array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise ShapeError(f"expected a matrix, got array of ndim {m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix entries must be finite (no NaN/Inf)")
    return m


def matmul(a, b):
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def dagger(a):
    return np.asarray(a).conj().T


def is_hermitian(a, atol=DEFAULT_TOL.atol):
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.max(
        np.abs(a - a.conj().T), initial=0.0) <= atol


def hermitian_part(a):
    return 0.5 * (a + a.conj().T)


def hermitian_eig(a, atol=DEFAULT_TOL.atol):
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    The input is symmetrized as ``(A + A†)/2`` once it passes the Hermiticity
    gate, so accumulated round-off is removed but genuine asymmetry is not.
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"hermitian_eig needs a square matrix, got {a.shape}")
    if not is_hermitian(a, atol):
        raise ValidationError("hermitian_eig: input is not Hermitian within tolerance")
    w, v = np.linalg.eigh(hermitian_part(a))
    return EigenDecomposition(w, v)


def eigvalsh(a, atol=DEFAULT_TOL.atol):
    a = as_matrix(a)
    if not is_hermitian(a, atol):
        raise ValidationError("eigvalsh: input is not Hermitian within tolerance")
    return np.linalg.eigvalsh(hermitian_part(a))


def min_eigenvalue(a, atol=DEFAULT_TOL.atol):
    return float(eigvalsh(a, atol)[0])


def tensor(*factors):
    """Kronecker product of one or more matrices (or vectors)."""
    out = np.asarray(factors[0], dtype=complex)
    for f in factors[1:]:
        out = np.kron(out, np.asarray(f, dtype=complex))
    return out


def partial_trace(a, dim_a, dim_b, keep="B"):
    """Trace out one factor of a bipartite operator on ``A ⊗ B``.

    ``keep`` selects the surviving subsystem, ``"A"`` or ``"B"``.
    """
    a = as_matrix(a)
    n = dim_a * dim_b
    if a.shape != (n, n):
        raise ShapeError(f"operator of shape {a.shape} does not factor as {dim_a}x{dim_b}")
    t = a.reshape(dim_a, dim_b, dim_a, dim_b)
    if keep == "A":
        return np.einsum("ibjb->ij", t)
    if keep == "B":
        return np.einsum("aiaj->ij", t)
    raise ValueError(f"keep must be 'A' or 'B', not {keep!r}")


def trace_norm(a):
    """Sum of singular values.

    Hermitian input uses ``Σ|λ|``; otherwise singular values come from the
    eigenvalues of ``A†A``.
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"trace_norm needs a square matrix, got {a.shape}")
    if is_hermitian(a, 1e-12):
        return float(np.sum(np.abs(np.linalg.eigvalsh(hermitian_part(a)))))
    w = np.linalg.eigvalsh(hermitian_part(a.conj().T @ a))
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))))


def psd_power(a, power, support_tol=1e-12):
    """``A**power`` for PSD ``A``; negative powers are taken on the support only."""
    w, v = hermitian_eig(a)
    cutoff = support_tol * max(1.0, float(np.max(np.abs(w), initial=0.0)))
    keep = w > cutoff
    vals = np.zeros_like(w)
    vals[keep] = w[keep] ** power
    return (v * vals) @ v.conj().T


def matrix_to_json(a):
    a = as_matrix(a)
    rows, cols = a.shape
    data = [[float(z.real), float(z.imag)] for z in a.ravel()]
    return {"rows": rows, "cols": cols, "data": data}


def matrix_from_json(obj):
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"matrix JSON needs rows, cols and data: {exc}") from None
    if len(data) != rows * cols:
        raise ValidationError(
            f"matrix JSON: entries length {len(data)} != rows*cols = {rows * cols}")
    arr = np.array([complex(re, im) for re, im in data], dtype=complex)
    return as_matrix(arr.reshape(rows, cols))
