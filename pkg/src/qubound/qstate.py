"""Validated quantum objects, purification, entropy and seeded generators."""

import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOL
from .errors import ShapeError, ValidationError
from .numkernel import (
    as_matrix,
    hermitian_eig,
    hermitian_part,
    is_hermitian,
    matrix_from_json,
    matrix_to_json,
    partial_trace,
)


def rng_stream(seed, index=0):
    """Counter-based generator identified by ``(seed, index)``.

    Trials drawing from ``rng_stream(seed, i)`` are reproducible no matter
    which worker evaluates them or in which order.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return rng_stream(rng)


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).ravel()
        if v.size == 0:
            raise ValidationError("PureState: dimension must be at least 1")
        if not np.all(np.isfinite(v)):
            raise ValidationError("PureState: amplitudes must be finite")
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > DEFAULT_TOL.atol:
            raise ValidationError(f"PureState: norm must be 1 (got {norm:.3g})")
        object.__setattr__(self, "amplitudes", v)

    @classmethod
    def normalized(cls, v):
        v = np.asarray(v, dtype=complex).ravel()
        n = np.linalg.norm(v)
        if n == 0:
            raise ValidationError("PureState: cannot normalize the zero vector")
        return cls(v / n)

    @property
    def dim(self):
        return self.amplitudes.size

    def density(self):
        v = self.amplitudes
        return np.outer(v, v.conj())

    def to_density(self):
        return DensityOperator(self.density())


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """PSD, Hermitian, unit trace.

    With ``subnormalized=True`` any trace in ``(0, 1]`` is accepted, which is
    what Sen's form of the union bound allows.
    """

    matrix: np.ndarray
    subnormalized: bool = False

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise ShapeError(f"DensityOperator: matrix must be square, got {m.shape}")
        if not is_hermitian(m, DEFAULT_TOL.atol):
            raise ValidationError("DensityOperator: matrix must be Hermitian")
        m = hermitian_part(m)
        w = np.linalg.eigvalsh(m)
        if w[0] < -DEFAULT_TOL.atol:
            raise ValidationError(
                f"DensityOperator: eigenvalues must be >= 0 (min {w[0]:.3g})")
        tr = float(np.trace(m).real)
        if self.subnormalized:
            if tr > 1 + DEFAULT_TOL.atol or tr <= 0:
                raise ValidationError(f"DensityOperator: trace must lie in (0, 1] (got {tr:.6g})")
        elif abs(tr - 1.0) > DEFAULT_TOL.atol:
            raise ValidationError(f"DensityOperator: trace must be 1 (got {tr:.6g})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def trace(self):
        return float(np.trace(self.matrix).real)

    def purity(self):
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def is_pure(self, atol=1e-9):
        return abs(self.purity() - 1.0) <= atol and not self.subnormalized

    def to_pure(self):
        """Dominant eigenvector, for a density operator that is rank one."""
        if not self.is_pure():
            raise ValidationError("DensityOperator: state is mixed, not pure")
        w, v = np.linalg.eigh(self.matrix)
        return PureState.normalized(v[:, -1])


@dataclass(frozen=True, eq=False)
class Projector:
    matrix: np.ndarray
    rank: int = field(init=False)

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise ShapeError(f"Projector: matrix must be square, got {m.shape}")
        if not is_hermitian(m, DEFAULT_TOL.atol):
            raise ValidationError("Projector: matrix must be Hermitian")
        m = hermitian_part(m)
        if np.max(np.abs(m @ m - m), initial=0.0) > DEFAULT_TOL.atol:
            raise ValidationError("Projector: matrix must be idempotent (P^2 = P)")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "rank", int(round(float(np.trace(m).real))))

    @classmethod
    def from_vectors(cls, v):
        """Projector onto the span of the (orthonormal) columns of ``v``."""
        v = np.asarray(v, dtype=complex)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        return cls(v @ v.conj().T)

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d, dtype=complex))

    @property
    def dim(self):
        return self.matrix.shape[0]

    def complement(self):
        return Projector(np.eye(self.dim) - self.matrix)


@dataclass(frozen=True, eq=False)
class Effect:
    """POVM element, ``0 <= E <= I``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise ShapeError(f"Effect: matrix must be square, got {m.shape}")
        if not is_hermitian(m, DEFAULT_TOL.atol):
            raise ValidationError("Effect: matrix must be Hermitian")
        m = hermitian_part(m)
        w = np.linalg.eigvalsh(m)
        if w[0] < -DEFAULT_TOL.atol or w[-1] > 1 + DEFAULT_TOL.atol:
            raise ValidationError("Effect: eigenvalues must lie in [0, 1]")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]


def _clipped_spectrum(rho, tol=DEFAULT_TOL.atol):
    w, v = hermitian_eig(rho.matrix)
    if w[0] < -tol:
        raise ValidationError(f"negative eigenvalue {w[0]:.3g} beyond tolerance")
    return np.clip(w, 0.0, None), v


def purify(rho):
    """Purification ``Σ √λ_i |i>_R |v_i>_A`` on ``R ⊗ A`` (reference first)."""
    w, v = _clipped_spectrum(rho)
    d = rho.dim
    psi = np.zeros(d * d, dtype=complex)
    for i in range(d):
        if w[i] > 0:
            psi += math.sqrt(w[i]) * np.kron(np.eye(d)[i], v[:, i])
    if rho.subnormalized:
        psi /= np.linalg.norm(psi)
    return PureState(psi)


def reduce_purification(psi, ref_dim):
    """Partial trace over the reference of ``|psi><psi|``."""
    d = psi.dim // ref_dim
    return partial_trace(psi.density(), ref_dim, d, keep="B")


def lift_projector(p, ref_dim):
    """``I_R ⊗ P``."""
    return Projector(np.kron(np.eye(ref_dim), p.matrix))


def von_neumann_entropy(rho):
    """Entropy in bits; eigenvalues within round-off of zero contribute 0."""
    w, _ = _clipped_spectrum(rho)
    w = w[w > 0]
    return float(max(0.0, -np.sum(w * np.log2(w))))


def _complex_gaussian(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_pure_state(d, rng):
    rng = _as_rng(rng)
    if d < 1:
        raise ValidationError("random_pure_state: d must be >= 1")
    return PureState.normalized(_complex_gaussian(rng, d))


def random_density(d, rank, rng):
    """Hilbert-Schmidt (induced Ginibre) random density operator."""
    rng = _as_rng(rng)
    if not 1 <= rank <= d:
        raise ValidationError(f"random_density: need 1 <= rank <= d (rank={rank}, d={d})")
    g = _complex_gaussian(rng, d, rank)
    m = g @ g.conj().T
    return DensityOperator(m / np.trace(m).real)


def haar_unitary(d, rng):
    rng = _as_rng(rng)
    q, r = np.linalg.qr(_complex_gaussian(rng, d, d))
    phases = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phases


def random_projector(d, rank, rng):
    rng = _as_rng(rng)
    if not 1 <= rank <= d:
        raise ValidationError(f"random_projector: need 1 <= rank <= d (rank={rank}, d={d})")
    v = haar_unitary(d, rng)[:, :rank]
    return Projector.from_vectors(v)


def random_effect(d, rng):
    rng = _as_rng(rng)
    u = haar_unitary(d, rng)
    return Effect((u * rng.uniform(0, 1, d)) @ u.conj().T)


def _random_unit_orthogonal_to(basis, rng):
    d = basis.shape[0]
    w = _complex_gaussian(rng, d)
    w -= basis @ (basis.conj().T @ w)
    return w / np.linalg.norm(w)


def zeno_family(psi, n, eps_max, rng):
    """``n`` projectors of rank ``ceil(d/2)`` each nearly containing ``psi``.

    Each range contains ``cos φ ψ + sin φ w`` for a random unit ``w ⟂ ψ`` and
    ``φ`` uniform in ``[0, arcsin √eps_max]``, so ``tr(P ψψ†) >= 1 - eps_max``.
    Returns ``(projectors, epsilons)``.
    """
    rng = _as_rng(rng)
    if not 0 <= eps_max <= 0.5:
        raise ValidationError("zeno_family: eps_max must lie in [0, 1/2]")
    d = psi.dim
    rank = (d + 1) // 2
    v0 = psi.amplitudes.reshape(-1, 1)
    phi_max = math.asin(math.sqrt(eps_max))
    projectors, eps = [], []
    for _ in range(n):
        if d == 1:
            projectors.append(Projector.identity(1))
            eps.append(0.0)
            continue
        phi = rng.uniform(0.0, phi_max)
        w = _random_unit_orthogonal_to(v0, rng)
        u = math.cos(phi) * psi.amplitudes + math.sin(phi) * w
        cols = [u]
        basis = u.reshape(-1, 1)
        for _ in range(rank - 1):
            x = _random_unit_orthogonal_to(basis, rng)
            cols.append(x)
            basis = np.column_stack(cols)
        p = Projector.from_vectors(np.column_stack(cols))
        projectors.append(p)
        eps.append(float(1.0 - np.real(np.vdot(psi.amplitudes, p.matrix @ psi.amplitudes))))
    return projectors, eps


def instance_to_json(rho, projectors):
    m = rho.density() if isinstance(rho, PureState) else rho.matrix
    return {"rho": matrix_to_json(m), "projectors": [matrix_to_json(p.matrix) for p in projectors]}


def instance_from_json(obj):
    try:
        rho = DensityOperator(matrix_from_json(obj["rho"]))
        projectors = [Projector(matrix_from_json(p)) for p in obj["projectors"]]
    except KeyError as exc:
        raise ValidationError(f"instance JSON missing key {exc}") from None
    return rho, projectors
