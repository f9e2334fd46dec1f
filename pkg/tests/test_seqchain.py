import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ket
from qubound.errors import ShapeError, ValidationError, VanishingBranchError
from qubound.qstate import (
    DensityOperator,
    Projector,
    PureState,
    random_density,
    random_projector,
    random_pure_state,
    rng_stream,
    zeno_family,
)
from qubound.seqchain import (
    MeasurementChain,
    apply_projector,
    extract_angles,
    run_back_and_forth,
    run_chain,
    run_purified,
    sandwich_success,
)

seeds = st.integers(min_value=0, max_value=2**64 - 1)
PLUS = Projector.from_vectors(np.array([1, 1]) / math.sqrt(2))
ZERO = PureState(np.array([1.0, 0.0]))


def rotation_projector(phi):
    return Projector.from_vectors(np.array([math.cos(phi), math.sin(phi)]))


def test_identity_chain_is_trivial(rng):
    psi = random_pure_state(3, rng)
    chain = MeasurementChain(tuple(Projector.identity(3) for _ in range(4)), psi)
    t = run_chain(chain)
    assert t.success_probability == pytest.approx(1.0, abs=1e-14)
    assert t.trace_distance == pytest.approx(0.0, abs=1e-12)
    assert all(abs(e) < 1e-14 for e in t.epsilons)


def test_apply_projector_plus_on_zero():
    state, prob = apply_projector(PLUS, ZERO)
    assert prob == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(state.density(), np.full((2, 2), 0.5))
    rho_state, rho_prob = apply_projector(PLUS, DensityOperator(ZERO.density()))
    assert rho_prob == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(rho_state.matrix, np.full((2, 2), 0.5))


def test_single_step_trace_distance_is_sqrt2():
    t = run_chain(MeasurementChain((PLUS,), ZERO))
    assert t.trace_distance == pytest.approx(math.sqrt(2), abs=1e-14)
    assert t.epsilons[0] == pytest.approx(0.5, abs=1e-15)


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        MeasurementChain((Projector.identity(3),), ZERO)
    with pytest.raises(ShapeError):
        apply_projector(Projector.identity(3), ZERO)
    with pytest.raises(ValidationError):
        MeasurementChain((), ZERO)


def test_orthogonal_projector_vanishes():
    perp = Projector(np.diag([0.0, 1.0]).astype(complex))
    with pytest.raises(VanishingBranchError) as info:
        run_chain(MeasurementChain((Projector.identity(2), perp), ZERO))
    assert info.value.step == 1
    assert info.value.exit_code == 3


def test_zeno_closed_form_n10():
    n = 10
    projs = tuple(rotation_projector(k * math.pi / (2 * n)) for k in range(1, n + 1))
    t = run_chain(MeasurementChain(projs, ZERO))
    want = math.cos(math.pi / (2 * n)) ** (2 * n)
    assert abs(t.success_probability - want) <= 1e-12
    assert abs(t.success_direct - want) <= 1e-12
    # the last projector is orthogonal to |0>, so there is no angle record
    assert not t.has_angles and "angles" in t.meta


def test_angles_two_step_qubit():
    chain = MeasurementChain((rotation_projector(math.pi / 4), PLUS), ZERO)
    t = extract_angles(chain)
    q = math.pi / 4
    assert t.thetas == pytest.approx((q, 0.0), abs=1e-12)
    assert t.alphas == pytest.approx((q, q), abs=1e-12)
    assert t.betas == pytest.approx((q, q), abs=1e-12)
    assert t.gammas == pytest.approx((0.0, 0.0), abs=1e-7)


def test_extract_angles_requires_pure():
    chain = MeasurementChain((PLUS,), DensityOperator(np.eye(2) / 2))
    with pytest.raises(ValidationError, match="pure"):
        extract_angles(chain)


def _pure_chain(seed, d_max=6, n_max=6):
    rng = rng_stream(seed)
    d = int(rng.integers(2, d_max + 1))
    n = int(rng.integers(1, n_max + 1))
    psi = random_pure_state(d, rng)
    if rng.random() < 0.5:
        projs, _ = zeno_family(psi, n, 0.3, rng)
    else:
        projs = [random_projector(d, int(rng.integers(1, d + 1)), rng) for _ in range(n)]
    return MeasurementChain(tuple(projs), psi)


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_angle_identities(seed):
    chain = _pure_chain(seed)
    try:
        t = extract_angles(chain)
    except VanishingBranchError:
        return
    ca, cb, cg = np.cos(t.alphas), np.cos(t.betas), np.cos(t.gammas)
    assert np.max(np.abs(cb - ca * cg)) <= 1e-7
    betas_prev = (0.0,) + t.betas[:-1]
    for i in range(t.n_steps):
        lhs = math.cos(betas_prev[i])
        rhs = (math.cos(t.thetas[i]) * ca[i] * cg[i]
               + math.sin(t.thetas[i]) * math.sin(t.alphas[i]))
        assert lhs <= rhs + 1e-7
    # success is the product of cos^2 theta
    assert np.prod(np.cos(t.thetas) ** 2) == pytest.approx(t.success_probability, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(seed=seeds)
def test_step_probabilities_and_direct_success_agree(seed):
    chain = _pure_chain(seed)
    try:
        t = run_chain(chain, keep_states=True)
    except VanishingBranchError:
        return
    assert t.success_probability == pytest.approx(t.success_direct, abs=1e-10)
    assert len(t.intermediate_states) == t.n_steps
    assert all(0.0 <= p <= 1.0 + 1e-12 for p in t.step_probabilities)


@settings(max_examples=50, deadline=None)
@given(seed=seeds)
def test_mixed_and_purified_runs_agree(seed):
    rng = rng_stream(seed)
    d = int(rng.integers(2, 5))
    rho = random_density(d, int(rng.integers(1, d + 1)), rng)
    projs = tuple(random_projector(d, int(rng.integers(1, d + 1)), rng) for _ in range(3))
    chain = MeasurementChain(projs, rho)
    try:
        t = run_chain(chain)
        pt, reduced = run_purified(chain)
    except VanishingBranchError:
        return
    assert pt.success_probability == pytest.approx(t.success_probability, abs=1e-9)
    assert np.max(np.abs(reduced - t.final_state)) <= 1e-9
    assert pt.epsilons == pytest.approx(t.epsilons, abs=1e-10)
    # purification can only increase distinguishability
    assert pt.trace_distance >= t.trace_distance - 1e-9


def test_commuting_projectors_permutation_invariant(rng):
    d = 5
    u = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))[0]
    masks = [np.array([1, 1, 0, 1, 1]), np.array([1, 0, 1, 1, 1]), np.array([1, 1, 1, 1, 0])]
    projs = [Projector(u @ np.diag(m).astype(complex) @ u.conj().T) for m in masks]
    rho = random_density(d, d, rng)
    ref = run_chain(MeasurementChain(tuple(projs), rho))
    for perm in ([2, 0, 1], [1, 2, 0], [2, 1, 0]):
        t = run_chain(MeasurementChain(tuple(projs[i] for i in perm), rho))
        assert t.success_probability == pytest.approx(ref.success_probability, abs=1e-12)
        assert np.allclose(t.final_state, ref.final_state, atol=1e-10)


def test_back_and_forth_order(rng):
    psi = random_pure_state(3, rng)
    projs, _ = zeno_family(psi, 3, 0.05, rng)
    chain = MeasurementChain(tuple(projs), psi)
    t = run_back_and_forth(chain)
    assert t.order == (0, 1, 2, 1, 0)
    assert len(t.epsilons) == 3
    assert t.success_direct == pytest.approx(sandwich_success([projs[i] for i in t.order], psi))


def test_subnormalized_initial_state():
    rho = DensityOperator(np.diag([0.25, 0.25]).astype(complex), subnormalized=True)
    t = run_chain(MeasurementChain((PLUS,), rho))
    assert t.initial_trace == pytest.approx(0.5)
    assert t.success_probability == pytest.approx(0.25, abs=1e-14)
    assert t.epsilons[0] == pytest.approx(0.25, abs=1e-14)


def test_trace_json():
    t = extract_angles(MeasurementChain((PLUS,), ZERO))
    j = t.to_json()
    assert set(j) >= {"stepProb", "epsilons", "success", "traceDistance", "theta", "alpha"}
    assert ket(2, 0).shape == (2,)
