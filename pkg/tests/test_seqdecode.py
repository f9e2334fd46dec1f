import math

import numpy as np
import pytest

from conftest import binary_entropy, enumerate_typical_count
from qubound.config import ResourceCaps
from qubound.errors import ResourceError, ValidationError
from qubound.qstate import DensityOperator, rng_stream, von_neumann_entropy
from qubound.seqdecode import (
    Codebook,
    CqChannel,
    DecodeContext,
    TypicalSpec,
    codebook_size,
    codeword_state,
    conditional_typical_projector,
    decoding_experiment,
    holevo_quantity,
    pgm_decode,
    random_codebook,
    sen_error_bound,
    sequential_decode,
    tensor_power_state,
    typical_projector,
    typicality_audit,
    union_error_bound,
)


def binary_channel():
    zero = np.array([[1, 0], [0, 0]], dtype=complex)
    plus = np.full((2, 2), 0.5, dtype=complex)
    return CqChannel((DensityOperator(zero), DensityOperator(plus)), np.array([0.5, 0.5]))


@pytest.mark.parametrize("spectrum,n,delta", [
    ([0.9, 0.1], 5, 0.3),
    ([0.9, 0.1], 5, 0.35),
    ([0.7, 0.3], 6, 0.1),
    ([0.5, 0.3, 0.2], 4, 0.2),
    ([0.5, 0.5], 3, 0.01),
])
def test_typical_rank_matches_enumeration(spectrum, n, delta):
    p = typical_projector(DensityOperator(np.diag(spectrum).astype(complex)), TypicalSpec(delta, n))
    assert p.rank == enumerate_typical_count(spectrum, n, delta)


def test_maximally_mixed_typical_projector_is_identity():
    p = typical_projector(DensityOperator(np.eye(2) / 2), TypicalSpec(0.01, 4))
    assert np.allclose(p.matrix(), np.eye(16))


def test_pure_state_typical_projector_rank_one():
    psi = np.array([1, 1j]) / math.sqrt(2)
    p = typical_projector(DensityOperator(np.outer(psi, psi.conj())), TypicalSpec(0.1, 3))
    assert p.rank == 1
    m = p.matrix()
    assert np.allclose(m @ m, m, atol=1e-12)


def test_typical_projector_idempotent_and_commutes():
    sigma = DensityOperator(np.array([[0.7, 0.2], [0.2, 0.3]], dtype=complex))
    p = typical_projector(sigma, TypicalSpec(0.2, 4)).matrix()
    big = tensor_power_state(sigma, 4)
    assert np.allclose(p @ p, p, atol=1e-12)
    assert np.allclose(p @ big, big @ p, atol=1e-12)


def test_conditional_projector_length_check():
    ch = binary_channel()
    with pytest.raises(ValidationError):
        conditional_typical_projector(ch, [0, 1], TypicalSpec(0.1, 3))


def test_dimension_cap():
    ch = binary_channel()
    with pytest.raises(ResourceError):
        typical_projector(ch.average(), TypicalSpec(0.1, 13), caps=ResourceCaps(max_dim=4096))


def test_holevo_binary_channel():
    ch = binary_channel()
    # average of |0><0| and |+><+| has eigenvalues (1 ± 1/√2)/2
    oracle = binary_entropy((1 + 1 / math.sqrt(2)) / 2)
    assert holevo_quantity(ch) == pytest.approx(oracle, abs=1e-12)
    assert abs(holevo_quantity(ch) - 0.6009) <= 1e-4


def test_holevo_trivial_channels():
    same = CqChannel((DensityOperator(np.eye(2) / 2),) * 2, np.array([0.5, 0.5]))
    assert holevo_quantity(same) == pytest.approx(0.0, abs=1e-14)
    orth = CqChannel((DensityOperator(np.diag([1.0, 0.0])), DensityOperator(np.diag([0.0, 1.0]))),
                     np.array([0.5, 0.5]))
    assert holevo_quantity(orth) == pytest.approx(1.0, abs=1e-14)


def test_channel_validation_and_json():
    with pytest.raises(ValidationError):
        CqChannel((DensityOperator(np.eye(2) / 2),), np.array([0.4]))
    ch = binary_channel()
    back = CqChannel.from_json(ch.to_json())
    assert np.allclose(back.outputs[1].matrix, ch.outputs[1].matrix)
    with pytest.raises(ValidationError):
        CqChannel.from_json({"prior": [1.0]})


def test_codebook_size_and_frequencies():
    assert codebook_size(8, 0.3) == 8
    assert codebook_size(10, 0.3) == 8
    assert codebook_size(4, 0.0) == 1
    ch = CqChannel((DensityOperator(np.diag([1.0, 0.0])), DensityOperator(np.eye(2) / 2)),
                   np.array([0.8, 0.2]))
    book = random_codebook(ch, 10, 1.0, rng_stream(3))
    assert book.entries.shape == (1024, 10)
    assert abs(np.mean(book.entries == 0) - 0.8) <= 0.01
    with pytest.raises(ResourceError):
        random_codebook(ch, 20, 1.0, rng_stream(3), caps=ResourceCaps(max_codebook=1024))


def test_audit_reference_instance():
    ch = CqChannel((DensityOperator(np.diag([0.9, 0.1])),), np.array([1.0]))
    spec = TypicalSpec(0.3, 5)
    audit = typicality_audit(ch, spec)
    assert audit.typical_rank == enumerate_typical_count([0.9, 0.1], 5, 0.3)
    assert audit.holds


def test_audit_nondegenerate_instance():
    sigma = DensityOperator(np.diag([0.9, 0.1]))
    ch = CqChannel((sigma,), np.array([1.0]))
    spec = TypicalSpec(0.35, 5)
    book = Codebook(5, 0.0, np.zeros((1, 5), dtype=int))
    audit = typicality_audit(ch, spec, book)
    assert audit.typical_rank == 6
    assert audit.typical_weight == pytest.approx(0.9 ** 5 + 5 * 0.9 ** 4 * 0.1, abs=1e-12)
    assert audit.epsilon == pytest.approx(1 - audit.typical_weight, abs=1e-12)
    assert audit.holds
    # dense cross-check of the pinched bound
    p = typical_projector(sigma, spec).matrix()
    top = np.linalg.eigvalsh(p @ tensor_power_state(sigma, 5) @ p).max()
    assert top <= 2.0 ** (-5 * (von_neumann_entropy(sigma) - 0.35))
    assert top == pytest.approx(audit.max_pinched_eigenvalue, abs=1e-14)


def _ctx_and_book(n=4, rate=0.5, delta=0.2, seed=0):
    ch = binary_channel()
    ctx = DecodeContext(ch, TypicalSpec(delta, n))
    return ctx, random_codebook(ch, n, rate, rng_stream(seed))


def test_sequential_decode_exact_matches_product():
    ctx, book = _ctx_and_book()
    for m in range(book.size):
        res = sequential_decode(ctx, book, m)
        if res.p_c_product > 0:
            assert res.p_c == pytest.approx(res.p_c_product, abs=1e-10)
        assert res.p_c >= res.corollary1_rhs - 1e-8


def test_sequential_decode_operator_margin():
    ctx, book = _ctx_and_book(n=3, rate=0.7)
    for m in range(book.size):
        assert sequential_decode(ctx, book, m, operator_check=True).operator_margin >= -1e-8


def test_sequential_decode_rejects_bad_index():
    ctx, book = _ctx_and_book()
    with pytest.raises(ValidationError):
        sequential_decode(ctx, book, book.size)


def test_sampled_decoder_frequency_matches_exact():
    ctx, book = _ctx_and_book(n=3, rate=0.4, delta=0.4)
    res = sequential_decode(ctx, book, 1)
    rng = rng_stream(77)
    hits = sum(sequential_decode(ctx, book, 1, rng=rng).detected == 1 for _ in range(3000))
    assert abs(hits / 3000 - res.p_c) <= 4 * math.sqrt(0.25 / 3000)


def test_pgm_single_codeword():
    ctx, _ = _ctx_and_book(n=3)
    book = Codebook(3, 0.0, np.array([[0, 1, 0]]))
    res = pgm_decode(ctx, book, 0)
    # one codeword: the square-root measurement is the projector onto the
    # support of the pinched codeword projector
    sigma = codeword_state(ctx.channel, book.entries[0])
    assert res.p_c <= 1 + 1e-12
    assert res.p_c >= res.bound_rhs - 1e-8
    assert res.operator_margin >= -1e-8
    assert np.real(np.trace(sigma)) == pytest.approx(1.0)


def test_pgm_orthogonal_diagonal_channel_is_perfect():
    ch = CqChannel((DensityOperator(np.diag([1.0, 0.0])), DensityOperator(np.diag([0.0, 1.0]))),
                   np.array([0.5, 0.5]))
    ctx = DecodeContext(ch, TypicalSpec(0.5, 3))
    book = Codebook(3, 1 / 3, np.array([[0, 0, 1], [1, 1, 0]]))
    for m in range(2):
        assert pgm_decode(ctx, book, m).p_c == pytest.approx(1.0, abs=1e-12)
        assert sequential_decode(ctx, book, m).p_c == pytest.approx(1.0, abs=1e-12)


def test_error_bound_forms():
    assert union_error_bound(0.0, 8, 0.3, 0.6, 0.1) == pytest.approx(4 * 2 ** (8 * (0.3 - 0.4)))
    assert sen_error_bound(0.0, 8, 0.3, 0.6, 0.1) == pytest.approx(
        2 * math.sqrt(4 * 2 ** (8 * (0.3 - 0.4))))


@pytest.mark.parametrize("eps", [0.0, 1e-6, 1e-4, 1e-3, 0.01])
@pytest.mark.parametrize("n,rate", [(50, 0.1), (100, 0.2), (200, 0.1)])
def test_union_bound_tighter_than_sen_when_meaningful(eps, n, rate):
    p = union_error_bound(eps, n, rate, 0.6, 0.05)
    if p < 1:
        assert p < sen_error_bound(eps, n, rate, 0.6, 0.05)


def test_decoding_experiment_small():
    stats = decoding_experiment(binary_channel(), 4, 0.5, 0.2, 20, seed=1, pgm=True,
                                operator_check=True)
    assert stats.trials == 20 and len(stats.rows) == 20
    assert stats.corollary1_hold_fraction == 1.0
    assert stats.pgm_hold_fraction == 1.0
    assert 0.0 <= stats.empirical_error_rate <= 1.0
    again = decoding_experiment(binary_channel(), 4, 0.5, 0.2, 20, seed=1, pgm=True,
                                operator_check=True)
    assert again.rows == stats.rows


def test_decoding_experiment_sampled_and_mode_check():
    stats = decoding_experiment(binary_channel(), 4, 0.5, 0.2, 10, seed=2, mode="sampled")
    assert stats.corollary1_hold_fraction == 1.0
    with pytest.raises(ValidationError):
        decoding_experiment(binary_channel(), 4, 0.5, 0.2, 10, seed=2, mode="bogus")
