"""Classical-quantum channel coding with a sequential projective decoder.

Typical projectors are stored as an index set over a product eigenbasis,
never as an explicit list of matrices; the dense form is materialized only
on request.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_CAPS, DEFAULT_TOL
from .errors import ResourceError, ValidationError
from .numkernel import hermitian_eig, matrix_from_json, matrix_to_json, min_eigenvalue, psd_power
from .qstate import DensityOperator, rng_stream, von_neumann_entropy


@dataclass(frozen=True, eq=False)
class CqChannel:
    outputs: tuple
    prior: np.ndarray

    def __post_init__(self):
        outs = tuple(o if isinstance(o, DensityOperator) else DensityOperator(o) for o in self.outputs)
        if not outs:
            raise ValidationError("CqChannel: needs at least one output")
        d = outs[0].dim
        if any(o.dim != d for o in outs):
            raise ValidationError("CqChannel: outputs must share one dimension")
        p = np.asarray(self.prior, dtype=float)
        if p.shape != (len(outs),):
            raise ValidationError("CqChannel: prior length must equal the alphabet size")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValidationError("CqChannel: prior must be non-negative and sum to 1")
        object.__setattr__(self, "outputs", outs)
        object.__setattr__(self, "prior", p)

    @property
    def alphabet_size(self):
        return len(self.outputs)

    @property
    def dim(self):
        return self.outputs[0].dim

    def average(self):
        return DensityOperator(sum(p * o.matrix for p, o in zip(self.prior, self.outputs)))

    def to_json(self):
        return {"prior": self.prior.tolist(), "outputs": [matrix_to_json(o.matrix) for o in self.outputs]}

    @classmethod
    def from_json(cls, obj):
        try:
            return cls(tuple(DensityOperator(matrix_from_json(m)) for m in obj["outputs"]),
                       np.asarray(obj["prior"], dtype=float))
        except KeyError as exc:
            raise ValidationError(f"channel JSON missing key {exc}") from None


def holevo_quantity(ch):
    """``S(Σ p_j σ_j) - Σ p_j S(σ_j)`` in bits."""
    avg = von_neumann_entropy(ch.average())
    cond = sum(p * von_neumann_entropy(o) for p, o in zip(ch.prior, ch.outputs))
    return max(0.0, avg - cond)


@dataclass(frozen=True, eq=False)
class Codebook:
    n: int
    rate: float
    entries: np.ndarray  # (M, n) symbols

    @property
    def size(self):
        return self.entries.shape[0]

    @property
    def effective_rate(self):
        return math.log2(self.size) / self.n


def codebook_size(n, rate):
    return 2 ** max(0, math.ceil(n * rate - 1e-12))


def random_codebook(ch, n, rate, rng, caps=DEFAULT_CAPS):
    """``2^ceil(nR)`` codewords with i.i.d. symbols drawn from the prior."""
    if n < 1:
        raise ValidationError("random_codebook: n must be >= 1")
    m = codebook_size(n, rate)
    if m > caps.max_codebook:
        raise ResourceError(f"codebook size {m} exceeds cap {caps.max_codebook}")
    rng = rng if isinstance(rng, np.random.Generator) else rng_stream(rng)
    entries = rng.choice(ch.alphabet_size, size=(m, n), p=ch.prior)
    return Codebook(n, float(rate), np.asarray(entries, dtype=int))


@dataclass(frozen=True)
class TypicalSpec:
    delta: float
    n: int

    def __post_init__(self):
        if not self.delta > 0:
            raise ValidationError("TypicalSpec: delta must be > 0")
        if self.n < 1:
            raise ValidationError("TypicalSpec: n must be >= 1")


def _check_dim(d, n, caps):
    if d ** n > caps.max_dim:
        raise ResourceError(f"Hilbert dimension {d}^{n} = {d ** n} exceeds cap {caps.max_dim}")


@dataclass(frozen=True, eq=False)
class TypicalProjector:
    """Projector spanned by selected product eigenvectors.

    ``factors[k]`` is the eigenbasis used at tensor position ``k`` and
    ``strings`` the selected eigen-index sequences (one row per basis
    vector). ``log_weights`` holds ``Σ_k log2 λ_{x_k}`` for each selected row
    under the operator the projector was built from.
    """

    factors: tuple
    strings: np.ndarray
    log_weights: np.ndarray
    target: float  # entropy rate the window is centred on
    delta: float
    _iso: list = field(default_factory=list, repr=False)

    @property
    def n(self):
        return len(self.factors)

    @property
    def dim(self):
        return int(np.prod([f.shape[0] for f in self.factors]))

    @property
    def rank(self):
        return int(self.strings.shape[0])

    def isometry(self):
        """``d^n × rank`` matrix whose orthonormal columns span the projector."""
        if not self._iso:
            r = self.rank
            cols = np.ones((1, r), dtype=complex)
            for k, f in enumerate(self.factors):
                pick = f[:, self.strings[:, k]] if r else np.zeros((f.shape[0], 0), complex)
                cols = np.einsum("ar,br->abr", cols, pick).reshape(cols.shape[0] * f.shape[0], r)
            self._iso.append(cols)
        return self._iso[0]

    def matrix(self):
        w = self.isometry()
        return w @ w.conj().T


def _enumerate_typical(spectra, target, delta, slack):
    """Eigen-index strings whose mean surprisal is within ``delta`` of ``target``."""
    n = len(spectra)
    with np.errstate(divide="ignore"):
        logs = [np.log2(np.clip(s, 0.0, None)) for s in spectra]
    sizes = [len(s) for s in spectra]
    grids = np.indices(sizes).reshape(n, -1).T
    total = np.zeros(grids.shape[0])
    for k in range(n):
        total = total + logs[k][grids[:, k]]
    surprisal = -total / n
    keep = np.isfinite(surprisal) & (np.abs(surprisal - target) <= delta + slack)
    return grids[keep], total[keep]


def typical_projector(sigma, spec, caps=DEFAULT_CAPS, tol=DEFAULT_TOL):
    """δ-typical projector of ``σ^{⊗n}`` (entropy-window typicality)."""
    _check_dim(sigma.dim, spec.n, caps)
    w, v = hermitian_eig(sigma.matrix)
    w = np.clip(w, 0.0, None)
    s = von_neumann_entropy(sigma)
    strings, logs = _enumerate_typical([w] * spec.n, s, spec.delta, tol.typicality_slack)
    return TypicalProjector((v,) * spec.n, strings, logs, s, spec.delta)


class _SymbolBases:
    """Eigendecomposition and entropy per channel output, computed once."""

    def __init__(self, ch):
        self.values, self.vectors, self.entropies = [], [], []
        for o in ch.outputs:
            w, v = hermitian_eig(o.matrix)
            self.values.append(np.clip(w, 0.0, None))
            self.vectors.append(v)
            self.entropies.append(von_neumann_entropy(o))


def conditional_typical_projector(ch, codeword, spec, caps=DEFAULT_CAPS, tol=DEFAULT_TOL,
                                  _bases=None):
    """δ-typical projector of ``σ_{c_1} ⊗ … ⊗ σ_{c_n}``."""
    codeword = [int(c) for c in codeword]
    if len(codeword) != spec.n:
        raise ValidationError("conditional_typical_projector: codeword length != n")
    _check_dim(ch.dim, spec.n, caps)
    b = _bases or _SymbolBases(ch)
    target = sum(b.entropies[c] for c in codeword) / spec.n
    strings, logs = _enumerate_typical([b.values[c] for c in codeword], target, spec.delta,
                                       tol.typicality_slack)
    return TypicalProjector(tuple(b.vectors[c] for c in codeword), strings, logs, target, spec.delta)


def tensor_power_state(sigma, n):
    out = np.ones((1, 1), dtype=complex)
    for _ in range(n):
        out = np.kron(out, sigma.matrix)
    return out


def codeword_state(ch, codeword):
    out = np.ones((1, 1), dtype=complex)
    for c in codeword:
        out = np.kron(out, ch.outputs[int(c)].matrix)
    return out


def _proj_expect(proj, state):
    """``tr(P X)`` for a typical projector and a dense operator."""
    w = proj.isometry()
    return float(np.real(np.trace(w.conj().T @ state @ w)))


@dataclass
class TypicalityAudit:
    n: int
    delta: float
    entropy: float
    mean_conditional_entropy: float
    typical_rank: int
    typical_weight: float  # tr(P σ^{⊗n})
    conditional_weights: list  # tr(P_c σ_c) per audited codeword
    conditional_ranks: list
    rank_bound: float  # 2^{n[Σ p_j S(σ_j) + δ]}
    rank_bound_ok: list
    max_pinched_eigenvalue: float
    pinched_bound: float  # 2^{-n[S(σ) - δ]}
    pinched_ok: bool
    epsilon: float

    @property
    def holds(self):
        return (self.typical_weight >= 1 - self.epsilon - 1e-12
                and all(w >= 1 - self.epsilon - 1e-12 for w in self.conditional_weights)
                and all(self.rank_bound_ok) and self.pinched_ok)

    def to_json(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {"holds": self.holds}


def typicality_audit(ch, spec, codebook=None, caps=DEFAULT_CAPS, tol=DEFAULT_TOL):
    """Measure the four typicality properties the error analysis relies on.

    ``epsilon`` is the smallest value for which both weight properties hold
    on the audited codewords. The pinched-state bound is checked per retained
    eigenvalue in the log domain, which is how the projector was selected.
    """
    sigma = ch.average()
    p = typical_projector(sigma, spec, caps, tol)
    weight = float(np.sum(np.exp2(p.log_weights))) if p.rank else 0.0
    s = von_neumann_entropy(sigma)
    bases = _SymbolBases(ch)
    mean_cond = float(sum(pj * sj for pj, sj in zip(ch.prior, bases.entropies)))
    rank_bound = 2.0 ** (spec.n * (mean_cond + spec.delta))
    cond_weights, cond_ranks, rank_ok = [], [], []
    words = codebook.entries if codebook is not None else np.zeros((0, spec.n), dtype=int)
    for word in _unique_rows(words):
        pc = conditional_typical_projector(ch, word, spec, caps, tol, bases)
        cond_weights.append(float(np.sum(np.exp2(pc.log_weights))) if pc.rank else 0.0)
        cond_ranks.append(pc.rank)
        rank_ok.append(pc.rank <= rank_bound)
    exponent = -spec.n * (s - spec.delta)
    if p.rank:
        max_log = float(np.max(p.log_weights))
        pinched_ok = bool(np.all(p.log_weights <= exponent + spec.n * tol.typicality_slack))
    else:
        max_log, pinched_ok = -math.inf, True
    eps = max([1.0 - weight] + [1.0 - w for w in cond_weights])
    return TypicalityAudit(
        n=spec.n, delta=spec.delta, entropy=s, mean_conditional_entropy=mean_cond,
        typical_rank=p.rank, typical_weight=weight, conditional_weights=cond_weights,
        conditional_ranks=cond_ranks, rank_bound=rank_bound, rank_bound_ok=rank_ok,
        max_pinched_eigenvalue=float(2.0 ** max_log), pinched_bound=float(2.0 ** exponent),
        pinched_ok=pinched_ok, epsilon=float(max(0.0, eps)),
    )


def _unique_rows(a):
    seen, out = set(), []
    for row in a:
        key = tuple(int(x) for x in row)
        if key not in seen:
            seen.add(key)
            out.append(key)
    return out


# -- decoders -----------------------------------------------------------------

class _LowRankProjector:
    """Apply ``P`` or ``I - P`` for ``P = W W†`` to dense operators."""

    def __init__(self, tp):
        self.w = tp.isometry()

    def sandwich(self, x, complement=False):
        w = self.w
        if not complement:
            return w @ (w.conj().T @ x @ w) @ w.conj().T
        xw = x @ w
        wx = w.conj().T @ x
        return x - w @ wx - xw @ w.conj().T + w @ (wx @ w) @ w.conj().T

    def dense(self):
        return self.w @ self.w.conj().T


@dataclass
class DecodeContext:
    """Per-channel data shared by every trial at one ``(n, delta)``."""

    channel: CqChannel
    spec: TypicalSpec
    caps: object = DEFAULT_CAPS
    tol: object = DEFAULT_TOL

    def __post_init__(self):
        self.bases = _SymbolBases(self.channel)
        self.typical = typical_projector(self.channel.average(), self.spec, self.caps, self.tol)
        self.p = _LowRankProjector(self.typical)
        self._cond = {}

    def conditional(self, word):
        key = tuple(int(c) for c in word)
        if key not in self._cond:
            tp = conditional_typical_projector(self.channel, key, self.spec, self.caps, self.tol,
                                               self.bases)
            self._cond[key] = (tp, _LowRankProjector(tp))
        return self._cond[key]


@dataclass
class SequentialResult:
    detected: object  # codeword index or None (sampled mode only)
    p_c: float  # exact probability of decoding the transmitted index
    p_c_product: float  # same, as a product of step-conditional probabilities
    corollary1_rhs: float
    operator_margin: float = math.nan  # min eig of Λ^s minus its operator lower bound


def sequential_decode(ctx, codebook, transmitted, rng=None, operator_check=False):
    """Typical-subspace test followed by "is it codeword i?" tests in order.

    ``p_c`` is ``tr(P_{c_m} P̄_{c_{m-1}}⋯P̄_{c_1} P σ P P̄_{c_1}⋯P_{c_m})`` and is
    always computed. With ``rng`` the full decoder is also sampled outcome by
    outcome and ``detected`` is the first index answered "yes".
    """
    m = int(transmitted)
    if not 0 <= m < codebook.size:
        raise ValidationError(f"transmitted index {m} outside codebook of size {codebook.size}")
    floor = ctx.tol.prob_floor
    sigma = codeword_state(ctx.channel, codebook.entries[m])
    x = ctx.p.sandwich(sigma)  # P σ P, unnormalized
    t_p = float(np.real(np.trace(x)))

    # operator-product form: carry the unnormalized sandwich through every test
    y = x
    corr_rhs = t_p
    for i in range(m):
        tp_i, lp_i = ctx.conditional(codebook.entries[i])
        corr_rhs -= 4.0 * _proj_expect(tp_i, x)
        y = lp_i.sandwich(y, complement=True)
    tp_m, lp_m = ctx.conditional(codebook.entries[m])
    corr_rhs -= 4.0 * (t_p - _proj_expect(tp_m, x))
    p_c = float(np.real(np.trace(lp_m.sandwich(y))))

    # step-conditional form
    p_prod = 0.0
    state, prob = sigma, 1.0
    ok = True
    for step, (proj, comp) in enumerate(
            [(ctx.p, False)] + [(ctx.conditional(codebook.entries[i])[1], True) for i in range(m)]
            + [(lp_m, False)]):
        nxt = proj.sandwich(state, complement=comp)
        q = float(np.real(np.trace(nxt)))
        if q <= floor:
            ok = False
            break
        prob *= q
        state = nxt / q
    if ok:
        p_prod = prob

    detected = None
    if rng is not None:
        detected = _sample_decoder(ctx, codebook, sigma, rng)

    margin = math.nan
    if operator_check:
        margin = sequential_operator_margin(ctx, codebook, m)
    return SequentialResult(detected, max(p_c, 0.0), p_prod, corr_rhs, margin)


def _sample_decoder(ctx, codebook, sigma, rng):
    floor = ctx.tol.prob_floor
    state = sigma
    nxt = ctx.p.sandwich(state)
    q = float(np.real(np.trace(nxt)))
    if q <= floor or rng.random() >= q:
        return None
    state = nxt / q
    for i in range(codebook.size):
        _, lp = ctx.conditional(codebook.entries[i])
        yes = lp.sandwich(state)
        if rng.random() < float(np.real(np.trace(yes))):
            return i
        no = lp.sandwich(state, complement=True)
        qn = float(np.real(np.trace(no)))
        if qn <= floor:
            return None
        state = no / qn
    return None


def sequential_operator_margin(ctx, codebook, m):
    """Min eigenvalue of ``Λ^s - (P - 4PP̄_{c_m}P - 4Σ_{i<m} P P_{c_i} P)``."""
    p = ctx.p.dense()
    d = p.shape[0]
    eye = np.eye(d)
    b = p.copy()
    lower = p.copy()
    for i in range(m):
        pi = ctx.conditional(codebook.entries[i])[1].dense()
        b = (eye - pi) @ b
        lower -= 4.0 * p @ pi @ p
    pm = ctx.conditional(codebook.entries[m])[1].dense()
    b = pm @ b
    lam = b.conj().T @ b
    lower -= 4.0 * p @ (eye - pm) @ p
    return min_eigenvalue(lam - lower, atol=1e-7)


@dataclass
class PgmResult:
    p_c: float
    bound_rhs: float  # tr((P - 2PP̄_{c_m}P - 4Σ_{i≠m} P P_{c_i} P) σ)
    operator_margin: float


def pgm_decode(ctx, codebook, transmitted):
    """Square-root measurement on the pinched codeword projectors."""
    m = int(transmitted)
    p = ctx.p.dense()
    pinched = [p @ ctx.conditional(word)[1].dense() @ p for word in codebook.entries]
    total = sum(pinched)
    r = psd_power(total, -0.5)
    lam = r @ pinched[m] @ r
    sigma = codeword_state(ctx.channel, codebook.entries[m])
    lower = p - 2.0 * (p - pinched[m]) - 4.0 * (total - pinched[m])
    return PgmResult(
        p_c=float(np.real(np.trace(lam @ sigma))),
        bound_rhs=float(np.real(np.trace(lower @ sigma))),
        operator_margin=min_eigenvalue(lam - lower, atol=1e-7),
    )


# -- experiment ---------------------------------------------------------------

def union_error_bound(eps, n, rate, chi, delta):
    """``33ε + 4·2^{n[R - (χ - 2δ)]}``."""
    return 33.0 * eps + 4.0 * 2.0 ** (n * (rate - (chi - 2.0 * delta)))


def sen_error_bound(eps, n, rate, chi, delta):
    """Sen's form ``2√(4·2^{n[R - (χ - 2δ)]} + 13√ε)``."""
    return 2.0 * math.sqrt(4.0 * 2.0 ** (n * (rate - (chi - 2.0 * delta))) + 13.0 * math.sqrt(eps))


CSV_COLUMNS = ("trial", "n", "rate", "delta", "success", "p_c_exact", "corollary1_rhs",
               "paper_bound_rhs", "sen_bound_rhs")


@dataclass
class DecodeStats:
    trials: int
    successes: int
    empirical_error_rate: float
    standard_error: float
    mean_p_c: float
    holevo: float
    epsilon: float
    bound_rhs_union: float
    bound_rhs_sen: float
    effective_rate: float
    per_trial_bound_rhs: list
    corollary1_hold_fraction: float
    corollary1_tight_fraction: float
    pgm_hold_fraction: float = math.nan
    mean_pgm_p_c: float = math.nan
    rows: list = field(default_factory=list, repr=False)

    def summary_json(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__
               if k not in ("rows", "per_trial_bound_rhs")}
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                for k, v in out.items()}


def decoding_experiment(ch, n, rate, delta, trials, seed, mode="exact", pgm=False,
                        operator_check=False, caps=DEFAULT_CAPS, tol=DEFAULT_TOL,
                        bound_tol=1e-8):
    """Monte Carlo over random codebooks and transmitted messages.

    In ``exact`` mode each trial's outcome is a Bernoulli draw with the exact
    ``p_c``; in ``sampled`` mode the decoder itself is simulated test by test.
    The bound right-hand sides use the codebook's effective rate
    ``log2(M)/n`` and the largest typicality deficit measured over all
    codebooks in the run.
    """
    if mode not in ("exact", "sampled"):
        raise ValidationError(f"mode must be 'exact' or 'sampled', not {mode!r}")
    spec = TypicalSpec(delta, n)
    _check_dim(ch.dim, n, caps)
    ctx = DecodeContext(ch, spec, caps, tol)
    chi = holevo_quantity(ch)
    eff_rate = math.log2(codebook_size(n, rate)) / n

    results = []
    for t in range(trials):
        rng = rng_stream(seed, t)
        book = random_codebook(ch, n, rate, rng, caps)
        m = int(rng.integers(book.size))
        audit = typicality_audit(ch, spec, book, caps, tol)
        res = sequential_decode(ctx, book, m, rng if mode == "sampled" else None, operator_check)
        if mode == "sampled":
            success = res.detected == m
        else:
            success = bool(rng.random() < res.p_c)
        pg = pgm_decode(ctx, book, m) if pgm else None
        results.append((t, success, res, audit.epsilon, pg))

    eps = max((r[3] for r in results), default=0.0)
    union = union_error_bound(eps, n, eff_rate, chi, delta)
    sen = sen_error_bound(eps, n, eff_rate, chi, delta)
    rows = []
    held = tight = pgm_held = 0
    for t, success, res, e_t, pg in results:
        rows.append({
            "trial": t, "n": n, "rate": rate, "delta": delta, "success": int(success),
            "p_c_exact": res.p_c, "corollary1_rhs": res.corollary1_rhs,
            "paper_bound_rhs": union_error_bound(e_t, n, eff_rate, chi, delta),
            "sen_bound_rhs": sen_error_bound(e_t, n, eff_rate, chi, delta),
        })
        ok = res.p_c - res.corollary1_rhs >= -bound_tol
        if operator_check:
            ok = ok and res.operator_margin >= -bound_tol
        held += ok
        tight += (res.p_c - res.corollary1_rhs) <= 0.01
        if pg is not None:
            pgm_held += (pg.p_c - pg.bound_rhs >= -bound_tol) and pg.operator_margin >= -bound_tol
    successes = sum(int(r[1]) for r in results)
    rate_hat = 1.0 - successes / trials if trials else math.nan
    se = math.sqrt(rate_hat * (1 - rate_hat) / trials) if trials else math.nan
    return DecodeStats(
        trials=trials, successes=successes, empirical_error_rate=rate_hat, standard_error=se,
        mean_p_c=float(np.mean([r[2].p_c for r in results])) if results else math.nan,
        holevo=chi, epsilon=eps, bound_rhs_union=union, bound_rhs_sen=sen,
        effective_rate=eff_rate,
        per_trial_bound_rhs=[r["corollary1_rhs"] for r in rows],
        corollary1_hold_fraction=held / trials if trials else math.nan,
        corollary1_tight_fraction=tight / trials if trials else math.nan,
        pgm_hold_fraction=pgm_held / trials if (pgm and trials) else math.nan,
        mean_pgm_p_c=float(np.mean([r[4].p_c for r in results])) if (pgm and results) else math.nan,
        rows=rows,
    )

