"""Inequality checkers for sequential projective measurements.

Every checker returns a :class:`BoundReport` whose ``margin`` is positive
when the inequality holds with slack. Operator inequalities are tested
through the minimum eigenvalue of the Hermitian difference.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOL
from .errors import ShapeError, ValidationError
from .numkernel import min_eigenvalue, psd_power
from .qstate import Effect, Projector

BOUND_IDS = (
    "T1A", "T1B", "COROLLARY1", "SEN", "WILDE4TH", "LEMMA1_STEP", "LEMMA2_STEP",
    "APPENDIX_B_W", "HAYASHI_NAGAOKA", "POVM_REPEAT",
)


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


@dataclass(frozen=True)
class BoundReport:
    bound: str
    lhs: float
    rhs: float
    margin: float
    satisfied: bool
    skipped: bool = False
    meta: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "bound": self.bound,
            "lhs": _finite_or_none(self.lhs),
            "rhs": _finite_or_none(self.rhs),
            "margin": _finite_or_none(self.margin),
            "satisfied": bool(self.satisfied),
            "skipped": bool(self.skipped),
            "meta": self.meta,
        }


def make_report(bound, lhs, rhs, meta=None, tol=DEFAULT_TOL.violation):
    lhs, rhs = float(lhs), float(rhs)
    margin = lhs - rhs
    return BoundReport(bound, lhs, rhs, margin, margin >= -tol, meta=dict(meta or {}))


def skipped_report(bound, reason, meta=None):
    m = dict(meta or {})
    m["skipped"] = reason
    return BoundReport(bound, math.nan, math.nan, math.nan, True, skipped=True, meta=m)


def _chain_meta(trace):
    return {"d": trace.meta.get("d"), "N": len(trace.epsilons), "sumEps": trace.sum_eps}


# -- right-hand sides shared by the checkers and the regime comparison -------

def t1a_rhs(sum_eps):
    return 2.0 * math.sqrt(max(sum_eps, 0.0))


def t1b_rhs(sum_eps, trace_rho=1.0):
    return trace_rho - 4.0 * sum_eps


def sen_rhs(sum_eps, trace_rho=1.0):
    return trace_rho - 2.0 * math.sqrt(max(sum_eps, 0.0))


def wilde_rhs(sum_eps):
    return max(sum_eps, 0.0) ** 0.25


# -- chain bounds -------------------------------------------------------------

def check_t1a(trace, tol=DEFAULT_TOL.violation):
    """Accumulated disturbance: ``D(ρ, ρ_N) <= 2 √Σε``."""
    return make_report("T1A", t1a_rhs(trace.sum_eps), trace.trace_distance,
                       _chain_meta(trace), tol)


def check_t1b(trace, tol=DEFAULT_TOL.violation):
    """Union bound: ``tr(P_N⋯P_1 ρ P_1⋯P_N) >= 1 - 4Σε``."""
    meta = _chain_meta(trace)
    rhs = t1b_rhs(trace.sum_eps, trace.initial_trace)
    if trace.sum_eps > 0.5 and rhs < 0:
        meta["vacuous"] = True
    rep = make_report("T1B", trace.success_probability, rhs, meta, tol)
    return rep


def check_sen(trace, weight=1.0, tol=DEFAULT_TOL.violation):
    """Sen's form ``tr ρ - 2√Σ tr(P̄_i ρ)``.

    ``weight`` rescales a normalized run to ``ρ' = weight·ρ`` (``0 < weight <= 1``),
    the subnormalized case the bound allows.
    """
    if not 0 < weight <= 1:
        raise ValidationError("check_sen: weight must lie in (0, 1]")
    tr = trace.initial_trace * weight
    s = trace.sum_eps * weight
    meta = _chain_meta(trace)
    meta.update(traceRho=tr, t1bRhs=t1b_rhs(s, tr))
    return make_report("SEN", trace.success_probability * weight, sen_rhs(s, tr), meta, tol)


def check_wilde4th(trace, forward_trace=None, tol=DEFAULT_TOL.violation):
    """Back-and-forth distance against ``(Σε)^{1/4}``.

    ``trace`` must come from :func:`~qubound.seqchain.run_back_and_forth`. If the
    forward-only run is supplied its T1A margin is attached for comparison.
    """
    if trace.order is None:
        raise ValidationError("check_wilde4th expects a back-and-forth trace")
    meta = _chain_meta(trace)
    meta["t1aRhs"] = t1a_rhs(trace.sum_eps)
    if forward_trace is not None:
        meta["forwardDistance"] = forward_trace.trace_distance
        meta["t1aMargin"] = t1a_rhs(forward_trace.sum_eps) - forward_trace.trace_distance
    return make_report("WILDE4TH", wilde_rhs(trace.sum_eps), trace.trace_distance, meta, tol)


def check_lemma1(trace, tol=1e-8):
    """Per step: ``sin²β_i <= sin²β_{i-1} + sin²α_i`` (with ``β_0 = 0``)."""
    _require_angles(trace)
    out = []
    beta_prev = 0.0
    for i, (a, b) in enumerate(zip(trace.alphas, trace.betas)):
        lhs = math.sin(beta_prev) ** 2 + math.sin(a) ** 2
        out.append(make_report("LEMMA1_STEP", lhs, math.sin(b) ** 2, {"step": i + 1}, tol))
        beta_prev = b
    return out


def _require_angles(trace):
    if not trace.has_angles:
        raise ValidationError("angle-based checks need a pure-state trace with angles")


# -- per-step recursion and the minimizer machinery ------------------------

@dataclass(frozen=True)
class AngleVector:
    """Angles of one pure chain, 1-indexed as ``alphas[0] = α_1``.

    ``betas`` holds ``β_1 … β_N`` (``β_0 = 0`` is implied) and ``thetas``
    holds ``θ_1 … θ_N``; either may be omitted for purely trigonometric use.
    """

    alphas: tuple
    betas: tuple = None
    thetas: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if self.betas is not None:
            object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if self.thetas is not None:
            object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        if not self.alphas:
            raise ValidationError("AngleVector: needs at least one alpha")

    @classmethod
    def from_trace(cls, trace):
        _require_angles(trace)
        return cls(trace.alphas, trace.betas, trace.thetas)

    @property
    def n(self):
        return len(self.alphas)

    @property
    def sin2(self):
        return np.sin(np.asarray(self.alphas)) ** 2

    @property
    def sum_sin2(self):
        return float(np.sum(self.sin2))

    def beta(self, k):
        if k == 0:
            return 0.0
        if self.betas is None:
            raise ValidationError("AngleVector: betas are required here")
        return self.betas[k - 1]

    def within_lemma_domain(self):
        return self.sum_sin2 <= 0.5 + DEFAULT_TOL.atol


def _tail(s2, lo, hi):
    """``Σ_{i=lo}^{hi} sin²α_i`` with 1-based inclusive limits; empty sum is 0."""
    if hi < lo:
        return 0.0
    return float(np.sum(s2[lo - 1:hi]))


def lemma2_a(k, angles, beta=None):
    """The auxiliary sequence ``a_k`` for ``0 <= k <= N-1``.

    ``a_{N-1}`` reduces to ``cos(β_{N-1} + α_N)`` and ``a_k = cos β_k`` when
    every α vanishes. ``beta`` overrides ``β_k``.
    """
    n = angles.n
    if not 0 <= k <= n - 1:
        raise IndexError(f"lemma2_a: k={k} outside 0..{n - 1}")
    s2 = angles.sin2
    b = angles.beta(k) if beta is None else beta
    full = _tail(s2, k + 1, n)
    part = _tail(s2, k + 1, n - 1)
    num = math.cos(angles.alphas[-1]) * math.cos(b) - math.sqrt(full) * math.sqrt(
        math.sin(b) ** 2 + part)
    return num / (1.0 + part)


def check_lemma2(trace, tol=1e-8):
    """``cos θ_k · a_k >= a_{k-1}`` for ``k = 1 … N-1`` plus the chained product.

    The last report compares ``Π cos θ_i`` with ``a_0``. Chains with
    ``Σε > 1/2`` fall outside the lemma and are skipped.
    """
    angles = AngleVector.from_trace(trace)
    if not angles.within_lemma_domain():
        return [skipped_report("LEMMA2_STEP", "sumEps > 1/2", {"sumEps": angles.sum_sin2})]
    n = angles.n
    a = [lemma2_a(k, angles) for k in range(n)]
    out = []
    for k in range(1, n):
        out.append(make_report("LEMMA2_STEP", math.cos(angles.thetas[k - 1]) * a[k], a[k - 1],
                               {"step": k}, tol))
    prod = float(np.prod(np.cos(angles.thetas)))
    out.append(make_report("LEMMA2_STEP", prod, a[0], {"step": "product"}, tol))
    return out


def lemma2_g(x, k, angles, beta_prev=None):
    """Lower envelope ``g(x)`` of ``cos θ_k · a_k`` with ``x = sin θ_k``.

    Returns NaN where the radicand is negative (outside the reachable domain).
    """
    n = angles.n
    s2 = angles.sin2
    b = angles.beta(k - 1) if beta_prev is None else beta_prev
    sa_k = math.sin(angles.alphas[k - 1])
    ca_n = math.cos(angles.alphas[-1])
    full_next = _tail(s2, k + 1, n)
    part_next = _tail(s2, k + 1, n - 1)
    part_here = _tail(s2, k, n - 1)
    x = np.asarray(x, dtype=float)
    rad = (-(1.0 + part_here) * x ** 2 + 2.0 * x * math.cos(b) * sa_k
           + part_next + math.sin(b) ** 2)
    root = np.sqrt(np.where(rad >= 0, rad, np.nan))
    return (ca_n * math.cos(b) - x * ca_n * sa_k - math.sqrt(full_next) * root) / (1.0 + part_next)


def lemma2_minimizer(k, angles, beta_prev=None):
    """Closed-form stationary point ``x*`` of ``g``; NaN when all relevant α vanish."""
    n = angles.n
    s2 = angles.sin2
    b = angles.beta(k - 1) if beta_prev is None else beta_prev
    sa_k = math.sin(angles.alphas[k - 1])
    ca_n = math.cos(angles.alphas[-1])
    full_here = _tail(s2, k, n)
    part_here = _tail(s2, k, n - 1)
    if full_here == 0.0:
        return math.nan
    num = (math.cos(b) * sa_k * full_here
           + sa_k * ca_n * math.sqrt(full_here) * math.sqrt(math.sin(b) ** 2 + part_here))
    return num / ((1.0 + part_here) * full_here)


@dataclass(frozen=True)
class MinimizerScan:
    k: int
    grid_min: float
    grid_argmin: float
    x_star: float
    g_x_star: float
    a_prev: float
    x_star_in_range: bool
    grid_step: float

    @property
    def grid_margin(self):
        return self.grid_min - self.a_prev

    @property
    def closed_form_residual(self):
        return abs(self.g_x_star - self.a_prev) if self.x_star_in_range else math.nan


def lemma2_minimizer_scan(k, angles, grid_size=10_000, beta_prev=None):
    """Evaluate ``g`` on a uniform grid of ``[0, 1]`` and compare with ``a_{k-1}``.

    ``beta_prev`` overrides ``β_{k-1}`` so the scan can run on abstract angle
    vectors. When ``x* > 1`` the scan only records it.
    """
    n = angles.n
    if not 1 <= k <= n - 1:
        raise IndexError(f"lemma2_minimizer_scan: k={k} outside 1..{n - 1}")
    b = angles.beta(k - 1) if beta_prev is None else beta_prev
    xs = np.linspace(0.0, 1.0, grid_size)
    g = lemma2_g(xs, k, angles, b)
    valid = np.isfinite(g)
    i = int(np.argmin(np.where(valid, g, np.inf)))
    x_star = lemma2_minimizer(k, angles, b)
    in_range = math.isfinite(x_star) and 0.0 <= x_star <= 1.0
    g_star = float(lemma2_g(x_star, k, angles, b)) if in_range else math.nan
    a_prev = lemma2_a(k - 1, angles, b)
    return MinimizerScan(k, float(g[i]), float(xs[i]), x_star, g_star, a_prev, in_range,
                         1.0 / (grid_size - 1))


def appendix_b_w(alphas):
    s2 = np.sin(np.asarray(alphas, dtype=float)) ** 2
    total = float(np.sum(s2))
    part = float(np.sum(s2[:-1]))
    return math.cos(alphas[-1]) - math.sqrt(total * part) - (1.0 - total)


def appendix_b_w_rewrite(alphas):
    """``W`` as the difference of two fractions; 0 when every α vanishes."""
    s2 = np.sin(np.asarray(alphas, dtype=float)) ** 2
    total = float(np.sum(s2))
    last = float(s2[-1])
    if total == 0.0:
        return 0.0
    return last / (1 + math.sqrt(max(0.0, 1 - last / total))) - last / (1 + math.sqrt(1 - last))


def check_appendix_b_w(alphas, tol=1e-10):
    """``W >= 0`` whenever ``Σ sin²α <= 1/2``."""
    alphas = tuple(float(a) for a in alphas)
    total = float(np.sum(np.sin(alphas) ** 2))
    if total > 0.5 + DEFAULT_TOL.atol:
        return skipped_report("APPENDIX_B_W", "sum sin^2 alpha > 1/2", {"sumSin2": total})
    w = appendix_b_w(alphas)
    meta = {"N": len(alphas), "sumSin2": total,
            "rewriteResidual": abs(w - appendix_b_w_rewrite(alphas))}
    return make_report("APPENDIX_B_W", w, 0.0, meta, tol)


# -- operator inequalities ----------------------------------------------------

def _stack(projectors):
    mats = [p.matrix if isinstance(p, Projector) else np.asarray(p) for p in projectors]
    d = mats[0].shape[0]
    if any(m.shape != (d, d) for m in mats):
        raise ShapeError("all projectors must share one dimension")
    return mats, d


def chain_operator(projectors):
    """``P_1⋯P_N⋯P_1`` built as ``A†A`` with ``A = P_N⋯P_1``."""
    mats, d = _stack(projectors)
    a = np.eye(d, dtype=complex)
    for m in mats:
        a = m @ a
    return a.conj().T @ a


def check_corollary1(projectors, tol=DEFAULT_TOL.violation):
    """``P_1⋯P_N⋯P_1 - I + 4ΣP̄_i ⪰ 0`` via its minimum eigenvalue."""
    mats, d = _stack(projectors)
    eye = np.eye(d)
    diff = chain_operator(projectors) - eye + 4 * sum(eye - m for m in mats)
    return make_report("COROLLARY1", min_eigenvalue(diff), 0.0, {"d": d, "N": len(mats)}, tol)


def corollary1_on_vector(projectors, nu):
    """``<ν|P_1⋯P_N⋯P_1|ν> / <ν|ν>``, the operator side read on one state."""
    nu = np.asarray(nu, dtype=complex)
    return float(np.real(np.vdot(nu, chain_operator(projectors) @ nu)) / np.real(np.vdot(nu, nu)))


def check_hayashi_nagaoka(s, t, tol=1e-8):
    """``(S+T)^{-1/2} S (S+T)^{-1/2} ⪰ I - 2(I-S) - 4T``.

    The inverse square root is taken on the support of ``S + T``.
    """
    s_m = s.matrix if isinstance(s, Effect) else Effect(s).matrix
    t_m = np.asarray(t, dtype=complex)
    if t_m.shape != s_m.shape:
        raise ShapeError("check_hayashi_nagaoka: S and T differ in shape")
    if min_eigenvalue(t_m) < -DEFAULT_TOL.atol:
        raise ValidationError("check_hayashi_nagaoka: T must be positive semidefinite")
    d = s_m.shape[0]
    eye = np.eye(d)
    r = psd_power(s_m + t_m, -0.5)
    diff = r @ s_m @ r - eye + 2 * (eye - s_m) + 4 * t_m
    return make_report("HAYASHI_NAGAOKA", min_eigenvalue(diff, atol=1e-7), 0.0, {"d": d}, tol)


def check_povm_repeat(e, rho, m, tol=DEFAULT_TOL.violation):
    """``tr(E^m ρ) >= 1 - m ε`` with ``ε = 1 - tr(Eρ)``."""
    if m < 1:
        raise ValidationError("check_povm_repeat: m must be >= 1")
    w, v = np.linalg.eigh(e.matrix)
    w = np.clip(w, 0.0, 1.0)
    em = (v * w ** m) @ v.conj().T
    eps = 1.0 - float(np.real(np.trace(e.matrix @ rho.matrix)))
    lhs = float(np.real(np.trace(em @ rho.matrix)))
    return make_report("POVM_REPEAT", lhs, 1.0 - m * eps, {"d": e.dim, "m": m, "eps": eps}, tol)


def sen_crossover(grid_size=10_001, upper=1.0):
    """Smallest positive grid point at which the new union bound stops beating Sen's.

    Both right-hand sides are evaluated through :func:`t1b_rhs` and
    :func:`sen_rhs` on a uniform grid of ``(0, upper]``.
    """
    xs = np.linspace(0.0, upper, grid_size)[1:]
    for x in xs:
        if t1b_rhs(x) <= sen_rhs(x):
            return float(x), upper / (grid_size - 1)
    return math.nan, upper / (grid_size - 1)
