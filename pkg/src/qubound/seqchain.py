"""Run a chain of projective measurements and extract its angle geometry.

Only the branch in which every measurement returns its ``P_i`` outcome is
simulated. For a pure initial state the run is also described by four angle
sequences: ``theta`` (previous to current chain state), ``alpha`` (initial
state to its direct projection), ``beta`` (initial state to current chain
state) and ``gamma`` (current chain state to the direct projection).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import DEFAULT_TOL
from .errors import ShapeError, ValidationError, VanishingBranchError
from .numkernel import trace_norm
from .qstate import DensityOperator, Projector, PureState, lift_projector, purify


@dataclass(frozen=True)
class MeasurementChain:
    projectors: tuple
    initial: object  # PureState or DensityOperator

    def __post_init__(self):
        ps = tuple(self.projectors)
        if not ps:
            raise ValidationError("MeasurementChain: needs at least one projector")
        if not isinstance(self.initial, (PureState, DensityOperator)):
            raise ValidationError("MeasurementChain: initial must be a PureState or DensityOperator")
        for i, p in enumerate(ps):
            if not isinstance(p, Projector):
                raise ValidationError(f"MeasurementChain: element {i} is not a Projector")
            if p.dim != self.initial.dim:
                raise ShapeError(
                    f"MeasurementChain: projector {i} has dim {p.dim}, state has {self.initial.dim}")
        object.__setattr__(self, "projectors", ps)

    @property
    def dim(self):
        return self.initial.dim

    @property
    def is_pure(self):
        return isinstance(self.initial, PureState)

    def purified(self):
        """Equivalent pure chain on reference ⊗ system with ``I ⊗ P_i``."""
        if self.is_pure:
            return self
        psi = purify(self.initial)
        d = self.dim
        return MeasurementChain(tuple(lift_projector(p, d) for p in self.projectors), psi)


@dataclass(frozen=True)
class ChainTrace:
    step_probabilities: tuple
    epsilons: tuple
    final_state: np.ndarray  # density matrix of the final state
    success_probability: float
    success_direct: float
    trace_distance: float
    initial_trace: float = 1.0
    thetas: tuple = None
    alphas: tuple = None
    betas: tuple = None
    gammas: tuple = None
    intermediate_states: tuple = None
    order: tuple = None  # projector indices actually applied, when not 0..N-1
    meta: dict = field(default_factory=dict)

    @property
    def n_steps(self):
        return len(self.step_probabilities)

    @property
    def sum_eps(self):
        return float(sum(self.epsilons))

    @property
    def has_angles(self):
        return self.thetas is not None

    def to_json(self):
        out = {
            "stepProb": list(self.step_probabilities),
            "epsilons": list(self.epsilons),
            "success": self.success_probability,
            "successDirect": self.success_direct,
            "traceDistance": self.trace_distance,
        }
        if self.has_angles:
            out.update(theta=list(self.thetas), alpha=list(self.alphas),
                       beta=list(self.betas), gamma=list(self.gammas))
        if self.order is not None:
            out["order"] = list(self.order)
        return out


def _safe_arccos(x):
    return math.acos(min(1.0, max(0.0, float(x))))


def apply_projector(p, rho, prob_floor=DEFAULT_TOL.prob_floor):
    """Post-measurement state and probability for outcome ``P``.

    Accepts a ``DensityOperator`` or ``PureState`` and returns the same kind.
    """
    if p.dim != rho.dim:
        raise ShapeError(f"apply_projector: projector dim {p.dim} != state dim {rho.dim}")
    if isinstance(rho, PureState):
        v = p.matrix @ rho.amplitudes
        prob = float(np.real(np.vdot(v, v)))
        if prob <= prob_floor:
            raise VanishingBranchError(f"vanishing branch: outcome probability {prob:.3g}")
        return PureState(v / math.sqrt(prob)), prob
    m = p.matrix @ rho.matrix @ p.matrix
    prob = float(np.trace(m).real)
    if prob <= prob_floor:
        raise VanishingBranchError(f"vanishing branch: outcome probability {prob:.3g}")
    return DensityOperator(m / prob), prob


def sandwich_success(projectors, rho):
    """``tr(P_N⋯P_1 ρ P_1⋯P_N)`` evaluated directly, without renormalizing."""
    m = rho.density() if isinstance(rho, PureState) else rho.matrix
    for p in projectors:
        m = p.matrix @ m @ p.matrix
    return float(np.trace(m).real)


def _epsilons(projectors, initial):
    if isinstance(initial, PureState):
        v = initial.amplitudes
        return tuple(float(1.0 - np.real(np.vdot(v, p.matrix @ v))) for p in projectors)
    tr = initial.trace
    return tuple(float(tr - np.real(np.trace(p.matrix @ initial.matrix))) for p in projectors)


def _run(projectors, initial, order, keep_states, prob_floor, angles, strict_angles=False):
    pure = isinstance(initial, PureState)
    weight = 1.0 if pure else initial.trace
    state = initial
    if not pure and initial.subnormalized:
        state = DensityOperator(initial.matrix / weight)
    probs, states = [], []
    thetas, alphas, betas, gammas = [], [], [], []
    psi = initial.amplitudes if pure else None
    angle_note = None
    for step, idx in enumerate(order):
        p = projectors[idx]
        try:
            new, prob = apply_projector(p, state, prob_floor)
            if angles:
                direct = p.matrix @ psi
                nd = np.linalg.norm(direct)
                if nd * nd <= prob_floor:
                    if strict_angles:
                        raise VanishingBranchError(
                            "vanishing branch: direct projection of the initial state is zero")
                    angles = False
                    angle_note = f"no angle record: direct projection vanishes at step {step}"
            if angles:
                direct = direct / nd
                cur = new.amplitudes
                thetas.append(_safe_arccos(abs(np.vdot(cur, state.amplitudes))))
                alphas.append(_safe_arccos(abs(np.vdot(direct, psi))))
                betas.append(_safe_arccos(abs(np.vdot(cur, psi))))
                gammas.append(_safe_arccos(abs(np.vdot(cur, direct))))
        except VanishingBranchError as exc:
            raise VanishingBranchError(
                f"{exc} at step {step}", step=step,
                partial={"step_probabilities": tuple(probs)}) from None
        probs.append(prob)
        state = new
        if keep_states:
            states.append(state)
    final = state.density() if pure else state.matrix
    rho0 = initial.density() if pure else state_matrix(initial) / weight
    success_direct = sandwich_success([projectors[i] for i in order], initial)
    trace = ChainTrace(
        step_probabilities=tuple(probs),
        epsilons=_epsilons(projectors, initial),
        final_state=final,
        success_probability=float(weight * np.prod(probs)),
        success_direct=success_direct,
        trace_distance=trace_norm(rho0 - final),
        initial_trace=float(weight),
        intermediate_states=tuple(states) if keep_states else None,
        meta={"d": initial.dim, "N": len(projectors), "pure": pure},
    )
    if angle_note:
        trace.meta["angles"] = angle_note
    if angles:
        trace = replace(trace, thetas=tuple(thetas), alphas=tuple(alphas),
                        betas=tuple(betas), gammas=tuple(gammas))
    return trace


def state_matrix(s):
    return s.density() if isinstance(s, PureState) else s.matrix


def run_chain(chain, keep_states=False, prob_floor=DEFAULT_TOL.prob_floor):
    """Apply ``P_1 … P_N`` in order, keeping the all-success branch.

    Pure initial states get the angle record populated as well, unless some
    ``P_i ψ`` vanishes (then ``meta["angles"]`` says why); mixed ones never do.
    """
    order = tuple(range(len(chain.projectors)))
    return _run(chain.projectors, chain.initial, order, keep_states, prob_floor,
                angles=chain.is_pure)


def extract_angles(chain, prob_floor=DEFAULT_TOL.prob_floor):
    if not chain.is_pure:
        raise ValidationError(
            "extract_angles: the angle representation needs a pure initial state; "
            "purify the chain first")
    order = tuple(range(len(chain.projectors)))
    return _run(chain.projectors, chain.initial, order, False, prob_floor, angles=True,
                strict_angles=True)


def run_back_and_forth(chain, keep_states=False, prob_floor=DEFAULT_TOL.prob_floor):
    """Apply ``P_1 … P_N`` and then ``P_{N-1} … P_1``.

    ``epsilons`` still refers to the ``N`` distinct projectors; the applied
    sequence is stored in ``order``.
    """
    n = len(chain.projectors)
    order = tuple(range(n)) + tuple(range(n - 2, -1, -1))
    trace = _run(chain.projectors, chain.initial, order, keep_states, prob_floor, angles=False)
    return replace(trace, order=order)


def run_purified(chain, prob_floor=DEFAULT_TOL.prob_floor):
    """Run the purified chain and return ``(purified_trace, reduced_final)``.

    ``reduced_final`` is the system marginal of the purified final state and
    equals the final state of the mixed run.
    """
    pc = chain.purified()
    trace = run_chain(pc, prob_floor=prob_floor)
    d = chain.dim
    fin = trace.final_state.reshape(d, d, d, d)
    return trace, np.einsum("aiaj->ij", fin)
