"""Belief propagation for the exposure model, with EM over the spreading parameter.

Model: an exposed node (one with at least one perturbed neighbour) is
perturbed with probability ``eta``; a node with no perturbed neighbour is
unperturbed. Every node, observed or not, contributes that factor.

Two message parameterisations are available through ``SolverSettings.variant``:

``"pair"`` (default)
    The message on the directed edge ``k -> i`` is a 2x2 table over
    ``(state of k, state of i)``. It keeps the dependence of k's own
    exposure factor on ``i`` and is exact on trees.

``"cavity"``
    The message is the single number ``Psi_k^(i)``: the probability that
    ``k`` is unperturbed once ``i`` is removed, updated as
    ``Psi = P + (1 - eta) (1 - P)`` with ``P`` the product of the other
    incoming messages. ``observed_evidence`` additionally lets observed
    nodes constrain their unobserved neighbours through their exposure
    factor; with it off this is the bare scalar recursion.

For both variants ``BeliefState.messages`` holds ``Psi_k^(i)`` per directed
edge, and ``beliefs[i]`` the probability that ``i`` is unperturbed. In the
pair variant ``Psi_k^(i)`` is the ``state of i = 0`` slice of the table.

The eta update is the expected fraction of exposed nodes that are perturbed.
By default (``eta_update="marginals"``) both expectations are formed from
marginals, ``sum (1 - psi_i)(1 - P_i) / sum (1 - P_i)`` with ``P_i`` the
product of all incoming ``Psi``; ``"joint"`` uses the node tables of the
pair variant instead.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .netgraph import Network
from .perturbsim import Observation
from .scores import ScoreVector

log = logging.getLogger(__name__)

_OSCILLATION_WINDOW = 50


@dataclass
class SolverSettings:
    message_tolerance: float = 1e-6
    eta_tolerance: float = 1e-6
    max_bp_sweeps: int = 1000
    max_em_rounds: int = 100
    damping: float = 0.0
    eta_init: float = 0.5
    message_init: float = 0.5
    schedule: str = "synchronous"  # or "asynchronous"
    seed: int = 0  # node order of the asynchronous schedule
    variant: str = "pair"  # or "cavity"
    eta_sum: str = "all"  # or "unobserved"
    eta_update: str = "marginals"  # or "joint" (pair variant only)
    observed_evidence: bool = True  # cavity variant only
    estimate_eta: bool = True

    def __post_init__(self):
        if self.message_tolerance <= 0 or self.eta_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must be in [0,1)")
        if not 0.0 <= self.eta_init <= 1.0:
            raise ValueError("eta_init must be in [0,1]")
        if not 0.0 <= self.message_init <= 1.0:
            raise ValueError("message_init must be in [0,1]")
        if self.schedule not in ("synchronous", "asynchronous"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.variant not in ("pair", "cavity"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.eta_sum not in ("all", "unobserved"):
            raise ValueError(f"unknown eta_sum {self.eta_sum!r}")
        if self.eta_update not in ("marginals", "joint"):
            raise ValueError(f"unknown eta_update {self.eta_update!r}")
        if self.eta_update == "joint" and self.variant != "pair":
            raise ValueError("eta_update='joint' needs the pair variant")


@dataclass
class BeliefState:
    messages: np.ndarray  # Psi per directed edge, CSR order of the network
    beliefs: np.ndarray
    eta: float
    observed: np.ndarray  # bool mask
    clamped: np.ndarray  # 1 - state on observed nodes, 1 elsewhere
    pair: np.ndarray | None = None  # (edges, 2, 2) tables of the pair variant

    def copy(self) -> "BeliefState":
        return replace(
            self,
            messages=self.messages.copy(),
            beliefs=self.beliefs.copy(),
            pair=None if self.pair is None else self.pair.copy(),
        )


@dataclass
class Diagnostics:
    eta_star: float
    em_rounds: int
    bp_sweeps_total: int
    converged: bool
    final_residual: float
    bp_converged: bool = True
    eta_trace: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_json(self) -> str:
        keys = ("eta_star", "em_rounds", "bp_sweeps_total", "converged", "final_residual")
        return json.dumps({k: getattr(self, k) for k in keys})


def _factor_table(eta: float) -> np.ndarray:
    """``table[s, g]``: weight of own state s given exposure g."""
    return np.array([[1.0, 1.0 - eta], [0.0, eta]])


def _allowed_states(state: BeliefState) -> np.ndarray:
    allowed = np.ones((len(state.observed), 2))
    obs = state.observed
    allowed[obs, 0] = state.clamped[obs]
    allowed[obs, 1] = 1.0 - state.clamped[obs]
    return allowed


def init_state(net: Network, obs: Observation, settings: SolverSettings) -> BeliefState:
    obs.validate_for(net)
    observed = obs.mask(net.node_count)
    clamped = np.ones(net.node_count)
    clamped[obs.nodes] = 1.0 - obs.states
    src_obs = observed[net.edge_src]
    messages = np.full(2 * net.edge_count, float(settings.message_init))
    messages[src_obs] = clamped[net.edge_src[src_obs]]
    beliefs = np.full(net.node_count, float(settings.message_init))
    beliefs[observed] = clamped[observed]
    state = BeliefState(messages, beliefs, float(settings.eta_init), observed, clamped)
    if settings.variant == "pair":
        p0 = float(settings.message_init)
        # own-state marginal p0 / 1 - p0, independent of the receiver's state
        pair = np.empty((len(messages), 2, 2))
        pair[:, 0, :] = p0 / 2.0
        pair[:, 1, :] = (1.0 - p0) / 2.0
        allowed = _allowed_states(state)[net.edge_src]
        pair *= allowed[:, :, None]
        pair /= pair.sum(axis=(1, 2), keepdims=True)
        state.pair = pair
    return state


# --- products over incoming edges ---------------------------------------------


def _incoming_products(values: np.ndarray, net: Network) -> tuple[np.ndarray, np.ndarray]:
    """Products of incoming edge values, per node and per cavity.

    ``values`` is indexed by directed edge (j -> i). Returns ``full[i]``, the
    product over every neighbour j of ``i``, and ``cavity[e]`` for
    ``e = (i -> k)``, the same product with ``k`` left out. Logs are used
    for the non-zero factors and exact zeros are counted separately, so
    leaving out a zero factor never divides by zero.
    """
    n = net.node_count
    src = net.edge_src
    incoming = values[net.edge_reverse]
    zero = incoming <= 0.0
    logs = np.log(np.where(zero, 1.0, incoming))
    log_total = np.bincount(src, weights=logs, minlength=n)
    zeros = np.bincount(src, weights=zero, minlength=n)
    full = np.where(zeros > 0, 0.0, np.exp(log_total))
    cav_zeros = zeros[src] - zero
    cavity = np.where(cav_zeros > 0, 0.0, np.exp(log_total[src] - logs))
    return full, cavity


def _leave_one_out(x: np.ndarray) -> np.ndarray:
    """``out[j] = prod(x[i] for i != j)`` by prefix and suffix products."""
    if len(x) == 0:
        return x.copy()
    prefix = np.concatenate(([1.0], np.cumprod(x[:-1])))
    suffix = np.concatenate((np.cumprod(x[::-1][:-1])[::-1], [1.0]))
    return prefix * suffix


def _safe_ratio(num, den, fallback):
    good = den > 0
    return np.where(good, num / np.where(good, den, 1.0), fallback)


# --- pair variant -----------------------------------------------------------------


def _pair_tables(none_perturbed, total, table, allowed):
    """Outgoing (own state, receiver state) tables from neighbour products.

    ``none_perturbed[..., s]`` is the product over the other neighbours of
    their weight for being unperturbed given own state s, ``total[..., s]``
    the product of their total weight. The difference is the weight of the
    neighbourhood exposing the node.
    """
    out = np.empty(none_perturbed.shape[:-1] + (2, 2))
    for s in (0, 1):
        p0 = none_perturbed[..., s]
        exposed = np.maximum(total[..., s] - p0, 0.0)
        out[..., s, 1] = allowed[..., s] * table[s, 1] * total[..., s]
        out[..., s, 0] = allowed[..., s] * (table[s, 1] * exposed + table[s, 0] * p0)
    return out


def _normalise_pair(out, allowed):
    z = out.sum(axis=(-2, -1), keepdims=True)
    fallback = np.broadcast_to(allowed[..., :, None] / 2.0, out.shape)
    fallback = fallback / np.maximum(fallback.sum(axis=(-2, -1), keepdims=True), 1e-300)
    return np.where(z > 0, out / np.where(z > 0, z, 1.0), fallback)


def _pair_neighbour_products(pair, net):
    n = net.node_count
    none_full = np.empty((n, 2))
    total_full = np.empty((n, 2))
    none_cav = np.empty((len(pair), 2))
    total_cav = np.empty((len(pair), 2))
    for s in (0, 1):
        none_full[:, s], none_cav[:, s] = _incoming_products(pair[:, 0, s], net)
        total_full[:, s], total_cav[:, s] = _incoming_products(pair[:, 0, s] + pair[:, 1, s], net)
    return none_full, total_full, none_cav, total_cav


def _pair_psi(pair: np.ndarray) -> np.ndarray:
    return _safe_ratio(pair[:, 0, 0], pair[:, 0, 0] + pair[:, 1, 0], 1.0)


def _pair_node_factors(state: BeliefState, net: Network) -> np.ndarray:
    """Normalised joint ``[s, g]`` of each node's state and exposure."""
    table = _factor_table(state.eta)
    allowed = _allowed_states(state)
    none_full, total_full, _, _ = _pair_neighbour_products(state.pair, net)
    joint = np.empty((net.node_count, 2, 2))
    for s in (0, 1):
        exposed = np.maximum(total_full[:, s] - none_full[:, s], 0.0)
        joint[:, s, 1] = allowed[:, s] * table[s, 1] * exposed
        joint[:, s, 0] = allowed[:, s] * table[s, 0] * none_full[:, s]
    z = joint.sum(axis=(1, 2), keepdims=True)
    return np.where(z > 0, joint / np.where(z > 0, z, 1.0), 0.0)


def _sweep_pair_sync(state, net, settings):
    table = _factor_table(state.eta)
    allowed = _allowed_states(state)[net.edge_src]
    _, _, none_cav, total_cav = _pair_neighbour_products(state.pair, net)
    new = _normalise_pair(_pair_tables(none_cav, total_cav, table, allowed), allowed)
    if settings.damping:
        new = (1.0 - settings.damping) * new + settings.damping * state.pair
    change = float(np.max(np.abs(new - state.pair), initial=0.0))
    return new, change


def _sweep_pair_async(state, net, settings, rng):
    table = _factor_table(state.eta)
    allowed = _allowed_states(state)
    pair = state.pair.copy()
    indptr, rev = net.indptr, net.edge_reverse
    change = 0.0
    for k in rng.permutation(net.node_count):
        lo, hi = indptr[k], indptr[k + 1]
        if lo == hi:
            continue
        inc = pair[rev[lo:hi]]
        none = np.stack([_leave_one_out(inc[:, 0, s]) for s in (0, 1)], axis=-1)
        total = np.stack([_leave_one_out(inc[:, 0, s] + inc[:, 1, s]) for s in (0, 1)], axis=-1)
        al = np.broadcast_to(allowed[k], (hi - lo, 2))
        new = _normalise_pair(_pair_tables(none, total, table, al), al)
        if settings.damping:
            new = (1.0 - settings.damping) * new + settings.damping * pair[lo:hi]
        change = max(change, float(np.max(np.abs(new - pair[lo:hi]))))
        pair[lo:hi] = new
    return pair, change


# --- cavity variant ---------------------------------------------------------------


def _unperturbed_probability(prod, eta, ev0=None, ev1=None):
    """``P + (1 - eta)(1 - P)``, reweighted by observed-neighbour evidence if given."""
    base = prod + (1.0 - eta) * (1.0 - prod)
    if ev0 is None:
        return base
    w0 = base * ev0
    w1 = eta * (1.0 - prod) * ev1
    # an impossible local configuration falls back to the unconstrained update
    return _safe_ratio(w0, w0 + w1, base)


def _evidence_pair(q, perturbed, eta):
    """Weights an observed node gives to a neighbour being unperturbed / perturbed.

    ``q`` is the probability that none of its other neighbours is perturbed.
    """
    e0 = np.where(perturbed, (1.0 - q) * eta, q + (1.0 - q) * (1.0 - eta))
    e1 = np.where(perturbed, eta, 1.0 - eta)
    scale = np.maximum(e0, e1)
    return _safe_ratio(e0, scale, 1.0), _safe_ratio(e1, scale, 1.0)


def _cavity_evidence(state, net, cavity):
    m0 = np.ones_like(cavity)
    m1 = np.ones_like(cavity)
    src = net.edge_src
    from_obs = state.observed[src]
    if from_obs.any():
        perturbed = state.clamped[src[from_obs]] == 0.0
        m0[from_obs], m1[from_obs] = _evidence_pair(cavity[from_obs], perturbed, state.eta)
    full0, cav0 = _incoming_products(m0, net)
    full1, cav1 = _incoming_products(m1, net)
    return full0, cav0, full1, cav1


def _sweep_cavity_sync(state, net, settings):
    eta = state.eta
    _, cavity = _incoming_products(state.messages, net)
    free = ~state.observed[net.edge_src]
    if settings.observed_evidence:
        _, ev0, _, ev1 = _cavity_evidence(state, net, cavity)
        update = _unperturbed_probability(cavity[free], eta, ev0[free], ev1[free])
    else:
        update = _unperturbed_probability(cavity[free], eta)
    old = state.messages[free]
    if settings.damping:
        update = (1.0 - settings.damping) * update + settings.damping * old
    new = state.messages.copy()
    new[free] = update
    change = float(np.max(np.abs(update - old), initial=0.0))
    return new, change


def _sweep_cavity_async(state, net, settings, rng):
    eta = state.eta
    msgs = state.messages.copy()
    indptr, dst, rev = net.indptr, net.edge_dst, net.edge_reverse
    observed, clamped = state.observed, state.clamped
    change = 0.0
    for i in rng.permutation(np.flatnonzero(~observed)):
        lo, hi = indptr[i], indptr[i + 1]
        if lo == hi:
            continue
        out = np.arange(lo, hi)
        prod = _leave_one_out(msgs[rev[out]])
        if settings.observed_evidence:
            ev0 = np.ones(hi - lo)
            ev1 = np.ones(hi - lo)
            for pos, e in enumerate(out):
                o = dst[e]
                if observed[o]:
                    o_out = np.arange(indptr[o], indptr[o + 1])
                    q = float(np.prod(msgs[rev[o_out[dst[o_out] != i]]]))
                    ev0[pos], ev1[pos] = _evidence_pair(q, clamped[o] == 0.0, eta)
            value = _unperturbed_probability(prod, eta, _leave_one_out(ev0), _leave_one_out(ev1))
        else:
            value = _unperturbed_probability(prod, eta)
        if settings.damping:
            value = (1.0 - settings.damping) * value + settings.damping * msgs[out]
        change = max(change, float(np.max(np.abs(value - msgs[out]))))
        msgs[out] = value
    return msgs, change


# --- public operations ------------------------------------------------------------


def bp_sweep(
    state: BeliefState,
    net: Network,
    obs: Observation | None = None,
    settings: SolverSettings | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[BeliefState, float]:
    """One update of every message. Returns the new state and the largest change."""
    settings = settings or SolverSettings()
    asynchronous = settings.schedule == "asynchronous"
    if asynchronous and rng is None:
        rng = np.random.default_rng(settings.seed)
    if settings.variant == "pair":
        if asynchronous:
            pair, change = _sweep_pair_async(state, net, settings, rng)
        else:
            pair, change = _sweep_pair_sync(state, net, settings)
        msgs = _pair_psi(pair)
        src_obs = state.observed[net.edge_src]
        msgs[src_obs] = state.messages[src_obs]
        # converge on the reported Psi values too, not only on the tables
        change = max(change, float(np.max(np.abs(msgs - state.messages), initial=0.0)))
        new = replace(state, messages=msgs, pair=pair, beliefs=state.beliefs.copy())
    else:
        if asynchronous:
            msgs, change = _sweep_cavity_async(state, net, settings, rng)
        else:
            msgs, change = _sweep_cavity_sync(state, net, settings)
        new = replace(state, messages=msgs, beliefs=state.beliefs.copy())
    return new, change


def compute_beliefs(
    state: BeliefState,
    net: Network,
    obs: Observation | None = None,
    settings: SolverSettings | None = None,
) -> BeliefState:
    """Recompute the probability that each unobserved node is unperturbed."""
    settings = settings or SolverSettings()
    free = ~state.observed
    if settings.variant == "pair":
        joint = _pair_node_factors(state, net)
        values = joint[:, 0, :].sum(axis=1)[free]
    else:
        full, cavity = _incoming_products(state.messages, net)
        if settings.observed_evidence:
            full0, _, full1, _ = _cavity_evidence(state, net, cavity)
            values = _unperturbed_probability(full[free], state.eta, full0[free], full1[free])
        else:
            values = _unperturbed_probability(full[free], state.eta)
    beliefs = state.beliefs.copy()
    beliefs[free] = values
    beliefs[state.observed] = state.clamped[state.observed]
    return replace(state, beliefs=beliefs)


def exposure_counts(state: BeliefState, net: Network, settings: SolverSettings | None = None):
    """Per-node expected (perturbed and exposed, exposed) weights used by the eta update.

    With ``eta_update="marginals"`` they are approximated from marginals as
    ``(1 - psi_i)(1 - P_i)`` and ``1 - P_i``, ``P_i`` being the product of
    all incoming ``Psi`` messages. ``"joint"`` reads them off each node's
    joint table of own state and exposure (pair variant).
    """
    settings = settings or SolverSettings()
    if settings.eta_update == "joint":
        joint = _pair_node_factors(state, net)
        exposed = joint[:, 0, 1] + joint[:, 1, 1]
        both = joint[:, 1, 1]
    else:
        full, _ = _incoming_products(state.messages, net)
        exposed = 1.0 - full
        both = (1.0 - state.beliefs) * exposed
    if settings.eta_sum == "unobserved":
        keep = ~state.observed
        return both[keep], exposed[keep]
    return both, exposed


def update_eta(
    state: BeliefState,
    net: Network,
    obs: Observation | None = None,
    settings: SolverSettings | None = None,
) -> float:
    """Re-estimate eta as the expected fraction of exposed nodes that are perturbed.

    Returns the current eta when no node can be exposed.
    """
    both, exposed = exposure_counts(state, net, settings)
    den = float(np.sum(exposed))
    if den <= 0.0:
        return state.eta
    return float(np.clip(np.sum(both) / den, 0.0, 1.0))


def _run_bp(state, net, settings, rng, diag):
    """Sweep to a fixed point at fixed eta. Returns (state, sweeps, residual, converged)."""
    best, best_residual = state, np.inf
    history = []
    for sweep in range(1, settings.max_bp_sweeps + 1):
        state, residual = bp_sweep(state, net, settings=settings, rng=rng)
        assert np.all((state.messages >= 0.0) & (state.messages <= 1.0))
        if residual < settings.message_tolerance:
            return state, sweep, residual, True
        if residual < best_residual:
            best, best_residual = state, residual
        history.append(residual)
        if len(history) > _OSCILLATION_WINDOW and not residual < history[-_OSCILLATION_WINDOW - 1]:
            msg = "message change not decreasing over 50 sweeps; consider damping"
            if msg not in diag.warnings:
                diag.warnings.append(msg)
    return best, settings.max_bp_sweeps, best_residual, False


def infer(
    net: Network, obs: Observation, settings: SolverSettings | None = None
) -> tuple[ScoreVector, float, Diagnostics]:
    """Probability that each node is perturbed, with the EM estimate of eta.

    BP runs to convergence at fixed eta, beliefs are formed, eta is
    re-estimated, and the cycle repeats until eta settles. Observed nodes
    score their own state. Non-convergence is reported in the diagnostics,
    never raised.
    """
    settings = settings or SolverSettings()
    if net.node_count == 0:
        raise ValueError("network is empty")
    state = init_state(net, obs, settings)
    rng = np.random.default_rng(settings.seed)
    diag = Diagnostics(settings.eta_init, 0, 0, False, float("nan"), eta_trace=[state.eta])
    bp_ok = True
    em_ok = not settings.estimate_eta

    def relax(state):
        nonlocal bp_ok
        state, sweeps, residual, ok = _run_bp(state, net, settings, rng, diag)
        diag.bp_sweeps_total += sweeps
        diag.final_residual = float(residual)
        bp_ok &= ok
        return compute_beliefs(state, net, settings=settings)

    state = relax(state)
    if settings.estimate_eta:
        for _ in range(settings.max_em_rounds):
            diag.em_rounds += 1
            new_eta = update_eta(state, net, settings=settings)
            diag.eta_trace.append(new_eta)
            delta = abs(new_eta - state.eta)
            state.eta = new_eta
            state = relax(state)
            if delta < settings.eta_tolerance:
                em_ok = True
                break
    diag.eta_star = float(state.eta)
    diag.bp_converged = bool(bp_ok)
    diag.converged = bool(bp_ok and em_ok)
    if not diag.converged:
        log.debug("exposure BP did not fully converge: %s", diag.to_json())
    scores = ScoreVector(1.0 - state.beliefs, "exposure", converged=diag.converged)
    return scores, diag.eta_star, diag


def solve_at_eta(net: Network, obs: Observation, eta: float, settings: SolverSettings | None = None):
    """BP fixed point and beliefs at a given eta, without EM."""
    settings = replace(settings or SolverSettings(), eta_init=float(eta), estimate_eta=False)
    return infer(net, obs, settings)


def fixed_point_residual(
    state: BeliefState, net: Network, settings: SolverSettings
) -> tuple[float, float]:
    """Largest change one more undamped message update / belief evaluation would make."""
    undamped = replace(settings, damping=0.0, schedule="synchronous")
    again, msg_change = bp_sweep(state, net, settings=undamped)
    if settings.variant == "pair":
        msg_change = float(np.max(np.abs(again.messages - state.messages), initial=0.0))
    beliefs = compute_beliefs(state, net, settings=undamped)
    return msg_change, float(np.max(np.abs(beliefs.beliefs - state.beliefs), initial=0.0))


def run_to_fixed_point(
    net: Network, obs: Observation, settings: SolverSettings
) -> tuple[BeliefState, Diagnostics]:
    """Like :func:`infer` but returns the final :class:`BeliefState` (used by checks)."""
    state = init_state(net, obs, settings)
    rng = np.random.default_rng(settings.seed)
    diag = Diagnostics(settings.eta_init, 0, 0, False, float("nan"))
    state, sweeps, residual, ok = _run_bp(state, net, settings, rng, diag)
    diag.bp_sweeps_total, diag.final_residual, diag.converged = sweeps, float(residual), ok
    return compute_beliefs(state, net, settings=settings), diag
