"""Exact exposure-model marginals by brute-force enumeration of hidden states.

Every completion of the observation gets weight ``prod_i phi_i`` with

* ``phi_i = eta``       if i is perturbed and has a perturbed neighbour,
* ``phi_i = 1 - eta``   if i is unperturbed and has a perturbed neighbour,
* ``phi_i = 1``         if i is unperturbed with no perturbed neighbour,
* ``phi_i = 0``         if i is perturbed with no perturbed neighbour,

taken over all nodes, observed ones included. A configuration's weight
therefore only depends on the counts ``(n11, n01)`` of the first two
cases, so enumeration is done once and tallied into count tables; any
value of eta is then evaluated from the tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, xlog1py, xlogy

from .netgraph import Network
from .perturbsim import Observation

MAX_UNOBSERVED = 22
_CHUNK = 1 << 15


class OracleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ExactMarginals:
    nodes: np.ndarray  # unobserved node indices
    p_unperturbed: np.ndarray
    eta_grid_opt: float
    partition_weight: float

    @property
    def p_perturbed(self) -> np.ndarray:
        return 1.0 - self.p_unperturbed

    def full_scores(self, node_count: int, obs: Observation) -> np.ndarray:
        """Probability perturbed for every node, observed nodes at their state."""
        out = np.zeros(node_count)
        out[obs.nodes] = obs.states
        out[self.nodes] = self.p_perturbed
        return out


@dataclass(frozen=True, eq=False)
class _Tally:
    nodes: np.ndarray
    total: np.ndarray  # total[a, b] = admissible configs with n11 = a, n01 = b
    unperturbed: np.ndarray  # unperturbed[k, a, b] = same, restricted to hidden node k at 0


def _tally(net: Network, obs: Observation) -> _Tally:
    obs.validate_for(net)
    n = net.node_count
    hidden = np.flatnonzero(~obs.mask(n))
    m = len(hidden)
    if m > MAX_UNOBSERVED:
        raise OracleError("instance too large for enumeration")
    adj = net.adjacency_matrix
    base = np.zeros(n, dtype=np.float64)
    base[obs.nodes] = obs.states
    total = np.zeros((n + 1, n + 1), dtype=np.int64)
    unperturbed = np.zeros((m, n + 1, n + 1), dtype=np.int64)
    size = 1 << m
    bits = np.arange(m, dtype=np.int64)
    for start in range(0, size, _CHUNK):
        codes = np.arange(start, min(size, start + _CHUNK), dtype=np.int64)
        hid = ((codes[:, None] >> bits[None, :]) & 1).astype(np.float64)
        sigma = np.repeat(base[None, :], len(codes), axis=0)
        sigma[:, hidden] = hid
        exposed = (adj @ sigma.T).T > 0
        pert = sigma > 0
        ok = ~np.any(pert & ~exposed, axis=1)
        if not ok.any():
            continue
        n11 = np.sum(pert & exposed, axis=1)[ok]
        n01 = np.sum(~pert & exposed, axis=1)[ok]
        flat = n11 * (n + 1) + n01
        cells = (n + 1) * (n + 1)
        total += np.bincount(flat, minlength=cells).reshape(n + 1, n + 1)
        hid_ok = hid[ok]
        for k in range(m):
            zero = hid_ok[:, k] == 0
            unperturbed[k] += np.bincount(flat[zero], minlength=cells).reshape(n + 1, n + 1)
    return _Tally(hidden, total, unperturbed)


def _log_weights(eta: float, shape) -> np.ndarray:
    a = np.arange(shape[0], dtype=np.float64)[:, None]
    b = np.arange(shape[1], dtype=np.float64)[None, :]
    with np.errstate(divide="ignore"):
        return xlogy(a, eta) + xlog1py(b, -eta)


def _log_z(counts: np.ndarray, logw: np.ndarray) -> float:
    mask = counts > 0
    if not mask.any():
        return -np.inf
    return float(logsumexp(np.log(counts[mask]) + logw[mask]))


def _marginals(tally: _Tally, eta: float) -> tuple[np.ndarray, float]:
    logw = _log_weights(eta, tally.total.shape)
    log_z = _log_z(tally.total, logw)
    if not np.isfinite(log_z):
        raise OracleError("observation is inadmissible: every completion has zero weight")
    p0 = np.array([np.exp(_log_z(u, logw) - log_z) for u in tally.unperturbed])
    return np.clip(p0, 0.0, 1.0), log_z


def exact_marginals_at_eta(net: Network, obs: Observation, eta: float) -> ExactMarginals:
    """Exact P(hidden node unperturbed | observation, eta) for every hidden node."""
    if not 0.0 <= eta <= 1.0:
        raise OracleError("eta must be in [0,1]")
    tally = _tally(net, obs)
    p0, log_z = _marginals(tally, eta)
    return ExactMarginals(tally.nodes, p0, float(eta), float(np.exp(log_z)))


def log_partition(net: Network, obs: Observation, etas) -> np.ndarray:
    """log Z(eta) for each value in ``etas``."""
    tally = _tally(net, obs)
    return np.array([_log_z(tally.total, _log_weights(float(e), tally.total.shape)) for e in etas])


def exact_eta_opt(
    net: Network, obs: Observation, grid_step: float = 1e-3
) -> tuple[float, ExactMarginals]:
    """Grid maximiser of Z(eta) over {step, 2 step, ..., 1 - step}; ties go to the smaller eta."""
    if not 0.0 < grid_step <= 0.01:
        raise OracleError("grid_step must be in (0, 0.01]")
    tally = _tally(net, obs)
    count = int(round(1.0 / grid_step)) - 1
    grid = grid_step * np.arange(1, count + 1)
    log_zs = np.array([_log_z(tally.total, _log_weights(e, tally.total.shape)) for e in grid])
    if not np.any(np.isfinite(log_zs)):
        raise OracleError("observation is inadmissible: every completion has zero weight")
    best = int(np.argmax(log_zs))
    eta = float(grid[best])
    p0, log_z = _marginals(tally, eta)
    return eta, ExactMarginals(tally.nodes, p0, eta, float(np.exp(log_z)))
