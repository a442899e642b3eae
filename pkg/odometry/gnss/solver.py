# odometry/gnss/solver.py
"""Dogleg Gauss-Newton over the nodes of one estimation window."""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import SolverError
from .factors import NODE_DOF

logger = logging.getLogger('odometry')

ACCEPT_RATIO = 0.25
EXPAND_RATIO = 0.75
MIN_TRUST_RADIUS = 1e-12
GRADIENT_TOLERANCE = 1e-12
ABSOLUTE_DECREASE = 1e-12   # whitened cost units


@dataclass
class SolveResult:
    nodes: dict
    cost: float
    iterations: int = 0
    cost_history: list = field(default_factory=list)
    termination: str = ""
    trust_radius: float = 0.0


class LinearSystem:
    """Gauss-Newton normal equations H = J^T J, g = J^T r over the free nodes."""

    def __init__(self, free_keys):
        self.index = {key: i * NODE_DOF for i, key in enumerate(free_keys)}
        size = len(free_keys) * NODE_DOF
        self.H = np.zeros((size, size))
        self.g = np.zeros(size)
        self.cost = 0.0

    def add(self, r, blocks, cost=None):
        self.cost += 0.5 * float(r @ r) if cost is None else cost
        free = [(self.index[k], J) for k, J in blocks.items() if k in self.index]
        for i, Ji in free:
            self.g[i:i + NODE_DOF] += Ji.T @ r
            for j, Jj in free:
                self.H[i:i + NODE_DOF, j:j + NODE_DOF] += Ji.T @ Jj


def build_system(nodes, factors, free_keys):
    system = LinearSystem(free_keys)
    for factor in factors:
        system.add(*factor.linearize_with_cost(nodes))
    return system


def total_cost(nodes, factors):
    return sum(factor.cost(nodes) for factor in factors)


def dogleg_step(h_gn, g, H, radius):
    """Blend the Gauss-Newton and steepest-descent steps inside ``radius``."""
    if np.linalg.norm(h_gn) <= radius:
        return h_gn
    curvature = float(g @ H @ g)
    alpha = float(g @ g) / curvature if curvature > 0.0 else radius / np.linalg.norm(g)
    h_sd = -alpha * g
    sd_norm = np.linalg.norm(h_sd)
    if sd_norm >= radius:
        return radius * h_sd / sd_norm
    # Solve ||h_sd + beta * (h_gn - h_sd)|| = radius for beta in [0, 1].
    d = h_gn - h_sd
    a = float(d @ d)
    b = 2.0 * float(h_sd @ d)
    c = float(h_sd @ h_sd) - radius ** 2
    beta = (-b + np.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)
    return h_sd + beta * d


def _retract(nodes, free_keys, step):
    updated = dict(nodes)
    for i, key in enumerate(free_keys):
        updated[key] = nodes[key].retract(step[i * NODE_DOF:(i + 1) * NODE_DOF])
    return updated


def solve_window(nodes, factors, config, fixed_keys=()):
    """
    Minimize the summed squared whitened residuals over the free nodes.

    ``nodes`` maps key -> StateNode; nodes in ``fixed_keys`` are held constant.
    Robust kernels are re-evaluated every time the factors are linearized.
    """
    free_keys = [k for k in nodes if k not in set(fixed_keys)]
    if not free_keys:
        raise SolverError("no free node to optimize")

    radius = config.trust_radius_init
    system = build_system(nodes, factors, free_keys)
    result = SolveResult(nodes=nodes, cost=system.cost, cost_history=[system.cost])
    loops = 0

    while True:
        if result.iterations >= config.max_iter or loops >= 4 * config.max_iter:
            result.termination = "max_iter"
            break
        loops += 1
        g, H = system.g, system.H
        if np.max(np.abs(g), initial=0.0) < GRADIENT_TOLERANCE:
            result.termination = "converged"
            break
        try:
            h_gn = -cho_solve(cho_factor(H), g)
        except LinAlgError as exc:
            raise SolverError("normal equations are not positive definite",
                              condition=float(np.linalg.cond(H)), size=H.shape[0]) from exc

        step = dogleg_step(h_gn, g, H, radius)
        predicted = -(float(g @ step) + 0.5 * float(step @ H @ step))
        if predicted <= max(config.cost_rel_tol * result.cost, ABSOLUTE_DECREASE):
            result.termination = "converged"
            break

        candidate = _retract(result.nodes, free_keys, step)
        candidate_cost = total_cost(candidate, factors)
        ratio = (result.cost - candidate_cost) / predicted

        if ratio > ACCEPT_RATIO:
            decrease = result.cost - candidate_cost
            previous = result.cost
            result.nodes = candidate
            system = build_system(candidate, factors, free_keys)
            result.cost = system.cost
            result.iterations += 1
            result.cost_history.append(result.cost)
            if decrease <= config.cost_rel_tol * previous:
                result.termination = "converged"
                break
        else:
            logger.debug(f"Rejected step: gain ratio {ratio:.3f}, radius {radius:.3g}.")

        if ratio <= ACCEPT_RATIO:
            radius *= 0.25
        elif ratio > EXPAND_RATIO and np.linalg.norm(step) >= 0.99 * radius:
            radius = min(2.0 * radius, config.trust_radius_max)
        if radius < MIN_TRUST_RADIUS:
            result.termination = "trust_region_collapsed"
            break

    result.trust_radius = radius
    logger.debug(f"Solve finished ({result.termination}) after {result.iterations} iterations, "
                 f"cost {result.cost_history[0]:.6g} -> {result.cost:.6g}.")
    return result
