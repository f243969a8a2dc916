"""Per-user congestion control: helper choice, quality choice, request
sizing and the auxiliary/virtual-queue pair that drives quality upward."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .video import QualityBounds


class Unserviceable(Exception):
    """The user has no eligible helper this slot; its request is deferred."""


def alpha_fair_utility(x, alpha: float):
    x = np.asarray(x, dtype=float)
    if alpha == 1:
        return np.log(x)
    return x ** (1.0 - alpha) / (1.0 - alpha)


def select_helper(queues: dict[int, float]) -> int:
    """Helper with the shortest queue towards the user; ties go to the
    smallest helper id."""
    if not queues:
        raise Unserviceable("no helper in the neighborhood holds the requested file")
    return min(queues, key=lambda h: (queues[h], h))


def select_quality(q_star: float, theta: float, sizes, qualities) -> int:
    scores = q_star * np.asarray(sizes, dtype=float) - theta * np.asarray(qualities, dtype=float)
    # np.argmin returns the first minimizer, i.e. the smallest mode index
    return int(np.argmin(scores))


def gamma_update(theta: float, v_param: float, alpha: float, bounds: QualityBounds) -> float:
    """Maximizer of V phi(g) - theta g over [d_min, d_max] for alpha-fair phi."""
    lo, hi = bounds.d_min, bounds.d_max
    if theta <= 0:
        return hi
    if alpha == 0:
        return hi if theta <= v_param else lo
    g = (v_param / theta) ** (1.0 / alpha)
    return min(max(g, lo), hi)


def virtual_queue_update(theta: float, gamma: float, quality: float) -> float:
    return max(theta + gamma - quality, 0.0)


@dataclass
class UserControlState:
    v_param: float
    alpha: float
    bounds: QualityBounds
    theta: float = 0.0

    def __post_init__(self):
        if not self.v_param > 0:
            raise ValueError("V must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")


@dataclass
class ControlAction:
    helper: int
    mode: int
    request_bits: dict[int, float]
    gamma: float
    requested_quality: float
    theta_next: float = field(default=0.0)


def congestion_control_step(state: UserControlState, queues: dict[int, float], sizes, qualities,
                            bit_unit: float = 1.0, helper: int | None = None) -> ControlAction:
    """One slot of congestion control for an active user.

    ``queues`` maps each eligible helper to its backlog (bits) towards this
    user. ``bit_unit`` rescales bits inside the quality score only. Passing
    ``helper`` overrides the shortest-queue choice (used by the max-SINR
    baseline). Raises ``Unserviceable`` with the state left untouched.
    """
    h = select_helper(queues) if helper is None else helper
    if helper is not None and helper not in queues:
        raise Unserviceable(f"helper {helper} is not eligible")
    sizes = np.asarray(sizes, dtype=float)
    m = select_quality(queues[h] / bit_unit, state.theta, sizes / bit_unit, qualities)
    request = {g: 0.0 for g in queues}
    request[h] = float(sizes[m])
    d = float(qualities[m])
    gamma = gamma_update(state.theta, state.v_param, state.alpha, state.bounds)
    theta_next = virtual_queue_update(state.theta, gamma, d)
    state.theta = theta_next
    return ControlAction(h, m, request, gamma, d, theta_next)


def dpp_first_term(q: float, theta: float, size: float, quality: float) -> float:
    """Per-user term of the drift bound that the (helper, mode) choice minimizes."""
    return q * size - theta * quality

