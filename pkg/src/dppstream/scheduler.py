"""Helper-side transmission scheduling and the per-edge queue update.

Both variants give each helper's whole slot to a single user at that link's
peak rate. Macro-diversity picks the user per helper independently; unique
association additionally forbids a user from being served by two helpers,
which turns the slot into a maximum-weight bipartite matching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

IDLE = -1


@dataclass
class ScheduleDecision:
    service_bits: np.ndarray  # H x U, n * mu_hu
    assignment: np.ndarray    # per helper: served user or IDLE

    def served_pairs(self):
        return [(h, int(u)) for h, u in enumerate(self.assignment) if u != IDLE]


def _weights(q, c, edges):
    w = np.asarray(q, dtype=float) * np.asarray(c, dtype=float)
    if edges is not None:
        w = np.where(edges, w, 0.0)
    return w


def schedule_macro_diversity(q, c, edges=None, n_symbols: float = 1.0) -> ScheduleDecision:
    """Each helper serves argmax_u Q_hu C_hu at its peak rate; zero weight idles."""
    w = _weights(q, c, edges)
    n_h, _ = w.shape
    assignment = np.full(n_h, IDLE)
    service = np.zeros_like(w)
    if w.size:
        best = np.argmax(w, axis=1)  # first maximizer = smallest user id
        for h in range(n_h):
            u = best[h]
            if w[h, u] > 0:
                assignment[h] = u
                service[h, u] = n_symbols * c[h, u]
    return ScheduleDecision(service, assignment)


def max_weight_bipartite_matching(weights) -> tuple[np.ndarray, float]:
    """Maximum-weight matching of helpers (rows) to users (columns).

    Returns per-row matched column (or IDLE) and the total weight. Pairs
    with zero weight are left unmatched.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2:
        raise ValueError("weights must be a 2-D matrix")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    assignment = np.full(w.shape[0], IDLE)
    if w.size == 0:
        return assignment, 0.0
    rows, cols = linear_sum_assignment(w, maximize=True)
    total = 0.0
    for r, col in zip(rows, cols):
        if w[r, col] > 0:
            assignment[r] = col
            total += w[r, col]
    return assignment, total


def schedule_unique_association(q, c, edges=None, n_symbols: float = 1.0) -> ScheduleDecision:
    w = _weights(q, c, edges)
    assignment, _ = max_weight_bipartite_matching(w)
    service = np.zeros_like(w)
    for h, u in enumerate(assignment):
        if u != IDLE:
            service[h, u] = n_symbols * c[h, u]
    return ScheduleDecision(service, assignment)


SCHEDULERS = {
    "macro": schedule_macro_diversity,
    "unique": schedule_unique_association,
}


def queue_update(q, service_bits, arrival_bits):
    """Q' = max(Q - service, 0) + arrivals; also returns the bits actually delivered."""
    q = np.asarray(q, dtype=float)
    delivered = np.minimum(q, np.asarray(service_bits, dtype=float))
    return q - delivered + np.asarray(arrival_bits, dtype=float), delivered
