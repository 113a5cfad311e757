"""Central finite-difference gradient checking."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .graph import Node, backward, forward, topological_order

REL_FLOOR = 1e-6


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    max_abs_error: float
    entries: int
    tolerance: float
    kinks: int = 0

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def relative_error(analytic, numeric, floor: float = REL_FLOOR):
    """|a - n| / max(|a|, |n|, floor); the floor keeps near-zero entries sane."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def branch_signature(order: list[Node]) -> list:
    """Piece indicators of every piecewise op, in graph order."""
    sig = []
    for node in order:
        if node.op is not None:
            b = node.op.branches(node.value, node.cache, *(p.value for p in node.inputs), **node.attrs)
            if b is not None:
                sig.append(b)
    return sig


def _same(x, y) -> bool:
    if isinstance(x, tuple):
        return all(_same(a, b) for a, b in zip(x, y))
    return np.array_equal(x, y)


def check_gradients(loss: Node, leaves: Mapping[str, Node], step: float = 1e-5,
                    tolerance: float = 1e-4, max_entries: int | None = None,
                    seed: int = 0, corrupt: bool = False) -> list[GradCheckResult]:
    """Compare backward() against central differences for every leaf.

    With ``max_entries`` each leaf is checked on a seeded random subset of
    its coordinates.  ``corrupt`` perturbs the analytic gradients and exists
    so callers can confirm the checker actually fails.

    A coordinate whose +step and -step evaluations land on different pieces
    of a piecewise op (argmax switch, relu/abs sign, norm guard) has no
    meaningful finite difference; it is counted in ``kinks`` and skipped.
    """
    order = topological_order(loss)
    rng = np.random.default_rng(seed)
    forward(loss)
    analytic = {k: g.copy() for k, g in zip(leaves, backward(loss, leaves.values()).values())}
    if corrupt:
        for g in analytic.values():
            g += 1e-2 * (np.abs(g) + 1.0)
    results = []
    for name, node in leaves.items():
        flat = node.value.reshape(-1)
        coords = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            coords = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        numeric = np.empty(coords.size)
        smooth = np.ones(coords.size, dtype=bool)
        for k, c in enumerate(coords):
            orig = flat[c]
            flat[c] = orig + step
            f_plus = float(forward(loss))
            sig_plus = branch_signature(order)
            flat[c] = orig - step
            f_minus = float(forward(loss))
            smooth[k] = all(_same(x, y) for x, y in zip(sig_plus, branch_signature(order)))
            flat[c] = orig
            numeric[k] = (f_plus - f_minus) / (2.0 * step)
        a = analytic[name].reshape(-1)[coords][smooth]
        numeric = numeric[smooth]
        rel = relative_error(a, numeric)
        results.append(GradCheckResult(
            name=name,
            max_rel_error=float(rel.max()) if rel.size else 0.0,
            max_abs_error=float(np.abs(a - numeric).max()) if rel.size else 0.0,
            entries=int(smooth.sum()),
            tolerance=tolerance,
            kinks=int((~smooth).sum()),
        ))
    forward(loss)
    return results
