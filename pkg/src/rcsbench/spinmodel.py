"""Second-moment spin model for brickwork Haar circuits on a ring.

E|<0|C^dag P C|0>|^2 over random circuits maps to a partition function of
classical spins, one per two-qubit gate. Spin 1 marks a gate carrying the
error Pauli at the top layer; spin 0 is the reference value. Contraction
runs from the top (error) layer down to layer 1 with a three-body triangle
weight per step; the bottom row is summed freely.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = [
    "MAX_SPIN_QUBITS",
    "triangle_weight",
    "partition_function",
    "error_gates_for_support",
    "expected_overlap_sq",
    "domain_wall_bound",
    "first_order_fidelity",
    "haar_limit",
]

MAX_SPIN_QUBITS = 28

_PLUS_COEF = 4.0 / 15.0
_MINUS_COEF = -1.0 / 15.0
_WALL = 2.0 / 5.0

_TRIANGLE = np.zeros((2, 2, 2))
_TRIANGLE[0, 0, 0] = 1.0
_TRIANGLE[1, 1, 1] = 1.0
_TRIANGLE[0, 1, :] = _WALL
_TRIANGLE[1, 0, :] = _WALL


def triangle_weight(top_left: int, top_right: int, bottom: int) -> float:
    """Three-body weight: equal top spins force the bottom spin; unequal cost 2/5."""
    for s in (top_left, top_right, bottom):
        if s not in (0, 1):
            raise ValueError(f"spin {s} not in {{0,1}}")
    return float(_TRIANGLE[top_left, top_right, bottom])


def _canonical(boundary: tuple[int, ...]) -> tuple[int, ...]:
    """Minimum over ring rotations, reflection, and global spin flip."""
    m = len(boundary)
    best = None
    for flip in (False, True):
        base = tuple(1 - s for s in boundary) if flip else boundary
        for rev in (False, True):
            seq = base[::-1] if rev else base
            for r in range(m):
                cand = seq[r:] + seq[:r]
                if best is None or cand < best:
                    best = cand
    return best


@lru_cache(maxsize=4096)
def _partition_cached(m: int, l: int, boundary: tuple[int, ...]) -> float:
    if m == 1:
        # one gate per layer: the triangle degenerates to (t, t, b), forcing b = t
        return 1.0
    weights = np.zeros((2,) * m)
    weights[boundary] = 1.0
    t_labels = list(range(m))
    s_label = m
    b_labels = [m + 1 + j for j in range(m)]
    eye = np.eye(2)
    for _ in range(l - 1):
        cur = np.einsum(weights, t_labels, eye, [t_labels[0], s_label], t_labels + [s_label])
        labels = t_labels + [s_label]
        for j in range(m - 1):
            out = [x for x in labels if x != t_labels[j]] + [b_labels[j]]
            cur = np.einsum(cur, labels, _TRIANGLE, [t_labels[j], t_labels[j + 1], b_labels[j]], out)
            labels = out
        out = [x for x in labels if x not in (t_labels[m - 1], s_label)] + [b_labels[m - 1]]
        cur = np.einsum(cur, labels, _TRIANGLE, [t_labels[m - 1], s_label, b_labels[m - 1]], out)
        weights = cur.transpose([out.index(b) for b in b_labels])
    return float(weights.sum())


def partition_function(n: int, l: int, boundary: tuple[int, ...]) -> float:
    """Exact Z(n, l; boundary) on the ring; boundary has one spin per top gate."""
    if n % 2 != 0:
        raise ValueError(f"n={n} must be even on the ring")
    if n > MAX_SPIN_QUBITS:
        raise ValueError(f"n={n} exceeds spin-model limit {MAX_SPIN_QUBITS}")
    if l < 1:
        raise ValueError(f"l={l} must be >= 1")
    m = n // 2
    boundary = tuple(int(s) for s in boundary)
    if len(boundary) != m:
        raise ValueError(f"boundary length {len(boundary)} != n/2 = {m}")
    if any(s not in (0, 1) for s in boundary):
        raise ValueError("boundary spins must be 0 or 1")
    return _partition_cached(m, l, _canonical(boundary))


def error_gates_for_support(n: int, l: int, support: tuple[int, ...]) -> tuple[int, ...]:
    """Top-layer gate positions overlapping the support (layer-l brickwork parity)."""
    m = n // 2
    gates = set()
    for q in support:
        if not 0 <= q < n:
            raise ValueError(f"qubit {q} out of range for n={n}")
        if l % 2 == 1:
            gates.add(q // 2)
        elif q % 2 == 1:
            gates.add((q - 1) // 2)
        else:
            gates.add(((q - 2) // 2) % m)
    return tuple(sorted(gates))


def expected_overlap_sq(n: int, l: int, error_gates: tuple[int, ...]) -> float:
    """E over RQC(n,l) of |<0|C^dag P C|0>|^2 for a Pauli hitting the given gates.

    Each error gate carries the affine boundary rule 4/15 at spin 1 and -1/15
    at spin 0; all other gates are fixed at spin 0.
    """
    m = n // 2
    gates = tuple(sorted(set(int(g) for g in error_gates)))
    if not gates:
        raise ValueError("at least one error gate required")
    if any(g < 0 or g >= m for g in gates):
        raise ValueError(f"gate index out of range 0..{m-1}")
    k = len(gates)
    if k > 8:
        raise ValueError(f"{k} error gates need 2^{k} partition functions; limit is 8")
    total = 0.0
    for bits in range(2**k):
        boundary = [0] * m
        coef = 1.0
        for j, g in enumerate(gates):
            s = (bits >> j) & 1
            boundary[g] = s
            coef *= _PLUS_COEF if s == 1 else _MINUS_COEF
        total += coef * partition_function(n, l, tuple(boundary))
    return total


def domain_wall_bound(l: int) -> float:
    """(4/5)^(2(l-1)): weight of the two shortest domain walls."""
    if l < 1:
        raise ValueError(f"l={l} must be >= 1")
    return (4.0 / 5.0) ** (2 * (l - 1))


def haar_limit(n: int) -> float:
    """Deep-circuit value 1/(2^n + 1) of the expected squared overlap."""
    return 1.0 / (2.0**n + 1.0)


def first_order_fidelity(n: int, d: int, eps: float) -> tuple[float, float]:
    """(F0, EF1) of the fidelity expansion for i.i.d. per-qubit X errors.

    F0 = (1-eps)^(n d); EF1 sums the single-error overlap over all n d
    locations, n per layer by ring symmetry.
    """
    if eps == 0.0:
        return 1.0, 0.0
    f0 = (1.0 - eps) ** (n * d)
    acc = 0.0
    for l in range(1, d + 1):
        gates = error_gates_for_support(n, l, (0,))
        acc += expected_overlap_sq(n, l, gates)
    ef1 = n * eps * (1.0 - eps) ** (n * d - 1) * acc
    return f0, ef1
