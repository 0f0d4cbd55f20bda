"""Independent reference implementations used only by tests.

Each oracle takes a deliberately different route from the library code: Pascal-triangle
recurrences instead of math.comb, full sign-flip enumeration instead of a counting DP,
support enumeration instead of closed-form equilibrium formulas.
"""

from __future__ import annotations

import itertools
import math
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

import numpy as np


def binomial_tail_pascal(k: int, n: int) -> Fraction:
    """P(X >= k), X ~ Bin(n, 1/2), from a Pascal-triangle row."""
    row = [1]
    for _ in range(n):
        row = [a + b for a, b in zip([0] + row, row + [0])]
    return Fraction(sum(row[k:]), 2**n)


def binomial_tail_enumerate(k: int, n: int) -> Fraction:
    """Same tail by listing all 2^n outcomes (small n only)."""
    hits = sum(1 for bits in itertools.product((0, 1), repeat=n) if sum(bits) >= k)
    return Fraction(hits, 2**n)


def round_sig(x: float, digits: int) -> Decimal:
    """Round half up to ``digits`` significant figures, the way printed tables do."""
    d = Decimal(repr(x))
    exp = d.adjusted() - digits + 1
    return d.quantize(Decimal(1).scaleb(exp), rounding=ROUND_HALF_UP)


def pearson_direct(x, y) -> float:
    """Textbook formula with plain Python sums."""
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def midranks_naive(values) -> list[float]:
    out = []
    for v in values:
        less = sum(1 for w in values if w < v)
        equal = sum(1 for w in values if w == v)
        out.append(less + (equal + 1) / 2)
    return out


def wilcoxon_enumerate(diffs) -> tuple[Fraction, str]:
    """One-sided signed-rank p by flipping every sign: P(max-side rank sum >= observed)."""
    d = [x for x in diffs if x != 0]
    if not d:
        return Fraction(1), "base"
    ranks = midranks_naive([abs(x) for x in d])
    w_plus = sum(r for r, x in zip(ranks, d) if x > 0)
    w_minus = sum(r for r, x in zip(ranks, d) if x < 0)
    direction = "base" if w_plus >= w_minus else "aligned"
    w = max(w_plus, w_minus)
    hits = 0
    for signs in itertools.product((1, -1), repeat=len(d)):
        s = sum(r for r, sg in zip(ranks, signs) if sg > 0)
        if s >= w - 1e-9:
            hits += 1
    return Fraction(hits, 2 ** len(d)), direction


def support_enumeration_2x2(a, b) -> list[tuple[float, float]]:
    """All Nash equilibria of a generic 2x2 bimatrix game as (P(row action 1), P(col action 1))."""
    A = np.asarray(a, dtype=float)
    B = np.asarray(b, dtype=float)
    eqs: list[tuple[float, float]] = []
    for r, c in itertools.product((0, 1), repeat=2):
        if A[r, c] >= A[1 - r, c] and B[r, c] >= B[r, 1 - c]:
            eqs.append((1.0 - r, 1.0 - c))
    # full support: row mix x makes the column player indifferent, col mix y the row player
    try:
        x = np.linalg.solve(np.array([[B[0, 0] - B[0, 1], B[1, 0] - B[1, 1]], [1.0, 1.0]]), np.array([0.0, 1.0]))
        y = np.linalg.solve(np.array([[A[0, 0] - A[1, 0], A[0, 1] - A[1, 1]], [1.0, 1.0]]), np.array([0.0, 1.0]))
    except np.linalg.LinAlgError:
        return eqs
    if 0 < x[0] < 1 and 0 < y[0] < 1:
        eqs.append((float(x[0]), float(y[0])))
    return eqs


def select_equilibrium(eqs: list[tuple[float, float]]) -> tuple[float, float]:
    """The single equilibrium when unique, otherwise the fully mixed one."""
    if len(eqs) == 1:
        return eqs[0]
    mixed = [e for e in eqs if 0 < e[0] < 1 and 0 < e[1] < 1]
    assert len(mixed) == 1, eqs
    return mixed[0]


def is_best_response_profile(a, b, p: float, q: float, tol: float = 1e-9) -> bool:
    """Each player's mixture puts weight only on actions that are best responses."""
    A = np.asarray(a, dtype=float)
    B = np.asarray(b, dtype=float)
    row_u = A @ np.array([q, 1 - q])
    col_u = np.array([p, 1 - p]) @ B
    ok_row = all(row_u[i] >= row_u.max() - tol for i, w in enumerate((p, 1 - p)) if w > tol)
    ok_col = all(col_u[j] >= col_u.max() - tol for j, w in enumerate((q, 1 - q)) if w > tol)
    return ok_row and ok_col
