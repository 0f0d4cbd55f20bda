"""Nash-equilibrium point prediction for one-shot 2x2 games.

Selection rule, in order:

1. a player with a strictly dominant action -> the dominance-solvable pure outcome;
2. otherwise the interior mixed equilibrium, when it lies strictly inside (0, 1)^2
   (this is the choice made for games with several pure equilibria);
3. otherwise the unique pure equilibrium.

Probabilities always refer to each player's *first* action.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .games import MatrixGame2x2
from .stats import CorrelationResult, pearson


class DegenerateGameError(ValueError):
    pass


@dataclass(frozen=True)
class NePrediction:
    row_action1_prob: float
    col_action1_prob: float
    kind: str  # interior_mixed | pure_dominant | pure_unique


def _strict_dominant_row(a) -> int | None:
    if a[0][0] > a[1][0] and a[0][1] > a[1][1]:
        return 0
    if a[1][0] > a[0][0] and a[1][1] > a[0][1]:
        return 1
    return None


def _strict_dominant_col(b) -> int | None:
    if b[0][0] > b[0][1] and b[1][0] > b[1][1]:
        return 0
    if b[0][1] > b[0][0] and b[1][1] > b[1][0]:
        return 1
    return None


def _as_prob(action: int) -> float:
    return 1.0 if action == 0 else 0.0


def mixed_ne_2x2(game: MatrixGame2x2) -> NePrediction:
    a = game.row_payoffs
    b = game.col_payoffs

    row_dom = _strict_dominant_row(a)
    col_dom = _strict_dominant_col(b)
    if row_dom is not None or col_dom is not None:
        if row_dom is not None and col_dom is not None:
            return NePrediction(_as_prob(row_dom), _as_prob(col_dom), "pure_dominant")
        if row_dom is not None:
            r = row_dom
            if b[r][0] == b[r][1]:
                raise DegenerateGameError(f"column player is indifferent against dominant row action {r + 1}")
            c = 0 if b[r][0] > b[r][1] else 1
        else:
            c = col_dom
            if a[0][c] == a[1][c]:
                raise DegenerateGameError(f"row player is indifferent against dominant column action {c + 1}")
            r = 0 if a[0][c] > a[1][c] else 1
        return NePrediction(_as_prob(r), _as_prob(c), "pure_dominant")

    # row mixes to make the column player indifferent, and vice versa
    den_p = b[0][0] - b[0][1] - b[1][0] + b[1][1]
    den_q = a[0][0] - a[1][0] - a[0][1] + a[1][1]
    if den_p != 0 and den_q != 0:
        p = (b[1][1] - b[1][0]) / den_p
        q = (a[1][1] - a[0][1]) / den_q
        if 0.0 < p < 1.0 and 0.0 < q < 1.0:
            return NePrediction(p, q, "interior_mixed")

    pure = pure_equilibria(game)
    if len(pure) == 1:
        r, c = pure[0]
        return NePrediction(_as_prob(r), _as_prob(c), "pure_unique")
    zero = [name for name, den in (("row-mixing denominator", den_p), ("column-mixing denominator", den_q)) if den == 0]
    detail = f"zero {' and '.join(zero)}" if zero else "no interior solution"
    raise DegenerateGameError(f"degenerate game: {detail}, {len(pure)} pure equilibria")


def pure_equilibria(game: MatrixGame2x2) -> list[tuple[int, int]]:
    """All pure profiles (row action, col action) that are mutual weak best responses."""
    a = game.row_payoffs
    b = game.col_payoffs
    out = []
    for r in (0, 1):
        for c in (0, 1):
            if a[r][c] >= a[1 - r][c] and b[r][c] >= b[r][1 - c]:
                out.append((r, c))
    return out


def ne_alignment(predictions: Sequence[float], ne: Sequence[float]) -> CorrelationResult:
    """Correlation between per-game model predictions and the NE action-1 probability."""
    if len(predictions) != len(ne):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(ne)} NE values")
    return pearson(predictions, ne)


def closer_to_ne(base_r: float | None, aligned_r: float | None) -> str:
    """Which side's predictions correlate more with equilibrium: "base", "aligned" or "tie"."""
    if base_r is None or aligned_r is None:
        raise ValueError("closer_to_ne needs both correlations defined")
    if base_r > aligned_r:
        return "base"
    if aligned_r > base_r:
        return "aligned"
    return "tie"
