"""Pair-level exclusion filters and the threshold sensitivity grid.

Both thresholds are satisfied at equality. A threshold of ``None`` means "no filter",
except that a pair still needs at least one defined correlation to be compared.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .stats import binomial_for_wins

DEFAULT_MASS_LEVELS: tuple[float | None, ...] = (None, 0.5, 0.6, 0.7, 0.8, 0.9)
DEFAULT_CORR_LEVELS: tuple[float | None, ...] = (None, 0.1, 0.2, 0.3, 0.4, 0.5)


@dataclass(frozen=True)
class FilterConfig:
    mass_threshold: float | None = 0.8
    min_corr_threshold: float | None = 0.3

    def __post_init__(self) -> None:
        if self.mass_threshold is not None and not 0.0 <= self.mass_threshold <= 1.0:
            raise ValueError(f"mass_threshold must be in [0, 1], got {self.mass_threshold}")
        if self.min_corr_threshold is not None and not -1.0 <= self.min_corr_threshold <= 1.0:
            raise ValueError(f"min_corr_threshold must be in [-1, 1], got {self.min_corr_threshold}")


@dataclass(frozen=True)
class FilterOutcome:
    pair_id: int
    family: str
    mass_pass: bool
    corr_pass: bool

    @property
    def included(self) -> bool:
        return self.mass_pass and self.corr_pass


def mass_filter(base_mass: float, aligned_mass: float, cfg: FilterConfig) -> bool:
    """Pass iff both models put at least ``mass_threshold`` average mass on decision tokens."""
    if cfg.mass_threshold is None:
        return True
    return min(base_mass, aligned_mass) >= cfg.mass_threshold


def min_corr_filter(base_r: float | None, aligned_r: float | None, cfg: FilterConfig) -> bool:
    """Pass unless both correlations fall below the threshold. Undefined counts as below."""
    defined = [r for r in (base_r, aligned_r) if r is not None]
    if not defined:
        return False
    if cfg.min_corr_threshold is None:
        return True
    return max(defined) >= cfg.min_corr_threshold


def apply_filters(pair_id: int, family: str, base_mass: float, aligned_mass: float,
                  base_r: float | None, aligned_r: float | None, cfg: FilterConfig) -> FilterOutcome:
    return FilterOutcome(
        pair_id=pair_id,
        family=family,
        mass_pass=mass_filter(base_mass, aligned_mass, cfg),
        corr_pass=min_corr_filter(base_r, aligned_r, cfg),
    )


def decide_winner(base_r: float | None, aligned_r: float | None) -> str:
    """"base", "aligned" or "tie"; an undefined correlation loses to a defined one."""
    b = float("-inf") if base_r is None else base_r
    a = float("-inf") if aligned_r is None else aligned_r
    if b > a:
        return "base"
    if a > b:
        return "aligned"
    return "tie"


@dataclass(frozen=True)
class PairStats:
    pair_id: int
    family: str
    base_mass: float
    aligned_mass: float
    base_r: float | None
    aligned_r: float | None


@dataclass(frozen=True)
class GridCell:
    mass_level: float | None
    corr_level: float | None
    wins_base: int
    wins_aligned: int
    ties: int
    p_value: float | None
    direction: str | None

    @property
    def n_included(self) -> int:
        return self.wins_base + self.wins_aligned + self.ties


@dataclass(frozen=True)
class SensitivityGrid:
    family: str
    mass_levels: tuple[float | None, ...]
    corr_levels: tuple[float | None, ...]
    cells: tuple[tuple[GridCell, ...], ...]  # rows = mass levels, columns = corr levels

    def cell(self, mass_level: float | None, corr_level: float | None) -> GridCell:
        return self.cells[self.mass_levels.index(mass_level)][self.corr_levels.index(corr_level)]


def count_wins(stats: Sequence[PairStats], cfg: FilterConfig) -> tuple[int, int, int]:
    wins_base = wins_aligned = ties = 0
    for s in stats:
        outcome = apply_filters(s.pair_id, s.family, s.base_mass, s.aligned_mass, s.base_r, s.aligned_r, cfg)
        if not outcome.included:
            continue
        w = decide_winner(s.base_r, s.aligned_r)
        if w == "base":
            wins_base += 1
        elif w == "aligned":
            wins_aligned += 1
        else:
            ties += 1
    return wins_base, wins_aligned, ties


def sensitivity_grid(
    pair_stats: Sequence[PairStats],
    mass_levels: Sequence[float | None] = DEFAULT_MASS_LEVELS,
    corr_levels: Sequence[float | None] = DEFAULT_CORR_LEVELS,
    family: str = "all",
) -> SensitivityGrid:
    """Re-filter and recount wins at every (mass, min-corr) threshold combination."""
    if not mass_levels or not corr_levels:
        raise ValueError("grid levels must be nonempty")
    rows = []
    for m in mass_levels:
        row = []
        for c in corr_levels:
            wb, wa, ties = count_wins(pair_stats, FilterConfig(m, c))
            test = binomial_for_wins(wb, wa)
            row.append(GridCell(m, c, wb, wa, ties,
                                None if test is None else test.p_value,
                                None if test is None else test.direction))
        rows.append(tuple(row))
    return SensitivityGrid(family, tuple(mass_levels), tuple(corr_levels), tuple(rows))
