"""Acceptance criteria. Run with ``pytest tests/test_acceptance.py -s`` to see one PASS/FAIL line each."""

import contextlib
import csv
import filecmp
import itertools
import math
import random
import time
from fractions import Fraction

import numpy as np

from gamepredict.analysis import aggregate, compare_pair
from gamepredict.cli import main
from gamepredict.equilibrium import mixed_ne_2x2
from gamepredict.filters import DEFAULT_CORR_LEVELS, DEFAULT_MASS_LEVELS, FilterConfig, sensitivity_grid
from gamepredict.games import GameFamily, MatrixGame2x2, PairSpec
from gamepredict.predictor import normalize
from gamepredict.prompts import JSON_SUFFIX, build_prompt, builtin_templates
from gamepredict.stats import binomial_one_sided, bootstrap_median_ci, pearson, wilcoxon_signed_rank_one_sided
from gamepredict.synthetic import write_demo
from helpers import HEADLINE_COUNTS, bargaining_dp, fixture_corpus, golden_mismatches, record, results_from_counts
from oracles import (
    binomial_tail_pascal,
    is_best_response_profile,
    pearson_direct,
    round_sig,
    select_equilibrium,
    support_enumeration_2x2,
    wilcoxon_enumerate,
)


@contextlib.contextmanager
def criterion(number: int, title: str):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"\nFAIL  criterion {number}: {title}")
        raise
    print(f"\nPASS  criterion {number}: {title} ({time.perf_counter() - start:.2f}s)")


# (wins, n, reference p, significant figures)
MAIN_CELLS = [(62, 90, "2.19e-4", 3), (57, 71, "1.3e-7", 2), (101, 106, "1.3e-24", 2),
              (105, 108, "6.5e-28", 2), (57, 62, "1.5e-12", 2), (4, 4, "0.063", 2)]

# further reference cells, given to two significant figures
TABLE_CELLS = [
    (73, 74, "4.0e-21"), (69, 73, "1.2e-16"), (62, 64, "1.1e-16"), (72, 76, "1.8e-17"), (75, 78, "2.6e-19"),
    (64, 66, "3.0e-17"), (76, 83, "4.7e-16"), (10, 17, "0.31"), (65, 73, "1.6e-12"), (57, 60, "3.1e-14"),
    (85, 88, "3.7e-22"), (76, 80, "1.4e-18"), (40, 42, "2.1e-10"), (74, 78, "5.0e-18"), (73, 82, "6.9e-14"),
    (61, 93, "1.7e-3"), (82, 86, "2.9e-20"), (33, 51, "0.024"), (4, 4, "0.063"), (31, 35, "1.7e-6"),
    (42, 44, "5.6e-11"), (36, 38, "2.7e-9"), (39, 72, "0.28"), (20, 32, "0.11"), (92, 119, "8.7e-10"),
    (93, 111, "1.1e-13"), (16, 23, "0.047"), (33, 37, "5.4e-7"), (5, 6, "0.11"), (12, 15, "0.018"),
    (29, 31, "2.3e-7"), (32, 46, "5.7e-3"), (32, 36, "9.7e-7"), (32, 33, "4.0e-9"), (43, 47, "1.4e-9"),
    (26, 32, "2.7e-4"), (34, 34, "5.8e-11"), (30, 53, "0.21"), (31, 39, "1.5e-4"), (39, 40, "3.7e-11"),
    (27, 28, "1.1e-7"), (31, 32, "7.7e-9"), (54, 55, "1.6e-15"), (6, 7, "0.063"), (27, 29, "8.1e-7"),
    (19, 20, "2.0e-5"), (26, 28, "1.5e-6"), (27, 27, "7.5e-9"), (56, 57, "4.0e-16"), (93, 116, "1.8e-11"),
    (10, 11, "5.9e-3"),
]


def test_criterion_1_binomial_matches_reference_values():
    with criterion(1, f"binomial p reproduces {len(MAIN_CELLS) + len(TABLE_CELLS)} reference cells"):
        start = time.perf_counter()
        cells = [(k, n, p, d) for k, n, p, d in MAIN_CELLS] + [(k, n, p, 2) for k, n, p in TABLE_CELLS]
        for k, n, expected, digits in cells:
            p = binomial_one_sided(k, n).p_value
            assert round_sig(p, digits) == round_sig(float(expected), digits), (k, n, p, expected)
            assert math.isclose(p, float(binomial_tail_pascal(k, n)), rel_tol=1e-12)
        assert binomial_one_sided(4, 4).p_value == 0.0625
        assert round_sig(0.0625, 1) == round_sig(0.06, 1)
        assert len(TABLE_CELLS) >= 10
        assert time.perf_counter() - start < 1.0


def test_criterion_2_headline_aggregate():
    with criterion(2, "per-family counts aggregate to 213:22 with p < 1e-40"):
        start = time.perf_counter()
        results = results_from_counts(HEADLINE_COUNTS, filtered_per_family=2)
        rows = {r.key: r for r in aggregate(results, "family")}
        assert {k: (rows[k].wins_base, rows[k].wins_aligned) for k in HEADLINE_COUNTS} == HEADLINE_COUNTS
        (overall,) = aggregate(results, "overall")
        assert (overall.wins_base, overall.wins_aligned) == (213, 22)
        assert overall.binomial_p < 1e-40 and overall.direction == "base"
        assert round(overall.wins_base / overall.wins_aligned, 1) == 9.7
        assert time.perf_counter() - start < 1.0


def test_criterion_3_equilibrium_oracle():
    with criterion(3, "2x2 equilibrium solver agrees with support enumeration on 1000 games"):
        start = time.perf_counter()
        rng = random.Random(7)
        for _ in range(1000):
            a = tuple(tuple(rng.uniform(-10, 10) for _ in range(2)) for _ in range(2))
            b = tuple(tuple(rng.uniform(-10, 10) for _ in range(2)) for _ in range(2))
            ne = mixed_ne_2x2(MatrixGame2x2(a, b, "dilemma"))
            p, q = select_equilibrium(support_enumeration_2x2(a, b))
            assert abs(ne.row_action1_prob - p) <= 1e-9 and abs(ne.col_action1_prob - q) <= 1e-9
            assert is_best_response_profile(a, b, ne.row_action1_prob, ne.col_action1_prob)
        assert time.perf_counter() - start < 5.0


WILCOXON_FIXTURES = [
    [0.3, -0.1, 0.2, 0.25, -0.05],
    [0.1, 0.1, -0.1, 0.2, 0.2, 0.3],
    [-0.4, -0.3, 0.1, -0.2, -0.5, 0.05, -0.1],
    [1, 2, 3, 4, 5, 6, 7, 8],
    [0.5, -0.5, 0.5, -0.5, 1.0, -1.0, 0.25, 0.75, -0.25],
    [0.01 * i * (-1) ** i for i in range(1, 11)],
    [0.2, 0.2, 0.2, -0.2, 0.4, 0.4, -0.4, 0.6, 0.1, -0.1, 0.3],
    [(-1) ** (i // 3) * (i % 4 + 1) * 0.1 for i in range(12)],
]


def test_criterion_4_statistics_oracles():
    with criterion(4, "pearson, exact Wilcoxon and bootstrap match their oracles"):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            n = int(rng.integers(3, 101))
            x = rng.normal(size=n)
            y = 0.5 * x + rng.normal(size=n)
            assert abs(pearson(x, y).r - pearson_direct(x, y)) <= 1e-12
        fixtures = WILCOXON_FIXTURES + [list(rng.normal(0.1, 1, size=n).round(2)) for n in range(1, 13)]
        for diffs in fixtures:
            diffs = [d for d in diffs if d != 0]
            res = wilcoxon_signed_rank_one_sided(diffs)
            p, direction = wilcoxon_enumerate(diffs)
            assert res.direction == direction
            assert abs(Fraction(res.p_value) - p) <= Fraction(1, 10**12), diffs
        lo, hi = bootstrap_median_ci([0.37] * 25, resamples=1000, seed=5)
        assert lo == hi == 0.37


def test_criterion_5_normalization_properties():
    with criterion(5, "normalization properties on 10000 random mass vectors"):
        rng = np.random.default_rng(3)
        binary, ternary = ("accept", "reject"), ("AcceptOffer", "RejectOffer", "DealWithJohn")
        for i in range(10_000):
            labels = ternary if i % 2 else binary
            raw = rng.random(len(labels)) * (rng.random(len(labels)) > 0.1)
            masses = dict(zip(labels, map(float, raw)))
            p = normalize(masses, labels[0])
            total = math.fsum(masses.values())
            if total == 0:
                assert p is None
                continue
            assert 0.0 <= p <= 1.0
            scale = float(rng.uniform(1e-3, 1.0))
            assert math.isclose(normalize({k: v * scale for k, v in masses.items()}, labels[0]), p,
                                rel_tol=1e-9, abs_tol=1e-12)
            others = sum(normalize(masses, l) for l in labels[1:])
            assert math.isclose(p + others, 1.0, rel_tol=1e-9)
            if labels is ternary:
                # the outside option counts against acceptance, exactly like a rejection
                assert math.isclose(p, masses["AcceptOffer"] / total, rel_tol=1e-12)
        assert bargaining_dp(choice="reject").human_target == 0.0


def _synthetic_pair_results(seed: int):
    rng = random.Random(seed)
    dps = [bargaining_dp(f"bg-{i}", "accept" if i % 2 else "reject") for i in range(20)]
    results = []
    for pid in range(1, 61):
        mass_b, mass_a = rng.choice([0.4, 0.75, 0.8, 0.85, 0.95]), rng.choice([0.55, 0.8, 0.9, 0.99])
        sb, sa = rng.uniform(-0.2, 0.8), rng.uniform(-0.2, 0.8)
        def preds(strength, mass):
            return [record(dp.id, min(1, max(0, 0.5 + strength * (dp.human_target - 0.5) + rng.gauss(0, 0.15))), mass)
                    for dp in dps]
        results.append(compare_pair(preds(sb, mass_b), preds(sa, mass_a), dps, FilterConfig(),
                                    PairSpec(pid, f"b{pid}", f"a{pid}", "x", 7.0)))
    return results


def test_criterion_6_filters_and_sensitivity():
    with criterion(6, "(0.8, 0.3) grid cell equals the headline result; grids are monotone"):
        results = _synthetic_pair_results(1) + [
            type(r)(r.pair, "negotiation", *list(r.__dict__.values())[2:]) for r in _synthetic_pair_results(2)]
        for fam in ("bargaining", "negotiation"):
            fam_results = [r for r in results if r.family == fam]
            (headline,) = aggregate(fam_results, "overall")
            grid = sensitivity_grid([r.stats() for r in fam_results], family=fam)
            cell = grid.cell(0.8, 0.3)
            assert (cell.wins_base, cell.wins_aligned, cell.ties) == (headline.wins_base, headline.wins_aligned,
                                                                        headline.ties)
            assert cell.p_value == headline.binomial_p
            assert 0 < cell.n_included < len(fam_results)
            for i, j in itertools.product(range(len(DEFAULT_MASS_LEVELS)), range(len(DEFAULT_CORR_LEVELS))):
                n = grid.cells[i][j].n_included
                if i + 1 < len(DEFAULT_MASS_LEVELS):
                    assert grid.cells[i + 1][j].n_included <= n
                if j + 1 < len(DEFAULT_CORR_LEVELS):
                    assert grid.cells[i][j + 1].n_included <= n


def _demo_run(root, seed=0):
    config = write_demo(root, seed=seed)
    for fam in GameFamily:
        assert main(["predict", "-c", str(config), "--family", fam.value]) == 0
    assert main(["evaluate", "-c", str(config)]) == 0
    return root / "out" / "report"


def test_criterion_7_end_to_end_mock_recovery(tmp_path, capsys):
    with criterion(7, "mock pipeline recovers the truth-emitting model in every family"):
        start = time.perf_counter()
        a, b = _demo_run(tmp_path / "run1"), _demo_run(tmp_path / "run2")
        capsys.readouterr()
        names = sorted(p.name for p in a.iterdir())
        assert sorted(p.name for p in b.iterdir()) == names
        _, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
        assert mismatch == [] and errors == []
        n_decisions = sum(1 for p in (tmp_path / "run1" / "data").glob("*.jsonl") for _ in p.open())
        assert n_decisions == 500
        with (a / "per_pair.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert {r["family"] for r in rows} == {f.value for f in GameFamily}
        for r in rows:
            truth_is_base = "truth" in r["base_model"]
            r_a = float(r["base_r"] if truth_is_base else r["aligned_r"])
            r_b = float(r["aligned_r"] if truth_is_base else r["base_r"])
            assert r_a >= 0.8 and r_b <= 0.3, r
            assert r["included"] == "true"
            assert r["winner"] == ("base" if truth_is_base else "aligned")
        assert time.perf_counter() - start < 30.0


def test_criterion_8_prompt_golden_and_suffixes():
    with criterion(8, "crossing cells match golden files; suffixes are exact"):
        assert golden_mismatches() == []
        tmpl = builtin_templates()["chatml"]
        for dp in fixture_corpus():
            for fmt in ("standard", "chat"):
                assert build_prompt(dp, "standard", fmt, tmpl).text.endswith('{"decision": "')
        assert JSON_SUFFIX == '{"decision": "'
        simplified = build_prompt(bargaining_dp(), "simplified").text
        assert simplified.endswith("\nAnswer: ")
