import math
import random

import pytest
from hypothesis import given, strategies as st

from heurevo import core
from heurevo.core import Population

from conftest import make_candidate


class TestRelativeGap:
    def test_rounded_reference_pair(self):
        # inputs rounded to 3 decimals put the exact gap in this band (0.177%)
        assert 0.172 <= core.relative_gap(10.698, 10.679) <= 0.183

    def test_identity(self):
        assert core.relative_gap(437, 437) == 0.0

    def test_integer_reference_pair(self):
        assert core.relative_gap(114421, 106992) == pytest.approx(6.944, abs=1e-3)

    def test_zero_reference_rejected(self):
        with pytest.raises(ValueError):
            core.relative_gap(1.0, 0.0)
        with pytest.raises(ValueError):
            core.relative_gap(1.0, float("inf"))
        with pytest.raises(ValueError):
            core.relative_gap(float("nan"), 1.0)

    def test_accepts_objective_value(self):
        obj = core.ObjectiveValue(105.0, "minimize")
        assert core.relative_gap(obj, 100.0) == pytest.approx(5.0)

    @given(st.floats(-1e6, 1e6), st.floats(1e-3, 1e6))
    def test_symmetric_in_deviation_sign(self, d, ref):
        up = core.relative_gap(ref + d, ref)
        down = core.relative_gap(ref - d, ref)
        assert up == pytest.approx(down, rel=1e-12, abs=1e-12)


class TestAggregateFitness:
    def test_mean(self):
        assert core.aggregate_fitness([0.01, 0.02, 0.03]).loss == pytest.approx(0.02)

    def test_singleton(self):
        assert core.aggregate_fitness([0.5]).loss == 0.5

    def test_empty_is_distinct_error(self):
        with pytest.raises(core.EvaluationFailedError):
            core.aggregate_fitness([])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            core.aggregate_fitness([0.1, -0.1])

    @given(st.floats(0, 1e9), st.integers(1, 20))
    def test_constant_list(self, x, k):
        assert core.aggregate_fitness([x] * k).loss == pytest.approx(x)

    def test_matches_manual_mean_of_gaps(self):
        rng = random.Random(7)
        refs = [rng.uniform(10, 100) for _ in range(10)]
        objs = [r * rng.uniform(1.0, 1.5) for r in refs]
        gaps = [core.relative_gap(o, r) / 100.0 for o, r in zip(objs, refs)]
        expected = sum(gaps) / len(gaps)
        assert core.aggregate_fitness(gaps).loss == pytest.approx(expected, rel=1e-12)


class TestTopNSelect:
    def test_basic_merge(self):
        pop = Population([make_candidate("a", 0.3), make_candidate("b", 0.5)], capacity=2)
        out = core.top_n_select(pop, [make_candidate("c", 0.4)])
        assert [c.heuristic.id for c in out.members] == ["a", "c"]

    def test_empty_population(self):
        out = core.top_n_select(Population([], capacity=10), [make_candidate("x", 0.9)])
        assert [c.heuristic.id for c in out.members] == ["x"]

    def test_matches_brute_force_sort(self):
        rng = random.Random(0)
        current = Population(
            [make_candidate(f"p{i}", rng.random(), generation=rng.randrange(3))
             for i in range(7)], capacity=10)
        newcomers = [make_candidate(f"n{i}", rng.random(), generation=rng.randrange(3))
                     for i in range(8)]
        out = core.top_n_select(current, newcomers)
        union = current.members + newcomers
        expected = sorted(union, key=lambda c: (c.fitness.loss, c.heuristic.generation,
                                                c.heuristic.id))[:10]
        assert [c.heuristic.id for c in out.members] == [c.heuristic.id for c in expected]

    def test_idempotent_without_newcomers(self):
        pop = Population([make_candidate(f"c{i}", i / 10) for i in range(5)], capacity=5)
        once = core.top_n_select(pop, [])
        twice = core.top_n_select(once, [])
        assert [c.heuristic.id for c in once.members] == [c.heuristic.id for c in twice.members]

    def test_tie_break_generation_then_id(self):
        older = make_candidate("z-old", 0.5, generation=1)
        newer = make_candidate("a-new", 0.5, generation=2)
        same_gen = make_candidate("a-old", 0.5, generation=1)
        out = core.top_n_select(Population([], capacity=2), [newer, older, same_gen])
        assert [c.heuristic.id for c in out.members] == ["a-old", "z-old"]

    def test_output_sorted_ascending(self):
        rng = random.Random(3)
        out = core.top_n_select(Population([], capacity=6),
                                [make_candidate(f"c{i}", rng.random()) for i in range(12)])
        losses = [c.fitness.loss for c in out.members]
        assert losses == sorted(losses)


class TestCompositeScore:
    def test_all_best(self):
        assert core.composite_score(0, 0, 0) == 0.0

    def test_weighting(self):
        assert core.composite_score(0.5, 0.2, 0.3) == pytest.approx(1.4)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            core.composite_score(1.2, 0, 0)
        with pytest.raises(ValueError):
            core.composite_score(0, -0.1, 0)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.2))
    def test_monotone(self, a, b, c, eps):
        base = core.composite_score(a, b, c)
        assert core.composite_score(min(1, a + eps), b, c) >= base
        assert core.composite_score(a, min(1, b + eps), c) >= base
        assert core.composite_score(a, b, min(1, c + eps)) >= base


class TestBlockScores:
    # reference measurement blocks: (objective %, normalized tokens, time s)
    # rows with known composite scores
    PACKING_BLOCK = [
        ((3.86, 1.26, 4476), 5.53),
        ((3.05, 2.31, 9088), 8.91),
        ((3.12, 2.24, 4982), 7.72),
        ((2.79, 1.61, 4711), 6.04),
        ((3.01, 3.58, 12234), 12.73),
        ((2.94, 1.26, 3916), 5.05),
    ]
    ROUTING_BLOCK = [
        ((8.74, 0.33, 3298), 7.85),
        ((11.88, 0.35, 3341), 8.73),
        ((5.81, 0.36, 4868), 8.96),
        ((4.79, 0.78, 2496), 10.38),
        ((6.22, 0.63, 1089), 8.03),
        ((5.96, 0.33, 2325), 6.38),
    ]

    @pytest.mark.parametrize("block", [PACKING_BLOCK, ROUTING_BLOCK])
    def test_reconstructs_reference_scores_with_best_basis(self, block):
        # dividing each column by its block minimum reproduces every reference
        # score to its printed precision; min-max normalization does not
        rows = [r for r, _ in block]
        scores = core.block_scores(rows, basis="best")
        for got, (_, expected) in zip(scores, block):
            assert got == pytest.approx(expected, abs=0.005)

    def test_range_basis_uses_composite_score(self):
        rows = [(1.0, 10.0, 100.0), (2.0, 20.0, 300.0), (3.0, 40.0, 200.0)]
        scores = core.block_scores(rows, basis="range")
        assert scores[0] == pytest.approx(core.composite_score(0, 0, 0))
        assert scores[2] == pytest.approx(core.composite_score(1.0, 1.0, 0.5))
