import itertools

import numpy as np
import pytest

from heurevo import archive as arch
from heurevo.core import Population

from conftest import make_candidate


class TestBuildCentroids:
    def test_single_centroid_near_center(self):
        for seed in (0, 1, 7):
            cs = arch.build_centroids(1, 1, seed)
            assert abs(cs.centroids[0, 0] - 0.5) < 0.02

    def test_deterministic(self):
        a = arch.build_centroids(2, 4, 7)
        b = arch.build_centroids(2, 4, 7)
        assert np.array_equal(a.centroids, b.centroids)

    def test_full_size_properties(self):
        cs = arch.build_centroids(11, 25, 0)
        assert cs.centroids.shape == (25, 11)
        assert cs.centroids.min() >= 0.0 and cs.centroids.max() <= 1.0
        d = np.linalg.norm(cs.centroids[:, None] - cs.centroids[None, :], axis=2)
        np.fill_diagonal(d, np.inf)
        assert d.min() > 0.0

    def test_count_exceeding_samples_rejected(self):
        with pytest.raises(ValueError):
            arch.build_centroids(2, 50, 0, samples=10)


class TestAssignCell:
    def test_exact_centroid(self):
        cs = arch.build_centroids(3, 10, 2)
        assert arch.assign_cell(cs.centroids[7], cs) == 7

    def test_one_dimensional(self):
        cs = arch.CentroidSet(dim=1, centroids=np.array([[0.2], [0.8]]), seed=0)
        assert arch.assign_cell([0.4], cs) == 0

    def test_matches_brute_force_scan(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            cs = arch.CentroidSet(dim=4, centroids=rng.random((25, 4)), seed=0)
            v = rng.random(4)
            d = np.linalg.norm(cs.centroids - v, axis=1)
            assert arch.assign_cell(v, cs) == int(np.argmin(d))

    def test_dimension_mismatch(self):
        cs = arch.build_centroids(3, 5, 0)
        with pytest.raises(ValueError):
            arch.assign_cell([0.1, 0.2], cs)


def _norm_for_cell(cs, cell):
    return list(cs.centroids[cell])


class TestInsert:
    def setup_method(self):
        self.cs = arch.build_centroids(4, 8, 1)

    def test_empty_archive_new_cell(self):
        a = arch.Archive(self.cs)
        c = make_candidate("a", 0.5, behavior_norm=_norm_for_cell(self.cs, 3))
        assert a.insert(c) == arch.NEW_CELL
        assert a.cells[3] is c

    def test_better_replaces(self):
        a = arch.Archive(self.cs)
        a.insert(make_candidate("a", 0.5, behavior_norm=_norm_for_cell(self.cs, 3)))
        better = make_candidate("b", 0.4, behavior_norm=_norm_for_cell(self.cs, 3))
        assert a.insert(better) == arch.REPLACED
        assert a.cells[3] is better

    def test_tie_keeps_incumbent(self):
        a = arch.Archive(self.cs)
        first = make_candidate("a", 0.5, behavior_norm=_norm_for_cell(self.cs, 3))
        a.insert(first)
        assert a.insert(make_candidate("b", 0.5,
                                       behavior_norm=_norm_for_cell(self.cs, 3))) == arch.REJECTED
        assert a.cells[3] is first

    def test_unevaluated_rejected(self):
        a = arch.Archive(self.cs)
        with pytest.raises(ValueError):
            a.insert(make_candidate("a", 0.5, behavior_norm=None))

    def test_incumbent_is_min_over_history(self):
        rng = np.random.default_rng(0)
        a = arch.Archive(self.cs)
        best_by_cell = {}
        for i in range(300):
            v = rng.random(4)
            loss = float(rng.random())
            cell = arch.assign_cell(v, self.cs)
            a.insert(make_candidate(f"c{i}", loss, behavior_norm=list(v)))
            if cell not in best_by_cell or loss < best_by_cell[cell]:
                best_by_cell[cell] = loss
        for cell, cand in a.cells.items():
            assert cand.fitness.loss == best_by_cell[cell]

    def test_capacity_blocks_new_cells_only(self):
        a = arch.Archive(self.cs, capacity=1)
        a.insert(make_candidate("a", 0.5, behavior_norm=_norm_for_cell(self.cs, 3)))
        # a second distinct cell cannot open, but in-cell replacement still works
        assert a.insert(make_candidate("b", 0.4,
                                       behavior_norm=_norm_for_cell(self.cs, 5))) == arch.REJECTED
        assert a.insert(make_candidate("c", 0.3,
                                       behavior_norm=_norm_for_cell(self.cs, 3))) == arch.REPLACED

    def test_coverage_monotone(self):
        rng = np.random.default_rng(2)
        a = arch.Archive(self.cs)
        last = 0.0
        for i in range(100):
            a.insert(make_candidate(f"c{i}", float(rng.random()),
                                    behavior_norm=list(rng.random(4))))
            assert a.coverage() >= last
            last = a.coverage()
        assert a.coverage() == len(a.cells) / 8


class TestRetrieveExemplars:
    def setup_method(self):
        self.cs = arch.build_centroids(4, 8, 3)

    def _filled(self, cells_losses):
        a = arch.Archive(self.cs)
        for cell, loss in cells_losses:
            a.cells[cell] = make_candidate(f"c{cell}", loss,
                                           behavior_norm=_norm_for_cell(self.cs, cell),
                                           strategy=f"idea for cell {cell}")
        return a

    def test_single_occupied_cell(self):
        a = self._filled([(2, 0.4)])
        out = arch.retrieve_exemplars(a, Population([], 10), 2)
        assert len(out) == 1
        assert out.exemplars[0].cell_id == 2

    def test_empty_archive_falls_back_to_elites(self):
        pop = Population([make_candidate("a", 0.1), make_candidate("b", 0.2),
                          make_candidate("c", 0.3)], capacity=10)
        out = arch.retrieve_exemplars(arch.Archive(self.cs), pop, 2)
        assert [e.candidate.heuristic.id for e in out.exemplars] == ["a", "b"]
        assert all(e.cell_id == -1 for e in out.exemplars)

    def test_pair_matches_brute_force(self):
        rng = np.random.default_rng(4)
        for trial in range(30):
            cells = sorted(rng.choice(8, size=int(rng.integers(2, 6)), replace=False).tolist())
            losses = {c: float(rng.random()) for c in cells}
            a = self._filled(list(losses.items()))
            out = arch.retrieve_exemplars(a, Population([], 10), 2)
            got = [e.cell_id for e in out.exemplars]
            first = min(cells, key=lambda c: (losses[c], c))
            best = None
            for second in cells:
                if second == first:
                    continue
                d = float(np.linalg.norm(self.cs.centroids[second] - self.cs.centroids[first]))
                key = (-d, losses[second], second)
                if best is None or key < best[0]:
                    best = (key, second)
            assert got == [first, best[1]]

    def test_never_repeats_cells(self):
        a = self._filled([(i, 0.1 * i + 0.05) for i in range(6)])
        out = arch.retrieve_exemplars(a, Population([], 10), 4)
        cells = [e.cell_id for e in out.exemplars]
        assert len(set(cells)) == len(cells) == 4

    def test_summary_is_first_strategy_line(self):
        a = self._filled([(1, 0.3)])
        out = arch.retrieve_exemplars(a, Population([], 10), 1)
        assert out.exemplars[0].summary == "idea for cell 1"


class TestSnapshot:
    def test_round_trip_fields(self):
        cs = arch.build_centroids(11, 25, 0)
        a = arch.Archive(cs)
        v = [0.5] * 11
        a.insert(make_candidate("x", 0.123, behavior_norm=v, behavior_raw=v,
                                strategy="tight packing"))
        from heurevo.behavior import coordinate_names

        doc = arch.archive_snapshot(a, "bpp_online", coordinate_names("bpp_online"))
        assert doc["dim"] == 11 and len(doc["centroids"]) == 25
        (record,) = doc["cells"]
        assert record["task"] == "bpp_online"
        assert record["fitness"] == 0.123
        assert "fill_mean" in record["behavior"]
        assert record["summary"] == "tight packing"
        assert record["source"]
