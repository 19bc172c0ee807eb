import numpy as np
import pytest
from hypothesis import given, strategies as st

from brute import cut
from rebalance_checks import rebalance_violations
from strategies import graphs
from strictpart import (Coloring, ExhaustiveOracle, GreedyOracle, ParameterError, SubgraphView,
                        WeightedGraph, boundary_cost, p_norm)
from strictpart.grid import GridGraph, GridOracle
from strictpart.instances import random_bounded_degree
from strictpart.multibalance import (BoundaryReport, MultiBalanceReport, RebalanceTrace,
                                     balance_boundary, bichromatic_measure, holder_conjugate,
                                     move_rebalance, multibalance, multibalcut, multibalcut_bounds)
from strictpart.oracles import split_cost_measure


class Recording(ExhaustiveOracle):
    """Exhaustive oracle that remembers the realized cut ratio of every call."""

    def __init__(self, p=2.0):
        super().__init__(p=p)
        self.ratio = 0.0

    def split(self, view, weights, target):
        U = super().split(view, weights, target)
        norm = p_norm(view.costs, self.p)
        c = boundary_cost(view, U)
        if norm > 0:
            self.ratio = max(self.ratio, c / norm)
        return U


def path(n):
    return WeightedGraph(n, [(i, i + 1) for i in range(n - 1)])


class TestMultibalcut:
    def test_isolated_vertices(self):
        g = WeightedGraph(4)
        A, B = multibalcut(SubgraphView(g), ExhaustiveOracle(), [np.ones(4)])
        assert (A.size, B.size) == (2, 2)

    def test_path_of_eight_two_measures(self):
        g = path(8)
        oracle = Recording()
        A, B = multibalcut(SubgraphView(g), oracle, [np.ones(8), np.ones(8)])
        for cls in (A, B):
            assert cls.size <= 7.5 and cls.size <= 5
        assert boundary_cost(g, A) <= 3 * oracle.ratio * p_norm(g.costs, 2) + 1e-9

    def test_empty_view(self):
        g = path(3)
        A, B = multibalcut(SubgraphView(g, []), ExhaustiveOracle(), [np.ones(3)])
        assert A.size == B.size == 0

    def test_needs_a_measure(self):
        with pytest.raises(ParameterError):
            multibalcut(SubgraphView(path(2)), ExhaustiveOracle(), [])

    @given(graphs(max_n=9), st.integers(1, 3), st.data())
    def test_bounds_with_realized_quality(self, g, r, data):
        stack = [np.asarray(data.draw(st.lists(st.integers(0, 6), min_size=g.n, max_size=g.n)),
                            dtype=float) for _ in range(r)]
        oracle = Recording()
        A, B = multibalcut(SubgraphView(g), oracle, stack)
        assert sorted(A.tolist() + B.tolist()) == list(range(g.n))
        for j, phi in enumerate(stack, start=1):
            frac = 0.5 if j == 1 else 0.75
            bound = frac * (phi.sum() + 2 ** (r - j) * phi.max())
            assert phi[A].sum() <= bound + 1e-9 and phi[B].sum() <= bound + 1e-9
        edges = g.edges.tolist()
        assert cut(edges, g.costs.tolist(), A.tolist()) <= (
            (2 ** r - 1) * oracle.ratio * p_norm(g.costs, 2) + 1e-9)
        assert not multibalcut_bounds(SubgraphView(g), stack, A, B, oracle.ratio, 2.0)


class TestMoveRebalance:
    def isolated(self, sizes):
        n = sum(sizes)
        colors = np.repeat(np.arange(len(sizes)), sizes)
        return WeightedGraph(n), colors

    def test_balanced_input_unchanged(self):
        g, colors = self.isolated([4, 4, 4, 4])
        chi = Coloring(g, 4, colors)
        out = move_rebalance(g, ExhaustiveOracle(), chi, np.ones(g.n))
        assert out == chi

    def test_below_heavy_threshold_unchanged(self):
        g, colors = self.isolated([13, 1, 1, 1])
        tr = RebalanceTrace()
        out = move_rebalance(g, GreedyOracle(), Coloring(g, 4, colors), np.ones(16), trace=tr)
        assert tr.heavy_threshold == 14 and tr.heavy_moves == 0
        assert out.class_weights.tolist() == [13, 1, 1, 1]

    def test_one_heavy_move(self):
        g = WeightedGraph(16)
        colors = np.array([0] * 14 + [1, 2])
        tr = RebalanceTrace()
        out = move_rebalance(g, ExhaustiveOracle(), Coloring(g, 4, colors), np.ones(16), trace=tr)
        assert tr.heavy_moves == 1
        assert 4 <= out.class_weights[0] <= 5
        assert sorted(tr.children[0]) == [1, 2]
        assert not rebalance_violations(tr, np.ones(16), 16)

    @given(st.integers(4, 10), st.integers(0, 2 ** 31 - 1), st.integers(0, 2))
    def test_traced_invariants_on_skewed_colorings(self, k, seed, extra):
        rng = np.random.default_rng(seed)
        g = random_bounded_degree(120, 4, seed=seed).graph
        colors = np.where(rng.random(g.n) < 0.8, 0, rng.integers(0, k, g.n))
        chi = Coloring(g, k, colors)
        psi = g.weights
        others = [rng.random(g.n) for _ in range(extra)]
        tr = RebalanceTrace()
        move_rebalance(g, GreedyOracle(), chi, psi, others, trace=tr)
        if chi.class_weights.max() >= tr.heavy_threshold:
            assert tr.heavy_moves >= 1
        assert not tr.violations
        assert not rebalance_violations(tr, psi, g.n)


class TestMultibalance:
    def test_single_class(self):
        g = path(5)
        assert multibalance(g, GreedyOracle(), [g.weights], 1).colors.tolist() == [0] * 5

    def test_no_measures_bisects(self):
        g = path(16)
        rep = MultiBalanceReport()
        chi = multibalance(g, GreedyOracle(), [], 4, report=rep)
        assert sorted(chi.class_weights.tolist()) == [4, 4, 4, 4]
        assert np.isfinite(rep.avg_boundary) and rep.avg_boundary <= 2

    def test_weight_and_split_cost(self):
        g = random_bounded_degree(100, 5, seed=11).graph
        pi = split_cost_measure(g).values
        rep = MultiBalanceReport()
        chi = multibalance(g, GreedyOracle(), [g.weights, pi], 6, report=rep)
        for phi, bound in zip([g.weights, pi], rep.bounds):
            assert Coloring(g, 6, chi.colors, phi).class_weights.max() <= bound + 1e-9
        assert rep.reference == pytest.approx(holder_conjugate(2) * 6 ** -0.5 * p_norm(g.costs, 2))


class TestBalanceBoundary:
    def test_trivial_cases(self):
        g = path(6)
        assert balance_boundary(g, GreedyOracle(), [g.weights], 1).class_boundary.max() == 0
        e = WeightedGraph(7, weights=np.arange(1, 8, dtype=float))
        chi = balance_boundary(e, GreedyOracle(), [e.weights], 3)
        assert chi.class_boundary.max() == 0

    def test_grid_regression(self):
        grid = GridGraph.lattice((8, 8))
        g = grid.base
        rep = BoundaryReport()
        chi = balance_boundary(g, GridOracle(grid), [g.weights], 4, report=rep)
        assert not rep.violations
        assert rep.max_boundary == chi.class_boundary.max()
        assert rep.max_boundary <= 3 * rep.stage1_avg_boundary + 2 * g.vertex_costs.max()

    def test_bichromatic_measure(self):
        g = path(4)
        psi = bichromatic_measure(g, np.array([0, 0, 1, 1]))
        assert psi.tolist() == [0, 1, 1, 0]
        assert psi.sum() == 2 * cut(g.edges.tolist(), g.costs.tolist(), [0, 1])

    @given(st.integers(0, 2 ** 31 - 1), st.integers(2, 12))
    def test_random_graphs(self, seed, k):
        g = random_bounded_degree(150, 6, seed=seed, cost_max=5).graph
        rep = BoundaryReport()
        balance_boundary(g, GreedyOracle(), [g.weights], k, report=rep)
        assert not rep.violations
        if rep.rebalance is not None:
            assert not rep.rebalance.violations
