from itertools import combinations_with_replacement

import numpy as np
import pytest
from hypothesis import given, strategies as st

from brute import canonical_form, class_boundary, components, cut, lpt_two_bins, strictly_balanced
from strategies import edge_list, graphs
from strictpart import Coloring, ParameterError, WeightedGraph, p_norm, partition
from strictpart.oracles import make_oracle
from strictpart.instances import (DEFAULT_CORPUS, InstanceBundle, bench, build_record_instance,
                                  copy_of, grid_instance, greedy_baseline, load_manifest,
                                  lower_bound_report, make_instance, measure_coloring,
                                  random_bounded_degree, random_regular, replicate_instance,
                                  run_record, within)


def bundle_of(g, seed=0):
    return InstanceBundle(g, "custom", seed, {})


def triangle():
    return WeightedGraph(3, [(0, 1), (1, 2), (0, 2)], [1.0, 2.0, 3.0], [1.0, 1.0, 2.0])


class TestGenerators:
    @pytest.mark.parametrize("gen,params", [
        ("grid", {"shape": [5, 4], "cost_max": 7, "weights": "random"}),
        ("regular", {"n": 30, "d": 3, "cost_max": 3}),
        ("bounded", {"n": 40, "max_degree": 5, "weights": "int"}),
    ])
    def test_metadata_reproduces_instance(self, gen, params):
        a = make_instance(gen, seed=11, **params)
        b = make_instance(a.generator, a.seed, **a.meta["params"])
        assert a.digest() == b.digest()
        assert make_instance(gen, seed=12, **params).digest() != a.digest() or gen == "grid"

    def test_grid_shape_and_costs(self):
        b = grid_instance((6, 5), seed=3, cost_max=4)
        g = b.graph
        assert g.n == 30 and g.m == 5 * 5 + 6 * 4
        assert set(g.costs.tolist()) <= {1.0, 2.0, 3.0, 4.0}
        assert g.coords.shape == (30, 2)

    def test_regular_degrees(self):
        g = random_regular(50, 4, seed=2).graph
        deg = np.bincount(g.edges.ravel(), minlength=g.n)
        assert np.all(deg == 4)
        assert len({tuple(e) for e in g.edges.tolist()}) == g.m

    def test_bounded_degrees(self):
        g = random_bounded_degree(100, 3, seed=5).graph
        assert np.bincount(g.edges.ravel(), minlength=g.n).max() <= 3

    def test_errors(self):
        with pytest.raises(ParameterError):
            make_instance("nope")
        with pytest.raises(ParameterError):
            random_regular(5, 3)
        with pytest.raises(ParameterError):
            grid_instance((0, 3))
        with pytest.raises(ParameterError):
            grid_instance((3, 3), weights="heavy")


class TestReplicate:
    def test_k4_is_identical(self):
        base = bundle_of(triangle())
        rep = replicate_instance(base, 4)
        assert rep.params["copies"] == 1
        assert rep.graph.edges.tolist() == base.graph.edges.tolist()
        assert rep.costs.tolist() == base.costs.tolist() and rep.weights.tolist() == base.weights.tolist()

    def test_k8_triangle(self):
        rep = replicate_instance(bundle_of(triangle()), 8)
        assert rep.graph.n == 6 and rep.graph.m == 6
        comps = components(rep.graph.n, [tuple(e) for e in rep.graph.edges.tolist()])
        assert len(comps) == 2

    def test_k9_norm_sum(self):
        base = WeightedGraph(3, [(0, 1), (1, 2)], [1.0, 3.0])
        assert p_norm(base.costs, 2) ** 2 == pytest.approx(10)
        rep = replicate_instance(bundle_of(base), 9)
        assert p_norm(rep.costs, 2) ** 2 == pytest.approx(20)

    def test_rejects_small_k(self):
        with pytest.raises(ParameterError):
            replicate_instance(bundle_of(triangle()), 3)

    @given(graphs(min_n=1, max_n=7), st.integers(4, 19))
    def test_copies_are_isomorphic(self, g, k):
        rep = replicate_instance(bundle_of(g), k)
        copies = k // 4
        edges = [tuple(e) for e in rep.graph.edges.tolist()]
        which = copy_of(rep)
        base_form = canonical_form(range(g.n), [tuple(e) for e in g.edges.tolist()])
        for i in range(copies):
            members = np.flatnonzero(which == i).tolist()
            assert canonical_form(members, edges) == base_form
            assert rep.weights[members].tolist() == g.weights.tolist()
        # no edge between copies, so components never straddle two copies
        for comp in components(rep.graph.n, edges):
            assert len(set(which[comp].tolist())) == 1
        assert rep.graph.n == copies * g.n
        assert float(np.sum(rep.costs ** 3)) == pytest.approx(copies * float(np.sum(g.costs ** 3)))

    def test_grid_coordinates_stay_distinct(self):
        rep = replicate_instance(grid_instance((3, 3)), 12)
        assert len({tuple(c) for c in rep.graph.coords.tolist()}) == rep.graph.n


class TestMeasure:
    def test_single_edge(self):
        g = WeightedGraph(2, [(0, 1)])
        m = measure_coloring(g, Coloring(g, 2, [0, 1]))
        assert m.max_boundary == 1 and m.avg_boundary == 1
        assert m.strictly_balanced and m.roughly_balanced

    def test_monochromatic(self):
        g = triangle()
        m = measure_coloring(g, Coloring(g, 1, [0, 0, 0]))
        assert m.max_boundary == 0 and m.avg_boundary == 0

    def test_four_cycle_opposite_pairs(self):
        g = WeightedGraph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
        m = measure_coloring(g, Coloring(g, 2, [0, 1, 0, 1]))
        assert m.max_boundary == 4

    def test_weights_override(self):
        g = WeightedGraph(3, [(0, 1)])
        chi = Coloring(g, 3, [0, 0, 1])
        m = measure_coloring(g, chi, weights=[5.0, 5.0, 1.0])
        assert m.class_weights.tolist() == [10.0, 1.0, 0.0]
        assert not m.strictly_balanced and not m.roughly_balanced

    @given(graphs(min_n=1, max_n=8, integer=False), st.integers(1, 4), st.data())
    def test_matches_brute(self, g, k, data):
        colors = data.draw(st.lists(st.integers(0, k - 1), min_size=g.n, max_size=g.n))
        m = measure_coloring(g, Coloring(g, k, colors))
        edges, costs, weights = edge_list(g)
        cb = class_boundary(edges, costs, colors, k)
        assert m.max_boundary == pytest.approx(max(cb))
        assert m.avg_boundary == pytest.approx(sum(cb) / k)
        assert m.strictly_balanced == strictly_balanced(colors, weights, k)


class TestGreedy:
    def test_unit_weights(self):
        g = WeightedGraph(10)
        assert sorted(greedy_baseline(g, None, 4).class_weights.tolist()) == [2, 2, 3, 3]

    def test_uneven_weights(self):
        g = WeightedGraph(4, weights=[5, 3, 3, 3])
        chi = greedy_baseline(g, None, 2)
        assert sorted(chi.class_weights.tolist()) == [6, 8]
        assert chi.colors[0] != chi.colors[1]
        assert strictly_balanced(chi.colors.tolist(), g.weights.tolist(), 2)

    def test_exhaustive_small_inputs(self):
        # every multiset of weights from a small palette, n <= 8, k <= 4
        palette = [0.0, 1.0, 2.0, 3.0, 5.0, 8.0]
        checked = 0
        for n in range(1, 9):
            for ws in combinations_with_replacement(palette, n):
                g = WeightedGraph(n, weights=list(ws))
                for k in range(1, 5):
                    chi = greedy_baseline(g, None, k)
                    assert strictly_balanced(chi.colors.tolist(), list(ws), k)
                    checked += 1
        assert checked > 5000

    @given(graphs(min_n=1, max_n=12, integer=False), st.integers(1, 6))
    def test_strict_on_float_weights(self, g, k):
        chi = greedy_baseline(g, None, k)
        assert strictly_balanced(chi.colors.tolist(), g.weights.tolist(), k)

    def test_partition_beats_greedy_on_grid(self):
        g = grid_instance((8, 8)).graph
        chi = partition(g, None, make_oracle("grid", g), 4)
        assert chi.class_boundary.max() < greedy_baseline(g, None, 4).class_boundary.max()

    def test_rejects_bad_k(self):
        with pytest.raises(ParameterError):
            greedy_baseline(WeightedGraph(2), None, 0)


class TestLowerBound:
    def test_single_edge_copy(self):
        base = bundle_of(WeightedGraph(2, [(0, 1)], [3.5]))
        rep = replicate_instance(base, 4)
        chi = Coloring(rep.graph, 4, [0, 1])
        lb = lower_bound_report(rep, chi)
        assert lb.skipped is None and len(lb.copies) == 1
        assert lb.certificate == 3.5
        assert lb.copies[0].valid

    def test_monochromatic_copy_skipped(self):
        rep = replicate_instance(grid_instance((3, 3)), 4)
        lb = lower_bound_report(rep, Coloring(rep.graph, 4, [0] * rep.graph.n))
        assert lb.skipped is not None and not lb.copies

    def test_needs_replicated_bundle(self):
        with pytest.raises(ParameterError):
            lower_bound_report(grid_instance((2, 2)), Coloring(grid_instance((2, 2)).graph, 1, [0] * 4))

    @given(graphs(min_n=2, max_n=7), st.integers(4, 11), st.data())
    def test_certificate_matches_brute_and_bounds_boundary(self, g, k, data):
        rep = replicate_instance(bundle_of(g), k)
        n = rep.graph.n
        colors = data.draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n))
        chi = Coloring(rep.graph, k, colors)
        lb = lower_bound_report(rep, chi)
        if lb.skipped is not None:
            return
        edges, costs, weights = edge_list(rep.graph)
        which = copy_of(rep)
        for cert in lb.copies:
            members = np.flatnonzero(which == cert.copy).tolist()
            wc = [sum(weights[v] for v in members if colors[v] == j) for j in range(k)]
            red, blue = lpt_two_bins(wc)
            assert sorted(red) == sorted(cert.red) and sorted(blue) == sorted(cert.blue)
            ustar = [v for v in members if colors[v] in set(red)]
            assert cert.certificate == pytest.approx(cut(edges, costs, ustar, within=members))
            # the cut edges are bichromatic, so they are part of the within-copy boundary
            inside = [(e, c) for e, c in zip(edges, costs) if e[0] in members and e[1] in members]
            within_boundary = sum(class_boundary([e for e, _ in inside], [c for _, c in inside], colors, k))
            assert cert.within_copy_boundary == pytest.approx(within_boundary)
            assert cert.certificate <= within_boundary + 1e-9


class TestCorpus:
    def test_records_build(self):
        for record in DEFAULT_CORPUS:
            bundle = build_record_instance(record)
            assert bundle.graph.n > 0
            if record.get("replicate"):
                assert bundle.params["copies"] == record["k"] // 4

    def test_bundled_manifest_matches(self):
        manifest = load_manifest()
        rows = bench(manifest, workers=2)
        assert rows and all(r.status == "ok" for r in rows)

    def test_partition_beats_greedy_on_corpus(self):
        for record in DEFAULT_CORPUS:
            m = run_record(record)["metrics"]
            assert m["max_boundary"] <= m["greedy_max_boundary"], record["name"]

    def test_hash_mismatch_reported(self):
        manifest = load_manifest()
        manifest["instances"] = manifest["instances"][:1]
        manifest["instances"][0]["hash"] = "0" * 64
        rows = bench(manifest, workers=1)
        assert [r.status for r in rows] == ["hash-mismatch"]

    def test_regression_detected(self):
        manifest = load_manifest()
        manifest["instances"] = manifest["instances"][:1]
        manifest["instances"][0]["metrics"]["max_boundary"] /= 2
        rows = bench(manifest, workers=1)
        assert any(r.status == "regression" for r in rows)

    def test_within(self):
        assert within(100, 104.9, 0.05) and not within(100, 105.1, 0.05)
        assert within(0, 0, 0.05) and not within(0, 1e-3, 0.05)
