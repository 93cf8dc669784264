"""Tests for topology construction, Laplacian and incidence matrices."""

import logging

import networkx as nx
import numpy as np
import pytest

from pco_sync.config import resolve_preset
from pco_sync.topology import (
    Topology,
    TopologyError,
    incidence_matrix,
    is_connected,
    laplacian,
    random_geometric,
)


def _create_path(n: int, g=0.0, l: float = 0.01) -> Topology:
    edges = [[i, i + 1] for i in range(n - 1)]
    return Topology.from_dict({"n": n, "edges": edges, "g": g, "l": l})


def _create_random_adjacency(rng: np.random.Generator, n: int) -> np.ndarray:
    upper = np.triu(rng.random((n, n)) < rng.uniform(0.1, 0.9), k=1).astype(float)
    return upper + upper.T


class TestTopologyFromDict:
    """Tests for building topologies from documents."""

    def test_edge_list(self):
        topo = _create_path(4, g=[0.01, 0, 0, 0])
        assert topo.n == 4
        assert topo.edges() == [(0, 1), (1, 2), (2, 3)]
        assert topo.attached == [0]
        assert topo.degrees().tolist() == [1, 2, 2, 1]

    def test_scalar_gain_broadcasts(self):
        topo = _create_path(3, g=0.02)
        assert topo.global_gains.tolist() == [0.02, 0.02, 0.02]
        assert topo.g_min == 0.02

    def test_positions_and_radius(self):
        topo = Topology.from_dict({"positions": [[0, 0], [1, 0], [3, 0]], "radius": 1.0})
        assert topo.edges() == [(0, 1)]

    def test_explicit_zero_edge_removes_link(self):
        topo = Topology.from_dict({"positions": [[0, 0], [1, 0]], "radius": 2.0, "edges": [[0, 1, 0]]})
        assert topo.edges() == []

    def test_repeated_identical_edge(self):
        topo = Topology.from_dict({"n": 2, "edges": [[0, 1], [1, 0]]})
        assert topo.edges() == [(0, 1)]

    def test_conflicting_duplicate(self):
        with pytest.raises(TopologyError):
            Topology.from_dict({"n": 2, "edges": [[0, 1, 1], [1, 0, 0]]})

    def test_self_loop(self):
        with pytest.raises(TopologyError):
            Topology.from_dict({"n": 2, "edges": [[1, 1]]})

    def test_out_of_range(self):
        with pytest.raises(TopologyError):
            Topology.from_dict({"n": 2, "edges": [[0, 2]]})

    def test_unknown_key(self):
        with pytest.raises(TopologyError):
            Topology.from_dict({"n": 2, "weights": [1]})

    def test_missing_size(self):
        with pytest.raises(TopologyError):
            Topology.from_dict({"edges": [[0, 1]]})

    def test_round_trip(self):
        topo = _create_path(5, g=[0.01, 0, 0.02, 0, 0], l=0.03)
        again = Topology.from_dict(topo.to_dict())
        assert np.array_equal(again.adjacency, topo.adjacency)
        assert np.array_equal(again.global_gains, topo.global_gains)
        assert again.local_strength == topo.local_strength
        assert again.period == topo.period


class TestTopologyValidation:
    """Tests for constructor checks."""

    def test_asymmetric_adjacency(self):
        with pytest.raises(TopologyError):
            Topology(adjacency=[[0, 1], [0, 0]], global_gains=[0, 0], local_strength=0.01)

    def test_non_binary_adjacency(self):
        with pytest.raises(TopologyError):
            Topology(adjacency=[[0, 0.5], [0.5, 0]], global_gains=[0, 0], local_strength=0.01)

    def test_negative_gain(self):
        with pytest.raises(TopologyError):
            _create_path(2, g=[-0.1, 0])

    def test_wrong_gain_count(self):
        with pytest.raises(TopologyError):
            Topology(adjacency=np.zeros((3, 3)), global_gains=[0.1, 0.1], local_strength=0.0)

    def test_non_positive_period(self):
        with pytest.raises(TopologyError):
            Topology(adjacency=np.zeros((2, 2)), global_gains=0.0, local_strength=0.0, period=0.0)

    def test_arrays_are_read_only(self):
        topo = _create_path(3)
        with pytest.raises(ValueError):
            topo.adjacency[0, 1] = 0.0

    def test_strong_coupling_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            _create_path(3, g=0.5, l=0.01)
        assert "not weak" in caplog.text

    def test_weak_coupling_is_quiet(self, caplog):
        with caplog.at_level(logging.WARNING):
            _create_path(3, g=0.01, l=0.01)
        assert "not weak" not in caplog.text


class TestMatrices:
    """Tests for incidence and Laplacian matrices."""

    def test_incidence_two_nodes(self):
        assert incidence_matrix(_create_path(2)).tolist() == [[1.0], [-1.0]]

    def test_incidence_no_edges(self):
        topo = Topology(adjacency=np.zeros((3, 3)), global_gains=0.0, local_strength=0.0)
        assert incidence_matrix(topo).shape == (3, 0)

    def test_laplacian_two_nodes(self):
        assert laplacian(_create_path(2)).tolist() == [[1.0, -1.0], [-1.0, 1.0]]

    def test_ring_spectrum(self):
        ring = Topology.from_dict({"n": 4, "edges": [[0, 1], [1, 2], [2, 3], [3, 0]]})
        assert np.allclose(np.linalg.eigvalsh(laplacian(ring)), [0, 2, 2, 4])

    def test_laplacian_equals_incidence_product(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(1, 51))
            topo = Topology(adjacency=_create_random_adjacency(rng, n), global_gains=0.0, local_strength=0.0)
            b = incidence_matrix(topo)
            assert np.array_equal(laplacian(topo), b @ b.T)

    def test_laplacian_properties(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = int(rng.integers(2, 20))
            topo = Topology(adjacency=_create_random_adjacency(rng, n), global_gains=0.0, local_strength=0.0)
            lap = laplacian(topo)
            values = np.linalg.eigvalsh(lap)
            assert np.allclose(lap @ np.ones(n), 0.0)
            assert abs(values[0]) < 1e-9
            assert values[-1] <= 2 * topo.degrees().max() + 1e-9
            graph = nx.from_numpy_array(topo.adjacency)
            assert (values[1] > 1e-9) == nx.is_connected(graph)


class TestConnectivity:
    """Tests for is_connected and generated graphs."""

    def test_path_is_connected(self):
        assert is_connected(_create_path(6))

    def test_two_components(self):
        topo = Topology.from_dict({"n": 4, "edges": [[0, 1], [2, 3]]})
        assert not is_connected(topo)

    def test_single_node(self):
        assert is_connected(Topology(adjacency=np.zeros((1, 1)), global_gains=0.0, local_strength=0.0))

    def test_desk_preset(self):
        topo = Topology.load(resolve_preset("topologies", "desk18"))
        assert topo.n == 18
        assert len(topo.edges()) == 27
        assert topo.attached == [0]
        assert is_connected(topo)

    def test_random_geometric_connected_and_seeded(self):
        a = random_geometric(8, 0.5, seed=3)
        b = random_geometric(8, 0.5, seed=3)
        assert is_connected(a)
        assert np.array_equal(a.adjacency, b.adjacency)

    def test_with_edge(self):
        topo = _create_path(3).with_edge(0, 2)
        assert (0, 2) in topo.edges()
        with pytest.raises(TopologyError):
            topo.with_edge(1, 1)
