import pytest

from spectralcp import build_graph, community_graph, eigendecompose, normalized_laplacian


@pytest.fixture
def path3():
    """Path graph 0-1-2 with unit weights."""
    return build_graph(3, [(0, 1, 1.0), (1, 2, 1.0)])


@pytest.fixture
def two_node():
    return build_graph(2, [(0, 1, 1.0)])


@pytest.fixture
def small_community():
    return community_graph(10, n_communities=2, intra_prob=0.7, inter_weight=0.4, seed=3)


@pytest.fixture
def small_basis(small_community):
    return eigendecompose(normalized_laplacian(small_community))


def random_symmetric_graph_edges(n, rng, density=0.4):
    """Random nonnegative-weight edge list over n nodes (possibly disconnected)."""
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                edges.append((i, j, float(rng.uniform(0.1, 2.0))))
    return edges
