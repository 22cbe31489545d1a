import numpy as np
import pytest

from lean_tvr import dataio
from lean_tvr.hypergraph import build_graph, build_nodes
from lean_tvr.params import init_params


@pytest.fixture
def gen():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_params():
    return init_params(8, 6, 7, layers=2, seed=3)


def random_graph(gen, n, m, d=8, text_dim=6, video_dim=7, params=None):
    params = params or init_params(d, text_dim, video_dim, layers=2, seed=0)
    nodes = build_nodes(gen.standard_normal((n, text_dim)), gen.standard_normal((m, video_dim)),
                        params["proj.text"], params["proj.video"])
    return build_graph(nodes, gen.normal(scale=0.3, size=4)), params


@pytest.fixture(scope="session")
def small_synth(tmp_path_factory):
    """16 pairs, 4 clusters, small feature dims."""
    out = tmp_path_factory.mktemp("synth")
    spec = dataio.SynthSpec(pairs=16, clusters=4, text_dim=12, video_dim=20, frames=4, seed=5)
    return dataio.synth_generate(spec, out)
