import networkx as nx
import numpy as np
import pytest

from gminpaint.errors import ScheduleError, UncoverableMask
from gminpaint.graph import (
    build_graph,
    cluster_separators,
    detect_tree,
    dump_graph,
    is_forest,
    make_schedule,
)
from gminpaint.imageio import GrayImage, InpaintMask
from gminpaint.masks import make_mask
from helpers import line_mask


def _graph(mask, value=100.0):
    mask = np.asarray(mask, dtype=bool)
    return build_graph(GrayImage(np.full(mask.shape, value)), InpaintMask(mask))


def _jt_oracle(g):
    """A junction tree exists iff a maximum spanning tree weighted by separator size
    reaches sum over pixels of (cliques holding the pixel - 1)."""
    G = nx.Graph()
    G.add_nodes_from(range(len(g)))
    for e, sep in g.separators.items():
        G.add_edge(*e, weight=len(sep))
    best = sum(d["weight"] for _, _, d in nx.maximum_spanning_tree(G).edges(data=True))
    return best == sum(len(ids) - 1 for ids in g.pixel_cliques.values())


def test_single_pixel_makes_k4():
    m = np.zeros((5, 5), dtype=bool)
    m[2, 2] = True
    g = _graph(m)
    assert len(g) == 4
    assert len(g.edges) == 6
    assert all(sep == (12,) for sep in g.separators.values())
    assert [c.top_left for c in g.cliques] == [(1, 1), (1, 2), (2, 1), (2, 2)]
    assert not is_forest(g)
    assert detect_tree(g)


def test_clique_contents():
    img = GrayImage(np.arange(25, dtype=float).reshape(5, 5))
    m = np.zeros((5, 5), dtype=bool)
    m[2, 2] = True
    g = build_graph(img, InpaintMask(m))
    c = g.cliques[0]
    assert c.window == (6, 7, 11, 12)
    assert c.vars == (12,)
    assert c.observed == ((6, 6.0), (7, 7.0), (11, 11.0))


def test_border_pixels_rejected():
    m = np.zeros((6, 6), dtype=bool)
    m[0, 3] = m[4, 5] = True
    with pytest.raises(UncoverableMask) as err:
        _graph(m)
    assert err.value.pixels == [(0, 3), (4, 5)]


def test_empty_mask_has_no_cliques():
    g = _graph(np.zeros((4, 4), dtype=bool))
    assert len(g) == 0 and g.edges == []


@pytest.mark.parametrize("length,vertical", [(1, 0), (2, 0), (3, 1), (5, 1)])
def test_lines_have_junction_trees(length, vertical):
    g = _graph(line_mask((12, 12), 3, 3, length, vertical))
    assert detect_tree(g) == _jt_oracle(g) is True


def _ring():
    # unknown pixels around an observed centre: evidence can circle the hole
    m = np.zeros((9, 9), dtype=bool)
    m[3:6, 3:6] = True
    m[4, 4] = False
    return m


def test_block_has_junction_tree():
    m = np.zeros((8, 8), dtype=bool)
    m[3:5, 3:5] = True
    g = _graph(m)
    assert detect_tree(g) == _jt_oracle(g) is True


def test_ring_has_no_junction_tree():
    g = _graph(_ring())
    assert detect_tree(g) == _jt_oracle(g) is False


@pytest.mark.parametrize("seed", range(12))
def test_detect_tree_agrees_with_oracle(seed):
    rng = np.random.default_rng(seed)
    m = np.zeros((9, 9), dtype=bool)
    m[1:-1, 1:-1] = rng.random((7, 7)) < 0.15 + 0.04 * seed
    g = _graph(m)
    assert detect_tree(g) == _jt_oracle(g)


def test_two_pass_schedule_visits_tree_edges_twice():
    g = _graph(line_mask((10, 10), 4, 3, 3, 0))
    s = make_schedule(g, "two_pass")
    tree = set(g.junction_tree()[0])
    inward, outward = s.passes
    assert {tuple(sorted(e)) for e in inward} == tree
    assert sorted(outward) == sorted((j, i) for i, j in inward)
    assert len(s) == 2 * (len(g) - 1)
    # leaves first: every clique sends inward only after hearing from its children
    sent = set()
    for i, j in inward:
        assert all((k, i) in sent for k in s.adjacency[i] if k != j)
        sent.add((i, j))


def test_two_pass_refused_without_junction_tree():
    g = _graph(_ring())
    with pytest.raises(ScheduleError):
        make_schedule(g, "two_pass")
    assert make_schedule(g, "auto").kind == "loopy"


def test_loopy_schedule_repeats_all_directed_edges():
    g = _graph(make_mask(20, 20, "scratch", 0.05, 1).unknown)
    s = make_schedule(g, "loopy", iterations=3)
    assert len(s.passes) == 3
    assert s.passes[0] == tuple(sorted([e for e in g.edges] + [(j, i) for i, j in g.edges]))
    with pytest.raises(ValueError):
        make_schedule(g, "loopy", iterations=0)
    with pytest.raises(ScheduleError):
        make_schedule(g, "flooding")


def test_valid_cluster_graph_has_running_intersection():
    g = _graph(make_mask(24, 24, "blob", 0.1, 2).unknown)
    seps = cluster_separators(g)
    for pid, ids in g.pixel_cliques.items():
        sub = nx.Graph()
        sub.add_nodes_from(ids)
        sub.add_edges_from(e for e, s in seps.items() if pid in s)
        assert nx.is_tree(sub)
    assert all(set(s) <= set(g.separators[e]) for e, s in seps.items())


def test_dump_graph_lists_everything():
    g = _graph(line_mask((8, 8), 3, 3, 2, 0))
    text = dump_graph(g)
    assert text.startswith("# cliques=6 edges=")
    assert sum(line.startswith("C\t") for line in text.splitlines()) == 6
    assert sum(line.startswith("E\t") for line in text.splitlines()) == len(g.edges)
