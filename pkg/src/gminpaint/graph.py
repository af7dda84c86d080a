"""Clique graph induced by an inpainting mask, and message schedules.

Every 2x2 window containing at least one unknown pixel is a clique; two
cliques are neighbours when they share an unknown pixel.  Pixel ``(r, c)``
is identified by ``r * width + c``.

Because each interior pixel lies in four windows, the full clique graph
always contains cycles.  Exact propagation is still possible whenever a
junction tree exists: a maximum-weight spanning tree (weights = separator
sizes) in which every pixel's cliques stay connected.  :func:`detect_tree`
performs that check and :func:`make_schedule` sweeps that tree in two
passes; otherwise messages flow loopily over all edges.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ScheduleError, UncoverableMask
from .imageio import GrayImage, InpaintMask

WINDOW = 2


@dataclass(frozen=True)
class Clique:
    id: int
    top_left: tuple  # (row, col)
    vars: tuple  # unknown pixel ids, ascending
    observed: tuple  # ((pixel id, intensity), ...)
    window: tuple  # all four pixel ids, row-major


@dataclass
class CliqueGraph:
    width: int
    height: int
    cliques: list
    edges: list  # (i, j) with i < j
    separators: dict  # (i, j) -> tuple of shared unknown pixel ids
    adjacency: list  # per clique, ascending neighbour ids
    pixel_cliques: dict = field(default_factory=dict)  # pixel id -> ascending clique ids
    _tree: object = field(default=None, repr=False)

    def __len__(self):
        return len(self.cliques)

    def separator(self, i, j):
        return self.separators[(i, j) if i < j else (j, i)]

    @property
    def unknown_pixels(self):
        return sorted(self.pixel_cliques)

    def pixel_coords(self, pid):
        return divmod(pid, self.width)

    def junction_tree(self):
        """Maximum-weight spanning forest; returns (edges, is_junction_tree)."""
        if self._tree is None:
            self._tree = _spanning_tree(self)
        return self._tree


def build_graph(img: GrayImage, mask: InpaintMask) -> CliqueGraph:
    """Cliques for every 2x2 window touching an unknown pixel.

    Unknown pixels in the outermost rows/columns raise
    :class:`UncoverableMask` listing the offending (row, col) pairs.
    """
    mask.check_matches(img)
    unk = mask.unknown
    h, w = unk.shape
    border = np.zeros_like(unk)
    border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True
    bad = np.argwhere(unk & border)
    if len(bad):
        raise UncoverableMask(bad)
    if h < WINDOW or w < WINDOW:
        return CliqueGraph(w, h, [], [], {}, [], {})
    # windows (top-left corners) that contain an unknown pixel
    touched = np.zeros((h - 1, w - 1), dtype=bool)
    for dr in range(WINDOW):
        for dc in range(WINDOW):
            touched |= unk[dr:dr + h - 1, dc:dc + w - 1]
    cliques = []
    pixel_cliques = {}
    for r, c in np.argwhere(touched):
        r, c = int(r), int(c)
        window = tuple((r + dr) * w + (c + dc) for dr in range(WINDOW) for dc in range(WINDOW))
        vars_, obs = [], []
        for pid in window:
            pr, pc = divmod(pid, w)
            if unk[pr, pc]:
                vars_.append(pid)
            else:
                obs.append((pid, float(img.data[pr, pc])))
        cid = len(cliques)
        cliques.append(Clique(cid, (r, c), tuple(vars_), tuple(obs), window))
        for pid in vars_:
            pixel_cliques.setdefault(pid, []).append(cid)
    shared = {}
    for pid, ids in pixel_cliques.items():
        for a in range(len(ids)):
            for b in range(a + 1, len(ids)):
                shared.setdefault((ids[a], ids[b]), []).append(pid)
    edges = sorted(shared)
    separators = {e: tuple(sorted(shared[e])) for e in edges}
    adjacency = [[] for _ in cliques]
    for i, j in edges:
        adjacency[i].append(j)
        adjacency[j].append(i)
    adjacency = [sorted(a) for a in adjacency]
    return CliqueGraph(w, h, cliques, edges, separators, adjacency,
                       {p: sorted(ids) for p, ids in sorted(pixel_cliques.items())})


def _spanning_tree(g: CliqueGraph):
    parent = list(range(len(g)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    tree = []
    for e in sorted(g.edges, key=lambda e: (-len(g.separators[e]), e)):
        ra, rb = find(e[0]), find(e[1])
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
            tree.append(e)
    tree.sort()
    adj = [[] for _ in g.cliques]
    for i, j in tree:
        adj[i].append(j)
        adj[j].append(i)
    # running intersection: the cliques holding each pixel must be connected within the tree
    ok = True
    for ids in g.pixel_cliques.values():
        members = set(ids)
        seen = {ids[0]}
        stack = [ids[0]]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v in members and v not in seen:
                    seen.add(v)
                    stack.append(v)
        if seen != members:
            ok = False
            break
    return tree, ok


def is_forest(g: CliqueGraph) -> bool:
    """True iff the full clique graph has no cycle."""
    parent = list(range(len(g)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in g.edges:
        ri, rj = find(i), find(j)
        if ri == rj:
            return False
        parent[ri] = rj
    return True


def detect_tree(g: CliqueGraph) -> bool:
    """True iff a junction tree exists, so a single two-pass sweep is exact."""
    return g.junction_tree()[1]


def cluster_separators(g: CliqueGraph) -> dict:
    """Separators of a cluster graph with the running-intersection property.

    Each unknown pixel is kept only on the edges of one spanning tree of the
    cliques that contain it (maximum shared-pixel count first, then edge
    order), so no pixel's evidence can travel around a cycle of edges that
    all carry it.  Edges left with an empty separator are omitted.
    """
    keep = {}
    for pid, ids in g.pixel_cliques.items():
        parent = {c: c for c in ids}

        def find(a):
            while parent[a] != a:
                a = parent[a]
            return a

        pairs = [(ids[a], ids[b]) for a in range(len(ids)) for b in range(a + 1, len(ids))]
        for e in sorted(pairs, key=lambda e: (-len(g.separators[e]), e)):
            ra, rb = find(e[0]), find(e[1])
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
                keep.setdefault(e, []).append(pid)
    return {e: tuple(sorted(keep[e])) for e in sorted(keep)}


@dataclass(frozen=True)
class Schedule:
    kind: str  # "two_pass" or "loopy"
    passes: tuple  # tuple of tuples of directed edges
    adjacency: tuple  # neighbour lists the messages are defined over
    separators: dict = field(default_factory=dict)  # (i, j), i < j -> separator pixels

    def separator(self, i, j):
        return self.separators[(i, j) if i < j else (j, i)]

    @property
    def edges(self):
        return [e for p in self.passes for e in p]

    def __len__(self):
        return sum(len(p) for p in self.passes)


def _tree_passes(n, tree_edges):
    adj = [[] for _ in range(n)]
    for i, j in tree_edges:
        adj[i].append(j)
        adj[j].append(i)
    depth = [-1] * n
    parent = [-1] * n
    for root in range(n):
        if depth[root] >= 0:
            continue
        depth[root] = 0
        frontier = [root]
        while frontier:
            nxt = []
            for u in frontier:
                for v in sorted(adj[u]):
                    if depth[v] < 0:
                        depth[v] = depth[u] + 1
                        parent[v] = u
                        nxt.append(v)
            frontier = nxt
    children = [v for v in range(n) if parent[v] >= 0]
    inward = sorted(((v, parent[v]) for v in children), key=lambda e: (-depth[e[0]], e))
    outward = sorted(((parent[v], v) for v in children), key=lambda e: (depth[e[1]], e))
    return tuple(inward), tuple(outward), tuple(tuple(sorted(a)) for a in adj)


def make_schedule(g: CliqueGraph, kind: str = "auto", iterations: int = 1, cluster: str = "full") -> Schedule:
    """Order in which messages are sent.

    ``two_pass`` sweeps the junction tree leaves-to-root then root-to-leaves
    (root = lowest clique id of each connected piece); ``loopy`` lists every
    directed edge in ascending (source, target) order once per iteration;
    ``auto`` picks ``two_pass`` when a junction tree exists.
    """
    kind = kind.replace("-", "_")
    if kind == "auto":
        kind = "two_pass" if detect_tree(g) else "loopy"
    if kind == "two_pass":
        tree, ok = g.junction_tree()
        if not ok:
            raise ScheduleError("two_pass schedule requested but the clique graph has no junction tree")
        inward, outward, adj = _tree_passes(len(g), tree)
        passes = tuple(p for p in (inward, outward) if p)
        return Schedule("two_pass", passes, adj, {e: g.separators[e] for e in tree})
    if kind == "loopy":
        if iterations < 1:
            raise ValueError("loopy schedules need iterations >= 1")
        if cluster == "full":
            seps = dict(g.separators)
        elif cluster == "valid":
            seps = cluster_separators(g)
        else:
            raise ScheduleError(f"unknown cluster graph {cluster!r}")
        adj = [[] for _ in g.cliques]
        for i, j in seps:
            adj[i].append(j)
            adj[j].append(i)
        directed = tuple(sorted([(i, j) for i, j in seps] + [(j, i) for i, j in seps]))
        passes = tuple(directed for _ in range(iterations)) if directed else ()
        return Schedule("loopy", passes, tuple(tuple(sorted(a)) for a in adj), seps)
    raise ScheduleError(f"unknown schedule kind {kind!r}")


def dump_graph(g: CliqueGraph) -> str:
    """Tab-separated dump of cliques, edges and separators for debugging."""
    tree, ok = g.junction_tree()
    tree = set(tree)
    lines = [f"# cliques={len(g)} edges={len(g.edges)} junction_tree={str(ok).lower()}",
             "# clique\trow\tcol\tunknown\tobserved"]
    for c in g.cliques:
        unk = ",".join(str(p) for p in c.vars)
        obs = ",".join(f"{p}={v:g}" for p, v in c.observed) or "-"
        lines.append(f"C\t{c.id}\t{c.top_left[0]}\t{c.top_left[1]}\t{unk}\t{obs}")
    lines.append("# edge\ti\tj\tseparator\tin_tree")
    for e in g.edges:
        sep = ",".join(str(p) for p in g.separators[e])
        lines.append(f"E\t{e[0]}\t{e[1]}\t{sep}\t{int(e in tree)}")
    return "\n".join(lines) + "\n"
