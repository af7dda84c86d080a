import numpy as np
import pytest

from gminpaint.engine import EngineConfig, belief, condition_potentials, count_ops, run, send_message
from gminpaint.errors import NumericalFailure, UncoverableMask
from gminpaint.gaussmix import GaussianMixture, WeightMode
from gminpaint.graph import build_graph, make_schedule
from gminpaint.imageio import GrayImage, InpaintMask
from gminpaint.masks import make_mask
from gminpaint.prior import build_clique_potential
from helpers import line_mask


def _one_pixel(shape=(8, 8), at=(4, 3)):
    m = np.zeros(shape, dtype=bool)
    m[at] = True
    return InpaintMask(m)


def test_empty_mask_is_a_noop(camera64, model):
    out, stats = run(camera64, InpaintMask(np.zeros((64, 64), dtype=bool)), model)
    assert np.array_equal(out.data, camera64.data)
    assert stats.stop_reason == "no_unknowns" and stats.iterations == []
    assert all(m == 0 and i == 0 for _, m, i in count_ops(stats))


@pytest.mark.parametrize("mode", ["exact", "paper"])
def test_constant_image_single_pixel(model, mode):
    img = GrayImage(np.full((8, 8), 90.0))
    out, stats = run(img, _one_pixel(), model, EngineConfig(weight_mode=mode))
    assert abs(out.data[4, 3] - 90) <= 2
    assert stats.schedule == "two_pass" and stats.stop_reason == "exact"


def test_single_pixel_matches_exact_conditional(camera64, model):
    # with one Gaussian per expert the conditional of the pixel is a 1-D Gaussian;
    # recover it from three evaluations of the product of the four window potentials
    single = model.with_components(1)
    pot = build_clique_potential(single)
    for at in [(10, 10), (30, 41), (50, 20)]:
        mask = _one_pixel((64, 64), at)
        g = build_graph(camera64, mask)

        def logp(v):
            total = 0.0
            for c in g.cliques:
                x = np.array([v if pid in c.vars else camera64.data.flat[pid] for pid in c.window])
                total += float(pot.log_density(x))
            return total

        f0, f1, f2 = logp(0.0), logp(1.0), logp(2.0)
        a, b = (f2 - 2 * f1 + f0) / 2, (f1 - f0) - (f2 - 2 * f1 + f0) / 2
        vertex = -b / (2 * a)
        out, _ = run(camera64, mask, single)
        assert abs(out.data[at] - np.clip(round(vertex), 0, 255)) <= 1


def test_cap_one_message_has_one_component(camera64, model):
    mask = InpaintMask(line_mask((64, 64), 20, 20, 3, 0))
    g = build_graph(camera64, mask)
    cfg = EngineConfig(max_components=1)
    pots = condition_potentials(g, build_clique_potential(model))
    assert all(len(p) == 27 for p in pots)
    msgs = {}
    for (i, j), sep in g.separators.items():
        msgs[(i, j)] = msgs[(j, i)] = GaussianMixture.uniform(sep)
    edge = g.edges[0]
    m = send_message(g, pots, msgs, edge, cfg)
    assert len(m) == 1 and m.vars == g.separator(*edge)
    assert len(send_message(g, pots, msgs, edge, EngineConfig(max_components=5))) == 5


def test_leaf_message_is_marginal_of_potential(camera64, model):
    mask = InpaintMask(line_mask((64, 64), 20, 20, 2, 0))
    g = build_graph(camera64, mask)
    cfg = EngineConfig(max_components=100)
    pots = condition_potentials(g, build_clique_potential(model))
    msgs = {}
    for (i, j), sep in g.separators.items():
        msgs[(i, j)] = msgs[(j, i)] = GaussianMixture.uniform(sep)
    i, j = g.edges[0]
    m = send_message(g, pots, msgs, (i, j), cfg)
    # with uniform incoming messages the message is the potential's marginal, up to normalization
    from gminpaint.gaussmix import marginalize

    ref = marginalize(pots[i], g.separator(i, j))
    x = np.linspace(0, 255, 9)[:, None] if ref.dim == 1 else np.full((3, ref.dim), 120.0)
    diff = m.log_density(x) - ref.log_density(x)
    assert np.allclose(diff, diff[0], atol=1e-8)


def test_conditioned_potential_is_slice(camera64, model):
    pot = build_clique_potential(model)
    mask = _one_pixel((64, 64), (12, 40))
    g = build_graph(camera64, mask)
    pots = condition_potentials(g, pot)
    for c, p in zip(g.cliques, pots):
        assert p.vars == c.vars
        for v in (30.0, 140.0):
            x = np.array([v if pid in c.vars else camera64.data.flat[pid] for pid in c.window])
            assert float(p.log_density([v])) == pytest.approx(float(pot.log_density(x)), abs=1e-8)


@pytest.mark.parametrize("row,col,length,vertical", [(10, 10, 1, 0), (20, 30, 2, 0), (40, 12, 3, 1), (33, 50, 2, 1)])
def test_loopy_on_valid_cluster_graph_matches_two_pass(camera64, model, row, col, length, vertical):
    single = model.with_components(1)
    mask = InpaintMask(line_mask((64, 64), row, col, length, vertical))
    a, _ = run(camera64, mask, single, EngineConfig(schedule="two_pass"))
    b, st = run(camera64, mask, single, EngineConfig(schedule="loopy", cluster="valid", iterations=5,
                                                     convergence_tol=0))
    assert st.schedule == "loopy"
    assert np.abs(a.data - b.data).max() <= 1


def test_estimates_are_levels(camera64, model):
    mask = make_mask(64, 64, "blob", 0.03, 2)
    out, stats = run(camera64, mask, model, EngineConfig(iterations=2))
    vals = out.data[mask.unknown]
    assert np.all((vals >= 0) & (vals <= 255)) and np.array_equal(vals, np.round(vals))
    assert np.array_equal(out.data[~mask.unknown], camera64.data[~mask.unknown])
    assert np.array_equal(stats.image_at(camera64, len(stats.iterations)).data, out.data)


def test_third_iteration_changes_little(camera64, model):
    mask = make_mask(64, 64, "scratch", 0.03, 5)
    _, stats = run(camera64, mask, model, EngineConfig(weight_mode=WeightMode.PAPER, schedule="loopy",
                                                       convergence_tol=0))
    assert len(stats.iterations) == 3
    assert stats.iterations[2].mean_change < 0.5


def test_deterministic_and_stats_text(camera64, model):
    mask = make_mask(64, 64, "scratch", 0.02, 8)
    a, sa = run(camera64, mask, model, EngineConfig(iterations=2))
    b, sb = run(camera64, mask, model, EngineConfig(iterations=2))
    assert np.array_equal(a.data, b.data)
    assert sa.to_text() == sb.to_text()
    lines = sa.to_text().splitlines()
    assert lines[0] == "# gminpaint run statistics v1"
    assert lines[2].split("\t")[:4] == ["iteration", "mean_change", "max_change", "messages"]
    assert "wall_time_s" in sa.to_text(timing=True)


def test_synchronous_is_independent_of_workers(camera64, model):
    mask = make_mask(64, 64, "scratch", 0.02, 4)
    base = EngineConfig(iterations=2, synchronous=True, schedule="loopy", convergence_tol=0)
    a, sa = run(camera64, mask, model, base)
    b, sb = run(camera64, mask, model, EngineConfig(iterations=2, synchronous=True, schedule="loopy",
                                                    convergence_tol=0, workers=4))
    assert np.array_equal(a.data, b.data)
    assert sa.to_text() == sb.to_text()


def test_operation_counts_are_monotone(camera64, model):
    mask = make_mask(64, 64, "scratch", 0.02, 1)
    _, stats = run(camera64, mask, model, EngineConfig(schedule="loopy", convergence_tol=0))
    running = np.zeros(8)
    for it in stats.iterations:
        step = np.array([it.ops.mults.get(n, 0) for n in (1, 2, 3, 4)] + [it.ops.invs.get(n, 0) for n in (1, 2, 3, 4)])
        assert np.all(step >= 0)
        running += step
    totals = count_ops(stats)
    assert [r[0] for r in totals] == [1, 2, 3, 4]
    assert np.array_equal(running, [r[1] for r in totals] + [r[2] for r in totals])
    assert sum(r[1] for r in totals) > 0


def test_two_pass_counts_match_hand_trace(model):
    # one unknown pixel and one Gaussian per expert: 4 cliques holding only that pixel,
    # junction tree = star around clique 0
    img = GrayImage(np.full((6, 6), 100.0))
    _, stats = run(img, _one_pixel((6, 6), (2, 2)), model.with_components(1), EngineConfig())
    ops = stats.ops
    # the shared potential comes out of its construction already solved: no 4-D work
    # conditioning, per clique: mult(1) + mult(3), then a 1-D solve inv(1) + mult(1)
    # inward leaf messages: nothing to multiply or integrate
    # outward messages 0->1, 0->2, 0->3: two products each, one 1-D solve per product
    # estimate: belief of clique 0 = three products
    assert dict(ops.invs) == {1: 4 + 6 + 3}
    assert dict(ops.mults) == {3: 4, 1: 8 + 6 + 3}


def test_stop_reasons(camera64, model):
    mask = make_mask(64, 64, "scratch", 0.02, 3)
    _, loose = run(camera64, mask, model, EngineConfig(schedule="loopy", convergence_tol=1000))
    assert loose.stop_reason == "converged" and len(loose.iterations) == 1
    _, capped = run(camera64, mask, model, EngineConfig(schedule="loopy", convergence_tol=0, iterations=2))
    assert capped.stop_reason == "iteration_cap" and len(capped.iterations) == 2


def test_numerical_failure_reports_edge(camera64):
    flat = GaussianMixture.uniform(range(4))
    mask = InpaintMask(line_mask((64, 64), 20, 20, 2, 0))
    with pytest.raises(NumericalFailure) as err:
        run(camera64, mask, flat, EngineConfig(ridge=0.0))
    assert err.value.edge is not None


def test_mean_reduction_runs(camera64, model):
    mask = InpaintMask(line_mask((64, 64), 30, 30, 3, 0))
    out, _ = run(camera64, mask, model, EngineConfig(pixel_reduce="mean"))
    assert np.all((out.data >= 0) & (out.data <= 255))


def test_border_mask_rejected(camera64, model):
    m = np.zeros((64, 64), dtype=bool)
    m[0, 5] = True
    with pytest.raises(UncoverableMask):
        run(camera64, InpaintMask(m), model)


def test_potential_must_cover_a_window(camera64):
    with pytest.raises(ValueError):
        run(camera64, InpaintMask(line_mask((64, 64), 5, 5, 1, 0)), GaussianMixture.uniform(range(3)))


@pytest.mark.parametrize("kw", [dict(max_components=0), dict(iterations=0), dict(ridge=-1.0),
                                dict(pixel_reduce="median"), dict(workers=0), dict(cluster="bethe"),
                                dict(weight_mode="approx")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        EngineConfig(**kw)


def test_belief_of_single_clique_without_messages(camera64, model):
    mask = _one_pixel((64, 64), (9, 9))
    g = build_graph(camera64, mask)
    s = make_schedule(g, "two_pass")
    pots = condition_potentials(g, build_clique_potential(model))
    msgs = {}
    for (i, j), sep in g.separators.items():
        msgs[(i, j)] = msgs[(j, i)] = GaussianMixture.uniform(sep)
    b = belief(pots, msgs, s.adjacency, 0, EngineConfig())
    assert b is pots[0]
