import numpy as np
import pytest

from ncgtv.graph import dense_min_eig, incidence
from ncgtv.huber import (
    L1,
    QUADRATIC,
    build_penalty_graph,
    graph_huber,
    moreau_oracle,
    scalar_huber,
    scalar_mc,
)

from helpers import k2, path_graph, random_graph

EPS = 1e-6


def test_scalar_mc_fixtures():
    assert scalar_mc(0.0, -3.0) == 3.0
    assert scalar_mc(2.0, 0.25) == pytest.approx(0.1875, abs=1e-15)
    assert scalar_mc(2.0, 10.0) == 0.25
    with pytest.raises(ValueError):
        scalar_mc(-1.0, 0.0)


def test_scalar_huber_fixtures():
    assert scalar_huber(2.0, 0.25) == pytest.approx(0.0625, abs=1e-15)
    assert scalar_huber(2.0, 1.0) == pytest.approx(0.75, abs=1e-15)
    assert scalar_huber(3.7, 0.0) == 0.0
    with pytest.raises(ValueError):
        scalar_huber(0.0, 1.0)


def test_decomposition_identity():
    xs = np.linspace(-5.0, 5.0, 10_001)
    for a in (0.3, 1.0, 2.0, 7.5):
        err = max(abs(scalar_mc(a, x) + scalar_huber(a, x) - abs(x)) for x in xs)
        assert err <= 1e-12


def test_huber_continuity_at_breakpoint():
    for a in (0.5, 1.0, 2.0, 9.0):
        x = 1.0 / a
        quad = 0.5 * a * x * x
        lin = abs(x) - 1.0 / (2.0 * a)
        assert abs(quad - lin) <= 1e-9


def test_penalty_graph_fixtures():
    pg = build_penalty_graph(k2(), [0.0, 0.25], 2.0, EPS)
    assert pg.branch[0] == QUADRATIC and pg.wp[0] == pytest.approx(1.0)
    pg = build_penalty_graph(k2(), [0.0, 2.0], 2.0, EPS)
    assert pg.branch[0] == L1 and pg.wp[0] == pytest.approx(0.4375, abs=1e-15)
    pg = build_penalty_graph(k2(), [0.0, 0.0], 3.0, EPS)
    assert pg.branch[0] == QUADRATIC and pg.wp[0] == pytest.approx(1.5)
    with pytest.raises(ValueError):
        build_penalty_graph(k2(), [0.0, 1.0], 0.0, EPS)
    with pytest.raises(ValueError):
        build_penalty_graph(k2(), [0.0, 1.0], 1.0, 0.0)


def test_penalty_branch_continuity():
    # both branch formulas agree at |d| = 1/a (for eps-inactive edges)
    for a in (0.5, 2.0, 4.0):
        d = 1.0 / a
        w = 0.8
        quad = 0.5 * a * w
        lin = w / d - w / (2.0 * a * d * d)
        assert abs(quad - lin) <= 1e-9


def test_graph_huber_fixtures():
    x = np.array([0.0, 0.25])
    assert graph_huber(k2(), x, x, 2.0, EPS) == pytest.approx(scalar_huber(2.0, 0.25))
    const = np.full(4, 0.6)
    assert graph_huber(path_graph(4), const, const, 1.0, EPS) == 0.0
    # at |d| = 1/a the edge contributes w/(2a)
    x = np.array([0.0, 0.5])
    assert graph_huber(k2(), x, x, 2.0, EPS) == pytest.approx(1.0 / 4.0)


def test_graph_huber_matches_materialized_laplacian():
    rng = np.random.default_rng(0)
    for _ in range(10):
        g = random_graph(rng, n_max=20, w_lo=0.05)
        x_ref = rng.uniform(0, 1, g.num_nodes)
        x = rng.uniform(0, 1, g.num_nodes)
        a = rng.uniform(0.5, 5.0)
        pg = build_penalty_graph(g, x_ref, a, EPS)
        lap = pg.laplacian()
        from ncgtv.graph import glr

        assert graph_huber(g, x_ref, x, a, EPS) == pytest.approx(glr(lap, x), abs=1e-10)


def test_moreau_oracle_fixtures():
    c = incidence(k2())
    assert moreau_oracle(c, [0.0, 0.0], 2.0, 1e-3, 1.0) == 0.0
    assert moreau_oracle(c, [0.0, 0.25], 2.0, 1e-3, 1.0) == pytest.approx(0.0625, abs=5e-3)
    assert moreau_oracle(c, [0.0, 1.0], 2.0, 1e-3, 2.0) == pytest.approx(0.75, abs=5e-3)
    with pytest.raises(ValueError):
        moreau_oracle(c, [0.0, 1.0], 2.0, 1e-2, 2.0)  # too coarse
    with pytest.raises(ValueError):
        moreau_oracle(c, [0.0, 5.0], 2.0, 1e-3, 1.0)  # grid does not cover


def test_moreau_equivalence_unit_weights():
    # the envelope identity is exact for unit edge weights
    rng = np.random.default_rng(1)
    step = 1e-3
    for m in (1, 2, 3):
        g = path_graph(m + 1, 1.0)
        c = incidence(g)
        for _ in range(10):
            x = rng.uniform(0, 1, m + 1)
            if np.min(np.abs(np.diff(x))) <= 10 * EPS:
                continue
            a = rng.uniform(0.5, 4.0)
            gh = graph_huber(g, x, x, a, EPS)
            mo = moreau_oracle(c, x, a, step, 1.5)
            assert abs(gh - mo) <= 5 * step


def test_penalty_weights_nonnegative_and_psd():
    rng = np.random.default_rng(2)
    for _ in range(10):
        g = random_graph(rng, n_max=25, w_lo=0.0)
        x_ref = rng.uniform(0, 1, g.num_nodes)
        a = rng.uniform(0.1, 50.0)
        pg = build_penalty_graph(g, x_ref, a, EPS)
        assert np.all(pg.wp >= 0)
        assert dense_min_eig(pg.laplacian()) >= -1e-9


def test_penalty_weight_monotone_in_a():
    rng = np.random.default_rng(3)
    g = k2(0.7)
    # quadratic branch: linear in a
    pg1 = build_penalty_graph(g, [0.0, 0.2], 1.0, EPS)
    pg2 = build_penalty_graph(g, [0.0, 0.2], 2.0, EPS)
    assert pg2.wp[0] == pytest.approx(2.0 * pg1.wp[0])
    # l1 branch: increasing in a while the branch does not switch
    for _ in range(20):
        d = rng.uniform(0.5, 2.0)
        a_lo = rng.uniform(2.5, 5.0)  # 1/a < 0.4 < d keeps the branch fixed
        a_hi = a_lo + rng.uniform(0.1, 2.0)
        w1 = build_penalty_graph(g, [0.0, d], a_lo, EPS).wp[0]
        w2 = build_penalty_graph(g, [0.0, d], a_hi, EPS).wp[0]
        assert w2 >= w1
