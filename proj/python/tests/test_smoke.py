import math
import os
from pathlib import Path

import numpy as np
import pytest

import ftap

DATA = Path(os.environ.get("FTAP_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))

BINOMIAL = """
horizon: 1
assets: [bond, stock]
nodes:
  - {id: r, prices: [1, 4]}
  - {id: u, parent: r, prob: 0.5, prices: [1, 8]}
  - {id: d, parent: r, prob: 0.5, prices: [1, 2]}
"""


def test_binomial_emm_and_replication():
    t = ftap.parse_tree(BINOMIAL)
    assert t.leaf_ids == ["u", "d"]
    q = ftap.find_emm(t)
    np.testing.assert_allclose(q, [1 / 3, 2 / 3], atol=1e-12)
    assert ftap.find_arbitrage(t) is None
    assert ftap.is_complete(t)
    rep = ftap.replicate(t, np.array([4.0, 0.0]))
    assert rep["attainable"]
    assert rep["initial_price"] == pytest.approx(4 / 3, abs=1e-12)
    assert ftap.price(t, np.array([4.0, 0.0]), q) == pytest.approx(4 / 3, abs=1e-12)


def test_arbitrage_tree():
    t = ftap.read_tree(str(DATA / "arbitrage.yaml"))
    assert ftap.find_emm(t) is None
    phi = ftap.find_arbitrage(t)
    assert phi[0, 1] > 0


def test_trinomial_is_incomplete():
    t = ftap.read_tree(str(DATA / "trinomial.yaml"))
    assert ftap.polytope_dimension(t) == 1
    lo, hi = ftap.price_bounds(t, np.array([4.0, 0.0, 0.0]))
    assert lo == pytest.approx(0.0, abs=1e-9)
    assert hi == pytest.approx(4 / 3, abs=1e-9)
    q2 = ftap.second_measure(t, -1)
    assert q2.min() > 0 and q2.sum() == pytest.approx(1.0)
    qe = ftap.minimal_divergence_measure(t, "entropy")
    call = np.array([4.0, 0.0, 0.0])
    assert ftap.indifference_price(t, call, 1.0) == pytest.approx(qe @ call, abs=1e-6)


def test_closed_forms_agree():
    bs = ftap.bs_call(100, 100, 0.05, 0.2, 1)
    assert bs == pytest.approx(10.4506, abs=1e-3)
    assert ftap.pde_call(100, 100, 0.05, 0.2, 1, 800, 800) == pytest.approx(bs, abs=5e-3)
    assert ftap.binomial_call(100, 100, 0.05, 0.2, 1, 500) == pytest.approx(bs, abs=1e-2)
    est, se = ftap.mc_call(100, 100, 0.05, 0.2, 1, 100_000, 42)
    assert abs(est - bs) < 4 * se
    assert ftap.mc_call(100, 100, 0.05, 0.2, 1, 100_000, 42) == (est, se)
    assert ftap.bachelier_call(100, 100, 20, 1) == pytest.approx(20 / math.sqrt(2 * math.pi), abs=1e-9)


def test_errors_are_typed():
    with pytest.raises(ftap.InputError):
        ftap.parse_tree("horizon: 1\nassets: [bond]\nnodes: [")
    with pytest.raises(ftap.Error):
        ftap.bs_call(-1, 100, 0, 0.2, 1)


def test_fuzz_report():
    r = ftap.fuzz(5, 100)
    assert r["ok"]
    assert r["arbitrage"] + r["complete"] + r["incomplete"] == 100
