import numpy as np
import pytest

import relaynet as rn


@pytest.fixture
def config():
    return rn.SystemConfig.uniform(rn.Mode.ONE_WAY, 3, 2, 6, 3, 2, 15.0, 20.0)


def test_channels_shapes_and_determinism(config):
    a = rn.generate_channels(config, 7)
    b = rn.generate_channels(config, 7)
    assert len(a.h) == 3 and len(a.g) == 3
    assert a.h[0].shape == (6, 2) and a.g[0].shape == (3, 6)
    assert np.iscomplexobj(a.h[0])
    np.testing.assert_array_equal(a.h[1], b.h[1])


def test_designs_are_feasible_and_ordered(config):
    ch = rn.generate_channels(config, 3)
    naf = rn.naf_design(config, ch)
    simp = rn.simplified_design(config, ch)
    it = rn.iterate(config, ch, rn.initial_design(config, ch))
    for d in (naf, simp.design, it.design):
        rn.check_feasible(config, ch, d)
    assert rn.worst_mse(config, ch, simp.design) < rn.worst_mse(config, ch, naf)
    trace = [it.trace.initial_objective] + list(it.trace.objective_per_iter)
    assert all(b <= a + 1e-8 for a, b in zip(trace, trace[1:]))
    assert max(rn.all_mse(config, ch, it.design)) == pytest.approx(rn.worst_mse(config, ch, it.design))


def test_relay_power_budget(config):
    ch = rn.generate_channels(config, 4)
    d = rn.simplified_design(config, ch).design
    psi = rn.received_covariance(config, ch, d.b)
    assert rn.relay_power(d.f, psi) <= config.p_r * (1 + 1e-6)


def test_twoway_simplified():
    cfg = rn.SystemConfig.uniform(rn.Mode.TWO_WAY, 2, 2, 4, 3, 1, 10.0, 20.0)
    ch = rn.generate_channels(cfg, 1)
    out = rn.simplified_design(cfg, ch)
    assert len(rn.all_mse(cfg, ch, out.design)) == 4


def test_simulate_matches_across_workers(config):
    kw = dict(experiment="mse", algorithms="naf,simplified", p_s_db=[10.0], trials=3, seed=5)
    a = rn.simulate(config, workers=1, **kw)
    b = rn.simulate(config, workers=2, **kw)
    assert a.csv() == b.csv()
    assert a.csv().startswith("p_s_db,algorithm,metric,value,trials,failures")
    naf = next(p for p in a.points if p.algorithm == "NAF")
    assert 0.0 < naf.metric("worst_nmse") <= 1.0


def test_config_errors_raise():
    with pytest.raises(rn.RelaynetError):
        rn.load_config("mode = oneway\nK = 0\n")
