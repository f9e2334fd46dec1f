import dataclasses

import pytest

from qubound import bounds, hunt
from qubound.hunt import DEFAULT_GENERATORS, GeneratorConfig, draw_chain, hunt_violations
from qubound.qstate import rng_stream


def test_single_trial_deterministic():
    a = hunt_violations("T1B", 1, seed=11).to_json()
    b = hunt_violations("T1B", 1, seed=11).to_json()
    assert a == b
    assert a["trials"] == 1 and a["argminTrial"] in (0, -1)


@pytest.mark.parametrize("bound", sorted(hunt.CHECKERS))
def test_every_bound_runs_clean(bound):
    s = hunt_violations(bound, 60, seed=3)
    assert s.ok, s.violations[:1]
    assert s.evaluated + s.skipped == 60
    if s.evaluated:
        assert s.argmin_instance is not None
        assert sum(s.histogram["counts"]) == s.evaluated


def test_worker_count_does_not_change_result():
    one = hunt_violations("T1A", 40, seed=9).to_json()
    three = hunt_violations("T1A", 40, seed=9, workers=3).to_json()
    assert one == three


def test_unknown_bound():
    with pytest.raises(KeyError):
        hunt_violations("NOPE", 1, seed=0)


def test_draw_chain_respects_config():
    cfg = GeneratorConfig(family="random", d_min=3, d_max=3, n_min=2, n_max=2, mixed_fraction=1.0)
    for i in range(20):
        chain = draw_chain(rng_stream(5, i), cfg)
        assert chain.dim == 3 and len(chain.projectors) == 2 and not chain.is_pure
    pure = draw_chain(rng_stream(5, 0), cfg, allow_mixed=False)
    assert pure.is_pure


def test_corrupted_checker_is_flagged(monkeypatch):
    original = hunt.CHECKERS["T1B"]

    def negated(rng, cfg, tol):
        reports, inst = original(rng, cfg, tol)
        bad = [dataclasses.replace(r, margin=-1.0 - abs(r.margin), satisfied=False) for r in reports]
        return bad, inst

    monkeypatch.setitem(hunt.CHECKERS, "T1B", negated)
    s = hunt_violations("T1B", 5, seed=1)
    assert not s.ok
    v = s.violations[0]
    assert {"trial", "report", "instance"} <= set(v)
    assert "rho" in v["instance"] and "projectors" in v["instance"]


def test_default_generators_cover_every_bound():
    assert set(DEFAULT_GENERATORS) == set(hunt.CHECKERS) == set(bounds.BOUND_IDS)
