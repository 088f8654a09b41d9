import json

import pytest

from hiertune.instances import (
    InstanceError,
    generate_demand,
    generate_network,
    load_instance,
    save_instance,
)
from hiertune.rtn import ScenarioSet


def test_generator_produces_valid_networks():
    for seed in range(8):
        net = generate_network(seed, n_tasks=3, n_vessels=2)
        assert len(net.tasks) == 3
        assert len(net.products()) == 1 and len(net.feeds()) == 1
        assert net.penalty >= 1.0
        dem = generate_demand(seed, net, days=7)
        dem.validate(net)


def test_generator_is_seeded():
    a = generate_network(5, n_tasks=2)
    b = generate_network(5, n_tasks=2)
    assert a.tasks == b.tasks and a.materials == b.materials and a.nu == b.nu
    c = generate_network(6, n_tasks=2)
    assert c.nu != a.nu


def test_round_trip(tmp_path):
    net = generate_network(3, n_tasks=2)
    weeks = [generate_demand(3 + k, net, days=4) for k in range(2)]
    path = tmp_path / "inst.json"
    save_instance(path, net, ScenarioSet.uniform(weeks), hours_per_day=6)
    net2, scen2, hpd = load_instance(path)
    assert hpd == 6
    assert net2.tasks == net.tasks
    assert net2.materials == net.materials
    assert net2.vessels == net.vessels
    assert net2.nu == net.nu and net2.mu == net.mu
    assert scen2.weeks == tuple(weeks)
    assert scen2.weights == (0.5, 0.5)


def _payload(tmp_path):
    net = generate_network(1, n_tasks=1)
    week = generate_demand(2, net, days=2)
    path = tmp_path / "inst.json"
    save_instance(path, net, ScenarioSet.uniform([week]), hours_per_day=4)
    return path, json.loads(path.read_text())


def test_loader_reports_first_violation_path(tmp_path):
    path, payload = _payload(tmp_path)

    payload["hours_per_day"] = 99
    path.write_text(json.dumps(payload))
    with pytest.raises(InstanceError, match=r"\$\.hours_per_day"):
        load_instance(path)

    path, payload = _payload(tmp_path)
    del payload["tasks"][0]["duration"]
    path.write_text(json.dumps(payload))
    with pytest.raises(InstanceError, match=r"\$\.tasks\[0\]\.duration"):
        load_instance(path)

    path, payload = _payload(tmp_path)
    payload["mu"]["T0"]["M0"] = {"0": -1.0}
    path.write_text(json.dumps(payload))
    with pytest.raises(InstanceError, match=r"\$\.network"):
        load_instance(path)

    path, payload = _payload(tmp_path)
    payload["weeks"][0]["demand"] = {"M0": [1.0, 1.0]}
    path.write_text(json.dumps(payload))
    with pytest.raises(InstanceError, match=r"\$\.weeks\[0\]"):
        load_instance(path)

    path, payload = _payload(tmp_path)
    payload["format"] = "something-else"
    path.write_text(json.dumps(payload))
    with pytest.raises(InstanceError, match=r"\$\.format"):
        load_instance(path)

    path.write_text("{not json")
    with pytest.raises(InstanceError, match=r"\$: not valid JSON"):
        load_instance(path)
