import numpy as np
import pytest

from qflsim import federation as fed
from qflsim import vqc
from qflsim.config import validate_config
from qflsim.optimizers import minimize


def make_raw(**overrides):
    raw = {
        "protocol": "mdqfl",
        "n_devices": 4,
        "rounds": 2,
        "n_class": 3,
        "dataset": {
            "source": "synthetic",
            "n_train": 80,
            "n_test": 30,
            "n_features": 4,
            "n_classes": 10,
            "center_scale": 3.0,
            "cluster_std": 1.0,
        },
        "optimizer": {"kind": "cobyla", "maxiter": 2},
        "clustering": {"method": "kmeans"},
        "policy": {"train_mode": 0, "update_mode": 0, "test_mode": 0},
        "seeds": {"data": 7, "split": 1, "clustering": 2, "selection": 3, "device_split": 4},
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and key in raw and isinstance(raw[key], dict):
            raw[key] = {**raw[key], **value}
        else:
            raw[key] = value
    return raw


def make_runner(**overrides):
    return fed.FederationRunner(validate_config(make_raw(**overrides)))


def make_device(device_id, params, loss=None):
    return fed.DeviceState(device_id, None, None, np.asarray(params, dtype=float), latest_loss=loss)


# -- combine -------------------------------------------------------------------

def test_combine_identity():
    v = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(fed.combine([v]), v)


def test_combine_two_vectors():
    np.testing.assert_array_equal(
        fed.combine([np.ones(2), np.zeros(2)]), np.array([0.5, 0.5])
    )


def test_combine_matches_loop_oracle():
    rng = np.random.default_rng(0)
    models = [rng.normal(size=16) for _ in range(3)]
    expected = np.zeros(16)
    for m in models:
        expected += m
    expected /= 3
    np.testing.assert_allclose(fed.combine(models), expected, atol=1e-12)


def test_combine_permutation_invariant_and_idempotent():
    rng = np.random.default_rng(1)
    models = [rng.normal(size=8) for _ in range(4)]
    np.testing.assert_allclose(fed.combine(models), fed.combine(models[::-1]), atol=1e-12)
    same = rng.normal(size=8)
    np.testing.assert_array_equal(fed.combine([same, same.copy()]), same)


def test_combine_weighted():
    out = fed.combine([np.zeros(2), np.ones(2)], weights=(1.0, 3.0))
    np.testing.assert_allclose(out, [0.75, 0.75])


def test_combine_errors():
    with pytest.raises(ValueError):
        fed.combine([])
    with pytest.raises(ValueError):
        fed.combine([np.zeros(2), np.zeros(3)])
    with pytest.raises(ValueError):
        fed.combine([np.zeros(2)], weights=(1.0, 1.0))
    with pytest.raises(ValueError):
        fed.combine([np.zeros(2), np.ones(2)], weights=(0.0, 0.0))


# -- selection -------------------------------------------------------------------

def test_select_lowest_loss():
    group = [make_device(0, [0.0], 0.5), make_device(1, [0.0], 0.2), make_device(2, [0.0], 0.9)]
    assert fed.select_representative(group, fed.SelectionRule("loss_argmin")) == 1


def test_select_singleton():
    assert fed.select_representative([make_device(7, [0.0], 1.0)], fed.SelectionRule()) == 7


def test_select_tie_goes_to_lower_id():
    group = [make_device(3, [0.0], 0.2), make_device(1, [0.0], 0.2)]
    assert fed.select_representative(group, fed.SelectionRule()) == 1


def test_select_requires_losses():
    with pytest.raises(ValueError):
        fed.select_representative([make_device(0, [0.0])], fed.SelectionRule())
    with pytest.raises(ValueError):
        fed.select_representative([], fed.SelectionRule())


def test_uniform_selection_frequencies():
    group = [make_device(i, [0.0]) for i in range(4)]
    rule = fed.SelectionRule("uniform_random", seed=11)
    rng = np.random.default_rng(rule.seed)
    counts = np.zeros(4)
    for _ in range(10000):
        counts[fed.select_representative(group, rule, rng)] += 1
    freq = counts / 10000
    assert np.all(freq >= 0.23) and np.all(freq <= 0.27)


# -- training-start personalization ------------------------------------------------

def test_train_start_mode0_is_global():
    theta_g = np.arange(4.0)
    policy = fed.PersonalizationPolicy(train_mode=0)
    np.testing.assert_array_equal(fed.train_model_for_selected(policy, theta_g, np.ones(4)), theta_g)


def test_train_start_mode1_mean():
    policy = fed.PersonalizationPolicy(train_mode=1)
    out = fed.train_model_for_selected(policy, np.ones(16), np.zeros(16))
    np.testing.assert_array_equal(out, np.full(16, 0.5))
    same = fed.train_model_for_selected(policy, np.ones(16), np.ones(16))
    np.testing.assert_array_equal(same, np.ones(16))


def test_train_start_mode1_falls_back_without_cluster_average(caplog):
    policy = fed.PersonalizationPolicy(train_mode=1)
    with caplog.at_level("WARNING"):
        out = fed.train_model_for_selected(policy, np.ones(4), None)
    np.testing.assert_array_equal(out, np.ones(4))
    assert any("falls back" in rec.message for rec in caplog.records)


# -- member updates -----------------------------------------------------------------

def test_update_mode0_broadcasts_representative():
    group = [make_device(i, np.full(3, float(i))) for i in range(3)]
    theta_s = np.array([9.0, 9.0, 9.0])
    fed.update_cluster_members(fed.PersonalizationPolicy(update_mode=0), group, theta_s, np.zeros(3))
    for device in group:
        np.testing.assert_array_equal(device.params, theta_s)


def test_update_mode1_fixed_point():
    device = make_device(0, np.array([2.0, 2.0]))
    fed.update_cluster_members(
        fed.PersonalizationPolicy(update_mode=1), [device], np.array([2.0, 2.0]), np.zeros(2)
    )
    np.testing.assert_array_equal(device.params, [2.0, 2.0])


def test_update_mode2_three_way_mean():
    device = make_device(0, np.array([0.0]))
    fed.update_cluster_members(
        fed.PersonalizationPolicy(update_mode=2), [device], np.array([3.0]), np.array([0.0])
    )
    np.testing.assert_array_equal(device.params, [1.0])


# -- aggregate / server model --------------------------------------------------------

def test_aggregate_single_device():
    device = make_device(0, np.arange(4.0))
    device.train_data = vqc.EncodedDataset(np.array([0]), np.zeros((1, 16), dtype=complex))
    theta_g, theta_c = fed.aggregate([device], [np.ones(4)])
    np.testing.assert_array_equal(theta_g, np.arange(4.0))
    np.testing.assert_array_equal(theta_c, np.ones(4))


def test_aggregate_two_devices_and_loop_oracle():
    rng = np.random.default_rng(2)
    devices = []
    for i in range(5):
        d = make_device(i, rng.normal(size=16))
        d.train_data = vqc.EncodedDataset(np.array([0]), np.zeros((1, 16), dtype=complex))
        devices.append(d)
    expected = sum(d.params for d in devices) / 5
    theta_g, _ = fed.aggregate(devices, [np.zeros(16)])
    np.testing.assert_allclose(theta_g, expected, atol=1e-12)


def test_aggregate_requires_inputs():
    with pytest.raises(ValueError):
        fed.aggregate([], [np.zeros(2)])
    device = make_device(0, np.zeros(2))
    device.train_data = vqc.EncodedDataset(np.array([0]), np.zeros((1, 4), dtype=complex))
    with pytest.raises(ValueError):
        fed.aggregate([device], [])


def test_server_test_model_modes():
    theta_g, theta_c = np.ones(16), np.zeros(16)
    assert np.array_equal(
        fed.server_test_model(fed.PersonalizationPolicy(test_mode=0), theta_g, theta_c), theta_g
    )
    assert np.array_equal(
        fed.server_test_model(fed.PersonalizationPolicy(test_mode=2), theta_g, theta_c), theta_c
    )
    np.testing.assert_array_equal(
        fed.server_test_model(fed.PersonalizationPolicy(test_mode=1), theta_g, theta_c),
        np.full(16, 0.5),
    )


def test_server_test_model_fallback(caplog):
    with caplog.at_level("WARNING"):
        out = fed.server_test_model(fed.PersonalizationPolicy(test_mode=2), np.ones(4), None)
    np.testing.assert_array_equal(out, np.ones(4))


# -- initial round ---------------------------------------------------------------------

def test_initial_round_trains_each_device_once():
    runner = make_runner(n_devices=3)
    assert all(np.array_equal(d.params, runner.initial_params) for d in runner.devices)
    count = runner.initial_round()
    assert count == 3
    assert all(d.latest_loss is not None for d in runner.trainable_devices())


def test_initial_round_divergence_across_shards():
    runner = make_runner(n_devices=2, n_class=2)
    runner.initial_round()
    a, b = runner.devices
    assert not np.array_equal(a.params, b.params)


# -- protocol runs -----------------------------------------------------------------------

def test_mdqfl_training_count_law():
    runner = make_runner(n_devices=10, rounds=3, dataset={"n_train": 150})
    result = runner.run()
    assert result.metrics[0].trainings == 10
    for m in result.metrics[1:]:
        assert m.trainings == m.n_clusters
        assert m.comm_events == m.n_clusters + 1
    total = sum(m.trainings for m in result.metrics)
    assert total == 10 + sum(m.n_clusters for m in result.metrics[1:])


def test_qfl_training_counts_and_broadcast():
    runner = make_runner(protocol="qfl", n_devices=10, rounds=3, dataset={"n_train": 150})
    result = runner.run()
    assert [m.trainings for m in result.metrics] == [10, 10, 10]
    assert all(m.comm_events == 10 for m in result.metrics)
    for device in runner.devices:
        np.testing.assert_array_equal(device.params, runner.server.theta_g)


def test_qfl_single_device_equals_plain_training():
    runner = make_runner(protocol="qfl", n_devices=1, n_class=10, rounds=1)
    device = runner.devices[0]
    objective = lambda x: vqc.loss(x, device.train_data, runner.n_classes, ansatz=runner.ansatz)  # noqa: E731
    expected = minimize(objective, runner.initial_params.copy(), runner.config.optimizer)
    result = runner.run()
    np.testing.assert_array_equal(runner.server.theta_g, expected.best_params)
    assert result.metrics[0].trainings == 1


def test_policy_changes_server_trajectory():
    base = make_runner(rounds=3, policy={"train_mode": 0, "update_mode": 0, "test_mode": 0})
    alt = make_runner(rounds=3, policy={"train_mode": 1, "update_mode": 1, "test_mode": 1})
    base.run()
    alt.run()
    assert not np.array_equal(base.server.theta_s, alt.server.theta_s)


def test_identical_devices_stay_identical():
    runner = make_runner(n_devices=4, n_class=10, rounds=3, clustering={"k": 1})
    shared_train = runner.devices[0].train_data
    shared_test = runner.devices[0].test_data
    for device in runner.devices:
        device.train_data, device.test_data = shared_train, shared_test
    runner.run()
    for device in runner.devices[1:]:
        np.testing.assert_array_equal(device.params, runner.devices[0].params)


def test_round1_mode1_uses_fallback_not_crash(caplog):
    with caplog.at_level("WARNING"):
        runner = make_runner(rounds=2, policy={"train_mode": 1, "update_mode": 0, "test_mode": 0})
        runner.run()
    assert any("falls back" in rec.message for rec in caplog.records)


def test_empty_shard_devices_are_skipped(caplog):
    with caplog.at_level("WARNING"):
        runner = make_runner(
            n_devices=10,
            n_class=2,
            dataset={"n_classes": 3, "n_train": 90},
        )
    dataless = [d for d in runner.devices if not d.has_data]
    assert dataless, "fixture should produce shardless devices"
    result = runner.run()
    assert result.metrics[0].trainings == len(runner.trainable_devices())
    for device in dataless:
        np.testing.assert_array_equal(device.params, runner.initial_params)
    assert any("will not train" in rec.message for rec in caplog.records)


def test_runs_deterministic_across_repeats_and_workers():
    a = make_runner(rounds=2).run()
    b = make_runner(rounds=2).run()
    c = make_runner(rounds=2, workers=4).run()
    for x, y in ((a, b), (a, c)):
        for mx, my in zip(x.metrics, y.metrics):
            assert mx.server_val_loss == my.server_val_loss
            assert mx.avg_device_train_acc == my.avg_device_train_acc
            assert mx.trainings == my.trainings


def test_uniform_random_selection_protocol_runs():
    runner = make_runner(rounds=3, selection={"kind": "uniform_random"})
    result = runner.run()
    assert len(result.metrics) == 3


def test_weighted_combines_respected():
    raw = make_raw(
        rounds=2,
        policy={"train_mode": 1, "update_mode": 2, "test_mode": 1},
        combine_weights={"train": [1, 1], "update": [2, 1, 1], "test": [3, 1]},
    )
    runner = fed.FederationRunner(validate_config(raw))
    result = runner.run()
    assert len(result.metrics) == 2
    theta_g, theta_c = runner.server.theta_g, runner.server.theta_c
    expected = (3 * theta_g + theta_c) / 4
    np.testing.assert_allclose(runner.server.theta_s, expected, atol=1e-12)


def test_device_traces_cover_all_devices_and_rounds():
    runner = make_runner(n_devices=4, rounds=2)
    result = runner.run()
    assert len(result.device_traces) == 4 * 2
    trained_round0 = [t for t in result.device_traces if t["round"] == 0 and t["trained"]]
    assert len(trained_round0) == 4


def test_fixed_k_override():
    runner = make_runner(n_devices=6, rounds=2, clustering={"k": 2})
    result = runner.run()
    assert result.metrics[1].n_clusters == 2
