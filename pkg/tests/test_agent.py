import numpy as np
import pytest
from hypothesis import given, strategies as st

from swarmcov import agent, neural
from swarmcov.agent import (Controller, ControllerConfig, EpsilonSchedule, ReplayMemory, Transition,
                            decay_epsilon, q_target, select_action)
from swarmcov.errors import EmptyMemory
from swarmcov.neural import QNetwork


def fixed_q(values):
    """A network whose output is ``values`` regardless of input (bias only)."""
    return QNetwork(np.zeros((1, 2)), [0.0], np.zeros((4, 1)), values, "linear")


def transition(i, dim=3, terminal=False):
    obs = np.full(dim, float(i))
    return Transition(obs, i % 4, float(i), obs + 1, terminal)


class TestSelectAction:
    def test_uniform_when_epsilon_one(self):
        rng = np.random.default_rng(0)
        net = fixed_q([0.0, 5.0, 0.0, 0.0])
        counts = np.bincount([select_action(net, np.zeros(2), 1.0, rng) for _ in range(10000)], minlength=4)
        assert np.all(np.abs(counts / 10000 - 0.25) <= 0.02)

    def test_greedy(self):
        rng = np.random.default_rng(0)
        assert select_action(fixed_q([0.1, 0.9, 0.3, 0.2]), np.zeros(2), 0.0, rng) == 1

    def test_ties_lowest_index(self):
        rng = np.random.default_rng(0)
        assert select_action(fixed_q([0.5, 0.5, 0.5, 0.5]), np.zeros(2), 0.0, rng) == 0
        assert select_action(fixed_q([0.0, 0.7, 0.0, 0.7]), np.zeros(2), 0.0, rng) == 1

    def test_rejects_bad_epsilon(self):
        with pytest.raises(ValueError):
            select_action(fixed_q([0, 0, 0, 0]), np.zeros(2), 1.5, np.random.default_rng())

    def test_random_draw_consumed_even_when_greedy(self):
        # the draw sequence does not depend on epsilon being zero
        a, b = np.random.default_rng(3), np.random.default_rng(3)
        select_action(fixed_q([1, 0, 0, 0]), np.zeros(2), 0.0, a)
        b.random()
        assert a.random() == b.random()


class TestQTarget:
    def test_examples(self):
        assert q_target(10.0, [100, 50, 20, 0], False, 0.91) == pytest.approx(101.0)
        assert q_target(-31.14, [10.0, 20.0, 30.0, 40.0], False, 0.91) == pytest.approx(5.26)
        assert q_target(358.74, [1e6, 0, 0, 0], True, 0.91) == 358.74

    def test_gamma_zero(self):
        assert q_target(7.0, [3.0, 9.0, 1.0, 2.0], False, 0.0) == 7.0

    @given(st.floats(-1e3, 1e3), st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=4),
           st.floats(0.1, 10), st.floats(0, 1))
    def test_positively_homogeneous(self, r, q, c, gamma):
        scaled = q_target(c * r, [c * x for x in q], False, gamma)
        assert scaled == pytest.approx(c * q_target(r, q, False, gamma), rel=1e-9, abs=1e-6)


class TestReplayMemory:
    def test_fifo_eviction(self):
        mem = ReplayMemory(60)
        for i in range(61):
            mem.record(transition(i))
        assert len(mem) == 60
        assert [t.reward for t in mem] == [float(i) for i in range(1, 61)]

    def test_capacity_three(self):
        mem = ReplayMemory(3)
        for i in "ABCDE":
            mem.record(Transition(np.zeros(1), 0, ord(i), np.zeros(1), False))
        assert [chr(int(t.reward)) for t in mem] == ["C", "D", "E"]

    def test_sample_without_replacement(self):
        mem = ReplayMemory(60)
        for i in range(10):
            mem.record(transition(i))
        s = mem.sample(16, np.random.default_rng(0))
        assert len(s) == 10 and len({t.reward for t in s}) == 10
        s = mem.sample(4, np.random.default_rng(0))
        assert len(s) == 4 and len({t.reward for t in s}) == 4

    def test_empty_sample(self):
        with pytest.raises(EmptyMemory):
            ReplayMemory().sample(16, np.random.default_rng())

    def test_bad_capacity(self):
        with pytest.raises(ValueError):
            ReplayMemory(0)


class TestEpsilon:
    def test_first_decay(self):
        s = EpsilonSchedule()
        assert s.value == 0.47
        assert decay_epsilon(s) == pytest.approx(0.4371, abs=1e-12)

    def test_k10(self):
        assert EpsilonSchedule().at(10) == pytest.approx(0.47 * 0.93 ** 10, abs=1e-12)
        assert EpsilonSchedule().at(10) == pytest.approx(0.2274, abs=1e-4)

    def test_floor(self):
        s = EpsilonSchedule()
        for _ in range(200):
            decay_epsilon(s)
        assert s.value == 0.05
        assert EpsilonSchedule().at(30) > 0.05 and EpsilonSchedule().at(31) == 0.05

    def test_monotone(self):
        vals = [EpsilonSchedule().at(k) for k in range(100)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_validation(self):
        with pytest.raises(ValueError):
            EpsilonSchedule(initial=0.01, floor=0.05)
        with pytest.raises(ValueError):
            EpsilonSchedule(factor=0.0)


def make_controller(mode, n_uavs, dim=3, **kw):
    cfg = ControllerConfig(mode=mode, **kw)
    return Controller(cfg, dim, n_uavs, np.random.SeedSequence(1), backend="python")


class TestController:
    def test_network_counts(self):
        assert len(make_controller("global", 3).networks) == 1
        c = make_controller("per-uav", 3)
        assert len(c.networks) == 3 and len(c.memories) == 3
        assert [c.net_index(i) for i in range(3)] == [0, 1, 2]
        assert not np.array_equal(c.networks[0].W1, c.networks[1].W1)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            ControllerConfig(mode="team")

    def test_learn_batch_capped_by_memory(self, monkeypatch):
        c = make_controller("global", 1)
        for i in range(5):
            c.memories[0].record(transition(i))
        seen = {}

        def spy(net, opt, X, actions, targets):
            seen["n"] = len(X)
            return 0.0
        monkeypatch.setattr(neural, "train_arrays", spy)
        c.learn(0, np.random.default_rng(0))
        assert seen["n"] == 5

    def test_learn_targets(self, monkeypatch):
        c = make_controller("global", 1, gamma=0.5)
        c.memories[0].record(transition(1))
        c.memories[0].record(transition(2, terminal=True))
        net = c.networks[0]
        seen = {}
        monkeypatch.setattr(neural, "train_arrays",
                            lambda n, o, X, a, t: seen.update(X=X, t=t) or 0.0)
        c.learn(0, np.random.default_rng(0))
        for x, t in zip(seen["X"], seen["t"]):
            i = int(x[0])
            if i == 1:
                assert t == pytest.approx(q_target(1.0, net.forward(x + 1), False, 0.5), rel=1e-12)
            else:
                assert t == 2.0

    def test_global_updates_shared_network(self):
        c = make_controller("global", 2)
        before = c.networks[0].W2.copy()
        c.memories[1].record(transition(3))
        c.learn(1, np.random.default_rng(0))
        assert not np.array_equal(before, c.networks[0].W2)

    def test_per_uav_isolation(self):
        c = make_controller("per-uav", 2)
        other = [p.copy() for p in c.networks[1].params()]
        mine = c.networks[0].W2.copy()
        c.memories[0].record(transition(3))
        c.learn(0, np.random.default_rng(0))
        assert not np.array_equal(mine, c.networks[0].W2)
        for p, q in zip(other, c.networks[1].params()):
            assert np.array_equal(p, q)
        assert len(c.memories[1]) == 0

    def test_learn_empty(self):
        with pytest.raises(EmptyMemory):
            make_controller("global", 2).learn(1, np.random.default_rng())

    def test_seeded_networks_reproducible(self):
        a, b = make_controller("per-uav", 2), make_controller("per-uav", 2)
        for n, m in zip(a.networks, b.networks):
            assert np.array_equal(n.W1, m.W1)

    def test_record_helper(self):
        mem = ReplayMemory(2)
        agent.record(mem, transition(0))
        assert len(mem) == 1
