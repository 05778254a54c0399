"""Byzantine message corruption, trust reweighting, trimmed consensus and
the attacked-observation wrapper for learning runs."""

import numpy as np
import pytest

from stgames.learning import LearnerSpec, run_dynamics
from stgames.resilience import (AdversaryModel, ConsensusScenario,
                                DefenseSpec, TrustMatrix, corrupt_reports,
                                corrupted_observer, run_adversarial_dynamics,
                                run_consensus_scenario, trimmed_consensus_step,
                                update_trust)
from stgames.strategic import StrategicGame

PD = StrategicGame.single(
    (("C", "D"), ("C", "D")),
    {("C", "C"): (3, 3), ("C", "D"): (0, 5),
     ("D", "C"): (5, 0), ("D", "D"): (1, 1)})


def scenario(values):
    n = len(values)
    return ConsensusScenario(tuple(values), TrustMatrix.uniform(n))


def test_adversary_model_validation():
    adv = AdversaryModel((1,), "constant-injection", value=7.0, window=(2, 5))
    assert not adv.active_at(1)
    assert adv.active_at(2)
    assert adv.active_at(4)
    assert not adv.active_at(5)          # end is exclusive
    assert AdversaryModel((0,), "sign-flip").active_at(10 ** 9)
    with pytest.raises(ValueError):
        AdversaryModel((0,), "eavesdrop")
    with pytest.raises(ValueError):
        AdversaryModel((0,), "replay", lag=0)
    with pytest.raises(ValueError):
        AdversaryModel((0,), "channel-drop", drop_prob=1.5)
    with pytest.raises(ValueError):
        AdversaryModel((0,), "sign-flip", window=(5, 2))


def test_corrupt_reports_kinds():
    reports = {0: 1.0, 1: -2.0, 2: 3.0}
    rng = np.random.default_rng(0)

    out = corrupt_reports(AdversaryModel((1,), "constant-injection", value=9.0),
                          reports, [], 0, rng)
    assert out == {0: 1.0, 1: 9.0, 2: 3.0}

    out = corrupt_reports(AdversaryModel((1, 2), "sign-flip"),
                          reports, [], 0, rng)
    assert out == {0: 1.0, 1: 2.0, 2: -3.0}

    history = [{0: 0.5, 1: 0.6, 2: 0.7}, {0: 1.5, 1: 1.6, 2: 1.7}]
    out = corrupt_reports(AdversaryModel((1,), "replay", lag=2),
                          reports, history, 2, rng)
    assert out == {0: 1.0, 1: 0.6, 2: 3.0}

    out = corrupt_reports(AdversaryModel((1,), "channel-drop", drop_prob=1.0),
                          reports, [], 0, rng)
    assert out == {0: 1.0, 2: 3.0}
    out = corrupt_reports(AdversaryModel((1,), "channel-drop", drop_prob=0.0),
                          reports, [], 0, rng)
    assert out == reports

    # outside the window the message passes untouched
    adv = AdversaryModel((1,), "sign-flip", window=(5, 9))
    assert corrupt_reports(adv, reports, [], 4, rng) == reports
    assert corrupt_reports(adv, reports, [], 9, rng) == reports
    assert corrupt_reports(None, reports, [], 0, rng) == reports


def test_trust_matrix_validation():
    t = TrustMatrix.uniform(4)
    assert np.allclose(t.weights.sum(axis=1), 1.0)
    assert t.adjacency.all()
    ring = TrustMatrix.from_weights([[0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5]])
    assert ring.adjacency.sum() == 6
    with pytest.raises(ValueError):
        TrustMatrix(np.ones((2, 3)) / 3, np.ones((2, 3), dtype=bool))
    with pytest.raises(ValueError):
        TrustMatrix.from_weights([[1.5, -0.5], [0.5, 0.5]])
    with pytest.raises(ValueError):
        TrustMatrix(np.full((2, 2), 0.5), np.eye(2, dtype=bool))
    with pytest.raises(ValueError):
        TrustMatrix.from_weights([[0.9, 0.0], [0.5, 0.5]])


def test_update_trust():
    t = TrustMatrix.uniform(2)
    res = np.array([[0.0, 2.0], [0.0, 0.0]])
    out = update_trust(t, res, eta=1.0)
    want = np.exp(-2.0) * 0.5
    assert out.weights[0] == pytest.approx([0.5 / (0.5 + want),
                                            want / (0.5 + want)])
    assert np.array_equal(out.weights[1], t.weights[1])

    same = update_trust(t, np.zeros((2, 2)), eta=0.7)
    assert np.array_equal(same.weights, t.weights)

    # all weights underflow to zero: the row falls back to uniform
    starved = update_trust(t, np.full((2, 2), 1e6), eta=1.0)
    assert starved.weights[0] == pytest.approx([0.5, 0.5])

    rng = np.random.default_rng(99)
    cur = TrustMatrix.uniform(5, self_loops=False)
    for _ in range(10_000):
        cur = update_trust(cur, rng.exponential(1.0, (5, 5)), eta=0.3)
        assert abs(cur.weights.sum(axis=1) - 1.0).max() <= 1e-9
    assert not np.any(cur.weights[~cur.adjacency])
    with pytest.raises(ValueError):
        update_trust(t, np.zeros((2, 2)), eta=-0.1)
    with pytest.raises(ValueError):
        update_trust(t, np.zeros((3, 3)), eta=0.1)


def test_trimmed_step_drops_extremes():
    trust = TrustMatrix.uniform(3)
    reports = {i: {0: 0.0, 1: 10.0, 2: 5.0} for i in range(3)}
    out = trimmed_consensus_step(reports, trust, 1, range(3))
    assert out == {0: 5.0, 1: 5.0, 2: 5.0}

    # trim ties cut by (value, sender): senders 0 low and 4 high survive 1,2,3
    trust5 = TrustMatrix.uniform(5)
    tied = {i: {0: 1.0, 1: 1.0, 2: 1.0, 3: 1.0, 4: 2.0} for i in range(5)}
    out = trimmed_consensus_step(tied, trust5, 1, range(5))
    assert out[0] == pytest.approx(1.0)

    with pytest.raises(ValueError):
        trimmed_consensus_step({0: {0: 1.0, 1: 2.0}, 1: {0: 1.0, 1: 2.0}},
                               TrustMatrix.uniform(2), 1, range(2))
    with pytest.raises(ValueError):
        trimmed_consensus_step(reports, trust, -1, range(3))


def test_untrimmed_full_row_is_plain_averaging():
    rng = np.random.default_rng(31)
    x = rng.normal(0, 3, size=6)
    w = TrustMatrix.uniform(6)
    run = run_consensus_scenario(scenario(x), 10, DefenseSpec(trim_f=0))
    vals = x.copy()
    for t in range(10):
        nxt = np.array([float(w.weights[i] @ vals) for i in range(6)])
        assert np.array_equal(run.values[t + 1], nxt)
        vals = nxt
    assert run.metrics.max_honest_deviation == 0.0
    assert run.metrics.honest == tuple(range(6))
    d = run.metrics.diameter_series
    assert all(d[t + 1] <= d[t] + 1e-12 for t in range(10))
    with pytest.raises(ValueError):
        run_consensus_scenario(scenario(x), 0, DefenseSpec())
    with pytest.raises(ValueError):
        run_consensus_scenario(scenario(x), 3, DefenseSpec(),
                               AdversaryModel((9,), "sign-flip"))


def test_trimmed_confines_honest_values_naive_does_not():
    adv = AdversaryModel((4,), "constant-injection", value=100.0)
    for seed in range(8):
        rng = np.random.default_rng(seed)
        x = np.append(rng.uniform(0.0, 1.0, size=4), 0.5)
        sc = scenario(x)
        lo, hi = x[:4].min(), x[:4].max()

        run = run_consensus_scenario(sc, 15, DefenseSpec(trim_f=1), adv, seed=seed)
        honest = run.values[:, :4]
        assert honest.min() >= lo - 1e-12
        assert honest.max() <= hi + 1e-12

        naive = run_consensus_scenario(sc, 15, DefenseSpec(trim_f=0), adv, seed=seed)
        assert naive.values[:, :4].max() > hi + 1.0
        assert naive.metrics.max_honest_deviation > run.metrics.max_honest_deviation


def test_injection_magnitude_degrades_monotonically():
    # under naive averaging a louder injection never hurts less
    x = [0.1, 0.9, 0.4, 0.6, 0.5]
    devs = []
    for value in (1.0, 10.0, 100.0):
        adv = AdversaryModel((4,), "constant-injection", value=value)
        run = run_consensus_scenario(scenario(x), 12, DefenseSpec(trim_f=0),
                                     adv, seed=3)
        devs.append(run.metrics.max_honest_deviation)
    assert devs[0] <= devs[1] <= devs[2]


def test_trust_reweighting_downgrades_attacker():
    adv = AdversaryModel((3,), "sign-flip")
    x = [0.2, 0.4, 0.6, -5.0]
    run = run_consensus_scenario(scenario(x), 25,
                                 DefenseSpec(trim_f=1, trust_eta=2.0), adv, seed=1)
    assert run.metrics.diameter_series[-1] < 1e-3


def test_recovery_after_attack_window():
    adv = AdversaryModel((2,), "constant-injection", value=50.0, window=(0, 4))
    x = [0.0, 1.0, 0.3]
    run = run_consensus_scenario(scenario(x), 40, DefenseSpec(trim_f=1),
                                 adv, seed=0)
    assert run.metrics.recovery_time is not None
    end = 4 + run.metrics.recovery_time
    assert run.metrics.diameter_series[end] < 1e-3 * run.metrics.diameter_series[0]
    assert all(d >= 1e-3 * run.metrics.diameter_series[0]
               for d in run.metrics.diameter_series[4:end])

    # window past the horizon: no recovery to report
    late = AdversaryModel((2,), "sign-flip", window=(90, 95))
    run = run_consensus_scenario(scenario(x), 10, DefenseSpec(trim_f=1), late)
    assert run.metrics.recovery_time is None


def test_channel_drop_consensus_still_converges():
    adv = AdversaryModel((0,), "channel-drop", drop_prob=0.7)
    x = [4.0, 1.0, 2.0, 3.0]
    run = run_consensus_scenario(scenario(x), 60, DefenseSpec(trim_f=0),
                                 adv, seed=5)
    assert run.metrics.diameter_series[-1] < 1e-6
    # same seed, same drop pattern
    again = run_consensus_scenario(scenario(x), 60, DefenseSpec(trim_f=0),
                                   adv, seed=5)
    assert np.array_equal(run.values, again.values)


def test_observer_corruption_kinds():
    pin = corrupted_observer(PD, AdversaryModel((1,), "constant-injection",
                                                value=0.0), seed=0)
    assert pin(1, 0, ("D", "D")) == ("D", "C")
    # the compromised agent still sees its own action truthfully
    assert pin(2, 1, ("D", "D")) == ("D", "D")

    flip = corrupted_observer(PD, AdversaryModel((0,), "sign-flip"), seed=0)
    assert flip(1, 1, ("C", "D")) == ("D", "D")
    assert flip(2, 1, ("D", "C")) == ("C", "C")

    echo = corrupted_observer(PD, AdversaryModel((1,), "replay", lag=1), seed=0)
    assert echo(1, 0, ("C", "D")) == ("C", "D")     # nothing older to echo
    assert echo(2, 0, ("D", "C")) == ("D", "D")     # reports last step's action

    # seed 2's attack stream draws (0.81, 0.04): transmit, then drop
    stale = corrupted_observer(PD, AdversaryModel((1,), "channel-drop",
                                                  drop_prob=0.5), seed=2)
    assert stale(1, 0, ("C", "D")) == ("C", "D")    # delivered and recorded
    assert stale(2, 0, ("C", "C")) == ("C", "D")    # dropped: holds stale "D"


def test_zero_adversary_is_bit_identical():
    specs = [LearnerSpec("fictitious-play"), LearnerSpec("smoothed-best-response")]
    plain = run_dynamics(PD, specs, 60, seed=7)
    wrapped = run_adversarial_dynamics(PD, specs, 60, None, seed=7)
    assert np.array_equal(plain.actions, wrapped.actions)
    assert np.array_equal(plain.payoffs, wrapped.payoffs)
    for i in range(2):
        assert np.array_equal(plain.policies[i], wrapped.policies[i])
        assert np.array_equal(plain.estimates[i], wrapped.estimates[i])

    # an armed but never-active adversary also leaves the run untouched
    dormant = AdversaryModel((1,), "sign-flip", window=(10 ** 6, 10 ** 6 + 5))
    idle = run_adversarial_dynamics(PD, specs, 60, dormant, seed=7)
    assert np.array_equal(plain.actions, idle.actions)
    for i in range(2):
        assert np.array_equal(plain.policies[i], idle.policies[i])


def test_injection_poisons_estimates_not_payoffs():
    # reports pin agent 1 to "C" while it actually defects
    adv = AdversaryModel((1,), "constant-injection", value=0.0)
    specs = [LearnerSpec("best-response"), LearnerSpec("best-response")]
    trace = run_adversarial_dynamics(PD, specs, 80, adv, seed=3)
    # counterfactuals against the faked "C": agent 0 believes D earns 5
    assert trace.estimates[0][-1] == pytest.approx([3.0, 5.0])
    assert (trace.actions[-10:, 1] == 1).all()
    # realized payoffs follow true play, mutual defection worth 1 each
    assert trace.payoffs[-1] == pytest.approx([1.0, 1.0])
    assert trace.payoffs[-1][0] == PD.payoff(trace.action_labels[-1])[0]
