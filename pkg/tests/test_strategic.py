"""Strategic game representation and pure/mixed equilibrium checks."""

import itertools

import numpy as np
import pytest

from stgames.errors import CapacityError
from stgames.strategic import (StrategicGame, best_responses,
                               counterfactual_payoffs, enumerate_pure_nash,
                               expected_payoffs, is_nash, mixed_gap,
                               welfare_and_poa)

PD = {("C", "C"): (3, 3), ("C", "D"): (0, 5),
      ("D", "C"): (5, 0), ("D", "D"): (1, 1)}


def pd_game():
    return StrategicGame.single((("C", "D"), ("C", "D")), PD)


def pennies():
    table = {("H", "H"): (1, -1), ("H", "T"): (-1, 1),
             ("T", "H"): (-1, 1), ("T", "T"): (1, -1)}
    return StrategicGame.single((("H", "T"), ("H", "T")), table)


def random_game(rng, n_agents, n_actions):
    actions = tuple(tuple(f"a{j}" for j in range(n_actions))
                    for _ in range(n_agents))
    table = {p: rng.normal(size=n_agents) for p in itertools.product(*actions)}
    return StrategicGame.single(actions, table)


def test_payoff_lookup():
    g = pd_game()
    assert g.payoff(("C", "D")) == pytest.approx([0, 5])
    assert g.payoff(("D", "C")) == pytest.approx([5, 0])
    assert g.n_agents == 2


def test_defection_dominates():
    g = pd_game()
    check = is_nash(g, ("D", "D"))
    assert check.is_nash
    check = is_nash(g, ("C", "C"))
    assert not check.is_nash
    assert check.agent == 0 and check.deviation == "D"
    assert check.gain == pytest.approx(2.0)
    # the deviation gain is exactly the eps that rescues the profile
    assert is_nash(g, ("C", "C"), eps=2.0).is_nash
    assert not is_nash(g, ("C", "C"), eps=2.0 - 1e-9).is_nash


def test_pure_equilibrium_enumeration():
    assert enumerate_pure_nash(pd_game()) == [("D", "D")]
    assert enumerate_pure_nash(pennies()) == []


def test_enumeration_matches_brute_force():
    rng = np.random.default_rng(42)
    for _ in range(30):
        n = int(rng.integers(2, 4))
        k = int(rng.integers(2, 4))
        g = random_game(rng, n, k)
        found = set(enumerate_pure_nash(g))
        for profile in g.profiles():
            base = g.payoff(profile)
            stable = True
            for i in range(n):
                for alt in g.actions[i]:
                    dev = list(profile)
                    dev[i] = alt
                    if g.payoff(tuple(dev))[i] > base[i]:
                        stable = False
            assert (profile in found) == stable


def test_counterfactual_row():
    g = pd_game()
    vec = counterfactual_payoffs(g, 0, ("C", "D"))
    # agent 0 sweeping C, D while agent 1 stays on D
    assert vec == pytest.approx([0, 1])
    assert best_responses(g, 0, ("C", "D")) == ("D",)


def test_best_response_ties_exact():
    table = {("a", "x"): (1, 2), ("a", "y"): (1, 0),
             ("b", "x"): (1, 1), ("b", "y"): (0, 0)}
    g = StrategicGame.single((("a", "b"), ("x", "y")), table)
    assert best_responses(g, 0, ("a", "x")) == ("a", "b")
    assert best_responses(g, 1, ("b", "x")) == ("x",)


def test_constant_shift_preserves_best_responses():
    # adding k to one agent's whole table cannot move any argmax
    rng = np.random.default_rng(314)
    for _ in range(100):
        n = int(rng.integers(2, 4))
        k_actions = int(rng.integers(2, 4))
        g = random_game(rng, n, k_actions)
        agent = int(rng.integers(n))
        shift = float(rng.uniform(-9, 9))
        table = {p: g.payoff(p).copy() for p in g.profiles()}
        for p in table:
            table[p][agent] += shift
        shifted = StrategicGame.single(g.actions, table)
        assert enumerate_pure_nash(shifted) == enumerate_pure_nash(g)
        probe = next(iter(g.profiles()))
        assert best_responses(shifted, agent, probe) == best_responses(g, agent, probe)
        assert is_nash(shifted, probe).is_nash == is_nash(g, probe).is_nash


def test_welfare_ratio_on_dilemma():
    rep = welfare_and_poa(pd_game())
    assert rep.defined
    assert rep.optimal_welfare == pytest.approx(6.0)
    assert rep.optimal_profile == ("C", "C")
    assert rep.worst_equilibrium_welfare == pytest.approx(2.0)
    assert rep.ratio == pytest.approx(3.0)


def test_welfare_ratio_undefined_cases():
    rep = welfare_and_poa(pennies())
    assert not rep.defined and rep.ratio is None
    assert rep.reason == "no pure equilibrium"

    table = {("a", "x"): (0, 0), ("a", "y"): (-1, -1),
             ("b", "x"): (-1, -1), ("b", "y"): (-2, -2)}
    g = StrategicGame.single((("a", "b"), ("x", "y")), table)
    rep = welfare_and_poa(g)
    assert not rep.defined
    assert rep.reason == "zero-welfare equilibrium"
    assert rep.worst_equilibrium_welfare == pytest.approx(0.0)


def test_expected_payoffs_against_enumeration():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(2, 4))
        k = int(rng.integers(2, 4))
        g = random_game(rng, n, k)
        mixed = []
        for _ in range(n):
            w = rng.uniform(0.1, 1.0, size=k)
            mixed.append(w / w.sum())
        want = np.zeros(n)
        for profile in g.profiles():
            prob = 1.0
            for i, label in enumerate(profile):
                prob *= mixed[i][g.action_index(i, label)]
            want += prob * g.payoff(profile)
        got = expected_payoffs(g, mixed)
        assert got == pytest.approx(want, abs=1e-12)


def test_mixed_gap_vanishes_at_mixed_equilibrium():
    g = pennies()
    assert mixed_gap(g, [np.array([0.5, 0.5])] * 2) == pytest.approx(0.0, abs=1e-12)
    # off the fixed point the mismatcher profits from pure T
    assert mixed_gap(g, [np.array([0.9, 0.1]), np.array([0.5, 0.5])]) \
        == pytest.approx(0.8, abs=1e-12)
    assert mixed_gap(g, [np.array([0.9, 0.1]), np.array([0.6, 0.4])]) > 0.01


def test_signal_tables():
    tables = {"lo": PD,
              "hi": {("C", "C"): (6, 6), ("C", "D"): (0, 5),
                     ("D", "C"): (5, 0), ("D", "D"): (1, 1)}}
    g = StrategicGame.from_tables((("C", "D"), ("C", "D")), tables)
    assert set(g.signals) == {"lo", "hi"}
    assert g.payoff(("C", "C"), "hi") == pytest.approx([6, 6])
    with pytest.raises(ValueError):
        g.payoff(("C", "C"))          # ambiguous without a signal
    with pytest.raises(ValueError):
        g.payoff(("C", "C"), "mid")
    assert is_nash(g, ("C", "C"), signal="hi").is_nash


def test_construction_validation():
    with pytest.raises(ValueError):
        StrategicGame.single((("C", "C"), ("C", "D")), PD)   # duplicate label
    with pytest.raises(ValueError):
        StrategicGame.single((("C", "D"), ("C", "D")),
                             {("C", "C"): (3, 3)})           # missing profiles
    with pytest.raises(ValueError):
        StrategicGame.single((("C", "D"), ("C", "D")),
                             {**PD, ("C", "C"): (3, 3, 3)})  # wrong arity
    with pytest.raises(ValueError):
        pd_game().payoff(("C", "E"))
    with pytest.raises(CapacityError):
        actions = tuple((("0", "1")) for _ in range(7))
        table = {p: [0.0] * 7 for p in itertools.product(*actions)}
        StrategicGame.single(actions, table)


def test_negative_eps_rejected():
    with pytest.raises(ValueError):
        is_nash(pd_game(), ("D", "D"), eps=-0.1)
