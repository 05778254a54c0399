"""Coordination layer: information design, signal selection, slow/fast loops.

A coordinator picks a signal c on a slow clock; agents learn on a fast clock
under that signal. The pieces here are the information mechanism (what each
agent gets to see), admissible-set restriction (what each agent may play),
coordinator update rules, the two-timescale driver, Stackelberg signal
selection against enumerated pure equilibria, Monte-Carlo rollouts of a
finite-state dynamic game, and greedy merge-split dynamics on coalition
structures.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .coop import CoalitionGame, members
from .incentives import IncentiveSchedule, modified_payoff
from .learning import LearningState, Trace, run_dynamics
from .strategic import (StrategicGame, _profile_index, enumerate_pure_nash,
                        expected_payoffs)

# --- information mechanisms -------------------------------------------------

_FIELDS = ("state", "actions", "signal")


@dataclass(frozen=True)
class InformationMechanism:
    """Which observables go on the public channel, which go per-agent.

    Public fields arrive identically for everyone; private fields arrive
    per-agent ("actions" privately means own action only). `noise_sigma`
    adds Gaussian noise to each agent's private numeric view of the state.
    """

    public_fields: tuple = _FIELDS
    private_fields: tuple = ()
    noise_sigma: float = 0.0

    def __post_init__(self):
        for f in self.public_fields + self.private_fields:
            if f not in _FIELDS:
                raise ValueError(f"unknown information field {f!r}; valid: {_FIELDS}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


@dataclass(frozen=True)
class InfoRecord:
    public: dict
    private: dict
    noisy: dict


def generate_information(mechanism: InformationMechanism, n_agents: int,
                         state, profile, signal, rng) -> list:
    """One InfoRecord per agent for the current (state, actions, signal)."""
    public = {}
    if "state" in mechanism.public_fields:
        public["state"] = state
    if "actions" in mechanism.public_fields:
        public["actions"] = tuple(profile)
    if "signal" in mechanism.public_fields:
        public["signal"] = signal
    records = []
    for i in range(n_agents):
        private = {}
        if "state" in mechanism.private_fields:
            private["state"] = state
        if "actions" in mechanism.private_fields:
            private["own_action"] = profile[i]
        if "signal" in mechanism.private_fields:
            private["signal"] = signal
        noisy = {}
        if mechanism.noise_sigma > 0:
            noisy["state"] = float(state) + mechanism.noise_sigma * rng.standard_normal()
        records.append(InfoRecord(public, private, noisy))
    return records


# --- admissible action sets --------------------------------------------------

@dataclass(frozen=True)
class AdmissibleSetRule:
    """signal -> per-agent tuples of allowed action labels.

    Signals missing from the map leave the game unrestricted.
    """

    allowed: dict

    def for_signal(self, game: StrategicGame, signal):
        if signal not in self.allowed:
            return tuple(game.actions)
        per_agent = self.allowed[signal]
        if len(per_agent) != game.n_agents:
            raise ValueError(f"rule at {signal!r} must cover all agents")
        out = []
        for i, labels in enumerate(per_agent):
            labels = tuple(labels)
            if not labels:
                raise ValueError(f"agent {i}: admissible set empty at {signal!r}")
            for lab in labels:
                game.action_index(i, lab)
            out.append(labels)
        return tuple(out)


def apply_admissible_sets(game: StrategicGame, rule: AdmissibleSetRule,
                          signal) -> StrategicGame:
    """The subgame where each agent is held to its admissible actions."""
    sig = game.resolve_signal(signal)
    allowed = rule.for_signal(game, sig)
    keep = [np.asarray([game.action_index(i, lab) for lab in allowed[i]])
            for i in range(game.n_agents)]
    tables = {}
    for s, tab in game.payoffs.items():
        sel = np.ix_(np.arange(game.n_agents), *keep)
        tables[s] = tab[sel].copy()
    return StrategicGame(allowed, tables)


# --- coordinator updates -----------------------------------------------------

@dataclass(frozen=True)
class EpochDigest:
    """What the slow clock sees of one fast epoch."""

    signal: str
    frequencies: tuple           # per agent, over the full action set
    mean_welfare: float
    mean_payoffs: tuple


@dataclass(frozen=True)
class CoordinatorPolicy:
    kind: str                    # "constant" | "round-robin" | "greedy"
    candidates: tuple
    welfare: object = None       # greedy: callable (game, candidate, digest) -> float

    def __post_init__(self):
        if self.kind not in ("constant", "round-robin", "greedy"):
            raise ValueError(f"unknown coordinator kind {self.kind!r}")
        if not self.candidates:
            raise ValueError("candidate set must be nonempty")


def _expected_welfare(game: StrategicGame, candidate, digest: EpochDigest) -> float:
    mixed = [np.asarray(f, dtype=float) for f in digest.frequencies]
    return float(expected_payoffs(game, mixed, candidate).sum())


def coordinator_update(policy: CoordinatorPolicy, game: StrategicGame,
                       current, digest: EpochDigest | None):
    """Next signal. Greedy scores candidates on the last epoch's digest
    (expected welfare under the empirical frequency product by default) and
    keeps the earliest candidate on ties."""
    if policy.kind == "constant":
        return current
    if policy.kind == "round-robin":
        pos = policy.candidates.index(current) if current in policy.candidates else -1
        return policy.candidates[(pos + 1) % len(policy.candidates)]
    if digest is None:
        return current
    score = policy.welfare if policy.welfare is not None else _expected_welfare
    best, best_val = None, None
    for cand in policy.candidates:
        val = float(score(game, cand, digest))
        if best_val is None or val > best_val:
            best, best_val = cand, val
    return best


# --- two-timescale driver ----------------------------------------------------

@dataclass(frozen=True)
class EpochRecord:
    index: int
    signal: str
    digest: EpochDigest


@dataclass
class TwoTimescaleResult:
    epochs: list
    traces: list                 # per-epoch Trace
    final_signal: str
    final_state: LearningState


def _project_state(state: LearningState, game: StrategicGame, allowed):
    """Restrict policies/estimates to the admissible index sets."""
    sub_policies, sub_estimates, sub_counts, keep = [], [], [], []
    for i, labels in enumerate(allowed):
        idx = np.asarray([game.action_index(i, lab) for lab in labels])
        keep.append(idx)
        if len(idx) == len(state.policies[i]):
            pi = state.policies[i].copy()      # unrestricted: bit-exact
        else:
            pi = state.policies[i][idx]
            mass = pi.sum()
            pi = pi / mass if mass > 0 else np.full(len(idx), 1.0 / len(idx))
        sub_policies.append(pi)
        sub_estimates.append(state.estimates[i][idx].copy())
        sub_counts.append(state.counts[i][idx].copy())
    return LearningState(sub_policies, sub_estimates, sub_counts, state.t), keep


def _embed_state(state: LearningState, sub: LearningState, keep):
    for i, idx in enumerate(keep):
        pi = np.zeros_like(state.policies[i])
        pi[idx] = sub.policies[i]
        state.policies[i] = pi
        state.estimates[i][idx] = sub.estimates[i]
        state.counts[i][idx] = sub.counts[i]
    state.t = sub.t


def run_two_timescale(game: StrategicGame, specs, coordinator: CoordinatorPolicy,
                      outer_steps: int, epoch_length: int, seed=None,
                      admissible: AdmissibleSetRule | None = None,
                      incentives: IncentiveSchedule | None = None,
                      initial_signal=None) -> TwoTimescaleResult:
    """K outer signal updates around T-step learning epochs.

    One learning state persists across epochs; each epoch runs on the game
    restricted to the signal's admissible sets (policies projected in, then
    embedded back) with any incentive transfers applied. With one outer step,
    no restriction and no transfers this is exactly `run_dynamics`.
    """
    if outer_steps < 1 or epoch_length < 1:
        raise ValueError("outer_steps and epoch_length must be >= 1")
    rng = np.random.default_rng(seed)
    played = modified_payoff(game, incentives) if incentives is not None else game
    signal = initial_signal if initial_signal is not None else coordinator.candidates[0]
    played.resolve_signal(signal)
    state = LearningState.fresh(game, specs)
    epochs, traces = [], []
    digest = None
    for k in range(outer_steps):
        if k > 0:
            signal = coordinator_update(coordinator, played, signal, digest)
        if admissible is not None:
            allowed = admissible.for_signal(played, signal)
        else:
            allowed = tuple(played.actions)
        restricted = (played if allowed == tuple(played.actions)
                      else apply_admissible_sets(played, AdmissibleSetRule({signal: allowed}), signal))
        sub, keep = _project_state(state, played, allowed)
        trace = run_dynamics(restricted, specs, epoch_length, rng=rng,
                             signal_schedule=lambda t: signal,
                             initial_state=sub)
        _embed_state(state, trace.final_state, keep)
        freqs = []
        for i in range(game.n_agents):
            full = np.zeros(len(game.actions[i]))
            counts = np.bincount(trace.actions[:, i],
                                 minlength=len(allowed[i])).astype(float)
            full[keep[i]] = counts / epoch_length
            freqs.append(tuple(full))
        mean_pay = trace.payoffs.mean(axis=0)
        digest = EpochDigest(signal, tuple(freqs), float(mean_pay.sum()),
                             tuple(float(v) for v in mean_pay))
        epochs.append(EpochRecord(k, signal, digest))
        traces.append(trace)
    return TwoTimescaleResult(epochs, traces, signal, state)


# --- Stackelberg signal selection ---------------------------------------------

@dataclass(frozen=True)
class CandidateOutcome:
    candidate: str
    equilibria: tuple
    values: tuple                # leader value per equilibrium
    value: float | None          # max (optimistic) or min (pessimistic)
    skipped: bool = False


@dataclass(frozen=True)
class StackelbergReport:
    mode: str
    best_candidate: str | None
    leader_value: float | None
    outcomes: tuple


def total_welfare_objective(game: StrategicGame, candidate, profile) -> float:
    return float(game.payoff(profile, candidate).sum())


def stackelberg_solve(game: StrategicGame, candidates, mode: str = "optimistic",
                      leader_objective=None,
                      admissible: AdmissibleSetRule | None = None) -> StackelbergReport:
    """Pick the signal maximizing the leader's value over follower equilibria.

    Per candidate signal the follower game's pure equilibria are enumerated;
    optimistic takes the best equilibrium for the leader, pessimistic the
    worst. Candidates without a pure equilibrium are skipped with a warning.
    Ties keep the earliest candidate.
    """
    if mode not in ("optimistic", "pessimistic"):
        raise ValueError(f"mode must be optimistic or pessimistic, got {mode!r}")
    objective = leader_objective if leader_objective is not None else total_welfare_objective
    outcomes = []
    best, best_val = None, None
    for cand in candidates:
        game.resolve_signal(cand)
        sub = (apply_admissible_sets(game, admissible, cand)
               if admissible is not None else game)
        eqs = tuple(enumerate_pure_nash(sub, cand))
        if not eqs:
            warnings.warn(f"candidate {cand!r} has no pure equilibrium; skipped")
            outcomes.append(CandidateOutcome(cand, (), (), None, True))
            continue
        vals = tuple(float(objective(sub, cand, e)) for e in eqs)
        val = max(vals) if mode == "optimistic" else min(vals)
        outcomes.append(CandidateOutcome(cand, eqs, vals, val))
        if best_val is None or val > best_val:
            best, best_val = cand, val
    return StackelbergReport(mode, best, best_val, tuple(outcomes))


# --- Monte-Carlo rollouts of a finite-state dynamic game ----------------------

@dataclass(frozen=True)
class DynamicGame:
    """Finite-state stage games with table-driven transitions.

    `transitions[(state, profile)]` is either a state label (deterministic)
    or a tuple of (state, probability) pairs summing to 1.
    """

    stage_games: dict            # state -> StrategicGame
    transitions: dict
    initial_state: str

    def __post_init__(self):
        if self.initial_state not in self.stage_games:
            raise ValueError(f"unknown initial state {self.initial_state!r}")
        for key, nxt in self.transitions.items():
            if isinstance(nxt, str):
                continue
            total = sum(p for _, p in nxt)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"transition at {key} sums to {total}, not 1")

    @property
    def n_agents(self) -> int:
        return next(iter(self.stage_games.values())).n_agents


@dataclass(frozen=True)
class RolloutPolicy:
    """feedback: act on the current state; open-loop: on the initial state only.

    `table` maps state -> action label. An open-loop `plan` (action sequence
    from t = 0, last action held) overrides the table when present.
    """

    kind: str                    # "feedback" | "open-loop"
    table: dict | None = None
    plan: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("feedback", "open-loop"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.table is None and self.plan is None:
            raise ValueError("policy needs a table or a plan")

    def action(self, t: int, state, initial_state):
        if self.kind == "feedback":
            return self.table[state]
        if self.plan is not None:
            return self.plan[min(t, len(self.plan) - 1)]
        return self.table[initial_state]


@dataclass(frozen=True)
class RolloutReport:
    mean: np.ndarray             # discounted value per agent
    stderr: np.ndarray
    horizon: int
    truncation_bound: float      # worst-case tail mass left out
    rollouts: int


def rollout_dynamic_game(dyn: DynamicGame, policies, beta: float,
                         rollouts: int, seed=None) -> RolloutReport:
    """Average discounted payoffs over seeded rollouts.

    The horizon is the smallest H with beta^H < 1e-6; the report carries the
    tail bound beta^H * max|stage payoff| / (1 - beta).
    """
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must be in (0, 1), got {beta}")
    if rollouts < 1:
        raise ValueError("rollouts must be >= 1")
    if len(policies) != dyn.n_agents:
        raise ValueError(f"need {dyn.n_agents} policies")
    rng = np.random.default_rng(seed)
    horizon = 1
    acc = beta
    while acc >= 1e-6:
        acc *= beta
        horizon += 1
    max_abs = max(float(np.max(np.abs(g.payoffs[sig])))
                  for g in dyn.stage_games.values() for sig in g.payoffs)
    bound = (beta ** horizon) * max_abs / (1.0 - beta)

    totals = np.zeros((rollouts, dyn.n_agents))
    for r in range(rollouts):
        state = dyn.initial_state
        disc = 1.0
        for t in range(horizon):
            stage = dyn.stage_games[state]
            profile = tuple(policies[i].action(t, state, dyn.initial_state)
                            for i in range(dyn.n_agents))
            totals[r] += disc * stage.payoff(profile)
            nxt = dyn.transitions.get((state, profile), state)
            if not isinstance(nxt, str):
                labels = [s for s, _ in nxt]
                probs = np.asarray([p for _, p in nxt])
                nxt = labels[int(rng.choice(len(labels), p=probs))]
            state = nxt
            disc *= beta
    mean = totals.mean(axis=0)
    if rollouts > 1:
        stderr = totals.std(axis=0, ddof=1) / np.sqrt(rollouts)
    else:
        stderr = np.zeros(dyn.n_agents)
    return RolloutReport(mean, stderr, horizon, bound, rollouts)


# --- greedy merge-split coalition dynamics ------------------------------------

@dataclass(frozen=True)
class StructureMove:
    kind: str                    # "merge" | "split" | "none"
    gain: float
    detail: tuple                # masks involved


def _canonical(structure):
    return tuple(sorted(structure))


def evolve_coalitions(game: CoalitionGame, structure):
    """One greedy merge-split move on a coalition structure.

    Merges the block pair with the largest strictly positive merged-value
    gain; failing that, applies the best strictly improving bipartition of a
    block; otherwise the structure is a fixed point. Ties resolve in bitmask
    order.
    """
    blocks = _canonical(structure)
    union = 0
    for b in blocks:
        if b == 0:
            raise ValueError("structure blocks must be nonempty")
        if union & b:
            raise ValueError("structure blocks must be disjoint")
        union |= b
    if union != game.full:
        raise ValueError("structure must cover all agents")

    best_gain, best_pair = 0.0, None
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            gain = game.value(blocks[i] | blocks[j]) - game.value(blocks[i]) - game.value(blocks[j])
            if gain > best_gain + 1e-12:
                best_gain, best_pair = gain, (blocks[i], blocks[j])
    if best_pair is not None:
        merged = [b for b in blocks if b not in best_pair]
        merged.append(best_pair[0] | best_pair[1])
        return _canonical(merged), StructureMove("merge", best_gain, best_pair)

    best_gain, best_split = 0.0, None
    for b in blocks:
        low = b & -b
        rest_bits = [i for i in members(b) if (1 << i) != low]
        halves = []
        for r in range(1 << len(rest_bits)):
            a = low
            for k, bit in enumerate(rest_bits):
                if r >> k & 1:
                    a |= 1 << bit
            if a != b:
                halves.append(a)           # the half holding b's lowest bit
        halves.sort()
        for a in halves:
            other = b ^ a
            gain = game.value(a) + game.value(other) - game.value(b)
            if gain > best_gain + 1e-12:
                best_gain, best_split = gain, (b, a, other)
    if best_split is not None:
        b, a, rest = best_split
        out = [blk for blk in blocks if blk != b] + [a, rest]
        return _canonical(out), StructureMove("split", best_gain, (a, rest))
    return blocks, StructureMove("none", 0.0, ())


def run_merge_split(game: CoalitionGame, structure, max_steps: int = 64):
    """Iterate greedy moves to a fixed point; returns (structure, moves)."""
    cur = _canonical(structure)
    moves = []
    for _ in range(max_steps):
        nxt, move = evolve_coalitions(game, cur)
        if move.kind == "none":
            return cur, moves
        moves.append(move)
        cur = nxt
    return cur, moves
