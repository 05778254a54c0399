"""Coupled payoff-estimation / policy-update learning dynamics.

Each agent keeps an estimate vector q over its own actions and a mixed
policy pi. Per step, with rates mu_t and lambda_t from the agent's
schedules:

    q  <- (1 - mu) q + mu * G      (estimation target G, kind-specific)
    pi <- (1 - lambda) pi + lambda * Psi(q)   (policy target Psi)

Kinds:
  best-response          G = payoff vector vs the last opponent actions,
                         Psi = indicator of argmax q (smallest index on ties)
  smoothed-best-response same G, Psi = softmax(q / tau)
  replicator             same G, Psi = pi reweighted by q shifted positive
  fictitious-play        G = expected payoffs vs empirical opponent
                         frequencies, Psi = indicator of argmax q
  payoff-estimation      G writes the realized payoff into the realized
                         action's coordinate only, Psi = softmax(q / tau)

Observation model: agents see their own realized payoff and the opponents'
realized actions (reported actions; a corruption hook may tamper with them).
Identical (game, specs, horizon, seed) reproduce traces bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .strategic import (StrategicGame, counterfactual_payoffs,
                        expected_counterfactuals, mixed_gap, _profile_index)

KINDS = ("best-response", "smoothed-best-response", "fictitious-play",
         "replicator", "payoff-estimation")


@dataclass(frozen=True)
class RateSchedule:
    """constant: value; harmonic: value / t with t counted from 1."""

    kind: str = "constant"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "harmonic"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"rate value must be in [0, 1], got {self.value}")

    def at(self, t: int) -> float:
        if t < 1:
            raise ValueError("schedules are indexed from t = 1")
        if self.kind == "constant":
            return self.value
        return self.value / t


@dataclass(frozen=True)
class LearnerSpec:
    kind: str
    payoff_rate: RateSchedule = RateSchedule("constant", 1.0)
    policy_rate: RateSchedule = RateSchedule("constant", 1.0)
    temperature: float = 1.0
    initial_policy: tuple | None = None     # None -> uniform
    initial_estimate: tuple | None = None   # None -> zeros

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}; valid: {KINDS}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")


@dataclass
class LearningState:
    """Mutable per-run state; `counts[i]` tallies agent i's realized actions."""

    policies: list
    estimates: list
    counts: list
    t: int = 0

    @staticmethod
    def fresh(game: StrategicGame, specs) -> "LearningState":
        policies, estimates, counts = [], [], []
        for i, spec in enumerate(specs):
            k = len(game.actions[i])
            if spec.initial_policy is None:
                pi = np.full(k, 1.0 / k)
            else:
                pi = np.asarray(spec.initial_policy, dtype=float)
                if pi.shape != (k,) or pi.min() < 0 or abs(pi.sum() - 1.0) > 1e-9:
                    raise ValueError(
                        f"agent {i}: initial policy must be a distribution over {k} actions")
            if spec.initial_estimate is None:
                q = np.zeros(k)
            else:
                q = np.asarray(spec.initial_estimate, dtype=float)
                if q.shape != (k,):
                    raise ValueError(f"agent {i}: initial estimate needs length {k}")
            policies.append(pi)
            estimates.append(q)
            counts.append(np.zeros(k))
        return LearningState(policies, estimates, counts)

    def clone(self) -> "LearningState":
        return LearningState([p.copy() for p in self.policies],
                             [q.copy() for q in self.estimates],
                             [c.copy() for c in self.counts], self.t)


def softmax(q: np.ndarray, tau: float) -> np.ndarray:
    z = q / tau
    z = z - z.max()
    w = np.exp(z)
    return w / w.sum()


def _empirical(counts: np.ndarray) -> np.ndarray:
    total = counts.sum()
    if total == 0:
        return np.full(len(counts), 1.0 / len(counts))
    return counts / total


def estimation_target(game: StrategicGame, agent: int, spec: LearnerSpec,
                      state: LearningState, observed_profile, realized_payoff,
                      signal) -> np.ndarray:
    """The kind-specific target vector G for one update."""
    if spec.kind == "fictitious-play":
        freqs = [_empirical(state.counts[j]) for j in range(game.n_agents)]
        return expected_counterfactuals(game, agent, freqs, signal)
    if spec.kind == "payoff-estimation":
        g = state.estimates[agent].copy()
        g[game.action_index(agent, observed_profile[agent])] = realized_payoff
        return g
    return counterfactual_payoffs(game, agent, observed_profile, signal)


def step_payoff_estimate(q: np.ndarray, target: np.ndarray, mu: float) -> np.ndarray:
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must be in [0, 1], got {mu}")
    return (1.0 - mu) * q + mu * target


def policy_target(spec: LearnerSpec, pi: np.ndarray, q: np.ndarray) -> np.ndarray:
    """The kind-specific policy target Psi."""
    if spec.kind in ("best-response", "fictitious-play"):
        psi = np.zeros(len(q))
        psi[int(np.argmax(q))] = 1.0
        return psi
    if spec.kind in ("smoothed-best-response", "payoff-estimation"):
        return softmax(q, spec.temperature)
    # replicator: reweight pi by estimates shifted to be >= 1
    shifted = q - q.min() + 1.0
    w = pi * shifted
    return w / w.sum()


def step_policy(spec: LearnerSpec, pi: np.ndarray, q: np.ndarray,
                lam: float) -> np.ndarray:
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    return (1.0 - lam) * pi + lam * policy_target(spec, pi, q)


@dataclass
class Trace:
    signals: list            # signal label per step
    actions: np.ndarray      # horizon x n action indices
    action_labels: list      # per-step tuples of labels
    payoffs: np.ndarray      # horizon x n realized payoffs
    policies: list           # per agent: (horizon x k) policy after each step
    estimates: list          # per agent: (horizon x k) estimate after each step
    initial_policies: list
    final_state: LearningState


def _sample(rng, pi: np.ndarray) -> int:
    u = rng.random()
    acc = 0.0
    for j in range(len(pi) - 1):
        acc += pi[j]
        if u < acc:
            return j
    return len(pi) - 1


def run_dynamics(game: StrategicGame, specs, horizon: int, seed=None,
                 rng=None, signal_schedule=None, initial_state=None,
                 observe=None) -> Trace:
    """Run the coupled dynamics for `horizon` steps.

    `signal_schedule(t)` picks the signal per step (default: the game's only
    signal). `observe(t, observer, profile) -> profile` lets a corruption
    layer tamper with reported opponent actions; payoff realization always
    follows the true profile. Exactly one of seed/rng is used; passing rng
    continues an existing stream.
    """
    if len(specs) != game.n_agents:
        raise ValueError(f"need {game.n_agents} learner specs, got {len(specs)}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if rng is None:
        rng = np.random.default_rng(seed)
    state = initial_state if initial_state is not None else LearningState.fresh(game, specs)
    n = game.n_agents
    actions = np.zeros((horizon, n), dtype=np.int64)
    payoffs = np.zeros((horizon, n))
    pol_hist = [np.zeros((horizon, len(game.actions[i]))) for i in range(n)]
    est_hist = [np.zeros((horizon, len(game.actions[i]))) for i in range(n)]
    signals = []
    labels = []
    initial_policies = [p.copy() for p in state.policies]

    default_signal = game.resolve_signal(None) if len(game.payoffs) == 1 else None
    for step in range(horizon):
        state.t += 1
        t = state.t
        if signal_schedule is None:
            sig = default_signal
            if sig is None:
                raise ValueError("multi-signal game needs a signal schedule")
        else:
            sig = game.resolve_signal(signal_schedule(t))
        idx = [_sample(rng, state.policies[i]) for i in range(n)]
        profile = tuple(game.actions[i][idx[i]] for i in range(n))
        pay = game.payoff(profile, sig)
        for i in range(n):
            state.counts[i][idx[i]] += 1.0
        for i in range(n):
            spec = specs[i]
            seen = profile if observe is None else observe(t, i, profile)
            target = estimation_target(game, i, spec, state, seen,
                                       float(pay[i]), sig)
            state.estimates[i] = step_payoff_estimate(
                state.estimates[i], target, spec.payoff_rate.at(t))
            state.policies[i] = step_policy(
                spec, state.policies[i], state.estimates[i],
                spec.policy_rate.at(t))
        actions[step] = idx
        payoffs[step] = pay
        signals.append(sig)
        labels.append(profile)
        for i in range(n):
            pol_hist[i][step] = state.policies[i]
            est_hist[i][step] = state.estimates[i]
    return Trace(signals, actions, labels, payoffs, pol_hist, est_hist,
                 initial_policies, state)


@dataclass(frozen=True)
class Diagnostics:
    external_regret: np.ndarray      # per agent, time-averaged
    empirical_frequencies: list      # per agent, realized action frequencies
    gap_times: tuple                 # steps at which the gap was sampled
    gap_series: np.ndarray           # equilibrium gap of the empirical product profile


def diagnostics(game: StrategicGame, trace: Trace, gap_stride: int = 1) -> Diagnostics:
    """Regret, empirical frequencies and the equilibrium-gap series.

    External regret for agent i is
    max_a (1/T) sum_t [J_i(a, x_{-i,t}) - J_i(x_t)]; the gap series applies
    the unilateral-gain check to the product of empirical frequencies
    accumulated up to each sampled step. Multi-signal traces measure regret
    against the table active at each step.
    """
    if gap_stride < 1:
        raise ValueError("gap_stride must be >= 1")
    horizon, n = trace.actions.shape
    freqs = []
    regrets = np.zeros(n)
    by_signal = {}
    for step in range(horizon):
        by_signal.setdefault(trace.signals[step], []).append(step)
    for i in range(n):
        k = len(game.actions[i])
        counts = np.bincount(trace.actions[:, i], minlength=k).astype(float)
        freqs.append(counts / horizon)
        best_sum = np.zeros(k)
        for sig, steps in by_signal.items():
            for step in steps:
                vec = counterfactual_payoffs(game, i, trace.action_labels[step], sig)
                best_sum += vec
        realized = trace.payoffs[:, i].sum()
        regrets[i] = (best_sum.max() - realized) / horizon

    times = []
    gaps = []
    running = [np.zeros(len(game.actions[i])) for i in range(n)]
    main_signal = max(by_signal, key=lambda s: len(by_signal[s]))
    for step in range(horizon):
        for i in range(n):
            running[i][trace.actions[step, i]] += 1.0
        if (step + 1) % gap_stride == 0 or step == horizon - 1:
            mixed = [running[i] / (step + 1) for i in range(n)]
            times.append(step + 1)
            gaps.append(mixed_gap(game, mixed, main_signal))
    return Diagnostics(regrets, freqs, tuple(times), np.asarray(gaps))
