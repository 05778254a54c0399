"""Payoff modification, budgets, Pareto checks and transfer synthesis.

An incentive schedule adds per-agent transfers on top of a game's payoffs,
profile by profile (stationary in time). Hierarchical schedules split the
transfer into a per-agent inner part and a per-group outer part; flattening
recovers a plain schedule with identical modified payoffs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ComputationError
from .lp import LinearProgram, solve_lp
from .strategic import (StrategicGame, _profile_index, counterfactual_payoffs,
                        is_nash)

TOL = 1e-9


@dataclass(frozen=True)
class IncentiveSchedule:
    """Per-signal transfer tables shaped like the game's payoff tables."""

    transfers: dict        # signal -> ndarray (n, grid...)

    @staticmethod
    def zero(game: StrategicGame) -> "IncentiveSchedule":
        return IncentiveSchedule(
            {sig: np.zeros_like(tab) for sig, tab in game.payoffs.items()})

    @staticmethod
    def on_profile(game: StrategicGame, profile, per_agent,
                   signal=None) -> "IncentiveSchedule":
        """Transfers paid only at one profile (zero elsewhere)."""
        sig = game.resolve_signal(signal)
        sched = IncentiveSchedule.zero(game)
        idx = _profile_index(game.actions, tuple(profile))
        vec = np.asarray(per_agent, dtype=float)
        if vec.shape != (game.n_agents,):
            raise ValueError(f"need {game.n_agents} transfers, got {vec.shape}")
        sched.transfers[sig][(slice(None),) + idx] = vec
        return sched

    def per_agent(self, game: StrategicGame, profile, signal=None) -> np.ndarray:
        sig = game.resolve_signal(signal)
        idx = _profile_index(game.actions, tuple(profile))
        return self.transfers[sig][(slice(None),) + idx].copy()


def modified_payoff(game: StrategicGame, schedule: IncentiveSchedule) -> StrategicGame:
    """The game with payoffs J + rho; the input game is untouched."""
    for sig in game.payoffs:
        if sig not in schedule.transfers:
            raise ValueError(f"schedule missing signal {sig!r}")
        if schedule.transfers[sig].shape != game.payoffs[sig].shape:
            raise ValueError(f"schedule shape mismatch at signal {sig!r}")
    return StrategicGame(game.actions,
                         {sig: game.payoffs[sig] + schedule.transfers[sig]
                          for sig in game.payoffs})


@dataclass(frozen=True)
class GroupPartition:
    groups: tuple          # tuple of tuples of agent ids, disjoint, covering 0..n-1

    def __post_init__(self):
        seen = sorted(i for g in self.groups for i in g)
        if seen != list(range(len(seen))):
            raise ValueError(f"groups must partition 0..n-1, got {self.groups}")

    def group_of(self, agent: int) -> int:
        for m, g in enumerate(self.groups):
            if agent in g:
                return m
        raise ValueError(f"agent {agent} not covered by {self.groups}")


@dataclass(frozen=True)
class HierarchicalIncentive:
    """rho_i = inner_i + outer_{group(i)}, evaluated profile by profile."""

    partition: GroupPartition
    inner: IncentiveSchedule
    outer: dict            # signal -> ndarray (n_groups, grid...)

    def flatten(self, game: StrategicGame) -> IncentiveSchedule:
        out = {}
        for sig, inner_tab in self.inner.transfers.items():
            outer_tab = self.outer[sig]
            tab = inner_tab.copy()
            for i in range(game.n_agents):
                tab[i] += outer_tab[self.partition.group_of(i)]
            out[sig] = tab
        return IncentiveSchedule(out)


def is_pareto_improving(baseline: np.ndarray, induced: np.ndarray,
                        tol: float = TOL) -> bool:
    """Weak improvement for everyone, strict (> tol) for at least one."""
    baseline = np.asarray(baseline, dtype=float)
    induced = np.asarray(induced, dtype=float)
    if baseline.shape != induced.shape:
        raise ValueError("payoff vectors must have equal length")
    if np.any(induced < baseline - tol):
        return False
    return bool(np.any(induced > baseline + tol))


@dataclass(frozen=True)
class BudgetSpec:
    limit: float
    delta: float                     # discount factor in (0, 1]
    horizon: int | None = None       # None = infinite

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must be in (0, 1], got {self.delta}")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be >= 1 when finite")
        if self.horizon is None and self.delta == 1.0:
            raise ValueError("delta = 1 with an infinite horizon has no "
                             "finite discounted total")


@dataclass(frozen=True)
class BudgetReport:
    spent: float
    within: bool
    mode: str              # "finite" | "closed-form"


def budget_check(budget: BudgetSpec, game: StrategicGame,
                 schedule: IncentiveSchedule, trajectory,
                 signal=None) -> BudgetReport:
    """Discounted total transfer along a trajectory vs the budget.

    `trajectory` is a sequence of profiles (finite horizon: all of them,
    discounted from t = 0) or a single stationary profile for the infinite
    case, where the geometric closed form sum/(1 - delta) applies.
    """
    sig = game.resolve_signal(signal)
    profiles = list(trajectory)
    if profiles and isinstance(profiles[0], str):
        profiles = [tuple(profiles)]          # a single bare profile
    if budget.horizon is None:
        if len(set(profiles)) != 1:
            raise ValueError("infinite-horizon budget check needs a single "
                             "stationary profile")
        per_step = float(schedule.per_agent(game, profiles[0], sig).sum())
        spent = per_step / (1.0 - budget.delta)
        return BudgetReport(spent, spent <= budget.limit + TOL, "closed-form")
    if len(profiles) != budget.horizon:
        raise ValueError(
            f"trajectory length {len(profiles)} != horizon {budget.horizon}")
    spent = 0.0
    for t, profile in enumerate(profiles):
        spent += (budget.delta ** t) * float(
            schedule.per_agent(game, profile, sig).sum())
    return BudgetReport(spent, spent <= budget.limit + TOL, "finite")


@dataclass(frozen=True)
class IncentiveDesign:
    status: str                      # "ok" | "infeasible"
    schedule: IncentiveSchedule | None
    per_period_spend: float | None
    discounted_spend: float | None
    reason: str = ""


def design_incentive(game: StrategicGame, target, baseline, budget: BudgetSpec,
                     signal=None) -> IncentiveDesign:
    """Minimum-total nonnegative transfers on `target` making it worth keeping.

    The LP minimizes sum_i rho_i subject to rho_i >= 0, every unilateral
    deviation from `target` unprofitable under J + rho, and weak Pareto
    improvement over `baseline` payoffs. The result is verified (equilibrium,
    Pareto with a strict winner, budget) before being reported; a minimum
    with no strictly-better-off agent is reported infeasible since the strict
    requirement has no attainable minimum.
    """
    sig = game.resolve_signal(signal)
    n = game.n_agents
    target = tuple(target)
    baseline = tuple(baseline)
    base_pay = game.payoff(baseline, sig)
    tgt_pay = game.payoff(target, sig)

    rows, rhs = [], []
    for i in range(n):
        vec = counterfactual_payoffs(game, i, target, sig)
        for j in range(len(vec)):
            if game.actions[i][j] == target[i]:
                continue
            row = np.zeros(n)
            row[i] = 1.0
            rows.append(row)
            rhs.append(float(vec[j] - tgt_pay[i]))      # rho_i >= gain
        row = np.zeros(n)
        row[i] = 1.0
        rows.append(row)
        rhs.append(float(base_pay[i] - tgt_pay[i]))     # weak Pareto
    lp = LinearProgram(np.ones(n), np.asarray(rows), (">=",) * len(rows),
                       np.asarray(rhs))
    sol = solve_lp(lp)
    if sol.status != "optimal":
        raise ComputationError(f"incentive LP ended {sol.status}")
    rho = np.maximum(sol.x, 0.0)
    schedule = IncentiveSchedule.on_profile(game, target, rho, sig)

    modified = modified_payoff(game, schedule)
    # ties are allowed at the optimum, so verify at the shared tolerance;
    # exact zero would trip on the binding constraints' float wobble
    check = is_nash(modified, target, TOL, sig)
    if not check.is_nash:
        raise ComputationError("synthesized transfers fail the equilibrium check")
    induced = tgt_pay + rho
    if not is_pareto_improving(base_pay, induced):
        return IncentiveDesign("infeasible", None, None, None,
                               "no strict Pareto improvement at minimal transfers")
    per_period = float(rho.sum())
    horizon = budget.horizon
    if horizon is None:
        traj = [target]
    else:
        traj = [target] * horizon
    report = budget_check(budget, game, schedule, traj, sig)
    if not report.within:
        return IncentiveDesign("infeasible", None, per_period, report.spent,
                               f"discounted spend {report.spent} exceeds "
                               f"budget {budget.limit}")
    return IncentiveDesign("ok", schedule, per_period, report.spent)
