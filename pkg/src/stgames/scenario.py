"""Config-driven scenario running and export.

Configs are YAML documents with a `kind` key, an optional `seed`, and a
payload block named after the kind. Validation is strict: unknown keys are
rejected with their full path, types are checked, and size caps raise
capacity errors before any computation starts. Runs produce a RunRecord
(summary metrics plus named trace tables) exported as CSV or JSON lines;
floats serialize with 17 significant digits so a parse-back is lossless, and
the record embeds a digest of the canonicalized config.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import coop as coopmod
from . import congestion as netmod
from . import matching as matchmod
from .coordination import (AdmissibleSetRule, CoordinatorPolicy,
                           run_two_timescale, stackelberg_solve)
from .errors import CapacityError, ComputationError, SchemaError
from .incentives import BudgetSpec, IncentiveSchedule, design_incentive
from .learning import LearnerSpec, RateSchedule, diagnostics, run_dynamics
from .resilience import (AdversaryModel, ConsensusScenario, DefenseSpec,
                          TrustMatrix, run_consensus_scenario)
from .strategic import DEFAULT_SIGNAL, StrategicGame, welfare_and_poa, enumerate_pure_nash

KINDS = ("coop", "match", "nash", "learn", "ttscale", "stackelberg",
         "wardrop", "incentive", "resilience")
STOCHASTIC_KINDS = ("learn", "ttscale", "resilience")


# --- strict-schema helpers ----------------------------------------------------

def _fail(path, message):
    raise SchemaError(message, path)


def _need_map(node, path, required=(), optional=()):
    if not isinstance(node, dict):
        _fail(path, f"expected a map, got {type(node).__name__}")
    allowed = set(required) | set(optional)
    for key in node:
        if key not in allowed:
            _fail(f"{path}.{key}" if path else str(key),
                  f"unknown key (allowed: {sorted(allowed)})")
    for key in required:
        if key not in node:
            _fail(path, f"missing required key {key!r}")
    return node


def _need_list(node, path, min_len=0):
    if not isinstance(node, list):
        _fail(path, f"expected a list, got {type(node).__name__}")
    if len(node) < min_len:
        _fail(path, f"expected at least {min_len} entries, got {len(node)}")
    return node


def _need_number(node, path, lo=None, hi=None):
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        _fail(path, f"expected a number, got {node!r}")
    v = float(node)
    if lo is not None and v < lo:
        _fail(path, f"must be >= {lo}, got {v}")
    if hi is not None and v > hi:
        _fail(path, f"must be <= {hi}, got {v}")
    return v


def _need_int(node, path, lo=None, hi=None):
    if isinstance(node, bool) or not isinstance(node, int):
        _fail(path, f"expected an integer, got {node!r}")
    if lo is not None and node < lo:
        _fail(path, f"must be >= {lo}, got {node}")
    if hi is not None and node > hi:
        _fail(path, f"must be <= {hi}, got {node}")
    return node


def _need_str(node, path, choices=None):
    if not isinstance(node, str):
        _fail(path, f"expected a string, got {node!r}")
    if choices is not None and node not in choices:
        _fail(path, f"must be one of {sorted(choices)}, got {node!r}")
    return node


def _need_bool(node, path):
    if not isinstance(node, bool):
        _fail(path, f"expected true/false, got {node!r}")
    return node


# --- parsed scenario ------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    seed: int | None
    payload: dict
    canonical: str          # canonical JSON of the whole normalized document
    digest: str

    def require_seed(self):
        if self.kind in STOCHASTIC_KINDS and self.seed is None:
            raise SchemaError(f"kind {self.kind!r} is stochastic and needs a seed",
                              "seed")


def parse_scenario(text: str, seed_override=None) -> ScenarioConfig:
    """Parse + validate a YAML scenario document (strict keys, typed values)."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise SchemaError(f"syntax error{where}: {exc}") from exc
    if not isinstance(doc, dict):
        _fail("", "document must be a map")
    kind = _need_str(doc.get("kind"), "kind", KINDS)
    _need_map(doc, "", required=("kind", kind), optional=("seed", "name"))
    seed = doc.get("seed")
    if seed is not None:
        seed = _need_int(seed, "seed", lo=0, hi=2 ** 64 - 1)
    if seed_override is not None:
        seed = int(seed_override)
    if "name" in doc:
        _need_str(doc["name"], "name")
    payload = _VALIDATORS[kind](doc[kind], kind)
    normalized = {"kind": kind, "seed": seed, kind: payload}
    if "name" in doc:
        normalized["name"] = doc["name"]
    canonical = json.dumps(normalized, sort_keys=True, separators=(",", ":"),
                           allow_nan=False)
    digest = hashlib.sha256(canonical.encode("utf-8")).hexdigest()
    cfg = ScenarioConfig(kind, seed, payload, canonical, digest)
    cfg.require_seed()
    return cfg


# --- game sub-schema ------------------------------------------------------------

def _validate_profile_entries(entries, actions, path):
    n = len(actions)
    full = 1
    for a in actions:
        full *= len(a)
    seen = {}
    for e_idx, entry in enumerate(_need_list(entries, path, min_len=1)):
        epath = f"{path}[{e_idx}]"
        _need_map(entry, epath, required=("profile", "values"))
        profile = _need_list(entry["profile"], f"{epath}.profile")
        if len(profile) != n:
            _fail(f"{epath}.profile", f"needs {n} actions")
        for i, lab in enumerate(profile):
            if str(lab) not in actions[i]:
                _fail(f"{epath}.profile[{i}]",
                      f"unknown action {lab!r} for agent {i} (valid: {list(actions[i])})")
        values = _need_list(entry["values"], f"{epath}.values")
        if len(values) != n:
            _fail(f"{epath}.values", f"needs {n} payoffs")
        vals = [_need_number(v, f"{epath}.values[{i}]") for i, v in enumerate(values)]
        key = tuple(str(lab) for lab in profile)
        if key in seen:
            _fail(epath, f"duplicate profile {key}")
        seen[key] = vals
    if len(seen) != full:
        _fail(path, f"{len(seen)} of {full} profiles specified")
    return {" ".join(k): v for k, v in seen.items()}


def _validate_game(node, path):
    _need_map(node, path, required=("actions", "payoffs"))
    actions = []
    for i, labels in enumerate(_need_list(node["actions"], f"{path}.actions", 2)):
        labels = _need_list(labels, f"{path}.actions[{i}]", 1)
        actions.append(tuple(str(x) for x in labels))
        if len(set(actions[-1])) != len(actions[-1]):
            _fail(f"{path}.actions[{i}]", "duplicate action labels")
    payoffs = node["payoffs"]
    if isinstance(payoffs, list):
        tables = {DEFAULT_SIGNAL: _validate_profile_entries(
            payoffs, actions, f"{path}.payoffs")}
    elif isinstance(payoffs, dict):
        tables = {}
        for sig, entries in payoffs.items():
            tables[str(sig)] = _validate_profile_entries(
                entries, actions, f"{path}.payoffs.{sig}")
    else:
        _fail(f"{path}.payoffs", "expected a list or a map of signal -> list")
    return {"actions": [list(a) for a in actions], "payoffs": tables}


def _build_game(payload) -> StrategicGame:
    actions = tuple(tuple(a) for a in payload["actions"])
    tables = {}
    for sig, entries in payload["payoffs"].items():
        tables[sig] = {tuple(k.split(" ")): v for k, v in entries.items()}
    return StrategicGame.from_tables(actions, tables)


def _validate_learner(node, path, n_actions):
    _need_map(node, path, required=("kind",),
              optional=("payoff_rate", "policy_rate", "temperature",
                        "initial_policy", "initial_estimate"))
    out = {"kind": _need_str(node["kind"], f"{path}.kind",
                             ("best-response", "smoothed-best-response",
                              "fictitious-play", "replicator",
                              "payoff-estimation"))}
    for key in ("payoff_rate", "policy_rate"):
        if key in node:
            r = _need_map(node[key], f"{path}.{key}", required=("schedule",),
                          optional=("value",))
            sched = _need_str(r["schedule"], f"{path}.{key}.schedule",
                              ("constant", "harmonic"))
            value = _need_number(r.get("value", 1.0), f"{path}.{key}.value", 0.0, 1.0)
            out[key] = {"schedule": sched, "value": value}
    if "temperature" in node:
        out["temperature"] = _need_number(node["temperature"], f"{path}.temperature")
        if out["temperature"] <= 0:
            _fail(f"{path}.temperature", "must be > 0")
    for key in ("initial_policy", "initial_estimate"):
        if key in node:
            vec = _need_list(node[key], f"{path}.{key}")
            if len(vec) != n_actions:
                _fail(f"{path}.{key}", f"needs {n_actions} entries")
            out[key] = [_need_number(v, f"{path}.{key}[{i}]")
                        for i, v in enumerate(vec)]
    return out


def _build_learner(payload) -> LearnerSpec:
    kw = {"kind": payload["kind"]}
    for key in ("payoff_rate", "policy_rate"):
        if key in payload:
            kw[key] = RateSchedule(payload[key]["schedule"], payload[key]["value"])
    if "temperature" in payload:
        kw["temperature"] = payload["temperature"]
    if "initial_policy" in payload:
        kw["initial_policy"] = tuple(payload["initial_policy"])
    if "initial_estimate" in payload:
        kw["initial_estimate"] = tuple(payload["initial_estimate"])
    return LearnerSpec(**kw)


# --- per-kind validators ---------------------------------------------------------

def _v_coop(node, path):
    _need_map(node, path, required=("agents", "values"), optional=("compute",))
    n = _need_int(node["agents"], f"{path}.agents", 1, coopmod.MAX_AGENTS)
    entries = {}
    for i, entry in enumerate(_need_list(node["values"], f"{path}.values", 1)):
        epath = f"{path}.values[{i}]"
        _need_map(entry, epath, required=("coalition", "value"))
        coalition = _need_list(entry["coalition"], f"{epath}.coalition", 1)
        mask = 0
        for k, agent in enumerate(coalition):
            a = _need_int(agent, f"{epath}.coalition[{k}]", 0, n - 1)
            if mask >> a & 1:
                _fail(f"{epath}.coalition", f"agent {a} repeated")
            mask |= 1 << a
        if str(mask) in entries:
            _fail(epath, f"coalition {sorted(coalition)} specified twice")
        entries[str(mask)] = _need_number(entry["value"], f"{epath}.value")
    missing = (1 << n) - 1 - len(entries)
    if missing:
        warnings.warn(f"{missing} coalition values missing; defaulting to 0")
    steps = ("superadditive", "surplus", "shapley", "core", "nucleolus", "convex")
    compute = list(steps)
    if "compute" in node:
        compute = [_need_str(s, f"{path}.compute[{i}]", steps)
                   for i, s in enumerate(_need_list(node["compute"], f"{path}.compute", 1))]
    return {"agents": n, "values": entries, "compute": compute}


def _v_match(node, path):
    _need_map(node, path, required=("left", "right"),
              optional=("proposing", "enumerate"))
    n = None
    out = {}
    for side in ("left", "right"):
        prefs = _need_list(node[side], f"{path}.{side}", 1)
        if n is None:
            n = len(prefs)
            if n > matchmod.MAX_SIDE:
                raise CapacityError(f"side size {n} exceeds {matchmod.MAX_SIDE}")
        if len(prefs) != n:
            _fail(f"{path}.{side}", f"both sides need {n} agents")
        rows = []
        for i, ranking in enumerate(prefs):
            ranking = _need_list(ranking, f"{path}.{side}[{i}]")
            row = [_need_int(v, f"{path}.{side}[{i}][{k}]", 0, n - 1)
                   for k, v in enumerate(ranking)]
            if sorted(row) != list(range(n)):
                _fail(f"{path}.{side}[{i}]", f"must be a permutation of 0..{n - 1}")
            rows.append(row)
        out[side] = rows
    out["proposing"] = _need_str(node.get("proposing", "left"),
                                 f"{path}.proposing", ("left", "right"))
    out["enumerate"] = _need_bool(node.get("enumerate", False), f"{path}.enumerate")
    return out


def _v_nash(node, path):
    _need_map(node, path, required=("game",), optional=("signal", "eps"))
    out = {"game": _validate_game(node["game"], f"{path}.game")}
    if "signal" in node:
        out["signal"] = _need_str(node["signal"], f"{path}.signal")
    if "eps" in node:
        out["eps"] = _need_number(node["eps"], f"{path}.eps", 0.0)
    return out


def _v_learn(node, path):
    _need_map(node, path, required=("game", "horizon", "learners"),
              optional=("signal_schedule", "gap_stride"))
    game = _validate_game(node["game"], f"{path}.game")
    horizon = _need_int(node["horizon"], f"{path}.horizon", 1, 10 ** 6)
    learners = _need_list(node["learners"], f"{path}.learners", 1)
    if len(learners) != len(game["actions"]):
        _fail(f"{path}.learners",
              f"needs one spec per agent ({len(game['actions'])})")
    specs = [_validate_learner(l, f"{path}.learners[{i}]", len(game["actions"][i]))
             for i, l in enumerate(learners)]
    out = {"game": game, "horizon": horizon, "learners": specs}
    if "signal_schedule" in node:
        sched = node["signal_schedule"]
        if isinstance(sched, dict):
            _need_map(sched, f"{path}.signal_schedule", required=("constant",))
            out["signal_schedule"] = {"constant": _need_str(
                sched["constant"], f"{path}.signal_schedule.constant")}
        else:
            out["signal_schedule"] = [
                _need_str(s, f"{path}.signal_schedule[{i}]")
                for i, s in enumerate(_need_list(sched, f"{path}.signal_schedule", 1))]
    if "gap_stride" in node:
        out["gap_stride"] = _need_int(node["gap_stride"], f"{path}.gap_stride", 1)
    return out


def _v_ttscale(node, path):
    _need_map(node, path,
              required=("game", "learners", "outer_steps", "epoch_length",
                        "coordinator"),
              optional=("admissible", "incentives", "initial_signal"))
    game = _validate_game(node["game"], f"{path}.game")
    learners = _need_list(node["learners"], f"{path}.learners", 1)
    if len(learners) != len(game["actions"]):
        _fail(f"{path}.learners", "needs one spec per agent")
    specs = [_validate_learner(l, f"{path}.learners[{i}]", len(game["actions"][i]))
             for i, l in enumerate(learners)]
    coord = _need_map(node["coordinator"], f"{path}.coordinator",
                      required=("kind", "candidates"))
    kind = _need_str(coord["kind"], f"{path}.coordinator.kind",
                     ("constant", "round-robin", "greedy"))
    candidates = [_need_str(c, f"{path}.coordinator.candidates[{i}]")
                  for i, c in enumerate(_need_list(coord["candidates"],
                                                   f"{path}.coordinator.candidates", 1))]
    for i, c in enumerate(candidates):
        if c not in game["payoffs"]:
            _fail(f"{path}.coordinator.candidates[{i}]",
                  f"signal {c!r} has no payoff table")
    out = {"game": game, "learners": specs,
           "outer_steps": _need_int(node["outer_steps"], f"{path}.outer_steps", 1, 10 ** 4),
           "epoch_length": _need_int(node["epoch_length"], f"{path}.epoch_length", 1, 10 ** 6),
           "coordinator": {"kind": kind, "candidates": candidates}}
    if "initial_signal" in node:
        sig = _need_str(node["initial_signal"], f"{path}.initial_signal")
        if sig not in game["payoffs"]:
            _fail(f"{path}.initial_signal", f"signal {sig!r} has no payoff table")
        out["initial_signal"] = sig
    if "admissible" in node:
        adm = {}
        if not isinstance(node["admissible"], dict):
            _fail(f"{path}.admissible", "expected a map of signal -> per-agent actions")
        for sig, per_agent in node["admissible"].items():
            if str(sig) not in game["payoffs"]:
                _fail(f"{path}.admissible.{sig}", f"signal {sig!r} has no payoff table")
            per_agent = _need_list(per_agent, f"{path}.admissible.{sig}")
            if len(per_agent) != len(game["actions"]):
                _fail(f"{path}.admissible.{sig}", "needs one action list per agent")
            rows = []
            for i, labels in enumerate(per_agent):
                labels = [str(x) for x in
                          _need_list(labels, f"{path}.admissible.{sig}[{i}]", 1)]
                for lab in labels:
                    if lab not in game["actions"][i]:
                        _fail(f"{path}.admissible.{sig}[{i}]",
                              f"unknown action {lab!r}")
                rows.append(labels)
            adm[str(sig)] = rows
        out["admissible"] = adm
    if "incentives" in node:
        entries = []
        for i, entry in enumerate(_need_list(node["incentives"], f"{path}.incentives", 1)):
            epath = f"{path}.incentives[{i}]"
            _need_map(entry, epath, required=("profile", "values"), optional=("signal",))
            profile = [str(x) for x in _need_list(entry["profile"], f"{epath}.profile")]
            values = [_need_number(v, f"{epath}.values[{k}]")
                      for k, v in enumerate(_need_list(entry["values"], f"{epath}.values"))]
            if len(profile) != len(game["actions"]) or len(values) != len(game["actions"]):
                _fail(epath, "profile and values need one entry per agent")
            rec = {"profile": profile, "values": values}
            if "signal" in entry:
                sig = _need_str(entry["signal"], f"{epath}.signal")
                if sig not in game["payoffs"]:
                    _fail(f"{epath}.signal", f"signal {sig!r} has no payoff table")
                rec["signal"] = sig
            entries.append(rec)
        out["incentives"] = entries
    return out


def _v_stackelberg(node, path):
    _need_map(node, path, required=("game", "candidates"),
              optional=("mode", "leader_objective"))
    game = _validate_game(node["game"], f"{path}.game")
    candidates = [_need_str(c, f"{path}.candidates[{i}]")
                  for i, c in enumerate(_need_list(node["candidates"],
                                                   f"{path}.candidates", 1))]
    for i, c in enumerate(candidates):
        if c not in game["payoffs"]:
            _fail(f"{path}.candidates[{i}]", f"signal {c!r} has no payoff table")
    out = {"game": game, "candidates": candidates,
           "mode": _need_str(node.get("mode", "optimistic"), f"{path}.mode",
                             ("optimistic", "pessimistic"))}
    if "leader_objective" in node:
        lo = node["leader_objective"]
        if isinstance(lo, str):
            _need_str(lo, f"{path}.leader_objective", ("welfare",))
            out["leader_objective"] = "welfare"
        else:
            _need_map(lo, f"{path}.leader_objective", required=("table",))
            table = {}
            if not isinstance(lo["table"], dict):
                _fail(f"{path}.leader_objective.table", "expected signal -> entries")
            for sig, entries in lo["table"].items():
                if str(sig) not in game["payoffs"]:
                    _fail(f"{path}.leader_objective.table.{sig}", "unknown signal")
                rows = {}
                for k, entry in enumerate(_need_list(entries,
                                                     f"{path}.leader_objective.table.{sig}", 1)):
                    epath = f"{path}.leader_objective.table.{sig}[{k}]"
                    _need_map(entry, epath, required=("profile", "value"))
                    profile = [str(x) for x in _need_list(entry["profile"], f"{epath}.profile")]
                    rows[" ".join(profile)] = _need_number(entry["value"], f"{epath}.value")
                table[str(sig)] = rows
            out["leader_objective"] = {"table": table}
    return out


def _v_wardrop(node, path):
    _need_map(node, path, required=("edges", "origin", "destination", "demand"),
              optional=("extra_edge", "tolls"))

    def edge(e, epath):
        _need_map(e, epath, required=("tail", "head", "a", "b"))
        return {"tail": _need_str(e["tail"], f"{epath}.tail"),
                "head": _need_str(e["head"], f"{epath}.head"),
                "a": _need_number(e["a"], f"{epath}.a", 0.0),
                "b": _need_number(e["b"], f"{epath}.b", 0.0)}

    edges = [edge(e, f"{path}.edges[{i}]")
             for i, e in enumerate(_need_list(node["edges"], f"{path}.edges", 1))]
    out = {"edges": edges,
           "origin": _need_str(node["origin"], f"{path}.origin"),
           "destination": _need_str(node["destination"], f"{path}.destination"),
           "demand": _need_number(node["demand"], f"{path}.demand")}
    if out["demand"] <= 0:
        _fail(f"{path}.demand", "must be positive")
    if "extra_edge" in node:
        out["extra_edge"] = edge(node["extra_edge"], f"{path}.extra_edge")
    if "tolls" in node:
        out["tolls"] = _need_bool(node["tolls"], f"{path}.tolls")
    return out


def _v_incentive(node, path):
    _need_map(node, path, required=("game", "target", "baseline", "budget"),
              optional=("signal",))
    game = _validate_game(node["game"], f"{path}.game")
    n = len(game["actions"])

    def profile(key):
        p = [str(x) for x in _need_list(node[key], f"{path}.{key}")]
        if len(p) != n:
            _fail(f"{path}.{key}", f"needs {n} actions")
        for i, lab in enumerate(p):
            if lab not in game["actions"][i]:
                _fail(f"{path}.{key}[{i}]", f"unknown action {lab!r}")
        return p

    budget = _need_map(node["budget"], f"{path}.budget",
                       required=("limit", "delta"), optional=("horizon",))
    horizon = budget.get("horizon", "infinite")
    if horizon != "infinite":
        horizon = _need_int(horizon, f"{path}.budget.horizon", 1)
    delta = _need_number(budget["delta"], f"{path}.budget.delta")
    if not 0 < delta <= 1:
        _fail(f"{path}.budget.delta", "must be in (0, 1]")
    if horizon == "infinite" and delta == 1.0:
        _fail(f"{path}.budget.delta",
              "delta = 1 with an infinite horizon has no finite total")
    out = {"game": game, "target": profile("target"),
           "baseline": profile("baseline"),
           "budget": {"limit": _need_number(budget["limit"], f"{path}.budget.limit"),
                      "delta": delta, "horizon": horizon}}
    if "signal" in node:
        out["signal"] = _need_str(node["signal"], f"{path}.signal")
    return out


def _v_resilience(node, path):
    _need_map(node, path, required=("initial_values", "horizon", "defense"),
              optional=("adversary", "trust", "base"))
    if "base" in node:
        _need_str(node["base"], f"{path}.base", ("consensus",))
    iv = node["initial_values"]
    if isinstance(iv, dict):
        _need_map(iv, f"{path}.initial_values", required=("random",))
        r = _need_map(iv["random"], f"{path}.initial_values.random",
                      required=("n",), optional=("low", "high"))
        spec = {"random": {"n": _need_int(r["n"], f"{path}.initial_values.random.n", 2, 64),
                           "low": _need_number(r.get("low", 0.0), f"{path}.initial_values.random.low"),
                           "high": _need_number(r.get("high", 1.0), f"{path}.initial_values.random.high")}}
        if spec["random"]["low"] >= spec["random"]["high"]:
            _fail(f"{path}.initial_values.random", "low must be < high")
        n = spec["random"]["n"]
        values = spec
    else:
        vals = [_need_number(v, f"{path}.initial_values[{i}]")
                for i, v in enumerate(_need_list(iv, f"{path}.initial_values", 2))]
        n = len(vals)
        values = vals
    out = {"initial_values": values,
           "horizon": _need_int(node["horizon"], f"{path}.horizon", 1, 10 ** 5)}
    defense = _need_map(node["defense"], f"{path}.defense", optional=("trim", "trust_eta"))
    out["defense"] = {"trim": _need_int(defense.get("trim", 0), f"{path}.defense.trim", 0)}
    if "trust_eta" in defense:
        out["defense"]["trust_eta"] = _need_number(defense["trust_eta"],
                                                   f"{path}.defense.trust_eta", 0.0)
    if "adversary" in node:
        adv = _need_map(node["adversary"], f"{path}.adversary",
                        required=("agents", "kind"),
                        optional=("value", "lag", "drop_prob", "window"))
        agents = [_need_int(a, f"{path}.adversary.agents[{i}]", 0, n - 1)
                  for i, a in enumerate(_need_list(adv["agents"], f"{path}.adversary.agents", 1))]
        rec = {"agents": agents,
               "kind": _need_str(adv["kind"], f"{path}.adversary.kind",
                                 ("constant-injection", "sign-flip", "replay",
                                  "channel-drop"))}
        if "value" in adv:
            rec["value"] = _need_number(adv["value"], f"{path}.adversary.value")
        if "lag" in adv:
            rec["lag"] = _need_int(adv["lag"], f"{path}.adversary.lag", 1)
        if "drop_prob" in adv:
            rec["drop_prob"] = _need_number(adv["drop_prob"],
                                            f"{path}.adversary.drop_prob", 0.0, 1.0)
        if "window" in adv:
            w = _need_list(adv["window"], f"{path}.adversary.window")
            if len(w) != 2:
                _fail(f"{path}.adversary.window", "needs [start, end]")
            rec["window"] = [_need_int(w[0], f"{path}.adversary.window[0]", 0),
                             _need_int(w[1], f"{path}.adversary.window[1]", 0)]
            if rec["window"][0] > rec["window"][1]:
                _fail(f"{path}.adversary.window", "start must be <= end")
        out["adversary"] = rec
    trust = node.get("trust", "uniform")
    if isinstance(trust, str):
        out["trust"] = _need_str(trust, f"{path}.trust", ("uniform",))
    else:
        rows = _need_list(trust, f"{path}.trust", n)
        if len(rows) != n:
            _fail(f"{path}.trust", f"needs {n} rows")
        mat = []
        for i, row in enumerate(rows):
            row = _need_list(row, f"{path}.trust[{i}]")
            if len(row) != n:
                _fail(f"{path}.trust[{i}]", f"needs {n} entries")
            mat.append([_need_number(v, f"{path}.trust[{i}][{k}]", 0.0)
                        for k, v in enumerate(row)])
        out["trust"] = mat
    return out


_VALIDATORS = {"coop": _v_coop, "match": _v_match, "nash": _v_nash,
               "learn": _v_learn, "ttscale": _v_ttscale,
               "stackelberg": _v_stackelberg, "wardrop": _v_wardrop,
               "incentive": _v_incentive, "resilience": _v_resilience}


# --- run records -----------------------------------------------------------------

@dataclass(frozen=True)
class Table:
    """One named trace table: column names plus row tuples."""
    name: str
    columns: tuple
    rows: tuple

    @staticmethod
    def of(name, columns, rows):
        return Table(name, tuple(columns), tuple(tuple(r) for r in rows))


@dataclass(frozen=True)
class RunRecord:
    kind: str
    digest: str
    seed: int | None
    summary: dict
    tables: tuple = ()

    def table(self, name):
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)


def _py(value):
    """Coerce numpy scalars/arrays into plain Python for serialization."""
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.ndarray):
        return [_py(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_py(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _py(v) for k, v in value.items()}
    return value


# --- per-kind runners --------------------------------------------------------------

def _run_coop(cfg: ScenarioConfig) -> RunRecord:
    p = cfg.payload
    values = {int(m): v for m, v in p["values"].items()}
    game = coopmod.CoalitionGame.from_dict(p["agents"], values)
    summary = {"agents": game.n}
    tables = []
    steps = p["compute"]
    if "superadditive" in steps:
        summary["superadditive"] = coopmod.is_superadditive(game)
    if "convex" in steps:
        summary["convex"] = coopmod.is_convex(game)
    if "surplus" in steps:
        summary["cooperative_surplus"] = coopmod.cooperative_surplus(game)
    if "shapley" in steps:
        phi = coopmod.shapley(game)
        summary["shapley"] = _py(phi)
        tables.append(Table.of("shapley", ("agent", "value"),
                               [(i, float(phi[i])) for i in range(game.n)]))
    if "core" in steps:
        rep = coopmod.core_nonempty(game)
        summary["core_nonempty"] = rep.nonempty
        if rep.certificate is not None:
            summary["core_point"] = _py(rep.certificate)
        summary["core_lp_optimum"] = rep.lp_optimum
    if "nucleolus" in steps:
        rep = coopmod.nucleolus(game)
        summary["nucleolus"] = _py(rep.allocation)
        summary["nucleolus_stages"] = rep.stages
        tables.append(Table.of("nucleolus", ("agent", "value"),
                               [(i, float(rep.allocation[i]))
                                for i in range(game.n)]))
    return RunRecord("coop", cfg.digest, cfg.seed, summary, tuple(tables))


def _run_match(cfg: ScenarioConfig) -> RunRecord:
    p = cfg.payload
    market = matchmod.MatchingMarket(
        tuple(tuple(r) for r in p["left"]),
        tuple(tuple(r) for r in p["right"]))
    result = matchmod.deferred_acceptance(market, proposing=p["proposing"])
    summary = {"proposing": p["proposing"],
               "stable": matchmod.is_stable(market, result),
               "pairs": [list(pair) for pair in result.pairs]}
    tables = [Table.of("matching", ("left", "right"), result.pairs)]
    if p["enumerate"]:
        stable = matchmod.enumerate_stable(market)
        summary["stable_count"] = len(stable)
        tables.append(Table.of(
            "stable_set", ("index", "pairs"),
            [(k, json.dumps([list(pair) for pair in m.pairs]))
             for k, m in enumerate(stable)]))
    return RunRecord("match", cfg.digest, cfg.seed, summary, tuple(tables))


def _run_nash(cfg: ScenarioConfig) -> RunRecord:
    p = cfg.payload
    game = _build_game(p["game"])
    signal = game.resolve_signal(p.get("signal"))
    eps = p.get("eps", 0.0)
    if eps > 0:
        from .strategic import is_nash
        equilibria = [pr for pr in game.profiles()
                      if is_nash(game, pr, eps, signal).is_nash]
    else:
        equilibria = enumerate_pure_nash(game, signal=signal)
    welfare = welfare_and_poa(game, signal=signal)
    summary = {"signal": signal, "eps": eps,
               "equilibria": [list(e) for e in equilibria],
               "welfare_optimum": welfare.optimal_welfare,
               "optimal_profile": list(welfare.optimal_profile),
               "poa_defined": welfare.defined}
    if welfare.defined:
        summary["poa"] = welfare.ratio
        summary["worst_equilibrium_welfare"] = welfare.worst_equilibrium_welfare
    else:
        summary["poa_reason"] = welfare.reason
    eq_set = set(equilibria)
    rows = []
    for profile in game.profiles():
        pay = game.payoff(profile, signal=signal)
        rows.append(tuple(profile) + tuple(float(v) for v in pay)
                    + (profile in eq_set,))
    n = game.n_agents
    cols = tuple(f"action_{i}" for i in range(n)) + \
        tuple(f"payoff_{i}" for i in range(n)) + ("is_nash",)
    return RunRecord("nash", cfg.digest, cfg.seed, summary,
                     (Table.of("profiles", cols, rows),))


def _signal_schedule_fn(spec, game):
    if spec is None:
        return None
    if isinstance(spec, dict):
        sig = spec["constant"]
        if sig not in game.payoffs:
            raise SchemaError(f"signal {sig!r} has no payoff table",
                              "learn.signal_schedule.constant")
        return lambda t: sig
    seq = list(spec)
    for s in seq:
        if s not in game.payoffs:
            raise SchemaError(f"signal {s!r} has no payoff table",
                              "learn.signal_schedule")
    return lambda t: seq[(t - 1) % len(seq)]


def _run_learn(cfg: ScenarioConfig) -> RunRecord:
    p = cfg.payload
    game = _build_game(p["game"])
    specs = [_build_learner(s) for s in p["learners"]]
    trace = run_dynamics(game, specs, p["horizon"], seed=cfg.seed,
                         signal_schedule=_signal_schedule_fn(
                             p.get("signal_schedule"), game))
    diag = diagnostics(game, trace, gap_stride=p.get("gap_stride", 1))
    summary = {"horizon": p["horizon"],
               "final_profile": list(trace.action_labels[-1]),
               "external_regret": _py(diag.external_regret),
               "max_regret": float(diag.external_regret.max()),
               "final_gap": float(diag.gap_series[-1])}
    n = game.n_agents
    rows = []
    for t in range(len(trace.action_labels)):
        rows.append((t + 1, trace.signals[t]) + tuple(trace.action_labels[t])
                    + tuple(float(v) for v in trace.payoffs[t]))
    cols = ("step", "signal") + tuple(f"action_{i}" for i in range(n)) \
        + tuple(f"payoff_{i}" for i in range(n))
    tables = [Table.of("trace", cols, rows),
              Table.of("gap", ("step", "gap"),
                       [(int(t), float(g))
                        for t, g in zip(diag.gap_times, diag.gap_series)])]
    return RunRecord("learn", cfg.digest, cfg.seed, summary, tuple(tables))


def _run_ttscale(cfg: ScenarioConfig) -> RunRecord:
    p = cfg.payload
    game = _build_game(p["game"])
    specs = [_build_learner(s) for s in p["learners"]]
    coordinator = CoordinatorPolicy(kind=p["coordinator"]["kind"],
                                    candidates=tuple(p["coordinator"]["candidates"]))
    admissible = None
    if "admissible" in p:
        admissible = AdmissibleSetRule(
            {sig: tuple(tuple(v) for v in rows)
             for sig, rows in p["admissible"].items()})
    incentives = None
    if "incentives" in p:
        incentives = IncentiveSchedule.zero(game)
        for rec in p["incentives"]:
            sig = game.resolve_signal(rec.get("signal"))
            one = IncentiveSchedule.on_profile(game, tuple(rec["profile"]),
                                               rec["values"], signal=sig)
            incentives.transfers[sig] += one.transfers[sig]
    result = run_two_timescale(
        game, specs, coordinator, outer_steps=p["outer_steps"],
        epoch_length=p["epoch_length"], seed=cfg.seed,
        admissible=admissible, incentives=incentives,
        initial_signal=p.get("initial_signal"))
    summary = {"outer_steps": p["outer_steps"],
               "epoch_length": p["epoch_length"],
               "final_signal": result.final_signal,
               "signal_sequence": [e.signal for e in result.epochs],
               "final_welfare": result.epochs[-1].digest.mean_welfare}
    rows = [(e.index, e.signal, e.digest.mean_welfare,
             json.dumps(_py(e.digest.frequencies)))
            for e in result.epochs]
    tables = [Table.of("epochs", ("epoch", "signal", "mean_welfare",
                                  "action_frequencies"), rows)]
    return RunRecord("ttscale", cfg.digest, cfg.seed, summary, tuple(tables))


def _run_stackelberg(cfg: ScenarioConfig) -> RunRecord:
    p = cfg.payload
    game = _build_game(p["game"])
    objective = None
    if isinstance(p.get("leader_objective"), dict):
        table = {}
        for sig, rows in p["leader_objective"]["table"].items():
            table[sig] = {tuple(k.split(" ")): v for k, v in rows.items()}

        def objective(g, signal, profile):
            return table[signal][tuple(profile)]

    report = stackelberg_solve(game, tuple(p["candidates"]), mode=p["mode"],
                               leader_objective=objective)
    follower = None
    for out in report.outcomes:
        if out.candidate == report.best_candidate and not out.skipped:
            for eq, val in zip(out.equilibria, out.values):
                if val == report.leader_value:
                    follower = list(eq)
                    break
            break
    summary = {"mode": p["mode"], "signal": report.best_candidate,
               "leader_value": report.leader_value,
               "follower_profile": follower,
               "skipped_signals": [o.candidate for o in report.outcomes
                                   if o.skipped]}
    rows = [(o.candidate,
             json.dumps([list(e) for e in o.equilibria]),
             o.value, o.skipped)
            for o in report.outcomes]
    return RunRecord("stackelberg", cfg.digest, cfg.seed, summary,
                     (Table.of("candidates",
                               ("signal", "equilibria", "leader_value", "skipped"),
                               rows),))


def _run_wardrop(cfg: ScenarioConfig) -> RunRecord:
    p = cfg.payload
    edges = tuple(netmod.Edge(e["tail"], e["head"], e["a"], e["b"])
                  for e in p["edges"])
    net = netmod.CongestionNetwork(edges, p["origin"], p["destination"],
                                   p["demand"])
    eq = netmod.wardrop_equilibrium(net)
    so = netmod.system_optimum(net)
    poa = netmod.price_of_anarchy(net)
    summary = {"equilibrium_cost": eq.total_cost,
               "equilibrium_per_unit_cost": eq.per_unit_cost,
               "optimum_cost": so.total_cost,
               "poa_defined": poa.defined,
               "poa": poa.ratio}
    if not poa.defined:
        summary["poa_reason"] = poa.reason

    def path_rows(fa):
        return [(json.dumps(list(fa.paths[k])), float(fa.path_flows[k]),
                 float(fa.path_latencies[k])) for k in range(len(fa.paths))]

    tables = [Table.of("equilibrium_paths", ("path", "flow", "latency"),
                       path_rows(eq)),
              Table.of("optimum_paths", ("path", "flow", "latency"),
                       path_rows(so))]
    if "extra_edge" in p:
        e = p["extra_edge"]
        report = netmod.braess_delta(net, netmod.Edge(e["tail"], e["head"],
                                                      e["a"], e["b"]))
        summary["augmented_per_unit_cost"] = report.augmented_per_unit_cost
        summary["braess_delta"] = report.delta
        summary["paradox"] = report.delta > 0
    if p.get("tolls"):
        toll = netmod.marginal_cost_tolls(net)
        summary["tolled_latency_cost"] = toll.latency_cost
        summary["tolled_per_unit_cost"] = toll.latency_per_unit_cost
        summary["toll_flow_gap"] = toll.max_edge_flow_gap
        tables.append(Table.of("tolls", ("edge", "toll"),
                               [(json.dumps([edges[j].tail, edges[j].head]),
                                 float(toll.tolls[j]))
                                for j in range(len(edges))]))
    return RunRecord("wardrop", cfg.digest, cfg.seed, summary, tuple(tables))


def _run_incentive(cfg: ScenarioConfig) -> RunRecord:
    p = cfg.payload
    game = _build_game(p["game"])
    budget = BudgetSpec(limit=p["budget"]["limit"], delta=p["budget"]["delta"],
                        horizon=(None if p["budget"]["horizon"] == "infinite"
                                 else p["budget"]["horizon"]))
    signal = game.resolve_signal(p.get("signal"))
    design = design_incentive(game, tuple(p["target"]),
                              baseline=tuple(p["baseline"]), budget=budget,
                              signal=signal)
    summary = {"status": design.status,
               "target": list(p["target"]), "baseline": list(p["baseline"])}
    tables = []
    if design.status == "ok":
        payments = design.schedule.per_agent(game, tuple(p["target"]), signal)
        summary["payments"] = _py(payments)
        summary["per_period_spend"] = design.per_period_spend
        summary["discounted_spend"] = design.discounted_spend
        tables.append(Table.of("payments", ("agent", "payment"),
                               [(i, float(payments[i]))
                                for i in range(game.n_agents)]))
    else:
        summary["reason"] = design.reason
    return RunRecord("incentive", cfg.digest, cfg.seed, summary, tuple(tables))


def _run_resilience(cfg: ScenarioConfig) -> RunRecord:
    p = cfg.payload
    if isinstance(p["initial_values"], dict):
        r = p["initial_values"]["random"]
        rng = np.random.default_rng([cfg.seed, 0x1F])
        initial = rng.uniform(r["low"], r["high"], size=r["n"])
    else:
        initial = np.asarray(p["initial_values"], dtype=float)
    n = initial.shape[0]
    trust = (TrustMatrix.uniform(n) if p["trust"] == "uniform"
             else TrustMatrix.from_weights(np.asarray(p["trust"], dtype=float)))
    defense = DefenseSpec(trim_f=p["defense"]["trim"],
                          trust_eta=p["defense"].get("trust_eta"))
    adversary = None
    if "adversary" in p:
        a = p["adversary"]
        adversary = AdversaryModel(
            compromised=tuple(a["agents"]), kind=a["kind"],
            value=a.get("value", 0.0), lag=a.get("lag", 1),
            drop_prob=a.get("drop_prob", 0.5),
            window=tuple(a.get("window", (0, p["horizon"]))))
    scenario = ConsensusScenario(initial_values=tuple(float(v) for v in initial),
                                 trust=trust)
    run = run_consensus_scenario(scenario, p["horizon"], defense,
                                 adversary=adversary, seed=cfg.seed)
    summary = {"horizon": p["horizon"], "agents": n,
               "final_values": _py(run.values[-1]),
               "final_diameter": float(run.metrics.diameter_series[-1]),
               "max_honest_deviation": run.metrics.max_honest_deviation,
               "recovered": run.metrics.recovery_time is not None,
               "recovery_steps": run.metrics.recovery_time}
    rows = []
    for t in range(run.values.shape[0]):
        rows.append((t,) + tuple(float(v) for v in run.values[t])
                    + (float(run.metrics.diameter_series[t]),))
    cols = ("step",) + tuple(f"value_{i}" for i in range(n)) + ("diameter",)
    return RunRecord("resilience", cfg.digest, cfg.seed, summary,
                     (Table.of("values", cols, rows),))


_RUNNERS = {"coop": _run_coop, "match": _run_match, "nash": _run_nash,
            "learn": _run_learn, "ttscale": _run_ttscale,
            "stackelberg": _run_stackelberg, "wardrop": _run_wardrop,
            "incentive": _run_incentive, "resilience": _run_resilience}


def run_scenario(cfg: ScenarioConfig) -> RunRecord:
    return _RUNNERS[cfg.kind](cfg)


# --- export ----------------------------------------------------------------------

def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return str(value)
        return "%.17g" % value
    return str(value)


def _csv_cell(value):
    s = _fmt(value)
    if any(ch in s for ch in ",\"\n"):
        s = '"' + s.replace('"', '""') + '"'
    return s


def _json_value(value):
    if isinstance(value, float):
        if math.isnan(value):
            return "NaN"
        if math.isinf(value):
            return "Infinity" if value > 0 else "-Infinity"
        return float("%.17g" % value)
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _json_value(v) for k, v in value.items()}
    return value


def _summary_rows(record: RunRecord):
    rows = [("kind", record.kind), ("digest", record.digest),
            ("seed", record.seed)]
    for key in sorted(record.summary):
        rows.append((key, record.summary[key]))
    return rows


def record_to_csv(record: RunRecord) -> dict:
    """CSV texts keyed by file stem suffix: summary plus one per table.

    Comma delimiter, dot decimal, header row, LF endings; an empty table
    yields a header-only file.
    """
    out = {}
    lines = ["key,value"]
    for key, value in _summary_rows(record):
        if isinstance(value, (list, dict)):
            value = json.dumps(_json_value(_py(value)), sort_keys=True)
        lines.append(f"{_csv_cell(key)},{_csv_cell(value)}")
    out["summary"] = "\n".join(lines) + "\n"
    for table in record.tables:
        lines = [",".join(str(c) for c in table.columns)]
        for row in table.rows:
            lines.append(",".join(_csv_cell(v) for v in row))
        out[table.name] = "\n".join(lines) + "\n"
    return out


def record_to_jsonl(record: RunRecord) -> dict:
    """JSON-lines texts keyed by file stem suffix, one record per line.

    The summary file holds a single object; table files hold one object per
    row keyed by column name. Floats carry 17 significant digits so parsing
    them back reproduces the doubles exactly.
    """
    out = {}
    header = {"kind": record.kind, "digest": record.digest,
              "seed": record.seed, "summary": _py(record.summary),
              "tables": [t.name for t in record.tables]}
    out["summary"] = json.dumps(_json_value(header), sort_keys=True,
                                separators=(",", ":")) + "\n"
    for table in record.tables:
        lines = []
        for row in table.rows:
            body = {str(c): _py(v) for c, v in zip(table.columns, row)}
            lines.append(json.dumps(_json_value(body), sort_keys=True,
                                    separators=(",", ":")))
        out[table.name] = "\n".join(lines) + ("\n" if lines else "")
    return out


def write_outputs(record: RunRecord, out_dir, stem, fmt="csv"):
    """Write summary + per-table data files plus a meta sidecar.

    Returns the paths written. meta.json holds wall-clock and version facts
    and is the only file excluded from determinism comparisons; the data
    files are byte-stable for a fixed (config, seed).
    """
    import os

    if fmt == "csv":
        parts, ext = record_to_csv(record), "csv"
    elif fmt == "jsonl":
        parts, ext = record_to_jsonl(record), "jsonl"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    try:
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        for suffix, text in parts.items():
            path = os.path.join(out_dir, f"{stem}.{suffix}.{ext}")
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            paths.append(path)
        from . import __version__

        meta = {"written_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                "note": "wall-clock and version live here so data files stay deterministic",
                "version": __version__, "kind": record.kind,
                "digest": record.digest}
        meta_path = os.path.join(out_dir, f"{stem}.meta.json")
        with open(meta_path, "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        paths.append(meta_path)
    except OSError as exc:
        raise OSError(f"writing {out_dir!r}: {exc}") from exc
    return paths
