"""Neurosymbolic predictor: a pluggable base predictor whose success bit can
be overridden by activated rules.

The naive prior answers from the config's *default* tables no matter which
modifications are active, which makes its misalignment under modified worlds
deterministic and measurable.  It also ignores contextual preconditions the
tables do not encode (target proximity for mine/attack, placement surfaces,
ambush risk while sleeping), so it stays fallibly optimistic even on the
default world.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

from .core import Action, Observation, Outcome
from .dsl import EvalDiagnostics, RuleAst, evaluate_all
from .env.config import EffectiveTables, MAKEABLE, PLACEABLE, WorldConfig
from .env.world import apply_effect
from .graphs import KnowledgeGraph, SceneGraph


class BackendUnavailable(RuntimeError):
    """The external completion backend could not produce a usable answer."""


class BasePredictor(Protocol):
    def predict(self, obs: Observation, action: Action) -> Outcome: ...


class NaivePrior:
    """Default-table commonsense, blind to modifications and to context."""

    def __init__(self, config: WorldConfig):
        self.tables: EffectiveTables = config.base_tables()

    def predict(self, obs: Observation, action: Action) -> Outcome:
        if action.name == "mine":
            block = str(action.args["block_name"])
            rule = self.tables.mining.get(block)
            if rule is None:
                return Outcome(False, f"{block} cannot be mined",
                               f"target a different block than {block}")
            if rule.tool is not None and not self._has_tool(obs, rule.tool):
                return Outcome(False, f"mining {block} needs {rule.tool} or better",
                               f"craft {rule.tool} or a better pickaxe first")
            return Outcome(True, f"mining {block} should succeed")
        if action.name in ("make", "place"):
            key = "tool_name" if action.name == "make" else "block_name"
            product = str(action.args[key])
            known = MAKEABLE if action.name == "make" else PLACEABLE
            recipe = self.tables.recipes.get(product)
            if product not in known or recipe is None:
                return Outcome(False, f"no known way to {action.name} {product}")
            shortfall = self._shortfall(obs, recipe)
            if shortfall:
                return Outcome(
                    False,
                    f"cannot {action.name} {product}: requirements not met",
                    f"missing for {product}: {', '.join(shortfall)}",
                )
            return Outcome(True, f"{action.name} {product} should succeed")
        # attack, sleep, explore: optimistic pass-through
        return Outcome(True, f"{action.name} should succeed")

    def _has_tool(self, obs: Observation, tier: str) -> bool:
        tiers = self.tables.tool_tiers
        idx = tiers.index(tier)
        return any(obs.inventory_count(t) > 0 for t in tiers[idx:])

    def _shortfall(self, obs: Observation, recipe) -> list[str]:
        missing = []
        needs: dict[str, int] = dict(recipe.requires)
        for material, count in recipe.consumes.items():
            needs[material] = needs.get(material, 0) + count
        for material, count in sorted(needs.items()):
            have = obs.inventory_count(material)
            if have < count:
                missing.append(f"{material}: {count - have} more needed")
        if recipe.platform is not None and recipe.platform not in obs.near_objects:
            missing.append(f"{recipe.platform}: must be nearby")
        return missing


class ScriptedPredictor:
    """Table-driven predictor for tests: success keyed by action name, with
    an optional override function for finer scripting."""

    def __init__(
        self,
        by_action: dict[str, bool] | None = None,
        default: bool = True,
        override: Callable[[Observation, Action], bool | None] | None = None,
    ):
        self.by_action = dict(by_action or {})
        self.default = default
        self.override = override

    def predict(self, obs: Observation, action: Action) -> Outcome:
        if self.override is not None:
            forced = self.override(obs, action)
            if forced is not None:
                return Outcome(forced, "scripted prediction")
        return Outcome(self.by_action.get(action.name, self.default), "scripted prediction")


class ExternalBackendPredictor:
    """Text-completion predictor; expects one line `SUCCESS|FAIL: feedback`."""

    def __init__(self, client, prompt_template: str):
        self.client = client
        self.prompt_template = prompt_template

    def predict(self, obs: Observation, action: Action) -> Outcome:
        import json

        prompt = self.prompt_template.format(
            observation=json.dumps(obs.to_json()), action=json.dumps(action.to_json())
        )
        reply = self.client.complete(prompt).strip()
        head, _, feedback = reply.partition(":")
        verdict = head.strip().upper()
        if verdict not in ("SUCCESS", "FAIL"):
            raise BackendUnavailable(f"malformed prediction reply: {reply[:80]!r}")
        if verdict == "SUCCESS":
            return Outcome(True, feedback.strip())
        return Outcome(False, feedback.strip(), "")


@dataclass(frozen=True)
class MapExecuteResult:
    next_obs: Observation
    feedback: str
    suggestion: str
    flag: bool
    activated: tuple[str, ...]
    failing: tuple[str, ...]


def map_execute(
    rules: Sequence[RuleAst],
    obs: Observation,
    action: Action,
    base: Outcome,
    kg: KnowledgeGraph,
    sg: SceneGraph,
    *,
    tables: EffectiveTables,
    diagnostics: EvalDiagnostics | None = None,
) -> MapExecuteResult:
    """Check a base prediction against the rule set.

    If any rule activates, the joint rule verdict replaces the base success
    bit (failure dominates across rules); otherwise the base prediction
    stands.  The next-observation estimate comes from the shared effect
    function applied to the final flag.
    """
    joint = evaluate_all(
        rules, obs, action, kg, sg, tool_tiers=tables.tool_tiers, diagnostics=diagnostics
    )
    if joint.any_activated:
        flag = joint.flag
        feedback = joint.feedback if not flag else (joint.feedback or base.feedback)
        suggestion = joint.suggestion
    else:
        flag = base.success
        feedback = base.feedback
        suggestion = base.suggestion
    next_obs = apply_effect(obs, action, flag, tables)
    return MapExecuteResult(
        next_obs=next_obs,
        feedback=feedback,
        suggestion=suggestion,
        flag=flag,
        activated=joint.activated_ids,
        failing=joint.failing_ids,
    )
