"""Rule evaluation: pure verdicts from (observation, action, graphs).

A rule whose guard does not match the action counts as success without
activating.  An atom that cannot be resolved (unknown scene-graph location,
missing action argument, unknown tool tier) deactivates the rule and bumps a
diagnostic counter instead of faulting.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..core import Action, DEFAULT_TOOL_TIERS, Observation
from ..graphs import KnowledgeGraph, SceneGraph, UNEXPLORED, sg_locate
from .ast import (
    And,
    ArgCmp,
    Expr,
    HasToolAtLeast,
    InventoryAtLeast,
    KgSatisfied,
    Lit,
    Membership,
    Not,
    ObsCmp,
    Or,
    Polarity,
    RuleAst,
    SgContains,
    SgUnexplored,
    ValueExpr,
)


@dataclass(frozen=True)
class RuleVerdict:
    activated: bool
    flag: bool
    feedback: str = ""
    suggestion: str = ""


@dataclass
class EvalDiagnostics:
    """Mutable counter bag owned by the caller."""

    unresolvable: int = 0
    notes: list[str] = field(default_factory=list)


class _Unresolvable(Exception):
    def __init__(self, note: str):
        self.note = note


@dataclass(frozen=True)
class _Context:
    obs: Observation
    action: Action
    kg: KnowledgeGraph
    sg: SceneGraph
    tool_tiers: tuple[str, ...]

    def value(self, expr: ValueExpr) -> str:
        if isinstance(expr, Lit):
            return expr.value
        if expr.key not in self.action.args:
            raise _Unresolvable(f"action has no argument {expr.key!r}")
        return str(self.action.args[expr.key])


_OPS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _eval(expr: Expr, ctx: _Context) -> bool:
    if isinstance(expr, Or):
        return any(_eval(p, ctx) for p in expr.parts)
    if isinstance(expr, And):
        return all(_eval(p, ctx) for p in expr.parts)
    if isinstance(expr, Not):
        return not _eval(expr.expr, ctx)
    if isinstance(expr, ObsCmp):
        value: object = ctx.obs
        for part in expr.path:
            value = getattr(value, part)
        return _OPS[expr.op](value, expr.literal)
    if isinstance(expr, ArgCmp):
        if expr.key not in ctx.action.args:
            raise _Unresolvable(f"action has no argument {expr.key!r}")
        return _OPS[expr.op](ctx.action.args[expr.key], expr.literal)
    if isinstance(expr, Membership):
        name = ctx.value(expr.value)
        if expr.collection == "near_objects":
            return name in ctx.obs.near_objects
        return any(v.type == name for v in ctx.obs.visible_objects)
    if isinstance(expr, InventoryAtLeast):
        item = ctx.value(expr.item)
        return ctx.obs.inventory_count(item) >= expr.count
    if isinstance(expr, HasToolAtLeast):
        if expr.tier not in ctx.tool_tiers:
            raise _Unresolvable(f"unknown tool tier {expr.tier!r}")
        idx = ctx.tool_tiers.index(expr.tier)
        return any(ctx.obs.inventory_count(t) > 0 for t in ctx.tool_tiers[idx:])
    if isinstance(expr, KgSatisfied):
        product = ctx.value(expr.product)
        materials, platform = ctx.kg.requirements(product)
        if any(ctx.obs.inventory_count(m) < q for m, q in materials.items()):
            return False
        return platform is None or platform in ctx.obs.near_objects
    if isinstance(expr, SgContains):
        if expr.location not in ctx.sg.vertices:
            raise _Unresolvable(f"unknown location {expr.location!r}")
        return expr.location in sg_locate(ctx.sg, expr.item)
    if isinstance(expr, SgUnexplored):
        status = ctx.sg.status_map()
        if expr.location not in status:
            raise _Unresolvable(f"unknown location {expr.location!r}")
        return status[expr.location] == UNEXPLORED
    raise TypeError(f"unknown expression node {expr!r}")


def missing_materials(kg: KnowledgeGraph, product: str, obs: Observation) -> list[str]:
    """Human-readable shortfall list for a product, e.g. ``wood: 2 more needed``."""
    materials, platform = kg.requirements(product)
    out = []
    for material, need in sorted(materials.items()):
        have = obs.inventory_count(material)
        if have < need:
            out.append(f"{material}: {need - have} more needed")
    if platform is not None and platform not in obs.near_objects:
        out.append(f"{platform}: must be nearby")
    return out


def _bindings(rule: RuleAst, ctx: _Context) -> dict[str, str]:
    binds = {key: str(value) for key, value in ctx.action.args.items()}
    binds["guard"] = rule.action_guard
    product = None
    if "tool_name" in ctx.action.args:
        product = str(ctx.action.args["tool_name"])
    elif "block_name" in ctx.action.args:
        product = str(ctx.action.args["block_name"])
    if product is not None:
        binds["product"] = product
        shortfall = missing_materials(ctx.kg, product, ctx.obs)
        binds["missing"] = ", ".join(shortfall) if shortfall else "nothing"
    return binds


class _Defaulting(dict):
    def __missing__(self, key: str) -> str:
        return "{" + key + "}"


def render_template(template: str, bindings: dict[str, str]) -> str:
    return template.format_map(_Defaulting(bindings))


def evaluate(
    rule: RuleAst,
    obs: Observation,
    action: Action,
    kg: KnowledgeGraph,
    sg: SceneGraph,
    *,
    tool_tiers: Sequence[str] = DEFAULT_TOOL_TIERS,
    diagnostics: EvalDiagnostics | None = None,
) -> RuleVerdict:
    """Evaluate one rule.  Pure in its inputs; never raises on bad data."""
    if action.name != rule.action_guard:
        return RuleVerdict(activated=False, flag=True)
    ctx = _Context(obs, action, kg, sg, tuple(tool_tiers))
    try:
        condition = _eval(rule.condition, ctx)
    except _Unresolvable as exc:
        if diagnostics is not None:
            diagnostics.unresolvable += 1
            diagnostics.notes.append(f"{rule.id}: {exc.note}")
        return RuleVerdict(activated=False, flag=True)
    if rule.polarity is Polarity.FAIL_IF:
        flag = not condition
    else:
        flag = condition
    if flag:
        return RuleVerdict(activated=True, flag=True)
    binds = _bindings(rule, ctx)
    return RuleVerdict(
        activated=True,
        flag=False,
        feedback=render_template(rule.feedback_template, binds),
        suggestion=render_template(rule.suggestion_template, binds),
    )


@dataclass(frozen=True)
class JointVerdict:
    """Composition of every activated rule on one (obs, action) pair:
    failure dominates, strings concatenated in rule-id order."""

    activated_ids: tuple[str, ...]
    failing_ids: tuple[str, ...]
    flag: bool
    feedback: str
    suggestion: str

    @property
    def any_activated(self) -> bool:
        return bool(self.activated_ids)


def evaluate_all(
    rules: Sequence[RuleAst],
    obs: Observation,
    action: Action,
    kg: KnowledgeGraph,
    sg: SceneGraph,
    *,
    tool_tiers: Sequence[str] = DEFAULT_TOOL_TIERS,
    diagnostics: EvalDiagnostics | None = None,
) -> JointVerdict:
    ordered = sorted(rules, key=lambda r: r.id)
    activated: list[str] = []
    failing: list[str] = []
    feedback: list[str] = []
    suggestion: list[str] = []
    for rule in ordered:
        verdict = evaluate(
            rule, obs, action, kg, sg, tool_tiers=tool_tiers, diagnostics=diagnostics
        )
        if not verdict.activated:
            continue
        activated.append(rule.id)
        if not verdict.flag:
            failing.append(rule.id)
            if verdict.feedback:
                feedback.append(verdict.feedback)
            if verdict.suggestion:
                suggestion.append(verdict.suggestion)
    return JointVerdict(
        activated_ids=tuple(activated),
        failing_ids=tuple(failing),
        flag=not failing,
        feedback=" ".join(feedback),
        suggestion=" ".join(suggestion),
    )
