"""Four-stage learning pipeline: classify mispredictions, induce rule texts
and graph edges, compile to ASTs, then validate and prune by greedy maximum
coverage.

Pruning works on an indicator matrix over the accumulated misprediction set,
so the surviving rules are exactly the ones that correct the base
predictor's observed mistakes; rules covering only correct transitions get
zero gain and are never selected.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from .core import Outcome, Trajectory, Transition, TransitionSet, classify_transitions
from .dsl import (
    EvalDiagnostics,
    ParseError,
    Polarity,
    RuleAst,
    RuleTypeError,
    evaluate,
    parse,
    pretty_print,
)
from .graphs import KnowledgeGraph, SceneGraph, kg_induce, kg_merge, sg_update

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RuleEntry:
    ast: RuleAst
    source: str
    iteration: int = 0
    covered: int = 0

    @property
    def id(self) -> str:
        return self.ast.id

    def canonical(self) -> str:
        return pretty_print(self.ast)


@dataclass(frozen=True)
class RuleSet:
    entries: tuple[RuleEntry, ...] = ()
    limit: int = 6

    def __post_init__(self) -> None:
        ids = [e.id for e in self.entries]
        if len(ids) != len(set(ids)):
            raise ValueError("rule ids must be unique within a set")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def rules(self) -> tuple[RuleAst, ...]:
        return tuple(e.ast for e in self.entries)

    def canonical_forms(self) -> set[str]:
        return {e.canonical() for e in self.entries}

    def to_json(self) -> list[dict]:
        return [
            {
                "id": e.id,
                "source": e.source,
                "iteration_learned": e.iteration,
                "covered_count": e.covered,
            }
            for e in self.entries
        ]

    @staticmethod
    def from_json(data: list[dict], limit: int = 6) -> "RuleSet":
        entries = []
        for item in data:
            ast = parse(item["source"])
            stored_id = str(item.get("id", ast.id))
            if stored_id != ast.id:
                # ids may have been uniquified after a collision; the stored
                # id wins so reloaded sets keep their identities
                ast = replace(ast, id=stored_id)
            entries.append(
                RuleEntry(
                    ast=ast,
                    source=item["source"],
                    iteration=int(item.get("iteration_learned", 0)),
                    covered=int(item.get("covered_count", 0)),
                )
            )
        return RuleSet(tuple(entries), limit)


@dataclass(frozen=True)
class LearnerConfig:
    window: int = 20  # transitions per induction chunk
    limit: int = 6  # rule budget after pruning
    prune: bool = True  # False = ablation arm: skip validity drop and pruning


@dataclass
class LearnerState:
    """Single-owner state threading through learning iterations."""

    rules: RuleSet = field(default_factory=RuleSet)
    kg: KnowledgeGraph = field(default_factory=KnowledgeGraph)
    sg: SceneGraph = field(default_factory=SceneGraph)
    history: list[Transition] = field(default_factory=list)
    mispredictions: list[tuple[Transition, Outcome]] = field(default_factory=list)
    iteration: int = 0
    invalid_texts: list[str] = field(default_factory=list)
    dropped_edges: int = 0
    last_trace: tuple["SelectionStep", ...] = ()
    diagnostics: EvalDiagnostics = field(default_factory=EvalDiagnostics)

    def misprediction_keys(self) -> set[str]:
        return {t.digest() + str(p.success) for t, p in self.mispredictions}


@dataclass(frozen=True)
class InductionResult:
    new_texts: tuple[str, ...]
    invalid_texts: tuple[str, ...]


def induce_rules(
    window: Sequence[Transition], existing: RuleSet, proposer
) -> InductionResult:
    """Ask the proposer for new rule texts over a window.

    Texts that fail to parse are returned tagged-invalid for logging and
    excluded; texts whose canonical form duplicates an existing rule are
    silently dropped.
    """
    raw = proposer.propose_rules(window, [e.source for e in existing.entries])
    known = existing.canonical_forms()
    new_texts: list[str] = []
    invalid: list[str] = []
    for text in raw:
        try:
            canonical = pretty_print(parse(text))
        except (ParseError, RuleTypeError) as exc:
            log.info("discarding unparseable rule: %s (%s)", text[:60], exc)
            invalid.append(text)
            continue
        if canonical in known:
            continue
        known.add(canonical)
        new_texts.append(text)
    return InductionResult(tuple(new_texts), tuple(invalid))


def asserted_bit(rule: RuleAst, verdict) -> bool | None:
    """The success bit a rule actively claims for a transition, or None when
    the rule is dormant there.

    A fail-if rule asserts failure only when its condition branch fires;
    otherwise its output is null.  A succeed-only-if rule models its action
    completely and asserts a bit whenever it activates.
    """
    if not verdict.activated:
        return None
    if rule.polarity is Polarity.FAIL_IF:
        return False if not verdict.flag else None
    return verdict.flag


def coverage(
    rule: RuleAst,
    transition: Transition,
    base_prediction: Outcome,
    kg: KnowledgeGraph,
    sg: SceneGraph,
    *,
    tool_tiers: Sequence[str],
) -> bool:
    """True iff the rule asserts a bit on the transition and that bit matches
    the real outcome where the base prediction was wrong."""
    if base_prediction.success == transition.outcome.success:
        raise ValueError("coverage is defined over mispredicted transitions only")
    verdict = evaluate(
        rule, transition.obs, transition.action, kg, sg, tool_tiers=tool_tiers
    )
    return asserted_bit(rule, verdict) == transition.outcome.success


@dataclass(frozen=True)
class CoverageMatrix:
    rule_ids: tuple[str, ...]
    transition_ids: tuple[str, ...]
    a: tuple[tuple[bool, ...], ...]  # a[i][j]: rule i covers misprediction j

    def to_json(self) -> dict:
        return {
            "rules": list(self.rule_ids),
            "transitions": list(self.transition_ids),
            "matrix": [[1 if cell else 0 for cell in row] for row in self.a],
        }


def build_matrix(
    entries: Sequence[RuleEntry],
    mispredictions: Sequence[tuple[Transition, Outcome]],
    kg: KnowledgeGraph,
    sg: SceneGraph,
    *,
    tool_tiers: Sequence[str],
) -> CoverageMatrix:
    rows = []
    for entry in entries:
        rows.append(
            tuple(
                coverage(entry.ast, t, predicted, kg, sg, tool_tiers=tool_tiers)
                for t, predicted in mispredictions
            )
        )
    return CoverageMatrix(
        rule_ids=tuple(e.id for e in entries),
        transition_ids=tuple(t.digest() for t, _ in mispredictions),
        a=tuple(rows),
    )


@dataclass(frozen=True)
class SelectionStep:
    rule_id: str
    gain: int


def prune_trace(matrix: CoverageMatrix, limit: int) -> list[SelectionStep]:
    """Greedy maximum-coverage selection.

    Each round picks the rule with the largest marginal gain over the
    not-yet-covered mispredictions (ties broken by lowest rule index), and
    stops when everything is covered, no rule adds anything, or the rule
    budget is reached.
    """
    if limit < 1:
        raise ValueError("rule limit must be >= 1")
    n = len(matrix.transition_ids)
    covered: set[int] = set()
    selected: list[SelectionStep] = []
    remaining = set(range(len(matrix.rule_ids)))
    while len(covered) < n and remaining:
        best_i, best_gain = -1, 0
        for i in sorted(remaining):
            gain = sum(1 for j in range(n) if matrix.a[i][j] and j not in covered)
            if gain > best_gain:
                best_i, best_gain = i, gain
        if best_gain == 0:
            break
        selected.append(SelectionStep(matrix.rule_ids[best_i], best_gain))
        covered.update(j for j in range(n) if matrix.a[best_i][j])
        remaining.discard(best_i)
        if len(selected) == limit:
            break
    return selected


def prune(matrix: CoverageMatrix, limit: int) -> list[str]:
    return [step.rule_id for step in prune_trace(matrix, limit)]


def drop_invalid(
    rules: RuleSet,
    real: Sequence[Transition] | Trajectory,
    kg: KnowledgeGraph,
    sg: SceneGraph,
    *,
    tool_tiers: Sequence[str],
) -> RuleSet:
    """Remove every rule that, on any transition where it asserts a success
    bit, asserts the wrong one.  Dormant transitions are excluded, so a rule
    whose condition branch never fires in the data is untouched."""
    transitions = real.transitions if isinstance(real, Trajectory) else tuple(real)
    keep = []
    for entry in rules.entries:
        valid = True
        for t in transitions:
            verdict = evaluate(entry.ast, t.obs, t.action, kg, sg, tool_tiers=tool_tiers)
            asserted = asserted_bit(entry.ast, verdict)
            if asserted is not None and asserted != t.outcome.success:
                valid = False
                log.info("dropping invalid rule %s (contradicted by a real transition)", entry.id)
                break
        if valid:
            keep.append(entry)
    return RuleSet(tuple(keep), rules.limit)


@dataclass(frozen=True)
class CoverRate:
    value: float
    defined: bool  # False when the misprediction set was empty

    def __float__(self) -> float:
        return self.value


def cover_rate(
    rules: RuleSet,
    mispredictions: TransitionSet | Sequence[tuple[Transition, Outcome]],
    kg: KnowledgeGraph,
    sg: SceneGraph,
    *,
    tool_tiers: Sequence[str],
) -> CoverRate:
    """Fraction of mispredictions corrected by at least one rule."""
    if isinstance(mispredictions, TransitionSet):
        pairs = list(zip(mispredictions.transitions, mispredictions.predictions))
    else:
        pairs = list(mispredictions)
    if not pairs:
        return CoverRate(0.0, defined=False)
    hits = 0
    for transition, predicted in pairs:
        if any(
            coverage(e.ast, transition, predicted, kg, sg, tool_tiers=tool_tiers)
            for e in rules.entries
        ):
            hits += 1
    return CoverRate(float(Fraction(hits, len(pairs))), defined=True)


def _unique_id(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    n = 2
    while f"{base}__{n}" in taken:
        n += 1
    return f"{base}__{n}"


def ns_learning(
    pred: Trajectory,
    real: Trajectory,
    state: LearnerState,
    proposer,
    config: LearnerConfig,
    *,
    tool_tiers: Sequence[str],
) -> RuleSet:
    """One learning iteration over an aligned (predicted, real) pair.

    Stages: classify, induce (rules and edges, chunked by the context
    window), compile, validate against all real transitions seen so far,
    then prune by greedy maximum coverage over the accumulated misprediction
    set.  Graph updates land in the state even if the proposer fails midway.
    """
    correct, incorrect = classify_transitions(real, pred)

    known = state.misprediction_keys()
    for transition, predicted in zip(incorrect.transitions, incorrect.predictions):
        key = transition.digest() + str(predicted.success)
        if key not in known:
            known.add(key)
            state.mispredictions.append((transition, predicted))

    sg = state.sg
    for transition in real.transitions:
        sg = sg_update(sg, transition.obs)
    if real.transitions:
        sg = sg_update(sg, real.transitions[-1].next_obs)
    state.sg = sg

    new_entries: list[RuleEntry] = []
    taken_ids = {e.id for e in state.rules.entries}
    pending = state.rules
    step = config.window
    for start in range(0, len(real.transitions), step):
        chunk = real.transitions[start : start + step]
        induction = kg_induce(chunk, proposer)
        state.kg = kg_merge(state.kg, induction.edges)
        state.dropped_edges += induction.dropped
        result = induce_rules(chunk, pending, proposer)
        state.invalid_texts.extend(result.invalid_texts)
        for text in result.new_texts:
            ast = parse(text)
            rule_id = _unique_id(ast.id, taken_ids)
            taken_ids.add(rule_id)
            if rule_id != ast.id:
                ast = replace(ast, id=rule_id)
            new_entries.append(
                RuleEntry(ast=ast, source=text, iteration=state.iteration)
            )
            pending = RuleSet(pending.entries + (new_entries[-1],), config.limit)

    state.history.extend(real.transitions)
    pool = RuleSet(state.rules.entries + tuple(new_entries), config.limit)

    if config.prune:
        pool = drop_invalid(pool, state.history, state.kg, state.sg, tool_tiers=tool_tiers)
        matrix = build_matrix(
            pool.entries, state.mispredictions, state.kg, state.sg, tool_tiers=tool_tiers
        )
        trace = prune_trace(matrix, config.limit)
        state.last_trace = tuple(trace)
        gains = {step.rule_id: step.gain for step in trace}
        order = [step.rule_id for step in trace]
        by_id = {e.id: e for e in pool.entries}
        survivors = tuple(
            replace(by_id[rule_id], covered=gains[rule_id]) for rule_id in order
        )
        result_set = RuleSet(survivors, config.limit)
    else:
        state.last_trace = ()
        result_set = RuleSet(pool.entries, config.limit)

    state.rules = result_set
    state.iteration += 1
    return result_set
