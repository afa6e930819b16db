import math

import pytest

from worldalign.agent import (
    Checkpoint,
    EpisodeComponents,
    EpisodeInterrupted,
    ScriptedPlanner,
    mpc_plan,
    run_episode,
    score,
)
from worldalign.core import Action
from worldalign.dsl import parse
from worldalign.env import make_config
from worldalign.graphs import KnowledgeGraph, SceneGraph, KgEdge, kg_merge
from worldalign.learner import LearnerConfig, LearnerState, RuleEntry, RuleSet
from worldalign.proposers import OracleProposer, ProposerUnavailable
from worldalign.world_model import NaivePrior, ScriptedPredictor

from conftest import make_obs


class QueueProposer:
    """Action proposer replaying a scripted sequence of candidates."""

    def __init__(self, actions):
        self.actions = list(actions)
        self.seen_feedback: list[list[str]] = []

    def propose(self, obs, feedback, suggestions, context):
        self.seen_feedback.append(list(feedback))
        if len(self.actions) > 1:
            return self.actions.pop(0)
        return self.actions[0]


def _mpc(obs, rules, predictor, proposer, replan_limit=3):
    config = make_config("default")
    return mpc_plan(
        obs, rules, predictor, proposer, KnowledgeGraph.empty(), SceneGraph(),
        tables=config.base_tables(), replan_limit=replan_limit,
    )


def test_first_proposal_accepted_with_replan_count_one():
    proposer = QueueProposer([Action("sleep", {})])
    result = _mpc(make_obs(), RuleSet((), 6), ScriptedPredictor(default=True), proposer)
    assert result.replan_count == 1
    assert result.action == Action("sleep", {})
    assert result.predicted.success


def test_replan_correction_pattern_missing_iron():
    # First try the craft; the rule names the missing iron; second proposal
    # mines iron first and is accepted.
    rule = parse(
        "RULE model FOR make: SUCCEED ONLY IF kg_requires(action.args[tool_name]) "
        'satisfied_by inventory SUGGEST "Missing for {tool_name}: {missing}."'
    )
    kg = kg_merge(KnowledgeGraph.empty(), [KgEdge("iron_pickaxe", "iron", "consumes", 1)])
    rules = RuleSet((RuleEntry(ast=rule, source="s"),), 6)
    obs = make_obs(near=("iron",), inventory={"wood_pickaxe": 1, "stone_pickaxe": 1})

    class CorrectingProposer:
        def propose(self, obs, feedback, suggestions, context):
            if suggestions and "iron" in suggestions[-1]:
                return Action("mine", {"block_name": "iron", "amount": 1})
            return Action("make", {"tool_name": "iron_pickaxe"})

    config = make_config("default")
    result = mpc_plan(obs, rules, ScriptedPredictor(default=True), CorrectingProposer(),
                      kg, SceneGraph(), tables=config.base_tables())
    assert result.replan_count == 2
    assert result.action.name == "mine"
    assert result.predicted.success


def test_replan_limit_returns_last_candidate_flagged():
    rule = parse('RULE never FOR sleep: FAIL IF obs.position == "grass"')
    rules = RuleSet((RuleEntry(ast=rule, source="s"),), 6)
    proposer = QueueProposer([Action("sleep", {})])
    result = _mpc(make_obs(), rules, ScriptedPredictor(default=True), proposer)
    assert result.replan_count == 3
    assert not result.predicted.success


def test_feedback_history_strictly_grows_within_one_call():
    rule = parse('RULE never FOR sleep: FAIL IF obs.position == "grass" FEEDBACK "nope"')
    rules = RuleSet((RuleEntry(ast=rule, source="s"),), 6)
    proposer = QueueProposer([Action("sleep", {})])
    _mpc(make_obs(), rules, ScriptedPredictor(default=True), proposer, replan_limit=4)
    lengths = [len(f) for f in proposer.seen_feedback]
    assert lengths == [0, 1, 2, 3]


def test_mpc_requires_positive_replan_limit():
    with pytest.raises(ValueError):
        _mpc(make_obs(), RuleSet((), 6), ScriptedPredictor(), QueueProposer([Action("sleep", {})]),
             replan_limit=0)


# -- score ------------------------------------------------------------------------

def test_score_all_zero():
    assert score({"a": 0.0, "b": 0.0}).percent == 0.0


def test_score_all_one_is_100():
    value = score({"a": 1.0, "b": 1.0, "c": 1.0})
    assert value.percent == pytest.approx(100.0)


def test_score_half_rates_golden():
    # Independent evaluation of the formula: exp(mean(ln(1 + 100 s))) - 1
    rates = {"a": 1.0, "b": 1.0, "c": 0.0, "d": 0.0}
    expected = math.exp((math.log(101.0) * 2 + 0.0 * 2) / 4) - 1
    assert score(rates).percent == pytest.approx(expected)
    assert round(score(rates).percent, 3) == round(expected, 3) == 9.05


def test_score_empty_map_flagged_zero():
    value = score({})
    assert value.percent == 0.0 and not value.defined


def test_score_rejects_out_of_range():
    with pytest.raises(ValueError):
        score({"a": 1.5})


def test_score_permutation_invariant_and_monotone():
    a = score({"x": 0.2, "y": 0.9}).percent
    b = score({"y": 0.9, "x": 0.2}).percent
    assert a == b
    assert score({"x": 0.3, "y": 0.9}).percent > a


# -- episodes ----------------------------------------------------------------------

def _components(config, proposer_kind="oracle"):
    return EpisodeComponents(
        predictor=NaivePrior(config),
        planner=ScriptedPlanner(config),
        rule_proposer=OracleProposer(config) if proposer_kind == "oracle" else None,
        learner_config=LearnerConfig(),
    )


def test_episode_same_seed_same_metrics():
    config = make_config("default", seed=21)
    results = []
    for _ in range(2):
        state = LearnerState(rules=RuleSet((), 6))
        results.append(run_episode(config, state, _components(config)))
    assert results[0].metrics == results[1].metrics
    assert results[0].real.to_ndjson() == results[1].real.to_ndjson()


def test_episode_every_action_was_vetted_first():
    config = make_config("default", seed=21)
    state = LearnerState(rules=RuleSet((), 6))
    result = run_episode(config, state, _components(config))
    # model-based contract: real and predicted trajectories are index-aligned
    assert len(result.real) == len(result.predicted)
    for r, p in zip(result.real.transitions, result.predicted.transitions):
        assert r.obs == p.obs and r.action == p.action


def test_episode_step_cadence_learns_every_step():
    config = make_config("default", seed=21)
    components = _components(config)
    components.cadence = "step"
    state = LearnerState(rules=RuleSet((), 6))
    result = run_episode(config, state, components)
    assert state.iteration == result.metrics["steps"]


def test_proposer_failure_checkpoints_episode():
    config = make_config("default", seed=21)

    class FlakyPlanner(ScriptedPlanner):
        calls = 0

        def propose(self, obs, feedback, suggestions, context):
            FlakyPlanner.calls += 1
            if FlakyPlanner.calls > 5:
                raise ProposerUnavailable("backend down")
            return super().propose(obs, feedback, suggestions, context)

    components = EpisodeComponents(
        predictor=NaivePrior(config),
        planner=FlakyPlanner(config),
        rule_proposer=None,
    )
    state = LearnerState(rules=RuleSet((), 6))
    with pytest.raises(EpisodeInterrupted) as err:
        run_episode(config, state, components)
    checkpoint = err.value.checkpoint
    assert checkpoint.config_id == "default"
    assert len(checkpoint.actions) == 5
    assert Checkpoint.from_json(checkpoint.to_json()) == checkpoint


def test_checkpoint_resume_continues_episode():
    config = make_config("default", seed=21)
    state = LearnerState(rules=RuleSet((), 6))
    full = run_episode(config, state, _components(config, proposer_kind="none"))

    # rebuild from a checkpoint holding the first 10 actions
    checkpoint = Checkpoint(
        config_id="default", seed=21, target="make_iron_pickaxe",
        actions=tuple(t.action for t in full.real.transitions[:10]), rules=(),
    )
    resumed_state = LearnerState(rules=RuleSet((), 6))
    resumed = run_episode(
        config, resumed_state, _components(config, proposer_kind="none"), resume=checkpoint
    )
    assert resumed.real.transitions[:10] == full.real.transitions[:10]
    assert resumed.metrics["task_complete"] == full.metrics["task_complete"]


def test_coverage_curve_with_aligned_predictor_is_flagged_zeros(monkeypatch):
    from worldalign import experiments

    config = make_config("default", seed=3)
    real, _ = experiments.run_probe(config, NaivePrior(config), 40, 20)
    monkeypatch.setattr(experiments, "run_probe", lambda *a, **k: (real, real))
    curve = experiments.coverage_curve(config, OracleProposer(config), iterations=2)
    assert not curve.defined
    assert all(v == 0.0 for v in curve.series)
