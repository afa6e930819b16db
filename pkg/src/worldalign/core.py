"""Shared domain types for agent-environment interaction.

Observations, actions, outcomes and trajectories are frozen dataclasses with
a stable JSON wire format, so every other module can pass them around or
persist them without ceremony.  Trajectories come in two flavours that share
one type: real ones produced by the environment (which chain step to step)
and predicted ones produced by a world model (which generally do not).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

ACTION_NAMES = ("mine", "attack", "sleep", "place", "make", "explore")

# Argument schema per action name.  Validation is strict: an action must
# carry exactly these keys with these types.
ACTION_ARGS: dict[str, dict[str, type]] = {
    "mine": {"block_name": str, "amount": int},
    "attack": {"creature": str, "amount": int},
    "sleep": {},
    "place": {"block_name": str},
    "make": {"tool_name": str},
    "explore": {"direction": str, "steps": int},
}

# Union of argument names, used by the rule DSL to type-check arg references.
ALL_ARG_NAMES: dict[str, type] = {
    name: typ for args in ACTION_ARGS.values() for name, typ in args.items()
}

STATUS_FIELDS = ("health", "food", "drink", "energy")
STATUS_MAX = 9
DIRECTIONS = ("north", "south", "east", "west")

# Mining prerequisite ladder shared by config defaults and rule evaluation.
DEFAULT_TOOL_TIERS = ("wood_pickaxe", "stone_pickaxe", "iron_pickaxe")


class LengthMismatch(ValueError):
    """Real and predicted trajectories differ in length."""


class PrefixMismatch(ValueError):
    """Real and predicted trajectories diverge in an (obs, action) pair."""


def dumps_canonical(obj: object) -> str:
    """Serialize to JSON with a byte-stable layout."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class VisibleObject:
    """One entry of an observation's visible-object list, offsets relative
    to the agent (x = columns east, y = rows south)."""

    type: str
    x: int
    y: int

    def to_json(self) -> dict:
        return {"type": self.type, "x": self.x, "y": self.y}

    @staticmethod
    def from_json(data: dict) -> "VisibleObject":
        return VisibleObject(str(data["type"]), int(data["x"]), int(data["y"]))


@dataclass(frozen=True)
class Status:
    health: int
    food: int
    drink: int
    energy: int

    def __post_init__(self) -> None:
        for name in STATUS_FIELDS:
            value = getattr(self, name)
            if not 0 <= value <= STATUS_MAX:
                raise ValueError(f"status.{name}={value} outside [0, {STATUS_MAX}]")

    def to_json(self) -> dict:
        return {name: getattr(self, name) for name in STATUS_FIELDS}

    @staticmethod
    def from_json(data: dict) -> "Status":
        return Status(*(int(data[name]) for name in STATUS_FIELDS))


@dataclass(frozen=True)
class Observation:
    """Agent-visible snapshot of the world.

    `position` is the terrain the agent stands on, `in_front` the cell it is
    facing.  `near_objects` must be a subset of what is otherwise visible.
    """

    position: str
    in_front: str
    visible_objects: tuple[VisibleObject, ...]
    near_objects: frozenset[str]
    status: Status
    inventory: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        visible_types = {v.type for v in self.visible_objects}
        visible_types.update((self.position, self.in_front))
        stray = self.near_objects - visible_types
        if stray:
            raise ValueError(f"near_objects not visible anywhere: {sorted(stray)}")
        for item, count in self.inventory.items():
            if count < 0:
                raise ValueError(f"inventory[{item}]={count} negative")

    def inventory_count(self, item: str) -> int:
        return self.inventory.get(item, 0)

    def to_json(self) -> dict:
        return {
            "position": self.position,
            "in_front": self.in_front,
            "visible_objects": [v.to_json() for v in self.visible_objects],
            "near_objects": sorted(self.near_objects),
            "status": self.status.to_json(),
            "inventory": dict(sorted(self.inventory.items())),
        }

    @staticmethod
    def from_json(data: dict) -> "Observation":
        return Observation(
            position=str(data["position"]),
            in_front=str(data["in_front"]),
            visible_objects=tuple(
                VisibleObject.from_json(v) for v in data["visible_objects"]
            ),
            near_objects=frozenset(str(n) for n in data["near_objects"]),
            status=Status.from_json(data["status"]),
            inventory={str(k): int(v) for k, v in data["inventory"].items()},
        )


@dataclass(frozen=True)
class Action:
    name: str
    args: dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.name not in ACTION_NAMES:
            raise ValueError(f"unknown action {self.name!r}")
        schema = ACTION_ARGS[self.name]
        if set(self.args) != set(schema):
            raise ValueError(
                f"{self.name} takes args {sorted(schema)}, got {sorted(self.args)}"
            )
        for key, typ in schema.items():
            value = self.args[key]
            if typ is int:
                if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                    raise ValueError(f"{self.name}.{key} must be a positive int")
            elif not isinstance(value, str):
                raise ValueError(f"{self.name}.{key} must be a string")
        if "direction" in self.args and self.args["direction"] not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.args['direction']!r}")

    def to_json(self) -> dict:
        return {"name": self.name, "args": dict(sorted(self.args.items()))}

    @staticmethod
    def from_json(data: dict) -> "Action":
        return Action(str(data["name"]), dict(data["args"]))


@dataclass(frozen=True)
class Outcome:
    """Binary result of an action plus explanatory strings.

    Successful outcomes never carry a suggestion; failed ones may, when a
    rule or predictor supplied one.
    """

    success: bool
    feedback: str = ""
    suggestion: str = ""

    def __post_init__(self) -> None:
        if self.success and self.suggestion:
            raise ValueError("successful outcomes carry no suggestion")

    def to_json(self) -> dict:
        return {
            "success": self.success,
            "feedback": self.feedback,
            "suggestion": self.suggestion,
        }

    @staticmethod
    def from_json(data: dict) -> "Outcome":
        return Outcome(
            bool(data["success"]),
            str(data.get("feedback", "")),
            str(data.get("suggestion", "")),
        )


@dataclass(frozen=True)
class Transition:
    obs: Observation
    action: Action
    outcome: Outcome
    next_obs: Observation

    def to_json(self) -> dict:
        return {
            "obs": self.obs.to_json(),
            "action": self.action.to_json(),
            "outcome": self.outcome.to_json(),
            "next_obs": self.next_obs.to_json(),
        }

    @staticmethod
    def from_json(data: dict) -> "Transition":
        return Transition(
            Observation.from_json(data["obs"]),
            Action.from_json(data["action"]),
            Outcome.from_json(data["outcome"]),
            Observation.from_json(data["next_obs"]),
        )

    def digest(self) -> str:
        """Short content hash, used as a stable transition id."""
        import hashlib

        blob = dumps_canonical(self.to_json()).encode()
        return hashlib.sha1(blob).hexdigest()[:12]


@dataclass(frozen=True)
class Trajectory:
    transitions: tuple[Transition, ...]
    seed: int = 0
    config_id: str = ""

    def __len__(self) -> int:
        return len(self.transitions)

    def __getitem__(self, i: int) -> Transition:
        return self.transitions[i]

    def validate_chain(self) -> None:
        """Check temporal consistency (real trajectories only: step t's
        next_obs is step t+1's obs)."""
        for i in range(len(self.transitions) - 1):
            if self.transitions[i].next_obs != self.transitions[i + 1].obs:
                raise ValueError(f"trajectory chain broken between steps {i} and {i + 1}")

    def to_ndjson(self) -> str:
        lines = [dumps_canonical({"meta": {"seed": self.seed, "config_id": self.config_id}})]
        lines.extend(dumps_canonical(t.to_json()) for t in self.transitions)
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_ndjson(text: str) -> "Trajectory":
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            return Trajectory(())
        head = json.loads(lines[0])
        if "meta" in head:
            meta, body = head["meta"], lines[1:]
        else:
            meta, body = {"seed": 0, "config_id": ""}, lines
        transitions = tuple(Transition.from_json(json.loads(line)) for line in body)
        return Trajectory(transitions, int(meta["seed"]), str(meta["config_id"]))


@dataclass(frozen=True)
class TransitionSet:
    """A classified slice of a trajectory pair: indices into the real
    trajectory, the real transitions at those indices, and the outcomes the
    base predictor claimed for them."""

    indices: tuple[int, ...]
    transitions: tuple[Transition, ...]
    predictions: tuple[Outcome, ...]

    def __len__(self) -> int:
        return len(self.indices)

    def __bool__(self) -> bool:
        return bool(self.indices)


def classify_transitions(
    real: Trajectory, predicted: Trajectory
) -> tuple[TransitionSet, TransitionSet]:
    """Partition indices into correctly and incorrectly predicted sets.

    A prediction is correct iff its success bit matches the real outcome;
    full next observations are deliberately not compared.
    """
    if len(real) != len(predicted):
        raise LengthMismatch(f"real has {len(real)} transitions, predicted {len(predicted)}")
    for i, (r, p) in enumerate(zip(real.transitions, predicted.transitions)):
        if r.obs != p.obs or r.action != p.action:
            raise PrefixMismatch(f"(obs, action) diverge at index {i}")

    correct: list[int] = []
    incorrect: list[int] = []
    for i, (r, p) in enumerate(zip(real.transitions, predicted.transitions)):
        (correct if p.outcome.success == r.outcome.success else incorrect).append(i)

    def subset(indices: list[int]) -> TransitionSet:
        return TransitionSet(
            tuple(indices),
            tuple(real.transitions[i] for i in indices),
            tuple(predicted.transitions[i].outcome for i in indices),
        )

    return subset(correct), subset(incorrect)
