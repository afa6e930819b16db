from __future__ import annotations

import pytest

from worldalign.core import Action, Observation, Outcome, Status, Transition, VisibleObject


def make_obs(
    position: str = "grass",
    in_front: str = "grass",
    near: tuple[str, ...] = (),
    visible: tuple[tuple[str, int, int], ...] = (),
    status: tuple[int, int, int, int] = (9, 9, 9, 9),
    inventory: dict[str, int] | None = None,
) -> Observation:
    """Observation builder that keeps the near-implies-visible invariant."""
    objects = [VisibleObject(t, x, y) for t, x, y in visible]
    seen = {v.type for v in objects} | {position, in_front}
    for i, name in enumerate(near):
        if name not in seen:
            objects.append(VisibleObject(name, 1, -i))
            seen.add(name)
    return Observation(
        position=position,
        in_front=in_front,
        visible_objects=tuple(objects),
        near_objects=frozenset(near),
        status=Status(*status),
        inventory=dict(inventory or {}),
    )


def make_transition(
    action: Action,
    success: bool,
    obs: Observation | None = None,
    next_obs: Observation | None = None,
    feedback: str = "",
) -> Transition:
    obs = obs or make_obs()
    return Transition(obs, action, Outcome(success, feedback), next_obs or obs)


@pytest.fixture
def obs_factory():
    return make_obs
