"""Participant-level balanced 10-fold nested cross-validation plan.

Participants are stratified by label into 10 base folds with evenly
interleaved per-class quotas; within a class, assignment greedily balances
session counts.  Fold i uses base fold i as test, base fold (i+1) mod 10
as validation, and the remainder as training.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .core import Group, ParticipantLabel

N_FOLDS = 10


class TooFewParticipants(Exception):
    pass


@dataclass(frozen=True)
class FoldSplit:
    train: frozenset[str]
    validation: frozenset[str]
    test: frozenset[str]


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[FoldSplit, ...]
    seed: int


def _class_quotas(n: int) -> list[int]:
    """Per-fold member counts for one class, ceils spread evenly."""
    return [((k + 1) * n) // N_FOLDS - (k * n) // N_FOLDS for k in range(N_FOLDS)]


def make_fold_plan(
    participants: list[ParticipantLabel],
    seed: int,
    session_counts: dict[str, int] | None = None,
) -> FoldPlan:
    """Deterministic stratified plan; every participant tests exactly once."""
    if len(participants) < N_FOLDS:
        raise TooFewParticipants(f"need >= {N_FOLDS} participants, got {len(participants)}")
    by_class: dict[Group, list[ParticipantLabel]] = {Group.HC: [], Group.MCI: []}
    for p in participants:
        by_class[p.label].append(p)
    if not by_class[Group.HC] or not by_class[Group.MCI]:
        raise TooFewParticipants("need at least one participant per class")
    counts = session_counts or {}

    rng = random.Random(seed)
    base: list[set[str]] = [set() for _ in range(N_FOLDS)]
    fold_sessions = [0] * N_FOLDS
    for group in (Group.HC, Group.MCI):
        members = sorted(by_class[group], key=lambda p: p.participant_id)
        rng.shuffle(members)
        # stable sort keeps the shuffled order within equal session counts
        members.sort(key=lambda p: -counts.get(p.participant_id, 1))
        remaining = _class_quotas(len(members))
        for p in members:
            k = min(
                (k for k in range(N_FOLDS) if remaining[k] > 0),
                key=lambda k: (fold_sessions[k], k),
            )
            base[k].add(p.participant_id)
            remaining[k] -= 1
            fold_sessions[k] += counts.get(p.participant_id, 1)

    all_ids = frozenset(p.participant_id for p in participants)
    folds = []
    for i in range(N_FOLDS):
        test = frozenset(base[i])
        validation = frozenset(base[(i + 1) % N_FOLDS])
        train = all_ids - test - validation
        folds.append(FoldSplit(train=train, validation=validation, test=test))
    return FoldPlan(folds=tuple(folds), seed=seed)


def plan_to_json(plan: FoldPlan) -> str:
    doc = {
        "seed": plan.seed,
        "folds": [
            {
                "train": sorted(f.train),
                "validation": sorted(f.validation),
                "test": sorted(f.test),
            }
            for f in plan.folds
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def plan_from_json(text: str) -> FoldPlan:
    doc = json.loads(text)
    folds = tuple(
        FoldSplit(
            train=frozenset(f["train"]),
            validation=frozenset(f["validation"]),
            test=frozenset(f["test"]),
        )
        for f in doc["folds"]
    )
    return FoldPlan(folds=folds, seed=int(doc["seed"]))


def save_plan(plan: FoldPlan, path: Path) -> None:
    Path(path).write_text(plan_to_json(plan), newline="\n")


def load_plan(path: Path) -> FoldPlan:
    return plan_from_json(Path(path).read_text())
