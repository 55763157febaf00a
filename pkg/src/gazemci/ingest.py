"""Load and validate raw gaze recordings from disk.

On-disk layout (one directory per session):

    <session_dir>/session.json
    <session_dir>/trial_000.csv, trial_001.csv, ...

``session.json`` fields: participant_id, session_id, label, sampling_hz,
trials: [{index, image_id, gaze_file, correct}].

Each trial CSV has the header ``t_ms,gx_r,gy_r,gx_l,gy_l,pupil_r,pupil_l,valid``
(UTF-8, LF line endings).  Invalid samples carry ``valid=0`` and ``nan``
channel values.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .core import GazeSample, Group, QcStatus, TrialRecord

GAZE_HEADER = ["t_ms", "gx_r", "gy_r", "gx_l", "gy_l", "pupil_r", "pupil_l", "valid"]


class IngestError(Exception):
    pass


class MalformedFile(IngestError):
    pass


class InconsistentManifest(IngestError):
    pass


class DuplicateTrialIndex(IngestError):
    pass


@dataclass(frozen=True)
class TrialRef:
    index: int
    image_id: str
    gaze_file: str
    correct: bool


@dataclass(frozen=True)
class SessionManifest:
    participant_id: str
    session_id: str
    label: Group
    sampling_hz: float
    trials: tuple[TrialRef, ...]


def _parse_float(text: str, path: Path, row: int, col: str) -> float:
    text = text.strip()
    if text == "" or text.lower() == "nan":
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise MalformedFile(f"{path}: non-numeric value {text!r} for {col} at row {row}") from None


def load_trial_csv(path: Path) -> list[GazeSample]:
    samples: list[GazeSample] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedFile(f"{path}: empty file") from None
        if header != GAZE_HEADER:
            raise MalformedFile(f"{path}: bad header {header!r}")
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(GAZE_HEADER):
                raise MalformedFile(f"{path}: wrong column count at row {row_no}")
            valid_text = row[7].strip()
            if valid_text not in ("0", "1"):
                raise MalformedFile(f"{path}: bad valid flag {valid_text!r} at row {row_no}")
            valid = valid_text == "1"
            values = [_parse_float(row[i], path, row_no, GAZE_HEADER[i]) for i in range(7)]
            if math.isnan(values[0]):
                raise MalformedFile(f"{path}: missing timestamp at row {row_no}")
            if valid and any(math.isnan(v) for v in values[1:]):
                raise MalformedFile(f"{path}: valid sample with missing channel at row {row_no}")
            samples.append(
                GazeSample(
                    t_ms=values[0],
                    gx_r=values[1],
                    gy_r=values[2],
                    gx_l=values[3],
                    gy_l=values[4],
                    pupil_r=values[5],
                    pupil_l=values[6],
                    valid=valid,
                )
            )
    return samples


def load_session(manifest_path: Path | str) -> tuple[SessionManifest, list[TrialRecord]]:
    """Load one session; timestamps are re-based to trial onset."""
    manifest_path = Path(manifest_path)
    try:
        raw = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedFile(f"{manifest_path}: {exc}") from exc

    try:
        label = Group(raw["label"])
        entries = raw["trials"]
        missing_outcomes = [t.get("index") for t in entries if "correct" not in t]
        if missing_outcomes:
            raise InconsistentManifest(
                f"{manifest_path}: recognition outcome missing for trial(s) {missing_outcomes}"
            )
        refs = [
            TrialRef(
                index=int(t["index"]),
                image_id=str(t["image_id"]),
                gaze_file=str(t["gaze_file"]),
                correct=bool(t["correct"]),
            )
            for t in entries
        ]
        manifest = SessionManifest(
            participant_id=str(raw["participant_id"]),
            session_id=str(raw["session_id"]),
            label=label,
            sampling_hz=float(raw["sampling_hz"]),
            trials=tuple(refs),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise MalformedFile(f"{manifest_path}: bad manifest field ({exc})") from exc

    seen: set[int] = set()
    for ref in manifest.trials:
        if ref.index in seen:
            raise DuplicateTrialIndex(f"{manifest_path}: trial index {ref.index} repeated")
        seen.add(ref.index)

    trials: list[TrialRecord] = []
    for ref in manifest.trials:
        gaze_path = manifest_path.parent / ref.gaze_file
        if not gaze_path.exists():
            raise InconsistentManifest(f"{manifest_path}: missing gaze file {ref.gaze_file}")
        samples = load_trial_csv(gaze_path)
        if samples:
            t0 = samples[0].t_ms
            if t0 != 0.0:
                samples = [
                    GazeSample(
                        t_ms=s.t_ms - t0,
                        gx_r=s.gx_r,
                        gy_r=s.gy_r,
                        gx_l=s.gx_l,
                        gy_l=s.gy_l,
                        pupil_r=s.pupil_r,
                        pupil_l=s.pupil_l,
                        valid=s.valid,
                    )
                    for s in samples
                ]
        trials.append(
            TrialRecord(
                participant_id=manifest.participant_id,
                session_id=manifest.session_id,
                trial_index=ref.index,
                image_id=ref.image_id,
                samples=tuple(samples),
                trial_correct=ref.correct,
                qc_status=QcStatus.RAW,
                sampling_hz=manifest.sampling_hz,
            )
        )
    return manifest, trials


def load_dataset(root: Path | str) -> list[tuple[SessionManifest, list[TrialRecord]]]:
    """Load every session under ``root`` (any directory holding session.json)."""
    root = Path(root)
    sessions = []
    for manifest_path in sorted(root.rglob("session.json")):
        sessions.append(load_session(manifest_path))
    if not sessions:
        raise InconsistentManifest(f"no session.json found under {root}")
    return sessions


def write_trial_csv(path: Path, samples: list[GazeSample] | tuple[GazeSample, ...]) -> None:
    lines = [",".join(GAZE_HEADER)]
    for s in samples:
        fields = [f"{s.t_ms:.3f}"]
        for v in (s.gx_r, s.gy_r, s.gx_l, s.gy_l, s.pupil_r, s.pupil_l):
            fields.append("nan" if math.isnan(v) else f"{v:.3f}")
        fields.append("1" if s.valid else "0")
        lines.append(",".join(fields))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_session(session_dir: Path, manifest: SessionManifest, trials: list[TrialRecord]) -> None:
    """Emit a session in the loader's on-disk format."""
    session_dir.mkdir(parents=True, exist_ok=True)
    by_index = {t.trial_index: t for t in trials}
    if set(by_index) != {ref.index for ref in manifest.trials}:
        raise InconsistentManifest("manifest trial indices do not match trial records")
    for ref in manifest.trials:
        write_trial_csv(session_dir / ref.gaze_file, by_index[ref.index].samples)
    doc = {
        "participant_id": manifest.participant_id,
        "session_id": manifest.session_id,
        "label": manifest.label.value,
        "sampling_hz": manifest.sampling_hz,
        "trials": [
            {
                "index": ref.index,
                "image_id": ref.image_id,
                "gaze_file": ref.gaze_file,
                "correct": ref.correct,
            }
            for ref in manifest.trials
        ],
    }
    (session_dir / "session.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n"
    )


@dataclass(frozen=True)
class Census:
    trials_total: int
    per_label: dict[str, int]
    per_participant: dict[str, int]
    per_image: dict[str, int]


def dataset_census(sessions: list[tuple[SessionManifest, list[TrialRecord]]]) -> Census:
    per_label: Counter[str] = Counter()
    per_participant: Counter[str] = Counter()
    per_image: Counter[str] = Counter()
    total = 0
    for manifest, trials in sessions:
        for trial in trials:
            total += 1
            per_label[manifest.label.value] += 1
            per_participant[trial.participant_id] += 1
            per_image[trial.image_id] += 1
    return Census(
        trials_total=total,
        per_label=dict(per_label),
        per_participant=dict(per_participant),
        per_image=dict(per_image),
    )


def census_to_csv(census: Census) -> str:
    lines = ["section,key,count"]
    lines.append(f"total,all,{census.trials_total}")
    for key in sorted(census.per_label):
        lines.append(f"label,{key},{census.per_label[key]}")
    for key in sorted(census.per_participant):
        lines.append(f"participant,{key},{census.per_participant[key]}")
    for key in sorted(census.per_image):
        lines.append(f"image,{key},{census.per_image[key]}")
    return "\n".join(lines) + "\n"


def census_table(census: Census) -> str:
    hc = census.per_label.get(Group.HC.value, 0)
    mci = census.per_label.get(Group.MCI.value, 0)
    lines = [
        f"trials total: {census.trials_total} ({hc} HCs, {mci} MCI)",
        f"participants: {len(census.per_participant)}",
        f"distinct images: {len(census.per_image)}",
    ]
    shown_often = sum(1 for n in census.per_image.values() if n > 10)
    lines.append(f"images shown more than 10 times: {shown_often}")
    return "\n".join(lines) + "\n"
