"""Trial curation rules and conversion to fixed-length time series.

Curation order per trial: validity filter -> QC decision -> in-image filter.
The missing fraction is computed against the expected sample count
(trial duration x sampling rate), not the retained count, so device
dropouts that shorten the file still count as missing data.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import (
    TIME_STEPS,
    GazeSample,
    GazeTimeSeries,
    Group,
    ParticipantLabel,
    QcStatus,
    ScreenGeometry,
    TrialRecord,
)
from .ingest import SessionManifest


class PreprocessError(Exception):
    pass


class AlreadyProcessed(PreprocessError):
    pass


class TooFewSamples(PreprocessError):
    pass


class NoMciParticipants(PreprocessError):
    pass


@dataclass(frozen=True)
class QcPolicy:
    max_missing_fraction: float = 0.20
    max_gap_ms: float = 1000.0
    drop_out_of_image: bool = True
    # Expected trial duration; encoding stimuli are shown for 3 s.
    trial_ms: float = 3000.0

    def __post_init__(self) -> None:
        if not 0.0 < self.max_missing_fraction < 1.0:
            raise ValueError("max_missing_fraction must be in (0, 1)")
        if self.max_gap_ms <= 0:
            raise ValueError("max_gap_ms must be positive")


def qc_trial(trial: TrialRecord, policy: QcPolicy, geom: ScreenGeometry) -> TrialRecord:
    """Apply the missing-data and gap rules; retain valid, in-image samples.

    Gaps are measured between consecutive valid samples, including the
    leading span from trial onset and the trailing span to the nominal
    trial end, so absent rows count the same as explicit invalid rows.
    """
    if trial.qc_status != QcStatus.RAW:
        raise AlreadyProcessed(f"trial already has status {trial.qc_status.value}")

    expected_n = max(1, round(policy.trial_ms * trial.sampling_hz / 1000.0))
    valid = [s for s in trial.samples if s.valid]
    missing_fraction = max(0.0, (expected_n - len(valid)) / expected_n)
    if missing_fraction >= policy.max_missing_fraction:
        return replace(trial, qc_status=QcStatus.REJECTED_MISSING)

    valid_times = np.array([s.t_ms for s in valid], dtype=np.float64)
    boundaries = np.concatenate(([0.0], valid_times, [policy.trial_ms]))
    if np.any(np.diff(boundaries) > policy.max_gap_ms):
        return replace(trial, qc_status=QcStatus.REJECTED_GAP)

    retained = valid
    if policy.drop_out_of_image:
        retained = [s for s in retained if geom.in_image(*s.cyclopean())]
    return replace(trial, samples=tuple(retained), qc_status=QcStatus.ACCEPTED)


def balance_exclude_best_mci(participants: list[ParticipantLabel]) -> str:
    """Id of the best-performing MCI participant (tie: smallest id)."""
    mci = [p for p in participants if p.label == Group.MCI]
    if not mci:
        raise NoMciParticipants("no MCI participants to exclude from")
    best = min(mci, key=lambda p: (-p.overall_score, p.participant_id))
    return best.participant_id


@dataclass(frozen=True)
class PupilStats:
    mean_r: float
    std_r: float
    mean_l: float
    std_l: float


def session_pupil_stats(accepted_trials: list[TrialRecord]) -> PupilStats:
    """Per-session pupil mean/std over accepted trials only."""
    r = [s.pupil_r for t in accepted_trials for s in t.samples]
    l = [s.pupil_l for t in accepted_trials for s in t.samples]
    if not r:
        return PupilStats(0.0, 1.0, 0.0, 1.0)
    std_r = float(np.std(r)) or 1.0
    std_l = float(np.std(l)) or 1.0
    return PupilStats(float(np.mean(r)), std_r, float(np.mean(l)), std_l)


def to_time_series(
    trial: TrialRecord, pupil_stats: PupilStats, geom: ScreenGeometry
) -> GazeTimeSeries:
    """Resample an accepted trial onto the fixed 107-step grid.

    With >= 107 retained samples, channels are linearly resampled onto 107
    uniform times across [first, last] timestamp.  With fewer, the span is
    resampled onto one step per retained sample and the tail is zero-padded
    with mask=False.
    """
    if trial.qc_status != QcStatus.ACCEPTED:
        raise PreprocessError("to_time_series requires an accepted trial")
    samples = trial.samples
    if len(samples) < 2:
        raise TooFewSamples(f"need >= 2 retained samples, got {len(samples)}")

    t = np.array([s.t_ms for s in samples], dtype=np.float64)
    raw = np.array(
        [[s.gx_r, s.gy_r, s.gx_l, s.gy_l, s.pupil_r, s.pupil_l] for s in samples],
        dtype=np.float64,
    )
    raw[:, 0] /= geom.width_px
    raw[:, 2] /= geom.width_px
    raw[:, 1] /= geom.height_px
    raw[:, 3] /= geom.height_px
    raw[:, 4] = (raw[:, 4] - pupil_stats.mean_r) / pupil_stats.std_r
    raw[:, 5] = (raw[:, 5] - pupil_stats.mean_l) / pupil_stats.std_l

    n_real = min(len(samples), TIME_STEPS)
    grid = np.linspace(t[0], t[-1], n_real)
    steps = np.zeros((TIME_STEPS, raw.shape[1]), dtype=np.float32)
    for c in range(raw.shape[1]):
        steps[:n_real, c] = np.interp(grid, t, raw[:, c])
    mask = np.zeros(TIME_STEPS, dtype=bool)
    mask[:n_real] = True
    return GazeTimeSeries(steps=steps, mask=mask)


def participant_scores(
    sessions: list[tuple[SessionManifest, list[TrialRecord]]]
) -> list[ParticipantLabel]:
    """Overall score = fraction of correct trials across a participant's sessions."""
    correct: dict[str, int] = {}
    total: dict[str, int] = {}
    labels: dict[str, Group] = {}
    for manifest, trials in sessions:
        labels[manifest.participant_id] = manifest.label
        for trial in trials:
            total[trial.participant_id] = total.get(trial.participant_id, 0) + 1
            if trial.trial_correct:
                correct[trial.participant_id] = correct.get(trial.participant_id, 0) + 1
    return [
        ParticipantLabel(pid, labels[pid], correct.get(pid, 0) / total[pid])
        for pid in sorted(total)
    ]


@dataclass(frozen=True)
class CurationStage:
    stage: str
    trials_total: int
    trials_hc: int
    trials_mci: int


@dataclass
class CuratedDataset:
    sessions: list[tuple[SessionManifest, list[TrialRecord]]]  # accepted trials only
    participants: list[ParticipantLabel]  # post-exclusion
    excluded_participant: str
    report: list[CurationStage]


def _stage_counts(
    name: str, sessions: list[tuple[SessionManifest, list[TrialRecord]]]
) -> CurationStage:
    hc = sum(len(t) for m, t in sessions if m.label == Group.HC)
    mci = sum(len(t) for m, t in sessions if m.label == Group.MCI)
    return CurationStage(name, hc + mci, hc, mci)


def curate_dataset(
    sessions: list[tuple[SessionManifest, list[TrialRecord]]],
    policy: QcPolicy,
    geom: ScreenGeometry,
) -> CuratedDataset:
    """QC every trial, then drop the best-performing MCI participant."""
    report = [_stage_counts("raw", sessions)]

    qced = [
        (manifest, [qc_trial(t, policy, geom) for t in trials])
        for manifest, trials in sessions
    ]
    accepted = [
        (m, [t for t in trials if t.qc_status == QcStatus.ACCEPTED]) for m, trials in qced
    ]
    report.append(_stage_counts("after_qc", accepted))

    scores = participant_scores(sessions)
    excluded = balance_exclude_best_mci(scores)
    balanced = [(m, t) for m, t in accepted if m.participant_id != excluded]
    report.append(_stage_counts("after_balance", balanced))

    participants = [p for p in scores if p.participant_id != excluded]
    return CuratedDataset(
        sessions=balanced,
        participants=participants,
        excluded_participant=excluded,
        report=report,
    )


def report_to_csv(report: list[CurationStage]) -> str:
    lines = ["stage,trials_total,trials_hc,trials_mci"]
    for row in report:
        lines.append(f"{row.stage},{row.trials_total},{row.trials_hc},{row.trials_mci}")
    return "\n".join(lines) + "\n"


def write_curated_store(curated: CuratedDataset, out_dir: Path) -> None:
    """Persist accepted trials plus labels and the curation report."""
    from . import ingest

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "curation_report.csv").write_text(report_to_csv(curated.report), newline="\n")
    labels = {
        "excluded_participant": curated.excluded_participant,
        "participants": [
            {"participant_id": p.participant_id, "label": p.label.value, "overall_score": p.overall_score}
            for p in curated.participants
        ],
    }
    import json

    (out_dir / "labels.json").write_text(
        json.dumps(labels, indent=2, sort_keys=True) + "\n", newline="\n"
    )
    for manifest, trials in curated.sessions:
        kept = {t.trial_index for t in trials}
        sub_manifest = ingest.SessionManifest(
            participant_id=manifest.participant_id,
            session_id=manifest.session_id,
            label=manifest.label,
            sampling_hz=manifest.sampling_hz,
            trials=tuple(r for r in manifest.trials if r.index in kept),
        )
        ingest.write_session(out_dir / manifest.session_id, sub_manifest, trials)


def load_curated_store(
    store_dir: Path,
) -> tuple[list[tuple[SessionManifest, list[TrialRecord]]], list[ParticipantLabel], str]:
    """Reload a curated store; trials come back with qc_status=Accepted."""
    import json

    from . import ingest

    labels_doc = json.loads((store_dir / "labels.json").read_text())
    participants = [
        ParticipantLabel(p["participant_id"], Group(p["label"]), p["overall_score"])
        for p in labels_doc["participants"]
    ]
    sessions = []
    for manifest, trials in ingest.load_dataset(store_dir):
        accepted = [replace(t, qc_status=QcStatus.ACCEPTED) for t in trials]
        sessions.append((manifest, accepted))
    return sessions, participants, labels_doc["excluded_participant"]
