"""Patient/session/trial data model and CSV ingestion.

Metadata is one CSV row per trial:
    subject_id, class, age, body_mass_kg, sex, affected_side,
    session_id, foot_length_m, trial_id, recording_file
Recordings are one CSV per trial, one row per sample:
    plate, Fx_N, Fy_N, Fz_N, COPx_m, COPy_m
with x = anterior-posterior (walking direction), y = medio-lateral,
z = vertical, COP coordinates in the shared walkway frame. Plate 1 carries
the left foot, plate 2 the right foot.
"""

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import MalformedRow, MissingRecording, UnitViolation


class GaitClass(enum.Enum):
    N = "N"  # healthy control
    C = "C"  # calcaneus
    A = "A"  # ankle
    K = "K"  # knee
    H = "H"  # hip


GD_CLASSES = (GaitClass.C, GaitClass.A, GaitClass.K, GaitClass.H)

METADATA_COLUMNS = [
    "subject_id",
    "class",
    "age",
    "body_mass_kg",
    "sex",
    "affected_side",
    "session_id",
    "foot_length_m",
    "trial_id",
    "recording_file",
]

RECORDING_COLUMNS = ["plate", "Fx_N", "Fy_N", "Fz_N", "COPx_m", "COPy_m"]

DEFAULT_SAMPLE_RATE = 2000.0


@dataclass(frozen=True)
class Subject:
    id: str
    gait_class: GaitClass
    age: float
    body_mass: float
    sex: str
    affected_side: str = "unspecified"

    def __post_init__(self):
        if self.body_mass <= 0:
            raise UnitViolation(f"subject {self.id}: body_mass must be > 0 kg")
        if self.age <= 0:
            raise UnitViolation(f"subject {self.id}: age must be > 0")
        if self.sex not in ("male", "female"):
            raise UnitViolation(f"subject {self.id}: sex must be male or female")
        if self.affected_side not in ("left", "right", "unspecified"):
            raise UnitViolation(f"subject {self.id}: bad affected_side")


@dataclass
class Session:
    id: str
    subject_id: str
    foot_length: float
    trial_ids: list = field(default_factory=list)

    def __post_init__(self):
        if self.foot_length <= 0:
            raise UnitViolation(f"session {self.id}: foot_length must be > 0 m")


@dataclass
class Trial:
    """One bilateral recording. Plate arrays are (n, 5): Fx, Fy, Fz, COPx, COPy.

    Arrays may be deferred: when ``recording_path`` is set and the arrays are
    None they are read from disk on first access.
    """

    id: str
    session_id: str
    sample_rate: float = DEFAULT_SAMPLE_RATE
    plate1: np.ndarray = None
    plate2: np.ndarray = None
    recording_path: Path = None

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise UnitViolation(f"trial {self.id}: sample_rate must be > 0 Hz")
        if self.plate1 is not None and self.plate2 is not None:
            if len(self.plate1) != len(self.plate2):
                raise UnitViolation(
                    f"trial {self.id}: plates have unequal sample counts"
                )

    def plates(self):
        """(plate1, plate2) arrays, reading from disk when deferred."""
        if self.plate1 is None or self.plate2 is None:
            p1, p2 = read_recording(self.recording_path)
            return p1, p2
        return self.plate1, self.plate2

    def materialized(self):
        p1, p2 = self.plates()
        return Trial(
            id=self.id,
            session_id=self.session_id,
            sample_rate=self.sample_rate,
            plate1=p1,
            plate2=p2,
            recording_path=self.recording_path,
        )


class Dataset:
    """Immutable-after-load container with index maps between levels."""

    def __init__(self, subjects, sessions, trials):
        self.subjects = dict(subjects)
        self.sessions = dict(sessions)
        self.trials = dict(trials)
        self._check_referential_integrity()

    def _check_referential_integrity(self):
        for ses in self.sessions.values():
            if ses.subject_id not in self.subjects:
                raise MalformedRow("<memory>", 0, f"session {ses.id}: unknown subject")
        for tr in self.trials.values():
            if tr.session_id not in self.sessions:
                raise MalformedRow("<memory>", 0, f"trial {tr.id}: unknown session")
        for ses in self.sessions.values():
            for tid in ses.trial_ids:
                if tid not in self.trials:
                    raise MalformedRow(
                        "<memory>", 0, f"session {ses.id}: unknown trial {tid}"
                    )

    # --- index helpers ---
    def subject_of_session(self, session_id):
        return self.subjects[self.sessions[session_id].subject_id]

    def subject_of_trial(self, trial_id):
        return self.subject_of_session(self.trials[trial_id].session_id)

    def session_of_trial(self, trial_id):
        return self.sessions[self.trials[trial_id].session_id]

    def sessions_of_subject(self, subject_id):
        return [s for s in self.sessions.values() if s.subject_id == subject_id]

    def trial_ids_sorted(self):
        return sorted(self.trials)

    @property
    def n_subjects(self):
        return len(self.subjects)

    @property
    def n_sessions(self):
        return len(self.sessions)

    @property
    def n_trials(self):
        return len(self.trials)

    def subset(self, session_ids):
        """New Dataset restricted to the given sessions (and their subjects/trials)."""
        session_ids = set(session_ids)
        sessions = {sid: self.sessions[sid] for sid in session_ids}
        subjects = {
            s.subject_id: self.subjects[s.subject_id] for s in sessions.values()
        }
        trials = {
            tid: self.trials[tid]
            for s in sessions.values()
            for tid in s.trial_ids
        }
        return Dataset(subjects, sessions, trials)


def class_counts(ds, level="trial"):
    """Per-class counts at subject, session or trial level."""
    counts = {c: 0 for c in GaitClass}
    if level == "subject":
        for sub in ds.subjects.values():
            counts[sub.gait_class] += 1
    elif level == "session":
        for ses in ds.sessions.values():
            counts[ds.subjects[ses.subject_id].gait_class] += 1
    elif level == "trial":
        for tr in ds.trials.values():
            counts[ds.subject_of_trial(tr.id).gait_class] += 1
    else:
        raise ValueError(f"unknown level {level!r}")
    return counts


def read_recording(path):
    """Read a per-trial recording CSV into (plate1, plate2) float arrays."""
    path = Path(path)
    if not path.exists():
        raise MissingRecording(str(path))
    frame = pd.read_csv(path)
    missing = [c for c in RECORDING_COLUMNS if c not in frame.columns]
    if missing:
        raise MalformedRow(str(path), 1, f"missing columns {missing}")
    plates = []
    for plate_no in (1, 2):
        block = frame[frame["plate"] == plate_no]
        if block.empty:
            raise MalformedRow(str(path), 1, f"no samples for plate {plate_no}")
        plates.append(
            np.ascontiguousarray(block[RECORDING_COLUMNS[1:]].to_numpy(dtype=float))
        )
    if len(plates[0]) != len(plates[1]):
        raise MalformedRow(str(path), 1, "plates have unequal sample counts")
    return plates[0], plates[1]


def load_dataset(metadata_path, recordings_dir, sample_rate=DEFAULT_SAMPLE_RATE,
                 lazy=True):
    """Load and index a dataset from the metadata CSV.

    With ``lazy`` (default) recording files are existence-checked up front but
    parsed on demand, which keeps large corpora out of memory.
    """
    metadata_path = Path(metadata_path)
    recordings_dir = Path(recordings_dir)
    try:
        meta = pd.read_csv(metadata_path, dtype=str)
    except FileNotFoundError:
        raise MissingRecording(str(metadata_path)) from None
    except Exception as exc:
        raise MalformedRow(str(metadata_path), 0, str(exc)) from None
    missing_cols = [c for c in METADATA_COLUMNS if c not in meta.columns]
    if missing_cols:
        raise MalformedRow(str(metadata_path), 1, f"missing columns {missing_cols}")

    col = {name: k for k, name in enumerate(meta.columns)}
    subjects, sessions, trials = {}, {}, {}
    # "class" is a keyword, so named tuples would rename it; use plain tuples
    for i, row in enumerate(meta.itertuples(index=False, name=None)):
        line = i + 2  # header is line 1
        try:
            gait_class = GaitClass(row[col["class"]])
        except ValueError:
            raise MalformedRow(
                str(metadata_path), line, f"unknown class {row[col['class']]!r}"
            ) from None
        try:
            age = float(row[col["age"]])
            mass = float(row[col["body_mass_kg"]])
            foot_length = float(row[col["foot_length_m"]])
        except (TypeError, ValueError) as exc:
            raise MalformedRow(str(metadata_path), line, str(exc)) from None
        affected = row[col["affected_side"]]
        if not isinstance(affected, str) or not affected:
            affected = "unspecified"
        subject = Subject(
            id=row[col["subject_id"]],
            gait_class=gait_class,
            age=age,
            body_mass=mass,
            sex=row[col["sex"]],
            affected_side=affected,
        )
        prev = subjects.get(subject.id)
        if prev is None:
            subjects[subject.id] = subject
        elif prev != subject:
            raise MalformedRow(
                str(metadata_path), line,
                f"subject {subject.id} has inconsistent metadata across rows",
            )
        session_id = row[col["session_id"]]
        trial_id = row[col["trial_id"]]
        session = sessions.get(session_id)
        if session is None:
            session = Session(
                id=session_id, subject_id=subject.id, foot_length=foot_length
            )
            sessions[session_id] = session
        elif session.subject_id != subject.id or session.foot_length != foot_length:
            raise MalformedRow(
                str(metadata_path), line,
                f"session {session_id} has inconsistent metadata across rows",
            )
        if trial_id in trials:
            raise MalformedRow(
                str(metadata_path), line, f"duplicate trial_id {trial_id}"
            )
        rec_path = recordings_dir / row[col["recording_file"]]
        if not rec_path.exists():
            raise MissingRecording(str(rec_path))
        if lazy:
            trial = Trial(
                id=trial_id,
                session_id=session_id,
                sample_rate=sample_rate,
                recording_path=rec_path,
            )
        else:
            p1, p2 = read_recording(rec_path)
            trial = Trial(
                id=trial_id,
                session_id=session_id,
                sample_rate=sample_rate,
                plate1=p1,
                plate2=p2,
                recording_path=rec_path,
            )
        trials[trial_id] = trial
        session.trial_ids.append(trial_id)

    return Dataset(subjects, sessions, trials)
