"""BIDS-lite dataset model.

Layout on disk:
    <root>/participants.tsv
    <root>/sub-<ID>/sub-<ID>_sessions.tsv
    <root>/sub-<ID>/ses-<label>/anat/sub-<ID>_ses-<label>_T1w.nii[.gz]
    <root>/sub-<ID>/ses-<label>/pet/sub-<ID>_ses-<label>_pet.nii[.gz]

Tables are tab-separated UTF-8 with `n/a` for missing values. A DatasetIndex
is immutable after loading and safe to share across workers.
"""

from __future__ import annotations

import csv
import re
import shutil
from dataclasses import dataclass, field
from pathlib import Path

from . import nifti
from .errors import (
    DuplicateScan,
    EmptyGroup,
    MalformedTsv,
    MissingBaseline,
    MissingImage,
    MissingMetadata,
    MissingParticipantsFile,
    NotMciAtBaseline,
    OverlappingGroups,
    UnknownTracer,
)

NA = "n/a"
PROGRESSION_WINDOW_MONTHS = 36
AMYLOID_CUTOFFS = {"PiB": 1.47, "AV45": 1.10}

PARTICIPANT_COLUMNS = ["participant_id", "sex", "age_baseline",
                       "diagnosis_baseline", "amyloid_tracer", "amyloid_suvr"]
SESSION_COLUMNS = ["session_id", "months_from_baseline", "diagnosis",
                   "mmse", "cdr_global"]
GENERIC_COLUMNS = PARTICIPANT_COLUMNS + SESSION_COLUMNS + [
    "image_file_t1w", "image_file_pet"]

_ID_RE = re.compile(r"^sub-[A-Za-z0-9]+$")
_SES_RE = re.compile(r"^ses-M\d+$")
_DIAGNOSES = {"CN", "MCI", "AD"}
# EMCI/LMCI collapse to MCI at ingestion
_DIAGNOSIS_ALIASES = {"EMCI": "MCI", "LMCI": "MCI"}
_CDR_VALUES = {"0", "0.5", "1", "2", "3"}
MODALITIES = ("T1w", "FDG-PET")


@dataclass(frozen=True)
class ParticipantRecord:
    participant_id: str
    sex: str                      # "M", "F" or "unknown"
    age_at_baseline: float
    baseline_diagnosis: str       # CN / MCI / AD
    amyloid_tracer: str | None = None
    amyloid_suvr: float | None = None


@dataclass(frozen=True)
class SessionRecord:
    participant_id: str
    session_label: str            # ses-M<nn>
    months_from_baseline: int
    diagnosis: str
    mmse: int | None = None
    cdr_global: float | None = None
    image_paths: dict = field(default_factory=dict)   # modality -> Path


@dataclass(frozen=True)
class DatasetIndex:
    root_path: Path
    participants: tuple           # ParticipantRecord, ordered by id
    sessions: dict                # participant_id -> tuple of SessionRecord

    def participant(self, participant_id):
        for p in self.participants:
            if p.participant_id == participant_id:
                return p
        raise KeyError(participant_id)

    def baseline_session(self, participant_id) -> SessionRecord:
        return self.sessions[participant_id][0]


@dataclass(frozen=True)
class GroupSpec:
    derived_label: str            # CN / AD / MCI / sMCI / pMCI
    amyloid: str = "any"          # positive / negative / any


@dataclass(frozen=True)
class TaskSpec:
    name: str
    group_a: GroupSpec
    group_b: GroupSpec

    def __post_init__(self):
        if self.group_a == self.group_b:
            raise ValueError("task groups must differ")


@dataclass(frozen=True)
class CohortTable:
    entries: tuple                # (participant_id, label) with label in {-1, +1}

    @property
    def participant_ids(self):
        return [e[0] for e in self.entries]

    @property
    def labels(self):
        return [e[1] for e in self.entries]

    def count(self, label):
        return sum(1 for _, l in self.entries if l == label)


# --- tsv helpers -------------------------------------------------------------


def _read_tsv(path, expected_columns):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh, delimiter="\t"))
    except OSError as e:
        raise MalformedTsv(f"cannot read {path}: {e}") from e
    if not rows:
        raise MalformedTsv(f"{path}: empty file")
    if rows[0] != expected_columns:
        raise MalformedTsv(
            f"{path}: expected columns {expected_columns}, got {rows[0]}")
    for r in rows[1:]:
        if len(r) != len(expected_columns):
            raise MalformedTsv(f"{path}: row with {len(r)} fields: {r}")
    return [dict(zip(expected_columns, r)) for r in rows[1:]]


def _opt(value):
    return None if value == NA else value


def _parse_participant_row(row, path):
    pid = row["participant_id"]
    if not _ID_RE.match(pid):
        raise MalformedTsv(f"{path}: bad participant_id {pid!r}")
    sex = row["sex"]
    if sex == NA:
        sex = "unknown"
    if sex not in ("M", "F", "unknown"):
        raise MalformedTsv(f"{path}: bad sex {sex!r} for {pid}")
    try:
        age = float(row["age_baseline"])
    except ValueError as e:
        raise MalformedTsv(f"{path}: bad age for {pid}") from e
    if age < 0:
        raise MalformedTsv(f"{path}: negative age for {pid}")
    dx = row["diagnosis_baseline"]
    dx = _DIAGNOSIS_ALIASES.get(dx, dx)
    if dx not in _DIAGNOSES:
        raise MalformedTsv(f"{path}: bad diagnosis {row['diagnosis_baseline']!r} for {pid}")
    tracer = _opt(row["amyloid_tracer"])
    suvr = _opt(row["amyloid_suvr"])
    if (tracer is None) != (suvr is None):
        raise MalformedTsv(f"{path}: amyloid tracer/suvr must be both present or both n/a ({pid})")
    if tracer is not None:
        if tracer not in AMYLOID_CUTOFFS:
            raise MalformedTsv(f"{path}: unknown tracer {tracer!r} for {pid}")
        suvr = float(suvr)
        if suvr <= 0:
            raise MalformedTsv(f"{path}: non-positive SUVR for {pid}")
    return ParticipantRecord(pid, sex, age, dx, tracer, suvr)


def _parse_session_row(row, pid, path):
    ses = row["session_id"]
    if not _SES_RE.match(ses):
        raise MalformedTsv(f"{path}: bad session_id {ses!r}")
    try:
        months = int(row["months_from_baseline"])
    except ValueError as e:
        raise MalformedTsv(f"{path}: bad months for {pid}/{ses}") from e
    if months < 0:
        raise MalformedTsv(f"{path}: negative months for {pid}/{ses}")
    dx = row["diagnosis"]
    dx = _DIAGNOSIS_ALIASES.get(dx, dx)
    if dx not in _DIAGNOSES:
        raise MalformedTsv(f"{path}: bad diagnosis {row['diagnosis']!r} for {pid}/{ses}")
    mmse = _opt(row["mmse"])
    if mmse is not None:
        mmse = int(mmse)
        if not 0 <= mmse <= 30:
            raise MalformedTsv(f"{path}: MMSE out of range for {pid}/{ses}")
    cdr = _opt(row["cdr_global"])
    if cdr is not None:
        if cdr not in _CDR_VALUES:
            raise MalformedTsv(f"{path}: bad CDR {cdr!r} for {pid}/{ses}")
        cdr = float(cdr)
    return SessionRecord(pid, ses, months, dx, mmse, cdr, {})


def _discover_images(root, pid, ses):
    paths = {}
    anat_dir = root / pid / ses / "anat"
    pet_dir = root / pid / ses / "pet"
    for ext in (".nii.gz", ".nii"):
        p = anat_dir / f"{pid}_{ses}_T1w{ext}"
        if p.exists():
            paths.setdefault("T1w", p)
        p = pet_dir / f"{pid}_{ses}_pet{ext}"
        if p.exists():
            paths.setdefault("FDG-PET", p)
    return paths


# --- operations --------------------------------------------------------------


def load_dataset(root_path) -> DatasetIndex:
    """Load and fully validate a BIDS-lite tree."""
    root = Path(root_path)
    ptsv = root / "participants.tsv"
    if not ptsv.exists():
        raise MissingParticipantsFile(str(ptsv))
    rows = _read_tsv(ptsv, PARTICIPANT_COLUMNS)
    participants = sorted((_parse_participant_row(r, ptsv) for r in rows),
                          key=lambda p: p.participant_id)
    ids = [p.participant_id for p in participants]
    if len(set(ids)) != len(ids):
        raise MalformedTsv(f"{ptsv}: duplicate participant ids")

    folders = sorted(d.name for d in root.iterdir()
                     if d.is_dir() and d.name.startswith("sub-"))
    extra = set(folders) - set(ids)
    missing = set(ids) - set(folders)
    if extra:
        raise MissingMetadata(f"folders without participants.tsv rows: {sorted(extra)}")
    if missing:
        raise MissingMetadata(f"participants without folders: {sorted(missing)}")

    sessions = {}
    for p in participants:
        pid = p.participant_id
        stsv = root / pid / f"{pid}_sessions.tsv"
        if not stsv.exists():
            raise MissingMetadata(f"missing sessions table {stsv}")
        srows = [_parse_session_row(r, pid, stsv)
                 for r in _read_tsv(stsv, SESSION_COLUMNS)]
        months = [s.months_from_baseline for s in srows]
        if sorted(months) != months or len(set(months)) != len(months):
            raise MalformedTsv(f"{stsv}: months_from_baseline must be strictly increasing")
        if not srows or srows[0].months_from_baseline != 0:
            raise MissingBaseline(f"{pid} has no baseline (months 0) session")
        recs = []
        for s in srows:
            images = _discover_images(root, pid, s.session_label)
            for path in images.values():
                nifti.read_header(path)   # existence + parse check
            recs.append(SessionRecord(pid, s.session_label, s.months_from_baseline,
                                      s.diagnosis, s.mmse, s.cdr_global, images))
        sessions[pid] = tuple(recs)
    return DatasetIndex(root, tuple(participants), sessions)


def derive_progression_label(sessions, window_months=PROGRESSION_WINDOW_MONTHS) -> str:
    """Classify an MCI participant's trajectory as pMCI, sMCI, or unlabeled.

    pMCI: an AD diagnosis occurs at any visit within the window and follow-up
    reaches the window. sMCI: follow-up reaches the window with no AD inside
    it. Anything shorter is unlabeled (not followed long enough).
    """
    sessions = sorted(sessions, key=lambda s: s.months_from_baseline)
    if not sessions or sessions[0].months_from_baseline != 0:
        raise MissingBaseline("session list lacks a months-0 baseline")
    if sessions[0].diagnosis != "MCI":
        raise NotMciAtBaseline(
            f"baseline diagnosis is {sessions[0].diagnosis}, expected MCI")
    followed = sessions[-1].months_from_baseline >= window_months
    progressed = any(s.diagnosis == "AD" and s.months_from_baseline <= window_months
                     for s in sessions)
    if followed and progressed:
        return "pMCI"
    if followed:
        return "sMCI"
    return "unlabeled"


def amyloid_status(tracer, suvr) -> str:
    """Positive iff the SUVR strictly exceeds the tracer-specific cutoff."""
    if tracer not in AMYLOID_CUTOFFS:
        raise UnknownTracer(f"unknown amyloid tracer {tracer!r}")
    if suvr <= 0:
        raise ValueError(f"SUVR must be positive, got {suvr}")
    return "positive" if suvr > AMYLOID_CUTOFFS[tracer] else "negative"


def _derived_labels(index, participant, window_months):
    dx = participant.baseline_diagnosis
    labels = {dx}
    if dx == "MCI":
        prog = derive_progression_label(index.sessions[participant.participant_id],
                                        window_months)
        if prog != "unlabeled":
            labels.add(prog)
    return labels


def _matches_group(index, participant, group: GroupSpec, window_months):
    if group.derived_label not in _derived_labels(index, participant, window_months):
        return False
    if group.amyloid == "any":
        return True
    if participant.amyloid_tracer is None:
        return False
    return amyloid_status(participant.amyloid_tracer,
                          participant.amyloid_suvr) == group.amyloid


def select_cohort(index: DatasetIndex, task: TaskSpec,
                  required_modalities=("T1w",),
                  window_months=PROGRESSION_WINDOW_MONTHS) -> CohortTable:
    """Pick the task cohort: group_a -> label -1, group_b -> +1."""
    entries = []
    for p in index.participants:
        baseline = index.baseline_session(p.participant_id)
        if any(m not in baseline.image_paths for m in required_modalities):
            continue
        in_a = _matches_group(index, p, task.group_a, window_months)
        in_b = _matches_group(index, p, task.group_b, window_months)
        if in_a and in_b:
            raise OverlappingGroups(
                f"{p.participant_id} matches both groups of task {task.name!r}")
        if in_a:
            entries.append((p.participant_id, -1))
        elif in_b:
            entries.append((p.participant_id, +1))
    table = CohortTable(tuple(entries))
    if table.count(-1) == 0 or table.count(+1) == 0:
        raise EmptyGroup(
            f"task {task.name!r}: class sizes {table.count(-1)} vs {table.count(+1)}")
    return table


# --- generic tabular converter ------------------------------------------------


def _format_row(values):
    return "\t".join(values) + "\n"


def convert_generic_tabular(tabular_path, image_dir, out_root) -> Path:
    """Write a BIDS-lite tree from a flat one-row-per-(subject, session) table.

    Deterministic and idempotent: the same inputs produce a byte-identical
    tree. Images are copied unchanged.
    """
    image_dir = Path(image_dir)
    out_root = Path(out_root)
    rows = _read_tsv(tabular_path, GENERIC_COLUMNS)

    by_subject = {}
    seen_sessions = set()
    for row in rows:
        pid = row["participant_id"]
        key = (pid, row["session_id"])
        if key in seen_sessions:
            raise DuplicateScan(f"duplicate row for {pid}/{row['session_id']}")
        seen_sessions.add(key)
        by_subject.setdefault(pid, []).append(row)

    for pid, srows in by_subject.items():
        head = {c: srows[0][c] for c in PARTICIPANT_COLUMNS}
        for r in srows[1:]:
            if any(r[c] != head[c] for c in PARTICIPANT_COLUMNS):
                raise MalformedTsv(f"inconsistent participant fields for {pid}")
        for r in srows:
            for col, modality in (("image_file_t1w", "T1w"), ("image_file_pet", "pet")):
                rel = r[col]
                if rel != NA and not (image_dir / rel).exists():
                    raise MissingImage(f"{pid}/{r['session_id']}: {rel} not found")

    out_root.mkdir(parents=True, exist_ok=True)
    ids = sorted(by_subject)
    lines = [_format_row(PARTICIPANT_COLUMNS)]
    for pid in ids:
        lines.append(_format_row([by_subject[pid][0][c] for c in PARTICIPANT_COLUMNS]))
    (out_root / "participants.tsv").write_text("".join(lines), encoding="utf-8")

    for pid in ids:
        srows = sorted(by_subject[pid], key=lambda r: int(r["months_from_baseline"]))
        subdir = out_root / pid
        subdir.mkdir(exist_ok=True)
        slines = [_format_row(SESSION_COLUMNS)]
        for r in srows:
            slines.append(_format_row([r[c] for c in SESSION_COLUMNS]))
        (subdir / f"{pid}_sessions.tsv").write_text("".join(slines), encoding="utf-8")
        for r in srows:
            ses = r["session_id"]
            for col, folder, suffix in (("image_file_t1w", "anat", "T1w"),
                                        ("image_file_pet", "pet", "pet")):
                rel = r[col]
                if rel == NA:
                    continue
                src = image_dir / rel
                ext = ".nii.gz" if rel.endswith(".nii.gz") else ".nii"
                dst_dir = subdir / ses / folder
                dst_dir.mkdir(parents=True, exist_ok=True)
                dst = dst_dir / f"{pid}_{ses}_{suffix}{ext}"
                shutil.copyfile(src, dst)

    load_dataset(out_root)   # converted trees must validate
    return out_root
