import numpy as np
import pytest

from adml.nifti import write_nifti
from adml.volume import BinaryMask, Volume3D


def make_volume(data, voxel=(1.0, 1.0, 1.0)):
    affine = np.diag(list(voxel) + [1.0])
    return Volume3D(np.asarray(data, dtype=np.float64), voxel, affine)


def make_mask(included, voxel=(1.0, 1.0, 1.0)):
    affine = np.diag(list(voxel) + [1.0])
    return BinaryMask(np.asarray(included, dtype=bool), voxel, affine)


PARTICIPANT_HEADER = ("participant_id\tsex\tage_baseline\tdiagnosis_baseline"
                      "\tamyloid_tracer\tamyloid_suvr\n")
SESSION_HEADER = "session_id\tmonths_from_baseline\tdiagnosis\tmmse\tcdr_global\n"


def write_bids_tree(root, subjects, dims=(3, 3, 3), seed=0):
    """Build a minimal valid BIDS-lite tree.

    subjects: list of dicts with keys id, dx and optional sex, age, tracer,
    suvr, sessions (list of dicts with ses, months, dx and optional mmse,
    cdr, t1w, pet booleans; t1w defaults to True for the baseline).
    """
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    lines = [PARTICIPANT_HEADER]
    for s in subjects:
        pid = s["id"]
        lines.append("\t".join([
            pid, s.get("sex", "M"), s.get("age", "70.0"), s["dx"],
            s.get("tracer", "n/a"), s.get("suvr", "n/a")]) + "\n")
        sessions = s.get("sessions",
                         [{"ses": "ses-M00", "months": 0, "dx": s["dx"]}])
        subdir = root / pid
        subdir.mkdir(exist_ok=True)
        slines = [SESSION_HEADER]
        for sess in sessions:
            slines.append("\t".join([
                sess["ses"], str(sess["months"]), sess["dx"],
                sess.get("mmse", "n/a"), sess.get("cdr", "n/a")]) + "\n")
            if sess.get("t1w", sess["months"] == 0):
                anat = subdir / sess["ses"] / "anat"
                anat.mkdir(parents=True, exist_ok=True)
                write_nifti(make_volume(rng.standard_normal(dims)),
                            anat / f"{pid}_{sess['ses']}_T1w.nii.gz")
            if sess.get("pet", False):
                pet = subdir / sess["ses"] / "pet"
                pet.mkdir(parents=True, exist_ok=True)
                write_nifti(make_volume(np.abs(rng.standard_normal(dims)) + 1.0),
                            pet / f"{pid}_{sess['ses']}_pet.nii.gz")
        (subdir / f"{pid}_sessions.tsv").write_text("".join(slines),
                                                    encoding="utf-8")
    (root / "participants.tsv").write_text("".join(lines), encoding="utf-8")
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance-criteria verdict reporting ------------------------------------

ACCEPTANCE_VERDICTS = []


def record_verdict(criterion, passed, detail):
    """Log one pass/fail line per acceptance criterion, then enforce it."""
    ACCEPTANCE_VERDICTS.append((criterion, passed, detail))
    assert passed, f"acceptance criterion {criterion}: {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE_VERDICTS):
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {verdict} - {detail}")
