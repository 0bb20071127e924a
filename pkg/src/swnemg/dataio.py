"""Reading and writing feature matrices, models and trial datasets.

Dataset layout::

    <root>/subject_<id>/session_<k>/trial_<j>/emg.csv        t, ch01..ch12 (volts)
                                             /positions.csv  t, hand_x .. shoulder_y (metres)
                                             /meta.json

Feature matrices go to CSV (header = layout) or to a little-endian float64
row-major ``.bin`` file with a ``.json`` sidecar holding the layout.
"""
from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .classifier import LogisticModel
from .errors import DataError
from .filters import MultiChannelSignal
from .kinematics import POSITION_COLUMNS, ArmGeometry
from .pipeline import FeatureMatrix
from .synth import EMG_RATE_HZ, POSITION_RATE_HZ, TrialRecord

_SUBJECT_DIR = re.compile(r"subject_(\d+)$")
_SESSION_DIR = re.compile(r"session_(\d+)$")
_TRIAL_DIR = re.compile(r"trial_(\d+)$")


# -- feature matrices ---------------------------------------------------------

def write_feature_csv(path, fm: FeatureMatrix) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, fm.values, delimiter=",", header=",".join(fm.layout), comments="",
               fmt="%.17g")
    return path


def read_feature_csv(path, sample_rate_hz: float = 20.0) -> FeatureMatrix:
    path = Path(path)
    try:
        with path.open() as fh:
            layout = fh.readline().strip().split(",")
        values = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read feature CSV {path}: {exc}") from exc
    if values.size == 0:
        values = np.zeros((0, len(layout)))
    return FeatureMatrix(values, layout, sample_rate_hz)


def write_feature_binary(path, fm: FeatureMatrix) -> tuple[Path, Path]:
    """Write ``path`` (raw ``<f8``, row-major) and ``path.with_suffix('.json')``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(fm.values, dtype="<f8").tofile(path)
    sidecar = path.with_suffix(".json")
    meta = {
        "dtype": "<f8", "order": "row-major", "rows": len(fm), "columns": fm.dimension,
        "layout": fm.layout, "sample_rate_hz": fm.sample_rate_hz,
        "source_rate_hz": fm.source_rate_hz, "source_index": fm.source_index.tolist(),
    }
    sidecar.write_text(json.dumps(meta, indent=1))
    return path, sidecar


def read_feature_binary(path) -> FeatureMatrix:
    path = Path(path)
    try:
        meta = json.loads(path.with_suffix(".json").read_text())
        raw = np.fromfile(path, dtype="<f8")
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read feature table {path}: {exc}") from exc
    if raw.size != meta["rows"] * meta["columns"]:
        raise DataError(f"{path}: expected {meta['rows']}x{meta['columns']} values, found {raw.size}")
    return FeatureMatrix(raw.reshape(meta["rows"], meta["columns"]), meta["layout"],
                         meta["sample_rate_hz"], np.asarray(meta["source_index"], dtype=int),
                         meta["source_rate_hz"])


# -- models -------------------------------------------------------------------

def save_model(path, model: LogisticModel) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model.to_dict(), indent=1))
    return path


def load_model(path) -> LogisticModel:
    try:
        return LogisticModel.from_dict(json.loads(Path(path).read_text()))
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot load model {path}: {exc}") from exc


# -- trial datasets -----------------------------------------------------------

def trial_dir(root, subject_id: int, session_id: int, trial_id: int) -> Path:
    return Path(root) / f"subject_{subject_id}" / f"session_{session_id}" / f"trial_{trial_id}"


def write_trial(root, trial: TrialRecord) -> Path:
    d = trial_dir(root, trial.subject_id, trial.session_id, trial.trial_id)
    d.mkdir(parents=True, exist_ok=True)
    emg = trial.emg.data
    t = np.arange(len(emg)) / trial.emg.sample_rate_hz
    header = "t," + ",".join(f"ch{c + 1:02d}" for c in range(emg.shape[1]))
    np.savetxt(d / "emg.csv", np.column_stack([t, emg]), delimiter=",", header=header,
               comments="", fmt="%.10g")
    tp = np.arange(len(trial.positions)) / trial.position_rate_hz
    np.savetxt(d / "positions.csv", np.column_stack([tp, trial.positions]), delimiter=",",
               header="t," + ",".join(POSITION_COLUMNS), comments="", fmt="%.12g")
    meta = {
        "subject_id": trial.subject_id, "session_id": trial.session_id,
        "trial_id": trial.trial_id, "movement_id": trial.movement_id,
        "start_deg": trial.start_deg, "end_deg": trial.end_deg,
        "emg_rate_hz": trial.emg.sample_rate_hz, "position_rate_hz": trial.position_rate_hz,
        "upper_arm_m": trial.geometry.upper_arm_m, "forearm_m": trial.geometry.forearm_m,
    }
    (d / "meta.json").write_text(json.dumps(meta, indent=1))
    return d


def _read_table(path: Path, first_columns: tuple[str, ...]):
    try:
        with path.open() as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if tuple(header[:len(first_columns)]) != first_columns or data.shape[1] != len(header):
        raise DataError(f"{path}: unexpected columns {header}")
    return header, data


def read_trial(directory) -> TrialRecord:
    d = Path(directory)
    try:
        meta = json.loads((d / "meta.json").read_text())
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read {d / 'meta.json'}: {exc}") from exc
    _, emg = _read_table(d / "emg.csv", ("t", "ch01"))
    _, pos = _read_table(d / "positions.csv", ("t",) + POSITION_COLUMNS)
    return TrialRecord(
        emg=MultiChannelSignal(emg[:, 1:], meta.get("emg_rate_hz", EMG_RATE_HZ)),
        positions=pos[:, 1:], movement_id=meta["movement_id"], session_id=meta["session_id"],
        trial_id=meta["trial_id"], subject_id=meta["subject_id"],
        start_deg=meta.get("start_deg", float("nan")), end_deg=meta.get("end_deg", float("nan")),
        geometry=ArmGeometry(meta["upper_arm_m"], meta["forearm_m"]),
        position_rate_hz=meta.get("position_rate_hz", POSITION_RATE_HZ))


def _numbered(parent: Path, pattern) -> list[tuple[int, Path]]:
    found = []
    for p in parent.iterdir():
        m = pattern.match(p.name)
        if m and p.is_dir():
            found.append((int(m.group(1)), p))
    return sorted(found)


class DiskSubject:
    """Trials of one subject directory, read on access in session/trial order."""

    def __init__(self, directory):
        self.directory = Path(directory)
        m = _SUBJECT_DIR.match(self.directory.name)
        if not m or not self.directory.is_dir():
            raise DataError(f"{self.directory} is not a subject_<id> directory")
        self.subject_id = int(m.group(1))
        self._trials = [t for _, s in _numbered(self.directory, _SESSION_DIR)
                        for _, t in _numbered(s, _TRIAL_DIR)]
        if not self._trials:
            raise DataError(f"no trials under {self.directory}")
        self._geometry = None

    @property
    def geometry(self) -> ArmGeometry:
        if self._geometry is None:
            self._geometry = self.trial(0).geometry
        return self._geometry

    def __len__(self) -> int:
        return len(self._trials)

    def trial(self, index: int) -> TrialRecord:
        return read_trial(self._trials[index])

    def __iter__(self):
        return (self.trial(i) for i in range(len(self)))


def write_dataset(root, subjects, manifest: dict | None = None) -> Path:
    """Write every trial of every subject; ``manifest`` goes to ``cohort.json``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for subject in subjects:
        for trial in subject:
            write_trial(root, trial)
    if manifest is not None:
        (root / "cohort.json").write_text(json.dumps(manifest, indent=1))
    return root


def load_dataset(root) -> list[DiskSubject]:
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"data root {root} does not exist")
    subjects = [DiskSubject(p) for _, p in _numbered(root, _SUBJECT_DIR)]
    if not subjects:
        raise DataError(f"no subject_<id> directories under {root}")
    return subjects
