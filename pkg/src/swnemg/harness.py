"""Experiment protocols on a cohort of subjects.

A subject is anything with ``subject_id``, ``__len__`` and ``trial(i)``:
a :class:`~swnemg.synth.SubjectDataset` generated in memory or a
:class:`~swnemg.dataio.DiskSubject` read from a data root.

Every configuration starts emitting feature rows at the same 500 Hz sample
(``warmup_ms``, 500 ms by default), so all cells of a window-length grid are
scored on the same rows and labels. Trials are split per subject: within
each block of 10 consecutive trials, 5 seeded-random trials train and 5
test. OTHER models pool the training halves of other subjects and are
scored on the test half of the evaluated subject.
"""
from __future__ import annotations

import dataclasses
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .classifier import MAX_ITER, accuracy, fit, predict
from .errors import ConfigurationError, DataError
from .features import FEATURES
from .kinematics import CLASS_ORDER, align_targets, targets_from_positions
from .normalization import WINDOW_LENGTHS_MS
from .pipeline import (NORMALIZATIONS, PROCESS_RATE_HZ, FeatureConfig,
                       check_feature_config, features_from_windows,
                       normalized_windows, preprocess_emg, row_indices)
from .report import RunReport, config_digest, summarize
from .stats import compare_groups
from .synth import generate_cohort
from .windows import ALL_DIVIDING, DividingScheme, WeightingKind

log = logging.getLogger(__name__)

MODEL_TYPES = ("OWN", "OTHER")
SPLIT_BLOCK = 10
SHUFFLE_SCHEMES = ("relabel", "permute")
N_CLASSES = len(CLASS_ORDER)
#: Pairs tested in the normalisation comparison, per feature.
COMPARISON_PAIRS = (
    ("SWN_OWN", "None_OWN"),
    ("SWN_OTHER", "None_OTHER"),
    ("SWN_OTHER", "None_OWN"),
    ("SWN_OWN", "SWN_OTHER"),
    ("None_OWN", "None_OTHER"),
)
_ROW_ID_TRIAL = 1_000
_ROW_ID_SUBJECT = 10_000_000


@dataclass
class ExperimentConfig:
    """Everything one harness command needs besides the data itself.

    With ``data_root`` unset, a synthetic cohort of ``n_subjects`` is
    generated in memory from ``seed``.
    """

    normalization: str = "SWN"
    norm_ms: int = 500
    feature_ms: int = 500
    feature: str = "MAV"
    weighting: str = "Flat"
    dividing: str | None = None
    model_type: str = "OWN"
    n_train_subjects: int | None = None
    seed: int = 0
    data_root: str | None = None
    n_subjects: int = 10
    sessions: int = 10
    gain_spread: tuple = (0.2, 5.0)
    warmup_ms: int = 500
    max_iter: int = MAX_ITER
    shuffle_labels: bool = False
    shuffle_scheme: str = "relabel"

    def __post_init__(self):
        if self.normalization not in NORMALIZATIONS:
            raise ConfigurationError(f"normalization must be one of {NORMALIZATIONS}")
        if self.model_type not in MODEL_TYPES:
            raise ConfigurationError(f"model_type must be one of {MODEL_TYPES}")
        if self.feature not in FEATURES:
            raise ConfigurationError(f"feature must be one of {FEATURES}")
        for name in ("norm_ms", "feature_ms"):
            if getattr(self, name) not in WINDOW_LENGTHS_MS:
                raise ConfigurationError(f"{name} must be one of {WINDOW_LENGTHS_MS}")
        if self.warmup_ms < max(self.norm_ms, self.feature_ms):
            raise ConfigurationError("warmup_ms must cover both windows")
        if self.n_train_subjects is not None and not 1 <= self.n_train_subjects <= 9:
            raise ConfigurationError("n_train_subjects must be in 1..9")
        if self.shuffle_scheme not in SHUFFLE_SCHEMES:
            raise ConfigurationError(f"shuffle_scheme must be one of {SHUFFLE_SCHEMES}")
        if self.n_subjects < 1 or self.sessions < 1:
            raise ConfigurationError("n_subjects and sessions must be positive")
        lo, hi = self.gain_spread
        if not 0 < lo < hi:
            raise ConfigurationError("gain_spread must be a non-empty positive range")
        self.gain_spread = (float(lo), float(hi))
        try:
            WeightingKind.parse(self.weighting)
            if self.dividing is not None:
                DividingScheme.parse(self.dividing)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        try:
            check_feature_config(self.feature_config())
        except ConfigurationError:
            raise
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None

    def feature_config(self, **changes) -> FeatureConfig:
        return FeatureConfig(
            changes.get("feature", self.feature), changes.get("normalization", self.normalization),
            changes.get("norm_ms", self.norm_ms), changes.get("feature_ms", self.feature_ms),
            changes.get("weighting", self.weighting), changes.get("dividing", self.dividing))

    @property
    def warmup(self) -> int:
        return int(round(self.warmup_ms * PROCESS_RATE_HZ / 1000.0))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["gain_spread"] = list(self.gain_spread)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data.get("experiment", data))
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        if "gain_spread" in data:
            data["gain_spread"] = tuple(data["gain_spread"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        return cls.from_dict(read_toml(path))

    def digest(self) -> str:
        return config_digest(self.to_dict())


def read_toml(path) -> dict:
    """Config table from a TOML file; keys may sit under ``[experiment]``."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"invalid TOML in {path}: {exc}") from None
    return dict(data.get("experiment", data))


def provenance(config: ExperimentConfig, **extra) -> dict:
    return {"config": config.to_dict(), "config_hash": config.digest(), "seed": config.seed,
            "code_version": __version__, **extra}


def load_subjects(config: ExperimentConfig) -> list:
    """The cohort a config refers to: disk data if ``data_root`` is set."""
    if config.data_root:
        from .dataio import load_dataset
        return load_dataset(config.data_root)
    return generate_cohort(config.n_subjects, config.gain_spread, master_seed=config.seed,
                           sessions=config.sessions)


# -- splitting ----------------------------------------------------------------

def split_trials(n_trials: int, seed, block: int = SPLIT_BLOCK) -> np.ndarray:
    """Boolean train mask: half of every ``block`` consecutive trials, seeded.

    ``seed`` may be an int or a sequence accepted by ``numpy.random.SeedSequence``.
    """
    if n_trials <= 0 or n_trials % block:
        raise ValueError(f"trial count {n_trials} is not a positive multiple of {block}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    mask = np.zeros(n_trials, dtype=bool)
    for start in range(0, n_trials, block):
        mask[start + rng.permutation(block)[:block // 2]] = True
    return mask


def row_ids(subject_id: int, trial_index: int, n_rows: int) -> np.ndarray:
    """Globally unique integer id per feature row, used by the leakage audit."""
    return (subject_id * _ROW_ID_SUBJECT + trial_index * _ROW_ID_TRIAL
            + np.arange(n_rows, dtype=np.int64))


def audit_leakage(train_ids, test_ids) -> None:
    overlap = np.intersect1d(np.asarray(train_ids), np.asarray(test_ids))
    if overlap.size:
        raise RuntimeError(f"{overlap.size} rows appear in both training and test data")


# -- feature extraction -------------------------------------------------------

@dataclass
class SubjectFeatures:
    """Per-trial feature rows of one subject for one feature configuration."""

    subject_id: int
    values: list
    labels: list
    ids: list
    train_mask: np.ndarray
    sigma: list = field(default_factory=list)

    def side(self, train: bool):
        idx = [i for i in range(len(self.values)) if self.train_mask[i] == train]
        return (np.vstack([self.values[i] for i in idx]),
                np.concatenate([self.labels[i] for i in idx]),
                np.concatenate([self.ids[i] for i in idx]))


def extract_subjects(subjects, configs, warmup: int, seed, keep_sigma: bool = False,
                     trial_stride: int = 1) -> dict:
    """Features of every subject for several configurations in one pass.

    Each trial is preprocessed and labelled once and then run through all
    ``configs``. Returns ``{config: [SubjectFeatures, ...]}`` in subject order.
    """
    configs = list(dict.fromkeys(configs))
    for c in configs:
        check_feature_config(c)
        if warmup < c.default_warmup():
            raise ConfigurationError(f"warm-up {warmup} too short for {c.label}")
    out = {c: [] for c in configs}
    for subject in subjects:
        n = len(subject)
        if n == 0 or n % SPLIT_BLOCK:
            raise DataError(f"subject {subject.subject_id} has {n} trials; "
                            f"need a positive multiple of {SPLIT_BLOCK}")
        mask = split_trials(n, [int(seed), int(subject.subject_id)])
        chosen = range(0, n, trial_stride)
        per = {c: SubjectFeatures(subject.subject_id, [], [], [], mask[list(chosen)])
               for c in configs}
        for i in chosen:
            trial = subject.trial(i)
            x = preprocess_emg(trial.emg).data
            _, _, labels = targets_from_positions(trial.positions, trial.geometry,
                                                  trial.position_rate_hz)
            rows = row_indices(len(x), warmup)
            y = align_targets(labels, rows)
            ids = row_ids(subject.subject_id, i, len(rows))
            for c in configs:
                windows, sigma = normalized_windows(x, rows, c)
                sf = per[c]
                sf.values.append(features_from_windows(windows, c))
                sf.labels.append(y)
                sf.ids.append(ids)
                if keep_sigma:
                    sf.sigma.append(sigma)
        for c in configs:
            out[c].append(per[c])
        log.info("extracted subject %s (%d trials, %d configs)",
                 subject.subject_id, len(chosen), len(configs))
    return out


def shuffle_labels(y: np.ndarray, ids: np.ndarray, seed, tag, scheme: str = "relabel") -> np.ndarray:
    """Training labels with their link to the EMG destroyed.

    ``"permute"`` permutes rows. Class sizes are kept, so with the rest-heavy
    protocol an uninformed balanced-weight model predicts rest less often
    than 1/3 and scores below chance on imbalanced test data.
    ``"relabel"`` maps the three class names through an independent random
    bijection per trial, which makes every class equally likely for every
    row while keeping the temporal segment structure.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7919, *tag]))
    if scheme == "permute":
        return rng.permutation(y)
    trials = np.asarray(ids) // _ROW_ID_TRIAL
    _, inverse = np.unique(trials, return_inverse=True)
    maps = np.array([rng.permutation(N_CLASSES) for _ in range(inverse.max() + 1)])
    return maps[inverse, y]


def _fit_and_score(x_tr, y_tr, x_te, y_te, max_iter):
    model = fit(x_tr, y_tr, max_iter=max_iter)
    return accuracy(predict(model, x_te), y_te), model


def evaluate_own(data: list, config: ExperimentConfig, label: str) -> list[dict]:
    """One model per subject on its own training half."""
    rows = []
    for sf in data:
        x_tr, y_tr, id_tr = sf.side(True)
        x_te, y_te, id_te = sf.side(False)
        audit_leakage(id_tr, id_te)
        if config.shuffle_labels:
            y_tr = shuffle_labels(y_tr, id_tr, config.seed, (sf.subject_id,),
                                  config.shuffle_scheme)
        acc, model = _fit_and_score(x_tr, y_tr, x_te, y_te, config.max_iter)
        rows.append({"config": label, "normalization": config.normalization,
                     "model_type": "OWN", "subject": int(sf.subject_id), "accuracy": acc,
                     "n_models": 1, "n_train_rows": int(len(y_tr)), "n_test_rows": int(len(y_te)),
                     "converged": bool(model.converged)})
    return rows


def evaluate_other(data: list, config: ExperimentConfig, label: str,
                   n_train: int | None = None) -> list[dict]:
    """Models trained on ``n_train`` other subjects, every combination.

    A subject's accuracy is the mean over its ``C(n - 1, n_train)`` models.
    """
    n = len(data)
    if n < 2:
        raise ConfigurationError("OTHER models need at least two subjects")
    k = n - 1 if n_train is None else n_train
    if not 1 <= k <= n - 1:
        raise ConfigurationError(f"cannot train on {k} other subjects out of {n}")
    train_sides = [sf.side(True) for sf in data]
    rows = []
    for i, sf in enumerate(data):
        x_te, y_te, id_te = sf.side(False)
        others = [j for j in range(n) if j != i]
        accs = []
        for combo in itertools.combinations(others, k):
            x_tr = np.vstack([train_sides[j][0] for j in combo])
            y_tr = np.concatenate([train_sides[j][1] for j in combo])
            id_tr = np.concatenate([train_sides[j][2] for j in combo])
            audit_leakage(id_tr, id_te)
            if config.shuffle_labels:
                y_tr = shuffle_labels(y_tr, id_tr, config.seed, (sf.subject_id, *combo),
                                      config.shuffle_scheme)
            accs.append(_fit_and_score(x_tr, y_tr, x_te, y_te, config.max_iter)[0])
        rows.append({"config": label, "normalization": config.normalization,
                     "model_type": "OTHER", "subject": int(sf.subject_id),
                     "accuracy": float(np.mean(accs)), "n_models": len(accs),
                     "n_train_subjects": k, "n_test_rows": int(len(y_te))})
    return rows


def _group_summary(rows, key="config") -> dict:
    groups = {}
    for r in rows:
        groups.setdefault(r[key], []).append(r["accuracy"])
    return {g: summarize(v) for g, v in groups.items()}


# -- protocols ----------------------------------------------------------------

def run_own(config: ExperimentConfig, subjects=None) -> RunReport:
    subjects = load_subjects(config) if subjects is None else subjects
    fc = config.feature_config()
    data = extract_subjects(subjects, [fc], config.warmup, config.seed)[fc]
    rows = evaluate_own(data, config, fc.label)
    return RunReport("own", rows, _group_summary(rows), provenance=provenance(config),
                     notes=["leakage audit passed"])


def run_other(config: ExperimentConfig, subjects=None) -> RunReport:
    subjects = load_subjects(config) if subjects is None else subjects
    if len(subjects) < 2:
        raise ConfigurationError("OTHER models need at least two subjects in the data")
    fc = config.feature_config()
    data = extract_subjects(subjects, [fc], config.warmup, config.seed)[fc]
    rows = evaluate_other(data, config, fc.label, config.n_train_subjects)
    return RunReport("other", rows, _group_summary(rows), provenance=provenance(config),
                     notes=["leakage audit passed"])


def subject_count_study(config: ExperimentConfig, subjects=None, counts=None) -> RunReport:
    """OTHER accuracy as a function of the number of training subjects."""
    subjects = load_subjects(config) if subjects is None else subjects
    fc = config.feature_config()
    data = extract_subjects(subjects, [fc], config.warmup, config.seed)[fc]
    counts = counts or range(1, len(subjects))
    rows = []
    for k in counts:
        rows += evaluate_other(data, config, f"{fc.label}-k{k}", k)
    return RunReport("subject-count", rows, _group_summary(rows), provenance=provenance(config))


def _evaluate(data, config, label):
    if config.model_type == "OWN":
        return evaluate_own(data, config, label)
    return evaluate_other(data, config, label, config.n_train_subjects)


def sweep_windows(config: ExperimentConfig, subjects=None,
                  lengths=WINDOW_LENGTHS_MS) -> RunReport:
    """Accuracy over the ``(L_norm, L_feature)`` grid and its best cell.

    Without normalisation the normalisation window plays no role, so each
    feature window is computed once and its result reused along ``L_norm``.
    """
    subjects = load_subjects(config) if subjects is None else subjects
    cells = [(ln, lf) for ln in lengths for lf in lengths]
    def cell_config(ln, lf):
        if config.normalization == "None":
            ln = max(lengths)
        return config.feature_config(norm_ms=ln, feature_ms=lf)
    configs = [cell_config(ln, lf) for ln, lf in cells]
    data = extract_subjects(subjects, configs, config.warmup, config.seed)
    cache = {}
    rows = []
    for (ln, lf), fc in zip(cells, configs):
        if fc not in cache:
            cache[fc] = _evaluate(data[fc], config.replace(norm_ms=ln, feature_ms=lf), fc.label)
        for r in cache[fc]:
            rows.append({**r, "config": f"N{ln}-F{lf}", "norm_ms": ln, "feature_ms": lf})
    summary = _group_summary(rows)
    best = max(summary, key=lambda g: (summary[g]["mean"], -list(summary).index(g)))
    summary["best"] = {"cell": best, **summary[best]}
    return RunReport("sweep", rows, summary, provenance=provenance(config))


def window_function_grid(features=FEATURES):
    """``(feature, weighting, dividing)`` of every weighting/dividing comparison."""
    grid = []
    for feat in features:
        for kind in WeightingKind:
            grid.append((feat, kind.value, None))
        for scheme in ALL_DIVIDING:
            grid.append((feat, WeightingKind.FLAT.value, scheme.name))
    return grid


def window_functions(config: ExperimentConfig, subjects=None, features=FEATURES) -> RunReport:
    """Compare weighting and dividing windows for each feature.

    Combinations the feature cannot run (e.g. STFT on blocks of 100 ms or
    less) are listed in the notes and summary instead of failing the run.
    """
    subjects = load_subjects(config) if subjects is None else subjects
    runnable, skipped = [], []
    for feat, weighting, dividing in window_function_grid(features):
        fc = config.feature_config(feature=feat, weighting=weighting, dividing=dividing)
        try:
            check_feature_config(fc)
        except ConfigurationError as exc:
            skipped.append({"config": fc.label, "reason": str(exc)})
            continue
        runnable.append(fc)
    data = extract_subjects(subjects, runnable, config.warmup, config.seed)
    rows = []
    for fc in runnable:
        cfg = config.replace(feature=fc.feature, weighting=fc.weighting.value,
                             dividing=fc.dividing.name if fc.dividing else None)
        for r in _evaluate(data[fc], cfg, fc.label):
            rows.append({**r, "feature": fc.feature, "weighting": fc.weighting.value,
                         "dividing": fc.dividing.name if fc.dividing else "",
                         "dimension": int(data[fc][0].values[0].shape[1])})
    summary = _group_summary(rows)
    summary["skipped"] = skipped
    notes = [f"skipped {s['config']}: {s['reason']}" for s in skipped]
    return RunReport("window-funcs", rows, summary, provenance=provenance(config), notes=notes)


def correlation_analysis(config: ExperimentConfig, subjects=None, trial_stride: int = 1) -> RunReport:
    """Pearson r between the raw window std and the MAV feature, per channel.

    Computed under both normalisations with the config's window lengths.
    Channels whose std or MAV series has no variance are skipped.
    """
    subjects = load_subjects(config) if subjects is None else subjects
    configs = {norm: config.feature_config(feature="MAV", normalization=norm, weighting="Flat",
                                           dividing=None) for norm in NORMALIZATIONS}
    data = extract_subjects(subjects, list(configs.values()), config.warmup, config.seed,
                            keep_sigma=True, trial_stride=trial_stride)
    rows, notes = [], []
    for norm, fc in configs.items():
        for sf in data[fc]:
            sigma = np.vstack(sf.sigma)
            mav = np.vstack(sf.values)
            for ch in range(sigma.shape[1]):
                s, m = sigma[:, ch], mav[:, ch]
                if np.std(s) < 1e-300 or np.std(m) < 1e-300:
                    notes.append(f"{norm} subject {sf.subject_id} ch{ch + 1:02d}: "
                                 "zero variance, skipped")
                    continue
                r = float(np.corrcoef(s, m)[0, 1])
                rows.append({"config": norm, "normalization": norm, "subject": int(sf.subject_id),
                             "channel": ch + 1, "r": r})
    summary = {}
    for norm in NORMALIZATIONS:
        rs = [r["r"] for r in rows if r["normalization"] == norm]
        summary[norm] = {"mean_r": float(np.mean(rs)) if rs else float("nan"),
                         "std_r": float(np.std(rs)) if rs else float("nan"), "n": len(rs)}
    return RunReport("correlate", rows, summary, provenance=provenance(config), notes=notes)


def compare_normalizations(config: ExperimentConfig, subjects=None, features=None,
                           sweep: bool = False) -> RunReport:
    """SWN vs None for OWN and OTHER models, with rank-sum tests.

    With ``sweep`` each (feature, normalisation, model) group uses its best
    window-length cell; otherwise the config's window lengths. All tests
    of the report form one Bonferroni family.
    """
    subjects = load_subjects(config) if subjects is None else subjects
    features = list(features or [config.feature])
    lengths = WINDOW_LENGTHS_MS if sweep else None
    rows = []
    for feat in features:
        for norm in NORMALIZATIONS:
            if sweep:
                cells = [(ln, lf) for ln in lengths for lf in lengths]
            else:
                cells = [(config.norm_ms, config.feature_ms)]
            # without normalisation L_norm is irrelevant; evaluate each L_feature once
            if norm == "None" and sweep:
                cells = [c for c in cells if c[0] == max(lengths)]
            fcs = {cell: config.feature_config(feature=feat, normalization=norm,
                                               norm_ms=cell[0], feature_ms=cell[1])
                   for cell in cells}
            data = extract_subjects(subjects, list(fcs.values()), config.warmup, config.seed)
            for mt in MODEL_TYPES:
                cfg = config.replace(feature=feat, normalization=norm, model_type=mt)
                best = None
                for cell, fc in fcs.items():
                    res = _evaluate(data[fc], cfg.replace(norm_ms=cell[0], feature_ms=cell[1]),
                                    fc.label)
                    mean = float(np.mean([r["accuracy"] for r in res]))
                    if best is None or mean > best[0]:
                        best = (mean, cell, res)
                _, cell, res = best
                group = f"{norm}_{mt}"
                for r in res:
                    rows.append({**r, "feature": feat, "group": group, "config": f"{feat}/{group}",
                                 "norm_ms": cell[0], "feature_ms": cell[1]})
    comparisons = []
    m = len(COMPARISON_PAIRS) * len(features)
    for feat in features:
        groups = {}
        for r in rows:
            if r["feature"] == feat:
                groups.setdefault(r["group"], []).append(r["accuracy"])
        tests = compare_groups(groups, COMPARISON_PAIRS, m)
        for (a, b), res in tests.items():
            comparisons.append({"feature": feat, "a": a, "b": b,
                                "mean_a": float(np.mean(groups[a])),
                                "mean_b": float(np.mean(groups[b])), **res.to_dict(),
                                "family_size": m})
    summary = _group_summary(rows)
    return RunReport("compare", rows, summary, comparisons, provenance=provenance(config),
                     notes=["leakage audit passed"])


def chance_level(n_classes: int = 3) -> float:
    return 1.0 / n_classes


def expected_models(n_subjects: int, k: int) -> int:
    """Number of OTHER models trained across a cohort for ``k`` training subjects."""
    return n_subjects * math.comb(n_subjects - 1, k)
