import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from swnemg.errors import ConfigurationError, DataError
from swnemg.harness import (COMPARISON_PAIRS, ExperimentConfig, audit_leakage, chance_level,
                            correlation_analysis, evaluate_other, expected_models,
                            extract_subjects, read_toml, row_ids, run_other, run_own,
                            shuffle_labels, split_trials, sweep_windows, window_function_grid,
                            window_functions, compare_normalizations)


def test_split_360():
    mask = split_trials(360, 3)
    assert mask.sum() == 180 and (~mask).sum() == 180
    assert np.all(mask.reshape(36, 10).sum(axis=1) == 5)


@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_split_blocks_property(blocks, seed):
    mask = split_trials(10 * blocks, seed)
    assert np.all(mask.reshape(blocks, 10).sum(axis=1) == 5)
    np.testing.assert_array_equal(mask, split_trials(10 * blocks, seed))


def test_split_seed_changes_assignment():
    assert not np.array_equal(split_trials(360, 1), split_trials(360, 2))


@pytest.mark.parametrize("n", [0, 36, 365])
def test_split_rejects(n):
    with pytest.raises(ValueError):
        split_trials(n, 0)


def test_expected_models():
    assert expected_models(10, 9) == 10
    assert expected_models(10, 1) == 90
    assert expected_models(10, 5) == 10 * 126


def test_chance():
    assert chance_level() == pytest.approx(1 / 3)


def test_leakage_audit():
    a = row_ids(1, 0, 5)
    b = row_ids(1, 1, 5)
    audit_leakage(a, b)
    with pytest.raises(RuntimeError):
        audit_leakage(a, np.concatenate([b, a[:1]]))
    assert np.intersect1d(row_ids(1, 0, 190), row_ids(2, 0, 190)).size == 0


class _Fake:
    """Separable three-class data per subject, for OTHER bookkeeping."""

    def __init__(self, sid, rng):
        self.subject_id = sid
        self.values, self.labels, self.ids = [], [], []
        for t in range(10):
            y = np.arange(30) % 3
            self.values.append(np.eye(3)[y] * 4 + rng.normal(size=(30, 3)))
            self.labels.append(y)
            self.ids.append(row_ids(sid, t, 30))
        self.train_mask = np.arange(10) % 2 == 0

    def side(self, train):
        idx = [i for i in range(10) if self.train_mask[i] == train]
        return (np.vstack([self.values[i] for i in idx]),
                np.concatenate([self.labels[i] for i in idx]),
                np.concatenate([self.ids[i] for i in idx]))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_other_model_count(k):
    rng = np.random.default_rng(0)
    data = [_Fake(s, rng) for s in range(1, 5)]
    rows = evaluate_other(data, ExperimentConfig(), "x", k)
    assert len(rows) == 4
    assert all(r["n_models"] == math.comb(3, k) for r in rows)
    assert sum(r["n_models"] for r in rows) == expected_models(4, k)
    assert all(r["accuracy"] > 0.9 for r in rows)


def test_other_rejects_bad_k():
    rng = np.random.default_rng(0)
    data = [_Fake(s, rng) for s in range(1, 4)]
    with pytest.raises(ConfigurationError):
        evaluate_other(data, ExperimentConfig(), "x", 3)


def test_relabel_is_per_trial_bijection():
    y = np.tile(np.repeat([0, 1, 2], 10), 6)
    ids = np.concatenate([row_ids(1, t, 30) for t in range(6)])
    out = shuffle_labels(y, ids, 0, (1,))
    for t in range(6):
        seg = slice(30 * t, 30 * (t + 1))
        mapping = {a: b for a, b in zip(y[seg], out[seg])}
        assert sorted(mapping.values()) == [0, 1, 2]
        assert all(mapping[a] == b for a, b in zip(y[seg], out[seg]))
    np.testing.assert_array_equal(out, shuffle_labels(y, ids, 0, (1,)))


def test_permute_keeps_counts():
    y = np.repeat([0, 0, 0, 1, 2], 20)
    out = shuffle_labels(y, np.arange(100), 1, (1,), "permute")
    np.testing.assert_array_equal(np.bincount(out), np.bincount(y))


# -- configuration ----------------------------------------------------------

@pytest.mark.parametrize("change", [
    {"normalization": "L2"}, {"norm_ms": 150}, {"feature_ms": 600}, {"feature": "RMS"},
    {"model_type": "BOTH"}, {"weighting": "Triangle"}, {"dividing": "ED5"},
    {"n_train_subjects": 0}, {"gain_spread": (5, 0.2)}, {"shuffle_scheme": "x"},
    {"feature": "STFT", "feature_ms": 100},
])
def test_config_validation(change):
    with pytest.raises(ConfigurationError):
        ExperimentConfig(**change)


def test_toml(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('[experiment]\nnormalization = "None"\nnorm_ms = 300\nseed = 9\n')
    cfg = ExperimentConfig.from_toml(p)
    assert (cfg.normalization, cfg.norm_ms, cfg.seed) == ("None", 300, 9)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.digest() == ExperimentConfig.from_toml(p).digest()
    assert cfg.digest() != cfg.replace(seed=10).digest()


def test_toml_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("normalization = \n")
    with pytest.raises(ConfigurationError):
        read_toml(bad)
    with pytest.raises(ConfigurationError):
        read_toml(tmp_path / "missing.toml")
    unknown = tmp_path / "u.toml"
    unknown.write_text("colour = 1\n")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_toml(unknown)


# -- protocols on a tiny cohort ---------------------------------------------

def test_extract_rejects_partial_blocks(tiny_cohort):
    from conftest import TrialSubset
    cfg = ExperimentConfig()
    with pytest.raises(DataError):
        extract_subjects([TrialSubset(tiny_cohort[0].subject, 7)], [cfg.feature_config()],
                         cfg.warmup, 0)


def test_own_and_other(tiny_cohort):
    cfg = ExperimentConfig(seed=1)
    own = run_own(cfg, tiny_cohort)
    assert [r["subject"] for r in own.rows] == [s.subject_id for s in tiny_cohort]
    # 4.6 s trial at 20 Hz after a 0.5 s warm-up: 82 rows
    assert all(r["n_train_rows"] == r["n_test_rows"] == 5 * 82 for r in own.rows)
    assert all(0 <= r["accuracy"] <= 1 for r in own.rows)
    other = run_other(cfg.replace(model_type="OTHER", n_train_subjects=1), tiny_cohort)
    assert all(r["n_models"] == 2 for r in other.rows)
    again = run_own(cfg, tiny_cohort)
    assert again.to_json() == own.to_json()


def test_sweep_none_independent_of_norm_window(tiny_cohort):
    rep = sweep_windows(ExperimentConfig(normalization="None"), tiny_cohort, lengths=(100, 300))
    acc = {(r["norm_ms"], r["feature_ms"], r["subject"]): r["accuracy"] for r in rep.rows}
    assert len(rep.rows) == 4 * len(tiny_cohort)
    for (ln, lf, s), a in acc.items():
        assert a == acc[(100, lf, s)]
    assert rep.summary["best"]["cell"] in {"N100-F100", "N100-F300", "N300-F100", "N300-F300"}


def test_window_functions_skip(tiny_cohort):
    small = [type(s)(s.subject, 10) for s in tiny_cohort[:2]]
    rep = window_functions(ExperimentConfig(feature_ms=100), small, features=["STFT"])
    skipped = {s["config"] for s in rep.summary["skipped"]}
    # 100 ms is 50 samples: STFT needs 64, so everything is skipped
    assert len(skipped) == 16 and not rep.rows
    rep = window_functions(ExperimentConfig(norm_ms=500, feature_ms=500), small, features=["STFT"])
    skipped = {s["config"] for s in rep.summary["skipped"]}
    assert any("ED4" in c for c in skipped) and not any("ED2" in c for c in skipped)
    assert len(rep.notes) == len(skipped)
    assert len({r["config"] for r in rep.rows}) + len(skipped) == 16


def test_window_function_grid_size():
    assert len(window_function_grid()) == 5 * 16


def test_correlation_skips_dead_channel(tiny_cohort):
    class Dead:
        def __init__(self, s):
            self.s, self.subject_id, self.geometry = s, s.subject_id, s.geometry

        def __len__(self):
            return len(self.s)

        def trial(self, i):
            t = self.s.trial(i)
            t.emg.data[:, 3] = 0.0
            return t
    rep = correlation_analysis(ExperimentConfig(), [Dead(tiny_cohort[0])], trial_stride=5)
    assert {r["channel"] for r in rep.rows} == set(range(1, 13)) - {4}
    assert any("ch04" in n for n in rep.notes)
    assert rep.summary["None"]["n"] == 11


def test_compare_structure(tiny_cohort):
    rep = compare_normalizations(ExperimentConfig(), tiny_cohort)
    assert {r["group"] for r in rep.rows} == {"SWN_OWN", "None_OWN", "SWN_OTHER", "None_OTHER"}
    assert len(rep.comparisons) == len(COMPARISON_PAIRS)
    assert all(c["family_size"] == 5 for c in rep.comparisons)
