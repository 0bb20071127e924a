import pytest

from swnemg.synth import SyntheticSubjectSpec, SubjectDataset, generate_cohort


class TrialSubset:
    """First ``n`` trials of a subject, for fast harness tests."""

    def __init__(self, subject, n):
        self.subject = subject
        self.n = n
        self.subject_id = subject.subject_id
        self.geometry = subject.geometry

    def __len__(self):
        return self.n

    def trial(self, i):
        if not 0 <= i < self.n:
            raise IndexError(i)
        return self.subject.trial(i)


@pytest.fixture(scope="session")
def tiny_cohort():
    """Three subjects with 10 trials each (one split block)."""
    return [TrialSubset(s, 10) for s in generate_cohort(3, (0.2, 5.0), master_seed=11, sessions=1)]


@pytest.fixture(scope="session")
def one_trial():
    return SubjectDataset(SyntheticSubjectSpec(subject_id=1, seed=5), 1).trial(0)


ACCEPTANCE = {}


def record(number, ok, detail):
    """Store one acceptance outcome for the terminal summary."""
    ACCEPTANCE[number] = (bool(ok), detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
