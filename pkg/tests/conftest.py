import numpy as np
import pytest

from namegauge.records import TrialRecord, make_manifest

# filled by the acceptance suite; echoed after the test summary
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for label, status in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(f"ACCEPTANCE {label}: {status}")


def trial(trial_id, participant="p1", cohort="patient", target="acorn",
          transcript=None, scores=None, audio=None):
    return TrialRecord(
        trial_id=trial_id,
        participant_id=participant,
        cohort=cohort,
        audio_path=audio or f"audio/{trial_id}.wav",
        transcript=transcript if transcript is not None else target,
        target_word=target,
        scores=scores if scores is not None else {},
    )


def small_manifest(n_participants=5, trials_each=3, cohort="patient", seed=0):
    rng = np.random.default_rng(seed)
    records = []
    for p in range(n_participants):
        for t in range(trials_each):
            records.append(
                trial(
                    f"p{p:02d}-t{t}",
                    participant=f"p{p:02d}",
                    cohort=cohort,
                    scores={"semantic": int(rng.integers(0, 3))},
                )
            )
    return make_manifest(records)


@pytest.fixture
def tmp_out(tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    return out
