import pytest

from pseudolabel.transcripts import Expert, HypothesisTranscript, WordToken

ACCEPTANCE = pytest.StashKey()


def make_transcript(words, expert="E1", audio_id="a", step=0.5, confs=None, duration=None):
    """Transcript with words laid out back to back, ``step`` seconds each."""
    tokens = []
    for i, w in enumerate(words):
        conf = confs[i] if confs is not None else 1.0
        tokens.append(WordToken(w, i * step, (i + 1) * step, conf))
    dur = duration or max(step * len(words), step)
    return HypothesisTranscript(audio_id, Expert(expert), tuple(tokens), dur)


@pytest.fixture
def transcript():
    return make_transcript


@pytest.fixture
def acceptance(request):
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(criterion, passed, detail=""):
        lines.append(f"{'PASS' if passed else 'FAIL'}  {criterion}  {detail}".rstrip())
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
