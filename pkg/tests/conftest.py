import pytest

from semfusion import alignment, corpusgen, fusion, pipeline

TUNED_THETA = 0.3

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion the test checks")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for n in getattr(report, "criteria", ()):
        prev = _outcomes.get(n, "PASS")
        _outcomes[n] = "PASS" if prev == "PASS" and report.outcome == "passed" else "FAIL"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    report.criteria = tuple(m.args[0] for m in item.iter_markers("criterion"))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        terminalreporter.write_line(f"criterion {n}: {_outcomes[n]}")


class Reference:
    """Reference corpus (default generator spec) pushed through the default pipeline."""

    def __init__(self):
        self.spec = corpusgen.GenSpec()
        self.corpus, self.queries, self.qrels = corpusgen.generate(self.spec)
        self.params = pipeline.auto_align(self.corpus, self.queries, self.qrels)
        self.alphas = alignment.compute_alpha(self.params)
        self.op = fusion.FusionOperator.BOUNDED_SUM
        self.index = pipeline.align_and_fuse(self.corpus, self.op, self.alphas)
        self.fused_queries = pipeline.align_and_fuse(self.queries, self.op, self.alphas)


@pytest.fixture(scope="session")
def reference():
    return Reference()
