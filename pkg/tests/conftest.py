import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion; the line is printed in the summary."""
    state = {}

    def start(number: int, title: str):
        state["n"], state["title"] = number, title

    yield start
    if "n" not in state:
        return
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    _LINES[state["n"]] = f"criterion {state['n']:>2} {'PASS' if ok else 'FAIL'}  {state['title']}"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_LINES):
        terminalreporter.write_line(_LINES[n])
