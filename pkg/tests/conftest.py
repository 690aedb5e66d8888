import functools

import pytest

from bplab import fixtures
from bplab.core import run


@functools.cache
def fixture_run(name: str):
    result = run(fixtures.load(name), fixtures.DEFAULT_STEPS)
    assert result.state.halted and result.state.trap is None, result.state.trap
    return result


@pytest.fixture(params=fixtures.FIXTURES)
def fixture_name(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
