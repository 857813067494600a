import pytest

from tsbapc import kernels

BACKENDS = kernels.available_backends()

_LINES = []


def record_criterion(number, passed, detail):
    """Remember one acceptance line for the end-of-run summary."""
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {detail}"
    _LINES.append(line)
    print(line)
    return passed


@pytest.fixture(params=BACKENDS)
def backend(request):
    return kernels.load_backend(request.param)


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(_LINES), key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
