import pytest
from hypothesis import HealthCheck, settings

from rigidkit import _kernels

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow],
)
settings.load_profile("default")

BACKENDS = ["python"] + (["cython"] if _kernels.compiled is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    """Run the test once per kernel implementation."""
    prev = _kernels.BACKEND
    _kernels.use(request.param)
    yield request.param
    _kernels.use(prev)


# one line per acceptance criterion, shown after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
