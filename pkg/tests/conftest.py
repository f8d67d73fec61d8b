import numpy as np
import pytest

from adselect.series import TimeSeries

# acceptance results collected here so the terminal summary can print one
# PASS/FAIL line per criterion
_AC_RESULTS = {}


@pytest.fixture
def ac_check():
    """Record an acceptance-criterion outcome, then assert it."""

    def check(name, condition, detail):
        ok = bool(condition)
        _AC_RESULTS[name] = (ok, detail)
        assert ok, f"{name} FAILED: {detail}"

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _AC_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_AC_RESULTS):
        ok, detail = _AC_RESULTS[name]
        terminalreporter.write_line(f"{name}: {'PASS' if ok else 'FAIL'} - {detail}")


def hourly_series(values, labels=None, start="2016-03-01T00:00") -> TimeSeries:
    """Small labeled series helper with contiguous hourly timestamps."""
    values = np.asarray(values, dtype=np.float64)
    t0 = np.datetime64(start, "s")
    stamps = t0 + np.arange(len(values)) * np.timedelta64(3600, "s")
    return TimeSeries(values, stamps, labels)


@pytest.fixture
def make_series():
    return hourly_series
