"""One test per acceptance criterion; each prints a PASS/FAIL line."""
import pytest

from icpm import verify


def _run(key, log):
    res = verify.CHECKS[key]()
    line = res.line()
    print(line)
    log.append(line)
    return res


@pytest.mark.parametrize("key", ["1", "2", "3", "4", "5", "6", "7"])
def test_criterion(key, acceptance_log):
    res = _run(key, acceptance_log)
    assert res.passed, res.detail


@pytest.mark.parametrize("key", ["8a", "8b", "8c", "8d", "8e", "8f", "8g", "8h"])
def test_property_suite(key, acceptance_log):
    res = _run(key, acceptance_log)
    assert res.passed, res.detail
