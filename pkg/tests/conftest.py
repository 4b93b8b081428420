import sys
from pathlib import Path

import pytest

# gcm_reference and cbc_baseline are test-tree modules, not part of the package
sys.path.insert(0, str(Path(__file__).parent))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """One visible pass/fail line per acceptance criterion."""
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and report.when == "call":
        verdict = "PASS" if report.passed else "FAIL"
        line = f"[ACCEPTANCE] {marker.args[0]}: {verdict}"
        print(f"\n{line}")
        sys.stderr.write(line + "\n")


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): acceptance criterion label")
