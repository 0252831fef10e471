def pytest_runtest_logreport(report):
    """One pass/fail line per acceptance criterion, independent of -v."""
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        print(f"\n[acceptance] {name}: {outcome}")
    elif report.when == "setup" and report.skipped:
        print(f"\n[acceptance] {name}: SKIP ({report.longrepr[2] if isinstance(report.longrepr, tuple) else 'skipped'})")
