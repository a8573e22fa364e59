def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(num, label): numbered acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    lines = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" not in props or (rep.when != "call" and outcome != "error"):
                continue
            status = "PASS" if outcome == "passed" else "FAIL"
            lines[props["criterion"]] = f"C{props['criterion']:<3d}{status}  {props['label']}: {props.get('detail', '')}"
    if lines:
        terminalreporter.section("acceptance criteria")
        for num in sorted(lines):
            terminalreporter.write_line(lines[num])
