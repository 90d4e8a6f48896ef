import pytest

# acceptance verdict lines, repeated in the terminal summary
VERDICTS: list[str] = []


@pytest.fixture
def verdict(capsys):
    """Print and record one PASS/FAIL line; returns whether every check passed."""

    def emit(label: str, checks: list[tuple[str, float, str, float, bool]]) -> bool:
        ok = all(c[-1] for c in checks)
        detail = "; ".join(f"{name} {value:.4g} {rel} {bound:.4g}{'' if good else ' (x)'}" for name, value, rel, bound, good in checks)
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        VERDICTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
