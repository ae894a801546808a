"""Shared pytest hooks: collects acceptance-criterion outcomes and prints
one pass/fail line per criterion in the terminal summary."""

_CRITERIA: list[tuple[int, str, bool, str]] = []


def record_criterion(number: int, description: str, ok: bool, detail: str = "") -> None:
    _CRITERIA.append((number, description, ok, detail))
    line = f"[criterion {number}] {'PASS' if ok else 'FAIL'} {description}"
    if detail:
        line += f" ({detail})"
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, description, ok, detail in sorted(_CRITERIA):
        line = f"[criterion {number}] {'PASS' if ok else 'FAIL'} {description}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
