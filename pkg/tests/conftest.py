import contextlib

# criterion number -> (passed, description, detail)
CRITERIA: dict[int, tuple[bool, str, str]] = {}


@contextlib.contextmanager
def criterion(number: int, description: str):
    """Record the outcome of an acceptance criterion and print its verdict line."""
    detail: list[str] = []
    try:
        yield detail
    except BaseException:
        CRITERIA[number] = (False, description, "; ".join(detail))
        print(_line(number))
        raise
    CRITERIA[number] = (True, description, "; ".join(detail))
    print(_line(number))


def _line(number: int) -> str:
    passed, description, detail = CRITERIA[number]
    text = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {description}"
    return f"{text} ({detail})" if detail else text


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        terminalreporter.write_line(_line(number))
