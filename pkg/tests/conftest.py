import pytest


@pytest.fixture
def report(capsys):
    """Print a check line to the terminal even when output is captured."""

    def _report(check):
        with capsys.disabled():
            print(f"\n{check.line()}")
            if not check.passed:
                for d in check.details[:20]:
                    print(f"    {d}")

    return _report

