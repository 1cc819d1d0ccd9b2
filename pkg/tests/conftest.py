import sys
from pathlib import Path

import hypothesis
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

np.seterr(all="ignore")

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile("default")


def write_csv(path, rows, header="date,ticker,open,close,volume"):
    path.write_text(header + "\n" + "\n".join(",".join(str(x) for x in r) for r in rows) + "\n")
    return path


@pytest.fixture
def make_csv(tmp_path):
    def _make(name, rows, header="date,ticker,open,close,volume"):
        return write_csv(tmp_path / name, rows, header)

    return _make


@pytest.fixture(scope="session")
def small_market():
    from statarb.synth import SynthConfig, generate_market

    return generate_market(SynthConfig(n_tickers=60, n_industries=6, normal_days=120, selloff_days=10, seed=3))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""

    def _report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
