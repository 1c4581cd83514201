"""The twelve acceptance criteria at their stated sizes and tolerances.

Each test prints one ``criterion NN PASS|FAIL`` line.  The profile can be
switched with ``MFDIAM_PROFILE`` (``quick`` by default, ``smoke`` for a
fast run whose statistical thresholds are not meant to hold).  Run as a
script to get just the twelve lines.
"""

import os
import sys

import pytest

from mfdiam.acceptance import AcceptanceRun

PROFILE = os.environ.get("MFDIAM_PROFILE", "quick")
WORKERS = int(os.environ.get("MFDIAM_WORKERS", "1"))


@pytest.fixture(scope="module")
def acceptance():
    return AcceptanceRun(PROFILE, workers=WORKERS)


@pytest.mark.parametrize("number", range(1, 13))
def test_criterion(acceptance, number, capsys):
    res = acceptance.run(number)
    with capsys.disabled():
        print("\n" + res.line(), flush=True)
    assert res.passed, res.line()


if __name__ == "__main__":
    run = AcceptanceRun(PROFILE, workers=WORKERS)
    results = []
    for k in range(1, 13):
        results.append(run.run(k))
        print(results[-1].line(), flush=True)
    sys.exit(0 if all(r.passed for r in results) else 1)
