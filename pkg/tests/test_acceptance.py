"""Acceptance criteria 1-10 at their stated tolerances.

Each test prints one ``PASS``/``FAIL`` line (straight to the terminal, so it
shows without ``-s``) and then asserts.  Run directly with
``python tests/test_acceptance.py`` for just the summary lines.
"""
import sys

import pytest

from lambdalab.verify import CRITERIA, ResultCache, run_criterion

NUMBERS = [c[0] for c in CRITERIA]


@pytest.fixture(scope="module")
def cache():
    return ResultCache()


@pytest.mark.parametrize("number", NUMBERS)
def test_criterion(number, cache, capsys):
    res = run_criterion(number, cache, "full")
    with capsys.disabled():
        print("\n" + res.line())
        for row in res.rows:
            mark = "ok " if row.passed else "BAD"
            print(f"      {mark} {row.label}: {row.value:.3g} (tol {row.tol:.3g})")
    assert res.error is None, res.error
    assert res.passed, res.line()


if __name__ == "__main__":
    c = ResultCache()
    results = [run_criterion(n, c, "full") for n in NUMBERS]
    for r in results:
        print(r.line())
    sys.exit(0 if all(r.passed for r in results) else 1)
