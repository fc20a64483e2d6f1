"""The fifteen acceptance criteria at their stated tolerances.

Each test prints one ``[PASS]``/``[FAIL]`` line.  The runs share one
:class:`Suite`, so experiments used by several criteria (the beta scan,
the OU blocks) are computed once.  Set ``QUENCHWALL_JOBS`` to use worker
processes.  The whole module takes tens of minutes on one core.
"""
import os

import pytest

from quenchwall.harness.acceptance import CRITERIA, Suite, run_criterion

RESULTS = []


@pytest.fixture(scope="module")
def suite(request):
    s = Suite(jobs=int(os.environ.get("QUENCHWALL_JOBS", "1")))
    yield s
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None and RESULTS:
        reporter.write_line("")
        reporter.write_line("acceptance summary")
        for r in sorted(RESULTS, key=lambda r: r.number):
            reporter.write_line(r.line())
        reporter.write_line(f"{sum(r.passed for r in RESULTS)}/{len(RESULTS)} criteria passed")


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda k: f"c{k:02d}-{CRITERIA[k][0].replace(' ', '-')}")
def test_criterion(number, suite, capsys):
    res = run_criterion(number, suite)
    RESULTS.append(res)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()
