"""Every acceptance criterion at its stated resolution and tolerance.

Each criterion is one test; its one-line verdict is printed (``-s``) and
repeated in the terminal summary.  Set ``BIRADON_WORKERS`` to run the
sweeps inside a criterion in parallel.
"""

import pytest

from biradon.acceptance import CRITERIA, AcceptanceConfig, run_criterion

LINES: dict[str, str] = {}


@pytest.mark.parametrize("cid", list(CRITERIA))
def test_criterion(cid):
    res = run_criterion(cid, AcceptanceConfig())
    LINES[cid] = res.line()
    print(res.line())
    for c in res.checks:
        print(f"    {'ok ' if c.ok else 'BAD'} {c.name}: {c.value} {c.op} {c.bound}")
    assert res.status == "pass", res.line()
