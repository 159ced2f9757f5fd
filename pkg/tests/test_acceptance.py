"""The eleven acceptance criteria, one test each, with a PASS/FAIL line per criterion."""
import json
import os
import subprocess
import sys

import pytest

import acceptance_runs as runs

RESULTS = {}
HERE = os.path.dirname(os.path.abspath(__file__))


def _report(k, ok, detail):
    line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[k] = line
    print(line)


@pytest.fixture(scope="module")
def outcomes():
    return {}


@pytest.mark.parametrize("k", range(1, 11))
def test_criterion(k, outcomes):
    ok, detail, payload = runs.CRITERIA[k]()
    outcomes[k] = runs.digest(payload)
    _report(k, ok, detail)
    assert ok, detail


def _digests_in_subprocess(threads):
    env = dict(os.environ, FACTORLAB_THREADS=str(threads))
    return subprocess.Popen([sys.executable, os.path.join(HERE, "acceptance_runs.py")], env=env,
                            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)


def test_criterion_11_reproducible(outcomes):
    procs = {"run A, 4 threads": _digests_in_subprocess(4),
             "run B, 4 threads": _digests_in_subprocess(4),
             "run C, 1 thread": _digests_in_subprocess(1)}
    digests = {}
    for name, proc in procs.items():
        out, err = proc.communicate(timeout=1800)
        assert proc.returncode == 0, err
        digests[name] = {int(k): v for k, v in json.loads(out).items()}
    if len(outcomes) == 10:
        digests["this process"] = outcomes
    reference = digests["run A, 4 threads"]
    differing = sorted({k for d in digests.values() for k in reference if d.get(k) != reference[k]})
    ok = not differing
    detail = f"criteria 1-10 digests identical across {len(digests)} runs" if ok else f"criteria {differing} differ"
    _report(11, ok, detail)
    assert ok, digests
