"""One test per acceptance criterion; each prints a single pass/fail line."""

import pytest

from mpflearn.verify import CHECKS

# (criterion number, check name, runtime budget in seconds)
CRITERIA = [
    (1, "gradients", 30),
    (2, "kl-flow", 60),
    (3, "convexity", 60),
    (4, "consistency", 30),
    (5, "sm-limit", 60),
    (6, "spectral-bound", 120),
    (7, "ordering", 600),
    (8, "hopfield-capacity", 300),
    (9, "hopfield-denoise", 600),
    (10, "ica-parity", 300),
    (11, "samplers", 120),
    (12, "specialization", 30),
]


@pytest.mark.parametrize("number,name,budget", CRITERIA, ids=[c[1] for c in CRITERIA])
def test_criterion(number, name, budget, acceptance_log):
    result = CHECKS[name](0)
    within = result.seconds < budget
    ok = result.passed and within
    line = (f"[{'PASS' if ok else 'FAIL'}] {number} {result.line()[7:]}"
            f" [{result.seconds:.1f}s of {budget}s]")
    print(line)
    acceptance_log.append(line)
    assert result.passed, line
    assert within, line
