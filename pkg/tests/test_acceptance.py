"""Acceptance gate: every shipped check must pass at its pinned tolerance.

The whole sweep runs once per session through a module fixture; each test
then owns one criterion so a failure names the broken guarantee directly.
The formatted line for every criterion is printed even when tests pass,
giving one pass/fail line per check in the -s / -v output.
"""

import pytest

from pathcalc.acceptance import format_result, load_manifest, run_acceptance


@pytest.fixture(scope="module")
def results():
    return {r.index: r for r in run_acceptance(load_manifest())}


def _check(results, index, capsys):
    r = results[index]
    with capsys.disabled():
        print()
        print(format_result(r))
    assert r.passed, r.detail
    return r


def test_criterion_1_catalog_jet_accuracy(results, capsys):
    r = _check(results, 1, capsys)
    assert r.name == "catalog jet accuracy"


def test_criterion_2_difference_quotient_orders(results, capsys):
    _check(results, 2, capsys)


def test_criterion_3_derivative_coherence(results, capsys):
    _check(results, 3, capsys)


def test_criterion_4_generator_two_sided_identity(results, capsys):
    _check(results, 4, capsys)


def test_criterion_5_generator_closed_form_anchor(results, capsys):
    _check(results, 5, capsys)


def test_criterion_6_change_of_variable_residuals(results, capsys):
    _check(results, 6, capsys)


def test_criterion_7_solver_strong_convergence(results, capsys):
    _check(results, 7, capsys)


def test_criterion_8_measure_recovery(results, capsys):
    r = _check(results, 8, capsys)
    assert r.elapsed >= 0.0
