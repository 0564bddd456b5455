"""Acceptance gate: every criterion at its stated tolerance, one line each."""

import pytest

from rpde_lab import acceptance


def _report(result):
    mark = "PASS" if result.passed else "FAIL"
    print(f"[{mark}] criterion {result.index}: {result.name} -- {result.detail}")
    assert result.passed, result.detail


def test_criterion_1_chen_relation():
    _report(acceptance.criterion_1())


def test_criterion_2_greedy_control():
    _report(acceptance.criterion_2())


def test_criterion_3_special_functions():
    _report(acceptance.criterion_3())


def test_criterion_4_gronwall_bounds():
    _report(acceptance.criterion_4())


def test_criterion_5_solver_oracle():
    _report(acceptance.criterion_5())


def test_criterion_6_bound_pipeline():
    _report(acceptance.criterion_6())


def test_criterion_7_absorbing_pullback():
    _report(acceptance.criterion_7())


def test_criterion_8_attractor_regularity():
    _report(acceptance.criterion_8())


def test_criterion_9_determinism():
    _report(acceptance.criterion_9())
