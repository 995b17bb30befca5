"""Finite-difference verification of the training objective"""

import numpy as np
import pytest

from app.services import gradcheck
from app.services.gradcheck import GRADIENT_TERMS, TermSpec, central_difference, gradcheck_service, relative_error


def _negated(gradients):
    return [-g for g in gradients]


class TestHelpers:

    def test_central_difference_of_quadratic(self):
        x = np.array([[1.0, -2.0], [0.5, 3.0]])
        start = x.copy()
        numeric = central_difference(lambda: float(np.sum(x ** 2)), x)
        np.testing.assert_allclose(numeric, 2.0 * start, atol=1e-8)
        np.testing.assert_array_equal(x, start)

    def test_relative_error(self):
        assert relative_error([np.array([1.0, 0.0])], [np.array([1.0, 0.0])]) == 0.0
        assert relative_error([np.array([2.0])], [np.array([1.0])]) == pytest.approx(0.5)
        assert relative_error([np.zeros(3)], [np.zeros(3)]) == 0.0


class TestSuite:

    def test_few_seeds_pass(self):
        report = gradcheck_service.run(seeds=3, tolerance=1e-4, step=1e-5)
        assert report.passed, report.failed_terms
        assert {t.term for t in report.terms} == {"l_ssc", "l_mmd", "l_total", "embed"}

    def test_mmd_term_is_active(self):
        errors = gradcheck.check_seed(0, [TermSpec("l_mmd", lambda v: v["l_mmd"], _negated)], 1e-5)
        assert errors["l_mmd"] > 1.0

    def test_sign_flip_fails_only_that_term(self):
        terms = [t for t in GRADIENT_TERMS if t.name != "l_mmd"]
        terms.append(TermSpec("l_mmd", lambda v: v["l_mmd"], _negated))
        report = gradcheck_service.run(seeds=2, tolerance=1e-4, step=1e-5, terms=terms)
        assert report.failed_terms == ["l_mmd"]
        assert not report.passed

    def test_default_twenty_seeds(self):
        report = gradcheck_service.run()
        assert report.seeds == 20
        assert report.passed, report.failed_terms
        assert all(t.worst_relative_error < 1e-4 for t in report.terms)
