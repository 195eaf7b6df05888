"""Exit criteria for the package.  Run with ``pytest tests/test_acceptance.py``;
a pass/fail line per criterion is printed in the terminal summary."""

import math
import time

import numpy as np
import pytest

from inaccuracy import expr as ex
from inaccuracy import measure, quadric, report, scale
from inaccuracy.measure import InfluenceSet, ObservationSeries
from inaccuracy.quadric import Kind, SignatureClass

import exprgen
import models

SQRT5 = math.sqrt(5)
T0 = (40.2, 38.5, 38.9, 39.2, 39.7)
T = (11.6, 11.7, 11.8, 12, 12.1)


@pytest.mark.criterion(1, "viscometer end-to-end: kind, eigenvalues, gradient, k = 0.57, < 1 s")
def test_viscometer_end_to_end():
    start = time.perf_counter()
    rep = report.analyze_request(report.load_request("builtin:viscometer"))
    elapsed = time.perf_counter() - start

    assert rep.surface["kind"] == "hyperbolic paraboloid"
    np.testing.assert_allclose(rep.eigenvalues, [(2 + SQRT5) / 4, (2 - SQRT5) / 4], rtol=0, atol=1e-9)
    np.testing.assert_allclose(rep.gradient_at_mean, [1.006, 1.033, -1], rtol=0, atol=2e-3)
    assert round(rep.k_second, 2) == 0.57
    assert elapsed < 1.0


@pytest.mark.criterion(2, "Table 1 mean absolute deviation gives 0.013 (t0) and 0.014 (t)")
def test_estimator_reconciliation():
    r_t0 = measure.representative_inaccuracy(ObservationSeries("t0", T0), "relative")
    r_t = measure.representative_inaccuracy(ObservationSeries("t", T), "relative")
    assert float(f"{r_t0:.2g}") == 0.013
    assert float(f"{r_t:.2g}") == 0.014


@pytest.mark.criterion(3, "eigenvalues, det A, det M invariant under orthogonal conjugation, < 10 s")
def test_invariance_suite():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    for _ in range(100):
        n = int(rng.integers(1, 7))
        q = quadric.build_quadric(models.random_influence(rng, n))
        Q = models.random_orthogonal(rng, n + 1)
        A2, b2 = quadric.rotate_model(q.A, q.b, Q)
        A2 = 0.5 * (A2 + A2.T)  # exact symmetry for the solver

        lam = quadric.eigen_symmetric(q.A).values
        lam2 = quadric.eigen_symmetric(A2).values
        top = max(1.0, float(np.max(np.abs(lam))))
        assert np.max(np.abs(lam - lam2)) <= 1e-8 * top

        dA, dA2 = np.linalg.det(q.A), np.linalg.det(A2)
        assert abs(dA - dA2) <= 1e-8 * top ** (n + 1)

        M, M2 = q.extended(), quadric.extended_matrix(A2, b2)
        mscale = max(1.0, float(np.linalg.norm(M, 2))) ** (n + 2)
        assert abs(np.linalg.det(M) - np.linalg.det(M2)) <= 1e-8 * mscale

        # a translation in homogeneous form leaves A and det M unchanged
        t = rng.normal(size=n + 1)
        M3 = quadric.translate_extended(M, t)
        np.testing.assert_allclose(M3[: n + 1, : n + 1], q.A, rtol=0, atol=1e-15)
        assert abs(np.linalg.det(M3) - np.linalg.det(M)) <= 1e-8 * max(
            mscale, float(np.linalg.norm(M3, 2)) ** (n + 2)
        )
    assert time.perf_counter() - start < 10.0


@pytest.mark.criterion(4, "1000 random influence sets land in the taxonomy; det A = 0, parabolic")
def test_taxonomy_exhaustive():
    rng = np.random.default_rng(7)
    seen = set()
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        inf = models.random_influence(rng, n, density=float(rng.uniform(0.1, 1.0)))
        q = quadric.build_quadric(inf)
        kind = quadric.classify(q)
        if n == 1:
            assert kind.kind in (Kind.LINE, Kind.PARABOLA)
        elif kind.kind is Kind.HYPERPLANE:
            assert 0 <= kind.type <= n
        elif kind.kind is Kind.ELLIPTIC_PARABOLOID:
            assert kind.type is None
        elif kind.kind is Kind.HYPERBOLIC_PARABOLOID:
            assert 1 <= kind.type <= n - 1
        elif kind.kind is Kind.PARABOLIC_CYLINDER:
            assert 1 <= kind.type <= n - 1
        else:
            pytest.fail(f"unexpected kind {kind}")
        seen.add(kind.kind)
        assert np.linalg.det(q.A) == 0
        assert quadric.signature_class(q.A) is SignatureClass.PARABOLIC
    assert seen == set(Kind)


def _model_scale(q, Y):
    quad = np.abs(np.einsum("ki,ij,kj->k", Y, np.abs(q.A), np.abs(Y)))
    lin = 2 * np.abs(Y) @ np.abs(q.b)
    return np.maximum(1.0, quad + lin)


@pytest.mark.criterion(5, "canonical forms: forward and inverse transport residual <= 1e-8")
@pytest.mark.parametrize("kind", list(models.KIND_GENERATORS), ids=lambda k: k.value)
def test_canonical_residual(kind):
    rng = np.random.default_rng(hash(kind.value) % 2**32)
    gen = models.KIND_GENERATORS[kind]
    for _ in range(50):
        q = quadric.build_quadric(gen(rng))
        cf = quadric.canonicalize(q)
        assert cf.kind.kind is kind

        P = rng.uniform(0, 1, (40, q.n))
        Y = np.column_stack([P, q.height(P)])
        Z = cf.forward(Y)
        assert np.max(cf.equation_residual(Z)) <= 1e-8
        np.testing.assert_allclose(cf.inverse(Z), Y, rtol=0, atol=1e-8 * np.max(np.abs(Y)))

        Zc = cf.sample(rng.uniform(-1, 1, (40, q.n)))
        assert np.max(cf.equation_residual(Zc)) <= 1e-12
        Yc = cf.inverse(Zc)
        assert np.max(np.abs(q.residual(Yc)) / _model_scale(q, Yc)) <= 1e-8


@pytest.mark.criterion(6, "100 random expressions: partials match finite differences, Schwarz symmetry")
def test_derivative_oracle():
    rng = np.random.default_rng(11)
    worst_first = worst_second = worst_sym = 0.0
    count = 0
    while count < 100:
        e = exprgen.random_expr(rng, 4)
        if not ex.variables_of(e):
            continue
        point = exprgen.nonsingular_point(e, rng)
        if point is None:
            continue
        count += 1
        b = {**point, "c": exprgen.CONST_VALUE}
        for v in exprgen.VARS:
            d = ex.evaluate(ex.differentiate(e, v), b)
            worst_first = max(worst_first, exprgen.rel_err(d, exprgen.central_first(e, point, v), 1.0))
        for vi in exprgen.VARS:
            for vj in exprgen.VARS:
                dij = ex.evaluate(ex.second_partial(e, vi, vj), b)
                dji = ex.evaluate(ex.second_partial(e, vj, vi), b)
                fd = exprgen.central_second(e, point, vi, vj)
                worst_second = max(worst_second, exprgen.rel_err(dij, fd, 1.0))
                worst_sym = max(worst_sym, exprgen.rel_err(dij, dji, 1.0))
    assert worst_first <= 1e-6
    assert worst_second <= 1e-6
    assert worst_sym <= 1e-10


@pytest.mark.criterion(7, "linear influence sets: k_second closed form (1e-12), delta_total == delta_first")
def test_first_second_consistency():
    rng = np.random.default_rng(5)
    for _ in range(500):
        n = int(rng.integers(1, 7))
        inf = InfluenceSet(tuple(rng.uniform(0, 5, n) * (rng.random(n) < 0.8)))
        p = rng.uniform(0, 0.5, n)
        closed = 1 / math.sqrt(sum(a * a for a in inf.first) + 1)
        k2 = scale.accuracy_second(scale.gradient_at_mean(inf, p))
        assert abs(k2 - closed) <= 1e-12
        assert measure.delta_total(inf, p) == measure.delta_first(inf, p)


@pytest.mark.criterion(8, "n = 1: line for zero quadratic part, parabola z1^2 = 2 p z2 within 1e-10")
def test_n1_branch():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a1 = float(rng.uniform(0, 3))
        line = quadric.build_quadric(InfluenceSet((a1,)))
        assert quadric.classify(line).kind is Kind.LINE

        inf = InfluenceSet((a1,), {(0, 0): float(rng.uniform(0.1, 5))})
        q = quadric.build_quadric(inf)
        assert quadric.classify(q).kind is Kind.PARABOLA
        y1 = rng.uniform(-2, 2, 30)
        Y = np.column_stack([y1, q.height(y1[:, None])])

        sub = quadric.parabola_substitution(q, p=float(rng.uniform(0.1, 3)))
        Z = sub.to_canonical(Y)
        assert np.max(np.abs(Z[:, 0] ** 2 - 2 * sub.p * Z[:, 1]) / np.maximum(1, Z[:, 0] ** 2)) <= 1e-10
        np.testing.assert_allclose(sub.from_canonical(Z), Y, rtol=0, atol=1e-10 * np.max(np.abs(Y)))

        cf = quadric.canonicalize(q)
        assert np.max(cf.equation_residual(cf.forward(Y))) <= 1e-10


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
