#!/usr/bin/env python3
"""
Тесты топологии: слова молний, ламинации, распределения μ₀ и
интегрирование по Хаару
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np

from core.connection_module import IDENTITY, axial_zipper, diagonal, random_su2
from core.enumeration_module import enumerate_double_dimer
from core.exact_module import cylinder_pgf
from core.lattice_module import cylinder_graph
from core.topology_module import (
    LoopClass, TopologyError, canonical_word, catalan, classify_loop, cyclic_reduce, free_reduce,
    haar_extract, lamination_distribution_rows, lamination_expectation, lamination_of,
    mu0_lamination_distribution_exact, mu0_lamination_distribution_mc, power_laminations, trace_moment,
)


def test_word_reduction():
    assert free_reduce([1, -1, 2]) == (2,)
    assert free_reduce([1, 2, -2, -1]) == ()
    assert cyclic_reduce([1, 2, -1]) == (2,)
    assert canonical_word([2, 1]) == canonical_word([1, 2])
    assert canonical_word([-1, -2]) == canonical_word([2, 1])
    print("✅ Приведение слов")


def test_loop_class():
    assert LoopClass(()).is_contractible
    c = LoopClass((1, 1))
    assert not c.is_contractible and c.winding == 2
    assert LoopClass((1, 2)).winding is None
    print("✅ Классы циклов")


def test_cylinder_girth_loop():
    """Цикл вокруг цилиндра 3×1 имеет слово g₁"""
    g = cylinder_graph(3, 1)
    zippers = [axial_zipper(g, IDENTITY)]
    laminations = [lamination_of(cfg, zippers) for cfg, _ in enumerate_double_dimer(g)]
    assert sorted(len(lam) for lam in laminations) == [0, 0, 1]
    loop_cfg = next(cfg for cfg, _ in enumerate_double_dimer(g) if cfg.k == 1)
    assert classify_loop(loop_cfg.loops[0], zippers).word in ((1,), (-1,))
    print("✅ Цикл вокруг цилиндра нестягиваем")


def test_exact_distribution_matches_pgf():
    """Распределение числа нестягиваемых циклов = производящая функция pair-measure"""
    for n, m in ((1, 1), (3, 1), (1, 2)):
        g = cylinder_graph(n, m)
        dist = mu0_lamination_distribution_exact(g, [axial_zipper(g, IDENTITY)])
        assert abs(dist.total_mass - 1) < 1e-12
        pgf = cylinder_pgf(n, m, "pair-measure")
        by_k = np.zeros(pgf.degree + 1)
        for lam, p in dist.probabilities.items():
            by_k[len(lam)] += p
        assert np.allclose(by_k, pgf.coeffs, atol=1e-12), (n, m, by_k, pgf.coeffs)
    print("✅ Точное распределение ламинаций")


def test_mc_distribution():
    g = cylinder_graph(3, 1)
    zippers = [axial_zipper(g, IDENTITY)]
    exact = mu0_lamination_distribution_exact(g, zippers)
    mc = mu0_lamination_distribution_mc(g, zippers, 2000, seed=12, workers=1)
    for lam, p in exact.probabilities.items():
        se = np.sqrt(p * (1 - p) / 2000)
        assert abs(mc.get(lam) - p) <= 4 * se + 1e-12
    print("✅ Монте-Карло распределение ламинаций")


def test_lamination_expectation():
    """Σ P(L) ∏ Tr/2 = Z_dd(Φ)/Z_dd(I) на цилиндре 1×1"""
    lam = 1.8
    g = cylinder_graph(1, 1)
    dist = mu0_lamination_distribution_exact(g, [axial_zipper(g, IDENTITY)])
    value = lamination_expectation(dist, [diagonal(lam)])
    assert abs(value - (lam + 1) ** 2 / lam / 4) < 1e-12
    print("✅ Среднее по ламинациям")


def test_catalan_moments():
    for k in range(1, 5):
        value, _ = trace_moment(2 * k, "quadrature")
        assert abs(value - catalan(k)) < 1e-10
        odd, _ = trace_moment(2 * k - 1, "quadrature")
        assert abs(odd) < 1e-10
    value, se = trace_moment(2, "mc", samples=20000, seed=13)
    assert abs(value - 1) <= 4 * se
    print("✅ Моменты следа равны числам Каталана")


def test_haar_extract_quadrature():
    coeffs = [1.0, 0.5, 0.25]

    def evaluator(Us):
        t = np.trace(Us[0])
        return sum(c * t ** k for k, c in enumerate(coeffs))

    result = haar_extract(evaluator, power_laminations(2), 1, mode="quadrature")
    assert np.allclose(result.values, coeffs, atol=1e-10)
    print("✅ Квадратура Вейля восстанавливает коэффициенты")


def test_haar_extract_mc():
    def evaluator(Us):
        return 2.0 + np.trace(Us[0])

    result = haar_extract(evaluator, power_laminations(1), 1, samples=4000, seed=14, mode="mc", batches=10)
    assert np.allclose(result.values, [2.0, 1.0], atol=1e-8)
    print("✅ Монте-Карло по Хаару")


def test_haar_rejects_foreign_generator():
    try:
        haar_extract(lambda Us: 1.0, [(LoopClass((2,)),)], 1, mode="quadrature")
    except TopologyError:
        print("✅ Ламинация с чужой образующей отклонена")
        return
    assert False, "Ожидалась TopologyError"


def test_random_su2_trace_bounds():
    U = random_su2(np.random.default_rng(15), 100)
    traces = np.trace(U, axis1=1, axis2=2)
    assert np.all(np.abs(traces.imag) < 1e-12) and np.all(np.abs(traces.real) <= 2 + 1e-12)
    print("✅ Следы SU(2) вещественны и |Tr| ≤ 2")


def test_lamination_rows():
    g = cylinder_graph(1, 1)
    dist = mu0_lamination_distribution_exact(g, [axial_zipper(g, IDENTITY)])
    rows = lamination_distribution_rows(dist)
    assert [r["loops"] for r in rows] == sorted(r["loops"] for r in rows)
    assert abs(sum(r["probability"] for r in rows) - 1) < 1e-12
    assert all(r["stderr"] == 0.0 for r in rows)
    print("✅ Таблица распределения ламинаций")


if __name__ == "__main__":
    print("🧪 Тесты топологии")
    print("=" * 50)
    tests = [v for k, v in list(globals().items()) if k.startswith("test_")]
    passed = 0
    for test in tests:
        try:
            test()
            passed += 1
        except Exception as e:
            print(f"❌ {test.__name__}: {e}")
    print(f"\n📊 Пройдено {passed}/{len(tests)}")
    sys.exit(0 if passed == len(tests) else 1)
