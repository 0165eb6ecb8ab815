#!/usr/bin/env python3
"""
Тесты точных формул: цилиндр, q-произведение, функции Грина
полуплоскости, среднее число циклов вокруг двух точек, хордовая вероятность
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np

from core.connection_module import IDENTITY, ray_zipper
from core.enumeration_module import chordal_separation_exact
from core.exact_module import (
    ExactError, chordal_left_probability, cylinder_detK, cylinder_eigen_check, cylinder_kmatrix_full,
    cylinder_loop_poly, cylinder_pgf, cylinder_pgf_asymptotic, effective_tau, finite_chordal_probability,
    finite_two_point_expectation, halfplane_F, halfplane_green_real, halfplane_greens, potential_kernel,
    two_point_loop_expectation, two_point_riemann_sum,
)
from core.kasteleyn_module import kasteleyn_signs
from core.lattice_module import build_grid_region, region_graph

CONTINUUM_I_2I = 4 / np.pi ** 2 * np.log(3)


def test_cylinder_product_formula():
    """det полной матрицы = (−1)^m ∏ (λ − α^{2n})(λ − β^{2n})/λ"""
    for n, m in ((1, 1), (1, 2), (3, 1), (3, 2)):
        for lam in (1.3, -0.7, 0.6 + 0.8j):
            full = np.linalg.det(cylinder_kmatrix_full(n, m, lam))
            formula = (-1) ** m * cylinder_detK(n, m, lam)
            assert abs(full - formula) <= 1e-8 * abs(formula), (n, m, lam)
    print("✅ Формула произведения для цилиндра")


def test_cylinder_eigenvectors():
    for k in range(6):
        for j in (1, 2):
            assert cylinder_eigen_check(3, 2, 1.3, k, j) < 1e-10
    print("✅ Собственные векторы цилиндра")


def test_cylinder_one_by_one():
    """(1,1): pair-measure даёт P(1) = 1/2, trace-marking даёт 1/3"""
    assert abs(cylinder_pgf(1, 1, "pair-measure").coefficient(1) - 0.5) < 1e-12
    assert abs(cylinder_pgf(1, 1, "trace-marking").coefficient(1) - 1 / 3) < 1e-12
    print("✅ Два соглашения для цилиндра 1×1")


def test_pgf_nodes_agree():
    roots = cylinder_loop_poly(5, 6, "roots").coeffs
    product = cylinder_loop_poly(5, 6, "product").coeffs
    chebyshev = cylinder_loop_poly(5, 6, "chebyshev").coeffs
    assert np.allclose(roots, product, atol=1e-10)
    assert np.allclose(chebyshev, product, atol=1e-8)
    print("✅ Узлы интерполяции согласованы")


def test_pgf_is_distribution():
    for n, m in ((3, 2), (51, 50), (51, 153)):
        for conv in ("pair-measure", "trace-marking"):
            assert cylinder_pgf(n, m, conv).is_pgf(1e-10)
    print("✅ Коэффициенты неотрицательны и дают сумму 1")


def test_asymptotic_agreement():
    """n=51, m=50, τ=1: конечный размер против q-произведения при k ≤ 5"""
    finite = cylinder_pgf(51, 50, "trace-marking")
    asym = cylinder_pgf_asymptotic(effective_tau(51, 50), 50, k_max=40)
    assert abs(effective_tau(51, 50) - 1.0) < 1e-15
    assert asym.is_pgf(1e-8)
    diff = max(abs(finite.coefficient(k) - asym.coeffs[k]) for k in range(6))
    assert diff < 1e-3, diff
    print("✅ Конечный цилиндр близок к q-произведению")


def test_even_n_rejected():
    try:
        cylinder_detK(2, 1, 1.0)
    except ExactError:
        print("✅ Чётное n отклонено")
        return
    assert False, "Ожидалась ExactError"


def test_continuum_two_point():
    value = two_point_loop_expectation(1j, 2j, "continuum")
    assert abs(value - CONTINUUM_I_2I) < 1e-12
    assert abs(value - 0.4452507899) < 1e-9
    green = 8 / np.pi * halfplane_greens(1j, 2j, "dirichlet").real
    assert abs(value - green) < 1e-12
    print("✅ Предельное значение (4/π²)·ln 3")


def test_riemann_sums_converge():
    errors = []
    for eps in (1 / 16, 1 / 32, 1 / 64):
        res = two_point_riemann_sum(1j, 2j, eps)
        errors.append(abs(res.value - res.continuum))
    assert errors[0] > errors[1] > errors[2], errors
    assert errors[-1] / CONTINUUM_I_2I < 0.05
    print("✅ Суммы Римана сходятся к пределу")


def test_halfplane_greens():
    """Дирихле: Re g̃ = 0 на границе и симметрична"""
    u, v = 0.3 + 1.1j, -0.4 + 0.5j
    assert abs(halfplane_greens(u, v).real - halfplane_greens(v, u).real) < 1e-12
    assert abs(halfplane_greens(0.7 + 1e-12j, v).real) < 1e-9
    print("✅ Функция Грина полуплоскости")


def test_potential_kernel():
    assert abs(potential_kernel(1, 0) - 0.25) < 1e-6
    assert abs(potential_kernel(0, 1) - 0.25) < 1e-6
    assert potential_kernel(0, 0) == 0.0
    print("✅ Ядро потенциала a(1,0) = 1/4")


def test_chordal_probability():
    assert abs(chordal_left_probability(-1, 1, 1j) - 0.5) < 1e-12
    assert abs(chordal_left_probability(-1, 1, 0.3 + 1e-12j) - 1) < 1e-9
    assert abs(chordal_left_probability(-1, 1, 2.5 + 1e-12j)) < 1e-9
    p = chordal_left_probability(-1, 1, 0.2 + 0.7j)
    assert 0 < p < 1
    print("✅ Хордовая вероятность")


def test_finite_chordal_probability():
    """Сетка 4×4: сумма по рёбрам молнии против перебора пар покрытий G и G∖{b, w}"""
    g = region_graph(build_grid_region(4, 4))
    sw = kasteleyn_signs(g)
    by_pos = {v.pos: v.id for v in g.vertices}
    cases = [(complex(1, 3), complex(0, 3), complex(1.5, 1.5)),
             (complex(3, 1), complex(3, 2), complex(1.5, 1.5)),
             (complex(3, 1), complex(3, 2), complex(0.5, 1.5))]
    for b_pos, w_pos, face in cases:
        b, w = by_pos[b_pos], by_pos[w_pos]
        z = ray_zipper(g, face, "down", IDENTITY)
        p = finite_chordal_probability(g, sw, b, w, z)
        exact = chordal_separation_exact(g, b, w, z.edges)
        assert abs(p - exact) < 1e-10, (b_pos, w_pos, face, p, exact)
    assert 0 < finite_chordal_probability(g, sw, by_pos[complex(3, 1)], by_pos[complex(3, 2)],
                                          ray_zipper(g, complex(1.5, 1.5), "down", IDENTITY)) < 1
    print("✅ Хордовая вероятность на конечном графе")


def test_finite_chordal_rejects_interior_end():
    g = region_graph(build_grid_region(4, 4))
    by_pos = {v.pos: v.id for v in g.vertices}
    z = ray_zipper(g, complex(1.5, 1.5), "down", IDENTITY)
    try:
        finite_chordal_probability(g, kasteleyn_signs(g), by_pos[complex(1, 1)], by_pos[complex(0, 3)], z)
    except ExactError:
        print("✅ Внутренний конец пути отклонён")
        return
    assert False, "Ожидалась ExactError"


def test_finite_two_point_expectation():
    """Две молнии на сетке 6×7: среднее число общих окружающих циклов в (0, 1)"""
    g = region_graph(build_grid_region(6, 7))
    z1 = ray_zipper(g, complex(2.5, 2.5), "down", IDENTITY)
    z2 = ray_zipper(g, complex(2.5, 4.5), "up", IDENTITY)
    value = finite_two_point_expectation(g, kasteleyn_signs(g), z1, z2)
    assert 0 < value < 1, value
    print("✅ Точное среднее на конечном графе")


def test_halfplane_derivatives():
    """F₊ = ∂g̃/∂u и F₋ = ∂g̃/∂ū против центральных разностей"""
    u, v, h = 0.4 + 1.3j, -0.2 + 0.6j, 1e-6
    for kind in ("dirichlet", "neumann"):
        gx = (halfplane_greens(u + h, v, kind) - halfplane_greens(u - h, v, kind)) / (2 * h)
        gy = (halfplane_greens(u + 1j * h, v, kind) - halfplane_greens(u - 1j * h, v, kind)) / (2 * h)
        f_plus, f_minus, f_dagger = halfplane_F(u, v, kind)
        assert abs(f_plus - (gx - 1j * gy) / 2) < 1e-7
        assert abs(f_minus - (gx + 1j * gy) / 2) < 1e-7
        assert f_dagger == 0
    hol, anti = halfplane_green_real(u.real, u.imag, v)
    assert abs(hol + anti - halfplane_greens(u, v).real) < 1e-12
    print("✅ Производные функции Грина полуплоскости")


if __name__ == "__main__":
    print("🧪 Тесты точных формул")
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
