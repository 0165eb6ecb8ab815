#!/usr/bin/env python3
"""
Тесты матрицы Кастелейна: знаки, Qdet тремя способами, обратная,
производная log det вдоль пути связностей
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
from scipy.linalg import expm

from core.connection_module import (
    IDENTITY, axial_zipper, connection_from_zippers, diagonal, path_derivative, q_conjugate,
    random_sl2_near_identity, random_su2, ray_zipper, trivial_connection,
)
from core.enumeration_module import diagonal_encoding, partition_oracle, single_dimer_partition
from core.kasteleyn_module import (
    KasteleynError, assemble, check_face_rule, cover_phase, inverse, kasteleyn_signs, kmatrix_from_doubled,
    kmatrix_to_dict, logdet_derivative, logdet_finite_difference, path_perturbation, pfaffian, q_conjugate_blocks,
    qdet, qdet_all_routes, random_self_dual, route_disagreement, scalar_kasteleyn_matrix, self_duality_defect,
    zipper_edge_contribution, zipper_perturbation,
)
from core.lattice_module import build_grid_region, cylinder_graph, region_graph, temperleyan_graph


def test_face_rule():
    graphs = [temperleyan_graph(build_grid_region(3, 3)), region_graph(build_grid_region(4, 4)),
              cylinder_graph(3, 2)]
    for g in graphs:
        ok, worst, _ = check_face_rule(g, kasteleyn_signs(g))
        assert ok, f"{g.name}: {worst}"
    print("✅ Правило знаков на всех ограниченных гранях")


def test_classical_counts():
    """|det K_0| = число покрытий: 2, 3, 36 для сеток и 192 для Темперли 3×3"""
    for cols, rows, expected in ((2, 2, 2), (2, 3, 3), (4, 4, 36)):
        g = region_graph(build_grid_region(cols, rows))
        d = abs(np.linalg.det(scalar_kasteleyn_matrix(g, kasteleyn_signs(g))))
        assert abs(d - expected) < 1e-9, (cols, rows, d)
    g = temperleyan_graph(build_grid_region(3, 3))
    assert abs(abs(np.linalg.det(scalar_kasteleyn_matrix(g, kasteleyn_signs(g)))) - 192) < 1e-8
    print("✅ Классические числа покрытий")


def test_pfaffian_small():
    a = 1.3 - 0.2j
    assert abs(pfaffian(np.array([[0, a], [-a, 0]])) - a) < 1e-14
    rng = np.random.default_rng(7)
    x = rng.standard_normal(6)
    A = np.zeros((4, 4))
    for (i, j), v in zip(((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)), x):
        A[i, j], A[j, i] = v, -v
    expected = A[0, 1] * A[2, 3] - A[0, 2] * A[1, 3] + A[0, 3] * A[1, 2]
    assert abs(pfaffian(A) - expected) < 1e-12
    B = rng.standard_normal((8, 8))
    B = B - B.T
    assert abs(pfaffian(B) ** 2 - np.linalg.det(B)) < 1e-8 * max(1.0, abs(np.linalg.det(B)))
    print("✅ Пфаффиан малых матриц")


def test_pfaffian_rejects_non_skew():
    try:
        pfaffian(np.eye(2))
    except KasteleynError:
        print("✅ Не кососимметричная матрица отклонена")
        return
    assert False, "Ожидалась KasteleynError"


def test_qdet_trivial_is_square():
    """Тривиальная связность: Qdet = (число покрытий)²"""
    g = region_graph(build_grid_region(2, 2))
    K = assemble(g, kasteleyn_signs(g), trivial_connection(g))
    assert abs(qdet(K).value - 4) < 1e-10
    g = temperleyan_graph(build_grid_region(2, 2))
    K = assemble(g, kasteleyn_signs(g), trivial_connection(g))
    assert abs(qdet(K).value - 16) < 1e-9
    print("✅ Qdet тривиальной связности")


def test_qdet_cylinder_diagonal():
    """Цилиндр 1×1 с diag(λ, 1/λ): Qdet = (λ+1)²/λ"""
    lam = 1.7
    g = cylinder_graph(1, 1)
    conn = connection_from_zippers(g, [axial_zipper(g, diagonal(lam))])
    value = qdet(assemble(g, kasteleyn_signs(g), conn)).value
    assert abs(value - (lam + 1) ** 2 / lam) < 1e-10, value
    print("✅ Qdet цилиндра 1×1")


def test_qdet_matches_oracle():
    rng = np.random.default_rng(8)
    for g in (region_graph(build_grid_region(2, 3)), cylinder_graph(3, 1)):
        sw = kasteleyn_signs(g)
        for _ in range(3):
            if g.name.startswith("cylinder"):
                z = axial_zipper(g, random_su2(rng))
            else:
                z = ray_zipper(g, complex(0.5, 1.5), "down", random_su2(rng))
            conn = connection_from_zippers(g, [z])
            K = assemble(g, sw, conn)
            oracle = partition_oracle(g, None, conn).Z
            assert abs(qdet(K).value - oracle) <= 1e-9 * abs(oracle)
            assert route_disagreement(qdet_all_routes(K)) < 1e-9
            assert self_duality_defect(K) < 1e-12
    print("✅ Qdet совпадает с перебором")


def test_diagonal_factorization():
    """Диагональная связность: Z_dd = Z(ν₁)·Z(ν₂)"""
    g = region_graph(build_grid_region(2, 3))
    conn = connection_from_zippers(g, [ray_zipper(g, complex(0.5, 1.5), "down", diagonal(2.0))])
    nu1, nu2 = diagonal_encoding(g, None, conn)
    product = single_dimer_partition(g, nu1) * single_dimer_partition(g, nu2)
    assert abs(partition_oracle(g, None, conn).Z - product) < 1e-10
    print("✅ Факторизация для диагональной связности")


def test_random_self_dual_routes():
    rng = np.random.default_rng(9)
    for n in range(1, 6):
        K = random_self_dual(rng, n)
        assert self_duality_defect(K) < 1e-12
        assert route_disagreement(qdet_all_routes(K)) < 1e-9
    print("✅ Способы Qdet согласованы на случайных матрицах")


def test_inverse_self_dual():
    g = temperleyan_graph(build_grid_region(3, 3))
    rng = np.random.default_rng(10)
    conn = connection_from_zippers(g, [ray_zipper(g, complex(1.5, 1.5), "down", random_su2(rng))])
    K = assemble(g, kasteleyn_signs(g), conn)
    kinv = inverse(K)
    assert np.allclose(kinv.doubled @ K.doubled, np.eye(2 * K.n), atol=1e-10)
    assert self_duality_defect(kinv) < 1e-10
    print("✅ Обратная матрица самодвойственна")


def test_q_conjugate_blocks():
    """Блок (u,v) матрицы K* равен сопряжению блока (v,u); несамодвойственная матрица ловится"""
    g = region_graph(build_grid_region(2, 3))
    rng = np.random.default_rng(18)
    conn = connection_from_zippers(g, [ray_zipper(g, complex(0.5, 1.5), "down", random_su2(rng))])
    K = assemble(g, kasteleyn_signs(g), conn)
    star = q_conjugate_blocks(K)
    for i in range(K.n):
        for j in range(K.n):
            expected = q_conjugate(K.doubled[2 * j:2 * j + 2, 2 * i:2 * i + 2])
            assert np.allclose(star[2 * i:2 * i + 2, 2 * j:2 * j + 2], expected)
    assert np.allclose(star, K.doubled)
    doubled = K.doubled.copy()
    doubled[0, 0] += 1
    broken = kmatrix_from_doubled(doubled)
    assert self_duality_defect(broken) > 0.5
    print("✅ Кватернионное сопряжение блоков")


def test_logdet_derivative():
    """Производная log det против центральной разности и сумма вкладов рёбер"""
    rng = np.random.default_rng(11)
    g = cylinder_graph(3, 2)
    sw = kasteleyn_signs(g)
    conn = connection_from_zippers(g, [axial_zipper(g, IDENTITY)])
    targets = [random_sl2_near_identity(rng, 0.4)]
    t = 0.5
    conn_t, S = path_perturbation(g, sw, conn, targets, t)
    K_t = assemble(g, sw, conn_t)
    kinv = inverse(K_t)
    d = logdet_derivative(K_t, S, kinv)
    fd = logdet_finite_difference(g, sw, conn, targets, t)
    assert abs(d - fd) <= 1e-6 * max(abs(d), 1.0)

    dA = path_derivative(conn, t, targets)[0]
    z = conn_t.zippers[0]
    total = sum(np.trace(zipper_edge_contribution(K_t, z, k, sw, dA, kinv)) for k in range(len(z.edges)))
    assert abs(total - d) < 1e-9 * max(abs(d), 1.0)
    assert logdet_derivative(K_t, np.zeros_like(S)) == 0
    print("✅ Производная log det")


def test_zipper_perturbation():
    """S совпадает с центральной разностью K вдоль A·exp(hX)"""
    g = cylinder_graph(3, 1)
    sw = kasteleyn_signs(g)
    rng = np.random.default_rng(17)
    A = random_su2(rng)
    X = np.array([[0.3, 0.2 - 0.1j], [0.5j, -0.3]])
    z = axial_zipper(g, A)
    h = 1e-6

    def doubled(M):
        return assemble(g, sw, connection_from_zippers(g, [z.with_matrix(M)])).doubled

    fd = (doubled(A @ expm(h * X)) - doubled(A @ expm(-h * X))) / (2 * h)
    S = zipper_perturbation(g, sw, z, A @ X)
    assert np.allclose(S, fd, atol=1e-7)
    print("✅ Возмущение матрицы молнии")


def test_kmatrix_export():
    g = region_graph(build_grid_region(2, 2))
    sw = kasteleyn_signs(g)
    K = assemble(g, sw, trivial_connection(g))
    data = kmatrix_to_dict(K)
    assert len(data["doubled"]) == 2 * K.n and len(data["doubled"][0][0]) == 2
    assert abs(abs(cover_phase(g, sw)) - 1) < 1e-12
    print("✅ Экспорт матрицы и фаза опорного покрытия")


if __name__ == "__main__":
    print("🧪 Тесты матрицы Кастелейна")
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
