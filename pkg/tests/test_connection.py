#!/usr/bin/env python3
"""
Тесты связностей: молнии, монодромия, калибровки, путь связностей
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np

from core.connection_module import (
    IDENTITY, ZipperError, antidiagonal, axial_zipper, check_flat, connection_from_dict, connection_from_zippers,
    connection_path, connection_to_dict, diagonal, face_monodromy, gauge_transform, is_sl2, make_zipper,
    monodromy, monodromy_along_edges, path_derivative, perturbed, q_conjugate, random_sl2_near_identity,
    random_su2, ray_zipper, sl2_inverse, trivial_connection,
)
from core.lattice_module import build_grid_region, cylinder_graph, face_containing, region_graph


def test_q_conjugate():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    assert np.allclose(A @ q_conjugate(A), np.linalg.det(A) * IDENTITY)
    print("✅ A·A* = det A · I")


def test_random_su2():
    rng = np.random.default_rng(2)
    U = random_su2(rng, 50)
    for u in U:
        assert is_sl2(u)
        assert np.allclose(u @ u.conj().T, IDENTITY)
    assert is_sl2(random_sl2_near_identity(rng))
    print("✅ Случайные SU(2) и SL2 матрицы")


def test_ray_zipper_monodromy():
    """Монодромия вокруг проколотой грани сопряжена A, остальные грани плоские"""
    g = region_graph(build_grid_region(4, 4))
    A = random_su2(np.random.default_rng(3))
    z = ray_zipper(g, complex(1.5, 1.5), "down", A)
    assert z.target_face == face_containing(g, complex(1.5, 1.5))
    assert len(z.edges) == 2
    conn = connection_from_zippers(g, [z])
    M = face_monodromy(conn, z.target_face)
    assert abs(np.trace(M) - np.trace(A)) < 1e-12
    ok, worst, _ = check_flat(conn)
    assert ok, worst
    print("✅ Монодромия молнии")


def test_zipper_requires_sl2():
    g = region_graph(build_grid_region(3, 3))
    try:
        ray_zipper(g, complex(0.5, 0.5), "down", 2 * IDENTITY)
    except ZipperError:
        print("✅ Матрица с det ≠ 1 отклонена")
        return
    assert False, "Ожидалась ZipperError"


def test_axial_zipper():
    g = cylinder_graph(3, 2)
    z = axial_zipper(g, diagonal(1.5))
    assert len(z.edges) == 2
    conn = connection_from_zippers(g, [z])
    assert check_flat(conn)[0]
    print("✅ Осевая молния цилиндра")


def test_gauge_preserves_traces():
    g = region_graph(build_grid_region(4, 4))
    rng = np.random.default_rng(4)
    z = ray_zipper(g, complex(1.5, 1.5), "down", random_su2(rng))
    conn = connection_from_zippers(g, [z])
    psi = {v.id: random_su2(rng) for v in g.vertices}
    gauged = gauge_transform(conn, psi)
    for f in g.interior_faces():
        before = np.trace(face_monodromy(conn, f.id))
        after = np.trace(face_monodromy(gauged, f.id))
        assert abs(before - after) < 1e-9
    assert check_flat(gauged)[0]
    print("✅ Калибровка сохраняет следы монодромий")


def test_gauge_requires_all_vertices():
    g = region_graph(build_grid_region(2, 2))
    try:
        gauge_transform(trivial_connection(g), {0: IDENTITY})
    except ZipperError:
        print("✅ Неполная калибровка отклонена")
        return
    assert False, "Ожидалась ZipperError"


def test_connection_path():
    g = cylinder_graph(3, 1)
    rng = np.random.default_rng(5)
    target = random_sl2_near_identity(rng, 0.4)
    conn = connection_from_zippers(g, [axial_zipper(g, IDENTITY)])
    assert np.allclose(connection_path(conn, 0.0, [target]).zippers[0].matrix, IDENTITY)
    assert np.allclose(connection_path(conn, 1.0, [target]).zippers[0].matrix, target)
    t, h = 0.3, 1e-6
    fd = (connection_path(conn, t + h, [target]).zippers[0].matrix
          - connection_path(conn, t - h, [target]).zippers[0].matrix) / (2 * h)
    assert np.allclose(path_derivative(conn, t, [target])[0], fd, atol=1e-7)
    print("✅ Путь связностей и его производная")


def test_connection_dict():
    g = region_graph(build_grid_region(3, 3))
    A = random_su2(np.random.default_rng(6))
    conn = connection_from_zippers(g, [ray_zipper(g, complex(1.5, 1.5), "down", A)])
    restored = connection_from_dict(g, connection_to_dict(conn))
    assert restored.zippers[0].edges == conn.zippers[0].edges
    assert np.allclose(restored.zippers[0].matrix, A)
    print("✅ Связность в JSON и обратно")


def test_make_zipper_matches_ray():
    g = region_graph(build_grid_region(4, 4))
    A = random_su2(np.random.default_rng(16))
    ray = ray_zipper(g, complex(1.5, 1.5), "down", A)
    z = make_zipper(g, ray.start_face, ray.edges, A)
    assert z.edges == ray.edges and z.left == ray.left
    assert z.target_face == ray.target_face
    print("✅ Молния по явному пути")


def test_vertex_cycle_monodromy():
    """Обход вершин вокруг проколотой грани даёт тот же след"""
    g = region_graph(build_grid_region(4, 4))
    A = diagonal(1.5)
    conn = connection_from_zippers(g, [ray_zipper(g, complex(1.5, 1.5), "down", A)])
    by_pos = {v.pos: v.id for v in g.vertices}
    cycle = [by_pos[complex(1, 1)], by_pos[complex(2, 1)], by_pos[complex(2, 2)], by_pos[complex(1, 2)]]
    assert abs(np.trace(monodromy(conn, cycle)) - np.trace(A)) < 1e-12
    assert np.allclose(monodromy(trivial_connection(g), cycle), IDENTITY)
    print("✅ Монодромия вдоль вершинного цикла")


def test_multigraph_monodromy():
    """Цилиндр 1×1: две параллельные дуги, путь задаётся рёбрами"""
    g = cylinder_graph(1, 1)
    A = diagonal(1.5)
    conn = connection_from_zippers(g, [axial_zipper(g, A)])
    e = g.edges[0]
    ids = g.edges_between(e.u, e.v)
    assert len(ids) == 2
    M = monodromy_along_edges(conn, e.u, ids)
    assert abs(np.trace(M) - (1.5 + 1 / 1.5)) < 1e-12
    try:
        monodromy_along_edges(conn, e.u, ids[:1])
    except ZipperError:
        print("✅ Монодромия на кратных рёбрах")
        return
    assert False, "Ожидалась ZipperError для незамкнутого пути"


def test_perturbed_not_flat():
    g = region_graph(build_grid_region(3, 3))
    conn = perturbed(trivial_connection(g), 0, diagonal(2.0))
    ok, worst, _ = check_flat(conn)
    assert not ok and worst > 0.5
    print("✅ Возмущённое ребро нарушает плоскость")


def test_matrix_helpers():
    B = antidiagonal(0.7 + 0.2j)
    assert is_sl2(B) and not is_sl2(2 * IDENTITY)
    assert np.allclose(B @ sl2_inverse(B), IDENTITY)
    print("✅ Вспомогательные матрицы SL2")


if __name__ == "__main__":
    print("🧪 Тесты связностей")
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
