#!/usr/bin/env python3
"""
Тесты решёток: области, граф Темперли, цилиндр, проверка вложения
"""

import sys
import os
import tempfile
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.lattice_module import (
    FaceKind, LatticeError, SurfaceTag, build_grid_region, count_rooted_spanning_trees, cylinder_graph,
    face_containing, graph_from_dict, graph_to_dict, load_graph, region_graph, save_graph, temperleyan_graph,
    validate_embedding,
)


def test_grid_region_counts():
    """Область 3×3: вершины, рёбра, грани"""
    region = build_grid_region(3, 3)
    assert len(region.vertices) == 9
    assert len(region.edges) == 12
    assert len(region.faces) == 4
    assert region.root == (0, 0)
    print("✅ Область 3×3 построена корректно")


def test_temperleyan_balanced():
    """Граф Темперли 3×3: 8 + 4 чёрных, 12 белых"""
    g = temperleyan_graph(build_grid_region(3, 3))
    classes = [v.cls for v in g.vertices]
    assert classes.count("B0") == 8
    assert classes.count("B1") == 4
    assert classes.count("W0") + classes.count("W1") == 12
    assert g.is_bipartite
    assert len(g.whites()) == len(g.blacks())
    assert g.surface is SurfaceTag.DISK
    print("✅ Граф Темперли сбалансирован")


def test_temperleyan_with_hole():
    """Дыра в области 5×5: удалено ребро e_1, баланс сохраняется"""
    region = build_grid_region(5, 5, holes=[(1, 1, 3, 3)])
    assert (2, 2) not in region.vertices
    assert len(region.removed_edges) == 1
    a, b = region.removed_edges[0]
    assert a[1] == b[1] == 3
    g = temperleyan_graph(region)
    assert g.surface is SurfaceTag.MULTIPLY_CONNECTED
    assert len(g.whites()) == len(g.blacks())
    assert sum(1 for f in g.faces if f.kind is FaceKind.HOLE) == 1
    assert validate_embedding(g).passed
    print("✅ Область с дырой корректна")


def test_bad_hole_rejected():
    try:
        build_grid_region(4, 4, holes=[(0, 1, 2, 2)])
    except LatticeError:
        print("✅ Дыра на границе отклонена")
        return
    assert False, "Ожидалась LatticeError"


def test_spanning_trees():
    """Остовные деревья: 2×2 даёт 4, 3×3 даёт 192"""
    assert count_rooted_spanning_trees(build_grid_region(2, 2)) == 4
    assert count_rooted_spanning_trees(build_grid_region(3, 3)) == 192
    print("✅ Числа остовных деревьев совпадают")


def test_cylinder_graph():
    g = cylinder_graph(3, 2)
    assert g.n_vertices == 12
    assert g.n_edges == 18
    assert len(g.interior_faces()) == 6
    assert g.surface is SurfaceTag.CYLINDER
    diag = validate_embedding(g)
    assert diag.passed, diag.failure
    assert diag.details["euler_characteristic"] == 0
    print("✅ Цилиндр 3×2 корректен")


def test_cylinder_even_n_rejected():
    try:
        cylinder_graph(2, 2)
    except LatticeError:
        print("✅ Чётное n отклонено")
        return
    assert False, "Ожидалась LatticeError"


def test_embedding_euler():
    for g in (region_graph(build_grid_region(4, 3)), temperleyan_graph(build_grid_region(4, 4))):
        diag = validate_embedding(g)
        assert diag.passed, diag.failure
        assert diag.details["euler_characteristic"] == 1
    print("✅ Эйлерова характеристика диска равна 1")


def test_face_containing():
    g = region_graph(build_grid_region(3, 3))
    fid = face_containing(g, complex(1.5, 0.5))
    poly = g.face_polygon(fid)
    assert min(p.real for p in poly) == 1 and max(p.real for p in poly) == 2
    assert g.faces[face_containing(g, complex(10, 10))].kind is FaceKind.OUTER
    print("✅ Поиск грани по точке")


def test_save_load():
    g = temperleyan_graph(build_grid_region(3, 2))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "g.json")
        save_graph(g, path)
        loaded = load_graph(path)
    assert loaded.fingerprint() == g.fingerprint()
    assert [v.cls for v in loaded.vertices] == [v.cls for v in g.vertices]
    print("✅ Граф сохраняется и загружается")


def test_dict_roundtrip_cylinder():
    """Кратные рёбра цилиндра 1×1 переживают словарь"""
    g = cylinder_graph(1, 1)
    restored = graph_from_dict(graph_to_dict(g))
    assert restored.surface is SurfaceTag.CYLINDER
    assert restored.n_edges == 2 and restored.fingerprint() == g.fingerprint()
    assert validate_embedding(restored).passed
    print("✅ Граф в словарь и обратно")


def test_dict_roundtrip_lossless():
    """Словарь хранит граф целиком: восстановленный граф равен исходному"""
    graphs = [region_graph(build_grid_region(5, 5, holes=[(1, 1, 3, 3)])),
              temperleyan_graph(build_grid_region(3, 3)), cylinder_graph(3, 2)]
    for g in graphs:
        data = graph_to_dict(g)
        restored = graph_from_dict(data)
        assert restored == g, g.name
        assert graph_to_dict(restored) == data
    print("✅ Сериализация графа без потерь")


if __name__ == "__main__":
    print("🧪 Тесты решёток")
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
