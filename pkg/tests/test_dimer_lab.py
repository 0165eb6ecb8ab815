#!/usr/bin/env python3
"""
Тесты лаборатории экспериментов и командной строки qdimer
"""

import sys
import os
import json
import tempfile
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.lattice_module import SurfaceTag, load_graph
from dimer_lab import DimerLab, build_graph, connection_zippers, surface_zippers


def _lab():
    return DimerLab(data_dir=tempfile.mkdtemp(prefix="qdimer-test-"), workers=2)


def _load(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def test_build_graph_kinds():
    g = build_graph({"kind": "region", "cols": 3, "rows": 3})
    assert g.n_vertices == 24
    g = build_graph({"kind": "grid", "cols": 2, "rows": 3})
    assert g.n_vertices == 6
    g = build_graph({"kind": "cylinder", "n": 3, "m": 2})
    assert g.surface is SurfaceTag.CYLINDER
    assert len(surface_zippers(g)) == 1
    g = build_graph({"kind": "grid", "cols": 4, "rows": 4})
    assert surface_zippers(g) == [] and len(connection_zippers(g)) == 1
    print("✅ Построение графов по описанию")


def test_settings_merge():
    lab = _lab()
    try:
        s = lab.settings("haar", n=5, seed=99)
        assert s.seed == 99 and s.params["n"] == 5 and s.params["m"] == 2
        assert s.tolerance("haar_quadrature") == 1e-8
        s = lab.settings("haar")
        assert s.params["n"] == 3
    finally:
        lab.stop()
    print("✅ Слияние настроек")


def test_config_file_overrides():
    tmp = tempfile.mkdtemp(prefix="qdimer-test-")
    path = os.path.join(tmp, "override.yaml")
    with open(path, "w", encoding="utf-8") as f:
        f.write("tolerances:\n  kernel: 1.0e-4\nexperiments:\n  haar:\n    m: 3\n")
    lab = DimerLab(data_dir=tmp, config_path=path, workers=1)
    try:
        s = lab.settings("haar")
        assert s.params["m"] == 3 and s.params["n"] == 3
        assert s.tolerance("kernel") == 1e-4
        assert not any("ConfigFile" in e for e in lab.initialization_errors)
    finally:
        lab.stop()
    print("✅ Файл --config перекрывает значения по умолчанию")


def test_run_graph():
    lab = _lab()
    try:
        out = os.path.join(lab.data_dir, "graphs", "region.json")
        report = lab.run_graph(kind="region", out=out)
        assert report.passed, report.failed_checks()
        assert load_graph(out).n_vertices == 24
        assert report.get_metric("graph/dimer_covers").target == 192.0
        saved = _load(os.path.splitext(out)[0] + ".report.json")
        assert saved["passed"] and "wall_time" not in saved
    finally:
        lab.stop()
    print("✅ qdimer graph")


def test_run_sample():
    lab = _lab()
    try:
        out = os.path.join(lab.data_dir, "samples.jsonl")
        report = lab.run_sample(n=400, seed=21, out=out)
        assert report.passed, report.failed_checks()
        with open(out, "r", encoding="utf-8") as f:
            assert sum(1 for _ in f) == 400
        assert report.get_metric("sample/exact_mean_loops").value == 0.5
    finally:
        lab.stop()
    print("✅ qdimer sample")


def test_run_verify_pfaffian():
    lab = _lab()
    try:
        report = lab.run_verify("pfaffian", seed=5)
        assert report.passed, report.failed_checks()
        assert report.experiment == "verify-pfaffian"
    finally:
        lab.stop()
    print("✅ qdimer verify pfaffian")


def test_run_verify_unknown_suite():
    lab = _lab()
    try:
        lab.run_verify("nonsense")
    except ValueError:
        print("✅ Неизвестный набор отклонён")
        return
    finally:
        lab.stop()
    assert False, "Ожидалась ValueError"


def test_run_cylinder():
    lab = _lab()
    try:
        out = os.path.join(lab.data_dir, "cyl.csv")
        report = lab.run_cylinder(n=51, m=50, inv_tau_grid=[0.5, 1.0], out=out)
        assert report.passed, report.failed_checks()
        assert os.path.exists(out)
        assert abs(report.get_metric("cylinder/P1/1x1").value - 0.5) < 1e-12
        effective = report.get_metric("cylinder/asymptotic_diff/51x50").value
        literal = report.get_metric("cylinder/literal_tau_diff/51x50")
        assert literal.target is None
        assert literal.value > 10 * effective
        assert not any(c.name.startswith("cylinder/literal") for c in report.checks)
    finally:
        lab.stop()
    print("✅ qdimer cylinder")


def test_run_twopoint():
    lab = _lab()
    try:
        report = lab.run_twopoint(z1=1j, z2=2j, mc=False)
        assert report.passed, report.failed_checks()
        assert abs(report.get_metric("twopoint/continuum").value - 0.4452507899) < 1e-9
        chordal = report.get_metric("chordal/finite")
        assert 0 < chordal.value < 1 and abs(chordal.value - chordal.target) < 1e-9
    finally:
        lab.stop()
    print("✅ qdimer twopoint")


def test_run_haar():
    lab = _lab()
    try:
        report = lab.run_haar(n=3, m=2, mode="quadrature")
        assert report.passed, report.failed_checks()
        total = sum(report.get_metric(f"haar/P{k}").value for k in range(3))
        assert abs(total - 1) < 1e-8
    finally:
        lab.stop()
    print("✅ qdimer haar")


def test_run_haar_mc():
    """Монте-Карло: многочлен от tr U восстанавливается точно, проверка не падает на округлении"""
    lab = _lab()
    try:
        report = lab.run_haar(n=3, m=2, mode="mc", samples=20000, seed=7)
        assert report.passed, report.failed_checks()
        p1 = report.get_metric("haar/P1")
        assert abs(p1.value - p1.target) < 1e-8
    finally:
        lab.stop()
    print("✅ qdimer haar, Монте-Карло")


def test_report_reproducible():
    """Два запуска с одним зерном дают побайтно одинаковый отчёт"""
    lab = _lab()
    try:
        path = os.path.join(lab.data_dir, "verify.json")
        contents = []
        for _ in range(2):
            lab.run_verify("pfaffian", seed=7, out=path)
            with open(path, "rb") as f:
                contents.append(f.read())
        assert contents[0] == contents[1]
    finally:
        lab.stop()
    print("✅ Отчёт воспроизводим")


def test_cli_verify():
    from apps.cli.qdimer import main
    tmp = tempfile.mkdtemp(prefix="qdimer-test-")
    out = os.path.join(tmp, "verify.json")
    assert main(["verify", "pfaffian", "--data-dir", tmp, "--out", out, "--seed", "3"]) == 0
    assert _load(out)["passed"]
    print("✅ Командная строка: verify")


def test_cli_missing_config():
    from apps.cli.qdimer import main
    try:
        main(["verify", "pfaffian", "--config", "/nonexistent/qdimer.yaml"])
    except SystemExit as e:
        assert e.code == 2
        print("✅ Отсутствующий файл настроек отклонён")
        return
    assert False, "Ожидался SystemExit"


if __name__ == "__main__":
    print("🧪 Тесты лаборатории qdimer")
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
