"""
Лаборатория двойных димеров: воспроизводимые эксперименты и проверки
кватернионного определителя Кастелейна
"""

import logging
import os
import sys
import time
from collections import Counter
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml
from rich.logging import RichHandler

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from config.config import Config
from core.connection_module import (
    IDENTITY, Connection, Zipper, ZipperError, axial_zipper, check_flat, connection_from_zippers,
    diagonal, gauge_transform, path_derivative, random_sl2_near_identity, random_su2, ray_zipper,
    trivial_connection, zipper_from_dict,
)
from core.enumeration_module import (
    chordal_separation_exact, config_to_dict, enumerate_dimer_covers, enumerate_double_dimer, partition_oracle,
    sample_double_dimer,
)
from core.enumeration_cache import enumeration_cache
from core.exact_module import (
    CONVENTIONS, chordal_left_probability, cylinder_detK, cylinder_eigen_check, cylinder_kmatrix_full,
    cylinder_pgf, cylinder_pgf_asymptotic, effective_tau, finite_chordal_probability, finite_two_point_expectation,
    halfplane_greens, mc_two_point_expectation, potential_kernel, two_point_loop_expectation, two_point_riemann_sum,
)
from core.green_module import (
    check_discrete_CR, discrete_green, kinv_via_green, scalar_inverse_table, section_from_kinv_column,
)
from core.kasteleyn_module import (
    assemble, check_face_rule, inverse, kasteleyn_signs, local_coupling_constants, logdet_derivative,
    logdet_finite_difference, path_perturbation, pfaffian, qdet, qdet_all_routes, random_self_dual,
    route_disagreement, scalar_kasteleyn_matrix, self_duality_defect, zipper_edge_contribution,
)
from core.lattice_module import (
    FaceKind, GridRegion, LatticeError, PlanarGraph, SurfaceTag, build_grid_region, count_rooted_spanning_trees,
    cylinder_graph, load_graph, region_from_spec, region_graph, save_graph, temperleyan_graph,
    validate_embedding,
)
from core.parallel_manager import parallel_manager
from core.report_module import (
    ExperimentConfig, Report, render_report, write_jsonl, write_report_json, write_table_csv,
)
from core.topology_module import (
    annotate_contractibility, catalan, haar_extract, mu0_lamination_distribution_exact, power_laminations,
    trace_moment,
)

SUITES = ("qdet-oracle", "gauge", "cr-greens", "pfaffian", "logdet")
_CONFIG_FIELDS = ("seed", "graph", "connection", "samples", "workers", "out")
# коэффициентов q-произведения для перенормировки
_ASYMPTOTIC_TERMS = 40


def setup_logging(data_dir: str = Config.DATA_DIR, level: str = Config.LOG_LEVEL) -> logging.Logger:
    """Настроить систему логирования: файл в каталоге данных и консоль rich"""
    try:
        os.makedirs(data_dir, exist_ok=True)
        log_file = Config.LOG_FILE or os.path.join(data_dir, "qdimer.log")

        logging.basicConfig(
            level=getattr(logging, str(level).upper(), logging.INFO),
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            handlers=[
                logging.FileHandler(log_file, encoding='utf-8'),
                RichHandler(show_path=False, rich_tracebacks=True),
            ],
            force=True,
        )
    except Exception as e:
        print(f"⚠️  Ошибка настройки логирования: {e}")
        logging.basicConfig(level=logging.INFO)
    return logging.getLogger("qdimer")


# --- графы и молнии ---

def build_graph(spec: Dict[str, Any]) -> PlanarGraph:
    """Граф по описанию: region (граф Темперли), grid (первичный граф), cylinder"""
    kind = spec.get("kind", "region")
    if kind == "cylinder":
        return cylinder_graph(int(spec["n"]), int(spec["m"]))
    region = region_from_spec(spec)
    if kind == "grid":
        return region_graph(region)
    if kind == "region":
        return temperleyan_graph(region)
    raise LatticeError(f"Неизвестный тип графа {kind}")


def load_spec(path: str) -> Dict[str, Any]:
    """Описание графа из JSON или YAML"""
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise LatticeError(f"Описание графа в {path} должно быть словарём")
    return data


def _centroid(g: PlanarGraph, fid: int) -> complex:
    return complex(np.mean(g.face_polygon(fid)))


def surface_zippers(g: PlanarGraph) -> List[Zipper]:
    """Молнии, порождающие фундаментальную группу: осевая на цилиндре, по одной на дыру"""
    if g.surface is SurfaceTag.CYLINDER:
        return [axial_zipper(g, IDENTITY)]
    holes = [f for f in g.faces if f.kind is FaceKind.HOLE]
    return [ray_zipper(g, _centroid(g, f.id), "down", IDENTITY) for f in holes]


def puncture_zipper(g: PlanarGraph, A: np.ndarray = IDENTITY) -> Zipper:
    """Молния от внешней грани к ограниченной грани у центра графа"""
    faces = g.interior_faces()
    if not faces:
        raise ZipperError(f"У графа {g.name} нет ограниченных граней")
    center = complex(np.mean([v.pos for v in g.vertices]))
    face = min(faces, key=lambda f: (round(abs(_centroid(g, f.id) - center), 9), f.id))
    return ray_zipper(g, _centroid(g, face.id), "down", A)


def connection_zippers(g: PlanarGraph) -> List[Zipper]:
    return surface_zippers(g) or [puncture_zipper(g)]


def connection_family(g: PlanarGraph, rng: np.random.Generator,
                      params: Dict[str, Any]) -> List[Tuple[str, Connection]]:
    """Тривиальная, диагональная и случайные SU(2)/SL2 связности на молниях графа"""
    zippers = connection_zippers(g)
    family = [("trivial", trivial_connection(g))]
    lam = float(params.get("diagonal_lambda", 1.7))
    family.append(("diagonal", connection_from_zippers(g, [z.with_matrix(diagonal(lam)) for z in zippers])))
    for i in range(int(params.get("random_su2", 5))):
        family.append((f"su2-{i}", connection_from_zippers(g, [z.with_matrix(random_su2(rng)) for z in zippers])))
    for i in range(int(params.get("random_sl2", 0))):
        family.append((f"sl2-{i}", connection_from_zippers(
            g, [z.with_matrix(random_sl2_near_identity(rng)) for z in zippers])))
    return family


def _white_edge(pos: complex) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    """Ребро области, серединой которого является белая вершина"""
    x2, y2 = int(round(pos.real * 2)), int(round(pos.imag * 2))
    if x2 % 2:
        return ((x2 - 1) // 2, y2 // 2), ((x2 + 1) // 2, y2 // 2)
    return (x2 // 2, (y2 - 1) // 2), (x2 // 2, (y2 + 1) // 2)


def _rel(a: complex, b: complex) -> float:
    return float(abs(a - b) / max(abs(b), 1e-300))


class DimerLab:
    """
    Оркестратор экспериментов qdimer

    Компоненты:
    - Конфигурация: experiments.yaml, файл --config, флаги запуска
    - Параллельность: пул потоков с детерминированным порядком
    - Кэш перебора: покрытия и двойные конфигурации по отпечатку графа
    - Отчёты: JSON (контракт), CSV, JSON lines и таблицы rich
    """

    def __init__(self, data_dir: str = Config.DATA_DIR, config_path: Optional[str] = None,
                 workers: Optional[int] = None):
        self.data_dir = data_dir
        self.config_path = config_path
        self.workers = workers or Config.THREADS
        self.initialization_errors: List[str] = []

        try:
            os.makedirs(data_dir, exist_ok=True)
            os.makedirs(os.path.join(data_dir, "reports"), exist_ok=True)
        except Exception as e:
            print(f"⚠️  Предупреждение: не удалось создать директории: {e}")

        self.logger = logging.getLogger(self.__class__.__name__)
        self.initialize_modules()

    def initialize_modules(self):
        """Инициализация компонентов с обработкой ошибок"""
        try:
            if not Config.validate_config():
                self.initialization_errors.append("Config: конфигурация с предупреждениями")
            self.experiments = Config.load_experiments()
            self.logger.debug("✅ Конфигурация экспериментов загружена")
        except Exception as e:
            self.logger.error(f"❌ Ошибка загрузки конфигурации: {e}")
            self.initialization_errors.append(f"Config: {e}")
            self.experiments = {}

        self.overrides: Dict[str, Any] = {}
        if self.config_path:
            try:
                if not os.path.exists(self.config_path):
                    raise FileNotFoundError(self.config_path)
                self.overrides = Config.load_experiments(self.config_path)
                self.logger.debug(f"✅ Файл настроек {self.config_path} загружен")
            except Exception as e:
                self.logger.error(f"❌ Ошибка чтения {self.config_path}: {e}")
                self.initialization_errors.append(f"ConfigFile: {e}")

        try:
            self.parallel = parallel_manager
            self.cache = enumeration_cache
            self.logger.debug(f"✅ Пул потоков: {self.parallel.max_workers}, кэш: {self.cache.max_size}")
        except Exception as e:
            self.logger.error(f"❌ Ошибка инициализации пула: {e}")
            self.initialization_errors.append(f"Parallel: {e}")

        if self.initialization_errors:
            self.logger.warning(f"Инициализация завершена с {len(self.initialization_errors)} ошибками")
            for error in self.initialization_errors:
                self.logger.warning(f"  - {error}")

    # --- настройки и отчёты ---

    def settings(self, name: str, **overrides) -> ExperimentConfig:
        """Слияние: experiments.yaml, затем --config, затем явные параметры"""
        merged = Config.get_experiment_defaults(name)
        file_tolerances = dict(self.overrides.get("tolerances") or {})
        section = (self.overrides.get("experiments") or {}).get(name) or {}
        merged.update(section)
        file_tolerances.update(merged.pop("tolerances", {}) or {})

        values: Dict[str, Any] = {"seed": Config.SEED, "workers": self.workers}
        params: Dict[str, Any] = {}
        for key, value in merged.items():
            (values if key in _CONFIG_FIELDS else params)[key] = value
        for key, value in overrides.items():
            if value is not None:
                (values if key in _CONFIG_FIELDS else params)[key] = value

        return ExperimentConfig(experiment=name, tolerances=Config.get_tolerances(file_tolerances),
                                params=params, **values)

    def _run(self, settings: ExperimentConfig, body: Callable[[ExperimentConfig, Report], None],
             name: Optional[str] = None) -> Report:
        report = Report(experiment=name or settings.experiment, seed=settings.seed,
                        config=settings.model_dump(mode="json", exclude={"tolerances"}),
                        tolerances=settings.tolerances)
        if self.initialization_errors:
            report.errors.extend(self.initialization_errors)
        self.logger.info(f"🧮 Запуск {report.experiment} (seed {settings.seed})")
        start = time.perf_counter()
        try:
            body(settings, report)
        except Exception as e:
            self.logger.error(f"❌ {report.experiment}: {e}")
            report.errors.append(f"{type(e).__name__}: {e}")
        report.wall_time = time.perf_counter() - start

        status = "✅" if report.passed else "❌"
        self.logger.info(f"{status} {report.experiment}: {len(report.checks)} проверок, "
                         f"{len(report.failed_checks())} не пройдено, {report.wall_time:.2f} с")
        return report

    def report_path(self, settings: ExperimentConfig, artifact: bool = False) -> str:
        """Путь отчёта: --out или каталог данных; для артефактов рядом с ними"""
        if settings.out and artifact:
            return os.path.splitext(settings.out)[0] + ".report.json"
        if settings.out:
            return settings.out
        return os.path.join(self.data_dir, "reports", f"{settings.experiment}.json")

    def save_report(self, report: Report, path: str, include_timing: bool = False) -> str:
        report.outputs["report"] = path
        return write_report_json(report, path, include_timing)

    def show(self, report: Report):
        render_report(report)

    # --- graph ---

    def run_graph(self, kind: Optional[str] = None, spec_path: Optional[str] = None,
                  out: Optional[str] = None, **overrides) -> Report:
        """Построить граф, проверить вложение и знаки, сохранить JSON"""
        settings = self.settings("graph", out=out, **overrides)

        def body(s: ExperimentConfig, report: Report):
            spec = dict(s.params.get("graph_spec") or {})
            if spec_path:
                spec = load_spec(spec_path)
            if kind:
                spec["kind"] = kind
            report.config["graph_spec"] = spec
            g = build_graph(spec)

            diag = validate_embedding(g)
            report.add_check("graph/embedding", diag.passed, diag.failure or "ok")
            report.add_metric("graph/vertices", g.n_vertices, oracle="count")
            report.add_metric("graph/edges", g.n_edges, oracle="count")
            report.add_metric("graph/faces", len(g.faces), oracle="count")
            report.add_metric("graph/euler_characteristic", diag.details.get("euler_characteristic", 0),
                              oracle="V - E + F_interior", target=2 - len(g.boundary_faces()))

            if g.is_bipartite and len(g.whites()) == len(g.blacks()):
                sw = kasteleyn_signs(g)
                ok, worst, _ = check_face_rule(g, sw)
                report.add_check("graph/face_rule", ok, f"worst={worst:.2e}, mode={sw.mode}")
                covers = abs(np.linalg.det(scalar_kasteleyn_matrix(g, sw)))
                target = None
                oracle = "|det K_0|"
                if spec.get("kind", "region") == "region" and not spec.get("holes"):
                    target = float(count_rooted_spanning_trees(region_from_spec(spec)))
                    oracle = "остовные деревья с корнем x_0"
                elif g.n_vertices <= Config.ENUM_CAP:
                    target = float(len(enumerate_dimer_covers(g, s.workers)))
                    oracle = "enumerate_dimer_covers"
                report.add_metric("graph/dimer_covers", covers, oracle=oracle, target=target)
                if target is not None:
                    report.add_check("graph/dimer_covers", _rel(covers, target) <= 1e-9,
                                     f"|det K_0|={covers:.6g}, oracle={target:.6g}", 1e-9)

            path = s.out or os.path.join(self.data_dir, f"{g.name}.json")
            save_graph(g, path)
            report.outputs["graph"] = path

        report = self._run(settings, body)
        self.save_report(report, self.report_path(settings, artifact=True))
        return report

    # --- sample ---

    def run_sample(self, graph_path: Optional[str] = None, n: Optional[int] = None,
                   seed: Optional[int] = None, out: Optional[str] = None,
                   zipper_paths: Optional[Sequence[str]] = None, **overrides) -> Report:
        """Точные выборки двойных димеров в JSON lines; сверка с перебором на малых графах"""
        settings = self.settings("sample", graph=graph_path, samples=n, seed=seed, out=out,
                                 zippers=list(zipper_paths) if zipper_paths else None, **overrides)

        def body(s: ExperimentConfig, report: Report):
            g = load_graph(s.graph) if s.graph else build_graph(s.params.get("graph_spec") or {})
            count = s.samples or 1000
            zippers = [zipper_from_dict(g, load_spec(p)) for p in s.params.get("zippers") or []] or surface_zippers(g)
            configs = sample_double_dimer(g, None, count, s.seed, s.workers)
            if zippers:
                configs = [annotate_contractibility(cfg, zippers) for cfg in configs]

            path = s.out or os.path.join(self.data_dir, f"samples-{g.name}.jsonl")
            write_jsonl((config_to_dict(cfg) for cfg in configs), path)
            report.outputs["samples"] = path

            loops = np.array([cfg.k for cfg in configs], dtype=float)
            report.add_metric("sample/mean_loops", loops.mean(), oracle="выборка",
                              stderr=float(loops.std(ddof=1) / np.sqrt(count)) if count > 1 else None)
            if zippers:
                nc = np.array([sum(1 for f in cfg.contractible if not f) for cfg in configs], dtype=float)
                report.add_metric("sample/mean_noncontractible", nc.mean(), oracle="выборка")

            n_check = min(count, 200)
            first = [cfg.key for cfg in sample_double_dimer(g, None, n_check, s.seed, s.workers)]
            second = [cfg.key for cfg in sample_double_dimer(g, None, n_check, s.seed, s.workers)]
            report.add_check("sample/reproducible", first == second, f"{n_check} выборок, seed {s.seed}")

            if g.n_vertices <= Config.ENUM_CAP:
                self._compare_with_enumeration(g, configs, s, report)

        report = self._run(settings, body)
        self.save_report(report, self.report_path(settings, artifact=True))
        return report

    def _compare_with_enumeration(self, g: PlanarGraph, configs, s: ExperimentConfig, report: Report):
        exact = enumerate_double_dimer(g, s.workers)
        total = sum(mult for _, mult in exact)
        probs = {cfg.key: mult / total for cfg, mult in exact}
        counts = Counter(cfg.key for cfg in configs)
        n = len(configs)
        unknown = [key for key in counts if key not in probs]

        worst = 0.0
        for key, p in probs.items():
            freq = counts.get(key, 0) / n
            se = np.sqrt(p * (1 - p) / n)
            z = abs(freq - p) / se if se > 0 else (0.0 if freq == p else np.inf)
            worst = max(worst, float(z))
        limit = s.tolerance("sigma_sampler")
        report.add_metric("sample/max_sigma", worst, oracle="enumerate_double_dimer", target=0.0)
        report.add_check("sample/distribution", worst <= limit and not unknown,
                         f"max z={worst:.2f}, конфигураций {len(probs)}, вне перебора {len(unknown)}", limit)

        exact_mean = sum(cfg.k * mult for cfg, mult in exact) / total
        report.add_metric("sample/exact_mean_loops", exact_mean, oracle="enumerate_double_dimer")

    # --- verify ---

    def run_verify(self, suite: str, seed: Optional[int] = None, out: Optional[str] = None) -> Report:
        """Набор проверок инвариантов; all запускает все наборы в один отчёт"""
        if suite != "all" and suite not in SUITES:
            raise ValueError(f"Неизвестный набор проверок: {suite}")
        names = SUITES if suite == "all" else (suite,)
        bodies = {
            "qdet-oracle": self._suite_qdet_oracle,
            "gauge": self._suite_gauge,
            "cr-greens": self._suite_cr_greens,
            "pfaffian": self._suite_pfaffian,
            "logdet": self._suite_logdet,
        }
        head = self.settings(names[0], seed=seed, out=out)

        def body(s: ExperimentConfig, report: Report):
            for name in names:
                sub = s if name == names[0] else self.settings(name, seed=seed, out=out)
                if len(names) > 1:
                    report.config.setdefault("suites", {})[name] = sub.params
                try:
                    bodies[name](sub, report)
                except Exception as e:
                    self.logger.error(f"❌ Набор {name}: {e}")
                    report.errors.append(f"{name}: {type(e).__name__}: {e}")

        report = self._run(head, body, name=f"verify-{suite}")
        self.save_report(report, out or os.path.join(self.data_dir, "reports", f"verify-{suite}.json"))
        return report

    def _suite_qdet_oracle(self, s: ExperimentConfig, report: Report):
        """Qdet K = Σ весов двойных конфигураций; классические числа покрытий"""
        rng = np.random.default_rng(s.seed)
        tol, rtol = s.tolerance("qdet_rel"), s.tolerance("route_rel")
        cases = []
        for spec in s.params.get("graphs", []):
            g = build_graph(spec)
            # прогрев кэша до параллельного запуска
            enumerate_double_dimer(g, s.workers)
            for label, conn in connection_family(g, rng, s.params):
                cases.append((g, label, conn))

        def run_case(case) -> Tuple[float, float]:
            g, _, conn = case
            K = assemble(g, kasteleyn_signs(g), conn)
            oracle = partition_oracle(g, None, conn).Z
            return _rel(qdet(K).value, oracle), route_disagreement(qdet_all_routes(K))

        results = self.parallel.map_ordered(run_case, cases, s.workers)
        by_graph: Dict[str, List[Tuple[float, float]]] = {}
        for (g, _, _), res in zip(cases, results):
            by_graph.setdefault(g.name, []).append(res)
        for name, items in by_graph.items():
            worst = max(r for r, _ in items)
            routes = max(d for _, d in items)
            report.add_check(f"qdet-oracle/{name}", worst <= tol and routes <= rtol,
                             f"{len(items)} связностей, rel={worst:.2e}, routes={routes:.2e}", tol)
        report.add_metric("qdet-oracle/cases", len(cases), oracle="count")
        report.add_metric("qdet-oracle/max_rel", max((r for r, _ in results), default=0.0),
                          oracle="partition_oracle", target=0.0)

        for cols, rows, expected in s.params.get("classical_counts", []):
            g = region_graph(build_grid_region(int(cols), int(rows)))
            d = abs(np.linalg.det(scalar_kasteleyn_matrix(g, kasteleyn_signs(g))))
            covers = len(enumerate_dimer_covers(g, s.workers))
            report.add_metric(f"qdet-oracle/det_K0/{cols}x{rows}", d, oracle="enumerate_dimer_covers",
                              target=float(covers))
            report.add_check(f"qdet-oracle/classical/{cols}x{rows}",
                             covers == expected and abs(d - expected) <= 1e-9 * expected,
                             f"|det K_0|={d:.12g}, покрытий {covers}, ожидалось {expected}")

    def _suite_gauge(self, s: ExperimentConfig, report: Report):
        """Инвариантность Z_dd и плоскости относительно калибровок"""
        rng = np.random.default_rng(s.seed)
        graphs = [build_graph(spec) for spec in s.params.get("graphs", [])]
        total = int(s.params.get("gauges", 100))
        tol, flat_tol = s.tolerance("gauge_rel"), s.tolerance("flat")
        for idx, g in enumerate(graphs):
            count = total // len(graphs) + (1 if idx < total % len(graphs) else 0)
            sw = kasteleyn_signs(g)
            conn = connection_from_zippers(g, [z.with_matrix(random_su2(rng)) for z in connection_zippers(g)])
            base = qdet(assemble(g, sw, conn)).value
            worst, flat_worst = 0.0, check_flat(conn, flat_tol)[1]
            for _ in range(count):
                psi = {v.id: random_su2(rng) for v in g.vertices}
                gauged = gauge_transform(conn, psi)
                worst = max(worst, _rel(qdet(assemble(g, sw, gauged)).value, base))
                flat_worst = max(flat_worst, check_flat(gauged, flat_tol)[1])
            report.add_check(f"gauge/{g.name}", worst <= tol, f"{count} калибровок, drift={worst:.2e}", tol)
            report.add_check(f"gauge/{g.name}/flat", flat_worst <= flat_tol, f"max={flat_worst:.2e}", flat_tol)

    def _suite_cr_greens(self, s: ExperimentConfig, report: Report):
        """K^{-1} через функции Грина, вычеты Коши–Римана, ядро потенциала"""
        green_tol, cr_tol = s.tolerance("green_rel"), s.tolerance("cr_defect")
        for spec in s.params.get("regions", []):
            region = build_grid_region(int(spec["cols"]), int(spec["rows"]))
            g = temperleyan_graph(region)
            kinv = inverse(assemble(g, kasteleyn_signs(g), trivial_connection(g)))
            diff = float(np.max(np.abs(kinv_via_green(region, g) - scalar_inverse_table(kinv, g))))
            label = f"{region.cols}x{region.rows}"
            report.add_check(f"cr-greens/green/{label}", diff <= green_tol, f"max|Δ|={diff:.2e}", green_tol)

            pole_err, off_pole, harmonic = self._cr_defects(region, g, kinv, cr_tol)
            report.add_check(f"cr-greens/residue/{label}", pole_err <= cr_tol, f"max|r−r_w|={pole_err:.2e}", cr_tol)
            report.add_check(f"cr-greens/analytic/{label}", max(off_pole, harmonic) <= cr_tol,
                             f"вне полюса {off_pole:.2e}, гармоничность {harmonic:.2e}", cr_tol)

            G = discrete_green(region, "neumann")
            report.add_metric(f"cr-greens/laplacian_residual/{label}", G.laplacian_residual(),
                              oracle="ΔG = δ", target=0.0)

        coupling = s.params.get("coupling_region")
        if coupling:
            region = build_grid_region(int(coupling["cols"]), int(coupling["rows"]))
            g = temperleyan_graph(region)
            K = assemble(g, kasteleyn_signs(g), trivial_connection(g))
            center = complex((region.cols - 1) / 2, (region.rows - 1) / 2)
            eid = min((e.id for e in g.edges),
                      key=lambda i: (round(abs((g.vertices[g.edges[i].u].pos + g.vertices[g.edges[i].v].pos) / 2
                                               - center), 9), i))
            value = local_coupling_constants(K, [eid])[eid]
            report.add_metric("cr-greens/bulk_coupling", value.real, oracle="вероятность ребра в объёме",
                              target=0.25)

        tol = s.tolerance("kernel")
        for x, y, target in s.params.get("kernel_points", []):
            value = potential_kernel(int(x), int(y))
            report.add_metric(f"cr-greens/potential_kernel/{x},{y}", value, oracle="интеграл Фурье",
                              target=float(target))
            report.add_check(f"cr-greens/potential_kernel/{x},{y}", abs(value - target) <= tol,
                             f"a={value:.10f}", tol)

    @staticmethod
    def _cr_defects(region: GridRegion, g: PlanarGraph, kinv, tol: float) -> Tuple[float, float, float]:
        pole_err = off_pole = harmonic = 0.0
        for w in g.whites():
            vert = g.vertices[w]
            rep = check_discrete_CR(section_from_kinv_column(kinv, g, w), region, tol)
            edge = _white_edge(vert.pos)
            expected = 1.0 if vert.cls == "W0" else 1j
            pole_err = max(pole_err, abs(rep.residues[edge] - expected))
            off_pole = max(off_pole, max((abs(r) for e, r in rep.residues.items() if e != edge), default=0.0))
            harmonic = max(harmonic, rep.harmonic_defect)
        return pole_err, off_pole, harmonic

    def _suite_pfaffian(self, s: ExperimentConfig, report: Report):
        """Согласие способов Qdet на случайных самодвойственных матрицах и графах"""
        rng = np.random.default_rng(s.seed)
        rtol, sd_tol = s.tolerance("route_rel"), s.tolerance("selfdual")
        max_blocks = int(s.params.get("max_blocks", 6))

        worst, sd_worst, pf_worst = 0.0, 0.0, 0.0
        count = int(s.params.get("random_matrices", 20))
        for _ in range(count):
            K = random_self_dual(rng, int(rng.integers(1, max_blocks + 1)))
            worst = max(worst, route_disagreement(qdet_all_routes(K)))
            sd_worst = max(sd_worst, self_duality_defect(K))
            A = rng.standard_normal((2 * K.n, 2 * K.n)) + 1j * rng.standard_normal((2 * K.n, 2 * K.n))
            A = A - A.T
            pf_worst = max(pf_worst, _rel(pfaffian(A) ** 2, np.linalg.det(A)))
        report.add_check("pfaffian/random_routes", worst <= rtol, f"{count} матриц, max={worst:.2e}", rtol)
        report.add_check("pfaffian/random_selfdual", sd_worst <= sd_tol, f"max={sd_worst:.2e}", sd_tol)
        report.add_check("pfaffian/pf_squared", pf_worst <= rtol, f"Pf² = det, max={pf_worst:.2e}", rtol)

        for spec in s.params.get("graphs", []):
            g = build_graph(spec)
            for label, conn in connection_family(g, rng, {"random_su2": 2}):
                K = assemble(g, kasteleyn_signs(g), conn)
                dis = route_disagreement(qdet_all_routes(K))
                sd = self_duality_defect(K)
                report.add_check(f"pfaffian/{g.name}/{label}", dis <= rtol and sd <= sd_tol,
                                 f"routes={dis:.2e}, selfdual={sd:.2e}", rtol)

    def _suite_logdet(self, s: ExperimentConfig, report: Report):
        """Производная log det вдоль пути связностей против центральной разности"""
        rng = np.random.default_rng(s.seed)
        graphs = [build_graph(spec) for spec in s.params.get("graphs", [])]
        directions = int(s.params.get("directions", 10))
        t, h = float(s.params.get("t", 0.5)), float(s.params.get("step", 1e-4))
        scale = float(s.params.get("scale", 0.4))
        fd_tol, sum_tol = s.tolerance("logdet_fd_rel"), s.tolerance("edge_sum")

        fd_worst, sum_worst = 0.0, 0.0
        for i in range(directions):
            g = graphs[i % len(graphs)]
            sw = kasteleyn_signs(g)
            conn = connection_from_zippers(g, connection_zippers(g))
            targets = [random_sl2_near_identity(rng, scale) for _ in conn.zippers]

            conn_t, S = path_perturbation(g, sw, conn, targets, t)
            K_t = assemble(g, sw, conn_t)
            kinv = inverse(K_t)
            d = logdet_derivative(K_t, S, kinv)
            fd = logdet_finite_difference(g, sw, conn, targets, t, h)
            fd_worst = max(fd_worst, abs(d - fd) / max(abs(d), abs(fd), 1e-12))

            edge_sum = 0j
            for z, dA in zip(conn_t.zippers, path_derivative(conn, t, targets)):
                for k in range(len(z.edges)):
                    edge_sum += np.trace(zipper_edge_contribution(K_t, z, k, sw, dA, kinv))
            sum_worst = max(sum_worst, abs(edge_sum - d) / max(abs(d), 1.0))

        report.add_metric("logdet/max_fd_rel", fd_worst, oracle="центральная разность", target=0.0)
        report.add_check("logdet/finite_difference", fd_worst <= fd_tol,
                         f"{directions} направлений, max={fd_worst:.2e}", fd_tol)
        report.add_check("logdet/edge_sum", sum_worst <= sum_tol, f"max={sum_worst:.2e}", sum_tol)

    # --- cylinder ---

    def run_cylinder(self, n: Optional[int] = None, m: Optional[int] = None,
                     conventions: Optional[Sequence[str]] = None, inv_tau_grid: Optional[Sequence[float]] = None,
                     seed: Optional[int] = None, out: Optional[str] = None) -> Report:
        """Распределение числа нестягиваемых циклов по сетке 1/τ, конечный размер против q-произведения"""
        settings = self.settings("cylinder", n=n, m=m, conventions=list(conventions) if conventions else None,
                                 seed=seed, out=out)

        def body(s: ExperimentConfig, report: Report):
            p = s.params
            n_fixed, m_fixed = int(p.get("n", 51)), int(p.get("m", 50))
            k_max = int(p.get("k_max", 7))
            convs = list(p.get("conventions") or CONVENTIONS)
            grid = list(inv_tau_grid) if inv_tau_grid is not None else self._inv_tau_grid(p)

            rows: List[Dict[str, Any]] = []
            pgf_ok = True
            for conv in convs:
                p0 = []
                for inv_tau in grid:
                    mm = max(1, int(round(n_fixed * inv_tau)))
                    finite = cylinder_pgf(n_fixed, mm, conv)
                    pgf_ok &= finite.is_pgf(1e-10)
                    tau = effective_tau(n_fixed, mm)
                    asym = self._asymptotic(tau, mm, conv)
                    p0.append(finite.coefficient(0))
                    for k in range(k_max + 1):
                        pf, pa = finite.coefficient(k), float(asym[k]) if k < len(asym) else 0.0
                        rows.append({"convention": conv, "n": n_fixed, "m": mm, "inv_tau": float(inv_tau),
                                     "tau": tau, "k": k, "P_finite": pf, "P_asymptotic": pa,
                                     "abs_diff": abs(pf - pa)})
                # монотонность P(0) только фиксируется
                monotone = bool(np.all(np.diff(p0) <= 1e-15) or np.all(np.diff(p0) >= -1e-15))
                report.add_metric(f"cylinder/{conv}/p0_monotone", float(monotone), oracle="наблюдение")
            report.add_check("cylinder/pgf_rows", pgf_ok, f"{len(rows)} строк: коэффициенты ≥ 0, сумма 1", 1e-10)

            path = s.out or os.path.join(self.data_dir, f"cylinder-n{n_fixed}.csv")
            write_table_csv(rows, path, ["convention", "n", "m", "inv_tau", "tau", "k",
                                         "P_finite", "P_asymptotic", "abs_diff"])
            report.outputs["table"] = path

            self._cylinder_asymptotic_check(n_fixed, m_fixed, p, s, report)
            self._cylinder_enumeration_check(p, s, report)
            self._cylinder_spectrum_check(p, s, report)

        report = self._run(settings, body)
        self.save_report(report, self.report_path(settings, artifact=True))
        return report

    @staticmethod
    def _inv_tau_grid(p: Dict[str, Any]) -> List[float]:
        spec = p.get("inv_tau_grid") or {"start": 0.1, "stop": 3.0, "step": 0.1}
        if isinstance(spec, list):
            return [float(x) for x in spec]
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        count = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 10) for i in range(count)]

    @staticmethod
    def _asymptotic(tau: float, m: int, convention: str) -> np.ndarray:
        """q-произведение; для pair-measure с весами 2^k и перенормировкой"""
        c = cylinder_pgf_asymptotic(tau, m, k_max=_ASYMPTOTIC_TERMS).coeffs
        if convention == "pair-measure":
            c = c * 2.0 ** np.arange(len(c))
            c = c / c.sum()
        return c

    def _cylinder_asymptotic_check(self, n: int, m: int, p: Dict[str, Any], s: ExperimentConfig, report: Report):
        finite = cylinder_pgf(n, m, "trace-marking")
        tau = effective_tau(n, m)
        asym = self._asymptotic(tau, m, "trace-marking")
        k_top = int(p.get("asymptotic_k", 5))
        diff = max(abs(finite.coefficient(k) - asym[k]) for k in range(k_top + 1))
        tol = s.tolerance("pgf_asymptotic")
        report.add_metric(f"cylinder/asymptotic_diff/{n}x{m}", diff, oracle="q-произведение", target=0.0)
        report.add_check(f"cylinder/asymptotic/{n}x{m}", diff <= tol, f"k ≤ {k_top}, τ={tau:.4f}, max={diff:.2e}", tol)
        literal = self._asymptotic(n / m, m, "trace-marking")
        literal_diff = max(abs(finite.coefficient(k) - literal[k]) for k in range(k_top + 1))
        report.add_metric(f"cylinder/literal_tau_diff/{n}x{m}", literal_diff, oracle="q-произведение при τ = n/m")
        report.add_check(f"cylinder/unit_sum/{n}x{m}", finite.is_pgf(1e-10),
                         f"Σ={float(np.sum(finite.coeffs)):.12f}", 1e-10)

    def _cylinder_enumeration_check(self, p: Dict[str, Any], s: ExperimentConfig, report: Report):
        tol = s.tolerance("pgf_exact")
        for nn, mm in p.get("enumeration_cases", []):
            g = cylinder_graph(int(nn), int(mm))
            dist = mu0_lamination_distribution_exact(g, [axial_zipper(g, IDENTITY)])
            pgf = cylinder_pgf(int(nn), int(mm), "pair-measure")
            size = max(pgf.degree, max(len(lam) for lam in dist.probabilities)) + 1
            enum, exact = np.zeros(size), np.zeros(size)
            exact[:pgf.degree + 1] = pgf.coeffs
            for lam, prob in dist.probabilities.items():
                enum[len(lam)] += prob
            diff = float(np.max(np.abs(enum - exact)))
            report.add_check(f"cylinder/enumeration/{nn}x{mm}", diff <= tol, f"max={diff:.2e}", tol)
            if (nn, mm) == (1, 1):
                report.add_metric("cylinder/P1/1x1", enum[1], oracle="mu0_lamination_distribution_exact",
                                  target=0.5)

    def _cylinder_spectrum_check(self, p: Dict[str, Any], s: ExperimentConfig, report: Report):
        det_tol, eig_tol = s.tolerance("cylinder_rel"), s.tolerance("eigen_residual")
        lambdas = [complex(*x) for x in p.get("lambdas", [[1.3, 0.0], [-0.7, 0.0], [0.6, 0.8]])]
        for nn, mm in p.get("spectrum_cases", [[1, 1], [1, 2], [3, 1], [3, 2]]):
            nn, mm = int(nn), int(mm)
            det_worst, eig_worst = 0.0, 0.0
            for lam in lambdas:
                full = complex(np.linalg.det(cylinder_kmatrix_full(nn, mm, lam)))
                det_worst = max(det_worst, _rel(full, (-1) ** mm * cylinder_detK(nn, mm, lam)))
                for k in range(2 * nn):
                    for j in range(1, mm + 1):
                        eig_worst = max(eig_worst, cylinder_eigen_check(nn, mm, lam, k, j))
            report.add_check(f"cylinder/product_formula/{nn}x{mm}", det_worst <= det_tol,
                             f"max={det_worst:.2e}", det_tol)
            report.add_check(f"cylinder/eigenvectors/{nn}x{mm}", eig_worst <= eig_tol,
                             f"max={eig_worst:.2e}", eig_tol)

    # --- twopoint ---

    def run_twopoint(self, z1: Optional[complex] = None, z2: Optional[complex] = None,
                     eps: Optional[Sequence[float]] = None, mc: Optional[bool] = None,
                     seed: Optional[int] = None, samples: Optional[int] = None, out: Optional[str] = None) -> Report:
        """Среднее число циклов вокруг двух точек: предел, суммы Римана по ε, Монте-Карло"""
        settings = self.settings("twopoint", seed=seed, samples=samples, out=out,
                                 z1=[z1.real, z1.imag] if z1 is not None else None,
                                 z2=[z2.real, z2.imag] if z2 is not None else None,
                                 eps=list(eps) if eps else None, mc=mc)

        def body(s: ExperimentConfig, report: Report):
            p = s.params
            a, b = complex(*p.get("z1", [0.0, 1.0])), complex(*p.get("z2", [0.0, 2.0]))
            layout = p.get("layout", "split")
            continuum = two_point_loop_expectation(a, b, "continuum")
            green = 8 / np.pi * halfplane_greens(a, b, "dirichlet").real
            tol = s.tolerance("twopoint_continuum")
            target = p.get("continuum_target")
            report.add_metric("twopoint/continuum", continuum, oracle="(8/π)·G_H(z1, z2)",
                              target=float(target) if target is not None else green)
            report.add_check("twopoint/continuum_green", abs(continuum - green) <= tol,
                             f"|Δ|={abs(continuum - green):.2e}", tol)
            if target is not None:
                report.add_check("twopoint/continuum_target", abs(continuum - float(target)) <= tol,
                                 f"{continuum:.10f} против {float(target):.10f}", tol)

            errors = []
            for e in p.get("eps", [0.0625, 0.03125, 0.015625]):
                res = two_point_riemann_sum(a, b, float(e), layout)
                errors.append(abs(res.value - continuum))
                report.add_metric(f"twopoint/discrete/{e}", res.value, oracle="сумма Римана по пакетам",
                                  target=continuum)
            if errors:
                rel = errors[-1] / abs(continuum)
                rtol = s.tolerance("twopoint_discrete_rel")
                report.add_check("twopoint/discrete_rel", rel <= rtol, f"ε_min: rel={rel:.3e}", rtol)
                decreasing = all(y < x for x, y in zip(errors, errors[1:]))
                report.add_check("twopoint/convergence", decreasing,
                                 "ошибки: " + ", ".join(f"{x:.2e}" for x in errors))

            self._chordal_checks(s, report)
            if p.get("mc"):
                self._twopoint_mc(a, b, s, report)

        report = self._run(settings, body)
        self.save_report(report, self.report_path(settings))
        return report

    def _chordal_checks(self, s: ExperimentConfig, report: Report):
        tol = s.tolerance("chordal")
        mid = chordal_left_probability(-1.0, 1.0, 1j)
        report.add_check("chordal/symmetric", abs(mid - 0.5) <= tol, f"P={mid:.12f}", tol)
        inside = chordal_left_probability(-1.0, 1.0, complex(0.3, 1e-12))
        outside = chordal_left_probability(-1.0, 1.0, complex(2.5, 1e-12))
        report.add_check("chordal/boundary", abs(inside - 1) <= tol and abs(outside) <= tol,
                         f"внутри {inside:.12f}, снаружи {outside:.12f}", tol)

        spec = s.params.get("chordal_region") or {"cols": 4, "rows": 4, "face": [1.5, 1.5]}
        cols, rows = int(spec["cols"]), int(spec["rows"])
        g = region_graph(build_grid_region(cols, rows))
        by_pos = {v.pos: v.id for v in g.vertices}
        ends = [by_pos[complex(cols - 1, 1)], by_pos[complex(cols - 1, 2)]]
        b, w = sorted(ends, key=lambda v: g.vertices[v].color != "black")
        zipper = ray_zipper(g, complex(*spec["face"]), "down", IDENTITY)
        finite = finite_chordal_probability(g, kasteleyn_signs(g), b, w, zipper)
        exact = chordal_separation_exact(g, b, w, zipper.edges)
        report.add_metric("chordal/finite", finite, target=exact, oracle="chordal_separation_exact")
        report.add_check("chordal/finite", abs(finite - exact) <= tol, f"{finite:.10f} против {exact:.10f}", tol)

    def _twopoint_mc(self, a: complex, b: complex, s: ExperimentConfig, report: Report):
        """Выборки на усечённой сетке против точного значения на том же графе"""
        spec = s.params.get("mc_region") or {"cols": 6, "rows": 7, "scale": 2.0}
        cols, rows, scale = int(spec["cols"]), int(spec["rows"]), float(spec.get("scale", 2.0))
        g = region_graph(build_grid_region(cols, rows))
        x_mid = (cols - 2) // 2

        def face_point(z: complex) -> complex:
            fx = int(np.clip(np.floor(x_mid + z.real * scale), 0, cols - 2))
            fy = int(np.clip(np.floor(z.imag * scale), 0, rows - 2))
            return complex(fx + 0.5, fy + 0.5)

        low, high = sorted((face_point(a), face_point(b)), key=lambda z: (z.imag, z.real))
        if low == high:
            raise ValueError("Точки попали в одну грань усечённой сетки")
        upper = "up" if low.real == high.real else "down"
        zippers = [ray_zipper(g, low, "down", IDENTITY), ray_zipper(g, high, upper, IDENTITY)]

        exact = finite_two_point_expectation(g, kasteleyn_signs(g), *zippers)
        mean, se = mc_two_point_expectation(g, zippers, s.samples or 4000, s.seed, s.workers)
        limit = s.tolerance("sigma_mc")
        report.add_metric("twopoint/mc", mean, stderr=se, target=exact, oracle="finite_two_point_expectation")
        report.add_check("twopoint/mc", abs(mean - exact) <= limit * se + 1e-12,
                         f"{mean:.4f} ± {se:.4f} против {exact:.4f}", limit)

    # --- haar ---

    def run_haar(self, n: Optional[int] = None, m: Optional[int] = None, mode: Optional[str] = None,
                 samples: Optional[int] = None, seed: Optional[int] = None, out: Optional[str] = None) -> Report:
        """Коэффициенты Z_dd цилиндра по ламинациям интегрированием по Хаару"""
        settings = self.settings("haar", n=n, m=m, mode=mode, samples=samples, seed=seed, out=out)

        def body(s: ExperimentConfig, report: Report):
            p = s.params
            nn, mm = int(p.get("n", 3)), int(p.get("m", 2))
            how = p.get("mode", "quadrature")
            count = s.samples or 20000
            limit = s.tolerance("sigma_mc")
            quad_tol = s.tolerance("haar_quadrature")

            for power in p.get("catalan_powers", [2, 4, 6]):
                value, se = trace_moment(int(power), how, count, s.seed)
                target = catalan(int(power) // 2)
                report.add_metric(f"haar/trace_moment/{power}", value, stderr=se or None, target=target,
                                  oracle="числа Каталана")
                ok = abs(value - target) <= (quad_tol if how == "quadrature" else max(limit * se, quad_tol))
                report.add_check(f"haar/catalan/{power}", ok, f"{value:.8f} против {target}")

            g = cylinder_graph(nn, mm)
            sw = kasteleyn_signs(g)
            zipper = axial_zipper(g, IDENTITY)
            z_id = qdet(assemble(g, sw, connection_from_zippers(g, [zipper]))).value

            def evaluator(Us) -> complex:
                conn = connection_from_zippers(g, [zipper.with_matrix(Us[0])])
                return qdet(assemble(g, sw, conn)).value / z_id

            coeffs = haar_extract(evaluator, power_laminations(mm), 1, count, s.seed, how,
                                  int(p.get("batches", 20)), s.workers)
            pgf = cylinder_pgf(nn, mm, "pair-measure")
            for k, (value, se) in enumerate(zip(coeffs.values, coeffs.stderr)):
                estimate, err = float(value.real) * 2 ** k, float(se) * 2 ** k
                target = pgf.coefficient(k)
                report.add_metric(f"haar/P{k}", estimate, stderr=err if how == "mc" else None, target=target,
                                  oracle="cylinder_pgf pair-measure")
                ok = abs(estimate - target) <= (quad_tol if how == "quadrature" else max(limit * err, quad_tol))
                report.add_check(f"haar/coefficient/{k}", ok, f"{estimate:.8f} против {target:.8f}")

        report = self._run(settings, body)
        self.save_report(report, self.report_path(settings))
        return report

    def get_status_report(self) -> Dict[str, Any]:
        """Сводка состояния лаборатории"""
        return {
            "config": Config.get_config_summary(),
            "data_dir": self.data_dir,
            "workers": self.workers,
            "cache": self.cache.get_stats(),
            "initialization_errors": self.initialization_errors,
        }

    def stop(self):
        self.parallel.shutdown()
