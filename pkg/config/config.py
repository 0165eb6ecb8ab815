"""
Конфигурация qdimer
"""

import os
from copy import deepcopy
from typing import Dict, Any, Optional

import yaml
from dotenv import load_dotenv

load_dotenv()

_CONFIG_DIR = os.path.dirname(os.path.abspath(__file__))


class Config:
    """Конфигурация экспериментов и вычислений"""

    VERSION = "0.3.0"

    # Параллельность
    THREADS = int(os.getenv("QDIMER_THREADS", "4"))

    # Перебор
    ENUM_CAP = int(os.getenv("QDIMER_ENUM_CAP", "36"))
    ENUM_CACHE_SIZE = int(os.getenv("QDIMER_ENUM_CACHE_SIZE", "64"))

    # Данные и логи
    DATA_DIR = os.getenv("QDIMER_DATA_DIR", "qdimer_data")
    LOG_LEVEL = os.getenv("QDIMER_LOG_LEVEL", "INFO")
    LOG_FILE = os.getenv("QDIMER_LOG_FILE", "")
    EXPERIMENTS_FILE = os.getenv(
        "QDIMER_EXPERIMENTS_FILE", os.path.join(_CONFIG_DIR, "experiments.yaml")
    )

    # Случайность
    SEED = int(os.getenv("QDIMER_SEED", "20240101"))

    # Допуски по умолчанию (перекрываются experiments.yaml)
    DEFAULT_TOLERANCES = {
        "qdet_rel": 1e-9,
        "route_rel": 1e-9,
        "gauge_rel": 1e-9,
        "flat": 1e-10,
        "selfdual": 1e-12,
        "inverse": 1e-8,
        "logdet_fd_rel": 1e-6,
        "edge_sum": 1e-9,
        "cylinder_rel": 1e-8,
        "eigen_residual": 1e-10,
        "pgf_exact": 1e-12,
        "pgf_asymptotic": 1e-3,
        "twopoint_continuum": 1e-6,
        "twopoint_discrete_rel": 0.05,
        "chordal": 1e-9,
        "green_rel": 1e-8,
        "cr_defect": 1e-10,
        "sigma_mc": 3.0,
        "sigma_sampler": 4.0,
        "haar_quadrature": 1e-8,
        "kernel": 1e-6,
    }

    _experiments_cache: Optional[Dict[str, Any]] = None

    @classmethod
    def load_experiments(cls, path: Optional[str] = None) -> Dict[str, Any]:
        """Загрузить YAML с настройками экспериментов"""
        target = path or cls.EXPERIMENTS_FILE
        if path is None and cls._experiments_cache is not None:
            return deepcopy(cls._experiments_cache)

        data: Dict[str, Any] = {}
        if os.path.exists(target):
            with open(target, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        else:
            print(f"⚠️  Файл экспериментов не найден: {target}")

        if path is None:
            cls._experiments_cache = deepcopy(data)
        return data

    @classmethod
    def get_tolerances(cls, overrides: Optional[Dict[str, float]] = None) -> Dict[str, float]:
        """Получить допуски: значения по умолчанию, затем YAML, затем overrides"""
        tolerances = dict(cls.DEFAULT_TOLERANCES)
        tolerances.update(cls.load_experiments().get("tolerances", {}) or {})
        if overrides:
            tolerances.update(overrides)
        return {k: float(v) for k, v in tolerances.items()}

    @classmethod
    def get_experiment_defaults(cls, name: str) -> Dict[str, Any]:
        """Получить параметры эксперимента по имени"""
        experiments = cls.load_experiments().get("experiments", {}) or {}
        return deepcopy(experiments.get(name, {}))

    @classmethod
    def get_config_summary(cls) -> Dict[str, Any]:
        """Краткая сводка конфигурации"""
        return {
            "version": cls.VERSION,
            "threads": cls.THREADS,
            "enum_cap": cls.ENUM_CAP,
            "data_dir": cls.DATA_DIR,
            "log_level": cls.LOG_LEVEL,
            "experiments_file": cls.EXPERIMENTS_FILE,
            "seed": cls.SEED,
        }

    @classmethod
    def validate_config(cls) -> bool:
        """Проверить валидность конфигурации"""
        ok = True
        if cls.THREADS < 1:
            print("⚠️  ВНИМАНИЕ: QDIMER_THREADS должен быть >= 1")
            ok = False
        if cls.ENUM_CAP < 2:
            print("⚠️  ВНИМАНИЕ: QDIMER_ENUM_CAP слишком мал")
            ok = False
        if not os.path.exists(cls.EXPERIMENTS_FILE):
            print(f"⚠️  ВНИМАНИЕ: нет файла экспериментов {cls.EXPERIMENTS_FILE}")
            ok = False
        return ok
