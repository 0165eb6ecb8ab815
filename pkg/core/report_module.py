"""
Отчёты экспериментов: модели pydantic, запись JSON/CSV/JSON lines и
табличный вывод в консоль через rich
"""

import json
import logging
import os
from typing import Any, Dict, Iterable, List, Optional

import pandas as pd
from pydantic import BaseModel, Field, field_validator
from rich.console import Console
from rich.table import Table

from config.config import Config

logger = logging.getLogger(__name__)


class Metric(BaseModel):
    """Измеренная величина с оракулом или точной целью"""
    name: str
    value: float
    stderr: Optional[float] = None
    target: Optional[float] = None
    oracle: str

    @field_validator("oracle")
    @classmethod
    def oracle_not_empty(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("Метрика должна ссылаться на оракул или точную формулу")
        return v

    @property
    def abs_error(self) -> Optional[float]:
        return None if self.target is None else abs(self.value - self.target)


class Check(BaseModel):
    """Проверка критерия приёмки"""
    name: str
    passed: bool
    detail: str = ""
    tolerance: Optional[float] = None


class ExperimentConfig(BaseModel):
    """Параметры запуска после слияния experiments.yaml, --config и флагов"""
    experiment: str
    seed: int = Config.SEED
    graph: Optional[str] = None
    connection: Optional[str] = None
    samples: int = 0
    workers: Optional[int] = None
    out: Optional[str] = None
    tolerances: Dict[str, float] = Field(default_factory=dict)
    params: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("graph", "connection")
    @classmethod
    def file_exists(cls, v: Optional[str]) -> Optional[str]:
        if v is not None and not os.path.exists(v):
            raise ValueError(f"Файл не найден: {v}")
        return v

    @field_validator("samples")
    @classmethod
    def samples_non_negative(cls, v: int) -> int:
        if v < 0:
            raise ValueError("Число выборок не может быть отрицательным")
        return v

    def tolerance(self, key: str) -> float:
        return float(self.tolerances.get(key, Config.DEFAULT_TOLERANCES[key]))


class Report(BaseModel):
    """Отчёт эксперимента: JSON является контрактом, консольная таблица лишь его вид"""
    experiment: str
    version: str = Config.VERSION
    seed: int
    config: Dict[str, Any] = Field(default_factory=dict)
    tolerances: Dict[str, float] = Field(default_factory=dict)
    metrics: List[Metric] = Field(default_factory=list)
    checks: List[Check] = Field(default_factory=list)
    errors: List[str] = Field(default_factory=list)
    outputs: Dict[str, str] = Field(default_factory=dict)
    wall_time: Optional[float] = None

    @property
    def passed(self) -> bool:
        return not self.errors and all(c.passed for c in self.checks)

    def add_metric(self, name: str, value: float, oracle: str, stderr: Optional[float] = None,
                   target: Optional[float] = None) -> Metric:
        metric = Metric(name=name, value=float(value), stderr=stderr, target=target, oracle=oracle)
        self.metrics.append(metric)
        return metric

    def add_check(self, name: str, passed: bool, detail: str = "", tolerance: Optional[float] = None) -> Check:
        check = Check(name=name, passed=bool(passed), detail=detail, tolerance=tolerance)
        self.checks.append(check)
        if not check.passed:
            logger.warning(f"❌ {self.experiment}: проверка {name} не пройдена ({detail})")
        return check

    def get_metric(self, name: str) -> Optional[Metric]:
        return next((m for m in self.metrics if m.name == name), None)

    def failed_checks(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]


def report_to_dict(report: Report, include_timing: bool = False) -> Dict[str, Any]:
    exclude = None if include_timing else {"wall_time"}
    data = report.model_dump(mode="json", exclude=exclude)
    data["passed"] = report.passed
    return data


def write_report_json(report: Report, path: str, include_timing: bool = False) -> str:
    """JSON с фиксированным порядком ключей; время выполнения только по запросу"""
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report_to_dict(report, include_timing), f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")
    logger.info(f"💾 Отчёт {report.experiment} сохранён в {path}")
    return path


def write_table_csv(rows: List[Dict[str, Any]], path: str, columns: Optional[List[str]] = None) -> str:
    _ensure_parent(path)
    df = pd.DataFrame(rows, columns=columns)
    df.to_csv(path, index=False, float_format="%.12g")
    logger.info(f"💾 Таблица ({len(df)} строк) сохранена в {path}")
    return path


def write_jsonl(rows: Iterable[Dict[str, Any]], path: str) -> int:
    """Построчный JSON; возвращает число строк"""
    _ensure_parent(path)
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False, sort_keys=True))
            f.write("\n")
            count += 1
    logger.info(f"💾 {count} строк JSON lines сохранено в {path}")
    return count


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(parent, exist_ok=True)
    except Exception as e:
        print(f"⚠️  Предупреждение: не удалось создать директорию {parent}: {e}")


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.10g}"


def render_report(report: Report, console: Optional[Console] = None) -> None:
    """Таблицы метрик и проверок"""
    console = console or Console()
    status = "✅ пройден" if report.passed else "❌ не пройден"
    console.print(f"[bold]📊 {report.experiment}[/bold] (seed {report.seed}, v{report.version}): {status}")

    if report.metrics:
        table = Table(title="Метрики")
        for col in ("Метрика", "Значение", "±", "Цель", "Оракул"):
            table.add_column(col)
        for m in report.metrics:
            table.add_row(m.name, _fmt(m.value), _fmt(m.stderr), _fmt(m.target), m.oracle)
        console.print(table)

    if report.checks:
        table = Table(title="Проверки")
        for col in ("Проверка", "Итог", "Допуск", "Детали"):
            table.add_column(col)
        for c in report.checks:
            table.add_row(c.name, "✅" if c.passed else "❌", _fmt(c.tolerance), c.detail)
        console.print(table)

    for err in report.errors:
        console.print(f"[red]❌ {err}[/red]")
    if report.wall_time is not None:
        console.print(f"⏱️  {report.wall_time:.2f} с")
