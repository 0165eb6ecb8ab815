"""
Модуль топологии: гомотопические классы циклов по словам пересечений молний,
распределения ламинаций и извлечение коэффициентов интегрированием по Хаару
"""

import logging
from dataclasses import dataclass, replace
from math import comb
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import roots_chebyu

from config.config import Config
from core.connection_module import Matrix2, Zipper, random_su2
from core.enumeration_module import (
    DoubleDimerConfig, Loop, enumerate_double_dimer, sample_double_dimer,
)
from core.lattice_module import PlanarGraph
from core.parallel_manager import parallel_manager

logger = logging.getLogger(__name__)

Word = Tuple[int, ...]
QUADRATURE_NODES = 64


class TopologyError(ValueError):
    """Ошибка классификации циклов или ламинаций"""


# --- слова ---

def free_reduce(word: Sequence[int]) -> Word:
    stack: List[int] = []
    for letter in word:
        if stack and stack[-1] == -letter:
            stack.pop()
        else:
            stack.append(letter)
    return tuple(stack)


def cyclic_reduce(word: Sequence[int]) -> Word:
    w = list(free_reduce(word))
    while len(w) >= 2 and w[0] == -w[-1]:
        w = w[1:-1]
    return tuple(w)


def invert_word(word: Sequence[int]) -> Word:
    return tuple(-x for x in reversed(word))


def _letter_key(letter: int) -> Tuple[int, int]:
    return (abs(letter), 0 if letter > 0 else 1)


def canonical_word(word: Sequence[int]) -> Word:
    """Циклически приведённое слово, минимальное по сдвигам и обоим направлениям обхода"""
    w = cyclic_reduce(word)
    if not w:
        return ()
    candidates = []
    for base in (w, invert_word(w)):
        for s in range(len(base)):
            candidates.append(base[s:] + base[:s])
    return min(candidates, key=lambda c: [_letter_key(x) for x in c])


@dataclass(frozen=True)
class LoopClass:
    """Свободный гомотопический класс цикла"""
    word: Word

    @property
    def is_contractible(self) -> bool:
        return not self.word

    @property
    def winding(self) -> Optional[int]:
        """Число оборотов, если слово содержит одну образующую"""
        if not self.word:
            return 0
        if len({abs(x) for x in self.word}) == 1:
            return abs(sum(1 if x > 0 else -1 for x in self.word))
        return None

    @property
    def label(self) -> str:
        if not self.word:
            return "e"
        return " ".join(f"g{abs(x)}" if x > 0 else f"g{abs(x)}^-1" for x in self.word)

    def sort_key(self) -> Tuple:
        return (len(self.word), [_letter_key(x) for x in self.word])


Lamination = Tuple[LoopClass, ...]


def lamination_label(lam: Lamination) -> str:
    return "{" + ", ".join(c.label for c in lam) + "}" if lam else "{}"


def _crossing_map(zippers: Sequence[Zipper]) -> Dict[int, Tuple[int, int]]:
    crossings: Dict[int, Tuple[int, int]] = {}
    for j, z in enumerate(zippers):
        for eid, left in zip(z.edges, z.left):
            if eid in crossings:
                raise TopologyError(f"Молнии пересекаются по ребру {eid}")
            crossings[eid] = (j, left)
    return crossings


def classify_loop(loop: Loop, zippers: Sequence[Zipper]) -> LoopClass:
    """Слово пересечений: +g_j при переходе через молнию j от левого конца к правому"""
    crossings = _crossing_map(zippers)
    n = len(loop.vertices)
    word = []
    for t, eid in enumerate(loop.edges):
        hit = crossings.get(eid)
        if hit is None:
            continue
        j, left = hit
        word.append(j + 1 if loop.vertices[t] == left else -(j + 1))
    if len(loop.edges) != n:
        raise TopologyError("Число рёбер цикла не совпадает с числом вершин")
    return LoopClass(canonical_word(word))


def lamination_of(cfg: DoubleDimerConfig, zippers: Sequence[Zipper]) -> Lamination:
    """Нестягиваемые циклы конфигурации"""
    classes = [classify_loop(loop, zippers) for loop in cfg.loops]
    return tuple(sorted((c for c in classes if not c.is_contractible), key=LoopClass.sort_key))


def annotate_contractibility(cfg: DoubleDimerConfig, zippers: Sequence[Zipper]) -> DoubleDimerConfig:
    flags = tuple(classify_loop(loop, zippers).is_contractible for loop in cfg.loops)
    return replace(cfg, contractible=flags)


# --- распределения ---

@dataclass
class LamDistribution:
    """Распределение ламинаций под μ₀"""
    probabilities: Dict[Lamination, float]
    stderr: Dict[Lamination, float]
    samples: Optional[int] = None
    mode: str = "exact"

    @property
    def total_mass(self) -> float:
        return float(sum(self.probabilities.values()))

    def get(self, lam: Lamination) -> float:
        return self.probabilities.get(tuple(lam), 0.0)


def mu0_lamination_distribution_exact(g: PlanarGraph, zippers: Sequence[Zipper]) -> LamDistribution:
    """Точные вероятности ламинаций: вес конфигурации 2^k"""
    weights: Dict[Lamination, int] = {}
    total = 0
    for cfg, mult in enumerate_double_dimer(g):
        lam = lamination_of(cfg, zippers)
        weights[lam] = weights.get(lam, 0) + mult
        total += mult
    if total == 0:
        raise TopologyError(f"У графа {g.name} нет димерных покрытий")
    probs = {lam: w / total for lam, w in weights.items()}
    return LamDistribution(probabilities=probs, stderr={lam: 0.0 for lam in probs}, mode="exact")


def mu0_lamination_distribution_mc(g: PlanarGraph, zippers: Sequence[Zipper], n: int,
                                   seed: Optional[int] = None, workers: Optional[int] = None) -> LamDistribution:
    """Оценка распределения по парам независимых точных выборок"""
    counts: Dict[Lamination, int] = {}
    for cfg in sample_double_dimer(g, None, n, seed, workers):
        lam = lamination_of(cfg, zippers)
        counts[lam] = counts.get(lam, 0) + 1
    probs = {lam: c / n for lam, c in counts.items()}
    stderr = {lam: float(np.sqrt(p * (1 - p) / n)) for lam, p in probs.items()}
    logger.info(f"🎲 {g.name}: {len(probs)} ламинаций по {n} выборкам")
    return LamDistribution(probabilities=probs, stderr=stderr, samples=n, mode="mc")


def lamination_distribution_rows(dist: LamDistribution) -> List[Dict[str, Any]]:
    """Строки таблицы: ламинация, вероятность, ошибка"""
    rows = []
    for lam in sorted(dist.probabilities, key=lambda l: (len(l), [c.sort_key() for c in l])):
        rows.append({"lamination": lamination_label(lam), "loops": len(lam),
                     "probability": dist.probabilities[lam], "stderr": dist.stderr.get(lam, 0.0)})
    return rows


def evaluate_word(word: Sequence[int], matrices: Sequence[Matrix2]) -> Matrix2:
    result = np.eye(2, dtype=complex)
    for letter in word:
        j = abs(letter) - 1
        if j >= len(matrices):
            raise TopologyError(f"Образующая g{abs(letter)} отсутствует на поверхности")
        M = matrices[j]
        result = result @ (M if letter > 0 else np.linalg.inv(M))
    return result


def basis_function(lam: Lamination, matrices: Sequence[Matrix2]) -> complex:
    """∏ по циклам ламинации Tr w_γ"""
    value = 1.0 + 0j
    for c in lam:
        value *= np.trace(evaluate_word(c.word, matrices))
    return complex(value)


def lamination_expectation(dist: LamDistribution, matrices: Sequence[Matrix2]) -> complex:
    """Σ_L P(L) ∏ Tr(w_γ)/2 = Z_dd(Φ)/Z_dd(Id)"""
    total = 0j
    for lam, p in dist.probabilities.items():
        total += p * basis_function(lam, matrices) / 2 ** len(lam)
    return complex(total)


# --- интегрирование по Хаару ---

def catalan(n: int) -> int:
    return comb(2 * n, n) // (n + 1)


def _weyl_nodes(count: int = QUADRATURE_NODES) -> Tuple[np.ndarray, np.ndarray]:
    """Узлы x = cos θ и веса меры (2/π) sin²θ dθ"""
    x, w = roots_chebyu(count)
    return x, w * 2 / np.pi


def trace_moment(power: int, mode: str = "quadrature", samples: int = 100_000,
                 seed: Optional[int] = None) -> Tuple[float, float]:
    """∫ (Tr U)^power dU по SU(2); (значение, стандартная ошибка)"""
    if mode == "quadrature":
        x, w = _weyl_nodes(max(QUADRATURE_NODES, power + 1))
        return float(np.sum(w * (2 * x) ** power)), 0.0
    if mode == "mc":
        rng = np.random.default_rng(Config.SEED if seed is None else seed)
        U = random_su2(rng, samples)
        values = np.trace(U, axis1=1, axis2=2).real ** power
        return float(values.mean()), float(values.std(ddof=1) / np.sqrt(samples))
    raise TopologyError(f"Неизвестный режим {mode}")


@dataclass
class HaarCoefficients:
    """Коэффициенты разложения Z_dd по ламинациям"""
    laminations: List[Lamination]
    values: np.ndarray
    stderr: np.ndarray
    mode: str
    samples: int = 0

    def as_dict(self) -> Dict[str, complex]:
        return {lamination_label(l): complex(v) for l, v in zip(self.laminations, self.values)}


def _solve_gram(G: np.ndarray, b: np.ndarray) -> np.ndarray:
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > 1e12:
        raise TopologyError("Система Грама вырождена: ламинации линейно зависимы на поверхности")
    return np.linalg.solve(G, b)


def haar_extract(evaluator: Callable[[Sequence[Matrix2]], complex], laminations: Sequence[Lamination],
                 n_zippers: int, samples: int = 100_000, seed: Optional[int] = None,
                 mode: str = "mc", batches: int = 20, workers: Optional[int] = None) -> HaarCoefficients:
    """Коэффициенты Z_dd по базису ∏Tr через систему Грама в L²(SU(2)ⁿ, Хаар)"""
    lams = [tuple(l) for l in laminations]
    for lam in lams:
        for c in lam:
            if any(abs(x) > n_zippers for x in c.word):
                raise TopologyError(f"Ламинация {lamination_label(lam)} не выражается на поверхности")

    if mode == "quadrature":
        if n_zippers != 1:
            raise TopologyError("Квадратура Вейля доступна только для одной молнии")
        x, w = _weyl_nodes()
        F = np.empty((len(x), len(lams)), dtype=complex)
        Z = np.empty(len(x), dtype=complex)
        for i, xi in enumerate(x):
            theta = np.arccos(xi)
            U = np.diag([np.exp(1j * theta), np.exp(-1j * theta)])
            F[i] = [basis_function(l, [U]) for l in lams]
            Z[i] = evaluator([U])
        G = (F.T * w) @ F.conj()
        b = (F.conj().T * w) @ Z
        values = _solve_gram(G, b)
        return HaarCoefficients(lams, values, np.zeros(len(lams)), "quadrature", len(x))

    if mode != "mc":
        raise TopologyError(f"Неизвестный режим {mode}")

    batches = max(2, min(batches, samples))
    sizes = [samples // batches + (1 if i < samples % batches else 0) for i in range(batches)]
    rngs = parallel_manager.spawn_rngs(Config.SEED if seed is None else seed, batches)

    def run_batch(job) -> Tuple[np.ndarray, np.ndarray]:
        size, rng = job
        G = np.zeros((len(lams), len(lams)), dtype=complex)
        b = np.zeros(len(lams), dtype=complex)
        for _ in range(size):
            Us = list(random_su2(rng, n_zippers))
            f = np.array([basis_function(l, Us) for l in lams])
            z = evaluator(Us)
            G += np.outer(f, f.conj())
            b += z * f.conj()
        return G / size, b / size

    parts = parallel_manager.map_ordered(run_batch, list(zip(sizes, rngs)), workers)
    G = sum(p[0] * s for p, s in zip(parts, sizes)) / samples
    b = sum(p[1] * s for p, s in zip(parts, sizes)) / samples
    values = _solve_gram(G, b)
    try:
        per_batch = np.array([_solve_gram(Gb, bb) for Gb, bb in parts])
        stderr = per_batch.std(axis=0, ddof=1) / np.sqrt(batches)
    except TopologyError:
        logger.warning("⚠️ Пакеты слишком малы для оценки ошибки")
        stderr = np.full(len(lams), np.inf)
    logger.info(f"🎲 Хаар Монте-Карло: {samples} выборок, {batches} пакетов")
    return HaarCoefficients(lams, values, np.abs(stderr), "mc", samples)


def power_laminations(max_power: int, generator: int = 1) -> List[Lamination]:
    """Ламинации из k параллельных копий петли g_generator, k = 0..max_power"""
    return [tuple([LoopClass((generator,))] * k) for k in range(max_power + 1)]
