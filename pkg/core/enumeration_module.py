"""
Модуль перебора: все димерные покрытия, двойные димерные конфигурации
с кратностями, веса под связностью, оракул статсуммы и точный сэмплер
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from config.config import Config
from core.connection_module import Connection, monodromy_along_edges
from core.enumeration_cache import enumeration_cache
from core.kasteleyn_module import kasteleyn_signs, scalar_kasteleyn_matrix
from core.lattice_module import PlanarGraph
from core.parallel_manager import parallel_manager

logger = logging.getLogger(__name__)

DimerCover = FrozenSet[int]
PROB_CLAMP = 1e-12


class EnumerationError(ValueError):
    """Ошибка перебора или сэмплирования"""


@dataclass(frozen=True)
class Loop:
    """Простой цикл: вершины по порядку, edges[i] соединяет vertices[i] и vertices[i+1]"""
    vertices: Tuple[int, ...]
    edges: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class DoubleDimerConfig:
    """Двойная димерная конфигурация: удвоенные рёбра и простые циклы"""
    doubled: Tuple[int, ...]
    loops: Tuple[Loop, ...]
    contractible: Optional[Tuple[bool, ...]] = field(default=None, compare=False)

    @property
    def k(self) -> int:
        return len(self.loops)

    def multiplicity(self, eid: int) -> int:
        if eid in self.doubled:
            return 2
        return 1 if any(eid in loop.edges for loop in self.loops) else 0

    @property
    def key(self) -> Tuple:
        return (self.doubled, tuple((l.vertices, l.edges) for l in self.loops))


@dataclass
class WeightedZ:
    """Статсумма с разбивкой по числу циклов"""
    Z: complex
    breakdown: Dict[int, complex]

    def to_dict(self) -> Dict[str, Any]:
        return {"Z": [self.Z.real, self.Z.imag],
                "breakdown": {str(k): [v.real, v.imag] for k, v in sorted(self.breakdown.items())}}


def _check_cap(g: PlanarGraph):
    if g.n_vertices > Config.ENUM_CAP:
        raise EnumerationError(
            f"Граф {g.name} слишком велик для перебора: {g.n_vertices} > {Config.ENUM_CAP} вершин"
        )


# --- перебор покрытий ---

def _extend(g: PlanarGraph, covered: List[bool], chosen: List[int], out: List[DimerCover]) -> None:
    try:
        v = covered.index(False)
    except ValueError:
        out.append(frozenset(chosen))
        return
    covered[v] = True
    for eid in g.incidence[v]:
        w = g.edges[eid].other(v)
        if covered[w]:
            continue
        covered[w] = True
        chosen.append(eid)
        _extend(g, covered, chosen, out)
        chosen.pop()
        covered[w] = False
    covered[v] = False


def enumerate_dimer_covers(g: PlanarGraph, workers: Optional[int] = None) -> List[DimerCover]:
    """Все димерные покрытия, перебор с возвратом по наименьшей непокрытой вершине"""
    _check_cap(g)
    cached = enumeration_cache.get(g.fingerprint(), "covers")
    if cached is not None:
        return list(cached)

    if g.n_vertices == 0 or g.n_vertices % 2:
        covers: List[DimerCover] = []
    else:
        # ветви по рёбрам первой вершины, слияние в исходном порядке
        def branch(eid: int) -> List[DimerCover]:
            covered = [False] * g.n_vertices
            e = g.edges[eid]
            covered[e.u] = covered[e.v] = True
            out: List[DimerCover] = []
            _extend(g, covered, [eid], out)
            return out

        first = [eid for eid in g.incidence[0] if g.edges[eid].other(0) != 0]
        covers = [c for part in parallel_manager.map_ordered(branch, first, workers) for c in part]

    enumeration_cache.set(g.fingerprint(), "covers", tuple(covers))
    logger.debug(f"🔢 {g.name}: {len(covers)} димерных покрытий")
    return covers


# --- двойные конфигурации ---

def _canonical_loop(vertices: List[int], edges: List[int]) -> Loop:
    n = len(vertices)
    i0 = vertices.index(min(vertices))
    fwd_v = tuple(vertices[(i0 + k) % n] for k in range(n))
    fwd_e = tuple(edges[(i0 + k) % n] for k in range(n))
    # обратный обход из той же вершины
    bwd_v = tuple(vertices[(i0 - k) % n] for k in range(n))
    bwd_e = tuple(edges[(i0 - k - 1) % n] for k in range(n))
    return Loop(*min((fwd_v, fwd_e), (bwd_v, bwd_e)))


def pair_to_config(g: PlanarGraph, m1: DimerCover, m2: DimerCover) -> DoubleDimerConfig:
    """Наложение двух покрытий: пересечение удваивается, симметрическая разность даёт циклы"""
    doubled = tuple(sorted(m1 & m2))
    adjacency: Dict[int, List[int]] = {}
    for eid in sorted(m1 ^ m2):
        e = g.edges[eid]
        adjacency.setdefault(e.u, []).append(eid)
        adjacency.setdefault(e.v, []).append(eid)

    loops: List[Loop] = []
    visited = set()
    for start in sorted(adjacency):
        if start in visited:
            continue
        vertices, edges = [start], []
        v, prev = start, None
        while True:
            visited.add(v)
            eid = next(x for x in adjacency[v] if x != prev)
            edges.append(eid)
            v, prev = g.edges[eid].other(v), eid
            if v == start:
                break
            vertices.append(v)
        loops.append(_canonical_loop(vertices, edges))

    loops.sort(key=lambda l: (l.vertices, l.edges))
    return DoubleDimerConfig(doubled=doubled, loops=tuple(loops))


def enumerate_double_dimer(g: PlanarGraph, workers: Optional[int] = None) -> List[Tuple[DoubleDimerConfig, int]]:
    """Все двойные конфигурации с числом порождающих пар 2^k"""
    cached = enumeration_cache.get(g.fingerprint(), "double")
    if cached is not None:
        return list(cached)

    covers = enumerate_dimer_covers(g, workers)

    def row(m1: DimerCover) -> List[DoubleDimerConfig]:
        return [pair_to_config(g, m1, m2) for m2 in covers]

    counts: Counter = Counter()
    configs: Dict[Tuple, DoubleDimerConfig] = {}
    for part in parallel_manager.map_ordered(row, covers, workers):
        for cfg in part:
            counts[cfg.key] += 1
            configs.setdefault(cfg.key, cfg)

    result = []
    for key in sorted(configs):
        cfg = configs[key]
        if counts[key] != 2 ** cfg.k:
            raise EnumerationError(
                f"Конфигурация с {cfg.k} циклами получена {counts[key]} парами вместо {2 ** cfg.k}"
            )
        result.append((cfg, counts[key]))
    if sum(c for _, c in result) != len(covers) ** 2:
        raise EnumerationError("Сумма кратностей не равна квадрату числа покрытий")

    enumeration_cache.set(g.fingerprint(), "double", tuple(result))
    return result


def config_to_dict(cfg: DoubleDimerConfig) -> Dict[str, Any]:
    """Строка JSON lines"""
    return {
        "doubled": list(cfg.doubled),
        "loops": [{"vertices": list(l.vertices), "edges": list(l.edges)} for l in cfg.loops],
        "k": cfg.k,
        "contractible": list(cfg.contractible) if cfg.contractible is not None else None,
    }


# --- веса ---

def _as_weights(g: PlanarGraph, nu: Optional[Sequence[complex]]) -> np.ndarray:
    if nu is None:
        return np.ones(g.n_edges)
    arr = np.asarray(nu)
    if arr.shape != (g.n_edges,):
        raise EnumerationError(f"Ожидалось {g.n_edges} весов, получено {arr.shape}")
    return arr


def config_weight(g: PlanarGraph, cfg: DoubleDimerConfig, nu: Optional[Sequence[float]],
                  conn: Connection) -> complex:
    """∏ ν (удвоенные рёбра дважды) × ∏ по циклам Tr монодромии"""
    w = _as_weights(g, nu)
    value = complex(np.prod(w[list(cfg.doubled)] ** 2)) if cfg.doubled else 1.0 + 0j
    for loop in cfg.loops:
        value *= complex(np.prod(w[list(loop.edges)]))
        value *= complex(np.trace(monodromy_along_edges(conn, loop.vertices[0], loop.edges)))
    return value


def partition_oracle(g: PlanarGraph, nu: Optional[Sequence[float]], conn: Connection) -> WeightedZ:
    """Z_dd как сумма весов всех двойных конфигураций"""
    breakdown: Dict[int, complex] = {}
    for cfg, _ in enumerate_double_dimer(g):
        breakdown[cfg.k] = breakdown.get(cfg.k, 0j) + config_weight(g, cfg, nu, conn)
    return WeightedZ(Z=complex(sum(breakdown.values())), breakdown=breakdown)


def single_dimer_partition(g: PlanarGraph, nu: Optional[Sequence[complex]] = None) -> complex:
    """Σ по покрытиям ∏ ν"""
    w = _as_weights(g, nu)
    return complex(sum(np.prod(w[sorted(m)]) for m in enumerate_dimer_covers(g)))


def diagonal_encoding(g: PlanarGraph, nu: Optional[Sequence[float]],
                      conn: Connection) -> Tuple[np.ndarray, np.ndarray]:
    """Пара весов (ν₁, ν₂) для связности с диагональными матрицами молний"""
    w = _as_weights(g, nu).astype(complex)
    nu1, nu2 = w.copy(), w.copy()
    for z in conn.zippers:
        A = z.matrix
        if abs(A[0, 1]) > 1e-14 or abs(A[1, 0]) > 1e-14:
            raise EnumerationError("Кодирование парой весов требует диагональных матриц")
        lam = A[0, 0]
        for eid, left in zip(z.edges, z.left):
            sigma = 1 if g.vertices[left].color == "white" else -1
            nu1[eid] *= lam ** sigma
            nu2[eid] *= lam ** (-sigma)
    return nu1, nu2


# --- точный сэмплер ---

class DimerSampler:
    """Последовательное обусловливание по белым вершинам с обновлением обратной матрицы"""

    def __init__(self, g: PlanarGraph, nu: Optional[Sequence[float]] = None):
        self.logger = logging.getLogger(self.__class__.__name__)
        w = _as_weights(g, nu)
        if np.iscomplexobj(w) or np.any(np.asarray(w) <= 0):
            raise EnumerationError("Сэмплер требует вещественных положительных весов")
        self.graph = g
        self.weights = np.asarray(w, dtype=float)
        self.whites = g.whites()
        self.blacks = g.blacks()
        if len(self.whites) != len(self.blacks):
            raise EnumerationError("Число белых и чёрных вершин не совпадает")

        sw = kasteleyn_signs(g, self.weights)
        self.M = scalar_kasteleyn_matrix(g, sw)
        cond = np.linalg.cond(self.M) if self.M.size else 1.0
        if not np.isfinite(cond) or cond > 1e13:
            raise EnumerationError(f"Матрица Кастелейна вырождена для {g.name}")
        self.Minv = np.linalg.inv(self.M) if self.M.size else self.M

        wi = {v: i for i, v in enumerate(self.whites)}
        bi = {v: j for j, v in enumerate(self.blacks)}
        self.pair_edges: Dict[Tuple[int, int], List[int]] = {}
        for e in g.edges:
            a, b = (e.u, e.v) if e.u in wi else (e.v, e.u)
            self.pair_edges.setdefault((wi[a], bi[b]), []).append(e.id)
        self.clamped = 0

    def _clamp(self, probs: np.ndarray) -> np.ndarray:
        probs = probs.copy()
        low, high = probs < PROB_CLAMP, probs > 1 - PROB_CLAMP
        if np.any(probs < -1e-9) or np.any(probs > 1 + 1e-9):
            self.logger.warning(f"⚠️ Условные вероятности вне [0, 1]: {probs}")
        if np.any(low) or np.any(high):
            self.clamped += int(np.sum(low) + np.sum(high))
            self.logger.debug(f"⚠️ Ограничены вероятности: {probs}")
        probs[low] = 0.0
        probs[high] = 1.0
        return probs

    @staticmethod
    def _choose(rng: np.random.Generator, weights: np.ndarray) -> int:
        total = weights.sum()
        if total <= 0:
            raise EnumerationError("Нет допустимого выбора при обусловливании")
        return int(min(np.searchsorted(np.cumsum(weights), rng.random() * total, side="right"),
                       len(weights) - 1))

    def sample(self, rng: np.random.Generator) -> DimerCover:
        """Одно точное покрытие"""
        cols = list(range(len(self.blacks)))
        B = self.Minv.copy()
        chosen: List[int] = []
        for i in range(len(self.whites)):
            cand = [p for p, b in enumerate(cols) if self.M[i, b] != 0]
            probs = self._clamp(np.array([(self.M[i, cols[p]] * B[p, 0]).real for p in cand]))
            p = cand[self._choose(rng, probs)]
            eids = self.pair_edges[(i, cols[p])]
            if len(eids) > 1:
                eids = [eids[self._choose(rng, self.weights[eids])]]
            chosen.append(eids[0])
            # обратная матрица после удаления строки белой и столбца чёрной
            if len(cols) > 1:
                keep_r = [r for r in range(len(cols)) if r != p]
                B = B[keep_r, 1:] - np.outer(B[keep_r, 0], B[p, 1:]) / B[p, 0]
            cols.pop(p)
        return frozenset(chosen)

    def sample_many(self, n: int, rng: np.random.Generator) -> List[DimerCover]:
        return [self.sample(rng) for _ in range(n)]


def _rng(seed: Union[int, np.random.Generator, None]) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(Config.SEED if seed is None else seed)


def sample_dimer_cover(g: PlanarGraph, nu: Optional[Sequence[float]] = None,
                       seed: Union[int, np.random.Generator, None] = None) -> DimerCover:
    """Точная выборка из μ_ν"""
    return DimerSampler(g, nu).sample(_rng(seed))


def sample_dimer_covers(g: PlanarGraph, nu: Optional[Sequence[float]], n: int,
                        seed: Optional[int] = None, workers: Optional[int] = None) -> List[DimerCover]:
    """n выборок; по независимому потоку на исполнителя, воспроизводимо по (seed, workers)"""
    sampler = DimerSampler(g, nu)
    workers = max(1, min(workers or parallel_manager.max_workers, n or 1))
    rngs = parallel_manager.spawn_rngs(Config.SEED if seed is None else seed, workers)
    chunks = [n // workers + (1 if i < n % workers else 0) for i in range(workers)]
    parts = parallel_manager.map_ordered(lambda job: sampler.sample_many(*job), list(zip(chunks, rngs)), workers)
    covers = [c for part in parts for c in part]
    if sampler.clamped:
        logger.info(f"🎲 {g.name}: ограничено {sampler.clamped} вероятностей при сэмплировании")
    return covers


def sample_double_dimer(g: PlanarGraph, nu: Optional[Sequence[float]], n: int,
                        seed: Optional[int] = None, workers: Optional[int] = None) -> List[DoubleDimerConfig]:
    """n конфигураций из пар независимых покрытий (распределение μ₀ при ν ≡ 1)"""
    covers = sample_dimer_covers(g, nu, 2 * n, seed, workers)
    return [pair_to_config(g, covers[2 * i], covers[2 * i + 1]) for i in range(n)]


def chordal_separation_exact(g: PlanarGraph, b: int, w: int, zipper_edges: Sequence[int]) -> float:
    """Перебором: доля пар (покрытие G, покрытие G∖{b, w}), у которых путь из b в w
    пересекает молнию нечётное число раз

    b и w соседи: покрытия G∖{b, w} получаются из покрытий G с ребром bw.
    """
    links = g.edges_between(b, w)
    if not links:
        raise EnumerationError(f"Вершины {b} и {w} не соседние")
    covers = enumerate_dimer_covers(g)
    inner = [m - {links[0]} for m in covers if links[0] in m]
    if not inner:
        raise EnumerationError(f"У графа без {b} и {w} нет покрытий")

    crossing = set(zipper_edges)
    hits = 0
    for m1 in covers:
        for m2 in inner:
            diff = nx.MultiGraph()
            for eid in m1 ^ m2:
                e = g.edges[eid]
                diff.add_edge(e.u, e.v, key=eid)
            path = nx.node_connected_component(diff, b)
            if w not in path:
                raise EnumerationError("Путь из b не заканчивается в w")
            used = sum(1 for u, _, eid in diff.edges(keys=True) if u in path and eid in crossing)
            hits += used % 2
    return hits / (len(covers) * len(inner))
