"""
Модуль Кастелейна: знаки, самодвойственная кватернионная матрица K,
кватернионный определитель тремя способами, обратная матрица и
производная логарифма определителя вдоль пути связностей
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from core.connection_module import (
    Connection, Matrix2, Zipper, connection_path, path_derivative, q_conjugate, sl2_inverse,
)
from core.lattice_module import FaceKind, PlanarGraph, SurfaceTag

logger = logging.getLogger(__name__)

ROUTES = ("definition", "doubled-det", "pfaffian")
DEFINITION_MAX_BLOCKS = 8
_ANTISYM_TOL = 1e-10
_J = np.array([[0, 1], [-1, 0]], dtype=complex)


class KasteleynError(ValueError):
    """Ошибка знаков Кастелейна или линейной алгебры"""


# --- знаки ---

@dataclass(frozen=True)
class SignedWeights:
    """Вес ребра × знак/фаза Кастелейна"""
    graph: PlanarGraph
    values: Tuple[complex, ...]
    mode: str = "generic"

    def __getitem__(self, eid: int) -> complex:
        return self.values[eid]

    def raw_weights(self) -> np.ndarray:
        return np.abs(np.array(self.values, dtype=complex))


def _direction_phase(d: complex) -> complex:
    """1, i, −1, −i для соседа на E, N, W, S"""
    if abs(d.imag) < 1e-9:
        return 1.0 if d.real > 0 else -1.0
    return 1j if d.imag > 0 else -1j


def _generic_signs(g: PlanarGraph) -> np.ndarray:
    """Распространение знаков по двойственному остовному дереву"""
    simple = nx.Graph()
    simple.add_nodes_from(range(g.n_vertices))
    simple.add_edges_from((e.u, e.v) for e in g.edges)
    planar, _ = nx.check_planarity(simple)
    if not planar:
        raise KasteleynError(f"Граф {g.name} не планарен")

    # первичное остовное дерево обходом в ширину
    in_tree = np.zeros(g.n_edges, dtype=bool)
    seen = {0}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for eid in g.incidence[v]:
            w = g.edges[eid].other(v)
            if w not in seen:
                seen.add(w)
                in_tree[eid] = True
                queue.append(w)

    signs = np.ones(g.n_edges)
    outer = [f.id for f in g.faces if f.kind is FaceKind.OUTER]
    root = outer[0] if outer else g.faces[-1].id

    dual: Dict[int, List[Tuple[int, int]]] = {f.id: [] for f in g.faces}
    for e in g.edges:
        if in_tree[e.id]:
            continue
        fa, fb = g.faces_of_edge(e.id)
        dual[fa].append((fb, e.id))
        dual[fb].append((fa, e.id))

    parent_edge: Dict[int, int] = {}
    order = [root]
    visited = {root}
    queue = deque([root])
    while queue:
        f = queue.popleft()
        for h, eid in dual[f]:
            if h not in visited:
                visited.add(h)
                parent_edge[h] = eid
                order.append(h)
                queue.append(h)

    for fid in reversed(order[1:]):
        face = g.faces[fid]
        eid = parent_edge[fid]
        minus = sum(1 for e, _ in face.half_edges if e != eid and signs[e] < 0)
        target = (len(face) // 2 + 1) % 2
        signs[eid] = -1.0 if (minus % 2) != target else 1.0
    return signs


def kasteleyn_signs(g: PlanarGraph, weights: Optional[Sequence[float]] = None) -> SignedWeights:
    """Знаки Кастелейна: правило 1, i, −1, −i; правило цилиндра; общий планарный случай"""
    if not g.is_bipartite:
        raise KasteleynError("Знаки Кастелейна определены только для двудольных графов")
    nu = np.ones(g.n_edges) if weights is None else np.asarray(weights, dtype=float)
    if nu.shape != (g.n_edges,) or np.any(nu <= 0):
        raise KasteleynError("Веса рёбер должны быть положительными и заданы на всех рёбрах")

    if all(v.cls in ("B0", "B1", "W0", "W1") for v in g.vertices):
        mode = "temperleyan"
        phases = []
        for e in g.edges:
            w, b = (e.u, e.v) if g.vertices[e.u].color == "white" else (e.v, e.u)
            phases.append(_direction_phase(g.vertices[b].pos - g.vertices[w].pos))
        values = nu * np.array(phases, dtype=complex)
    elif g.surface is SurfaceTag.CYLINDER:
        mode = "cylinder"
        phases = [1.0 if g.vertices[e.u].pos.imag == g.vertices[e.v].pos.imag else 1j for e in g.edges]
        values = nu * np.array(phases, dtype=complex)
    else:
        mode = "generic"
        values = nu * _generic_signs(g)

    sw = SignedWeights(graph=g, values=tuple(complex(x) for x in values), mode=mode)
    logger.debug(f"🧮 Знаки Кастелейна для {g.name}: режим {mode}")
    return sw


def check_face_rule(g: PlanarGraph, sw: SignedWeights) -> Tuple[bool, float, Dict[int, float]]:
    """Отклонение знакопеременного произведения от (−1)^(ℓ/2+1) по ограниченным граням"""
    deviations: Dict[int, float] = {}
    for f in g.interior_faces():
        ratio = 1.0 + 0j
        for k, (eid, _) in enumerate(f.half_edges):
            ratio = ratio * sw[eid] if k % 2 == 0 else ratio / sw[eid]
        expected = (-1) ** (len(f) // 2 + 1)
        deviations[f.id] = float(abs(ratio / abs(ratio) - expected))
    worst = max(deviations.values(), default=0.0)
    return worst <= 1e-12, worst, deviations


# --- матрица K ---

def vertex_order(g: PlanarGraph) -> Tuple[int, ...]:
    """Канонический порядок: белые, затем чёрные (для двудольных графов)"""
    if g.is_bipartite:
        return tuple(g.whites() + g.blacks())
    return tuple(v.id for v in g.vertices)


@dataclass
class KMatrix:
    """Самодвойственная матрица с блоками 2×2 и удвоенным представлением 2n×2n"""
    doubled: np.ndarray
    order: Tuple[int, ...]
    n_white: int = 0
    bipartite: bool = False
    normalization: complex = 1.0
    graph: Optional[PlanarGraph] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.order)

    @cached_property
    def index(self) -> Dict[int, int]:
        return {v: i for i, v in enumerate(self.order)}

    @property
    def blocks(self) -> np.ndarray:
        n = self.n
        return self.doubled.reshape(n, 2, n, 2).transpose(0, 2, 1, 3)

    def block(self, u: int, v: int) -> Matrix2:
        i, j = self.index[u], self.index[v]
        return self.doubled[2 * i:2 * i + 2, 2 * j:2 * j + 2]

    def white_black_block(self) -> np.ndarray:
        if not self.bipartite:
            raise KasteleynError("Матрица не двудольная")
        k = 2 * self.n_white
        return self.doubled[:k, k:]


def kmatrix_from_doubled(doubled: np.ndarray, n_white: Optional[int] = None) -> KMatrix:
    """Матрица без графа (для случайных самодвойственных проверок)"""
    doubled = np.asarray(doubled, dtype=complex)
    if doubled.ndim != 2 or doubled.shape[0] != doubled.shape[1] or doubled.shape[0] % 2:
        raise KasteleynError("Удвоенная матрица должна быть квадратной чётного размера")
    n = doubled.shape[0] // 2
    return KMatrix(doubled=doubled, order=tuple(range(n)), n_white=n_white or 0,
                   bipartite=n_white is not None)


def random_self_dual(rng: np.random.Generator, n_blocks: int) -> KMatrix:
    """Случайная самодвойственная матрица: K(j,i) = K(i,j)*, диагональ скалярна"""
    blocks = np.zeros((n_blocks, n_blocks, 2, 2), dtype=complex)
    for i in range(n_blocks):
        blocks[i, i] = complex(rng.standard_normal(), rng.standard_normal()) * np.eye(2)
        for j in range(i + 1, n_blocks):
            B = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            blocks[i, j] = B
            blocks[j, i] = q_conjugate(B)
    return kmatrix_from_doubled(blocks.transpose(0, 2, 1, 3).reshape(2 * n_blocks, 2 * n_blocks))


def q_conjugate_blocks(K: KMatrix) -> np.ndarray:
    """Удвоенная матрица K*: блок (u,v) равен K(v,u)*"""
    b = K.blocks
    qc = np.stack([b[:, :, 1, 1], -b[:, :, 0, 1], -b[:, :, 1, 0], b[:, :, 0, 0]], axis=-1)
    qc = qc.reshape(K.n, K.n, 2, 2).transpose(1, 0, 2, 3)
    return qc.transpose(0, 2, 1, 3).reshape(2 * K.n, 2 * K.n)


def self_duality_defect(K: KMatrix) -> float:
    """max |K(u,v) − K(v,u)*|"""
    return float(np.max(np.abs(K.doubled - q_conjugate_blocks(K)))) if K.n else 0.0


def scalar_kasteleyn_matrix(g: PlanarGraph, sw: SignedWeights) -> np.ndarray:
    """Скалярная матрица M_0: строки белые, столбцы чёрные"""
    whites, blacks = g.whites(), g.blacks()
    wi = {w: i for i, w in enumerate(whites)}
    bi = {b: j for j, b in enumerate(blacks)}
    M = np.zeros((len(whites), len(blacks)), dtype=complex)
    for e in g.edges:
        w, b = (e.u, e.v) if e.u in wi else (e.v, e.u)
        M[wi[w], bi[b]] += sw[e.id]
    return M


def _permutation_sign(perm: Sequence[int]) -> int:
    seen = [False] * len(perm)
    sign = 1
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def cover_phase(g: PlanarGraph, sw: SignedWeights) -> complex:
    """Фаза члена определителя M_0 для опорного паросочетания"""
    whites = g.whites()
    blacks = g.blacks()
    if len(whites) != len(blacks):
        return 1.0
    bip = nx.Graph()
    bip.add_nodes_from(("w", w) for w in whites)
    bip.add_nodes_from(("b", b) for b in blacks)
    bip.add_edges_from((("w", e.u), ("b", e.v)) if g.vertices[e.u].color == "white"
                       else (("w", e.v), ("b", e.u)) for e in g.edges)
    matching = nx.bipartite.hopcroft_karp_matching(bip, top_nodes=[("w", w) for w in whites])
    if any(("w", w) not in matching for w in whites):
        logger.debug(f"🧮 У графа {g.name} нет совершенного паросочетания")
        return 1.0
    M0 = scalar_kasteleyn_matrix(g, sw)
    bi = {b: j for j, b in enumerate(blacks)}
    perm = [bi[matching[("w", w)][1]] for w in whites]
    phase = complex(_permutation_sign(perm))
    for i, j in enumerate(perm):
        phase *= M0[i, j] / abs(M0[i, j])
    return phase


def _check_same_graph(g: PlanarGraph, other: PlanarGraph, what: str) -> None:
    if other is not g and other.fingerprint() != g.fingerprint():
        raise KasteleynError(f"{what} задан на другом графе")


def assemble(g: PlanarGraph, sw: SignedWeights, conn: Connection) -> KMatrix:
    """K(v, v') = K_ν(v, v') φ(v, v'), удвоенное представление"""
    _check_same_graph(g, sw.graph, "Набор знаков")
    _check_same_graph(g, conn.graph, "Связность")
    order = vertex_order(g)
    idx = {v: i for i, v in enumerate(order)}
    n = len(order)
    doubled = np.zeros((2 * n, 2 * n), dtype=complex)
    for e in g.edges:
        w = sw[e.id]
        for a, b in ((e.u, e.v), (e.v, e.u)):
            i, j = idx[a], idx[b]
            doubled[2 * i:2 * i + 2, 2 * j:2 * j + 2] += w * conn.edge_transport(e.id, a)

    n_white = len(g.whites()) if g.is_bipartite else 0
    normalization = 1.0 + 0j
    if g.is_bipartite:
        c = cover_phase(g, sw)
        normalization = (-1) ** n_white * c * c
    return KMatrix(doubled=doubled, order=order, n_white=n_white, bipartite=g.is_bipartite,
                   normalization=normalization, graph=g)


def kmatrix_to_dict(K: KMatrix) -> Dict[str, Any]:
    """Плотная комплексная матрица построчно: [re, im]"""
    return {
        "order": list(K.order),
        "n_white": K.n_white,
        "normalization": [K.normalization.real, K.normalization.imag],
        "doubled": [[[float(z.real), float(z.imag)] for z in row] for row in K.doubled],
    }


# --- кватернионный определитель ---

@dataclass(frozen=True)
class QValue:
    """Значение Qdet с меткой способа вычисления"""
    value: complex
    route: str
    raw: complex
    normalization: complex = 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {"value": [self.value.real, self.value.imag], "route": self.route,
                "raw": [self.raw.real, self.raw.imag]}


def pfaffian(A: np.ndarray) -> complex:
    """Пфаффиан кососимметричной матрицы (исключение Парлетта–Рида с выбором ведущего)"""
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise KasteleynError("Матрица должна быть квадратной")
    if n % 2:
        raise KasteleynError("Пфаффиан определён только для чётной размерности")
    scale = max(1.0, float(np.max(np.abs(A)))) if n else 1.0
    if n and np.max(np.abs(A + A.T)) > _ANTISYM_TOL * scale:
        raise KasteleynError("Матрица не кососимметрична")

    result = 1.0 + 0j
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(A[k + 1:, k])))
        if kp != k + 1:
            A[[k + 1, kp], k:] = A[[kp, k + 1], k:]
            A[k:, [k + 1, kp]] = A[k:, [kp, k + 1]]
            result = -result
        if A[k + 1, k] == 0:
            return 0j
        result *= A[k, k + 1]
        if k + 2 < n:
            tau = A[k, k + 2:] / A[k, k + 1]
            col = A[k + 2:, k + 1].copy()
            A[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return complex(result)


def _qdet_definition(K: KMatrix) -> complex:
    n = K.n
    if n > DEFINITION_MAX_BLOCKS:
        raise KasteleynError(f"Способ definition допускает не более {DEFINITION_MAX_BLOCKS} блоков")
    blocks = K.blocks
    support = [[j for j in range(n) if np.any(blocks[i, j] != 0)] for i in range(n)]
    perm = [-1] * n
    used = [False] * n
    total = 0j

    def term() -> complex:
        seen = [False] * n
        value = 1.0 + 0j
        cycles = 0
        for start in range(n):
            if seen[start]:
                continue
            cycles += 1
            prod = np.eye(2, dtype=complex)
            v = start
            while not seen[v]:
                seen[v] = True
                prod = prod @ blocks[v, perm[v]]
                v = perm[v]
            value *= 0.5 * np.trace(prod)
        return value if (n - cycles) % 2 == 0 else -value

    def extend(i: int) -> None:
        nonlocal total
        if i == n:
            total += term()
            return
        for j in support[i]:
            if not used[j]:
                used[j] = True
                perm[i] = j
                extend(i + 1)
                used[j] = False

    extend(0)
    return total


def _pfaffian_route(K: KMatrix) -> complex:
    Z = np.kron(np.eye(K.n), _J)
    A = Z @ K.doubled
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A + A.T)) > _ANTISYM_TOL * scale:
        raise KasteleynError("Матрица ZK̃ не кососимметрична: K не самодвойственна")
    return pfaffian(A)


def qdet(K: KMatrix, route: str = "doubled-det") -> QValue:
    """Кватернионный определитель; value нормирован на фазу опорного покрытия"""
    if route == "definition":
        raw = _qdet_definition(K)
    elif route == "pfaffian":
        raw = _pfaffian_route(K)
    elif route == "doubled-det":
        if not K.bipartite:
            raise KasteleynError("Способ doubled-det требует двудольной матрицы")
        raw = (-1) ** K.n_white * complex(np.linalg.det(K.white_black_block()))
    else:
        raise KasteleynError(f"Неизвестный способ {route}")
    raw = complex(raw)
    return QValue(value=raw / K.normalization, route=route, raw=raw, normalization=K.normalization)


def qdet_all_routes(K: KMatrix) -> Dict[str, QValue]:
    """Все применимые способы вычисления Qdet"""
    routes = ["pfaffian"]
    if K.bipartite:
        routes.append("doubled-det")
    if K.n <= DEFINITION_MAX_BLOCKS:
        routes.append("definition")
    return {r: qdet(K, r) for r in routes}


def route_disagreement(values: Dict[str, QValue]) -> float:
    """Максимальное относительное расхождение между способами"""
    raws = [v.raw for v in values.values()]
    scale = max(max(abs(r) for r in raws), 1e-300)
    return max(abs(a - b) for a in raws for b in raws) / scale


def logdet(K: KMatrix) -> complex:
    """Комплексный логарифм det K̃ (ветвь главного значения)"""
    sign, logabs = np.linalg.slogdet(K.doubled)
    return complex(logabs, np.angle(sign))


# --- обратная и производные ---

def inverse(K: KMatrix) -> KMatrix:
    """Самодвойственная обратная матрица"""
    cond = np.linalg.cond(K.doubled)
    if not np.isfinite(cond) or cond > 1e13:
        raise KasteleynError(f"Матрица K вырождена (число обусловленности {cond:.2e})")
    inv = np.linalg.inv(K.doubled)
    return KMatrix(doubled=inv, order=K.order, n_white=K.n_white, bipartite=K.bipartite,
                   normalization=1.0 / K.normalization, graph=K.graph)


def logdet_derivative(K: KMatrix, S: np.ndarray, kinv: Optional[KMatrix] = None) -> complex:
    """d/dt log det K̃_t = Tr(S̃ K̃^{-1})"""
    S = np.asarray(S, dtype=complex)
    if not np.any(S):
        return 0j
    inv = (kinv or inverse(K)).doubled
    return complex(np.sum(S * inv.T))


def zipper_perturbation(g: PlanarGraph, sw: SignedWeights, zipper: Zipper, dA: Matrix2) -> np.ndarray:
    """S̃ для производной dA матрицы молнии: S(L,R) = K_ν dA, S(R,L) = −K_ν A^{-1} dA A^{-1}"""
    order = vertex_order(g)
    idx = {v: i for i, v in enumerate(order)}
    n = len(order)
    S = np.zeros((2 * n, 2 * n), dtype=complex)
    A_inv = sl2_inverse(zipper.matrix)
    d_inv = -A_inv @ np.asarray(dA, dtype=complex) @ A_inv
    for eid, left in zip(zipper.edges, zipper.left):
        right = g.edges[eid].other(left)
        i, j = idx[left], idx[right]
        S[2 * i:2 * i + 2, 2 * j:2 * j + 2] += sw[eid] * np.asarray(dA, dtype=complex)
        S[2 * j:2 * j + 2, 2 * i:2 * i + 2] += sw[eid] * d_inv
    return S


def path_perturbation(g: PlanarGraph, sw: SignedWeights, conn: Connection,
                      targets: Sequence[Matrix2], t: float) -> Tuple[Connection, np.ndarray]:
    """Связность на пути и её производная S̃ по t"""
    conn_t = connection_path(conn, t, targets)
    S = np.zeros((2 * g.n_vertices, 2 * g.n_vertices), dtype=complex)
    for z, dA in zip(conn_t.zippers, path_derivative(conn, t, targets)):
        S += zipper_perturbation(g, sw, z, dA)
    return conn_t, S


def logdet_finite_difference(g: PlanarGraph, sw: SignedWeights, conn: Connection,
                             targets: Sequence[Matrix2], t: float, h: float = 1e-4) -> complex:
    """Центральная разность log det K̃ вдоль пути связностей"""
    plus = assemble(g, sw, connection_path(conn, t + h, targets)).doubled
    minus = assemble(g, sw, connection_path(conn, t - h, targets)).doubled
    sp, lp = np.linalg.slogdet(plus)
    sm, lm = np.linalg.slogdet(minus)
    return complex(lp - lm, np.angle(sp * np.conj(sm))) / (2 * h)


def zipper_edge_contribution(K: KMatrix, zipper: Zipper, edge_index: int, sw: SignedWeights,
                             dA: Matrix2, kinv: Optional[KMatrix] = None) -> Matrix2:
    """Слагаемое ребра молнии: S(L,R) K^{-1}(R,L) + S(R,L) K^{-1}(L,R); след даёт вклад в производную"""
    if not (0 <= edge_index < len(zipper.edges)):
        raise KasteleynError(f"Ребро с номером {edge_index} не лежит на молнии")
    if K.graph is None:
        raise KasteleynError("Матрица K не связана с графом")
    inv = kinv or inverse(K)
    eid = zipper.edges[edge_index]
    left = zipper.left[edge_index]
    right = K.graph.edges[eid].other(left)
    dA = np.asarray(dA, dtype=complex)
    A_inv = sl2_inverse(zipper.matrix)
    d_inv = -A_inv @ dA @ A_inv
    return sw[eid] * dA @ inv.block(right, left) + sw[eid] * d_inv @ inv.block(left, right)


def local_coupling_constants(K: KMatrix, edge_ids: Sequence[int],
                             kinv: Optional[KMatrix] = None) -> Dict[int, complex]:
    """½Tr K(w,b) K^{-1}(b,w) по рёбрам: вдали от границы ≈ 1/4"""
    if K.graph is None:
        raise KasteleynError("Матрица K не связана с графом")
    inv = kinv or inverse(K)
    g = K.graph
    out = {}
    for eid in edge_ids:
        e = g.edges[eid]
        w, b = (e.u, e.v) if g.vertices[e.u].color == "white" else (e.v, e.u)
        out[eid] = complex(0.5 * np.trace(K.block(w, b) @ inv.block(b, w)))
    return out
