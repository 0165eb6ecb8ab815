"""
Модуль связностей: плоские SL2(C)-связности на графе, заданные «молниями» (zippers)

Соглашение о переносах: transport(u, v) есть блок, входящий в K(u, v), то есть
перенос из слоя над v в слой над u. На ребре молнии с левым концом L и правым R
transport(L, R) = A, transport(R, L) = A^{-1}. Калибровка действует как
phi'(u, v) = psi_u^{-1} phi(u, v) psi_v.
"""

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm, logm

from core.lattice_module import FaceKind, PlanarGraph, face_containing

logger = logging.getLogger(__name__)

Matrix2 = np.ndarray

IDENTITY = np.eye(2, dtype=complex)
_DET_TOL = 1e-12


class ZipperError(ValueError):
    """Ошибка построения молнии или связности"""


# --- матрицы 2×2 ---

def matrix2(a: complex, b: complex, c: complex, d: complex) -> Matrix2:
    return np.array([[a, b], [c, d]], dtype=complex)


def q_conjugate(A: Matrix2) -> Matrix2:
    """Кватернионное сопряжение: swap(a, d), negate(b, c)"""
    return np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]], dtype=complex)


def is_sl2(A: Matrix2, tol: float = _DET_TOL) -> bool:
    return abs(np.linalg.det(A) - 1.0) <= tol


def sl2_inverse(A: Matrix2) -> Matrix2:
    """Обратная к матрице из SL2 совпадает с кватернионно сопряжённой"""
    return q_conjugate(A)


def diagonal(lam: complex) -> Matrix2:
    return matrix2(lam, 0, 0, 1 / lam)


def antidiagonal(lam: complex) -> Matrix2:
    return matrix2(0, lam, -1 / lam, 0)


def random_su2(rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Равномерная на S^3 единичная кватернионная матрица (мера Хаара на SU(2))"""
    count = 1 if size is None else size
    q = rng.standard_normal((count, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    a, b, c, d = q.T
    out = np.empty((count, 2, 2), dtype=complex)
    out[:, 0, 0] = a + 1j * b
    out[:, 0, 1] = c + 1j * d
    out[:, 1, 0] = -c + 1j * d
    out[:, 1, 1] = a - 1j * b
    return out[0] if size is None else out


def random_sl2_near_identity(rng: np.random.Generator, scale: float = 0.3) -> Matrix2:
    """exp от случайного элемента sl2 малой нормы"""
    x = scale * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
    X = np.array([[x[0], x[1]], [x[2], -x[0]]], dtype=complex)
    return expm(X)


def matrix_to_list(A: Matrix2) -> List[float]:
    """8 вещественных чисел: (re, im) для a, b, c, d"""
    flat = np.asarray(A, dtype=complex).reshape(4)
    return [float(x) for z in flat for x in (z.real, z.imag)]


def matrix_from_list(values: Sequence[float]) -> Matrix2:
    if len(values) != 8:
        raise ZipperError("Матрица должна задаваться 8 вещественными числами")
    z = [complex(values[2 * k], values[2 * k + 1]) for k in range(4)]
    return np.array(z, dtype=complex).reshape(2, 2)


# --- молнии ---

@dataclass(frozen=True)
class Zipper:
    """Молния: рёбра, пересекаемые простым двойственным путём, и матрица A"""
    start_face: int
    faces: Tuple[int, ...]
    edges: Tuple[int, ...]
    left: Tuple[int, ...]  # левый конец каждого пересекаемого ребра
    signs: Tuple[int, ...]  # +1, если ребро u→v пересекает путь слева направо
    matrix: Matrix2 = field(compare=False)

    @property
    def target_face(self) -> int:
        return self.faces[-1]

    def with_matrix(self, A: Matrix2) -> "Zipper":
        return replace(self, matrix=np.array(A, dtype=complex))

    def index_of(self, eid: int) -> int:
        try:
            return self.edges.index(eid)
        except ValueError:
            raise ZipperError(f"Ребро {eid} не лежит на молнии") from None

    def to_dict(self) -> Dict[str, Any]:
        return {"start_face": self.start_face, "edges": list(self.edges),
                "matrix": matrix_to_list(self.matrix)}


def _check_sl2(A: Matrix2, what: str = "A") -> Matrix2:
    A = np.array(A, dtype=complex)
    if A.shape != (2, 2):
        raise ZipperError(f"{what} должна быть матрицей 2×2")
    if not is_sl2(A):
        raise ZipperError(f"det {what} = {np.linalg.det(A):.3e} ≠ 1")
    return A


def make_zipper(graph: PlanarGraph, start_face: int, edges: Sequence[int], A: Matrix2) -> Zipper:
    """Молния от грани start_face через рёбра edges; левый конец задаёт знак пересечения"""
    A = _check_sl2(A)
    if not edges:
        raise ZipperError("Молния должна пересекать хотя бы одно ребро")
    if not graph.faces[start_face].is_boundary:
        logger.debug(f"🔗 Молния начинается во внутренней грани {start_face}")

    faces = [start_face]
    lefts: List[int] = []
    signs: List[int] = []
    current = start_face
    for eid in edges:
        e = graph.edges[eid]
        fu, fv = graph.faces_of_edge(eid)
        if current == fu:
            # грань слева от u→v: при переходе через ребро v оказывается слева
            nxt, left = fv, e.v
        elif current == fv:
            nxt, left = fu, e.u
        else:
            raise ZipperError(f"Ребро {eid} не лежит на границе грани {current}")
        if nxt in faces:
            raise ZipperError(f"Двойственный путь не прост: грань {nxt} повторяется")
        faces.append(nxt)
        lefts.append(left)
        signs.append(1 if left == e.u else -1)
        current = nxt
    if len(set(edges)) != len(edges):
        raise ZipperError("Ребро пересекается молнией дважды")

    return Zipper(start_face=start_face, faces=tuple(faces), edges=tuple(edges),
                  left=tuple(lefts), signs=tuple(signs), matrix=A)


def axial_zipper(graph: PlanarGraph, A: Matrix2) -> Zipper:
    """Осевой разрез цилиндра: от нижней граничной грани к верхней через ребро склейки"""
    xs = [v.pos.real for v in graph.vertices]
    width = int(round(max(xs))) + 1
    rows = sorted({v.pos.imag for v in graph.vertices})
    wrap = {}
    for e in graph.edges:
        pu, pv = graph.vertices[e.u].pos, graph.vertices[e.v].pos
        if pu.imag == pv.imag and round(pu.real) == width - 1 and round(pv.real) == 0:
            wrap[pu.imag] = e.id
    bottom = [f.id for f in graph.faces if f.kind is FaceKind.OUTER]
    if not bottom or len(wrap) != len(rows):
        raise ZipperError("Осевая молния определена только для цилиндра")
    return make_zipper(graph, bottom[0], [wrap[y] for y in rows], A)


def ray_zipper(graph: PlanarGraph, point: complex, direction: str, A: Matrix2) -> Zipper:
    """Вертикальная молния от граничной грани к грани, содержащей точку"""
    if direction not in ("down", "up"):
        raise ZipperError(f"Неизвестное направление {direction}")
    step = -1.0 if direction == "down" else 1.0
    x0 = point.real + 1e-6
    current = face_containing(graph, point)
    target = current
    crossed: List[int] = []
    y_cur = point.imag
    while not graph.faces[current].is_boundary or current == target:
        best = None
        for eid, _ in graph.faces[current].half_edges:
            e = graph.edges[eid]
            pu, pv = graph.vertices[e.u].pos, graph.vertices[e.v].pos
            if (pu.real - x0) * (pv.real - x0) >= 0:
                continue
            t = (x0 - pu.real) / (pv.real - pu.real)
            y = pu.imag + t * (pv.imag - pu.imag)
            if step * (y - y_cur) <= 0:
                continue
            if best is None or step * (y - best[0]) < 0:
                best = (y, eid)
        if best is None:
            raise ZipperError(f"Луч из {point} не выходит на границу")
        y_cur, eid = best
        fu, fv = graph.faces_of_edge(eid)
        current = fv if current == fu else fu
        crossed.append(eid)
        if current == target:
            raise ZipperError("Луч вернулся в исходную грань")
    return make_zipper(graph, current, list(reversed(crossed)), A)


# --- связность ---

@dataclass(frozen=True)
class Connection:
    """Плоская связность, заданная списком молний"""
    graph: PlanarGraph
    zippers: Tuple[Zipper, ...] = ()
    overrides: Tuple[Tuple[int, int, Any], ...] = ()  # (ребро, левый конец, матрица) вне молний

    @cached_property
    def _edge_map(self) -> Dict[int, Tuple[int, Matrix2]]:
        table: Dict[int, Tuple[int, Matrix2]] = {}
        for z in self.zippers:
            for eid, left in zip(z.edges, z.left):
                if eid in table:
                    raise ZipperError(f"Ребро {eid} лежит на двух молниях")
                table[eid] = (left, z.matrix)
        for eid, left, M in self.overrides:
            table[eid] = (left, np.array(M, dtype=complex))
        return table

    @property
    def is_trivial(self) -> bool:
        return all(np.array_equal(M, IDENTITY) for _, M in self._edge_map.values())

    def edge_transport(self, eid: int, u: int) -> Matrix2:
        """Перенос по ребру eid для блока K(u, другой конец)"""
        item = self._edge_map.get(eid)
        if item is None:
            return IDENTITY
        left, M = item
        return M if u == left else sl2_inverse(M)

    def transport(self, u: int, v: int, eid: Optional[int] = None) -> Matrix2:
        if eid is None:
            ids = self.graph.edges_between(u, v)
            if not ids:
                raise ZipperError(f"Нет ребра между {u} и {v}")
            eid = ids[0]
        return self.edge_transport(eid, u)

    def punctured_faces(self) -> List[int]:
        return sorted({z.target_face for z in self.zippers
                       if not self.graph.faces[z.target_face].is_boundary})

    def to_dict(self) -> Dict[str, Any]:
        return {"graph": self.graph.name, "zippers": [z.to_dict() for z in self.zippers]}


def trivial_connection(graph: PlanarGraph) -> Connection:
    return Connection(graph=graph)


def connection_from_zippers(graph: PlanarGraph, zippers: Iterable[Zipper]) -> Connection:
    conn = Connection(graph=graph, zippers=tuple(zippers))
    _ = conn._edge_map
    return conn


def zipper_from_dict(graph: PlanarGraph, data: Dict[str, Any]) -> Zipper:
    return make_zipper(graph, int(data["start_face"]), [int(e) for e in data["edges"]],
                       matrix_from_list(data["matrix"]))


def perturbed(conn: Connection, eid: int, M: Matrix2) -> Connection:
    """Копия связности с переопределённым переносом на одном ребре (нарушает плоскость)"""
    e = conn.graph.edges[eid]
    return Connection(graph=conn.graph, zippers=conn.zippers,
                      overrides=conn.overrides + ((eid, e.u, np.array(M, dtype=complex)),))


def monodromy_along_edges(conn: Connection, start: int, edge_ids: Sequence[int]) -> Matrix2:
    """Монодромия замкнутого пути, заданного рёбрами (корректно для кратных рёбер)"""
    g = conn.graph
    result = np.eye(2, dtype=complex)
    v = start
    for eid in edge_ids:
        if not (0 <= eid < g.n_edges):
            raise ZipperError(f"Ребра {eid} нет в графе")
        e = g.edges[eid]
        if v not in (e.u, e.v):
            raise ZipperError(f"Путь разорван на ребре {eid}")
        result = result @ conn.edge_transport(eid, v)
        v = e.other(v)
    if v != start:
        raise ZipperError("Путь не замкнут")
    return result


def monodromy(conn: Connection, cycle: Sequence[int]) -> Matrix2:
    """Упорядоченное произведение переносов вдоль замкнутого вершинного пути"""
    walk = list(cycle)
    if len(walk) >= 2 and walk[0] == walk[-1]:
        walk = walk[:-1]
    if len(walk) < 2:
        raise ZipperError("Путь не замкнут")
    edge_ids = []
    for a, b in zip(walk, walk[1:] + walk[:1]):
        ids = conn.graph.edges_between(a, b)
        if not ids:
            raise ZipperError(f"Нет ребра между {a} и {b}")
        edge_ids.append(ids[0])
    return monodromy_along_edges(conn, walk[0], edge_ids)


def face_monodromy(conn: Connection, fid: int) -> Matrix2:
    face = conn.graph.faces[fid]
    return monodromy_along_edges(conn, face.half_edges[0][1], face.edge_ids)


@dataclass(frozen=True)
class GaugedConnection(Connection):
    """Связность после калибровочного преобразования"""
    gauge: Tuple[Any, ...] = ()

    def edge_transport(self, eid: int, u: int) -> Matrix2:
        v = self.graph.edges[eid].other(u)
        base = Connection.edge_transport(self, eid, u)
        return sl2_inverse(self.gauge[u]) @ base @ self.gauge[v]


def gauge_transform(conn: Connection, psi: Dict[int, Matrix2]) -> Connection:
    """Калибровка psi: вершина → SL2; монодромии сопрягаются, следы сохраняются"""
    g = conn.graph
    mats = []
    for v in g.vertices:
        if v.id not in psi:
            raise ZipperError(f"Калибровка не задана в вершине {v.id}")
        mats.append(_check_sl2(psi[v.id], f"psi[{v.id}]"))
    if isinstance(conn, GaugedConnection):
        mats = [old @ new for old, new in zip(conn.gauge, mats)]
    return GaugedConnection(graph=g, zippers=conn.zippers, overrides=conn.overrides,
                            gauge=tuple(mats))


def check_flat(conn: Connection, tol: float = 1e-10) -> Tuple[bool, float, Dict[int, float]]:
    """Максимум ||монодромия − I|| по ограниченным граням (без проколотых)"""
    punctured = set(conn.punctured_faces())
    deviations: Dict[int, float] = {}
    for f in conn.graph.faces:
        if f.is_boundary or f.id in punctured:
            continue
        deviations[f.id] = float(np.linalg.norm(face_monodromy(conn, f.id) - IDENTITY))
    worst = max(deviations.values(), default=0.0)
    flat = worst <= tol
    if not flat:
        bad = [fid for fid, d in deviations.items() if d > tol]
        logger.warning(f"⚠️ Связность не плоская: грани {bad}, отклонение {worst:.3e}")
    return flat, worst, deviations


def _principal_log(A: Matrix2) -> Matrix2:
    eig = np.linalg.eigvals(A)
    for lam in eig:
        if abs(lam.imag) <= 1e-14 * max(1.0, abs(lam)) and lam.real < 0:
            raise ZipperError(f"Собственное значение {lam} на разрезе логарифма")
    return logm(A)


def connection_path(conn: Connection, t: float, targets: Sequence[Matrix2]) -> Connection:
    """Матрицы молний exp(t log A_target); t=0 тривиальная связность, t=1 цели"""
    if len(targets) != len(conn.zippers):
        raise ZipperError("Число целевых матриц не совпадает с числом молний")
    zippers = []
    for z, target in zip(conn.zippers, targets):
        A = _check_sl2(target, "A_target")
        L = _principal_log(A)
        if t == 0:
            M = IDENTITY.copy()
        elif t == 1:
            M = A
        else:
            M = expm(t * L)
        zippers.append(z.with_matrix(M))
    return Connection(graph=conn.graph, zippers=tuple(zippers))


def path_derivative(conn: Connection, t: float, targets: Sequence[Matrix2]) -> List[Matrix2]:
    """d/dt матриц молний на пути: log(A) exp(t log A)"""
    out = []
    for target in targets:
        L = _principal_log(_check_sl2(target, "A_target"))
        out.append(L @ expm(t * L))
    return out


def connection_to_dict(conn: Connection) -> Dict[str, Any]:
    return conn.to_dict()


def connection_from_dict(graph: PlanarGraph, data: Dict[str, Any]) -> Connection:
    return connection_from_zippers(graph, [zipper_from_dict(graph, z) for z in data.get("zippers", [])])
