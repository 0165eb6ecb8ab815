"""
Модуль решёток: области на квадратной сетке, граф Темперли и цилиндр
"""

import json
import os
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

logger = logging.getLogger(__name__)

Point = Tuple[int, int]
Rect = Tuple[int, int, int, int]
# Полуребро: (id ребра, начальная вершина)
HalfEdge = Tuple[int, int]

_TOL = 1e-9


class LatticeError(ValueError):
    """Ошибка построения или проверки решётки"""


class SurfaceTag(Enum):
    """Тип поверхности"""
    DISK = "disk"
    MULTIPLY_CONNECTED = "multiply-connected"
    CYLINDER = "cylinder"


class FaceKind(Enum):
    """Тип грани"""
    INTERIOR = "interior"
    OUTER = "outer"
    HOLE = "hole"


@dataclass(frozen=True)
class Vertex:
    """Вершина графа"""
    id: int
    pos: complex
    color: Optional[str] = None  # "black" | "white"
    cls: Optional[str] = None  # B0 / B1 / W0 / W1


@dataclass(frozen=True)
class Edge:
    """Ребро графа (кратные рёбра различаются по id)"""
    id: int
    u: int
    v: int

    def other(self, x: int) -> int:
        if x == self.u:
            return self.v
        if x == self.v:
            return self.u
        raise LatticeError(f"Вершина {x} не принадлежит ребру {self.id}")


@dataclass(frozen=True)
class Face:
    """Грань: циклический список полурёбер, грань слева"""
    id: int
    half_edges: Tuple[HalfEdge, ...]
    kind: FaceKind = FaceKind.INTERIOR

    @property
    def is_boundary(self) -> bool:
        return self.kind is not FaceKind.INTERIOR

    @property
    def edge_ids(self) -> Tuple[int, ...]:
        return tuple(e for e, _ in self.half_edges)

    def __len__(self) -> int:
        return len(self.half_edges)


@dataclass(frozen=True)
class PlanarGraph:
    """Комбинаторное вложение конечного планарного (мульти)графа"""
    vertices: Tuple[Vertex, ...]
    edges: Tuple[Edge, ...]
    faces: Tuple[Face, ...]
    surface: SurfaceTag = SurfaceTag.DISK
    name: str = ""
    spacing: float = 1.0

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def incidence(self) -> Dict[int, Tuple[int, ...]]:
        inc: Dict[int, List[int]] = {v.id: [] for v in self.vertices}
        for e in self.edges:
            inc[e.u].append(e.id)
            if e.v != e.u:
                inc[e.v].append(e.id)
        return {v: tuple(ids) for v, ids in inc.items()}

    @cached_property
    def face_of_half_edge(self) -> Dict[HalfEdge, int]:
        return {he: f.id for f in self.faces for he in f.half_edges}

    @cached_property
    def is_bipartite(self) -> bool:
        return all(v.color in ("black", "white") for v in self.vertices)

    def vertex(self, vid: int) -> Vertex:
        return self.vertices[vid]

    def edge(self, eid: int) -> Edge:
        return self.edges[eid]

    def face(self, fid: int) -> Face:
        return self.faces[fid]

    def other(self, eid: int, v: int) -> int:
        return self.edges[eid].other(v)

    def head(self, he: HalfEdge) -> int:
        return self.edges[he[0]].other(he[1])

    def edges_between(self, u: int, v: int) -> List[int]:
        return [e for e in self.incidence[u] if self.edges[e].other(u) == v]

    def whites(self) -> List[int]:
        return [v.id for v in self.vertices if v.color == "white"]

    def blacks(self) -> List[int]:
        return [v.id for v in self.vertices if v.color == "black"]

    def interior_faces(self) -> List[Face]:
        return [f for f in self.faces if not f.is_boundary]

    def boundary_faces(self) -> List[Face]:
        return [f for f in self.faces if f.is_boundary]

    def faces_of_edge(self, eid: int) -> Tuple[int, int]:
        """Грани слева от u→v и слева от v→u"""
        e = self.edges[eid]
        return self.face_of_half_edge[(eid, e.u)], self.face_of_half_edge[(eid, e.v)]

    def face_polygon(self, fid: int) -> np.ndarray:
        return np.array([self.vertices[t].pos for _, t in self.faces[fid].half_edges])

    def to_networkx(self) -> nx.MultiGraph:
        g = nx.MultiGraph()
        g.add_nodes_from(v.id for v in self.vertices)
        for e in self.edges:
            g.add_edge(e.u, e.v, key=e.id)
        return g

    def fingerprint(self) -> str:
        return json.dumps(graph_to_dict(self), sort_keys=True)


@dataclass(frozen=True)
class GridRegion:
    """Область U_ε: прямоугольник с прямоугольными дырами на εZ²"""
    spacing: float
    cols: int
    rows: int
    holes: Tuple[Rect, ...]
    vertices: Tuple[Point, ...]
    edges: Tuple[Tuple[Point, Point], ...]
    faces: Tuple[Point, ...]
    marks: Tuple[complex, ...]
    root: Point
    removed_edges: Tuple[Tuple[Point, Point], ...]

    @property
    def n_components(self) -> int:
        return 1 + len(self.holes)

    @property
    def hole_centers(self) -> Tuple[complex, ...]:
        return tuple(complex((a + c) / 2, (b + d) / 2) for a, b, c, d in self.holes)

    def vertex_index(self) -> Dict[Point, int]:
        return {p: i for i, p in enumerate(self.vertices)}


# --- построение областей ---

def _strictly_inside(x: float, y: float, rect: Rect) -> bool:
    x0, y0, x1, y1 = rect
    return x0 + _TOL < x < x1 - _TOL and y0 + _TOL < y < y1 - _TOL


def _on_rect_boundary(z: complex, rect: Rect) -> bool:
    x0, y0, x1, y1 = rect
    x, y = z.real, z.imag
    if not (x0 - _TOL <= x <= x1 + _TOL and y0 - _TOL <= y <= y1 + _TOL):
        return False
    return min(abs(x - x0), abs(x - x1), abs(y - y0), abs(y - y1)) <= _TOL


def build_grid_region(cols: int, rows: int, holes: Sequence[Sequence[int]] = (),
                      marks: Optional[Sequence[complex]] = None,
                      spacing: float = 1.0) -> GridRegion:
    """Построить область: cols×rows вершин, дыры задаются углами (x0, y0, x1, y1)"""
    if spacing <= 0:
        raise LatticeError("Шаг решётки должен быть положительным")
    if cols < 1 or rows < 1:
        raise LatticeError("Размер области должен быть положительным")

    outer: Rect = (0, 0, cols - 1, rows - 1)
    rects: List[Rect] = [tuple(int(c) for c in h) for h in holes]
    for i, (x0, y0, x1, y1) in enumerate(rects):
        if not (0 < x0 < x1 < cols - 1 and 0 < y0 < y1 < rows - 1):
            raise LatticeError(f"Дыра {i} должна лежать строго внутри внешнего прямоугольника")
        for j in range(i):
            a0, b0, a1, b1 = rects[j]
            if not (x1 < a0 or a1 < x0 or y1 < b0 or b1 < y0):
                raise LatticeError(f"Дыры {j} и {i} пересекаются")

    def removed(x: float, y: float) -> bool:
        return any(_strictly_inside(x, y, r) for r in rects)

    vertices = [(x, y) for y in range(rows) for x in range(cols) if not removed(x, y)]
    vset = set(vertices)
    edges: List[Tuple[Point, Point]] = []
    for (x, y) in vertices:
        if (x + 1, y) in vset and not removed(x + 0.5, y):
            edges.append(((x, y), (x + 1, y)))
        if (x, y + 1) in vset and not removed(x, y + 0.5):
            edges.append(((x, y), (x, y + 1)))
    if not edges:
        raise LatticeError("В области нет рёбер")

    faces = [(x, y) for y in range(rows - 1) for x in range(cols - 1)
             if not removed(x + 0.5, y + 0.5)]

    g = nx.Graph()
    g.add_nodes_from(vertices)
    g.add_edges_from(edges)
    if not nx.is_connected(g):
        raise LatticeError("Область несвязна")

    if marks is None:
        marks = [complex(0, 0)] + [complex(r[0], r[3]) for r in rects]
    marks = tuple(complex(z) for z in marks)
    if len(marks) != 1 + len(rects):
        raise LatticeError("Нужна ровно одна отмеченная точка на каждую компоненту границы")
    if not _on_rect_boundary(marks[0], outer):
        raise LatticeError(f"Точка z_0={marks[0]} не лежит на внешней границе")
    for j, r in enumerate(rects, start=1):
        if not _on_rect_boundary(marks[j], r):
            raise LatticeError(f"Точка z_{j}={marks[j]} не лежит на границе дыры {j - 1}")

    # x_0: ближайшая к z_0 вершина внешней границы
    boundary_vertices = [p for p in vertices if _on_rect_boundary(complex(*p), outer)]
    root = min(boundary_vertices, key=lambda p: (abs(complex(*p) - marks[0]), p[1], p[0]))

    # e_j: горизонтальное ребро на верхней стороне дыры, ближайшее к z_j
    removed_edges = []
    for j, (x0, y0, x1, y1) in enumerate(rects, start=1):
        candidates = [((x, y1), (x + 1, y1)) for x in range(x0, x1)]
        removed_edges.append(min(candidates, key=lambda e: (abs(complex(e[0][0] + 0.5, y1) - marks[j]), e[0][0])))

    region = GridRegion(
        spacing=float(spacing), cols=cols, rows=rows, holes=tuple(rects),
        vertices=tuple(vertices), edges=tuple(edges), faces=tuple(faces),
        marks=marks, root=root, removed_edges=tuple(removed_edges),
    )
    logger.debug(f"🧱 Область {cols}×{rows}: {len(vertices)} вершин, {len(edges)} рёбер, "
                 f"{len(faces)} граней, дыр {len(rects)}")
    return region


def region_from_spec(spec: Dict[str, Any]) -> GridRegion:
    """Область из JSON-описания {cols, rows, holes, marks, spacing}"""
    marks = spec.get("marks")
    if marks is not None:
        marks = [complex(m[0], m[1]) for m in marks]
    return build_grid_region(
        int(spec["cols"]), int(spec["rows"]),
        holes=spec.get("holes", []), marks=marks,
        spacing=float(spec.get("spacing", 1.0)),
    )


# --- вложение и грани ---

def _trace_faces(positions: Sequence[complex], edges: Sequence[Edge]) -> List[List[HalfEdge]]:
    """Обход граней по угловому порядку полурёбер (грань слева)"""
    rotation: Dict[int, List[Tuple[float, int]]] = {}
    for e in edges:
        for a, b in ((e.u, e.v), (e.v, e.u)):
            angle = float(np.angle(positions[b] - positions[a]))
            rotation.setdefault(a, []).append((angle, e.id))
    slot: Dict[Tuple[int, int], int] = {}
    for a, items in rotation.items():
        items.sort()
        for idx, (_, eid) in enumerate(items):
            slot[(a, eid)] = idx

    visited = set()
    cycles: List[List[HalfEdge]] = []
    for e in edges:
        for tail in (e.u, e.v):
            if (e.id, tail) in visited:
                continue
            cycle: List[HalfEdge] = []
            eid, t = e.id, tail
            while (eid, t) not in visited:
                visited.add((eid, t))
                cycle.append((eid, t))
                head = edges[eid].other(t)
                items = rotation[head]
                _, eid = items[(slot[(head, eid)] - 1) % len(items)]
                t = head
            cycles.append(cycle)
    return cycles


def _signed_area(points: np.ndarray) -> float:
    nxt = np.roll(points, -1)
    return 0.5 * float(np.sum((np.conj(points) * nxt).imag))


def _point_in_polygon(point: complex, polygon: np.ndarray) -> bool:
    x, y = point.real, point.imag
    inside = False
    n = len(polygon)
    for i in range(n):
        a, b = polygon[i], polygon[(i + 1) % n]
        if (a.imag > y) != (b.imag > y):
            cross = a.real + (y - a.imag) * (b.real - a.real) / (b.imag - a.imag)
            if x < cross:
                inside = not inside
    return inside


def _build_faces(vertices: Sequence[Vertex], edges: Sequence[Edge],
                 hole_points: Sequence[complex]) -> Tuple[Face, ...]:
    positions = [v.pos for v in vertices]
    cycles = _trace_faces(positions, edges)
    tagged = []
    for cycle in cycles:
        poly = np.array([positions[t] for _, t in cycle])
        area = _signed_area(poly)
        if area < 0:
            kind = FaceKind.OUTER
        elif any(_point_in_polygon(p, poly) for p in hole_points):
            kind = FaceKind.HOLE
        else:
            kind = FaceKind.INTERIOR
        centroid = complex(np.mean(poly))
        order = {FaceKind.INTERIOR: 0, FaceKind.OUTER: 1, FaceKind.HOLE: 2}[kind]
        tagged.append((order, round(centroid.imag, 9), round(centroid.real, 9), cycle, kind))
    tagged.sort(key=lambda item: item[:3])
    return tuple(Face(id=i, half_edges=tuple(c), kind=k) for i, (_, _, _, c, k) in enumerate(tagged))


def _surface_for(n_holes: int) -> SurfaceTag:
    return SurfaceTag.DISK if n_holes == 0 else SurfaceTag.MULTIPLY_CONNECTED


def region_graph(region: GridRegion) -> PlanarGraph:
    """Первичный граф области (все вершины, включая x_0), раскраска по чётности"""
    index = region.vertex_index()
    vertices = tuple(
        Vertex(id=i, pos=complex(x, y), color="black" if (x + y) % 2 == 0 else "white")
        for i, (x, y) in enumerate(region.vertices)
    )
    edges = tuple(Edge(id=k, u=index[a], v=index[b]) for k, (a, b) in enumerate(region.edges))
    faces = _build_faces(vertices, edges, region.hole_centers)
    return PlanarGraph(vertices=vertices, edges=edges, faces=faces,
                       surface=_surface_for(len(region.holes)),
                       name=f"grid-{region.cols}x{region.rows}", spacing=region.spacing)


def temperleyan_graph(region: GridRegion) -> PlanarGraph:
    """Двудольный граф Темперли: B0 = вершины без x_0, B1 = грани, W0/W1 = рёбра без e_j"""
    removed = set(region.removed_edges)
    items: List[Tuple[complex, str]] = []
    for (x, y) in region.vertices:
        if (x, y) != region.root:
            items.append((complex(x, y), "B0"))
    for (x, y) in region.faces:
        items.append((complex(x + 0.5, y + 0.5), "B1"))
    for (a, b) in region.edges:
        if (a, b) in removed:
            continue
        cls = "W0" if a[1] == b[1] else "W1"
        items.append((complex((a[0] + b[0]) / 2, (a[1] + b[1]) / 2), cls))

    items.sort(key=lambda it: (it[0].imag, it[0].real))
    vertices = tuple(
        Vertex(id=i, pos=pos, color="black" if cls.startswith("B") else "white", cls=cls)
        for i, (pos, cls) in enumerate(items)
    )
    n_black = sum(1 for v in vertices if v.color == "black")
    n_white = len(vertices) - n_black
    if n_black != n_white:
        raise LatticeError(f"Несбалансированная двудольность: {n_black} чёрных, {n_white} белых")

    lookup = {(round(v.pos.real * 2), round(v.pos.imag * 2)): v.id for v in vertices}
    pairs = []
    for w in vertices:
        if w.color != "white":
            continue
        x2, y2 = round(w.pos.real * 2), round(w.pos.imag * 2)
        # соседи на расстоянии 1/2: E, N, W, S
        for dx, dy in ((1, 0), (0, 1), (-1, 0), (0, -1)):
            b = lookup.get((x2 + dx, y2 + dy))
            if b is not None and vertices[b].color == "black":
                pairs.append((min(w.id, b), max(w.id, b)))
    pairs.sort()
    edges = tuple(Edge(id=k, u=u, v=v) for k, (u, v) in enumerate(pairs))
    faces = _build_faces(vertices, edges, region.hole_centers)

    graph = PlanarGraph(vertices=vertices, edges=edges, faces=faces,
                        surface=_surface_for(len(region.holes)),
                        name=f"temperley-{region.cols}x{region.rows}", spacing=region.spacing)
    logger.debug(f"🧱 Граф Темперли: {n_black} чёрных, {n_white} белых, {len(edges)} рёбер")
    return graph


def cylinder_graph(n: int, m: int) -> PlanarGraph:
    """Цилиндр: окружность 2n, высота m; вершины (x, y), x mod 2n, y = 1..m"""
    if n < 1 or m < 1:
        raise LatticeError("n и m должны быть положительными")
    if n % 2 == 0:
        raise LatticeError("Для чётного n правило знаков цилиндра не реализовано")

    width = 2 * n

    def vid(x: int, y: int) -> int:
        return (y - 1) * width + (x % width)

    vertices = tuple(
        Vertex(id=vid(x, y), pos=complex(x, y), color="white" if (x + y) % 2 == 0 else "black")
        for y in range(1, m + 1) for x in range(width)
    )

    edges: List[Edge] = []
    horizontal: Dict[Tuple[int, int], int] = {}
    vertical: Dict[Tuple[int, int], int] = {}
    for y in range(1, m + 1):
        for x in range(width):
            horizontal[(x, y)] = len(edges)
            edges.append(Edge(id=len(edges), u=vid(x, y), v=vid(x + 1, y)))
        if y < m:
            for x in range(width):
                vertical[(x, y)] = len(edges)
                edges.append(Edge(id=len(edges), u=vid(x, y), v=vid(x, y + 1)))

    faces: List[Face] = []
    for y in range(1, m):
        for x in range(width):
            faces.append(Face(id=len(faces), kind=FaceKind.INTERIOR, half_edges=(
                (horizontal[(x, y)], vid(x, y)),
                (vertical[((x + 1) % width, y)], vid(x + 1, y)),
                (horizontal[(x, y + 1)], vid(x + 1, y + 1)),
                (vertical[(x, y)], vid(x, y + 1)),
            )))
    bottom = tuple((horizontal[(x, 1)], vid(x + 1, 1)) for x in range(width - 1, -1, -1))
    top = tuple((horizontal[(x, m)], vid(x, m)) for x in range(width))
    faces.append(Face(id=len(faces), half_edges=bottom, kind=FaceKind.OUTER))
    faces.append(Face(id=len(faces), half_edges=top, kind=FaceKind.HOLE))

    return PlanarGraph(vertices=vertices, edges=tuple(edges), faces=tuple(faces),
                       surface=SurfaceTag.CYLINDER, name=f"cylinder-{n}x{m}")


def face_containing(graph: PlanarGraph, point: complex) -> int:
    """Грань, содержащая точку (внешняя, если точка вне всех ограниченных граней)"""
    best = None
    for f in graph.faces:
        if f.kind is FaceKind.OUTER:
            continue
        poly = graph.face_polygon(f.id)
        if _point_in_polygon(point, poly):
            area = _signed_area(poly)
            if best is None or area < best[0]:
                best = (area, f.id)
    if best is not None:
        return best[1]
    outer = [f.id for f in graph.faces if f.kind is FaceKind.OUTER]
    if not outer:
        raise LatticeError(f"Точка {point} не лежит ни в одной грани")
    return outer[0]


def count_rooted_spanning_trees(region: GridRegion) -> int:
    """Число остовных деревьев с корнем x_0 (матричная теорема о деревьях)"""
    g = nx.Graph()
    g.add_nodes_from(region.vertices)
    g.add_edges_from(region.edges)
    nodes = [p for p in region.vertices if p != region.root]
    lap = nx.laplacian_matrix(g, nodelist=list(region.vertices)).toarray().astype(float)
    keep = [i for i, p in enumerate(region.vertices) if p != region.root]
    reduced = lap[np.ix_(keep, keep)]
    if not nodes:
        return 1
    return int(round(float(np.linalg.det(reduced))))


# --- проверка вложения ---

@dataclass
class EmbeddingDiagnostics:
    """Результат проверки вложения"""
    passed: bool
    failure: Optional[str] = None
    failed_face: Optional[int] = None
    checks: Dict[str, bool] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "failure": self.failure,
                "failed_face": self.failed_face, "checks": dict(self.checks),
                "details": dict(self.details)}


def validate_embedding(g: PlanarGraph) -> EmbeddingDiagnostics:
    """Проверить Эйлера, согласованность граней и двудольность"""
    diag = EmbeddingDiagnostics(passed=True)

    def fail(name: str, message: str, face: Optional[int] = None) -> EmbeddingDiagnostics:
        diag.checks[name] = False
        diag.passed = False
        diag.failure = message
        diag.failed_face = face
        logger.warning(f"❌ Вложение {g.name}: {message}")
        return diag

    n = g.n_vertices
    for e in g.edges:
        if not (0 <= e.u < n and 0 <= e.v < n):
            return fail("edges", f"ребро {e.id} ссылается на несуществующую вершину")
    diag.checks["edges"] = True

    for f in g.faces:
        hes = f.half_edges
        if not hes:
            return fail("faces_closed", f"грань {f.id} пуста", f.id)
        for k, (eid, tail) in enumerate(hes):
            if not (0 <= eid < g.n_edges) or tail not in (g.edges[eid].u, g.edges[eid].v):
                return fail("faces_closed", f"грань {f.id}: полуребро ({eid}, {tail}) некорректно", f.id)
            head = g.edges[eid].other(tail)
            if hes[(k + 1) % len(hes)][1] != head:
                return fail("faces_closed", f"грань {f.id}: цикл разорван после ребра {eid}", f.id)
    diag.checks["faces_closed"] = True

    seen: Dict[HalfEdge, int] = {}
    for f in g.faces:
        for he in f.half_edges:
            if he in seen:
                return fail("half_edges", f"грань {f.id}: полуребро {he} уже в грани {seen[he]}", f.id)
            seen[he] = f.id
    if len(seen) != 2 * g.n_edges:
        missing = [(e.id, t) for e in g.edges for t in (e.u, e.v) if (e.id, t) not in seen]
        return fail("half_edges", f"полурёбра без грани: {missing[:4]}")
    diag.checks["half_edges"] = True

    if not nx.is_connected(g.to_networkx()):
        return fail("connected", "граф несвязен")
    diag.checks["connected"] = True

    n_boundary = len(g.boundary_faces())
    n_interior = len(g.faces) - n_boundary
    chi = g.n_vertices - g.n_edges + n_interior
    diag.details["euler_characteristic"] = chi
    diag.details["boundary_faces"] = n_boundary
    if chi != 2 - n_boundary:
        return fail("euler", f"V - E + F = {chi}, ожидалось {2 - n_boundary}")
    diag.checks["euler"] = True

    expected = {SurfaceTag.DISK: lambda b: b == 1,
                SurfaceTag.MULTIPLY_CONNECTED: lambda b: b >= 2,
                SurfaceTag.CYLINDER: lambda b: b == 2}[g.surface]
    if not expected(n_boundary):
        return fail("surface", f"тип {g.surface.value} несовместим с {n_boundary} граничными гранями")
    diag.checks["surface"] = True

    if any(v.color is not None for v in g.vertices):
        for e in g.edges:
            cu, cv = g.vertices[e.u].color, g.vertices[e.v].color
            if {cu, cv} != {"black", "white"}:
                return fail("bipartite", f"ребро {e.id} соединяет {cu} и {cv}")
        diag.checks["bipartite"] = True
        diag.details["balanced"] = len(g.whites()) == len(g.blacks())

    return diag


# --- сериализация ---

def graph_to_dict(g: PlanarGraph) -> Dict[str, Any]:
    """Граф в JSON-совместимый словарь"""
    return {
        "name": g.name,
        "surface": g.surface.value,
        "spacing": g.spacing,
        "vertices": [{"id": v.id, "x": v.pos.real, "y": v.pos.imag,
                      "class": v.cls, "color": v.color} for v in g.vertices],
        "edges": [{"id": e.id, "u": e.u, "v": e.v} for e in g.edges],
        "faces": [list(f.edge_ids) for f in g.faces],
        "face_tails": [[t for _, t in f.half_edges] for f in g.faces],
        "face_kinds": [f.kind.value for f in g.faces],
    }


def graph_from_dict(data: Dict[str, Any]) -> PlanarGraph:
    """Восстановить граф из словаря"""
    vertices = tuple(Vertex(id=int(v["id"]), pos=complex(v["x"], v["y"]),
                            color=v.get("color"), cls=v.get("class"))
                     for v in data["vertices"])
    edges = tuple(Edge(id=int(e["id"]), u=int(e["u"]), v=int(e["v"])) for e in data["edges"])
    kinds = data.get("face_kinds") or ["interior"] * len(data["faces"])
    faces = tuple(
        Face(id=i, half_edges=tuple(zip(map(int, ids), map(int, tails))), kind=FaceKind(kind))
        for i, (ids, tails, kind) in enumerate(zip(data["faces"], data["face_tails"], kinds))
    )
    return PlanarGraph(vertices=vertices, edges=edges, faces=faces,
                       surface=SurfaceTag(data.get("surface", "disk")),
                       name=data.get("name", ""), spacing=float(data.get("spacing", 1.0)))


def save_graph(g: PlanarGraph, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(graph_to_dict(g), f, ensure_ascii=False, indent=2)
    logger.info(f"💾 Граф {g.name} сохранён в {path}")


def load_graph(path: str) -> PlanarGraph:
    with open(path, "r", encoding="utf-8") as f:
        return graph_from_dict(json.load(f))
