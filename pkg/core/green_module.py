"""
Дискретные функции Грина, K⁻¹ через функции Грина и проверка
дискретных уравнений Коши–Римана
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Hashable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from core.kasteleyn_module import KMatrix
from core.lattice_module import GridRegion, PlanarGraph, Point, temperleyan_graph

logger = logging.getLogger(__name__)

OUTER = "outer"


class GreenError(ValueError):
    """Ошибка построения функции Грина"""


@dataclass
class GreenOperator:
    """G = (D − A)^{-1} на незакреплённых узлах, ноль на закреплённых"""
    nodes: List[Hashable]
    matrix: np.ndarray
    kind: str
    pinned: Tuple[Hashable, ...]
    laplacian: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.index = {v: i for i, v in enumerate(self.nodes)}

    def __call__(self, a: Hashable, b: Hashable) -> float:
        if a in self.pinned or b in self.pinned:
            return 0.0
        return float(self.matrix[self.index[a], self.index[b]])

    def difference(self, a1: Hashable, a2: Hashable, b: Hashable) -> float:
        """G(a1, b) − G(a2, b)"""
        return self(a1, b) - self(a2, b)

    def laplacian_residual(self) -> float:
        """max |ΔG − I| на незакреплённых узлах"""
        return float(np.max(np.abs(self.laplacian @ self.matrix - np.eye(len(self.nodes)))))

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.T)))


def _green_from_graph(graph: nx.Graph, pinned: Sequence[Hashable], kind: str) -> GreenOperator:
    pinned = tuple(p for p in pinned if p in graph)
    if not pinned:
        raise GreenError("Лапласиан вырожден: нужен хотя бы один закреплённый узел")
    nodes = [v for v in graph.nodes if v not in pinned]
    full = list(graph.nodes)
    lap = nx.laplacian_matrix(graph, nodelist=full).toarray().astype(float)
    keep = [full.index(v) for v in nodes]
    reduced = lap[np.ix_(keep, keep)]
    if reduced.size and np.linalg.matrix_rank(reduced) < len(nodes):
        raise GreenError("Лапласиан вырожден: компонента без закреплённых узлов")
    matrix = np.linalg.inv(reduced) if reduced.size else reduced
    return GreenOperator(nodes=nodes, matrix=matrix, kind=kind, pinned=pinned, laplacian=reduced)


def primal_graph(region: GridRegion) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(region.vertices)
    g.add_edges_from(region.edges)
    return g


def _face_key(region: GridRegion, x: float, y: float) -> Hashable:
    """Грань с нижним левым углом (x, y), либо дыра, либо внешняя грань"""
    if (x, y) in region.faces:
        return (x, y)
    for j, (a0, b0, a1, b1) in enumerate(region.holes):
        if a0 <= x < a1 and b0 <= y < b1:
            return ("hole", j)
    return OUTER


def _faces_of_edge(region: GridRegion, a: Point, b: Point) -> Tuple[Hashable, Hashable]:
    """(грань слева, грань справа) при обходе a → b"""
    if a[1] == b[1]:
        x = min(a[0], b[0])
        above, below = _face_key(region, x, a[1]), _face_key(region, x, a[1] - 1)
        return (above, below) if b[0] > a[0] else (below, above)
    y = min(a[1], b[1])
    west, east = _face_key(region, a[0] - 1, y), _face_key(region, a[0], y)
    return (west, east) if b[1] > a[1] else (east, west)


def dual_graph(region: GridRegion) -> nx.MultiGraph:
    """Двойственный граф: грани, дыры и внешняя грань; по ребру на каждое ребро области"""
    g = nx.MultiGraph()
    g.add_nodes_from(region.faces)
    g.add_node(OUTER)
    g.add_nodes_from(("hole", j) for j in range(len(region.holes)))
    for a, b in region.edges:
        left, right = _faces_of_edge(region, a, b)
        if left != right:
            g.add_edge(left, right)
    return g


def discrete_green(domain: Union[GridRegion, nx.Graph], kind: str = "neumann",
                   boundary: Optional[Sequence[Hashable]] = None) -> GreenOperator:
    """Функция Грина: neumann на вершинах (закреплена в x_0), dirichlet на гранях (ноль вне области)"""
    if kind not in ("neumann", "dirichlet"):
        raise GreenError(f"Неизвестный тип {kind}")
    if isinstance(domain, GridRegion):
        if kind == "neumann":
            return _green_from_graph(primal_graph(domain), [domain.root], kind)
        holes = [("hole", j) for j in range(len(domain.holes))]
        return _green_from_graph(dual_graph(domain), [OUTER] + holes, kind)
    if not boundary:
        raise GreenError("Для произвольного графа нужно задать закреплённые узлы")
    return _green_from_graph(domain, boundary, kind)


# --- K^{-1} через функции Грина ---

def _point(z: complex) -> Point:
    return (int(round(z.real)), int(round(z.imag)))


def kinv_via_green(region: GridRegion, graph: Optional[PlanarGraph] = None) -> np.ndarray:
    """K^{-1}(b, w) тривиальной связности: строки чёрные, столбцы белые (порядок графа Темперли)"""
    if region.holes:
        raise GreenError("Формула через функции Грина реализована только для односвязных областей")
    g = graph or temperleyan_graph(region)
    G = discrete_green(region, "neumann")
    Gs = discrete_green(region, "dirichlet")

    def face(z: complex) -> Hashable:
        return _face_key(region, int(np.floor(z.real)), int(np.floor(z.imag)))

    whites, blacks = g.whites(), g.blacks()
    table = np.zeros((len(blacks), len(whites)), dtype=complex)
    for j, wid in enumerate(whites):
        w = g.vertices[wid]
        for i, bid in enumerate(blacks):
            b = g.vertices[bid]
            if w.cls == "W0":
                if b.cls == "B0":
                    table[i, j] = G.difference(_point(w.pos + 0.5), _point(w.pos - 0.5), _point(b.pos))
                else:
                    table[i, j] = -1j * Gs.difference(face(w.pos + 0.5j), face(w.pos - 0.5j), face(b.pos))
            else:
                if b.cls == "B1":
                    table[i, j] = Gs.difference(face(w.pos + 0.5), face(w.pos - 0.5), face(b.pos))
                else:
                    table[i, j] = -1j * G.difference(_point(w.pos + 0.5j), _point(w.pos - 0.5j), _point(b.pos))
    return table


def scalar_inverse_table(kinv: KMatrix, g: PlanarGraph) -> np.ndarray:
    """Компонента [0,0] блоков K^{-1}(b, w) в том же порядке, что kinv_via_green"""
    whites, blacks = g.whites(), g.blacks()
    table = np.zeros((len(blacks), len(whites)), dtype=complex)
    for i, b in enumerate(blacks):
        for j, w in enumerate(whites):
            table[i, j] = kinv.block(b, w)[0, 0]
    return table


# --- дискретные сечения и уравнения Коши–Римана ---

@dataclass
class DiscreteSection:
    """u на вершинах области (B0), v на гранях (B1); v = 0 вне области"""
    u: Dict[Point, complex]
    v: Dict[Point, complex]

    def u_at(self, p: Point) -> complex:
        return self.u.get(p, 0j)

    def v_at(self, f: Hashable) -> complex:
        return self.v.get(f, 0j) if isinstance(f, tuple) and len(f) == 2 and isinstance(f[0], int) else 0j


def section_from_kinv_column(kinv: KMatrix, g: PlanarGraph, w: int) -> DiscreteSection:
    """Сечение столбца K^{-1}(·, w): u = s·K^{-1} на B0, v = s·K^{-1}/i на B1, s = 1 или i"""
    cls = g.vertices[w].cls
    if cls not in ("W0", "W1"):
        raise GreenError(f"Вершина {w} не белая вершина графа Темперли")
    s = 1.0 if cls == "W0" else 1j
    u: Dict[Point, complex] = {}
    v: Dict[Point, complex] = {}
    for b in g.blacks():
        vert = g.vertices[b]
        value = complex(kinv.block(b, w)[0, 0])
        if vert.cls == "B0":
            u[_point(vert.pos)] = s * value
        else:
            v[_point(vert.pos - 0.5 - 0.5j)] = s * value / 1j
    return DiscreteSection(u=u, v=v)


@dataclass
class ResidueReport:
    """Вычеты по рёбрам области и дефект гармоничности"""
    residues: Dict[Tuple[Point, Point], complex]
    harmonic_defect: float
    tol: float = 1e-10

    @property
    def poles(self) -> List[Tuple[Point, Point]]:
        return [e for e, r in self.residues.items() if abs(r) > self.tol]

    @property
    def max_defect(self) -> float:
        return max((abs(r) for r in self.residues.values()), default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {"poles": [[list(a), list(b)] for a, b in self.poles],
                "residues": {f"{a}-{b}": [r.real, r.imag] for (a, b), r in self.residues.items()
                             if abs(r) > self.tol},
                "harmonic_defect": self.harmonic_defect}


def check_discrete_CR(section: DiscreteSection, region: GridRegion, tol: float = 1e-10) -> ResidueReport:
    """Вычеты: горизонтальное ребро u(x2)−u(x1)−v(f1)+v(f2), вертикальное i(·) с f1 слева"""
    residues: Dict[Tuple[Point, Point], complex] = {}
    for a, b in region.edges:
        f1, f2 = _faces_of_edge(region, a, b)
        r = section.u_at(b) - section.u_at(a) - section.v_at(f1) + section.v_at(f2)
        residues[(a, b)] = r if a[1] == b[1] else 1j * r

    poles = {p for e, r in residues.items() if abs(r) > tol for p in e}
    vset = set(region.vertices)
    defect = 0.0
    for (x, y) in region.vertices:
        nbrs = [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]
        if (x, y) in poles or (x, y) == region.root or not all(n in vset for n in nbrs):
            continue
        lap = 4 * section.u_at((x, y)) - sum(section.u_at(n) for n in nbrs)
        defect = max(defect, abs(lap))
    return ResidueReport(residues=residues, harmonic_defect=defect, tol=tol)
