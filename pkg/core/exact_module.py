"""
Модуль точных ответов: спектр цилиндра и производящие функции числа циклов,
функции Грина полуплоскости, двухточечная и хордовая наблюдаемые
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import dblquad

from core.connection_module import Zipper, trivial_connection
from core.enumeration_module import sample_double_dimer
from core.kasteleyn_module import SignedWeights, assemble, scalar_kasteleyn_matrix, zipper_perturbation
from core.lattice_module import FaceKind, PlanarGraph, SurfaceTag
from core.topology_module import classify_loop

logger = logging.getLogger(__name__)

CONVENTIONS = ("pair-measure", "trace-marking")
NODE_MODES = ("roots", "chebyshev", "product")
CHEBYSHEV_HALF_WIDTH = 2.5
CLIP_TOL = 1e-13


class ExactError(ValueError):
    """Ошибка точных формул"""


@dataclass
class Poly:
    """Многочлен от X = λ + 1/λ: значение exp(log_scale)·Σ c_k X^k"""
    coeffs: np.ndarray
    log_scale: float = 0.0
    tail_bound: float = 0.0
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x: complex) -> complex:
        return complex(np.exp(self.log_scale) * np.polyval(self.coeffs[::-1], x))

    def scaled_coeffs(self) -> np.ndarray:
        return self.coeffs * np.exp(self.log_scale)

    def coefficient(self, k: int) -> float:
        return float(self.coeffs[k].real) if 0 <= k < len(self.coeffs) else 0.0

    def is_pgf(self, tol: float = 1e-10) -> bool:
        c = np.asarray(self.coeffs)
        return bool(np.all(np.abs(c.imag) <= tol) and np.all(c.real >= -tol) and abs(c.real.sum() - 1) <= tol)

    def to_list(self) -> List[float]:
        return [float(c.real) for c in self.scaled_coeffs()]


# --- цилиндр ---

def _check_cylinder(n: int, m: int):
    if n < 1 or m < 1:
        raise ExactError("n и m должны быть положительными")
    if n % 2 == 0:
        raise ExactError("Формула произведения требует нечётного n")


def cylinder_roots(m: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """θ_k = πk/(m+1) и корни α_k, β_k = i(−cos θ ± √(1+cos²θ))"""
    theta = np.pi * np.arange(1, m + 1) / (m + 1)
    c = np.cos(theta)
    s = np.sqrt(1 + c ** 2)
    return theta, 1j * (-c + s), 1j * (-c - s)


def _log_t(n: int, m: int) -> np.ndarray:
    """log t_k, где множитель k равен X + t_k, t_k = |α_k|^{2n} + |α_k|^{-2n}"""
    _, alpha, _ = cylinder_roots(m)
    r = 2 * n * np.log(np.abs(alpha))
    return np.abs(r) + np.log1p(np.exp(-2 * np.abs(r)))


def cylinder_detK(n: int, m: int, lam: complex) -> complex:
    """∏_k (λ − α_k^{2n})(λ − β_k^{2n})/λ"""
    _check_cylinder(n, m)
    if lam == 0:
        raise ExactError("λ должно быть ненулевым")
    _, alpha, beta = cylinder_roots(m)
    return complex(np.prod((lam - alpha ** (2 * n)) * (lam - beta ** (2 * n)) / lam))


def effective_tau(n: int, m: int) -> float:
    """Отношение сторон для сравнения с q-произведением: углы спектра πk/(m+1)"""
    return n / (m + 1)


def cylinder_kmatrix_full(n: int, m: int, lam: complex) -> np.ndarray:
    """Скалярная K на всех 2nm вершинах: a вперёд, 1/a назад по горизонтали, i по вертикали"""
    _check_cylinder(n, m)
    width = 2 * n
    a = complex(lam) ** (1 / width)
    K = np.zeros((width * m, width * m), dtype=complex)

    def idx(x: int, y: int) -> int:
        return (y - 1) * width + (x % width)

    for y in range(1, m + 1):
        for x in range(width):
            K[idx(x, y), idx(x + 1, y)] += a
            K[idx(x + 1, y), idx(x, y)] += 1 / a
            if y < m:
                K[idx(x, y), idx(x, y + 1)] += 1j
                K[idx(x, y + 1), idx(x, y)] += 1j
    return K


def cylinder_eigen_check(n: int, m: int, lam: complex, k: int, j: int) -> float:
    """Невязка f(x,y) = z^x (w^y − w^{−y}) для собственного значения az + 1/(az) + i(w + 1/w)"""
    K = cylinder_kmatrix_full(n, m, lam)
    width = 2 * n
    a = complex(lam) ** (1 / width)
    z = np.exp(2j * np.pi * k / width)
    w = np.exp(1j * np.pi * j / (m + 1))
    f = np.array([z ** x * (w ** y - w ** (-y)) for y in range(1, m + 1) for x in range(width)])
    mu = a * z + 1 / (a * z) + 1j * (w + 1 / w)
    return float(np.linalg.norm(K @ f - mu * f) / max(np.linalg.norm(f), 1e-300))


def _normalized_values(log_t: np.ndarray, X: np.ndarray) -> np.ndarray:
    """∏ (1 + X/t_k) на узлах X"""
    inv_t = np.exp(-log_t)
    return np.prod(1 + np.outer(X, inv_t), axis=1)


def _clean(coeffs: np.ndarray, tol: float) -> np.ndarray:
    c = np.array(coeffs, dtype=complex)
    scale = float(np.max(np.abs(c))) if c.size else 0.0
    if scale == 0:
        return c.real
    if np.real(c[np.argmax(np.abs(c))]) < 0:
        c = -c
    if np.any(c.real < -tol * scale * 1e3):
        raise ExactError(f"Отрицательный коэффициент вне допуска: {c.real.min():.3e}")
    small = np.abs(c) < tol * scale
    if np.any(small & (np.abs(c) > 0)):
        logger.debug(f"⚠️ Обнулено {int(np.sum(small))} малых коэффициентов")
    c[small] = 0.0
    if np.max(np.abs(c.imag)) > 1e-8 * scale:
        logger.warning(f"⚠️ Мнимая часть коэффициентов {np.max(np.abs(c.imag)):.2e}")
    return np.clip(c.real, 0.0, None)


def cylinder_loop_poly(n: int, m: int, nodes: str = "roots", tol: float = CLIP_TOL) -> Poly:
    """Коэффициенты N_k: det K = Σ N_k X^k (масштаб хранится в log_scale)"""
    _check_cylinder(n, m)
    if nodes not in NODE_MODES:
        raise ExactError(f"Неизвестные узлы {nodes}")
    log_t = _log_t(n, m)
    log_scale = float(np.sum(log_t))

    if nodes == "product":
        c = np.array([1.0])
        for lt in log_t:
            c = np.convolve(c, [1.0, np.exp(-lt)])
    elif nodes == "roots":
        omega = np.exp(2j * np.pi * np.arange(m + 1) / (m + 1))
        values = _normalized_values(log_t, omega)
        c = np.fft.fft(values) / (m + 1)
    else:
        x = CHEBYSHEV_HALF_WIDTH * np.cos(np.pi * (np.arange(m + 1) + 0.5) / (m + 1))
        V = np.polynomial.polynomial.polyvander(x, m)
        cond = np.linalg.cond(V)
        if cond > 1e12:
            raise ExactError(f"Интерполяция плохо обусловлена (cond = {cond:.2e}), используйте nodes='roots'")
        c = np.linalg.solve(V, _normalized_values(log_t, x))

    poly = Poly(coeffs=_clean(c, tol), log_scale=log_scale, meta={"n": n, "m": m, "nodes": nodes})
    logger.debug(f"🧮 Многочлен цилиндра {n}×{m}: степень {poly.degree}, узлы {nodes}")
    return poly


def cylinder_pgf(n: int, m: int, convention: str = "pair-measure", nodes: str = "roots") -> Poly:
    """Производящая функция числа циклов: pair-measure N_k 2^k, trace-marking N_k"""
    if convention not in CONVENTIONS:
        raise ExactError(f"Неизвестное соглашение {convention}")
    c = cylinder_loop_poly(n, m, nodes).coeffs
    if convention == "pair-measure":
        c = c * 2.0 ** np.arange(len(c))
    return Poly(coeffs=c / c.sum(), meta={"n": n, "m": m, "convention": convention})


def cylinder_pgf_asymptotic(tau: float, m_parity: Any, k_max: int = 10, j_max: int = 60) -> Poly:
    """q-произведение, q = e^{−πτ}: чётное m по нечётным j, нечётное m с множителем (2+X)/3"""
    if tau <= 0:
        raise ExactError("τ должно быть положительным")
    odd = (m_parity % 2 == 1) if isinstance(m_parity, (int, np.integer)) else str(m_parity) == "odd"
    q = np.exp(-np.pi * tau)
    start = 2 if odd else 1

    c = np.array([2.0, 1.0]) / 3 if odd else np.array([1.0])
    for j in range(start, j_max + 1, 2):
        qj = q ** j
        if qj == 0:
            break
        factor = np.array([1 + qj * qj, qj]) / (1 + qj + qj * qj)
        c = np.convolve(c, np.convolve(factor, factor))

    omitted = 1.0
    j = j_max + 2 if (j_max % 2) == (start % 2) else j_max + 1
    while True:
        qj = q ** j
        if qj < 1e-17:
            break
        omitted *= ((1 + qj * qj) / (1 + qj + qj * qj)) ** 2
        j += 2
    coeffs = np.zeros(k_max + 1)
    top = min(len(c), k_max + 1)
    coeffs[:top] = c[:top]
    return Poly(coeffs=coeffs, tail_bound=abs(1 - omitted),
                meta={"tau": tau, "q": q, "parity": "odd" if odd else "even"})


# --- полуплоскость ---

def _check_upper(*points: complex):
    for p in points:
        if complex(p).imag <= 0:
            raise ExactError(f"Точка {p} не лежит в открытой верхней полуплоскости")


def halfplane_greens(u: complex, v: complex, kind: str = "dirichlet") -> complex:
    """Комплексный потенциал g̃, Re g̃ есть функция Грина полуплоскости"""
    _check_upper(u, v)
    u, v = complex(u), complex(v)
    if abs(u - v) == 0:
        raise ExactError("Совпадающие точки")
    if kind == "dirichlet":
        return complex(-np.log((u - v) / (np.conj(u) - v)) / (2 * np.pi))
    if kind == "neumann":
        return complex(-(np.log(u - v) + np.log(np.conj(u) - v)) / (2 * np.pi))
    raise ExactError(f"Неизвестный тип {kind}")


def halfplane_F(u: complex, v: complex, kind: str = "dirichlet") -> Tuple[complex, complex, complex]:
    """(F₊, F₋, F†₊) = (∂g̃/∂u, ∂g̃/∂ū, 0)"""
    _check_upper(u, v)
    u, v = complex(u), complex(v)
    if abs(u - v) == 0:
        raise ExactError("Совпадающие точки")
    f_plus = -1 / (2 * np.pi * (u - v))
    f_minus = 1 / (2 * np.pi * (np.conj(u) - v))
    if kind == "neumann":
        f_minus = -f_minus
    elif kind != "dirichlet":
        raise ExactError(f"Неизвестный тип {kind}")
    return complex(f_plus), complex(f_minus), 0j


def halfplane_green_real(x: complex, y: complex, v: complex, kind: str = "dirichlet") -> Tuple[complex, complex]:
    """Вещественные части голоморфной и антиголоморфной по u частей g̃ в координатах u = x + iy"""
    a, b = complex(v).real, complex(v).imag
    hol = -np.log((x - a) ** 2 + (y - b) ** 2) / (4 * np.pi)
    anti = np.log((x - a) ** 2 + (y + b) ** 2) / (4 * np.pi)
    if kind == "neumann":
        anti = -anti
    return hol, anti


def potential_kernel(x: int, y: int) -> float:
    """a(x, y) = (1/4π²) ∬ (1 − cos(xθ + yφ)) / (4 − 2cos θ − 2cos φ)"""
    if x == 0 and y == 0:
        return 0.0

    def integrand(phi: float, theta: float) -> float:
        den = 4 - 2 * np.cos(theta) - 2 * np.cos(phi)
        if den < 1e-14:
            return 0.0
        return (1 - np.cos(x * theta + y * phi)) / den

    value, _ = dblquad(integrand, 0, np.pi, 0, np.pi, epsabs=1e-11, epsrel=1e-11)
    # симметрия квадрата [−π, π]²: чётность по (θ, φ) и по отражению φ → −φ
    value_reflected, _ = dblquad(lambda p, t: integrand(-p, t), 0, np.pi, 0, np.pi, epsabs=1e-11, epsrel=1e-11)
    return float(2 * (value + value_reflected) / (4 * np.pi ** 2))


# --- две точки и хорда ---

def _log_ratio(z1: complex, z2: complex) -> float:
    return float(np.log(abs((z1 - z2) / (z1 - np.conj(z2)))))


def _packet_sum(z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """Сумма четырёх произведений таблицы RR, RL, LR, LL (без множителя ε²/π²)"""
    a = 1 / (z2 - z1)
    b = 1 / (z2 - np.conj(z1))
    c = 1 / (z1 - z2)
    d = 1 / (z1 - np.conj(z2))
    rr = (a + b).real * (c + d).real
    rl = -(a + b).imag * (c - d).imag
    lr = -(a - b).imag * (c + d).imag
    ll = (a - b).real * (c - d).real
    return rr + rl + lr + ll


@dataclass
class TwoPointResult:
    """Дискретная сумма Римана для среднего числа циклов вокруг двух точек"""
    value: float
    continuum: float
    eps: float
    layout: str
    tail_bound: float
    packets: int

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "continuum": self.continuum, "eps": self.eps,
                "layout": self.layout, "tail_bound": self.tail_bound, "packets": self.packets,
                "abs_diff": abs(self.value - self.continuum)}


def _midpoints(y0: float, y1: float, eps: float) -> Tuple[np.ndarray, float]:
    count = max(1, int(round((y1 - y0) / eps)))
    step = (y1 - y0) / count
    return y0 + step * (np.arange(count) + 0.5), step


def two_point_riemann_sum(z1: complex, z2: complex, eps: float, layout: str = "split",
                          window: float = 8.0) -> TwoPointResult:
    """Сумма по парам пакетов двух вертикальных молний; коэффициент при ε² равен половине среднего"""
    z1, z2 = complex(z1), complex(z2)
    _check_upper(z1, z2)
    if z1 == z2:
        raise ExactError("Совпадающие точки")
    if eps <= 0:
        raise ExactError("ε должно быть положительным")
    low, high = (z1, z2) if z1.imag <= z2.imag else (z2, z1)
    continuum = -4 / np.pi ** 2 * _log_ratio(z1, z2)

    y_low, d_low = _midpoints(0.0, low.imag, eps)
    tail = 0.0
    if layout == "down":
        if z1.real == z2.real:
            raise ExactError("Схема down требует разных абсцисс")
        y_high, d_high = _midpoints(0.0, high.imag, eps)
        sigma = 1.0
    elif layout == "split":
        top = high.imag + window * abs(z1 - np.conj(z2))
        y_high, d_high = _midpoints(high.imag, top, eps)
        sigma = -1.0
        # хвост молнии выше окна: −(2/π²) F(low, x + i·top)
        tail = -2 / np.pi ** 2 * _log_ratio(low, complex(high.real, top))
    else:
        raise ExactError(f"Неизвестная схема {layout}")

    P = low.real + 1j * y_low[:, None]
    Q = high.real + 1j * y_high[None, :]
    window_sum = float(np.sum(_packet_sum(P, Q))) * d_low * d_high / np.pi ** 2
    coefficient = -sigma * (window_sum + tail)
    return TwoPointResult(value=2 * coefficient, continuum=continuum, eps=eps, layout=layout,
                          tail_bound=2 * abs(tail), packets=int(len(y_low) * len(y_high)))


def two_point_loop_expectation(z1: complex, z2: complex, mode: str = "continuum",
                               eps: Optional[float] = None, layout: str = "split") -> float:
    """Среднее число циклов, окружающих обе точки верхней полуплоскости"""
    z1, z2 = complex(z1), complex(z2)
    _check_upper(z1, z2)
    if z1 == z2:
        raise ExactError("Совпадающие точки")
    if mode == "continuum":
        return -4 / np.pi ** 2 * _log_ratio(z1, z2)
    if mode == "discrete":
        if eps is None:
            raise ExactError("Для дискретного режима нужен шаг ε")
        return two_point_riemann_sum(z1, z2, eps, layout).value
    raise ExactError(f"Неизвестный режим {mode}")


def finite_two_point_expectation(g: PlanarGraph, sw: SignedWeights, zipper_1: Zipper, zipper_2: Zipper) -> float:
    """Точное среднее на конечном графе: tr(X)² − tr(X²), X = M̃₀^{-1} S"""
    K0 = assemble(g, sw, trivial_connection(g))
    M0 = K0.white_black_block()
    eye = np.eye(2, dtype=complex)
    dA = np.array([[0, 1], [0, 0]], dtype=complex)
    dB = np.array([[0, 0], [1, 0]], dtype=complex)
    S = zipper_perturbation(g, sw, zipper_1.with_matrix(eye), dA) + \
        zipper_perturbation(g, sw, zipper_2.with_matrix(eye), dB)
    k = 2 * K0.n_white
    X = np.linalg.solve(M0, S[:k, k:])
    value = complex(np.trace(X) ** 2 - np.trace(X @ X))
    if abs(value.imag) > 1e-8 * max(1.0, abs(value)):
        logger.warning(f"⚠️ Мнимая часть среднего числа циклов: {value.imag:.2e}")
    return float(value.real)


def mc_two_point_expectation(g: PlanarGraph, zippers: Sequence[Zipper], n: int,
                             seed: Optional[int] = None, workers: Optional[int] = None) -> Tuple[float, float]:
    """Оценка Монте-Карло: циклы, слово которых содержит все образующие"""
    generators = set(range(1, len(zippers) + 1))
    counts = []
    for cfg in sample_double_dimer(g, None, n, seed, workers):
        counts.append(sum(1 for loop in cfg.loops
                          if {abs(x) for x in classify_loop(loop, zippers).word} == generators))
    values = np.array(counts, dtype=float)
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(len(values))) if n > 1 else 0.0


def chordal_left_probability(b: float, w: float, z: complex) -> float:
    """Гармоническая мера отрезка (b, w) из точки z: (arg(z − w) − arg(z − b))/π"""
    if not b < w:
        raise ExactError("Требуется b < w")
    z = complex(z)
    if z.imag <= 0:
        raise ExactError("Точка z должна лежать внутри полуплоскости")
    return float((np.angle(z - w) - np.angle(z - b)) / np.pi)


def _outer_vertices(g: PlanarGraph) -> set:
    return {t for f in g.faces if f.kind is FaceKind.OUTER for _, t in f.half_edges}


def finite_chordal_probability(g: PlanarGraph, sw: SignedWeights, b: int, w: int, zipper: Zipper) -> float:
    """Вероятность того, что хордовый путь из b в w отделяет грань молнии от её граничного конца

    Путь берётся из объединения покрытия G и независимого покрытия G∖{b, w}.
    Производная по a при a = 1 от det K_a(G)·det K_{1/a}(G∖{b, w}) даёт сумму по рёбрам молнии
    ±K₀(wᵢ,bᵢ)K₀⁻¹(b,wᵢ)K₀⁻¹(bᵢ,w)/K₀⁻¹(b,w); знак задаёт направление пересечения.
    """
    if g.surface is not SurfaceTag.DISK:
        raise ExactError("Хордовый путь определён только для односвязного графа")
    whites, blacks = g.whites(), g.blacks()
    if g.vertices[b].color != "black" or g.vertices[w].color != "white":
        raise ExactError("Ожидались чёрная вершина b и белая вершина w")
    outer = _outer_vertices(g)
    if b not in outer or w not in outer:
        raise ExactError("Концы пути должны лежать на внешней границе")
    if len(whites) != len(blacks):
        raise ExactError("Граф не сбалансирован")

    wi = {v: i for i, v in enumerate(whites)}
    bi = {v: j for j, v in enumerate(blacks)}
    N = np.linalg.inv(scalar_kasteleyn_matrix(g, sw))  # строки чёрные, столбцы белые
    pivot = N[bi[b], wi[w]]
    if abs(pivot) < 1e-12:
        raise ExactError("У графа без b и w нет покрытий")

    total = 0j
    for eid, sign in zip(zipper.edges, zipper.signs):
        e = g.edges[eid]
        white, black = (e.u, e.v) if e.u in wi else (e.v, e.u)
        s = sign if e.u == white else -sign
        total += s * sw[eid] * N[bi[black], wi[w]] * N[bi[b], wi[white]]
    value = complex(total / pivot)
    if abs(value.imag) > 1e-8 * max(1.0, abs(value)):
        logger.warning(f"⚠️ Мнимая часть хордовой вероятности: {value.imag:.2e}")
    # общий знак зависит от ориентации молнии
    return float(abs(value.real))
