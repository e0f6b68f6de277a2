"""
Esqueletización, transformada de distancia euclidiana exacta y camino central.

Es el sustrato geométrico de la estimación de severidad y de clDice.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy import ndimage

from src.core.errors import EmptyMaskError
from src.core.types import BinaryMask

logger = logging.getLogger(__name__)

# Conectividad 8 para etiquetar componentes
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class DistanceMap:
    """Distancia euclidiana de cada píxel al fondo más cercano (0 en el fondo)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SkeletonPath:
    """Puntos (x, y) ordenados a lo largo de la línea central; consecutivos son 8-vecinos."""

    points: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.points)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Devuelve (filas, columnas) listas para indexar arreglos numpy."""
        xs = np.array([p[0] for p in self.points], dtype=int)
        ys = np.array([p[1] for p in self.points], dtype=int)
        return ys, xs


def _neighbourhood(img: np.ndarray) -> list[np.ndarray]:
    """P2..P9 en sentido horario empezando por el norte."""
    p = np.pad(img, 1).astype(np.uint8)
    return [
        p[:-2, 1:-1],  # P2 N
        p[:-2, 2:],  # P3 NE
        p[1:-1, 2:],  # P4 E
        p[2:, 2:],  # P5 SE
        p[2:, 1:-1],  # P6 S
        p[2:, :-2],  # P7 SO
        p[1:-1, :-2],  # P8 O
        p[:-2, :-2],  # P9 NO
    ]


def _deletable(img: np.ndarray, first_pass: bool) -> np.ndarray:
    n = _neighbourhood(img)
    p2, p3, p4, p5, p6, p7, p8, p9 = n
    b = sum(n)
    ring = n + [p2]
    a = sum((ring[i] == 0) & (ring[i + 1] == 1) for i in range(8))
    if first_pass:
        c = (p2 * p4 * p6 == 0) & (p4 * p6 * p8 == 0)
    else:
        c = (p2 * p4 * p8 == 0) & (p2 * p6 * p8 == 0)
    return img & (b >= 2) & (b <= 6) & (a == 1) & c


def _keep_vanishing_components(img: np.ndarray, delete: np.ndarray) -> np.ndarray:
    """
    Una subiteración de Zhang-Suen puede borrar un componente entero (un
    bloque 2x2); en ese caso se conserva su primer píxel en orden de barrido.
    """
    labels, n = ndimage.label(img, structure=EIGHT_CONNECTED)
    survivors = np.unique(labels[img & ~delete])
    vanished = np.setdiff1d(np.arange(1, n + 1), survivors)
    if vanished.size == 0:
        return delete
    delete = delete.copy()
    flat = labels.ravel()
    for label in vanished:
        first = int(np.argmax(flat == label))
        delete.flat[first] = False
    return delete


def _thin(img: np.ndarray) -> np.ndarray:
    img = img.copy()
    iterations = 0
    while True:
        changed = False
        for first_pass in (True, False):
            delete = _deletable(img, first_pass)
            if delete.any():
                delete = _keep_vanishing_components(img, delete)
                if delete.any():
                    img &= ~delete
                    changed = True
        iterations += 1
        if not changed:
            break
    logger.debug("Zhang-Suen convergió en %d iteraciones", iterations)
    return img


def skeletonize(m: BinaryMask) -> BinaryMask:
    """
    Esqueleto de un píxel de ancho por adelgazamiento Zhang-Suen.

    Se itera hasta que ninguna de las dos subiteraciones borra píxeles, por
    lo que aplicar la función dos veces no cambia el resultado. El trabajo se
    hace sobre la caja envolvente del primer plano.
    """
    if m.is_empty():
        return m
    rows = np.flatnonzero(m.data.any(axis=1))
    cols = np.flatnonzero(m.data.any(axis=0))
    r0, r1, c0, c1 = rows[0], rows[-1] + 1, cols[0], cols[-1] + 1

    out = np.zeros_like(m.data)
    out[r0:r1, c0:c1] = _thin(np.array(m.data[r0:r1, c0:c1]))
    return BinaryMask(out)


def distance_transform(m: BinaryMask) -> DistanceMap:
    """
    EDT exacta. El borde de la imagen cuenta como fondo: se agrega un marco
    virtual de un píxel antes de transformar.
    """
    padded = np.pad(m.data, 1, constant_values=False)
    edt = ndimage.distance_transform_edt(padded)
    return DistanceMap(edt[1:-1, 1:-1])


def skeleton_graph(skel: BinaryMask) -> nx.Graph:
    """Grafo de 8-vecindad; nodos (fila, col) insertados en orden de barrido."""
    graph = nx.Graph()
    ys, xs = np.nonzero(skel.data)
    pixels = set(zip(ys.tolist(), xs.tolist()))
    graph.add_nodes_from(zip(ys.tolist(), xs.tolist()))
    for y, x in zip(ys.tolist(), xs.tolist()):
        for dy, dx in ((0, 1), (1, -1), (1, 0), (1, 1)):
            if (y + dy, x + dx) in pixels:
                graph.add_edge((y, x), (y + dy, x + dx))
    return graph


def _farthest(tree: nx.Graph, source: tuple[int, int]) -> tuple[int, int]:
    # Empates: el nodo más chico en orden de barrido
    lengths = nx.single_source_shortest_path_length(tree, source)
    best = max(lengths.values())
    return min(node for node, d in lengths.items() if d == best)


def longest_path(skel: BinaryMask) -> SkeletonPath:
    """
    Camino geodésico más largo del mayor componente 8-conexo del esqueleto,
    por doble barrido BFS sobre su árbol BFS (exacto en árboles; los ciclos
    quedan cortados por el árbol).

    Raises:
        EmptyMaskError: si el esqueleto no tiene píxeles.
    """
    if skel.is_empty():
        raise EmptyMaskError("el esqueleto está vacío")

    graph = skeleton_graph(skel)
    components = sorted(nx.connected_components(graph), key=lambda c: (-len(c), min(c)))
    if len(components) > 1:
        logger.debug("esqueleto con %d componentes; se usa el mayor (%d px)", len(components), len(components[0]))
    component = components[0]

    start = min(component)
    tree = nx.bfs_tree(graph.subgraph(component), start).to_undirected()
    a = _farthest(tree, start)
    b = _farthest(tree, a)
    path = nx.shortest_path(tree, a, b)
    return SkeletonPath(tuple((int(x), int(y)) for y, x in path))
