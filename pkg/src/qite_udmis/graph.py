"""Unit-disk graphs, a built-in 6-vertex benchmark instance, and a brute-force
maximum-independent-set oracle.

Bitstrings are plain tuples of 0/1 ints, index 0 first. The basis-index
convention matches the state module: vertex/qubit 0 is the most significant
bit of a basis index.
"""

import math

import numpy as np

Bits = tuple[int, ...]

BRUTE_FORCE_CAP = 24
_EDGE_EPS = 1e-12
_CHUNK = 1 << 20


class UnitDiskGraph:
    """Vertices with optional 2D coordinates (in disk-radius units) and an edge set.

    When coordinates are present the edge set is exactly the unit-disk rule:
    (i, j) is an edge iff dist(i, j) < 1 (strict). Instances are immutable.
    """

    __slots__ = ("n_vertices", "coords", "edges")

    def __init__(self, n_vertices: int, coords=None, edges=()):
        if n_vertices < 1:
            raise ValueError("graph needs at least one vertex")
        norm_edges = set()
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop on vertex {i}")
            if not (0 <= i < n_vertices and 0 <= j < n_vertices):
                raise ValueError(f"edge ({i}, {j}) out of range for n={n_vertices}")
            norm_edges.add((min(i, j), max(i, j)))
        if coords is not None:
            coords = tuple((float(x), float(y)) for x, y in coords)
            if len(coords) != n_vertices:
                raise ValueError("coordinate count does not match n_vertices")
            rule_edges = _unit_disk_edges(coords)
            if norm_edges and norm_edges != rule_edges:
                raise ValueError("edge list contradicts the unit-disk rule for the given coordinates")
            norm_edges = rule_edges
        object.__setattr__(self, "n_vertices", int(n_vertices))
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "edges", frozenset(norm_edges))

    def __setattr__(self, name, value):
        raise AttributeError("UnitDiskGraph is immutable")

    def __eq__(self, other):
        if not isinstance(other, UnitDiskGraph):
            return NotImplemented
        return (self.n_vertices, self.coords, self.edges) == (other.n_vertices, other.coords, other.edges)

    def __hash__(self):
        return hash((self.n_vertices, self.coords, self.edges))

    def __repr__(self):
        return f"UnitDiskGraph(n={self.n_vertices}, edges={len(self.edges)})"

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def neighbors(self, i: int) -> set[int]:
        return {b if a == i else a for a, b in self.edges if i in (a, b)}

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))


def _unit_disk_edges(coords) -> set[tuple[int, int]]:
    edges = set()
    for i in range(len(coords)):
        for j in range(i + 1, len(coords)):
            d = math.dist(coords[i], coords[j])
            if abs(d - 1.0) < _EDGE_EPS:
                raise ValueError(
                    f"vertices {i} and {j} sit within {_EDGE_EPS} of the unit distance; "
                    "the edge set would be numerically ill-conditioned"
                )
            if d < 1.0:
                edges.add((i, j))
    return edges


def random_unit_disk(n: int, box_side: float, rng_seed: int) -> UnitDiskGraph:
    """n points i.i.d. uniform in [0, box_side]^2 with unit-disk edges.

    Deterministic given the seed. Draws whose closest pair falls within 1e-12
    of the unit distance are ill-conditioned and are redrawn from the next
    derived stream (seed sequence [rng_seed, attempt]).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if box_side <= 0:
        raise ValueError("box_side must be > 0")
    for attempt in range(100):
        rng = np.random.default_rng([rng_seed, attempt])
        pts = rng.random((n, 2)) * box_side
        try:
            return UnitDiskGraph(n, coords=[(x, y) for x, y in pts])
        except ValueError:
            continue
    raise RuntimeError("could not draw a well-conditioned instance in 100 attempts")


def benchmark_graph_6q() -> UnitDiskGraph:
    """The built-in 6-vertex, 12-edge benchmark instance (no coordinates).

    Its maximum independent sets are {0,2}, {0,4} and {2,5}.
    """
    edges = [
        (0, 1), (0, 3), (0, 5),
        (1, 2), (1, 3), (1, 4), (1, 5),
        (2, 3), (2, 4),
        (3, 4), (3, 5),
        (4, 5),
    ]
    return UnitDiskGraph(6, edges=edges)


def is_independent(g: UnitDiskGraph, s: Bits) -> bool:
    """True iff no edge of `g` has both endpoints selected in `s`."""
    if len(s) != g.n_vertices:
        raise ValueError(f"bitstring length {len(s)} != n_vertices {g.n_vertices}")
    return all(not (s[i] and s[j]) for i, j in g.edges)


def index_to_bits(index: int, n: int) -> Bits:
    """Basis index -> bit tuple; bit of vertex q is (index >> (n-1-q)) & 1."""
    return tuple((index >> (n - 1 - q)) & 1 for q in range(n))


def bits_to_index(s: Bits) -> int:
    n = len(s)
    return sum(bit << (n - 1 - q) for q, bit in enumerate(s))


def independence_mask(g: UnitDiskGraph) -> np.ndarray:
    """Boolean vector over all 2^n basis indices: True where the bitstring is independent."""
    n = g.n_vertices
    if n > BRUTE_FORCE_CAP:
        raise ValueError(f"n={n} exceeds the 2^N enumeration cap ({BRUTE_FORCE_CAP})")
    mask = np.ones(1 << n, dtype=bool)
    for start in range(0, 1 << n, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, 1 << n), dtype=np.int64)
        ok = np.ones(idx.size, dtype=bool)
        for i, j in g.edges:
            bi = (idx >> (n - 1 - i)) & 1
            bj = (idx >> (n - 1 - j)) & 1
            ok &= (bi & bj) == 0
        mask[start : start + idx.size] = ok
    return mask


def brute_force_mis(g: UnitDiskGraph) -> tuple[int, list[Bits]]:
    """Exhaustive maximum independent set: (size, all witnesses in ascending order)."""
    n = g.n_vertices
    mask = independence_mask(g)
    idx = np.arange(1 << n, dtype=np.int64)
    weights = np.bitwise_count(idx).astype(np.int64)
    weights[~mask] = -1
    best = int(weights.max())
    witnesses = [index_to_bits(int(i), n) for i in idx[weights == best]]
    return best, witnesses


def save_graph(g: UnitDiskGraph, path) -> None:
    """Text format: 'n=<N>', optional 'v <i> <x> <y>' lines, 'e <i> <j>' lines."""
    lines = [f"n={g.n_vertices}"]
    if g.coords is not None:
        for i, (x, y) in enumerate(g.coords):
            lines.append(f"v {i} {x!r} {y!r}")
    for i, j in g.sorted_edges():
        lines.append(f"e {i} {j}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_graph(path) -> UnitDiskGraph:
    with open(path, encoding="utf-8") as fh:
        raw = [line.strip() for line in fh if line.strip()]
    if not raw or not raw[0].startswith("n="):
        raise ValueError(f"{path}: first line must be 'n=<N>'")
    n = int(raw[0][2:])
    coords: dict[int, tuple[float, float]] = {}
    edges = []
    for line in raw[1:]:
        parts = line.split()
        if parts[0] == "v" and len(parts) == 4:
            coords[int(parts[1])] = (float(parts[2]), float(parts[3]))
        elif parts[0] == "e" and len(parts) == 3:
            edges.append((int(parts[1]), int(parts[2])))
        else:
            raise ValueError(f"{path}: unrecognized line {line!r}")
    coord_list = None
    if coords:
        if sorted(coords) != list(range(n)):
            raise ValueError(f"{path}: coordinate lines must cover vertices 0..{n - 1}")
        coord_list = [coords[i] for i in range(n)]
    return UnitDiskGraph(n, coords=coord_list, edges=edges)
