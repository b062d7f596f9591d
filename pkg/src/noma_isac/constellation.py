"""Per-period QPSK alphabets and the 16-point two-period combined constellation.

Index ``n`` (1-based, as used throughout) selects the first-period phase
``ceil(n/4)*pi/2 - pi/4`` and the second-period phase
``(2n - 1)*pi/4 + delta``. Each period carries a Gray-labelled QPSK symbol
and the combined point is their sum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AmbiguityError, GeometryError

__all__ = [
    "GRAY_LABELS",
    "CombinedConstellation",
    "DistanceSets",
    "DecisionGeometry",
    "build_combined",
    "default_constellation",
    "distance_sets",
    "nearest_symbol",
    "nearest_indices",
    "decision_geometry",
]

GRAY_LABELS = ("00", "01", "11", "10")
CONVENTIONS = ("differential", "as_printed")
_COINCIDENT_TOL = 1e-9
_GEOMETRY_TOL = 1e-9
_TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CombinedConstellation:
    """Immutable 16-point combined alphabet with 4-bit labels.

    ``t1`` and ``t2`` hold the unit-energy per-period symbols, ``points``
    their sum. Arrays are 0-based; index ``n`` in docs maps to ``n - 1``.
    """

    theta_o: float
    theta_r: float
    convention: str
    t1: np.ndarray
    t2: np.ndarray
    points: np.ndarray
    labels: tuple
    bits: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.points)

    @property
    def is_default(self):
        return (
            self.convention == "differential"
            and math.isclose(self.theta_o, math.pi / 4, abs_tol=1e-12)
            and math.isclose(self.theta_r, math.pi / 2, abs_tol=1e-12)
        )

    def index_of_label(self, label):
        return self.labels.index(label) + 1

    def describe(self):
        return (
            f"QPSK2T(theta_o={self.theta_o:.6g},theta_r={self.theta_r:.6g},"
            f"convention={self.convention})"
        )


def _period_phases(theta_o, theta_r, convention):
    n = np.arange(1, 17)
    first = np.ceil(n / 4) * np.pi / 2 - np.pi / 4
    if convention == "differential":
        delta = theta_r - theta_o
    elif convention == "as_printed":
        delta = theta_r
    else:
        raise ValueError(f"unknown rotation convention {convention!r}")
    second = (2 * n - 1) * np.pi / 4 + delta
    return first, second


def build_combined(theta_o=math.pi / 4, theta_r=math.pi / 2, convention="differential"):
    """Build the combined constellation.

    Raises
    ------
    AmbiguityError
        Two combined points are closer than 1e-9 (or a point is at the
        origin and collides with its negation), which would make pair-wise
        detection ambiguous.
    """
    first, second = _period_phases(theta_o, theta_r, convention)
    t1 = np.exp(1j * first)
    t2 = np.exp(1j * second)
    points = t1 + t2

    n = np.arange(16)
    labels = tuple(GRAY_LABELS[i // 4] + GRAY_LABELS[i % 4] for i in n)
    bits = np.array([[int(ch) for ch in lab] for lab in labels], dtype=np.int8)

    dist = np.abs(points[:, None] - points[None, :])
    dist[np.diag_indices(16)] = np.inf
    i, j = np.unravel_index(np.argmin(dist), dist.shape)
    if dist[i, j] < _COINCIDENT_TOL:
        lo, hi = sorted((int(i) + 1, int(j) + 1))
        raise AmbiguityError(
            f"combined points s_{lo} and s_{hi} coincide at "
            f"({points[i].real:.6g}, {points[i].imag:.6g})",
            indices=(lo, hi),
        )
    for arr in (t1, t2, points):
        arr.setflags(write=False)
    bits.setflags(write=False)
    return CombinedConstellation(
        theta_o=float(theta_o),
        theta_r=float(theta_r),
        convention=convention,
        t1=t1,
        t2=t2,
        points=points,
        labels=labels,
        bits=bits,
    )


def default_constellation():
    return build_combined(math.pi / 4, math.pi / 2, "differential")


@dataclass(frozen=True)
class DistanceSets:
    """Correct/wrong index sets for one bit position and their cross distances."""

    bit: int
    correct: tuple
    wrong: tuple
    distances: np.ndarray  # shape (8, 8): |s_c - s_w|

    def sorted_multiset(self):
        return np.sort(self.distances.ravel())


def distance_sets(constellation, bit=1):
    """Partition indices by bit value (``bit`` is 1..4) and tabulate distances."""
    if bit not in (1, 2, 3, 4):
        raise ValueError("bit must be in 1..4")
    col = constellation.bits[:, bit - 1]
    correct = tuple(int(i) + 1 for i in np.flatnonzero(col == 0))
    wrong = tuple(int(i) + 1 for i in np.flatnonzero(col == 1))
    pts = constellation.points
    d = np.abs(pts[np.array(correct) - 1][:, None] - pts[np.array(wrong) - 1][None, :])
    return DistanceSets(bit=bit, correct=correct, wrong=wrong, distances=d)


def nearest_indices(constellation, points):
    """Vectorised nearest-symbol decision; returns 0-based indices.

    Squared distances within ``1e-12`` (relative) of the minimum count as
    ties, which go to the lowest index.
    """
    z = np.asarray(points)
    d = np.abs(z[..., None] - constellation.points) ** 2
    dmin = d.min(axis=-1, keepdims=True)
    return np.argmax(d <= dmin + _TIE_TOL * (1.0 + dmin), axis=-1)


def nearest_symbol(constellation, point):
    """Index (1..16) of the combined point closest to ``point``."""
    return int(nearest_indices(constellation, complex(point))) + 1


# ---------------------------------------------------------------------------
# MSB decision-region geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecisionGeometry:
    """Vertices, edge slopes and error regions of the MSB = '1' decision region.

    ``vertices`` maps the labels O, A..H to ``(a, b)`` coordinates;
    ``slopes`` maps e.g. ``"AC"`` to the slope of line AC. ``defining``
    records, for each boundary vertex, an opposite-MSB symbol pair (1-based)
    whose perpendicular bisector passes through it.
    """

    vertices: dict
    slopes: dict
    defining: dict
    regions: tuple

    def __getattr__(self, name):
        # a_A, b_C, k_AC style accessors
        verts = self.__dict__.get("vertices", {})
        if len(name) == 3 and name[1] == "_" and name[0] in "ab" and name[2] in verts:
            return verts[name[2]][0 if name[0] == "a" else 1]
        if name.startswith("k_") and name[2:] in self.__dict__.get("slopes", {}):
            return self.slopes[name[2:]]
        raise AttributeError(name)


REGION_TABLE = (
    ("U1", "a_C <= a <= a_A, b_C <= b <= k_AC (a - a_C)"),
    ("U2", "a_G <= a <= a_O, b_O <= b <= k_OA (a - a_O)"),
    ("U3", "a_O <= a <= a_H, b_O <= b <= k_OB (a - a_O)"),
    ("U4", "a_H <= a <= a_D, b_D <= b <= k_BD (a - a_D)"),
    ("U5", "a <= (b - b_E) / k_CE + a_E, b_E <= b <= b_C"),
    ("U6", "a_E <= a <= a_O, b_E <= b <= k_OE (a - a_O)"),
    ("U7", "a_O <= a <= a_F, b_F <= b <= k_OF (a - a_O)"),
    ("U8", "(b - b_F) / k_DF + a_F <= a, b_F <= b <= b_D"),
    ("U9", "b <= b_F"),
)


def _boundary_vertices(constellation):
    """Points where the MSB partition of the Voronoi diagram has a corner.

    Every pair of perpendicular bisectors is intersected; an intersection is
    kept when at least three symbols are equidistant-nearest there and they
    carry both MSB values.
    """
    pts = constellation.points
    msb = constellation.bits[:, 0].astype(bool)
    bisectors = []
    for i, j in itertools.combinations(range(16), 2):
        d = pts[j] - pts[i]
        rhs = (abs(pts[j]) ** 2 - abs(pts[i]) ** 2) / 2.0
        bisectors.append((d.real, d.imag, rhs))
    found = []
    for l1, l2 in itertools.combinations(bisectors, 2):
        mat = np.array([[l1[0], l1[1]], [l2[0], l2[1]]])
        det = np.linalg.det(mat)
        if abs(det) < 1e-12:
            continue
        a, b = np.linalg.solve(mat, [l1[2], l2[2]])
        dist = np.abs(a + 1j * b - pts)
        tied = np.flatnonzero(dist < dist.min() + _GEOMETRY_TOL)
        if len(tied) >= 3 and msb[tied].any() and (~msb[tied]).any():
            if not any(abs(a - fa) < 1e-7 and abs(b - fb) < 1e-7 for fa, fb, _ in found):
                found.append((a, b, tuple(tied)))
    return found


def decision_geometry(constellation):
    """Derive the vertices O, A..H and slopes of the MSB decision boundary.

    Only the default constellation (theta_o = pi/4, theta_r = pi/2,
    differential rotation) has the nine-region layout; other configurations
    raise :class:`GeometryError`.
    """
    if not constellation.is_default:
        raise GeometryError(
            "decision geometry is only defined for theta_o=pi/4, theta_r=pi/2, differential"
        )
    pts = constellation.points
    msb = constellation.bits[:, 0].astype(bool)
    found = _boundary_vertices(constellation)
    if len(found) != 7:
        raise GeometryError(f"expected 7 boundary vertices, found {len(found)}")

    tol = 1e-7
    verts = {}
    tied_of = {}

    def pick(label, cond, key):
        cands = [f for f in found if cond(f[0], f[1])]
        if not cands:
            raise GeometryError(f"no candidate for vertex {label}")
        a, b, tied = max(cands, key=key)
        verts[label] = (float(a), float(b))
        tied_of[label] = tied

    pick("O", lambda a, b: abs(a) < tol and abs(b) < tol, key=lambda f: 0)
    verts["O"] = (0.0, 0.0)
    pick("C", lambda a, b: abs(b) < tol and a < -tol, key=lambda f: -f[0])
    pick("D", lambda a, b: abs(b) < tol and a > tol, key=lambda f: f[0])
    pick("A", lambda a, b: b > tol and a < -tol, key=lambda f: f[1])
    pick("B", lambda a, b: b > tol and a > tol, key=lambda f: f[1])
    pick("E", lambda a, b: b < -tol and a < -tol, key=lambda f: -f[1])
    pick("F", lambda a, b: b < -tol and a > tol, key=lambda f: -f[1])
    # G and H are the feet of A and B on the horizontal axis through O
    verts["G"] = (verts["A"][0], verts["O"][1])
    verts["H"] = (verts["B"][0], verts["O"][1])

    def slope(p, q):
        (a1, b1), (a2, b2) = verts[p], verts[q]
        return (b2 - b1) / (a2 - a1)

    slopes = {
        name: slope(name[0], name[1])
        for name in ("AC", "BD", "CE", "DF", "OA", "OB", "OE", "OF")
    }

    defining = {}
    for label, tied in tied_of.items():
        a, b = verts[label]
        z = a + 1j * b
        zeros = sorted(tied, key=lambda t: (abs(z - pts[t]), t))
        c = next(t for t in zeros if not msb[t])
        w = next(t for t in zeros if msb[t])
        defining[label] = (int(c) + 1, int(w) + 1)

    geom = DecisionGeometry(vertices=verts, slopes=slopes, defining=defining, regions=REGION_TABLE)
    _check_symmetry(geom, pts)
    return geom


def _check_symmetry(g, pts):
    v, k = g.vertices, g.slopes
    tol = _GEOMETRY_TOL
    checks = [
        (v["B"][0], -v["A"][0]),
        (v["B"][1], v["A"][1]),
        (v["B"][0], v["F"][0]),
        (v["B"][1], -v["F"][1]),
        (v["B"][0], -v["E"][0]),
        (v["B"][1], -v["E"][1]),
        (v["B"][0], v["H"][0]),
        (v["B"][0], -v["G"][0]),
        (v["D"][0], -v["C"][0]),
        (k["AC"], k["DF"]),
        (k["AC"], -k["BD"]),
        (k["AC"], -k["CE"]),
        (k["OB"], 1.0),
        (k["OE"], 1.0),
        (k["OA"], -1.0),
        (k["OF"], -1.0),
    ]
    bad = [i for i, (x, y) in enumerate(checks) if abs(x - y) > tol]
    if bad:
        raise GeometryError(f"decision geometry failed symmetry checks {bad}")
    for label, (c, w) in g.defining.items():
        z = complex(*v[label])
        if abs(abs(z - pts[c - 1]) - abs(z - pts[w - 1])) > tol:
            raise GeometryError(f"vertex {label} is not on the bisector of s_{c}, s_{w}")
