"""Level-set extraction, classification, and orientation for scale fields.

Curves of ``field = c`` live on the sigma >= 0 half-plane; the full picture
is the mirror of that half across sigma = 0, so a component that enters and
leaves through the axis is a closed curve of the full plane even though it
is stored as an open polyline.  Extraction is plain marching squares with
linear interpolation; the ambiguous saddle cell is split by the sign of the
cell-center average, which keeps the output deterministic.  Points with
``value <= c`` count as the negative side throughout.

Component kinds follow from where a traced polyline ends:

* both ends on the sigma = 0 axis (or a loop that closes in the interior):
  ``Closed`` - the mirrored curve is a closed loop;
* one end on the axis, one leaving through the top scale row: ``Line`` -
  the curve continues to arbitrarily large scales;
* any end on the left or right window column, or both ends on the top row
  (an arch whose top lies beyond the scale ladder): ``TruncatedAtWindow``.

Orientation uses the rotated gradient W = (-F_sigma, +F_x) of the extracted
field F, the unique tangent direction (up to sign) along which the energy
L = G - x * F is non-decreasing for sigma > 0 and non-increasing for
sigma < 0, where G is the antiderivative field one x-order below F.  Along
a level curve dL/dt = sigma * F_x**2 under this tangent, which is the
monotonicity the tests assert.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateLevel, OrientationAmbiguous, TopologyViolation
from .spectral import FieldGrid, FieldStack

KIND_CLOSED = "Closed"
KIND_LINE = "Line"
KIND_TRUNCATED = "TruncatedAtWindow"

_NODE_TOL = 1e-12  # of field scale: plateau detection
_PERTURB = 1e-9  # of field scale: one-shot level nudge
_AMBIG_FRACTION = 0.05  # tangent votes allowed against the majority


# ======================================================================
# Domain types
# ======================================================================

@dataclass(frozen=True)
class LevelCurve:
    """One traced component of a level set.

    ``vertices`` is an (n, 2) array of (x, sigma) points, sigma >= 0, in
    trace order; ``closed`` marks a polyline that closes on itself inside
    the half-plane (its last vertex connects back to the first).
    ``axis_crossings`` are the interpolated x values where the component
    meets sigma = 0.  ``orientation`` is 0 as extracted and +/-1 once
    `orient_and_energy` has aligned the trace with the tangent field.
    """

    vertices: np.ndarray
    kind: str
    axis_crossings: tuple[float, ...]
    closed: bool = False
    orientation: int = 0


@dataclass(frozen=True)
class ContourSet:
    """All components of one level, plus bookkeeping.

    ``level`` is the requested level; ``traced_level`` is the one actually
    marched.  They differ only when a degenerate plateau forced the single
    allowed nudge (1e-9 of the field scale), in which case
    ``degeneracy_flags`` holds the (row, col) cells of the original
    plateau.  On decaying fields the zero level always takes this path:
    the far tails sit at the rounding floor, which is a plateau at c = 0,
    and the nudged level clears it without moving any resolvable curve.
    """

    level: float
    k: int
    curves: tuple[LevelCurve, ...]
    traced_level: float = math.nan
    degeneracy_flags: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class ClassificationReport:
    kind: str
    axis_crossing_count: int
    mirror_residual: float


# ======================================================================
# Marching squares
# ======================================================================

# Cell corner bits: top-left 8, top-right 4, bottom-right 2, bottom-left 1
# (bit set = negative side).  Each entry lists segments as pairs of local
# edge names; the two ambiguous codes are resolved at runtime.
_EDGE_TABLE: dict[int, tuple[tuple[str, str], ...]] = {
    0: (),
    1: (("left", "bottom"),),
    2: (("bottom", "right"),),
    3: (("left", "right"),),
    4: (("top", "right"),),
    6: (("top", "bottom"),),
    7: (("top", "left"),),
    8: (("top", "left"),),
    9: (("top", "bottom"),),
    11: (("top", "right"),),
    12: (("left", "right"),),
    13: (("bottom", "right"),),
    14: (("left", "bottom"),),
    15: (),
}


def _cell_segments(code: int, center_negative: bool) -> tuple[tuple[str, str], ...]:
    if code == 5:  # negative bottom-left + top-right
        if center_negative:
            return (("left", "top"), ("bottom", "right"))
        return (("left", "bottom"), ("top", "right"))
    if code == 10:  # negative top-left + bottom-right
        if center_negative:
            return (("top", "right"), ("left", "bottom"))
        return (("left", "top"), ("bottom", "right"))
    return _EDGE_TABLE[code]


def _edge_key(local: str, i: int, j: int) -> tuple[str, int, int]:
    if local == "bottom":
        return ("h", i, j)
    if local == "top":
        return ("h", i + 1, j)
    if local == "left":
        return ("v", i, j)
    return ("v", i, j + 1)  # right


def _march(values: np.ndarray, x: np.ndarray, sig: np.ndarray, c: float):
    """Trace all components of values = c; returns (chains, ok).

    Each chain is (points, closed) with points a list of (x, sigma).
    ``ok`` is False when an intersection point is shared by more than two
    segments, which only happens at (near-)degenerate levels and is handled
    by the caller's perturb-and-retry protocol.
    """
    v = values - c
    neg = v <= 0.0

    # crossing coordinates keyed by grid edge; the edge identity also
    # decides whether a chain end sits on the axis, top row, or a side
    points: dict[tuple[str, int, int], tuple[float, float]] = {}
    hcross = neg[:, :-1] != neg[:, 1:]
    for i, j in zip(*np.nonzero(hcross)):
        t = v[i, j] / (v[i, j] - v[i, j + 1])
        points[("h", int(i), int(j))] = (x[j] + t * (x[j + 1] - x[j]), sig[i])
    vcross = neg[:-1, :] != neg[1:, :]
    for i, j in zip(*np.nonzero(vcross)):
        t = v[i, j] / (v[i, j] - v[i + 1, j])
        points[("v", int(i), int(j))] = (x[j], sig[i] + t * (sig[i + 1] - sig[i]))

    code = (
        8 * neg[1:, :-1].astype(np.int8)
        + 4 * neg[1:, 1:]
        + 2 * neg[:-1, 1:]
        + 1 * neg[:-1, :-1]
    )
    adj: dict[tuple[str, int, int], list[tuple[str, int, int]]] = {}
    centers = values[1:, :-1] + values[1:, 1:] + values[:-1, 1:] + values[:-1, :-1]
    for i, j in zip(*np.nonzero((code != 0) & (code != 15))):
        segs = _cell_segments(int(code[i, j]), bool(centers[i, j] <= 4.0 * c))
        for a, b in segs:
            ka, kb = _edge_key(a, int(i), int(j)), _edge_key(b, int(i), int(j))
            adj.setdefault(ka, []).append(kb)
            adj.setdefault(kb, []).append(ka)

    if any(len(nbrs) > 2 for nbrs in adj.values()):
        return [], False

    chains: list[tuple[list[tuple[str, int, int]], bool]] = []
    seen: set[tuple[str, int, int]] = set()

    def _walk(start: tuple[str, int, int]) -> list[tuple[str, int, int]]:
        path = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [k for k in adj[cur] if k != prev and k not in seen]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            path.append(cur)
            seen.add(cur)
        return path

    endpoints = sorted(k for k, nbrs in adj.items() if len(nbrs) == 1)
    for key in endpoints:
        if key not in seen:
            chains.append((_walk(key), False))
    for key in sorted(adj):  # leftovers are cycles
        if key not in seen:
            chains.append((_walk(key), True))
    return chains, points, True


# ======================================================================
# Extraction
# ======================================================================

def _plateau_cells(values: np.ndarray, c: float, scale: float):
    flat = np.abs(values - c) <= _NODE_TOL * scale
    cell = flat[1:, :-1] & flat[1:, 1:] & flat[:-1, 1:] & flat[:-1, :-1]
    return tuple((int(i), int(j)) for i, j in zip(*np.nonzero(cell)))


def _end_location(key: tuple[str, int, int], n_rows: int, n_cols: int) -> str:
    orient, i, j = key
    if orient == "h":
        if i == 0:
            return "axis"
        if i == n_rows - 1:
            return "top"
        return "interior"
    if j == 0 or j == n_cols - 1:
        return "side"
    return "interior"


def _trace(field: FieldGrid, c: float):
    """One marching pass; returns (curves, plateau_cells, ok)."""
    sig = field.sigma_grid
    x = field.x
    plateau = _plateau_cells(field.values, c, field.scale)
    if plateau:
        return (), plateau, False
    chains, points, ok = _march(field.values, x, sig, c)
    if not ok:
        return (), plateau, False

    n_rows, n_cols = len(sig), len(x)
    curves = []
    for keys, closed in chains:
        verts = np.asarray([points[k] for k in keys], dtype=float)
        crossings = tuple(points[k][0] for k in keys
                          if k[0] == "h" and k[1] == 0)
        if closed:
            kind = KIND_CLOSED
        else:
            ends = sorted(
                _end_location(k, n_rows, n_cols) for k in (keys[0], keys[-1])
            )
            if "interior" in ends:
                raise TopologyViolation(
                    "traced component ends away from axis and window"
                )
            if "side" in ends or ends == ["top", "top"]:
                kind = KIND_TRUNCATED
            elif ends == ["axis", "axis"]:
                kind = KIND_CLOSED
            else:
                kind = KIND_LINE
        curves.append(
            LevelCurve(vertices=verts, kind=kind, axis_crossings=crossings,
                       closed=closed)
        )
    order = sorted(range(len(curves)),
                   key=lambda i: tuple(curves[i].vertices[0]))
    return tuple(curves[i] for i in order), plateau, True


def extract_level_set(field: FieldGrid, c: float) -> ContourSet:
    """Extract all components of the level set field = c.

    A level that sits on a value plateau (a full grid cell within 1e-12 of
    c, relative to the field scale) cannot be traced unambiguously; the
    level is nudged once by 1e-9 of the field scale and retraced, with the
    offending cells reported in ``degeneracy_flags``.  If the nudged level
    is degenerate too, `DegenerateLevel` is raised rather than guessing.
    """
    if not math.isfinite(c):
        raise ValueError("level must be finite")
    curves, plateau, ok = _trace(field, c)
    if ok:
        return ContourSet(level=c, k=field.k, curves=curves, traced_level=c)
    c2 = c + _PERTURB * field.scale
    curves, plateau2, ok = _trace(field, c2)
    if not ok:
        raise DegenerateLevel(
            f"level {c!r} is degenerate on a positive-area set and remains "
            f"so after one perturbation"
        )
    return ContourSet(level=c, k=field.k, curves=curves, traced_level=c2,
                      degeneracy_flags=plateau)


# ======================================================================
# Classification
# ======================================================================

def classify_component(curve: LevelCurve, c: float) -> ClassificationReport:
    """Check a component against the closed-curve / line dichotomy.

    Closed components must meet the axis exactly twice and lines exactly
    once, and lines can only occur on the zero level; anything else raises
    `TopologyViolation`.  The mirror residual is identically zero because
    the half-plane storage is the canonical representative.
    """
    if curve.kind == KIND_TRUNCATED:
        raise ValueError("truncated components are excluded from the "
                         "theorem checks; enlarge the window instead")
    n = len(curve.axis_crossings)
    if curve.kind == KIND_LINE and c != 0.0:
        raise TopologyViolation(
            f"line component at nonzero level c={c!r}"
        )
    expected = 2 if curve.kind == KIND_CLOSED else 1
    if n != expected:
        raise TopologyViolation(
            f"{curve.kind} component with {n} axis crossings "
            f"(expected {expected}); degenerate level or grid too coarse"
        )
    return ClassificationReport(kind=curve.kind, axis_crossing_count=n,
                                mirror_residual=0.0)


# ======================================================================
# Orientation and energy
# ======================================================================

def _point_fields(stack: FieldStack, orders, xs, sigmas):
    """Evaluate several derivative orders at the same points."""
    return {j: stack.point(j, xs, sigmas) for j in orders}


def _refine_vertices(stack: FieldStack, k: int, c: float,
                     verts: np.ndarray) -> np.ndarray:
    """Project polyline vertices onto the exact level set.

    Marching-squares vertices carry the linear-interpolation error of the
    mesh, which is far above the tolerance of the energy monotonicity
    checks.  A damped Newton step along the field gradient (evaluated
    spectrally at the current points) converges to the continuum level set
    in a handful of iterations; steps are capped at one cell so the
    projection cannot jump to a different branch.
    """
    xs = verts[:, 0].copy()
    ss = verts[:, 1].copy()
    dx_cap = stack.dx
    scale = stack.grid(k).scale
    for _ in range(12):
        f = stack.point(k, xs, ss) - c
        if np.max(np.abs(f)) <= 1e-13 * scale:
            break
        fx = stack.point(k + 1, xs, ss)
        fs = ss * stack.point(k + 2, xs, ss)
        g2 = fx * fx + fs * fs
        g2 = np.maximum(g2, 1e-30 * scale * scale)
        step_x = f * fx / g2
        step_s = f * fs / g2
        clip = np.minimum(1.0, dx_cap / np.maximum(
            np.hypot(step_x, step_s), 1e-300))
        xs -= clip * step_x
        ss -= clip * step_s
    out = np.column_stack([xs, ss])
    out[verts[:, 1] == 0.0, 1] = 0.0  # axis points stay on the axis
    return out


def orient_and_energy(curve: LevelCurve, stack: FieldStack, k: int,
                      c: float) -> tuple[LevelCurve, np.ndarray]:
    """Align a component with the tangent field and sample energy along it.

    Returns the oriented copy of the curve (vertex order possibly reversed,
    ``orientation`` set) and an (n, 2) array of (arc length, L) samples with
    L = G - x * F, where F is the level field and G its antiderivative in
    x.  On the zero level L reduces to G.  Vertices are first refined onto
    the continuum level set so the samples measure the curve rather than
    the mesh; along the tangent W = (-F_sigma, +F_x) the exact derivative
    of L is sigma * F_x**2, hence monotone on each half-plane.

    Requires k >= 1 (G must exist) and a smoothness budget admitting
    k + 2.  Raises `OrientationAmbiguous` when more than 5% of the segment
    tangents disagree with the majority direction, which indicates a
    near-degenerate field.
    """
    if k < 1:
        raise ValueError("orientation needs k >= 1 so the antiderivative "
                         "field exists")
    verts = _refine_vertices(stack, k, c, curve.vertices)
    if curve.closed:
        seg_a, seg_b = verts, np.roll(verts, -1, axis=0)
    else:
        seg_a, seg_b = verts[:-1], verts[1:]
    mids = 0.5 * (seg_a + seg_b)
    tx, ts = (seg_b - seg_a).T
    wx = -mids[:, 1] * stack.point(k + 2, mids[:, 0], mids[:, 1])
    ws = stack.point(k + 1, mids[:, 0], mids[:, 1])
    dots = tx * wx + ts * ws
    seg_len = np.hypot(tx, ts)
    live = seg_len > 0
    votes = np.sign(dots[live])
    n_pos = int(np.sum(votes > 0))
    n_neg = int(np.sum(votes < 0))
    if min(n_pos, n_neg) > _AMBIG_FRACTION * max(votes.size, 1):
        raise OrientationAmbiguous(
            f"tangent field direction contested on "
            f"{min(n_pos, n_neg)}/{votes.size} segments"
        )
    sign = 1 if n_pos >= n_neg else -1
    if sign < 0:
        verts = verts[::-1]
    oriented = replace(curve, vertices=verts, orientation=sign)

    xs, ss = verts[:, 0], verts[:, 1]
    energy = stack.point(k - 1, xs, ss) - xs * stack.point(k, xs, ss)
    if curve.closed:
        step = np.hypot(*(np.roll(verts, -1, axis=0) - verts).T)[:-1]
    else:
        step = np.hypot(*(verts[1:] - verts[:-1]).T)
    t = np.concatenate([[0.0], np.cumsum(step)])
    return oriented, np.column_stack([t, energy])


# ======================================================================
# Genericity
# ======================================================================

def genericity_check(stack: FieldStack, k: int, c: float):
    """Flag cells where the level is not generic.

    A level is generic when the level curve carries no critical point of
    the field, i.e. nowhere on it do F - c, F_x, and F_sigma vanish
    together.  A zero of a smooth quantity inside a cell shows up either
    as a sign change across the cell or (for an identically small field)
    as the whole cell sitting below 1e-6 of its row scale, so a cell is
    flagged when each of the three quantities does one or the other.
    Generic levels return an empty tuple; a level equal to a critical
    value of the field flags the cell containing the critical point; the
    zero field flags everything.
    """
    f0 = stack.grid(k).values - c
    f1 = stack.grid(k + 1).values
    f2 = stack.sigma_deriv_rows(k)

    def _vanishes(a: np.ndarray, ref: np.ndarray) -> np.ndarray:
        tl, tr = a[1:, :-1], a[1:, 1:]
        bl, br = a[:-1, :-1], a[:-1, 1:]
        # sign changes below the rounding floor of the synthesis are noise,
        # not zeros; they must not count as crossings
        floor = 1e-12 * float(np.max(np.abs(ref)))
        pos = (tl > floor) | (tr > floor) | (bl > floor) | (br > floor)
        neg = (tl < -floor) | (tr < -floor) | (bl < -floor) | (br < -floor)
        row_scale = np.max(np.abs(ref), axis=1)
        tol = 1e-6 * np.minimum(row_scale[1:], row_scale[:-1])[:, None]
        tiny = (np.abs(tl) <= tol) & (np.abs(tr) <= tol) \
            & (np.abs(bl) <= tol) & (np.abs(br) <= tol)
        return (pos & neg) | tiny

    hit = _vanishes(f0, stack.grid(k).values) & _vanishes(f1, f1) \
        & _vanishes(f2, f2)
    return tuple((int(i), int(j)) for i, j in zip(*np.nonzero(hit)))


# ======================================================================
# Dump format
# ======================================================================

def contour_rows(contours: ContourSet):
    """Rows for the delimited dump: (component_id, kind, t_index, x, sigma)."""
    rows = []
    for cid, curve in enumerate(contours.curves):
        for t_index, (px, ps) in enumerate(curve.vertices):
            rows.append((cid, curve.kind, t_index, float(px), float(ps)))
    return rows
