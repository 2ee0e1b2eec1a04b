"""Parameter-axis scanning for topology changes of a level-curve family.

Detection is discrete: the field's level set is extracted on a ladder of
parameter slices, components are matched across adjacent slices by axis
interval overlap (at equal nesting depth), and every change in the matching
pattern becomes a candidate event.  Each candidate is then refined by
bisection between its bracketing slices and validated by a damped Newton
solve of the two defining derivative conditions at the refined parameter:
the (k+1)-th x-derivative and the sigma derivative of the k-th both vanish
at the critical point the event sits on.  Tracking finds events robustly at
grid scale; the root solve pins them to continuum accuracy.

Mirror bookkeeping: fields are stored on the closed upper half plane and
extend evenly across the axis, so a critical point off the axis stands for
a mirror pair and counts twice in every integer tally, as does a component
that never touches the axis.  Axis events and axis-anchored components
count once.

Handle counting never constructs the surface: each tracked component's
lifetime graph (slice components as vertices, matches as edges) is a
discrete contour-tracking graph, and the number of handles equals its
cycle rank once the boundary circles at the scan ends are capped with
disks.  Euler and Morse-style integer identities are checked on every
accepted scan; a failure means a missed event, never a tolerance issue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .contours import extract_level_set
from .errors import (
    BudgetExceeded,
    ConfigError,
    IndexMismatch,
    InconsistentEuler,
    NoConvergence,
    TopologyViolation,
    TruncationFailure,
    UnresolvedEvent,
)
from .kernels import KernelParams
from .spectral import (
    FieldStack,
    SignalGrid,
    SmoothnessBudget,
    estimate_decay_order,
    forward_transform,
)
from .trees import arch_top

AXIS_P = "p"
AXIS_C = "c"

# index semantics: components appear at minima of the slice-parameter height
# function, join or split at saddles, and vanish at maxima
KIND_INDEX = {"Birth": 0, "Merge": 1, "Split": 1, "Death": 2}

C_MIN_FRACTION = 1e-3

# ======================================================================
# Domain types
# ======================================================================

@dataclass(frozen=True)
class ParamScan:
    """One scan request: which axis moves, what stays fixed, how finely.

    ``level`` is the fixed contour level for p-axis scans; ``p`` is the
    fixed kernel order for c-axis scans.  The c-axis must stay on one side
    of zero and away from it (events can accumulate at level zero, so the
    scanner refuses |c| below a fraction of the field scale; see scan()).
    """

    axis: str
    lo: float
    hi: float
    alpha: float
    beta: float
    k: int
    level: float = 0.0
    p: float = 0.0
    n_slices: int = 16
    tol_param: float = 1e-3

    def __post_init__(self):
        if self.axis not in (AXIS_P, AXIS_C):
            raise ConfigError(f"axis must be 'p' or 'c', got {self.axis!r}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ConfigError("scan range must be finite")
        if self.lo > self.hi:
            raise ConfigError("scan range must satisfy lo <= hi")
        if self.n_slices < 8:
            raise ConfigError("n_slices must be at least 8")
        if not (self.tol_param > 0):
            raise ConfigError("tol_param must be positive")
        if self.k < 0:
            raise ConfigError("derivative order k must be nonnegative")
        if self.axis == AXIS_P:
            if self.lo < 0:
                raise ConfigError("kernel order range must be nonnegative")
            if self.alpha != 0.0 and self.lo <= 0:
                raise ConfigError("odd kernel content requires p > 0")
        else:
            if self.lo <= 0 < self.hi or self.lo < 0 <= self.hi:
                raise ConfigError("c-axis scans must stay on one side of 0")
            if self.lo == 0 or self.hi == 0:
                raise ConfigError("c-axis scans must exclude level 0")


@dataclass(frozen=True)
class BifurcationEvent:
    """One refined topology change.

    ``residuals`` are the two defining derivatives at the located point;
    ``multiplicity`` is 2 for off-axis events (mirror pair), 1 on the axis.
    ``degenerate`` marks events whose validation failed (Newton rejection,
    index disagreement, or a level-constraint violation); their data is the
    best available but downstream handle counts skip the affected regions.
    """

    param_value: float
    kind: str
    index: int
    location: tuple[float, float]
    residuals: tuple[float, float]
    multiplicity: int = 1
    degenerate: bool = False


@dataclass(frozen=True)
class SliceComponent:
    slice_index: int
    component_id: int
    interval: tuple[float, float]
    kind: str  # "arch" | "line" | "loop"
    depth: int
    top_sigma: float


@dataclass(frozen=True)
class SliceGraph:
    """Per-slice component lists plus the inter-slice matching edges."""

    axis: str
    k: int
    params: tuple[float, ...]
    slices: tuple[tuple[SliceComponent, ...], ...]
    edges: tuple[tuple[int, int], ...]
    events: tuple[BifurcationEvent, ...] = ()


@dataclass(frozen=True)
class RegionInvariants:
    """Handle counts valid throughout one open inter-event region.

    ``mu`` lists (component_id, handles) for every component of the capped
    surface accumulated from the scan start through this region, including
    components that already died.  ``component_count`` is the number of
    live tracked components inside the region.  ``resolved`` is False when
    a bounding event was degenerate and the entries were not computed.
    """

    lo: float
    hi: float
    component_count: int
    mu: tuple[tuple[int, int], ...]
    resolved: bool = True


@dataclass(frozen=True)
class ScanSummary:
    """Multiplicity-weighted boundary and component tallies of a full scan.

    ``saddle_floor`` is the combinatorial minimum number of index-1 events
    the tracked surface forces: a component with b boundary circles needs
    at least b - 2 saddles to connect them (none for a plain tube), plus
    two per handle.
    """

    start_circles: int      # boundary circles at the scan's low end
    end_circles: int        # boundary circles at the scan's high end
    component_count: int    # connected components of the tracked surface
    interior_count: int     # components touching neither end
    born_inside: int        # components absent from the low-end slice
    died_inside: int        # components absent from the high-end slice
    total_handles: int
    saddle_floor: int = 0


@dataclass(frozen=True)
class InvariantTable:
    boundaries: tuple[float, ...]
    regions: tuple[RegionInvariants, ...]
    summary: ScanSummary


@dataclass(frozen=True)
class MorseReport:
    """Integer consistency report for one accepted scan.

    ``counts`` is (c0, c1, c2): multiplicity-weighted event counts by
    index.  ``betti`` is (b0, b1, b2) of the capped tracked surface.  Every
    check is an exact integer statement; any failure indicates a missed or
    mis-classified event.
    """

    counts: tuple[int, int, int]
    betti: tuple[int, int, int]
    checks: tuple[tuple[str, bool], ...]
    passed: bool
    summary: ScanSummary
    degenerate_events: int = 0


# ======================================================================
# Critical-point refinement
# ======================================================================

def locate_critical_point(
    stack: FieldStack,
    k: int,
    seed: tuple[float, float],
    *,
    tol_rel: float = 1e-6,
    max_iter: int = 50,
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Refine (x, sigma) so the two defining derivatives vanish.

    Solves r1 = D^{k+1} field = 0 and r2 = d/dsigma D^k field = 0 with a
    damped Newton iteration (steps capped at ten grid cells, sigma folded
    back to the closed upper half plane).  Returns ((x, sigma), (r1, r2)).

    Raises
    ------
    NoConvergence
        If the residuals are not below tol_rel of the respective
        derivative-field scales after ``max_iter`` iterations.
    """
    x, s = float(seed[0]), float(seed[1])
    dx = stack.dx
    scale1 = stack.grid(k + 1).scale
    scale2 = stack.grid(k + 2).scale
    for _ in range(max_iter):
        r1 = stack.point(k + 1, x, s)
        r2 = s * stack.point(k + 2, x, s)
        if abs(r1) <= tol_rel * scale1 and abs(r2) <= tol_rel * scale2:
            return (x, s), (r1, r2)
        f2 = stack.point(k + 2, x, s)
        f3 = stack.point(k + 3, x, s)
        f4 = stack.point(k + 4, x, s)
        j11, j12 = f2, s * f3
        j21, j22 = s * f3, f2 + s * s * f4
        det = j11 * j22 - j12 * j21
        if det == 0.0 or not math.isfinite(det):
            break
        dx_ = (r1 * j22 - r2 * j12) / det
        ds_ = (j11 * r2 - j21 * r1) / det
        damp = max(1.0, max(abs(dx_), abs(ds_)) / (10.0 * dx))
        x -= dx_ / damp
        s = abs(s - ds_ / damp)
    r1 = stack.point(k + 1, x, s)
    r2 = s * stack.point(k + 2, x, s)
    raise NoConvergence(
        f"critical-point refinement stalled at ({x:.6g}, {s:.6g}) with "
        f"residuals ({r1:.3g}, {r2:.3g})"
    )


def classify_index(
    event: BifurcationEvent,
    stack: FieldStack,
    k: int,
    axis: str,
    *,
    resolve_rel: float = 1e-4,
) -> int:
    """Morse index of the event: Birth 0, Merge/Split 1, Death 2.

    Cross-checks the kind-based index against the eigenvalue signs of the
    2x2 second-derivative matrix of the slice parameter's local height
    function on the level surface.  The check is skipped when an
    eigenvalue is too small to call (below ``resolve_rel`` of the
    second-derivative field scale).

    Raises
    ------
    IndexMismatch
        If both eigenvalues are resolvable and their sign pattern
        disagrees with the kind.
    """
    expected = KIND_INDEX.get(event.kind)
    if expected is None:
        raise ValueError(f"unknown event kind {event.kind!r}")
    x, s = event.location
    hxx = stack.point(k + 2, x, s)
    hxs = s * stack.point(k + 3, x, s)
    hss = stack.point(k + 2, x, s) + s * s * stack.point(k + 4, x, s)
    if axis == AXIS_C:
        scale = 1.0
    else:
        g_param = stack.point(k, x, s, dp=1)
        ref = stack.grid(k).scale
        if abs(g_param) <= 1e-9 * ref:
            return expected  # height function not resolvable this way
        scale = -1.0 / g_param
    h = scale * np.array([[hxx, hxs], [hxs, hss]])
    eigs = np.linalg.eigvalsh(h)
    floor = resolve_rel * stack.grid(k + 2).scale * abs(scale)
    if np.min(np.abs(eigs)) <= floor:
        return expected
    hessian_index = int(np.sum(eigs < 0))
    if hessian_index != expected:
        raise IndexMismatch(
            f"{event.kind} event at {event.location} implies index "
            f"{expected} but the local height Hessian has index "
            f"{hessian_index}"
        )
    return expected


# ======================================================================
# Slice extraction and matching
# ======================================================================

def _components_of(grid, level: float, dx: float):
    """Tracked components of one slice: dicts with interval/kind/depth/seed."""
    cs = extract_level_set(grid, level)
    comps = []
    n_truncated = 0
    for curve in cs.curves:
        if curve.kind == "TruncatedAtWindow":
            n_truncated += 1
            continue
        if curve.kind == "Line":
            x = curve.axis_crossings[0]
            comps.append({"interval": (x, x), "kind": "line",
                          "top": math.inf, "seed": (x, math.inf)})
        elif curve.closed or not curve.axis_crossings:
            vx = curve.vertices
            comps.append({
                "interval": (float(vx[:, 0].min()), float(vx[:, 0].max())),
                "kind": "loop",
                "top": float(vx[:, 1].max()),
                "seed": (float(vx[:, 0].mean()), float(vx[:, 1].mean())),
            })
        else:
            if len(curve.axis_crossings) != 2:
                raise TopologyViolation(
                    "axis-anchored component without two crossings cannot "
                    "be tracked"
                )
            lo, hi = sorted(curve.axis_crossings)
            tx, ts = arch_top(curve)
            comps.append({"interval": (lo, hi), "kind": "arch",
                          "top": ts, "seed": (tx, ts)})
    for c in comps:
        c["depth"] = sum(
            1 for o in comps
            if o is not c
            and o["interval"][0] - dx <= c["interval"][0]
            and c["interval"][1] <= o["interval"][1] + dx
            and (o["interval"][1] - o["interval"][0]
                 > c["interval"][1] - c["interval"][0] + dx)
        )
    comps.sort(key=lambda c: (c["interval"][0], c["interval"][1]))
    return comps, n_truncated


def _overlap(a, b) -> float:
    return min(a[1], b[1]) - max(a[0], b[0])


def _match(comps_a, comps_b, tol: float):
    """Edges (ia, ib) between components of adjacent slices."""
    edges = []
    for ia, ca in enumerate(comps_a):
        for ib, cb in enumerate(comps_b):
            if ca["depth"] != cb["depth"]:
                continue
            if _overlap(ca["interval"], cb["interval"]) >= -tol:
                edges.append((ia, ib))
    return edges


def _best_match(comp, comps, tol: float):
    """Index of the strongest-overlap same-depth match, or None."""
    best, best_ov = None, -math.inf
    for i, cb in enumerate(comps):
        if cb["depth"] != comp["depth"]:
            continue
        ov = _overlap(comp["interval"], cb["interval"])
        if ov >= -tol and ov > best_ov:
            best, best_ov = i, ov
    return best


def _gap_changes(comps_a, comps_b, tol, n_slices):
    """Classify the matching pattern of one slice gap into raw changes."""
    edges = _match(comps_a, comps_b, tol)
    deg_a = [0] * len(comps_a)
    deg_b = [0] * len(comps_b)
    for ia, ib in edges:
        deg_a[ia] += 1
        deg_b[ib] += 1
    if any(d > 2 for d in deg_a) or any(d > 2 for d in deg_b):
        raise UnresolvedEvent(
            "a component matches more than two neighbours across one slice "
            f"gap; rerun with n_slices={2 * n_slices}"
        )
    changes = []
    for ia, d in enumerate(deg_a):
        if d == 0:
            changes.append(("Death", (ia,), ()))
        elif d == 2:
            outs = tuple(ib for ja, ib in edges if ja == ia)
            if any(deg_b[ib] == 2 for ib in outs):
                raise UnresolvedEvent(
                    "entangled split and merge within one slice gap; rerun "
                    f"with n_slices={2 * n_slices}"
                )
            changes.append(("Split", (ia,), outs))
    for ib, d in enumerate(deg_b):
        if d == 0:
            changes.append(("Birth", (), (ib,)))
        elif d == 2:
            ins = tuple(ia for ia, jb in edges if jb == ib)
            changes.append(("Merge", ins, (ib,)))
    net = sum(+1 if kind in ("Birth", "Split") else -1
              for kind, _, _ in changes)
    if len(comps_b) - len(comps_a) != net:
        raise UnresolvedEvent(
            "matching pattern does not explain the component-count change "
            f"across a slice gap; rerun with n_slices={2 * n_slices}"
        )
    return edges, changes


# ======================================================================
# Scanning
# ======================================================================

def scan(
    sig: SignalGrid,
    spec: ParamScan,
    ladder,
) -> tuple[SliceGraph, list[BifurcationEvent]]:
    """Scan one parameter axis and return the slice graph plus events.

    Synthesizes the field per slice (p-axis) or once (c-axis), tracks the
    level set's components across slices, refines every topology change to
    ``spec.tol_param`` by bisection, and validates each event with
    locate_critical_point and classify_index.  Events whose validation
    fails are kept but flagged degenerate.

    Raises
    ------
    BudgetExceeded
        If the signal's spectral decay cannot support the requested
        derivative orders over the whole parameter range.
    TruncationFailure
        If the number of window-truncated components changes between
        slices (geometry is entering or leaving the window mid-scan).
    UnresolvedEvent
        If slice matching is ambiguous; the message suggests a slice count.
    ConfigError
        If a c-axis range reaches below the accumulation guard around 0.
    """
    ladder = np.asarray(ladder, dtype=float)
    spectrum = forward_transform(sig)
    m = estimate_decay_order(spectrum)
    l = (spec.k + 5) // 2  # locate/classify need four orders above k
    p_worst = spec.hi if spec.axis == AXIS_P else spec.p
    if not (m > p_worst + 1 + 2 * l):
        raise BudgetExceeded(
            f"spectral decay order m={m:.3g} cannot support k={spec.k} "
            f"with validation derivatives over the scan (need m > "
            f"{p_worst + 1 + 2 * l:g})"
        )
    budget = SmoothnessBudget(m=m, l=l)

    stacks: dict[float, FieldStack] = {}

    def stack_at(p: float) -> FieldStack:
        if p not in stacks:
            params = KernelParams(p=p, alpha=spec.alpha, beta=spec.beta)
            stacks[p] = FieldStack(sig, params, ladder, budget)
        return stacks[p]

    slice_cache: dict[float, tuple[list, int]] = {}

    def comps_at(param: float):
        if param not in slice_cache:
            if spec.axis == AXIS_P:
                grid = stack_at(param).grid(spec.k)
                slice_cache[param] = _components_of(grid, spec.level, sig.dx)
            else:
                grid = stack_at(spec.p).grid(spec.k)
                slice_cache[param] = _components_of(grid, param, sig.dx)
        return slice_cache[param]

    if spec.axis == AXIS_C:
        scale_k = stack_at(spec.p).grid(spec.k).scale
        c_min = C_MIN_FRACTION * scale_k
        if min(abs(spec.lo), abs(spec.hi)) < c_min:
            raise ConfigError(
                f"c-axis scans must keep |c| >= {c_min:.3g} (events can "
                "accumulate at level 0)"
            )

    params = np.unique(np.linspace(spec.lo, spec.hi, spec.n_slices))
    per_slice = [comps_at(p) for p in params]
    tol = sig.dx

    n_trunc0 = per_slice[0][1]
    for i, (_, nt) in enumerate(per_slice):
        if nt != n_trunc0:
            raise TruncationFailure(
                "window-truncated component count changed from "
                f"{n_trunc0} to {nt} at slice {i}; enlarge the window"
            )

    # global vertex ids, assigned slice by slice in x order
    ids = []
    next_id = 0
    for comps, _ in per_slice:
        ids.append(list(range(next_id, next_id + len(comps))))
        next_id += len(comps)

    raw_events = []  # dicts: gap, kind, left/right component dicts and ids
    all_edges = []
    for g in range(len(params) - 1):
        comps_a, _ = per_slice[g]
        comps_b, _ = per_slice[g + 1]
        edges, changes = _gap_changes(comps_a, comps_b, tol, spec.n_slices)
        all_edges.append([(ids[g][ia], ids[g + 1][ib]) for ia, ib in edges])
        for kind, ia_s, ib_s in changes:
            raw_events.append({
                "gap": g, "kind": kind,
                "left": tuple(comps_a[i] for i in ia_s),
                "right": tuple(comps_b[i] for i in ib_s),
                "left_ids": tuple(ids[g][i] for i in ia_s),
                "right_ids": tuple(ids[g + 1][i] for i in ib_s),
            })

    refined = []
    for raw in raw_events:
        g = raw["gap"]
        lo_p, hi_p = float(params[g]), float(params[g + 1])
        param_star, left_inc, right_inc = _refine_event(
            raw["kind"], lo_p, hi_p, raw["left"], raw["right"], comps_at,
            spec.tol_param, tol)
        refined.append({**raw, "param": param_star,
                        "left_inc": left_inc, "right_inc": right_inc})

    fused, join_edges = _fuse_reconnections(refined, spec, sig.dx)

    events = []
    for r in fused:
        events.append(_validate_event(
            r["kind"], r["param"], r["left_inc"], r["right_inc"],
            stack_at, spec, ladder, seed=r.get("seed")))
    events.sort(key=lambda e: e.param_value)

    graph = _build_graph(spec, params, per_slice, ids,
                         all_edges, join_edges, tuple(events))
    return graph, events


def _fuse_reconnections(refined, spec, dx):
    """Fuse saddle reconnections detected as two simultaneous changes.

    A level curve reconnecting at a saddle shows up in interval tracking
    as a Split plus a Death (or a Merge plus a Birth) in the same slice
    gap: the enclosing component rewires while a component nested inside
    it ends (or starts).  Both changes pin the same parameter, and the
    nested component's final top sits at the saddle, so the pair becomes
    one index-1 event seeded from that top.  A join edge keeps the nested
    chain connected to a continuing chain, exactly as the level curves
    are connected through the saddle.
    """
    out = []
    join_edges = []
    used = [False] * len(refined)
    for i, ri in enumerate(refined):
        if used[i]:
            continue
        partner_kind = {"Split": "Death", "Merge": "Birth"}.get(ri["kind"])
        if partner_kind is not None:
            for j, rj in enumerate(refined):
                if (j == i or used[j] or rj["gap"] != ri["gap"]
                        or rj["kind"] != partner_kind):
                    continue
                if abs(ri["param"] - rj["param"]) > 4.0 * spec.tol_param:
                    continue
                if ri["kind"] == "Split":
                    host = ri["left"][0]
                    nested = rj["left"][0]
                else:
                    host = ri["right"][0]
                    nested = rj["right"][0]
                inside = (nested["interval"][0] >= host["interval"][0] - dx
                          and nested["interval"][1] <= host["interval"][1] + dx
                          and nested["depth"] > host["depth"])
                if not inside:
                    continue
                used[j] = True
                inc = (rj["left_inc"] if ri["kind"] == "Split"
                       else rj["right_inc"])
                ri = {**ri, "seed": inc[0]["seed"],
                      "param": 0.5 * (ri["param"] + rj["param"])}
                if ri["kind"] == "Split":
                    join_edges.append((rj["left_ids"][0], ri["right_ids"][0]))
                else:
                    join_edges.append((ri["left_ids"][0], rj["right_ids"][0]))
                break
        used[i] = True
        out.append(ri)
    return out, join_edges


def _refine_event(kind, lo_p, hi_p, left_comps, right_comps, comps_at,
                  tol_param, tol):
    """Bisect the bracketing params until the change is pinned to tol_param.

    Follows the involved components' incarnations through the midpoints so
    the same feature is tracked even while it moves.
    """
    left = list(left_comps)
    right = list(right_comps)
    while hi_p - lo_p > tol_param:
        mid = 0.5 * (lo_p + hi_p)
        comps_m, _ = comps_at(mid)
        if kind == "Death":
            j = _best_match(left[0], comps_m, tol)
            if j is not None:
                lo_p, left = mid, [comps_m[j]]
            else:
                hi_p = mid
        elif kind == "Birth":
            j = _best_match(right[0], comps_m, tol)
            if j is not None:
                hi_p, right = mid, [comps_m[j]]
            else:
                lo_p = mid
        elif kind == "Merge":
            j0 = _best_match(left[0], comps_m, tol)
            j1 = _best_match(left[1], comps_m, tol)
            if j0 is not None and j1 is not None and j0 != j1:
                lo_p, left = mid, [comps_m[j0], comps_m[j1]]
            else:
                hi_p = mid
        else:  # Split
            j0 = _best_match(right[0], comps_m, tol)
            j1 = _best_match(right[1], comps_m, tol)
            if j0 is not None and j1 is not None and j0 != j1:
                hi_p, right = mid, [comps_m[j0], comps_m[j1]]
            else:
                lo_p = mid
    return 0.5 * (lo_p + hi_p), left, right


def _event_seed(kind, left_inc, right_inc, ladder):
    sigma_floor = float(ladder[0])
    if kind == "Death":
        x, s = left_inc[0]["seed"]
    elif kind == "Birth":
        x, s = right_inc[0]["seed"]
    else:
        pair = left_inc if kind == "Merge" else right_inc
        a, b = sorted(pair, key=lambda c: c["interval"][0])
        x = 0.5 * (a["interval"][1] + b["interval"][0])
        tops = [c["top"] for c in pair if math.isfinite(c["top"])]
        # the col sits below the lower of the two summits
        s = 0.5 * min(tops) if tops else float(ladder[-1]) / 2.0
    if not math.isfinite(s):
        s = float(ladder[-1]) / 2.0
    return x, max(s, sigma_floor)


def _polish_param(stack_at, k, param, seed, residuals, level, max_iter=12):
    """Newton-polish an order-axis event parameter onto the continuum event.

    Bisection pins the parameter where discrete interval matching flips,
    which sits a grid-dependent offset away from the continuum event.  A
    scalar Newton iteration on the level constraint, relocating the
    critical point at every step, removes that offset.
    """
    x, s = seed
    r1, r2 = residuals
    for _ in range(max_iter):
        stack = stack_at(param)
        try:
            (x, s), (r1, r2) = locate_critical_point(stack, k, (x, s))
        except NoConvergence:
            return param, (x, s), (r1, r2), False
        value = stack.point(k, x, s)
        scale_k = stack.grid(k).scale
        if abs(value - level) <= 1e-8 * scale_k:
            return param, (x, s), (r1, r2), True
        g = stack.point(k, x, s, dp=1)
        if abs(g) <= 1e-9 * scale_k:
            return param, (x, s), (r1, r2), False
        new_param = param - (value - level) / g
        if new_param < 0.0:
            return param, (x, s), (r1, r2), False
        param = new_param
    return param, (x, s), (r1, r2), False


def _validate_event(kind, param_star, left_inc, right_inc, stack_at, spec,
                    ladder, seed=None) -> BifurcationEvent:
    if seed is None:
        seed = _event_seed(kind, left_inc, right_inc, ladder)
    k = spec.k
    stack = stack_at(param_star if spec.axis == AXIS_P else spec.p)
    degenerate = False
    try:
        (x, s), (r1, r2) = locate_critical_point(stack, k, seed)
    except NoConvergence:
        degenerate = True
        x, s = seed
        r1 = stack.point(k + 1, x, s)
        r2 = s * stack.point(k + 2, x, s)

    param = param_star
    if not degenerate:
        if spec.axis == AXIS_C:
            # the field is fixed, so the continuum event parameter is
            # exactly the critical value at the located point
            param = stack.point(k, x, s)
        else:
            param, (x, s), (r1, r2), ok = _polish_param(
                stack_at, k, param, (x, s), (r1, r2), spec.level)
            if ok:
                stack = stack_at(param)
            else:
                degenerate = True
        if abs(param - param_star) > 5.0 * spec.tol_param:
            # the polish wandered off the bracketed transition
            param = param_star
            degenerate = True

    level = param if spec.axis == AXIS_C else spec.level
    if not degenerate:
        if abs(stack.point(k, x, s) - level) > 1e-6 * stack.grid(k).scale:
            degenerate = True

    positive_rungs = np.asarray(ladder, dtype=float)
    positive_rungs = positive_rungs[positive_rungs > 0.0]
    sigma_floor = 0.5 * float(positive_rungs[0]) if positive_rungs.size else 0.0
    multiplicity = 1 if s < sigma_floor else 2
    event = BifurcationEvent(
        param_value=float(param), kind=kind, index=KIND_INDEX[kind],
        location=(x, s), residuals=(r1, r2), multiplicity=multiplicity,
        degenerate=degenerate)
    if not degenerate:
        try:
            classify_index(event, stack, k, spec.axis)
        except IndexMismatch:
            event = replace(event, degenerate=True)
    return event


def _build_graph(spec, params, per_slice, ids, all_edges, join_edges,
                 events) -> SliceGraph:
    slices = []
    for si, (comps, _) in enumerate(per_slice):
        row = tuple(
            SliceComponent(
                slice_index=si, component_id=cid,
                interval=c["interval"], kind=c["kind"],
                depth=c["depth"], top_sigma=c["top"])
            for c, cid in zip(comps, ids[si]))
        slices.append(row)
    edges = [e for gap_edges in all_edges for e in gap_edges]
    edges.extend(join_edges)
    return SliceGraph(axis=spec.axis, k=spec.k,
                      params=tuple(float(p) for p in params),
                      slices=tuple(slices), edges=tuple(edges), events=events)


# ======================================================================
# Handle counts and integer invariants
# ======================================================================

class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _component_multiplicity(kinds) -> int:
    """2 for components that never touch the axis (mirror pair), else 1."""
    return 1 if any(k in ("arch", "line") for k in kinds) else 2


def invariant_table(graph: SliceGraph,
                    events: tuple[BifurcationEvent, ...]) -> InvariantTable:
    """Handle counts per inter-event region, with exact Euler checks.

    For each region the scan's slice components up to the region are glued
    into a lifetime graph; every connected component is one capped surface
    component and its handle count is the graph's cycle rank (edges -
    vertices + 1).  The per-region Euler balance
    ``c0 - c1 + c2 == sum(2 - 2*mu)`` (caps included on both ends) must
    hold exactly; a violation raises InconsistentEuler, which indicates a
    missed event rather than a numerical tolerance problem.

    Raises
    ------
    TopologyViolation
        If any tracked component is an open line (level zero): the capped
        surface bookkeeping needs closed contours.
    UnresolvedEvent
        If some inter-event region contains no scan slice.
    InconsistentEuler
        If any resolved region fails the integer Euler balance.
    """
    comp_by_id = {}
    for row in graph.slices:
        for sc in row:
            comp_by_id[sc.component_id] = sc
            if sc.kind == "line":
                raise TopologyViolation(
                    "open components reach the window top; handle counting "
                    "needs closed contours (scan a nonzero level)"
                )

    events = tuple(sorted(events, key=lambda e: e.param_value))
    boundaries = tuple(e.param_value for e in events)
    span = float(graph.params[-1]) - float(graph.params[0])
    eps = 1e-9 * max(span, 1.0)

    # coincident event params cut the axis once, and cuts at the scan's own
    # endpoints cut nothing
    cuts: list[float] = []
    for b in boundaries:
        if b <= graph.params[0] + eps or b >= graph.params[-1] - eps:
            continue
        if not cuts or b - cuts[-1] > eps:
            cuts.append(b)
    region_edges = [float(graph.params[0]), *cuts, float(graph.params[-1])]
    regions_span = list(zip(region_edges[:-1], region_edges[1:]))

    # slice index -> region index; event params sit strictly inside slice
    # gaps, so a slice belongs to the last region whose low edge it reaches
    def region_of(param: float) -> int:
        for r in range(len(regions_span) - 1, -1, -1):
            if param >= regions_span[r][0]:
                return r
        return 0

    slice_region = [region_of(p) for p in graph.params]
    for r in range(len(regions_span)):
        if r not in slice_region:
            raise UnresolvedEvent(
                f"region {r} between events contains no scan slice; rerun "
                "with a larger n_slices"
            )

    # union-find over slice-major positions, so hand-built graphs may use
    # any component ids
    order = [sc.component_id for row in graph.slices for sc in row]
    pos = {cid: i for i, cid in enumerate(order)}
    n_vertices = len(order)
    uf = _UnionFind(n_vertices)
    edge_count = dict.fromkeys(range(n_vertices), 0)
    vert_count = dict.fromkeys(range(n_vertices), 1)

    first_ids = [sc.component_id for sc in graph.slices[0]]
    weighted_l = sum(
        _component_multiplicity([comp_by_id[i].kind]) for i in first_ids)

    degenerate_params = [e.param_value for e in events if e.degenerate]

    def poisoned(hi_edge: float) -> bool:
        # a degenerate event is excluded from the index counts, so every
        # region past it would fail the balance for a known reason
        return any(d < hi_edge - eps for d in degenerate_params)

    edges_by_left_slice: dict[int, list[tuple[int, int]]] = {}
    for a, b in graph.edges:
        edges_by_left_slice.setdefault(
            comp_by_id[a].slice_index, []).append((pos[a], pos[b]))

    regions = []
    processed_slice = -1
    for r, (lo, hi) in enumerate(regions_span):
        in_region = [i for i, rr in enumerate(slice_region) if rr == r]
        # glue all slices up to the end of this region into the union-find
        last_slice = max(in_region)
        while processed_slice < last_slice:
            processed_slice += 1
            for a, b in edges_by_left_slice.get(processed_slice - 1, []):
                ra, rb = uf.find(a), uf.find(b)
                if ra == rb:
                    edge_count[ra] += 1
                else:
                    uf.union(a, b)
                    root = uf.find(a)
                    edge_count[root] = edge_count[ra] + edge_count[rb] + 1
                    vert_count[root] = vert_count[ra] + vert_count[rb]

        live_sets = []
        for si in (in_region[0], last_slice):
            live_sets.append(sorted(uf.find(pos[sc.component_id])
                                    for sc in graph.slices[si]))
        if live_sets[0] != live_sets[-1]:
            raise InconsistentEuler(
                f"component structure changes inside region {r} without an "
                "event; rerun with doubled n_slices"
            )
        live_count = len(graph.slices[last_slice])

        roots = {}
        seen_kinds: dict[int, list[str]] = {}
        for i, cid in enumerate(order):
            if comp_by_id[cid].slice_index <= last_slice:
                root = uf.find(i)
                roots[root] = (edge_count[root], vert_count[root])
                seen_kinds.setdefault(root, []).append(comp_by_id[cid].kind)

        resolved = not poisoned(hi)
        mu_entries = []
        chi_surface = 0
        for root in sorted(roots):
            e_r, v_r = roots[root]
            mu = e_r - v_r + 1
            mult = _component_multiplicity(seen_kinds[root])
            mu_entries.append((order[root], mu))
            chi_surface += mult * (2 - 2 * mu)

        if resolved:
            c0 = weighted_l
            c1 = 0
            c2 = sum(
                _component_multiplicity([sc.kind])
                for sc in graph.slices[last_slice])
            for ev in events:
                if ev.param_value <= lo and not ev.degenerate:
                    if ev.index == 0:
                        c0 += ev.multiplicity
                    elif ev.index == 1:
                        c1 += ev.multiplicity
                    else:
                        c2 += ev.multiplicity
            if c0 - c1 + c2 != chi_surface:
                raise InconsistentEuler(
                    f"region {r}: index counts give {c0 - c1 + c2} but the "
                    f"capped surface has Euler characteristic {chi_surface}; "
                    "an event was missed (rerun with doubled n_slices)"
                )
            regions.append(RegionInvariants(
                lo=lo, hi=hi, component_count=live_count,
                mu=tuple(mu_entries), resolved=True))
        else:
            regions.append(RegionInvariants(
                lo=lo, hi=hi, component_count=live_count, mu=(),
                resolved=False))

    # full-scan summary (multiplicity weighted)
    last_ids = [sc.component_id for sc in graph.slices[-1]]
    roots_all: dict[int, list[int]] = {}
    for i, cid in enumerate(order):
        roots_all.setdefault(uf.find(i), []).append(cid)
    first_roots = {uf.find(pos[i]) for i in first_ids}
    last_roots = {uf.find(pos[i]) for i in last_ids}
    first_id_set = set(first_ids)
    last_id_set = set(last_ids)
    r1 = r2 = d0 = d2 = total_mu = saddle_floor = 0
    for root, members in roots_all.items():
        mult = _component_multiplicity([comp_by_id[i].kind for i in members])
        mu = edge_count[root] - vert_count[root] + 1
        r1 += mult
        total_mu += mult * mu
        boundary_circles = (sum(1 for i in members if i in first_id_set)
                            + sum(1 for i in members if i in last_id_set))
        saddle_floor += mult * (max(boundary_circles - 2, 0) + 2 * mu)
        if root not in first_roots:
            d0 += mult
        if root not in last_roots:
            d2 += mult
        if root not in first_roots and root not in last_roots:
            r2 += mult
    weighted_k = sum(
        _component_multiplicity([comp_by_id[i].kind]) for i in last_ids)
    summary = ScanSummary(
        start_circles=weighted_l, end_circles=weighted_k,
        component_count=r1, interior_count=r2,
        born_inside=d0, died_inside=d2, total_handles=total_mu,
        saddle_floor=saddle_floor)
    return InvariantTable(boundaries=boundaries, regions=tuple(regions),
                          summary=summary)


def morse_report(table: InvariantTable,
                 events: tuple[BifurcationEvent, ...]) -> MorseReport:
    """Integer lower bounds and the exact Euler identity for one scan.

    The capped tracked surface is closed and orientable, so its Betti
    numbers come straight from the component count and total handle count:
    b0 = b2 = components, b1 = 2 * handles.  Event counts of each index
    must cover the corresponding Betti number (after discounting the
    boundary caps, which are extrema but not events), match the Euler
    characteristic exactly, and cover the interior birth/death counts.
    """
    s = table.summary
    c = [0, 0, 0]
    degenerate = 0
    for ev in events:
        if ev.degenerate:
            degenerate += 1
            continue
        c[ev.index] += ev.multiplicity
    c0, c1, c2 = c
    b0 = b2 = s.component_count
    b1 = 2 * s.total_handles
    checks = (
        ("deaths_cover_top_classes", c2 >= b2 - s.end_circles),
        ("saddles_cover_cycles", c1 >= b1),
        ("births_cover_components", c0 >= b0 - s.start_circles),
        ("euler_balance",
         c2 - c1 + c0 == b2 - b1 + b0 - s.start_circles - s.end_circles),
        ("deaths_cover_interior_ends", c2 >= s.died_inside),
        ("births_cover_interior_starts", c0 >= s.born_inside),
        ("saddles_cover_relative_cycles", c1 >= s.saddle_floor),
    )
    return MorseReport(
        counts=(c0, c1, c2), betti=(b0, b1, b2), checks=checks,
        passed=all(ok for _, ok in checks), summary=s,
        degenerate_events=degenerate)


# ======================================================================
# Reporting
# ======================================================================

def scan_report(graph: SliceGraph, events,
                table: InvariantTable | None = None,
                morse: MorseReport | None = None) -> dict:
    """JSON-ready scan report: events, per-region handle counts, checks."""
    doc: dict = {
        "axis": graph.axis,
        "range": [graph.params[0], graph.params[-1]],
        "events": [
            {
                "param": e.param_value,
                "kind": e.kind,
                "index": e.index,
                "x": e.location[0],
                "sigma": e.location[1],
                "multiplicity": e.multiplicity,
                "degenerate": e.degenerate,
            }
            for e in events
        ],
    }
    if table is not None:
        doc["regions"] = [
            {
                "lo": r.lo,
                "hi": r.hi,
                "component_count": r.component_count,
                "components": [{"id": cid, "mu": mu} for cid, mu in r.mu],
                "resolved": r.resolved,
            }
            for r in table.regions
        ]
    if morse is not None:
        doc["morse"] = {
            "c0": morse.counts[0],
            "c1": morse.counts[1],
            "c2": morse.counts[2],
            "beta": list(morse.betti),
            "checks": {name: ok for name, ok in morse.checks},
            "pass": morse.passed,
        }
    return doc
