"""Scale trees over level-set components and their canonical signatures.

A tree node is an axis interval: arches span their two axis crossings and
carry the scale of their top, lines are degenerate intervals that extend to
arbitrarily large scale, and a virtual root spans the window.  Components
of one level never cross, so their intervals either nest or are disjoint;
nesting is exactly the parent relation.  Two canonical encodings serve
different comparisons: the ordered form keeps left-to-right child order
(sensitive to mirroring), the unordered form sorts children by their own
encodings recursively, which makes it a shape invariant: amplitude scaling,
x-scaling, and translation of the signal leave it unchanged.  The unordered
definition here is the coarsest invariant consistent with that use; see the
open-questions note in the README.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contours import KIND_CLOSED, KIND_LINE, KIND_TRUNCATED, ContourSet, LevelCurve
from .errors import NestingConflict, TopologyViolation

# ======================================================================
# Domain types
# ======================================================================

@dataclass(frozen=True)
class TreeNode:
    """One feature: kind in {"root", "arch", "line"}, the axis interval it
    spans, the scale of its top (math.inf for lines and the root), and its
    children in left-to-right interval order."""

    kind: str
    top_sigma: float
    interval: tuple[float, float]
    children: tuple["TreeNode", ...]


@dataclass(frozen=True)
class ScaleTree:
    root: TreeNode


@dataclass(frozen=True)
class TreeSignature:
    canonical_form: str
    ordered: bool


# ======================================================================
# Arch geometry
# ======================================================================

def arch_top(curve: LevelCurve) -> tuple[float, float]:
    """(x, sigma) of an arch's top, sharpened past the mesh.

    The top vertex and its two polyline neighbours define a parabola
    sigma(x); its maximum beats the raw vertex by up to half a ladder
    step.  Falls back to the top vertex when the three points do not
    describe a concave cap (collinear vertices or a window-clipped top).
    """
    verts = curve.vertices
    i = int(np.argmax(verts[:, 1]))
    if curve.closed:
        prev_i, next_i = (i - 1) % len(verts), (i + 1) % len(verts)
    else:
        if i == 0 or i == len(verts) - 1:
            return float(verts[i, 0]), float(verts[i, 1])
        prev_i, next_i = i - 1, i + 1
    (x0, s0), (x1, s1), (x2, s2) = verts[prev_i], verts[i], verts[next_i]
    if not (min(x0, x2) < x1 < max(x0, x2)):
        return float(x1), float(s1)
    d0 = (x1 - x0) * (x2 - x0)
    d1 = (x1 - x0) * (x2 - x1)
    d2 = (x2 - x0) * (x2 - x1)
    a = s0 / d0 - s1 / d1 + s2 / d2
    b = -s0 * (x1 + x2) / d0 + s1 * (x0 + x2) / d1 - s2 * (x0 + x1) / d2
    if a >= 0:
        return float(x1), float(s1)
    x_top = -b / (2 * a)
    if not (min(x0, x2) <= x_top <= max(x0, x2)):
        return float(x1), float(s1)
    c0 = s1 - a * x1 * x1 - b * x1
    return float(x_top), float(a * x_top * x_top + b * x_top + c0)


# ======================================================================
# Construction
# ======================================================================

def build_tree(contours: ContourSet, window: tuple[float, float],
               *, allow_truncated: bool = False, tol: float = 0.0) -> ScaleTree:
    """Nest the components of one level into a scale tree.

    ``window`` is the x extent the virtual root spans.  Truncated
    components carry no complete interval and cannot be placed; they are
    rejected unless ``allow_truncated`` explicitly drops them (the zero
    level routinely has one tail component running off the window).
    ``tol`` absorbs interval overlap up to the grid resolution; anything
    beyond it means the contours were mis-traced and raises
    `NestingConflict`.
    """
    items: list[tuple[tuple[float, float], float, str]] = []
    for curve in contours.curves:
        if curve.kind == KIND_TRUNCATED:
            if not allow_truncated:
                raise ValueError(
                    "truncated components present; enlarge the window or "
                    "pass allow_truncated=True to drop them"
                )
            continue
        if curve.kind == KIND_CLOSED:
            if len(curve.axis_crossings) != 2:
                raise TopologyViolation(
                    "closed component without two axis crossings cannot "
                    "be placed in the tree"
                )
            lo, hi = sorted(curve.axis_crossings)
            items.append(((lo, hi), arch_top(curve)[1], "arch"))
        elif curve.kind == KIND_LINE:
            if len(curve.axis_crossings) != 1:
                raise TopologyViolation(
                    "line component without exactly one axis crossing "
                    "cannot be placed in the tree"
                )
            x = curve.axis_crossings[0]
            items.append(((x, x), math.inf, "line"))

    items.sort(key=lambda it: (it[0][0], it[0][1]))

    root_frame = {"kind": "root", "top": math.inf,
                  "interval": (float(window[0]), float(window[1])),
                  "children": []}
    stack = [root_frame]

    def _close(frame) -> TreeNode:
        return TreeNode(kind=frame["kind"], top_sigma=frame["top"],
                        interval=frame["interval"],
                        children=tuple(frame["children"]))

    for (lo, hi), top, kind in items:
        while len(stack) > 1 and lo >= stack[-1]["interval"][1] - tol:
            done = _close(stack.pop())
            stack[-1]["children"].append(done)
        p_lo, p_hi = stack[-1]["interval"]
        if hi > p_hi + tol:
            raise NestingConflict(
                f"interval [{lo:g}, {hi:g}] partially overlaps "
                f"[{p_lo:g}, {p_hi:g}] beyond tolerance {tol:g}"
            )
        if math.isfinite(stack[-1]["top"]) and top >= stack[-1]["top"]:
            raise NestingConflict(
                f"nested feature at scale {top:g} is not below its "
                f"parent's top {stack[-1]['top']:g}"
            )
        stack.append({"kind": kind, "top": top, "interval": (lo, hi),
                      "children": []})

    while len(stack) > 1:
        done = _close(stack.pop())
        stack[-1]["children"].append(done)
    return ScaleTree(root=_close(stack[0]))


# ======================================================================
# Signatures
# ======================================================================

def _encode(node: TreeNode, ordered: bool) -> str:
    if node.kind == "line":
        return "L"
    parts = [_encode(child, ordered) for child in node.children]
    if not ordered:
        parts.sort()
    prefix = "A" if node.kind == "arch" else ""
    return prefix + "(" + "".join(parts) + ")"


def canonicalize(tree: ScaleTree, ordered: bool) -> TreeSignature:
    """Parenthesized canonical form.

    ``ordered=True`` keeps left-to-right child order (mirror-sensitive);
    ``ordered=False`` sorts children recursively by their encodings, so
    relabeling or reordering input components cannot change it.
    """
    return TreeSignature(canonical_form=_encode(tree.root, ordered),
                         ordered=ordered)


def tree_equal(a: TreeSignature, b: TreeSignature) -> bool:
    """Signature equality; comparing across conventions is a usage error."""
    if a.ordered != b.ordered:
        raise ValueError("cannot compare an ordered signature with an "
                         "unordered one")
    return a.canonical_form == b.canonical_form


# ======================================================================
# Serialization
# ======================================================================

def tree_json(tree: ScaleTree) -> dict:
    """JSON-ready dict: {kind, top_sigma, interval, children}, with the
    string "inf" standing in for an unbounded top."""

    def _node(n: TreeNode) -> dict:
        top = "inf" if math.isinf(n.top_sigma) else n.top_sigma
        return {
            "kind": n.kind,
            "top_sigma": top,
            "interval": [n.interval[0], n.interval[1]],
            "children": [_node(ch) for ch in n.children],
        }

    return _node(tree.root)
