"""Singular set extraction and codimension <= 2 event classification.

The classifier is combinatorial: singular points per time slice are
clustered, clusters are chained into arcs over t, and arc topology decides
the event kind. Shock arcs are codim 1; births and merges codim 2. Arc
endpoints that leave branches behind, or arcs splitting forward in time,
are the forbidden patterns and must never occur in minimax solutions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .selector import GridSolution

KINDS = ("Shock", "ShockBirth", "ShockMerge", "ForbiddenA", "ForbiddenB", "Unclassified")


@dataclass(frozen=True)
class SingularEvent:
    kind: str
    t: float
    q: float
    evidence: dict = field(default_factory=dict)


def singular_set(g: GridSolution, periodic: bool = False,
                 period: float | None = None) -> np.ndarray:
    """Boolean mask over grid points: selected branch id changes across the
    cell, or the q-slope jump is an outlier (5x the median local variation
    and a sizeable fraction of the slice's slope range)."""
    nt, nq = g.u.shape
    mask = np.zeros((nt, nq), dtype=bool)
    if nq < 4:
        return mask
    dq = float(g.q[1] - g.q[0])
    for i in range(nt):
        b = g.branch[i]
        change = b[:-1] != b[1:]
        mask[i, :-1] |= change
        mask[i, 1:] |= change
        # no branch-id wrap check: section numbering restarts across the
        # periodic seam, so differing ids there carry no shock information
        s = np.diff(g.u[i]) / dq
        jump = np.abs(np.diff(s))
        med = float(np.median(jump))
        srange = float(s.max() - s.min())
        thr = max(5.0 * med, 0.45 * srange, 1e-12)
        big = jump > thr
        mask[i, 1:-1] |= big
        if periodic:
            s_wrap = (g.u[i, 0] - g.u[i, -1]) / dq
            if abs(s_wrap - s[-1]) > thr or abs(s[0] - s_wrap) > thr:
                mask[i, -1] = mask[i, 0] = True
    return mask


def _clusters(row_mask: np.ndarray, q: np.ndarray, periodic: bool,
              bridge: int = 3):
    """Connected runs of singular grid points, bridging gaps of up to
    `bridge` cells; returns center q per cluster."""
    idx = np.nonzero(row_mask)[0]
    if len(idx) == 0:
        return []
    groups = [[int(idx[0])]]
    for j in idx[1:]:
        if j - groups[-1][-1] <= 1 + bridge:
            groups[-1].append(int(j))
        else:
            groups.append([int(j)])
    if periodic and len(groups) > 1 and \
            groups[0][0] + len(q) - groups[-1][-1] <= 1 + bridge:
        wrap = groups.pop()
        groups[0] = wrap + groups[0]
    period = q[-1] - q[0] + (q[1] - q[0])
    out = []
    for grp in groups:
        qs = q[grp]
        if periodic and qs.max() - qs.min() > period / 2:
            # wrapped cluster: average on the circle
            ang = qs / period * 2 * np.pi
            c = np.arctan2(np.mean(np.sin(ang)), np.mean(np.cos(ang)))
            center = float((c % (2 * np.pi)) / (2 * np.pi) * period + q[0])
        else:
            center = float(qs.mean())
        out.append({"q": center, "cells": grp})
    return out


def _circ_dist(a, b, period):
    d = abs(a - b)
    if period is not None:
        d = min(d, period - d)
    return d


def classify(g: GridSolution, mask: np.ndarray, periodic: bool = False,
             match_radius_cells: float = 8.0) -> list[SingularEvent]:
    """Chain per-slice singular clusters into arcs and classify their
    endpoints and junctions."""
    nt, nq = g.u.shape
    dq = float(g.q[1] - g.q[0])
    period = nq * dq if periodic else None
    radius = match_radius_cells * dq

    per_slice = [_clusters(mask[i], g.q, periodic) for i in range(nt)]

    arcs = []       # each: {"points": [(i, q)], "open": bool}
    events = []

    def branch_count_near(i, qv):
        j = int(round((qv - g.q[0]) / dq))
        j = j % nq if periodic else int(np.clip(j, 0, nq - 1))
        if periodic:
            js = [(j + k) % nq for k in range(-2, 3)]
        else:
            js = list(range(max(0, j - 2), min(nq, j + 3)))
        return int(max(g.branch_count[i, jj] for jj in js))

    active = []  # arc indices
    for i in range(nt):
        clusters = per_slice[i]
        # match active arcs to clusters
        matches = {k: [] for k in range(len(clusters))}
        arc_match = {}
        within = {}
        for a in active:
            tip_q = arcs[a]["points"][-1][1]
            near = [(abs_d, k) for k, c in enumerate(clusters)
                    if (abs_d := _circ_dist(tip_q, c["q"], period)) <= radius]
            near.sort()
            within[a] = [k for _, k in near]
            best = near[0][1] if near else None
            arc_match[a] = best
            if best is not None:
                matches[best].append(a)

        # an arc seeing several unclaimed clusters is a forward split
        split_children = set()
        for a in active:
            extras = [k for k in within.get(a, [])[1:] if not matches[k]]
            if extras:
                events.append(SingularEvent(
                    kind="ForbiddenB", t=float(g.t[i]),
                    q=arcs[a]["points"][-1][1],
                    evidence={"reason": "arc splits forward in t",
                              "outgoing": 1 + len(extras)}))
                split_children.update(extras)

        new_active = []
        for k, c in enumerate(clusters):
            arrived = matches[k]
            if len(arrived) == 0:
                if k in split_children:
                    arcs.append({"points": [(i, c["q"])]})
                    new_active.append(len(arcs) - 1)
                    continue
                arcs.append({"points": [(i, c["q"])]})
                a = len(arcs) - 1
                if i > 0:
                    # the mask can lag the fold by a few slices while the slope
                    # jump is still tiny; date the birth at the first slice
                    # whose fiber near q is multivalued
                    j = i
                    while j - 1 >= 1 and j > i - 10 and branch_count_near(j - 1, c["q"]) >= 2:
                        j -= 1
                    if branch_count_near(j - 1, c["q"]) <= 1:
                        events.append(SingularEvent(
                            kind="ShockBirth", t=float(g.t[j]), q=c["q"],
                            evidence={"branch_count_before": branch_count_near(j - 1, c["q"]),
                                      "branch_count_here": branch_count_near(j, c["q"]),
                                      "mask_onset_t": float(g.t[i])}))
                    else:
                        events.append(SingularEvent(
                            kind="Unclassified", t=float(g.t[i]), q=c["q"],
                            evidence={"reason": "arc appears with a multivalued past fiber"}))
                else:
                    # singular from the very first slice: treat as pre-existing shock
                    pass
                new_active.append(a)
            elif len(arrived) == 1:
                a = arrived[0]
                arcs[a]["points"].append((i, c["q"]))
                new_active.append(a)
            else:
                # two or more arcs merge into one continuing arc
                events.append(SingularEvent(
                    kind="ShockMerge", t=float(g.t[i]), q=c["q"],
                    evidence={"incoming_arcs": len(arrived),
                              "branch_count": branch_count_near(i, c["q"])}))
                keep = arrived[0]
                for a in arrived[1:]:
                    arcs[keep]["points"].extend(arcs[a]["points"])
                arcs[keep]["points"].append((i, c["q"]))
                new_active.append(keep)

        # arcs that found no cluster this slice have ended at slice i-1
        matched_arcs = {a for a in new_active}
        for a in active:
            if a in matched_arcs or arc_match.get(a) is not None:
                continue
            i_end, q_end = arcs[a]["points"][-1]
            if branch_count_near(min(i_end + 1, nt - 1), q_end) >= 2:
                events.append(SingularEvent(
                    kind="ForbiddenA", t=float(g.t[i_end]), q=q_end,
                    evidence={"reason": "arc ends forward in t with branches persisting",
                              "branch_count_after": branch_count_near(min(i_end + 1, nt - 1), q_end)}))
            else:
                events.append(SingularEvent(
                    kind="Unclassified", t=float(g.t[i_end]), q=q_end,
                    evidence={"reason": "arc ends with a single-branch future fiber"}))
        active = new_active

    # one Shock event per arc with interior extent
    for arc in arcs:
        pts = arc["points"]
        if len(pts) >= 2:
            i_mid, q_mid = pts[len(pts) // 2]
            events.append(SingularEvent(
                kind="Shock", t=float(g.t[i_mid]), q=q_mid,
                evidence={"arc_slices": len(pts),
                          "t_span": [float(g.t[pts[0][0]]), float(g.t[pts[-1][0]])]}))
    events.sort(key=lambda e: (e.t, e.q, e.kind))
    return events


def forbidden_report(events: list[SingularEvent]) -> dict:
    """Counts and locations of forbidden/unclassified events; ok=False if
    any forbidden pattern was seen."""
    report = {"counts": {k: 0 for k in KINDS}, "forbidden_locations": [],
              "unclassified_locations": []}
    for e in events:
        report["counts"][e.kind] += 1
        if e.kind in ("ForbiddenA", "ForbiddenB"):
            report["forbidden_locations"].append({"kind": e.kind, "t": e.t, "q": e.q})
        elif e.kind == "Unclassified":
            report["unclassified_locations"].append({"t": e.t, "q": e.q})
    report["ok"] = not report["forbidden_locations"]
    return report


def events_to_json(events: list[SingularEvent]) -> str:
    return json.dumps([{"kind": e.kind, "t": e.t, "q": e.q, "evidence": e.evidence}
                       for e in events], indent=2, sort_keys=True)
