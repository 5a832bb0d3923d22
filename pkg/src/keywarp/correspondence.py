"""Keypoint matching into a new observation, feasibility filters, demo scoring.

Each demo keypoint is matched independently in the left and right views of
the observation and the matched pair is triangulated into a target waypoint.
Two filters guard against bad matches: the triangulation residual (the two
viewing rays must nearly intersect) and a cross-view consistency check
(matching a keypoint into the *other* view of the same scene must put its
ray at the same distance from the waypoint in the demo and the observation).
Demos whose every waypoint survives both filters are ranked by the stacked
Euclidean distance between source and target waypoints; the closest one
becomes the warp source.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Protocol

import numpy as np

from .demo import DemoSummary, SceneSnapshot
from .geometry import DegenerateRays, point_ray_distance, ray_through_pixel, triangulate


class AllInfeasible(ValueError):
    """No candidate demo produced a feasible match for the observation."""


class Match(NamedTuple):
    pixel: np.ndarray      # (2,) subpixel match in the target view
    confidence: float      # in [0, 1]


class MatcherInterface(Protocol):
    """Semantic correspondence backend.

    Given a query pixel in `query_view` of the source snapshot, return the
    corresponding pixel in `target_view` of the target snapshot, or None when
    no match is found. Implementations must be deterministic for a fixed
    seed and must support same-scene cross-view queries (source is target).
    """

    def match(self, source: SceneSnapshot, target: SceneSnapshot,
              query_pixel, query_view: str, target_view: str) -> Optional[Match]:
        ...


@dataclass(frozen=True)
class FilterConfig:
    residual_max: float = 0.10   # m, triangulation gate
    gap_max: float = 0.10        # m, cross-view consistency gate

    def __post_init__(self):
        if not (self.residual_max > 0 and self.gap_max > 0):
            raise ValueError("filter thresholds must be positive")


@dataclass
class MatchOutcome:
    demo_id: str
    target_keypoints: dict            # view -> (T, 2); NaN rows where unmatched
    target_waypoints: np.ndarray      # (T, 3); NaN rows where not triangulated
    triangulation_residuals: np.ndarray   # (T,)
    cross_view_gaps: np.ndarray       # (T,) worst |d_demo - d_obs| per waypoint
    feasible: bool
    score: float                      # ||W - W_target||_2 stacked, inf if infeasible
    confidences: dict = field(default_factory=dict)   # diagnostics only


_OTHER_VIEW = {"left": "right", "right": "left"}


def cross_view_distance(matcher: MatcherInterface, snapshot: SceneSnapshot,
                        keypoint, view: str, waypoint) -> float:
    """One side of the consistency check: match a keypoint into the other
    view of the *same* scene and return the distance from the waypoint to the
    ray of that match. A failed match counts as an infinite distance."""
    other = _OTHER_VIEW[view]
    m = matcher.match(snapshot, snapshot, keypoint, view, other)
    if m is None:
        return float("inf")
    ray = ray_through_pixel(snapshot.rig.camera(other), m.pixel)
    return point_ray_distance(ray, waypoint)


def match_demo(matcher: MatcherInterface, demo: DemoSummary, obs: SceneSnapshot,
               cfg: FilterConfig = FilterConfig(),
               demo_side_distances: dict = None) -> MatchOutcome:
    """Match every demo keypoint into the observation and run both filters.

    Failures never raise; they are encoded as an infeasible outcome with
    score +inf. The score is computed only for feasible outcomes.

    `demo_side_distances` optionally supplies the demo half of the
    cross-view check as {view: (T,) distances}. The demo images never
    change, so these can be computed once when the demo is summarized
    (libraries store them alongside the demo); without them the demo side
    is queried live, same as the observation side.
    """
    T = demo.num_waypoints
    kp_out = {v: np.full((T, 2), np.nan) for v in ("left", "right")}
    conf = {v: np.full(T, np.nan) for v in ("left", "right")}
    w_out = np.full((T, 3), np.nan)
    residuals = np.full(T, np.inf)
    gaps = np.full(T, np.inf)
    feasible = True

    for t in range(T):
        matched = {}
        for view in ("left", "right"):
            m = matcher.match(demo.snapshot, obs, demo.keypoints[view][t], view, view)
            if m is not None:
                matched[view] = m
                kp_out[view][t] = m.pixel
                conf[view][t] = m.confidence
        if len(matched) < 2:
            feasible = False
            continue
        try:
            point, residual = triangulate(obs.rig, matched["left"].pixel,
                                          matched["right"].pixel)
        except DegenerateRays:
            feasible = False
            continue
        w_out[t] = point
        residuals[t] = residual

        worst_gap = 0.0
        for view in ("left", "right"):
            if demo_side_distances is not None:
                d_demo = float(demo_side_distances[view][t])
            else:
                d_demo = cross_view_distance(matcher, demo.snapshot,
                                             demo.keypoints[view][t], view,
                                             demo.waypoints[t])
            d_obs = cross_view_distance(matcher, obs, matched[view].pixel,
                                        view, point)
            worst_gap = max(worst_gap, abs(d_demo - d_obs))
        gaps[t] = worst_gap

        if residual > cfg.residual_max or worst_gap > cfg.gap_max:
            feasible = False

    score = float(np.linalg.norm(demo.waypoints - w_out)) if feasible else float("inf")
    return MatchOutcome(demo_id=demo.id, target_keypoints=kp_out,
                        target_waypoints=w_out,
                        triangulation_residuals=residuals,
                        cross_view_gaps=gaps, feasible=feasible, score=score,
                        confidences=conf)


def select_source_demo(outcomes) -> str:
    """Feasible outcome with the lowest score; ties go to the lowest demo id."""
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("no outcomes to select from")
    feasible = [o for o in outcomes if o.feasible]
    if not feasible:
        raise AllInfeasible("every candidate demo failed the match filters")
    return min(feasible, key=lambda o: (o.score, o.demo_id)).demo_id
