//! Rule-based driving: curve-aware IDM with a give-way rule at the ring entry.
//! Drives background traffic, the yield baseline and the planner's rollouts.

use serde::{Deserialize, Serialize};

use crate::dynamics::{idm_acceleration, IdmParams};
use crate::geometry::{PathSpec, Point2, RegionKind, RoundaboutLayout};
use crate::rewards::{boundary_radius, curve_speed_limit, RewardConfig};
use crate::scalar::{wrap_angle, Real};

/// Give-way rule at the ring entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldRule<T> {
    /// Ring arc upstream of the entry point that must be clear (rad).
    pub upstream_window: T,
    /// Ring arc just past the entry point that must be clear (rad).
    pub downstream_margin: T,
    /// A driver that would need harder braking than this to stop drives through instead.
    pub commit_decel: T,
}

impl<T: Real> YieldRule<T> {
    pub fn background() -> Self {
        Self {
            upstream_window: T::lit(1.2),
            downstream_margin: T::lit(0.35),
            commit_decel: T::lit(3.0),
        }
    }

    pub fn baseline() -> Self {
        Self {
            upstream_window: T::lit(2.0),
            downstream_margin: T::lit(0.5),
            commit_decel: T::lit(9.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct BaselineParams<T> {
    pub idm: IdmParams<T>,
    pub yield_rule: YieldRule<T>,
    /// Deceleration used to slow down ahead of curves (m/s^2).
    pub curve_decel: T,
}

/// Where a path meets the ring.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Merge<T> {
    pub(crate) stop_station: T,
    pub(crate) ring_angle: T,
}

/// The stop line sits where a waiting vehicle is clear of ring traffic by
/// more than the collision distance.
pub(crate) fn merge_of<T: Real>(path: &PathSpec<T>, layout: &RoundaboutLayout<T>, rewards: &RewardConfig<T>) -> Merge<T> {
    let ring = path.segments[2].start - layout.center;
    let clearance = T::two() * boundary_radius(rewards.vehicle_length, rewards.vehicle_width) + T::one();
    let step = T::lit(0.1);
    let mut stop = path.segment_start(1);
    while stop > step {
        let p = path.point_at(stop);
        if ((p - layout.center).norm() - layout.ring_radius).abs() >= clearance {
            break;
        }
        stop -= step;
    }
    Merge {
        stop_station: stop,
        ring_angle: wrap_angle(ring.angle()),
    }
}

fn ring_conflict<T: Real>(
    merge: &Merge<T>,
    rule: &YieldRule<T>,
    others: &[Point2<T>],
    layout: &RoundaboutLayout<T>,
) -> bool {
    others.iter().any(|p| {
        if layout.classify_region(*p) != Ok(RegionKind::Ring) {
            return false;
        }
        let phi = wrap_angle((*p - layout.center).angle());
        let upstream = wrap_angle(merge.ring_angle - phi);
        let downstream = wrap_angle(phi - merge.ring_angle);
        upstream <= rule.upstream_window || downstream <= rule.downstream_margin
    })
}

/// Yield state kept by a driver between steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct YieldMemory {
    /// Too close to stop comfortably when a conflict appeared; drives through.
    pub committed: bool,
}

/// Acceleration cap from the give-way rule, `None` when no stop is required.
pub(crate) fn give_way<T: Real>(
    station: T,
    v: T,
    merge: &Merge<T>,
    rule: &YieldRule<T>,
    idm: &IdmParams<T>,
    others: &[Point2<T>],
    layout: &RoundaboutLayout<T>,
    memory: &mut YieldMemory,
) -> Option<T> {
    let to_line = merge.stop_station - station;
    if to_line <= T::zero() {
        memory.committed = false;
        return None;
    }
    if memory.committed || !ring_conflict(merge, rule, others, layout) {
        return None;
    }
    let gap = to_line.max(T::lit(0.1));
    let a_stop = idm_acceleration(gap, v, T::zero(), idm).unwrap_or(-idm.physical_brake);
    if a_stop >= -rule.commit_decel || v < T::lit(0.5) {
        Some(a_stop)
    } else {
        memory.committed = true;
        None
    }
}

/// Leader on `path` ahead of `station`: bumper gap and speed.
pub(crate) fn leader_on_path<T: Real>(
    path: &PathSpec<T>,
    station: T,
    candidates: &[(Point2<T>, T)],
    vehicle_length: T,
) -> Option<(T, T)> {
    let lane_tol = T::one();
    let lookahead = T::lit(60.0);
    let mut best: Option<(T, T)> = None;
    for &(p, v) in candidates {
        let proj = path.project(p);
        if proj.distance > lane_tol {
            continue;
        }
        let ahead = proj.station - station;
        if ahead <= T::zero() || ahead > lookahead {
            continue;
        }
        if best.map_or(true, |(d, _)| ahead < d) {
            best = Some((ahead, v));
        }
    }
    best.map(|(d, v)| ((d - vehicle_length).max(T::lit(0.1)), v))
}

/// Inputs the yield baseline reads at one step.
#[derive(Debug, Clone)]
pub struct BaselineView<'a, T> {
    pub station: T,
    pub v: T,
    pub path: &'a PathSpec<T>,
    pub layout: &'a RoundaboutLayout<T>,
    /// Positions and speeds of every other vehicle.
    pub others: &'a [(Point2<T>, T)],
    pub rewards: &'a RewardConfig<T>,
}

/// Rule-based driver: curve-aware IDM, full stop at the entry line while the ring near the
/// entry is occupied, no yielding once inside the ring.
pub fn yield_baseline_policy<T: Real>(view: &BaselineView<'_, T>, params: &BaselineParams<T>, memory: &mut YieldMemory) -> T {
    let v0 = curve_speed_limit(view.path, view.station, params.curve_decel, view.rewards).max(T::lit(0.1));
    let mut idm = params.idm;
    idm.desired_speed = v0;
    let leader = leader_on_path(view.path, view.station, view.others, view.rewards.vehicle_length);
    let (gap, v_lead) = leader.unwrap_or((T::infinity(), view.v));
    let mut a = idm_acceleration(gap, view.v, v_lead, &idm).unwrap_or(-idm.physical_brake);
    let merge = merge_of(view.path, view.layout, view.rewards);
    let positions: Vec<_> = view.others.iter().map(|(p, _)| *p).collect();
    if let Some(cap) = give_way(
        view.station,
        view.v,
        &merge,
        &params.yield_rule,
        &params.idm,
        &positions,
        view.layout,
        memory,
    ) {
        a = a.min(cap);
    }
    a
}
