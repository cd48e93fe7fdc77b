//! Five-component penalty function and the jerk re-selection rule.
//!
//! Every component except the target bonus is non-positive, so the weighted
//! total never exceeds `c4 * target_reward_value`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{EgoState, OtherVehicleState};
use crate::geometry::PathSpec;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig<T> {
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub c4: T,
    pub c5: T,
    pub collision_penalty_value: T,
    pub comfort_penalty_value: T,
    pub c_exceed: T,
    pub c_lower: T,
    pub c_gap: T,
    /// Comfort bound on total acceleration; also the braking rate behind the safety distance.
    pub a_max: T,
    pub a_y_max: T,
    pub b_max: T,
    pub v_limit: T,
    pub vehicle_length: T,
    pub vehicle_width: T,
    /// Largest change of commanded acceleration between decision steps.
    pub j_max: T,
    pub target_reward_value: T,
    pub target_radius: T,
    /// Only vehicles at most this far ahead along the path count as preceding.
    pub gap_lookahead: T,
    /// Largest distance from the ego path for a vehicle to count as on it.
    pub on_path_tolerance: T,
}

impl<T: Real> Default for RewardConfig<T> {
    fn default() -> Self {
        let l = T::lit;
        Self {
            c1: l(1.0),
            c2: l(1.0),
            c3: l(1.0),
            c4: l(1.0),
            c5: l(1.0),
            collision_penalty_value: l(-1000.0),
            comfort_penalty_value: l(-100.0),
            c_exceed: l(-100.0),
            c_lower: l(-10.0),
            c_gap: l(-10.0),
            a_max: l(4.0),
            a_y_max: l(2.0),
            b_max: l(3.0),
            v_limit: l(10.0),
            vehicle_length: l(5.0),
            vehicle_width: l(1.8),
            j_max: l(1.0),
            target_reward_value: l(1000.0),
            target_radius: l(2.0),
            gap_lookahead: l(100.0),
            on_path_tolerance: l(2.0),
        }
    }
}

impl<T: Real> RewardConfig<T> {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.c_exceed < self.c_lower && self.c_lower < T::zero()) {
            return Err(format!(
                "need c_exceed < c_lower < 0, got {} and {}",
                self.c_exceed, self.c_lower
            ));
        }
        if !(self.c_gap < T::zero()) {
            return Err(format!("c_gap must be negative, got {}", self.c_gap));
        }
        if !(self.a_max > self.a_y_max && self.a_y_max > T::zero()) {
            return Err(format!("need a_max > a_y_max > 0, got {} and {}", self.a_max, self.a_y_max));
        }
        if !(self.collision_penalty_value <= T::zero() && self.comfort_penalty_value <= T::zero()) {
            return Err("collision and comfort penalties must be <= 0".into());
        }
        let positive = [
            ("b_max", self.b_max),
            ("v_limit", self.v_limit),
            ("vehicle_length", self.vehicle_length),
            ("vehicle_width", self.vehicle_width),
            ("j_max", self.j_max),
            ("target_radius", self.target_radius),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.target_reward_value >= T::zero()) {
            return Err("target_reward_value must be >= 0".into());
        }
        let weights = [self.c1, self.c2, self.c3, self.c4, self.c5];
        if weights.iter().any(|w| !(*w >= T::zero())) {
            return Err("component weights must be >= 0".into());
        }
        Ok(())
    }

    pub fn dims(&self) -> (T, T) {
        (self.vehicle_length, self.vehicle_width)
    }

    /// Collision threshold for two vehicles of the configured size.
    pub fn safe_distance(&self) -> T {
        safe_distance(self.v_limit, self.a_max, self.dims(), self.dims())
    }
}

/// Radius of the circle bounding a vehicle, `sqrt(W^2 + (L/2)^2)`.
pub fn boundary_radius<T: Real>(length: T, width: T) -> T {
    (width * width + (length * T::half()).powi(2)).sqrt()
}

/// Braking distance at the speed limit plus both boundary radii.
pub fn safe_distance<T: Real>(v_lim: T, a_max: T, dims_ego: (T, T), dims_other: (T, T)) -> T {
    let threshold = v_lim * v_lim / (T::two() * a_max);
    threshold + boundary_radius(dims_ego.0, dims_ego.1) + boundary_radius(dims_other.0, dims_other.1)
}

pub fn center_distance<T: Real>(ego: &EgoState<T>, other: &OtherVehicleState<T>) -> T {
    ego.position().distance(other.position())
}

pub fn collision_penalty<T: Real>(ego: &EgoState<T>, nearest: &OtherVehicleState<T>, cfg: &RewardConfig<T>) -> T {
    if center_distance(ego, nearest) <= cfg.safe_distance() {
        cfg.collision_penalty_value
    } else {
        T::zero()
    }
}

pub fn desired_velocity<T: Real>(curvature: T, cfg: &RewardConfig<T>) -> T {
    let k = curvature.abs();
    if k == T::zero() {
        cfg.v_limit
    } else {
        (cfg.a_y_max / k).sqrt().min(cfg.v_limit)
    }
}

pub fn velocity_penalty<T: Real>(v_e: T, v_des: T, cfg: &RewardConfig<T>) -> T {
    let rel = (v_e - v_des).abs() / v_des;
    if v_e > v_des {
        cfg.c_exceed * rel
    } else if v_e < v_des {
        cfg.c_lower * rel
    } else {
        T::zero()
    }
}

pub fn lateral_acceleration<T: Real>(v: T, curvature: T) -> T {
    v * v * curvature.abs()
}

pub fn comfort_penalty<T: Real>(a_x: T, v: T, curvature: T, cfg: &RewardConfig<T>) -> T {
    let a_y = lateral_acceleration(v, curvature);
    if a_x.hypot(a_y) >= cfg.a_max {
        cfg.comfort_penalty_value
    } else {
        T::zero()
    }
}

/// Gap the ego would close while braking at `b_max` for three seconds.
pub fn desired_gap<T: Real>(v_e: T, cfg: &RewardConfig<T>) -> T {
    let v_3s = (v_e - T::lit(3.0) * cfg.b_max).max(T::zero());
    (v_e * v_e - v_3s * v_3s) / (T::two() * cfg.a_max)
}

pub fn gap_reward<T: Real>(ego: &EgoState<T>, preceding: &OtherVehicleState<T>, cfg: &RewardConfig<T>) -> T {
    cfg.c_gap * (center_distance(ego, preceding) - desired_gap(ego.v, cfg)).abs()
}

/// Index of the vehicle ahead on the ego path with the smallest positive
/// station difference, if one lies within the lookahead.
pub fn preceding_vehicle<T: Real>(
    ego_station: T,
    others: &[OtherVehicleState<T>],
    path: &PathSpec<T>,
    cfg: &RewardConfig<T>,
) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, other) in others.iter().enumerate() {
        let proj = path.project(other.position());
        if proj.distance > cfg.on_path_tolerance {
            continue;
        }
        let ahead = proj.station - ego_station;
        if ahead <= T::zero() || ahead > cfg.gap_lookahead {
            continue;
        }
        if best.map_or(true, |(_, d)| ahead < d) {
            best = Some((i, ahead));
        }
    }
    best.map(|(i, _)| i)
}

/// Raw target bonus; one-shot bookkeeping is done by [`TargetLatch`].
pub fn target_reward<T: Real>(ego: &EgoState<T>, path: &PathSpec<T>, cfg: &RewardConfig<T>) -> T {
    if ego.position().distance(path.target_point) <= cfg.target_radius {
        cfg.target_reward_value
    } else {
        T::zero()
    }
}

/// Lets the target bonus through once per episode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TargetLatch {
    awarded: bool,
}

impl TargetLatch {
    pub fn awarded(&self) -> bool {
        self.awarded
    }

    pub fn filter<T: Real>(&mut self, raw: T) -> T {
        if self.awarded || raw == T::zero() {
            return T::zero();
        }
        self.awarded = true;
        raw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown<T> {
    pub collision: T,
    pub gap: T,
    pub velocity: T,
    pub target: T,
    pub comfort: T,
    pub total: T,
}

impl<T: Real> RewardBreakdown<T> {
    pub fn weighted(collision: T, gap: T, velocity: T, target: T, comfort: T, cfg: &RewardConfig<T>) -> Self {
        let mut b = Self {
            collision,
            gap,
            velocity,
            target,
            comfort,
            total: T::zero(),
        };
        b.total = b.recompute_total(cfg);
        b
    }

    pub fn recompute_total(&self, cfg: &RewardConfig<T>) -> T {
        cfg.c1 * self.collision
            + cfg.c2 * self.gap
            + cfg.c3 * self.velocity
            + cfg.c4 * self.target
            + cfg.c5 * self.comfort
    }

    /// Drops the target component, e.g. after it was already awarded.
    pub fn without_target(&self, cfg: &RewardConfig<T>) -> Self {
        Self::weighted(self.collision, self.gap, self.velocity, T::zero(), self.comfort, cfg)
    }
}

/// All five components with the ego located by projection onto its path.
pub fn total_reward<T: Real>(
    ego: &EgoState<T>,
    others: &[OtherVehicleState<T>],
    a_x: T,
    path: &PathSpec<T>,
    cfg: &RewardConfig<T>,
) -> RewardBreakdown<T> {
    let station = path.project(ego.position()).station;
    total_reward_at(ego, station, others, a_x, path, cfg)
}

/// As [`total_reward`] with the ego's path station already known.
pub fn total_reward_at<T: Real>(
    ego: &EgoState<T>,
    ego_station: T,
    others: &[OtherVehicleState<T>],
    a_x: T,
    path: &PathSpec<T>,
    cfg: &RewardConfig<T>,
) -> RewardBreakdown<T> {
    let nearest = others
        .iter()
        .map(|o| center_distance(ego, o))
        .fold(T::infinity(), T::min);
    let collision = if nearest <= cfg.safe_distance() {
        cfg.collision_penalty_value
    } else {
        T::zero()
    };
    let gap = preceding_vehicle(ego_station, others, path, cfg)
        .map_or(T::zero(), |i| gap_reward(ego, &others[i], cfg));
    let curvature = path.curvature_clamped(ego_station);
    let velocity = velocity_penalty(ego.v, desired_velocity(curvature, cfg), cfg);
    let comfort = comfort_penalty(a_x, ego.v, curvature, cfg);
    let target = target_reward(ego, path, cfg);
    RewardBreakdown::weighted(collision, gap, velocity, target, comfort, cfg)
}

/// Highest speed at `station` from which every curve ahead can still be taken
/// at its desired velocity while braking at `decel`.
pub fn curve_speed_limit<T: Real>(path: &PathSpec<T>, station: T, decel: T, cfg: &RewardConfig<T>) -> T {
    let (current, _) = path.locate(station);
    let mut limit = desired_velocity(path.segments[current].curvature, cfg);
    for i in current + 1..path.segments.len() {
        let d = path.segment_start(i) - station;
        let vc = desired_velocity(path.segments[i].curvature, cfg);
        limit = limit.min((vc * vc + T::two() * decel * d).sqrt());
    }
    limit
}

/// Limits the change of acceleration between consecutive decisions to `j_max`.
pub fn clamp_jerk<T: Real>(a_t: T, a_prev: T, j_max: T) -> T {
    let delta = a_t - a_prev;
    if delta.abs() <= j_max {
        a_t
    } else if delta > T::zero() {
        a_prev + j_max
    } else {
        a_prev - j_max
    }
}
