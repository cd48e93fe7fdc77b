//! Discrete-time kinematic transitions and the IDM car-following law.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, RegionKind, RoundaboutLayout, SegmentKind};
use crate::scalar::{wrap_angle, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),
    #[error("time step must be > 0, got {0}")]
    BadTimeStep(f64),
    #[error("IDM gap must be > 0, got {0} (vehicles overlap)")]
    NonPositiveGap(f64),
    #[error("empty policy sequence")]
    EmptySequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EgoState<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
    pub v: T,
    pub w: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OtherVehicleState<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
    pub v: T,
}

impl<T: Real> EgoState<T> {
    pub fn new(x: T, y: T, theta: T, v: T, w: T) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            v: v.max(T::zero()),
            w,
        }
    }

    pub fn position(&self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }
}

impl<T: Real> OtherVehicleState<T> {
    pub fn new(x: T, y: T, theta: T, v: T) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            v: v.max(T::zero()),
        }
    }

    pub fn position(&self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    Straight,
    EnterExit,
    Circulate,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Straight, PolicyKind::EnterExit, PolicyKind::Circulate];

    pub fn index(self) -> usize {
        match self {
            PolicyKind::Straight => 0,
            PolicyKind::EnterExit => 1,
            PolicyKind::Circulate => 2,
        }
    }

    pub fn for_segment(kind: SegmentKind) -> Self {
        match kind {
            SegmentKind::Straight => PolicyKind::Straight,
            SegmentKind::EntryArc | SegmentKind::ExitArc => PolicyKind::EnterExit,
            SegmentKind::RingArc => PolicyKind::Circulate,
        }
    }

    pub fn for_region(region: RegionKind) -> Self {
        match region {
            RegionKind::Straight => PolicyKind::Straight,
            RegionKind::EnterExit => PolicyKind::EnterExit,
            RegionKind::Ring => PolicyKind::Circulate,
        }
    }
}

/// A driving policy and the signed curvature it steers by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivingPolicy<T> {
    pub kind: PolicyKind,
    pub curvature: T,
}

impl<T: Real> DrivingPolicy<T> {
    pub fn straight() -> Self {
        Self {
            kind: PolicyKind::Straight,
            curvature: T::zero(),
        }
    }

    /// Policy with the curvature implied by the layout.
    pub fn for_layout(kind: PolicyKind, layout: &RoundaboutLayout<T>) -> Self {
        let curvature = match kind {
            PolicyKind::Straight => T::zero(),
            PolicyKind::EnterExit => -layout.entry_exit_curvature,
            PolicyKind::Circulate => layout.ring_radius.recip(),
        };
        Self { kind, curvature }
    }

    pub fn is_consistent_with(&self, layout: &RoundaboutLayout<T>) -> bool {
        *self == Self::for_layout(self.kind, layout)
    }
}

/// Yaw rate generated by a policy at speed `v`.
#[inline]
pub fn yaw_rate_for<T: Real>(policy: &DrivingPolicy<T>, v: T) -> T {
    v * policy.curvature
}

fn check_dt<T: Real>(dt: T) -> Result<(), DynamicsError> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(DynamicsError::BadTimeStep(dt.as_f64()));
    }
    Ok(())
}

/// Forward-Euler ego kinematics. Speed saturates at zero; the yaw rate is stored.
pub fn step_ego<T: Real>(s: &EgoState<T>, accel: T, yaw_rate: T, dt: T) -> Result<EgoState<T>, DynamicsError> {
    check_dt(dt)?;
    let inputs = [s.x, s.y, s.theta, s.v, s.w, accel, yaw_rate];
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFinite("step_ego"));
    }
    Ok(ego_euler(s, accel, yaw_rate, dt))
}

#[inline]
pub(crate) fn ego_euler<T: Real>(s: &EgoState<T>, accel: T, yaw_rate: T, dt: T) -> EgoState<T> {
    let (sin, cos) = s.theta.sin_cos();
    EgoState {
        x: s.x + s.v * cos * dt,
        y: s.y + s.v * sin * dt,
        theta: wrap_angle(s.theta + yaw_rate * dt),
        v: (s.v + accel * dt).max(T::zero()),
        w: yaw_rate,
    }
}

/// Constant speed, constant heading.
pub fn step_constant<T: Real>(s: &OtherVehicleState<T>, dt: T) -> Result<OtherVehicleState<T>, DynamicsError> {
    check_dt(dt)?;
    if [s.x, s.y, s.theta, s.v].iter().any(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFinite("step_constant"));
    }
    Ok(constant_euler(s, dt))
}

#[inline]
pub(crate) fn constant_euler<T: Real>(s: &OtherVehicleState<T>, dt: T) -> OtherVehicleState<T> {
    let (sin, cos) = s.theta.sin_cos();
    OtherVehicleState {
        x: s.x + s.v * cos * dt,
        y: s.y + s.v * sin * dt,
        theta: s.theta,
        v: s.v,
    }
}

#[inline]
pub(crate) fn policy_euler<T: Real>(s: &OtherVehicleState<T>, policy: &DrivingPolicy<T>, dt: T) -> OtherVehicleState<T> {
    let mut next = constant_euler(s, dt);
    if policy.curvature != T::zero() {
        next.theta = wrap_angle(s.theta + yaw_rate_for(policy, s.v) * dt);
    }
    next
}

/// Constant speed with the heading turned by the policy's yaw rate.
pub fn step_policy<T: Real>(
    s: &OtherVehicleState<T>,
    policy: &DrivingPolicy<T>,
    dt: T,
) -> Result<OtherVehicleState<T>, DynamicsError> {
    step_constant(s, dt)?;
    if !policy.curvature.is_finite() {
        return Err(DynamicsError::NonFinite("step_policy"));
    }
    Ok(policy_euler(s, policy, dt))
}

/// Rolls `initial` forward under one policy per step. Returns `policies.len() + 1` states.
pub fn simulate_path_follow<T: Real>(
    initial: &OtherVehicleState<T>,
    policies: &[DrivingPolicy<T>],
    dt: T,
) -> Result<Vec<OtherVehicleState<T>>, DynamicsError> {
    if policies.is_empty() {
        return Err(DynamicsError::EmptySequence);
    }
    let mut out = Vec::with_capacity(policies.len() + 1);
    out.push(*initial);
    let mut state = *initial;
    for policy in policies {
        state = step_policy(&state, policy, dt)?;
        out.push(state);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct IdmParams<T> {
    pub desired_speed: T,
    pub min_gap: T,
    pub time_headway: T,
    pub max_accel: T,
    pub comfortable_decel: T,
    pub exponent: T,
    /// Hardest deceleration the vehicle can physically command.
    #[serde(default = "default_physical_brake")]
    pub physical_brake: T,
}

fn default_physical_brake<T: Real>() -> T {
    T::lit(9.0)
}

impl<T: Real> IdmParams<T> {
    pub fn with_desired_speed(desired_speed: T) -> Self {
        Self {
            desired_speed,
            min_gap: T::lit(2.0),
            time_headway: T::lit(1.5),
            max_accel: T::lit(2.5),
            comfortable_decel: T::lit(3.0),
            exponent: T::lit(4.0),
            physical_brake: default_physical_brake(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("desired_speed", self.desired_speed),
            ("min_gap", self.min_gap),
            ("time_headway", self.time_headway),
            ("max_accel", self.max_accel),
            ("comfortable_decel", self.comfortable_decel),
            ("physical_brake", self.physical_brake),
        ];
        for (name, value) in positive {
            if !(value > T::zero()) || !value.is_finite() {
                return Err(format!("IDM {name} must be positive, got {value}"));
            }
        }
        if !(self.exponent >= T::one()) {
            return Err(format!("IDM exponent must be >= 1, got {}", self.exponent));
        }
        Ok(())
    }

    /// Bumper gap at which a follower matching its leader's speed `v` is in equilibrium.
    pub fn equilibrium_gap(&self, v: T) -> T {
        let s_star = self.min_gap + v * self.time_headway;
        let free = T::one() - (v / self.desired_speed).powf(self.exponent);
        s_star / free.sqrt()
    }
}

/// IDM acceleration toward a leader `gap` metres ahead (bumper to bumper).
/// Pass an infinite gap for free road.
pub fn idm_acceleration<T: Real>(gap: T, v: T, v_leader: T, p: &IdmParams<T>) -> Result<T, DynamicsError> {
    if gap.is_nan() || !v.is_finite() || !v_leader.is_finite() {
        return Err(DynamicsError::NonFinite("idm_acceleration"));
    }
    if gap <= T::zero() {
        return Err(DynamicsError::NonPositiveGap(gap.as_f64()));
    }
    let dv = v - v_leader;
    let s_star = p.min_gap + v * p.time_headway + v * dv / (T::two() * (p.max_accel * p.comfortable_decel).sqrt());
    let interaction = if gap.is_infinite() {
        T::zero()
    } else {
        (s_star.max(T::zero()) / gap).powi(2)
    };
    let free = (v / p.desired_speed).powf(p.exponent);
    let a = p.max_accel * (T::one() - free - interaction);
    Ok(a.max(-p.physical_brake).min(p.max_accel))
}
