//! Closed-loop episodes on a single-lane roundabout.
//!
//! Every vehicle is pinned to its designated path and only its speed is
//! integrated. Background vehicles use IDM plus a give-way rule at the ring
//! entry; the ego is driven by the tree-search planner or by the yield
//! baseline. The world advances in fixed steps and the planner replans every
//! decision period.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driver::{give_way, leader_on_path, merge_of, Merge};
pub use crate::driver::{yield_baseline_policy, BaselineParams, BaselineView, YieldMemory, YieldRule};
use crate::dynamics::{idm_acceleration, step_constant, step_policy, DrivingPolicy, EgoState, IdmParams, OtherVehicleState, PolicyKind};
use crate::geometry::{GeometryError, PathSpec, Point2, RoundaboutLayout};
use crate::planner::{decision_cycle, observe_only, Agent, DecisionState, Environment, PlannerConfig, RolloutPolicy};
use crate::policy_prediction::{PolicySet, PredictionConfig};
use crate::pomdp::{ActionCommand, FactoredBelief, ObjectBelief, ObjectId, ObjectObservation, Observation, OtherTransition, PolicyObservationModel};
use crate::rewards::{boundary_radius, total_reward_at, RewardBreakdown, RewardConfig, TargetLatch};
use crate::scalar::Real;

pub const SCENARIO_SCHEMA: &str = "roundabout-scenario/1";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Planner(#[from] crate::planner::PlannerError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    /// Tree search with predicted-policy transitions for other vehicles.
    Policy,
    /// Tree search with constant-heading transitions for other vehicles.
    Plain,
    /// Rule-based give-way driver.
    Baseline,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [PlannerKind::Policy, PlannerKind::Plain, PlannerKind::Baseline];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Policy => "policy",
            PlannerKind::Plain => "plain",
            PlannerKind::Baseline => "baseline",
        }
    }
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown planner '{s}'; valid kinds are {{policy, plain, baseline}}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoSpec<T> {
    pub entry_arm: usize,
    pub exit_arm: usize,
    pub initial_speed: T,
    pub departure_time: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct VehicleSpec<T> {
    pub id: u32,
    pub entry_arm: usize,
    pub exit_arm: usize,
    pub departure_time: T,
    pub initial_speed: T,
    pub idm: IdmParams<T>,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct ScenarioConfig<T> {
    pub schema: String,
    pub name: String,
    pub layout: RoundaboutLayout<T>,
    pub ego: EgoSpec<T>,
    pub vehicles: Vec<VehicleSpec<T>>,
    pub rewards: RewardConfig<T>,
    pub planner: PlannerConfig,
    pub prediction: PredictionConfig<T>,
    pub observation_model: PolicyObservationModel<T>,
    pub background_yield: YieldRule<T>,
    pub baseline: BaselineParams<T>,
    pub seed: u64,
    /// Longest time the ego may take after departing (s).
    pub max_duration: T,
    pub dt: T,
    pub decision_period: T,
    /// Background departures are shifted by a seeded uniform offset in `[-j, j]`.
    pub departure_jitter: T,
    /// Commanded deceleration at or beyond this magnitude counts as an emergency brake.
    pub emergency_brake_threshold: T,
}

fn default_idm<T: Real>(v0: f64) -> IdmParams<T> {
    IdmParams::with_desired_speed(T::lit(v0))
}

impl<T: Real> ScenarioConfig<T> {
    fn base(name: &str) -> Self {
        Self {
            schema: SCENARIO_SCHEMA.into(),
            name: name.into(),
            layout: RoundaboutLayout::four_way(),
            ego: EgoSpec {
                entry_arm: 3,
                exit_arm: 1,
                initial_speed: T::lit(8.0),
                departure_time: T::zero(),
            },
            vehicles: Vec::new(),
            rewards: RewardConfig::default(),
            planner: PlannerConfig {
                rollout: RolloutPolicy::Guided,
                ..PlannerConfig::default()
            },
            prediction: PredictionConfig::default(),
            observation_model: PolicyObservationModel::default(),
            background_yield: YieldRule::background(),
            baseline: BaselineParams {
                idm: default_idm(10.0),
                yield_rule: YieldRule::baseline(),
                curve_decel: T::lit(2.0),
            },
            seed: 0,
            max_duration: T::lit(60.0),
            dt: T::lit(0.1),
            decision_period: T::one(),
            departure_jitter: T::zero(),
            emergency_brake_threshold: T::lit(3.0),
        }
    }

    /// Ego alone, south to north.
    pub fn ego_only() -> Self {
        Self::base("ego_only")
    }

    /// Ego from the south arm; one vehicle from the north circulates past the ego's entry.
    pub fn two_vehicle() -> Self {
        let mut c = Self::base("two_vehicle");
        c.ego.departure_time = T::lit(9.0);
        c.vehicles.push(VehicleSpec {
            id: 1,
            entry_arm: 1,
            exit_arm: 0,
            departure_time: T::zero(),
            initial_speed: T::lit(6.0),
            idm: default_idm(6.0),
        });
        c
    }

    /// Eight vehicles in total, staggered departures across all arms.
    pub fn multi_vehicle() -> Self {
        let mut c = Self::base("multi_vehicle");
        c.ego.departure_time = T::lit(4.5);
        let routes = [(2, 0), (0, 2), (1, 3), (2, 1), (0, 1), (1, 2), (2, 0)];
        for (i, (entry, exit)) in routes.into_iter().enumerate() {
            c.vehicles.push(VehicleSpec {
                id: i as u32 + 1,
                entry_arm: entry,
                exit_arm: exit,
                departure_time: T::lit(1.5 * i as f64),
                initial_speed: T::lit(6.0),
                idm: default_idm(6.0),
            });
        }
        c.departure_jitter = T::lit(0.5);
        c
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "ego_only" => Some(Self::ego_only()),
            "two_vehicle" => Some(Self::two_vehicle()),
            "multi_vehicle" => Some(Self::multi_vehicle()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if self.schema != SCENARIO_SCHEMA {
            return bad(format!("schema tag '{}' is not '{SCENARIO_SCHEMA}'", self.schema));
        }
        self.layout.validate()?;
        self.layout.build_path(self.ego.entry_arm, self.ego.exit_arm)?;
        self.rewards.validate().map_err(SimError::InvalidScenario)?;
        self.planner.validate()?;
        self.prediction
            .validate()
            .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        if !(self.ego.departure_time >= T::zero()) || !(self.ego.initial_speed >= T::zero()) {
            return bad("ego departure time and speed must be >= 0".into());
        }
        let mut ids = BTreeMap::new();
        for v in &self.vehicles {
            if v.id == 0 || ids.insert(v.id, ()).is_some() {
                return bad(format!("vehicle id {} is reserved or duplicated", v.id));
            }
            if !(v.departure_time >= T::zero()) || !(v.initial_speed >= T::zero()) {
                return bad(format!("vehicle {} departure time and speed must be >= 0", v.id));
            }
            v.idm.validate().map_err(SimError::InvalidScenario)?;
            self.layout.build_path(v.entry_arm, v.exit_arm)?;
        }
        self.baseline.idm.validate().map_err(SimError::InvalidScenario)?;
        if !(self.max_duration > T::zero()) || !(self.dt > T::zero()) {
            return bad("max duration and dt must be > 0".into());
        }
        let ratio = self.decision_period / self.dt;
        if !(ratio >= T::one()) || (ratio - ratio.round()).abs() > T::lit(1e-6) {
            return bad("decision period must be a whole multiple of dt".into());
        }
        if !(self.departure_jitter >= T::zero()) || !(self.emergency_brake_threshold > T::zero()) {
            return bad("jitter must be >= 0 and brake threshold > 0".into());
        }
        if !(self.baseline.curve_decel > T::zero()) {
            return bad("baseline curve deceleration must be > 0".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SimError>
    where
        T: serde::de::DeserializeOwned,
    {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Pairs of vehicles whose centres are within the summed boundary radii (inclusive).
pub fn detect_collision<T: Real>(positions: &[(u32, Point2<T>)], dims: (T, T)) -> Vec<(u32, u32)> {
    let reach = T::two() * boundary_radius(dims.0, dims.1);
    let mut out = Vec::new();
    for (i, (a, pa)) in positions.iter().enumerate() {
        for (b, pb) in &positions[i + 1..] {
            if pa.distance(*pb) <= reach {
                out.push((*a, *b));
            }
        }
    }
    out
}

/// Counts emergency-brake events online; consecutive triggering steps of one vehicle merge.
#[derive(Debug, Clone, Default)]
pub struct BrakeCounter {
    active: BTreeMap<u32, bool>,
    pub events: u32,
}

impl BrakeCounter {
    /// Feeds the commanded accelerations of one step.
    pub fn observe<T: Real>(&mut self, step: &[(u32, T)], threshold: T) {
        let mut next = BTreeMap::new();
        for &(id, a) in step {
            let hard = a <= -threshold;
            if hard && !self.active.get(&id).copied().unwrap_or(false) {
                self.events += 1;
            }
            next.insert(id, hard);
        }
        self.active = next;
    }
}

/// Emergency-brake events in a trace of per-step commanded accelerations.
pub fn detect_emergency_brake<T: Real>(trace: &[Vec<(u32, T)>], b_max: T) -> u32 {
    let mut c = BrakeCounter::default();
    for step in trace {
        c.observe(step, b_max);
    }
    c.events
}


#[derive(Debug, Clone)]
struct Background<T> {
    spec: VehicleSpec<T>,
    path: PathSpec<T>,
    merge: Merge<T>,
    departure: T,
    station: T,
    v: T,
    accel: T,
    active: bool,
    finished: bool,
    memory: YieldMemory,
}

impl<T: Real> Background<T> {
    fn pose(&self) -> (Point2<T>, T) {
        self.path.pose_at(self.station)
    }

    fn state(&self) -> OtherVehicleState<T> {
        let (p, heading) = self.pose();
        OtherVehicleState::new(p.x, p.y, heading, self.v)
    }
}

#[derive(Debug, Clone)]
struct EgoBody<T> {
    path: PathSpec<T>,
    station: T,
    v: T,
    accel: T,
    active: bool,
    latch: TargetLatch,
    memory: YieldMemory,
}

impl<T: Real> EgoBody<T> {
    fn state(&self) -> EgoState<T> {
        let (p, heading) = self.path.pose_at(self.station);
        let w = self.v * self.path.curvature_clamped(self.station);
        EgoState::new(p.x, p.y, heading, self.v, w)
    }
}

/// One row of the trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub vehicle_id: u32,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub a_applied: f64,
    pub w: f64,
    pub r_collision: Option<f64>,
    pub r_gap: Option<f64>,
    pub r_velocity: Option<f64>,
    pub r_target: Option<f64>,
    pub r_comfort: Option<f64>,
    pub r_total: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Target,
    Collision,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub scenario: String,
    pub planner: PlannerKind,
    pub seed: u64,
    /// Undiscounted sum of the ego's per-step rewards.
    pub total_reward: f64,
    pub travel_time: f64,
    pub collision_events: u32,
    pub emergency_brake_events: u32,
    pub reached_target: bool,
    /// Steps with another vehicle inside the reward's safety distance.
    pub safety_violations: u32,
    pub end_reason: EndReason,
    pub steps: u64,
    pub decisions: u32,
    /// Largest change of applied acceleration between decisions.
    pub max_accel_change: f64,
    /// Wall-clock seconds spent in search; not deterministic.
    pub search_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub metrics: EpisodeMetrics,
    pub log: Vec<LogRow>,
}

/// The simulated world; also the environment the planner acts in.
pub struct World<T> {
    cfg: ScenarioConfig<T>,
    ego: EgoBody<T>,
    vehicles: Vec<Background<T>>,
    step_index: u64,
    ego_steps: u64,
    brakes: BrakeCounter,
    log: Vec<LogRow>,
    total_reward: f64,
    safety_violations: u32,
    collisions: u32,
    end: Option<EndReason>,
    baseline_driven: bool,
}

fn to_row<T: Real>(t: T, id: u32, x: T, y: T, theta: T, v: T, a: T, w: T, r: Option<&RewardBreakdown<T>>) -> LogRow {
    LogRow {
        t: t.as_f64(),
        vehicle_id: id,
        x: x.as_f64(),
        y: y.as_f64(),
        theta: theta.as_f64(),
        v: v.as_f64(),
        a_applied: a.as_f64(),
        w: w.as_f64(),
        r_collision: r.map(|r| r.collision.as_f64()),
        r_gap: r.map(|r| r.gap.as_f64()),
        r_velocity: r.map(|r| r.velocity.as_f64()),
        r_target: r.map(|r| r.target.as_f64()),
        r_comfort: r.map(|r| r.comfort.as_f64()),
        r_total: r.map(|r| r.total.as_f64()),
    }
}

impl<T: Real> World<T> {
    pub fn new(cfg: &ScenarioConfig<T>, baseline_driven: bool) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let ego_path = cfg.layout.build_path(cfg.ego.entry_arm, cfg.ego.exit_arm)?;
        let vehicles = cfg
            .vehicles
            .iter()
            .map(|spec| {
                let path = cfg.layout.build_path(spec.entry_arm, spec.exit_arm)?;
                let j = cfg.departure_jitter.as_f64();
                let offset = if j > 0.0 { rng.gen_range(-j..=j) } else { 0.0 };
                Ok(Background {
                    merge: merge_of(&path, &cfg.layout, &cfg.rewards),
                    path,
                    departure: (spec.departure_time + T::lit(offset)).max(T::zero()),
                    station: T::zero(),
                    v: spec.initial_speed,
                    accel: T::zero(),
                    active: false,
                    finished: false,
                    memory: YieldMemory::default(),
                    spec: spec.clone(),
                })
            })
            .collect::<Result<Vec<_>, SimError>>()?;
        Ok(Self {
            ego: EgoBody {
                path: ego_path,
                station: T::zero(),
                v: cfg.ego.initial_speed,
                accel: T::zero(),
                active: false,
                latch: TargetLatch::default(),
                memory: YieldMemory::default(),
            },
            cfg: cfg.clone(),
            vehicles,
            step_index: 0,
            ego_steps: 0,
            brakes: BrakeCounter::default(),
            log: Vec::new(),
            total_reward: 0.0,
            safety_violations: 0,
            collisions: 0,
            end: None,
            baseline_driven,
        })
    }

    pub fn time(&self) -> T {
        T::lit(self.step_index as f64) * self.cfg.dt
    }

    pub fn done(&self) -> bool {
        self.end.is_some()
    }

    pub fn ego_active(&self) -> bool {
        self.ego.active
    }

    pub fn ego_path(&self) -> &PathSpec<T> {
        &self.ego.path
    }

    fn others_of_ego(&self) -> Vec<(Point2<T>, T)> {
        self.vehicles
            .iter()
            .filter(|b| b.active)
            .map(|b| (b.pose().0, b.v))
            .collect()
    }

    /// Current observation without policy labels.
    pub fn observe(&self) -> Observation<T> {
        Observation {
            ego: self.ego.state(),
            ego_station: self.ego.station,
            others: self
                .vehicles
                .iter()
                .filter(|b| b.active)
                .map(|b| ObjectObservation {
                    id: ObjectId(b.spec.id),
                    state: b.state(),
                    policy: None,
                })
                .collect(),
        }
    }

    fn spawn(&mut self) {
        let now = self.time();
        let eps = T::lit(1e-9);
        if !self.ego.active && self.ego_departure() <= now + eps {
            self.ego.active = true;
        }
        let clearance = T::lit(12.0);
        for i in 0..self.vehicles.len() {
            let b = &self.vehicles[i];
            if b.active || b.finished || b.departure > now + eps {
                continue;
            }
            let start = b.path.point_at(T::zero());
            let mut occupied = self
                .vehicles
                .iter()
                .filter(|o| o.active)
                .any(|o| o.pose().0.distance(start) < clearance);
            if self.ego.active && self.ego.path.pose_at(self.ego.station).0.distance(start) < clearance {
                occupied = true;
            }
            if !occupied {
                self.vehicles[i].active = true;
            }
        }
    }

    fn ego_departure(&self) -> T {
        self.cfg.ego.departure_time
    }

    fn background_accels(&mut self) -> Vec<(u32, T)> {
        let ego_pos = self.ego.active.then(|| (self.ego.path.pose_at(self.ego.station).0, self.ego.v));
        let poses: Vec<Option<(Point2<T>, T)>> = self
            .vehicles
            .iter()
            .map(|b| b.active.then(|| (b.pose().0, b.v)))
            .collect();
        let mut out = Vec::new();
        for i in 0..self.vehicles.len() {
            if !self.vehicles[i].active {
                continue;
            }
            let mut candidates: Vec<(Point2<T>, T)> = poses
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .filter_map(|(_, p)| *p)
                .collect();
            candidates.extend(ego_pos);
            let b = &self.vehicles[i];
            let leader = leader_on_path(&b.path, b.station, &candidates, self.cfg.rewards.vehicle_length);
            let (gap, v_lead) = leader.unwrap_or((T::infinity(), b.v));
            let mut a = idm_acceleration(gap, b.v, v_lead, &b.spec.idm).unwrap_or(-b.spec.idm.physical_brake);
            let positions: Vec<_> = candidates.iter().map(|(p, _)| *p).collect();
            let (station, v, merge, idm) = (b.station, b.v, b.merge, b.spec.idm);
            let mut memory = b.memory;
            if let Some(cap) = give_way(
                station,
                v,
                &merge,
                &self.cfg.background_yield,
                &idm,
                &positions,
                &self.cfg.layout,
                &mut memory,
            ) {
                a = a.min(cap);
            }
            let b = &mut self.vehicles[i];
            b.memory = memory;
            b.accel = a;
            out.push((b.spec.id, a));
        }
        out
    }

    /// Advances one fixed step. `ego_accel` is ignored when the baseline drives.
    pub fn step(&mut self, ego_accel: T) {
        if self.done() {
            return;
        }
        self.spawn();
        let commanded = self.background_accels();
        self.brakes.observe(&commanded, self.cfg.emergency_brake_threshold);
        if self.ego.active {
            self.ego.accel = if self.baseline_driven {
                let others = self.others_of_ego();
                let view = BaselineView {
                    station: self.ego.station,
                    v: self.ego.v,
                    path: &self.ego.path,
                    layout: &self.cfg.layout,
                    others: &others,
                    rewards: &self.cfg.rewards,
                };
                let mut memory = self.ego.memory;
                let a = yield_baseline_policy(&view, &self.cfg.baseline, &mut memory);
                self.ego.memory = memory;
                a
            } else {
                ego_accel
            };
        }
        let dt = self.cfg.dt;
        for b in self.vehicles.iter_mut().filter(|b| b.active) {
            b.station += b.v * dt;
            b.v = (b.v + b.accel * dt).max(T::zero());
            if b.station >= b.path.total_length() {
                b.active = false;
                b.finished = true;
            }
        }
        if self.ego.active {
            self.ego.station = (self.ego.station + self.ego.v * dt).min(self.ego.path.total_length());
            self.ego.v = (self.ego.v + self.ego.accel * dt).max(T::zero());
            self.ego_steps += 1;
        }
        self.step_index += 1;
        self.record();
    }

    fn record(&mut self) {
        let t = self.time();
        let mut positions = Vec::new();
        if self.ego.active {
            let ego = self.ego.state();
            let others: Vec<_> = self.vehicles.iter().filter(|b| b.active).map(|b| b.state()).collect();
            let raw = total_reward_at(&ego, self.ego.station, &others, self.ego.accel, &self.ego.path, &self.cfg.rewards);
            let target = self.ego.latch.filter(raw.target);
            let r = if target == raw.target { raw } else { raw.without_target(&self.cfg.rewards) };
            if r.collision < T::zero() {
                self.safety_violations += 1;
            }
            self.total_reward += r.total.as_f64();
            self.log.push(to_row(t, 0, ego.x, ego.y, ego.theta, ego.v, self.ego.accel, ego.w, Some(&r)));
            positions.push((0, ego.position()));
            if target > T::zero() {
                self.end = Some(EndReason::Target);
            }
        }
        for b in self.vehicles.iter().filter(|b| b.active) {
            let (p, heading) = b.pose();
            let w = b.v * b.path.curvature_clamped(b.station);
            self.log.push(to_row(t, b.spec.id, p.x, p.y, heading, b.v, b.accel, w, None));
            positions.push((b.spec.id, p));
        }
        if !detect_collision(&positions, self.cfg.rewards.dims()).is_empty() {
            self.collisions += 1;
            self.end = Some(EndReason::Collision);
        }
        if self.end.is_none()
            && self.ego.active
            && T::lit(self.ego_steps as f64) * self.cfg.dt >= self.cfg.max_duration - T::lit(1e-9)
        {
            self.end = Some(EndReason::Timeout);
        }
    }

    /// Steps the background traffic until the ego departs. Returns what the
    /// ego sees at each decision instant of the last `watch` periods before
    /// departure, oldest first.
    pub fn run_until_departure(&mut self) -> Vec<Observation<T>> {
        let eps = T::lit(1e-6);
        let period = self.cfg.decision_period;
        let horizon = period * T::lit(self.cfg.prediction.window as f64);
        let mut watched = Vec::new();
        while !self.ego.active && !self.done() {
            self.step(T::zero());
            let lead = self.ego_departure() - self.time();
            if lead <= eps {
                self.spawn();
            } else if lead <= horizon + eps {
                let k = (lead / period).round();
                if (lead - k * period).abs() <= eps {
                    watched.push(self.observe());
                }
            }
        }
        watched
    }

    fn finish(self, kind: PlannerKind, decisions: u32, max_accel_change: f64, search_seconds: f64) -> EpisodeResult {
        let end = self.end.unwrap_or(EndReason::Timeout);
        let reached = end == EndReason::Target;
        let dt = self.cfg.dt.as_f64();
        EpisodeResult {
            metrics: EpisodeMetrics {
                scenario: self.cfg.name.clone(),
                planner: kind,
                seed: self.cfg.seed,
                total_reward: self.total_reward,
                travel_time: if reached {
                    self.ego_steps as f64 * dt
                } else {
                    self.cfg.max_duration.as_f64()
                },
                collision_events: self.collisions,
                emergency_brake_events: self.brakes.events,
                reached_target: reached,
                safety_violations: self.safety_violations,
                end_reason: end,
                steps: self.step_index,
                decisions,
                max_accel_change,
                search_seconds,
            },
            log: self.log,
        }
    }
}

struct PlannerEnv<'w, T> {
    world: &'w mut World<T>,
    steps_per_decision: usize,
}

impl<'w, T: Real> Environment<T> for PlannerEnv<'w, T> {
    fn apply(&mut self, action: &ActionCommand<T>) -> Observation<T> {
        for _ in 0..self.steps_per_decision {
            if self.world.done() {
                break;
            }
            self.world.step(action.accel);
        }
        self.world.observe()
    }
}

fn decision_seed(seed: u64, k: u32) -> u64 {
    let mut z = seed ^ (u64::from(k).wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Initial belief: the ego exactly, every visible vehicle with a uniform policy prior.
pub fn initial_belief<T: Real>(o: &Observation<T>, policies: &PolicySet<T>) -> FactoredBelief<T> {
    let third = T::one() / T::lit(3.0);
    FactoredBelief {
        ego: o.ego,
        ego_station: o.ego_station,
        policies: policies.clone(),
        objects: o
            .others
            .iter()
            .map(|x| ObjectBelief {
                id: x.id,
                state: x.state,
                policy_probs: [third; 3],
            })
            .collect(),
    }
}

/// Runs one closed-loop episode with the scenario's seed.
pub fn run_episode<T: Real>(cfg: &ScenarioConfig<T>, kind: PlannerKind) -> Result<EpisodeResult, SimError> {
    let mut world = World::new(cfg, kind == PlannerKind::Baseline)?;
    let watched = world.run_until_departure();
    if kind == PlannerKind::Baseline {
        while !world.done() {
            world.step(T::zero());
        }
        return Ok(world.finish(kind, 0, 0.0, 0.0));
    }
    let agent = Agent {
        layout: cfg.layout.clone(),
        path: world.ego_path().clone(),
        rewards: cfg.rewards,
        planner: cfg.planner.clone(),
        prediction: cfg.prediction.clone(),
        observation_model: cfg.observation_model,
        transition: match kind {
            PlannerKind::Policy => OtherTransition::PolicyBased,
            _ => OtherTransition::ConstantVelocity,
        },
        predict: kind == PlannerKind::Policy,
        rollout_driver: Some(cfg.baseline.clone()),
    };
    let policies = PolicySet::from_layout(&cfg.layout);
    let departure = world.observe();
    let mut state = DecisionState::new(initial_belief(&departure, &policies));
    for o in watched.into_iter().chain(std::iter::once(departure)) {
        state = observe_only(&agent, state, o)?;
    }
    let steps_per_decision = (cfg.decision_period / cfg.dt).round().to_usize().unwrap_or(1).max(1);
    let mut decisions = 0u32;
    let mut max_change = 0.0f64;
    let mut search_seconds = 0.0;
    while !world.done() {
        let a_prev = state.a_prev;
        let started = Instant::now();
        let mut env = PlannerEnv {
            world: &mut world,
            steps_per_decision,
        };
        let (next, outcome) = decision_cycle(&agent, state, &mut env, decision_seed(cfg.seed, decisions))?;
        search_seconds += started.elapsed().as_secs_f64();
        if decisions > 0 {
            max_change = max_change.max((outcome.applied.accel - a_prev).abs().as_f64());
        }
        state = next;
        decisions += 1;
    }
    Ok(world.finish(kind, decisions, max_change, search_seconds))
}

/// One state of a forward-simulated trajectory with its distance to the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForwardSample<T> {
    pub step: usize,
    pub state: OtherVehicleState<T>,
    pub policy: Option<PolicyKind>,
    pub lateral_error: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardSimulation<T> {
    pub truth: Vec<ForwardSample<T>>,
    pub constant: Vec<ForwardSample<T>>,
    pub policy: Vec<ForwardSample<T>>,
    /// Step index at which the ground truth first reaches the ring.
    pub ring_entry_step: usize,
}

impl<T: Real> ForwardSimulation<T> {
    pub fn max_error(samples: &[ForwardSample<T>]) -> T {
        samples.iter().map(|s| s.lateral_error).fold(T::zero(), T::max)
    }

    pub fn max_error_after(samples: &[ForwardSample<T>], step: usize) -> T {
        Self::max_error(&samples[step.min(samples.len())..])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardSimConfig<T> {
    pub entry_arm: usize,
    pub exit_arm: usize,
    pub speed: T,
    pub dt: T,
    pub steps: usize,
    /// Start this far before the end of the inbound straight (m).
    pub lead_in: T,
}

impl<T: Real> Default for ForwardSimConfig<T> {
    fn default() -> Self {
        Self {
            entry_arm: 3,
            exit_arm: 1,
            speed: T::lit(5.5),
            dt: T::lit(0.1),
            steps: 100,
            lead_in: T::lit(10.0),
        }
    }
}

/// Ground truth along the path, a constant-heading rollout and a rollout that
/// switches policy by the region it is driving through.
pub fn forward_simulation<T: Real>(
    layout: &RoundaboutLayout<T>,
    cfg: &ForwardSimConfig<T>,
) -> Result<ForwardSimulation<T>, SimError> {
    let path = layout.build_path(cfg.entry_arm, cfg.exit_arm)?;
    if !(cfg.speed > T::zero()) || !(cfg.dt > T::zero()) || cfg.steps == 0 {
        return Err(SimError::InvalidScenario("speed, dt and steps must be positive".into()));
    }
    let s0 = (path.segment_start(1) - cfg.lead_in).max(T::zero());
    let ds = cfg.speed * cfg.dt;
    if s0 + ds * T::lit(cfg.steps as f64) > path.total_length() {
        return Err(SimError::InvalidScenario("forward simulation runs past the end of the path".into()));
    }
    let truth_at = |k: usize| {
        let s = s0 + ds * T::lit(k as f64);
        let (p, heading) = path.pose_at(s);
        OtherVehicleState::new(p.x, p.y, heading, cfg.speed)
    };
    let err = |st: &OtherVehicleState<T>| path.project(st.position()).distance;
    let ring_start = path.segment_start(2);
    let mut truth = Vec::with_capacity(cfg.steps + 1);
    let mut constant = Vec::with_capacity(cfg.steps + 1);
    let mut policy = Vec::with_capacity(cfg.steps + 1);
    let start = truth_at(0);
    let mut c = start;
    let mut p = start;
    let mut ring_entry_step = cfg.steps;
    for k in 0..=cfg.steps {
        let t = truth_at(k);
        if ring_entry_step == cfg.steps && s0 + ds * T::lit(k as f64) >= ring_start {
            ring_entry_step = k;
        }
        let mid = s0 + ds * (T::lit(k as f64) + T::half());
        let kind = PolicyKind::for_segment(path.kind_at(mid));
        truth.push(ForwardSample {
            step: k,
            lateral_error: err(&t),
            state: t,
            policy: None,
        });
        constant.push(ForwardSample {
            step: k,
            lateral_error: err(&c),
            state: c,
            policy: None,
        });
        policy.push(ForwardSample {
            step: k,
            lateral_error: err(&p),
            state: p,
            policy: Some(kind),
        });
        if k < cfg.steps {
            c = step_constant(&c, cfg.dt).expect("finite state");
            p = step_policy(&p, &DrivingPolicy::for_layout(kind, layout), cfg.dt).expect("finite state");
        }
    }
    Ok(ForwardSimulation {
        truth,
        constant,
        policy,
        ring_entry_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collision_radius_is_inclusive() {
        let dims = RewardConfig::<f64>::default().dims();
        let reach = 2.0 * boundary_radius(dims.0, dims.1);
        assert!((reach - 6.161).abs() < 1e-3);
        let at = |d: f64| vec![(0, Point2::new(0.0, 0.0)), (1, Point2::new(d, 0.0))];
        assert_eq!(detect_collision(&at(reach), dims), vec![(0, 1)]);
        assert!(detect_collision(&at(7.0), dims).is_empty());
        assert!(detect_collision(&at(50.0), dims).is_empty());
    }

    #[test]
    fn brake_events_merge() {
        let mild: Vec<Vec<(u32, f64)>> = (0..5).map(|_| vec![(1, -2.9)]).collect();
        assert_eq!(detect_emergency_brake(&mild, 3.0), 0);
        let hard: Vec<Vec<(u32, f64)>> = (0..5).map(|_| vec![(1, -3.5)]).collect();
        assert_eq!(detect_emergency_brake(&hard, 3.0), 1);
        let two = vec![vec![(1, -3.5), (2, 0.0)], vec![(1, 0.0), (2, -4.0)]];
        assert_eq!(detect_emergency_brake(&two, 3.0), 2);
        let again = vec![vec![(1, -3.5)], vec![(1, 0.0)], vec![(1, -3.5)]];
        assert_eq!(detect_emergency_brake(&again, 3.0), 2);
    }

    #[test]
    fn planner_kind_parsing() {
        assert_eq!("plain".parse::<PlannerKind>().unwrap(), PlannerKind::Plain);
        let err = "fast".parse::<PlannerKind>().unwrap_err();
        assert!(err.contains("{policy, plain, baseline}"));
    }

    #[test]
    fn presets_validate() {
        for name in ["ego_only", "two_vehicle", "multi_vehicle"] {
            ScenarioConfig::<f64>::preset(name).unwrap().validate().unwrap();
        }
        assert_eq!(ScenarioConfig::<f64>::multi_vehicle().vehicles.len() + 1, 8);
        let mut bad = ScenarioConfig::<f64>::two_vehicle();
        bad.schema = "other".into();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ego_alone_baseline_reaches_target() {
        let r = run_episode(&ScenarioConfig::<f64>::ego_only(), PlannerKind::Baseline).unwrap();
        assert!(r.metrics.reached_target);
        assert_eq!(r.metrics.collision_events, 0);
        assert_eq!(r.metrics.emergency_brake_events, 0);
        let sum: f64 = r.log.iter().filter_map(|x| x.r_total).sum();
        assert!((sum - r.metrics.total_reward).abs() < 1e-9);
    }

    #[test]
    fn forward_sim_shapes() {
        let fs = forward_simulation(&RoundaboutLayout::<f64>::four_way(), &ForwardSimConfig::default()).unwrap();
        assert_eq!(fs.truth.len(), 101);
        assert!(ForwardSimulation::max_error(&fs.truth) < 1e-9);
        assert!(ForwardSimulation::max_error(&fs.policy) < 0.5);
        assert!(ForwardSimulation::max_error_after(&fs.constant, fs.ring_entry_step) > 5.0);
    }
}
