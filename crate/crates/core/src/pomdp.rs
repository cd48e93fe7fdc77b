//! Object-oriented POMDP model of the roundabout.
//!
//! Transitions and observations are deterministic, so the belief over each
//! vehicle is a point mass on its observed pose and speed times a categorical
//! distribution over its latent driving policy. The general per-object
//! discrete update is provided as well and is checked against the unfactored
//! joint update in the tests.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driver::BaselineParams;
use crate::dynamics::{constant_euler, policy_euler, DrivingPolicy, EgoState, OtherVehicleState, PolicyKind};
use crate::geometry::{PathSpec, Point2, RoundaboutLayout};
use crate::policy_prediction::PolicySet;
use crate::rewards::{boundary_radius, clamp_jerk, total_reward_at, RewardBreakdown, RewardConfig};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PomdpError {
    #[error("observation has zero likelihood under every state of object {0}")]
    ZeroLikelihood(usize),
    #[error("object {0} in the observation carries no policy label")]
    MissingPolicyLabel(ObjectId),
    #[error("state space size {states_per_object}^{objects} overflows")]
    Overflow { objects: u32, states_per_object: u64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Stable identifier of a non-ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectId(pub u32);

impl std::fmt::Display for ObjectId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Acceleration choices; the yaw rate always follows the ego path curvature.
pub const ACCELERATIONS: [f64; 7] = [-3.0, -2.0, -1.0, 0.0, 0.5, 1.5, 2.5];

/// Index of the zero-acceleration (coast) action in [`ACCELERATIONS`].
pub const COAST_ACTION: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum YawSource {
    PathCurvature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionCommand<T> {
    pub accel: T,
    pub yaw: YawSource,
}

impl<T: Real> ActionCommand<T> {
    pub fn new(accel: T) -> Self {
        Self {
            accel,
            yaw: YawSource::PathCurvature,
        }
    }

    pub fn from_index(index: usize) -> Self {
        Self::new(T::lit(ACCELERATIONS[index]))
    }

    pub fn coast() -> Self {
        Self::from_index(COAST_ACTION)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentedOtherState<T> {
    pub base: OtherVehicleState<T>,
    pub policy: DrivingPolicy<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState<T> {
    pub ego: EgoState<T>,
    /// Arc length travelled along the ego's designated path.
    pub ego_station: T,
    /// Set once the target bonus has been collected; the state is then terminal.
    pub target_reached: bool,
    /// Set when the ego touched another vehicle under an absorbing-crash model.
    pub crashed: bool,
    /// Acceleration applied in the previous decision step, for the jerk bound.
    pub a_prev: T,
    /// Sorted by id.
    pub others: Vec<(ObjectId, AugmentedOtherState<T>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectObservation<T> {
    pub id: ObjectId,
    pub state: OtherVehicleState<T>,
    /// Filled in by the augment step.
    pub policy: Option<DrivingPolicy<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation<T> {
    pub ego: EgoState<T>,
    pub ego_station: T,
    pub others: Vec<ObjectObservation<T>>,
}

impl<T: Real> Observation<T> {
    /// Deterministic observation of a joint state, policies included.
    pub fn of_state(s: &JointState<T>) -> Self {
        Self {
            ego: s.ego,
            ego_station: s.ego_station,
            others: s
                .others
                .iter()
                .map(|(id, o)| ObjectObservation {
                    id: *id,
                    state: o.base,
                    policy: Some(o.policy),
                })
                .collect(),
        }
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectObservation<T>> {
        self.others.iter().find(|o| o.id == id)
    }
}

/// Initial belief plus the alternating action/observation record.
#[derive(Debug, Clone, PartialEq)]
pub struct History<T> {
    pub initial: FactoredBelief<T>,
    entries: Vec<(ActionCommand<T>, Observation<T>)>,
}

impl<T: Real> History<T> {
    pub fn new(initial: FactoredBelief<T>) -> Self {
        Self {
            initial,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(ActionCommand<T>, Observation<T>)] {
        &self.entries
    }

    pub fn actions(&self) -> impl Iterator<Item = &ActionCommand<T>> {
        self.entries.iter().map(|(a, _)| a)
    }

    pub fn observations(&self) -> impl Iterator<Item = &Observation<T>> {
        self.entries.iter().map(|(_, o)| o)
    }

    /// Every recorded observation of one object, oldest first.
    pub fn object_observations(&self, id: ObjectId) -> Vec<OtherVehicleState<T>> {
        self.entries
            .iter()
            .filter_map(|(_, o)| o.object(id).map(|x| x.state))
            .collect()
    }

    pub fn knows_object(&self, id: ObjectId) -> bool {
        self.entries.iter().any(|(_, o)| o.object(id).is_some())
    }
}

/// Extends the history by one decision cycle. Earlier entries are untouched.
pub fn append_history<T: Real>(mut h: History<T>, a: ActionCommand<T>, o: Observation<T>) -> History<T> {
    h.entries.push((a, o));
    h
}

/// Per-object marginal: point mass on the observed state, categorical over policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectBelief<T> {
    pub id: ObjectId,
    pub state: OtherVehicleState<T>,
    /// Indexed by [`PolicyKind::index`].
    pub policy_probs: [T; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoredBelief<T> {
    pub ego: EgoState<T>,
    pub ego_station: T,
    pub policies: PolicySet<T>,
    pub objects: Vec<ObjectBelief<T>>,
}

/// Likelihood of an augmented policy label given the true policy, plus the
/// chance that a vehicle switches policy between two decisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyObservationModel<T> {
    pub match_prob: T,
    pub mismatch_prob: T,
    /// Probability of moving to each one of the other two policies per cycle.
    pub switch_prob: T,
}

impl<T: Real> Default for PolicyObservationModel<T> {
    fn default() -> Self {
        Self {
            match_prob: T::lit(0.9),
            mismatch_prob: T::lit(0.05),
            switch_prob: T::lit(0.1),
        }
    }
}

impl<T: Real> PolicyObservationModel<T> {
    pub fn likelihood(&self, observed: PolicyKind) -> [T; 3] {
        let mut l = [self.mismatch_prob; 3];
        l[observed.index()] = self.match_prob;
        l
    }
}

impl<T: Real> FactoredBelief<T> {
    /// Belief with the ego known exactly and no other vehicles.
    pub fn ego_only(ego: EgoState<T>, ego_station: T, policies: PolicySet<T>) -> Self {
        Self {
            ego,
            ego_station,
            policies,
            objects: Vec::new(),
        }
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectBelief<T>> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Largest deviation of any policy marginal from summing to one.
    pub fn normalization_error(&self) -> T {
        self.objects
            .iter()
            .map(|o| (o.policy_probs.iter().copied().sum::<T>() - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    /// Joint probability of one policy assignment (product of marginals).
    pub fn joint_policy_probability(&self, kinds: &[PolicyKind]) -> T {
        self.objects
            .iter()
            .zip(kinds)
            .map(|(o, k)| o.policy_probs[k.index()])
            .fold(T::one(), |acc, p| acc * p)
    }
}

/// Object-wise belief update from an augmented observation.
///
/// Pose and speed collapse onto the observation; the policy marginal gets a
/// Bayes update with the label likelihood. Objects missing from the
/// observation are dropped, new ones start from a uniform policy prior.
pub fn update_belief<T: Real>(
    b: &FactoredBelief<T>,
    _action: &ActionCommand<T>,
    o_augmented: &Observation<T>,
    model: &PolicyObservationModel<T>,
) -> Result<FactoredBelief<T>, PomdpError> {
    let uniform = [T::one() / T::lit(3.0); 3];
    let mut objects = Vec::with_capacity(o_augmented.others.len());
    for (i, obs) in o_augmented.others.iter().enumerate() {
        let label = obs.policy.ok_or(PomdpError::MissingPolicyLabel(obs.id))?;
        let prior = b.object(obs.id).map_or(uniform, |ob| ob.policy_probs);
        let likelihood = model.likelihood(label.kind);
        let stay = T::one() - T::two() * model.switch_prob;
        let posterior = bayes_update(&prior, |from, to| if from == to { stay } else { model.switch_prob }, &likelihood)
            .map_err(|_| PomdpError::ZeroLikelihood(i))?;
        objects.push(ObjectBelief {
            id: obs.id,
            state: obs.state,
            policy_probs: [posterior[0], posterior[1], posterior[2]],
        });
    }
    objects.sort_by_key(|o| o.id);
    Ok(FactoredBelief {
        ego: o_augmented.ego,
        ego_station: o_augmented.ego_station,
        policies: b.policies.clone(),
        objects,
    })
}

/// Single-object discrete Bayes filter:
/// `b'(s') = eta * Z(o|s') * sum_s T(s'|s) b(s)`.
/// `transition(from, to)` is `T(to | from)`.
pub fn bayes_update<T: Real>(
    prior: &[T],
    transition: impl Fn(usize, usize) -> T,
    likelihood: &[T],
) -> Result<Vec<T>, PomdpError> {
    if prior.len() != likelihood.len() {
        return Err(PomdpError::Invalid(format!(
            "prior has {} states, likelihood {}",
            prior.len(),
            likelihood.len()
        )));
    }
    let n = prior.len();
    let mut post: Vec<T> = (0..n)
        .map(|to| {
            let predicted: T = (0..n).map(|from| transition(from, to) * prior[from]).sum();
            likelihood[to] * predicted
        })
        .collect();
    let norm: T = post.iter().copied().sum();
    if !(norm > T::zero()) {
        return Err(PomdpError::ZeroLikelihood(0));
    }
    for p in &mut post {
        *p /= norm;
    }
    Ok(post)
}

/// A product of independent discrete marginals, one per object.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredDiscreteBelief<T> {
    pub marginals: Vec<Vec<T>>,
}

impl<T: Real> FactoredDiscreteBelief<T> {
    /// Updates every object with its own transition matrix (`transitions[i][from][to]`)
    /// and observation likelihood.
    pub fn update(&self, transitions: &[Vec<Vec<T>>], likelihoods: &[Vec<T>]) -> Result<Self, PomdpError> {
        if transitions.len() != self.marginals.len() || likelihoods.len() != self.marginals.len() {
            return Err(PomdpError::Invalid("one transition and likelihood per object".into()));
        }
        let marginals = self
            .marginals
            .iter()
            .zip(transitions.iter().zip(likelihoods))
            .enumerate()
            .map(|(i, (prior, (trans, lik)))| {
                bayes_update(prior, |from, to| trans[from][to], lik).map_err(|e| match e {
                    PomdpError::ZeroLikelihood(_) => PomdpError::ZeroLikelihood(i),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { marginals })
    }

    pub fn joint(&self, assignment: &[usize]) -> T {
        self.marginals
            .iter()
            .zip(assignment)
            .map(|(m, &s)| m[s])
            .fold(T::one(), |acc, p| acc * p)
    }

    /// Number of parameters stored: `N * M` rather than `M^N`.
    pub fn dimension(&self) -> usize {
        self.marginals.iter().map(Vec::len).sum()
    }
}

/// `M^N`, the size of the unfactored state space.
pub fn state_space_cardinality(num_objects: u32, states_per_object: u64) -> Result<u64, PomdpError> {
    if num_objects == 0 || states_per_object == 0 {
        return Err(PomdpError::Invalid("need at least one object and one state".into()));
    }
    states_per_object
        .checked_pow(num_objects)
        .ok_or(PomdpError::Overflow {
            objects: num_objects,
            states_per_object,
        })
}

/// `N * M`, the size of the factored representation.
pub fn factored_dimension(num_objects: u32, states_per_object: u64) -> u64 {
    num_objects as u64 * states_per_object
}

/// Draws one joint state: each object independently from its marginal.
pub fn sample_state_with<T: Real, R: Rng + ?Sized>(b: &FactoredBelief<T>, rng: &mut R) -> JointState<T> {
    let others = b
        .objects
        .iter()
        .map(|ob| {
            let u = T::lit(rng.gen::<f64>());
            let mut acc = T::zero();
            let mut kind = PolicyKind::ALL[2];
            for k in PolicyKind::ALL {
                let p = ob.policy_probs[k.index()];
                acc += p;
                if p > T::zero() && u < acc {
                    kind = k;
                    break;
                }
            }
            // guard against rounding leaving u above the last cumulative value
            if ob.policy_probs[kind.index()] == T::zero() {
                kind = *PolicyKind::ALL
                    .iter()
                    .rev()
                    .find(|k| ob.policy_probs[k.index()] > T::zero())
                    .unwrap_or(&kind);
            }
            (
                ob.id,
                AugmentedOtherState {
                    base: ob.state,
                    policy: b.policies.get(kind),
                },
            )
        })
        .collect();
    JointState {
        ego: b.ego,
        ego_station: b.ego_station,
        target_reached: false,
        crashed: false,
        a_prev: T::zero(),
        others,
    }
}

pub fn sample_state<T: Real>(b: &FactoredBelief<T>, rng_seed: u64) -> JointState<T> {
    sample_state_with(b, &mut ChaCha8Rng::seed_from_u64(rng_seed))
}

/// How non-ego vehicles move inside the planner's model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OtherTransition {
    /// Heading turned by the augmented policy's yaw rate.
    PolicyBased,
    /// Fixed heading and speed.
    ConstantVelocity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeOutcome<T> {
    pub next: JointState<T>,
    pub observation: Observation<T>,
    pub reward: RewardBreakdown<T>,
    pub terminal: bool,
}

/// Deterministic generative model `g(s, a) -> (s', o, r)` for one decision step.
#[derive(Debug, Clone)]
pub struct RoundaboutModel<'a, T> {
    pub path: &'a PathSpec<T>,
    pub rewards: &'a RewardConfig<T>,
    pub transition: OtherTransition,
    pub dt_decision: T,
    pub substeps: usize,
    /// When set, physical contact ends the episode and this replaces the
    /// collision term of that step.
    pub crash_penalty: Option<T>,
    /// Rule-based driver the guided rollout follows.
    pub driver: Option<(&'a RoundaboutLayout<T>, &'a BaselineParams<T>)>,
    /// When set, a policy-driven vehicle that crosses into another region
    /// takes that region's policy.
    pub region_switching: Option<&'a RoundaboutLayout<T>>,
}

impl<'a, T: Real> RoundaboutModel<'a, T> {
    pub fn new(path: &'a PathSpec<T>, rewards: &'a RewardConfig<T>, transition: OtherTransition) -> Self {
        Self {
            path,
            rewards,
            transition,
            dt_decision: T::one(),
            substeps: 10,
            crash_penalty: None,
            driver: None,
            region_switching: None,
        }
    }

    pub fn with_region_switching(mut self, layout: &'a RoundaboutLayout<T>) -> Self {
        self.region_switching = Some(layout);
        self
    }

    pub fn with_driver(mut self, layout: &'a RoundaboutLayout<T>, params: &'a BaselineParams<T>) -> Self {
        self.driver = Some((layout, params));
        self
    }

    /// Makes contact absorbing, worth the collision penalty on every
    /// remaining step of an endless discounted horizon.
    pub fn with_absorbing_crash(mut self, discount: T) -> Self {
        self.crash_penalty = Some(self.rewards.collision_penalty_value / (T::one() - discount));
        self
    }

    fn step_other(&self, o: &AugmentedOtherState<T>, dt: T) -> OtherVehicleState<T> {
        match self.transition {
            OtherTransition::PolicyBased => policy_euler(&o.base, &o.policy, dt),
            OtherTransition::ConstantVelocity => constant_euler(&o.base, dt),
        }
    }

    /// Advances everything without building an observation. The commanded
    /// acceleration passes through the jerk bound first, as in the real loop.
    pub fn advance(&self, s: &JointState<T>, action: &ActionCommand<T>) -> (JointState<T>, RewardBreakdown<T>) {
        let dt = self.dt_decision / T::lit(self.substeps as f64);
        let accel = clamp_jerk(action.accel, s.a_prev, self.rewards.j_max);
        let contact = T::two() * boundary_radius(self.rewards.vehicle_length, self.rewards.vehicle_width);
        // The ego stays on its path; only speed and station are integrated.
        // Target and contact are checked on every substep so a fast ego
        // cannot skip past either.
        let mut ego = s.ego;
        let mut station = s.ego_station;
        let mut others = s.others.clone();
        let mut crashed = false;
        for _ in 0..self.substeps {
            station = (station + ego.v * dt).min(self.path.total_length());
            ego.v = (ego.v + accel * dt).max(T::zero());
            let (p, heading) = self.path.pose_at(station);
            ego.x = p.x;
            ego.y = p.y;
            ego.theta = heading;
            ego.w = ego.v * self.path.curvature_clamped(station);
            for (_, o) in &mut others {
                let before = o.base.position();
                o.base = self.step_other(o, dt);
                if let (OtherTransition::PolicyBased, Some(layout)) = (self.transition, self.region_switching) {
                    switch_by_region(o, before, layout);
                }
            }
            if self.crash_penalty.is_some() {
                crashed = others.iter().any(|(_, o)| o.base.position().distance(p) <= contact);
            }
            let at_target = p.distance(self.path.target_point) <= self.rewards.target_radius;
            if crashed || (!s.target_reached && at_target) {
                break;
            }
        }
        let bases: Vec<_> = others.iter().map(|(_, o)| o.base).collect();
        let mut reward = total_reward_at(&ego, station, &bases, accel, self.path, self.rewards);
        if s.target_reached {
            reward = reward.without_target(self.rewards);
        }
        if let (true, Some(penalty)) = (crashed, self.crash_penalty) {
            reward = RewardBreakdown::weighted(penalty, reward.gap, reward.velocity, T::zero(), reward.comfort, self.rewards);
        }
        let next = JointState {
            ego,
            ego_station: station,
            target_reached: s.target_reached || reward.target > T::zero(),
            crashed,
            a_prev: accel,
            others,
        };
        (next, reward)
    }

    pub fn generative_step(&self, s: &JointState<T>, action: &ActionCommand<T>) -> GenerativeOutcome<T> {
        let (next, reward) = self.advance(s, action);
        GenerativeOutcome {
            observation: Observation::of_state(&next),
            terminal: next.target_reached || next.crashed,
            next,
            reward,
        }
    }
}

/// Region-driven policy change after one substep. Leaving for a new region
/// takes that region's policy, except that an entering vehicle starts to
/// circulate only once it runs tangent to the ring.
fn switch_by_region<T: Real>(o: &mut AugmentedOtherState<T>, before: Point2<T>, layout: &RoundaboutLayout<T>) {
    let Ok(region) = layout.classify_region(o.base.position()) else {
        return;
    };
    let wanted = PolicyKind::for_region(region);
    if wanted == o.policy.kind {
        return;
    }
    let switch = match wanted {
        PolicyKind::Circulate => {
            let rel = o.base.position() - layout.center;
            o.policy.kind == PolicyKind::EnterExit && rel.dot(Point2::from_angle(o.base.theta)) >= T::zero()
        }
        _ => layout.classify_region(before).map_or(true, |r| r != region),
    };
    if switch {
        o.policy = DrivingPolicy::for_layout(wanted, layout);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectClass {
    Ego,
    OtherVehicle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Attribute {
    X,
    Y,
    Theta,
    V,
    W,
    Policy,
}

/// Classes, their attributes and attribute domains.
#[derive(Debug, Clone)]
pub struct ObjectClassSchema<T> {
    /// Radius around the layout center that bounds every position.
    pub extent: T,
}

impl<T: Real> ObjectClassSchema<T> {
    pub fn for_layout(layout: &RoundaboutLayout<T>) -> Self {
        let longest = layout.arms.iter().map(|a| a.length).fold(T::zero(), T::max);
        Self {
            extent: longest + layout.lane_width,
        }
    }

    pub fn classes(&self) -> [ObjectClass; 2] {
        [ObjectClass::Ego, ObjectClass::OtherVehicle]
    }

    pub fn attributes(&self, class: ObjectClass) -> &'static [Attribute] {
        match class {
            ObjectClass::Ego => &[Attribute::X, Attribute::Y, Attribute::Theta, Attribute::V, Attribute::W],
            ObjectClass::OtherVehicle => &[Attribute::X, Attribute::Y, Attribute::Theta, Attribute::V, Attribute::Policy],
        }
    }

    pub fn in_domain(&self, attribute: Attribute, value: T) -> bool {
        match attribute {
            Attribute::X | Attribute::Y => value.abs() <= self.extent,
            Attribute::Theta => value >= T::zero() && value < T::two_pi(),
            Attribute::V => value >= T::zero() && value.is_finite(),
            Attribute::W => value.is_finite(),
            Attribute::Policy => true,
        }
    }

    /// Checks every attribute of every object in a joint state; positions are
    /// taken relative to `center`.
    pub fn check(&self, s: &JointState<T>, layout: &RoundaboutLayout<T>) -> Result<(), String> {
        let c = layout.center;
        let ego = [
            (Attribute::X, s.ego.x - c.x),
            (Attribute::Y, s.ego.y - c.y),
            (Attribute::Theta, s.ego.theta),
            (Attribute::V, s.ego.v),
            (Attribute::W, s.ego.w),
        ];
        for (attr, v) in ego {
            if !self.in_domain(attr, v) {
                return Err(format!("ego {attr:?} = {v} outside its domain"));
            }
        }
        let mut seen = BTreeMap::new();
        for (id, o) in &s.others {
            if seen.insert(*id, ()).is_some() {
                return Err(format!("duplicate object id {id}"));
            }
            let attrs = [
                (Attribute::X, o.base.x - c.x),
                (Attribute::Y, o.base.y - c.y),
                (Attribute::Theta, o.base.theta),
                (Attribute::V, o.base.v),
            ];
            for (attr, v) in attrs {
                if !self.in_domain(attr, v) {
                    return Err(format!("{id} {attr:?} = {v} outside its domain"));
                }
            }
            if !o.policy.is_consistent_with(layout) {
                return Err(format!("{id} policy parameter does not match the layout"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    fn straight_world() -> (PathSpec<f64>, RewardConfig<f64>) {
        (
            PathSpec::straight(Point2::new(0.0, 0.0), 0.0, 500.0).unwrap(),
            RewardConfig::default(),
        )
    }

    fn policies() -> PolicySet<f64> {
        PolicySet::from_layout(&RoundaboutLayout::four_way())
    }

    #[test]
    fn empty_road_at_desired_speed_is_free() {
        let (path, cfg) = straight_world();
        let model = RoundaboutModel::new(&path, &cfg, OtherTransition::PolicyBased);
        let s = JointState {
            ego: EgoState::new(0.0, 0.0, 0.0, 10.0, 0.0),
            ego_station: 0.0,
            target_reached: false,
            crashed: false,
            a_prev: 0.0,
            others: vec![],
        };
        let out = model.generative_step(&s, &ActionCommand::coast());
        assert_eq!(out.reward.total, 0.0);
        assert!((out.next.ego.x - 10.0).abs() < 1e-9);
        assert!((out.next.ego_station - 10.0).abs() < 1e-9);
        assert!(!out.terminal);
    }

    #[test]
    fn vehicle_inside_safe_distance_is_penalised() {
        let (path, cfg) = straight_world();
        let model = RoundaboutModel::new(&path, &cfg, OtherTransition::PolicyBased);
        let s = JointState {
            ego: EgoState::new(0.0, 0.0, 0.0, 10.0, 0.0),
            ego_station: 0.0,
            target_reached: false,
            crashed: false,
            a_prev: 0.0,
            others: vec![(
                ObjectId(1),
                AugmentedOtherState {
                    base: OtherVehicleState::new(15.0, 5.0, 0.0, 10.0),
                    policy: DrivingPolicy::straight(),
                },
            )],
        };
        let a = model.generative_step(&s, &ActionCommand::coast());
        assert!(a.reward.total <= -1000.0);
        let b = model.generative_step(&s, &ActionCommand::coast());
        assert_eq!(a, b);
        // observation equals the successor state exactly
        assert_eq!(a.observation.others[0].state, a.next.others[0].1.base);
        assert_eq!(a.observation.ego, a.next.ego);
    }

    #[test]
    fn target_makes_state_terminal_once() {
        let path = PathSpec::straight(Point2::new(0.0, 0.0), 0.0, 10.0).unwrap();
        let cfg = RewardConfig::default();
        let model = RoundaboutModel::new(&path, &cfg, OtherTransition::PolicyBased);
        let s = JointState {
            ego: EgoState::new(0.0, 0.0, 0.0, 10.0, 0.0),
            ego_station: 0.0,
            target_reached: false,
            crashed: false,
            a_prev: 0.0,
            others: vec![],
        };
        let out = model.generative_step(&s, &ActionCommand::coast());
        assert!(out.terminal);
        assert_eq!(out.reward.target, 1000.0);
        let again = model.generative_step(&out.next, &ActionCommand::new(-3.0));
        assert_eq!(again.reward.target, 0.0);
    }

    #[test]
    fn indicator_likelihood_collapses_policy() {
        let b = FactoredBelief::ego_only(EgoState::default(), 0.0, policies());
        let set = policies();
        let obs = Observation {
            ego: EgoState::default(),
            ego_station: 0.0,
            others: vec![
                ObjectObservation {
                    id: ObjectId(1),
                    state: OtherVehicleState::new(1.0, 2.0, 0.0, 3.0),
                    policy: Some(set.get(PolicyKind::Circulate)),
                },
                ObjectObservation {
                    id: ObjectId(2),
                    state: OtherVehicleState::new(4.0, 5.0, 0.0, 3.0),
                    policy: Some(set.get(PolicyKind::Straight)),
                },
            ],
        };
        let model = PolicyObservationModel {
            match_prob: 1.0,
            mismatch_prob: 0.0,
            switch_prob: 0.1,
        };
        let post = update_belief(&b, &ActionCommand::coast(), &obs, &model).unwrap();
        assert_eq!(post.objects[0].policy_probs, [0.0, 0.0, 1.0]);
        assert_eq!(post.objects[1].policy_probs, [1.0, 0.0, 0.0]);
        assert_eq!(post.objects[1].state, obs.others[1].state);
    }

    #[test]
    fn soft_likelihood_against_uniform_prior() {
        let post = bayes_update(&[1.0f64 / 3.0; 3], |a, b| if a == b { 1.0 } else { 0.0 }, &[0.7, 0.3, 0.0]).unwrap();
        for (p, e) in post.iter().zip([0.7, 0.3, 0.0]) {
            assert!((p - e).abs() < 1e-12);
        }
        assert!(bayes_update(&[0.5, 0.5, 0.0], |a, b| if a == b { 1.0 } else { 0.0 }, &[0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn missing_label_is_an_error() {
        let b = FactoredBelief::ego_only(EgoState::default(), 0.0, policies());
        let obs = Observation {
            ego: EgoState::default(),
            ego_station: 0.0,
            others: vec![ObjectObservation {
                id: ObjectId(7),
                state: OtherVehicleState::default(),
                policy: None,
            }],
        };
        assert_eq!(
            update_belief(&b, &ActionCommand::coast(), &obs, &PolicyObservationModel::default()).unwrap_err(),
            PomdpError::MissingPolicyLabel(ObjectId(7))
        );
    }

    #[test]
    fn cardinality() {
        assert_eq!(state_space_cardinality(1, 7).unwrap(), 7);
        assert_eq!(state_space_cardinality(3, 4).unwrap(), 64);
        assert_eq!(factored_dimension(3, 4), 12);
        assert!(matches!(state_space_cardinality(40, 1000), Err(PomdpError::Overflow { .. })));
    }

    #[test]
    fn sampling_point_masses_is_exact_and_seeded() {
        let mut b = FactoredBelief::ego_only(EgoState::new(1.0, 2.0, 0.5, 3.0, 0.0), 4.0, policies());
        b.objects.push(ObjectBelief {
            id: ObjectId(3),
            state: OtherVehicleState::new(5.0, 6.0, 1.0, 2.0),
            policy_probs: [0.0, 1.0, 0.0],
        });
        let s = sample_state(&b, 11);
        assert_eq!(s.others[0].1.policy.kind, PolicyKind::EnterExit);
        assert_eq!(s.others[0].1.base, b.objects[0].state);
        assert_eq!(s.ego, b.ego);
        b.objects[0].policy_probs = [0.2, 0.3, 0.5];
        assert_eq!(sample_state(&b, 5), sample_state(&b, 5));
    }

    #[test]
    fn history_appends() {
        let b = FactoredBelief::ego_only(EgoState::default(), 0.0, policies());
        let h = History::new(b);
        let obs = |x: f64| Observation {
            ego: EgoState::default(),
            ego_station: 0.0,
            others: vec![ObjectObservation {
                id: ObjectId(1),
                state: OtherVehicleState::new(x, 0.0, 0.0, 1.0),
                policy: None,
            }],
        };
        let h1 = append_history(h, ActionCommand::coast(), obs(1.0));
        assert_eq!(h1.len(), 1);
        let snapshot = h1.clone();
        let h2 = append_history(h1, ActionCommand::new(0.5), obs(2.0));
        assert_eq!(&h2.entries()[..1], snapshot.entries());
        let xs: Vec<_> = h2.object_observations(ObjectId(1)).iter().map(|s| s.x).collect();
        assert_eq!(xs, vec![1.0, 2.0]);
        assert!(h2.object_observations(ObjectId(2)).is_empty());
    }

    #[test]
    fn schema_checks_domains() {
        let layout = RoundaboutLayout::four_way();
        let schema = ObjectClassSchema::for_layout(&layout);
        assert_eq!(schema.attributes(ObjectClass::Ego).len(), 5);
        let mut s = JointState {
            ego: EgoState::new(0.0, -50.0, 1.0, 5.0, 0.0),
            ego_station: 0.0,
            target_reached: false,
            crashed: false,
            a_prev: 0.0,
            others: vec![(
                ObjectId(1),
                AugmentedOtherState {
                    base: OtherVehicleState::new(20.0, 0.0, 1.0, 5.0),
                    policy: DrivingPolicy::for_layout(PolicyKind::Circulate, &layout),
                },
            )],
        };
        schema.check(&s, &layout).unwrap();
        s.others[0].1.policy.curvature = 0.3;
        assert!(schema.check(&s, &layout).is_err());
    }
}
