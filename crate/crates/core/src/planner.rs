//! Monte-Carlo tree search over action/observation histories.
//!
//! Root states are drawn fresh from the belief on every simulation; nodes
//! keep only visit counts and values. The tree is generic over a
//! [`GenerativeModel`], so the same search runs the roundabout model and the
//! small toy problems used in tests.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driver::{yield_baseline_policy, BaselineParams, BaselineView, YieldMemory};
use crate::dynamics::PolicyKind;
use crate::geometry::{PathSpec, RoundaboutLayout};
use crate::policy_prediction::{augment_observation, predict_policy, PredictionConfig, PredictionError};
use crate::pomdp::{
    append_history, sample_state_with, update_belief, ActionCommand, FactoredBelief, History, JointState, Observation,
    OtherTransition, PolicyObservationModel, PomdpError, RoundaboutModel, ACCELERATIONS, COAST_ACTION,
};
use crate::rewards::{clamp_jerk, curve_speed_limit, desired_gap, RewardConfig};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("node has no child edges")]
    NoChildren,
    #[error("edge visit count is zero at update time")]
    ZeroVisits,
    #[error("belief is empty")]
    EmptyBelief,
    #[error("invalid planner config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Prediction(#[from] PredictionError),
    #[error(transparent)]
    Pomdp(#[from] PomdpError),
}

/// Result of one generative step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub next: S,
    /// Equal keys mean equal observations.
    pub obs_key: u64,
    pub reward: f64,
    pub terminal: bool,
}

/// Black-box simulator the search plans against.
pub trait GenerativeModel {
    type State: Clone;
    fn num_actions(&self) -> usize;
    fn step(&self, s: &Self::State, action: usize) -> Transition<Self::State>;

    /// Action a guided rollout takes in `s`, if the model has an opinion.
    fn preferred_action(&self, _s: &Self::State) -> Option<usize> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Simulations(u64),
    WallClockSeconds(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutPolicy {
    UniformRandom,
    /// The model's preferred action, with a uniformly random one at rate `rollout_epsilon`.
    Guided,
}

/// What the exploration constant multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplorationScale {
    /// `c` as given.
    Fixed,
    /// `c` times the spread of returns seen so far in this search.
    ReturnRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub discount: f64,
    pub exploration: f64,
    pub exploration_scale: ExplorationScale,
    pub max_depth: usize,
    /// Treat physical contact in the model as the end of the episode.
    pub absorbing_crash: bool,
    /// Predicted vehicles take the policy of each region they drive into.
    pub region_switching: bool,
    pub budget: Budget,
    pub rollout: RolloutPolicy,
    pub rollout_epsilon: f64,
    pub n_init: u64,
    pub v_init: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            discount: 0.99,
            exploration: 2.0,
            exploration_scale: ExplorationScale::ReturnRange,
            max_depth: 100,
            absorbing_crash: true,
            region_switching: true,
            budget: Budget::Simulations(10_000),
            rollout: RolloutPolicy::UniformRandom,
            rollout_epsilon: 0.2,
            n_init: 0,
            v_init: 0.0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: String| Err(PlannerError::InvalidConfig(m));
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad(format!("discount {} not in (0, 1)", self.discount));
        }
        if !(self.exploration >= 0.0) || !self.exploration.is_finite() {
            return bad(format!("exploration {} must be >= 0", self.exploration));
        }
        if self.max_depth < 1 {
            return bad("max depth must be >= 1".into());
        }
        if let Budget::WallClockSeconds(s) = self.budget {
            if !(s >= 0.0) || !s.is_finite() {
                return bad(format!("wall-clock budget {s} must be >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.rollout_epsilon) {
            return bad(format!("rollout epsilon {} not in [0, 1]", self.rollout_epsilon));
        }
        if !self.v_init.is_finite() {
            return bad("v_init must be finite".into());
        }
        Ok(())
    }
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub visits: u64,
    pub value: f64,
    /// Sum of every return propagated through the edge, kept for auditing the mean.
    pub return_sum: f64,
    pub children: Vec<(u64, NodeId)>,
}

impl Edge {
    fn new(n_init: u64, v_init: f64) -> Self {
        Self {
            visits: n_init,
            value: v_init,
            return_sum: 0.0,
            children: Vec::new(),
        }
    }

    pub fn child(&self, obs_key: u64) -> Option<NodeId> {
        self.children.iter().find(|(k, _)| *k == obs_key).map(|(_, id)| *id)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchNode {
    pub visits: u64,
    /// Empty until the node is expanded.
    pub edges: Vec<Edge>,
}

impl SearchNode {
    pub fn is_expanded(&self) -> bool {
        !self.edges.is_empty()
    }

    /// Visit-weighted mean of the edge values.
    pub fn value(&self) -> f64 {
        let n: u64 = self.edges.iter().map(|e| e.visits).sum();
        if n == 0 {
            return 0.0;
        }
        self.edges.iter().map(|e| e.value * e.visits as f64).sum::<f64>() / n as f64
    }
}

/// UCB1 choice: untried edges first, then `V + c sqrt(ln N / N(ha))`, lowest index on ties.
pub fn ucb1_select(node: &SearchNode, c: f64) -> Result<usize, PlannerError> {
    if node.edges.is_empty() {
        return Err(PlannerError::NoChildren);
    }
    if let Some(i) = node.edges.iter().position(|e| e.visits == 0) {
        return Ok(i);
    }
    let ln_n = (node.visits.max(1) as f64).ln();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, e) in node.edges.iter().enumerate() {
        let score = e.value + c * (ln_n / e.visits as f64).sqrt();
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    Ok(best)
}

/// Incremental mean; `edge.visits` must already count this visit.
pub fn update_node_stats(edge: &mut Edge, ret: f64) -> Result<(), PlannerError> {
    if edge.visits == 0 {
        return Err(PlannerError::ZeroVisits);
    }
    edge.value += (ret - edge.value) / edge.visits as f64;
    edge.return_sum += ret;
    Ok(())
}

/// Argmax of `V(ha)` over visited edges, lowest index on ties.
pub fn best_action(node: &SearchNode) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in node.edges.iter().enumerate() {
        if e.visits == 0 {
            continue;
        }
        if best.map_or(true, |(_, v)| e.value > v) {
            best = Some((i, e.value));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchStats {
    pub simulations: u64,
    pub rollout_only: u64,
    pub nodes: usize,
    pub min_return: f64,
    pub max_return: f64,
    pub elapsed_seconds: f64,
    pub root_values: Vec<(u64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SearchTree {
    pub nodes: Vec<SearchNode>,
}

impl SearchTree {
    pub fn root(&self) -> &SearchNode {
        &self.nodes[0]
    }

    /// Checks `N(h) = sum N(ha)` at every expanded node (only meaningful with `n_init = 0`).
    pub fn visit_counts_conserved(&self) -> bool {
        self.nodes
            .iter()
            .filter(|n| n.is_expanded())
            .all(|n| n.visits == n.edges.iter().map(|e| e.visits).sum::<u64>())
    }

    /// Largest gap between an edge value and the batch mean of its returns.
    pub fn max_mean_error(&self) -> f64 {
        self.nodes
            .iter()
            .flat_map(|n| n.edges.iter())
            .filter(|e| e.visits > 0)
            .map(|e| (e.value - e.return_sum / e.visits as f64).abs())
            .fold(0.0, f64::max)
    }
}

/// Tree search over one model with a fixed configuration.
pub struct Searcher<'m, M: GenerativeModel> {
    pub model: &'m M,
    pub cfg: PlannerConfig,
    tree: SearchTree,
    rng: ChaCha8Rng,
    rollout_only: u64,
    min_return: f64,
    max_return: f64,
    /// Spread of every return backed up at any node.
    backed_up: (f64, f64),
}

impl<'m, M: GenerativeModel> Searcher<'m, M> {
    pub fn new(model: &'m M, cfg: PlannerConfig, seed: u64) -> Self {
        Self {
            model,
            cfg,
            tree: SearchTree {
                nodes: vec![SearchNode::default()],
            },
            rng: ChaCha8Rng::seed_from_u64(seed),
            rollout_only: 0,
            min_return: f64::INFINITY,
            max_return: f64::NEG_INFINITY,
            backed_up: (f64::INFINITY, f64::NEG_INFINITY),
        }
    }

    /// Exploration constant in effect for the next selection.
    pub fn effective_exploration(&self) -> f64 {
        match self.cfg.exploration_scale {
            ExplorationScale::Fixed => self.cfg.exploration,
            ExplorationScale::ReturnRange => {
                let spread = self.backed_up.1 - self.backed_up.0;
                if spread.is_finite() && spread > 0.0 {
                    self.cfg.exploration * spread
                } else {
                    self.cfg.exploration
                }
            }
        }
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Discounted return of random play from `s` until the depth cap or a terminal state.
    pub fn rollout(&mut self, s: &M::State, depth: usize) -> f64 {
        rollout(self.model, s, depth, &self.cfg, &mut self.rng)
    }

    fn expand(&mut self, node: NodeId) {
        let n = self.model.num_actions();
        self.tree.nodes[node].edges = (0..n).map(|_| Edge::new(self.cfg.n_init, self.cfg.v_init)).collect();
    }

    /// One simulation from `node` at `depth`.
    pub fn simulate_node(&mut self, s: &M::State, node: NodeId, depth: usize) -> f64 {
        if depth >= self.cfg.max_depth {
            return 0.0;
        }
        if !self.tree.nodes[node].is_expanded() {
            self.expand(node);
            if node == 0 {
                self.rollout_only += 1;
            }
            return self.rollout(s, depth);
        }
        let a = ucb1_select(&self.tree.nodes[node], self.effective_exploration()).expect("expanded node has edges");
        let t = self.model.step(s, a);
        let future = if t.terminal {
            0.0
        } else {
            let child = match self.tree.nodes[node].edges[a].child(t.obs_key) {
                Some(c) => c,
                None => {
                    self.tree.nodes.push(SearchNode::default());
                    let id = self.tree.nodes.len() - 1;
                    self.tree.nodes[node].edges[a].children.push((t.obs_key, id));
                    id
                }
            };
            self.simulate_node(&t.next, child, depth + 1)
        };
        let ret = t.reward + self.cfg.discount * future;
        self.backed_up = (self.backed_up.0.min(ret), self.backed_up.1.max(ret));
        let n = &mut self.tree.nodes[node];
        n.visits += 1;
        let edge = &mut n.edges[a];
        edge.visits += 1;
        update_node_stats(edge, ret).expect("visit counted");
        ret
    }

    /// Runs simulations from root states drawn by `sample` until the budget is spent.
    pub fn run(&mut self, mut sample: impl FnMut(&mut ChaCha8Rng) -> M::State) -> SearchStats {
        let start = Instant::now();
        let mut sims = 0u64;
        loop {
            let done = match self.cfg.budget {
                Budget::Simulations(n) => sims >= n,
                Budget::WallClockSeconds(secs) => start.elapsed() >= Duration::from_secs_f64(secs),
            };
            if done {
                break;
            }
            let s = sample(&mut self.rng);
            let r = self.simulate_node(&s, 0, 0);
            self.min_return = self.min_return.min(r);
            self.max_return = self.max_return.max(r);
            sims += 1;
        }
        SearchStats {
            simulations: sims,
            rollout_only: self.rollout_only,
            nodes: self.tree.nodes.len(),
            min_return: self.min_return,
            max_return: self.max_return,
            elapsed_seconds: start.elapsed().as_secs_f64(),
            root_values: self.tree.root().edges.iter().map(|e| (e.visits, e.value)).collect(),
        }
    }

    pub fn best_action(&self) -> Option<usize> {
        best_action(self.tree.root())
    }
}

/// Random-play return from `s` starting at `depth`.
pub fn rollout<M: GenerativeModel, R: Rng + ?Sized>(
    model: &M,
    s: &M::State,
    depth: usize,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> f64 {
    let n = model.num_actions();
    let mut total = 0.0;
    let mut discount = 1.0;
    let mut state = s.clone();
    for _ in depth..cfg.max_depth {
        let a = match cfg.rollout {
            RolloutPolicy::UniformRandom => rng.gen_range(0..n),
            RolloutPolicy::Guided => {
                if rng.gen::<f64>() < cfg.rollout_epsilon {
                    rng.gen_range(0..n)
                } else {
                    model.preferred_action(&state).unwrap_or_else(|| rng.gen_range(0..n))
                }
            }
        };
        let t = model.step(&state, a);
        total += discount * t.reward;
        if t.terminal {
            break;
        }
        discount *= cfg.discount;
        state = t.next;
    }
    total
}

/// Searches from root states drawn by `sample`; `None` if no simulation ran.
pub fn search_with<M: GenerativeModel>(
    model: &M,
    sample: impl FnMut(&mut ChaCha8Rng) -> M::State,
    cfg: &PlannerConfig,
    seed: u64,
) -> Result<(Option<usize>, SearchStats, SearchTree), PlannerError> {
    cfg.validate()?;
    if model.num_actions() == 0 {
        return Err(PlannerError::NoChildren);
    }
    let mut s = Searcher::new(model, cfg.clone(), seed);
    let stats = s.run(sample);
    Ok((s.best_action(), stats, s.tree))
}

fn observation_key<T: Real>(s: &JointState<T>) -> u64 {
    let mut h = DefaultHasher::new();
    for (id, o) in &s.others {
        id.hash(&mut h);
        o.base.x.as_f64().to_bits().hash(&mut h);
        o.base.y.as_f64().to_bits().hash(&mut h);
        o.base.theta.as_f64().to_bits().hash(&mut h);
        o.base.v.as_f64().to_bits().hash(&mut h);
    }
    h.finish()
}

impl<'a, T: Real> GenerativeModel for RoundaboutModel<'a, T> {
    type State = JointState<T>;

    fn num_actions(&self) -> usize {
        ACCELERATIONS.len()
    }

    fn step(&self, s: &JointState<T>, action: usize) -> Transition<JointState<T>> {
        let (next, reward) = self.advance(s, &ActionCommand::from_index(action));
        // the ego part of the observation is fixed by the action sequence
        Transition {
            obs_key: observation_key(&next),
            terminal: next.target_reached || next.crashed,
            reward: reward.total.as_f64(),
            next,
        }
    }

    /// The rule-based driver's choice, or the acceleration that best tracks
    /// the curve-aware speed limit when no driver is set.
    fn preferred_action(&self, s: &JointState<T>) -> Option<usize> {
        let want = match self.driver {
            Some((layout, params)) => {
                let others: Vec<_> = s.others.iter().map(|(_, o)| (o.base.position(), o.base.v)).collect();
                let view = BaselineView {
                    station: s.ego_station,
                    v: s.ego.v,
                    path: self.path,
                    layout,
                    others: &others,
                    rewards: self.rewards,
                };
                yield_baseline_policy(&view, params, &mut YieldMemory::default()).as_f64()
            }
            None => {
                let limit = curve_speed_limit(self.path, s.ego_station, T::lit(ROLLOUT_CURVE_DECEL), self.rewards);
                ((limit - s.ego.v) / self.dt_decision).as_f64()
            }
        };
        ACCELERATIONS
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - want).abs().total_cmp(&(b.1 - want).abs()))
            .map(|(i, _)| i)
    }
}

/// Braking the guided rollout plans with ahead of curves (m/s^2).
const ROLLOUT_CURVE_DECEL: f64 = 2.0;

impl<'a, T: Real> RoundaboutModel<'a, T> {
    /// Bounds on a single step reward while the ego speed stays at or below `v_max`.
    pub fn step_reward_bounds(&self, v_max: T) -> (f64, f64) {
        let c = self.rewards;
        let f = |x: T| x.as_f64();
        let k_max = self
            .path
            .segments
            .iter()
            .map(|s| s.curvature.abs())
            .fold(T::zero(), T::max);
        let v_des_min = crate::rewards::desired_velocity(k_max, c);
        let v_rel = ((v_max - v_des_min).abs() / v_des_min).max(T::one());
        let gap_err = (c.gap_lookahead + c.on_path_tolerance).max(desired_gap(v_max, c));
        let worst = f(c.c1 * c.collision_penalty_value)
            + f(c.c2 * c.c_gap * gap_err)
            + f(c.c3 * c.c_exceed.min(c.c_lower) * v_rel)
            + f(c.c5 * c.comfort_penalty_value);
        let best = f(c.c4 * c.target_reward_value);
        (worst.min(0.0), best.max(0.0))
    }
}

/// Sum of `gamma^t * r` for `t < depth` with constant `r`.
pub fn discounted_bound(r: f64, gamma: f64, depth: usize) -> f64 {
    r * (1.0 - gamma.powi(depth as i32)) / (1.0 - gamma)
}

/// Everything the ego needs to plan on one scenario.
#[derive(Debug, Clone)]
pub struct Agent<T> {
    pub layout: RoundaboutLayout<T>,
    pub path: PathSpec<T>,
    pub rewards: RewardConfig<T>,
    pub planner: PlannerConfig,
    pub prediction: PredictionConfig<T>,
    pub observation_model: PolicyObservationModel<T>,
    pub transition: OtherTransition,
    /// When false the policy labels stay at the default and the belief is not updated from them.
    pub predict: bool,
    /// Driver for guided rollouts; `None` tracks the curve speed limit only.
    pub rollout_driver: Option<BaselineParams<T>>,
}

/// Search over the roundabout model; an empty budget yields coast with a warning.
pub fn search<T: Real>(
    agent: &Agent<T>,
    h: &History<T>,
    b: &FactoredBelief<T>,
    seed: u64,
) -> Result<(ActionCommand<T>, SearchStats), PlannerError> {
    if b.normalization_error() > T::lit(1e-6) {
        return Err(PlannerError::EmptyBelief);
    }
    let mut model = RoundaboutModel::new(&agent.path, &agent.rewards, agent.transition);
    if agent.planner.absorbing_crash {
        model = model.with_absorbing_crash(T::lit(agent.planner.discount));
    }
    if agent.planner.region_switching {
        model = model.with_region_switching(&agent.layout);
    }
    if let Some(d) = &agent.rollout_driver {
        model = model.with_driver(&agent.layout, d);
    }
    let a_prev = h.actions().last().map_or(T::zero(), |a| a.accel);
    let sample = |rng: &mut ChaCha8Rng| {
        let mut s = sample_state_with(b, rng);
        s.a_prev = a_prev;
        s
    };
    let (best, stats, _) = search_with(&model, sample, &agent.planner, seed)?;
    let action = match best {
        Some(i) => ActionCommand::from_index(i),
        None => {
            log::warn!("search ran no simulations; coasting");
            ActionCommand::from_index(COAST_ACTION)
        }
    };
    Ok((action, stats))
}

/// Real world the decision loop acts in.
pub trait Environment<T> {
    /// Applies the ego acceleration for one decision period and returns the
    /// unlabelled observation that follows.
    fn apply(&mut self, action: &ActionCommand<T>) -> Observation<T>;
}

#[derive(Debug, Clone)]
pub struct CycleOutcome<T> {
    pub chosen: ActionCommand<T>,
    pub applied: ActionCommand<T>,
    pub observation: Observation<T>,
    pub stats: SearchStats,
}

/// Agent-side memory carried between decisions.
#[derive(Debug, Clone)]
pub struct DecisionState<T> {
    pub history: History<T>,
    pub belief: FactoredBelief<T>,
    pub a_prev: T,
}

impl<T: Real> DecisionState<T> {
    pub fn new(belief: FactoredBelief<T>) -> Self {
        Self {
            history: History::new(belief.clone()),
            belief,
            a_prev: T::zero(),
        }
    }
}

/// Search, jerk-limit, act, predict policies, augment, update the belief, extend the history.
pub fn decision_cycle<T: Real>(
    agent: &Agent<T>,
    state: DecisionState<T>,
    env: &mut dyn Environment<T>,
    seed: u64,
) -> Result<(DecisionState<T>, CycleOutcome<T>), PlannerError> {
    let (chosen, stats) = search(agent, &state.history, &state.belief, seed)?;
    let applied = ActionCommand::new(clamp_jerk(chosen.accel, state.a_prev, agent.rewards.j_max));
    let raw = env.apply(&applied);
    let (next, augmented) = absorb(agent, state, applied, raw)?;
    Ok((
        next,
        CycleOutcome {
            chosen,
            applied,
            observation: augmented,
            stats,
        },
    ))
}

/// Records an observation made without acting, e.g. while waiting to depart.
pub fn observe_only<T: Real>(
    agent: &Agent<T>,
    state: DecisionState<T>,
    raw: Observation<T>,
) -> Result<DecisionState<T>, PlannerError> {
    let a_prev = state.a_prev;
    let (mut next, _) = absorb(agent, state, ActionCommand::new(a_prev), raw)?;
    next.a_prev = a_prev;
    Ok(next)
}

/// Extends the history, labels the observation and updates the belief.
fn absorb<T: Real>(
    agent: &Agent<T>,
    state: DecisionState<T>,
    applied: ActionCommand<T>,
    raw: Observation<T>,
) -> Result<(DecisionState<T>, Observation<T>), PlannerError> {
    // the raw observation goes into the history so prediction sees this step too
    let history = append_history(state.history, applied, raw.clone());
    let policies = &state.belief.policies;
    let predictions = raw
        .others
        .iter()
        .map(|o| {
            let p = if agent.predict {
                predict_policy(&history, o.id, &agent.layout, policies, &agent.prediction)?
            } else {
                policies.default_policy()
            };
            Ok((o.id, p))
        })
        .collect::<Result<Vec<_>, PredictionError>>()?;
    let augmented = augment_observation(&raw, &predictions)?;
    let belief = if agent.predict {
        update_belief(&state.belief, &applied, &augmented, &agent.observation_model)?
    } else {
        point_belief(&state.belief, &augmented)
    };
    Ok((
        DecisionState {
            history,
            belief,
            a_prev: applied.accel,
        },
        augmented,
    ))
}

/// Belief that puts all policy mass on each object's label.
fn point_belief<T: Real>(b: &FactoredBelief<T>, o: &Observation<T>) -> FactoredBelief<T> {
    let mut objects: Vec<_> = o
        .others
        .iter()
        .map(|obj| {
            let kind = obj.policy.map_or(b.policies.default_kind, |p| p.kind);
            let mut probs = [T::zero(); 3];
            probs[kind.index()] = T::one();
            crate::pomdp::ObjectBelief {
                id: obj.id,
                state: obj.state,
                policy_probs: probs,
            }
        })
        .collect();
    objects.sort_by_key(|o| o.id);
    FactoredBelief {
        ego: o.ego,
        ego_station: o.ego_station,
        policies: b.policies.clone(),
        objects,
    }
}

/// Policy kinds the decision loop attached to the latest observation.
pub fn labelled_kinds<T: Real>(o: &Observation<T>) -> Vec<Option<PolicyKind>> {
    o.others.iter().map(|x| x.policy.map(|p| p.kind)).collect()
}
