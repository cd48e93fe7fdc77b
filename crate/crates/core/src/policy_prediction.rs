//! Driving-policy prediction from observation histories.
//!
//! A trailing window of observations is cut at its last change point and the
//! remaining run gives a yaw-rate estimate, which is compared with the yaw
//! rate each candidate policy would produce at the observed speed. The region of the latest position adds a small bonus, so
//! it decides only when the speed is too low for the yaw rate to tell the
//! policies apart.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DrivingPolicy, OtherVehicleState, PolicyKind};
use crate::geometry::RoundaboutLayout;
use crate::pomdp::{History, ObjectId, Observation};
use crate::scalar::{wrap_to_pi, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictionError {
    #[error("need at least two observations, got {0}")]
    TooFewObservations(usize),
    #[error("object {0} never appears in the history")]
    UnknownObject(ObjectId),
    #[error("no prediction supplied for object {0}")]
    MissingPrediction(ObjectId),
    #[error("invalid prediction config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySet<T> {
    /// Indexed by [`PolicyKind::index`].
    pub policies: [DrivingPolicy<T>; 3],
    pub default_kind: PolicyKind,
}

impl<T: Real> PolicySet<T> {
    /// The three policies for a layout, defaulting to `Straight`.
    pub fn from_layout(layout: &RoundaboutLayout<T>) -> Self {
        Self {
            policies: PolicyKind::ALL.map(|k| DrivingPolicy::for_layout(k, layout)),
            default_kind: PolicyKind::Straight,
        }
    }

    pub fn get(&self, kind: PolicyKind) -> DrivingPolicy<T> {
        self.policies[kind.index()]
    }

    pub fn default_policy(&self) -> DrivingPolicy<T> {
        self.get(self.default_kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictionConfig<T> {
    /// Number of trailing observations used; fewer than `window + 1` yields the default.
    pub window: usize,
    /// Yaw-rate band treated as "no turning" (rad/s).
    pub zero_band: T,
    /// Region bonus as a fraction of `zero_band`.
    pub region_weight: T,
    /// Spacing of the observations in the history (s).
    pub observation_dt: T,
}

impl<T: Real> Default for PredictionConfig<T> {
    fn default() -> Self {
        Self {
            window: 5,
            zero_band: T::lit(0.05),
            region_weight: T::lit(0.5),
            observation_dt: T::one(),
        }
    }
}

impl<T: Real> PredictionConfig<T> {
    pub fn validate(&self) -> Result<(), PredictionError> {
        if self.window < 2 {
            return Err(PredictionError::InvalidConfig(format!("window {} < 2", self.window)));
        }
        if !(self.zero_band > T::zero()) || !(self.observation_dt > T::zero()) {
            return Err(PredictionError::InvalidConfig("thresholds and dt must be positive".into()));
        }
        if !(self.region_weight >= T::zero()) || !(self.region_weight < T::one()) {
            return Err(PredictionError::InvalidConfig("region weight must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Mean of the wrapped successive heading differences, divided by `dt`.
pub fn estimate_yaw_rate<T: Real>(observations: &[OtherVehicleState<T>], dt: T) -> Result<T, PredictionError> {
    if observations.len() < 2 {
        return Err(PredictionError::TooFewObservations(observations.len()));
    }
    let total: T = observations
        .windows(2)
        .map(|w| wrap_to_pi(w[1].theta - w[0].theta))
        .sum();
    Ok(total / (T::lit((observations.len() - 1) as f64) * dt))
}

/// Length of the trailing run of per-step yaw rates that agree with their
/// own running mean to within `band`. A manoeuvre change inside the window
/// ends the run, so only the current manoeuvre is scored.
pub fn trailing_segment<T: Real>(rates: &[T], band: T) -> usize {
    let Some(&last) = rates.last() else {
        return 0;
    };
    let mut sum = last;
    let mut n = 1;
    for &r in rates[..rates.len() - 1].iter().rev() {
        let mean = sum / T::lit(n as f64);
        if (r - mean).abs() > band {
            break;
        }
        sum += r;
        n += 1;
    }
    n
}

/// Classifies a window of observations that is already known to be long enough.
pub fn classify_window<T: Real>(
    window: &[OtherVehicleState<T>],
    layout: &RoundaboutLayout<T>,
    policies: &PolicySet<T>,
    cfg: &PredictionConfig<T>,
) -> Result<DrivingPolicy<T>, PredictionError> {
    if window.len() < 2 {
        return Err(PredictionError::TooFewObservations(window.len()));
    }
    let rates: Vec<T> = window
        .windows(2)
        .map(|w| wrap_to_pi(w[1].theta - w[0].theta) / cfg.observation_dt)
        .collect();
    let n = trailing_segment(&rates, cfg.zero_band);
    let segment = &window[window.len() - 1 - n..];
    let w_est = estimate_yaw_rate(segment, cfg.observation_dt)?;
    // speed over the transitions that produced the heading changes
    let v_mean = segment[..n].iter().map(|s| s.v).sum::<T>() / T::lit(n as f64);
    let latest = segment[n].position();
    let region = layout.classify_region(latest).ok().map(PolicyKind::for_region);
    let bonus = cfg.region_weight * cfg.zero_band;
    let mut best = policies.default_policy();
    let mut best_cost = T::infinity();
    for kind in PolicyKind::ALL {
        let p = policies.get(kind);
        let mut cost = (w_est - v_mean * p.curvature).abs();
        if region == Some(kind) {
            cost -= bonus;
        }
        if cost < best_cost {
            best_cost = cost;
            best = p;
        }
    }
    Ok(best)
}

/// Most recent driving policy of one object, or the default during warm-up.
pub fn predict_policy<T: Real>(
    h: &History<T>,
    object_id: ObjectId,
    layout: &RoundaboutLayout<T>,
    policies: &PolicySet<T>,
    cfg: &PredictionConfig<T>,
) -> Result<DrivingPolicy<T>, PredictionError> {
    let obs = h.object_observations(object_id);
    if obs.is_empty() {
        return Err(PredictionError::UnknownObject(object_id));
    }
    if obs.len() <= cfg.window {
        return Ok(policies.default_policy());
    }
    classify_window(&obs[obs.len() - cfg.window..], layout, policies, cfg)
}

/// Attaches a policy label to every object; pose and speed are untouched.
pub fn augment_observation<T: Real>(
    o: &Observation<T>,
    predictions: &[(ObjectId, DrivingPolicy<T>)],
) -> Result<Observation<T>, PredictionError> {
    let mut out = o.clone();
    for obj in &mut out.others {
        let (_, p) = predictions
            .iter()
            .find(|(id, _)| *id == obj.id)
            .ok_or(PredictionError::MissingPrediction(obj.id))?;
        obj.policy = Some(*p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{step_policy, EgoState};
    use crate::pomdp::{append_history, ActionCommand, FactoredBelief, ObjectObservation};

    fn th(theta: f64) -> OtherVehicleState<f64> {
        OtherVehicleState::new(0.0, 0.0, theta, 1.0)
    }

    #[test]
    fn yaw_rate_examples() {
        assert_eq!(estimate_yaw_rate(&[th(1.0), th(1.0), th(1.0)], 0.1).unwrap(), 0.0);
        let w = estimate_yaw_rate(&[th(0.0), th(0.03), th(0.06)], 0.1).unwrap();
        assert!((w - 0.3).abs() < 1e-12);
        let w = estimate_yaw_rate(&[th(6.27), th(0.01)], 0.1).unwrap();
        let expected = (0.01 + std::f64::consts::TAU - 6.27) / 0.1;
        assert!((w - expected).abs() < 1e-9 && w > 0.2);
        assert_eq!(
            estimate_yaw_rate(&[th(0.0)], 0.1).unwrap_err(),
            PredictionError::TooFewObservations(1)
        );
    }

    fn history_of(states: &[OtherVehicleState<f64>], policies: &PolicySet<f64>) -> History<f64> {
        let mut h = History::new(FactoredBelief::ego_only(EgoState::default(), 0.0, policies.clone()));
        for s in states {
            let o = Observation {
                ego: EgoState::default(),
                ego_station: 0.0,
                others: vec![ObjectObservation {
                    id: ObjectId(1),
                    state: *s,
                    policy: None,
                }],
            };
            h = append_history(h, ActionCommand::coast(), o);
        }
        h
    }

    fn rollout(start: OtherVehicleState<f64>, p: DrivingPolicy<f64>, n: usize) -> Vec<OtherVehicleState<f64>> {
        let mut out = vec![start];
        for _ in 1..n {
            let next = step_policy(out.last().unwrap(), &p, 1.0).unwrap();
            out.push(next);
        }
        out
    }

    #[test]
    fn warm_up_returns_default() {
        let layout = RoundaboutLayout::four_way();
        let set = PolicySet::from_layout(&layout);
        let cfg = PredictionConfig::default();
        let circ = set.get(PolicyKind::Circulate);
        let states = rollout(OtherVehicleState::new(20.0, 0.0, std::f64::consts::FRAC_PI_2, 5.0), circ, 5);
        let h = history_of(&states, &set);
        assert_eq!(predict_policy(&h, ObjectId(1), &layout, &set, &cfg).unwrap(), set.default_policy());
        assert_eq!(
            predict_policy(&h, ObjectId(9), &layout, &set, &cfg).unwrap_err(),
            PredictionError::UnknownObject(ObjectId(9))
        );
    }

    #[test]
    fn recovers_ring_and_straight() {
        let layout = RoundaboutLayout::four_way();
        let set = PolicySet::from_layout(&layout);
        let cfg = PredictionConfig::default();
        let circ = set.get(PolicyKind::Circulate);
        let states = rollout(OtherVehicleState::new(20.0, 0.0, std::f64::consts::FRAC_PI_2, 3.0), circ, 8);
        let h = history_of(&states, &set);
        assert_eq!(predict_policy(&h, ObjectId(1), &layout, &set, &cfg).unwrap(), circ);

        let states = rollout(OtherVehicleState::new(65.0, -2.0, std::f64::consts::PI, 2.0), DrivingPolicy::straight(), 8);
        let h = history_of(&states, &set);
        assert_eq!(
            predict_policy(&h, ObjectId(1), &layout, &set, &cfg).unwrap().kind,
            PolicyKind::Straight
        );
    }

    #[test]
    fn augmentation_overwrites_only_policy() {
        let layout = RoundaboutLayout::four_way();
        let set = PolicySet::from_layout(&layout);
        let o = Observation {
            ego: EgoState::default(),
            ego_station: 0.0,
            others: vec![ObjectObservation {
                id: ObjectId(4),
                state: OtherVehicleState::new(1.25, -3.5, 0.7, 4.0),
                policy: None,
            }],
        };
        let preds = [(ObjectId(4), set.get(PolicyKind::Straight))];
        let a = augment_observation(&o, &preds).unwrap();
        assert_eq!(a.others[0].policy.unwrap().kind, PolicyKind::Straight);
        assert_eq!(a.others[0].state, o.others[0].state);
        assert_eq!(augment_observation(&a, &preds).unwrap(), a);
        assert_eq!(
            augment_observation(&o, &[]).unwrap_err(),
            PredictionError::MissingPrediction(ObjectId(4))
        );
    }

    #[test]
    fn segment_stops_at_change_point() {
        assert_eq!(trailing_segment(&[0.0, 0.0, 0.9, 0.9], 0.05), 2);
        assert_eq!(trailing_segment(&[0.3, 0.3, 0.3], 0.05), 3);
        assert_eq!(trailing_segment::<f64>(&[], 0.05), 0);
    }

    #[test]
    fn reacts_one_step_after_ring_entry() {
        let layout = RoundaboutLayout::four_way();
        let set = PolicySet::from_layout(&layout);
        let cfg = PredictionConfig::default();
        let circ = set.get(PolicyKind::Circulate);
        let mut states = rollout(OtherVehicleState::new(-40.0, -2.0, 0.0, 6.0), DrivingPolicy::straight(), 5);
        let ring = rollout(OtherVehicleState::new(-20.0, 0.0, -std::f64::consts::FRAC_PI_2, 6.0), circ, 3);
        states.extend(ring);
        let h = history_of(&states, &set);
        assert_eq!(predict_policy(&h, ObjectId(1), &layout, &set, &cfg).unwrap(), circ);
    }

    #[test]
    fn config_validation() {
        let mut c = PredictionConfig::<f64>::default();
        c.validate().unwrap();
        c.window = 1;
        assert!(c.validate().is_err());
    }
}
