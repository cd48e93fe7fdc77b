use proptest::prelude::*;
use roundabout_core::dynamics::{step_policy, EgoState, OtherVehicleState, PolicyKind};
use roundabout_core::geometry::RoundaboutLayout;
use roundabout_core::policy_prediction::*;
use roundabout_core::pomdp::*;

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

fn trajectory(kind: PolicyKind, start: OtherVehicleState<f64>, len: usize, set: &PolicySet<f64>, dt: f64) -> Vec<OtherVehicleState<f64>> {
    let p = set.get(kind);
    let mut out = vec![start];
    while out.len() < len {
        out.push(step_policy(out.last().unwrap(), &p, dt).unwrap());
    }
    out
}

fn arb_start() -> impl Strategy<Value = OtherVehicleState<f64>> {
    (-70.0..70.0f64, -70.0..70.0f64, 0.0..6.28f64, 1.0..10.0f64).prop_map(|(x, y, th, v)| OtherVehicleState::new(x, y, th, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn full_window_recovers_the_generating_policy(
        kind in prop::sample::select(PolicyKind::ALL.to_vec()),
        start in arb_start(),
        extra in 1..6usize,
    ) {
        let layout = RoundaboutLayout::four_way();
        let set = PolicySet::from_layout(&layout);
        let cfg = PredictionConfig::default();
        let states = trajectory(kind, start, cfg.window + extra, &set, cfg.observation_dt);
        let h = history_of(&states, &set);
        let got = predict_policy(&h, ObjectId(1), &layout, &set, &cfg).unwrap();
        prop_assert_eq!(got, set.get(kind));
    }

    #[test]
    fn short_histories_get_the_default(
        kind in prop::sample::select(PolicyKind::ALL.to_vec()),
        start in arb_start(),
        len in 1..=5usize,
    ) {
        let layout = RoundaboutLayout::four_way();
        let set = PolicySet::from_layout(&layout);
        let cfg = PredictionConfig::default();
        prop_assert!(len <= cfg.window);
        let h = history_of(&trajectory(kind, start, len, &set, cfg.observation_dt), &set);
        prop_assert_eq!(predict_policy(&h, ObjectId(1), &layout, &set, &cfg).unwrap(), set.default_policy());
    }
}
