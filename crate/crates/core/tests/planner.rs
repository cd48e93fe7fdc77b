use proptest::prelude::*;
use roundabout_core::dynamics::{DrivingPolicy, EgoState, OtherVehicleState, PolicyKind};
use roundabout_core::geometry::{PathSpec, Point2, RoundaboutLayout};
use roundabout_core::planner::*;
use roundabout_core::pomdp::*;
use roundabout_core::rewards::RewardConfig;

const HORIZON: usize = 4;

fn road() -> PathSpec<f64> {
    PathSpec::straight(Point2::new(0.0, 0.0), 0.0, 300.0).unwrap()
}

fn start(v: f64) -> JointState<f64> {
    JointState {
        ego: EgoState::new(0.0, 0.0, 0.0, v, 0.0),
        ego_station: 0.0,
        target_reached: false,
        crashed: false,
        a_prev: 0.0,
        others: vec![],
    }
}

/// Best discounted return over every action sequence of length `depth` from `s`.
fn best_value(m: &RoundaboutModel<f64>, s: &JointState<f64>, depth: usize, gamma: f64) -> f64 {
    if depth == 0 {
        return 0.0;
    }
    (0..m.num_actions())
        .map(|a| action_value(m, s, a, depth, gamma))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn action_value(m: &RoundaboutModel<f64>, s: &JointState<f64>, a: usize, depth: usize, gamma: f64) -> f64 {
    let t = m.step(s, a);
    let rest = if t.terminal { 0.0 } else { best_value(m, &t.next, depth - 1, gamma) };
    t.reward + gamma * rest
}

fn toy_config(sims: u64) -> PlannerConfig {
    PlannerConfig {
        max_depth: HORIZON,
        budget: Budget::Simulations(sims),
        ..PlannerConfig::default()
    }
}

#[test]
fn search_finds_the_enumerated_optimum_on_an_empty_road() {
    let path = road();
    let rewards = RewardConfig::default();
    let m = RoundaboutModel::new(&path, &rewards, OtherTransition::PolicyBased);
    let s0 = start(3.0);
    let cfg = toy_config(10_000);
    let q: Vec<f64> = (0..7).map(|a| action_value(&m, &s0, a, HORIZON, cfg.discount)).collect();
    let v_star = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(v_star.abs() > 1.0, "degenerate toy problem");
    let good = (0..20u64)
        .filter(|&seed| {
            let (best, _, _) = search_with(&m, |_| s0.clone(), &cfg, seed).unwrap();
            (q[best.unwrap()] - v_star).abs() <= 0.01 * v_star.abs()
        })
        .count();
    assert!(good >= 19, "{good}/20 seeds optimal");
}

#[test]
fn doubling_the_budget_does_not_lower_the_median_value() {
    let path = road();
    let rewards = RewardConfig::default();
    let m = RoundaboutModel::new(&path, &rewards, OtherTransition::PolicyBased);
    let s0 = start(3.0);
    let median_value = |sims: u64| {
        let cfg = toy_config(sims);
        let mut values: Vec<f64> = (0..20u64)
            .map(|seed| {
                let (best, _, _) = search_with(&m, |_| s0.clone(), &cfg, seed).unwrap();
                action_value(&m, &s0, best.unwrap_or(COAST_ACTION), HORIZON, cfg.discount)
            })
            .collect();
        values.sort_by(f64::total_cmp);
        (values[9] + values[10]) / 2.0
    };
    let mut previous = median_value(25);
    for sims in [50, 100, 200, 400] {
        let now = median_value(sims);
        assert!(now >= previous - 1e-9, "{sims} sims: {now} < {previous}");
        previous = now;
    }
}

#[test]
fn single_action_model_returns_that_action() {
    struct One;
    impl GenerativeModel for One {
        type State = ();
        fn num_actions(&self) -> usize {
            1
        }
        fn step(&self, _: &(), _: usize) -> Transition<()> {
            Transition {
                next: (),
                obs_key: 0,
                reward: -1.0,
                terminal: false,
            }
        }
    }
    let (best, _, _) = search_with(&One, |_| (), &toy_config(50), 0).unwrap();
    assert_eq!(best, Some(0));
}

fn arb_others() -> impl Strategy<Value = Vec<(f64, f64, f64, f64, usize)>> {
    prop::collection::vec((-40.0..40.0f64, -40.0..40.0f64, 0.0..6.2f64, 0.0..10.0f64, 0..3usize), 0..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn tree_statistics_stay_consistent(
        others in arb_others(),
        v0 in 0.0..10.0f64,
        exploration in 0.0..4.0f64,
        discount in 0.5..0.999f64,
        max_depth in 1..15usize,
        sims in 1..300u64,
        guided in any::<bool>(),
        plain in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let layout = RoundaboutLayout::four_way();
        let path = layout.build_path(3, 1).unwrap();
        let rewards = RewardConfig::default();
        let transition = if plain { OtherTransition::ConstantVelocity } else { OtherTransition::PolicyBased };
        let m = RoundaboutModel::new(&path, &rewards, transition);
        let (p, heading) = path.pose_at(10.0);
        let s0 = JointState {
            ego: EgoState::new(p.x, p.y, heading, v0, 0.0),
            ego_station: 10.0,
            target_reached: false,
            crashed: false,
            a_prev: 0.0,
            others: others
                .iter()
                .enumerate()
                .map(|(i, &(x, y, th, v, k))| {
                    let policy = DrivingPolicy::for_layout(PolicyKind::ALL[k], &layout);
                    (ObjectId(i as u32 + 1), AugmentedOtherState { base: OtherVehicleState::new(x, y, th, v), policy })
                })
                .collect(),
        };
        let cfg = PlannerConfig {
            exploration,
            discount,
            max_depth,
            budget: Budget::Simulations(sims),
            rollout: if guided { RolloutPolicy::Guided } else { RolloutPolicy::UniformRandom },
            ..PlannerConfig::default()
        };
        let (_, stats, tree) = search_with(&m, |_| s0.clone(), &cfg, seed).unwrap();
        prop_assert!(tree.visit_counts_conserved());
        prop_assert!(tree.max_mean_error() < 1e-9);
        prop_assert_eq!(stats.simulations, sims);
        prop_assert_eq!(tree.root().visits, sims - stats.rollout_only);

        let v_max = v0 + 2.5 * max_depth as f64;
        let (r_min, r_max) = m.step_reward_bounds(v_max);
        prop_assert!(stats.min_return >= discounted_bound(r_min, discount, max_depth) - 1e-6);
        prop_assert!(stats.max_return <= discounted_bound(r_max, discount, max_depth) + 1e-6);
    }
}
