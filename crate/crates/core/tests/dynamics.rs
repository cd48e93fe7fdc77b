use std::f64::consts::TAU;

use proptest::prelude::*;
use roundabout_core::dynamics::*;
use roundabout_core::geometry::RoundaboutLayout;

fn in_range(theta: f64) -> bool {
    (0.0..TAU).contains(&theta)
}

fn arb_other() -> impl Strategy<Value = OtherVehicleState<f64>> {
    (-100.0..100.0f64, -100.0..100.0f64, -10.0..10.0f64, 0.0..20.0f64)
        .prop_map(|(x, y, th, v)| OtherVehicleState::new(x, y, th, v))
}

fn arb_policy() -> impl Strategy<Value = DrivingPolicy<f64>> {
    prop::sample::select(PolicyKind::ALL.to_vec())
        .prop_map(|k| DrivingPolicy::for_layout(k, &RoundaboutLayout::four_way()))
}

proptest! {
    #[test]
    fn ego_step_wraps_heading_and_never_reverses(
        x in -100.0..100.0f64, th in -10.0..10.0f64, v in 0.0..20.0f64,
        a in -9.0..3.0f64, w in -2.0..2.0f64, dt in 0.01..1.0f64,
    ) {
        let s = EgoState::new(x, 0.0, th, v, 0.0);
        let n = step_ego(&s, a, w, dt).unwrap();
        prop_assert!(in_range(n.theta));
        prop_assert!(n.v >= 0.0);
        prop_assert_eq!(n.w, w);
    }

    #[test]
    fn policy_step_wraps_heading(s in arb_other(), p in arb_policy(), dt in 0.01..1.0f64) {
        let n = step_policy(&s, &p, dt).unwrap();
        prop_assert!(in_range(n.theta));
        prop_assert_eq!(n.v, s.v);
    }

    #[test]
    fn straight_policy_equals_constant_model(s in arb_other(), dt in 0.01..1.0f64) {
        let a = step_policy(&s, &DrivingPolicy::straight(), dt).unwrap();
        let b = step_constant(&s, dt).unwrap();
        prop_assert_eq!(a.x.to_bits(), b.x.to_bits());
        prop_assert_eq!(a.y.to_bits(), b.y.to_bits());
        prop_assert_eq!(a.v.to_bits(), b.v.to_bits());
    }

    #[test]
    fn constant_turn_closes_its_circle(v in 1.0..15.0f64, w in prop_oneof![-1.0..-0.05f64, 0.05..1.0f64]) {
        let dt = 0.1;
        let n = (TAU / (w.abs() * dt)).round() as usize;
        let start = EgoState::new(3.0, -2.0, 1.0, v, w);
        let mut s = start;
        for _ in 0..n {
            s = step_ego(&s, 0.0, w, dt).unwrap();
        }
        let dtheta = (s.theta - start.theta).rem_euclid(TAU);
        prop_assert!(dtheta.min(TAU - dtheta) <= w.abs() * dt + 1e-9);
        let gap = ((s.x - start.x).powi(2) + (s.y - start.y).powi(2)).sqrt();
        prop_assert!(gap <= 2.0 * v * dt + 1e-9, "gap {}", gap);
    }

    #[test]
    fn idm_stays_within_its_bounds(
        gap in 0.1..200.0f64, v in 0.0..20.0f64, v_lead in 0.0..20.0f64, v0 in 3.0..20.0f64,
    ) {
        let p = IdmParams::with_desired_speed(v0);
        let a = idm_acceleration(gap, v, v_lead, &p).unwrap();
        prop_assert!(a <= p.max_accel);
        prop_assert!(a >= -p.physical_brake);
    }

    #[test]
    fn idm_equilibrium_is_stationary(v in 0.5..9.5f64) {
        let p = IdmParams::with_desired_speed(10.0);
        let a = idm_acceleration(p.equilibrium_gap(v), v, v, &p).unwrap();
        prop_assert!(a.abs() < 1e-6, "a = {}", a);
    }
}

#[test]
fn ring_heading_change_telescopes() {
    let p = DrivingPolicy::for_layout(PolicyKind::Circulate, &RoundaboutLayout::four_way());
    let start = OtherVehicleState::new(20.0, 0.0, std::f64::consts::FRAC_PI_2, 6.0);
    let traj = simulate_path_follow(&start, &vec![p; 100], 0.1).unwrap();
    assert_eq!(traj.len(), 101);
    let expected = 100.0 * 6.0 * 0.1 / 20.0;
    let turned = (traj[100].theta - start.theta).rem_euclid(TAU);
    assert!((turned - expected).abs() < 1e-9);
}
