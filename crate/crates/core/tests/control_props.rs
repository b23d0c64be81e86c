use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softrod_core::control::{control_points, ActuationState, ControlConfig, ControlMode};

#[test]
fn ramp_midpoint_example() {
    let cfg = ControlConfig { n_control_points: 1, delta_limit: 0.2, ..ControlConfig::new(ControlMode::Bend2d, 10) };
    let mut act = ActuationState::new(cfg, 3).unwrap();
    // One interior node, one control point, full weight.
    act.apply_action(&[1.0]).unwrap();
    let (k, _) = act.interp_targets(4).unwrap();
    assert!((k[0][0] - 0.1).abs() < 1e-15);
    let (k, _) = act.interp_targets(9).unwrap();
    assert_eq!(k[0][0], 0.2);
    assert!(act.interp_targets(10).is_err());
}

#[test]
fn single_point_region_gains_delta_limit() {
    let cfg = ControlConfig::new(ControlMode::Bend3d, 2);
    for k in 0..5 {
        let mut act = ActuationState::new(cfg, 21).unwrap();
        let mut a = vec![0.0; 10];
        a[k] = 1.0;
        act.apply_action(&a).unwrap();
        // Oracle: sum the κ̄1 gain over every interior node.
        let total: f64 = act.kappa.iter().map(|v| v[0]).sum();
        assert!((total - 0.1).abs() < 1e-12);
        let touched: Vec<usize> = (0..19).filter(|&i| act.kappa[i][0] != 0.0).collect();
        let p = control_points(21, 5)[k];
        assert!(touched.contains(&(p - 1)));
        assert!(act.kappa.iter().all(|v| v[1] == 0.0));
    }
}

#[test]
fn accumulated_targets_stay_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for mode in [ControlMode::Bend2d, ControlMode::Bend3d, ControlMode::Bend3dTwist] {
        let cfg = ControlConfig { delta_limit: 0.7, ..ControlConfig::new(mode, 2) };
        let mut act = ActuationState::new(cfg, 21).unwrap();
        let dim = cfg.action_dim();
        for step in 0..100_000 {
            if step % 1000 == 0 {
                act.reset();
            }
            // Biased actions drive targets into the bound.
            let bias = if (step / 1000) % 2 == 0 { 0.8 } else { -0.8 };
            let a: Vec<f64> = (0..dim).map(|_| bias + rng.random_range(-1.5..1.5)).collect();
            act.apply_action(&a).unwrap();
            assert!(act.max_abs() <= cfg.kappa_bound);
        }
    }
}

proptest! {
    #[test]
    fn ramp_lies_on_segment_and_is_monotone(
        prev in prop::collection::vec(-1.0f64..1.0, 5),
        next in prop::collection::vec(-1.0f64..1.0, 5),
        period in 1usize..30,
    ) {
        let cfg = ControlConfig { n_control_points: 5, delta_limit: 1.0, ..ControlConfig::new(ControlMode::Bend2d, period) };
        let mut act = ActuationState::new(cfg, 7).unwrap();
        act.apply_action(&prev).unwrap();
        let start = act.kappa.clone();
        act.apply_action(&next).unwrap();
        let end = act.kappa.clone();
        let mut last = start.clone();
        for s in 0..period {
            let (k, _) = act.interp_targets(s).unwrap();
            let f = (s + 1) as f64 / period as f64;
            for i in 0..k.len() {
                let want = start[i][0] + f * (end[i][0] - start[i][0]);
                prop_assert!((k[i][0] - want).abs() <= 1e-12);
                let lo = start[i][0].min(end[i][0]) - 1e-12;
                let hi = start[i][0].max(end[i][0]) + 1e-12;
                prop_assert!(k[i][0] >= lo && k[i][0] <= hi);
                let dir = end[i][0] - start[i][0];
                prop_assert!((k[i][0] - last[i][0]) * dir >= -1e-12);
            }
            last = k;
        }
    }
}
