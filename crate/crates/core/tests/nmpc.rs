use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taskmarket_core::nmpc::{
    euler_step, objective, penalized_objective, penalized_objective_and_gradient, reference_along_path, rollout,
    solve, total_violation, violation, ObstacleDisc, TrackingProblem,
};
use taskmarket_core::{ControlInput, NmpcConfig, Point, Pose};

fn random_instance(rng: &mut ChaCha8Rng) -> (NmpcConfig, Pose, Vec<Pose>, ControlInput, Vec<ObstacleDisc>, Vec<ControlInput>) {
    let n = rng.gen_range(3..30);
    let config = NmpcConfig {
        horizon: n,
        q_pos: rng.gen_range(0.5..20.0),
        q_heading: rng.gen_range(0.0..2.0),
        r_v: rng.gen_range(0.1..3.0),
        r_omega: rng.gen_range(0.1..3.0),
        r_dv: rng.gen_range(0.0..8.0),
        r_domega: rng.gen_range(0.0..4.0),
        q_terminal: rng.gen_range(0.0..30.0),
        ..NmpcConfig::default()
    };
    let x0 = Pose {
        x: rng.gen_range(-1.0..1.0),
        y: rng.gen_range(-1.0..1.0),
        heading: rng.gen_range(-3.0..3.0),
    };
    let reference: Vec<Pose> = (0..n)
        .map(|j| Pose {
            x: x0.x + 0.02 * j as f64 + rng.gen_range(-0.1..0.1),
            y: x0.y + rng.gen_range(-0.1..0.1),
            heading: rng.gen_range(-3.0..3.0),
        })
        .collect();
    let u_prev = ControlInput::new(rng.gen_range(-0.22..0.22), rng.gen_range(-2.0..2.0));
    let inputs: Vec<ControlInput> = (0..n)
        .map(|_| ControlInput::new(rng.gen_range(-0.22..0.22), rng.gen_range(-2.84..2.84)))
        .collect();
    let states = rollout(x0, &inputs, config.ts);
    let obstacles = (0..rng.gen_range(0..4))
        .map(|_| ObstacleDisc {
            // Centers near the rollout so the penalty is active on some steps.
            centers: states
                .iter()
                .map(|s| Point::new(s.x + rng.gen_range(-0.35..0.35), s.y + rng.gen_range(-0.35..0.35)))
                .collect(),
            radius: 0.3,
        })
        .collect();
    (config, x0, reference, u_prev, obstacles, inputs)
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (config, x0, reference, u_prev, obstacles, inputs) = random_instance(&mut rng);
        let mu = rng.gen_range(0.0..2000.0);
        let problem = TrackingProblem {
            x0,
            reference: &reference,
            u_prev,
            obstacles: &obstacles,
        };
        let (f, grad) = penalized_objective_and_gradient(&inputs, &problem, &config, mu);
        assert_eq!(f, penalized_objective(&inputs, &problem, &config, mu));
        let h = 1e-6;
        let mut num = vec![0.0; grad.len()];
        for k in 0..grad.len() {
            let mut plus = inputs.clone();
            let mut minus = inputs.clone();
            if k % 2 == 0 {
                plus[k / 2].v += h;
                minus[k / 2].v -= h;
            } else {
                plus[k / 2].omega += h;
                minus[k / 2].omega -= h;
            }
            num[k] = (penalized_objective(&plus, &problem, &config, mu) - penalized_objective(&minus, &problem, &config, mu))
                / (2.0 * h);
        }
        let diff: f64 = grad.iter().zip(&num).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let scale: f64 = num.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-12);
        let rel = diff / scale;
        worst = worst.max(rel);
        assert!(rel < 1e-5, "relative gradient error {rel}");
    }
    assert!(worst < 1e-5);
}

#[test]
fn unpenalized_objective_is_the_mu_zero_case() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let (config, x0, reference, u_prev, obstacles, inputs) = random_instance(&mut rng);
        let problem = TrackingProblem {
            x0,
            reference: &reference,
            u_prev,
            obstacles: &obstacles,
        };
        assert_eq!(objective(&inputs, &problem, &config), penalized_objective(&inputs, &problem, &config, 0.0));
    }
}

#[test]
fn solver_outputs_stay_in_the_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let (mut config, x0, reference, u_prev, obstacles, _) = random_instance(&mut rng);
        config.inner_max_iterations = 60;
        // Far references drive the unconstrained optimum outside the box.
        let far: Vec<Pose> = reference.iter().map(|p| Pose { x: p.x + 5.0, ..*p }).collect();
        let problem = TrackingProblem {
            x0,
            reference: &far,
            u_prev,
            obstacles: &obstacles,
        };
        let sol = solve(&problem, &config, &[]).unwrap();
        for u in &sol.inputs {
            assert!(u.v >= config.u_min.v && u.v <= config.u_max.v);
            assert!(u.omega >= config.u_min.omega && u.omega <= config.u_max.omega);
        }
        assert!(sol.inputs.iter().any(|u| u.v == config.u_max.v || u.v == config.u_min.v));
        assert_eq!(sol.states, rollout(x0, &sol.inputs, config.ts));
    }
}

fn step_by_hand(x: Pose, u: ControlInput, ts: f64) -> Pose {
    let mut heading = x.heading + ts * u.omega;
    heading = libm::remainder(heading, 2.0 * std::f64::consts::PI);
    if heading <= -std::f64::consts::PI {
        heading += 2.0 * std::f64::consts::PI;
    }
    Pose {
        x: x.x + ts * libm::cos(x.heading) * u.v,
        y: x.y + ts * libm::sin(x.heading) * u.v,
        heading,
    }
}

proptest! {
    #[test]
    fn rollout_is_the_euler_recurrence(
        x in -5.0f64..5.0, y in -5.0f64..5.0, h in -3.1f64..3.1,
        raw in proptest::collection::vec((-0.22f64..0.22, -2.84f64..2.84), 1..60),
    ) {
        let inputs: Vec<ControlInput> = raw.iter().map(|&(v, w)| ControlInput::new(v, w)).collect();
        let x0 = Pose { x, y, heading: h };
        let states = rollout(x0, &inputs, 0.1);
        prop_assert_eq!(states.len(), inputs.len());
        let mut prev = x0;
        for (s, u) in states.iter().zip(&inputs) {
            prop_assert_eq!(*s, euler_step(prev, *u, 0.1));
            let by_hand = step_by_hand(prev, *u, 0.1);
            prop_assert_eq!(s.x, by_hand.x);
            prop_assert_eq!(s.y, by_hand.y);
            prop_assert!((s.heading - by_hand.heading).abs() < 1e-12);
            prev = *s;
        }
    }

    #[test]
    fn violation_is_zero_exactly_outside_the_disc(px in -1.0f64..1.0, py in -1.0f64..1.0, r in 0.05f64..0.6) {
        let c = Point::new(0.0, 0.0);
        let p = Point::new(px, py);
        let v = violation(p, c, r);
        prop_assert!(v >= 0.0);
        prop_assert_eq!(v == 0.0, p.distance_sq(&c) >= r * r);
    }
}

#[test]
fn obstacle_on_the_reference_is_avoided() {
    let config = NmpcConfig::default();
    let x0 = Pose { x: 0.0, y: 0.0, heading: 0.0 };
    let path = [Point::new(0.0, 0.0), Point::new(3.0, 0.0)];
    let reference = reference_along_path(&path, x0, &config);
    for (cx, cy) in [(0.6, 0.0), (0.5, 0.05), (0.9, -0.1), (0.4, 0.0)] {
        let obstacle = ObstacleDisc::stationary(Point::new(cx, cy), config.horizon, config.r_obs);
        let obstacles = [obstacle];
        let problem = TrackingProblem {
            x0,
            reference: &reference,
            u_prev: ControlInput::ZERO,
            obstacles: &obstacles,
        };
        let sol = solve(&problem, &config, &[]).unwrap();
        let worst = sol
            .states
            .iter()
            .map(|s| violation(s.position(), Point::new(cx, cy), config.r_obs))
            .fold(0.0, f64::max);
        assert!(worst <= 1e-3, "obstacle at ({cx}, {cy}): worst violation {worst}");
        assert_eq!(sol.total_violation, total_violation(&sol.states, &obstacles));
    }
}

fn lateral_error_after(start: Pose, seconds: f64) -> (f64, f64) {
    let config = NmpcConfig::default();
    let path = [Point::new(0.0, 0.0), Point::new(5.0, 0.0)];
    let mut x = start;
    let mut u_prev = ControlInput::ZERO;
    let mut warm = Vec::new();
    let mut first_v = None;
    let steps = (seconds / config.ts).round() as usize;
    for _ in 0..steps {
        let reference = reference_along_path(&path, x, &config);
        let problem = TrackingProblem {
            x0: x,
            reference: &reference,
            u_prev,
            obstacles: &[],
        };
        let sol = solve(&problem, &config, &warm).unwrap();
        first_v.get_or_insert(sol.inputs[0].v);
        u_prev = sol.inputs[0];
        x = euler_step(x, u_prev, config.ts);
        warm = taskmarket_core::nmpc::shift_warm_start(&sol.inputs);
    }
    (x.y.abs(), first_v.unwrap_or(0.0))
}

#[test]
fn closed_loop_tracking_on_a_straight_line() {
    let (err, v0) = lateral_error_after(Pose { x: 0.0, y: 0.0, heading: 0.0 }, 5.0);
    assert!(v0 > 0.0);
    assert!(err < 0.05, "on-line start drifted {err}");
    let (err, v0) = lateral_error_after(Pose { x: 0.0, y: 0.1, heading: 0.0 }, 5.0);
    assert!(v0 > 0.0);
    assert!(err < 0.05, "offset start ends {err} m off the line");
}

#[test]
fn warm_start_length_is_checked() {
    let config = NmpcConfig::default();
    let x0 = Pose { x: 0.0, y: 0.0, heading: 0.0 };
    let reference = vec![x0; config.horizon];
    let problem = TrackingProblem {
        x0,
        reference: &reference,
        u_prev: ControlInput::ZERO,
        obstacles: &[],
    };
    assert!(solve(&problem, &config, &[ControlInput::ZERO; 3]).is_err());
    let short = &reference[..10];
    let problem = TrackingProblem { reference: short, ..problem };
    assert!(solve(&problem, &config, &[]).is_err());
}
