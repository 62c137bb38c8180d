use slipflow::friction::ThresholdField;
use slipflow::geometry::{DomainSpec, HeightFn};
use slipflow::timestepping::*;

fn main() {
    for (len, nx, ny) in [(1.0, 16, 16), (2.0, 32, 16), (4.0, 64, 16)] {
        let scenario = Scenario {
            domain: DomainSpec { dim: 2, omega: vec![[0.0, len]], height: HeightFn::constant(1.0), h_min: 1.0, h_max: 1.0, lipschitz: 0.0 },
            resolution: vec![nx, ny],
            mu: 1.0,
            t_final: 40.0,
            dt: 0.5,
            body_force: ForcingFn::zero(),
            zeta: TimeFn::one(),
            wall_s: 1.0,
            wall_kind: WallKind::Couette { lateral_speed: Some(0.5) },
            v0: InitialCondition::Lifting,
            eps_schedule: vec![1e-3, 1e-5],
            newton: NewtonConfig::default(),
            mollifier_rho: None,
            check_compatibility: false,
        };
        let disc = Discretization::build(&scenario).unwrap();
        let ell = ThresholdField::constant(0.5, scenario.time_grid(), disc.ops.bquad.n_qp).unwrap();
        let traj = run_tresca(&disc, &scenario, &ell, &RunConfig { quiet: true, steady_tol: Some(1e-9), ..Default::default() }).unwrap();
        let vt = disc.trace_f.mul(&traj.terminal().v);
        let bq = &disc.ops.bquad;
        // slip at the wall midpoint and quarter points
        let mut mid = (f64::INFINITY, 0.0);
        for q in 0..bq.n_qp {
            let x = bq.x_prime[q];
            let d = (x - len / 2.0).abs();
            if d < mid.0 { mid = (d, vt[q]); }
        }
        println!("L={len} steps={} mid-wall slip = {:+.6} (wall speed {:.6})", traj.states.len()-1, mid.1, 1.0 + mid.1);
    }
}
