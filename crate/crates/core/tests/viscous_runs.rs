use rollwave::profile::solve_profile;
use rollwave::system::build_sawtooth_rollwave;
use rollwave::viscous::{error_norms, run_resolved, steepest_point, Start, ViscousOptions};

fn signed_distance(x: f64, period: f64) -> f64 {
    let d = x.rem_euclid(period);
    if d > 0.5 * period {
        d - period
    } else {
        d
    }
}

#[test]
fn sawtooth_layer_settles_onto_the_profile() {
    let (l, eps) = (2.0, 1e-2);
    let rw = build_sawtooth_rollwave(l, 0.0);
    let traj = run_resolved(&rw, eps, &ViscousOptions::default(), Start::Inviscid).unwrap();
    assert!(traj.grid.is_resolved(eps));
    let profile = solve_profile(&rw.system, &rw.u_minus(), &rw.u_plus(), 0.0, 0.0).unwrap();
    let last = traj.times.len() - 1;
    let mut worst = 0.0f64;
    for i in 0..traj.grid.n {
        let d = signed_distance(traj.grid.x(i), l);
        if d.abs() <= 10.0 * eps {
            // Inner profile plus the outer slope it does not carry.
            let composite = profile.value(d / eps)[0] + d;
            worst = worst.max((traj.cell(last, i)[0] - composite).abs());
        }
    }
    assert!(worst <= 0.02 * 0.5 * l, "layer error {worst}");

    let gamma: f64 = 0.75;
    for k in 0..traj.times.len() {
        let d = signed_distance(steepest_point(&traj, k) - rw.shock_position(1, traj.times[k]), l);
        assert!(d.abs() <= 3.0 * eps.powf(gamma), "steepest point {d} off the shock at t = {}", traj.times[k]);
    }
}

#[test]
fn away_from_the_layer_the_error_is_much_smaller() {
    let eps = 1e-3;
    let mut rw = build_sawtooth_rollwave(2.0, 0.0);
    rw.t_star = 0.25;
    let traj = run_resolved(&rw, eps, &ViscousOptions { snapshots: 10, ..Default::default() }, Start::Inviscid).unwrap();
    let e = error_norms(&traj, &rw, 0.5);
    assert!(e.away_sup * 10.0 <= e.sup, "{e:?}");
    assert_eq!(traj.fields[0].len(), traj.grid.n);
}
