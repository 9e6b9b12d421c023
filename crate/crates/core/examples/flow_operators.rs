//! The two step operators of the scheme and their quantitative estimates:
//! the drift step moves W_p by at most `|t−s|·M₁(V)` and the dispersion step
//! by at most `√|t−s|·(‖mean‖∞ + M_p(V)^{1/p})`; the induced generator acts
//! as `½·tr(A_c ∇²φ) + ∇φ·mean` on test functions.
//!
//! ```bash
//! cargo run --release --example flow_operators
//! ```

use mdeflow::fields::{standard_test_battery, w2inf_norm, SampleBox};
use mdeflow::scenarios;
use mdeflow::scheme::{dispersion_step, drift_step, SchemeConfig};
use mdeflow::transport::{wasserstein, Method};
use nalgebra::dvector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let scenario = scenarios::drifted_wiener();
    let m = scenarios::gaussian_quantile_cloud(0.0, 0.5, 300).unwrap();
    let ensemble = scenario.map.ensemble_for(&m);
    let sbox = SampleBox::centered(1, 4.0);
    let m1 = ensemble.moment(1.0, &sbox, 32);
    let mp = ensemble.moment(scenario.p, &sbox, 32);
    let mean_norm = w2inf_norm(&ensemble.mean_field(), &sbox, 32);
    println!(
        "ensemble: atoms {{½: -1, ½: +2}}, mean {:.2}, M1 = {m1:.2}, M{}^(1/{}) = {:.3}",
        mean_norm,
        scenario.p,
        scenario.p,
        mp.powf(1.0 / scenario.p)
    );

    let cfg = SchemeConfig {
        particle_budget: usize::MAX,
        ..SchemeConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut worst_drift = f64::NEG_INFINITY;
    let mut worst_disp = f64::NEG_INFINITY;
    for _ in 0..100 {
        let s: f64 = rng.gen_range(0.0..1.0);
        let t: f64 = rng.gen_range(0.0..1.0);
        let es = drift_step(&ensemble, &m, s, &cfg).unwrap();
        let et = drift_step(&ensemble, &m, t, &cfg).unwrap();
        let d = wasserstein(&es, &et, scenario.p, Method::Exact1D)
            .unwrap()
            .cost;
        worst_drift = worst_drift.max(d - (t - s).abs() * m1);

        let fs = dispersion_step(&ensemble, &m, s, &cfg).unwrap();
        let ft = dispersion_step(&ensemble, &m, t, &cfg).unwrap();
        let d = wasserstein(&fs, &ft, scenario.p, Method::Exact1D)
            .unwrap()
            .cost;
        worst_disp =
            worst_disp.max(d - (t - s).abs().sqrt() * (mean_norm + mp.powf(1.0 / scenario.p)));
    }
    println!("over 100 random (s, t) pairs in [0,1]²:");
    println!("  worst drift-step excess over |t-s|·M1:            {worst_drift:.3e}");
    println!("  worst dispersion-step excess over √|t-s|·(m+M^…): {worst_disp:.3e}");

    // Generator identities on the test battery.
    let wiener = scenarios::wiener();
    let e = wiener.map.ensemble_for(&wiener.mu0);
    let battery = standard_test_battery(1, 2.0);
    let mut worst = 0.0f64;
    for phi in &battery {
        for k in 0..50 {
            let x = dvector![-2.0 + 4.0 * k as f64 / 49.0];
            worst = worst.max((e.generator(phi, &x) - 0.5 * phi.hessian(&x)[(0, 0)]).abs());
        }
    }
    println!(
        "symmetric ±1 ensemble: max |G φ − ½φ''| over {} test functions × 50 points: {worst:.2e}",
        battery.len()
    );
}
