//! Runs the splitting scheme for the symmetric two-field scenario (equal
//! weights on the constant fields ±1, started at δ_0) and shows uniform
//! convergence to the closed-form solution N(0, t) as the partition refines.
//!
//! ```bash
//! cargo run --release --example random_walk_limit
//! ```

use mdeflow::scenarios::{self, gaussian_quantile_cloud};
use mdeflow::scheme::{convergence_study, SchemeConfig};

fn main() {
    let scenario = scenarios::wiener();
    let cfg = SchemeConfig::default().with_budget(10_000).with_seed(7);
    let reference = |t: f64, n: usize| gaussian_quantile_cloud(0.0, t, n);

    println!(
        "scheme vs N(0, t) on [0, 1], budget {}:",
        cfg.particle_budget
    );
    println!(
        "{:>8} {:>24} {:>24}",
        "steps", "sup W2 to next level", "W2 to N(0,1) at t=1"
    );
    let report = convergence_study(
        &scenario.map,
        &scenario.mu0,
        scenario.horizon,
        &[4, 16, 64, 256],
        &cfg,
        2.0,
        Some(&reference),
    )
    .expect("convergence study");
    for row in &report.rows {
        println!(
            "{:>8} {:>24} {:>24}",
            row.level,
            row.sup_distance_to_next
                .map(|v| format!("{v:.5}"))
                .unwrap_or_else(|| "-".into()),
            row.distance_to_reference
                .map(|v| format!("{v:.5}"))
                .unwrap_or_else(|| "-".into()),
        );
    }
    println!(
        "two-seed noise floor at the finest level: {:.5}",
        report.noise_floor
    );
    println!(
        "distances decrease monotonically within the floor: {}",
        report.cauchy_monotone_within_floor
    );
}
