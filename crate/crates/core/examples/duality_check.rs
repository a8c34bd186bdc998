//! Compares the dual certificate value with the primal distance on random
//! vehicle footprints.
//!
//!     cargo run --release --example duality_check [pairs]

use platoon::dynamics::{VehicleParams, VehicleState};
use platoon::geometry::{certificate_residual, dual_value, footprint, optimal_certificate, polytope_distance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> platoon::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_gap, mut worst_res, mut overlapping) = (0.0f64, 0.0f64, 0);
    for _ in 0..n {
        let mut car = || {
            let p = VehicleParams::with_dimensions(rng.gen_range(2.0..6.0), rng.gen_range(1.0..2.5)).unwrap();
            let z = VehicleState::new(rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0), rng.gen_range(-3.2..3.2), 0.0);
            footprint(&z, &p)
        };
        let (a, b) = (car(), car());
        let primal = polytope_distance(&a, &b)?.dist;
        let cert = optimal_certificate(&a, &b)?;
        worst_gap = worst_gap.max((dual_value(&a, &b, &cert)? - primal).abs());
        worst_res = worst_res.max(certificate_residual(&a, &b, &cert));
        overlapping += (primal == 0.0) as usize;
    }
    println!("{n} pairs ({overlapping} overlapping): max |dual - primal| = {worst_gap:.3e}, max residual = {worst_res:.3e}");
    Ok(())
}
