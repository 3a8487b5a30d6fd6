//! One coordinate step in isolation: a simple S-regression by IRLS against
//! ordinary least squares when a tenth of the responses are shifted.

use cellshot::{simple_s_fit, weighted_ls_simple, RhoSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> cellshot::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<f64> = (0..60).map(|_| StandardNormal.sample(&mut rng)).collect();
    let y: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, xi)| {
            let e: f64 = StandardNormal.sample(&mut rng);
            let shift = if i % 10 == 0 { 25.0 } else { 0.0 };
            0.5 + 1.5 * xi + 0.4 * e + shift
        })
        .collect();

    let (ls_slope, ls_icpt) = weighted_ls_simple(&y, &x, &vec![1.0; x.len()])?;
    println!("least squares  slope {ls_slope:.4}  intercept {ls_icpt:.4}");
    for (name, spec) in [("biweight", RhoSpec::biweight(3.42)?), ("skipped Huber", RhoSpec::skipped_huber(2.177)?)] {
        let fit = simple_s_fit(&y, &x, &spec, 0.0, 1.0, 1e-6, 1e-6)?;
        println!(
            "{name:<14} slope {:.4}  intercept {:.4}  scale {:.4}  ({} I-steps)",
            fit.slope, fit.intercept, fit.scale, fit.i_steps
        );
    }
    println!("truth          slope 1.5000  intercept 0.5000  scale 0.4000");
    Ok(())
}
