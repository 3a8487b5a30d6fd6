//! M-scale of a residual vector with a block of gross errors, next to the
//! normalized MAD and the standard deviation.

use cellshot::{initial_scale, solve_mscale, RhoSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> cellshot::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 2.0).unwrap();
    let mut res: Vec<f64> = (0..200).map(|_| noise.sample(&mut rng)).collect();
    for r in res.iter_mut().take(30) {
        *r += 80.0;
    }

    let mean = res.iter().sum::<f64>() / res.len() as f64;
    let sd = (res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (res.len() - 1) as f64).sqrt();
    println!("true sigma 2.0, 15% gross errors");
    println!("standard deviation  {sd:.4}");
    println!("1.4826 * med |r|    {:.4}", initial_scale(&res)?);
    for (name, spec) in [
        ("biweight k=3.42", RhoSpec::biweight(3.42)?),
        ("biweight k=1.548", RhoSpec::biweight(1.5476)?),
        ("skipped Huber k=2.177", RhoSpec::skipped_huber(2.177)?),
    ] {
        let sol = solve_mscale(&res, &spec, initial_scale(&res)?, 1e-9)?;
        println!("{name:<20} {:.4}  ({} M-steps)", sol.s, sol.m_steps);
    }
    Ok(())
}
