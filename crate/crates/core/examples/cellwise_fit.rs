//! Fits the shooting S-estimator to data with a few outlying cells and
//! prints the coefficients, the flagged cells and any wholly flagged row.

use cellshot::simbench::{contaminate_cellwise, gen_clean, OutlierScheme, SimDesign};
use cellshot::{flag_outliers, shooting_fit, ShootingConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> cellshot::Result<()> {
    let design = SimDesign::new(80, 5, false)?;
    let clean = gen_clean(&design, 11);
    let mut data = contaminate_cellwise(&clean, 0.03, OutlierScheme::Dense, 12)?;
    // one observation with every predictor corrupted
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let outlier = Normal::new(50.0, 1.0).unwrap();
    for j in 0..data.p() {
        data.x[(7, j)] = outlier.sample(&mut rng);
    }

    let fit = shooting_fit(&data, &ShootingConfig::biweight())?;
    println!("converged: {} after {} loops", fit.converged, fit.outer_loops);
    println!("{:>4} {:>8} {:>8} {:>8}", "j", "true", "slope", "scale");
    for j in 0..data.p() {
        println!("{:>4} {:>8.3} {:>8.3} {:>8.3}", j + 1, design.beta_true[j], fit.slopes[j], fit.scales[j]);
    }
    println!("intercept {:.3}", fit.intercept);

    let flags = flag_outliers(&fit, 0.5);
    let planted = (0..data.n())
        .flat_map(|i| (0..data.p()).map(move |j| (i, j)))
        .filter(|&(i, j)| data.x[(i, j)] != clean.x[(i, j)])
        .count();
    let mut flagged = Vec::new();
    for (i, row) in flags.cells.iter().enumerate() {
        for (j, f) in row.iter().enumerate() {
            if *f {
                let mark = if data.x[(i, j)] != clean.x[(i, j)] { "*" } else { "" };
                flagged.push(format!("({},{}){mark}", i + 1, j + 1));
            }
        }
    }
    println!("{planted} corrupted cells; flagged ({}; * = corrupted): {}", flagged.len(), flagged.join(" "));
    let rows: Vec<usize> = flags.rows.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i + 1).collect();
    println!("wholly flagged rows: {rows:?}");
    Ok(())
}
