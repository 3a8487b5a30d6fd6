//! Swaps the hard-rejection cell weights for a smooth Huber-type weight and
//! a stricter cutoff, and compares the resulting fits.

use std::sync::Arc;

use cellshot::simbench::{contaminate_cellwise, gen_clean, OutlierScheme, SimDesign};
use cellshot::{flag_outliers, shooting_fit, CellWeight, ShootingConfig};

fn main() -> cellshot::Result<()> {
    let design = SimDesign::correlated();
    let clean = gen_clean(&design, 4);
    let data = contaminate_cellwise(&clean, 0.05, OutlierScheme::Wide, 5)?;
    let planted = data.x.iter().zip(clean.x.iter()).filter(|(a, b)| a != b).count();
    println!("{planted} of {} cells replaced", data.n() * data.p());

    let configs = [
        ("hard rejection c=3", ShootingConfig::biweight()),
        ("hard rejection c=2.5", ShootingConfig::biweight().with_cutoff(2.5)),
        ("huber-type c=2", {
            let mut c = ShootingConfig::biweight();
            c.cell_weight = CellWeight::Custom(Arc::new(|r: f64| if r <= 2.0 { 1.0 } else { 2.0 / r }));
            c
        }),
    ];
    for (name, config) in configs {
        let fit = shooting_fit(&data, &config)?;
        let err: f64 = fit.slopes.iter().zip(&design.beta_true).map(|(b, t)| (b - t).powi(2)).sum::<f64>() / design.p as f64;
        let flagged: usize = flag_outliers(&fit, 0.5).cells.iter().flatten().filter(|f| **f).count();
        println!("{name:<22} mean squared slope error {err:.4}, cells below 0.5: {flagged}");
    }
    Ok(())
}
