//! LS, S, MM and both shooting variants on the same data, clean and with
//! 5% of cells replaced by N(50, 1) draws.

use cellshot::simbench::{contaminate_cellwise, gen_clean, OutlierScheme, SimDesign};
use cellshot::{ls_fit, mm_fit, s_fit, shooting_fit, FastSOptions, RegressionData, RhoKind, RhoSpec, ShootingConfig};

fn slope_error(slopes: &[f64], truth: &[f64]) -> f64 {
    (slopes.iter().zip(truth).map(|(b, t)| (b - t).powi(2)).sum::<f64>() / truth.len() as f64).sqrt()
}

fn report(label: &str, data: &RegressionData, truth: &[f64]) -> cellshot::Result<()> {
    let opts = FastSOptions::with_seed(1);
    let fits = [
        ("ls", ls_fit(data)?.slopes),
        ("s", s_fit(data, &RhoSpec::biweight(3.42)?, &opts)?.slopes),
        ("mm", mm_fit(data, RhoKind::Biweight, 0.5, 0.95, &opts)?.slopes),
        ("shooting-bi", shooting_fit(data, &ShootingConfig::biweight())?.slopes),
        ("shooting-skh", shooting_fit(data, &ShootingConfig::skipped_huber())?.slopes),
    ];
    println!("{label}");
    for (name, slopes) in fits {
        println!("  {name:<13} rms slope error {:.4}", slope_error(&slopes, truth));
    }
    Ok(())
}

fn main() -> cellshot::Result<()> {
    let design = SimDesign::uncorrelated();
    let clean = gen_clean(&design, 21);
    report("clean", &clean, &design.beta_true)?;
    let dirty = contaminate_cellwise(&clean, 0.05, OutlierScheme::Dense, 22)?;
    report("5% contaminated cells", &dirty, &design.beta_true)?;
    Ok(())
}
