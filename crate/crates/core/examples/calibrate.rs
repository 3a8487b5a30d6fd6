//! Tuning constants for each ρ-family at a few breakdown points and
//! efficiencies.

use cellshot::{tune_for_bdp, tune_for_efficiency, RhoKind};

fn main() -> cellshot::Result<()> {
    println!("{:<14} {:>8} {:>12} {:>8} {:>8} {:>8}", "rho", "target", "constants", "delta", "bdp", "eff");
    for kind in [RhoKind::Biweight, RhoKind::SkippedHuber, RhoKind::Lqq] {
        for bdp in [0.2, 0.5] {
            let spec = tune_for_bdp(kind, bdp)?;
            print_row(&kind.to_string(), &format!("bdp {bdp}"), &spec);
        }
        let spec = tune_for_efficiency(kind, 0.95)?;
        print_row(&kind.to_string(), "eff 0.95", &spec);
    }
    Ok(())
}

fn print_row(kind: &str, target: &str, spec: &cellshot::RhoSpec) {
    let constants: Vec<String> = spec.constants().iter().map(|c| format!("{c:.4}")).collect();
    println!(
        "{kind:<14} {target:>8} {:>12} {:>8.4} {:>8.4} {:>8.4}",
        constants.join("/"),
        spec.delta(),
        spec.breakdown_point(),
        spec.efficiency()
    );
}
