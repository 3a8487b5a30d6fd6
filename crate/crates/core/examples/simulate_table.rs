//! A reduced Monte-Carlo table: n·MSE of every estimator under cellwise
//! contamination with uncorrelated predictors.
//!
//! cargo run --release --example simulate_table -- [replicates] [seed]

use cellshot::simbench::{run_table, OutlierScheme, TableId, TableRequest};

fn main() -> cellshot::Result<()> {
    let mut args = std::env::args().skip(1);
    let replicates = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);

    let mut req = TableRequest::new(TableId::CellUncorr, vec![0.0, 0.02, 0.05], replicates, seed)?;
    req.schemes = vec![OutlierScheme::Dense];
    let report = run_table(&req)?;
    println!("{}", report.description);
    print!("{}", report.to_table_csv());
    for row in report.rows.iter().filter(|r| r.failures > 0) {
        eprintln!("{} at {}: {} failed replicates", row.estimator, row.setting, row.failures);
    }
    Ok(())
}
