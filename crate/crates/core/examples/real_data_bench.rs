//! Average norm distance of the five estimators on a CSV file, for random
//! 80% subsets and for copies with 5% of cells shifted by ten MADs.
//!
//! cargo run --release --example real_data_bench -- data.csv response [replicates]
//!
//! Without arguments a synthetic dataset stands in for the file.

use cellshot::cli::read_csv;
use cellshot::simbench::{gen_clean, real_data_contaminate, real_data_resample, RealDataRequest, SimDesign};
use cellshot::RegressionData;

fn main() -> cellshot::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let data: RegressionData = match args.as_slice() {
        [path, response, ..] => read_csv(path.as_ref(), response)?,
        _ => gen_clean(&SimDesign::new(90, 6, true)?, 8),
    };
    let replicates = args.get(2).and_then(|r| r.parse().ok()).unwrap_or(10);
    let req = RealDataRequest::new(replicates, 42)?;

    let observed = real_data_resample(&data, 0.8, &req)?;
    let contaminated = real_data_contaminate(&data, 0.05, 10.0, &req)?;
    println!("n = {}, p = {}, {} replicates", data.n(), data.p(), replicates);
    println!("{:<13} {:>9} {:>13}", "estimator", "observed", "contaminated");
    for (o, c) in observed.rows.iter().zip(&contaminated.rows) {
        let fmt = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:.4}"));
        println!("{:<13} {:>9} {:>13}", o.estimator.id(), fmt(o.value), fmt(c.value));
    }
    Ok(())
}
