//! Evaluates the gradient and density-moment estimates at one point and
//! writes the reports as CSV to stdout.

use girsanov_bsde::coefficients::CoefficientSet;
use girsanov_bsde::estimates::{write_csv, EstimateContext, EstimateSettings};

fn main() -> girsanov_bsde::Result<()> {
    let mut reports = Vec::new();
    for name in ["burgers", "tanh_clamped(1)"] {
        let set = CoefficientSet::from_catalog(name)?;
        let ctx = EstimateContext::new(&set, 0.25, 0.2, EstimateSettings::default())?;
        for p in [1.0, 1.5, 1.9] {
            reports.extend(ctx.all(0.1, p)?);
        }
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    write_csv(&reports, std::io::stdout().lock())?;
    eprintln!("{} reports, {failed} failed", reports.len());
    Ok(())
}
