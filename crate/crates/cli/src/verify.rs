//! The `verify` command.

use permreg::theory::{self, VerificationReport, VerifyOptions};

pub fn run_verification(options: &VerifyOptions) -> permreg::Result<VerificationReport> {
    theory::verify(options)
}

pub fn to_text(report: &VerificationReport) -> String {
    let header = ["check", "value", "reference", "tolerance", "result"];
    let cells: Vec<[String; 5]> = report
        .checks
        .iter()
        .map(|c| {
            [
                c.name.clone(),
                format!("{:.5}", c.value),
                format!("{:.5}", c.reference),
                format!("{:.5}", c.tolerance),
                if c.pass { "pass" } else { "FAIL" }.to_string(),
            ]
        })
        .collect();
    let mut out = crate::table(&header, &cells);
    out.push_str(if report.all_pass() {
        "\nall checks passed\n"
    } else {
        "\nsome checks failed\n"
    });
    out
}
