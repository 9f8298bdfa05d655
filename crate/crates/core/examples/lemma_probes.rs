//! Each probe suite once, with its tightest margins.
//!
//! cargo run --release --example lemma_probes

use rmsprop_lab::verify::{run_suite, Suite, VerifyOptions};

fn main() -> rmsprop_lab::Result<()> {
    let opts = VerifyOptions::default();
    for suite in Suite::ALL {
        let r = run_suite(suite, &opts)?;
        println!("{}: {}/{} pass", r.suite, r.passed, r.total);
        for p in &r.tightest {
            println!("    {:<32} margin {:>12.4e}  (rhs {:.4e})", p.name, p.margin, p.rhs);
        }
    }
    Ok(())
}
