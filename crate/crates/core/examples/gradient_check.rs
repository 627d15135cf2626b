//! Compares analytic gradients of the three training losses with central
//! finite differences along random parameter directions.

use sensor_sched::harness::{gradcheck, GradCheckOptions, GRADCHECK_TOLERANCE};

fn main() -> sensor_sched::Result<()> {
    for seed in 0..3 {
        let reports = gradcheck(&GradCheckOptions { seed, ..Default::default() })?;
        for r in reports {
            println!(
                "seed {seed} {:<12} {:>5} params  max rel. error {:.2e}  {}",
                r.loss,
                r.n_params,
                r.max_rel_error,
                if r.passed { "ok" } else { "FAIL" }
            );
        }
    }
    println!("tolerance {GRADCHECK_TOLERANCE:.0e}");
    Ok(())
}
