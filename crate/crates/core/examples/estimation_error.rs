//! Steady-state local covariance and remote estimation MSE as a function of
//! age of information for a few randomly generated processes.

use sensor_sched::estimation::{mse_at_aoi, solve_steady_state_covariance};
use sensor_sched::harness::generate_system;

fn main() -> sensor_sched::Result<()> {
    let system = generate_system(7, 3, 1)?;
    for (n, (p, rho)) in system.processes.iter().zip(&system.spectral_radii).enumerate() {
        let p_bar = solve_steady_state_covariance(&p.a, &p.c, &p.w, &p.v)?;
        println!("sensor {} (spectral radius {rho:.3})", n + 1);
        println!("  steady-state covariance trace {:.4}", p_bar.trace());
        println!("  Riccati residual {:.2e}", p.riccati_residual());
        let row: Vec<String> = [1, 2, 3, 5, 10, 20]
            .iter()
            .map(|&tau| Ok(format!("τ={tau}: {:.3}", mse_at_aoi(p, tau, 20)?)))
            .collect::<sensor_sched::Result<_>>()?;
        println!("  MSE {}", row.join(", "));
    }
    Ok(())
}
