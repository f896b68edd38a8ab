//! Concentration thresholds and tails for a range of embedding sizes.

use structembed::bounds::{cor1_tail, cor1_threshold, cor2_threshold, p0_eps_angular};

fn main() -> structembed::Result<()> {
    let (points, tau) = (1000, 0.25);
    println!("{:>6} {:>10} {:>12} {:>10} {:>10}", "m", "cor1", "cor1 tail", "cor2", "p0(1e-4)");
    for m in [64u64, 256, 1024, 4096, 16384] {
        println!(
            "{m:>6} {:>10.4} {:>12.3e} {:>10.4} {:>10.4}",
            cor1_threshold(m, tau)?,
            cor1_tail(points, m, tau)?,
            cor2_threshold(m, tau, 1.0, 0.01)?,
            p0_eps_angular(m, 1e-4)?
        );
    }
    Ok(())
}
