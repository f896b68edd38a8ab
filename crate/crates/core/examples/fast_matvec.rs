//! Structured matrix-vector products against a dense baseline.
//!
//!     cargo run --release --example fast_matvec -- 4096

use std::time::Instant;

use structembed::structured::{Family, StructuredMatrix};
use structembed::transforms::sample_gaussian;

fn main() -> structembed::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1024);
    let v = sample_gaussian(1, n)?.g;
    for fam in [Family::Circulant, Family::SkewCirculant, Family::Toeplitz, Family::Hankel] {
        let a = StructuredMatrix::build(fam, n, n, 7)?;
        let t = Instant::now();
        let fast = a.matvec(&v)?;
        let fast_s = t.elapsed().as_secs_f64();
        let dense = a.materialize()?;
        let t = Instant::now();
        let slow = dense.matvec(&v);
        let slow_s = t.elapsed().as_secs_f64();
        let gap = fast.iter().zip(&slow).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        println!("{fam:>14}: fast {fast_s:.2e} s, dense {slow_s:.2e} s, max gap {gap:.1e}");
    }
    Ok(())
}
