//! Estimation error against m for several families.

use structembed::kernels::{error_sweep, Nonlinearity, SweepOptions};
use structembed::structured::Family;

fn main() -> structembed::Result<()> {
    let data: Vec<Vec<f64>> =
        (0..12).map(|r| (0..64).map(|c| (((r * 29 + c * 13) % 17) as f64 - 8.0) / 8.0).collect()).collect();
    let ms = [16, 64, 256];
    for fam in [Family::Unstructured, Family::Circulant, Family::Toeplitz] {
        let rows = error_sweep(&data, fam, Nonlinearity::Relu, &ms, 5, 3, SweepOptions::default())?;
        let line: Vec<String> = rows.iter().map(|r| format!("m={} rmse={:.4}", r.m, r.rmse)).collect();
        println!("{fam:>12}: {}", line.join("  "));
    }
    Ok(())
}
