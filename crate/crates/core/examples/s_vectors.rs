//! s-vector identities and balancedness after Hadamard preprocessing.

use structembed::diagnostics::{is_balanced, verify_s_identities};
use structembed::structured::{Family, StructuredMatrix};
use structembed::transforms::{preprocess, sample_signs};

fn main() -> structembed::Result<()> {
    let n = 32;
    let a = StructuredMatrix::build(Family::Circulant, 8, n, 2)?;
    let d1 = sample_signs(3, n)?;
    let basis: Vec<Vec<f64>> = (0..3).map(|j| (0..n).map(|c| if c == j { 1.0 } else { 0.0 }).collect()).collect();
    let rep = verify_s_identities(&a, &d1, &basis)?;
    println!("s-identity max deviation: {:.2e}", rep.max_deviation());

    let spike: Vec<f64> = (0..n).map(|c| if c == 0 { 1.0 } else { 0.0 }).collect();
    let d0 = sample_signs(4, n)?;
    let mixed = preprocess(&spike, &d0, &d1)?;
    let theta = (n as f64).ln();
    println!("spike balanced: {}, after H D0: {}", is_balanced(&spike, theta)?, is_balanced(&mixed, theta)?);
    Ok(())
}
