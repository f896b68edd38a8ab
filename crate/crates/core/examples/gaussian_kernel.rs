//! Random Fourier features with paired sin/cos outputs.

use structembed::kernels::{exact_kernel, EmbeddingPipeline, Nonlinearity};
use structembed::structured::Family;

fn main() -> structembed::Result<()> {
    let n = 64;
    let base: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() / 4.0).collect();
    let pipe = EmbeddingPipeline::new(Family::Hankel, 512, n, Nonlinearity::SinCos, 5)?;
    for shift in [0.0, 0.02, 0.05, 0.1, 0.2] {
        let other: Vec<f64> = base.iter().enumerate().map(|(i, x)| x + shift * (i as f64).cos()).collect();
        let exact = exact_kernel(Nonlinearity::SinCos, &base, &other)?.expect("closed form");
        let est = pipe.estimate_pair(&base, &other)?;
        println!("shift {shift:.2}: exp(-d^2/2) = {exact:.4}, estimate {est:.4}");
    }
    Ok(())
}
