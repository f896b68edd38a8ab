//! Angular kernel from sign features, compared with (pi - theta) / (2 pi).

use structembed::kernels::{angle, exact_kernel, EmbeddingPipeline, Nonlinearity};
use structembed::structured::Family;

fn main() -> structembed::Result<()> {
    let n = 128;
    let v1: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64 - 6.0) / 6.0).collect();
    let v2: Vec<f64> = (0..n).map(|i| ((i * 5 % 11) as f64 - 5.0) / 5.0).collect();
    let exact = exact_kernel(Nonlinearity::Heaviside, &v1, &v2)?.expect("closed form");
    println!("theta = {:.4} rad, exact kernel {exact:.4}", angle(&v1, &v2)?);
    for m in [16, 64, 256, 1024] {
        let pipe = EmbeddingPipeline::new(Family::Circulant, m, n, Nonlinearity::Heaviside, 11)?;
        let est = pipe.estimate_pair(&v1, &v2)?;
        println!("m = {m:>5}: estimate {est:.4}, error {:+.4}", est - exact);
    }
    Ok(())
}
