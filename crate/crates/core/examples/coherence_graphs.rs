//! Coherence graphs and chromatic numbers of small structured matrices.

use structembed::diagnostics::{coherence_graph, exact_chromatic, greedy_coloring, model_stats};
use structembed::structured::{Family, StructuredMatrix};

fn main() -> structembed::Result<()> {
    let (m, n) = (4, 8);
    for fam in Family::all_default() {
        let a = StructuredMatrix::build(fam, m, n, 1)?;
        let s = model_stats(&a, true)?;
        println!("{fam}: chi={} mu={:.3} mu~={:.3}", s.chi, s.mu, s.mu_tilde);
    }

    let a = StructuredMatrix::build(Family::Toeplitz, m, n, 1)?;
    let g = coherence_graph(&a, 0, 1)?;
    let greedy = greedy_coloring(&g);
    println!(
        "\ntoeplitz rows 0,1: {} vertices, {} edges, greedy {} colors, exact {}",
        g.num_vertices(),
        g.num_edges(),
        greedy.colors_used,
        exact_chromatic(&g)?
    );
    print!("{}", g.to_edge_list());
    Ok(())
}
