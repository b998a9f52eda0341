//! Shared inputs for the criterion benchmarks.

use simplexdyn::{Composition, ContrastMatrix, IlrPoint, PayoffMatrix};

/// Deterministic interior composition of `n` parts, away from the boundary.
pub fn spread_composition(n: usize) -> Composition {
    let psi = ContrastMatrix::new(n).expect("n >= 2");
    let x: Vec<f64> = (0..n - 1).map(|k| ((k * 7 + 3) % 11) as f64 / 5.0 - 1.0).collect();
    psi.ilr_inv(&IlrPoint(x)).expect("finite chart point")
}

/// `-lambda·id` plus a fixed rank-one perturbation, so that the game is
/// decomposable with a positive rate.
pub fn decomposable_game(n: usize, lambda: f64) -> PayoffMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { -lambda } else { 0.0 } + (i % 3) as f64 * 0.5 + (j % 2) as f64).collect())
        .collect();
    PayoffMatrix::from_rows(&rows).expect("square")
}

#[cfg(test)]
mod tests {
    use super::*;
    use simplexdyn::payoff::decompose;

    #[test]
    fn fixtures_are_valid() {
        assert_eq!(spread_composition(6).len(), 6);
        let d = decompose(&decomposable_game(5, 2.0)).expect("decomposable");
        assert!((d.lambda - 2.0).abs() < 1e-12);
    }
}
