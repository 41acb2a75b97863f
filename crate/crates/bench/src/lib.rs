//! Inputs shared by the criterion benchmarks in `benches/`.

use loopsoup::{Complex64, DMatrix, SimpleGraph, WeightMatrix};

/// Nearest-neighbour walk on an `n`-cycle with holding, scaled so that every
/// row of `|Q|` sums to `rho`.
pub fn ring(n: usize, rho: f64) -> WeightMatrix {
    let m = DMatrix::from_fn(n, n, |x, y| {
        let d = (x + n - y) % n;
        if d == 1 || d + 1 == n || (n > 2 && d == 0) {
            rho / 3.0
        } else {
            0.0
        }
    });
    WeightMatrix::from_real(&m).expect("valid matrix")
}

/// Dense complex matrix with a fixed phase pattern and `rho(|Q|) = rho`.
pub fn dense_complex(n: usize, rho: f64) -> WeightMatrix {
    let m = DMatrix::from_fn(n, n, |x, y| {
        Complex64::from_polar(rho / n as f64, (x * 7 + y * 3) as f64)
    });
    WeightMatrix::from_complex(m).expect("valid matrix")
}

/// `side x side` grid graph.
pub fn grid(side: usize) -> SimpleGraph {
    let mut edges = Vec::new();
    for r in 0..side {
        for c in 0..side {
            let v = r * side + c;
            if c + 1 < side {
                edges.push((v, v + 1));
            }
            if r + 1 < side {
                edges.push((v, v + side));
            }
        }
    }
    SimpleGraph::new(side * side, &edges).expect("valid graph")
}
