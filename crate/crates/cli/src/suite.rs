use std::time::Instant;

use loopsoup::io::MatrixFile;
use loopsoup::matrix::spectral_radius_nonnegative;
use loopsoup::WeightMatrix;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::fixtures::{Fixture, Graph};
use crate::report::CheckReport;

/// Everything a suite may read.
pub struct Context {
    pub config: RunConfig,
    pub fixtures: Vec<Fixture>,
    pub graphs: Vec<Graph>,
    pub seed: u64,
}

pub struct Suite {
    pub id: &'static str,
    pub anchor: &'static str,
    pub run: fn(&Suite, &Context) -> Vec<CheckReport>,
}

impl Suite {
    pub fn compare(&self, inputs: &Value, lhs: Value, rhs: Value, error: f64, tolerance: f64) -> CheckReport {
        CheckReport::compare(self.id, self.anchor, inputs, lhs, rhs, error, tolerance)
    }

    pub fn failed(&self, inputs: &Value, reason: impl std::fmt::Display) -> CheckReport {
        CheckReport::failed(self.id, self.anchor, inputs, reason.to_string())
    }
}

/// Runs the suites in parallel and returns their reports in suite order.
pub fn run_suites(suites: &[Suite], ctx: &Context, timings: bool) -> Vec<CheckReport> {
    suites
        .par_iter()
        .map(|s| {
            let start = Instant::now();
            let mut reports = (s.run)(s, ctx);
            if timings {
                let ms = start.elapsed().as_millis() as u64;
                for r in &mut reports {
                    r.runtime_ms = Some(ms);
                }
            }
            reports
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

pub fn fixture_inputs(f: &Fixture, params: Value) -> Value {
    json!({
        "fixture": f.name,
        "weights": MatrixFile::from_weights(&f.weights),
        "params": params,
    })
}

/// Largest `L <= requested` for which walks of length up to `L` on the
/// support of `q` number at most about `budget`, estimated from the spectral
/// radius of the support's adjacency matrix.
pub fn enumeration_length(q: &WeightMatrix, requested: usize, budget: f64) -> usize {
    let adjacency = q.abs_matrix().map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let r = spectral_radius_nonnegative(&adjacency).max(1.0);
    let mut term = q.len() as f64;
    let mut total = 0.0;
    for l in 1..=requested {
        term *= r;
        total += term;
        if total > budget {
            return (l - 1).max(1);
        }
    }
    requested
}

/// Test functions for transform comparisons: three constants, plus two
/// site-dependent ones on more than one site.
pub fn test_functions(n: usize) -> Vec<Vec<f64>> {
    let mut grid: Vec<Vec<f64>> = [0.1, 0.2, 0.5].iter().map(|&v| vec![v; n]).collect();
    if n > 1 {
        grid.push((0..n).map(|i| [0.0, 0.1, 0.2, 0.5][i % 4]).collect());
        grid.push((0..n).map(|i| [0.5, 0.2, 0.1, 0.0][i % 4]).collect());
    }
    grid
}

/// Every vector in `{0, 0.1, 0.2, 0.5}^n` for `n <= 4`, else [`test_functions`].
pub fn full_grid(n: usize) -> Vec<Vec<f64>> {
    const VALUES: [f64; 4] = [0.0, 0.1, 0.2, 0.5];
    if n > 4 {
        return test_functions(n);
    }
    (0..4usize.pow(n as u32))
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let v = VALUES[k % 4];
                    k /= 4;
                    v
                })
                .collect()
        })
        .collect()
}
