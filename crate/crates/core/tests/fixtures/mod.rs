//! Fixture matrices and independent oracles shared by the integration tests.
#![allow(dead_code)]

use loopsoup::matrix::spectral_radius_nonnegative;
use loopsoup::rng::{domain_tag, Substreams};
use loopsoup::{Complex64, DMatrix, WeightMatrix};
use rand::Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn one_point(q: f64) -> WeightMatrix {
    WeightMatrix::from_real_rows(1, &[q]).unwrap()
}

pub fn two_state() -> WeightMatrix {
    WeightMatrix::from_real_rows(2, &[0.0, 0.5, 0.5, 0.0]).unwrap()
}

/// `Q(0,1) = i/2`, `Q(1,0) = -i/2`.
pub fn hermitian_pair() -> WeightMatrix {
    WeightMatrix::from_complex(DMatrix::from_row_slice(
        2,
        2,
        &[c(0.0, 0.0), c(0.0, 0.5), c(0.0, -0.5), c(0.0, 0.0)],
    ))
    .unwrap()
}

/// Rescale so that `rho(|Q|) = rho`.
pub fn scaled_to(m: DMatrix<Complex64>, rho: f64) -> WeightMatrix {
    let r = spectral_radius_nonnegative(&m.map(|z| z.norm()));
    WeightMatrix::from_complex(m * Complex64::new(rho / r, 0.0)).unwrap()
}

/// Support for random fixtures: dense up to three sites, and a ring with
/// both orientations plus self-loops at even sites on four sites so that
/// exhaustive enumeration to length 14 stays cheap.
fn in_support(n: usize, x: usize, y: usize) -> bool {
    if n <= 3 {
        return true;
    }
    let d = (x + n - y) % n;
    d == 1 || d == n - 1 || (x == y && x.is_multiple_of(2))
}

/// Twenty acceptable matrices on 1 to 4 sites with `rho(|Q|)` in
/// `[0.3, 0.7]`; indices 4..8 and 12..16 are complex.
pub fn random_fixtures() -> Vec<WeightMatrix> {
    let streams = Substreams::new(2024, domain_tag("fixtures"));
    (0..20u64)
        .map(|i| {
            let mut rng = streams.stream(i);
            let n = 1 + (i as usize % 4);
            let complex = (i / 4) % 2 == 1;
            let m = DMatrix::from_fn(n, n, |x, y| {
                if !in_support(n, x, y) {
                    return c(0.0, 0.0);
                }
                let r: f64 = rng.random_range(0.2..1.0);
                if complex {
                    let theta: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                    Complex64::from_polar(r, theta)
                } else {
                    c(r * if rng.random_bool(0.8) { 1.0 } else { -1.0 }, 0.0)
                }
            });
            let rho = rng.random_range(0.3..0.7);
            scaled_to(m, rho)
        })
        .collect()
}

/// Random symmetric positive 4-site matrix with `rho = 0.6`.
pub fn symmetric_four() -> WeightMatrix {
    let mut rng = Substreams::new(7, domain_tag("symmetric-four")).stream(0);
    let mut m = DMatrix::<f64>::zeros(4, 4);
    for x in 0..4 {
        for y in x..4 {
            let v = rng.random_range(0.1..1.0);
            m[(x, y)] = v;
            m[(y, x)] = v;
        }
    }
    scaled_to(m.map(|v| c(v, 0.0)), 0.6)
}

/// Symmetric 3-site matrix with a negative off-diagonal entry.
pub fn symmetric_signed() -> WeightMatrix {
    let m = DMatrix::from_row_slice(3, 3, &[0.1, -0.3, 0.2, -0.3, 0.0, 0.25, 0.2, 0.25, 0.05]);
    scaled_to(m.map(|v| c(v, 0.0)), 0.55)
}

/// Random Hermitian 3-site matrix with `rho(|Q|) = 0.5`.
pub fn hermitian_three() -> WeightMatrix {
    let mut rng = Substreams::new(11, domain_tag("hermitian-three")).stream(0);
    let mut m = DMatrix::<Complex64>::zeros(3, 3);
    for x in 0..3 {
        m[(x, x)] = c(rng.random_range(-0.5..0.5), 0.0);
        for y in x + 1..3 {
            let z = Complex64::from_polar(rng.random_range(0.2..1.0), rng.random_range(-3.0..3.0));
            m[(x, y)] = z;
            m[(y, x)] = z.conj();
        }
    }
    scaled_to(m, 0.5)
}

/// Positive fixtures used for soup sampling.
pub fn positive_fixtures() -> Vec<(&'static str, WeightMatrix)> {
    vec![
        ("one-point q=0.3", one_point(0.3)),
        ("one-point q=0.5", one_point(0.5)),
        ("two-state", two_state()),
        ("symmetric four-site", symmetric_four()),
    ]
}

/// Constant test functions plus two mixed ones.
pub fn mc_grid(n: usize) -> Vec<Vec<f64>> {
    let mut grid: Vec<Vec<f64>> = [0.1, 0.2, 0.5].iter().map(|&v| vec![v; n]).collect();
    if n > 1 {
        grid.push((0..n).map(|i| [0.0, 0.1, 0.2, 0.5][i % 4]).collect());
        grid.push((0..n).map(|i| [0.5, 0.2, 0.1, 0.0][i % 4]).collect());
    }
    grid
}

/// Every vector in `{0, 0.1, 0.2, 0.5}^n`.
pub fn full_grid(n: usize) -> Vec<Vec<f64>> {
    const VALUES: [f64; 4] = [0.0, 0.1, 0.2, 0.5];
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

/// Determinant by the Leibniz expansion, independent of any factorization.
pub fn leibniz_det(m: &DMatrix<Complex64>) -> Complex64 {
    let n = m.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = c(0.0, 0.0);
    permutations(&mut perm, 0, &mut |p| {
        let mut inversions = 0;
        for i in 0..n {
            for j in i + 1..n {
                if p[i] > p[j] {
                    inversions += 1;
                }
            }
        }
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        let prod: Complex64 = (0..n).map(|i| m[(i, p[i])]).product();
        total += prod * sign;
    });
    total
}

pub fn permutations(items: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// `1 / det(I - Q)` by the Leibniz expansion.
pub fn inverse_det_oracle(q: &WeightMatrix) -> Complex64 {
    let n = q.len();
    leibniz_det(&(DMatrix::identity(n, n) - q.entries())).inv()
}

/// `G(x, x)` by summing the Neumann series until terms fall below `1e-18`.
pub fn greens_diagonal_oracle(q: &WeightMatrix, x: usize) -> Complex64 {
    let n = q.len();
    let mut power = DMatrix::<Complex64>::identity(n, n);
    let mut sum = c(1.0, 0.0);
    for _ in 0..100_000 {
        power = &power * q.entries();
        sum += power[(x, x)];
        if power.iter().all(|z| z.norm() < 1e-18) {
            break;
        }
    }
    sum
}
