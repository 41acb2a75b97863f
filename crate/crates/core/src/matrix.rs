//! Weight matrices over finite state spaces and their Green's functions.
//!
//! A [`WeightMatrix`] is a complex square matrix `Q` indexed by a labelled
//! [`StateSpace`]. It is *acceptable* when the entrywise absolute value `|Q|`
//! has spectral radius strictly below one, which makes every path and loop
//! sum built from `Q` absolutely convergent. The Laplacian is `I - Q` and the
//! Green's function is its inverse, equivalently the Neumann series
//! `sum_j Q^j`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Required gap below one for the spectral radius of `|Q|`.
pub const TOL_ACCEPT: f64 = 1e-9;
/// Tolerance used when computing the structural flags of a matrix.
pub const FLAG_TOL: f64 = 1e-12;
/// Relative pivot size below which an LU factorisation is declared singular.
pub const PIVOT_TOL: f64 = 1e-14;
/// Residual bound for `(I - Q) G - I` on an exact Green's function.
pub const GREENS_RESIDUAL_TOL: f64 = 1e-10;

const POWER_ITER_TOL: f64 = 1e-12;
const POWER_ITER_CAP: usize = 10_000;
/// Entries below this magnitude are treated as absent edges.
pub const SUPPORT_TOL: f64 = 1e-15;

/// An ordered set of distinct site labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl StateSpace {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidSpace("state space must be nonempty".into()));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::InvalidSpace(format!("duplicate label `{label}`")));
            }
        }
        Ok(Self { labels, index })
    }

    /// Sites labelled `"0"`, `"1"`, ... `"n-1"`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index(&self, label: &str) -> Result<usize> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownSite(label.to_string()))
    }

    /// The sub-space on the given indices, in the order given.
    pub fn subspace(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.labels[i].clone()))
    }
}

/// Structural properties of a weight matrix, computed from its entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    pub real: bool,
    pub positive: bool,
    pub symmetric: bool,
    pub hermitian: bool,
}

impl Flags {
    fn compute(q: &DMatrix<Complex64>) -> Self {
        let n = q.nrows();
        let real = q.iter().all(|z| z.im.abs() <= FLAG_TOL);
        let positive = real && q.iter().all(|z| z.re >= -FLAG_TOL);
        let mut symmetric = true;
        let mut hermitian = true;
        for x in 0..n {
            for y in 0..n {
                symmetric &= (q[(x, y)] - q[(y, x)]).norm() <= FLAG_TOL;
                hermitian &= (q[(x, y)] - q[(y, x)].conj()).norm() <= FLAG_TOL;
            }
        }
        Self {
            real,
            positive,
            symmetric,
            hermitian,
        }
    }
}

/// Spectral data certifying (or refuting) acceptability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptabilityCertificate {
    /// Spectral radius of `|Q|` (an upper bound when power iteration converged).
    pub spectral_radius_abs: f64,
    pub acceptable: bool,
    /// `1 - spectral_radius_abs`. Any perturbation `f` with `sup |f| < margin`
    /// and `Re f >= 0` keeps `Q_f` acceptable.
    pub margin: f64,
}

/// Complex edge weights `Q(x, y)` on a finite state space.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    space: StateSpace,
    entries: DMatrix<Complex64>,
    flags: Flags,
}

impl WeightMatrix {
    pub fn new(space: StateSpace, entries: DMatrix<Complex64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidMatrix(format!(
                "matrix is {}x{}, not square",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.nrows() != space.len() {
            return Err(Error::InvalidMatrix(format!(
                "matrix has {} rows but the space has {} sites",
                entries.nrows(),
                space.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        let flags = Flags::compute(&entries);
        Ok(Self { space, entries, flags })
    }

    /// A matrix on the indexed space `0..n`.
    pub fn from_complex(entries: DMatrix<Complex64>) -> Result<Self> {
        let space = StateSpace::indexed(entries.nrows())?;
        Self::new(space, entries)
    }

    pub fn from_real(entries: &DMatrix<f64>) -> Result<Self> {
        Self::from_complex(entries.map(|x| Complex64::new(x, 0.0)))
    }

    /// Real matrix from row-major data.
    pub fn from_real_rows(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        Self::from_real(&DMatrix::from_row_slice(n, n, data))
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::from_complex(DMatrix::zeros(n, n))
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.entries[(x, y)]
    }

    pub fn flags(&self) -> Flags {
        self.flags
    }

    /// Entrywise modulus `|Q|`.
    pub fn abs_matrix(&self) -> DMatrix<f64> {
        self.entries.map(|z| z.norm())
    }

    /// Real parts, available when the matrix is real.
    pub fn real_entries(&self) -> Option<DMatrix<f64>> {
        self.flags.real.then(|| self.entries.map(|z| z.re))
    }

    /// Whether `Q(x, y)` is a present edge.
    pub fn has_edge(&self, x: usize, y: usize) -> bool {
        self.entries[(x, y)].norm() > SUPPORT_TOL
    }

    /// Spectral radius of `|Q|`.
    pub fn spectral_radius_abs(&self) -> f64 {
        spectral_radius_nonnegative(&self.abs_matrix())
    }

    pub fn acceptability(&self) -> AcceptabilityCertificate {
        let rho = self.spectral_radius_abs();
        AcceptabilityCertificate {
            spectral_radius_abs: rho,
            acceptable: rho < 1.0 - TOL_ACCEPT,
            margin: 1.0 - rho,
        }
    }

    /// Returns the certificate, or [`Error::NotAcceptable`].
    pub fn require_acceptable(&self) -> Result<AcceptabilityCertificate> {
        let cert = self.acceptability();
        if cert.acceptable {
            Ok(cert)
        } else {
            Err(Error::NotAcceptable {
                radius: cert.spectral_radius_abs,
            })
        }
    }

    /// `I - Q`.
    pub fn laplacian(&self) -> WeightMatrix {
        let n = self.len();
        let entries = DMatrix::<Complex64>::identity(n, n) - &self.entries;
        WeightMatrix::new(self.space.clone(), entries).expect("laplacian of a valid matrix")
    }

    /// `det(I - Q)` by LU with partial pivoting.
    pub fn laplacian_determinant(&self) -> Complex64 {
        let n = self.len();
        determinant(&(DMatrix::<Complex64>::identity(n, n) - &self.entries))
    }

    /// `G = (I - Q)^{-1}` by LU decomposition.
    pub fn greens_exact(&self) -> Result<GreensFunction> {
        self.require_acceptable()?;
        let n = self.len();
        let lap = DMatrix::<Complex64>::identity(n, n) - &self.entries;
        let g = inverse(&lap)?;
        let residual = max_abs(&(&lap * &g - DMatrix::<Complex64>::identity(n, n)));
        if residual > GREENS_RESIDUAL_TOL {
            return Err(Error::NumericalFailure(format!(
                "Green's function residual {residual:e}"
            )));
        }
        Ok(GreensFunction {
            space: self.space.clone(),
            entries: g,
            source: GreensSource::ExactInverse,
        })
    }

    /// Partial Neumann sum `sum_{j=0}^{terms} Q^j` with a certified max-norm
    /// bound on the omitted tail.
    pub fn greens_series(&self, terms: usize) -> Result<GreensFunction> {
        self.require_acceptable()?;
        let n = self.len();
        let mut sum = DMatrix::<Complex64>::identity(n, n);
        let mut power = DMatrix::<Complex64>::identity(n, n);
        for _ in 0..terms {
            power = &power * &self.entries;
            sum += &power;
        }
        // |sum_{j>L} Q^j| <= |Q|^{L+1} (I - |Q|)^{-1} entrywise.
        let abs = self.abs_matrix();
        let majorant = abs.pow((terms + 1) as u32) * inverse_real(&(DMatrix::identity(n, n) - &abs))?;
        let tail = majorant.iter().fold(0.0f64, |m, &v| m.max(v));
        Ok(GreensFunction {
            space: self.space.clone(),
            entries: sum,
            source: GreensSource::TruncatedSeries {
                terms,
                tail_bound: with_rounding_slack(tail),
            },
        })
    }

    /// Submatrix on the given labels, in the given order.
    pub fn restrict(&self, labels: &[&str]) -> Result<WeightMatrix> {
        let idx = labels.iter().map(|l| self.space.index(l)).collect::<Result<Vec<_>>>()?;
        self.restrict_indices(&idx)
    }

    pub fn restrict_indices(&self, indices: &[usize]) -> Result<WeightMatrix> {
        if indices.is_empty() {
            return Err(Error::InvalidSpace("restriction to the empty set".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::UnknownSite(bad.to_string()));
        }
        let k = indices.len();
        let sub = DMatrix::from_fn(k, k, |i, j| self.entries[(indices[i], indices[j])]);
        WeightMatrix::new(self.space.subspace(indices)?, sub)
    }

    /// Total weight `f_x` of loops at `x` with no intermediate visit to `x`.
    pub fn first_return_weight(&self, x: usize, mode: FirstReturnMode) -> Result<FirstReturn> {
        self.require_acceptable()?;
        self.check_site(x)?;
        match mode {
            FirstReturnMode::ViaGreens => {
                let g = self.greens_exact()?;
                let gxx = g.get(x, x);
                if gxx.norm() == 0.0 {
                    return Err(Error::NumericalFailure("G(x,x) = 0".into()));
                }
                Ok(FirstReturn {
                    value: Complex64::new(1.0, 0.0) - gxx.inv(),
                    tail_bound: 0.0,
                })
            }
            FirstReturnMode::BruteForce { max_length } => self.first_return_brute_force(x, max_length),
        }
    }

    fn first_return_brute_force(&self, x: usize, max_length: usize) -> Result<FirstReturn> {
        let n = self.len();
        let mut value = Complex64::new(0.0, 0.0);
        if max_length >= 1 {
            value += self.entries[(x, x)];
        }
        // Excursions x -> z_1 -> ... -> z_k -> x with every z_i != x.
        let mut stack: Vec<(usize, usize, Complex64)> = Vec::new();
        for z in (0..n).filter(|&z| z != x && self.has_edge(x, z)) {
            stack.push((z, 1, self.entries[(x, z)]));
        }
        while let Some((z, steps, w)) = stack.pop() {
            if steps < max_length {
                value += w * self.entries[(z, x)];
            }
            if steps + 2 <= max_length {
                for y in (0..n).filter(|&y| y != x && self.has_edge(z, y)) {
                    stack.push((y, steps + 1, w * self.entries[(z, y)]));
                }
            }
        }
        let tail_bound = if n == 1 || max_length == 0 {
            if max_length == 0 {
                // nothing summed; bound by the full first-return mass of |Q|
                let abs = self.abs_matrix();
                let g = inverse_real(&(DMatrix::identity(n, n) - &abs))?;
                1.0 - 1.0 / g[(x, x)]
            } else {
                0.0
            }
        } else {
            // Excursions of length > L spend at least L - 1 steps off x.
            let abs = self.abs_matrix();
            let rest: Vec<usize> = (0..n).filter(|&z| z != x).collect();
            let k = rest.len();
            let inner = DMatrix::from_fn(k, k, |i, j| abs[(rest[i], rest[j])]);
            let out = nalgebra::DVector::from_fn(k, |i, _| abs[(x, rest[i])]);
            let back = nalgebra::DVector::from_fn(k, |i, _| abs[(rest[i], x)]);
            let resolvent = inverse_real(&(DMatrix::identity(k, k) - &inner))?;
            let tail = inner.pow((max_length - 1) as u32) * resolvent;
            (out.transpose() * tail * back)[(0, 0)]
        };
        Ok(FirstReturn {
            value,
            tail_bound: with_rounding_slack(tail_bound),
        })
    }

    /// `Q_f = D_{1/(1+f)} Q`, i.e. row `x` divided by `1 + f(x)`.
    pub fn perturb(&self, f: &[Complex64]) -> Result<WeightMatrix> {
        self.check_vector(f.len())?;
        let mut entries = self.entries.clone();
        for (x, fx) in f.iter().enumerate() {
            let denom = Complex64::new(1.0, 0.0) + fx;
            if denom.norm() <= SUPPORT_TOL {
                return Err(Error::DivisionByZero { site: x });
            }
            let scale = denom.inv();
            for y in 0..self.len() {
                entries[(x, y)] *= scale;
            }
        }
        WeightMatrix::new(self.space.clone(), entries)
    }

    /// Real-valued convenience for [`WeightMatrix::perturb`].
    pub fn perturb_real(&self, f: &[f64]) -> Result<WeightMatrix> {
        let f: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.perturb(&f)
    }

    /// `prod_j G_{A_j}(x_j, x_j)` over a full ordering of the sites, where
    /// `A_j` removes the earlier sites. Equals `1/det(I - Q)` for every ordering.
    pub fn greens_diagonal_product(&self, ordering: &[usize]) -> Result<Complex64> {
        let mut seen = vec![false; self.len()];
        if ordering.len() != self.len() {
            return Err(Error::InvalidPath("ordering is not a permutation".into()));
        }
        for &x in ordering {
            if x >= self.len() || std::mem::replace(&mut seen[x], true) {
                return Err(Error::InvalidPath("ordering is not a permutation".into()));
            }
        }
        self.sequential_greens_product(ordering)
    }

    /// `prod_j G_{A_j}(v_j, v_j)` with `A_j = A \ {v_1, ..., v_{j-1}}` for an
    /// ordered subset `v` of the sites.
    pub fn sequential_greens_product(&self, sites: &[usize]) -> Result<Complex64> {
        self.require_acceptable()?;
        let mut remaining: Vec<usize> = (0..self.len()).collect();
        let mut product = Complex64::new(1.0, 0.0);
        for &x in sites {
            self.check_site(x)?;
            let pos = remaining
                .iter()
                .position(|&r| r == x)
                .ok_or_else(|| Error::InvalidPath(format!("site {x} repeated")))?;
            product *= self.restricted_greens_diagonal(&remaining, pos)?;
            remaining.remove(pos);
        }
        Ok(product)
    }

    /// `G_V(v, v)` where `V = subset` and `v = subset[pos]`.
    pub fn restricted_greens_diagonal(&self, subset: &[usize], pos: usize) -> Result<Complex64> {
        let k = subset.len();
        let lap = DMatrix::from_fn(k, k, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            Complex64::new(delta, 0.0) - self.entries[(subset[i], subset[j])]
        });
        Ok(inverse(&lap)?[(pos, pos)])
    }

    fn check_site(&self, x: usize) -> Result<()> {
        if x < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownSite(x.to_string()))
        }
    }

    fn check_vector(&self, len: usize) -> Result<()> {
        if len == self.len() {
            Ok(())
        } else {
            Err(Error::InvalidMatrix(format!(
                "site vector has length {len}, expected {}",
                self.len()
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstReturnMode {
    ViaGreens,
    /// Sum excursions of length at most `max_length` explicitly.
    BruteForce {
        max_length: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstReturn {
    pub value: Complex64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GreensSource {
    ExactInverse,
    TruncatedSeries { terms: usize, tail_bound: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreensFunction {
    pub space: StateSpace,
    pub entries: DMatrix<Complex64>,
    pub source: GreensSource,
}

impl GreensFunction {
    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.entries[(x, y)]
    }

    pub fn tail_bound(&self) -> f64 {
        match self.source {
            GreensSource::ExactInverse => 0.0,
            GreensSource::TruncatedSeries { tail_bound, .. } => tail_bound,
        }
    }
}

/// Diagonal matrix `D_f(x, y) = delta_{x,y} f(x)`.
pub fn diagonal(f: &[Complex64]) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(f))
}

/// Spectral radius of an entrywise nonnegative matrix.
///
/// Runs power iteration on `I + A`, whose Perron root is `1 + rho(A)` and
/// which is aperiodic, tracking the Collatz-Wielandt bracket
/// `min_i (Bv)_i / v_i <= rho(B) <= max_i (Bv)_i / v_i`. Returns the upper end
/// once the bracket is relatively tight, otherwise falls back to a full
/// eigenvalue computation.
pub fn spectral_radius_nonnegative(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 || a.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let b = DMatrix::<f64>::identity(n, n) + a;
    let mut v = nalgebra::DVector::<f64>::from_element(n, 1.0);
    for _ in 0..POWER_ITER_CAP {
        let w = &b * &v;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let r = w[i] / v[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi - lo <= POWER_ITER_TOL * hi {
            return (hi - 1.0).max(0.0);
        }
        let scale = w.max();
        v = w / scale;
    }
    a.complex_eigenvalues().iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Determinant by LU with partial pivoting.
pub fn determinant(m: &DMatrix<Complex64>) -> Complex64 {
    m.clone().lu().determinant()
}

/// Inverse by LU with partial pivoting, rejecting tiny pivots.
pub fn inverse(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let scale = max_abs(m).max(1.0);
    let lu = m.clone().lu();
    let u = lu.u();
    let pivot = u.diagonal().iter().fold(f64::INFINITY, |p, z| p.min(z.norm()));
    if pivot <= PIVOT_TOL * scale {
        return Err(Error::NumericallySingular { pivot });
    }
    lu.try_inverse().ok_or(Error::NumericallySingular { pivot })
}

/// Real counterpart of [`inverse`].
pub fn inverse_real(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = m.amax().max(1.0);
    let lu = m.clone().lu();
    let pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |p, z| p.min(z.abs()));
    if pivot <= PIVOT_TOL * scale {
        return Err(Error::NumericallySingular { pivot });
    }
    lu.try_inverse().ok_or(Error::NumericallySingular { pivot })
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut values: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Widen a computed bound to absorb floating-point rounding in the quantity
/// it bounds.
pub(crate) fn with_rounding_slack(bound: f64) -> f64 {
    bound * (1.0 + 1e-9) + 1e-13
}
