//! Gaussian free fields, the loop-soup isomorphism, and the doubling of
//! Hermitian problems onto two real sheets `A` and `A*`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::loops::{path_weight, visit_loops, DEFAULT_LOOP_BUDGET};
use crate::matrix::{
    determinant, hermitian_eigenvalues, inverse, inverse_real, AcceptabilityCertificate, StateSpace, WeightMatrix,
    FLAG_TOL, GREENS_RESIDUAL_TOL,
};
use crate::rng::Substreams;
use crate::soup::{
    continuous_occupation, discrete_occupation, nu_transform_closed, trivial_transform_closed, SoupSampler,
    TransformReport,
};
use crate::stats::{MeanEstimate, VarianceEstimate};

/// Centered Gaussian vector with covariance `G`, sampled as `C z` where
/// `C C^T = G` is the Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GffModel {
    covariance: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl GffModel {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        if !covariance.is_square() || covariance.nrows() == 0 {
            return Err(Error::InvalidMatrix("covariance must be square and nonempty".into()));
        }
        let scale = covariance.amax().max(1.0);
        if (&covariance - covariance.transpose()).amax() > FLAG_TOL * scale {
            return Err(Error::InvalidMatrix("covariance is not symmetric".into()));
        }
        let chol = covariance.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let factor = chol.l();
        if (&factor * factor.transpose() - &covariance).amax() > GREENS_RESIDUAL_TOL * scale {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { covariance, factor })
    }

    /// The field with covariance `G = (I - Q)^{-1}` for real symmetric
    /// acceptable `Q`.
    pub fn from_weights(q: &WeightMatrix) -> Result<Self> {
        let q = require_real_symmetric(q)?;
        let n = q.nrows();
        Self::new(inverse_real(&(DMatrix::identity(n, n) - q))?)
    }

    pub fn len(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Lower-triangular `C` with `C C^T = G`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `Delta = G^{-1}`.
    pub fn laplacian(&self) -> Result<DMatrix<f64>> {
        inverse_real(&self.covariance)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = nalgebra::DVector::<f64>::from_fn(self.len(), |_, _| StandardNormal.sample(rng));
        (&self.factor * z).iter().copied().collect()
    }

    /// `n` fields, field `i` drawn from substream `i`.
    pub fn sample_many(&self, n: usize, streams: Substreams) -> Vec<Vec<f64>> {
        (0..n as u64)
            .into_par_iter()
            .map(|i| self.sample(&mut streams.stream(i)))
            .collect()
    }
}

pub fn gff_sample<R: Rng + ?Sized>(model: &GffModel, rng: &mut R) -> Vec<f64> {
    model.sample(rng)
}

fn require_real_symmetric(q: &WeightMatrix) -> Result<DMatrix<f64>> {
    let flags = q.flags();
    if !flags.real || !flags.symmetric {
        return Err(Error::InvalidMatrix("expected a real symmetric weight matrix".into()));
    }
    q.require_acceptable()?;
    Ok(q.real_entries().expect("real flag checked"))
}

/// Largest elementwise deviation of an empirical second-moment matrix from
/// its target, in units of the per-entry standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceCheck {
    pub max_z_score: f64,
    pub max_abs_error: f64,
    pub samples: usize,
}

impl CovarianceCheck {
    pub fn within(&self, k: f64) -> bool {
        self.max_z_score <= k
    }

    fn merge(self, other: Self) -> Self {
        Self {
            max_z_score: self.max_z_score.max(other.max_z_score),
            max_abs_error: self.max_abs_error.max(other.max_abs_error),
            samples: self.samples.min(other.samples),
        }
    }
}

fn z_score(est: &MeanEstimate, target: f64) -> f64 {
    let diff = (est.mean - target).abs();
    if est.stderr > 0.0 {
        diff / est.stderr
    } else if diff <= 1e-14 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn moment_check<F>(n: usize, target: F, products: impl Fn(usize, usize) -> Vec<f64>) -> CovarianceCheck
where
    F: Fn(usize, usize) -> f64,
{
    let mut out = CovarianceCheck {
        max_z_score: 0.0,
        max_abs_error: 0.0,
        samples: usize::MAX,
    };
    for x in 0..n {
        for y in 0..n {
            let est = MeanEstimate::from_samples(&products(x, y));
            let t = target(x, y);
            out = out.merge(CovarianceCheck {
                max_z_score: z_score(&est, t),
                max_abs_error: (est.mean - t).abs(),
                samples: est.samples,
            });
        }
    }
    out
}

/// Empirical `E[phi(x) phi(y)]` against `G(x, y)`.
pub fn gff_covariance_check(model: &GffModel, samples: &[Vec<f64>]) -> CovarianceCheck {
    moment_check(
        model.len(),
        |x, y| model.covariance[(x, y)],
        |x, y| samples.iter().map(|p| p[x] * p[y]).collect(),
    )
}

/// `E[exp(-1/2 phi^2 . f)] = 1 / sqrt(det(Delta + D_f) det G)`.
pub fn gff_transform_closed(q: &WeightMatrix, f: &[f64]) -> Result<f64> {
    let q = require_real_symmetric(q)?;
    let n = q.nrows();
    if f.len() != n {
        return Err(Error::InvalidShape(f.len() as f64));
    }
    let delta = DMatrix::identity(n, n) - q;
    let shifted = &delta + DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(f));
    let chol = shifted
        .cholesky()
        .ok_or_else(|| Error::OutOfDomain("Delta + D_f is not positive definite".into()))?;
    // det(Delta + D_f) det G = det(Delta + D_f) / det Delta
    let ratio = chol.determinant() / delta.determinant();
    Ok(1.0 / ratio.sqrt())
}

/// Two evaluations of one quantity and their absolute difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub error: f64,
}

impl IdentityCheck {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            error: (lhs - rhs).abs(),
        }
    }
}

/// `nu_{1/2}[e^{-L.f}] nu^trivial_{1/2}[e^{-L.f}]` against the Gaussian
/// transform, computed by independent determinant evaluations.
pub fn isomorphism_identity_check(q: &WeightMatrix, f: &[f64]) -> Result<IdentityCheck> {
    let rhs = gff_transform_closed(q, f)?;
    let nu = nu_transform_closed(q, f, 0.5)?;
    let lhs = nu.re * trivial_transform_closed(f, 0.5)?;
    Ok(IdentityCheck::new(lhs, rhs))
}

/// Monte Carlo reports for one test function: the Gaussian side uses
/// `1/2 phi^2`, the soup side the occupation field of a soup at `t = 1/2`
/// plus the trivial loop field at `t = 1/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsomorphismMc {
    pub gff: TransformReport,
    pub soup: TransformReport,
}

impl IsomorphismMc {
    pub fn agrees(&self, k: f64) -> bool {
        self.gff.agrees(k) && self.soup.agrees(k)
    }
}

/// Runs the isomorphism comparison for each test function in `grid`, using
/// one set of `n` Gaussian fields and `n` soup fields for the whole grid.
pub fn isomorphism_mc_check(
    q: &WeightMatrix,
    grid: &[Vec<f64>],
    n: usize,
    streams: Substreams,
) -> Result<Vec<IsomorphismMc>> {
    let model = GffModel::from_weights(q)?;
    let sampler = SoupSampler::new(q)?;
    let phis = model.sample_many(n, streams.child(1));
    let half_squares: Vec<Vec<f64>> = phis.iter().map(|p| p.iter().map(|v| 0.5 * v * v).collect()).collect();
    let soup_fields: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.child(2).stream(i);
            let soup = sampler.sample(0.5, &mut rng)?;
            Ok(continuous_occupation(&discrete_occupation(&soup), 0.5, &mut rng)?.values())
        })
        .collect::<Result<_>>()?;
    grid.iter()
        .map(|f| {
            let closed = gff_transform_closed(q, f)?;
            Ok(IsomorphismMc {
                gff: transform_report(&half_squares, f).with_closed_form(closed),
                soup: transform_report(&soup_fields, f).with_closed_form(closed),
            })
        })
        .collect()
}

fn transform_report(fields: &[Vec<f64>], f: &[f64]) -> TransformReport {
    let values: Vec<f64> = fields
        .iter()
        .map(|l| (-l.iter().zip(f).map(|(a, b)| a * b).sum::<f64>()).exp())
        .collect();
    let est = MeanEstimate::from_samples(&values);
    TransformReport {
        f: f.to_vec(),
        closed_form: None,
        empirical: est.mean,
        mc_stderr: est.stderr,
        samples: est.samples,
    }
}

/// One-point comparison of `Z^2 / 2` (with `Var Z = 1/(1-q)`) against the
/// soup occupation time at `t = 1/2` plus an independent `Gamma(1/2, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareDecomposition {
    pub gaussian_mean: MeanEstimate,
    pub soup_mean: MeanEstimate,
    pub gaussian_variance: VarianceEstimate,
    pub soup_variance: VarianceEstimate,
    pub gaussian_transform: TransformReport,
    pub soup_transform: TransformReport,
    /// `sqrt((1 - q) / (1 - q + s))`.
    pub closed_form: f64,
}

impl ChiSquareDecomposition {
    /// Largest two-sample z-score among the mean and variance comparisons.
    pub fn moment_z_score(&self) -> f64 {
        let mean = two_sample_z(
            self.gaussian_mean.mean,
            self.gaussian_mean.stderr,
            self.soup_mean.mean,
            self.soup_mean.stderr,
        );
        let var = two_sample_z(
            self.gaussian_variance.variance,
            self.gaussian_variance.stderr,
            self.soup_variance.variance,
            self.soup_variance.stderr,
        );
        mean.max(var)
    }

    pub fn agrees(&self, k: f64) -> bool {
        self.moment_z_score() <= k && self.gaussian_transform.agrees(k) && self.soup_transform.agrees(k)
    }
}

fn two_sample_z(a: f64, sa: f64, b: f64, sb: f64) -> f64 {
    let se = (sa * sa + sb * sb).sqrt();
    let diff = (a - b).abs();
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn chi_square_decomposition_check(q: f64, s: f64, n: usize, streams: Substreams) -> Result<ChiSquareDecomposition> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::OutOfDomain(format!("one-point weight {q} must lie in (0, 1)")));
    }
    let weights = WeightMatrix::from_real_rows(1, &[q])?;
    let sd = (1.0 / (1.0 - q)).sqrt();
    let gaussian: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut streams.child(1).stream(i));
            0.5 * (sd * z).powi(2)
        })
        .collect();
    let sampler = SoupSampler::new(&weights)?;
    let soup: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.child(2).stream(i);
            let loops = sampler.sample(0.5, &mut rng)?;
            Ok(continuous_occupation(&discrete_occupation(&loops), 0.5, &mut rng)?.values()[0])
        })
        .collect::<Result<_>>()?;
    let closed = ((1.0 - q) / (1.0 - q + s)).sqrt();
    let report = |values: &[f64]| {
        let fields: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        transform_report(&fields, &[s]).with_closed_form(closed)
    };
    Ok(ChiSquareDecomposition {
        gaussian_mean: MeanEstimate::from_samples(&gaussian),
        soup_mean: MeanEstimate::from_samples(&soup),
        gaussian_variance: VarianceEstimate::from_samples(&gaussian),
        soup_variance: VarianceEstimate::from_samples(&soup),
        gaussian_transform: report(&gaussian),
        soup_transform: report(&soup),
        closed_form: closed,
    })
}

/// The real `2n x 2n` block form `[[R, -I], [I, R]]` of a complex matrix
/// `R + iI`, on the space `A` followed by `A*`.
fn double_block(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = m[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

fn doubled_space(space: &StateSpace) -> Result<StateSpace> {
    let labels = space
        .labels()
        .iter()
        .cloned()
        .chain(space.labels().iter().map(|l| format!("{l}*")));
    StateSpace::new(labels)
}

fn require_hermitian(m: &DMatrix<Complex64>) -> Result<()> {
    let scale = m.iter().fold(1.0f64, |a, z| a.max(z.norm()));
    let asym = (m - m.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if !m.is_square() || asym > FLAG_TOL * scale {
        return Err(Error::InvalidMatrix("expected a Hermitian matrix".into()));
    }
    Ok(())
}

/// Real symmetric weights on `A u A*` from Hermitian `Q'`, together with
/// the acceptability certificate of the result, which may fail even when
/// `Q'` is acceptable.
pub fn double_weights(q: &WeightMatrix) -> Result<(WeightMatrix, AcceptabilityCertificate)> {
    require_hermitian(q.entries())?;
    let doubled = double_block(q.entries()).map(|v| Complex64::new(v, 0.0));
    let w = WeightMatrix::new(doubled_space(q.space())?, doubled)?;
    let cert = w.acceptability();
    Ok((w, cert))
}

/// `[[G_R, -G_I], [G_I, G_R]]` for Hermitian `G' = G_R + i G_I`.
pub fn double_covariance(g: &DMatrix<Complex64>) -> Result<DMatrix<f64>> {
    require_hermitian(g)?;
    Ok(double_block(g))
}

/// `Q = I - G^{-1}`, the weights whose Green's function is `G`. Entries may
/// be negative even when `G` is a valid covariance.
pub fn weights_from_covariance(g: &DMatrix<f64>) -> Result<WeightMatrix> {
    let n = g.nrows();
    WeightMatrix::from_real(&(DMatrix::identity(n, n) - inverse_real(g)?))
}

/// Complex Gaussian field `psi_x = phi_x + i phi_{x*}` built from a real
/// field on the doubled space. `E[psi_x conj(psi_y)] = 2 G'(x, y)` and
/// `E[psi_x psi_y] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGffModel {
    covariance: DMatrix<Complex64>,
    doubled: GffModel,
}

impl ComplexGffModel {
    pub fn new(covariance: DMatrix<Complex64>) -> Result<Self> {
        let doubled = GffModel::new(double_covariance(&covariance)?)?;
        Ok(Self { covariance, doubled })
    }

    /// `G' = (I - Q')^{-1}` for Hermitian acceptable `Q'`.
    pub fn from_weights(q: &WeightMatrix) -> Result<Self> {
        require_hermitian(q.entries())?;
        q.require_acceptable()?;
        let n = q.len();
        Self::new(inverse(&(DMatrix::identity(n, n) - q.entries()))?)
    }

    pub fn len(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn covariance(&self) -> &DMatrix<Complex64> {
        &self.covariance
    }

    pub fn doubled(&self) -> &GffModel {
        &self.doubled
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexGffSample {
        let phi = self.doubled.sample(rng);
        let n = self.len();
        ComplexGffSample {
            psi: (0..n).map(|x| Complex64::new(phi[x], phi[x + n])).collect(),
        }
    }

    pub fn sample_many(&self, n: usize, streams: Substreams) -> Vec<ComplexGffSample> {
        (0..n as u64)
            .into_par_iter()
            .map(|i| self.sample(&mut streams.stream(i)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGffSample {
    pub psi: Vec<Complex64>,
}

impl ComplexGffSample {
    /// `h = psi / sqrt 2`, with `E[h_x conj(h_y)] = G'(x, y)`.
    pub fn h(&self) -> Vec<Complex64> {
        self.psi.iter().map(|z| z / std::f64::consts::SQRT_2).collect()
    }
}

pub fn complex_gff_sample<R: Rng + ?Sized>(model: &ComplexGffModel, rng: &mut R) -> ComplexGffSample {
    model.sample(rng)
}

/// Covariance `E[psi conj(psi)^T]` against `2 G'` and pseudo-covariance
/// `E[psi psi^T]` against zero, real and imaginary parts separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexCovarianceCheck {
    pub covariance: CovarianceCheck,
    pub pseudo_covariance: CovarianceCheck,
}

impl ComplexCovarianceCheck {
    pub fn within(&self, k: f64) -> bool {
        self.covariance.within(k) && self.pseudo_covariance.within(k)
    }
}

pub fn complex_covariance_check(model: &ComplexGffModel, samples: &[ComplexGffSample]) -> ComplexCovarianceCheck {
    let n = model.len();
    let g = &model.covariance;
    let part = |f: fn(Complex64) -> f64, conj: bool, target: &dyn Fn(usize, usize) -> f64| {
        moment_check(n, target, |x, y| {
            samples
                .iter()
                .map(|s| {
                    let b = if conj { s.psi[y].conj() } else { s.psi[y] };
                    f(s.psi[x] * b)
                })
                .collect()
        })
    };
    let re = |z: Complex64| z.re;
    let im = |z: Complex64| z.im;
    ComplexCovarianceCheck {
        covariance: part(re, true, &|x, y| 2.0 * g[(x, y)].re).merge(part(im, true, &|x, y| 2.0 * g[(x, y)].im)),
        pseudo_covariance: part(re, false, &|_, _| 0.0).merge(part(im, false, &|_, _| 0.0)),
    }
}

/// `det G` on the doubled space against `(det G')^2`, and the doubled
/// eigenvalue multiset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublingCheck {
    pub det_doubled: f64,
    pub det_squared: f64,
    pub relative_error: f64,
    /// Largest gap after matching sorted eigenvalues of the doubled matrix
    /// with the eigenvalues of `G'`, each repeated twice.
    pub eigenvalue_error: f64,
}

pub fn doubling_check(g: &DMatrix<Complex64>) -> Result<DoublingCheck> {
    let doubled = double_covariance(g)?;
    let det_doubled = doubled.determinant();
    let det_prime = determinant(g);
    let det_squared = (det_prime * det_prime).re;
    let mut single = hermitian_eigenvalues(g);
    single.extend(single.clone());
    single.sort_by(f64::total_cmp);
    let mut both: Vec<f64> = doubled.symmetric_eigenvalues().iter().copied().collect();
    both.sort_by(f64::total_cmp);
    let eigenvalue_error = single.iter().zip(&both).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(DoublingCheck {
        det_doubled,
        det_squared,
        relative_error: (det_doubled - det_squared).abs() / det_squared.abs().max(f64::MIN_POSITIVE),
        eigenvalue_error,
    })
}

/// Per-loop comparison of the pushforward of the doubled loop measure with
/// `m'(w) + m'(w^R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushforwardCheck {
    pub max_error: f64,
    pub loops_checked: u64,
    /// `sum_w Phi_* m(w)` over the enumerated loops.
    pub pushforward_total: f64,
    /// `sum_w m'(w)` over the same loops.
    pub base_total: Complex64,
}

/// Enumerates rooted loops `w` on `A` of length `<= max_length` and, for
/// each, sums `m` over all `2^|w|` lifts to `A u A*`.
pub fn pushforward_check(q: &WeightMatrix, max_length: usize) -> Result<PushforwardCheck> {
    let (doubled, cert) = double_weights(q)?;
    if !cert.acceptable {
        return Err(Error::NotAcceptable {
            radius: cert.spectral_radius_abs,
        });
    }
    let n = q.len();
    let lifts_per_loop = 1u64.checked_shl(max_length as u32).unwrap_or(u64::MAX);
    let budget = DEFAULT_LOOP_BUDGET * 100 / lifts_per_loop.max(1);
    if budget == 0 {
        return Err(Error::TooLarge(format!("2^{max_length} lifts per loop")));
    }
    let mut max_error = 0.0f64;
    let mut pushforward_total = 0.0;
    let mut base_total = Complex64::new(0.0, 0.0);
    let mut lifted = Vec::with_capacity(max_length + 1);
    let loops_checked = visit_loops(q, max_length, budget, |sites, weight| {
        let len = sites.len() - 1;
        let mut lhs = 0.0;
        for mask in 0u64..(1 << len) {
            lifted.clear();
            lifted.extend((0..len).map(|j| sites[j] + n * ((mask >> j) & 1) as usize));
            lifted.push(lifted[0]);
            lhs += path_weight(&doubled, &lifted).re;
        }
        lhs /= len as f64;
        let reversed: Vec<usize> = sites.iter().rev().copied().collect();
        let rhs = (weight + path_weight(q, &reversed)) / len as f64;
        max_error = max_error.max((Complex64::new(lhs, 0.0) - rhs).norm());
        pushforward_total += lhs;
        base_total += weight / len as f64;
    })
    .map_err(|e| match e {
        Error::BudgetExceeded { budget } => Error::TooLarge(format!("more than {budget} loops")),
        other => other,
    })?;
    Ok(PushforwardCheck {
        max_error,
        loops_checked,
        pushforward_total,
        base_total,
    })
}
