//! Poisson semigroups, loop soups and occupation fields.
//!
//! For complex weights the soup is only a complex measure, so everything
//! here that draws random samples requires real nonnegative weights. The
//! complex case is reached through closed-form Laplace transforms:
//!
//! ```text
//! nu_t[exp(-L.f)]         = (det G_f / det G)^t
//! nu_t^trivial[exp(-L.f)] = prod_x (1 + f(x))^{-t}
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loops::{loop_mass_tail, path_weight, visit_loops, RootedLoop, DEFAULT_LOOP_BUDGET};
use crate::matrix::{with_rounding_slack, WeightMatrix};
use crate::rng::Substreams;
use crate::stats::{ComplexSum, MeanEstimate};

/// Default tail tolerance for tabulated Poisson laws.
pub const POISSON_TAIL_TOL: f64 = 1e-12;
/// Number of points on the homotopy `s f`, `s in [0, 1]`, used to detect
/// branch crossings of the determinant ratio.
const HOMOTOPY_STEPS: usize = 256;

/// The Poisson "distribution" `q(k) = e^{-lambda} lambda^k / k!` for complex
/// `lambda`, tabulated on `0..=kmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPoissonLaw {
    lambda: Complex64,
    masses: Vec<Complex64>,
}

impl ComplexPoissonLaw {
    pub fn new(lambda: Complex64, kmax: usize) -> Self {
        let mut masses = Vec::with_capacity(kmax + 1);
        let mut q = (-lambda).exp();
        masses.push(q);
        for k in 1..=kmax {
            q = q * lambda / k as f64;
            masses.push(q);
        }
        Self { lambda, masses }
    }

    /// Truncated at the smallest `kmax` whose tail bound is below 1e-12.
    pub fn with_default_truncation(lambda: Complex64) -> Self {
        let mut kmax = 0;
        while Self::tail_bound_for(lambda, kmax) >= POISSON_TAIL_TOL {
            kmax += 1;
        }
        Self::new(lambda, kmax)
    }

    /// Law of a Poisson process with rate `lambda` at time `t`.
    pub fn at_time(lambda: Complex64, t: f64, kmax: usize) -> Self {
        Self::new(lambda * t, kmax)
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn kmax(&self) -> usize {
        self.masses.len() - 1
    }

    pub fn masses(&self) -> &[Complex64] {
        &self.masses
    }

    /// Total variation `exp(|lambda| - Re lambda)`.
    pub fn variation_norm(&self) -> f64 {
        (self.lambda.norm() - self.lambda.re).exp()
    }

    /// `sum_{k <= kmax} |q(k)|`.
    pub fn truncated_variation(&self) -> f64 {
        self.masses.iter().map(|q| q.norm()).sum()
    }

    /// Bound on `sum_{k > kmax} |q(k)|`.
    pub fn tail_bound(&self) -> f64 {
        Self::tail_bound_for(self.lambda, self.kmax())
    }

    fn tail_bound_for(lambda: Complex64, kmax: usize) -> f64 {
        let r = lambda.norm();
        let mut term = 1.0;
        for k in 1..=kmax + 1 {
            term *= r / k as f64;
        }
        term * (r - lambda.re).exp()
    }

    /// Convolution on the common support `0..=min(kmax)`.
    pub fn convolve(&self, other: &Self) -> Vec<Complex64> {
        let k = self.kmax().min(other.kmax());
        (0..=k)
            .map(|n| (0..=n).map(|j| self.masses[j] * other.masses[n - j]).sum())
            .collect()
    }

    /// `sum_k e^{k alpha} q(k)` over the table.
    pub fn laplace_transform(&self, alpha: Complex64) -> Complex64 {
        let e = alpha.exp();
        let mut factor = Complex64::new(1.0, 0.0);
        let mut sum = ComplexSum::default();
        for q in &self.masses {
            sum.add(q * factor);
            factor *= e;
        }
        sum.value()
    }

    /// `exp(lambda (e^alpha - 1))`.
    pub fn laplace_closed(&self, alpha: Complex64) -> Complex64 {
        (self.lambda * (alpha.exp() - 1.0)).exp()
    }

    /// Bound on the part of the Laplace sum beyond `kmax`.
    pub fn laplace_tail_bound(&self, alpha: Complex64) -> f64 {
        let r = self.lambda.norm() * alpha.re.exp();
        let mut term = 1.0;
        for k in 1..=self.kmax() + 1 {
            term *= r / k as f64;
        }
        (-self.lambda.re).exp() * term * r.exp()
    }
}

/// Total loop-soup mass `sum_w m(w) = -log det(I - Q)` for positive `Q`.
pub fn soup_total_mass(q: &WeightMatrix) -> Result<f64> {
    if !q.flags().positive {
        return Err(Error::NotPositive);
    }
    q.require_acceptable()?;
    let det = q.laplacian_determinant().re;
    Ok(-det.ln())
}

/// A finite multiset of rooted loops drawn at intensity `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSoupSample {
    pub intensity: f64,
    pub n_sites: usize,
    /// Loops in the order they were drawn, as site sequences `[w_0..w_n]`.
    pub loops: Vec<Vec<usize>>,
}

impl LoopSoupSample {
    pub fn rooted_loops(&self) -> Vec<RootedLoop> {
        self.loops
            .iter()
            .map(|w| RootedLoop::new(w.clone()).expect("sampled loops are loops"))
            .collect()
    }

    /// Multiplicity of each distinct loop.
    pub fn multiplicities(&self) -> std::collections::BTreeMap<Vec<usize>, usize> {
        let mut out = std::collections::BTreeMap::new();
        for w in &self.loops {
            *out.entry(w.clone()).or_insert(0) += 1;
        }
        out
    }

    /// Total number of steps over all loops.
    pub fn total_steps(&self) -> u64 {
        self.loops.iter().map(|w| (w.len() - 1) as u64).sum()
    }
}

/// Exact sampler for the rooted loop soup of a positive acceptable matrix.
///
/// A soup at intensity `t` has `Poisson(t * mass)` loops, each drawn
/// independently from `m / mass`: the length `n` with probability
/// `tr(Q^n) / (n mass)`, the root `x` with probability `Q^n(x,x) / tr(Q^n)`,
/// and the body as a Markov bridge
/// `P(w_j = y | w_{j-1} = z) = Q(z,y) Q^{n-j}(y,x) / Q^{n-j+1}(z,x)`.
#[derive(Debug, Clone)]
pub struct SoupSampler {
    q: DMatrix<f64>,
    mass: f64,
    rho: f64,
    /// `Q^k` scaled to unit max entry, `k = 0..`.
    powers: Vec<DMatrix<f64>>,
    /// `cumulative[n - 1] = sum_{k <= n} tr(Q^k) / k`.
    cumulative: Vec<f64>,
}

impl SoupSampler {
    pub fn new(weights: &WeightMatrix) -> Result<Self> {
        let mass = soup_total_mass(weights)?;
        let q = weights.real_entries().ok_or(Error::NotPositive)?.map(|v| v.max(0.0));
        let rho = weights.spectral_radius_abs();
        let n = q.nrows();
        let mut powers = vec![DMatrix::identity(n, n)];
        let mut cumulative = Vec::new();
        let mut log_scale = 0.0f64;
        let mut acc = 0.0;
        const PRECOMPUTE_CAP: usize = 10_000;
        while powers.len() <= PRECOMPUTE_CAP {
            let len = powers.len();
            let (next, scale) = normalized(&q * &powers[len - 1]);
            if scale == 0.0 {
                break;
            }
            log_scale += scale.ln();
            acc += next.trace() * log_scale.exp() / len as f64;
            powers.push(next);
            cumulative.push(acc);
            if loop_mass_tail(n, rho, len) < 1e-17 * mass.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        Ok(Self {
            q,
            mass,
            rho,
            powers,
            cumulative,
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.mass
    }

    pub fn n_sites(&self) -> usize {
        self.q.nrows()
    }

    /// A soup at intensity `t`.
    pub fn sample<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<LoopSoupSample> {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::OutOfDomain(format!("intensity {t} must be positive")));
        }
        let rate = t * self.mass;
        let count = if rate > 0.0 {
            Poisson::new(rate)
                .map_err(|e| Error::NumericalFailure(e.to_string()))?
                .sample(rng) as usize
        } else {
            0
        };
        let loops = (0..count).map(|_| self.sample_loop(rng)).collect();
        Ok(LoopSoupSample {
            intensity: t,
            n_sites: self.n_sites(),
            loops,
        })
    }

    /// One loop from the normalized loop measure.
    pub fn sample_loop<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let target = rng.random::<f64>() * self.mass;
        let len = self.sample_length(target);
        let extended;
        let powers: &[DMatrix<f64>] = if len < self.powers.len() {
            &self.powers
        } else {
            extended = self.extend_powers(len);
            &extended
        };
        let power = &powers[len];
        let n = self.n_sites();
        let trace = power.trace();
        let mut u = rng.random::<f64>() * trace;
        let mut root = n - 1;
        for x in 0..n {
            u -= power[(x, x)];
            if u < 0.0 {
                root = x;
                break;
            }
        }
        let mut path = Vec::with_capacity(len + 1);
        path.push(root);
        let mut z = root;
        let mut weights = vec![0.0; n];
        for j in 1..len {
            let remaining = &powers[len - j];
            let mut total = 0.0;
            for y in 0..n {
                weights[y] = self.q[(z, y)] * remaining[(y, root)];
                total += weights[y];
            }
            let mut u = rng.random::<f64>() * total;
            let mut next = None;
            for (y, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    next = Some(y);
                    u -= w;
                    if u < 0.0 {
                        break;
                    }
                }
            }
            z = next.expect("bridge has a positive continuation");
            path.push(z);
        }
        path.push(root);
        path
    }

    fn sample_length(&self, target: f64) -> usize {
        if let Some(i) = self.cumulative.iter().position(|&c| c > target) {
            return i + 1;
        }
        // Beyond the precomputed range (probability < 1e-17): keep extending
        // until the partial sum passes the target or the certified tail
        // envelope drops below rounding level.
        let n_sites = self.n_sites();
        let mut acc = *self.cumulative.last().unwrap_or(&0.0);
        let mut len = self.cumulative.len();
        let mut power = self.q.pow(len as u32);
        loop {
            len += 1;
            power = &self.q * &power;
            acc += power.trace() / len as f64;
            if acc > target || loop_mass_tail(n_sites, self.rho, len) <= 1e-15 * self.mass {
                return len;
            }
        }
    }

    fn extend_powers(&self, len: usize) -> Vec<DMatrix<f64>> {
        let mut powers = self.powers.clone();
        while powers.len() <= len {
            let (next, _) = normalized(&self.q * powers.last().expect("identity present"));
            powers.push(next);
        }
        powers
    }
}

fn normalized(m: DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let scale = m.amax();
    if scale == 0.0 {
        (m, 0.0)
    } else {
        (m / scale, scale)
    }
}

/// Draw one soup; see [`SoupSampler`] to amortise setup over many draws.
pub fn sample_soup<R: Rng + ?Sized>(q: &WeightMatrix, t: f64, rng: &mut R) -> Result<LoopSoupSample> {
    SoupSampler::new(q)?.sample(t, rng)
}

/// Site-indexed occupation field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OccupationField {
    /// Visit counts `L(x) = sum_w C(w) N^w(x)`.
    Discrete { counts: Vec<u64> },
    /// Counts replaced by gamma holding times, optionally with the trivial
    /// loop field added.
    Continuous { values: Vec<f64>, includes_trivial: bool },
}

impl OccupationField {
    pub fn len(&self) -> usize {
        match self {
            Self::Discrete { counts } => counts.len(),
            Self::Continuous { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Discrete { counts } => counts.iter().map(|&c| c as f64).collect(),
            Self::Continuous { values, .. } => values.clone(),
        }
    }

    /// `sum_x L(x) f(x)`.
    pub fn dot(&self, f: &[f64]) -> f64 {
        match self {
            Self::Discrete { counts } => counts.iter().zip(f).map(|(&c, &v)| c as f64 * v).sum(),
            Self::Continuous { values, .. } => values.iter().zip(f).map(|(a, b)| a * b).sum(),
        }
    }
}

/// Discrete occupation field of a soup.
pub fn discrete_occupation(soup: &LoopSoupSample) -> OccupationField {
    let mut counts = vec![0u64; soup.n_sites];
    for w in &soup.loops {
        for &s in &w[1..] {
            counts[s] += 1;
        }
    }
    OccupationField::Discrete { counts }
}

/// Replace each visit count `L(x)` by `Gamma(L(x) + t_trivial, 1)`: the sum of
/// `L(x)` unit exponentials plus, when `t_trivial > 0`, an independent trivial
/// loop contribution `Gamma(t_trivial, 1)`.
pub fn continuous_occupation<R: Rng + ?Sized>(
    field: &OccupationField,
    t_trivial: f64,
    rng: &mut R,
) -> Result<OccupationField> {
    if !t_trivial.is_finite() || t_trivial < 0.0 {
        return Err(Error::InvalidShape(t_trivial));
    }
    let OccupationField::Discrete { counts } = field else {
        return Err(Error::OutOfDomain("expected a discrete occupation field".into()));
    };
    let values = counts
        .iter()
        .map(|&c| {
            let shape = c as f64 + t_trivial;
            if shape == 0.0 {
                Ok(0.0)
            } else {
                Gamma::new(shape, 1.0)
                    .map(|g| g.sample(rng))
                    .map_err(|_| Error::InvalidShape(shape))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OccupationField::Continuous {
        values,
        includes_trivial: t_trivial > 0.0,
    })
}

/// `N` continuous occupation fields at intensity `t` with trivial-loop time
/// `t_trivial`; sample `i` uses substream `i`, so the result does not depend
/// on thread scheduling.
pub fn sample_occupation_fields(
    sampler: &SoupSampler,
    t: f64,
    t_trivial: f64,
    n: usize,
    streams: Substreams,
) -> Result<Vec<OccupationField>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(i);
            let soup = sampler.sample(t, &mut rng)?;
            continuous_occupation(&discrete_occupation(&soup), t_trivial, &mut rng)
        })
        .collect()
}

/// `nu_t[exp(-L.f)] = (det G_f / det G)^t` with the principal branch.
///
/// For non-integer `t` the ratio is followed along `s f`, `s in [0, 1]`; if
/// it crosses the negative real axis the principal value differs from the
/// continuous one and [`Error::BranchCrossing`] is returned.
pub fn nu_transform_closed(q: &WeightMatrix, f: &[f64], t: f64) -> Result<Complex64> {
    q.require_acceptable()?;
    let det = q.laplacian_determinant();
    let ratio_at = |s: f64| -> Result<Complex64> {
        let scaled: Vec<f64> = f.iter().map(|v| v * s).collect();
        let qf = q.perturb_real(&scaled)?;
        qf.require_acceptable()?;
        Ok(det / qf.laplacian_determinant())
    };
    let ratio = ratio_at(1.0)?;
    if t.fract() != 0.0 {
        let mut prev = Complex64::new(1.0, 0.0);
        for i in 1..=HOMOTOPY_STEPS {
            let r = ratio_at(i as f64 / HOMOTOPY_STEPS as f64)?;
            if crosses_negative_axis(prev, r) {
                return Err(Error::BranchCrossing(format!(
                    "det G_f / det G winds across the negative axis near s = {}",
                    i as f64 / HOMOTOPY_STEPS as f64
                )));
            }
            prev = r;
        }
    }
    Ok((ratio.ln() * t).exp())
}

fn crosses_negative_axis(a: Complex64, b: Complex64) -> bool {
    if b.norm() == 0.0 || (b.im == 0.0 && b.re < 0.0) {
        return true;
    }
    if (a.im >= 0.0) == (b.im >= 0.0) {
        return false;
    }
    // The segment meets the real axis at this abscissa.
    let x = a.re - a.im * (b.re - a.re) / (b.im - a.im);
    x < 0.0
}

/// `nu_t^trivial[exp(-L.f)] = prod_x (1 + f(x))^{-t}`.
pub fn trivial_transform_closed(f: &[f64], t: f64) -> Result<f64> {
    let mut product = 1.0;
    for (x, &v) in f.iter().enumerate() {
        let base = 1.0 + v;
        if base == 0.0 {
            return Err(Error::DivisionByZero { site: x });
        }
        if base < 0.0 && t.fract() != 0.0 {
            return Err(Error::BranchError { site: x });
        }
        product *= base.powf(-t);
    }
    Ok(product)
}

/// Monte Carlo estimate of a Laplace functional against its closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformReport {
    pub f: Vec<f64>,
    pub closed_form: Option<f64>,
    pub empirical: f64,
    pub mc_stderr: f64,
    pub samples: usize,
}

impl TransformReport {
    pub fn with_closed_form(mut self, value: f64) -> Self {
        self.closed_form = Some(value);
        self
    }

    /// `|closed - empirical| / stderr`.
    pub fn deviation(&self) -> Option<f64> {
        let closed = self.closed_form?;
        let diff = (closed - self.empirical).abs();
        Some(if self.mc_stderr > 0.0 {
            diff / self.mc_stderr
        } else if diff <= 1e-12 * closed.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY
        })
    }

    /// Whether the closed form is within `k` standard errors.
    pub fn agrees(&self, k: f64) -> bool {
        self.deviation().is_some_and(|d| d <= k)
    }
}

/// Mean and standard error of `exp(-L.f)` over the given fields.
pub fn empirical_transform(samples: &[OccupationField], f: &[f64]) -> TransformReport {
    let values: Vec<f64> = samples.iter().map(|s| (-s.dot(f)).exp()).collect();
    let est = MeanEstimate::from_samples(&values);
    TransformReport {
        f: f.to_vec(),
        closed_form: None,
        empirical: est.mean,
        mc_stderr: est.stderr,
        samples: est.samples,
    }
}

/// Both sides of `mu_{2t} = mu_{t, m^R}` at the level of Laplace transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReversalCheck {
    /// `(det G_f / det G)^{2t}`.
    pub lhs: Complex64,
    /// `exp(t sum_{|w| <= L} [m^R_f(w) - m^R(w)])` with `m^R(w) = m(w) + m(w^R)`.
    pub rhs: Complex64,
    pub tail_bound: f64,
}

impl ReversalCheck {
    pub fn error(&self) -> f64 {
        (self.lhs - self.rhs).norm()
    }

    pub fn holds(&self) -> bool {
        self.error() <= self.tail_bound
    }
}

pub fn reversal_symmetrization_check(q: &WeightMatrix, f: &[f64], t: f64, max_length: usize) -> Result<ReversalCheck> {
    let cert = q.require_acceptable()?;
    let qf = q.perturb_real(f)?;
    let cert_f = qf.require_acceptable()?;
    let lhs = nu_transform_closed(q, f, 2.0 * t)?;

    // Enumerate on the support of Q + Q^T so every w with m(w) or m(w^R)
    // nonzero is visited.
    let sym = WeightMatrix::from_real(&(q.abs_matrix() + q.abs_matrix().transpose()))?;
    let mut sum = ComplexSum::default();
    visit_loops(&sym, max_length, DEFAULT_LOOP_BUDGET, |sites, _| {
        let n = (sites.len() - 1) as f64;
        let reversed: Vec<usize> = sites.iter().rev().copied().collect();
        let m_sym = (path_weight(q, sites) + path_weight(q, &reversed)) / n;
        let factor: f64 = sites[1..].iter().map(|&s| 1.0 / (1.0 + f[s])).product();
        sum.add(m_sym * (factor - 1.0));
    })?;
    let exponent = sum.value() * t;
    let rhs = exponent.exp();
    let tail = 2.0
        * (loop_mass_tail(q.len(), cert.spectral_radius_abs, max_length)
            + loop_mass_tail(q.len(), cert_f.spectral_radius_abs, max_length));
    Ok(ReversalCheck {
        lhs,
        rhs,
        tail_bound: with_rounding_slack(rhs.norm() * (t.abs() * tail).exp_m1()),
    })
}

/// The constant `alpha = exp(t sum_w (|m(w)| - Re m(w)))` relating the
/// variation of the complex soup to the soup of `|Q|`, truncated at length
/// `max_length`. Returns `(alpha_L, bound on alpha - alpha_L)`.
pub fn variation_bound_alpha(q: &WeightMatrix, t: f64, max_length: usize) -> Result<(f64, f64)> {
    let cert = q.require_acceptable()?;
    if q.flags().positive {
        return Ok((1.0, 0.0));
    }
    let mut sum = crate::stats::CompensatedSum::default();
    visit_loops(q, max_length, DEFAULT_LOOP_BUDGET, |sites, w| {
        let m = w / (sites.len() - 1) as f64;
        sum.add(m.norm() - m.re);
    })?;
    let alpha = (t * sum.value()).exp();
    let tail = 2.0 * loop_mass_tail(q.len(), cert.spectral_radius_abs, max_length);
    Ok((alpha, with_rounding_slack(alpha * (t * tail).exp_m1())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain_tag, Substreams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one_point(q: f64) -> WeightMatrix {
        WeightMatrix::from_real_rows(1, &[q]).unwrap()
    }

    fn two_state() -> WeightMatrix {
        WeightMatrix::from_real_rows(2, &[0.0, 0.5, 0.5, 0.0]).unwrap()
    }

    #[test]
    fn poisson_variation_examples() {
        let p = ComplexPoissonLaw::with_default_truncation(c(2.5, 0.0));
        assert_relative_eq!(p.variation_norm(), 1.0);
        assert_relative_eq!(p.truncated_variation(), 1.0, epsilon = 1e-11);
        let p = ComplexPoissonLaw::with_default_truncation(c(-1.0, 0.0));
        assert_relative_eq!(p.variation_norm(), 1f64.exp().powi(2), epsilon = 1e-12);
        assert_relative_eq!(p.truncated_variation(), 7.38905609893065, epsilon = 1e-10);
        let p = ComplexPoissonLaw::with_default_truncation(c(0.0, 1.0));
        assert_relative_eq!(p.variation_norm(), std::f64::consts::E, epsilon = 1e-12);
        assert!(p.tail_bound() < POISSON_TAIL_TOL);
    }

    #[test]
    fn poisson_laplace_transform() {
        let p = ComplexPoissonLaw::at_time(c(0.3, -0.8), 1.5, 40);
        for alpha in [c(0.0, 0.0), c(0.4, 0.0), c(-1.0, 2.0)] {
            let diff = (p.laplace_transform(alpha) - p.laplace_closed(alpha)).norm();
            assert!(diff <= p.laplace_tail_bound(alpha) + 1e-14, "{alpha}: {diff}");
        }
    }

    #[test]
    fn soup_total_mass_examples() {
        assert_relative_eq!(soup_total_mass(&one_point(0.5)).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(
            soup_total_mass(&two_state()).unwrap(),
            (4.0f64 / 3.0).ln(),
            epsilon = 1e-15
        );
        assert_eq!(soup_total_mass(&WeightMatrix::zeros(2).unwrap()).unwrap(), 0.0);
        let neg = WeightMatrix::from_real_rows(1, &[-0.5]).unwrap();
        assert_eq!(soup_total_mass(&neg), Err(Error::NotPositive));
        let complex = WeightMatrix::from_complex(DMatrix::from_element(1, 1, c(0.0, 0.5))).unwrap();
        assert_eq!(
            sample_soup(&complex, 1.0, &mut Substreams::new(1, 1).stream(0)),
            Err(Error::NotPositive)
        );
    }

    #[test]
    fn bipartite_soup_has_even_loops() {
        let sampler = SoupSampler::new(&two_state()).unwrap();
        let s = Substreams::new(5, domain_tag("even"));
        for i in 0..2000 {
            let soup = sampler.sample(1.0, &mut s.stream(i)).unwrap();
            for w in &soup.loops {
                assert_eq!((w.len() - 1) % 2, 0);
                assert!(w.windows(2).all(|e| e[0] != e[1]));
            }
        }
    }

    #[test]
    fn sampled_loops_follow_support() {
        let q = WeightMatrix::from_real_rows(3, &[0.0, 0.4, 0.0, 0.0, 0.0, 0.4, 0.4, 0.0, 0.1]).unwrap();
        let sampler = SoupSampler::new(&q).unwrap();
        let s = Substreams::new(9, 0);
        for i in 0..2000 {
            let w = sampler.sample_loop(&mut s.stream(i));
            assert_eq!(w.first(), w.last());
            assert!(w.windows(2).all(|e| q.has_edge(e[0], e[1])), "{w:?}");
        }
    }

    #[test]
    fn tiny_intensity_gives_mostly_empty_soups() {
        let sampler = SoupSampler::new(&one_point(0.5)).unwrap();
        let s = Substreams::new(11, 0);
        let t = 1e-9;
        let nonempty = (0..10_000)
            .filter(|&i| !sampler.sample(t, &mut s.stream(i)).unwrap().loops.is_empty())
            .count();
        assert_eq!(nonempty, 0);
    }

    #[test]
    fn discrete_occupation_examples() {
        let empty = LoopSoupSample {
            intensity: 1.0,
            n_sites: 2,
            loops: vec![],
        };
        assert_eq!(
            discrete_occupation(&empty),
            OccupationField::Discrete { counts: vec![0, 0] }
        );
        let two = LoopSoupSample {
            intensity: 1.0,
            n_sites: 2,
            loops: vec![vec![0, 1, 0], vec![0, 1, 0]],
        };
        assert_eq!(
            discrete_occupation(&two),
            OccupationField::Discrete { counts: vec![2, 2] }
        );
        assert_eq!(two.multiplicities().get(&vec![0, 1, 0]), Some(&2));
        let one = LoopSoupSample {
            intensity: 1.0,
            n_sites: 1,
            loops: vec![vec![0, 0], vec![0, 0, 0, 0]],
        };
        assert_eq!(discrete_occupation(&one), OccupationField::Discrete { counts: vec![4] });
    }

    #[test]
    fn continuous_occupation_examples() {
        let mut rng = Substreams::new(3, 0).stream(0);
        let zero = OccupationField::Discrete { counts: vec![0, 0] };
        let out = continuous_occupation(&zero, 0.0, &mut rng).unwrap();
        assert_eq!(out.values(), vec![0.0, 0.0]);
        assert!(matches!(
            continuous_occupation(&zero, -1.0, &mut rng),
            Err(Error::InvalidShape(_))
        ));

        let s = Substreams::new(3, domain_tag("gamma"));
        let one = OccupationField::Discrete { counts: vec![1] };
        let draws: Vec<f64> = (0..100_000)
            .map(|i| continuous_occupation(&one, 0.0, &mut s.stream(i)).unwrap().values()[0])
            .collect();
        assert!(MeanEstimate::from_samples(&draws).within(1.0, 4.0));
        let draws: Vec<f64> = (0..100_000)
            .map(|i| {
                continuous_occupation(&zero, 0.5, &mut s.child(1).stream(i))
                    .unwrap()
                    .values()[0]
            })
            .collect();
        assert!(MeanEstimate::from_samples(&draws).within(0.5, 4.0));
    }

    #[test]
    fn nu_transform_examples() {
        assert_relative_eq!(nu_transform_closed(&two_state(), &[0.0, 0.0], 0.7).unwrap().re, 1.0);
        let v = nu_transform_closed(&one_point(0.5), &[1.0], 1.0).unwrap();
        let (q, s) = (0.5, 1.0);
        assert_relative_eq!(v.re, (1.0 + s - q * (1.0 + s)) / (1.0 + s - q), epsilon = 1e-14);
        assert_relative_eq!(v.re, 2.0 / 3.0, epsilon = 1e-14);
        let v = nu_transform_closed(&one_point(0.5), &[1.0], 0.5).unwrap();
        assert_relative_eq!(v.re, (2.0f64 / 3.0).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn nu_transform_flags_branch_crossing() {
        // One site with q = 0.9 i: ratio (1 - q)/(1 - q/(1+s)) winds as s
        // goes complex; use a real f but a weight making the ratio cross.
        let q = WeightMatrix::from_complex(DMatrix::from_element(1, 1, c(-0.95, 0.05))).unwrap();
        // ratio(s) = (1 - q) / (1 - q/(1+s)); real part stays positive here.
        assert!(nu_transform_closed(&q, &[3.0], 0.5).is_ok());
        assert!(crosses_negative_axis(c(-1.0, 0.1), c(-1.0, -0.1)));
        assert!(!crosses_negative_axis(c(1.0, 0.1), c(1.0, -0.1)));
    }

    #[test]
    fn trivial_transform_examples() {
        assert_eq!(trivial_transform_closed(&[0.0, 0.0], 0.5).unwrap(), 1.0);
        assert_relative_eq!(trivial_transform_closed(&[1.0], 0.5).unwrap(), 2f64.powf(-0.5));
        assert_relative_eq!(trivial_transform_closed(&[1.0, 3.0], 1.0).unwrap(), 0.125);
        assert_eq!(
            trivial_transform_closed(&[-2.0], 0.5),
            Err(Error::BranchError { site: 0 })
        );
        assert_relative_eq!(trivial_transform_closed(&[-2.0], 1.0).unwrap(), -1.0);
    }

    #[test]
    fn empirical_transform_of_zero_fields() {
        let fields = vec![OccupationField::Discrete { counts: vec![0, 0] }; 5];
        let r = empirical_transform(&fields, &[0.3, 0.2]).with_closed_form(1.0);
        assert_eq!((r.empirical, r.mc_stderr), (1.0, 0.0));
        assert!(r.agrees(4.0));
    }

    #[test]
    fn reversal_examples() {
        let zero = reversal_symmetrization_check(&two_state(), &[0.0, 0.0], 0.5, 8).unwrap();
        assert_relative_eq!(zero.lhs.re, 1.0);
        assert_relative_eq!(zero.rhs.re, 1.0);
        let sym = reversal_symmetrization_check(&two_state(), &[0.2, 0.1], 0.5, 30).unwrap();
        assert!(sym.holds(), "{sym:?}");
        let i = c(0.0, 1.0);
        let h = WeightMatrix::from_complex(DMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), i * 0.5, -i * 0.5, c(0.0, 0.0)],
        ))
        .unwrap();
        let r = reversal_symmetrization_check(&h, &[0.3, 0.1], 0.5, 30).unwrap();
        assert!(r.holds(), "{r:?}");
        assert!(r.lhs.im.abs() < 1e-14 && r.rhs.im.abs() < 1e-14);
    }

    #[test]
    fn variation_alpha_examples() {
        assert_eq!(variation_bound_alpha(&two_state(), 1.0, 10).unwrap(), (1.0, 0.0));
        let z = variation_bound_alpha(&WeightMatrix::zeros(2).unwrap(), 1.0, 10).unwrap();
        assert_eq!(z.0, 1.0);
        let q = WeightMatrix::from_complex(DMatrix::from_element(1, 1, c(0.0, 0.5))).unwrap();
        let (alpha, tail) = variation_bound_alpha(&q, 1.0, 30).unwrap();
        let exact: f64 = (1..=30)
            .map(|n| {
                let m = c(0.0, 0.5).powu(n) / n as f64;
                m.norm() - m.re
            })
            .sum();
        assert_relative_eq!(alpha, exact.exp(), epsilon = 1e-14);
        // full series: sum 0.5^n/n - Re sum (i/2)^n/n = ln 2 + ln|1 - i/2|
        let full = 2f64.ln() + (1.25f64).sqrt().ln();
        assert!((full.exp() - alpha).abs() <= tail);
    }

    proptest! {
        #[test]
        fn poisson_semigroup(re1 in -1.0f64..1.0, im1 in -1.0f64..1.0, re2 in -1.0f64..1.0, im2 in -1.0f64..1.0) {
            let a = ComplexPoissonLaw::new(c(re1, im1), 40);
            let b = ComplexPoissonLaw::new(c(re2, im2), 40);
            let ab = ComplexPoissonLaw::new(c(re1 + re2, im1 + im2), 40);
            for (x, y) in a.convolve(&b).iter().zip(ab.masses()) {
                prop_assert!((x - y).norm() <= 1e-10);
            }
        }

        #[test]
        fn occupation_counts_total_steps(seed in 0u64..50) {
            let q = WeightMatrix::from_real_rows(2, &[0.2, 0.3, 0.3, 0.2]).unwrap();
            let soup = sample_soup(&q, 2.0, &mut Substreams::new(seed, 0).stream(0)).unwrap();
            let field = discrete_occupation(&soup);
            let OccupationField::Discrete { counts } = field else { unreachable!() };
            prop_assert_eq!(counts.iter().sum::<u64>(), soup.total_steps());
            for (x, &count) in counts.iter().enumerate() {
                let per_site: u64 = soup.rooted_loops().iter().map(|w| w.local_time(x) as u64).sum();
                prop_assert_eq!(count, per_site);
            }
        }
    }
}
