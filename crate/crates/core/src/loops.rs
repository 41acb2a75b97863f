//! Rooted and unrooted loops, the loop measure, and brute-force loop sums.
//!
//! The rooted loop measure gives a loop `w` of length `n` the weight
//! `m(w) = Q(w) / n`. Its push-forward to unrooted loops (rotation classes)
//! weighs a class with `d` distinct rotations by `(d / n) Q(w)`. Exponentials
//! of the total mass are determinants:
//!
//! ```text
//! F(A)   = exp(sum_w m(w))                        = 1 / det(I - Q)
//! F_V(A) = exp(sum over loops meeting V of m(w))  = prod_j G_{A_j}(v_j, v_j)
//! ```
//!
//! The enumeration here is deliberately naive: it is the oracle the
//! determinant formulas are checked against.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{with_rounding_slack, WeightMatrix};
use crate::stats::ComplexSum;

/// Default cap on the number of loops a single summation may visit.
pub const DEFAULT_LOOP_BUDGET: u64 = 10_000_000;

/// A loop `[w_0, ..., w_n]` with `w_0 = w_n` and `n >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RootedLoop {
    sites: Vec<usize>,
}

impl RootedLoop {
    pub fn new(sites: Vec<usize>) -> Result<Self> {
        if sites.len() < 2 {
            return Err(Error::InvalidPath("a loop needs at least one step".into()));
        }
        if sites.first() != sites.last() {
            return Err(Error::InvalidPath("loop does not return to its root".into()));
        }
        Ok(Self { sites })
    }

    /// Build from the step sequence `w_0 .. w_{n-1}`; the root is appended.
    pub fn from_steps(steps: &[usize]) -> Result<Self> {
        let mut sites = steps.to_vec();
        match steps.first() {
            Some(&root) => sites.push(root),
            None => return Err(Error::InvalidPath("empty step sequence".into())),
        }
        Self::new(sites)
    }

    /// All sites including the closing repeat of the root.
    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    /// `w_0 .. w_{n-1}`.
    pub fn steps(&self) -> &[usize] {
        &self.sites[..self.sites.len() - 1]
    }

    /// Number of steps `|w|`.
    pub fn len(&self) -> usize {
        self.sites.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn root(&self) -> usize {
        self.sites[0]
    }

    pub fn reversed(&self) -> Self {
        let mut sites = self.sites.clone();
        sites.reverse();
        Self { sites }
    }

    /// The loop re-rooted at `w_k`.
    pub fn rotated(&self, k: usize) -> Self {
        let steps = self.steps();
        let n = steps.len();
        let rotated: Vec<usize> = (0..n).map(|i| steps[(i + k) % n]).collect();
        Self::from_steps(&rotated).expect("rotation of a loop is a loop")
    }

    pub fn visits(&self, x: usize) -> bool {
        self.steps().contains(&x)
    }

    /// Local time `N(x)`: number of `j in 1..=n` with `w_j = x`.
    pub fn local_time(&self, x: usize) -> usize {
        self.sites[1..].iter().filter(|&&s| s == x).count()
    }

    /// Local times at every site of a space of size `n_sites`.
    pub fn local_times(&self, n_sites: usize) -> Vec<u64> {
        let mut out = vec![0u64; n_sites];
        for &s in &self.sites[1..] {
            out[s] += 1;
        }
        out
    }

    pub fn check_sites(&self, n_sites: usize) -> Result<()> {
        match self.sites.iter().find(|&&s| s >= n_sites) {
            Some(bad) => Err(Error::UnknownSite(bad.to_string())),
            None => Ok(()),
        }
    }
}

/// A rotation class of rooted loops. Orientation is kept.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnrootedLoop {
    canonical: RootedLoop,
    period: usize,
}

impl UnrootedLoop {
    /// Lexicographically least rotation.
    pub fn canonical(&self) -> &RootedLoop {
        &self.canonical
    }

    /// Number `d` of distinct rooted representatives.
    pub fn period(&self) -> usize {
        self.period
    }

    pub fn len(&self) -> usize {
        self.canonical.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn reversed(&self) -> Self {
        canonicalize(&self.canonical.reversed())
    }

    /// The `d` distinct rooted loops in the class.
    pub fn representatives(&self) -> Vec<RootedLoop> {
        (0..self.period).map(|k| self.canonical.rotated(k)).collect()
    }
}

/// Forget the root of a loop.
pub fn canonicalize(w: &RootedLoop) -> UnrootedLoop {
    let steps = w.steps();
    let shift = least_rotation(steps);
    UnrootedLoop {
        canonical: w.rotated(shift),
        period: minimal_period(steps),
    }
}

/// Whether `w` is already the canonical representative of its class.
///
/// Equivalent to being lexicographically no larger than every rotation;
/// checked without allocating since enumeration calls it for every loop.
pub fn is_canonical(steps: &[usize]) -> bool {
    let n = steps.len();
    let first = match steps.first() {
        Some(&f) => f,
        None => return true,
    };
    if steps.iter().any(|&s| s < first) {
        return false;
    }
    (1..n).filter(|&k| steps[k] == first).all(|k| {
        for i in 0..n {
            let (a, b) = (steps[i], steps[(i + k) % n]);
            if a != b {
                return a < b;
            }
        }
        true
    })
}

/// Booth's least-rotation algorithm.
fn least_rotation(s: &[usize]) -> usize {
    let n = s.len();
    if n == 0 {
        return 0;
    }
    let at = |i: usize| s[i % n];
    let mut fail = vec![-1isize; 2 * n];
    let mut k = 0usize;
    for j in 1..2 * n {
        let sj = at(j);
        let mut i = fail[j - k - 1];
        while i != -1 && sj != at(k + i as usize + 1) {
            if sj < at(k + i as usize + 1) {
                k = j - i as usize - 1;
            }
            i = fail[i as usize];
        }
        if i == -1 && sj != at(k) {
            if sj < at(k) {
                k = j;
            }
            fail[j - k] = -1;
        } else {
            fail[j - k] = i + 1;
        }
    }
    k % n
}

/// Smallest `p` dividing `n` with `s` invariant under rotation by `p`.
fn minimal_period(s: &[usize]) -> usize {
    let n = s.len();
    let mut prefix = vec![0usize; n];
    for i in 1..n {
        let mut k = prefix[i - 1];
        while k > 0 && s[i] != s[k] {
            k = prefix[k - 1];
        }
        if s[i] == s[k] {
            k += 1;
        }
        prefix[i] = k;
    }
    let p = n - prefix[n - 1];
    if n.is_multiple_of(p) {
        p
    } else {
        n
    }
}

/// Path weight `Q(w) = prod_j Q(w_{j-1}, w_j)`; one for a trivial path.
pub fn path_weight(q: &WeightMatrix, path: &[usize]) -> Complex64 {
    path.windows(2)
        .fold(Complex64::new(1.0, 0.0), |acc, e| acc * q.get(e[0], e[1]))
}

/// Rooted loop measure `m(w) = Q(w) / |w|`.
pub fn rooted_measure(q: &WeightMatrix, w: &RootedLoop) -> Complex64 {
    path_weight(q, w.sites()) / w.len() as f64
}

/// Unrooted loop measure `(d / |w|) Q(w)`.
pub fn unrooted_measure(q: &WeightMatrix, w: &UnrootedLoop) -> Complex64 {
    path_weight(q, w.canonical().sites()) * (w.period() as f64 / w.len() as f64)
}

/// `m_f(w) = m(w) prod_{j=1}^{n} 1 / (1 + f(w_j))`, which equals the loop
/// measure of [`WeightMatrix::perturb`] evaluated at `w`.
pub fn perturbed_measure(q: &WeightMatrix, f: &[Complex64], w: &RootedLoop) -> Result<Complex64> {
    let mut factor = Complex64::new(1.0, 0.0);
    for &s in &w.sites()[1..] {
        let denom = Complex64::new(1.0, 0.0) + f[s];
        if denom.norm() <= crate::matrix::SUPPORT_TOL {
            return Err(Error::DivisionByZero { site: s });
        }
        factor /= denom;
    }
    Ok(rooted_measure(q, w) * factor)
}

/// Local time of `w` at `x`.
pub fn local_time(w: &RootedLoop, x: usize) -> usize {
    w.local_time(x)
}

/// Adjacency lists of the present edges, sorted by target.
#[derive(Debug, Clone)]
pub struct Support {
    adj: Vec<Vec<usize>>,
}

impl Support {
    pub fn of(q: &WeightMatrix) -> Self {
        let n = q.len();
        let adj = (0..n).map(|x| (0..n).filter(|&y| q.has_edge(x, y)).collect()).collect();
        Self { adj }
    }

    pub fn from_adjacency(adj: Vec<Vec<usize>>) -> Self {
        let mut adj = adj;
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        Self { adj }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adj[x]
    }

    /// Shortest number of steps from each site to `target` (`usize::MAX` if
    /// unreachable).
    pub fn distances_to(&self, target: usize) -> Vec<usize> {
        let n = self.adj.len();
        let mut reverse = vec![Vec::new(); n];
        for (x, row) in self.adj.iter().enumerate() {
            for &y in row {
                reverse[y].push(x);
            }
        }
        let mut dist = vec![usize::MAX; n];
        dist[target] = 0;
        let mut queue = VecDeque::from([target]);
        while let Some(y) = queue.pop_front() {
            for &x in &reverse[y] {
                if dist[x] == usize::MAX {
                    dist[x] = dist[y] + 1;
                    queue.push_back(x);
                }
            }
        }
        dist
    }
}

/// Stream of every rooted loop of length `1..=max_length` on a support, in
/// lexicographic order of the site sequence.
pub struct RootedLoops {
    support: Support,
    max_length: usize,
    root: usize,
    dist: Vec<usize>,
    path: Vec<usize>,
    cursor: Vec<usize>,
}

impl Iterator for RootedLoops {
    type Item = RootedLoop;

    fn next(&mut self) -> Option<RootedLoop> {
        if self.max_length == 0 {
            return None;
        }
        loop {
            if self.path.is_empty() {
                if self.root >= self.support.len() {
                    return None;
                }
                self.dist = self.support.distances_to(self.root);
                self.path.push(self.root);
                self.cursor.push(0);
            }
            let depth = self.path.len() - 1;
            let z = self.path[depth];
            let c = self.cursor[depth];
            let nbrs = self.support.neighbors(z);
            if depth < self.max_length && c < nbrs.len() {
                self.cursor[depth] += 1;
                let y = nbrs[c];
                if self.dist[y] > self.max_length - depth - 1 {
                    continue;
                }
                self.path.push(y);
                self.cursor.push(0);
                if y == self.root {
                    return Some(RootedLoop {
                        sites: self.path.clone(),
                    });
                }
            } else {
                self.path.pop();
                self.cursor.pop();
                if self.path.is_empty() {
                    self.root += 1;
                }
            }
        }
    }
}

/// Every rooted loop of length at most `max_length` using only edges of `support`.
pub fn enumerate_rooted_loops(support: Support, max_length: usize) -> RootedLoops {
    RootedLoops {
        support,
        max_length,
        root: 0,
        dist: Vec::new(),
        path: Vec::new(),
        cursor: Vec::new(),
    }
}

/// Depth-first visit of every loop of length `<= max_length` on the support
/// of `q`, passing the site sequence and `Q(w)`. Returns the number of loops
/// visited, or [`Error::BudgetExceeded`].
pub fn visit_loops<F>(q: &WeightMatrix, max_length: usize, budget: u64, mut visit: F) -> Result<u64>
where
    F: FnMut(&[usize], Complex64),
{
    struct Walk<'a, F> {
        q: &'a WeightMatrix,
        support: Support,
        dist: Vec<usize>,
        root: usize,
        max_length: usize,
        budget: u64,
        count: u64,
        path: Vec<usize>,
        visit: &'a mut F,
    }

    impl<F: FnMut(&[usize], Complex64)> Walk<'_, F> {
        fn descend(&mut self, weight: Complex64) -> Result<()> {
            let depth = self.path.len() - 1;
            if depth == self.max_length {
                return Ok(());
            }
            let z = self.path[depth];
            let remaining = self.max_length - depth - 1;
            for i in 0..self.support.neighbors(z).len() {
                let y = self.support.neighbors(z)[i];
                if self.dist[y] > remaining {
                    continue;
                }
                let w = weight * self.q.get(z, y);
                self.path.push(y);
                if y == self.root {
                    self.count += 1;
                    if self.count > self.budget {
                        return Err(Error::BudgetExceeded { budget: self.budget });
                    }
                    (self.visit)(&self.path, w);
                }
                self.descend(w)?;
                self.path.pop();
            }
            Ok(())
        }
    }

    let mut walk = Walk {
        q,
        support: Support::of(q),
        dist: Vec::new(),
        root: 0,
        max_length,
        budget,
        count: 0,
        path: Vec::with_capacity(max_length + 1),
        visit: &mut visit,
    };
    for root in 0..q.len() {
        walk.root = root;
        walk.dist = walk.support.distances_to(root);
        walk.path.clear();
        walk.path.push(root);
        walk.descend(Complex64::new(1.0, 0.0))?;
    }
    Ok(walk.count)
}

/// `F(A) = 1 / det(I - Q)`.
pub fn f_exact(q: &WeightMatrix) -> Result<Complex64> {
    q.require_acceptable()?;
    Ok(q.laplacian_determinant().inv())
}

/// `F_V(A) = prod_j G_{A_j}(v_j, v_j)` for an ordered subset `V`.
pub fn f_v_exact(q: &WeightMatrix, v: &[usize]) -> Result<Complex64> {
    q.sequential_greens_product(v)
}

/// Certified bound on `sum_{|w| > L} |m(w)|`:
/// `n rho^{L+1} / ((L + 1)(1 - rho))`, from `tr |Q|^k <= n rho^k`.
pub fn loop_mass_tail(n_sites: usize, rho: f64, max_length: usize) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    let l1 = (max_length + 1) as f64;
    with_rounding_slack(n_sites as f64 * rho.powf(l1) / (l1 * (1.0 - rho)))
}

/// Result of a truncated loop-measure summation.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedF {
    /// `exp` of the truncated loop sum.
    pub value: Complex64,
    /// Bound on `|F - value|`.
    pub tail_bound: f64,
    /// Truncated `sum m(w)` over rooted loops.
    pub rooted_sum: Complex64,
    /// The same sum grouped by unrooted loops, `sum (d/n) Q(w~)`.
    pub unrooted_sum: Complex64,
    /// Bound on the omitted part of the loop sum.
    pub log_tail_bound: f64,
    pub loops_visited: u64,
}

/// Truncated `F(A)` or `F_V(A)` from explicit loop enumeration.
pub fn f_truncated(q: &WeightMatrix, max_length: usize, v: Option<&[usize]>) -> Result<TruncatedF> {
    let cert = q.require_acceptable()?;
    let mut mask = vec![v.is_none(); q.len()];
    if let Some(v) = v {
        for &x in v {
            *mask.get_mut(x).ok_or_else(|| Error::UnknownSite(x.to_string()))? = true;
        }
    }
    let mut rooted = ComplexSum::default();
    let mut unrooted = ComplexSum::default();
    let count = visit_loops(q, max_length, DEFAULT_LOOP_BUDGET, |sites, weight| {
        let steps = &sites[..sites.len() - 1];
        if v.is_some() && !steps.iter().any(|&s| mask[s]) {
            return;
        }
        let n = steps.len() as f64;
        rooted.add(weight / n);
        if is_canonical(steps) {
            unrooted.add(weight * (minimal_period(steps) as f64 / n));
        }
    })?;
    let rooted_sum = rooted.value();
    let unrooted_sum = unrooted.value();
    let log_tail = loop_mass_tail(q.len(), cert.spectral_radius_abs, max_length);
    let value = rooted_sum.exp();
    Ok(TruncatedF {
        value,
        tail_bound: with_rounding_slack(value.norm() * log_tail.exp_m1()),
        rooted_sum,
        unrooted_sum,
        log_tail_bound: log_tail,
        loops_visited: count,
    })
}

/// Loop sums from a single enumeration pass, grouped by length and by the
/// sites a loop meets.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSums {
    pub max_length: usize,
    /// `by_length[k]` sums `m(w)` over rooted loops of length `k` (index 0 unused).
    pub by_length_rooted: Vec<Complex64>,
    /// Same, summed over unrooted classes with weight `(d/n) Q`.
    pub by_length_unrooted: Vec<Complex64>,
    /// `meeting[x]` sums `m(w)` over rooted loops that visit `x`.
    pub meeting: Vec<Complex64>,
    pub total: Complex64,
    /// Bound on the omitted part of every sum above.
    pub tail_bound: f64,
    pub loops_visited: u64,
}

pub fn loop_sums(q: &WeightMatrix, max_length: usize, budget: u64) -> Result<LoopSums> {
    let cert = q.require_acceptable()?;
    let n_sites = q.len();
    let mut by_len_r = vec![ComplexSum::default(); max_length + 1];
    let mut by_len_u = vec![ComplexSum::default(); max_length + 1];
    let mut meeting = vec![ComplexSum::default(); n_sites];
    let mut seen = vec![false; n_sites];
    let count = visit_loops(q, max_length, budget, |sites, weight| {
        let steps = &sites[..sites.len() - 1];
        let n = steps.len();
        let m = weight / n as f64;
        by_len_r[n].add(m);
        if is_canonical(steps) {
            by_len_u[n].add(weight * (minimal_period(steps) as f64 / n as f64));
        }
        for &s in steps {
            if !seen[s] {
                seen[s] = true;
                meeting[s].add(m);
            }
        }
        for &s in steps {
            seen[s] = false;
        }
    })?;
    let by_length_rooted: Vec<Complex64> = by_len_r.iter().map(ComplexSum::value).collect();
    let by_length_unrooted: Vec<Complex64> = by_len_u.iter().map(ComplexSum::value).collect();
    Ok(LoopSums {
        max_length,
        total: crate::stats::pairwise_sum_complex(&by_length_rooted),
        by_length_rooted,
        by_length_unrooted,
        meeting: meeting.iter().map(ComplexSum::value).collect(),
        tail_bound: loop_mass_tail(n_sites, cert.spectral_radius_abs, max_length),
        loops_visited: count,
    })
}

/// `|exp(a) - exp(b)|` bound when `|a - b| <= tail`: `|exp(b)| (e^tail - 1)`.
pub fn exp_tail(log_value: Complex64, tail: f64) -> f64 {
    with_rounding_slack(log_value.exp().norm() * tail.exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn one_point(q: f64) -> WeightMatrix {
        WeightMatrix::from_real_rows(1, &[q]).unwrap()
    }

    fn two_state() -> WeightMatrix {
        WeightMatrix::from_real_rows(2, &[0.0, 0.5, 0.5, 0.0]).unwrap()
    }

    #[test]
    fn loop_construction() {
        assert!(RootedLoop::new(vec![0]).is_err());
        assert!(RootedLoop::new(vec![0, 1]).is_err());
        let w = RootedLoop::new(vec![0, 1, 0]).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w.steps(), &[0, 1]);
        assert!(w.check_sites(1).is_err());
    }

    #[test]
    fn path_weight_examples() {
        assert_eq!(path_weight(&two_state(), &[1]), Complex64::new(1.0, 0.0));
        assert_relative_eq!(path_weight(&one_point(0.5), &[0, 0, 0, 0]).re, 0.125);
        assert_relative_eq!(path_weight(&two_state(), &[0, 1, 0]).re, 0.25);
    }

    #[test]
    fn hermitian_reversal_conjugates_weight() {
        let i = Complex64::new(0.0, 1.0);
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.1, 0.0),
                0.3 * i + 0.1,
                -0.3 * i + 0.1,
                Complex64::new(0.2, 0.0),
            ],
        );
        let q = WeightMatrix::from_complex(m).unwrap();
        let path = [0, 1, 1, 0, 0, 1, 0];
        let rev: Vec<usize> = path.iter().rev().copied().collect();
        let a = path_weight(&q, &path);
        let b = path_weight(&q, &rev);
        assert_relative_eq!(a.re, b.re, epsilon = 1e-15);
        assert_relative_eq!(a.im, -b.im, epsilon = 1e-15);
    }

    #[test]
    fn enumeration_examples() {
        let loops: Vec<_> = enumerate_rooted_loops(Support::of(&one_point(0.5)), 3).collect();
        assert_eq!(
            loops.iter().map(|w| w.sites().to_vec()).collect::<Vec<_>>(),
            vec![vec![0, 0], vec![0, 0, 0], vec![0, 0, 0, 0]]
        );
        let loops: Vec<_> = enumerate_rooted_loops(Support::of(&two_state()), 3).collect();
        assert_eq!(
            loops.iter().map(|w| w.sites().to_vec()).collect::<Vec<_>>(),
            vec![vec![0, 1, 0], vec![1, 0, 1]]
        );
        let empty = WeightMatrix::zeros(3).unwrap();
        assert_eq!(enumerate_rooted_loops(Support::of(&empty), 5).count(), 0);
    }

    #[test]
    fn enumeration_counts_match_traces() {
        // Full support on 3 sites: 3^k rooted loops of length k.
        let q = WeightMatrix::from_real(&DMatrix::from_element(3, 3, 0.1)).unwrap();
        let total = enumerate_rooted_loops(Support::of(&q), 5).count();
        assert_eq!(total, 3 + 9 + 27 + 81 + 243);
        let visited = visit_loops(&q, 5, DEFAULT_LOOP_BUDGET, |_, _| {}).unwrap();
        assert_eq!(visited as usize, total);
        assert_eq!(
            visit_loops(&q, 5, 10, |_, _| {}),
            Err(Error::BudgetExceeded { budget: 10 })
        );
    }

    #[test]
    fn canonicalize_examples() {
        // a=0, b=1, c=2
        let w = RootedLoop::new(vec![0, 1, 2, 0, 1, 0, 1, 2, 0, 1, 0]).unwrap();
        let u = canonicalize(&w);
        assert_eq!(u.len(), 10);
        assert_eq!(u.period(), 5);
        assert_eq!(canonicalize(&RootedLoop::new(vec![0, 1, 0]).unwrap()).period(), 2);
        assert_eq!(canonicalize(&RootedLoop::new(vec![0, 0]).unwrap()).period(), 1);
        let u = canonicalize(&RootedLoop::new(vec![2, 0, 1, 2]).unwrap());
        assert_eq!(u.canonical().sites(), &[0, 1, 2, 0]);
    }

    #[test]
    fn local_time_examples() {
        let w = RootedLoop::new(vec![0, 1, 0]).unwrap();
        assert_eq!((local_time(&w, 0), local_time(&w, 1)), (1, 1));
        let w = RootedLoop::new(vec![0; 6]).unwrap();
        assert_eq!(local_time(&w, 0), 5);
        let w = RootedLoop::new(vec![0, 1, 2, 0, 1, 0, 1, 2, 0, 1, 0]).unwrap();
        assert_eq!(local_time(&w, 0), 4);
        assert_eq!(w.local_times(3), vec![4, 4, 2]);
    }

    #[test]
    fn f_exact_examples() {
        assert_relative_eq!(f_exact(&one_point(0.5)).unwrap().re, 2.0, epsilon = 1e-14);
        assert_relative_eq!(f_exact(&two_state()).unwrap().re, 4.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(f_v_exact(&two_state(), &[0]).unwrap().re, 4.0 / 3.0, epsilon = 1e-14);
        let zero = WeightMatrix::zeros(2).unwrap();
        assert_eq!(f_exact(&zero).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(f_v_exact(&zero, &[1, 0]).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn f_truncated_examples() {
        let t = f_truncated(&one_point(0.5), 20, None).unwrap();
        let partial: f64 = (1..=20).map(|n| 0.5f64.powi(n) / n as f64).sum();
        assert_relative_eq!(t.rooted_sum.re, partial, epsilon = 1e-14);
        assert!((t.value.re - 2.0).abs() <= t.tail_bound);
        assert_relative_eq!(t.rooted_sum.re, t.unrooted_sum.re, epsilon = 1e-14);

        let t = f_truncated(&two_state(), 12, None).unwrap();
        assert!((t.value - Complex64::new(4.0 / 3.0, 0.0)).norm() <= t.tail_bound);

        let t = f_truncated(&WeightMatrix::zeros(3).unwrap(), 7, None).unwrap();
        assert_eq!(t.value, Complex64::new(1.0, 0.0));
        assert_eq!(t.tail_bound, with_rounding_slack(0.0));
    }

    #[test]
    fn one_point_loop_mass_is_log_two() {
        let t = f_truncated(&one_point(0.5), 60, None).unwrap();
        assert_relative_eq!(t.rooted_sum.re, 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn perturbed_measure_examples() {
        let q = one_point(0.5);
        let w = RootedLoop::new(vec![0; 4]).unwrap();
        let zero = [Complex64::new(0.0, 0.0)];
        assert_eq!(perturbed_measure(&q, &zero, &w).unwrap(), rooted_measure(&q, &w));
        let one = [Complex64::new(1.0, 0.0)];
        assert_relative_eq!(perturbed_measure(&q, &one, &w).unwrap().re, 0.25f64.powi(3) / 3.0);

        let f = [Complex64::new(1.0, 0.0); 2];
        let w = RootedLoop::new(vec![0, 1, 0]).unwrap();
        assert_relative_eq!(perturbed_measure(&two_state(), &f, &w).unwrap().re, 0.25 * 0.25 / 2.0);

        let minus = [Complex64::new(-1.0, 0.0); 2];
        assert!(perturbed_measure(&two_state(), &minus, &w).is_err());
    }

    #[test]
    fn perturbed_measure_is_measure_of_perturbed_matrix() {
        let q = WeightMatrix::from_real_rows(3, &[0.1, 0.2, 0.0, 0.3, 0.0, 0.1, 0.2, 0.2, 0.1]).unwrap();
        let f = [
            Complex64::new(0.3, 0.1),
            Complex64::new(0.5, 0.0),
            Complex64::new(-0.2, 0.2),
        ];
        let qf = q.perturb(&f).unwrap();
        for w in enumerate_rooted_loops(Support::of(&q), 5) {
            let a = perturbed_measure(&q, &f, &w).unwrap();
            let b = rooted_measure(&qf, &w);
            assert!((a - b).norm() <= 1e-15 * (1.0 + a.norm()));
        }
    }

    fn brute_least_rotation(s: &[usize]) -> Vec<usize> {
        let n = s.len();
        (0..n)
            .map(|k| (0..n).map(|i| s[(i + k) % n]).collect::<Vec<_>>())
            .min()
            .unwrap()
    }

    proptest! {
        #[test]
        fn booth_matches_brute_force(word in prop::collection::vec(0usize..3, 1..12)) {
            let w = RootedLoop::from_steps(&word).unwrap();
            let u = canonicalize(&w);
            prop_assert_eq!(u.canonical().steps().to_vec(), brute_least_rotation(&word));
            let distinct: std::collections::BTreeSet<_> =
                (0..word.len()).map(|k| w.rotated(k)).collect();
            prop_assert_eq!(u.period(), distinct.len());
            prop_assert_eq!(word.len() % u.period(), 0);
        }

        #[test]
        fn local_time_is_rotation_and_reversal_invariant(word in prop::collection::vec(0usize..4, 1..12), k in 0usize..12) {
            let w = RootedLoop::from_steps(&word).unwrap();
            let r = w.rotated(k % word.len());
            for x in 0..4 {
                prop_assert_eq!(w.local_time(x), r.local_time(x));
                prop_assert_eq!(w.local_time(x), w.reversed().local_time(x));
            }
        }
    }
}
