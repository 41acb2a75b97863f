mod fixtures;

use std::collections::BTreeMap;

use fixtures::*;
use loopsoup::lerw::{
    enumerate_spanning_trees, is_self_avoiding, lerw_measure_bruteforce, lerw_measure_formula, loop_erase,
    tree_count_det, wilson_sample, wilson_tree_probability,
};
use loopsoup::loops::{canonicalize, loop_sums, unrooted_measure, DEFAULT_LOOP_BUDGET};
use loopsoup::matrix::{hermitian_eigenvalues, FirstReturnMode};
use loopsoup::rng::{domain_tag, Substreams};
use loopsoup::soup::{
    continuous_occupation, discrete_occupation, empirical_transform, nu_transform_closed, sample_occupation_fields,
    sample_soup, soup_total_mass, trivial_transform_closed, OccupationField, SoupSampler,
};
use loopsoup::stats::{chi_square_gof, MeanEstimate};
use loopsoup::{BoundaryProblem, Complex64, DMatrix, Error, RootedLoop, SimpleGraph, WeightMatrix};
use proptest::prelude::*;

fn random_matrix(seed: u64, n: usize, rho: f64, complex: bool) -> WeightMatrix {
    use rand::Rng;
    let mut rng = Substreams::new(seed, domain_tag("property-matrix")).stream(n as u64);
    let m = DMatrix::from_fn(n, n, |_, _| {
        let re = rng.random_range(-1.0..1.0);
        let im = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
        c(re, im)
    });
    scaled_to(m, rho)
}

fn random_hermitian(seed: u64, n: usize, rho: f64) -> WeightMatrix {
    let q = random_matrix(seed, n, 1.0, true);
    let h = (q.entries() + q.entries().adjoint()) * c(0.5, 0.0);
    scaled_to(h, rho)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn neumann_series_within_tail(seed in any::<u64>(), n in 1usize..6, rho in 0.05f64..0.7, complex in any::<bool>()) {
        let q = random_matrix(seed, n, rho, complex);
        let exact = q.greens_exact().unwrap();
        for terms in [0, 1, 3, 10, 30] {
            let series = q.greens_series(terms).unwrap();
            let err = (&series.entries - &exact.entries).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            prop_assert!(err <= series.tail_bound(), "L = {terms}: {err:e} > {:e}", series.tail_bound());
        }
    }

    #[test]
    fn greens_product_is_order_free(seed in any::<u64>(), n in 1usize..5, rho in 0.05f64..0.7) {
        let q = random_matrix(seed, n, rho, true);
        let exact = inverse_det_oracle(&q);
        let mut order: Vec<usize> = (0..n).collect();
        let mut worst = 0.0f64;
        permutations(&mut order, 0, &mut |p| {
            let v = q.greens_diagonal_product(p).unwrap();
            worst = worst.max((v - exact).norm() / exact.norm());
        });
        prop_assert!(worst <= 1e-9);
    }

    #[test]
    fn hermitian_green_diagonal_is_positive(seed in any::<u64>(), n in 1usize..6, rho in 0.05f64..0.95) {
        let q = random_hermitian(seed, n, rho);
        let g = q.greens_exact().unwrap();
        for x in 0..n {
            prop_assert!(g.get(x, x).im.abs() <= 1e-10 && g.get(x, x).re > 0.0);
        }
        prop_assert!(hermitian_eigenvalues(q.laplacian().entries()).iter().all(|&l| l > 0.0));
    }

    #[test]
    fn renewal_identity(seed in any::<u64>(), n in 1usize..4, rho in 0.05f64..0.6) {
        let q = random_matrix(seed, n, rho, true);
        let g = q.greens_exact().unwrap();
        for x in 0..n {
            let via = q.first_return_weight(x, FirstReturnMode::ViaGreens).unwrap();
            prop_assert!((g.get(x, x) * (1.0 - via.value) - 1.0).norm() <= 1e-10);
            let brute = q.first_return_weight(x, FirstReturnMode::BruteForce { max_length: 10 }).unwrap();
            prop_assert!((brute.value - via.value).norm() <= brute.tail_bound);
        }
    }

    #[test]
    fn loop_erasure_properties(path in prop::collection::vec(0usize..5, 1..40)) {
        let once = loop_erase(&path);
        prop_assert!(is_self_avoiding(&once));
        prop_assert_eq!(loop_erase(&once), once.clone());
        prop_assert_eq!(once.first(), path.first());
        prop_assert_eq!(once.last(), path.last());
    }

    #[test]
    fn probability_identity_on_random_graphs(seed in any::<u64>(), n in 2usize..8) {
        let g = SimpleGraph::random_connected(n, 0.3, &mut Substreams::new(seed, 0).stream(0));
        let count = tree_count_det(&g, 0).unwrap();
        for root in 0..n {
            prop_assert_eq!(tree_count_det(&g, root).unwrap(), count);
        }
        let p = wilson_tree_probability(&g, 0).unwrap();
        prop_assert!((p - 1.0 / count as f64).abs() <= 1e-9);
    }
}

#[test]
fn rooted_and_unrooted_sums_agree_per_length() {
    for q in random_fixtures().iter().filter(|q| q.len() <= 3) {
        let s = loop_sums(q, 10, DEFAULT_LOOP_BUDGET).unwrap();
        for k in 1..=10 {
            let (r, u) = (s.by_length_rooted[k], s.by_length_unrooted[k]);
            assert!((r - u).norm() <= 1e-13 * r.norm().max(1.0), "length {k}: {r} vs {u}");
        }
    }
}

#[test]
fn hermitian_reversal_conjugates_unrooted_measure() {
    let q = hermitian_three();
    for steps in [vec![0, 1, 2], vec![0, 0, 1, 2, 1], vec![0, 2, 2, 1, 1, 1]] {
        let w = canonicalize(&RootedLoop::from_steps(&steps).unwrap());
        let m = unrooted_measure(&q, &w);
        let m_rev = unrooted_measure(&q, &w.reversed());
        assert!((m_rev - m.conj()).norm() < 1e-15);
    }
}

#[test]
fn lerw_formula_on_three_site_problems() {
    for q in random_fixtures().into_iter().filter(|q| q.len() == 3) {
        for interior in [vec![0], vec![1], vec![0, 1], vec![1, 2], vec![0, 2]] {
            let p = BoundaryProblem::new(q.clone(), &interior).unwrap();
            for &start in &interior {
                for eta in p.self_avoiding_targets(start) {
                    let formula = lerw_measure_formula(&p, &eta).unwrap();
                    let brute = lerw_measure_bruteforce(&p, &eta, 14).unwrap();
                    assert!((formula - brute.value).norm() <= brute.tail_bound, "{eta:?}");
                }
            }
        }
    }
}

#[test]
fn wilson_uniform_on_four_cycle() {
    let g = SimpleGraph::cycle(4);
    let trees = enumerate_spanning_trees(&g).unwrap();
    let index: BTreeMap<_, _> = trees.iter().enumerate().map(|(i, t)| (t.edges(), i)).collect();
    let s = Substreams::new(42, domain_tag("wilson-cycle"));
    let mut counts = vec![0u64; trees.len()];
    for i in 0..100_000 {
        let t = wilson_sample(&g, 0, &mut s.stream(i)).unwrap();
        assert!(t.is_spanning_tree_of(&g));
        counts[index[&t.edges()]] += 1;
    }
    assert!(chi_square_gof(&counts, &[0.25; 4]).p_value > 0.001);
}

#[test]
fn soup_mass_matches_loop_sum() {
    for (_, q) in positive_fixtures() {
        let mass = soup_total_mass(&q).unwrap();
        let s = loop_sums(&q, if q.len() > 2 { 9 } else { 20 }, DEFAULT_LOOP_BUDGET).unwrap();
        assert!((s.total.re - mass).abs() <= s.tail_bound);
    }
}

#[test]
fn soup_count_is_poisson() {
    let q = symmetric_four();
    let sampler = SoupSampler::new(&q).unwrap();
    let t = 1.5;
    let s = Substreams::new(42, domain_tag("soup-count"));
    let counts: Vec<f64> = (0..10_000)
        .map(|i| sampler.sample(t, &mut s.stream(i)).unwrap().loops.len() as f64)
        .collect();
    let est = MeanEstimate::from_samples(&counts);
    let lambda = t * sampler.total_mass();
    assert!((est.mean / lambda - 1.0).abs() < 0.05, "mean {} vs {lambda}", est.mean);
    assert!(
        (est.variance / lambda - 1.0).abs() < 0.05,
        "variance {} vs {lambda}",
        est.variance
    );
}

#[test]
fn one_point_loop_lengths_follow_the_loop_measure() {
    let q = one_point(0.5);
    let sampler = SoupSampler::new(&q).unwrap();
    let s = Substreams::new(42, domain_tag("lengths"));
    const BINS: usize = 12;
    let mut counts = vec![0u64; BINS];
    for i in 0..100_000 {
        let w = sampler.sample_loop(&mut s.stream(i));
        assert!(w.iter().all(|&x| x == 0));
        counts[(w.len() - 1).min(BINS) - 1] += 1;
    }
    let mass = 2f64.ln();
    let mut probs: Vec<f64> = (1..BINS).map(|n| 0.5f64.powi(n as i32) / n as f64 / mass).collect();
    probs.push(1.0 - probs.iter().sum::<f64>());
    let test = chi_square_gof(&counts, &probs);
    assert!(test.p_value > 0.001, "{test:?}");
}

#[test]
fn occupation_field_is_additive_and_counts_steps() {
    let sampler = SoupSampler::new(&two_state()).unwrap();
    let s = Substreams::new(3, 0);
    for i in 0..200 {
        let soup = sampler.sample(1.0, &mut s.stream(i)).unwrap();
        let OccupationField::Discrete { counts } = discrete_occupation(&soup) else {
            unreachable!()
        };
        assert_eq!(counts.iter().sum::<u64>(), soup.total_steps());
        let mid = soup.loops.len() / 2;
        let part = |loops: &[Vec<usize>]| {
            let mut sub = soup.clone();
            sub.loops = loops.to_vec();
            discrete_occupation(&sub).values()
        };
        let (a, b) = (part(&soup.loops[..mid]), part(&soup.loops[mid..]));
        let sum: Vec<u64> = a.iter().zip(&b).map(|(x, y)| (x + y) as u64).collect();
        assert_eq!(sum, counts);
    }
}

#[test]
fn rho_samples_match_product_of_transforms() {
    let q = two_state();
    let t = 0.5;
    let sampler = SoupSampler::new(&q).unwrap();
    let fields = sample_occupation_fields(&sampler, t, t, 100_000, Substreams::new(42, domain_tag("rho"))).unwrap();
    for f in mc_grid(2) {
        let closed = nu_transform_closed(&q, &f, t).unwrap().re * trivial_transform_closed(&f, t).unwrap();
        let r = empirical_transform(&fields, &f).with_closed_form(closed);
        assert!(r.agrees(4.0), "{r:?}");
    }
}

#[test]
fn one_point_transform_reproduces_two_thirds() {
    let q = one_point(0.5);
    let sampler = SoupSampler::new(&q).unwrap();
    let fields = sample_occupation_fields(
        &sampler,
        1.0,
        0.0,
        100_000,
        Substreams::new(42, domain_tag("two-thirds")),
    )
    .unwrap();
    let r = empirical_transform(&fields, &[1.0]).with_closed_form(2.0 / 3.0);
    assert!(r.agrees(4.0), "{r:?}");
}

#[test]
fn complex_weights_are_never_sampled() {
    let mut rng = Substreams::new(1, 0).stream(0);
    assert_eq!(sample_soup(&hermitian_pair(), 1.0, &mut rng), Err(Error::NotPositive));
    assert_eq!(sample_soup(&symmetric_signed(), 1.0, &mut rng), Err(Error::NotPositive));
    let big = WeightMatrix::from_real_rows(1, &[1.2]).unwrap();
    assert!(matches!(
        sample_soup(&big, 1.0, &mut rng),
        Err(Error::NotAcceptable { .. })
    ));
}

#[test]
fn gamma_trivial_field_has_gamma_moments() {
    let s = Substreams::new(5, domain_tag("gamma"));
    let zero = OccupationField::Discrete { counts: vec![0] };
    let values: Vec<f64> = (0..100_000)
        .map(|i| continuous_occupation(&zero, 0.5, &mut s.stream(i)).unwrap().values()[0])
        .collect();
    let est = MeanEstimate::from_samples(&values);
    assert!(est.within(0.5, 4.0));
    let var = loopsoup::stats::VarianceEstimate::from_samples(&values);
    assert!((var.variance - 0.5).abs() <= 4.0 * var.stderr);
}

#[test]
fn doubled_green_function_is_real_green_function() {
    let q = hermitian_three();
    let (doubled, cert) = loopsoup::gff::double_weights(&q).unwrap();
    assert!(cert.acceptable);
    let model = loopsoup::ComplexGffModel::from_weights(&q).unwrap();
    let g = doubled.greens_exact().unwrap();
    let real_cov = model.doubled().covariance();
    let err = (g.entries.map(|z: Complex64| z.re) - real_cov).amax();
    assert!(err < 1e-12);
}
