//! Randomized suites. Each suite draws from its own substream family keyed
//! by the suite id, so results do not depend on scheduling.

use std::collections::BTreeMap;

use loopsoup::gff::{chi_square_decomposition_check, complex_covariance_check, isomorphism_mc_check};
use loopsoup::lerw::{enumerate_spanning_trees, wilson_sample, MAX_ENUMERATION_VERTICES};
use loopsoup::rng::{domain_tag, Substreams};
use loopsoup::soup::{empirical_transform, nu_transform_closed, sample_occupation_fields, SoupSampler};
use loopsoup::stats::{chi_square_critical, chi_square_gof, MeanEstimate, VarianceEstimate};
use loopsoup::ComplexGffModel;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::report::CheckReport;
use crate::suite::{fixture_inputs, test_functions, Context, Suite};

/// Smallest expected count per category for the chi-square test to apply.
const MIN_EXPECTED: f64 = 5.0;

pub fn suites() -> Vec<Suite> {
    vec![
        Suite {
            id: "wilson-uniform",
            anchor: "Consider the following algorithm due to David Wilson",
            run: wilson_uniform,
        },
        Suite {
            id: "soup-count",
            anchor: "The (rooted) loop soup is a 'Poissonian realization' of the measure m",
            run: soup_count,
        },
        Suite {
            id: "soup-transform",
            anchor: "ν_t[exp(−ℒ·f)] = (det G_f / det G)^t",
            run: soup_transform,
        },
        Suite {
            id: "isomorphism-mc",
            anchor: "the distribution of ½φ² is ρ_{1/2}",
            run: isomorphism_mc,
        },
        Suite {
            id: "chi-square-decomposition",
            anchor: "Z²/2 has the same distribution at ℒ_{1/2} + Y where Y is an independent Gamma(1/2,1)",
            run: chi_square_decomposition,
        },
        Suite {
            id: "complex-gff-covariance",
            anchor: "ψ_x = φ_x + i φ_{x*} … complex centered Gaussian free field with covariance matrix 2G′",
            run: complex_gff_covariance,
        },
    ]
}

impl Context {
    fn streams(&self, suite: &Suite, index: usize) -> Substreams {
        Substreams::new(self.seed, domain_tag(suite.id)).child(index as u64)
    }

    fn underpowered(&self) -> bool {
        self.config.samples < self.config.min_samples
    }

    /// A comparison in standard errors, inconclusive when the sample count
    /// is below the configured minimum.
    fn mc_report(&self, s: &Suite, inputs: &Value, lhs: Value, rhs: Value, error: f64, tolerance: f64) -> CheckReport {
        let r = s.compare(inputs, lhs, rhs, error, tolerance);
        if self.underpowered() {
            r.inconclusive()
        } else {
            r
        }
    }

    fn mc_inputs(&self, fixture: &crate::fixtures::Fixture, params: Value) -> Value {
        fixture_inputs(
            fixture,
            json!({ "seed": self.seed, "samples": self.config.samples, "params": params }),
        )
    }
}

fn z_score(diff: f64, stderr: f64) -> f64 {
    if stderr > 0.0 {
        diff.abs() / stderr
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn positive(ctx: &Context) -> impl Iterator<Item = (usize, &crate::fixtures::Fixture)> {
    ctx.fixtures
        .iter()
        .enumerate()
        .filter(|(_, f)| f.weights.flags().positive)
}

fn wilson_uniform(s: &Suite, ctx: &Context) -> Vec<CheckReport> {
    let n = ctx.config.samples;
    let alpha = ctx.config.tolerances.chi_square_alpha;
    ctx.graphs
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            let inputs = json!({
                "graph": g.name, "vertices": g.graph.len(), "edges": g.graph.edges(),
                "seed": ctx.seed, "samples": n,
            });
            if g.graph.len() > MAX_ENUMERATION_VERTICES {
                return s.failed(
                    &inputs,
                    format!("enumeration is limited to {MAX_ENUMERATION_VERTICES} vertices"),
                );
            }
            let trees = match enumerate_spanning_trees(&g.graph) {
                Ok(t) => t,
                Err(e) => return s.failed(&inputs, e),
            };
            let index: BTreeMap<_, _> = trees.iter().enumerate().map(|(i, t)| (t.edges(), i)).collect();
            let streams = ctx.streams(s, gi);
            let sampled: Result<Vec<_>, _> = (0..n as u64)
                .into_par_iter()
                .map(|i| wilson_sample(&g.graph, 0, &mut streams.stream(i)))
                .collect();
            let sampled = match sampled {
                Ok(t) => t,
                Err(e) => return s.failed(&inputs, e),
            };
            let mut counts = vec![0u64; trees.len()];
            for t in &sampled {
                match index.get(&t.edges()) {
                    Some(&k) => counts[k] += 1,
                    None => return s.failed(&inputs, "sampled tree is not a spanning tree of the graph"),
                }
            }
            if trees.len() == 1 {
                return ctx.mc_report(s, &inputs, json!(counts), json!(trees.len()), 0.0, 0.0);
            }
            let test = chi_square_gof(&counts, &vec![1.0 / trees.len() as f64; trees.len()]);
            let critical = chi_square_critical(test.degrees_of_freedom, alpha);
            let r = ctx.mc_report(
                s,
                &inputs,
                json!({ "statistic": test.statistic, "p_value": test.p_value }),
                json!({ "critical": critical, "trees": trees.len() }),
                test.statistic,
                critical,
            );
            if (n as f64) / (trees.len() as f64) < MIN_EXPECTED {
                r.inconclusive()
            } else {
                r
            }
        })
        .collect()
}

/// The number of loops in a soup is Poisson with mean `t` times the total
/// loop mass: compare sample mean and variance against it.
fn soup_count(s: &Suite, ctx: &Context) -> Vec<CheckReport> {
    let t = ctx.config.intensity;
    let sigmas = ctx.config.tolerances.sigmas;
    positive(ctx)
        .map(|(fi, f)| {
            let inputs = ctx.mc_inputs(f, json!({ "t": t }));
            let sampler = match SoupSampler::new(&f.weights) {
                Ok(x) => x,
                Err(e) => return s.failed(&inputs, e),
            };
            let streams = ctx.streams(s, fi);
            let counts: Result<Vec<f64>, _> = (0..ctx.config.samples as u64)
                .into_par_iter()
                .map(|i| {
                    sampler
                        .sample(t, &mut streams.stream(i))
                        .map(|soup| soup.loops.len() as f64)
                })
                .collect();
            let counts = match counts {
                Ok(c) => c,
                Err(e) => return s.failed(&inputs, e),
            };
            let lambda = t * sampler.total_mass();
            let mean = MeanEstimate::from_samples(&counts);
            let var = VarianceEstimate::from_samples(&counts);
            let z = z_score(mean.mean - lambda, mean.stderr).max(z_score(var.variance - lambda, var.stderr));
            ctx.mc_report(
                s,
                &inputs,
                json!({ "mean": mean.mean, "variance": var.variance }),
                json!({ "mean": lambda, "variance": lambda }),
                z,
                sigmas,
            )
        })
        .collect()
}

fn soup_transform(s: &Suite, ctx: &Context) -> Vec<CheckReport> {
    let t = ctx.config.intensity;
    positive(ctx)
        .map(|(fi, f)| {
            let grid = test_functions(f.weights.len());
            let inputs = ctx.mc_inputs(f, json!({ "t": t, "grid": grid }));
            let fields = SoupSampler::new(&f.weights)
                .and_then(|sampler| sample_occupation_fields(&sampler, t, 0.0, ctx.config.samples, ctx.streams(s, fi)));
            let fields = match fields {
                Ok(x) => x,
                Err(e) => return s.failed(&inputs, e),
            };
            let (mut worst, mut lhs, mut rhs) = (0.0f64, Vec::new(), Vec::new());
            for fv in &grid {
                let closed = match nu_transform_closed(&f.weights, fv, t) {
                    Ok(c) => c.re,
                    Err(e) => return s.failed(&inputs, e),
                };
                let r = empirical_transform(&fields, fv).with_closed_form(closed);
                worst = worst.max(r.deviation().unwrap_or(f64::INFINITY));
                lhs.push(json!([r.empirical, r.mc_stderr]));
                rhs.push(json!(closed));
            }
            ctx.mc_report(s, &inputs, json!(lhs), json!(rhs), worst, ctx.config.tolerances.sigmas)
        })
        .collect()
}

fn isomorphism_mc(s: &Suite, ctx: &Context) -> Vec<CheckReport> {
    positive(ctx)
        .filter(|(_, f)| f.weights.flags().symmetric)
        .map(|(fi, f)| {
            let grid = test_functions(f.weights.len());
            let inputs = ctx.mc_inputs(f, json!({ "grid": grid }));
            match isomorphism_mc_check(&f.weights, &grid, ctx.config.samples, ctx.streams(s, fi)) {
                Ok(reports) => {
                    let mut worst = 0.0f64;
                    let (mut lhs, mut rhs) = (Vec::new(), Vec::new());
                    for r in &reports {
                        for side in [&r.gff, &r.soup] {
                            worst = worst.max(side.deviation().unwrap_or(f64::INFINITY));
                        }
                        lhs.push(json!({ "gaussian": r.gff.empirical, "soup": r.soup.empirical }));
                        rhs.push(json!(r.gff.closed_form));
                    }
                    ctx.mc_report(s, &inputs, json!(lhs), json!(rhs), worst, ctx.config.tolerances.sigmas)
                }
                Err(e) => s.failed(&inputs, e),
            }
        })
        .collect()
}

/// One-point fixtures only; the test function is `s = 1`.
fn chi_square_decomposition(s: &Suite, ctx: &Context) -> Vec<CheckReport> {
    positive(ctx)
        .filter(|(_, f)| f.weights.len() == 1)
        .map(|(fi, f)| {
            let q = f.weights.get(0, 0).re;
            let inputs = ctx.mc_inputs(f, json!({ "s": 1.0 }));
            match chi_square_decomposition_check(q, 1.0, ctx.config.samples, ctx.streams(s, fi)) {
                Ok(d) => {
                    let worst = [d.gaussian_transform.deviation(), d.soup_transform.deviation()]
                        .into_iter()
                        .map(|x| x.unwrap_or(f64::INFINITY))
                        .fold(d.moment_z_score(), f64::max);
                    ctx.mc_report(
                        s,
                        &inputs,
                        json!({
                            "gaussian": [d.gaussian_mean.mean, d.gaussian_variance.variance],
                            "soup": [d.soup_mean.mean, d.soup_variance.variance],
                        }),
                        json!({ "transform": d.closed_form }),
                        worst,
                        ctx.config.tolerances.sigmas,
                    )
                }
                Err(e) => s.failed(&inputs, e),
            }
        })
        .collect()
}

fn complex_gff_covariance(s: &Suite, ctx: &Context) -> Vec<CheckReport> {
    ctx.fixtures
        .iter()
        .enumerate()
        .filter(|(_, f)| f.weights.flags().hermitian)
        .map(|(fi, f)| {
            let inputs = ctx.mc_inputs(f, json!(null));
            match ComplexGffModel::from_weights(&f.weights) {
                Ok(model) => {
                    let samples = model.sample_many(ctx.config.samples, ctx.streams(s, fi));
                    let c = complex_covariance_check(&model, &samples);
                    ctx.mc_report(
                        s,
                        &inputs,
                        json!({
                            "covariance_error": c.covariance.max_abs_error,
                            "pseudo_covariance_error": c.pseudo_covariance.max_abs_error,
                        }),
                        json!({ "covariance_error": 0.0, "pseudo_covariance_error": 0.0 }),
                        c.covariance.max_z_score.max(c.pseudo_covariance.max_z_score),
                        ctx.config.tolerances.sigmas,
                    )
                }
                Err(e) => s.failed(&inputs, e),
            }
        })
        .collect()
}
