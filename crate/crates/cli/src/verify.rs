//! Deterministic identity suites.

use loopsoup::gff::{doubling_check, isomorphism_identity_check, pushforward_check};
use loopsoup::lerw::{
    enumerate_spanning_trees, lerw_bruteforce_table, lerw_measure_formula, lerw_tail_bound, tree_count_det,
    MAX_ENUMERATION_VERTICES,
};
use loopsoup::loops::{exp_tail, f_truncated, loop_sums, DEFAULT_LOOP_BUDGET};
use loopsoup::matrix::FirstReturnMode;
use loopsoup::soup::reversal_symmetrization_check;
use loopsoup::{BoundaryProblem, ComplexGffModel, WeightMatrix};
use serde_json::json;

use crate::report::{complex, CheckReport};
use crate::suite::{enumeration_length, fixture_inputs, full_grid, test_functions, Context, Suite};

/// Walks enumerated per check, roughly; keeps the default run to seconds.
const WALK_BUDGET: f64 = 2e6;
/// Loop-times-lift budget for the pushforward check.
const LIFT_BUDGET: f64 = 2e7;
const MAX_ORDERINGS: usize = 120;

pub fn suites() -> Vec<Suite> {
    vec![
        Suite {
            id: "ordering-product",
            anchor: "1/det Δ = ∏ G_{A_j}(x_j, x_j)",
            run: ordering_product,
        },
        Suite {
            id: "restricted-loop-sum",
            anchor: "F_V(A) = ∏ G_{A_j}(x_j, x_j)",
            run: restricted_loop_sum,
        },
        Suite {
            id: "loop-sum-determinant",
            anchor: "F(A) = 1/det Δ",
            run: loop_sum_determinant,
        },
        Suite {
            id: "first-return",
            anchor: "A standard renewal argument shows",
            run: first_return,
        },
        Suite {
            id: "loop-erased-measure",
            anchor: "Q̂(η;A) = Q(η) F_η(A)",
            run: loop_erased_measure,
        },
        Suite {
            id: "matrix-tree",
            anchor: "the total number of spanning trees is det[D−K]",
            run: matrix_tree,
        },
        Suite {
            id: "reversal-symmetrization",
            anchor: "μ_{2t} = μ_{t,m^R}",
            run: reversal,
        },
        Suite {
            id: "isomorphism-identity",
            anchor: "= 1/√det(Δ+D_f) · 1/√det G",
            run: isomorphism_identity,
        },
        Suite {
            id: "doubling-pushforward",
            anchor: "Φ_* m(ω) = 2 m̃′_R(ω) = m′(ω) + m′(ω^R)",
            run: doubling_pushforward,
        },
        Suite {
            id: "doubling-determinant",
            anchor: "G = (A: G_R, −G_I; A*: G_I, G_R)",
            run: doubling_determinant,
        },
    ]
}

fn orderings(n: usize) -> Vec<Vec<usize>> {
    fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if out.len() >= MAX_ORDERINGS {
            return;
        }
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let mut out = Vec::new();
    permute(&mut (0..n).collect(), 0, &mut out);
    let mut reversed: Vec<usize> = (0..n).rev().collect();
    if !out.contains(&reversed) {
        out.push(std::mem::take(&mut reversed));
    }
    out
}

fn ordering_product(s: &Suite, ctx: &Context) -> Vec<CheckReport> {
    let tol = ctx.config.tolerances.identity;
    ctx.fixtures
        .iter()
        .map(|f| {
            let q = &f.weights;
            let orders = orderings(q.len());
            let inputs = fixture_inputs(f, json!({ "orderings": orders.len() }));
            let exact = q.laplacian_determinant().inv();
            let mut worst = (0.0, exact);
            for o in &orders {
                match q.greens_diagonal_product(o) {
                    Ok(p) => {
                        let rel = (p - exact).norm() / exact.norm();
                        if rel >= worst.0 {
                            worst = (rel, p);
                        }
                    }
                    Err(e) => return s.failed(&inputs, format!("ordering {o:?}: {e}")),
                }
            }
            s.compare(&inputs, complex(worst.1), complex(exact), worst.0, tol)
        })
        .collect()
}

/// `F_V` from loop enumeration against the sequential Green's product, for
/// each single site and each initial segment of the sites.
fn restricted_loop_sum(s: &Suite, ctx: &Context) -> Vec<CheckReport> {
    let mut out = Vec::new();
    for f in &ctx.fixtures {
        let q = &f.weights;
        let l = enumeration_length(q, ctx.config.max_length, WALK_BUDGET);
        let n = q.len();
        let singles = (0..n).map(|x| vec![x]);
        let prefixes = (2..=n).map(|k| (0..k).collect::<Vec<_>>());
        for v in singles.chain(prefixes) {
            let inputs = fixture_inputs(f, json!({ "v": v, "max_length": l }));
            let report = f_truncated(q, l, Some(&v)).and_then(|t| {
                let g = q.sequential_greens_product(&v)?;
                Ok(s.compare(
                    &inputs,
                    complex(t.value),
                    complex(g),
                    (t.value - g).norm(),
                    t.tail_bound,
                ))
            });
            out.push(report.unwrap_or_else(|e| s.failed(&inputs, e)));
        }
        // Single sites again from one enumeration pass.
        let inputs = fixture_inputs(f, json!({ "meeting": "all sites", "max_length": l }));
        let report = loop_sums(q, l, DEFAULT_LOOP_BUDGET).and_then(|sums| {
            let g = q.greens_exact()?;
            let (mut worst, mut lhs, mut rhs) = (0.0f64, Vec::new(), Vec::new());
            for x in 0..n {
                let value = sums.meeting[x].exp();
                let tail = exp_tail(sums.meeting[x], sums.tail_bound);
                let err = (value - g.get(x, x)).norm();
                worst = worst.max(if tail > 0.0 {
                    err / tail
                } else if err == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                });
                lhs.push(complex(value));
                rhs.push(complex(g.get(x, x)));
            }
            // Error is relative to each site's own tail bound.
            Ok(s.compare(&inputs, json!(lhs), json!(rhs), worst, 1.0))
        });
        out.push(report.unwrap_or_else(|e| s.failed(&inputs, e)));
    }
    out
}

fn loop_sum_determinant(s: &Suite, ctx: &Context) -> Vec<CheckReport> {
    ctx.fixtures
        .iter()
        .map(|f| {
            let q = &f.weights;
            let l = enumeration_length(q, ctx.config.max_length, WALK_BUDGET);
            let inputs = fixture_inputs(f, json!({ "max_length": l }));
            let exact = q.laplacian_determinant().inv();
            match f_truncated(q, l, None) {
                Ok(t) => s.compare(
                    &inputs,
                    complex(t.value),
                    complex(exact),
                    (t.value - exact).norm(),
                    t.tail_bound,
                ),
                Err(e) => s.failed(&inputs, e),
            }
        })
        .collect()
}

fn first_return(s: &Suite, ctx: &Context) -> Vec<CheckReport> {
    let mut out = Vec::new();
    for f in &ctx.fixtures {
        let q = &f.weights;
        let l = enumeration_length(q, ctx.config.max_length, WALK_BUDGET);
        for x in 0..q.len() {
            let inputs = fixture_inputs(f, json!({ "site": x, "max_length": l }));
            let report = (|| {
                let brute = q.first_return_weight(x, FirstReturnMode::BruteForce { max_length: l })?;
                let exact = q.first_return_weight(x, FirstReturnMode::ViaGreens)?;
                Ok::<_, loopsoup::Error>(s.compare(
                    &inputs,
                    complex(brute.value),
                    complex(exact.value),
                    (brute.value - exact.value).norm(),
                    brute.tail_bound + ctx.config.tolerances.identity,
                ))
            })();
            out.push(report.unwrap_or_else(|e| s.failed(&inputs, e)));
        }
    }
    out
}

/// Interior is every site but the last; one report per self-avoiding target.
fn loop_erased_measure(s: &Suite, ctx: &Context) -> Vec<CheckReport> {
    let mut out = Vec::new();
    for f in ctx.fixtures.iter().filter(|f| f.weights.len() >= 2) {
        let q = &f.weights;
        let interior: Vec<usize> = (0..q.len() - 1).collect();
        let inner = match q.restrict_indices(&interior) {
            Ok(m) => m,
            Err(e) => {
                out.push(s.failed(&fixture_inputs(f, json!({ "interior": interior })), e));
                continue;
            }
        };
        let l = enumeration_length(&inner, ctx.config.lerw_max_length, WALK_BUDGET);
        let problem = match BoundaryProblem::new(q.clone(), &interior) {
            Ok(p) => p,
            Err(e) => {
                out.push(s.failed(&fixture_inputs(f, json!({ "interior": interior })), e));
                continue;
            }
        };
        for &start in &interior {
            let table = match lerw_bruteforce_table(&problem, start, l) {
                Ok(t) => t,
                Err(e) => {
                    out.push(s.failed(&fixture_inputs(f, json!({ "interior": interior, "start": start })), e));
                    continue;
                }
            };
            for eta in problem.self_avoiding_targets(start) {
                let inputs = fixture_inputs(f, json!({ "interior": interior, "eta": eta, "max_length": l }));
                let report = (|| {
                    let formula = lerw_measure_formula(&problem, &eta)?;
                    let brute = table.get(&eta).copied().unwrap_or_default();
                    let tail = lerw_tail_bound(&problem, start, *eta.last().expect("nonempty"), l)?;
                    Ok::<_, loopsoup::Error>(s.compare(
                        &inputs,
                        complex(formula),
                        complex(brute),
                        (formula - brute).norm(),
                        tail,
                    ))
                })();
                out.push(report.unwrap_or_else(|e| s.failed(&inputs, e)));
            }
        }
    }
    out
}

fn matrix_tree(s: &Suite, ctx: &Context) -> Vec<CheckReport> {
    ctx.graphs
        .iter()
        .map(|g| {
            let inputs = json!({ "graph": g.name, "vertices": g.graph.len(), "edges": g.graph.edges() });
            if g.graph.len() > MAX_ENUMERATION_VERTICES {
                return s.failed(
                    &inputs,
                    format!("enumeration is limited to {MAX_ENUMERATION_VERTICES} vertices"),
                );
            }
            let report = (|| {
                let enumerated = enumerate_spanning_trees(&g.graph)?.len() as u64;
                let counts = (0..g.graph.len())
                    .map(|r| tree_count_det(&g.graph, r))
                    .collect::<Result<Vec<_>, _>>()?;
                let error = counts.iter().map(|&c| c.abs_diff(enumerated)).max().unwrap_or(0) as f64;
                Ok::<_, loopsoup::Error>(s.compare(&inputs, json!(enumerated), json!(counts), error, 0.0))
            })();
            report.unwrap_or_else(|e| s.failed(&inputs, e))
        })
        .collect()
}

fn hermitian(ctx: &Context) -> impl Iterator<Item = &crate::fixtures::Fixture> {
    ctx.fixtures.iter().filter(|f| f.weights.flags().hermitian)
}

/// Run on Hermitian fixtures, where both sides are real and the
/// determinant ratio stays on the principal branch.
fn reversal(s: &Suite, ctx: &Context) -> Vec<CheckReport> {
    let mut out = Vec::new();
    for f in hermitian(ctx).filter(|f| !f.weights.flags().symmetric) {
        let q = &f.weights;
        let sym = WeightMatrix::from_real(&(q.abs_matrix() + q.abs_matrix().transpose()));
        let l = match sym {
            Ok(m) => enumeration_length(&m, ctx.config.max_length, WALK_BUDGET),
            Err(e) => {
                out.push(s.failed(&fixture_inputs(f, json!(null)), e));
                continue;
            }
        };
        for t in [0.5, ctx.config.intensity] {
            for fv in test_functions(q.len()) {
                let inputs = fixture_inputs(f, json!({ "t": t, "f": fv, "max_length": l }));
                out.push(match reversal_symmetrization_check(q, &fv, t, l) {
                    Ok(r) => s.compare(&inputs, complex(r.lhs), complex(r.rhs), r.error(), r.tail_bound),
                    Err(e) => s.failed(&inputs, e),
                });
            }
        }
    }
    out
}

fn isomorphism_identity(s: &Suite, ctx: &Context) -> Vec<CheckReport> {
    let tol = ctx.config.tolerances.identity;
    ctx.fixtures
        .iter()
        .filter(|f| f.weights.flags().real && f.weights.flags().symmetric)
        .map(|f| {
            let grid = full_grid(f.weights.len());
            let inputs = fixture_inputs(f, json!({ "grid": grid }));
            let mut worst: Option<(f64, f64, f64)> = None;
            for fv in &grid {
                match isomorphism_identity_check(&f.weights, fv) {
                    Ok(r) if worst.is_none_or(|w| r.error > w.0) => worst = Some((r.error, r.lhs, r.rhs)),
                    Ok(_) => {}
                    Err(e) => return s.failed(&inputs, format!("f = {fv:?}: {e}")),
                }
            }
            let (error, lhs, rhs) = worst.unwrap_or((0.0, 1.0, 1.0));
            s.compare(&inputs, json!(lhs), json!(rhs), error, tol)
        })
        .collect()
}

fn doubling_pushforward(s: &Suite, ctx: &Context) -> Vec<CheckReport> {
    hermitian(ctx)
        .map(|f| {
            let q = &f.weights;
            let mut l = ctx.config.pushforward_max_length;
            while l > 1 && enumeration_length(q, l, LIFT_BUDGET / 2f64.powi(l as i32)) < l {
                l -= 1;
            }
            let inputs = fixture_inputs(f, json!({ "max_length": l }));
            match pushforward_check(q, l) {
                Ok(p) => s.compare(
                    &inputs,
                    json!(p.pushforward_total),
                    complex(p.base_total * 2.0),
                    p.max_error,
                    ctx.config.tolerances.pushforward,
                ),
                Err(e) => s.failed(&inputs, e),
            }
        })
        .collect()
}

fn doubling_determinant(s: &Suite, ctx: &Context) -> Vec<CheckReport> {
    hermitian(ctx)
        .map(|f| {
            let inputs = fixture_inputs(f, json!(null));
            let report = ComplexGffModel::from_weights(&f.weights).and_then(|m| doubling_check(m.covariance()));
            match report {
                Ok(d) => s.compare(
                    &inputs,
                    json!(d.det_doubled),
                    json!(d.det_squared),
                    d.relative_error,
                    ctx.config.tolerances.identity,
                ),
                Err(e) => s.failed(&inputs, e),
            }
        })
        .collect()
}
