//! Named verification suites: each bundles the module-level invariant
//! checks into (id, pass/fail) rows.  Suites are deterministic given the
//! seed; checks run concurrently and results are reported in canonical
//! id order.

use crate::combinatorics::{self, bkar};
use crate::gaussian;
use crate::model::{Coupling, Model, Volume};
use crate::oracle;
use crate::polymer;
use crate::propagator::{self, Covariance};
use crate::report::{CheckResult, CheckStatus, SuiteResult};
use crate::single_site::{self, SingleSiteParams};
use crate::small_lambda::{self, ZetaConfig};
use num::complex::Complex64;
use num::rational::BigRational;
use num::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::time::Instant;
use thiserror::Error;

pub const SUITES: &[&str] = &[
    "combinatorics",
    "bkar",
    "propagator",
    "single-site",
    "gaussian",
    "polymer",
    "small-lambda",
    "oracle",
];

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("unknown suite `{0}`")]
    SuiteUnknown(String),
    #[error("suite `{0}` requires --model")]
    ModelRequired(String),
}

#[derive(Clone, Copy, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    pub samples: usize,
    pub size_cap: usize,
    pub jobs: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 1,
            samples: 200_000,
            size_cap: 8,
            jobs: 0,
        }
    }
}

struct Outcome {
    status: CheckStatus,
    lhs: f64,
    rhs: f64,
    margin: f64,
    note: String,
}

impl Outcome {
    fn holds(lhs: f64, rhs: f64) -> Self {
        Outcome {
            status: if lhs <= rhs {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            lhs,
            rhs,
            margin: rhs - lhs,
            note: String::new(),
        }
    }

    fn flag(ok: bool, lhs: f64, rhs: f64, note: &str) -> Self {
        Outcome {
            status: if ok {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            lhs,
            rhs,
            margin: rhs - lhs,
            note: note.to_string(),
        }
    }

    fn note(mut self, note: &str) -> Self {
        self.note = note.to_string();
        self
    }
}

type Check = (String, Box<dyn FnOnce() -> Outcome + Send>);

fn check(id: &str, f: impl FnOnce() -> Outcome + Send + 'static) -> Check {
    (id.to_string(), Box::new(f))
}

/// Per-check RNG, derived from the suite seed and the check id so the
/// outcome does not depend on scheduling.
fn rng_for(seed: u64, id: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

/// A random valid model: coupling support within distance 1, Hermitian
/// by construction, J(0) comfortably above J_≠, λ log-uniform.
pub fn random_valid_model(rng: &mut ChaCha8Rng, d: usize) -> Model {
    let mut entries: Vec<(Vec<i64>, Complex64)> = Vec::new();
    // enumerate nonzero offsets with |z|_∞ ≤ 1, keep one of each ± pair
    let mut offsets: Vec<Vec<i64>> = Vec::new();
    let mut z = vec![-1i64; d];
    loop {
        if z.iter().any(|&c| c != 0) && !offsets.contains(&z.iter().map(|&c| -c).collect()) {
            offsets.push(z.clone());
        }
        let mut i = 0;
        loop {
            if i == d {
                break;
            }
            z[i] += 1;
            if z[i] <= 1 {
                break;
            }
            z[i] = -1;
            i += 1;
        }
        if i == d {
            break;
        }
    }
    let mut j_neq = 0.0;
    let mut any = false;
    for off in &offsets {
        if !any || rng.gen_bool(0.7) {
            let v = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            if v.norm() == 0.0 {
                continue;
            }
            any = true;
            j_neq += 2.0 * v.norm();
            let mirror: Vec<i64> = off.iter().map(|&c| -c).collect();
            entries.push((off.clone(), v));
            entries.push((mirror, v.conj()));
        }
    }
    if !any {
        let off = offsets[0].clone();
        let mirror: Vec<i64> = off.iter().map(|&c| -c).collect();
        entries.push((off, Complex64::new(0.25, 0.0)));
        entries.push((mirror, Complex64::new(0.25, 0.0)));
        j_neq = 0.5;
    }
    let j0 = j_neq * rng.gen_range(1.2..5.0);
    entries.push((vec![0; d], Complex64::new(j0, 0.0)));
    let lambda = 10.0f64.powf(rng.gen_range(-2.0..2.0));
    Model::new(Coupling::new(d, entries).unwrap(), lambda)
}

/// A volume of at most `max_sites` sites: a segment, rectangle or box.
pub fn random_volume(rng: &mut ChaCha8Rng, d: usize, max_sites: usize) -> Volume {
    match d {
        1 => Volume::segment(rng.gen_range(1..=max_sites)),
        2 => {
            let a = rng.gen_range(1..=8usize);
            let b = rng.gen_range(1..=(max_sites / a).max(1)).min(8);
            Volume::boxed(&[a, b])
        }
        _ => {
            let a = rng.gen_range(1..=4usize);
            let b = rng.gen_range(1..=4usize);
            let c = rng.gen_range(1..=(max_sites / (a * b)).max(1)).min(4);
            Volume::boxed(&[a, b, c])
        }
    }
}

pub fn run_suite(
    name: &str,
    model: Option<&Model>,
    opts: &SuiteOptions,
) -> Result<SuiteResult, SuiteError> {
    let checks = match name {
        "combinatorics" => combinatorics_checks(opts),
        "bkar" => bkar_checks(opts),
        "propagator" => propagator_checks(opts),
        "single-site" => single_site_checks(opts),
        "gaussian" => gaussian_checks(opts),
        "polymer" => polymer_checks(opts, model),
        "small-lambda" => small_lambda_checks(opts, model),
        "oracle" => oracle_checks(opts, model),
        other => return Err(SuiteError::SuiteUnknown(other.to_string())),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .expect("thread pool");
    let mut results: Vec<CheckResult> = pool.install(|| {
        checks
            .into_par_iter()
            .map(|(id, f)| {
                let start = Instant::now();
                let outcome = f();
                CheckResult {
                    id,
                    status: outcome.status,
                    lhs: outcome.lhs,
                    rhs: outcome.rhs,
                    margin: outcome.margin,
                    note: outcome.note,
                    runtime_ms: start.elapsed().as_millis(),
                }
            })
            .collect()
    });
    results.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(SuiteResult {
        suite: name.to_string(),
        seed: opts.seed,
        checks: results,
    })
}

pub fn run_all(model: Option<&Model>, opts: &SuiteOptions) -> Result<Vec<SuiteResult>, SuiteError> {
    SUITES
        .iter()
        .map(|name| run_suite(name, model, opts))
        .collect()
}

// ---------------------------------------------------------------------

fn combinatorics_checks(_opts: &SuiteOptions) -> Vec<Check> {
    vec![
        check("kappa-closed-vs-recurrence", || {
            let ok = (1..=12)
                .all(|k| combinatorics::kappa_closed_form(k) == combinatorics::kappa_recurrence(k));
            Outcome::flag(ok, 12.0, 12.0, "k <= 12 exact")
        }),
        check("kappa-known-values", || {
            let expect = [(1u32, 1u64), (2, 4), (3, 288), (4, 82944)];
            let ok = expect.iter().all(|&(k, v)| {
                combinatorics::kappa_closed_form(k).to_integer() == num::BigInt::from(v)
            });
            Outcome::flag(ok, 4.0, 4.0, "kappa_1..kappa_4")
        }),
        check("kappa-bruteforce", || {
            let ok = (1..=3).all(|k| {
                let brute = combinatorics::kappa_bruteforce(k).unwrap();
                combinatorics::kappa_closed_form(k).to_integer() == num::BigInt::from(brute)
            });
            Outcome::flag(ok, 3.0, 3.0, "pairing enumeration k <= 3")
        }),
        check("combident-exact", || {
            let ok = (1..=30).all(combinatorics::combident_check);
            Outcome::flag(ok, 30.0, 30.0, "exact in big integers")
        }),
        check("ursell-routes-agree", || {
            let mut count = 0u64;
            for n in 1..=5usize {
                let all = combinatorics::SimpleGraph::complete(n).edges;
                for mask in 0usize..(1 << all.len()) {
                    let edges: Vec<(usize, usize)> = all
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask >> i & 1 == 1)
                        .map(|(_, &e)| e)
                        .collect();
                    let g = combinatorics::SimpleGraph::new(n, edges);
                    let a = combinatorics::ursell_connected_sum(&g).unwrap();
                    let b = combinatorics::ursell_via_chromatic(&g).unwrap();
                    if a != b {
                        return Outcome::flag(false, count as f64, 0.0, "mismatch");
                    }
                    count += 1;
                }
            }
            Outcome::flag(true, count as f64, count as f64, "graphs on <= 5 vertices")
        }),
        check("ursell-reduction", || {
            let mut rng = rng_for(0, "ursell-reduction");
            let mut ok = true;
            for _ in 0..200 {
                let p = rng.gen_range(1..=4usize);
                let family: Vec<BTreeSet<usize>> = (0..p)
                    .map(|_| {
                        let size = rng.gen_range(1..=3usize);
                        (0..size).map(|_| rng.gen_range(0..5usize)).collect()
                    })
                    .collect();
                let z = rng.gen_range(0..5usize);
                let (_, _, equal) = combinatorics::ursell_reduction_check(z, &family).unwrap();
                ok &= equal;
            }
            Outcome::flag(ok, 200.0, 200.0, "singleton reduction exact")
        }),
        check("cayley-degree-formula", || {
            for m in 2..=6usize {
                use std::collections::HashMap;
                let mut counts: HashMap<Vec<u64>, u64> = HashMap::new();
                combinatorics::for_each_spanning_tree(m, &mut |edges| {
                    let mut deg = vec![0u64; m];
                    for &(a, b) in edges {
                        deg[a] += 1;
                        deg[b] += 1;
                    }
                    *counts.entry(deg).or_insert(0) += 1;
                })
                .unwrap();
                for (deg, count) in counts {
                    let formula = combinatorics::cayley_degree_count(&deg).unwrap();
                    if formula.to_integer() != num::BigInt::from(count) {
                        return Outcome::flag(false, m as f64, 0.0, "degree count mismatch");
                    }
                }
            }
            Outcome::flag(true, 6.0, 6.0, "m <= 6 vs enumeration")
        }),
        check("sumtreedegree-bound", || {
            let ok = (2..=7).all(|m| combinatorics::sumtreedegree_check(m).unwrap().holds);
            Outcome::flag(ok, 7.0, 7.0, "both routes, m <= 7")
        }),
        check("suminpoly-bound", || {
            for &beta in &[0.5, 2.0] {
                for r in 1..=4usize {
                    for k in 0..=5u32 {
                        if !combinatorics::suminpoly_check(r, k, beta).unwrap().holds {
                            return Outcome::flag(false, r as f64, k as f64, "violated");
                        }
                    }
                }
            }
            Outcome::flag(true, 0.0, 0.0, "beta in {1/2, 2}")
        }),
    ]
}

fn bkar_checks(opts: &SuiteOptions) -> Vec<Check> {
    let seed = opts.seed;
    vec![
        check("forest-formula-exact", move || {
            let mut rng = rng_for(seed, "forest-formula-exact");
            for trial in 0..50 {
                let n = rng.gen_range(2..=4usize);
                let nv = bkar::pair_count(n);
                // random polynomial, up to 4 monomials of degree <= 2/var
                let mut f = bkar::RatPoly::zero(nv);
                for _ in 0..rng.gen_range(1..=4) {
                    let mut exp = vec![0u32; nv];
                    for e in exp.iter_mut() {
                        *e = rng.gen_range(0..=2);
                    }
                    let coeff = BigRational::new(
                        num::BigInt::from(rng.gen_range(-20i64..=20)),
                        num::BigInt::from(rng.gen_range(1i64..=9)),
                    );
                    let mono = bkar::RatPoly {
                        nvars: nv,
                        terms: [(exp, coeff)].into_iter().collect(),
                    };
                    f = f.add(&mono);
                }
                let residual = bkar::bkar_verify(&f, n).unwrap();
                if !residual.is_zero() {
                    return Outcome::flag(false, trial as f64, 0.0, "nonzero residual");
                }
            }
            Outcome::flag(true, 50.0, 50.0, "rational residual exactly 0")
        }),
        check("graph-vs-tree", move || {
            let mut rng = rng_for(seed, "graph-vs-tree");
            let mut worst = 0.0f64;
            for _ in 0..50 {
                let n = rng.gen_range(2..=4usize);
                let v: Vec<Complex64> = (0..bkar::pair_count(n))
                    .map(|_| Complex64::new(rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7)))
                    .collect();
                let report = bkar::graph_tree_identity_verify(n, &v).unwrap();
                worst = worst.max(report.residual);
            }
            Outcome::holds(worst, 1e-8).note("50 random complex weight sets")
        }),
        check("tree-inequality", move || {
            let mut rng = rng_for(seed, "tree-inequality");
            let mut count = 0;
            for _ in 0..500 {
                let n = rng.gen_range(2..=5usize);
                // stable instance built from a field sample:
                // V_l = J ψ*(a)ψ(b) + J* ψ*(b)ψ(a), U_a = |J| |ψ(a)|²
                let j = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
                let psi: Vec<Complex64> = (0..n)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                let mut v = vec![Complex64::new(0.0, 0.0); bkar::pair_count(n)];
                for a in 0..n {
                    for b in (a + 1)..n {
                        let i = j * psi[a].conj() * psi[b] + j.conj() * psi[b].conj() * psi[a];
                        v[bkar::pair_index(n, a, b)] = i;
                    }
                }
                let u: Vec<f64> = psi.iter().map(|z| j.norm() * z.norm_sqr() * 2.0).collect();
                match bkar::tree_inequality_check(n, &v, &u) {
                    Ok(report) => {
                        if !report.holds {
                            return Outcome::flag(false, report.lhs, report.rhs, "violated");
                        }
                        count += 1;
                    }
                    Err(_) => continue,
                }
            }
            Outcome::flag(count >= 450, count as f64, 500.0, "stable instances hold")
        }),
    ]
}

fn propagator_checks(opts: &SuiteOptions) -> Vec<Check> {
    let seed = opts.seed;
    vec![
        check("sweep-mineig-residual-decay", move || {
            let mut rng = rng_for(seed, "sweep");
            let mut worst_ratio = 0.0f64;
            let mut worst_residual = 0.0f64;
            for i in 0..60 {
                let d = 1 + (i % 3);
                let model = random_valid_model(&mut rng, d);
                let volume = random_volume(&mut rng, d, 48);
                let jmat = propagator::build_j_matrix(&model, &volume);
                let min_eig = propagator::min_eigenvalue(&jmat);
                if min_eig < model.j_zero() - model.j_neq() - 1e-10 {
                    return Outcome::flag(false, min_eig, model.j_zero() - model.j_neq(), "eig");
                }
                let cov = Covariance::build(&model, &volume).unwrap();
                worst_residual = worst_residual.max(propagator::residual_max(&cov.matrix, &jmat));
                worst_ratio = worst_ratio.max(propagator::verify_decay(&cov).max_ratio);
            }
            if worst_residual > 1e-10 {
                return Outcome::flag(false, worst_residual, 1e-10, "inverse residual");
            }
            Outcome::holds(worst_ratio, 1.0 + 1e-9).note("60 random models, d <= 3")
        }),
        check("neumann-vs-direct", move || {
            let mut rng = rng_for(seed, "neumann");
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let model = random_valid_model(&mut rng, 1);
                let volume = Volume::segment(rng.gen_range(2..=10));
                let jmat = propagator::build_j_matrix(&model, &volume);
                let direct = propagator::covariance_direct(&jmat).unwrap();
                let p_max = rng.gen_range(5..40usize);
                let (neumann, bound) =
                    propagator::covariance_neumann(&model, &volume, p_max).unwrap();
                let diff = (&direct - &neumann).map(|v| v.norm()).max();
                let excess: f64 = diff - bound - 1e-10;
                worst = worst.max(excess);
            }
            Outcome::holds(worst, 0.0).note("difference within stated tail bound")
        }),
        check("l1-constant-monotone", || {
            for d in 1..=3usize {
                let mut prev = f64::INFINITY;
                for i in 1..=6 {
                    let k1 = propagator::l1_constant(d, 0.4 * i as f64);
                    if k1 < 1.0 || k1 > prev {
                        return Outcome::flag(false, k1, prev, "monotonicity");
                    }
                    prev = k1;
                }
            }
            Outcome::flag(true, 0.0, 0.0, "K1 >= 1 and decreasing in mu")
        }),
    ]
}

fn single_site_checks(_opts: &SuiteOptions) -> Vec<Check> {
    vec![
        check("moment-bounds-grid", || {
            let mut worst = f64::NEG_INFINITY;
            for &j0 in &[0.5, 2.0, 10.0] {
                for &frac in &[0.0, 0.4, 0.9] {
                    for &lam in &[0.1, 1.0, 20.0] {
                        let p = SingleSiteParams::new(j0, frac * j0, lam).unwrap();
                        for m in 0..=12u32 {
                            let v = single_site::tilted_moment(p, m).unwrap();
                            let g = single_site::gaussian_estimate_rhs(p, m);
                            let q = single_site::quartic_estimate_rhs(p, m);
                            let slack = v.value - g.min(q);
                            worst = worst.max(slack / g.min(q).abs().max(1e-300));
                        }
                    }
                }
            }
            Outcome::holds(worst, 0.0).note("27 triples x m <= 12, both options")
        }),
        check("birnbaum-normalization", || {
            let mut worst = f64::NEG_INFINITY;
            for &j0 in &[0.5, 2.0, 10.0] {
                for &lam in &[0.1, 1.0, 20.0] {
                    let p = SingleSiteParams::new(j0, 0.0, lam).unwrap();
                    let n = single_site::normalization(p);
                    let lb = single_site::normalization_lower_bound(p);
                    worst = worst.max((lb - n.value) / lb);
                }
            }
            Outcome::holds(worst, 0.0).note("N >= pi/(J(0)+sqrt(lambda/2))")
        }),
        check("birnbaum-mills-grid", || {
            let mut worst = f64::NEG_INFINITY;
            for i in 0..=50 {
                let (lhs, rhs, _) = single_site::birnbaum_check(i as f64);
                worst = worst.max(rhs - lhs);
            }
            Outcome::holds(worst, 0.0).note("x = 0..50")
        }),
        check("gamma-inequalities", || {
            let ok = (0..=40).all(|m| {
                single_site::gamma_half_inequality_margin(m) >= 0.0
                    && single_site::gamma_quarter_inequality_margin(m) >= 0.0
            });
            Outcome::flag(ok, 40.0, 40.0, "m <= 40")
        }),
    ]
}

fn gaussian_checks(opts: &SuiteOptions) -> Vec<Check> {
    let seed = opts.seed;
    let samples = opts.samples;
    vec![
        check("wick-permanent-identity", || {
            let c = propagator::CMatrix::from_fn(1, 1, |_, _| Complex64::new(0.7, 0.0));
            for q in 1..=6usize {
                let xs = vec![0; q];
                let m = gaussian::wick_moment(&c, &xs, &xs).unwrap();
                let expect = (1..=q as u64).product::<u64>() as f64 * 0.7f64.powi(q as i32);
                if (m.re - expect).abs() > 1e-11 * expect {
                    return Outcome::flag(false, m.re, expect, "q! C^q");
                }
            }
            Outcome::flag(true, 6.0, 6.0, "repeated-site factorials")
        }),
        check("interpolated-covariance-pd", move || {
            let mut rng = rng_for(seed, "interp-pd");
            let model = crate::model::nearest_neighbor_1d(2.0, 0.9, 1.0);
            let volume = Volume::segment(5);
            let cov = Covariance::build(&model, &volume).unwrap();
            let mut min_seen = f64::INFINITY;
            for _ in 0..100 {
                let mut edges = Vec::new();
                let mut dsu = combinatorics::Dsu::new(5);
                for a in 0..5usize {
                    for b in (a + 1)..5 {
                        if rng.gen_bool(0.4) && dsu.union(a, b) {
                            edges.push((a, b));
                        }
                    }
                }
                let h: Vec<f64> = edges.iter().map(|_| rng.gen_range(0.0..=1.0)).collect();
                let s = bkar::bkar_point(5, &edges, &h);
                let cs = gaussian::interpolated_covariance(&cov.matrix, &s).unwrap();
                min_seen = min_seen.min(propagator::min_eigenvalue(&cs));
            }
            Outcome::flag(min_seen > 0.0, min_seen, 0.0, "100 forest points")
        }),
        check("laplace-vs-finite-differences", move || {
            // symbolic edge operator against numeric Wirtinger derivatives
            let mut rng = rng_for(seed, "laplace-fd");
            let c = propagator::CMatrix::from_fn(2, 2, |i, j| {
                if i == j {
                    Complex64::new(0.6, 0.0)
                } else if i < j {
                    Complex64::new(0.15, 0.25)
                } else {
                    Complex64::new(0.15, -0.25)
                }
            });
            let mut p = gaussian::WeightedFieldPolynomial::one(2).with_weights(vec![0.35, 0.15]);
            p.mul_fields(0, 2, 1);
            p.mul_fields(1, 1, 2);
            let op = gaussian::LaplaceEdgeOp::from_covariance(&c, 0, 1);
            let sym = gaussian::apply_laplace_edge(&op, &p);
            let h = 1e-4;
            let wirt = |f: &dyn Fn(&[Complex64]) -> Complex64,
                        point: &[Complex64],
                        site: usize,
                        star: bool| {
                let mut pp = point.to_vec();
                let mut pm = point.to_vec();
                pp[site] += Complex64::new(h, 0.0);
                pm[site] -= Complex64::new(h, 0.0);
                let d_re = (f(&pp) - f(&pm)) / (2.0 * h);
                let mut pp = point.to_vec();
                let mut pm = point.to_vec();
                pp[site] += Complex64::new(0.0, h);
                pm[site] -= Complex64::new(0.0, h);
                let d_im = (f(&pp) - f(&pm)) / (2.0 * h);
                if star {
                    (d_re + Complex64::new(0.0, 1.0) * d_im) * 0.5
                } else {
                    (d_re - Complex64::new(0.0, 1.0) * d_im) * 0.5
                }
            };
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let point: Vec<Complex64> = (0..2)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                let f = |q: &[Complex64]| p.eval(q);
                let inner1 = |q: &[Complex64]| wirt(&f, q, 1, true);
                let inner0 = |q: &[Complex64]| wirt(&f, q, 0, true);
                let numeric = op.c_xy * wirt(&inner1, &point, 0, false)
                    + op.c_yx * wirt(&inner0, &point, 1, false);
                let exact = sym.eval(&point);
                worst = worst.max((numeric - exact).norm() / exact.norm().max(1.0));
            }
            Outcome::holds(worst, 1e-6).note("20 random field points")
        }),
        check("weighted-expectation-short-circuit", move || {
            let c = propagator::CMatrix::from_fn(2, 2, |i, j| {
                if i == j {
                    Complex64::new(0.5, 0.0)
                } else {
                    Complex64::new(0.1, 0.0)
                }
            });
            let mut p = gaussian::WeightedFieldPolynomial::one(2);
            p.mul_fields(0, 1, 0);
            p.mul_fields(1, 0, 1);
            let e = gaussian::gaussian_expectation_weighted(&c, &p, &gaussian::McConfig::default())
                .unwrap();
            let ok = e.exact && (e.value - Complex64::new(0.1, 0.0)).norm() < 1e-14;
            Outcome::flag(ok, e.value.re, 0.1, "weightless path is exact Wick")
        }),
        check("local-factorials", move || {
            let mut rng = rng_for(seed, "local-factorials");
            // K₀ = 1 exactly for J(0)=4, J(±1)=1
            let model = crate::model::nearest_neighbor_1d(4.0, 1.0, 1.0);
            let volume = Volume::segment(8);
            let cov = Covariance::build(&model, &volume).unwrap();
            let k1 = propagator::l1_constant(1, cov.decay.mu0);
            for _ in 0..50 {
                let q = rng.gen_range(1..=5usize);
                let zs: Vec<usize> = (0..q).map(|_| rng.gen_range(0..8)).collect();
                let ws: Vec<usize> = (0..q).map(|_| rng.gen_range(0..8)).collect();
                let (lhs, rhs, holds) =
                    gaussian::local_factorial_check(&cov, k1, &zs, &ws).unwrap();
                if !holds {
                    return Outcome::flag(false, lhs, rhs, "bound violated");
                }
            }
            Outcome::flag(true, 50.0, 50.0, "random configurations, K0 = 1")
        }),
        check("sampler-moments", move || {
            let c = propagator::CMatrix::from_fn(1, 1, |_, _| Complex64::new(0.5, 0.0));
            let mut s = gaussian::GaussianSampler::new(&c, seed, 0).unwrap();
            let n = samples.max(10_000);
            let mut m2 = 0.0;
            let mut mpp = Complex64::new(0.0, 0.0);
            let mut a = [Complex64::new(0.0, 0.0)];
            for _ in 0..n {
                s.sample(&mut a);
                m2 += a[0].norm_sqr();
                mpp += a[0] * a[0];
            }
            m2 /= n as f64;
            mpp /= n as f64;
            let sigma = 0.5 / (n as f64).sqrt();
            let ok = (m2 - 0.5).abs() < 5.0 * sigma && mpp.norm() < 10.0 * sigma;
            Outcome::flag(ok, m2, 0.5, "5-sigma window")
        }),
    ]
}

fn polymer_checks(opts: &SuiteOptions, model: Option<&Model>) -> Vec<Check> {
    let seed = opts.seed;
    let deep = crate::model::nearest_neighbor_1d(1e4, 0.5, 1.0);
    let user_model = model.cloned();
    vec![
        check("pinned-cluster-sums", move || {
            let mut rng = rng_for(seed, "pinned");
            for n_sites in 1..=4usize {
                for _ in 0..10 {
                    let raw: Vec<f64> = (0..(1usize << n_sites))
                        .map(|_| rng.gen_range(0.0..1.0))
                        .collect();
                    let mut norm = 0.0f64;
                    for pin in 0..n_sites {
                        let mut s = 0.0;
                        for mask in 1..(1usize << n_sites) {
                            if mask >> pin & 1 == 1 {
                                s += raw[mask] * 2.0f64.powi(mask.count_ones() as i32);
                            }
                        }
                        norm = norm.max(s);
                    }
                    let scale = rng.gen_range(0.1..=1.0) / norm;
                    let raw2 = raw.clone();
                    let family = polymer::ActivityFamily::from_fn(move |p: &polymer::Polymer| {
                        raw2[p.mask()] * scale
                    });
                    for pin in 0..n_sites {
                        let partials =
                            polymer::pinned_cluster_sum(&family, n_sites, pin, 4).unwrap();
                        let monotone = partials.windows(2).all(|w| w[1] >= w[0] - 1e-12);
                        if !monotone || *partials.last().unwrap() > 1.0 + 1e-9 {
                            return Outcome::flag(
                                false,
                                *partials.last().unwrap(),
                                1.0,
                                "cluster-series bound",
                            );
                        }
                        let rooted =
                            polymer::pinned_cluster_sum_rooted(&family, n_sites, pin, 4).unwrap();
                        if *rooted.last().unwrap() > 1.0 + 1e-9 {
                            return Outcome::flag(false, *rooted.last().unwrap(), 1.0, "rooted");
                        }
                    }
                }
            }
            Outcome::flag(true, 0.0, 0.0, "partials monotone, <= e^a - 1 = 1")
        }),
        check("norm-geometric-implies-convergent", || {
            for (j0, j1) in [(200.0, 0.05), (1000.0, 0.05), (5000.0, 0.5)] {
                let model = crate::model::nearest_neighbor_1d(j0, j1, 1.0);
                let nb = polymer::norm_bound_sourcefree(&model, polymer::EstimateKind::Gaussian);
                if !(nb.geometric_ok && nb.bound <= 1.0) {
                    return Outcome::flag(false, nb.bound, 1.0, "geometric bound");
                }
                let volume = Volume::segment(5);
                let family = polymer::ActivityFamily::bound_family(
                    &model,
                    &volume,
                    polymer::EstimateKind::Gaussian,
                );
                if !polymer::fp_criterion(&family, 5, 4).convergent {
                    return Outcome::flag(false, 1.0, 1.0, "fp criterion");
                }
            }
            Outcome::flag(true, 0.0, 0.0, "chain of implications")
        }),
        check("clustering-rhs-monotone", move || {
            let mut prev = f64::INFINITY;
            for j0 in [10.0, 100.0, 1000.0] {
                let m = crate::model::nearest_neighbor_1d(j0, 0.5, 1.0);
                let r = polymer::clustering_rhs(polymer::Regime::LargeMass, &m, 4);
                if r.rhs >= prev {
                    return Outcome::flag(false, r.rhs, prev, "large-mass rhs");
                }
                prev = r.rhs;
            }
            let mut prev = f64::INFINITY;
            for lam in [1e8, 1e9, 1e10] {
                let m = crate::model::nearest_neighbor_1d(2.0, 0.5, lam);
                let r = polymer::clustering_rhs(polymer::Regime::LargeLambda, &m, 4);
                if r.rhs >= prev {
                    return Outcome::flag(false, r.rhs, prev, "large-lambda rhs");
                }
                prev = r.rhs;
            }
            Outcome::flag(true, 0.0, 0.0, "decreasing in J(0) and lambda")
        }),
        check("regime-certification", move || {
            let m = user_model.clone().unwrap_or(deep.clone());
            let r = polymer::clustering_rhs(polymer::Regime::LargeMass, &m, 2);
            let status = if r.satisfied {
                CheckStatus::Pass
            } else {
                CheckStatus::NotCertified
            };
            Outcome {
                status,
                lhs: r.conditions.iter().map(|c| c.value).fold(0.0, f64::max),
                rhs: 1.0,
                margin: 0.0,
                note: "large-mass condition chain on the working model".into(),
            }
        }),
        check("witness-thresholds", || {
            let k = polymer::witness_large_mass(1.0, 1.0);
            let eps = polymer::witness_small_coupling(2.0, 1.0);
            let kl = polymer::witness_large_lambda(2.0, 1.0);
            let ok = k.is_finite() && eps > 0.0 && kl.is_finite();
            Outcome::flag(ok, k, kl, "bisection witnesses finite")
        }),
    ]
}

fn small_lambda_checks(opts: &SuiteOptions, model: Option<&Model>) -> Vec<Check> {
    let seed = opts.seed;
    let samples = opts.samples;
    let base = model
        .cloned()
        .unwrap_or_else(|| crate::model::nearest_neighbor_1d(2.0, 0.5, 0.1));
    let base2 = base.clone();
    vec![
        check("rescale-unit-k0", move || {
            let (scaled, _) = small_lambda::rescale_to_unit_k0(&base);
            let k0 = propagator::decay_constants(&scaled).k0;
            Outcome::holds((k0 - 1.0).abs(), 1e-12).note("K0 after rescaling")
        }),
        check("ledger-values", move || {
            let ledger = small_lambda::ConstantLedger::compute(&base2);
            let ok = ledger.k1 >= 1.0
                && ledger.ln_k2 >= 0.0
                && ledger.ln_k3 >= 0.0
                && ledger.k4 >= 1.0
                && ledger.k5 >= 1.0
                && ledger.k6 >= 1.0
                && ledger.ln_gamma <= 0.0
                && ledger.ln_lambda_threshold.is_finite();
            Outcome::flag(ok, ledger.k1, 1.0, "all entries >= 1, gamma <= 1")
        }),
        check("zeta-single-site-identity", move || {
            let model = crate::model::nearest_neighbor_1d(2.0, 0.5, 0.4);
            let volume = Volume::segment(2);
            let cov = Covariance::build(&model, &volume).unwrap();
            let single = cov.restrict(&[0]);
            let z = small_lambda::zeta_activity(&single, &[], 0.4, 1.0, 0, &ZetaConfig::default())
                .unwrap();
            let c = single.matrix[(0, 0)].re;
            let direct =
                2.0 / c * crate::single_site::radial_integral(1.0 / c, 0.1, 1, 1e-12).value - 1.0;
            Outcome::holds((z.value.re - direct).abs(), 1e-8)
                .note("zeta(single) = <e^{-lambda|psi|^4/4}> - 1")
        }),
        check("zeta-pair-tree-term", move || {
            let model = crate::model::nearest_neighbor_1d(2.0, 0.5, 1.0);
            let volume = Volume::segment(2);
            let cov = Covariance::build(&model, &volume).unwrap();
            let z = small_lambda::zeta_activity(
                &cov,
                &[(0, false), (1, true)],
                0.0,
                1.0,
                0,
                &ZetaConfig::default(),
            )
            .unwrap();
            Outcome::holds((z.value - cov.matrix[(0, 1)]).norm(), 1e-10)
                .note("lambda = 0 tree term = C(x,y)")
        }),
        check("partition-identity", move || {
            let model = crate::model::nearest_neighbor_1d(2.0, 0.5, 0.1);
            let volume = Volume::segment(2);
            let cov = Covariance::build(&model, &volume).unwrap();
            let cfg = ZetaConfig {
                mc_samples: (samples / 2).max(50_000),
                seed,
                ..ZetaConfig::default()
            };
            let report = small_lambda::partition_identity_check(
                &model,
                &cov,
                samples.max(100_000),
                seed,
                &cfg,
            )
            .unwrap();
            Outcome::holds(report.residual, 3.0 * report.sigma.max(1e-7))
                .note("two-site factorization within 3 sigma")
        }),
        check("derivative-bound", move || {
            let model = crate::model::nearest_neighbor_1d(4.0, 1.0, 0.5);
            let ledger = small_lambda::ConstantLedger::compute(&model);
            let volume = Volume::segment(2);
            let cov = Covariance::build(&model, &volume).unwrap();
            let cfg = ZetaConfig {
                mc_samples: (samples / 4).max(20_000),
                seed,
                ..ZetaConfig::default()
            };
            for (restrict, sources, m) in [
                (vec![0usize], vec![], 0usize),
                (vec![0], vec![], 1),
                (vec![0, 1], vec![(0, false), (1, true)], 0),
            ] {
                let sub = cov.restrict(&restrict);
                let r = small_lambda::single_polymer_derivative_bound_check(
                    &ledger, &sub, &sources, 0.5, 1.0, m, &cfg,
                )
                .unwrap();
                if !r.holds {
                    return Outcome::flag(false, r.lhs, r.rhs, "bound violated");
                }
            }
            Outcome::flag(true, 0.0, 0.0, "|R| <= 2, M <= 1 with computed ledger")
        }),
        check("clustering-rhs-lambda-scaling", move || {
            let model = crate::model::nearest_neighbor_1d(1e6, 0.5, 1e-60);
            let ledger = small_lambda::ConstantLedger::compute(&model);
            let r1 = small_lambda::clustering_rhs(&model, &ledger, 4, 1);
            let half = Model::new(model.coupling.clone(), model.lambda / 2.0);
            let r2 = small_lambda::clustering_rhs(&half, &ledger, 4, 1);
            let drift = (r1.ln_rhs_clustering - r2.ln_rhs_clustering - 2.0f64.ln()).abs();
            Outcome::holds(drift, 1e-10).note("halving lambda scales rhs by 2^-N")
        }),
        check("lambda-derivative-vanishing", move || {
            // a canonical strongly-coupled instance: for weakly coupled
            // models the connected 6-point signal drops below the
            // moment-cancellation noise floor
            let model = crate::model::nearest_neighbor_1d(2.0, 0.5, 1.0);
            let volume = Volume::segment(2);
            // probe step in units of the natural coupling scale (J(0)-J_≠)²
            let h = 5e-4 * (model.j_zero() - model.j_neq()).powi(2);
            match oracle::lambda_derivative_check(&model, &volume, 6, 1, h) {
                Ok(r) => Outcome::holds(r.relative, 1e-5).note("n=6, k=1 via hopping"),
                Err(e) => Outcome {
                    status: CheckStatus::Skipped,
                    lhs: 0.0,
                    rhs: 0.0,
                    margin: 0.0,
                    note: format!("{e}"),
                },
            }
        }),
    ]
}

fn oracle_checks(opts: &SuiteOptions, model: Option<&Model>) -> Vec<Check> {
    let seed = opts.seed;
    let samples = opts.samples;
    let base = model
        .cloned()
        .unwrap_or_else(|| crate::model::nearest_neighbor_1d(2.0, 0.5, 0.6));
    let base2 = base.clone();
    vec![
        check("exact-gaussian-zeros", || {
            let model = crate::model::nearest_neighbor_1d(2.0, 0.5, 1.0);
            let volume = Volume::segment(2);
            let cov = Covariance::build(&model, &volume).unwrap();
            let two = oracle::cumulant_exact_gaussian(&cov, &[(0, false), (1, true)]).unwrap();
            let expect = oracle::CRational::from_c64(cov.matrix[(0, 1)]);
            let four = oracle::cumulant_exact_gaussian(
                &cov,
                &[(0, false), (0, true), (1, false), (1, true)],
            )
            .unwrap();
            let ok = two == expect && four.is_zero();
            Outcome::flag(ok, 0.0, 0.0, "2pt = C exactly, 4pt = 0 exactly")
        }),
        check("mc-vs-hopping", move || {
            let volume = Volume::segment(2);
            let hop = match oracle::HoppingOracle::new(&base, &volume, 24) {
                Ok(h) => h,
                Err(e) => {
                    return Outcome {
                        status: CheckStatus::Skipped,
                        lhs: 0.0,
                        rhs: 0.0,
                        margin: 0.0,
                        note: format!("{e}"),
                    }
                }
            };
            let settings = oracle::McSettings {
                samples: samples.max(100_000),
                seed,
                stream: 0,
            };
            let mut worst = 0.0f64;
            for sources in [
                vec![(0usize, false), (1usize, true)],
                vec![(0, false), (0, true)],
                vec![(0, false), (0, true), (1, false), (1, true)],
            ] {
                let mc = oracle::moments_mc(&base, &volume, &sources, &settings).unwrap();
                let (hv, he) = hop.moment_of_sources(&sources).unwrap();
                let pull = (mc.value - hv).norm() / (3.0 * mc.stderr + he + 1e-12);
                worst = worst.max(pull);
            }
            Outcome::holds(worst, 1.0).note("3-sigma agreement on shared instances")
        }),
        check("phase-unbalanced-zero", move || {
            let volume = Volume::segment(2);
            let est = oracle::moments_mc(
                &base2,
                &volume,
                &[(0, false)],
                &oracle::McSettings {
                    samples: 10_000,
                    seed,
                    stream: 0,
                },
            )
            .unwrap();
            Outcome::flag(
                est.value.norm() == 0.0 && est.stderr == 0.0,
                est.value.norm(),
                0.0,
                "analytic U(1) selection",
            )
        }),
        check("hopping-tail-honest", || {
            let model = crate::model::nearest_neighbor_1d(2.0, 0.5, 0.8);
            let volume = Volume::segment(2);
            let coarse = oracle::HoppingOracle::new(&model, &volume, 8).unwrap();
            let fine = oracle::HoppingOracle::new(&model, &volume, 30).unwrap();
            let mut worst = f64::NEG_INFINITY;
            for m in [[1u32, 0, 0, 1], [1, 1, 0, 0], [2, 1, 1, 2], [2, 2, 2, 2]] {
                let (vc, ec) = coarse.moment(m).unwrap();
                let (vf, _) = fine.moment(m).unwrap();
                worst = worst.max((vc - vf).norm() - ec);
            }
            Outcome::holds(worst, 1e-13).note("truncation within stated tail bound")
        }),
        check("lambda-derivatives", || {
            let model = crate::model::nearest_neighbor_1d(2.0, 0.5, 1.0);
            let volume = Volume::segment(2);
            let r4 = oracle::lambda_derivative_check(&model, &volume, 4, 0, 0.02).unwrap();
            let r61 = oracle::lambda_derivative_check(&model, &volume, 6, 1, 5e-4).unwrap();
            let r62 = oracle::lambda_derivative_check(&model, &volume, 6, 2, 5e-4).unwrap();
            let ok = r4.vanishes && r61.vanishes && !r62.vanishes;
            Outcome::flag(ok, r61.relative, 1e-5, "vanishing below n/2 - 1")
        }),
        check("twopoint-slope", || {
            let model = crate::model::nearest_neighbor_1d(2.0, 0.5, 0.05);
            let volume = Volume::segment(2);
            let r = oracle::twopoint_difference_check(&model, &volume).unwrap();
            Outcome::holds((r.slope_ratio - 2.0).abs(), 0.15).note("linear response in lambda")
        }),
        check("eta-rescaling-covariance", || {
            let eta: f64 = 1.7;
            let base = crate::model::nearest_neighbor_1d(2.0, 0.5, 0.4);
            let scaled = crate::model::nearest_neighbor_1d(
                2.0 * eta * eta,
                0.5 * eta * eta,
                0.4 * eta.powi(4),
            );
            let volume = Volume::segment(2);
            let ob = oracle::HoppingOracle::new(&base, &volume, 24).unwrap();
            let os = oracle::HoppingOracle::new(&scaled, &volume, 24).unwrap();
            let bb = oracle::MomentBackend::Hopping(&ob);
            let bs = oracle::MomentBackend::Hopping(&os);
            let mut worst = 0.0f64;
            for sources in [
                vec![(0usize, false), (1usize, true)],
                vec![(0, false), (0, true), (1, false), (1, true)],
            ] {
                let n = sources.len() as i32;
                let kb = oracle::cumulant(&bb, &sources).unwrap().value;
                let ks = oracle::cumulant(&bs, &sources).unwrap().value;
                worst = worst.max((kb - ks * eta.powi(n)).norm() / kb.norm().max(1e-12));
            }
            Outcome::holds(worst, 1e-9).note("cumulants scale by eta^n")
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass_quickly() {
        let opts = SuiteOptions {
            seed: 7,
            samples: 60_000,
            size_cap: 8,
            jobs: 0,
        };
        for &name in SUITES {
            let result = run_suite(name, None, &opts).unwrap();
            assert_eq!(
                result.fail_count(),
                0,
                "suite {name} failed:\n{}",
                result.render_text()
            );
        }
    }

    #[test]
    fn suite_structured_output_reproducible() {
        let opts = SuiteOptions {
            seed: 3,
            samples: 20_000,
            size_cap: 8,
            jobs: 2,
        };
        let mut a = run_suite("combinatorics", None, &opts).unwrap();
        let mut b = run_suite("combinatorics", None, &opts).unwrap();
        a.sort();
        b.sort();
        assert_eq!(a.render_structured(), b.render_structured());
    }

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(matches!(
            run_suite("nope", None, &SuiteOptions::default()),
            Err(SuiteError::SuiteUnknown(_))
        ));
    }

    #[test]
    fn random_models_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..50 {
            let d = 1 + i % 3;
            let m = random_valid_model(&mut rng, d);
            assert!(m.validate().is_empty(), "model {i} invalid");
            let v = random_volume(&mut rng, d, 64);
            assert!(v.len() <= 64);
        }
    }
}
