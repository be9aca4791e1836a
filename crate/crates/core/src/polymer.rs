//! High-temperature polymer machinery: tree-weight sums, the Gaussian and
//! quartic single-polymer activity bounds, source-free norm bounds, the
//! polymer-gas convergence criterion, pinned cluster sums, and the
//! explicit right-hand sides of the large-mass / small-interaction /
//! large-self-interaction clustering bounds.

use crate::combinatorics::{
    for_each_spanning_tree, ursell_connected_sum, CombinatoricsError, SimpleGraph,
};
use crate::model::{Model, Site, Volume};
use crate::quad::ln_factorial;
use num::ToPrimitive;
use std::collections::BTreeSet;
use thiserror::Error;

/// Norm parameter a = log 2 of the activity norm; e^a - 1 = 1 is the
/// convergence radius.
pub const NORM_A: f64 = std::f64::consts::LN_2;

pub const POLYMER_SIZE_CAP: usize = 8;

#[derive(Debug, Error)]
pub enum PolymerError {
    #[error("polymer size {size} exceeds cap {cap}")]
    SizeLimit { size: usize, cap: usize },
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
}

/// A nonempty set of site indices into a volume.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Polymer {
    pub sites: BTreeSet<usize>,
}

impl Polymer {
    pub fn new(sites: impl IntoIterator<Item = usize>) -> Self {
        let sites: BTreeSet<usize> = sites.into_iter().collect();
        assert!(!sites.is_empty());
        Polymer { sites }
    }

    pub fn from_mask(mask: usize) -> Self {
        let mut sites = BTreeSet::new();
        let mut m = mask;
        while m != 0 {
            sites.insert(m.trailing_zeros() as usize);
            m &= m - 1;
        }
        assert!(!sites.is_empty());
        Polymer { sites }
    }

    pub fn mask(&self) -> usize {
        self.sites.iter().fold(0, |acc, &s| acc | (1 << s))
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.sites.contains(&site)
    }
}

/// Σ over spanning trees of R of Π_x d(x)!^β Π_{edges} |J(x-y)|.
/// A single site gives 1 (empty product).
pub fn tree_weight_sum(model: &Model, sites: &[Site], beta: f64) -> Result<f64, PolymerError> {
    let m = sites.len();
    if m > POLYMER_SIZE_CAP {
        return Err(PolymerError::SizeLimit {
            size: m,
            cap: POLYMER_SIZE_CAP,
        });
    }
    if m == 1 {
        return Ok(1.0);
    }
    // pairwise |J| weights; a tree using a zero edge contributes nothing
    let mut w = vec![vec![0.0f64; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let jij = model.coupling.at(&sites[i].sub(&sites[j]).0).norm();
            w[i][j] = jij;
            w[j][i] = jij;
        }
    }
    let mut total = 0.0f64;
    for_each_spanning_tree(m, &mut |edges| {
        let mut prod = 1.0f64;
        let mut deg = vec![0u64; m];
        for &(a, b) in edges {
            prod *= w[a][b];
            deg[a] += 1;
            deg[b] += 1;
        }
        if prod == 0.0 {
            return;
        }
        for &d in &deg {
            prod *= ((1..=d).product::<u64>() as f64).powf(beta);
        }
        total += prod;
    })?;
    Ok(total)
}

fn source_counts(sites: &[Site], sources: &[Site]) -> Option<Vec<u64>> {
    let mut counts = vec![0u64; sites.len()];
    for src in sources {
        let idx = sites.iter().position(|s| s == src)?;
        counts[idx] += 1;
    }
    Some(counts)
}

/// Gaussian estimate on |ρ̃(R, J)|:
/// 2^{3|R|+|J|/2-2} (J(0)+√(λ/2))^{|R|} (J(0)-J_≠)^{-2|R|-|J|/2+1}
/// · Π_x c_J(x)!^{1/2} · Σ_𝔗 Π d!^{1/2} Π |J|.
pub fn activity_bound_gaussian(
    model: &Model,
    sites: &[Site],
    sources: &[Site],
) -> Result<f64, PolymerError> {
    let r = sites.len() as f64;
    let j = sources.len() as f64;
    let counts = match source_counts(sites, sources) {
        Some(c) => c,
        None => return Ok(0.0), // a source outside R kills the activity
    };
    if sites.len() < 2 && sources.is_empty() {
        return Ok(0.0);
    }
    let j0 = model.j_zero();
    let j_neq = model.j_neq();
    let mut value = 2.0f64.powf(3.0 * r + j / 2.0 - 2.0)
        * (j0 + (model.lambda / 2.0).sqrt()).powf(r)
        * (j0 - j_neq).powf(-2.0 * r - j / 2.0 + 1.0);
    for &c in &counts {
        value *= ((1..=c).product::<u64>() as f64).sqrt();
    }
    Ok(value * tree_weight_sum(model, sites, 0.5)?)
}

/// Quartic (domination) estimate on |ρ̃(R, J)|:
/// 2^{11|R|/2+3|J|/4-5/2} (J(0)+√(λ/2))^{|R|} λ^{-|R|-|J|/4+1/2}
/// · Π_x c_J(x)!^{1/4} · Σ_𝔗 Π d!^{1/4} Π |J|.
pub fn activity_bound_quartic(
    model: &Model,
    sites: &[Site],
    sources: &[Site],
) -> Result<f64, PolymerError> {
    let r = sites.len() as f64;
    let j = sources.len() as f64;
    let counts = match source_counts(sites, sources) {
        Some(c) => c,
        None => return Ok(0.0),
    };
    if sites.len() < 2 && sources.is_empty() {
        return Ok(0.0);
    }
    let j0 = model.j_zero();
    let mut value = 2.0f64.powf(5.5 * r + 0.75 * j - 2.5)
        * (j0 + (model.lambda / 2.0).sqrt()).powf(r)
        * model.lambda.powf(-r - j / 4.0 + 0.5);
    for &c in &counts {
        value *= ((1..=c).product::<u64>() as f64).powf(0.25);
    }
    Ok(value * tree_weight_sum(model, sites, 0.25)?)
}

/// Which single-polymer estimate backs a bound family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimateKind {
    Gaussian,
    Quartic,
}

/// Closed-form geometric bound on the source-free norm
/// ‖ρ̃(·,∅)‖ = sup_z Σ_{R∋z} |ρ̃(R,∅)| 2^{|R|}.
#[derive(Clone, Copy, Debug)]
pub struct SourceFreeNormBound {
    /// per-size geometric ratio of the majorant series
    pub ratio: f64,
    /// Σ_{m≥2} of the majorant; infinite when ratio ≥ 1
    pub bound: f64,
    /// ratio ≤ 1/2 (the sufficient convergence condition)
    pub geometric_ok: bool,
}

pub fn norm_bound_sourcefree(model: &Model, kind: EstimateKind) -> SourceFreeNormBound {
    let j0 = model.j_zero();
    let j_neq = model.j_neq();
    let lam = model.lambda;
    let a = j0 + (lam / 2.0).sqrt();
    let (ratio, first_term) = match kind {
        EstimateKind::Gaussian => {
            // terms 2^{7m-5} J_≠^{m-1} A^m (J(0)-J_≠)^{-2m+1}, m ≥ 2
            let ratio = 2.0f64.powi(7) * j_neq * a / (j0 - j_neq).powi(2);
            let t2 = 2.0f64.powi(9) * j_neq * a * a / (j0 - j_neq).powi(3);
            (ratio, t2)
        }
        EstimateKind::Quartic => {
            // terms 2^{19m/2-11/2} J_≠^{m-1} λ^{-m+1/2} A^m, m ≥ 2
            let ratio = 2.0f64.powf(9.5) * j_neq * a / lam;
            let t2 = 2.0f64.powf(13.5) * j_neq * a * a * lam.powf(-1.5);
            (ratio, t2)
        }
    };
    let bound = if ratio < 1.0 {
        first_term / (1.0 - ratio)
    } else {
        f64::INFINITY
    };
    SourceFreeNormBound {
        ratio,
        bound,
        geometric_ok: ratio <= 0.5,
    }
}

/// A family of nonnegative polymer activities over a fixed volume,
/// with an optional certified tail bound for sizes above the cap.
pub struct ActivityFamily<'a> {
    pub eval: Box<dyn Fn(&Polymer) -> f64 + 'a>,
    /// bound on sup_z Σ_{R∋z, |R|>cap} ρ(R) 2^{|R|}
    pub tail: Option<Box<dyn Fn(usize) -> f64 + 'a>>,
}

impl<'a> ActivityFamily<'a> {
    pub fn from_fn(f: impl Fn(&Polymer) -> f64 + 'a) -> Self {
        ActivityFamily {
            eval: Box::new(f),
            tail: None,
        }
    }

    /// The source-free Gaussian/quartic bound family of a model on a
    /// volume, with the geometric tail it satisfies.
    pub fn bound_family(model: &'a Model, volume: &'a Volume, kind: EstimateKind) -> Self {
        let eval = move |p: &Polymer| {
            let sites: Vec<Site> = p.sites.iter().map(|&i| volume.sites()[i].clone()).collect();
            match kind {
                EstimateKind::Gaussian => {
                    activity_bound_gaussian(model, &sites, &[]).unwrap_or(f64::INFINITY)
                }
                EstimateKind::Quartic => {
                    activity_bound_quartic(model, &sites, &[]).unwrap_or(f64::INFINITY)
                }
            }
        };
        let tail = move |cap: usize| {
            let nb = norm_bound_sourcefree(model, kind);
            if nb.ratio >= 1.0 {
                return f64::INFINITY;
            }
            // Σ_{m > cap} of the geometric majorant
            let j0 = model.j_zero();
            let j_neq = model.j_neq();
            let a = j0 + (model.lambda / 2.0).sqrt();
            let m = (cap + 1).max(2) as f64;
            let term = match kind {
                EstimateKind::Gaussian => {
                    2.0f64.powf(7.0 * m - 5.0)
                        * j_neq.powf(m - 1.0)
                        * a.powf(m)
                        * (j0 - j_neq).powf(-2.0 * m + 1.0)
                }
                EstimateKind::Quartic => {
                    2.0f64.powf(9.5 * m - 5.5)
                        * j_neq.powf(m - 1.0)
                        * model.lambda.powf(-m + 0.5)
                        * a.powf(m)
                }
            };
            term / (1.0 - nb.ratio)
        };
        ActivityFamily {
            eval: Box::new(eval),
            tail: Some(Box::new(tail)),
        }
    }
}

/// Computed activity norm and the convergence verdict ‖ρ‖ ≤ 1.
#[derive(Clone, Copy, Debug)]
pub struct NormReport {
    pub norm: f64,
    pub tail: f64,
    pub convergent: bool,
}

/// sup over pin sites of Σ_{R∋x, |R|≤cap} ρ(R) 2^{|R|}, plus any tail
/// bound the family carries; convergent ⇔ total ≤ 1.
pub fn fp_criterion(family: &ActivityFamily, n_sites: usize, cap: usize) -> NormReport {
    let mut worst = 0.0f64;
    for pin in 0..n_sites {
        let mut sum = 0.0;
        // enumerate subsets containing the pin with size ≤ cap
        let others: Vec<usize> = (0..n_sites).filter(|&s| s != pin).collect();
        let mut stack: Vec<(usize, Polymer)> = vec![(0, Polymer::new([pin]))];
        while let Some((from, poly)) = stack.pop() {
            sum += (family.eval)(&poly) * 2.0f64.powi(poly.len() as i32);
            if poly.len() < cap {
                for (i, &site) in others.iter().enumerate().skip(from) {
                    let mut next = poly.clone();
                    next.sites.insert(site);
                    stack.push((i + 1, next));
                }
            }
        }
        worst = worst.max(sum);
    }
    let tail = family.tail.as_ref().map(|t| t(cap)).unwrap_or(0.0);
    NormReport {
        norm: worst + tail,
        tail,
        convergent: worst + tail <= 1.0,
    }
}

/// φ^T table for all intersection graphs on p vertices, indexed by the
/// edge bitmask of K_p.
fn ursell_table(p: usize) -> Vec<f64> {
    let pairs: Vec<(usize, usize)> = {
        let mut v = Vec::new();
        for a in 0..p {
            for b in (a + 1)..p {
                v.push((a, b));
            }
        }
        v
    };
    let mut table = vec![0.0f64; 1 << pairs.len()];
    for (mask, slot) in table.iter_mut().enumerate() {
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        let g = SimpleGraph::new(p, edges);
        *slot = ursell_connected_sum(&g)
            .expect("within cap")
            .to_f64()
            .unwrap();
    }
    table
}

fn graph_mask(masks: &[usize]) -> usize {
    let p = masks.len();
    let mut gm = 0usize;
    let mut bit = 0;
    for a in 0..p {
        for b in (a + 1)..p {
            if masks[a] & masks[b] != 0 {
                gm |= 1 << bit;
            }
            bit += 1;
        }
    }
    gm
}

/// Partial sums (cumulative over p) of the pinned cluster series
/// Σ_p (1/p!) Σ_{R₁..R_p} 1{z ∈ ∪R_q} |φ^T(R₁..R_p)| ρ(R₁)…ρ(R_p).
/// For ρ ≥ 0 with ‖ρ‖ ≤ 1 every partial sum is ≤ e^a - 1 = 1.
pub fn pinned_cluster_sum(
    family: &ActivityFamily,
    n_sites: usize,
    pin: usize,
    p_max: usize,
) -> Result<Vec<f64>, PolymerError> {
    if n_sites > 5 || p_max > 4 {
        return Err(PolymerError::SizeLimit {
            size: n_sites.max(p_max),
            cap: 5,
        });
    }
    let polymers: Vec<(usize, f64)> = (1usize..(1 << n_sites))
        .map(|mask| (mask, (family.eval)(&Polymer::from_mask(mask))))
        .filter(|&(_, rho)| rho > 0.0)
        .collect();
    let pin_bit = 1usize << pin;
    let mut partials = Vec::with_capacity(p_max);
    let mut total = 0.0f64;
    for p in 1..=p_max {
        let table = ursell_table(p);
        let mut level = 0.0f64;
        let mut tuple = vec![0usize; p];
        enumerate_tuples(polymers.len(), &mut tuple, 0, &mut |idx: &[usize]| {
            let union: usize = idx.iter().fold(0, |acc, &i| acc | polymers[i].0);
            if union & pin_bit == 0 {
                return;
            }
            let masks: Vec<usize> = idx.iter().map(|&i| polymers[i].0).collect();
            let phi = table[graph_mask(&masks)].abs();
            if phi == 0.0 {
                return;
            }
            let rho_prod: f64 = idx.iter().map(|&i| polymers[i].1).product();
            level += phi * rho_prod;
        });
        total += level / (1..=p as u64).product::<u64>() as f64;
        partials.push(total);
    }
    Ok(partials)
}

/// The rooted variant: partial sums of
/// Σ_p (1/p!) Σ |φ^T({z}, R₁..R_p)| ρ(R₁)…ρ(R_p), bounded by
/// e^{a|R₀|} - 1 = 1 for a singleton root.
pub fn pinned_cluster_sum_rooted(
    family: &ActivityFamily,
    n_sites: usize,
    root: usize,
    p_max: usize,
) -> Result<Vec<f64>, PolymerError> {
    if n_sites > 5 || p_max > 4 {
        return Err(PolymerError::SizeLimit {
            size: n_sites.max(p_max),
            cap: 5,
        });
    }
    let polymers: Vec<(usize, f64)> = (1usize..(1 << n_sites))
        .map(|mask| (mask, (family.eval)(&Polymer::from_mask(mask))))
        .filter(|&(_, rho)| rho > 0.0)
        .collect();
    let root_mask = 1usize << root;
    let mut partials = Vec::with_capacity(p_max);
    let mut total = 0.0f64;
    for p in 1..=p_max {
        let table = ursell_table(p + 1);
        let mut level = 0.0f64;
        let mut tuple = vec![0usize; p];
        enumerate_tuples(polymers.len(), &mut tuple, 0, &mut |idx: &[usize]| {
            let mut masks: Vec<usize> = Vec::with_capacity(p + 1);
            masks.push(root_mask);
            masks.extend(idx.iter().map(|&i| polymers[i].0));
            let phi = table[graph_mask(&masks)].abs();
            if phi == 0.0 {
                return;
            }
            let rho_prod: f64 = idx.iter().map(|&i| polymers[i].1).product();
            level += phi * rho_prod;
        });
        total += level / (1..=p as u64).product::<u64>() as f64;
        partials.push(total);
    }
    Ok(partials)
}

fn enumerate_tuples<F: FnMut(&[usize])>(
    n_polymers: usize,
    tuple: &mut Vec<usize>,
    at: usize,
    f: &mut F,
) {
    if at == tuple.len() {
        f(tuple);
        return;
    }
    for i in 0..n_polymers {
        tuple[at] = i;
        enumerate_tuples(n_polymers, tuple, at + 1, f);
    }
}

/// The three high-temperature regimes with explicit constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    LargeMass,
    SmallCoupling,
    LargeLambda,
}

impl Regime {
    pub fn tag(&self) -> &'static str {
        match self {
            Regime::LargeMass => "LARGE_MASS",
            Regime::SmallCoupling => "SMALL_COUPLING",
            Regime::LargeLambda => "LARGE_LAMBDA",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub ok: bool,
}

/// The l¹-clustering right-hand side for one regime, with the condition
/// chain that certifies it.
#[derive(Clone, Debug)]
pub struct RegimeReport {
    pub regime: Regime,
    pub n: u32,
    pub gamma: f64,
    /// n! γ^{-n} · (regime-specific factor); +inf when overflowing
    pub rhs: f64,
    pub ln_rhs: f64,
    pub conditions: Vec<ConditionCheck>,
    pub satisfied: bool,
}

/// Evaluates the explicit clustering bound for even n (odd n gives an
/// exactly vanishing correlation, reported as rhs = 0).
pub fn clustering_rhs(regime: Regime, model: &Model, n: u32) -> RegimeReport {
    let j0 = model.j_zero();
    let j_neq = model.j_neq();
    let lam = model.lambda;
    let a = j0 + (lam / 2.0).sqrt();
    let gamma = match regime {
        Regime::LargeMass => 1.0 / 16.0,
        Regime::SmallCoupling => 1.0 / (16.0 * (1.0 + (lam / 2.0).sqrt() / j0)),
        Regime::LargeLambda => 2.0f64.powf(-5.5),
    };
    let mut conditions = Vec::new();
    match regime {
        Regime::LargeMass | Regime::SmallCoupling => {
            let denom = (j0 - j_neq).powi(2);
            let ratio_a = 2.0f64.powi(7) * j_neq * a / denom;
            conditions.push(ConditionCheck {
                name: "source_free_ratio",
                value: ratio_a,
                threshold: 0.5,
                ok: ratio_a <= 0.5,
            });
            let a_norm = 2.0f64.powi(10) * j_neq * a * a / (j0 - j_neq).powi(3);
            conditions.push(ConditionCheck {
                name: "source_free_norm",
                value: a_norm,
                threshold: 1.0,
                ok: a_norm < 1.0,
            });
            let ratio_rho = 2.0f64.powi(8) * j_neq * a / denom;
            conditions.push(ConditionCheck {
                name: "pinned_family_ratio",
                value: ratio_rho,
                threshold: 0.5,
                ok: ratio_rho <= 0.5,
            });
            let rho_norm = 8.0 * gamma * a / (j0 - j_neq)
                + 2.0f64.powi(12) * j_neq * a * a / (j0 - j_neq).powi(3);
            conditions.push(ConditionCheck {
                name: "pinned_family_norm",
                value: rho_norm,
                threshold: 1.0,
                ok: rho_norm <= 1.0,
            });
        }
        Regime::LargeLambda => {
            let ratio_a = 2.0f64.powf(9.5) * j_neq * a / lam;
            conditions.push(ConditionCheck {
                name: "source_free_ratio",
                value: ratio_a,
                threshold: 0.5,
                ok: ratio_a <= 0.5,
            });
            let a_norm = 2.0f64.powf(14.5) * j_neq * lam.powf(-1.5) * a * a;
            conditions.push(ConditionCheck {
                name: "source_free_norm",
                value: a_norm,
                threshold: 1.0,
                ok: a_norm < 1.0,
            });
            let ratio_sigma = 2.0f64.powf(10.5) * j_neq * a / lam;
            conditions.push(ConditionCheck {
                name: "pinned_family_ratio",
                value: ratio_sigma,
                threshold: 0.5,
                ok: ratio_sigma <= 0.5,
            });
            let sigma_norm = 2.0f64.powf(4.5) * gamma * (1.0 + j0 * (2.0 / lam).sqrt())
                + 2.0f64.powf(16.5) * j_neq * lam.powf(-1.5) * a * a;
            conditions.push(ConditionCheck {
                name: "pinned_family_norm",
                value: sigma_norm,
                threshold: 1.0,
                ok: sigma_norm <= 1.0,
            });
        }
    }
    let satisfied = conditions.iter().all(|c| c.ok);
    let (rhs, ln_rhs) = if n % 2 == 1 {
        (0.0, f64::NEG_INFINITY)
    } else {
        let nf = n as f64;
        let ln = match regime {
            Regime::LargeMass | Regime::SmallCoupling => {
                ln_factorial(n as u64) - nf * gamma.ln() + (2.5 * nf - 1.0) * 2.0f64.ln()
                    - 0.5 * nf * (j0 - j_neq).ln()
            }
            Regime::LargeLambda => {
                ln_factorial(n as u64) - nf * gamma.ln() + (2.75 * nf - 1.0) * 2.0f64.ln()
                    - 0.25 * nf * lam.ln()
            }
        };
        (ln.exp(), ln)
    };
    RegimeReport {
        regime,
        n,
        gamma,
        rhs,
        ln_rhs,
        conditions,
        satisfied,
    }
}

/// Smallest J(0) (given J_≠ and λ) certifying the large-mass conditions,
/// found by doubling and bisection on the condition chain.
pub fn witness_large_mass(j_neq: f64, lambda: f64) -> f64 {
    witness_scalar(
        |j0| conditions_hold(Regime::LargeMass, j0, j_neq, lambda),
        j_neq * 1.0000001,
    )
}

/// Largest J_≠ (given J(0) and λ) certifying the small-interaction
/// conditions.
pub fn witness_small_coupling(j0: f64, lambda: f64) -> f64 {
    let holds = |j_neq: f64| conditions_hold(Regime::SmallCoupling, j0, j_neq, lambda);
    // conditions hold for small J_≠ and fail near J(0): bisect the edge
    let mut lo = 0.0;
    let mut hi = j0;
    if holds(hi) {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Smallest λ (given J(0) and J_≠) certifying the large-λ conditions.
pub fn witness_large_lambda(j0: f64, j_neq: f64) -> f64 {
    witness_scalar(
        |lam| conditions_hold(Regime::LargeLambda, j0, j_neq, lam),
        1e-6,
    )
}

fn conditions_hold(regime: Regime, j0: f64, j_neq: f64, lambda: f64) -> bool {
    if !(j_neq > 0.0 && j_neq < j0 && lambda > 0.0) {
        return false;
    }
    let model = crate::model::nearest_neighbor_1d(j0, j_neq / 2.0, lambda);
    clustering_rhs(regime, &model, 2).satisfied
}

/// Finds the smallest x ≥ start with holds(x), assuming holds is
/// eventually-monotone upward.
fn witness_scalar(holds: impl Fn(f64) -> bool, start: f64) -> f64 {
    let mut hi = start.max(1e-9);
    let mut doublings = 0;
    while !holds(hi) {
        hi *= 2.0;
        doublings += 1;
        if doublings > 4000 {
            return f64::INFINITY;
        }
    }
    if doublings == 0 {
        return hi;
    }
    let mut lo = hi / 2.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
