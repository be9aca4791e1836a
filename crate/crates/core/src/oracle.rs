//! Independent brute-force evaluation of moments and truncated
//! correlations on tiny volumes: a reweighted Monte Carlo estimator with
//! jackknife errors, a deterministic two-site hopping series with a
//! certified tail bound, exact set-partition moment-to-cumulant
//! conversion (in rational arithmetic at λ = 0), ℓ¹ cluster sums, and
//! finite-difference λ-derivatives at zero coupling.

use crate::gaussian::GaussianSampler;
use crate::model::{Model, Volume};
use crate::propagator::Covariance;
use crate::quad::ln_factorial;
use crate::single_site::nu_moment;
use num::bigint::BigInt;
use num::complex::Complex64;
use num::rational::BigRational;
use num::{FromPrimitive, One, Zero};
use std::cell::RefCell;
use std::collections::HashMap;
use thiserror::Error;

pub const MC_VOLUME_CAP: usize = 6;
pub const CUMULANT_ORDER_CAP: usize = 8;
pub const HOPPING_RATIO_CAP: f64 = 0.9;
pub const JACKKNIFE_BLOCKS: usize = 50;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance size {size} exceeds cap {cap}")]
    SizeLimit { size: usize, cap: usize },
    #[error("hopping series ratio {0} is not below {HOPPING_RATIO_CAP}")]
    DivergentSeries(f64),
    #[error("moment for mask {0:#x} was not supplied")]
    MissingMoment(u64),
    #[error("volume must contain the origin")]
    NoOrigin,
    #[error(transparent)]
    Propagator(#[from] crate::propagator::PropagatorError),
}

/// How an estimate was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    McReweight,
    HoppingSeries,
    ExactGaussian,
}

/// A truncated-correlation estimate with its error bar: statistical for
/// MC, a rigorous series tail plus quadrature error for hopping, zero
/// for the exact Gaussian path.
#[derive(Clone, Copy, Debug)]
pub struct CumulantEstimate {
    pub value: Complex64,
    pub stderr: f64,
    pub method: Method,
    /// samples (MC) or series terms (hopping)
    pub work: u64,
}

/// A source factor: site index and conjugation flag (true = ψ*).
pub type SourceFactor = (usize, bool);

fn source_key(sources: &[SourceFactor]) -> Vec<SourceFactor> {
    let mut key = sources.to_vec();
    key.sort_unstable();
    key
}

fn is_balanced(sources: &[SourceFactor]) -> bool {
    let plain = sources.iter().filter(|&&(_, star)| !star).count();
    2 * plain == sources.len()
}

// ---------------------------------------------------------------------
// set partitions and the moment-to-cumulant combination

/// Calls `f` with the block assignment (restricted growth string) of each
/// set partition of {0..n}.
pub fn for_each_set_partition<F: FnMut(&[usize])>(n: usize, f: &mut F) {
    assert!(n >= 1);
    let mut a = vec![0usize; n];
    loop {
        f(&a);
        // next restricted growth string
        let mut i = n - 1;
        loop {
            if i == 0 {
                return;
            }
            let max_prefix = a[..i].iter().copied().max().unwrap();
            if a[i] <= max_prefix {
                a[i] += 1;
                for x in a[i + 1..].iter_mut() {
                    *x = 0;
                }
                break;
            }
            a[i] = 0;
            i -= 1;
        }
    }
}

/// κ(X₁,…,X_n) = Σ_π (-1)^{|π|-1} (|π|-1)! Π_{B∈π} ⟨Π_{i∈B} X_i⟩, with
/// moments supplied per subset mask; errors are propagated linearly.
pub fn moments_to_cumulants<F>(n: usize, mut moment: F) -> Result<(Complex64, f64), OracleError>
where
    F: FnMut(u64) -> Result<(Complex64, f64), OracleError>,
{
    if n > CUMULANT_ORDER_CAP {
        return Err(OracleError::SizeLimit {
            size: n,
            cap: CUMULANT_ORDER_CAP,
        });
    }
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0f64;
    let mut failure: Option<OracleError> = None;
    for_each_set_partition(n, &mut |assignment| {
        if failure.is_some() {
            return;
        }
        let nblocks = assignment.iter().copied().max().unwrap() + 1;
        let mut masks = vec![0u64; nblocks];
        for (i, &b) in assignment.iter().enumerate() {
            masks[b] |= 1 << i;
        }
        let mut prod = Complex64::new(1.0, 0.0);
        let mut vals = Vec::with_capacity(nblocks);
        let mut errs = Vec::with_capacity(nblocks);
        for &mask in &masks {
            match moment(mask) {
                Ok((v, e)) => {
                    prod *= v;
                    vals.push(v);
                    errs.push(e);
                }
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            }
        }
        let weight = (1..nblocks as u64).product::<u64>() as f64; // (|π|-1)!
        let sign = if (nblocks - 1) % 2 == 0 { 1.0 } else { -1.0 };
        value += sign * weight * prod;
        // linear error propagation through the product
        let mut prod_err = 0.0;
        for b in 0..nblocks {
            let mut others = 1.0;
            for (b2, v) in vals.iter().enumerate() {
                if b2 != b {
                    others *= v.norm();
                }
            }
            prod_err += errs[b] * others;
        }
        error += weight * prod_err;
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((value, error))
}

// ---------------------------------------------------------------------
// hopping oracle (two sites, deterministic)

/// Deterministic evaluator for two-site moments: the cross coupling
/// factor e^{-I_{xy}} is Taylor-expanded, the angular integrals select
/// phase-balanced terms exactly, and the radial factors reduce to
/// single-site moments computed by quadrature.  The discarded tail is
/// bounded rigorously through the Gaussian-part moment estimate.
pub struct HoppingOracle {
    j0: f64,
    /// J(x-y) for the ordered site pair (0, 1) of the volume
    j_xy: Complex64,
    kmax: usize,
    /// 2 (J(0) + √(λ/2)); prefactor of the moment majorant
    opt1_prefactor: f64,
    lambda: f64,
    radial: RefCell<Vec<(f64, f64)>>,
    /// geometric rate of the Gaussian-part majorant, 2|J(x-y)|/J(0)
    pub convergence_ratio: f64,
}

impl HoppingOracle {
    pub fn new(model: &Model, volume: &Volume, kmax: usize) -> Result<Self, OracleError> {
        if volume.len() != 2 {
            return Err(OracleError::SizeLimit {
                size: volume.len(),
                cap: 2,
            });
        }
        let j0 = model.j_zero();
        let offset = volume.sites()[0].sub(&volume.sites()[1]);
        let j_xy = model.coupling.at(&offset.0);
        let ratio = 2.0 * j_xy.norm() / j0;
        if ratio >= HOPPING_RATIO_CAP {
            return Err(OracleError::DivergentSeries(ratio));
        }
        Ok(HoppingOracle {
            j0,
            j_xy,
            kmax,
            opt1_prefactor: 2.0 * (j0 + (model.lambda / 2.0).sqrt()),
            lambda: model.lambda,
            radial: RefCell::new(Vec::new()),
            convergence_ratio: ratio,
        })
    }

    /// ⟨|z|^{2p}⟩ of the single-site measure, cached.
    fn radial(&self, p: u32) -> (f64, f64) {
        let mut cache = self.radial.borrow_mut();
        while cache.len() <= p as usize {
            let next = cache.len() as u32;
            let est = nu_moment(self.j0, self.lambda, next);
            cache.push((est.value, est.error));
        }
        cache[p as usize]
    }

    /// ln of the Gaussian-part majorant on ⟨|z|^{2p}⟩.
    fn ln_radial_bound(&self, p: u32) -> f64 {
        self.opt1_prefactor.ln() - (p as f64 + 1.0) * self.j0.ln()
            + 0.5 * ln_factorial(2 * p as u64)
    }

    /// Raw series Σ_j (1/j!) Σ_{a+b=j} C(j,a) (-J₁)^a (-J₂)^b
    /// R(m_x+b) R(m_y+a), restricted by the angular selection rule.
    /// `from_order` = 0 gives the e^{-I} expectation, 1 gives e^{-I} - 1.
    fn series(&self, m: [u32; 4], from_order: usize) -> Result<(Complex64, f64), OracleError> {
        let [mx, msx, my, msy] = m;
        // angular selection: a - b = m_x - m*_x and b - a = m_y - m*_y
        let delta = mx as i64 - msx as i64;
        if my as i64 - msy as i64 != -delta {
            return Ok((Complex64::new(0.0, 0.0), 0.0));
        }
        let unit = if self.j_xy.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            self.j_xy / self.j_xy.norm()
        };
        let jn = self.j_xy.norm();
        let mut value = Complex64::new(0.0, 0.0);
        let mut error = 0.0f64;
        for j in from_order..=self.kmax {
            let j_i = j as i64;
            if (j_i + delta) % 2 != 0 || j_i + delta < 0 || j_i - delta < 0 {
                continue;
            }
            if jn == 0.0 && j > 0 {
                break;
            }
            let a = ((j_i + delta) / 2) as u64;
            let b = ((j_i - delta) / 2) as u64;
            let px = mx + b as u32;
            let py = my + a as u32;
            let (rx, ex) = self.radial(px);
            let (ry, ey) = self.radial(py);
            // (1/j!) C(j,a) (-1)^j J₁^a J₂^b with J₂ = J₁*
            let ln_weight = -ln_factorial(a) - ln_factorial(b);
            let mag = ln_weight.exp() * jn.powi(j as i32);
            let phase = unit.powi(a as i32) * unit.conj().powi(b as i32);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            value += sign * mag * phase * (rx * ry);
            error += mag * (ex * ry.abs() + ey * rx.abs());
        }
        if jn > 0.0 {
            error += self.tail_bound(m, self.kmax + 1)?;
        }
        Ok((value, error))
    }

    /// Rigorous bound on Σ_{j ≥ start} |term_j| via the Gaussian-part
    /// majorant; the two-step term ratio is bounded by
    /// (2|J₁|/J(0))² (1 + m_x/(b+1)) (1 + m_y/(a+1)), which decreases to
    /// the square of the convergence ratio.
    fn tail_bound(&self, m: [u32; 4], start: usize) -> Result<f64, OracleError> {
        let [mx, msx, my, msy] = m;
        let delta = mx as i64 - msx as i64;
        if my as i64 - msy as i64 != -delta {
            return Ok(0.0);
        }
        let jn = self.j_xy.norm();
        if jn == 0.0 {
            return Ok(0.0);
        }
        let bound_term = |j: i64| -> Option<f64> {
            if (j + delta) % 2 != 0 || j + delta < 0 || j - delta < 0 {
                return None;
            }
            let a = ((j + delta) / 2) as u64;
            let b = ((j - delta) / 2) as u64;
            let px = mx + b as u32;
            let py = my + a as u32;
            let ln = -ln_factorial(a) - ln_factorial(b)
                + (j as f64) * jn.ln()
                + self.ln_radial_bound(px)
                + self.ln_radial_bound(py);
            Some(ln.exp())
        };
        let mut tail = 0.0f64;
        let mut j = start as i64;
        loop {
            if j > 2000 {
                return Err(OracleError::DivergentSeries(self.convergence_ratio));
            }
            if let Some(t) = bound_term(j) {
                let a = ((j + delta) / 2) as f64;
                let b = ((j - delta) / 2) as f64;
                let rcap = (2.0 * jn / self.j0).powi(2)
                    * (1.0 + mx as f64 / (b + 1.0))
                    * (1.0 + my as f64 / (a + 1.0));
                if rcap < 1.0 {
                    tail += t / (1.0 - rcap);
                    return Ok(tail);
                }
                tail += t;
            }
            j += 1;
        }
    }

    /// Two-site relative partition function ⟨e^{-I}⟩ under dν ⊗ dν.
    pub fn partition(&self) -> Result<(f64, f64), OracleError> {
        let (z, e) = self.series([0, 0, 0, 0], 0)?;
        Ok((z.re, e))
    }

    /// Normalized moment of ψ(x)^{m₀} ψ*(x)^{m₁} ψ(y)^{m₂} ψ*(y)^{m₃}
    /// under the interacting two-site measure.
    pub fn moment(&self, m: [u32; 4]) -> Result<(Complex64, f64), OracleError> {
        let (num, num_err) = self.series(m, 0)?;
        let (den, den_err) = self.partition()?;
        let value = num / den;
        let error = num_err / den.abs() + num.norm() * den_err / (den * den).abs();
        Ok((value, error))
    }

    /// Moment of a source multiset; exactly zero unless phase-balanced.
    pub fn moment_of_sources(
        &self,
        sources: &[SourceFactor],
    ) -> Result<(Complex64, f64), OracleError> {
        let mut m = [0u32; 4];
        for &(site, star) in sources {
            assert!(site < 2);
            m[2 * site + star as usize] += 1;
        }
        self.moment(m)
    }

    /// The exact pair-polymer activity ρ̃(R, J):
    /// ∫ dν dν Π ψ^♯ (e^{-I} - 1), i.e. the series without its j = 0
    /// term and without normalization.
    pub fn pair_activity(&self, sources: &[SourceFactor]) -> Result<(Complex64, f64), OracleError> {
        let mut m = [0u32; 4];
        for &(site, star) in sources {
            assert!(site < 2);
            m[2 * site + star as usize] += 1;
        }
        self.series(m, 1)
    }

    /// The exact single-site activity ρ̃({x}, J): the plain dν moment,
    /// requiring at least one source.
    pub fn single_site_activity(&self, sources: &[SourceFactor]) -> (Complex64, f64) {
        if sources.is_empty() {
            return (Complex64::new(0.0, 0.0), 0.0);
        }
        let plain = sources.iter().filter(|&&(_, star)| !star).count() as u32;
        let star = sources.len() as u32 - plain;
        if plain != star {
            return (Complex64::new(0.0, 0.0), 0.0);
        }
        let (r, e) = self.radial(plain);
        (Complex64::new(r, 0.0), e)
    }
}

// ---------------------------------------------------------------------
// Monte Carlo oracle

#[derive(Clone, Copy, Debug)]
pub struct McSettings {
    pub samples: usize,
    pub seed: u64,
    pub stream: u64,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings {
            samples: 1_000_000,
            seed: 1,
            stream: 0,
        }
    }
}

/// Reweighted moments ⟨monomial · w⟩ / ⟨w⟩ with w = e^{-(λ/4)Σ|ψ|⁴},
/// for a batch of monomials over one shared sample stream; errors are
/// jackknife over 50 blocks of the ratio estimator.
pub struct McMomentTable {
    values: HashMap<Vec<SourceFactor>, (Complex64, f64)>,
    pub samples: usize,
}

impl McMomentTable {
    pub fn build(
        model: &Model,
        volume: &Volume,
        keys: &[Vec<SourceFactor>],
        settings: &McSettings,
    ) -> Result<Self, OracleError> {
        if volume.len() > MC_VOLUME_CAP {
            return Err(OracleError::SizeLimit {
                size: volume.len(),
                cap: MC_VOLUME_CAP,
            });
        }
        let cov = Covariance::build(model, volume)?;
        let mut sampler = GaussianSampler::new(&cov.matrix, settings.seed, settings.stream)
            .map_err(|_| crate::propagator::PropagatorError::NotPositiveDefinite)?;
        let n_sites = volume.len();
        // deduplicate and keep only phase-balanced keys (others vanish
        // exactly by the U(1) symmetry of the measure)
        let mut todo: Vec<Vec<SourceFactor>> = Vec::new();
        for k in keys {
            let key = source_key(k);
            if is_balanced(&key) && !todo.contains(&key) {
                todo.push(key);
            }
        }
        let blocks = JACKKNIFE_BLOCKS;
        let block_len = (settings.samples / blocks).max(1);
        let total = block_len * blocks;
        let quarter_lambda = model.lambda / 4.0;
        let mut num_acc = vec![vec![Complex64::new(0.0, 0.0); blocks]; todo.len()];
        let mut den_acc = vec![0.0f64; blocks];
        let mut psi = vec![Complex64::new(0.0, 0.0); n_sites];
        for s in 0..total {
            let block = s / block_len;
            sampler.sample(&mut psi);
            let mut quartic = 0.0;
            for z in &psi {
                quartic += z.norm_sqr() * z.norm_sqr();
            }
            let w = (-quarter_lambda * quartic).exp();
            den_acc[block] += w;
            for (ki, key) in todo.iter().enumerate() {
                let mut v = Complex64::new(w, 0.0);
                for &(site, star) in key {
                    v *= if star { psi[site].conj() } else { psi[site] };
                }
                num_acc[ki][block] += v;
            }
        }
        let mut values = HashMap::new();
        let den_total: f64 = den_acc.iter().sum();
        for (ki, key) in todo.iter().enumerate() {
            let num_total: Complex64 = num_acc[ki].iter().sum();
            let full = num_total / den_total;
            // leave-one-out jackknife of the ratio
            let mut mean_loo = Complex64::new(0.0, 0.0);
            let mut loo = Vec::with_capacity(blocks);
            for b in 0..blocks {
                let est = (num_total - num_acc[ki][b]) / (den_total - den_acc[b]);
                mean_loo += est;
                loo.push(est);
            }
            mean_loo /= blocks as f64;
            let var: f64 = loo.iter().map(|e| (e - mean_loo).norm_sqr()).sum::<f64>()
                * (blocks as f64 - 1.0)
                / blocks as f64;
            values.insert(key.clone(), (full, var.sqrt()));
        }
        Ok(McMomentTable {
            values,
            samples: total,
        })
    }

    pub fn moment(&self, sources: &[SourceFactor]) -> Result<(Complex64, f64), OracleError> {
        let key = source_key(sources);
        if !is_balanced(&key) {
            return Ok((Complex64::new(0.0, 0.0), 0.0));
        }
        self.values
            .get(&key)
            .copied()
            .ok_or(OracleError::MissingMoment(key.len() as u64))
    }
}

/// Single-monomial MC moment (ratio estimator, jackknife stderr).
pub fn moments_mc(
    model: &Model,
    volume: &Volume,
    sources: &[SourceFactor],
    settings: &McSettings,
) -> Result<CumulantEstimate, OracleError> {
    let table = McMomentTable::build(model, volume, &[sources.to_vec()], settings)?;
    let (value, stderr) = table.moment(sources)?;
    Ok(CumulantEstimate {
        value,
        stderr,
        method: Method::McReweight,
        work: table.samples as u64,
    })
}

// ---------------------------------------------------------------------
// exact rational Gaussian path (λ = 0)

/// Complex rational: exact arithmetic over the f64 covariance entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl CRational {
    pub fn zero() -> Self {
        CRational {
            re: BigRational::zero(),
            im: BigRational::zero(),
        }
    }

    pub fn one() -> Self {
        CRational {
            re: BigRational::one(),
            im: BigRational::zero(),
        }
    }

    pub fn from_c64(z: Complex64) -> Self {
        CRational {
            re: BigRational::from_f64(z.re).expect("finite"),
            im: BigRational::from_f64(z.im).expect("finite"),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn add(&self, o: &CRational) -> CRational {
        CRational {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }

    pub fn mul(&self, o: &CRational) -> CRational {
        CRational {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }

    pub fn scale_int(&self, k: i64) -> CRational {
        let k = BigRational::from_integer(BigInt::from(k));
        CRational {
            re: &self.re * &k,
            im: &self.im * &k,
        }
    }
}

/// Wick moment in exact rational arithmetic over the covariance entries.
pub fn wick_moment_exact(cov: &Covariance, sources: &[SourceFactor]) -> CRational {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(site, star) in sources {
        if star {
            ys.push(site);
        } else {
            xs.push(site);
        }
    }
    if xs.len() != ys.len() {
        return CRational::zero();
    }
    let p = xs.len();
    if p == 0 {
        return CRational::one();
    }
    let entries: Vec<Vec<CRational>> = (0..cov.matrix.nrows())
        .map(|i| {
            (0..cov.matrix.ncols())
                .map(|j| CRational::from_c64(cov.matrix[(i, j)]))
                .collect()
        })
        .collect();
    let mut total = CRational::zero();
    crate::gaussian::heap_permutations(p, |gamma| {
        let mut prod = CRational::one();
        for (i, &g) in gamma.iter().enumerate() {
            prod = prod.mul(&entries[xs[g]][ys[i]]);
        }
        total = total.add(&prod);
    });
    total
}

/// Truncated correlation at λ = 0 in exact rational arithmetic; vanishes
/// identically for n ≥ 4, and the cancellation here is exact rather than
/// approximate.
pub fn cumulant_exact_gaussian(
    cov: &Covariance,
    sources: &[SourceFactor],
) -> Result<CRational, OracleError> {
    let n = sources.len();
    if n > CUMULANT_ORDER_CAP {
        return Err(OracleError::SizeLimit {
            size: n,
            cap: CUMULANT_ORDER_CAP,
        });
    }
    let mut total = CRational::zero();
    for_each_set_partition(n, &mut |assignment| {
        let nblocks = assignment.iter().copied().max().unwrap() + 1;
        let mut prod = CRational::one();
        for b in 0..nblocks {
            let block: Vec<SourceFactor> = sources
                .iter()
                .enumerate()
                .filter(|(i, _)| assignment[*i] == b)
                .map(|(_, &s)| s)
                .collect();
            prod = prod.mul(&wick_moment_exact(cov, &block));
        }
        let weight: i64 = (1..nblocks as i64).product();
        let sign = if (nblocks - 1) % 2 == 0 { 1 } else { -1 };
        total = total.add(&prod.scale_int(sign * weight));
    });
    Ok(total)
}

// ---------------------------------------------------------------------
// cumulants with a cached moment provider

/// Moment backend used by the ℓ¹ sums.
pub enum MomentBackend<'a> {
    Hopping(&'a HoppingOracle),
    Mc(&'a McMomentTable),
    /// λ = 0: exact Isserlis-Wick moments of the covariance
    Gaussian(&'a Covariance),
}

impl MomentBackend<'_> {
    pub fn method(&self) -> Method {
        match self {
            MomentBackend::Hopping(_) => Method::HoppingSeries,
            MomentBackend::Mc(_) => Method::McReweight,
            MomentBackend::Gaussian(_) => Method::ExactGaussian,
        }
    }

    fn moment(&self, sources: &[SourceFactor]) -> Result<(Complex64, f64), OracleError> {
        if !is_balanced(sources) {
            return Ok((Complex64::new(0.0, 0.0), 0.0));
        }
        match self {
            MomentBackend::Hopping(h) => h.moment_of_sources(sources),
            MomentBackend::Mc(t) => t.moment(sources),
            MomentBackend::Gaussian(cov) => {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for &(site, star) in sources {
                    if star {
                        ys.push(site);
                    } else {
                        xs.push(site);
                    }
                }
                let v = crate::gaussian::wick_moment(&cov.matrix, &xs, &ys).map_err(|_| {
                    OracleError::SizeLimit {
                        size: xs.len(),
                        cap: crate::gaussian::WICK_ORDER_CAP,
                    }
                })?;
                // f64 rounding through the permutation sum; downstream
                // cumulant cancellations live on exactly this scale
                Ok((v, v.norm() * 1e-13))
            }
        }
    }
}

/// Truncated correlation of the given sources through the set-partition
/// combination, with per-multiset moment caching.
pub fn cumulant(
    backend: &MomentBackend,
    sources: &[SourceFactor],
) -> Result<CumulantEstimate, OracleError> {
    let mut cache: HashMap<Vec<SourceFactor>, (Complex64, f64)> = HashMap::new();
    let (value, stderr) = moments_to_cumulants(sources.len(), |mask| {
        let block: Vec<SourceFactor> = sources
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &s)| s)
            .collect();
        let key = source_key(&block);
        if let Some(&hit) = cache.get(&key) {
            return Ok(hit);
        }
        let computed = backend.moment(&block)?;
        cache.insert(key, computed);
        Ok(computed)
    })?;
    Ok(CumulantEstimate {
        value,
        stderr,
        method: backend.method(),
        work: 0,
    })
}

/// Every sub-multiset of sources an ℓ¹ sweep will request; feed these to
/// `McMomentTable::build` so one sampling pass serves the whole sweep.
pub fn l1_required_moments(
    volume: &Volume,
    sharps: &[bool],
) -> Result<Vec<Vec<SourceFactor>>, OracleError> {
    let n = sharps.len();
    let origin = volume.origin_index().ok_or(OracleError::NoOrigin)?;
    let mut keys: Vec<Vec<SourceFactor>> = Vec::new();
    let mut placements = vec![0usize; n - 1];
    loop {
        let mut sources: Vec<SourceFactor> = Vec::with_capacity(n);
        sources.push((origin, sharps[0]));
        for (i, &x) in placements.iter().enumerate() {
            sources.push((x, sharps[i + 1]));
        }
        for mask in 1u64..(1 << n) {
            let block: Vec<SourceFactor> = sources
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &s)| s)
                .collect();
            let key = source_key(&block);
            if is_balanced(&key) && !keys.contains(&key) {
                keys.push(key);
            }
        }
        let mut i = 0;
        loop {
            if i == n - 1 {
                return Ok(keys);
            }
            placements[i] += 1;
            if placements[i] < volume.len() {
                break;
            }
            placements[i] = 0;
            i += 1;
        }
    }
}

/// ℓ¹ cluster sum Σ_{x₂..x_n ∈ Λ} |⟨ψ^{♯₁}(0), ψ^{♯₂}(x₂), …⟩^T| with the
/// first source pinned at the origin.
#[derive(Clone, Debug)]
pub struct L1Report {
    pub sum: f64,
    pub error: f64,
    pub method: Method,
    pub terms: usize,
}

pub fn l1_cluster_sum(
    backend: &MomentBackend,
    volume: &Volume,
    sharps: &[bool],
) -> Result<L1Report, OracleError> {
    let n = sharps.len();
    if volume.len() > 3 || n > 6 {
        return Err(OracleError::SizeLimit {
            size: volume.len().max(n),
            cap: 6,
        });
    }
    let origin = volume.origin_index().ok_or(OracleError::NoOrigin)?;
    let mut sum = 0.0f64;
    let mut error = 0.0f64;
    let mut placements = vec![0usize; n - 1];
    let mut terms = 0usize;
    loop {
        let mut sources: Vec<SourceFactor> = Vec::with_capacity(n);
        sources.push((origin, sharps[0]));
        for (i, &x) in placements.iter().enumerate() {
            sources.push((x, sharps[i + 1]));
        }
        let est = cumulant(backend, &sources)?;
        sum += est.value.norm();
        error += est.stderr;
        terms += 1;
        // advance the placement counter
        let mut i = 0;
        loop {
            if i == n - 1 {
                return Ok(L1Report {
                    sum,
                    error,
                    method: backend.method(),
                    terms,
                });
            }
            placements[i] += 1;
            if placements[i] < volume.len() {
                break;
            }
            placements[i] = 0;
            i += 1;
        }
    }
}

// ---------------------------------------------------------------------
// λ-derivatives at zero coupling and the two-point difference

#[derive(Clone, Debug)]
pub struct LambdaDerivativeReport {
    /// k-th right-derivative of the cumulant in λ at 0
    pub derivative: Complex64,
    /// contribution scale of the first generically nonvanishing order
    pub scale: f64,
    /// |D_k| h^k / k!  relative to the leading-order contribution
    pub relative: f64,
    pub vanishes: bool,
}

/// Right finite differences (Richardson-extrapolated once) of the n-point
/// truncated correlation in λ at 0, using the deterministic hopping
/// oracle so that differencing is stable.  Sources alternate ψ at site 0
/// and ψ* at site 1.  The measure only exists for λ ≥ 0, so the stencils
/// are one-sided.
pub fn lambda_derivative_check(
    model: &Model,
    volume: &Volume,
    n: usize,
    k: usize,
    h: f64,
) -> Result<LambdaDerivativeReport, OracleError> {
    assert!(n % 2 == 0 && n >= 4);
    assert!(k < n / 2);
    let sources: Vec<SourceFactor> = (0..n).map(|i| (i % 2, i % 2 == 1)).collect();
    let f = |lam: f64| -> Result<Complex64, OracleError> {
        let m = Model::new(model.coupling.clone(), lam);
        let oracle = HoppingOracle::new(&m, volume, 24)?;
        let backend = MomentBackend::Hopping(&oracle);
        Ok(cumulant(&backend, &sources)?.value)
    };
    let fd = |order: usize, h: f64| -> Result<Complex64, OracleError> {
        match order {
            0 => f(0.0),
            1 => Ok((-3.0 * f(0.0)? + 4.0 * f(h)? - f(2.0 * h)?) / (2.0 * h)),
            2 => Ok((2.0 * f(0.0)? - 5.0 * f(h)? + 4.0 * f(2.0 * h)? - f(3.0 * h)?) / (h * h)),
            _ => Err(OracleError::SizeLimit {
                size: order,
                cap: 2,
            }),
        }
    };
    let richardson = |order: usize| -> Result<Complex64, OracleError> {
        if order == 0 {
            fd(0, h)
        } else {
            Ok((4.0 * fd(order, h / 2.0)? - fd(order, h)?) / 3.0)
        }
    };
    let derivative = richardson(k)?;
    // the first generically nonvanishing order is k* = n/2 - 1; its
    // contribution at the probe point sets the comparison scale
    let kstar = n / 2 - 1;
    let dstar = richardson(kstar.min(2))?;
    let scale =
        dstar.norm() * h.powi(kstar as i32) / (1..=kstar as u64).product::<u64>().max(1) as f64;
    let contribution =
        derivative.norm() * h.powi(k as i32) / (1..=k as u64).product::<u64>().max(1) as f64;
    let relative = if scale > 0.0 {
        contribution / scale
    } else {
        f64::INFINITY
    };
    Ok(LambdaDerivativeReport {
        derivative,
        scale,
        relative,
        vanishes: relative <= 1e-5,
    })
}

/// Σ_x |⟨ψ(0),ψ*(x)⟩^T_λ - ⟨ψ(0),ψ*(x)⟩^T_0| on a two-site volume, with
/// the slope diagnostic diff(λ)/diff(λ/2) (≈ 2 at leading order).
#[derive(Clone, Debug)]
pub struct TwoPointDifferenceReport {
    pub difference: f64,
    pub error: f64,
    pub slope_ratio: f64,
}

pub fn twopoint_difference_check(
    model: &Model,
    volume: &Volume,
) -> Result<TwoPointDifferenceReport, OracleError> {
    let diff_at = |lam: f64| -> Result<(f64, f64), OracleError> {
        let m = Model::new(model.coupling.clone(), lam);
        let oracle = HoppingOracle::new(&m, volume, 24)?;
        let backend = MomentBackend::Hopping(&oracle);
        let gauss = Model::new(model.coupling.clone(), 0.0);
        let goracle = HoppingOracle::new(&gauss, volume, 24)?;
        let gbackend = MomentBackend::Hopping(&goracle);
        let origin = volume.origin_index().ok_or(OracleError::NoOrigin)?;
        let mut total = 0.0;
        let mut err = 0.0;
        for x in 0..volume.len() {
            let sources = [(origin, false), (x, true)];
            let at_lam = cumulant(&backend, &sources)?;
            let at_zero = cumulant(&gbackend, &sources)?;
            total += (at_lam.value - at_zero.value).norm();
            err += at_lam.stderr + at_zero.stderr;
        }
        Ok((total, err))
    };
    let (d_full, e_full) = diff_at(model.lambda)?;
    let (d_half, _) = diff_at(model.lambda / 2.0)?;
    Ok(TwoPointDifferenceReport {
        difference: d_full,
        error: e_full,
        slope_ratio: if d_half > 0.0 {
            d_full / d_half
        } else {
            f64::NAN
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::nearest_neighbor_1d;

    fn two_site_volume() -> Volume {
        Volume::segment(2)
    }

    #[test]
    fn set_partition_counts_are_bell_numbers() {
        let bell = [1u64, 1, 2, 5, 15, 52, 203, 877, 4140];
        for n in 1..=8usize {
            let mut count = 0;
            for_each_set_partition(n, &mut |_| count += 1);
            assert_eq!(count, bell[n], "n={n}");
        }
    }

    #[test]
    fn cumulant_n2_formula() {
        // κ(X₁,X₂) = ⟨X₁X₂⟩ - ⟨X₁⟩⟨X₂⟩
        let moments = |mask: u64| -> Result<(Complex64, f64), OracleError> {
            let v = match mask {
                0b01 => 2.0,
                0b10 => 3.0,
                0b11 => 11.0,
                _ => unreachable!(),
            };
            Ok((Complex64::new(v, 0.0), 0.0))
        };
        let (k, _) = moments_to_cumulants(2, moments).unwrap();
        assert!((k.re - 5.0).abs() < 1e-14);
    }

    #[test]
    fn hopping_matches_wick_at_lambda_zero() {
        let model = nearest_neighbor_1d(2.0, 0.5, 0.0);
        let volume = two_site_volume();
        let oracle = HoppingOracle::new(&model, &volume, 40).unwrap();
        let cov = Covariance::build(&nearest_neighbor_1d(2.0, 0.5, 1.0), &volume).unwrap();
        // ⟨ψ(0)ψ*(1)⟩ = C(0,1)
        let (m, e) = oracle.moment([1, 0, 0, 1]).unwrap();
        assert!(
            (m - cov.matrix[(0, 1)]).norm() < 1e-10 + e,
            "hopping {m} vs wick {}",
            cov.matrix[(0, 1)]
        );
        // ⟨|ψ(0)|²⟩ = C(0,0)
        let (m2, e2) = oracle.moment([1, 1, 0, 0]).unwrap();
        assert!((m2 - cov.matrix[(0, 0)]).norm() < 1e-10 + e2);
    }

    #[test]
    fn hopping_unbalanced_is_exactly_zero() {
        let model = nearest_neighbor_1d(2.0, 0.5, 0.7);
        let oracle = HoppingOracle::new(&model, &two_site_volume(), 20).unwrap();
        let (m, e) = oracle.moment([1, 0, 0, 0]).unwrap();
        assert_eq!(m, Complex64::new(0.0, 0.0));
        assert_eq!(e, 0.0);
    }

    #[test]
    fn hopping_decoupled_sites_factorize() {
        // sites {0, 5}: J(x-y) = 0, so the two sites are independent
        let model = nearest_neighbor_1d(2.0, 0.5, 0.9);
        let volume = Volume::new(vec![
            crate::model::Site(vec![0]),
            crate::model::Site(vec![5]),
        ])
        .unwrap();
        let oracle = HoppingOracle::new(&model, &volume, 10).unwrap();
        let (z, _) = oracle.partition().unwrap();
        assert!((z - 1.0).abs() < 1e-14, "no cross coupling: Z = 1");
        let (m, _) = oracle.moment([1, 1, 1, 1]).unwrap();
        let (a, _) = oracle.moment([1, 1, 0, 0]).unwrap();
        let (b, _) = oracle.moment([0, 0, 1, 1]).unwrap();
        assert!((m - a * b).norm() < 1e-12);
    }

    #[test]
    fn hopping_tail_bound_is_honest() {
        let model = nearest_neighbor_1d(2.0, 0.5, 0.8);
        let volume = two_site_volume();
        let coarse = HoppingOracle::new(&model, &volume, 8).unwrap();
        let fine = HoppingOracle::new(&model, &volume, 30).unwrap();
        for m in [[1u32, 0, 0, 1], [1, 1, 0, 0], [2, 1, 1, 2], [2, 2, 2, 2]] {
            let (vc, ec) = coarse.moment(m).unwrap();
            let (vf, _) = fine.moment(m).unwrap();
            assert!(
                (vc - vf).norm() <= ec + 1e-13,
                "m={m:?}: |Δ|={} > err={ec}",
                (vc - vf).norm()
            );
        }
    }

    #[test]
    fn hopping_rejects_fast_coupling() {
        let model = nearest_neighbor_1d(2.0, 0.95, 1.0);
        assert!(matches!(
            HoppingOracle::new(&model, &two_site_volume(), 10),
            Err(OracleError::DivergentSeries(_))
        ));
    }

    #[test]
    fn mc_agrees_with_hopping() {
        let model = nearest_neighbor_1d(2.0, 0.5, 0.6);
        let volume = two_site_volume();
        let oracle = HoppingOracle::new(&model, &volume, 24).unwrap();
        let settings = McSettings {
            samples: 400_000,
            seed: 12,
            stream: 0,
        };
        for sources in [
            vec![(0usize, false), (1usize, true)],
            vec![(0, false), (0, true)],
            vec![(0, false), (0, true), (1, false), (1, true)],
        ] {
            let mc = moments_mc(&model, &volume, &sources, &settings).unwrap();
            let (hv, he) = oracle.moment_of_sources(&sources).unwrap();
            let tol = 3.0 * mc.stderr + he + 1e-10;
            assert!(
                (mc.value - hv).norm() < tol,
                "sources {sources:?}: mc {} vs hopping {hv}",
                mc.value
            );
        }
    }

    #[test]
    fn mc_phase_symmetry_zero() {
        let model = nearest_neighbor_1d(2.0, 0.5, 1.0);
        let volume = two_site_volume();
        let est = moments_mc(
            &model,
            &volume,
            &[(0, false)],
            &McSettings {
                samples: 10_000,
                seed: 3,
                stream: 0,
            },
        )
        .unwrap();
        assert_eq!(est.value, Complex64::new(0.0, 0.0));
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn exact_gaussian_two_point_and_four_point() {
        let model = nearest_neighbor_1d(2.0, 0.5, 1.0);
        let volume = two_site_volume();
        let cov = Covariance::build(&model, &volume).unwrap();
        // 2-point = C(x,y) exactly
        let two = cumulant_exact_gaussian(&cov, &[(0, false), (1, true)]).unwrap();
        let expect = CRational::from_c64(cov.matrix[(0, 1)]);
        assert_eq!(two, expect);
        // 4-point truncated = 0 exactly
        let four =
            cumulant_exact_gaussian(&cov, &[(0, false), (0, true), (1, false), (1, true)]).unwrap();
        assert!(four.is_zero(), "four-point cumulant {four:?}");
        // 6-point truncated = 0 exactly
        let six = cumulant_exact_gaussian(
            &cov,
            &[
                (0, false),
                (0, true),
                (1, false),
                (1, true),
                (0, false),
                (1, true),
            ],
        )
        .unwrap();
        assert!(six.is_zero());
    }

    #[test]
    fn independent_sites_have_zero_cross_cumulant() {
        let model = nearest_neighbor_1d(2.0, 0.5, 0.8);
        let volume = Volume::new(vec![
            crate::model::Site(vec![0]),
            crate::model::Site(vec![5]),
        ])
        .unwrap();
        let oracle = HoppingOracle::new(&model, &volume, 16).unwrap();
        let backend = MomentBackend::Hopping(&oracle);
        let est = cumulant(&backend, &[(0, false), (1, true)]).unwrap();
        assert!(est.value.norm() < 1e-14);
        let est4 = cumulant(&backend, &[(0, false), (0, true), (1, false), (1, true)]).unwrap();
        assert!(est4.value.norm() < 1e-12, "cross 4-cumulant {}", est4.value);
    }

    #[test]
    fn l1_sum_gaussian_two_point() {
        let model = nearest_neighbor_1d(2.0, 0.5, 1.0);
        let volume = two_site_volume();
        let cov = Covariance::build(&model, &volume).unwrap();
        let backend = MomentBackend::Gaussian(&cov);
        let report = l1_cluster_sum(&backend, &volume, &[false, true]).unwrap();
        let expect = cov.matrix[(0, 0)].norm() + cov.matrix[(0, 1)].norm();
        assert!((report.sum - expect).abs() < 1e-12);
    }

    #[test]
    fn l1_sum_odd_n_is_zero() {
        let model = nearest_neighbor_1d(2.0, 0.5, 0.7);
        let volume = two_site_volume();
        let oracle = HoppingOracle::new(&model, &volume, 16).unwrap();
        let backend = MomentBackend::Hopping(&oracle);
        let report = l1_cluster_sum(&backend, &volume, &[false, true, false]).unwrap();
        assert_eq!(report.sum, 0.0);
    }

    #[test]
    fn rescaling_covariance_of_cumulants() {
        // ψ → ηψ': the (η²J, η⁴λ) model's correlations are η^{-n} times
        // the base ones
        let eta: f64 = 1.7;
        let base = nearest_neighbor_1d(2.0, 0.5, 0.4);
        let scaled = nearest_neighbor_1d(2.0 * eta * eta, 0.5 * eta * eta, 0.4 * eta.powi(4));
        let volume = two_site_volume();
        let ob = HoppingOracle::new(&base, &volume, 24).unwrap();
        let os = HoppingOracle::new(&scaled, &volume, 24).unwrap();
        let bb = MomentBackend::Hopping(&ob);
        let bs = MomentBackend::Hopping(&os);
        for sources in [
            vec![(0usize, false), (1usize, true)],
            vec![(0, false), (0, true), (1, false), (1, true)],
        ] {
            let n = sources.len() as i32;
            let kb = cumulant(&bb, &sources).unwrap().value;
            let ks = cumulant(&bs, &sources).unwrap().value;
            assert!(
                (kb - ks * eta.powi(n)).norm() < 1e-9 * kb.norm().max(1e-12),
                "n={n}: base {kb} scaled {ks}"
            );
        }
    }

    #[test]
    fn lambda_derivative_vanishing_orders() {
        let model = nearest_neighbor_1d(2.0, 0.5, 1.0);
        let volume = two_site_volume();
        // n = 4, k = 0: the 4-point cumulant at λ = 0 vanishes
        let r = lambda_derivative_check(&model, &volume, 4, 0, 0.02).unwrap();
        assert!(r.vanishes, "relative {}", r.relative);
        // n = 6, k = 0 and k = 1 vanish; k = 2 is generically nonzero.
        // k = 1 needs a small step: the surviving stencil error is
        // ~ c₄ h³ against a scale ~ c₂ h².
        let r0 = lambda_derivative_check(&model, &volume, 6, 0, 0.02).unwrap();
        assert!(r0.vanishes, "relative {}", r0.relative);
        let r1 = lambda_derivative_check(&model, &volume, 6, 1, 5e-4).unwrap();
        assert!(r1.vanishes, "relative {}", r1.relative);
        let r2 = lambda_derivative_check(&model, &volume, 6, 2, 5e-4).unwrap();
        assert!(!r2.vanishes && r2.derivative.norm() > 0.0);
    }

    #[test]
    fn twopoint_difference_slope() {
        let model = nearest_neighbor_1d(2.0, 0.5, 0.05);
        let volume = two_site_volume();
        let report = twopoint_difference_check(&model, &volume).unwrap();
        assert!(report.difference > 0.0);
        assert!(
            (report.slope_ratio - 2.0).abs() < 0.15,
            "slope {}",
            report.slope_ratio
        );
    }
}
