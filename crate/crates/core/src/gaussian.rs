//! Complex Gaussian machinery: Isserlis-Wick moments by permutation
//! enumeration, interpolated covariances C[s], deterministic sampling,
//! and the weighted field-polynomial algebra that is closed under the
//! Laplace-type edge operators
//! Δ_{x,y} = C(x,y) ∂_{ψ(x)} ∂_{ψ*(y)} + C(y,x) ∂_{ψ(y)} ∂_{ψ*(x)}.

use crate::combinatorics::bkar::InterpolationPoint;
use crate::propagator::{CMatrix, Covariance};
use nalgebra::DMatrix;
use num::complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeMap;
use thiserror::Error;

pub const WICK_ORDER_CAP: usize = 8;
pub const MC_SITE_CAP: usize = 3;

#[derive(Debug, Error)]
pub enum GaussianError {
    #[error("wick order {0} exceeds cap {WICK_ORDER_CAP}")]
    SizeLimit(usize),
    #[error("matrix is not positive definite (s outside the interpolation set?)")]
    NotPositiveDefinite,
}

/// Heap's algorithm, iterative; calls `visit` on each permutation of 0..n.
pub fn heap_permutations<F: FnMut(&[usize])>(n: usize, mut visit: F) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut counter = vec![0usize; n.max(1)];
    visit(&perm);
    let mut i = 0;
    while i < n {
        if counter[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counter[i], i);
            }
            visit(&perm);
            counter[i] += 1;
            i = 0;
        } else {
            counter[i] = 0;
            i += 1;
        }
    }
}

/// ⟨ψ(x₁)…ψ(x_p) ψ*(y₁)…ψ*(y_q)⟩ under the Gaussian with covariance `c`;
/// zero when p ≠ q, otherwise Σ_γ Π C(x_{γ(i)}, y_i).
pub fn wick_moment(c: &CMatrix, xs: &[usize], ys: &[usize]) -> Result<Complex64, GaussianError> {
    if xs.len() != ys.len() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let p = xs.len();
    if p > WICK_ORDER_CAP {
        return Err(GaussianError::SizeLimit(p));
    }
    if p == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let mut total = Complex64::new(0.0, 0.0);
    heap_permutations(p, |gamma| {
        let mut prod = Complex64::new(1.0, 0.0);
        for (i, &g) in gamma.iter().enumerate() {
            prod *= c[(xs[g], ys[i])];
        }
        total += prod;
    });
    Ok(total)
}

/// C[s]: diagonal preserved, off-diagonal entries scaled by s_{{x,y}}.
/// Positive definiteness is certified by attempting a Cholesky
/// factorization; failure signals a point outside the interpolation set.
pub fn interpolated_covariance(
    c: &CMatrix,
    s: &InterpolationPoint,
) -> Result<CMatrix, GaussianError> {
    let n = c.nrows();
    assert_eq!(s.n, n);
    let scaled = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            c[(i, j)]
        } else {
            c[(i, j)] * s.get(i.min(j), i.max(j))
        }
    });
    if scaled.clone().cholesky().is_none() {
        return Err(GaussianError::NotPositiveDefinite);
    }
    Ok(scaled)
}

/// Deterministic sampler for the mean-zero complex Gaussian with the
/// given covariance: ψ = L ξ with C = L L† and ξ standard complex
/// normals.  The (seed, stream) pair fixes the sample stream exactly.
pub struct GaussianSampler {
    factor: CMatrix,
    rng: ChaCha8Rng,
    scratch: Vec<Complex64>,
}

impl GaussianSampler {
    pub fn new(c: &CMatrix, seed: u64, stream: u64) -> Result<Self, GaussianError> {
        let chol = c
            .clone()
            .cholesky()
            .ok_or(GaussianError::NotPositiveDefinite)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(GaussianSampler {
            factor: chol.l(),
            rng,
            scratch: vec![Complex64::new(0.0, 0.0); c.nrows()],
        })
    }

    pub fn n_sites(&self) -> usize {
        self.factor.nrows()
    }

    /// Next field sample ψ ∈ ℂ^Λ.
    pub fn sample(&mut self, out: &mut [Complex64]) {
        let n = self.factor.nrows();
        for z in self.scratch.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut self.rng);
            let im: f64 = StandardNormal.sample(&mut self.rng);
            *z = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
        }
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..=i {
                acc += self.factor[(i, j)] * self.scratch[j];
            }
            out[i] = acc;
        }
    }
}

/// One monomial Π_x ψ(x)^{m(x)} ψ*(x)^{m*(x)} with a complex coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coeff: Complex64,
    pub psi: Vec<u32>,
    pub psi_star: Vec<u32>,
}

/// A finite sum of monomials multiplied by the common exponential weight
/// e^{-Σ_x w_x |ψ(x)|⁴}.  The class is closed under ∂/∂ψ(x) and
/// ∂/∂ψ*(x): each derivative of the weight pulls a -w_x quartic-vertex
/// factor into the polynomial part.
#[derive(Clone, Debug)]
pub struct WeightedFieldPolynomial {
    pub n_sites: usize,
    pub terms: Vec<Monomial>,
    pub weights: Vec<f64>,
}

impl WeightedFieldPolynomial {
    pub fn one(n_sites: usize) -> Self {
        WeightedFieldPolynomial {
            n_sites,
            terms: vec![Monomial {
                coeff: Complex64::new(1.0, 0.0),
                psi: vec![0; n_sites],
                psi_star: vec![0; n_sites],
            }],
            weights: vec![0.0; n_sites],
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), self.n_sites);
        assert!(weights.iter().all(|&w| w >= 0.0));
        self.weights = weights;
        self
    }

    pub fn is_weightless(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    /// Multiplies every term by ψ(x)^a ψ*(x)^b.
    pub fn mul_fields(&mut self, site: usize, a: u32, b: u32) {
        for t in &mut self.terms {
            t.psi[site] += a;
            t.psi_star[site] += b;
        }
    }

    pub fn scale(&mut self, c: Complex64) {
        for t in &mut self.terms {
            t.coeff *= c;
        }
    }

    /// ∂/∂ψ(x), including the pull from the exponential weight.
    pub fn derivative_psi(&self, site: usize) -> WeightedFieldPolynomial {
        let mut terms = Vec::new();
        let w = self.weights[site];
        for t in &self.terms {
            if t.psi[site] > 0 {
                let mut nt = t.clone();
                nt.coeff *= t.psi[site] as f64;
                nt.psi[site] -= 1;
                terms.push(nt);
            }
            if w != 0.0 {
                // ∂_ψ e^{-w ψ²ψ*²} = -2w ψ ψ*² e^{-w ψ²ψ*²}
                let mut nt = t.clone();
                nt.coeff *= Complex64::new(-2.0 * w, 0.0);
                nt.psi[site] += 1;
                nt.psi_star[site] += 2;
                terms.push(nt);
            }
        }
        WeightedFieldPolynomial {
            n_sites: self.n_sites,
            terms,
            weights: self.weights.clone(),
        }
        .merged()
    }

    /// ∂/∂ψ*(x), including the pull from the exponential weight.
    pub fn derivative_psi_star(&self, site: usize) -> WeightedFieldPolynomial {
        let mut terms = Vec::new();
        let w = self.weights[site];
        for t in &self.terms {
            if t.psi_star[site] > 0 {
                let mut nt = t.clone();
                nt.coeff *= t.psi_star[site] as f64;
                nt.psi_star[site] -= 1;
                terms.push(nt);
            }
            if w != 0.0 {
                let mut nt = t.clone();
                nt.coeff *= Complex64::new(-2.0 * w, 0.0);
                nt.psi[site] += 2;
                nt.psi_star[site] += 1;
                terms.push(nt);
            }
        }
        WeightedFieldPolynomial {
            n_sites: self.n_sites,
            terms,
            weights: self.weights.clone(),
        }
        .merged()
    }

    /// Collects like monomials.
    pub fn merged(self) -> WeightedFieldPolynomial {
        let mut map: BTreeMap<(Vec<u32>, Vec<u32>), Complex64> = BTreeMap::new();
        for t in self.terms {
            *map.entry((t.psi, t.psi_star))
                .or_insert(Complex64::new(0.0, 0.0)) += t.coeff;
        }
        WeightedFieldPolynomial {
            n_sites: self.n_sites,
            terms: map
                .into_iter()
                .filter(|(_, c)| c.norm() > 0.0)
                .map(|((psi, psi_star), coeff)| Monomial {
                    coeff,
                    psi,
                    psi_star,
                })
                .collect(),
            weights: self.weights,
        }
    }

    /// Removes monomials with unequal ψ/ψ* total degree; their Gaussian
    /// expectation vanishes by the phase symmetry ψ → e^{iθ}ψ.
    pub fn phase_balanced(mut self) -> WeightedFieldPolynomial {
        self.terms
            .retain(|t| t.psi.iter().sum::<u32>() == t.psi_star.iter().sum::<u32>());
        self
    }

    /// Pointwise evaluation, weight included.
    pub fn eval(&self, psi: &[Complex64]) -> Complex64 {
        let mut weight_exp = 0.0;
        for (x, &w) in self.weights.iter().enumerate() {
            if w != 0.0 {
                weight_exp -= w * psi[x].norm_sqr().powi(2);
            }
        }
        let weight = weight_exp.exp();
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let mut v = t.coeff;
            for (x, (&a, &b)) in t.psi.iter().zip(t.psi_star.iter()).enumerate() {
                if a > 0 {
                    v *= psi[x].powi(a as i32);
                }
                if b > 0 {
                    v *= psi[x].conj().powi(b as i32);
                }
            }
            acc += v;
        }
        acc * weight
    }
}

/// A Laplace-type edge operator, acting on weighted field polynomials.
#[derive(Clone, Copy, Debug)]
pub struct LaplaceEdgeOp {
    pub x: usize,
    pub y: usize,
    pub c_xy: Complex64,
    pub c_yx: Complex64,
}

impl LaplaceEdgeOp {
    pub fn from_covariance(c: &CMatrix, x: usize, y: usize) -> Self {
        assert_ne!(x, y);
        LaplaceEdgeOp {
            x,
            y,
            c_xy: c[(x, y)],
            c_yx: c[(y, x)],
        }
    }
}

/// Δ_{x,y} P, exactly.
pub fn apply_laplace_edge(
    op: &LaplaceEdgeOp,
    p: &WeightedFieldPolynomial,
) -> WeightedFieldPolynomial {
    let mut first = p.derivative_psi_star(op.y).derivative_psi(op.x);
    first.scale(op.c_xy);
    let mut second = p.derivative_psi_star(op.x).derivative_psi(op.y);
    second.scale(op.c_yx);
    WeightedFieldPolynomial {
        n_sites: p.n_sites,
        terms: first.terms.into_iter().chain(second.terms).collect(),
        weights: p.weights.clone(),
    }
    .merged()
}

/// MC settings for weighted Gaussian expectations.
#[derive(Clone, Copy, Debug)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub stream: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: 1_000_000,
            seed: 1,
            stream: 0,
        }
    }
}

/// A complex estimate with a statistical (or numerical) error bar.
#[derive(Clone, Copy, Debug)]
pub struct EstimateC {
    pub value: Complex64,
    pub stderr: f64,
    pub exact: bool,
}

/// ∫ dμ_C P; exact Wick enumeration when the weight vanishes, otherwise
/// importance-sampled MC with the reweighting factor e^{-Σw|ψ|⁴} ∈ (0,1].
pub fn gaussian_expectation_weighted(
    c: &CMatrix,
    p: &WeightedFieldPolynomial,
    mc: &McConfig,
) -> Result<EstimateC, GaussianError> {
    let balanced = p.clone().phase_balanced();
    if balanced.is_weightless() {
        let mut total = Complex64::new(0.0, 0.0);
        for t in &balanced.terms {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (x, (&a, &b)) in t.psi.iter().zip(t.psi_star.iter()).enumerate() {
                for _ in 0..a {
                    xs.push(x);
                }
                for _ in 0..b {
                    ys.push(x);
                }
            }
            total += t.coeff * wick_moment(c, &xs, &ys)?;
        }
        return Ok(EstimateC {
            value: total,
            stderr: 0.0,
            exact: true,
        });
    }
    if c.nrows() > MC_SITE_CAP {
        return Err(GaussianError::SizeLimit(c.nrows()));
    }
    let mut sampler = GaussianSampler::new(c, mc.seed, mc.stream)?;
    let mut psi = vec![Complex64::new(0.0, 0.0); c.nrows()];
    let mut sum = Complex64::new(0.0, 0.0);
    let mut sum_sq = 0.0f64;
    for _ in 0..mc.samples {
        sampler.sample(&mut psi);
        let v = balanced.eval(&psi);
        sum += v;
        sum_sq += v.norm_sqr();
    }
    let n = mc.samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean.norm_sqr()).max(0.0);
    Ok(EstimateC {
        value: mean,
        stderr: (var / n).sqrt(),
        exact: false,
    })
}

/// Local-factorial bound |⟨ψ(z₁)…ψ(z_q) ψ*(w₁)…ψ*(w_q)⟩| ≤ K₁^q Π n*(x)!
/// for a covariance with K₀ = 1; n*(x) is the multiplicity of x among
/// the w's, and k1 = K₁(d, μ₀).  Returns (lhs, rhs, holds).
pub fn local_factorial_check(
    cov: &Covariance,
    k1: f64,
    zs: &[usize],
    ws: &[usize],
) -> Result<(f64, f64, bool), GaussianError> {
    assert_eq!(zs.len(), ws.len());
    let q = zs.len();
    if q > 6 {
        return Err(GaussianError::SizeLimit(q));
    }
    let lhs = wick_moment(&cov.matrix, zs, ws)?.norm();
    let mut mult = std::collections::HashMap::new();
    for &w in ws {
        *mult.entry(w).or_insert(0u64) += 1;
    }
    let mut rhs = k1.powi(q as i32);
    for (_, m) in mult {
        rhs *= (1..=m).product::<u64>() as f64;
    }
    Ok((lhs, rhs, lhs <= rhs * (1.0 + 1e-12)))
}
