//! The forest interpolation identity and its corollaries: the canonical
//! min-over-path interpolation point s(𝔉, h), an exact rational check of
//! the forest formula for polynomial integrands, the graph-vs-tree
//! resummation identity, and the tree inequality under the stability
//! hypothesis.

use super::{for_each_forest, for_each_spanning_tree, CombinatoricsError, Dsu, SimpleGraph};
use num::complex::Complex64;
use num::rational::BigRational;
use num::{One, Zero};
use std::collections::BTreeMap;

/// Canonical index of the unordered pair {a, b} (a < b) among the pairs
/// of 0..n, row-major.
pub fn pair_index(n: usize, a: usize, b: usize) -> usize {
    assert!(a != b && a < n && b < n);
    let (a, b) = (a.min(b), a.max(b));
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

pub fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// A multiplet (s_l) indexed by the pairs of 0..n.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationPoint {
    pub n: usize,
    pub values: Vec<f64>,
}

impl InterpolationPoint {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[pair_index(self.n, a, b)]
    }
}

/// s(𝔉, h): min of h over the unique forest path between a and b, zero
/// when a and b lie in different components.
pub fn bkar_point(n: usize, forest: &[(usize, usize)], h: &[f64]) -> InterpolationPoint {
    assert_eq!(forest.len(), h.len());
    let mut values = vec![0.0; pair_count(n)];
    for a in 0..n {
        for b in (a + 1)..n {
            if let Some(path) = forest_path(n, forest, a, b) {
                let m = path.iter().map(|&e| h[e]).fold(f64::INFINITY, f64::min);
                values[pair_index(n, a, b)] = m;
            }
        }
    }
    InterpolationPoint { n, values }
}

/// Edge indices along the forest path from a to b, or None if
/// disconnected.
fn forest_path(n: usize, forest: &[(usize, usize)], a: usize, b: usize) -> Option<Vec<usize>> {
    // BFS from a remembering the edge used to reach each vertex
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; n]; // (vertex, edge idx)
    let mut visited = vec![false; n];
    visited[a] = true;
    let mut queue = std::collections::VecDeque::from([a]);
    while let Some(v) = queue.pop_front() {
        if v == b {
            break;
        }
        for (i, &(x, y)) in forest.iter().enumerate() {
            let other = if x == v {
                y
            } else if y == v {
                x
            } else {
                continue;
            };
            if !visited[other] {
                visited[other] = true;
                prev[other] = Some((v, i));
                queue.push_back(other);
            }
        }
    }
    if !visited[b] {
        return None;
    }
    let mut path = Vec::new();
    let mut cur = b;
    while cur != a {
        let (p, e) = prev[cur].unwrap();
        path.push(e);
        cur = p;
    }
    Some(path)
}

/// Multivariate polynomial with exact rational coefficients; exponent
/// vectors are dense over a fixed variable count.
#[derive(Clone, Debug, PartialEq)]
pub struct RatPoly {
    pub nvars: usize,
    pub terms: BTreeMap<Vec<u32>, BigRational>,
}

impl RatPoly {
    pub fn zero(nvars: usize) -> Self {
        RatPoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        let mut p = RatPoly::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut exp = vec![0u32; nvars];
        exp[i] = 1;
        let mut p = RatPoly::zero(nvars);
        p.terms.insert(exp, BigRational::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn insert(&mut self, exp: Vec<u32>, coeff: BigRational) {
        if coeff.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(exp) {
            Entry::Vacant(e) => {
                e.insert(coeff);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += coeff;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &RatPoly) -> RatPoly {
        assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (exp, c) in &other.terms {
            out.insert(exp.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &RatPoly) -> RatPoly {
        assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (exp, c) in &other.terms {
            out.insert(exp.clone(), -c.clone());
        }
        out
    }

    pub fn mul(&self, other: &RatPoly) -> RatPoly {
        assert_eq!(self.nvars, other.nvars);
        let mut out = RatPoly::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let exp: Vec<u32> = e1.iter().zip(e2.iter()).map(|(a, b)| a + b).collect();
                out.insert(exp, c1 * c2);
            }
        }
        out
    }

    pub fn derivative(&self, var: usize) -> RatPoly {
        let mut out = RatPoly::zero(self.nvars);
        for (exp, c) in &self.terms {
            if exp[var] == 0 {
                continue;
            }
            let mut e = exp.clone();
            e[var] -= 1;
            out.insert(e, c * BigRational::from_integer(exp[var].into()));
        }
        out
    }

    pub fn antiderivative(&self, var: usize) -> RatPoly {
        let mut out = RatPoly::zero(self.nvars);
        for (exp, c) in &self.terms {
            let mut e = exp.clone();
            e[var] += 1;
            let coeff = c / BigRational::from_integer(e[var].into());
            out.insert(e, coeff);
        }
        out
    }

    /// Substitute variable `var` by 1 (drop the exponent).
    pub fn subst_one(&self, var: usize) -> RatPoly {
        let mut out = RatPoly::zero(self.nvars);
        for (exp, c) in &self.terms {
            let mut e = exp.clone();
            e[var] = 0;
            out.insert(e, c.clone());
        }
        out
    }

    /// Substitute variable `var` by variable `target`.
    pub fn subst_var(&self, var: usize, target: usize) -> RatPoly {
        assert_ne!(var, target);
        let mut out = RatPoly::zero(self.nvars);
        for (exp, c) in &self.terms {
            let mut e = exp.clone();
            e[target] += e[var];
            e[var] = 0;
            out.insert(e, c.clone());
        }
        out
    }

    /// Remap variables: old variable i becomes `map[i]`; `None` sends the
    /// variable to 0 (killing any term that uses it positively).
    pub fn compose_vars(&self, map: &[Option<usize>], new_nvars: usize) -> RatPoly {
        assert_eq!(map.len(), self.nvars);
        let mut out = RatPoly::zero(new_nvars);
        'terms: for (exp, c) in &self.terms {
            let mut e = vec![0u32; new_nvars];
            for (i, &x) in exp.iter().enumerate() {
                if x == 0 {
                    continue;
                }
                match map[i] {
                    Some(j) => e[j] += x,
                    None => continue 'terms,
                }
            }
            out.insert(e, c.clone());
        }
        out
    }

    /// Value at the all-ones point.
    pub fn eval_ones(&self) -> BigRational {
        self.terms.values().sum()
    }

    /// Constant term.
    pub fn constant_term(&self) -> BigRational {
        self.terms
            .get(&vec![0u32; self.nvars])
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    /// f64 evaluation at a point.
    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (exp, c) in &self.terms {
            let mut term = rational_to_f64(c);
            for (i, &e) in exp.iter().enumerate() {
                term *= point[i].powi(e as i32);
            }
            acc += term;
        }
        acc
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    use num::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact verification of the forest interpolation formula
/// f(1) = Σ_𝔉 ∫_{[0,1]^𝔉} (∂^{|𝔉|} f / Π ∂s_l)(s(𝔉, h)) dh
/// for a polynomial f in the pair variables of E = {0..n}.  The h-cube is
/// split into the |𝔉|! ordering simplices; on each, every s_l equals a
/// single h variable, so the integral is evaluated exactly by iterated
/// rational integration.  Returns f(1) - RHS, which must be exactly zero.
pub fn bkar_verify(f: &RatPoly, n: usize) -> Result<BigRational, CombinatoricsError> {
    if n > 5 {
        return Err(CombinatoricsError::SizeLimit { size: n, cap: 5 });
    }
    assert_eq!(f.nvars, pair_count(n));
    let lhs = f.eval_ones();
    let mut rhs = BigRational::zero();
    let mut forests: Vec<Vec<(usize, usize)>> = Vec::new();
    for_each_forest(n, &mut |edges| forests.push(edges.to_vec()))?;
    for forest in &forests {
        let k = forest.len();
        // forest derivative of f
        let mut d = f.clone();
        for &(a, b) in forest {
            d = d.derivative(pair_index(n, a, b));
        }
        if d.is_zero() {
            continue;
        }
        // sum over ordering simplices of the h variables
        for sigma in permutations(k) {
            // rank of each forest edge in the ascending ordering
            let mut rank = vec![0usize; k];
            for (pos, &e) in sigma.iter().enumerate() {
                rank[e] = pos;
            }
            // each pair variable becomes the h variable of the smallest-
            // rank edge on its forest path, or 0 across components
            let mut map: Vec<Option<usize>> = vec![None; pair_count(n)];
            for a in 0..n {
                for b in (a + 1)..n {
                    if let Some(path) = forest_path(n, forest, a, b) {
                        let e = path.iter().copied().min_by_key(|&e| rank[e]).unwrap();
                        map[pair_index(n, a, b)] = Some(e);
                    }
                }
            }
            let mut g = d.compose_vars(&map, k);
            // integrate over 0 ≤ h_{σ(0)} ≤ … ≤ h_{σ(k-1)} ≤ 1
            for j in (0..k).rev() {
                let v = sigma[j];
                let anti = g.antiderivative(v);
                let upper = anti.subst_one(v);
                let lower = if j == 0 {
                    RatPoly::zero(k) // lower bound 0: antiderivative vanishes
                } else {
                    anti.subst_var(v, sigma[j - 1])
                };
                g = upper.sub(&lower);
            }
            rhs += g.constant_term();
        }
    }
    Ok(lhs - rhs)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..k).collect();
    permute_rec(&mut items, 0, &mut out);
    out
}

fn permute_rec(items: &mut Vec<usize>, at: usize, out: &mut Vec<Vec<usize>>) {
    if at == items.len() {
        out.push(items.clone());
        return;
    }
    for i in at..items.len() {
        items.swap(at, i);
        permute_rec(items, at + 1, out);
        items.swap(at, i);
    }
}

/// Both sides of the graph-vs-tree identity
/// Σ_{g ⇝ E} Π_{l∈g} (e^{-V_l}-1)
///   = Σ_{𝔗 spanning tree} ∫_{[0,1]^𝔗} Π(-V_l) e^{-Σ_l s(𝔗,h)_l V_l} dh.
#[derive(Clone, Debug)]
pub struct GraphTreeReport {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
}

/// Evaluates the left side by exact subset enumeration and the right side
/// by per-ordering-simplex Taylor expansion of the exponential: on the
/// simplex the exponent is linear, Σ_e c_e h_e, and the monomial moments
/// of the ordered simplex are 1/Π_j (a₁+…+a_j+j).
pub fn graph_tree_identity_verify(
    n: usize,
    v: &[Complex64],
) -> Result<GraphTreeReport, CombinatoricsError> {
    if n > 5 {
        return Err(CombinatoricsError::SizeLimit { size: n, cap: 5 });
    }
    assert_eq!(v.len(), pair_count(n));
    let lhs = connected_subgraph_sum(n, v);
    let mut rhs = Complex64::new(0.0, 0.0);
    let mut trees: Vec<Vec<(usize, usize)>> = Vec::new();
    for_each_spanning_tree(n, &mut |edges| trees.push(edges.to_vec()))?;
    for tree in &trees {
        let k = tree.len();
        let mut prefactor = Complex64::new(1.0, 0.0);
        for &(a, b) in tree {
            prefactor *= -v[pair_index(n, a, b)];
        }
        if prefactor.norm() == 0.0 {
            continue;
        }
        for sigma in permutations(k) {
            let mut rank = vec![0usize; k];
            for (pos, &e) in sigma.iter().enumerate() {
                rank[e] = pos;
            }
            // exponent coefficient per h variable (in σ-position order):
            // c_pos = Σ of V_l over pairs whose path minimum is edge σ(pos)
            let mut c = vec![Complex64::new(0.0, 0.0); k];
            for a in 0..n {
                for b in (a + 1)..n {
                    if let Some(path) = forest_path(n, tree, a, b) {
                        let e = path.iter().copied().min_by_key(|&e| rank[e]).unwrap();
                        c[rank[e]] += v[pair_index(n, a, b)];
                    }
                }
            }
            rhs += prefactor * ordered_simplex_exp_integral(&c);
        }
    }
    let residual = (lhs - rhs).norm();
    Ok(GraphTreeReport { lhs, rhs, residual })
}

/// Σ over connected spanning subgraphs g of Π_{l∈g}(e^{-V_l}-1).
pub fn connected_subgraph_sum(n: usize, v: &[Complex64]) -> Complex64 {
    let edges = SimpleGraph::complete(n).edges;
    let weights: Vec<Complex64> = edges
        .iter()
        .map(|&(a, b)| (-v[pair_index(n, a, b)]).exp() - Complex64::new(1.0, 0.0))
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for mask in 0usize..(1 << edges.len()) {
        let mut dsu = Dsu::new(n);
        let mut prod = Complex64::new(1.0, 0.0);
        for (i, &(a, b)) in edges.iter().enumerate() {
            if mask >> i & 1 == 1 {
                dsu.union(a, b);
                prod *= weights[i];
            }
        }
        if dsu.components() == 1 {
            total += prod;
        }
    }
    total
}

/// ∫ over 0 ≤ u₁ ≤ … ≤ u_k ≤ 1 of e^{-Σ c_j u_j}, by the multivariate
/// Taylor series with exact simplex monomial moments.  `c` is indexed by
/// ascending position.  Converges for any c; truncation stops once a
/// whole degree layer is negligible.
fn ordered_simplex_exp_integral(c: &[Complex64]) -> Complex64 {
    let k = c.len();
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let max_degree = 120usize;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut exps = vec![0u32; k];
    let mut tiny_layers = 0;
    for degree in 0..=max_degree {
        let mut layer = Complex64::new(0.0, 0.0);
        let mut layer_abs = 0.0f64;
        compositions(degree as u32, k, &mut exps, 0, &mut |e: &[u32]| {
            // term = Π (-c_j)^{e_j}/e_j! × 1/Π_j (e₁+…+e_j + j)
            let mut term = Complex64::new(1.0, 0.0);
            for (j, &ej) in e.iter().enumerate() {
                for p in 1..=ej {
                    term *= -c[j] / (p as f64);
                }
                let _ = j;
            }
            let mut prefix = 0u64;
            let mut denom = 1.0f64;
            for (j, &ej) in e.iter().enumerate() {
                prefix += ej as u64;
                denom *= (prefix + j as u64 + 1) as f64;
            }
            let value = term / denom;
            layer += value;
            layer_abs += value.norm();
        });
        acc += layer;
        if layer_abs < 1e-17 * (acc.norm() + 1e-30) {
            tiny_layers += 1;
            if tiny_layers >= 3 {
                break;
            }
        } else {
            tiny_layers = 0;
        }
    }
    acc
}

fn compositions<F: FnMut(&[u32])>(
    total: u32,
    k: usize,
    scratch: &mut Vec<u32>,
    at: usize,
    f: &mut F,
) {
    if at == k - 1 {
        scratch[at] = total;
        f(scratch);
        return;
    }
    for x in 0..=total {
        scratch[at] = x;
        compositions(total - x, k, scratch, at + 1, f);
    }
}

/// Result of the tree inequality check
/// |Σ_{g⇝E} Π (e^{-V_l}-1)| ≤ e^{Σ U_a} Σ_𝔗 Π |V_l|.
#[derive(Clone, Debug)]
pub struct TreeInequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Verifies the stability hypothesis |Σ_{l∈S⁽²⁾} V_l| ≤ Σ_{a∈S} U_a for
/// every subset S exhaustively, then evaluates both sides.
pub fn tree_inequality_check(
    n: usize,
    v: &[Complex64],
    u: &[f64],
) -> Result<TreeInequalityReport, CombinatoricsError> {
    if n > 5 {
        return Err(CombinatoricsError::SizeLimit { size: n, cap: 5 });
    }
    assert_eq!(v.len(), pair_count(n));
    assert_eq!(u.len(), n);
    for mask in 0usize..(1 << n) {
        let mut vsum = Complex64::new(0.0, 0.0);
        let mut usum = 0.0;
        for a in 0..n {
            if mask >> a & 1 == 0 {
                continue;
            }
            usum += u[a];
            for b in (a + 1)..n {
                if mask >> b & 1 == 1 {
                    vsum += v[pair_index(n, a, b)];
                }
            }
        }
        if vsum.norm() > usum + 1e-12 {
            let subset: Vec<usize> = (0..n).filter(|&a| mask >> a & 1 == 1).collect();
            return Err(CombinatoricsError::StabilityViolated(subset));
        }
    }
    let lhs = connected_subgraph_sum(n, v).norm();
    let mut tree_sum = 0.0f64;
    for_each_spanning_tree(n, &mut |edges| {
        let mut prod = 1.0;
        for &(a, b) in edges {
            prod *= v[pair_index(n, a, b)].norm();
        }
        tree_sum += prod;
    })?;
    let rhs = (u.iter().sum::<f64>()).exp() * tree_sum;
    Ok(TreeInequalityReport {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-12) + 1e-300,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn bkar_point_examples() {
        // empty forest: all zero
        let p = bkar_point(3, &[], &[]);
        assert!(p.values.iter().all(|&x| x == 0.0));
        // single edge on {0,1}
        let p = bkar_point(2, &[(0, 1)], &[1.0]);
        assert_eq!(p.get(0, 1), 1.0);
        // path 0-1-2: s_{02} = min(h01, h12)
        let p = bkar_point(3, &[(0, 1), (1, 2)], &[0.3, 0.7]);
        assert_eq!(p.get(0, 2), 0.3);
        assert_eq!(p.get(0, 1), 0.3);
        assert_eq!(p.get(1, 2), 0.7);
    }

    #[test]
    fn bkar_constant_function() {
        let f = RatPoly::constant(pair_count(3), rat(7, 3));
        let residual = bkar_verify(&f, 3).unwrap();
        assert!(residual.is_zero());
    }

    #[test]
    fn bkar_single_variable() {
        // |E| = 2, f = s01: f(1) = 1 = f(0) + ∫₀¹ 1 dh
        let f = RatPoly::var(pair_count(2), 0);
        let residual = bkar_verify(&f, 2).unwrap();
        assert!(residual.is_zero());
    }

    #[test]
    fn bkar_triple_product() {
        // f = s01 · s12 · s02 on |E| = 3
        let n = 3;
        let f = RatPoly::var(pair_count(n), pair_index(n, 0, 1))
            .mul(&RatPoly::var(pair_count(n), pair_index(n, 1, 2)))
            .mul(&RatPoly::var(pair_count(n), pair_index(n, 0, 2)));
        let residual = bkar_verify(&f, n).unwrap();
        assert!(residual.is_zero(), "residual = {residual}");
    }

    #[test]
    fn graph_tree_two_vertices_closed_form() {
        // LHS = e^{-v} - 1 = ∫₀¹ (-v) e^{-hv} dh = RHS
        let v = Complex64::new(0.7, -0.3);
        let report = graph_tree_identity_verify(2, &[v]).unwrap();
        let closed = (-v).exp() - Complex64::new(1.0, 0.0);
        assert!((report.lhs - closed).norm() < 1e-14);
        assert!(report.residual < 1e-12, "residual {}", report.residual);
    }

    #[test]
    fn graph_tree_zero_weights() {
        let report = graph_tree_identity_verify(3, &[Complex64::new(0.0, 0.0); 3]).unwrap();
        assert_eq!(report.lhs, Complex64::new(0.0, 0.0));
        assert!(report.rhs.norm() < 1e-15);
    }

    #[test]
    fn graph_tree_three_vertices() {
        let v = [
            Complex64::new(0.4, 0.1),
            Complex64::new(-0.2, 0.3),
            Complex64::new(0.15, -0.45),
        ];
        let report = graph_tree_identity_verify(3, &v).unwrap();
        assert!(report.residual < 1e-10, "residual {}", report.residual);
    }

    #[test]
    fn tree_inequality_scalar_case() {
        // |E| = 2, V real > 0, U = V/2 each: |e^{-V}-1| ≤ e^V · V
        let v = [Complex64::new(0.8, 0.0)];
        let u = [0.4, 0.4];
        let report = tree_inequality_check(2, &v, &u).unwrap();
        assert!(report.holds);
    }

    #[test]
    fn tree_inequality_zero_case() {
        let report = tree_inequality_check(3, &[Complex64::new(0.0, 0.0); 3], &[0.0; 3]).unwrap();
        assert_eq!(report.lhs, 0.0);
        assert!(report.holds);
    }

    #[test]
    fn tree_inequality_rejects_unstable() {
        // V big on the pair, U tiny: subset {0,1} violates stability
        let v = [Complex64::new(5.0, 0.0)];
        let u = [0.1, 0.1];
        assert!(matches!(
            tree_inequality_check(2, &v, &u),
            Err(CombinatoricsError::StabilityViolated(_))
        ));
    }

    #[test]
    fn simplex_exp_integral_1d() {
        // ∫₀¹ e^{-cu} du = (1 - e^{-c})/c
        let c = Complex64::new(0.9, 0.4);
        let got = ordered_simplex_exp_integral(&[c]);
        let want = (Complex64::new(1.0, 0.0) - (-c).exp()) / c;
        assert!((got - want).norm() < 1e-14);
    }

    #[test]
    fn simplex_exp_integral_2d_split() {
        // the two orderings tile the square: sum = Π ∫₀¹ e^{-c_i u} du
        let c1 = Complex64::new(0.5, 0.2);
        let c2 = Complex64::new(-0.3, 0.8);
        let a = ordered_simplex_exp_integral(&[c1, c2]);
        let b = ordered_simplex_exp_integral(&[c2, c1]);
        let f = |c: Complex64| (Complex64::new(1.0, 0.0) - (-c).exp()) / c;
        assert!((a + b - f(c1) * f(c2)).norm() < 1e-13);
    }
}
