//! Exact combinatorics: graphs, forests and spanning trees, Ursell
//! functions and chromatic polynomials, tree-level Wick counts κ_k, and
//! the assorted counting lemmas used by the polymer estimates.  Every
//! computation in this module is carried out in integer or rational
//! arithmetic.

pub mod bkar;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Zero};
use std::collections::BTreeSet;
use thiserror::Error;

pub use bkar::{
    bkar_point, bkar_verify, graph_tree_identity_verify, tree_inequality_check, InterpolationPoint,
    RatPoly, TreeInequalityReport,
};

/// Default enumeration caps; checks refuse to run above these.
pub const TREE_VERTEX_CAP: usize = 9;
pub const URSELL_VERTEX_CAP: usize = 10;
pub const PAIRING_K_CAP: u32 = 4;

#[derive(Debug, Error)]
pub enum CombinatoricsError {
    #[error("instance size {size} exceeds cap {cap}")]
    SizeLimit { size: usize, cap: usize },
    #[error("invalid degree sequence: need all d_i >= 1 and Σ d_i = 2m-2")]
    InvalidDegreeSequence,
    #[error("stability hypothesis violated for subset {0:?}")]
    StabilityViolated(Vec<usize>),
}

/// A simple graph on vertices 0..n (no loops, no multi-edges); edges are
/// stored as ordered pairs (a, b) with a < b.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimpleGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl SimpleGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            assert!(a != b && a < n && b < n, "loop or out-of-range edge");
            set.insert((a.min(b), a.max(b)));
        }
        SimpleGraph {
            n,
            edges: set.into_iter().collect(),
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                edges.push((a, b));
            }
        }
        SimpleGraph { n, edges }
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let mut dsu = Dsu::new(self.n);
        for &(a, b) in &self.edges {
            dsu.union(a, b);
        }
        dsu.components() == 1
    }
}

/// Union-find with path halving.
pub struct Dsu {
    parent: Vec<usize>,
    count: usize,
}

impl Dsu {
    pub fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
            count: n,
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if x and y were already connected.
    pub fn union(&mut self, x: usize, y: usize) -> bool {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return false;
        }
        self.parent[rx] = ry;
        self.count -= 1;
        true
    }

    pub fn components(&self) -> usize {
        self.count
    }
}

/// Decodes a Prüfer sequence over labels 0..n-1 into the edge list of the
/// corresponding labeled tree.
pub fn pruefer_decode(n: usize, seq: &[usize]) -> Vec<(usize, usize)> {
    assert!(n >= 2 && seq.len() == n - 2);
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    let mut used = vec![false; n];
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1 && !used[v]).unwrap();
        edges.push((leaf.min(s), leaf.max(s)));
        used[leaf] = true;
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1 && !used[v]).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Calls `f` once per labeled spanning tree of the complete graph on
/// 0..n, in Prüfer-lexicographic order.
pub fn for_each_spanning_tree<F: FnMut(&[(usize, usize)])>(
    n: usize,
    f: &mut F,
) -> Result<(), CombinatoricsError> {
    if n > TREE_VERTEX_CAP {
        return Err(CombinatoricsError::SizeLimit {
            size: n,
            cap: TREE_VERTEX_CAP,
        });
    }
    if n == 0 {
        return Ok(());
    }
    if n == 1 {
        f(&[]);
        return Ok(());
    }
    let mut seq = vec![0usize; n - 2];
    loop {
        let edges = pruefer_decode(n, &seq);
        f(&edges);
        // advance the Prüfer counter
        let mut i = seq.len();
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            seq[i] += 1;
            if seq[i] < n {
                break;
            }
            seq[i] = 0;
        }
    }
}

pub fn spanning_tree_count(n: usize) -> Result<u64, CombinatoricsError> {
    let mut count = 0u64;
    for_each_spanning_tree(n, &mut |_| count += 1)?;
    Ok(count)
}

/// Calls `f` once per forest (acyclic edge subset of the complete graph
/// on 0..n), including the empty forest.
pub fn for_each_forest<F: FnMut(&[(usize, usize)])>(
    n: usize,
    f: &mut F,
) -> Result<(), CombinatoricsError> {
    if n > TREE_VERTEX_CAP {
        return Err(CombinatoricsError::SizeLimit {
            size: n,
            cap: TREE_VERTEX_CAP,
        });
    }
    let all_edges = SimpleGraph::complete(n).edges;
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    // recursive descent over edge indices; a chosen prefix is always a forest
    fn recurse<F: FnMut(&[(usize, usize)])>(
        all: &[(usize, usize)],
        from: usize,
        n: usize,
        chosen: &mut Vec<(usize, usize)>,
        f: &mut F,
    ) {
        f(chosen);
        for i in from..all.len() {
            let (a, b) = all[i];
            let mut dsu = Dsu::new(n);
            for &(x, y) in chosen.iter() {
                dsu.union(x, y);
            }
            if dsu.union(a, b) {
                chosen.push((a, b));
                recurse(all, i + 1, n, chosen, f);
                chosen.pop();
            }
        }
    }
    recurse(&all_edges, 0, n, &mut chosen, f);
    Ok(())
}

pub fn forest_count(n: usize) -> Result<u64, CombinatoricsError> {
    let mut count = 0u64;
    for_each_forest(n, &mut |_| count += 1)?;
    Ok(count)
}

/// Signed sum over connected spanning subgraphs, Σ_{H ⊆ E, H connects V}
/// (-1)^{|H|}, computed exactly by Möbius recursion over vertex subsets:
/// grouping subgraphs by the component T of the lowest vertex gives
/// C(S) = A(S) - Σ_{T ∋ v₀, T ⊊ S} C(T) A(S∖T), where A(X) = 1 iff the
/// induced graph on X has no edges.
pub fn ursell_connected_sum(g: &SimpleGraph) -> Result<BigInt, CombinatoricsError> {
    if g.n > URSELL_VERTEX_CAP {
        return Err(CombinatoricsError::SizeLimit {
            size: g.n,
            cap: URSELL_VERTEX_CAP,
        });
    }
    if g.n == 0 {
        return Ok(BigInt::zero());
    }
    let n = g.n;
    let full: usize = (1 << n) - 1;
    // adjacency masks
    let mut adj = vec![0usize; n];
    for &(a, b) in &g.edges {
        adj[a] |= 1 << b;
        adj[b] |= 1 << a;
    }
    let edgeless = |mask: usize| -> bool {
        let mut m = mask;
        while m != 0 {
            let v = m.trailing_zeros() as usize;
            m &= m - 1;
            if adj[v] & mask != 0 {
                return false;
            }
        }
        true
    };
    let mut c: Vec<Option<BigInt>> = vec![None; full + 1];
    // order subsets by popcount so sub-subsets are computed first
    let mut masks: Vec<usize> = (1..=full).collect();
    masks.sort_by_key(|m| m.count_ones());
    for mask in masks {
        let v0 = mask.trailing_zeros() as usize;
        let mut value = if edgeless(mask) {
            BigInt::one()
        } else {
            BigInt::zero()
        };
        // proper sub-subsets T of mask that contain v0
        let rest = mask & !(1 << v0);
        let mut sub = rest;
        loop {
            // T = {v0} ∪ sub', iterate over subsets sub' ⊊ rest (sub == rest is the full set)
            if sub != rest {
                let t = sub | (1 << v0);
                let complement = mask & !t;
                if edgeless(complement) {
                    value -= c[t].as_ref().unwrap();
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        c[mask] = Some(value);
    }
    Ok(c[full].take().unwrap())
}

/// The same signed sum by direct enumeration of edge subsets; used as an
/// independent oracle for small graphs.
pub fn ursell_direct(g: &SimpleGraph) -> Result<BigInt, CombinatoricsError> {
    if g.edges.len() > 22 {
        return Err(CombinatoricsError::SizeLimit {
            size: g.edges.len(),
            cap: 22,
        });
    }
    if g.n == 0 {
        return Ok(BigInt::zero());
    }
    let m = g.edges.len();
    let mut total = BigInt::zero();
    for mask in 0usize..(1 << m) {
        let mut dsu = Dsu::new(g.n);
        for (i, &(a, b)) in g.edges.iter().enumerate() {
            if mask >> i & 1 == 1 {
                dsu.union(a, b);
            }
        }
        if dsu.components() == 1 {
            if mask.count_ones() % 2 == 0 {
                total += 1;
            } else {
                total -= 1;
            }
        }
    }
    Ok(total)
}

/// Chromatic polynomial by deletion-contraction; coefficients of
/// x⁰, x¹, …, xⁿ.
pub fn chromatic_polynomial(g: &SimpleGraph) -> Result<Vec<BigInt>, CombinatoricsError> {
    if g.n > URSELL_VERTEX_CAP {
        return Err(CombinatoricsError::SizeLimit {
            size: g.n,
            cap: URSELL_VERTEX_CAP,
        });
    }
    fn rec(n: usize, edges: &[(usize, usize)]) -> Vec<BigInt> {
        match edges.split_last() {
            None => {
                // edgeless graph on n vertices: x^n
                let mut coeffs = vec![BigInt::zero(); n + 1];
                coeffs[n] = BigInt::one();
                coeffs
            }
            Some((&(a, b), rest)) => {
                // delete
                let deleted = rec(n, rest);
                // contract b into a, dropping loops and duplicate edges
                let mut contracted: BTreeSet<(usize, usize)> = BTreeSet::new();
                for &(x, y) in rest {
                    let map = |v: usize| {
                        let v = if v == b { a } else { v };
                        if v > b {
                            v - 1
                        } else {
                            v
                        }
                    };
                    let (x, y) = (map(x), map(y));
                    if x != y {
                        contracted.insert((x.min(y), x.max(y)));
                    }
                }
                let contracted: Vec<(usize, usize)> = contracted.into_iter().collect();
                let sub = rec(n - 1, &contracted);
                let mut coeffs = deleted;
                for (i, c) in sub.iter().enumerate() {
                    coeffs[i] -= c;
                }
                coeffs
            }
        }
    }
    Ok(rec(g.n, &g.edges))
}

/// The Ursell value as the coefficient of x in the chromatic polynomial.
pub fn ursell_via_chromatic(g: &SimpleGraph) -> Result<BigInt, CombinatoricsError> {
    let coeffs = chromatic_polynomial(g)?;
    Ok(if coeffs.len() > 1 {
        coeffs[1].clone()
    } else {
        BigInt::zero()
    })
}

/// Intersection graph of a polymer family: vertices are indices, with an
/// edge whenever the two polymers share a site.
pub fn intersection_graph(polymers: &[BTreeSet<usize>]) -> SimpleGraph {
    let p = polymers.len();
    let mut edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if !polymers[i].is_disjoint(&polymers[j]) {
                edges.push((i, j));
            }
        }
    }
    SimpleGraph::new(p, edges)
}

/// φ^T(R₁,…,R_p): the Ursell function of the intersection graph.
pub fn ursell_for_polymers(polymers: &[BTreeSet<usize>]) -> Result<BigInt, CombinatoricsError> {
    ursell_connected_sum(&intersection_graph(polymers))
}

/// Checks the singleton reduction φ^T({z},R₁,…,R_p) = (-r)·φ^T(R₁,…,R_p)
/// with r = #{q : z ∈ R_q}; returns (lhs, rhs, equal).
pub fn ursell_reduction_check(
    z: usize,
    polymers: &[BTreeSet<usize>],
) -> Result<(BigInt, BigInt, bool), CombinatoricsError> {
    let mut family = vec![BTreeSet::from([z])];
    family.extend(polymers.iter().cloned());
    let lhs = ursell_for_polymers(&family)?;
    let r = polymers.iter().filter(|r| r.contains(&z)).count();
    let rhs = -BigInt::from(r) * ursell_for_polymers(polymers)?;
    let equal = lhs == rhs;
    Ok((lhs, rhs, equal))
}

pub fn factorial(n: u64) -> BigInt {
    let mut out = BigInt::one();
    for i in 2..=n {
        out *= i;
    }
    out
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut out = BigInt::one();
    for i in 0..k {
        out = out * (n - i) / (i + 1);
    }
    out
}

/// κ_k = 2^{k-1} k! (k-1)! (3k-3)! / (2k-1)!, exactly.
pub fn kappa_closed_form(k: u32) -> BigRational {
    assert!(k >= 1);
    let k = k as u64;
    let num =
        BigInt::from(2).pow(k as u32 - 1) * factorial(k) * factorial(k - 1) * factorial(3 * k - 3);
    BigRational::new(num, factorial(2 * k - 1))
}

/// κ_k from the quadratic recurrence
/// (k-2) κ_k = Σ_{i=1}^{k-2} C(k-1,i) C(k,i+1) C(k,k-i) κ_{i+1} κ_{k-i},
/// seeded with κ₁ = 1 and κ₂ = 4.
pub fn kappa_recurrence(k: u32) -> BigRational {
    assert!(k >= 1);
    let mut kappa: Vec<BigRational> = vec![
        BigRational::zero(), // unused index 0
        BigRational::one(),
        BigRational::from(BigInt::from(4)),
    ];
    for m in 3..=k as u64 {
        let mut sum = BigRational::zero();
        for i in 1..=(m - 2) {
            let coeff = binomial(m - 1, i) * binomial(m, i + 1) * binomial(m, m - i);
            sum += BigRational::from(coeff) * &kappa[(i + 1) as usize] * &kappa[(m - i) as usize];
        }
        sum /= BigRational::from(BigInt::from(m - 2));
        kappa.push(sum);
    }
    kappa[k as usize].clone()
}

/// Counts Wick contractions with k external ψ legs, k external ψ* legs
/// and k-1 internal |ψ|⁴ vertices whose contraction graph is a connecting
/// tree, by enumerating all bijections between ψ-halves and ψ*-halves.
///
/// Nodes: k external ψ, k external ψ*, k-1 internal; 3k-2 halves per
/// species.  With 3k-1 nodes and 3k-2 contraction edges, connectivity
/// forces the graph to be a tree.
pub fn kappa_bruteforce(k: u32) -> Result<u64, CombinatoricsError> {
    assert!(k >= 1);
    if k > PAIRING_K_CAP {
        return Err(CombinatoricsError::SizeLimit {
            size: k as usize,
            cap: PAIRING_K_CAP as usize,
        });
    }
    let k = k as usize;
    let halves = 3 * k - 2;
    let nodes = 3 * k - 1;
    // owner of each ψ half: externals 0..k, then internals twice each
    let mut psi_owner = Vec::with_capacity(halves);
    let mut psistar_owner = Vec::with_capacity(halves);
    for i in 0..k {
        psi_owner.push(i);
        psistar_owner.push(k + i);
    }
    for v in 0..(k - 1) {
        for _ in 0..2 {
            psi_owner.push(2 * k + v);
            psistar_owner.push(2 * k + v);
        }
    }
    let mut perm: Vec<usize> = (0..halves).collect();
    let mut counter = vec![0usize; halves];
    let mut count = 0u64;
    let mut check = |perm: &[usize]| {
        let mut dsu = Dsu::new(nodes);
        for (i, &p) in perm.iter().enumerate() {
            dsu.union(psi_owner[i], psistar_owner[p]);
        }
        if dsu.components() == 1 {
            count += 1;
        }
    };
    // Heap's algorithm, iterative
    check(&perm);
    let mut i = 0;
    while i < halves {
        if counter[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counter[i], i);
            }
            check(&perm);
            counter[i] += 1;
            i = 0;
        } else {
            counter[i] = 0;
            i += 1;
        }
    }
    Ok(count)
}

/// Exact check of the hockey-stick-style identity
/// Σ_{j=0}^{k-1} (3j)!(3k-3j-3)! / (j!(2j+1)!(2k-2j-1)!(k-j-1)!)
///   = (3k-2)! / (k!(2k-1)!).
pub fn combident_check(k: u32) -> bool {
    let k = k as u64;
    let mut lhs = BigRational::zero();
    for j in 0..k {
        let num = factorial(3 * j) * factorial(3 * k - 3 * j - 3);
        let den = factorial(j)
            * factorial(2 * j + 1)
            * factorial(2 * k - 2 * j - 1)
            * factorial(k - j - 1);
        lhs += BigRational::new(num, den);
    }
    let rhs = BigRational::new(factorial(3 * k - 2), factorial(k) * factorial(2 * k - 1));
    lhs == rhs
}

/// Number of labeled trees on [m] with the given degree sequence:
/// (m-2)! / Π (d_i - 1)!.
pub fn cayley_degree_count(degrees: &[u64]) -> Result<BigRational, CombinatoricsError> {
    let m = degrees.len() as u64;
    if m < 2 || degrees.iter().any(|&d| d < 1) || degrees.iter().sum::<u64>() != 2 * m - 2 {
        return Err(CombinatoricsError::InvalidDegreeSequence);
    }
    let mut den = BigInt::one();
    for &d in degrees {
        den *= factorial(d - 1);
    }
    Ok(BigRational::new(factorial(m - 2), den))
}

/// Report for Σ_𝔱 Π_i d_𝔱(i)! ≤ 2^{3m-3} (m-2)!.
#[derive(Clone, Debug)]
pub struct SumTreeDegreeReport {
    pub lhs: BigInt,
    pub rhs: BigInt,
    pub holds: bool,
}

/// Evaluates the left side both by tree enumeration and by summing the
/// fixed-degree-sequence counts; the two must agree exactly.
pub fn sumtreedegree_check(m: usize) -> Result<SumTreeDegreeReport, CombinatoricsError> {
    if !(2..=8).contains(&m) {
        return Err(CombinatoricsError::SizeLimit { size: m, cap: 8 });
    }
    let mut lhs = BigInt::zero();
    for_each_spanning_tree(m, &mut |edges| {
        let mut deg = vec![0u64; m];
        for &(a, b) in edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        let mut prod = BigInt::one();
        for &d in &deg {
            prod *= factorial(d);
        }
        lhs += prod;
    })?;
    // second route: Σ over degree sequences of count(d) Π d_i!
    let mut by_degrees = BigRational::zero();
    let mut degrees = vec![1u64; m];
    sum_degree_sequences(&mut degrees, 0, 2 * m as u64 - 2, &mut by_degrees);
    assert!(by_degrees.is_integer());
    assert_eq!(
        by_degrees.to_integer(),
        lhs,
        "degree-sequence route differs"
    );
    let rhs = BigInt::from(2).pow(3 * m as u32 - 3) * factorial(m as u64 - 2);
    let holds = lhs <= rhs;
    Ok(SumTreeDegreeReport { lhs, rhs, holds })
}

fn sum_degree_sequences(degrees: &mut Vec<u64>, idx: usize, remaining: u64, acc: &mut BigRational) {
    let m = degrees.len();
    if idx == m {
        if remaining == 0 {
            if let Ok(count) = cayley_degree_count(degrees) {
                let mut prod = BigInt::one();
                for &d in degrees.iter() {
                    prod *= factorial(d);
                }
                *acc += count * BigRational::from(prod);
            }
        }
        return;
    }
    let slots_left = (m - idx - 1) as u64;
    // each remaining degree is at least 1
    if remaining < 1 + slots_left {
        return;
    }
    for d in 1..=(remaining - slots_left) {
        degrees[idx] = d;
        sum_degree_sequences(degrees, idx + 1, remaining - d, acc);
    }
    degrees[idx] = 1;
}

/// Report for Σ_{y₁..y_k ∈ R} Π_x c_y(x)!^β ≤ 2^{|R|+k-1} k!^{max(β,1)}.
#[derive(Clone, Debug)]
pub struct SumInPolyReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn suminpoly_check(
    r_size: usize,
    k: u32,
    beta: f64,
) -> Result<SumInPolyReport, CombinatoricsError> {
    if r_size > 5 || k > 6 {
        return Err(CombinatoricsError::SizeLimit {
            size: r_size.max(k as usize),
            cap: 6,
        });
    }
    assert!(r_size >= 1);
    let mut lhs = 0.0f64;
    let mut assignment = vec![0usize; k as usize];
    loop {
        let mut counts = vec![0u64; r_size];
        for &site in &assignment {
            counts[site] += 1;
        }
        let mut prod = 1.0f64;
        for &c in &counts {
            let cf: u64 = (1..=c).product::<u64>().max(1);
            prod *= (cf as f64).powf(beta);
        }
        lhs += prod;
        // advance assignment in base r_size
        let mut i = 0;
        loop {
            if i == k as usize {
                let kf: u64 = (1..=k as u64).product::<u64>().max(1);
                let rhs =
                    2.0f64.powi(r_size as i32 + k as i32 - 1) * (kf as f64).powf(beta.max(1.0));
                return Ok(SumInPolyReport {
                    lhs,
                    rhs,
                    holds: lhs <= rhs * (1.0 + 1e-12),
                });
            }
            assignment[i] += 1;
            if assignment[i] < r_size {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cayley_counts() {
        assert_eq!(spanning_tree_count(1).unwrap(), 1);
        assert_eq!(spanning_tree_count(2).unwrap(), 1);
        assert_eq!(spanning_tree_count(3).unwrap(), 3);
        assert_eq!(spanning_tree_count(5).unwrap(), 125);
    }

    #[test]
    fn forest_counts_match_subset_filter() {
        for n in 1..=5usize {
            let fast = forest_count(n).unwrap();
            // brute force over all edge subsets
            let all = SimpleGraph::complete(n).edges;
            let mut slow = 0u64;
            for mask in 0usize..(1 << all.len()) {
                let mut dsu = Dsu::new(n);
                let mut acyclic = true;
                for (i, &(a, b)) in all.iter().enumerate() {
                    if mask >> i & 1 == 1 && !dsu.union(a, b) {
                        acyclic = false;
                        break;
                    }
                }
                if acyclic {
                    slow += 1;
                }
            }
            assert_eq!(fast, slow, "n={n}");
        }
        assert_eq!(forest_count(1).unwrap(), 1);
        assert_eq!(forest_count(2).unwrap(), 2);
        assert_eq!(forest_count(3).unwrap(), 7);
    }

    #[test]
    fn ursell_small_graphs() {
        let single = SimpleGraph::new(1, vec![]);
        assert_eq!(ursell_connected_sum(&single).unwrap(), BigInt::from(1));
        let k2 = SimpleGraph::complete(2);
        assert_eq!(ursell_connected_sum(&k2).unwrap(), BigInt::from(-1));
        let k3 = SimpleGraph::complete(3);
        assert_eq!(ursell_connected_sum(&k3).unwrap(), BigInt::from(2));
        let disconnected = SimpleGraph::new(3, vec![(0, 1)]);
        assert_eq!(ursell_connected_sum(&disconnected).unwrap(), BigInt::zero());
    }

    #[test]
    fn ursell_routes_agree_small() {
        // exhaustive over all graphs on up to 4 vertices, three routes
        for n in 1..=4usize {
            let all = SimpleGraph::complete(n).edges;
            for mask in 0usize..(1 << all.len()) {
                let edges: Vec<(usize, usize)> = all
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &e)| e)
                    .collect();
                let g = SimpleGraph::new(n, edges);
                let a = ursell_connected_sum(&g).unwrap();
                let b = ursell_via_chromatic(&g).unwrap();
                let c = ursell_direct(&g).unwrap();
                assert_eq!(a, b);
                assert_eq!(a, c);
            }
        }
    }

    #[test]
    fn chromatic_k3() {
        // P(K₃, x) = x³ - 3x² + 2x
        let coeffs = chromatic_polynomial(&SimpleGraph::complete(3)).unwrap();
        let expect: Vec<BigInt> = [0, 2, -3, 1].iter().map(|&c| BigInt::from(c)).collect();
        assert_eq!(coeffs, expect);
    }

    #[test]
    fn sign_alternation_on_connected_graphs() {
        for n in 1..=5usize {
            let all = SimpleGraph::complete(n).edges;
            for mask in 0usize..(1 << all.len()) {
                let edges: Vec<(usize, usize)> = all
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &e)| e)
                    .collect();
                let g = SimpleGraph::new(n, edges);
                if g.is_connected() {
                    let u = ursell_connected_sum(&g).unwrap();
                    let signed = if n % 2 == 1 { u } else { -u };
                    assert!(signed >= BigInt::zero(), "sign alternation failed n={n}");
                }
            }
        }
    }

    #[test]
    fn reduction_formula_cases() {
        // r = 0: disconnected, lhs = 0
        let family = vec![BTreeSet::from([1usize, 2])];
        let (lhs, rhs, ok) = ursell_reduction_check(0, &family).unwrap();
        assert!(ok);
        assert_eq!(lhs, BigInt::zero());
        assert_eq!(rhs, BigInt::zero());
        // p = 1, r = 1
        let family = vec![BTreeSet::from([0usize, 1])];
        let (lhs, _, ok) = ursell_reduction_check(0, &family).unwrap();
        assert!(ok);
        assert_eq!(lhs, BigInt::from(-1));
    }

    #[test]
    fn kappa_values() {
        for (k, expect) in [(1u32, 1u64), (2, 4), (3, 288), (4, 82944)] {
            let cf = kappa_closed_form(k);
            assert!(cf.is_integer());
            assert_eq!(cf.to_integer(), BigInt::from(expect), "closed form k={k}");
            assert_eq!(kappa_recurrence(k), cf, "recurrence k={k}");
        }
        for k in 5..=12u32 {
            assert_eq!(kappa_recurrence(k), kappa_closed_form(k), "k={k}");
        }
    }

    #[test]
    fn kappa_bruteforce_small() {
        assert_eq!(kappa_bruteforce(1).unwrap(), 1);
        assert_eq!(kappa_bruteforce(2).unwrap(), 4);
        assert_eq!(kappa_bruteforce(3).unwrap(), 288);
    }

    #[test]
    fn combident_small_k() {
        for k in 1..=30u32 {
            assert!(combident_check(k), "identity fails at k={k}");
        }
    }

    #[test]
    fn cayley_degree_examples() {
        let c = cayley_degree_count(&[2, 1, 1]).unwrap();
        assert_eq!(c, BigRational::one());
        let c = cayley_degree_count(&[1, 1, 1, 3]).unwrap();
        assert_eq!(c, BigRational::one());
        let c = cayley_degree_count(&[2, 2, 1, 1]).unwrap();
        assert_eq!(c, BigRational::from(BigInt::from(2)));
        assert!(cayley_degree_count(&[1, 1, 1, 1]).is_err());
    }

    #[test]
    fn degree_counts_match_enumeration() {
        for m in 2..=7usize {
            use std::collections::HashMap;
            let mut counts: HashMap<Vec<u64>, u64> = HashMap::new();
            for_each_spanning_tree(m, &mut |edges| {
                let mut deg = vec![0u64; m];
                for &(a, b) in edges {
                    deg[a] += 1;
                    deg[b] += 1;
                }
                *counts.entry(deg).or_insert(0) += 1;
            })
            .unwrap();
            for (deg, count) in counts {
                let formula = cayley_degree_count(&deg).unwrap();
                assert!(formula.is_integer());
                assert_eq!(formula.to_integer(), BigInt::from(count));
            }
        }
    }

    #[test]
    fn sumtreedegree_small() {
        let r2 = sumtreedegree_check(2).unwrap();
        assert_eq!(r2.lhs, BigInt::one());
        assert_eq!(r2.rhs, BigInt::from(8));
        assert!(r2.holds);
        let r3 = sumtreedegree_check(3).unwrap();
        assert_eq!(r3.lhs, BigInt::from(6));
        assert!(r3.holds);
        for m in 4..=7 {
            assert!(sumtreedegree_check(m).unwrap().holds, "m={m}");
        }
    }

    #[test]
    fn size_limits_are_enforced() {
        assert!(matches!(
            for_each_spanning_tree(TREE_VERTEX_CAP + 1, &mut |_| {}),
            Err(CombinatoricsError::SizeLimit { .. })
        ));
        assert!(matches!(
            ursell_connected_sum(&SimpleGraph::complete(URSELL_VERTEX_CAP + 1)),
            Err(CombinatoricsError::SizeLimit { .. })
        ));
        assert!(matches!(
            kappa_bruteforce(PAIRING_K_CAP + 1),
            Err(CombinatoricsError::SizeLimit { .. })
        ));
        assert!(matches!(
            sumtreedegree_check(9),
            Err(CombinatoricsError::SizeLimit { .. })
        ));
    }

    #[test]
    fn suminpoly_cases() {
        let r = suminpoly_check(3, 0, 2.0).unwrap();
        assert_eq!(r.lhs, 1.0);
        assert!(r.holds);
        let r = suminpoly_check(1, 2, 2.0).unwrap();
        assert_eq!(r.lhs, 4.0);
        assert_eq!(r.rhs, 16.0);
        assert!(r.holds);
        for &beta in &[0.5, 2.0] {
            for r_size in 1..=4 {
                for k in 0..=5 {
                    assert!(
                        suminpoly_check(r_size, k, beta).unwrap().holds,
                        "r={r_size} k={k} beta={beta}"
                    );
                }
            }
        }
    }
}
