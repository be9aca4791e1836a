//! Lattice model definition: the volume Λ, the pair potential J and the
//! quartic coupling λ, together with validation of the standing
//! hypotheses (Hermitian symmetry, J(0) > J_≠ > 0, λ > 0) and the derived
//! scalars J(0), J_≠ and the support radius r₀.

use num::complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// A lattice site, an integer vector of length `d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn origin(d: usize) -> Self {
        Site(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Site) -> Site {
        Site(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A finite ordered set of distinct sites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Volume {
    sites: Vec<Site>,
    contains_origin: bool,
}

impl Volume {
    /// Builds a volume from a site list.  Sites must be distinct and of a
    /// common dimension.
    pub fn new(sites: Vec<Site>) -> Result<Self, ModelError> {
        if sites.is_empty() {
            return Err(ModelError::EmptyVolume);
        }
        let d = sites[0].dim();
        let mut seen = std::collections::HashSet::new();
        for s in &sites {
            if s.dim() != d {
                return Err(ModelError::DimensionMismatch);
            }
            if !seen.insert(s.clone()) {
                return Err(ModelError::DuplicateSite(s.clone()));
            }
        }
        let contains_origin = sites.iter().any(|s| s.is_origin());
        Ok(Volume {
            sites,
            contains_origin,
        })
    }

    /// A segment {0, 1, ..., n-1} in d = 1.
    pub fn segment(n: usize) -> Self {
        Volume::new((0..n as i64).map(|i| Site(vec![i])).collect()).unwrap()
    }

    /// A box [0, n₁) × … × [0, n_d).
    pub fn boxed(shape: &[usize]) -> Self {
        let mut sites = vec![vec![]];
        for &n in shape {
            let mut next = Vec::with_capacity(sites.len() * n);
            for prefix in &sites {
                for i in 0..n as i64 {
                    let mut v = prefix.clone();
                    v.push(i);
                    next.push(v);
                }
            }
            sites = next;
        }
        Volume::new(sites.into_iter().map(Site).collect()).unwrap()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains_origin(&self) -> bool {
        self.contains_origin
    }

    pub fn index_of(&self, site: &Site) -> Option<usize> {
        self.sites.iter().position(|s| s == site)
    }

    /// Index of the origin, when present.
    pub fn origin_index(&self) -> Option<usize> {
        self.sites.iter().position(|s| s.is_origin())
    }
}

/// The pair potential J as a finite map offset → complex value.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    entries: BTreeMap<Vec<i64>, Complex64>,
    dimension: usize,
}

impl Coupling {
    pub fn new(dimension: usize, entries: Vec<(Vec<i64>, Complex64)>) -> Result<Self, ModelError> {
        let mut map = BTreeMap::new();
        for (offset, value) in entries {
            if offset.len() != dimension {
                return Err(ModelError::DimensionMismatch);
            }
            if map.insert(offset.clone(), value).is_some() {
                return Err(ModelError::DuplicateOffset(offset));
            }
        }
        Ok(Coupling {
            entries: map,
            dimension,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// J evaluated at an offset; zero outside the stored support.
    pub fn at(&self, offset: &[i64]) -> Complex64 {
        self.entries
            .get(offset)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<i64>, &Complex64)> {
        self.entries.iter()
    }

    /// A copy with every entry multiplied by a real factor.
    pub fn scaled(&self, factor: f64) -> Coupling {
        Coupling {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v * factor))
                .collect(),
            dimension: self.dimension,
        }
    }

    /// Fills in missing mirror entries with the conjugate value.  Entries
    /// already present are left untouched.
    pub fn hermitian_autocomplete(&mut self) {
        let additions: Vec<(Vec<i64>, Complex64)> = self
            .entries
            .iter()
            .filter_map(|(offset, value)| {
                let mirror: Vec<i64> = offset.iter().map(|&c| -c).collect();
                if self.entries.contains_key(&mirror) {
                    None
                } else {
                    Some((mirror, value.conj()))
                }
            })
            .collect();
        for (offset, value) in additions {
            self.entries.insert(offset, value);
        }
    }
}

/// The full model: dimension d, pair potential J and quartic coupling λ.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub coupling: Coupling,
    pub lambda: f64,
}

/// Conjugation marker for a field source: ψ or ψ*.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Conjugation {
    /// ψ(x)
    Plain,
    /// ψ*(x)
    Star,
}

impl Conjugation {
    pub fn flip(self) -> Self {
        match self {
            Conjugation::Plain => Conjugation::Star,
            Conjugation::Star => Conjugation::Plain,
        }
    }
}

/// A list of sources (site, conjugation) entering a correlation function.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceSpec(pub Vec<(Site, Conjugation)>);

impl SourceSpec {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of ψ sources minus number of ψ* sources.
    pub fn charge(&self) -> i64 {
        self.0
            .iter()
            .map(|(_, c)| match c {
                Conjugation::Plain => 1i64,
                Conjugation::Star => -1i64,
            })
            .sum()
    }

    /// All sources lie inside the given volume.
    pub fn contained_in(&self, volume: &Volume) -> bool {
        self.0.iter().all(|(s, _)| volume.index_of(s).is_some())
    }
}

/// A violated standing hypothesis, as data rather than an error.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// λ ≤ 0
    LambdaNotPositive { lambda: f64 },
    /// J(0) missing, not real, or ≤ 0
    JZeroNotPositive { value: Complex64 },
    /// J(x)* ≠ J(−x) for some stored offset (missing mirror counts)
    HermitianViolation { offset: Vec<i64> },
    /// J_≠ = 0 (the hypotheses require 0 < J_≠)
    JNeqZero,
    /// J_≠ ≥ J(0)
    JNeqNotLess { j_neq: f64, j_zero: f64 },
}

impl Violation {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Violation::LambdaNotPositive { .. } => "LAMBDA_NOT_POSITIVE",
            Violation::JZeroNotPositive { .. } => "J_ZERO_NOT_POSITIVE",
            Violation::HermitianViolation { .. } => "HERMITIAN_VIOLATION",
            Violation::JNeqZero => "J_NEQ_ZERO",
            Violation::JNeqNotLess { .. } => "J_NEQ_NOT_LESS",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LambdaNotPositive { lambda } => {
                write!(f, "LAMBDA_NOT_POSITIVE: lambda = {lambda}")
            }
            Violation::JZeroNotPositive { value } => {
                write!(f, "J_ZERO_NOT_POSITIVE: J(0) = {value}")
            }
            Violation::HermitianViolation { offset } => {
                write!(f, "HERMITIAN_VIOLATION at offset {offset:?}")
            }
            Violation::JNeqZero => write!(f, "J_NEQ_ZERO: off-diagonal support is empty"),
            Violation::JNeqNotLess { j_neq, j_zero } => {
                write!(f, "J_NEQ_NOT_LESS: J_neq = {j_neq} >= J(0) = {j_zero}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("volume must be nonempty")]
    EmptyVolume,
    #[error("duplicate site {0} in volume")]
    DuplicateSite(Site),
    #[error("duplicate coupling offset {0:?}")]
    DuplicateOffset(Vec<i64>),
    #[error("offset or site length does not match the model dimension")]
    DimensionMismatch,
    #[error("config error: {0}")]
    Config(String),
    #[error("model violates standing hypotheses: {0:?}")]
    Invalid(Vec<Violation>),
}

impl Model {
    pub fn new(coupling: Coupling, lambda: f64) -> Self {
        Model { coupling, lambda }
    }

    pub fn dimension(&self) -> usize {
        self.coupling.dimension()
    }

    /// J(0), taken as a real number.  Validation rejects non-real J(0).
    pub fn j_zero(&self) -> f64 {
        let d = self.dimension();
        self.coupling.at(&vec![0; d]).re
    }

    /// Checks every standing hypothesis and returns the violations found;
    /// an empty list means the model is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        if !(self.lambda > 0.0) {
            violations.push(Violation::LambdaNotPositive {
                lambda: self.lambda,
            });
        }
        let d = self.dimension();
        let j0 = self.coupling.at(&vec![0; d]);
        if !(j0.im == 0.0 && j0.re > 0.0) {
            violations.push(Violation::JZeroNotPositive { value: j0 });
        }
        for (offset, value) in self.coupling.entries() {
            let mirror: Vec<i64> = offset.iter().map(|&c| -c).collect();
            // report each broken pair once, at its canonical offset
            if self.coupling.at(&mirror) != value.conj() && *offset >= mirror {
                violations.push(Violation::HermitianViolation {
                    offset: offset.clone(),
                });
            }
        }
        let j_neq = self.j_neq();
        if j_neq == 0.0 {
            violations.push(Violation::JNeqZero);
        } else if j0.im == 0.0 && j_neq >= j0.re {
            violations.push(Violation::JNeqNotLess {
                j_neq,
                j_zero: j0.re,
            });
        }
        violations
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub fn validated(self) -> Result<Self, ModelError> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(ModelError::Invalid(violations))
        }
    }

    /// J_≠ = Σ_{x≠0} |J(x)|.
    pub fn j_neq(&self) -> f64 {
        self.coupling
            .entries()
            .filter(|(offset, _)| offset.iter().any(|&c| c != 0))
            .map(|(_, v)| v.norm())
            .sum()
    }

    /// Support radius r₀ = (max Euclidean norm over the support) + 1, so
    /// that J(x) = 0 holds strictly for |x| ≥ r₀.
    pub fn support_radius(&self) -> f64 {
        let max_norm = self
            .coupling
            .entries()
            .filter(|(_, v)| v.norm() > 0.0)
            .map(|(offset, _)| Site(offset.clone()).norm())
            .fold(0.0, f64::max);
        max_norm + 1.0
    }
}

/// On-disk model description.  Floats round-trip bit-exactly: the writer
/// emits 17 significant decimal digits.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dimension: usize,
    pub lambda: f64,
    pub coupling: Vec<CouplingEntry>,
    #[serde(default)]
    pub hermitian_autocomplete: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CouplingEntry {
    pub offset: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

impl ModelConfig {
    pub fn from_model(model: &Model) -> Self {
        ModelConfig {
            dimension: model.dimension(),
            lambda: model.lambda,
            coupling: model
                .coupling
                .entries()
                .map(|(offset, v)| CouplingEntry {
                    offset: offset.clone(),
                    re: v.re,
                    im: v.im,
                })
                .collect(),
            hermitian_autocomplete: false,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Config(e.to_string()))
    }

    pub fn into_model(self) -> Result<Model, ModelError> {
        let mut coupling = Coupling::new(
            self.dimension,
            self.coupling
                .into_iter()
                .map(|e| (e.offset, Complex64::new(e.re, e.im)))
                .collect(),
        )?;
        if self.hermitian_autocomplete {
            coupling.hermitian_autocomplete();
        }
        Ok(Model::new(coupling, self.lambda))
    }

    /// Serializes with floats printed to 17 significant digits.
    pub fn to_text(&self) -> String {
        let entries: Vec<String> = self
            .coupling
            .iter()
            .map(|e| {
                format!(
                    "    {{\"offset\": {:?}, \"re\": {}, \"im\": {}}}",
                    e.offset,
                    format_f64(e.re),
                    format_f64(e.im)
                )
            })
            .collect();
        format!(
            "{{\n  \"dimension\": {},\n  \"lambda\": {},\n  \"coupling\": [\n{}\n  ],\n  \"hermitian_autocomplete\": {}\n}}\n",
            self.dimension,
            format_f64(self.lambda),
            entries.join(",\n"),
            self.hermitian_autocomplete
        )
    }
}

/// Decimal rendering with 17 significant digits; parses back to the same
/// f64 bit pattern.
pub fn format_f64(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{x:.1}")
    } else {
        format!("{x:.16e}")
    }
}

pub fn load_model(path: &std::path::Path) -> Result<Model, ModelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelError::Config(format!("{}: {e}", path.display())))?;
    ModelConfig::parse(&text)?.into_model()
}

/// Nearest-neighbor model in d = 1: J(0) = j0, J(±1) = j1 (real).
pub fn nearest_neighbor_1d(j0: f64, j1: f64, lambda: f64) -> Model {
    let coupling = Coupling::new(
        1,
        vec![
            (vec![0], Complex64::new(j0, 0.0)),
            (vec![1], Complex64::new(j1, 0.0)),
            (vec![-1], Complex64::new(j1, 0.0)),
        ],
    )
    .unwrap();
    Model::new(coupling, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_nearest_neighbor_model() {
        let m = nearest_neighbor_1d(2.0, 0.5, 1.0);
        assert!(m.validate().is_empty());
        assert_eq!(m.j_neq(), 1.0);
        assert_eq!(m.support_radius(), 2.0);
    }

    #[test]
    fn j_neq_not_less_detected() {
        let m = nearest_neighbor_1d(1.0, 0.6, 1.0);
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code(), "J_NEQ_NOT_LESS");
    }

    #[test]
    fn hermitian_violation_detected() {
        let coupling = Coupling::new(
            1,
            vec![
                (vec![0], Complex64::new(2.0, 0.0)),
                (vec![1], Complex64::new(0.0, 1.0)),
                (vec![-1], Complex64::new(0.0, 1.0)),
            ],
        )
        .unwrap();
        let m = Model::new(coupling, 1.0);
        let v = m.validate();
        // the broken pair is reported once, at the canonical offset
        assert_eq!(
            v.iter()
                .filter(|x| x.code() == "HERMITIAN_VIOLATION")
                .count(),
            1
        );
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::HermitianViolation { offset } if offset == &vec![1])));
    }

    #[test]
    fn empty_offdiagonal_flagged() {
        let coupling = Coupling::new(1, vec![(vec![0], Complex64::new(2.0, 0.0))]).unwrap();
        let m = Model::new(coupling, 1.0);
        assert_eq!(m.j_neq(), 0.0);
        assert!(m.validate().iter().any(|x| x.code() == "J_NEQ_ZERO"));
    }

    #[test]
    fn autocomplete_fixes_missing_mirror() {
        let mut coupling = Coupling::new(
            1,
            vec![
                (vec![0], Complex64::new(2.0, 0.0)),
                (vec![1], Complex64::new(0.3, 0.4)),
            ],
        )
        .unwrap();
        coupling.hermitian_autocomplete();
        let m = Model::new(coupling, 1.0);
        assert!(m
            .validate()
            .iter()
            .all(|x| x.code() != "HERMITIAN_VIOLATION"));
        assert_eq!(m.coupling.at(&[-1]), Complex64::new(0.3, -0.4));
    }

    #[test]
    fn support_radius_with_gap() {
        let coupling = Coupling::new(
            1,
            vec![
                (vec![0], Complex64::new(2.0, 0.0)),
                (vec![2], Complex64::new(0.25, 0.0)),
                (vec![-2], Complex64::new(0.25, 0.0)),
            ],
        )
        .unwrap();
        let m = Model::new(coupling, 1.0);
        assert_eq!(m.support_radius(), 3.0);
    }

    #[test]
    fn d2_j_neq() {
        let coupling = Coupling::new(
            2,
            vec![
                (vec![0, 0], Complex64::new(2.0, 0.0)),
                (vec![1, 0], Complex64::new(0.25, 0.0)),
                (vec![-1, 0], Complex64::new(0.25, 0.0)),
                (vec![0, 1], Complex64::new(0.25, 0.0)),
                (vec![0, -1], Complex64::new(0.25, 0.0)),
            ],
        )
        .unwrap();
        let m = Model::new(coupling, 1.0);
        assert_eq!(m.j_neq(), 1.0);
        assert_eq!(m.support_radius(), 2.0);
    }

    #[test]
    fn config_roundtrip_is_bit_exact() {
        let m = nearest_neighbor_1d(2.0, 0.1 + 0.2 / 3.0, 0.7533333333333333);
        let cfg = ModelConfig::from_model(&m);
        let text = cfg.to_text();
        let reparsed = ModelConfig::parse(&text).unwrap().into_model().unwrap();
        assert_eq!(m, reparsed);
    }
}
