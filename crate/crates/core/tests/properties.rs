//! Property-based invariants over randomized inputs.

use clusterkit::combinatorics::{
    self, bkar, ursell_connected_sum, ursell_via_chromatic, SimpleGraph,
};
use clusterkit::model::{Coupling, Model, ModelConfig};
use num::complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The connected-subgraph sum always equals the coefficient of x in
    /// the chromatic polynomial.
    #[test]
    fn ursell_routes_agree(n in 1usize..=6, edge_bits in any::<u32>()) {
        let all = SimpleGraph::complete(n).edges;
        let edges: Vec<(usize, usize)> = all
            .iter()
            .enumerate()
            .filter(|(i, _)| edge_bits >> (i % 32) & 1 == 1 || (edge_bits >> i) & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        let g = SimpleGraph::new(n, edges);
        prop_assert_eq!(
            ursell_connected_sum(&g).unwrap(),
            ursell_via_chromatic(&g).unwrap()
        );
    }

    /// Hermitian auto-completion always clears every Hermitian violation.
    #[test]
    fn autocomplete_clears_hermitian_violations(
        re in proptest::collection::vec(-2.0f64..2.0, 1..4),
        im in proptest::collection::vec(-2.0f64..2.0, 1..4),
    ) {
        let mut entries = vec![(vec![0i64], Complex64::new(2.0 + re.len() as f64, 0.0))];
        for (k, (r, i)) in re.iter().zip(im.iter()).enumerate() {
            entries.push((vec![k as i64 + 1], Complex64::new(*r, *i)));
        }
        let mut coupling = Coupling::new(1, entries).unwrap();
        coupling.hermitian_autocomplete();
        let model = Model::new(coupling, 1.0);
        prop_assert!(model
            .validate()
            .iter()
            .all(|v| v.code() != "HERMITIAN_VIOLATION"));
    }

    /// Model configs round-trip bit-exactly through the text format.
    #[test]
    fn config_roundtrip_bit_exact(
        j0 in 0.5f64..100.0,
        j1re in -0.2f64..0.2,
        j1im in -0.2f64..0.2,
        lambda in 1e-6f64..100.0,
    ) {
        let coupling = Coupling::new(
            1,
            vec![
                (vec![0], Complex64::new(j0, 0.0)),
                (vec![1], Complex64::new(j1re, j1im)),
                (vec![-1], Complex64::new(j1re, -j1im)),
            ],
        )
        .unwrap();
        let model = Model::new(coupling, lambda);
        let text = ModelConfig::from_model(&model).to_text();
        let reparsed = ModelConfig::parse(&text).unwrap().into_model().unwrap();
        prop_assert_eq!(model, reparsed);
    }

    /// Interpolation points take values in [0, 1] and never exceed any
    /// h on the connecting path.
    #[test]
    fn bkar_point_respects_min_structure(
        h in proptest::collection::vec(0.0f64..=1.0, 3),
    ) {
        // path forest 0-1-2-3
        let forest = [(0usize, 1usize), (1, 2), (2, 3)];
        let p = bkar::bkar_point(4, &forest, &h);
        for v in &p.values {
            prop_assert!((0.0..=1.0).contains(v));
        }
        // endpoints: s_{03} = min of all three
        let min_all = h.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(p.get(0, 3), min_all);
        prop_assert!(p.get(0, 2) <= h[0].min(h[1]) + 1e-15);
    }

    /// Local multiplicity sums never exceed the closed-form bound.
    #[test]
    fn suminpoly_bound_holds(r in 1usize..=4, k in 0u32..=5, beta_idx in 0usize..2) {
        let beta = [0.5, 2.0][beta_idx];
        let report = combinatorics::suminpoly_check(r, k, beta).unwrap();
        prop_assert!(report.holds);
    }
}
