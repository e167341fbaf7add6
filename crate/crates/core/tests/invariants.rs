use num_complex::Complex64;
use proptest::prelude::*;

use potlab_core::ensemble::indicator_a;
use potlab_core::measures::{Domain, Weight, WeightedProblem};
use potlab_core::orthopoly::{
    gram_matrix, level_measure, orthonormal_basis, BasisOptions, Construction,
};
use potlab_core::partition::{partition_hom_gram, partition_norm_product};
use potlab_core::Precision;

fn segment_problem(a: f64, len: f64, c1: f64, c2: f64, n: usize) -> WeightedProblem {
    WeightedProblem::build(
        Domain::interval(a, a + len).unwrap(),
        Weight::field(vec![0.0, c1, c2]),
        4 * (n + 1),
        false,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn christoffel_integrates_to_dimension(
        a in -2.0f64..1.0, len in 0.2f64..3.0, c1 in -0.5f64..0.5, c2 in 0.0f64..1.0, n in 0usize..9,
    ) {
        let p = segment_problem(a, len, c1, c2, n);
        let b = orthonormal_basis(&p, n, BasisOptions::default()).unwrap();
        let (nodes, weights) = level_measure(&p, n);
        let trace: f64 = nodes.iter().zip(&weights).map(|(&z, &v)| b.christoffel_at(z) * v).sum();
        prop_assert!((trace - (n + 1) as f64).abs() < 1e-9 * (n + 1) as f64, "trace {trace}");
    }

    #[test]
    fn gram_determinant_is_product_of_monic_norms(
        a in -1.0f64..0.5, len in 0.5f64..2.0, c2 in 0.0f64..1.0, n in 1usize..6,
    ) {
        let p = segment_problem(a, len, 0.0, c2, n);
        let g = gram_matrix::<f64>(&p, n).unwrap();
        let b = orthonormal_basis(&p, n, BasisOptions::default()).unwrap();
        let lhs = g.log_det().log_abs;
        let rhs = 2.0 * b.log_monic_norms().iter().sum::<f64>();
        prop_assert!((lhs - rhs).abs() < 1e-7 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn norm_product_and_homogeneous_gram_agree(
        a in -1.0f64..0.5, len in 0.5f64..2.0, c1 in -0.5f64..0.5, c2 in 0.0f64..1.0, n in 1usize..7,
    ) {
        let p = segment_problem(a, len, c1, c2, n);
        let b = orthonormal_basis(&p, n, BasisOptions::cholesky(Precision::Extended)).unwrap();
        let z = partition_norm_product(&b).log_z;
        let h = partition_hom_gram(&p, n, Precision::Extended).unwrap().log_z;
        prop_assert!((z - h).abs() < 1e-8 * (1.0 + z.abs()), "{z} vs {h}");
    }

    #[test]
    fn construction_routes_agree_on_real_nodes(
        a in -1.0f64..0.5, len in 0.5f64..2.0, c2 in 0.0f64..1.0, n in 1usize..8,
    ) {
        let p = segment_problem(a, len, 0.0, c2, n);
        let s = orthonormal_basis(&p, n, BasisOptions { method: Construction::Stieltjes, precision: Precision::Double }).unwrap();
        let c = orthonormal_basis(&p, n, BasisOptions::cholesky(Precision::Extended)).unwrap();
        for (x, y) in s.log_monic_norms().iter().zip(c.log_monic_norms()) {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn deviation_event_grows_with_eta(
        raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..8),
        e1 in 0.01f64..0.45, e2 in 0.01f64..0.45, delta in 0.5f64..1.5,
    ) {
        let pts: Vec<Complex64> = raw.iter().map(|&(x, y)| Complex64::new(x, y)).collect();
        let n = pts.len() - 1;
        let w = Weight::field(vec![0.0, 0.0, 0.3]);
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let inside_lo = indicator_a(&pts, &w, n, lo, delta).unwrap();
        let inside_hi = indicator_a(&pts, &w, n, hi, delta).unwrap();
        prop_assert!(!inside_lo || inside_hi);
    }
}
