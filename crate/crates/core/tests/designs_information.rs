use nalgebra::DMatrix;
use proptest::prelude::*;

use nbdesign::designs::{classify, incidence_matrices, BlockProfile, Design};
use nbdesign::information::{
    bound_gap, c_values, closed_form_cnbd, info_total_exact, info_total_upper, info_total_upper_from_joint,
    EffectModel,
};
use nbdesign::matrixkit::{is_psd_exact, pinv_sym, projector, projector_f64, RatMatrix, SymMatrix};
use nbdesign::rational::{int, Rational};

fn design_strategy() -> impl Strategy<Value = Design> {
    (2usize..=5, 1usize..=4, 2usize..=5).prop_flat_map(|(t, b, k)| {
        prop::collection::vec(prop::collection::vec(1..=t, k), b)
            .prop_map(move |layout| Design::new(t, layout).unwrap())
    })
}

fn relabeled(d: &Design) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    let labels: Vec<usize> = (1..=d.t()).collect();
    let blocks: Vec<usize> = (0..d.b()).collect();
    (Just(labels).prop_shuffle(), Just(blocks).prop_shuffle())
}

fn fixture(name: &str) -> Design {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    nbdesign::parse_design(&std::fs::read_to_string(path).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn classification_ignores_labels_and_block_order(
        (d, (perm, order)) in design_strategy().prop_flat_map(|d| { let s = relabeled(&d); (Just(d), s) })
    ) {
        let moved = d.relabel(&perm).unwrap().permute_blocks(&order).unwrap();
        prop_assert_eq!(classify(&d), classify(&moved));
    }

    #[test]
    fn incidence_matrices_are_circular(d in design_strategy()) {
        let inc = incidence_matrices(&d);
        prop_assert!(inc.rows_are_indicators());
        prop_assert!(inc.circularity_holds());
    }

    #[test]
    fn upper_bound_dominates_exact(d in design_strategy(), two_sided in any::<bool>()) {
        let m = if two_sided { EffectModel::M2 } else { EffectModel::M1 };
        let gap = bound_gap(&d, m).unwrap();
        prop_assert!(gap.is_symmetric());
        prop_assert!(is_psd_exact(&gap));
    }

    #[test]
    fn both_bound_routes_agree(d in design_strategy(), two_sided in any::<bool>()) {
        let m = if two_sided { EffectModel::M2 } else { EffectModel::M1 };
        let formula = info_total_upper(&d, m, false).remove(0);
        let projected = info_total_upper_from_joint(&d, m);
        prop_assert_eq!(formula.matrix, projected.matrix);
    }

    #[test]
    fn block_values_sum_to_bound_trace(d in design_strategy(), two_sided in any::<bool>()) {
        let m = if two_sided { EffectModel::M2 } else { EffectModel::M1 };
        let total: Rational = d
            .blocks()
            .iter()
            .map(|row| c_values(&BlockProfile::from_sequence(row, d.t()), m))
            .fold(int(0), |acc, c| acc + c);
        prop_assert_eq!(total, info_total_upper(&d, m, false)[0].trace());
        let per_block: Rational = info_total_upper(&d, m, true).iter().map(|x| x.trace()).fold(int(0), |a, c| a + c);
        prop_assert_eq!(per_block, info_total_upper(&d, m, false)[0].trace());
    }

    #[test]
    fn exact_information_annihilates_ones(d in design_strategy()) {
        let info = info_total_exact(&d, EffectModel::M1).unwrap();
        prop_assert!(info.annihilates_ones());
        prop_assert!(info.matrix.is_symmetric());
    }

    #[test]
    fn penrose_identities(n in 1usize..=12, r in 1usize..=12, seed in prop::collection::vec(-3i32..=3, 144)) {
        let x = DMatrix::from_fn(n, r.min(n), |i, j| f64::from(seed[i * 12 + j]));
        let a = &x * x.transpose();
        let g = pinv_sym(&SymMatrix::float(a.clone()).unwrap()).to_f64();
        let scale = 1.0 + a.amax() * g.amax();
        let tol = 1e-9 * scale;
        prop_assert!((&a * &g * &a - &a).amax() <= tol * (1.0 + a.amax()));
        prop_assert!((&g * &a * &g - &g).amax() <= tol * (1.0 + g.amax()));
        let ag = &a * &g;
        let ga = &g * &a;
        prop_assert!((&ag - ag.transpose()).amax() <= tol);
        prop_assert!((&ga - ga.transpose()).amax() <= tol);
    }

    #[test]
    fn projector_ignores_column_scaling_and_order(
        entries in prop::collection::vec(-2i64..=2, 12),
        scales in prop::collection::vec(prop_oneof![-3i64..=-1, 1i64..=3], 3),
        order in Just(vec![0usize, 1, 2]).prop_shuffle(),
    ) {
        let rows: Vec<Vec<i64>> = entries.chunks(3).map(|c| c.to_vec()).collect();
        let a = RatMatrix::from_i64_rows(&rows);
        let moved = RatMatrix::from_fn(4, 3, |i, j| &a[(i, order[j])] * int(scales[j]));
        let p = projector(&a).to_f64();
        let q = projector(&moved).to_f64();
        prop_assert!((&p - &q).amax() < 1e-12);
        let pf = projector_f64(&a.to_f64()).to_f64();
        prop_assert!((&p - &pf).amax() < 1e-9);
    }
}

#[test]
fn closed_form_on_all_cnbd_fixtures() {
    for (name, models) in [
        ("cnbd2_t5.design", &[EffectModel::M1, EffectModel::M2][..]),
        ("cnbd2_t4.design", &[EffectModel::M1][..]),
        ("cnbd_t5_k4.design", &[EffectModel::M1, EffectModel::M2][..]),
    ] {
        let d = fixture(name);
        assert!(classify(&d).is_cnbd, "{name}");
        for &m in models {
            let exact = info_total_exact(&d, m).unwrap();
            let closed = closed_form_cnbd(d.t(), d.b(), d.k(), m).unwrap();
            assert_eq!(exact.matrix, closed.matrix, "{name} {m}");
        }
    }
}

#[test]
fn block_size_four_fixture_is_cnbd2() {
    let r = classify(&fixture("cnbd_t5_k4.design"));
    assert!(r.is_cnbd2 && r.ell == Some(int(1)));
}

#[test]
fn self_neighbor_fixture_has_strict_gap() {
    let d = fixture("self_neighbor_t5.design");
    for m in [EffectModel::M1, EffectModel::M2] {
        let gap = bound_gap(&d, m).unwrap();
        assert!(!gap.is_zero(), "{m}");
        assert!(is_psd_exact(&gap), "{m}");
    }
}
