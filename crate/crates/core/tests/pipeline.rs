use brlab_core::correlations::{eval_quantum_model, normalize_psd, psd_to_quantum_model, quantum_model_to_psd};
use brlab_core::decomp::{contract_matrix, contract_psd, contract_psd_exhaustive, Decomposition};
use brlab_core::families::{w_eps_psd, w_state};
use brlab_core::linalg::re;
use brlab_core::random::{random_psd, random_separable};
use brlab_core::tree::{normalize_separable_tree, trace_balance_deviation};
use brlab_core::wsc::{cyclic_action, make_cycle, make_line, make_simplex, symmetric_action};
use brlab_core::GroupAction;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn family_through_model_and_file() {
    let dec = normalize_psd(&w_eps_psd(4, 1e-2).unwrap()).unwrap();
    let model = psd_to_quantum_model(&dec).unwrap();
    assert!(model.report().unwrap().valid);
    let p = eval_quantum_model(&model).unwrap();
    assert!((p.sum().re - 1.0).abs() < 1e-12);

    let text = serde_json::to_string(&Decomposition::Psd(quantum_model_to_psd(&model).unwrap())).unwrap();
    let Decomposition::Psd(back) = serde_json::from_str(&text).unwrap() else { panic!("kind changed") };
    assert!(contract_psd(&back).unwrap().max_abs_diff(&p).unwrap() < 1e-12);

    let target = w_state(4).unwrap().scale(re(0.25));
    let rel = p.distance(&target).unwrap() / target.frobenius_norm();
    assert!(rel < 0.05, "relative distance {rel}");
}

fn action(kind: u8, n: usize) -> GroupAction {
    match kind % 3 {
        0 => symmetric_action(&make_simplex(n).unwrap()).unwrap(),
        1 => cyclic_action(&make_cycle(n).unwrap()).unwrap(),
        _ => GroupAction::trivial(&make_cycle(n).unwrap()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn psd_contractions_agree(seed in any::<u64>(), kind in 0u8..3, n in 3usize..5, r in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dec = random_psd(&action(kind, n), r, 2, &mut rng).unwrap();
        let fast = contract_psd(&dec).unwrap();
        let slow = contract_psd_exhaustive(&dec).unwrap();
        prop_assert!(fast.max_abs_diff(&slow).unwrap() <= 1e-10 * slow.max_abs().max(1.0));
        prop_assert!(fast.is_nonnegative(1e-10 * slow.max_abs().max(1.0)));
    }

    #[test]
    fn separable_tree_normalization_is_a_gauge(seed in any::<u64>(), n in 2usize..6, r in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dec = random_separable(&GroupAction::trivial(&make_line(n).unwrap()), r, 2, &mut rng).unwrap();
        let (norm, _) = normalize_separable_tree(&dec).unwrap();
        let before = contract_matrix(&dec).unwrap().matrix;
        let after = contract_matrix(&norm).unwrap().matrix;
        prop_assert!(after.max_abs_diff(&before) <= 1e-10 * before.max_abs().max(1.0));
        prop_assert!(trace_balance_deviation(&norm, None).unwrap() <= 1e-10);
    }
}
