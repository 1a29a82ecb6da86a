//! The data-driven controller checked against a known linear system.

mod common;

use amod_core::deepc::{assemble_hankel_set, fundamental_lemma_residual, LtiOracle};
use common::lti::{closed_loop_deviation, lemma_residuals, random_signal, series};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn fundamental_lemma_holds_for_oracle_trajectories() {
    for seed in 0..20 {
        let (clean, corrupted) = lemma_residuals(seed);
        assert!(clean <= 1e-8, "seed {seed}: residual {clean}");
        assert!(corrupted > 1e-3, "seed {seed}: corrupted residual {corrupted}");
    }
}

#[test]
fn zero_trajectory_has_zero_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut sys = LtiOracle::random_positive(4, 2, 2, 2, &mut rng);
    let u = random_signal(&mut rng, 120, 2, 1.0);
    let w = random_signal(&mut rng, 120, 2, 1.0);
    let y = sys.simulate(&u, &w);
    let h = assemble_hankel_set(&series(&u), &series(&w), &series(&y), 3, 2, None).unwrap();
    let zero = series(&vec![vec![0.0; 2]; 5]);
    assert_eq!(fundamental_lemma_residual(&h, &zero, &zero, &zero).unwrap(), 0.0);
}

#[test]
fn closed_loop_matches_model_based_mpc() {
    for seed in [2024, 7, 31, 555, 90210] {
        let worst = closed_loop_deviation(seed);
        assert!(worst <= 1e-4, "seed {seed}: max input deviation {worst}");
    }
}
