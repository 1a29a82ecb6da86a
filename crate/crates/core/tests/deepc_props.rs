use amod_core::deepc::{command_from_plan, perturb_forecast};
use amod_core::rng::seeded;
use proptest::prelude::*;

fn plan_and_budget(r: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u32>)> {
    (prop::collection::vec(-2.0f64..8.0, r * r), prop::collection::vec(0u32..10, r)).prop_map(move |(u, extra)| {
        // budgets at least as large as the whole-vehicle moves out of each region
        let e = (0..r)
            .map(|i| {
                let moved: f64 = (0..r).filter(|&j| j != i).map(|j| u[i * r + j].max(0.0).floor()).sum();
                moved as u32 + extra[i]
            })
            .collect();
        (u, e)
    })
}

proptest! {
    #[test]
    fn commands_conserve_vehicles((u, e) in (1usize..6).prop_flat_map(plan_and_budget)) {
        let cmd = command_from_plan(&u, &e).unwrap();
        let r = e.len();
        for i in 0..r {
            let sent: u32 = cmd.u_int[i].iter().sum();
            prop_assert_eq!(sent, e[i]);
            let total: f64 = cmd.theta[i].iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
            prop_assert!(cmd.theta[i].iter().all(|&t| t >= 0.0));
            for j in 0..r {
                prop_assert!(cmd.u_float[i][j] >= 0.0);
                if i != j {
                    prop_assert!(cmd.u_int[i][j] as f64 <= cmd.u_float[i][j]);
                }
            }
        }
    }

    #[test]
    fn oversubscribed_plans_are_rejected(v in 1.0f64..20.0) {
        let u = [0.0, v, 0.0, 0.0];
        let e = [(v.floor() as u32).saturating_sub(1), 0];
        prop_assert!(command_from_plan(&u, &e).is_err());
    }
}

#[test]
fn forecast_noise_is_unbiased_away_from_zero() {
    // far from the clipping boundary the perturbed marginals average to the truth
    let od = vec![vec![40.0, 25.0], vec![30.0, 50.0]];
    let truth = [65.0, 80.0, 70.0, 75.0];
    let sigma2 = 4.0;
    let draws = 100_000;
    let mut rng = seeded(17, 3);
    let mut sum = [0.0; 4];
    for _ in 0..draws {
        let w = perturb_forecast(std::slice::from_ref(&od), sigma2, &mut rng);
        for (s, v) in sum.iter_mut().zip(w) {
            *s += v;
        }
    }
    // each marginal sums two entries, so its variance is 2σ²
    let se = (2.0 * sigma2 / draws as f64).sqrt();
    for (s, t) in sum.iter().zip(truth) {
        let mean = s / draws as f64;
        assert!((mean - t).abs() <= 3.0 * se, "mean {mean} vs {t}");
    }
}
