use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Origin and destination totals of an OD count matrix: row sums followed
/// by column sums.
pub fn od_marginals(od: &[Vec<f64>]) -> Vec<f64> {
    let r = od.len();
    let mut out = vec![0.0; 2 * r];
    for (i, row) in od.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out[i] += v;
            out[r + j] += v;
        }
    }
    out
}

/// Adds i.i.d. `N(0, σ²)` noise to every OD entry and clips at zero.
pub fn perturb_od(od: &[Vec<f64>], sigma2: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    if sigma2 <= 0.0 {
        return od.to_vec();
    }
    let normal = Normal::new(0.0, sigma2.sqrt()).expect("finite positive variance");
    od.iter()
        .map(|row| row.iter().map(|&v| (v + normal.sample(rng)).max(0.0)).collect())
        .collect()
}

/// Noisy disturbance forecast: each horizon step's OD matrix is perturbed
/// and reduced to its marginals, then the steps are concatenated.
pub fn perturb_forecast(w_true: &[Vec<Vec<f64>>], sigma2: f64, rng: &mut impl Rng) -> Vec<f64> {
    w_true
        .iter()
        .flat_map(|od| od_marginals(&perturb_od(od, sigma2, rng)))
        .collect()
}

fn total_variance(history: &[Vec<Vec<f64>>]) -> Result<f64> {
    let t = history.len();
    if t < 2 {
        return Err(Error::TooShort { len: t, needed: 2 });
    }
    let r = history[0].len();
    let mut total = 0.0;
    for i in 0..r {
        for j in 0..history[0][i].len() {
            let mean = history.iter().map(|od| od[i][j]).sum::<f64>() / t as f64;
            let ss: f64 = history.iter().map(|od| (od[i][j] - mean).powi(2)).sum();
            total += ss / (t - 1) as f64;
        }
    }
    Ok(total)
}

/// `10·log10(Σ var(w^{IJ}) / σ²)` with sample variances over time.
pub fn snr_of(history: &[Vec<Vec<f64>>], sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::Undefined("signal-to-noise ratio with zero noise variance".into()));
    }
    Ok(10.0 * (total_variance(history)? / sigma2).log10())
}

/// The noise variance that yields `snr_db` on `history`.
pub fn noise_variance_for_snr(history: &[Vec<Vec<f64>>], snr_db: f64) -> Result<f64> {
    Ok(total_variance(history)? / 10f64.powf(snr_db / 10.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_noise_gives_exact_marginals() {
        let od = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let mut rng = seeded(0, 3);
        assert_eq!(perturb_forecast(&[od.clone(), od], 0.0, &mut rng), vec![3.0, 7.0, 4.0, 6.0, 3.0, 7.0, 4.0, 6.0]);
    }

    #[test]
    fn clipping_keeps_zero_matrices_nonnegative() {
        let mut rng = seeded(1, 3);
        let zeros = vec![vec![0.0; 3]; 3];
        for _ in 0..50 {
            assert!(perturb_forecast(&[zeros.clone()], 4.0, &mut rng).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn replays_the_seeded_draw() {
        let mut clipped = 0;
        for seed in 0..200 {
            for w in [4.0, 0.5] {
                let mut a = seeded(seed, 3);
                let mut b = seeded(seed, 3);
                let draw = Normal::new(0.0, 1.0).unwrap().sample(&mut b);
                let got = perturb_forecast(&[vec![vec![w]]], 1.0, &mut a);
                let expected = (w + draw).max(0.0);
                clipped += usize::from(expected == 0.0);
                assert_eq!(got, vec![expected, expected]);
            }
        }
        assert!(clipped > 0);
    }

    #[test]
    fn snr_examples() {
        // two entries alternating 10 ± a, each with sample variance 4a²/3 = 25
        let hist: Vec<Vec<Vec<f64>>> = (0..4)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                vec![vec![10.0 + s * 75f64.sqrt() / 2.0, 10.0 + s * 75f64.sqrt() / 2.0]]
            })
            .collect();
        let var = total_variance(&hist).unwrap();
        assert!((var - 50.0).abs() < 1e-9);
        assert!((snr_of(&hist, 0.5).unwrap() - 20.0).abs() < 1e-9);
        assert!(snr_of(&hist, var).unwrap().abs() < 1e-12);
        assert!(matches!(snr_of(&hist, 0.0), Err(Error::Undefined(_))));
        let s2 = noise_variance_for_snr(&hist, 15.0).unwrap();
        assert!((snr_of(&hist, s2).unwrap() - 15.0).abs() < 1e-9);
    }
}
