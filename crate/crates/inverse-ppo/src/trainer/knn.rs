//! k-nearest-neighbor differential entropy estimation (Kozachenko-Leonenko
//! family), used as a training diagnostic.

use statrs::function::gamma::{digamma, ln_gamma};

/// Distance floor guarding duplicate points.
const DISTANCE_FLOOR: f64 = 1e-12;

/// Estimate the differential entropy (nats) of `samples` in `R^m` from mean
/// log distances to each point's k-th nearest neighbor:
///
/// `H = psi(N) - psi(k) + ln V_m + (m/N) * sum_i ln eps_i`
///
/// with `V_m` the unit-ball volume and `psi` the digamma bias correction.
/// Deterministic given the samples.
pub fn knn_entropy_estimate(samples: &[Vec<f64>], k: usize) -> f64 {
    let n = samples.len();
    assert!(k >= 1, "k must be at least 1");
    assert!(n > k, "need more samples than k");
    let m = samples[0].len();
    assert!(m >= 1, "dimension must be at least 1");
    assert!(
        samples.iter().all(|s| s.len() == m),
        "samples must share one dimension"
    );

    let mean_log_dist = if m == 1 {
        mean_log_knn_distance_1d(samples, k)
    } else {
        mean_log_knn_distance(samples, k)
    };

    let ln_unit_ball =
        (m as f64 / 2.0) * std::f64::consts::PI.ln() - ln_gamma(m as f64 / 2.0 + 1.0);
    digamma(n as f64) - digamma(k as f64) + ln_unit_ball + (m as f64) * mean_log_dist
}

/// Sorted sweep for the 1D case: the k-th nearest neighbor lies within the
/// k positions on either side, found by a two-pointer merge.
fn mean_log_knn_distance_1d(samples: &[Vec<f64>], k: usize) -> f64 {
    let mut xs: Vec<f64> = samples.iter().map(|s| s[0]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    let mut total = 0.0;
    for i in 0..n {
        let (mut left, mut right) = (i, i + 1);
        let mut kth = 0.0;
        for _ in 0..k {
            let dl = if left > 0 { xs[i] - xs[left - 1] } else { f64::INFINITY };
            let dr = if right < n { xs[right] - xs[i] } else { f64::INFINITY };
            if dl <= dr {
                kth = dl;
                left -= 1;
            } else {
                kth = dr;
                right += 1;
            }
        }
        total += kth.max(DISTANCE_FLOOR).ln();
    }
    total / n as f64
}

fn mean_log_knn_distance(samples: &[Vec<f64>], k: usize) -> f64 {
    let n = samples.len();
    let mut total = 0.0;
    let mut nearest = vec![f64::INFINITY; k];
    for i in 0..n {
        nearest.fill(f64::INFINITY);
        for j in 0..n {
            if i == j {
                continue;
            }
            let d2: f64 = samples[i]
                .iter()
                .zip(&samples[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            // Insertion into the running k smallest.
            if d2 < nearest[k - 1] {
                let mut pos = k - 1;
                while pos > 0 && nearest[pos - 1] > d2 {
                    nearest[pos] = nearest[pos - 1];
                    pos -= 1;
                }
                nearest[pos] = d2;
            }
        }
        total += nearest[k - 1].sqrt().max(DISTANCE_FLOOR).ln();
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn uniform_unit_interval_is_near_zero_nats() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let samples: Vec<Vec<f64>> = (0..10_000).map(|_| vec![rng.gen::<f64>()]).collect();
        let h = knn_entropy_estimate(&samples, 3);
        assert!(h.abs() <= 0.05, "estimate {h}");
    }

    #[test]
    fn standard_normal_matches_analytic_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let samples: Vec<Vec<f64>> = (0..10_000)
            .map(|_| vec![rng.sample::<f64, _>(StandardNormal)])
            .collect();
        let h = knn_entropy_estimate(&samples, 3);
        let analytic = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((h - analytic).abs() <= 0.05, "estimate {h} vs {analytic}");
    }

    #[test]
    fn scaling_shifts_by_dimension_times_log_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        let samples: Vec<Vec<f64>> = (0..2_000)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let scaled: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| s.iter().map(|v| v * 2.5).collect())
            .collect();
        let h = knn_entropy_estimate(&samples, 4);
        let hs = knn_entropy_estimate(&scaled, 4);
        let expected_shift = 2.0 * 2.5f64.ln();
        assert!(
            (hs - h - expected_shift).abs() < 1e-6,
            "shift {} vs {expected_shift}",
            hs - h
        );
    }

    #[test]
    fn duplicate_points_hit_the_distance_floor_without_panicking() {
        let mut samples: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        samples.push(vec![25.0]);
        samples.push(vec![25.0]);
        let h = knn_entropy_estimate(&samples, 1);
        assert!(h.is_finite());
    }

    #[test]
    fn one_dimensional_fast_path_matches_generic_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let samples: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.gen::<f64>() * 4.0]).collect();
        let fast = mean_log_knn_distance_1d(&samples, 3);
        let slow = mean_log_knn_distance(&samples, 3);
        assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
    }
}
