//! Rank and linear correlation with percentile-bootstrap intervals.

use enn_core::numerics::Rng;

/// 1-based ranks with ties sharing their average rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Pearson correlation, or `None` when either coordinate is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "paired samples");
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation: Pearson on average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&ranks(x), &ranks(y))
}

/// Linearly interpolated percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of nothing");
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// A point estimate with a bootstrap interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn excludes_zero(&self) -> bool {
        self.lo > 0.0 || self.hi < 0.0
    }
}

/// Percentile bootstrap (5th, 95th) of `stat` over paired points resampled
/// with replacement. Resamples where `stat` is undefined are skipped, and
/// the interval is widened to contain the point estimate.
pub fn bootstrap(
    x: &[f64],
    y: &[f64],
    stat: fn(&[f64], &[f64]) -> Option<f64>,
    resamples: usize,
    rng: &mut Rng,
) -> Option<Interval> {
    let estimate = stat(x, y)?;
    let n = x.len();
    let (mut bx, mut by) = (vec![0.0; n], vec![0.0; n]);
    let mut values: Vec<f64> = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for k in 0..n {
            let i = rng.below(n);
            bx[k] = x[i];
            by[k] = y[i];
        }
        if let Some(v) = stat(&bx, &by) {
            values.push(v);
        }
    }
    if values.is_empty() {
        return Some(Interval {
            estimate,
            lo: estimate,
            hi: estimate,
        });
    }
    values.sort_by(f64::total_cmp);
    Some(Interval {
        estimate,
        lo: percentile(&values, 0.05).min(estimate),
        hi: percentile(&values, 0.95).max(estimate),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    /// Rank of `x[i]` by counting: 1 + #smaller + (#equal - 1) / 2.
    fn brute_rank(x: &[f64], i: usize) -> f64 {
        let less = x.iter().filter(|&&v| v < x[i]).count() as f64;
        let equal = x.iter().filter(|&&v| v == x[i]).count() as f64;
        1.0 + less + (equal - 1.0) / 2.0
    }

    /// Spearman from the textbook definition on brute-force ranks.
    fn brute_spearman(x: &[f64], y: &[f64]) -> f64 {
        let rx: Vec<f64> = (0..x.len()).map(|i| brute_rank(x, i)).collect();
        let ry: Vec<f64> = (0..y.len()).map(|i| brute_rank(y, i)).collect();
        let n = x.len() as f64;
        let m = (n + 1.0) / 2.0;
        let num: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - m) * (b - m)).sum();
        let dx: f64 = rx.iter().map(|a| (a - m).powi(2)).sum();
        let dy: f64 = ry.iter().map(|b| (b - m).powi(2)).sum();
        num / (dx * dy).sqrt()
    }

    #[test]
    fn identical_data_has_unit_correlation() {
        let x = [3.0, 1.0, 4.0, 1.5, 9.0, 2.6];
        assert_eq!(spearman(&x, &x), Some(1.0));
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(spearman(&x, &neg), Some(-1.0));
    }

    #[test]
    fn no_ties_matches_rank_difference_formula() {
        let x = [0.3, 1.2, -0.5, 2.2, 0.9];
        let y = [1.0, 0.4, -2.0, 3.0, 0.5];
        let (rx, ry) = (ranks(&x), ranks(&y));
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        let n = x.len() as f64;
        let formula = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
        assert!((spearman(&x, &y).unwrap() - formula).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_oracle_on_random_datasets() {
        let mut rng = Rng::new(99);
        for case in 0..10 {
            let n = 5 + case * 3;
            // Coarse values force ties in some datasets.
            let coarse = case % 2 == 0;
            let draw = |rng: &mut Rng| if coarse { rng.below(4) as f64 } else { rng.normal() };
            let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
            let y: Vec<f64> = x.iter().map(|v| v + draw(&mut rng)).collect();
            let fast = spearman(&x, &y).unwrap();
            let slow = brute_spearman(&x, &y);
            assert!((fast - slow).abs() < 1e-12, "case {case}: {fast} vs {slow}");
            for i in 0..n {
                assert_eq!(ranks(&x)[i], brute_rank(&x, i));
            }
        }
    }

    #[test]
    fn constant_input_has_no_correlation() {
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]), None);
    }

    #[test]
    fn percentile_interpolates() {
        let v = [0.0, 10.0, 20.0, 30.0, 40.0];
        assert_eq!(percentile(&v, 0.0), 0.0);
        assert_eq!(percentile(&v, 1.0), 40.0);
        assert_eq!(percentile(&v, 0.5), 20.0);
        assert!((percentile(&v, 0.05) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn independent_data_interval_straddles_zero() {
        let mut rng = Rng::new(5);
        let mut straddle = 0;
        let mut small = 0;
        for trial in 0..20 {
            let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
            let mut y = x.clone();
            for i in (1..y.len()).rev() {
                y.swap(i, rng.below(i + 1));
            }
            let mut boot = Rng::new(trial);
            let iv = bootstrap(&x, &y, spearman, 1000, &mut boot).unwrap();
            straddle += !iv.excludes_zero() as usize;
            small += (iv.estimate.abs() < 0.3) as usize;
        }
        assert!(straddle >= 16, "straddled in {straddle} of 20");
        assert!(small >= 14, "|ρ| < 0.3 in {small} of 20");
    }

    #[test]
    fn strong_relation_interval_excludes_zero() {
        let mut rng = Rng::new(8);
        let x: Vec<f64> = (0..30).map(|_| rng.normal()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 0.3 * rng.normal()).collect();
        let iv = bootstrap(&x, &y, spearman, 1000, &mut Rng::new(1)).unwrap();
        assert!(iv.lo > 0.5, "{iv:?}");
    }

    proptest! {
        #[test]
        fn coefficients_are_bounded_and_intervals_contain_estimate(
            pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 4..25),
            seed in 0u64..1000,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            for stat in [spearman as fn(&[f64], &[f64]) -> Option<f64>, pearson] {
                if let Some(iv) = bootstrap(&x, &y, stat, 200, &mut Rng::new(seed)) {
                    prop_assert!((-1.0..=1.0).contains(&iv.estimate));
                    prop_assert!(iv.lo <= iv.estimate && iv.estimate <= iv.hi);
                    prop_assert!(iv.lo >= -1.0 && iv.hi <= 1.0);
                }
            }
        }
    }
}
