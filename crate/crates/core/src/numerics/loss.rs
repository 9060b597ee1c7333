use crate::{Error, Result};

fn check_finite(logits: &[f64]) -> Result<()> {
    if logits.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("logits".into()))
    }
}

pub(crate) fn log_softmax_unchecked(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    for (o, v) in out.iter_mut().zip(logits) {
        *o = v - lse;
    }
}

pub(crate) fn softmax_unchecked(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, v) in out.iter_mut().zip(logits) {
        *o = (v - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    check_finite(logits)?;
    let mut out = vec![0.0; logits.len()];
    softmax_unchecked(logits, &mut out);
    Ok(out)
}

pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    check_finite(logits)?;
    let mut out = vec![0.0; logits.len()];
    log_softmax_unchecked(logits, &mut out);
    Ok(out)
}

/// `-log softmax(logits)[label]`.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    Ok(-log_softmax(logits)?[label])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let p = softmax(&[2f64.ln(), 0.0]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-12);
        assert!(softmax(&[f64::NAN, 0.0]).is_err());
        assert!(softmax(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        assert!((cross_entropy(&[0.0, 0.0], 0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(cross_entropy(&[40.0, -40.0], 0).unwrap() < 1e-12);
        assert!(cross_entropy(&[40.0, -40.0], 0).unwrap() >= 0.0);
        assert_eq!(
            cross_entropy(&[0.0, 0.0], 2),
            Err(Error::LabelOutOfRange { label: 2, classes: 2 })
        );
    }

    /// Explicit normalisation with compensated (two-sum) accumulation.
    fn oracle_ce(logits: &[f64], label: usize) -> f64 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for v in logits {
            let e = v.exp();
            let t = sum + e;
            comp += if sum.abs() >= e.abs() { (sum - t) + e } else { (e - t) + sum };
            sum = t;
        }
        let total = sum + comp;
        -(logits[label].exp() / total).ln()
    }

    #[test]
    fn cross_entropy_matches_compensated_oracle() {
        let mut rng = Rng::new(4);
        for _ in 0..200 {
            let c = 2 + rng.below(6);
            let logits: Vec<f64> = (0..c).map(|_| 5.0 * rng.normal()).collect();
            let label = rng.below(c);
            let got = cross_entropy(&logits, label).unwrap();
            assert!((got - oracle_ce(&logits, label)).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn softmax_normalised_and_shift_invariant(
            logits in prop::collection::vec(-300.0f64..300.0, 1..12),
            shift in -500.0f64..500.0,
        ) {
            let p = softmax(&logits).unwrap();
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
            let q = softmax(&shifted).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
