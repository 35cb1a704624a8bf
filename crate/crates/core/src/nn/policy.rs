use rand::Rng;

use crate::error::{Error, Result};
use crate::world::Action;

use super::network::QValues;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    /// Boltzmann exploration, `p(a) ~ exp(Q(a) / temperature)`.
    Softmax { temperature: f64 },
    Argmax,
}

fn check_finite(q: &QValues) -> Result<()> {
    if q.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("Q-values {q:?}")))
    }
}

/// Index of the largest Q-value, lowest index on ties.
pub fn argmax(q: &QValues) -> Result<Action> {
    check_finite(q)?;
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    Action::from_index(best)
}

pub fn softmax(q: &QValues, temperature: f64) -> Result<[f64; Action::COUNT]> {
    check_finite(q)?;
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidConfig(format!("softmax temperature {temperature}")));
    }
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; Action::COUNT];
    let mut total = 0.0;
    for (pi, &v) in p.iter_mut().zip(q) {
        *pi = ((v - max) / temperature).exp();
        total += *pi;
    }
    for pi in &mut p {
        *pi /= total;
    }
    Ok(p)
}

pub fn sample_action<R: Rng + ?Sized>(q: &QValues, policy: Policy, rng: &mut R) -> Result<Action> {
    match policy {
        Policy::Argmax => argmax(q),
        Policy::Softmax { temperature } => {
            let p = softmax(q, temperature)?;
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, &pi) in p.iter().enumerate() {
                acc += pi;
                if u < acc {
                    return Action::from_index(i);
                }
            }
            // u landed in the rounding slack above the last cumulative sum
            Action::from_index(p.iter().rposition(|&pi| pi > 0.0).unwrap_or(0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_q_gives_uniform_distribution() {
        let p = softmax(&[0.7; 6], 0.3).unwrap();
        for v in p {
            assert!((v - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cold_limit_concentrates_on_argmax() {
        let q = [0.1, 0.5, 0.2, 0.49, 0.0, -1.0];
        let p = softmax(&q, 1e-4).unwrap();
        assert!(p[1] > 1.0 - 1e-12);
        assert_eq!(argmax(&q).unwrap(), Action::East);
    }

    #[test]
    fn matches_direct_exponentiation() {
        let q = [1.0, 2.0, 3.0, 0.0, 0.0, 0.0];
        let e: Vec<f64> = q.iter().map(|v: &f64| v.exp()).collect();
        let z: f64 = e.iter().sum();
        let p = softmax(&q, 1.0).unwrap();
        for (a, b) in p.iter().zip(&e) {
            assert!((a - b / z).abs() < 1e-15);
        }
    }

    #[test]
    fn ties_go_to_lowest_index_and_nan_is_rejected() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 0.0, 3.0, 0.0]).unwrap(), Action::East);
        assert!(argmax(&[f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(softmax(&[f64::INFINITY, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn shift_invariance(q in prop::array::uniform6(-50.0f64..50.0), shift in -100.0f64..100.0, t in 0.05f64..5.0) {
            let shifted = q.map(|v| v + shift);
            let (p, ps) = (softmax(&q, t).unwrap(), softmax(&shifted, t).unwrap());
            for (a, b) in p.iter().zip(&ps) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn argmax_shift_invariance(q in prop::array::uniform6(-64i32..64), shift in -1000i32..1000) {
            // integer-valued so the shift is exact and ties are preserved
            let q = q.map(f64::from);
            let shifted = q.map(|v| v + f64::from(shift));
            prop_assert_eq!(argmax(&q).unwrap(), argmax(&shifted).unwrap());
        }
    }
}
