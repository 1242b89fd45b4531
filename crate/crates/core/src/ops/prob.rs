//! Softmax and KL divergence on plain probability vectors.

use crate::error::{Error, Result};
use crate::tensor::Real;

/// Floor applied to the approximating distribution before the log.
pub const KL_FLOOR: f64 = 1e-8;

/// Max-subtracted softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Result<Vec<T>> {
    if logits.is_empty() {
        return Err(Error::Empty("softmax logits"));
    }
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

pub(crate) fn softmax_in_place<T: Real>(v: &mut [T]) {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x = *x / sum;
    }
}

fn check_lengths(p: usize, q: usize) -> Result<()> {
    if p != q {
        return Err(Error::ShapeMismatch {
            dimension: "distribution length",
            expected: p,
            actual: q,
        });
    }
    Ok(())
}

/// `sum_j P_j ln(P_j / max(Q_j, floor))`; terms with `P_j == 0` contribute nothing.
pub fn kl_divergence_with_floor<T: Real>(p: &[T], q: &[T], floor: f64) -> Result<T> {
    check_lengths(p.len(), q.len())?;
    let floor = T::from_f64_lossy(floor);
    let mut acc = T::zero();
    for (&pj, &qj) in p.iter().zip(q) {
        if pj > T::zero() {
            acc += pj * (pj.ln() - qj.max(floor).ln());
        }
    }
    // rounding can leave a tiny negative when P == Q
    Ok(acc.max(T::zero()))
}

pub fn kl_divergence<T: Real>(p: &[T], q: &[T]) -> Result<T> {
    kl_divergence_with_floor(p, q, KL_FLOOR)
}

/// Gradient of `KL(P || softmax(logits))` with respect to the logits:
/// `softmax(logits) - P`.
pub fn kl_softmax_gradient<T: Real>(p: &[T], logits: &[T]) -> Result<Vec<T>> {
    check_lengths(p.len(), logits.len())?;
    let mut q = softmax(logits)?;
    for (qj, &pj) in q.iter_mut().zip(p) {
        *qj -= pj;
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax(&[0.0f64, 0.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(softmax(&[1000.0f64, 1000.0]).unwrap(), vec![0.5, 0.5]);
        let s = softmax(&[0.0f64, 3.0f64.ln()]).unwrap();
        assert!((s[0] - 0.25).abs() < 1e-15 && (s[1] - 0.75).abs() < 1e-15);
        assert!(softmax::<f64>(&[]).is_err());
    }

    #[test]
    fn kl_cases() {
        let p = [0.3f64, 0.7];
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let v = kl_divergence(&[1.0f64, 0.0], &[0.5, 0.5]).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        let v = kl_divergence(&[0.5f64, 0.5], &[0.25, 0.75]).unwrap();
        let expected = 0.5 * 2.0f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.1438).abs() < 1e-4);
        assert!(kl_divergence(&[1.0f64], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn zero_q_is_floored() {
        let v = kl_divergence(&[1.0f64, 0.0], &[0.0, 1.0]).unwrap();
        assert!(v.is_finite());
        assert!((v + KL_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn gradient_cases() {
        let g = kl_softmax_gradient(&[1.0f64, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(g, vec![-0.5, 0.5]);
        let logits = [0.2f64, -1.0, 0.7];
        let p = softmax(&logits).unwrap();
        let g = kl_softmax_gradient(&p, &logits).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }
}
