//! Distillation and reconstruction objectives with their output gradients.
//!
//! Both distillation losses sum over the two heads and average over
//! timesteps and batch items.

use crate::error::{Error, Result};
use crate::network::HeadSplit;
use crate::ops::kl_divergence;
use crate::ops::prob::softmax_in_place;
use crate::tensor::{Real, Tensor3};

/// Per-timestep teacher distributions for one clip, stored row-major as
/// `timesteps × classes` (object block first, then scene block).
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherPosterior {
    pub clip_id: String,
    pub timesteps: usize,
    pub classes: usize,
    pub probs: Vec<f32>,
}

impl TeacherPosterior {
    pub fn new(clip_id: impl Into<String>, timesteps: usize, classes: usize, probs: Vec<f32>) -> Result<Self> {
        if probs.len() != timesteps * classes {
            return Err(Error::ShapeMismatch {
                dimension: "teacher probabilities",
                expected: timesteps * classes,
                actual: probs.len(),
            });
        }
        Ok(Self {
            clip_id: clip_id.into(),
            timesteps,
            classes,
            probs,
        })
    }

    pub fn timestep(&self, t: usize) -> &[f32] {
        &self.probs[t * self.classes..(t + 1) * self.classes]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    Kl,
    L2,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kl" => Ok(Self::Kl),
            "l2" => Ok(Self::L2),
            other => Err(Error::InvalidArgument(format!(
                "unknown loss `{other}` (expected kl or l2)"
            ))),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Kl => "kl",
            Self::L2 => "l2",
        })
    }
}

fn check_alignment<T: Real>(output: &Tensor3<T>, teachers: &[TeacherPosterior], split: &HeadSplit) -> Result<()> {
    let (batch, channels, steps) = output.shape();
    if channels != split.total() {
        return Err(Error::ShapeMismatch {
            dimension: "output channels",
            expected: split.total(),
            actual: channels,
        });
    }
    if teachers.len() != batch {
        return Err(Error::ShapeMismatch {
            dimension: "teacher batch",
            expected: batch,
            actual: teachers.len(),
        });
    }
    for t in teachers {
        if t.timesteps != steps {
            return Err(Error::ShapeMismatch {
                dimension: "teacher timesteps",
                expected: steps,
                actual: t.timesteps,
            });
        }
        if t.classes != channels {
            return Err(Error::ShapeMismatch {
                dimension: "teacher classes",
                expected: channels,
                actual: t.classes,
            });
        }
    }
    Ok(())
}

/// Walks every (batch, timestep, head) triple, handing the caller the
/// teacher block, the student logits and a gradient buffer for that head.
fn per_head<T: Real>(
    output: &Tensor3<T>,
    teachers: &[TeacherPosterior],
    split: &HeadSplit,
    mut f: impl FnMut(&[T], &[T], &mut [T]) -> Result<f64>,
) -> Result<(f64, Tensor3<T>)> {
    check_alignment(output, teachers, split)?;
    let (batch, _, steps) = output.shape();
    let mut grad = Tensor3::zeros(batch, split.total(), steps);
    let mut total = 0.0f64;
    let norm = T::from_usize(batch * steps).expect("count fits");
    for (b, teacher) in teachers.iter().enumerate() {
        for t in 0..steps {
            let target = teacher.timestep(t);
            for head in split.heads() {
                let p: Vec<T> = target[head.clone()]
                    .iter()
                    .map(|&v| T::from_f64_lossy(v as f64))
                    .collect();
                let logits: Vec<T> = head.clone().map(|c| output.get(b, c, t)).collect();
                let mut g = vec![T::zero(); head.len()];
                total += f(&p, &logits, &mut g)?;
                for (c, gv) in head.zip(g) {
                    grad.set(b, c, t, gv / norm);
                }
            }
        }
    }
    Ok((total / (batch * steps) as f64, grad))
}

/// `mean_{b,t} sum_heads KL(teacher || softmax(student))` and its gradient
/// with respect to the student logits.
pub fn distill_loss<T: Real>(
    output: &Tensor3<T>,
    teachers: &[TeacherPosterior],
    split: &HeadSplit,
) -> Result<(f64, Tensor3<T>)> {
    per_head(output, teachers, split, |p, logits, g| {
        g.copy_from_slice(logits);
        softmax_in_place(g);
        let kl = kl_divergence(p, g)?.to_f64_lossy();
        for (gj, &pj) in g.iter_mut().zip(p) {
            *gj -= pj;
        }
        Ok(kl)
    })
}

/// Squared error between `softmax(student)` and the teacher, reduced like
/// [`distill_loss`].
pub fn l2_loss<T: Real>(
    output: &Tensor3<T>,
    teachers: &[TeacherPosterior],
    split: &HeadSplit,
) -> Result<(f64, Tensor3<T>)> {
    per_head(output, teachers, split, |p, logits, g| {
        let mut q = logits.to_vec();
        softmax_in_place(&mut q);
        let mut loss = 0.0;
        let mut dot = T::zero();
        for ((gj, &qj), &pj) in g.iter_mut().zip(&q).zip(p) {
            let d = qj - pj;
            loss += d.to_f64_lossy().powi(2);
            *gj = d + d;
            dot += qj * *gj;
        }
        // back through the softmax Jacobian: q ⊙ (d - <q, d>)
        for (gj, &qj) in g.iter_mut().zip(&q) {
            *gj = qj * (*gj - dot);
        }
        Ok(loss)
    })
}

pub fn loss_for<T: Real>(
    kind: LossKind,
    output: &Tensor3<T>,
    teachers: &[TeacherPosterior],
    split: &HeadSplit,
) -> Result<(f64, Tensor3<T>)> {
    match kind {
        LossKind::Kl => distill_loss(output, teachers, split),
        LossKind::L2 => l2_loss(output, teachers, split),
    }
}

/// Mean squared reconstruction error and its gradient.
pub fn mse_loss<T: Real>(output: &Tensor3<T>, target: &Tensor3<T>) -> Result<(f64, Tensor3<T>)> {
    if !output.same_shape(target) {
        return Err(Error::ShapeMismatch {
            dimension: "reconstruction length",
            expected: target.length(),
            actual: output.length(),
        });
    }
    let n = output.as_slice().len();
    if n == 0 {
        return Err(Error::Empty("reconstruction"));
    }
    let scale = T::from_f64_lossy(2.0 / n as f64);
    let mut sum = 0.0f64;
    let mut grad = target.clone();
    for (g, (&y, &x)) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(output.as_slice().iter().zip(target.as_slice()))
    {
        let d = y - x;
        sum += d.to_f64_lossy().powi(2);
        *g = scale * d;
    }
    Ok((sum / n as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::softmax;

    fn toy_split() -> HeadSplit {
        HeadSplit::new(2, 2).unwrap()
    }

    #[test]
    fn matching_student_has_zero_loss() {
        let logits = [0.3f64, -0.2, 1.5, 0.1];
        let mut probs: Vec<f32> = softmax(&logits[..2]).unwrap().iter().map(|&v| v as f32).collect();
        probs.extend(softmax(&logits[2..]).unwrap().iter().map(|&v| v as f32));
        let teacher = TeacherPosterior::new("a", 1, 4, probs).unwrap();
        let out = Tensor3::from_vec(1, 4, 1, logits.to_vec()).unwrap();
        let (loss, grad) = distill_loss(&out, &[teacher.clone()], &toy_split()).unwrap();
        assert!(loss < 1e-7, "{loss}");
        assert!(grad.as_slice().iter().all(|g| g.abs() < 1e-7));
        let (l2, _) = l2_loss(&out, &[teacher], &toy_split()).unwrap();
        assert!(l2 < 1e-12);
    }

    #[test]
    fn two_class_heads_sum_kl() {
        // heads: P=[1,0] vs Q=[.5,.5] gives ln 2; P=[.5,.5] vs Q=[.25,.75]
        let teacher = TeacherPosterior::new("a", 1, 4, vec![1.0, 0.0, 0.5, 0.5]).unwrap();
        let out = Tensor3::from_vec(1, 4, 1, vec![0.0, 0.0, 0.0, 3.0f64.ln()]).unwrap();
        let (loss, _) = distill_loss(&out, &[teacher], &toy_split()).unwrap();
        let expected = 2.0f64.ln() + 0.5 * 2.0f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((loss - expected).abs() < 1e-7, "{loss} vs {expected}");
    }

    #[test]
    fn two_class_l2_by_hand() {
        // head 1: Q=[.5,.5] vs P=[1,0] -> .25+.25; head 2: Q=[.25,.75] vs P=[.5,.5] -> .0625+.0625
        let teacher = TeacherPosterior::new("a", 1, 4, vec![1.0, 0.0, 0.5, 0.5]).unwrap();
        let out = Tensor3::from_vec(1, 4, 1, vec![0.0, 0.0, 0.0, 3.0f64.ln()]).unwrap();
        let (loss, _) = l2_loss(&out, &[teacher], &toy_split()).unwrap();
        assert!((loss - 0.625).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn misaligned_timesteps_rejected() {
        let teacher = TeacherPosterior::new("a", 2, 4, vec![0.25; 8]).unwrap();
        let out = Tensor3::<f32>::zeros(1, 4, 3);
        let err = distill_loss(&out, &[teacher], &toy_split()).unwrap_err();
        assert!(err.to_string().contains("timesteps"));
    }

    #[test]
    fn mse_gradient_points_at_target() {
        let y = Tensor3::from_vec(1, 1, 2, vec![1.0f64, 3.0]).unwrap();
        let x = Tensor3::from_vec(1, 1, 2, vec![0.0f64, 3.0]).unwrap();
        let (loss, g) = mse_loss(&y, &x).unwrap();
        assert_eq!(loss, 0.5);
        assert_eq!(g.as_slice(), &[1.0, 0.0]);
    }
}
