use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor3};

pub fn relu_forward<T: Real>(input: &Tensor3<T>) -> Tensor3<T> {
    input.map(|v| v.max(T::zero()))
}

/// Passes the gradient where the input was strictly positive; zero at 0.
pub fn relu_backward<T: Real>(input: &Tensor3<T>, grad_out: &Tensor3<T>) -> Result<Tensor3<T>> {
    if !input.same_shape(grad_out) {
        return Err(Error::ShapeMismatch {
            dimension: "relu gradient",
            expected: input.as_slice().len(),
            actual: grad_out.as_slice().len(),
        });
    }
    let (b, c, l) = input.shape();
    let values = input
        .as_slice()
        .iter()
        .zip(grad_out.as_slice())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor3::from_vec(b, c, l, values)
}
