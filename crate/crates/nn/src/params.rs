use crate::error::{NnError, Result};
use crate::tensor::Tensor;

/// A model whose trainable tensors can be enumerated by name in a fixed order.
///
/// Gradients use the model's own type, so `params` of a gradient structure
/// lines up entry-for-entry with `params` of the model.
pub trait Parameterized {
    fn params(&self) -> Vec<(String, &Tensor)>;
    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)>;

    fn num_params(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Copy with every tensor zeroed, for use as a gradient accumulator.
    fn zeros_like(&self) -> Self
    where
        Self: Sized + Clone,
    {
        let mut g = self.clone();
        g.zero();
        g
    }

    fn zero(&mut self) {
        for (_, t) in self.params_mut() {
            t.fill(0.0);
        }
    }

    /// `self += other * scale` over matching tensors.
    fn add_scaled(&mut self, other: &Self, scale: f64) -> Result<()>
    where
        Self: Sized,
    {
        for ((_, a), (_, b)) in self.params_mut().into_iter().zip(other.params()) {
            a.add_scaled(b, scale)?;
        }
        Ok(())
    }

    fn max_abs(&self) -> f64 {
        self.params()
            .iter()
            .flat_map(|(_, t)| t.data().iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn prefixed<'a>(prefix: &str, inner: Vec<(String, &'a Tensor)>) -> impl Iterator<Item = (String, &'a Tensor)> {
    let prefix = prefix.to_string();
    inner.into_iter().map(move |(n, t)| (format!("{prefix}.{n}"), t))
}

pub fn prefixed_mut<'a>(
    prefix: &str,
    inner: Vec<(String, &'a mut Tensor)>,
) -> impl Iterator<Item = (String, &'a mut Tensor)> {
    let prefix = prefix.to_string();
    inner.into_iter().map(move |(n, t)| (format!("{prefix}.{n}"), t))
}

/// Overwrites every parameter of `model` with the same-named tensor from
/// `tensors`. Extra entries are ignored; missing or misshapen ones fail.
pub fn load_params<M: Parameterized + ?Sized>(model: &mut M, tensors: &[(String, Tensor)]) -> Result<()> {
    for (name, target) in model.params_mut() {
        let Some((_, src)) = tensors.iter().find(|(n, _)| *n == name) else {
            return Err(NnError::Checkpoint(format!("missing tensor {name}")));
        };
        if src.shape() != target.shape() {
            return Err(NnError::shape(format!("checkpoint tensor {name}"), target.shape(), src.shape()));
        }
        target.data_mut().copy_from_slice(src.data());
    }
    Ok(())
}
