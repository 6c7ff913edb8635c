use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// Handle to one parameter tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named parameter tensors together with their gradient accumulators.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    grads: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let id = ParamId(self.values.len());
        self.names.push(name.into());
        self.grads.push(Tensor::zeros(value.shape()));
        self.values.push(value);
        id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub(crate) fn value_and_grad_mut(&mut self, id: ParamId) -> (&Tensor, &mut Tensor) {
        (&self.values[id.0], &mut self.grads[id.0])
    }

    pub(crate) fn values_and_grads_mut(&mut self) -> impl Iterator<Item = (&mut Tensor, &Tensor)> {
        self.values.iter_mut().zip(self.grads.iter())
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.fill(0.0);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| g.data())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales all gradients so their global L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm.is_finite() && norm > max_norm && norm > 0.0 {
            let scale = max_norm / norm;
            for g in &mut self.grads {
                g.data_mut().iter_mut().for_each(|x| *x *= scale);
            }
        }
        norm
    }

    /// Copies parameter values from a store with an identical manifest.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        self.check_same_manifest(other)?;
        for (dst, src) in self.values.iter_mut().zip(&other.values) {
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }

    pub fn check_same_manifest(&self, other: &ParamStore) -> Result<()> {
        if self.names != other.names {
            return Err(TensorError::Shape(format!(
                "parameter manifests differ: {:?} vs {:?}",
                self.names, other.names
            )));
        }
        for (i, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            if a.shape() != b.shape() {
                return Err(TensorError::Shape(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    self.names[i],
                    b.shape(),
                    a.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn num_values(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }
}
