/// Named view of one parameter tensor, row-major.
#[derive(Clone, Debug)]
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

impl<'a> TensorRef<'a> {
    pub fn new(name: String, shape: Vec<usize>, data: &'a [f64]) -> Self {
        Self { name, shape, data }
    }
}

/// A collection of parameter tensors in a fixed order.
///
/// `tensors` and `tensors_mut` must enumerate the same tensors in the same
/// order; the optimizer and checkpoint code rely on it.
pub trait ParamSet: Clone + Send + Sync {
    fn tensors(&self) -> Vec<TensorRef<'_>>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// `self += scale · other`, tensor by tensor.
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        let src: Vec<Vec<f64>> = other.tensors().into_iter().map(|t| t.data.to_vec()).collect();
        for (dst, src) in self.tensors_mut().into_iter().zip(&src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Flattened shape signature, used to detect mismatched parameter sets.
    fn layout(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.data.len()).collect()
    }
}
