use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use super::params::{fan_in_uniform, slice1, slice1_mut, slice2, slice2_mut, Params};

/// Affine map `y = scale * W x + b`, with `W` of shape `(out, in)`.
///
/// `scale` carries the inverse spectral norm when the layer sits on a
/// normalized path; plain layers pass `1.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            w: fan_in_uniform(output, input, input, rng),
            b: Array1::zeros(output),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            w: Array2::zeros((output, input)),
            b: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn forward(&self, x: ArrayView1<f64>, scale: f64) -> Array1<f64> {
        let mut y = self.w.dot(&x);
        if scale != 1.0 {
            y *= scale;
        }
        y + &self.b
    }

    /// Accumulates gradients w.r.t. the effective weights `scale * W` and
    /// returns the input gradient.
    pub fn backward(
        &self,
        x: ArrayView1<f64>,
        dy: ArrayView1<f64>,
        scale: f64,
        grad: Option<&mut Linear>,
    ) -> Array1<f64> {
        if let Some(g) = grad {
            for (mut row, &d) in g.w.rows_mut().into_iter().zip(dy.iter()) {
                if d != 0.0 {
                    row.scaled_add(d, &x);
                }
            }
            g.b += &dy;
        }
        let mut dx = self.w.t().dot(&dy);
        if scale != 1.0 {
            dx *= scale;
        }
        dx
    }
}

impl Params for Linear {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        vec![("w".into(), slice2(&self.w)), ("b".into(), slice1(&self.b))]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![slice2_mut(&mut self.w), slice1_mut(&mut self.b)]
    }
}
