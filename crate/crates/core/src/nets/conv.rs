use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::params::{fan_in_uniform, slice1, slice1_mut, slice2, slice2_mut, Params};

/// 1-D convolution along time with zero "same" padding.
///
/// The kernel is stored as an `(out_channels, kernel * in_channels)` matrix
/// whose column `tap * in_channels + c` multiplies input channel `c` at
/// offset `tap - (kernel - 1) / 2`. This is also the matrix view used for
/// spectral normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub kernel: usize,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut R) -> Self {
        let fan_in = in_channels * kernel;
        Self {
            w: fan_in_uniform(out_channels, fan_in, fan_in, rng),
            b: Array1::zeros(out_channels),
            kernel,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.w.ncols() / self.kernel
    }

    pub fn out_channels(&self) -> usize {
        self.w.nrows()
    }

    fn pad(&self) -> usize {
        (self.kernel - 1) / 2
    }

    /// Unfolds `x` of shape `(T, in)` into `(T, kernel * in)` patches.
    pub fn im2col(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let (t_len, c_in) = x.dim();
        debug_assert_eq!(c_in, self.in_channels());
        let pad = self.pad() as isize;
        let mut patches = Array2::zeros((t_len, self.kernel * c_in));
        for t in 0..t_len {
            for tap in 0..self.kernel {
                let src = t as isize + tap as isize - pad;
                if src < 0 || src >= t_len as isize {
                    continue;
                }
                patches
                    .slice_mut(s![t, tap * c_in..(tap + 1) * c_in])
                    .assign(&x.row(src as usize));
            }
        }
        patches
    }

    /// Inverse of [`Conv1d::im2col`] for gradients: sums patch entries back
    /// onto the timesteps they were copied from.
    pub fn col2im(&self, dpatches: ArrayView2<f64>) -> Array2<f64> {
        let t_len = dpatches.nrows();
        let c_in = self.in_channels();
        let pad = self.pad() as isize;
        let mut dx = Array2::zeros((t_len, c_in));
        for t in 0..t_len {
            for tap in 0..self.kernel {
                let dst = t as isize + tap as isize - pad;
                if dst < 0 || dst >= t_len as isize {
                    continue;
                }
                let mut row = dx.row_mut(dst as usize);
                row += &dpatches.slice(s![t, tap * c_in..(tap + 1) * c_in]);
            }
        }
        dx
    }

    /// Pre-activations `scale * patches W^T + b`.
    pub fn apply(&self, patches: &Array2<f64>, scale: f64) -> Array2<f64> {
        let mut out = patches.dot(&self.w.t());
        if scale != 1.0 {
            out *= scale;
        }
        out + &self.b
    }

    /// Accumulates gradients w.r.t. the effective kernel and returns the
    /// patch gradient `scale * dout W` when requested.
    pub fn backward(
        &self,
        patches: &Array2<f64>,
        dout: &Array2<f64>,
        scale: f64,
        grad: Option<&mut Conv1d>,
        want_dpatches: bool,
    ) -> Option<Array2<f64>> {
        if let Some(g) = grad {
            ndarray::linalg::general_mat_mul(1.0, &dout.t(), patches, 1.0, &mut g.w);
            g.b += &dout.sum_axis(Axis(0));
        }
        want_dpatches.then(|| {
            let mut dp = dout.dot(&self.w);
            if scale != 1.0 {
                dp *= scale;
            }
            dp
        })
    }
}

impl Params for Conv1d {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        vec![("w".into(), slice2(&self.w)), ("b".into(), slice1(&self.b))]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![slice2_mut(&mut self.w), slice1_mut(&mut self.b)]
    }
}
