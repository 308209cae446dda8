//! Convolutional feature trunk shared by the critic and the encoder.
//!
//! `conv -> tanh -> conv -> tanh -> max over time -> dense -> tanh`.
//!
//! Inputs are the unmasked prefix of a sequence, shape `(length, channels)`.
//! Padding beyond a sequence's length never reaches the trunk, so appending
//! masked frames cannot change the features.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::conv::Conv1d;
use super::linear::Linear;
use super::params::{prefixed, Params};

#[derive(Debug, Clone, PartialEq)]
pub struct Trunk {
    pub conv1: Conv1d,
    pub conv2: Conv1d,
    pub dense: Linear,
}

/// Per-layer weight multipliers (inverse spectral norms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrunkScales {
    pub conv1: f64,
    pub conv2: f64,
    pub dense: f64,
}

impl TrunkScales {
    pub const IDENTITY: TrunkScales = TrunkScales {
        conv1: 1.0,
        conv2: 1.0,
        dense: 1.0,
    };
}

/// Forward activations kept for backpropagation.
#[derive(Debug, Clone)]
pub struct TrunkCache {
    pub p1: Array2<f64>,
    pub h1: Array2<f64>,
    pub p2: Array2<f64>,
    pub h2: Array2<f64>,
    /// Timestep holding each channel's maximum (first on ties).
    pub argmax: Vec<usize>,
    pub pooled: Array1<f64>,
    pub features: Array1<f64>,
}

impl Trunk {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        filters: usize,
        kernel: usize,
        dense_units: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            conv1: Conv1d::new(in_channels, filters, kernel, rng),
            conv2: Conv1d::new(filters, filters, kernel, rng),
            dense: Linear::new(filters, dense_units, rng),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.dense.output_dim()
    }

    pub fn forward(&self, x: ArrayView2<f64>, s: &TrunkScales) -> TrunkCache {
        assert!(x.nrows() >= 1, "trunk input needs at least one timestep");
        let p1 = self.conv1.im2col(x);
        let h1 = self.conv1.apply(&p1, s.conv1).mapv_into(f64::tanh);
        let p2 = self.conv2.im2col(h1.view());
        let h2 = self.conv2.apply(&p2, s.conv2).mapv_into(f64::tanh);

        let channels = h2.ncols();
        let mut argmax = vec![0usize; channels];
        let mut pooled = h2.row(0).to_owned();
        for (t, row) in h2.outer_iter().enumerate().skip(1) {
            for c in 0..channels {
                if row[c] > pooled[c] {
                    pooled[c] = row[c];
                    argmax[c] = t;
                }
            }
        }
        let features = self.dense.forward(pooled.view(), s.dense).mapv_into(f64::tanh);
        TrunkCache {
            p1,
            h1,
            p2,
            h2,
            argmax,
            pooled,
            features,
        }
    }

    pub fn features(&self, x: ArrayView2<f64>, s: &TrunkScales) -> Array1<f64> {
        self.forward(x, s).features
    }

    /// Backpropagates a feature gradient.
    ///
    /// Parameter gradients (w.r.t. the effective, scaled weights) are added
    /// to `grad` when given; the input gradient is returned when `want_dx`.
    pub fn backward(
        &self,
        cache: &TrunkCache,
        dfeatures: ArrayView1<f64>,
        s: &TrunkScales,
        mut grad: Option<&mut Trunk>,
        want_dx: bool,
    ) -> Option<Array2<f64>> {
        let da3 = &dfeatures * &cache.features.mapv(|f| 1.0 - f * f);
        let dpooled = self
            .dense
            .backward(cache.pooled.view(), da3.view(), s.dense, grad.as_deref_mut().map(|g| &mut g.dense));

        let mut da2 = Array2::zeros(cache.h2.dim());
        for (c, &t) in cache.argmax.iter().enumerate() {
            let h = cache.h2[[t, c]];
            da2[[t, c]] = dpooled[c] * (1.0 - h * h);
        }
        let dp2 = self
            .conv2
            .backward(&cache.p2, &da2, s.conv2, grad.as_deref_mut().map(|g| &mut g.conv2), true)
            .expect("requested");
        let dh1 = self.conv2.col2im(dp2.view());
        let da1 = dh1 * &cache.h1.mapv(|h| 1.0 - h * h);
        let dp1 = self
            .conv1
            .backward(&cache.p1, &da1, s.conv1, grad.map(|g| &mut g.conv1), want_dx);
        dp1.map(|dp| self.conv1.col2im(dp.view()))
    }

    /// Directional derivative of the parameter gradient.
    ///
    /// For a fixed feature cotangent `dfeatures` (constant in the input),
    /// returns `d/de [grad_params <dfeatures, features(x + e * direction)>]`
    /// at `e = 0`, i.e. the mixed second derivative applied to `direction`,
    /// plus the feature tangent `d features / de`. This is the
    /// forward-over-reverse product needed to differentiate a gradient norm
    /// penalty w.r.t. the parameters.
    pub fn param_grad_tangent(
        &self,
        cache: &TrunkCache,
        dfeatures: ArrayView1<f64>,
        direction: ArrayView2<f64>,
        s: &TrunkScales,
    ) -> (Trunk, Array1<f64>) {
        let one_minus_sq = |a: &Array2<f64>| a.mapv(|h| 1.0 - h * h);
        let g1 = one_minus_sq(&cache.h1);
        let g2 = one_minus_sq(&cache.h2);

        // Forward tangents.
        let tp1 = self.conv1.im2col(direction);
        let mut th1 = tp1.dot(&self.conv1.w.t()) * s.conv1;
        th1 *= &g1;
        let tp2 = self.conv2.im2col(th1.view());
        let mut th2 = tp2.dot(&self.conv2.w.t()) * s.conv2;
        th2 *= &g2;
        let tpooled = Array1::from_iter(cache.argmax.iter().enumerate().map(|(c, &t)| th2[[t, c]]));
        let feat_gate = cache.features.mapv(|f| 1.0 - f * f);
        let tfeatures = self.dense.w.dot(&tpooled) * s.dense * &feat_gate;

        // Reverse pass and its tangent.
        let da3 = &dfeatures * &feat_gate;
        let tda3 = &dfeatures * &(&cache.features * &tfeatures) * -2.0;

        let mut out = self.zeroed();
        for ((mut row, &d), &td) in out.dense.w.rows_mut().into_iter().zip(da3.iter()).zip(tda3.iter()) {
            row.scaled_add(td, &cache.pooled);
            row.scaled_add(d, &tpooled);
        }
        out.dense.b.assign(&tda3);

        let dpooled = self.dense.w.t().dot(&da3) * s.dense;
        let tdpooled = self.dense.w.t().dot(&tda3) * s.dense;

        let mut da2 = Array2::zeros(cache.h2.dim());
        let mut tda2 = Array2::zeros(cache.h2.dim());
        for (c, &t) in cache.argmax.iter().enumerate() {
            let h = cache.h2[[t, c]];
            da2[[t, c]] = dpooled[c] * (1.0 - h * h);
            tda2[[t, c]] = tdpooled[c] * (1.0 - h * h) - 2.0 * dpooled[c] * h * th2[[t, c]];
        }
        out.conv2.w = tda2.t().dot(&cache.p2) + da2.t().dot(&tp2);
        out.conv2.b = tda2.sum_axis(Axis(0));

        let dh1 = self.conv2.col2im((da2.dot(&self.conv2.w) * s.conv2).view());
        let tdh1 = self.conv2.col2im((tda2.dot(&self.conv2.w) * s.conv2).view());
        let da1 = &dh1 * &g1;
        let tda1 = &tdh1 * &g1 - &(&dh1 * &cache.h1 * &th1 * 2.0);
        out.conv1.w = tda1.t().dot(&cache.p1) + da1.t().dot(&tp1);
        out.conv1.b = tda1.sum_axis(Axis(0));

        (out, tfeatures)
    }
}

impl Params for Trunk {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut v = prefixed("conv1", self.conv1.tensors());
        v.extend(prefixed("conv2", self.conv2.tensors()));
        v.extend(prefixed("dense", self.dense.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.conv1.tensors_mut();
        v.extend(self.conv2.tensors_mut());
        v.extend(self.dense.tensors_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> Trunk {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        Trunk::new(3, 4, 3, 5, &mut rng)
    }

    #[test]
    fn output_dim_independent_of_length() {
        let trunk = toy();
        for t in [1, 2, 9, 40] {
            let x = Array2::from_elem((t, 3), 0.3);
            assert_eq!(trunk.features(x.view(), &TrunkScales::IDENTITY).len(), 5);
        }
    }

    #[test]
    fn zero_input_zero_bias_gives_zero() {
        let trunk = toy();
        let x = Array2::zeros((6, 3));
        let f = trunk.features(x.view(), &TrunkScales::IDENTITY);
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pooled_value_is_channel_max() {
        let trunk = toy();
        let mut x = Array2::from_elem((8, 3), 0.01);
        x.row_mut(5).fill(4.0);
        let cache = trunk.forward(x.view(), &TrunkScales::IDENTITY);
        for c in 0..4 {
            let col_max = cache.h2.column(c).fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            assert_eq!(cache.pooled[c], col_max);
            assert_eq!(cache.h2[[cache.argmax[c], c]], col_max);
        }
    }

    #[test]
    fn param_grad_tangent_matches_difference_of_gradients() {
        let trunk = toy();
        let x = Array2::from_shape_fn((4, 3), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin());
        let dir = Array2::from_shape_fn((4, 3), |(i, j)| ((i + 2 * j) as f64 * 0.91).cos());
        let df = Array1::from(vec![0.4, -1.1, 0.7, 0.2, -0.5]);
        let s = TrunkScales {
            conv1: 0.8,
            conv2: 1.3,
            dense: 0.6,
        };
        let grad_at = |e: f64| {
            let xe = &x + &(&dir * e);
            let cache = trunk.forward(xe.view(), &s);
            let mut g = trunk.zeroed();
            trunk.backward(&cache, df.view(), &s, Some(&mut g), false);
            (g, cache.features)
        };
        let cache = trunk.forward(x.view(), &s);
        let (tangent, tfeat) = trunk.param_grad_tangent(&cache, df.view(), dir.view(), &s);
        let eps = 1e-6;
        let (gp, fp) = grad_at(eps);
        let (gm, fm) = grad_at(-eps);
        for ((_, a), ((_, p), (_, m))) in tangent.tensors().iter().zip(gp.tensors().iter().zip(gm.tensors().iter())) {
            for ((a, p), m) in a.iter().zip(p.iter()).zip(m.iter()) {
                let fd = (p - m) / (2.0 * eps);
                assert!((a - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{a} vs {fd}");
            }
        }
        for ((t, p), m) in tfeat.iter().zip(fp.iter()).zip(fm.iter()) {
            assert!((t - (p - m) / (2.0 * eps)).abs() < 1e-7);
        }
    }
}
