//! Autoregressive recurrent generator.
//!
//! Each step consumes the previous output frame together with the global
//! noise and salient code, `y_t = softsign(W_o GRU([y_{t-1}, z, c], h_{t-1}) + b_o)`,
//! starting from `y_0 = 0` and `h_0 = 0`. Frames after the seed's length are
//! zero; since later steps cannot influence earlier frames the unroll stops
//! at the seed length.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::gru::{GruCell, GruStep};
use super::linear::Linear;
use super::params::{prefixed, Params};
use super::{softsign, softsign_grad};
use crate::priors::LatentSeed;

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub cell: GruCell,
    pub out: Linear,
}

/// A generated sequence padded to the generator's maximum length.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSequence {
    /// `(max_len, frame_dim)`; rows at and after `length` are exactly zero.
    pub frames: Array2<f64>,
    pub length: usize,
}

impl GeneratedSequence {
    pub fn active(&self) -> ArrayView2<'_, f64> {
        self.frames.slice(s![..self.length, ..])
    }

    /// Binary time mask, 1 for `t < length`.
    pub fn mask(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.frames.nrows(), |t| if t < self.length { 1.0 } else { 0.0 })
    }
}

/// Per-step activations of one unrolled sequence.
#[derive(Debug, Clone)]
pub struct GeneratorTrace {
    pub steps: Vec<GruStep>,
    pub pre_outputs: Vec<Array1<f64>>,
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(frame_dim: usize, noise_dim: usize, n_categories: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            cell: GruCell::new(frame_dim + noise_dim + n_categories, hidden, rng),
            out: Linear::new(hidden, frame_dim, rng),
        }
    }

    pub fn frame_dim(&self) -> usize {
        self.out.output_dim()
    }

    pub fn hidden(&self) -> usize {
        self.cell.hidden()
    }

    /// One autoregressive step, returning `(y_t, h_t)`.
    pub fn gru_step(
        &self,
        y_prev: ArrayView1<f64>,
        z: ArrayView1<f64>,
        c: ArrayView1<f64>,
        h_prev: &Array1<f64>,
    ) -> (Array1<f64>, Array1<f64>) {
        let (y, step, _) = self.step_traced(y_prev, z, c, h_prev);
        (y, step.h)
    }

    fn step_traced(
        &self,
        y_prev: ArrayView1<f64>,
        z: ArrayView1<f64>,
        c: ArrayView1<f64>,
        h_prev: &Array1<f64>,
    ) -> (Array1<f64>, GruStep, Array1<f64>) {
        let x = concatenate(Axis(0), &[y_prev, z, c]).expect("1-d concat");
        assert_eq!(x.len(), self.cell.input_dim(), "generator input size mismatch");
        let step = self.cell.step(x, h_prev);
        let o = self.out.forward(step.h.view(), 1.0);
        let y = o.mapv(softsign);
        (y, step, o)
    }

    /// Unrolls the first `seed.length` steps, recording activations.
    /// Returns the `(length, frame_dim)` active frames.
    pub fn generate_traced(&self, seed: &LatentSeed) -> (Array2<f64>, GeneratorTrace) {
        let z = Array1::from(seed.noise.clone());
        let c = Array1::from(seed.one_hot());
        let mut frames = Array2::zeros((seed.length, self.frame_dim()));
        let mut y = Array1::zeros(self.frame_dim());
        let mut h = Array1::zeros(self.hidden());
        let mut trace = GeneratorTrace {
            steps: Vec::with_capacity(seed.length),
            pre_outputs: Vec::with_capacity(seed.length),
        };
        for t in 0..seed.length {
            let (y_t, step, o) = self.step_traced(y.view(), z.view(), c.view(), &h);
            frames.row_mut(t).assign(&y_t);
            h = step.h.clone();
            y = y_t;
            trace.steps.push(step);
            trace.pre_outputs.push(o);
        }
        (frames, trace)
    }

    /// Generates a masked sequence padded to `max_len` frames.
    pub fn generate(&self, seed: &LatentSeed, max_len: usize) -> GeneratedSequence {
        assert!(seed.length <= max_len, "seed length exceeds the generator horizon");
        let (active, _) = self.generate_traced(seed);
        let mut frames = Array2::zeros((max_len, self.frame_dim()));
        frames.slice_mut(s![..seed.length, ..]).assign(&active);
        GeneratedSequence {
            frames,
            length: seed.length,
        }
    }

    /// Backpropagation through time for a gradient on the active frames.
    pub fn backward(&self, trace: &GeneratorTrace, dframes: ArrayView2<f64>, grad: &mut Generator) {
        let len = trace.steps.len();
        assert_eq!(dframes.nrows(), len);
        let fd = self.frame_dim();
        let mut carry_y = Array1::<f64>::zeros(fd);
        let mut dh_next = Array1::<f64>::zeros(self.hidden());
        let mut das = vec![Array1::zeros(0); len];
        for t in (0..len).rev() {
            let step = &trace.steps[t];
            let dy = &dframes.row(t) + &carry_y;
            let d_o = &dy * &trace.pre_outputs[t].mapv(softsign_grad);
            let dh = self.out.backward(step.h.view(), d_o.view(), 1.0, Some(&mut grad.out)) + &dh_next;
            let (da, dx, dh_prev) = self.cell.backward_step(step, dh.view());
            das[t] = da;
            carry_y = dx.slice(s![..fd]).to_owned();
            dh_next = dh_prev;
        }
        self.cell.accumulate(&mut grad.cell, &trace.steps, &das);
    }
}

impl Params for Generator {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut v = prefixed("cell", self.cell.tensors());
        v.extend(prefixed("out", self.out.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.cell.tensors_mut();
        v.extend(self.out.tensors_mut());
        v
    }
}
