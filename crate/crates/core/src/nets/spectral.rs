//! Spectral normalization of weight matrices by power iteration.
//!
//! A normalized layer uses `W / sigma(W)` where `sigma = u^T W v` is the
//! power-iteration estimate of the largest singular value. The singular
//! vector estimates persist across updates: training runs one iteration
//! before each update and iterates to convergence at the end of each step.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::linear::Linear;
use super::trunk::{Trunk, TrunkScales};

pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Relative change of `sigma` per iteration below which power iteration
/// counts as converged.
pub const CONVERGED_TOL: f64 = 1e-10;
pub const MAX_CONVERGE_ITERS: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    /// Left singular vector estimate, length = rows.
    pub u: Array1<f64>,
    /// Right singular vector estimate, length = cols.
    pub v: Array1<f64>,
    pub sigma: f64,
    pub degenerate: bool,
    pub epsilon: f64,
}

fn normalize(x: &mut Array1<f64>) -> f64 {
    let n = x.dot(x).sqrt();
    if n > 0.0 {
        *x /= n;
    }
    n
}

fn random_unit<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Array1<f64> {
    loop {
        let mut x = Array1::from_shape_fn(len, |_| StandardNormal.sample(rng));
        if normalize(&mut x) > 0.0 {
            return x;
        }
    }
}

impl SpectralState {
    pub fn new<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        Self {
            u: random_unit(rows, rng),
            v: random_unit(cols, rng),
            sigma: 1.0,
            degenerate: false,
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// Runs `n_iters` steps of `v <- W^T u / |.|`, `u <- W v / |.|` and
    /// re-estimates `sigma = u^T W v`.
    pub fn power_iterate(&mut self, w: &Array2<f64>, n_iters: usize) {
        for _ in 0..n_iters {
            self.v = w.t().dot(&self.u);
            normalize(&mut self.v);
            self.u = w.dot(&self.v);
            normalize(&mut self.u);
        }
        self.update_sigma(w);
    }

    /// Iterates at least `min_iters` times and then until the estimate stops
    /// moving (relative change below [`CONVERGED_TOL`]) or `max_iters` is
    /// reached. Returns the number of iterations run.
    pub fn power_iterate_converged(&mut self, w: &Array2<f64>, min_iters: usize, max_iters: usize) -> usize {
        self.power_iterate(w, min_iters);
        let mut prev = self.sigma;
        for it in min_iters..max_iters {
            self.power_iterate(w, 1);
            if (self.sigma - prev).abs() <= CONVERGED_TOL * self.sigma.abs().max(f64::MIN_POSITIVE) {
                return it + 1;
            }
            prev = self.sigma;
        }
        max_iters.max(min_iters)
    }

    /// Re-estimates `sigma` for the current vectors without iterating.
    pub fn update_sigma(&mut self, w: &Array2<f64>) {
        self.sigma = self.u.dot(&w.dot(&self.v));
        self.degenerate = !(self.sigma >= self.epsilon);
    }

    /// Multiplier applied to the raw weights, `1 / sigma` (or 1 when
    /// degenerate).
    pub fn scale(&self) -> f64 {
        if self.degenerate {
            1.0
        } else {
            1.0 / self.sigma
        }
    }

    /// Converts a gradient w.r.t. the normalized matrix into one w.r.t. the
    /// raw matrix, treating `u` and `v` as constants:
    /// `dW = (G - <G, W/sigma> u v^T) / sigma`.
    pub fn backprop(&self, w_raw: &Array2<f64>, grad: &mut Array2<f64>) {
        if self.degenerate {
            return;
        }
        let inv = 1.0 / self.sigma;
        let inner = (&*grad * w_raw).sum() * inv;
        for ((i, j), g) in grad.indexed_iter_mut() {
            *g = (*g - inner * self.u[i] * self.v[j]) * inv;
        }
    }
}

/// Returns `W / sigma` after `n_iters` power iterations, together with the
/// updated state. A degenerate estimate (`sigma < epsilon`) returns `W`
/// unchanged with `degenerate` set.
pub fn spectral_normalize(w: &Array2<f64>, state: &SpectralState, n_iters: usize) -> (Array2<f64>, SpectralState) {
    let mut next = state.clone();
    next.power_iterate(w, n_iters);
    (w * next.scale(), next)
}

/// Spectral states for every matrix on the critic's scoring path: both
/// convolutions, the dense layer and the critic head. The encoder head is
/// not normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticSpectral {
    pub conv1: SpectralState,
    pub conv2: SpectralState,
    pub dense: SpectralState,
    pub head: SpectralState,
}

impl CriticSpectral {
    /// New states, warmed up with at least `warmup_iters` power iterations
    /// and then to convergence.
    pub fn new<R: Rng + ?Sized>(trunk: &Trunk, head: &Linear, warmup_iters: usize, rng: &mut R) -> Self {
        let mut s = Self {
            conv1: SpectralState::new(trunk.conv1.w.nrows(), trunk.conv1.w.ncols(), rng),
            conv2: SpectralState::new(trunk.conv2.w.nrows(), trunk.conv2.w.ncols(), rng),
            dense: SpectralState::new(trunk.dense.w.nrows(), trunk.dense.w.ncols(), rng),
            head: SpectralState::new(head.w.nrows(), head.w.ncols(), rng),
        };
        s.converge(trunk, head, warmup_iters);
        s
    }

    /// Power-iterates every state to convergence, at least `min_iters` times.
    pub fn converge(&mut self, trunk: &Trunk, head: &Linear, min_iters: usize) {
        let max = MAX_CONVERGE_ITERS.max(min_iters);
        self.conv1.power_iterate_converged(&trunk.conv1.w, min_iters, max);
        self.conv2.power_iterate_converged(&trunk.conv2.w, min_iters, max);
        self.dense.power_iterate_converged(&trunk.dense.w, min_iters, max);
        self.head.power_iterate_converged(&head.w, min_iters, max);
    }

    pub fn refresh(&mut self, trunk: &Trunk, head: &Linear, n_iters: usize) {
        self.conv1.power_iterate(&trunk.conv1.w, n_iters);
        self.conv2.power_iterate(&trunk.conv2.w, n_iters);
        self.dense.power_iterate(&trunk.dense.w, n_iters);
        self.head.power_iterate(&head.w, n_iters);
    }

    pub fn trunk_scales(&self) -> TrunkScales {
        TrunkScales {
            conv1: self.conv1.scale(),
            conv2: self.conv2.scale(),
            dense: self.dense.scale(),
        }
    }

    pub fn head_scale(&self) -> f64 {
        self.head.scale()
    }

    pub fn backprop_trunk(&self, trunk: &Trunk, grad: &mut Trunk) {
        self.conv1.backprop(&trunk.conv1.w, &mut grad.conv1.w);
        self.conv2.backprop(&trunk.conv2.w, &mut grad.conv2.w);
        self.dense.backprop(&trunk.dense.w, &mut grad.dense.w);
    }

    pub fn backprop_head(&self, head: &Linear, grad: &mut Linear) {
        self.head.backprop(&head.w, &mut grad.w);
    }

    pub fn states(&self) -> [(&'static str, &SpectralState); 4] {
        [
            ("conv1", &self.conv1),
            ("conv2", &self.conv2),
            ("dense", &self.dense),
            ("head", &self.head),
        ]
    }

    pub fn states_mut(&mut self) -> [(&'static str, &mut SpectralState); 4] {
        [
            ("conv1", &mut self.conv1),
            ("conv2", &mut self.conv2),
            ("dense", &mut self.dense),
            ("head", &mut self.head),
        ]
    }
}
