use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use super::params::{fan_in_uniform, slice1, slice1_mut, slice2, slice2_mut, Params};
use super::sigmoid;

/// Gated recurrent cell.
///
/// Row blocks of `w`, `u` and `b` are ordered `[update | reset | candidate]`:
///
/// ```text
/// z  = sigmoid(Wz x + Uz h + bz)
/// r  = sigmoid(Wr x + Ur h + br)
/// n  = tanh(Wn x + Un (r * h) + bn)
/// h' = (1 - z) * n + z * h
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub w: Array2<f64>,
    pub u: Array2<f64>,
    pub b: Array1<f64>,
}

/// Activations of one step, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct GruStep {
    pub x: Array1<f64>,
    pub h_prev: Array1<f64>,
    pub z: Array1<f64>,
    pub r: Array1<f64>,
    pub n: Array1<f64>,
    pub h: Array1<f64>,
}

impl GruCell {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            w: fan_in_uniform(3 * hidden, input, input, rng),
            u: fan_in_uniform(3 * hidden, hidden, hidden, rng),
            b: Array1::zeros(3 * hidden),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Array2::zeros((3 * hidden, input)),
            u: Array2::zeros((3 * hidden, hidden)),
            b: Array1::zeros(3 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn step(&self, x: Array1<f64>, h_prev: &Array1<f64>) -> GruStep {
        let hd = self.hidden();
        let gx = self.w.dot(&x) + &self.b;
        let gh = self.u.slice(s![..2 * hd, ..]).dot(h_prev);
        let z = (&gx.slice(s![..hd]) + &gh.slice(s![..hd])).mapv(sigmoid);
        let r = (&gx.slice(s![hd..2 * hd]) + &gh.slice(s![hd..])).mapv(sigmoid);
        let rh = &r * h_prev;
        let n = (&gx.slice(s![2 * hd..]) + &self.u.slice(s![2 * hd.., ..]).dot(&rh)).mapv(f64::tanh);
        let h = &n + &(&z * &(h_prev - &n));
        GruStep {
            x,
            h_prev: h_prev.clone(),
            z,
            r,
            n,
            h,
        }
    }

    /// Backpropagates `dh` through one step.
    ///
    /// Returns the gate pre-activation gradient (consumed later by
    /// [`GruCell::accumulate`]), the input gradient and the gradient w.r.t.
    /// the previous hidden state.
    pub fn backward_step(&self, step: &GruStep, dh: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
        let hd = self.hidden();
        let dn = &dh * &step.z.mapv(|z| 1.0 - z);
        let dz = &dh * &(&step.h_prev - &step.n);
        let mut dh_prev = &dh * &step.z;

        let mut da = Array1::zeros(3 * hd);
        {
            let da_n = &dn * &step.n.mapv(|n| 1.0 - n * n);
            let drh = self.u.slice(s![2 * hd.., ..]).t().dot(&da_n);
            let dr = &drh * &step.h_prev;
            dh_prev += &(&drh * &step.r);
            let da_z = &dz * &step.z.mapv(|z| z * (1.0 - z));
            let da_r = &dr * &step.r.mapv(|r| r * (1.0 - r));
            da.slice_mut(s![..hd]).assign(&da_z);
            da.slice_mut(s![hd..2 * hd]).assign(&da_r);
            da.slice_mut(s![2 * hd..]).assign(&da_n);
        }
        dh_prev += &self.u.slice(s![..2 * hd, ..]).t().dot(&da.slice(s![..2 * hd]));
        let dx = self.w.t().dot(&da);
        (da, dx, dh_prev)
    }

    /// Adds the parameter gradients of a whole unrolled sequence.
    pub fn accumulate(&self, grad: &mut GruCell, steps: &[GruStep], das: &[Array1<f64>]) {
        assert_eq!(steps.len(), das.len());
        if steps.is_empty() {
            return;
        }
        let hd = self.hidden();
        let t_len = steps.len();
        let mut da = Array2::zeros((t_len, 3 * hd));
        let mut xs = Array2::zeros((t_len, self.input_dim()));
        let mut hp = Array2::zeros((t_len, hd));
        let mut rh = Array2::zeros((t_len, hd));
        for (t, (step, d)) in steps.iter().zip(das).enumerate() {
            da.row_mut(t).assign(d);
            xs.row_mut(t).assign(&step.x);
            hp.row_mut(t).assign(&step.h_prev);
            rh.row_mut(t).assign(&(&step.r * &step.h_prev));
        }
        ndarray::linalg::general_mat_mul(1.0, &da.t(), &xs, 1.0, &mut grad.w);
        let da_zr = da.slice(s![.., ..2 * hd]);
        let da_n = da.slice(s![.., 2 * hd..]);
        let mut gu_zr = grad.u.slice_mut(s![..2 * hd, ..]);
        ndarray::linalg::general_mat_mul(1.0, &da_zr.t(), &hp, 1.0, &mut gu_zr);
        let mut gu_n = grad.u.slice_mut(s![2 * hd.., ..]);
        ndarray::linalg::general_mat_mul(1.0, &da_n.t(), &rh, 1.0, &mut gu_n);
        grad.b += &da.sum_axis(Axis(0));
    }
}

impl Params for GruCell {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        vec![
            ("w".into(), slice2(&self.w)),
            ("u".into(), slice2(&self.u)),
            ("b".into(), slice1(&self.b)),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            slice2_mut(&mut self.w),
            slice2_mut(&mut self.u),
            slice1_mut(&mut self.b),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_halve_hidden_state() {
        let cell = GruCell::zeros(5, 4);
        let h = Array1::from(vec![1.0, -2.0, 0.5, 4.0]);
        let step = cell.step(Array1::ones(5), &h);
        assert_eq!(step.h, &h * 0.5);
    }

    #[test]
    fn step_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cell = GruCell::new(3, 2, &mut rng);
        let x = Array1::from(vec![0.3, -0.7, 1.1]);
        let h = Array1::from(vec![0.2, -0.4]);
        let probe = Array1::from(vec![1.3, -0.6]);
        let loss = |c: &GruCell, x: &Array1<f64>, h: &Array1<f64>| c.step(x.clone(), h).h.dot(&probe);

        let step = cell.step(x.clone(), &h);
        let (da, dx, dh) = cell.backward_step(&step, probe.view());
        let mut grad = GruCell::zeros(3, 2);
        cell.accumulate(&mut grad, &[step], &[da]);

        let eps = 1e-6;
        for i in 0..3 {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += eps;
            xm[i] -= eps;
            let fd = (loss(&cell, &xp, &h) - loss(&cell, &xm, &h)) / (2.0 * eps);
            assert!((fd - dx[i]).abs() < 1e-8);
        }
        for i in 0..2 {
            let (mut hp, mut hm) = (h.clone(), h.clone());
            hp[i] += eps;
            hm[i] -= eps;
            let fd = (loss(&cell, &x, &hp) - loss(&cell, &x, &hm)) / (2.0 * eps);
            assert!((fd - dh[i]).abs() < 1e-8);
        }
        let analytic: Vec<f64> = grad.tensors().into_iter().flat_map(|(_, t)| t.to_vec()).collect();
        let mut k = 0;
        for ti in 0..3 {
            for j in 0..cell.tensors()[ti].1.len() {
                let mut p = cell.clone();
                p.tensors_mut()[ti][j] += eps;
                let mut m = cell.clone();
                m.tensors_mut()[ti][j] -= eps;
                let fd = (loss(&p, &x, &h) - loss(&m, &x, &h)) / (2.0 * eps);
                assert!((fd - analytic[k]).abs() < 1e-8, "tensor {ti} idx {j}");
                k += 1;
            }
        }
    }
}
