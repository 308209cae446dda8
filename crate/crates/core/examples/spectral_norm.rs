//! Power iteration estimates the largest singular value; dividing by it
//! gives a weight matrix with unit spectral norm.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use skelgan::nets::{SpectralState, MAX_CONVERGE_ITERS};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = Array2::from_shape_fn((64, 64), |_| StandardNormal.sample(&mut rng));
    let mut state = SpectralState::new(64, 64, &mut rng);

    for iters in [1, 5, 20] {
        state.power_iterate(&w, iters);
        println!("after {iters:>2} more iterations: sigma ~ {:.6}", state.sigma);
    }
    let used = state.power_iterate_converged(&w, 1, MAX_CONVERGE_ITERS);
    println!("converged after {used} iterations: sigma ~ {:.6}", state.sigma);

    let normalized = &w * state.scale();
    let mut v = Array2::from_elem((64, 1), 1.0);
    for _ in 0..500 {
        let next = normalized.t().dot(&normalized.dot(&v));
        let n = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = next / n;
    }
    let norm = normalized.dot(&v).iter().map(|x| x * x).sum::<f64>().sqrt();
    println!("independent check of the normalized matrix: {norm:.6}");
}
