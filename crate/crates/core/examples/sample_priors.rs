//! Draws latent seeds: categorical code, uniform noise and sequence length.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skelgan::priors::{salient_entropy, LengthPrior};
use skelgan::training::TrainConfig;

fn main() {
    let config = TrainConfig::default();
    let prior = config.seed_prior();
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    for seed in prior.sample_n(&mut rng, 3) {
        println!(
            "category {:>2}/{} length {:>3} noise[..4] {:.3?}",
            seed.category,
            seed.n_categories,
            seed.length,
            &seed.noise[..4]
        );
    }

    let lengths: Vec<usize> = (0..10_000).map(|_| prior.length.sample(&mut rng)).collect();
    let mean = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
    println!(
        "default lengths: mean {mean:.1}, min {}, max {}",
        lengths.iter().min().unwrap(),
        lengths.iter().max().unwrap()
    );
    let desk = LengthPrior::desk();
    println!("desk prior maps B=0.5 to {} frames", desk.length_for(0.5));
    println!("entropy of the code prior: {:.4} nats", salient_entropy(prior.latent.n_categories));
}
