//! Generates variable-length sequences with an (untrained) generator and
//! exports them as JSON lines and skeleton SVGs.
//!
//! ```bash
//! cargo run --release --example generate_sequences -- /tmp/generated
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skelgan::eval::export_sequences;
use skelgan::nets::InfoGan;
use skelgan::training::TrainConfig;

fn main() -> skelgan::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "generated".into());
    let config = TrainConfig::desk(3);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = InfoGan::new(config.model, true, &mut rng);

    let seed = config.seed_prior().sample(&mut rng);
    let g = model.generate(&seed);
    println!(
        "code {} length {} -> {} rows, padding all zero: {}",
        seed.category,
        seed.length,
        g.frames.nrows(),
        g.frames.rows().into_iter().skip(g.length).all(|r| r.iter().all(|&v| v == 0.0))
    );

    let records = export_sequences(&model, &config.seed_prior(), 6, 42, out.as_ref())?;
    for r in &records {
        println!("#{} category {} length {}", r.index, r.category, r.length);
    }
    println!("wrote {out}/sequences.jsonl and one SVG per sequence");
    Ok(())
}
