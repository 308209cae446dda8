//! Builds the synthetic stick-figure dataset, masks labels and writes the
//! canonical dataset file.
//!
//! ```bash
//! cargo run --release --example prepare_synthetic -- /tmp/synth.bin
//! ```

use skelgan::data::{mask_labels, read_dataset, write_dataset, SynthSpec};

fn main() -> skelgan::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synthetic_dataset.bin".into());

    let split = SynthSpec::desk(7).build();
    let split = mask_labels(split, 0.1, 7)?;
    write_dataset(&out, &split)?;

    let back = read_dataset(&out)?;
    println!("{out}: {} train ({} labeled), {} test", back.train.len(), back.labeled_count(), back.test.len());
    let lengths: Vec<usize> = back.train.iter().take(8).map(|s| s.len()).collect();
    println!("first lengths: {lengths:?}");
    Ok(())
}
