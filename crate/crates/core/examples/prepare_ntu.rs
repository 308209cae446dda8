//! Parses NTU `.skeleton` files, drops multi-subject recordings and splits
//! them cross-subject.
//!
//! With no argument a few tiny recordings are fabricated in a temporary
//! directory.
//!
//! ```bash
//! cargo run --release --example prepare_ntu -- /data/nturgb+d_skeletons
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use skelgan::data::{build_split, read_ntu_dir, CrossSubjectProtocol, FilterConfig, N_JOINTS};

fn fake_recording(frames: usize, bodies: usize) -> String {
    let mut s = format!("{frames}\n");
    for f in 0..frames {
        writeln!(s, "{bodies}").unwrap();
        for b in 0..bodies {
            writeln!(s, "7205759403792{b} 0 1 1 1 1 0 0.1 0.2 2").unwrap();
            writeln!(s, "{N_JOINTS}").unwrap();
            for j in 0..N_JOINTS {
                let (x, y, z) = (0.01 * j as f32 + 0.3 * b as f32, 0.04 * j as f32 + 0.002 * f as f32, 3.0);
                writeln!(s, "{x} {y} {z} 250 200 1000 500 0.9 0 0 0 2").unwrap();
            }
        }
    }
    s
}

fn main() -> skelgan::Result<()> {
    let tmp = tempfile::tempdir()?;
    let dir = match std::env::args().nth(1) {
        Some(d) => PathBuf::from(d),
        None => {
            let files = [
                ("S001C001P001R001A001.skeleton", fake_recording(40, 1)),
                ("S001C001P002R001A002.skeleton", fake_recording(55, 1)),
                ("S001C002P003R001A004.skeleton", fake_recording(30, 1)),
                ("S001C001P005R001A050.skeleton", fake_recording(30, 2)),
                ("S001C001P004R001A003.skeleton", fake_recording(60, 1)),
            ];
            for (name, text) in files {
                std::fs::write(tmp.path().join(name), text)?;
            }
            tmp.path().to_path_buf()
        }
    };

    let recordings = read_ntu_dir(&dir)?;
    let (split, stats) = build_split(recordings, Some(&FilterConfig::default()), &CrossSubjectProtocol::ntu())?;
    println!(
        "{} recordings, {} filtered out, {} without tracked frames",
        stats.recordings, stats.filtered_out, stats.empty
    );
    println!("cross-subject split: {} train, {} test", split.train.len(), split.test.len());
    for s in split.train.iter().chain(&split.test) {
        println!("  subject {:>3} class {:?} length {}", s.subject_id, s.label, s.len());
    }
    Ok(())
}
