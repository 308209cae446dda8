//! Canonical dataset file.
//!
//! Little-endian binary layout:
//!
//! ```text
//! u8        format version (= 1)
//! [u8; 4]   magic "SKDS"
//! f64       label fraction
//! u32       train count
//! u32       test count
//! records, train first then test:
//!   u16         T (frames)
//!   i16         label, -1 when unknown
//!   u32         subject id
//!   u8          labeled flag (0 / 1)
//!   T*25*3 f32  coordinates, frame-major, then joint, then x y z
//! ```
//!
//! Coordinates are stored as the in-memory `f32` values, so a write/read
//! round trip is bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array3;

use super::{DatasetSplit, SkeletonSequence, N_JOINTS};
use crate::{Error, Result};

pub const FORMAT_VERSION: u8 = 1;
const MAGIC: &[u8; 4] = b"SKDS";

fn write_sequence<W: Write>(w: &mut W, s: &SkeletonSequence) -> Result<()> {
    let t = u16::try_from(s.len()).map_err(|_| Error::Data(format!("sequence too long: {}", s.len())))?;
    let label: i16 = match s.label {
        Some(l) => i16::try_from(l).map_err(|_| Error::Data(format!("label {l} out of range")))?,
        None => -1,
    };
    w.write_all(&t.to_le_bytes())?;
    w.write_all(&label.to_le_bytes())?;
    w.write_all(&s.subject_id.to_le_bytes())?;
    w.write_all(&[u8::from(s.labeled)])?;
    for v in s.frames.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Data(format!("truncated dataset file: {e}")))?;
    Ok(buf)
}

fn read_sequence<R: Read>(r: &mut R) -> Result<SkeletonSequence> {
    let t = u16::from_le_bytes(read_exact(r)?) as usize;
    let label = i16::from_le_bytes(read_exact(r)?);
    let subject_id = u32::from_le_bytes(read_exact(r)?);
    let labeled = match read_exact::<1, _>(r)?[0] {
        0 => false,
        1 => true,
        v => return Err(Error::Data(format!("invalid labeled flag {v}"))),
    };
    let mut bytes = vec![0u8; t * N_JOINTS * 3 * 4];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::Data(format!("truncated dataset record: {e}")))?;
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite coordinate in dataset file".into()));
    }
    let frames = Array3::from_shape_vec((t, N_JOINTS, 3), values).expect("sized buffer");
    Ok(SkeletonSequence {
        frames,
        label: (label >= 0).then_some(label as usize),
        subject_id,
        labeled,
    })
}

pub fn write_split<W: Write>(w: &mut W, split: &DatasetSplit) -> Result<()> {
    w.write_all(&[FORMAT_VERSION])?;
    w.write_all(MAGIC)?;
    w.write_all(&split.label_fraction.to_le_bytes())?;
    let count = |n: usize| u32::try_from(n).map_err(|_| Error::Data("too many sequences".into()));
    w.write_all(&count(split.train.len())?.to_le_bytes())?;
    w.write_all(&count(split.test.len())?.to_le_bytes())?;
    for s in split.train.iter().chain(&split.test) {
        write_sequence(w, s)?;
    }
    Ok(())
}

pub fn read_split<R: Read>(r: &mut R) -> Result<DatasetSplit> {
    let version = read_exact::<1, _>(r)?[0];
    if version != FORMAT_VERSION {
        return Err(Error::Data(format!("unsupported dataset format version {version}")));
    }
    if &read_exact::<4, _>(r)? != MAGIC {
        return Err(Error::Data("not a dataset file (bad magic)".into()));
    }
    let label_fraction = f64::from_le_bytes(read_exact(r)?);
    let n_train = u32::from_le_bytes(read_exact(r)?) as usize;
    let n_test = u32::from_le_bytes(read_exact(r)?) as usize;
    let train = (0..n_train).map(|_| read_sequence(r)).collect::<Result<_>>()?;
    let test = (0..n_test).map(|_| read_sequence(r)).collect::<Result<_>>()?;
    Ok(DatasetSplit {
        train,
        test,
        label_fraction,
    })
}

pub fn write_dataset(path: impl AsRef<Path>, split: &DatasetSplit) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_split(&mut w, split)?;
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<DatasetSplit> {
    read_split(&mut BufReader::new(File::open(path)?))
}
