//! Versioned binary checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! [u8; 4]  magic "SKCK"
//! u32      format version (= 1)
//! u32 + .. TOML of the training config (length-prefixed UTF-8)
//! u32      entry count (a `kind` entry names the payload: infogan, cnn, rnn)
//! entries: u16 + ..  name (length-prefixed UTF-8)
//!          u8        kind (0 = f64, 1 = u64, 2 = bytes)
//!          u64       element count
//!          ..        elements
//! ```
//!
//! Entries cover every parameter tensor, the spectral-norm vectors, the
//! optimizer moments, the sampler orders, the RNG position and the step
//! counter. Floats are stored as their bit patterns, so a save/load round
//! trip restores the state exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::optim::Adam;
use super::step::TrainState;
use crate::data::EpochSampler;
use crate::nets::{InfoGan, Params};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"SKCK";

#[derive(Debug, Clone, PartialEq)]
enum Entry {
    F64(Vec<f64>),
    U64(Vec<u64>),
    Bytes(Vec<u8>),
}

/// Named entries of a checkpoint.
#[derive(Debug, Clone, Default, PartialEq)]
struct Archive {
    entries: BTreeMap<String, Entry>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Data(format!("invalid checkpoint: {}", msg.into()))
}

impl Archive {
    fn f64s(&mut self, name: impl Into<String>, v: &[f64]) {
        self.entries.insert(name.into(), Entry::F64(v.to_vec()));
    }

    fn u64s(&mut self, name: impl Into<String>, v: Vec<u64>) {
        self.entries.insert(name.into(), Entry::U64(v));
    }

    fn get_f64(&self, name: &str, len: usize) -> Result<&[f64]> {
        match self.entries.get(name) {
            Some(Entry::F64(v)) if v.len() == len => Ok(v),
            Some(Entry::F64(v)) => Err(corrupt(format!("{name}: {} values, expected {len}", v.len()))),
            _ => Err(corrupt(format!("missing f64 entry {name}"))),
        }
    }

    fn get_u64(&self, name: &str) -> Result<&[u64]> {
        match self.entries.get(name) {
            Some(Entry::U64(v)) => Ok(v),
            _ => Err(corrupt(format!("missing u64 entry {name}"))),
        }
    }

    fn get_scalar(&self, name: &str) -> Result<u64> {
        match self.get_u64(name)? {
            [v] => Ok(*v),
            _ => Err(corrupt(format!("{name} is not a scalar"))),
        }
    }

    fn get_bytes(&self, name: &str) -> Result<&[u8]> {
        match self.entries.get(name) {
            Some(Entry::Bytes(v)) => Ok(v),
            _ => Err(corrupt(format!("missing byte entry {name}"))),
        }
    }

    fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for (name, entry) in &self.entries {
            w.write_all(&(name.len() as u16).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            match entry {
                Entry::F64(v) => {
                    w.write_all(&[0])?;
                    w.write_all(&(v.len() as u64).to_le_bytes())?;
                    for x in v {
                        w.write_all(&x.to_le_bytes())?;
                    }
                }
                Entry::U64(v) => {
                    w.write_all(&[1])?;
                    w.write_all(&(v.len() as u64).to_le_bytes())?;
                    for x in v {
                        w.write_all(&x.to_le_bytes())?;
                    }
                }
                Entry::Bytes(v) => {
                    w.write_all(&[2])?;
                    w.write_all(&(v.len() as u64).to_le_bytes())?;
                    w.write_all(v)?;
                }
            }
        }
        Ok(())
    }

    fn read<R: Read>(r: &mut R) -> Result<Self> {
        let n = u32::from_le_bytes(take(r)?);
        let mut entries = BTreeMap::new();
        for _ in 0..n {
            let name_len = u16::from_le_bytes(take(r)?) as usize;
            let name = String::from_utf8(take_vec(r, name_len)?).map_err(|_| corrupt("entry name is not UTF-8"))?;
            let kind = take::<1, _>(r)?[0];
            let len = u64::from_le_bytes(take(r)?) as usize;
            let entry = match kind {
                0 => Entry::F64(
                    take_vec(r, len * 8)?
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                        .collect(),
                ),
                1 => Entry::U64(
                    take_vec(r, len * 8)?
                        .chunks_exact(8)
                        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
                        .collect(),
                ),
                2 => Entry::Bytes(take_vec(r, len)?),
                k => return Err(corrupt(format!("unknown entry kind {k}"))),
            };
            entries.insert(name, entry);
        }
        Ok(Self { entries })
    }
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| corrupt(format!("truncated: {e}")))?;
    Ok(buf)
}

fn take_vec<R: Read>(r: &mut R, len: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(corrupt("truncated entry"));
    }
    Ok(buf)
}

fn put_model(a: &mut Archive, model: &InfoGan) {
    for (name, t) in model.tensors() {
        a.f64s(format!("param.{name}"), t);
    }
    if let Some(sn) = &model.spectral {
        for (name, s) in sn.states() {
            a.f64s(format!("spectral.{name}.u"), s.u.as_slice().expect("contiguous"));
            a.f64s(format!("spectral.{name}.v"), s.v.as_slice().expect("contiguous"));
            a.f64s(format!("spectral.{name}.sigma"), &[s.sigma, s.epsilon]);
            a.u64s(format!("spectral.{name}.degenerate"), vec![u64::from(s.degenerate)]);
        }
    }
}

fn get_model(a: &Archive, model: &mut InfoGan) -> Result<()> {
    let names: Vec<String> = model.tensors().into_iter().map(|(n, _)| n).collect();
    for (name, dst) in names.iter().zip(model.tensors_mut()) {
        let n = dst.len();
        dst.copy_from_slice(a.get_f64(&format!("param.{name}"), n)?);
    }
    if let Some(sn) = model.spectral.as_mut() {
        for (name, s) in sn.states_mut() {
            let u = a.get_f64(&format!("spectral.{name}.u"), s.u.len())?;
            s.u.as_slice_mut().expect("contiguous").copy_from_slice(u);
            let v = a.get_f64(&format!("spectral.{name}.v"), s.v.len())?;
            s.v.as_slice_mut().expect("contiguous").copy_from_slice(v);
            let sig = a.get_f64(&format!("spectral.{name}.sigma"), 2)?;
            s.sigma = sig[0];
            s.epsilon = sig[1];
            s.degenerate = a.get_scalar(&format!("spectral.{name}.degenerate"))? != 0;
        }
    }
    Ok(())
}

fn put_adam(a: &mut Archive, name: &str, opt: &Adam) {
    a.f64s(format!("adam.{name}.betas"), &[opt.beta1, opt.beta2, opt.epsilon]);
    a.u64s(format!("adam.{name}.t"), vec![opt.t]);
    for (i, (m, v)) in opt.m.iter().zip(&opt.v).enumerate() {
        a.f64s(format!("adam.{name}.m.{i:02}"), m);
        a.f64s(format!("adam.{name}.v.{i:02}"), v);
    }
}

fn get_adam(a: &Archive, name: &str, opt: &mut Adam) -> Result<()> {
    let betas = a.get_f64(&format!("adam.{name}.betas"), 3)?;
    (opt.beta1, opt.beta2, opt.epsilon) = (betas[0], betas[1], betas[2]);
    opt.t = a.get_scalar(&format!("adam.{name}.t"))?;
    for (i, (m, v)) in opt.m.iter_mut().zip(opt.v.iter_mut()).enumerate() {
        let (nm, nv) = (m.len(), v.len());
        m.copy_from_slice(a.get_f64(&format!("adam.{name}.m.{i:02}"), nm)?);
        v.copy_from_slice(a.get_f64(&format!("adam.{name}.v.{i:02}"), nv)?);
    }
    Ok(())
}

fn put_sampler(a: &mut Archive, name: &str, s: &EpochSampler) {
    let (order, cursor, epoch) = s.state();
    a.u64s(format!("sampler.{name}.order"), order.iter().map(|&i| i as u64).collect());
    a.u64s(format!("sampler.{name}.position"), vec![cursor as u64, epoch as u64]);
}

fn get_sampler(a: &Archive, name: &str) -> Result<Option<EpochSampler>> {
    let key = format!("sampler.{name}.order");
    if !a.entries.contains_key(&key) {
        return Ok(None);
    }
    let order: Vec<usize> = a.get_u64(&key)?.iter().map(|&i| i as usize).collect();
    let pos = a.get_u64(&format!("sampler.{name}.position"))?;
    let [cursor, epoch] = pos else {
        return Err(corrupt("sampler position"));
    };
    if *cursor as usize > order.len() {
        return Err(corrupt("sampler cursor out of range"));
    }
    Ok(Some(EpochSampler::from_state(order, *cursor as usize, *epoch as usize)))
}

fn put_rng(a: &mut Archive, rng: &ChaCha8Rng) {
    a.entries.insert("rng.seed".into(), Entry::Bytes(rng.get_seed().to_vec()));
    let pos = rng.get_word_pos();
    a.u64s("rng.position", vec![rng.get_stream(), pos as u64, (pos >> 64) as u64]);
}

fn get_rng(a: &Archive) -> Result<ChaCha8Rng> {
    use rand::SeedableRng;
    let seed: [u8; 32] = a
        .get_bytes("rng.seed")?
        .try_into()
        .map_err(|_| corrupt("rng seed must be 32 bytes"))?;
    let [stream, lo, hi] = a.get_u64("rng.position")? else {
        return Err(corrupt("rng position"));
    };
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(*stream);
    rng.set_word_pos(u128::from(*lo) | (u128::from(*hi) << 64));
    Ok(rng)
}

fn write_container<W: Write>(w: &mut W, config: &TrainConfig, kind: CheckpointKind, mut a: Archive) -> Result<()> {
    a.entries
        .insert("kind".into(), Entry::Bytes(kind.as_str().as_bytes().to_vec()));
    let cfg = config.to_toml_string();
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(cfg.len() as u32).to_le_bytes())?;
    w.write_all(cfg.as_bytes())?;
    a.write(w)
}

fn read_container<R: Read>(r: &mut R) -> Result<(TrainConfig, CheckpointKind, Archive)> {
    if &take::<4, _>(r)? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(take(r)?);
    if version != CHECKPOINT_VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let cfg_len = u32::from_le_bytes(take(r)?) as usize;
    let cfg_text = String::from_utf8(take_vec(r, cfg_len)?).map_err(|_| corrupt("config is not UTF-8"))?;
    let config = TrainConfig::from_toml_str(&cfg_text)?;
    let a = Archive::read(r)?;
    let kind = CheckpointKind::parse(a.get_bytes("kind")?)?;
    Ok((config, kind, a))
}

/// What a checkpoint file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointKind {
    /// A full InfoGAN training state.
    InfoGan,
    Cnn,
    Rnn,
}

impl CheckpointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckpointKind::InfoGan => "infogan",
            CheckpointKind::Cnn => "cnn",
            CheckpointKind::Rnn => "rnn",
        }
    }

    fn parse(bytes: &[u8]) -> Result<Self> {
        match bytes {
            b"infogan" => Ok(CheckpointKind::InfoGan),
            b"cnn" => Ok(CheckpointKind::Cnn),
            b"rnn" => Ok(CheckpointKind::Rnn),
            _ => Err(corrupt("unknown checkpoint kind")),
        }
    }
}

/// Serializes a training state together with its config.
pub fn write_checkpoint<W: Write>(w: &mut W, config: &TrainConfig, state: &TrainState) -> Result<()> {
    let mut a = Archive::default();
    put_model(&mut a, &state.model);
    put_adam(&mut a, "d", &state.opt_d);
    put_adam(&mut a, "e", &state.opt_e);
    put_adam(&mut a, "g", &state.opt_g);
    put_sampler(&mut a, "real", &state.real_sampler);
    if let Some(s) = &state.labeled_sampler {
        put_sampler(&mut a, "labeled", s);
    }
    put_rng(&mut a, &state.rng);
    a.u64s("step", vec![state.step]);
    a.f64s("elapsed_s", &[state.elapsed_s]);
    write_container(w, config, CheckpointKind::InfoGan, a)
}

/// Restores a training state and its config.
pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<(TrainConfig, TrainState)> {
    let (config, kind, a) = read_container(r)?;
    if kind != CheckpointKind::InfoGan {
        return Err(Error::Argument(format!("checkpoint holds a {} classifier, not an InfoGAN", kind.as_str())));
    }
    // Build a state with the right shapes, then overwrite every entry.
    let real = get_sampler(&a, "real")?.ok_or_else(|| corrupt("missing real sampler"))?;
    let labeled = get_sampler(&a, "labeled")?;
    let mut state = TrainState::with_shapes(&config, real, labeled)?;
    get_model(&a, &mut state.model)?;
    get_adam(&a, "d", &mut state.opt_d)?;
    get_adam(&a, "e", &mut state.opt_e)?;
    get_adam(&a, "g", &mut state.opt_g)?;
    state.rng = get_rng(&a)?;
    state.step = a.get_scalar("step")?;
    state.elapsed_s = a.get_f64("elapsed_s", 1)?[0];
    Ok((config, state))
}

pub fn save_checkpoint(path: impl AsRef<Path>, config: &TrainConfig, state: &TrainState) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, config, state)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(TrainConfig, TrainState)> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

/// Kind of the checkpoint at `path`.
pub fn checkpoint_kind(path: impl AsRef<Path>) -> Result<CheckpointKind> {
    Ok(read_container(&mut BufReader::new(File::open(path)?))?.1)
}

/// Saves trained classifier parameters.
pub fn save_classifier<P: Params>(
    path: impl AsRef<Path>,
    config: &TrainConfig,
    kind: CheckpointKind,
    params: &P,
) -> Result<()> {
    let mut a = Archive::default();
    for (name, t) in params.tensors() {
        a.f64s(format!("param.{name}"), t);
    }
    let mut w = BufWriter::new(File::create(path)?);
    write_container(&mut w, config, kind, a)?;
    w.flush()?;
    Ok(())
}

/// Loads classifier parameters into `params`, whose shapes must match the
/// stored config.
pub fn load_classifier_into<P: Params>(path: impl AsRef<Path>, kind: CheckpointKind, params: &mut P) -> Result<()> {
    let (_, found, a) = read_container(&mut BufReader::new(File::open(path)?))?;
    if found != kind {
        return Err(Error::Argument(format!(
            "checkpoint holds a {} model, expected {}",
            found.as_str(),
            kind.as_str()
        )));
    }
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    for (name, dst) in names.iter().zip(params.tensors_mut()) {
        let n = dst.len();
        dst.copy_from_slice(a.get_f64(&format!("param.{name}"), n)?);
    }
    Ok(())
}

/// Config stored in any checkpoint.
pub fn checkpoint_config(path: impl AsRef<Path>) -> Result<TrainConfig> {
    Ok(read_container(&mut BufReader::new(File::open(path)?))?.0)
}
