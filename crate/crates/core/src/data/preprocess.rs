//! Recording-to-sequence preprocessing, subject filtering, cross-subject
//! splits and stratified label masking.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ntu::{RawBody, RawRecording};
use super::{DatasetSplit, SkeletonSequence, HIP_JOINT, MAX_SEQUENCE_LEN, N_JOINTS};
use crate::{Error, Result};

/// Mutual (two-person) actions A050-A060 of the dataset documentation.
pub fn default_multi_subject_classes() -> BTreeSet<usize> {
    (49..60).collect()
}

/// Cross-subject training performers of the dataset's evaluation protocol.
pub const NTU_TRAIN_SUBJECTS: [u32; 20] = [
    1, 2, 4, 5, 8, 9, 13, 14, 15, 16, 17, 18, 19, 25, 27, 28, 31, 34, 35, 38,
];

/// What to do with recordings of single-person classes in which the sensor
/// tracked more than one body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BodyPolicy {
    /// Drop any recording whose maximum body count exceeds one.
    #[default]
    DropMultiBody,
    /// Keep the body tracked in the most frames; drop on a tie.
    KeepLongestBody,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterConfig {
    pub multi_subject_classes: BTreeSet<usize>,
    pub body_policy: BodyPolicy,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            multi_subject_classes: default_multi_subject_classes(),
            body_policy: BodyPolicy::default(),
        }
    }
}

impl FilterConfig {
    /// The "last 10 classes" variant (A051-A060).
    pub fn last_ten_classes() -> Self {
        Self {
            multi_subject_classes: (50..60).collect(),
            ..Self::default()
        }
    }
}

/// Tracking duration (frame count) of each body id, in first-seen order.
fn body_durations(rec: &RawRecording) -> Vec<(String, usize)> {
    let mut order: Vec<String> = Vec::new();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for body in rec.frames.iter().flatten() {
        let c = counts.entry(body.body_id.as_str()).or_insert(0);
        if *c == 0 {
            order.push(body.body_id.clone());
        }
        *c += 1;
    }
    order
        .into_iter()
        .map(|id| {
            let n = counts[id.as_str()];
            (id, n)
        })
        .collect()
}

/// The body tracked in the most frames, `None` when two bodies tie.
fn longest_tracked_body(rec: &RawRecording) -> Option<String> {
    let mut durations = body_durations(rec);
    durations.sort_by(|a, b| b.1.cmp(&a.1));
    match durations.as_slice() {
        [] => None,
        [(id, _)] => Some(id.clone()),
        [(id, a), (_, b), ..] => (a > b).then(|| id.clone()),
    }
}

/// Removes multi-subject classes and, per the body policy, recordings with
/// more than one tracked body.
pub fn filter_single_subject(recordings: Vec<RawRecording>, cfg: &FilterConfig) -> Vec<RawRecording> {
    recordings
        .into_iter()
        .filter(|r| !cfg.multi_subject_classes.contains(&r.action_class()))
        .filter(|r| {
            r.max_body_count() <= 1
                || (cfg.body_policy == BodyPolicy::KeepLongestBody && longest_tracked_body(r).is_some())
        })
        .collect()
}

/// Builds a hip-centered sequence from a raw recording.
///
/// Follows the body tracked longest (frames where it is missing are
/// dropped), keeps every second remaining frame starting at the first,
/// truncates to 150 frames and subtracts the hip joint from every joint.
pub fn preprocess(raw: &RawRecording) -> Result<SkeletonSequence> {
    let primary = body_durations(raw)
        .into_iter()
        .fold(None::<(String, usize)>, |best, (id, n)| match best {
            Some((_, m)) if m >= n => best,
            _ => Some((id, n)),
        })
        .map(|(id, _)| id)
        .ok_or_else(|| Error::EmptySequence(format!("{}: no tracked body", raw.name)))?;
    let tracked: Vec<&RawBody> = raw
        .frames
        .iter()
        .filter_map(|bodies| bodies.iter().find(|b| b.body_id == primary))
        .collect();
    let kept: Vec<&RawBody> = tracked.into_iter().step_by(2).take(MAX_SEQUENCE_LEN).collect();
    if kept.is_empty() {
        return Err(Error::EmptySequence(format!("{}: no frames after subsampling", raw.name)));
    }
    let mut frames = Array3::<f32>::zeros((kept.len(), N_JOINTS, 3));
    for (t, body) in kept.iter().enumerate() {
        let hip = body.joints[HIP_JOINT];
        for (j, p) in body.joints.iter().enumerate() {
            for k in 0..3 {
                frames[[t, j, k]] = p[k] - hip[k];
            }
        }
    }
    Ok(SkeletonSequence {
        frames,
        label: Some(raw.action_class()),
        subject_id: raw.subject_id(),
        labeled: true,
    })
}

/// Performer ids on each side of a cross-subject split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossSubjectProtocol {
    pub train: BTreeSet<u32>,
    pub test: BTreeSet<u32>,
}

impl CrossSubjectProtocol {
    pub fn new(train: BTreeSet<u32>, test: BTreeSet<u32>) -> Result<Self> {
        if let Some(id) = train.intersection(&test).next() {
            return Err(Error::Config(format!("subject {id} is on both sides of the split")));
        }
        Ok(Self { train, test })
    }

    /// The dataset's 20/20 cross-subject protocol over performers 1..=40.
    pub fn ntu() -> Self {
        let train: BTreeSet<u32> = NTU_TRAIN_SUBJECTS.into_iter().collect();
        let test = (1..=40).filter(|s| !train.contains(s)).collect();
        Self { train, test }
    }
}

impl Default for CrossSubjectProtocol {
    fn default() -> Self {
        Self::ntu()
    }
}

/// Partitions sequences by performer.
pub fn split_cross_subject(sequences: Vec<SkeletonSequence>, protocol: &CrossSubjectProtocol) -> Result<DatasetSplit> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for s in sequences {
        if protocol.train.contains(&s.subject_id) {
            train.push(s);
        } else if protocol.test.contains(&s.subject_id) {
            test.push(s);
        } else {
            return Err(Error::Config(format!(
                "subject {} belongs to neither side of the split",
                s.subject_id
            )));
        }
    }
    Ok(DatasetSplit {
        train,
        test,
        label_fraction: 1.0,
    })
}

/// Per-class labeled counts: each class gets `floor` or `ceil` of
/// `fraction * count`, and the total is `round(fraction * N)` (largest
/// remainder apportionment, ties to the lower class index).
pub fn stratified_quota(class_counts: &BTreeMap<usize, usize>, fraction: f64) -> BTreeMap<usize, usize> {
    let total: usize = class_counts.values().sum();
    let target = (fraction * total as f64).round() as usize;
    let mut quota: BTreeMap<usize, usize> = BTreeMap::new();
    let mut remainders = Vec::new();
    for (&class, &n) in class_counts {
        let exact = fraction * n as f64;
        let base = ((exact + 1e-9).floor() as usize).min(n);
        quota.insert(class, base);
        remainders.push((exact - base as f64, class));
    }
    let assigned: usize = quota.values().sum();
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, class) in remainders.iter().take(target.saturating_sub(assigned)) {
        let q = quota.get_mut(&class).expect("class present");
        if *q < class_counts[&class] {
            *q += 1;
        }
    }
    quota
}

/// Marks a stratified random subset of training samples as labeled.
///
/// Test samples keep their labels. Deterministic for a fixed seed.
pub fn mask_labels(mut split: DatasetSplit, fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Argument(format!("label fraction must be in (0, 1], got {fraction}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in split.train.iter().enumerate() {
        if let Some(label) = s.label {
            by_class.entry(label).or_default().push(i);
        }
    }
    let counts = by_class.iter().map(|(&c, v)| (c, v.len())).collect();
    let quota = stratified_quota(&counts, fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in split.train.iter_mut() {
        s.labeled = false;
    }
    for (class, mut members) in by_class {
        members.shuffle(&mut rng);
        for &i in members.iter().take(quota[&class]) {
            split.train[i].labeled = true;
        }
    }
    for s in split.test.iter_mut() {
        s.labeled = s.label.is_some();
    }
    split.label_fraction = fraction;
    Ok(split)
}

/// Counts reported by [`build_split`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PrepareStats {
    pub recordings: usize,
    pub filtered_out: usize,
    /// Recordings without any tracked frame.
    pub empty: usize,
}

/// Filters (optional), preprocesses and splits raw recordings. Recordings
/// that preprocess to nothing are skipped and counted.
pub fn build_split(
    recordings: Vec<RawRecording>,
    filter: Option<&FilterConfig>,
    protocol: &CrossSubjectProtocol,
) -> Result<(DatasetSplit, PrepareStats)> {
    let mut stats = PrepareStats {
        recordings: recordings.len(),
        ..PrepareStats::default()
    };
    let kept = match filter {
        Some(cfg) => filter_single_subject(recordings, cfg),
        None => recordings,
    };
    stats.filtered_out = stats.recordings - kept.len();
    let mut sequences = Vec::with_capacity(kept.len());
    for rec in &kept {
        match preprocess(rec) {
            Ok(s) => sequences.push(s),
            Err(Error::EmptySequence(_)) => stats.empty += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((split_cross_subject(sequences, protocol)?, stats))
}
