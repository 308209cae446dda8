//! Synthetic stick-figure motions used as a label-complete test fixture.
//!
//! Each class moves one body part with its own frequency and amplitude:
//! class `k` animates `MOTIONS[k % 6]` with a frequency step of `(k / 6) % 4`
//! and an amplitude step of `(k / 24) % 3`. Per-sample variation comes from
//! the start phase, amplitude/frequency jitter, small per-subject body
//! proportions and Gaussian joint noise. Lengths follow a [`LengthPrior`].

use std::f64::consts::PI;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DatasetSplit, SkeletonSequence, HIP_JOINT, N_JOINTS};
use crate::priors::LengthPrior;

/// Rest pose (x, y, z) in meters for the 25 joints, hip at the origin.
const REST_POSE: [[f64; 3]; N_JOINTS] = [
    [0.0, 0.0, 0.0],      // 0 spine base
    [0.0, 0.22, 0.0],     // 1 spine mid
    [0.0, 0.44, 0.0],     // 2 neck
    [0.0, 0.54, 0.0],     // 3 head
    [0.14, 0.37, 0.0],    // 4 left shoulder
    [0.17, 0.16, 0.0],    // 5 left elbow
    [0.18, -0.04, 0.0],   // 6 left wrist
    [0.18, -0.09, 0.0],   // 7 left hand
    [-0.14, 0.37, 0.0],   // 8 right shoulder
    [-0.17, 0.16, 0.0],   // 9 right elbow
    [-0.18, -0.04, 0.0],  // 10 right wrist
    [-0.18, -0.09, 0.0],  // 11 right hand
    [0.07, -0.02, 0.0],   // 12 left hip
    [0.08, -0.36, 0.0],   // 13 left knee
    [0.08, -0.68, 0.0],   // 14 left ankle
    [0.08, -0.72, 0.07],  // 15 left foot
    [-0.07, -0.02, 0.0],  // 16 right hip
    [-0.08, -0.36, 0.0],  // 17 right knee
    [-0.08, -0.68, 0.0],  // 18 right ankle
    [-0.08, -0.72, 0.07], // 19 right foot
    [0.0, 0.39, 0.0],     // 20 spine shoulder
    [0.18, -0.13, 0.0],   // 21 left hand tip
    [0.16, -0.08, 0.03],  // 22 left thumb
    [-0.18, -0.13, 0.0],  // 23 right hand tip
    [-0.16, -0.08, 0.03], // 24 right thumb
];

const LEFT_ARM: &[usize] = &[5, 6, 7, 21, 22];
const RIGHT_ARM: &[usize] = &[9, 10, 11, 23, 24];
const RIGHT_LEG: &[usize] = &[17, 18, 19];
const UPPER_BODY: &[usize] = &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 20, 21, 22, 23, 24];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Motion {
    RaiseRightArm,
    RaiseLeftArm,
    Squat,
    KickRightLeg,
    Bow,
    RaiseBothArms,
}

const MOTIONS: [Motion; 6] = [
    Motion::RaiseRightArm,
    Motion::RaiseLeftArm,
    Motion::Squat,
    Motion::KickRightLeg,
    Motion::Bow,
    Motion::RaiseBothArms,
];

/// Rotates `joints` of `pose` about `pivot` in the plane of axes `(a, b)`.
fn rotate(pose: &mut [[f64; 3]; N_JOINTS], joints: &[usize], pivot: [f64; 3], axes: (usize, usize), angle: f64) {
    let (s, c) = angle.sin_cos();
    for &j in joints {
        let da = pose[j][axes.0] - pivot[axes.0];
        let db = pose[j][axes.1] - pivot[axes.1];
        pose[j][axes.0] = pivot[axes.0] + c * da - s * db;
        pose[j][axes.1] = pivot[axes.1] + s * da + c * db;
    }
}

fn animate(pose: &mut [[f64; 3]; N_JOINTS], motion: Motion, amount: f64) {
    match motion {
        Motion::RaiseRightArm => {
            let pivot = pose[8];
            rotate(pose, RIGHT_ARM, pivot, (0, 1), -2.0 * amount);
        }
        Motion::RaiseLeftArm => {
            let pivot = pose[4];
            rotate(pose, LEFT_ARM, pivot, (0, 1), 2.0 * amount);
        }
        Motion::RaiseBothArms => {
            let (l, r) = (pose[4], pose[8]);
            rotate(pose, LEFT_ARM, l, (0, 1), 1.6 * amount);
            rotate(pose, RIGHT_ARM, r, (0, 1), -1.6 * amount);
        }
        Motion::Squat => {
            // Knees move forward while everything above them drops.
            let drop = 0.25 * amount;
            for j in [13, 17] {
                pose[j][2] += 0.2 * amount;
                pose[j][1] += 0.5 * drop;
            }
            for j in std::iter::once(0).chain(UPPER_BODY.iter().copied()).chain([12, 16]) {
                pose[j][1] += drop;
                pose[j][2] -= 0.05 * amount;
            }
            for j in [13, 17] {
                pose[j][1] += drop;
            }
        }
        Motion::KickRightLeg => {
            let pivot = pose[16];
            rotate(pose, RIGHT_LEG, pivot, (2, 1), -1.2 * amount);
        }
        Motion::Bow => {
            let pivot = pose[HIP_JOINT];
            rotate(pose, UPPER_BODY, pivot, (2, 1), -1.1 * amount);
        }
    }
}

/// Fixture size and variability.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Standard deviation of i.i.d. joint noise (meters).
    pub noise_std: f64,
    pub length: LengthPrior,
    /// Performers 1..=n are training subjects, the next n are test subjects.
    pub subjects_per_side: u32,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(n_classes: usize, n_train: usize, n_test: usize, seed: u64) -> Self {
        assert!(n_classes >= 2, "fixture needs at least two classes");
        Self {
            n_classes,
            n_train,
            n_test,
            noise_std: 0.01,
            length: LengthPrior::default(),
            subjects_per_side: 5,
            seed,
        }
    }

    /// The desk-scale fixture: 3 classes, 2000 train and 600 test
    /// sequences of 10 to 30 frames.
    pub fn desk(seed: u64) -> Self {
        Self::new(3, 2000, 600, seed).with_length(LengthPrior::desk())
    }

    pub fn with_length(mut self, length: LengthPrior) -> Self {
        self.length = length;
        self
    }

    pub fn with_noise(mut self, noise_std: f64) -> Self {
        self.noise_std = noise_std;
        self
    }

    /// Samples are assigned to classes round-robin, so class sizes differ
    /// by at most one.
    pub fn build(&self) -> DatasetSplit {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let per_side = self.subjects_per_side.max(1);
        let make = |count: usize, first_subject: u32, rng: &mut ChaCha8Rng| -> Vec<SkeletonSequence> {
            (0..count)
                .map(|i| {
                    let class = i % self.n_classes;
                    let subject = first_subject + (i / self.n_classes) as u32 % per_side;
                    self.sample(class, subject, rng)
                })
                .collect()
        };
        let train = make(self.n_train, 1, &mut rng);
        let test = make(self.n_test, 1 + per_side, &mut rng);
        DatasetSplit {
            train,
            test,
            label_fraction: 1.0,
        }
    }

    /// One sequence of `class` performed by `subject`.
    pub fn sample<R: Rng + ?Sized>(&self, class: usize, subject: u32, rng: &mut R) -> SkeletonSequence {
        let motion = MOTIONS[class % MOTIONS.len()];
        let freq_step = (class / MOTIONS.len()) % 4;
        let amp_step = (class / (4 * MOTIONS.len())) % 3;
        // Cycles per frame and peak amount of motion.
        let freq = (0.025 + 0.012 * freq_step as f64) * rng.random_range(0.9..1.1);
        let amp = (0.55 + 0.2 * amp_step as f64) * rng.random_range(0.85..1.15);
        let phase = rng.random_range(-0.4..0.4);
        let length = self.length.sample(rng);
        // Subject-specific body size.
        let size = 1.0 + 0.04 * (((subject as f64) * 1.7).sin());
        let noise = Normal::new(0.0, self.noise_std.max(0.0)).expect("finite std");

        let mut frames = Array3::<f32>::zeros((length, N_JOINTS, 3));
        for t in 0..length {
            let mut pose = REST_POSE;
            for p in pose.iter_mut() {
                for v in p.iter_mut() {
                    *v *= size;
                }
            }
            let amount = amp * 0.5 * (1.0 - (2.0 * PI * freq * t as f64 + phase).cos());
            animate(&mut pose, motion, amount);
            let hip = pose[HIP_JOINT];
            for (j, p) in pose.iter().enumerate() {
                for k in 0..3 {
                    let jitter = if j == HIP_JOINT || self.noise_std == 0.0 {
                        0.0
                    } else {
                        noise.sample(rng)
                    };
                    frames[[t, j, k]] = (p[k] - hip[k] + jitter) as f32;
                }
            }
        }
        SkeletonSequence {
            frames,
            label: Some(class),
            subject_id: subject,
            labeled: true,
        }
    }
}

/// `n_per_class` training and `n_per_class` test sequences per class with
/// the default length prior.
pub fn synth_make(n_classes: usize, n_per_class: usize, seed: u64) -> DatasetSplit {
    SynthSpec::new(n_classes, n_classes * n_per_class, n_classes * n_per_class, seed).build()
}
