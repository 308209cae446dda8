//! Minibatch sampling without replacement.

use ndarray::{s, Array2, Array3};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{SkeletonSequence, FRAME_DIM};

/// Sequences of one minibatch, each `(T_i, 75)` in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub sequences: Vec<Array2<f64>>,
    /// Labels usable for supervision.
    pub labels: Vec<Option<usize>>,
}

impl Batch {
    pub fn from_sequences<'a>(seqs: impl IntoIterator<Item = &'a SkeletonSequence>) -> Self {
        let (sequences, labels) = seqs.into_iter().map(|s| (s.to_matrix(), s.supervised_label())).unzip();
        Self { sequences, labels }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.sequences.iter().map(|s| s.nrows()).collect()
    }

    /// Zero-padded `(B, T_max, 75)` tensor.
    pub fn padded(&self) -> Array3<f64> {
        let t_max = self.lengths().into_iter().max().unwrap_or(0);
        let mut out = Array3::zeros((self.len(), t_max, FRAME_DIM));
        for (i, s) in self.sequences.iter().enumerate() {
            out.slice_mut(s![i, ..s.nrows(), ..]).assign(s);
        }
        out
    }

    /// `(B, T_max)` validity mask, 1 for real frames.
    pub fn mask(&self) -> Array2<f64> {
        let lengths = self.lengths();
        let t_max = lengths.iter().copied().max().unwrap_or(0);
        Array2::from_shape_fn((self.len(), t_max), |(i, t)| f64::from(u8::from(t < lengths[i])))
    }
}

/// Cycles through `n` indices in a fresh random order each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSampler {
    order: Vec<usize>,
    cursor: usize,
    epoch: usize,
}

impl EpochSampler {
    pub fn new<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        assert!(n > 0, "cannot sample from an empty set");
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Self {
            order,
            cursor: 0,
            epoch: 0,
        }
    }

    /// Completed passes over the data.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Next `size` indices. Within an epoch no index repeats; a batch that
    /// crosses an epoch boundary continues with the reshuffled order.
    pub fn next_indices<R: Rng + ?Sized>(&mut self, size: usize, rng: &mut R) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.cursor == self.order.len() {
                self.order.shuffle(rng);
                self.cursor = 0;
                self.epoch += 1;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }

    pub fn next_batch<R: Rng + ?Sized>(&mut self, data: &[SkeletonSequence], size: usize, rng: &mut R) -> Batch {
        let idx = self.next_indices(size, rng);
        Batch::from_sequences(idx.iter().map(|&i| &data[i]))
    }

    /// Raw state for checkpointing: (order, cursor, epoch).
    pub fn state(&self) -> (&[usize], usize, usize) {
        (&self.order, self.cursor, self.epoch)
    }

    pub fn from_state(order: Vec<usize>, cursor: usize, epoch: usize) -> Self {
        assert!(cursor <= order.len());
        Self { order, cursor, epoch }
    }
}
