//! Matching unsupervised code indices to class labels.

use ndarray::{Array1, Array2, ArrayView2};

use crate::baselines::Classifier;
use crate::{Error, Result};

/// Assignment maximizing the total weight of a square matrix
/// (Hungarian method with potentials, `O(n^3)`). Returns `col[row]`.
pub fn hungarian_max(weights: &Array2<f64>) -> Vec<usize> {
    let n = weights.nrows();
    assert_eq!(n, weights.ncols(), "square weight matrix");
    if n == 0 {
        return Vec::new();
    }
    let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Minimize cost = max - weight, 1-based with a virtual row/column 0.
    let cost = |i: usize, j: usize| max - weights[[i - 1, j - 1]];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Bijection from code index to class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMapping {
    /// `class_of_code[code]`.
    pub class_of_code: Vec<usize>,
    /// All samples fell on a single code; the mapping is the identity.
    pub degenerate: bool,
}

impl CodeMapping {
    pub fn identity(n: usize) -> Self {
        Self {
            class_of_code: (0..n).collect(),
            degenerate: false,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.class_of_code.iter().enumerate().all(|(i, &c)| i == c)
    }
}

/// Matches predicted codes to labels so that the number of agreeing
/// samples is maximal.
pub fn map_code_to_class(codes: &[usize], labels: &[usize], n: usize) -> Result<CodeMapping> {
    if codes.len() != labels.len() {
        return Err(Error::Argument("codes and labels differ in length".into()));
    }
    if codes.is_empty() {
        return Err(Error::Argument("code matching needs labeled samples".into()));
    }
    let mut counts = Array2::<f64>::zeros((n, n));
    for (&c, &y) in codes.iter().zip(labels) {
        if c >= n || y >= n {
            return Err(Error::Data(format!("code {c} or label {y} outside 0..{n}")));
        }
        counts[[c, y]] += 1.0;
    }
    if codes.iter().all(|&c| c == codes[0]) {
        return Ok(CodeMapping {
            degenerate: true,
            ..CodeMapping::identity(n)
        });
    }
    Ok(CodeMapping {
        class_of_code: hungarian_max(&counts),
        degenerate: false,
    })
}

/// A classifier whose outputs are relabeled through a [`CodeMapping`].
pub struct Remapped<'a, C: ?Sized> {
    pub inner: &'a C,
    pub mapping: &'a CodeMapping,
}

impl<C: Classifier + ?Sized> Classifier for Remapped<'_, C> {
    fn logits(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let code_logits = self.inner.logits(x);
        let mut out = Array1::zeros(code_logits.len());
        for (code, &class) in self.mapping.class_of_code.iter().enumerate() {
            out[class] = code_logits[code];
        }
        out
    }
}
