//! Repeated input rows. Replay batches from small environments often hold
//! the same state many times; the networks run once per distinct row and the
//! per-row upstream gradients are summed back onto it, which is exact.

use std::borrow::Cow;
use std::collections::HashMap;

use crate::numerics::Matrix;

pub(crate) struct UniqueRows<'a> {
    x: Cow<'a, Matrix>,
    /// Distinct-row position of every original row; `None` when all rows differ.
    map: Option<Vec<usize>>,
}

impl<'a> UniqueRows<'a> {
    pub fn new(x: &'a Matrix) -> Self {
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(x.rows());
        let mut map = Vec::with_capacity(x.rows());
        let mut keep = Vec::new();
        for (r, row) in x.iter_rows().enumerate() {
            // Normalise -0.0 so rows that compare equal share a key.
            let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
            let next = seen.len();
            let id = *seen.entry(key).or_insert_with(|| {
                keep.push(r);
                next
            });
            map.push(id);
        }
        if keep.len() == x.rows() {
            return UniqueRows {
                x: Cow::Borrowed(x),
                map: None,
            };
        }
        let mut unique = Matrix::zeros(keep.len(), x.cols());
        for (u, &r) in keep.iter().enumerate() {
            unique.row_mut(u).copy_from_slice(x.row(r));
        }
        UniqueRows {
            x: Cow::Owned(unique),
            map: Some(map),
        }
    }

    /// The distinct rows, in order of first appearance.
    pub fn x(&self) -> &Matrix {
        &self.x
    }

    /// Per-distinct-row values back onto every original row.
    pub fn expand<'m>(&self, m: &'m Matrix) -> Cow<'m, Matrix> {
        let Some(map) = &self.map else {
            return Cow::Borrowed(m);
        };
        let mut out = Matrix::zeros(map.len(), m.cols());
        for (r, &u) in map.iter().enumerate() {
            out.row_mut(r).copy_from_slice(m.row(u));
        }
        Cow::Owned(out)
    }

    /// Sums per-original-row values onto their distinct rows.
    pub fn compress<'m>(&self, m: &'m Matrix) -> Cow<'m, Matrix> {
        let Some(map) = &self.map else {
            return Cow::Borrowed(m);
        };
        let mut out = Matrix::zeros(self.x.rows(), m.cols());
        for (r, &u) in map.iter().enumerate() {
            for (o, v) in out.row_mut(u).iter_mut().zip(m.row(r)) {
                *o += v;
            }
        }
        Cow::Owned(out)
    }
}
