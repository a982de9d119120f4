//! Ragged gather/reduce kernels.
//!
//! A [`SegmentMap`] groups rows of a source matrix into `m` target groups.
//! Reductions walk each group in ascending position order; groups are
//! independent so they may run in parallel without changing any bit of the
//! result. Scatters (the backward passes) run sequentially in index order.

use rayon::prelude::*;

use super::{EngineError, Matrix, Scalar};

const PAR_GROUPS: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMap {
    offsets: Vec<usize>,
    indices: Vec<usize>,
    num_sources: usize,
}

impl SegmentMap {
    pub fn new(
        offsets: Vec<usize>,
        indices: Vec<usize>,
        num_sources: usize,
    ) -> Result<Self, EngineError> {
        if offsets.first() != Some(&0) || offsets.last() != Some(&indices.len()) {
            return Err(EngineError::InvalidSegmentMap(
                "offsets must start at 0 and end at the index count".into(),
            ));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(EngineError::InvalidSegmentMap("offsets not monotone".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= num_sources) {
            return Err(EngineError::IndexOutOfRange {
                index: bad,
                len: num_sources,
            });
        }
        Ok(SegmentMap {
            offsets,
            indices,
            num_sources,
        })
    }

    pub fn from_groups<G: AsRef<[usize]>>(
        groups: &[G],
        num_sources: usize,
    ) -> Result<Self, EngineError> {
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        for g in groups {
            indices.extend_from_slice(g.as_ref());
            offsets.push(indices.len());
        }
        Self::new(offsets, indices, num_sources)
    }

    /// Identity map over `len` sources split at `offsets`.
    pub fn contiguous(offsets: Vec<usize>) -> Result<Self, EngineError> {
        let len = offsets.last().copied().unwrap_or(0);
        Self::new(offsets, (0..len).collect(), len)
    }

    pub fn num_groups(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.indices[self.offsets[g]..self.offsets[g + 1]]
    }

    pub fn group_len(&self, g: usize) -> usize {
        self.offsets[g + 1] - self.offsets[g]
    }

    pub(crate) fn first_empty_group(&self) -> Option<usize> {
        (0..self.num_groups()).find(|&g| self.group_len(g) == 0)
    }

    fn check_source<T: Scalar>(&self, x: &Matrix<T>) -> Result<(), EngineError> {
        if x.rows() != self.num_sources {
            return Err(EngineError::ShapeMismatch {
                op: "segment",
                left: x.shape(),
                right: (self.num_sources, x.cols()),
            });
        }
        Ok(())
    }

    /// True when every source row belongs to exactly one group.
    pub(crate) fn is_partition(&self) -> bool {
        if self.indices.len() != self.num_sources {
            return false;
        }
        let mut seen = vec![false; self.num_sources];
        for &i in &self.indices {
            if seen[i] {
                return false;
            }
            seen[i] = true;
        }
        true
    }
}

fn for_each_group<T: Scalar>(
    out: &mut Matrix<T>,
    map: &SegmentMap,
    f: impl Fn(usize, &mut [T]) + Sync + Send,
) {
    let cols = out.cols();
    if cols == 0 {
        return;
    }
    if map.num_groups() * cols >= PAR_GROUPS {
        out.as_mut_slice()
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(g, row)| f(g, row));
    } else {
        out.as_mut_slice()
            .chunks_mut(cols)
            .enumerate()
            .for_each(|(g, row)| f(g, row));
    }
}

/// Row `g` of the output is the sum of the source rows in group `g`;
/// empty groups produce zero rows.
pub fn segment_sum<T: Scalar>(x: &Matrix<T>, map: &SegmentMap) -> Result<Matrix<T>, EngineError> {
    map.check_source(x)?;
    let mut out = Matrix::zeros(map.num_groups(), x.cols());
    for_each_group(&mut out, map, |g, row| {
        for &src in map.group(g) {
            for (o, &v) in row.iter_mut().zip(x.row(src)) {
                *o += v;
            }
        }
    });
    Ok(out)
}

pub fn segment_mean<T: Scalar>(x: &Matrix<T>, map: &SegmentMap) -> Result<Matrix<T>, EngineError> {
    if let Some(group) = map.first_empty_group() {
        return Err(EngineError::EmptyGroup { group });
    }
    let mut out = segment_sum(x, map)?;
    for g in 0..map.num_groups() {
        let inv = T::one() / T::c(map.group_len(g) as f64);
        for v in out.row_mut(g) {
            *v *= inv;
        }
    }
    Ok(out)
}

/// Adjoint of [`segment_sum`]: adds output-row gradients back onto the
/// source rows, scaled per group by `weight(g)`.
pub(crate) fn scatter_back<T: Scalar>(
    grad: &Matrix<T>,
    map: &SegmentMap,
    weight: impl Fn(usize) -> T,
) -> Matrix<T> {
    let mut dx = Matrix::zeros(map.num_sources(), grad.cols());
    for g in 0..map.num_groups() {
        let w = weight(g);
        let grow = grad.row(g);
        for &src in map.group(g) {
            for (d, &v) in dx.row_mut(src).iter_mut().zip(grow) {
                *d += w * v;
            }
        }
    }
    dx
}

/// Column-wise softmax within each group. The map must partition the rows of
/// `scores`; the output has the same shape as the input.
pub fn segment_softmax<T: Scalar>(
    scores: &Matrix<T>,
    map: &SegmentMap,
) -> Result<Matrix<T>, EngineError> {
    map.check_source(scores)?;
    if let Some(group) = map.first_empty_group() {
        return Err(EngineError::EmptyGroup { group });
    }
    if !map.is_partition() {
        return Err(EngineError::InvalidSegmentMap(
            "softmax groups must partition the score rows".into(),
        ));
    }
    let cols = scores.cols();
    let mut out = Matrix::zeros(scores.rows(), cols);
    for g in 0..map.num_groups() {
        let members = map.group(g);
        for c in 0..cols {
            let mut max = T::neg_infinity();
            for &p in members {
                max = max.max(scores.get(p, c));
            }
            let mut total = T::zero();
            for &p in members {
                let e = (scores.get(p, c) - max).exp();
                out.set(p, c, e);
                total += e;
            }
            for &p in members {
                out.set(p, c, out.get(p, c) / total);
            }
        }
    }
    Ok(out)
}

/// Backward of [`segment_softmax`] given its output `y`:
/// `dx_p = y_p (g_p - sum_q y_q g_q)` within each group.
pub(crate) fn segment_softmax_backward<T: Scalar>(
    y: &Matrix<T>,
    grad: &Matrix<T>,
    map: &SegmentMap,
) -> Matrix<T> {
    let cols = y.cols();
    let mut dx = Matrix::zeros(y.rows(), cols);
    for g in 0..map.num_groups() {
        let members = map.group(g);
        for c in 0..cols {
            let mut dot = T::zero();
            for &p in members {
                dot += y.get(p, c) * grad.get(p, c);
            }
            for &p in members {
                dx.set(p, c, y.get(p, c) * (grad.get(p, c) - dot));
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_examples() {
        let x: Matrix<f64> = Matrix::from_rows(&[[1.0, 0.0], [3.0, 2.0]]);
        let map = SegmentMap::from_groups(&[vec![0, 1], vec![1]], 2).unwrap();
        let out = segment_mean(&x, &map).unwrap();
        assert_eq!(out, Matrix::from_rows(&[[2.0, 1.0], [3.0, 2.0]]));
    }

    #[test]
    fn sum_empty_and_duplicate() {
        let x: Matrix<f64> = Matrix::from_rows(&[[1.5, -2.0]]);
        let map = SegmentMap::from_groups(&[vec![], vec![0, 0]], 1).unwrap();
        let out = segment_sum(&x, &map).unwrap();
        assert_eq!(out, Matrix::from_rows(&[[0.0, 0.0], [3.0, -4.0]]));
        assert_eq!(
            segment_mean(&x, &map),
            Err(EngineError::EmptyGroup { group: 0 })
        );
    }

    #[test]
    fn invalid_maps() {
        assert!(matches!(
            SegmentMap::from_groups(&[vec![3]], 2),
            Err(EngineError::IndexOutOfRange { index: 3, len: 2 })
        ));
        assert!(SegmentMap::new(vec![0, 2, 1], vec![0], 1).is_err());
    }

    #[test]
    fn softmax_examples() {
        let s: Matrix<f64> = Matrix::from_rows(&[[0.3], [0.0], [0.0]]);
        let map = SegmentMap::contiguous(vec![0, 1, 3]).unwrap();
        let y = segment_softmax(&s, &map).unwrap();
        assert_eq!(y.get(0, 0), 1.0);
        assert_eq!((y.get(1, 0), y.get(2, 0)), (0.5, 0.5));
    }

    #[test]
    fn softmax_shift_invariant() {
        let s: Matrix<f64> = Matrix::from_rows(&[[0.3], [-1.2], [2.5], [0.1]]);
        let map = SegmentMap::from_groups(&[vec![0, 2], vec![1, 3]], 4).unwrap();
        let shifted = s.map(|v| v + 17.25);
        let a = segment_softmax(&s, &map).unwrap();
        let b = segment_softmax(&shifted, &map).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rejects_overlapping_groups() {
        let s: Matrix<f64> = Matrix::zeros(2, 1);
        let map = SegmentMap::from_groups(&[vec![0, 1], vec![1]], 2).unwrap();
        assert!(matches!(
            segment_softmax(&s, &map),
            Err(EngineError::InvalidSegmentMap(_))
        ));
    }
}
