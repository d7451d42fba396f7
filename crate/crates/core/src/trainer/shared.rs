//! Shared mutable matrix storage for conflict-free parallel updates.
//!
//! Within one training batch every worker owns exactly one (context,
//! word) entry and therefore exclusive access to one dictionary row and
//! one code column; batch construction guarantees the slices are
//! pairwise disjoint, which is what makes the aliasing below sound.

use std::cell::UnsafeCell;

/// A dense matrix whose fixed-stride slices can be borrowed mutably from
/// several threads at once.
///
/// # Safety contract
///
/// Callers of [`slice_mut_unchecked`](SharedSlices::slice_mut_unchecked)
/// must ensure that no two concurrently live slices use the same index.
pub struct SharedSlices {
    data: UnsafeCell<Vec<f64>>,
    stride: usize,
    count: usize,
}

unsafe impl Sync for SharedSlices {}

impl SharedSlices {
    pub fn new(data: Vec<f64>, stride: usize) -> Self {
        assert!(stride > 0 && data.len() % stride == 0);
        let count = data.len() / stride;
        SharedSlices {
            data: UnsafeCell::new(data),
            stride,
            count,
        }
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Mutable view of slice `idx`.
    ///
    /// # Safety
    ///
    /// No other live reference (shared or mutable) may overlap slice
    /// `idx` for the lifetime of the returned borrow.
    #[allow(clippy::mut_from_ref)]
    pub unsafe fn slice_mut_unchecked(&self, idx: usize) -> &mut [f64] {
        debug_assert!(idx < self.count);
        let vec = &mut *self.data.get();
        let start = idx * self.stride;
        std::slice::from_raw_parts_mut(vec.as_mut_ptr().add(start), self.stride)
    }

    /// Exclusive view of the whole buffer.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        self.data.get_mut().as_mut_slice()
    }

    pub fn as_slice(&mut self) -> &[f64] {
        self.data.get_mut().as_slice()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.data.into_inner()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rayon::prelude::*;

    #[test]
    fn disjoint_parallel_writes() {
        let shared = SharedSlices::new(vec![0.0; 64 * 8], 8);
        (0..64usize).into_par_iter().for_each(|i| {
            let row = unsafe { shared.slice_mut_unchecked(i) };
            for (j, x) in row.iter_mut().enumerate() {
                *x = (i * 8 + j) as f64;
            }
        });
        let data = shared.into_inner();
        for (i, x) in data.iter().enumerate() {
            assert_eq!(*x, i as f64);
        }
    }
}
