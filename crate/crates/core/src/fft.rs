//! Thin wrapper around `rustfft` for square 1D/2D arrays.
//!
//! All transforms here are unnormalized and use the native FFT ordering
//! (zero frequency first). The unitary, monotone-ordered convention seen by
//! callers lives in [`crate::grid`].

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

fn plan(len: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match dir {
            Direction::Forward => p.plan_fft_forward(len),
            Direction::Inverse => p.plan_fft_inverse(len),
        }
    })
}

/// In-place unnormalized transform of an `n_axis^dim` row-major array.
pub fn transform(data: &mut [Complex64], n_axis: usize, dim: usize, dir: Direction) {
    debug_assert_eq!(data.len(), n_axis.pow(dim as u32));
    let fft = plan(n_axis, dir);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    match dim {
        1 => fft.process_with_scratch(data, &mut scratch),
        2 => {
            // rows are contiguous; columns go through a transpose
            fft.process_with_scratch(data, &mut scratch);
            transpose_square(data, n_axis);
            fft.process_with_scratch(data, &mut scratch);
            transpose_square(data, n_axis);
        }
        _ => unreachable!("only 1D and 2D grids are supported"),
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Signed integer frequency index of FFT bin `m` for an `n`-point transform.
#[inline]
pub fn signed_index(m: usize, n: usize) -> i64 {
    if m < n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}
