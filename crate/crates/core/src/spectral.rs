//! Zero-padded forward FFTs over the rows of a frame.

use std::cell::RefCell;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Cached forward plan of length `len` for the calling thread.
pub(crate) fn forward_plan(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

/// Forward DFT of every row of `input`, each zero-padded to `len`:
/// `out[i][k] = sum_m input[i][m] exp(-j 2 pi k m / len)`.
pub(crate) fn rows_forward(input: &Array2<Complex64>, len: usize) -> Array2<Complex64> {
    let (rows, cols) = input.dim();
    assert!(len >= cols, "padding length {len} shorter than rows of {cols}");
    let mut buf = vec![Complex64::default(); rows * len];
    for (dst, src) in buf.chunks_exact_mut(len).zip(input.rows()) {
        for (d, s) in dst.iter_mut().zip(src.iter()) {
            *d = *s;
        }
    }
    if rows > 0 {
        forward_plan(len).process(&mut buf);
    }
    Array2::from_shape_vec((rows, len), buf).expect("buffer sized rows * len")
}

/// Forward DFT of every column of `input`, each zero-padded to `len`.
pub(crate) fn cols_forward(input: &Array2<Complex64>, len: usize) -> Array2<Complex64> {
    let t = input.t().to_owned();
    rows_forward(&t, len).reversed_axes().as_standard_layout().into_owned()
}
