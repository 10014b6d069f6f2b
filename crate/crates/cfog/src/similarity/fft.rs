//! Square 2-D FFT built from rustfft row transforms, with per-thread plan
//! caching. Plans depend only on the transform size, so caching never
//! changes results.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Smallest 7-smooth size >= `n` (efficient FFT lengths).
pub fn next_fast_len(n: usize) -> usize {
    fn is_smooth(mut v: usize) -> bool {
        for p in [2usize, 3, 5, 7] {
            while v % p == 0 {
                v /= p;
            }
        }
        v == 1
    }
    let mut n = n.max(1);
    while !is_smooth(n) {
        n += 1;
    }
    n
}

/// Forward/inverse transforms for one square size.
pub struct Fft2 {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(size: usize) -> Fft2 {
        let (forward, inverse) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (p.plan_fft_forward(size), p.plan_fft_inverse(size))
        });
        Fft2 {
            size,
            forward,
            inverse,
        }
    }

    /// In-place 2-D forward transform of a `size*size` row-major buffer.
    pub fn forward(&self, buf: &mut [Complex<f64>]) {
        self.transform(buf, true);
    }

    /// In-place 2-D inverse transform (unnormalized: scale by `1/size^2`
    /// to invert a forward transform).
    pub fn inverse(&self, buf: &mut [Complex<f64>]) {
        self.transform(buf, false);
    }

    /// Normalization factor for one forward+inverse round trip.
    pub fn norm(&self) -> f64 {
        1.0 / (self.size * self.size) as f64
    }

    fn transform(&self, buf: &mut [Complex<f64>], fwd: bool) {
        let n = self.size;
        assert_eq!(buf.len(), n * n);
        let plan = if fwd { &self.forward } else { &self.inverse };
        // Rows in place.
        for row in buf.chunks_exact_mut(n) {
            plan.process(row);
        }
        // Columns via transpose, rows, transpose back.
        transpose_square(buf, n);
        for row in buf.chunks_exact_mut(n) {
            plan.process(row);
        }
        transpose_square(buf, n);
    }
}

fn transpose_square(buf: &mut [Complex<f64>], n: usize) {
    for y in 0..n {
        for x in (y + 1)..n {
            buf.swap(y * n + x, x * n + y);
        }
    }
}
