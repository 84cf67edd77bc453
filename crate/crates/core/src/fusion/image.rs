//! Region pooling and the trainable image adapter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{DenseMatrix, DenseVector, Real, SeededRng};

/// Default adapter kernel length.
pub const DEFAULT_KERNEL_LEN: usize = 9;

/// Per-region image vectors for one sample, one row per region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionStack<T = f32> {
    regions: DenseMatrix<T>,
}

impl<T: Real> RegionStack<T> {
    pub fn new(regions: DenseMatrix<T>) -> Result<Self> {
        if regions.rows() == 0 {
            return Err(Error::shape("region stack rows", 1, 0));
        }
        if regions.cols() == 0 {
            return Err(Error::shape("region stack width", 1, 0));
        }
        Ok(RegionStack { regions })
    }

    pub fn from_flat(n_regions: usize, dim: usize, values: Vec<T>) -> Result<Self> {
        Self::new(DenseMatrix::new(n_regions, dim, values)?)
    }

    pub fn n_regions(&self) -> usize {
        self.regions.rows()
    }

    pub fn dim(&self) -> usize {
        self.regions.cols()
    }

    pub fn regions(&self) -> &DenseMatrix<T> {
        &self.regions
    }
}

/// Mean of all region vectors, accumulated in row order.
pub fn region_average<T: Real>(stack: &RegionStack<T>) -> DenseVector<T> {
    let n = stack.n_regions();
    let mut sums = vec![T::zero(); stack.dim()];
    for r in 0..n {
        for (s, &v) in sums.iter_mut().zip(stack.regions.row(r)) {
            *s = *s + v;
        }
    }
    let count = T::lit(n as f64);
    DenseVector::new(sums.into_iter().map(|s| s / count).collect())
}

/// Single-channel same-padded 1D convolution followed by non-overlapping max
/// pooling, mapping a pooled image vector of `input_dim` onto `target_dim`.
///
/// The pooling window is `ceil(input_dim / target_dim)`; outputs beyond the
/// last window are zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct ImageAdapter<T = f32> {
    pub kernel: DenseVector<T>,
    input_dim: usize,
    target_dim: usize,
    pool_window: usize,
    #[serde(skip)]
    grad_kernel: Option<DenseVector<T>>,
}

impl<T: PartialEq> PartialEq for ImageAdapter<T> {
    fn eq(&self, other: &Self) -> bool {
        self.kernel == other.kernel
            && self.input_dim == other.input_dim
            && self.target_dim == other.target_dim
            && self.pool_window == other.pool_window
    }
}

/// Forward-pass bookkeeping needed by [`ImageAdapter::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterCache {
    /// Convolution position selected by each output, `None` for padding.
    pub argmax: Vec<Option<usize>>,
    /// Smallest gap between a window's maximum and its runner-up.
    pub min_pool_gap: f64,
}

impl<T: Real> ImageAdapter<T> {
    pub fn with_kernel(kernel: DenseVector<T>, input_dim: usize, target_dim: usize) -> Result<Self> {
        if kernel.dim() == 0 || kernel.dim().is_multiple_of(2) {
            return Err(Error::config(format!(
                "adapter kernel length must be odd, got {}",
                kernel.dim()
            )));
        }
        if target_dim == 0 {
            return Err(Error::config("adapter target dimension must be positive"));
        }
        if input_dim < target_dim {
            return Err(Error::config(format!(
                "image dimension {input_dim} is smaller than adapter target {target_dim}"
            )));
        }
        let pool_window = input_dim.div_ceil(target_dim);
        let k = kernel.dim();
        Ok(ImageAdapter {
            kernel,
            input_dim,
            target_dim,
            pool_window,
            grad_kernel: Some(DenseVector::zeros(k)),
        })
    }

    /// Kernel entries uniform in `[-1/sqrt(k), 1/sqrt(k)]`.
    pub fn init_uniform(
        kernel_len: usize,
        input_dim: usize,
        target_dim: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let bound = 1.0 / (kernel_len.max(1) as f64).sqrt();
        let kernel = (0..kernel_len).map(|_| T::lit(rng.uniform(-bound, bound))).collect();
        Self::with_kernel(DenseVector::new(kernel), input_dim, target_dim)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn pool_window(&self) -> usize {
        self.pool_window
    }

    fn convolve(&self, x: &[T]) -> Vec<T> {
        let k = self.kernel.as_slice();
        let half = k.len() / 2;
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut acc = T::zero();
                for (t, &w) in k.iter().enumerate() {
                    // Input index i + t - half, zero outside [0, n).
                    if let Some(j) = (i + t).checked_sub(half).filter(|&j| j < n) {
                        acc = acc + w * x[j];
                    }
                }
                acc
            })
            .collect()
    }

    pub fn forward(&self, p_raw: &DenseVector<T>) -> Result<(DenseVector<T>, AdapterCache)> {
        if p_raw.dim() != self.input_dim {
            return Err(Error::shape("image adapter input", self.input_dim, p_raw.dim()));
        }
        let conv = self.convolve(p_raw.as_slice());
        let mut out = vec![T::zero(); self.target_dim];
        let mut argmax = vec![None; self.target_dim];
        let mut min_gap = f64::INFINITY;
        for (o, window) in conv.chunks(self.pool_window).enumerate().take(self.target_dim) {
            let start = o * self.pool_window;
            let mut best = 0;
            for (i, &v) in window.iter().enumerate() {
                if v > window[best] {
                    best = i;
                }
            }
            for (i, &v) in window.iter().enumerate() {
                if i != best {
                    min_gap = min_gap.min((window[best] - v).as_f64());
                }
            }
            out[o] = window[best];
            argmax[o] = Some(start + best);
        }
        Ok((
            DenseVector::new(out),
            AdapterCache {
                argmax,
                min_pool_gap: min_gap,
            },
        ))
    }

    /// Accumulates the kernel gradient. The input is a frozen embedding, so
    /// no input gradient is produced.
    pub fn backward(&mut self, p_raw: &DenseVector<T>, cache: &AdapterCache, grad_out: &DenseVector<T>) -> Result<()> {
        if grad_out.dim() != self.target_dim {
            return Err(Error::shape("image adapter backward", self.target_dim, grad_out.dim()));
        }
        if p_raw.dim() != self.input_dim {
            return Err(Error::shape("image adapter input", self.input_dim, p_raw.dim()));
        }
        let x = p_raw.as_slice();
        let n = x.len();
        let half = self.kernel.dim() / 2;
        let k_len = self.kernel.dim();
        let grad_kernel = self.grad_kernel.get_or_insert_with(|| DenseVector::zeros(k_len));
        for (o, pos) in cache.argmax.iter().enumerate() {
            let Some(i) = *pos else { continue };
            let g = grad_out[o];
            for t in 0..k_len {
                if let Some(j) = (i + t).checked_sub(half).filter(|&j| j < n) {
                    grad_kernel[t] = grad_kernel[t] + g * x[j];
                }
            }
        }
        Ok(())
    }

    pub fn grad_kernel(&mut self) -> &DenseVector<T> {
        let k = self.kernel.dim();
        self.grad_kernel.get_or_insert_with(|| DenseVector::zeros(k))
    }

    pub fn zero_grad(&mut self) {
        let k = self.kernel.dim();
        self.grad_kernel.get_or_insert_with(|| DenseVector::zeros(k)).fill_zero();
    }

    pub fn cast<U: Real>(&self) -> ImageAdapter<U> {
        ImageAdapter::with_kernel(self.kernel.cast(), self.input_dim, self.target_dim)
            .expect("validated adapter")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::grad_check;

    fn delta(k: usize) -> DenseVector<f64> {
        let mut v = DenseVector::zeros(k);
        v[k / 2] = 1.0;
        v
    }

    #[test]
    fn region_average_small_cases() {
        let r = RegionStack::from_flat(2, 3, vec![1.0f32, -2.0, 3.5, 1.0, -2.0, 3.5]).unwrap();
        assert_eq!(region_average(&r).as_slice(), &[1.0, -2.0, 3.5]);
        let r = RegionStack::from_flat(2, 2, vec![0.0f32, 0.0, 2.0, 4.0]).unwrap();
        assert_eq!(region_average(&r).as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn empty_stack_rejected() {
        assert!(matches!(
            RegionStack::<f32>::from_flat(0, 4, vec![]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn region_average_matches_brute_force() {
        let mut rng = SeededRng::new(4, "regions");
        let values: Vec<f32> = (0..256 * 16).map(|_| rng.normal() as f32).collect();
        let stack = RegionStack::from_flat(256, 16, values.clone()).unwrap();
        let avg = region_average(&stack);
        for j in 0..16 {
            let mean = (0..256).map(|i| values[i * 16 + j] as f64).sum::<f64>() / 256.0;
            assert!((avg[j] as f64 - mean).abs() < 1e-6, "col {j}");
        }
    }

    #[test]
    fn delta_kernel_identity() {
        let a = ImageAdapter::with_kernel(delta(9), 6, 6).unwrap();
        assert_eq!(a.pool_window(), 1);
        let x = DenseVector::new(vec![0.5, -1.0, 2.0, 3.0, -4.0, 0.25]);
        assert_eq!(a.forward(&x).unwrap().0, x);
    }

    #[test]
    fn zero_kernel_zero_output() {
        let a = ImageAdapter::with_kernel(DenseVector::<f64>::zeros(9), 10, 4).unwrap();
        let x = DenseVector::new((0..10).map(|i| i as f64 - 3.0).collect());
        assert!(a.forward(&x).unwrap().0.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn delta_kernel_hand_pooling() {
        let a = ImageAdapter::with_kernel(delta(9), 8, 4).unwrap();
        assert_eq!(a.pool_window(), 2);
        let x = DenseVector::new(vec![1.0, 5.0, 2.0, 4.0, 3.0, 3.0, 6.0, 0.0]);
        let (y, cache) = a.forward(&x).unwrap();
        assert_eq!(y.as_slice(), &[5.0, 4.0, 3.0, 6.0]);
        // Tie in the third window resolves to the lower index.
        assert_eq!(cache.argmax, vec![Some(1), Some(3), Some(4), Some(6)]);
        assert_eq!(cache.min_pool_gap, 0.0);
    }

    #[test]
    fn short_last_window_and_padding() {
        // 9 inputs onto 4 outputs: window 3, three windows, one zero pad.
        let a = ImageAdapter::with_kernel(delta(3), 9, 4).unwrap();
        let x = DenseVector::new(vec![1.0, 2.0, 3.0, -1.0, -2.0, -3.0, 7.0, 8.0, 9.0]);
        let (y, cache) = a.forward(&x).unwrap();
        assert_eq!(y.as_slice(), &[3.0, -1.0, 9.0, 0.0]);
        assert_eq!(cache.argmax[3], None);
    }

    #[test]
    fn too_small_input_is_config_error() {
        assert!(matches!(
            ImageAdapter::with_kernel(delta(9), 3, 4),
            Err(Error::Config(_))
        ));
        assert!(ImageAdapter::with_kernel(DenseVector::<f64>::zeros(4), 8, 4).is_err());
    }

    #[test]
    fn kernel_gradient_matches_finite_differences() {
        let mut rng = SeededRng::new(8, "adapter");
        let x = DenseVector::new((0..32).map(|_| rng.normal()).collect::<Vec<f64>>());
        let weights: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
        let mut kernel_rng = SeededRng::new(8, "kernel");
        let base = ImageAdapter::<f64>::init_uniform(9, 32, 8, &mut kernel_rng).unwrap();
        let (_, cache) = base.forward(&x).unwrap();
        assert!(cache.min_pool_gap > 1e-2, "choose another seed: kink too close");
        let report = grad_check(base.kernel.as_slice(), 1e-3, |k| {
            let mut a = ImageAdapter::with_kernel(DenseVector::new(k.to_vec()), 32, 8)?;
            let (y, cache) = a.forward(&x)?;
            let loss = y.as_slice().iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>();
            a.backward(&x, &cache, &DenseVector::new(weights.clone()))?;
            Ok((loss, a.grad_kernel().clone().into_vec()))
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }
}
