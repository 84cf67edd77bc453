use serde::{Deserialize, Serialize};

use super::{DenseMatrix, DenseVector, Real, SeededRng};
use crate::error::{Error, Result};

/// Fully connected layer `y = W x + b` with gradient buffers.
///
/// `weight` is `[out x in]`, row-major. Gradients accumulate across calls to
/// [`LinearLayer::backward`] until [`LinearLayer::zero_grad`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct LinearLayer<T = f32> {
    pub weight: DenseMatrix<T>,
    pub bias: DenseVector<T>,
    #[serde(skip)]
    grad_weight: Option<DenseMatrix<T>>,
    #[serde(skip)]
    grad_bias: Option<DenseVector<T>>,
}

// Equality covers parameters only, not gradient buffers.
impl<T: PartialEq> PartialEq for LinearLayer<T> {
    fn eq(&self, other: &Self) -> bool {
        self.weight == other.weight && self.bias == other.bias
    }
}

impl<T: Real> LinearLayer<T> {
    pub fn from_parts(weight: DenseMatrix<T>, bias: DenseVector<T>) -> Result<Self> {
        if bias.dim() != weight.rows() {
            return Err(Error::shape("linear bias", weight.rows(), bias.dim()));
        }
        let grad_weight = DenseMatrix::zeros(weight.rows(), weight.cols());
        let grad_bias = DenseVector::zeros(bias.dim());
        Ok(LinearLayer {
            weight,
            bias,
            grad_weight: Some(grad_weight),
            grad_bias: Some(grad_bias),
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self::from_parts(DenseMatrix::zeros(out_dim, in_dim), DenseVector::zeros(out_dim))
            .expect("consistent shapes")
    }

    /// Weights and biases uniform in `[-1/sqrt(in), 1/sqrt(in)]`.
    pub fn init_uniform(in_dim: usize, out_dim: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut draw = || T::lit(rng.uniform(-bound, bound));
        let weight: Vec<T> = (0..in_dim * out_dim).map(|_| draw()).collect();
        let bias: Vec<T> = (0..out_dim).map(|_| draw()).collect();
        Self::from_parts(
            DenseMatrix::new(out_dim, in_dim, weight).expect("consistent shapes"),
            DenseVector::new(bias),
        )
        .expect("consistent shapes")
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &DenseVector<T>) -> Result<DenseVector<T>> {
        let cols = self.in_dim();
        if x.dim() != cols {
            return Err(Error::shape("linear input", cols, x.dim()));
        }
        let rows = self.out_dim();
        let w = self.weight.as_slice();
        let x = x.as_slice();
        let b = self.bias.as_slice();
        let mut out = vec![T::zero(); rows];

        // Four rows at a time: each accumulator still sums its own row in
        // column order, so the result equals the plain row-by-row loop.
        let mut i = 0;
        while i + 4 <= rows {
            let r0 = &w[i * cols..(i + 1) * cols];
            let r1 = &w[(i + 1) * cols..(i + 2) * cols];
            let r2 = &w[(i + 2) * cols..(i + 3) * cols];
            let r3 = &w[(i + 3) * cols..(i + 4) * cols];
            let (mut a0, mut a1, mut a2, mut a3) = (T::zero(), T::zero(), T::zero(), T::zero());
            for j in 0..cols {
                let xj = x[j];
                a0 = a0 + r0[j] * xj;
                a1 = a1 + r1[j] * xj;
                a2 = a2 + r2[j] * xj;
                a3 = a3 + r3[j] * xj;
            }
            out[i] = a0 + b[i];
            out[i + 1] = a1 + b[i + 1];
            out[i + 2] = a2 + b[i + 2];
            out[i + 3] = a3 + b[i + 3];
            i += 4;
        }
        for r in i..rows {
            let row = &w[r * cols..(r + 1) * cols];
            let mut acc = T::zero();
            for j in 0..cols {
                acc = acc + row[j] * x[j];
            }
            out[r] = acc + b[r];
        }
        Ok(DenseVector::new(out))
    }

    /// Returns the gradient with respect to `x` and accumulates parameter
    /// gradients.
    pub fn backward(&mut self, x: &DenseVector<T>, grad_out: &DenseVector<T>) -> Result<DenseVector<T>> {
        let (rows, cols) = (self.out_dim(), self.in_dim());
        if x.dim() != cols {
            return Err(Error::shape("linear backward input", cols, x.dim()));
        }
        if grad_out.dim() != rows {
            return Err(Error::shape("linear backward upstream gradient", rows, grad_out.dim()));
        }
        self.ensure_grads();
        let w = self.weight.as_slice();
        let g = grad_out.as_slice();
        let xs = x.as_slice();
        let mut grad_x = vec![T::zero(); cols];
        let gw = self.grad_weight.as_mut().expect("grad buffers").as_mut_slice();
        let gb = self.grad_bias.as_mut().expect("grad buffers").as_mut_slice();
        for i in 0..rows {
            let gi = g[i];
            let row = &w[i * cols..(i + 1) * cols];
            for (gx, &wij) in grad_x.iter_mut().zip(row) {
                *gx = *gx + wij * gi;
            }
            let grow = &mut gw[i * cols..(i + 1) * cols];
            for (gwij, &xj) in grow.iter_mut().zip(xs) {
                *gwij = *gwij + gi * xj;
            }
            gb[i] = gb[i] + gi;
        }
        Ok(DenseVector::new(grad_x))
    }

    pub fn grad_weight(&self) -> Option<&DenseMatrix<T>> {
        self.grad_weight.as_ref()
    }

    pub fn grad_bias(&self) -> Option<&DenseVector<T>> {
        self.grad_bias.as_ref()
    }

    pub fn zero_grad(&mut self) {
        self.ensure_grads();
        if let Some(g) = self.grad_weight.as_mut() {
            g.fill_zero();
        }
        if let Some(g) = self.grad_bias.as_mut() {
            g.fill_zero();
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.as_slice().len() + self.bias.dim()
    }

    /// Parameter slices in a fixed order: weight, then bias.
    pub fn params_mut(&mut self) -> [&mut [T]; 2] {
        [self.weight.as_mut_slice(), self.bias.as_mut_slice()]
    }

    pub fn params(&self) -> [&[T]; 2] {
        [self.weight.as_slice(), self.bias.as_slice()]
    }

    /// Gradient slices matching [`LinearLayer::params_mut`].
    pub fn grads(&mut self) -> [&[T]; 2] {
        self.ensure_grads();
        [
            self.grad_weight.as_ref().expect("grad buffers").as_slice(),
            self.grad_bias.as_ref().expect("grad buffers").as_slice(),
        ]
    }

    pub fn cast<U: Real>(&self) -> LinearLayer<U> {
        LinearLayer::from_parts(self.weight.cast(), self.bias.cast()).expect("consistent shapes")
    }

    // Buffers are skipped by serde and rebuilt lazily after loading.
    fn ensure_grads(&mut self) {
        if self.grad_weight.is_none() {
            self.grad_weight = Some(DenseMatrix::zeros(self.out_dim(), self.in_dim()));
        }
        if self.grad_bias.is_none() {
            self.grad_bias = Some(DenseVector::zeros(self.out_dim()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{grad_check, SeededRng};

    fn layer(rows: &[Vec<f32>], bias: Vec<f32>) -> LinearLayer<f32> {
        LinearLayer::from_parts(DenseMatrix::from_rows(rows).unwrap(), DenseVector::new(bias)).unwrap()
    }

    #[test]
    fn identity_weight_passes_input() {
        let l = LinearLayer::from_parts(DenseMatrix::identity(2), DenseVector::zeros(2)).unwrap();
        let y = l.forward(&DenseVector::new(vec![3.0f32, -1.0])).unwrap();
        assert_eq!(y.as_slice(), &[3.0, -1.0]);
    }

    #[test]
    fn zero_input_returns_bias() {
        let l = layer(&[vec![0.3, -2.0], vec![1.5, 4.0]], vec![5.0, 7.0]);
        let y = l.forward(&DenseVector::zeros(2)).unwrap();
        assert_eq!(y.as_slice(), &[5.0, 7.0]);
    }

    #[test]
    fn hand_matrix_vector() {
        // [[1,2],[3,4]] . [1,1] + [1,1] = [4, 8]
        let l = layer(&[vec![1.0, 2.0], vec![3.0, 4.0]], vec![1.0, 1.0]);
        let y = l.forward(&DenseVector::new(vec![1.0, 1.0])).unwrap();
        assert_eq!(y.as_slice(), &[4.0, 8.0]);
    }

    #[test]
    fn blocked_forward_matches_naive_bitwise() {
        let mut rng = SeededRng::new(3, "init");
        let l: LinearLayer<f32> = LinearLayer::init_uniform(13, 11, &mut rng);
        let x = DenseVector::new((0..13).map(|i| (i as f32 * 0.37).sin()).collect());
        let y = l.forward(&x).unwrap();
        for r in 0..11 {
            let mut acc = 0.0f32;
            for j in 0..13 {
                acc += l.weight.get(r, j) * x[j];
            }
            assert_eq!((acc + l.bias[r]).to_bits(), y[r].to_bits());
        }
    }

    #[test]
    fn dimension_mismatch_names_dims() {
        let l: LinearLayer<f32> = LinearLayer::zeros(3, 2);
        let err = l.forward(&DenseVector::zeros(4)).unwrap_err();
        assert!(matches!(err, Error::Shape { expected: 3, actual: 4, .. }), "{err}");
    }

    #[test]
    fn zero_upstream_gradient_changes_nothing() {
        let mut l = layer(&[vec![1.0, 2.0], vec![3.0, 4.0]], vec![1.0, 1.0]);
        let gx = l.backward(&DenseVector::new(vec![0.5, -0.5]), &DenseVector::zeros(2)).unwrap();
        assert!(gx.as_slice().iter().all(|&v| v == 0.0));
        assert!(l.grad_weight().unwrap().as_slice().iter().all(|&v| v == 0.0));
        assert!(l.grad_bias().unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_backward_passes_gradient() {
        let mut l = LinearLayer::from_parts(DenseMatrix::identity(3), DenseVector::zeros(3)).unwrap();
        let g = DenseVector::new(vec![0.25f32, -1.0, 2.0]);
        let gx = l.backward(&DenseVector::new(vec![1.0, 2.0, 3.0]), &g).unwrap();
        assert_eq!(gx, g);
    }

    #[test]
    fn backward_accumulates() {
        let mut l = layer(&[vec![1.0, 2.0]], vec![0.0]);
        let x = DenseVector::new(vec![3.0, 4.0]);
        let g = DenseVector::new(vec![2.0]);
        l.backward(&x, &g).unwrap();
        l.backward(&x, &g).unwrap();
        assert_eq!(l.grad_weight().unwrap().as_slice(), &[12.0, 16.0]);
        assert_eq!(l.grad_bias().unwrap().as_slice(), &[4.0]);
        l.zero_grad();
        assert_eq!(l.grad_weight().unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn random_layer_matches_finite_differences() {
        // Loss L = sum_i c_i * y_i with y = W x + b, checked over W, b and x.
        let mut rng = SeededRng::new(11, "init");
        let base: LinearLayer<f64> = LinearLayer::init_uniform(2, 3, &mut rng);
        let c = [0.7, -1.3, 0.4];
        let mut params: Vec<f64> = base.weight.as_slice().to_vec();
        params.extend_from_slice(base.bias.as_slice());
        params.extend_from_slice(&[0.9, -0.2]);
        let report = grad_check(&params, 1e-3, |p| {
            let mut l = LinearLayer::from_parts(
                DenseMatrix::new(3, 2, p[..6].to_vec())?,
                DenseVector::new(p[6..9].to_vec()),
            )?;
            let x = DenseVector::new(p[9..].to_vec());
            let y = l.forward(&x)?;
            let loss = (0..3).map(|i| c[i] * y[i]).sum::<f64>();
            let gx = l.backward(&x, &DenseVector::new(c.to_vec()))?;
            let mut grad = l.grad_weight().unwrap().as_slice().to_vec();
            grad.extend_from_slice(l.grad_bias().unwrap().as_slice());
            grad.extend_from_slice(gx.as_slice());
            Ok((loss, grad))
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}
