use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Rng;

use super::trial_rng;

/// Minimum `|det W|` accepted for an affine map.
pub const DET_FLOOR: f64 = 1e-9;

/// Multivariate Gaussian with a full, symmetric positive definite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FullGaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl FullGaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || cov.shape() != (d, d) {
            return Err(Error::Config(format!("covariance must be {d}x{d}")));
        }
        let asym = (&cov - cov.transpose()).abs().max();
        if !(asym <= 1e-12 * cov.abs().max().max(1.0)) {
            return Err(Error::Domain("covariance is not symmetric".into()));
        }
        if cov.clone().cholesky().is_none() {
            return Err(Error::Domain("covariance is not positive definite".into()));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `x ↦ W x + b` with square, invertible `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl AffineMap {
    pub fn new(w: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::Domain(format!("map must be square, got {}x{}", w.nrows(), w.ncols())));
        }
        if w.nrows() != b.len() {
            return Err(Error::Config("offset length does not match the map".into()));
        }
        let det = w.determinant();
        if !(det.abs() > DET_FLOOR) {
            return Err(Error::Domain(format!("map is singular (det = {det:e})")));
        }
        Ok(Self { w, b })
    }

    /// Distribution of `W x + b` for `x ~ p`.
    pub fn push_forward(&self, p: &FullGaussian) -> Result<FullGaussian> {
        if p.dim() != self.b.len() {
            return Err(Error::Config("map and distribution dimensions differ".into()));
        }
        let cov = &self.w * &p.cov * self.w.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        FullGaussian::new(&self.w * &p.mean + &self.b, cov)
    }
}

/// `KL(p ‖ q) = ½ (ln det Σ_q − ln det Σ_p + tr(Σ_q⁻¹ Σ_p) + Δᵀ Σ_q⁻¹ Δ − k)`.
pub fn kl_full(p: &FullGaussian, q: &FullGaussian) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::Config("KL between Gaussians of different dimension".into()));
    }
    let chol_p = p.cov.clone().cholesky().ok_or_else(|| Error::Domain("p covariance not positive definite".into()))?;
    let chol_q = q.cov.clone().cholesky().ok_or_else(|| Error::Domain("q covariance not positive definite".into()))?;
    let log_det = |l: &DMatrix<f64>| 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let trace = chol_q.solve(&p.cov).trace();
    let diff = &q.mean - &p.mean;
    let quad = diff.dot(&chol_q.solve(&diff));
    let kl = 0.5 * (log_det(&chol_q.l()) - log_det(&chol_p.l()) + trace + quad - p.dim() as f64);
    if !kl.is_finite() {
        return Err(Error::Numeric("full-covariance KL".into()));
    }
    Ok(kl.max(0.0))
}

/// `(KL(p ‖ q), KL(map(p) ‖ map(q)))`.
pub fn kl_affine_invariance(p: &FullGaussian, q: &FullGaussian, map: &AffineMap) -> Result<(f64, f64)> {
    Ok((kl_full(p, q)?, kl_full(&map.push_forward(p)?, &map.push_forward(q)?)?))
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn random_orthogonal(d: usize, rng: &mut Rng) -> DMatrix<f64> {
    gaussian_matrix(d, d, rng).qr().q()
}

/// `Q₁ diag(s) Q₂` with singular values in `[0.5, 2]` and random signs.
pub fn random_affine_map(d: usize, rng: &mut Rng) -> AffineMap {
    let scale = Uniform::new(0.5, 2.0).expect("valid range");
    let s = DVector::from_fn(d, |_, _| {
        let v: f64 = scale.sample(rng);
        let z: f64 = StandardNormal.sample(rng);
        if z < 0.0 { -v } else { v }
    });
    let w = random_orthogonal(d, rng) * DMatrix::from_diagonal(&s) * random_orthogonal(d, rng);
    let b = DVector::from_fn(d, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        3.0 * z
    });
    AffineMap::new(w, b).expect("singular values are bounded away from zero")
}

/// `A Aᵀ / d + 0.2 I` and a standard normal mean.
pub fn random_gaussian(d: usize, rng: &mut Rng) -> FullGaussian {
    let a = gaussian_matrix(d, d, rng);
    let cov = &a * a.transpose() / d as f64 + DMatrix::identity(d, d) * 0.2;
    let cov = (&cov + cov.transpose()) * 0.5;
    let mean = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
    FullGaussian::new(mean, cov).expect("shifted Gram matrix is positive definite")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub trials: usize,
    pub dims: Vec<usize>,
    pub tolerance: f64,
    pub max_abs_diff: f64,
    pub failures: usize,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// `trials` random cases, cycling through `dims`.
pub fn run_kl_invariance(trials: usize, dims: &[usize], seed: u64) -> Result<InvarianceReport> {
    if trials == 0 || dims.is_empty() || dims.contains(&0) {
        return Err(Error::Usage("need at least one trial and positive dimensions".into()));
    }
    let tolerance = 1e-8;
    let mut max_abs_diff = 0.0f64;
    let mut failures = 0;
    for i in 0..trials {
        let d = dims[i % dims.len()];
        let mut rng = trial_rng(seed, i as u64);
        let p = random_gaussian(d, &mut rng);
        let q = random_gaussian(d, &mut rng);
        let map = random_affine_map(d, &mut rng);
        let (before, after) = kl_affine_invariance(&p, &q, &map)?;
        let diff = (before - after).abs();
        max_abs_diff = max_abs_diff.max(diff);
        failures += (!(diff < tolerance)) as usize;
    }
    Ok(InvarianceReport {
        trials,
        dims: dims.to_vec(),
        tolerance,
        max_abs_diff,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn scalar(m: f64, v: f64) -> FullGaussian {
        FullGaussian::new(DVector::from_element(1, m), DMatrix::from_element(1, 1, v)).unwrap()
    }

    #[test]
    fn one_dimensional_case() {
        let map = AffineMap::new(DMatrix::from_element(1, 1, 3.0), DVector::from_element(1, 2.0)).unwrap();
        let (before, after) = kl_affine_invariance(&scalar(0.0, 1.0), &scalar(1.0, 1.0), &map).unwrap();
        assert!((before - 0.5).abs() < 1e-15);
        assert!((after - 0.5).abs() < 1e-14);
    }

    #[test]
    fn translation_only() {
        let mut rng = seeded_rng(1);
        let p = random_gaussian(3, &mut rng);
        let q = random_gaussian(3, &mut rng);
        let map = AffineMap::new(DMatrix::identity(3, 3), DVector::from_vec(vec![5.0, -2.0, 0.3])).unwrap();
        let (a, b) = kl_affine_invariance(&p, &q, &map).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn self_divergence_is_zero() {
        let mut rng = seeded_rng(2);
        let p = random_gaussian(4, &mut rng);
        assert!(kl_full(&p, &p).unwrap() < 1e-12);
    }

    #[test]
    fn matches_diagonal_closed_form() {
        let p = FullGaussian::new(DVector::from_vec(vec![0.0, 1.0]), DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]))).unwrap();
        let q = FullGaussian::new(DVector::from_vec(vec![1.0, 0.0]), DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]))).unwrap();
        let expected = crate::bnn::kl_scalar(0.0, 1.0, 1.0, 2f64.sqrt()) + crate::bnn::kl_scalar(1.0, 2.0, 0.0, 1.0);
        assert!((kl_full(&p, &q).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn refuses_singular_and_non_square_maps() {
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(AffineMap::new(singular, DVector::zeros(2)), Err(Error::Domain(_))));
        assert!(matches!(AffineMap::new(DMatrix::zeros(1, 2), DVector::zeros(1)), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(FullGaussian::new(DVector::zeros(2), cov), Err(Error::Domain(_))));
    }

    #[test]
    fn sweep_is_deterministic() {
        let a = run_kl_invariance(20, &[1, 2, 3], 9).unwrap();
        let b = run_kl_invariance(20, &[1, 2, 3], 9).unwrap();
        assert_eq!(a, b);
        assert!(a.passed());
    }
}
