/// Running mean and variance per coordinate (Welford).
#[derive(Debug, Clone, PartialEq)]
pub struct RunningNormalizer {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-8;

impl RunningNormalizer {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn update(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population variance (zero before any update).
    pub fn variance(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![0.0; self.mean.len()];
        }
        self.m2.iter().map(|s| s / self.count as f64).collect()
    }

    pub fn std(&self) -> Vec<f64> {
        self.variance().into_iter().map(|v| v.sqrt().max(STD_FLOOR)).collect()
    }

    /// `(x - mean) / max(std, 1e-8)`. Before any update this is the identity.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        if self.count == 0 {
            return x.to_vec();
        }
        let n = self.count as f64;
        x.iter()
            .zip(&self.mean)
            .zip(&self.m2)
            .map(|((v, m), s)| (v - m) / (s / n).sqrt().max(STD_FLOOR))
            .collect()
    }
}
