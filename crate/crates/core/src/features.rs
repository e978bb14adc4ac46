//! Linear state-action features `ψ(x, a) ∈ ℝ^d` and the excitation check.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureDocument {
    pub num_states: usize,
    pub num_actions: usize,
    pub dim: usize,
    /// Row-major: the d-vector of pair `x * A + a` starts at `(x * A + a) * d`.
    pub psi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeatureDocument", into = "FeatureDocument")]
pub struct FeatureMap {
    num_states: usize,
    num_actions: usize,
    dim: usize,
    psi: Vec<f64>,
    feature_bound: f64,
}

impl TryFrom<FeatureDocument> for FeatureMap {
    type Error = Error;
    fn try_from(doc: FeatureDocument) -> Result<Self> {
        FeatureMap::new(doc.num_states, doc.num_actions, doc.dim, doc.psi)
    }
}

impl From<FeatureMap> for FeatureDocument {
    fn from(f: FeatureMap) -> Self {
        FeatureDocument {
            num_states: f.num_states,
            num_actions: f.num_actions,
            dim: f.dim,
            psi: f.psi,
        }
    }
}

impl FeatureMap {
    pub fn new(num_states: usize, num_actions: usize, dim: usize, psi: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        if psi.len() != num_states * num_actions * dim {
            return Err(Error::Config(format!(
                "feature table has {} entries, expected {}",
                psi.len(),
                num_states * num_actions * dim
            )));
        }
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("feature entries must be finite".into()));
        }
        let feature_bound = psi
            .chunks(dim)
            .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Ok(Self {
            num_states,
            num_actions,
            dim,
            psi,
            feature_bound,
        })
    }

    /// One-hot features, `Ψ = I_{SA}`.
    pub fn tabular(num_states: usize, num_actions: usize) -> Self {
        let sa = num_states * num_actions;
        let mut psi = vec![0.0; sa * sa];
        for p in 0..sa {
            psi[p * sa + p] = 1.0;
        }
        Self::new(num_states, num_actions, sa, psi).expect("well-formed by construction")
    }

    /// Single all-ones column.
    pub fn constant(num_states: usize, num_actions: usize) -> Self {
        Self::new(num_states, num_actions, 1, vec![1.0; num_states * num_actions])
            .expect("well-formed by construction")
    }

    /// Grid features for an N×N DeepSea: the state (i, j) is the length-2N
    /// concatenation of one-hot(i) and one-hot(j), placed in the block of the
    /// chosen action, so d = 4N.
    pub fn deepsea(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("DeepSea size must be at least 1".into()));
        }
        let (s, a, d) = (n * n, 2, 4 * n);
        let mut psi = vec![0.0; s * a * d];
        for i in 0..n {
            for j in 0..n {
                let x = i * n + j;
                for act in 0..a {
                    let base = (x * a + act) * d + act * 2 * n;
                    psi[base + i] = 1.0;
                    psi[base + n + j] = 1.0;
                }
            }
        }
        Self::new(s, a, d, psi)
    }

    /// I.i.d. standard normal features.
    pub fn random<R: Rng + ?Sized>(num_states: usize, num_actions: usize, dim: usize, rng: &mut R) -> Result<Self> {
        use rand_distr::{Distribution, StandardNormal};
        let psi = (0..num_states * num_actions * dim)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        Self::new(num_states, num_actions, dim, psi)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn feature_bound(&self) -> f64 {
        self.feature_bound
    }

    #[inline]
    pub fn pair_feature(&self, pair: usize) -> &[f64] {
        &self.psi[pair * self.dim..(pair + 1) * self.dim]
    }

    #[inline]
    pub fn feature(&self, state: usize, action: usize) -> &[f64] {
        self.pair_feature(state * self.num_actions + action)
    }

    /// `Ψ` as an SA×d matrix.
    pub fn matrix(&self) -> Mat {
        Mat::from_row_slice(self.num_states * self.num_actions, self.dim, &self.psi)
    }

    /// `Ψ w` for every pair.
    pub fn evaluate(&self, weights: &[f64]) -> Vec<f64> {
        self.psi
            .chunks(self.dim)
            .map(|row| row.iter().zip(weights).map(|(f, w)| f * w).sum())
            .collect()
    }

    #[inline]
    pub fn value(&self, state: usize, action: usize, weights: &[f64]) -> f64 {
        self.feature(state, action)
            .iter()
            .zip(weights)
            .map(|(f, w)| f * w)
            .sum()
    }

    /// `Ψ^T D_ν Ψ`.
    pub fn moment_matrix(&self, nu: &[f64]) -> Result<Mat> {
        let sa = self.num_states * self.num_actions;
        if nu.len() != sa {
            return Err(Error::LengthMismatch {
                expected: sa,
                actual: nu.len(),
            });
        }
        let mut m = Mat::zeros(self.dim, self.dim);
        for (p, &w) in nu.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let f = Vector::from_row_slice(self.pair_feature(p));
            m.ger(w, &f, &f, 1.0);
        }
        Ok(m)
    }

    pub fn check_shape(&self, num_states: usize, num_actions: usize) -> Result<()> {
        if self.num_states != num_states || self.num_actions != num_actions {
            return Err(Error::Config(format!(
                "features are defined on {}x{} pairs but the MDP is {}x{}",
                self.num_states, self.num_actions, num_states, num_actions
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Orthonormal basis (d×r) of the row space of `Ψ`, i.e. the directions of
/// weight space that change `Ψw`.
pub fn row_space_basis(features: &FeatureMap) -> Mat {
    let svd = features.matrix().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = smax * 1e-10 * features.dim().max(features.num_states * features.num_actions) as f64;
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol)
        .collect();
    let mut basis = Mat::zeros(features.dim(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        basis.set_column(c, &v_t.row(i).transpose());
    }
    basis
}

/// Smallest eigenvalue of `Ψ^T D_ν Ψ` on the row space of `Ψ`.
///
/// For full-column-rank features this is `λ_min(Ψ^T D_ν Ψ)`. Weight
/// directions in the kernel of `Ψ` never change a value estimate and are
/// excluded, so grid features whose one-hot groups each sum to one can still
/// be excited.
pub fn excitation(features: &FeatureMap, nu: &[f64]) -> Result<f64> {
    let total: f64 = nu.iter().sum();
    if nu.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config("excitation weighting must be a probability vector".into()));
    }
    let m = features.moment_matrix(nu)?;
    let basis = row_space_basis(features);
    let restricted = basis.transpose() * m * &basis;
    let eig = restricted.symmetric_eigenvalues();
    Ok(eig.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabular_is_identity() {
        assert_eq!(FeatureMap::tabular(1, 1).matrix(), Mat::identity(1, 1));
        let f = FeatureMap::tabular(2, 2);
        assert_eq!(f.matrix(), Mat::identity(4, 4));
        let m = f.matrix();
        assert_eq!(m.transpose() * &m, Mat::identity(4, 4));
        assert_eq!(f.feature_bound(), 1.0);
    }

    #[test]
    fn deepsea_layout() {
        let f = FeatureMap::deepsea(1).unwrap();
        assert_eq!(f.dim(), 4);
        assert_eq!(f.feature(0, 0), &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(f.feature(0, 1), &[0.0, 0.0, 1.0, 1.0]);

        let f = FeatureMap::deepsea(4).unwrap();
        let v = f.feature(2 * 4 + 3, 1);
        let ones: Vec<usize> = v.iter().enumerate().filter(|(_, &x)| x == 1.0).map(|(i, _)| i).collect();
        assert_eq!(ones, vec![8 + 2, 8 + 4 + 3]);
        for p in 0..32 {
            let row = f.pair_feature(p);
            assert_eq!(row.iter().filter(|&&x| x == 1.0).count(), 2);
            assert_eq!(row.iter().filter(|&&x| x == 0.0).count(), 14);
        }
        assert!((f.feature_bound() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn excitation_tabular_uniform() {
        let f = FeatureMap::tabular(3, 2);
        let nu = vec![1.0 / 6.0; 6];
        assert!((excitation(&f, &nu).unwrap() - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn excitation_tabular_is_min_weight() {
        let f = FeatureMap::tabular(2, 2);
        let nu = [0.1, 0.2, 0.3, 0.4];
        assert!((excitation(&f, &nu).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn excitation_concentrated_is_zero() {
        let f = FeatureMap::tabular(2, 1);
        assert_eq!(excitation(&f, &[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn excitation_rejects_non_distribution() {
        let f = FeatureMap::tabular(2, 1);
        assert!(excitation(&f, &[0.7, 0.7]).is_err());
    }

    #[test]
    fn deepsea_kernel_directions_are_ignored() {
        let f = FeatureMap::deepsea(3).unwrap();
        // rank 2·(2N − 1): each block loses one direction
        assert_eq!(row_space_basis(&f).ncols(), 10);
        let nu = vec![1.0 / 18.0; 18];
        let full_min = f.moment_matrix(&nu).unwrap().symmetric_eigenvalues().min();
        assert!(full_min.abs() < 1e-12);
        assert!(excitation(&f, &nu).unwrap() > 1e-3);
    }

    #[test]
    fn json_round_trip() {
        let f = FeatureMap::deepsea(3).unwrap();
        let back = FeatureMap::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(f, back);
    }
}
