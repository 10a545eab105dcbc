//! CP (rank-decomposed) form: a weighted sum of unit-norm rank-1 tensors.

use crate::{DenseTensor, Result, TensorError, UNIT_NORM_TOL};

/// A rank-r CP decomposition: weights `w_k` and, for every mode, one unit
/// factor vector per component, so the represented tensor is
/// `Σ_k w_k u_k^1 ⊗ u_k^2 ⊗ ... ⊗ u_k^n`.
///
/// Zero-weight components are kept, not pruned; the rank always equals the
/// number of stored components.
#[derive(Debug, Clone, PartialEq)]
pub struct CPForm {
    /// One weight per component.
    weights: Vec<f64>,
    /// `factors[mode][component]` is the unit factor vector of that
    /// component along that mode.
    factors: Vec<Vec<Vec<f64>>>,
}

impl CPForm {
    /// Builds a CP form, validating that every factor vector has unit
    /// Euclidean norm within [`UNIT_NORM_TOL`] and that each mode stores
    /// exactly one vector per component.
    pub fn new(weights: Vec<f64>, factors: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let rank = weights.len();
        for (mode, per_mode) in factors.iter().enumerate() {
            if per_mode.len() != rank {
                return Err(TensorError::FactorCount {
                    component: per_mode.len(),
                    order: factors.len(),
                    got: rank,
                });
            }
            let dim = per_mode.first().map(|v| v.len()).unwrap_or(0);
            for (component, v) in per_mode.iter().enumerate() {
                if v.len() != dim {
                    return Err(TensorError::VectorLength {
                        mode,
                        len: v.len(),
                        dim,
                    });
                }
                let norm = norm2(v);
                if (norm - 1.0).abs() > UNIT_NORM_TOL {
                    return Err(TensorError::NotUnitNorm {
                        mode,
                        component,
                        norm,
                    });
                }
            }
        }
        if let Some(index) = weights.iter().position(|w| !w.is_finite()) {
            return Err(TensorError::NonFinite { index });
        }
        Ok(Self { weights, factors })
    }

    /// Empty decomposition of the given order; reconstructs to zeros.
    pub fn empty(order: usize) -> Self {
        Self {
            weights: Vec::new(),
            factors: vec![Vec::new(); order],
        }
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    /// Number of modes.
    pub fn order(&self) -> usize {
        self.factors.len()
    }

    /// Per-mode dimensions, or `None` for an empty decomposition.
    pub fn dims(&self) -> Option<Vec<usize>> {
        if self.rank() == 0 {
            None
        } else {
            Some(self.factors.iter().map(|m| m[0].len()).collect())
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Factor vector of one component along one mode.
    pub fn factor(&self, mode: usize, component: usize) -> &[f64] {
        &self.factors[mode][component]
    }

    pub fn factors(&self) -> &[Vec<Vec<f64>>] {
        &self.factors
    }

    /// Entry at a multi-index: `Σ_k w_k ∏_j u_k^j[i_j]`.
    pub fn eval(&self, index: &[usize]) -> f64 {
        let mut value = 0.0;
        for k in 0..self.rank() {
            let mut prod = self.weights[k];
            for (mode, &i) in index.iter().enumerate() {
                prod *= self.factors[mode][k][i];
            }
            value += prod;
        }
        value
    }

    /// Materializes the represented tensor with the given shape.
    pub fn reconstruct(&self, shape: &[usize]) -> Result<DenseTensor> {
        if shape.len() != self.order() {
            return Err(TensorError::ModeCount {
                order: self.order(),
                got: shape.len(),
            });
        }
        if let Some(dims) = self.dims() {
            if dims != shape {
                return Err(TensorError::ShapeMismatch {
                    a: dims,
                    b: shape.to_vec(),
                });
            }
        }
        let mut out = DenseTensor::zeros(shape.to_vec());
        for k in 0..self.rank() {
            let vecs: Vec<&[f64]> = (0..self.order())
                .map(|m| self.factors[m][k].as_slice())
                .collect();
            out.axpy_outer(self.weights[k], &vecs)?;
        }
        Ok(out)
    }

    /// Keeps the `rank` components with largest `|w_k|`, preserving their
    /// original relative order.
    pub fn truncate(&self, rank: usize) -> Result<CPForm> {
        if rank > self.rank() {
            return Err(TensorError::TruncateRank {
                requested: rank,
                rank: self.rank(),
            });
        }
        let mut order: Vec<usize> = (0..self.rank()).collect();
        order.sort_by(|&a, &b| {
            self.weights[b]
                .abs()
                .partial_cmp(&self.weights[a].abs())
                .expect("finite weights")
        });
        let mut keep: Vec<usize> = order.into_iter().take(rank).collect();
        keep.sort_unstable();

        let weights = keep.iter().map(|&k| self.weights[k]).collect();
        let factors = self
            .factors
            .iter()
            .map(|per_mode| keep.iter().map(|&k| per_mode[k].clone()).collect())
            .collect();
        Ok(CPForm { weights, factors })
    }

    /// Number of stored factor entries, `r · Σ_j d_j` (weights excluded).
    pub fn factor_param_count(&self) -> usize {
        self.factors
            .iter()
            .map(|per_mode| per_mode.iter().map(|v| v.len()).sum::<usize>())
            .sum()
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank1_reconstruct_places_single_entry() {
        let cp = CPForm::new(
            vec![3.0],
            vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
        )
        .unwrap();
        let t = cp.reconstruct(&[2, 2]).unwrap();
        assert_eq!(t.get(&[0, 1]).unwrap(), 3.0);
        assert_eq!(
            t.data().iter().filter(|&&x| x != 0.0).count(),
            1,
            "exactly one nonzero entry"
        );
    }

    #[test]
    fn empty_form_reconstructs_to_zeros() {
        let cp = CPForm::empty(3);
        let t = cp.reconstruct(&[2, 3, 4]).unwrap();
        assert!(t.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn non_unit_factor_is_rejected() {
        let err = CPForm::new(vec![1.0], vec![vec![vec![2.0, 0.0]]]);
        assert!(matches!(err, Err(TensorError::NotUnitNorm { .. })));
    }

    #[test]
    fn truncate_keeps_largest_magnitudes_in_order() {
        let u = vec![1.0, 0.0];
        let cp = CPForm::new(
            vec![0.1, 5.0, -3.0],
            vec![
                vec![u.clone(), vec![0.0, 1.0], vec![1.0, 0.0]],
                vec![u.clone(), u.clone(), vec![0.0, 1.0]],
            ],
        )
        .unwrap();
        let kept = cp.truncate(2).unwrap();
        assert_eq!(kept.weights(), &[5.0, -3.0]);
        assert_eq!(kept.factor(0, 0), &[0.0, 1.0]);
        assert_eq!(kept.factor(1, 1), &[0.0, 1.0]);

        // Full-rank truncation is the identity.
        assert_eq!(cp.truncate(3).unwrap(), cp);
        assert!(cp.truncate(4).is_err());
    }

    #[test]
    fn eval_matches_reconstruct() {
        let inv2 = 1.0 / 2f64.sqrt();
        let cp = CPForm::new(
            vec![2.0, -1.0],
            vec![
                vec![vec![inv2, inv2], vec![1.0, 0.0]],
                vec![vec![0.0, 1.0], vec![inv2, -inv2]],
            ],
        )
        .unwrap();
        let t = cp.reconstruct(&[2, 2]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((cp.eval(&[i, j]) - t.get(&[i, j]).unwrap()).abs() < 1e-15);
            }
        }
    }
}
