//! Low-rank recovery from partially observed entries.

use tensor_core::{CPForm, DenseTensor, TensorError};

use crate::{
    alternating_minimization_traced, dot, norm, power_iteration_deflation, DecompConfig,
    DecompError, Result, DENOM_GUARD,
};

/// Binary observation mask: entry 1 marks an observed coordinate.
#[derive(Debug, Clone)]
pub struct ObservationMask {
    tensor: DenseTensor,
    observed: usize,
}

impl ObservationMask {
    /// Validates that every entry is exactly 0 or 1.
    pub fn new(tensor: DenseTensor) -> Result<Self> {
        let mut observed = 0;
        for (index, &value) in tensor.data().iter().enumerate() {
            if value == 1.0 {
                observed += 1;
            } else if value != 0.0 {
                return Err(DecompError::MaskNotBinary { index, value });
            }
        }
        Ok(Self { tensor, observed })
    }

    /// All-ones mask.
    pub fn full(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            tensor: DenseTensor::new(shape.to_vec(), vec![1.0; len]).expect("valid shape"),
            observed: len,
        }
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.tensor
    }

    pub fn shape(&self) -> &[usize] {
        self.tensor.shape()
    }

    pub fn observed_count(&self) -> usize {
        self.observed
    }

    pub fn is_full(&self) -> bool {
        self.observed == self.tensor.len()
    }

    /// True if the coordinate at this flat offset is observed.
    pub fn is_observed(&self, flat: usize) -> bool {
        self.tensor.data()[flat] == 1.0
    }
}

/// Returns the completed CP form; see [`complete_traced`].
pub fn complete(
    observed: &DenseTensor,
    mask: &ObservationMask,
    cfg: &DecompConfig,
) -> Result<CPForm> {
    complete_traced(observed, mask, cfg).map(|(cp, _)| cp)
}

/// Minimizes `‖Ω·T - Ω·Σ_k w_k u_k^1 ⊗ ... ⊗ u_k^n‖_F` to local optimality.
///
/// Initialization runs power iteration with deflation on the zero-filled
/// masked tensor; the alternating sweeps then divide each factor-update
/// contraction coordinatewise by the mask contracted against the squared
/// remaining factors. Coordinates whose divisor falls below [`DENOM_GUARD`]
/// keep their previous value. Also returns the masked objective after the
/// initial state and after every accepted sweep (non-increasing; a sweep
/// that would increase it is rolled back).
///
/// A full mask reduces to the unmasked problem and takes exactly the
/// [`crate::decompose`] path, so the two produce identical output for
/// identical configs.
pub fn complete_traced(
    observed: &DenseTensor,
    mask: &ObservationMask,
    cfg: &DecompConfig,
) -> Result<(CPForm, Vec<f64>)> {
    cfg.validate()?;
    if observed.shape() != mask.shape() {
        return Err(TensorError::ShapeMismatch {
            a: observed.shape().to_vec(),
            b: mask.shape().to_vec(),
        }
        .into());
    }
    if mask.observed_count() == 0 {
        return Err(DecompError::EmptyMask);
    }
    if mask.is_full() {
        let init = power_iteration_deflation(observed, cfg)?;
        return alternating_minimization_traced(observed, &init, cfg);
    }

    let masked = observed.entrywise_multiply(mask.tensor())?;
    let init = power_iteration_deflation(&masked, cfg)?;

    let n = masked.order();
    let r = init.rank();
    let mut weights = init.weights().to_vec();
    let mut factors: Vec<Vec<Vec<f64>>> = init.factors().to_vec();

    // Masked residual E = Ω·T - Ω·X, maintained incrementally as factors
    // and weights change.
    let mut residual = masked.clone();
    for k in 0..r {
        let refs: Vec<&[f64]> = factors.iter().map(|m| m[k].as_slice()).collect();
        residual.masked_axpy_outer(-weights[k], &refs, mask.tensor())?;
    }

    let mut obj_prev = residual.frobenius_norm();
    let mut history = vec![obj_prev];

    for _ in 0..cfg.altmin_max_sweeps {
        let saved = (weights.clone(), factors.clone(), residual.clone());
        for l in 0..r {
            for j in 0..n {
                let refs_l: Vec<&[f64]> = factors.iter().map(|m| m[l].as_slice()).collect();
                let squared: Vec<Vec<f64>> = refs_l
                    .iter()
                    .map(|v| v.iter().map(|x| x * x).collect())
                    .collect();
                let sq_refs: Vec<&[f64]> = squared.iter().map(Vec::as_slice).collect();
                let divisor = mask.tensor().contract_all_but(&sq_refs, j)?;
                let numerator_res = residual.contract_all_but(&refs_l, j)?;

                let w_l = weights[l];
                let u_old = &factors[j][l];
                // N_i / D_i with N = (Ω·T - Ω·Σ_{k≠l})(..., I, ...) expressed
                // through the maintained residual: N = E(..., I, ...) + w_l·u_old·D.
                let updated: Vec<f64> = (0..u_old.len())
                    .map(|i| {
                        if divisor[i] >= DENOM_GUARD {
                            numerator_res[i] / divisor[i] + w_l * u_old[i]
                        } else {
                            u_old[i]
                        }
                    })
                    .collect();
                let len = norm(&updated);
                if len == 0.0 {
                    continue;
                }
                let u_new: Vec<f64> = updated.iter().map(|x| x / len).collect();
                let diff: Vec<f64> = u_old.iter().zip(&u_new).map(|(a, b)| a - b).collect();
                let mut update_refs = refs_l.clone();
                update_refs[j] = &diff;
                residual.masked_axpy_outer(w_l, &update_refs, mask.tensor())?;
                factors[j][l] = u_new;
            }

            // Weight update: w_l = (Ω·T - Ω·Σ_{k≠l})(u_l...) / Ω(u_l²...).
            let refs_l: Vec<&[f64]> = factors.iter().map(|m| m[l].as_slice()).collect();
            let squared: Vec<Vec<f64>> = refs_l
                .iter()
                .map(|v| v.iter().map(|x| x * x).collect())
                .collect();
            let sq_refs: Vec<&[f64]> = squared.iter().map(Vec::as_slice).collect();
            let mass = mask.tensor().contract_scalar(&sq_refs)?;
            if mass >= DENOM_GUARD {
                let numerator = residual.contract_scalar(&refs_l)? + weights[l] * mass;
                let w_new = numerator / mass;
                residual.masked_axpy_outer(weights[l] - w_new, &refs_l, mask.tensor())?;
                weights[l] = w_new;
            }
        }

        let obj = residual.frobenius_norm();
        if obj > obj_prev {
            (weights, factors, residual) = saved;
            break;
        }
        history.push(obj);
        let relative_gain = if obj_prev > 0.0 {
            (obj_prev - obj) / obj_prev
        } else {
            0.0
        };
        obj_prev = obj;
        if relative_gain < cfg.altmin_tolerance {
            break;
        }
    }
    Ok((CPForm::new(weights, factors)?, history))
}

#[allow(dead_code)]
fn masked_objective(
    masked: &DenseTensor,
    mask: &ObservationMask,
    weights: &[f64],
    factors: &[Vec<Vec<f64>>],
) -> f64 {
    let mut recon = DenseTensor::zeros(masked.shape().to_vec());
    for k in 0..weights.len() {
        let refs: Vec<&[f64]> = factors.iter().map(|m| m[k].as_slice()).collect();
        recon.masked_axpy_outer(weights[k], &refs, mask.tensor()).unwrap();
    }
    masked.frobenius_distance(&recon).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_validation() {
        let ok = DenseTensor::new(vec![2, 2], vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        let mask = ObservationMask::new(ok).unwrap();
        assert_eq!(mask.observed_count(), 3);
        assert!(!mask.is_full());

        let bad = DenseTensor::new(vec![2], vec![0.5, 1.0]).unwrap();
        assert!(matches!(
            ObservationMask::new(bad),
            Err(DecompError::MaskNotBinary { index: 0, .. })
        ));
    }

    #[test]
    fn empty_mask_is_rejected() {
        let t = DenseTensor::zeros(vec![2, 2]);
        let mask = ObservationMask::new(DenseTensor::zeros(vec![2, 2])).unwrap();
        let cfg = DecompConfig::default();
        assert!(matches!(
            complete(&t, &mask, &cfg),
            Err(DecompError::EmptyMask)
        ));
    }

    #[test]
    fn single_observed_entry_reaches_zero_masked_objective() {
        // Degenerate completion: one revealed entry pins nothing but itself.
        let mut t = DenseTensor::zeros(vec![3, 3, 3]);
        t.set(&[1, 2, 0], 4.0).unwrap();
        let mut m = DenseTensor::zeros(vec![3, 3, 3]);
        m.set(&[1, 2, 0], 1.0).unwrap();
        let mask = ObservationMask::new(m).unwrap();
        let cfg = DecompConfig::default().with_rank(1).with_seed(9);
        let (cp, history) = complete_traced(&t, &mask, &cfg).unwrap();
        let final_obj = history.last().copied().unwrap();
        assert!(final_obj < 1e-9, "masked objective {final_obj} should reach 0");
        // Only the observed entry is constrained.
        assert!((cp.eval(&[1, 2, 0]) - 4.0).abs() < 1e-9);
    }
}
