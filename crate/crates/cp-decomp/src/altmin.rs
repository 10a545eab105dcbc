//! Joint refinement of a CP form by alternating minimization.

use tensor_core::{CPForm, DenseTensor, TensorError};

use crate::{dot, norm, DecompConfig, Result};

/// Returns the refined CP form; see [`alternating_minimization_traced`].
pub fn alternating_minimization(
    t: &DenseTensor,
    init: &CPForm,
    cfg: &DecompConfig,
) -> Result<CPForm> {
    alternating_minimization_traced(t, init, cfg).map(|(cp, _)| cp)
}

/// Sweeps over components `l` and modes `j`, replacing each factor with the
/// normalized contraction of the residual-without-`l` against the other
/// factors of `l`, then refreshing `w_l` from the full contraction. Also
/// returns the objective `‖T - reconstruct‖_F` after the initial state and
/// after every accepted sweep; a sweep that would increase the objective is
/// rolled back and iteration stops, so the trace is non-increasing.
pub fn alternating_minimization_traced(
    t: &DenseTensor,
    init: &CPForm,
    cfg: &DecompConfig,
) -> Result<(CPForm, Vec<f64>)> {
    cfg.validate()?;
    if init.rank() == 0 {
        return Ok((init.clone(), vec![t.frobenius_norm()]));
    }
    let dims = init.dims().expect("non-empty decomposition");
    if dims != t.shape() {
        return Err(TensorError::ShapeMismatch {
            a: dims,
            b: t.shape().to_vec(),
        }
        .into());
    }

    let n = t.order();
    let r = init.rank();
    let t_norm = t.frobenius_norm();
    let mut weights = init.weights().to_vec();
    let mut factors: Vec<Vec<Vec<f64>>> = init.factors().to_vec();

    // Cached full contractions T(u_k^1, ..., u_k^n), one per component.
    let mut t_inner = vec![0.0; r];
    for k in 0..r {
        let refs: Vec<&[f64]> = factors.iter().map(|m| m[k].as_slice()).collect();
        t_inner[k] = t.contract_scalar(&refs)?;
    }

    let mut obj_prev = objective(t_norm, &weights, &factors, &t_inner);
    let mut history = vec![obj_prev];

    for _ in 0..cfg.altmin_max_sweeps {
        let saved = (weights.clone(), factors.clone(), t_inner.clone());
        for l in 0..r {
            for j in 0..n {
                let refs_l: Vec<&[f64]> = factors.iter().map(|m| m[l].as_slice()).collect();
                let tc = t.contract_all_but(&refs_l, j)?;
                // c = (T - Σ_{k≠l} w_k u_k^1 ⊗ ... ⊗ u_k^n)(u_l^1, ..., I, ..., u_l^n)
                let mut c = tc.clone();
                for k in 0..r {
                    if k == l {
                        continue;
                    }
                    let mut coef = weights[k];
                    for i in 0..n {
                        if i != j {
                            coef *= dot(&factors[i][k], &factors[i][l]);
                        }
                    }
                    if coef != 0.0 {
                        for (x, y) in c.iter_mut().zip(&factors[j][k]) {
                            *x -= coef * y;
                        }
                    }
                }
                let len = norm(&c);
                if j + 1 == n {
                    // The weight refresh w_l = (T - Σ_{k≠l} ...)(u_l^1, ..., u_l^n)
                    // contracts the vector c against the just-normalized u_l^n,
                    // which is exactly ‖c‖; a zero contraction zeroes the weight.
                    if len == 0.0 {
                        t_inner[l] = dot(&tc, &factors[j][l]);
                        weights[l] = 0.0;
                    } else {
                        let u: Vec<f64> = c.iter().map(|x| x / len).collect();
                        t_inner[l] = dot(&tc, &u);
                        factors[j][l] = u;
                        weights[l] = len;
                    }
                } else if len > 0.0 {
                    factors[j][l] = c.iter().map(|x| x / len).collect();
                }
                // A zero contraction on a non-final mode keeps the previous factor.
            }
        }

        let obj = objective(t_norm, &weights, &factors, &t_inner);
        if obj > obj_prev {
            (weights, factors, t_inner) = saved;
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
    let _ = t_inner;
    Ok((CPForm::new(weights, factors)?, history))
}

/// `‖T - X‖_F` from cached inner products:
/// `‖T‖² - 2 Σ_k w_k T(u_k) + Σ_{k,k'} w_k w_k' Π_j ⟨u_k^j, u_k'^j⟩`.
fn objective(t_norm: f64, weights: &[f64], factors: &[Vec<Vec<f64>>], t_inner: &[f64]) -> f64 {
    let r = weights.len();
    let mut x_norm_sq = 0.0;
    for k in 0..r {
        for k2 in 0..r {
            let mut g = weights[k] * weights[k2];
            for per_mode in factors {
                g *= dot(&per_mode[k], &per_mode[k2]);
            }
            x_norm_sq += g;
        }
    }
    let cross: f64 = weights.iter().zip(t_inner).map(|(w, ti)| w * ti).sum();
    (t_norm * t_norm - 2.0 * cross + x_norm_sq).max(0.0).sqrt()
}
