//! Rank-1 extraction by asymmetric power updates with deflation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rand::SeedableRng;
use tensor_core::{CPForm, DenseTensor};

use crate::{norm, DecompConfig, DecompError, Result, ZERO_CONTRACTION_RETRIES};

/// Extracts `cfg.rank` components one at a time. Each component starts from
/// random unit vectors and iterates `u^j ← T(u^1, ..., I, ..., u^n)/‖·‖`
/// until the iterate stops moving (directly or up to a global sign flip) or
/// the iteration cap is hit; its weight is the full contraction
/// `w_k = T(u_k^1, ..., u_k^n)` and the rank-1 term is subtracted from the
/// residual before the next component.
pub fn power_iteration_deflation(t: &DenseTensor, cfg: &DecompConfig) -> Result<CPForm> {
    cfg.validate()?;
    let n = t.order();
    if n == 0 {
        return Err(DecompError::ScalarTensor);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut residual = t.clone();
    let mut weights = Vec::with_capacity(cfg.rank);
    let mut factors: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(cfg.rank); n];

    for _ in 0..cfg.rank {
        let component = extract_component(&residual, cfg, &mut rng)?;
        let refs: Vec<&[f64]> = component.iter().map(Vec::as_slice).collect();
        let w = residual.contract_scalar(&refs)?;
        residual.axpy_outer(-w, &refs)?;
        weights.push(w);
        for (mode, u) in component.into_iter().enumerate() {
            factors[mode].push(u);
        }
    }
    Ok(CPForm::new(weights, factors)?)
}

fn extract_component(
    residual: &DenseTensor,
    cfg: &DecompConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    let n = residual.order();
    'restart: for _ in 0..=ZERO_CONTRACTION_RETRIES {
        let mut current: Vec<Vec<f64>> = residual
            .shape()
            .iter()
            .map(|&d| random_unit(rng, d))
            .collect();
        for _ in 0..cfg.power_max_iters {
            // Every mode update contracts against the previous iterate.
            let refs: Vec<&[f64]> = current.iter().map(Vec::as_slice).collect();
            let mut next = Vec::with_capacity(n);
            for j in 0..n {
                let mut c = residual.contract_all_but(&refs, j)?;
                let len = norm(&c);
                if len == 0.0 {
                    continue 'restart;
                }
                c.iter_mut().for_each(|x| *x /= len);
                next.push(c);
            }
            // A component with negative weight on an even-order tensor
            // converges to a period-2 orbit where every factor flips sign;
            // the spanned rank-1 term is identical at both phase points, so
            // accept either fixed point.
            let mut change_same = 0.0;
            let mut change_flip = 0.0;
            for (new_u, old_u) in next.iter().zip(&current) {
                for (a, b) in new_u.iter().zip(old_u) {
                    change_same += (a - b) * (a - b);
                    change_flip += (a + b) * (a + b);
                }
            }
            current = next;
            if change_same.min(change_flip) <= cfg.power_tolerance {
                return Ok(current);
            }
        }
        return Ok(current);
    }
    Err(DecompError::DegenerateTensor {
        retries: ZERO_CONTRACTION_RETRIES,
    })
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&v);
        if len > 0.0 {
            return v.into_iter().map(|x| x / len).collect();
        }
    }
}
