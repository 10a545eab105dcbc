//! Row-major dense tensors with stride arithmetic and multilinear contraction.

use crate::{Result, TensorError};

/// Per-mode argument for [`DenseTensor::contract`]: either a vector to
/// contract against, or an identity marker that keeps the mode free.
#[derive(Debug, Clone, Copy)]
pub enum ModeArg<'a> {
    Identity,
    Vector(&'a [f64]),
}

impl<'a> ModeArg<'a> {
    fn is_identity(&self) -> bool {
        matches!(self, ModeArg::Identity)
    }
}

/// An order-n real tensor stored as a flat row-major array.
///
/// The last mode varies fastest. A tensor with an empty shape is a scalar
/// holding exactly one entry.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Builds a tensor from a shape and row-major data, validating length,
    /// positive dimensions, and finiteness of every entry.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(TensorError::ZeroDimension { shape });
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(TensorError::DataLength {
                len: data.len(),
                shape,
                expected,
            });
        }
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(TensorError::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    /// All-zeros tensor of the given shape.
    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; len],
        }
    }

    /// Order-0 tensor holding a single value.
    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Number of modes.
    pub fn order(&self) -> usize {
        self.shape.len()
    }

    /// Total number of entries.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Consumes the tensor, returning its shape and flat data.
    pub fn into_parts(self) -> (Vec<usize>, Vec<f64>) {
        (self.shape, self.data)
    }

    /// Row-major strides; the last mode has stride 1.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.shape.len()];
        for m in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[m] = strides[m + 1] * self.shape[m + 1];
        }
        strides
    }

    /// Flat offset of a multi-index.
    pub fn index_of(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len()
            || index.iter().zip(&self.shape).any(|(&i, &d)| i >= d)
        {
            return Err(TensorError::IndexOutOfBounds {
                index: index.to_vec(),
                shape: self.shape.clone(),
            });
        }
        let mut flat = 0usize;
        for (&i, &d) in index.iter().zip(&self.shape) {
            flat = flat * d + i;
        }
        Ok(flat)
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.index_of(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let flat = self.index_of(index)?;
        self.data[flat] = value;
        Ok(())
    }

    /// Value of an order-0 tensor.
    pub fn as_scalar(&self) -> Option<f64> {
        if self.shape.is_empty() {
            Some(self.data[0])
        } else {
            None
        }
    }

    /// Multilinear contraction: modes with a `Vector` argument are summed
    /// against that vector; `Identity` modes stay free and appear in the
    /// output in their original order. Contracting every mode yields an
    /// order-0 tensor.
    pub fn contract(&self, args: &[ModeArg]) -> Result<DenseTensor> {
        let n = self.order();
        if args.len() != n {
            return Err(TensorError::ModeCount {
                order: n,
                got: args.len(),
            });
        }
        for (mode, arg) in args.iter().enumerate() {
            if let ModeArg::Vector(v) = arg {
                if v.len() != self.shape[mode] {
                    return Err(TensorError::VectorLength {
                        mode,
                        len: v.len(),
                        dim: self.shape[mode],
                    });
                }
            }
        }

        let out_shape: Vec<usize> = self
            .shape
            .iter()
            .zip(args)
            .filter(|(_, a)| a.is_identity())
            .map(|(&d, _)| d)
            .collect();
        let out_len: usize = out_shape.iter().product();
        let mut out = vec![0.0; out_len];

        if n == 0 {
            out[0] = self.data[0];
        } else {
            // Stride of each free mode inside the output; 0 for bound modes.
            let mut out_strides = vec![0usize; n];
            let mut s = 1usize;
            for m in (0..n).rev() {
                if args[m].is_identity() {
                    out_strides[m] = s;
                    s *= self.shape[m];
                }
            }
            contract_rec(
                &self.data,
                &self.shape,
                args,
                &out_strides,
                0,
                0,
                0,
                1.0,
                &mut out,
            );
        }
        DenseTensor::new(out_shape, out)
    }

    /// Contracts every mode against a vector, returning the scalar value.
    pub fn contract_scalar(&self, vectors: &[&[f64]]) -> Result<f64> {
        let args: Vec<ModeArg> = vectors.iter().map(|v| ModeArg::Vector(v)).collect();
        Ok(self.contract(&args)?.as_scalar().expect("order-0 result"))
    }

    /// Contracts every mode except `free` against the matching vector and
    /// returns the resulting vector over mode `free`.
    pub fn contract_all_but(&self, vectors: &[&[f64]], free: usize) -> Result<Vec<f64>> {
        let args: Vec<ModeArg> = vectors
            .iter()
            .enumerate()
            .map(|(m, v)| {
                if m == free {
                    ModeArg::Identity
                } else {
                    ModeArg::Vector(v)
                }
            })
            .collect();
        Ok(self.contract(&args)?.into_parts().1)
    }

    /// Extracts the subtensor obtained by fixing the given `(mode, index)`
    /// pairs; remaining modes keep their original order.
    pub fn fix_modes(&self, fixed: &[(usize, usize)]) -> Result<DenseTensor> {
        let mut basis: Vec<Option<Vec<f64>>> = vec![None; self.order()];
        for &(mode, index) in fixed {
            if mode >= self.order() || index >= self.shape[mode] {
                return Err(TensorError::IndexOutOfBounds {
                    index: vec![index],
                    shape: self.shape.clone(),
                });
            }
            let mut e = vec![0.0; self.shape[mode]];
            e[index] = 1.0;
            basis[mode] = Some(e);
        }
        let args: Vec<ModeArg> = basis
            .iter()
            .map(|b| match b {
                Some(e) => ModeArg::Vector(e),
                None => ModeArg::Identity,
            })
            .collect();
        self.contract(&args)
    }

    /// In-place rank-1 update: `self += alpha * v_1 ⊗ v_2 ⊗ ... ⊗ v_n`.
    pub fn axpy_outer(&mut self, alpha: f64, vectors: &[&[f64]]) -> Result<()> {
        let n = self.order();
        if vectors.len() != n {
            return Err(TensorError::ModeCount {
                order: n,
                got: vectors.len(),
            });
        }
        for (mode, v) in vectors.iter().enumerate() {
            if v.len() != self.shape[mode] {
                return Err(TensorError::VectorLength {
                    mode,
                    len: v.len(),
                    dim: self.shape[mode],
                });
            }
        }
        if n == 0 {
            self.data[0] += alpha;
        } else if alpha != 0.0 {
            axpy_rec(&mut self.data, &self.shape, vectors, 0, 0, alpha);
        }
        Ok(())
    }

    /// Masked in-place rank-1 update:
    /// `self += alpha * mask ⊙ (v_1 ⊗ ... ⊗ v_n)` entrywise.
    pub fn masked_axpy_outer(
        &mut self,
        alpha: f64,
        vectors: &[&[f64]],
        mask: &DenseTensor,
    ) -> Result<()> {
        self.check_same_shape(mask)?;
        let n = self.order();
        if vectors.len() != n {
            return Err(TensorError::ModeCount {
                order: n,
                got: vectors.len(),
            });
        }
        for (mode, v) in vectors.iter().enumerate() {
            if v.len() != self.shape[mode] {
                return Err(TensorError::VectorLength {
                    mode,
                    len: v.len(),
                    dim: self.shape[mode],
                });
            }
        }
        if n == 0 {
            self.data[0] += alpha * mask.data[0];
        } else if alpha != 0.0 {
            masked_axpy_rec(&mut self.data, &self.shape, vectors, &mask.data, 0, 0, alpha);
        }
        Ok(())
    }

    /// Entrywise product of equally shaped tensors.
    pub fn entrywise_multiply(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        DenseTensor::new(self.shape.clone(), data)
    }

    /// Entrywise difference `self - other`.
    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        DenseTensor::new(self.shape.clone(), data)
    }

    /// √Σ(a-b)² over all entries.
    pub fn frobenius_distance(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum.sqrt())
    }

    /// √Σx² over all entries.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn check_same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                a: self.shape.clone(),
                b: other.shape.clone(),
            });
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn contract_rec(
    data: &[f64],
    shape: &[usize],
    args: &[ModeArg],
    out_strides: &[usize],
    mode: usize,
    data_off: usize,
    out_off: usize,
    prod: f64,
    out: &mut [f64],
) {
    let d = shape[mode];
    if mode + 1 == shape.len() {
        // Innermost mode has stride 1 in the data; a free innermost mode
        // also has stride 1 in the output.
        let row = &data[data_off..data_off + d];
        match args[mode] {
            ModeArg::Identity => {
                for (o, &x) in out[out_off..out_off + d].iter_mut().zip(row) {
                    *o += prod * x;
                }
            }
            ModeArg::Vector(v) => {
                let mut acc = 0.0;
                for (&x, &c) in row.iter().zip(v) {
                    acc += x * c;
                }
                out[out_off] += prod * acc;
            }
        }
        return;
    }
    let stride: usize = shape[mode + 1..].iter().product();
    match args[mode] {
        ModeArg::Identity => {
            let os = out_strides[mode];
            for i in 0..d {
                contract_rec(
                    data,
                    shape,
                    args,
                    out_strides,
                    mode + 1,
                    data_off + i * stride,
                    out_off + i * os,
                    prod,
                    out,
                );
            }
        }
        ModeArg::Vector(v) => {
            for (i, &c) in v.iter().enumerate() {
                if c != 0.0 {
                    contract_rec(
                        data,
                        shape,
                        args,
                        out_strides,
                        mode + 1,
                        data_off + i * stride,
                        out_off,
                        prod * c,
                        out,
                    );
                }
            }
        }
    }
}

fn axpy_rec(
    data: &mut [f64],
    shape: &[usize],
    vectors: &[&[f64]],
    mode: usize,
    off: usize,
    prod: f64,
) {
    let d = shape[mode];
    if mode + 1 == shape.len() {
        for (x, &c) in data[off..off + d].iter_mut().zip(vectors[mode]) {
            *x += prod * c;
        }
        return;
    }
    let stride: usize = shape[mode + 1..].iter().product();
    for (i, &c) in vectors[mode].iter().enumerate() {
        if c != 0.0 {
            axpy_rec(data, shape, vectors, mode + 1, off + i * stride, prod * c);
        }
    }
}

fn masked_axpy_rec(
    data: &mut [f64],
    shape: &[usize],
    vectors: &[&[f64]],
    mask: &[f64],
    mode: usize,
    off: usize,
    prod: f64,
) {
    let d = shape[mode];
    if mode + 1 == shape.len() {
        for i in 0..d {
            data[off + i] += prod * mask[off + i] * vectors[mode][i];
        }
        return;
    }
    let stride: usize = shape[mode + 1..].iter().product();
    for (i, &c) in vectors[mode].iter().enumerate() {
        if c != 0.0 {
            masked_axpy_rec(
                data,
                shape,
                vectors,
                mask,
                mode + 1,
                off + i * stride,
                prod * c,
            );
        }
    }
}
