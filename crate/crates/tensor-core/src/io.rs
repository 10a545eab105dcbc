//! Plain-text serialization for tensors and CP forms.
//!
//! Tensor files carry a `shape: d1 d2 ... dn` header followed by the
//! row-major entries; whitespace and line breaks between values are not
//! significant. Observation masks reuse the tensor format with 0/1 entries.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::{CPForm, DenseTensor, TensorError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] TensorError),
}

pub type IoResult<T> = std::result::Result<T, IoError>;

fn parse_err<T>(line: usize, message: impl Into<String>) -> IoResult<T> {
    Err(IoError::Parse {
        line,
        message: message.into(),
    })
}

/// Renders a tensor in the text format, one innermost row per line.
pub fn tensor_to_string(t: &DenseTensor) -> String {
    let mut out = String::new();
    out.push_str("shape:");
    for d in t.shape() {
        let _ = write!(out, " {d}");
    }
    out.push('\n');
    let row = t.shape().last().copied().unwrap_or(1);
    for chunk in t.data().chunks(row) {
        let mut first = true;
        for x in chunk {
            if !first {
                out.push(' ');
            }
            let _ = write!(out, "{x}");
            first = false;
        }
        out.push('\n');
    }
    out
}

pub fn tensor_from_str(text: &str) -> IoResult<DenseTensor> {
    let mut lines = text.lines().enumerate();
    let (lineno, header) = loop {
        match lines.next() {
            Some((n, l)) if !l.trim().is_empty() => break (n + 1, l),
            Some(_) => continue,
            None => return parse_err(0, "empty tensor file"),
        }
    };
    let rest = header
        .trim()
        .strip_prefix("shape:")
        .ok_or(IoError::Parse {
            line: lineno,
            message: "expected `shape:` header".into(),
        })?;
    let mut shape = Vec::new();
    for tok in rest.split_whitespace() {
        match tok.parse::<usize>() {
            Ok(d) => shape.push(d),
            Err(_) => return parse_err(lineno, format!("bad dimension `{tok}`")),
        }
    }
    let mut data = Vec::with_capacity(shape.iter().product());
    for (n, line) in lines {
        for tok in line.split_whitespace() {
            match tok.parse::<f64>() {
                Ok(x) => data.push(x),
                Err(_) => return parse_err(n + 1, format!("bad value `{tok}`")),
            }
        }
    }
    Ok(DenseTensor::new(shape, data)?)
}

pub fn write_tensor(path: &Path, t: &DenseTensor) -> IoResult<()> {
    fs::write(path, tensor_to_string(t))?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> IoResult<DenseTensor> {
    tensor_from_str(&fs::read_to_string(path)?)
}

/// Renders a CP form: a three-line header, then per component one weight
/// line followed by one factor line per mode.
pub fn cp_to_string(cp: &CPForm) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "rank: {}", cp.rank());
    let _ = writeln!(out, "order: {}", cp.order());
    out.push_str("dims:");
    if let Some(dims) = cp.dims() {
        for d in dims {
            let _ = write!(out, " {d}");
        }
    }
    out.push('\n');
    for k in 0..cp.rank() {
        let _ = writeln!(out, "{}", cp.weights()[k]);
        for mode in 0..cp.order() {
            let mut first = true;
            for x in cp.factor(mode, k) {
                if !first {
                    out.push(' ');
                }
                let _ = write!(out, "{x}");
                first = false;
            }
            out.push('\n');
        }
    }
    out
}

pub fn cp_from_str(text: &str) -> IoResult<CPForm> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let mut header_field = |name: &str| -> IoResult<(usize, String)> {
        match lines.next() {
            Some((n, l)) => {
                let l = l.trim();
                match l.strip_prefix(name) {
                    Some(rest) => Ok((n + 1, rest.trim().to_string())),
                    None => parse_err(n + 1, format!("expected `{name}` header")),
                }
            }
            None => parse_err(0, format!("missing `{name}` header")),
        }
    };
    let (line, rank_s) = header_field("rank:")?;
    let rank: usize = rank_s
        .parse()
        .map_err(|_| IoError::Parse {
            line,
            message: format!("bad rank `{rank_s}`"),
        })?;
    let (line, order_s) = header_field("order:")?;
    let order: usize = order_s
        .parse()
        .map_err(|_| IoError::Parse {
            line,
            message: format!("bad order `{order_s}`"),
        })?;
    let (line, dims_s) = header_field("dims:")?;
    let mut dims = Vec::new();
    for tok in dims_s.split_whitespace() {
        match tok.parse::<usize>() {
            Ok(d) => dims.push(d),
            Err(_) => return parse_err(line, format!("bad dimension `{tok}`")),
        }
    }
    if rank > 0 && dims.len() != order {
        return parse_err(line, "dims count does not match order");
    }

    let mut parse_floats = |expected: Option<usize>| -> IoResult<Vec<f64>> {
        match lines.next() {
            Some((n, l)) => {
                let mut vals = Vec::new();
                for tok in l.split_whitespace() {
                    match tok.parse::<f64>() {
                        Ok(x) => vals.push(x),
                        Err(_) => return parse_err(n + 1, format!("bad value `{tok}`")),
                    }
                }
                if let Some(want) = expected {
                    if vals.len() != want {
                        return parse_err(
                            n + 1,
                            format!("expected {want} values, found {}", vals.len()),
                        );
                    }
                }
                Ok(vals)
            }
            None => parse_err(0, "unexpected end of CP file"),
        }
    };

    let mut weights = Vec::with_capacity(rank);
    let mut factors: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(rank); order];
    for _ in 0..rank {
        let w = parse_floats(Some(1))?;
        weights.push(w[0]);
        for (mode, dim) in dims.iter().enumerate() {
            factors[mode].push(parse_floats(Some(*dim))?);
        }
    }
    Ok(CPForm::new(weights, factors)?)
}

pub fn write_cp(path: &Path, cp: &CPForm) -> IoResult<()> {
    fs::write(path, cp_to_string(cp))?;
    Ok(())
}

pub fn read_cp(path: &Path) -> IoResult<CPForm> {
    cp_from_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_round_trip_is_exact() {
        let t = DenseTensor::new(
            vec![2, 3],
            vec![0.1, -2.5e-7, 3.0, 1.0 / 3.0, 5e12, -0.0],
        )
        .unwrap();
        let text = tensor_to_string(&t);
        let back = tensor_from_str(&text).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn scalar_tensor_round_trips() {
        let t = DenseTensor::scalar(4.25);
        let back = tensor_from_str(&tensor_to_string(&t)).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn cp_round_trip_is_exact() {
        let inv2 = 1.0 / 2f64.sqrt();
        let cp = CPForm::new(
            vec![2.0, -0.125],
            vec![
                vec![vec![inv2, inv2], vec![1.0, 0.0]],
                vec![vec![0.0, 1.0], vec![inv2, -inv2]],
                vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
            ],
        )
        .unwrap();
        let back = cp_from_str(&cp_to_string(&cp)).unwrap();
        assert_eq!(cp, back);
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(tensor_from_str("2 3\n1 2 3 4 5 6").is_err());
        assert!(tensor_from_str("shape: 2 2\n1 2 3").is_err());
    }
}
