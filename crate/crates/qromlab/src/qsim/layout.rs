use std::sync::Arc;

use crate::{Error, Result};

/// Ordered `(name, dim)` registers; the first register is the least
/// significant digit of a basis index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterLayout {
    names: Vec<String>,
    dims: Vec<u64>,
    strides: Vec<u128>,
    total: u128,
}

impl RegisterLayout {
    pub fn new<S: AsRef<str>>(regs: &[(S, u64)]) -> Result<Self> {
        let mut names = Vec::with_capacity(regs.len());
        let mut dims = Vec::with_capacity(regs.len());
        let mut strides = Vec::with_capacity(regs.len());
        let mut total: u128 = 1;
        for (name, dim) in regs {
            let name = name.as_ref().to_string();
            if *dim == 0 {
                return Err(Error::Layout(format!("register `{name}` has dimension 0")));
            }
            if names.contains(&name) {
                return Err(Error::Layout(format!("duplicate register `{name}`")));
            }
            strides.push(total);
            total = total
                .checked_mul(*dim as u128)
                .ok_or_else(|| Error::Layout("total dimension overflows u128".into()))?;
            names.push(name);
            dims.push(*dim);
        }
        Ok(Self { names, dims, strides, total })
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    pub fn total_dim(&self) -> u128 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn name(&self, pos: usize) -> &str {
        &self.names[pos]
    }

    pub fn dim(&self, pos: usize) -> u64 {
        self.dims[pos]
    }

    pub fn dim_of(&self, name: &str) -> Result<u64> {
        Ok(self.dims[self.position(name)?])
    }

    pub fn stride(&self, pos: usize) -> u128 {
        self.strides[pos]
    }

    pub fn registers(&self) -> impl Iterator<Item = (&str, u64)> {
        self.names.iter().map(String::as_str).zip(self.dims.iter().copied())
    }

    pub fn digit(&self, index: u128, pos: usize) -> u64 {
        ((index / self.strides[pos]) % self.dims[pos] as u128) as u64
    }

    pub fn with_digit(&self, index: u128, pos: usize, value: u64) -> u128 {
        let old = self.digit(index, pos) as u128;
        index - old * self.strides[pos] + value as u128 * self.strides[pos]
    }

    pub fn decode(&self, index: u128) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.dims.len());
        self.decode_into(index, &mut out);
        out
    }

    pub fn decode_into(&self, mut index: u128, out: &mut Vec<u64>) {
        out.clear();
        for &d in &self.dims {
            out.push((index % d as u128) as u64);
            index /= d as u128;
        }
    }

    pub fn encode(&self, digits: &[u64]) -> Result<u128> {
        if digits.len() != self.dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} digits, got {}",
                self.dims.len(),
                digits.len()
            )));
        }
        let mut idx = 0u128;
        for (pos, (&v, &d)) in digits.iter().zip(&self.dims).enumerate() {
            if v >= d {
                return Err(Error::EncodingOverflow(format!(
                    "value {v} does not fit register `{}` of dimension {d}",
                    self.names[pos]
                )));
            }
            idx += v as u128 * self.strides[pos];
        }
        Ok(idx)
    }

    /// Unchecked encoding for digits already known to be in range.
    pub(crate) fn encode_unchecked(&self, digits: &[u64]) -> u128 {
        digits
            .iter()
            .zip(&self.strides)
            .map(|(&v, &s)| v as u128 * s)
            .sum()
    }

    /// Union of two layouts; registers present in both must agree on dimension.
    pub fn merge(&self, other: &RegisterLayout) -> Result<Self> {
        let mut regs: Vec<(String, u64)> = self.registers().map(|(n, d)| (n.to_string(), d)).collect();
        for (n, d) in other.registers() {
            match self.position(n) {
                Ok(p) if self.dims[p] != d => {
                    return Err(Error::Layout(format!(
                        "register `{n}` has dimension {} and {d}",
                        self.dims[p]
                    )))
                }
                Ok(_) => {}
                Err(_) => regs.push((n.to_string(), d)),
            }
        }
        Self::new(&regs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn little_endian_digits() {
        let l = RegisterLayout::new(&[("a", 2), ("b", 3)]).unwrap();
        assert_eq!(l.total_dim(), 6);
        assert_eq!(l.encode(&[1, 2]).unwrap(), 1 + 2 * 2);
        assert_eq!(l.decode(5), vec![1, 2]);
        assert!(l.encode(&[2, 0]).is_err());
    }

    #[test]
    fn rejects_bad_layouts() {
        assert!(RegisterLayout::new(&[("a", 0)]).is_err());
        assert!(RegisterLayout::new(&[("a", 2), ("a", 2)]).is_err());
        let a = RegisterLayout::new(&[("a", 2)]).unwrap();
        let b = RegisterLayout::new(&[("a", 3)]).unwrap();
        assert!(a.merge(&b).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_roundtrip(dims in prop::collection::vec(1u64..7, 1..5), seed in any::<u64>()) {
            let regs: Vec<(String, u64)> = dims.iter().enumerate().map(|(i, &d)| (format!("r{i}"), d)).collect();
            let l = RegisterLayout::new(&regs).unwrap();
            prop_assert_eq!(l.total_dim(), dims.iter().map(|&d| d as u128).product::<u128>());
            let idx = seed as u128 % l.total_dim();
            let digits = l.decode(idx);
            prop_assert_eq!(l.encode(&digits).unwrap(), idx);
            for (pos, &d) in digits.iter().enumerate() {
                prop_assert_eq!(l.digit(idx, pos), d);
            }
        }
    }
}
