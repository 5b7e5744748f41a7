use crate::{Error, Result};

/// Tuples over an alphabet `[0, alphabet)` with lengths in `min_len..=max_len`.
///
/// Points are indexed length by length; within a length the first symbol is
/// least significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    alphabet: u64,
    min_len: usize,
    max_len: usize,
    offsets: Vec<u64>,
    size: u64,
}

impl Domain {
    pub fn new(alphabet: u64, min_len: usize, max_len: usize) -> Result<Self> {
        if alphabet == 0 || min_len == 0 || min_len > max_len {
            return Err(Error::InvalidParameter(format!(
                "domain with alphabet {alphabet} and lengths {min_len}..={max_len}"
            )));
        }
        let mut offsets = Vec::new();
        let mut size: u64 = 0;
        for len in min_len..=max_len {
            offsets.push(size);
            let count = alphabet
                .checked_pow(len as u32)
                .ok_or_else(|| Error::EncodingOverflow("domain size overflows u64".into()))?;
            size = size
                .checked_add(count)
                .ok_or_else(|| Error::EncodingOverflow("domain size overflows u64".into()))?;
        }
        Ok(Self { alphabet, min_len, max_len, offsets, size })
    }

    /// Single symbols.
    pub fn flat(alphabet: u64) -> Result<Self> {
        Self::new(alphabet, 1, 1)
    }

    /// Nonempty tuples of length at most `k`.
    pub fn prefixes(alphabet: u64, k: usize) -> Result<Self> {
        Self::new(alphabet, 1, k)
    }

    pub fn alphabet(&self) -> u64 {
        self.alphabet
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn min_len(&self) -> usize {
        self.min_len
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn index(&self, point: &[u64]) -> Result<u64> {
        let len = point.len();
        if len < self.min_len || len > self.max_len {
            return Err(Error::InvalidParameter(format!("tuple of length {len} is not in the domain")));
        }
        let mut idx = 0u64;
        let mut mult = 1u64;
        for &s in point {
            if s >= self.alphabet {
                return Err(Error::EncodingOverflow(format!("symbol {s} >= alphabet {}", self.alphabet)));
            }
            idx += s * mult;
            mult = mult.saturating_mul(self.alphabet);
        }
        Ok(self.offsets[len - self.min_len] + idx)
    }

    pub fn point(&self, index: u64) -> Result<Vec<u64>> {
        if index >= self.size {
            return Err(Error::PointOutOfDomain(index));
        }
        let slot = self.offsets.partition_point(|&o| o <= index) - 1;
        let len = self.min_len + slot;
        let mut rest = index - self.offsets[slot];
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(rest % self.alphabet);
            rest /= self.alphabet;
        }
        Ok(out)
    }

    pub fn len_of(&self, index: u64) -> Result<usize> {
        if index >= self.size {
            return Err(Error::PointOutOfDomain(index));
        }
        Ok(self.min_len + self.offsets.partition_point(|&o| o <= index) - 1)
    }

    /// Indices of all nonempty prefixes of `point` that lie in the domain.
    pub fn prefix_indices(&self, point: &[u64]) -> Result<Vec<u64>> {
        (self.min_len..=point.len().min(self.max_len))
            .map(|l| self.index(&point[..l]))
            .collect()
    }

    pub fn is_prefix(short: &[u64], long: &[u64]) -> bool {
        short.len() <= long.len() && long[..short.len()] == *short
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<u64>> + '_ {
        (0..self.size).map(|i| self.point(i).expect("index in range"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn prefix_domain_size() {
        let d = Domain::prefixes(2, 2).unwrap();
        assert_eq!(d.size(), 6);
        assert_eq!(d.point(0).unwrap(), vec![0]);
        assert_eq!(d.point(2).unwrap(), vec![0, 0]);
        assert_eq!(d.index(&[1, 1]).unwrap(), 5);
        assert_eq!(d.prefix_indices(&[1, 0]).unwrap(), vec![1, 3]);
        assert!(d.index(&[0, 0, 0]).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(alpha in 1u64..6, k in 1usize..4, seed in any::<u64>()) {
            let d = Domain::prefixes(alpha, k).unwrap();
            let expect: u64 = (1..=k as u32).map(|l| alpha.pow(l)).sum();
            prop_assert_eq!(d.size(), expect);
            let i = seed % d.size();
            let p = d.point(i).unwrap();
            prop_assert_eq!(d.index(&p).unwrap(), i);
            prop_assert_eq!(d.len_of(i).unwrap(), p.len());
        }
    }
}
