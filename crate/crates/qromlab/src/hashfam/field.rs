use serde::Serialize;

use crate::{Error, Result};

/// Low-term encodings of irreducible polynomials of degree `n` over GF(2),
/// indexed by `n`; the leading `x^n` term is included.
const IRREDUCIBLE: [u32; 17] = [
    0, 0b10, 0b111, 0b1011, 0x13, 0x25, 0x43, 0x83, 0x11B, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x4443, 0x8003,
    0x1100B,
];

/// A small finite field: GF(2^n) for `n ≤ 16` or GF(p) for a prime `p < 2^31`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Field {
    Binary { n: u32 },
    Prime { p: u64 },
}

impl Field {
    pub fn binary(n: u32) -> Result<Self> {
        if !(1..=16).contains(&n) {
            return Err(Error::InvalidParameter(format!("GF(2^{n}) not supported")));
        }
        Ok(Field::Binary { n })
    }

    pub fn prime(p: u64) -> Result<Self> {
        if p >= 1 << 31 || !is_prime(p) {
            return Err(Error::InvalidParameter(format!("{p} is not a supported prime")));
        }
        Ok(Field::Prime { p })
    }

    pub fn size(&self) -> u64 {
        match *self {
            Field::Binary { n } => 1 << n,
            Field::Prime { p } => p,
        }
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        match *self {
            Field::Binary { .. } => a ^ b,
            Field::Prime { p } => (a + b) % p,
        }
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        match *self {
            Field::Binary { n } => {
                let poly = IRREDUCIBLE[n as usize] as u64;
                let (mut a, mut b, mut acc) = (a, b, 0u64);
                while b != 0 {
                    if b & 1 == 1 {
                        acc ^= a;
                    }
                    b >>= 1;
                    a <<= 1;
                    if a >> n & 1 == 1 {
                        a ^= poly;
                    }
                }
                acc
            }
            Field::Prime { p } => a * b % p,
        }
    }

    /// Horner evaluation of `coeffs[0] + coeffs[1] x + ...`.
    pub fn eval_poly(&self, coeffs: &[u64], x: u64) -> u64 {
        coeffs.iter().rev().fold(0, |acc, &c| self.add(self.mul(acc, x), c))
    }
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Carry-less polynomial remainder, used to test irreducibility by trial division.
    fn poly_rem(mut a: u64, b: u64) -> u64 {
        let db = 63 - b.leading_zeros();
        while a != 0 && 63 - a.leading_zeros() >= db {
            a ^= b << (63 - a.leading_zeros() - db);
        }
        a
    }

    #[test]
    fn table_polynomials_are_irreducible() {
        for n in 2..=16u32 {
            let f = IRREDUCIBLE[n as usize] as u64;
            assert_eq!(63 - f.leading_zeros(), n);
            for d in 2u64..(1 << (n / 2 + 1)) {
                if 63 - d.leading_zeros() <= n / 2 && d > 1 {
                    assert_ne!(poly_rem(f, d), 0, "n={n} divisible by {d:#b}");
                }
            }
        }
    }

    #[test]
    fn every_nonzero_element_is_invertible() {
        for field in [Field::binary(3).unwrap(), Field::binary(4).unwrap(), Field::prime(13).unwrap()] {
            for a in 1..field.size() {
                assert_eq!((1..field.size()).filter(|&b| field.mul(a, b) == 1).count(), 1);
            }
        }
    }

    #[test]
    fn gf256_reference_product() {
        let f = Field::binary(8).unwrap();
        assert_eq!(f.mul(0x57, 0x83), 0xC1);
        assert_eq!(f.mul(0x57, 0x13), 0xFE);
    }

    #[test]
    fn rejects_composites() {
        assert!(Field::prime(15).is_err());
        assert!(Field::binary(17).is_err());
    }
}
