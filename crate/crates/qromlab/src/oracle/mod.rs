//! Classical functions given quantum query access, and the sparse
//! Bernoulli oracle distribution.

mod dist;
mod domain;
mod table;

pub use dist::{sparse_vs_zero_bound, SparseOracleDist, ValueDist, WeightedTables};
pub use domain::Domain;
pub use table::{quantum_query, ClassicalOracle, OracleJson, RangeGroup};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

/// Parse `"B/A"` into an exact rational.
pub fn parse_ratio(s: &str) -> crate::Result<BigRational> {
    let bad = || crate::Error::InvalidParameter(format!("expected a ratio like 1/4, got `{s}`"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d == BigInt::from(0) {
        return Err(bad());
    }
    Ok(BigRational::new(n, d))
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
