use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Domain;
use crate::qsim::StateVector;
use crate::{Error, Result};

/// How a query adds the oracle value into the output register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RangeGroup {
    /// Bitwise XOR; used when the range size is a power of two.
    Xor,
    /// Addition modulo the output register dimension.
    ModAdd,
}

impl RangeGroup {
    pub fn for_range(range: u64) -> Self {
        if range.is_power_of_two() {
            RangeGroup::Xor
        } else {
            RangeGroup::ModAdd
        }
    }

    pub fn add(self, y: u64, v: u64, modulus: u64) -> u64 {
        match self {
            RangeGroup::Xor => y ^ v,
            RangeGroup::ModAdd => (y + v % modulus) % modulus,
        }
    }

    pub fn sub(self, y: u64, v: u64, modulus: u64) -> u64 {
        match self {
            RangeGroup::Xor => y ^ v,
            RangeGroup::ModAdd => (y + modulus - v % modulus) % modulus,
        }
    }
}

type PointFn = Arc<dyn Fn(u64) -> u64 + Send + Sync>;

#[derive(Clone)]
enum Base {
    Const(u64),
    Table(Arc<Vec<u64>>),
    Func(PointFn),
}

/// A function from a [`Domain`] into `[0, range)`.
///
/// Values are immutable: reprogramming returns a new oracle that shares the
/// base table and records the change as an override.
#[derive(Clone)]
pub struct ClassicalOracle {
    domain: Arc<Domain>,
    range: u64,
    group: RangeGroup,
    base: Base,
    overrides: BTreeMap<u64, u64>,
}

impl fmt::Debug for ClassicalOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match &self.base {
            Base::Const(c) => format!("const {c}"),
            Base::Table(t) => format!("table of {}", t.len()),
            Base::Func(_) => "function".to_string(),
        };
        f.debug_struct("ClassicalOracle")
            .field("domain_size", &self.domain.size())
            .field("range", &self.range)
            .field("base", &base)
            .field("overrides", &self.overrides)
            .finish()
    }
}

impl PartialEq for ClassicalOracle {
    /// Extensional equality, only decidable on small domains.
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain
            && self.range == other.range
            && self.domain.size() <= 1 << 20
            && (0..self.domain.size()).all(|p| self.eval(p) == other.eval(p))
    }
}

/// Canonical JSON form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleJson {
    pub domain_order: Vec<Vec<u64>>,
    pub values: Vec<u64>,
}

impl ClassicalOracle {
    pub fn constant(domain: Arc<Domain>, range: u64, value: u64) -> Result<Self> {
        check_value(value, range)?;
        Ok(Self { group: RangeGroup::for_range(range), domain, range, base: Base::Const(value), overrides: BTreeMap::new() })
    }

    pub fn zero(domain: Arc<Domain>, range: u64) -> Result<Self> {
        Self::constant(domain, range, 0)
    }

    pub fn from_table(domain: Arc<Domain>, range: u64, table: Vec<u64>) -> Result<Self> {
        if table.len() as u64 != domain.size() {
            return Err(Error::DimensionMismatch(format!(
                "table of length {} for a domain of {} points",
                table.len(),
                domain.size()
            )));
        }
        for &v in &table {
            check_value(v, range)?;
        }
        Ok(Self {
            group: RangeGroup::for_range(range),
            domain,
            range,
            base: Base::Table(Arc::new(table)),
            overrides: BTreeMap::new(),
        })
    }

    /// An oracle computed on demand; `f` must return values below `range`.
    pub fn from_fn<F>(domain: Arc<Domain>, range: u64, f: F) -> Self
    where
        F: Fn(u64) -> u64 + Send + Sync + 'static,
    {
        Self { group: RangeGroup::for_range(range), domain, range, base: Base::Func(Arc::new(f)), overrides: BTreeMap::new() }
    }

    pub fn with_group(mut self, group: RangeGroup) -> Self {
        self.group = group;
        self
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn range(&self) -> u64 {
        self.range
    }

    pub fn group(&self) -> RangeGroup {
        self.group
    }

    pub fn eval(&self, point: u64) -> u64 {
        if let Some(&v) = self.overrides.get(&point) {
            return v;
        }
        match &self.base {
            Base::Const(c) => *c,
            Base::Table(t) => t[point as usize],
            Base::Func(f) => f(point),
        }
    }

    pub fn try_eval(&self, point: u64) -> Result<u64> {
        if point >= self.domain.size() {
            return Err(Error::PointOutOfDomain(point));
        }
        Ok(self.eval(point))
    }

    pub fn eval_tuple(&self, point: &[u64]) -> Result<u64> {
        Ok(self.eval(self.domain.index(point)?))
    }

    /// A copy with `point` mapped to `value`.
    pub fn reprogram(&self, point: u64, value: u64) -> Result<Self> {
        if point >= self.domain.size() {
            return Err(Error::PointOutOfDomain(point));
        }
        check_value(value, self.range)?;
        let mut o = self.clone();
        o.overrides.insert(point, value);
        Ok(o)
    }

    pub fn reprogram_many(&self, events: &[(u64, u64)]) -> Result<Self> {
        let mut o = self.clone();
        for &(p, v) in events {
            o = o.reprogram(p, v)?;
        }
        Ok(o)
    }

    /// Overridden points, in order.
    pub fn overrides(&self) -> &BTreeMap<u64, u64> {
        &self.overrides
    }

    pub fn to_table(&self) -> Result<Vec<u64>> {
        let n = self.domain.size();
        if n > 1 << 20 {
            return Err(Error::DomainTooLarge { size: n as u128, limit: 1 << 20 });
        }
        Ok((0..n).map(|p| self.eval(p)).collect())
    }

    pub fn to_json(&self) -> Result<OracleJson> {
        let n = self.domain.size();
        if n > 1 << 16 {
            return Err(Error::DomainTooLarge { size: n as u128, limit: 1 << 16 });
        }
        Ok(OracleJson { domain_order: self.domain.points().collect(), values: self.to_table()? })
    }

    pub fn from_json(json: &OracleJson, domain: Arc<Domain>, range: u64) -> Result<Self> {
        let expected: Vec<Vec<u64>> = domain.points().collect();
        if expected != json.domain_order {
            return Err(Error::InvalidParameter("domain order does not match the canonical order".into()));
        }
        Self::from_table(domain, range, json.values.clone())
    }
}

fn check_value(value: u64, range: u64) -> Result<()> {
    if value >= range {
        return Err(Error::ValueOutOfRange { value, range });
    }
    Ok(())
}

/// `|x, y> -> |x, y ⊕ f(x)>` on registers `input` and `output`.
///
/// Input values beyond the domain are left untouched.
pub fn quantum_query(state: &StateVector, oracle: &ClassicalOracle, input: &str, output: &str) -> Result<StateVector> {
    let layout = state.layout();
    let i = layout.position(input)?;
    let o = layout.position(output)?;
    query_at(state, oracle, i, o)
}

pub(crate) fn query_at(state: &StateVector, oracle: &ClassicalOracle, i: usize, o: usize) -> Result<StateVector> {
    let layout = state.layout();
    let out_dim = layout.dim(o);
    if out_dim < oracle.range() {
        return Err(Error::EncodingOverflow(format!(
            "output register `{}` of dimension {out_dim} cannot hold range {}",
            layout.name(o),
            oracle.range()
        )));
    }
    if oracle.group() == RangeGroup::Xor && !out_dim.is_power_of_two() {
        return Err(Error::EncodingOverflow("XOR query needs a power-of-two output register".into()));
    }
    let size = oracle.domain().size();
    let group = oracle.group();
    state.apply_map(|d| {
        if d[i] < size {
            d[o] = group.add(d[o], oracle.eval(d[i]), out_dim);
        }
        Ok(())
    })
}

/// Inverse of [`query_at`].
#[cfg(test)]
fn query_inverse_at(state: &StateVector, oracle: &ClassicalOracle, i: usize, o: usize) -> Result<StateVector> {
    let layout = state.layout();
    let out_dim = layout.dim(o);
    let size = oracle.domain().size();
    let group = oracle.group();
    state.apply_map(|d| {
        if d[i] < size {
            d[o] = group.sub(d[o], oracle.eval(d[i]), out_dim);
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{RegisterLayout, Unitary};

    fn dom() -> Arc<Domain> {
        Arc::new(Domain::flat(4).unwrap())
    }

    #[test]
    fn reprogram_is_a_new_value() {
        let o = ClassicalOracle::zero(dom(), 2).unwrap();
        let p = o.reprogram(3, 1).unwrap();
        assert_eq!(o.eval(3), 0);
        assert_eq!(p.eval(3), 1);
        assert!(o.reprogram(4, 1).is_err());
        assert!(o.reprogram(0, 2).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let o = ClassicalOracle::from_table(dom(), 3, vec![0, 2, 1, 2]).unwrap();
        let j = o.to_json().unwrap();
        let s = serde_json::to_string(&j).unwrap();
        let back: OracleJson = serde_json::from_str(&s).unwrap();
        assert_eq!(ClassicalOracle::from_json(&back, dom(), 3).unwrap(), o);
    }

    #[test]
    fn query_twice_is_identity_and_mod_add_inverts() {
        let layout = RegisterLayout::new(&[("x", 4), ("y", 3)]).unwrap().shared();
        let s = StateVector::zero(layout.clone()).apply_unitary(&["x"], &Unitary::dft(4)).unwrap();
        let o = ClassicalOracle::from_table(dom(), 3, vec![0, 2, 1, 2]).unwrap();
        let once = quantum_query(&s, &o, "x", "y").unwrap();
        assert_ne!(once, s);
        let w = once.register_weights("y").unwrap();
        assert!((w[&2] - 0.5).abs() < 1e-12);
        let back = query_inverse_at(&once, &o, 0, 1).unwrap();
        assert_eq!(back, s);

        let bits = RegisterLayout::new(&[("x", 4), ("y", 2)]).unwrap().shared();
        let b = ClassicalOracle::from_table(dom(), 2, vec![1, 0, 1, 1]).unwrap();
        let s = StateVector::zero(bits).apply_unitary(&["x"], &Unitary::dft(4)).unwrap();
        let twice = quantum_query(&quantum_query(&s, &b, "x", "y").unwrap(), &b, "x", "y").unwrap();
        assert!((twice.inner(&s).unwrap().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn output_register_too_small() {
        let layout = RegisterLayout::new(&[("x", 4), ("y", 2)]).unwrap().shared();
        let o = ClassicalOracle::zero(dom(), 3).unwrap();
        let s = StateVector::zero(layout);
        assert!(matches!(quantum_query(&s, &o, "x", "y"), Err(Error::EncodingOverflow(_))));
    }
}
