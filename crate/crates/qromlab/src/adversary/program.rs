use std::fmt;
use std::sync::Arc;

use crate::oracle::RangeGroup;
use crate::qsim::{RegisterLayout, Unitary, C64};
use crate::{Error, Result};

pub type DigitMap = Arc<dyn Fn(&mut [u64]) -> Result<()> + Send + Sync>;
pub type ColumnMap = Arc<dyn Fn(&[u64], &mut Vec<(Vec<u64>, C64)>) -> Result<()> + Send + Sync>;
pub type PointRead = Arc<dyn Fn(&[u64]) -> Option<u64> + Send + Sync>;
pub type ValueWrite = Arc<dyn Fn(&mut [u64], u64) + Send + Sync>;

/// One access to an oracle slot.
///
/// `input` is what a measurement of the query register would reveal and
/// `read` is the slot point whose value is consumed; they differ only for
/// derived oracles. `None` from `read` makes the query act as the identity on
/// that basis state. `add` must not change anything `read` or `input` look at.
#[derive(Clone)]
pub struct Query {
    pub label: usize,
    pub slot: usize,
    pub input: PointRead,
    pub read: PointRead,
    pub add: ValueWrite,
    pub sub: ValueWrite,
}

impl Query {
    /// `|x, y⟩ → |x, y ⊕ f(x)⟩` with inputs outside `[0, points)` untouched.
    pub fn standard(label: usize, slot: usize, input: usize, output: usize, points: u64, out_dim: u64) -> Self {
        let group = RangeGroup::for_range(out_dim);
        let read: PointRead = Arc::new(move |d: &[u64]| (d[input] < points).then_some(d[input]));
        Self {
            label,
            slot,
            input: read.clone(),
            read,
            add: Arc::new(move |d: &mut [u64], v| d[output] = group.add(d[output], v, out_dim)),
            sub: Arc::new(move |d: &mut [u64], v| d[output] = group.sub(d[output], v, out_dim)),
        }
    }

    pub fn inverse(&self) -> Self {
        Self { add: self.sub.clone(), sub: self.add.clone(), ..self.clone() }
    }
}

impl fmt::Debug for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Query(label={}, slot={})", self.label, self.slot)
    }
}

#[derive(Clone)]
pub enum Step {
    Unitary { targets: Vec<usize>, u: Arc<Unitary>, control: Option<(usize, u64)> },
    /// Classical reversible map with its inverse.
    Map { fwd: DigitMap, inv: DigitMap },
    /// Column-wise unitary with its inverse.
    Columns { fwd: ColumnMap, inv: ColumnMap },
    Query(Query),
    /// Computational-basis measurement of one register.
    Measure(usize),
    /// Marks the start of one verifier invocation.
    Call,
}

impl fmt::Debug for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Unitary { targets, control, .. } => write!(f, "Unitary({targets:?}, control={control:?})"),
            Step::Map { .. } => write!(f, "Map"),
            Step::Columns { .. } => write!(f, "Columns"),
            Step::Query(q) => write!(f, "{q:?}"),
            Step::Measure(p) => write!(f, "Measure({p})"),
            Step::Call => write!(f, "Call"),
        }
    }
}

impl Step {
    pub fn unitary(layout: &RegisterLayout, targets: &[&str], u: Unitary) -> Result<Self> {
        let targets = targets.iter().map(|t| layout.position(t)).collect::<Result<_>>()?;
        Ok(Step::Unitary { targets, u: Arc::new(u), control: None })
    }

    pub fn controlled(layout: &RegisterLayout, control: (&str, u64), targets: &[&str], u: Unitary) -> Result<Self> {
        let targets = targets.iter().map(|t| layout.position(t)).collect::<Result<_>>()?;
        Ok(Step::Unitary { targets, u: Arc::new(u), control: Some((layout.position(control.0)?, control.1)) })
    }

    pub fn map<F, G>(fwd: F, inv: G) -> Self
    where
        F: Fn(&mut [u64]) -> Result<()> + Send + Sync + 'static,
        G: Fn(&mut [u64]) -> Result<()> + Send + Sync + 'static,
    {
        Step::Map { fwd: Arc::new(fwd), inv: Arc::new(inv) }
    }

    /// Exchange two registers of equal dimension.
    pub fn swap(layout: &RegisterLayout, a: &str, b: &str) -> Result<Self> {
        let (pa, pb) = (layout.position(a)?, layout.position(b)?);
        if layout.dim(pa) != layout.dim(pb) {
            return Err(Error::DimensionMismatch(format!("cannot swap `{a}` and `{b}`")));
        }
        let f = move |d: &mut [u64]| {
            d.swap(pa, pb);
            Ok(())
        };
        Ok(Self::map(f, f))
    }

    /// `reg += value` modulo its dimension.
    pub fn add_const(layout: &RegisterLayout, reg: &str, value: u64) -> Result<Self> {
        let p = layout.position(reg)?;
        let n = layout.dim(p);
        let v = value % n;
        Ok(Self::map(
            move |d| {
                d[p] = (d[p] + v) % n;
                Ok(())
            },
            move |d| {
                d[p] = (d[p] + n - v) % n;
                Ok(())
            },
        ))
    }

    /// `to += from` modulo the dimension of `to`.
    pub fn add_from(layout: &RegisterLayout, from: &str, to: &str) -> Result<Self> {
        let (pf, pt) = (layout.position(from)?, layout.position(to)?);
        let n = layout.dim(pt);
        Ok(Self::map(
            move |d| {
                d[pt] = (d[pt] + d[pf] % n) % n;
                Ok(())
            },
            move |d| {
                d[pt] = (d[pt] + n - d[pf] % n) % n;
                Ok(())
            },
        ))
    }

    pub fn measure(layout: &RegisterLayout, reg: &str) -> Result<Self> {
        Ok(Step::Measure(layout.position(reg)?))
    }

    pub fn inverse(&self) -> Result<Self> {
        Ok(match self {
            Step::Unitary { targets, u, control } => {
                Step::Unitary { targets: targets.clone(), u: Arc::new(u.dagger()), control: *control }
            }
            Step::Map { fwd, inv } => Step::Map { fwd: inv.clone(), inv: fwd.clone() },
            Step::Columns { fwd, inv } => Step::Columns { fwd: inv.clone(), inv: fwd.clone() },
            Step::Query(q) => Step::Query(q.inverse()),
            Step::Measure(_) => return Err(Error::InvalidParameter("a measurement has no inverse".into())),
            Step::Call => Step::Call,
        })
    }
}

/// The inverse of a measurement-free step list.
///
/// A `Call` marker stays at the front of its block.
pub fn invert(steps: &[Step]) -> Result<Vec<Step>> {
    let mut out = Vec::with_capacity(steps.len());
    let marked = matches!(steps.first(), Some(Step::Call));
    if marked {
        out.push(Step::Call);
    }
    for s in steps.iter().skip(marked as usize).rev() {
        out.push(s.inverse()?);
    }
    Ok(out)
}
