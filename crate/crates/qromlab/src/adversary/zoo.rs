use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::exec::{self, Branch, Interceptor, Slot, Transparent};
use super::program::{Query, Step};
use crate::oracle::{ClassicalOracle, Domain};
use crate::qsim::{RegisterLayout, StateVector, Unitary, C64};
use crate::{Error, Result};

pub type OutputFn = Arc<dyn Fn(&[u64]) -> Vec<u64> + Send + Sync>;

/// A query algorithm against one oracle in slot 0, label 0.
///
/// `output` reads the algorithm's answer off a final basis state; for the
/// measure-and-reprogram experiments its first entries are the claimed
/// points and the rest is auxiliary output.
#[derive(Clone)]
pub struct OracleAlgorithm {
    pub name: String,
    pub layout: Arc<RegisterLayout>,
    pub steps: Vec<Step>,
    pub queries: usize,
    pub output: OutputFn,
}

impl fmt::Debug for OracleAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OracleAlgorithm({}, q={})", self.name, self.queries)
    }
}

impl OracleAlgorithm {
    pub fn run(&self, slot: Slot, icpt: &dyn Interceptor) -> Result<Vec<Branch>> {
        let start = Branch::new(StateVector::zero(self.layout.clone()), vec![slot]);
        exec::run(&self.steps, vec![start], icpt)
    }

    /// Exact output distribution with oracle `h`.
    pub fn distribution(&self, h: &ClassicalOracle) -> Result<BTreeMap<Vec<u64>, f64>> {
        let out = self.run(Slot::fixed(h.clone()), &Transparent)?;
        Ok(exec::distribution(&out, |_, d| (self.output)(d)))
    }
}

struct Builder {
    layout: Arc<RegisterLayout>,
    steps: Vec<Step>,
    queries: usize,
    points: u64,
}

impl Builder {
    fn new(regs: &[(&str, u64)], points: u64) -> Result<Self> {
        Ok(Self { layout: RegisterLayout::new(regs)?.shared(), steps: Vec::new(), queries: 0, points })
    }

    fn pos(&self, r: &str) -> usize {
        self.layout.position(r).expect("builder registers are fixed")
    }

    fn u(mut self, regs: &[&str], u: Unitary) -> Result<Self> {
        self.steps.push(Step::unitary(&self.layout, regs, u)?);
        Ok(self)
    }

    fn fourier(self, reg: &str) -> Result<Self> {
        let n = self.layout.dim_of(reg)? as usize;
        self.u(&[reg], Unitary::dft(n))
    }

    fn fourier_inv(self, reg: &str) -> Result<Self> {
        let n = self.layout.dim_of(reg)? as usize;
        self.u(&[reg], Unitary::dft(n).dagger())
    }

    fn add(mut self, reg: &str, v: u64) -> Result<Self> {
        self.steps.push(Step::add_const(&self.layout, reg, v)?);
        Ok(self)
    }

    fn add_from(mut self, from: &str, to: &str) -> Result<Self> {
        self.steps.push(Step::add_from(&self.layout, from, to)?);
        Ok(self)
    }

    fn step(mut self, s: Step) -> Self {
        self.steps.push(s);
        self
    }

    fn query(mut self, input: &str, output: &str) -> Result<Self> {
        let (i, o) = (self.pos(input), self.pos(output));
        let out_dim = self.layout.dim(o);
        self.steps.push(Step::Query(Query::standard(0, 0, i, o, self.points, out_dim)));
        self.queries += 1;
        Ok(self)
    }

    fn finish(self, name: impl Into<String>, output: OutputFn) -> OracleAlgorithm {
        OracleAlgorithm { name: name.into(), layout: self.layout, steps: self.steps, queries: self.queries, output }
    }
}

/// `2|u⟩⟨u| - I` on `n` states.
pub fn diffusion(n: usize) -> Result<Unitary> {
    let mut m = DMatrix::from_element(n, n, C64::new(2.0 / n as f64, 0.0));
    for i in 0..n {
        m[(i, i)] -= C64::new(1.0, 0.0);
    }
    Unitary::new(m)
}

/// A seeded unitary from the QR factorization of a random complex matrix.
pub fn seeded_unitary(n: usize, seed: u64) -> Result<Unitary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    Unitary::new(m.qr().q())
}

fn outputs(positions: Vec<usize>) -> OutputFn {
    Arc::new(move |d: &[u64]| positions.iter().map(|&p| d[p]).collect())
}

fn phase_prep(b: Builder, reg: &str) -> Result<Builder> {
    let n = b.layout.dim_of(reg)? as usize;
    b.add(reg, 1)?.u(&[reg], Unitary::dft(n))
}

/// Single-point algorithms on registers `X` (domain) and `Y` (range),
/// output `(X, Y)`, with at most `max_q` queries.
pub fn single_zoo(points: u64, range: u64, max_q: usize) -> Result<Vec<OracleAlgorithm>> {
    if points < 2 || range < 2 {
        return Err(Error::InvalidParameter("zoo needs at least two points and two values".into()));
    }
    let regs = [("X", points), ("Y", range)];
    let new = || Builder::new(&regs, points);
    let out = || outputs(vec![0, 1]);
    let n = points as usize;
    let mut zoo = vec![new()?.add("X", 1)?.finish("constant", out())];
    if max_q >= 1 {
        for p in [0, points - 1] {
            zoo.push(new()?.add("X", p)?.query("X", "Y")?.finish(format!("classical({p})"), out()));
        }
        zoo.push(phase_prep(new()?.fourier("X")?, "Y")?.query("X", "Y")?.fourier_inv("X")?.finish("kickback", out()));
        zoo.push(phase_prep(new()?.fourier("X")?, "Y")?.query("X", "Y")?.u(&["X"], diffusion(n)?)?.finish("grover(1)", out()));
    }
    if max_q >= 2 {
        zoo.push(
            new()?
                .fourier("X")?
                .query("X", "Y")?
                .fourier("Y")?
                .query("X", "Y")?
                .fourier_inv("X")?
                .finish("interference", out()),
        );
        zoo.push(
            phase_prep(new()?.fourier("X")?, "Y")?
                .query("X", "Y")?
                .u(&["X"], diffusion(n)?)?
                .query("X", "Y")?
                .u(&["X"], diffusion(n)?)?
                .finish("grover(2)", out()),
        );
        zoo.push(new()?.query("X", "Y")?.add("X", 1)?.query("X", "Y")?.add("X", points - 1)?.finish("parity", out()));
        zoo.push(new()?.query("X", "Y")?.add("X", 1)?.add_from("Y", "X")?.query("X", "Y")?.finish("adaptive", out()));
        let dim = n * range as usize;
        zoo.push(
            new()?
                .u(&["X", "Y"], seeded_unitary(dim, 7)?)?
                .query("X", "Y")?
                .u(&["X", "Y"], seeded_unitary(dim, 8)?)?
                .query("X", "Y")?
                .u(&["X", "Y"], seeded_unitary(dim, 9)?)?
                .finish("random(7)", out()),
        );
    }
    Ok(zoo)
}

/// Two-point algorithms on `X, Z` (domain) and `Y, W` (range), output
/// `(X, Z, Y, W)`, with at most `max_q` queries.
pub fn pair_zoo(points: u64, range: u64, max_q: usize) -> Result<Vec<OracleAlgorithm>> {
    let regs = [("X", points), ("Y", range), ("Z", points), ("W", range)];
    let new = || Builder::new(&regs, points);
    let out = || outputs(vec![0, 2, 1, 3]);
    let mut zoo = vec![new()?.add("Z", 1)?.finish("constant-pair", out())];
    if max_q >= 1 {
        zoo.push(new()?.fourier("X")?.query("X", "Y")?.add("Z", 1)?.add_from("X", "Z")?.finish("one-query-pair", out()));
    }
    if max_q >= 2 {
        zoo.push(new()?.add("Z", 1)?.query("X", "Y")?.query("Z", "W")?.finish("classical-pair", out()));
        zoo.push(
            new()?
                .fourier("X")?
                .fourier("Z")?
                .query("X", "Y")?
                .query("Z", "W")?
                .fourier_inv("X")?
                .finish("superposed-pair", out()),
        );
        zoo.push(new()?.query("X", "Y")?.add("Z", 1)?.add_from("Y", "Z")?.query("Z", "W")?.finish("adaptive-pair", out()));
        let dim = (points * range) as usize;
        zoo.push(
            new()?
                .u(&["X", "Y"], seeded_unitary(dim, 11)?)?
                .query("X", "Y")?
                .add_from("X", "Z")?
                .u(&["Z", "W"], seeded_unitary(dim, 12)?)?
                .query("Z", "W")?
                .finish("random-pair", out()),
        );
    }
    Ok(zoo)
}

/// Algorithms over the prefix domain `M^{≤2}` that output a transcript in
/// `M^2` held in registers `O1, O2`. Queries go through register `X`
/// (a domain index) into `Y`.
pub fn prefix_zoo(alphabet: u64, max_q: usize) -> Result<Vec<OracleAlgorithm>> {
    let domain = Arc::new(Domain::prefixes(alphabet, 2)?);
    let size = domain.size();
    let regs = [("X", size), ("Y", 2), ("O1", alphabet), ("O2", alphabet), ("S", 2)];
    let new = || Builder::new(&regs, size);
    let out = || outputs(vec![2, 3]);
    let (x, o1, o2) = (0usize, 2usize, 3usize);
    // X += index of (O1) or (O1, O2), reversibly.
    let load = |two: bool, sign: bool| {
        let d = domain.clone();
        let f = move |dg: &mut [u64], neg: bool| -> Result<()> {
            let t: Vec<u64> = if two { vec![dg[o1], dg[o2]] } else { vec![dg[o1]] };
            let i = d.index(&t)?;
            dg[x] = if neg { (dg[x] + size - i) % size } else { (dg[x] + i) % size };
            Ok(())
        };
        let g = f.clone();
        Step::map(move |dg| f(dg, !sign), move |dg| g(dg, sign))
    };
    let fixed = |b: Builder, m: [u64; 2]| -> Result<Builder> { b.add("O1", m[0])?.add("O2", m[1]) };
    let mut zoo = vec![fixed(new()?, [1, 0])?.finish("fixed-output", out())];
    if max_q >= 1 {
        // Query (m1) in superposition, copy the answer into m2.
        zoo.push(
            new()?
                .fourier("O1")?
                .step(load(false, true))
                .query("X", "Y")?
                .step(load(false, false))
                .add_from("Y", "O2")?
                .finish("first-prefix", out()),
        );
    }
    if max_q >= 2 {
        // Honest-looking: query (m1), answer with m2 = m1 + H(m1), query (m1, m2).
        zoo.push(
            new()?
                .add("O1", 1)?
                .step(load(false, true))
                .query("X", "Y")?
                .step(load(false, false))
                .add_from("Y", "O2")?
                .add_from("O1", "O2")?
                .step(load(true, true))
                .query("X", "S")?
                .step(load(true, false))
                .finish("two-prefixes", out()),
        );
        zoo.push(
            new()?
                .fourier("O1")?
                .fourier("O2")?
                .step(load(true, true))
                .query("X", "Y")?
                .step(load(true, false))
                .step(load(false, true))
                .query("X", "S")?
                .step(load(false, false))
                .finish("superposed-transcript", out()),
        );
        // Queries (0) and then (1, 0): never prefix-consistent.
        let i0 = domain.index(&[0])?;
        let i10 = domain.index(&[1, 0])?;
        zoo.push(
            new()?
                .add("X", i0)?
                .query("X", "Y")?
                .add("X", size - i0)?
                .add("X", i10)?
                .query("X", "S")?
                .add("X", size - i10)?
                .add("O1", 1)?
                .finish("inconsistent", out()),
        );
    }
    Ok(zoo)
}

type Gate = Box<dyn Fn(Builder) -> Result<Builder>>;

/// Every circuit `G_q · Q · … · Q · G_0` with `G_i` from a fixed gate set
/// on `X, Y`, for `q ≤ max_q`; used to search for tight instances.
pub fn small_circuits(points: u64, range: u64, max_q: usize) -> Result<Vec<OracleAlgorithm>> {
    let regs = [("X", points), ("Y", range)];
    let gates: Vec<(&str, Gate)> = vec![
        ("I", Box::new(Ok)),
        ("F", Box::new(|b: Builder| b.fourier("X"))),
        ("S", Box::new(|b: Builder| b.add("X", 1))),
        ("P", Box::new(|b: Builder| phase_prep(b, "Y"))),
    ];
    let mut out = Vec::new();
    for q in 0..=max_q {
        let total = gates.len().pow(q as u32 + 1);
        for code in 0..total {
            let mut b = Builder::new(&regs, points)?;
            let mut c = code;
            let mut label = String::new();
            for i in 0..=q {
                let (name, g) = &gates[c % gates.len()];
                c /= gates.len();
                label.push_str(name);
                b = g(b)?;
                if i < q {
                    b = b.query("X", "Y")?;
                    label.push('Q');
                }
            }
            out.push(b.finish(format!("circuit({label})"), outputs(vec![0, 1])));
        }
    }
    Ok(out)
}
