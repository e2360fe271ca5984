//! Measurement configurations: initial-state covers, sequence lengths and
//! shot/randomization budgets.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use rayon::prelude::*;

use crate::cycle::{HardCycle, Orbit};
use crate::error::{Error, Result};
use crate::estimation::fit::{fit_decay, shot_weight, FitPoint};
use crate::pauli::{Letter, PauliOperator, QubitSubset};
use crate::seed::derive_seed;
use crate::sim::DecayDataset;

/// Which marginals an experiment targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    /// Idle qubits, one at a time.
    Single,
    /// One gate support at a time.
    OneCnot,
    /// Unions of two gate supports.
    TwoCnot,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Single => "single",
            Level::OneCnot => "1cnot",
            Level::TwoCnot => "2cnot",
        })
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "single" => Ok(Level::Single),
            "1cnot" => Ok(Level::OneCnot),
            "2cnot" => Ok(Level::TwoCnot),
            other => Err(Error::InvalidDesign(format!("unknown level {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarginalTarget {
    level: Level,
    subsets: Vec<QubitSubset>,
}

impl MarginalTarget {
    /// Every subset of the given level: idle qubits, single gate supports, or all
    /// pairs of gate supports.
    pub fn for_level(h: &HardCycle, level: Level) -> Result<Self> {
        let blocks = h.blocks();
        let (idle, gated): (Vec<_>, Vec<_>) = blocks.into_iter().partition(|b| b.len() == 1);
        let subsets = match level {
            Level::Single => idle,
            Level::OneCnot => gated,
            Level::TwoCnot => {
                let mut out = Vec::new();
                for i in 0..gated.len() {
                    for j in i + 1..gated.len() {
                        out.push(gated[i].union(&gated[j]));
                    }
                }
                out
            }
        };
        MarginalTarget::new(h, level, subsets)
    }

    /// Explicit subsets, checked to be unions of the right number of blocks.
    pub fn new(h: &HardCycle, level: Level, subsets: Vec<QubitSubset>) -> Result<Self> {
        if subsets.is_empty() {
            return Err(Error::InvalidDesign(format!(
                "no {level} subsets for cycle {h}"
            )));
        }
        let blocks = h.blocks();
        for s in &subsets {
            h.check_closed(s)?;
            let parts: Vec<&QubitSubset> = blocks
                .iter()
                .filter(|b| b.mask() & s.mask() != 0)
                .collect();
            let ok = match level {
                Level::Single => parts.len() == 1 && parts[0].len() == 1,
                Level::OneCnot => parts.len() == 1 && parts[0].len() > 1,
                Level::TwoCnot => parts.len() == 2 && parts.iter().all(|b| b.len() > 1),
            };
            if !ok {
                return Err(Error::InvalidSubset(format!(
                    "subset {s} does not match level {level}"
                )));
            }
        }
        if level != Level::TwoCnot {
            let mut used = 0u64;
            for s in &subsets {
                if used & s.mask() != 0 {
                    return Err(Error::InvalidSubset(format!("subset {s} overlaps another")));
                }
                used |= s.mask();
            }
        }
        Ok(MarginalTarget { level, subsets })
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn subsets(&self) -> &[QubitSubset] {
        &self.subsets
    }
}

/// A single-qubit Pauli eigenstate such as `Z+` or `X-`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Eigenstate {
    pub axis: Letter,
    pub positive: bool,
}

impl Eigenstate {
    pub fn new(axis: Letter, positive: bool) -> Result<Self> {
        if axis == Letter::I {
            return Err(Error::Unsatisfiable("no eigenstate basis for I".into()));
        }
        Ok(Eigenstate { axis, positive })
    }

    pub fn plus(axis: Letter) -> Result<Self> {
        Eigenstate::new(axis, true)
    }
}

impl fmt::Display for Eigenstate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.axis.as_char(), if self.positive { '+' } else { '-' })
    }
}

impl FromStr for Eigenstate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.trim().chars();
        let (Some(a), Some(sign), None) = (chars.next(), chars.next(), chars.next()) else {
            return Err(Error::Unsatisfiable(format!("bad eigenstate label {s:?}")));
        };
        let axis = Letter::from_char(a)
            .ok_or_else(|| Error::Unsatisfiable(format!("bad eigenstate axis {a:?}")))?;
        let positive = match sign {
            '+' => true,
            '-' | '\u{2212}' => false,
            _ => return Err(Error::Unsatisfiable(format!("bad eigenstate sign {sign:?}"))),
        };
        Eigenstate::new(axis, positive)
    }
}

/// A product of eigenstates, one per qubit.
pub type ProductState = Vec<Eigenstate>;

/// Prepared basis of a product state as a Pauli operator.
pub fn state_basis(state: &[Eigenstate]) -> PauliOperator {
    let letters: Vec<Letter> = state.iter().map(|e| e.axis).collect();
    PauliOperator::from_letters(&letters).expect("state has at most 64 qubits")
}

/// An orbit of the full register measurable from a state through `observable`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Measurement {
    pub orbit: Orbit,
    pub observable: PauliOperator,
}

/// Whether every non-identity letter of `q` agrees with the prepared basis.
fn matches(basis: &PauliOperator, q: &PauliOperator) -> bool {
    let s = q.support_mask();
    (basis.x_mask() & s) == q.x_mask() && (basis.z_mask() & s) == q.z_mask()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignPlan {
    cycle: HardCycle,
    target: MarginalTarget,
    initial_states: Vec<ProductState>,
    sequence_lengths: Vec<usize>,
    randomizations: usize,
    shots: usize,
    seed: Option<u64>,
    coverage: Vec<Vec<Measurement>>,
}

pub const DEFAULT_RANDOMIZATIONS: usize = 40;
pub const DEFAULT_SHOTS: usize = 150;

impl DesignPlan {
    pub fn new(
        cycle: HardCycle,
        target: MarginalTarget,
        initial_states: Vec<ProductState>,
        sequence_lengths: Vec<usize>,
        randomizations: usize,
        shots: usize,
    ) -> Result<Self> {
        let n = cycle.num_qubits();
        for s in &initial_states {
            if s.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: s.len(),
                });
            }
        }
        if initial_states.is_empty() {
            return Err(Error::InvalidDesign("no initial states".into()));
        }
        check_lengths(&cycle, &sequence_lengths)?;
        if randomizations == 0 || shots == 0 {
            return Err(Error::InvalidDesign("randomizations and shots must be positive".into()));
        }
        let coverage = coverage(&cycle, &target, &initial_states)?;
        Ok(DesignPlan {
            cycle,
            target,
            initial_states,
            sequence_lengths,
            randomizations,
            shots,
            seed: None,
            coverage,
        })
    }

    pub fn with_sequence_lengths(mut self, lengths: Vec<usize>) -> Result<Self> {
        check_lengths(&self.cycle, &lengths)?;
        self.sequence_lengths = lengths;
        Ok(self)
    }

    pub fn with_budget(mut self, randomizations: usize, shots: usize) -> Result<Self> {
        if randomizations == 0 || shots == 0 {
            return Err(Error::InvalidDesign("randomizations and shots must be positive".into()));
        }
        self.randomizations = randomizations;
        self.shots = shots;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn cycle(&self) -> &HardCycle {
        &self.cycle
    }

    pub fn target(&self) -> &MarginalTarget {
        &self.target
    }

    pub fn initial_states(&self) -> &[ProductState] {
        &self.initial_states
    }

    pub fn sequence_lengths(&self) -> &[usize] {
        &self.sequence_lengths
    }

    pub fn randomizations(&self) -> usize {
        self.randomizations
    }

    pub fn shots(&self) -> usize {
        self.shots
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Orbits (full register) measured from each initial state, with the observable used.
    pub fn measurements(&self) -> &[Vec<Measurement>] {
        &self.coverage
    }

    pub fn covered_orbits(&self, state: usize) -> Vec<&Orbit> {
        self.coverage[state].iter().map(|m| &m.orbit).collect()
    }

    /// All non-identity target orbits of the full register, deduplicated.
    pub fn target_orbits(&self) -> Result<BTreeSet<PauliOperator>> {
        let mut out = BTreeSet::new();
        for s in self.target.subsets() {
            for o in self.cycle.enumerate_orbits(s)? {
                if !o.is_identity() {
                    out.insert(*o.embed(&self.cycle, s)?.representative());
                }
            }
        }
        Ok(out)
    }
}

fn check_lengths(cycle: &HardCycle, lengths: &[usize]) -> Result<()> {
    let order = cycle.order();
    if lengths.is_empty() {
        return Err(Error::InvalidDesign("no sequence lengths".into()));
    }
    for &m in lengths {
        if m % order != 0 {
            return Err(Error::InvalidDesign(format!(
                "sequence length {m} is not a multiple of the cycle order {order}"
            )));
        }
    }
    if lengths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidDesign("sequence lengths must be strictly increasing".into()));
    }
    Ok(())
}

fn coverage(h: &HardCycle, target: &MarginalTarget, states: &[ProductState]) -> Result<Vec<Vec<Measurement>>> {
    let bases: Vec<PauliOperator> = states.iter().map(|s| state_basis(s)).collect();
    let mut out: Vec<Vec<Measurement>> = vec![Vec::new(); states.len()];
    let mut seen: Vec<BTreeSet<PauliOperator>> = vec![BTreeSet::new(); states.len()];
    for s in target.subsets() {
        for o in h.enumerate_orbits(s)? {
            if o.is_identity() {
                continue;
            }
            let full = o.embed(h, s)?;
            let mut covered = false;
            for (i, basis) in bases.iter().enumerate() {
                let hit = full.members().iter().find(|q| matches(basis, q));
                if let Some(q) = hit {
                    covered = true;
                    if seen[i].insert(*full.representative()) {
                        out[i].push(Measurement {
                            orbit: full.clone(),
                            observable: *q,
                        });
                    }
                }
            }
            if !covered {
                return Err(Error::InvalidDesign(format!(
                    "orbit {o} of subset {s} is not covered by any initial state"
                )));
            }
        }
    }
    for m in &mut out {
        m.sort_by(|a, b| a.orbit.representative().cmp(b.orbit.representative()));
    }
    Ok(out)
}

/// Letter assignments of `k` qubits in lexicographic order.
fn assignments(k: usize) -> Vec<Vec<Letter>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|a| {
                Letter::NON_IDENTITY.iter().map(move |&l| {
                    let mut b = a.clone();
                    b.push(l);
                    b
                })
            })
            .collect();
    }
    out
}

/// Greedy cover of the non-identity orbits of one block; ties go to the
/// lexicographically first assignment.
fn local_cover(h: &HardCycle, block: &QubitSubset) -> Result<Vec<Vec<Letter>>> {
    let orbits: Vec<Orbit> = h
        .enumerate_orbits(block)?
        .into_iter()
        .filter(|o| !o.is_identity())
        .collect();
    let candidates = assignments(block.len());
    let covers: Vec<Vec<bool>> = candidates
        .iter()
        .map(|c| {
            let basis = PauliOperator::from_letters(c).expect("small block");
            orbits
                .iter()
                .map(|o| o.members().iter().any(|q| matches(&basis, q)))
                .collect()
        })
        .collect();
    let mut uncovered = vec![true; orbits.len()];
    let mut chosen = Vec::new();
    while uncovered.iter().any(|&u| u) {
        let (best, gain) = covers
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.iter().zip(&uncovered).filter(|(a, b)| **a && **b).count()))
            .fold((0, 0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if gain == 0 {
            return Err(Error::InvalidDesign(format!("block {block} has an uncoverable orbit")));
        }
        for (u, &c) in uncovered.iter_mut().zip(&covers[best]) {
            if c {
                *u = false;
            }
        }
        chosen.push(candidates[best].clone());
    }
    Ok(chosen)
}

fn blocks_of(h: &HardCycle, target: &MarginalTarget) -> Vec<QubitSubset> {
    let used: u64 = target.subsets().iter().fold(0, |m, s| m | s.mask());
    h.blocks().into_iter().filter(|b| b.mask() & used != 0).collect()
}

fn build_state(n: usize, assign: &[(&QubitSubset, &[Letter])]) -> ProductState {
    let mut letters = vec![Letter::Z; n];
    for (block, l) in assign {
        for (&q, &letter) in block.indices().iter().zip(l.iter()) {
            letters[q] = letter;
        }
    }
    letters
        .into_iter()
        .map(|l| Eigenstate { axis: l, positive: true })
        .collect()
}

/// Initial states covering every non-identity orbit of every target subset.
///
/// Disjoint targets share states by running the per-block greedy covers in
/// parallel. Pairs of blocks use bipartitions from the binary digits of the
/// block index: one side cycles through its greedy cover, the other through
/// every assignment, so each pair is split in at least one bipartition.
/// Qubits outside the target are prepared in `Z+`.
pub fn plan_initial_states(h: &HardCycle, target: &MarginalTarget) -> Result<DesignPlan> {
    let n = h.num_qubits();
    let blocks = blocks_of(h, target);
    let covers = blocks
        .iter()
        .map(|b| local_cover(h, b))
        .collect::<Result<Vec<_>>>()?;
    let mut states: Vec<ProductState> = Vec::new();
    match target.level() {
        Level::Single | Level::OneCnot => {
            let count = covers.iter().map(Vec::len).max().unwrap_or(0);
            for i in 0..count {
                let assign: Vec<(&QubitSubset, &[Letter])> = blocks
                    .iter()
                    .zip(&covers)
                    .map(|(b, c)| (b, c[i % c.len()].as_slice()))
                    .collect();
                states.push(build_state(n, &assign));
            }
        }
        Level::TwoCnot => {
            let fulls: Vec<Vec<Vec<Letter>>> = blocks.iter().map(|b| assignments(b.len())).collect();
            let bits = (usize::BITS - (blocks.len().max(2) - 1).leading_zeros()) as usize;
            let a_count = covers.iter().map(Vec::len).max().unwrap_or(0);
            let b_count = fulls.iter().map(Vec::len).max().unwrap_or(0);
            let mut seen = BTreeSet::new();
            for bit in 0..bits {
                for a in 0..a_count {
                    for b in 0..b_count {
                        let assign: Vec<(&QubitSubset, &[Letter])> = blocks
                            .iter()
                            .enumerate()
                            .map(|(i, blk)| {
                                let l = if (i >> bit) & 1 == 0 {
                                    &covers[i][a % covers[i].len()]
                                } else {
                                    &fulls[i][b % fulls[i].len()]
                                };
                                (blk, l.as_slice())
                            })
                            .collect();
                        let s = build_state(n, &assign);
                        if seen.insert(s.clone()) {
                            states.push(s);
                        }
                    }
                }
            }
        }
    }
    let order = h.order();
    let lengths = align_lengths(&choose_sequence_lengths(0.97, 3)?, order);
    DesignPlan::new(
        h.clone(),
        target.clone(),
        states,
        lengths,
        DEFAULT_RANDOMIZATIONS,
        DEFAULT_SHOTS,
    )
}

/// Even lengths spaced geometrically from 2 to the even integer nearest `1/(1-|λ|)`.
pub fn choose_sequence_lengths(lambda_guess: f64, count: usize) -> Result<Vec<usize>> {
    let a = lambda_guess.abs();
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidDesign(format!(
            "no finite maximal length for eigenvalue {lambda_guess}"
        )));
    }
    if count < 2 {
        return Err(Error::InvalidDesign("need at least two sequence lengths".into()));
    }
    let even = |x: f64| ((x / 2.0).round() as usize * 2).max(2);
    let m_max = even(1.0 / (1.0 - a));
    let mut out: Vec<usize> = (0..count)
        .map(|i| even(2.0 * (m_max as f64 / 2.0).powf(i as f64 / (count - 1) as f64)))
        .collect();
    out.dedup();
    Ok(out)
}

/// Round lengths up to multiples of the cycle order, keeping them distinct.
pub fn align_lengths(lengths: &[usize], order: usize) -> Vec<usize> {
    let mut out: Vec<usize> = lengths.iter().map(|&m| m.div_ceil(order) * order).collect();
    out.dedup();
    out
}

impl fmt::Display for DesignPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cycle {}", self.cycle)?;
        writeln!(f, "level {}", self.target.level())?;
        for s in self.target.subsets() {
            writeln!(f, "subset {s}")?;
        }
        let m: Vec<String> = self.sequence_lengths.iter().map(|m| m.to_string()).collect();
        writeln!(f, "m {}", m.join(" "))?;
        writeln!(f, "randomizations {}", self.randomizations)?;
        writeln!(f, "shots {}", self.shots)?;
        if let Some(seed) = self.seed {
            writeln!(f, "seed {seed}")?;
        }
        for s in &self.initial_states {
            let l: Vec<String> = s.iter().map(|e| e.to_string()).collect();
            writeln!(f, "state {}", l.join(" "))?;
        }
        Ok(())
    }
}

impl FromStr for DesignPlan {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cycle = None;
        let mut level = None;
        let mut subsets = Vec::new();
        let mut lengths = None;
        let mut randomizations = DEFAULT_RANDOMIZATIONS;
        let mut shots = DEFAULT_SHOTS;
        let mut seed = None;
        let mut states = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::parse(i + 1, m);
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            let int = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad integer {s:?}")));
            match key {
                "cycle" => cycle = Some(rest.parse::<HardCycle>().map_err(|e| err(e.to_string()))?),
                "level" => level = Some(rest.parse::<Level>().map_err(|e| err(e.to_string()))?),
                "subset" => subsets.push(rest.parse::<QubitSubset>().map_err(|e| err(e.to_string()))?),
                "m" => lengths = Some(rest.split_whitespace().map(int).collect::<Result<Vec<_>>>()?),
                "randomizations" => randomizations = int(rest)?,
                "shots" => shots = int(rest)?,
                "seed" => seed = Some(rest.parse::<u64>().map_err(|_| err(format!("bad seed {rest:?}")))?),
                "state" => states.push(
                    rest.split_whitespace()
                        .map(|t| t.parse::<Eigenstate>())
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| err(e.to_string()))?,
                ),
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let cycle = cycle.ok_or_else(|| Error::parse(0, "missing cycle"))?;
        let level = level.ok_or_else(|| Error::parse(0, "missing level"))?;
        let target = if subsets.is_empty() {
            MarginalTarget::for_level(&cycle, level)?
        } else {
            MarginalTarget::new(&cycle, level, subsets)?
        };
        let lengths = lengths.ok_or_else(|| Error::parse(0, "missing m"))?;
        let plan = DesignPlan::new(cycle, target, states, lengths, randomizations, shots)?;
        Ok(match seed {
            Some(s) => plan.with_seed(s),
            None => plan,
        })
    }
}

/// Abstract cost of one randomization setup and of one shot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    setup: f64,
    shot: f64,
}

impl CostModel {
    /// A free setup is allowed; shots must cost something.
    pub fn new(cost_per_randomization_setup: f64, cost_per_shot: f64) -> Result<Self> {
        if !(cost_per_randomization_setup >= 0.0 && cost_per_randomization_setup.is_finite())
            || !(cost_per_shot > 0.0 && cost_per_shot.is_finite())
        {
            return Err(Error::InvalidDesign("costs must be finite, shots strictly positive".into()));
        }
        Ok(CostModel {
            setup: cost_per_randomization_setup,
            shot: cost_per_shot,
        })
    }

    pub fn cost(&self, randomizations: usize, shots: usize) -> f64 {
        randomizations as f64 * (self.setup + shots as f64 * self.shot)
    }
}

/// One cell of the budget grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetCell {
    pub randomizations: usize,
    pub shots: usize,
    /// Mean over orbits of the subsampled standard deviation of the fitted eigenvalue.
    pub spread: f64,
    /// Standard error of `spread`.
    pub spread_se: f64,
}

/// Number of subsampled replicates per grid cell.
pub const BUDGET_TRIALS: usize = 200;

fn r_grid(max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut r = 1.0f64;
    while (r as usize) <= max {
        out.push(r as usize);
        r = (r * 1.25).max(r + 1.0);
    }
    if out.last() != Some(&max) {
        out.push(max);
    }
    out
}

/// Grid search over `(R, S)` with `R·(setup + S·shot) ≤ budget`.
///
/// Each cell is scored by subsampling `samples`: randomizations are drawn with
/// replacement within every `(orbit, m)` series and `S` shots are drawn
/// binomially from each drawn randomization's expectation. The smallest spread
/// wins; cells within two standard errors of it count as ties and the largest
/// `R` among them is returned.
pub fn allocate_budget(
    cost: &CostModel,
    total_budget: f64,
    samples: &DecayDataset,
    seed: u64,
) -> Result<(usize, usize, Vec<BudgetCell>)> {
    if samples.records().is_empty() {
        return Err(Error::InsufficientData("empty variance samples".into()));
    }
    let unit = cost.cost(1, 1);
    if total_budget < unit {
        return Err(Error::InvalidDesign(format!(
            "budget {total_budget} is below one configuration ({unit})"
        )));
    }
    let r_max = (total_budget / unit).floor() as usize;
    let cells: Vec<(usize, usize)> = r_grid(r_max)
        .into_iter()
        .filter_map(|r| {
            let s = ((total_budget / r as f64 - cost.setup) / cost.shot + 1e-9).floor() as usize;
            (s >= 1).then_some((r, s))
        })
        .collect();
    let series: Vec<Vec<(usize, Vec<f64>)>> = samples
        .grouped()
        .into_values()
        .map(|by_m| {
            by_m.into_iter()
                .map(|(m, recs)| (m, recs.iter().map(|r| r.expectation).collect()))
                .collect()
        })
        .collect();
    let scored = cells
        .par_iter()
        .enumerate()
        .map(|(ci, &(r, s))| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[ci as u64, r as u64, s as u64]));
            let mut spreads = Vec::new();
            for orbit_series in &series {
                if orbit_series.len() < 2 {
                    continue;
                }
                let mut lambdas = Vec::with_capacity(BUDGET_TRIALS);
                for _ in 0..BUDGET_TRIALS {
                    let points = orbit_series
                        .iter()
                        .map(|(m, values)| {
                            let mut total = 0.0;
                            for _ in 0..r {
                                let e = values[rng.gen_range(0..values.len())];
                                let p = ((1.0 + e) / 2.0).clamp(0.0, 1.0);
                                let plus = Binomial::new(s as u64, p).expect("valid p").sample(&mut rng);
                                total += (2.0 * plus as f64 - s as f64) / s as f64;
                            }
                            let mean = total / r as f64;
                            FitPoint {
                                m: *m,
                                expectation: mean,
                                weight: shot_weight(mean, r * s),
                            }
                        })
                        .collect::<Vec<_>>();
                    if let Ok(fit) = fit_decay(&points) {
                        lambdas.push(fit.lambda);
                    }
                }
                if lambdas.len() >= 2 {
                    spreads.push(std_dev(&lambdas));
                }
            }
            if spreads.is_empty() {
                return Err(Error::InsufficientData(
                    "no orbit has two sequence lengths to fit".into(),
                ));
            }
            let spread = spreads.iter().sum::<f64>() / spreads.len() as f64;
            let spread_se = spread / (2.0 * (BUDGET_TRIALS as f64 - 1.0)).sqrt() / (spreads.len() as f64).sqrt();
            Ok(BudgetCell {
                randomizations: r,
                shots: s,
                spread,
                spread_se,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = scored
        .iter()
        .min_by(|a, b| a.spread.total_cmp(&b.spread))
        .expect("at least one cell");
    let threshold = best.spread + 2.0 * best.spread_se;
    let chosen = scored
        .iter()
        .filter(|c| c.spread <= threshold)
        .max_by_key(|c| c.randomizations)
        .expect("best is within threshold");
    Ok((chosen.randomizations, chosen.shots, scored))
}

pub(crate) fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(h: &HardCycle, level: Level) -> usize {
        let t = MarginalTarget::for_level(h, level).unwrap();
        plan_initial_states(h, &t).unwrap().initial_states().len()
    }

    #[test]
    fn state_counts() {
        assert_eq!(count(&HardCycle::single_cnot(), Level::OneCnot), 4);
        assert_eq!(count(&HardCycle::transversal7(), Level::OneCnot), 4);
        assert_eq!(count(&HardCycle::transversal(2).unwrap(), Level::TwoCnot), 36);
        assert_eq!(count(&HardCycle::transversal7(), Level::TwoCnot), 100);
        assert_eq!(count(&HardCycle::transversal7(), Level::Single), 3);
    }

    #[test]
    fn single_cnot_cover() {
        let h = HardCycle::single_cnot();
        let c = local_cover(&h, &QubitSubset::full(2)).unwrap();
        let s: Vec<String> = c
            .iter()
            .map(|l| PauliOperator::from_letters(l).unwrap().to_string())
            .collect();
        assert_eq!(s, ["XY", "ZX", "XZ", "YX"]);
    }

    #[test]
    fn sequence_lengths() {
        assert_eq!(choose_sequence_lengths(0.99, 3).unwrap(), vec![2, 14, 100]);
        assert_eq!(choose_sequence_lengths(0.5, 2).unwrap(), vec![2]);
        assert_eq!(choose_sequence_lengths(0.97, 3).unwrap(), vec![2, 8, 34]);
        assert!(choose_sequence_lengths(1.0, 3).is_err());
        assert!(choose_sequence_lengths(0.9, 1).is_err());
        assert_eq!(align_lengths(&[2, 8, 34], 3), vec![3, 9, 36]);
    }

    #[test]
    fn split_gate_subset_rejected() {
        let h = HardCycle::transversal7();
        let bad = vec!["0".parse().unwrap()];
        assert!(MarginalTarget::new(&h, Level::Single, bad).is_err());
        let bad = vec!["0,9,1".parse().unwrap()];
        assert!(MarginalTarget::new(&h, Level::TwoCnot, bad).is_err());
        assert!(MarginalTarget::for_level(&HardCycle::single_cnot(), Level::Single).is_err());
    }

    #[test]
    fn plan_text_round_trip() {
        let h = HardCycle::transversal(2).unwrap();
        let t = MarginalTarget::for_level(&h, Level::TwoCnot).unwrap();
        let plan = plan_initial_states(&h, &t).unwrap().with_seed(9);
        let text = plan.to_string();
        let back: DesignPlan = text.parse().unwrap();
        assert_eq!(back, plan);
        assert!(text.contains("state X+ "));
    }

    #[test]
    fn eigenstate_labels() {
        assert_eq!("X-".parse::<Eigenstate>().unwrap().to_string(), "X-");
        assert_eq!("Z\u{2212}".parse::<Eigenstate>().unwrap().to_string(), "Z-");
        assert!("I+".parse::<Eigenstate>().is_err());
        assert!("Q+".parse::<Eigenstate>().is_err());
    }

    #[test]
    fn odd_lengths_rejected_for_order_two() {
        let h = HardCycle::single_cnot();
        let t = MarginalTarget::for_level(&h, Level::OneCnot).unwrap();
        let plan = plan_initial_states(&h, &t).unwrap();
        assert!(plan.clone().with_sequence_lengths(vec![2, 3]).is_err());
        assert!(plan.with_sequence_lengths(vec![4, 2]).is_err());
    }
}
