//! Forward simulation of randomized-compiled cycle sequences.
//!
//! A sequence prepares a product eigenstate, applies `m` rounds of a uniformly
//! random Pauli followed by the noisy hard cycle, applies one more random Pauli
//! and measures every qubit in its preparation basis. The ideal Pauli frame of
//! each randomization is tracked and used to decode the raw outcomes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cycle::HardCycle;
use crate::dense::DenseProcess;
use crate::design::{state_basis, DesignPlan, ProductState};
use crate::error::{Error, Result};
use crate::estimation::fit::{shot_weight, FitPoint};
use crate::noise::{NoiseModel, PauliEigenvalues};
use crate::pauli::PauliOperator;
use crate::seed::derive_seed;
use crate::wht;

/// Noise attached to the hard cycle.
#[derive(Debug, Clone, PartialEq)]
pub enum CycleNoise {
    Pauli(NoiseModel),
    Process(DenseProcess),
}

impl From<NoiseModel> for CycleNoise {
    fn from(m: NoiseModel) -> Self {
        CycleNoise::Pauli(m)
    }
}

impl From<crate::channel::PauliChannel> for CycleNoise {
    fn from(c: crate::channel::PauliChannel) -> Self {
        CycleNoise::Pauli(NoiseModel::Channel(c))
    }
}

impl From<DenseProcess> for CycleNoise {
    fn from(d: DenseProcess) -> Self {
        CycleNoise::Process(d)
    }
}

impl CycleNoise {
    pub fn num_qubits(&self) -> usize {
        match self {
            CycleNoise::Pauli(m) => m.num_qubits(),
            CycleNoise::Process(d) => d.num_qubits(),
        }
    }

    fn as_process(&self) -> Result<DenseProcess> {
        match self {
            CycleNoise::Process(d) => Ok(d.clone()),
            CycleNoise::Pauli(NoiseModel::Channel(c)) => DenseProcess::from_pauli_channel(c),
            CycleNoise::Pauli(NoiseModel::Product(p)) => DenseProcess::from_pauli_channel(&p.to_channel()?),
        }
    }
}

impl PauliEigenvalues for CycleNoise {
    fn num_qubits(&self) -> usize {
        CycleNoise::num_qubits(self)
    }

    fn eigenvalue(&self, p: &PauliOperator) -> Result<f64> {
        match self {
            CycleNoise::Pauli(m) => m.eigenvalue(p),
            CycleNoise::Process(d) => d.eigenvalue(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    hard_cycle: HardCycle,
    m: usize,
    prep: ProductState,
    randomization_seed: u64,
    noise: CycleNoise,
    easy_noise: Option<NoiseModel>,
    spam: Option<f64>,
}

impl CircuitSpec {
    /// `m` must be a multiple of the cycle order so that the ideal sequence
    /// returns every prepared stabilizer to itself.
    pub fn new(
        hard_cycle: HardCycle,
        m: usize,
        prep: ProductState,
        randomization_seed: u64,
        noise: impl Into<CycleNoise>,
    ) -> Result<Self> {
        let n = hard_cycle.num_qubits();
        let noise = noise.into();
        if noise.num_qubits() != n {
            return Err(Error::Dimension {
                expected: n,
                found: noise.num_qubits(),
            });
        }
        if prep.len() != n {
            return Err(Error::Unsatisfiable(format!(
                "preparation has {} labels for {n} qubits",
                prep.len()
            )));
        }
        if prep.iter().any(|e| e.axis == crate::pauli::Letter::I) {
            return Err(Error::Unsatisfiable("preparation must be a Pauli eigenstate on every qubit".into()));
        }
        let order = hard_cycle.order();
        if !m.is_multiple_of(order) {
            return Err(Error::Unsatisfiable(format!(
                "m = {m} is not a multiple of the cycle order {order}"
            )));
        }
        Ok(CircuitSpec {
            hard_cycle,
            m,
            prep,
            randomization_seed,
            noise,
            easy_noise: None,
            spam: None,
        })
    }

    pub fn with_easy_noise(mut self, easy: NoiseModel) -> Result<Self> {
        if easy.num_qubits() != self.hard_cycle.num_qubits() {
            return Err(Error::Dimension {
                expected: self.hard_cycle.num_qubits(),
                found: easy.num_qubits(),
            });
        }
        self.easy_noise = Some(easy);
        Ok(self)
    }

    /// Independent per-qubit measurement flips with probability `p`.
    pub fn with_spam(mut self, p: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&p) {
            return Err(Error::InvalidChannel(format!("flip probability {p} outside [0, 1/2]")));
        }
        self.spam = Some(p);
        Ok(self)
    }

    /// Compose the cycle noise with `slots` applications of an idle channel.
    pub fn with_idle(mut self, idle: &crate::channel::PauliChannel, slots: usize) -> Result<Self> {
        let extra = idle.power(slots)?;
        self.noise = match self.noise {
            CycleNoise::Pauli(NoiseModel::Channel(c)) => CycleNoise::Pauli(c.compose(&extra)?.into()),
            CycleNoise::Pauli(NoiseModel::Product(p)) => CycleNoise::Pauli(p.to_channel()?.compose(&extra)?.into()),
            CycleNoise::Process(d) => CycleNoise::Process(d.then(&DenseProcess::from_pauli_channel(&extra)?)?),
        };
        Ok(self)
    }

    pub fn hard_cycle(&self) -> &HardCycle {
        &self.hard_cycle
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn prep(&self) -> &[crate::design::Eigenstate] {
        &self.prep
    }

    pub fn noise(&self) -> &CycleNoise {
        &self.noise
    }

    fn negative_mask(&self) -> u64 {
        self.prep
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.positive)
            .fold(0, |m, (q, _)| m | 1 << q)
    }

    fn full_mask(&self) -> u64 {
        let n = self.hard_cycle.num_qubits();
        if n == 64 {
            u64::MAX
        } else {
            (1u64 << n) - 1
        }
    }

    /// Random Paulis of one randomization: one per cycle plus the final one.
    fn frames(&self, randomization: usize) -> Vec<PauliOperator> {
        let n = self.hard_cycle.num_qubits();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.randomization_seed, &[randomization as u64]));
        let full = self.full_mask();
        (0..=self.m)
            .map(|_| PauliOperator::from_masks_unchecked(n, rng.gen::<u64>() & full, rng.gen::<u64>() & full))
            .collect()
    }

    /// Ideal outcome bits of a randomization (bit `q` set means `-1`).
    fn reference(&self, frames: &[PauliOperator], basis: &PauliOperator) -> u64 {
        let mut f = PauliOperator::identity(self.hard_cycle.num_qubits());
        for t in &frames[..self.m] {
            f = self.hard_cycle.conjugate_unchecked(&f.mul_unchecked(t));
        }
        f = f.mul_unchecked(&frames[self.m]);
        self.negative_mask() ^ flips(&f, basis)
    }

    fn shot_rng(&self, randomization: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(self.randomization_seed, &[randomization as u64, 1]))
    }
}

/// Qubits whose measured basis letter anticommutes with `f`.
fn flips(f: &PauliOperator, basis: &PauliOperator) -> u64 {
    (f.x_mask() & basis.z_mask()) ^ (f.z_mask() & basis.x_mask())
}

/// One measured shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotRecord {
    pub randomization: usize,
    n: usize,
    bits: u64,
}

impl ShotRecord {
    /// Per-qubit `±1` outcomes.
    pub fn outcomes(&self) -> Vec<i8> {
        (0..self.n).map(|q| if self.bits >> q & 1 == 1 { -1 } else { 1 }).collect()
    }
}

/// Raw outcomes of one randomization and its ideal reference outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizationRun {
    pub randomization: usize,
    n: usize,
    reference: u64,
    shots: Vec<u64>,
    distribution: Option<Vec<f64>>,
}

impl RandomizationRun {
    pub fn shots(&self) -> usize {
        self.shots.len()
    }

    pub fn shot_records(&self) -> Vec<ShotRecord> {
        self.shots
            .iter()
            .map(|&bits| ShotRecord {
                randomization: self.randomization,
                n: self.n,
                bits,
            })
            .collect()
    }

    /// Decoded expectation of the product of outcomes over `support`: the shot
    /// mean, or the exact value when no shots were drawn.
    pub fn expectation(&self, support: u64) -> f64 {
        let sign = |b: u64| if ((b ^ self.reference) & support).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        if self.shots.is_empty() {
            if let Some(d) = &self.distribution {
                return d.iter().enumerate().map(|(b, p)| p * sign(b as u64)).sum();
            }
            return 0.0;
        }
        self.shots.iter().map(|&b| sign(b)).sum::<f64>() / self.shots.len() as f64
    }
}

/// `Π_{k=1..m} λ_{H^k(P)}`: the twirled expectation of a prepared stabilizer `P`
/// after `m` noisy cycles.
pub fn exact_expectation(noise: &impl PauliEigenvalues, h: &HardCycle, p: &PauliOperator, m: usize) -> Result<f64> {
    exact_with_easy(noise, None, h, p, m)
}

fn exact_with_easy(
    noise: &impl PauliEigenvalues,
    easy: Option<&NoiseModel>,
    h: &HardCycle,
    p: &PauliOperator,
    m: usize,
) -> Result<f64> {
    let n = h.num_qubits();
    for d in [noise.num_qubits(), p.num_qubits()] {
        if d != n {
            return Err(Error::Dimension { expected: n, found: d });
        }
    }
    let mut cache: BTreeMap<PauliOperator, f64> = BTreeMap::new();
    let mut q = *p;
    let mut value = 1.0;
    for _ in 0..m {
        if let Some(e) = easy {
            value *= e.eigenvalue(&q)?;
        }
        q = h.conjugate_unchecked(&q);
        value *= match cache.get(&q) {
            Some(&v) => v,
            None => {
                let v = noise.eigenvalue(&q)?;
                cache.insert(q, v);
                v
            }
        };
    }
    if let Some(e) = easy {
        value *= e.eigenvalue(&q)?;
    }
    Ok(value)
}

/// Pauli-frame Monte Carlo for stochastic cycle noise.
pub fn run_monte_carlo(spec: &CircuitSpec, randomizations: usize, shots: usize) -> Result<Vec<RandomizationRun>> {
    if randomizations == 0 || shots == 0 {
        return Err(Error::InvalidDesign("randomizations and shots must be at least 1".into()));
    }
    let CycleNoise::Pauli(noise) = &spec.noise else {
        return Err(Error::InvalidChannel("coherent noise needs the dense simulator".into()));
    };
    let n = spec.hard_cycle.num_qubits();
    let sampler = noise.sampler()?;
    let easy = spec.easy_noise.as_ref().map(|e| e.sampler()).transpose()?;
    let basis = state_basis(&spec.prep);
    let h = &spec.hard_cycle;
    let spam = spec.spam.unwrap_or(0.0);
    Ok((0..randomizations)
        .into_par_iter()
        .map(|r| {
            let frames = spec.frames(r);
            let reference = spec.reference(&frames, &basis);
            let mut rng = spec.shot_rng(r);
            let outcomes = (0..shots)
                .map(|_| {
                    let mut g = PauliOperator::identity(n);
                    for _ in 0..spec.m {
                        if let Some(e) = &easy {
                            g = g.mul_unchecked(&e.sample(&mut rng));
                        }
                        g = h.conjugate_unchecked(&g).mul_unchecked(&sampler.sample(&mut rng));
                    }
                    if let Some(e) = &easy {
                        g = g.mul_unchecked(&e.sample(&mut rng));
                    }
                    let mut bits = reference ^ flips(&g, &basis);
                    if spam > 0.0 {
                        for q in 0..n {
                            if rng.gen::<f64>() < spam {
                                bits ^= 1 << q;
                            }
                        }
                    }
                    bits
                })
                .collect();
            RandomizationRun {
                randomization: r,
                n,
                reference,
                shots: outcomes,
                distribution: None,
            }
        })
        .collect())
}

/// Pauli-vector representation `r_P = Tr(P ρ)` of a product eigenstate.
fn product_state_vector(n: usize, basis: &PauliOperator, negative: u64) -> DVector<f64> {
    let mut r = DVector::zeros(1 << (2 * n));
    for mask in 0..1u64 << n {
        let p = PauliOperator::from_masks_unchecked(n, basis.x_mask() & mask, basis.z_mask() & mask);
        r[p.index()] = if (negative & mask).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    }
    r
}

/// Outcome distribution when every qubit is measured in its letter of `basis`.
fn outcome_distribution(n: usize, r: &DVector<f64>, basis: &PauliOperator) -> Vec<f64> {
    let d = 1usize << n;
    let mut v: Vec<f64> = (0..d as u64)
        .map(|mask| {
            let p = PauliOperator::from_masks_unchecked(n, basis.x_mask() & mask, basis.z_mask() & mask);
            r[p.index()]
        })
        .collect();
    wht::fwht(&mut v);
    v.iter().map(|x| x / d as f64).collect()
}

fn apply_spam(dist: &mut [f64], n: usize, f: f64) {
    for q in 0..n {
        let bit = 1usize << q;
        for b in 0..dist.len() {
            if b & bit == 0 {
                let (p0, p1) = (dist[b], dist[b | bit]);
                dist[b] = (1.0 - f) * p0 + f * p1;
                dist[b | bit] = f * p0 + (1.0 - f) * p1;
            }
        }
    }
}

/// Exact per-randomization simulation by transfer-matrix propagation, with
/// `shots` samples drawn from each outcome distribution (`0` keeps only the
/// exact distribution).
pub fn run_dense(spec: &CircuitSpec, randomizations: usize, shots: usize) -> Result<Vec<RandomizationRun>> {
    if randomizations == 0 {
        return Err(Error::InvalidDesign("randomizations must be at least 1".into()));
    }
    let n = spec.hard_cycle.num_qubits();
    let cycle = DenseProcess::from_cycle(&spec.hard_cycle)?;
    let noisy_cycle = cycle.then(&spec.noise.as_process()?)?;
    let easy: Option<Vec<f64>> = spec
        .easy_noise
        .as_ref()
        .map(|e| PauliOperator::all(n).map(|q| e.eigenvalue(&q)).collect())
        .transpose()?;
    let basis = state_basis(&spec.prep);
    let paulis: Vec<PauliOperator> = PauliOperator::all(n).collect();
    let start = product_state_vector(n, &basis, spec.negative_mask());
    let spam = spec.spam.unwrap_or(0.0);
    (0..randomizations)
        .into_par_iter()
        .map(|r| {
            let frames = spec.frames(r);
            let reference = spec.reference(&frames, &basis);
            let twirl = |v: &mut DVector<f64>, t: &PauliOperator| {
                for (x, q) in v.iter_mut().zip(&paulis) {
                    if t.omega_unchecked(q) == 1 {
                        *x = -*x;
                    }
                }
                if let Some(e) = &easy {
                    for (x, l) in v.iter_mut().zip(e) {
                        *x *= l;
                    }
                }
            };
            let mut v = start.clone();
            for t in &frames[..spec.m] {
                twirl(&mut v, t);
                v = noisy_cycle.apply(&v);
            }
            twirl(&mut v, &frames[spec.m]);
            let mut dist = outcome_distribution(n, &v, &basis);
            if spam > 0.0 {
                apply_spam(&mut dist, n, spam);
            }
            let sampled = if shots > 0 {
                let weights: Vec<f64> = dist.iter().map(|p| p.max(0.0)).collect();
                let w = WeightedIndex::new(&weights)
                    .map_err(|e| Error::InvalidChannel(format!("outcome distribution: {e}")))?;
                let mut rng = spec.shot_rng(r);
                (0..shots).map(|_| w.sample(&mut rng) as u64).collect()
            } else {
                Vec::new()
            };
            Ok(RandomizationRun {
                randomization: r,
                n,
                reference,
                shots: sampled,
                distribution: Some(dist),
            })
        })
        .collect()
}

/// How [`simulate_plan`] produces expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Infinite-shot twirled values, one record per orbit and length.
    Exact,
    MonteCarlo,
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub method: Method,
    pub easy_noise: Option<NoiseModel>,
    pub spam: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            method: Method::MonteCarlo,
            easy_noise: None,
            spam: None,
        }
    }
}

/// Run every `(initial state, m)` configuration of a plan and collect one record
/// per measured orbit and randomization. Randomization ids are global:
/// state `s`, randomization `r` becomes `s·R + r`.
pub fn simulate_plan(plan: &DesignPlan, noise: &CycleNoise, options: &SimOptions, seed: u64) -> Result<DecayDataset> {
    let h = plan.cycle();
    let n = h.num_qubits();
    if noise.num_qubits() != n {
        return Err(Error::Dimension {
            expected: n,
            found: noise.num_qubits(),
        });
    }
    let mut data = DecayDataset::new(n, seed);
    let r_count = plan.randomizations();
    if options.method == Method::Exact {
        let mut done = BTreeMap::new();
        for (s, measurements) in plan.measurements().iter().enumerate() {
            for meas in measurements {
                if done.contains_key(meas.orbit.representative()) {
                    continue;
                }
                done.insert(*meas.orbit.representative(), ());
                for &m in plan.sequence_lengths() {
                    let mut value = exact_with_easy(noise, options.easy_noise.as_ref(), h, &meas.observable, m)?;
                    if let Some(f) = options.spam {
                        value *= (1.0 - 2.0 * f).powi(meas.observable.weight() as i32);
                    }
                    data.push(DecayRecord {
                        m,
                        orbit: *meas.orbit.representative(),
                        randomization: s * r_count,
                        expectation: value.clamp(-1.0, 1.0),
                        shots: 0,
                    })?;
                }
            }
        }
        return Ok(data);
    }
    for (s, state) in plan.initial_states().iter().enumerate() {
        for &m in plan.sequence_lengths() {
            let mut spec = CircuitSpec::new(h.clone(), m, state.clone(), derive_seed(seed, &[s as u64, m as u64]), noise.clone())?;
            if let Some(e) = &options.easy_noise {
                spec = spec.with_easy_noise(e.clone())?;
            }
            if let Some(f) = options.spam {
                spec = spec.with_spam(f)?;
            }
            let runs = match options.method {
                Method::MonteCarlo => run_monte_carlo(&spec, r_count, plan.shots())?,
                _ => run_dense(&spec, r_count, plan.shots())?,
            };
            for meas in &plan.measurements()[s] {
                for run in &runs {
                    data.push(DecayRecord {
                        m,
                        orbit: *meas.orbit.representative(),
                        randomization: s * r_count + run.randomization,
                        expectation: run.expectation(meas.observable.support_mask()).clamp(-1.0, 1.0),
                        shots: run.shots(),
                    })?;
                }
            }
        }
    }
    Ok(data)
}

/// One row of a decay dataset. `shots == 0` marks an exact value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRecord {
    pub m: usize,
    pub orbit: PauliOperator,
    pub randomization: usize,
    pub expectation: f64,
    pub shots: usize,
}

/// Per-randomization expectations of orbit observables, keyed by the full-register
/// orbit representative.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayDataset {
    n: usize,
    seed: u64,
    metadata: BTreeMap<String, String>,
    records: Vec<DecayRecord>,
}

pub const CSV_HEADER: &str = "m,orbit,randomization,expectation,shots";

impl DecayDataset {
    pub fn new(n: usize, seed: u64) -> Self {
        DecayDataset {
            n,
            seed,
            metadata: BTreeMap::new(),
            records: Vec::new(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn set_metadata(&mut self, key: &str, value: &str) {
        self.metadata.insert(key.to_string(), value.to_string());
    }

    pub fn push(&mut self, rec: DecayRecord) -> Result<()> {
        if rec.orbit.num_qubits() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: rec.orbit.num_qubits(),
            });
        }
        if !(-1.0..=1.0).contains(&rec.expectation) {
            return Err(Error::InvalidDesign(format!(
                "expectation {} outside [-1, 1]",
                rec.expectation
            )));
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn records(&self) -> &[DecayRecord] {
        &self.records
    }

    /// Distinct orbit labels in sorted order.
    pub fn orbits(&self) -> Vec<PauliOperator> {
        let mut o: Vec<PauliOperator> = self.records.iter().map(|r| r.orbit).collect();
        o.sort();
        o.dedup();
        o
    }

    /// Records of one orbit grouped by sequence length (ascending).
    pub fn series(&self, orbit: &PauliOperator) -> Vec<(usize, Vec<&DecayRecord>)> {
        let mut by_m: BTreeMap<usize, Vec<&DecayRecord>> = BTreeMap::new();
        for r in self.records.iter().filter(|r| r.orbit == *orbit) {
            by_m.entry(r.m).or_default().push(r);
        }
        by_m.into_iter().collect()
    }

    /// Every series in one pass: orbit, then sequence length, records in file order.
    pub fn grouped(&self) -> BTreeMap<PauliOperator, BTreeMap<usize, Vec<&DecayRecord>>> {
        let mut out: BTreeMap<PauliOperator, BTreeMap<usize, Vec<&DecayRecord>>> = BTreeMap::new();
        for r in &self.records {
            out.entry(r.orbit).or_default().entry(r.m).or_default().push(r);
        }
        out
    }

    /// One point per sequence length: the mean over randomizations, weighted by
    /// the inverse shot-noise variance of that mean.
    pub fn fit_points(&self, orbit: &PauliOperator) -> Vec<FitPoint> {
        self.series(orbit).into_iter().map(|(m, recs)| fit_point(m, &recs)).collect()
    }

    /// [`DecayDataset::fit_points`] for every orbit.
    pub fn all_fit_points(&self) -> BTreeMap<PauliOperator, Vec<FitPoint>> {
        self.grouped()
            .into_iter()
            .map(|(o, by_m)| (o, by_m.into_iter().map(|(m, recs)| fit_point(m, &recs)).collect()))
            .collect()
    }

    /// Resample randomizations with replacement within every `(orbit, m)` series.
    pub fn resample<R: Rng + ?Sized>(&self, rng: &mut R) -> DecayDataset {
        let mut out = DecayDataset {
            n: self.n,
            seed: self.seed,
            metadata: self.metadata.clone(),
            records: Vec::with_capacity(self.records.len()),
        };
        for by_m in self.grouped().into_values() {
            for recs in by_m.into_values() {
                for _ in 0..recs.len() {
                    out.records.push(*recs[rng.gen_range(0..recs.len())]);
                }
            }
        }
        out
    }

    /// Fewest randomizations in any `(orbit, m)` series.
    pub fn min_series_len(&self) -> usize {
        self.grouped()
            .values()
            .flat_map(|by_m| by_m.values().map(Vec::len))
            .min()
            .unwrap_or(0)
    }
}

fn fit_point(m: usize, recs: &[&DecayRecord]) -> FitPoint {
    let mean = recs.iter().map(|r| r.expectation).sum::<f64>() / recs.len() as f64;
    let shots: usize = recs.iter().map(|r| r.shots).sum();
    FitPoint {
        m,
        expectation: mean,
        weight: if shots == 0 { 1.0 } else { shot_weight(mean, shots) },
    }
}

impl fmt::Display for DecayDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# seed: {}", self.seed)?;
        writeln!(f, "# qubits: {}", self.n)?;
        for (k, v) in &self.metadata {
            writeln!(f, "# {k}: {v}")?;
        }
        writeln!(f, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(f, "{},{},{},{},{}", r.m, r.orbit, r.randomization, r.expectation, r.shots)?;
        }
        Ok(())
    }
}

impl FromStr for DecayDataset {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut seed = None;
        let mut n = None;
        let mut metadata = BTreeMap::new();
        let mut records = Vec::new();
        let mut header_seen = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |m: String| Error::parse(i + 1, m);
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.split_once(':') {
                    let (k, v) = (k.trim(), v.trim());
                    match k {
                        "seed" => seed = Some(v.parse::<u64>().map_err(|_| err(format!("bad seed {v:?}")))?),
                        "qubits" => n = Some(v.parse::<usize>().map_err(|_| err(format!("bad qubit count {v:?}")))?),
                        _ => {
                            metadata.insert(k.to_string(), v.to_string());
                        }
                    }
                }
                continue;
            }
            if !header_seen {
                if line.replace(' ', "") != CSV_HEADER {
                    return Err(err(format!("expected header {CSV_HEADER:?}")));
                }
                header_seen = true;
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let [m, orbit, rand_id, e, shots] = cols.as_slice() else {
                return Err(err("expected 5 columns".into()));
            };
            records.push(DecayRecord {
                m: m.parse().map_err(|_| err(format!("bad m {m:?}")))?,
                orbit: orbit.parse().map_err(|e: Error| err(e.to_string()))?,
                randomization: rand_id.parse().map_err(|_| err(format!("bad randomization {rand_id:?}")))?,
                expectation: e.parse().map_err(|_| err(format!("bad expectation {e:?}")))?,
                shots: shots.parse().map_err(|_| err(format!("bad shot count {shots:?}")))?,
            });
        }
        let n = n
            .or_else(|| records.first().map(|r| r.orbit.num_qubits()))
            .ok_or_else(|| Error::parse(0, "dataset has no qubit count"))?;
        let mut data = DecayDataset {
            n,
            seed: seed.ok_or_else(|| Error::parse(0, "missing seed header"))?,
            metadata,
            records: Vec::new(),
        };
        for r in records {
            data.push(r)?;
        }
        Ok(data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PauliChannel;
    use crate::design::Eigenstate;
    use crate::pauli::Letter;

    fn p(s: &str) -> PauliOperator {
        s.parse().unwrap()
    }

    fn prep(s: &str) -> ProductState {
        s.chars()
            .map(|c| Eigenstate::plus(Letter::from_char(c).unwrap()).unwrap())
            .collect()
    }

    fn channel() -> PauliChannel {
        PauliChannel::new(
            2,
            [(p("II"), 0.9), (p("XI"), 0.03), (p("IZ"), 0.02), (p("YY"), 0.03), (p("ZX"), 0.02)],
        )
        .unwrap()
    }

    #[test]
    fn exact_expectation_examples() {
        let h = HardCycle::single_cnot();
        let id = PauliChannel::identity(2);
        for q in PauliOperator::all(2) {
            assert_eq!(exact_expectation(&id, &h, &q, 6).unwrap(), 1.0);
        }
        let c = channel();
        let xi = p("XI");
        let pair = c.eigenvalue(&xi).unwrap() * c.eigenvalue(&p("XX")).unwrap();
        assert!((exact_expectation(&c, &h, &xi, 4).unwrap() - pair * pair).abs() < 1e-15);
    }

    #[test]
    fn exact_expectation_matches_transfer_matrix_power() {
        let h = HardCycle::single_cnot();
        let c = channel();
        let step = DenseProcess::from_cycle(&h).unwrap().then(&DenseProcess::from_pauli_channel(&c).unwrap()).unwrap();
        let mut total = DenseProcess::identity(2).unwrap();
        for _ in 0..6 {
            total = total.then(&step).unwrap();
        }
        for q in PauliOperator::all(2) {
            let want = total.matrix()[(q.index(), q.index())];
            assert!((exact_expectation(&c, &h, &q, 6).unwrap() - want).abs() < 1e-12, "{q}");
        }
    }

    #[test]
    fn noiseless_runs_decode_to_plus_one() {
        let h = HardCycle::single_cnot();
        let mut st = prep("XZ");
        st[1].positive = false;
        let spec = CircuitSpec::new(h, 4, st, 3, PauliChannel::identity(2)).unwrap();
        for run in run_monte_carlo(&spec, 5, 10).unwrap() {
            for mask in [1, 2, 3] {
                assert_eq!(run.expectation(mask), 1.0);
            }
        }
        for run in run_dense(&spec, 5, 0).unwrap() {
            for mask in [1, 2, 3] {
                assert!((run.expectation(mask) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn odd_length_rejected() {
        let r = CircuitSpec::new(HardCycle::single_cnot(), 3, prep("ZZ"), 0, PauliChannel::identity(2));
        assert!(matches!(r, Err(Error::Unsatisfiable(_))));
    }

    #[test]
    fn dense_pauli_noise_has_no_scatter() {
        let h = HardCycle::single_cnot();
        let c = channel();
        let spec = CircuitSpec::new(h.clone(), 4, prep("XX"), 11, c.clone()).unwrap();
        let want = exact_expectation(&c, &h, &p("XX"), 4).unwrap();
        for run in run_dense(&spec, 6, 0).unwrap() {
            assert!((run.expectation(3) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn monte_carlo_matches_exact() {
        let h = HardCycle::single_cnot();
        let c = channel();
        let spec = CircuitSpec::new(h.clone(), 6, prep("ZX"), 21, c.clone()).unwrap();
        let runs = run_monte_carlo(&spec, 20, 5000).unwrap();
        for (mask, obs) in [(1u64, "ZI"), (2, "IX"), (3, "ZX")] {
            let mean = runs.iter().map(|r| r.expectation(mask)).sum::<f64>() / runs.len() as f64;
            let want = exact_expectation(&c, &h, &p(obs), 6).unwrap();
            let se = ((1.0 - want * want) / 100_000.0).sqrt();
            assert!((mean - want).abs() < 4.0 * se, "{obs}: {mean} vs {want}");
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = CircuitSpec::new(HardCycle::single_cnot(), 2, prep("YX"), 4, channel()).unwrap();
        assert_eq!(run_monte_carlo(&spec, 8, 50).unwrap(), run_monte_carlo(&spec, 8, 50).unwrap());
    }

    #[test]
    fn shot_records_have_one_outcome_per_qubit() {
        let spec = CircuitSpec::new(HardCycle::single_cnot(), 2, prep("YX"), 4, channel()).unwrap();
        let runs = run_monte_carlo(&spec, 1, 3).unwrap();
        for s in runs[0].shot_records() {
            assert_eq!(s.outcomes().len(), 2);
        }
    }

    #[test]
    fn dataset_text_round_trip() {
        let mut d = DecayDataset::new(2, 17);
        d.set_metadata("config-hash", "abc");
        d.push(DecayRecord { m: 2, orbit: p("XI"), randomization: 0, expectation: 0.9133333333333333, shots: 150 }).unwrap();
        d.push(DecayRecord { m: 4, orbit: p("XI"), randomization: 1, expectation: -0.25, shots: 150 }).unwrap();
        let text = d.to_string();
        assert!(text.starts_with("# seed: 17\n"));
        let back: DecayDataset = text.parse().unwrap();
        assert_eq!(back, d);
        assert!(d.clone().push(DecayRecord { m: 2, orbit: p("XI"), randomization: 0, expectation: 1.5, shots: 1 }).is_err());
    }
}
