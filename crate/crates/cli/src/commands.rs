use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use cer_core::design::{align_lengths, choose_sequence_lengths, plan_initial_states};
use cer_core::estimation::{fit_dataset, reconstruct_with_errors, MarginalSet};
use cer_core::logical::{logical_rates_with_errors, ENUMERATION_CAP};
use cer_core::sim::{simulate_plan, Method, SimOptions};
use cer_core::{
    CycleNoise, DecayDataset, DenseProcess, DesignPlan, FactorGraph, HardCycle, Level, MarginalTarget, NoiseModel,
    PauliOperator, QubitSubset, SteaneCodePair,
};

use crate::config::{read_input, write_output, Fingerprint};
use crate::{DesignArgs, LogicalArgs, ReconstructArgs, SimulateArgs};

pub const DEFAULT_BOOTSTRAP: usize = 200;
pub const DEFAULT_LOGICAL_BOOTSTRAP: usize = 100;
pub const DEFAULT_THRESHOLD: f64 = 1e-9;

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| anyhow!("missing --{flag}"))
}

fn report(path: &Path, what: &str) {
    println!("wrote {} ({what})", path.display());
}

pub fn design(a: DesignArgs, seed: u64, out: &Path) -> Result<()> {
    let h: HardCycle = a.cycle.as_deref().unwrap_or("transversal7").parse()?;
    let level: Level = a.level.as_deref().unwrap_or("1cnot").parse()?;
    let target = match &a.subsets {
        Some(list) => {
            let subsets = list.iter().map(|s| s.parse()).collect::<cer_core::Result<Vec<QubitSubset>>>()?;
            MarginalTarget::new(&h, level, subsets)?
        }
        None => MarginalTarget::for_level(&h, level)?,
    };
    let mut plan = plan_initial_states(&h, &target)?;
    if let Some(lengths) = &a.lengths {
        plan = plan.with_sequence_lengths(align_lengths(lengths, h.order()))?;
    } else if let Some(g) = a.lambda_guess {
        plan = plan.with_sequence_lengths(align_lengths(&choose_sequence_lengths(g, 3)?, h.order()))?;
    }
    let r = a.randomizations.unwrap_or(plan.randomizations());
    let s = a.shots.unwrap_or(plan.shots());
    let plan = plan.with_budget(r, s)?.with_seed(seed);

    let mut fp = Fingerprint::new("design");
    fp.set("plan", plan.to_string().replace('\n', ";"));
    let text = format!("# config_hash: {}\n{plan}", fp.hash());
    let path = write_output(out, "plan.txt", &text)?;
    report(&path, &format!("{} initial states", plan.initial_states().len()));
    Ok(())
}

fn parse_method(s: &str) -> Result<Method> {
    Ok(match s {
        "exact" => Method::Exact,
        "mc" | "montecarlo" | "monte-carlo" => Method::MonteCarlo,
        "dense" => Method::Dense,
        other => bail!("unknown method {other:?} (expected exact, mc or dense)"),
    })
}

fn subsets_key(subsets: &[QubitSubset]) -> String {
    subsets.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";")
}

pub fn simulate(a: SimulateArgs, seed: Option<u64>, out: &Path) -> Result<()> {
    let plan_path = required(&a.plan, "plan")?;
    let (plan_text, plan_bytes) = read_input(plan_path)?;
    let plan: DesignPlan = plan_text.parse().with_context(|| format!("parsing {}", plan_path.display()))?;
    let seed = seed.or(plan.seed()).unwrap_or(0);
    let mut fp = Fingerprint::new("simulate");
    fp.file("plan", &plan_bytes);
    fp.set("seed", seed);

    let channel = match &a.channel {
        Some(p) => {
            let (text, bytes) = read_input(p)?;
            fp.file("channel", &bytes);
            Some(text.parse::<NoiseModel>().with_context(|| format!("parsing {}", p.display()))?)
        }
        None => None,
    };
    let noise = match &a.coherent {
        Some(g) => {
            let generator: PauliOperator = g.parse()?;
            let angle = *required(&a.angle, "angle")?;
            fp.set("coherent", g);
            fp.set("angle", angle);
            let rotation = DenseProcess::unitary_process(&generator, angle)?;
            let process = match &channel {
                Some(c) => DenseProcess::from_pauli_channel(&to_channel(c)?)?.then(&rotation)?,
                None => rotation,
            };
            CycleNoise::Process(process)
        }
        None => CycleNoise::Pauli(channel.ok_or_else(|| anyhow!("missing --channel (or --coherent)"))?),
    };
    let default_method = if a.coherent.is_some() { "dense" } else { "mc" };
    let method_name = a.method.as_deref().unwrap_or(default_method);
    let method = parse_method(method_name)?;
    fp.set("method", method_name);
    let easy_noise = match &a.easy_channel {
        Some(p) => {
            let (text, bytes) = read_input(p)?;
            fp.file("easy_channel", &bytes);
            Some(text.parse::<NoiseModel>().with_context(|| format!("parsing {}", p.display()))?)
        }
        None => None,
    };
    if let Some(p) = a.spam {
        fp.set("spam", p);
    }
    let options = SimOptions {
        method,
        easy_noise,
        spam: a.spam,
    };
    let mut data = simulate_plan(&plan, &noise, &options, seed)?;
    data.set_metadata("config_hash", &fp.hash());
    data.set_metadata("cycle", &plan.cycle().to_string());
    data.set_metadata("level", &plan.target().level().to_string());
    data.set_metadata("subsets", &subsets_key(plan.target().subsets()));
    data.set_metadata("method", method_name);
    let path = write_output(out, "dataset.csv", &data.to_string())?;
    report(&path, &format!("{} records", data.records().len()));
    Ok(())
}

fn to_channel(n: &NoiseModel) -> Result<cer_core::PauliChannel> {
    Ok(match n {
        NoiseModel::Channel(c) => c.clone(),
        NoiseModel::Product(p) => p.to_channel()?,
    })
}

pub fn reconstruct(a: ReconstructArgs, seed: Option<u64>, out: &Path) -> Result<()> {
    let data_path = required(&a.data, "data")?;
    let (text, bytes) = read_input(data_path)?;
    let data: DecayDataset = text.parse().with_context(|| format!("parsing {}", data_path.display()))?;
    let meta = data.metadata();
    let h: HardCycle = meta
        .get("cycle")
        .ok_or_else(|| anyhow!("dataset has no `cycle` metadata"))?
        .parse()?;
    let subsets = meta
        .get("subsets")
        .ok_or_else(|| anyhow!("dataset has no `subsets` metadata"))?
        .split(';')
        .map(|s| s.parse())
        .collect::<cer_core::Result<Vec<QubitSubset>>>()?;
    let seed = seed.unwrap_or(data.seed());
    let resamples = a.bootstrap.unwrap_or(DEFAULT_BOOTSTRAP);

    let mut fp = Fingerprint::new("reconstruct");
    let digest = fp.file("data", &bytes);
    fp.set("seed", seed);
    fp.set("bootstrap", resamples);
    let hash = fp.hash();

    let estimates = reconstruct_with_errors(&data, &h, &subsets, resamples, seed)?;
    let mut metadata = BTreeMap::new();
    metadata.insert("config_hash".to_string(), hash.clone());
    metadata.insert("data_sha256".to_string(), digest);
    metadata.insert("bootstrap".to_string(), resamples.to_string());
    let set = MarginalSet {
        cycle: h,
        seed: Some(seed),
        metadata,
        estimates,
    };
    let path = write_output(out, "marginals.txt", &set.to_string())?;
    report(&path, &format!("{} marginals", set.estimates.len()));

    let (_, fits) = fit_dataset(&data)?;
    let mut csv = format!("# config_hash: {hash}\n# seed: {seed}\norbit,lambda,intercept,std_error,residual,clamped\n");
    for (rep, f) in &fits {
        let se = f.std_error.map_or(String::new(), |s| s.to_string());
        csv.push_str(&format!(
            "{rep},{},{},{se},{},{}\n",
            f.lambda,
            f.intercept,
            f.residual,
            u8::from(f.clamped)
        ));
    }
    let path = write_output(out, "eigenvalues.csv", &csv)?;
    report(&path, &format!("{} fitted eigenvalues", fits.len()));
    Ok(())
}

/// Chain over the two-qubit blocks of `h`, in block order.
fn chain_graph(h: &HardCycle) -> Result<FactorGraph> {
    let pairs = h.blocks().into_iter().filter(|b| b.len() == 2).collect();
    Ok(FactorGraph::chain(h.num_qubits(), pairs)?)
}

pub fn logical(a: LogicalArgs, seed: u64, out: &Path) -> Result<()> {
    let path = required(&a.marginals, "marginals")?;
    let (text, bytes) = read_input(path)?;
    let set: MarginalSet = text.parse().with_context(|| format!("parsing {}", path.display()))?;
    let threshold = a.threshold.unwrap_or(DEFAULT_THRESHOLD);
    let cap = a.cap.unwrap_or(ENUMERATION_CAP);
    let resamples = a.bootstrap.unwrap_or(DEFAULT_LOGICAL_BOOTSTRAP);

    let mut fp = Fingerprint::new("logical");
    let digest = fp.file("marginals", &bytes);
    fp.set("seed", seed);
    fp.set("threshold", threshold);
    fp.set("cap", cap);
    fp.set("bootstrap", resamples);

    let graph = chain_graph(&set.cycle)?;
    let code = SteaneCodePair::new();
    let mut rates = logical_rates_with_errors(&graph, &set, &code, threshold, cap, resamples, seed)?;
    rates.metadata.insert("config_hash".into(), fp.hash());
    rates.metadata.insert("seed".into(), seed.to_string());
    rates.metadata.insert("marginals".into(), display_path(path));
    rates.metadata.insert("marginals_sha256".into(), digest);
    rates.metadata.insert("threshold".into(), threshold.to_string());
    let out_path = write_output(out, "logical.txt", &rates.to_string())?;
    report(
        &out_path,
        &format!(
            "total {:.6}, uncorrectable {:.6}",
            rates.total_error, rates.uncorrectable_rate
        ),
    );
    Ok(())
}

fn display_path(p: &Path) -> String {
    PathBuf::from(p).display().to_string()
}

type Check = (&'static str, fn() -> Result<()>);

pub fn selftest() -> ExitCode {
    let checks: Vec<Check> = vec![
        ("design counts", check_design),
        ("steane verdicts", check_steane),
        ("exact round trip", check_round_trip),
        ("chain normalization", check_chain),
    ];
    let mut ok = true;
    for (name, f) in checks {
        match f() {
            Ok(()) => println!("PASS {name}"),
            Err(e) => {
                ok = false;
                println!("FAIL {name}: {e:#}");
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

fn check_design() -> Result<()> {
    let count = |h: &HardCycle, level: Level| -> Result<usize> {
        let t = MarginalTarget::for_level(h, level)?;
        Ok(plan_initial_states(h, &t)?.initial_states().len())
    };
    let t7 = HardCycle::transversal7();
    let got = [
        count(&t7, Level::OneCnot)?,
        count(&t7, Level::TwoCnot)?,
        count(&HardCycle::single_cnot(), Level::OneCnot)?,
    ];
    if got != [4, 100, 4] {
        bail!("expected [4, 100, 4], got {got:?}");
    }
    Ok(())
}

fn check_steane() -> Result<()> {
    use cer_core::{ErrorClass, Letter};
    let code = SteaneCodePair::new();
    let cases = [
        (vec![(0, Letter::X), (1, Letter::X)], ErrorClass::Uncorrectable),
        (vec![(0, Letter::X), (9, Letter::X)], ErrorClass::Correctable),
        (vec![(0, Letter::X), (10, Letter::Z)], ErrorClass::Correctable),
    ];
    for (terms, want) in cases {
        let e = PauliOperator::from_sparse(16, &terms)?;
        let (a, b) = (code.classify_error(&e)?, code.decoder_oracle(&e)?);
        if a != want || b != want {
            bail!("{e}: rule {a}, decoder {b}, expected {want}");
        }
    }
    Ok(())
}

fn check_round_trip() -> Result<()> {
    let h = HardCycle::single_cnot();
    let terms = PauliOperator::all(2).map(|p| (p, if p.is_identity() { 0.97 } else { 0.002 }));
    let noise: NoiseModel = cer_core::PauliChannel::new(2, terms)?.into();
    let target = MarginalTarget::for_level(&h, Level::OneCnot)?;
    let plan = plan_initial_states(&h, &target)?;
    let options = SimOptions {
        method: Method::Exact,
        ..SimOptions::default()
    };
    let data = simulate_plan(&plan, &CycleNoise::Pauli(noise.clone()), &options, 1)?;
    let subset = QubitSubset::full(2);
    let est = reconstruct_with_errors(&data, &h, std::slice::from_ref(&subset), 0, 1)?;
    for (orbit, truth) in noise.orbit_marginals(&h, &subset)? {
        let got = est[0]
            .probability(orbit.representative())
            .ok_or_else(|| anyhow!("orbit {orbit} missing"))?;
        if (got - truth).abs() > 1e-9 {
            bail!("orbit {orbit}: {got} vs {truth}");
        }
    }
    Ok(())
}

fn check_chain() -> Result<()> {
    let g = cer_core::build_transversal_graph(3)?;
    let pair: cer_core::PauliChannel = "II 0.9\nXZ 0.05\nYI 0.05\n".parse()?;
    let factors = g.pairs().into_iter().map(|p| (p.clone(), pair.clone())).collect();
    let noise: NoiseModel = cer_core::ProductChannel::new(g.num_qubits(), factors)?.into();
    let model = cer_core::JointErrorModel::from_noise(g, &noise)?;
    let mut total = 0.0;
    model.enumerate(1000, |_, w| total += w)?;
    if (total - 1.0).abs() > 1e-12 {
        bail!("enumerated mass {total}");
    }
    Ok(())
}
