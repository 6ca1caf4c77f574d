//! Verification harnesses: dataset generation, exact risks, PAC coverage
//! simulation, margin-constant checks, random instances for the contraction
//! and domination inequalities, ergodic-average MSE, and the depth study.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{iid_pac_bound, markov_pac_bound, BoundSettings, MarkovTerms, RademacherInput};
use crate::complexity::{
    bound_theorem, exact_rademacher, make_fplus, verify_contraction_dnn,
    verify_contraction_highdim, ContractionReport, FiniteHypothesisTable, LipschitzFn,
    RademacherMode,
};
use crate::error::{Error, Result};
use crate::margins::{MarginKind, MarginModel};
use crate::markov::{
    analyze, random_reversible_chain, sample_trajectory_stream, AnalysisOptions, ChainModel,
};
use crate::network::{inputs_in_unit_cube, Activation, NetworkSpec};
use crate::parallel::{stream_rng, Workers};

/// Default number of coverage trials.
pub const DEFAULT_TRIALS: usize = 1000;

/// Smallest accepted number of coverage trials.
pub const MIN_TRIALS: usize = 100;

/// Cap on `trials · n · |F|` margin evaluations in one coverage run.
pub const COVERAGE_BUDGET: u128 = 20_000_000_000;

/// Point `x` with label index `label`, drawn with probability `weight`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: Vec<f64>,
    pub label: usize,
    pub weight: f64,
}

/// Data-generating law over `[0,1]^d × Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistSpec {
    /// Finite mixture of point masses.
    Finite { atoms: Vec<Atom> },
    /// `x ~ U[0,1]^dim`; label index 1 when `x[coord] ≥ threshold`, else 0.
    UniformThreshold {
        dim: usize,
        coord: usize,
        threshold: f64,
    },
}

impl DistSpec {
    pub fn point_mass(x: Vec<f64>, label: usize) -> Self {
        DistSpec::Finite {
            atoms: vec![Atom {
                x,
                label,
                weight: 1.0,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistSpec::Finite { atoms } => {
                let first = atoms
                    .first()
                    .ok_or_else(|| Error::arg("distribution has no atoms"))?;
                let d = first.x.len();
                if d == 0 {
                    return Err(Error::dim("atoms need at least one input coordinate"));
                }
                for (k, a) in atoms.iter().enumerate() {
                    if a.x.len() != d {
                        return Err(Error::dim(format!(
                            "atom {k} has dimension {}, expected {d}",
                            a.x.len()
                        )));
                    }
                    if !inputs_in_unit_cube(&a.x) {
                        return Err(Error::arg(format!("atom {k} lies outside [0,1]^d")));
                    }
                    if !a.weight.is_finite() || a.weight < 0.0 {
                        return Err(Error::arg(format!(
                            "atom {k} has invalid weight {}",
                            a.weight
                        )));
                    }
                }
                let total: f64 = atoms.iter().map(|a| a.weight).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::arg(format!("atom weights sum to {total}, not 1")));
                }
                Ok(())
            }
            DistSpec::UniformThreshold {
                dim,
                coord,
                threshold,
            } => {
                if *dim == 0 || coord >= dim {
                    return Err(Error::dim(format!(
                        "coordinate {coord} outside a {dim}-dimensional cube"
                    )));
                }
                if !(0.0..=1.0).contains(threshold) {
                    return Err(Error::arg(format!("threshold {threshold} outside [0,1]")));
                }
                Ok(())
            }
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            DistSpec::Finite { atoms } => atoms.first().map_or(0, |a| a.x.len()),
            DistSpec::UniformThreshold { dim, .. } => *dim,
        }
    }

    /// Probability of each label index, when it has a closed form.
    pub fn label_probabilities(&self, num_labels: usize) -> Result<Vec<f64>> {
        self.validate()?;
        let mut p = vec![0.0; num_labels];
        match self {
            DistSpec::Finite { atoms } => {
                for a in atoms {
                    *p.get_mut(a.label).ok_or_else(|| {
                        Error::arg(format!("label index {} outside Y", a.label))
                    })? += a.weight;
                }
            }
            DistSpec::UniformThreshold { threshold, .. } => {
                if num_labels < 2 {
                    return Err(Error::arg("threshold rule needs two labels"));
                }
                p[0] = *threshold;
                p[1] = 1.0 - threshold;
            }
        }
        Ok(p)
    }

    fn atoms(&self) -> Result<&[Atom]> {
        match self {
            DistSpec::Finite { atoms } => Ok(atoms),
            DistSpec::UniformThreshold { .. } => Err(Error::arg(
                "uniform law has no finite support; exact risks need a finite distribution",
            )),
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> (Vec<f64>, usize) {
        match self {
            DistSpec::Finite { atoms } => {
                let k = draw_index(atoms.iter().map(|a| a.weight), rng.random());
                (atoms[k].x.clone(), atoms[k].label)
            }
            DistSpec::UniformThreshold {
                dim,
                coord,
                threshold,
            } => {
                let x: Vec<f64> = (0..*dim).map(|_| rng.random()).collect();
                let label = usize::from(x[*coord] >= *threshold);
                (x, label)
            }
        }
    }
}

fn draw_index(weights: impl Iterator<Item = f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last = i;
        }
        acc += w;
        if u < acc {
            return i;
        }
    }
    last
}

/// Map from chain states to labelled points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEmbedding {
    pub points: Vec<(Vec<f64>, usize)>,
}

impl StateEmbedding {
    pub fn new(points: Vec<(Vec<f64>, usize)>) -> Result<Self> {
        let d = points
            .first()
            .ok_or_else(|| Error::arg("embedding is empty"))?
            .0
            .len();
        for (s, (x, _)) in points.iter().enumerate() {
            if x.len() != d || d == 0 {
                return Err(Error::dim(format!(
                    "state {s} embeds to dimension {}, expected {d}",
                    x.len()
                )));
            }
            if !inputs_in_unit_cube(x) {
                return Err(Error::arg(format!("state {s} embeds outside [0,1]^d")));
            }
        }
        Ok(StateEmbedding { points })
    }

    fn check_chain(&self, chain: &ChainModel) -> Result<()> {
        if self.points.len() != chain.states() {
            return Err(Error::dim(format!(
                "embedding covers {} states, chain has {}",
                self.points.len(),
                chain.states()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Iid {
        seed: u64,
    },
    MarkovTrajectory {
        seed: u64,
        chain_digest: String,
        embedding: StateEmbedding,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn margins(&self, net: &NetworkSpec, model: &MarginModel) -> Result<Vec<f64>> {
        self.inputs
            .iter()
            .zip(&self.labels)
            .map(|(x, &y)| model.margin(&net.forward(x)?, y))
            .collect()
    }
}

/// `n` i.i.d. draws from `dist`.
pub fn generate_iid(dist: &DistSpec, n: usize, seed: u64) -> Result<LabeledDataset> {
    dist.validate()?;
    if n == 0 {
        return Err(Error::arg("dataset size must be >= 1"));
    }
    let mut rng = stream_rng(seed, 0);
    let (inputs, labels) = (0..n).map(|_| dist.draw(&mut rng)).unzip();
    Ok(LabeledDataset {
        inputs,
        labels,
        provenance: Provenance::Iid { seed },
    })
}

/// Embeds a length-`n` trajectory of `chain` through `embedding`.
pub fn generate_markov_dataset(
    chain: &ChainModel,
    embedding: &StateEmbedding,
    n: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    embedding.check_chain(chain)?;
    if n == 0 {
        return Err(Error::arg("dataset size must be >= 1"));
    }
    let states = sample_trajectory_stream(chain, n, seed, 0);
    let (inputs, labels) = states.iter().map(|&s| embedding.points[s].clone()).unzip();
    Ok(LabeledDataset {
        inputs,
        labels,
        provenance: Provenance::MarkovTrajectory {
            seed,
            chain_digest: chain.digest(),
            embedding: embedding.clone(),
        },
    })
}

/// Law under which [`true_risk`] is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum RiskLaw<'a> {
    Dist(&'a DistSpec),
    Stationary(&'a ChainModel, &'a StateEmbedding),
}

fn support(law: RiskLaw<'_>) -> Result<Vec<(&[f64], usize, f64)>> {
    match law {
        RiskLaw::Dist(d) => {
            d.validate()?;
            Ok(d.atoms()?
                .iter()
                .map(|a| (a.x.as_slice(), a.label, a.weight))
                .collect())
        }
        RiskLaw::Stationary(chain, emb) => {
            emb.check_chain(chain)?;
            Ok(emb
                .points
                .iter()
                .zip(chain.stationary())
                .map(|((x, y), &p)| (x.as_slice(), *y, p))
                .collect())
        }
    }
}

/// `1{m_f ≤ 0}` on each support point of `law`, with its probability.
fn misclassified(
    net: &NetworkSpec,
    model: &MarginModel,
    law: RiskLaw<'_>,
) -> Result<Vec<(bool, f64)>> {
    support(law)?
        .into_iter()
        .map(|(x, y, p)| Ok((model.margin(&net.forward(x)?, y)? <= 0.0, p)))
        .collect()
}

/// Exact `P(m_f(X, Y) ≤ 0)` under `law`.
pub fn true_risk(net: &NetworkSpec, model: &MarginModel, law: RiskLaw<'_>) -> Result<f64> {
    let risk: f64 = misclassified(net, model, law)?
        .into_iter()
        .filter(|(wrong, _)| *wrong)
        .map(|(_, p)| p)
        .sum();
    Ok(risk.clamp(0.0, 1.0) + 0.0)
}

/// `(1/n) Σ_t P(m_f(x_t, y_t) ≤ 0)` for a chain started from its initial law.
pub fn trajectory_average_risk(
    net: &NetworkSpec,
    model: &MarginModel,
    chain: &ChainModel,
    embedding: &StateEmbedding,
    n: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::arg("n must be >= 1"));
    }
    let wrong = misclassified(net, model, RiskLaw::Stationary(chain, embedding))?;
    let q = chain.transition();
    let mut law = chain.initial().to_vec();
    let mut total = 0.0;
    for _ in 0..n {
        total += law
            .iter()
            .zip(&wrong)
            .filter(|(_, w)| w.0)
            .map(|(p, _)| p)
            .sum::<f64>();
        law = (0..law.len())
            .map(|y| law.iter().enumerate().map(|(x, p)| p * q[(x, y)]).sum())
            .collect();
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Iid(DistSpec),
    Markov {
        chain: ChainModel,
        embedding: StateEmbedding,
    },
}

#[derive(Debug, Clone)]
pub struct CoverageConfig {
    pub source: DataSource,
    /// The finite function grid; each network should carry its class norm caps.
    pub networks: Vec<NetworkSpec>,
    pub margin: MarginModel,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub settings: BoundSettings,
    pub sigma0_at_zero: f64,
    pub analysis: AnalysisOptions,
    /// `M` in the Markov convergence term; the label bound when `None`.
    pub m_f: Option<f64>,
}

impl CoverageConfig {
    pub fn new(
        source: DataSource,
        networks: Vec<NetworkSpec>,
        margin: MarginModel,
        n: usize,
    ) -> Self {
        CoverageConfig {
            source,
            networks,
            margin,
            n,
            trials: DEFAULT_TRIALS,
            seed: 0,
            settings: BoundSettings::default(),
            sigma0_at_zero: 0.0,
            analysis: AnalysisOptions::default(),
            m_f: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// `min_f (bound_f − true_risk_f)`.
    pub min_slack: f64,
    pub worst_function: usize,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub trials: usize,
    pub violations: usize,
    pub delta: f64,
    pub mean_slack: f64,
    /// `δ + 3√(δ(1−δ)/trials)`.
    pub tolerance: f64,
    /// Risk of each function under the law the bound certifies.
    pub true_risks: Vec<f64>,
    /// For Markov data: trajectory-averaged risk under the initial law.
    pub initial_law_risks: Option<Vec<f64>>,
    pub per_trial: Vec<TrialRecord>,
}

impl CoverageResult {
    pub fn violation_rate(&self) -> f64 {
        self.violations as f64 / self.trials as f64
    }

    pub fn within_tolerance(&self) -> bool {
        self.violation_rate() <= self.tolerance
    }
}

pub fn binomial_tolerance(delta: f64, trials: usize) -> f64 {
    delta + 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt()
}

/// Repeats `trials` times: draw a sample, bound every function in the grid,
/// and count trials in which some function's true risk exceeds its bound.
pub fn coverage_experiment(config: &CoverageConfig, workers: Workers) -> Result<CoverageResult> {
    let started = Instant::now();
    if config.trials < MIN_TRIALS {
        return Err(Error::arg(format!(
            "coverage needs at least {MIN_TRIALS} trials, got {}",
            config.trials
        )));
    }
    if config.networks.is_empty() {
        return Err(Error::arg("function grid is empty"));
    }
    if config.n < 2 {
        return Err(Error::arg("coverage needs n >= 2"));
    }
    let work = config.trials as u128 * config.n as u128 * config.networks.len() as u128;
    if work > COVERAGE_BUDGET {
        return Err(Error::arg(format!(
            "coverage run needs {work} margin evaluations, budget is {COVERAGE_BUDGET}"
        )));
    }

    // Margins on each support point; samples are drawn as support indices.
    let (law, weights, markov, initial_law_risks) = match &config.source {
        DataSource::Iid(dist) => {
            let atoms = dist.atoms()?;
            (
                RiskLaw::Dist(dist),
                atoms.iter().map(|a| a.weight).collect::<Vec<_>>(),
                None,
                None,
            )
        }
        DataSource::Markov { chain, embedding } => {
            let analysis = analyze(chain, &config.analysis)?;
            let m_f = config.m_f.unwrap_or(config.margin.label_bound());
            let terms = MarkovTerms::from_analysis(&analysis, m_f);
            terms.convergence_term(config.n)?;
            let nu_risks = config
                .networks
                .iter()
                .map(|net| trajectory_average_risk(net, &config.margin, chain, embedding, config.n))
                .collect::<Result<Vec<_>>>()?;
            (
                RiskLaw::Stationary(chain, embedding),
                Vec::new(),
                Some(terms),
                Some(nu_risks),
            )
        }
    };
    let points = support(law)?;
    let point_margins: Vec<Vec<f64>> = config
        .networks
        .iter()
        .map(|net| {
            points
                .iter()
                .map(|(x, y, _)| config.margin.margin(&net.forward(x)?, *y))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let true_risks = config
        .networks
        .iter()
        .map(|net| true_risk(net, &config.margin, law))
        .collect::<Result<Vec<_>>>()?;
    let rademacher = config
        .networks
        .iter()
        .map(|net| RademacherInput::closed_form(net, config.n, config.sigma0_at_zero))
        .collect::<Result<Vec<_>>>()?;

    let per_trial = workers.map_blocks(config.trials, |t| -> Result<TrialRecord> {
        let indices = match &config.source {
            DataSource::Iid(_) => {
                let mut rng = stream_rng(config.seed, t as u64);
                (0..config.n)
                    .map(|_| draw_index(weights.iter().copied(), rng.random()))
                    .collect::<Vec<_>>()
            }
            DataSource::Markov { chain, .. } => {
                sample_trajectory_stream(chain, config.n, config.seed, t as u64)
            }
        };
        let mut margins = vec![0.0; config.n];
        let mut record = TrialRecord {
            trial: t,
            min_slack: f64::INFINITY,
            worst_function: 0,
            violated: false,
        };
        for (k, net) in config.networks.iter().enumerate() {
            for (m, &i) in margins.iter_mut().zip(&indices) {
                *m = point_margins[k][i];
            }
            let report = match markov {
                None => iid_pac_bound(
                    &margins,
                    net,
                    &config.margin,
                    rademacher[k],
                    &config.settings,
                )?,
                Some(terms) => markov_pac_bound(
                    &margins,
                    net,
                    &config.margin,
                    rademacher[k],
                    &config.settings,
                    terms,
                )?,
            };
            let slack = report.bound_value - true_risks[k];
            if slack < record.min_slack {
                record.min_slack = slack;
                record.worst_function = k;
            }
        }
        record.violated = record.min_slack < 0.0;
        Ok(record)
    });
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>>>()?;
    let violations = per_trial.iter().filter(|r| r.violated).count();
    let mean_slack = per_trial.iter().map(|r| r.min_slack).sum::<f64>() / config.trials as f64;
    let elapsed = started.elapsed().as_secs_f64();
    log::info!(
        "coverage: {} trials, {violations} violations, {elapsed:.3} s",
        config.trials
    );
    Ok(CoverageResult {
        trials: config.trials,
        violations,
        delta: config.settings.delta,
        mean_slack,
        tolerance: binomial_tolerance(config.settings.delta, config.trials),
        true_risks,
        initial_law_risks,
        per_trial,
    })
}

/// One pair of outputs for which the transfer inequality was checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginCounterexample {
    pub output_a: Vec<f64>,
    pub output_b: Vec<f64>,
    pub label: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginConstantReport {
    pub kind: MarginKind,
    pub transfer_constant: f64,
    pub trials: usize,
    pub max_ratio: f64,
    pub holds: bool,
    /// The pair attaining `max_ratio`; reported verbatim when it fails.
    pub worst: Option<MarginCounterexample>,
}

const MARGIN_BLOCK: usize = 4096;

fn random_output(model: &MarginModel, rng: &mut impl Rng) -> Vec<f64> {
    let m = model.label_bound();
    (0..model.output_len())
        .map(|_| rng.random_range(-m..=m))
        .collect()
}

/// Random search for pairs violating `|m(a,y) − m(b,y)| ≤ A‖a − b‖_∞`.
///
/// Half the pairs are independent draws; the other half perturb one
/// coordinate of the first output slightly, which probes the regime where
/// the arg-max among wrong labels flips.
pub fn verify_margin_constants(
    model: &MarginModel,
    trials: usize,
    seed: u64,
    workers: Workers,
) -> Result<MarginConstantReport> {
    if trials == 0 {
        return Err(Error::arg("need at least one trial"));
    }
    let blocks = trials.div_ceil(MARGIN_BLOCK);
    let partial = workers.map_blocks(blocks, |b| -> Result<(f64, Option<MarginCounterexample>)> {
        let mut rng = stream_rng(seed, b as u64);
        let count = MARGIN_BLOCK.min(trials - b * MARGIN_BLOCK);
        let mut best = (f64::NEG_INFINITY, None);
        for t in 0..count {
            let a = random_output(model, &mut rng);
            let b_out = if t % 2 == 0 {
                random_output(model, &mut rng)
            } else {
                let mut v = a.clone();
                let j = rng.random_range(0..v.len());
                let m = model.label_bound();
                v[j] = (v[j] + rng.random_range(-0.05..=0.05) * m).clamp(-m, m);
                v
            };
            let y = rng.random_range(0..model.num_labels());
            let (lhs, rhs) = model.transfer_gap(&a, &b_out, y)?;
            let ratio = if rhs > 0.0 {
                lhs / rhs
            } else if lhs > 0.0 {
                f64::INFINITY
            } else {
                continue;
            };
            if ratio > best.0 {
                best = (
                    ratio,
                    Some(MarginCounterexample {
                        output_a: a,
                        output_b: b_out,
                        label: y,
                        lhs,
                        rhs,
                    }),
                );
            }
        }
        Ok(best)
    });
    let mut max_ratio = 0.0;
    let mut worst = None;
    for p in partial {
        let (ratio, example) = p?;
        if ratio > max_ratio {
            max_ratio = ratio;
            worst = example;
        }
    }
    Ok(MarginConstantReport {
        kind: model.kind(),
        transfer_constant: model.transfer_constant(),
        trials,
        max_ratio,
        holds: max_ratio <= 1.0 + 1e-12,
        worst,
    })
}

fn random_psi(rng: &mut impl Rng) -> Result<LipschitzFn> {
    Ok(match rng.random_range(0..4) {
        0 => LipschitzFn::identity(),
        1 => LipschitzFn::relu(),
        2 => LipschitzFn::sigmoid(),
        _ => LipschitzFn::two_piece_linear(
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )?,
    })
}

fn random_activation(rng: &mut impl Rng) -> Activation {
    match rng.random_range(0..4) {
        0 => Activation::relu(),
        1 => Activation::sigmoid(),
        2 => Activation::tanh(),
        _ => Activation::identity(),
    }
}

/// Random table with `functions` nonzero rows plus the zero row.
fn random_table(
    functions: usize,
    samples: usize,
    coords: usize,
    rng: &mut impl Rng,
) -> Result<FiniteHypothesisTable> {
    let values = (0..functions * samples * coords)
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    Ok(FiniteHypothesisTable::new(functions, samples, coords, values)?.with_zero_row())
}

/// Random instance of the vector-valued contraction inequality:
/// `n ≤ 10` samples, at most 8 functions (zero included), `m ≤ 3`
/// coordinates, and `ψ` drawn from identity, ReLU, sigmoid and a random
/// two-piece linear map.
pub fn contraction_instance_highdim(seed: u64, workers: Workers) -> Result<ContractionReport> {
    let mut rng = stream_rng(seed, 0);
    let n = rng.random_range(1..=10);
    let h = rng.random_range(1..=7);
    let m = rng.random_range(1..=3);
    let table = random_table(h, n, m, &mut rng)?;
    let psi = random_psi(&mut rng)?;
    Ok(verify_contraction_highdim(&table, &psi, workers)?.with_seed(seed))
}

/// Random matrix in `R^{rows×cols}` with every column L1 norm at most `cap`.
fn capped_matrix(rows: usize, cols: usize, cap: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut w: DMatrix<f64> = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    for mut col in w.column_iter_mut() {
        let l1: f64 = col.iter().map(|v: &f64| v.abs()).sum();
        let target = cap * rng.random_range(0.5..=1.0);
        if l1 > 0.0 {
            col *= target / l1;
        }
    }
    w
}

/// Random instance of the layer-wise contraction inequality with a class of
/// column-L1-capped matrices.
pub fn contraction_instance_dnn(seed: u64, workers: Workers) -> Result<ContractionReport> {
    let mut rng = stream_rng(seed, 0);
    let n = rng.random_range(1..=8);
    let g = rng.random_range(1..=6);
    let q = rng.random_range(1..=3);
    let p = rng.random_range(1..=3);
    let nu = rng.random_range(0.5..2.0);
    let table = random_table(g, n, q, &mut rng)?;
    let k = rng.random_range(1..=5);
    let weights: Vec<DMatrix<f64>> = (0..k).map(|_| capped_matrix(q, p, nu, &mut rng)).collect();
    let sigma = random_activation(&mut rng);
    Ok(verify_contraction_dnn(&weights, nu, &table, &sigma, workers)?.with_seed(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub seed: u64,
    pub depth: usize,
    pub dims: Vec<usize>,
    pub n: usize,
    pub networks: usize,
    /// Exact `R_n(F_+)` over the sampled grid.
    pub empirical: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Number of grid steps per unit of weight in [`domination_instance`].
pub const WEIGHT_GRID_RESOLUTION: i32 = 4;

/// Random class of tiny networks (depth ≤ 2, widths ≤ 3, `n ≤ 12`) whose
/// weights lie on a uniform grid inside per-layer norm caps; compares the
/// exact Rademacher average of `F_+` against the closed-form bound.
pub fn domination_instance(
    seed: u64,
    networks: usize,
    workers: Workers,
) -> Result<DominationReport> {
    if networks == 0 {
        return Err(Error::arg("need at least one network"));
    }
    let mut rng = stream_rng(seed, 0);
    let depth = rng.random_range(1..=2);
    let mut dims = vec![rng.random_range(1..=3)];
    for _ in 1..depth {
        dims.push(rng.random_range(1..=3));
    }
    dims.push(1);
    let n = rng.random_range(1..=12);
    let activations: Vec<Activation> = (0..depth).map(|_| random_activation(&mut rng)).collect();
    let caps: Vec<f64> = (0..depth).map(|_| rng.random_range(0.25..2.0)).collect();
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dims[0]).map(|_| rng.random::<f64>()).collect())
        .collect();

    let res = WEIGHT_GRID_RESOLUTION;
    let mut nets = Vec::with_capacity(networks);
    for _ in 0..networks {
        let weights: Vec<DMatrix<f64>> = (0..depth)
            .map(|l| {
                let rows = if l == 0 { dims[0] + 1 } else { dims[l] };
                // entries k·cap/(res·rows) with |k| ≤ res keep each column within the cap
                let step = caps[l] / (res as f64 * rows as f64);
                DMatrix::from_fn(rows, dims[l + 1], |_, _| {
                    rng.random_range(-res..=res) as f64 * step
                })
            })
            .collect();
        let mut net = NetworkSpec::new(dims.clone(), weights, activations.clone())?;
        for (l, &cap) in caps.iter().enumerate() {
            net = net.with_norm_cap(l + 1, cap)?;
        }
        nets.push(net);
    }
    let table = make_fplus(&FiniteHypothesisTable::from_networks(&nets, &xs)?);
    let empirical = exact_rademacher(&table, RademacherMode::SignedSup, workers)?.value;
    let bound = bound_theorem(&nets[0], n, 0.0)?;
    Ok(DominationReport {
        seed,
        depth,
        dims,
        n,
        networks,
        empirical,
        bound,
        holds: empirical <= bound * (1.0 + 1e-12),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub n: usize,
    pub n0: usize,
    pub m_f: f64,
    pub trajectories: usize,
    pub target: f64,
    pub empirical_mse: f64,
    pub std_error: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Monte Carlo estimate of `E|S_{n,n0}(f) − E_π f|²` against its bound.
///
/// `f` gives the value on each state; `m_f = max |f|`.
pub fn mse_experiment(
    chain: &ChainModel,
    f: &[f64],
    n: usize,
    n0: usize,
    trajectories: usize,
    seed: u64,
    workers: Workers,
) -> Result<MseReport> {
    if f.len() != chain.states() {
        return Err(Error::dim(format!(
            "f has {} values, chain has {} states",
            f.len(),
            chain.states()
        )));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("f has non-finite values"));
    }
    if trajectories == 0 || n == 0 {
        return Err(Error::arg("need n >= 1 and at least one trajectory"));
    }
    let m_f = f.iter().fold(0.0, |m, v| f64::max(m, v.abs()));
    let bound = crate::markov::mse_bound(chain, n, n0, m_f)?;
    let target: f64 = f.iter().zip(chain.stationary()).map(|(v, p)| v * p).sum();
    let sq = workers.map_blocks(trajectories, |t| {
        let path = sample_trajectory_stream(chain, n + n0, seed, t as u64);
        let avg = path[n0..].iter().map(|&s| f[s]).sum::<f64>() / n as f64;
        (avg - target).powi(2)
    });
    let count = trajectories as f64;
    let mean = sq.iter().sum::<f64>() / count;
    let var = if trajectories > 1 {
        sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0)
    } else {
        0.0
    };
    Ok(MseReport {
        n,
        n0,
        m_f,
        trajectories,
        target,
        empirical_mse: mean,
        std_error: (var / count).sqrt(),
        bound,
        holds: mean <= bound,
    })
}

/// Random `(chain, f)` pair: a reversible chain on 2 to 6 states started
/// from a point mass or a random law, and `f` either an indicator or a
/// function with values in `[-1, 1]`.
pub fn mse_instance(seed: u64, trajectories: usize, workers: Workers) -> Result<MseReport> {
    let mut rng = stream_rng(seed, u64::MAX);
    let states = rng.random_range(2..=6);
    let chain = random_reversible_chain(states, &mut rng)?;
    let nu: Vec<f64> = if rng.random_bool(0.5) {
        let s = rng.random_range(0..states);
        (0..states)
            .map(|x| if x == s { 1.0 } else { 0.0 })
            .collect()
    } else {
        let w: Vec<f64> = (0..states).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = w.iter().sum();
        w.iter().map(|v| v / total).collect()
    };
    let chain = chain.with_initial(nu)?;
    let f: Vec<f64> = if rng.random_bool(0.5) {
        (0..states)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
            .collect()
    } else {
        (0..states).map(|_| rng.random_range(-1.0..=1.0)).collect()
    };
    let n = rng.random_range(20..=200);
    let n0 = rng.random_range(0..=3);
    mse_experiment(&chain, &f, n, n0, trajectories, seed, workers)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthPoint {
    pub depth: usize,
    pub alpha_product: f64,
    pub rademacher_bound: f64,
    pub complexity_term: f64,
    /// Ratio to the previous depth's complexity term.
    pub ratio: Option<f64>,
}

/// ReLU network of the given depth whose layers all have `α = alpha`.
pub fn uniform_relu_network(
    input_dim: usize,
    width: usize,
    depth: usize,
    alpha: f64,
) -> Result<NetworkSpec> {
    if depth == 0 || width == 0 || input_dim == 0 {
        return Err(Error::dim(
            "depth, width and input dimension must be positive",
        ));
    }
    let mut dims = vec![input_dim];
    dims.extend(std::iter::repeat_n(width, depth - 1));
    dims.push(1);
    let weights = (0..depth)
        .map(|l| {
            let rows = if l == 0 { input_dim + 1 } else { dims[l] };
            DMatrix::from_element(rows, dims[l + 1], alpha / rows as f64)
        })
        .collect();
    NetworkSpec::new(dims, weights, vec![Activation::relu(); depth])
}

/// Complexity term `2M(2M−1)/γ · R_n` of the bound for ReLU networks with
/// `α_i = alpha` at every depth in `depths`.
pub fn depth_study(
    alpha: f64,
    depths: &[usize],
    input_dim: usize,
    n: usize,
    gamma: f64,
    label_bound: f64,
) -> Result<Vec<DepthPoint>> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::arg("gamma must be positive"));
    }
    let scale = 2.0 * label_bound * (2.0 * label_bound - 1.0) / gamma;
    let mut out: Vec<DepthPoint> = Vec::with_capacity(depths.len());
    for &depth in depths {
        let net = uniform_relu_network(input_dim, 2, depth, alpha)?;
        let r = bound_theorem(&net, n, 0.0)?;
        let term = scale * r;
        out.push(DepthPoint {
            depth,
            alpha_product: net.alpha_product(),
            rademacher_bound: r,
            complexity_term: term,
            ratio: out.last().map(|p| term / p.complexity_term),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_atoms() -> DistSpec {
        DistSpec::Finite {
            atoms: vec![
                Atom {
                    x: vec![0.1],
                    label: 0,
                    weight: 0.3,
                },
                Atom {
                    x: vec![0.5],
                    label: 1,
                    weight: 0.2,
                },
                Atom {
                    x: vec![0.9],
                    label: 1,
                    weight: 0.5,
                },
            ],
        }
    }

    /// `f(x) = w·x + b` through an identity layer.
    fn affine(w: f64, b: f64) -> NetworkSpec {
        NetworkSpec::new(
            vec![1, 1],
            vec![DMatrix::from_row_slice(2, 1, &[w, b])],
            vec![Activation::identity()],
        )
        .unwrap()
    }

    #[test]
    fn point_mass_gives_identical_rows() {
        let d = generate_iid(&DistSpec::point_mass(vec![0.2, 0.7], 1), 5, 3).unwrap();
        assert!(d.inputs.iter().all(|x| x == &vec![0.2, 0.7]));
        assert!(d.labels.iter().all(|&y| y == 1));
    }

    #[test]
    fn iid_is_seeded() {
        let a = generate_iid(&binary_atoms(), 50, 1).unwrap();
        let b = generate_iid(&binary_atoms(), 50, 1).unwrap();
        let c = generate_iid(&binary_atoms(), 50, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.labels, c.labels);
    }

    #[test]
    fn uniform_label_frequency_matches() {
        let dist = DistSpec::UniformThreshold {
            dim: 2,
            coord: 0,
            threshold: 0.3,
        };
        let n = 20_000;
        let d = generate_iid(&dist, n, 9).unwrap();
        let p = dist.label_probabilities(2).unwrap()[1];
        let freq = d.labels.iter().filter(|&&y| y == 1).count() as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() <= 3.0 * sigma, "{freq} vs {p}");
        assert!(d.inputs.iter().all(|x| inputs_in_unit_cube(x)));
    }

    #[test]
    fn bad_specs_are_rejected() {
        let bad = DistSpec::Finite {
            atoms: vec![Atom {
                x: vec![0.1],
                label: 0,
                weight: 0.4,
            }],
        };
        assert!(generate_iid(&bad, 3, 0).is_err());
        let outside = DistSpec::point_mass(vec![1.5], 0);
        assert!(generate_iid(&outside, 3, 0).is_err());
        assert!(generate_iid(&binary_atoms(), 0, 0).is_err());
        let uni = DistSpec::UniformThreshold {
            dim: 1,
            coord: 0,
            threshold: 0.5,
        };
        let model = MarginModel::binary(1.0).unwrap();
        assert!(true_risk(&affine(1.0, 0.0), &model, RiskLaw::Dist(&uni)).is_err());
    }

    #[test]
    fn markov_dataset_follows_trajectory() {
        let chain = ChainModel::two_state(0.3, 0.2, None).unwrap();
        let emb = StateEmbedding::new(vec![(vec![0.1], 0), (vec![0.9], 1)]).unwrap();
        let d = generate_markov_dataset(&chain, &emb, 30, 4).unwrap();
        let path = sample_trajectory_stream(&chain, 30, 4, 0);
        for (t, &s) in path.iter().enumerate() {
            assert_eq!(d.inputs[t], emb.points[s].0);
            assert_eq!(d.labels[t], emb.points[s].1);
        }
        match &d.provenance {
            Provenance::MarkovTrajectory { chain_digest, .. } => {
                assert_eq!(chain_digest, &chain.digest())
            }
            _ => panic!("wrong provenance"),
        }
        let short = StateEmbedding::new(vec![(vec![0.1], 0)]).unwrap();
        assert!(generate_markov_dataset(&chain, &short, 5, 0).is_err());
    }

    #[test]
    fn cycle_chain_gives_periodic_data() {
        let chain = ChainModel::from_rows(
            &[
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![1.0, 0.0, 0.0],
            ],
            Some(vec![1.0, 0.0, 0.0]),
        )
        .unwrap();
        let emb =
            StateEmbedding::new(vec![(vec![0.0], 0), (vec![0.5], 1), (vec![1.0], 1)]).unwrap();
        let d = generate_markov_dataset(&chain, &emb, 9, 0).unwrap();
        for t in 3..9 {
            assert_eq!(d.inputs[t], d.inputs[t - 3]);
        }
    }

    #[test]
    fn stationary_frequencies_match() {
        let chain = ChainModel::two_state(0.3, 0.2, Some(vec![0.4, 0.6])).unwrap();
        let emb = StateEmbedding::new(vec![(vec![0.1], 0), (vec![0.9], 1)]).unwrap();
        let n = 200_000;
        let d = generate_markov_dataset(&chain, &emb, n, 11).unwrap();
        let freq = d.labels.iter().filter(|&&y| y == 0).count() as f64 / n as f64;
        // asymptotic variance of the indicator average: π0 π1 (1+λ)/(1−λ)
        let sigma = (0.4f64 * 0.6 * 1.5 / 0.5 / n as f64).sqrt();
        assert!((freq - 0.4).abs() <= 3.0 * sigma, "{freq}");
    }

    #[test]
    fn true_risk_examples() {
        let model = MarginModel::binary(1.0).unwrap();
        // f(x) = x − 0.3 is correct with positive margin on every atom.
        assert_eq!(
            true_risk(&affine(1.0, -0.3), &model, RiskLaw::Dist(&binary_atoms())).unwrap(),
            0.0
        );

        let chain = ChainModel::two_state(0.3, 0.2, None).unwrap();
        // f(x) = 0.5 − x: state 0 at x = 0.1 has label −1 and margin −0.4 ≤ 0.
        let emb = StateEmbedding::new(vec![(vec![0.1], 0), (vec![0.9], 0)]).unwrap();
        let f = affine(-1.0, 0.5);
        assert_eq!(model.margin(&f.forward(&[0.9]).unwrap(), 0).unwrap(), 0.4);
        let r = true_risk(&f, &model, RiskLaw::Stationary(&chain, &emb)).unwrap();
        assert!((r - 0.4).abs() < 1e-12);
    }

    #[test]
    fn true_risk_matches_sampling() {
        let model = MarginModel::binary(1.0).unwrap();
        let f = affine(1.0, -0.6);
        let dist = binary_atoms();
        let exact = true_risk(&f, &model, RiskLaw::Dist(&dist)).unwrap();
        let n = 1_000_000;
        let d = generate_iid(&dist, n, 5).unwrap();
        let wrong = d
            .margins(&f, &model)
            .unwrap()
            .iter()
            .filter(|&&m| m <= 0.0)
            .count();
        let freq = wrong as f64 / n as f64;
        let sigma = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((freq - exact).abs() <= 3.0 * sigma, "{freq} vs {exact}");
    }

    #[test]
    fn initial_law_risk_tends_to_stationary() {
        let model = MarginModel::binary(1.0).unwrap();
        let chain = ChainModel::two_state(0.3, 0.2, Some(vec![1.0, 0.0])).unwrap();
        let emb = StateEmbedding::new(vec![(vec![0.1], 0), (vec![0.9], 0)]).unwrap();
        let f = affine(-1.0, 0.5);
        assert_eq!(
            trajectory_average_risk(&f, &model, &chain, &emb, 1).unwrap(),
            1.0
        );
        let long = trajectory_average_risk(&f, &model, &chain, &emb, 100_000).unwrap();
        assert!((long - 0.4).abs() < 1e-4);
    }

    fn small_coverage(source: DataSource) -> CoverageConfig {
        let grid: Vec<NetworkSpec> = [-0.5, 0.0, 0.5]
            .iter()
            .map(|&b| affine(0.5, b * 0.5).with_norm_cap(1, 0.75).unwrap())
            .collect();
        let mut cfg = CoverageConfig::new(source, grid, MarginModel::binary(1.0).unwrap(), 20);
        cfg.trials = 100;
        cfg.seed = 3;
        cfg
    }

    #[test]
    fn vacuous_regime_never_violates() {
        let result = coverage_experiment(
            &small_coverage(DataSource::Iid(binary_atoms())),
            Workers::new(2),
        )
        .unwrap();
        assert_eq!(result.violations, 0);
        assert!(result.mean_slack >= 0.0);
        assert_eq!(result.per_trial.len(), 100);
    }

    #[test]
    fn coverage_is_worker_independent() {
        let chain = ChainModel::two_state(0.3, 0.2, Some(vec![1.0, 0.0])).unwrap();
        let emb = StateEmbedding::new(vec![(vec![0.1], 0), (vec![0.9], 1)]).unwrap();
        let cfg = small_coverage(DataSource::Markov {
            chain,
            embedding: emb,
        });
        let a = coverage_experiment(&cfg, Workers::single()).unwrap();
        let b = coverage_experiment(&cfg, Workers::new(4)).unwrap();
        assert_eq!(a.per_trial, b.per_trial);
        assert!(a.initial_law_risks.is_some());
        let mut few = cfg.clone();
        few.trials = 10;
        assert!(coverage_experiment(&few, Workers::single()).is_err());
    }

    #[test]
    fn margin_constant_search() {
        for model in [
            MarginModel::binary(1.0).unwrap(),
            MarginModel::squared_ml(1.0, vec![-1.0, 0.0, 1.0]).unwrap(),
            MarginModel::softmax(1.0, 3).unwrap(),
        ] {
            let r = verify_margin_constants(&model, 5000, 1, Workers::new(2)).unwrap();
            assert!(r.holds, "{:?}: {}", model.kind(), r.max_ratio);
        }
        let bin = verify_margin_constants(
            &MarginModel::binary(1.0).unwrap(),
            1000,
            2,
            Workers::single(),
        )
        .unwrap();
        assert!((bin.max_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_instances_hold() {
        for seed in 0..5 {
            assert!(
                contraction_instance_highdim(seed, Workers::single())
                    .unwrap()
                    .holds
            );
            assert!(
                contraction_instance_dnn(seed, Workers::single())
                    .unwrap()
                    .holds
            );
            assert!(
                domination_instance(seed, 8, Workers::single())
                    .unwrap()
                    .holds
            );
        }
    }

    #[test]
    fn mse_indicator_is_dominated() {
        let chain = ChainModel::two_state(0.3, 0.2, Some(vec![1.0, 0.0])).unwrap();
        let r = mse_experiment(&chain, &[1.0, 0.0], 100, 0, 2000, 7, Workers::new(2)).unwrap();
        assert!(r.holds, "{} > {}", r.empirical_mse, r.bound);
        assert!((r.target - 0.4).abs() < 1e-12);
        assert!(mse_experiment(&chain, &[1.0], 10, 0, 10, 0, Workers::single()).is_err());
        for seed in 0..3 {
            assert!(mse_instance(seed, 500, Workers::new(2)).unwrap().holds);
        }
    }

    #[test]
    fn depth_study_ratio() {
        let pts = depth_study(0.4, &(1..=8).collect::<Vec<_>>(), 3, 100, 0.5, 1.0).unwrap();
        for p in &pts[1..] {
            assert!((p.ratio.unwrap() - 0.8).abs() < 1e-12);
        }
    }
}
