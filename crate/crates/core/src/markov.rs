//! Finite-state Markov chain analytics.
//!
//! All operator quantities live in `L2(π)`: with `D = diag(π)`, the map
//! `B ↦ D^{1/2} B D^{-1/2}` turns the `L2(π)` operator norm into the ordinary
//! spectral norm.

use nalgebra::{DMatrix, Schur, SVD};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::parallel::stream_rng;

const ROW_SUM_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;
const REVERSIBLE_TOL: f64 = 1e-10;
const UNIT_EIGENVALUE_TOL: f64 = 1e-9;

/// Default cap on the number of steps explored by [`mixing_time`].
pub const DEFAULT_T_MAX: usize = 1_000_000;

/// Stop iterating once `d(t)` has not improved for this many steps.
const STAGNATION_WINDOW: usize = 10_000;

/// A finite-state chain with transition matrix `Q`, initial law `ν` and
/// stationary law `π`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    q: DMatrix<f64>,
    nu: Vec<f64>,
    pi: Vec<f64>,
    reversible: bool,
}

fn check_distribution(name: &str, p: &[f64], states: usize) -> Result<()> {
    if p.len() != states {
        return Err(Error::dim(format!(
            "{name} has {} entries, chain has {states} states",
            p.len()
        )));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::arg(format!(
            "{name} has negative or non-finite entries"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > ROW_SUM_TOL * states as f64 {
        return Err(Error::arg(format!("{name} sums to {total}, not 1")));
    }
    Ok(())
}

fn check_stochastic(q: &DMatrix<f64>) -> Result<()> {
    if q.nrows() != q.ncols() {
        return Err(Error::dim(format!(
            "transition matrix is {}x{}, not square",
            q.nrows(),
            q.ncols()
        )));
    }
    if q.nrows() < 2 {
        return Err(Error::dim("a chain needs at least two states"));
    }
    for (x, row) in q.row_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::arg(format!(
                "row {x} has negative or non-finite entries"
            )));
        }
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::arg(format!("row {x} sums to {total}, not 1")));
        }
    }
    Ok(())
}

fn reachable(q: &DMatrix<f64>, from: usize, forward: bool) -> Vec<bool> {
    let s = q.nrows();
    let mut seen = vec![false; s];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(x) = stack.pop() {
        for y in 0..s {
            let w = if forward { q[(x, y)] } else { q[(y, x)] };
            if w > 0.0 && !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    seen
}

fn check_irreducible(q: &DMatrix<f64>) -> Result<()> {
    let missing = |seen: &[bool]| -> Vec<usize> {
        seen.iter()
            .enumerate()
            .filter(|(_, &r)| !r)
            .map(|(i, _)| i)
            .collect()
    };
    let unreachable = missing(&reachable(q, 0, true));
    if !unreachable.is_empty() {
        return Err(Error::Reducible {
            from: 0,
            unreachable,
        });
    }
    // every state reaches 0 unless the reverse search misses one
    let cannot_return = missing(&reachable(q, 0, false));
    if let Some(&from) = cannot_return.first() {
        return Err(Error::Reducible {
            from,
            unreachable: missing(&reachable(q, from, true)),
        });
    }
    Ok(())
}

fn stationary_residual(q: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let s = q.nrows();
    (0..s)
        .map(|y| {
            let flow: f64 = (0..s).map(|x| pi[x] * q[(x, y)]).sum();
            (flow - pi[y]).abs()
        })
        .fold(0.0, f64::max)
}

/// Unique stationary distribution of an irreducible chain.
pub fn stationary(q: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_stochastic(q)?;
    check_irreducible(q)?;
    let s = q.nrows();
    // (Qᵀ − I) π = 0 with the last equation replaced by Σ π = 1
    let mut a = q.transpose() - DMatrix::identity(s, s);
    a.row_mut(s - 1).fill(1.0);
    let mut b = nalgebra::DVector::zeros(s);
    b[s - 1] = 1.0;
    let solved = a.lu().solve(&b).ok_or_else(|| Error::Numerical {
        what: "stationary system is singular".into(),
        residual: f64::NAN,
    })?;
    let mut pi: Vec<f64> = solved.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    let residual = stationary_residual(q, &pi);
    if residual > STATIONARY_TOL {
        return Err(Error::Numerical {
            what: "stationary distribution failed the fixed-point check".into(),
            residual,
        });
    }
    Ok(pi)
}

impl ChainModel {
    /// Irreducible chain; `nu` defaults to the stationary law.
    pub fn new(q: DMatrix<f64>, nu: Option<Vec<f64>>) -> Result<Self> {
        let pi = stationary(&q)?;
        let nu = nu.unwrap_or_else(|| pi.clone());
        Self::assemble(q, nu, pi)
    }

    pub fn from_rows(rows: &[Vec<f64>], nu: Option<Vec<f64>>) -> Result<Self> {
        let s = rows.len();
        if rows.iter().any(|r| r.len() != s) {
            return Err(Error::dim("transition matrix rows must all have length S"));
        }
        let q = DMatrix::from_row_iterator(s, s, rows.iter().flatten().copied());
        Self::new(q, nu)
    }

    /// Two-state chain with `P(0→1) = p` and `P(1→0) = r`.
    pub fn two_state(p: f64, r: f64, nu: Option<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&[vec![1.0 - p, p], vec![r, 1.0 - r]], nu)
    }

    /// Uses a caller-supplied stationary law instead of solving for one.
    /// Irreducibility is not required, only `πᵀQ = πᵀ`.
    pub fn with_stationary(q: DMatrix<f64>, nu: Vec<f64>, pi: Vec<f64>) -> Result<Self> {
        check_stochastic(&q)?;
        check_distribution("pi", &pi, q.nrows())?;
        let residual = stationary_residual(&q, &pi);
        if residual > STATIONARY_TOL {
            return Err(Error::Numerical {
                what: "supplied pi is not stationary".into(),
                residual,
            });
        }
        Self::assemble(q, nu, pi)
    }

    fn assemble(q: DMatrix<f64>, nu: Vec<f64>, pi: Vec<f64>) -> Result<Self> {
        check_stochastic(&q)?;
        check_distribution("nu", &nu, q.nrows())?;
        let s = q.nrows();
        let reversible = (0..s).all(|x| {
            (0..s).all(|y| (pi[x] * q[(x, y)] - pi[y] * q[(y, x)]).abs() <= REVERSIBLE_TOL)
        });
        Ok(ChainModel {
            q,
            nu,
            pi,
            reversible,
        })
    }

    /// Same kernel, different initial law.
    pub fn with_initial(&self, nu: Vec<f64>) -> Result<Self> {
        Self::assemble(self.q.clone(), nu, self.pi.clone())
    }

    pub fn states(&self) -> usize {
        self.q.nrows()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn initial(&self) -> &[f64] {
        &self.nu
    }

    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    pub fn pi_star(&self) -> f64 {
        self.pi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn require_positive_pi(&self) -> Result<()> {
        if self.pi.iter().any(|&p| p <= 0.0) {
            return Err(Error::arg(
                "analysis requires a strictly positive stationary law",
            ));
        }
        Ok(())
    }

    /// SHA-256 over the bit patterns of `Q` and `ν`.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.states() as u64).to_le_bytes());
        for v in self.q.transpose().iter().chain(&self.nu) {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    /// `‖Q − E_π‖` on `L2(π)`.
    pub lambda: f64,
    /// Absolute spectral gap; 0 when eigenvalue 1 is not simple.
    pub gamma_star: f64,
    pub unit_eigenvalue_multiplicity: usize,
}

fn similarity(chain: &ChainModel, m: &DMatrix<f64>) -> DMatrix<f64> {
    let s = chain.states();
    DMatrix::from_fn(s, s, |x, y| {
        chain.pi[x].sqrt() * m[(x, y)] / chain.pi[y].sqrt()
    })
}

/// `λ` from the largest singular value of `D^{1/2}(Q − 1πᵀ)D^{-1/2}`, and
/// `γ*` from the complex spectrum of `Q`.
pub fn spectral_gap(chain: &ChainModel) -> Result<SpectralGap> {
    chain.require_positive_pi()?;
    let s = chain.states();
    let centered = DMatrix::from_fn(s, s, |x, y| chain.q[(x, y)] - chain.pi[y]);
    let b = similarity(chain, &centered);
    let svd = SVD::try_new(b.clone(), false, false, f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Numerical {
            what: "singular value decomposition did not converge".into(),
            residual: b.norm(),
        }
    })?;
    let lambda = svd.singular_values.iter().copied().fold(0.0, f64::max);

    let schur =
        Schur::try_new(chain.q.clone(), f64::EPSILON, 10_000).ok_or_else(|| Error::Numerical {
            what: "eigenvalue iteration did not converge".into(),
            residual: chain.q.norm(),
        })?;
    let eig = schur.complex_eigenvalues();
    let unit = eig
        .iter()
        .filter(|z| (*z - nalgebra::Complex::new(1.0, 0.0)).norm() <= UNIT_EIGENVALUE_TOL)
        .count();
    let gamma_star = if unit == 1 {
        let mut moduli: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
        // drop the single eigenvalue closest to 1
        let (idx, _) = eig
            .iter()
            .enumerate()
            .map(|(i, z)| (i, (*z - nalgebra::Complex::new(1.0, 0.0)).norm()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        moduli.remove(idx);
        (1.0 - moduli.iter().copied().fold(0.0, f64::max)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(SpectralGap {
        lambda,
        gamma_star,
        unit_eigenvalue_multiplicity: unit,
    })
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = (a + a.transpose()) * 0.5;
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off.sqrt() <= 1e-15 * m.norm().max(1e-300) {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                let apr = m[(p, r)];
                if apr.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(r, r)] - m[(p, p)]) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkr = m[(k, r)];
                    m[(k, p)] = c * mkp - s * mkr;
                    m[(k, r)] = s * mkp + c * mkr;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mrk = m[(r, k)];
                    m[(p, k)] = c * mpk - s * mrk;
                    m[(r, k)] = s * mpk + c * mrk;
                }
            }
        }
    }
    (0..n).map(|i| m[(i, i)]).collect()
}

/// Second-largest absolute eigenvalue of a reversible chain, computed from
/// the symmetrised kernel `D^{1/2} Q D^{-1/2}`. This is independent of the
/// SVD route used by [`spectral_gap`].
pub fn reversible_second_eigenvalue(chain: &ChainModel) -> Result<f64> {
    if !chain.reversible {
        return Err(Error::arg("chain is not reversible"));
    }
    chain.require_positive_pi()?;
    let a = similarity(chain, &chain.q);
    let mut eig = symmetric_eigenvalues(&a);
    // the Perron eigenvalue is the largest one
    let top = eig
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |b, (i, &v)| if v > b.1 { (i, v) } else { b },
        )
        .0;
    eig.remove(top);
    Ok(eig.iter().map(|v| v.abs()).fold(0.0, f64::max))
}

fn tv_rows(p: &DMatrix<f64>, pi: &[f64]) -> f64 {
    p.row_iter()
        .map(|row| 0.5 * row.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `d(t) = max_x TV(Q^t(x, ·), π)` for `t = 1..=steps`.
pub fn distance_profile(chain: &ChainModel, steps: usize) -> Vec<f64> {
    let mut p = chain.q.clone();
    let mut out = Vec::with_capacity(steps);
    for t in 1..=steps {
        out.push(tv_rows(&p, &chain.pi));
        if t < steps {
            p = &p * &chain.q;
        }
    }
    out
}

/// First hitting times of `d(t) ≤ ε` for every target, or `None` where the
/// target is not reached within `t_max` steps. Also returns the last `d(t)`
/// evaluated.
fn hitting_times(chain: &ChainModel, targets: &[f64], t_max: usize) -> (Vec<Option<usize>>, f64) {
    let mut hits = vec![None; targets.len()];
    let mut p = chain.q.clone();
    let mut best = f64::INFINITY;
    let mut last_improvement = 0;
    let mut d = f64::NAN;
    for t in 1..=t_max.max(1) {
        d = tv_rows(&p, &chain.pi);
        for (hit, &eps) in hits.iter_mut().zip(targets) {
            if hit.is_none() && d <= eps {
                *hit = Some(t);
            }
        }
        if hits.iter().all(Option::is_some) {
            break;
        }
        if d < best * (1.0 - 1e-9) {
            best = d;
            last_improvement = t;
        } else if t - last_improvement > STAGNATION_WINDOW {
            break;
        }
        p = &p * &chain.q;
    }
    (hits, d)
}

/// `t_mix(ε) = min{t ≥ 1 : d(t) ≤ ε}`.
pub fn mixing_time(chain: &ChainModel, epsilon: f64, t_max: usize) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::arg(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let (hits, d) = hitting_times(chain, &[epsilon], t_max);
    hits[0].ok_or(Error::Divergence {
        epsilon,
        t_max,
        distance: d,
    })
}

/// `{0, 0.05, …, 0.95}`.
pub fn default_tau_grid() -> Vec<f64> {
    (0..20).map(|k| k as f64 * 0.05).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauMin {
    /// Grid minimum of `t_mix(ε)((2−ε)/(1−ε))²`; an upper approximation of
    /// the infimum over `[0, 1)`.
    pub value: f64,
    pub epsilon: f64,
    pub mixing_time: usize,
}

/// Minimises `t_mix(ε)((2−ε)/(1−ε))²` over `grid`. The point `ε = 0` is
/// evaluated at `f64::EPSILON`; grid points whose mixing time is not reached
/// within `t_max` are skipped.
pub fn tau_min(chain: &ChainModel, grid: &[f64], t_max: usize) -> Result<TauMin> {
    if grid.is_empty() {
        return Err(Error::arg("tau_min grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|e| !(0.0..1.0).contains(*e)) {
        return Err(Error::arg(format!(
            "tau_min grid point {bad} outside [0, 1)"
        )));
    }
    let targets: Vec<f64> = grid.iter().map(|&e| e.max(f64::EPSILON)).collect();
    let (hits, d) = hitting_times(chain, &targets, t_max);
    let mut best: Option<TauMin> = None;
    for (&eps, hit) in grid.iter().zip(&hits) {
        let Some(t) = *hit else {
            log::debug!("t_mix({eps}) not reached within {t_max} steps; skipping");
            continue;
        };
        let value = t as f64 * ((2.0 - eps) / (1.0 - eps)).powi(2);
        if best.is_none_or(|b| value < b.value) {
            best = Some(TauMin {
                value,
                epsilon: eps,
                mixing_time: t,
            });
        }
    }
    best.ok_or(Error::Divergence {
        epsilon: grid.iter().copied().fold(0.0, f64::max),
        t_max,
        distance: d,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialStats {
    /// `max_x ν_x / π_x`
    pub c: f64,
    /// `(Σ_x π_x (ν_x/π_x − 1)²)^{1/2}`
    pub chi_norm: f64,
    /// `(Σ_x (ν_x/π_x − 1)²)^{1/2}`
    pub chi_norm_unweighted: f64,
}

pub fn initial_distribution_stats(chain: &ChainModel) -> Result<InitialStats> {
    chain.require_positive_pi()?;
    let ratios: Vec<f64> = chain.nu.iter().zip(&chain.pi).map(|(n, p)| n / p).collect();
    let c = ratios.iter().copied().fold(0.0, f64::max);
    let weighted: f64 = ratios
        .iter()
        .zip(&chain.pi)
        .map(|(r, p)| p * (r - 1.0).powi(2))
        .sum();
    let plain: f64 = ratios.iter().map(|r| (r - 1.0).powi(2)).sum();
    Ok(InitialStats {
        c,
        chi_norm: weighted.sqrt(),
        chi_norm_unweighted: plain.sqrt(),
    })
}

fn sample_from(row: impl Iterator<Item = f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in row.enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// Trajectory of length `n` on RNG stream `stream` of `seed`.
pub fn sample_trajectory_stream(
    chain: &ChainModel,
    n: usize,
    seed: u64,
    stream: u64,
) -> Vec<usize> {
    let mut rng = stream_rng(seed, stream);
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let mut x = sample_from(chain.nu.iter().copied(), rng.random::<f64>());
    out.push(x);
    for _ in 1..n {
        x = sample_from(chain.q.row(x).iter().copied(), rng.random::<f64>());
        out.push(x);
    }
    out
}

/// `x_1 ~ ν`, `x_{t+1} ~ Q(x_t, ·)`; deterministic given `seed`.
pub fn sample_trajectory(chain: &ChainModel, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::arg("trajectory length must be >= 1"));
    }
    Ok(sample_trajectory_stream(chain, n, seed, 0))
}

/// `2M/(n(1−λ)) + 64M²/(n²(1−λ)²) · λ^{n0} · chi`.
pub fn mse_bound_from(lambda: f64, chi_norm: f64, n: usize, n0: usize, m_f: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::arg("n must be >= 1"));
    }
    if !m_f.is_finite() || m_f < 0.0 {
        return Err(Error::arg(format!(
            "M_f must be finite and >= 0, got {m_f}"
        )));
    }
    if lambda >= 1.0 {
        return Err(Error::InfiniteBound(format!(
            "spectral quantity lambda = {lambda} is not below 1"
        )));
    }
    let nf = n as f64;
    let gap = 1.0 - lambda;
    let decay = if n0 == 0 {
        1.0
    } else {
        lambda.powi(n0.min(i32::MAX as usize) as i32)
    };
    Ok(2.0 * m_f / (nf * gap) + 64.0 * m_f * m_f / (nf * nf * gap * gap) * decay * chi_norm)
}

/// Mean-squared-error bound for ergodic averages of `f` with `|f| ≤ m_f`.
pub fn mse_bound(chain: &ChainModel, n: usize, n0: usize, m_f: f64) -> Result<f64> {
    let gap = spectral_gap(chain)?;
    let stats = initial_distribution_stats(chain)?;
    mse_bound_from(gap.lambda, stats.chi_norm, n, n0, m_f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub tau_grid: Vec<f64>,
    pub t_max: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            tau_grid: default_tau_grid(),
            t_max: DEFAULT_T_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainAnalysis {
    pub states: usize,
    pub pi: Vec<f64>,
    pub reversible: bool,
    pub lambda: f64,
    pub gamma_star: f64,
    pub unit_eigenvalue_multiplicity: usize,
    pub t_mix: usize,
    pub tau_min: f64,
    pub tau_min_epsilon: f64,
    pub c: f64,
    pub chi_norm: f64,
    pub chi_norm_unweighted: f64,
    pub pi_star: f64,
}

impl ChainAnalysis {
    /// `((1/γ* − 1) log 2, log(4/π*)/γ*)`.
    pub fn mixing_sandwich(&self) -> (f64, f64) {
        let ln2 = std::f64::consts::LN_2;
        (
            (1.0 / self.gamma_star - 1.0) * ln2,
            (4.0 / self.pi_star).ln() / self.gamma_star,
        )
    }

    pub fn mse_bound(&self, n: usize, n0: usize, m_f: f64) -> Result<f64> {
        mse_bound_from(self.lambda, self.chi_norm, n, n0, m_f)
    }
}

pub fn analyze(chain: &ChainModel, options: &AnalysisOptions) -> Result<ChainAnalysis> {
    let gap = spectral_gap(chain)?;
    let t_mix = mixing_time(chain, 0.25, options.t_max)?;
    let tau = tau_min(chain, &options.tau_grid, options.t_max)?;
    let stats = initial_distribution_stats(chain)?;
    Ok(ChainAnalysis {
        states: chain.states(),
        pi: chain.pi.clone(),
        reversible: chain.reversible,
        lambda: gap.lambda,
        gamma_star: gap.gamma_star,
        unit_eigenvalue_multiplicity: gap.unit_eigenvalue_multiplicity,
        t_mix,
        tau_min: tau.value,
        tau_min_epsilon: tau.epsilon,
        c: stats.c,
        chi_norm: stats.chi_norm,
        chi_norm_unweighted: stats.chi_norm_unweighted,
        pi_star: chain.pi_star(),
    })
}

/// Random reversible chain with strictly positive kernel: symmetric
/// conductances normalised by row.
pub fn random_reversible_chain(states: usize, rng: &mut impl Rng) -> Result<ChainModel> {
    let mut w = DMatrix::zeros(states, states);
    for x in 0..states {
        for y in x..states {
            let v = rng.random_range(0.05..1.0);
            w[(x, y)] = v;
            w[(y, x)] = v;
        }
    }
    let totals: Vec<f64> = w.row_iter().map(|r| r.sum()).collect();
    let grand: f64 = totals.iter().sum();
    let q = DMatrix::from_fn(states, states, |x, y| w[(x, y)] / totals[x]);
    let pi: Vec<f64> = totals.iter().map(|t| t / grand).collect();
    ChainModel::with_stationary(q, pi.clone(), pi)
}
