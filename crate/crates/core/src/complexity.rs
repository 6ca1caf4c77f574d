//! Rademacher complexity: the closed-form network bound, exact and Monte
//! Carlo estimators over finite hypothesis tables, and exhaustive checkers
//! for the vector-valued contraction inequalities.
//!
//! A [`FiniteHypothesisTable`] stores `h(x_i)_j` for every function `h`,
//! sample `i` and output coordinate `j`. Expectations over the sign vector
//! are taken either exactly, by enumerating all `2^n` sign patterns, or by
//! sampling.

use std::collections::HashSet;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{norm_1_inf, sigmoid, Activation, NetworkSpec, ScalarFn};
use crate::parallel::{stream_rng, Workers};

/// Largest `n` for which exact enumeration over `2^n` sign vectors is used.
pub const ENUMERATION_CUTOFF: usize = 22;

/// Number of sign draws handled by one Monte Carlo block.
const MC_BLOCK: u64 = 1024;

/// Low sign bits enumerated inside one exact-enumeration block.
const EXACT_BLOCK_BITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteHypothesisTable {
    functions: usize,
    samples: usize,
    coords: usize,
    // function-major, then sample, then coordinate
    values: Vec<f64>,
    includes_zero: bool,
}

impl FiniteHypothesisTable {
    pub fn new(functions: usize, samples: usize, coords: usize, values: Vec<f64>) -> Result<Self> {
        if functions == 0 || samples == 0 || coords == 0 {
            return Err(Error::dim(
                "hypothesis table needs at least one function, sample and coordinate",
            ));
        }
        if values.len() != functions * samples * coords {
            return Err(Error::dim(format!(
                "expected {functions}x{samples}x{coords} = {} values, got {}",
                functions * samples * coords,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("hypothesis table has non-finite entries"));
        }
        let row = samples * coords;
        let includes_zero = values.chunks(row).any(|r| r.iter().all(|&v| v == 0.0));
        Ok(FiniteHypothesisTable {
            functions,
            samples,
            coords,
            values,
            includes_zero,
        })
    }

    /// Builds a table from `rows[h][i][j]`.
    pub fn from_rows(rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let functions = rows.len();
        let samples = rows.first().map_or(0, Vec::len);
        let coords = rows.first().and_then(|r| r.first()).map_or(0, Vec::len);
        let mut values = Vec::with_capacity(functions * samples * coords);
        for (h, row) in rows.iter().enumerate() {
            if row.len() != samples || row.iter().any(|v| v.len() != coords) {
                return Err(Error::dim(format!("function {h} has a ragged shape")));
            }
            values.extend(row.iter().flatten().copied());
        }
        Self::new(functions, samples, coords, values)
    }

    /// Scalar-valued table from `rows[h][i]`.
    pub fn from_scalar_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let lifted: Vec<Vec<Vec<f64>>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| vec![v]).collect())
            .collect();
        Self::from_rows(&lifted)
    }

    /// Evaluates every network on every sample.
    pub fn from_networks(nets: &[NetworkSpec], xs: &[Vec<f64>]) -> Result<Self> {
        let coords = nets
            .first()
            .ok_or_else(|| Error::arg("empty network class"))?
            .output_dim();
        let mut values = Vec::with_capacity(nets.len() * xs.len() * coords);
        for net in nets {
            if net.output_dim() != coords {
                return Err(Error::dim(
                    "networks in one class must share an output dimension",
                ));
            }
            for x in xs {
                values.extend(net.forward(x)?);
            }
        }
        Self::new(nets.len(), xs.len(), coords, values)
    }

    pub fn functions(&self) -> usize {
        self.functions
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn coords(&self) -> usize {
        self.coords
    }

    pub fn includes_zero(&self) -> bool {
        self.includes_zero
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, h: usize, i: usize, j: usize) -> f64 {
        self.values[(h * self.samples + i) * self.coords + j]
    }

    /// All `samples × coords` values of function `h`.
    pub fn row(&self, h: usize) -> &[f64] {
        let len = self.samples * self.coords;
        &self.values[h * len..(h + 1) * len]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.samples * self.coords)
    }

    /// Same table with the zero function appended if it is not present.
    pub fn with_zero_row(&self) -> Self {
        if self.includes_zero {
            return self.clone();
        }
        let mut values = self.values.clone();
        values.extend(std::iter::repeat_n(0.0, self.samples * self.coords));
        FiniteHypothesisTable {
            functions: self.functions + 1,
            values,
            includes_zero: true,
            ..*self
        }
    }

    /// Applies `psi` to every entry.
    pub fn map(&self, psi: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.functions,
            self.samples,
            self.coords,
            self.values.iter().map(|&v| psi(v)).collect(),
        )
    }

    /// Rows `H ∪ (−H) ∪ {0}` with exact duplicates removed.
    pub fn make_fplus(&self) -> Self {
        let len = self.samples * self.coords;
        let mut seen: HashSet<Vec<u64>> = HashSet::new();
        let mut values = Vec::with_capacity((2 * self.functions + 1) * len);
        let mut count = 0;
        let candidates = self
            .rows()
            .map(|r| r.to_vec())
            .chain(self.rows().map(|r| r.iter().map(|v| -v).collect()))
            .chain(std::iter::once(vec![0.0; len]));
        for row in candidates {
            // +0.0 and -0.0 are the same function value
            let key: Vec<u64> = row.iter().map(|&v| (v + 0.0).to_bits()).collect();
            if seen.insert(key) {
                values.extend(row);
                count += 1;
            }
        }
        FiniteHypothesisTable {
            functions: count,
            samples: self.samples,
            coords: self.coords,
            values,
            includes_zero: true,
        }
    }
}

/// Free-function form of [`FiniteHypothesisTable::make_fplus`].
pub fn make_fplus(table: &FiniteHypothesisTable) -> FiniteHypothesisTable {
    table.make_fplus()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RademacherMode {
    /// `E sup_h (1/n) Σ ε_i h(x_i)`; scalar tables only.
    SignedSup,
    /// `E sup_h (1/n) ‖Σ ε_i h(x_i)‖_∞`.
    AbsSupInfNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    ExactEnumeration,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub value: f64,
    pub method: EstimateMethod,
    pub num_sign_draws: u64,
    pub std_error: f64,
}

fn check_mode(table: &FiniteHypothesisTable, mode: RademacherMode) -> Result<()> {
    if mode == RademacherMode::SignedSup && table.coords != 1 {
        return Err(Error::dim(format!(
            "signed_sup needs a scalar table, got {} coordinates",
            table.coords
        )));
    }
    Ok(())
}

/// The supremum statistic for one sign vector, before dividing by `n`.
fn sup_statistic(
    table: &FiniteHypothesisTable,
    mode: RademacherMode,
    signs: &[f64],
    acc: &mut [f64],
) -> f64 {
    let m = table.coords;
    let mut best = f64::NEG_INFINITY;
    for row in table.rows() {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (eps, sample) in signs.iter().zip(row.chunks(m)) {
            for (a, v) in acc.iter_mut().zip(sample) {
                *a += eps * v;
            }
        }
        let stat = match mode {
            RademacherMode::SignedSup => acc[0],
            RademacherMode::AbsSupInfNorm => acc.iter().fold(0.0, |b, a| f64::max(b, a.abs())),
        };
        best = best.max(stat);
    }
    best
}

fn check_enumerable(n: usize) -> Result<()> {
    if n > ENUMERATION_CUTOFF {
        return Err(Error::EnumerationBudget {
            n,
            cutoff: ENUMERATION_CUTOFF,
        });
    }
    Ok(())
}

/// Average of `stat(signs)` over all `2^n` sign vectors.
///
/// `init` builds the per-block scratch state handed to `stat`.
pub(crate) fn sign_average<S, I, F>(n: usize, workers: Workers, init: I, stat: F) -> Result<f64>
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&[f64], &mut S) -> f64 + Sync + Send,
{
    check_enumerable(n)?;
    let low = n.min(EXACT_BLOCK_BITS);
    let high = n - low;
    let block_sums = workers.map_blocks(1usize << high, |block| {
        let mut signs = vec![1.0; n];
        let mut scratch = init();
        let mut sum = 0.0;
        for s in 0..(1usize << low) {
            let pattern = (block << low) | s;
            for (i, eps) in signs.iter_mut().enumerate() {
                *eps = if pattern >> i & 1 == 1 { -1.0 } else { 1.0 };
            }
            sum += stat(&signs, &mut scratch);
        }
        sum
    });
    Ok(block_sums.iter().sum::<f64>() / (1u64 << n) as f64)
}

/// Exact Rademacher average by enumerating all `2^n` sign vectors.
pub fn exact_rademacher(
    table: &FiniteHypothesisTable,
    mode: RademacherMode,
    workers: Workers,
) -> Result<RademacherEstimate> {
    check_mode(table, mode)?;
    let n = table.samples;
    let mean = sign_average(
        n,
        workers,
        || vec![0.0; table.coords],
        |signs, acc| sup_statistic(table, mode, signs, acc),
    )?;
    Ok(RademacherEstimate {
        value: mean / n as f64,
        method: EstimateMethod::ExactEnumeration,
        num_sign_draws: 1u64 << n,
        std_error: 0.0,
    })
}

/// Unbiased Monte Carlo estimate from `draws` uniform sign vectors.
///
/// Draws are grouped into fixed blocks with one RNG stream each, so the
/// result depends only on `(table, mode, draws, seed)`.
pub fn monte_carlo_rademacher(
    table: &FiniteHypothesisTable,
    mode: RademacherMode,
    draws: u64,
    seed: u64,
    workers: Workers,
) -> Result<RademacherEstimate> {
    check_mode(table, mode)?;
    if draws == 0 {
        return Err(Error::arg("monte carlo needs at least one draw"));
    }
    let n = table.samples;
    let blocks = draws.div_ceil(MC_BLOCK);
    let partials = workers.map_blocks(blocks as usize, |b| {
        let mut rng = stream_rng(seed, b as u64);
        let count = MC_BLOCK.min(draws - b as u64 * MC_BLOCK);
        let mut signs = vec![0.0; n];
        let mut acc = vec![0.0; table.coords];
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..count {
            for eps in signs.iter_mut() {
                *eps = if rng.random::<bool>() { 1.0 } else { -1.0 };
            }
            let v = sup_statistic(table, mode, &signs, &mut acc) / n as f64;
            sum += v;
            sumsq += v * v;
        }
        (sum, sumsq)
    });
    let (sum, sumsq) = partials
        .iter()
        .fold((0.0, 0.0), |(s, q), (a, b)| (s + a, q + b));
    let count = draws as f64;
    let mean = sum / count;
    let var = if draws > 1 {
        ((sumsq - sum * sum / count) / (count - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(RademacherEstimate {
        value: mean,
        method: EstimateMethod::MonteCarlo,
        num_sign_draws: draws,
        std_error: (var / count).sqrt(),
    })
}

/// Exact when `n <= cutoff`, Monte Carlo otherwise.
pub fn estimate_rademacher(
    table: &FiniteHypothesisTable,
    mode: RademacherMode,
    cutoff: usize,
    draws: u64,
    seed: u64,
    workers: Workers,
) -> Result<RademacherEstimate> {
    let cutoff = cutoff.min(ENUMERATION_CUTOFF);
    if table.samples <= cutoff {
        exact_rademacher(table, mode, workers)
    } else {
        log::info!(
            "n = {} exceeds the enumeration cutoff {cutoff}; using {draws} Monte Carlo draws",
            table.samples
        );
        monte_carlo_rademacher(table, mode, draws, seed, workers)
    }
}

/// Leading and offset parts of the closed-form network complexity bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremBound {
    /// `2^L √((d+1)/n) Π α_l`
    pub leading_term: f64,
    /// `(2/√n) Σ_l 2^l |σ_{L−l}(0)| Π_{j=L−l+1}^{L+1} α_j`
    pub offset_term: f64,
    pub value: f64,
    pub sigma0_at_zero: f64,
}

/// Closed-form bound from its ingredients.
///
/// `alphas = [α_1, …, α_L]`; `values_at_zero = [σ_0(0), σ_1(0), …, σ_L(0)]`.
pub fn bound_from_parts(
    input_dim: usize,
    alphas: &[f64],
    values_at_zero: &[f64],
    n: usize,
) -> Result<TheoremBound> {
    if n == 0 {
        return Err(Error::arg("sample count n must be >= 1"));
    }
    let depth = alphas.len();
    if depth == 0 || values_at_zero.len() != depth + 1 {
        return Err(Error::dim(format!(
            "need L >= 1 alphas and L + 1 activation values at zero, got {} and {}",
            depth,
            values_at_zero.len()
        )));
    }
    let nf = n as f64;
    // alpha_at(j) for 1 <= j <= L + 1
    let alpha_at = |j: usize| if j == depth + 1 { 1.0 } else { alphas[j - 1] };
    let leading = 2f64.powi(depth as i32)
        * ((input_dim as f64 + 1.0) / nf).sqrt()
        * alphas.iter().product::<f64>();
    let mut sum = 0.0;
    for l in 0..=depth {
        let prod: f64 = (depth - l + 1..=depth + 1).map(alpha_at).product();
        sum += 2f64.powi(l as i32) * values_at_zero[depth - l].abs() * prod;
    }
    let offset = 2.0 / nf.sqrt() * sum;
    Ok(TheoremBound {
        leading_term: leading,
        offset_term: offset,
        value: leading + offset,
        sigma0_at_zero: values_at_zero[0],
    })
}

pub fn bound_theorem_terms(
    net: &NetworkSpec,
    n: usize,
    sigma0_at_zero: f64,
) -> Result<TheoremBound> {
    bound_from_parts(
        net.input_dim(),
        &net.alphas(),
        &net.values_at_zero(sigma0_at_zero),
        n,
    )
}

/// Upper bound on `R_n(F)` (and on `R_n(F_+)`) for the class of networks
/// sharing `net`'s architecture with per-layer `α_i` no larger than `net`'s.
pub fn bound_theorem(net: &NetworkSpec, n: usize, sigma0_at_zero: f64) -> Result<f64> {
    Ok(bound_theorem_terms(net, n, sigma0_at_zero)?.value)
}

/// A scalar function with a declared Lipschitz constant, applied
/// coordinatewise in the contraction checks.
#[derive(Clone)]
pub struct LipschitzFn {
    pub name: String,
    pub mu: f64,
    pub value_at_zero: f64,
    function: ScalarFn,
}

impl std::fmt::Debug for LipschitzFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LipschitzFn")
            .field("name", &self.name)
            .field("mu", &self.mu)
            .field("value_at_zero", &self.value_at_zero)
            .finish()
    }
}

impl LipschitzFn {
    pub fn new(
        name: impl Into<String>,
        mu: f64,
        value_at_zero: f64,
        function: ScalarFn,
    ) -> Result<Self> {
        if !mu.is_finite() || mu <= 0.0 {
            return Err(Error::arg(format!(
                "Lipschitz constant must be positive, got {mu}"
            )));
        }
        Ok(LipschitzFn {
            name: name.into(),
            mu,
            value_at_zero,
            function,
        })
    }

    pub fn identity() -> Self {
        Self::new("identity", 1.0, 0.0, Arc::new(|x| x)).expect("valid")
    }

    pub fn relu() -> Self {
        Self::new("relu", 1.0, 0.0, Arc::new(|x: f64| x.max(0.0))).expect("valid")
    }

    pub fn sigmoid() -> Self {
        Self::new("sigmoid", 0.25, 0.5, Arc::new(sigmoid)).expect("valid")
    }

    /// `x ↦ offset + left·(x−b)` for `x < b`, `offset + right·(x−b)` otherwise.
    pub fn two_piece_linear(left: f64, right: f64, breakpoint: f64, offset: f64) -> Result<Self> {
        let f = move |x: f64| {
            let t = x - breakpoint;
            offset + if t < 0.0 { left * t } else { right * t }
        };
        let mu = left.abs().max(right.abs());
        let at_zero = f(0.0);
        Self::new(
            format!("two_piece({left},{right},{breakpoint},{offset})"),
            mu,
            at_zero,
            Arc::new(f),
        )
    }

    /// Wraps an evaluable activation; `mu` is its declared `beta`.
    pub fn from_activation(act: &Activation) -> Result<Self> {
        if !act.is_evaluable() {
            return Err(Error::arg("activation has no function to evaluate"));
        }
        let a = act.clone();
        Self::new(
            act.kind().to_string(),
            act.beta(),
            act.value_at_zero(),
            Arc::new(move |x| a.try_eval(x).expect("evaluable")),
        )
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.function)(x)
    }
}

/// Pairs sampled by [`lipschitz_spot_check`].
pub const SPOT_CHECK_PAIRS: usize = 10_000;

/// Checks the declared `mu` and `value_at_zero` on random pairs drawn from
/// `[-scale, scale]`. Relative tolerance `1e-9`.
pub fn lipschitz_spot_check(psi: &LipschitzFn, scale: f64, seed: u64) -> Result<()> {
    let at_zero = psi.eval(0.0);
    if (at_zero - psi.value_at_zero).abs() > 1e-9 * (1.0 + at_zero.abs()) {
        return Err(Error::Hypothesis(format!(
            "{} declares psi(0) = {} but evaluates to {at_zero}",
            psi.name, psi.value_at_zero
        )));
    }
    let mut rng = stream_rng(seed, 0);
    let scale = scale.max(1.0);
    for _ in 0..SPOT_CHECK_PAIRS {
        let a = rng.random_range(-scale..=scale);
        let b = rng.random_range(-scale..=scale);
        let lhs = (psi.eval(a) - psi.eval(b)).abs();
        let rhs = psi.mu * (a - b).abs();
        if lhs > rhs * (1.0 + 1e-9) + 1e-300 {
            return Err(Error::Hypothesis(format!(
                "{} is not {}-Lipschitz: |psi({a}) - psi({b})| = {lhs} > {rhs}",
                psi.name, psi.mu
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    pub instance_seed: Option<u64>,
}

impl ContractionReport {
    fn new(lhs: f64, rhs: f64) -> Self {
        ContractionReport {
            lhs,
            rhs,
            slack: rhs - lhs,
            holds: lhs <= rhs + 1e-12 * (1.0 + rhs.abs()),
            instance_seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.instance_seed = Some(seed);
        self
    }
}

fn max_abs(table: &FiniteHypothesisTable) -> f64 {
    table.values.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
}

/// Exhaustively evaluates both sides of the vector-valued contraction
/// inequality
/// `(1/n) E sup_h ‖Σ ε_i ψ(h(x_i))‖_∞ ≤ (2μ/n) E sup_{h ∈ H∪{0}} ‖Σ ε_i h(x_i)‖_∞ + 2|ψ(0)|/√n`.
pub fn verify_contraction_highdim(
    table: &FiniteHypothesisTable,
    psi: &LipschitzFn,
    workers: Workers,
) -> Result<ContractionReport> {
    if !table.includes_zero() {
        return Err(Error::Hypothesis(
            "hypothesis table must contain the zero function".into(),
        ));
    }
    check_enumerable(table.samples)?;
    lipschitz_spot_check(psi, 2.0 * max_abs(table), 0x5eed)?;
    let mapped = table.map(|v| psi.eval(v))?;
    let lhs = exact_rademacher(&mapped, RademacherMode::AbsSupInfNorm, workers)?.value;
    let inner = exact_rademacher(table, RademacherMode::AbsSupInfNorm, workers)?.value;
    let n = table.samples as f64;
    let rhs = 2.0 * psi.mu * inner + 2.0 * psi.value_at_zero.abs() / n.sqrt();
    Ok(ContractionReport::new(lhs, rhs))
}

/// Exhaustively evaluates both sides of the layer-wise contraction
/// inequality
/// `E sup_{W,f} ‖(1/n) Wᵀ Σ ε_i σ(f(x_i))‖_∞ ≤ (2νβ/n) E sup_f ‖Σ ε_i f(x_i)‖_∞ + 2ν|σ(0)|/√n`
/// where every `W` has `‖W‖_{1,∞} ≤ ν` and `table` holds the class `G`
/// (which must contain the zero function).
pub fn verify_contraction_dnn(
    weight_class: &[DMatrix<f64>],
    nu: f64,
    table: &FiniteHypothesisTable,
    sigma: &Activation,
    workers: Workers,
) -> Result<ContractionReport> {
    if weight_class.is_empty() {
        return Err(Error::arg("weight class is empty"));
    }
    if !table.includes_zero() {
        return Err(Error::Hypothesis(
            "the class G must contain the zero function".into(),
        ));
    }
    let q = table.coords;
    for (k, w) in weight_class.iter().enumerate() {
        if w.nrows() != q {
            return Err(Error::dim(format!(
                "matrix {k} has {} rows but G maps into R^{q}",
                w.nrows()
            )));
        }
        let norm = norm_1_inf(w)?;
        if norm > nu * (1.0 + 1e-12) {
            return Err(Error::Hypothesis(format!(
                "matrix {k} has column-L1 norm {norm} above the cap {nu}"
            )));
        }
    }
    if !sigma.is_evaluable() {
        return Err(Error::arg("activation has no function to evaluate"));
    }
    check_enumerable(table.samples)?;
    let mapped = table.map(|v| sigma.try_eval(v).unwrap_or(f64::NAN))?;
    let n = table.samples as f64;
    let lhs_sum = sign_average(
        table.samples,
        workers,
        || vec![0.0; q],
        |signs, acc| {
            let mut best: f64 = 0.0;
            for row in mapped.rows() {
                acc.iter_mut().for_each(|a| *a = 0.0);
                for (eps, sample) in signs.iter().zip(row.chunks(q)) {
                    for (a, v) in acc.iter_mut().zip(sample) {
                        *a += eps * v;
                    }
                }
                for w in weight_class {
                    for col in w.column_iter() {
                        let dot: f64 = col.iter().zip(acc.iter()).map(|(c, a)| c * a).sum();
                        best = best.max(dot.abs());
                    }
                }
            }
            best
        },
    )?;
    let lhs = lhs_sum / n;
    let inner = exact_rademacher(table, RademacherMode::AbsSupInfNorm, workers)?.value;
    let rhs = 2.0 * nu * sigma.beta() * inner + 2.0 * nu * sigma.value_at_zero().abs() / n.sqrt();
    Ok(ContractionReport::new(lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Double loop over sign patterns, independent of the block enumerator.
    fn oracle(rows: &[Vec<Vec<f64>>], signed: bool) -> f64 {
        let n = rows[0].len();
        let m = rows[0][0].len();
        let mut total = 0.0;
        for pattern in 0u32..(1 << n) {
            let eps: Vec<f64> = (0..n)
                .map(|i| if pattern & (1 << i) != 0 { 1.0 } else { -1.0 })
                .collect();
            let mut best = f64::NEG_INFINITY;
            for h in rows {
                let sums: Vec<f64> = (0..m)
                    .map(|j| (0..n).map(|i| eps[i] * h[i][j]).sum::<f64>())
                    .collect();
                let stat = if signed {
                    sums[0]
                } else {
                    sums.iter().map(|s| s.abs()).fold(0.0, f64::max)
                };
                best = best.max(stat);
            }
            total += best / n as f64;
        }
        total / (1u64 << n) as f64
    }

    fn random_rows(rng: &mut ChaCha8Rng, h: usize, n: usize, m: usize) -> Vec<Vec<Vec<f64>>> {
        (0..h)
            .map(|_| {
                (0..n)
                    .map(|_| (0..m).map(|_| rng.random_range(-2.0..2.0)).collect())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn singleton_class_has_zero_signed_complexity() {
        let t = FiniteHypothesisTable::from_scalar_rows(&[vec![0.3, -1.2, 2.0, 0.1]]).unwrap();
        let est = exact_rademacher(&t, RademacherMode::SignedSup, Workers::single()).unwrap();
        assert!(est.value.abs() < 1e-15);
        assert_eq!(est.num_sign_draws, 16);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn symmetric_pair_picks_the_matching_sign() {
        let t = FiniteHypothesisTable::from_scalar_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let est = exact_rademacher(&t, RademacherMode::SignedSup, Workers::single()).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn exact_matches_double_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scalar = random_rows(&mut rng, 8, 10, 1);
        let t = FiniteHypothesisTable::from_rows(&scalar).unwrap();
        let est = exact_rademacher(&t, RademacherMode::SignedSup, Workers::new(4)).unwrap();
        assert!((est.value - oracle(&scalar, true)).abs() < 1e-12);

        let vector = random_rows(&mut rng, 5, 9, 3);
        let t = FiniteHypothesisTable::from_rows(&vector).unwrap();
        let est = exact_rademacher(&t, RademacherMode::AbsSupInfNorm, Workers::new(3)).unwrap();
        assert!((est.value - oracle(&vector, false)).abs() < 1e-12);
    }

    #[test]
    fn exact_uses_several_blocks_beyond_block_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows = random_rows(&mut rng, 3, 14, 1);
        let t = FiniteHypothesisTable::from_rows(&rows).unwrap();
        let a = exact_rademacher(&t, RademacherMode::SignedSup, Workers::single()).unwrap();
        let b = exact_rademacher(&t, RademacherMode::SignedSup, Workers::new(8)).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert!((a.value - oracle(&rows, true)).abs() < 1e-12);
    }

    #[test]
    fn mode_and_budget_errors() {
        let t = FiniteHypothesisTable::from_rows(&[vec![vec![1.0, 2.0]]]).unwrap();
        assert!(matches!(
            exact_rademacher(&t, RademacherMode::SignedSup, Workers::single()),
            Err(Error::Dimension(_))
        ));
        let big = FiniteHypothesisTable::from_scalar_rows(&[vec![0.5; 23]]).unwrap();
        assert!(matches!(
            exact_rademacher(&big, RademacherMode::SignedSup, Workers::single()),
            Err(Error::EnumerationBudget { n: 23, .. })
        ));
        let small = FiniteHypothesisTable::from_scalar_rows(&[vec![0.5; 3]]).unwrap();
        assert!(
            monte_carlo_rademacher(&small, RademacherMode::SignedSup, 0, 1, Workers::single())
                .is_err()
        );
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows = random_rows(&mut rng, 6, 10, 1);
        let t = FiniteHypothesisTable::from_rows(&rows).unwrap();
        let exact = exact_rademacher(&t, RademacherMode::SignedSup, Workers::single()).unwrap();
        let mc = monte_carlo_rademacher(&t, RademacherMode::SignedSup, 100_000, 5, Workers::new(4))
            .unwrap();
        assert!((mc.value - exact.value).abs() <= 4.0 * mc.std_error);

        let single = FiniteHypothesisTable::from_rows(&rows[..1]).unwrap();
        let mc = monte_carlo_rademacher(
            &single,
            RademacherMode::SignedSup,
            20_000,
            5,
            Workers::new(2),
        )
        .unwrap();
        assert!(mc.value.abs() <= 4.0 * mc.std_error);
    }

    #[test]
    fn monte_carlo_is_worker_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows = random_rows(&mut rng, 4, 30, 2);
        let t = FiniteHypothesisTable::from_rows(&rows).unwrap();
        let a = monte_carlo_rademacher(
            &t,
            RademacherMode::AbsSupInfNorm,
            10_000,
            77,
            Workers::single(),
        )
        .unwrap();
        let b = monte_carlo_rademacher(
            &t,
            RademacherMode::AbsSupInfNorm,
            10_000,
            77,
            Workers::new(8),
        )
        .unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn estimate_routes_by_cutoff() {
        let t = FiniteHypothesisTable::from_scalar_rows(&[vec![0.5; 8], vec![-0.5; 8]]).unwrap();
        let e = estimate_rademacher(&t, RademacherMode::SignedSup, 8, 100, 0, Workers::single())
            .unwrap();
        assert_eq!(e.method, EstimateMethod::ExactEnumeration);
        let e = estimate_rademacher(&t, RademacherMode::SignedSup, 7, 100, 0, Workers::single())
            .unwrap();
        assert_eq!(e.method, EstimateMethod::MonteCarlo);
    }

    #[test]
    fn fplus_construction() {
        let t = FiniteHypothesisTable::from_scalar_rows(&[
            vec![1.0, 2.0],
            vec![0.5, 0.0],
            vec![-1.0, 3.0],
        ])
        .unwrap();
        let plus = t.make_fplus();
        assert!(plus.functions() <= 7);
        assert_eq!(plus.functions(), 7);
        assert!(plus.includes_zero());

        let sym = FiniteHypothesisTable::from_scalar_rows(&[
            vec![1.0, 2.0],
            vec![-1.0, -2.0],
            vec![0.0, 0.0],
        ])
        .unwrap();
        let plus = sym.make_fplus();
        assert_eq!(plus.functions(), 3);
        let as_set = |t: &FiniteHypothesisTable| {
            let mut rows: Vec<Vec<u64>> = t
                .rows()
                .map(|r| r.iter().map(|v| (v + 0.0).to_bits()).collect())
                .collect();
            rows.sort();
            rows
        };
        assert_eq!(as_set(&plus), as_set(&sym));
    }

    #[test]
    fn fplus_dominates_absolute_complexity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let rows = random_rows(&mut rng, 4, 8, 1);
            let t = FiniteHypothesisTable::from_rows(&rows).unwrap();
            let abs = exact_rademacher(
                &t.with_zero_row(),
                RademacherMode::AbsSupInfNorm,
                Workers::single(),
            )
            .unwrap()
            .value;
            let plus = exact_rademacher(
                &t.make_fplus(),
                RademacherMode::SignedSup,
                Workers::single(),
            )
            .unwrap()
            .value;
            assert!(abs <= plus + 1e-12);
        }
    }

    #[test]
    fn theorem_bound_examples() {
        let relu = NetworkSpec::new(
            vec![2, 1],
            vec![DMatrix::from_row_slice(3, 1, &[0.25, -0.25, 0.0])],
            vec![Activation::relu()],
        )
        .unwrap();
        let b = bound_theorem(&relu, 100, 0.0).unwrap();
        assert!((b - 0.17320508075688773).abs() < 1e-15);

        let sig = NetworkSpec::new(
            vec![2, 1],
            vec![DMatrix::from_row_slice(3, 1, &[1.0, 0.5, -0.5])],
            vec![Activation::sigmoid()],
        )
        .unwrap();
        let b = bound_theorem(&sig, 100, 0.0).unwrap();
        assert!((b - 0.273_205_080_756_887_7).abs() < 1e-15);

        let t1 = bound_theorem_terms(&sig, 100, 0.0).unwrap();
        let t4 = bound_theorem_terms(&sig, 400, 0.0).unwrap();
        assert!((t4.leading_term - 0.5 * t1.leading_term).abs() < 1e-15);
        assert!(bound_theorem(&sig, 0, 0.0).is_err());
    }

    #[test]
    fn sigma0_convention_enters_the_last_summand() {
        let net = NetworkSpec::new(
            vec![1, 1],
            vec![DMatrix::from_row_slice(2, 1, &[0.5, 0.5])],
            vec![Activation::relu()],
        )
        .unwrap();
        let a = bound_theorem(&net, 16, 0.0).unwrap();
        let b = bound_theorem(&net, 16, 1.0).unwrap();
        // l = L = 1: (2/4) * 2 * |1| * alpha_1 = 1.0 * 1.0
        assert!((b - a - 1.0).abs() < 1e-15);
    }

    #[test]
    fn depth_decay_for_small_alpha() {
        let mut prev = f64::INFINITY;
        for depth in 1..=10 {
            let b = bound_from_parts(3, &vec![0.45; depth], &vec![0.0; depth + 1], 50)
                .unwrap()
                .value;
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn contraction_identity_and_missing_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows = random_rows(&mut rng, 3, 6, 1);
        let t = FiniteHypothesisTable::from_rows(&rows).unwrap();
        assert!(matches!(
            verify_contraction_highdim(&t, &LipschitzFn::identity(), Workers::single()),
            Err(Error::Hypothesis(_))
        ));
        let r = verify_contraction_highdim(
            &t.make_fplus(),
            &LipschitzFn::identity(),
            Workers::single(),
        )
        .unwrap();
        assert!(r.holds);
        assert!((r.rhs - 2.0 * r.lhs).abs() < 1e-12);
    }

    #[test]
    fn contraction_sigmoid_offset_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows = random_rows(&mut rng, 4, 8, 2);
        let t = FiniteHypothesisTable::from_rows(&rows)
            .unwrap()
            .with_zero_row();
        let r = verify_contraction_highdim(&t, &LipschitzFn::sigmoid(), Workers::single()).unwrap();
        let inner = exact_rademacher(&t, RademacherMode::AbsSupInfNorm, Workers::single())
            .unwrap()
            .value;
        let expected = 0.5 * inner + 1.0 / 8f64.sqrt();
        assert!((r.rhs - expected).abs() < 1e-12);
        assert!(r.holds);
    }

    #[test]
    fn spot_check_rejects_wrong_constants() {
        let bad = LipschitzFn::new("steep", 0.5, 0.0, Arc::new(|x| 2.0 * x)).unwrap();
        assert!(matches!(
            lipschitz_spot_check(&bad, 1.0, 0),
            Err(Error::Hypothesis(_))
        ));
        let shifted = LipschitzFn::new("shift", 1.0, 0.0, Arc::new(|x| x + 1.0)).unwrap();
        assert!(lipschitz_spot_check(&shifted, 1.0, 0).is_err());
        let ok = LipschitzFn::two_piece_linear(-0.3, 1.2, 0.4, 0.1).unwrap();
        assert!(lipschitz_spot_check(&ok, 3.0, 0).is_ok());
    }

    #[test]
    fn dnn_contraction_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rows = random_rows(&mut rng, 3, 6, 2);
        let g = FiniteHypothesisTable::from_rows(&rows)
            .unwrap()
            .with_zero_row();
        let zero = DMatrix::zeros(2, 2);
        let r = verify_contraction_dnn(&[zero], 1.0, &g, &Activation::relu(), Workers::single())
            .unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.holds);

        // permutation with nu = 1 and identity activation reduces to the
        // vector-valued contraction with mu = 1
        let perm = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let dnn =
            verify_contraction_dnn(&[perm], 1.0, &g, &Activation::identity(), Workers::single())
                .unwrap();
        let hd =
            verify_contraction_highdim(&g, &LipschitzFn::identity(), Workers::single()).unwrap();
        assert!((dnn.lhs - hd.lhs).abs() < 1e-12);
        assert!((dnn.rhs - hd.rhs).abs() < 1e-12);

        let too_big = DMatrix::from_element(2, 2, 1.0);
        assert!(matches!(
            verify_contraction_dnn(&[too_big], 1.0, &g, &Activation::relu(), Workers::single()),
            Err(Error::Hypothesis(_))
        ));
        let no_zero = FiniteHypothesisTable::from_rows(&rows).unwrap();
        assert!(verify_contraction_dnn(
            &[DMatrix::zeros(2, 2)],
            1.0,
            &no_zero,
            &Activation::relu(),
            Workers::single()
        )
        .is_err());
    }
}
