//! Monte Carlo experiment harness: replicated simulations, scaled
//! statistics, comparison against the limit-law samplers, tail-index and
//! convergence-rate estimation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{self, LimitOptions};
use crate::kernel::{self, GOptions, KernelSpec};
use crate::levy::LevyModel;
use crate::limits::{
    Completion, GdmSampler, GKind, LimitLaw, RateSpec, Regime, RosenblattConfig,
    RosenblattSampler,
};
use crate::scalar::{task_rng, Scalar};
use crate::simulate::{
    acv_covariance_exact, acv_variance_exact, decompose, diag_raw_variance_exact,
    offdiag_variance_exact, Centering, ConvEngine, KernelTable, SimEngine, SimulationGrid,
};

// ---------------------------------------------------------------------------
// building blocks
// ---------------------------------------------------------------------------

/// Exact two-sample Kolmogorov–Smirnov distance (merge algorithm, ties
/// handled by evaluating after all equal values are consumed).
pub fn ks_two_sample<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Parameter("KS needs nonempty samples".into()));
    }
    let mut sa: Vec<T> = a.to_vec();
    let mut sb: Vec<T> = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("no NaN in KS input"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("no NaN in KS input"));
    let (na, nb) = (T::of_usize(sa.len()), T::of_usize(sb.len()));
    let mut i = 0usize;
    let mut j = 0usize;
    let mut sup = T::zero();
    while i < sa.len() || j < sb.len() {
        let x = match (sa.get(i), sb.get(j)) {
            (Some(&xa), Some(&xb)) => xa.min(xb),
            (Some(&xa), None) => xa,
            (None, Some(&xb)) => xb,
            (None, None) => break,
        };
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        let d = (T::of_usize(i) / na - T::of_usize(j) / nb).abs();
        if d > sup {
            sup = d;
        }
    }
    Ok(sup)
}

/// Hill estimator of the tail index on the top `k_top` order statistics of
/// the absolute values.
pub fn hill_tail_index<T: Scalar>(sample: &[T], k_top: usize) -> Result<T> {
    if k_top == 0 || k_top >= sample.len() {
        return Err(Error::Parameter(format!(
            "k_top must lie in [1, {}), got {k_top}",
            sample.len()
        )));
    }
    let mut mags: Vec<T> = sample.iter().map(|x| x.abs()).filter(|x| *x > T::zero()).collect();
    if mags.len() <= k_top {
        return Err(Error::Domain("not enough positive magnitudes for the Hill estimator".into()));
    }
    mags.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let xk = mags[k_top];
    if xk <= T::zero() {
        return Err(Error::Domain("degenerate sample: x_(k) = 0".into()));
    }
    let mut acc = T::zero();
    for v in &mags[..k_top] {
        acc += (*v / xk).ln();
    }
    if acc <= T::zero() {
        return Err(Error::Domain("degenerate sample for the Hill estimator".into()));
    }
    Ok(T::of_usize(k_top) / acc)
}

/// Interquartile range (linear-interpolation quantiles).
pub fn iqr<T: Scalar>(sorted: &[T]) -> T {
    quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25)
}

pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: f64) -> T {
    if sorted.is_empty() {
        return T::nan();
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = T::of(pos - lo as f64);
    sorted[lo] * (T::one() - w) + sorted[hi] * w
}

/// Convergence-rate fit: least-squares slope of `log IQR` against `log N`;
/// the decay exponent is `−slope`.
#[derive(Debug, Clone, Copy)]
pub struct RateFit<T> {
    pub exponent: T,
    pub std_error: T,
}

pub fn rate_regression<T: Scalar>(points: &[(usize, T)]) -> Result<RateFit<T>> {
    if points.len() < 3 {
        return Err(Error::Parameter("rate regression needs >= 3 horizon values".into()));
    }
    let max_n = points.iter().map(|p| p.0).max().unwrap();
    let min_n = points.iter().map(|p| p.0).min().unwrap();
    if (max_n as f64) < 4.0 * min_n as f64 {
        return Err(Error::Parameter("rate regression needs >= 2 octaves of N".into()));
    }
    let xs: Vec<T> = points.iter().map(|p| T::of_usize(p.0).ln()).collect();
    let ys: Result<Vec<T>> = points
        .iter()
        .map(|p| {
            if p.1 <= T::zero() {
                Err(Error::Numeric("degenerate spread in rate regression".into()))
            } else {
                Ok(p.1.ln())
            }
        })
        .collect();
    let ys = ys?;
    let n = T::of_usize(points.len());
    let xbar = xs.iter().copied().sum::<T>() / n;
    let ybar = ys.iter().copied().sum::<T>() / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (*x - xbar) * (*x - xbar);
        sxy += (*x - xbar) * (*y - ybar);
    }
    if sxx == T::zero() {
        return Err(Error::Numeric("degenerate design in rate regression".into()));
    }
    let slope = sxy / sxx;
    let mut ss_res = T::zero();
    for (x, y) in xs.iter().zip(&ys) {
        let r = *y - ybar - slope * (*x - xbar);
        ss_res += r * r;
    }
    let dof = (points.len() as f64 - 2.0).max(1.0);
    let se = (ss_res / T::of(dof) / sxx).sqrt();
    Ok(RateFit { exponent: -slope, std_error: se })
}

/// Pearson correlation matrix of per-lag scaled errors sharing replicates.
pub fn cross_lag_coupling<T: Scalar>(per_lag: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    if per_lag.is_empty() {
        return Err(Error::Parameter("no lags supplied".into()));
    }
    let r = per_lag[0].len();
    if per_lag.iter().any(|v| v.len() != r) || r < 2 {
        return Err(Error::Parameter("lags must share the same replicate count >= 2".into()));
    }
    let h = per_lag.len();
    let means: Vec<T> = per_lag
        .iter()
        .map(|v| v.iter().copied().sum::<T>() / T::of_usize(r))
        .collect();
    let mut cov = vec![vec![T::zero(); h]; h];
    for p in 0..h {
        for q in p..h {
            let mut acc = T::zero();
            for i in 0..r {
                acc += (per_lag[p][i] - means[p]) * (per_lag[q][i] - means[q]);
            }
            cov[p][q] = acc / T::of_usize(r);
            cov[q][p] = cov[p][q];
        }
    }
    let mut corr = vec![vec![T::zero(); h]; h];
    for p in 0..h {
        for q in 0..h {
            corr[p][q] = cov[p][q] / (cov[p][p] * cov[q][q]).sqrt();
        }
    }
    Ok(corr)
}

// ---------------------------------------------------------------------------
// experiment configuration and outputs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling<T> {
    NPow(T),
    NOverAn2,
    SqrtN,
    SqrtNOverLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    AcvError(usize),
    AcfError(usize),
    DHatError,
    DiagPart(usize),
    OffdiagPart(usize),
}

impl Statistic {
    pub fn lag(&self) -> usize {
        match self {
            Statistic::AcvError(h)
            | Statistic::AcfError(h)
            | Statistic::DiagPart(h)
            | Statistic::OffdiagPart(h) => *h,
            Statistic::DHatError => 1,
        }
    }

    fn needs_increments(&self) -> bool {
        matches!(self, Statistic::DiagPart(_) | Statistic::OffdiagPart(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterMode {
    /// Center at the exact mean of the discretized truncated estimator
    /// (removes the deterministic m-/K-offset from the scaled statistic).
    ExactMean,
    /// Center at the continuous-time γ(h) from quadrature.
    Gamma,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec<T: Scalar> {
    pub kernel: KernelSpec<T>,
    pub model: LevyModel<T>,
    pub m: u32,
    pub n: usize,
    /// Lags 0..=h_max are evaluated with common random numbers.
    pub h_max: usize,
    pub k_trunc: usize,
    pub replicates: usize,
    pub scaling: Scaling<T>,
    pub statistic: Statistic,
    pub center: CenterMode,
    pub seed: u64,
    pub boundary_override: bool,
    /// Reference sample sizes for the KS comparisons.
    pub ref_draws: usize,
    /// Hill order statistics (default: 5% of replicates).
    pub k_top: Option<usize>,
    pub gdm_panels: usize,
    pub rosenblatt_n_grid: usize,
    pub norming_budget_mult: u64,
    pub truncation_budget_rel: T,
}

impl<T: Scalar> ExperimentSpec<T> {
    pub fn grid(&self) -> Result<SimulationGrid<T>> {
        let mut g = SimulationGrid::new(self.m, self.n, self.h_max, self.k_trunc, self.seed)?;
        g.retain_increments = self.statistic.needs_increments();
        g.truncation_budget_rel = self.truncation_budget_rel;
        Ok(g)
    }

    /// Canonical content string used for hashing/provenance.
    pub fn provenance_string(&self) -> String {
        format!(
            "kernel_d={:?};m={};n={};h={};k={};r={};stat={:?};scaling={:?};center={:?};seed={}",
            self.kernel.d().as_f64(),
            self.m,
            self.n,
            self.h_max,
            self.k_trunc,
            self.replicates,
            self.statistic,
            self.scaling,
            self.center,
            self.seed
        )
    }
}

/// Sorted replicate sample with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution<T> {
    pub values: Vec<T>,
    pub replicates: usize,
    pub config_hash: String,
    pub seed: u64,
}

impl<T: Scalar> EmpiricalDistribution<T> {
    fn from_values(mut values: Vec<T>, config_hash: String, seed: u64) -> Self {
        values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN statistic"));
        let replicates = values.len();
        EmpiricalDistribution { values, replicates, config_hash, seed }
    }

    pub fn iqr(&self) -> T {
        iqr(&self.values)
    }
}

/// Reference draws for cross-law comparison, all expressed on the scale of
/// the experiment's statistic (alternative laws are mapped through the rate
/// ratio `scale_config(N)/scale_alt(N)`).
#[derive(Debug, Clone)]
pub struct ReferenceDraws<T> {
    pub rosenblatt_matched: Option<Vec<T>>,
    pub rosenblatt_true: Option<Vec<T>>,
    pub gaussian: Option<Vec<T>>,
    pub stable: Option<Vec<T>>,
}

impl<T> Default for ReferenceDraws<T> {
    fn default() -> Self {
        ReferenceDraws {
            rosenblatt_matched: None,
            rosenblatt_true: None,
            gaussian: None,
            stable: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult<T: Scalar> {
    pub law: LimitLaw<T>,
    /// Scaled per-lag distributions (index = lag for per-lag statistics;
    /// a single entry for d̂).
    pub per_lag: Vec<EmpiricalDistribution<T>>,
    /// The lag the headline statistic refers to.
    pub lag: usize,
    pub references: ReferenceDraws<T>,
    pub ks_to_rosenblatt: Option<T>,
    pub ks_to_rosenblatt_true: Option<T>,
    pub ks_to_gaussian: Option<T>,
    pub ks_to_stable: Option<T>,
    pub hill_index: Option<T>,
    pub hill_k_top: usize,
    pub cross_lag_corr: Option<Vec<Vec<T>>>,
    pub a_n: Option<T>,
    pub b_n: Option<T>,
    pub scale_factor: T,
    /// Per-lag centering targets actually used.
    pub targets: Vec<T>,
    /// Per-lag γ(h) from quadrature (for reporting).
    pub gamma_theoretical: Vec<T>,
    pub config_hash: String,
}

impl<T: Scalar> ExperimentResult<T> {
    /// The headline statistic's distribution.
    pub fn headline(&self) -> &EmpiricalDistribution<T> {
        match self.per_lag.len() {
            1 => &self.per_lag[0],
            _ => &self.per_lag[self.lag.min(self.per_lag.len() - 1)],
        }
    }
}

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

pub fn run_experiment<T: Scalar>(spec: &ExperimentSpec<T>) -> Result<ExperimentResult<T>> {
    let sigma2 = spec.model.variance();
    let law = estimate::theoretical_limits(
        &spec.kernel,
        &spec.model,
        spec.h_max,
        &LimitOptions::default(),
    )?;
    if law.regime == Regime::Boundary && !spec.boundary_override {
        return Err(Error::Validation(format!(
            "boundary regime: {}; pass the boundary override to explore it",
            law.boundary_reason.clone().unwrap_or_default()
        )));
    }
    let grid = spec.grid()?;
    grid.validate(&spec.kernel, sigma2)?;
    let engine = SimEngine::new(&spec.kernel, &grid, ConvEngine::Auto)?;
    let table = &engine.table;
    let config_hash = crate::config::hash_str(&spec.provenance_string());

    // norming sequences where needed
    let needs_norming = matches!(spec.scaling, Scaling::NOverAn2)
        || spec.statistic.needs_increments()
        || law.regime == Regime::Stable;
    let (a_n, b_n) = if needs_norming {
        let budget = spec.norming_budget_mult.max(100) * spec.n as u64;
        let a = spec.model.norming_a_mc(T::one(), spec.n as u64, budget, spec.seed ^ 0xA11)?;
        let b = spec.model.norming_b(a, budget, spec.seed ^ 0xB22)?.0;
        (Some(a), Some(b))
    } else {
        (None, None)
    };

    let scale = match spec.scaling {
        Scaling::NPow(e) => RateSpec::NPow(e).scale(spec.n, None)?,
        Scaling::SqrtN => RateSpec::SqrtN.scale(spec.n, None)?,
        Scaling::SqrtNOverLog => RateSpec::SqrtNOverLogN.scale(spec.n, None)?,
        Scaling::NOverAn2 => RateSpec::NOverAn2.scale(spec.n, a_n)?,
    };

    // per-lag targets
    let quad_tol = T::of(1e-8);
    let mut gamma_theoretical = Vec::with_capacity(spec.h_max + 1);
    for h in 0..=spec.h_max {
        gamma_theoretical.push(kernel::autocovariance(
            &spec.kernel,
            sigma2,
            T::of_usize(h),
            quad_tol,
        )?);
    }
    let exact_means: Vec<T> = (0..=spec.h_max)
        .map(|h| table.exact_acv_mean(sigma2, h))
        .collect();
    let acv_targets: Vec<T> = match spec.center {
        CenterMode::ExactMean => exact_means.clone(),
        CenterMode::Gamma => gamma_theoretical.clone(),
    };

    // replicate loop: per-lag raw statistics with common random numbers
    let n_lags = spec.h_max + 1;
    let stat_kind = spec.statistic;
    let rows: Result<Vec<Vec<T>>> = (0..spec.replicates as u64)
        .into_par_iter()
        .map(|rep| -> Result<Vec<T>> {
            let path = engine.run(&spec.model, spec.seed, rep);
            let acv = estimate::sample_acv(&path.values, spec.n, spec.h_max)?;
            let mut out = Vec::with_capacity(n_lags);
            match stat_kind {
                Statistic::AcvError(_) => {
                    for h in 0..n_lags {
                        out.push(scale * (acv.gamma_hat[h] - acv_targets[h]));
                    }
                }
                Statistic::AcfError(_) => {
                    let rho_hat = estimate::sample_acf(&acv)?;
                    for h in 0..n_lags {
                        let rho_target = acv_targets[h] / acv_targets[0];
                        out.push(scale * (rho_hat[h] - rho_target));
                    }
                }
                Statistic::DHatError => {
                    let rho_hat = estimate::sample_acf(&acv)?;
                    let d_hat = estimate::estimate_d(rho_hat[1])?.value;
                    let rho_target = acv_targets[1] / acv_targets[0];
                    let d_target = estimate::estimate_d(rho_target)?.value;
                    out.push(scale * (d_hat - d_target));
                }
                Statistic::DiagPart(_) | Statistic::OffdiagPart(_) => {
                    let b = b_n.expect("norming computed for decomposition statistics");
                    for h in 0..n_lags {
                        let dec = decompose(
                            &path,
                            table,
                            h,
                            Centering::TruncatedSecondMoment(b),
                        )?;
                        let v = match stat_kind {
                            Statistic::DiagPart(_) => dec.diag,
                            _ => dec.offdiag,
                        };
                        out.push(scale * v);
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let rows = rows?;
    let n_cols = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut per_lag_raw: Vec<Vec<T>> = vec![Vec::with_capacity(rows.len()); n_cols];
    for row in &rows {
        for (c, &v) in row.iter().enumerate() {
            per_lag_raw[c].push(v);
        }
    }

    let cross_lag_corr = if n_cols >= 2 {
        Some(cross_lag_coupling(&per_lag_raw)?)
    } else {
        None
    };

    let per_lag: Vec<EmpiricalDistribution<T>> = per_lag_raw
        .iter()
        .map(|v| EmpiricalDistribution::from_values(v.clone(), config_hash.clone(), spec.seed))
        .collect();

    let lag = spec.statistic.lag().min(spec.h_max);
    let headline_idx = if n_cols == 1 { 0 } else { lag };
    let headline = &per_lag[headline_idx];

    // references on the statistic's scale
    let references =
        build_references(spec, &law, table, scale, a_n, &exact_means, headline_idx)?;

    let ks_of = |r: &Option<Vec<T>>| -> Option<T> {
        r.as_ref().map(|d| ks_two_sample(&headline.values, d).unwrap())
    };
    let ks_to_rosenblatt = ks_of(&references.rosenblatt_matched);
    let ks_to_rosenblatt_true = ks_of(&references.rosenblatt_true);
    let ks_to_gaussian = ks_of(&references.gaussian);
    let ks_to_stable = ks_of(&references.stable);

    let k_top = spec.k_top.unwrap_or((spec.replicates / 20).max(20));
    let hill_index = hill_tail_index(&headline.values, k_top.min(headline.values.len() - 1)).ok();

    Ok(ExperimentResult {
        law,
        per_lag,
        lag: headline_idx,
        references,
        ks_to_rosenblatt,
        ks_to_rosenblatt_true,
        ks_to_gaussian,
        ks_to_stable,
        hill_index,
        hill_k_top: k_top,
        cross_lag_corr,
        a_n,
        b_n,
        scale_factor: scale,
        targets: acv_targets,
        gamma_theoretical,
        config_hash,
    })
}

/// Exact variance of the experiment's scaled statistic when the driver has
/// finite fourth moments (used to calibrate the matched Rosenblatt
/// reference).
fn exact_statistic_variance<T: Scalar>(
    spec: &ExperimentSpec<T>,
    table: &KernelTable<T>,
    scale: T,
    exact_means: &[T],
) -> Result<T> {
    let n = spec.n;
    let v = match spec.statistic {
        Statistic::AcvError(h) => acv_variance_exact(table, &spec.model, n, h)?,
        Statistic::OffdiagPart(h) => offdiag_variance_exact(table, &spec.model, n, h)?,
        Statistic::DiagPart(h) => diag_raw_variance_exact(table, &spec.model, n, h)?,
        Statistic::AcfError(h) => {
            // delta-method linear proxy: (γ̂_h − ρ_h γ̂_0)/γ_0
            let rho_h = exact_means[h] / exact_means[0];
            let v_hh = acv_variance_exact(table, &spec.model, n, h)?;
            let v_00 = acv_variance_exact(table, &spec.model, n, 0)?;
            let v_h0 = acv_covariance_exact(table, &spec.model, n, h, 0)?;
            (v_hh - T::of(2.0) * rho_h * v_h0 + rho_h * rho_h * v_00)
                / (exact_means[0] * exact_means[0])
        }
        Statistic::DHatError => {
            let rho_1 = exact_means[1] / exact_means[0];
            let v_11 = acv_variance_exact(table, &spec.model, n, 1)?;
            let v_00 = acv_variance_exact(table, &spec.model, n, 0)?;
            let v_10 = acv_covariance_exact(table, &spec.model, n, 1, 0)?;
            let v_rho = (v_11 - T::of(2.0) * rho_1 * v_10 + rho_1 * rho_1 * v_00)
                / (exact_means[0] * exact_means[0]);
            let dphi = ((T::one() + rho_1) * T::of(2.0) * T::of(2.0).ln()).recip();
            v_rho * dphi * dphi
        }
    };
    Ok(scale * scale * v)
}

#[allow(clippy::too_many_arguments)]
fn build_references<T: Scalar>(
    spec: &ExperimentSpec<T>,
    law: &LimitLaw<T>,
    table: &KernelTable<T>,
    scale: T,
    a_n: Option<T>,
    exact_means: &[T],
    headline_idx: usize,
) -> Result<ReferenceDraws<T>> {
    let mut refs = ReferenceDraws::default();
    let sigma2 = spec.model.variance();
    let d = spec.kernel.d();
    let c2s2 = spec.kernel.c_d() * spec.kernel.c_d() * sigma2;
    let n = spec.n;
    let ref_draws = spec.ref_draws.max(1000);
    let h = headline_idx;

    // statistic-specific limit coefficient multiplying U_d(1)
    let rose_coeff = match spec.statistic {
        Statistic::AcvError(_) | Statistic::OffdiagPart(_) | Statistic::DiagPart(_) => c2s2,
        Statistic::AcfError(_) => {
            let rho_h = exact_means[h] / exact_means[0];
            c2s2 * (T::one() - rho_h) / exact_means[0]
        }
        Statistic::DHatError => {
            let rho_1 = exact_means[1] / exact_means[0];
            let dphi = ((T::one() + rho_1) * T::of(2.0) * T::of(2.0).ln()).recip();
            c2s2 * (T::one() - rho_1) / exact_means[0] * dphi
        }
    };

    // rate ratios for cross-law mapping
    let rate_rose = RateSpec::NPow(T::one() - T::of(2.0) * d).scale(n, None)?;
    let rate_gauss = RateSpec::<T>::SqrtN.scale(n, None)?;

    // Rosenblatt references (matched + true-variance), finite-4th drivers
    if spec.model.has_finite_fourth_moment() && d.as_f64() > 0.25 + 1e-9 {
        let ratio = scale / rate_rose;
        let base_cfg = RosenblattConfig::new(d, spec.rosenblatt_n_grid);
        // matched: complete the quadratic form to the exactly computed
        // statistic variance (in U-units)
        if let Ok(v_stat) = exact_statistic_variance(spec, table, scale, exact_means) {
            let u_scale = ratio * rose_coeff;
            if u_scale > T::zero() {
                let target = v_stat / (u_scale * u_scale);
                let cfg = RosenblattConfig {
                    completion: Completion::Target(target),
                    ..base_cfg.clone()
                };
                let sampler = RosenblattSampler::new(cfg)?;
                let draws: Vec<T> = sampler
                    .sample_batch(ref_draws, spec.seed ^ 0x0ce)
                    .into_iter()
                    .map(|q| u_scale * q)
                    .collect();
                refs.rosenblatt_matched = Some(draws);
            }
        }
        let sampler = RosenblattSampler::new(base_cfg)?;
        let draws: Vec<T> = sampler
            .sample_batch(ref_draws, spec.seed ^ 0x0cf)
            .into_iter()
            .map(|q| ratio * rose_coeff * q)
            .collect();
        refs.rosenblatt_true = Some(draws);
    }

    // Gaussian reference
    if let Some(g) = &law.gaussian {
        let v = match spec.statistic {
            Statistic::AcvError(_) => g.covariance[h][h],
            Statistic::AcfError(_) | Statistic::DHatError => {
                let rho_h = exact_means[h.max(1)] / exact_means[0];
                let v_pp = g.covariance[h.max(1)][h.max(1)];
                let v_00 = g.covariance[0][0];
                let v_p0 = g.covariance[h.max(1)][0];
                let base = (v_pp - T::of(2.0) * rho_h * v_p0 + rho_h * rho_h * v_00)
                    / (exact_means[0] * exact_means[0]);
                if matches!(spec.statistic, Statistic::DHatError) {
                    let dphi =
                        ((T::one() + rho_h) * T::of(2.0) * T::of(2.0).ln()).recip();
                    base * dphi * dphi
                } else {
                    base
                }
            }
            _ => g.covariance[h][h],
        };
        let ratio = scale / rate_gauss;
        let sd = v.max(T::zero()).sqrt() * ratio;
        let mut rng = task_rng(spec.seed ^ 0x6a5, 0);
        let draws: Vec<T> = (0..ref_draws).map(|_| sd * T::std_normal(&mut rng)).collect();
        refs.gaussian = Some(draws);
    } else if refs.rosenblatt_matched.is_some() || law.regime == Regime::Stable {
        // moment-matched Gaussian alternative for regime discrimination:
        // built later against the empirical moments by the caller; here
        // provide a Gaussian with the matched statistic variance if known
        if let Ok(v_stat) = exact_statistic_variance(spec, table, scale, exact_means) {
            let sd = v_stat.max(T::zero()).sqrt();
            let mut rng = task_rng(spec.seed ^ 0x6a6, 0);
            let draws: Vec<T> =
                (0..ref_draws).map(|_| sd * T::std_normal(&mut rng)).collect();
            refs.gaussian = Some(draws);
        }
    }

    // Stable reference: ∫ G_h dM on the N/a_N² scale
    if spec.model.is_stable_regime_admissible() {
        if let Some(a) = a_n {
            let params = crate::limits::stable_limit_params(&spec.model, T::one())?;
            let alpha = spec.model.jump_tail_index();
            let ratio = scale / RateSpec::NOverAn2.scale(n, Some(a))?;
            let g_opts = GOptions::default();
            let sampler = match spec.statistic {
                Statistic::DiagPart(_) => GdmSampler::new_with_process(
                    &spec.kernel,
                    h,
                    alpha,
                    params.tau,
                    params.beta,
                    params.mu,
                    spec.gdm_panels,
                    GKind::Step(spec.m),
                    crate::limits::GdmProcess::K,
                    &g_opts,
                )?,
                Statistic::AcfError(_) => GdmSampler::new_acf_combination(
                    &spec.kernel,
                    h,
                    exact_means[h] / exact_means[0],
                    exact_means[0],
                    alpha,
                    params.tau,
                    params.beta,
                    params.mu,
                    spec.gdm_panels,
                    &g_opts,
                )?,
                _ => GdmSampler::new(
                    &spec.kernel,
                    h,
                    alpha,
                    params.tau,
                    params.beta,
                    params.mu,
                    spec.gdm_panels,
                    GKind::Continuum,
                    &g_opts,
                )?,
            };
            let draws: Vec<T> = sampler
                .sample_batch(ref_draws, spec.seed ^ 0x57b)
                .into_iter()
                .map(|x| ratio * x)
                .collect();
            refs.stable = Some(draws);
        }
    }

    Ok(refs)
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SweepResult<T: Scalar> {
    pub per_n: Vec<(usize, ExperimentResult<T>)>,
    pub rate_fit: Option<RateFit<T>>,
}

/// Run the experiment over several horizons, keeping the truncation ratio
/// `K/(m(N+H))` fixed, and fit the decay exponent of the UNscaled
/// statistic's IQR.
pub fn run_sweep<T: Scalar>(base: &ExperimentSpec<T>, ns: &[usize]) -> Result<SweepResult<T>> {
    if ns.is_empty() {
        return Err(Error::Parameter("sweep needs at least one N".into()));
    }
    let tau_ratio = base.k_trunc as f64
        / (SimulationGrid::<T>::minimal_k_trunc(base.m, base.n, base.h_max) as f64);
    let mut per_n = Vec::with_capacity(ns.len());
    let mut points = Vec::with_capacity(ns.len());
    for (i, &n) in ns.iter().enumerate() {
        let mut spec = base.clone();
        spec.n = n;
        spec.k_trunc = ((SimulationGrid::<T>::minimal_k_trunc(base.m, n, base.h_max) as f64)
            * tau_ratio)
            .ceil() as usize;
        // independent streams across N values
        spec.seed = base.seed.wrapping_add((i as u64 + 1) << 32);
        let res = run_experiment(&spec)?;
        // unscaled dispersion: IQR(scaled)/scale
        let disp = res.headline().iqr() / res.scale_factor;
        points.push((n, disp));
        per_n.push((n, res));
    }
    let rate_fit = if ns.len() >= 3 { rate_regression(&points).ok() } else { None };
    Ok(SweepResult { per_n, rate_fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ks_identical_and_disjoint() {
        let a = vec![1.0f64, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        let b = vec![10.0f64, 11.0];
        assert_eq!(ks_two_sample(&a, &b).unwrap(), 1.0);
        assert!(ks_two_sample(&a, &[]).is_err());
    }

    #[test]
    fn ks_hand_merge_oracle() {
        // a = {1,2,3,4}, b = {1.5, 2.5}: sup at x = 2.5 is |0.5 − 1.0| = 0.5
        let a = vec![1.0f64, 2.0, 3.0, 4.0];
        let b = vec![1.5f64, 2.5];
        assert_relative_eq!(ks_two_sample(&a, &b).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ks_with_ties() {
        let a = vec![1.0f64, 1.0, 2.0];
        let b = vec![1.0f64, 2.0, 2.0];
        // F_a(1)=2/3, F_b(1)=1/3 -> sup 1/3
        assert_relative_eq!(ks_two_sample(&a, &b).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn hill_on_exact_pareto() {
        // Pareto(α=2): x = u^{-1/2}
        let mut rng = task_rng(5, 0);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let u: f64 = f64::open_closed_01(&mut rng);
                u.powf(-0.5)
            })
            .collect();
        let h = hill_tail_index(&xs, 10_000).unwrap();
        assert!((h - 2.0).abs() < 0.07, "hill {h}");
    }

    #[test]
    fn hill_negative_control_exponential() {
        let mut rng = task_rng(6, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| f64::exp1(&mut rng)).collect();
        // no plateau: estimates drift strongly with k_top
        let h1 = hill_tail_index(&xs, 1_000).unwrap();
        let h2 = hill_tail_index(&xs, 100_000).unwrap();
        assert!(
            (h1 / h2 > 2.0) || (h2 / h1 > 2.0),
            "exponential sample unexpectedly stable: {h1} vs {h2}"
        );
    }

    #[test]
    fn hill_degenerate() {
        let xs = vec![0.0f64; 100];
        assert!(hill_tail_index(&xs, 10).is_err());
        let c = vec![3.0f64; 100];
        assert!(hill_tail_index(&c, 10).is_err());
    }

    #[test]
    fn rate_regression_recovers_powers() {
        // synthetic IQR ∝ N^{-0.3}
        let pts: Vec<(usize, f64)> =
            [1024usize, 4096, 16384].iter().map(|&n| (n, 7.0 * (n as f64).powf(-0.3))).collect();
        let fit = rate_regression(&pts).unwrap();
        assert_relative_eq!(fit.exponent, 0.3, max_relative = 1e-10);
        assert!(fit.std_error < 1e-10);
        // guards
        assert!(rate_regression(&pts[..2]).is_err());
        let bad = vec![(1000usize, 1.0f64), (1100, 1.0), (1200, 1.0)];
        assert!(rate_regression(&bad).is_err());
    }

    #[test]
    fn cross_lag_trivial() {
        let one = vec![vec![1.0f64, 2.0, 3.0, 4.0]];
        let c = cross_lag_coupling(&one).unwrap();
        assert_eq!(c.len(), 1);
        assert_relative_eq!(c[0][0], 1.0, epsilon = 1e-12);
        let two = vec![vec![1.0f64, 2.0, 3.0], vec![2.0f64, 4.0, 6.0]];
        let c = cross_lag_coupling(&two).unwrap();
        assert_relative_eq!(c[0][1], 1.0, epsilon = 1e-12);
    }

    fn tiny_spec() -> ExperimentSpec<f64> {
        ExperimentSpec {
            kernel: KernelSpec::power_law(0.35, 1.0).unwrap(),
            model: LevyModel::brownian(1.0).unwrap(),
            m: 2,
            n: 64,
            h_max: 1,
            k_trunc: SimulationGrid::<f64>::minimal_k_trunc(2, 64, 1) * 4,
            replicates: 200,
            scaling: Scaling::NPow(0.3),
            statistic: Statistic::AcvError(0),
            center: CenterMode::ExactMean,
            seed: 42,
            boundary_override: false,
            ref_draws: 1000,
            k_top: None,
            gdm_panels: 256,
            rosenblatt_n_grid: 64,
            norming_budget_mult: 100,
            truncation_budget_rel: 0.05,
        }
    }

    #[test]
    fn experiment_contract_and_determinism() {
        let spec = tiny_spec();
        let r1 = run_experiment(&spec).unwrap();
        assert_eq!(r1.headline().values.len(), 200);
        assert_eq!(r1.per_lag.len(), 2);
        let r2 = run_experiment(&spec).unwrap();
        assert_eq!(r1.headline().values, r2.headline().values);
        assert_eq!(r1.config_hash, r2.config_hash);
        // references exist in the Rosenblatt regime
        assert!(r1.references.rosenblatt_matched.is_some());
        assert!(r1.references.rosenblatt_true.is_some());
        assert!(r1.ks_to_rosenblatt.is_some());
    }

    #[test]
    fn experiment_boundary_refusal() {
        let mut spec = tiny_spec();
        spec.kernel = KernelSpec::power_law(0.4, 1.0).unwrap();
        spec.model = LevyModel::new(0.0, 1.0, 2.5, 1.0, false).unwrap();
        let err = run_experiment(&spec).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
        spec.boundary_override = true;
        assert!(run_experiment(&spec).is_ok());
    }

    #[test]
    fn experiment_consistency_trend() {
        // MC mean of the UNscaled acv error → 0 as N doubles
        let mut spec = tiny_spec();
        spec.center = CenterMode::Gamma;
        spec.replicates = 300;
        let sweep = run_sweep(&spec, &[64, 256, 1024]).unwrap();
        let mut means: Vec<f64> = Vec::new();
        for (_, res) in &sweep.per_n {
            let m: f64 = res.headline().values.iter().sum::<f64>()
                / res.headline().values.len() as f64
                / res.scale_factor;
            means.push(m.abs());
        }
        assert!(means[2] < means[0] + 0.05, "means {means:?}");
    }

    #[test]
    fn scaled_statistic_scale_invariance_for_acf() {
        // acf/d̂ statistics are invariant under path scale c (inherited
        // equivariance): realize by scaling σ
        let mut spec = tiny_spec();
        spec.statistic = Statistic::AcfError(1);
        let r1 = run_experiment(&spec).unwrap();
        spec.model = LevyModel::brownian(3.0).unwrap();
        let r2 = run_experiment(&spec).unwrap();
        for (a, b) in r1.headline().values.iter().zip(r2.headline().values.iter()) {
            assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }
}
