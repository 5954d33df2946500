//! Path simulation of the moving average on a mesh of size `ε = 1/m`:
//! `X_t = Σ_{k=0}^{K} f(εk) Z_{mt−k}` at integer observation times
//! `t = 1..N+H`, driven by one shared increment stream per replicate.
//!
//! The direct sliding dot product is the reference semantics; a
//! phase-decomposed FFT convolution is the equivalence-tested fast path.
//! Retained increments make the diagonal / off-diagonal decomposition of
//! the sample autocovariance computable exactly.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fftconv::PlannedConv;
use crate::kernel::{self, KernelSpec};
use crate::levy::LevyModel;
use crate::scalar::{task_rng, Scalar};

/// Discretization mesh and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationGrid<T: Scalar> {
    pub m: u32,
    /// Horizon: observations at t = 1..N (plus H extra for lagged products).
    pub n: usize,
    /// Maximum lag.
    pub h_max: usize,
    /// Kernel truncation length in ε-steps.
    pub k_trunc: usize,
    pub seed: u64,
    pub retain_increments: bool,
    /// Relative truncation budget: requires
    /// `σ² ∫_{εK}^∞ f² ≤ budget · γ(0)`.
    pub truncation_budget_rel: T,
}

impl<T: Scalar> SimulationGrid<T> {
    pub fn new(m: u32, n: usize, h_max: usize, k_trunc: usize, seed: u64) -> Result<Self> {
        let g = SimulationGrid {
            m,
            n,
            h_max,
            k_trunc,
            seed,
            retain_increments: false,
            truncation_budget_rel: T::of(0.05),
        };
        g.check_shape()?;
        Ok(g)
    }

    /// Smallest admissible truncation for (m, n, h): `εK ≥ N + H`.
    pub fn minimal_k_trunc(m: u32, n: usize, h_max: usize) -> usize {
        m as usize * (n + h_max)
    }

    pub fn with_retained_increments(mut self) -> Self {
        self.retain_increments = true;
        self
    }

    fn check_shape(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Validation("mesh m must be >= 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Validation("horizon N must be >= 1".into()));
        }
        if self.k_trunc < Self::minimal_k_trunc(self.m, self.n, self.h_max) {
            return Err(Error::Validation(format!(
                "k_trunc = {} violates eps*K >= N+H (need >= {})",
                self.k_trunc,
                Self::minimal_k_trunc(self.m, self.n, self.h_max)
            )));
        }
        Ok(())
    }

    pub fn eps(&self) -> T {
        T::of(self.m as f64).recip()
    }

    /// Observation count including the lag margin.
    pub fn n_out(&self) -> usize {
        self.n + self.h_max
    }

    /// Length of the shared increment stream.
    pub fn stream_len(&self) -> usize {
        self.m as usize * self.n_out() + self.k_trunc + 1 - self.m as usize
    }

    /// z-index of the increment `Z_{mt−k}`: the stream stores
    /// `Z_j` for `j = m−K .. m(N+H)` at index `j − m + K`.
    #[inline]
    pub fn z_index(&self, t: usize, k: usize) -> usize {
        self.m as usize * t - k - self.m as usize + self.k_trunc
    }

    /// Full validation against a kernel: truncation budget.
    pub fn validate(&self, kernel: &KernelSpec<T>, sigma2: T) -> Result<()> {
        self.check_shape()?;
        let t0 = self.eps() * T::of_usize(self.k_trunc);
        let tail = sigma2 * kernel::tail_l2(kernel, t0, T::of(1e-6))?;
        let gamma0 = kernel::autocovariance(kernel, sigma2, T::zero(), T::of(1e-8))?;
        if tail > self.truncation_budget_rel * gamma0 {
            return Err(Error::Validation(format!(
                "truncation L2 tail {tail:e} exceeds budget {:e} (= {} of gamma(0) = {gamma0:e}); increase k_trunc",
                self.truncation_budget_rel * gamma0,
                self.truncation_budget_rel,
            )));
        }
        Ok(())
    }
}

/// Tabulated kernel values `f(εk)`, `k = 0..=K`.
#[derive(Debug, Clone)]
pub struct KernelTable<T: Scalar> {
    pub f: Vec<T>,
    pub m: u32,
}

impl<T: Scalar> KernelTable<T> {
    pub fn build(kernel: &KernelSpec<T>, m: u32, k_trunc: usize) -> Self {
        let eps = T::of(m as f64).recip();
        let f = (0..=k_trunc)
            .map(|k| kernel.eval(eps * T::of_usize(k)))
            .collect();
        KernelTable { f, m }
    }

    pub fn eps(&self) -> T {
        T::of(self.m as f64).recip()
    }

    pub fn k_trunc(&self) -> usize {
        self.f.len() - 1
    }

    /// `E[γ̂_N(h)]` of the discretized truncated process:
    /// `ε σ² Σ_{i=0}^{K−mh} f(εi) f(εi+h)` (exact, N-independent).
    pub fn exact_acv_mean(&self, sigma2: T, h: usize) -> T {
        let shift = self.m as usize * h;
        if shift > self.k_trunc() {
            return T::zero();
        }
        let mut acc = T::zero();
        for i in 0..=(self.k_trunc() - shift) {
            acc += self.f[i] * self.f[i + shift];
        }
        self.eps() * sigma2 * acc
    }
}

/// Which convolution engine produced a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvEngine {
    Direct,
    Fft,
    Auto,
}

/// A simulated path with optional retained increment stream.
#[derive(Debug, Clone)]
pub struct SamplePath<T: Scalar> {
    pub values: Vec<T>,
    pub increments: Option<Vec<T>>,
    pub grid: SimulationGrid<T>,
    pub engine_used: ConvEngine,
}

/// Reusable simulation engine: kernel table plus FFT plans shared across
/// replicates (immutable, thread-safe).
pub struct SimEngine<T: Scalar> {
    pub table: KernelTable<T>,
    grid: SimulationGrid<T>,
    engine: ConvEngine,
    phases: Option<Vec<PhasePlan<T>>>,
}

struct PhasePlan<T: Scalar> {
    conv: PlannedConv<T>,
    a_len: usize,
    residue: usize,
}

impl<T: Scalar> SimEngine<T> {
    pub fn new(kernel: &KernelSpec<T>, grid: &SimulationGrid<T>, engine: ConvEngine) -> Result<Self> {
        grid.check_shape()?;
        let table = KernelTable::build(kernel, grid.m, grid.k_trunc);
        Self::from_table(table, grid, engine)
    }

    pub fn from_table(
        table: KernelTable<T>,
        grid: &SimulationGrid<T>,
        engine: ConvEngine,
    ) -> Result<Self> {
        if table.k_trunc() != grid.k_trunc || table.m != grid.m {
            return Err(Error::Parameter("kernel table does not match the grid".into()));
        }
        let work = grid.n_out() as u128 * (grid.k_trunc as u128 + 1);
        let engine = match engine {
            ConvEngine::Auto => {
                if work > 20_000_000 {
                    ConvEngine::Fft
                } else {
                    ConvEngine::Direct
                }
            }
            e => e,
        };
        let phases = if engine == ConvEngine::Fft {
            let m = grid.m as usize;
            let n_out = grid.n_out();
            let mut v = Vec::with_capacity(m);
            for r in 0..m {
                // phase kernel: h_r[a] = f[m a + r]
                let a_len = (grid.k_trunc - r) / m + 1;
                let h_r: Vec<T> = (0..a_len).map(|a| table.f[m * a + r]).collect();
                let sig_len = a_len + n_out - 1;
                v.push(PhasePlan { conv: PlannedConv::new(&h_r, sig_len), a_len, residue: r });
            }
            Some(v)
        } else {
            None
        };
        Ok(SimEngine { table, grid: grid.clone(), engine, phases })
    }

    pub fn engine(&self) -> ConvEngine {
        self.engine
    }

    pub fn grid(&self) -> &SimulationGrid<T> {
        &self.grid
    }

    /// Observations `X_1..X_{N+H}` from a given increment stream.
    pub fn observe(&self, z: &[T]) -> Vec<T> {
        assert_eq!(z.len(), self.grid.stream_len());
        match self.engine {
            ConvEngine::Direct | ConvEngine::Auto => self.observe_direct(z),
            ConvEngine::Fft => self.observe_fft(z),
        }
    }

    fn observe_direct(&self, z: &[T]) -> Vec<T> {
        let n_out = self.grid.n_out();
        let f = &self.table.f;
        let mut out = vec![T::zero(); n_out];
        for t in 1..=n_out {
            // z-index of k term: m t − k − m + K; iterate contiguously
            let hi = self.grid.z_index(t, 0);
            let mut acc = T::zero();
            for (k, &fk) in f.iter().enumerate() {
                acc += fk * z[hi - k];
            }
            out[t - 1] = acc;
        }
        out
    }

    fn observe_fft(&self, z: &[T]) -> Vec<T> {
        let m = self.grid.m as usize;
        let n_out = self.grid.n_out();
        let k_tr = self.grid.k_trunc;
        let mut out = vec![T::zero(); n_out];
        for ph in self.phases.as_ref().unwrap() {
            // signal: w[i] = z[m (i − A_r) + K − r], i = 0..A_r+n_out−1
            let a = ph.a_len;
            let r = ph.residue;
            let sig_len = a + n_out - 1;
            let base = k_tr - r;
            let mut w = Vec::with_capacity(sig_len);
            for i in 0..sig_len {
                // index = m(i − (a−1)) + K − r  ≥ 0 since (K−r) − m(a−1) = (K−r) mod m
                let idx = base + m * i - m * (a - 1);
                w.push(z[idx]);
            }
            let conv = ph.conv.convolve(&w);
            for t in 1..=n_out {
                out[t - 1] += conv[t - 1 + a - 1];
            }
        }
        out
    }

    /// Simulate one replicate on stream `(seed, stream_index)`.
    pub fn run(&self, model: &LevyModel<T>, seed: u64, stream_index: u64) -> SamplePath<T> {
        let mut rng = task_rng(seed, stream_index);
        self.run_with_rng(model, &mut rng)
    }

    pub fn run_with_rng(&self, model: &LevyModel<T>, rng: &mut ChaCha8Rng) -> SamplePath<T> {
        let z = model.sample_increments_with(self.grid.eps(), self.grid.stream_len(), rng);
        let values = self.observe(&z);
        SamplePath {
            values,
            increments: self.grid.retain_increments.then_some(z),
            grid: self.grid.clone(),
            engine_used: self.engine,
        }
    }
}

/// Simulate a path (one-shot; builds the engine internally).
pub fn simulate_path<T: Scalar>(
    kernel: &KernelSpec<T>,
    model: &LevyModel<T>,
    grid: &SimulationGrid<T>,
) -> Result<SamplePath<T>> {
    grid.validate(kernel, model.variance())?;
    let engine = SimEngine::new(kernel, grid, ConvEngine::Auto)?;
    Ok(engine.run(model, grid.seed, 0))
}

/// Recompute the observation vector from retained increments with the same
/// engine (bitwise-identical to `values`).
pub fn reconstruct<T: Scalar>(path: &SamplePath<T>, kernel: &KernelSpec<T>) -> Result<Vec<T>> {
    let z = path
        .increments
        .as_ref()
        .ok_or_else(|| Error::State("reconstruction requires retained increments".into()))?;
    let engine = SimEngine::new(kernel, &path.grid, path.engine_used)?;
    Ok(engine.observe(z))
}

/// Centering used for the diagonal statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Centering<T> {
    /// §3 form: `(Z²_k − ε b_N)`.
    TruncatedSecondMoment(T),
    /// σ²-centering (the drift `α/(α−2)` then moves into the limit law).
    Variance(T),
}

impl<T: Copy> Centering<T> {
    pub fn value(&self) -> T {
        match self {
            Centering::TruncatedSecondMoment(v) | Centering::Variance(v) => *v,
        }
    }
}

/// Diagonal / off-diagonal split of `γ̂_N(h)`:
/// `γ̂ = diag + offdiag + centering_term` exactly.
#[derive(Debug, Clone, Copy)]
pub struct Decomposition<T> {
    pub diag: T,
    pub offdiag: T,
    pub centering_term: T,
    pub gamma_hat: T,
}

/// Compute `d_{N,h,ε}` (diagonal terms of the sample autocovariance,
/// centered as requested) and the off-diagonal remainder `r_{N,h,ε}`.
pub fn decompose<T: Scalar>(
    path: &SamplePath<T>,
    table: &KernelTable<T>,
    h: usize,
    centering: Centering<T>,
) -> Result<Decomposition<T>> {
    let z = path
        .increments
        .as_ref()
        .ok_or_else(|| Error::State("decompose requires retained increments".into()))?;
    let grid = &path.grid;
    if h > grid.h_max {
        return Err(Error::Parameter(format!("lag {h} exceeds grid H = {}", grid.h_max)));
    }
    if table.k_trunc() != grid.k_trunc || table.m != grid.m {
        return Err(Error::Parameter("kernel table does not match the path grid".into()));
    }
    let n = grid.n;
    let m = grid.m as usize;
    let k_tr = grid.k_trunc;
    let shift = m * h;

    // prefix sums of z² per residue class mod m
    let mut prefix: Vec<Vec<T>> = (0..m)
        .map(|c| {
            let cnt = (z.len() - c).div_ceil(m);
            let mut p = Vec::with_capacity(cnt + 1);
            p.push(T::zero());
            let mut acc = T::zero();
            let mut idx = c;
            while idx < z.len() {
                acc += z[idx] * z[idx];
                p.push(acc);
                idx += m;
            }
            p
        })
        .collect();
    // S2(i) = Σ_{t=1..N} z²[m(t−1) + (K−i)]
    let mut d_raw = T::zero();
    for i in 0..=(k_tr - shift) {
        let coeff = table.f[i] * table.f[i + shift];
        if coeff == T::zero() {
            continue;
        }
        let start = k_tr - i;
        let c = start % m;
        let l0 = start / m;
        let p = &mut prefix[c];
        let s2 = p[l0 + n] - p[l0];
        d_raw += coeff * s2;
    }
    d_raw /= T::of_usize(n);

    let gamma_hat = {
        let x = &path.values;
        let mut acc = T::zero();
        for t in 0..n {
            acc += x[t] * x[t + h];
        }
        acc / T::of_usize(n)
    };

    let mut coeff_sum = T::zero();
    for i in 0..=(k_tr - shift) {
        coeff_sum += table.f[i] * table.f[i + shift];
    }
    let centering_term = grid.eps() * centering.value() * coeff_sum;
    Ok(Decomposition {
        diag: d_raw - centering_term,
        offdiag: gamma_hat - d_raw,
        centering_term,
        gamma_hat,
    })
}

/// Truncation diagnostics: the dropped L² mass and the induced bias bound
/// per lag.
#[derive(Debug, Clone)]
pub struct TruncationReport<T> {
    pub l2_tail: T,
    pub bias_bound_per_lag: Vec<T>,
}

pub fn truncation_report<T: Scalar>(
    kernel: &KernelSpec<T>,
    grid: &SimulationGrid<T>,
    sigma2: T,
) -> Result<TruncationReport<T>> {
    let t0 = grid.eps() * T::of_usize(grid.k_trunc);
    let tol = T::of(1e-8);
    let l2_tail = sigma2 * kernel::tail_l2(kernel, t0, tol)?;
    let mut per_lag = Vec::with_capacity(grid.h_max + 1);
    for h in 0..=grid.h_max {
        let lower = (t0 - T::of_usize(h)).max(T::one());
        let b = sigma2 * kernel::tail_product(kernel, T::of_usize(h), lower, tol)?;
        per_lag.push(b);
    }
    Ok(TruncationReport { l2_tail, bias_bound_per_lag: per_lag })
}

/// Exact covariance `Cov(γ̂_N(p), γ̂_N(q))` for the discretized truncated
/// process with a finite-fourth-moment driver.
///
/// Quadratic-form exact: the Gaussian (Isserlis) part is
/// `(1/N²) Σ_{t,s} [ρ(u)ρ(u+q−p) + ρ(u+q)ρ(u−p)]` with `ρ` the exact
/// lattice autocovariance, and non-Gaussian drivers add the diagonal
/// fourth-cumulant term `κ₄(Z) Σ_k C_p(k,k) C_q(k,k)`.
pub fn acv_covariance_exact<T: Scalar>(
    table: &KernelTable<T>,
    model: &LevyModel<T>,
    n: usize,
    p: usize,
    q: usize,
) -> Result<T> {
    let sigma2 = model.variance();
    let eps = table.eps();
    let m = table.m as usize;
    let kappa4_z = match model.fourth_moment() {
        crate::levy::FourthMoment::Finite { .. } => levy_kappa4_increment(model, eps),
        crate::levy::FourthMoment::Infinite => {
            return Err(Error::Domain(
                "exact acv covariance needs a finite fourth moment".into(),
            ))
        }
    };

    // lattice acv at integer lags via FFT autocorrelation of the table
    let acf = autocorrelation_fft(&table.f);
    let rho = |lag: i64| -> T {
        let l = lag.unsigned_abs() as usize * m;
        if l < acf.len() {
            eps * sigma2 * acf[l]
        } else {
            T::zero()
        }
    };
    let nn = T::of_usize(n);
    let (pi, qi) = (p as i64, q as i64);
    let mut total = T::zero();
    for u in -(n as i64 - 1)..=(n as i64 - 1) {
        let w = nn - T::of(u.unsigned_abs() as f64);
        total += w * (rho(u) * rho(u + qi - pi) + rho(u + qi) * rho(u - pi));
    }
    let mut cov = total / (nn * nn);

    if kappa4_z != T::zero() {
        cov += kappa4_z * diag_coeff_cross_sum(table, n, p, q) / (nn * nn);
    }
    Ok(cov)
}

/// Exact variance of `γ̂_N(h)`.
pub fn acv_variance_exact<T: Scalar>(
    table: &KernelTable<T>,
    model: &LevyModel<T>,
    n: usize,
    h: usize,
) -> Result<T> {
    acv_covariance_exact(table, model, n, h, h)
}

/// `Σ_{t,s} Σ_i g_p[i] g_q[i + m(s−t)]` with `g_h[i] = f_i f_{i+mh}` —
/// the diagonal-coefficient cross sum shared by the fourth-cumulant term
/// and the diagonal-part variance.
fn diag_coeff_cross_sum<T: Scalar>(table: &KernelTable<T>, n: usize, p: usize, q: usize) -> T {
    let m = table.m as usize;
    let build = |h: usize| -> Vec<T> {
        let shift = m * h;
        if shift > table.k_trunc() {
            return Vec::new();
        }
        (0..=(table.k_trunc() - shift))
            .map(|i| table.f[i] * table.f[i + shift])
            .collect()
    };
    let gp = build(p);
    let gq = build(q);
    if gp.is_empty() || gq.is_empty() {
        return T::zero();
    }
    let fwd = cross_correlation_fft(&gp, &gq); // Σ g_p[i] g_q[i+l]
    let bwd = if p == q {
        None
    } else {
        Some(cross_correlation_fft(&gq, &gp))
    };
    let nn = T::of_usize(n);
    let mut total = T::zero();
    for u in 0..n {
        let l = u * m;
        let w = nn - T::of_usize(u);
        if u == 0 {
            if l < fwd.len() {
                total += nn * fwd[l];
            }
            continue;
        }
        if l < fwd.len() {
            total += w * fwd[l];
        }
        let b = bwd.as_ref().unwrap_or(&fwd);
        if l < b.len() {
            total += w * b[l];
        }
    }
    total
}

/// Exact variance of the raw diagonal part
/// `(1/N) Σ_t Σ_i f(εi)f(εi+h) Z²_{mt−i}` about its mean.
pub fn diag_raw_variance_exact<T: Scalar>(
    table: &KernelTable<T>,
    model: &LevyModel<T>,
    n: usize,
    h: usize,
) -> Result<T> {
    let eps = table.eps();
    let var_z = eps * model.variance();
    let kappa4_z = match model.fourth_moment() {
        crate::levy::FourthMoment::Finite { .. } => levy_kappa4_increment(model, eps),
        crate::levy::FourthMoment::Infinite => {
            return Err(Error::Domain("diag variance needs a finite fourth moment".into()))
        }
    };
    let var_zsq = kappa4_z + T::of(2.0) * var_z * var_z;
    let nn = T::of_usize(n);
    Ok(var_zsq * diag_coeff_cross_sum(table, n, h, h) / (nn * nn))
}

/// Exact variance of the off-diagonal part `r_{N,h,ε}` (diagonal and
/// off-diagonal parts are uncorrelated for symmetric drivers).
pub fn offdiag_variance_exact<T: Scalar>(
    table: &KernelTable<T>,
    model: &LevyModel<T>,
    n: usize,
    h: usize,
) -> Result<T> {
    let total = acv_variance_exact(table, model, n, h)?;
    let diag = diag_raw_variance_exact(table, model, n, h)?;
    Ok((total - diag).max(T::zero()))
}

/// Fourth cumulant of one increment over step `eps`.
pub fn levy_kappa4_increment<T: Scalar>(model: &LevyModel<T>, eps: T) -> T {
    if model.jump_rate() == T::zero() {
        return T::zero();
    }
    // compound Poisson: κ₄ = λ ε E[J⁴]; recover E[J⁴] from the model's
    // fourth-moment report: E[L1⁴] = λE[J⁴] + 3σ⁴
    match model.fourth_moment() {
        crate::levy::FourthMoment::Finite { value, .. } => {
            let s2 = model.variance();
            (value - T::of(3.0) * s2 * s2) * eps
        }
        crate::levy::FourthMoment::Infinite => T::nan(),
    }
}

/// `acf[l] = Σ_i v[i] v[i+l]` for l = 0..len−1, via FFT.
pub fn autocorrelation_fft<T: Scalar>(v: &[T]) -> Vec<T> {
    cross_correlation_fft(v, v)
}

/// `ccf[l] = Σ_i a[i] b[i+l]` for l = 0..b.len()−1, via FFT.
pub fn cross_correlation_fft<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    use num_complex::Complex;
    use rustfft::FftPlanner;
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let nfft = (a.len() + b.len()).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nfft);
    let ifft = planner.plan_fft_inverse(nfft);
    let zero = Complex::new(T::zero(), T::zero());
    let mut fa: Vec<Complex<T>> = a
        .iter()
        .map(|&x| Complex::new(x, T::zero()))
        .chain(std::iter::repeat(zero))
        .take(nfft)
        .collect();
    let mut fb: Vec<Complex<T>> = b
        .iter()
        .map(|&x| Complex::new(x, T::zero()))
        .chain(std::iter::repeat(zero))
        .take(nfft)
        .collect();
    fft.process(&mut fa);
    fft.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = x.conj() * *y;
    }
    ifft.process(&mut fa);
    let scale = T::of_usize(nfft).recip();
    fa.iter().take(b.len()).map(|c| c.re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate;
    use approx::assert_relative_eq;

    fn brownian() -> LevyModel<f64> {
        LevyModel::brownian(1.0).unwrap()
    }

    fn small_grid(m: u32, n: usize, h: usize, seed: u64) -> SimulationGrid<f64> {
        let k = SimulationGrid::<f64>::minimal_k_trunc(m, n, h) * 2;
        SimulationGrid::new(m, n, h, k, seed).unwrap()
    }

    #[test]
    fn indicator_m1_is_shifted_identity() {
        // f(0)=0, f(1)=1, f(k>=2)=0 at m=1: X_t = Z_{t-1}
        let kernel = KernelSpec::<f64>::indicator();
        let grid = small_grid(1, 32, 2, 5).with_retained_increments();
        let path = simulate_path(&kernel, &brownian(), &grid).unwrap();
        let z = path.increments.as_ref().unwrap();
        for t in 1..=grid.n_out() {
            let idx = grid.z_index(t, 1);
            assert_relative_eq!(path.values[t - 1], z[idx], max_relative = 1e-14);
        }
    }

    #[test]
    fn fft_equals_direct() {
        let kernel = KernelSpec::power_law(0.3, 1.0).unwrap();
        let grid = small_grid(4, 256, 2, 9);
        let model = brownian();
        let dir = SimEngine::new(&kernel, &grid, ConvEngine::Direct).unwrap();
        let fft = SimEngine::new(&kernel, &grid, ConvEngine::Fft).unwrap();
        let z = model.sample_increments(grid.eps(), grid.stream_len(), 33).unwrap();
        let a = dir.observe(&z);
        let b = fft.observe(&z);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn determinism_and_reconstruction() {
        let kernel = KernelSpec::power_law(0.3, 1.0).unwrap();
        let grid = small_grid(2, 64, 1, 17).with_retained_increments();
        let model = brownian();
        let p1 = simulate_path(&kernel, &model, &grid).unwrap();
        let p2 = simulate_path(&kernel, &model, &grid).unwrap();
        assert_eq!(p1.values, p2.values);
        let rec = reconstruct(&p1, &kernel).unwrap();
        assert_eq!(rec, p1.values); // bitwise
    }

    #[test]
    fn grid_invariant_enforced() {
        assert!(SimulationGrid::<f64>::new(4, 100, 2, 100, 0).is_err());
        let g = SimulationGrid::<f64>::new(4, 100, 2, 408, 0).unwrap();
        assert_eq!(g.stream_len(), 4 * 102 + 408 + 1 - 4);
    }

    #[test]
    fn truncation_budget_violation() {
        let kernel = KernelSpec::power_law(0.45, 1.0).unwrap();
        // minimal truncation with a d close to 1/2 has a huge tail
        let mut grid = small_grid(1, 64, 0, 1);
        grid.k_trunc = SimulationGrid::<f64>::minimal_k_trunc(1, 64, 0);
        grid.truncation_budget_rel = 1e-4;
        assert!(grid.validate(&kernel, 1.0).is_err());
    }

    #[test]
    fn decompose_matches_brute_force() {
        // brute-force double loop over (k,k') as the oracle
        let kernel = KernelSpec::power_law(0.3, 1.0).unwrap();
        let grid = small_grid(2, 16, 2, 77).with_retained_increments();
        let model = brownian();
        let path = simulate_path(&kernel, &model, &grid).unwrap();
        let table = KernelTable::build(&kernel, grid.m, grid.k_trunc);
        let z = path.increments.as_ref().unwrap();
        let b_n = 0.8; // arbitrary centering for the identity check
        for h in 0..=2usize {
            let dec = decompose(&path, &table, h, Centering::TruncatedSecondMoment(b_n)).unwrap();
            // oracle: diagonal raw sum
            let m = grid.m as usize;
            let mut d_oracle = 0.0;
            let mut r_oracle = 0.0;
            for t in 1..=grid.n {
                // X_t X_{t+h} = Σ_{k,k'} f_k f_{k'} z[i(t,k)] z[i(t+h,k')]
                for k in 0..=grid.k_trunc {
                    for k2 in 0..=grid.k_trunc {
                        let c = table.f[k] * table.f[k2];
                        if c == 0.0 {
                            continue;
                        }
                        let i1 = grid.z_index(t, k);
                        let i2 = grid.z_index(t + h, k2);
                        if i1 == i2 {
                            d_oracle += c * z[i1] * z[i2];
                        } else {
                            r_oracle += c * z[i1] * z[i2];
                        }
                    }
                }
                let _ = m;
            }
            d_oracle /= grid.n as f64;
            r_oracle /= grid.n as f64;
            let scale = dec.gamma_hat.abs().max(1.0);
            assert!(
                ((dec.diag + dec.centering_term) - d_oracle).abs() <= 1e-12 * scale,
                "h={h}: diag"
            );
            assert!((dec.offdiag - r_oracle).abs() <= 1e-12 * scale, "h={h}: offdiag");
            // reconstruction identity
            let lhs = dec.diag + dec.offdiag + dec.centering_term;
            assert!((lhs - dec.gamma_hat).abs() <= 1e-12 * scale, "h={h}: identity");
        }
    }

    #[test]
    fn decompose_requires_increments() {
        let kernel = KernelSpec::power_law(0.3, 1.0).unwrap();
        let grid = small_grid(2, 16, 0, 3);
        let path = simulate_path(&kernel, &brownian(), &grid).unwrap();
        let table = KernelTable::build(&kernel, grid.m, grid.k_trunc);
        assert!(matches!(
            decompose(&path, &table, 0, Centering::Variance(1.0)),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn offdiagonal_mean_zero() {
        // E[r_{N,h,ε}] = 0 across replicates
        let kernel = KernelSpec::power_law(0.3, 1.0).unwrap();
        let grid = small_grid(2, 16, 1, 0).with_retained_increments();
        let model = brownian();
        let engine = SimEngine::new(&kernel, &grid, ConvEngine::Direct).unwrap();
        let table = KernelTable::build(&kernel, grid.m, grid.k_trunc);
        let reps = 10_000;
        let mut vals = Vec::with_capacity(reps);
        for r in 0..reps {
            let path = engine.run(&model, 1234, r as u64);
            let dec = decompose(&path, &table, 1, Centering::Variance(1.0)).unwrap();
            vals.push(dec.offdiag);
        }
        let mean: f64 = vals.iter().sum::<f64>() / reps as f64;
        let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / reps as f64;
        let se = (var / reps as f64).sqrt();
        assert!(mean.abs() <= 4.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn unbiased_against_gamma_closed_form() {
        // PowerLaw(d=0.3), Brownian, MC mean of γ̂(0) ≈ exact mean, and the
        // exact mean is within the truncation bias of γ(0) = 3.5
        let kernel = KernelSpec::power_law(0.3, 1.0).unwrap();
        let grid = small_grid(8, 128, 0, 10);
        let model = brownian();
        let engine = SimEngine::new(&kernel, &grid, ConvEngine::Auto).unwrap();
        let reps = 500;
        let mut acc = 0.0;
        for r in 0..reps {
            let p = engine.run(&model, 99, r as u64);
            acc += estimate::sample_acv(&p.values, grid.n, 0).unwrap().gamma_hat[0];
        }
        let mc_mean = acc / reps as f64;
        let exact = engine.table.exact_acv_mean(1.0, 0);
        let rep = truncation_report(&kernel, &grid, 1.0).unwrap();
        assert!((3.5 - exact).abs() <= rep.bias_bound_per_lag[0] + 0.05, "exact {exact}");
        // 3 MC standard errors (std of γ̂ is order √Var; use a generous band)
        assert!((mc_mean - exact).abs() < 0.2, "mc {mc_mean} vs exact {exact}");
    }

    #[test]
    fn truncation_report_power_law() {
        let kernel = KernelSpec::power_law(0.3, 1.0).unwrap();
        let grid = SimulationGrid::<f64>::new(1, 64, 0, 10_000, 0).unwrap();
        let rep = truncation_report(&kernel, &grid, 1.0).unwrap();
        assert_relative_eq!(rep.l2_tail, 0.0627971, max_relative = 1e-4);
        // indicator: zero tail
        let g2 = SimulationGrid::<f64>::new(1, 4, 0, 8, 0).unwrap();
        let rep2 = truncation_report(&KernelSpec::<f64>::indicator(), &g2, 1.0).unwrap();
        assert_eq!(rep2.l2_tail, 0.0);
    }

    #[test]
    fn stationarity_two_sample_ks() {
        let kernel = KernelSpec::power_law(0.3, 1.0).unwrap();
        let grid = small_grid(2, 16, 0, 0);
        let model = brownian();
        let engine = SimEngine::new(&kernel, &grid, ConvEngine::Direct).unwrap();
        let reps = 10_000;
        let mut first = Vec::with_capacity(reps);
        let mut mid = Vec::with_capacity(reps);
        for r in 0..reps {
            let p = engine.run(&model, 2024, r as u64);
            first.push(p.values[0]);
            mid.push(p.values[grid.n / 2]);
        }
        let ks = crate::mc::ks_two_sample(&first, &mid).unwrap();
        assert!(ks <= 0.02, "KS {ks}");
    }

    #[test]
    fn mesh_refinement_monotone() {
        // seed-coupled Brownian driver: aggregate a fine stream to coarser
        // meshes; |γ̂_{2m} − γ̂_m| decreases with m on MC average
        let model = brownian();
        let n = 64usize;
        let meshes = [1u32, 2, 4, 8, 16];
        let fine_m = 16u32;
        let reps = 200;
        let mut diffs = vec![0.0f64; meshes.len() - 1];
        for rep in 0..reps {
            let k_fine = SimulationGrid::<f64>::minimal_k_trunc(fine_m, n, 0);
            let fine_grid = SimulationGrid::new(fine_m, n, 0, k_fine, 0).unwrap();
            let mut rng = task_rng(4096, rep as u64);
            let z_fine =
                model.sample_increments_with(fine_grid.eps(), fine_grid.stream_len(), &mut rng);
            let mut gammas = Vec::new();
            for &m in &meshes {
                let agg = (fine_m / m) as usize;
                let k = SimulationGrid::<f64>::minimal_k_trunc(m, n, 0);
                let grid = SimulationGrid::new(m, n, 0, k, 0).unwrap();
                // aggregate stream: coarse Z_j = Σ of agg fine increments,
                // aligned so both streams end at time m(N+H)·ε = N+H
                let need = grid.stream_len();
                let mut zc = Vec::with_capacity(need);
                let fine_len = z_fine.len();
                for j in 0..need {
                    let end = fine_len - agg * (need - 1 - j);
                    let s: f64 = z_fine[end - agg..end].iter().sum();
                    zc.push(s);
                }
                let kernel = KernelSpec::power_law(0.3, 1.0).unwrap();
                let engine = SimEngine::from_table(
                    KernelTable::build(&kernel, m, k),
                    &grid,
                    ConvEngine::Direct,
                )
                .unwrap();
                let x = engine.observe(&zc);
                gammas.push(estimate::sample_acv(&x, n, 0).unwrap().gamma_hat[0]);
            }
            for i in 0..diffs.len() {
                diffs[i] += (gammas[i + 1] - gammas[i]).abs();
            }
        }
        for w in diffs.windows(2) {
            assert!(w[1] < w[0], "mesh refinement not monotone: {diffs:?}");
        }
    }

    #[test]
    fn exact_variance_matches_mc_brownian() {
        let kernel = KernelSpec::power_law(0.35, 1.0).unwrap();
        let grid = small_grid(2, 64, 0, 0);
        let model = brownian();
        let engine = SimEngine::new(&kernel, &grid, ConvEngine::Auto).unwrap();
        let table = KernelTable::build(&kernel, grid.m, grid.k_trunc);
        let v_exact = acv_variance_exact(&table, &model, grid.n, 0).unwrap();
        let reps = 4000;
        let mut vals = Vec::with_capacity(reps);
        for r in 0..reps {
            let p = engine.run(&model, 31, r as u64);
            vals.push(estimate::sample_acv(&p.values, grid.n, 0).unwrap().gamma_hat[0]);
        }
        let mean: f64 = vals.iter().sum::<f64>() / reps as f64;
        let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / reps as f64;
        assert!((var / v_exact - 1.0).abs() < 0.2, "mc {var} vs exact {v_exact}");
    }
}
