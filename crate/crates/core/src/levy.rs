//! The driving Lévy process: Brownian part plus compound-Poisson jumps with
//! symmetric Pareto tails, centered so that `E[L_1] = 0`.
//!
//! Provides increment sampling, exact moment analytics, Monte Carlo tail
//! probabilities and the norming sequences `a_N` (tail quantile) and `b_N`
//! (truncated second moment) used by the stable limit regime.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{poisson_count, task_rng, Scalar};

/// Factor of the jump scale at which the bounded-jump variant caps `|J|`.
pub const BOUNDED_JUMP_CAP: f64 = 10.0;

/// Number of draws per deterministic Monte Carlo chunk. Chunked streams make
/// every MC estimate independent of the worker-thread count.
const MC_CHUNK: u64 = 1 << 16;

/// Parametric driving Lévy process.
///
/// `L_t = brownian_sd · W_t + Σ_{i≤N_t} J_i` with `N` a Poisson process of
/// rate `jump_rate` and `J` symmetric Pareto: `P[|J| > y] = min(1,(y/x₀)^{−α})`,
/// sign ±1 with probability ½. Symmetry plus zero drift force the centering
/// to vanish, so `E[L_1] = 0` holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel<T: Scalar> {
    brownian_sd: T,
    jump_rate: T,
    jump_tail_index: T,
    jump_scale: T,
    bounded_jumps: bool,
}

/// Fourth moment report: `E[L_1^4] = η σ^4` when finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FourthMoment<T> {
    Finite { value: T, eta: T },
    Infinite,
}

/// Monte Carlo tail probability estimate with its standard error and the
/// single-big-jump asymptote `λ (y/x₀)^{−α}` (absent for bounded jumps).
#[derive(Debug, Clone, Copy)]
pub struct TailEstimate<T> {
    pub estimate: T,
    pub std_error: T,
    pub asymptote: Option<T>,
}

/// How `a_N` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormingMethod {
    MonteCarlo,
    Asymptotic,
}

/// One row of the norming-sequence table.
#[derive(Debug, Clone, Copy)]
pub struct NormingRow<T> {
    pub n: u64,
    pub a_n_mc: T,
    pub a_n_asym: Option<T>,
    pub b_n: T,
    /// `(N/a_N²)(σ² − b_N)`, which converges to `α/(α−2)`.
    pub karamata_diag: T,
}

impl<T: Scalar> LevyModel<T> {
    pub fn new(
        brownian_sd: T,
        jump_rate: T,
        jump_tail_index: T,
        jump_scale: T,
        bounded_jumps: bool,
    ) -> Result<Self> {
        if brownian_sd < T::zero() || !brownian_sd.is_finite() {
            return Err(Error::Validation("brownian_sd must be >= 0".into()));
        }
        if jump_rate < T::zero() || !jump_rate.is_finite() {
            return Err(Error::Validation("jump_rate must be >= 0".into()));
        }
        if jump_rate > T::zero() {
            if jump_tail_index <= T::zero() {
                return Err(Error::Validation("jump tail index alpha must be > 0".into()));
            }
            if jump_scale <= T::zero() {
                return Err(Error::Validation("jump scale x0 must be > 0".into()));
            }
            if !bounded_jumps && jump_tail_index <= T::of(2.0) {
                return Err(Error::Validation(
                    "alpha <= 2 gives infinite variance; use bounded jumps or alpha > 2".into(),
                ));
            }
        }
        let m = LevyModel { brownian_sd, jump_rate, jump_tail_index, jump_scale, bounded_jumps };
        if m.variance() <= T::zero() {
            return Err(Error::Validation("Var(L_1) must be positive".into()));
        }
        Ok(m)
    }

    pub fn brownian(sd: T) -> Result<Self> {
        Self::new(sd, T::zero(), T::of(3.0), T::one(), false)
    }

    pub fn brownian_sd(&self) -> T {
        self.brownian_sd
    }
    pub fn jump_rate(&self) -> T {
        self.jump_rate
    }
    pub fn jump_tail_index(&self) -> T {
        self.jump_tail_index
    }
    pub fn jump_scale(&self) -> T {
        self.jump_scale
    }
    pub fn bounded_jumps(&self) -> bool {
        self.bounded_jumps
    }
    pub fn is_pure_brownian(&self) -> bool {
        self.jump_rate == T::zero()
    }

    /// Deterministic drift per unit time; symmetric jumps and `E[L_1]=0`
    /// force it to zero.
    pub fn centering(&self) -> T {
        T::zero()
    }

    /// `E[J²]` of a single jump.
    fn jump_second_moment(&self) -> T {
        let a = self.jump_tail_index;
        let x0 = self.jump_scale;
        let two = T::of(2.0);
        if !self.bounded_jumps {
            // x0² α/(α−2), finite for α > 2
            return x0 * x0 * a / (a - two);
        }
        let c = x0 * T::of(BOUNDED_JUMP_CAP);
        if (a - two).abs() < T::of(1e-12) {
            x0 * x0 * (T::one() + two * (c / x0).ln())
        } else {
            x0 * x0
                + x0.powf(a) * (c.powf(two - a) - x0.powf(two - a)) / (T::one() - a / two)
        }
    }

    /// `E[J⁴]` of a single jump, or None when infinite.
    fn jump_fourth_moment(&self) -> Option<T> {
        let a = self.jump_tail_index;
        let x0 = self.jump_scale;
        let four = T::of(4.0);
        if !self.bounded_jumps {
            if a <= four {
                return None;
            }
            return Some(x0.powf(four) * a / (a - four));
        }
        let c = x0 * T::of(BOUNDED_JUMP_CAP);
        if (a - four).abs() < T::of(1e-12) {
            Some(x0.powf(four) * (T::one() + four * (c / x0).ln()))
        } else {
            Some(
                x0.powf(four)
                    + x0.powf(a) * (c.powf(four - a) - x0.powf(four - a))
                        / (T::one() - a / four),
            )
        }
    }

    /// `σ² = Var(L_1) = brownian_sd² + λ E[J²]`.
    pub fn variance(&self) -> T {
        let mut v = self.brownian_sd * self.brownian_sd;
        if self.jump_rate > T::zero() {
            v += self.jump_rate * self.jump_second_moment();
        }
        v
    }

    /// `E[L_1⁴]` via cumulants: `κ₄ = λE[J⁴]`, `E[L⁴] = κ₄ + 3σ⁴`.
    pub fn fourth_moment(&self) -> FourthMoment<T> {
        let s2 = self.variance();
        let three = T::of(3.0);
        if self.jump_rate == T::zero() {
            return FourthMoment::Finite { value: three * s2 * s2, eta: three };
        }
        match self.jump_fourth_moment() {
            None => FourthMoment::Infinite,
            Some(j4) => {
                let value = self.jump_rate * j4 + three * s2 * s2;
                FourthMoment::Finite { value, eta: value / (s2 * s2) }
            }
        }
    }

    pub fn has_finite_fourth_moment(&self) -> bool {
        matches!(self.fourth_moment(), FourthMoment::Finite { .. })
    }

    /// §3 admissibility: pure-jump, symmetric (by construction), α ∈ (2,4),
    /// unbounded (regularly varying) jumps.
    pub fn is_stable_regime_admissible(&self) -> bool {
        self.brownian_sd == T::zero()
            && self.jump_rate > T::zero()
            && !self.bounded_jumps
            && self.jump_tail_index > T::of(2.0)
            && self.jump_tail_index < T::of(4.0)
    }

    fn sample_jump(&self, rng: &mut ChaCha8Rng) -> T {
        let u: T = T::open_closed_01(rng);
        let mut mag = self.jump_scale * u.powf(-self.jump_tail_index.recip());
        if self.bounded_jumps {
            mag = mag.min(self.jump_scale * T::of(BOUNDED_JUMP_CAP));
        }
        let sign: bool = rng.random();
        if sign {
            mag
        } else {
            -mag
        }
    }

    /// One increment of `L` over a step `dt`.
    pub fn sample_one(&self, dt: T, rng: &mut ChaCha8Rng) -> T {
        let mut x = T::zero();
        if self.brownian_sd > T::zero() {
            x += self.brownian_sd * dt.sqrt() * T::std_normal(rng);
        }
        if self.jump_rate > T::zero() {
            let n = poisson_count((self.jump_rate * dt).as_f64(), rng);
            for _ in 0..n {
                x += self.sample_jump(rng);
            }
        }
        x
    }

    /// i.i.d. increments of `L` over step `dt`, deterministic given the seed.
    pub fn sample_increments(&self, dt: T, n: usize, seed: u64) -> Result<Vec<T>> {
        if !(dt > T::zero()) {
            return Err(Error::Parameter(format!("dt must be > 0, got {dt}")));
        }
        if n == 0 {
            return Err(Error::Parameter("n must be >= 1".into()));
        }
        let mut rng = task_rng(seed, 0);
        Ok(self.sample_increments_with(dt, n, &mut rng))
    }

    pub fn sample_increments_with(&self, dt: T, n: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
        (0..n).map(|_| self.sample_one(dt, rng)).collect()
    }

    /// Chunk-parallel MC over `budget` draws of `L_dt`; `fold` maps each
    /// draw to an accumulator contribution, summed chunk-wise in index
    /// order so the result is thread-count independent.
    fn mc_sums<F>(&self, dt: T, budget: u64, seed: u64, fold: F) -> Vec<(f64, f64)>
    where
        F: Fn(T) -> (f64, f64) + Sync,
    {
        let chunks = budget.div_ceil(MC_CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = task_rng(seed, c);
                let len = MC_CHUNK.min(budget - c * MC_CHUNK);
                let mut s0 = 0.0;
                let mut s1 = 0.0;
                for _ in 0..len {
                    let (a, b) = fold(self.sample_one(dt, &mut rng));
                    s0 += a;
                    s1 += b;
                }
                (s0, s1)
            })
            .collect()
    }

    /// Monte Carlo estimate of `P[|L_1| > y]`.
    pub fn tail_probability(&self, y: T, sample_budget: u64, seed: u64) -> Result<TailEstimate<T>> {
        if sample_budget == 0 {
            return Err(Error::Parameter("sample budget must be >= 1".into()));
        }
        if !(y > T::zero()) {
            return Err(Error::Parameter("threshold y must be > 0".into()));
        }
        let yy = y;
        let sums = self.mc_sums(T::one(), sample_budget, seed, move |x| {
            if x.abs() > yy {
                (1.0, 0.0)
            } else {
                (0.0, 0.0)
            }
        });
        let hits: f64 = sums.iter().map(|s| s.0).sum();
        let b = sample_budget as f64;
        let p = hits / b;
        let se = (p * (1.0 - p) / b).sqrt();
        let asymptote = if self.jump_rate > T::zero() && !self.bounded_jumps {
            Some(self.jump_rate * T::one().min((y / self.jump_scale).powf(-self.jump_tail_index)))
        } else {
            None
        };
        Ok(TailEstimate { estimate: T::of(p), std_error: T::of(se), asymptote })
    }

    /// Closed-form asymptote `a_N ≈ x₀ (λN)^{1/α}` (regular variation).
    pub fn norming_a_asymptotic(&self, n: u64) -> Result<T> {
        if self.jump_rate <= T::zero() || self.bounded_jumps {
            return Err(Error::Domain(
                "asymptotic a_N needs unbounded regularly varying jumps".into(),
            ));
        }
        Ok(self.jump_scale
            * (self.jump_rate * T::of(n as f64)).powf(self.jump_tail_index.recip()))
    }

    /// `a_N = inf{y : P[|L_dt| > y] < 1/N}` by bisection on the Monte Carlo
    /// tail CDF (relative tolerance 1e-3). Deterministic given the seed and
    /// independent of thread count.
    pub fn norming_a_mc(&self, dt: T, n: u64, sample_budget: u64, seed: u64) -> Result<T> {
        if n == 0 {
            return Err(Error::Parameter("N must be >= 1".into()));
        }
        if sample_budget < 100 * n {
            return Err(Error::Resolution(format!(
                "budget {sample_budget} cannot resolve the 1/{n} tail; need >= {}",
                100 * n
            )));
        }
        // Reservoir of top |L| values: keep everything above a threshold,
        // lowering the threshold and re-running (same streams) if the
        // reservoir missed the quantile.
        let chunks = sample_budget.div_ceil(MC_CHUNK);
        let needed = (sample_budget as f64 / n as f64).ceil() as usize + 8;
        let mut threshold: f64 = if sample_budget as usize <= 1_000_000 {
            0.0
        } else {
            match self.norming_a_asymptotic(n) {
                Ok(a) => a.as_f64() / 4.0,
                Err(_) => 0.0,
            }
        };
        loop {
            let thr = threshold;
            let mut kept: Vec<f64> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = task_rng(seed, c);
                    let len = MC_CHUNK.min(sample_budget - c * MC_CHUNK);
                    let mut top = Vec::new();
                    for _ in 0..len {
                        let v = self.sample_one(dt, &mut rng).abs().as_f64();
                        if v > thr {
                            top.push(v);
                        }
                    }
                    top
                })
                .flatten()
                .collect();
            if kept.len() < needed && threshold > 0.0 {
                threshold /= 4.0;
                continue;
            }
            kept.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            let b = sample_budget as f64;
            let target = 1.0 / n as f64;
            let count_gt = |y: f64| -> f64 {
                let idx = kept.partition_point(|&v| v <= y);
                (kept.len() - idx) as f64
            };
            // P[|L| > 0] < 1/N already? then a_N = 0 (atom at zero).
            if (kept.len() as f64) / b < target && threshold == 0.0 {
                return Ok(T::zero());
            }
            let mut lo = 0.0f64;
            let mut hi = kept.last().copied().unwrap_or(0.0) + 1.0;
            // invariant: P̂[|L|>lo] >= 1/N > P̂[|L|>hi]
            if count_gt(lo.max(thr)) / b < target && threshold > 0.0 {
                // quantile below the reservoir floor: lower it and re-run
                threshold /= 4.0;
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count_gt(mid) / b < target {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-3 * hi.abs().max(1e-12) {
                    break;
                }
            }
            return Ok(T::of(hi));
        }
    }

    /// Truncated second moment `b_N = E[L_1² 1{|L_1| ≤ a_N}]` by MC,
    /// with its standard error.
    pub fn norming_b(&self, a_n: T, sample_budget: u64, seed: u64) -> Result<(T, T)> {
        if a_n < T::zero() {
            return Err(Error::Parameter("a_N must be >= 0".into()));
        }
        if sample_budget == 0 {
            return Err(Error::Parameter("sample budget must be >= 1".into()));
        }
        let sums = self.mc_sums(T::one(), sample_budget, seed, move |x| {
            if x.abs() <= a_n {
                let v = (x * x).as_f64();
                (v, v * v)
            } else {
                (0.0, 0.0)
            }
        });
        let b = sample_budget as f64;
        let s1: f64 = sums.iter().map(|s| s.0).sum();
        let s2: f64 = sums.iter().map(|s| s.1).sum();
        let mean = s1 / b;
        let var = (s2 / b - mean * mean).max(0.0);
        Ok((T::of(mean), T::of((var / b).sqrt())))
    }

    /// Norming-sequence table rows for a list of N values.
    pub fn norming_table(
        &self,
        ns: &[u64],
        budget_mult: u64,
        seed: u64,
    ) -> Result<Vec<NormingRow<T>>> {
        let sigma2 = self.variance();
        ns.iter()
            .enumerate()
            .map(|(i, &n)| {
                let budget = budget_mult.max(100) * n;
                let a_mc = self.norming_a_mc(T::one(), n, budget, seed.wrapping_add(i as u64))?;
                let (b_n, _) = self.norming_b(a_mc, budget, seed.wrapping_add(1000 + i as u64))?;
                let diag = if a_mc > T::zero() {
                    T::of(n as f64) / (a_mc * a_mc) * (sigma2 - b_n)
                } else {
                    T::zero()
                };
                Ok(NormingRow {
                    n,
                    a_n_mc: a_mc,
                    a_n_asym: self.norming_a_asymptotic(n).ok(),
                    b_n,
                    karamata_diag: diag,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pareto_model(alpha: f64) -> LevyModel<f64> {
        LevyModel::new(0.0, 1.0, alpha, 1.0, false).unwrap()
    }

    #[test]
    fn pure_gaussian_moments() {
        let m = LevyModel::brownian(1.0).unwrap();
        assert_eq!(m.variance(), 1.0);
        match m.fourth_moment() {
            FourthMoment::Finite { eta, .. } => assert_relative_eq!(eta, 3.0),
            _ => panic!("gaussian has finite fourth moment"),
        }
        let z = m.sample_increments(1.0, 1_000_000, 42).unwrap();
        let mean: f64 = z.iter().sum::<f64>() / z.len() as f64;
        let var: f64 = z.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / z.len() as f64;
        let se = 1.0 / (z.len() as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean}");
        assert!((var - 1.0).abs() < 3.0 * (2.0 / z.len() as f64).sqrt(), "var {var}");
    }

    #[test]
    fn pareto_second_moment_closed_form_and_quadrature() {
        // E[J²] = x0² α/(α−2) = 5 at α = 2.5, cross-checked by numeric
        // integration of the jump density α x0^α y^{−α−1}
        let m = pareto_model(2.5);
        assert_relative_eq!(m.variance(), 5.0, max_relative = 1e-12);
        let alpha = 2.5;
        let f = move |y: f64| y * y * alpha * y.powf(-alpha - 1.0);
        // ∫_1^∞ via y = u^{-1/(α-2)} flattening: just integrate far enough
        let mut acc = 0.0;
        let mut lo = 1.0;
        for _ in 0..60 {
            let hi = lo * 2.0;
            acc += crate::quad::integrate_rel(&f, lo, hi, 1e-10).unwrap();
            lo = hi;
        }
        assert_relative_eq!(acc, 5.0, max_relative = 1e-6);
    }

    #[test]
    fn pareto_sample_variance_matches() {
        let m = pareto_model(2.5);
        let z = m.sample_increments(1.0, 1_000_000, 7).unwrap();
        let var: f64 = z.iter().map(|x| x * x).sum::<f64>() / z.len() as f64;
        // heavy-tailed fluctuation scale ~ N^{2/α−1}; generous band
        assert!((var - 5.0).abs() < 1.0, "sample variance {var}");
    }

    #[test]
    fn fourth_moment_regimes() {
        assert_eq!(pareto_model(2.5).fourth_moment(), FourthMoment::Infinite);
        let m5 = pareto_model(5.0);
        match m5.fourth_moment() {
            FourthMoment::Finite { value, .. } => {
                // λE[J⁴] + 3(λE[J²])²  = 5/1 * 1 + 3*(5/3)^2
                let ej4 = 5.0 / (5.0 - 4.0);
                let ej2 = 5.0 / (5.0 - 2.0);
                assert_relative_eq!(value, ej4 + 3.0 * ej2 * ej2, max_relative = 1e-12);
            }
            _ => panic!("alpha=5 has finite fourth moment"),
        }
        // bounded-jump variant always finite
        let mb = LevyModel::new(0.0, 1.0, 2.5, 1.0, true).unwrap();
        assert!(mb.has_finite_fourth_moment());
    }

    #[test]
    fn bounded_moments_match_mc() {
        let m = LevyModel::new(0.0, 1.0, 2.5, 1.0, true).unwrap();
        let z = m.sample_increments(1.0, 400_000, 3).unwrap();
        let v_mc: f64 = z.iter().map(|x| x * x).sum::<f64>() / z.len() as f64;
        assert_relative_eq!(v_mc, m.variance(), max_relative = 0.05);
        let m4_mc: f64 = z.iter().map(|x| x.powi(4)).sum::<f64>() / z.len() as f64;
        match m.fourth_moment() {
            FourthMoment::Finite { value, .. } => {
                assert_relative_eq!(m4_mc, value, max_relative = 0.15)
            }
            _ => panic!(),
        }
    }

    #[test]
    fn determinism_contract() {
        let m = pareto_model(3.0);
        let a = m.sample_increments(1.0, 5, 99).unwrap();
        let b = m.sample_increments(1.0, 5, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_parameters() {
        let m = pareto_model(3.0);
        assert!(m.sample_increments(0.0, 5, 1).is_err());
        assert!(m.sample_increments(1.0, 0, 1).is_err());
        assert!(LevyModel::new(0.0, 1.0, 1.5, 1.0, false).is_err()); // infinite variance
        assert!(LevyModel::new(0.0, 0.0, 2.5, 1.0, false).is_err()); // zero variance
    }

    #[test]
    fn tail_probability_gaussian_closed_form() {
        // P[|N(0,1)| > 3] = 2 Φ̄(3) ≈ 0.0026998
        let m = LevyModel::brownian(1.0).unwrap();
        let t = m.tail_probability(3.0, 2_000_000, 5).unwrap();
        assert!((t.estimate - 0.0026998f64).abs() < 4.0 * t.std_error + 2e-4);
        assert!(t.asymptote.is_none());
    }

    #[test]
    fn tail_probability_bounds_pure_jump() {
        let m = pareto_model(2.5);
        let t = m.tail_probability(1e-9, 200_000, 6).unwrap();
        let lower = 1.0 - (-1.0f64).exp();
        assert!(t.estimate <= 1.0 && t.estimate >= lower - 0.01, "{}", t.estimate);
    }

    #[test]
    fn single_big_jump_equivalence() {
        let m = pareto_model(2.5);
        for &y in &[10.0, 30.0] {
            let t = m.tail_probability(y, 4_000_000, 8).unwrap();
            let asym = t.asymptote.unwrap();
            let ratio = t.estimate / asym;
            assert!((ratio - 1.0).abs() < 0.25, "y={y}: ratio {ratio}");
        }
    }

    #[test]
    fn norming_a_atom_at_zero() {
        // pure jump, N = 1: P[|L1| > 0] = 1 − e^{−λ} < 1 so a_1 = 0
        let m = pareto_model(2.5);
        let a = m.norming_a_mc(1.0, 1, 1000, 3).unwrap();
        assert_eq!(a, 0.0);
    }

    #[test]
    fn norming_a_matches_asymptote() {
        let m = pareto_model(2.5);
        let n = 10_000;
        let a_asym = m.norming_a_asymptotic(n).unwrap();
        assert_relative_eq!(a_asym, 1e4f64.powf(0.4), max_relative = 1e-12);
        let a_mc = m.norming_a_mc(1.0, n, 2_000_000, 11).unwrap();
        assert!((a_mc / a_asym - 1.0).abs() < 0.10, "mc {a_mc} vs asym {a_asym}");
    }

    #[test]
    fn norming_a_regular_variation() {
        // a_{2N}/a_N → 2^{1/α}
        let m = pareto_model(2.5);
        for &n in &[1000u64, 10_000] {
            let a1 = m.norming_a_mc(1.0, n, 400 * n, 13).unwrap();
            let a2 = m.norming_a_mc(1.0, 2 * n, 400 * n, 13).unwrap();
            let target = 2.0f64.powf(1.0 / 2.5);
            assert!((a2 / a1 / target - 1.0).abs() < 0.1, "n={n}: {}", a2 / a1);
        }
    }

    #[test]
    fn norming_a_budget_error() {
        let m = pareto_model(2.5);
        assert!(matches!(
            m.norming_a_mc(1.0, 1000, 999, 1),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn norming_b_limits() {
        let m = pareto_model(2.5);
        // a_N → ∞ ⇒ b_N → σ²
        let (b, se) = m.norming_b(1e9, 400_000, 17).unwrap();
        assert!((b - 5.0).abs() < 6.0 * se + 0.5, "b {b} se {se}");
        // a_N = 0 ⇒ b_N = 0
        let (b0, _) = m.norming_b(0.0, 10_000, 18).unwrap();
        assert_eq!(b0, 0.0);
    }

    #[test]
    fn increments_additivity_ks() {
        // sum of m increments at step 1/m matches one increment at step 1
        let m = pareto_model(2.5);
        let mesh = 4;
        let n = 100_000;
        let fine = m.sample_increments(0.25, mesh * n, 21).unwrap();
        let coarse = m.sample_increments(1.0, n, 22).unwrap();
        let summed: Vec<f64> = fine.chunks(mesh).map(|c| c.iter().sum()).collect();
        let ks = crate::mc::ks_two_sample(&summed, &coarse).unwrap();
        assert!(ks <= 0.02, "KS {ks}");
    }

    #[test]
    fn variance_matches_sample_variance() {
        let m = LevyModel::new(0.5, 2.0, 3.5, 0.7, false).unwrap();
        let z = m.sample_increments(1.0, 500_000, 23).unwrap();
        let var: f64 = z.iter().map(|x| x * x).sum::<f64>() / z.len() as f64;
        // 4 MC standard errors with a heavy-tail allowance
        let se = (2.0f64 / z.len() as f64).sqrt() * m.variance() * 3.0;
        assert!((var - m.variance()).abs() < 4.0 * se + 0.1, "var {var} vs {}", m.variance());
    }
}
