//! Sample autocovariance / autocorrelation, the long-memory estimator `d̂`,
//! and classification of the limit regime with its parameters.

use crate::error::{Error, Result};
use crate::kernel::{self, GOptions, KernelSpec};
use crate::levy::{FourthMoment, LevyModel};
use crate::limits::{GaussianLimit, LimitLaw, RateSpec, Regime, RosenblattLimit, StableLimit};
use crate::scalar::Scalar;

/// Sample autocovariances `γ̂_N(h) = (1/N) Σ_{t=1}^N X_t X_{t+h}` for
/// h = 0..H (divisor N; summands reach index N+H).
#[derive(Debug, Clone)]
pub struct AcvEstimate<T> {
    pub n: usize,
    pub gamma_hat: Vec<T>,
    /// Theoretical γ(h) when filled in by the caller.
    pub gamma: Option<Vec<T>>,
}

pub fn sample_acv<T: Scalar>(values: &[T], n: usize, h_max: usize) -> Result<AcvEstimate<T>> {
    if n == 0 {
        return Err(Error::Parameter("N must be >= 1".into()));
    }
    if values.len() < n + h_max {
        return Err(Error::Parameter(format!(
            "path holds {} values; need N+H = {}",
            values.len(),
            n + h_max
        )));
    }
    let gamma_hat = (0..=h_max)
        .map(|h| {
            let mut acc = T::zero();
            for t in 0..n {
                acc += values[t] * values[t + h];
            }
            acc / T::of_usize(n)
        })
        .collect::<Vec<_>>();
    // realized-path sanity: γ̂(0) is a mean of squares
    debug_assert!(gamma_hat[0] >= T::zero());
    Ok(AcvEstimate { n, gamma_hat, gamma: None })
}

/// `ρ̂(h) = γ̂(h)/γ̂(0)`.
pub fn sample_acf<T: Scalar>(acv: &AcvEstimate<T>) -> Result<Vec<T>> {
    let g0 = acv.gamma_hat[0];
    if g0 == T::zero() {
        return Err(Error::Domain("degenerate path: gamma_hat(0) = 0".into()));
    }
    Ok(acv.gamma_hat.iter().map(|&g| g / g0).collect())
}

/// The long-memory estimator value with its in-range flag (no clamping).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DEstimate<T> {
    pub value: T,
    pub in_range: bool,
}

/// `d̂ = log(ρ̂(1)+1) / (2 log 2)`.
pub fn estimate_d<T: Scalar>(rho1: T) -> Result<DEstimate<T>> {
    if rho1 <= -T::one() {
        return Err(Error::Domain(format!("rho(1) must exceed -1, got {rho1}")));
    }
    let value = (rho1 + T::one()).ln() / (T::of(2.0) * T::of(2.0).ln());
    let in_range = value > T::zero() && value < T::of(0.5);
    Ok(DEstimate { value, in_range })
}

/// Options for the theoretical limit computation.
#[derive(Debug, Clone, Copy)]
pub struct LimitOptions<T> {
    pub quad_tol: T,
    /// Hard cap for the lag sum in the Gaussian covariance.
    pub k_v_max: usize,
    /// Target relative tail bound for the lag sum (vs v_00).
    pub v_tail_rel: T,
}

impl<T: Scalar> Default for LimitOptions<T> {
    fn default() -> Self {
        LimitOptions {
            quad_tol: T::of(1e-8),
            k_v_max: 4096,
            v_tail_rel: T::of(1e-6),
        }
    }
}

const BOUNDARY_EPS: f64 = 1e-9;

/// Decide the limit regime from `(d, α, fourth-moment flag)` and compute
/// its parameters: Gaussian covariance matrix `V`, Rosenblatt coefficient
/// and rate, or the stable triple with the drift correction.
pub fn theoretical_limits<T: Scalar>(
    kernel_spec: &KernelSpec<T>,
    model: &LevyModel<T>,
    h_max: usize,
    opts: &LimitOptions<T>,
) -> Result<LimitLaw<T>> {
    if !kernel_spec.is_long_memory() {
        return Err(Error::Domain(
            "the indicator kernel has no long-memory tail; no regime applies".into(),
        ));
    }
    let d = kernel_spec.d().as_f64();
    let quarter_gap = d - 0.25;
    let finite4 = model.has_finite_fourth_moment();

    if finite4 {
        if quarter_gap.abs() <= BOUNDARY_EPS {
            if model.is_pure_brownian() {
                // Brownian d = 1/4: rate sqrt(N/log N), limit 2 C_d² σ² Z(1,…,1)
                let c = kernel_spec.c_d() * kernel_spec.c_d() * model.variance();
                let two_c = T::of(2.0) * c;
                let v = vec![vec![two_c * two_c; h_max + 1]; h_max + 1];
                return Ok(LimitLaw {
                    regime: Regime::Gaussian,
                    rate: RateSpec::SqrtNOverLogN,
                    gaussian: Some(GaussianLimit { covariance: v }),
                    rosenblatt: None,
                    stable: None,
                    boundary_reason: None,
                    hosking_case: true,
                });
            }
            return Ok(LimitLaw::boundary(
                "d = 1/4 with a non-Brownian driver: no limit law is claimed".into(),
            ));
        }
        if quarter_gap > 0.0 {
            return Ok(rosenblatt_law(kernel_spec, model));
        }
        // d < 1/4: Gaussian regime
        let v = gaussian_covariance(kernel_spec, model, h_max, opts)?;
        return Ok(LimitLaw {
            regime: Regime::Gaussian,
            rate: RateSpec::SqrtN,
            gaussian: Some(GaussianLimit { covariance: v }),
            rosenblatt: None,
            stable: None,
            boundary_reason: None,
            hosking_case: false,
        });
    }

    // infinite fourth moment: §3 applies to admissible models
    if !model.is_stable_regime_admissible() {
        return Ok(LimitLaw::boundary(
            "infinite fourth moment but not §3-admissible (needs pure-jump symmetric, alpha in (2,4))"
                .into(),
        ));
    }
    let alpha = model.jump_tail_index().as_f64();
    let inv_alpha = 1.0 / alpha;
    if (d - inv_alpha).abs() <= BOUNDARY_EPS {
        return Ok(LimitLaw::boundary(format!(
            "d = 1/alpha = {inv_alpha}: the regime depends on the slowly varying part"
        )));
    }
    if d > inv_alpha {
        return Ok(rosenblatt_law(kernel_spec, model));
    }
    let params = crate::limits::stable_limit_params(model, T::one())?;
    Ok(LimitLaw {
        regime: Regime::Stable,
        rate: RateSpec::NOverAn2,
        gaussian: None,
        rosenblatt: None,
        stable: Some(StableLimit {
            alpha_half: T::of(alpha / 2.0),
            tau: params.tau,
            beta: params.beta,
            mu: params.mu,
            drift: params.mu,
        }),
        boundary_reason: None,
        hosking_case: false,
    })
}

fn rosenblatt_law<T: Scalar>(kernel_spec: &KernelSpec<T>, model: &LevyModel<T>) -> LimitLaw<T> {
    let d = kernel_spec.d();
    LimitLaw {
        regime: Regime::Rosenblatt,
        rate: RateSpec::NPow(T::one() - T::of(2.0) * d),
        gaussian: None,
        rosenblatt: Some(RosenblattLimit {
            d,
            coefficient: kernel_spec.c_d() * kernel_spec.c_d() * model.variance(),
        }),
        stable: None,
        boundary_reason: None,
        hosking_case: false,
    }
}

/// Gaussian-regime covariance
/// `v_pq = (η−3)σ⁴ ∫_0^1 G_p G_q + Σ_k [γ(k)γ(k−p+q) + γ(k+q)γ(k−p)]`,
/// with the lag sum truncated at `K_v` plus an integral tail correction;
/// `K_v` is chosen so the raw tail bound is ≤ `v_tail_rel · v_00`.
pub fn gaussian_covariance<T: Scalar>(
    kernel_spec: &KernelSpec<T>,
    model: &LevyModel<T>,
    h_max: usize,
    opts: &LimitOptions<T>,
) -> Result<Vec<Vec<T>>> {
    let sigma2 = model.variance();
    let eta = match model.fourth_moment() {
        FourthMoment::Finite { eta, .. } => eta,
        FourthMoment::Infinite => {
            return Err(Error::Domain("gaussian covariance needs finite fourth moments".into()))
        }
    };
    let d = kernel_spec.d();
    let two = T::of(2.0);

    // choose K_v from the tail bound Σ_{k>K} γ(k)² ≲ B² K^{4d−1}/(1−4d):
    // with the integral correction applied the residual is far smaller, so
    // a moderate K_v suffices; scale from the requested relative bound.
    let k_v = {
        let four_d = 4.0 * d.as_f64();
        if four_d < 1.0 {
            let t = opts.v_tail_rel.as_f64().max(1e-10);
            (t.powf(1.0 / (four_d - 1.0 - 2.0)).ceil() as usize).clamp(64, opts.k_v_max)
        } else {
            opts.k_v_max
        }
    };

    // γ(k) for k = 0..K_v + h_max
    let mut gam = Vec::with_capacity(k_v + h_max + 1);
    for k in 0..=(k_v + h_max) {
        gam.push(kernel::autocovariance(
            kernel_spec,
            sigma2,
            T::of_usize(k),
            opts.quad_tol,
        )?);
    }
    let gamma_at = |k: i64| -> Result<T> {
        let a = k.unsigned_abs() as usize;
        if a < gam.len() {
            Ok(gam[a])
        } else {
            kernel::autocovariance(kernel_spec, sigma2, T::of(a as f64), opts.quad_tol)
        }
    };

    let g_opts = GOptions { i_max: 1_000_000, tol: opts.quad_tol };
    let mut v = vec![vec![T::zero(); h_max + 1]; h_max + 1];
    for p in 0..=h_max {
        for q in p..=h_max {
            // lag sum with integral tail correction on both sides
            let mut s = T::zero();
            let kk = k_v as i64;
            for k in -kk..=kk {
                s += gamma_at(k)? * gamma_at(k - p as i64 + q as i64)?
                    + gamma_at(k + q as i64)? * gamma_at(k - p as i64)?;
            }
            // Euler–Maclaurin tails: both product sequences decay like
            // C² B² |k|^{2(2d−1)}; approximate by the integral of the
            // asymptote beyond K_v on each side.
            let tail = lag_sum_tail(kernel_spec, sigma2, k_v, p as i64, q as i64)?;
            s += tail;

            let mut vpq = s;
            if (eta - T::of(3.0)).abs() > T::epsilon() {
                let g_term = integrate_g_product(kernel_spec, p, q, &g_opts)?;
                vpq += (eta - T::of(3.0)) * sigma2 * sigma2 * g_term;
            }
            v[p][q] = vpq;
            v[q][p] = vpq;
            let _ = two;
        }
    }
    Ok(v)
}

fn lag_sum_tail<T: Scalar>(
    kernel_spec: &KernelSpec<T>,
    sigma2: T,
    k_v: usize,
    p: i64,
    q: i64,
) -> Result<T> {
    // ∫_{K_v+1/2}^∞ [γ(x)γ(x−p+q) + γ(x+q)γ(x−p)] dx on both wings, using
    // the power asymptote γ(x) ≈ σ² C² B x^{2d−1} with
    // B = B(d, 1−2d) = Γ(d)Γ(1−2d)/Γ(1−d).
    let d = kernel_spec.d();
    let c = kernel_spec.c_d();
    if c == T::zero() {
        return Ok(T::zero());
    }
    let one = T::one();
    let two = T::of(2.0);
    let b = d.gamma_fn() * (one - two * d).gamma_fn() / (one - d).gamma_fn();
    let amp = sigma2 * c * c * b;
    let expo = two * d - one; // γ ~ amp x^expo
    let lower = T::of_usize(k_v) + T::of(0.5);
    // each wing term is ∫_L^∞ (x+a1)^e (x+a2)^e dx ≈ ∫ (x+(a1+a2)/2)^{2e};
    // both products in one wing share the same midpoint shift, and the two
    // wings mirror each other with p and q swapped
    let wing = |shift: T| -> T {
        let l = lower + shift;
        amp * amp * l.powf(two * expo + one) / -(two * expo + one)
    };
    let half_gap = (T::of(q as f64) - T::of(p as f64)) / two;
    Ok(two * wing(half_gap) + two * wing(-half_gap))
}

fn integrate_g_product<T: Scalar>(
    kernel_spec: &KernelSpec<T>,
    p: usize,
    q: usize,
    g_opts: &GOptions<T>,
) -> Result<T> {
    // midpoint rule over s ∈ (0,1); G is bounded and piecewise smooth
    let n = 96;
    let mut acc = T::zero();
    for i in 0..n {
        let s = (T::of_usize(i) + T::of(0.5)) / T::of_usize(n);
        let gp = kernel::g_fn(kernel_spec, p, s, g_opts)?.value;
        let gq = if q == p { gp } else { kernel::g_fn(kernel_spec, q, s, g_opts)?.value };
        acc += gp * gq;
    }
    Ok(acc / T::of_usize(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn acv_constant_and_alternating() {
        let ones = vec![1.0f64; 20];
        let acv = sample_acv(&ones, 16, 4).unwrap();
        for h in 0..=4 {
            assert_relative_eq!(acv.gamma_hat[h], 1.0, max_relative = 1e-12);
        }
        let alt: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let acv = sample_acv(&alt, 16, 3).unwrap();
        for h in 0..=3 {
            let expect = if h % 2 == 0 { 1.0 } else { -1.0 };
            assert_relative_eq!(acv.gamma_hat[h], expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn acv_matches_naive_double_loop() {
        let mut rng = crate::scalar::task_rng(3, 0);
        let values: Vec<f64> = (0..68).map(|_| f64::std_normal(&mut rng)).collect();
        let n = 64;
        let acv = sample_acv(&values, n, 4).unwrap();
        for h in 0..=4usize {
            let mut acc = 0.0;
            for t in 0..n {
                acc += values[t] * values[t + h];
            }
            let naive = acc / n as f64;
            assert!((acv.gamma_hat[h] - naive).abs() <= 1e-12 * naive.abs().max(1.0));
        }
    }

    #[test]
    fn acv_length_check() {
        assert!(sample_acv(&[1.0f64; 10], 8, 4).is_err());
    }

    #[test]
    fn acf_basics() {
        let ones = vec![1.0f64; 12];
        let acv = sample_acv(&ones, 8, 3).unwrap();
        let acf = sample_acf(&acv).unwrap();
        for r in acf {
            assert_relative_eq!(r, 1.0, max_relative = 1e-12);
        }
        let zero = vec![0.0f64; 12];
        let acv = sample_acv(&zero, 8, 2).unwrap();
        assert!(matches!(sample_acf(&acv), Err(Error::Domain(_))));
    }

    #[test]
    fn d_hat_formula_points() {
        assert_relative_eq!(estimate_d(0.0f64).unwrap().value, 0.0, epsilon = 1e-15);
        assert_relative_eq!(estimate_d(1.0f64).unwrap().value, 0.5, max_relative = 1e-12);
        let rho = 2.0f64.powf(0.6) - 1.0;
        assert_relative_eq!(estimate_d(rho).unwrap().value, 0.3, max_relative = 1e-12);
        assert!(estimate_d(-1.0f64).is_err());
        // flagging
        assert!(!estimate_d(-0.3f64).unwrap().in_range);
        assert!(estimate_d(0.5f64).unwrap().in_range);
    }

    #[test]
    fn regime_classification() {
        let opts = LimitOptions::default();
        let brown = LevyModel::brownian(1.0).unwrap();
        // d = 0.35, finite 4th: Rosenblatt with exponent 0.30
        let k = KernelSpec::power_law(0.35, 1.0).unwrap();
        let law = theoretical_limits(&k, &brown, 2, &opts).unwrap();
        assert_eq!(law.regime, Regime::Rosenblatt);
        match law.rate {
            RateSpec::NPow(e) => assert_relative_eq!(e, 0.30, max_relative = 1e-12),
            _ => panic!(),
        }
        // α = 2.5, d = 0.1: stable since d < 1/α
        let jumpy = LevyModel::new(0.0, 1.0, 2.5, 1.0, false).unwrap();
        let k = KernelSpec::power_law(0.1, 1.0).unwrap();
        let law = theoretical_limits(&k, &jumpy, 0, &opts).unwrap();
        assert_eq!(law.regime, Regime::Stable);
        // α = 2.5, d = 0.45 > 1/α: Rosenblatt
        let k = KernelSpec::power_law(0.45, 1.0).unwrap();
        assert_eq!(theoretical_limits(&k, &jumpy, 0, &opts).unwrap().regime, Regime::Rosenblatt);
        // boundary d = 1/α
        let k = KernelSpec::power_law(0.4, 1.0).unwrap();
        assert_eq!(theoretical_limits(&k, &jumpy, 0, &opts).unwrap().regime, Regime::Boundary);
        // d = 1/4 Brownian: Hosking case, gaussian with sqrt(N/log N)
        let k = KernelSpec::power_law(0.25, 1.0).unwrap();
        let law = theoretical_limits(&k, &brown, 1, &opts).unwrap();
        assert_eq!(law.regime, Regime::Gaussian);
        assert!(law.hosking_case);
        assert_eq!(law.rate, RateSpec::SqrtNOverLogN);
        // d = 1/4 non-Brownian finite-4th: boundary
        let bounded = LevyModel::new(0.0, 1.0, 2.5, 1.0, true).unwrap();
        assert_eq!(
            theoretical_limits(&k, &bounded, 0, &opts).unwrap().regime,
            Regime::Boundary
        );
    }

    #[test]
    fn gaussian_covariance_brownian_kills_g_term() {
        // Brownian: η = 3, so v_00 = 2 Σ_k γ(k)²
        let brown = LevyModel::brownian(1.0).unwrap();
        let k = KernelSpec::power_law(0.2, 1.0).unwrap();
        let opts = LimitOptions { k_v_max: 512, ..LimitOptions::default() };
        let v = gaussian_covariance(&k, &brown, 0, &opts).unwrap();
        // independent check: direct sum of γ(k)² (coarser truncation)
        let mut s = 0.0;
        for kk in -2048i64..=2048 {
            let g = kernel::autocovariance(&k, 1.0, kk.abs() as f64, 1e-8).unwrap();
            s += g * g;
        }
        // the coarser direct sum still misses some tail; compare loosely
        assert!((v[0][0] - 2.0 * s).abs() / v[0][0] < 0.02, "{} vs {}", v[0][0], 2.0 * s);
        assert!(v[0][0] > 2.0 * s - 1e-9, "tail correction should exceed the direct sum");
    }

    #[test]
    fn gaussian_covariance_frozen_value() {
        // frozen oracle (scipy): v_00 = 131.65 for PowerLaw d = 0.15, σ² = 1
        let brown = LevyModel::brownian(1.0).unwrap();
        let k = KernelSpec::power_law(0.15, 1.0).unwrap();
        let v = gaussian_covariance(&k, &brown, 0, &LimitOptions::default()).unwrap();
        assert_relative_eq!(v[0][0], 131.6516, max_relative = 5e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn scale_equivariance(c in 0.1f64..10.0, seed in 0u64..1000) {
            let mut rng = crate::scalar::task_rng(seed, 0);
            let x: Vec<f64> = (0..40).map(|_| f64::std_normal(&mut rng)).collect();
            let xs: Vec<f64> = x.iter().map(|v| v * c).collect();
            let n = 32;
            let a = sample_acv(&x, n, 4).unwrap();
            let b = sample_acv(&xs, n, 4).unwrap();
            for h in 0..=4 {
                prop_assert!((b.gamma_hat[h] - c * c * a.gamma_hat[h]).abs()
                    <= 1e-12 * (1.0 + b.gamma_hat[h].abs()));
            }
            let ra = sample_acf(&a).unwrap();
            let rb = sample_acf(&b).unwrap();
            for h in 0..=4 {
                prop_assert!((ra[h] - rb[h]).abs() <= 1e-12);
            }
            let da = estimate_d(ra[1]).unwrap().value;
            let db = estimate_d(rb[1]).unwrap().value;
            prop_assert!((da - db).abs() <= 1e-12);
        }

        #[test]
        fn d_hat_monotone(r1 in -0.99f64..3.0, r2 in -0.99f64..3.0) {
            prop_assume!(r1 < r2);
            let d1 = estimate_d(r1).unwrap().value;
            let d2 = estimate_d(r2).unwrap().value;
            prop_assert!(d1 < d2);
        }

        #[test]
        fn regime_step_function_of_d(di in 1usize..48) {
            // regime flips only at d = 1/4 (finite 4th) and d = 1/α
            let d = di as f64 / 100.0;
            let opts = LimitOptions { k_v_max: 64, ..LimitOptions::default() };
            let brown = LevyModel::brownian(1.0).unwrap();
            let k = KernelSpec::power_law(d, 1.0).unwrap();
            let law = theoretical_limits(&k, &brown, 0, &opts).unwrap();
            let expect = if (d - 0.25).abs() < 1e-12 {
                Regime::Gaussian // Brownian quarter case (Hosking)
            } else if d < 0.25 {
                Regime::Gaussian
            } else {
                Regime::Rosenblatt
            };
            prop_assert_eq!(law.regime, expect);
            let jumpy = LevyModel::new(0.0, 1.0, 2.5, 1.0, false).unwrap();
            let law = theoretical_limits(&k, &jumpy, 0, &opts).unwrap();
            let expect = if (d - 0.4).abs() < 1e-12 {
                Regime::Boundary
            } else if d < 0.4 {
                Regime::Stable
            } else {
                Regime::Rosenblatt
            };
            prop_assert_eq!(law.regime, expect);
        }
    }
}
