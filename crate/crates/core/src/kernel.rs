//! Kernel functions `f` for the moving average: `f = 0` on `(−∞,0]`,
//! bounded, with regularly varying tail `f(t) ~ C_d t^{d−1}`, `d ∈ (0,½)`.
//!
//! Families: the canonical bounded power law, the fractional-Lévy-noise
//! increment kernel, FICARMA(p,d,q) kernels (Riemann–Liouville fractional
//! integral of a CARMA kernel), and a compactly supported indicator kernel
//! used only by tests (it violates the tail assumption).

use std::sync::OnceLock;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::poly;
use crate::quad::integrate_rel;
use crate::scalar::Scalar;

/// CARMA(p,q) kernel `g(t) = Σ_j b(λ_j)/a'(λ_j) e^{λ_j t}` over the roots
/// `λ_j` of the monic autoregressive polynomial.
#[derive(Debug, Clone)]
pub struct CarmaKernel<T: Scalar> {
    /// `[a_1, …, a_p]`: a(z) = z^p + a_1 z^{p−1} + … + a_p.
    pub a: Vec<T>,
    /// `[b_0, …, b_q]` (low to high), q < p, b_q ≠ 0.
    pub b: Vec<T>,
    roots: Vec<Complex<T>>,
    residues: Vec<Complex<T>>,
    /// min_j −Re λ_j > 0.
    decay: T,
    residue_scale: T,
}

impl<T: Scalar> CarmaKernel<T> {
    pub fn new(a: &[T], b: &[T]) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Validation("CARMA needs deg a >= 1".into()));
        }
        let mut b = b.to_vec();
        while b.len() > 1 && *b.last().unwrap() == T::zero() {
            b.pop();
        }
        if b.is_empty() || b == [T::zero()] {
            return Err(Error::Validation("CARMA needs a nonzero b polynomial".into()));
        }
        if b.len() > a.len() {
            return Err(Error::Validation(format!(
                "CARMA requires deg b < deg a (got deg b = {}, deg a = {})",
                b.len() - 1,
                a.len()
            )));
        }
        let roots = poly::roots_monic(a)?;
        let scale = roots.iter().fold(T::one(), |m, z| m.max(z.norm()));
        for i in 0..roots.len() {
            for j in (i + 1)..roots.len() {
                if (roots[i] - roots[j]).norm() <= T::of(1e-8) * scale {
                    return Err(Error::Unsupported(format!(
                        "repeated CARMA roots near {} (within tolerance 1e-8)",
                        roots[i]
                    )));
                }
            }
        }
        let mut decay = T::infinity();
        for z in &roots {
            if z.re >= T::zero() {
                return Err(Error::Validation(format!(
                    "unstable CARMA root {} (needs negative real part)",
                    z
                )));
            }
            decay = decay.min(-z.re);
        }
        let residues: Vec<Complex<T>> = roots
            .iter()
            .map(|&z| poly::eval_low_to_high(&b, z) / poly::eval_monic_derivative(a, z))
            .collect();
        let residue_scale = residues.iter().fold(T::zero(), |s, r| s + r.norm());
        let k = CarmaKernel { a: a.to_vec(), b, roots, residues, decay, residue_scale };
        // real-coefficient input must give a real kernel
        for &t in &[T::of(0.1), T::one(), T::of(3.0)] {
            let (_, im) = k.eval_with_imag(t);
            if im.abs() > T::of(1e-10) * (T::one() + k.residue_scale) {
                return Err(Error::Numeric(format!(
                    "CARMA kernel has imaginary residue {im:e} at t = {t}"
                )));
            }
        }
        Ok(k)
    }

    fn eval_with_imag(&self, t: T) -> (T, T) {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (z, r) in self.roots.iter().zip(&self.residues) {
            acc = acc + r * (z * Complex::new(t, T::zero())).exp();
        }
        (acc.re, acc.im)
    }

    /// g(t) for t ≥ 0.
    pub fn eval(&self, t: T) -> T {
        self.eval_with_imag(t).0
    }

    /// Slowest exponential decay rate: |g(t)| ≤ (Σ|r_j|) e^{−decay·t}.
    pub fn decay_rate(&self) -> T {
        self.decay
    }

    pub fn residue_norm_sum(&self) -> T {
        self.residue_scale
    }

    /// b(0)/a(0).
    pub fn zero_frequency_gain(&self) -> T {
        self.b[0] / *self.a.last().unwrap()
    }
}

/// Evaluate a CARMA kernel once (validates, then evaluates).
pub fn carma_kernel<T: Scalar>(a: &[T], b: &[T], t: T) -> Result<T> {
    Ok(CarmaKernel::new(a, b)?.eval(t))
}

#[derive(Debug, Clone)]
pub struct FicarmaKernel<T: Scalar> {
    pub carma: CarmaKernel<T>,
    pub d: T,
    pub quad_tol: T,
    c_d: T,
    bound_cache: std::sync::Arc<OnceLock<T>>,
}

/// Kernel family selector; carries `(d, C_d)` tail data.
#[derive(Debug, Clone)]
pub enum KernelSpec<T: Scalar> {
    /// `f = C_d` on (0,1], `C_d t^{d−1}` beyond.
    PowerLaw { d: T, c_d: T },
    /// Fractional Lévy noise increments: `(t_+^d − (t−1)_+^d)/Γ(d+1)`.
    FlnIncrement { d: T },
    /// Riemann–Liouville fractional integral of order d of a CARMA kernel.
    Ficarma(FicarmaKernel<T>),
    /// Test-only `1_(0,1]`; violates the tail assumption.
    Indicator,
}

fn check_d<T: Scalar>(d: T) -> Result<()> {
    if d <= T::zero() || d >= T::of(0.5) {
        return Err(Error::Validation(format!("d must lie in (0, 0.5), got {d}")));
    }
    Ok(())
}

impl<T: Scalar> KernelSpec<T> {
    pub fn power_law(d: T, c_d: T) -> Result<Self> {
        check_d(d)?;
        if c_d <= T::zero() {
            return Err(Error::Validation(format!("C_d must be positive, got {c_d}")));
        }
        Ok(KernelSpec::PowerLaw { d, c_d })
    }

    pub fn fln_increment(d: T) -> Result<Self> {
        check_d(d)?;
        Ok(KernelSpec::FlnIncrement { d })
    }

    pub fn ficarma(a: &[T], b: &[T], d: T, quad_tol: T) -> Result<Self> {
        check_d(d)?;
        let carma = CarmaKernel::new(a, b)?;
        if carma.b[0] == T::zero() {
            return Err(Error::Validation(
                "FICARMA requires b(0) != 0 for the regularly varying tail".into(),
            ));
        }
        let c_d = carma.zero_frequency_gain() / d.gamma_fn();
        if c_d <= T::zero() {
            return Err(Error::Validation(
                "FICARMA requires b(0)/a(0) > 0 for a positive tail constant".into(),
            ));
        }
        Ok(KernelSpec::Ficarma(FicarmaKernel {
            carma,
            d,
            quad_tol,
            c_d,
            bound_cache: std::sync::Arc::new(OnceLock::new()),
        }))
    }

    pub fn indicator() -> Self {
        KernelSpec::Indicator
    }

    /// Long-memory exponent d (the indicator kernel has no tail; a nominal
    /// d is reported for it but `is_long_memory` is false).
    pub fn d(&self) -> T {
        match self {
            KernelSpec::PowerLaw { d, .. } => *d,
            KernelSpec::FlnIncrement { d } => *d,
            KernelSpec::Ficarma(k) => k.d,
            KernelSpec::Indicator => T::of(0.25),
        }
    }

    /// Tail constant C_d with `f(t) t^{1−d} → C_d` (0 for the indicator).
    pub fn c_d(&self) -> T {
        match self {
            KernelSpec::PowerLaw { c_d, .. } => *c_d,
            KernelSpec::FlnIncrement { d } => (*d).gamma_fn().recip(),
            KernelSpec::Ficarma(k) => k.c_d,
            KernelSpec::Indicator => T::zero(),
        }
    }

    pub fn is_long_memory(&self) -> bool {
        !matches!(self, KernelSpec::Indicator)
    }

    /// End of support for compactly supported kernels.
    pub fn support_end(&self) -> Option<T> {
        match self {
            KernelSpec::Indicator => Some(T::one()),
            _ => None,
        }
    }

    /// Finite K with `|f(t)| ≤ K max(1, t^{d−1})`.
    pub fn bound_k(&self) -> T {
        match self {
            KernelSpec::PowerLaw { c_d, .. } => *c_d,
            KernelSpec::FlnIncrement { d } => (T::one() + *d).gamma_fn().recip(),
            KernelSpec::Indicator => T::one(),
            KernelSpec::Ficarma(k) => *k.bound_cache.get_or_init(|| {
                // numeric certificate over a dense grid
                let d = k.d;
                let mut kmax = T::zero();
                let mut probe = |t: T| {
                    let v = self.eval(t).abs() * T::one().min(t.powf(T::one() - d));
                    if v > kmax {
                        kmax = v;
                    }
                };
                let mut t = T::of(1e-3);
                while t < T::of(3.0) {
                    probe(t);
                    t += T::of(0.01);
                }
                let mut lt = T::of(3.0);
                while lt < T::of(1e4) {
                    probe(lt);
                    lt *= T::of(1.05);
                }
                kmax * T::of(1.02)
            }),
        }
    }

    /// Kernel value f(t).
    pub fn eval(&self, t: T) -> T {
        if t <= T::zero() {
            return T::zero();
        }
        match self {
            KernelSpec::PowerLaw { d, c_d } => {
                if t <= T::one() {
                    *c_d
                } else {
                    *c_d * t.powf(*d - T::one())
                }
            }
            KernelSpec::FlnIncrement { d } => {
                let g1 = (T::one() + *d).gamma_fn();
                if t <= T::one() {
                    t.powf(*d) / g1
                } else if t <= T::of(2.0) {
                    (t.powf(*d) - (t - T::one()).powf(*d)) / g1
                } else {
                    // t^d (1 − (1−1/t)^d) without cancellation
                    let e = *d * (-t.recip()).ln_1p();
                    -t.powf(*d) * e.exp_m1() / g1
                }
            }
            KernelSpec::Ficarma(k) => ficarma_eval_inner(k, t, k.quad_tol)
                .unwrap_or_else(|_| T::nan()),
            KernelSpec::Indicator => {
                if t <= T::one() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// FICARMA kernel value by adaptive quadrature of the fractional integral
/// `f(t) = ∫_0^t g(t−u) u^{d−1} du / Γ(d)`, with the endpoint singularity
/// removed by the substitution `u = w^{1/d}` for small `t`, and the
/// exponentially truncated symmetric form `∫_0^{U} g(u)(t−u)^{d−1} du / Γ(d)`
/// for large `t`. Relative error ≤ `quad_tol`.
pub fn ficarma_eval<T: Scalar>(kernel: &KernelSpec<T>, t: T, quad_tol: T) -> Result<T> {
    match kernel {
        KernelSpec::Ficarma(k) => ficarma_eval_inner(k, t, quad_tol),
        _ => Err(Error::Parameter("ficarma_eval requires a FICARMA kernel".into())),
    }
}

fn ficarma_eval_inner<T: Scalar>(k: &FicarmaKernel<T>, t: T, quad_tol: T) -> Result<T> {
    if t <= T::zero() {
        return Ok(T::zero());
    }
    let d = k.d;
    let lam = k.carma.decay_rate();
    let u_g = (quad_tol.recip().ln() + T::of(20.0) + (T::one() + k.carma.residue_norm_sum()).ln())
        / lam;
    if t <= T::of(2.0) * u_g {
        // ∫_0^{t^d} g(t − w^{1/d}) dw / Γ(d+1)
        let carma = &k.carma;
        let rd = d.recip();
        let f = move |w: T| carma.eval(t - w.powf(rd));
        let v = integrate_rel(&f, T::zero(), t.powf(d), quad_tol)?;
        Ok(v / (T::one() + d).gamma_fn())
    } else {
        // ∫_0^{U} g(u) (t−u)^{d−1} du / Γ(d); tail beyond U below tolerance
        let carma = &k.carma;
        let f = move |u: T| carma.eval(u) * (t - u).powf(d - T::one());
        let v = integrate_rel(&f, T::zero(), u_g.min(t), quad_tol)?;
        Ok(v / d.gamma_fn())
    }
}

fn tail_sub_exponent<T: Scalar>(d: T) -> T {
    (T::one() - T::of(2.0) * d).recip()
}

/// `∫_L^∞ f(s) f(s+h) ds` for `L ≥ 1` via the flattening substitution
/// `s = L u^{−q}`, `q = 1/(1−2d)` (the integrand in `u` extends
/// continuously to `u = 0` with value `q L^{2d−1} C_d²`-scaled).
pub fn tail_product<T: Scalar>(
    kernel: &KernelSpec<T>,
    h: T,
    lower: T,
    rel_tol: T,
) -> Result<T> {
    if let Some(se) = kernel.support_end() {
        if lower >= se {
            return Ok(T::zero());
        }
    }
    let q = tail_sub_exponent(kernel.d());
    let c2 = kernel.c_d() * kernel.c_d();
    let two_d = T::of(2.0) * kernel.d();
    let limit0 = q * c2 * lower.powf(two_d - T::one());
    // below u_floor the value is indistinguishable from the limit
    let u_floor = T::of(1e-100);
    let kc = kernel.clone();
    let f = move |u: T| {
        if u <= u_floor {
            return limit0;
        }
        let s = lower * u.powf(-q);
        if !s.is_finite() {
            return limit0;
        }
        kc.eval(s) * kc.eval(s + h) * lower * q * u.powf(-q - T::one())
    };
    integrate_rel(&f, T::zero(), T::one(), rel_tol)
}

/// Autocovariance `γ(h) = σ² ∫_0^∞ f(s) f(s+h) ds` by adaptive quadrature,
/// split at `s = 1` with algebraic-tail acceleration beyond. `h ≥ 0` real.
pub fn autocovariance<T: Scalar>(
    kernel: &KernelSpec<T>,
    sigma2: T,
    h: T,
    quad_tol: T,
) -> Result<T> {
    if h < T::zero() {
        return Err(Error::Parameter(format!("lag h must be >= 0, got {h}")));
    }
    if sigma2 <= T::zero() {
        return Err(Error::Parameter("sigma2 must be positive".into()));
    }
    let kc = kernel.clone();
    let f1 = move |s: T| kc.eval(s) * kc.eval(s + h);
    // kink of f(s+h) at s = 1−h when 0 < h < 1
    let mut head = T::zero();
    let brk = T::one() - h;
    if brk > T::zero() && brk < T::one() {
        head += integrate_rel(&f1, T::zero(), brk, quad_tol)?;
        head += integrate_rel(&f1, brk, T::one(), quad_tol)?;
    } else {
        head += integrate_rel(&f1, T::zero(), T::one(), quad_tol)?;
    }
    let tail = tail_product(kernel, h, T::one(), quad_tol)?;
    Ok(sigma2 * (head + tail))
}

/// Truncation tail `∫_T^∞ f(s)² ds`.
pub fn tail_l2<T: Scalar>(kernel: &KernelSpec<T>, t0: T, rel_tol: T) -> Result<T> {
    if let Some(se) = kernel.support_end() {
        if t0 >= se {
            return Ok(T::zero());
        }
    }
    if t0 >= T::one() {
        tail_product(kernel, T::zero(), t0, rel_tol)
    } else {
        let kc = kernel.clone();
        let f = move |s: T| {
            let v = kc.eval(s);
            v * v
        };
        let head = integrate_rel(&f, t0.max(T::zero()), T::one(), rel_tol)?;
        Ok(head + tail_product(kernel, T::zero(), T::one(), rel_tol)?)
    }
}

/// Truncation controls for the `G_h` series.
#[derive(Debug, Clone, Copy)]
pub struct GOptions<T> {
    /// Hard cap on the number of series terms.
    pub i_max: usize,
    /// Tolerance steering the Euler–Maclaurin switchover point.
    pub tol: T,
}

impl<T: Scalar> Default for GOptions<T> {
    fn default() -> Self {
        GOptions { i_max: 1_000_000, tol: T::of(1e-8) }
    }
}

/// A truncated series value together with the bound on what was dropped.
#[derive(Debug, Clone, Copy)]
pub struct GValue<T> {
    pub value: T,
    /// `K² Σ_{i>I} i^{2d−2}`-type bound on the raw truncation (the value
    /// itself already includes an integral tail correction; the residual
    /// error is far below this bound).
    pub tail_bound: T,
}

fn g_series_terms<T: Scalar>(kernel: &KernelSpec<T>, opts: &GOptions<T>) -> usize {
    if kernel.support_end().is_some() {
        return 4;
    }
    let d = kernel.d().as_f64();
    // Euler–Maclaurin residual after the integral correction decays like
    // I^{2d-3}; choose I so that it sits near the tolerance.
    let tol = opts.tol.as_f64().max(1e-14);
    let i_em = tol.powf(1.0 / (2.0 * d - 3.0)).ceil() as usize;
    i_em.clamp(128, opts.i_max)
}

/// `G_h(s) = Σ_{i=−∞}^∞ f(i+s) f(i+h+s)` (nonzero terms have i ≥ 0),
/// evaluated as a truncated series plus an integral tail correction
/// (midpoint Euler–Maclaurin), with the raw truncation bound reported.
pub fn g_fn<T: Scalar>(
    kernel: &KernelSpec<T>,
    h: usize,
    s: T,
    opts: &GOptions<T>,
) -> Result<GValue<T>> {
    if s < T::zero() || s > T::one() {
        return Err(Error::Parameter(format!("s must lie in [0,1], got {s}")));
    }
    let i_terms = g_series_terms(kernel, opts);
    let hh = T::of_usize(h);
    let mut sum = T::zero();
    for i in 0..i_terms {
        let x = T::of_usize(i) + s;
        sum += kernel.eval(x) * kernel.eval(x + hh);
    }
    let mut tail_corr = T::zero();
    let mut bound = T::zero();
    if kernel.support_end().is_none() {
        let lower = T::of_usize(i_terms) - T::of(0.5) + s;
        tail_corr = tail_product(kernel, hh, lower, opts.tol)?;
        let k = kernel.bound_k();
        let two_d = T::of(2.0) * kernel.d();
        bound = k * k * (T::of_usize(i_terms) + s).powf(two_d - T::one())
            / (T::one() - two_d);
    }
    Ok(GValue { value: sum + tail_corr, tail_bound: bound })
}

/// `G_{m,h}(s)`: the same series with the step approximation
/// `f_m = Σ_k f(εk) 1_{[kε,(k+1)ε)}`, which reduces to evaluating the
/// series at the grid-snapped argument `⌊ms⌋/m`.
pub fn g_step<T: Scalar>(
    kernel: &KernelSpec<T>,
    m: u32,
    h: usize,
    s: T,
    opts: &GOptions<T>,
) -> Result<GValue<T>> {
    if m == 0 {
        return Err(Error::Parameter("mesh m must be >= 1".into()));
    }
    let mt = T::of(m as f64);
    let snapped = (mt * s).floor() / mt;
    g_fn(kernel, h, snapped.min(T::one()), opts)
}

/// Upper bound `K²(1 + Σ_{t≥1} t^{2d−2})` for `sup_s G_h(s)`.
pub fn g_sup_bound<T: Scalar>(kernel: &KernelSpec<T>) -> T {
    let k = kernel.bound_k();
    let d = kernel.d();
    let two = T::of(2.0);
    // ζ(2−2d) via series + integral tail
    let mut z = T::zero();
    let terms = 256usize;
    for t in 1..=terms {
        z += T::of_usize(t).powf(two * d - two);
    }
    z += (T::of_usize(terms) + T::of(0.5)).powf(two * d - T::one())
        / (T::one() - two * d);
    k * k * (T::one() + z)
}
