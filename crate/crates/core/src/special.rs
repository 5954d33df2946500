//! Gamma function via the Lanczos approximation (g = 7, 9 terms).
//! Double-precision accuracy is ~1e-13 relative on the range used here
//! (arguments in roughly (0, 30)).

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let s = (std::f64::consts::PI * x).sin();
        std::f64::consts::PI.ln() - s.abs().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut a = LANCZOS[0];
        for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }
}

/// Γ(x) for x > 0 (and non-integer x < 0 by reflection).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        ln_gamma(x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_known_values() {
        assert_relative_eq!(gamma(1.0), 1.0, max_relative = 1e-12);
        assert_relative_eq!(gamma(0.5), std::f64::consts::PI.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(gamma(5.0), 24.0, max_relative = 1e-12);
        // Γ(0.3), Γ(1.3), Γ(0.35), Γ(0.75): reference values
        assert_relative_eq!(gamma(0.3), 2.991_568_987_687_59, max_relative = 1e-10);
        assert_relative_eq!(gamma(1.3), 0.897_470_696_306_277, max_relative = 1e-10);
        assert_relative_eq!(gamma(0.35), 2.546_146_977_212_288, max_relative = 1e-10);
        assert_relative_eq!(gamma(0.75), 1.225_416_702_465_178, max_relative = 1e-10);
    }

    #[test]
    fn gamma_recurrence() {
        for &x in &[0.1, 0.35, 0.7, 1.6, 3.3, 7.9] {
            assert_relative_eq!(gamma(x + 1.0), x * gamma(x), max_relative = 1e-11);
        }
    }
}
