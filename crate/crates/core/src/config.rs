//! Flat `key = value` experiment configuration with dotted sections,
//! jointly validated with aggregated error reporting, plus content hashing
//! for reproducible run manifests.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::levy::LevyModel;
use crate::mc::{CenterMode, ExperimentSpec, Scaling, Statistic};
use crate::simulate::SimulationGrid;
use crate::Real;

/// Sha-256 hex digest of a canonical string.
pub fn hash_str(s: &str) -> String {
    let digest = Sha256::digest(s.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub const KNOWN_KEYS: &[&str] = &[
    "levy.brownian_sd",
    "levy.jump_rate",
    "levy.alpha",
    "levy.x0",
    "levy.bounded_jumps",
    "kernel.variant",
    "kernel.d",
    "kernel.C_d",
    "kernel.a",
    "kernel.b",
    "kernel.I_max",
    "kernel.quad_tol",
    "grid.m",
    "grid.N",
    "grid.H",
    "grid.K_trunc",
    "grid.retain_increments",
    "grid.truncation_budget",
    "experiment.replicates",
    "experiment.scaling",
    "experiment.statistic",
    "experiment.center",
    "experiment.seed",
    "experiment.ref_draws",
    "experiment.k_top",
    "experiment.boundary_override",
    "experiment.sweep_N",
    "experiment.norming_budget_mult",
    "limit.law",
    "limit.d",
    "limit.n_grid",
    "limit.alpha",
    "limit.tau",
    "limit.beta",
    "limit.mu",
    "limit.h",
    "limit.window_mult",
    "limit.far_field_tau",
];

/// Raw parsed key/value pairs in file order (duplicates rejected).
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut errors = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => {
                    let key = k.trim().to_string();
                    let val = v.trim().to_string();
                    if !KNOWN_KEYS.contains(&key.as_str()) {
                        errors.push(format!("line {}: unknown key `{key}`", lineno + 1));
                    } else if entries.insert(key.clone(), val).is_some() {
                        errors.push(format!("line {}: duplicate key `{key}`", lineno + 1));
                    }
                }
                None => errors.push(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                )),
            }
        }
        if errors.is_empty() {
            Ok(RawConfig { entries })
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Parameter(format!("config file not found: {}", path.display())));
        }
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    /// Canonical content hash over the semantic keys (sorted `key=value`
    /// lines, LF-joined).
    pub fn hash(&self) -> String {
        let mut canon = String::new();
        for (k, v) in &self.entries {
            canon.push_str(k);
            canon.push('=');
            canon.push_str(v);
            canon.push('\n');
        }
        hash_str(&canon)
    }
}

fn parse_num(raw: &RawConfig, key: &str, errors: &mut Vec<String>) -> Option<f64> {
    raw.get(key).and_then(|v| match v.parse::<f64>() {
        Ok(x) => Some(x),
        Err(_) => {
            errors.push(format!("{key}: expected a number, got `{v}`"));
            None
        }
    })
}

fn parse_usize(raw: &RawConfig, key: &str, errors: &mut Vec<String>) -> Option<usize> {
    raw.get(key).and_then(|v| match v.parse::<usize>() {
        Ok(x) => Some(x),
        Err(_) => {
            errors.push(format!("{key}: expected a nonnegative integer, got `{v}`"));
            None
        }
    })
}

fn parse_bool(raw: &RawConfig, key: &str, errors: &mut Vec<String>) -> Option<bool> {
    raw.get(key).and_then(|v| match v {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => {
            errors.push(format!("{key}: expected true/false, got `{v}`"));
            None
        }
    })
}

fn parse_list(raw: &RawConfig, key: &str, errors: &mut Vec<String>) -> Option<Vec<f64>> {
    raw.get(key).and_then(|v| {
        let parts: std::result::Result<Vec<f64>, _> =
            v.split(',').map(|p| p.trim().parse::<f64>()).collect();
        match parts {
            Ok(xs) if !xs.is_empty() => Some(xs),
            _ => {
                errors.push(format!("{key}: expected a comma-separated number list, got `{v}`"));
                None
            }
        }
    })
}

/// Limit-sampler section (for `limits sample`).
#[derive(Debug, Clone)]
pub struct LimitConfig {
    pub law: String,
    pub d: Real,
    pub n_grid: usize,
    pub alpha: Real,
    pub tau: Option<Real>,
    pub beta: Real,
    pub mu: Option<Real>,
    pub h: usize,
    pub window_mult: usize,
    pub far_field_tau: f64,
}

/// Fully validated configuration.
#[derive(Debug, Clone)]
pub struct FullConfig {
    pub kernel: KernelSpec<Real>,
    pub model: LevyModel<Real>,
    pub grid: SimulationGrid<Real>,
    pub experiment: ExperimentSpec<Real>,
    pub limit: LimitConfig,
    pub sweep_n: Vec<usize>,
    pub hash: String,
    pub quad_tol: Real,
    pub i_max: usize,
}

/// Parse and jointly validate a config file; errors are aggregated, and no
/// output is produced on failure.
pub fn parse_config(path: &Path) -> Result<FullConfig> {
    let raw = RawConfig::load(path)?;
    full_config_from_raw(&raw)
}

pub fn parse_config_str(text: &str) -> Result<FullConfig> {
    let raw = RawConfig::parse(text)?;
    full_config_from_raw(&raw)
}

pub fn full_config_from_raw(raw: &RawConfig) -> Result<FullConfig> {
    let mut errors: Vec<String> = Vec::new();

    // --- levy ---
    let brownian_sd = parse_num(raw, "levy.brownian_sd", &mut errors).unwrap_or(1.0);
    let jump_rate = parse_num(raw, "levy.jump_rate", &mut errors).unwrap_or(0.0);
    let alpha = parse_num(raw, "levy.alpha", &mut errors).unwrap_or(3.0);
    let x0 = parse_num(raw, "levy.x0", &mut errors).unwrap_or(1.0);
    let bounded = parse_bool(raw, "levy.bounded_jumps", &mut errors).unwrap_or(false);
    let model = match LevyModel::new(brownian_sd, jump_rate, alpha, x0, bounded) {
        Ok(m) => Some(m),
        Err(e) => {
            errors.push(format!("levy: {e}"));
            None
        }
    };

    // --- kernel ---
    let quad_tol = parse_num(raw, "kernel.quad_tol", &mut errors).unwrap_or(1e-8);
    let i_max = parse_usize(raw, "kernel.I_max", &mut errors).unwrap_or(1_000_000);
    let d = parse_num(raw, "kernel.d", &mut errors).unwrap_or(0.3);
    if !(0.0 < d && d < 0.5) {
        errors.push(format!("kernel.d: d must lie in (0, 0.5), got {d}"));
    }
    let variant = raw.get("kernel.variant").unwrap_or("powerlaw").to_string();
    let kernel = if (0.0..0.5).contains(&d) && d > 0.0 {
        match variant.as_str() {
            "powerlaw" => {
                let c_d = parse_num(raw, "kernel.C_d", &mut errors).unwrap_or(1.0);
                KernelSpec::power_law(d, c_d).map_err(|e| format!("kernel: {e}"))
            }
            "fln" => KernelSpec::fln_increment(d).map_err(|e| format!("kernel: {e}")),
            "ficarma" => {
                let a = parse_list(raw, "kernel.a", &mut errors).unwrap_or_else(|| vec![1.0]);
                let b = parse_list(raw, "kernel.b", &mut errors).unwrap_or_else(|| vec![1.0]);
                KernelSpec::ficarma(&a, &b, d, quad_tol).map_err(|e| format!("kernel: {e}"))
            }
            "indicator" => Ok(KernelSpec::indicator()),
            other => Err(format!(
                "kernel.variant: unknown variant `{other}` (powerlaw|fln|ficarma|indicator)"
            )),
        }
    } else {
        Err(String::new())
    };
    let kernel = match kernel {
        Ok(k) => Some(k),
        Err(e) => {
            if !e.is_empty() {
                errors.push(e);
            }
            None
        }
    };

    // --- grid ---
    let m = parse_usize(raw, "grid.m", &mut errors).unwrap_or(1) as u32;
    let n = parse_usize(raw, "grid.N", &mut errors).unwrap_or(1024);
    let h_max = parse_usize(raw, "grid.H", &mut errors).unwrap_or(2);
    let k_min = SimulationGrid::<Real>::minimal_k_trunc(m.max(1), n.max(1), h_max);
    let k_trunc = parse_usize(raw, "grid.K_trunc", &mut errors).unwrap_or(k_min);
    let retain = parse_bool(raw, "grid.retain_increments", &mut errors).unwrap_or(false);
    let trunc_budget = parse_num(raw, "grid.truncation_budget", &mut errors).unwrap_or(0.05);
    let seed =
        parse_usize(raw, "experiment.seed", &mut errors).map(|s| s as u64).unwrap_or(0xC0FFEE);
    let grid = match SimulationGrid::<Real>::new(m, n, h_max, k_trunc, seed) {
        Ok(mut g) => {
            g.retain_increments = retain;
            g.truncation_budget_rel = trunc_budget;
            Some(g)
        }
        Err(e) => {
            errors.push(format!("grid: {e}"));
            None
        }
    };

    // --- experiment ---
    let replicates = parse_usize(raw, "experiment.replicates", &mut errors).unwrap_or(200);
    let scaling = match raw.get("experiment.scaling") {
        None => Some(Scaling::SqrtN),
        Some(s) => parse_scaling(s).map_or_else(
            || {
                errors.push(format!("experiment.scaling: cannot parse `{s}`"));
                None
            },
            Some,
        ),
    };
    let statistic = match raw.get("experiment.statistic") {
        None => Some(Statistic::AcvError(0)),
        Some(s) => parse_statistic(s).map_or_else(
            || {
                errors.push(format!("experiment.statistic: cannot parse `{s}`"));
                None
            },
            Some,
        ),
    };
    let center = match raw.get("experiment.center") {
        None => CenterMode::ExactMean,
        Some("exact_mean") => CenterMode::ExactMean,
        Some("gamma") => CenterMode::Gamma,
        Some(other) => {
            errors.push(format!("experiment.center: expected exact_mean|gamma, got `{other}`"));
            CenterMode::ExactMean
        }
    };
    let ref_draws = parse_usize(raw, "experiment.ref_draws", &mut errors).unwrap_or(4000);
    let k_top = parse_usize(raw, "experiment.k_top", &mut errors);
    let boundary_override =
        parse_bool(raw, "experiment.boundary_override", &mut errors).unwrap_or(false);
    let norming_budget_mult = parse_usize(raw, "experiment.norming_budget_mult", &mut errors)
        .map(|x| x as u64)
        .unwrap_or(100);
    let sweep_n: Vec<usize> = raw
        .get("experiment.sweep_N")
        .map(|v| {
            v.split(',')
                .filter_map(|p| match p.trim().parse::<usize>() {
                    Ok(x) => Some(x),
                    Err(_) => {
                        errors.push(format!("experiment.sweep_N: bad entry `{p}`"));
                        None
                    }
                })
                .collect()
        })
        .unwrap_or_default();

    // KS-based comparisons need enough replicates
    if replicates < 100 {
        errors.push(format!(
            "experiment.replicates: KS-based comparison needs >= 100, got {replicates}"
        ));
    }

    // --- limit section ---
    let limit = LimitConfig {
        law: raw.get("limit.law").unwrap_or("rosenblatt").to_string(),
        d: parse_num(raw, "limit.d", &mut errors).unwrap_or(d),
        n_grid: parse_usize(raw, "limit.n_grid", &mut errors).unwrap_or(1024),
        alpha: parse_num(raw, "limit.alpha", &mut errors).unwrap_or(alpha),
        tau: parse_num(raw, "limit.tau", &mut errors),
        beta: parse_num(raw, "limit.beta", &mut errors).unwrap_or(1.0),
        mu: parse_num(raw, "limit.mu", &mut errors),
        h: parse_usize(raw, "limit.h", &mut errors).unwrap_or(0),
        window_mult: parse_usize(raw, "limit.window_mult", &mut errors).unwrap_or(32),
        far_field_tau: parse_num(raw, "limit.far_field_tau", &mut errors).unwrap_or(1e7),
    };
    if !["rosenblatt", "stable", "gdm"].contains(&limit.law.as_str()) {
        errors.push(format!("limit.law: expected rosenblatt|stable|gdm, got `{}`", limit.law));
    }

    // --- joint validation ---
    if let (Some(kernel), Some(model), Some(grid)) = (&kernel, &model, &grid) {
        if let Err(e) = grid.validate(kernel, model.variance()) {
            errors.push(format!("{e}"));
        }
        // boundary-regime consistency (invariant: refuse without override)
        if kernel.is_long_memory() {
            match crate::estimate::theoretical_limits(
                kernel,
                model,
                0,
                &crate::estimate::LimitOptions { k_v_max: 8, ..Default::default() },
            ) {
                Ok(law) if law.regime == crate::limits::Regime::Boundary => {
                    if !boundary_override {
                        errors.push(format!(
                            "boundary regime rejected without override: {}",
                            law.boundary_reason.unwrap_or_default()
                        ));
                    }
                }
                _ => {}
            }
        }
    }

    let (Some(kernel), Some(model), Some(grid), Some(scaling), Some(statistic)) =
        (kernel, model, grid, scaling, statistic)
    else {
        return Err(Error::Config(errors));
    };
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }

    let experiment = ExperimentSpec {
        kernel: kernel.clone(),
        model: model.clone(),
        m,
        n,
        h_max,
        k_trunc,
        replicates,
        scaling,
        statistic,
        center,
        seed,
        boundary_override,
        ref_draws,
        k_top,
        gdm_panels: 1024,
        rosenblatt_n_grid: limit.n_grid,
        norming_budget_mult,
        truncation_budget_rel: trunc_budget,
    };

    Ok(FullConfig {
        kernel,
        model,
        grid,
        experiment,
        limit,
        sweep_n,
        hash: raw.hash(),
        quad_tol,
        i_max,
    })
}

fn parse_scaling(s: &str) -> Option<Scaling<Real>> {
    match s {
        "sqrt_n" => Some(Scaling::SqrtN),
        "sqrt_n_over_log" => Some(Scaling::SqrtNOverLog),
        "n_over_aN2" | "n_over_an2" => Some(Scaling::NOverAn2),
        _ => s.strip_prefix("n_pow:").and_then(|e| e.parse::<f64>().ok().map(Scaling::NPow)),
    }
}

fn parse_statistic(s: &str) -> Option<Statistic> {
    if s == "d_hat_error" {
        return Some(Statistic::DHatError);
    }
    let (name, arg) = s.split_once(':')?;
    let h = arg.parse::<usize>().ok()?;
    match name {
        "acv_error" => Some(Statistic::AcvError(h)),
        "acf_error" => Some(Statistic::AcfError(h)),
        "diag_part" => Some(Statistic::DiagPart(h)),
        "offdiag_part" => Some(Statistic::OffdiagPart(h)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
kernel.variant = powerlaw
kernel.d = 0.3
levy.brownian_sd = 1.0
grid.N = 1024
grid.m = 1
grid.H = 2
";

    #[test]
    fn minimal_config_accepted() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.grid.n, 1024);
        assert_eq!(cfg.experiment.replicates, 200);
        assert!(!cfg.hash.is_empty());
    }

    #[test]
    fn d_out_of_range_rejected() {
        let text = MINIMAL.replace("kernel.d = 0.3", "kernel.d = 0.6");
        let err = parse_config_str(&text).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("(0, 0.5)"), "{msg}");
    }

    #[test]
    fn boundary_rejected_without_override() {
        let text = "\
kernel.variant = powerlaw
kernel.d = 0.4
levy.brownian_sd = 0.0
levy.jump_rate = 1.0
levy.alpha = 2.5
levy.x0 = 1.0
grid.N = 512
grid.m = 1
grid.H = 0
";
        let err = parse_config_str(text).unwrap_err();
        assert!(format!("{err}").contains("boundary"), "{err}");
        let with_override = format!("{text}experiment.boundary_override = true\n");
        assert!(parse_config_str(&with_override).is_ok());
    }

    #[test]
    fn unknown_key_named() {
        let text = format!("{MINIMAL}foo.bar = 1\n");
        let err = parse_config_str(&text).unwrap_err();
        assert!(format!("{err}").contains("foo.bar"), "{err}");
    }

    #[test]
    fn errors_aggregate() {
        let text = "\
kernel.variant = powerlaw
kernel.d = 0.7
levy.brownian_sd = -2
grid.N = 512
grid.m = 1
grid.H = 0
unknown.key = 3
";
        match parse_config_str(text).unwrap_err() {
            Error::Config(list) => assert!(list.len() >= 2, "{list:?}"),
            e => panic!("expected aggregated config error, got {e}"),
        }
    }

    #[test]
    fn hash_stability_and_sensitivity() {
        let a = parse_config_str(MINIMAL).unwrap().hash;
        let b = parse_config_str(MINIMAL).unwrap().hash;
        assert_eq!(a, b);
        let c = parse_config_str(&MINIMAL.replace("0.3", "0.31")).unwrap().hash;
        assert_ne!(a, c);
    }

    #[test]
    fn statistic_and_scaling_parsers() {
        assert_eq!(parse_statistic("acv_error:2"), Some(Statistic::AcvError(2)));
        assert_eq!(parse_statistic("d_hat_error"), Some(Statistic::DHatError));
        assert!(parse_statistic("nope:1").is_none());
        assert!(matches!(parse_scaling("n_pow:0.3"), Some(Scaling::NPow(e)) if e == 0.3));
        assert!(matches!(parse_scaling("sqrt_n"), Some(Scaling::SqrtN)));
    }
}
