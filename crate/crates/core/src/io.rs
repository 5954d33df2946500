//! Output surfaces: CSV tables, the binary increment dump, JSON summaries
//! and run manifests. All text output is LF-terminated with shortest
//! round-trip float formatting, so equal configurations produce
//! byte-identical files.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::levy::NormingRow;
use crate::limits::Regime;
use crate::mc::ExperimentResult;
use crate::Real;

/// Magic header of the binary increment dump.
pub const INCREMENT_MAGIC: &[u8; 4] = b"LRDC";
pub const INCREMENT_VERSION: u32 = 1;

fn fmt_f(x: Real) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{x:.1}")
    } else {
        format!("{x}")
    }
}

pub fn write_kernel_table(
    path: &Path,
    ts: &[Real],
    fs: &[Real],
) -> Result<()> {
    let mut out = String::from("t,f\n");
    for (t, f) in ts.iter().zip(fs) {
        out.push_str(&format!("{},{}\n", fmt_f(*t), fmt_f(*f)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_acv_table(
    path: &Path,
    gamma_hat: &[Real],
    gamma: &[Real],
    rho_hat: &[Real],
) -> Result<()> {
    let mut out = String::from("h,gamma_hat,gamma,rho_hat\n");
    for h in 0..gamma_hat.len() {
        out.push_str(&format!(
            "{h},{},{},{}\n",
            fmt_f(gamma_hat[h]),
            fmt_f(gamma[h]),
            fmt_f(rho_hat[h])
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_path_csv(path: &Path, values: &[Real]) -> Result<()> {
    let mut out = String::from("t,x\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, fmt_f(*v)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_path_csv(path: &Path) -> Result<Vec<Real>> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with('t')) {
            continue;
        }
        let cell = line.split(',').nth(1).unwrap_or(line);
        values.push(cell.trim().parse::<Real>().map_err(|_| {
            crate::Error::Parameter(format!("path csv line {}: bad value `{line}`", i + 1))
        })?);
    }
    if values.is_empty() {
        return Err(crate::Error::Parameter("path csv holds no values".into()));
    }
    Ok(values)
}

pub fn write_norming_table(path: &Path, rows: &[NormingRow<Real>]) -> Result<()> {
    let mut out = String::from("N,a_N_mc,a_N_asym,b_N,karamata_diag\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n,
            fmt_f(r.a_n_mc),
            r.a_n_asym.map(fmt_f).unwrap_or_default(),
            fmt_f(r.b_n),
            fmt_f(r.karamata_diag)
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Binary increment dump: magic "LRDC", version u32, m u32, count u64,
/// little-endian f64 values.
pub fn write_increment_dump(path: &Path, m: u32, increments: &[Real]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(INCREMENT_MAGIC)?;
    f.write_all(&INCREMENT_VERSION.to_le_bytes())?;
    f.write_all(&m.to_le_bytes())?;
    f.write_all(&(increments.len() as u64).to_le_bytes())?;
    for v in increments {
        f.write_all(&v.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_increment_dump(path: &Path) -> Result<(u32, Vec<Real>)> {
    let data = std::fs::read(path)?;
    if data.len() < 20 || &data[0..4] != INCREMENT_MAGIC {
        return Err(crate::Error::Parameter("not an increment dump (bad magic)".into()));
    }
    let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
    if version != INCREMENT_VERSION {
        return Err(crate::Error::Parameter(format!("unsupported dump version {version}")));
    }
    let m = u32::from_le_bytes(data[8..12].try_into().unwrap());
    let count = u64::from_le_bytes(data[12..20].try_into().unwrap()) as usize;
    if data.len() != 20 + 8 * count {
        return Err(crate::Error::Parameter("truncated increment dump".into()));
    }
    let values = data[20..]
        .chunks_exact(8)
        .map(|c| Real::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((m, values))
}

pub fn write_draws_csv(path: &Path, per_lag: &[Vec<Real>]) -> Result<()> {
    let mut header = String::from("replicate");
    for h in 0..per_lag.len() {
        header.push_str(&format!(",lag{h}"));
    }
    header.push('\n');
    let mut out = header;
    let rows = per_lag.first().map(|v| v.len()).unwrap_or(0);
    for r in 0..rows {
        out.push_str(&format!("{r}"));
        for col in per_lag {
            out.push_str(&format!(",{}", fmt_f(col[r])));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reproducibility manifest.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub artifact_version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub timestamp_unix: u64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(config_hash: &str, master_seed: u64, outputs: Vec<String>) -> Self {
        RunManifest {
            artifact_version: crate::ARTIFACT_VERSION.to_string(),
            config_hash: config_hash.to_string(),
            master_seed,
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            outputs,
        }
    }
}

/// JSON experiment summary; complete enough to re-render the report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentSummary {
    pub artifact_version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub n: usize,
    pub m: u32,
    pub replicates: usize,
    pub lags: usize,
    pub statistic: String,
    pub scaling: String,
    pub center: String,
    pub regime: Regime,
    pub scale_factor: Real,
    pub a_n: Option<Real>,
    pub b_n: Option<Real>,
    pub ks_to_rosenblatt: Option<Real>,
    pub ks_to_rosenblatt_true: Option<Real>,
    pub ks_to_gaussian: Option<Real>,
    pub ks_to_stable: Option<Real>,
    pub hill_index: Option<Real>,
    pub hill_k_top: usize,
    pub rate_exponent: Option<Real>,
    pub rate_std_error: Option<Real>,
    pub cross_lag_corr: Option<Vec<Vec<Real>>>,
    pub targets: Vec<Real>,
    pub gamma: Vec<Real>,
    pub quartiles: Vec<Real>,
}

impl ExperimentSummary {
    pub fn from_result(
        res: &ExperimentResult<Real>,
        spec: &crate::mc::ExperimentSpec<Real>,
        rate: Option<(Real, Real)>,
    ) -> Self {
        let head = res.headline();
        let q = |p: f64| crate::mc::quantile_sorted(&head.values, p);
        ExperimentSummary {
            artifact_version: crate::ARTIFACT_VERSION.to_string(),
            config_hash: res.config_hash.clone(),
            master_seed: spec.seed,
            n: spec.n,
            m: spec.m,
            replicates: spec.replicates,
            lags: spec.h_max + 1,
            statistic: format!("{:?}", spec.statistic),
            scaling: format!("{:?}", spec.scaling),
            center: format!("{:?}", spec.center),
            regime: res.law.regime,
            scale_factor: res.scale_factor,
            a_n: res.a_n,
            b_n: res.b_n,
            ks_to_rosenblatt: res.ks_to_rosenblatt,
            ks_to_rosenblatt_true: res.ks_to_rosenblatt_true,
            ks_to_gaussian: res.ks_to_gaussian,
            ks_to_stable: res.ks_to_stable,
            hill_index: res.hill_index,
            hill_k_top: res.hill_k_top,
            rate_exponent: rate.map(|r| r.0),
            rate_std_error: rate.map(|r| r.1),
            cross_lag_corr: res.cross_lag_corr.clone(),
            targets: res.targets.clone(),
            gamma: res.gamma_theoretical.clone(),
            quartiles: vec![q(0.25), q(0.5), q(0.75)],
        }
    }

    /// Human-readable report; deterministic given the summary.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "experiment summary (v{}, config {})\n",
            self.artifact_version,
            &self.config_hash[..12.min(self.config_hash.len())]
        ));
        s.push_str(&format!(
            "  N = {}, m = {}, R = {}, statistic = {}, scaling = {}, center = {}\n",
            self.n, self.m, self.replicates, self.statistic, self.scaling, self.center
        ));
        s.push_str(&format!("  regime = {}, scale = {}\n", self.regime, self.scale_factor));
        if let (Some(a), Some(b)) = (self.a_n, self.b_n) {
            s.push_str(&format!("  a_N = {a}, b_N = {b}\n"));
        }
        s.push_str(&format!(
            "  quartiles = [{}, {}, {}]\n",
            self.quartiles[0], self.quartiles[1], self.quartiles[2]
        ));
        let ks = |name: &str, v: Option<Real>| -> String {
            v.map(|x| format!("  KS to {name} = {x}\n")).unwrap_or_default()
        };
        s.push_str(&ks("rosenblatt (matched)", self.ks_to_rosenblatt));
        s.push_str(&ks("rosenblatt (true-variance)", self.ks_to_rosenblatt_true));
        s.push_str(&ks("gaussian", self.ks_to_gaussian));
        s.push_str(&ks("stable", self.ks_to_stable));
        if let Some(h) = self.hill_index {
            s.push_str(&format!("  hill index (k={}) = {h}\n", self.hill_k_top));
        }
        if let Some(r) = self.rate_exponent {
            s.push_str(&format!(
                "  rate exponent = {r} (se {})\n",
                self.rate_std_error.unwrap_or(0.0)
            ));
        }
        if let Some(c) = &self.cross_lag_corr {
            s.push_str("  cross-lag correlations:\n");
            for row in c {
                let cells: Vec<String> = row.iter().map(|x| format!("{x:.4}")).collect();
                s.push_str(&format!("    [{}]\n", cells.join(", ")));
            }
        }
        s
    }
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<ExperimentSummary> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increment_dump_roundtrip() {
        let dir = std::env::temp_dir().join("lrdcma_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("dump.bin");
        let vals = vec![1.5, -2.25, 0.0, 1e-12];
        write_increment_dump(&p, 4, &vals).unwrap();
        let (m, back) = read_increment_dump(&p).unwrap();
        assert_eq!(m, 4);
        assert_eq!(back, vals);
        std::fs::remove_file(&p).ok();
    }

    #[test]
    fn path_csv_roundtrip() {
        let dir = std::env::temp_dir().join("lrdcma_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("path.csv");
        let vals = vec![1.0, -0.5, 3.25];
        write_path_csv(&p, &vals).unwrap();
        assert_eq!(read_path_csv(&p).unwrap(), vals);
        std::fs::remove_file(&p).ok();
    }

    #[test]
    fn summary_roundtrip_renders_identically() {
        let s = ExperimentSummary {
            artifact_version: "0.1.0".into(),
            config_hash: "abc123def456".into(),
            master_seed: 7,
            n: 1024,
            m: 4,
            replicates: 200,
            lags: 3,
            statistic: "AcvError(0)".into(),
            scaling: "NPow(0.3)".into(),
            center: "ExactMean".into(),
            regime: Regime::Rosenblatt,
            scale_factor: 8.0,
            a_n: None,
            b_n: None,
            ks_to_rosenblatt: Some(0.04),
            ks_to_rosenblatt_true: Some(0.06),
            ks_to_gaussian: Some(0.2),
            ks_to_stable: None,
            hill_index: Some(1.3),
            hill_k_top: 100,
            rate_exponent: Some(0.3),
            rate_std_error: Some(0.01),
            cross_lag_corr: Some(vec![vec![1.0, 0.95], vec![0.95, 1.0]]),
            targets: vec![3.4, 2.8],
            gamma: vec![3.5, 2.9],
            quartiles: vec![-1.0, 0.0, 1.0],
        };
        let json = serde_json::to_string(&s).unwrap();
        let back: ExperimentSummary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.render(), s.render());
    }
}
