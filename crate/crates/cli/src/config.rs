use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use dynidx_core::{CostParameters, MiningParameters};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file with the same keys as the flags (snake_case).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// Knowledge-base file.
    #[arg(long, global = true)]
    pub kb: Option<PathBuf>,
    /// Configuration-state file.
    #[arg(long, global = true)]
    pub state: Option<PathBuf>,
    /// Output directory for reports, DDL scripts and evaluation.csv.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Minimum support as a fraction in (0, 1].
    #[arg(long, global = true)]
    pub minsup: Option<f64>,
    /// Storage budget in bytes, or with a KB/MB/GB suffix (powers of 1024).
    #[arg(long, global = true)]
    pub budget: Option<String>,
    #[arg(long, global = true)]
    pub maintenance_coefficient: Option<f64>,
    #[arg(long, global = true)]
    pub between_fraction: Option<f64>,
    #[arg(long, global = true)]
    pub bitmap_limit: Option<u64>,
    /// Keep only the transactions of the last N workload batches.
    #[arg(long, global = true)]
    pub retention_batches: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub report_format: Option<ReportFormat>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum BudgetValue {
    Bytes(u64),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema: Option<PathBuf>,
    kb: Option<PathBuf>,
    state: Option<PathBuf>,
    out: Option<PathBuf>,
    minsup: Option<f64>,
    budget: Option<BudgetValue>,
    maintenance_coefficient: Option<f64>,
    between_fraction: Option<f64>,
    bitmap_limit: Option<u64>,
    retention_batches: Option<u64>,
    report_format: Option<ReportFormat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvisorConfig {
    pub schema: Option<PathBuf>,
    pub kb: Option<PathBuf>,
    pub state: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Set only when given explicitly; otherwise the knowledge base's own value applies.
    pub minsup: Option<MiningParameters>,
    pub budget: Option<u64>,
    pub cost: CostParameters,
    pub retention_batches: Option<u64>,
    /// Unset means the command's own default presentation.
    pub report_format: Option<ReportFormat>,
}

pub const DEFAULT_MINSUP: f64 = 0.05;

pub fn parse_budget(text: &str) -> Result<u64> {
    let t = text.trim();
    let upper = t.to_ascii_uppercase();
    let (number, factor) = [("GB", 1u64 << 30), ("MB", 1 << 20), ("KB", 1 << 10), ("B", 1)]
        .iter()
        .find_map(|(suffix, f)| upper.strip_suffix(suffix).map(|n| (n.trim(), *f)))
        .unwrap_or((upper.as_str(), 1));
    if let Ok(n) = number.parse::<u64>() {
        return n.checked_mul(factor).with_context(|| format!("budget `{text}` is too large"));
    }
    match number.parse::<f64>() {
        Ok(x) if x.is_finite() && x >= 0.0 && x * factor as f64 <= u64::MAX as f64 => Ok((x * factor as f64) as u64),
        _ => {
            bail!("invalid budget `{text}`: expected a byte count such as 1048576, 512KB or 1.5GB")
        }
    }
}

fn minsup(value: f64) -> Result<MiningParameters> {
    MiningParameters::new(value).with_context(|| format!("invalid minsup {value}: expected a fraction in (0, 1]"))
}

impl AdvisorConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config file {}", path.display()))?;
                serde_json::from_str::<ConfigFile>(&text)
                    .with_context(|| format!("invalid config file {}", path.display()))?
            }
            None => ConfigFile::default(),
        };
        let budget = match (&args.budget, file.budget) {
            (Some(text), _) => Some(parse_budget(text)?),
            (None, Some(BudgetValue::Bytes(b))) => Some(b),
            (None, Some(BudgetValue::Text(text))) => Some(parse_budget(&text)?),
            (None, None) => None,
        };
        let defaults = CostParameters::default();
        let cost = CostParameters {
            maintenance_coefficient: args
                .maintenance_coefficient
                .or(file.maintenance_coefficient)
                .unwrap_or(defaults.maintenance_coefficient),
            between_fraction: args.between_fraction.or(file.between_fraction).unwrap_or(defaults.between_fraction),
            bitmap_limit: args.bitmap_limit.or(file.bitmap_limit).unwrap_or(defaults.bitmap_limit),
        };
        cost.validate()?;
        let retention_batches = args.retention_batches.or(file.retention_batches);
        if retention_batches == Some(0) {
            bail!("retention_batches must be a positive integer");
        }
        Ok(Self {
            schema: args.schema.clone().or(file.schema),
            kb: args.kb.clone().or(file.kb),
            state: args.state.clone().or(file.state),
            out: args.out.clone().or(file.out),
            minsup: args.minsup.or(file.minsup).map(minsup).transpose()?,
            budget,
            cost,
            retention_batches,
            report_format: args.report_format.or(file.report_format),
        })
    }

    pub fn minsup_or_default(&self) -> MiningParameters {
        self.minsup.unwrap_or_else(|| minsup(DEFAULT_MINSUP).expect("default minsup is valid"))
    }

    fn path<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        value.as_deref().with_context(|| format!("missing --{flag} (or `{flag}` in the config file)"))
    }

    pub fn schema_path(&self) -> Result<&Path> {
        Self::path(&self.schema, "schema")
    }

    pub fn kb_path(&self) -> Result<&Path> {
        Self::path(&self.kb, "kb")
    }

    pub fn state_path(&self) -> Result<&Path> {
        Self::path(&self.state, "state")
    }

    pub fn out_dir(&self) -> Result<&Path> {
        Self::path(&self.out, "out")
    }

    pub fn required_budget(&self) -> Result<u64> {
        self.budget.context("missing --budget (or `budget` in the config file)")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_suffixes() {
        assert_eq!(parse_budget("1024").unwrap(), 1024);
        assert_eq!(parse_budget("2KB").unwrap(), 2048);
        assert_eq!(parse_budget("3 mb").unwrap(), 3 << 20);
        assert_eq!(parse_budget("1.5GB").unwrap(), 3 << 29);
        assert_eq!(parse_budget("0").unwrap(), 0);
        assert_eq!(parse_budget("10B").unwrap(), 10);
        assert!(parse_budget("-1MB").is_err());
        assert!(parse_budget("lots").is_err());
        assert!(parse_budget("99999999999999GB").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(
            &path,
            r#"{"kb": "a.json", "state": "s.json", "minsup": 0.2, "budget": "1MB", "bitmap_limit": 99, "report_format": "csv"}"#,
        )
        .unwrap();
        let args = CommonArgs {
            config: Some(path),
            kb: Some("b.json".into()),
            budget: Some("2KB".into()),
            ..Default::default()
        };
        let c = AdvisorConfig::resolve(&args).unwrap();
        assert_eq!(c.kb.as_deref(), Some(Path::new("b.json")));
        assert_eq!(c.state.as_deref(), Some(Path::new("s.json")));
        assert_eq!(c.budget, Some(2048));
        assert_eq!(c.minsup, Some(MiningParameters::new(0.2).unwrap()));
        assert_eq!(c.cost.bitmap_limit, 99);
        assert_eq!(c.report_format, Some(ReportFormat::Csv));
        assert!(c.schema_path().unwrap_err().to_string().contains("--schema"));
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |args: CommonArgs| AdvisorConfig::resolve(&args).is_err();
        assert!(bad(CommonArgs { minsup: Some(0.0), ..Default::default() }));
        assert!(bad(CommonArgs { minsup: Some(1.5), ..Default::default() }));
        assert!(bad(CommonArgs { between_fraction: Some(2.0), ..Default::default() }));
        assert!(bad(CommonArgs { retention_batches: Some(0), ..Default::default() }));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{"minimum_support": 0.1}"#).unwrap();
        assert!(bad(CommonArgs { config: Some(path), ..Default::default() }));
    }
}
