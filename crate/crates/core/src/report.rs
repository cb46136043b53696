//! Result records and their CSV/JSON serialization.
//!
//! Both formats are rendered in memory and then written through a temporary
//! file and a rename, so a failed run never leaves partial output behind.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::OutputFormat;
use crate::error::{Error, Result};
use crate::optimizer::AttackSolution;
use crate::rating::RatingSheet;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Reproducibility header embedded in every output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub config_sha256: String,
}

impl Meta {
    pub fn new(subcommand: &str, seed: u64, config_sha256: String) -> Self {
        Self {
            tool: "cvsat".into(),
            version: TOOL_VERSION.into(),
            subcommand: subcommand.into(),
            seed,
            config_sha256,
        }
    }
}

/// One distance point. Standard deviations are present only when the
/// point went through Monte Carlo; estimates and key rates that are
/// undefined at the chosen attack point are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub d_km: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "V_A")]
    pub v_a: f64,
    pub delta: f64,
    pub gain: f64,
    pub t_sat: Option<f64>,
    pub t_sat_std: Option<f64>,
    pub xi_sat: Option<f64>,
    pub xi_sat_std: Option<f64>,
    pub xi_null: f64,
    pub k_attack: Option<f64>,
    pub k_honest: f64,
    pub feasible: bool,
}

impl From<&AttackSolution> for ResultRecord {
    fn from(s: &AttackSolution) -> Self {
        Self {
            d_km: s.distance_km,
            t: s.t,
            v_a: s.v_a,
            delta: s.delta,
            gain: s.gain,
            t_sat: finite(s.t_sat),
            t_sat_std: None,
            xi_sat: finite(s.xi_sat),
            xi_sat_std: None,
            xi_null: s.xi_null,
            k_attack: finite(s.key_rate),
            k_honest: s.k_honest,
            feasible: s.feasible,
        }
    }
}

pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Null-key threshold with the key rate evaluated on either side of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub d_km: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "V_A")]
    pub v_a: f64,
    pub xi_null: f64,
    pub bracket: f64,
    /// Key rate at `xi_null - bracket`; positive.
    pub k_below: f64,
    /// Key rate at `xi_null + bracket`; negative.
    pub k_above: f64,
}

/// Flattened [`RatingSheet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub attack_name: String,
    pub expertise: String,
    pub knowledge: String,
    pub window: String,
    pub equipment: String,
    pub attack_potential: u32,
    pub severity: String,
    pub unbounded: bool,
    pub notes: String,
}

impl From<&RatingSheet> for RatingRecord {
    fn from(s: &RatingSheet) -> Self {
        Self {
            attack_name: s.attack_name.clone(),
            expertise: s.factors.expertise.to_string(),
            knowledge: s.factors.knowledge.to_string(),
            window: s.factors.window.to_string(),
            equipment: s.factors.equipment.to_string(),
            attack_potential: s.attack_potential,
            severity: s.severity.to_string(),
            unbounded: s.unbounded,
            notes: s.notes.clone(),
        }
    }
}

#[derive(Serialize)]
struct JsonDocument<'a, R> {
    meta: &'a Meta,
    rows: &'a [R],
}

/// CSV with `# key: value` header lines ahead of the column row.
pub fn render_csv<R: Serialize>(meta: &Meta, rows: &[R]) -> Result<String> {
    let mut out = format!(
        "# tool: {} {}\n# subcommand: {}\n# seed: {}\n# config_sha256: {}\n",
        meta.tool, meta.version, meta.subcommand, meta.seed, meta.config_sha256
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(format!("csv: {e}")))?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(format!("csv: {e}")))?;
    out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
    Ok(out)
}

pub fn render_json<R: Serialize>(meta: &Meta, rows: &[R]) -> Result<String> {
    let mut s =
        serde_json::to_string_pretty(&JsonDocument { meta, rows }).map_err(|e| Error::Io(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes `<dir>/<stem>.csv` and/or `<dir>/<stem>.json`; returns the paths.
pub fn write_report<R: Serialize>(
    dir: &Path,
    stem: &str,
    meta: &Meta,
    rows: &[R],
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    if format.csv() {
        files.push((dir.join(format!("{stem}.csv")), render_csv(meta, rows)?));
    }
    if format.json() {
        files.push((dir.join(format!("{stem}.json")), render_json(meta, rows)?));
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (path, text) in files {
        write_atomic(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::from(e)
    })
}

/// Reads back a CSV written by [`render_csv`], skipping the header lines.
pub fn read_csv<R: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<R>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Io(format!("csv: {e}")))
}
