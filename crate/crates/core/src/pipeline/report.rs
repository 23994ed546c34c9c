use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::hexfloat::{hex, hex_vec};
use crate::error::{Error, Result};
use crate::solution::SolutionMatrix;
use crate::stats::PdfEstimate;

/// Matrix with exactly serialized entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub dofs: usize,
    pub steps: usize,
    #[serde(with = "hex_vec")]
    pub values: Vec<f64>,
}

impl From<&SolutionMatrix> for MatrixRecord {
    fn from(u: &SolutionMatrix) -> Self {
        MatrixRecord {
            dofs: u.dofs(),
            steps: u.steps(),
            values: u.values().to_vec(),
        }
    }
}

impl MatrixRecord {
    pub fn to_matrix(&self) -> Result<SolutionMatrix> {
        SolutionMatrix::new(self.dofs, self.steps, self.values.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PdfRecord {
    Curve {
        #[serde(with = "hex_vec")]
        grid: Vec<f64>,
        #[serde(with = "hex_vec")]
        density: Vec<f64>,
        #[serde(with = "hex")]
        bandwidth: f64,
    },
    PointMass {
        #[serde(with = "hex")]
        value: f64,
    },
    /// Too few samples for a density estimate.
    Unavailable { reason: String },
}

impl From<PdfEstimate> for PdfRecord {
    fn from(p: PdfEstimate) -> Self {
        match p {
            PdfEstimate::Curve {
                grid,
                density,
                bandwidth,
            } => PdfRecord::Curve {
                grid,
                density,
                bandwidth,
            },
            PdfEstimate::PointMass { value } => PdfRecord::PointMass { value },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub label: String,
    pub dof: usize,
    pub step: usize,
    #[serde(with = "hex")]
    pub mean: f64,
    #[serde(with = "hex")]
    pub variance: f64,
    pub pdf: PdfRecord,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McSource {
    Surrogate,
    Exact,
}

/// Wall time of one named stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub name: String,
    pub seconds: f64,
}

/// Per-stage wall-clock breakdown.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub stages: Vec<StageTime>,
}

impl CostLedger {
    pub fn record(&mut self, name: &str, seconds: f64) {
        self.stages.push(StageTime {
            name: name.into(),
            seconds,
        });
    }

    pub fn total(&self) -> f64 {
        self.stages.iter().map(|s| s.seconds).sum()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.stages
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.seconds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// Normalized errors of surrogate ensemble statistics against exact ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McComparison {
    #[serde(with = "hex")]
    pub mean_error: f64,
    #[serde(with = "hex")]
    pub variance_error: f64,
}

/// Outcome of a Monte-Carlo run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub source: McSource,
    pub n_mc: usize,
    pub seed: u64,
    pub threads: usize,
    pub mean: MatrixRecord,
    pub variance: MatrixRecord,
    pub probes: Vec<ProbeReport>,
    /// Draws outside the surrogate's training box.
    pub out_of_range: usize,
    #[serde(with = "hex")]
    pub seconds: f64,
    #[serde(with = "hex")]
    pub per_simulation_seconds: f64,
    #[serde(default)]
    pub comparison: Option<McComparison>,
}

impl McReport {
    pub fn mean_matrix(&self) -> Result<SolutionMatrix> {
        self.mean.to_matrix()
    }

    pub fn variance_matrix(&self) -> Result<SolutionMatrix> {
        self.variance.to_matrix()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// `d` rows of `N_t` comma-separated values, no header.
pub fn write_matrix_csv(path: &Path, u: &SolutionMatrix) -> Result<()> {
    let mut w = create(path)?;
    for i in 0..u.dofs() {
        let row: Vec<String> = u.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_rows(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write the report to `dir`: `mean.csv`, `variance.csv`, one `pdf_<k>.csv`
/// per probe, `histories.csv` (mean and variance over time at every probe
/// row), `summary.json`, and `ledger.json` when a ledger is given.
pub fn report_emit(
    report: &McReport,
    ledger: Option<&CostLedger>,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mean = report.mean_matrix()?;
    let var = report.variance_matrix()?;
    for (name, m) in [("mean.csv", &mean), ("variance.csv", &var)] {
        let p = dir.join(name);
        write_matrix_csv(&p, m)?;
        written.push(p);
    }
    for (k, probe) in report.probes.iter().enumerate() {
        let p = dir.join(format!("pdf_{k}.csv"));
        let rows: Vec<Vec<String>> = match &probe.pdf {
            PdfRecord::Curve { grid, density, .. } => grid
                .iter()
                .zip(density)
                .map(|(x, f)| vec![x.to_string(), f.to_string()])
                .collect(),
            PdfRecord::PointMass { value } => vec![vec![value.to_string(), "inf".into()]],
            PdfRecord::Unavailable { .. } => Vec::new(),
        };
        write_rows(&p, &["value", "density"], rows)?;
        written.push(p);
    }
    let p = dir.join("histories.csv");
    let mut header = vec!["step".to_string()];
    for probe in &report.probes {
        header.push(format!("mean[{}]", probe.label));
        header.push(format!("variance[{}]", probe.label));
    }
    let rows = (0..mean.steps()).map(|k| {
        let mut r = vec![k.to_string()];
        for probe in &report.probes {
            r.push(mean.get(probe.dof, k).to_string());
            r.push(var.get(probe.dof, k).to_string());
        }
        r
    });
    write_rows(
        &p,
        &header.iter().map(String::as_str).collect::<Vec<_>>(),
        rows,
    )?;
    written.push(p);
    let p = dir.join("summary.json");
    write_json(&p, report)?;
    written.push(p);
    if let Some(l) = ledger {
        let p = dir.join("ledger.json");
        l.save(&p)?;
        written.push(p);
    }
    Ok(written)
}

/// `(step, exact column, surrogate column)` at one requested instant.
pub type Profile = (usize, Vec<f64>, Vec<f64>);

/// One row of a validation table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub theta: Vec<f64>,
    pub error: Option<f64>,
    pub out_of_range: bool,
    pub failure: Option<String>,
    pub profiles: Vec<Profile>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationTable {
    pub rows: Vec<ValidationRow>,
}

impl ValidationTable {
    /// `validation.csv` with one line per θ, plus `profile_<i>_<step>.csv`
    /// with `dof,exact,surrogate` columns.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let rows = self.rows.iter().map(|r| {
            vec![
                r.theta
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
                r.error.map_or(String::new(), |e| e.to_string()),
                r.out_of_range.to_string(),
                r.failure.clone().unwrap_or_default(),
            ]
        });
        write_rows(
            &dir.join("validation.csv"),
            &["theta", "error", "out_of_range", "failure"],
            rows,
        )?;
        for (i, r) in self.rows.iter().enumerate() {
            for (step, exact, sur) in &r.profiles {
                let rows = exact
                    .iter()
                    .zip(sur)
                    .enumerate()
                    .map(|(d, (e, s))| vec![d.to_string(), e.to_string(), s.to_string()]);
                write_rows(
                    &dir.join(format!("profile_{i}_{step}.csv")),
                    &["dof", "exact", "surrogate"],
                    rows,
                )?;
            }
        }
        Ok(())
    }
}

/// One `(l, N)` cell of a convergence study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCell {
    pub latent_dim: usize,
    pub dataset_size: usize,
    pub mean_error: Option<f64>,
    pub failure: Option<String>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub cells: Vec<ConvergenceCell>,
}

impl ConvergenceTable {
    pub fn get(&self, latent_dim: usize, dataset_size: usize) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.latent_dim == latent_dim && c.dataset_size == dataset_size)
            .and_then(|c| c.mean_error)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = self.cells.iter().map(|c| {
            vec![
                c.latent_dim.to_string(),
                c.dataset_size.to_string(),
                c.mean_error.map_or(String::new(), |e| e.to_string()),
                c.seconds.to_string(),
                c.failure.clone().unwrap_or_default(),
            ]
        });
        write_rows(
            path,
            &[
                "latent_dim",
                "dataset_size",
                "mean_error",
                "seconds",
                "failure",
            ],
            rows,
        )
    }
}
