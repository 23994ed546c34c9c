use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::solution::SolutionMatrix;
use crate::stats::ParameterVector;

pub const DATASET_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"CAEROMDS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    /// Number of snapshots.
    pub n: usize,
    /// Rows per snapshot.
    pub d: usize,
    /// Columns per snapshot.
    pub n_t: usize,
    pub parameter_names: Vec<String>,
    pub dtype: String,
    pub solver_fingerprint: String,
    /// Smallest and largest stored solution value.
    pub value_range: [f64; 2],
    pub time_axis: Vec<f64>,
}

/// `N` parameter vectors with their `d × N_t` solution matrices. Values are
/// held at f32 precision so that a reloaded dataset is identical.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotDataset {
    pub header: DatasetHeader,
    pub params: Vec<ParameterVector>,
    pub solutions: Vec<SolutionMatrix>,
}

fn quantize(v: f64) -> f64 {
    v as f32 as f64
}

impl SnapshotDataset {
    pub fn new(
        parameter_names: Vec<String>,
        solver_fingerprint: String,
        params: Vec<ParameterVector>,
        solutions: Vec<SolutionMatrix>,
    ) -> Result<Self> {
        if params.len() != solutions.len() || params.is_empty() {
            return Err(Error::dim(
                "snapshot pairs",
                &[params.len()],
                &[solutions.len()],
            ));
        }
        let (d, n_t) = solutions[0].shape();
        let time_axis = solutions[0].time_axis.clone();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut stored = Vec::with_capacity(solutions.len());
        for u in solutions {
            if u.shape() != (d, n_t) {
                return Err(Error::dim("snapshot", &[d, n_t], &[u.dofs(), u.steps()]));
            }
            if !u.is_finite() {
                return Err(Error::NonFinite("snapshot".into()));
            }
            let values: Vec<f64> = u.values().iter().map(|&v| quantize(v)).collect();
            for &v in &values {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            stored.push(SolutionMatrix::new(d, n_t, values)?.with_time_axis(time_axis.clone()));
        }
        let n_params = parameter_names.len();
        let mut params_q = Vec::with_capacity(params.len());
        for p in params {
            if p.len() != n_params {
                return Err(Error::dim("parameter vector", &[n_params], &[p.len()]));
            }
            params_q.push(ParameterVector::new(
                p.values.iter().map(|&v| quantize(v)).collect(),
            ));
        }
        Ok(SnapshotDataset {
            header: DatasetHeader {
                format_version: DATASET_VERSION,
                n: stored.len(),
                d,
                n_t,
                parameter_names,
                dtype: "f32le".into(),
                solver_fingerprint,
                value_range: [lo, hi],
                time_axis,
            },
            params: params_q,
            solutions: stored,
        })
    }

    pub fn len(&self) -> usize {
        self.header.n
    }

    pub fn is_empty(&self) -> bool {
        self.header.n == 0
    }

    /// First `n` snapshots.
    pub fn head(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::Config(format!(
                "cannot take {n} of {} snapshots",
                self.len()
            )));
        }
        SnapshotDataset::new(
            self.header.parameter_names.clone(),
            self.header.solver_fingerprint.clone(),
            self.params[..n].to_vec(),
            self.solutions[..n].to_vec(),
        )
    }

    fn body(&self) -> Result<Vec<u8>> {
        let json = serde_json::to_vec(&self.header).map_err(|e| Error::Format(e.to_string()))?;
        let h = &self.header;
        let mut out = Vec::with_capacity(
            16 + json.len() + 4 * h.n * (h.parameter_names.len() + h.d * h.n_t) + 8,
        );
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for p in &self.params {
            for &v in &p.values {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        for u in &self.solutions {
            for &v in u.values() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    /// 64-bit digest of the serialized header and blocks.
    pub fn checksum(&self) -> Result<u64> {
        Ok(digest64(&self.body()?))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = self.body()?;
        let sum = digest64(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |m: &str| Error::Format(format!("dataset: {m}"));
        if bytes.len() < 24 || &bytes[..8] != MAGIC {
            return Err(fail("not a snapshot dataset"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8-byte tail"));
        if stored != digest64(body) {
            return Err(fail("checksum mismatch"));
        }
        let len = u64::from_le_bytes(body[8..16].try_into().expect("8 bytes")) as usize;
        let json = body
            .get(16..16usize.saturating_add(len))
            .ok_or_else(|| fail("truncated header"))?;
        let header: DatasetHeader =
            serde_json::from_slice(json).map_err(|e| fail(&e.to_string()))?;
        if header.format_version != DATASET_VERSION {
            return Err(Error::Compatibility(format!(
                "dataset format version {} (supported: {DATASET_VERSION})",
                header.format_version
            )));
        }
        let n_p = header.parameter_names.len();
        let block = &body[16 + len..];
        let expected = 4 * header.n * (n_p + header.d * header.n_t);
        if block.len() != expected {
            return Err(fail(&format!(
                "blocks hold {} bytes, header implies {expected}",
                block.len()
            )));
        }
        let floats: Vec<f64> = block
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        let (pblock, sblock) = floats.split_at(header.n * n_p);
        let params = pblock
            .chunks(n_p.max(1))
            .take(header.n)
            .map(|c| ParameterVector::new(c.to_vec()))
            .collect();
        let size = header.d * header.n_t;
        let solutions = sblock
            .chunks(size)
            .map(|c| {
                Ok(SolutionMatrix::new(header.d, header.n_t, c.to_vec())?
                    .with_time_axis(header.time_axis.clone()))
            })
            .collect::<Result<_>>()?;
        Ok(SnapshotDataset {
            header,
            params,
            solutions,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn digest64(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
