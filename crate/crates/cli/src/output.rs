//! Result serialization: CSV and JSON documents, written atomically.
//!
//! All floating-point values are rendered with 17 significant digits so
//! that reruns of the same seeded experiment produce byte-identical files.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes via a temporary sibling file and an atomic rename, so an
/// interrupted run never leaves a truncated result behind.
pub fn atomic_write(path: &Path, contents: &[u8]) -> io::Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = path.with_file_name(format!("{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    match fs::rename(&tmp, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ConvergenceDoc {
    pub h: Vec<f64>,
    pub rms_error: Vec<f64>,
    pub batch_stderr: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub num_paths: usize,
}

impl ConvergenceDoc {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,rms_error,batch_stderr\n");
        for i in 0..self.h.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt17(self.h[i]),
                fmt17(self.rms_error[i]),
                fmt17(self.batch_stderr[i])
            ));
        }
        out.push_str(&format!(
            "#slope={},r2={}\n",
            fmt17(self.slope),
            fmt17(self.r_squared)
        ));
        out
    }
}

#[derive(Debug, Serialize)]
pub struct PositivityRow {
    pub scheme: String,
    pub case: String,
    pub phi: String,
    pub h: f64,
    pub total: usize,
    pub negative: usize,
    pub diverged: usize,
    pub fraction: f64,
}

pub fn positivity_csv(rows: &[PositivityRow]) -> String {
    let mut out = String::from("scheme,case,phi,h,total,negative,diverged,fraction\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.scheme,
            r.case,
            r.phi,
            fmt17(r.h),
            r.total,
            r.negative,
            r.diverged,
            fmt17(r.fraction)
        ));
    }
    out
}

#[derive(Debug, Serialize)]
pub struct MomentsDoc {
    pub t: Vec<f64>,
    pub estimate: Vec<f64>,
}

impl MomentsDoc {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,estimate\n");
        for (t, e) in self.t.iter().zip(&self.estimate) {
            out.push_str(&format!("{},{}\n", fmt17(*t), fmt17(*e)));
        }
        out
    }
}

pub fn to_json<T: Serialize>(doc: &T) -> Result<Vec<u8>, serde_json::Error> {
    let mut bytes = serde_json::to_vec_pretty(doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}
