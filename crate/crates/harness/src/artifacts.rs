use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, HarnessResult};

/// Subdirectory that receives the artifacts of a failed run.
pub const FAILED_DIR: &str = "failed";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub status: String,
    pub error: Option<String>,
    pub files: Vec<ManifestEntry>,
    pub checks: Option<serde_json::Value>,
}

/// Writes artifacts under one directory and records their hashes.
#[derive(Debug)]
pub struct ArtifactWriter {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

/// Serialises to JSON with object keys sorted.
pub fn sorted_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serialisable value");
    let mut s = serde_json::to_string_pretty(&v).expect("value serialises");
    s.push('\n');
    s
}

impl ArtifactWriter {
    pub fn new(root: impl Into<PathBuf>) -> HarnessResult<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| HarnessError::io(&root, e))?;
        Ok(Self {
            root,
            entries: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> HarnessResult<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| HarnessError::io(&path, e))?;
        self.entries.retain(|e| e.path != name);
        self.entries.push(ManifestEntry {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> HarnessResult<PathBuf> {
        self.write_bytes(name, sorted_json(value).as_bytes())
    }

    /// RFC 4180 table of numbers with a header row.
    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<f64>>,
    ) -> HarnessResult<PathBuf> {
        let rows = rows.into_iter().map(|r| r.into_iter().map(format_float).collect());
        self.write_table(name, header, rows)
    }

    /// RFC 4180 table of text fields with a header row.
    pub fn write_table(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> HarnessResult<PathBuf> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        let path = self.root.join(name);
        let err = |e: csv::Error| HarnessError::io(&path, std::io::Error::other(e));
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(&row).map_err(err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| HarnessError::io(&path, std::io::Error::other(e.to_string())))?;
        self.write_bytes(name, &bytes)
    }

    /// Writes the manifest, sorted by path.
    pub fn finish(mut self, mut manifest: Manifest) -> HarnessResult<PathBuf> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        manifest.files = self.entries.clone();
        let path = self.root.join(MANIFEST);
        fs::write(&path, sorted_json(&manifest)).map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    }

    /// Moves every written artifact into `failed/` and writes the manifest there.
    pub fn fail(mut self, mut manifest: Manifest) -> HarnessResult<PathBuf> {
        let failed = self.root.join(FAILED_DIR);
        fs::create_dir_all(&failed).map_err(|e| HarnessError::io(&failed, e))?;
        for e in &mut self.entries {
            let from = self.root.join(&e.path);
            let to = failed.join(&e.path);
            fs::rename(&from, &to).map_err(|err| HarnessError::io(&from, err))?;
            e.path = format!("{FAILED_DIR}/{}", e.path);
        }
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        manifest.files = self.entries.clone();
        let path = failed.join(MANIFEST);
        fs::write(&path, sorted_json(&manifest)).map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    }
}

/// Shortest round-trip representation; non-finite values as `NaN`/`inf`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:?}")
    }
}

/// Self-contained SVG line plot of one or more `(x, y)` series.
pub fn svg_line_plot(title: &str, series: &[(&str, &[f64], &[f64])]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 48.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let finite = |v: &&f64| v.is_finite();
    let xs = series.iter().flat_map(|s| s.1.iter()).filter(finite);
    let ys = series.iter().flat_map(|s| s.2.iter()).filter(finite);
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (y0, y1) = ys.fold((0.0f64, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (x1, y1) = (if x1 > x0 { x1 } else { x0 + 1.0 }, if y1 > y0 { y1 } else { y0 + 1.0 });
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n\
         <line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>\n",
        W / 2.0,
        escape(title),
        H - M,
        W - M,
        H - M,
        H - M
    );
    out += &format!(
        "<text x=\"{M}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{x0:.3}</text>\n\
         <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{x1:.3}</text>\n\
         <text x=\"4\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{y1:.3}</text>\n",
        H - M + 14.0,
        W - M,
        H - M + 14.0,
        M + 4.0
    );
    for (i, (name, x, y)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(y.iter())
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(&a, &b)| format!("{:.2},{:.2}", sx(a), sy(b)))
            .collect();
        out += &format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\" text-anchor=\"end\">{}</text>\n",
            pts.join(" "),
            W - M,
            M + 14.0 * i as f64,
            escape(name)
        );
    }
    out += "</svg>\n";
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
