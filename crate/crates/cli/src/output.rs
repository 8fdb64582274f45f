//! Artifact writing: every file embeds the run's configuration and is written
//! through a temporary file renamed into place.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::{json, Value};

pub type RunConfig = BTreeMap<String, String>;

/// Flattens a serializable value into dotted `key -> value` strings.
pub fn flatten_config(prefix: &str, value: &Value, out: &mut RunConfig) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_config(&key, v, out);
            }
        }
        Value::Null => {}
        Value::String(s) => {
            out.insert(prefix.to_string(), s.clone());
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}

pub struct Artifacts {
    dir: PathBuf,
    stem: String,
    config: RunConfig,
    svg: bool,
    pub written: Vec<PathBuf>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

impl Artifacts {
    pub fn new(dir: &Path, stem: &str, config: RunConfig, svg: bool) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            stem: stem.to_string(),
            config,
            svg,
            written: Vec::new(),
        })
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.stem))
    }

    fn put(&mut self, suffix: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.path(suffix);
        write_atomic(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }

    /// CSV body with a header row, preceded by `# key=value` config lines.
    pub fn csv(&mut self, suffix: &str, body: &str) -> anyhow::Result<()> {
        let mut text = String::new();
        for (k, v) in &self.config {
            text.push_str(&format!("# {k}={v}\n"));
        }
        text.push_str(body);
        self.put(suffix, text.as_bytes())
    }

    /// `{"config": ..., "result": ...}`.
    pub fn json(&mut self, suffix: &str, result: Value) -> anyhow::Result<()> {
        let doc = json!({ "config": self.config, "result": result });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.put(suffix, text.as_bytes())
    }

    /// Polyline plot, written only when SVG output was requested.
    pub fn plot(&mut self, suffix: &str, title: &str, series: &[(f64, f64)]) -> anyhow::Result<()> {
        if !self.svg {
            return Ok(());
        }
        let desc: Vec<String> = self.config.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let svg = polyline_svg(title, &desc.join("\n"), series);
        self.put(suffix, svg.as_bytes())
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn polyline_svg(title: &str, desc: &str, series: &[(f64, f64)]) -> String {
    let (w, h, m) = (640.0, 400.0, 48.0);
    let finite: Vec<(f64, f64)> = series.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if finite.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let points: Vec<String> = finite.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">
<title>{title}</title>
<desc>{desc}</desc>
<rect width="100%" height="100%" fill="white"/>
<rect x="{m}" y="{m}" width="{iw}" height="{ih}" fill="none" stroke="#999"/>
<text x="{m}" y="{ty}" font-family="sans-serif" font-size="14">{title}</text>
<text x="{m}" y="{by}" font-family="sans-serif" font-size="11">x: {x0:.4e} .. {x1:.4e}   y: {y0:.4e} .. {y1:.4e}</text>
<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{pts}"/>
</svg>
"##,
        iw = w - 2.0 * m,
        ih = h - 2.0 * m,
        ty = m - 16.0,
        by = h - 16.0,
        title = escape(title),
        desc = escape(desc),
        pts = points.join(" "),
    )
}

/// One `--check` line.
#[derive(Clone, Debug, serde::Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

pub fn check(name: &str, pass: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.to_string(),
        pass,
        detail: detail.into(),
    }
}
