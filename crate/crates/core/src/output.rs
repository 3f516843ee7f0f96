//! JSON and CSV emission with a reproducibility header.
//!
//! JSON documents are `{"header": ..., "result": ...}`. CSV files start with
//! `#` lines: tool and version, seed, fixed tolerances, then the resolved
//! config as TOML, so stripping the leading `# ` from the config block gives
//! a file that reproduces the run.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::ConfigFile;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Built-in tolerances; not configurable, echoed for the record.
#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    pub quadrature: f64,
    pub root: f64,
    pub power_iteration: f64,
    pub window_tail: f64,
    pub heat_leakage: f64,
    pub kernel_validation: f64,
    pub duhamel_doubling: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            quadrature: crate::green::QUADRATURE_TOL,
            root: crate::spectral::ROOT_TOL,
            power_iteration: crate::spectral::POWER_TOL,
            window_tail: crate::spectral::WINDOW_TAIL_TOL,
            heat_leakage: crate::green::LEAKAGE_TOL,
            kernel_validation: crate::kernel::VALIDATION_TOL,
            duhamel_doubling: crate::moments::duhamel::DOUBLING_TOL,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    pub tolerances: Tolerances,
    pub config: ConfigFile,
}

impl Header {
    pub fn new(command: &str, config: &ConfigFile, seed: Option<u64>) -> Self {
        Self {
            tool: "brw",
            version: VERSION,
            command: command.to_string(),
            seed,
            tolerances: Tolerances::default(),
            config: config.clone(),
        }
    }

    /// `#`-prefixed header block for CSV files.
    pub fn comment_block(&self) -> String {
        let mut out = format!("# {} {} {}\n", self.tool, self.version, self.command);
        if let Some(seed) = self.seed {
            out.push_str(&format!("# seed = {seed}\n"));
        }
        let tol = serde_json::to_string(&self.tolerances).expect("tolerances serialize");
        out.push_str(&format!("# tolerances = {tol}\n#\n"));
        for line in self.config.to_toml().lines() {
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                out.push_str(&format!("# {line}\n"));
            }
        }
        out
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    header: &'a Header,
    result: &'a T,
}

pub fn to_json<T: Serialize>(header: &Header, result: &T) -> String {
    serde_json::to_string_pretty(&Document { header, result }).expect("result serializes")
}

pub fn write_json<T: Serialize>(path: &Path, header: &Header, result: &T) -> std::io::Result<()> {
    let mut text = to_json(header, result);
    text.push('\n');
    std::fs::write(path, text)
}

/// CSV text: the header block, then `columns`, then `rows`.
pub fn to_csv<R, I>(header: &Header, columns: &[&str], rows: I) -> std::io::Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut buf = header.comment_block().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(columns)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn write_csv<R, I>(path: &Path, header: &Header, columns: &[&str], rows: I) -> std::io::Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let bytes = to_csv(header, columns, rows)?;
    std::fs::File::create(path)?.write_all(&bytes)
}

/// Recovers the config TOML embedded in a CSV header block.
pub fn config_from_comments(text: &str) -> String {
    let mut out = String::new();
    let mut in_config = false;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line.strip_prefix("# ").unwrap_or(line.trim_start_matches('#'));
        if !in_config {
            in_config = line == "#";
            continue;
        }
        out.push_str(body);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    const MINIMAL: &str = "dim = 1\n[[kernel]]\noffset = [1]\nrate = 0.5\n[[kernel]]\noffset = [-1]\nrate = 0.5\n[[sources]]\nposition = [0]\ncoefficients = [1.0, -3.0, 2.0]\n";

    #[test]
    fn csv_header_reproduces_config() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        let header = Header::new("test", &cfg.file, Some(7));
        let bytes = to_csv(&header, &["a", "b"], vec![vec!["1", "2"]]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.ends_with("a,b\n1,2\n"));
        let again = parse_config_str(&config_from_comments(&text)).unwrap();
        assert_eq!(again.file, cfg.file);
    }

    #[test]
    fn json_has_header_and_result() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        let header = Header::new("lambda0", &cfg.file, None);
        let v: serde_json::Value = serde_json::from_str(&to_json(&header, &42)).unwrap();
        assert_eq!(v["result"], 42);
        assert_eq!(v["header"]["config"]["dim"], 1);
        assert_eq!(v["header"]["version"], VERSION);
    }
}
