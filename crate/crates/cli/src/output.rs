use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

use crate::error::CliResult;

#[derive(Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: &'a C,
    pub seed: Option<u64>,
    pub wall_time_s: f64,
}

#[derive(Serialize)]
pub struct Report<'a, C: Serialize, R: Serialize> {
    pub manifest: Manifest<'a, C>,
    pub result: R,
}

/// Where the JSON report goes: `--out`, else `<out-dir>/<command>.json`,
/// else stdout.
pub fn report_target(out: &Option<PathBuf>, out_dir: &Option<PathBuf>, command: &str) -> Option<PathBuf> {
    out.clone().or_else(|| out_dir.as_ref().map(|d| d.join(format!("{command}.json"))))
}

pub fn write_report<T: Serialize>(target: Option<PathBuf>, report: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(report)?;
    match target {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            let mut f = File::create(&path)?;
            writeln!(f, "{text}")?;
            eprintln!("report written to {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}
