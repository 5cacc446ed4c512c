//! Machine-readable report files: CSV tables with 17-significant-digit
//! floats, LF line endings, and a run manifest that makes every number
//! reconstructible.

use std::fs;
use std::io::Write;
use std::path::Path;

/// 17 significant digits: round-trips every f64 bit pattern.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `header` plus `rows` as UTF-8 CSV with LF line endings.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut buf = String::new();
    buf.push_str(header);
    buf.push('\n');
    for row in rows {
        buf.push_str(&row.join(","));
        buf.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(buf.as_bytes())
}

/// Writes the run manifest: config echo, library version, seed, and the
/// list of produced files.
pub fn write_manifest(
    path: &Path,
    config_echo: &str,
    seed: u64,
    files: &[String],
) -> std::io::Result<()> {
    let mut buf = String::new();
    buf.push_str(&format!(
        "library = smc-core {}\nrunner = smc-bench {}\nseed = {seed}\n\n[config]\n",
        smc_core_version(),
        env!("CARGO_PKG_VERSION"),
    ));
    buf.push_str(config_echo);
    buf.push_str("\n\n[files]\n");
    for f in files {
        buf.push_str(f);
        buf.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(buf.as_bytes())
}

fn smc_core_version() -> &'static str {
    // Same workspace, same version line.
    env!("CARGO_PKG_VERSION")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for v in [
            0.1f64,
            1.0 / 3.0,
            std::f64::consts::PI,
            -1.2345678901234567e-300,
            6.02214076e23,
        ] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }
}
