use serde::Serialize;
use std::io::Write;
use std::path::Path;
use stimpair::Result;

/// Echoed at the top of every output so a file can be regenerated.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<f64>,
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new<C: Serialize>(command: &'static str, seed: Option<u64>, shots: Option<f64>, config: &C) -> Self {
        Provenance {
            tool: format!("stimpair {}", env!("CARGO_PKG_VERSION")),
            command,
            seed,
            shots,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
        }
    }

    fn comment_lines(&self) -> String {
        let mut s = format!("# {} {}\n", self.tool, self.command);
        if let Some(seed) = self.seed {
            s.push_str(&format!("# seed={seed}\n"));
        }
        if let Some(shots) = self.shots {
            s.push_str(&format!("# shots={shots}\n"));
        }
        s.push_str(&format!("# config={}\n", self.config));
        s
    }
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

/// CSV with `#` provenance lines, then a header row and data rows.
pub fn csv_bytes(prov: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut buf = prov.comment_lines().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).map_err(csv_error)?;
        for row in rows {
            w.write_record(row).map_err(csv_error)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    Ok(buf)
}

fn csv_error(e: csv::Error) -> stimpair::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => stimpair::Error::Schema {
            line: 0,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

/// `f64` in shortest round-trip form.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}
