//! CSV writing helpers and read-back checks for everything the harness emits.

use std::collections::HashMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Shortest round-trip decimal form, with `-0` folded to `0`.
pub fn fmt_rate(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<BufWriter<fs::File>>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::Writer::from_writer(BufWriter::new(file));
        writer.write_record(header)?;
        Ok(CsvOut {
            path: path.to_path_buf(),
            writer,
        })
    }

    pub fn row<I, S>(&mut self, record: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(record)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path)
    }
}

fn bad(path: &Path, row: usize, msg: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(format!("{} row {row}: {msg}", path.display()))
}

fn column(headers: &csv::StringRecord, path: &Path, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Missing(format!("{}: no `{name}` column", path.display())))
}

/// Every listed column parses as a number in [0, 1].
pub fn validate_rate_columns(path: &Path, names: &[&str]) -> Result<usize> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let idx: Vec<usize> = names.iter().map(|n| column(&headers, path, n)).collect::<Result<_>>()?;
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        for (&c, name) in idx.iter().zip(names) {
            let v: f64 = rec[c]
                .parse()
                .map_err(|_| bad(path, i + 2, format!("`{name}` = {:?} is not a number", &rec[c])))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(bad(path, i + 2, format!("`{name}` = {v} outside [0, 1]")));
            }
        }
        rows += 1;
    }
    Ok(rows)
}

/// Trace tables: cumulative counts never decrease within a trial, and
/// followers and forwarders never exceed recipients.
pub fn validate_trace_csv(path: &Path) -> Result<usize> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let key: Vec<usize> = ["model", "k", "trial"]
        .iter()
        .map(|n| column(&headers, path, n))
        .collect::<Result<_>>()?;
    let step = column(&headers, path, "step")?;
    let counts: Vec<usize> = ["cum_recipients", "cum_forwarders", "cum_followers"]
        .iter()
        .map(|n| column(&headers, path, n))
        .collect::<Result<_>>()?;
    let mut last: HashMap<Vec<String>, (u64, [u64; 3])> = HashMap::new();
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let k: Vec<String> = key.iter().map(|&c| rec[c].to_string()).collect();
        let s: u64 = rec[step].parse().map_err(|_| bad(path, row, "bad step"))?;
        let mut c = [0u64; 3];
        for (slot, &col) in c.iter_mut().zip(&counts) {
            *slot = rec[col].parse().map_err(|_| bad(path, row, "bad count"))?;
        }
        if c[1] > c[0] || c[2] > c[0] {
            return Err(bad(path, row, "more forwarders or followers than recipients"));
        }
        if let Some((ps, pc)) = last.get(&k) {
            if s != ps + 1 {
                return Err(bad(path, row, format!("step {s} does not follow {ps}")));
            }
            if c.iter().zip(pc).any(|(a, b)| a < b) {
                return Err(bad(path, row, "cumulative count decreased"));
            }
        } else if s != 0 {
            return Err(bad(path, row, "trace does not start at step 0"));
        }
        last.insert(k, (s, c));
        rows += 1;
    }
    Ok(rows)
}
