use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::{NaiveDateTime, SecondsFormat, TimeZone, Utc};

use super::{FeatureTable, RawSeries, Timestamp, PREDISPATCH_COLUMNS};
use crate::error::{Error, Result};

pub(crate) fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(t) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(t);
    }
    // Offset-less timestamps are taken as UTC.
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(n) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Utc.from_utc_datetime(&n).fixed_offset());
        }
    }
    None
}

fn parse_cell(s: &str) -> f64 {
    s.trim().parse::<f64>().unwrap_or(f64::NAN)
}

pub(crate) fn format_timestamp(t: &Timestamp) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, false)
}

/// Read a market CSV. Rows come back sorted by timestamp.
pub fn load_csv(path: impl AsRef<Path>) -> Result<RawSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);

    let mut required = [0usize; 3];
    for (slot, name) in required.iter_mut().zip(["settlement_time", "price", "demand"]) {
        *slot = find(name).ok_or_else(|| {
            Error::data(format!("{}: missing column: {name}", path.display()))
        })?;
    }
    let [time_col, price_col, demand_col] = required;
    let pre_cols: Vec<(String, usize)> = PREDISPATCH_COLUMNS
        .iter()
        .filter_map(|n| find(n).map(|i| (n.to_string(), i)))
        .collect();

    let mut rows: Vec<(Timestamp, f64, f64, Vec<f64>)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let cell = |i: usize| record.get(i).unwrap_or("");
        let ts_raw = cell(time_col);
        let ts = parse_timestamp(ts_raw).ok_or_else(|| {
            Error::data(format!(
                "{}: row {}: unparseable timestamp {ts_raw:?}",
                path.display(),
                line + 2
            ))
        })?;
        let extra = pre_cols.iter().map(|(_, i)| parse_cell(cell(*i))).collect();
        rows.push((ts, parse_cell(cell(price_col)), parse_cell(cell(demand_col)), extra));
    }
    rows.sort_by_key(|r| r.0);

    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::data(format!(
                "{}: duplicate timestamp {}",
                path.display(),
                format_timestamp(&w[0].0)
            )));
        }
    }
    if rows.len() >= 3 {
        let step = rows[1].0 - rows[0].0;
        for (i, w) in rows.windows(2).enumerate().skip(1) {
            if w[1].0 - w[0].0 != step {
                return Err(Error::data(format!(
                    "{}: non-uniform interval spacing at sorted row {} ({})",
                    path.display(),
                    i + 1,
                    format_timestamp(&w[1].0)
                )));
            }
        }
    }

    let mut series = RawSeries {
        timestamps: Vec::with_capacity(rows.len()),
        price: Vec::with_capacity(rows.len()),
        demand: Vec::with_capacity(rows.len()),
        predispatch: pre_cols
            .iter()
            .map(|(n, _)| (n.clone(), Vec::with_capacity(rows.len())))
            .collect(),
    };
    for (ts, p, d, extra) in rows {
        series.timestamps.push(ts);
        series.price.push(p);
        series.demand.push(d);
        for ((_, col), v) in series.predispatch.iter_mut().zip(extra) {
            col.push(v);
        }
    }
    Ok(series)
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<File>> {
    File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Write a raw series in the input schema (LF newlines).
pub fn write_raw_csv(series: &RawSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let mut header = String::from("settlement_time,price,demand");
    for (name, _) in &series.predispatch {
        header.push(',');
        header.push_str(name);
    }
    let mut buf = header;
    buf.push('\n');
    for i in 0..series.len() {
        buf.push_str(&format_timestamp(&series.timestamps[i]));
        for v in [series.price[i], series.demand[i]]
            .into_iter()
            .chain(series.predispatch.iter().map(|(_, c)| c[i]))
        {
            buf.push(',');
            buf.push_str(&fmt_value(v));
        }
        buf.push('\n');
    }
    out.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Export a feature table: `row_timestamp`, features, then both targets.
pub fn write_feature_csv(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let mut buf = String::from("row_timestamp");
    for name in &table.column_names {
        buf.push(',');
        buf.push_str(name);
    }
    buf.push_str(",target_price,target_demand\n");
    for i in 0..table.n_rows() {
        buf.push_str(&format_timestamp(&table.timestamps[i]));
        for col in &table.columns {
            buf.push(',');
            buf.push_str(&fmt_value(col[i]));
        }
        buf.push(',');
        buf.push_str(&fmt_value(table.target_price[i]));
        buf.push(',');
        buf.push_str(&fmt_value(table.target_demand[i]));
        buf.push('\n');
    }
    out.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    const FULL_HEADER: &str = "settlement_time,price,demand,pred_price_avg32,pred_price_best32,pred_demand_avg32,pred_demand_best32";

    #[test]
    fn loads_three_rows_with_all_columns() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{FULL_HEADER}\n\
             2023-05-01T13:30:00+09:30,50.5,1200,51,50,1190,1201\n\
             2023-05-01T14:00:00+09:30,-3.2,1250,0,-2,1240,1249\n\
             2023-05-01T14:30:00+09:30,80,1300,70,79,1310,1302\n"
        );
        let s = load_csv(write(&dir, "a.csv", &body)).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.predispatch.len(), 4);
        assert_eq!(s.price[1], -3.2);
        assert_eq!(s.predispatch[3].1[2], 1302.0);
    }

    #[test]
    fn missing_demand_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "b.csv", "settlement_time,price\n2023-05-01T13:30:00+09:30,1\n");
        let err = load_csv(p).unwrap_err().to_string();
        assert!(err.contains("missing column: demand"), "{err}");
    }

    #[test]
    fn out_of_order_rows_are_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "c.csv",
            "settlement_time,price,demand\r\n\
             2023-05-01T14:30:00+09:30,3,30\r\n\
             2023-05-01T13:30:00+09:30,1,10\r\n\
             2023-05-01T14:00:00+09:30,2,20\r\n",
        );
        let s = load_csv(p).unwrap();
        assert_eq!(s.price, vec![1.0, 2.0, 3.0]);
        assert!(s.timestamps.windows(2).all(|w| w[0] < w[1]));
        assert!(s.predispatch.is_empty());
    }

    #[test]
    fn rejects_duplicates_gaps_and_bad_timestamps() {
        let dir = tempfile::tempdir().unwrap();
        let dup = write(
            &dir,
            "d.csv",
            "settlement_time,price,demand\n2023-05-01T13:30:00Z,1,1\n2023-05-01T13:30:00Z,1,1\n",
        );
        assert!(load_csv(dup).unwrap_err().to_string().contains("duplicate"));
        let gap = write(
            &dir,
            "e.csv",
            "settlement_time,price,demand\n2023-05-01T13:00:00Z,1,1\n2023-05-01T13:30:00Z,1,1\n2023-05-01T14:30:00Z,1,1\n",
        );
        let msg = load_csv(gap).unwrap_err().to_string();
        assert!(msg.contains("non-uniform") && msg.contains("row 2"), "{msg}");
        let bad = write(&dir, "f.csv", "settlement_time,price,demand\nyesterday,1,1\n");
        assert!(matches!(load_csv(bad), Err(Error::Data(_))));
    }

    #[test]
    fn unparseable_number_becomes_missing() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "g.csv",
            "settlement_time,price,demand\n2023-05-01T13:30:00Z,abc,1\n2023-05-01T14:00:00Z,2,1\n",
        );
        let s = load_csv(p).unwrap();
        assert!(s.price[0].is_nan());
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = load_csv("/nonexistent/missing.csv").unwrap_err();
        assert!(err.is_data());
        assert!(err.to_string().contains("missing.csv"));
    }
}
