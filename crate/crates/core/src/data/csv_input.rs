use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use ndarray::Array2;

use super::{DataError, RawSeries};

/// Which columns of a CSV file to read.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CsvColumns {
    /// Integer or ISO-8601 column converted to a step index. When absent,
    /// rows are numbered `0..L`.
    pub time: Option<String>,
    pub targets: Vec<String>,
    pub features: Vec<String>,
}

/// Reads a header-first, comma-separated UTF-8 file.
///
/// Row numbers in errors are 1-based data rows (the header is row 0).
pub fn load_csv(path: impl AsRef<Path>, cols: &CsvColumns) -> Result<RawSeries, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, cols)
}

/// Writes `series` as CSV with an integer `time` column followed by the
/// feature and target columns. [`load_csv`] reads it back unchanged.
pub fn write_csv(series: &RawSeries, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    write_series(series, &mut out)?;
    std::fs::write(path, out).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_series(series: &RawSeries, out: impl std::io::Write) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string()];
    header.extend(series.feature_names.iter().cloned());
    header.extend(series.target_names.iter().cloned());
    w.write_record(&header)?;
    for (i, t) in series.time_index.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(series.features.row(i).iter().map(f64::to_string));
        row.extend(series.targets.row(i).iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| DataError::Csv(e.into()))
}

pub(crate) fn read_csv(reader: impl std::io::Read, cols: &CsvColumns) -> Result<RawSeries, DataError> {
    if cols.targets.is_empty() {
        return Err(DataError::InvalidConfig("no target columns given".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let locate = |name: &String| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DataError::MissingColumn(name.clone()))
    };
    let target_idx = cols.targets.iter().map(locate).collect::<Result<Vec<_>, _>>()?;
    let feature_idx = cols.features.iter().map(locate).collect::<Result<Vec<_>, _>>()?;
    let time_idx = cols.time.as_ref().map(locate).transpose()?;

    let mut targets = Vec::new();
    let mut features = Vec::new();
    let mut raw_times = Vec::new();
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record?;
        rows += 1;
        let cell = |idx: usize, name: &String| -> Result<f64, DataError> {
            record
                .get(idx)
                .and_then(|c| c.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::NonNumericCell(rows, name.clone()))
        };
        for (&i, name) in target_idx.iter().zip(&cols.targets) {
            targets.push(cell(i, name)?);
        }
        for (&i, name) in feature_idx.iter().zip(&cols.features) {
            features.push(cell(i, name)?);
        }
        if let (Some(i), Some(name)) = (time_idx, cols.time.as_ref()) {
            let raw = record.get(i).unwrap_or("");
            let t = parse_time(raw).ok_or_else(|| DataError::NonNumericCell(rows, name.clone()))?;
            raw_times.push(t);
        }
    }
    if rows == 0 {
        return Err(DataError::EmptyFile);
    }

    let time_index = match cols.time.as_ref() {
        None => (0..rows as i64).collect(),
        Some(name) => to_step_index(&raw_times, name)?,
    };
    let targets = Array2::from_shape_vec((rows, cols.targets.len()), targets).expect("row-major target buffer");
    let features = Array2::from_shape_vec((rows, cols.features.len()), features).expect("row-major feature buffer");
    RawSeries::new(
        time_index,
        cols.features.clone(),
        cols.targets.clone(),
        features,
        targets,
    )
}

/// Integer steps, or seconds since the epoch for ISO-8601 timestamps.
fn parse_time(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<i64>() {
        return Some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.timestamp());
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

/// Converts raw times with a constant positive stride into `t0, t0+1, ...`
/// where `t0 = raw[0] / stride`.
fn to_step_index(raw: &[i64], col: &str) -> Result<Vec<i64>, DataError> {
    if raw.len() == 1 {
        return Ok(vec![0]);
    }
    let stride = raw[1] - raw[0];
    if stride <= 0 {
        return Err(DataError::IrregularTime {
            row: 2,
            col: col.to_string(),
        });
    }
    let mut out = Vec::with_capacity(raw.len());
    for (row, &t) in raw.iter().enumerate() {
        let offset = t - raw[0];
        if offset != stride * row as i64 {
            return Err(DataError::IrregularTime {
                row: row + 1,
                col: col.to_string(),
            });
        }
        out.push(row as i64);
    }
    Ok(out)
}
