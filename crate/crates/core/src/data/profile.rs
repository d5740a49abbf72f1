use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{NaiveDateTime, TimeDelta, Timelike};

use super::DataError;

pub const SLOTS_PER_DAY: usize = 96;
pub const SLOT_HOURS: f64 = 0.25;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
const ACCEPTED_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSource {
    Measured,
    Synthetic,
}

impl ProfileSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProfileSource::Measured => "measured",
            ProfileSource::Synthetic => "synthetic",
        }
    }
}

/// Quarter-hourly household energy readings covering whole days.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile {
    timestamps: Vec<NaiveDateTime>,
    kwh: Vec<f64>,
    /// `# key=value` header lines, in file order.
    metadata: Vec<(String, String)>,
}

fn quarter() -> TimeDelta {
    TimeDelta::minutes(15)
}

fn format_ts(ts: &NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

fn parse_ts(text: &str) -> Option<NaiveDateTime> {
    ACCEPTED_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(text, f).ok())
}

fn on_grid(ts: &NaiveDateTime) -> bool {
    ts.minute() % 15 == 0 && ts.second() == 0 && ts.nanosecond() == 0
}

impl LoadProfile {
    /// Builds a profile, checking cadence, whole days and energy values.
    pub fn new(
        timestamps: Vec<NaiveDateTime>,
        kwh: Vec<f64>,
        metadata: Vec<(String, String)>,
    ) -> Result<Self, DataError> {
        if timestamps.len() != kwh.len() {
            return Err(DataError::ShapeMismatch {
                expected: timestamps.len(),
                found: kwh.len(),
            });
        }
        // line numbers count the header as line 1
        validate(&timestamps, &kwh, |i| i + 2)?;
        Ok(Self {
            timestamps,
            kwh,
            metadata,
        })
    }

    pub fn len(&self) -> usize {
        self.kwh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kwh.is_empty()
    }

    pub fn days(&self) -> usize {
        self.len() / SLOTS_PER_DAY
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn kwh(&self) -> &[f64] {
        &self.kwh
    }

    /// Slot-average power, kWh per quarter-hour times 4.
    pub fn kw(&self) -> Vec<f64> {
        self.kwh.iter().map(|e| e / SLOT_HOURS).collect()
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn source(&self) -> ProfileSource {
        match self.meta("source") {
            Some("synthetic") => ProfileSource::Synthetic,
            _ => ProfileSource::Measured,
        }
    }

    /// The days falling in calendar `month` (1-12), metadata kept.
    pub fn month_subset(&self, month: u32) -> Result<Self, DataError> {
        use chrono::Datelike;
        let mut ts = Vec::new();
        let mut kwh = Vec::new();
        for (t, e) in self.timestamps.iter().zip(&self.kwh) {
            if t.month() == month {
                ts.push(*t);
                kwh.push(*e);
            }
        }
        if ts.is_empty() {
            return Err(DataError::Invalid(format!("profile has no days in month {month}")));
        }
        Self::new(ts, kwh, self.metadata.clone())
    }

    /// Reads the `timestamp,kwh` CSV format with optional leading
    /// `# key=value` lines.
    pub fn ingest_csv<R: Read>(reader: R) -> Result<Self, DataError> {
        let mut reader = BufReader::new(reader);
        let mut metadata = Vec::new();
        let mut line_no = 0;
        let mut header = String::new();
        loop {
            header.clear();
            let read = reader.read_line(&mut header).map_err(|e| DataError::Parse {
                line: line_no + 1,
                column: "-",
                message: e.to_string(),
            })?;
            line_no += 1;
            if read == 0 {
                return Err(DataError::Parse {
                    line: line_no,
                    column: "-",
                    message: "missing `timestamp,kwh` header".into(),
                });
            }
            let Some(rest) = header.trim_end().strip_prefix('#') else { break };
            let (k, v) = rest.trim().split_once('=').ok_or_else(|| DataError::Parse {
                line: line_no,
                column: "-",
                message: format!("metadata line `{}` is not key=value", header.trim_end()),
            })?;
            metadata.push((k.trim().to_string(), v.trim().to_string()));
        }
        let columns: Vec<&str> = header.trim_end().split(',').map(str::trim).collect();
        if columns != ["timestamp", "kwh"] {
            return Err(DataError::Parse {
                line: line_no,
                column: "-",
                message: format!("expected header `timestamp,kwh`, found `{}`", header.trim_end()),
            });
        }
        let header_line = line_no;

        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut timestamps = Vec::new();
        let mut kwh = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = header_line + i + 1;
            let rec = rec.map_err(|e| DataError::Parse {
                line,
                column: "-",
                message: e.to_string(),
            })?;
            if rec.len() != 2 {
                return Err(DataError::Parse {
                    line,
                    column: "-",
                    message: format!("expected 2 fields, found {}", rec.len()),
                });
            }
            let ts = parse_ts(&rec[0]).ok_or_else(|| DataError::Parse {
                line,
                column: "timestamp",
                message: format!("`{}` is not an ISO 8601 date-time", &rec[0]),
            })?;
            let e: f64 = rec[1].parse().map_err(|_| DataError::Parse {
                line,
                column: "kwh",
                message: format!("`{}` is not a number", &rec[1]),
            })?;
            timestamps.push(ts);
            kwh.push(e);
        }
        validate(&timestamps, &kwh, |i| header_line + i + 1)?;
        Ok(Self {
            timestamps,
            kwh,
            metadata,
        })
    }

    pub fn ingest_path(path: &Path) -> Result<Self, DataError> {
        let file = std::fs::File::open(path).map_err(|e| DataError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::ingest_csv(file)
    }

    /// Writes the canonical CSV form; ingesting it gives back the same profile.
    pub fn export_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}={v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "kwh"])?;
        for (t, e) in self.timestamps.iter().zip(&self.kwh) {
            w.write_record([format_ts(t), e.to_string()])?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.export_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }
}

fn validate<F: Fn(usize) -> usize>(timestamps: &[NaiveDateTime], kwh: &[f64], line: F) -> Result<(), DataError> {
    if timestamps.is_empty() {
        return Err(DataError::Invalid("profile has no records".into()));
    }
    for (i, (ts, e)) in timestamps.iter().zip(kwh).enumerate() {
        if !on_grid(ts) {
            return Err(DataError::Parse {
                line: line(i),
                column: "timestamp",
                message: format!("{} is not on the 15-minute grid", format_ts(ts)),
            });
        }
        if !e.is_finite() || *e < 0.0 {
            return Err(DataError::Parse {
                line: line(i),
                column: "kwh",
                message: format!("energy {e} must be finite and non-negative"),
            });
        }
        if i == 0 {
            if ts.time() != chrono::NaiveTime::MIN {
                return Err(DataError::PartialDay {
                    date: ts.date().to_string(),
                    found: SLOTS_PER_DAY - (ts.hour() * 4 + ts.minute() / 15) as usize,
                });
            }
            continue;
        }
        let expected = timestamps[i - 1] + quarter();
        if *ts != expected {
            if *ts <= timestamps[i - 1] {
                return Err(DataError::Parse {
                    line: line(i),
                    column: "timestamp",
                    message: format!("{} does not follow {}", format_ts(ts), format_ts(&timestamps[i - 1])),
                });
            }
            return Err(DataError::CadenceGap {
                line: line(i),
                expected: format_ts(&expected),
            });
        }
    }
    let last = timestamps[timestamps.len() - 1];
    if timestamps.len() % SLOTS_PER_DAY != 0 {
        return Err(DataError::PartialDay {
            date: last.date().to_string(),
            found: timestamps.len() % SLOTS_PER_DAY,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day_csv(skip: Option<usize>) -> String {
        let mut s = String::from("# profile_type=RESLOWR\n# weather_zone=COAST\ntimestamp,kwh\n");
        for q in 0..96 {
            if Some(q) == skip {
                continue;
            }
            s += &format!("2014-01-06T{:02}:{:02}:00,{}\n", q / 4, (q % 4) * 15, 0.25 + q as f64 / 1000.0);
        }
        s
    }

    #[test]
    fn one_day_roundtrips_byte_for_byte() {
        let text = day_csv(None);
        let p = LoadProfile::ingest_csv(text.as_bytes()).unwrap();
        assert_eq!(p.len(), 96);
        assert_eq!(p.days(), 1);
        assert_eq!(p.meta("weather_zone"), Some("COAST"));
        assert_eq!(p.source(), ProfileSource::Measured);
        assert_eq!(p.to_csv_string(), text);
    }

    #[test]
    fn missing_quarter_is_a_named_gap() {
        let err = LoadProfile::ingest_csv(day_csv(Some(37)).as_bytes()).unwrap_err();
        assert_eq!(
            err,
            DataError::CadenceGap {
                line: 41,
                expected: "2014-01-06T09:15:00".into()
            }
        );
        assert!(err.to_string().contains("2014-01-06T09:15:00"));
    }

    #[test]
    fn partial_days_and_bad_values_are_rejected() {
        let err = LoadProfile::ingest_csv(day_csv(Some(95)).as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::PartialDay { found: 95, .. }), "{err:?}");
        let err = LoadProfile::ingest_csv(day_csv(Some(0)).as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::PartialDay { .. }), "{err:?}");

        let neg = day_csv(None).replace("T00:15:00,0.251", "T00:15:00,-0.251");
        let err = LoadProfile::ingest_csv(neg.as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 5, column: "kwh", .. }), "{err:?}");

        let bad_ts = day_csv(None).replace("2014-01-06T00:30:00", "2014-01-06 0030");
        let err = LoadProfile::ingest_csv(bad_ts.as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 6, column: "timestamp", .. }), "{err:?}");

        let off = day_csv(None).replace("2014-01-06T00:30:00", "2014-01-06T00:31:00");
        assert!(LoadProfile::ingest_csv(off.as_bytes()).is_err());

        assert!(LoadProfile::ingest_csv("time,kwh\n".as_bytes()).is_err());
    }

    #[test]
    fn month_subset_keeps_whole_days() {
        let mut ts = Vec::new();
        let start = chrono::NaiveDate::from_ymd_opt(2014, 1, 31).unwrap().and_hms_opt(0, 0, 0).unwrap();
        for q in 0..192 {
            ts.push(start + quarter() * q);
        }
        let p = LoadProfile::new(ts, vec![0.3; 192], vec![]).unwrap();
        assert_eq!(p.month_subset(2).unwrap().days(), 1);
        assert!(p.month_subset(3).is_err());
    }
}
