use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ChannelId, Command, EegEpoch, SessionDataset, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};

const FIXED_COLUMNS: [&str; 3] = ["trial", "label", "t"];

/// Load a session CSV from disk. Samples are assumed to be at 128 Hz.
pub fn load_session_csv(path: impl AsRef<Path>) -> Result<SessionDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let tag = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ds = read_session_csv(BufReader::new(file), DEFAULT_SAMPLE_RATE)?;
    SessionDataset::new(ds.channels, ds.trials, tag, None)
}

/// Write a session CSV to disk, replacing any existing file.
pub fn save_session_csv(dataset: &SessionDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_session_csv(dataset, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Serialize a session in the fixed column layout. Numbers use the shortest
/// representation that parses back to the identical `f64`.
pub fn write_session_csv<W: Write>(dataset: &SessionDataset, mut w: W) -> std::io::Result<()> {
    let mut header = FIXED_COLUMNS.join(",");
    for c in ChannelId::ALL {
        header.push(',');
        header.push_str(c.label());
    }
    writeln!(w, "{header}")?;

    // Column order is always the canonical roster, whatever the session order.
    let rows: Vec<Option<usize>> = ChannelId::ALL.iter().map(|&c| dataset.channel_index(c)).collect();

    let mut line = String::with_capacity(512);
    for trial in dataset.trials() {
        let label = trial.label().map_or("", Command::token);
        for t in 0..trial.len() {
            line.clear();
            use std::fmt::Write as _;
            let _ = write!(line, "{},{},{}", trial.trial_id(), label, t);
            for row in &rows {
                let v = row.map_or(0.0, |r| trial.channel(r)[t]);
                let _ = write!(line, ",{v}");
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
    }
    Ok(())
}

/// Parse a session CSV from any reader.
pub fn read_session_csv<R: Read>(reader: R, sample_rate: f64) -> Result<SessionDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    if headers.len() < FIXED_COLUMNS.len() || headers.iter().zip(FIXED_COLUMNS).any(|(h, want)| h != want) {
        return Err(Error::Csv(format!(
            "header must start with `trial,label,t`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    // column k (after the fixed three) holds roster channel col_to_roster[k]
    let mut col_to_roster = Vec::with_capacity(ChannelId::COUNT);
    for name in headers.iter().skip(FIXED_COLUMNS.len()) {
        let ch: ChannelId = name.parse()?;
        if col_to_roster.contains(&ch.index()) {
            return Err(Error::Csv(format!("duplicate channel column `{name}`")));
        }
        col_to_roster.push(ch.index());
    }
    if let Some(missing) = ChannelId::ALL.iter().find(|c| !col_to_roster.contains(&c.index())) {
        return Err(Error::MissingChannel(missing.label().to_string()));
    }

    let mut trials: Vec<EegEpoch> = Vec::new();
    let mut current: Option<PendingTrial> = None;
    let mut seen_ids: Vec<u64> = Vec::new();
    let mut record = csv::StringRecord::new();

    loop {
        let more = rdr.read_record(&mut record).map_err(|e| Error::Csv(e.to_string()))?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(Error::BadCell {
                line,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }

        let trial_id: u64 = record[0].parse().map_err(|_| Error::BadCell {
            line,
            message: format!("trial `{}` is not a non-negative integer", &record[0]),
        })?;
        let label = match &record[1] {
            "" => None,
            tok => Some(tok.parse::<Command>()?),
        };
        let t: usize = record[2].parse().map_err(|_| Error::BadCell {
            line,
            message: format!("t `{}` is not a non-negative integer", &record[2]),
        })?;

        if current.as_ref().is_none_or(|c| c.trial_id != trial_id) {
            if let Some(done) = current.take() {
                trials.push(done.finish(sample_rate)?);
            }
            if seen_ids.contains(&trial_id) {
                return Err(Error::BadCell {
                    line,
                    message: format!("rows of trial {trial_id} are not contiguous"),
                });
            }
            seen_ids.push(trial_id);
            current = Some(PendingTrial::new(trial_id, label));
        }
        let pending = current.as_mut().expect("pending trial set above");
        if pending.label != label {
            return Err(Error::BadCell {
                line,
                message: format!("label changes within trial {trial_id}"),
            });
        }
        if t != pending.len {
            return Err(Error::BadCell {
                line,
                message: format!("trial {trial_id}: expected t={}, found t={t}", pending.len),
            });
        }
        for (k, &roster) in col_to_roster.iter().enumerate() {
            let cell = &record[FIXED_COLUMNS.len() + k];
            let v: f64 = cell.parse().map_err(|_| Error::BadCell {
                line,
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::BadCell {
                    line,
                    message: format!("non-finite value `{cell}`"),
                });
            }
            pending.rows[roster].push(v);
        }
        pending.len += 1;
    }
    if let Some(done) = current.take() {
        trials.push(done.finish(sample_rate)?);
    }

    if let Some(first) = trials.first() {
        let expected = first.len();
        if let Some(bad) = trials.iter().find(|t| t.len() != expected) {
            return Err(Error::RaggedTrial {
                trial: bad.trial_id(),
                found: bad.len(),
                expected,
            });
        }
    }

    SessionDataset::new(ChannelId::ALL.to_vec(), trials, String::new(), None)
}

struct PendingTrial {
    trial_id: u64,
    label: Option<Command>,
    rows: Vec<Vec<f64>>,
    len: usize,
}

impl PendingTrial {
    fn new(trial_id: u64, label: Option<Command>) -> Self {
        Self {
            trial_id,
            label,
            rows: vec![Vec::new(); ChannelId::COUNT],
            len: 0,
        }
    }

    fn finish(self, sample_rate: f64) -> Result<EegEpoch> {
        EegEpoch::new(self.rows, sample_rate, self.label, self.trial_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        let mut h = String::from("trial,label,t");
        for c in ChannelId::ALL {
            h.push(',');
            h.push_str(c.label());
        }
        h
    }

    fn row(trial: u64, label: &str, t: usize, v: f64) -> String {
        let mut r = format!("{trial},{label},{t}");
        for _ in 0..14 {
            r.push_str(&format!(",{v}"));
        }
        r
    }

    fn parse(text: &str) -> Result<SessionDataset> {
        read_session_csv(text.as_bytes(), 128.0)
    }

    #[test]
    fn two_trials_full_length() {
        let mut text = header();
        for trial in 0..2 {
            for t in 0..1024 {
                text.push('\n');
                text.push_str(&row(trial, "LEFT", t, t as f64 * 0.5));
            }
        }
        let ds = parse(&text).unwrap();
        assert_eq!(ds.len(), 2);
        for tr in ds.trials() {
            assert_eq!(tr.n_channels(), 14);
            assert_eq!(tr.len(), 1024);
            assert_eq!(tr.label(), Some(Command::Left));
        }
        assert_eq!(ds.trials()[1].channel(3)[10], 5.0);
    }

    #[test]
    fn unknown_label_token() {
        let text = format!("{}\n{}", header(), row(0, "JUMP", 0, 1.0));
        assert!(matches!(parse(&text), Err(Error::UnknownLabel(t)) if t == "JUMP"));
    }

    #[test]
    fn unknown_and_missing_channel_columns() {
        let bad = header().replace("O1", "CZ");
        assert!(matches!(parse(&bad), Err(Error::UnknownChannel(_))));
        let short = header().replace(",AF4", "");
        assert!(matches!(parse(&short), Err(Error::MissingChannel(c)) if c == "AF4"));
    }

    #[test]
    fn permuted_columns_map_to_roster() {
        let h = header().replace("AF3,F7", "F7,AF3");
        let mut r = String::from("0,STOP,0");
        for i in 0..14 {
            r.push_str(&format!(",{i}"));
        }
        let ds = parse(&format!("{h}\n{r}")).unwrap();
        let tr = &ds.trials()[0];
        assert_eq!(tr.channel(ChannelId::Af3.index())[0], 1.0);
        assert_eq!(tr.channel(ChannelId::F7.index())[0], 0.0);
    }

    #[test]
    fn non_numeric_and_non_finite_cells() {
        let text = format!("{}\n{}", header(), row(0, "LEFT", 0, 1.0).replacen(",1", ",abc", 1));
        assert!(matches!(parse(&text), Err(Error::BadCell { .. })));
        let text = format!("{}\n{}", header(), row(0, "LEFT", 0, f64::INFINITY));
        assert!(matches!(parse(&text), Err(Error::BadCell { .. })));
        let text = format!("{}\n{}", header(), row(0, "LEFT", 0, f64::NAN));
        assert!(matches!(parse(&text), Err(Error::BadCell { .. })));
    }

    #[test]
    fn ragged_trials() {
        let mut text = header();
        for t in 0..4 {
            text.push('\n');
            text.push_str(&row(0, "LEFT", t, 0.0));
        }
        for t in 0..3 {
            text.push('\n');
            text.push_str(&row(1, "LEFT", t, 0.0));
        }
        assert!(matches!(
            parse(&text),
            Err(Error::RaggedTrial {
                trial: 1,
                found: 3,
                expected: 4
            })
        ));
    }

    #[test]
    fn non_contiguous_trial_and_bad_t() {
        let text = format!(
            "{}\n{}\n{}\n{}",
            header(),
            row(0, "LEFT", 0, 0.0),
            row(1, "LEFT", 0, 0.0),
            row(0, "LEFT", 1, 0.0)
        );
        assert!(matches!(parse(&text), Err(Error::BadCell { .. })));
        let text = format!("{}\n{}\n{}", header(), row(0, "LEFT", 0, 0.0), row(0, "LEFT", 2, 0.0));
        assert!(matches!(parse(&text), Err(Error::BadCell { .. })));
        let text = format!("{}\n{}\n{}", header(), row(0, "LEFT", 0, 0.0), row(0, "STOP", 1, 0.0));
        assert!(matches!(parse(&text), Err(Error::BadCell { .. })));
    }

    #[test]
    fn empty_dataset_writes_header_only() {
        let mut out = Vec::new();
        write_session_csv(&SessionDataset::empty(), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{}\n", header()));
        assert!(parse(&header()).unwrap().is_empty());
    }

    #[test]
    fn one_trial_writes_1024_rows_plus_header() {
        let ep = EegEpoch::new(vec![vec![1.25; 1024]; 14], 128.0, Some(Command::Stop), 0).unwrap();
        let ds = SessionDataset::new(ChannelId::ALL.to_vec(), vec![ep], "", None).unwrap();
        let mut out = Vec::new();
        write_session_csv(&ds, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1025);
        assert!(text.lines().nth(1).unwrap().starts_with("0,STOP,0,1.25,"));
    }

    #[test]
    fn save_to_unwritable_path() {
        let err = save_session_csv(&SessionDataset::empty(), "/nonexistent-dir/x/y.csv").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
