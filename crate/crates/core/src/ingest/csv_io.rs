// SPDX-License-Identifier: MIT OR Apache-2.0

//! Long-form historian CSV: `timestamp,tag,value,quality`.
//!
//! Timestamps are RFC 3339 with an explicit offset, values are decimals or
//! `NaN`, quality is one of `good|bad|questionable|substituted` and defaults
//! to `good` when the column is absent. Gridded files carry three leading
//! comment lines with the grid definition.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::model::{
    Duration, GridMethod, GriddedSeries, QualityFlag, RawSeries, Sample, SourceId, TagId, TagMeta,
    Timestamp,
};

const MAX_REPORTED_LINES: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct ParseOptions {
    /// Largest tolerated fraction of malformed rows before the parse fails.
    pub max_error_rate: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_error_rate: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MalformedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParseReport {
    pub rows: u64,
    pub malformed: Vec<MalformedRow>,
    /// Rows whose value was `NaN`/empty, stored as `Bad` missing samples.
    pub missing_values: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parsed {
    pub dataset: Dataset,
    pub report: ParseReport,
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn parse_value(text: &str) -> std::result::Result<f64, String> {
    if text.is_empty() || text.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    text.parse::<f64>()
        .map_err(|_| format!("value {text:?} is not a number"))
}

fn parse_quality(text: &str) -> std::result::Result<QualityFlag, String> {
    match text.to_ascii_lowercase().as_str() {
        "good" | "" => Ok(QualityFlag::Good),
        "bad" => Ok(QualityFlag::Bad),
        "questionable" => Ok(QualityFlag::Questionable),
        "substituted" => Ok(QualityFlag::Substituted),
        other => Err(format!("unknown quality {other:?}")),
    }
}

struct Accumulator {
    per_tag: BTreeMap<TagId, Vec<Sample>>,
    report: ParseReport,
}

impl Accumulator {
    fn new() -> Self {
        Accumulator {
            per_tag: BTreeMap::new(),
            report: ParseReport::default(),
        }
    }

    fn push(&mut self, tag: &str, sample: Sample, line: u64) -> Result<()> {
        let samples = self.per_tag.entry(TagId::new(tag)).or_default();
        if let Some(last) = samples.last() {
            if sample.time == last.time {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate timestamp {} for tag {tag}", sample.time),
                });
            }
            if sample.time < last.time {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "timestamp regression for tag {tag}: {} after {}",
                        sample.time, last.time
                    ),
                });
            }
        }
        if sample.value.is_none() {
            self.report.missing_values += 1;
        }
        samples.push(sample);
        Ok(())
    }

    fn malformed(&mut self, line: u64, reason: String) {
        self.report.malformed.push(MalformedRow { line, reason });
    }

    fn finish(self, source: SourceId, opts: &ParseOptions) -> Result<Parsed> {
        let report = self.report;
        let bad = report.malformed.len() as u64;
        if report.rows > 0 && bad as f64 / report.rows as f64 > opts.max_error_rate {
            return Err(Error::TooManyMalformed {
                rows: report.rows,
                malformed: bad,
                limit: opts.max_error_rate,
                lines: report
                    .malformed
                    .iter()
                    .take(MAX_REPORTED_LINES)
                    .map(|m| m.line)
                    .collect(),
            });
        }
        for m in &report.malformed {
            log::warn!("line {}: {}", m.line, m.reason);
        }
        let mut dataset = Dataset::new();
        let name = source.name.clone();
        dataset.add_source(source)?;
        for (tag, samples) in self.per_tag {
            let series = RawSeries::new(tag.clone(), samples)?;
            dataset.insert(series, TagMeta::new(tag, name.clone()))?;
        }
        Ok(Parsed { dataset, report })
    }
}

fn utf8_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Utf8 { .. } => Error::Parse {
            line,
            message: "input is not valid UTF-8".into(),
        },
        _ => Error::Csv(e),
    }
}

/// Parses a long-form historian export into a dataset fragment.
pub fn parse_historian_csv<R: Read>(
    input: R,
    source: SourceId,
    opts: &ParseOptions,
) -> Result<Parsed> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(utf8_error)?.clone();
    let names: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    let has_quality = match names.as_slice() {
        [t, g, v] if t == "timestamp" && g == "tag" && v == "value" => false,
        [t, g, v, q] if t == "timestamp" && g == "tag" && v == "value" && q == "quality" => true,
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "expected header timestamp,tag,value[,quality], found {:?}",
                    headers.iter().collect::<Vec<_>>()
                ),
            })
        }
    };
    let width = if has_quality { 4 } else { 3 };

    let mut acc = Accumulator::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(utf8_error(e)),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        acc.report.rows += 1;
        if record.len() != width {
            acc.malformed(line, format!("expected {width} fields, found {}", record.len()));
            continue;
        }
        let time = match Timestamp::parse_iso(&record[0]) {
            Ok(t) => t,
            Err(e) => {
                acc.malformed(line, e.to_string());
                continue;
            }
        };
        let tag = &record[1];
        if tag.is_empty() {
            acc.malformed(line, "empty tag".into());
            continue;
        }
        let value = match parse_value(&record[2]) {
            Ok(v) => v,
            Err(reason) => {
                acc.malformed(line, reason);
                continue;
            }
        };
        let quality = if has_quality {
            match parse_quality(&record[3]) {
                Ok(q) => q,
                Err(reason) => {
                    acc.malformed(line, reason);
                    continue;
                }
            }
        } else {
            QualityFlag::Good
        };
        acc.push(tag, Sample::new(time, value, quality), line)?;
    }
    acc.finish(source, opts)
}

/// Parses a wide-form export: `timestamp,<tag>,<tag>,...`, blank cells skipped.
pub fn parse_wide_csv<R: Read>(input: R, source: SourceId, opts: &ParseOptions) -> Result<Parsed> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(utf8_error)?.clone();
    if headers.is_empty() || !headers[0].eq_ignore_ascii_case("timestamp") || headers.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "wide header must be timestamp,<tag>,...".into(),
        });
    }
    let tags: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    let mut acc = Accumulator::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(utf8_error(e)),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        acc.report.rows += 1;
        if record.len() != headers.len() {
            acc.malformed(
                line,
                format!("expected {} fields, found {}", headers.len(), record.len()),
            );
            continue;
        }
        let time = match Timestamp::parse_iso(&record[0]) {
            Ok(t) => t,
            Err(e) => {
                acc.malformed(line, e.to_string());
                continue;
            }
        };
        let mut cells = Vec::with_capacity(tags.len());
        let mut bad = None;
        for (tag, cell) in tags.iter().zip(record.iter().skip(1)) {
            if cell.is_empty() {
                continue;
            }
            match parse_value(cell) {
                Ok(v) => cells.push((tag, v)),
                Err(reason) => {
                    bad = Some(reason);
                    break;
                }
            }
        }
        if let Some(reason) = bad {
            acc.malformed(line, reason);
            continue;
        }
        for (tag, v) in cells {
            acc.push(tag, Sample::new(time, v, QualityFlag::Good), line)?;
        }
    }
    acc.finish(source, opts)
}

fn format_value(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NaN".to_owned(),
    }
}

/// Writes series in long form, tag by tag, in the order given.
pub fn write_historian_csv<'a, W, I>(out: W, series: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a RawSeries>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["timestamp", "tag", "value", "quality"])?;
    for s in series {
        for sample in s.samples() {
            w.write_record([
                sample.time.to_iso(),
                s.tag().to_string(),
                format_value(sample.value),
                sample.quality.as_code().to_owned(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes gridded series sharing one grid, with the grid header comments.
pub fn write_gridded_csv<'a, W, I>(mut out: W, series: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a GriddedSeries>,
{
    let series: Vec<&GriddedSeries> = series.into_iter().collect();
    let Some(first) = series.first() else {
        return Err(Error::validation("no gridded series to write"));
    };
    for s in &series {
        if s.start() != first.start()
            || s.interval() != first.interval()
            || s.method() != first.method()
        {
            return Err(Error::validation(format!(
                "tag {} is not on the same grid as {}",
                s.tag(),
                first.tag()
            )));
        }
    }
    writeln!(out, "# start={}", first.start().to_iso())?;
    writeln!(out, "# interval_us={}", first.interval().as_micros())?;
    writeln!(out, "# method={}", first.method().as_code())?;
    let raw: Vec<RawSeries> = series.iter().map(|s| s.to_raw()).collect();
    write_historian_csv(out, raw.iter())
}

/// Reads a file produced by [`write_gridded_csv`].
pub fn read_gridded_csv<R: Read>(mut input: R) -> Result<Vec<GriddedSeries>> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(|e| Error::Parse {
        line: 0,
        message: format!("input is not valid UTF-8: {e}"),
    })?;
    let mut start = None;
    let mut interval = None;
    let mut method = None;
    for (i, line) in text.lines().enumerate() {
        let Some(comment) = line.strip_prefix('#') else {
            break;
        };
        let lineno = i as u64 + 1;
        let Some((key, value)) = comment.trim().split_once('=') else {
            continue;
        };
        let bad = |m: String| Error::Parse { line: lineno, message: m };
        match key.trim() {
            "start" => start = Some(Timestamp::parse_iso(value).map_err(|e| bad(e.to_string()))?),
            "interval_us" => {
                let us: i64 = value
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad interval {value:?}")))?;
                interval = Some(Duration::from_micros(us));
            }
            "method" => method = Some(value.parse::<GridMethod>().map_err(|e| bad(e.to_string()))?),
            _ => {}
        }
    }
    let (Some(start), Some(interval), Some(method)) = (start, interval, method) else {
        return Err(Error::Parse {
            line: 1,
            message: "missing # start / # interval_us / # method header".into(),
        });
    };
    if !interval.is_positive() {
        return Err(Error::Parse {
            line: 2,
            message: "interval_us must be positive".into(),
        });
    }
    let parsed = parse_historian_csv(
        text.as_bytes(),
        SourceId::new("gridded"),
        &ParseOptions {
            max_error_rate: 0.0,
        },
    )?;
    let mut out = Vec::new();
    for (tag, raw) in parsed.dataset.series() {
        let mut values: Vec<Option<f64>> = Vec::new();
        for s in raw.samples() {
            let offset = s.time - start;
            if offset.as_micros() < 0 || offset.as_micros() % interval.as_micros() != 0 {
                return Err(Error::validation(format!(
                    "tag {tag}: sample at {} is off the declared grid",
                    s.time
                )));
            }
            let k = offset.steps_of(interval) as usize;
            if values.len() <= k {
                values.resize(k + 1, None);
            }
            values[k] = s.value.filter(|_| s.quality != QualityFlag::Bad);
        }
        if values.is_empty() {
            continue;
        }
        out.push(GriddedSeries::new(tag.clone(), start, interval, values, method)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "timestamp,tag,value,quality\n";

    fn parse(text: &str) -> Result<Parsed> {
        parse_historian_csv(text.as_bytes(), SourceId::new("dcs"), &ParseOptions::default())
    }

    #[test]
    fn header_only_is_empty() {
        let p = parse(HEADER).unwrap();
        assert!(p.dataset.is_empty());
        assert_eq!(p.report.rows, 0);
        assert!(p.report.malformed.is_empty());
    }

    #[test]
    fn three_rows_one_tag() {
        let text = format!(
            "{HEADER}2021-03-04T12:00:00.000000Z,FI101,1.5,good\n\
             2021-03-04T12:00:05.000000Z,FI101,1.6,GOOD\n\
             2021-03-04T12:00:10.000000Z,FI101,1.7,Substituted\r\n"
        );
        let p = parse(&text).unwrap();
        let s = p.dataset.get(&"FI101".into()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.samples()[2].quality, QualityFlag::Substituted);
        assert_eq!(p.dataset.meta()[&TagId::new("FI101")].source, "dcs");
    }

    #[test]
    fn quality_column_optional() {
        let text = "timestamp,tag,value\n2021-03-04T12:00:00Z,A,2\n";
        let p = parse(text).unwrap();
        assert_eq!(p.dataset.get(&"A".into()).unwrap().samples()[0].quality, QualityFlag::Good);
    }

    #[test]
    fn nan_becomes_bad_missing() {
        let text = format!("{HEADER}2021-03-04T12:00:00Z,A,NaN,good\n");
        let p = parse(&text).unwrap();
        let s = &p.dataset.get(&"A".into()).unwrap().samples()[0];
        assert!(s.value.is_none());
        assert_eq!(s.quality, QualityFlag::Bad);
        assert_eq!(p.report.missing_values, 1);
    }

    #[test]
    fn duplicate_and_regression_name_tag_and_line() {
        let dup = format!("{HEADER}2021-03-04T12:00:00Z,A,1,good\n2021-03-04T12:00:00Z,A,2,good\n");
        match parse(&dup) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("duplicate") && message.contains('A'));
            }
            other => panic!("unexpected {other:?}"),
        }
        let back = format!("{HEADER}2021-03-04T12:00:05Z,A,1,good\n2021-03-04T12:00:00Z,A,2,good\n");
        assert!(matches!(parse(&back), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn malformed_rows_counted_then_rejected() {
        let mut text = HEADER.to_owned();
        for i in 0..200 {
            text.push_str(&format!("2021-03-04T12:{:02}:{:02}Z,A,{i},good\n", i / 60, i % 60));
        }
        text.push_str("garbage,A,1,good\n");
        let p = parse_historian_csv(
            text.as_bytes(),
            SourceId::new("dcs"),
            &ParseOptions { max_error_rate: 0.05 },
        )
        .unwrap();
        assert_eq!(p.report.malformed.len(), 1);
        assert_eq!(p.report.malformed[0].line, 202);

        let strict = parse_historian_csv(
            text.as_bytes(),
            SourceId::new("dcs"),
            &ParseOptions { max_error_rate: 0.0 },
        );
        match strict {
            Err(Error::TooManyMalformed { lines, .. }) => assert_eq!(lines, vec![202]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_header_rejected() {
        assert!(matches!(parse("time,name,val\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn invalid_utf8_rejected() {
        let mut bytes = HEADER.as_bytes().to_vec();
        bytes.extend_from_slice(b"2021-03-04T12:00:00Z,\xff\xfe,1,good\n");
        let r = parse_historian_csv(&bytes[..], SourceId::new("x"), &ParseOptions::default());
        assert!(matches!(r, Err(Error::Parse { .. })));
    }

    #[test]
    fn wide_form_converter() {
        let text = "timestamp,A,B\n2021-03-04T12:00:00Z,1,\n2021-03-04T12:00:05Z,2,7\n";
        let p = parse_wide_csv(text.as_bytes(), SourceId::new("dcs"), &ParseOptions::default())
            .unwrap();
        assert_eq!(p.dataset.get(&"A".into()).unwrap().len(), 2);
        assert_eq!(p.dataset.get(&"B".into()).unwrap().len(), 1);
    }

    #[test]
    fn gridded_file_round_trip() {
        let g = GriddedSeries::new(
            "G",
            Timestamp::from_secs(1_600_000_000),
            Duration::from_secs(5),
            vec![Some(1.0), None, Some(3.25)],
            GridMethod::Linear,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_gridded_csv(&mut buf, [&g]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# start=2020-09-13T12:26:40.000000Z\n# interval_us=5000000\n# method=linear\n"));
        let back = read_gridded_csv(&buf[..]).unwrap();
        assert_eq!(back, vec![g]);
    }

    fn arb_csv() -> impl Strategy<Value = String> {
        let row = (0i64..3, prop_oneof![Just(None), (-1e6f64..1e6).prop_map(Some)], 0usize..4);
        proptest::collection::vec(row, 0..40).prop_map(|rows| {
            let mut text = HEADER.to_owned();
            for (i, (tag, value, q)) in rows.into_iter().enumerate() {
                let t = Timestamp::from_secs(1_600_000_000 + i as i64 * 7);
                let v = value.map_or("NaN".to_owned(), |v| v.to_string());
                let q = ["good", "bad", "Questionable", "substituted"][q];
                text.push_str(&format!("{},T{tag},{v},{q}\n", t.to_iso()));
            }
            text
        })
    }

    proptest! {
        #[test]
        fn parse_write_parse_is_fixed_point(text in arb_csv()) {
            let first = parse(&text).unwrap();
            let mut buf = Vec::new();
            write_historian_csv(&mut buf, first.dataset.series().values()).unwrap();
            let second = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
            prop_assert_eq!(&first.dataset, &second.dataset);
            let mut buf2 = Vec::new();
            write_historian_csv(&mut buf2, second.dataset.series().values()).unwrap();
            prop_assert_eq!(buf, buf2);
        }
    }
}
