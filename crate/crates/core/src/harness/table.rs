//! Result rows and their CSV form. Every file starts with a versioned
//! `# pqmc ...` comment line followed by the column header.

use std::io::{Read, Write};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{RepetitionOutcome, TunnelingRunResult};

pub const DMC_ROWS_HEADER: &str = "# pqmc dmc-tunnel rows v1";
pub const SPIN_ROWS_HEADER: &str = "# pqmc gfmc-tunnel rows v1";
pub const GAP_ROWS_HEADER: &str = "# pqmc gap rows v1";
pub const SAMPLES_HEADER: &str = "# pqmc tunneling samples v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmcRow {
    pub g: f64,
    pub x0: f64,
    #[serde(rename = "gwfMode")]
    pub gwf_mode: String,
    pub tau: f64,
    #[serde(rename = "Nw")]
    pub nw: usize,
    pub p: f64,
    pub xth: f64,
    pub reps: usize,
    #[serde(rename = "xiMean")]
    pub xi_mean: f64,
    #[serde(rename = "xiStderr")]
    pub xi_stderr: f64,
    #[serde(rename = "censoredCount")]
    pub censored_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinRow {
    pub model: String,
    pub params: String,
    #[serde(rename = "gwfMode")]
    pub gwf_mode: String,
    pub tau: f64,
    #[serde(rename = "Nw")]
    pub nw: usize,
    pub p: f64,
    pub reps: usize,
    #[serde(rename = "xiMean")]
    pub xi_mean: f64,
    #[serde(rename = "xiStderr")]
    pub xi_stderr: f64,
    #[serde(rename = "censoredCount")]
    pub censored_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub model: String,
    pub params: String,
    pub gap: f64,
}

/// One repetition of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub point: usize,
    pub repetition: usize,
    /// `crossed`, `censored` or `aborted`.
    pub outcome: String,
    pub xi: Option<f64>,
}

impl SampleRow {
    pub fn from_run(point: usize, run: &TunnelingRunResult) -> Vec<SampleRow> {
        run.outcomes
            .iter()
            .enumerate()
            .map(|(repetition, o)| {
                let outcome = match o {
                    RepetitionOutcome::Crossed(_) => "crossed",
                    RepetitionOutcome::Censored => "censored",
                    RepetitionOutcome::Aborted(_) => "aborted",
                };
                SampleRow { point, repetition, outcome: outcome.to_string(), xi: o.crossing_time() }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResultTable {
    Dmc(Vec<DmcRow>),
    Spin(Vec<SpinRow>),
    Gap(Vec<GapRow>),
}

impl ResultTable {
    pub fn len(&self) -> usize {
        match self {
            ResultTable::Dmc(r) => r.len(),
            ResultTable::Spin(r) => r.len(),
            ResultTable::Gap(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn header(&self) -> &'static str {
        match self {
            ResultTable::Dmc(_) => DMC_ROWS_HEADER,
            ResultTable::Spin(_) => SPIN_ROWS_HEADER,
            ResultTable::Gap(_) => GAP_ROWS_HEADER,
        }
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        match self {
            ResultTable::Dmc(r) => write_rows(out, DMC_ROWS_HEADER, r),
            ResultTable::Spin(r) => write_rows(out, SPIN_ROWS_HEADER, r),
            ResultTable::Gap(r) => write_rows(out, GAP_ROWS_HEADER, r),
        }
    }

    /// Reads any of the row tables, chosen by the header comment.
    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let first = text.lines().next().unwrap_or("").trim();
        match first {
            DMC_ROWS_HEADER => Ok(ResultTable::Dmc(parse_rows(&text)?)),
            SPIN_ROWS_HEADER => Ok(ResultTable::Spin(parse_rows(&text)?)),
            GAP_ROWS_HEADER => Ok(ResultTable::Gap(parse_rows(&text)?)),
            other => Err(Error::Parse { line: 1, message: format!("unrecognised table header `{other}`") }),
        }
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::invalid(e.to_string()))
    }
}

pub fn write_samples<W: Write>(out: W, rows: &[SampleRow]) -> Result<()> {
    write_rows(out, SAMPLES_HEADER, rows)
}

pub fn read_samples<R: Read>(mut input: R) -> Result<Vec<SampleRow>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    if text.lines().next().map(str::trim) != Some(SAMPLES_HEADER) {
        return Err(Error::Parse { line: 1, message: format!("expected header `{SAMPLES_HEADER}`") });
    }
    parse_rows(&text)
}

fn write_rows<W: Write, T: Serialize>(mut out: W, header: &str, rows: &[T]) -> Result<()> {
    writeln!(out, "{header}")?;
    let mut writer = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn parse_rows<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dmc_rows() -> Vec<DmcRow> {
        vec![
            DmcRow {
                g: 6.0,
                x0: 0.0,
                gwf_mode: "exact".into(),
                tau: 0.01,
                nw: 2000,
                p: 0.25,
                xth: 0.8660254037844386,
                reps: 50,
                xi_mean: 9.123456789012345,
                xi_stderr: 0.1 + 0.2,
                censored_count: 0,
            },
            DmcRow {
                g: 10.5,
                x0: 0.0,
                gwf_mode: "none".into(),
                tau: 0.007,
                nw: 300,
                p: 0.1,
                xth: 1.1456439237389600,
                reps: 3,
                xi_mean: 1.0e-300,
                xi_stderr: 7.0e12,
                censored_count: 2,
            },
        ]
    }

    #[test]
    fn dmc_round_trip_is_exact() {
        let t = ResultTable::Dmc(dmc_rows());
        let text = t.to_csv_string().unwrap();
        assert!(text.starts_with(DMC_ROWS_HEADER));
        assert_eq!(text.lines().nth(1).unwrap(), "g,x0,gwfMode,tau,Nw,p,xth,reps,xiMean,xiStderr,censoredCount");
        assert_eq!(ResultTable::read(text.as_bytes()).unwrap(), t);
    }

    #[test]
    fn spin_and_gap_round_trip() {
        let spin = ResultTable::Spin(vec![SpinRow {
            model: "chain".into(),
            params: "n=8;j=1;gamma=0.6".into(),
            gwf_mode: "urbm".into(),
            tau: 0.025,
            nw: 500,
            p: 0.1,
            reps: 40,
            xi_mean: 52.94,
            xi_stderr: 3.5,
            censored_count: 1,
        }]);
        let text = spin.to_csv_string().unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "model,params,gwfMode,tau,Nw,p,reps,xiMean,xiStderr,censoredCount");
        assert_eq!(ResultTable::read(text.as_bytes()).unwrap(), spin);
        let gap = ResultTable::Gap(vec![GapRow { model: "shamrock".into(), params: "k=1".into(), gap: 0.4000401971945369 }]);
        assert_eq!(ResultTable::read(gap.to_csv_string().unwrap().as_bytes()).unwrap(), gap);
    }

    #[test]
    fn failed_point_survives_round_trip() {
        let mut rows = dmc_rows();
        rows[0].xi_mean = f64::NAN;
        let text = ResultTable::Dmc(rows).to_csv_string().unwrap();
        let ResultTable::Dmc(back) = ResultTable::read(text.as_bytes()).unwrap() else { panic!() };
        assert!(back[0].xi_mean.is_nan());
    }

    #[test]
    fn samples_round_trip() {
        let run = TunnelingRunResult::from_outcomes(vec![
            RepetitionOutcome::Crossed(1.25),
            RepetitionOutcome::Censored,
            RepetitionOutcome::Aborted("boom".into()),
        ]);
        let rows = SampleRow::from_run(3, &run);
        let mut buf = Vec::new();
        write_samples(&mut buf, &rows).unwrap();
        assert_eq!(read_samples(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn rejects_unknown_header() {
        assert!(ResultTable::read("g,x0\n1,2\n".as_bytes()).is_err());
        assert!(read_samples("# pqmc tunneling samples v0\n".as_bytes()).is_err());
    }
}
