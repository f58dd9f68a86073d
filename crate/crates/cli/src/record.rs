//! Output records and their CSV / NDJSON encodings.

use std::io::{self, BufRead, Write};

use aoi_relay::sim::TransitionAudit;
use aoi_relay::{RelayPolicy, SystemParams};
use serde::{Deserialize, Serialize};

/// Where a record's numbers came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodTag {
    Analytic,
    Oracle,
    Simulation,
}

impl MethodTag {
    pub fn name(self) -> &'static str {
        match self {
            MethodTag::Analytic => "analytic",
            MethodTag::Oracle => "oracle",
            MethodTag::Simulation => "simulation",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [MethodTag::Analytic, MethodTag::Oracle, MethodTag::Simulation].into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmfRow {
    pub n: usize,
    pub probability: f64,
}

/// Run metadata; absent fields did not apply to the method.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Meta {
    pub seed: Option<u64>,
    pub slots: Option<u64>,
    pub burn_in: Option<u64>,
    pub cap: Option<u32>,
    /// Value of the swept parameter, for sweep records.
    pub param_value: Option<f64>,
    pub runtime_ms: f64,
    /// Set when the analytic method was replaced by the oracle.
    pub note: Option<String>,
    pub audit: Option<TransitionAudit>,
}

/// One law: a PMF (possibly empty) with its tail mass and moments.
///
/// Moment-only records carry no rows and a tail mass of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub policy: RelayPolicy,
    pub method: MethodTag,
    pub params: SystemParams,
    pub pmf: Vec<PmfRow>,
    pub tail_mass: f64,
    pub mean: f64,
    pub variance: f64,
    pub meta: Meta,
}

pub fn write_json<W: Write>(out: &mut W, records: &[OutputRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_json<R: BufRead>(input: R) -> io::Result<Vec<OutputRecord>> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| serde_json::from_str(&l?).map_err(io::Error::from))
        .collect()
}

/// Writes each record as a block of `# key=value` lines followed by an `n,probability` table.
pub fn write_pmf_csv<W: Write>(out: &mut W, records: &[OutputRecord]) -> io::Result<()> {
    for r in records {
        let SystemParams { p, p1, p2, p3 } = r.params;
        writeln!(out, "# policy={}", r.policy)?;
        writeln!(out, "# method={}", r.method.name())?;
        for (key, value) in [("p", p), ("p1", p1), ("p2", p2), ("p3", p3), ("tail_mass", r.tail_mass), ("mean", r.mean), ("variance", r.variance)] {
            writeln!(out, "# {key}={value:?}")?;
        }
        let m = &r.meta;
        if let Some(v) = m.seed {
            writeln!(out, "# seed={v}")?;
        }
        if let Some(v) = m.slots {
            writeln!(out, "# slots={v}")?;
        }
        if let Some(v) = m.burn_in {
            writeln!(out, "# burn_in={v}")?;
        }
        if let Some(v) = m.cap {
            writeln!(out, "# cap={v}")?;
        }
        if let Some(v) = m.param_value {
            writeln!(out, "# param_value={v:?}")?;
        }
        writeln!(out, "# runtime_ms={:?}", m.runtime_ms)?;
        if let Some(v) = &m.note {
            writeln!(out, "# note={}", v.replace('\n', " "))?;
        }
        if let Some(v) = &m.audit {
            writeln!(out, "# audit={}", serde_json::to_string(v)?)?;
        }
        writeln!(out, "n,probability")?;
        for row in &r.pmf {
            writeln!(out, "{},{:?}", row.n, row.probability)?;
        }
    }
    Ok(())
}

fn bad(line: usize, msg: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {msg}"))
}

#[derive(Default)]
struct Partial {
    fields: Vec<(String, String)>,
    pmf: Vec<PmfRow>,
}

impl Partial {
    fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn finish(self, line: usize) -> io::Result<OutputRecord> {
        let need = |key: &str| self.get(key).ok_or_else(|| bad(line, format!("record lacks `{key}`")));
        let float = |key: &str| need(key)?.parse::<f64>().map_err(|e| bad(line, format!("{key}: {e}")));
        let opt_int = |key: &str| self.get(key).map(|v| v.parse::<u64>().map_err(|e| bad(line, format!("{key}: {e}")))).transpose();
        let policy = need("policy")?.parse::<RelayPolicy>().map_err(|e| bad(line, e))?;
        let method = MethodTag::parse(need("method")?).ok_or_else(|| bad(line, "unknown method"))?;
        let meta = Meta {
            seed: opt_int("seed")?,
            slots: opt_int("slots")?,
            burn_in: opt_int("burn_in")?,
            cap: opt_int("cap")?.map(|c| c as u32),
            param_value: self.get("param_value").map(|_| float("param_value")).transpose()?,
            runtime_ms: float("runtime_ms")?,
            note: self.get("note").map(str::to_owned),
            audit: self.get("audit").map(serde_json::from_str).transpose().map_err(|e| bad(line, e))?,
        };
        Ok(OutputRecord {
            policy,
            method,
            params: SystemParams::new(float("p")?, float("p1")?, float("p2")?, float("p3")?),
            tail_mass: float("tail_mass")?,
            mean: float("mean")?,
            variance: float("variance")?,
            pmf: self.pmf,
            meta,
        })
    }
}

/// Parses the output of [`write_pmf_csv`].
pub fn read_pmf_csv<R: BufRead>(input: R) -> io::Result<Vec<OutputRecord>> {
    let mut records = Vec::new();
    let mut current: Option<Partial> = None;
    let mut in_table = false;
    let mut last = 0;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        last = line_no;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix("# ") {
            if in_table {
                records.push(current.take().expect("table follows a header").finish(line_no)?);
                in_table = false;
            }
            let (key, value) = meta.split_once('=').ok_or_else(|| bad(line_no, "metadata line without `=`"))?;
            current.get_or_insert_with(Partial::default).fields.push((key.to_owned(), value.to_owned()));
        } else if line == "n,probability" {
            if current.is_none() {
                return Err(bad(line_no, "table without metadata"));
            }
            in_table = true;
        } else if in_table {
            let (n, prob) = line.split_once(',').ok_or_else(|| bad(line_no, "expected `n,probability`"))?;
            let row = PmfRow {
                n: n.parse().map_err(|e| bad(line_no, e))?,
                probability: prob.parse().map_err(|e| bad(line_no, e))?,
            };
            current.as_mut().expect("in a table").pmf.push(row);
        } else {
            return Err(bad(line_no, "unexpected line"));
        }
    }
    if let Some(partial) = current {
        records.push(partial.finish(last)?);
    }
    Ok(records)
}

#[derive(Debug, Serialize)]
struct MomentsRow<'a> {
    policy: &'a str,
    method: &'a str,
    mean: f64,
    variance: f64,
}

#[derive(Debug, Serialize)]
struct SweepRow<'a> {
    param_value: f64,
    policy: &'a str,
    method: &'a str,
    mean: f64,
    variance: f64,
}

/// `policy,method,mean,variance`, one row per record.
pub fn write_moments_csv<W: Write>(out: W, records: &[OutputRecord]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(MomentsRow { policy: r.policy.name(), method: r.method.name(), mean: r.mean, variance: r.variance })?;
    }
    w.flush()
}

/// `param_value,policy,method,mean,variance`, one row per record.
pub fn write_sweep_csv<W: Write>(out: W, records: &[OutputRecord]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(SweepRow {
            param_value: r.meta.param_value.unwrap_or(f64::NAN),
            policy: r.policy.name(),
            method: r.method.name(),
            mean: r.mean,
            variance: r.variance,
        })?;
    }
    w.flush()
}
