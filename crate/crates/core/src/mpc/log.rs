//! Closed-loop records and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::miqp::SolveStatus;

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub x: Vector,
    /// Empty when the step was infeasible.
    pub u: Vector,
    pub delta: Vector,
    pub z: Vector,
    pub y: Vector,
    pub v: Option<f64>,
    pub j: Option<f64>,
    pub status: SolveStatus,
    pub nodes: usize,
    pub ms: f64,
}

impl StepRecord {
    pub fn applied(&self) -> bool {
        self.status.has_solution()
    }
}

/// Sizes of the logged vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LogShape {
    pub n: usize,
    pub m: usize,
    pub r_l: usize,
    pub r_c: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoopLog {
    pub shape: LogShape,
    pub records: Vec<StepRecord>,
    /// State after the last applied move; `None` when the run stopped on an
    /// infeasible step.
    pub final_state: Option<Vector>,
    pub final_v: Option<f64>,
}

const END: &str = "End";

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "Optimal",
        SolveStatus::FirstFeasible => "FirstFeasible",
        SolveStatus::Infeasible => "Infeasible",
        SolveStatus::NodeLimit => "NodeLimit",
    }
}

fn parse_status(s: &str) -> Option<SolveStatus> {
    Some(match s {
        "Optimal" => SolveStatus::Optimal,
        "FirstFeasible" => SolveStatus::FirstFeasible,
        "Infeasible" => SolveStatus::Infeasible,
        "NodeLimit" => SolveStatus::NodeLimit,
        _ => return None,
    })
}

impl ClosedLoopLog {
    pub fn new(shape: LogShape) -> Self {
        Self {
            shape,
            records: Vec::new(),
            final_state: None,
            final_v: None,
        }
    }

    /// `x(0) .. x(T)`, or up to the infeasible step.
    pub fn states(&self) -> Vec<Vector> {
        let mut s: Vec<Vector> = self.records.iter().map(|r| r.x.clone()).collect();
        if let Some(x) = &self.final_state {
            s.push(x.clone());
        }
        s
    }

    /// States reached by applied moves only.
    pub fn applied_states(&self) -> Vec<Vector> {
        let mut s: Vec<Vector> = self
            .records
            .iter()
            .take_while(|r| r.applied())
            .map(|r| r.x.clone())
            .collect();
        if let Some(x) = &self.final_state {
            s.push(x.clone());
        }
        s
    }

    pub fn infeasible_at(&self) -> Option<usize> {
        self.records.iter().find(|r| !r.applied()).map(|r| r.t)
    }

    pub fn completed(&self) -> bool {
        self.final_state.is_some() && self.infeasible_at().is_none()
    }

    pub fn header(&self) -> Vec<String> {
        let s = self.shape;
        let mut h = vec!["t".to_string()];
        h.extend((1..=s.n).map(|i| format!("x{i}")));
        h.extend((1..=s.m).map(|i| format!("u{i}")));
        h.extend((1..=s.r_l).map(|i| format!("delta{i}")));
        h.extend((1..=s.r_c).map(|i| format!("z{i}")));
        h.extend(["V", "J", "status", "nodes", "ms"].map(String::from));
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        let s = self.shape;
        let blank = |k: usize| vec![String::new(); k];
        let nums = |v: &Vector, k: usize| {
            if v.len() == k {
                v.iter().map(|x| x.to_string()).collect()
            } else {
                blank(k)
            }
        };
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![r.t.to_string()];
            row.extend(nums(&r.x, s.n));
            row.extend(nums(&r.u, s.m));
            row.extend(nums(&r.delta, s.r_l));
            row.extend(nums(&r.z, s.r_c));
            row.extend([
                opt(r.v),
                opt(r.j),
                status_name(r.status).to_string(),
                r.nodes.to_string(),
                r.ms.to_string(),
            ]);
            out.write_record(row)?;
        }
        if let Some(x) = &self.final_state {
            let mut row = vec![self.records.len().to_string()];
            row.extend(nums(x, s.n));
            row.extend(blank(s.m + s.r_l + s.r_c));
            row.extend([opt(self.final_v), String::new(), END.into(), "0".into(), "0".into()]);
            out.write_record(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads a log written by [`write_csv`](Self::write_csv); the shape is
    /// recovered from the header.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(String::from).collect();
        let count = |prefix: &str| {
            header
                .iter()
                .filter(|h| {
                    h.strip_prefix(prefix)
                        .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
                })
                .count()
        };
        let shape = LogShape {
            n: count("x"),
            m: count("u"),
            r_l: count("delta"),
            r_c: count("z"),
        };
        let mut log = Self::new(shape);
        let bad = |msg: String| Error::Format(msg);
        for rec in rd.records() {
            let rec = rec?;
            let f: Vec<&str> = rec.iter().collect();
            let mut pos = 1;
            let mut take = |k: usize| -> Result<Vector> {
                let part = &f[pos..pos + k];
                pos += k;
                if part.iter().all(|s| s.is_empty()) {
                    return Ok(Vector::zeros(0));
                }
                let vals: std::result::Result<Vec<f64>, _> = part.iter().map(|s| s.parse()).collect();
                Ok(Vector::from_vec(vals.map_err(|e| bad(format!("number: {e}")))?))
            };
            let x = take(shape.n)?;
            let u = take(shape.m)?;
            let delta = take(shape.r_l)?;
            let z = take(shape.r_c)?;
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|e| bad(format!("number: {e}")))
                }
            };
            let v = opt(f[pos])?;
            let j = opt(f[pos + 1])?;
            let status = f[pos + 2];
            if status == END {
                log.final_state = Some(x);
                log.final_v = v;
                continue;
            }
            let t: usize = f[0].parse().map_err(|e| bad(format!("t: {e}")))?;
            log.records.push(StepRecord {
                t,
                // Infeasible records keep their state but no outputs.
                y: Vector::zeros(0),
                x,
                u,
                delta,
                z,
                v,
                j,
                status: parse_status(status).ok_or_else(|| bad(format!("status `{status}`")))?,
                nodes: f[pos + 3].parse().map_err(|e| bad(format!("nodes: {e}")))?,
                ms: f[pos + 4].parse().map_err(|e| bad(format!("ms: {e}")))?,
            });
        }
        Ok(log)
    }
}
