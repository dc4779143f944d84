//! JSON formats for problems and solutions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MiqpProblem, Solution, SolveStats, SolveStatus};
use crate::error::Error;
use crate::linalg::{from_rows, to_rows, Vector};

#[derive(Serialize, Deserialize)]
struct ProblemFile {
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
    f: Vec<f64>,
    #[serde(rename = "Phi", default)]
    phi_matrix: Vec<Vec<f64>>,
    #[serde(rename = "phi", default)]
    phi_rhs: Vec<f64>,
    #[serde(default)]
    binary: Vec<usize>,
    /// `[lo, hi]` per variable, `null` for an infinite side. Omitted means
    /// `[0, 1]` on binaries and free elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds: Option<Vec<[Option<f64>; 2]>>,
    #[serde(default, skip_serializing_if = "is_zero")]
    constant: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl MiqpProblem {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let raw: ProblemFile = serde_json::from_str(text)?;
        let d = raw.f.len();
        let h = from_rows(&raw.h, d).map_err(|e| Error::Format(format!("H: {e}")))?;
        if h.nrows() != d {
            return Err(Error::Format(format!("H has {} rows, expected {d}", h.nrows())));
        }
        let phi_matrix =
            from_rows(&raw.phi_matrix, d).map_err(|e| Error::Format(format!("Phi: {e}")))?;
        let mut p = MiqpProblem::new(
            h,
            Vector::from_vec(raw.f),
            phi_matrix,
            Vector::from_vec(raw.phi_rhs),
            raw.binary,
        );
        if let Some(bounds) = raw.bounds {
            p.bounds = bounds
                .iter()
                .map(|[lo, hi]| {
                    (
                        lo.unwrap_or(f64::NEG_INFINITY),
                        hi.unwrap_or(f64::INFINITY),
                    )
                })
                .collect();
        }
        p.constant = raw.constant;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        let raw = ProblemFile {
            h: to_rows(&self.h),
            f: self.f.iter().copied().collect(),
            phi_matrix: to_rows(&self.phi_matrix),
            phi_rhs: self.phi_rhs.iter().copied().collect(),
            binary: self.binary.clone(),
            bounds: Some(
                self.bounds
                    .iter()
                    .map(|&(lo, hi)| [finite(lo), finite(hi)])
                    .collect(),
            ),
            constant: self.constant,
        };
        serde_json::to_string_pretty(&raw).expect("problem serializes")
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[derive(Serialize)]
struct SolutionFile<'a> {
    status: SolveStatus,
    #[serde(rename = "J")]
    objective: Option<f64>,
    #[serde(rename = "U")]
    u: Vec<f64>,
    stats: &'a SolveStats,
}

impl Solution {
    pub fn to_json(&self) -> String {
        let raw = SolutionFile {
            status: self.status,
            objective: finite(self.objective),
            u: self.u.iter().copied().collect(),
            stats: &self.stats,
        };
        serde_json::to_string_pretty(&raw).expect("solution serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::super::random;
    use super::*;

    #[test]
    fn problem_roundtrip() {
        for p in random::instances(1, 10) {
            let back = MiqpProblem::from_json(&p.to_json()).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn minimal_file_gets_default_bounds() {
        let p = MiqpProblem::from_json(
            r#"{"H": [[1, 0], [0, 0]], "f": [-1.5, 0], "Phi": [[1, -1], [-1, 1]],
                "phi": [0, 0], "binary": [1]}"#,
        )
        .unwrap();
        assert_eq!(p.bounds[1], (0.0, 1.0));
        assert_eq!(p.bounds[0].0, f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_ragged_matrix() {
        let err = MiqpProblem::from_json(r#"{"H": [[1, 0], [0]], "f": [0, 0]}"#);
        assert!(matches!(err, Err(Error::Format(_))));
    }
}
