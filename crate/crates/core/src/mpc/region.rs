//! Empirical feasible regions: step-0 feasibility over a grid of initial
//! states, optionally followed by a full run.

use serde::{Deserialize, Serialize};

use super::Controller;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::miqp::SolveStatus;

/// A rectangular grid over two state coordinates; the others come from `base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub base: Vec<f64>,
    pub axes: [usize; 2],
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub counts: [usize; 2],
    /// Steps of the recursive-feasibility run from feasible points.
    #[serde(default)]
    pub run_steps: Option<usize>,
}

impl GridSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.base.len() != n {
            return Err(Error::Dimension(format!(
                "grid base has {} entries, model has {n}",
                self.base.len()
            )));
        }
        if self.axes.iter().any(|&a| a >= n) || self.axes[0] == self.axes[1] {
            return Err(Error::Invalid(format!("bad grid axes {:?}", self.axes)));
        }
        let finite = self.lo.iter().chain(&self.hi).chain(&self.base).all(|v| v.is_finite());
        if !finite || self.lo[0] > self.hi[0] || self.lo[1] > self.hi[1] {
            return Err(Error::Invalid("grid bounds must be finite with lo <= hi".into()));
        }
        if self.counts.contains(&0) {
            return Err(Error::Invalid("grid counts must be positive".into()));
        }
        Ok(())
    }

    fn coord(&self, axis: usize, i: usize) -> f64 {
        if self.counts[axis] == 1 {
            return self.lo[axis];
        }
        let s = i as f64 / (self.counts[axis] - 1) as f64;
        self.lo[axis] + s * (self.hi[axis] - self.lo[axis])
    }

    /// Grid points, second axis fastest.
    pub fn points(&self) -> Vec<Vector> {
        let mut out = Vec::with_capacity(self.counts[0] * self.counts[1]);
        for i in 0..self.counts[0] {
            for j in 0..self.counts[1] {
                let mut x = Vector::from_column_slice(&self.base);
                x[self.axes[0]] = self.coord(0, i);
                x[self.axes[1]] = self.coord(1, j);
                out.push(x);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionPoint {
    pub x: Vec<f64>,
    pub status: SolveStatus,
    pub feasible: bool,
    /// Whether the full run stayed feasible, when requested.
    pub recursive: Option<bool>,
    /// Solver errors are recorded instead of aborting the probe.
    pub error: Option<String>,
}

pub fn probe_region(controller: &Controller, grid: &GridSpec) -> Result<Vec<RegionPoint>> {
    grid.validate(controller.model.dims.n())?;
    let mut out = Vec::new();
    for x in grid.points() {
        let mut point = RegionPoint {
            x: x.iter().copied().collect(),
            status: SolveStatus::Infeasible,
            feasible: false,
            recursive: None,
            error: None,
        };
        match controller.solve_step(&x) {
            Ok(r) => {
                point.status = r.status;
                point.feasible = r.feasible();
            }
            Err(e) => point.error = Some(e.to_string()),
        }
        if let (true, Some(steps)) = (point.feasible, grid.run_steps) {
            point.recursive = match controller.run(&x, steps, None) {
                Ok(log) => Some(log.completed()),
                Err(e) => {
                    point.error = Some(e.to_string());
                    Some(false)
                }
            };
        }
        out.push(point);
    }
    Ok(out)
}

pub fn region_csv(points: &[RegionPoint]) -> Result<String> {
    let n = points.first().map_or(0, |p| p.x.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.extend(["status", "feasible", "recursive", "error"].map(String::from));
    w.write_record(&header)?;
    for p in points {
        let mut rec: Vec<String> = p.x.iter().map(|v| v.to_string()).collect();
        rec.push(format!("{:?}", p.status));
        rec.push(p.feasible.to_string());
        rec.push(p.recursive.map(|b| b.to_string()).unwrap_or_default());
        rec.push(p.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_and_validation() {
        let g = GridSpec {
            base: vec![0.0; 3],
            axes: [0, 2],
            lo: [-1.0, 0.0],
            hi: [1.0, 0.5],
            counts: [3, 2],
            run_steps: None,
        };
        g.validate(3).unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1].as_slice(), &[-1.0, 0.0, 0.5]);
        assert_eq!(pts[5].as_slice(), &[1.0, 0.0, 0.5]);
        assert!(g.validate(2).is_err());
        let bad = GridSpec { axes: [1, 1], ..g.clone() };
        assert!(bad.validate(3).is_err());
        let bad = GridSpec { lo: [f64::NAN, 0.0], ..g };
        assert!(bad.validate(3).is_err());
    }
}
