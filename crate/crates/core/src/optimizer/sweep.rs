use rayon::prelude::*;

use super::{optimize, Constraint, Optimum};
use crate::error::{Error, Result};
use crate::parallel::with_workers;
use crate::real::Real;

/// One budget point and its optimum, or the reason it could not be optimized.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow<T> {
    pub constraint: Constraint<T>,
    pub optimum: Optimum<T>,
    pub error: Option<String>,
}

/// Cartesian grid of constraints. Axes vary slowest-first in field order.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid<T> {
    pub r: Vec<T>,
    pub n_total: Vec<T>,
    pub eta1: Vec<T>,
    pub eta2: Vec<T>,
    pub n_th: Vec<T>,
    pub unit_gains: Vec<bool>,
    pub m_max: Option<usize>,
}

impl<T: Real> SweepGrid<T> {
    pub fn points(&self) -> Vec<Constraint<T>> {
        let mut out = Vec::new();
        for &r in &self.r {
            for &n_total in &self.n_total {
                for &eta1 in &self.eta1 {
                    for &eta2 in &self.eta2 {
                        for &n_th in &self.n_th {
                            for &unit_gains in &self.unit_gains {
                                out.push(Constraint {
                                    r,
                                    n_total_budget: n_total,
                                    eta1,
                                    eta2,
                                    n_th,
                                    unit_gains,
                                    m_max: self.m_max,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

fn row<T: Real>(constraint: &Constraint<T>) -> SweepRow<T> {
    match optimize(constraint) {
        Ok(optimum) => SweepRow {
            constraint: *constraint,
            optimum,
            error: None,
        },
        Err(e) => SweepRow {
            constraint: *constraint,
            optimum: Optimum::infeasible(),
            error: Some(e.to_string()),
        },
    }
}

/// Optimizes every constraint, in parallel, returning rows in input order.
///
/// `workers = None` uses the global rayon pool. Per-point failures land in
/// [`SweepRow::error`]; only an empty grid or a pool that cannot be built is
/// an error.
pub fn sweep<T: Real>(points: &[Constraint<T>], workers: Option<usize>) -> Result<Vec<SweepRow<T>>> {
    if points.is_empty() {
        return Err(Error::invalid("grid", "must contain at least one point"));
    }
    with_workers(workers, || points.par_iter().map(row).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_matches_optimize() {
        let c = Constraint::new(1.0f64, 20.0).with_losses(0.95, 1.0);
        let rows = sweep(&[c], Some(1)).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].optimum, optimize(&c).unwrap());
    }

    #[test]
    fn order_independent_of_workers() {
        let grid = SweepGrid {
            r: vec![0.5, 1.0],
            n_total: vec![5.0, 20.0],
            eta1: vec![1.0],
            eta2: vec![1.0, 0.9],
            n_th: vec![0.0],
            unit_gains: vec![true, false],
            m_max: Some(30),
        };
        let points = grid.points();
        assert_eq!(points.len(), 16);
        assert_eq!((points[0].r, points[15].r), (0.5, 1.0));
        let serial = sweep(&points, Some(1)).unwrap();
        let parallel = sweep(&points, Some(4)).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn failures_stay_in_row() {
        let bad = Constraint::new(1.0f64, 10.0).with_losses(2.0, 1.0);
        let good = Constraint::new(1.0f64, 10.0);
        let rows = sweep(&[bad, good], None).unwrap();
        assert!(rows[0].error.as_deref().unwrap().contains("eta1"));
        assert!(!rows[0].optimum.feasible);
        assert!(rows[1].optimum.feasible);
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(sweep::<f64>(&[], None).is_err());
    }
}
