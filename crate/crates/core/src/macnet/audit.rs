use std::fmt::Write as _;

use super::{MacnetTrace, PhaseMode};
use crate::dataset::DomainPartition;
use crate::error::{Error, Result};
use crate::rollout::{relative_error, ErrorStats};
use crate::solver::{Snapshot, Variable, NUM_VARS};

/// Flame-region error of the hybrid state after `step` against the pure
/// solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub step: usize,
    pub mode: PhaseMode,
    pub errors: [ErrorStats; NUM_VARS],
}

pub const AUDIT_HEADER: &str = "step,mode,variable,max_rel_err,mean_rel_err";

/// Scores every hybrid state against `truth`, the pure solver series from
/// the same start.
pub fn hybrid_error_audit(
    trace: &MacnetTrace,
    states: &[Snapshot],
    truth: &[Snapshot],
    partition: &DomainPartition,
) -> Result<Vec<AuditRow>> {
    let want = trace.horizon + 1;
    if states.len() != want || truth.len() != want {
        return Err(Error::Shape(format!(
            "audit over horizon {} needs {want} states, got {} hybrid and {} truth",
            trace.horizon,
            states.len(),
            truth.len()
        )));
    }
    (1..=trace.horizon)
        .map(|k| {
            let mode = trace.mode_of_step(k).ok_or_else(|| Error::Consistency(format!("no phase covers step {k}")))?;
            let mut errors = [ErrorStats::default(); NUM_VARS];
            for var in Variable::ALL {
                errors[var.index()] = relative_error(&states[k], &truth[k], var, partition)?;
            }
            Ok(AuditRow { step: k, mode, errors })
        })
        .collect()
}

pub fn audit_to_csv(rows: &[AuditRow]) -> String {
    let mut out = String::from(AUDIT_HEADER);
    out.push('\n');
    for r in rows {
        for var in Variable::ALL {
            let e = r.errors[var.index()];
            writeln!(out, "{},{},{},{:e},{:e}", r.step, r.mode.as_str(), var.name(), e.max, e.mean).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::macnet::{Phase, PhaseEnd};

    #[test]
    fn all_solver_trace_scores_zero() {
        let p = DomainPartition::new(6, 1).unwrap();
        let s: Vec<Snapshot> = (0..4).map(|k| Snapshot::from_fn(6, 2, k as f64, |i, j| [1.0, 0.0, 300.0 + (i + j + k) as f64, 0.05, 0.0, 0.2])).collect();
        let trace = MacnetTrace {
            horizon: 3,
            cfd_window: 3,
            tolerance: 5.0,
            max_ml_steps: 1,
            ml_fraction: 0.0,
            phases: vec![Phase::cfd(0, 3, PhaseEnd::Horizon)],
            retrains: vec![],
            fallbacks: vec![],
        };
        let rows = hybrid_error_audit(&trace, &s, &s, &p).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.mode == PhaseMode::Cfd && r.errors.iter().all(|e| e.max == 0.0 && e.mean == 0.0)));
        assert_eq!(audit_to_csv(&rows).lines().count(), 1 + 3 * NUM_VARS);
        assert!(hybrid_error_audit(&trace, &s[..3], &s, &p).is_err());
    }
}
