//! Functionals evaluated on trajectories: dissipation, resolved energy
//! balance, boundary trackers and convergence metrics.

pub mod balance;
pub mod dissipation;
pub mod report;
pub mod trackers;

pub use balance::{
    balance_sample, dissipation_split, resolved_balance, BalanceOperators, BalanceSample, DissipationSplit, LayerStencils,
    ResolvedBalance,
};
pub use dissipation::{
    check_strip_resolution, dissipation_rate, global_dissipation, kato_dissipation, strip_width, MIN_STRIP_CELLS,
};
pub use report::{
    evaluate_run, ladder_rows, ladder_table, run_table, DiagnosticsConfig, LadderRow, RunDiagnostics, LADDER_COLUMNS,
    RUN_COLUMNS,
};
pub use trackers::{
    besov_track, boundary_regularity_track, convergence_metrics, hardy_ratio, max_hardy_ratio, max_pressure_ratio,
    pressure_bound_ratio, BoundaryTrack, ConvergenceMetrics, CONVERGENCE_DEPTH,
};

use crate::numerics::pairwise_sum;

/// Trapezoid rule on possibly non-uniform sample times.
pub fn trapezoid(t: &[f64], f: &[f64]) -> f64 {
    assert_eq!(t.len(), f.len(), "sample count mismatch");
    let parts: Vec<f64> = t
        .windows(2)
        .zip(f.windows(2))
        .map(|(tw, fw)| 0.5 * (tw[1] - tw[0]) * (fw[0] + fw[1]))
        .collect();
    pairwise_sum(&parts)
}

/// `(int_0^T |f|^q dt)^{1/q}` by the trapezoid rule.
pub fn time_lq(t: &[f64], f: &[f64], q: f64) -> f64 {
    let powered: Vec<f64> = f.iter().map(|x| x.abs().powf(q)).collect();
    trapezoid(t, &powered).max(0.0).powf(1.0 / q)
}
