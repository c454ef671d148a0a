//! Oracles and audits. Nothing here mutates a mesh.

mod audit;
mod checks;
mod lfs;

pub use audit::{
    baseline_circumcenter_refine, baseline_config, charge_counts, classic_baseline_config, front_audit, run_audit, size_optimality_audit,
    AuditOptions, AuditReport, BaselineComparison, ChargeCounts, FrontAudit, SizeAudit, AUDIT_REL_TOL,
};
pub use checks::{conformity_violations, quality_summary, verify_delaunay, verify_delaunay_simplices, QualitySummary};
pub use lfs::{lipschitz_check, LfsField};
