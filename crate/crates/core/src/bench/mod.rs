//! Closed-loop experiments: workloads, the plan-execute-learn loop,
//! convergence, learner comparison and reports.

mod compare;
mod report;
mod run;
mod workload;

pub use compare::{compare_learners, final_errors, CurvePoint};
pub use report::{
    card_cost_report, read_records, svg_curves, svg_scatter, write_records, write_rows,
    CardCostReport, CardPoint, CostPoint,
};
pub use run::{
    detect_convergence, q_error, run_adaptive_loop, Convergence, IterationRecord, LoopConfig,
    NodeRecord, Observer, DEFAULT_WINDOW,
};
pub use workload::{generate_workload, ParamGen, QueryTemplate, TemplateOrder, WorkloadItem};
