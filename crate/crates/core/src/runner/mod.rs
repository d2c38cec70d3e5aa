//! Executing the target: scenarios, command templates, CPU-metered child
//! processes, bounded-concurrency batches and the run log.

mod batch;
mod exec;
mod result;
mod scenario;
mod template;

pub use batch::{run_batch, run_parallel, Evaluator, FnEvaluator, ProcessEvaluator};
pub use exec::{execute_run, parse_result_line, render_command, HarnessError, KILL_GRACE, POLL_INTERVAL};
pub use result::{
    parse_record, read_records, write_records, ExitStatus, LogError, Outcome, RunRecord, RunResult, RunSpec,
};
pub use scenario::{Budget, ObjectiveSource, ScenarioError, ScenarioSpec};
pub use template::{CommandTemplate, TemplateError};
