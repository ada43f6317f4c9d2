//! Group-sliced evaluation metrics for downstream tasks.

pub mod adjectives;
pub mod classify;
pub mod distance;
pub mod groups;
pub mod hiring;
pub mod projection;
pub mod report;
pub mod salary;
pub mod values;

pub use adjectives::{adjective_rates, AbcLexicon, Dimension, Polarity, Story};
pub use classify::{grouped_accuracy, macro_f1, Prediction};
pub use distance::embedding_distance;
pub use groups::{group_counts, infer_gender};
pub use hiring::{tally_hiring, Candidate};
pub use projection::{project3, Projection};
pub use report::{EvalReport, Gap, GroupKey, Row, Slicing};
pub use salary::{parse_salary, salary_report, SalaryResponse};
pub use values::{value_misalignment, Divergence, ValueAnswer};
