//! Read-only SQL execution sandbox with agent-facing feedback rendering.

mod env;
mod feedback;
mod limits;
mod sampling;
mod sandbox;
mod sqlite;
mod value;

pub use env::{execute, execute_raw, metadata_support, MetadataSupport};
pub use feedback::{render_feedback, FeedbackKind, SqlFeedback};
pub use limits::ExecLimits;
pub use sampling::{collect_sample_map, sample_column_values};
pub use sandbox::screen_statement;
pub use sqlite::{DialectAdapter, RawExecution, SqliteAdapter};
pub use value::CellValue;
