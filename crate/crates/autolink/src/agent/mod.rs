//! The schema-linking agent: action grammar, turn dispatch, and the
//! session loop that grows a linked schema through tool feedback.

mod action;
mod session;
mod transcript;

pub use action::{
    parse_add_argument, parse_policy_output, Action, ActionKind, MalformedOutput, ParsedOutput,
};
pub use session::{
    build_initial_context, dispatch, run_session, token_totals, SessionConfig, SessionEnvs,
    SessionOutcome, SessionState, StopReason, TranscriptRecord,
};
pub use transcript::{raw_outputs, read_transcript, write_transcript};
