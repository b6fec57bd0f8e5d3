//! Local-file SQL adapter with cooperative timeout enforcement.

use std::path::Path;
use std::time::{Duration, Instant};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};

use crate::dbenv::value::CellValue;
use crate::error::{Error, Result};

/// How many virtual-machine steps run between timeout checks.
const PROGRESS_OP_INTERVAL: i32 = 64;

/// Driver-level outcome of one statement, before feedback rendering.
#[derive(Debug, Clone, PartialEq)]
pub enum RawExecution {
    Rows {
        header: Vec<String>,
        /// Retained rows, at most `keep_rows` of them.
        rows: Vec<Vec<CellValue>>,
        /// Full cardinality of the result set.
        total_rows: u64,
        elapsed_secs: f64,
    },
    /// The statement was interrupted for exceeding its time budget.
    Interrupted { elapsed_secs: f64 },
    EngineError {
        message: String,
        elapsed_secs: f64,
    },
}

/// Seam between the execution environment and a concrete SQL engine.
/// One adapter owns one connection and serves one query at a time;
/// interruption on timeout is the adapter's responsibility.
pub trait DialectAdapter: Send {
    fn dialect_id(&self) -> &str;
    fn execute_raw(&mut self, sql: &str, timeout_secs: f64, keep_rows: usize) -> RawExecution;
}

/// Adapter over a local SQLite database.
#[derive(Debug)]
pub struct SqliteAdapter {
    conn: Connection,
}

impl SqliteAdapter {
    /// Opens an existing database file read-only.
    pub fn open_file(path: &Path) -> Result<Self> {
        let flags = OpenFlags::SQLITE_OPEN_READ_ONLY
            | OpenFlags::SQLITE_OPEN_URI
            | OpenFlags::SQLITE_OPEN_NO_MUTEX;
        let conn = Connection::open_with_flags(path, flags).map_err(|error| {
            Error::Database(format!("cannot open {}: {error}", path.display()))
        })?;
        Self::finish_setup(conn)
    }

    /// Builds an in-memory database from a seed script, then locks it
    /// down for read-only use.
    pub fn open_memory_seeded(seed_sql: &str) -> Result<Self> {
        let conn = Connection::open_in_memory()
            .map_err(|error| Error::Database(error.to_string()))?;
        conn.execute_batch(seed_sql)
            .map_err(|error| Error::Database(format!("seed script failed: {error}")))?;
        Self::finish_setup(conn)
    }

    fn finish_setup(conn: Connection) -> Result<Self> {
        conn.pragma_update(None, "query_only", true)
            .map_err(|error| Error::Database(error.to_string()))?;
        Ok(SqliteAdapter { conn })
    }
}

impl DialectAdapter for SqliteAdapter {
    fn dialect_id(&self) -> &str {
        "sqlite"
    }

    fn execute_raw(&mut self, sql: &str, timeout_secs: f64, keep_rows: usize) -> RawExecution {
        let started = Instant::now();
        let budget = Duration::try_from_secs_f64(timeout_secs).unwrap_or(Duration::ZERO);
        let deadline = started + budget;
        self.conn
            .progress_handler(PROGRESS_OP_INTERVAL, Some(move || Instant::now() >= deadline));
        let outcome = run_statement(&self.conn, sql, keep_rows, started);
        self.conn
            .progress_handler(PROGRESS_OP_INTERVAL, None::<fn() -> bool>);
        outcome
    }
}

fn run_statement(conn: &Connection, sql: &str, keep_rows: usize, started: Instant) -> RawExecution {
    let mut stmt = match conn.prepare(sql) {
        Ok(stmt) => stmt,
        Err(error) => return failure(&error, started),
    };
    if !stmt.readonly() {
        return RawExecution::EngineError {
            message: "only read-only statements are permitted in the sandbox".to_string(),
            elapsed_secs: started.elapsed().as_secs_f64(),
        };
    }

    let header: Vec<String> = stmt
        .column_names()
        .iter()
        .map(|name| name.to_string())
        .collect();
    let column_count = header.len();

    let mut result_rows = match stmt.query([]) {
        Ok(rows) => rows,
        Err(error) => return failure(&error, started),
    };
    let mut kept: Vec<Vec<CellValue>> = Vec::new();
    let mut total_rows: u64 = 0;
    loop {
        match result_rows.next() {
            Ok(Some(row)) => {
                total_rows += 1;
                if kept.len() < keep_rows {
                    let mut cells = Vec::with_capacity(column_count);
                    for index in 0..column_count {
                        match row.get_ref(index) {
                            Ok(value) => cells.push(convert(value)),
                            Err(error) => return failure(&error, started),
                        }
                    }
                    kept.push(cells);
                }
            }
            Ok(None) => break,
            Err(error) => return failure(&error, started),
        }
    }

    RawExecution::Rows {
        header,
        rows: kept,
        total_rows,
        elapsed_secs: started.elapsed().as_secs_f64(),
    }
}

fn convert(value: ValueRef<'_>) -> CellValue {
    match value {
        ValueRef::Null => CellValue::Null,
        ValueRef::Integer(value) => CellValue::Integer(value),
        ValueRef::Real(value) => CellValue::Real(value),
        ValueRef::Text(bytes) => CellValue::Text(String::from_utf8_lossy(bytes).into_owned()),
        ValueRef::Blob(bytes) => CellValue::Blob(bytes.to_vec()),
    }
}

fn failure(error: &rusqlite::Error, started: Instant) -> RawExecution {
    let elapsed_secs = started.elapsed().as_secs_f64();
    let interrupted = matches!(
        error,
        rusqlite::Error::SqliteFailure(inner, _)
            if inner.code == rusqlite::ErrorCode::OperationInterrupted
    );
    if interrupted {
        RawExecution::Interrupted { elapsed_secs }
    } else {
        RawExecution::EngineError {
            message: error.to_string(),
            elapsed_secs,
        }
    }
}
