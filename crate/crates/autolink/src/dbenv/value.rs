//! Typed result cells decoupled from any one driver's value type.

/// A single cell of a query result.
#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl CellValue {
    /// Plain-text rendering used in feedback tables and sample lists.
    pub fn display_text(&self) -> String {
        match self {
            CellValue::Null => "NULL".to_string(),
            CellValue::Integer(value) => value.to_string(),
            CellValue::Real(value) => value.to_string(),
            CellValue::Text(value) => value.clone(),
            CellValue::Blob(bytes) => {
                let hex: String = bytes.iter().map(|byte| format!("{byte:02x}")).collect();
                format!("x'{hex}'")
            }
        }
    }
}
