use std::fmt;

/// Column type. `Decimal2` is a fixed-point value stored as int64 scaled by
/// 100; all arithmetic on it happens in scaled integer space. `Char(n)` is a
/// fixed-width string, space-padded on disk and trimmed in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueType {
    Int64,
    Decimal2,
    Char(u32),
}

impl ValueType {
    /// On-disk width in bytes.
    pub fn width(self) -> u32 {
        match self {
            ValueType::Int64 | ValueType::Decimal2 => 8,
            ValueType::Char(n) => n,
        }
    }

    pub fn parse(s: &str) -> Option<ValueType> {
        match s {
            "int64" => Some(ValueType::Int64),
            "decimal2" => Some(ValueType::Decimal2),
            _ => {
                let inner = s.strip_prefix("char(")?.strip_suffix(')')?;
                let n: u32 = inner.parse().ok()?;
                if n == 0 {
                    return None;
                }
                Some(ValueType::Char(n))
            }
        }
    }

    pub fn is_numeric(self) -> bool {
        !matches!(self, ValueType::Char(_))
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::Int64 => write!(f, "int64"),
            ValueType::Decimal2 => write!(f, "decimal2"),
            ValueType::Char(n) => write!(f, "char({n})"),
        }
    }
}

/// A single cell. Decimal2 columns surface as `Int` carrying the scaled
/// representation; exactness of every comparison in the test suite depends
/// on values never passing through floating point.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Str(String),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Str(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Str(s) => write!(f, "'{s}'"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_widths() {
        assert_eq!(ValueType::Int64.width(), 8);
        assert_eq!(ValueType::Decimal2.width(), 8);
        assert_eq!(ValueType::Char(25).width(), 25);
    }

    #[test]
    fn type_parse_roundtrip() {
        for t in [ValueType::Int64, ValueType::Decimal2, ValueType::Char(25)] {
            assert_eq!(ValueType::parse(&t.to_string()), Some(t));
        }
        assert_eq!(ValueType::parse("char(0)"), None);
        assert_eq!(ValueType::parse("varchar"), None);
    }
}
