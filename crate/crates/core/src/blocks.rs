//! Dataflow units moved between operators: positional blocks (named
//! position columns), tuple blocks (schema plus value rows), and hybrid
//! blocks carrying both at once.
//!
//! The load-bearing invariant is alignment: every position column and the
//! cached tuple array of one block have the same length, and row i of the
//! tuple array corresponds to entry i of every position column. All
//! row-selecting operations (`gather`) move the whole row across every
//! column simultaneously.

use hmdb_ir::{AttrRef, Value, ValueType};

use crate::{EngineError, Result};

pub const BLOCK_CAPACITY: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaAttr {
    pub attr: AttrRef,
    pub vtype: ValueType,
}

/// Ordered attribute list with unique names.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schema {
    attrs: Vec<SchemaAttr>,
}

impl Schema {
    pub fn empty() -> Schema {
        Schema::default()
    }

    pub fn new(attrs: Vec<SchemaAttr>) -> Result<Schema> {
        let mut s = Schema::empty();
        for a in attrs {
            s.push(a)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, attr: SchemaAttr) -> Result<()> {
        if self.index_of(&attr.attr).is_some() {
            return Err(EngineError::Exec(format!(
                "duplicate attribute {} in schema",
                attr.attr
            )));
        }
        self.attrs.push(attr);
        Ok(())
    }

    pub fn attrs(&self) -> &[SchemaAttr] {
        &self.attrs
    }

    pub fn len(&self) -> usize {
        self.attrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty()
    }

    pub fn index_of(&self, attr: &AttrRef) -> Option<usize> {
        self.attrs.iter().position(|a| &a.attr == attr)
    }

    pub fn concat(&self, other: &Schema) -> Result<Schema> {
        let mut out = self.clone();
        for a in &other.attrs {
            out.push(a.clone())?;
        }
        Ok(out)
    }
}

/// Position-column name for a bound table: `<alias>_id`.
pub fn pos_col_name(alias: &str) -> String {
    format!("{alias}_id")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosBlock {
    pub len: usize,
    pub cols: Vec<(String, Vec<u64>)>,
}

impl PosBlock {
    pub fn single(name: &str, positions: Vec<u64>) -> PosBlock {
        PosBlock {
            len: positions.len(),
            cols: vec![(name.to_string(), positions)],
        }
    }

    pub fn col(&self, name: &str) -> Option<&[u64]> {
        self.cols
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn gather(&self, indices: &[usize]) -> Result<PosBlock> {
        check_indices(indices, self.len)?;
        Ok(PosBlock {
            len: indices.len(),
            cols: self
                .cols
                .iter()
                .map(|(n, v)| (n.clone(), indices.iter().map(|&i| v[i]).collect()))
                .collect(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (n, v) in &self.cols {
            if v.len() != self.len {
                return Err(EngineError::Exec(format!(
                    "position column {n} has {} entries in a block of length {}",
                    v.len(),
                    self.len
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TupleBlock {
    pub schema: Schema,
    pub rows: Vec<Vec<Value>>,
}

impl TupleBlock {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.schema.len() {
                return Err(EngineError::Exec(format!(
                    "tuple row {i} has {} values for a {}-attribute schema",
                    row.len(),
                    self.schema.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridBlock {
    pub len: usize,
    pub pos: Vec<(String, Vec<u64>)>,
    pub schema: Schema,
    pub tuples: Vec<Vec<Value>>,
}

pub fn hybrid_from_positions(b: PosBlock) -> HybridBlock {
    HybridBlock {
        len: b.len,
        pos: b.cols,
        schema: Schema::empty(),
        tuples: Vec::new(),
    }
}

pub fn hybrid_from_tuples(b: TupleBlock) -> HybridBlock {
    HybridBlock {
        len: b.rows.len(),
        pos: Vec::new(),
        schema: b.schema,
        tuples: b.rows,
    }
}

impl HybridBlock {
    pub fn empty() -> HybridBlock {
        HybridBlock {
            len: 0,
            pos: Vec::new(),
            schema: Schema::empty(),
            tuples: Vec::new(),
        }
    }

    pub fn pos_col(&self, name: &str) -> Option<&[u64]> {
        self.pos
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn has_tuples(&self) -> bool {
        !self.schema.is_empty()
    }

    /// Cached values of one attribute, column-wise.
    pub fn attr_values(&self, attr: &AttrRef) -> Option<Vec<Value>> {
        let idx = self.schema.index_of(attr)?;
        Some(self.tuples.iter().map(|r| r[idx].clone()).collect())
    }

    /// Keep only the named position columns and cached attributes, in the
    /// requested order. Length is unchanged.
    pub fn project(&self, keep_pos: &[String], keep_attrs: &[AttrRef]) -> Result<HybridBlock> {
        let mut pos = Vec::with_capacity(keep_pos.len());
        for name in keep_pos {
            let col = self
                .pos_col(name)
                .ok_or_else(|| EngineError::Exec(format!("unknown position column {name}")))?;
            pos.push((name.clone(), col.to_vec()));
        }
        let mut idxs = Vec::with_capacity(keep_attrs.len());
        let mut schema = Schema::empty();
        for a in keep_attrs {
            let i = self
                .schema
                .index_of(a)
                .ok_or_else(|| EngineError::Exec(format!("attribute {a} not cached in block")))?;
            idxs.push(i);
            schema.push(self.schema.attrs()[i].clone())?;
        }
        let tuples = if schema.is_empty() {
            Vec::new()
        } else {
            self.tuples
                .iter()
                .map(|r| idxs.iter().map(|&i| r[i].clone()).collect())
                .collect()
        };
        Ok(HybridBlock {
            len: self.len,
            pos,
            schema,
            tuples,
        })
    }

    /// Select rows by index across every position column and the tuple
    /// array at once.
    pub fn gather(&self, indices: &[usize]) -> Result<HybridBlock> {
        check_indices(indices, self.len)?;
        let pos = self
            .pos
            .iter()
            .map(|(n, v)| (n.clone(), indices.iter().map(|&i| v[i]).collect()))
            .collect();
        let tuples = if self.schema.is_empty() {
            Vec::new()
        } else {
            indices.iter().map(|&i| self.tuples[i].clone()).collect()
        };
        Ok(HybridBlock {
            len: indices.len(),
            pos,
            schema: self.schema.clone(),
            tuples,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (n, v) in &self.pos {
            if v.len() != self.len {
                return Err(EngineError::Exec(format!(
                    "position column {n} has {} entries in a block of length {}",
                    v.len(),
                    self.len
                )));
            }
        }
        if self.schema.is_empty() {
            if !self.tuples.is_empty() {
                return Err(EngineError::Exec(
                    "tuple rows present without a tuple schema".into(),
                ));
            }
        } else {
            if self.tuples.len() != self.len {
                return Err(EngineError::Exec(format!(
                    "tuple array has {} rows in a block of length {}",
                    self.tuples.len(),
                    self.len
                )));
            }
            for (i, row) in self.tuples.iter().enumerate() {
                if row.len() != self.schema.len() {
                    return Err(EngineError::Exec(format!(
                        "tuple row {i} has {} values for a {}-attribute schema",
                        row.len(),
                        self.schema.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_indices(indices: &[usize], len: usize) -> Result<()> {
    for &i in indices {
        if i >= len {
            return Err(EngineError::Exec(format!(
                "gather index {i} out of range for block of length {len}"
            )));
        }
    }
    Ok(())
}
