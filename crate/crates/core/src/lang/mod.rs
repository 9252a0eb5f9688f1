//! Core language: types, effects, expressions and class tables.

mod class_table;
mod effect;
mod expr;
mod types;

use std::sync::Arc;

use thiserror::Error;

pub use class_table::{literal_type, ClassTable, ConstantPool, MethodSig, DB_RECORD};
pub use effect::{Effect, EffectAtom, EffectPair, Flat, Hierarchy, Precision};
pub use expr::{Cond, Expr, HoleId, INDEX};
pub use types::{Field, Type, BOOL, INT, NIL, OBJ, STR, SYM};

/// Interned identifier: class, method, variable, region and field names.
pub type Name = Arc<str>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DefinitionError {
    #[error("unknown class `{0}`")]
    UnknownClass(Name),
    #[error("class `{0}` is already defined")]
    DuplicateClass(Name),
    #[error("method `{1}` is already defined on {0}")]
    DuplicateMethod(String, String),
    #[error("no method `{1}` on {0}")]
    MethodMissing(String, String),
    #[error("duplicate column `{1}` in schema {0}")]
    DuplicateColumn(Name, Name),
    #[error("method `{0}` has no native implementation")]
    UnboundNative(String),
    #[error("{0}")]
    Invalid(String),
}
