use std::collections::BTreeMap;
use std::fmt;

use super::Name;

pub const OBJ: &str = "Obj";
pub const NIL: &str = "Nil";
pub const BOOL: &str = "Bool";
pub const STR: &str = "Str";
pub const INT: &str = "Int";
pub const SYM: &str = "Sym";

/// A field of a finite record type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Field {
    pub optional: bool,
    pub ty: Type,
}

/// Static types: nominal classes, singleton class types, unions and finite
/// records.
///
/// Unions are kept canonical: flattened, deduplicated, sorted, and never
/// singleton. Build them with [`Type::union`] rather than the variant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Type {
    Class(Name),
    ClassOf(Name),
    Union(Vec<Type>),
    Record(BTreeMap<Name, Field>),
}

impl Type {
    pub fn class(name: &str) -> Type {
        Type::Class(name.into())
    }

    pub fn class_of(name: &str) -> Type {
        Type::ClassOf(name.into())
    }

    pub fn obj() -> Type {
        Type::class(OBJ)
    }

    pub fn nil() -> Type {
        Type::class(NIL)
    }

    pub fn bool() -> Type {
        Type::class(BOOL)
    }

    pub fn str() -> Type {
        Type::class(STR)
    }

    pub fn int() -> Type {
        Type::class(INT)
    }

    pub fn sym() -> Type {
        Type::class(SYM)
    }

    /// Canonical union of the given types.
    pub fn union<I: IntoIterator<Item = Type>>(members: I) -> Type {
        let mut flat = Vec::new();
        for t in members {
            match t.canonical() {
                Type::Union(ms) => flat.extend(ms),
                other => flat.push(other),
            }
        }
        flat.sort();
        flat.dedup();
        match flat.len() {
            1 => flat.pop().unwrap(),
            _ => Type::Union(flat),
        }
    }

    pub fn record<I: IntoIterator<Item = (Name, Field)>>(fields: I) -> Type {
        Type::Record(fields.into_iter().collect())
    }

    /// Rebuilds the type in canonical form; idempotent.
    pub fn canonical(&self) -> Type {
        match self {
            Type::Class(_) | Type::ClassOf(_) => self.clone(),
            Type::Union(ms) => Type::union(ms.iter().cloned()),
            Type::Record(fs) => Type::Record(
                fs.iter()
                    .map(|(k, f)| {
                        (
                            k.clone(),
                            Field {
                                optional: f.optional,
                                ty: f.ty.canonical(),
                            },
                        )
                    })
                    .collect(),
            ),
        }
    }

    pub fn members(&self) -> Vec<&Type> {
        match self {
            Type::Union(ms) => ms.iter().collect(),
            t => vec![t],
        }
    }

    /// Every class name mentioned by the type.
    pub fn class_names(&self) -> Vec<&Name> {
        let mut out = Vec::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names<'a>(&'a self, out: &mut Vec<&'a Name>) {
        match self {
            Type::Class(n) | Type::ClassOf(n) => out.push(n),
            Type::Union(ms) => ms.iter().for_each(|m| m.collect_names(out)),
            Type::Record(fs) => fs.values().for_each(|f| f.ty.collect_names(out)),
        }
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Type::Class(n) if &**n == NIL)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Class(n) => write!(f, "{n}"),
            Type::ClassOf(n) => write!(f, "(class-of {n})"),
            Type::Union(ms) => {
                write!(f, "(union")?;
                for m in ms {
                    write!(f, " {m}")?;
                }
                write!(f, ")")
            }
            Type::Record(fs) => {
                write!(f, "(rec")?;
                for (k, fld) in fs {
                    let opt = if fld.optional { "?" } else { "" };
                    // optional marker is only legal on a bare class name
                    match &fld.ty {
                        Type::Class(n) => write!(f, " ({k} {opt}{n})")?,
                        other if fld.optional => write!(f, " ({k} ? {other})")?,
                        other => write!(f, " ({k} {other})")?,
                    }
                }
                write!(f, ")")
            }
        }
    }
}
