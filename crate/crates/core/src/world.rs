//! Runtime values, the mutable world, and the `minidb` active-record style
//! library whose schemas generate annotated method signatures.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::lang::{
    ClassTable, DefinitionError, Effect, EffectPair, Field, MethodSig, Name, Type, BOOL, INT, NIL,
    OBJ, STR, SYM, DB_RECORD,
};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Nil,
    Bool(bool),
    Int(i64),
    Str(Name),
    Sym(Name),
    Class(Name),
    Obj(Name, u64),
    Record(BTreeMap<Name, Value>),
}

impl Value {
    /// `false` and `nil` are falsy; everything else is truthy.
    pub fn truthy(&self) -> bool {
        !matches!(self, Value::Nil | Value::Bool(false))
    }

    /// The type used to dispatch methods on this value. Records have none.
    pub fn dispatch_type(&self) -> Option<Type> {
        Some(match self {
            Value::Nil => Type::nil(),
            Value::Bool(_) => Type::bool(),
            Value::Int(_) => Type::int(),
            Value::Str(_) => Type::str(),
            Value::Sym(_) => Type::sym(),
            Value::Class(c) => Type::ClassOf(c.clone()),
            Value::Obj(c, _) => Type::Class(c.clone()),
            Value::Record(_) => return None,
        })
    }

    /// The class that `self` effect atoms resolve to for this receiver.
    pub fn self_class(&self) -> Name {
        match self {
            Value::Class(c) | Value::Obj(c, _) => c.clone(),
            Value::Nil => NIL.into(),
            Value::Bool(_) => BOOL.into(),
            Value::Int(_) => INT.into(),
            Value::Str(_) => STR.into(),
            Value::Sym(_) => SYM.into(),
            Value::Record(_) => OBJ.into(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nil => write!(f, "nil"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Sym(s) => write!(f, ":{s}"),
            Value::Class(c) => write!(f, "{c}"),
            Value::Obj(c, id) => write!(f, "#<{c} {id}>"),
            Value::Record(fields) => {
                write!(f, "{{")?;
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("undefined method `{0}` for nil")]
    NilMethodMissing(Name),
    #[error("undefined method `{1}` for {0}")]
    MethodMissing(String, Name),
    #[error("`{method}` expects {expected} argument(s), got {got}")]
    Arity {
        method: Name,
        expected: usize,
        got: usize,
    },
    #[error("unbound variable `{0}`")]
    UnboundVar(Name),
    #[error("no {0} row with id {1}")]
    MissingRow(Name, u64),
    #[error("unknown column `{1}` on {0}")]
    UnknownColumn(Name, Name),
    #[error("bad argument to `{0}`: {1}")]
    BadArgument(Name, String),
    #[error(transparent)]
    Definition(#[from] DefinitionError),
}

/// A table declaration; its class extends `DbRecord`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaDecl {
    pub class: Name,
    pub columns: Vec<(Name, Type)>,
}

impl SchemaDecl {
    pub fn new(class: &str, columns: &[(&str, Type)]) -> SchemaDecl {
        SchemaDecl {
            class: class.into(),
            columns: columns.iter().map(|(c, t)| ((*c).into(), t.clone())).collect(),
        }
    }

    fn validate(&self) -> Result<(), DefinitionError> {
        let mut seen = Vec::new();
        for (c, t) in &self.columns {
            if seen.contains(c) || &**c == "id" {
                return Err(DefinitionError::DuplicateColumn(self.class.clone(), c.clone()));
            }
            if !matches!(t, Type::Class(n) if matches!(&**n, "Str" | "Int" | "Bool" | "Sym")) {
                return Err(DefinitionError::Invalid(format!(
                    "column {}.{c} must have a primitive type, found {t}",
                    self.class
                )));
            }
            seen.push(c.clone());
        }
        Ok(())
    }

    /// Record type with every column optional.
    pub fn query_type(&self) -> Type {
        Type::record(self.columns.iter().map(|(c, t)| {
            (
                c.clone(),
                Field {
                    optional: true,
                    ty: t.clone(),
                },
            )
        }))
    }

    fn default_value(ty: &Type) -> Value {
        match ty {
            Type::Class(n) if &**n == INT => Value::Int(0),
            Type::Class(n) if &**n == BOOL => Value::Bool(false),
            Type::Class(n) if &**n == SYM => Value::Sym("".into()),
            _ => Value::Str("".into()),
        }
    }
}

/// Name of the generated query-result class for a model.
pub fn relation_class(model: &str) -> Name {
    format!("Relation<{model}>").into()
}

/// Signatures generated for a schema: column readers and writers, the `id`
/// reader, the class-level `create`/`exists?`/`where` queries and the
/// relation's `first`.
pub fn generate_schema_methods(s: &SchemaDecl) -> Result<Vec<MethodSig>, DefinitionError> {
    s.validate()?;
    let a = &*s.class;
    let model = Type::class(a);
    let mut sigs = Vec::new();
    sigs.push(
        MethodSig::new(
            model.clone(),
            "id",
            vec![],
            Type::int(),
            EffectPair::new(Effect::region(a, "id"), Effect::pure()),
        )
        .with_native("minidb.get:id"),
    );
    for (c, t) in &s.columns {
        sigs.push(
            MethodSig::new(
                model.clone(),
                c,
                vec![],
                t.clone(),
                EffectPair::new(Effect::region(a, c), Effect::pure()),
            )
            .with_native(&format!("minidb.get:{c}")),
        );
        sigs.push(
            MethodSig::new(
                model.clone(),
                &format!("{c}="),
                vec![t.clone()],
                t.clone(),
                EffectPair::new(Effect::pure(), Effect::region(a, c)),
            )
            .with_native(&format!("minidb.set:{c}")),
        );
    }
    let singleton = Type::class_of(a);
    let query = s.query_type();
    sigs.push(
        MethodSig::new(
            singleton.clone(),
            "create",
            vec![query.clone()],
            model.clone(),
            EffectPair::new(Effect::pure(), Effect::self_star()),
        )
        .with_native("minidb.create"),
    );
    sigs.push(
        MethodSig::new(
            singleton.clone(),
            "exists?",
            vec![query.clone()],
            Type::bool(),
            EffectPair::new(Effect::self_star(), Effect::pure()),
        )
        .with_native("minidb.exists"),
    );
    let relation = relation_class(a);
    sigs.push(
        MethodSig::new(
            singleton,
            "where",
            vec![query],
            Type::Class(relation.clone()),
            EffectPair::new(Effect::self_star(), Effect::pure()),
        )
        .with_native("minidb.where"),
    );
    // `self` on a relation would name the relation class, so the table read
    // is spelled out.
    sigs.push(
        MethodSig::new(
            Type::Class(relation),
            "first",
            vec![],
            model,
            EffectPair::new(Effect::class_star(a), Effect::pure()),
        )
        .with_native("minidb.first"),
    );
    Ok(sigs)
}

/// Registers the model class, its relation class and generated methods.
pub fn install_schema(ct: &mut ClassTable, s: &SchemaDecl) -> Result<(), DefinitionError> {
    let sigs = generate_schema_methods(s)?;
    ct.add_class(&s.class, DB_RECORD)?;
    ct.add_class(&relation_class(&s.class), OBJ)?;
    for sig in sigs {
        ct.add_method(sig)?;
    }
    Ok(())
}

pub type Row = BTreeMap<Name, Value>;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Relation {
    model: Name,
    predicate: BTreeMap<Name, Value>,
}

/// In-memory database plus global variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct World {
    schemas: BTreeMap<Name, SchemaDecl>,
    tables: BTreeMap<Name, BTreeMap<u64, Row>>,
    pub globals: BTreeMap<Name, Value>,
    relations: Vec<Relation>,
    next_id: u64,
}

impl World {
    pub fn new<I: IntoIterator<Item = SchemaDecl>>(schemas: I) -> World {
        let schemas: BTreeMap<_, _> = schemas.into_iter().map(|s| (s.class.clone(), s)).collect();
        let mut w = World {
            tables: BTreeMap::new(),
            schemas,
            globals: BTreeMap::new(),
            relations: Vec::new(),
            next_id: 1,
        };
        w.reset();
        w
    }

    /// Clears all tables and globals and restarts id allocation.
    pub fn reset(&mut self) {
        self.tables = self
            .schemas
            .keys()
            .map(|c| (c.clone(), BTreeMap::new()))
            .collect();
        self.globals.clear();
        self.relations.clear();
        self.next_id = 1;
    }

    pub fn row_count(&self, class: &str) -> usize {
        self.tables.get(class).map_or(0, BTreeMap::len)
    }

    pub fn row(&self, class: &str, id: u64) -> Option<&Row> {
        self.tables.get(class)?.get(&id)
    }

    pub fn rows(&self, class: &str) -> impl Iterator<Item = (&u64, &Row)> {
        self.tables.get(class).into_iter().flat_map(|t| t.iter())
    }

    fn schema(&self, class: &Name) -> Result<&SchemaDecl, RuntimeError> {
        self.schemas.get(class).ok_or_else(|| {
            RuntimeError::Definition(DefinitionError::Invalid(format!("no schema for {class}")))
        })
    }

    fn matches(row: &Row, predicate: &BTreeMap<Name, Value>) -> bool {
        predicate.iter().all(|(k, v)| row.get(k) == Some(v))
    }

    fn predicate(&self, model: &Name, method: &Name, arg: &Value) -> Result<Row, RuntimeError> {
        let Value::Record(fields) = arg else {
            return Err(RuntimeError::BadArgument(method.clone(), format!("expected a record, got {arg}")));
        };
        let schema = self.schema(model)?;
        for k in fields.keys() {
            if !schema.columns.iter().any(|(c, _)| c == k) {
                return Err(RuntimeError::UnknownColumn(model.clone(), k.clone()));
            }
        }
        Ok(fields.clone())
    }

    fn first_match(&self, model: &str, predicate: &Row) -> Option<u64> {
        self.tables
            .get(model)?
            .iter()
            .find(|(_, row)| Self::matches(row, predicate))
            .map(|(id, _)| *id)
    }

    /// Runs the native implementation bound to `sig`.
    pub fn invoke_native(
        &mut self,
        sig: &MethodSig,
        recv: &Value,
        args: &[Value],
    ) -> Result<Value, RuntimeError> {
        let native = sig
            .native
            .as_deref()
            .ok_or_else(|| DefinitionError::UnboundNative(format!("{}#{}", sig.owner, sig.name)))?;
        if args.len() != sig.params.len() {
            return Err(RuntimeError::Arity {
                method: sig.name.clone(),
                expected: sig.params.len(),
                got: args.len(),
            });
        }
        let model = || match recv {
            Value::Class(c) => Ok(c.clone()),
            _ => Err(RuntimeError::BadArgument(sig.name.clone(), format!("expected a class, got {recv}"))),
        };
        match native {
            "core.eq" => Ok(Value::Bool(*recv == args[0])),
            "core.not" => Ok(Value::Bool(!recv.truthy())),
            "minidb.create" => {
                let model = model()?;
                let given = self.predicate(&model, &sig.name, &args[0])?;
                let schema = self.schema(&model)?;
                let row: Row = schema
                    .columns
                    .iter()
                    .map(|(c, t)| {
                        let v = given.get(c).cloned().unwrap_or_else(|| SchemaDecl::default_value(t));
                        (c.clone(), v)
                    })
                    .collect();
                let id = self.next_id;
                self.next_id += 1;
                self.tables.entry(model.clone()).or_default().insert(id, row);
                Ok(Value::Obj(model, id))
            }
            "minidb.exists" => {
                let model = model()?;
                let pred = self.predicate(&model, &sig.name, &args[0])?;
                Ok(Value::Bool(self.first_match(&model, &pred).is_some()))
            }
            "minidb.where" => {
                let model = model()?;
                let predicate = self.predicate(&model, &sig.name, &args[0])?;
                self.relations.push(Relation {
                    model: model.clone(),
                    predicate,
                });
                Ok(Value::Obj(relation_class(&model), (self.relations.len() - 1) as u64))
            }
            "minidb.first" => {
                let Value::Obj(_, rid) = recv else {
                    return Err(RuntimeError::BadArgument(sig.name.clone(), format!("expected a relation, got {recv}")));
                };
                let rel = self
                    .relations
                    .get(*rid as usize)
                    .ok_or_else(|| RuntimeError::MissingRow(recv.self_class(), *rid))?;
                Ok(match self.first_match(&rel.model, &rel.predicate) {
                    Some(id) => Value::Obj(rel.model.clone(), id),
                    None => Value::Nil,
                })
            }
            other => {
                let (accessor, column) = other
                    .split_once(':')
                    .ok_or_else(|| DefinitionError::UnboundNative(other.to_string()))?;
                let Value::Obj(class, id) = recv else {
                    return Err(RuntimeError::BadArgument(sig.name.clone(), format!("expected a record object, got {recv}")));
                };
                let row = self
                    .tables
                    .get_mut(class)
                    .and_then(|t| t.get_mut(id))
                    .ok_or_else(|| RuntimeError::MissingRow(class.clone(), *id))?;
                match (accessor, column) {
                    ("minidb.get", "id") => Ok(Value::Int(*id as i64)),
                    ("minidb.get", col) => row
                        .get(col)
                        .cloned()
                        .ok_or_else(|| RuntimeError::UnknownColumn(class.clone(), col.into())),
                    ("minidb.set", col) => {
                        let slot = row
                            .get_mut(col)
                            .ok_or_else(|| RuntimeError::UnknownColumn(class.clone(), col.into()))?;
                        *slot = args[0].clone();
                        Ok(args[0].clone())
                    }
                    _ => Err(DefinitionError::UnboundNative(other.to_string()).into()),
                }
            }
        }
    }
}
