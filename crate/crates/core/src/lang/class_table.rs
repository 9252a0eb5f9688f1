use std::collections::BTreeMap;
use std::fmt;

use super::effect::{Effect, EffectPair, Hierarchy, Precision};
use super::expr::Expr;
use super::types::{Type, BOOL, INT, NIL, OBJ, STR, SYM};
use super::{DefinitionError, Name};

/// Root of every model class generated from a schema.
pub const DB_RECORD: &str = "DbRecord";

/// A method's type-and-effect signature, optionally bound to a native.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MethodSig {
    pub owner: Type,
    pub name: Name,
    pub params: Vec<Type>,
    pub ret: Type,
    pub eff: EffectPair,
    pub native: Option<Name>,
}

impl MethodSig {
    pub fn new(owner: Type, name: &str, params: Vec<Type>, ret: Type, eff: EffectPair) -> Self {
        MethodSig {
            owner,
            name: name.into(),
            params,
            ret,
            eff,
            native: None,
        }
    }

    pub fn with_native(mut self, id: &str) -> Self {
        self.native = Some(id.into());
        self
    }

    /// The class whose state `self` effects refer to.
    pub fn owner_class(&self) -> &Name {
        match &self.owner {
            Type::Class(c) | Type::ClassOf(c) => c,
            _ => unreachable!("method owners are class or singleton types"),
        }
    }

    /// Effects with `self` resolved against the declaring owner.
    pub fn resolved_eff(&self, h: &dyn Hierarchy) -> EffectPair {
        self.eff.resolve_self(self.owner_class(), h)
    }
}

impl fmt::Display for MethodSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(method {} {} (params", self.owner, self.name)?;
        for p in &self.params {
            write!(f, " {p}")?;
        }
        write!(
            f,
            ") {} (read {}) (write {})",
            self.ret, self.eff.read, self.eff.write
        )?;
        if let Some(n) = &self.native {
            write!(f, " (native \"{n}\")")?;
        }
        write!(f, ")")
    }
}

/// Class hierarchy plus method signatures keyed by `(owner, name)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTable {
    parents: BTreeMap<Name, Name>,
    methods: BTreeMap<(Type, Name), MethodSig>,
}

impl Default for ClassTable {
    fn default() -> Self {
        ClassTable::new()
    }
}

impl ClassTable {
    /// A table with the reserved classes and the core `==` / `!` methods.
    pub fn new() -> ClassTable {
        let mut ct = ClassTable {
            parents: BTreeMap::new(),
            methods: BTreeMap::new(),
        };
        for c in [NIL, BOOL, STR, INT, SYM, DB_RECORD] {
            ct.parents.insert(c.into(), OBJ.into());
        }
        ct.methods.insert(
            (Type::obj(), "==".into()),
            MethodSig::new(Type::obj(), "==", vec![Type::obj()], Type::bool(), EffectPair::pure())
                .with_native("core.eq"),
        );
        ct.methods.insert(
            (Type::bool(), "!".into()),
            MethodSig::new(Type::bool(), "!", vec![], Type::bool(), EffectPair::pure())
                .with_native("core.not"),
        );
        ct
    }

    pub fn is_reserved(name: &str) -> bool {
        matches!(name, "Obj" | "Nil" | "Bool" | "Str" | "Int" | "Sym")
    }

    pub fn add_class(&mut self, name: &str, parent: &str) -> Result<(), DefinitionError> {
        if Self::is_reserved(name) || self.has_class(name) {
            return Err(DefinitionError::DuplicateClass(name.into()));
        }
        if !self.has_class(parent) {
            return Err(DefinitionError::UnknownClass(parent.into()));
        }
        if parent == NIL {
            return Err(DefinitionError::Invalid(format!(
                "class {name} cannot extend Nil"
            )));
        }
        self.parents.insert(name.into(), parent.into());
        Ok(())
    }

    pub fn has_class(&self, name: &str) -> bool {
        name == OBJ || self.parents.contains_key(name)
    }

    pub fn classes(&self) -> impl Iterator<Item = &Name> {
        self.parents.keys()
    }

    pub fn parent(&self, name: &str) -> Option<&Name> {
        self.parents.get(name)
    }

    /// Adds a method. Every class named in the signature must exist.
    pub fn add_method(&mut self, sig: MethodSig) -> Result<(), DefinitionError> {
        if !matches!(sig.owner, Type::Class(_) | Type::ClassOf(_)) {
            return Err(DefinitionError::Invalid(format!(
                "method {} has non-class owner {}",
                sig.name, sig.owner
            )));
        }
        for t in std::iter::once(&sig.owner)
            .chain(sig.params.iter())
            .chain(std::iter::once(&sig.ret))
        {
            self.check_type(t)?;
        }
        for atom in sig.eff.read.atoms().chain(sig.eff.write.atoms()) {
            use super::effect::EffectAtom::*;
            if let ClassStar(c) | Region(c, _) = atom {
                if !self.has_class(c) {
                    return Err(DefinitionError::UnknownClass(c.clone()));
                }
            }
        }
        let key = (sig.owner.clone(), sig.name.clone());
        if self.methods.contains_key(&key) {
            return Err(DefinitionError::DuplicateMethod(
                sig.owner.to_string(),
                sig.name.to_string(),
            ));
        }
        let mut sig = sig;
        sig.eff = EffectPair::new(
            Effect::canonical(sig.eff.read.atoms().cloned(), self),
            Effect::canonical(sig.eff.write.atoms().cloned(), self),
        );
        self.methods.insert(key, sig);
        Ok(())
    }

    pub fn methods(&self) -> impl Iterator<Item = &MethodSig> {
        self.methods.values()
    }

    pub fn check_type(&self, t: &Type) -> Result<(), DefinitionError> {
        for n in t.class_names() {
            if !self.has_class(n) {
                return Err(DefinitionError::UnknownClass(n.clone()));
            }
        }
        Ok(())
    }

    /// Class subtyping along the parent chain.
    pub fn is_subclass(&self, sub: &str, sup: &str) -> bool {
        if sub == sup || sup == OBJ || sub == NIL {
            return true;
        }
        let mut cur = sub;
        while let Some(p) = self.parents.get(cur) {
            if &**p == sup {
                return true;
            }
            cur = p;
        }
        false
    }

    /// Ancestors of `name`, most-derived first, ending at `Obj`.
    pub fn ancestors<'a>(&'a self, name: &'a str) -> Vec<&'a str> {
        let mut out = vec![name];
        let mut cur = name;
        while let Some(p) = self.parents.get(cur) {
            out.push(p);
            cur = p;
        }
        if *out.last().unwrap() != OBJ {
            out.push(OBJ);
        }
        out
    }

    /// `t1 ≤ t2`.
    pub fn subtype(&self, t1: &Type, t2: &Type) -> bool {
        if t1 == t2 {
            return true;
        }
        match (t1, t2) {
            (Type::Union(ms), _) => ms.iter().all(|m| self.subtype(m, t2)),
            (Type::Class(n), _) if &**n == NIL => true,
            (_, Type::Class(n)) if &**n == OBJ => true,
            (_, Type::Union(ms)) => ms.iter().any(|m| self.subtype(t1, m)),
            (Type::Class(a), Type::Class(b)) => self.is_subclass(a, b),
            (Type::ClassOf(a), Type::ClassOf(b)) => a == b,
            (Type::Record(r1), Type::Record(r2)) => {
                r1.iter().all(|(k, f1)| {
                    r2.get(k)
                        .is_some_and(|f2| (f2.optional || !f1.optional) && self.subtype(&f1.ty, &f2.ty))
                }) && r2
                    .iter()
                    .all(|(k, f2)| f2.optional || r1.contains_key(k))
            }
            _ => false,
        }
    }

    /// Like [`subtype`](Self::subtype), but rejects unknown class names.
    pub fn try_subtype(&self, t1: &Type, t2: &Type) -> Result<bool, DefinitionError> {
        self.check_type(t1)?;
        self.check_type(t2)?;
        Ok(self.subtype(t1, t2))
    }

    /// Finds `name` on `owner` or its nearest ancestor. Singleton types walk
    /// `ClassOf` ancestors, then fall back to instance methods of `Obj`.
    /// `Nil` has no methods.
    pub fn lookup_method(&self, owner: &Type, name: &str) -> Result<&MethodSig, DefinitionError> {
        let missing = || DefinitionError::MethodMissing(owner.to_string(), name.to_string());
        let name: Name = name.into();
        match owner {
            Type::Class(c) if &**c == NIL => Err(missing()),
            Type::Class(c) => self
                .ancestors(c)
                .into_iter()
                .find_map(|a| self.methods.get(&(Type::class(a), name.clone())))
                .ok_or_else(missing),
            Type::ClassOf(c) => self
                .ancestors(c)
                .into_iter()
                .find_map(|a| self.methods.get(&(Type::class_of(a), name.clone())))
                .or_else(|| self.methods.get(&(Type::obj(), name.clone())))
                .ok_or_else(missing),
            _ => Err(missing()),
        }
    }

    /// A copy with every signature's effects coarsened to `precision`.
    pub fn erase_effects(&self, precision: Precision) -> ClassTable {
        let mut out = self.clone();
        for sig in out.methods.values_mut() {
            sig.eff = sig.eff.erase(precision, self);
        }
        out
    }
}

impl Hierarchy for ClassTable {
    fn is_subclass(&self, sub: &str, sup: &str) -> bool {
        ClassTable::is_subclass(self, sub, sup)
    }
}

/// User-supplied constants that may fill typed holes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstantPool {
    entries: Vec<(Expr, Type)>,
}

impl ConstantPool {
    pub fn new() -> Self {
        ConstantPool::default()
    }

    /// Adds a constant. The literal must be a value whose type is a subtype
    /// of the declared one.
    pub fn push(&mut self, lit: Expr, ty: Type, ct: &ClassTable) -> Result<(), DefinitionError> {
        let actual = literal_type(&lit).ok_or_else(|| {
            DefinitionError::Invalid(format!("constant {lit} is not a literal value"))
        })?;
        ct.check_type(&ty)?;
        ct.check_type(&actual)?;
        if !ct.subtype(&actual, &ty) {
            return Err(DefinitionError::Invalid(format!(
                "constant {lit} does not have type {ty}"
            )));
        }
        if !self.entries.iter().any(|(e, _)| *e == lit) {
            self.entries.push((lit, ty));
        }
        Ok(())
    }

    pub fn entries(&self) -> &[(Expr, Type)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Static type of a literal value expression.
pub fn literal_type(e: &Expr) -> Option<Type> {
    Some(match e {
        Expr::Nil => Type::nil(),
        Expr::True | Expr::False => Type::bool(),
        Expr::Int(_) => Type::int(),
        Expr::Str(_) => Type::str(),
        Expr::Sym(_) => Type::sym(),
        Expr::ClassLit(c) => Type::ClassOf(c.clone()),
        _ => return None,
    })
}
