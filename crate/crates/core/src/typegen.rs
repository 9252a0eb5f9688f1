//! Type checking and type-guided expansion of typed holes.

use std::fmt;

use thiserror::Error;

use crate::lang::{ClassTable, Cond, ConstantPool, Expr, HoleId, Name, Type, INDEX};

/// Insertion-ordered variable typing; later bindings shadow earlier ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeEnv {
    bindings: Vec<(Name, Type)>,
}

impl TypeEnv {
    pub fn new() -> TypeEnv {
        TypeEnv::default()
    }

    pub fn from_params(params: &[Name], types: &[Type]) -> TypeEnv {
        TypeEnv {
            bindings: params.iter().cloned().zip(types.iter().cloned()).collect(),
        }
    }

    pub fn bind(&mut self, x: Name, t: Type) {
        self.bindings.push((x, t));
    }

    pub fn get(&self, x: &str) -> Option<&Type> {
        self.bindings.iter().rev().find(|(n, _)| &**n == x).map(|(_, t)| t)
    }

    /// Visible bindings in insertion order, shadowed entries removed.
    pub fn visible(&self) -> Vec<(&Name, &Type)> {
        self.bindings
            .iter()
            .enumerate()
            .filter(|(i, (n, _))| !self.bindings[i + 1..].iter().any(|(m, _)| m == n))
            .map(|(_, (n, t))| (n, t))
            .collect()
    }

    fn with(&self, x: &Name, t: Type) -> TypeEnv {
        let mut env = self.clone();
        env.bind(x.clone(), t);
        env
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeErrorKind {
    MethodMissingOnType(String, Name),
    ArgMismatch { method: Name, expected: Type, found: Type },
    Arity { method: Name, expected: usize, found: usize },
    UnboundVar(Name),
    NotBool(Type),
}

impl fmt::Display for TypeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeErrorKind::MethodMissingOnType(t, m) => write!(f, "no method `{m}` on type {t}"),
            TypeErrorKind::ArgMismatch { method, expected, found } => {
                write!(f, "argument to `{method}` has type {found}, expected {expected}")
            }
            TypeErrorKind::Arity { method, expected, found } => {
                write!(f, "`{method}` takes {expected} argument(s), given {found}")
            }
            TypeErrorKind::UnboundVar(x) => write!(f, "unbound variable `{x}`"),
            TypeErrorKind::NotBool(t) => write!(f, "condition has type {t}, expected Bool"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("type error in {node}: {kind}")]
pub struct TypeError {
    pub node: String,
    pub kind: TypeErrorKind,
}

fn err<T>(node: &Expr, kind: TypeErrorKind) -> Result<T, TypeError> {
    Err(TypeError {
        node: node.to_string(),
        kind,
    })
}

/// Computes the type of `e`. Typed holes have their annotation and effect
/// holes have type `Obj`.
pub fn typecheck(env: &TypeEnv, ct: &ClassTable, e: &Expr) -> Result<Type, TypeError> {
    match e {
        Expr::Nil => Ok(Type::nil()),
        Expr::True | Expr::False => Ok(Type::bool()),
        Expr::Int(_) => Ok(Type::int()),
        Expr::Str(_) => Ok(Type::str()),
        Expr::Sym(_) => Ok(Type::sym()),
        Expr::ClassLit(c) => Ok(Type::ClassOf(c.clone())),
        Expr::Var(x) => match env.get(x) {
            Some(t) => Ok(t.clone()),
            None => err(e, TypeErrorKind::UnboundVar(x.clone())),
        },
        Expr::Seq(a, b) => {
            typecheck(env, ct, a)?;
            typecheck(env, ct, b)
        }
        Expr::Let(x, bound, body) => {
            let t = typecheck(env, ct, bound)?;
            typecheck(&env.with(x, t), ct, body)
        }
        Expr::If(c, a, b) => {
            check_cond(env, ct, c)?;
            Ok(Type::union([typecheck(env, ct, a)?, typecheck(env, ct, b)?]))
        }
        Expr::Record(pairs) => {
            let mut fields = Vec::with_capacity(pairs.len());
            for (k, v) in pairs {
                let ty = typecheck(env, ct, v)?;
                fields.push((k.clone(), crate::lang::Field { optional: false, ty }));
            }
            Ok(Type::record(fields))
        }
        Expr::Hole(_, t) => Ok(t.clone()),
        Expr::EffHole(..) => Ok(Type::obj()),
        Expr::Call { recv, method, args } => {
            let recv_t = typecheck(env, ct, recv)?;
            if &**method == INDEX {
                if let (Type::Record(fields), [Expr::Sym(k)]) = (&recv_t, args.as_slice()) {
                    if let Some(f) = fields.get(k) {
                        return Ok(f.ty.clone());
                    }
                }
                return err(e, TypeErrorKind::MethodMissingOnType(recv_t.to_string(), method.clone()));
            }
            let arg_ts = args
                .iter()
                .map(|a| typecheck(env, ct, a))
                .collect::<Result<Vec<_>, _>>()?;
            let mut rets = Vec::new();
            for member in recv_t.members() {
                if member.is_nil() || matches!(member, Type::Record(_)) {
                    return err(e, TypeErrorKind::MethodMissingOnType(member.to_string(), method.clone()));
                }
                let sig = match ct.lookup_method(member, method) {
                    Ok(sig) => sig,
                    Err(_) => {
                        return err(e, TypeErrorKind::MethodMissingOnType(member.to_string(), method.clone()))
                    }
                };
                if sig.params.len() != arg_ts.len() {
                    return err(
                        e,
                        TypeErrorKind::Arity {
                            method: method.clone(),
                            expected: sig.params.len(),
                            found: arg_ts.len(),
                        },
                    );
                }
                for (p, a) in sig.params.iter().zip(&arg_ts) {
                    if !ct.subtype(a, p) {
                        return err(
                            e,
                            TypeErrorKind::ArgMismatch {
                                method: method.clone(),
                                expected: p.clone(),
                                found: a.clone(),
                            },
                        );
                    }
                }
                rets.push(sig.ret.clone());
            }
            Ok(Type::union(rets))
        }
    }
}

pub fn check_cond(env: &TypeEnv, ct: &ClassTable, c: &Cond) -> Result<(), TypeError> {
    match c {
        Cond::Atom(e) => {
            let t = typecheck(env, ct, e)?;
            if ct.subtype(&t, &Type::bool()) {
                Ok(())
            } else {
                err(e, TypeErrorKind::NotBool(t))
            }
        }
        Cond::Not(c) => check_cond(env, ct, c),
        Cond::Or(a, b) => {
            check_cond(env, ct, a)?;
            check_cond(env, ct, b)
        }
    }
}

/// Switches for the guidance rules; disabling a check replaces its side
/// condition with "always true".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpandOptions {
    pub check_types: bool,
    pub check_effects: bool,
    /// Only methods without write effects may be introduced.
    pub pure_writes_only: bool,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        ExpandOptions {
            check_types: true,
            check_effects: true,
            pure_writes_only: false,
        }
    }
}

/// Finds the type environment in scope at hole `id`.
pub fn hole_scope(e: &Expr, id: HoleId, env: &TypeEnv, ct: &ClassTable) -> Option<TypeEnv> {
    fn go(e: &Expr, id: HoleId, env: &TypeEnv, ct: &ClassTable) -> Option<TypeEnv> {
        match e {
            Expr::Hole(h, _) | Expr::EffHole(h, _) if *h == id => Some(env.clone()),
            Expr::Seq(a, b) => go(a, id, env, ct).or_else(|| go(b, id, env, ct)),
            Expr::Let(x, a, b) => go(a, id, env, ct).or_else(|| {
                // Ill-typed bound expressions still expose the binder.
                let t = typecheck(env, ct, a).unwrap_or_else(|_| Type::obj());
                go(b, id, &env.with(x, t), ct)
            }),
            Expr::Call { recv, args, .. } => {
                go(recv, id, env, ct).or_else(|| args.iter().find_map(|a| go(a, id, env, ct)))
            }
            Expr::If(c, a, b) => {
                let mut found = None;
                c.map_exprs(&mut |x| {
                    if found.is_none() {
                        found = go(x, id, env, ct);
                    }
                    x.clone()
                });
                found
                    .or_else(|| go(a, id, env, ct))
                    .or_else(|| go(b, id, env, ct))
            }
            Expr::Record(pairs) => pairs.values().find_map(|v| go(v, id, env, ct)),
            _ => None,
        }
    }
    go(e, id, env, ct)
}

/// The leftmost hole of a candidate whose holes are numbered in pre-order.
pub fn leftmost_hole(e: &Expr) -> Option<&Expr> {
    fn in_cond(c: &Cond) -> Option<&Expr> {
        match c {
            Cond::Atom(x) => leftmost_hole(x),
            Cond::Not(c) => in_cond(c),
            Cond::Or(a, b) => in_cond(a).or_else(|| in_cond(b)),
        }
    }
    match e {
        Expr::Hole(..) | Expr::EffHole(..) => Some(e),
        Expr::Seq(a, b) | Expr::Let(_, a, b) => leftmost_hole(a).or_else(|| leftmost_hole(b)),
        Expr::Call { recv, args, .. } => leftmost_hole(recv).or_else(|| args.iter().find_map(leftmost_hole)),
        Expr::If(c, a, b) => in_cond(c)
            .or_else(|| leftmost_hole(a))
            .or_else(|| leftmost_hole(b)),
        Expr::Record(pairs) => pairs.values().find_map(leftmost_hole),
        _ => None,
    }
}

/// Subsets of the optional keys, by increasing size then key order.
fn key_subsets(keys: &[Name]) -> Vec<Vec<Name>> {
    let n = keys.len();
    let mut out = Vec::new();
    for k in 0..=n {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(idx.iter().map(|&i| keys[i].clone()).collect());
            // next k-combination in lexicographic order
            let mut i = k;
            while i > 0 && idx[i - 1] == n - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

/// Candidate terms for a hole of type `target`, before substitution.
pub fn hole_fillers(
    env: &TypeEnv,
    ct: &ClassTable,
    consts: &ConstantPool,
    target: &Type,
    opts: ExpandOptions,
) -> Vec<Expr> {
    let fits = |t: &Type| !opts.check_types || ct.subtype(t, target);
    let mut out = Vec::new();
    for (lit, t) in consts.entries() {
        if fits(t) {
            out.push(lit.clone());
        }
    }
    let visible = env.visible();
    for (x, t) in &visible {
        if fits(t) {
            out.push(Expr::Var((*x).clone()));
        }
    }
    for (x, t) in &visible {
        if let Type::Record(fields) = t {
            for (k, f) in fields {
                if fits(&f.ty) {
                    out.push(Expr::index(Expr::Var((*x).clone()), k));
                }
            }
        }
    }
    for sig in ct.methods() {
        if opts.pure_writes_only && !sig.eff.write.is_pure() {
            continue;
        }
        if sig.owner.is_nil() {
            continue;
        }
        if fits(&sig.ret) {
            out.push(Expr::Call {
                recv: Box::new(Expr::hole(sig.owner.clone())),
                method: sig.name.clone(),
                args: sig.params.iter().cloned().map(Expr::hole).collect(),
            });
        }
    }
    if let Type::Record(fields) = target {
        let optional: Vec<Name> = fields
            .iter()
            .filter(|(_, f)| f.optional)
            .map(|(k, _)| k.clone())
            .collect();
        for subset in key_subsets(&optional) {
            out.push(Expr::record(
                fields
                    .iter()
                    .filter(|(k, f)| !f.optional || subset.contains(*k))
                    .map(|(k, f)| (k.clone(), Expr::hole(f.ty.clone()))),
            ));
        }
    }
    out
}

/// Rewrites the leftmost hole, which must be a typed hole, by every
/// applicable constant, variable, record projection, method call, and
/// record literal. Results that no longer typecheck are dropped unless
/// type guidance is off.
pub fn expand_typed_hole(
    env: &TypeEnv,
    ct: &ClassTable,
    consts: &ConstantPool,
    e: &Expr,
    opts: ExpandOptions,
) -> Vec<Expr> {
    let mut e = e.clone();
    e.renumber_holes();
    let Some(Expr::Hole(id, target)) = leftmost_hole(&e).cloned() else {
        return Vec::new();
    };
    let scope = hole_scope(&e, id, env, ct).unwrap_or_else(|| env.clone());
    hole_fillers(&scope, ct, consts, &target, opts)
        .into_iter()
        .filter_map(|filler| {
            let mut cand = e.clone();
            cand.replace_hole(id, filler);
            let mut cand = cand.simplify();
            cand.renumber_holes();
            (!opts.check_types || typecheck(env, ct, &cand).is_ok()).then_some(cand)
        })
        .collect()
}
