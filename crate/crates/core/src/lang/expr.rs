use std::collections::BTreeMap;
use std::fmt;

use super::effect::Effect;
use super::types::Type;
use super::Name;

pub type HoleId = u32;

/// Method name used for finite-record field access, `r[:key]`.
pub const INDEX: &str = "[]";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Nil,
    True,
    False,
    Int(i64),
    Str(Name),
    Sym(Name),
    ClassLit(Name),
    Var(Name),
    Seq(Box<Expr>, Box<Expr>),
    Call {
        recv: Box<Expr>,
        method: Name,
        args: Vec<Expr>,
    },
    If(Box<Cond>, Box<Expr>, Box<Expr>),
    Let(Name, Box<Expr>, Box<Expr>),
    Record(BTreeMap<Name, Expr>),
    Hole(HoleId, Type),
    EffHole(HoleId, Effect),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cond {
    Atom(Expr),
    Not(Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.into())
    }

    pub fn str(text: &str) -> Expr {
        Expr::Str(text.into())
    }

    pub fn sym(name: &str) -> Expr {
        Expr::Sym(name.into())
    }

    pub fn class(name: &str) -> Expr {
        Expr::ClassLit(name.into())
    }

    pub fn call(recv: Expr, method: &str, args: Vec<Expr>) -> Expr {
        Expr::Call {
            recv: Box::new(recv),
            method: method.into(),
            args,
        }
    }

    pub fn seq(first: Expr, second: Expr) -> Expr {
        Expr::Seq(Box::new(first), Box::new(second))
    }

    pub fn let_(var: &str, bound: Expr, body: Expr) -> Expr {
        Expr::Let(var.into(), Box::new(bound), Box::new(body))
    }

    pub fn if_(cond: Cond, then: Expr, els: Expr) -> Expr {
        Expr::If(Box::new(cond), Box::new(then), Box::new(els))
    }

    pub fn record<I: IntoIterator<Item = (Name, Expr)>>(pairs: I) -> Expr {
        Expr::Record(pairs.into_iter().collect())
    }

    pub fn hole(ty: Type) -> Expr {
        Expr::Hole(0, ty)
    }

    pub fn eff_hole(eff: Effect) -> Expr {
        Expr::EffHole(0, eff)
    }

    /// `r[:key]`
    pub fn index(recv: Expr, key: &str) -> Expr {
        Expr::call(recv, INDEX, vec![Expr::sym(key)])
    }

    pub fn is_value(&self) -> bool {
        matches!(
            self,
            Expr::Nil
                | Expr::True
                | Expr::False
                | Expr::Int(_)
                | Expr::Str(_)
                | Expr::Sym(_)
                | Expr::ClassLit(_)
        )
    }

    /// Number of method calls and record pairs; every other node is free.
    pub fn size(&self) -> usize {
        match self {
            Expr::Seq(a, b) | Expr::Let(_, a, b) => a.size() + b.size(),
            Expr::Call { recv, args, .. } => {
                recv.size() + args.iter().map(Expr::size).sum::<usize>() + 1
            }
            Expr::If(c, a, b) => c.size() + a.size() + b.size(),
            Expr::Record(pairs) => pairs.values().map(|v| v.size() + 1).sum(),
            _ => 0,
        }
    }

    /// True iff the expression contains no typed or effect hole.
    pub fn is_complete(&self) -> bool {
        match self {
            Expr::Hole(..) | Expr::EffHole(..) => false,
            Expr::Seq(a, b) | Expr::Let(_, a, b) => a.is_complete() && b.is_complete(),
            Expr::Call { recv, args, .. } => recv.is_complete() && args.iter().all(Expr::is_complete),
            Expr::If(c, a, b) => c.is_complete() && a.is_complete() && b.is_complete(),
            Expr::Record(pairs) => pairs.values().all(Expr::is_complete),
            _ => true,
        }
    }

    pub fn count_ifs(&self) -> usize {
        match self {
            Expr::Seq(a, b) | Expr::Let(_, a, b) => a.count_ifs() + b.count_ifs(),
            Expr::Call { recv, args, .. } => {
                recv.count_ifs() + args.iter().map(Expr::count_ifs).sum::<usize>()
            }
            Expr::If(c, a, b) => 1 + c.count_ifs() + a.count_ifs() + b.count_ifs(),
            Expr::Record(pairs) => pairs.values().map(Expr::count_ifs).sum(),
            _ => 0,
        }
    }

    /// Number of execution paths: one plus the number of conditionals.
    pub fn paths(&self) -> usize {
        1 + self.count_ifs()
    }

    /// Visits immediate children in left-to-right evaluation order.
    fn children_mut(&mut self) -> Vec<ChildMut<'_>> {
        match self {
            Expr::Seq(a, b) | Expr::Let(_, a, b) => vec![ChildMut::Expr(a), ChildMut::Expr(b)],
            Expr::Call { recv, args, .. } => {
                let mut v = vec![ChildMut::Expr(recv)];
                v.extend(args.iter_mut().map(ChildMut::Expr));
                v
            }
            Expr::If(c, a, b) => vec![ChildMut::Cond(c), ChildMut::Expr(a), ChildMut::Expr(b)],
            Expr::Record(pairs) => pairs.values_mut().map(ChildMut::Expr).collect(),
            _ => vec![],
        }
    }

    /// Renumbers holes 0, 1, 2, … in pre-order so ids are unique and
    /// structurally canonical.
    pub fn renumber_holes(&mut self) {
        fn go(e: &mut Expr, next: &mut HoleId) {
            match e {
                Expr::Hole(id, _) | Expr::EffHole(id, _) => {
                    *id = *next;
                    *next += 1;
                }
                _ => {
                    for c in e.children_mut() {
                        match c {
                            ChildMut::Expr(e) => go(e, next),
                            ChildMut::Cond(c) => c.for_each_expr_mut(&mut |e| go(e, next)),
                        }
                    }
                }
            }
        }
        let mut next = 0;
        go(self, &mut next);
    }

    pub fn hole_count(&self) -> usize {
        match self {
            Expr::Hole(..) | Expr::EffHole(..) => 1,
            Expr::Seq(a, b) | Expr::Let(_, a, b) => a.hole_count() + b.hole_count(),
            Expr::Call { recv, args, .. } => {
                recv.hole_count() + args.iter().map(Expr::hole_count).sum::<usize>()
            }
            Expr::If(c, a, b) => c.hole_count() + a.hole_count() + b.hole_count(),
            Expr::Record(pairs) => pairs.values().map(Expr::hole_count).sum(),
            _ => 0,
        }
    }

    /// Number of `let` binders, used to pick fresh temporaries.
    pub fn let_count(&self) -> usize {
        match self {
            Expr::Let(_, a, b) => 1 + a.let_count() + b.let_count(),
            Expr::Seq(a, b) => a.let_count() + b.let_count(),
            Expr::Call { recv, args, .. } => {
                recv.let_count() + args.iter().map(Expr::let_count).sum::<usize>()
            }
            Expr::If(c, a, b) => c.let_count() + a.let_count() + b.let_count(),
            Expr::Record(pairs) => pairs.values().map(Expr::let_count).sum(),
            _ => 0,
        }
    }

    /// Replaces the hole with the given id. Returns false if absent.
    pub fn replace_hole(&mut self, id: HoleId, with: Expr) -> bool {
        let mut slot = Some(with);
        self.replace_hole_inner(id, &mut slot);
        slot.is_none()
    }

    fn replace_hole_inner(&mut self, id: HoleId, slot: &mut Option<Expr>) {
        match self {
            Expr::Hole(h, _) | Expr::EffHole(h, _) if *h == id => {
                if let Some(e) = slot.take() {
                    *self = e;
                }
            }
            _ => {
                for c in self.children_mut() {
                    if slot.is_none() {
                        return;
                    }
                    match c {
                        ChildMut::Expr(e) => e.replace_hole_inner(id, slot),
                        ChildMut::Cond(c) => {
                            c.for_each_expr_mut(&mut |e| {
                                if slot.is_some() {
                                    e.replace_hole_inner(id, slot)
                                }
                            })
                        }
                    }
                }
            }
        }
    }

    /// Local simplifications that never change evaluation results:
    /// `nil; e` ⇒ `e` and `let x = e in x` ⇒ `e`.
    pub fn simplify(self) -> Expr {
        match self {
            Expr::Seq(a, b) => {
                let a = a.simplify();
                let b = b.simplify();
                if a.is_value() {
                    b
                } else {
                    Expr::seq(a, b)
                }
            }
            Expr::Let(x, a, b) => {
                let a = a.simplify();
                let b = b.simplify();
                match &b {
                    Expr::Var(y) if *y == x => a,
                    _ => Expr::Let(x, Box::new(a), Box::new(b)),
                }
            }
            Expr::Call { recv, method, args } => Expr::Call {
                recv: Box::new(recv.simplify()),
                method,
                args: args.into_iter().map(Expr::simplify).collect(),
            },
            Expr::If(c, a, b) => Expr::If(c, Box::new(a.simplify()), Box::new(b.simplify())),
            Expr::Record(pairs) => {
                Expr::Record(pairs.into_iter().map(|(k, v)| (k, v.simplify())).collect())
            }
            other => other,
        }
    }

    /// Alpha-renames let-bound variables to `t0, t1, …` in binding order and
    /// renumbers holes. Two expressions are syntactically equivalent iff
    /// their canonical forms are equal.
    pub fn canonical(&self) -> Expr {
        fn go(e: &Expr, scope: &mut Vec<(Name, Name)>, counter: &mut usize) -> Expr {
            match e {
                Expr::Var(x) => match scope.iter().rev().find(|(from, _)| from == x) {
                    Some((_, to)) => Expr::Var(to.clone()),
                    None => e.clone(),
                },
                Expr::Let(x, a, b) => {
                    let a = go(a, scope, counter);
                    let fresh: Name = format!("t{counter}").into();
                    *counter += 1;
                    scope.push((x.clone(), fresh.clone()));
                    let b = go(b, scope, counter);
                    scope.pop();
                    Expr::Let(fresh, Box::new(a), Box::new(b))
                }
                Expr::Seq(a, b) => Expr::seq(go(a, scope, counter), go(b, scope, counter)),
                Expr::Call { recv, method, args } => Expr::Call {
                    recv: Box::new(go(recv, scope, counter)),
                    method: method.clone(),
                    args: args.iter().map(|a| go(a, scope, counter)).collect(),
                },
                Expr::If(c, a, b) => {
                    let c = c.map_exprs(&mut |x| go(x, scope, counter));
                    Expr::if_(c, go(a, scope, counter), go(b, scope, counter))
                }
                Expr::Record(pairs) => Expr::Record(
                    pairs
                        .iter()
                        .map(|(k, v)| (k.clone(), go(v, scope, counter)))
                        .collect(),
                ),
                _ => e.clone(),
            }
        }
        let mut out = go(self, &mut Vec::new(), &mut 0);
        out.renumber_holes();
        out
    }
}

enum ChildMut<'a> {
    Expr(&'a mut Expr),
    Cond(&'a mut Cond),
}

impl Cond {
    pub fn atom(e: Expr) -> Cond {
        Cond::Atom(e)
    }

    pub fn truth() -> Cond {
        Cond::Atom(Expr::True)
    }

    /// Negation that cancels an existing `!`.
    pub fn negate(&self) -> Cond {
        match self {
            Cond::Not(inner) => (**inner).clone(),
            other => Cond::Not(Box::new(other.clone())),
        }
    }

    pub fn or(a: Cond, b: Cond) -> Cond {
        Cond::Or(Box::new(a), Box::new(b))
    }

    pub fn size(&self) -> usize {
        match self {
            Cond::Atom(e) => e.size(),
            Cond::Not(c) => c.size(),
            Cond::Or(a, b) => a.size() + b.size(),
        }
    }

    pub fn is_complete(&self) -> bool {
        match self {
            Cond::Atom(e) => e.is_complete(),
            Cond::Not(c) => c.is_complete(),
            Cond::Or(a, b) => a.is_complete() && b.is_complete(),
        }
    }

    fn count_ifs(&self) -> usize {
        match self {
            Cond::Atom(e) => e.count_ifs(),
            Cond::Not(c) => c.count_ifs(),
            Cond::Or(a, b) => a.count_ifs() + b.count_ifs(),
        }
    }

    fn hole_count(&self) -> usize {
        match self {
            Cond::Atom(e) => e.hole_count(),
            Cond::Not(c) => c.hole_count(),
            Cond::Or(a, b) => a.hole_count() + b.hole_count(),
        }
    }

    fn let_count(&self) -> usize {
        match self {
            Cond::Atom(e) => e.let_count(),
            Cond::Not(c) => c.let_count(),
            Cond::Or(a, b) => a.let_count() + b.let_count(),
        }
    }

    pub fn for_each_expr_mut(&mut self, f: &mut dyn FnMut(&mut Expr)) {
        match self {
            Cond::Atom(e) => f(e),
            Cond::Not(c) => c.for_each_expr_mut(f),
            Cond::Or(a, b) => {
                a.for_each_expr_mut(f);
                b.for_each_expr_mut(f);
            }
        }
    }

    pub fn map_exprs(&self, f: &mut dyn FnMut(&Expr) -> Expr) -> Cond {
        match self {
            Cond::Atom(e) => Cond::Atom(f(e)),
            Cond::Not(c) => Cond::Not(Box::new(c.map_exprs(f))),
            Cond::Or(a, b) => {
                let a = a.map_exprs(f);
                Cond::Or(Box::new(a), Box::new(b.map_exprs(f)))
            }
        }
    }

    pub fn canonical(&self) -> Cond {
        self.map_exprs(&mut |e| e.canonical())
    }

    /// The condition as a plain expression, if it has no disjunction.
    pub fn to_expr(&self) -> Option<Expr> {
        match self {
            Cond::Atom(e) => Some(e.clone()),
            Cond::Not(c) => Some(Expr::call(c.to_expr()?, "!", vec![])),
            Cond::Or(..) => None,
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Expr]) -> fmt::Result {
    for a in args {
        write!(f, " {a}")?;
    }
    Ok(())
}

fn write_str_lit(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    write!(f, "\"")?;
    for ch in s.chars() {
        match ch {
            '"' => write!(f, "\\\"")?,
            '\\' => write!(f, "\\\\")?,
            '\n' => write!(f, "\\n")?,
            c => write!(f, "{c}")?,
        }
    }
    write!(f, "\"")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Nil => write!(f, "nil"),
            Expr::True => write!(f, "true"),
            Expr::False => write!(f, "false"),
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Str(s) => write_str_lit(f, s),
            Expr::Sym(s) => write!(f, ":{s}"),
            Expr::ClassLit(c) => write!(f, "{c}"),
            Expr::Var(x) => write!(f, "{x}"),
            Expr::Seq(a, b) => write!(f, "(seq {a} {b})"),
            Expr::Call { recv, method, args } => {
                write!(f, "(. {recv} {method}")?;
                write_args(f, args)?;
                write!(f, ")")
            }
            Expr::If(c, a, b) => write!(f, "(if {c} {a} {b})"),
            Expr::Let(x, a, b) => write!(f, "(let {x} {a} {b})"),
            Expr::Record(pairs) => {
                write!(f, "(rec")?;
                for (k, v) in pairs {
                    write!(f, " ({k} {v})")?;
                }
                write!(f, ")")
            }
            Expr::Hole(_, t) => write!(f, "(hole {t})"),
            Expr::EffHole(_, e) => write!(f, "(effhole {e})"),
        }
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cond::Atom(e) => write!(f, "{e}"),
            Cond::Not(c) => write!(f, "(not {c})"),
            Cond::Or(a, b) => write!(f, "(or {a} {b})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_examples() {
        assert_eq!(Expr::var("x").size(), 0);
        assert_eq!(Expr::call(Expr::var("x"), "m", vec![Expr::var("y")]).size(), 1);
        let e = Expr::let_(
            "t",
            Expr::call(Expr::var("x"), "m", vec![]),
            Expr::seq(Expr::call(Expr::var("t"), "n", vec![]), Expr::var("t")),
        );
        assert_eq!(e.size(), 2);
    }

    #[test]
    fn record_pairs_count_one_each() {
        let r = Expr::record([("a".into(), Expr::var("x")), ("b".into(), Expr::Nil)]);
        assert_eq!(r.size(), 2);
    }

    #[test]
    fn completeness_examples() {
        assert!(!Expr::hole(Type::obj()).is_complete());
        assert!(Expr::call(Expr::var("x"), "m", vec![Expr::Nil]).is_complete());
        assert!(!Expr::let_("x", Expr::var("y"), Expr::eff_hole(Effect::pure())).is_complete());
    }

    #[test]
    fn canonical_alpha_renames() {
        let a = Expr::let_("foo", Expr::Nil, Expr::var("foo"));
        let b = Expr::let_("bar", Expr::Nil, Expr::var("bar"));
        assert_ne!(a, b);
        assert_eq!(a.canonical(), b.canonical());
        let free = Expr::let_("foo", Expr::Nil, Expr::var("arg0"));
        assert_ne!(free.canonical(), a.canonical());
    }

    #[test]
    fn replace_leftmost_hole() {
        let mut e = Expr::call(Expr::hole(Type::obj()), "m", vec![Expr::hole(Type::str())]);
        e.renumber_holes();
        assert!(e.replace_hole(1, Expr::str("a")));
        assert_eq!(
            e,
            Expr::call(Expr::Hole(0, Type::obj()), "m", vec![Expr::str("a")])
        );
        assert!(!e.replace_hole(7, Expr::Nil));
    }

    #[test]
    fn simplify_drops_nil_statements() {
        let e = Expr::let_(
            "t0",
            Expr::var("a"),
            Expr::seq(Expr::Nil, Expr::var("t0")),
        );
        assert_eq!(e.simplify(), Expr::var("a"));
    }
}
