//! S-expression surface syntax for class tables, schemas, goals and
//! programs.

use std::collections::BTreeMap;
use std::fmt;

use effsyn::driver::{Goal, Program};
use effsyn::interp::{SetupStmt, Spec};
use effsyn::lang::{
    literal_type, ClassTable, Cond, ConstantPool, DefinitionError, Effect, EffectAtom, EffectPair, Expr, Field,
    MethodSig, Name, Type,
};
use effsyn::world::{install_schema, SchemaDecl, World};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {msg}")]
pub struct ParseError {
    pub pos: Pos,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("parse error at {0}")]
    Parse(ParseError),
    #[error("definition error: {0}")]
    Definition(DefinitionError),
}

// Not `#[from]`: that would also make the inner error the `source`, and
// error chains would print its message twice.
impl From<ParseError> for DslError {
    fn from(e: ParseError) -> DslError {
        DslError::Parse(e)
    }
}

impl From<DefinitionError> for DslError {
    fn from(e: DefinitionError) -> DslError {
        DslError::Definition(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexp {
    Atom(String, Pos),
    Str(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::Str(_, p) | Sexp::List(_, p) => *p,
        }
    }

    fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a, _) => Some(a),
            _ => None,
        }
    }

    /// Head symbol and arguments of a list form.
    fn form(&self) -> Option<(&str, &[Sexp])> {
        match self {
            Sexp::List(items, _) => match items.split_first() {
                Some((Sexp::Atom(h, _), rest)) => Some((h, rest)),
                _ => None,
            },
            _ => None,
        }
    }
}

fn fail<T>(at: &Sexp, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        pos: at.pos(),
        msg: msg.into(),
    })
}

/// Reads every top-level s-expression. `;` starts a line comment.
pub fn read_all(text: &str) -> Result<Vec<Sexp>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let (mut line, mut col) = (1, 1);
    let mut stack: Vec<(Vec<Sexp>, Pos)> = vec![(Vec::new(), Pos { line: 1, col: 1 })];
    let advance = |c: char, line: &mut usize, col: &mut usize| {
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        match c {
            _ if c.is_whitespace() => {
                advance(c, &mut line, &mut col);
                i += 1;
            }
            ';' => {
                while i < chars.len() && chars[i] != '\n' {
                    advance(chars[i], &mut line, &mut col);
                    i += 1;
                }
            }
            '(' => {
                stack.push((Vec::new(), pos));
                advance(c, &mut line, &mut col);
                i += 1;
            }
            ')' => {
                if stack.len() == 1 {
                    return Err(ParseError {
                        pos,
                        msg: "unbalanced `)`".into(),
                    });
                }
                let (items, start) = stack.pop().unwrap();
                stack.last_mut().unwrap().0.push(Sexp::List(items, start));
                advance(c, &mut line, &mut col);
                i += 1;
            }
            '"' => {
                advance(c, &mut line, &mut col);
                i += 1;
                let mut s = String::new();
                loop {
                    let Some(&ch) = chars.get(i) else {
                        return Err(ParseError {
                            pos,
                            msg: "unterminated string".into(),
                        });
                    };
                    advance(ch, &mut line, &mut col);
                    i += 1;
                    match ch {
                        '"' => break,
                        '\\' => {
                            let Some(&esc) = chars.get(i) else { continue };
                            advance(esc, &mut line, &mut col);
                            i += 1;
                            s.push(match esc {
                                'n' => '\n',
                                't' => '\t',
                                other => other,
                            });
                        }
                        other => s.push(other),
                    }
                }
                stack.last_mut().unwrap().0.push(Sexp::Str(s, pos));
            }
            _ => {
                let mut s = String::new();
                while i < chars.len() && !chars[i].is_whitespace() && !"()\";".contains(chars[i]) {
                    s.push(chars[i]);
                    advance(chars[i], &mut line, &mut col);
                    i += 1;
                }
                stack.last_mut().unwrap().0.push(Sexp::Atom(s, pos));
            }
        }
    }
    if stack.len() > 1 {
        let (_, start) = stack.pop().unwrap();
        return Err(ParseError {
            pos: start,
            msg: "unclosed `(`".into(),
        });
    }
    Ok(stack.pop().unwrap().0)
}

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_alphanumeric() || "_<>@?!=[]-+*/".contains(c))
}

fn class_name(s: &Sexp) -> Result<Name, ParseError> {
    match s.atom() {
        Some(a) if a.starts_with(char::is_uppercase) && is_ident(a) => Ok(a.into()),
        _ => fail(s, "expected a class name"),
    }
}

fn name(s: &Sexp) -> Result<Name, ParseError> {
    match s.atom() {
        Some(a) if is_ident(a) => Ok(a.into()),
        _ => fail(s, "expected a name"),
    }
}

fn string(s: &Sexp) -> Result<String, ParseError> {
    match s {
        Sexp::Str(v, _) => Ok(v.clone()),
        _ => fail(s, "expected a string literal"),
    }
}

fn arity(s: &Sexp, args: &[Sexp], n: usize) -> Result<(), ParseError> {
    if args.len() == n {
        Ok(())
    } else {
        fail(s, format!("expected {n} argument(s), found {}", args.len()))
    }
}

pub fn parse_type(s: &Sexp) -> Result<Type, ParseError> {
    if let Some(a) = s.atom() {
        return class_name(s).map(Type::Class).map_err(|_| ParseError {
            pos: s.pos(),
            msg: format!("bad type `{a}`"),
        });
    }
    let Some((head, args)) = s.form() else {
        return fail(s, "expected a type");
    };
    match head {
        "class-of" => {
            arity(s, args, 1)?;
            Ok(Type::ClassOf(class_name(&args[0])?))
        }
        "union" => Ok(Type::union(args.iter().map(parse_type).collect::<Result<Vec<_>, _>>()?)),
        "rec" => {
            let mut fields = BTreeMap::new();
            for f in args {
                let Sexp::List(items, _) = f else {
                    return fail(f, "expected (key type)");
                };
                let (key, ty) = match items.as_slice() {
                    [k, Sexp::Atom(q, _), t] if q == "?" => (k, Field { optional: true, ty: parse_type(t)? }),
                    [k, Sexp::Atom(t, p)] if t.starts_with('?') => {
                        let inner = Sexp::Atom(t[1..].to_string(), *p);
                        (k, Field { optional: true, ty: parse_type(&inner)? })
                    }
                    [k, t] => (k, Field { optional: false, ty: parse_type(t)? }),
                    _ => return fail(f, "expected (key type)"),
                };
                if fields.insert(name(key)?, ty).is_some() {
                    return fail(key, "duplicate record key");
                }
            }
            Ok(Type::Record(fields))
        }
        other => fail(s, format!("unknown type form `{other}`")),
    }
}

fn parse_effect_atom(s: &Sexp) -> Result<EffectAtom, ParseError> {
    let Some(a) = s.atom() else {
        return fail(s, "expected an effect");
    };
    let region = |r: &str| -> Result<Name, ParseError> {
        if is_ident(r) && !r.contains('.') {
            Ok(r.into())
        } else {
            fail(s, format!("bad effect region in `{a}`"))
        }
    };
    match a.split_once('.') {
        None if a == "*" => Ok(EffectAtom::Star),
        None if a == "self" => Ok(EffectAtom::SelfStar),
        None => Ok(EffectAtom::ClassStar(class_name(s)?)),
        Some(("self", r)) => Ok(EffectAtom::SelfRegion(region(r)?)),
        Some((c, r)) => {
            let class = class_name(&Sexp::Atom(c.to_string(), s.pos()))?;
            Ok(EffectAtom::Region(class, region(r)?))
        }
    }
}

pub fn parse_effect(s: &Sexp) -> Result<Effect, ParseError> {
    if s.atom() == Some("pure") {
        return Ok(Effect::pure());
    }
    if let Some(("u", args)) = s.form() {
        let mut atoms = Vec::new();
        for a in args {
            atoms.extend(parse_effect(a)?.atoms().cloned());
        }
        return Ok(Effect::canonical(atoms, &effsyn::lang::Flat));
    }
    Ok(Effect::canonical([parse_effect_atom(s)?], &effsyn::lang::Flat))
}

pub fn parse_expr(s: &Sexp) -> Result<Expr, ParseError> {
    match s {
        Sexp::Str(v, _) => Ok(Expr::str(v)),
        Sexp::Atom(a, _) => match a.as_str() {
            "nil" => Ok(Expr::Nil),
            "true" => Ok(Expr::True),
            "false" => Ok(Expr::False),
            _ if a.starts_with(':') && is_ident(&a[1..]) => Ok(Expr::sym(&a[1..])),
            _ if a.parse::<i64>().is_ok() => Ok(Expr::Int(a.parse().unwrap())),
            _ if a.starts_with(char::is_uppercase) => Ok(Expr::ClassLit(class_name(s)?)),
            _ if is_ident(a) => Ok(Expr::var(a)),
            _ => fail(s, format!("bad expression `{a}`")),
        },
        Sexp::List(..) => {
            let Some((head, args)) = s.form() else {
                return fail(s, "expected an expression form");
            };
            match head {
                "seq" => {
                    arity(s, args, 2)?;
                    Ok(Expr::seq(parse_expr(&args[0])?, parse_expr(&args[1])?))
                }
                "let" => {
                    arity(s, args, 3)?;
                    Ok(Expr::let_(&name(&args[0])?, parse_expr(&args[1])?, parse_expr(&args[2])?))
                }
                "if" => {
                    arity(s, args, 3)?;
                    Ok(Expr::if_(parse_cond(&args[0])?, parse_expr(&args[1])?, parse_expr(&args[2])?))
                }
                "." => {
                    if args.len() < 2 {
                        return fail(s, "method call needs a receiver and a method name");
                    }
                    let recv = parse_expr(&args[0])?;
                    let method = name(&args[1])?;
                    let rest = args[2..].iter().map(parse_expr).collect::<Result<Vec<_>, _>>()?;
                    Ok(Expr::call(recv, &method, rest))
                }
                "rec" => {
                    let mut pairs = BTreeMap::new();
                    for p in args {
                        let Sexp::List(items, _) = p else {
                            return fail(p, "expected (key value)");
                        };
                        let [k, v] = items.as_slice() else {
                            return fail(p, "expected (key value)");
                        };
                        if pairs.insert(name(k)?, parse_expr(v)?).is_some() {
                            return fail(k, "duplicate record key");
                        }
                    }
                    Ok(Expr::Record(pairs))
                }
                "hole" => {
                    arity(s, args, 1)?;
                    Ok(Expr::hole(parse_type(&args[0])?))
                }
                "effhole" => {
                    arity(s, args, 1)?;
                    Ok(Expr::eff_hole(parse_effect(&args[0])?))
                }
                other => fail(s, format!("unknown expression form `{other}`")),
            }
        }
    }
}

pub fn parse_cond(s: &Sexp) -> Result<Cond, ParseError> {
    match s.form() {
        Some(("not", args)) => {
            arity(s, args, 1)?;
            Ok(Cond::Not(Box::new(parse_cond(&args[0])?)))
        }
        Some(("or", args)) => {
            arity(s, args, 2)?;
            Ok(Cond::or(parse_cond(&args[0])?, parse_cond(&args[1])?))
        }
        _ => Ok(Cond::atom(parse_expr(s)?)),
    }
}

fn parse_body(s: &Sexp) -> Result<Expr, ParseError> {
    let mut e = parse_expr(s)?;
    e.renumber_holes();
    Ok(e)
}

/// A goal as written in a file; constants are literals.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalDecl {
    pub name: Name,
    pub params: Vec<Type>,
    pub ret: Type,
    pub consts: Vec<Expr>,
    pub specs: Vec<Spec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalFile {
    pub classes: Vec<(Name, Name)>,
    pub schemas: Vec<SchemaDecl>,
    pub sigs: Vec<MethodSig>,
    pub constants: Vec<(Expr, Type)>,
    pub goal: GoalDecl,
}

/// A goal file resolved into a class table, initial world and goal.
pub struct Resolved {
    pub ct: ClassTable,
    pub world: World,
    pub goal: Goal,
}

fn parse_method(s: &Sexp, args: &[Sexp]) -> Result<MethodSig, ParseError> {
    if args.len() < 4 {
        return fail(s, "method needs owner, name, params and return type");
    }
    let owner = parse_type(&args[0])?;
    if !matches!(owner, Type::Class(_) | Type::ClassOf(_)) {
        return fail(&args[0], "method owner must be a class or (class-of C)");
    }
    let mname = name(&args[1])?;
    let params = match args[2].form() {
        Some(("params", ps)) => ps.iter().map(parse_type).collect::<Result<Vec<_>, _>>()?,
        _ => return fail(&args[2], "expected (params ...)"),
    };
    let ret = parse_type(&args[3])?;
    let (mut read, mut write, mut native) = (Effect::pure(), Effect::pure(), None);
    for opt in &args[4..] {
        match opt.form() {
            Some(("read", [e])) => read = parse_effect(e)?,
            Some(("write", [e])) => write = parse_effect(e)?,
            Some(("native", [id])) => native = Some(string(id)?),
            _ => return fail(opt, "expected (read ε), (write ε) or (native \"id\")"),
        }
    }
    let sig = MethodSig::new(owner, &mname, params, ret, EffectPair::new(read, write));
    Ok(match native {
        Some(id) => sig.with_native(&id),
        None => sig,
    })
}

fn parse_spec(s: &Sexp, args: &[Sexp]) -> Result<Spec, ParseError> {
    let [title, setup, post] = args else {
        return fail(s, "expected (spec \"title\" (setup ...) (post ...))");
    };
    let title = string(title)?;
    let Some(("setup", stmts)) = setup.form() else {
        return fail(setup, "expected (setup ...)");
    };
    let mut setup_out = Vec::new();
    for st in stmts {
        match st.form() {
            Some(("set", [x, e])) => {
                let var = name(x)?;
                if !var.starts_with('@') {
                    return fail(x, "globals set in a setup start with `@`");
                }
                setup_out.push(SetupStmt::Assign(var, parse_expr(e)?));
            }
            Some(("call!", goal_args)) => {
                setup_out.push(SetupStmt::CallGoal(goal_args.iter().map(parse_expr).collect::<Result<_, _>>()?))
            }
            _ => setup_out.push(SetupStmt::Eval(parse_expr(st)?)),
        }
    }
    let Some(("post", asserts)) = post.form() else {
        return fail(post, "expected (post ...)");
    };
    let mut post_out = Vec::new();
    for a in asserts {
        match a.form() {
            Some(("assert", [e])) => post_out.push(parse_expr(e)?),
            _ => return fail(a, "expected (assert e)"),
        }
    }
    Ok(Spec {
        title,
        setup: setup_out,
        post: post_out,
    })
}

fn parse_goal(s: &Sexp, args: &[Sexp]) -> Result<GoalDecl, ParseError> {
    let Some((gname, rest)) = args.split_first() else {
        return fail(s, "goal needs a name");
    };
    let gname = name(gname)?;
    let (mut sig, mut consts, mut specs) = (None, Vec::new(), Vec::new());
    for part in rest {
        match part.form() {
            Some(("sig", [arrow])) => {
                let Sexp::List(items, _) = arrow else {
                    return fail(arrow, "expected (τ... -> τ)");
                };
                let Some(k) = items.iter().position(|x| x.atom() == Some("->")) else {
                    return fail(arrow, "missing `->`");
                };
                if k + 2 != items.len() {
                    return fail(arrow, "expected exactly one return type after `->`");
                }
                let params = items[..k].iter().map(parse_type).collect::<Result<Vec<_>, _>>()?;
                sig = Some((params, parse_type(&items[k + 1])?));
            }
            Some(("consts", lits)) => {
                for l in lits {
                    let e = parse_expr(l)?;
                    if literal_type(&e).is_none() {
                        return fail(l, "constants must be literals");
                    }
                    consts.push(e);
                }
            }
            Some(("spec", sargs)) => specs.push(parse_spec(part, sargs)?),
            _ => return fail(part, "expected (sig ...), (consts ...) or (spec ...)"),
        }
    }
    let Some((params, ret)) = sig else {
        return fail(s, "goal needs a (sig ...)");
    };
    Ok(GoalDecl {
        name: gname,
        params,
        ret,
        consts,
        specs,
    })
}

pub fn parse_goal_file(text: &str) -> Result<GoalFile, ParseError> {
    let forms = read_all(text)?;
    let mut classes = Vec::new();
    let mut schemas = Vec::new();
    let mut sigs = Vec::new();
    let mut constants = Vec::new();
    let mut goal = None;
    for f in &forms {
        let Some((head, args)) = f.form() else {
            return fail(f, "expected a top-level declaration");
        };
        match head {
            "class" => {
                let (cname, parent) = match args {
                    [c] => (class_name(c)?, Name::from("Obj")),
                    [c, p] => match p.form() {
                        Some(("parent", [pn])) => (class_name(c)?, class_name(pn)?),
                        _ => return fail(p, "expected (parent B)"),
                    },
                    _ => return fail(f, "expected (class A (parent B))"),
                };
                classes.push((cname, parent));
            }
            "schema" => {
                let Some((cname, cols)) = args.split_first() else {
                    return fail(f, "schema needs a class name");
                };
                let mut columns = Vec::new();
                for c in cols {
                    let Sexp::List(items, _) = c else {
                        return fail(c, "expected (column type)");
                    };
                    let [col, ty] = items.as_slice() else {
                        return fail(c, "expected (column type)");
                    };
                    columns.push((name(col)?, parse_type(ty)?));
                }
                schemas.push(SchemaDecl {
                    class: class_name(cname)?,
                    columns,
                });
            }
            "method" => sigs.push(parse_method(f, args)?),
            "constants" => {
                for c in args {
                    let Sexp::List(items, _) = c else {
                        return fail(c, "expected (literal type)");
                    };
                    let [lit, ty] = items.as_slice() else {
                        return fail(c, "expected (literal type)");
                    };
                    let e = parse_expr(lit)?;
                    if literal_type(&e).is_none() {
                        return fail(lit, "constants must be literals");
                    }
                    constants.push((e, parse_type(ty)?));
                }
            }
            "goal" => {
                if goal.is_some() {
                    return fail(f, "only one goal per file");
                }
                goal = Some(parse_goal(f, args)?);
            }
            other => return fail(f, format!("unknown declaration `{other}`")),
        }
    }
    let Some(goal) = goal else {
        return Err(ParseError {
            pos: Pos { line: 1, col: 1 },
            msg: "file declares no goal".into(),
        });
    };
    Ok(GoalFile {
        classes,
        schemas,
        sigs,
        constants,
        goal,
    })
}

impl GoalFile {
    /// Builds the class table, world and goal, checking that every name
    /// resolves.
    pub fn resolve(&self) -> Result<Resolved, DefinitionError> {
        let mut ct = ClassTable::new();
        for (c, p) in &self.classes {
            ct.add_class(c, p)?;
        }
        for s in &self.schemas {
            install_schema(&mut ct, s)?;
        }
        for sig in &self.sigs {
            ct.add_method(sig.clone())?;
        }
        let mut consts = ConstantPool::new();
        for (lit, ty) in &self.constants {
            ct.check_type(ty)?;
            consts.push(lit.clone(), ty.clone(), &ct)?;
        }
        for lit in &self.goal.consts {
            let ty = literal_type(lit).expect("checked while parsing");
            ct.check_type(&ty)?;
            consts.push(lit.clone(), ty, &ct)?;
        }
        for t in self.goal.params.iter().chain([&self.goal.ret]) {
            ct.check_type(t)?;
        }
        let goal = Goal {
            name: self.goal.name.clone(),
            params: self.goal.params.clone(),
            ret: self.goal.ret.clone(),
            consts,
            specs: self.goal.specs.clone(),
        };
        goal.validate()?;
        Ok(Resolved {
            ct,
            world: World::new(self.schemas.iter().cloned()),
            goal,
        })
    }
}

pub fn load_goal(text: &str) -> Result<(GoalFile, Resolved), DslError> {
    let file = parse_goal_file(text)?;
    let resolved = file.resolve()?;
    Ok((file, resolved))
}

fn write_str(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    write!(f, "{}", Expr::str(s))
}

impl fmt::Display for GoalFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (c, p) in &self.classes {
            writeln!(f, "(class {c} (parent {p}))")?;
        }
        for s in &self.schemas {
            write!(f, "(schema {}", s.class)?;
            for (c, t) in &s.columns {
                write!(f, " ({c} {t})")?;
            }
            writeln!(f, ")")?;
        }
        for sig in &self.sigs {
            writeln!(f, "{sig}")?;
        }
        if !self.constants.is_empty() {
            write!(f, "(constants")?;
            for (lit, ty) in &self.constants {
                write!(f, " ({lit} {ty})")?;
            }
            writeln!(f, ")")?;
        }
        let g = &self.goal;
        write!(f, "(goal {}\n  (sig (", g.name)?;
        for p in &g.params {
            write!(f, "{p} ")?;
        }
        write!(f, "-> {}))", g.ret)?;
        if !g.consts.is_empty() {
            write!(f, "\n  (consts")?;
            for c in &g.consts {
                write!(f, " {c}")?;
            }
            write!(f, ")")?;
        }
        for s in &g.specs {
            write!(f, "\n  (spec ")?;
            write_str(f, &s.title)?;
            write!(f, "\n    (setup")?;
            for st in &s.setup {
                match st {
                    SetupStmt::Eval(e) => write!(f, "\n      {e}")?,
                    SetupStmt::Assign(x, e) => write!(f, "\n      (set {x} {e})")?,
                    SetupStmt::CallGoal(args) => {
                        write!(f, "\n      (call!")?;
                        for a in args {
                            write!(f, " {a}")?;
                        }
                        write!(f, ")")?;
                    }
                }
            }
            write!(f, ")\n    (post")?;
            for a in &s.post {
                write!(f, "\n      (assert {a})")?;
            }
            write!(f, "))")?;
        }
        writeln!(f, ")")
    }
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let forms = read_all(text)?;
    let [form] = forms.as_slice() else {
        return Err(ParseError {
            pos: forms.get(1).map_or(Pos { line: 1, col: 1 }, Sexp::pos),
            msg: "expected exactly one (def ...) form".into(),
        });
    };
    let Some(("def", [pname, Sexp::List(params, _), body])) = form.form() else {
        return fail(form, "expected (def name (params...) body)");
    };
    Ok(Program {
        name: name(pname)?,
        params: params.iter().map(name).collect::<Result<_, _>>()?,
        body: parse_body(body)?,
    })
}
