//! Big-step evaluation of expressions and specs.
//!
//! Postconditions are evaluated with effect accounting: every library call
//! made while evaluating an assertion contributes its resolved effect pair,
//! a passing assertion discards what was collected, and a failing one
//! reports it.

use std::fmt;

use crate::lang::{ClassTable, Cond, DefinitionError, EffectPair, Expr, Name, INDEX};
use crate::world::{RuntimeError, Value, World};

/// Variable holding the goal's return value inside postconditions.
pub const RESULT_VAR: &str = "xr";

/// Formal parameter names `arg0 … argN-1`.
pub fn goal_params(arity: usize) -> Vec<Name> {
    (0..arity).map(|i| format!("arg{i}").into()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetupStmt {
    Eval(Expr),
    /// Binds a global such as `@post`.
    Assign(Name, Expr),
    /// Calls the goal method; its result is bound to [`RESULT_VAR`].
    CallGoal(Vec<Expr>),
}

/// A unit test: setup statements ending with the goal call, then assertions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spec {
    pub title: String,
    pub setup: Vec<SetupStmt>,
    pub post: Vec<Expr>,
}

impl Spec {
    pub fn validate(&self, arity: usize) -> Result<(), DefinitionError> {
        let calls: Vec<_> = self
            .setup
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match s {
                SetupStmt::CallGoal(args) => Some((i, args.len())),
                _ => None,
            })
            .collect();
        let bad = |why: &str| Err(DefinitionError::Invalid(format!("spec \"{}\": {why}", self.title)));
        match calls.as_slice() {
            [(i, n)] if *i + 1 == self.setup.len() => {
                if *n != arity {
                    return bad(&format!("goal call has {n} argument(s), expected {arity}"));
                }
            }
            [_] => return bad("goal call must be the last setup statement"),
            _ => return bad("setup must contain exactly one goal call"),
        }
        if self.post.is_empty() {
            return bad("postcondition has no assertions");
        }
        Ok(())
    }

    pub fn goal_args(&self) -> &[Expr] {
        self.setup
            .iter()
            .find_map(|s| match s {
                SetupStmt::CallGoal(args) => Some(args.as_slice()),
                _ => None,
            })
            .unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Ok(Value),
    AssertErr(EffectPair),
    RuntimeErr(RuntimeError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecResult {
    pub passed: usize,
    pub outcome: Outcome,
}

impl SpecResult {
    pub fn is_ok(&self) -> bool {
        matches!(self.outcome, Outcome::Ok(_))
    }
}

impl fmt::Display for SpecResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.outcome {
            Outcome::Ok(v) => write!(f, "pass ({} asserts) => {v}", self.passed),
            Outcome::AssertErr(eff) => write!(f, "assert failed after {} passed, effects {eff}", self.passed),
            Outcome::RuntimeErr(e) => write!(f, "runtime error after {} passed: {e}", self.passed),
        }
    }
}

struct Machine<'a> {
    ct: &'a ClassTable,
    world: &'a mut World,
    acc: EffectPair,
}

impl Machine<'_> {
    fn lookup(&self, env: &[(Name, Value)], x: &Name) -> Result<Value, RuntimeError> {
        env.iter()
            .rev()
            .find(|(n, _)| n == x)
            .map(|(_, v)| v.clone())
            .or_else(|| self.world.globals.get(x).cloned())
            .ok_or_else(|| RuntimeError::UnboundVar(x.clone()))
    }

    fn eval_cond(&mut self, env: &mut Vec<(Name, Value)>, c: &Cond) -> Result<bool, RuntimeError> {
        Ok(match c {
            Cond::Atom(e) => self.eval(env, e)?.truthy(),
            Cond::Not(c) => !self.eval_cond(env, c)?,
            Cond::Or(a, b) => self.eval_cond(env, a)? || self.eval_cond(env, b)?,
        })
    }

    fn eval(&mut self, env: &mut Vec<(Name, Value)>, e: &Expr) -> Result<Value, RuntimeError> {
        match e {
            Expr::Nil => Ok(Value::Nil),
            Expr::True => Ok(Value::Bool(true)),
            Expr::False => Ok(Value::Bool(false)),
            Expr::Int(n) => Ok(Value::Int(*n)),
            Expr::Str(s) => Ok(Value::Str(s.clone())),
            Expr::Sym(s) => Ok(Value::Sym(s.clone())),
            Expr::ClassLit(c) => Ok(Value::Class(c.clone())),
            Expr::Var(x) => self.lookup(env, x),
            Expr::Seq(a, b) => {
                self.eval(env, a)?;
                self.eval(env, b)
            }
            Expr::Let(x, bound, body) => {
                let v = self.eval(env, bound)?;
                env.push((x.clone(), v));
                let out = self.eval(env, body);
                env.pop();
                out
            }
            Expr::If(c, a, b) => {
                if self.eval_cond(env, c)? {
                    self.eval(env, a)
                } else {
                    self.eval(env, b)
                }
            }
            Expr::Record(pairs) => {
                let mut out = std::collections::BTreeMap::new();
                for (k, v) in pairs {
                    out.insert(k.clone(), self.eval(env, v)?);
                }
                Ok(Value::Record(out))
            }
            Expr::Call { recv, method, args } => {
                let recv = self.eval(env, recv)?;
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(env, a)?);
                }
                self.call(recv, method, vals)
            }
            Expr::Hole(..) | Expr::EffHole(..) => Err(RuntimeError::Definition(
                DefinitionError::Invalid(format!("cannot evaluate hole {e}")),
            )),
        }
    }

    fn call(&mut self, recv: Value, method: &Name, args: Vec<Value>) -> Result<Value, RuntimeError> {
        if let Value::Record(fields) = &recv {
            if &**method == INDEX {
                return match args.as_slice() {
                    [Value::Sym(k)] => Ok(fields.get(k).cloned().unwrap_or(Value::Nil)),
                    _ => Err(RuntimeError::BadArgument(method.clone(), "expected one symbol key".into())),
                };
            }
            return Err(RuntimeError::MethodMissing("record".into(), method.clone()));
        }
        if recv == Value::Nil {
            return Err(RuntimeError::NilMethodMissing(method.clone()));
        }
        let owner = recv.dispatch_type().expect("non-record values have a dispatch type");
        let sig = self
            .ct
            .lookup_method(&owner, method)
            .map_err(|_| RuntimeError::MethodMissing(owner.to_string(), method.clone()))?;
        if sig.params.len() != args.len() {
            return Err(RuntimeError::Arity {
                method: method.clone(),
                expected: sig.params.len(),
                got: args.len(),
            });
        }
        let eff = sig.eff.resolve_self(&recv.self_class(), self.ct);
        self.acc = self.acc.union(&eff, self.ct);
        self.world.invoke_native(sig, &recv, &args)
    }
}

/// Evaluates a complete expression. Variables not in `env` are looked up
/// among the world's globals.
pub fn eval_expr(
    env: &[(Name, Value)],
    world: &mut World,
    ct: &ClassTable,
    e: &Expr,
) -> Result<Value, RuntimeError> {
    let mut m = Machine {
        ct,
        world,
        acc: EffectPair::pure(),
    };
    m.eval(&mut env.to_vec(), e)
}

/// Runs the setup on a fresh world and returns the goal's result.
pub fn run_setup(
    body: &Expr,
    params: &[Name],
    spec: &Spec,
    world: &mut World,
    ct: &ClassTable,
) -> Result<Value, RuntimeError> {
    world.reset();
    let mut m = Machine {
        ct,
        world,
        acc: EffectPair::pure(),
    };
    let mut result = Value::Nil;
    for stmt in &spec.setup {
        match stmt {
            SetupStmt::Eval(e) => {
                m.eval(&mut Vec::new(), e)?;
            }
            SetupStmt::Assign(x, e) => {
                let v = m.eval(&mut Vec::new(), e)?;
                m.world.globals.insert(x.clone(), v);
            }
            SetupStmt::CallGoal(args) => {
                if args.len() != params.len() {
                    return Err(RuntimeError::Arity {
                        method: "goal".into(),
                        expected: params.len(),
                        got: args.len(),
                    });
                }
                let mut env = Vec::with_capacity(args.len());
                for (p, a) in params.iter().zip(args) {
                    env.push((p.clone(), m.eval(&mut Vec::new(), a)?));
                }
                result = m.eval(&mut env, body)?;
            }
        }
    }
    Ok(result)
}

/// Resets the world, runs the setup (calling `body` as the goal), then
/// evaluates the postcondition with assertion counting and effect
/// accounting.
pub fn run_spec(
    body: &Expr,
    params: &[Name],
    spec: &Spec,
    world: &mut World,
    ct: &ClassTable,
) -> SpecResult {
    let result = match run_setup(body, params, spec, world, ct) {
        Ok(v) => v,
        Err(e) => {
            return SpecResult {
                passed: 0,
                outcome: Outcome::RuntimeErr(e),
            }
        }
    };
    let mut m = Machine {
        ct,
        world,
        acc: EffectPair::pure(),
    };
    let mut env = vec![(Name::from(RESULT_VAR), result.clone())];
    let mut passed = 0;
    for assertion in &spec.post {
        m.acc = EffectPair::pure();
        match m.eval(&mut env, assertion) {
            Ok(v) if v.truthy() => passed += 1,
            Ok(_) => {
                return SpecResult {
                    passed,
                    outcome: Outcome::AssertErr(m.acc),
                }
            }
            Err(e) => {
                return SpecResult {
                    passed,
                    outcome: Outcome::RuntimeErr(e),
                }
            }
        }
    }
    SpecResult {
        passed,
        outcome: Outcome::Ok(result),
    }
}
