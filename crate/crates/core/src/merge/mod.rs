//! Merging per-spec solutions into one branching program.
//!
//! A [`MergeTuple`] `⟨e, b, Ψ⟩` says that `if b then e` satisfies the specs
//! in Ψ. A [`MergeTerm`] is an ordered chain of tuples read as an
//! if/else-if cascade; rewrite rules shrink or sharpen the chain.

mod implies;

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::interp::{run_setup, run_spec, Spec};
use crate::lang::{ClassTable, Cond, ConstantPool, Expr, Name, Type};
use crate::search::{Budget, Oracle, Problem, SearchConfig, SearchStats, Searcher, StopReason, Verdict};
use crate::typegen::{ExpandOptions, TypeEnv};
use crate::world::World;

pub use implies::{encode, implies, implies_with, is_valid, AtomTable, Prop, Strategy, TRUTH_TABLE_LIMIT};

pub type SpecSet = BTreeSet<usize>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeTuple {
    pub expr: Expr,
    pub cond: Cond,
    pub specs: SpecSet,
}

impl MergeTuple {
    pub fn new(expr: Expr, cond: Cond, specs: impl IntoIterator<Item = usize>) -> MergeTuple {
        MergeTuple {
            expr,
            cond,
            specs: specs.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeTerm {
    pub tuples: Vec<MergeTuple>,
}

fn same_expr(a: &Expr, b: &Expr) -> bool {
    a.canonical() == b.canonical()
}

fn same_cond(a: &Cond, b: &Cond) -> bool {
    a.canonical() == b.canonical()
}

impl MergeTerm {
    pub fn new(tuples: Vec<MergeTuple>) -> MergeTerm {
        assert!(!tuples.is_empty(), "merge terms are non-empty");
        MergeTerm { tuples }
    }

    pub fn specs(&self) -> SpecSet {
        self.tuples.iter().flat_map(|t| t.specs.iter().copied()).collect()
    }

    /// The if/else-if cascade with a trailing `nil`, unsimplified.
    pub fn chain(&self) -> Expr {
        self.tuples
            .iter()
            .rev()
            .fold(Expr::Nil, |rest, t| Expr::if_(t.cond.clone(), t.expr.clone(), rest))
    }

    /// The cascade after dropping branches behind a valid condition and
    /// folding `if b then x else if !b then y` into `if b then x else y`.
    pub fn prog(&self) -> Expr {
        normalize(self.chain())
    }
}

fn is_true_cond(c: &Cond) -> bool {
    matches!(c, Cond::Atom(Expr::True)) || is_valid(c)
}

fn normalize(e: Expr) -> Expr {
    match e {
        Expr::If(c, a, b) => {
            if is_true_cond(&c) {
                return *a;
            }
            let b = normalize(*b);
            let b = match b {
                Expr::If(c2, a2, _) if same_cond(&c2, &c.negate()) => *a2,
                other => other,
            };
            Expr::If(c, a, Box::new(b))
        }
        other => other,
    }
}

/// Which rewrite fired on an adjacent pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// Equal expressions, one condition implies the other: keep it.
    Absorb,
    /// Equal expressions, independent conditions: disjoin them.
    Disjoin,
    /// Different expressions, one condition implies the other: synthesize
    /// separating conditions.
    Resynthesize,
    /// `if b then true else if !b then false` becomes `b`.
    BoolTrueFirst,
    /// `if b then false else if !b then true` becomes `!b`.
    BoolFalseFirst,
    /// The second condition becomes the negation of the first.
    NegateFirst,
    /// The first condition becomes the negation of the second.
    NegateSecond,
}

/// Everything needed to evaluate candidates and synthesize conditions.
pub struct MergeContext<'a> {
    pub params: Vec<Name>,
    pub param_types: Vec<Type>,
    pub ct: &'a ClassTable,
    pub consts: &'a ConstantPool,
    pub specs: &'a [Spec],
    pub world: World,
    pub cfg: &'a SearchConfig,
    pub budget: &'a mut Budget,
    pub stats: SearchStats,
    pub permutations_tried: usize,
    found: Vec<Cond>,
    cache: HashMap<(Vec<usize>, Vec<usize>), Option<Cond>>,
    /// Tuple pairs on which condition resynthesis was already attempted.
    resynth_marks: HashSet<(Expr, Expr, Vec<usize>, Vec<usize>)>,
    pub stopped: Option<StopReason>,
}

struct CondOracle<'c> {
    params: &'c [Name],
    reqs: Vec<(&'c Spec, bool)>,
    world: &'c mut World,
    ct: &'c ClassTable,
}

impl Oracle for CondOracle<'_> {
    fn check(&mut self, cand: &Expr) -> Verdict {
        let mut passed = 0;
        for (spec, want) in &self.reqs {
            if let Ok(v) = run_setup(cand, self.params, spec, self.world, self.ct) {
                if v.truthy() == *want {
                    passed += 1;
                }
            }
        }
        if passed == self.reqs.len() {
            Verdict::Pass
        } else {
            Verdict::Fail { passed, effects: None }
        }
    }
}

impl<'a> MergeContext<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: Vec<Name>,
        param_types: Vec<Type>,
        ct: &'a ClassTable,
        consts: &'a ConstantPool,
        specs: &'a [Spec],
        world: World,
        cfg: &'a SearchConfig,
        budget: &'a mut Budget,
    ) -> Self {
        MergeContext {
            params,
            param_types,
            ct,
            consts,
            specs,
            world,
            cfg,
            budget,
            stats: SearchStats::default(),
            permutations_tried: 0,
            found: Vec::new(),
            cache: HashMap::new(),
            resynth_marks: HashSet::new(),
            stopped: None,
        }
    }

    /// Truth value of `c` under the setup of spec `i`; `None` on a runtime
    /// error.
    pub fn eval_cond(&mut self, c: &Cond, i: usize) -> Option<bool> {
        match c {
            Cond::Atom(e) => run_setup(e, &self.params, &self.specs[i], &mut self.world, self.ct)
                .ok()
                .map(|v| v.truthy()),
            Cond::Not(c) => self.eval_cond(c, i).map(|b| !b),
            Cond::Or(a, b) => match self.eval_cond(a, i)? {
                true => Some(true),
                false => self.eval_cond(b, i),
            },
        }
    }

    fn cond_holds(&mut self, c: &Cond, on: &[usize], want: bool) -> bool {
        on.iter().all(|&i| self.eval_cond(c, i) == Some(want))
    }

    /// Whether `body` passes every spec in `on`.
    pub fn passes(&mut self, body: &Expr, on: impl IntoIterator<Item = usize>) -> bool {
        on.into_iter()
            .all(|i| run_spec(body, &self.params, &self.specs[i], &mut self.world, self.ct).is_ok())
    }

    /// A condition truthy under every setup in `truthy` and falsy under
    /// every setup in `falsy`.
    pub fn synth_condition(&mut self, truthy: &[usize], falsy: &[usize]) -> Option<Cond> {
        let key = (truthy.to_vec(), falsy.to_vec());
        if let Some(hit) = self.cache.get(&key) {
            return hit.clone();
        }
        let out = self.synth_condition_uncached(truthy, falsy);
        self.cache.insert(key, out.clone());
        if let Some(c) = &out {
            if !self.found.iter().any(|f| same_cond(f, c)) {
                self.found.push(c.clone());
            }
        }
        out
    }

    fn synth_condition_uncached(&mut self, truthy: &[usize], falsy: &[usize]) -> Option<Cond> {
        let contradictory = truthy.iter().any(|i| {
            falsy
                .iter()
                .any(|j| i == j || self.specs[*i].setup == self.specs[*j].setup)
        });
        if contradictory {
            return None;
        }
        let mut shortlist = vec![Cond::truth()];
        for c in &self.found {
            shortlist.push(c.clone());
            shortlist.push(c.negate());
        }
        for c in shortlist {
            if self.cond_holds(&c, truthy, true) && self.cond_holds(&c, falsy, false) {
                return Some(c);
            }
        }
        if self.stopped.is_some() {
            return None;
        }
        let problem = Problem {
            env: TypeEnv::from_params(&self.params, &self.param_types),
            ret: Type::bool(),
            ct: self.ct,
            consts: self.consts,
            opts: ExpandOptions {
                check_types: self.cfg.mode.check_types(),
                check_effects: false,
                pure_writes_only: true,
            },
        };
        let reqs = truthy
            .iter()
            .map(|&i| (&self.specs[i], true))
            .chain(falsy.iter().map(|&i| (&self.specs[i], false)))
            .collect();
        let oracle = CondOracle {
            params: &self.params,
            reqs,
            world: &mut self.world,
            ct: self.ct,
        };
        let mut s = Searcher::new(problem, oracle);
        let out = s.run(&self.cfg.schedule(), self.budget);
        self.stats.absorb(&s.stats);
        match out {
            Ok(e) => Some(Cond::atom(e)),
            Err(StopReason::Exhausted) => None,
            Err(stop) => {
                self.stopped = Some(stop);
                None
            }
        }
    }

    /// One rewrite on the adjacent pair `(t1, t2)`, if any rule applies.
    fn rewrite_pair(&mut self, t1: &MergeTuple, t2: &MergeTuple) -> Option<(Rule, Vec<MergeTuple>)> {
        let union: SpecSet = t1.specs.union(&t2.specs).copied().collect();
        if same_expr(&t1.expr, &t2.expr) {
            let (rule, cond) = if implies(&t1.cond, &t2.cond) {
                (Rule::Absorb, t1.cond.clone())
            } else if implies(&t2.cond, &t1.cond) {
                (Rule::Absorb, t2.cond.clone())
            } else {
                (Rule::Disjoin, Cond::or(t1.cond.clone(), t2.cond.clone()))
            };
            let merged = MergeTuple {
                expr: t1.expr.clone(),
                cond,
                specs: union,
            };
            return Some((rule, vec![merged]));
        }
        // boolean-valued branches collapse into their condition
        if same_cond(&t1.cond, &t2.cond.negate()) {
            let collapsed = match (&t1.expr, &t2.expr) {
                (Expr::True, Expr::False) => t1.cond.to_expr().map(|e| (Rule::BoolTrueFirst, e)),
                (Expr::False, Expr::True) => t2.cond.to_expr().map(|e| (Rule::BoolFalseFirst, e)),
                _ => None,
            };
            if let Some((rule, expr)) = collapsed {
                let merged = MergeTuple {
                    expr,
                    cond: Cond::or(t1.cond.clone(), t2.cond.clone()),
                    specs: union,
                };
                return Some((rule, vec![merged]));
            }
        }
        if implies(&t1.cond, &t2.cond) || implies(&t2.cond, &t1.cond) {
            let p1: Vec<usize> = t1.specs.iter().copied().collect();
            let p2: Vec<usize> = t2.specs.iter().copied().collect();
            let mark = (t1.expr.canonical(), t2.expr.canonical(), p1.clone(), p2.clone());
            if self.resynth_marks.insert(mark) {
                if let Some(b1) = self.synth_condition(&p1, &p2) {
                    if let Some(b2) = self.synth_condition(&p2, &p1) {
                        let first = MergeTuple {
                            cond: b1,
                            ..t1.clone()
                        };
                        let second = MergeTuple {
                            cond: b2,
                            ..t2.clone()
                        };
                        return Some((Rule::Resynthesize, vec![first, second]));
                    }
                }
            }
        }
        // guess that one branch condition is the negation of the other
        let not_b1 = t1.cond.negate();
        if !same_cond(&t2.cond, &not_b1) {
            let on: Vec<usize> = t2.specs.iter().copied().collect();
            if self.cond_holds(&not_b1, &on, true) {
                let second = MergeTuple {
                    cond: not_b1,
                    ..t2.clone()
                };
                return Some((Rule::NegateFirst, vec![t1.clone(), second]));
            }
        }
        let not_b2 = t2.cond.negate();
        if !same_cond(&t1.cond, &not_b2) {
            let on: Vec<usize> = t1.specs.iter().copied().collect();
            if self.cond_holds(&not_b2, &on, true) {
                let first = MergeTuple {
                    cond: not_b2,
                    ..t1.clone()
                };
                return Some((Rule::NegateSecond, vec![first, t2.clone()]));
            }
        }
        None
    }

    /// Applies the first rule that fires on any adjacent pair, scanning
    /// left to right.
    pub fn rewrite_step(&mut self, m: &MergeTerm) -> Option<(Rule, MergeTerm)> {
        for i in 0..m.tuples.len().saturating_sub(1) {
            if let Some((rule, replacement)) = self.rewrite_pair(&m.tuples[i], &m.tuples[i + 1]) {
                let mut tuples = m.tuples.clone();
                tuples.splice(i..i + 2, replacement);
                let out = MergeTerm { tuples };
                debug_assert_eq!(out.specs(), m.specs());
                return Some((rule, out));
            }
        }
        None
    }

    /// Applies rewrite steps until none fires.
    pub fn rewrite_merge(&mut self, mut m: MergeTerm) -> MergeTerm {
        // merges shrink the chain and resynthesis is marked per pair; the
        // cap guards against the two negation guesses feeding each other
        for _ in 0..64 {
            match self.rewrite_step(&m) {
                Some((_, next)) => m = next,
                None => break,
            }
        }
        m
    }

    /// Tries orderings of the tuples, rewrites each, and returns the
    /// smallest resulting program that passes every spec.
    pub fn merge_program(&mut self, tuples: &[MergeTuple]) -> Option<Expr> {
        let all: Vec<usize> = (0..self.specs.len()).collect();
        let mut best: Option<Expr> = None;
        for order in orderings(tuples.len()) {
            let term = MergeTerm::new(order.iter().map(|&i| tuples[i].clone()).collect());
            self.permutations_tried += 1;
            let rewritten = self.rewrite_merge(term);
            let prog = rewritten.prog();
            if best.as_ref().is_some_and(|b| b.size() <= prog.size()) {
                continue;
            }
            if self.passes(&prog, all.iter().copied()) {
                best = Some(prog);
            }
        }
        best
    }
}

/// All permutations for up to six items; rotations beyond that.
pub fn orderings(n: usize) -> Vec<Vec<usize>> {
    if n > 6 {
        return (0..n).map(|r| (0..n).map(|i| (i + r) % n).collect()).collect();
    }
    fn permute(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..rest.len() {
            let x = rest.remove(k);
            prefix.push(x);
            permute(prefix, rest, out);
            prefix.pop();
            rest.insert(k, x);
        }
    }
    let mut out = Vec::new();
    permute(&mut Vec::new(), &mut (0..n).collect(), &mut out);
    out
}
