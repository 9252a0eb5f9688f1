//! The per-spec worklist search: pop the most promising candidate, expand
//! its leftmost hole, evaluate complete candidates, and repair failures by
//! wrapping them with effect holes.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::effgen::{expand_effect_hole, wrap_effect_hole};
use crate::interp::{run_spec, Outcome, Spec};
use crate::lang::{ClassTable, ConstantPool, EffectPair, Expr, Name, Precision, Type};
use crate::typegen::{expand_typed_hole, leftmost_hole, typecheck, ExpandOptions, TypeEnv};
use crate::world::World;

/// Which guidance checks are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Full,
    TypesOnly,
    EffectsOnly,
    None,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Full, Mode::TypesOnly, Mode::EffectsOnly, Mode::None];

    pub fn check_types(self) -> bool {
        matches!(self, Mode::Full | Mode::TypesOnly)
    }

    pub fn check_effects(self) -> bool {
        matches!(self, Mode::Full | Mode::EffectsOnly)
    }

    pub fn expand_options(self) -> ExpandOptions {
        ExpandOptions {
            check_types: self.check_types(),
            check_effects: self.check_effects(),
            pure_writes_only: false,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::TypesOnly => "types-only",
            Mode::EffectsOnly => "effects-only",
            Mode::None => "none",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        match s.replace('_', "-").as_str() {
            "full" => Ok(Mode::Full),
            "types-only" => Ok(Mode::TypesOnly),
            "effects-only" => Ok(Mode::EffectsOnly),
            "none" => Ok(Mode::None),
            _ => Err(format!("unknown mode `{s}` (expected full, types-only, effects-only, none)")),
        }
    }
}

/// Size schedule for iterative deepening; levels above `max_size` are cut.
pub const DEEPENING_SCHEDULE: [usize; 4] = [8, 16, 32, 64];

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub max_size: usize,
    pub mode: Mode,
    pub precision: Precision,
    /// Maximum number of candidate evaluations per synthesis run.
    pub candidate_budget: usize,
    pub timeout: Option<Duration>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_size: 64,
            mode: Mode::Full,
            precision: Precision::Precise,
            candidate_budget: 100_000,
            timeout: None,
        }
    }
}

impl SearchConfig {
    pub fn schedule(&self) -> Vec<usize> {
        let mut levels: Vec<usize> = DEEPENING_SCHEDULE
            .iter()
            .copied()
            .filter(|&s| s < self.max_size)
            .collect();
        levels.push(self.max_size.max(1));
        levels
    }
}

/// Evaluation allowance shared by every search in one synthesis run.
#[derive(Debug, Clone)]
pub struct Budget {
    pub limit: usize,
    pub used: usize,
    pub deadline: Option<Instant>,
}

impl Budget {
    pub fn new(cfg: &SearchConfig) -> Budget {
        Budget {
            limit: cfg.candidate_budget,
            used: 0,
            deadline: cfg.timeout.map(|t| Instant::now() + t),
        }
    }

    fn timed_out(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Exhausted,
    Budget,
    Timeout,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Exhausted => "search space exhausted",
            StopReason::Budget => "candidate budget exhausted",
            StopReason::Timeout => "timeout",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    pub candidates_expanded: usize,
    pub candidates_evaluated: usize,
    pub peak_queue: usize,
    pub max_size_reached: usize,
}

impl SearchStats {
    pub fn absorb(&mut self, o: &SearchStats) {
        self.candidates_expanded += o.candidates_expanded;
        self.candidates_evaluated += o.candidates_evaluated;
        self.peak_queue = self.peak_queue.max(o.peak_queue);
        self.max_size_reached = self.max_size_reached.max(o.max_size_reached);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass,
    /// `effects` is the failing assertion's read/write pair, absent for
    /// runtime errors and oracles without effect feedback.
    Fail { passed: usize, effects: Option<EffectPair> },
}

pub trait Oracle {
    fn check(&mut self, cand: &Expr) -> Verdict;
}

/// Runs a candidate body against one spec.
pub struct SpecOracle<'a> {
    pub params: &'a [Name],
    pub spec: &'a Spec,
    pub world: &'a mut World,
    pub ct: &'a ClassTable,
}

impl Oracle for SpecOracle<'_> {
    fn check(&mut self, cand: &Expr) -> Verdict {
        let r = run_spec(cand, self.params, self.spec, self.world, self.ct);
        match r.outcome {
            Outcome::Ok(_) => Verdict::Pass,
            Outcome::AssertErr(eff) => Verdict::Fail {
                passed: r.passed,
                effects: Some(eff),
            },
            Outcome::RuntimeErr(_) => Verdict::Fail {
                passed: r.passed,
                effects: None,
            },
        }
    }
}

/// What to synthesize: a body of type `ret` under `env`.
pub struct Problem<'a> {
    pub env: TypeEnv,
    pub ret: Type,
    pub ct: &'a ClassTable,
    pub consts: &'a ConstantPool,
    pub opts: ExpandOptions,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkItem {
    pub passed: usize,
    pub cand: Expr,
    pub seq: usize,
    size: usize,
}

impl WorkItem {
    fn key(&self) -> (usize, Reverse<usize>, Reverse<usize>) {
        (self.passed, Reverse(self.size), Reverse(self.seq))
    }
}

impl Ord for WorkItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for WorkItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Size used against the bound. Each `let` counts once so that repeated
/// failure wrapping cannot grow a term without bound.
pub fn bounded_size(e: &Expr) -> usize {
    e.size() + e.let_count()
}

/// Search driver that keeps its evaluation cache across deepening levels.
pub struct Searcher<'a, O: Oracle> {
    problem: Problem<'a>,
    oracle: O,
    cache: HashMap<Expr, Verdict>,
    pub stats: SearchStats,
    /// Every popped item, for checking the queue discipline in tests.
    pub trace: Option<Vec<(usize, usize)>>,
}

impl<'a, O: Oracle> Searcher<'a, O> {
    pub fn new(problem: Problem<'a>, oracle: O) -> Self {
        Searcher {
            problem,
            oracle,
            cache: HashMap::new(),
            stats: SearchStats::default(),
            trace: None,
        }
    }

    fn evaluate(&mut self, cand: &Expr, key: &Expr, budget: &mut Budget) -> Result<Verdict, StopReason> {
        if let Some(v) = self.cache.get(key) {
            return Ok(v.clone());
        }
        if budget.used >= budget.limit {
            return Err(StopReason::Budget);
        }
        budget.used += 1;
        self.stats.candidates_evaluated += 1;
        let v = self.oracle.check(cand);
        self.cache.insert(key.clone(), v.clone());
        Ok(v)
    }

    fn expand(&self, cand: &Expr) -> Vec<Expr> {
        let p = &self.problem;
        match leftmost_hole(cand) {
            Some(Expr::Hole(..)) => expand_typed_hole(&p.env, p.ct, p.consts, cand, p.opts),
            Some(Expr::EffHole(..)) => expand_effect_hole(&p.env, p.ct, cand, p.opts),
            _ => Vec::new(),
        }
    }

    fn wrap_type(&self, cand: &Expr) -> Type {
        if self.problem.opts.check_types {
            typecheck(&self.problem.env, self.problem.ct, cand).unwrap_or_else(|_| self.problem.ret.clone())
        } else {
            self.problem.ret.clone()
        }
    }

    /// One bounded search. Returns the first passing candidate.
    pub fn run_bounded(&mut self, max_size: usize, budget: &mut Budget) -> Result<Expr, StopReason> {
        let mut seen: HashSet<Expr> = HashSet::new();
        let mut heap = BinaryHeap::new();
        let mut seq = 0;
        let root = Expr::Hole(0, self.problem.ret.clone());
        seen.insert(root.canonical());
        heap.push(WorkItem {
            passed: 0,
            size: 0,
            cand: root,
            seq,
        });
        while let Some(item) = heap.pop() {
            if budget.timed_out() {
                return Err(StopReason::Timeout);
            }
            if let Some(t) = self.trace.as_mut() {
                t.push((item.passed, item.size));
            }
            self.stats.candidates_expanded += 1;
            for child in self.expand(&item.cand) {
                let size = bounded_size(&child);
                if size > max_size {
                    continue;
                }
                let key = child.canonical();
                if !seen.insert(key.clone()) {
                    continue;
                }
                self.stats.max_size_reached = self.stats.max_size_reached.max(size);
                let (passed, next) = if child.is_complete() {
                    match self.evaluate(&child, &key, budget)? {
                        Verdict::Pass => return Ok(child),
                        Verdict::Fail {
                            passed,
                            effects: Some(eff),
                        } => {
                            let wrapped = wrap_effect_hole(&child, &eff, self.wrap_type(&child));
                            if !seen.insert(wrapped.canonical()) {
                                continue;
                            }
                            (passed, wrapped)
                        }
                        Verdict::Fail { effects: None, .. } => continue,
                    }
                } else {
                    (item.passed, child)
                };
                seq += 1;
                heap.push(WorkItem {
                    passed,
                    size: bounded_size(&next),
                    cand: next,
                    seq,
                });
            }
            self.stats.peak_queue = self.stats.peak_queue.max(heap.len());
        }
        Err(StopReason::Exhausted)
    }

    /// Iterative deepening over the given size levels.
    pub fn run(&mut self, levels: &[usize], budget: &mut Budget) -> Result<Expr, StopReason> {
        let mut last = StopReason::Exhausted;
        for &level in levels {
            match self.run_bounded(level, budget) {
                Ok(e) => return Ok(e),
                Err(StopReason::Exhausted) => last = StopReason::Exhausted,
                Err(stop) => return Err(stop),
            }
        }
        Err(last)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoSolution {
    pub reason: StopReason,
    pub stats: SearchStats,
}

impl fmt::Display for NoSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "no solution ({}) after {} evaluations",
            self.reason, self.stats.candidates_evaluated
        )
    }
}

impl std::error::Error for NoSolution {}

/// Synthesizes a body of type `ret` over parameters `arg0..` typed by
/// `params` that passes `spec`. `ct` should already carry the effect
/// precision in use.
#[allow(clippy::too_many_arguments)]
pub fn generate(
    params: &[Type],
    ret: &Type,
    ct: &ClassTable,
    consts: &ConstantPool,
    spec: &Spec,
    world: &mut World,
    cfg: &SearchConfig,
    budget: &mut Budget,
) -> (Result<Expr, NoSolution>, SearchStats) {
    let names = crate::interp::goal_params(params.len());
    let problem = Problem {
        env: TypeEnv::from_params(&names, params),
        ret: ret.clone(),
        ct,
        consts,
        opts: cfg.mode.expand_options(),
    };
    let oracle = SpecOracle {
        params: &names,
        spec,
        world,
        ct,
    };
    let mut s = Searcher::new(problem, oracle);
    let out = s.run(&cfg.schedule(), budget);
    let stats = s.stats.clone();
    match out {
        Ok(e) => (Ok(e), stats),
        Err(reason) => (
            Err(NoSolution {
                reason,
                stats: stats.clone(),
            }),
            stats,
        ),
    }
}
