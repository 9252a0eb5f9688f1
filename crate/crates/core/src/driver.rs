//! End-to-end synthesis: solve each spec (reusing earlier solutions where
//! they already pass), then merge the per-spec solutions.

use std::fmt;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::interp::{goal_params, run_spec, Spec};
use crate::lang::{ClassTable, Cond, ConstantPool, DefinitionError, Expr, Name, Precision, Type};
use crate::merge::{MergeContext, MergeTuple};
use crate::search::{generate, Budget, Mode, SearchConfig, StopReason};
use crate::world::World;

#[derive(Debug, Clone, PartialEq)]
pub struct Goal {
    pub name: Name,
    pub params: Vec<Type>,
    pub ret: Type,
    pub consts: ConstantPool,
    pub specs: Vec<Spec>,
}

impl Goal {
    pub fn validate(&self) -> Result<(), DefinitionError> {
        if self.specs.is_empty() {
            return Err(DefinitionError::Invalid(format!("goal `{}` has no specs", self.name)));
        }
        for s in &self.specs {
            s.validate(self.params.len())?;
        }
        Ok(())
    }

    pub fn param_names(&self) -> Vec<Name> {
        goal_params(self.params.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub name: Name,
    pub params: Vec<Name>,
    pub body: Expr,
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(def {} (", self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ") {})", self.body)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolvedBy {
    Reuse,
    Search,
    Unsolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpecReport {
    pub title: String,
    pub solved_by: SolvedBy,
    pub tuple: Option<usize>,
    pub candidates_expanded: usize,
    pub candidates_evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub goal: String,
    pub mode: Mode,
    pub precision: Precision,
    pub success: bool,
    pub candidates_expanded: usize,
    pub candidates_evaluated: usize,
    pub per_spec: Vec<SpecReport>,
    pub tuples: usize,
    pub merge_permutations: usize,
    pub wall_ms: u64,
    pub program_size: Option<usize>,
    pub paths: Option<usize>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Spec(String),
    Merge,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Spec(t) => write!(f, "spec \"{t}\""),
            Stage::Merge => write!(f, "merge"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error(transparent)]
    Definition(#[from] DefinitionError),
    #[error("no solution at {stage}: {reason}")]
    NoSolution { stage: Stage, reason: StopReason },
}

pub struct Synthesis {
    pub program: Result<Program, SynthError>,
    pub report: RunReport,
}

/// Synthesizes `goal` against class table `ct`, using `world` (which
/// knows the schemas) for evaluation.
pub fn synthesize(goal: &Goal, ct: &ClassTable, world: &World, cfg: &SearchConfig) -> Synthesis {
    let start = Instant::now();
    let mut report = RunReport {
        goal: goal.name.to_string(),
        mode: cfg.mode,
        precision: cfg.precision,
        success: false,
        candidates_expanded: 0,
        candidates_evaluated: 0,
        per_spec: Vec::new(),
        tuples: 0,
        merge_permutations: 0,
        wall_ms: 0,
        program_size: None,
        paths: None,
        failure: None,
    };
    let program = run(goal, ct, world, cfg, &mut report);
    report.wall_ms = start.elapsed().as_millis() as u64;
    match &program {
        Ok(p) => {
            report.success = true;
            report.program_size = Some(p.body.size());
            report.paths = Some(p.body.paths());
        }
        Err(e) => report.failure = Some(e.to_string()),
    }
    Synthesis { program, report }
}

fn run(goal: &Goal, ct: &ClassTable, world: &World, cfg: &SearchConfig, report: &mut RunReport) -> Result<Program, SynthError> {
    goal.validate()?;
    let ct = ct.erase_effects(cfg.precision);
    let params = goal.param_names();
    let mut world = world.clone();
    let mut budget = Budget::new(cfg);
    let mut tuples: Vec<MergeTuple> = Vec::new();

    for (i, spec) in goal.specs.iter().enumerate() {
        let reused = tuples
            .iter()
            .position(|t| run_spec(&t.expr, &params, spec, &mut world, &ct).is_ok());
        if let Some(k) = reused {
            tuples[k].specs.insert(i);
            report.per_spec.push(SpecReport {
                title: spec.title.clone(),
                solved_by: SolvedBy::Reuse,
                tuple: Some(k),
                candidates_expanded: 0,
                candidates_evaluated: 0,
            });
            continue;
        }
        let (out, stats) = generate(&goal.params, &goal.ret, &ct, &goal.consts, spec, &mut world, cfg, &mut budget);
        report.candidates_expanded += stats.candidates_expanded;
        report.candidates_evaluated += stats.candidates_evaluated;
        let solved = out.is_ok();
        report.per_spec.push(SpecReport {
            title: spec.title.clone(),
            solved_by: if solved { SolvedBy::Search } else { SolvedBy::Unsolved },
            tuple: solved.then_some(tuples.len()),
            candidates_expanded: stats.candidates_expanded,
            candidates_evaluated: stats.candidates_evaluated,
        });
        match out {
            Ok(expr) => tuples.push(MergeTuple::new(expr, Cond::truth(), [i])),
            Err(e) => {
                return Err(SynthError::NoSolution {
                    stage: Stage::Spec(spec.title.clone()),
                    reason: e.reason,
                })
            }
        }
    }
    report.tuples = tuples.len();

    let mut merger = MergeContext::new(
        params.clone(),
        goal.params.clone(),
        &ct,
        &goal.consts,
        &goal.specs,
        world,
        cfg,
        &mut budget,
    );
    let merged = merger.merge_program(&tuples);
    report.merge_permutations = merger.permutations_tried;
    report.candidates_expanded += merger.stats.candidates_expanded;
    report.candidates_evaluated += merger.stats.candidates_evaluated;
    let stopped = merger.stopped;
    let Some(body) = merged else {
        return Err(SynthError::NoSolution {
            stage: Stage::Merge,
            reason: stopped.unwrap_or(StopReason::Exhausted),
        });
    };
    debug_assert!(merger.passes(&body, 0..goal.specs.len()));
    Ok(Program {
        name: goal.name.clone(),
        params,
        body,
    })
}
