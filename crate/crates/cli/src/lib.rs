//! Goal-file front end for the synthesizer: parsing, evaluation of given
//! programs, and the benchmark harness.

pub mod dsl;

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use effsyn::driver::{synthesize, Program, Synthesis};
use effsyn::interp::{run_spec, Outcome};
use effsyn::lang::{Precision, Type};
use effsyn::search::{Mode, SearchConfig};
use effsyn::typegen::{typecheck, TypeEnv};
use serde::Serialize;

use crate::dsl::{load_goal, Resolved};

pub fn config(mode: Mode, precision: Precision, max_size: usize, budget: usize, timeout_secs: Option<f64>) -> SearchConfig {
    SearchConfig {
        max_size: max_size.max(1),
        mode,
        precision,
        candidate_budget: budget.max(1),
        timeout: timeout_secs.map(Duration::from_secs_f64),
    }
}

pub fn read_goal(path: &Path) -> anyhow::Result<Resolved> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (_, resolved) = load_goal(&text).with_context(|| format!("in {}", path.display()))?;
    Ok(resolved)
}

pub fn read_program(path: &Path) -> anyhow::Result<Program> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    dsl::parse_program(&text).with_context(|| format!("in {}", path.display()))
}

pub fn synth(resolved: &Resolved, cfg: &SearchConfig) -> Synthesis {
    synthesize(&resolved.goal, &resolved.ct, &resolved.world, cfg)
}

fn check_arity(resolved: &Resolved, program: &Program) -> anyhow::Result<()> {
    let expected = resolved.goal.params.len();
    if program.params.len() != expected {
        bail!(
            "program `{}` takes {} parameter(s) but the goal has {expected}",
            program.name,
            program.params.len()
        );
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecEval {
    pub title: String,
    pub passed_asserts: usize,
    pub total_asserts: usize,
    pub ok: bool,
    pub detail: Option<String>,
}

/// Runs `program` against every spec of the goal.
pub fn eval_program(resolved: &Resolved, program: &Program) -> anyhow::Result<Vec<SpecEval>> {
    check_arity(resolved, program)?;
    let mut world = resolved.world.clone();
    Ok(resolved
        .goal
        .specs
        .iter()
        .map(|spec| {
            let r = run_spec(&program.body, &program.params, spec, &mut world, &resolved.ct);
            let detail = match &r.outcome {
                Outcome::Ok(_) => None,
                Outcome::AssertErr(eff) => Some(format!("assertion {} failed with effects {eff}", r.passed + 1)),
                Outcome::RuntimeErr(e) => Some(format!("runtime error: {e}")),
            };
            SpecEval {
                title: spec.title.clone(),
                passed_asserts: r.passed,
                total_asserts: spec.post.len(),
                ok: r.is_ok(),
                detail,
            }
        })
        .collect())
}

/// Typechecks `program` against the goal signature and returns its type.
pub fn check_program(resolved: &Resolved, program: &Program) -> anyhow::Result<Type> {
    check_arity(resolved, program)?;
    if !program.body.is_complete() {
        bail!("program body contains holes");
    }
    let env = TypeEnv::from_params(&program.params, &resolved.goal.params);
    let ty = typecheck(&env, &resolved.ct, &program.body)?;
    if !resolved.ct.subtype(&ty, &resolved.goal.ret) {
        bail!("body has type {ty}, expected {}", resolved.goal.ret);
    }
    Ok(ty)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchRow {
    pub goal: String,
    pub mode: String,
    pub precision: String,
    pub success: bool,
    pub wall_ms: u64,
    pub candidates_evaluated: usize,
    pub program_size: Option<usize>,
    pub paths: Option<usize>,
}

/// Goal files directly under `dir`, sorted by name.
pub fn goal_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "goal"))
        .collect();
    out.sort();
    Ok(out)
}

pub fn bench(dir: &Path, modes: &[Mode], precisions: &[Precision], base: &SearchConfig) -> anyhow::Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for path in goal_files(dir)? {
        let resolved = read_goal(&path)?;
        for &mode in modes {
            for &precision in precisions {
                let cfg = SearchConfig {
                    mode,
                    precision,
                    ..base.clone()
                };
                let out = synth(&resolved, &cfg);
                let r = out.report;
                rows.push(BenchRow {
                    goal: r.goal,
                    mode: mode.to_string(),
                    precision: precision.to_string(),
                    success: r.success,
                    wall_ms: r.wall_ms,
                    candidates_evaluated: r.candidates_evaluated,
                    program_size: r.program_size,
                    paths: r.paths,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_csv<W: std::io::Write>(rows: &[BenchRow], out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
