//! Acceptance criteria for the synthesizer, one line of output per
//! criterion. Run with `cargo test -p effsyn-cli --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::Duration;

use effsyn::interp::{run_spec, Outcome, SetupStmt, Spec};
use effsyn::lang::{
    ClassTable, Cond, Effect, EffectAtom, EffectPair, Expr, Field, Name, Precision, Type,
};
use effsyn::merge::{implies, implies_with, AtomTable, MergeContext, MergeTerm, MergeTuple, Rule, Strategy as ImplyStrategy};
use effsyn::search::{generate, Budget, Mode, SearchConfig};
use effsyn::world::{install_schema, SchemaDecl, World};
use effsyn_cli::dsl::{load_goal, parse_expr, read_all, Resolved};
use effsyn_cli::{config, eval_program, read_goal, synth};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};

const SUITE_LIMIT: Duration = Duration::from_secs(60);
const OVERVIEW_LIMIT: Duration = Duration::from_secs(120);
const BUDGET: usize = 100_000;
const PROPERTY_CASES: u32 = 1000;
const MIN_SCENARIOS: usize = 20;

fn goal_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../goals").join(format!("{name}.goal"))
}

fn expr(text: &str) -> Expr {
    let forms = read_all(text).unwrap();
    parse_expr(&forms[0]).unwrap()
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct RunKey {
    goal: &'static str,
    mode: Mode,
    precision: Precision,
}

/// What a `synth` invocation produced, in the form compared for
/// determinism.
#[derive(Debug, Clone, PartialEq, Eq)]
struct RunRecord {
    program: Option<String>,
    paths: Option<usize>,
    expanded: usize,
    evaluated: usize,
    wall: Duration,
}

impl RunRecord {
    fn same_result(&self, other: &RunRecord) -> bool {
        self.program == other.program && self.expanded == other.expanded && self.evaluated == other.evaluated
    }
}

/// Runs each configuration once and remembers the result, so criteria can
/// share runs and the determinism check can replay them.
#[derive(Default)]
struct Runs {
    done: Vec<(RunKey, RunRecord)>,
    goals: BTreeMap<&'static str, Resolved>,
}

impl Runs {
    fn cfg(key: &RunKey) -> SearchConfig {
        config(key.mode, key.precision, 64, BUDGET, None)
    }

    fn execute(&mut self, key: &RunKey) -> RunRecord {
        let resolved = self
            .goals
            .entry(key.goal)
            .or_insert_with(|| read_goal(&goal_path(key.goal)).unwrap());
        let out = synth(resolved, &Runs::cfg(key));
        RunRecord {
            program: out.program.ok().map(|p| p.to_string()),
            paths: out.report.paths,
            expanded: out.report.candidates_expanded,
            evaluated: out.report.candidates_evaluated,
            wall: Duration::from_millis(out.report.wall_ms),
        }
    }

    fn get(&mut self, goal: &'static str, mode: Mode, precision: Precision) -> RunRecord {
        let key = RunKey { goal, mode, precision };
        if let Some((_, r)) = self.done.iter().find(|(k, _)| *k == key) {
            return r.clone();
        }
        let r = self.execute(&key);
        self.done.push((key, r.clone()));
        r
    }
}

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict { ok, detail: detail.into() }
}

fn synthetic_suite(runs: &mut Runs) -> Verdict {
    let expected = [
        ("s1_lvar", 1),
        ("s2_false", 1),
        ("s3_method_chains", 1),
        ("s4_user_exists", 1),
        ("s5_branching", 2),
        ("s7_fold_branches", 1),
    ];
    let mut bad = Vec::new();
    let mut seen = Vec::new();
    for (goal, paths) in expected {
        let r = runs.get(goal, Mode::Full, Precision::Precise);
        seen.push(format!("{goal}={:?}", r.paths));
        if r.program.is_none() || r.paths != Some(paths) || r.wall > SUITE_LIMIT {
            bad.push(format!("{goal}: paths {:?} (want {paths}), {} ms", r.paths, r.wall.as_millis()));
        }
    }
    if bad.is_empty() {
        verdict(true, format!("paths {}", seen.join(" ")))
    } else {
        verdict(false, bad.join("; "))
    }
}

/// Finds the single `If` in `e`.
fn find_if(e: &Expr) -> Option<(&Cond, &Expr, &Expr)> {
    match e {
        Expr::If(c, a, b) => Some((c, a, b)),
        Expr::Seq(a, b) | Expr::Let(_, a, b) => find_if(a).or_else(|| find_if(b)),
        Expr::Call { recv, args, .. } => find_if(recv).or_else(|| args.iter().find_map(find_if)),
        Expr::Record(pairs) => pairs.values().find_map(find_if),
        _ => None,
    }
}

fn calls(e: &Expr, method: &str) -> Vec<Expr> {
    let mut out = Vec::new();
    fn go(e: &Expr, method: &str, out: &mut Vec<Expr>) {
        match e {
            Expr::Call { recv, method: m, args } => {
                if &**m == method {
                    out.push(e.clone());
                }
                go(recv, method, out);
                args.iter().for_each(|a| go(a, method, out));
            }
            Expr::Seq(a, b) | Expr::Let(_, a, b) => {
                go(a, method, out);
                go(b, method, out);
            }
            Expr::If(c, a, b) => {
                if let Some(c) = c.to_expr() {
                    go(&c, method, out);
                }
                go(a, method, out);
                go(b, method, out);
            }
            Expr::Record(pairs) => pairs.values().for_each(|v| go(v, method, out)),
            _ => {}
        }
    }
    go(e, method, &mut out);
    out
}

fn overview(runs: &mut Runs) -> Verdict {
    let r = runs.get("update_post", Mode::Full, Precision::Precise);
    let Some(text) = &r.program else {
        return verdict(false, "no program");
    };
    let resolved = &runs.goals["update_post"];
    let program = effsyn_cli::dsl::parse_program(text).unwrap();
    let passes = eval_program(resolved, &program).unwrap().iter().all(|s| s.ok);
    let body = &program.body;
    let one_if = body.count_ifs() == 1;
    let (guard, polarity) = match find_if(body) {
        Some((Cond::Not(inner), ..)) => ((**inner).clone(), false),
        Some((c, ..)) => (c.clone(), true),
        None => return verdict(false, format!("no conditional in {text}")),
    };
    let guard_expr = guard.to_expr().unwrap_or(Expr::Nil);
    let keyed = calls(&guard_expr, "exists?").iter().any(|c| match c {
        Expr::Call { args, .. } => matches!(args.as_slice(), [Expr::Record(r)]
            if r.contains_key("author") && r.contains_key("slug")),
        _ => false,
    });
    let (_, then, els) = find_if(body).unwrap();
    let taken = if polarity { then } else { els };
    let writes_title = !calls(taken, "title=").is_empty();
    let ok = passes && one_if && keyed && writes_title && r.wall <= OVERVIEW_LIMIT;
    verdict(
        ok,
        format!(
            "passes={passes} one_if={one_if} exists_author_slug={keyed} title_write_on_true={writes_title} {} ms: {text}",
            r.wall.as_millis()
        ),
    )
}

fn ablation(runs: &mut Runs) -> Verdict {
    let full = runs.get("update_post", Mode::Full, Precision::Precise);
    let none = runs.get("update_post", Mode::None, Precision::Precise);
    let types = runs.get("update_post", Mode::TypesOnly, Precision::Precise);
    let effects = runs.get("update_post", Mode::EffectsOnly, Precision::Precise);
    let ok = full.program.is_some()
        && none.program.is_none()
        && types.evaluated > full.evaluated
        && effects.evaluated > full.evaluated;
    verdict(
        ok,
        format!(
            "evaluated full={} types-only={} effects-only={} none={} (none solved: {})",
            full.evaluated,
            types.evaluated,
            effects.evaluated,
            none.evaluated,
            none.program.is_some()
        ),
    )
}

fn precision(runs: &mut Runs) -> Verdict {
    let counts: Vec<usize> = [Precision::Precise, Precision::Class, Precision::Purity]
        .into_iter()
        .map(|p| runs.get("update_post", Mode::Full, p).evaluated)
        .collect();
    verdict(
        counts[0] <= counts[1] && counts[1] <= counts[2],
        format!("evaluated precise={} class={} purity={}", counts[0], counts[1], counts[2]),
    )
}

// Postcondition semantics scenarios ----------------------------------------

fn semantics_fixture() -> (ClassTable, World) {
    let post = SchemaDecl::new("Post", &[("author", Type::str()), ("title", Type::str()), ("slug", Type::str())]);
    let mut ct = ClassTable::new();
    install_schema(&mut ct, &post).unwrap();
    (ct, World::new([post]))
}

enum Expect {
    Pass(usize),
    Assert(usize, EffectPair),
    Runtime(usize),
}

struct Scenario {
    name: &'static str,
    body: &'static str,
    post: &'static [&'static str],
    expect: Expect,
}

fn reads(atoms: &[EffectAtom]) -> EffectPair {
    EffectPair::new(Effect::canonical(atoms.iter().cloned(), &effsyn::lang::Flat), Effect::pure())
}

fn scenarios() -> Vec<Scenario> {
    use EffectAtom::{ClassStar, Region};
    let region = |r: &str| Region("Post".into(), r.into());
    vec![
        Scenario { name: "identity passes", body: "arg0", post: &["(. xr == \"s\")"], expect: Expect::Pass(1) },
        Scenario { name: "empty postcondition", body: "arg0", post: &[], expect: Expect::Pass(0) },
        Scenario { name: "every assert counts", body: "arg0", post: &["true", "true", "true"], expect: Expect::Pass(3) },
        Scenario { name: "false fails pure", body: "arg0", post: &["false"], expect: Expect::Assert(0, EffectPair::pure()) },
        Scenario {
            name: "stop on first failure",
            body: "arg0",
            post: &["true", "false", "true"],
            expect: Expect::Assert(1, EffectPair::pure()),
        },
        Scenario { name: "nil is falsy", body: "arg0", post: &["nil"], expect: Expect::Assert(0, EffectPair::pure()) },
        Scenario { name: "zero is truthy", body: "arg0", post: &["0"], expect: Expect::Pass(1) },
        Scenario {
            name: "reader passes",
            body: "(. (. Post where (rec (slug arg0))) first)",
            post: &["(. (. xr title) == \"T\")"],
            expect: Expect::Pass(1),
        },
        Scenario {
            name: "reader failure reports its region",
            body: "(. (. Post where (rec (slug arg0))) first)",
            post: &["(. (. xr title) == \"Z\")"],
            expect: Expect::Assert(0, reads(&[region("title")])),
        },
        Scenario {
            name: "passed assert effects are reset",
            body: "(. (. Post where (rec (slug arg0))) first)",
            post: &["(. (. xr author) == \"a\")", "(. (. xr title) == \"Z\")"],
            expect: Expect::Assert(1, reads(&[region("title")])),
        },
        Scenario {
            name: "effects accumulate within an assert",
            body: "(. (. Post where (rec (slug arg0))) first)",
            post: &["(. (. xr author) == (. xr title))"],
            expect: Expect::Assert(0, reads(&[region("author"), region("title")])),
        },
        Scenario {
            name: "class-level read",
            body: "arg0",
            post: &["(. Post exists? (rec (title \"Z\")))"],
            expect: Expect::Assert(0, reads(&[ClassStar("Post".into())])),
        },
        Scenario {
            name: "class read subsumes region read",
            body: "(. (. Post where (rec (slug arg0))) first)",
            post: &["(seq (. xr title) (. Post exists? (rec (title \"Z\"))))"],
            expect: Expect::Assert(0, reads(&[ClassStar("Post".into())])),
        },
        Scenario {
            name: "writes in a failing assert are reported",
            body: "(. (. Post where (rec (slug arg0))) first)",
            post: &["(seq (. xr title= \"Z\") false)"],
            expect: Expect::Assert(0, EffectPair::new(Effect::pure(), Effect::region("Post", "title"))),
        },
        Scenario {
            name: "assert sees earlier assert writes",
            body: "(. (. Post where (rec (slug arg0))) first)",
            post: &["(. xr title= \"Z\")", "(. (. xr title) == \"Z\")"],
            expect: Expect::Pass(2),
        },
        Scenario {
            name: "earlier write excluded from later failure",
            body: "(. (. Post where (rec (slug arg0))) first)",
            post: &["(. xr title= \"Q\")", "(. (. xr title) == \"T\")"],
            expect: Expect::Assert(1, reads(&[region("title")])),
        },
        Scenario {
            name: "goal body effects are not counted",
            body: "(let t (. (. Post where (rec (slug arg0))) first) (seq (. t title= \"B\") t))",
            post: &["(. (. xr title) == \"B\")", "false"],
            expect: Expect::Assert(1, EffectPair::pure()),
        },
        Scenario {
            name: "runtime error in an assert",
            body: "arg0",
            post: &["true", "(. nil title)"],
            expect: Expect::Runtime(1),
        },
        Scenario { name: "runtime error in the goal", body: "(. nil title)", post: &["true"], expect: Expect::Runtime(0) },
        Scenario {
            name: "asserts after a failure are not run",
            body: "arg0",
            post: &["false", "(. nil title)"],
            expect: Expect::Assert(0, EffectPair::pure()),
        },
        Scenario {
            name: "globals from setup are visible",
            body: "(. (. Post where (rec (slug arg0))) first)",
            post: &["(. (. @p id) == (. xr id))"],
            expect: Expect::Pass(1),
        },
        Scenario {
            name: "id reads are regions too",
            body: "(. (. Post where (rec (slug arg0))) first)",
            post: &["(. (. xr id) == 99)"],
            expect: Expect::Assert(0, reads(&[region("id")])),
        },
        Scenario {
            name: "creation in the goal is visible",
            body: "(. Post create (rec (slug \"n\")))",
            post: &["(. (. xr id) == 2)", "(. Post exists? (rec (slug \"n\")))"],
            expect: Expect::Pass(2),
        },
    ]
}

fn semantics() -> Verdict {
    let (ct, mut world) = semantics_fixture();
    let table = scenarios();
    let params: Vec<Name> = vec!["arg0".into()];
    let mut bad = Vec::new();
    // each scenario runs twice on the same world: the second run checks
    // that setup resets the database
    for s in &table {
        let spec = Spec {
            title: s.name.to_string(),
            setup: vec![
                SetupStmt::Assign(
                    "@p".into(),
                    expr("(. Post create (rec (author \"a\") (title \"T\") (slug \"s\")))"),
                ),
                SetupStmt::CallGoal(vec![Expr::str("s")]),
            ],
            post: s.post.iter().map(|p| expr(p)).collect(),
        };
        let body = expr(s.body);
        for _ in 0..2 {
            let r = run_spec(&body, &params, &spec, &mut world, &ct);
            let ok = match (&s.expect, &r.outcome) {
                (Expect::Pass(n), Outcome::Ok(_)) => r.passed == *n,
                (Expect::Assert(n, eff), Outcome::AssertErr(got)) => r.passed == *n && got == eff,
                (Expect::Runtime(n), Outcome::RuntimeErr(_)) => r.passed == *n,
                _ => false,
            };
            if !ok {
                bad.push(format!("{}: got {r}", s.name));
                break;
            }
        }
    }
    if table.len() < MIN_SCENARIOS {
        bad.push(format!("only {} scenarios", table.len()));
    }
    verdict(bad.is_empty(), if bad.is_empty() { format!("{} scenarios match", table.len()) } else { bad.join("; ") })
}

// Lattice properties ------------------------------------------------------

const CLASSES: [&str; 5] = ["A", "B", "C", "D", "E"];

/// A < Obj, B < A, C < B, D < A, E < Obj.
fn hierarchy() -> ClassTable {
    let mut ct = ClassTable::new();
    for (c, p) in [("A", "Obj"), ("B", "A"), ("C", "B"), ("D", "A"), ("E", "Obj")] {
        ct.add_class(c, p).unwrap();
    }
    ct
}

fn base_type() -> impl Strategy<Value = Type> {
    prop_oneof![
        prop::sample::select(vec!["Obj", "Nil", "A", "B", "C", "D", "E", "Str", "Int"]).prop_map(Type::class),
        prop::sample::select(vec!["A", "B"]).prop_map(Type::class_of),
    ]
}

fn any_type() -> impl Strategy<Value = Type> {
    base_type().prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..4).prop_map(Type::Union),
            prop::collection::btree_map(prop::sample::select(vec!["k", "m"]), (any::<bool>(), inner), 0..3)
                .prop_map(|fs| {
                    Type::record(fs.into_iter().map(|(k, (optional, ty))| (k.into(), Field { optional, ty })))
                }),
        ]
    })
}

fn atom() -> impl Strategy<Value = EffectAtom> {
    let class = prop::sample::select(CLASSES.to_vec());
    let region = prop::sample::select(vec!["r", "s"]);
    prop_oneof![
        1 => Just(EffectAtom::Star),
        3 => class.clone().prop_map(|c| EffectAtom::ClassStar(c.into())),
        4 => (class, region.clone()).prop_map(|(c, r)| EffectAtom::Region(c.into(), r.into())),
        1 => Just(EffectAtom::SelfStar),
        1 => region.prop_map(|r| EffectAtom::SelfRegion(r.into())),
    ]
}

fn effect() -> impl Strategy<Value = Vec<EffectAtom>> {
    prop::collection::vec(atom(), 0..4)
}

/// Cells an effect may touch: every (class, region) pair over the test
/// classes plus `Obj`, with a region no atom names, and the receiver's own
/// cells. An effect is the union of the cells its atoms denote.
fn cells(atoms: &[EffectAtom], ct: &ClassTable) -> BTreeSet<(String, String)> {
    let mut classes: Vec<&str> = CLASSES.to_vec();
    classes.push("Obj");
    let regions = ["r", "s", "unnamed"];
    let mut out = BTreeSet::new();
    for a in atoms {
        for &c in &classes {
            for r in regions {
                let hit = match a {
                    EffectAtom::Star => true,
                    EffectAtom::ClassStar(k) => ct.is_subclass(c, k),
                    EffectAtom::Region(k, q) => ct.is_subclass(c, k) && &**q == r,
                    _ => false,
                };
                if hit {
                    out.insert((c.to_string(), r.to_string()));
                }
            }
        }
        for r in regions {
            let hit = match a {
                EffectAtom::Star | EffectAtom::SelfStar => true,
                EffectAtom::SelfRegion(q) => &**q == r,
                _ => false,
            };
            if hit {
                out.insert(("self".to_string(), r.to_string()));
            }
        }
    }
    out
}

fn canon(atoms: &[EffectAtom], ct: &ClassTable) -> Effect {
    Effect::canonical(atoms.iter().cloned(), ct)
}

fn run_property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
    failures: &mut Vec<String>,
) {
    let mut runner = TestRunner::new(RunnerConfig {
        cases: PROPERTY_CASES,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    if let Err(e) = runner.run(&strategy, test) {
        failures.push(format!("{name}: {e}"));
    }
}

fn type_properties(failures: &mut Vec<String>) {
    let ct = hierarchy();
    run_property(
        "type preorder",
        (any_type(), any_type(), any_type()),
        |(a, b, c)| {
            let (a, b, c) = (a.canonical(), b.canonical(), c.canonical());
            prop_assert!(ct.subtype(&a, &a));
            prop_assert!(ct.subtype(&Type::nil(), &a));
            prop_assert!(ct.subtype(&a, &Type::obj()));
            if ct.subtype(&a, &b) && ct.subtype(&b, &c) {
                prop_assert!(ct.subtype(&a, &c), "{a} <= {b} <= {c}");
            }
            Ok(())
        },
        failures,
    );
    run_property(
        "type canonicalization",
        (any_type(), any_type()),
        |(a, b)| {
            let ca = a.canonical();
            prop_assert_eq!(ca.canonical(), ca.clone());
            prop_assert!(ct.subtype(&a, &ca) && ct.subtype(&ca, &a));
            prop_assert_eq!(ct.subtype(&a, &b), ct.subtype(&ca, &b.canonical()));
            if let Type::Union(ms) = &ca {
                prop_assert!(ms.len() >= 2);
                prop_assert!(ms.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(ms.iter().all(|m| !matches!(m, Type::Union(_))));
            }
            Ok(())
        },
        failures,
    );
    run_property(
        "type union is a least upper bound",
        (any_type(), any_type(), any_type()),
        |(a, b, c)| {
            let (a, b, c) = (a.canonical(), b.canonical(), c.canonical());
            let u = Type::union([a.clone(), b.clone()]);
            prop_assert_eq!(u.clone(), Type::union([b.clone(), a.clone()]));
            prop_assert_eq!(Type::union([a.clone(), a.clone()]), a.clone());
            prop_assert!(ct.subtype(&a, &u) && ct.subtype(&b, &u));
            if ct.subtype(&a, &c) && ct.subtype(&b, &c) {
                prop_assert!(ct.subtype(&u, &c));
            }
            Ok(())
        },
        failures,
    );
}

fn effect_properties(failures: &mut Vec<String>) {
    let ct = hierarchy();
    run_property(
        "effect subsumption matches cell inclusion",
        (effect(), effect()),
        |(x, y)| {
            let (ex, ey) = (canon(&x, &ct), canon(&y, &ct));
            let expected = cells(&x, &ct).is_subset(&cells(&y, &ct));
            prop_assert_eq!(ex.subsumed_by(&ey, &ct), expected, "{} vs {}", ex, ey);
            Ok(())
        },
        failures,
    );
    run_property(
        "effect canonicalization",
        effect(),
        |x| {
            let e = canon(&x, &ct);
            let atoms: Vec<EffectAtom> = e.atoms().cloned().collect();
            prop_assert_eq!(canon(&atoms, &ct), e.clone());
            prop_assert_eq!(cells(&atoms, &ct), cells(&x, &ct));
            // no kept atom is subsumed by another kept atom
            for a in &atoms {
                for b in &atoms {
                    prop_assert!(a == b || !a.subsumed_by(b, &ct));
                }
            }
            Ok(())
        },
        failures,
    );
    run_property(
        "effect union is a least upper bound",
        (effect(), effect(), effect()),
        |(x, y, z)| {
            let (ex, ey, ez) = (canon(&x, &ct), canon(&y, &ct), canon(&z, &ct));
            let u = ex.union(&ey, &ct);
            prop_assert_eq!(u.clone(), ey.union(&ex, &ct));
            prop_assert_eq!(ex.union(&ex, &ct), ex.clone());
            prop_assert!(ex.subsumed_by(&u, &ct) && ey.subsumed_by(&u, &ct));
            prop_assert!(Effect::pure().subsumed_by(&ex, &ct) && ex.subsumed_by(&Effect::star(), &ct));
            if ex.subsumed_by(&ez, &ct) && ey.subsumed_by(&ez, &ct) {
                prop_assert!(u.subsumed_by(&ez, &ct));
            }
            Ok(())
        },
        failures,
    );
    run_property(
        "effect erasure only coarsens",
        effect(),
        |x| {
            let e = canon(&x, &ct);
            let class = e.erase(Precision::Class, &ct);
            let purity = e.erase(Precision::Purity, &ct);
            prop_assert_eq!(e.erase(Precision::Precise, &ct), e.clone());
            prop_assert!(e.subsumed_by(&class, &ct));
            prop_assert!(class.subsumed_by(&purity, &ct));
            prop_assert_eq!(purity.is_pure(), e.is_pure());
            Ok(())
        },
        failures,
    );
}

/// A formula over `arg0 == "pK"` atoms, constants and `!` calls.
fn formula() -> impl Strategy<Value = Cond> {
    let atom_expr = prop_oneof![
        6 => (0..4usize).prop_map(|k| Expr::call(Expr::var("arg0"), "==", vec![Expr::str(&format!("p{k}"))])),
        1 => Just(Expr::True),
        1 => Just(Expr::False),
        1 => Just(Expr::Nil),
    ];
    let atom_expr = atom_expr.prop_recursive(2, 4, 1, |inner| inner.prop_map(|e| Expr::call(e, "!", vec![])));
    atom_expr.prop_map(Cond::atom).prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|c| Cond::Not(Box::new(c))),
            (inner.clone(), inner).prop_map(|(a, b)| Cond::or(a, b)),
        ]
    })
}

fn truth_of_expr(e: &Expr, world: u32) -> bool {
    match e {
        Expr::True => true,
        Expr::False | Expr::Nil => false,
        Expr::Call { recv, method, .. } if &**method == "!" => !truth_of_expr(recv, world),
        Expr::Call { args, .. } => match &args[0] {
            Expr::Str(s) => world & (1 << s[1..].parse::<u32>().unwrap()) != 0,
            other => panic!("unexpected atom argument {other}"),
        },
        other => panic!("unexpected atom {other}"),
    }
}

fn truth(c: &Cond, world: u32) -> bool {
    match c {
        Cond::Atom(e) => truth_of_expr(e, world),
        Cond::Not(c) => !truth(c, world),
        Cond::Or(a, b) => truth(a, world) || truth(b, world),
    }
}

fn implication_properties(failures: &mut Vec<String>) {
    run_property(
        "implies matches a truth table",
        (formula(), formula()),
        |(b1, b2)| {
            let expected = (0..16u32).all(|w| !truth(&b1, w) || truth(&b2, w));
            prop_assert_eq!(implies(&b1, &b2), expected, "{} => {}", b1, b2);
            prop_assert_eq!(implies_with(&b1, &b2, &mut AtomTable::new(), ImplyStrategy::Sat), expected);
            Ok(())
        },
        failures,
    );
}

fn lattice() -> Verdict {
    let mut failures = Vec::new();
    type_properties(&mut failures);
    effect_properties(&mut failures);
    implication_properties(&mut failures);
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("7 type/effect properties and implies, {PROPERTY_CASES} cases each")
        } else {
            failures.join("; ")
        },
    )
}

// Rewrite algebra --------------------------------------------------------

const PICK_GOAL: &str = r#"
(goal pick
  (sig (Str -> Str))
  (consts "x" "y" "a")
  (spec "a" (setup (call! "a")) (post (assert (. xr == "x"))))
  (spec "b" (setup (call! "b")) (post (assert (. xr == "y"))))
  (spec "c" (setup (call! "c")) (post (assert (. xr == "y")))))
"#;

fn is(k: &str) -> Cond {
    Cond::atom(Expr::call(Expr::var("arg0"), "==", vec![Expr::str(k)]))
}

fn tuple(e: Expr, c: Cond, specs: &[usize]) -> MergeTuple {
    MergeTuple::new(e, c, specs.iter().copied())
}

struct RuleCheck<'r> {
    failures: &'r mut Vec<String>,
}

impl RuleCheck<'_> {
    fn step(&mut self, ctx: &mut MergeContext<'_>, name: &str, m: MergeTerm, want: Rule) -> Option<MergeTerm> {
        match ctx.rewrite_step(&m) {
            Some((rule, out)) if rule == want => {
                if out.specs() != m.specs() {
                    self.failures.push(format!("{name}: specs {:?} became {:?}", m.specs(), out.specs()));
                }
                Some(out)
            }
            other => {
                self.failures.push(format!("{name}: expected {want:?}, got {:?}", other.map(|(r, _)| r)));
                None
            }
        }
    }

    fn expect(&mut self, name: &str, ok: bool, detail: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(format!("{name}: {}", detail()));
        }
    }
}

fn pick_rules(failures: &mut Vec<String>) {
    let (_, resolved) = load_goal(PICK_GOAL).unwrap();
    let cfg = SearchConfig::default();
    let mut budget = Budget::new(&cfg);
    let params = resolved.goal.param_names();
    let mut ctx = MergeContext::new(
        params,
        resolved.goal.params.clone(),
        &resolved.ct,
        &resolved.goal.consts,
        &resolved.goal.specs,
        resolved.world.clone(),
        &cfg,
        &mut budget,
    );
    let mut check = RuleCheck { failures };
    let (x, y) = (Expr::str("x"), Expr::str("y"));

    // a chain reads as an if/else-if cascade over the union of specs
    let chain = MergeTerm::new(vec![tuple(x.clone(), is("a"), &[0]), tuple(y.clone(), is("a").negate(), &[1, 2])]);
    check.expect("chain", chain.specs() == [0, 1, 2].into(), || format!("{:?}", chain.specs()));
    check.expect(
        "chain",
        chain.chain() == Expr::if_(is("a"), x.clone(), Expr::if_(is("a").negate(), y.clone(), Expr::Nil)),
        || chain.chain().to_string(),
    );
    check.expect("chain", chain.prog() == Expr::if_(is("a"), x.clone(), y.clone()), || chain.prog().to_string());
    check.expect("chain", ctx.passes(&chain.prog(), 0..3), || "cascade fails its specs".into());

    // equal expressions, b1 => b2
    let m = MergeTerm::new(vec![tuple(y.clone(), is("b"), &[1]), tuple(y.clone(), Cond::or(is("b"), is("c")), &[2])]);
    if let Some(out) = check.step(&mut ctx, "absorb", m, Rule::Absorb) {
        check.expect("absorb", out.tuples == vec![tuple(y.clone(), is("b"), &[1, 2])], || format!("{:?}", out.tuples));
    }

    // equal expressions, independent conditions
    let m = MergeTerm::new(vec![tuple(y.clone(), is("b"), &[1]), tuple(y.clone(), is("c"), &[2])]);
    if let Some(out) = check.step(&mut ctx, "disjoin", m, Rule::Disjoin) {
        check.expect(
            "disjoin",
            out.tuples == vec![tuple(y.clone(), Cond::or(is("b"), is("c")), &[1, 2])],
            || format!("{:?}", out.tuples),
        );
    }

    // different expressions under `true`: conditions are resynthesized
    let m = MergeTerm::new(vec![tuple(x.clone(), Cond::truth(), &[0]), tuple(y.clone(), Cond::truth(), &[1, 2])]);
    if let Some(out) = check.step(&mut ctx, "resynthesize", m, Rule::Resynthesize) {
        let (b1, b2) = (out.tuples[0].cond.clone(), out.tuples[1].cond.clone());
        let separated = ctx.eval_cond(&b1, 0) == Some(true)
            && [1, 2].iter().all(|&i| ctx.eval_cond(&b1, i) == Some(false))
            && ctx.eval_cond(&b2, 0) == Some(false)
            && [1, 2].iter().all(|&i| ctx.eval_cond(&b2, i) == Some(true));
        check.expect("resynthesize", separated, || format!("conditions {b1} / {b2}"));
        let prog = ctx.rewrite_merge(out).prog();
        check.expect("resynthesize", prog.paths() == 2 && ctx.passes(&prog, 0..3), || prog.to_string());
    }

    // boolean branches collapse into their condition
    let m = MergeTerm::new(vec![tuple(Expr::True, is("a"), &[0]), tuple(Expr::False, is("a").negate(), &[1])]);
    if let Some(out) = check.step(&mut ctx, "bool true first", m, Rule::BoolTrueFirst) {
        check.expect("bool true first", out.prog() == is("a").to_expr().unwrap(), || out.prog().to_string());
    }
    let m = MergeTerm::new(vec![tuple(Expr::False, is("a"), &[0]), tuple(Expr::True, is("a").negate(), &[1])]);
    if let Some(out) = check.step(&mut ctx, "bool false first", m, Rule::BoolFalseFirst) {
        let want = Expr::call(is("a").to_expr().unwrap(), "!", vec![]);
        check.expect("bool false first", out.prog() == want, || out.prog().to_string());
    }

    // !b1 holds on Ψ2, so b2 becomes !b1
    let m = MergeTerm::new(vec![tuple(x.clone(), is("a"), &[0]), tuple(y.clone(), is("zz"), &[1])]);
    if let Some(out) = check.step(&mut ctx, "negate first", m, Rule::NegateFirst) {
        check.expect("negate first", out.tuples[1].cond == is("a").negate(), || format!("{:?}", out.tuples[1].cond));
        check.expect("negate first", out.prog() == Expr::if_(is("a"), x.clone(), y.clone()), || out.prog().to_string());
    }

    // !b1 fails on Ψ2 but !b2 holds on Ψ1, so b1 becomes !b2
    let m = MergeTerm::new(vec![tuple(x.clone(), is("b"), &[0]), tuple(y.clone(), is("zz"), &[1])]);
    if let Some(out) = check.step(&mut ctx, "negate second", m, Rule::NegateSecond) {
        check.expect("negate second", out.tuples[0].cond == is("zz").negate(), || format!("{:?}", out.tuples[0].cond));
    }
}

/// The overview scenario: the two per-spec solutions start under `true`,
/// so the only way forward is resynthesizing both conditions.
fn overview_resynthesis(failures: &mut Vec<String>) {
    let resolved = read_goal(&goal_path("update_post")).unwrap();
    let cfg = SearchConfig::default();
    let ct = resolved.ct.erase_effects(cfg.precision);
    let goal = &resolved.goal;
    let mut world = resolved.world.clone();
    let mut budget = Budget::new(&cfg);
    let mut tuples = Vec::new();
    for (i, spec) in goal.specs.iter().enumerate() {
        let (out, _) = generate(&goal.params, &goal.ret, &ct, &goal.consts, spec, &mut world, &cfg, &mut budget);
        match out {
            Ok(e) => tuples.push(tuple(e, Cond::truth(), &[i])),
            Err(e) => {
                failures.push(format!("overview resynthesis: spec {i} unsolved ({})", e.reason));
                return;
            }
        }
    }
    let mut ctx = MergeContext::new(
        goal.param_names(),
        goal.params.clone(),
        &ct,
        &goal.consts,
        &goal.specs,
        world,
        &cfg,
        &mut budget,
    );
    let mut check = RuleCheck { failures };
    let m = MergeTerm::new(tuples);
    if let Some(out) = check.step(&mut ctx, "overview resynthesis", m, Rule::Resynthesize) {
        let mut term = out;
        while let Some((_, next)) = ctx.rewrite_step(&term) {
            check.expect("overview resynthesis", next.specs() == term.specs(), || "specs changed".into());
            term = next;
        }
        let prog = term.prog();
        let exists = calls(&prog, "exists?").len();
        check.expect(
            "overview resynthesis",
            prog.count_ifs() == 1 && exists == 1 && ctx.passes(&prog, 0..2),
            || prog.to_string(),
        );
    }
}

fn rewrite_algebra() -> Verdict {
    let mut failures = Vec::new();
    pick_rules(&mut failures);
    overview_resynthesis(&mut failures);
    verdict(
        failures.is_empty(),
        if failures.is_empty() { "chain reading, all seven rewrites and the overview resynthesis".to_string() } else { failures.join("; ") },
    )
}

fn determinism(runs: &mut Runs) -> Verdict {
    let mut bad = Vec::new();
    let done = runs.done.clone();
    for (key, first) in &done {
        let again = runs.execute(key);
        if !first.same_result(&again) {
            bad.push(format!("{} {} {}: {:?} vs {:?}", key.goal, key.mode, key.precision, first, again));
        }
    }
    verdict(
        bad.is_empty(),
        if bad.is_empty() { format!("{} invocations repeated identically", done.len()) } else { bad.join("; ") },
    )
}

fn main() -> std::process::ExitCode {
    let mut runs = Runs::default();
    let criteria: Vec<(&str, Verdict)> = vec![
        ("1 synthetic suite path counts", synthetic_suite(&mut runs)),
        ("2 overview end to end", overview(&mut runs)),
        ("3 guidance ablation", ablation(&mut runs)),
        ("4 effect precision", precision(&mut runs)),
        ("5 postcondition semantics", semantics()),
        ("6 lattice properties", lattice()),
        ("7 rewrite algebra", rewrite_algebra()),
        ("8 determinism", determinism(&mut runs)),
    ];
    for (name, v) in &criteria {
        println!("criterion {name}: {} ({})", if v.ok { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed: Vec<&str> = criteria.iter().filter(|(_, v)| !v.ok).map(|(n, _)| *n).collect();
    if failed.is_empty() {
        println!("all {} criteria passed", criteria.len());
        std::process::ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        std::process::ExitCode::FAILURE
    }
}
