//! Propositional implication between branch conditions. Each distinct
//! atom (up to canonical form) becomes a boolean variable; `true`/`false`
//! literals are constants and `!` calls are negations.

use std::collections::{BTreeSet, HashMap};

use crate::lang::{Cond, Expr};

/// Above this many atoms the truth table is replaced by a SAT search.
pub const TRUTH_TABLE_LIMIT: usize = 20;

#[derive(Debug, Default, Clone)]
pub struct AtomTable {
    ids: HashMap<Expr, usize>,
}

impl AtomTable {
    pub fn new() -> AtomTable {
        AtomTable::default()
    }

    pub fn id(&mut self, e: &Expr) -> usize {
        let next = self.ids.len();
        *self.ids.entry(e.canonical()).or_insert(next)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prop {
    Const(bool),
    Var(usize),
    Not(Box<Prop>),
    Or(Box<Prop>, Box<Prop>),
    And(Box<Prop>, Box<Prop>),
}

impl Prop {
    pub fn eval(&self, assignment: &dyn Fn(usize) -> bool) -> bool {
        match self {
            Prop::Const(b) => *b,
            Prop::Var(v) => assignment(*v),
            Prop::Not(p) => !p.eval(assignment),
            Prop::Or(a, b) => a.eval(assignment) || b.eval(assignment),
            Prop::And(a, b) => a.eval(assignment) && b.eval(assignment),
        }
    }

    fn vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            Prop::Const(_) => {}
            Prop::Var(v) => {
                out.insert(*v);
            }
            Prop::Not(p) => p.vars(out),
            Prop::Or(a, b) | Prop::And(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }

    fn rename(&self, map: &HashMap<usize, usize>) -> Prop {
        match self {
            Prop::Const(b) => Prop::Const(*b),
            Prop::Var(v) => Prop::Var(map[v]),
            Prop::Not(p) => Prop::Not(Box::new(p.rename(map))),
            Prop::Or(a, b) => Prop::Or(Box::new(a.rename(map)), Box::new(b.rename(map))),
            Prop::And(a, b) => Prop::And(Box::new(a.rename(map)), Box::new(b.rename(map))),
        }
    }
}

fn encode_expr(e: &Expr, table: &mut AtomTable) -> Prop {
    match e {
        Expr::True => Prop::Const(true),
        Expr::False | Expr::Nil => Prop::Const(false),
        Expr::Call { recv, method, args } if &**method == "!" && args.is_empty() => {
            Prop::Not(Box::new(encode_expr(recv, table)))
        }
        _ => Prop::Var(table.id(e)),
    }
}

pub fn encode(c: &Cond, table: &mut AtomTable) -> Prop {
    match c {
        Cond::Atom(e) => encode_expr(e, table),
        Cond::Not(c) => Prop::Not(Box::new(encode(c, table))),
        Cond::Or(a, b) => Prop::Or(Box::new(encode(a, table)), Box::new(encode(b, table))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Auto,
    TruthTable,
    Sat,
}

/// Whether `b1 → b2` is valid under the atom encoding.
pub fn implies(b1: &Cond, b2: &Cond) -> bool {
    implies_with(b1, b2, &mut AtomTable::new(), Strategy::Auto)
}

pub fn is_valid(c: &Cond) -> bool {
    implies(&Cond::truth(), c)
}

pub fn implies_with(b1: &Cond, b2: &Cond, table: &mut AtomTable, strategy: Strategy) -> bool {
    let p1 = encode(b1, table);
    let p2 = encode(b2, table);
    // counterexample search: b1 ∧ ¬b2
    let query = Prop::And(Box::new(p1), Box::new(Prop::Not(Box::new(p2))));
    let mut used = BTreeSet::new();
    query.vars(&mut used);
    let dense: HashMap<usize, usize> = used.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let query = query.rename(&dense);
    let n = dense.len();
    let use_table = match strategy {
        Strategy::Auto => n <= TRUTH_TABLE_LIMIT,
        Strategy::TruthTable => true,
        Strategy::Sat => false,
    };
    if use_table {
        !(0u64..1 << n).any(|mask| query.eval(&|v| mask & (1 << v) != 0))
    } else {
        !satisfiable(&query, n)
    }
}

type Clause = Vec<i32>;

struct Tseitin {
    next: i32,
    clauses: Vec<Clause>,
}

impl Tseitin {
    fn fresh(&mut self) -> i32 {
        self.next += 1;
        self.next
    }

    fn gate(&mut self, p: &Prop) -> i32 {
        match p {
            Prop::Const(b) => {
                let x = self.fresh();
                self.clauses.push(vec![if *b { x } else { -x }]);
                x
            }
            Prop::Var(v) => *v as i32 + 1,
            Prop::Not(q) => -self.gate(q),
            Prop::Or(a, b) => {
                let (la, lb) = (self.gate(a), self.gate(b));
                let x = self.fresh();
                self.clauses.push(vec![-x, la, lb]);
                self.clauses.push(vec![x, -la]);
                self.clauses.push(vec![x, -lb]);
                x
            }
            Prop::And(a, b) => {
                let (la, lb) = (self.gate(a), self.gate(b));
                let x = self.fresh();
                self.clauses.push(vec![-x, la]);
                self.clauses.push(vec![-x, lb]);
                self.clauses.push(vec![x, -la, -lb]);
                x
            }
        }
    }
}

fn satisfiable(p: &Prop, atoms: usize) -> bool {
    let mut t = Tseitin {
        next: atoms as i32,
        clauses: Vec::new(),
    };
    let root = t.gate(p);
    t.clauses.push(vec![root]);
    let mut assign = vec![0i8; t.next as usize + 1];
    dpll(&t.clauses, &mut assign)
}

fn lit_value(assign: &[i8], lit: i32) -> i8 {
    let v = assign[lit.unsigned_abs() as usize];
    if lit > 0 {
        v
    } else {
        -v
    }
}

fn dpll(clauses: &[Clause], assign: &mut Vec<i8>) -> bool {
    let saved = assign.clone();
    // unit propagation to fixpoint
    loop {
        let mut changed = false;
        for c in clauses {
            let mut unassigned = None;
            let mut open = 0;
            let mut sat = false;
            for &l in c {
                match lit_value(assign, l) {
                    1 => {
                        sat = true;
                        break;
                    }
                    0 => {
                        open += 1;
                        unassigned = Some(l);
                    }
                    _ => {}
                }
            }
            if sat {
                continue;
            }
            match (open, unassigned) {
                (0, _) => {
                    *assign = saved;
                    return false;
                }
                (1, Some(l)) => {
                    assign[l.unsigned_abs() as usize] = if l > 0 { 1 } else { -1 };
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    let branch = clauses
        .iter()
        .flat_map(|c| c.iter())
        .find(|&&l| lit_value(assign, l) == 0)
        .map(|l| l.unsigned_abs() as usize);
    let Some(var) = branch else {
        return true;
    };
    for value in [1, -1] {
        let before = assign.clone();
        assign[var] = value;
        if dpll(clauses, assign) {
            return true;
        }
        *assign = before;
    }
    *assign = saved;
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(name: &str) -> Cond {
        Cond::atom(Expr::call(Expr::class("Post"), "exists?", vec![Expr::record([(name.into(), Expr::var("arg0"))])]))
    }

    #[test]
    fn reflexive() {
        assert!(implies(&atom("a"), &atom("a")));
    }

    #[test]
    fn weakening_by_disjunction() {
        assert!(implies(&atom("a"), &Cond::or(atom("a"), atom("b"))));
        assert!(!implies(&Cond::or(atom("a"), atom("b")), &atom("a")));
    }

    #[test]
    fn truth_does_not_imply_fresh_atom() {
        assert!(!implies(&Cond::truth(), &atom("b")));
        assert!(implies(&atom("b"), &Cond::truth()));
    }

    #[test]
    fn excluded_middle_is_valid() {
        assert!(is_valid(&Cond::or(atom("a"), atom("a").negate())));
        assert!(!is_valid(&atom("a")));
    }

    #[test]
    fn bang_call_is_negation() {
        let a = atom("a");
        let Cond::Atom(e) = &a else { unreachable!() };
        let bang = Cond::atom(Expr::call(e.clone(), "!", vec![]));
        assert!(implies(&bang, &a.negate()));
        assert!(implies(&a.negate(), &bang));
    }

    #[test]
    fn sat_path_agrees_on_many_atoms() {
        // (a0 ∨ … ∨ a24) ⇐ a7, and not conversely
        let atoms: Vec<Cond> = (0..25).map(|i| atom(&format!("k{i}"))).collect();
        let big = atoms[1..].iter().cloned().fold(atoms[0].clone(), Cond::or);
        assert!(implies(&atoms[7], &big));
        assert!(!implies(&big, &atoms[7]));
        assert!(implies(&big, &big));
    }
}
