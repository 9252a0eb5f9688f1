//! Effect holes: wrapping failed candidates and filling the holes with
//! calls whose write effects cover the required read.

use crate::lang::{ClassTable, Effect, EffectPair, Expr, MethodSig, Type};
use crate::typegen::{leftmost_hole, typecheck, ExpandOptions, TypeEnv};

/// Wraps a candidate whose assertion failed with effects `failed`:
/// `let t = e in (□:read; •:ty)`.
pub fn wrap_effect_hole(e: &Expr, failed: &EffectPair, ty: Type) -> Expr {
    let tmp = format!("t{}", e.let_count());
    let mut out = Expr::let_(
        &tmp,
        e.clone(),
        Expr::seq(Expr::eff_hole(failed.read.clone()), Expr::hole(ty)),
    );
    out.renumber_holes();
    out
}

/// Method signatures whose write effect covers `needed`, most specific
/// writes first.
pub fn covering_methods<'a>(ct: &'a ClassTable, needed: &Effect, opts: ExpandOptions) -> Vec<(&'a MethodSig, EffectPair)> {
    let mut sigs: Vec<_> = ct
        .methods()
        .filter(|sig| !sig.owner.is_nil())
        .map(|sig| (sig, sig.resolved_eff(ct)))
        .filter(|(_, eff)| {
            if !opts.check_effects {
                return true;
            }
            !eff.write.is_pure() && needed.subsumed_by(&eff.write, ct)
        })
        .collect();
    sigs.sort_by(|(a, ea), (b, eb)| {
        eb.write
            .specificity()
            .cmp(&ea.write.specificity())
            .then_with(|| a.owner.cmp(&b.owner))
            .then_with(|| a.name.cmp(&b.name))
    });
    sigs
}

/// Rewrites the leftmost hole, which must be an effect hole. The first
/// result always drops the hole; the rest call a method that may produce
/// the needed effect, preceded by a fresh effect hole for the method's own
/// read effect when it has one.
pub fn expand_effect_hole(env: &TypeEnv, ct: &ClassTable, e: &Expr, opts: ExpandOptions) -> Vec<Expr> {
    let mut e = e.clone();
    e.renumber_holes();
    let Some(Expr::EffHole(id, needed)) = leftmost_hole(&e).cloned() else {
        return Vec::new();
    };
    let mut fillers = vec![Expr::Nil];
    if !(opts.check_effects && needed.is_pure()) {
        for (sig, eff) in covering_methods(ct, &needed, opts) {
            let call = Expr::Call {
                recv: Box::new(Expr::hole(sig.owner.clone())),
                method: sig.name.clone(),
                args: sig.params.iter().cloned().map(Expr::hole).collect(),
            };
            fillers.push(if eff.read.is_pure() {
                call
            } else {
                Expr::seq(Expr::eff_hole(eff.read), call)
            });
        }
    }
    fillers
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
