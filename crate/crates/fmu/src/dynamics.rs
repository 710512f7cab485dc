//! Deterministic left-to-right call-by-value small-step semantics, with
//! classification of unroll-roll steps, bounded evaluation, reachability
//! checking, and the recursive-function encoding.
//!
//! The stepper works on open terms: free term variables listed in the
//! `value_vars` set are treated as opaque values (the value grammar includes
//! variables). Terms whose next step would need to inspect such a variable
//! are reported as symbolically stuck.

use crate::syntax::{fresh_name, PrimOp, Term, TmVar, Type};
use crate::verdict::Verdict;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleTag {
    IfTrue,
    IfFalse,
    FstPair,
    SndPair,
    CaseInl,
    CaseInr,
    Beta,
    TypeBeta,
    UnpackPack,
    UnfoldFold,
    Delta,
}

impl RuleTag {
    pub fn name(self) -> &'static str {
        match self {
            RuleTag::IfTrue => "if-true",
            RuleTag::IfFalse => "if-false",
            RuleTag::FstPair => "fst-pair",
            RuleTag::SndPair => "snd-pair",
            RuleTag::CaseInl => "case-inl",
            RuleTag::CaseInr => "case-inr",
            RuleTag::Beta => "beta",
            RuleTag::TypeBeta => "type-beta",
            RuleTag::UnpackPack => "unpack-pack",
            RuleTag::UnfoldFold => "unfold-fold",
            RuleTag::Delta => "delta",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub pre: Term,
    pub post: Term,
    pub rule: RuleTag,
    pub is_unroll: bool,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum StepError {
    #[error("term has free term variables not declared as values: {0:?}")]
    Closedness(Vec<String>),
}

enum StepResult {
    Stepped(Term, RuleTag),
    Value,
    /// Would need the shape of a symbolic value variable.
    SymbolicStuck,
    /// Genuinely stuck (ill-typed term).
    Stuck,
}

fn step_inner(e: &Term, vals: &BTreeSet<TmVar>) -> StepResult {
    use StepResult::*;
    if e.is_value_with(vals) {
        return Value;
    }
    macro_rules! ctx1 {
        ($sub:expr, $wrap:expr) => {
            match step_inner($sub, vals) {
                Stepped(t, r) => return Stepped($wrap(t), r),
                Value => {}
                other => return other,
            }
        };
    }
    match e {
        Term::Var(_) | Term::Unit | Term::Int(_) | Term::True | Term::False => Value,
        Term::Lam(..) | Term::TLam(..) => Value,
        Term::Prim(op, args) => {
            let mut new_args = args.clone();
            for (i, a) in args.iter().enumerate() {
                if !a.is_value_with(vals) {
                    match step_inner(a, vals) {
                        Stepped(t, r) => {
                            new_args[i] = t;
                            return Stepped(Term::Prim(*op, new_args), r);
                        }
                        Value => unreachable!(),
                        other => return other,
                    }
                }
            }
            // all arguments are values: delta-reduce
            let mut ints = Vec::new();
            for a in args {
                match a {
                    Term::Int(n) => ints.push(n.clone()),
                    Term::Var(_) => return SymbolicStuck,
                    _ => return Stuck,
                }
            }
            let out = match op {
                PrimOp::Add => Term::Int(&ints[0] + &ints[1]),
                PrimOp::Sub => Term::Int(&ints[0] - &ints[1]),
                PrimOp::Eq => bool_term(ints[0] == ints[1]),
                PrimOp::Lt => bool_term(ints[0] < ints[1]),
                PrimOp::Le => bool_term(ints[0] <= ints[1]),
            };
            Stepped(out, RuleTag::Delta)
        }
        Term::If(c, a, b) => {
            if !c.is_value_with(vals) {
                ctx1!(c, |t| Term::If(Box::new(t), a.clone(), b.clone()));
                unreachable!()
            } else {
                match &**c {
                    Term::True => Stepped((**a).clone(), RuleTag::IfTrue),
                    Term::False => Stepped((**b).clone(), RuleTag::IfFalse),
                    Term::Var(_) => SymbolicStuck,
                    _ => Stuck,
                }
            }
        }
        Term::Pair(a, b) => {
            if !a.is_value_with(vals) {
                ctx1!(a, |t| Term::Pair(Box::new(t), b.clone()));
                unreachable!()
            } else {
                ctx1!(b, |t| Term::Pair(a.clone(), Box::new(t)));
                Value
            }
        }
        Term::Fst(p) => {
            if !p.is_value_with(vals) {
                ctx1!(p, |t| Term::Fst(Box::new(t)));
                unreachable!()
            } else {
                match &**p {
                    Term::Pair(a, _) => Stepped((**a).clone(), RuleTag::FstPair),
                    Term::Var(_) => SymbolicStuck,
                    _ => Stuck,
                }
            }
        }
        Term::Snd(p) => {
            if !p.is_value_with(vals) {
                ctx1!(p, |t| Term::Snd(Box::new(t)));
                unreachable!()
            } else {
                match &**p {
                    Term::Pair(_, b) => Stepped((**b).clone(), RuleTag::SndPair),
                    Term::Var(_) => SymbolicStuck,
                    _ => Stuck,
                }
            }
        }
        Term::Inl(t, a) => {
            ctx1!(a, |x| Term::Inl(t.clone(), Box::new(x)));
            Value
        }
        Term::Inr(t, a) => {
            ctx1!(a, |x| Term::Inr(t.clone(), Box::new(x)));
            Value
        }
        Term::Case(s, x1, e1, x2, e2) => {
            if !s.is_value_with(vals) {
                ctx1!(s, |t| Term::Case(
                    Box::new(t),
                    x1.clone(),
                    e1.clone(),
                    x2.clone(),
                    e2.clone()
                ));
                unreachable!()
            } else {
                match &**s {
                    Term::Inl(_, v) => Stepped(e1.subst(x1, v), RuleTag::CaseInl),
                    Term::Inr(_, v) => Stepped(e2.subst(x2, v), RuleTag::CaseInr),
                    Term::Var(_) => SymbolicStuck,
                    _ => Stuck,
                }
            }
        }
        Term::App(f, a) => {
            if !f.is_value_with(vals) {
                ctx1!(f, |t| Term::App(Box::new(t), a.clone()));
                unreachable!()
            } else if !a.is_value_with(vals) {
                ctx1!(a, |t| Term::App(f.clone(), Box::new(t)));
                unreachable!()
            } else {
                match &**f {
                    Term::Lam(x, _, body) => Stepped(body.subst(x, a), RuleTag::Beta),
                    Term::Var(_) => SymbolicStuck,
                    _ => Stuck,
                }
            }
        }
        Term::TApp(f, ty) => {
            if !f.is_value_with(vals) {
                ctx1!(f, |t| Term::TApp(Box::new(t), ty.clone()));
                unreachable!()
            } else {
                match &**f {
                    Term::TLam(a, body) => Stepped(body.subst_ty(a, ty), RuleTag::TypeBeta),
                    Term::Var(_) => SymbolicStuck,
                    _ => Stuck,
                }
            }
        }
        Term::Pack(t1, a, t2) => {
            ctx1!(a, |x| Term::Pack(t1.clone(), Box::new(x), t2.clone()));
            Value
        }
        Term::Unpack(e1, alpha, x, e2) => {
            if !e1.is_value_with(vals) {
                ctx1!(e1, |t| Term::Unpack(
                    Box::new(t),
                    alpha.clone(),
                    x.clone(),
                    e2.clone()
                ));
                unreachable!()
            } else {
                match &**e1 {
                    Term::Pack(wit, v, _) => {
                        Stepped(e2.subst(x, v).subst_ty(alpha, wit), RuleTag::UnpackPack)
                    }
                    Term::Var(_) => SymbolicStuck,
                    _ => Stuck,
                }
            }
        }
        Term::Fold(t, a) => {
            ctx1!(a, |x| Term::Fold(t.clone(), Box::new(x)));
            Value
        }
        Term::Unfold(a) => {
            if !a.is_value_with(vals) {
                ctx1!(a, |t| Term::Unfold(Box::new(t)));
                unreachable!()
            } else {
                match &**a {
                    Term::Fold(_, v) => Stepped((**v).clone(), RuleTag::UnfoldFold),
                    Term::Var(_) => SymbolicStuck,
                    _ => Stuck,
                }
            }
        }
    }
}

/// One step of the closed-term reduction relation. `None` when `e` is a
/// value or stuck.
pub fn step(e: &Term) -> Result<Option<StepRecord>, StepError> {
    let fv = e.free_term_vars();
    if !fv.is_empty() {
        return Err(StepError::Closedness(fv.into_iter().collect()));
    }
    Ok(step_with(e, &BTreeSet::new()))
}

/// One step where the variables in `vals` are treated as opaque values.
/// Returns `None` for values, stuck terms, and symbolically stuck terms.
pub fn step_with(e: &Term, vals: &BTreeSet<TmVar>) -> Option<StepRecord> {
    match step_inner(e, vals) {
        StepResult::Stepped(post, rule) => Some(StepRecord {
            pre: e.clone(),
            post,
            rule,
            is_unroll: rule == RuleTag::UnfoldFold,
        }),
        _ => None,
    }
}

/// Distinguishes why `step_with` returned `None`.
pub fn classify_normal_form(e: &Term, vals: &BTreeSet<TmVar>) -> NormalForm {
    match step_inner(e, vals) {
        StepResult::Stepped(..) => NormalForm::Reducible,
        StepResult::Value => NormalForm::Value,
        StepResult::SymbolicStuck => NormalForm::SymbolicStuck,
        StepResult::Stuck => NormalForm::Stuck,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalForm {
    Reducible,
    Value,
    SymbolicStuck,
    Stuck,
}

fn bool_term(b: bool) -> Term {
    if b {
        Term::True
    } else {
        Term::False
    }
}

#[derive(Debug, Clone)]
pub enum EvalOutcome {
    Value(Term, Vec<StepRecord>),
    FuelExhausted(Term, Vec<StepRecord>),
    Stuck(Term, Vec<StepRecord>),
}

impl EvalOutcome {
    pub fn trace(&self) -> &[StepRecord] {
        match self {
            EvalOutcome::Value(_, t) | EvalOutcome::FuelExhausted(_, t) | EvalOutcome::Stuck(_, t) => t,
        }
    }

    pub fn unroll_count(&self) -> usize {
        self.trace().iter().filter(|r| r.is_unroll).count()
    }

    pub fn final_term(&self) -> &Term {
        match self {
            EvalOutcome::Value(t, _) | EvalOutcome::FuelExhausted(t, _) | EvalOutcome::Stuck(t, _) => t,
        }
    }
}

/// Iterates `step` at most `fuel` times, recording the full trace.
pub fn eval(e: &Term, fuel: usize) -> Result<EvalOutcome, StepError> {
    let fv = e.free_term_vars();
    if !fv.is_empty() {
        return Err(StepError::Closedness(fv.into_iter().collect()));
    }
    let vals = BTreeSet::new();
    let mut cur = e.clone();
    let mut trace = Vec::new();
    for _ in 0..fuel {
        match step_inner(&cur, &vals) {
            StepResult::Stepped(post, rule) => {
                trace.push(StepRecord {
                    pre: cur.clone(),
                    post: post.clone(),
                    rule,
                    is_unroll: rule == RuleTag::UnfoldFold,
                });
                cur = post;
            }
            StepResult::Value => return Ok(EvalOutcome::Value(cur, trace)),
            _ => return Ok(EvalOutcome::Stuck(cur, trace)),
        }
    }
    if cur.is_value() {
        Ok(EvalOutcome::Value(cur, trace))
    } else {
        Ok(EvalOutcome::FuelExhausted(cur, trace))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReachMode {
    /// `e1 ~>* e2`
    Any,
    /// `e1 ~>0 e2`: no unroll-roll step on the prefix
    ZeroUnroll,
    /// `e1 ~>1 e2`: exactly one unroll-roll step on the prefix
    OneUnroll,
}

/// Does the deterministic trace from `e1` pass through a term alpha-equal to
/// `e2`, with the mode's unroll-count constraint on that prefix?
///
/// Cycle detection makes divergence a definite `Refuted`: a revisited state
/// proves the trace's remaining states have all been seen.
pub fn reaches(e1: &Term, e2: &Term, fuel: usize, mode: ReachMode) -> Verdict {
    reaches_with(e1, e2, fuel, mode, &BTreeSet::new())
}

/// As [`reaches`], treating the variables in `vals` as opaque values.
pub fn reaches_with(
    e1: &Term,
    e2: &Term,
    fuel: usize,
    mode: ReachMode,
    vals: &BTreeSet<TmVar>,
) -> Verdict {
    let target = e2.canonical();
    let mut cur = e1.clone();
    let mut unrolls: usize = 0;
    let mut seen: BTreeSet<Term> = BTreeSet::new();
    for used in 0..=fuel {
        let canon = cur.canonical();
        let mode_ok = match mode {
            ReachMode::Any => true,
            ReachMode::ZeroUnroll => unrolls == 0,
            ReachMode::OneUnroll => unrolls == 1,
        };
        if canon == target && mode_ok {
            return Verdict::holds(format!("reached after {used} steps, {unrolls} unrolls"));
        }
        // Once the unroll count exceeds the mode's budget no future state can
        // satisfy it.
        match mode {
            ReachMode::ZeroUnroll if unrolls > 0 => {
                return Verdict::refuted(format!(
                    "unroll-roll step occurred before reaching target (at step {used})"
                ));
            }
            ReachMode::OneUnroll if unrolls > 1 => {
                return Verdict::refuted("second unroll-roll step before reaching target".to_string());
            }
            _ => {}
        }
        if !seen.insert(canon) {
            return Verdict::refuted("revisited state: term diverges without reaching target".to_string());
        }
        match step_inner(&cur, vals) {
            StepResult::Stepped(post, rule) => {
                if rule == RuleTag::UnfoldFold {
                    unrolls += 1;
                }
                cur = post;
            }
            StepResult::Value => {
                return Verdict::refuted(format!("evaluated to value {cur} without reaching target"));
            }
            StepResult::SymbolicStuck => {
                return Verdict::unknown(format!("symbolically stuck at {cur}"));
            }
            StepResult::Stuck => {
                return Verdict::refuted(format!("stuck at {cur} without reaching target"));
            }
        }
    }
    Verdict::unknown(format!("fuel exhausted after {fuel} steps"))
}

/// The recursive-function encoding
/// `fix f(x).e = \y.(unfold v) v y` with
/// `v = fold (\z.(\f.\x.e)(\y.(unfold z) z y))`,
/// typed so that the result has type `arg_ty -> res_ty`.
///
/// If `F = mk_fix(f, x, t', t'', e)` then `F v ~>1 e[F/f, v/x]`.
pub fn mk_fix(f: &str, x: &str, arg_ty: &Type, res_ty: &Type, body: &Term) -> Term {
    let fun_ty = Type::Fun(Box::new(arg_ty.clone()), Box::new(res_ty.clone()));
    // sigma = mu a. a -> arg_ty -> res_ty
    let mut avoid: BTreeSet<String> = arg_ty.free_vars();
    avoid.extend(res_ty.free_vars());
    let alpha = fresh_name("a", &avoid);
    let sigma = Type::Rec(
        alpha.clone(),
        Box::new(Type::Fun(Box::new(Type::Var(alpha)), Box::new(fun_ty.clone()))),
    );
    let mut avoid_tm: BTreeSet<String> = body.all_term_names();
    avoid_tm.insert(f.to_string());
    avoid_tm.insert(x.to_string());
    let y = fresh_name("y", &avoid_tm);
    avoid_tm.insert(y.clone());
    let y_inner = fresh_name("y", &avoid_tm);
    avoid_tm.insert(y_inner.clone());
    let z = fresh_name("z", &avoid_tm);

    // \y:arg_ty. (unfold w) w y  for a given w
    let dispatch = |name: &str, w: Term| -> Term {
        Term::Lam(
            name.to_string(),
            arg_ty.clone(),
            Box::new(Term::App(
                Box::new(Term::App(
                    Box::new(Term::Unfold(Box::new(w.clone()))),
                    Box::new(w),
                )),
                Box::new(Term::Var(name.to_string())),
            )),
        )
    };
    // \f.\x.e
    let abstracted = Term::Lam(
        f.to_string(),
        fun_ty,
        Box::new(Term::Lam(x.to_string(), arg_ty.clone(), Box::new(body.clone()))),
    );
    // v = fold (\z:sigma. (\f.\x.e) (\y.(unfold z) z y))
    let v = Term::Fold(
        sigma.clone(),
        Box::new(Term::Lam(
            z.clone(),
            sigma,
            Box::new(Term::App(
                Box::new(abstracted),
                Box::new(dispatch(&y_inner, Term::Var(z.clone()))),
            )),
        )),
    );
    dispatch(&y, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_term;
    use crate::statics::{typecheck, TypingCtx};
    use crate::syntax::{int, tm_var};

    fn run(src: &str) -> Term {
        let e = parse_term(src).unwrap();
        match eval(&e, 10_000).unwrap() {
            EvalOutcome::Value(v, _) => v,
            other => panic!("expected value, got {other:?}"),
        }
    }

    #[test]
    fn fst_of_pair_steps_without_unroll() {
        let e = parse_term("<<>, 0>.1").unwrap();
        let r = step(&e).unwrap().unwrap();
        assert_eq!(r.post, Term::Unit);
        assert!(!r.is_unroll);
    }

    #[test]
    fn unfold_fold_counts_unroll() {
        let e = parse_term("unfold (fold[mu a. unit] <>)").unwrap();
        let r = step(&e).unwrap().unwrap();
        assert_eq!(r.post, Term::Unit);
        assert!(r.is_unroll);
    }

    #[test]
    fn values_do_not_step() {
        assert!(step(&Term::True).unwrap().is_none());
    }

    #[test]
    fn beta_eval() {
        assert_eq!(run("(fun (x:int) => x) 5"), int(5));
    }

    #[test]
    fn arith() {
        assert_eq!(run("2 + 3"), int(5));
        assert_eq!(run("2 - 3"), int(-1));
        assert_eq!(run("2 < 3"), Term::True);
        assert_eq!(run("3 <= 2"), Term::False);
        assert_eq!(run("3 = 3"), Term::True);
    }

    /// The canonical diverging term at type unit.
    pub fn omega() -> Term {
        // w = fold[mu a. a -> unit] (fun (x: mu a. a -> unit) => (unfold x) x)
        // omega = (unfold w) w
        let mu = Type::Rec("a".into(), Box::new(Type::Fun(Box::new(Type::Var("a".into())), Box::new(Type::Unit))));
        let w = Term::Fold(
            mu.clone(),
            Box::new(Term::Lam(
                "x".into(),
                mu,
                Box::new(Term::App(
                    Box::new(Term::Unfold(Box::new(tm_var("x")))),
                    Box::new(tm_var("x")),
                )),
            )),
        );
        Term::App(Box::new(Term::Unfold(Box::new(w.clone()))), Box::new(w))
    }

    #[test]
    fn omega_typechecks_and_diverges() {
        let om = omega();
        assert_eq!(typecheck(&TypingCtx::empty(), &om).unwrap(), Type::Unit);
        let v = reaches(&om, &Term::Unit, 1000, ReachMode::Any);
        assert!(v.is_refuted(), "expected cycle-detected refutation, got {v}");
    }

    #[test]
    fn fix_reaches_body_with_one_unroll() {
        // F = fix f(x:int): int. if x <= 0 then 0 else f (x - 1)
        let body = parse_term("if x <= 0 then 0 else f (x - 1)").unwrap();
        let fx = mk_fix("f", "x", &Type::Int, &Type::Int, &body);
        assert_eq!(
            typecheck(&TypingCtx::empty(), &fx).unwrap(),
            Type::Fun(Box::new(Type::Int), Box::new(Type::Int))
        );
        // F 2 ~>1 body[F/f, 2/x]
        let applied = Term::App(Box::new(fx.clone()), Box::new(int(2)));
        let expect = body.subst("f", &fx).subst("x", &int(2));
        let v = reaches(&applied, &expect, 100, ReachMode::OneUnroll);
        assert!(v.is_holds(), "got {v}");
        // and F 2 evaluates to 0 with 3 unrolls total
        match eval(&applied, 1000).unwrap() {
            EvalOutcome::Value(v, _) => assert_eq!(v, int(0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fuel_exhaustion_reported() {
        let body = parse_term("f x").unwrap();
        let fx = mk_fix("f", "x", &Type::Unit, &Type::Unit, &body);
        let applied = Term::App(Box::new(fx), Box::new(Term::Unit));
        match eval(&applied, 100).unwrap() {
            EvalOutcome::FuelExhausted(..) => {}
            other => panic!("expected fuel exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn reaches_modes() {
        let two_plus_three = parse_term("2 + 3").unwrap();
        assert!(reaches(&two_plus_three, &int(5), 10, ReachMode::Any).is_holds());
        assert!(reaches(&two_plus_three, &int(5), 10, ReachMode::ZeroUnroll).is_holds());
        let unroll = parse_term("unfold (fold[mu a. unit] <>)").unwrap();
        assert!(reaches(&unroll, &Term::Unit, 10, ReachMode::ZeroUnroll).is_refuted());
        assert!(reaches(&unroll, &Term::Unit, 10, ReachMode::OneUnroll).is_holds());
    }

    #[test]
    fn symbolic_stepping_treats_vars_as_values() {
        let mut vals = BTreeSet::new();
        vals.insert("v".to_string());
        let e = parse_term("(fun (x:int) => x + 1) v").unwrap();
        let r = step_with(&e, &vals).unwrap();
        assert_eq!(r.post, parse_term("v + 1").unwrap());
        // v + 1 is symbolically stuck
        assert_eq!(classify_normal_form(&r.post, &vals), NormalForm::SymbolicStuck);
    }
}
