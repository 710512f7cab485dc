//! Derived notation, definable in terms of the core syntax. Every builder
//! here fixes one canonical shape; the kernel and tactics pattern-match on
//! these shapes, so all construction must go through them.

use crate::rel::{and, ciu_le, eq_tm, has_type, imp, is_val, mem2, steps, steps0, RelExpr, RelVar};
use fmu::syntax::fresh_name;
use fmu::{Term, Type};
use std::collections::BTreeSet;

/// `e : t /\ e in Val`
pub fn down(e: Term, t: Type) -> RelExpr {
    and(has_type(e.clone(), t), is_val(e))
}

/// `e1 ~>* e2 /\ e2 in Val` (big-step `e1 v e2`)
pub fn bsteps(e1: Term, e2: Term) -> RelExpr {
    and(steps(e1, e2.clone()), is_val(e2))
}

/// `e1 ~>0 e2 /\ e2 in Val`
pub fn bsteps0(e1: Term, e2: Term) -> RelExpr {
    and(steps0(e1, e2.clone()), is_val(e2))
}

/// `exists v. e ~>* v /\ v in Val` (termination)
pub fn terminates(e: Term, avoid: &BTreeSet<String>) -> RelExpr {
    let v = fresh_name("v", avoid);
    RelExpr::ExTerm(v.clone(), Box::new(bsteps(e, Term::Var(v))))
}

/// `R : TRel(t1, t2)`:
/// `forall x1 x2. (x1,x2) in R => x1:t1 /\ x2:t2`
pub fn trel_of(r: RelExpr, t1: Type, t2: Type) -> RelExpr {
    let avoid = binder_avoid(&r);
    let x1 = fresh_name("x1", &avoid);
    let x2 = fresh_name("x2", &avoid);
    RelExpr::AllTerm(
        x1.clone(),
        Box::new(RelExpr::AllTerm(
            x2.clone(),
            Box::new(imp(
                mem2(Term::Var(x1.clone()), Term::Var(x2.clone()), r),
                and(has_type(Term::Var(x1), t1), has_type(Term::Var(x2), t2)),
            )),
        )),
    )
}

/// `R : VRel(t1, t2)`:
/// `forall x1 x2. (x1,x2) in R => x1 down t1 /\ x2 down t2`
pub fn vrel_of(r: RelExpr, t1: Type, t2: Type) -> RelExpr {
    let avoid = binder_avoid(&r);
    let x1 = fresh_name("x1", &avoid);
    let x2 = fresh_name("x2", &avoid);
    RelExpr::AllTerm(
        x1.clone(),
        Box::new(RelExpr::AllTerm(
            x2.clone(),
            Box::new(imp(
                mem2(Term::Var(x1.clone()), Term::Var(x2.clone()), r),
                and(down(Term::Var(x1), t1), down(Term::Var(x2), t2)),
            )),
        )),
    )
}

/// Relation equivalence, a defined macro:
/// `R1 == R2  :=  forall xs. (xs in R1 => xs in R2) /\ (xs in R2 => xs in R1)`
pub fn rel_equiv(r1: &RelExpr, r2: &RelExpr, arity: usize) -> RelExpr {
    let mut avoid = binder_avoid(r1);
    avoid.extend(binder_avoid(r2));
    let mut names = Vec::new();
    for i in 0..arity {
        let n = fresh_name(&format!("x{}", i + 1), &avoid);
        avoid.insert(n.clone());
        names.push(n);
    }
    let tuple: Vec<Term> = names.iter().map(|n| Term::Var(n.clone())).collect();
    let fwd = imp(
        RelExpr::Mem(tuple.clone(), Box::new(r1.clone())),
        RelExpr::Mem(tuple.clone(), Box::new(r2.clone())),
    );
    let bwd = imp(
        RelExpr::Mem(tuple.clone(), Box::new(r2.clone())),
        RelExpr::Mem(tuple, Box::new(r1.clone())),
    );
    let mut body = and(fwd, bwd);
    for n in names.into_iter().rev() {
        body = RelExpr::AllTerm(n, Box::new(body));
    }
    body
}

/// `total(f) := forall x. x down t => exists y. f x v y`
pub fn total(f: Term, arg_ty: Type) -> RelExpr {
    let mut avoid: BTreeSet<String> = f.free_term_vars();
    avoid.extend(f.all_term_names());
    let x = fresh_name("x", &avoid);
    avoid.insert(x.clone());
    let y = fresh_name("y", &avoid);
    RelExpr::AllTerm(
        x.clone(),
        Box::new(imp(
            down(Term::Var(x.clone()), arg_ty),
            RelExpr::ExTerm(
                y.clone(),
                Box::new(bsteps(
                    Term::App(Box::new(f), Box::new(Term::Var(x))),
                    Term::Var(y),
                )),
            ),
        )),
    )
}

/// The value-abstraction sugar `(x1 down t1, x2 down t2). P`:
/// `(x1,x2). x1 down t1 /\ x2 down t2 /\ P`.
pub fn vguard_abs(x1: &str, t1: Type, x2: &str, t2: Type, body: RelExpr) -> RelExpr {
    RelExpr::Abs(
        vec![x1.to_string(), x2.to_string()],
        Box::new(and(
            down(Term::Var(x1.to_string()), t1),
            and(down(Term::Var(x2.to_string()), t2), body),
        )),
    )
}

/// The term-abstraction sugar `(t1v: t1, t2v: t2). P`:
/// `(t1v,t2v). t1v:t1 /\ t2v:t2 /\ P`.
pub fn tguard_abs(x1: &str, t1: Type, x2: &str, t2: Type, body: RelExpr) -> RelExpr {
    RelExpr::Abs(
        vec![x1.to_string(), x2.to_string()],
        Box::new(and(
            has_type(Term::Var(x1.to_string()), t1),
            and(has_type(Term::Var(x2.to_string()), t2), body),
        )),
    )
}

/// Names to avoid when inventing binders around `r`: every variable
/// mentioned anywhere in it.
pub fn binder_avoid(r: &RelExpr) -> BTreeSet<String> {
    let mut out = r.free_term_vars();
    out.extend(r.free_type_vars());
    for v in r.free_rel_vars() {
        out.insert(v.name);
    }
    // also avoid names bound inside, to keep shapes readable
    collect_bound(r, &mut out);
    out
}

fn collect_bound(r: &RelExpr, out: &mut BTreeSet<String>) {
    match r {
        RelExpr::Var(_) | RelExpr::Atomic(_) | RelExpr::Top | RelExpr::Bot => {}
        RelExpr::And(a, b) | RelExpr::Or(a, b) | RelExpr::Imp(a, b) => {
            collect_bound(a, out);
            collect_bound(b, out);
        }
        RelExpr::AllTerm(x, p) | RelExpr::ExTerm(x, p) => {
            out.insert(x.clone());
            collect_bound(p, out);
        }
        RelExpr::AllType(a, p) | RelExpr::ExType(a, p) => {
            out.insert(a.clone());
            collect_bound(p, out);
        }
        RelExpr::AllRel(v, p) | RelExpr::ExRel(v, p) | RelExpr::Mu(v, p) => {
            out.insert(v.name.clone());
            collect_bound(p, out);
        }
        RelExpr::Abs(xs, p) => {
            out.extend(xs.iter().cloned());
            collect_bound(p, out);
        }
        RelExpr::Mem(_, p) | RelExpr::Later(p) => collect_bound(p, out),
    }
}

/// Canonical-forms disjunction for a value `y` of type `t` (the type's head
/// constructor must be concrete). Shapes here are what the kernel's
/// canonical-forms validator accepts.
pub fn canonical_forms_prop(y: &Term, t: &Type) -> Option<RelExpr> {
    let mut avoid: BTreeSet<String> = y.free_term_vars();
    avoid.extend(y.all_term_names());
    match t {
        Type::Unit => Some(eq_tm(y.clone(), Term::Unit)),
        Type::Bool => Some(crate::rel::or(
            eq_tm(y.clone(), Term::True),
            eq_tm(y.clone(), Term::False),
        )),
        Type::Pair(t1, t2) => {
            let z1 = fresh_name("z1", &avoid);
            avoid.insert(z1.clone());
            let z2 = fresh_name("z2", &avoid);
            Some(RelExpr::ExTerm(
                z1.clone(),
                Box::new(RelExpr::ExTerm(
                    z2.clone(),
                    Box::new(and(
                        eq_tm(
                            y.clone(),
                            Term::Pair(
                                Box::new(Term::Var(z1.clone())),
                                Box::new(Term::Var(z2.clone())),
                            ),
                        ),
                        and(
                            down(Term::Var(z1), (**t1).clone()),
                            down(Term::Var(z2), (**t2).clone()),
                        ),
                    )),
                )),
            ))
        }
        Type::Sum(t1, t2) => {
            let z = fresh_name("z", &avoid);
            let sum = t.clone();
            let left = RelExpr::ExTerm(
                z.clone(),
                Box::new(and(
                    eq_tm(
                        y.clone(),
                        Term::Inl(sum.clone(), Box::new(Term::Var(z.clone()))),
                    ),
                    down(Term::Var(z.clone()), (**t1).clone()),
                )),
            );
            let right = RelExpr::ExTerm(
                z.clone(),
                Box::new(and(
                    eq_tm(y.clone(), Term::Inr(sum, Box::new(Term::Var(z.clone())))),
                    down(Term::Var(z), (**t2).clone()),
                )),
            );
            Some(crate::rel::or(left, right))
        }
        Type::Rec(a, body) => {
            let z = fresh_name("z", &avoid);
            let unrolled = body.subst(a, t);
            Some(RelExpr::ExTerm(
                z.clone(),
                Box::new(and(
                    eq_tm(y.clone(), Term::Fold(t.clone(), Box::new(Term::Var(z.clone())))),
                    down(Term::Var(z), unrolled),
                )),
            ))
        }
        _ => None,
    }
}

/// `e1 <=_1 e2 := (d = true => e2 ~>* e1) /\ (d = false => e1 <= e2)`
pub fn ciu_le1(d: &Term, e1: Term, e2: Term) -> RelExpr {
    and(
        imp(eq_tm(d.clone(), Term::True), steps(e2.clone(), e1.clone())),
        imp(eq_tm(d.clone(), Term::False), ciu_le(e1, e2)),
    )
}

/// `e1 <=_2 e2 := (d = true => e1 <= e2) /\ (d = false => e2 ~>* e1)`
pub fn ciu_le2(d: &Term, e1: Term, e2: Term) -> RelExpr {
    and(
        imp(eq_tm(d.clone(), Term::True), ciu_le(e1.clone(), e2.clone())),
        imp(eq_tm(d.clone(), Term::False), steps(e2, e1)),
    )
}

/// Splits the canonical right-nested `A /\ (B /\ C)` produced by the guard
/// builders; plain accessor used by tactics.
pub fn split_and(p: &RelExpr) -> Option<(&RelExpr, &RelExpr)> {
    match p {
        RelExpr::And(a, b) => Some((a, b)),
        _ => None,
    }
}

pub fn fresh_rel_var(base: &str, arity: usize, avoid: &BTreeSet<String>) -> RelVar {
    RelVar::new(fresh_name(base, avoid), arity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rel::{rel_wf, LogicCtx};
    use fmu::syntax::tm_var;

    #[test]
    fn vrel_macro_is_wf_prop() {
        let r = RelExpr::Abs(
            vec!["a".into(), "b".into()],
            Box::new(eq_tm(tm_var("a"), tm_var("b"))),
        );
        let p = vrel_of(r, Type::Int, Type::Int);
        assert_eq!(rel_wf(&LogicCtx::empty(), &p), Ok(0));
    }

    #[test]
    fn rel_equiv_expands_to_forall() {
        let r1 = RelExpr::Abs(
            vec!["a".into(), "b".into()],
            Box::new(eq_tm(tm_var("a"), tm_var("b"))),
        );
        let p = rel_equiv(&r1, &r1, 2);
        assert_eq!(rel_wf(&LogicCtx::empty(), &p), Ok(0));
        assert!(matches!(p, RelExpr::AllTerm(..)));
    }

    #[test]
    fn canonical_forms_shapes() {
        let y = tm_var("y");
        assert!(canonical_forms_prop(&y, &Type::Bool).is_some());
        assert!(canonical_forms_prop(&y, &Type::Int).is_none());
        let rec = Type::Rec("a".into(), Box::new(Type::Sum(Box::new(Type::Unit), Box::new(Type::Var("a".into())))));
        let p = canonical_forms_prop(&y, &rec).unwrap();
        let ctx = LogicCtx::empty().with_term_var("y");
        assert_eq!(rel_wf(&ctx, &p), Ok(0));
    }
}
