//! One-hole program contexts, hole plugging, the evaluation-context
//! sub-grammar, and context typing `|- C : (G |- t) ~> (G' |- t')`.

use crate::statics::{typecheck, TypeError, TypingCtx};
use crate::syntax::{PrimOp, Term, TmVar, TyVar, Type};
use std::collections::BTreeSet;

/// General program contexts. Plugging is literal hole replacement and may
/// capture free variables of the plugged term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ctx {
    Hole,
    Prim(PrimOp, Vec<Term>, Box<Ctx>, Vec<Term>),
    If0(Box<Ctx>, Term, Term),
    If1(Term, Box<Ctx>, Term),
    If2(Term, Term, Box<Ctx>),
    Pair0(Box<Ctx>, Term),
    Pair1(Term, Box<Ctx>),
    Fst(Box<Ctx>),
    Snd(Box<Ctx>),
    Inl(Type, Box<Ctx>),
    Inr(Type, Box<Ctx>),
    Case0(Box<Ctx>, TmVar, Term, TmVar, Term),
    Case1(Term, TmVar, Box<Ctx>, TmVar, Term),
    Case2(Term, TmVar, Term, TmVar, Box<Ctx>),
    Lam(TmVar, Type, Box<Ctx>),
    App0(Box<Ctx>, Term),
    App1(Term, Box<Ctx>),
    TLam(TyVar, Box<Ctx>),
    TApp(Box<Ctx>, Type),
    Pack(Type, Box<Ctx>, Type),
    Unpack0(Box<Ctx>, TyVar, TmVar, Term),
    Unpack1(Term, TyVar, TmVar, Box<Ctx>),
    Fold(Type, Box<Ctx>),
    Unfold(Box<Ctx>),
}

impl Ctx {
    /// Plugs `e` into the hole. Literal replacement: binders in the context
    /// capture free variables of `e`.
    pub fn plug(&self, e: &Term) -> Term {
        match self {
            Ctx::Hole => e.clone(),
            Ctx::Prim(op, pre, c, post) => {
                let mut args: Vec<Term> = pre.clone();
                args.push(c.plug(e));
                args.extend(post.iter().cloned());
                Term::Prim(*op, args)
            }
            Ctx::If0(c, a, b) => Term::If(Box::new(c.plug(e)), Box::new(a.clone()), Box::new(b.clone())),
            Ctx::If1(s, c, b) => Term::If(Box::new(s.clone()), Box::new(c.plug(e)), Box::new(b.clone())),
            Ctx::If2(s, a, c) => Term::If(Box::new(s.clone()), Box::new(a.clone()), Box::new(c.plug(e))),
            Ctx::Pair0(c, b) => Term::Pair(Box::new(c.plug(e)), Box::new(b.clone())),
            Ctx::Pair1(a, c) => Term::Pair(Box::new(a.clone()), Box::new(c.plug(e))),
            Ctx::Fst(c) => Term::Fst(Box::new(c.plug(e))),
            Ctx::Snd(c) => Term::Snd(Box::new(c.plug(e))),
            Ctx::Inl(t, c) => Term::Inl(t.clone(), Box::new(c.plug(e))),
            Ctx::Inr(t, c) => Term::Inr(t.clone(), Box::new(c.plug(e))),
            Ctx::Case0(c, x1, e1, x2, e2) => Term::Case(
                Box::new(c.plug(e)),
                x1.clone(),
                Box::new(e1.clone()),
                x2.clone(),
                Box::new(e2.clone()),
            ),
            Ctx::Case1(s, x1, c, x2, e2) => Term::Case(
                Box::new(s.clone()),
                x1.clone(),
                Box::new(c.plug(e)),
                x2.clone(),
                Box::new(e2.clone()),
            ),
            Ctx::Case2(s, x1, e1, x2, c) => Term::Case(
                Box::new(s.clone()),
                x1.clone(),
                Box::new(e1.clone()),
                x2.clone(),
                Box::new(c.plug(e)),
            ),
            Ctx::Lam(x, t, c) => Term::Lam(x.clone(), t.clone(), Box::new(c.plug(e))),
            Ctx::App0(c, a) => Term::App(Box::new(c.plug(e)), Box::new(a.clone())),
            Ctx::App1(f, c) => Term::App(Box::new(f.clone()), Box::new(c.plug(e))),
            Ctx::TLam(a, c) => Term::TLam(a.clone(), Box::new(c.plug(e))),
            Ctx::TApp(c, t) => Term::TApp(Box::new(c.plug(e)), t.clone()),
            Ctx::Pack(t1, c, t2) => Term::Pack(t1.clone(), Box::new(c.plug(e)), t2.clone()),
            Ctx::Unpack0(c, a, x, e2) => {
                Term::Unpack(Box::new(c.plug(e)), a.clone(), x.clone(), Box::new(e2.clone()))
            }
            Ctx::Unpack1(e1, a, x, c) => {
                Term::Unpack(Box::new(e1.clone()), a.clone(), x.clone(), Box::new(c.plug(e)))
            }
            Ctx::Fold(t, c) => Term::Fold(t.clone(), Box::new(c.plug(e))),
            Ctx::Unfold(c) => Term::Unfold(Box::new(c.plug(e))),
        }
    }

    /// Checks membership in the evaluation-context grammar. Free term
    /// variables in value positions are accepted only when listed in `vals`.
    pub fn is_eval_context_with(&self, vals: &BTreeSet<TmVar>) -> bool {
        match self {
            Ctx::Hole => true,
            Ctx::Prim(_, pre, c, _) => {
                pre.iter().all(|v| v.is_value_with(vals)) && c.is_eval_context_with(vals)
            }
            Ctx::If0(c, _, _) => c.is_eval_context_with(vals),
            Ctx::Pair0(c, _) => c.is_eval_context_with(vals),
            Ctx::Pair1(v, c) => v.is_value_with(vals) && c.is_eval_context_with(vals),
            Ctx::Fst(c) | Ctx::Snd(c) | Ctx::Inl(_, c) | Ctx::Inr(_, c) => {
                c.is_eval_context_with(vals)
            }
            Ctx::Case0(c, ..) => c.is_eval_context_with(vals),
            Ctx::App0(c, _) => c.is_eval_context_with(vals),
            Ctx::App1(v, c) => v.is_value_with(vals) && c.is_eval_context_with(vals),
            Ctx::TApp(c, _) => c.is_eval_context_with(vals),
            Ctx::Pack(_, c, _) => c.is_eval_context_with(vals),
            Ctx::Unpack0(c, ..) => c.is_eval_context_with(vals),
            Ctx::Fold(_, c) | Ctx::Unfold(c) => c.is_eval_context_with(vals),
            _ => false,
        }
    }

    pub fn is_eval_context(&self) -> bool {
        self.is_eval_context_with(&BTreeSet::new())
    }

    pub fn compose(&self, inner: &Ctx) -> Ctx {
        match self {
            Ctx::Hole => inner.clone(),
            Ctx::Prim(op, pre, c, post) => {
                Ctx::Prim(*op, pre.clone(), Box::new(c.compose(inner)), post.clone())
            }
            Ctx::If0(c, a, b) => Ctx::If0(Box::new(c.compose(inner)), a.clone(), b.clone()),
            Ctx::If1(s, c, b) => Ctx::If1(s.clone(), Box::new(c.compose(inner)), b.clone()),
            Ctx::If2(s, a, c) => Ctx::If2(s.clone(), a.clone(), Box::new(c.compose(inner))),
            Ctx::Pair0(c, b) => Ctx::Pair0(Box::new(c.compose(inner)), b.clone()),
            Ctx::Pair1(a, c) => Ctx::Pair1(a.clone(), Box::new(c.compose(inner))),
            Ctx::Fst(c) => Ctx::Fst(Box::new(c.compose(inner))),
            Ctx::Snd(c) => Ctx::Snd(Box::new(c.compose(inner))),
            Ctx::Inl(t, c) => Ctx::Inl(t.clone(), Box::new(c.compose(inner))),
            Ctx::Inr(t, c) => Ctx::Inr(t.clone(), Box::new(c.compose(inner))),
            Ctx::Case0(c, x1, e1, x2, e2) => Ctx::Case0(
                Box::new(c.compose(inner)),
                x1.clone(),
                e1.clone(),
                x2.clone(),
                e2.clone(),
            ),
            Ctx::Case1(s, x1, c, x2, e2) => Ctx::Case1(
                s.clone(),
                x1.clone(),
                Box::new(c.compose(inner)),
                x2.clone(),
                e2.clone(),
            ),
            Ctx::Case2(s, x1, e1, x2, c) => Ctx::Case2(
                s.clone(),
                x1.clone(),
                e1.clone(),
                x2.clone(),
                Box::new(c.compose(inner)),
            ),
            Ctx::Lam(x, t, c) => Ctx::Lam(x.clone(), t.clone(), Box::new(c.compose(inner))),
            Ctx::App0(c, a) => Ctx::App0(Box::new(c.compose(inner)), a.clone()),
            Ctx::App1(f, c) => Ctx::App1(f.clone(), Box::new(c.compose(inner))),
            Ctx::TLam(a, c) => Ctx::TLam(a.clone(), Box::new(c.compose(inner))),
            Ctx::TApp(c, t) => Ctx::TApp(Box::new(c.compose(inner)), t.clone()),
            Ctx::Pack(t1, c, t2) => Ctx::Pack(t1.clone(), Box::new(c.compose(inner)), t2.clone()),
            Ctx::Unpack0(c, a, x, e2) => {
                Ctx::Unpack0(Box::new(c.compose(inner)), a.clone(), x.clone(), e2.clone())
            }
            Ctx::Unpack1(e1, a, x, c) => {
                Ctx::Unpack1(e1.clone(), a.clone(), x.clone(), Box::new(c.compose(inner)))
            }
            Ctx::Fold(t, c) => Ctx::Fold(t.clone(), Box::new(c.compose(inner))),
            Ctx::Unfold(c) => Ctx::Unfold(Box::new(c.compose(inner))),
        }
    }

    /// Free term variables of the context skeleton (the hole contributes
    /// nothing; binders scope over their sub-context).
    pub fn free_term_vars(&self) -> BTreeSet<TmVar> {
        // Plug with a closed dummy and take its free variables.
        self.plug(&Term::Unit).free_term_vars()
    }

    pub fn to_source(&self) -> String {
        // Reuse the term printer by plugging a sentinel variable, then
        // replacing its (unique) occurrence.
        let sentinel = "__hole__";
        let t = self.plug(&Term::Var(sentinel.into()));
        crate::print::term_to_string(&t).replace(sentinel, "[]")
    }
}

/// Infers the result type of `|- C : (hole_ctx |- hole_ty) ~> (outer |- ?)`,
/// following the appendix rules; fails if the derivation does not exist.
pub fn ctx_infer(
    c: &Ctx,
    hole_ctx: &TypingCtx,
    hole_ty: &Type,
    outer: &TypingCtx,
) -> Result<Type, TypeError> {
    match c {
        Ctx::Hole => {
            if hole_ctx.is_sub_context_of(outer) {
                Ok(hole_ty.clone())
            } else {
                Err(TypeError::other("hole rule: hole context is not included in outer context"))
            }
        }
        Ctx::Prim(op, pre, cc, post) => {
            if pre.len() + 1 + post.len() != op.arity() {
                return Err(TypeError::other("prim op arity"));
            }
            for e in pre.iter().chain(post.iter()) {
                let t = typecheck(outer, e)?;
                if t != Type::Int {
                    return Err(TypeError::mismatch(e, &Type::Int, &t));
                }
            }
            let t = ctx_infer(cc, hole_ctx, hole_ty, outer)?;
            if t != Type::Int {
                return Err(TypeError::other("prim op context must have int result"));
            }
            Ok(if op.returns_bool() { Type::Bool } else { Type::Int })
        }
        Ctx::If0(cc, e1, e2) => {
            let t = ctx_infer(cc, hole_ctx, hole_ty, outer)?;
            if t != Type::Bool {
                return Err(TypeError::other("if scrutinee context must be bool"));
            }
            let t1 = typecheck(outer, e1)?;
            let t2 = typecheck(outer, e2)?;
            if !t1.alpha_eq(&t2) {
                return Err(TypeError::other("if branches disagree"));
            }
            Ok(t1)
        }
        Ctx::If1(s, cc, e2) => {
            expect_ty(outer, s, &Type::Bool)?;
            let t1 = ctx_infer(cc, hole_ctx, hole_ty, outer)?;
            let t2 = typecheck(outer, e2)?;
            if !t1.alpha_eq(&t2) {
                return Err(TypeError::other("if branches disagree"));
            }
            Ok(t1)
        }
        Ctx::If2(s, e1, cc) => {
            expect_ty(outer, s, &Type::Bool)?;
            let t1 = typecheck(outer, e1)?;
            let t2 = ctx_infer(cc, hole_ctx, hole_ty, outer)?;
            if !t1.alpha_eq(&t2) {
                return Err(TypeError::other("if branches disagree"));
            }
            Ok(t1)
        }
        Ctx::Pair0(cc, e2) => {
            let t1 = ctx_infer(cc, hole_ctx, hole_ty, outer)?;
            let t2 = typecheck(outer, e2)?;
            Ok(Type::Pair(Box::new(t1), Box::new(t2)))
        }
        Ctx::Pair1(e1, cc) => {
            let t1 = typecheck(outer, e1)?;
            let t2 = ctx_infer(cc, hole_ctx, hole_ty, outer)?;
            Ok(Type::Pair(Box::new(t1), Box::new(t2)))
        }
        Ctx::Fst(cc) => match ctx_infer(cc, hole_ctx, hole_ty, outer)? {
            Type::Pair(a, _) => Ok(*a),
            t => Err(TypeError::other(format!("fst of non-pair {t}"))),
        },
        Ctx::Snd(cc) => match ctx_infer(cc, hole_ctx, hole_ty, outer)? {
            Type::Pair(_, b) => Ok(*b),
            t => Err(TypeError::other(format!("snd of non-pair {t}"))),
        },
        Ctx::Inl(ann, cc) => match ann {
            Type::Sum(a, _) => {
                let t = ctx_infer(cc, hole_ctx, hole_ty, outer)?;
                if !t.alpha_eq(a) {
                    return Err(TypeError::mismatch_ty(a, &t));
                }
                Ok(ann.clone())
            }
            _ => Err(TypeError::other("inl annotation must be a sum type")),
        },
        Ctx::Inr(ann, cc) => match ann {
            Type::Sum(_, b) => {
                let t = ctx_infer(cc, hole_ctx, hole_ty, outer)?;
                if !t.alpha_eq(b) {
                    return Err(TypeError::mismatch_ty(b, &t));
                }
                Ok(ann.clone())
            }
            _ => Err(TypeError::other("inr annotation must be a sum type")),
        },
        Ctx::Case0(cc, x1, e1, x2, e2) => {
            let ts = ctx_infer(cc, hole_ctx, hole_ty, outer)?;
            let (ta, tb) = match ts {
                Type::Sum(a, b) => (*a, *b),
                t => return Err(TypeError::other(format!("case of non-sum {t}"))),
            };
            let g1 = outer.extended_with_term(x1, &ta)?;
            let t1 = typecheck(&g1, e1)?;
            let g2 = outer.extended_with_term(x2, &tb)?;
            let t2 = typecheck(&g2, e2)?;
            if !t1.alpha_eq(&t2) {
                return Err(TypeError::other("case branches disagree"));
            }
            Ok(t1)
        }
        Ctx::Case1(s, x1, cc, x2, e2) => {
            let ts = typecheck(outer, s)?;
            let (ta, tb) = match ts {
                Type::Sum(a, b) => (*a, *b),
                t => return Err(TypeError::other(format!("case of non-sum {t}"))),
            };
            let g1 = outer.extended_with_term(x1, &ta)?;
            let t1 = ctx_infer(cc, hole_ctx, hole_ty, &g1)?;
            let g2 = outer.extended_with_term(x2, &tb)?;
            let t2 = typecheck(&g2, e2)?;
            if !t1.alpha_eq(&t2) {
                return Err(TypeError::other("case branches disagree"));
            }
            Ok(t1)
        }
        Ctx::Case2(s, x1, e1, x2, cc) => {
            let ts = typecheck(outer, s)?;
            let (ta, tb) = match ts {
                Type::Sum(a, b) => (*a, *b),
                t => return Err(TypeError::other(format!("case of non-sum {t}"))),
            };
            let g1 = outer.extended_with_term(x1, &ta)?;
            let t1 = typecheck(&g1, e1)?;
            let g2 = outer.extended_with_term(x2, &tb)?;
            let t2 = ctx_infer(cc, hole_ctx, hole_ty, &g2)?;
            if !t1.alpha_eq(&t2) {
                return Err(TypeError::other("case branches disagree"));
            }
            Ok(t1)
        }
        Ctx::Lam(x, tx, cc) => {
            let g = outer.extended_with_term(x, tx)?;
            let t = ctx_infer(cc, hole_ctx, hole_ty, &g)?;
            Ok(Type::Fun(Box::new(tx.clone()), Box::new(t)))
        }
        Ctx::App0(cc, e2) => {
            let tf = ctx_infer(cc, hole_ctx, hole_ty, outer)?;
            match tf {
                Type::Fun(a, b) => {
                    expect_ty(outer, e2, &a)?;
                    Ok(*b)
                }
                t => Err(TypeError::other(format!("application of non-function {t}"))),
            }
        }
        Ctx::App1(e1, cc) => {
            let tf = typecheck(outer, e1)?;
            match tf {
                Type::Fun(a, b) => {
                    let t = ctx_infer(cc, hole_ctx, hole_ty, outer)?;
                    if !t.alpha_eq(&a) {
                        return Err(TypeError::mismatch_ty(&a, &t));
                    }
                    Ok(*b)
                }
                t => Err(TypeError::other(format!("application of non-function {t}"))),
            }
        }
        Ctx::TLam(a, cc) => {
            let g = outer.extended_with_type(a)?;
            let t = ctx_infer(cc, hole_ctx, hole_ty, &g)?;
            Ok(Type::All(a.clone(), Box::new(t)))
        }
        Ctx::TApp(cc, arg) => {
            if !crate::statics::type_wf(outer, arg) {
                return Err(TypeError::other("ill-formed type argument"));
            }
            match ctx_infer(cc, hole_ctx, hole_ty, outer)? {
                Type::All(a, body) => Ok(body.subst(&a, arg)),
                t => Err(TypeError::other(format!("type application of non-forall {t}"))),
            }
        }
        Ctx::Pack(wit, cc, ann) => match ann {
            Type::Exist(a, body) => {
                if !crate::statics::type_wf(outer, wit) {
                    return Err(TypeError::other("ill-formed pack witness"));
                }
                let expect = body.subst(a, wit);
                let t = ctx_infer(cc, hole_ctx, hole_ty, outer)?;
                if !t.alpha_eq(&expect) {
                    return Err(TypeError::mismatch_ty(&expect, &t));
                }
                Ok(ann.clone())
            }
            _ => Err(TypeError::other("pack annotation must be existential")),
        },
        Ctx::Unpack0(cc, a, x, e2) => {
            let te = ctx_infer(cc, hole_ctx, hole_ty, outer)?;
            match te {
                Type::Exist(b, body) => {
                    let body = body.subst(&b, &Type::Var(a.clone()));
                    let g = outer.extended_with_type(a)?.extended_with_term(x, &body)?;
                    let t = typecheck(&g, e2)?;
                    if !crate::statics::type_wf(outer, &t) {
                        return Err(TypeError::other("unpack result type escapes"));
                    }
                    Ok(t)
                }
                t => Err(TypeError::other(format!("unpack of non-existential {t}"))),
            }
        }
        Ctx::Unpack1(e1, a, x, cc) => {
            let te = typecheck(outer, e1)?;
            match te {
                Type::Exist(b, body) => {
                    let body = body.subst(&b, &Type::Var(a.clone()));
                    let g = outer.extended_with_type(a)?.extended_with_term(x, &body)?;
                    let t = ctx_infer(cc, hole_ctx, hole_ty, &g)?;
                    if !crate::statics::type_wf(outer, &t) {
                        return Err(TypeError::other("unpack result type escapes"));
                    }
                    Ok(t)
                }
                t => Err(TypeError::other(format!("unpack of non-existential {t}"))),
            }
        }
        Ctx::Fold(ann, cc) => match ann {
            Type::Rec(a, body) => {
                if !crate::statics::type_wf(outer, ann) {
                    return Err(TypeError::other("ill-formed fold annotation"));
                }
                let expect = body.subst(a, ann);
                let t = ctx_infer(cc, hole_ctx, hole_ty, outer)?;
                if !t.alpha_eq(&expect) {
                    return Err(TypeError::mismatch_ty(&expect, &t));
                }
                Ok(ann.clone())
            }
            _ => Err(TypeError::other("fold annotation must be recursive type")),
        },
        Ctx::Unfold(cc) => match ctx_infer(cc, hole_ctx, hole_ty, outer)? {
            Type::Rec(a, body) => {
                let rec = Type::Rec(a.clone(), body.clone());
                Ok(body.subst(&a, &rec))
            }
            t => Err(TypeError::other(format!("unfold of non-recursive type {t}"))),
        },
    }
}

fn expect_ty(g: &TypingCtx, e: &Term, want: &Type) -> Result<(), TypeError> {
    let got = typecheck(g, e)?;
    if got.alpha_eq(want) {
        Ok(())
    } else {
        Err(TypeError::mismatch(e, want, &got))
    }
}

/// `|- C : (hole.0 |- hole.1) ~> (result.0 |- result.1)` as a boolean.
pub fn ctx_typecheck(
    c: &Ctx,
    hole: (&TypingCtx, &Type),
    result: (&TypingCtx, &Type),
) -> bool {
    match ctx_infer(c, hole.0, hole.1, result.0) {
        Ok(t) => t.alpha_eq(result.1),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{int, lam, tm_var};

    #[test]
    fn hole_context_types() {
        let g = TypingCtx::empty();
        assert!(ctx_typecheck(&Ctx::Hole, (&g, &Type::Int), (&g, &Type::Int)));
        assert!(!ctx_typecheck(&Ctx::Hole, (&g, &Type::Int), (&g, &Type::Bool)));
    }

    #[test]
    fn lambda_context_types() {
        // C = fun (x:int) => []  with hole (x:int |- int): result int -> int
        let g = TypingCtx::empty();
        let hole_g = g.extended_with_term("x", &Type::Int).unwrap();
        let c = Ctx::Lam("x".into(), Type::Int, Box::new(Ctx::Hole));
        let fun_ty = Type::Fun(Box::new(Type::Int), Box::new(Type::Int));
        assert!(ctx_typecheck(&c, (&hole_g, &Type::Int), (&g, &fun_ty)));
    }

    #[test]
    fn unfold_of_bool_hole_fails() {
        let g = TypingCtx::empty();
        let c = Ctx::Unfold(Box::new(Ctx::Hole));
        assert!(!ctx_typecheck(&c, (&g, &Type::Bool), (&g, &Type::Bool)));
    }

    #[test]
    fn plugging_captures() {
        let c = Ctx::Lam("x".into(), Type::Int, Box::new(Ctx::Hole));
        let plugged = c.plug(&tm_var("x"));
        assert_eq!(plugged, lam("x", Type::Int, tm_var("x")));
    }

    #[test]
    fn eval_ctx_recognition() {
        let e = Ctx::App1(lam("x", Type::Int, tm_var("x")), Box::new(Ctx::Hole));
        assert!(e.is_eval_context());
        let not_e = Ctx::App1(app_term(), Box::new(Ctx::Hole));
        assert!(!not_e.is_eval_context());
        let under_binder = Ctx::Lam("x".into(), Type::Int, Box::new(Ctx::Hole));
        assert!(!under_binder.is_eval_context());
    }

    fn app_term() -> Term {
        crate::syntax::app(lam("x", Type::Int, tm_var("x")), int(1))
    }
}
