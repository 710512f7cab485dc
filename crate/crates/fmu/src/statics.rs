//! Typing contexts, type well-formedness, and the syntax-directed typechecker.

use crate::syntax::{Term, TmVar, TyVar, Type};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CtxEntry {
    TypeVar(TyVar),
    TermVar(TmVar, Type),
}

/// Ordered typing context. Rebinding an existing name is rejected: proof
/// scripts must use fresh names.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TypingCtx {
    entries: Vec<CtxEntry>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("unbound term variable {0}")]
    UnboundTermVar(String),
    #[error("unbound type variable {0}")]
    UnboundTypeVar(String),
    #[error("variable {0} is already bound (shadowing is rejected)")]
    Shadowing(String),
    #[error("in {subterm}: expected {expected}, found {actual}")]
    Mismatch {
        subterm: String,
        expected: String,
        actual: String,
    },
    #[error("{0}")]
    Other(String),
}

impl TypeError {
    pub fn mismatch(subterm: &Term, expected: &Type, actual: &Type) -> Self {
        TypeError::Mismatch {
            subterm: subterm.to_string(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn mismatch_ty(expected: &Type, actual: &Type) -> Self {
        TypeError::Mismatch {
            subterm: "<context>".into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn other(msg: impl Into<String>) -> Self {
        TypeError::Other(msg.into())
    }
}

impl TypingCtx {
    pub fn empty() -> Self {
        TypingCtx::default()
    }

    pub fn entries(&self) -> &[CtxEntry] {
        &self.entries
    }

    pub fn binds_name(&self, name: &str) -> bool {
        self.entries.iter().any(|e| match e {
            CtxEntry::TypeVar(a) => a == name,
            CtxEntry::TermVar(x, _) => x == name,
        })
    }

    pub fn lookup_term(&self, x: &str) -> Option<&Type> {
        self.entries.iter().find_map(|e| match e {
            CtxEntry::TermVar(y, t) if y == x => Some(t),
            _ => None,
        })
    }

    pub fn has_type_var(&self, a: &str) -> bool {
        self.entries
            .iter()
            .any(|e| matches!(e, CtxEntry::TypeVar(b) if b == a))
    }

    pub fn extended_with_type(&self, a: &str) -> Result<TypingCtx, TypeError> {
        if self.binds_name(a) {
            return Err(TypeError::Shadowing(a.to_string()));
        }
        let mut c = self.clone();
        c.entries.push(CtxEntry::TypeVar(a.to_string()));
        Ok(c)
    }

    pub fn extended_with_term(&self, x: &str, ty: &Type) -> Result<TypingCtx, TypeError> {
        if self.binds_name(x) {
            return Err(TypeError::Shadowing(x.to_string()));
        }
        if !type_wf(self, ty) {
            return Err(TypeError::other(format!(
                "type {ty} is not well-formed in context"
            )));
        }
        let mut c = self.clone();
        c.entries.push(CtxEntry::TermVar(x.to_string(), ty.clone()));
        Ok(c)
    }

    /// Gamma <= Gamma': every entry appears (alpha-equal for term entries).
    pub fn is_sub_context_of(&self, other: &TypingCtx) -> bool {
        self.entries.iter().all(|e| match e {
            CtxEntry::TypeVar(a) => other.has_type_var(a),
            CtxEntry::TermVar(x, t) => other
                .lookup_term(x)
                .map(|t2| t.alpha_eq(t2))
                .unwrap_or(false),
        })
    }

    pub fn term_vars(&self) -> impl Iterator<Item = (&TmVar, &Type)> {
        self.entries.iter().filter_map(|e| match e {
            CtxEntry::TermVar(x, t) => Some((x, t)),
            _ => None,
        })
    }

    pub fn type_vars(&self) -> impl Iterator<Item = &TyVar> {
        self.entries.iter().filter_map(|e| match e {
            CtxEntry::TypeVar(a) => Some(a),
            _ => None,
        })
    }
}

/// `Gamma |- tau`: free type variables of `tau` are bound in `Gamma`.
pub fn type_wf(ctx: &TypingCtx, ty: &Type) -> bool {
    ty.free_vars().iter().all(|a| ctx.has_type_var(a))
}

/// Syntax-directed typing; annotations make the result unique.
///
/// Binders in `e` are freshened against the context first, so typing is
/// total on alpha-classes; the no-shadowing invariant applies to context
/// construction, not to the shape of the subject term.
pub fn typecheck(ctx: &TypingCtx, e: &Term) -> Result<Type, TypeError> {
    let mut avoid: std::collections::BTreeSet<String> = Default::default();
    for entry in ctx.entries() {
        match entry {
            CtxEntry::TypeVar(a) => {
                avoid.insert(a.clone());
            }
            CtxEntry::TermVar(x, _) => {
                avoid.insert(x.clone());
            }
        }
    }
    typecheck_raw(ctx, &e.freshen_binders(&avoid))
}

fn typecheck_raw(ctx: &TypingCtx, e: &Term) -> Result<Type, TypeError> {
    match e {
        Term::Var(x) => ctx
            .lookup_term(x)
            .cloned()
            .ok_or_else(|| TypeError::UnboundTermVar(x.clone())),
        Term::Unit => Ok(Type::Unit),
        Term::Int(_) => Ok(Type::Int),
        Term::True | Term::False => Ok(Type::Bool),
        Term::Prim(op, args) => {
            if args.len() != op.arity() {
                return Err(TypeError::other(format!(
                    "primitive {} expects {} arguments",
                    op.name(),
                    op.arity()
                )));
            }
            for a in args {
                let t = typecheck_raw(ctx, a)?;
                if t != Type::Int {
                    return Err(TypeError::mismatch(a, &Type::Int, &t));
                }
            }
            Ok(if op.returns_bool() { Type::Bool } else { Type::Int })
        }
        Term::If(c, a, b) => {
            let tc = typecheck_raw(ctx, c)?;
            if tc != Type::Bool {
                return Err(TypeError::mismatch(c, &Type::Bool, &tc));
            }
            let ta = typecheck_raw(ctx, a)?;
            let tb = typecheck_raw(ctx, b)?;
            if !ta.alpha_eq(&tb) {
                return Err(TypeError::mismatch(b, &ta, &tb));
            }
            Ok(ta)
        }
        Term::Pair(a, b) => Ok(Type::Pair(
            Box::new(typecheck_raw(ctx, a)?),
            Box::new(typecheck_raw(ctx, b)?),
        )),
        Term::Fst(p) => match typecheck_raw(ctx, p)? {
            Type::Pair(a, _) => Ok(*a),
            t => Err(TypeError::other(format!("fst of non-pair: {t}"))),
        },
        Term::Snd(p) => match typecheck_raw(ctx, p)? {
            Type::Pair(_, b) => Ok(*b),
            t => Err(TypeError::other(format!("snd of non-pair: {t}"))),
        },
        Term::Inl(ann, body) => match ann {
            Type::Sum(l, _) => {
                if !type_wf(ctx, ann) {
                    return Err(TypeError::other(format!("ill-formed annotation {ann}")));
                }
                let t = typecheck_raw(ctx, body)?;
                if !t.alpha_eq(l) {
                    return Err(TypeError::mismatch(body, l, &t));
                }
                Ok(ann.clone())
            }
            _ => Err(TypeError::other("inl annotation must be a sum type")),
        },
        Term::Inr(ann, body) => match ann {
            Type::Sum(_, r) => {
                if !type_wf(ctx, ann) {
                    return Err(TypeError::other(format!("ill-formed annotation {ann}")));
                }
                let t = typecheck_raw(ctx, body)?;
                if !t.alpha_eq(r) {
                    return Err(TypeError::mismatch(body, r, &t));
                }
                Ok(ann.clone())
            }
            _ => Err(TypeError::other("inr annotation must be a sum type")),
        },
        Term::Case(s, x1, e1, x2, e2) => {
            let ts = typecheck_raw(ctx, s)?;
            let (ta, tb) = match ts {
                Type::Sum(a, b) => (*a, *b),
                t => return Err(TypeError::other(format!("case of non-sum: {t}"))),
            };
            let c1 = ctx.extended_with_term(x1, &ta)?;
            let t1 = typecheck_raw(&c1, e1)?;
            let c2 = ctx.extended_with_term(x2, &tb)?;
            let t2 = typecheck_raw(&c2, e2)?;
            if !t1.alpha_eq(&t2) {
                return Err(TypeError::mismatch(e2, &t1, &t2));
            }
            Ok(t1)
        }
        Term::Lam(x, tx, body) => {
            let c = ctx.extended_with_term(x, tx)?;
            let tb = typecheck_raw(&c, body)?;
            Ok(Type::Fun(Box::new(tx.clone()), Box::new(tb)))
        }
        Term::App(f, a) => match typecheck_raw(ctx, f)? {
            Type::Fun(dom, cod) => {
                let ta = typecheck_raw(ctx, a)?;
                if !ta.alpha_eq(&dom) {
                    return Err(TypeError::mismatch(a, &dom, &ta));
                }
                Ok(*cod)
            }
            t => Err(TypeError::other(format!("application of non-function: {t}"))),
        },
        Term::TLam(a, body) => {
            let c = ctx.extended_with_type(a)?;
            let tb = typecheck_raw(&c, body)?;
            Ok(Type::All(a.clone(), Box::new(tb)))
        }
        Term::TApp(f, arg) => {
            if !type_wf(ctx, arg) {
                return Err(TypeError::other(format!("ill-formed type argument {arg}")));
            }
            match typecheck_raw(ctx, f)? {
                Type::All(a, body) => Ok(body.subst(&a, arg)),
                t => Err(TypeError::other(format!(
                    "type application of non-forall: {t}"
                ))),
            }
        }
        Term::Pack(wit, body, ann) => match ann {
            Type::Exist(a, inner) => {
                if !type_wf(ctx, wit) {
                    return Err(TypeError::other(format!("ill-formed witness {wit}")));
                }
                if !type_wf(ctx, ann) {
                    return Err(TypeError::other(format!("ill-formed annotation {ann}")));
                }
                let expect = inner.subst(a, wit);
                let t = typecheck_raw(ctx, body)?;
                if !t.alpha_eq(&expect) {
                    return Err(TypeError::mismatch(body, &expect, &t));
                }
                Ok(ann.clone())
            }
            _ => Err(TypeError::other("pack annotation must be existential")),
        },
        Term::Unpack(e1, a, x, e2) => match typecheck_raw(ctx, e1)? {
            Type::Exist(b, inner) => {
                let inner = inner.subst(&b, &Type::Var(a.clone()));
                let c = ctx.extended_with_type(a)?.extended_with_term(x, &inner)?;
                let t = typecheck_raw(&c, e2)?;
                if !type_wf(ctx, &t) {
                    return Err(TypeError::other(format!(
                        "unpack result type {t} mentions the abstract type"
                    )));
                }
                Ok(t)
            }
            t => Err(TypeError::other(format!("unpack of non-existential: {t}"))),
        },
        Term::Fold(ann, body) => match ann {
            Type::Rec(a, inner) => {
                if !type_wf(ctx, ann) {
                    return Err(TypeError::other(format!("ill-formed annotation {ann}")));
                }
                let expect = inner.subst(a, ann);
                let t = typecheck_raw(ctx, body)?;
                if !t.alpha_eq(&expect) {
                    return Err(TypeError::mismatch(body, &expect, &t));
                }
                Ok(ann.clone())
            }
            _ => Err(TypeError::other("fold annotation must be a recursive type")),
        },
        Term::Unfold(body) => match typecheck_raw(ctx, body)? {
            Type::Rec(a, inner) => {
                let rec = Type::Rec(a.clone(), inner.clone());
                Ok(inner.subst(&a, &rec))
            }
            t => Err(TypeError::other(format!("unfold of non-recursive type: {t}"))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_term, parse_type};

    fn check(src: &str) -> Result<Type, TypeError> {
        typecheck(&TypingCtx::empty(), &parse_term(src).unwrap())
    }

    #[test]
    fn identity_types() {
        assert_eq!(check("fun (x:int) => x").unwrap(), parse_type("int -> int").unwrap());
    }

    #[test]
    fn if_int_scrutinee_rejected() {
        assert!(check("if 3 then <> else <>").is_err());
    }

    #[test]
    fn type_wf_cases() {
        let g = TypingCtx::empty();
        assert!(type_wf(&g, &parse_type("forall a. a -> a").unwrap()));
        assert!(!type_wf(&g, &parse_type("a").unwrap()));
        let g2 = g.extended_with_type("a").unwrap();
        assert!(type_wf(&g2, &parse_type("mu b. a + b").unwrap()));
    }

    #[test]
    fn shadowing_rejected() {
        let g = TypingCtx::empty().extended_with_term("x", &Type::Int).unwrap();
        assert!(matches!(
            g.extended_with_term("x", &Type::Bool),
            Err(TypeError::Shadowing(_))
        ));
    }

    #[test]
    fn weakening_holds_on_example() {
        let e = parse_term("fun (x:int) => x + y").unwrap();
        let g = TypingCtx::empty().extended_with_term("y", &Type::Int).unwrap();
        let t1 = typecheck(&g, &e).unwrap();
        let g2 = g.extended_with_term("z", &Type::Bool).unwrap();
        let t2 = typecheck(&g2, &e).unwrap();
        assert!(t1.alpha_eq(&t2));
    }

    #[test]
    fn pack_unpack() {
        let t = check("unpack <a, p> = pack [int] <5, fun (x:int) => x = 5> as exists a. a * (a -> bool) in (p.2) (p.1)");
        assert_eq!(t.unwrap(), Type::Bool);
    }
}
