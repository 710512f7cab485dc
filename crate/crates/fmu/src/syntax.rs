//! Abstract syntax for types and terms, with capture-avoiding substitution
//! and alpha-equivalence.
//!
//! Variables are named strings. Equality of `Type` and `Term` values is
//! structural; use [`Type::alpha_eq`] / [`Term::alpha_eq`] (or canonicalize
//! first) when identity up to bound-variable renaming is meant.

use num_bigint::BigInt;
use std::collections::BTreeSet;
use std::fmt;

pub type TyVar = String;
pub type TmVar = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrimOp {
    Add,
    Sub,
    Eq,
    Lt,
    Le,
}

impl PrimOp {
    pub fn name(self) -> &'static str {
        match self {
            PrimOp::Add => "+",
            PrimOp::Sub => "-",
            PrimOp::Eq => "=",
            PrimOp::Lt => "<",
            PrimOp::Le => "<=",
        }
    }

    pub fn arity(self) -> usize {
        2
    }

    /// Result type is int for arithmetic, bool for comparisons.
    pub fn returns_bool(self) -> bool {
        matches!(self, PrimOp::Eq | PrimOp::Lt | PrimOp::Le)
    }

    pub fn all() -> [PrimOp; 5] {
        [PrimOp::Add, PrimOp::Sub, PrimOp::Eq, PrimOp::Lt, PrimOp::Le]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Var(TyVar),
    Unit,
    Int,
    Bool,
    Pair(Box<Type>, Box<Type>),
    Sum(Box<Type>, Box<Type>),
    Fun(Box<Type>, Box<Type>),
    All(TyVar, Box<Type>),
    Exist(TyVar, Box<Type>),
    Rec(TyVar, Box<Type>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(TmVar),
    Unit,
    Int(BigInt),
    True,
    False,
    Prim(PrimOp, Vec<Term>),
    If(Box<Term>, Box<Term>, Box<Term>),
    Pair(Box<Term>, Box<Term>),
    Fst(Box<Term>),
    Snd(Box<Term>),
    /// `inl` annotated with the full sum type.
    Inl(Type, Box<Term>),
    Inr(Type, Box<Term>),
    Case(Box<Term>, TmVar, Box<Term>, TmVar, Box<Term>),
    Lam(TmVar, Type, Box<Term>),
    App(Box<Term>, Box<Term>),
    TLam(TyVar, Box<Term>),
    TApp(Box<Term>, Type),
    /// `pack [witness] body as existential-type`
    Pack(Type, Box<Term>, Type),
    Unpack(Box<Term>, TyVar, TmVar, Box<Term>),
    /// `fold` annotated with the full recursive type.
    Fold(Type, Box<Term>),
    Unfold(Box<Term>),
}

pub fn ty_var(a: &str) -> Type {
    Type::Var(a.to_string())
}

pub fn tm_var(x: &str) -> Term {
    Term::Var(x.to_string())
}

pub fn int(n: i64) -> Term {
    Term::Int(BigInt::from(n))
}

pub fn app(f: Term, a: Term) -> Term {
    Term::App(Box::new(f), Box::new(a))
}

pub fn lam(x: &str, ty: Type, body: Term) -> Term {
    Term::Lam(x.to_string(), ty, Box::new(body))
}

/// Picks a name not in `avoid`, based on `base` (strips any existing numeric
/// suffix after `#` first).
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let stem = match base.find('#') {
        Some(i) => &base[..i],
        None => base,
    };
    let stem = if stem.is_empty() { "x" } else { stem };
    if !avoid.contains(stem) {
        return stem.to_string();
    }
    let mut i = 1usize;
    loop {
        let cand = format!("{stem}#{i}");
        if !avoid.contains(&cand) {
            return cand;
        }
        i += 1;
    }
}

impl Type {
    pub fn free_vars(&self) -> BTreeSet<TyVar> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut BTreeSet::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut BTreeSet<TyVar>, out: &mut BTreeSet<TyVar>) {
        match self {
            Type::Var(a) => {
                if !bound.contains(a) {
                    out.insert(a.clone());
                }
            }
            Type::Unit | Type::Int | Type::Bool => {}
            Type::Pair(a, b) | Type::Sum(a, b) | Type::Fun(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Type::All(a, t) | Type::Exist(a, t) | Type::Rec(a, t) => {
                let added = bound.insert(a.clone());
                t.collect_free(bound, out);
                if added {
                    bound.remove(a);
                }
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Capture-avoiding substitution of `payload` for the free type variable `a`.
    pub fn subst(&self, a: &str, payload: &Type) -> Type {
        match self {
            Type::Var(b) => {
                if b == a {
                    payload.clone()
                } else {
                    self.clone()
                }
            }
            Type::Unit | Type::Int | Type::Bool => self.clone(),
            Type::Pair(l, r) => Type::Pair(Box::new(l.subst(a, payload)), Box::new(r.subst(a, payload))),
            Type::Sum(l, r) => Type::Sum(Box::new(l.subst(a, payload)), Box::new(r.subst(a, payload))),
            Type::Fun(l, r) => Type::Fun(Box::new(l.subst(a, payload)), Box::new(r.subst(a, payload))),
            Type::All(b, t) => {
                let (b2, t2) = subst_under_ty_binder(b, t, a, payload);
                Type::All(b2, Box::new(t2))
            }
            Type::Exist(b, t) => {
                let (b2, t2) = subst_under_ty_binder(b, t, a, payload);
                Type::Exist(b2, Box::new(t2))
            }
            Type::Rec(b, t) => {
                let (b2, t2) = subst_under_ty_binder(b, t, a, payload);
                Type::Rec(b2, Box::new(t2))
            }
        }
    }

    /// Renames bound variables to a canonical spine (`%0`, `%1`, ...) so that
    /// alpha-equivalent types become structurally equal.
    pub fn canonical(&self) -> Type {
        let mut counter = 0usize;
        self.canon(&mut counter, &mut Vec::new())
    }

    fn canon(&self, counter: &mut usize, env: &mut Vec<(TyVar, TyVar)>) -> Type {
        match self {
            Type::Var(a) => {
                for (orig, fresh) in env.iter().rev() {
                    if orig == a {
                        return Type::Var(fresh.clone());
                    }
                }
                Type::Var(a.clone())
            }
            Type::Unit | Type::Int | Type::Bool => self.clone(),
            Type::Pair(l, r) => Type::Pair(Box::new(l.canon(counter, env)), Box::new(r.canon(counter, env))),
            Type::Sum(l, r) => Type::Sum(Box::new(l.canon(counter, env)), Box::new(r.canon(counter, env))),
            Type::Fun(l, r) => Type::Fun(Box::new(l.canon(counter, env)), Box::new(r.canon(counter, env))),
            Type::All(a, t) => {
                let fresh = format!("%{}", counter);
                *counter += 1;
                env.push((a.clone(), fresh.clone()));
                let t2 = t.canon(counter, env);
                env.pop();
                Type::All(fresh, Box::new(t2))
            }
            Type::Exist(a, t) => {
                let fresh = format!("%{}", counter);
                *counter += 1;
                env.push((a.clone(), fresh.clone()));
                let t2 = t.canon(counter, env);
                env.pop();
                Type::Exist(fresh, Box::new(t2))
            }
            Type::Rec(a, t) => {
                let fresh = format!("%{}", counter);
                *counter += 1;
                env.push((a.clone(), fresh.clone()));
                let t2 = t.canon(counter, env);
                env.pop();
                Type::Rec(fresh, Box::new(t2))
            }
        }
    }

    pub fn alpha_eq(&self, other: &Type) -> bool {
        self.canonical() == other.canonical()
    }
}

fn subst_under_ty_binder(b: &TyVar, body: &Type, a: &str, payload: &Type) -> (TyVar, Type) {
    if b == a {
        return (b.clone(), (*body).clone());
    }
    if payload.free_vars().contains(b) {
        let mut avoid: BTreeSet<String> = payload.free_vars();
        avoid.extend(body.free_vars());
        avoid.insert(a.to_string());
        let b2 = fresh_name(b, &avoid);
        let body2 = body.subst(b, &Type::Var(b2.clone()));
        (b2, body2.subst(a, payload))
    } else {
        (b.clone(), body.subst(a, payload))
    }
}

impl Term {
    /// The value grammar. Variables count as values.
    pub fn is_value(&self) -> bool {
        match self {
            Term::Var(_) | Term::Unit | Term::Int(_) | Term::True | Term::False => true,
            Term::Pair(a, b) => a.is_value() && b.is_value(),
            Term::Inl(_, v) | Term::Inr(_, v) => v.is_value(),
            Term::Lam(..) | Term::TLam(..) => true,
            Term::Pack(_, v, _) => v.is_value(),
            Term::Fold(_, v) => v.is_value(),
            _ => false,
        }
    }

    /// Values in a context where only the variables in `vals` may be assumed
    /// to stand for values.
    pub fn is_value_with(&self, vals: &BTreeSet<TmVar>) -> bool {
        match self {
            Term::Var(x) => vals.contains(x),
            Term::Unit | Term::Int(_) | Term::True | Term::False => true,
            Term::Pair(a, b) => a.is_value_with(vals) && b.is_value_with(vals),
            Term::Inl(_, v) | Term::Inr(_, v) => v.is_value_with(vals),
            Term::Lam(..) | Term::TLam(..) => true,
            Term::Pack(_, v, _) => v.is_value_with(vals),
            Term::Fold(_, v) => v.is_value_with(vals),
            _ => false,
        }
    }

    pub fn free_term_vars(&self) -> BTreeSet<TmVar> {
        let mut out = BTreeSet::new();
        self.collect_free_tm(&mut BTreeSet::new(), &mut out);
        out
    }

    fn collect_free_tm(&self, bound: &mut BTreeSet<TmVar>, out: &mut BTreeSet<TmVar>) {
        match self {
            Term::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Term::Unit | Term::Int(_) | Term::True | Term::False => {}
            Term::Prim(_, args) => {
                for a in args {
                    a.collect_free_tm(bound, out);
                }
            }
            Term::If(c, a, b) => {
                c.collect_free_tm(bound, out);
                a.collect_free_tm(bound, out);
                b.collect_free_tm(bound, out);
            }
            Term::Pair(a, b) | Term::App(a, b) => {
                a.collect_free_tm(bound, out);
                b.collect_free_tm(bound, out);
            }
            Term::Fst(e) | Term::Snd(e) | Term::Unfold(e) | Term::TApp(e, _) => {
                e.collect_free_tm(bound, out)
            }
            Term::Inl(_, e) | Term::Inr(_, e) | Term::Fold(_, e) | Term::Pack(_, e, _) | Term::TLam(_, e) => {
                e.collect_free_tm(bound, out)
            }
            Term::Case(s, x1, e1, x2, e2) => {
                s.collect_free_tm(bound, out);
                with_bound(bound, x1, |b| e1.collect_free_tm(b, out));
                with_bound(bound, x2, |b| e2.collect_free_tm(b, out));
            }
            Term::Lam(x, _, e) => with_bound(bound, x, |b| e.collect_free_tm(b, out)),
            Term::Unpack(e1, _, x, e2) => {
                e1.collect_free_tm(bound, out);
                with_bound(bound, x, |b| e2.collect_free_tm(b, out));
            }
        }
    }

    pub fn free_type_vars(&self) -> BTreeSet<TyVar> {
        let mut out = BTreeSet::new();
        let mut bound = BTreeSet::new();
        self.collect_free_ty(&mut bound, &mut out);
        out
    }

    fn collect_free_ty(&self, bound: &mut BTreeSet<TyVar>, out: &mut BTreeSet<TyVar>) {
        let ty = |t: &Type, bound: &mut BTreeSet<TyVar>, out: &mut BTreeSet<TyVar>| {
            for a in t.free_vars() {
                if !bound.contains(&a) {
                    out.insert(a);
                }
            }
        };
        match self {
            Term::Var(_) | Term::Unit | Term::Int(_) | Term::True | Term::False => {}
            Term::Prim(_, args) => {
                for a in args {
                    a.collect_free_ty(bound, out);
                }
            }
            Term::If(c, a, b) => {
                c.collect_free_ty(bound, out);
                a.collect_free_ty(bound, out);
                b.collect_free_ty(bound, out);
            }
            Term::Pair(a, b) | Term::App(a, b) => {
                a.collect_free_ty(bound, out);
                b.collect_free_ty(bound, out);
            }
            Term::Fst(e) | Term::Snd(e) | Term::Unfold(e) => e.collect_free_ty(bound, out),
            Term::TApp(e, t) => {
                e.collect_free_ty(bound, out);
                ty(t, bound, out);
            }
            Term::Inl(t, e) | Term::Inr(t, e) | Term::Fold(t, e) => {
                ty(t, bound, out);
                e.collect_free_ty(bound, out);
            }
            Term::Pack(t1, e, t2) => {
                ty(t1, bound, out);
                e.collect_free_ty(bound, out);
                ty(t2, bound, out);
            }
            Term::Case(s, _, e1, _, e2) => {
                s.collect_free_ty(bound, out);
                e1.collect_free_ty(bound, out);
                e2.collect_free_ty(bound, out);
            }
            Term::Lam(_, t, e) => {
                ty(t, bound, out);
                e.collect_free_ty(bound, out);
            }
            Term::TLam(a, e) => {
                let added = bound.insert(a.clone());
                e.collect_free_ty(bound, out);
                if added {
                    bound.remove(a);
                }
            }
            Term::Unpack(e1, a, _, e2) => {
                e1.collect_free_ty(bound, out);
                let added = bound.insert(a.clone());
                e2.collect_free_ty(bound, out);
                if added {
                    bound.remove(a);
                }
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_term_vars().is_empty()
    }

    /// Every term-variable name occurring in the term, free or bound.
    pub fn all_term_names(&self) -> BTreeSet<TmVar> {
        fn go(e: &Term, out: &mut BTreeSet<TmVar>) {
            match e {
                Term::Var(x) => {
                    out.insert(x.clone());
                }
                Term::Unit | Term::Int(_) | Term::True | Term::False => {}
                Term::Prim(_, args) => args.iter().for_each(|a| go(a, out)),
                Term::If(a, b, c) => {
                    go(a, out);
                    go(b, out);
                    go(c, out);
                }
                Term::Pair(a, b) | Term::App(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                Term::Fst(a) | Term::Snd(a) | Term::Unfold(a) | Term::TApp(a, _) => go(a, out),
                Term::Inl(_, a) | Term::Inr(_, a) | Term::Fold(_, a) | Term::Pack(_, a, _) => {
                    go(a, out)
                }
                Term::TLam(_, a) => go(a, out),
                Term::Case(s, x1, e1, x2, e2) => {
                    go(s, out);
                    out.insert(x1.clone());
                    go(e1, out);
                    out.insert(x2.clone());
                    go(e2, out);
                }
                Term::Lam(x, _, a) => {
                    out.insert(x.clone());
                    go(a, out);
                }
                Term::Unpack(a, _, x, b) => {
                    go(a, out);
                    out.insert(x.clone());
                    go(b, out);
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut out);
        out
    }

    /// Renames every binder so that all binder names are mutually distinct
    /// and disjoint from `avoid`. The result is alpha-equivalent to `self`.
    pub fn freshen_binders(&self, avoid: &BTreeSet<String>) -> Term {
        let mut used: BTreeSet<String> = avoid.clone();
        used.extend(self.free_term_vars());
        used.extend(self.free_type_vars());
        self.freshen(&mut used)
    }

    fn freshen(&self, used: &mut BTreeSet<String>) -> Term {
        let pick = |base: &str, used: &mut BTreeSet<String>| -> String {
            let n = fresh_name(base, used);
            used.insert(n.clone());
            n
        };
        match self {
            Term::Var(_) | Term::Unit | Term::Int(_) | Term::True | Term::False => self.clone(),
            Term::Prim(op, args) => {
                Term::Prim(*op, args.iter().map(|a| a.freshen(used)).collect())
            }
            Term::If(a, b, c) => Term::If(
                Box::new(a.freshen(used)),
                Box::new(b.freshen(used)),
                Box::new(c.freshen(used)),
            ),
            Term::Pair(a, b) => Term::Pair(Box::new(a.freshen(used)), Box::new(b.freshen(used))),
            Term::App(a, b) => Term::App(Box::new(a.freshen(used)), Box::new(b.freshen(used))),
            Term::Fst(a) => Term::Fst(Box::new(a.freshen(used))),
            Term::Snd(a) => Term::Snd(Box::new(a.freshen(used))),
            Term::Unfold(a) => Term::Unfold(Box::new(a.freshen(used))),
            Term::TApp(a, t) => Term::TApp(Box::new(a.freshen(used)), t.clone()),
            Term::Inl(t, a) => Term::Inl(t.clone(), Box::new(a.freshen(used))),
            Term::Inr(t, a) => Term::Inr(t.clone(), Box::new(a.freshen(used))),
            Term::Fold(t, a) => Term::Fold(t.clone(), Box::new(a.freshen(used))),
            Term::Pack(t1, a, t2) => {
                Term::Pack(t1.clone(), Box::new(a.freshen(used)), t2.clone())
            }
            Term::Lam(x, t, body) => {
                let x2 = pick(x, used);
                let body2 = if x2 == *x { (**body).clone() } else { body.subst(x, &Term::Var(x2.clone())) };
                Term::Lam(x2, t.clone(), Box::new(body2.freshen(used)))
            }
            Term::TLam(a, body) => {
                let a2 = pick(a, used);
                let body2 = if a2 == *a { (**body).clone() } else { body.subst_ty(a, &Type::Var(a2.clone())) };
                Term::TLam(a2, Box::new(body2.freshen(used)))
            }
            Term::Case(s, x1, e1, x2, e2) => {
                let s2 = s.freshen(used);
                let x1b = pick(x1, used);
                let e1b = if x1b == *x1 { (**e1).clone() } else { e1.subst(x1, &Term::Var(x1b.clone())) };
                let e1b = e1b.freshen(used);
                let x2b = pick(x2, used);
                let e2b = if x2b == *x2 { (**e2).clone() } else { e2.subst(x2, &Term::Var(x2b.clone())) };
                let e2b = e2b.freshen(used);
                Term::Case(Box::new(s2), x1b, Box::new(e1b), x2b, Box::new(e2b))
            }
            Term::Unpack(a, al, x, b) => {
                let a2 = a.freshen(used);
                let al2 = pick(al, used);
                let b1 = if al2 == *al { (**b).clone() } else { b.subst_ty(al, &Type::Var(al2.clone())) };
                let x2 = pick(x, used);
                let b2 = if x2 == *x { b1 } else { b1.subst(x, &Term::Var(x2.clone())) };
                Term::Unpack(Box::new(a2), al2, x2, Box::new(b2.freshen(used)))
            }
        }
    }

    /// Capture-avoiding substitution of `payload` for the free term variable `x`.
    pub fn subst(&self, x: &str, payload: &Term) -> Term {
        match self {
            Term::Var(y) => {
                if y == x {
                    payload.clone()
                } else {
                    self.clone()
                }
            }
            Term::Unit | Term::Int(_) | Term::True | Term::False => self.clone(),
            Term::Prim(op, args) => {
                Term::Prim(*op, args.iter().map(|a| a.subst(x, payload)).collect())
            }
            Term::If(c, a, b) => Term::If(
                Box::new(c.subst(x, payload)),
                Box::new(a.subst(x, payload)),
                Box::new(b.subst(x, payload)),
            ),
            Term::Pair(a, b) => {
                Term::Pair(Box::new(a.subst(x, payload)), Box::new(b.subst(x, payload)))
            }
            Term::Fst(e) => Term::Fst(Box::new(e.subst(x, payload))),
            Term::Snd(e) => Term::Snd(Box::new(e.subst(x, payload))),
            Term::Inl(t, e) => Term::Inl(t.clone(), Box::new(e.subst(x, payload))),
            Term::Inr(t, e) => Term::Inr(t.clone(), Box::new(e.subst(x, payload))),
            Term::Case(s, x1, e1, x2, e2) => {
                let s2 = s.subst(x, payload);
                let (x1b, e1b) = subst_under_tm_binder(x1, e1, x, payload);
                let (x2b, e2b) = subst_under_tm_binder(x2, e2, x, payload);
                Term::Case(Box::new(s2), x1b, Box::new(e1b), x2b, Box::new(e2b))
            }
            Term::Lam(y, t, e) => {
                let (y2, e2) = subst_under_tm_binder(y, e, x, payload);
                Term::Lam(y2, t.clone(), Box::new(e2))
            }
            Term::App(a, b) => {
                Term::App(Box::new(a.subst(x, payload)), Box::new(b.subst(x, payload)))
            }
            Term::TLam(a, e) => Term::TLam(a.clone(), Box::new(e.subst(x, payload))),
            Term::TApp(e, t) => Term::TApp(Box::new(e.subst(x, payload)), t.clone()),
            Term::Pack(t1, e, t2) => {
                Term::Pack(t1.clone(), Box::new(e.subst(x, payload)), t2.clone())
            }
            Term::Unpack(e1, a, y, e2) => {
                let e1b = e1.subst(x, payload);
                let (y2, e2b) = subst_under_tm_binder(y, e2, x, payload);
                Term::Unpack(Box::new(e1b), a.clone(), y2, Box::new(e2b))
            }
            Term::Fold(t, e) => Term::Fold(t.clone(), Box::new(e.subst(x, payload))),
            Term::Unfold(e) => Term::Unfold(Box::new(e.subst(x, payload))),
        }
    }

    /// Capture-avoiding substitution of a type for a free type variable.
    pub fn subst_ty(&self, a: &str, payload: &Type) -> Term {
        match self {
            Term::Var(_) | Term::Unit | Term::Int(_) | Term::True | Term::False => self.clone(),
            Term::Prim(op, args) => {
                Term::Prim(*op, args.iter().map(|e| e.subst_ty(a, payload)).collect())
            }
            Term::If(c, x, y) => Term::If(
                Box::new(c.subst_ty(a, payload)),
                Box::new(x.subst_ty(a, payload)),
                Box::new(y.subst_ty(a, payload)),
            ),
            Term::Pair(x, y) => Term::Pair(
                Box::new(x.subst_ty(a, payload)),
                Box::new(y.subst_ty(a, payload)),
            ),
            Term::Fst(e) => Term::Fst(Box::new(e.subst_ty(a, payload))),
            Term::Snd(e) => Term::Snd(Box::new(e.subst_ty(a, payload))),
            Term::Inl(t, e) => Term::Inl(t.subst(a, payload), Box::new(e.subst_ty(a, payload))),
            Term::Inr(t, e) => Term::Inr(t.subst(a, payload), Box::new(e.subst_ty(a, payload))),
            Term::Case(s, x1, e1, x2, e2) => Term::Case(
                Box::new(s.subst_ty(a, payload)),
                x1.clone(),
                Box::new(e1.subst_ty(a, payload)),
                x2.clone(),
                Box::new(e2.subst_ty(a, payload)),
            ),
            Term::Lam(x, t, e) => Term::Lam(
                x.clone(),
                t.subst(a, payload),
                Box::new(e.subst_ty(a, payload)),
            ),
            Term::App(f, e) => Term::App(
                Box::new(f.subst_ty(a, payload)),
                Box::new(e.subst_ty(a, payload)),
            ),
            Term::TLam(b, e) => {
                if b == a {
                    self.clone()
                } else if payload.free_vars().contains(b) {
                    let mut avoid = payload.free_vars();
                    avoid.extend(e.free_type_vars());
                    avoid.insert(a.to_string());
                    let b2 = fresh_name(b, &avoid);
                    let e2 = e.subst_ty(b, &Type::Var(b2.clone()));
                    Term::TLam(b2, Box::new(e2.subst_ty(a, payload)))
                } else {
                    Term::TLam(b.clone(), Box::new(e.subst_ty(a, payload)))
                }
            }
            Term::TApp(e, t) => {
                Term::TApp(Box::new(e.subst_ty(a, payload)), t.subst(a, payload))
            }
            Term::Pack(t1, e, t2) => Term::Pack(
                t1.subst(a, payload),
                Box::new(e.subst_ty(a, payload)),
                t2.subst(a, payload),
            ),
            Term::Unpack(e1, b, x, e2) => {
                let e1s = e1.subst_ty(a, payload);
                if b == a {
                    Term::Unpack(Box::new(e1s), b.clone(), x.clone(), e2.clone())
                } else if payload.free_vars().contains(b) {
                    let mut avoid = payload.free_vars();
                    avoid.extend(e2.free_type_vars());
                    avoid.insert(a.to_string());
                    let b2 = fresh_name(b, &avoid);
                    let e2r = e2.subst_ty(b, &Type::Var(b2.clone()));
                    Term::Unpack(
                        Box::new(e1s),
                        b2,
                        x.clone(),
                        Box::new(e2r.subst_ty(a, payload)),
                    )
                } else {
                    Term::Unpack(
                        Box::new(e1s),
                        b.clone(),
                        x.clone(),
                        Box::new(e2.subst_ty(a, payload)),
                    )
                }
            }
            Term::Fold(t, e) => Term::Fold(t.subst(a, payload), Box::new(e.subst_ty(a, payload))),
            Term::Unfold(e) => Term::Unfold(Box::new(e.subst_ty(a, payload))),
        }
    }

    /// Canonical bound-variable renaming; alpha-equivalent terms map to
    /// structurally equal results.
    pub fn canonical(&self) -> Term {
        let mut counter = 0usize;
        self.canon(&mut counter, &mut Vec::new(), &mut Vec::new())
    }

    fn canon(
        &self,
        counter: &mut usize,
        tm_env: &mut Vec<(TmVar, TmVar)>,
        ty_env: &mut Vec<(TyVar, TyVar)>,
    ) -> Term {
        fn canon_ty(
            t: &Type,
            counter: &mut usize,
            ty_env: &mut Vec<(TyVar, TyVar)>,
        ) -> Type {
            // Rename free occurrences per ty_env, then canonicalize the
            // type's own binders using the shared counter.
            let mut renamed = t.clone();
            for (orig, fresh) in ty_env.iter() {
                renamed = renamed.subst(orig, &Type::Var(fresh.clone()));
            }
            renamed.canon(counter, &mut Vec::new())
        }
        let fresh = |counter: &mut usize| {
            let s = format!("%{}", counter);
            *counter += 1;
            s
        };
        match self {
            Term::Var(x) => {
                for (orig, f) in tm_env.iter().rev() {
                    if orig == x {
                        return Term::Var(f.clone());
                    }
                }
                Term::Var(x.clone())
            }
            Term::Unit | Term::Int(_) | Term::True | Term::False => self.clone(),
            Term::Prim(op, args) => Term::Prim(
                *op,
                args.iter().map(|e| e.canon(counter, tm_env, ty_env)).collect(),
            ),
            Term::If(c, a, b) => Term::If(
                Box::new(c.canon(counter, tm_env, ty_env)),
                Box::new(a.canon(counter, tm_env, ty_env)),
                Box::new(b.canon(counter, tm_env, ty_env)),
            ),
            Term::Pair(a, b) => Term::Pair(
                Box::new(a.canon(counter, tm_env, ty_env)),
                Box::new(b.canon(counter, tm_env, ty_env)),
            ),
            Term::Fst(e) => Term::Fst(Box::new(e.canon(counter, tm_env, ty_env))),
            Term::Snd(e) => Term::Snd(Box::new(e.canon(counter, tm_env, ty_env))),
            Term::Inl(t, e) => Term::Inl(
                canon_ty(t, counter, ty_env),
                Box::new(e.canon(counter, tm_env, ty_env)),
            ),
            Term::Inr(t, e) => Term::Inr(
                canon_ty(t, counter, ty_env),
                Box::new(e.canon(counter, tm_env, ty_env)),
            ),
            Term::Case(s, x1, e1, x2, e2) => {
                let sc = s.canon(counter, tm_env, ty_env);
                let f1 = fresh(counter);
                tm_env.push((x1.clone(), f1.clone()));
                let e1c = e1.canon(counter, tm_env, ty_env);
                tm_env.pop();
                let f2 = fresh(counter);
                tm_env.push((x2.clone(), f2.clone()));
                let e2c = e2.canon(counter, tm_env, ty_env);
                tm_env.pop();
                Term::Case(Box::new(sc), f1, Box::new(e1c), f2, Box::new(e2c))
            }
            Term::Lam(x, t, e) => {
                let tc = canon_ty(t, counter, ty_env);
                let f = fresh(counter);
                tm_env.push((x.clone(), f.clone()));
                let ec = e.canon(counter, tm_env, ty_env);
                tm_env.pop();
                Term::Lam(f, tc, Box::new(ec))
            }
            Term::App(a, b) => Term::App(
                Box::new(a.canon(counter, tm_env, ty_env)),
                Box::new(b.canon(counter, tm_env, ty_env)),
            ),
            Term::TLam(a, e) => {
                let f = fresh(counter);
                ty_env.push((a.clone(), f.clone()));
                let ec = e.canon(counter, tm_env, ty_env);
                ty_env.pop();
                Term::TLam(f, Box::new(ec))
            }
            Term::TApp(e, t) => Term::TApp(
                Box::new(e.canon(counter, tm_env, ty_env)),
                canon_ty(t, counter, ty_env),
            ),
            Term::Pack(t1, e, t2) => Term::Pack(
                canon_ty(t1, counter, ty_env),
                Box::new(e.canon(counter, tm_env, ty_env)),
                canon_ty(t2, counter, ty_env),
            ),
            Term::Unpack(e1, a, x, e2) => {
                let e1c = e1.canon(counter, tm_env, ty_env);
                let fa = fresh(counter);
                let fx = fresh(counter);
                ty_env.push((a.clone(), fa.clone()));
                tm_env.push((x.clone(), fx.clone()));
                let e2c = e2.canon(counter, tm_env, ty_env);
                tm_env.pop();
                ty_env.pop();
                Term::Unpack(Box::new(e1c), fa, fx, Box::new(e2c))
            }
            Term::Fold(t, e) => Term::Fold(
                canon_ty(t, counter, ty_env),
                Box::new(e.canon(counter, tm_env, ty_env)),
            ),
            Term::Unfold(e) => Term::Unfold(Box::new(e.canon(counter, tm_env, ty_env))),
        }
    }

    pub fn alpha_eq(&self, other: &Term) -> bool {
        self == other || self.canonical() == other.canonical()
    }
}

fn with_bound<F: FnOnce(&mut BTreeSet<TmVar>)>(bound: &mut BTreeSet<TmVar>, x: &TmVar, f: F) {
    let added = bound.insert(x.clone());
    f(bound);
    if added {
        bound.remove(x);
    }
}

fn subst_under_tm_binder(y: &TmVar, body: &Term, x: &str, payload: &Term) -> (TmVar, Term) {
    if y == x {
        return (y.clone(), (*body).clone());
    }
    if payload.free_term_vars().contains(y) {
        let mut avoid = payload.free_term_vars();
        avoid.extend(body.free_term_vars());
        avoid.insert(x.to_string());
        let y2 = fresh_name(y, &avoid);
        let body2 = body.subst(y, &Term::Var(y2.clone()));
        (y2, body2.subst(x, payload))
    } else {
        (y.clone(), body.subst(x, payload))
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::print::type_to_string(self))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::print::term_to_string(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subst_var_hit() {
        assert_eq!(tm_var("x").subst("x", &int(5)), int(5));
    }

    #[test]
    fn subst_shadowed_binder_is_identity() {
        let t = lam("x", Type::Int, tm_var("x"));
        assert_eq!(t.subst("x", &int(5)), t);
    }

    #[test]
    fn subst_renames_to_avoid_capture() {
        // (\y:int. x)[y/x]  must not capture: result is \y'. y
        let t = lam("y", Type::Int, tm_var("x"));
        let r = t.subst("x", &tm_var("y"));
        match &r {
            Term::Lam(b, _, body) => {
                assert_ne!(b, "y");
                assert_eq!(**body, tm_var("y"));
            }
            _ => panic!("expected lambda"),
        }
        assert!(r.alpha_eq(&lam("z", Type::Int, tm_var("y"))));
    }

    #[test]
    fn alpha_eq_binders() {
        let a = lam("x", Type::Int, tm_var("x"));
        let b = lam("y", Type::Int, tm_var("y"));
        assert!(a.alpha_eq(&b));
        let c = lam("x", Type::Bool, tm_var("x"));
        assert!(!a.alpha_eq(&c));
    }

    #[test]
    fn alpha_eq_types() {
        let a = Type::All("a".into(), Box::new(Type::Fun(Box::new(ty_var("a")), Box::new(ty_var("a")))));
        let b = Type::All("b".into(), Box::new(Type::Fun(Box::new(ty_var("b")), Box::new(ty_var("b")))));
        assert!(a.alpha_eq(&b));
    }

    #[test]
    fn type_subst_capture() {
        // (mu b. a + b)[b/a]  must rename the binder
        let t = Type::Rec(
            "b".into(),
            Box::new(Type::Sum(Box::new(ty_var("a")), Box::new(ty_var("b")))),
        );
        let r = t.subst("a", &ty_var("b"));
        match &r {
            Type::Rec(binder, body) => {
                assert_ne!(binder, "b");
                match &**body {
                    Type::Sum(l, _) => assert_eq!(**l, ty_var("b")),
                    _ => panic!(),
                }
            }
            _ => panic!(),
        }
    }
}
