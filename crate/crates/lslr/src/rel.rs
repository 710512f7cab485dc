//! Relation and proposition syntax: well-formedness with arities,
//! contractiveness, the size metric, the shallow `earlier` operator, and
//! capture-avoiding substitution for all three variable classes.

use fmu::syntax::fresh_name;
use fmu::{Ctx, Term, Type};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// A relation variable; the arity travels with the name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelVar {
    pub name: String,
    pub arity: usize,
}

impl RelVar {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        RelVar { name: name.into(), arity }
    }
}

impl fmt::Display for RelVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// Atomic relations. All are propositions except `Val`, which has arity 1.
/// Atomic relations never mention relation variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AtomicRel {
    /// Syntactic equality modulo bound-variable renaming.
    Eq(Term, Term),
    /// The unary value predicate.
    Val,
    /// Syntactic typing of a closed instantiation.
    HasType(Term, Type),
    /// `C : t ~> t'`: the context is an evaluation context of that typing.
    CtxTyped(Ctx, Type, Type),
    /// `e1 ~>* e2`
    Steps(Term, Term),
    /// `e1 ~>0 e2`: reduction with no unroll-roll step
    StepsZero(Term, Term),
    /// `e1 ~>1 e2`: reduction with exactly one unroll-roll step
    StepsOne(Term, Term),
    /// `e1 <= e2`: ciu approximation at some (unique) type
    CiuLe(Term, Term),
}

impl AtomicRel {
    pub fn arity(&self) -> usize {
        match self {
            AtomicRel::Val => 1,
            _ => 0,
        }
    }
}

/// Relations and propositions (a proposition is a relation of arity 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RelExpr {
    Var(RelVar),
    Atomic(AtomicRel),
    Top,
    Bot,
    And(Box<RelExpr>, Box<RelExpr>),
    Or(Box<RelExpr>, Box<RelExpr>),
    Imp(Box<RelExpr>, Box<RelExpr>),
    AllTerm(String, Box<RelExpr>),
    ExTerm(String, Box<RelExpr>),
    AllType(String, Box<RelExpr>),
    ExType(String, Box<RelExpr>),
    AllRel(RelVar, Box<RelExpr>),
    ExRel(RelVar, Box<RelExpr>),
    /// Relation abstraction `(x1,..,xn).P`; arity n.
    Abs(Vec<String>, Box<RelExpr>),
    /// Membership `(e1,..,en) in R`.
    Mem(Vec<Term>, Box<RelExpr>),
    /// Recursive relation; the body must be contractive in the variable.
    Mu(RelVar, Box<RelExpr>),
    Later(Box<RelExpr>),
}

pub fn and(a: RelExpr, b: RelExpr) -> RelExpr {
    RelExpr::And(Box::new(a), Box::new(b))
}

pub fn or(a: RelExpr, b: RelExpr) -> RelExpr {
    RelExpr::Or(Box::new(a), Box::new(b))
}

pub fn imp(a: RelExpr, b: RelExpr) -> RelExpr {
    RelExpr::Imp(Box::new(a), Box::new(b))
}

pub fn later(a: RelExpr) -> RelExpr {
    RelExpr::Later(Box::new(a))
}

pub fn mem2(e1: Term, e2: Term, r: RelExpr) -> RelExpr {
    RelExpr::Mem(vec![e1, e2], Box::new(r))
}

pub fn eq_tm(a: Term, b: Term) -> RelExpr {
    RelExpr::Atomic(AtomicRel::Eq(a, b))
}

pub fn is_val(e: Term) -> RelExpr {
    RelExpr::Mem(vec![e], Box::new(RelExpr::Atomic(AtomicRel::Val)))
}

pub fn has_type(e: Term, t: Type) -> RelExpr {
    RelExpr::Atomic(AtomicRel::HasType(e, t))
}

pub fn steps(a: Term, b: Term) -> RelExpr {
    RelExpr::Atomic(AtomicRel::Steps(a, b))
}

pub fn steps0(a: Term, b: Term) -> RelExpr {
    RelExpr::Atomic(AtomicRel::StepsZero(a, b))
}

pub fn steps1(a: Term, b: Term) -> RelExpr {
    RelExpr::Atomic(AtomicRel::StepsOne(a, b))
}

pub fn ciu_le(a: Term, b: Term) -> RelExpr {
    RelExpr::Atomic(AtomicRel::CiuLe(a, b))
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum WfError {
    #[error("unbound term variable {0}")]
    UnboundTermVar(String),
    #[error("unbound type variable {0}")]
    UnboundTypeVar(String),
    #[error("unbound relation variable {0}")]
    UnboundRelVar(String),
    #[error("arity mismatch: {context} expected {expected}, found {found}")]
    ArityMismatch {
        context: String,
        expected: usize,
        found: usize,
    },
    #[error("recursive relation body is not contractive in {0}")]
    NonContractive(String),
    #[error("{0}")]
    Other(String),
}

/// The entries of the first component of a combined context: term and type
/// variables, untyped.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum XVar {
    Term(String),
    Type(String),
}

impl fmt::Display for XVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XVar::Term(x) => write!(f, "{x}"),
            XVar::Type(a) => write!(f, "{a}"),
        }
    }
}

/// A combined context `X; R; P`. Hypotheses are an unordered duplicate-free
/// set (insertion order is kept only for display).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LogicCtx {
    xvars: Vec<XVar>,
    rvars: Vec<RelVar>,
    hyps: Vec<RelExpr>,
}

impl LogicCtx {
    pub fn empty() -> Self {
        Default::default()
    }

    pub fn xvars(&self) -> &[XVar] {
        &self.xvars
    }

    pub fn rvars(&self) -> &[RelVar] {
        &self.rvars
    }

    pub fn hyps(&self) -> &[RelExpr] {
        &self.hyps
    }

    pub fn has_term_var(&self, x: &str) -> bool {
        self.xvars.iter().any(|v| matches!(v, XVar::Term(y) if y == x))
    }

    pub fn has_type_var(&self, a: &str) -> bool {
        self.xvars.iter().any(|v| matches!(v, XVar::Type(b) if b == a))
    }

    pub fn rel_var(&self, name: &str) -> Option<&RelVar> {
        self.rvars.iter().find(|r| r.name == name)
    }

    pub fn with_term_var(&self, x: &str) -> LogicCtx {
        let mut c = self.clone();
        if !c.has_term_var(x) {
            c.xvars.push(XVar::Term(x.to_string()));
        }
        c
    }

    pub fn with_type_var(&self, a: &str) -> LogicCtx {
        let mut c = self.clone();
        if !c.has_type_var(a) {
            c.xvars.push(XVar::Type(a.to_string()));
        }
        c
    }

    pub fn with_rel_var(&self, r: &RelVar) -> LogicCtx {
        let mut c = self.clone();
        if c.rel_var(&r.name).is_none() {
            c.rvars.push(r.clone());
        }
        c
    }

    pub fn has_hyp(&self, p: &RelExpr) -> bool {
        let pc = p.canonical();
        self.hyps.iter().any(|h| h.canonical() == pc)
    }

    pub fn with_hyp(&self, p: RelExpr) -> LogicCtx {
        let mut c = self.clone();
        if !c.has_hyp(&p) {
            c.hyps.push(p);
        }
        c
    }

    pub fn with_hyps<I: IntoIterator<Item = RelExpr>>(&self, ps: I) -> LogicCtx {
        let mut c = self.clone();
        for p in ps {
            if !c.has_hyp(&p) {
                c.hyps.push(p);
            }
        }
        c
    }

    pub fn without_hyp(&self, p: &RelExpr) -> LogicCtx {
        let pc = p.canonical();
        let mut c = self.clone();
        c.hyps.retain(|h| h.canonical() != pc);
        c
    }

    pub fn without_term_var(&self, x: &str) -> LogicCtx {
        let mut c = self.clone();
        c.xvars.retain(|v| !matches!(v, XVar::Term(y) if y == x));
        c
    }

    pub fn without_type_var(&self, a: &str) -> LogicCtx {
        let mut c = self.clone();
        c.xvars.retain(|v| !matches!(v, XVar::Type(b) if b == a));
        c
    }

    pub fn without_rel_var(&self, name: &str) -> LogicCtx {
        let mut c = self.clone();
        c.rvars.retain(|r| r.name != name);
        c
    }

    /// Set-style inclusion: every variable and hypothesis of `self` appears
    /// in `other`.
    pub fn is_included_in(&self, other: &LogicCtx) -> bool {
        self.xvars.iter().all(|v| match v {
            XVar::Term(x) => other.has_term_var(x),
            XVar::Type(a) => other.has_type_var(a),
        }) && self
            .rvars
            .iter()
            .all(|r| other.rel_var(&r.name).map(|r2| r2.arity == r.arity).unwrap_or(false))
            && self.hyps.iter().all(|h| other.has_hyp(h))
    }

    /// Alpha-insensitive context equality (sets of hypotheses).
    pub fn same_as(&self, other: &LogicCtx) -> bool {
        self.is_included_in(other) && other.is_included_in(self)
    }

    /// The `earlier` operator: strips one top-level `later` from each
    /// hypothesis; everything else is unchanged. Purely shallow.
    pub fn earlier(&self) -> LogicCtx {
        let mut c = self.clone();
        let stripped: Vec<RelExpr> = c
            .hyps
            .into_iter()
            .map(|h| match h {
                RelExpr::Later(p) => *p,
                other => other,
            })
            .collect();
        // stripping can introduce duplicates
        let mut seen: Vec<RelExpr> = Vec::new();
        for h in stripped {
            if !seen.iter().any(|s| s.canonical() == h.canonical()) {
                seen.push(h);
            }
        }
        c.hyps = seen;
        c
    }

    /// Checks every hypothesis is a well-formed proposition in `X; R`.
    pub fn wf(&self) -> Result<(), WfError> {
        for h in &self.hyps {
            let a = rel_wf(self, h)?;
            if a != 0 {
                return Err(WfError::ArityMismatch {
                    context: "hypothesis".into(),
                    expected: 0,
                    found: a,
                });
            }
        }
        Ok(())
    }
}

/// Arity checking and contractiveness; returns the arity of `expr`.
pub fn rel_wf(ctx: &LogicCtx, expr: &RelExpr) -> Result<usize, WfError> {
    let mut tm: BTreeSet<String> = ctx
        .xvars
        .iter()
        .filter_map(|v| match v {
            XVar::Term(x) => Some(x.clone()),
            _ => None,
        })
        .collect();
    let mut ty: BTreeSet<String> = ctx
        .xvars
        .iter()
        .filter_map(|v| match v {
            XVar::Type(a) => Some(a.clone()),
            _ => None,
        })
        .collect();
    let mut rl: Vec<RelVar> = ctx.rvars.clone();
    wf_go(expr, &mut tm, &mut ty, &mut rl)
}

fn check_term_scoped(e: &Term, tm: &BTreeSet<String>, ty: &BTreeSet<String>) -> Result<(), WfError> {
    for x in e.free_term_vars() {
        if !tm.contains(&x) {
            return Err(WfError::UnboundTermVar(x));
        }
    }
    for a in e.free_type_vars() {
        if !ty.contains(&a) {
            return Err(WfError::UnboundTypeVar(a));
        }
    }
    Ok(())
}

fn check_type_scoped(t: &Type, ty: &BTreeSet<String>) -> Result<(), WfError> {
    for a in t.free_vars() {
        if !ty.contains(&a) {
            return Err(WfError::UnboundTypeVar(a));
        }
    }
    Ok(())
}

fn wf_go(
    expr: &RelExpr,
    tm: &mut BTreeSet<String>,
    ty: &mut BTreeSet<String>,
    rl: &mut Vec<RelVar>,
) -> Result<usize, WfError> {
    match expr {
        RelExpr::Var(r) => match rl.iter().rev().find(|v| v.name == r.name) {
            Some(v) if v.arity == r.arity => Ok(r.arity),
            Some(v) => Err(WfError::ArityMismatch {
                context: format!("relation variable {}", r.name),
                expected: v.arity,
                found: r.arity,
            }),
            None => Err(WfError::UnboundRelVar(r.name.clone())),
        },
        RelExpr::Atomic(a) => {
            match a {
                AtomicRel::Eq(e1, e2)
                | AtomicRel::Steps(e1, e2)
                | AtomicRel::StepsZero(e1, e2)
                | AtomicRel::StepsOne(e1, e2)
                | AtomicRel::CiuLe(e1, e2) => {
                    check_term_scoped(e1, tm, ty)?;
                    check_term_scoped(e2, tm, ty)?;
                }
                AtomicRel::Val => {}
                AtomicRel::HasType(e, t) => {
                    check_term_scoped(e, tm, ty)?;
                    check_type_scoped(t, ty)?;
                }
                AtomicRel::CtxTyped(c, t1, t2) => {
                    let plugged = c.plug(&Term::Unit);
                    check_term_scoped(&plugged, tm, ty)?;
                    check_type_scoped(t1, ty)?;
                    check_type_scoped(t2, ty)?;
                }
            }
            Ok(a.arity())
        }
        RelExpr::Top | RelExpr::Bot => Ok(0),
        RelExpr::And(a, b) | RelExpr::Or(a, b) | RelExpr::Imp(a, b) => {
            expect_prop(a, tm, ty, rl, "connective operand")?;
            expect_prop(b, tm, ty, rl, "connective operand")?;
            Ok(0)
        }
        RelExpr::AllTerm(x, p) | RelExpr::ExTerm(x, p) => {
            let added = tm.insert(x.clone());
            let r = expect_prop(p, tm, ty, rl, "quantifier body");
            if added {
                tm.remove(x);
            }
            r?;
            Ok(0)
        }
        RelExpr::AllType(a, p) | RelExpr::ExType(a, p) => {
            let added = ty.insert(a.clone());
            let r = expect_prop(p, tm, ty, rl, "quantifier body");
            if added {
                ty.remove(a);
            }
            r?;
            Ok(0)
        }
        RelExpr::AllRel(rv, p) | RelExpr::ExRel(rv, p) => {
            rl.push(rv.clone());
            let r = expect_prop(p, tm, ty, rl, "quantifier body");
            rl.pop();
            r?;
            Ok(0)
        }
        RelExpr::Abs(xs, p) => {
            let mut added = Vec::new();
            for x in xs {
                if tm.insert(x.clone()) {
                    added.push(x.clone());
                }
            }
            let r = expect_prop(p, tm, ty, rl, "abstraction body");
            for x in added {
                tm.remove(&x);
            }
            r?;
            Ok(xs.len())
        }
        RelExpr::Mem(es, r) => {
            for e in es {
                check_term_scoped(e, tm, ty)?;
            }
            let ar = wf_go(r, tm, ty, rl)?;
            if ar != es.len() {
                return Err(WfError::ArityMismatch {
                    context: "membership".into(),
                    expected: ar,
                    found: es.len(),
                });
            }
            Ok(0)
        }
        RelExpr::Mu(rv, body) => {
            if !contractive_in(body, &rv.name) {
                return Err(WfError::NonContractive(rv.name.clone()));
            }
            rl.push(rv.clone());
            let ar = wf_go(body, tm, ty, rl);
            rl.pop();
            let ar = ar?;
            if ar != rv.arity {
                return Err(WfError::ArityMismatch {
                    context: format!("mu {}", rv.name),
                    expected: rv.arity,
                    found: ar,
                });
            }
            Ok(ar)
        }
        RelExpr::Later(p) => {
            expect_prop(p, tm, ty, rl, "later operand")?;
            Ok(0)
        }
    }
}

fn expect_prop(
    e: &RelExpr,
    tm: &mut BTreeSet<String>,
    ty: &mut BTreeSet<String>,
    rl: &mut Vec<RelVar>,
    what: &str,
) -> Result<(), WfError> {
    let a = wf_go(e, tm, ty, rl)?;
    if a != 0 {
        return Err(WfError::ArityMismatch {
            context: what.into(),
            expected: 0,
            found: a,
        });
    }
    Ok(())
}

/// Every free occurrence of `r` lies beneath at least one `later`.
pub fn contractive_in(expr: &RelExpr, r: &str) -> bool {
    match expr {
        RelExpr::Var(v) => v.name != r,
        RelExpr::Atomic(_) | RelExpr::Top | RelExpr::Bot => true,
        RelExpr::And(a, b) | RelExpr::Or(a, b) | RelExpr::Imp(a, b) => {
            contractive_in(a, r) && contractive_in(b, r)
        }
        RelExpr::AllTerm(_, p)
        | RelExpr::ExTerm(_, p)
        | RelExpr::AllType(_, p)
        | RelExpr::ExType(_, p)
        | RelExpr::Abs(_, p) => contractive_in(p, r),
        RelExpr::AllRel(rv, p) | RelExpr::ExRel(rv, p) | RelExpr::Mu(rv, p) => {
            rv.name == r || contractive_in(p, r)
        }
        RelExpr::Mem(_, rel) => contractive_in(rel, r),
        RelExpr::Later(_) => true,
    }
}

/// Size: the number of logical/relational connectives, with anything inside
/// a `later` ignored (`later P` has constant size 1).
pub fn size(expr: &RelExpr) -> usize {
    match expr {
        RelExpr::Var(_) | RelExpr::Atomic(_) => 0,
        RelExpr::Top | RelExpr::Bot => 1,
        RelExpr::And(a, b) | RelExpr::Or(a, b) | RelExpr::Imp(a, b) => 1 + size(a) + size(b),
        RelExpr::AllTerm(_, p)
        | RelExpr::ExTerm(_, p)
        | RelExpr::AllType(_, p)
        | RelExpr::ExType(_, p)
        | RelExpr::AllRel(_, p)
        | RelExpr::ExRel(_, p)
        | RelExpr::Abs(_, p)
        | RelExpr::Mu(_, p) => 1 + size(p),
        RelExpr::Mem(_, r) => 1 + size(r),
        RelExpr::Later(_) => 1,
    }
}

impl RelExpr {
    pub fn arity_unchecked(&self) -> usize {
        match self {
            RelExpr::Var(r) => r.arity,
            RelExpr::Atomic(a) => a.arity(),
            RelExpr::Abs(xs, _) => xs.len(),
            RelExpr::Mu(r, _) => r.arity,
            _ => 0,
        }
    }

    pub fn free_term_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.ftv_go(&mut BTreeSet::new(), &mut out);
        out
    }

    fn ftv_go(&self, bound: &mut BTreeSet<String>, out: &mut BTreeSet<String>) {
        let add_term = |e: &Term, bound: &BTreeSet<String>, out: &mut BTreeSet<String>| {
            for x in e.free_term_vars() {
                if !bound.contains(&x) {
                    out.insert(x);
                }
            }
        };
        match self {
            RelExpr::Var(_) | RelExpr::Top | RelExpr::Bot => {}
            RelExpr::Atomic(a) => match a {
                AtomicRel::Eq(e1, e2)
                | AtomicRel::Steps(e1, e2)
                | AtomicRel::StepsZero(e1, e2)
                | AtomicRel::StepsOne(e1, e2)
                | AtomicRel::CiuLe(e1, e2) => {
                    add_term(e1, bound, out);
                    add_term(e2, bound, out);
                }
                AtomicRel::Val => {}
                AtomicRel::HasType(e, _) => add_term(e, bound, out),
                AtomicRel::CtxTyped(c, _, _) => add_term(&c.plug(&Term::Unit), bound, out),
            },
            RelExpr::And(a, b) | RelExpr::Or(a, b) | RelExpr::Imp(a, b) => {
                a.ftv_go(bound, out);
                b.ftv_go(bound, out);
            }
            RelExpr::AllTerm(x, p) | RelExpr::ExTerm(x, p) => {
                let added = bound.insert(x.clone());
                p.ftv_go(bound, out);
                if added {
                    bound.remove(x);
                }
            }
            RelExpr::AllType(_, p) | RelExpr::ExType(_, p) => p.ftv_go(bound, out),
            RelExpr::AllRel(_, p) | RelExpr::ExRel(_, p) | RelExpr::Mu(_, p) => p.ftv_go(bound, out),
            RelExpr::Abs(xs, p) => {
                let mut added = Vec::new();
                for x in xs {
                    if bound.insert(x.clone()) {
                        added.push(x.clone());
                    }
                }
                p.ftv_go(bound, out);
                for x in added {
                    bound.remove(&x);
                }
            }
            RelExpr::Mem(es, r) => {
                for e in es {
                    add_term(e, bound, out);
                }
                r.ftv_go(bound, out);
            }
            RelExpr::Later(p) => p.ftv_go(bound, out),
        }
    }

    pub fn free_type_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.ftyv_go(&mut BTreeSet::new(), &mut out);
        out
    }

    fn ftyv_go(&self, bound: &mut BTreeSet<String>, out: &mut BTreeSet<String>) {
        let add = |vs: BTreeSet<String>, bound: &BTreeSet<String>, out: &mut BTreeSet<String>| {
            for a in vs {
                if !bound.contains(&a) {
                    out.insert(a);
                }
            }
        };
        match self {
            RelExpr::Var(_) | RelExpr::Top | RelExpr::Bot => {}
            RelExpr::Atomic(a) => match a {
                AtomicRel::Eq(e1, e2)
                | AtomicRel::Steps(e1, e2)
                | AtomicRel::StepsZero(e1, e2)
                | AtomicRel::StepsOne(e1, e2)
                | AtomicRel::CiuLe(e1, e2) => {
                    add(e1.free_type_vars(), bound, out);
                    add(e2.free_type_vars(), bound, out);
                }
                AtomicRel::Val => {}
                AtomicRel::HasType(e, t) => {
                    add(e.free_type_vars(), bound, out);
                    add(t.free_vars(), bound, out);
                }
                AtomicRel::CtxTyped(c, t1, t2) => {
                    add(c.plug(&Term::Unit).free_type_vars(), bound, out);
                    add(t1.free_vars(), bound, out);
                    add(t2.free_vars(), bound, out);
                }
            },
            RelExpr::And(a, b) | RelExpr::Or(a, b) | RelExpr::Imp(a, b) => {
                a.ftyv_go(bound, out);
                b.ftyv_go(bound, out);
            }
            RelExpr::AllType(a, p) | RelExpr::ExType(a, p) => {
                let added = bound.insert(a.clone());
                p.ftyv_go(bound, out);
                if added {
                    bound.remove(a);
                }
            }
            RelExpr::AllTerm(_, p) | RelExpr::ExTerm(_, p) => p.ftyv_go(bound, out),
            RelExpr::AllRel(_, p) | RelExpr::ExRel(_, p) | RelExpr::Mu(_, p) => {
                p.ftyv_go(bound, out)
            }
            RelExpr::Abs(_, p) => p.ftyv_go(bound, out),
            RelExpr::Mem(es, r) => {
                for e in es {
                    add(e.free_type_vars(), bound, out);
                }
                r.ftyv_go(bound, out);
            }
            RelExpr::Later(p) => p.ftyv_go(bound, out),
        }
    }

    pub fn free_rel_vars(&self) -> BTreeSet<RelVar> {
        let mut out = BTreeSet::new();
        self.frv_go(&mut Vec::new(), &mut out);
        out
    }

    fn frv_go(&self, bound: &mut Vec<String>, out: &mut BTreeSet<RelVar>) {
        match self {
            RelExpr::Var(r) => {
                if !bound.iter().any(|b| *b == r.name) {
                    out.insert(r.clone());
                }
            }
            RelExpr::Atomic(_) | RelExpr::Top | RelExpr::Bot => {}
            RelExpr::And(a, b) | RelExpr::Or(a, b) | RelExpr::Imp(a, b) => {
                a.frv_go(bound, out);
                b.frv_go(bound, out);
            }
            RelExpr::AllTerm(_, p)
            | RelExpr::ExTerm(_, p)
            | RelExpr::AllType(_, p)
            | RelExpr::ExType(_, p)
            | RelExpr::Abs(_, p)
            | RelExpr::Later(p) => p.frv_go(bound, out),
            RelExpr::AllRel(rv, p) | RelExpr::ExRel(rv, p) | RelExpr::Mu(rv, p) => {
                bound.push(rv.name.clone());
                p.frv_go(bound, out);
                bound.pop();
            }
            RelExpr::Mem(_, r) => r.frv_go(bound, out),
        }
    }

    /// First-order propositions: no relation variables, no recursive
    /// relations, no second-order quantifiers, no later operator.
    pub fn is_first_order(&self) -> bool {
        match self {
            RelExpr::Var(_)
            | RelExpr::Mu(..)
            | RelExpr::AllRel(..)
            | RelExpr::ExRel(..)
            | RelExpr::Later(_) => false,
            RelExpr::Atomic(_) | RelExpr::Top | RelExpr::Bot => true,
            RelExpr::And(a, b) | RelExpr::Or(a, b) | RelExpr::Imp(a, b) => {
                a.is_first_order() && b.is_first_order()
            }
            RelExpr::AllTerm(_, p)
            | RelExpr::ExTerm(_, p)
            | RelExpr::AllType(_, p)
            | RelExpr::ExType(_, p)
            | RelExpr::Abs(_, p) => p.is_first_order(),
            RelExpr::Mem(_, r) => r.is_first_order(),
        }
    }

    // ---- substitution ----

    /// Capture-avoiding substitution of a term for a free term variable.
    pub fn subst_term(&self, x: &str, payload: &Term) -> RelExpr {
        match self {
            RelExpr::Var(_) | RelExpr::Top | RelExpr::Bot => self.clone(),
            RelExpr::Atomic(a) => RelExpr::Atomic(subst_atomic_term(a, x, payload)),
            RelExpr::And(a, b) => and(a.subst_term(x, payload), b.subst_term(x, payload)),
            RelExpr::Or(a, b) => or(a.subst_term(x, payload), b.subst_term(x, payload)),
            RelExpr::Imp(a, b) => imp(a.subst_term(x, payload), b.subst_term(x, payload)),
            RelExpr::AllTerm(y, p) => {
                let (y2, p2) = under_term_binder(y, p, x, payload);
                RelExpr::AllTerm(y2, Box::new(p2))
            }
            RelExpr::ExTerm(y, p) => {
                let (y2, p2) = under_term_binder(y, p, x, payload);
                RelExpr::ExTerm(y2, Box::new(p2))
            }
            RelExpr::AllType(a, p) => RelExpr::AllType(a.clone(), Box::new(p.subst_term(x, payload))),
            RelExpr::ExType(a, p) => RelExpr::ExType(a.clone(), Box::new(p.subst_term(x, payload))),
            RelExpr::AllRel(r, p) => RelExpr::AllRel(r.clone(), Box::new(p.subst_term(x, payload))),
            RelExpr::ExRel(r, p) => RelExpr::ExRel(r.clone(), Box::new(p.subst_term(x, payload))),
            RelExpr::Abs(xs, p) => {
                if xs.iter().any(|y| y == x) {
                    self.clone()
                } else {
                    let fv = payload.free_term_vars();
                    if xs.iter().any(|y| fv.contains(y)) {
                        // rename colliding tuple binders
                        let mut avoid: BTreeSet<String> = fv.clone();
                        avoid.extend(p.free_term_vars());
                        avoid.insert(x.to_string());
                        avoid.extend(xs.iter().cloned());
                        let mut p2 = (**p).clone();
                        let mut xs2 = Vec::new();
                        for y in xs {
                            if fv.contains(y) {
                                let y2 = fresh_name(y, &avoid);
                                avoid.insert(y2.clone());
                                p2 = p2.subst_term(y, &Term::Var(y2.clone()));
                                xs2.push(y2);
                            } else {
                                xs2.push(y.clone());
                            }
                        }
                        RelExpr::Abs(xs2, Box::new(p2.subst_term(x, payload)))
                    } else {
                        RelExpr::Abs(xs.clone(), Box::new(p.subst_term(x, payload)))
                    }
                }
            }
            RelExpr::Mem(es, r) => RelExpr::Mem(
                es.iter().map(|e| e.subst(x, payload)).collect(),
                Box::new(r.subst_term(x, payload)),
            ),
            RelExpr::Mu(rv, p) => RelExpr::Mu(rv.clone(), Box::new(p.subst_term(x, payload))),
            RelExpr::Later(p) => later(p.subst_term(x, payload)),
        }
    }

    /// Capture-avoiding substitution of a type for a free type variable.
    pub fn subst_type(&self, a: &str, payload: &Type) -> RelExpr {
        match self {
            RelExpr::Var(_) | RelExpr::Top | RelExpr::Bot => self.clone(),
            RelExpr::Atomic(at) => RelExpr::Atomic(subst_atomic_type(at, a, payload)),
            RelExpr::And(p, q) => and(p.subst_type(a, payload), q.subst_type(a, payload)),
            RelExpr::Or(p, q) => or(p.subst_type(a, payload), q.subst_type(a, payload)),
            RelExpr::Imp(p, q) => imp(p.subst_type(a, payload), q.subst_type(a, payload)),
            RelExpr::AllTerm(x, p) => RelExpr::AllTerm(x.clone(), Box::new(p.subst_type(a, payload))),
            RelExpr::ExTerm(x, p) => RelExpr::ExTerm(x.clone(), Box::new(p.subst_type(a, payload))),
            RelExpr::AllType(b, p) => {
                let (b2, p2) = under_type_binder(b, p, a, payload);
                RelExpr::AllType(b2, Box::new(p2))
            }
            RelExpr::ExType(b, p) => {
                let (b2, p2) = under_type_binder(b, p, a, payload);
                RelExpr::ExType(b2, Box::new(p2))
            }
            RelExpr::AllRel(r, p) => RelExpr::AllRel(r.clone(), Box::new(p.subst_type(a, payload))),
            RelExpr::ExRel(r, p) => RelExpr::ExRel(r.clone(), Box::new(p.subst_type(a, payload))),
            RelExpr::Abs(xs, p) => RelExpr::Abs(xs.clone(), Box::new(p.subst_type(a, payload))),
            RelExpr::Mem(es, r) => RelExpr::Mem(
                es.iter().map(|e| e.subst_ty(a, payload)).collect(),
                Box::new(r.subst_type(a, payload)),
            ),
            RelExpr::Mu(rv, p) => RelExpr::Mu(rv.clone(), Box::new(p.subst_type(a, payload))),
            RelExpr::Later(p) => later(p.subst_type(a, payload)),
        }
    }

    /// Capture-avoiding substitution of a relation for a free relation
    /// variable. The payload's arity must match the variable's.
    pub fn subst_rel(&self, r: &str, payload: &RelExpr) -> RelExpr {
        match self {
            RelExpr::Var(v) => {
                if v.name == r {
                    payload.clone()
                } else {
                    self.clone()
                }
            }
            RelExpr::Atomic(_) | RelExpr::Top | RelExpr::Bot => self.clone(),
            RelExpr::And(a, b) => and(a.subst_rel(r, payload), b.subst_rel(r, payload)),
            RelExpr::Or(a, b) => or(a.subst_rel(r, payload), b.subst_rel(r, payload)),
            RelExpr::Imp(a, b) => imp(a.subst_rel(r, payload), b.subst_rel(r, payload)),
            RelExpr::AllTerm(x, p) => {
                let (x2, p2) = rel_subst_under_term_binder(x, p, r, payload);
                RelExpr::AllTerm(x2, Box::new(p2))
            }
            RelExpr::ExTerm(x, p) => {
                let (x2, p2) = rel_subst_under_term_binder(x, p, r, payload);
                RelExpr::ExTerm(x2, Box::new(p2))
            }
            RelExpr::AllType(a, p) => {
                let (a2, p2) = rel_subst_under_type_binder(a, p, r, payload);
                RelExpr::AllType(a2, Box::new(p2))
            }
            RelExpr::ExType(a, p) => {
                let (a2, p2) = rel_subst_under_type_binder(a, p, r, payload);
                RelExpr::ExType(a2, Box::new(p2))
            }
            RelExpr::AllRel(rv, p) => {
                let (rv2, p2) = rel_subst_under_rel_binder(rv, p, r, payload);
                match (rv2, p2) {
                    (Some(rv2), p2) => RelExpr::AllRel(rv2, Box::new(p2)),
                    (None, _) => self.clone(),
                }
            }
            RelExpr::ExRel(rv, p) => {
                let (rv2, p2) = rel_subst_under_rel_binder(rv, p, r, payload);
                match (rv2, p2) {
                    (Some(rv2), p2) => RelExpr::ExRel(rv2, Box::new(p2)),
                    (None, _) => self.clone(),
                }
            }
            RelExpr::Abs(xs, p) => {
                // tuple binders may capture payload term variables
                let fv = payload.free_term_vars();
                if xs.iter().any(|y| fv.contains(y)) {
                    let mut avoid: BTreeSet<String> = fv.clone();
                    avoid.extend(p.free_term_vars());
                    avoid.extend(xs.iter().cloned());
                    let mut p2 = (**p).clone();
                    let mut xs2 = Vec::new();
                    for y in xs {
                        if fv.contains(y) {
                            let y2 = fresh_name(y, &avoid);
                            avoid.insert(y2.clone());
                            p2 = p2.subst_term(y, &Term::Var(y2.clone()));
                            xs2.push(y2);
                        } else {
                            xs2.push(y.clone());
                        }
                    }
                    RelExpr::Abs(xs2, Box::new(p2.subst_rel(r, payload)))
                } else {
                    RelExpr::Abs(xs.clone(), Box::new(p.subst_rel(r, payload)))
                }
            }
            RelExpr::Mem(es, rel) => {
                RelExpr::Mem(es.clone(), Box::new(rel.subst_rel(r, payload)))
            }
            RelExpr::Mu(rv, p) => {
                let (rv2, p2) = rel_subst_under_rel_binder(rv, p, r, payload);
                match (rv2, p2) {
                    (Some(rv2), p2) => RelExpr::Mu(rv2, Box::new(p2)),
                    (None, _) => self.clone(),
                }
            }
            RelExpr::Later(p) => later(p.subst_rel(r, payload)),
        }
    }

    /// `mu r. R` expanded one step: `R[mu r.R / r]`. Panics on non-mu input.
    pub fn mu_unfold(&self) -> RelExpr {
        match self {
            RelExpr::Mu(rv, body) => body.subst_rel(&rv.name, self),
            _ => panic!("mu_unfold on non-mu relation"),
        }
    }

    // ---- canonicalization / alpha-equivalence ----

    /// Renames all bound variables (term, type, relation — including binders
    /// inside embedded terms and types) to a canonical spine, so that
    /// alpha-equivalent expressions are structurally equal. Prop-level
    /// binders use the `$n` namespace; binders inside embedded terms use the
    /// term canonicalizer's `%n` namespace.
    pub fn canonical(&self) -> RelExpr {
        let mut counter = 0usize;
        self.canon(&mut counter, &mut Vec::new(), &mut Vec::new(), &mut Vec::new())
    }

    pub fn alpha_eq(&self, other: &RelExpr) -> bool {
        self == other || self.canonical() == other.canonical()
    }

    fn canon(
        &self,
        counter: &mut usize,
        tm_env: &mut Vec<(String, String)>,
        ty_env: &mut Vec<(String, String)>,
        rl_env: &mut Vec<(String, String)>,
    ) -> RelExpr {
        let fresh = |counter: &mut usize| {
            let s = format!("${}", counter);
            *counter += 1;
            s
        };
        let fix_term = |e: &Term, tm_env: &Vec<(String, String)>, ty_env: &Vec<(String, String)>| {
            let mut t = e.clone();
            for (o, n) in tm_env.iter() {
                t = t.subst(o, &Term::Var(n.clone()));
            }
            for (o, n) in ty_env.iter() {
                t = t.subst_ty(o, &Type::Var(n.clone()));
            }
            t.canonical()
        };
        let fix_type = |t: &Type, ty_env: &Vec<(String, String)>| {
            let mut t2 = t.clone();
            for (o, n) in ty_env.iter() {
                t2 = t2.subst(o, &Type::Var(n.clone()));
            }
            t2.canonical()
        };
        match self {
            RelExpr::Var(r) => {
                for (o, n) in rl_env.iter().rev() {
                    if *o == r.name {
                        return RelExpr::Var(RelVar::new(n.clone(), r.arity));
                    }
                }
                self.clone()
            }
            RelExpr::Top | RelExpr::Bot => self.clone(),
            RelExpr::Atomic(a) => RelExpr::Atomic(match a {
                AtomicRel::Eq(e1, e2) => {
                    AtomicRel::Eq(fix_term(e1, tm_env, ty_env), fix_term(e2, tm_env, ty_env))
                }
                AtomicRel::Val => AtomicRel::Val,
                AtomicRel::HasType(e, t) => {
                    AtomicRel::HasType(fix_term(e, tm_env, ty_env), fix_type(t, ty_env))
                }
                AtomicRel::CtxTyped(c, t1, t2) => {
                    // rename via a plug with a reserved sentinel variable
                    let sentinel = "$hole$";
                    let plugged = c.plug(&Term::Var(sentinel.into()));
                    let renamed = {
                        let mut t = plugged;
                        for (o, n) in tm_env.iter() {
                            t = t.subst(o, &Term::Var(n.clone()));
                        }
                        for (o, n) in ty_env.iter() {
                            t = t.subst_ty(o, &Type::Var(n.clone()));
                        }
                        t
                    };
                    let back = term_to_ctx(&renamed, sentinel);
                    AtomicRel::CtxTyped(back, fix_type(t1, ty_env), fix_type(t2, ty_env))
                }
                AtomicRel::Steps(e1, e2) => {
                    AtomicRel::Steps(fix_term(e1, tm_env, ty_env), fix_term(e2, tm_env, ty_env))
                }
                AtomicRel::StepsZero(e1, e2) => AtomicRel::StepsZero(
                    fix_term(e1, tm_env, ty_env),
                    fix_term(e2, tm_env, ty_env),
                ),
                AtomicRel::StepsOne(e1, e2) => AtomicRel::StepsOne(
                    fix_term(e1, tm_env, ty_env),
                    fix_term(e2, tm_env, ty_env),
                ),
                AtomicRel::CiuLe(e1, e2) => {
                    AtomicRel::CiuLe(fix_term(e1, tm_env, ty_env), fix_term(e2, tm_env, ty_env))
                }
            }),
            RelExpr::And(a, b) => and(
                a.canon(counter, tm_env, ty_env, rl_env),
                b.canon(counter, tm_env, ty_env, rl_env),
            ),
            RelExpr::Or(a, b) => or(
                a.canon(counter, tm_env, ty_env, rl_env),
                b.canon(counter, tm_env, ty_env, rl_env),
            ),
            RelExpr::Imp(a, b) => imp(
                a.canon(counter, tm_env, ty_env, rl_env),
                b.canon(counter, tm_env, ty_env, rl_env),
            ),
            RelExpr::AllTerm(x, p) => {
                let f = fresh(counter);
                tm_env.push((x.clone(), f.clone()));
                let p2 = p.canon(counter, tm_env, ty_env, rl_env);
                tm_env.pop();
                RelExpr::AllTerm(f, Box::new(p2))
            }
            RelExpr::ExTerm(x, p) => {
                let f = fresh(counter);
                tm_env.push((x.clone(), f.clone()));
                let p2 = p.canon(counter, tm_env, ty_env, rl_env);
                tm_env.pop();
                RelExpr::ExTerm(f, Box::new(p2))
            }
            RelExpr::AllType(a, p) => {
                let f = fresh(counter);
                ty_env.push((a.clone(), f.clone()));
                let p2 = p.canon(counter, tm_env, ty_env, rl_env);
                ty_env.pop();
                RelExpr::AllType(f, Box::new(p2))
            }
            RelExpr::ExType(a, p) => {
                let f = fresh(counter);
                ty_env.push((a.clone(), f.clone()));
                let p2 = p.canon(counter, tm_env, ty_env, rl_env);
                ty_env.pop();
                RelExpr::ExType(f, Box::new(p2))
            }
            RelExpr::AllRel(rv, p) => {
                let f = fresh(counter);
                rl_env.push((rv.name.clone(), f.clone()));
                let p2 = p.canon(counter, tm_env, ty_env, rl_env);
                rl_env.pop();
                RelExpr::AllRel(RelVar::new(f, rv.arity), Box::new(p2))
            }
            RelExpr::ExRel(rv, p) => {
                let f = fresh(counter);
                rl_env.push((rv.name.clone(), f.clone()));
                let p2 = p.canon(counter, tm_env, ty_env, rl_env);
                rl_env.pop();
                RelExpr::ExRel(RelVar::new(f, rv.arity), Box::new(p2))
            }
            RelExpr::Abs(xs, p) => {
                let mut fs = Vec::new();
                for x in xs {
                    let f = fresh(counter);
                    tm_env.push((x.clone(), f.clone()));
                    fs.push(f);
                }
                let p2 = p.canon(counter, tm_env, ty_env, rl_env);
                for _ in xs {
                    tm_env.pop();
                }
                RelExpr::Abs(fs, Box::new(p2))
            }
            RelExpr::Mem(es, r) => RelExpr::Mem(
                es.iter().map(|e| fix_term(e, tm_env, ty_env)).collect(),
                Box::new(r.canon(counter, tm_env, ty_env, rl_env)),
            ),
            RelExpr::Mu(rv, p) => {
                let f = fresh(counter);
                rl_env.push((rv.name.clone(), f.clone()));
                let p2 = p.canon(counter, tm_env, ty_env, rl_env);
                rl_env.pop();
                RelExpr::Mu(RelVar::new(f, rv.arity), Box::new(p2))
            }
            RelExpr::Later(p) => later(p.canon(counter, tm_env, ty_env, rl_env)),
        }
    }
}

/// Rebuilds a context from a plugged term containing exactly one occurrence
/// of the sentinel variable.
pub fn term_to_ctx(t: &Term, sentinel: &str) -> Ctx {
    fn go(t: &Term, s: &str) -> Option<Ctx> {
        if let Term::Var(x) = t {
            if x == s {
                return Some(Ctx::Hole);
            }
        }
        match t {
            Term::Var(_) | Term::Unit | Term::Int(_) | Term::True | Term::False => None,
            Term::Prim(op, args) => {
                let idx = args.iter().position(|a| a.free_term_vars().contains(s))?;
                let c = go(&args[idx], s)?;
                Some(Ctx::Prim(
                    *op,
                    args[..idx].to_vec(),
                    Box::new(c),
                    args[idx + 1..].to_vec(),
                ))
            }
            Term::If(a, b, c) => {
                if a.free_term_vars().contains(s) {
                    Some(Ctx::If0(Box::new(go(a, s)?), (**b).clone(), (**c).clone()))
                } else if b.free_term_vars().contains(s) {
                    Some(Ctx::If1((**a).clone(), Box::new(go(b, s)?), (**c).clone()))
                } else {
                    Some(Ctx::If2((**a).clone(), (**b).clone(), Box::new(go(c, s)?)))
                }
            }
            Term::Pair(a, b) => {
                if a.free_term_vars().contains(s) {
                    Some(Ctx::Pair0(Box::new(go(a, s)?), (**b).clone()))
                } else {
                    Some(Ctx::Pair1((**a).clone(), Box::new(go(b, s)?)))
                }
            }
            Term::Fst(a) => Some(Ctx::Fst(Box::new(go(a, s)?))),
            Term::Snd(a) => Some(Ctx::Snd(Box::new(go(a, s)?))),
            Term::Inl(t1, a) => Some(Ctx::Inl(t1.clone(), Box::new(go(a, s)?))),
            Term::Inr(t1, a) => Some(Ctx::Inr(t1.clone(), Box::new(go(a, s)?))),
            Term::Case(sc, x1, e1, x2, e2) => {
                if sc.free_term_vars().contains(s) {
                    Some(Ctx::Case0(
                        Box::new(go(sc, s)?),
                        x1.clone(),
                        (**e1).clone(),
                        x2.clone(),
                        (**e2).clone(),
                    ))
                } else if e1.free_term_vars().contains(s) {
                    Some(Ctx::Case1(
                        (**sc).clone(),
                        x1.clone(),
                        Box::new(go(e1, s)?),
                        x2.clone(),
                        (**e2).clone(),
                    ))
                } else {
                    Some(Ctx::Case2(
                        (**sc).clone(),
                        x1.clone(),
                        (**e1).clone(),
                        x2.clone(),
                        Box::new(go(e2, s)?),
                    ))
                }
            }
            Term::Lam(x, t1, b) => Some(Ctx::Lam(x.clone(), t1.clone(), Box::new(go(b, s)?))),
            Term::App(a, b) => {
                if a.free_term_vars().contains(s) {
                    Some(Ctx::App0(Box::new(go(a, s)?), (**b).clone()))
                } else {
                    Some(Ctx::App1((**a).clone(), Box::new(go(b, s)?)))
                }
            }
            Term::TLam(a, b) => Some(Ctx::TLam(a.clone(), Box::new(go(b, s)?))),
            Term::TApp(a, t1) => Some(Ctx::TApp(Box::new(go(a, s)?), t1.clone())),
            Term::Pack(t1, a, t2) => {
                Some(Ctx::Pack(t1.clone(), Box::new(go(a, s)?), t2.clone()))
            }
            Term::Unpack(a, al, x, b) => {
                if a.free_term_vars().contains(s) {
                    Some(Ctx::Unpack0(Box::new(go(a, s)?), al.clone(), x.clone(), (**b).clone()))
                } else {
                    Some(Ctx::Unpack1((**a).clone(), al.clone(), x.clone(), Box::new(go(b, s)?)))
                }
            }
            Term::Fold(t1, a) => Some(Ctx::Fold(t1.clone(), Box::new(go(a, s)?))),
            Term::Unfold(a) => Some(Ctx::Unfold(Box::new(go(a, s)?))),
        }
    }
    go(t, sentinel).expect("sentinel not found while rebuilding context")
}

fn subst_atomic_term(a: &AtomicRel, x: &str, payload: &Term) -> AtomicRel {
    match a {
        AtomicRel::Eq(e1, e2) => AtomicRel::Eq(e1.subst(x, payload), e2.subst(x, payload)),
        AtomicRel::Val => AtomicRel::Val,
        AtomicRel::HasType(e, t) => AtomicRel::HasType(e.subst(x, payload), t.clone()),
        AtomicRel::CtxTyped(c, t1, t2) => {
            let sentinel = "$hole$";
            let plugged = c.plug(&Term::Var(sentinel.into()));
            let renamed = plugged.subst(x, payload);
            AtomicRel::CtxTyped(term_to_ctx(&renamed, sentinel), t1.clone(), t2.clone())
        }
        AtomicRel::Steps(e1, e2) => AtomicRel::Steps(e1.subst(x, payload), e2.subst(x, payload)),
        AtomicRel::StepsZero(e1, e2) => {
            AtomicRel::StepsZero(e1.subst(x, payload), e2.subst(x, payload))
        }
        AtomicRel::StepsOne(e1, e2) => {
            AtomicRel::StepsOne(e1.subst(x, payload), e2.subst(x, payload))
        }
        AtomicRel::CiuLe(e1, e2) => AtomicRel::CiuLe(e1.subst(x, payload), e2.subst(x, payload)),
    }
}

fn subst_atomic_type(a: &AtomicRel, v: &str, payload: &Type) -> AtomicRel {
    match a {
        AtomicRel::Eq(e1, e2) => AtomicRel::Eq(e1.subst_ty(v, payload), e2.subst_ty(v, payload)),
        AtomicRel::Val => AtomicRel::Val,
        AtomicRel::HasType(e, t) => {
            AtomicRel::HasType(e.subst_ty(v, payload), t.subst(v, payload))
        }
        AtomicRel::CtxTyped(c, t1, t2) => {
            let sentinel = "$hole$";
            let plugged = c.plug(&Term::Var(sentinel.into()));
            let renamed = plugged.subst_ty(v, payload);
            AtomicRel::CtxTyped(
                term_to_ctx(&renamed, sentinel),
                t1.subst(v, payload),
                t2.subst(v, payload),
            )
        }
        AtomicRel::Steps(e1, e2) => {
            AtomicRel::Steps(e1.subst_ty(v, payload), e2.subst_ty(v, payload))
        }
        AtomicRel::StepsZero(e1, e2) => {
            AtomicRel::StepsZero(e1.subst_ty(v, payload), e2.subst_ty(v, payload))
        }
        AtomicRel::StepsOne(e1, e2) => {
            AtomicRel::StepsOne(e1.subst_ty(v, payload), e2.subst_ty(v, payload))
        }
        AtomicRel::CiuLe(e1, e2) => {
            AtomicRel::CiuLe(e1.subst_ty(v, payload), e2.subst_ty(v, payload))
        }
    }
}

fn under_term_binder(y: &str, body: &RelExpr, x: &str, payload: &Term) -> (String, RelExpr) {
    if y == x {
        return (y.to_string(), body.clone());
    }
    if payload.free_term_vars().contains(y) {
        let mut avoid = payload.free_term_vars();
        avoid.extend(body.free_term_vars());
        avoid.insert(x.to_string());
        let y2 = fresh_name(y, &avoid);
        let body2 = body.subst_term(y, &Term::Var(y2.clone()));
        (y2, body2.subst_term(x, payload))
    } else {
        (y.to_string(), body.subst_term(x, payload))
    }
}

fn under_type_binder(b: &str, body: &RelExpr, a: &str, payload: &Type) -> (String, RelExpr) {
    if b == a {
        return (b.to_string(), body.clone());
    }
    if payload.free_vars().contains(b) {
        let mut avoid = payload.free_vars();
        avoid.extend(body.free_type_vars());
        avoid.insert(a.to_string());
        let b2 = fresh_name(b, &avoid);
        let body2 = body.subst_type(b, &Type::Var(b2.clone()));
        (b2, body2.subst_type(a, payload))
    } else {
        (b.to_string(), body.subst_type(a, payload))
    }
}

fn rel_subst_under_term_binder(
    x: &str,
    body: &RelExpr,
    r: &str,
    payload: &RelExpr,
) -> (String, RelExpr) {
    if payload.free_term_vars().contains(x) {
        let mut avoid = payload.free_term_vars();
        avoid.extend(body.free_term_vars());
        let x2 = fresh_name(x, &avoid);
        let body2 = body.subst_term(x, &Term::Var(x2.clone()));
        (x2, body2.subst_rel(r, payload))
    } else {
        (x.to_string(), body.subst_rel(r, payload))
    }
}

fn rel_subst_under_type_binder(
    a: &str,
    body: &RelExpr,
    r: &str,
    payload: &RelExpr,
) -> (String, RelExpr) {
    if payload.free_type_vars().contains(a) {
        let mut avoid = payload.free_type_vars();
        avoid.extend(body.free_type_vars());
        let a2 = fresh_name(a, &avoid);
        let body2 = body.subst_type(a, &Type::Var(a2.clone()));
        (a2, body2.subst_rel(r, payload))
    } else {
        (a.to_string(), body.subst_rel(r, payload))
    }
}

/// Returns `None` when the binder shadows `r` (substitution stops).
fn rel_subst_under_rel_binder(
    rv: &RelVar,
    body: &RelExpr,
    r: &str,
    payload: &RelExpr,
) -> (Option<RelVar>, RelExpr) {
    if rv.name == r {
        return (None, body.clone());
    }
    let captured = payload.free_rel_vars().iter().any(|v| v.name == rv.name);
    if captured {
        let mut avoid: BTreeSet<String> = payload
            .free_rel_vars()
            .iter()
            .map(|v| v.name.clone())
            .collect();
        avoid.extend(body.free_rel_vars().iter().map(|v| v.name.clone()));
        avoid.insert(r.to_string());
        let name2 = fresh_name(&rv.name, &avoid);
        let rv2 = RelVar::new(name2, rv.arity);
        let body2 = body.subst_rel(&rv.name, &RelExpr::Var(rv2.clone()));
        (Some(rv2), body2.subst_rel(r, payload))
    } else {
        (Some(rv.clone()), body.subst_rel(r, payload))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fmu::syntax::{int, tm_var};

    fn xy_abs_eq() -> RelExpr {
        // (x1, x2). x1 = x2
        RelExpr::Abs(
            vec!["x1".into(), "x2".into()],
            Box::new(eq_tm(tm_var("x1"), tm_var("x2"))),
        )
    }

    #[test]
    fn wf_abs_eq_has_arity_2() {
        let ctx = LogicCtx::empty();
        assert_eq!(rel_wf(&ctx, &xy_abs_eq()), Ok(2));
    }

    #[test]
    fn wf_rejects_unguarded_mu() {
        let r = RelVar::new("r", 2);
        // mu r. (x1,x2). (x1,x2) in r   -- not contractive
        let bad = RelExpr::Mu(
            r.clone(),
            Box::new(RelExpr::Abs(
                vec!["x1".into(), "x2".into()],
                Box::new(mem2(tm_var("x1"), tm_var("x2"), RelExpr::Var(r.clone()))),
            )),
        );
        assert!(matches!(
            rel_wf(&LogicCtx::empty(), &bad),
            Err(WfError::NonContractive(_))
        ));
        // guarded version is fine
        let good = RelExpr::Mu(
            r.clone(),
            Box::new(RelExpr::Abs(
                vec!["x1".into(), "x2".into()],
                Box::new(later(mem2(tm_var("x1"), tm_var("x2"), RelExpr::Var(r)))),
            )),
        );
        assert_eq!(rel_wf(&LogicCtx::empty(), &good), Ok(2));
    }

    #[test]
    fn size_rules() {
        assert_eq!(size(&RelExpr::Top), 1);
        assert_eq!(size(&later(and(RelExpr::Top, RelExpr::Top))), 1);
        let r = RelVar::new("r", 2);
        let body = RelExpr::Abs(
            vec!["x1".into(), "x2".into()],
            Box::new(later(mem2(tm_var("x1"), tm_var("x2"), RelExpr::Var(r.clone())))),
        );
        let mu = RelExpr::Mu(r, Box::new(body.clone()));
        assert_eq!(size(&mu), 1 + size(&body));
        // size invariance under expansion
        assert_eq!(size(&mu.mu_unfold()), size(&body));
    }

    #[test]
    fn earlier_strips_one_layer() {
        let p = eq_tm(int(1), int(1));
        let q = eq_tm(int(2), int(2));
        let ctx = LogicCtx::empty()
            .with_hyp(later(p.clone()))
            .with_hyp(q.clone());
        let e = ctx.earlier();
        assert!(e.has_hyp(&p));
        assert!(e.has_hyp(&q));
        assert!(!e.has_hyp(&later(p.clone())));

        let ctx2 = LogicCtx::empty().with_hyp(later(later(p.clone())));
        assert!(ctx2.earlier().has_hyp(&later(p)));

        assert_eq!(LogicCtx::empty().earlier(), LogicCtx::empty());
    }

    #[test]
    fn alpha_eq_props() {
        let a = RelExpr::AllTerm("x".into(), Box::new(eq_tm(tm_var("x"), tm_var("x"))));
        let b = RelExpr::AllTerm("y".into(), Box::new(eq_tm(tm_var("y"), tm_var("y"))));
        assert!(a.alpha_eq(&b));
        let c = RelExpr::AllTerm("x".into(), Box::new(eq_tm(tm_var("x"), int(0))));
        assert!(!a.alpha_eq(&c));
    }

    #[test]
    fn subst_rel_leaves_other_vars() {
        let r = RelVar::new("r", 2);
        let s = RelVar::new("s", 2);
        let mu = RelExpr::Mu(
            r.clone(),
            Box::new(RelExpr::Abs(
                vec!["x1".into(), "x2".into()],
                Box::new(later(mem2(tm_var("x1"), tm_var("x2"), RelExpr::Var(r)))),
            )),
        );
        let result = mu.subst_rel("s", &xy_abs_eq());
        assert_eq!(result, mu);
        let _ = s;
    }

    #[test]
    fn subst_preserves_contractiveness_elsewhere() {
        // substituting into a membership under later keeps unrelated mu fine
        let r = RelVar::new("r", 2);
        let outer = RelExpr::Mu(
            r.clone(),
            Box::new(RelExpr::Abs(
                vec!["x1".into(), "x2".into()],
                Box::new(and(
                    later(mem2(tm_var("x1"), tm_var("x2"), RelExpr::Var(r))),
                    mem2(tm_var("x1"), tm_var("x2"), RelExpr::Var(RelVar::new("q", 2))),
                )),
            )),
        );
        let inst = outer.subst_rel("q", &xy_abs_eq());
        let ctx = LogicCtx::empty();
        assert_eq!(rel_wf(&ctx, &inst), Ok(2));
    }

    #[test]
    fn mu_unfold_size_invariant() {
        let r = RelVar::new("r", 0);
        let mu = RelExpr::Mu(r.clone(), Box::new(or(RelExpr::Top, later(RelExpr::Var(r)))));
        let unf = mu.mu_unfold();
        assert_eq!(size(&unf), size(&or(RelExpr::Top, later(RelExpr::Bot))));
        assert_eq!(rel_wf(&LogicCtx::empty(), &unf), Ok(0));
    }

    #[test]
    fn first_order_detection() {
        assert!(eq_tm(int(1), int(1)).is_first_order());
        assert!(!later(RelExpr::Top).is_first_order());
        assert!(!RelExpr::AllRel(RelVar::new("r", 1), Box::new(RelExpr::Top)).is_first_order());
    }
}
