//! Bounded evaluator for the step-indexed Kripke semantics.
//!
//! Worlds are natural numbers; in world 0 everything is true. Quantifiers
//! are searched over enumerated candidates, so verdicts are three-valued:
//! `Holds`/`Refuted` are definite for the recorded bounds, `Unknown` records
//! the exhausted budget. Connectives combine verdicts by strong Kleene.

use crate::rel::{AtomicRel, LogicCtx, RelExpr, RelVar, XVar};
use fmu::dynamics::{reaches, ReachMode};
use fmu::statics::TypingCtx;
use fmu::syntax::int;
use fmu::{eval, typecheck, Ctx, EvalOutcome, Term, Type, Verdict};
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct Budget {
    /// Step budget for every evaluation probe.
    pub fuel: usize,
    /// Depth for type-directed candidate-term enumeration.
    pub depth: usize,
    /// Bound on interpretation recursion.
    pub rec_limit: usize,
    /// Cap on closing-substitution combinations in judgment checking.
    pub combo_cap: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { fuel: 10_000, depth: 3, rec_limit: 100_000, combo_cap: 256 }
    }
}

impl Budget {
    pub fn summary(&self) -> String {
        format!(
            "fuel={} depth={} rec_limit={} combo_cap={}",
            self.fuel, self.depth, self.rec_limit, self.combo_cap
        )
    }
}

/// Pluggable decision interface for the ciu-approximation atomic relation.
pub trait CiuOracle {
    fn check(&self, e1: &Term, e2: &Term, budget: &Budget) -> Verdict;
}

/// Entries of a semantic environment: world-indexed relations that can be
/// queried on an index and a term tuple.
#[derive(Clone)]
pub enum SemRel {
    /// A syntactic relation closed in relation variables, interpreted by the
    /// model itself.
    Syntactic(RelExpr),
    /// An arbitrary monotone world-indexed relation.
    Dynamic(Arc<dyn Fn(usize, &[Term]) -> Verdict + Send + Sync>),
}

impl std::fmt::Debug for SemRel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SemRel::Syntactic(r) => write!(f, "Syntactic({r:?})"),
            SemRel::Dynamic(_) => write!(f, "Dynamic(..)"),
        }
    }
}

/// Semantic interpretation of relation variables.
#[derive(Debug, Clone, Default)]
pub struct SemEnv {
    entries: BTreeMap<String, SemRel>,
}

impl SemEnv {
    pub fn empty() -> Self {
        Default::default()
    }

    pub fn with(&self, name: &str, rel: SemRel) -> SemEnv {
        let mut e = self.clone();
        e.entries.insert(name.to_string(), rel);
        e
    }

    pub fn get(&self, name: &str) -> Option<&SemRel> {
        self.entries.get(name)
    }
}

/// Model-evaluation environment: budgets plus the ciu oracle.
pub struct Model {
    pub budget: Budget,
    pub oracle: Arc<dyn CiuOracle + Send + Sync>,
}

impl Default for Model {
    fn default() -> Self {
        Model { budget: Budget::default(), oracle: Arc::new(DefaultCiuOracle) }
    }
}

impl Model {
    pub fn with_budget(budget: Budget) -> Self {
        Model { budget, oracle: Arc::new(DefaultCiuOracle) }
    }

    /// Interprets a closed proposition at world `n` under `delta`.
    pub fn interp(&self, p: &RelExpr, n: usize, delta: &SemEnv) -> Verdict {
        let mut fuel = self.budget.rec_limit;
        self.go(p, n, delta, &mut fuel)
    }

    /// Applies a closing substitution first (terms for term variables, types
    /// for type variables), then interprets.
    pub fn interp_closed(
        &self,
        p: &RelExpr,
        n: usize,
        delta: &SemEnv,
        gamma_terms: &[(String, Term)],
        gamma_types: &[(String, Type)],
    ) -> Verdict {
        let mut q = p.clone();
        for (a, t) in gamma_types {
            q = q.subst_type(a, t);
        }
        for (x, e) in gamma_terms {
            q = q.subst_term(x, e);
        }
        self.interp(&q, n, delta)
    }

    fn go(&self, p: &RelExpr, n: usize, delta: &SemEnv, fuel: &mut usize) -> Verdict {
        if n == 0 {
            return Verdict::holds("world 0");
        }
        if *fuel == 0 {
            return Verdict::unknown("recursion limit exhausted");
        }
        *fuel -= 1;
        match p {
            RelExpr::Top => Verdict::holds(""),
            RelExpr::Bot => Verdict::refuted("bottom"),
            RelExpr::Atomic(a) => {
                if a.arity() != 0 {
                    return Verdict::unknown("bare non-nullary atomic relation");
                }
                self.atomic_eval(a, &[])
            }
            RelExpr::Var(r) => self.apply_rel(&RelExpr::Var(r.clone()), &[], n, delta, fuel),
            RelExpr::And(a, b) => {
                let va = self.go(a, n, delta, fuel);
                if va.is_refuted() {
                    return va;
                }
                va.and(self.go(b, n, delta, fuel))
            }
            RelExpr::Or(a, b) => {
                let va = self.go(a, n, delta, fuel);
                if va.is_holds() {
                    return va;
                }
                va.or(self.go(b, n, delta, fuel))
            }
            RelExpr::Imp(a, b) => {
                // forall k <= n: [a] k => [b] k   (k = 0 is trivial)
                let mut out = Verdict::holds(format!("implication checked for k<=n={n}"));
                for k in 1..=n {
                    let va = self.go(a, k, delta, fuel);
                    if va.is_refuted() {
                        continue;
                    }
                    let vb = self.go(b, k, delta, fuel);
                    let vk = va.implies(vb);
                    match vk {
                        Verdict::Refuted { witness } => {
                            return Verdict::refuted(format!("at world k={k}: {witness}"));
                        }
                        Verdict::Unknown { .. } => out = vk,
                        _ => {}
                    }
                }
                out
            }
            RelExpr::Later(q) => self.go(q, n - 1, delta, fuel),
            RelExpr::Mem(es, r) => self.apply_rel(r, es, n, delta, fuel),
            RelExpr::Mu(_, _) => {
                // nullary recursive proposition: evaluate its expansion
                self.go(&p.mu_unfold(), n, delta, fuel)
            }
            RelExpr::Abs(_, _) => Verdict::unknown("bare abstraction is not a proposition"),
            RelExpr::AllTerm(x, body) => {
                self.quantify_term(x, body, n, delta, fuel, /*universal*/ true)
            }
            RelExpr::ExTerm(x, body) => {
                self.quantify_term(x, body, n, delta, fuel, /*universal*/ false)
            }
            RelExpr::AllType(a, body) => {
                self.quantify_type(a, body, n, delta, fuel, /*universal*/ true)
            }
            RelExpr::ExType(a, body) => {
                self.quantify_type(a, body, n, delta, fuel, /*universal*/ false)
            }
            RelExpr::AllRel(rv, body) => self.quantify_rel(rv, body, n, delta, fuel, true),
            RelExpr::ExRel(rv, body) => self.quantify_rel(rv, body, n, delta, fuel, false),
        }
    }

    fn apply_rel(
        &self,
        r: &RelExpr,
        es: &[Term],
        n: usize,
        delta: &SemEnv,
        fuel: &mut usize,
    ) -> Verdict {
        match r {
            RelExpr::Var(v) => match delta.get(&v.name) {
                Some(SemRel::Syntactic(s)) => {
                    let s = s.clone();
                    self.apply_rel(&s, es, n, delta, fuel)
                }
                Some(SemRel::Dynamic(f)) => f(n, es),
                None => Verdict::unknown(format!("relation variable {} has no interpretation", v.name)),
            },
            RelExpr::Atomic(a) => self.atomic_eval(a, es),
            RelExpr::Abs(xs, body) => {
                if xs.len() != es.len() {
                    return Verdict::unknown("membership arity mismatch");
                }
                let mut b = (**body).clone();
                for (x, e) in xs.iter().zip(es.iter()) {
                    b = b.subst_term(x, e);
                }
                self.go(&b, n, delta, fuel)
            }
            RelExpr::Mu(_, _) => {
                let unfolded = r.mu_unfold();
                self.apply_rel(&unfolded, es, n, delta, fuel)
            }
            other if es.is_empty() => self.go(other, n, delta, fuel),
            _ => Verdict::unknown("membership in a non-relation"),
        }
    }

    /// Evaluates a closed atomic relation applied to a (possibly empty)
    /// tuple; world-independent.
    pub fn atomic_eval(&self, a: &AtomicRel, es: &[Term]) -> Verdict {
        match a {
            AtomicRel::Eq(e1, e2) => {
                if e1.alpha_eq(e2) {
                    Verdict::holds("alpha-equal")
                } else {
                    Verdict::refuted(format!("{e1} and {e2} differ"))
                }
            }
            AtomicRel::Val => match es {
                [e] => {
                    if !e.free_term_vars().is_empty() {
                        Verdict::unknown("open term in Val")
                    } else if e.is_value() {
                        Verdict::holds("value grammar")
                    } else {
                        Verdict::refuted(format!("{e} is not a value"))
                    }
                }
                _ => Verdict::unknown("Val expects one argument"),
            },
            AtomicRel::HasType(e, t) => {
                if !e.free_term_vars().is_empty() {
                    return Verdict::unknown("open term in typing atom");
                }
                match typecheck(&TypingCtx::empty(), e) {
                    Ok(t2) if t2.alpha_eq(t) => Verdict::holds("typechecked"),
                    Ok(t2) => Verdict::refuted(format!("has type {t2}, not {t}")),
                    Err(e) => Verdict::refuted(format!("ill-typed: {e}")),
                }
            }
            AtomicRel::CtxTyped(c, t1, t2) => {
                if !c.is_eval_context() {
                    return Verdict::refuted("not an evaluation context".to_string());
                }
                let g = TypingCtx::empty();
                if fmu::ctx_typecheck(c, (&g, t1), (&g, t2)) {
                    Verdict::holds("evaluation context typing")
                } else {
                    Verdict::refuted("context typing fails".to_string())
                }
            }
            AtomicRel::Steps(e1, e2) => self.closed_reach(e1, e2, ReachMode::Any),
            AtomicRel::StepsZero(e1, e2) => self.closed_reach(e1, e2, ReachMode::ZeroUnroll),
            AtomicRel::StepsOne(e1, e2) => self.closed_reach(e1, e2, ReachMode::OneUnroll),
            AtomicRel::CiuLe(e1, e2) => {
                if !e1.free_term_vars().is_empty() || !e2.free_term_vars().is_empty() {
                    return Verdict::unknown("open operand in ciu atom");
                }
                self.oracle.check(e1, e2, &self.budget)
            }
        }
    }

    fn closed_reach(&self, e1: &Term, e2: &Term, mode: ReachMode) -> Verdict {
        if !e1.free_term_vars().is_empty() || !e2.free_term_vars().is_empty() {
            return Verdict::unknown("open term in reduction atom");
        }
        reaches(e1, e2, self.budget.fuel, mode)
    }

    fn quantify_term(
        &self,
        x: &str,
        body: &RelExpr,
        n: usize,
        delta: &SemEnv,
        fuel: &mut usize,
        universal: bool,
    ) -> Verdict {
        if !body.free_term_vars().contains(x) {
            return self.go(body, n, delta, fuel);
        }
        let mut saw_unknown = false;
        for cand in candidate_terms(self.budget.depth) {
            let inst = body.subst_term(x, &cand);
            let v = self.go(&inst, n, delta, fuel);
            match (universal, &v) {
                (true, Verdict::Refuted { witness }) => {
                    return Verdict::refuted(format!("counterexample {x} := {cand}: {witness}"));
                }
                (false, Verdict::Holds { .. }) => {
                    return Verdict::holds(format!("witness {x} := {cand}"));
                }
                (_, Verdict::Unknown { .. }) => saw_unknown = true,
                _ => {}
            }
        }
        let what = if universal { "universal" } else { "existential" };
        let _ = saw_unknown;
        Verdict::unknown(format!("{what} over terms undecided at enumeration depth {}", self.budget.depth))
    }

    fn quantify_type(
        &self,
        a: &str,
        body: &RelExpr,
        n: usize,
        delta: &SemEnv,
        fuel: &mut usize,
        universal: bool,
    ) -> Verdict {
        if !body.free_type_vars().contains(a) {
            return self.go(body, n, delta, fuel);
        }
        for cand in candidate_types(self.budget.depth) {
            let inst = body.subst_type(a, &cand);
            let v = self.go(&inst, n, delta, fuel);
            match (universal, &v) {
                (true, Verdict::Refuted { witness }) => {
                    return Verdict::refuted(format!("counterexample {a} := {cand}: {witness}"));
                }
                (false, Verdict::Holds { .. }) => {
                    return Verdict::holds(format!("witness {a} := {cand}"));
                }
                _ => {}
            }
        }
        let what = if universal { "universal" } else { "existential" };
        Verdict::unknown(format!("{what} over types undecided at enumeration depth {}", self.budget.depth))
    }

    fn quantify_rel(
        &self,
        rv: &RelVar,
        body: &RelExpr,
        n: usize,
        delta: &SemEnv,
        fuel: &mut usize,
        universal: bool,
    ) -> Verdict {
        if !body.free_rel_vars().iter().any(|v| v.name == rv.name) {
            return self.go(body, n, delta, fuel);
        }
        for cand in candidate_relations(rv.arity, self.budget.depth) {
            let d2 = delta.with(&rv.name, SemRel::Syntactic(cand.clone()));
            let v = self.go(body, n, &d2, fuel);
            match (universal, &v) {
                (true, Verdict::Refuted { witness }) => {
                    return Verdict::refuted(format!("counterexample {} := {cand:?}: {witness}", rv.name));
                }
                (false, Verdict::Holds { .. }) => {
                    return Verdict::holds(format!("witness relation for {}", rv.name));
                }
                _ => {}
            }
        }
        let what = if universal { "universal" } else { "existential" };
        Verdict::unknown(format!("{what} over relations undecided (catalogue exhausted)"))
    }

    /// Checks the judgment `ctx |- p` at a single world: for each enumerated
    /// closing substitution and relation interpretation, if every hypothesis
    /// holds the conclusion must not be refuted.
    pub fn judgment_check_at(&self, ctx: &LogicCtx, p: &RelExpr, n: usize) -> Verdict {
        let gammas = self.closing_substitutions(ctx);
        let deltas = self.rel_interpretations(ctx);
        for (gt, gy) in &gammas {
            for delta in &deltas {
                let mut hyps_hold = true;
                let mut hyp_unknown = false;
                for h in ctx.hyps() {
                    let v = self.interp_closed(h, n, delta, gt, gy);
                    match v {
                        Verdict::Holds { .. } => {}
                        Verdict::Refuted { .. } => {
                            hyps_hold = false;
                            break;
                        }
                        Verdict::Unknown { .. } => {
                            hyp_unknown = true;
                        }
                    }
                }
                if !hyps_hold || hyp_unknown {
                    continue;
                }
                let vc = self.interp_closed(p, n, delta, gt, gy);
                if let Verdict::Refuted { witness } = vc {
                    let subst = gt
                        .iter()
                        .map(|(x, e)| format!("{x} := {e}"))
                        .chain(gy.iter().map(|(a, t)| format!("{a} := {t}")))
                        .collect::<Vec<_>>()
                        .join(", ");
                    return Verdict::refuted(format!(
                        "hypotheses hold but conclusion refuted at n={n} [{subst}]: {witness}"
                    ));
                }
            }
        }
        Verdict::holds(format!(
            "no violation at n={n} over {} substitutions x {} interpretations",
            gammas.len(),
            deltas.len()
        ))
    }

    /// Per-index verdicts for `n` in `1..=n_max`.
    pub fn judgment_check(&self, ctx: &LogicCtx, p: &RelExpr, n_max: usize) -> Vec<(usize, Verdict)> {
        (1..=n_max).map(|n| (n, self.judgment_check_at(ctx, p, n))).collect()
    }

    #[allow(clippy::type_complexity)]
    fn closing_substitutions(
        &self,
        ctx: &LogicCtx,
    ) -> Vec<(Vec<(String, Term)>, Vec<(String, Type)>)> {
        let mut out: Vec<(Vec<(String, Term)>, Vec<(String, Type)>)> = vec![(vec![], vec![])];
        for v in ctx.xvars() {
            let mut next = Vec::new();
            match v {
                XVar::Term(x) => {
                    for cand in candidate_terms(self.budget.depth.min(2)) {
                        for (gt, gy) in &out {
                            let mut gt2 = gt.clone();
                            gt2.push((x.clone(), cand.clone()));
                            next.push((gt2, gy.clone()));
                            if next.len() >= self.budget.combo_cap {
                                break;
                            }
                        }
                        if next.len() >= self.budget.combo_cap {
                            break;
                        }
                    }
                }
                XVar::Type(a) => {
                    for cand in candidate_types(self.budget.depth.min(2)) {
                        for (gt, gy) in &out {
                            let mut gy2 = gy.clone();
                            gy2.push((a.clone(), cand.clone()));
                            next.push((gt.clone(), gy2));
                            if next.len() >= self.budget.combo_cap {
                                break;
                            }
                        }
                        if next.len() >= self.budget.combo_cap {
                            break;
                        }
                    }
                }
            }
            out = next;
        }
        out
    }

    fn rel_interpretations(&self, ctx: &LogicCtx) -> Vec<SemEnv> {
        let mut out = vec![SemEnv::empty()];
        for rv in ctx.rvars() {
            let mut next = Vec::new();
            for cand in candidate_relations(rv.arity, self.budget.depth.min(2)) {
                for d in &out {
                    next.push(d.with(&rv.name, SemRel::Syntactic(cand.clone())));
                    if next.len() >= self.budget.combo_cap {
                        break;
                    }
                }
                if next.len() >= self.budget.combo_cap {
                    break;
                }
            }
            out = next;
        }
        out
    }
}

/// Canonical small types, by depth.
pub fn candidate_types(depth: usize) -> Vec<Type> {
    let mut out = vec![Type::Unit, Type::Bool, Type::Int];
    if depth >= 2 {
        out.push(Type::Pair(Box::new(Type::Bool), Box::new(Type::Int)));
        out.push(Type::Sum(Box::new(Type::Unit), Box::new(Type::Int)));
        out.push(Type::Fun(Box::new(Type::Int), Box::new(Type::Int)));
        out.push(Type::Rec(
            "a".into(),
            Box::new(Type::Sum(Box::new(Type::Unit), Box::new(Type::Var("a".into())))),
        ));
    }
    if depth >= 3 {
        out.push(Type::Fun(Box::new(Type::Bool), Box::new(Type::Bool)));
        out.push(Type::Pair(Box::new(Type::Int), Box::new(Type::Int)));
    }
    out
}

/// Type-directed canonical values up to `depth`, at least two inhabitants
/// per base type.
pub fn values_of_type(t: &Type, depth: usize) -> Vec<Term> {
    if depth == 0 {
        return vec![];
    }
    match t {
        Type::Unit => vec![Term::Unit],
        Type::Bool => vec![Term::True, Term::False],
        Type::Int => {
            let mut v = vec![int(0), int(1)];
            if depth >= 2 {
                v.push(int(-1));
                v.push(int(2));
            }
            v
        }
        Type::Pair(a, b) => {
            let mut out = Vec::new();
            for va in values_of_type(a, depth - 1) {
                for vb in values_of_type(b, depth - 1) {
                    out.push(Term::Pair(Box::new(va.clone()), Box::new(vb)));
                }
            }
            out
        }
        Type::Sum(a, b) => {
            let mut out = Vec::new();
            for va in values_of_type(a, depth - 1) {
                out.push(Term::Inl(t.clone(), Box::new(va)));
            }
            for vb in values_of_type(b, depth - 1) {
                out.push(Term::Inr(t.clone(), Box::new(vb)));
            }
            out
        }
        Type::Fun(a, b) => {
            let mut out = Vec::new();
            // constant functions
            for vb in values_of_type(b, depth - 1) {
                out.push(Term::Lam("cx".into(), (**a).clone(), Box::new(vb)));
            }
            if a.alpha_eq(b) {
                out.push(Term::Lam("ix".into(), (**a).clone(), Box::new(Term::Var("ix".into()))));
            }
            // successor on ints
            if **a == Type::Int && **b == Type::Int {
                out.push(Term::Lam(
                    "sx".into(),
                    Type::Int,
                    Box::new(Term::Prim(fmu::PrimOp::Add, vec![Term::Var("sx".into()), int(1)])),
                ));
            }
            out
        }
        Type::Rec(a, body) => {
            let unrolled = body.subst(a, t);
            values_of_type(&unrolled, depth - 1)
                .into_iter()
                .map(|v| Term::Fold(t.clone(), Box::new(v)))
                .collect()
        }
        Type::All(_, body) => {
            // the polymorphic identity when the body is a -> a
            if let Type::Fun(l, r) = &**body {
                if l == r {
                    if let Type::Var(a) = &**l {
                        return vec![Term::TLam(
                            a.clone(),
                            Box::new(Term::Lam("px".into(), Type::Var(a.clone()), Box::new(Term::Var("px".into())))),
                        )];
                    }
                }
            }
            vec![]
        }
        Type::Exist(_, _) | Type::Var(_) => vec![],
    }
}

/// The canonical diverging closed term, at type unit.
pub fn omega() -> Term {
    let mu = Type::Rec(
        "a".into(),
        Box::new(Type::Fun(Box::new(Type::Var("a".into())), Box::new(Type::Unit))),
    );
    let w = Term::Fold(
        mu.clone(),
        Box::new(Term::Lam(
            "x".into(),
            mu,
            Box::new(Term::App(
                Box::new(Term::Unfold(Box::new(Term::Var("x".into())))),
                Box::new(Term::Var("x".into())),
            )),
        )),
    );
    Term::App(Box::new(Term::Unfold(Box::new(w.clone()))), Box::new(w))
}

/// Diverging closed term of an arbitrary closed type: `(\x:unit. omega_t) <>`
/// built from a recursive self-application at that type.
pub fn omega_at(t: &Type) -> Term {
    let mu = Type::Rec(
        "a".into(),
        Box::new(Type::Fun(Box::new(Type::Var("a".into())), Box::new(t.clone()))),
    );
    let w = Term::Fold(
        mu.clone(),
        Box::new(Term::Lam(
            "x".into(),
            mu,
            Box::new(Term::App(
                Box::new(Term::Unfold(Box::new(Term::Var("x".into())))),
                Box::new(Term::Var("x".into())),
            )),
        )),
    );
    Term::App(Box::new(Term::Unfold(Box::new(w.clone()))), Box::new(w))
}

/// Closed candidate terms for quantifier search: canonical values of small
/// types plus a few distinctive non-values.
pub fn candidate_terms(depth: usize) -> Vec<Term> {
    let mut out = Vec::new();
    for t in candidate_types(depth) {
        out.extend(values_of_type(&t, depth));
    }
    // a reducible term and a diverging term
    out.push(Term::Unfold(Box::new(Term::Fold(
        Type::Rec("a".into(), Box::new(Type::Unit)),
        Box::new(Term::Unit),
    ))));
    out.push(omega());
    // dedupe
    let mut seen = std::collections::BTreeSet::new();
    out.retain(|t| seen.insert(t.canonical()));
    out
}

/// Candidate relations for second-order quantifier search: a small template
/// grammar (diagonal, full, empty, finite graphs, parity links) plus the
/// logical-relation builders over small closed types.
pub fn candidate_relations(arity: usize, depth: usize) -> Vec<RelExpr> {
    use crate::rel::{and as rand, eq_tm, or as ror};
    let names: Vec<String> = (0..arity).map(|i| format!("c{}", i + 1)).collect();
    let tuple: Vec<Term> = names.iter().map(|n| Term::Var(n.clone())).collect();
    let mut out = Vec::new();
    out.push(RelExpr::Abs(names.clone(), Box::new(RelExpr::Top)));
    out.push(RelExpr::Abs(names.clone(), Box::new(RelExpr::Bot)));
    if arity == 2 {
        out.push(RelExpr::Abs(
            names.clone(),
            Box::new(eq_tm(tuple[0].clone(), tuple[1].clone())),
        ));
        // finite graphs over a few small value pairs
        let vals: Vec<Term> = values_of_type(&Type::Bool, 1)
            .into_iter()
            .chain(values_of_type(&Type::Int, 1))
            .chain(values_of_type(&Type::Unit, 1))
            .collect();
        for a in &vals {
            for b in &vals {
                out.push(RelExpr::Abs(
                    names.clone(),
                    Box::new(rand(
                        eq_tm(tuple[0].clone(), a.clone()),
                        eq_tm(tuple[1].clone(), b.clone()),
                    )),
                ));
            }
        }
        // parity links between bool and int, both orientations
        out.push(parity_rel(&names, &tuple, false));
        out.push(parity_rel(&names, &tuple, true));
        // value relations of small types
        if depth >= 1 {
            for t in candidate_types(depth.min(2)) {
                if t.is_closed() {
                    out.push(crate::logrel::build_v(&t, &crate::logrel::Rho::empty()));
                }
            }
        }
        let _ = ror;
    }
    out
}

/// `(x1, x2). exists y down int. (x1 = true /\ y+y v x2) \/ (x1 = false /\ (y+y)+1 v x2)`
/// or its bool/int-swapped reverse.
fn parity_rel(names: &[String], tuple: &[Term], swapped: bool) -> RelExpr {
    use crate::rel::{and as rand, eq_tm, or as ror};
    use crate::sugar::{bsteps, down};
    let (b, i) = if swapped {
        (tuple[1].clone(), tuple[0].clone())
    } else {
        (tuple[0].clone(), tuple[1].clone())
    };
    let y = Term::Var("py".into());
    let double = Term::Prim(fmu::PrimOp::Add, vec![y.clone(), y.clone()]);
    let double1 = Term::Prim(fmu::PrimOp::Add, vec![double.clone(), int(1)]);
    let body = RelExpr::ExTerm(
        "py".into(),
        Box::new(rand(
            down(y, Type::Int),
            ror(
                rand(eq_tm(b.clone(), Term::True), bsteps(double, i.clone())),
                rand(eq_tm(b, Term::False), bsteps(double1, i)),
            ),
        )),
    );
    RelExpr::Abs(names.to_vec(), Box::new(body))
}

/// Detects definite divergence (cycle in the deterministic trace) within
/// `fuel` steps. `Some(true)` diverges, `Some(false)` terminates at a value,
/// `None` undecided (fuel ran out or the term is stuck).
pub fn detect_divergence(e: &Term, fuel: usize) -> Option<bool> {
    let mut cur = e.clone();
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..fuel {
        if cur.is_value() {
            return Some(false);
        }
        if !seen.insert(cur.canonical()) {
            return Some(true);
        }
        match fmu::step(&cur) {
            Ok(Some(rec)) => cur = rec.post,
            _ => return None,
        }
    }
    None
}

/// The default ciu oracle: sound approximations from the reduction-closure
/// and transitivity properties of ciu approximation, plus a bounded search
/// for separating evaluation contexts.
pub struct DefaultCiuOracle;

impl CiuOracle for DefaultCiuOracle {
    fn check(&self, e1: &Term, e2: &Term, budget: &Budget) -> Verdict {
        let g = TypingCtx::empty();
        let t1 = match typecheck(&g, e1) {
            Ok(t) => t,
            Err(_) => return Verdict::unknown("left operand does not typecheck"),
        };
        let t2 = match typecheck(&g, e2) {
            Ok(t) => t,
            Err(_) => return Verdict::unknown("right operand does not typecheck"),
        };
        if !t1.alpha_eq(&t2) {
            return Verdict::unknown("operands have different types");
        }
        if e1.alpha_eq(e2) {
            return Verdict::holds("alpha-equal");
        }
        // reduction closure, both directions
        if reaches(e1, e2, budget.fuel, ReachMode::Any).is_holds()
            || reaches(e2, e1, budget.fuel, ReachMode::Any).is_holds()
        {
            return Verdict::holds("related by reduction");
        }
        // a definitely-diverging left side approximates anything
        if detect_divergence(e1, budget.fuel) == Some(true) {
            return Verdict::holds("left side diverges");
        }
        // common value
        let v1 = eval(e1, budget.fuel).ok();
        let v2 = eval(e2, budget.fuel).ok();
        if let (Some(EvalOutcome::Value(a, _)), Some(EvalOutcome::Value(b, _))) = (&v1, &v2) {
            if a.alpha_eq(b) {
                return Verdict::holds("evaluate to the same value");
            }
        }
        // separating-context search
        for obs in observer_contexts(&t1, 3) {
            let o1 = obs.plug(e1);
            let o2 = obs.plug(e2);
            let term1 = matches!(eval(&o1, budget.fuel), Ok(EvalOutcome::Value(..)));
            if term1 && detect_divergence(&o2, budget.fuel) == Some(true) {
                return Verdict::refuted(format!("separating context {}", obs.to_source()));
            }
        }
        Verdict::unknown("ciu approximation undecided within budget")
    }
}

/// Observer evaluation contexts `f [.]` for observer functions probing a
/// value of type `t`, plus the identity context.
pub fn observer_contexts(t: &Type, depth: usize) -> Vec<Ctx> {
    let mut out = vec![Ctx::Hole];
    for f in observer_functions(t, depth) {
        out.push(Ctx::App1(f, Box::new(Ctx::Hole)));
    }
    out
}

/// Functions `t -> unit` that converge or diverge depending on what they
/// see; used for separating-context search.
fn observer_functions(t: &Type, depth: usize) -> Vec<Term> {
    if depth == 0 {
        return vec![];
    }
    let x = Term::Var("ox".into());
    let lam = |body: Term| Term::Lam("ox".into(), t.clone(), Box::new(body));
    let div = omega();
    let mut out = Vec::new();
    match t {
        Type::Unit => {}
        Type::Bool => {
            out.push(lam(Term::If(Box::new(x.clone()), Box::new(Term::Unit), Box::new(div.clone()))));
            out.push(lam(Term::If(Box::new(x.clone()), Box::new(div.clone()), Box::new(Term::Unit))));
        }
        Type::Int => {
            for k in [-1i64, 0, 1, 2] {
                out.push(lam(Term::If(
                    Box::new(Term::Prim(fmu::PrimOp::Eq, vec![x.clone(), int(k)])),
                    Box::new(Term::Unit),
                    Box::new(div.clone()),
                )));
                out.push(lam(Term::If(
                    Box::new(Term::Prim(fmu::PrimOp::Lt, vec![x.clone(), int(k)])),
                    Box::new(Term::Unit),
                    Box::new(div.clone()),
                )));
            }
        }
        Type::Pair(a, b) => {
            for f in observer_functions(a, depth - 1) {
                out.push(lam(Term::App(Box::new(f), Box::new(Term::Fst(Box::new(x.clone()))))));
            }
            for f in observer_functions(b, depth - 1) {
                out.push(lam(Term::App(Box::new(f), Box::new(Term::Snd(Box::new(x.clone()))))));
            }
        }
        Type::Sum(a, b) => {
            // converge only on one side
            out.push(lam(Term::Case(
                Box::new(x.clone()),
                "oa".into(),
                Box::new(Term::Unit),
                "ob".into(),
                Box::new(div.clone()),
            )));
            out.push(lam(Term::Case(
                Box::new(x.clone()),
                "oa".into(),
                Box::new(div.clone()),
                "ob".into(),
                Box::new(Term::Unit),
            )));
            for f in observer_functions(a, depth - 1) {
                out.push(lam(Term::Case(
                    Box::new(x.clone()),
                    "oa".into(),
                    Box::new(Term::App(Box::new(f), Box::new(Term::Var("oa".into())))),
                    "ob".into(),
                    Box::new(div.clone()),
                )));
            }
            for f in observer_functions(b, depth - 1) {
                out.push(lam(Term::Case(
                    Box::new(x.clone()),
                    "oa".into(),
                    Box::new(div.clone()),
                    "ob".into(),
                    Box::new(Term::App(Box::new(f), Box::new(Term::Var("ob".into())))),
                )));
            }
        }
        Type::Fun(a, b) => {
            for arg in values_of_type(a, depth - 1) {
                for f in observer_functions(b, depth - 1) {
                    out.push(lam(Term::App(
                        Box::new(f),
                        Box::new(Term::App(Box::new(x.clone()), Box::new(arg.clone()))),
                    )));
                }
                // observe termination of the application alone
                out.push(lam(Term::App(
                    Box::new(Term::Lam("oz".into(), (**b).clone(), Box::new(Term::Unit))),
                    Box::new(Term::App(Box::new(x.clone()), Box::new(arg.clone()))),
                )));
            }
        }
        Type::Rec(a, body) => {
            let unrolled = body.subst(a, t);
            for f in observer_functions(&unrolled, depth - 1) {
                out.push(lam(Term::App(Box::new(f), Box::new(Term::Unfold(Box::new(x.clone()))))));
            }
        }
        Type::All(a, body) => {
            for wit in [Type::Unit, Type::Bool, Type::Int] {
                let inst_ty = body.subst(a, &wit);
                out.push(lam(Term::App(
                    Box::new(Term::Lam("oz".into(), inst_ty, Box::new(Term::Unit))),
                    Box::new(Term::TApp(Box::new(x.clone()), wit.clone())),
                )));
            }
        }
        Type::Exist(_, _) => {
            // only termination of unpacking is observable here
            out.push(lam(Term::Unpack(
                Box::new(x.clone()),
                "oe".into(),
                "oy".into(),
                Box::new(Term::Unit),
            )));
        }
        Type::Var(_) => {}
    }
    out
}
