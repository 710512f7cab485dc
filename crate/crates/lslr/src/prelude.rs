//! The example library: flag objects over a hidden bool/int state, the
//! minimal-invariance pair, and the helper functions they use.

use fmu::parse::parse_type;
use fmu::syntax::int;
use fmu::{mk_fix, parse_term, Term, Type};

/// `fld a = mu b. a * ((b -> b) * (b -> bool))`
pub fn fld(alpha: &Type) -> Type {
    let fld_open = parse_type("mu b. a * ((b -> b) * (b -> bool))").unwrap();
    fld_open.subst("a", alpha)
}

/// `flag = exists a. fld a`
pub fn flag_ty() -> Type {
    parse_type("exists a. mu b. a * ((b -> b) * (b -> bool))").unwrap()
}

/// `not : bool -> bool`
pub fn not_fn() -> Term {
    parse_term("fun (b:bool) => if b then false else true").unwrap()
}

/// `even : int -> bool`, total on all integers.
pub fn even_fn() -> Term {
    let body = parse_term(
        "if x = 0 then true else if x < 0 then ev (0 - x) else if x = 1 then false else ev (x - 2)",
    )
    .unwrap();
    mk_fix("ev", "x", &Type::Int, &Type::Bool, &body)
}

/// `bflip = fun (x:fld bool) => fold <not (unfold x).1, (unfold x).2>`
pub fn bflip() -> Term {
    let fldb = fld(&Type::Bool);
    let x = Term::Var("x".into());
    let unf = Term::Unfold(Box::new(x.clone()));
    let body = Term::Fold(
        fldb.clone(),
        Box::new(Term::Pair(
            Box::new(Term::App(Box::new(not_fn()), Box::new(Term::Fst(Box::new(unf.clone()))))),
            Box::new(Term::Snd(Box::new(unf))),
        )),
    );
    Term::Lam("x".into(), fldb, Box::new(body))
}

/// `bret = fun (x:fld bool) => (unfold x).1`
pub fn bret() -> Term {
    let fldb = fld(&Type::Bool);
    Term::Lam(
        "x".into(),
        fldb,
        Box::new(Term::Fst(Box::new(Term::Unfold(Box::new(Term::Var("x".into())))))),
    )
}

/// `iflip = fun (x:fld int) => fold <1 + (unfold x).1, (unfold x).2>`
pub fn iflip() -> Term {
    let fldi = fld(&Type::Int);
    let x = Term::Var("x".into());
    let unf = Term::Unfold(Box::new(x.clone()));
    let body = Term::Fold(
        fldi.clone(),
        Box::new(Term::Pair(
            Box::new(Term::Prim(
                fmu::PrimOp::Add,
                vec![int(1), Term::Fst(Box::new(unf.clone()))],
            )),
            Box::new(Term::Snd(Box::new(unf))),
        )),
    );
    Term::Lam("x".into(), fldi, Box::new(body))
}

/// `iret = fun (x:fld int) => even (unfold x).1`
pub fn iret() -> Term {
    let fldi = fld(&Type::Int);
    Term::Lam(
        "x".into(),
        fldi,
        Box::new(Term::App(
            Box::new(even_fn()),
            Box::new(Term::Fst(Box::new(Term::Unfold(Box::new(Term::Var("x".into())))))),
        )),
    )
}

/// The hidden bool-state flag value: `fold <true, <bflip, bret>>`.
pub fn bflag_state() -> Term {
    Term::Fold(
        fld(&Type::Bool),
        Box::new(Term::Pair(
            Box::new(Term::True),
            Box::new(Term::Pair(Box::new(bflip()), Box::new(bret()))),
        )),
    )
}

/// The hidden int-state flag value: `fold <0, <iflip, iret>>`.
pub fn iflag_state() -> Term {
    Term::Fold(
        fld(&Type::Int),
        Box::new(Term::Pair(
            Box::new(int(0)),
            Box::new(Term::Pair(Box::new(iflip()), Box::new(iret()))),
        )),
    )
}

/// `bflag = pack [bool] (fold <true, <bflip, bret>>) as flag`
pub fn bflag() -> Term {
    Term::Pack(Type::Bool, Box::new(bflag_state()), flag_ty())
}

/// `iflag = pack [int] (fold <0, <iflip, iret>>) as flag`
pub fn iflag() -> Term {
    Term::Pack(Type::Int, Box::new(iflag_state()), flag_ty())
}

/// The minimal-invariance type `mu a. unit + (a -> a)`.
pub fn min_inv_ty() -> Type {
    parse_type("mu a. unit + (a -> a)").unwrap()
}

/// `id = fun (x:tau) => x` at the minimal-invariance type.
pub fn min_inv_id() -> Term {
    let tau = min_inv_ty();
    Term::Lam("x".into(), tau, Box::new(Term::Var("x".into())))
}

/// The syntactic projection function
/// `v = fix f(x:tau):tau. case (unfold x) of
///        inl _  => fold (inl <>)
///      | inr g  => fold (inr (fun (y:tau) => f (g (f y))))`.
pub fn min_inv_v() -> Term {
    let tau = min_inv_ty();
    let sum = parse_type("unit + ((mu a. unit + (a -> a)) -> (mu a. unit + (a -> a)))").unwrap();
    let inner_lam = Term::Lam(
        "y".into(),
        tau.clone(),
        Box::new(Term::App(
            Box::new(Term::Var("f".into())),
            Box::new(Term::App(
                Box::new(Term::Var("g".into())),
                Box::new(Term::App(Box::new(Term::Var("f".into())), Box::new(Term::Var("y".into())))),
            )),
        )),
    );
    let body = Term::Case(
        Box::new(Term::Unfold(Box::new(Term::Var("x".into())))),
        "w".into(),
        Box::new(Term::Fold(tau.clone(), Box::new(Term::Inl(sum.clone(), Box::new(Term::Unit))))),
        "g".into(),
        Box::new(Term::Fold(tau.clone(), Box::new(Term::Inr(sum, Box::new(inner_lam))))),
    );
    mk_fix("f", "x", &tau, &tau, &body)
}

/// The parity relation of the flag proof:
/// `(x1 down bool, x2 down int).
///    exists y down int. (x1 = true /\ y+y v x2) \/ (x1 = false /\ (y+y)+1 v x2)`
pub fn flag_witness_relation() -> crate::rel::RelExpr {
    use crate::rel::{and, eq_tm, or, RelExpr};
    use crate::sugar::{bsteps, down};
    let x1 = Term::Var("x1".into());
    let x2 = Term::Var("x2".into());
    let y = Term::Var("y".into());
    let double = Term::Prim(fmu::PrimOp::Add, vec![y.clone(), y.clone()]);
    let double1 = Term::Prim(fmu::PrimOp::Add, vec![double.clone(), int(1)]);
    let body = RelExpr::ExTerm(
        "y".into(),
        Box::new(and(
            down(y, Type::Int),
            or(
                and(eq_tm(x1.clone(), Term::True), bsteps(double, x2.clone())),
                and(eq_tm(x1.clone(), Term::False), bsteps(double1, x2.clone())),
            ),
        )),
    );
    RelExpr::Abs(vec!["x1".into(), "x2".into()], Box::new(body))
}

#[cfg(test)]
mod tests {
    use super::*;
    use fmu::statics::TypingCtx;
    use fmu::{eval, typecheck, EvalOutcome};

    #[test]
    fn prelude_terms_typecheck() {
        let g = TypingCtx::empty();
        assert_eq!(typecheck(&g, &not_fn()).unwrap(), parse_type("bool -> bool").unwrap());
        assert_eq!(typecheck(&g, &even_fn()).unwrap(), parse_type("int -> bool").unwrap());
        assert!(typecheck(&g, &bflag()).unwrap().alpha_eq(&flag_ty()));
        assert!(typecheck(&g, &iflag()).unwrap().alpha_eq(&flag_ty()));
        let tau = min_inv_ty();
        let fun = Type::Fun(Box::new(tau.clone()), Box::new(tau));
        assert!(typecheck(&g, &min_inv_id()).unwrap().alpha_eq(&fun));
        assert!(typecheck(&g, &min_inv_v()).unwrap().alpha_eq(&fun));
    }

    #[test]
    fn even_handles_signs() {
        for (k, want) in [(0, true), (1, false), (2, true), (-1, false), (-2, true), (7, false), (10, true)] {
            let app = Term::App(Box::new(even_fn()), Box::new(int(k)));
            match eval(&app, 10_000).unwrap() {
                EvalOutcome::Value(v, _) => {
                    assert_eq!(v == Term::True, want, "even({k})");
                }
                other => panic!("even({k}) did not converge: {other:?}"),
            }
        }
    }

    #[test]
    fn flag_typechecks_and_flips() {
        // applying iflip to the initial int state yields state 1
        let g = TypingCtx::empty();
        let fldi = fld(&Type::Int);
        let state = iflag_state();
        assert!(typecheck(&g, &state).unwrap().alpha_eq(&fldi));
        let applied = Term::App(Box::new(iflip()), Box::new(state));
        match eval(&applied, 10_000).unwrap() {
            EvalOutcome::Value(v, _) => match v {
                Term::Fold(_, inner) => match *inner {
                    Term::Pair(first, _) => assert_eq!(*first, int(1)),
                    other => panic!("{other:?}"),
                },
                other => panic!("{other:?}"),
            },
            other => panic!("{other:?}"),
        }
    }
}
