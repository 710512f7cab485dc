//! A call-by-value lambda calculus with impredicative polymorphism and
//! iso-recursive types: abstract and concrete syntax, typing of terms and of
//! one-hole program contexts, and a deterministic small-step semantics that
//! classifies unroll-roll reductions.

pub mod context;
pub mod dynamics;
pub mod parse;
pub mod print;
pub mod statics;
pub mod syntax;
pub mod verdict;

pub use context::{ctx_infer, ctx_typecheck, Ctx};
pub use dynamics::{
    eval, mk_fix, reaches, reaches_with, step, step_with, EvalOutcome, ReachMode, StepRecord,
};
pub use parse::{parse_ctx, parse_file, parse_term, parse_type, ParseError, SourceFile};
pub use print::{term_to_string, type_to_string};
pub use statics::{type_wf, typecheck, TypeError, TypingCtx};
pub use syntax::{PrimOp, Term, TmVar, TyVar, Type};
pub use verdict::Verdict;
