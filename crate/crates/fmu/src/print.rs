//! Concrete-syntax printer. `parse::parse_term(term_to_string(t))` yields `t`
//! back exactly (same binder names), which is stronger than the alpha
//! round-trip the test suite checks.

use crate::syntax::{PrimOp, Term, Type};
use std::fmt::Write;

// Type precedence: 0 arrow/quantifiers, 1 sum, 2 product, 3 atom.
fn ty(t: &Type, prec: u8, out: &mut String) {
    match t {
        Type::Var(a) => out.push_str(a),
        Type::Unit => out.push_str("unit"),
        Type::Int => out.push_str("int"),
        Type::Bool => out.push_str("bool"),
        Type::Fun(a, b) => {
            let need = prec > 0;
            if need {
                out.push('(');
            }
            ty(a, 1, out);
            out.push_str(" -> ");
            ty(b, 0, out);
            if need {
                out.push(')');
            }
        }
        Type::Sum(a, b) => {
            let need = prec > 1;
            if need {
                out.push('(');
            }
            ty(a, 1, out);
            out.push_str(" + ");
            ty(b, 2, out);
            if need {
                out.push(')');
            }
        }
        Type::Pair(a, b) => {
            let need = prec > 2;
            if need {
                out.push('(');
            }
            ty(a, 2, out);
            out.push_str(" * ");
            ty(b, 3, out);
            if need {
                out.push(')');
            }
        }
        Type::All(a, b) | Type::Exist(a, b) | Type::Rec(a, b) => {
            let kw = match t {
                Type::All(..) => "forall",
                Type::Exist(..) => "exists",
                _ => "mu",
            };
            let need = prec > 0;
            if need {
                out.push('(');
            }
            let _ = write!(out, "{kw} {a}. ");
            ty(b, 0, out);
            if need {
                out.push(')');
            }
        }
    }
}

pub fn type_to_string(t: &Type) -> String {
    let mut s = String::new();
    ty(t, 0, &mut s);
    s
}

// Term precedence:
//   0 expr (fun/tfun/if/case/unpack/pack)
//   1 comparison (= < <=)
//   2 additive (+ -)
//   3 application / prefix keyword forms
//   4 postfix .1/.2
//   5 atom
fn tm(e: &Term, prec: u8, out: &mut String) {
    let paren = |need: bool, out: &mut String, f: &dyn Fn(&mut String)| {
        if need {
            out.push('(');
        }
        f(out);
        if need {
            out.push(')');
        }
    };
    match e {
        Term::Var(x) => out.push_str(x),
        Term::Unit => out.push_str("<>"),
        Term::Int(n) => {
            if n.sign() == num_bigint::Sign::Minus {
                paren(prec > 2, out, &|o| {
                    let _ = write!(o, "{n}");
                });
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Term::True => out.push_str("true"),
        Term::False => out.push_str("false"),
        Term::Prim(op, args) => {
            let (lp, rp, myp) = if op.returns_bool() { (2, 2, 1) } else { (2, 3, 2) };
            paren(prec > myp, out, &|o| {
                tm(&args[0], lp, o);
                let _ = write!(o, " {} ", op.name());
                tm(&args[1], rp, o);
            });
        }
        Term::If(c, a, b) => paren(prec > 0, out, &|o| {
            o.push_str("if ");
            tm(c, 0, o);
            o.push_str(" then ");
            tm(a, 0, o);
            o.push_str(" else ");
            tm(b, 0, o);
        }),
        Term::Pair(a, b) => {
            // Parenthesized in argument positions so `f <a, b>` cannot be
            // re-read as a comparison.
            paren(prec >= 4, out, &|o| {
                o.push('<');
                tm(a, 0, o);
                o.push_str(", ");
                tm(b, 0, o);
                o.push('>');
            });
        }
        Term::Fst(a) => paren(prec > 4, out, &|o| {
            tm(a, 5, o);
            o.push_str(".1");
        }),
        Term::Snd(a) => paren(prec > 4, out, &|o| {
            tm(a, 5, o);
            o.push_str(".2");
        }),
        Term::Inl(t, a) => paren(prec > 3, out, &|o| {
            o.push_str("inl[");
            o.push_str(&type_to_string(t));
            o.push_str("] ");
            tm(a, 4, o);
        }),
        Term::Inr(t, a) => paren(prec > 3, out, &|o| {
            o.push_str("inr[");
            o.push_str(&type_to_string(t));
            o.push_str("] ");
            tm(a, 4, o);
        }),
        Term::Case(s, x1, e1, x2, e2) => paren(prec > 0, out, &|o| {
            o.push_str("case ");
            tm(s, 0, o);
            let _ = write!(o, " of inl {x1} => ");
            tm(e1, 0, o);
            let _ = write!(o, " | inr {x2} => ");
            tm(e2, 0, o);
        }),
        Term::Lam(x, t, b) => paren(prec > 0, out, &|o| {
            let _ = write!(o, "fun ({x}:");
            o.push_str(&type_to_string(t));
            o.push_str(") => ");
            tm(b, 0, o);
        }),
        Term::App(f, a) => paren(prec > 3, out, &|o| {
            tm(f, 3, o);
            o.push(' ');
            tm(a, 4, o);
        }),
        Term::TLam(a, b) => paren(prec > 0, out, &|o| {
            let _ = write!(o, "tfun {a} => ");
            tm(b, 0, o);
        }),
        Term::TApp(f, t) => paren(prec > 3, out, &|o| {
            tm(f, 3, o);
            o.push_str(" [");
            o.push_str(&type_to_string(t));
            o.push(']');
        }),
        Term::Pack(t1, b, t2) => paren(prec > 0, out, &|o| {
            o.push_str("pack [");
            o.push_str(&type_to_string(t1));
            o.push_str("] ");
            tm(b, 4, o);
            o.push_str(" as ");
            o.push_str(&type_to_string(t2));
        }),
        Term::Unpack(e1, a, x, e2) => paren(prec > 0, out, &|o| {
            let _ = write!(o, "unpack <{a}, {x}> = ");
            tm(e1, 1, o);
            o.push_str(" in ");
            tm(e2, 0, o);
        }),
        Term::Fold(t, a) => paren(prec > 3, out, &|o| {
            o.push_str("fold[");
            o.push_str(&type_to_string(t));
            o.push_str("] ");
            tm(a, 4, o);
        }),
        Term::Unfold(a) => paren(prec > 3, out, &|o| {
            o.push_str("unfold ");
            tm(a, 4, o);
        }),
    }
}

pub fn term_to_string(e: &Term) -> String {
    let mut s = String::new();
    tm(e, 0, &mut s);
    s
}

#[allow(dead_code)]
fn op_name(op: PrimOp) -> &'static str {
    op.name()
}
