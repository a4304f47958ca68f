//! Macro layer: elaboration of the derived forms (let, split, case, dest,
//! prf, subst, exfalso, catch, throw, projections, applications) into core
//! syntax.
//!
//! The binder discipline follows the NEF refinement: forms whose scrutinee is
//! NEF expand through the delimited continuation t̂p (so the result stays
//! NEF-typable in dependent mode), everything else through a fresh ordinary
//! co-variable. `prf` is only meaningful on NEF proofs and expansion fails
//! otherwise.

use crate::names::{self, fresh, Node};
use crate::syntax::*;
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
#[error("{message}")]
pub struct MacroError {
    pub message: String,
}

fn bail<T>(msg: impl Into<String>) -> Result<T, MacroError> {
    Err(MacroError { message: msg.into() })
}

type MResult<T> = Result<T, MacroError>;

fn fresh_covar(hint: &str, around: &[Node]) -> Name {
    let mut avoid: HashSet<Name> = HashSet::new();
    for n in around {
        avoid.extend(names::all_names(*n));
    }
    fresh(hint, &avoid)
}

pub fn expand_term(t: &Term) -> MResult<Term> {
    Ok(match t {
        Term::Var(_) | Term::Zero => t.clone(),
        Term::Succ(u) => Term::succ(expand_term(u)?),
        Term::Rec { t, t0, x, y, ts } => Term::Rec {
            t: Box::new(expand_term(t)?),
            t0: Box::new(expand_term(t0)?),
            x: x.clone(),
            y: y.clone(),
            ts: Box::new(expand_term(ts)?),
        },
        Term::Lam { x, ty, body } => Term::Lam {
            x: x.clone(),
            ty: ty.clone(),
            body: Box::new(expand_term(body)?),
        },
        Term::App(f, a) => Term::app(expand_term(f)?, expand_term(a)?),
        Term::Wit(p) => Term::wit(expand_proof(p)?),
    })
}

pub fn expand_proof(p: &Proof) -> MResult<Proof> {
    Ok(match p {
        Proof::Var(_) => p.clone(),
        Proof::Refl { ann } => Proof::Refl { ann: expand_oform(ann)? },
        Proof::Inj { i, p, ann } => Proof::Inj {
            i: *i,
            p: Box::new(expand_proof(p)?),
            ann: expand_oform(ann)?,
        },
        Proof::Pair(p, q) => Proof::pair(expand_proof(p)?, expand_proof(q)?),
        Proof::DepPair { t, p, ann } => Proof::DepPair {
            t: Box::new(expand_term(t)?),
            p: Box::new(expand_proof(p)?),
            ann: expand_oform(ann)?,
        },
        Proof::LamTerm { x, ty, body } => Proof::LamTerm {
            x: x.clone(),
            ty: ty.clone(),
            body: Box::new(expand_proof(body)?),
        },
        Proof::LamProof { a, dom, body } => Proof::LamProof {
            a: a.clone(),
            dom: match dom {
                Some(d) => Some(Box::new(expand_formula(d)?)),
                None => None,
            },
            body: Box::new(expand_proof(body)?),
        },
        Proof::Mu { alpha, ann, body } => Proof::Mu {
            alpha: alpha.clone(),
            ann: expand_oform(ann)?,
            body: Box::new(expand_command(body)?),
        },
        Proof::Shift { ann, body } => Proof::Shift {
            ann: expand_oform(ann)?,
            body: Box::new(expand_command(body)?),
        },
        Proof::Ind { t, p0, a, x, ps, motive } => Proof::Ind {
            t: Box::new(expand_term(t)?),
            p0: Box::new(expand_proof(p0)?),
            a: a.clone(),
            x: x.clone(),
            ps: Box::new(expand_proof(ps)?),
            motive: match motive {
                Some((x, m)) => Some((x.clone(), Box::new(expand_formula(m)?))),
                None => None,
            },
        },
        Proof::Cofix { t, b, x, body, ann } => Proof::Cofix {
            t: Box::new(expand_term(t)?),
            b: b.clone(),
            x: x.clone(),
            body: Box::new(expand_proof(body)?),
            ann: match ann {
                Some(ca) => Some(Box::new(CofixAnn {
                    f: ca.f.clone(),
                    t_ty: ca.t_ty.clone(),
                    body: expand_formula(&ca.body)?,
                })),
                None => None,
            },
        },
        Proof::Ascribe(p, a) => Proof::ascribe(expand_proof(p)?, expand_formula(a)?),
        Proof::Sugar(s) => expand_sugar(s)?,
    })
}

/// Bind the (already expanded) scrutinee `p` against context `mk(out)` where
/// `out` is the co-variable the branches finish on: t̂p when `p` is NEF,
/// a fresh ordinary μ-binder otherwise.
fn via_alpha_p(p: Proof, mk: impl Fn(&Name) -> Context) -> Proof {
    if nef_proof(&p) {
        let out = TP.to_string();
        Proof::shift(Command::cut(p, mk(&out)))
    } else {
        let e_probe = mk(&"'_probe".to_string());
        let out = fresh_covar("'a", &[Node::Proof(&p), Node::Context(&e_probe)]);
        Proof::mu(&out, Command::cut(p, mk(&out)))
    }
}

pub fn expand_sugar(s: &Sugar) -> MResult<Proof> {
    Ok(match s {
        Sugar::Let { a, def, body } => {
            let def = expand_proof(def)?;
            let body = expand_proof(body)?;
            via_alpha_p(def, |out| {
                Context::mu_tilde(a, Command::cut(body.clone(), Context::covar(out)))
            })
        }
        Sugar::Split { p, a1, a2, body } => {
            let p = expand_proof(p)?;
            let body = expand_proof(body)?;
            via_alpha_p(p, |out| {
                Context::Forcing(Forcing::SplitPair {
                    a1: a1.clone(),
                    a2: a2.clone(),
                    body: Box::new(Command::cut(body.clone(), Context::covar(out))),
                    ann: None,
                })
            })
        }
        Sugar::Case { p, a1, p1, a2, p2 } => {
            let p = expand_proof(p)?;
            let p1 = expand_proof(p1)?;
            let p2 = expand_proof(p2)?;
            via_alpha_p(p, |out| {
                Context::Forcing(Forcing::Case {
                    a1: a1.clone(),
                    c1: Box::new(Command::cut(p1.clone(), Context::covar(out))),
                    a2: a2.clone(),
                    c2: Box::new(Command::cut(p2.clone(), Context::covar(out))),
                    ann: None,
                })
            })
        }
        Sugar::Dest { p, x, a, body } => {
            let p = expand_proof(p)?;
            let body = expand_proof(body)?;
            via_alpha_p(p, |out| {
                Context::Forcing(Forcing::SplitDep {
                    x: x.clone(),
                    a: a.clone(),
                    body: Box::new(Command::cut(body.clone(), Context::covar(out))),
                    ann: None,
                })
            })
        }
        Sugar::Prf(p) => {
            let p = expand_proof(p)?;
            if !nef_proof(&p) {
                return bail("prf applies to NEF proofs only");
            }
            let avoid: HashSet<Name> = names::all_names(Node::Proof(&p)).into_iter().collect();
            let x = fresh("x", &avoid);
            let mut avoid2 = avoid;
            avoid2.insert(x.clone());
            let a = fresh("a", &avoid2);
            Proof::shift(Command::cut(
                p,
                Context::Forcing(Forcing::SplitDep {
                    x,
                    a: a.clone(),
                    body: Box::new(Command::cut(Proof::var(&a), Context::covar(TP))),
                    ann: None,
                }),
            ))
        }
        Sugar::Subst(p, q) => {
            let p = expand_proof(p)?;
            let q = expand_proof(q)?;
            let out = fresh_covar("'a", &[Node::Proof(&p), Node::Proof(&q)]);
            Proof::mu(
                &out,
                Command::cut(
                    p,
                    Context::Forcing(Forcing::EqSplit {
                        body: Box::new(Command::cut(q, Context::covar(&out))),
                        ann: None,
                    }),
                ),
            )
        }
        Sugar::Exfalso(p) => {
            let p = expand_proof(p)?;
            let out = fresh_covar("'a", &[Node::Proof(&p)]);
            Proof::mu(&out, Command::cut(p, Context::Forcing(Forcing::Abort)))
        }
        Sugar::Catch { alpha, body } => {
            let body = expand_proof(body)?;
            Proof::mu(alpha, Command::cut(body, Context::covar(alpha)))
        }
        Sugar::Throw { alpha, arg } => {
            let arg = expand_proof(arg)?;
            let beta = {
                let mut avoid: HashSet<Name> = names::all_names(Node::Proof(&arg)).into_iter().collect();
                avoid.insert(alpha.clone());
                fresh("'b", &avoid)
            };
            Proof::mu(&beta, Command::cut(arg, Context::covar(alpha)))
        }
        Sugar::Proj { i, p } => {
            let p = expand_proof(p)?;
            let avoid: HashSet<Name> = names::all_names(Node::Proof(&p)).into_iter().collect();
            let a1 = fresh("a1", &avoid);
            let mut avoid2 = avoid;
            avoid2.insert(a1.clone());
            let a2 = fresh("a2", &avoid2);
            let picked = if *i == 1 { a1.clone() } else { a2.clone() };
            via_alpha_p(p, |out| {
                Context::Forcing(Forcing::SplitPair {
                    a1: a1.clone(),
                    a2: a2.clone(),
                    body: Box::new(Command::cut(Proof::var(&picked), Context::covar(out))),
                    ann: None,
                })
            })
        }
        Sugar::AppT(p, t) => {
            let p = expand_proof(p)?;
            let t = expand_term(t)?;
            let out = fresh_covar("'a", &[Node::Proof(&p), Node::Term(&t)]);
            Proof::mu(
                &out,
                Command::cut(
                    p,
                    Context::Forcing(Forcing::term_stack(t, Context::covar(&out))),
                ),
            )
        }
        Sugar::AppP(p, q) => {
            let p = expand_proof(p)?;
            let q = expand_proof(q)?;
            let out = fresh_covar("'a", &[Node::Proof(&p), Node::Proof(&q)]);
            Proof::mu(
                &out,
                Command::cut(
                    p,
                    Context::Forcing(Forcing::proof_stack(q, Context::covar(&out))),
                ),
            )
        }
    })
}

fn expand_oform(a: &OForm) -> MResult<OForm> {
    Ok(match a {
        Some(f) => Some(Box::new(expand_formula(f)?)),
        None => None,
    })
}

pub fn expand_context(e: &Context) -> MResult<Context> {
    Ok(match e {
        Context::Covar(_) => e.clone(),
        Context::MuTilde { a, ann, body, store } => Context::MuTilde {
            a: a.clone(),
            ann: expand_oform(ann)?,
            body: Box::new(expand_command(body)?),
            store: expand_store(store)?,
        },
        Context::CoShift { ann, body } => Context::CoShift {
            ann: expand_oform(ann)?,
            body: Box::new(expand_command(body)?),
        },
        Context::Forcing(f) => Context::Forcing(expand_forcing(f)?),
    })
}

pub fn expand_forcing(f: &Forcing) -> MResult<Forcing> {
    Ok(match f {
        Forcing::Abort => Forcing::Abort,
        Forcing::Case { a1, c1, a2, c2, ann } => Forcing::Case {
            a1: a1.clone(),
            c1: Box::new(expand_command(c1)?),
            a2: a2.clone(),
            c2: Box::new(expand_command(c2)?),
            ann: expand_oform(ann)?,
        },
        Forcing::SplitPair { a1, a2, body, ann } => Forcing::SplitPair {
            a1: a1.clone(),
            a2: a2.clone(),
            body: Box::new(expand_command(body)?),
            ann: expand_oform(ann)?,
        },
        Forcing::SplitDep { x, a, body, ann } => Forcing::SplitDep {
            x: x.clone(),
            a: a.clone(),
            body: Box::new(expand_command(body)?),
            ann: expand_oform(ann)?,
        },
        Forcing::TermStack { t, e, ann } => Forcing::TermStack {
            t: Box::new(expand_term(t)?),
            e: Box::new(expand_context(e)?),
            ann: expand_oform(ann)?,
        },
        Forcing::ProofStack { q, e, ann } => Forcing::ProofStack {
            q: Box::new(expand_proof(q)?),
            e: Box::new(expand_context(e)?),
            ann: expand_oform(ann)?,
        },
        Forcing::EqSplit { body, ann } => Forcing::EqSplit {
            body: Box::new(expand_command(body)?),
            ann: expand_oform(ann)?,
        },
    })
}

pub fn expand_coterm(pi: &Coterm) -> MResult<Coterm> {
    Ok(match pi {
        Coterm::Stack { u, pi } => Coterm::stack(expand_term(u)?, expand_coterm(pi)?),
        Coterm::MuTildeTerm { x, ty, body } => Coterm::MuTildeTerm {
            x: x.clone(),
            ty: ty.clone(),
            body: Box::new(expand_command(body)?),
        },
    })
}

pub fn expand_command(c: &Command) -> MResult<Command> {
    Ok(match c {
        Command::Proof { p, e } => Command::cut(expand_proof(p)?, expand_context(e)?),
        Command::Term { t, pi } => Command::cut_term(expand_term(t)?, expand_coterm(pi)?),
    })
}

pub fn expand_store(s: &Store) -> MResult<Store> {
    let mut out = Vec::with_capacity(s.0.len());
    for b in &s.0 {
        out.push(Binding {
            name: b.name.clone(),
            body: match &b.body {
                Storable::Proof(p) => Storable::Proof(expand_proof(p)?),
                Storable::Context(e) => Storable::Context(expand_context(e)?),
            },
            ann: expand_oform(&b.ann)?,
        });
    }
    Ok(Store(out))
}

pub fn expand_closure(cl: &Closure) -> MResult<Closure> {
    Ok(Closure::new(expand_command(&cl.command)?, expand_store(&cl.store)?))
}

pub fn expand_formula(a: &Formula) -> MResult<Formula> {
    Ok(match a {
        Formula::Top | Formula::Bot => a.clone(),
        Formula::Eq(t, u) => Formula::eq(expand_term(t)?, expand_term(u)?),
        Formula::And(x, y) => Formula::and(expand_formula(x)?, expand_formula(y)?),
        Formula::Or(x, y) => Formula::or(expand_formula(x)?, expand_formula(y)?),
        Formula::Pi { a, dom, cod } => {
            Formula::pi(a, expand_formula(dom)?, expand_formula(cod)?)
        }
        Formula::Forall { x, ty, body } => {
            Formula::forall(x, ty.clone(), expand_formula(body)?)
        }
        Formula::Exists { x, ty, body } => {
            Formula::exists(x, ty.clone(), expand_formula(body)?)
        }
        Formula::Nu { t, x, f, body } => {
            Formula::nu(expand_term(t)?, x, f, expand_formula(body)?)
        }
    })
}

// -- named-sugar detection (core-syntax gate) --------------------------------

fn sugar_name(s: &Sugar) -> Option<&'static str> {
    match s {
        Sugar::Let { .. } => Some("let"),
        Sugar::Split { .. } => Some("split"),
        Sugar::Case { .. } => Some("case"),
        Sugar::Dest { .. } => Some("dest"),
        Sugar::Prf(_) => Some("prf"),
        Sugar::Subst(..) => Some("subst"),
        Sugar::Exfalso(_) => Some("exfalso"),
        Sugar::Catch { .. } => Some("catch"),
        Sugar::Throw { .. } => Some("throw"),
        Sugar::Proj { i, .. } => Some(if *i == 1 { "fst" } else { "snd" }),
        // applications are grammar-level, not named macros
        Sugar::AppT(..) | Sugar::AppP(..) => None,
    }
}

pub fn find_named_sugar_term(t: &Term) -> Option<&'static str> {
    match t {
        Term::Var(_) | Term::Zero => None,
        Term::Succ(u) => find_named_sugar_term(u),
        Term::Rec { t, t0, ts, .. } => find_named_sugar_term(t)
            .or_else(|| find_named_sugar_term(t0))
            .or_else(|| find_named_sugar_term(ts)),
        Term::Lam { body, .. } => find_named_sugar_term(body),
        Term::App(f, a) => find_named_sugar_term(f).or_else(|| find_named_sugar_term(a)),
        Term::Wit(p) => find_named_sugar_proof(p),
    }
}

pub fn find_named_sugar_proof(p: &Proof) -> Option<&'static str> {
    match p {
        Proof::Var(_) | Proof::Refl { .. } => None,
        Proof::Inj { p, .. } => find_named_sugar_proof(p),
        Proof::Pair(p, q) => find_named_sugar_proof(p).or_else(|| find_named_sugar_proof(q)),
        Proof::DepPair { t, p, .. } => {
            find_named_sugar_term(t).or_else(|| find_named_sugar_proof(p))
        }
        Proof::LamTerm { body, .. } | Proof::LamProof { body, .. } => find_named_sugar_proof(body),
        Proof::Mu { body, .. } | Proof::Shift { body, .. } => find_named_sugar_command(body),
        Proof::Ind { t, p0, ps, .. } => find_named_sugar_term(t)
            .or_else(|| find_named_sugar_proof(p0))
            .or_else(|| find_named_sugar_proof(ps)),
        Proof::Cofix { t, body, .. } => {
            find_named_sugar_term(t).or_else(|| find_named_sugar_proof(body))
        }
        Proof::Ascribe(p, _) => find_named_sugar_proof(p),
        Proof::Sugar(s) => sugar_name(s).or_else(|| match s.as_ref() {
            Sugar::AppT(p, t) => {
                find_named_sugar_proof(p).or_else(|| find_named_sugar_term(t))
            }
            Sugar::AppP(p, q) => {
                find_named_sugar_proof(p).or_else(|| find_named_sugar_proof(q))
            }
            _ => unreachable!("named sugar reported above"),
        }),
    }
}

pub fn find_named_sugar_context(e: &Context) -> Option<&'static str> {
    match e {
        Context::Covar(_) => None,
        Context::MuTilde { body, store, .. } => {
            find_named_sugar_command(body).or_else(|| find_named_sugar_store(store))
        }
        Context::CoShift { body, .. } => find_named_sugar_command(body),
        Context::Forcing(f) => match f {
            Forcing::Abort => None,
            Forcing::Case { c1, c2, .. } => {
                find_named_sugar_command(c1).or_else(|| find_named_sugar_command(c2))
            }
            Forcing::SplitPair { body, .. }
            | Forcing::SplitDep { body, .. }
            | Forcing::EqSplit { body, .. } => find_named_sugar_command(body),
            Forcing::TermStack { t, e, .. } => {
                find_named_sugar_term(t).or_else(|| find_named_sugar_context(e))
            }
            Forcing::ProofStack { q, e, .. } => {
                find_named_sugar_proof(q).or_else(|| find_named_sugar_context(e))
            }
        },
    }
}

pub fn find_named_sugar_command(c: &Command) -> Option<&'static str> {
    match c {
        Command::Proof { p, e } => {
            find_named_sugar_proof(p).or_else(|| find_named_sugar_context(e))
        }
        Command::Term { t, pi } => find_named_sugar_term(t).or_else(|| match pi.as_ref() {
            Coterm::Stack { u, pi } => find_named_sugar_term(u).or_else(|| {
                find_named_sugar_command(&Command::cut_term(
                    Term::Zero,
                    pi.as_ref().clone(),
                ))
            }),
            Coterm::MuTildeTerm { body, .. } => find_named_sugar_command(body),
        }),
    }
}

pub fn find_named_sugar_store(s: &Store) -> Option<&'static str> {
    for b in &s.0 {
        let hit = match &b.body {
            Storable::Proof(p) => find_named_sugar_proof(p),
            Storable::Context(e) => find_named_sugar_context(e),
        };
        if hit.is_some() {
            return hit;
        }
    }
    None
}

pub fn find_named_sugar_closure(cl: &Closure) -> Option<&'static str> {
    find_named_sugar_command(&cl.command).or_else(|| find_named_sugar_store(&cl.store))
}
