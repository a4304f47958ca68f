//! Printer for every syntactic sort. Output re-parses to an α-equivalent
//! node: numerals are spelled out as S(...S(0)...), co-variables that are
//! neither quoted nor one of the bare names get a quote, quantifiers and
//! right-open forms are parenthesized wherever the grammar would otherwise
//! extend them. Elaboration annotations on binders are not printed; explicit
//! source annotations (lam/fun domains, fix motives, cofix invariants,
//! ascriptions) are.

use super::Parsed;
use crate::syntax::*;

pub fn pretty(node: &Parsed) -> String {
    match node {
        Parsed::Term(t) => pretty_term(t),
        Parsed::Proof(p) => pretty_proof(p),
        Parsed::Context(e) => pretty_context(e),
        Parsed::Command(c) => pretty_command(c),
        Parsed::Formula(f) => pretty_formula(f),
        Parsed::Type(t) => pretty_type(t),
        Parsed::Closure(cl) => pretty_closure(cl),
    }
}

fn covar(n: &str) -> String {
    if n.starts_with('\'') || matches!(n, "alpha" | "beta" | "tp" | "star") {
        n.to_string()
    } else {
        format!("'{n}")
    }
}

pub fn pretty_type(t: &FiniteType) -> String {
    match t {
        FiniteType::Nat => "N".to_string(),
        FiniteType::Arrow(a, b) => {
            let lhs = match a.as_ref() {
                FiniteType::Nat => pretty_type(a),
                FiniteType::Arrow(..) => format!("({})", pretty_type(a)),
            };
            format!("{lhs} -> {}", pretty_type(b))
        }
    }
}

// -- terms --------------------------------------------------------------

fn term_atomic(t: &Term) -> bool {
    matches!(
        t,
        Term::Var(_) | Term::Zero | Term::Succ(_) | Term::Rec { .. } | Term::Wit(_)
    )
}

pub fn pretty_term(t: &Term) -> String {
    match t {
        Term::Var(x) => x.clone(),
        Term::Zero => "0".to_string(),
        Term::Succ(u) => format!("S({})", pretty_term(u)),
        Term::Rec { t, t0, x, y, ts } => format!(
            "rec({}; {}; ({x}, {y}). {})",
            pretty_term(t),
            pretty_term(t0),
            pretty_term(ts)
        ),
        Term::Lam { x, ty, body } => match ty {
            Some(ty) => format!("lam ({x} : {}). {}", pretty_type(ty), pretty_term(body)),
            None => format!("lam {x}. {}", pretty_term(body)),
        },
        Term::App(f, a) => {
            let head = match f.as_ref() {
                Term::App(..) => pretty_term(f),
                _ if term_atomic(f) => pretty_term(f),
                _ => format!("({})", pretty_term(f)),
            };
            let arg = if term_atomic(a) {
                pretty_term(a)
            } else {
                format!("({})", pretty_term(a))
            };
            format!("{head} {arg}")
        }
        Term::Wit(p) => format!("wit({})", pretty_proof(p)),
    }
}

// -- proofs --------------------------------------------------------------

/// Self-delimiting on both sides: usable bare as an application argument.
fn proof_atomic(p: &Proof) -> bool {
    match p {
        Proof::Var(_)
        | Proof::Refl { .. }
        | Proof::Inj { .. }
        | Proof::Pair(..)
        | Proof::DepPair { .. }
        | Proof::Ind { .. }
        | Proof::Cofix { .. }
        | Proof::Shift { .. }
        | Proof::Ascribe(..) => true,
        Proof::Sugar(s) => matches!(
            s.as_ref(),
            Sugar::Prf(_) | Sugar::Subst(..) | Sugar::Exfalso(_) | Sugar::Proj { .. }
        ),
        _ => false,
    }
}

fn proof_app_head(p: &Proof) -> String {
    match p {
        Proof::Sugar(s) if matches!(s.as_ref(), Sugar::AppT(..) | Sugar::AppP(..)) => {
            pretty_proof(p)
        }
        _ if proof_atomic(p) => pretty_proof(p),
        _ => format!("({})", pretty_proof(p)),
    }
}

fn proof_arg(p: &Proof) -> String {
    if proof_atomic(p) {
        pretty_proof(p)
    } else {
        format!("({})", pretty_proof(p))
    }
}

fn term_arg(t: &Term) -> String {
    if term_atomic(t) {
        pretty_term(t)
    } else {
        format!("({})", pretty_term(t))
    }
}

/// Scrutinee position of let/split/case/dest: right-open forms get parens.
fn proof_scrutinee(p: &Proof) -> String {
    if proof_atomic(p) || matches!(p, Proof::Sugar(s) if matches!(s.as_ref(), Sugar::AppT(..) | Sugar::AppP(..)))
    {
        pretty_proof(p)
    } else {
        format!("({})", pretty_proof(p))
    }
}

pub fn pretty_proof(p: &Proof) -> String {
    match p {
        Proof::Var(a) => a.clone(),
        Proof::Refl { .. } => "refl".to_string(),
        Proof::Inj { i, p, .. } => format!("inj{i}({})", pretty_proof(p)),
        Proof::Pair(p, q) => format!("({}, {})", pretty_proof(p), pretty_proof(q)),
        Proof::DepPair { t, p, .. } => {
            format!("[{}, {}]", pretty_term(t), pretty_proof(p))
        }
        Proof::LamTerm { x, ty, body } => match ty {
            Some(ty) => format!("lam ({x} : {}). {}", pretty_type(ty), pretty_proof(body)),
            None => format!("lam {x}. {}", pretty_proof(body)),
        },
        Proof::LamProof { a, dom, body } => match dom {
            Some(d) => format!("fun ({a} : {}). {}", pretty_formula(d), pretty_proof(body)),
            None => format!("fun {a}. {}", pretty_proof(body)),
        },
        Proof::Mu { alpha, body, .. } => {
            format!("mu {}. {}", covar(alpha), pretty_command(body))
        }
        Proof::Shift { body, .. } => format!("shift({})", pretty_command(body)),
        Proof::Ind { t, p0, a, x, ps, motive } => {
            let head = match motive {
                Some((mx, m)) => format!("fix[{mx}. {}]", pretty_formula(m)),
                None => "fix".to_string(),
            };
            format!(
                "{head}({}; {}; ({a}, {x}). {})",
                pretty_term(t),
                pretty_proof(p0),
                pretty_proof(ps)
            )
        }
        Proof::Cofix { t, b, x, body, ann } => {
            let head = match ann {
                Some(ca) => format!(
                    "cofix[{} {x} ^ {}. {}]",
                    ca.f,
                    pretty_type(&ca.t_ty),
                    pretty_formula(&ca.body)
                ),
                None => "cofix".to_string(),
            };
            format!("{head}({}; ({b}, {x}). {})", pretty_term(t), pretty_proof(body))
        }
        Proof::Ascribe(p, a) => format!("({} : {})", pretty_proof(p), pretty_formula(a)),
        Proof::Sugar(s) => pretty_sugar(s),
    }
}

fn pretty_sugar(s: &Sugar) -> String {
    match s {
        Sugar::Let { a, def, body } => {
            format!("let {a} = {} in {}", proof_scrutinee(def), pretty_proof(body))
        }
        Sugar::Split { p, a1, a2, body } => format!(
            "split {} as ({a1}, {a2}) in {}",
            proof_scrutinee(p),
            pretty_proof(body)
        ),
        Sugar::Case { p, a1, p1, a2, p2 } => format!(
            "case {} of {{ inj1 {a1} -> {} | inj2 {a2} -> {} }}",
            proof_scrutinee(p),
            pretty_proof(p1),
            pretty_proof(p2)
        ),
        Sugar::Dest { p, x, a, body } => format!(
            "dest {} as ({x}, {a}) in {}",
            proof_scrutinee(p),
            pretty_proof(body)
        ),
        Sugar::Prf(p) => format!("prf({})", pretty_proof(p)),
        Sugar::Subst(p, q) => format!("subst({}; {})", pretty_proof(p), pretty_proof(q)),
        Sugar::Exfalso(p) => format!("exfalso({})", pretty_proof(p)),
        Sugar::Catch { alpha, body } => {
            format!("catch {}. {}", covar(alpha), pretty_proof(body))
        }
        Sugar::Throw { alpha, arg } => {
            format!("throw {}. {}", covar(alpha), pretty_proof(arg))
        }
        Sugar::Proj { i, p } => {
            let f = if *i == 1 { "fst" } else { "snd" };
            format!("{f}({})", pretty_proof(p))
        }
        Sugar::AppT(p, t) => format!("{} {}", proof_app_head(p), term_arg(t)),
        Sugar::AppP(p, q) => format!("{} {}", proof_app_head(p), proof_arg(q)),
    }
}

// -- contexts, coterms, commands, closures --------------------------------

pub fn pretty_context(e: &Context) -> String {
    match e {
        Context::Covar(a) => covar(a),
        Context::MuTilde { a, body, store, .. } => {
            let mut s = format!("mu~ {a}. {}", pretty_command(body));
            s.push_str(&store_suffix(store));
            s
        }
        Context::CoShift { body, .. } => format!("coshift({})", pretty_command(body)),
        Context::Forcing(f) => pretty_forcing(f),
    }
}

fn pretty_forcing(f: &Forcing) -> String {
    match f {
        Forcing::Abort => "abort".to_string(),
        Forcing::Case { a1, c1, a2, c2, .. } => format!(
            "case~ {{ inj1 {a1} -> {} | inj2 {a2} -> {} }}",
            pretty_command(c1),
            pretty_command(c2)
        ),
        Forcing::SplitPair { a1, a2, body, .. } => {
            format!("split~ ({a1}, {a2}) -> {}", pretty_command(body))
        }
        Forcing::SplitDep { x, a, body, .. } => {
            format!("dest~ ({x}, {a}) -> {}", pretty_command(body))
        }
        Forcing::TermStack { t, e, .. } => {
            format!("{} . {}", term_arg(t), pretty_context(e))
        }
        Forcing::ProofStack { q, e, .. } => {
            format!("{} . {}", proof_arg(q), pretty_context(e))
        }
        Forcing::EqSplit { body, .. } => format!("eq~ -> {}", pretty_command(body)),
    }
}

pub fn pretty_coterm(pi: &Coterm) -> String {
    match pi {
        Coterm::Stack { u, pi } => format!("{} . {}", term_arg(u), pretty_coterm(pi)),
        Coterm::MuTildeTerm { x, body, .. } => {
            format!("mu~ {x}. {}", pretty_command(body))
        }
    }
}

pub fn pretty_command(c: &Command) -> String {
    match c {
        Command::Proof { p, e } => {
            format!("<{} | {}>", pretty_proof(p), pretty_context(e))
        }
        Command::Term { t, pi } => {
            format!("<{} | {}>", pretty_term(t), pretty_coterm(pi))
        }
    }
}

fn store_suffix(store: &Store) -> String {
    let mut s = String::new();
    for b in &store.0 {
        let body = match &b.body {
            Storable::Proof(p) => pretty_proof(p),
            Storable::Context(e) => pretty_context(e),
        };
        let name = match &b.body {
            Storable::Context(_) => covar(&b.name),
            Storable::Proof(_) => b.name.clone(),
        };
        s.push_str(&format!(" [{name} := {body}]"));
    }
    s
}

pub fn pretty_closure(cl: &Closure) -> String {
    format!("{}{}", pretty_command(&cl.command), store_suffix(&cl.store))
}

pub fn pretty_store(store: &Store) -> String {
    store_suffix(store).trim_start().to_string()
}

// -- formulas --------------------------------------------------------------

// precedence: 0 arrow/quantifier, 1 \/, 2 /\, 3 atom
fn formula_prec(f: &Formula) -> u8 {
    match f {
        Formula::Pi { .. } | Formula::Forall { .. } | Formula::Exists { .. } => 0,
        Formula::Or(..) => 1,
        Formula::And(..) => 2,
        _ => 3,
    }
}

fn fparen(f: &Formula, min: u8) -> String {
    if formula_prec(f) < min {
        format!("({})", pretty_formula(f))
    } else {
        pretty_formula(f)
    }
}

pub fn pretty_formula(f: &Formula) -> String {
    match f {
        Formula::Top => "top".to_string(),
        Formula::Bot => "bot".to_string(),
        Formula::Eq(t, u) => format!("{} = {}", pretty_term(t), pretty_term(u)),
        Formula::And(a, b) => format!("{} /\\ {}", fparen(a, 3), fparen(b, 3)),
        Formula::Or(a, b) => format!("{} \\/ {}", fparen(a, 2), fparen(b, 2)),
        Formula::Pi { a, dom, cod } => {
            let dep = crate::names::free_names(crate::names::Node::Formula(cod))
                .proofs
                .contains(a);
            if dep {
                format!("pi ({a} : {}). {}", pretty_formula(dom), pretty_formula(cod))
            } else {
                format!("{} -> {}", fparen(dom, 1), pretty_formula(cod))
            }
        }
        Formula::Forall { x, ty, body } => {
            format!("forall {x}^{}. {}", pretty_type(ty), pretty_formula(body))
        }
        Formula::Exists { x, ty, body } => {
            format!("exists {x}^{}. {}", pretty_type(ty), pretty_formula(body))
        }
        Formula::Nu { t, x, f, body } => format!(
            "nu({}; ({x}, {f}). {})",
            pretty_term(t),
            pretty_formula(body)
        ),
    }
}
