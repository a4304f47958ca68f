//! Bidirectional type checker: regular-mode and dependent-mode judgments with
//! dependency lists, store and closure typing, term typing, definitional
//! equivalence and positivity.
//!
//! The declarative equivalence rules are applied algorithmically: conversion
//! is invoked at cut points, axioms and elimination arguments, after the
//! dependency list has been applied (the order is configurable). Formulas are
//! compared up to term normalization, the equality simplifications
//! 0=S(t) ▷ ⊥ / S(t)=S(u) ▷ t=u, and bounded unfolding of coinductive
//! formulas.

use crate::machine;
use crate::names::{
    alpha_eq_formula, alpha_eq_proof, alpha_eq_term, free_names, fresh, Node, Subst,
};
use crate::parser::pretty::{pretty_formula, pretty_proof, pretty_term};
use crate::syntax::*;
use std::collections::HashSet;
use std::fmt;

// -- options and errors --------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TcOptions {
    /// fuel for normalizing terms embedded in formulas
    pub term_fuel: u64,
    /// fuel for evaluating NEF proofs during conversion
    pub nef_fuel: u64,
    /// how many times a coinductive formula may be unfolded per side
    pub nu_unfold: u32,
    /// apply conversion-normalization before the dependency list instead of after
    pub conv_before_sigma: bool,
    /// the equality eliminator rewrites all occurrences of the left term;
    /// turning this off requires the continuation to be typable unchanged
    pub eq_rewrite_all: bool,
}

impl Default for TcOptions {
    fn default() -> Self {
        TcOptions {
            term_fuel: 10_000,
            nef_fuel: 10_000,
            nu_unfold: 2,
            conv_before_sigma: false,
            eq_rewrite_all: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TypeError {
    pub rule: &'static str,
    pub message: String,
    pub expected: Option<Formula>,
    pub found: Option<Formula>,
    /// dependency-list snapshot at the failure point
    pub sigma: String,
}

impl TypeError {
    fn new(rule: &'static str, message: impl Into<String>) -> TypeError {
        TypeError {
            rule,
            message: message.into(),
            expected: None,
            found: None,
            sigma: String::new(),
        }
    }
    fn types(mut self, expected: &Formula, found: &Formula) -> TypeError {
        self.expected = Some(expected.clone());
        self.found = Some(found.clone());
        self
    }
    fn sigma(mut self, deps: &Deps) -> TypeError {
        self.sigma = deps.pretty();
        self
    }
}

impl fmt::Display for TypeError {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(out, "[{}] {}", self.rule, self.message)?;
        if let (Some(e), Some(f)) = (&self.expected, &self.found) {
            write!(out, " (expected {}, found {})", pretty_formula(e), pretty_formula(f))?;
        }
        if !self.sigma.is_empty() {
            write!(out, " [sigma: {}]", self.sigma)?;
        }
        Ok(())
    }
}

impl std::error::Error for TypeError {}

pub type TR<T> = Result<T, TypeError>;

// -- typing contexts -----------------------------------------------------------

#[derive(Debug, Clone)]
pub enum CtxEntry {
    Term(Name, FiniteType),
    Proof(Name, Formula),
    Covar(Name, Formula),
    /// a co-variable whose type is being inferred from its use sites;
    /// the payload indexes the checker's slot table
    CovarInfer(Name, usize),
    /// the delimiter t̂p : A^⊥⊥
    Tp(Formula),
    /// a delimiter under inference (μt̂p without an annotation)
    TpInfer(usize),
    /// the co-delimiter čtp : A
    Ctp(Formula),
}

#[derive(Debug, Clone, Default)]
pub struct Ctx(pub Vec<CtxEntry>);

impl Ctx {
    pub fn empty() -> Ctx {
        Ctx(Vec::new())
    }
    pub fn push(&self, entry: CtxEntry) -> Ctx {
        let mut out = self.0.clone();
        out.push(entry);
        Ctx(out)
    }
    pub fn lookup_term(&self, x: &str) -> Option<&FiniteType> {
        self.0.iter().rev().find_map(|e| match e {
            CtxEntry::Term(n, t) if n == x => Some(t),
            _ => None,
        })
    }
    pub fn lookup_proof(&self, a: &str) -> Option<&Formula> {
        self.0.iter().rev().find_map(|e| match e {
            CtxEntry::Proof(n, f) if n == a => Some(f),
            _ => None,
        })
    }
    pub fn lookup_covar(&self, alpha: &str) -> Option<&Formula> {
        self.0.iter().rev().find_map(|e| match e {
            CtxEntry::Covar(n, f) if n == alpha => Some(f),
            _ => None,
        })
    }
    fn covar_entry(&self, alpha: &str) -> Option<&CtxEntry> {
        self.0.iter().rev().find(|e| match e {
            CtxEntry::Covar(n, _) | CtxEntry::CovarInfer(n, _) => n == alpha,
            _ => false,
        })
    }
    fn tp_entry(&self) -> Option<&CtxEntry> {
        self.0
            .iter()
            .rev()
            .find(|e| matches!(e, CtxEntry::Tp(_) | CtxEntry::TpInfer(_)))
    }
    pub fn lookup_tp(&self) -> Option<&Formula> {
        self.0.iter().rev().find_map(|e| match e {
            CtxEntry::Tp(f) => Some(f),
            _ => None,
        })
    }
    pub fn lookup_ctp(&self) -> Option<&Formula> {
        self.0.iter().rev().find_map(|e| match e {
            CtxEntry::Ctp(f) => Some(f),
            _ => None,
        })
    }
    pub fn binds(&self, name: &str) -> bool {
        self.0.iter().any(|e| match e {
            CtxEntry::Term(n, _)
            | CtxEntry::Proof(n, _)
            | CtxEntry::Covar(n, _)
            | CtxEntry::CovarInfer(n, _) => n == name,
            _ => false,
        })
    }
}

// -- dependency lists ----------------------------------------------------------

#[derive(Debug, Clone)]
pub enum DepEntry {
    /// {p|q} — p a proof pattern (variable, pair or injection of variables)
    Proof { pattern: Proof, value: Proof },
    /// {(x,a)|q} — additionally rewrites the term variable x to wit q
    WitPair { x: Name, a: Name, value: Proof },
    /// {x|t}
    Term { x: Name, value: Term },
    /// the open marker {·|p} installed by a dependent-mode cut
    Open(Proof),
    /// the open marker {·|t} installed by a dependent-mode term cut
    OpenTerm(Term),
}

#[derive(Debug, Clone, Default)]
pub struct Deps(pub Vec<DepEntry>);

impl Deps {
    pub fn empty() -> Deps {
        Deps(Vec::new())
    }
    pub fn push(&self, entry: DepEntry) -> Deps {
        let mut out = self.0.clone();
        out.push(entry);
        Deps(out)
    }
    pub fn extend(&self, other: &Deps) -> Deps {
        let mut out = self.0.clone();
        out.extend(other.0.iter().cloned());
        Deps(out)
    }
    /// Remove the final open marker, if present.
    pub fn pop_marker(&self) -> (Deps, Option<DepEntry>) {
        match self.0.last() {
            Some(m @ (DepEntry::Open(_) | DepEntry::OpenTerm(_))) => {
                (Deps(self.0[..self.0.len() - 1].to_vec()), Some(m.clone()))
            }
            _ => (self.clone(), None),
        }
    }

    /// σ(A): fold the list right-to-left, substituting NEF values for their
    /// patterns. Open markers are inert.
    pub fn apply(&self, a: &Formula) -> Formula {
        let mut out = a.clone();
        for entry in self.0.iter().rev() {
            match entry {
                DepEntry::Proof { pattern, value } if nef_proof(value) => {
                    out = replace_proof_in_formula(&out, pattern, value);
                }
                DepEntry::WitPair { x, a: pa, value } if nef_proof(value) => {
                    let pattern = Proof::dep_pair(Term::var(x), Proof::var(pa));
                    out = replace_proof_in_formula(&out, &pattern, value);
                    out = Subst::term(x, Term::wit(value.clone())).apply_formula(&out);
                }
                DepEntry::Term { x, value } => {
                    out = Subst::term(x, value.clone()).apply_formula(&out);
                }
                _ => {}
            }
        }
        out
    }

    pub fn pretty(&self) -> String {
        let items: Vec<String> = self
            .0
            .iter()
            .map(|e| match e {
                DepEntry::Proof { pattern, value } => {
                    format!("{{{}|{}}}", pretty_proof(pattern), pretty_proof(value))
                }
                DepEntry::WitPair { x, a, value } => {
                    format!("{{({x},{a})|{}}}", pretty_proof(value))
                }
                DepEntry::Term { x, value } => format!("{{{x}|{}}}", pretty_term(value)),
                DepEntry::Open(p) => format!("{{.|{}}}", pretty_proof(p)),
                DepEntry::OpenTerm(t) => format!("{{.|{}}}", pretty_term(t)),
            })
            .collect();
        items.join("")
    }
}

// -- pattern replacement -------------------------------------------------------

/// A[q/p]: replace maximal occurrences of the proof pattern `p` in `A` by `q`.
/// Variable patterns use the capture-avoiding substitution; composite patterns
/// (pairs, injections of variables) are matched alpha-equal inside the proof
/// positions of the formula. Dependencies cannot reach under control binders,
/// so the walk stops at μ/μ̃ bodies.
pub fn replace_proof_in_formula(a: &Formula, pattern: &Proof, q: &Proof) -> Formula {
    if let Proof::Var(name) = pattern.strip() {
        return Subst::proof(name, q.clone()).apply_formula(a);
    }
    let stop: HashSet<Name> = free_names(Node::Proof(pattern)).all();
    rpf_formula(a, pattern, q, &stop)
}

fn rpf_formula(a: &Formula, pat: &Proof, q: &Proof, stop: &HashSet<Name>) -> Formula {
    match a {
        Formula::Top | Formula::Bot => a.clone(),
        Formula::Eq(t, u) => {
            Formula::eq(rpf_term(t, pat, q, stop), rpf_term(u, pat, q, stop))
        }
        Formula::And(l, r) => {
            Formula::and(rpf_formula(l, pat, q, stop), rpf_formula(r, pat, q, stop))
        }
        Formula::Or(l, r) => {
            Formula::or(rpf_formula(l, pat, q, stop), rpf_formula(r, pat, q, stop))
        }
        Formula::Pi { a: n, dom, cod } => Formula::Pi {
            a: n.clone(),
            dom: Box::new(rpf_formula(dom, pat, q, stop)),
            cod: if stop.contains(n) {
                cod.clone()
            } else {
                Box::new(rpf_formula(cod, pat, q, stop))
            },
        },
        Formula::Forall { x, ty, body } => Formula::Forall {
            x: x.clone(),
            ty: ty.clone(),
            body: if stop.contains(x) {
                body.clone()
            } else {
                Box::new(rpf_formula(body, pat, q, stop))
            },
        },
        Formula::Exists { x, ty, body } => Formula::Exists {
            x: x.clone(),
            ty: ty.clone(),
            body: if stop.contains(x) {
                body.clone()
            } else {
                Box::new(rpf_formula(body, pat, q, stop))
            },
        },
        Formula::Nu { t, x, f, body } => Formula::Nu {
            t: Box::new(rpf_term(t, pat, q, stop)),
            x: x.clone(),
            f: f.clone(),
            body: if stop.contains(x) || stop.contains(f) {
                body.clone()
            } else {
                Box::new(rpf_formula(body, pat, q, stop))
            },
        },
    }
}

fn rpf_term(t: &Term, pat: &Proof, q: &Proof, stop: &HashSet<Name>) -> Term {
    match t {
        Term::Var(_) | Term::Zero => t.clone(),
        Term::Succ(u) => Term::succ(rpf_term(u, pat, q, stop)),
        Term::App(f, a) => Term::app(rpf_term(f, pat, q, stop), rpf_term(a, pat, q, stop)),
        Term::Lam { x, ty, body } => Term::Lam {
            x: x.clone(),
            ty: ty.clone(),
            body: if stop.contains(x) {
                body.clone()
            } else {
                Box::new(rpf_term(body, pat, q, stop))
            },
        },
        Term::Rec { t, t0, x, y, ts } => Term::Rec {
            t: Box::new(rpf_term(t, pat, q, stop)),
            t0: Box::new(rpf_term(t0, pat, q, stop)),
            x: x.clone(),
            y: y.clone(),
            ts: if stop.contains(x) || stop.contains(y) {
                ts.clone()
            } else {
                Box::new(rpf_term(ts, pat, q, stop))
            },
        },
        Term::Wit(p) => Term::wit(rpf_proof(p, pat, q, stop)),
    }
}

fn rpf_proof(p: &Proof, pat: &Proof, q: &Proof, stop: &HashSet<Name>) -> Proof {
    if alpha_eq_proof(p, pat) {
        return q.clone();
    }
    match p {
        Proof::Var(_) | Proof::Refl { .. } => p.clone(),
        Proof::Inj { i, p: inner, ann } => Proof::Inj {
            i: *i,
            p: Box::new(rpf_proof(inner, pat, q, stop)),
            ann: ann.clone(),
        },
        Proof::Pair(l, r) => {
            Proof::pair(rpf_proof(l, pat, q, stop), rpf_proof(r, pat, q, stop))
        }
        Proof::DepPair { t, p: inner, ann } => Proof::DepPair {
            t: Box::new(rpf_term(t, pat, q, stop)),
            p: Box::new(rpf_proof(inner, pat, q, stop)),
            ann: ann.clone(),
        },
        Proof::LamTerm { x, ty, body } => Proof::LamTerm {
            x: x.clone(),
            ty: ty.clone(),
            body: if stop.contains(x) {
                body.clone()
            } else {
                Box::new(rpf_proof(body, pat, q, stop))
            },
        },
        Proof::LamProof { a, dom, body } => Proof::LamProof {
            a: a.clone(),
            dom: dom.clone(),
            body: if stop.contains(a) {
                body.clone()
            } else {
                Box::new(rpf_proof(body, pat, q, stop))
            },
        },
        Proof::Ascribe(inner, ann) => {
            Proof::ascribe(rpf_proof(inner, pat, q, stop), (**ann).clone())
        }
        // dependencies do not reach under control or fixpoint binders
        Proof::Mu { .. } | Proof::Shift { .. } | Proof::Ind { .. } | Proof::Cofix { .. } => {
            p.clone()
        }
        Proof::Sugar(_) => p.clone(),
    }
}

/// A[u/t]: replace occurrences of the term `t` (matched alpha-equal) by `u`.
/// Used by the equality eliminator.
pub fn replace_term_in_formula(a: &Formula, t: &Term, u: &Term) -> Formula {
    if let Term::Var(x) = t {
        return Subst::term(x, u.clone()).apply_formula(a);
    }
    let stop: HashSet<Name> = free_names(Node::Term(t)).all();
    rtf_formula(a, t, u, &stop)
}

fn rtf_formula(a: &Formula, pat: &Term, u: &Term, stop: &HashSet<Name>) -> Formula {
    match a {
        Formula::Top | Formula::Bot => a.clone(),
        Formula::Eq(l, r) => Formula::eq(rtf_term(l, pat, u, stop), rtf_term(r, pat, u, stop)),
        Formula::And(l, r) => {
            Formula::and(rtf_formula(l, pat, u, stop), rtf_formula(r, pat, u, stop))
        }
        Formula::Or(l, r) => {
            Formula::or(rtf_formula(l, pat, u, stop), rtf_formula(r, pat, u, stop))
        }
        Formula::Pi { a: n, dom, cod } => Formula::Pi {
            a: n.clone(),
            dom: Box::new(rtf_formula(dom, pat, u, stop)),
            cod: Box::new(rtf_formula(cod, pat, u, stop)),
        },
        Formula::Forall { x, ty, body } => Formula::Forall {
            x: x.clone(),
            ty: ty.clone(),
            body: if stop.contains(x) {
                body.clone()
            } else {
                Box::new(rtf_formula(body, pat, u, stop))
            },
        },
        Formula::Exists { x, ty, body } => Formula::Exists {
            x: x.clone(),
            ty: ty.clone(),
            body: if stop.contains(x) {
                body.clone()
            } else {
                Box::new(rtf_formula(body, pat, u, stop))
            },
        },
        Formula::Nu { t, x, f, body } => Formula::Nu {
            t: Box::new(rtf_term(t, pat, u, stop)),
            x: x.clone(),
            f: f.clone(),
            body: if stop.contains(x) || stop.contains(f) {
                body.clone()
            } else {
                Box::new(rtf_formula(body, pat, u, stop))
            },
        },
    }
}

fn rtf_term(t: &Term, pat: &Term, u: &Term, stop: &HashSet<Name>) -> Term {
    if alpha_eq_term(t, pat) {
        return u.clone();
    }
    match t {
        Term::Var(_) | Term::Zero => t.clone(),
        Term::Succ(inner) => Term::succ(rtf_term(inner, pat, u, stop)),
        Term::App(f, a) => Term::app(rtf_term(f, pat, u, stop), rtf_term(a, pat, u, stop)),
        Term::Lam { x, ty, body } => Term::Lam {
            x: x.clone(),
            ty: ty.clone(),
            body: if stop.contains(x) {
                body.clone()
            } else {
                Box::new(rtf_term(body, pat, u, stop))
            },
        },
        Term::Rec { t, t0, x, y, ts } => Term::Rec {
            t: Box::new(rtf_term(t, pat, u, stop)),
            t0: Box::new(rtf_term(t0, pat, u, stop)),
            x: x.clone(),
            y: y.clone(),
            ts: if stop.contains(x) || stop.contains(y) {
                ts.clone()
            } else {
                Box::new(rtf_term(ts, pat, u, stop))
            },
        },
        Term::Wit(_) => t.clone(),
    }
}

/// Replace every atom f(u)=0 (either orientation) in `a` by ν^u_{fx}body,
/// stopping under binders that shadow `f`.
fn nu_atoms(a: &Formula, x: &str, f: &str, body: &Formula) -> Formula {
    let as_nu = |l: &Term, r: &Term| -> Option<Formula> {
        let (head, zero) = match (l, r) {
            (Term::App(h, u), Term::Zero) | (Term::Zero, Term::App(h, u)) => (h, u),
            _ => return None,
        };
        match head.as_ref() {
            Term::Var(n) if n == f => Some(Formula::Nu {
                t: Box::new((**zero).clone()),
                x: x.to_string(),
                f: f.to_string(),
                body: Box::new(body.clone()),
            }),
            _ => None,
        }
    };
    match a {
        Formula::Top | Formula::Bot => a.clone(),
        Formula::Eq(l, r) => as_nu(l, r).unwrap_or_else(|| a.clone()),
        Formula::And(l, r) => {
            Formula::and(nu_atoms(l, x, f, body), nu_atoms(r, x, f, body))
        }
        Formula::Or(l, r) => Formula::or(nu_atoms(l, x, f, body), nu_atoms(r, x, f, body)),
        Formula::Pi { a: n, dom, cod } => Formula::Pi {
            a: n.clone(),
            dom: Box::new(nu_atoms(dom, x, f, body)),
            cod: Box::new(nu_atoms(cod, x, f, body)),
        },
        Formula::Forall { x: n, ty, body: b } => Formula::Forall {
            x: n.clone(),
            ty: ty.clone(),
            body: if n == f { b.clone() } else { Box::new(nu_atoms(b, x, f, body)) },
        },
        Formula::Exists { x: n, ty, body: b } => Formula::Exists {
            x: n.clone(),
            ty: ty.clone(),
            body: if n == f { b.clone() } else { Box::new(nu_atoms(b, x, f, body)) },
        },
        Formula::Nu { t, x: n, f: fn2, body: b } => Formula::Nu {
            t: t.clone(),
            x: n.clone(),
            f: fn2.clone(),
            body: if n == f || fn2 == f {
                b.clone()
            } else {
                Box::new(nu_atoms(b, x, f, body))
            },
        },
    }
}

// -- positivity ----------------------------------------------------------------

/// `f` must occur in `a` only inside atoms f(u)=0, and only positively.
pub fn positive(f: &str, a: &Formula) -> Result<bool, String> {
    positive_at(f, a, true)
}

fn occurs_in_term(f: &str, t: &Term) -> bool {
    free_names(Node::Term(t)).terms.contains(f)
}

fn positive_at(f: &str, a: &Formula, pos: bool) -> Result<bool, String> {
    match a {
        Formula::Top | Formula::Bot => Ok(true),
        Formula::Eq(l, r) => {
            let occurs = occurs_in_term(f, l) || occurs_in_term(f, r);
            if !occurs {
                return Ok(true);
            }
            let well_formed = match (l.as_ref(), r.as_ref()) {
                (Term::App(h, arg), Term::Zero) | (Term::Zero, Term::App(h, arg)) => {
                    matches!(h.as_ref(), Term::Var(n) if n == f) && !occurs_in_term(f, arg)
                }
                _ => false,
            };
            if !well_formed {
                return Err(format!(
                    "{f} occurs in an equation that is not of the shape {f}(t)=0"
                ));
            }
            Ok(pos)
        }
        Formula::And(l, r) | Formula::Or(l, r) => {
            Ok(positive_at(f, l, pos)? && positive_at(f, r, pos)?)
        }
        Formula::Pi { dom, cod, .. } => {
            Ok(positive_at(f, dom, !pos)? && positive_at(f, cod, pos)?)
        }
        Formula::Forall { x, body, .. } | Formula::Exists { x, body, .. } => {
            if x == f {
                Ok(true)
            } else {
                positive_at(f, body, pos)
            }
        }
        Formula::Nu { t, x, f: f2, body } => {
            if occurs_in_term(f, t) {
                return Err(format!("{f} occurs in a coinductive index term"));
            }
            if x == f || f2 == f {
                Ok(true)
            } else {
                positive_at(f, body, pos)
            }
        }
    }
}

// -- the checker ---------------------------------------------------------------

pub struct Checker {
    pub opts: TcOptions,
    /// inference slots for co-variables and delimiters whose types are
    /// discovered at their use sites
    slots: std::cell::RefCell<Vec<Option<Formula>>>,
}

impl Default for Checker {
    fn default() -> Self {
        Checker::new(TcOptions::default())
    }
}

impl Checker {
    pub fn new(opts: TcOptions) -> Checker {
        Checker { opts, slots: std::cell::RefCell::new(Vec::new()) }
    }

    fn new_slot(&self) -> usize {
        let mut slots = self.slots.borrow_mut();
        slots.push(None);
        slots.len() - 1
    }

    fn take_slot(&self, i: usize) -> Option<Formula> {
        self.slots.borrow()[i].clone()
    }

    /// Record a use-site type in an inference slot; later uses must agree.
    fn fill_slot(&self, i: usize, deps: &Deps, found: &Formula) -> TR<()> {
        let existing = self.slots.borrow()[i].clone();
        match existing {
            None => {
                self.slots.borrow_mut()[i] = Some(found.clone());
                Ok(())
            }
            Some(prev) => {
                if self.equiv(deps, &prev, found) {
                    Ok(())
                } else {
                    Err(TypeError::new("infer", "conflicting uses of an inferred binder")
                        .types(&prev, found)
                        .sigma(deps))
                }
            }
        }
    }

    // ---- conversion ----

    fn norm_term(&self, t: &Term) -> Term {
        self.norm_term_d(t, 0)
    }

    fn norm_term_d(&self, t: &Term, depth: u32) -> Term {
        // open terms don't evaluate, so β-reduce structurally under a depth
        // guard (a closed diverging redex is caught by the machine's fuel)
        if depth > 64 {
            return t.clone();
        }
        if let Ok((v, _)) = machine::reduce_term(t, &Store::empty(), self.opts.term_fuel) {
            return v;
        }
        match t {
            Term::Succ(u) => Term::succ(self.norm_term_d(u, depth)),
            Term::App(f, a) => {
                let f = self.norm_term_d(f, depth);
                let a = self.norm_term_d(a, depth);
                if let Term::Lam { x, body, .. } = &f {
                    let red = Subst::term(x, a).apply_term(body);
                    return self.norm_term_d(&red, depth + 1);
                }
                let applied = Term::app(f, a);
                match machine::reduce_term(&applied, &Store::empty(), self.opts.term_fuel) {
                    Ok((v, _)) => v,
                    Err(_) => applied,
                }
            }
            Term::Rec { t, t0, x, y, ts } => Term::Rec {
                t: Box::new(self.norm_term_d(t, depth)),
                t0: Box::new(self.norm_term_d(t0, depth)),
                x: x.clone(),
                y: y.clone(),
                ts: ts.clone(),
            },
            Term::Wit(p) => match self.norm_wit_head(p, depth) {
                Proof::DepPair { t, .. } => self.norm_term_d(&t, depth + 1),
                q => Term::wit(q),
            },
            _ => t.clone(),
        }
    }

    /// Head-reduce a NEF proof under wit: strip ascriptions and unfold an
    /// inductive fixpoint along its (possibly symbolic) index.
    fn norm_wit_head(&self, p: &Proof, depth: u32) -> Proof {
        if depth > 64 {
            return p.clone();
        }
        match p {
            Proof::Ascribe(q, _) => self.norm_wit_head(q, depth),
            Proof::Ind { t, p0, a, x, ps, motive } => {
                match self.norm_term_d(t, depth) {
                    Term::Zero => self.norm_wit_head(p0, depth + 1),
                    Term::Succ(u) => {
                        let prev = Proof::Ind {
                            t: u.clone(),
                            p0: p0.clone(),
                            a: a.clone(),
                            x: x.clone(),
                            ps: ps.clone(),
                            motive: motive.clone(),
                        };
                        let red = Subst::term(x, (*u).clone())
                            .apply_proof(&Subst::proof(a, prev).apply_proof(ps));
                        self.norm_wit_head(&red, depth + 1)
                    }
                    tn => Proof::Ind {
                        t: Box::new(tn),
                        p0: p0.clone(),
                        a: a.clone(),
                        x: x.clone(),
                        ps: ps.clone(),
                        motive: motive.clone(),
                    },
                }
            }
            _ => p.clone(),
        }
    }

    /// Unfold a head coinductive formula so a destructor can see its shape.
    fn whnf(&self, a: &Formula) -> Formula {
        let mut cur = a.clone();
        let mut k = self.opts.nu_unfold;
        while k > 0 {
            match &cur {
                Formula::Nu { t, x, f, body } => {
                    cur = self.norm_formula(&self.unfold_nu(t, x, f, body));
                    k -= 1;
                }
                _ => break,
            }
        }
        cur
    }

    fn simplify_eq(&self, t: Term, u: Term) -> Formula {
        match (t, u) {
            (Term::Zero, Term::Succ(_)) | (Term::Succ(_), Term::Zero) => Formula::Bot,
            (Term::Succ(a), Term::Succ(b)) => self.simplify_eq(*a, *b),
            (t, u) => Formula::eq(t, u),
        }
    }

    pub fn norm_formula(&self, a: &Formula) -> Formula {
        match a {
            Formula::Top | Formula::Bot => a.clone(),
            Formula::Eq(t, u) => self.simplify_eq(self.norm_term(t), self.norm_term(u)),
            Formula::And(l, r) => Formula::and(self.norm_formula(l), self.norm_formula(r)),
            Formula::Or(l, r) => Formula::or(self.norm_formula(l), self.norm_formula(r)),
            Formula::Pi { a, dom, cod } => Formula::Pi {
                a: a.clone(),
                dom: Box::new(self.norm_formula(dom)),
                cod: Box::new(self.norm_formula(cod)),
            },
            Formula::Forall { x, ty, body } => Formula::Forall {
                x: x.clone(),
                ty: ty.clone(),
                body: Box::new(self.norm_formula(body)),
            },
            Formula::Exists { x, ty, body } => Formula::Exists {
                x: x.clone(),
                ty: ty.clone(),
                body: Box::new(self.norm_formula(body)),
            },
            Formula::Nu { t, x, f, body } => Formula::Nu {
                t: Box::new(self.norm_term(t)),
                x: x.clone(),
                f: f.clone(),
                body: Box::new(self.norm_formula(body)),
            },
        }
    }

    /// ν^t_{fx}A ▷ A[t/x][ν^u_{fx}A / f(u)=0]
    fn unfold_nu(&self, t: &Term, x: &str, f: &str, body: &Formula) -> Formula {
        let inst = Subst::term(x, t.clone()).apply_formula(body);
        nu_atoms(&inst, x, f, body)
    }

    /// Decidable under-approximation of the equivalence ≡.
    pub fn conv(&self, a: &Formula, b: &Formula) -> bool {
        let k = self.opts.nu_unfold;
        self.conv_k(&self.norm_formula(a), &self.norm_formula(b), k, k)
    }

    fn conv_k(&self, a: &Formula, b: &Formula, ka: u32, kb: u32) -> bool {
        if alpha_eq_formula(a, b) {
            return true;
        }
        match (a, b) {
            (Formula::Eq(t1, u1), Formula::Eq(t2, u2)) => {
                alpha_eq_term(t1, t2) && alpha_eq_term(u1, u2)
            }
            (Formula::And(l1, r1), Formula::And(l2, r2))
            | (Formula::Or(l1, r1), Formula::Or(l2, r2)) => {
                self.conv_k(l1, l2, ka, kb) && self.conv_k(r1, r2, ka, kb)
            }
            (
                Formula::Pi { a: n1, dom: d1, cod: c1 },
                Formula::Pi { a: n2, dom: d2, cod: c2 },
            ) => {
                if !self.conv_k(d1, d2, ka, kb) {
                    return false;
                }
                let mut avoid = free_names(Node::Formula(c1)).all();
                avoid.extend(free_names(Node::Formula(c2)).all());
                let z = fresh(n1, &avoid);
                let c1 = Subst::proof(n1, Proof::var(&z)).apply_formula(c1);
                let c2 = Subst::proof(n2, Proof::var(&z)).apply_formula(c2);
                self.conv_k(&c1, &c2, ka, kb)
            }
            (
                Formula::Forall { x: x1, ty: t1, body: b1 },
                Formula::Forall { x: x2, ty: t2, body: b2 },
            )
            | (
                Formula::Exists { x: x1, ty: t1, body: b1 },
                Formula::Exists { x: x2, ty: t2, body: b2 },
            ) if std::mem::discriminant(a) == std::mem::discriminant(b) => {
                if t1 != t2 {
                    return false;
                }
                let mut avoid = free_names(Node::Formula(b1)).all();
                avoid.extend(free_names(Node::Formula(b2)).all());
                let z = fresh(x1, &avoid);
                let b1 = Subst::term(x1, Term::var(&z)).apply_formula(b1);
                let b2 = Subst::term(x2, Term::var(&z)).apply_formula(b2);
                self.conv_k(&b1, &b2, ka, kb)
            }
            (Formula::Nu { t, x, f, body }, _) if ka > 0 => {
                let unfolded = self.norm_formula(&self.unfold_nu(t, x, f, body));
                self.conv_k(&unfolded, b, ka - 1, kb)
            }
            (_, Formula::Nu { t, x, f, body }) if kb > 0 => {
                let unfolded = self.norm_formula(&self.unfold_nu(t, x, f, body));
                self.conv_k(a, &unfolded, ka, kb - 1)
            }
            _ => false,
        }
    }

    /// σ(A) = σ(B) up to conversion; the order of σ-application and
    /// normalization is configurable.
    pub fn equiv(&self, deps: &Deps, a: &Formula, b: &Formula) -> bool {
        if self.opts.conv_before_sigma {
            self.conv(&deps.apply(&self.norm_formula(a)), &deps.apply(&self.norm_formula(b)))
        } else {
            self.conv(&deps.apply(a), &deps.apply(b))
        }
    }

    // ---- terms ----

    pub fn infer_term(&self, g: &Ctx, deps: &Deps, t: &Term) -> TR<FiniteType> {
        match t {
            Term::Var(x) => g.lookup_term(x).cloned().ok_or_else(|| {
                TypeError::new("Ax_t", format!("unbound term variable {x}")).sigma(deps)
            }),
            Term::Zero => Ok(FiniteType::Nat),
            Term::Succ(u) => {
                self.check_term(g, deps, u, &FiniteType::Nat)?;
                Ok(FiniteType::Nat)
            }
            Term::Rec { t, t0, x, y, ts } => {
                self.check_term(g, deps, t, &FiniteType::Nat)?;
                let u = self.infer_term(g, deps, t0)?;
                let g2 = g
                    .push(CtxEntry::Term(x.clone(), FiniteType::Nat))
                    .push(CtxEntry::Term(y.clone(), u.clone()));
                self.check_term(&g2, deps, ts, &u)?;
                Ok(u)
            }
            Term::Lam { x, ty, body } => {
                let dom = ty.clone().ok_or_else(|| {
                    TypeError::new("lambda", "cannot infer an unannotated term function")
                        .sigma(deps)
                })?;
                let g2 = g.push(CtxEntry::Term(x.clone(), dom.clone()));
                let cod = self.infer_term(&g2, deps, body)?;
                Ok(FiniteType::arrow(dom, cod))
            }
            Term::App(f, u) => {
                // a β-redex with an unannotated function infers through the
                // argument
                if let Term::Lam { x, ty: None, body } = f.as_ref() {
                    let dom = self.infer_term(g, deps, u)?;
                    let g2 = g.push(CtxEntry::Term(x.clone(), dom));
                    return self.infer_term(&g2, deps, body);
                }
                match self.infer_term(g, deps, f)? {
                FiniteType::Arrow(dom, cod) => {
                    self.check_term(g, deps, u, &dom)?;
                    Ok(*cod)
                }
                FiniteType::Nat => Err(TypeError::new(
                    "app",
                    format!("applying {} of type N", pretty_term(f)),
                )
                .sigma(deps)),
            }
            }
            Term::Wit(p) => {
                if !nef_proof(p) {
                    return Err(TypeError::new(
                        "wit",
                        format!("wit requires a NEF proof, got {}", pretty_proof(p)),
                    )
                    .sigma(deps));
                }
                let a = self.infer_proof(g, deps, p)?;
                match self.whnf(&self.norm_formula(&deps.apply(&a))) {
                    Formula::Exists { ty, .. } => Ok(ty),
                    other => Err(TypeError::new(
                        "wit",
                        "wit requires an existential proof",
                    )
                    .types(&Formula::exists("x", FiniteType::Nat, Formula::Top), &other)
                    .sigma(deps)),
                }
            }
        }
    }

    pub fn check_term(&self, g: &Ctx, deps: &Deps, t: &Term, ty: &FiniteType) -> TR<()> {
        if let (Term::Lam { x, ty: ann, body }, FiniteType::Arrow(dom, cod)) = (t, ty) {
            if let Some(ann) = ann {
                if ann != dom.as_ref() {
                    return Err(TypeError::new("lambda", "term function domain mismatch")
                        .sigma(deps));
                }
            }
            let g2 = g.push(CtxEntry::Term(x.clone(), (**dom).clone()));
            return self.check_term(&g2, deps, body, cod);
        }
        let found = self.infer_term(g, deps, t)?;
        if &found == ty {
            Ok(())
        } else {
            Err(TypeError::new(
                "term",
                format!("term {} has the wrong finite type", pretty_term(t)),
            )
            .sigma(deps))
        }
    }

    // ---- proofs ----

    pub fn infer_proof(&self, g: &Ctx, deps: &Deps, p: &Proof) -> TR<Formula> {
        match p {
            Proof::Var(a) => g.lookup_proof(a).cloned().ok_or_else(|| {
                TypeError::new("Ax_r", format!("unbound proof variable {a}")).sigma(deps)
            }),
            Proof::Ascribe(inner, ann) => {
                self.check_proof(g, deps, inner, ann)?;
                Ok((**ann).clone())
            }
            Proof::Refl { ann: Some(ann) } => {
                self.check_proof(g, deps, p, ann)?;
                Ok((**ann).clone())
            }
            Proof::Pair(p1, p2) => Ok(Formula::and(
                self.infer_proof(g, deps, p1)?,
                self.infer_proof(g, deps, p2)?,
            )),
            Proof::Inj { ann: Some(ann), .. } => {
                self.check_proof(g, deps, p, ann)?;
                Ok((**ann).clone())
            }
            Proof::DepPair { t, p: q, ann } => {
                if let Some(ann) = ann {
                    self.check_proof(g, deps, p, ann)?;
                    return Ok((**ann).clone());
                }
                // most-dependent reading: generalize the witness
                let ty = self.infer_term(g, deps, t)?;
                let body = self.infer_proof(g, deps, q)?;
                let mut avoid = free_names(Node::Formula(&body)).all();
                avoid.extend(free_names(Node::Term(t)).all());
                let x = fresh("x", &avoid);
                let body = replace_term_in_formula(&body, t, &Term::var(&x));
                Ok(Formula::exists(&x, ty, body))
            }
            Proof::LamTerm { x, ty, body } => {
                let ty = ty.clone().ok_or_else(|| {
                    TypeError::new(
                        "forall_r",
                        "cannot infer an unannotated term abstraction; ascribe it",
                    )
                    .sigma(deps)
                })?;
                let g2 = g.push(CtxEntry::Term(x.clone(), ty.clone()));
                let a = self.infer_proof(&g2, deps, body)?;
                Ok(Formula::Forall { x: x.clone(), ty, body: Box::new(a) })
            }
            Proof::LamProof { a, dom, body } => {
                let dom = dom.clone().ok_or_else(|| {
                    TypeError::new(
                        "imp_r",
                        "cannot infer an unannotated proof abstraction; ascribe it",
                    )
                    .sigma(deps)
                })?;
                let g2 = g.push(CtxEntry::Proof(a.clone(), (*dom).clone()));
                let b = self.infer_proof(&g2, deps, body)?;
                Ok(Formula::Pi { a: a.clone(), dom, cod: Box::new(b) })
            }
            Proof::Mu { ann: Some(ann), .. } | Proof::Shift { ann: Some(ann), .. } => {
                self.check_proof(g, deps, p, ann)?;
                Ok((**ann).clone())
            }
            Proof::Ind { t, motive: Some((mx, m)), .. } => {
                self.check_ind(g, deps, p)?;
                Ok(Subst::term(mx, (**t).clone()).apply_formula(m))
            }
            Proof::Cofix { t, x, ann: Some(ann), .. } => {
                self.check_cofix_annotated(g, deps, p)?;
                Ok(Formula::Nu {
                    t: t.clone(),
                    x: x.clone(),
                    f: ann.f.clone(),
                    body: Box::new(ann.body.clone()),
                })
            }
            Proof::Mu { alpha, ann: None, body } => {
                // infer the co-variable's type from its use sites
                let slot = self.new_slot();
                let g2 = g.push(CtxEntry::CovarInfer(alpha.clone(), slot));
                self.check_command(&g2, deps, body)?;
                self.take_slot(slot).ok_or_else(|| {
                    TypeError::new(
                        "mu",
                        format!("μ{alpha} never uses its co-variable; ascribe it"),
                    )
                    .sigma(deps)
                })
            }
            Proof::Shift { ann: None, body } => {
                let slot = self.new_slot();
                let g2 = g.push(CtxEntry::TpInfer(slot));
                self.check_command_dep(&g2, deps.clone(), body)?;
                self.take_slot(slot).ok_or_else(|| {
                    TypeError::new("mu-tp", "μt̂p never reaches its delimiter; ascribe it")
                        .sigma(deps)
                })
            }
            Proof::Refl { ann: None }
            | Proof::Inj { ann: None, .. }
            | Proof::Ind { motive: None, .. }
            | Proof::Cofix { ann: None, .. } => Err(TypeError::new(
                "infer",
                format!(
                    "cannot infer a type for {}; add an ascription",
                    pretty_proof(p)
                ),
            )
            .sigma(deps)),
            Proof::Sugar(_) => Err(TypeError::new(
                "infer",
                "macro sugar reached the checker; expand it first",
            )
            .sigma(deps)),
        }
    }

    pub fn check_proof(&self, g: &Ctx, deps: &Deps, p: &Proof, goal: &Formula) -> TR<()> {
        let goal_n = self.norm_formula(&deps.apply(goal));
        // introduction forms may have to look through a coinductive head;
        // cofix itself must see the ν un-unfolded
        let goal_w = self.whnf(&goal_n);
        match p {
            Proof::Ascribe(inner, ann) => {
                if !self.equiv(deps, ann, goal) {
                    return Err(TypeError::new("ascription", "ascription does not match goal")
                        .types(goal, ann)
                        .sigma(deps));
                }
                self.check_proof(g, deps, inner, ann)
            }
            Proof::Refl { .. } => match &goal_w {
                Formula::Eq(t, u) => {
                    if !alpha_eq_term(t, u) {
                        return Err(TypeError::new("refl", "refl requires both sides equal")
                            .types(goal, &goal_n)
                            .sigma(deps));
                    }
                    self.check_term(g, deps, t, &FiniteType::Nat)
                }
                _ => Err(TypeError::new("refl", "refl proves an equality")
                    .types(goal, &goal_n)
                    .sigma(deps)),
            },
            Proof::Pair(p1, p2) => match &goal_w {
                Formula::And(a, b) => {
                    self.check_proof(g, deps, p1, a)?;
                    self.check_proof(g, deps, p2, b)
                }
                _ => self.check_by_infer(g, deps, p, goal),
            },
            Proof::Inj { i, p: q, .. } => match &goal_w {
                Formula::Or(a1, a2) => {
                    self.check_proof(g, deps, q, if *i == 1 { a1 } else { a2 })
                }
                _ => Err(TypeError::new("or_r", "injection proves a disjunction")
                    .types(goal, &goal_n)
                    .sigma(deps)),
            },
            Proof::DepPair { t, p: q, .. } => match &goal_w {
                Formula::Exists { x, ty, body } => {
                    self.check_term(g, deps, t, ty)?;
                    let inst = Subst::term(x, (**t).clone()).apply_formula(body);
                    self.check_proof(g, deps, q, &inst)
                }
                _ => Err(TypeError::new("exists_r", "dependent pair proves an existential")
                    .types(goal, &goal_n)
                    .sigma(deps)),
            },
            Proof::LamTerm { x, ty, body } => match &goal_w {
                Formula::Forall { x: gx, ty: gty, body: gbody } => {
                    if let Some(ty) = ty {
                        if ty != gty {
                            return Err(TypeError::new(
                                "forall_r",
                                "term abstraction domain mismatch",
                            )
                            .sigma(deps));
                        }
                    }
                    let mut avoid = free_names(Node::Formula(gbody)).all();
                    avoid.extend(free_names(Node::Proof(body)).all());
                    let z = fresh(x, &avoid);
                    let body2 = Subst::term(x, Term::var(&z)).apply_proof(body);
                    let gbody2 = Subst::term(gx, Term::var(&z)).apply_formula(gbody);
                    let g2 = g.push(CtxEntry::Term(z, gty.clone()));
                    self.check_proof(&g2, deps, &body2, &gbody2)
                }
                _ => Err(TypeError::new("forall_r", "term abstraction proves a ∀")
                    .types(goal, &goal_n)
                    .sigma(deps)),
            },
            Proof::LamProof { a, dom, body } => match &goal_w {
                Formula::Pi { a: ga, dom: gdom, cod } => {
                    if let Some(dom) = dom {
                        if !self.equiv(deps, dom, gdom) {
                            return Err(TypeError::new(
                                "imp_r",
                                "proof abstraction domain mismatch",
                            )
                            .types(gdom, dom)
                            .sigma(deps));
                        }
                    }
                    let mut avoid = free_names(Node::Formula(cod)).all();
                    avoid.extend(free_names(Node::Proof(body)).all());
                    let z = fresh(a, &avoid);
                    let body2 = Subst::proof(a, Proof::var(&z)).apply_proof(body);
                    let cod2 = Subst::proof(ga, Proof::var(&z)).apply_formula(cod);
                    let g2 = g.push(CtxEntry::Proof(z, (**gdom).clone()));
                    self.check_proof(&g2, deps, &body2, &cod2)
                }
                _ => Err(TypeError::new("imp_r", "proof abstraction proves a Π")
                    .types(goal, &goal_n)
                    .sigma(deps)),
            },
            Proof::Mu { alpha, ann, body } => {
                if let Some(ann) = ann {
                    if !self.equiv(deps, ann, goal) {
                        return Err(TypeError::new("mu", "μ annotation does not match goal")
                            .types(goal, ann)
                            .sigma(deps));
                    }
                }
                let g2 = g.push(CtxEntry::Covar(alpha.clone(), goal.clone()));
                self.check_command(&g2, deps, body)
            }
            Proof::Shift { ann, body } => {
                if let Some(ann) = ann {
                    if !self.equiv(deps, ann, goal) {
                        return Err(TypeError::new("mu-tp", "μt̂p annotation does not match goal")
                            .types(goal, ann)
                            .sigma(deps));
                    }
                }
                let g2 = g.push(CtxEntry::Tp(goal.clone()));
                self.check_command_dep(&g2, deps.clone(), body)
            }
            Proof::Ind { motive: Some(_), t, .. } => {
                self.check_ind(g, deps, p)?;
                let inferred = match p {
                    Proof::Ind { motive: Some((mx, m)), .. } => {
                        Subst::term(mx, (**t).clone()).apply_formula(m)
                    }
                    _ => unreachable!(),
                };
                if self.equiv(deps, &inferred, goal) {
                    Ok(())
                } else {
                    Err(TypeError::new("fix", "inductive motive does not match goal")
                        .types(goal, &inferred)
                        .sigma(deps))
                }
            }
            Proof::Ind { t, p0, a, x, ps, motive: None } => {
                // no motive: treat the goal as non-dependent
                self.check_term(g, deps, t, &FiniteType::Nat)?;
                self.check_proof(g, deps, p0, goal)?;
                let g2 = g
                    .push(CtxEntry::Term(x.clone(), FiniteType::Nat))
                    .push(CtxEntry::Proof(a.clone(), goal.clone()));
                self.check_proof(&g2, deps, ps, goal)
            }
            Proof::Cofix { ann: Some(_), .. } => {
                let inferred = self.infer_proof(g, deps, p)?;
                if self.equiv(deps, &inferred, goal) {
                    Ok(())
                } else {
                    Err(TypeError::new("cofix", "coinductive invariant does not match goal")
                        .types(goal, &inferred)
                        .sigma(deps))
                }
            }
            Proof::Cofix { t, b, x, body, ann: None } => match &goal_n {
                Formula::Nu { t: gt, x: gx, f: gf, body: gbody } => {
                    let tn = self.norm_term(&deps.apply_term_entries(t));
                    if !alpha_eq_term(&tn, gt) {
                        return Err(TypeError::new("cofix", "coinductive index mismatch")
                            .types(goal, &goal_n)
                            .sigma(deps));
                    }
                    let ty = self.infer_term(g, deps, t)?;
                    self.check_cofix_premise(g, deps, &ty, b, x, body, gx, gf, gbody)
                }
                _ => Err(TypeError::new("cofix", "cofix proves a coinductive formula")
                    .types(goal, &goal_n)
                    .sigma(deps)),
            },
            _ => self.check_by_infer(g, deps, p, goal),
        }
    }

    fn check_by_infer(&self, g: &Ctx, deps: &Deps, p: &Proof, goal: &Formula) -> TR<()> {
        let found = self.infer_proof(g, deps, p)?;
        if self.equiv(deps, &found, goal) {
            Ok(())
        } else {
            Err(TypeError::new("equiv", format!("{} has the wrong type", pretty_proof(p)))
                .types(goal, &found)
                .sigma(deps))
        }
    }

    fn check_ind(&self, g: &Ctx, deps: &Deps, p: &Proof) -> TR<()> {
        let Proof::Ind { t, p0, a, x, ps, motive: Some((mx, m)) } = p else {
            unreachable!("check_ind requires a motive")
        };
        self.check_term(g, deps, t, &FiniteType::Nat)?;
        let zero = Subst::term(mx, Term::Zero).apply_formula(m);
        self.check_proof(g, deps, p0, &zero)?;
        let at_x = Subst::term(mx, Term::var(x)).apply_formula(m);
        let at_sx = Subst::term(mx, Term::succ(Term::var(x))).apply_formula(m);
        let g2 = g
            .push(CtxEntry::Term(x.clone(), FiniteType::Nat))
            .push(CtxEntry::Proof(a.clone(), at_x));
        self.check_proof(&g2, deps, ps, &at_sx)
    }

    fn check_cofix_annotated(&self, g: &Ctx, deps: &Deps, p: &Proof) -> TR<()> {
        let Proof::Cofix { t, b, x, body, ann: Some(ann) } = p else {
            unreachable!("requires an annotation")
        };
        self.check_term(g, deps, t, &ann.t_ty)?;
        self.check_cofix_premise(g, deps, &ann.t_ty, b, x, body, x, &ann.f, &ann.body)
    }

    #[allow(clippy::too_many_arguments)]
    fn check_cofix_premise(
        &self,
        g: &Ctx,
        deps: &Deps,
        ty: &FiniteType,
        b: &str,
        x: &str,
        body: &Proof,
        gx: &str,
        gf: &str,
        gbody: &Formula,
    ) -> TR<()> {
        // align the goal's binders with the node's, freshening the invariant
        let mut avoid = free_names(Node::Formula(gbody)).all();
        avoid.extend(free_names(Node::Proof(body)).all());
        avoid.insert(x.to_string());
        let f = fresh(gf, &avoid);
        let mut a = Subst::term(gf, Term::var(&f)).apply_formula(gbody);
        if gx != x {
            a = Subst::term(gx, Term::var(x)).apply_formula(&a);
        }
        match positive(&f, &a) {
            Ok(true) => {}
            Ok(false) => {
                return Err(TypeError::new(
                    "cofix",
                    format!("{f} occurs negatively in the coinductive invariant"),
                )
                .sigma(deps))
            }
            Err(msg) => return Err(TypeError::new("cofix", msg).sigma(deps)),
        }
        let mut avoid2 = avoid;
        avoid2.insert(f.clone());
        let y = fresh("y", &avoid2);
        let b_ty = Formula::forall(
            &y,
            ty.clone(),
            Formula::eq(Term::app(Term::var(&f), Term::var(&y)), Term::Zero),
        );
        let g2 = g
            .push(CtxEntry::Term(f.clone(), FiniteType::arrow(ty.clone(), FiniteType::Nat)))
            .push(CtxEntry::Term(x.to_string(), ty.clone()))
            .push(CtxEntry::Proof(b.to_string(), b_ty));
        self.check_proof(&g2, deps, body, &a)
    }

    // ---- contexts ----

    pub fn infer_context(&self, g: &Ctx, deps: &Deps, e: &Context) -> TR<Formula> {
        match e {
            Context::Covar(alpha) => {
                if alpha == TP {
                    return Err(TypeError::new(
                        "tp",
                        "the delimiter t̂p only types in dependent mode",
                    )
                    .sigma(deps));
                }
                match g.covar_entry(alpha) {
                    Some(CtxEntry::Covar(_, b)) => Ok(b.clone()),
                    // an earlier use may already have pinned the type down
                    Some(CtxEntry::CovarInfer(_, slot)) => {
                        self.take_slot(*slot).ok_or_else(|| {
                            TypeError::new(
                                "Ax_l",
                                format!("the type of co-variable {alpha} is not known yet"),
                            )
                            .sigma(deps)
                        })
                    }
                    _ => Err(TypeError::new("Ax_l", format!("unbound co-variable {alpha}"))
                        .sigma(deps)),
                }
            }
            Context::MuTilde { ann: Some(ann), .. } => {
                self.check_context(g, deps, e, ann)?;
                Ok((**ann).clone())
            }
            Context::CoShift { ann: Some(ann), .. } => {
                self.check_context(g, deps, e, ann)?;
                Ok((**ann).clone())
            }
            Context::Forcing(Forcing::Abort) => Ok(Formula::Bot),
            Context::Forcing(f) => {
                let ann = match f {
                    Forcing::Case { ann, .. }
                    | Forcing::SplitPair { ann, .. }
                    | Forcing::SplitDep { ann, .. }
                    | Forcing::TermStack { ann, .. }
                    | Forcing::ProofStack { ann, .. }
                    | Forcing::EqSplit { ann, .. } => ann.clone(),
                    Forcing::Abort => unreachable!(),
                };
                match ann {
                    Some(a) => {
                        self.check_context(g, deps, e, &a)?;
                        Ok(*a)
                    }
                    None => Err(TypeError::new(
                        "infer",
                        "cannot infer a type for this context; annotate or infer the proof side",
                    )
                    .sigma(deps)),
                }
            }
            Context::MuTilde { ann: None, .. } | Context::CoShift { ann: None, .. } => {
                Err(TypeError::new(
                    "infer",
                    "cannot infer a type for an unannotated binder context",
                )
                .sigma(deps))
            }
        }
    }

    /// e : A^⊥⊥
    pub fn check_context(&self, g: &Ctx, deps: &Deps, e: &Context, goal: &Formula) -> TR<()> {
        let goal_n = self.norm_formula(&deps.apply(goal));
        match e {
            Context::Covar(alpha) => {
                if alpha == TP {
                    return Err(TypeError::new(
                        "tp",
                        "the delimiter t̂p only types in dependent mode",
                    )
                    .sigma(deps));
                }
                match g.covar_entry(alpha) {
                    Some(CtxEntry::Covar(_, b)) => {
                        if self.equiv(deps, goal, b) {
                            Ok(())
                        } else {
                            Err(TypeError::new(
                                "Ax_l",
                                format!("co-variable {alpha} type mismatch"),
                            )
                            .types(goal, b)
                            .sigma(deps))
                        }
                    }
                    Some(CtxEntry::CovarInfer(_, slot)) => {
                        self.fill_slot(*slot, deps, &deps.apply(goal))
                    }
                    _ => Err(TypeError::new("Ax_l", format!("unbound co-variable {alpha}"))
                        .sigma(deps)),
                }
            }
            Context::MuTilde { a, ann, body, store } => {
                if let Some(ann) = ann {
                    if !self.equiv(deps, ann, goal) {
                        return Err(TypeError::new("mu-tilde", "μ̃ annotation mismatch")
                            .types(goal, ann)
                            .sigma(deps));
                    }
                }
                let g2 = g.push(CtxEntry::Proof(a.clone(), goal.clone()));
                let (g_ext, deps2) = self.check_store(&g2, deps, store)?;
                let mut g3 = g2;
                g3.0.extend(g_ext.0);
                self.check_command(&g3, &deps.extend(&deps2), body)
            }
            Context::CoShift { ann, body } => {
                if let Some(ann) = ann {
                    if !self.equiv(deps, ann, goal) {
                        return Err(TypeError::new("mu-ctp", "μ̃čtp annotation mismatch")
                            .types(goal, ann)
                            .sigma(deps));
                    }
                }
                let g2 = g.push(CtxEntry::Ctp(goal.clone()));
                self.check_command_dep(&g2, deps.clone(), body)
            }
            Context::Forcing(f) => self.check_forcing(g, deps, f, goal, &self.whnf(&goal_n)),
        }
    }

    fn check_forcing(
        &self,
        g: &Ctx,
        deps: &Deps,
        f: &Forcing,
        goal: &Formula,
        goal_n: &Formula,
    ) -> TR<()> {
        match (f, goal_n) {
            (Forcing::Abort, Formula::Bot) => Ok(()),
            (Forcing::Abort, _) => Err(TypeError::new("bot", "[] refutes ⊥")
                .types(&Formula::Bot, goal)
                .sigma(deps)),
            (Forcing::Case { a1, c1, a2, c2, .. }, Formula::Or(f1, f2)) => {
                let g1 = g.push(CtxEntry::Proof(a1.clone(), (**f1).clone()));
                self.check_command(&g1, deps, c1)?;
                let g2 = g.push(CtxEntry::Proof(a2.clone(), (**f2).clone()));
                self.check_command(&g2, deps, c2)
            }
            (Forcing::SplitPair { a1, a2, body, .. }, Formula::And(f1, f2)) => {
                let g2 = g
                    .push(CtxEntry::Proof(a1.clone(), (**f1).clone()))
                    .push(CtxEntry::Proof(a2.clone(), (**f2).clone()));
                self.check_command(&g2, deps, body)
            }
            (Forcing::SplitDep { x, a, body, .. }, Formula::Exists { x: gx, ty, body: fb }) => {
                let inst = if gx == x {
                    (**fb).clone()
                } else {
                    Subst::term(gx, Term::var(x)).apply_formula(fb)
                };
                let g2 = g
                    .push(CtxEntry::Term(x.clone(), ty.clone()))
                    .push(CtxEntry::Proof(a.clone(), inst));
                self.check_command(&g2, deps, body)
            }
            (Forcing::EqSplit { body, .. }, Formula::Eq(t, u)) => {
                // infer the proof side of the inner cut, rewrite t to u on
                // the context side
                let Command::Proof { p, e } = body.as_ref() else {
                    return Err(TypeError::new(
                        "eq_l",
                        "the equality eliminator expects a proof command",
                    )
                    .sigma(deps));
                };
                match self.infer_proof(g, deps, p) {
                    Ok(a) => {
                        let rewritten = if self.opts.eq_rewrite_all {
                            replace_term_in_formula(&a, t, u)
                        } else {
                            a.clone()
                        };
                        self.check_context(g, deps, e, &rewritten)
                    }
                    // the proof side may need its type from the context:
                    // undo the rewrite on the inferred refutation
                    Err(perr) => match self.infer_context(g, deps, e) {
                        Ok(b) => {
                            let a = if self.opts.eq_rewrite_all {
                                replace_term_in_formula(&b, u, t)
                            } else {
                                b.clone()
                            };
                            self.check_proof(g, deps, p, &a)
                        }
                        Err(_) => Err(perr),
                    },
                }
            }
            (Forcing::TermStack { t, e, .. }, Formula::Forall { x, ty, body }) => {
                self.check_term(g, deps, t, ty)?;
                let inst = Subst::term(x, (**t).clone()).apply_formula(body);
                self.check_context(g, deps, e, &inst)
            }
            (Forcing::ProofStack { q, e, .. }, Formula::Pi { a, dom, cod }) => {
                self.check_proof(g, deps, q, dom)?;
                if !nef_proof(q) && free_names(Node::Formula(cod)).proofs.contains(a) {
                    return Err(TypeError::new(
                        "imp_l",
                        format!(
                            "dependent stack requires a NEF argument ({} binds {a})",
                            pretty_formula(goal)
                        ),
                    )
                    .sigma(deps));
                }
                let inst = Subst::proof(a, (**q).clone()).apply_formula(cod);
                self.check_context(g, deps, e, &inst)
            }
            _ => Err(TypeError::new(
                "context",
                "forcing context does not match the formula it refutes",
            )
            .types(goal, goal_n)
            .sigma(deps)),
        }
    }

    // ---- co-terms ----

    pub fn check_coterm(&self, g: &Ctx, deps: &Deps, pi: &Coterm, ty: &FiniteType) -> TR<()> {
        match pi {
            Coterm::MuTildeTerm { x, ty: ann, body } => {
                if let Some(ann) = ann {
                    if ann != ty {
                        return Err(TypeError::new("mu-tilde-x", "co-term annotation mismatch")
                            .sigma(deps));
                    }
                }
                let g2 = g.push(CtxEntry::Term(x.clone(), ty.clone()));
                self.check_command(&g2, deps, body)
            }
            Coterm::Stack { u, pi } => match ty {
                FiniteType::Arrow(dom, cod) => {
                    self.check_term(g, deps, u, dom)?;
                    self.check_coterm(g, deps, pi, cod)
                }
                FiniteType::Nat => {
                    Err(TypeError::new("imp_l", "term stack refutes an arrow type").sigma(deps))
                }
            },
        }
    }

    // ---- commands and closures ----

    pub fn check_command(&self, g: &Ctx, deps: &Deps, c: &Command) -> TR<()> {
        match c {
            Command::Proof { p, e } => {
                if matches!(p.strip(), Proof::Var(a) if a == CTP) {
                    return Err(TypeError::new(
                        "ctp",
                        "the co-delimiter čtp only types in dependent mode",
                    )
                    .sigma(deps));
                }
                match self.infer_proof(g, deps, p) {
                    Ok(a) => self.check_context(g, deps, e, &a),
                    Err(perr) => match self.infer_context(g, deps, e) {
                        Ok(b) => self.check_proof(g, deps, p, &b),
                        Err(_) => Err(perr),
                    },
                }
            }
            Command::Term { t, pi } => {
                let ty = self.infer_term(g, deps, t)?;
                self.check_coterm(g, deps, pi, &ty)
            }
        }
    }

    /// Dependent mode: Γ must hold a t̂p (or čtp) entry; σ threads the open
    /// marker installed by each cut.
    pub fn check_command_dep(&self, g: &Ctx, deps: Deps, c: &Command) -> TR<()> {
        match c {
            Command::Proof { p, e } => {
                // ⟨čtp‖e⟩: close the co-delimited continuation
                if matches!(p.strip(), Proof::Var(k) if k == CTP) {
                    let b = g.lookup_ctp().cloned().ok_or_else(|| {
                        TypeError::new("ctp", "čtp used without a co-delimiter in scope")
                            .sigma(&deps)
                    })?;
                    return match self.infer_context(g, &deps, e) {
                        Ok(a) => {
                            if self.equiv(&deps, &a, &b) {
                                Ok(())
                            } else {
                                Err(TypeError::new("ctp", "čtp type mismatch")
                                    .types(&b, &a)
                                    .sigma(&deps))
                            }
                        }
                        Err(_) => self.check_context(g, &deps, e, &b),
                    };
                }
                // ⟨p‖t̂p⟩: the axiom discharging the delimiter
                if matches!(e.as_ref(), Context::Covar(k) if k == TP) {
                    let entry = g.tp_entry().cloned().ok_or_else(|| {
                        TypeError::new("tp", "t̂p used without a delimiter in scope").sigma(&deps)
                    })?;
                    let deps2 = deps.push(DepEntry::Open(p.as_ref().clone()));
                    return match entry {
                        CtxEntry::Tp(b) => match self.infer_proof(g, &deps, p) {
                            Ok(a) => {
                                if self.equiv(&deps2, &a, &b) {
                                    Ok(())
                                } else {
                                    Err(TypeError::new("tp", "delimiter type mismatch")
                                        .types(&b, &a)
                                        .sigma(&deps2))
                                }
                            }
                            // the proof may need its type from the delimiter
                            // (e.g. an unannotated pair of abstractions)
                            Err(_) => self.check_proof(g, &deps2, p, &b),
                        },
                        // an inferred delimiter records σ'(A), with the open
                        // marker resolved against the pattern entries
                        CtxEntry::TpInfer(slot) => {
                            let a = self.infer_proof(g, &deps, p)?;
                            self.fill_slot(slot, &deps2, &deps2.apply(&a))
                        }
                        _ => unreachable!(),
                    };
                }
                // Cut^d: the grammar requires a NEF proof away from the axiom
                if !nef_proof(p) {
                    return Err(TypeError::new(
                        "cut_d",
                        format!(
                            "dependent-mode cut requires a NEF proof, got {}",
                            pretty_proof(p)
                        ),
                    )
                    .sigma(&deps));
                }
                let a = self.infer_proof(g, &deps, p)?;
                let deps2 = deps.push(DepEntry::Open(p.as_ref().clone()));
                self.check_context_dep(g, deps2, e, &a)
            }
            Command::Term { t, pi } => {
                let ty = self.infer_term(g, &deps, t)?;
                let deps2 = deps.push(DepEntry::OpenTerm((**t).clone()));
                self.check_coterm_dep(g, deps2, pi, &ty)
            }
        }
    }

    fn check_context_dep(&self, g: &Ctx, deps: Deps, e: &Context, goal: &Formula) -> TR<()> {
        let (popped, marker) = deps.pop_marker();
        let marker_proof = match marker {
            Some(DepEntry::Open(p)) => p,
            _ => {
                return Err(TypeError::new(
                    "dep",
                    "dependent-mode context without an open dependency marker",
                )
                .sigma(&deps))
            }
        };
        let goal_n = self.whnf(&self.norm_formula(&deps.apply(goal)));
        match e {
            Context::MuTilde { a, ann, body, store } => {
                if let Some(ann) = ann {
                    if !self.equiv(&deps, ann, goal) {
                        return Err(TypeError::new("mu-tilde_d", "μ̃ annotation mismatch")
                            .types(goal, ann)
                            .sigma(&deps));
                    }
                }
                let deps2 = popped.push(DepEntry::Proof {
                    pattern: Proof::var(a),
                    value: marker_proof,
                });
                let g2 = g.push(CtxEntry::Proof(a.clone(), goal.clone()));
                let (g_ext, deps3) = self.check_store(&g2, &deps2, store)?;
                let mut g3 = g2;
                g3.0.extend(g_ext.0);
                self.check_command_dep(&g3, deps2.extend(&deps3), body)
            }
            Context::Forcing(Forcing::Case { a1, c1, a2, c2, .. }) => match &goal_n {
                Formula::Or(f1, f2) => {
                    for (i, (a, fi, ci)) in
                        [(1u8, (a1, f1, c1)), (2u8, (a2, f2, c2))].into_iter()
                    {
                        let (a, fi, ci) = (a, fi, ci);
                        let deps2 = popped.push(DepEntry::Proof {
                            pattern: Proof::inj(i, Proof::var(a)),
                            value: marker_proof.clone(),
                        });
                        let g2 = g.push(CtxEntry::Proof(a.clone(), (**fi).clone()));
                        self.check_command_dep(&g2, deps2, ci)?;
                    }
                    Ok(())
                }
                _ => Err(TypeError::new("or_l_d", "case split refutes a disjunction")
                    .types(goal, &goal_n)
                    .sigma(&deps)),
            },
            Context::Forcing(Forcing::SplitPair { a1, a2, body, .. }) => match &goal_n {
                Formula::And(f1, f2) => {
                    let deps2 = popped.push(DepEntry::Proof {
                        pattern: Proof::pair(Proof::var(a1), Proof::var(a2)),
                        value: marker_proof,
                    });
                    let g2 = g
                        .push(CtxEntry::Proof(a1.clone(), (**f1).clone()))
                        .push(CtxEntry::Proof(a2.clone(), (**f2).clone()));
                    self.check_command_dep(&g2, deps2, body)
                }
                _ => Err(TypeError::new("and_l_d", "pair split refutes a conjunction")
                    .types(goal, &goal_n)
                    .sigma(&deps)),
            },
            Context::Forcing(Forcing::SplitDep { x, a, body, .. }) => match &goal_n {
                Formula::Exists { x: gx, ty, body: fb } => {
                    let inst = if gx == x {
                        (**fb).clone()
                    } else {
                        Subst::term(gx, Term::var(x)).apply_formula(fb)
                    };
                    let deps2 = popped.push(DepEntry::WitPair {
                        x: x.clone(),
                        a: a.clone(),
                        value: marker_proof,
                    });
                    let g2 = g
                        .push(CtxEntry::Term(x.clone(), ty.clone()))
                        .push(CtxEntry::Proof(a.clone(), inst));
                    self.check_command_dep(&g2, deps2, body)
                }
                _ => Err(TypeError::new("exists_l_d", "dependent split refutes an existential")
                    .types(goal, &goal_n)
                    .sigma(&deps)),
            },
            _ => Err(TypeError::new(
                "dep",
                "this context cannot appear inside a delimited continuation",
            )
            .sigma(&deps)),
        }
    }

    fn check_coterm_dep(&self, g: &Ctx, deps: Deps, pi: &Coterm, ty: &FiniteType) -> TR<()> {
        match pi {
            Coterm::MuTildeTerm { x, ty: ann, body } => {
                let (popped, marker) = deps.pop_marker();
                let value = match marker {
                    Some(DepEntry::OpenTerm(t)) => t,
                    _ => {
                        return Err(TypeError::new(
                            "mu-tilde-x_d",
                            "dependent-mode term binder without a term marker",
                        )
                        .sigma(&deps))
                    }
                };
                if let Some(ann) = ann {
                    if ann != ty {
                        return Err(TypeError::new("mu-tilde-x_d", "co-term annotation mismatch")
                            .sigma(&deps));
                    }
                }
                let deps2 = popped.push(DepEntry::Term { x: x.clone(), value });
                let g2 = g.push(CtxEntry::Term(x.clone(), ty.clone()));
                self.check_command_dep(&g2, deps2, body)
            }
            Coterm::Stack { u, pi } => match ty {
                FiniteType::Arrow(dom, cod) => {
                    self.check_term(g, &deps, u, dom)?;
                    // the pending term grows by the application
                    let (popped, marker) = deps.pop_marker();
                    let deps2 = match marker {
                        Some(DepEntry::OpenTerm(t)) => popped
                            .push(DepEntry::OpenTerm(Term::app(t, (**u).clone()))),
                        _ => deps.clone(),
                    };
                    self.check_coterm_dep(g, deps2, pi, cod)
                }
                FiniteType::Nat => Err(TypeError::new(
                    "imp_l_d",
                    "term stack refutes an arrow type",
                )
                .sigma(&deps)),
            },
        }
    }

    /// Γ ⊢σ τ : (Γ'; σ') — returns the extension.
    pub fn check_store(&self, g: &Ctx, deps: &Deps, tau: &Store) -> TR<(Ctx, Deps)> {
        let mut g_all = g.clone();
        let mut g_ext = Ctx::empty();
        let mut d_ext = Deps::empty();
        for b in &tau.0 {
            if g_all.binds(&b.name) {
                return Err(TypeError::new(
                    "store",
                    format!("store binding {} shadows an existing hypothesis", b.name),
                )
                .sigma(deps));
            }
            let deps_here = deps.extend(&d_ext);
            match &b.body {
                Storable::Proof(p) => {
                    let a = match &b.ann {
                        Some(ann) => {
                            self.check_proof(&g_all, &deps_here, p, ann)?;
                            (**ann).clone()
                        }
                        None => self.infer_proof(&g_all, &deps_here, p)?,
                    };
                    g_all = g_all.push(CtxEntry::Proof(b.name.clone(), a.clone()));
                    g_ext = g_ext.push(CtxEntry::Proof(b.name.clone(), a));
                    d_ext = d_ext.push(DepEntry::Proof {
                        pattern: Proof::var(&b.name),
                        value: p.clone(),
                    });
                }
                Storable::Context(e) => {
                    let a = match &b.ann {
                        Some(ann) => {
                            self.check_context(&g_all, &deps_here, e, ann)?;
                            (**ann).clone()
                        }
                        None => self.infer_context(&g_all, &deps_here, e)?,
                    };
                    g_all = g_all.push(CtxEntry::Covar(b.name.clone(), a.clone()));
                    g_ext = g_ext.push(CtxEntry::Covar(b.name.clone(), a));
                }
            }
        }
        Ok((g_ext, d_ext))
    }

    pub fn check_closure(&self, g: &Ctx, deps: &Deps, cl: &Closure) -> TR<()> {
        let (g_ext, d_ext) = self.check_store(g, deps, &cl.store)?;
        let mut g_all = g.clone();
        g_all.0.extend(g_ext.0);
        self.check_command(&g_all, &deps.extend(&d_ext), &cl.command)
    }
}

impl Deps {
    /// Apply only the term entries of σ to a term (used when comparing
    /// coinductive indices).
    fn apply_term_entries(&self, t: &Term) -> Term {
        let mut out = t.clone();
        for entry in self.0.iter().rev() {
            if let DepEntry::Term { x, value } = entry {
                out = Subst::term(x, value.clone()).apply_term(&out);
            }
        }
        out
    }
}

/// Check a closed closure with default options.
pub fn check_closed(cl: &Closure) -> TR<()> {
    Checker::default().check_closure(&Ctx::empty(), &Deps::empty(), cl)
}

/// Check a closed proof against a formula with default options.
pub fn check_closed_proof(p: &Proof, a: &Formula) -> TR<()> {
    Checker::default().check_proof(&Ctx::empty(), &Deps::empty(), p, a)
}

// keep the submodule path stable for external callers
pub use self::Checker as TypeChecker;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse, Parsed, Sort};

    fn proof(src: &str) -> Proof {
        match parse(src, Sort::Proof).unwrap() {
            Parsed::Proof(p) => p,
            _ => unreachable!(),
        }
    }
    fn formula(src: &str) -> Formula {
        match parse(src, Sort::Formula).unwrap() {
            Parsed::Formula(f) => f,
            _ => unreachable!(),
        }
    }
    fn term(src: &str) -> Term {
        match parse(src, Sort::Term).unwrap() {
            Parsed::Term(t) => t,
            _ => unreachable!(),
        }
    }
    fn closure(src: &str) -> Closure {
        match parse(src, Sort::Closure).unwrap() {
            Parsed::Closure(cl) => cl,
            _ => unreachable!(),
        }
    }
    fn ck() -> Checker {
        Checker::default()
    }

    #[test]
    fn conversion_table() {
        let c = ck();
        let trues = [
            ("S(0) = S(0)", "0 = 0"),
            ("0 = S(0)", "bot"),
            ("S(0) = 0", "bot"),
            ("top", "top"),
            ("(lam x. S(x)) 0 = S(0)", "S(0) = S(0)"),
            ("rec(S(0); 0; (x, y). S(S(y))) = S(S(0))", "S(S(0)) = S(S(0))"),
            ("wit([S(0), refl]) = S(0)", "S(0) = S(0)"),
            ("exists x^N. x = 0", "exists y^N. y = 0"),
            ("pi (a : top). 0 = 0", "pi (b : top). 0 = 0"),
        ];
        for (l, r) in trues {
            assert!(c.conv(&formula(l), &formula(r)), "{l} should convert to {r}");
        }
        let falses = [
            ("0 = 0", "bot"),
            ("S(0) = S(0)", "bot"),
            ("top", "bot"),
            ("exists x^N. x = 0", "exists x^N. x = S(0)"),
            ("top /\\ top", "top \\/ top"),
        ];
        for (l, r) in falses {
            assert!(!c.conv(&formula(l), &formula(r)), "{l} should not convert to {r}");
        }
    }

    #[test]
    fn nu_unfolds_during_conversion() {
        let c = ck();
        // ν^0_{x,f}(x=x ∧ f(S(x))=0) ≡ 0=0 ∧ ν^{S(0)}(…)
        let nu = formula("nu(0; (x, f). x = x /\\ f (S(x)) = 0)");
        let unfolded = formula("0 = 0 /\\ nu(S(0); (x, f). x = x /\\ f (S(x)) = 0)");
        assert!(c.conv(&nu, &unfolded));
        assert!(c.conv(&unfolded, &nu));
    }

    #[test]
    fn positivity() {
        assert_eq!(positive("f", &formula("0 = 0 /\\ f (S(0)) = 0")), Ok(true));
        assert_eq!(positive("f", &formula("(f 0 = 0) -> bot")), Ok(false));
        assert_eq!(positive("f", &formula("top")), Ok(true));
        assert!(positive("f", &formula("f 0 = S(0)")).is_err());
    }

    #[test]
    fn term_typing() {
        let c = ck();
        let g = Ctx::empty();
        let d = Deps::empty();
        assert_eq!(c.infer_term(&g, &d, &term("S(S(0))")).unwrap(), FiniteType::Nat);
        assert_eq!(
            c.infer_term(&g, &d, &term("wit([0, (refl : 0 = 0)])")).unwrap(),
            FiniteType::Nat
        );
        assert_eq!(
            c.infer_term(&g, &d, &term("(lam x. S(x)) 0")).unwrap(),
            FiniteType::Nat
        );
        assert!(c
            .infer_term(
                &g,
                &d,
                &term("wit((mu star. <[0, refl] | star> : exists x^N. x = 0))")
            )
            .is_ok());
        // wit of a non-NEF proof is rejected
        let bad = Term::wit(proof("mu alpha. <[0, refl] | alpha>"));
        assert!(c.infer_term(&g, &d, &bad).is_err());
    }

    #[test]
    fn basic_proofs_check() {
        assert!(check_closed_proof(&proof("refl"), &formula("0 = 0")).is_ok());
        assert!(check_closed_proof(&proof("[0, refl]"), &formula("exists x^N. x = 0")).is_ok());
        assert!(check_closed_proof(&proof("fun a. a"), &formula("(0 = 0) -> 0 = 0")).is_ok());
        assert!(
            check_closed_proof(&proof("lam x. refl"), &formula("forall x^N. x = x")).is_ok()
        );
        assert!(check_closed_proof(
            &proof("(refl, inj1(refl))"),
            &formula("0 = 0 /\\ (0 = 0 \\/ bot)")
        )
        .is_ok());
        // conversion at the leaves
        assert!(check_closed_proof(&proof("refl"), &formula("(lam x. x) 0 = 0")).is_ok());
    }

    #[test]
    fn ill_typed_proofs_fail() {
        assert!(check_closed_proof(&proof("refl"), &formula("0 = S(0)")).is_err());
        assert!(check_closed_proof(&proof("refl"), &formula("bot")).is_err());
        assert!(check_closed_proof(&proof("inj1(refl)"), &formula("bot \\/ 0 = 0")).is_err());
        assert!(
            check_closed_proof(&proof("[0, refl]"), &formula("exists x^N. x = S(0)")).is_err()
        );
        assert!(check_closed_proof(&proof("(refl, refl)"), &formula("0 = 0")).is_err());
    }

    #[test]
    fn classical_proofs_use_their_covar() {
        // μα.⟨refl‖α⟩ : 0=0
        assert!(
            check_closed_proof(&proof("mu alpha. <refl | alpha>"), &formula("0 = 0")).is_ok()
        );
        // Peirce-flavored: μα.⟨inj2(fun a. mu beta.⟨inj1(a)‖α⟩)‖α⟩ : A ∨ (A → ⊥)
        let p = proof("mu alpha. <inj2(fun a. mu beta. <inj1(a) | alpha>) | alpha>");
        assert!(check_closed_proof(&p, &formula("0 = 0 \\/ ((0 = 0) -> bot)")).is_ok());
    }

    #[test]
    fn dependent_application_through_the_delimiter() {
        // (λa.prf-style shift) applied in a command: ⟨refl‖μ̃a.⟨a‖t̂p⟩⟩ inside μt̂p
        let p = proof("shift(<(refl : 0 = 0) | mu~ a. <a | tp>>)");
        let r = check_closed_proof(&p, &formula("0 = 0"));
        assert!(r.is_ok(), "{}", r.unwrap_err());
    }

    #[test]
    fn dependent_split_tracks_the_witness() {
        // μt̂p.⟨[0,refl]‖μ̃(x,a).⟨a‖t̂p⟩⟩ : wit [0,refl] = 0 — the prf pattern
        let p =
            proof("shift(<([0, refl] : exists x^N. x = 0) | dest~ (x, a) -> <a | tp>>)");
        let goal = formula("wit([0, refl]) = 0");
        assert!(check_closed_proof(&p, &goal).is_ok());
    }

    #[test]
    fn dependent_mode_requires_nef() {
        // a non-NEF proof against a binder inside the delimiter is rejected
        let p = proof("shift(<mu alpha. <refl | alpha> | mu~ a. <a | tp>>)");
        assert!(check_closed_proof(&p, &formula("0 = 0")).is_err());
    }

    #[test]
    fn commands_and_closures() {
        let c = ck();
        let g = Ctx::empty().push(CtxEntry::Covar("'k".into(), formula("0 = 0")));
        assert!(c.check_command(&g, &Deps::empty(), &closure("<refl | 'k>").command).is_ok());
        // refl against the abort context fails with a formula mismatch
        let err = c
            .check_command(&g, &Deps::empty(), &closure("<refl | abort>").command)
            .unwrap_err();
        assert!(matches!(err.expected, Some(Formula::Bot)));
        // stores type left to right, dependencies included
        assert!(check_closed(&closure(
            "<a | eq~ -> <refl | 'k>> [a := refl] ['k := eq~ -> <(refl : 0 = 0) | abort>]"
        ))
        .is_err());
        let g2 = Ctx::empty().push(CtxEntry::Covar("'k".into(), formula("0 = 0")));
        assert!(c
            .check_closure(
                &g2,
                &Deps::empty(),
                &closure("<a | eq~ -> <refl | 'k>> [a := (refl : 0 = 0)]"),
            )
            .is_ok());
    }

    #[test]
    fn store_shadowing_is_rejected() {
        let c = ck();
        let g = Ctx::empty().push(CtxEntry::Proof("a".into(), formula("0 = 0")));
        let cl = closure("<a | eq~ -> <a | 'k>> [a := refl]");
        let err = c.check_closure(&g, &Deps::empty(), &cl).unwrap_err();
        assert!(err.message.contains("shadows"));
    }

    #[test]
    fn dependency_list_application() {
        let d = Deps::empty().push(DepEntry::Proof {
            pattern: Proof::var("a"),
            value: proof("refl"),
        });
        // {a|refl}(wit-free formula) is untouched
        assert!(alpha_eq_formula(&d.apply(&formula("0 = 0")), &formula("0 = 0")));
        // non-NEF values are skipped
        let d2 = Deps::empty().push(DepEntry::Proof {
            pattern: Proof::var("a"),
            value: proof("mu alpha. <refl | alpha>"),
        });
        let with_a = Formula::eq(Term::wit(Proof::var("a")), Term::Zero);
        assert!(alpha_eq_formula(&d2.apply(&with_a), &with_a));
        // NEF values substitute inside wit positions
        let d3 = Deps::empty().push(DepEntry::Proof {
            pattern: Proof::var("a"),
            value: proof("[0, refl]"),
        });
        let expect = Formula::eq(Term::wit(proof("[0, refl]")), Term::Zero);
        assert!(alpha_eq_formula(&d3.apply(&with_a), &expect));
    }

    #[test]
    fn wit_pair_entries_rewrite_the_term_variable() {
        let d = Deps::empty().push(DepEntry::WitPair {
            x: "x".into(),
            a: "a".into(),
            value: proof("[0, refl]"),
        });
        let a_of_x = formula("x = 0");
        let applied = d.apply(&a_of_x);
        let expect = Formula::eq(Term::wit(proof("[0, refl]")), Term::Zero);
        assert!(alpha_eq_formula(&applied, &expect));
        // and conversion closes the loop: wit [0,refl] = 0 ≡ 0 = 0
        assert!(ck().conv(&applied, &formula("0 = 0")));
    }

    #[test]
    fn fixpoint_typing() {
        // fix with motive x = x… at the goal instance
        let p = proof("fix[n. n = n](S(0); refl; (a, m). refl)");
        assert!(check_closed_proof(&p, &formula("S(0) = S(0)")).is_ok());
        // cofix with invariant: stream of refls
        let p2 = proof("cofix[f n ^ N. n = n /\\ f (S(n)) = 0](0; (b, n). (refl, b S(n)))");
        let goal = formula("nu(0; (n, f). n = n /\\ f (S(n)) = 0)");
        assert!(check_closed_proof(&p2, &goal).is_ok());
    }

    #[test]
    fn negative_cofix_invariant_is_rejected() {
        let p = proof("cofix[f n ^ N. (f (S(n)) = 0) -> bot](0; (b, n). fun c. c)");
        let goal = formula("nu(0; (n, f). (f (S(n)) = 0) -> bot)");
        let err = check_closed_proof(&p, &goal).unwrap_err();
        assert!(err.message.contains("negatively"), "{err}");
    }

    #[test]
    fn non_nef_dependent_stack_is_rejected() {
        // q non-NEF against Π(a:A).B with a free in B
        let g = Ctx::empty().push(CtxEntry::Covar("'k".into(), formula("0 = 0")));
        let c = ck();
        let f = proof("fun (a : exists x^N. x = x). refl");
        // build Π (a : ∃x.x=x). wit a = wit a — dependent codomain
        let dom = formula("exists x^N. x = x");
        let cod = Formula::eq(Term::wit(Proof::var("a")), Term::wit(Proof::var("a")));
        let pi = Formula::Pi { a: "a".into(), dom: Box::new(dom), cod: Box::new(cod) };
        let q_bad = proof("mu beta. <[0, refl] | beta>");
        let stack = Context::Forcing(Forcing::ProofStack {
            q: Box::new(q_bad),
            e: Box::new(Context::Forcing(Forcing::Abort)),
            ann: None,
        });
        let _ = f;
        let err = c.check_context(&g, &Deps::empty(), &stack, &pi).unwrap_err();
        assert!(err.message.contains("NEF"), "{err}");
    }

    #[test]
    fn equality_elimination_rewrites() {
        // μ̃=.⟨refl : t=t ‖ e : (u=u)⟩ against t=u
        let g = Ctx::empty()
            .push(CtxEntry::Proof("h".into(), formula("S(0) = S(0)")))
            .push(CtxEntry::Covar("'k".into(), formula("wit([S(0), refl]) = S(0)")));
        // goal: S(0) = wit([S(0),refl]) — conversion sees both as S(0)
        let c = ck();
        let e = closure("<(refl : S(0) = wit([S(0), refl])) | eq~ -> <h | 'k>>").command;
        let g2 = g.push(CtxEntry::Covar("'halt".into(), formula("top")));
        let _ = g2;
        // ⟨refl‖μ̃=.⟨h‖'k⟩⟩ where refl : S(0)=S(0): rewriting S(0)↦S(0) is a no-op
        assert!(c.check_command(&g, &Deps::empty(), &e).is_ok());
    }

    #[test]
    fn covar_types_are_inferred_from_uses() {
        let c = ck();
        let d = Deps::empty();
        let g = Ctx::empty()
            .push(CtxEntry::Proof("h".into(), formula("forall x^N. x = x")))
            .push(CtxEntry::Proof("i".into(), formula("(0 = 0) -> top")));
        // μα.⟨h‖S(0)·α⟩ — the ∀-instantiation lands in α
        let p = proof("mu 'k. <h | S(0) . 'k>");
        let a = c.infer_proof(&g, &d, &p);
        assert!(a.is_ok(), "{}", a.unwrap_err());
        assert!(alpha_eq_formula(&a.unwrap(), &formula("S(0) = S(0)")));
        // the parser elaborates juxtaposition to the same shape
        let a = c.infer_proof(&g, &d, &proof("h 0")).unwrap();
        assert!(alpha_eq_formula(&a, &formula("0 = 0")));
        let a = c.infer_proof(&g, &d, &proof("i refl")).unwrap();
        assert!(alpha_eq_formula(&a, &Formula::Top));
        // a co-variable never cut against anything stays unknown
        assert!(c.infer_proof(&g, &d, &proof("mu 'k. <h | 0 . abort>")).is_err());
    }

    #[test]
    fn conflicting_covar_uses_are_rejected() {
        let c = ck();
        let g = Ctx::empty()
            .push(CtxEntry::Proof("h".into(), formula("0 = 0 \\/ top")))
            .push(CtxEntry::Proof("h2".into(), formula("0 = 0 \\/ 0 = 0")));
        let split = |s: &str| proof(&format!(
            "mu 'k. <{s} | case~ {{ inj1 a1 -> <a1 | 'k> | inj2 a2 -> <a2 | 'k> }}>"
        ));
        let err = c.infer_proof(&g, &Deps::empty(), &split("h")).unwrap_err();
        assert!(err.message.contains("conflicting"), "{err}");
        let a = c.infer_proof(&g, &Deps::empty(), &split("h2")).unwrap();
        assert!(alpha_eq_formula(&a, &formula("0 = 0")));
    }

    #[test]
    fn delimiter_types_are_inferred_from_the_axiom() {
        let c = ck();
        let d = Deps::empty();
        let g = Ctx::empty()
            .push(CtxEntry::Proof("q".into(), formula("exists x^N. x = 0")))
            .push(CtxEntry::Proof("h".into(), formula("0 = 0 /\\ top")));
        // μt̂p.⟨q‖μ̃(x,a).⟨a‖t̂p⟩⟩ : wit(q) = 0 — the projection out of ∃
        let p = proof("shift(<q | dest~ (x, a) -> <a | tp>>)");
        let a = c.infer_proof(&g, &d, &p);
        assert!(a.is_ok(), "{}", a.unwrap_err());
        let want = Formula::eq(Term::wit(Proof::var("q")), Term::Zero);
        assert!(alpha_eq_formula(&a.unwrap(), &want));
        // first projection out of ∧
        let p = proof("shift(<h | split~ (a1, a2) -> <a1 | tp>>)");
        let a = c.infer_proof(&g, &d, &p).unwrap();
        assert!(alpha_eq_formula(&a, &formula("0 = 0")));
    }

    #[test]
    fn coinductive_heads_unfold_at_eliminations() {
        let c = ck();
        let d = Deps::empty();
        let g = Ctx::empty().push(CtxEntry::Proof(
            "s".into(),
            formula("nu(0; (x, f). x = x /\\ f (S(x)) = 0)"),
        ));
        // splitting a stream forces one unfolding of the ν
        let p = proof("mu 'k. <s | split~ (a1, a2) -> <a1 | 'k>>");
        let a = c.infer_proof(&g, &d, &p);
        assert!(a.is_ok(), "{}", a.unwrap_err());
        assert!(alpha_eq_formula(&a.unwrap(), &formula("0 = 0")));
        // the tail keeps the coinductive type at the next index
        let p = proof("mu 'k. <s | split~ (a1, a2) -> <a2 | 'k>>");
        let a = c.infer_proof(&g, &d, &p).unwrap();
        assert!(c.conv(&a, &formula("nu(S(0); (x, f). x = x /\\ f (S(x)) = 0)")));
        // wit through a ν wrapping an existential
        let g2 = Ctx::empty().push(CtxEntry::Proof(
            "s".into(),
            formula("nu(0; (x, f). exists y^N. y = x)"),
        ));
        assert_eq!(
            c.infer_term(&g2, &d, &Term::wit(Proof::var("s"))).unwrap(),
            FiniteType::Nat
        );
    }

    #[test]
    fn open_beta_redexes_normalize() {
        let c = ck();
        // z is free, so the machine alone cannot evaluate this
        assert!(c.conv(
            &formula("(lam x. lam y. x) z 0 = z"),
            &formula("z = z"),
        ));
        assert!(!c.conv(
            &formula("(lam x. lam y. y) z 0 = z"),
            &formula("z = z"),
        ));
    }
}
