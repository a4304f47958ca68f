//! Name handling: free-name computation per sort, alpha-equivalence,
//! capture-avoiding simultaneous substitution, and deterministic freshening.
//!
//! Names live in three namespaces: term variables (including the ν-bound
//! function names f), proof variables, and co-variables. The reserved names
//! (`tp`, `ctp`, `star`) behave like constants: they are never renamed, and
//! binders binding them only match binders with the same literal name.

use crate::syntax::*;
use std::collections::{BTreeSet, HashMap, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ns {
    Term,
    Proof,
    Covar,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FreeNames {
    pub terms: BTreeSet<Name>,
    pub proofs: BTreeSet<Name>,
    pub covars: BTreeSet<Name>,
}

impl FreeNames {
    pub fn contains(&self, ns: Ns, n: &str) -> bool {
        match ns {
            Ns::Term => self.terms.contains(n),
            Ns::Proof => self.proofs.contains(n),
            Ns::Covar => self.covars.contains(n),
        }
    }
    pub fn insert(&mut self, ns: Ns, n: Name) {
        match ns {
            Ns::Term => self.terms.insert(n),
            Ns::Proof => self.proofs.insert(n),
            Ns::Covar => self.covars.insert(n),
        };
    }
    pub fn extend(&mut self, other: &FreeNames) {
        self.terms.extend(other.terms.iter().cloned());
        self.proofs.extend(other.proofs.iter().cloned());
        self.covars.extend(other.covars.iter().cloned());
    }
    pub fn all(&self) -> HashSet<Name> {
        self.terms
            .iter()
            .chain(self.proofs.iter())
            .chain(self.covars.iter())
            .cloned()
            .collect()
    }
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty() && self.proofs.is_empty() && self.covars.is_empty()
    }
}

/// Deterministic fresh-name generation: strip a trailing digit suffix from the
/// hint to obtain a base, then take the first of hint, base1, base2, … that is
/// not in `avoid`.
pub fn fresh(hint: &str, avoid: &HashSet<Name>) -> Name {
    if !avoid.contains(hint) && !hint.is_empty() {
        return hint.to_string();
    }
    let base: String = {
        let trimmed = hint.trim_end_matches(|c: char| c.is_ascii_digit());
        if trimmed.is_empty() {
            "x".to_string()
        } else {
            trimmed.to_string()
        }
    };
    for k in 1u64.. {
        let cand = format!("{base}{k}");
        if !avoid.contains(&cand) {
            return cand;
        }
    }
    unreachable!()
}

// ---------------------------------------------------------------------------
// Free names
// ---------------------------------------------------------------------------

#[derive(Default)]
struct Scope {
    bound: Vec<(Ns, Name)>,
}

impl Scope {
    fn is_bound(&self, ns: Ns, n: &str) -> bool {
        self.bound.iter().any(|(bns, bn)| *bns == ns && bn == n)
    }
    fn push(&mut self, ns: Ns, n: &Name) -> bool {
        if is_reserved(n) {
            false
        } else {
            self.bound.push((ns, n.clone()));
            true
        }
    }
    fn pop_n(&mut self, n: usize) {
        for _ in 0..n {
            self.bound.pop();
        }
    }
}

struct FreeAcc {
    out: FreeNames,
    scope: Scope,
    /// When false, annotation fields do not contribute free names.
    include_anns: bool,
}

impl FreeAcc {
    fn hit(&mut self, ns: Ns, n: &str) {
        if !self.scope.is_bound(ns, n) {
            self.out.insert(ns, n.to_string());
        }
    }
    fn oform(&mut self, a: &OForm) {
        if self.include_anns {
            if let Some(a) = a {
                self.formula(a);
            }
        }
    }
    fn term(&mut self, t: &Term) {
        match t {
            Term::Var(x) => self.hit(Ns::Term, x),
            Term::Zero => {}
            Term::Succ(t) => self.term(t),
            Term::Rec { t, t0, x, y, ts } => {
                self.term(t);
                self.term(t0);
                let k = self.scope.push(Ns::Term, x) as usize + self.scope.push(Ns::Term, y) as usize;
                self.term(ts);
                self.scope.pop_n(k);
            }
            Term::Lam { x, body, .. } => {
                let k = self.scope.push(Ns::Term, x) as usize;
                self.term(body);
                self.scope.pop_n(k);
            }
            Term::App(f, a) => {
                self.term(f);
                self.term(a);
            }
            Term::Wit(p) => self.proof(p),
        }
    }
    fn proof(&mut self, p: &Proof) {
        match p {
            Proof::Var(a) => self.hit(Ns::Proof, a),
            Proof::Refl { ann } => self.oform(ann),
            Proof::Inj { p, ann, .. } => {
                self.proof(p);
                self.oform(ann);
            }
            Proof::Pair(p, q) => {
                self.proof(p);
                self.proof(q);
            }
            Proof::DepPair { t, p, ann } => {
                self.term(t);
                self.proof(p);
                self.oform(ann);
            }
            Proof::LamTerm { x, body, .. } => {
                let k = self.scope.push(Ns::Term, x) as usize;
                self.proof(body);
                self.scope.pop_n(k);
            }
            Proof::LamProof { a, dom, body } => {
                self.oform(dom);
                let k = self.scope.push(Ns::Proof, a) as usize;
                self.proof(body);
                self.scope.pop_n(k);
            }
            Proof::Mu { alpha, ann, body } => {
                self.oform(ann);
                let k = self.scope.push(Ns::Covar, alpha) as usize;
                self.command(body);
                self.scope.pop_n(k);
            }
            Proof::Shift { ann, body } => {
                self.oform(ann);
                self.command(body);
            }
            Proof::Ind { t, p0, a, x, ps, motive } => {
                self.term(t);
                self.proof(p0);
                let k = self.scope.push(Ns::Proof, a) as usize + self.scope.push(Ns::Term, x) as usize;
                self.proof(ps);
                self.scope.pop_n(k);
                if self.include_anns {
                    if let Some((mx, mf)) = motive {
                        let k = self.scope.push(Ns::Term, mx) as usize;
                        self.formula(mf);
                        self.scope.pop_n(k);
                    }
                }
            }
            Proof::Cofix { t, b, x, body, ann } => {
                self.term(t);
                let k = self.scope.push(Ns::Proof, b) as usize + self.scope.push(Ns::Term, x) as usize;
                self.proof(body);
                self.scope.pop_n(k);
                if self.include_anns {
                    if let Some(ca) = ann {
                        let k = self.scope.push(Ns::Term, x) as usize
                            + self.scope.push(Ns::Term, &ca.f) as usize;
                        self.formula(&ca.body);
                        self.scope.pop_n(k);
                    }
                }
            }
            Proof::Ascribe(p, a) => {
                self.proof(p);
                self.formula(a);
            }
            Proof::Sugar(s) => self.sugar(s),
        }
    }
    fn sugar(&mut self, s: &Sugar) {
        match s {
            Sugar::Let { a, def, body } => {
                self.proof(def);
                let k = self.scope.push(Ns::Proof, a) as usize;
                self.proof(body);
                self.scope.pop_n(k);
            }
            Sugar::Split { p, a1, a2, body } => {
                self.proof(p);
                let k =
                    self.scope.push(Ns::Proof, a1) as usize + self.scope.push(Ns::Proof, a2) as usize;
                self.proof(body);
                self.scope.pop_n(k);
            }
            Sugar::Case { p, a1, p1, a2, p2 } => {
                self.proof(p);
                let k = self.scope.push(Ns::Proof, a1) as usize;
                self.proof(p1);
                self.scope.pop_n(k);
                let k = self.scope.push(Ns::Proof, a2) as usize;
                self.proof(p2);
                self.scope.pop_n(k);
            }
            Sugar::Dest { p, x, a, body } => {
                self.proof(p);
                let k =
                    self.scope.push(Ns::Term, x) as usize + self.scope.push(Ns::Proof, a) as usize;
                self.proof(body);
                self.scope.pop_n(k);
            }
            Sugar::Prf(p) | Sugar::Exfalso(p) | Sugar::Proj { p, .. } => self.proof(p),
            Sugar::Subst(p, q) => {
                self.proof(p);
                self.proof(q);
            }
            Sugar::Catch { alpha, body } => {
                let k = self.scope.push(Ns::Covar, alpha) as usize;
                self.proof(body);
                self.scope.pop_n(k);
            }
            Sugar::Throw { alpha, arg } => {
                self.hit(Ns::Covar, alpha);
                self.proof(arg);
            }
            Sugar::AppT(p, t) => {
                self.proof(p);
                self.term(t);
            }
            Sugar::AppP(p, q) => {
                self.proof(p);
                self.proof(q);
            }
        }
    }
    fn context(&mut self, e: &Context) {
        match e {
            Context::Covar(alpha) => self.hit(Ns::Covar, alpha),
            Context::MuTilde { a, ann, body, store } => {
                self.oform(ann);
                let mut k = 0;
                for b in &store.0 {
                    self.binding_body(b);
                    k += self.scope.push(binding_ns(b), &b.name) as usize;
                }
                k += self.scope.push(Ns::Proof, a) as usize;
                self.command(body);
                self.scope.pop_n(k);
            }
            Context::CoShift { ann, body } => {
                self.oform(ann);
                self.command(body);
            }
            Context::Forcing(f) => self.forcing(f),
        }
    }
    fn forcing(&mut self, f: &Forcing) {
        match f {
            Forcing::Abort => {}
            Forcing::Case { a1, c1, a2, c2, ann } => {
                self.oform(ann);
                let k = self.scope.push(Ns::Proof, a1) as usize;
                self.command(c1);
                self.scope.pop_n(k);
                let k = self.scope.push(Ns::Proof, a2) as usize;
                self.command(c2);
                self.scope.pop_n(k);
            }
            Forcing::SplitPair { a1, a2, body, ann } => {
                self.oform(ann);
                let k =
                    self.scope.push(Ns::Proof, a1) as usize + self.scope.push(Ns::Proof, a2) as usize;
                self.command(body);
                self.scope.pop_n(k);
            }
            Forcing::SplitDep { x, a, body, ann } => {
                self.oform(ann);
                let k =
                    self.scope.push(Ns::Term, x) as usize + self.scope.push(Ns::Proof, a) as usize;
                self.command(body);
                self.scope.pop_n(k);
            }
            Forcing::TermStack { t, e, ann } => {
                self.oform(ann);
                self.term(t);
                self.context(e);
            }
            Forcing::ProofStack { q, e, ann } => {
                self.oform(ann);
                self.proof(q);
                self.context(e);
            }
            Forcing::EqSplit { body, ann } => {
                self.oform(ann);
                self.command(body);
            }
        }
    }
    fn coterm(&mut self, pi: &Coterm) {
        match pi {
            Coterm::Stack { u, pi } => {
                self.term(u);
                self.coterm(pi);
            }
            Coterm::MuTildeTerm { x, body, .. } => {
                let k = self.scope.push(Ns::Term, x) as usize;
                self.command(body);
                self.scope.pop_n(k);
            }
        }
    }
    fn command(&mut self, c: &Command) {
        match c {
            Command::Proof { p, e } => {
                self.proof(p);
                self.context(e);
            }
            Command::Term { t, pi } => {
                self.term(t);
                self.coterm(pi);
            }
        }
    }
    fn binding_body(&mut self, b: &Binding) {
        match &b.body {
            Storable::Proof(p) => self.proof(p),
            Storable::Context(e) => self.context(e),
        }
        self.oform(&b.ann);
    }
    fn closure(&mut self, cl: &Closure) {
        let mut k = 0;
        for b in &cl.store.0 {
            self.binding_body(b);
            k += self.scope.push(binding_ns(b), &b.name) as usize;
        }
        self.command(&cl.command);
        self.scope.pop_n(k);
    }
    fn formula(&mut self, a: &Formula) {
        match a {
            Formula::Top | Formula::Bot => {}
            Formula::Eq(t, u) => {
                self.term(t);
                self.term(u);
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                self.formula(a);
                self.formula(b);
            }
            Formula::Pi { a, dom, cod } => {
                self.formula(dom);
                let k = self.scope.push(Ns::Proof, a) as usize;
                self.formula(cod);
                self.scope.pop_n(k);
            }
            Formula::Forall { x, body, .. } | Formula::Exists { x, body, .. } => {
                let k = self.scope.push(Ns::Term, x) as usize;
                self.formula(body);
                self.scope.pop_n(k);
            }
            Formula::Nu { t, x, f, body } => {
                self.term(t);
                let k = self.scope.push(Ns::Term, x) as usize + self.scope.push(Ns::Term, f) as usize;
                self.formula(body);
                self.scope.pop_n(k);
            }
        }
    }
}

pub fn binding_ns(b: &Binding) -> Ns {
    match b.body {
        Storable::Proof(_) => Ns::Proof,
        Storable::Context(_) => Ns::Covar,
    }
}

/// Any AST sort, borrowed; used by the generic name/alpha operations.
#[derive(Clone, Copy)]
pub enum Node<'a> {
    Term(&'a Term),
    Proof(&'a Proof),
    Context(&'a Context),
    Coterm(&'a Coterm),
    Command(&'a Command),
    Closure(&'a Closure),
    Formula(&'a Formula),
    Store(&'a Store),
}

fn run_free(node: Node, include_anns: bool) -> FreeNames {
    let mut acc = FreeAcc { out: FreeNames::default(), scope: Scope::default(), include_anns };
    match node {
        Node::Term(t) => acc.term(t),
        Node::Proof(p) => acc.proof(p),
        Node::Context(e) => acc.context(e),
        Node::Coterm(pi) => acc.coterm(pi),
        Node::Command(c) => acc.command(c),
        Node::Closure(cl) => acc.closure(cl),
        Node::Formula(a) => acc.formula(a),
        Node::Store(s) => {
            let mut k = 0;
            for b in &s.0 {
                acc.binding_body(b);
                k += acc.scope.push(binding_ns(b), &b.name) as usize;
            }
            acc.scope.pop_n(k);
        }
    }
    acc.out
}

/// Free names of a node, including names occurring in type annotations.
pub fn free_names(node: Node) -> FreeNames {
    run_free(node, true)
}

/// Free names ignoring annotations (the purely operational occurrences).
pub fn free_names_plain(node: Node) -> FreeNames {
    run_free(node, false)
}

/// Every name occurring in the node, free or bound, all namespaces pooled.
/// Used to seed deterministic fresh-name generation.
pub fn all_names(node: Node) -> HashSet<Name> {
    // Bound names are collected by spoofing an empty scope: we simply gather
    // binder names during a traversal piggy-backed on pretty-printing order.
    let mut out = free_names(node).all();
    collect_bound(node, &mut out);
    out
}

fn collect_bound(node: Node, out: &mut HashSet<Name>) {
    match node {
        Node::Term(t) => match t {
            Term::Rec { t, t0, x, y, ts } => {
                out.insert(x.clone());
                out.insert(y.clone());
                collect_bound(Node::Term(t), out);
                collect_bound(Node::Term(t0), out);
                collect_bound(Node::Term(ts), out);
            }
            Term::Lam { x, body, .. } => {
                out.insert(x.clone());
                collect_bound(Node::Term(body), out);
            }
            Term::Succ(t) => collect_bound(Node::Term(t), out),
            Term::App(f, a) => {
                collect_bound(Node::Term(f), out);
                collect_bound(Node::Term(a), out);
            }
            Term::Wit(p) => collect_bound(Node::Proof(p), out),
            _ => {}
        },
        Node::Proof(p) => match p {
            Proof::Inj { p, .. } | Proof::Ascribe(p, _) => collect_bound(Node::Proof(p), out),
            Proof::Pair(p, q) => {
                collect_bound(Node::Proof(p), out);
                collect_bound(Node::Proof(q), out);
            }
            Proof::DepPair { t, p, .. } => {
                collect_bound(Node::Term(t), out);
                collect_bound(Node::Proof(p), out);
            }
            Proof::LamTerm { x, body, .. } => {
                out.insert(x.clone());
                collect_bound(Node::Proof(body), out);
            }
            Proof::LamProof { a, body, .. } => {
                out.insert(a.clone());
                collect_bound(Node::Proof(body), out);
            }
            Proof::Mu { alpha, body, .. } => {
                out.insert(alpha.clone());
                collect_bound(Node::Command(body), out);
            }
            Proof::Shift { body, .. } => collect_bound(Node::Command(body), out),
            Proof::Ind { t, p0, a, x, ps, .. } => {
                out.insert(a.clone());
                out.insert(x.clone());
                collect_bound(Node::Term(t), out);
                collect_bound(Node::Proof(p0), out);
                collect_bound(Node::Proof(ps), out);
            }
            Proof::Cofix { t, b, x, body, .. } => {
                out.insert(b.clone());
                out.insert(x.clone());
                collect_bound(Node::Term(t), out);
                collect_bound(Node::Proof(body), out);
            }
            Proof::Sugar(s) => collect_bound_sugar(s, out),
            _ => {}
        },
        Node::Context(e) => match e {
            Context::MuTilde { a, body, store, .. } => {
                out.insert(a.clone());
                collect_bound(Node::Store(store), out);
                collect_bound(Node::Command(body), out);
            }
            Context::CoShift { body, .. } => collect_bound(Node::Command(body), out),
            Context::Forcing(f) => match f {
                Forcing::Case { a1, c1, a2, c2, .. } => {
                    out.insert(a1.clone());
                    out.insert(a2.clone());
                    collect_bound(Node::Command(c1), out);
                    collect_bound(Node::Command(c2), out);
                }
                Forcing::SplitPair { a1, a2, body, .. } => {
                    out.insert(a1.clone());
                    out.insert(a2.clone());
                    collect_bound(Node::Command(body), out);
                }
                Forcing::SplitDep { x, a, body, .. } => {
                    out.insert(x.clone());
                    out.insert(a.clone());
                    collect_bound(Node::Command(body), out);
                }
                Forcing::TermStack { t, e, .. } => {
                    collect_bound(Node::Term(t), out);
                    collect_bound(Node::Context(e), out);
                }
                Forcing::ProofStack { q, e, .. } => {
                    collect_bound(Node::Proof(q), out);
                    collect_bound(Node::Context(e), out);
                }
                Forcing::EqSplit { body, .. } => collect_bound(Node::Command(body), out),
                Forcing::Abort => {}
            },
            Context::Covar(_) => {}
        },
        Node::Coterm(pi) => match pi {
            Coterm::Stack { u, pi } => {
                collect_bound(Node::Term(u), out);
                collect_bound(Node::Coterm(pi), out);
            }
            Coterm::MuTildeTerm { x, body, .. } => {
                out.insert(x.clone());
                collect_bound(Node::Command(body), out);
            }
        },
        Node::Command(c) => match c {
            Command::Proof { p, e } => {
                collect_bound(Node::Proof(p), out);
                collect_bound(Node::Context(e), out);
            }
            Command::Term { t, pi } => {
                collect_bound(Node::Term(t), out);
                collect_bound(Node::Coterm(pi), out);
            }
        },
        Node::Closure(cl) => {
            collect_bound(Node::Store(&cl.store), out);
            collect_bound(Node::Command(&cl.command), out);
        }
        Node::Store(s) => {
            for b in &s.0 {
                out.insert(b.name.clone());
                match &b.body {
                    Storable::Proof(p) => collect_bound(Node::Proof(p), out),
                    Storable::Context(e) => collect_bound(Node::Context(e), out),
                }
            }
        }
        Node::Formula(a) => match a {
            Formula::Eq(t, u) => {
                collect_bound(Node::Term(t), out);
                collect_bound(Node::Term(u), out);
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                collect_bound(Node::Formula(a), out);
                collect_bound(Node::Formula(b), out);
            }
            Formula::Pi { a, dom, cod } => {
                out.insert(a.clone());
                collect_bound(Node::Formula(dom), out);
                collect_bound(Node::Formula(cod), out);
            }
            Formula::Forall { x, body, .. } | Formula::Exists { x, body, .. } => {
                out.insert(x.clone());
                collect_bound(Node::Formula(body), out);
            }
            Formula::Nu { t, x, f, body } => {
                out.insert(x.clone());
                out.insert(f.clone());
                collect_bound(Node::Term(t), out);
                collect_bound(Node::Formula(body), out);
            }
            _ => {}
        },
    }
}

/// Run-wide fresh-name discipline for the machines. `reserved` accumulates
/// every name the run has seen or allocated, so a pick made deep inside a
/// nested evaluation cannot collide with a name an outer one is holding.
/// `detached` records store binders that a fixpoint unfolding temporarily
/// removed from the store: they travel inside a μ̃ and are re-grafted verbatim
/// on its value-bind, so new store binders must not reuse them in between.
#[derive(Debug, Clone, Default)]
pub struct NamePool {
    reserved: HashSet<Name>,
    detached: HashSet<Name>,
}

impl NamePool {
    pub fn new() -> NamePool {
        NamePool::default()
    }

    /// A pool primed with every name in `node`.
    pub fn seeded(node: Node) -> NamePool {
        let mut pool = NamePool::default();
        pool.absorb(node);
        pool
    }

    /// Reserve every name occurring in `node`; store binders carried inside a
    /// μ̃ count as detached, since the node is mid-unfolding for them.
    pub fn absorb(&mut self, node: Node) {
        self.reserved.extend(all_names(node));
        carried_store_names(node, &mut self.detached);
    }

    pub fn reserve(&mut self, name: &str) {
        self.reserved.insert(name.to_string());
    }

    /// A name unused anywhere in the run so far, permanently claimed.
    pub fn gensym(&mut self, hint: &str) -> Name {
        let n = fresh(hint, &self.reserved);
        self.reserved.insert(n.clone());
        n
    }

    pub fn note_detached(&mut self, name: &str) {
        self.detached.insert(name.to_string());
    }

    pub fn is_detached(&self, name: &str) -> bool {
        self.detached.contains(name)
    }
}

/// Names bound by stores carried inside μ̃ contexts anywhere in the node.
fn carried_store_names(node: Node, out: &mut HashSet<Name>) {
    match node {
        Node::Term(t) => match t {
            Term::Rec { t, t0, ts, .. } => {
                carried_store_names(Node::Term(t), out);
                carried_store_names(Node::Term(t0), out);
                carried_store_names(Node::Term(ts), out);
            }
            Term::Lam { body, .. } | Term::Succ(body) => {
                carried_store_names(Node::Term(body), out)
            }
            Term::App(f, a) => {
                carried_store_names(Node::Term(f), out);
                carried_store_names(Node::Term(a), out);
            }
            Term::Wit(p) => carried_store_names(Node::Proof(p), out),
            Term::Var(_) | Term::Zero => {}
        },
        Node::Proof(p) => match p {
            Proof::Inj { p, .. }
            | Proof::Ascribe(p, _)
            | Proof::LamTerm { body: p, .. }
            | Proof::LamProof { body: p, .. } => carried_store_names(Node::Proof(p), out),
            Proof::Pair(p, q) => {
                carried_store_names(Node::Proof(p), out);
                carried_store_names(Node::Proof(q), out);
            }
            Proof::DepPair { t, p, .. } => {
                carried_store_names(Node::Term(t), out);
                carried_store_names(Node::Proof(p), out);
            }
            Proof::Mu { body, .. } | Proof::Shift { body, .. } => {
                carried_store_names(Node::Command(body), out)
            }
            Proof::Ind { t, p0, ps, .. } => {
                carried_store_names(Node::Term(t), out);
                carried_store_names(Node::Proof(p0), out);
                carried_store_names(Node::Proof(ps), out);
            }
            Proof::Cofix { t, body, .. } => {
                carried_store_names(Node::Term(t), out);
                carried_store_names(Node::Proof(body), out);
            }
            // sugar is expanded before anything store-related can run
            Proof::Sugar(_) | Proof::Var(_) | Proof::Refl { .. } => {}
        },
        Node::Context(e) => match e {
            Context::MuTilde { body, store, .. } => {
                for b in &store.0 {
                    out.insert(b.name.clone());
                }
                carried_store_names(Node::Store(store), out);
                carried_store_names(Node::Command(body), out);
            }
            Context::CoShift { body, .. } => carried_store_names(Node::Command(body), out),
            Context::Forcing(f) => match f {
                Forcing::Case { c1, c2, .. } => {
                    carried_store_names(Node::Command(c1), out);
                    carried_store_names(Node::Command(c2), out);
                }
                Forcing::SplitPair { body, .. }
                | Forcing::SplitDep { body, .. }
                | Forcing::EqSplit { body, .. } => {
                    carried_store_names(Node::Command(body), out)
                }
                Forcing::TermStack { t, e, .. } => {
                    carried_store_names(Node::Term(t), out);
                    carried_store_names(Node::Context(e), out);
                }
                Forcing::ProofStack { q, e, .. } => {
                    carried_store_names(Node::Proof(q), out);
                    carried_store_names(Node::Context(e), out);
                }
                Forcing::Abort => {}
            },
            Context::Covar(_) => {}
        },
        Node::Coterm(pi) => match pi {
            Coterm::Stack { u, pi } => {
                carried_store_names(Node::Term(u), out);
                carried_store_names(Node::Coterm(pi), out);
            }
            Coterm::MuTildeTerm { body, .. } => carried_store_names(Node::Command(body), out),
        },
        Node::Command(c) => match c {
            Command::Proof { p, e } => {
                carried_store_names(Node::Proof(p), out);
                carried_store_names(Node::Context(e), out);
            }
            Command::Term { t, pi } => {
                carried_store_names(Node::Term(t), out);
                carried_store_names(Node::Coterm(pi), out);
            }
        },
        Node::Closure(cl) => {
            carried_store_names(Node::Store(&cl.store), out);
            carried_store_names(Node::Command(&cl.command), out);
        }
        Node::Store(s) => {
            for b in &s.0 {
                match &b.body {
                    Storable::Proof(p) => carried_store_names(Node::Proof(p), out),
                    Storable::Context(e) => carried_store_names(Node::Context(e), out),
                }
            }
        }
        // formulas contain no contexts, hence no carried stores
        Node::Formula(_) => {}
    }
}

fn collect_bound_sugar(s: &Sugar, out: &mut HashSet<Name>) {
    match s {
        Sugar::Let { a, def, body } => {
            out.insert(a.clone());
            collect_bound(Node::Proof(def), out);
            collect_bound(Node::Proof(body), out);
        }
        Sugar::Split { p, a1, a2, body } => {
            out.insert(a1.clone());
            out.insert(a2.clone());
            collect_bound(Node::Proof(p), out);
            collect_bound(Node::Proof(body), out);
        }
        Sugar::Case { p, a1, p1, a2, p2 } => {
            out.insert(a1.clone());
            out.insert(a2.clone());
            collect_bound(Node::Proof(p), out);
            collect_bound(Node::Proof(p1), out);
            collect_bound(Node::Proof(p2), out);
        }
        Sugar::Dest { p, x, a, body } => {
            out.insert(x.clone());
            out.insert(a.clone());
            collect_bound(Node::Proof(p), out);
            collect_bound(Node::Proof(body), out);
        }
        Sugar::Prf(p) | Sugar::Exfalso(p) | Sugar::Proj { p, .. } => {
            collect_bound(Node::Proof(p), out)
        }
        Sugar::Subst(p, q) | Sugar::AppP(p, q) => {
            collect_bound(Node::Proof(p), out);
            collect_bound(Node::Proof(q), out);
        }
        Sugar::Catch { alpha, body } => {
            out.insert(alpha.clone());
            collect_bound(Node::Proof(body), out);
        }
        Sugar::Throw { alpha, arg } => {
            out.insert(alpha.clone());
            collect_bound(Node::Proof(arg), out);
        }
        Sugar::AppT(p, t) => {
            collect_bound(Node::Proof(p), out);
            collect_bound(Node::Term(t), out);
        }
    }
}

// ---------------------------------------------------------------------------
// Alpha-equivalence (annotations ignored, ascriptions transparent).
// ---------------------------------------------------------------------------

#[derive(Default)]
struct AlphaEnv {
    // Pairs of corresponding bound names per namespace, innermost last.
    pairs: Vec<(Ns, Name, Name)>,
}

impl AlphaEnv {
    fn eq_name(&self, ns: Ns, l: &str, r: &str) -> bool {
        for (bns, bl, br) in self.pairs.iter().rev() {
            if *bns != ns {
                continue;
            }
            let hit_l = bl == l;
            let hit_r = br == r;
            if hit_l || hit_r {
                return hit_l && hit_r;
            }
        }
        l == r
    }
    fn push(&mut self, ns: Ns, l: &Name, r: &Name) -> Result<usize, ()> {
        if is_reserved(l) || is_reserved(r) {
            // Reserved names compare literally and are never pushed.
            if l == r {
                Ok(0)
            } else {
                Err(())
            }
        } else {
            self.pairs.push((ns, l.clone(), r.clone()));
            Ok(1)
        }
    }
    fn pop_n(&mut self, n: usize) {
        for _ in 0..n {
            self.pairs.pop();
        }
    }
}

macro_rules! guard {
    ($cond:expr) => {
        if !$cond {
            return false;
        }
    };
}

fn aeq_term(env: &mut AlphaEnv, l: &Term, r: &Term) -> bool {
    match (l, r) {
        (Term::Var(x), Term::Var(y)) => env.eq_name(Ns::Term, x, y),
        (Term::Zero, Term::Zero) => true,
        (Term::Succ(a), Term::Succ(b)) => aeq_term(env, a, b),
        (
            Term::Rec { t: t1, t0: z1, x: x1, y: y1, ts: s1 },
            Term::Rec { t: t2, t0: z2, x: x2, y: y2, ts: s2 },
        ) => {
            guard!(aeq_term(env, t1, t2) && aeq_term(env, z1, z2));
            let Ok(k1) = env.push(Ns::Term, x1, x2) else { return false };
            let Ok(k2) = env.push(Ns::Term, y1, y2) else {
                env.pop_n(k1);
                return false;
            };
            let ok = aeq_term(env, s1, s2);
            env.pop_n(k1 + k2);
            ok
        }
        (Term::Lam { x: x1, body: b1, .. }, Term::Lam { x: x2, body: b2, .. }) => {
            let Ok(k) = env.push(Ns::Term, x1, x2) else { return false };
            let ok = aeq_term(env, b1, b2);
            env.pop_n(k);
            ok
        }
        (Term::App(f1, a1), Term::App(f2, a2)) => aeq_term(env, f1, f2) && aeq_term(env, a1, a2),
        (Term::Wit(p), Term::Wit(q)) => aeq_proof(env, p, q),
        _ => false,
    }
}

fn aeq_proof(env: &mut AlphaEnv, l: &Proof, r: &Proof) -> bool {
    let (l, r) = (l.strip(), r.strip());
    match (l, r) {
        (Proof::Var(a), Proof::Var(b)) => env.eq_name(Ns::Proof, a, b),
        (Proof::Refl { .. }, Proof::Refl { .. }) => true,
        (Proof::Inj { i: i1, p: p1, .. }, Proof::Inj { i: i2, p: p2, .. }) => {
            i1 == i2 && aeq_proof(env, p1, p2)
        }
        (Proof::Pair(p1, q1), Proof::Pair(p2, q2)) => {
            aeq_proof(env, p1, p2) && aeq_proof(env, q1, q2)
        }
        (Proof::DepPair { t: t1, p: p1, .. }, Proof::DepPair { t: t2, p: p2, .. }) => {
            aeq_term(env, t1, t2) && aeq_proof(env, p1, p2)
        }
        (Proof::LamTerm { x: x1, body: b1, .. }, Proof::LamTerm { x: x2, body: b2, .. }) => {
            let Ok(k) = env.push(Ns::Term, x1, x2) else { return false };
            let ok = aeq_proof(env, b1, b2);
            env.pop_n(k);
            ok
        }
        (Proof::LamProof { a: a1, body: b1, .. }, Proof::LamProof { a: a2, body: b2, .. }) => {
            let Ok(k) = env.push(Ns::Proof, a1, a2) else { return false };
            let ok = aeq_proof(env, b1, b2);
            env.pop_n(k);
            ok
        }
        (Proof::Mu { alpha: m1, body: b1, .. }, Proof::Mu { alpha: m2, body: b2, .. }) => {
            let Ok(k) = env.push(Ns::Covar, m1, m2) else { return false };
            let ok = aeq_command(env, b1, b2);
            env.pop_n(k);
            ok
        }
        (Proof::Shift { body: b1, .. }, Proof::Shift { body: b2, .. }) => aeq_command(env, b1, b2),
        (
            Proof::Ind { t: t1, p0: z1, a: a1, x: x1, ps: s1, .. },
            Proof::Ind { t: t2, p0: z2, a: a2, x: x2, ps: s2, .. },
        ) => {
            guard!(aeq_term(env, t1, t2) && aeq_proof(env, z1, z2));
            let Ok(k1) = env.push(Ns::Proof, a1, a2) else { return false };
            let Ok(k2) = env.push(Ns::Term, x1, x2) else {
                env.pop_n(k1);
                return false;
            };
            let ok = aeq_proof(env, s1, s2);
            env.pop_n(k1 + k2);
            ok
        }
        (
            Proof::Cofix { t: t1, b: b1, x: x1, body: q1, .. },
            Proof::Cofix { t: t2, b: b2, x: x2, body: q2, .. },
        ) => {
            guard!(aeq_term(env, t1, t2));
            let Ok(k1) = env.push(Ns::Proof, b1, b2) else { return false };
            let Ok(k2) = env.push(Ns::Term, x1, x2) else {
                env.pop_n(k1);
                return false;
            };
            let ok = aeq_proof(env, q1, q2);
            env.pop_n(k1 + k2);
            ok
        }
        (Proof::Sugar(s1), Proof::Sugar(s2)) => aeq_sugar(env, s1, s2),
        _ => false,
    }
}

fn aeq_sugar(env: &mut AlphaEnv, l: &Sugar, r: &Sugar) -> bool {
    match (l, r) {
        (Sugar::Let { a: a1, def: d1, body: b1 }, Sugar::Let { a: a2, def: d2, body: b2 }) => {
            guard!(aeq_proof(env, d1, d2));
            let Ok(k) = env.push(Ns::Proof, a1, a2) else { return false };
            let ok = aeq_proof(env, b1, b2);
            env.pop_n(k);
            ok
        }
        (
            Sugar::Split { p: p1, a1: x1, a2: y1, body: b1 },
            Sugar::Split { p: p2, a1: x2, a2: y2, body: b2 },
        ) => {
            guard!(aeq_proof(env, p1, p2));
            let Ok(k1) = env.push(Ns::Proof, x1, x2) else { return false };
            let Ok(k2) = env.push(Ns::Proof, y1, y2) else {
                env.pop_n(k1);
                return false;
            };
            let ok = aeq_proof(env, b1, b2);
            env.pop_n(k1 + k2);
            ok
        }
        (
            Sugar::Case { p: p1, a1: x1, p1: l1, a2: y1, p2: r1 },
            Sugar::Case { p: p2, a1: x2, p1: l2, a2: y2, p2: r2 },
        ) => {
            guard!(aeq_proof(env, p1, p2));
            let Ok(k) = env.push(Ns::Proof, x1, x2) else { return false };
            let ok = aeq_proof(env, l1, l2);
            env.pop_n(k);
            guard!(ok);
            let Ok(k) = env.push(Ns::Proof, y1, y2) else { return false };
            let ok = aeq_proof(env, r1, r2);
            env.pop_n(k);
            ok
        }
        (
            Sugar::Dest { p: p1, x: x1, a: a1, body: b1 },
            Sugar::Dest { p: p2, x: x2, a: a2, body: b2 },
        ) => {
            guard!(aeq_proof(env, p1, p2));
            let Ok(k1) = env.push(Ns::Term, x1, x2) else { return false };
            let Ok(k2) = env.push(Ns::Proof, a1, a2) else {
                env.pop_n(k1);
                return false;
            };
            let ok = aeq_proof(env, b1, b2);
            env.pop_n(k1 + k2);
            ok
        }
        (Sugar::Prf(p1), Sugar::Prf(p2)) | (Sugar::Exfalso(p1), Sugar::Exfalso(p2)) => {
            aeq_proof(env, p1, p2)
        }
        (Sugar::Subst(p1, q1), Sugar::Subst(p2, q2))
        | (Sugar::AppP(p1, q1), Sugar::AppP(p2, q2)) => {
            aeq_proof(env, p1, p2) && aeq_proof(env, q1, q2)
        }
        (Sugar::Catch { alpha: m1, body: b1 }, Sugar::Catch { alpha: m2, body: b2 }) => {
            let Ok(k) = env.push(Ns::Covar, m1, m2) else { return false };
            let ok = aeq_proof(env, b1, b2);
            env.pop_n(k);
            ok
        }
        (Sugar::Throw { alpha: m1, arg: p1 }, Sugar::Throw { alpha: m2, arg: p2 }) => {
            env.eq_name(Ns::Covar, m1, m2) && aeq_proof(env, p1, p2)
        }
        (Sugar::Proj { i: i1, p: p1 }, Sugar::Proj { i: i2, p: p2 }) => {
            i1 == i2 && aeq_proof(env, p1, p2)
        }
        (Sugar::AppT(p1, t1), Sugar::AppT(p2, t2)) => {
            aeq_proof(env, p1, p2) && aeq_term(env, t1, t2)
        }
        _ => false,
    }
}

fn aeq_store_enter(env: &mut AlphaEnv, l: &Store, r: &Store) -> Option<usize> {
    if l.0.len() != r.0.len() {
        return None;
    }
    let mut pushed = 0;
    for (b1, b2) in l.0.iter().zip(r.0.iter()) {
        let ok = match (&b1.body, &b2.body) {
            (Storable::Proof(p1), Storable::Proof(p2)) => aeq_proof(env, p1, p2),
            (Storable::Context(e1), Storable::Context(e2)) => aeq_context(env, e1, e2),
            _ => false,
        };
        if !ok {
            env.pop_n(pushed);
            return None;
        }
        match env.push(binding_ns(b1), &b1.name, &b2.name) {
            Ok(k) => pushed += k,
            Err(()) => {
                env.pop_n(pushed);
                return None;
            }
        }
    }
    Some(pushed)
}

fn aeq_context(env: &mut AlphaEnv, l: &Context, r: &Context) -> bool {
    match (l, r) {
        (Context::Covar(a), Context::Covar(b)) => env.eq_name(Ns::Covar, a, b),
        (
            Context::MuTilde { a: a1, body: b1, store: s1, .. },
            Context::MuTilde { a: a2, body: b2, store: s2, .. },
        ) => {
            let Some(k1) = aeq_store_enter(env, s1, s2) else { return false };
            let Ok(k2) = env.push(Ns::Proof, a1, a2) else {
                env.pop_n(k1);
                return false;
            };
            let ok = aeq_command(env, b1, b2);
            env.pop_n(k1 + k2);
            ok
        }
        (Context::CoShift { body: b1, .. }, Context::CoShift { body: b2, .. }) => {
            aeq_command(env, b1, b2)
        }
        (Context::Forcing(f1), Context::Forcing(f2)) => aeq_forcing(env, f1, f2),
        _ => false,
    }
}

fn aeq_forcing(env: &mut AlphaEnv, l: &Forcing, r: &Forcing) -> bool {
    match (l, r) {
        (Forcing::Abort, Forcing::Abort) => true,
        (
            Forcing::Case { a1: x1, c1: l1, a2: y1, c2: r1, .. },
            Forcing::Case { a1: x2, c1: l2, a2: y2, c2: r2, .. },
        ) => {
            let Ok(k) = env.push(Ns::Proof, x1, x2) else { return false };
            let ok = aeq_command(env, l1, l2);
            env.pop_n(k);
            guard!(ok);
            let Ok(k) = env.push(Ns::Proof, y1, y2) else { return false };
            let ok = aeq_command(env, r1, r2);
            env.pop_n(k);
            ok
        }
        (
            Forcing::SplitPair { a1: x1, a2: y1, body: b1, .. },
            Forcing::SplitPair { a1: x2, a2: y2, body: b2, .. },
        ) => {
            let Ok(k1) = env.push(Ns::Proof, x1, x2) else { return false };
            let Ok(k2) = env.push(Ns::Proof, y1, y2) else {
                env.pop_n(k1);
                return false;
            };
            let ok = aeq_command(env, b1, b2);
            env.pop_n(k1 + k2);
            ok
        }
        (
            Forcing::SplitDep { x: x1, a: a1, body: b1, .. },
            Forcing::SplitDep { x: x2, a: a2, body: b2, .. },
        ) => {
            let Ok(k1) = env.push(Ns::Term, x1, x2) else { return false };
            let Ok(k2) = env.push(Ns::Proof, a1, a2) else {
                env.pop_n(k1);
                return false;
            };
            let ok = aeq_command(env, b1, b2);
            env.pop_n(k1 + k2);
            ok
        }
        (Forcing::TermStack { t: t1, e: e1, .. }, Forcing::TermStack { t: t2, e: e2, .. }) => {
            aeq_term(env, t1, t2) && aeq_context(env, e1, e2)
        }
        (Forcing::ProofStack { q: q1, e: e1, .. }, Forcing::ProofStack { q: q2, e: e2, .. }) => {
            aeq_proof(env, q1, q2) && aeq_context(env, e1, e2)
        }
        (Forcing::EqSplit { body: b1, .. }, Forcing::EqSplit { body: b2, .. }) => {
            aeq_command(env, b1, b2)
        }
        _ => false,
    }
}

fn aeq_coterm(env: &mut AlphaEnv, l: &Coterm, r: &Coterm) -> bool {
    match (l, r) {
        (Coterm::Stack { u: u1, pi: p1 }, Coterm::Stack { u: u2, pi: p2 }) => {
            aeq_term(env, u1, u2) && aeq_coterm(env, p1, p2)
        }
        (
            Coterm::MuTildeTerm { x: x1, body: b1, .. },
            Coterm::MuTildeTerm { x: x2, body: b2, .. },
        ) => {
            let Ok(k) = env.push(Ns::Term, x1, x2) else { return false };
            let ok = aeq_command(env, b1, b2);
            env.pop_n(k);
            ok
        }
        _ => false,
    }
}

fn aeq_command(env: &mut AlphaEnv, l: &Command, r: &Command) -> bool {
    match (l, r) {
        (Command::Proof { p: p1, e: e1 }, Command::Proof { p: p2, e: e2 }) => {
            aeq_proof(env, p1, p2) && aeq_context(env, e1, e2)
        }
        (Command::Term { t: t1, pi: pi1 }, Command::Term { t: t2, pi: pi2 }) => {
            aeq_term(env, t1, t2) && aeq_coterm(env, pi1, pi2)
        }
        _ => false,
    }
}

fn aeq_formula(env: &mut AlphaEnv, l: &Formula, r: &Formula) -> bool {
    match (l, r) {
        (Formula::Top, Formula::Top) | (Formula::Bot, Formula::Bot) => true,
        (Formula::Eq(t1, u1), Formula::Eq(t2, u2)) => {
            aeq_term(env, t1, t2) && aeq_term(env, u1, u2)
        }
        (Formula::And(a1, b1), Formula::And(a2, b2))
        | (Formula::Or(a1, b1), Formula::Or(a2, b2)) => {
            aeq_formula(env, a1, a2) && aeq_formula(env, b1, b2)
        }
        (
            Formula::Pi { a: a1, dom: d1, cod: c1 },
            Formula::Pi { a: a2, dom: d2, cod: c2 },
        ) => {
            guard!(aeq_formula(env, d1, d2));
            let Ok(k) = env.push(Ns::Proof, a1, a2) else { return false };
            let ok = aeq_formula(env, c1, c2);
            env.pop_n(k);
            ok
        }
        (
            Formula::Forall { x: x1, ty: t1, body: b1 },
            Formula::Forall { x: x2, ty: t2, body: b2 },
        )
        | (
            Formula::Exists { x: x1, ty: t1, body: b1 },
            Formula::Exists { x: x2, ty: t2, body: b2 },
        ) => {
            guard!(t1 == t2);
            let Ok(k) = env.push(Ns::Term, x1, x2) else { return false };
            let ok = aeq_formula(env, b1, b2);
            env.pop_n(k);
            ok
        }
        (
            Formula::Nu { t: t1, x: x1, f: f1, body: b1 },
            Formula::Nu { t: t2, x: x2, f: f2, body: b2 },
        ) => {
            guard!(aeq_term(env, t1, t2));
            let Ok(k1) = env.push(Ns::Term, x1, x2) else { return false };
            let Ok(k2) = env.push(Ns::Term, f1, f2) else {
                env.pop_n(k1);
                return false;
            };
            let ok = aeq_formula(env, b1, b2);
            env.pop_n(k1 + k2);
            ok
        }
        _ => false,
    }
}

/// Alpha-equivalence of two nodes of the same sort. Annotations are ignored
/// and ascriptions are transparent; mismatched sorts compare unequal.
pub fn alpha_eq(l: Node, r: Node) -> bool {
    let mut env = AlphaEnv::default();
    match (l, r) {
        (Node::Term(a), Node::Term(b)) => aeq_term(&mut env, a, b),
        (Node::Proof(a), Node::Proof(b)) => aeq_proof(&mut env, a, b),
        (Node::Context(a), Node::Context(b)) => aeq_context(&mut env, a, b),
        (Node::Coterm(a), Node::Coterm(b)) => aeq_coterm(&mut env, a, b),
        (Node::Command(a), Node::Command(b)) => aeq_command(&mut env, a, b),
        (Node::Formula(a), Node::Formula(b)) => aeq_formula(&mut env, a, b),
        (Node::Store(a), Node::Store(b)) => aeq_store_enter(&mut env, a, b).is_some(),
        (Node::Closure(a), Node::Closure(b)) => {
            match aeq_store_enter(&mut env, &a.store, &b.store) {
                Some(k) => {
                    let ok = aeq_command(&mut env, &a.command, &b.command);
                    env.pop_n(k);
                    ok
                }
                None => false,
            }
        }
        _ => false,
    }
}

pub fn alpha_eq_term(a: &Term, b: &Term) -> bool {
    alpha_eq(Node::Term(a), Node::Term(b))
}
pub fn alpha_eq_proof(a: &Proof, b: &Proof) -> bool {
    alpha_eq(Node::Proof(a), Node::Proof(b))
}
pub fn alpha_eq_formula(a: &Formula, b: &Formula) -> bool {
    alpha_eq(Node::Formula(a), Node::Formula(b))
}
pub fn alpha_eq_command(a: &Command, b: &Command) -> bool {
    alpha_eq(Node::Command(a), Node::Command(b))
}

// ---------------------------------------------------------------------------
// Capture-avoiding simultaneous substitution.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct Subst {
    pub terms: HashMap<Name, Term>,
    pub proofs: HashMap<Name, Proof>,
    pub covars: HashMap<Name, Context>,
    /// Union of the free names of all replacements (superset is fine).
    free: FreeNames,
}

impl Subst {
    pub fn term(x: &str, t: Term) -> Subst {
        let mut s = Subst::default();
        s.free.extend(&free_names(Node::Term(&t)));
        s.terms.insert(x.to_string(), t);
        s
    }
    pub fn proof(a: &str, p: Proof) -> Subst {
        let mut s = Subst::default();
        s.free.extend(&free_names(Node::Proof(&p)));
        s.proofs.insert(a.to_string(), p);
        s
    }
    pub fn covar(alpha: &str, e: Context) -> Subst {
        let mut s = Subst::default();
        s.free.extend(&free_names(Node::Context(&e)));
        s.covars.insert(alpha.to_string(), e);
        s
    }
    pub fn add_term(mut self, x: &str, t: Term) -> Subst {
        self.free.extend(&free_names(Node::Term(&t)));
        self.terms.insert(x.to_string(), t);
        self
    }
    pub fn add_proof(mut self, a: &str, p: Proof) -> Subst {
        self.free.extend(&free_names(Node::Proof(&p)));
        self.proofs.insert(a.to_string(), p);
        self
    }
    pub fn add_covar(mut self, alpha: &str, e: Context) -> Subst {
        self.free.extend(&free_names(Node::Context(&e)));
        self.covars.insert(alpha.to_string(), e);
        self
    }
    pub fn empty() -> Subst {
        Subst::default()
    }
    pub fn has_mappings(&self) -> bool {
        !self.is_empty()
    }

    pub fn apply_storable(&self, s: &Storable) -> Storable {
        match s {
            Storable::Proof(p) => Storable::Proof(self.apply_proof(p)),
            Storable::Context(e) => Storable::Context(self.apply_context(e)),
        }
    }

    fn is_empty(&self) -> bool {
        self.terms.is_empty() && self.proofs.is_empty() && self.covars.is_empty()
    }

    fn lookup(&self, ns: Ns, n: &str) -> bool {
        match ns {
            Ns::Term => self.terms.contains_key(n),
            Ns::Proof => self.proofs.contains_key(n),
            Ns::Covar => self.covars.contains_key(n),
        }
    }

    fn remove(&mut self, ns: Ns, n: &str) {
        match ns {
            Ns::Term => {
                self.terms.remove(n);
            }
            Ns::Proof => {
                self.proofs.remove(n);
            }
            Ns::Covar => {
                self.covars.remove(n);
            }
        }
    }

    /// Entering binders: shadow bound names, rename them when a replacement
    /// could capture them. Returns the (possibly renamed) binder names and the
    /// substitution to use in the body. Reserved names are never renamed.
    fn enter<'a>(&self, binds: &[(Ns, &'a Name)], body_free: impl Fn() -> FreeNames) -> (Vec<Name>, Subst) {
        let mut sub = self.clone();
        let mut out = Vec::with_capacity(binds.len());
        let mut renamed_any = false;
        let mut avoid: Option<HashSet<Name>> = None;
        for (ns, n) in binds {
            if sub.lookup(*ns, n) {
                sub.remove(*ns, n);
            }
            if !is_reserved(n) && sub.free.contains(*ns, n) && !sub.is_empty() {
                let avoid = avoid.get_or_insert_with(|| {
                    let mut s = self.free.all();
                    s.extend(body_free().all());
                    s.extend(self.terms.keys().cloned());
                    s.extend(self.proofs.keys().cloned());
                    s.extend(self.covars.keys().cloned());
                    s
                });
                let n2 = fresh(n, avoid);
                avoid.insert(n2.clone());
                match ns {
                    Ns::Term => {
                        sub.terms.insert((*n).clone(), Term::Var(n2.clone()));
                    }
                    Ns::Proof => {
                        sub.proofs.insert((*n).clone(), Proof::Var(n2.clone()));
                    }
                    Ns::Covar => {
                        sub.covars.insert((*n).clone(), Context::Covar(n2.clone()));
                    }
                }
                sub.free.insert(*ns, n2.clone());
                out.push(n2);
                renamed_any = true;
            } else {
                out.push((*n).clone());
            }
        }
        let _ = renamed_any;
        (out, sub)
    }

    pub fn apply_term(&self, t: &Term) -> Term {
        if self.is_empty() {
            return t.clone();
        }
        match t {
            Term::Var(x) => self.terms.get(x).cloned().unwrap_or_else(|| t.clone()),
            Term::Zero => Term::Zero,
            Term::Succ(t) => Term::succ(self.apply_term(t)),
            Term::Rec { t, t0, x, y, ts } => {
                let (names, sub) = self.enter(&[(Ns::Term, x), (Ns::Term, y)], || {
                    free_names(Node::Term(ts))
                });
                Term::Rec {
                    t: Box::new(self.apply_term(t)),
                    t0: Box::new(self.apply_term(t0)),
                    x: names[0].clone(),
                    y: names[1].clone(),
                    ts: Box::new(sub.apply_term(ts)),
                }
            }
            Term::Lam { x, ty, body } => {
                let (names, sub) = self.enter(&[(Ns::Term, x)], || free_names(Node::Term(body)));
                Term::Lam {
                    x: names[0].clone(),
                    ty: ty.clone(),
                    body: Box::new(sub.apply_term(body)),
                }
            }
            Term::App(f, a) => Term::app(self.apply_term(f), self.apply_term(a)),
            Term::Wit(p) => Term::wit(self.apply_proof(p)),
        }
    }

    pub fn apply_oform(&self, a: &OForm) -> OForm {
        a.as_ref().map(|f| Box::new(self.apply_formula(f)))
    }

    pub fn apply_proof(&self, p: &Proof) -> Proof {
        if self.is_empty() {
            return p.clone();
        }
        match p {
            Proof::Var(a) => self.proofs.get(a).cloned().unwrap_or_else(|| p.clone()),
            Proof::Refl { ann } => Proof::Refl { ann: self.apply_oform(ann) },
            Proof::Inj { i, p, ann } => Proof::Inj {
                i: *i,
                p: Box::new(self.apply_proof(p)),
                ann: self.apply_oform(ann),
            },
            Proof::Pair(p, q) => Proof::pair(self.apply_proof(p), self.apply_proof(q)),
            Proof::DepPair { t, p, ann } => Proof::DepPair {
                t: Box::new(self.apply_term(t)),
                p: Box::new(self.apply_proof(p)),
                ann: self.apply_oform(ann),
            },
            Proof::LamTerm { x, ty, body } => {
                let (names, sub) = self.enter(&[(Ns::Term, x)], || free_names(Node::Proof(body)));
                Proof::LamTerm {
                    x: names[0].clone(),
                    ty: ty.clone(),
                    body: Box::new(sub.apply_proof(body)),
                }
            }
            Proof::LamProof { a, dom, body } => {
                let (names, sub) = self.enter(&[(Ns::Proof, a)], || free_names(Node::Proof(body)));
                Proof::LamProof {
                    a: names[0].clone(),
                    dom: self.apply_oform(dom),
                    body: Box::new(sub.apply_proof(body)),
                }
            }
            Proof::Mu { alpha, ann, body } => {
                let (names, sub) =
                    self.enter(&[(Ns::Covar, alpha)], || free_names(Node::Command(body)));
                Proof::Mu {
                    alpha: names[0].clone(),
                    ann: self.apply_oform(ann),
                    body: Box::new(sub.apply_command(body)),
                }
            }
            Proof::Shift { ann, body } => Proof::Shift {
                ann: self.apply_oform(ann),
                body: Box::new(self.apply_command(body)),
            },
            Proof::Ind { t, p0, a, x, ps, motive } => {
                let (names, sub) = self.enter(&[(Ns::Proof, a), (Ns::Term, x)], || {
                    free_names(Node::Proof(ps))
                });
                let motive = motive.as_ref().map(|(mx, mf)| {
                    let (mn, msub) = self.enter(&[(Ns::Term, mx)], || free_names(Node::Formula(mf)));
                    (mn[0].clone(), Box::new(msub.apply_formula(mf)))
                });
                Proof::Ind {
                    t: Box::new(self.apply_term(t)),
                    p0: Box::new(self.apply_proof(p0)),
                    a: names[0].clone(),
                    x: names[1].clone(),
                    ps: Box::new(sub.apply_proof(ps)),
                    motive,
                }
            }
            Proof::Cofix { t, b, x, body, ann } => {
                let (names, sub) = self.enter(&[(Ns::Proof, b), (Ns::Term, x)], || {
                    free_names(Node::Proof(body))
                });
                // The annotation binds the node's x and its own f. If x was
                // renamed the annotation must be renamed consistently.
                let ann = ann.as_ref().map(|ca| {
                    let mut fsub = self.clone();
                    fsub.remove(Ns::Term, &ca.f);
                    if names[1] != *x {
                        fsub = fsub.clone();
                        fsub.terms.insert(x.clone(), Term::Var(names[1].clone()));
                        fsub.free.insert(Ns::Term, names[1].clone());
                    } else {
                        fsub.remove(Ns::Term, x);
                    }
                    Box::new(CofixAnn {
                        f: ca.f.clone(),
                        t_ty: ca.t_ty.clone(),
                        body: fsub.apply_formula(&ca.body),
                    })
                });
                Proof::Cofix {
                    t: Box::new(self.apply_term(t)),
                    b: names[0].clone(),
                    x: names[1].clone(),
                    body: Box::new(sub.apply_proof(body)),
                    ann,
                }
            }
            Proof::Ascribe(p, a) => {
                Proof::ascribe(self.apply_proof(p), self.apply_formula(a))
            }
            Proof::Sugar(s) => Proof::sugar(self.apply_sugar(s)),
        }
    }

    fn apply_sugar(&self, s: &Sugar) -> Sugar {
        match s {
            Sugar::Let { a, def, body } => {
                let (names, sub) = self.enter(&[(Ns::Proof, a)], || free_names(Node::Proof(body)));
                Sugar::Let {
                    a: names[0].clone(),
                    def: self.apply_proof(def),
                    body: sub.apply_proof(body),
                }
            }
            Sugar::Split { p, a1, a2, body } => {
                let (names, sub) = self.enter(&[(Ns::Proof, a1), (Ns::Proof, a2)], || {
                    free_names(Node::Proof(body))
                });
                Sugar::Split {
                    p: self.apply_proof(p),
                    a1: names[0].clone(),
                    a2: names[1].clone(),
                    body: sub.apply_proof(body),
                }
            }
            Sugar::Case { p, a1, p1, a2, p2 } => {
                let (n1, s1) = self.enter(&[(Ns::Proof, a1)], || free_names(Node::Proof(p1)));
                let (n2, s2) = self.enter(&[(Ns::Proof, a2)], || free_names(Node::Proof(p2)));
                Sugar::Case {
                    p: self.apply_proof(p),
                    a1: n1[0].clone(),
                    p1: s1.apply_proof(p1),
                    a2: n2[0].clone(),
                    p2: s2.apply_proof(p2),
                }
            }
            Sugar::Dest { p, x, a, body } => {
                let (names, sub) = self.enter(&[(Ns::Term, x), (Ns::Proof, a)], || {
                    free_names(Node::Proof(body))
                });
                Sugar::Dest {
                    p: self.apply_proof(p),
                    x: names[0].clone(),
                    a: names[1].clone(),
                    body: sub.apply_proof(body),
                }
            }
            Sugar::Prf(p) => Sugar::Prf(self.apply_proof(p)),
            Sugar::Subst(p, q) => Sugar::Subst(self.apply_proof(p), self.apply_proof(q)),
            Sugar::Exfalso(p) => Sugar::Exfalso(self.apply_proof(p)),
            Sugar::Catch { alpha, body } => {
                let (names, sub) =
                    self.enter(&[(Ns::Covar, alpha)], || free_names(Node::Proof(body)));
                Sugar::Catch { alpha: names[0].clone(), body: sub.apply_proof(body) }
            }
            Sugar::Throw { alpha, arg } => {
                // A free co-variable use; substituting a non-covariable
                // context for it cannot be represented in sugar, so only
                // renamings apply here (expansion happens before machine use).
                let alpha = match self.covars.get(alpha) {
                    Some(Context::Covar(b)) => b.clone(),
                    _ => alpha.clone(),
                };
                Sugar::Throw { alpha, arg: self.apply_proof(arg) }
            }
            Sugar::Proj { i, p } => Sugar::Proj { i: *i, p: self.apply_proof(p) },
            Sugar::AppT(p, t) => Sugar::AppT(self.apply_proof(p), self.apply_term(t)),
            Sugar::AppP(p, q) => Sugar::AppP(self.apply_proof(p), self.apply_proof(q)),
        }
    }

    pub fn apply_context(&self, e: &Context) -> Context {
        if self.is_empty() {
            return e.clone();
        }
        match e {
            Context::Covar(alpha) => {
                self.covars.get(alpha).cloned().unwrap_or_else(|| e.clone())
            }
            Context::MuTilde { a, ann, body, store } => {
                let binds: Vec<(Ns, &Name)> = store
                    .0
                    .iter()
                    .map(|b| (binding_ns(b), &b.name))
                    .chain(std::iter::once((Ns::Proof, a)))
                    .collect();
                let (names, sub) = self.enter(&binds, || free_names(Node::Command(body)));
                let store = Store(
                    store
                        .0
                        .iter()
                        .enumerate()
                        .map(|(i, b)| Binding {
                            name: names[i].clone(),
                            body: match &b.body {
                                // Earlier bindings are in scope of later ones; the
                                // renamings in `sub` cover them (superset is safe
                                // because original names were unique).
                                Storable::Proof(p) => Storable::Proof(sub.apply_proof(p)),
                                Storable::Context(e) => Storable::Context(sub.apply_context(e)),
                            },
                            ann: sub.apply_oform(&b.ann),
                        })
                        .collect(),
                );
                Context::MuTilde {
                    a: names[names.len() - 1].clone(),
                    ann: self.apply_oform(ann),
                    body: Box::new(sub.apply_command(body)),
                    store,
                }
            }
            Context::CoShift { ann, body } => Context::CoShift {
                ann: self.apply_oform(ann),
                body: Box::new(self.apply_command(body)),
            },
            Context::Forcing(f) => Context::Forcing(self.apply_forcing(f)),
        }
    }

    fn apply_forcing(&self, f: &Forcing) -> Forcing {
        match f {
            Forcing::Abort => Forcing::Abort,
            Forcing::Case { a1, c1, a2, c2, ann } => {
                let (n1, s1) = self.enter(&[(Ns::Proof, a1)], || free_names(Node::Command(c1)));
                let (n2, s2) = self.enter(&[(Ns::Proof, a2)], || free_names(Node::Command(c2)));
                Forcing::Case {
                    a1: n1[0].clone(),
                    c1: Box::new(s1.apply_command(c1)),
                    a2: n2[0].clone(),
                    c2: Box::new(s2.apply_command(c2)),
                    ann: self.apply_oform(ann),
                }
            }
            Forcing::SplitPair { a1, a2, body, ann } => {
                let (names, sub) = self.enter(&[(Ns::Proof, a1), (Ns::Proof, a2)], || {
                    free_names(Node::Command(body))
                });
                Forcing::SplitPair {
                    a1: names[0].clone(),
                    a2: names[1].clone(),
                    body: Box::new(sub.apply_command(body)),
                    ann: self.apply_oform(ann),
                }
            }
            Forcing::SplitDep { x, a, body, ann } => {
                let (names, sub) = self.enter(&[(Ns::Term, x), (Ns::Proof, a)], || {
                    free_names(Node::Command(body))
                });
                Forcing::SplitDep {
                    x: names[0].clone(),
                    a: names[1].clone(),
                    body: Box::new(sub.apply_command(body)),
                    ann: self.apply_oform(ann),
                }
            }
            Forcing::TermStack { t, e, ann } => Forcing::TermStack {
                t: Box::new(self.apply_term(t)),
                e: Box::new(self.apply_context(e)),
                ann: self.apply_oform(ann),
            },
            Forcing::ProofStack { q, e, ann } => Forcing::ProofStack {
                q: Box::new(self.apply_proof(q)),
                e: Box::new(self.apply_context(e)),
                ann: self.apply_oform(ann),
            },
            Forcing::EqSplit { body, ann } => Forcing::EqSplit {
                body: Box::new(self.apply_command(body)),
                ann: self.apply_oform(ann),
            },
        }
    }

    pub fn apply_coterm(&self, pi: &Coterm) -> Coterm {
        match pi {
            Coterm::Stack { u, pi } => Coterm::Stack {
                u: Box::new(self.apply_term(u)),
                pi: Box::new(self.apply_coterm(pi)),
            },
            Coterm::MuTildeTerm { x, ty, body } => {
                let (names, sub) = self.enter(&[(Ns::Term, x)], || free_names(Node::Command(body)));
                Coterm::MuTildeTerm {
                    x: names[0].clone(),
                    ty: ty.clone(),
                    body: Box::new(sub.apply_command(body)),
                }
            }
        }
    }

    pub fn apply_command(&self, c: &Command) -> Command {
        if self.is_empty() {
            return c.clone();
        }
        match c {
            Command::Proof { p, e } => Command::cut(self.apply_proof(p), self.apply_context(e)),
            Command::Term { t, pi } => {
                Command::cut_term(self.apply_term(t), self.apply_coterm(pi))
            }
        }
    }

    pub fn apply_closure(&self, cl: &Closure) -> Closure {
        let binds: Vec<(Ns, &Name)> =
            cl.store.0.iter().map(|b| (binding_ns(b), &b.name)).collect();
        let (names, sub) = self.enter(&binds, || free_names(Node::Command(&cl.command)));
        let store = Store(
            cl.store
                .0
                .iter()
                .enumerate()
                .map(|(i, b)| Binding {
                    name: names[i].clone(),
                    body: match &b.body {
                        Storable::Proof(p) => Storable::Proof(sub.apply_proof(p)),
                        Storable::Context(e) => Storable::Context(sub.apply_context(e)),
                    },
                    ann: sub.apply_oform(&b.ann),
                })
                .collect(),
        );
        Closure::new(sub.apply_command(&cl.command), store)
    }

    pub fn apply_formula(&self, a: &Formula) -> Formula {
        if self.is_empty() {
            return a.clone();
        }
        match a {
            Formula::Top => Formula::Top,
            Formula::Bot => Formula::Bot,
            Formula::Eq(t, u) => Formula::eq(self.apply_term(t), self.apply_term(u)),
            Formula::And(a, b) => Formula::and(self.apply_formula(a), self.apply_formula(b)),
            Formula::Or(a, b) => Formula::or(self.apply_formula(a), self.apply_formula(b)),
            Formula::Pi { a, dom, cod } => {
                let (names, sub) = self.enter(&[(Ns::Proof, a)], || free_names(Node::Formula(cod)));
                Formula::Pi {
                    a: names[0].clone(),
                    dom: Box::new(self.apply_formula(dom)),
                    cod: Box::new(sub.apply_formula(cod)),
                }
            }
            Formula::Forall { x, ty, body } => {
                let (names, sub) = self.enter(&[(Ns::Term, x)], || free_names(Node::Formula(body)));
                Formula::Forall {
                    x: names[0].clone(),
                    ty: ty.clone(),
                    body: Box::new(sub.apply_formula(body)),
                }
            }
            Formula::Exists { x, ty, body } => {
                let (names, sub) = self.enter(&[(Ns::Term, x)], || free_names(Node::Formula(body)));
                Formula::Exists {
                    x: names[0].clone(),
                    ty: ty.clone(),
                    body: Box::new(sub.apply_formula(body)),
                }
            }
            Formula::Nu { t, x, f, body } => {
                let (names, sub) = self.enter(&[(Ns::Term, x), (Ns::Term, f)], || {
                    free_names(Node::Formula(body))
                });
                Formula::Nu {
                    t: Box::new(self.apply_term(t)),
                    x: names[0].clone(),
                    f: names[1].clone(),
                    body: Box::new(sub.apply_formula(body)),
                }
            }
        }
    }
}

// Convenience wrappers matching the spec operation names.

pub fn subst_term_in_term(t: &Term, x: &str, v: Term) -> Term {
    Subst::term(x, v).apply_term(t)
}
pub fn subst_term_in_proof(p: &Proof, x: &str, v: Term) -> Proof {
    Subst::term(x, v).apply_proof(p)
}
pub fn subst_term_in_command(c: &Command, x: &str, v: Term) -> Command {
    Subst::term(x, v).apply_command(c)
}
pub fn subst_term_in_formula(a: &Formula, x: &str, v: Term) -> Formula {
    Subst::term(x, v).apply_formula(a)
}
pub fn subst_proof_in_proof(p: &Proof, a: &str, q: Proof) -> Proof {
    Subst::proof(a, q).apply_proof(p)
}
pub fn subst_proof_in_command(c: &Command, a: &str, q: Proof) -> Command {
    Subst::proof(a, q).apply_command(c)
}
pub fn subst_proof_in_formula(f: &Formula, a: &str, q: Proof) -> Formula {
    Subst::proof(a, q).apply_formula(f)
}
pub fn subst_covar_in_command(c: &Command, alpha: &str, e: Context) -> Command {
    Subst::covar(alpha, e).apply_command(c)
}
