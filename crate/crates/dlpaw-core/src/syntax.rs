//! The multi-sorted abstract syntax of dLPA^ω: terms, proofs, contexts,
//! forcing contexts, coterms, commands, stores, closures, formulas and finite
//! types, together with the value grammars, the NEF classifier and the
//! well-formedness validators for (co-)delimited commands.
//!
//! Binders carry optional type annotations. Annotations are metadata: they are
//! ignored by `alpha_eq`, filled in by the type checker during elaboration,
//! and propagated by the machines so that every intermediate closure of a
//! typed run can be re-checked.

use std::collections::BTreeSet;

pub type Name = String;

/// The delimiter t̂p (a reserved co-variable).
pub const TP: &str = "tp";
/// The co-delimiter čtp (a reserved proof variable).
pub const CTP: &str = "ctp";
/// The distinguished NEF co-variable ⋆.
pub const STAR: &str = "star";

/// Reserved names are never renamed: binders binding them compare literally
/// under `alpha_eq`, which keeps the NEF classifier stable under alpha_eq.
pub fn is_reserved(n: &str) -> bool {
    n == TP || n == CTP || n == STAR
}

pub type OForm = Option<Box<Formula>>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FiniteType {
    Nat,
    Arrow(Box<FiniteType>, Box<FiniteType>),
}

impl FiniteType {
    pub fn arrow(dom: FiniteType, cod: FiniteType) -> FiniteType {
        FiniteType::Arrow(Box::new(dom), Box::new(cod))
    }
}

#[derive(Debug, Clone)]
pub enum Term {
    Var(Name),
    Zero,
    Succ(Box<Term>),
    /// rec(t; t0; (x,y). tS) — x the predecessor, y the recursive result.
    Rec {
        t: Box<Term>,
        t0: Box<Term>,
        x: Name,
        y: Name,
        ts: Box<Term>,
    },
    Lam {
        x: Name,
        ty: Option<FiniteType>,
        body: Box<Term>,
    },
    App(Box<Term>, Box<Term>),
    Wit(Box<Proof>),
}

impl Term {
    pub fn var(n: &str) -> Term {
        Term::Var(n.to_string())
    }
    pub fn succ(t: Term) -> Term {
        Term::Succ(Box::new(t))
    }
    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Box::new(f), Box::new(a))
    }
    pub fn wit(p: Proof) -> Term {
        Term::Wit(Box::new(p))
    }
    pub fn lam(x: &str, body: Term) -> Term {
        Term::Lam { x: x.to_string(), ty: None, body: Box::new(body) }
    }
    pub fn numeral(n: u64) -> Term {
        let mut t = Term::Zero;
        for _ in 0..n {
            t = Term::succ(t);
        }
        t
    }
    pub fn as_numeral(&self) -> Option<u64> {
        match self {
            Term::Zero => Some(0),
            Term::Succ(t) => t.as_numeral().map(|n| n + 1),
            _ => None,
        }
    }
    /// V_t ::= x | S^n(0) | λx.t
    pub fn is_value(&self) -> bool {
        match self {
            Term::Var(_) | Term::Lam { .. } => true,
            _ => self.as_numeral().is_some(),
        }
    }
}

/// Annotation for cofix(t;(b,x).p): the invariant formula A of ν^t_{x,f}A
/// (with the node's x and this f free in it) and the finite type of t.
#[derive(Debug, Clone)]
pub struct CofixAnn {
    pub f: Name,
    pub t_ty: FiniteType,
    pub body: Formula,
}

#[derive(Debug, Clone)]
pub enum Proof {
    Var(Name),
    Refl {
        ann: OForm,
    },
    Inj {
        i: u8,
        p: Box<Proof>,
        ann: OForm,
    },
    Pair(Box<Proof>, Box<Proof>),
    /// (t, p) inhabiting ∃x^T.A; ann is the ∃ formula.
    DepPair {
        t: Box<Term>,
        p: Box<Proof>,
        ann: OForm,
    },
    LamTerm {
        x: Name,
        ty: Option<FiniteType>,
        body: Box<Proof>,
    },
    LamProof {
        a: Name,
        dom: OForm,
        body: Box<Proof>,
    },
    Mu {
        alpha: Name,
        ann: OForm,
        body: Box<Command>,
    },
    /// μt̂p.c — delimited continuation; ann is the type of the whole proof.
    Shift {
        ann: OForm,
        body: Box<Command>,
    },
    /// ind(t; p0; (a,x). pS); motive (x, A) gives the conclusion A[t/x].
    Ind {
        t: Box<Term>,
        p0: Box<Proof>,
        a: Name,
        x: Name,
        ps: Box<Proof>,
        motive: Option<(Name, Box<Formula>)>,
    },
    /// cofix(t; (b,x). p)
    Cofix {
        t: Box<Term>,
        b: Name,
        x: Name,
        body: Box<Proof>,
        ann: Option<Box<CofixAnn>>,
    },
    /// (p : A) — surface ascription; absorbed by elaboration, erased by the machines.
    Ascribe(Box<Proof>, Box<Formula>),
    Sugar(Box<Sugar>),
}

impl Proof {
    pub fn var(n: &str) -> Proof {
        Proof::Var(n.to_string())
    }
    pub fn refl() -> Proof {
        Proof::Refl { ann: None }
    }
    pub fn inj(i: u8, p: Proof) -> Proof {
        Proof::Inj { i, p: Box::new(p), ann: None }
    }
    pub fn pair(p: Proof, q: Proof) -> Proof {
        Proof::Pair(Box::new(p), Box::new(q))
    }
    pub fn dep_pair(t: Term, p: Proof) -> Proof {
        Proof::DepPair { t: Box::new(t), p: Box::new(p), ann: None }
    }
    pub fn lam_term(x: &str, body: Proof) -> Proof {
        Proof::LamTerm { x: x.to_string(), ty: None, body: Box::new(body) }
    }
    pub fn lam_proof(a: &str, body: Proof) -> Proof {
        Proof::LamProof { a: a.to_string(), dom: None, body: Box::new(body) }
    }
    pub fn mu(alpha: &str, body: Command) -> Proof {
        Proof::Mu { alpha: alpha.to_string(), ann: None, body: Box::new(body) }
    }
    pub fn shift(body: Command) -> Proof {
        Proof::Shift { ann: None, body: Box::new(body) }
    }
    pub fn ascribe(p: Proof, a: Formula) -> Proof {
        Proof::Ascribe(Box::new(p), Box::new(a))
    }
    pub fn sugar(s: Sugar) -> Proof {
        Proof::Sugar(Box::new(s))
    }

    /// Strips surface ascriptions.
    pub fn strip(&self) -> &Proof {
        match self {
            Proof::Ascribe(p, _) => p.strip(),
            p => p,
        }
    }

    /// v ::= inj_i(V) | (V,V) | (V_t,V) | λx.p | λa.p | refl
    pub fn is_strong_value(&self) -> bool {
        match self {
            Proof::Refl { .. } | Proof::LamTerm { .. } | Proof::LamProof { .. } => true,
            Proof::Inj { p, .. } => p.is_weak_value(),
            Proof::Pair(p, q) => p.is_weak_value() && q.is_weak_value(),
            Proof::DepPair { t, p, .. } => t.is_value() && p.is_weak_value(),
            _ => false,
        }
    }

    /// V ::= a | v
    pub fn is_weak_value(&self) -> bool {
        matches!(self, Proof::Var(_)) || self.is_strong_value()
    }

    /// Storable: V | ind(V_t;…) | cofix(V_t;…)
    pub fn is_storable(&self) -> bool {
        match self {
            Proof::Ind { t, .. } | Proof::Cofix { t, .. } => t.is_value(),
            p => p.is_weak_value(),
        }
    }
}

/// Natural-deduction sugar of §2.5, eliminated by `macros::expand`.
#[derive(Debug, Clone)]
pub enum Sugar {
    Let { a: Name, def: Proof, body: Proof },
    Split { p: Proof, a1: Name, a2: Name, body: Proof },
    Case { p: Proof, a1: Name, p1: Proof, a2: Name, p2: Proof },
    Dest { p: Proof, x: Name, a: Name, body: Proof },
    Prf(Proof),
    Subst(Proof, Proof),
    Exfalso(Proof),
    Catch { alpha: Name, body: Proof },
    Throw { alpha: Name, arg: Proof },
    Proj { i: u8, p: Proof },
    /// Application p t ↦ μα.⟨p‖t·α⟩ (never NEF).
    AppT(Proof, Term),
    /// Application p q ↦ μα.⟨p‖q·α⟩ (never NEF).
    AppP(Proof, Proof),
}

#[derive(Debug, Clone)]
pub enum Context {
    Covar(Name),
    /// μ̃a.cτ — carries a trailing store, usually empty in source syntax.
    MuTilde {
        a: Name,
        ann: OForm,
        body: Box<Command>,
        store: Store,
    },
    /// μ̃čtp.c — co-delimited continuation (§3); ann is the type čtp refutes.
    CoShift {
        ann: OForm,
        body: Box<Command>,
    },
    Forcing(Forcing),
}

impl Context {
    pub fn covar(n: &str) -> Context {
        Context::Covar(n.to_string())
    }
    pub fn mu_tilde(a: &str, body: Command) -> Context {
        Context::MuTilde {
            a: a.to_string(),
            ann: None,
            body: Box::new(body),
            store: Store::empty(),
        }
    }
    pub fn co_shift(body: Command) -> Context {
        Context::CoShift { ann: None, body: Box::new(body) }
    }
    pub fn is_forcing(&self) -> bool {
        matches!(self, Context::Forcing(_))
    }
}

#[derive(Debug, Clone)]
pub enum Forcing {
    /// [] — the ⊥ context.
    Abort,
    /// μ̃[a1.c1 | a2.c2]; ann is the disjunction it refutes.
    Case {
        a1: Name,
        c1: Box<Command>,
        a2: Name,
        c2: Box<Command>,
        ann: OForm,
    },
    /// μ̃(a1,a2).c
    SplitPair {
        a1: Name,
        a2: Name,
        body: Box<Command>,
        ann: OForm,
    },
    /// μ̃(x,a).c
    SplitDep {
        x: Name,
        a: Name,
        body: Box<Command>,
        ann: OForm,
    },
    /// t·e; ann is the ∀ formula it refutes.
    TermStack {
        t: Box<Term>,
        e: Box<Context>,
        ann: OForm,
    },
    /// q·e; ann is the Π formula it refutes.
    ProofStack {
        q: Box<Proof>,
        e: Box<Context>,
        ann: OForm,
    },
    /// μ̃=.c; ann is the equality it refutes.
    EqSplit {
        body: Box<Command>,
        ann: OForm,
    },
}

impl Forcing {
    pub fn term_stack(t: Term, e: Context) -> Forcing {
        Forcing::TermStack { t: Box::new(t), e: Box::new(e), ann: None }
    }
    pub fn proof_stack(q: Proof, e: Context) -> Forcing {
        Forcing::ProofStack { q: Box::new(q), e: Box::new(e), ann: None }
    }
}

/// Co-terms for term-level commands (§3): π ::= t·π | μ̃x.c
#[derive(Debug, Clone)]
pub enum Coterm {
    Stack { u: Box<Term>, pi: Box<Coterm> },
    MuTildeTerm { x: Name, ty: Option<FiniteType>, body: Box<Command> },
}

impl Coterm {
    pub fn stack(u: Term, pi: Coterm) -> Coterm {
        Coterm::Stack { u: Box::new(u), pi: Box::new(pi) }
    }
    pub fn mu_tilde(x: &str, body: Command) -> Coterm {
        Coterm::MuTildeTerm { x: x.to_string(), ty: None, body: Box::new(body) }
    }
}

#[derive(Debug, Clone)]
pub enum Command {
    Proof { p: Box<Proof>, e: Box<Context> },
    Term { t: Box<Term>, pi: Box<Coterm> },
}

impl Command {
    pub fn cut(p: Proof, e: Context) -> Command {
        Command::Proof { p: Box::new(p), e: Box::new(e) }
    }
    pub fn cut_term(t: Term, pi: Coterm) -> Command {
        Command::Term { t: Box::new(t), pi: Box::new(pi) }
    }
}

#[derive(Debug, Clone)]
pub enum Storable {
    Proof(Proof),
    Context(Context),
}

#[derive(Debug, Clone)]
pub struct Binding {
    pub name: Name,
    pub body: Storable,
    /// Formula this binding was checked at (A for [a:=p], A of A^⊥⊥ for [α:=e]).
    pub ann: OForm,
}

#[derive(Debug, Clone, Default)]
pub struct Store(pub Vec<Binding>);

impl Store {
    pub fn empty() -> Store {
        Store(Vec::new())
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn domain(&self) -> BTreeSet<Name> {
        self.0.iter().map(|b| b.name.clone()).collect()
    }
    pub fn binds(&self, n: &str) -> bool {
        self.0.iter().any(|b| b.name == n)
    }
}

#[derive(Debug, Clone)]
pub struct Closure {
    pub command: Command,
    pub store: Store,
}

impl Closure {
    pub fn new(command: Command, store: Store) -> Closure {
        Closure { command, store }
    }
}

#[derive(Debug, Clone)]
pub enum Formula {
    Top,
    Bot,
    Eq(Box<Term>, Box<Term>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    /// Π(a:A).B
    Pi { a: Name, dom: Box<Formula>, cod: Box<Formula> },
    Forall { x: Name, ty: FiniteType, body: Box<Formula> },
    Exists { x: Name, ty: FiniteType, body: Box<Formula> },
    /// ν^t_{x,f} A — f may occur in A only in atoms f(u)=0.
    Nu { t: Box<Term>, x: Name, f: Name, body: Box<Formula> },
}

impl Formula {
    pub fn eq(t: Term, u: Term) -> Formula {
        Formula::Eq(Box::new(t), Box::new(u))
    }
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }
    pub fn pi(a: &str, dom: Formula, cod: Formula) -> Formula {
        Formula::Pi { a: a.to_string(), dom: Box::new(dom), cod: Box::new(cod) }
    }
    /// A → B, i.e. Π(a:A).B with a not free in B.
    pub fn imp(a: Formula, b: Formula) -> Formula {
        Formula::pi("_imp", a, b)
    }
    pub fn forall(x: &str, ty: FiniteType, body: Formula) -> Formula {
        Formula::Forall { x: x.to_string(), ty, body: Box::new(body) }
    }
    pub fn exists(x: &str, ty: FiniteType, body: Formula) -> Formula {
        Formula::Exists { x: x.to_string(), ty, body: Box::new(body) }
    }
    pub fn nu(t: Term, x: &str, f: &str, body: Formula) -> Formula {
        Formula::Nu {
            t: Box::new(t),
            x: x.to_string(),
            f: f.to_string(),
            body: Box::new(body),
        }
    }
}

// ---------------------------------------------------------------------------
// NEF classification (Fig. 1 NEF block).
//
// The distinguished ⋆ is the reserved co-variable name `star`; a NEF μ-binder
// must literally bind `star` and every co-variable occurring in NEF position
// must be ⋆ (shifts are NEF as a whole, their bodies follow the c_t̂p grammar).
// Stacks t·e / q·e are excluded. λx.p / λa.p have unrestricted bodies.
// ---------------------------------------------------------------------------

pub fn nef_proof(p: &Proof) -> bool {
    match p {
        Proof::Var(_) | Proof::Refl { .. } | Proof::LamTerm { .. } | Proof::LamProof { .. } => true,
        Proof::Inj { p, .. } => nef_proof(p),
        Proof::Pair(p, q) => nef_proof(p) && nef_proof(q),
        Proof::DepPair { p, .. } => nef_proof(p),
        Proof::Mu { alpha, body, .. } => alpha == STAR && nef_command(body),
        Proof::Shift { body, .. } => delimited_command(body),
        Proof::Ind { p0, ps, .. } => nef_proof(p0) && nef_proof(ps),
        Proof::Cofix { body, .. } => nef_proof(body),
        Proof::Ascribe(p, _) => nef_proof(p),
        Proof::Sugar(s) => nef_sugar(s),
    }
}

/// NEF-ness of un-expanded sugar, per the dPA^ω criterion: a macro form is NEF
/// when all its sub-proofs are (its expansion then satisfies `nef_proof`).
/// Applications and catch/throw are never NEF.
fn nef_sugar(s: &Sugar) -> bool {
    match s {
        Sugar::Let { def, body, .. } => nef_proof(def) && nef_proof(body),
        Sugar::Split { p, body, .. } => nef_proof(p) && nef_proof(body),
        Sugar::Case { p, p1, p2, .. } => nef_proof(p) && nef_proof(p1) && nef_proof(p2),
        Sugar::Dest { p, body, .. } => nef_proof(p) && nef_proof(body),
        Sugar::Prf(p) => nef_proof(p),
        Sugar::Subst(p, q) => nef_proof(p) && nef_proof(q),
        Sugar::Proj { p, .. } => nef_proof(p),
        Sugar::Exfalso(_)
        | Sugar::Catch { .. }
        | Sugar::Throw { .. }
        | Sugar::AppT(..)
        | Sugar::AppP(..) => false,
    }
}

pub fn nef_context(e: &Context) -> bool {
    match e {
        Context::Covar(alpha) => alpha == STAR,
        Context::MuTilde { body, store, .. } => nef_command(body) && store.0.is_empty(),
        Context::CoShift { .. } => false,
        Context::Forcing(f) => match f {
            Forcing::Case { c1, c2, .. } => nef_command(c1) && nef_command(c2),
            Forcing::SplitPair { body, .. } | Forcing::SplitDep { body, .. } => nef_command(body),
            Forcing::Abort
            | Forcing::TermStack { .. }
            | Forcing::ProofStack { .. }
            | Forcing::EqSplit { .. } => false,
        },
    }
}

pub fn nef_command(c: &Command) -> bool {
    match c {
        Command::Proof { p, e } => nef_proof(p) && nef_context(e),
        Command::Term { .. } => false,
    }
}

/// The spec-level classifier over any of the three NEF-bearing sorts.
pub enum NefNode<'a> {
    Proof(&'a Proof),
    Context(&'a Context),
    Command(&'a Command),
}

pub fn classify_nef(node: NefNode) -> bool {
    match node {
        NefNode::Proof(p) => nef_proof(p),
        NefNode::Context(e) => nef_context(e),
        NefNode::Command(c) => nef_command(c),
    }
}

// ---------------------------------------------------------------------------
// (Co-)delimited command validators.
//
// c_t̂p ::= ⟨p_N‖e_t̂p⟩ | ⟨p‖t̂p⟩ | ⟨t‖π_t̂p⟩ (§3)
// e_t̂p ::= μ̃a.c_t̂pτ | μ̃[a1.c_t̂p|a2.c'_t̂p] | μ̃(a1,a2).c_t̂p | μ̃(x,a).c_t̂p
// π_t̂p ::= t·π_t̂p | μ̃x.c_t̂p
//
// c_čtp ::= ⟨p_N‖e_čtp⟩ | ⟨t‖π_čtp⟩ | ⟨čtp‖e⟩ (same μ̃-forms, terminal ⟨čtp‖e⟩)
// ---------------------------------------------------------------------------

fn delimited_in(c: &Command, terminal: &mut dyn FnMut(&Command) -> bool, count: &mut usize) -> bool {
    if terminal(c) {
        *count += 1;
        return true;
    }
    match c {
        Command::Proof { p, e } => {
            if !nef_proof(p) {
                return false;
            }
            match e.as_ref() {
                Context::MuTilde { body, .. } => delimited_in(body, terminal, count),
                Context::Forcing(Forcing::Case { c1, c2, .. }) => {
                    // Exactly one branch is taken at runtime; each branch must
                    // re-establish the delimiter, so both must be delimited.
                    delimited_in(c1, terminal, count) && {
                        let mut n2 = 0;
                        delimited_in(c2, terminal, &mut n2)
                    }
                }
                Context::Forcing(Forcing::SplitPair { body, .. })
                | Context::Forcing(Forcing::SplitDep { body, .. }) => {
                    delimited_in(body, terminal, count)
                }
                _ => false,
            }
        }
        Command::Term { pi, .. } => {
            let mut pi = pi;
            loop {
                match pi.as_ref() {
                    Coterm::Stack { pi: rest, .. } => pi = rest,
                    Coterm::MuTildeTerm { body, .. } => {
                        return delimited_in(body, terminal, count)
                    }
                }
            }
        }
    }
}

/// Is `c` a well-formed c_t̂p body (terminal ⟨p‖t̂p⟩ reachable along the spine)?
pub fn delimited_command(c: &Command) -> bool {
    let mut count = 0;
    let ok = delimited_in(
        c,
        &mut |c| matches!(c, Command::Proof { e, .. } if matches!(e.as_ref(), Context::Covar(a) if a == TP)),
        &mut count,
    );
    ok && count >= 1
}

/// Is `c` a well-formed c_čtp body (terminal ⟨čtp‖e⟩ reachable along the spine)?
pub fn codelimited_command(c: &Command) -> bool {
    let mut count = 0;
    let ok = delimited_in(
        c,
        &mut |c| matches!(c, Command::Proof { p, .. } if matches!(p.strip(), Proof::Var(a) if a == CTP)),
        &mut count,
    );
    ok && count >= 1
}

/// Depth of nested shifts inside a NEF proof; > 1 is legal but unusual
/// (flagged with a warning by the front end).
pub fn shift_nesting_depth(p: &Proof) -> usize {
    fn cmd(c: &Command) -> usize {
        match c {
            Command::Proof { p, e } => {
                let pe = match e.as_ref() {
                    Context::MuTilde { body, .. } | Context::CoShift { body, .. } => cmd(body),
                    Context::Forcing(Forcing::Case { c1, c2, .. }) => cmd(c1).max(cmd(c2)),
                    Context::Forcing(Forcing::SplitPair { body, .. })
                    | Context::Forcing(Forcing::SplitDep { body, .. })
                    | Context::Forcing(Forcing::EqSplit { body, .. }) => cmd(body),
                    Context::Forcing(Forcing::TermStack { e, .. }) => {
                        cmd_ctx_stack(e)
                    }
                    Context::Forcing(Forcing::ProofStack { q, e, .. }) => {
                        shift_nesting_depth(q).max(cmd_ctx_stack(e))
                    }
                    _ => 0,
                };
                shift_nesting_depth(p).max(pe)
            }
            Command::Term { pi, .. } => match pi.as_ref() {
                Coterm::Stack { pi, .. } => cmd(&Command::Term {
                    t: Box::new(Term::Zero),
                    pi: pi.clone(),
                }),
                Coterm::MuTildeTerm { body, .. } => cmd(body),
            },
        }
    }
    fn cmd_ctx_stack(e: &Context) -> usize {
        match e {
            Context::MuTilde { body, .. } | Context::CoShift { body, .. } => cmd(body),
            _ => 0,
        }
    }
    match p {
        Proof::Shift { body, .. } => 1 + cmd(body),
        Proof::Mu { body, .. } => cmd(body),
        Proof::Inj { p, .. } | Proof::DepPair { p, .. } | Proof::Ascribe(p, _) => {
            shift_nesting_depth(p)
        }
        Proof::Pair(p, q) => shift_nesting_depth(p).max(shift_nesting_depth(q)),
        Proof::LamTerm { body, .. } | Proof::LamProof { body, .. } => shift_nesting_depth(body),
        Proof::Ind { p0, ps, .. } => shift_nesting_depth(p0).max(shift_nesting_depth(ps)),
        Proof::Cofix { body, .. } => shift_nesting_depth(body),
        _ => 0,
    }
}
