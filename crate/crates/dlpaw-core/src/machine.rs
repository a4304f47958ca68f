//! Big-step abstract machine: the one-step relation on closures, a fueled
//! driver, NEF sub-evaluation and term reduction.
//!
//! Each step implements exactly one reduction rule; rule names are reported
//! for tracing. Stores grow append-only except for fixpoint unfolding, which
//! temporarily detaches the suffix after the forced binding (it travels inside
//! the created μ̃ context and is grafted back on re-binding). Fresh names come
//! from a per-run [`NamePool`] seeded with every name of the initial closure:
//! since substitution never invents names, reserving each pick keeps every
//! allocation distinct from anything the run can still refer to — including
//! names held only by an enclosing sub-evaluation, which the nested closure
//! alone cannot reveal.
//!
//! Ascriptions `(p : A)` are erased on entry: they direct the type checker
//! and have no operational content.

use crate::names::{
    self, free_names_plain, subst_proof_in_proof, subst_term_in_command, subst_term_in_formula,
    subst_term_in_proof, subst_term_in_term, NamePool, Node, Subst,
};
use crate::store;
use crate::syntax::*;
use thiserror::Error;

pub const DEFAULT_FUEL: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalReason {
    /// ⟨V‖α⟩ with α unbound: an observable answer.
    ValueOnFreeCovar,
    /// A sub-evaluation delivered its value to the driver.
    Finished,
}

#[derive(Debug, Clone)]
pub enum StepOutcome {
    Next(Closure, &'static str),
    Normal(Closure, NormalReason),
    Stuck(Closure, String),
    FuelExhausted(Closure),
}

impl StepOutcome {
    pub fn closure(&self) -> &Closure {
        match self {
            StepOutcome::Next(cl, _)
            | StepOutcome::Normal(cl, _)
            | StepOutcome::Stuck(cl, _)
            | StepOutcome::FuelExhausted(cl) => cl,
        }
    }
    pub fn is_normal(&self) -> bool {
        matches!(self, StepOutcome::Normal(..))
    }
}

#[derive(Debug, Clone, Error)]
#[error("{message}")]
pub struct MachineError {
    pub message: String,
}

fn fail<T>(msg: impl Into<String>) -> Result<T, MachineError> {
    Err(MachineError { message: msg.into() })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub steps: u64,
    pub cofix_unfoldings: u64,
    pub ind_unfoldings: u64,
}

pub type TraceHook<'a> = &'a mut dyn FnMut(u64, &'static str, &Closure);

// -- ascription erasure -------------------------------------------------------

pub fn erase_term(t: &Term) -> Term {
    match t {
        Term::Var(_) | Term::Zero => t.clone(),
        Term::Succ(u) => Term::succ(erase_term(u)),
        Term::Rec { t, t0, x, y, ts } => Term::Rec {
            t: Box::new(erase_term(t)),
            t0: Box::new(erase_term(t0)),
            x: x.clone(),
            y: y.clone(),
            ts: Box::new(erase_term(ts)),
        },
        Term::Lam { x, ty, body } => Term::Lam {
            x: x.clone(),
            ty: ty.clone(),
            body: Box::new(erase_term(body)),
        },
        Term::App(f, a) => Term::app(erase_term(f), erase_term(a)),
        Term::Wit(p) => Term::wit(erase_proof(p)),
    }
}

pub fn erase_proof(p: &Proof) -> Proof {
    match p {
        Proof::Ascribe(inner, ann) => {
            // keep the ascription's information as the node annotation when
            // the node has a slot for it and none of its own
            let inner = erase_proof(inner);
            attach_ann(inner, ann)
        }
        Proof::Var(_) | Proof::Refl { .. } => p.clone(),
        Proof::Inj { i, p, ann } => Proof::Inj {
            i: *i,
            p: Box::new(erase_proof(p)),
            ann: ann.clone(),
        },
        Proof::Pair(p, q) => Proof::pair(erase_proof(p), erase_proof(q)),
        Proof::DepPair { t, p, ann } => Proof::DepPair {
            t: Box::new(erase_term(t)),
            p: Box::new(erase_proof(p)),
            ann: ann.clone(),
        },
        Proof::LamTerm { x, ty, body } => Proof::LamTerm {
            x: x.clone(),
            ty: ty.clone(),
            body: Box::new(erase_proof(body)),
        },
        Proof::LamProof { a, dom, body } => Proof::LamProof {
            a: a.clone(),
            dom: dom.clone(),
            body: Box::new(erase_proof(body)),
        },
        Proof::Mu { alpha, ann, body } => Proof::Mu {
            alpha: alpha.clone(),
            ann: ann.clone(),
            body: Box::new(erase_command(body)),
        },
        Proof::Shift { ann, body } => Proof::Shift {
            ann: ann.clone(),
            body: Box::new(erase_command(body)),
        },
        Proof::Ind { t, p0, a, x, ps, motive } => Proof::Ind {
            t: Box::new(erase_term(t)),
            p0: Box::new(erase_proof(p0)),
            a: a.clone(),
            x: x.clone(),
            ps: Box::new(erase_proof(ps)),
            motive: motive.clone(),
        },
        Proof::Cofix { t, b, x, body, ann } => Proof::Cofix {
            t: Box::new(erase_term(t)),
            b: b.clone(),
            x: x.clone(),
            body: Box::new(erase_proof(body)),
            ann: ann.clone(),
        },
        Proof::Sugar(_) => panic!("macro sugar must be expanded before evaluation"),
    }
}

fn attach_ann(p: Proof, ann: &Formula) -> Proof {
    let a = Some(Box::new(ann.clone()));
    match p {
        Proof::Refl { ann: None } => Proof::Refl { ann: a },
        Proof::Inj { i, p, ann: None } => Proof::Inj { i, p, ann: a },
        Proof::DepPair { t, p, ann: None } => Proof::DepPair { t, p, ann: a },
        Proof::Mu { alpha, ann: None, body } => Proof::Mu { alpha, ann: a, body },
        Proof::Shift { ann: None, body } => Proof::Shift { ann: a, body },
        other => other,
    }
}

pub fn erase_context(e: &Context) -> Context {
    match e {
        Context::Covar(_) => e.clone(),
        Context::MuTilde { a, ann, body, store } => Context::MuTilde {
            a: a.clone(),
            ann: ann.clone(),
            body: Box::new(erase_command(body)),
            store: erase_store(store),
        },
        Context::CoShift { ann, body } => Context::CoShift {
            ann: ann.clone(),
            body: Box::new(erase_command(body)),
        },
        Context::Forcing(f) => Context::Forcing(match f {
            Forcing::Abort => Forcing::Abort,
            Forcing::Case { a1, c1, a2, c2, ann } => Forcing::Case {
                a1: a1.clone(),
                c1: Box::new(erase_command(c1)),
                a2: a2.clone(),
                c2: Box::new(erase_command(c2)),
                ann: ann.clone(),
            },
            Forcing::SplitPair { a1, a2, body, ann } => Forcing::SplitPair {
                a1: a1.clone(),
                a2: a2.clone(),
                body: Box::new(erase_command(body)),
                ann: ann.clone(),
            },
            Forcing::SplitDep { x, a, body, ann } => Forcing::SplitDep {
                x: x.clone(),
                a: a.clone(),
                body: Box::new(erase_command(body)),
                ann: ann.clone(),
            },
            Forcing::TermStack { t, e, ann } => Forcing::TermStack {
                t: Box::new(erase_term(t)),
                e: Box::new(erase_context(e)),
                ann: ann.clone(),
            },
            Forcing::ProofStack { q, e, ann } => Forcing::ProofStack {
                q: Box::new(erase_proof(q)),
                e: Box::new(erase_context(e)),
                ann: ann.clone(),
            },
            Forcing::EqSplit { body, ann } => Forcing::EqSplit {
                body: Box::new(erase_command(body)),
                ann: ann.clone(),
            },
        }),
    }
}

pub fn erase_command(c: &Command) -> Command {
    match c {
        Command::Proof { p, e } => Command::cut(erase_proof(p), erase_context(e)),
        Command::Term { t, pi } => Command::cut_term(erase_term(t), erase_coterm(pi)),
    }
}

pub fn erase_coterm(pi: &Coterm) -> Coterm {
    match pi {
        Coterm::Stack { u, pi } => Coterm::stack(erase_term(u), erase_coterm(pi)),
        Coterm::MuTildeTerm { x, ty, body } => Coterm::MuTildeTerm {
            x: x.clone(),
            ty: ty.clone(),
            body: Box::new(erase_command(body)),
        },
    }
}

pub fn erase_store(s: &Store) -> Store {
    Store(
        s.0.iter()
            .map(|b| Binding {
                name: b.name.clone(),
                body: match &b.body {
                    Storable::Proof(p) => Storable::Proof(erase_proof(p)),
                    Storable::Context(e) => Storable::Context(erase_context(e)),
                },
                ann: b.ann.clone(),
            })
            .collect(),
    )
}

pub fn erase_closure(cl: &Closure) -> Closure {
    Closure::new(erase_command(&cl.command), erase_store(&cl.store))
}

// -- annotation plumbing ------------------------------------------------------

/// Formula of an elaborated proof readable off the node itself, if any.
/// Used to annotate the administrative bindings the machine creates.
pub fn shallow_type(p: &Proof) -> OForm {
    match p {
        Proof::Refl { ann }
        | Proof::Inj { ann, .. }
        | Proof::DepPair { ann, .. }
        | Proof::Mu { ann, .. }
        | Proof::Shift { ann, .. } => ann.clone(),
        Proof::Pair(p, q) => match (shallow_type(p), shallow_type(q)) {
            (Some(a), Some(b)) => Some(Box::new(Formula::and(*a, *b))),
            _ => None,
        },
        Proof::Ind { t, x, motive, .. } => motive
            .as_ref()
            .map(|(mx, m)| Box::new(subst_term_in_formula(m, mx, (**t).clone())))
            .or_else(|| {
                let _ = x;
                None
            }),
        Proof::Cofix { t, x, ann, .. } => ann.as_ref().map(|ca| {
            Box::new(Formula::Nu {
                t: t.clone(),
                x: x.clone(),
                f: ca.f.clone(),
                body: Box::new(ca.body.clone()),
            })
        }),
        Proof::Ascribe(_, a) => Some(a.clone()),
        _ => None,
    }
}

fn or_component(ann: &OForm, i: u8) -> OForm {
    match ann.as_deref() {
        Some(Formula::Or(a, b)) => Some(if i == 1 { a.clone() } else { b.clone() }),
        _ => None,
    }
}

fn and_components(ann: &OForm) -> (OForm, OForm) {
    match ann.as_deref() {
        Some(Formula::And(a, b)) => (Some(a.clone()), Some(b.clone())),
        _ => (None, None),
    }
}

fn exists_instance(ann: &OForm, vt: &Term) -> OForm {
    match ann.as_deref() {
        Some(Formula::Exists { x, body, .. }) => {
            Some(Box::new(subst_term_in_formula(body, x, vt.clone())))
        }
        _ => None,
    }
}

// -- the step function --------------------------------------------------------

struct Machine<'a> {
    fuel: &'a mut u64,
    stats: &'a mut Stats,
    /// Every name the run has seen or allocated; all fresh picks go through it.
    pool: NamePool,
}

/// True when the context belongs to the delimited class e_t̂p: it mentions the
/// reserved continuation t̂p (a bare t̂p co-variable included).
pub fn is_etp(e: &Context) -> bool {
    free_names_plain(Node::Context(e)).covars.contains(TP)
}

fn stuck(cl: &Closure, msg: impl Into<String>) -> StepOutcome {
    StepOutcome::Stuck(cl.clone(), msg.into())
}

impl<'a> Machine<'a> {
    fn new(fuel: &'a mut u64, stats: &'a mut Stats, pool: NamePool) -> Machine<'a> {
        Machine { fuel, stats, pool }
    }
}

impl Machine<'_> {
    fn spend(&mut self) -> bool {
        if *self.fuel == 0 {
            false
        } else {
            *self.fuel -= 1;
            true
        }
    }

    fn step(&mut self, cl: &Closure) -> StepOutcome {
        match &cl.command {
            Command::Proof { p, e } => self.step_proof(cl, p, e),
            Command::Term { t, pi } => self.step_term(cl, t, pi),
        }
    }

    fn step_proof(&mut self, cl: &Closure, p: &Proof, e: &Context) -> StepOutcome {
        let tau = &cl.store;
        match p {
            Proof::Shift { ann, body } => self.step_shift(cl, ann, body, e),
            Proof::Mu { alpha, ann, body } => {
                if is_etp(e) {
                    let c = names::subst_covar_in_command(body, alpha, e.clone());
                    StepOutcome::Next(Closure::new(c, tau.clone()), "mu-etp-subst")
                } else {
                    let binding = Binding {
                        name: alpha.clone(),
                        body: Storable::Context(e.clone()),
                        ann: ann.clone(),
                    };
                    let (st, cmd) = store::append_fresh(tau, &Store(vec![binding]), body, &mut self.pool);
                    StepOutcome::Next(Closure::new(cmd, st), "mu-bind")
                }
            }
            // call-by-value focusing and lazy storage for non-value proofs
            Proof::Inj { i, p: q, ann } if !q.is_weak_value() => {
                let a = self.pool.gensym("a");
                let inner = Command::cut(
                    Proof::Inj { i: *i, p: Box::new(Proof::var(&a)), ann: ann.clone() },
                    e.clone(),
                );
                let ctx = Context::MuTilde {
                    a: a.clone(),
                    ann: or_component(ann, *i).or_else(|| shallow_type(q)),
                    body: Box::new(inner),
                    store: Store::empty(),
                };
                StepOutcome::Next(
                    Closure::new(Command::cut((**q).clone(), ctx), tau.clone()),
                    "inj-focus",
                )
            }
            Proof::Pair(p1, p2) if !(p1.is_weak_value() && p2.is_weak_value()) => {
                let a1 = self.pool.gensym("a1");
                let a2 = self.pool.gensym("a2");
                let inner = Command::cut(
                    Proof::pair(Proof::var(&a1), Proof::var(&a2)),
                    e.clone(),
                );
                let ctx2 = Context::MuTilde {
                    a: a2,
                    ann: shallow_type(p2),
                    body: Box::new(inner),
                    store: Store::empty(),
                };
                let ctx1 = Context::MuTilde {
                    a: a1,
                    ann: shallow_type(p1),
                    body: Box::new(Command::cut((**p2).clone(), ctx2)),
                    store: Store::empty(),
                };
                StepOutcome::Next(
                    Closure::new(Command::cut((**p1).clone(), ctx1), tau.clone()),
                    "pair-focus",
                )
            }
            Proof::DepPair { t, p: q, ann } if !t.is_value() => {
                self.reduce_in_proof_position(cl, t, e, |vt| Proof::DepPair {
                    t: Box::new(vt),
                    p: q.clone(),
                    ann: ann.clone(),
                })
            }
            Proof::DepPair { t, p: q, ann } if !q.is_weak_value() => {
                let a = self.pool.gensym("a");
                let inner = Command::cut(
                    Proof::DepPair {
                        t: t.clone(),
                        p: Box::new(Proof::var(&a)),
                        ann: ann.clone(),
                    },
                    e.clone(),
                );
                let ctx = Context::MuTilde {
                    a,
                    ann: exists_instance(ann, t).or_else(|| shallow_type(q)),
                    body: Box::new(inner),
                    store: Store::empty(),
                };
                StepOutcome::Next(
                    Closure::new(Command::cut((**q).clone(), ctx), tau.clone()),
                    "dep-pair-focus",
                )
            }
            Proof::Cofix { t, b, x, body, ann } if !t.is_value() => {
                self.reduce_in_proof_position(cl, t, e, |vt| Proof::Cofix {
                    t: Box::new(vt),
                    b: b.clone(),
                    x: x.clone(),
                    body: body.clone(),
                    ann: ann.clone(),
                })
            }
            Proof::Cofix { .. } => {
                let a = self.pool.gensym("a");
                let mut st = tau.clone();
                st.0.push(Binding {
                    name: a.clone(),
                    body: Storable::Proof(p.clone()),
                    ann: shallow_type(p),
                });
                StepOutcome::Next(
                    Closure::new(Command::cut(Proof::var(&a), e.clone()), st),
                    "cofix-store",
                )
            }
            Proof::Ind { t, p0, a: ih, x, ps, motive } if !t.is_value() => {
                self.reduce_in_proof_position(cl, t, e, |vt| Proof::Ind {
                    t: Box::new(vt),
                    p0: p0.clone(),
                    a: ih.clone(),
                    x: x.clone(),
                    ps: ps.clone(),
                    motive: motive.clone(),
                })
            }
            Proof::Ind { .. } => {
                let a = self.pool.gensym("a");
                let mut st = tau.clone();
                st.0.push(Binding {
                    name: a.clone(),
                    body: Storable::Proof(p.clone()),
                    ann: shallow_type(p),
                });
                StepOutcome::Next(
                    Closure::new(Command::cut(Proof::var(&a), e.clone()), st),
                    "ind-store",
                )
            }
            Proof::Ascribe(..) => {
                // erased on entry; appearing here means a caller skipped erase
                StepOutcome::Next(
                    Closure::new(Command::cut(erase_proof(p), e.clone()), tau.clone()),
                    "ascription-erase",
                )
            }
            Proof::Sugar(_) => stuck(cl, "macro sugar reached the machine; run expand first"),
            _ => {
                debug_assert!(p.is_weak_value());
                self.step_value(cl, p, e)
            }
        }
    }

    /// ⟨μt̂p.c‖e⟩: step the inner command against the shared store; release
    /// when it stalls on the t̂p continuation.
    fn step_shift(
        &mut self,
        cl: &Closure,
        ann: &OForm,
        body: &Command,
        e: &Context,
    ) -> StepOutcome {
        if let Command::Proof { p, e: inner_e } = body {
            if matches!(inner_e.as_ref(), Context::Covar(a) if a == TP) && p.is_weak_value() {
                return StepOutcome::Next(
                    Closure::new(Command::cut((**p).clone(), e.clone()), cl.store.clone()),
                    "shift-release",
                );
            }
        }
        let inner = Closure::new(body.clone(), cl.store.clone());
        match self.step(&inner) {
            StepOutcome::Next(cl2, _) => StepOutcome::Next(
                Closure::new(
                    Command::cut(
                        Proof::Shift { ann: ann.clone(), body: Box::new(cl2.command) },
                        e.clone(),
                    ),
                    cl2.store,
                ),
                "shift-step",
            ),
            StepOutcome::Normal(cl2, _) => stuck(
                &cl2,
                "delimited command finished away from its t̂p continuation",
            ),
            other => other,
        }
    }

    /// p is a weak value.
    fn step_value(&mut self, cl: &Closure, p: &Proof, e: &Context) -> StepOutcome {
        let tau = &cl.store;
        match e {
            Context::Covar(alpha) => match store::lookup(tau, alpha) {
                Some((_, b)) => match &b.body {
                    Storable::Context(e2) => StepOutcome::Next(
                        Closure::new(Command::cut(p.clone(), e2.clone()), tau.clone()),
                        "covar-lookup",
                    ),
                    Storable::Proof(_) => stuck(cl, format!("co-variable {alpha} bound to a proof")),
                },
                None => StepOutcome::Normal(cl.clone(), NormalReason::ValueOnFreeCovar),
            },
            Context::MuTilde { a, ann, body, store: tail } => {
                let binder = Binding {
                    name: a.clone(),
                    body: Storable::Proof(p.clone()),
                    ann: ann.clone(),
                };
                let (st, cmd) = store::append_regraft(tau, binder, tail, body, &mut self.pool);
                StepOutcome::Next(Closure::new(cmd, st), "value-bind")
            }
            Context::CoShift { ann, body } => {
                if let Command::Proof { p: inner_p, e: inner_e } = body.as_ref() {
                    if matches!(inner_p.strip(), Proof::Var(a) if a == CTP) {
                        return StepOutcome::Next(
                            Closure::new(
                                Command::cut(p.clone(), inner_e.as_ref().clone()),
                                tau.clone(),
                            ),
                            "coshift-release",
                        );
                    }
                }
                let inner = Closure::new(body.as_ref().clone(), tau.clone());
                match self.step(&inner) {
                    StepOutcome::Next(cl2, _) => StepOutcome::Next(
                        Closure::new(
                            Command::cut(
                                p.clone(),
                                Context::CoShift { ann: ann.clone(), body: Box::new(cl2.command) },
                            ),
                            cl2.store,
                        ),
                        "coshift-step",
                    ),
                    StepOutcome::Normal(cl2, _) => stuck(
                        &cl2,
                        "co-delimited command finished away from its čtp hole",
                    ),
                    other => other,
                }
            }
            Context::Forcing(f) => self.step_forcing(cl, p, f),
        }
    }

    fn step_forcing(&mut self, cl: &Closure, p: &Proof, f: &Forcing) -> StepOutcome {
        let tau = &cl.store;
        match (p, f) {
            // lookup: forcing contexts trigger stored values and fixpoints
            (Proof::Var(a), _) => self.force_variable(cl, a, f),
            (Proof::Inj { i, p: v, .. }, Forcing::Case { a1, c1, a2, c2, ann }) => {
                let (name, cmd) = if *i == 1 { (a1, c1) } else { (a2, c2) };
                let binding = Binding {
                    name: name.clone(),
                    body: Storable::Proof((**v).clone()),
                    ann: or_component(ann, *i).or_else(|| shallow_type(v)),
                };
                let (st, cmd) = store::append_fresh(tau, &Store(vec![binding]), cmd, &mut self.pool);
                StepOutcome::Next(Closure::new(cmd, st), "case-elim")
            }
            (Proof::Pair(v1, v2), Forcing::SplitPair { a1, a2, body, ann }) => {
                let (ann1, ann2) = and_components(ann);
                let bindings = vec![
                    Binding {
                        name: a1.clone(),
                        body: Storable::Proof((**v1).clone()),
                        ann: ann1.or_else(|| shallow_type(v1)),
                    },
                    Binding {
                        name: a2.clone(),
                        body: Storable::Proof((**v2).clone()),
                        ann: ann2.or_else(|| shallow_type(v2)),
                    },
                ];
                let (st, cmd) = store::append_fresh(tau, &Store(bindings), body, &mut self.pool);
                StepOutcome::Next(Closure::new(cmd, st), "pair-elim")
            }
            (Proof::DepPair { t, p: v, .. }, Forcing::SplitDep { x, a, body, ann }) => {
                let cmd = subst_term_in_command(body, x, (**t).clone());
                let binding = Binding {
                    name: a.clone(),
                    body: Storable::Proof((**v).clone()),
                    ann: exists_instance(ann, t).or_else(|| shallow_type(v)),
                };
                let (st, cmd) = store::append_fresh(tau, &Store(vec![binding]), &cmd, &mut self.pool);
                StepOutcome::Next(Closure::new(cmd, st), "dep-pair-elim")
            }
            (Proof::Refl { .. }, Forcing::EqSplit { body, .. }) => {
                StepOutcome::Next(Closure::new(body.as_ref().clone(), tau.clone()), "refl-elim")
            }
            (Proof::LamTerm { x, body, .. }, Forcing::TermStack { t, e, .. }) => {
                if t.is_value() {
                    let p2 = subst_term_in_proof(body, x, (**t).clone());
                    StepOutcome::Next(
                        Closure::new(Command::cut(p2, (**e).clone()), tau.clone()),
                        "beta-term",
                    )
                } else {
                    match self.reduce_term_mut(t, tau) {
                        Ok((vt, st)) => {
                            let f2 = Forcing::TermStack {
                                t: Box::new(vt),
                                e: e.clone(),
                                ann: None,
                            };
                            StepOutcome::Next(
                                Closure::new(
                                    Command::cut(p.clone(), Context::Forcing(f2)),
                                    st,
                                ),
                                "stack-head-reduce",
                            )
                        }
                        Err(err) => stuck(cl, err.message),
                    }
                }
            }
            (Proof::LamProof { a, dom, body }, Forcing::ProofStack { q, e, .. }) => {
                if nef_proof(q) {
                    // route the argument through the delimited continuation so
                    // dependencies in the codomain stay observable
                    let inner = Command::cut(
                        (**q).clone(),
                        Context::MuTilde {
                            a: a.clone(),
                            ann: dom.clone(),
                            body: Box::new(Command::cut(
                                (**body).clone(),
                                Context::covar(TP),
                            )),
                            store: Store::empty(),
                        },
                    );
                    StepOutcome::Next(
                        Closure::new(
                            Command::cut(Proof::shift(inner), (**e).clone()),
                            tau.clone(),
                        ),
                        "beta-proof-nef",
                    )
                } else {
                    let ctx = Context::MuTilde {
                        a: a.clone(),
                        ann: dom.clone(),
                        body: Box::new(Command::cut((**body).clone(), (**e).clone())),
                        store: Store::empty(),
                    };
                    StepOutcome::Next(
                        Closure::new(Command::cut((**q).clone(), ctx), tau.clone()),
                        "beta-proof",
                    )
                }
            }
            _ => stuck(
                cl,
                format!(
                    "no rule for value against this forcing context ({} vs {})",
                    head_of_proof(p),
                    head_of_forcing(f)
                ),
            ),
        }
    }

    /// ⟨a‖f⟩ with a bound in the store: deliver the value or unfold the
    /// stored fixpoint, carrying the store suffix inside the rebinding μ̃.
    fn force_variable(&mut self, cl: &Closure, a: &str, f: &Forcing) -> StepOutcome {
        match force_lookup(&cl.store, a, f, &mut self.pool) {
            Ok((cmd, st, rule)) => {
                match rule {
                    "cofix-unfold" => self.stats.cofix_unfoldings += 1,
                    "ind-zero" | "ind-succ" => self.stats.ind_unfoldings += 1,
                    _ => {}
                }
                StepOutcome::Next(Closure::new(cmd, st), rule)
            }
            Err(msg) => stuck(cl, msg),
        }
    }

    /// Terms-block congruence: reduce a term sitting in a proof position
    /// (C_t contexts) and retry with the value plugged back in.
    fn reduce_in_proof_position(
        &mut self,
        cl: &Closure,
        t: &Term,
        e: &Context,
        rebuild: impl FnOnce(Term) -> Proof,
    ) -> StepOutcome {
        match self.reduce_term_mut(t, &cl.store) {
            Ok((vt, st)) => StepOutcome::Next(
                Closure::new(Command::cut(rebuild(vt), e.clone()), st),
                "term-reduce",
            ),
            Err(err) => stuck(cl, err.message),
        }
    }

    fn step_term(&mut self, cl: &Closure, t: &Term, pi: &Coterm) -> StepOutcome {
        let tau = &cl.store;
        if !t.is_value() {
            return match self.reduce_term_mut(t, tau) {
                Ok((vt, st)) => StepOutcome::Next(
                    Closure::new(Command::cut_term(vt, pi.clone()), st),
                    "term-reduce",
                ),
                Err(err) => stuck(cl, err.message),
            };
        }
        match pi {
            Coterm::MuTildeTerm { x, body, .. } => {
                let cmd = subst_term_in_command(body, x, t.clone());
                StepOutcome::Next(Closure::new(cmd, tau.clone()), "term-bind")
            }
            Coterm::Stack { u, pi } => match t {
                Term::Lam { x, body, .. } => {
                    if u.is_value() {
                        let t2 = subst_term_in_term(body, x, (**u).clone());
                        StepOutcome::Next(
                            Closure::new(Command::cut_term(t2, (**pi).clone()), tau.clone()),
                            "beta-term-stack",
                        )
                    } else {
                        match self.reduce_term_mut(u, tau) {
                            Ok((vu, st)) => StepOutcome::Next(
                                Closure::new(
                                    Command::cut_term(
                                        t.clone(),
                                        Coterm::stack(vu, (**pi).clone()),
                                    ),
                                    st,
                                ),
                                "stack-arg-reduce",
                            ),
                            Err(err) => stuck(cl, err.message),
                        }
                    }
                }
                _ => stuck(cl, "term stack applied to a non-function value"),
            },
        }
    }

    // -- term reduction -------------------------------------------------------

    fn reduce_term_mut(&mut self, t: &Term, tau: &Store) -> Result<(Term, Store), MachineError> {
        if t.is_value() {
            return Ok((t.clone(), tau.clone()));
        }
        if !self.spend() {
            return fail("fuel exhausted while reducing a term");
        }
        match t {
            Term::Succ(u) => {
                let (vu, st) = self.reduce_term_mut(u, tau)?;
                Ok((Term::succ(vu), st))
            }
            Term::App(f, a) => {
                let (vf, st) = self.reduce_term_mut(f, tau)?;
                let (va, st) = self.reduce_term_mut(a, &st)?;
                match vf {
                    Term::Lam { x, body, .. } => {
                        self.reduce_term_mut(&subst_term_in_term(&body, &x, va), &st)
                    }
                    Term::Var(x) => fail(format!("applying the free term variable {x}")),
                    _ => fail("applying a non-function term"),
                }
            }
            Term::Rec { t, t0, x, y, ts } => {
                let (vt, st) = self.reduce_term_mut(t, tau)?;
                match vt.as_numeral() {
                    Some(0) => self.reduce_term_mut(t0, &st),
                    Some(n) => {
                        let pred = Term::numeral(n - 1);
                        let rec_pred = Term::Rec {
                            t: Box::new(pred.clone()),
                            t0: t0.clone(),
                            x: x.clone(),
                            y: y.clone(),
                            ts: ts.clone(),
                        };
                        let body = Subst::term(x, pred)
                            .add_term(y, rec_pred)
                            .apply_term(ts);
                        self.reduce_term_mut(&body, &st)
                    }
                    None => fail("recursor applied to a non-numeral"),
                }
            }
            Term::Wit(p) => {
                let (v, st) = self.run_nef_mut(p, tau)?;
                self.force_witness(&v, &st)
            }
            Term::Var(_) | Term::Zero | Term::Lam { .. } => unreachable!("values handled above"),
        }
    }

    /// Extract the term component of a (possibly store-referenced, possibly
    /// lazily unfolded) dependent pair.
    fn force_witness(&mut self, v: &Proof, tau: &Store) -> Result<(Term, Store), MachineError> {
        if let Proof::DepPair { t, .. } = v.strip() {
            if t.is_value() {
                return Ok(((**t).clone(), tau.clone()));
            }
        }
        let alpha = self.pool.gensym("'wit");
        let x = self.pool.gensym("x");
        let b = self.pool.gensym("b");
        let rebuilt = Proof::dep_pair(Term::var(&x), Proof::var(&b));
        let cmd = Command::cut(
            v.clone(),
            Context::Forcing(Forcing::SplitDep {
                x: x.clone(),
                a: b,
                body: Box::new(Command::cut(rebuilt, Context::covar(&alpha))),
                ann: None,
            }),
        );
        let out = self.run_loop(Closure::new(cmd, tau.clone()), None);
        match out {
            StepOutcome::Normal(cl, _) => match &cl.command {
                Command::Proof { p, e }
                    if matches!(e.as_ref(), Context::Covar(k) if *k == alpha) =>
                {
                    match p.strip() {
                        Proof::DepPair { t, .. } => Ok(((**t).clone(), cl.store)),
                        _ => fail("witness extraction finished on a non-pair"),
                    }
                }
                _ => fail("witness extraction escaped its continuation"),
            },
            StepOutcome::Stuck(_, msg) => fail(format!("witness extraction stuck: {msg}")),
            StepOutcome::FuelExhausted(_) => fail("fuel exhausted while extracting a witness"),
            StepOutcome::Next(..) => unreachable!("run_loop returns terminal outcomes"),
        }
    }

    fn run_nef_mut(&mut self, p: &Proof, tau: &Store) -> Result<(Proof, Store), MachineError> {
        if !nef_proof(p) {
            return fail("NEF evaluation of a non-NEF proof");
        }
        if p.is_weak_value() {
            return Ok((p.clone(), tau.clone()));
        }
        let alpha = self.pool.gensym("'nef");
        let cmd = Command::cut(p.clone(), Context::covar(&alpha));
        match self.run_loop(Closure::new(cmd, tau.clone()), None) {
            StepOutcome::Normal(cl, _) => match &cl.command {
                Command::Proof { p, e }
                    if matches!(e.as_ref(), Context::Covar(k) if *k == alpha) =>
                {
                    Ok(((**p).clone(), cl.store))
                }
                _ => fail("NEF evaluation escaped its continuation"),
            },
            StepOutcome::Stuck(_, msg) => fail(format!("NEF evaluation stuck: {msg}")),
            StepOutcome::FuelExhausted(_) => fail("fuel exhausted during NEF evaluation"),
            StepOutcome::Next(..) => unreachable!("run_loop returns terminal outcomes"),
        }
    }

    fn run_loop(&mut self, cl: Closure, mut hook: Option<TraceHook>) -> StepOutcome {
        let mut cur = cl;
        loop {
            if !self.spend() {
                return StepOutcome::FuelExhausted(cur);
            }
            match self.step(&cur) {
                StepOutcome::Next(next, rule) => {
                    self.stats.steps += 1;
                    if let Some(h) = hook.as_mut() {
                        h(self.stats.steps, rule, &next);
                    }
                    cur = next;
                }
                terminal => return terminal,
            }
        }
    }
}

/// Lookup step for ⟨a‖f⟩: deliver the stored value or unfold the stored
/// fixpoint, carrying the store suffix inside the rebinding μ̃. Shared by both
/// machines; the rule name tells the caller what happened ("var-lookup",
/// "cofix-unfold", "ind-zero", "ind-succ").
pub(crate) fn force_lookup(
    tau: &Store,
    a: &str,
    f: &Forcing,
    pool: &mut NamePool,
) -> Result<(Command, Store, &'static str), String> {
    let Some((prefix, binding, suffix)) = store::lookup_split(tau, a) else {
        return Err(format!("unbound proof variable {a} under a forcing context"));
    };
    let stored = match &binding.body {
        Storable::Proof(p) => p,
        Storable::Context(_) => return Err(format!("proof variable {a} bound to a context")),
    };
    if stored.is_weak_value() {
        return Ok((
            Command::cut(stored.clone(), Context::Forcing(f.clone())),
            tau.clone(),
            "var-lookup",
        ));
    }
    // the unfolded value lands on a fresh local binder; the original name and
    // the store suffix re-enter through the μ̃'s carried tail, unrenamed, so
    // references to them elsewhere in the store stay valid. Until then they
    // are detached: no new store binder may take their names.
    let g = pool.gensym(&format!("{a}0"));
    pool.note_detached(a);
    for b in &suffix.0 {
        pool.note_detached(&b.name);
    }
    let rebind = |body_cmd: Command| {
        let mut tail = vec![Binding {
            name: a.to_string(),
            body: Storable::Proof(Proof::var(&g)),
            ann: binding.ann.clone(),
        }];
        tail.extend(suffix.0.iter().cloned());
        Context::MuTilde {
            a: g.clone(),
            ann: binding.ann.clone(),
            body: Box::new(body_cmd),
            store: Store(tail),
        }
    };
    let retry = Command::cut(Proof::var(a), Context::Forcing(f.clone()));
    match stored {
        Proof::Cofix { t, b, x, body, ann } => {
            let b2 = pool.gensym(&format!("{b}0"));
            let y = pool.gensym("y");
            let unfolding = subst_proof_in_proof(
                &subst_term_in_proof(body, x, (**t).clone()),
                b,
                Proof::var(&b2),
            );
            let relauncher = Proof::LamTerm {
                x: y.clone(),
                ty: ann.as_ref().map(|ca| ca.t_ty.clone()),
                body: Box::new(Proof::Cofix {
                    t: Box::new(Term::var(&y)),
                    b: b.clone(),
                    x: x.clone(),
                    body: body.clone(),
                    ann: ann.clone(),
                }),
            };
            let relauncher_ann = ann.as_ref().map(|ca| {
                Box::new(Formula::forall(
                    &y,
                    ca.t_ty.clone(),
                    Formula::Nu {
                        t: Box::new(Term::var(&y)),
                        x: x.clone(),
                        f: ca.f.clone(),
                        body: Box::new(ca.body.clone()),
                    },
                ))
            });
            let mut st = prefix;
            st.0.push(Binding {
                name: b2,
                body: Storable::Proof(relauncher),
                ann: relauncher_ann,
            });
            Ok((Command::cut(unfolding, rebind(retry)), st, "cofix-unfold"))
        }
        Proof::Ind { t, p0, a: ih, x, ps, motive } => match t.as_numeral() {
            Some(0) => Ok((
                Command::cut((**p0).clone(), rebind(retry)),
                prefix,
                "ind-zero",
            )),
            Some(n) => {
                let pred = Term::numeral(n - 1);
                let b2 = pool.gensym(&format!("{ih}0"));
                let unfolding = subst_proof_in_proof(
                    &subst_term_in_proof(ps, x, pred.clone()),
                    ih,
                    Proof::var(&b2),
                );
                let pred_inst = Proof::Ind {
                    t: Box::new(pred.clone()),
                    p0: p0.clone(),
                    a: ih.clone(),
                    x: x.clone(),
                    ps: ps.clone(),
                    motive: motive.clone(),
                };
                let pred_ann = motive
                    .as_ref()
                    .map(|(mx, m)| Box::new(subst_term_in_formula(m, mx, pred.clone())));
                let mut st = prefix;
                st.0.push(Binding {
                    name: b2,
                    body: Storable::Proof(pred_inst),
                    ann: pred_ann,
                });
                Ok((Command::cut(unfolding, rebind(retry)), st, "ind-succ"))
            }
            None => Err("inductive fixpoint forced on a non-numeral index".into()),
        },
        _ => Err(format!("stored body of {a} is neither a value nor a fixpoint")),
    }
}

/// Chase store references inside a final answer so results from different
/// runs are comparable: the machines allocate administrative bindings with
/// run-specific names, but the values they denote must coincide.
pub fn resolve(p: &Proof, tau: &Store) -> Proof {
    // depth bound defends against rebinding cycles in hand-built stores
    resolve_bounded(p, tau, tau.len() + 1)
}

fn resolve_bounded(p: &Proof, tau: &Store, depth: usize) -> Proof {
    if depth == 0 {
        return p.clone();
    }
    match p.strip() {
        Proof::Var(a) => match store::lookup(tau, a) {
            Some((_, b)) => match &b.body {
                Storable::Proof(q) if q.is_weak_value() => resolve_bounded(q, tau, depth - 1),
                _ => p.clone(),
            },
            None => p.clone(),
        },
        Proof::Inj { i, p: q, ann } => Proof::Inj {
            i: *i,
            p: Box::new(resolve_bounded(q, tau, depth)),
            ann: ann.clone(),
        },
        Proof::Pair(a, b) => {
            Proof::pair(resolve_bounded(a, tau, depth), resolve_bounded(b, tau, depth))
        }
        Proof::DepPair { t, p: q, ann } => Proof::DepPair {
            t: t.clone(),
            p: Box::new(resolve_bounded(q, tau, depth)),
            ann: ann.clone(),
        },
        other => other.clone(),
    }
}

fn head_of_proof(p: &Proof) -> &'static str {
    match p {
        Proof::Var(_) => "variable",
        Proof::Refl { .. } => "refl",
        Proof::Inj { .. } => "injection",
        Proof::Pair(..) => "pair",
        Proof::DepPair { .. } => "dependent pair",
        Proof::LamTerm { .. } => "term abstraction",
        Proof::LamProof { .. } => "proof abstraction",
        Proof::Mu { .. } => "mu",
        Proof::Shift { .. } => "delimited mu",
        Proof::Ind { .. } => "inductive fixpoint",
        Proof::Cofix { .. } => "coinductive fixpoint",
        Proof::Ascribe(..) => "ascription",
        Proof::Sugar(_) => "sugar",
    }
}

fn head_of_forcing(f: &Forcing) -> &'static str {
    match f {
        Forcing::Abort => "[]",
        Forcing::Case { .. } => "case split",
        Forcing::SplitPair { .. } => "pair split",
        Forcing::SplitDep { .. } => "dependent split",
        Forcing::TermStack { .. } => "term stack",
        Forcing::ProofStack { .. } => "proof stack",
        Forcing::EqSplit { .. } => "equality split",
    }
}

// -- public API --------------------------------------------------------------

pub fn step(cl: &Closure) -> StepOutcome {
    let mut fuel = DEFAULT_FUEL;
    let mut stats = Stats::default();
    let pool = NamePool::seeded(Node::Closure(cl));
    Machine::new(&mut fuel, &mut stats, pool).step(cl)
}

pub fn run(cl: &Closure, fuel: u64) -> (StepOutcome, Stats) {
    run_with_trace(cl, fuel, None)
}

pub fn run_with_trace(cl: &Closure, fuel: u64, hook: Option<TraceHook>) -> (StepOutcome, Stats) {
    let mut fuel = fuel;
    let mut stats = Stats::default();
    let cl = erase_closure(cl);
    let pool = NamePool::seeded(Node::Closure(&cl));
    let out = Machine::new(&mut fuel, &mut stats, pool).run_loop(cl, hook);
    (out, stats)
}

/// Evaluate a NEF proof to its weak value against a fresh continuation.
pub fn run_nef(p: &Proof, tau: &Store, fuel: u64) -> Result<(Proof, Store), MachineError> {
    let mut fuel = fuel;
    let mut stats = Stats::default();
    let p = erase_proof(p);
    let tau = erase_store(tau);
    let mut pool = NamePool::seeded(Node::Proof(&p));
    pool.absorb(Node::Store(&tau));
    Machine::new(&mut fuel, &mut stats, pool).run_nef_mut(&p, &tau)
}

/// Reduce a term to a term value, threading the store (wit-triggered NEF
/// evaluation can extend it).
pub fn reduce_term(t: &Term, tau: &Store, fuel: u64) -> Result<(Term, Store), MachineError> {
    let (v, tau, _) = reduce_term_stats(t, tau, fuel)?;
    Ok((v, tau))
}

/// Like [`reduce_term`] but also reports step statistics, so callers can
/// observe how many (co)fixpoint unfoldings a query actually performed.
pub fn reduce_term_stats(
    t: &Term,
    tau: &Store,
    fuel: u64,
) -> Result<(Term, Store, Stats), MachineError> {
    let mut fuel = fuel;
    let mut stats = Stats::default();
    let t = erase_term(t);
    let tau = erase_store(tau);
    let mut pool = NamePool::seeded(Node::Term(&t));
    pool.absorb(Node::Store(&tau));
    let (v, tau) = Machine::new(&mut fuel, &mut stats, pool).reduce_term_mut(&t, &tau)?;
    Ok((v, tau, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::names::alpha_eq_term;
    use crate::parser::{parse, Parsed, Sort};

    fn proof(src: &str) -> Proof {
        match parse(src, Sort::Proof).unwrap() {
            Parsed::Proof(p) => p,
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

    fn expect_normal(src: &str, fuel: u64) -> (Closure, Stats) {
        let (out, stats) = run(&closure(src), fuel);
        match out {
            StepOutcome::Normal(cl, _) => (cl, stats),
            other => panic!("expected normal outcome for {src}, got {other:?}"),
        }
    }

    fn final_value(cl: &Closure) -> Proof {
        // chase store references so answers are comparable
        let Command::Proof { p, .. } = &cl.command else { panic!("term answer") };
        resolve(p, &cl.store)
    }

    #[test]
    fn mu_binds_its_context() {
        // ⟨μα.⟨refl‖α⟩ ‖ μ̃=.c⟩τ → ⟨refl‖α⟩τ[α:=μ̃=.c] → ⟨refl‖μ̃=.c⟩ → c
        let cl = closure("<mu alpha. <refl | alpha> | eq~ -> <refl | 'halt>>");
        let StepOutcome::Next(cl1, rule) = step(&cl) else { panic!() };
        assert_eq!(rule, "mu-bind");
        assert!(cl1.store.binds("alpha"));
        let (fin, stats) = expect_normal("<mu alpha. <refl | alpha> | eq~ -> <refl | 'halt>>", 50);
        assert!(matches!(final_value(&fin), Proof::Refl { .. }));
        assert_eq!(stats.steps, 3);
    }

    #[test]
    fn injection_case_split() {
        let (fin, _) = expect_normal(
            "<inj1(refl) | case~ { inj1 a -> <a | 'k> | inj2 b -> <inj2(b) | 'k> }>",
            50,
        );
        assert!(matches!(final_value(&fin), Proof::Refl { .. }));
    }

    #[test]
    fn pair_focusing_then_split() {
        let (fin, _) = expect_normal(
            "<(mu alpha. <refl | alpha>, refl) | split~ (a1, a2) -> <(a1, a2) | 'k>>",
            100,
        );
        assert!(matches!(final_value(&fin), Proof::Pair(a, b)
            if matches!(a.as_ref(), Proof::Refl { .. }) && matches!(b.as_ref(), Proof::Refl { .. })));
    }

    #[test]
    fn dependent_pair_substitutes_witness() {
        let (fin, _) = expect_normal(
            "<[S(0), refl] | dest~ (x, a) -> <[x, a] | 'k>>",
            100,
        );
        let Proof::DepPair { t, .. } = final_value(&fin) else { panic!() };
        assert!(alpha_eq_term(&t, &Term::numeral(1)));
    }

    #[test]
    fn lambda_beta_on_term_stack() {
        let (fin, _) = expect_normal("<lam x. [x, refl] | S(0) . 'k>", 100);
        let Proof::DepPair { t, .. } = final_value(&fin) else { panic!() };
        assert!(alpha_eq_term(&t, &Term::numeral(1)));
    }

    #[test]
    fn nef_application_routes_through_delimited_continuation() {
        let cl = closure("<fun a. (a, a) | refl . 'k>");
        let StepOutcome::Next(cl1, rule) = step(&cl) else { panic!() };
        assert_eq!(rule, "beta-proof-nef");
        let Command::Proof { p, .. } = &cl1.command else { panic!() };
        assert!(matches!(p.as_ref(), Proof::Shift { .. }));
        let (fin, _) = expect_normal("<fun a. (a, a) | refl . 'k>", 100);
        assert!(matches!(final_value(&fin), Proof::Pair(..)));
    }

    #[test]
    fn non_nef_argument_avoids_the_delimiter() {
        let cl = closure("<fun a. a | (mu beta. <refl | 'k>) . 'k>");
        let StepOutcome::Next(_, rule) = step(&cl) else { panic!() };
        assert_eq!(rule, "beta-proof");
    }

    #[test]
    fn mu_against_delimited_context_substitutes() {
        // inside a delimited continuation, μα captures t̂p instead of storing
        let cl = closure("<shift(<mu alpha. <refl | alpha> | tp>) | 'k>");
        let (out, _) = run(&cl, 50);
        let StepOutcome::Normal(fin, _) = out else { panic!("{out:?}") };
        assert!(matches!(final_value(&fin), Proof::Refl { .. }));
        // the store never received an alpha binding
        assert!(!fin.store.binds("alpha"));
    }

    #[test]
    fn value_on_free_covar_is_normal() {
        let (out, _) = run(&closure("<refl | 'k>"), 10);
        assert!(matches!(out, StepOutcome::Normal(_, NormalReason::ValueOnFreeCovar)));
    }

    #[test]
    fn fuel_zero_exhausts() {
        let (out, _) = run(&closure("<refl | 'k>"), 0);
        assert!(matches!(out, StepOutcome::FuelExhausted(_)));
    }

    #[test]
    fn value_against_abort_is_stuck() {
        let (out, _) = run(&closure("<refl | abort>"), 10);
        assert!(matches!(out, StepOutcome::Stuck(..)));
    }

    #[test]
    fn covar_lookup_uses_rightmost_binding() {
        let (fin, _) = expect_normal(
            "<refl | alpha> [alpha := eq~ -> <(refl, refl) | 'k>]",
            50,
        );
        assert!(matches!(final_value(&fin), Proof::Pair(..)));
    }

    #[test]
    fn inductive_fixpoint_unfolds_lazily() {
        // fix at 2 computing a trivially reducible proof, forced by dest~
        let src = "<fix(S(S(0)); [0, refl]; (a, x). a) | dest~ (x, b) -> <[x, b] | 'k>>";
        let (fin, stats) = expect_normal(src, 1000);
        let Proof::DepPair { t, .. } = final_value(&fin) else { panic!() };
        assert!(alpha_eq_term(&t, &Term::numeral(0)));
        assert_eq!(stats.ind_unfoldings, 3);
    }

    #[test]
    fn cofix_stores_then_unfolds_once_per_force() {
        // stream of pairs [n, refl] starting at 0, forced at the head
        let src = "<cofix(0; (b, x). [x, refl]) | dest~ (x, a) -> <[x, a] | 'k>>";
        let (fin, stats) = expect_normal(src, 1000);
        let Proof::DepPair { t, .. } = final_value(&fin) else { panic!() };
        assert!(alpha_eq_term(&t, &Term::numeral(0)));
        assert_eq!(stats.cofix_unfoldings, 1);
    }

    #[test]
    fn second_force_of_same_binding_reuses_the_store() {
        // bind the cofix once, force it twice: the second force must not
        // unfold again because the first rebinds a value
        let src = "<cofix(0; (b, x). [x, refl]) | mu~ s. \
                   <s | dest~ (x1, a1) -> <s | dest~ (x2, a2) -> <[x2, a2] | 'k>>>>";
        let (fin, stats) = expect_normal(src, 1000);
        let Proof::DepPair { t, .. } = final_value(&fin) else { panic!() };
        assert!(alpha_eq_term(&t, &Term::numeral(0)));
        assert_eq!(stats.cofix_unfoldings, 1);
    }

    #[test]
    fn reduce_term_examples() {
        let cases = [
            ("rec(S(0); 0; (x, y). S(S(y)))", 2u64),
            ("(lam x. S(x)) 0", 1),
            ("wit([0, refl])", 0),
            ("rec(S(S(S(0))); 0; (x, y). S(y))", 3),
            ("(lam f. lam x. f (f x)) (lam y. S(y)) 0", 2),
        ];
        for (src, expect) in cases {
            let (v, _) = reduce_term(&term(src), &Store::empty(), 10_000).unwrap();
            assert!(
                alpha_eq_term(&v, &Term::numeral(expect)),
                "{src} reduced to {v:?}"
            );
        }
    }

    #[test]
    fn wit_forces_stored_fixpoints() {
        // the pair lives behind a store binding created by laziness
        let p = proof("mu star. <cofix(S(0); (b, x). [x, refl]) | star>");
        let (v, st) = run_nef(&p, &Store::empty(), 10_000).unwrap();
        // v is a variable pointing at the stored cofix; wit must unfold it
        let w = Term::wit(match v {
            Proof::Var(ref a) => Proof::var(a),
            other => other,
        });
        let (t, _) = reduce_term(&w, &st, 10_000).unwrap();
        assert!(alpha_eq_term(&t, &Term::numeral(1)));
    }

    #[test]
    fn run_nef_values_pass_through() {
        let (v, st) = run_nef(&proof("refl"), &Store::empty(), 10).unwrap();
        assert!(matches!(v, Proof::Refl { .. }));
        assert!(st.is_empty());
        let (v, _) = run_nef(&proof("[0, refl]"), &Store::empty(), 10).unwrap();
        assert!(matches!(v, Proof::DepPair { .. }));
    }

    #[test]
    fn run_nef_star_delimiter() {
        let (v, _) = run_nef(&proof("mu star. <refl | star>"), &Store::empty(), 100).unwrap();
        assert!(matches!(v, Proof::Refl { .. }));
    }

    #[test]
    fn run_nef_rejects_control() {
        assert!(run_nef(&proof("mu alpha. <refl | alpha>"), &Store::empty(), 100).is_err());
    }

    #[test]
    fn term_command_binds_values() {
        let (fin, _) = expect_normal(
            "<(lam x. S(x)) 0 | mu~ y. <[y, refl] | 'k>>",
            100,
        );
        let Proof::DepPair { t, .. } = final_value(&fin) else { panic!() };
        assert!(alpha_eq_term(&t, &Term::numeral(1)));
    }

    #[test]
    fn ascriptions_are_erased_before_running() {
        let cl = Closure::new(
            Command::cut(
                Proof::ascribe(Proof::refl(), Formula::eq(Term::Zero, Term::Zero)),
                Context::covar("'k"),
            ),
            Store::empty(),
        );
        let (out, _) = run(&cl, 10);
        let StepOutcome::Normal(fin, _) = out else { panic!("{out:?}") };
        let Command::Proof { p, .. } = &fin.command else { panic!() };
        // the ascription moved into the annotation slot, out of the term
        assert!(matches!(p.as_ref(), Proof::Refl { ann: Some(_) }));
    }

    #[test]
    fn trace_hook_sees_every_step() {
        let mut rules = Vec::new();
        let mut hook = |_: u64, rule: &'static str, _: &Closure| rules.push(rule);
        let cl = closure("<mu alpha. <refl | alpha> | eq~ -> <refl | 'halt>>");
        let (out, _) = run_with_trace(&cl, 50, Some(&mut hook));
        assert!(out.is_normal());
        assert_eq!(rules, vec!["mu-bind", "covar-lookup", "refl-elim"]);
    }
}
