//! Focused small-step machine. The same commands as the big-step machine,
//! driven by a focus index that walks down the command: c → p → e → V → f for
//! proofs and c → t → π → V_t for terms. Constructors are opened by binding
//! their components to fresh variables; dependent pairs evaluate their witness
//! inside a co-delimited continuation (a μ̃čtp co-shift) so that each
//! intermediate state stays typable.
//!
//! Agreement with the big-step machine is checked value-for-value: answers are
//! compared after chasing the administrative store bindings each machine
//! allocates along the way.

use crate::machine::{
    self, erase_closure, force_lookup, is_etp, resolve, shallow_type, NormalReason,
};
use crate::names::{
    alpha_eq, subst_covar_in_command, subst_term_in_command, subst_term_in_formula, NamePool,
    Node,
};
use crate::store;
use crate::syntax::*;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Focus {
    /// command in control
    C,
    /// proof in control (opening constructors)
    P,
    /// context in control (binders fire)
    E,
    /// weak value examined (store lookup, fixpoint triggering)
    V,
    /// strong value against a forcing context (elimination)
    F,
    /// term in control
    T,
    /// co-term in control
    Pi,
    /// term value against a stack
    Vt,
}

impl fmt::Display for Focus {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Focus::C => "c",
            Focus::P => "p",
            Focus::E => "e",
            Focus::V => "V",
            Focus::F => "f",
            Focus::T => "t",
            Focus::Pi => "pi",
            Focus::Vt => "Vt",
        };
        write!(out, "{s}")
    }
}

#[derive(Debug, Clone)]
pub struct FocusedClosure {
    pub focus: Focus,
    pub command: Command,
    pub store: Store,
}

impl FocusedClosure {
    pub fn closure(&self) -> Closure {
        Closure::new(self.command.clone(), self.store.clone())
    }
}

#[derive(Debug, Clone)]
pub enum SStepOutcome {
    Next(FocusedClosure, &'static str),
    Normal(FocusedClosure, NormalReason),
    Stuck(FocusedClosure, String),
    FuelExhausted(FocusedClosure),
}

impl SStepOutcome {
    pub fn focused(&self) -> &FocusedClosure {
        match self {
            SStepOutcome::Next(fc, _)
            | SStepOutcome::Normal(fc, _)
            | SStepOutcome::Stuck(fc, _)
            | SStepOutcome::FuelExhausted(fc) => fc,
        }
    }
    pub fn is_normal(&self) -> bool {
        matches!(self, SStepOutcome::Normal(..))
    }
}

/// Inject a command at the command focus.
pub fn focus(command: Command, store: Store) -> FocusedClosure {
    FocusedClosure { focus: Focus::C, command, store }
}

/// The focus a freshly encountered command fast-forwards to: the unique focus
/// at which a non-administrative rule can fire. Used for the inner command of
/// a (co-)shift, whose focusing moves are elided in the congruence rule.
fn natural_focus(c: &Command) -> Focus {
    match c {
        Command::Proof { p, e } => {
            if !p.is_weak_value() {
                Focus::P
            } else if let Context::Forcing(_) = e.as_ref() {
                if p.is_strong_value() {
                    Focus::F
                } else {
                    Focus::V
                }
            } else {
                Focus::E
            }
        }
        Command::Term { t, pi } => {
            if !t.is_value() {
                Focus::T
            } else if matches!(pi.as_ref(), Coterm::MuTildeTerm { .. }) {
                Focus::Pi
            } else {
                Focus::Vt
            }
        }
    }
}

fn next(focus: Focus, command: Command, store: Store, rule: &'static str) -> SStepOutcome {
    SStepOutcome::Next(FocusedClosure { focus, command, store }, rule)
}

fn stuck(fc: &FocusedClosure, msg: impl Into<String>) -> SStepOutcome {
    SStepOutcome::Stuck(fc.clone(), msg.into())
}

fn exists_instance(ann: &OForm, t: &Term) -> OForm {
    match ann.as_deref() {
        Some(Formula::Exists { x, body, .. }) => {
            Some(Box::new(subst_term_in_formula(body, x, t.clone())))
        }
        _ => None,
    }
}

/// Apply exactly one focused rule.
pub fn sstep(fc: &FocusedClosure) -> SStepOutcome {
    let mut pool = NamePool::seeded(Node::Command(&fc.command));
    pool.absorb(Node::Store(&fc.store));
    sstep_in(fc, &mut pool)
}

/// One focused rule drawing fresh names from `pool`. Drivers keep one pool
/// for the whole run so nested (co-)shift steps cannot reuse a name that an
/// enclosing command or a pending re-graft still holds.
fn sstep_in(fc: &FocusedClosure, pool: &mut NamePool) -> SStepOutcome {
    match fc.focus {
        Focus::C => match &fc.command {
            Command::Proof { .. } => {
                next(Focus::P, fc.command.clone(), fc.store.clone(), "focus-proof")
            }
            Command::Term { .. } => {
                next(Focus::T, fc.command.clone(), fc.store.clone(), "focus-term")
            }
        },
        Focus::P => {
            let Command::Proof { p, e } = &fc.command else {
                return stuck(fc, "proof focus on a term command");
            };
            step_proof(fc, p, e, pool)
        }
        Focus::E => {
            let Command::Proof { p, e } = &fc.command else {
                return stuck(fc, "context focus on a term command");
            };
            step_context(fc, p, e, pool)
        }
        Focus::V => {
            let Command::Proof { p, e } = &fc.command else {
                return stuck(fc, "value focus on a term command");
            };
            let Context::Forcing(f) = e.as_ref() else {
                return stuck(fc, "value focus without a forcing context");
            };
            step_lookup(fc, p, f, pool)
        }
        Focus::F => {
            let Command::Proof { p, e } = &fc.command else {
                return stuck(fc, "forcing focus on a term command");
            };
            let Context::Forcing(f) = e.as_ref() else {
                return stuck(fc, "forcing focus without a forcing context");
            };
            step_forcing(fc, p, f, pool)
        }
        Focus::T => {
            let Command::Term { t, pi } = &fc.command else {
                return stuck(fc, "term focus on a proof command");
            };
            step_term(fc, t, pi, pool)
        }
        Focus::Pi => {
            let Command::Term { t, pi } = &fc.command else {
                return stuck(fc, "co-term focus on a proof command");
            };
            step_coterm(fc, t, pi)
        }
        Focus::Vt => {
            let Command::Term { t, pi } = &fc.command else {
                return stuck(fc, "term-value focus on a proof command");
            };
            step_term_value(fc, t, pi)
        }
    }
}

fn step_proof(fc: &FocusedClosure, p: &Proof, e: &Context, pool: &mut NamePool) -> SStepOutcome {
    let tau = &fc.store;
    match p {
        Proof::Shift { ann, body } => {
            // release: the delimited command delivered a value to t̂p
            if let Command::Proof { p: inner, e: inner_e } = body.as_ref() {
                if matches!(inner_e.as_ref(), Context::Covar(k) if k == TP)
                    && inner.is_weak_value()
                {
                    return next(
                        Focus::P,
                        Command::cut((**inner).clone(), e.clone()),
                        tau.clone(),
                        "shift-release",
                    );
                }
            }
            match inner_step(body, tau, pool) {
                SStepOutcome::Next(inner, _) => next(
                    Focus::P,
                    Command::cut(
                        Proof::Shift { ann: ann.clone(), body: Box::new(inner.command) },
                        e.clone(),
                    ),
                    inner.store,
                    "shift-step",
                ),
                SStepOutcome::Normal(inner, _) => stuck(
                    &inner,
                    "delimited command finished away from its t̂p continuation",
                ),
                other => other,
            }
        }
        Proof::Mu { alpha, ann, body } => {
            if is_etp(e) {
                let c = subst_covar_in_command(body, alpha, e.clone());
                next(Focus::C, c, tau.clone(), "mu-etp-subst")
            } else {
                let binding = Binding {
                    name: alpha.clone(),
                    body: Storable::Context(e.clone()),
                    ann: ann.clone(),
                };
                let (st, cmd) = store::append_fresh(tau, &Store(vec![binding]), body, pool);
                next(Focus::C, cmd, st, "mu-bind")
            }
        }
        Proof::Ind { t, .. } | Proof::Cofix { t, .. } if t.is_value() => {
            // laziness: store the fixpoint under a fresh name
            let a = pool.gensym("a");
            let mut st = tau.clone();
            st.0.push(Binding {
                name: a.clone(),
                body: Storable::Proof(p.clone()),
                ann: shallow_type(p),
            });
            next(Focus::P, Command::cut(Proof::var(&a), e.clone()), st, "fixpoint-store")
        }
        Proof::Ind { .. } | Proof::Cofix { .. } => {
            // evaluate the index inside a delimited continuation, then store
            let y = pool.gensym("y");
            let with_value = match p {
                Proof::Ind { p0, a, x, ps, motive, .. } => Proof::Ind {
                    t: Box::new(Term::var(&y)),
                    p0: p0.clone(),
                    a: a.clone(),
                    x: x.clone(),
                    ps: ps.clone(),
                    motive: motive.clone(),
                },
                Proof::Cofix { b, x, body, ann, .. } => Proof::Cofix {
                    t: Box::new(Term::var(&y)),
                    b: b.clone(),
                    x: x.clone(),
                    body: body.clone(),
                    ann: ann.clone(),
                },
                _ => unreachable!(),
            };
            let t = match p {
                Proof::Ind { t, .. } | Proof::Cofix { t, .. } => (**t).clone(),
                _ => unreachable!(),
            };
            let inner = Command::cut_term(
                t,
                Coterm::MuTildeTerm {
                    x: y,
                    ty: None,
                    body: Box::new(Command::cut(with_value, Context::covar(TP))),
                },
            );
            next(
                Focus::P,
                Command::cut(Proof::shift(inner), e.clone()),
                tau.clone(),
                "fixpoint-index",
            )
        }
        Proof::Pair(p1, p2) if !(is_var(p1) && is_var(p2)) => {
            let a1 = pool.gensym("a1");
            let a2 = pool.gensym("a2");
            let rebuilt = Command::cut(Proof::pair(Proof::var(&a1), Proof::var(&a2)), e.clone());
            let ctx2 = Context::MuTilde {
                a: a2,
                ann: shallow_type(p2),
                body: Box::new(rebuilt),
                store: Store::empty(),
            };
            let ctx1 = Context::MuTilde {
                a: a1,
                ann: shallow_type(p1),
                body: Box::new(Command::cut((**p2).clone(), ctx2)),
                store: Store::empty(),
            };
            next(Focus::P, Command::cut((**p1).clone(), ctx1), tau.clone(), "pair-open")
        }
        Proof::Inj { i, p: q, ann } if !is_var(q) => {
            let a = pool.gensym("a");
            let rebuilt = Command::cut(
                Proof::Inj { i: *i, p: Box::new(Proof::var(&a)), ann: ann.clone() },
                e.clone(),
            );
            let ctx = Context::MuTilde {
                a,
                ann: shallow_type(q),
                body: Box::new(rebuilt),
                store: Store::empty(),
            };
            next(Focus::P, Command::cut((**q).clone(), ctx), tau.clone(), "inj-open")
        }
        Proof::DepPair { t, p: q, ann } if !(t.is_value() && is_var(q)) => {
            // ⟨(t,p)‖e⟩ ⇝ ⟨p‖μ̃čtp.⟨t‖μ̃x.⟨čtp‖μ̃a.⟨(x,a)‖e⟩⟩⟩⟩
            let x = pool.gensym("x");
            let a = pool.gensym("a");
            let rebuilt = Command::cut(
                Proof::DepPair {
                    t: Box::new(Term::var(&x)),
                    p: Box::new(Proof::var(&a)),
                    ann: ann.clone(),
                },
                e.clone(),
            );
            let bind_a = Context::MuTilde {
                a,
                ann: exists_instance(ann, &Term::var(&x)),
                body: Box::new(rebuilt),
                store: Store::empty(),
            };
            let coshift = Context::CoShift {
                ann: exists_instance(ann, t),
                body: Box::new(Command::cut_term(
                    (**t).clone(),
                    Coterm::MuTildeTerm {
                        x,
                        ty: None,
                        body: Box::new(Command::cut(Proof::var(CTP), bind_a)),
                    },
                )),
            };
            next(Focus::P, Command::cut((**q).clone(), coshift), tau.clone(), "dep-pair-open")
        }
        Proof::Ascribe(..) => next(
            Focus::P,
            Command::cut(machine::erase_proof(p), e.clone()),
            tau.clone(),
            "ascription-erase",
        ),
        Proof::Sugar(_) => stuck(fc, "macro sugar reached the machine; run expand first"),
        _ => {
            debug_assert!(p.is_weak_value());
            next(Focus::E, fc.command.clone(), tau.clone(), "descend-context")
        }
    }
}

fn is_var(p: &Proof) -> bool {
    matches!(p.strip(), Proof::Var(_))
}

fn step_context(fc: &FocusedClosure, p: &Proof, e: &Context, pool: &mut NamePool) -> SStepOutcome {
    let tau = &fc.store;
    match e {
        Context::Covar(alpha) => match store::lookup(tau, alpha) {
            Some((_, b)) => match &b.body {
                Storable::Context(e2) => next(
                    Focus::E,
                    Command::cut(p.clone(), e2.clone()),
                    tau.clone(),
                    "covar-lookup",
                ),
                Storable::Proof(_) => {
                    stuck(fc, format!("co-variable {alpha} bound to a proof"))
                }
            },
            None => SStepOutcome::Normal(fc.clone(), NormalReason::ValueOnFreeCovar),
        },
        Context::MuTilde { a, ann, body, store: tail } => {
            let binder = Binding {
                name: a.clone(),
                body: Storable::Proof(p.clone()),
                ann: ann.clone(),
            };
            let (st, cmd) = store::append_regraft(tau, binder, tail, body, pool);
            next(Focus::C, cmd, st, "value-bind")
        }
        Context::CoShift { ann, body } => {
            if let Command::Proof { p: inner, e: inner_e } = body.as_ref() {
                if matches!(inner.strip(), Proof::Var(k) if k == CTP) {
                    return next(
                        Focus::E,
                        Command::cut(p.clone(), inner_e.as_ref().clone()),
                        tau.clone(),
                        "coshift-release",
                    );
                }
            }
            match inner_step(body, tau, pool) {
                SStepOutcome::Next(inner, _) => next(
                    Focus::E,
                    Command::cut(
                        p.clone(),
                        Context::CoShift { ann: ann.clone(), body: Box::new(inner.command) },
                    ),
                    inner.store,
                    "coshift-step",
                ),
                SStepOutcome::Normal(inner, _) => {
                    stuck(&inner, "co-delimited command finished away from its čtp hole")
                }
                other => other,
            }
        }
        Context::Forcing(_) => {
            let focus = if p.is_strong_value() { Focus::F } else { Focus::V };
            next(focus, fc.command.clone(), tau.clone(), "descend-value")
        }
    }
}

fn step_lookup(fc: &FocusedClosure, p: &Proof, f: &Forcing, pool: &mut NamePool) -> SStepOutcome {
    match p {
        Proof::Var(a) => match force_lookup(&fc.store, a, f, pool) {
            Ok((cmd, st, rule)) => {
                // a delivered value stays at the value focus; a fixpoint
                // unfolding restarts its body at the proof focus
                let focus = if rule == "var-lookup" { Focus::V } else { Focus::P };
                next(focus, cmd, st, rule)
            }
            Err(msg) => stuck(fc, msg),
        },
        _ if p.is_strong_value() => {
            next(Focus::F, fc.command.clone(), fc.store.clone(), "descend-forcing")
        }
        _ => stuck(fc, "value focus on a non-value proof"),
    }
}

fn step_forcing(fc: &FocusedClosure, p: &Proof, f: &Forcing, pool: &mut NamePool) -> SStepOutcome {
    let tau = &fc.store;
    match (p, f) {
        (Proof::Inj { i, p: v, .. }, Forcing::Case { a1, c1, a2, c2, .. }) => {
            let (name, cmd) = if *i == 1 { (a1, c1) } else { (a2, c2) };
            let binding = Binding {
                name: name.clone(),
                body: Storable::Proof((**v).clone()),
                ann: shallow_type(v),
            };
            let (st, cmd) = store::append_fresh(tau, &Store(vec![binding]), cmd, pool);
            next(Focus::C, cmd, st, "case-elim")
        }
        (Proof::Pair(v1, v2), Forcing::SplitPair { a1, a2, body, .. }) => {
            let bindings = vec![
                Binding {
                    name: a1.clone(),
                    body: Storable::Proof((**v1).clone()),
                    ann: shallow_type(v1),
                },
                Binding {
                    name: a2.clone(),
                    body: Storable::Proof((**v2).clone()),
                    ann: shallow_type(v2),
                },
            ];
            let (st, cmd) = store::append_fresh(tau, &Store(bindings), body, pool);
            next(Focus::C, cmd, st, "pair-elim")
        }
        (Proof::DepPair { t, p: v, .. }, Forcing::SplitDep { x, a, body, ann }) => {
            let cmd = subst_term_in_command(body, x, (**t).clone());
            let binding = Binding {
                name: a.clone(),
                body: Storable::Proof((**v).clone()),
                ann: exists_instance(ann, t).or_else(|| shallow_type(v)),
            };
            let (st, cmd) = store::append_fresh(tau, &Store(vec![binding]), &cmd, pool);
            next(Focus::C, cmd, st, "dep-pair-elim")
        }
        (Proof::Refl { .. }, Forcing::EqSplit { body, .. }) => {
            next(Focus::C, body.as_ref().clone(), tau.clone(), "refl-elim")
        }
        (Proof::LamTerm { x, body, .. }, Forcing::TermStack { t, e, .. }) => {
            // route through a delimited continuation per the focused system
            let inner = Command::cut_term(
                (**t).clone(),
                Coterm::MuTildeTerm {
                    x: x.clone(),
                    ty: None,
                    body: Box::new(Command::cut((**body).clone(), Context::covar(TP))),
                },
            );
            next(
                Focus::P,
                Command::cut(Proof::shift(inner), (**e).clone()),
                tau.clone(),
                "beta-term",
            )
        }
        (Proof::LamProof { a, dom, body }, Forcing::ProofStack { q, e, .. }) => {
            if nef_proof(q) {
                let inner = Command::cut(
                    (**q).clone(),
                    Context::MuTilde {
                        a: a.clone(),
                        ann: dom.clone(),
                        body: Box::new(Command::cut((**body).clone(), Context::covar(TP))),
                        store: Store::empty(),
                    },
                );
                next(
                    Focus::P,
                    Command::cut(Proof::shift(inner), (**e).clone()),
                    tau.clone(),
                    "beta-proof-nef",
                )
            } else {
                let ctx = Context::MuTilde {
                    a: a.clone(),
                    ann: dom.clone(),
                    body: Box::new(Command::cut((**body).clone(), (**e).clone())),
                    store: Store::empty(),
                };
                next(Focus::P, Command::cut((**q).clone(), ctx), tau.clone(), "beta-proof")
            }
        }
        _ => stuck(fc, "no rule for this value against this forcing context"),
    }
}

fn step_term(fc: &FocusedClosure, t: &Term, pi: &Coterm, pool: &mut NamePool) -> SStepOutcome {
    let tau = &fc.store;
    if t.is_value() {
        return next(Focus::Pi, fc.command.clone(), tau.clone(), "descend-coterm");
    }
    match t {
        Term::App(head, arg) => next(
            Focus::T,
            Command::cut_term((**head).clone(), Coterm::stack((**arg).clone(), pi.clone())),
            tau.clone(),
            "app-push",
        ),
        Term::Succ(u) => {
            let x = pool.gensym("x");
            let rebuilt = Command::cut_term(Term::succ(Term::var(&x)), pi.clone());
            next(
                Focus::T,
                Command::cut_term(
                    (**u).clone(),
                    Coterm::MuTildeTerm { x, ty: None, body: Box::new(rebuilt) },
                ),
                tau.clone(),
                "succ-open",
            )
        }
        Term::Wit(p) => {
            let x = pool.gensym("x");
            let a = pool.gensym("a");
            let ctx = Context::Forcing(Forcing::SplitDep {
                x: x.clone(),
                a,
                body: Box::new(Command::cut_term(Term::var(&x), pi.clone())),
                ann: None,
            });
            next(Focus::P, Command::cut((**p).clone(), ctx), tau.clone(), "wit-split")
        }
        Term::Rec { t: scrut, t0, x, y, ts } => {
            if !scrut.is_value() {
                let z = pool.gensym("z");
                let rebuilt = Command::cut_term(
                    Term::Rec {
                        t: Box::new(Term::var(&z)),
                        t0: t0.clone(),
                        x: x.clone(),
                        y: y.clone(),
                        ts: ts.clone(),
                    },
                    pi.clone(),
                );
                return next(
                    Focus::T,
                    Command::cut_term(
                        (**scrut).clone(),
                        Coterm::MuTildeTerm { x: z, ty: None, body: Box::new(rebuilt) },
                    ),
                    tau.clone(),
                    "rec-scrutinee",
                );
            }
            match scrut.as_numeral() {
                Some(0) => next(
                    Focus::T,
                    Command::cut_term((**t0).clone(), pi.clone()),
                    tau.clone(),
                    "rec-zero",
                ),
                Some(n) => {
                    let pred = Term::numeral(n - 1);
                    let rec_pred = Term::Rec {
                        t: Box::new(pred.clone()),
                        t0: t0.clone(),
                        x: x.clone(),
                        y: y.clone(),
                        ts: ts.clone(),
                    };
                    let body = crate::names::Subst::term(x, pred)
                        .add_term(y, rec_pred)
                        .apply_term(ts);
                    next(Focus::T, Command::cut_term(body, pi.clone()), tau.clone(), "rec-succ")
                }
                None => stuck(fc, "recursor applied to a non-numeral"),
            }
        }
        Term::Var(_) | Term::Zero | Term::Lam { .. } => unreachable!("values handled above"),
    }
}

fn step_coterm(fc: &FocusedClosure, t: &Term, pi: &Coterm) -> SStepOutcome {
    match pi {
        Coterm::MuTildeTerm { x, body, .. } => {
            let cmd = subst_term_in_command(body, x, t.clone());
            next(Focus::C, cmd, fc.store.clone(), "term-bind")
        }
        Coterm::Stack { .. } => {
            next(Focus::Vt, fc.command.clone(), fc.store.clone(), "descend-function")
        }
    }
}

fn step_term_value(fc: &FocusedClosure, t: &Term, pi: &Coterm) -> SStepOutcome {
    match (t, pi) {
        (Term::Lam { x, body, .. }, Coterm::Stack { u, pi }) => {
            let rebuilt = Command::cut_term((**body).clone(), (**pi).clone());
            next(
                Focus::T,
                Command::cut_term(
                    (**u).clone(),
                    Coterm::MuTildeTerm {
                        x: x.clone(),
                        ty: None,
                        body: Box::new(rebuilt),
                    },
                ),
                fc.store.clone(),
                "beta-term-stack",
            )
        }
        (_, Coterm::Stack { .. }) => stuck(fc, "term stack applied to a non-function value"),
        (_, Coterm::MuTildeTerm { .. }) => {
            stuck(fc, "term-value focus on a binder co-term")
        }
    }
}

/// One real step of a nested command, eliding the administrative focusing
/// moves: congruence rules for (co-)shifts count one step per inner rule.
fn inner_step(cmd: &Command, tau: &Store, pool: &mut NamePool) -> SStepOutcome {
    let fc = FocusedClosure {
        focus: natural_focus(cmd),
        command: cmd.clone(),
        store: tau.clone(),
    };
    sstep_in(&fc, pool)
}

pub type STraceHook<'a> = &'a mut dyn FnMut(u64, &'static str, &FocusedClosure);

pub fn srun(cl: &Closure, fuel: u64) -> (SStepOutcome, u64) {
    srun_with_trace(cl, fuel, None)
}

pub fn srun_with_trace(
    cl: &Closure,
    fuel: u64,
    mut hook: Option<STraceHook>,
) -> (SStepOutcome, u64) {
    let cl = erase_closure(cl);
    let mut pool = NamePool::seeded(Node::Closure(&cl));
    let mut cur = focus(cl.command, cl.store);
    let mut steps: u64 = 0;
    let mut left = fuel;
    loop {
        if left == 0 {
            return (SStepOutcome::FuelExhausted(cur), steps);
        }
        left -= 1;
        match sstep_in(&cur, &mut pool) {
            SStepOutcome::Next(fc, rule) => {
                steps += 1;
                if let Some(h) = hook.as_mut() {
                    h(steps, rule, &fc);
                }
                cur = fc;
            }
            terminal => return (terminal, steps),
        }
    }
}

// -- agreement with the big-step machine --------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeKind {
    Normal,
    Stuck,
    FuelExhausted,
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OutcomeKind::Normal => "normal",
            OutcomeKind::Stuck => "stuck",
            OutcomeKind::FuelExhausted => "fuel-exhausted",
        };
        write!(out, "{s}")
    }
}

#[derive(Debug, Clone)]
pub struct AgreeReport {
    pub big_kind: OutcomeKind,
    pub big_steps: u64,
    pub small_kind: OutcomeKind,
    pub small_steps: u64,
    pub answers_match: bool,
    pub agree: bool,
}

fn big_kind(out: &machine::StepOutcome) -> OutcomeKind {
    match out {
        machine::StepOutcome::Normal(..) => OutcomeKind::Normal,
        machine::StepOutcome::Stuck(..) => OutcomeKind::Stuck,
        machine::StepOutcome::FuelExhausted(_) => OutcomeKind::FuelExhausted,
        machine::StepOutcome::Next(..) => unreachable!("run returns terminal outcomes"),
    }
}

fn small_kind(out: &SStepOutcome) -> OutcomeKind {
    match out {
        SStepOutcome::Normal(..) => OutcomeKind::Normal,
        SStepOutcome::Stuck(..) => OutcomeKind::Stuck,
        SStepOutcome::FuelExhausted(_) => OutcomeKind::FuelExhausted,
        SStepOutcome::Next(..) => unreachable!("srun returns terminal outcomes"),
    }
}

/// The observable answer of a normal closure: the resolved value and the free
/// co-variable it sits on.
pub fn final_answer(command: &Command, store: &Store) -> Option<(Proof, Name)> {
    match command {
        Command::Proof { p, e } => match e.as_ref() {
            Context::Covar(alpha) => Some((resolve(p, store), alpha.clone())),
            _ => None,
        },
        Command::Term { .. } => None,
    }
}

/// Run both machines on the same closure and compare the outcomes.
pub fn agree(cl: &Closure, fuel: u64) -> AgreeReport {
    let (big_out, big_stats) = machine::run(cl, fuel);
    let (small_out, small_steps) = srun(cl, fuel);
    let bk = big_kind(&big_out);
    let sk = small_kind(&small_out);
    let answers_match = match (&big_out, &small_out) {
        (machine::StepOutcome::Normal(bcl, _), SStepOutcome::Normal(sfc, _)) => {
            let ba = final_answer(&bcl.command, &bcl.store);
            let sa = final_answer(&sfc.command, &sfc.store);
            match (ba, sa) {
                (Some((bp, bcov)), Some((sp, scov))) => {
                    bcov == scov && alpha_eq(Node::Proof(&bp), Node::Proof(&sp))
                }
                _ => false,
            }
        }
        _ => bk == sk,
    };
    AgreeReport {
        big_kind: bk,
        big_steps: big_stats.steps,
        small_kind: sk,
        small_steps,
        answers_match,
        agree: bk == sk && answers_match,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::names::alpha_eq_term;
    use crate::parser::{parse, Parsed, Sort};

    fn closure(src: &str) -> Closure {
        match parse(src, Sort::Closure).unwrap() {
            Parsed::Closure(cl) => cl,
            _ => unreachable!(),
        }
    }

    fn expect_normal(src: &str, fuel: u64) -> (FocusedClosure, u64) {
        let (out, steps) = srun(&closure(src), fuel);
        match out {
            SStepOutcome::Normal(fc, _) => (fc, steps),
            other => panic!("expected normal outcome for {src}, got {other:?}"),
        }
    }

    fn answer(fc: &FocusedClosure) -> Proof {
        final_answer(&fc.command, &fc.store).expect("answer").0
    }

    #[test]
    fn focusing_moves_are_steps() {
        let cl = closure("<refl | 'k>");
        let fc = focus(cl.command, cl.store);
        assert_eq!(fc.focus, Focus::C);
        let SStepOutcome::Next(fc, rule) = sstep(&fc) else { panic!() };
        assert_eq!((fc.focus, rule), (Focus::P, "focus-proof"));
        let SStepOutcome::Next(fc, rule) = sstep(&fc) else { panic!() };
        assert_eq!((fc.focus, rule), (Focus::E, "descend-context"));
        let out = sstep(&fc);
        assert!(matches!(out, SStepOutcome::Normal(_, NormalReason::ValueOnFreeCovar)));
    }

    #[test]
    fn term_command_focuses_to_t() {
        let cl = closure("<(lam x. x) 0 | mu~ y. <[y, refl] | 'k>>");
        let fc = focus(cl.command, cl.store);
        let SStepOutcome::Next(fc, rule) = sstep(&fc) else { panic!() };
        assert_eq!((fc.focus, rule), (Focus::T, "focus-term"));
    }

    #[test]
    fn dep_pair_opens_into_a_co_shift() {
        let cl = closure("<[0, refl] | 'k>");
        let fc = focus(cl.command, cl.store);
        let SStepOutcome::Next(fc, _) = sstep(&fc) else { panic!() };
        let SStepOutcome::Next(fc, rule) = sstep(&fc) else { panic!() };
        assert_eq!(rule, "dep-pair-open");
        let Command::Proof { p, e } = &fc.command else { panic!() };
        assert!(matches!(p.as_ref(), Proof::Refl { .. }));
        assert!(matches!(e.as_ref(), Context::CoShift { .. }));
        // and the whole dance still normalizes to the same pair
        let (fin, _) = expect_normal("<[0, refl] | 'k>", 100);
        let Proof::DepPair { t, p, .. } = answer(&fin) else { panic!() };
        assert!(alpha_eq_term(&t, &Term::numeral(0)));
        assert!(matches!(p.as_ref(), Proof::Refl { .. }));
    }

    #[test]
    fn stored_value_lookup_keeps_the_store() {
        let (fin, _) = expect_normal(
            "<a | eq~ -> <refl | 'k>> [a := refl]",
            100,
        );
        assert!(matches!(answer(&fin), Proof::Refl { .. }));
        assert!(fin.store.binds("a"));
    }

    #[test]
    fn numeral_binding_substitutes() {
        let (fin, _) = expect_normal("<S(0) | mu~ x. <[x, refl] | 'k>>", 100);
        let Proof::DepPair { t, .. } = answer(&fin) else { panic!() };
        assert!(alpha_eq_term(&t, &Term::numeral(1)));
    }

    #[test]
    fn succ_of_redex_evaluates_inside() {
        let (fin, _) = expect_normal(
            "<S((lam x. S(x)) 0) | mu~ y. <[y, refl] | 'k>>",
            200,
        );
        let Proof::DepPair { t, .. } = answer(&fin) else { panic!() };
        assert!(alpha_eq_term(&t, &Term::numeral(2)));
    }

    #[test]
    fn wit_splits_the_pair() {
        let (fin, _) = expect_normal(
            "<wit([S(0), refl]) | mu~ y. <[y, refl] | 'k>>",
            200,
        );
        let Proof::DepPair { t, .. } = answer(&fin) else { panic!() };
        assert!(alpha_eq_term(&t, &Term::numeral(1)));
    }

    #[test]
    fn recursor_steps() {
        let (fin, _) = expect_normal(
            "<rec(S(S(0)); 0; (x, y). S(S(y))) | mu~ z. <[z, refl] | 'k>>",
            500,
        );
        let Proof::DepPair { t, .. } = answer(&fin) else { panic!() };
        assert!(alpha_eq_term(&t, &Term::numeral(4)));
    }

    #[test]
    fn lambda_routes_argument_through_the_delimiter() {
        let cl = closure("<lam x. [x, refl] | S(0) . 'k>");
        // walk to the forcing focus, then check the beta rule fires a shift
        let (out, _) = srun(&cl, 200);
        let SStepOutcome::Normal(fin, _) = out else { panic!("{out:?}") };
        let Proof::DepPair { t, .. } = answer(&fin) else { panic!() };
        assert!(alpha_eq_term(&t, &Term::numeral(1)));
    }

    #[test]
    fn fixpoints_store_and_unfold() {
        let src = "<fix(S(0); [0, refl]; (a, x). a) | dest~ (x, b) -> <[x, b] | 'k>>";
        let (fin, _) = expect_normal(src, 1000);
        let Proof::DepPair { t, .. } = answer(&fin) else { panic!() };
        assert!(alpha_eq_term(&t, &Term::numeral(0)));
    }

    #[test]
    fn fixpoint_with_redex_index_reduces_it_first() {
        let src = "<cofix((lam x. x) 0; (b, x). [x, refl]) | dest~ (x, a) -> <[x, a] | 'k>>";
        let (fin, _) = expect_normal(src, 1000);
        let Proof::DepPair { t, .. } = answer(&fin) else { panic!() };
        assert!(alpha_eq_term(&t, &Term::numeral(0)));
    }

    #[test]
    fn srun_with_no_fuel_exhausts() {
        let (out, _) = srun(&closure("<refl | 'k>"), 0);
        assert!(matches!(out, SStepOutcome::FuelExhausted(_)));
    }

    #[test]
    fn machines_agree_on_a_spread_of_closures() {
        let cases = [
            "<refl | 'k>",
            "<mu alpha. <refl | alpha> | eq~ -> <refl | 'halt>>",
            "<inj1(refl) | case~ { inj1 a -> <a | 'k> | inj2 b -> <inj2(b) | 'k> }>",
            "<(refl, refl) | split~ (a1, a2) -> <(a1, a2) | 'k>>",
            "<[S(0), refl] | dest~ (x, a) -> <[x, a] | 'k>>",
            "<lam x. [x, refl] | S(0) . 'k>",
            "<fun a. (a, a) | refl . 'k>",
            "<refl | abort>",
            "<rec(S(S(0)); 0; (x, y). S(S(y))) | mu~ z. <[z, refl] | 'k>>",
            "<fix(S(S(0)); [0, refl]; (a, x). a) | dest~ (x, b) -> <[x, b] | 'k>>",
            "<cofix(0; (b, x). [x, refl]) | dest~ (x, a) -> <[x, a] | 'k>>",
            "<wit([S(0), refl]) | mu~ y. <[y, refl] | 'k>>",
            "<shift(<mu alpha. <refl | alpha> | tp>) | 'k>",
        ];
        for src in cases {
            let report = agree(&closure(src), 10_000);
            assert!(report.agree, "machines disagree on {src}: {report:?}");
        }
    }

    #[test]
    fn small_step_count_dominates_big_step_count() {
        let cases = [
            "<mu alpha. <refl | alpha> | eq~ -> <refl | 'halt>>",
            "<[S(0), refl] | dest~ (x, a) -> <[x, a] | 'k>>",
            "<rec(S(S(0)); 0; (x, y). S(S(y))) | mu~ z. <[z, refl] | 'k>>",
        ];
        for src in cases {
            let report = agree(&closure(src), 10_000);
            assert!(
                report.small_steps >= report.big_steps,
                "{src}: small {} < big {}",
                report.small_steps,
                report.big_steps
            );
        }
    }
}
