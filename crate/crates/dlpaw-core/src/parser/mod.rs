//! Surface syntax for dLPA^ω.
//!
//! Identifier sorts are resolved from binding context: co-variables are quoted
//! (`'k`) or drawn from {alpha, beta, tp, star}; term and proof variables are
//! separated by their binders, and unbound identifiers default to proof
//! variables with a warning. Commands are `<p | e>`, binders `mu 'k. c` /
//! `mu~ a. c`, forcing contexts `case~ {inj1 a1 -> c1 | inj2 a2 -> c2}`,
//! `split~ (a1,a2) -> c`, `dest~ (x,a) -> c`, `eq~ -> c`, stacks `t . e` and
//! `p . e`, `abort` for [], `shift(c)` for μt̂p.c and `coshift(c)` for μ̃čtp.c.
//! Decimal numerals abbreviate S^n(0); `--` comments run to end of line.
//!
//! `parse` accepts core syntax only: the named macro forms of §2.5 are
//! rejected with a pointer to the macro layer, while application juxtaposition
//! (`H n`) is grammar-level and expanded inline. `parse_with_sugar` and
//! `.dlpaw` files keep all sugar for the `expand` pipeline.

pub mod lexer;
pub mod pretty;

use crate::macros;
use crate::names::Ns;
use crate::syntax::*;
use lexer::{lex, Tok, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub begin: usize,
    pub end: usize,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: SourceSpan,
    pub expected: Vec<String>,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(fm, "{}:{}: {sev}: {}", self.span.line, self.span.col, self.message)?;
        if !self.expected.is_empty() {
            write!(fm, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sort {
    Term,
    Proof,
    Context,
    Command,
    Formula,
    Type,
    Closure,
}

#[derive(Debug, Clone)]
pub enum Parsed {
    Term(Term),
    Proof(Proof),
    Context(Context),
    Command(Command),
    Formula(Formula),
    Type(FiniteType),
    Closure(Closure),
}

/// A `.dlpaw` file: `def name : Formula := proof` and `run closure` blocks.
#[derive(Debug, Clone)]
pub struct Def {
    pub name: String,
    pub formula: Formula,
    pub proof: Proof,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, Default)]
pub struct File {
    pub defs: Vec<Def>,
    pub runs: Vec<Closure>,
}

/// Words the fuzzers must avoid when inventing variable names.
pub const KEYWORDS: &[&str] = &[
    "mu", "lam", "fun", "refl", "inj1", "inj2", "fix", "cofix", "shift", "coshift", "abort",
    "rec", "wit", "let", "in", "split", "case", "dest", "of", "as", "prf", "subst", "exfalso",
    "catch", "throw", "fst", "snd", "S", "top", "bot", "pi", "forall", "exists", "nu", "def",
    "run", "N", "alpha", "beta", "tp", "star",
];

fn is_bare_covar(s: &str) -> bool {
    matches!(s, "alpha" | "beta" | "tp" | "star")
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Expect {
    Term,
    Proof,
    Any,
}

enum TP {
    T(Term),
    P(Proof),
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    env: Vec<(String, Ns)>,
    warnings: Vec<(String, Diagnostic)>,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn new(src: &str) -> Result<Parser, Diagnostic> {
        Ok(Parser { toks: lex(src)?, pos: 0, env: Vec::new(), warnings: Vec::new() })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }
    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }
    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span
    }
    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }
    fn err<T>(&self, msg: impl Into<String>, expected: &[&str]) -> PResult<T> {
        Err(Diagnostic {
            severity: Severity::Error,
            message: format!("{} (found `{}`)", msg.into(), self.peek()),
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }
    fn expect(&mut self, t: Tok) -> PResult<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{t}`"), &[])
        }
    }
    fn is_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(i) if i == s)
    }
    fn eat_ident_kw(&mut self, s: &str) -> bool {
        if self.is_ident(s) {
            self.bump();
            true
        } else {
            false
        }
    }
    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_bare_covar(&s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err(format!("expected {what} identifier"), &["identifier"]),
        }
    }
    fn covar_name(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Covar(s) => {
                self.bump();
                Ok(s)
            }
            Tok::Ident(s) if is_bare_covar(&s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err("expected co-variable", &["'name", "alpha", "beta", "tp", "star"]),
        }
    }
    fn peek_is_covar(&self) -> bool {
        matches!(self.peek(), Tok::Covar(_))
            || matches!(self.peek(), Tok::Ident(s) if is_bare_covar(s))
    }

    fn push(&mut self, name: &str, ns: Ns) {
        self.env.push((name.to_string(), ns));
    }
    fn pop_n(&mut self, n: usize) {
        for _ in 0..n {
            self.env.pop();
        }
    }
    fn lookup(&self, name: &str) -> Option<Ns> {
        self.env.iter().rev().find(|(n, _)| n == name).map(|(_, ns)| *ns)
    }

    fn checkpoint(&self) -> (usize, usize, usize) {
        (self.pos, self.env.len(), self.warnings.len())
    }
    fn restore(&mut self, cp: (usize, usize, usize)) {
        self.pos = cp.0;
        self.env.truncate(cp.1);
        self.warnings.truncate(cp.2);
    }

    // -- types & formulas ---------------------------------------------------

    fn parse_type(&mut self) -> PResult<FiniteType> {
        let lhs = self.parse_type_atom()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.parse_type()?;
            Ok(FiniteType::arrow(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }
    fn parse_type_atom(&mut self) -> PResult<FiniteType> {
        if self.eat_ident_kw("N") {
            Ok(FiniteType::Nat)
        } else if *self.peek() == Tok::LParen {
            self.bump();
            let t = self.parse_type()?;
            self.expect(Tok::RParen)?;
            Ok(t)
        } else {
            self.err("expected type", &["N", "("])
        }
    }

    fn parse_formula(&mut self) -> PResult<Formula> {
        // quantifiers bind weakest
        if self.is_ident("pi") {
            self.bump();
            self.expect(Tok::LParen)?;
            let a = self.ident("proof-variable")?;
            self.expect(Tok::Colon)?;
            let dom = self.parse_formula()?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Dot)?;
            self.push(&a, Ns::Proof);
            let cod = self.parse_formula()?;
            self.pop_n(1);
            return Ok(Formula::pi(&a, dom, cod));
        }
        if self.is_ident("forall") || self.is_ident("exists") {
            let is_forall = self.is_ident("forall");
            self.bump();
            let x = self.ident("term-variable")?;
            self.expect(Tok::Caret)?;
            let ty = self.parse_type()?;
            self.expect(Tok::Dot)?;
            self.push(&x, Ns::Term);
            let body = self.parse_formula()?;
            self.pop_n(1);
            return Ok(if is_forall {
                Formula::forall(&x, ty, body)
            } else {
                Formula::exists(&x, ty, body)
            });
        }
        let lhs = self.parse_formula_or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.parse_formula()?;
            return Ok(Formula::imp(lhs, rhs));
        }
        Ok(lhs)
    }
    fn parse_formula_or(&mut self) -> PResult<Formula> {
        let mut lhs = self.parse_formula_and()?;
        while *self.peek() == Tok::OrSym {
            self.bump();
            let rhs = self.parse_formula_and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }
    fn parse_formula_and(&mut self) -> PResult<Formula> {
        let mut lhs = self.parse_formula_atom()?;
        while *self.peek() == Tok::AndSym {
            self.bump();
            let rhs = self.parse_formula_atom()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }
    fn parse_formula_atom(&mut self) -> PResult<Formula> {
        if self.eat_ident_kw("top") {
            return Ok(Formula::Top);
        }
        if self.eat_ident_kw("bot") {
            return Ok(Formula::Bot);
        }
        if self.is_ident("nu") {
            self.bump();
            self.expect(Tok::LParen)?;
            let t = self.parse_term()?;
            self.expect(Tok::Semi)?;
            self.expect(Tok::LParen)?;
            let x = self.ident("term-variable")?;
            self.expect(Tok::Comma)?;
            let f = self.ident("function-name")?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Dot)?;
            self.push(&x, Ns::Term);
            self.push(&f, Ns::Term);
            let body = self.parse_formula()?;
            self.pop_n(2);
            self.expect(Tok::RParen)?;
            return Ok(Formula::nu(t, &x, &f, body));
        }
        if self.is_ident("pi") || self.is_ident("forall") || self.is_ident("exists") {
            return self.parse_formula();
        }
        if *self.peek() == Tok::LParen {
            // Either a parenthesized formula or the left term of an equality.
            let cp = self.checkpoint();
            self.bump();
            if let Ok(f) = self.parse_formula() {
                if *self.peek() == Tok::RParen && *self.peek2() != Tok::Eq {
                    self.bump();
                    return Ok(f);
                }
            }
            self.restore(cp);
        }
        let t = self.parse_term()?;
        self.expect(Tok::Eq)?;
        let u = self.parse_term()?;
        Ok(Formula::eq(t, u))
    }

    // -- expressions (terms & proofs) ---------------------------------------

    fn parse_term(&mut self) -> PResult<Term> {
        match self.parse_expr(Expect::Term)? {
            TP::T(t) => Ok(t),
            TP::P(_) => self.err("expected a term, found a proof", &[]),
        }
    }
    fn parse_proof(&mut self) -> PResult<Proof> {
        match self.parse_expr(Expect::Proof)? {
            TP::P(p) => Ok(p),
            TP::T(_) => self.err("expected a proof, found a term", &[]),
        }
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Tok::Num(_) | Tok::LParen | Tok::LBracket => true,
            Tok::Ident(s) => !is_bare_covar(s) && !matches!(s.as_str(), "in" | "of" | "as" | "def" | "run"),
            _ => false,
        }
    }

    fn parse_expr(&mut self, expect: Expect) -> PResult<TP> {
        let mut head = self.parse_atom(expect)?;
        loop {
            if !self.starts_atom() {
                return Ok(head);
            }
            let arg_expect = match head {
                TP::T(_) => Expect::Term,
                TP::P(_) => Expect::Any,
            };
            let arg = self.parse_atom(arg_expect)?;
            head = match (head, arg) {
                (TP::T(f), TP::T(a)) => TP::T(Term::app(f, a)),
                (TP::T(_), TP::P(_)) => {
                    return self.err("cannot apply a term to a proof", &[])
                }
                (TP::P(p), TP::T(t)) => TP::P(Proof::sugar(Sugar::AppT(p, t))),
                (TP::P(p), TP::P(q)) => TP::P(Proof::sugar(Sugar::AppP(p, q))),
            };
        }
    }

    fn binder_ident(&mut self, what: &str) -> PResult<String> {
        if *self.peek() == Tok::Under {
            self.bump();
            Ok("_".to_string())
        } else {
            self.ident(what)
        }
    }

    /// `(x, y)`-style binder pair.
    fn binder_pair(&mut self) -> PResult<(String, String)> {
        self.expect(Tok::LParen)?;
        let a = self.binder_ident("binder")?;
        self.expect(Tok::Comma)?;
        let b = self.binder_ident("binder")?;
        self.expect(Tok::RParen)?;
        Ok((a, b))
    }

    fn parse_atom(&mut self, expect: Expect) -> PResult<TP> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(TP::T(Term::numeral(n)))
            }
            Tok::LBracket => {
                self.bump();
                let t = self.parse_term()?;
                self.expect(Tok::Comma)?;
                let p = self.parse_proof()?;
                self.expect(Tok::RBracket)?;
                Ok(TP::P(Proof::dep_pair(t, p)))
            }
            Tok::LParen => {
                self.bump();
                let first = self.parse_expr(expect)?;
                match self.peek() {
                    Tok::Comma => {
                        let TP::P(p) = first else {
                            return self.err("expected a proof before `,` in a pair", &[]);
                        };
                        self.bump();
                        let q = self.parse_proof()?;
                        self.expect(Tok::RParen)?;
                        Ok(TP::P(Proof::pair(p, q)))
                    }
                    Tok::Colon => {
                        let TP::P(p) = first else {
                            return self.err("ascription applies to proofs", &[]);
                        };
                        self.bump();
                        let a = self.parse_formula()?;
                        self.expect(Tok::RParen)?;
                        Ok(TP::P(Proof::ascribe(p, a)))
                    }
                    _ => {
                        self.expect(Tok::RParen)?;
                        Ok(first)
                    }
                }
            }
            Tok::Ident(id) => self.parse_atom_ident(&id, expect),
            _ => self.err("expected an expression", &["term", "proof"]),
        }
    }

    fn parse_atom_ident(&mut self, id: &str, expect: Expect) -> PResult<TP> {
        match id {
            "S" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let t = self.parse_term()?;
                self.expect(Tok::RParen)?;
                Ok(TP::T(Term::succ(t)))
            }
            "rec" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let t = self.parse_term()?;
                self.expect(Tok::Semi)?;
                let t0 = self.parse_term()?;
                self.expect(Tok::Semi)?;
                let (x, y) = self.binder_pair()?;
                self.expect(Tok::Dot)?;
                self.push(&x, Ns::Term);
                self.push(&y, Ns::Term);
                let ts = self.parse_term()?;
                self.pop_n(2);
                self.expect(Tok::RParen)?;
                Ok(TP::T(Term::Rec {
                    t: Box::new(t),
                    t0: Box::new(t0),
                    x,
                    y,
                    ts: Box::new(ts),
                }))
            }
            "wit" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let p = self.parse_proof()?;
                self.expect(Tok::RParen)?;
                Ok(TP::T(Term::wit(p)))
            }
            "lam" => {
                self.bump();
                let (x, ty) = if *self.peek() == Tok::LParen {
                    self.bump();
                    let x = self.binder_ident("term-variable")?;
                    self.expect(Tok::Colon)?;
                    let ty = self.parse_type()?;
                    self.expect(Tok::RParen)?;
                    (x, Some(ty))
                } else {
                    (self.binder_ident("term-variable")?, None)
                };
                self.expect(Tok::Dot)?;
                self.push(&x, Ns::Term);
                let body = self.parse_expr(expect)?;
                self.pop_n(1);
                Ok(match body {
                    TP::T(t) => TP::T(Term::Lam { x, ty, body: Box::new(t) }),
                    TP::P(p) => TP::P(Proof::LamTerm { x, ty, body: Box::new(p) }),
                })
            }
            "fun" => {
                self.bump();
                let (a, dom) = if *self.peek() == Tok::LParen {
                    self.bump();
                    let a = self.binder_ident("proof-variable")?;
                    self.expect(Tok::Colon)?;
                    let dom = self.parse_formula()?;
                    self.expect(Tok::RParen)?;
                    (a, Some(Box::new(dom)))
                } else {
                    (self.binder_ident("proof-variable")?, None)
                };
                self.expect(Tok::Dot)?;
                self.push(&a, Ns::Proof);
                let body = self.parse_proof()?;
                self.pop_n(1);
                Ok(TP::P(Proof::LamProof { a, dom, body: Box::new(body) }))
            }
            "refl" => {
                self.bump();
                Ok(TP::P(Proof::refl()))
            }
            "inj1" | "inj2" => {
                let i = if id == "inj1" { 1 } else { 2 };
                self.bump();
                self.expect(Tok::LParen)?;
                let p = self.parse_proof()?;
                self.expect(Tok::RParen)?;
                Ok(TP::P(Proof::inj(i, p)))
            }
            "mu" => {
                self.bump();
                let alpha = self.covar_name()?;
                self.expect(Tok::Dot)?;
                self.push(&alpha, Ns::Covar);
                let c = self.parse_command()?;
                self.pop_n(1);
                Ok(TP::P(Proof::Mu { alpha, ann: None, body: Box::new(c) }))
            }
            "shift" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let c = self.parse_command()?;
                self.expect(Tok::RParen)?;
                Ok(TP::P(Proof::shift(c)))
            }
            "fix" => {
                self.bump();
                let motive = if *self.peek() == Tok::LBracket {
                    self.bump();
                    let x = self.ident("term-variable")?;
                    self.expect(Tok::Dot)?;
                    self.push(&x, Ns::Term);
                    let a = self.parse_formula()?;
                    self.pop_n(1);
                    self.expect(Tok::RBracket)?;
                    Some((x, Box::new(a)))
                } else {
                    None
                };
                self.expect(Tok::LParen)?;
                let t = self.parse_term()?;
                self.expect(Tok::Semi)?;
                let p0 = self.parse_proof()?;
                self.expect(Tok::Semi)?;
                let (a, x) = self.binder_pair()?;
                self.expect(Tok::Dot)?;
                self.push(&a, Ns::Proof);
                self.push(&x, Ns::Term);
                let ps = self.parse_proof()?;
                self.pop_n(2);
                self.expect(Tok::RParen)?;
                Ok(TP::P(Proof::Ind {
                    t: Box::new(t),
                    p0: Box::new(p0),
                    a,
                    x,
                    ps: Box::new(ps),
                    motive,
                }))
            }
            "cofix" => {
                self.bump();
                // optional invariant: cofix[f x ^ T. A](t; (b,x). p)
                let raw_ann = if *self.peek() == Tok::LBracket {
                    self.bump();
                    let f = self.ident("function-name")?;
                    let ax = self.ident("term-variable")?;
                    self.expect(Tok::Caret)?;
                    let t_ty = self.parse_type()?;
                    self.expect(Tok::Dot)?;
                    self.push(&f, Ns::Term);
                    self.push(&ax, Ns::Term);
                    let body = self.parse_formula()?;
                    self.pop_n(2);
                    self.expect(Tok::RBracket)?;
                    Some((f, ax, t_ty, body))
                } else {
                    None
                };
                self.expect(Tok::LParen)?;
                let t = self.parse_term()?;
                self.expect(Tok::Semi)?;
                let (b, x) = self.binder_pair()?;
                self.expect(Tok::Dot)?;
                self.push(&b, Ns::Proof);
                self.push(&x, Ns::Term);
                let body = self.parse_proof()?;
                self.pop_n(2);
                self.expect(Tok::RParen)?;
                let ann = raw_ann.map(|(f, ax, t_ty, a)| {
                    // the annotation's own x is renamed to the node binder x
                    let a = crate::names::subst_term_in_formula(&a, &ax, Term::Var(x.clone()));
                    Box::new(CofixAnn { f, t_ty, body: a })
                });
                Ok(TP::P(Proof::Cofix { t: Box::new(t), b, x, body: Box::new(body), ann }))
            }
            // ---- sugar ----
            "let" => {
                self.bump();
                let a = self.binder_ident("proof-variable")?;
                self.expect(Tok::Eq)?;
                let def = self.parse_proof()?;
                if !self.eat_ident_kw("in") {
                    return self.err("expected `in`", &["in"]);
                }
                self.push(&a, Ns::Proof);
                let body = self.parse_proof()?;
                self.pop_n(1);
                Ok(TP::P(Proof::sugar(Sugar::Let { a, def, body })))
            }
            "split" => {
                self.bump();
                let p = self.parse_proof()?;
                if !self.eat_ident_kw("as") {
                    return self.err("expected `as`", &["as"]);
                }
                let (a1, a2) = self.binder_pair()?;
                if !self.eat_ident_kw("in") {
                    return self.err("expected `in`", &["in"]);
                }
                self.push(&a1, Ns::Proof);
                self.push(&a2, Ns::Proof);
                let body = self.parse_proof()?;
                self.pop_n(2);
                Ok(TP::P(Proof::sugar(Sugar::Split { p, a1, a2, body })))
            }
            "case" => {
                self.bump();
                let p = self.parse_proof()?;
                if !self.eat_ident_kw("of") {
                    return self.err("expected `of`", &["of"]);
                }
                self.expect(Tok::LBrace)?;
                if !self.eat_ident_kw("inj1") {
                    return self.err("expected `inj1`", &["inj1"]);
                }
                let a1 = self.binder_ident("proof-variable")?;
                self.expect(Tok::Arrow)?;
                self.push(&a1, Ns::Proof);
                let p1 = self.parse_proof()?;
                self.pop_n(1);
                self.expect(Tok::Pipe)?;
                if !self.eat_ident_kw("inj2") {
                    return self.err("expected `inj2`", &["inj2"]);
                }
                let a2 = self.binder_ident("proof-variable")?;
                self.expect(Tok::Arrow)?;
                self.push(&a2, Ns::Proof);
                let p2 = self.parse_proof()?;
                self.pop_n(1);
                self.expect(Tok::RBrace)?;
                Ok(TP::P(Proof::sugar(Sugar::Case { p, a1, p1, a2, p2 })))
            }
            "dest" => {
                self.bump();
                let p = self.parse_proof()?;
                if !self.eat_ident_kw("as") {
                    return self.err("expected `as`", &["as"]);
                }
                let (x, a) = self.binder_pair()?;
                if !self.eat_ident_kw("in") {
                    return self.err("expected `in`", &["in"]);
                }
                self.push(&x, Ns::Term);
                self.push(&a, Ns::Proof);
                let body = self.parse_proof()?;
                self.pop_n(2);
                Ok(TP::P(Proof::sugar(Sugar::Dest { p, x, a, body })))
            }
            "prf" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let p = self.parse_proof()?;
                self.expect(Tok::RParen)?;
                Ok(TP::P(Proof::sugar(Sugar::Prf(p))))
            }
            "subst" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let p = self.parse_proof()?;
                self.expect(Tok::Semi)?;
                let q = self.parse_proof()?;
                self.expect(Tok::RParen)?;
                Ok(TP::P(Proof::sugar(Sugar::Subst(p, q))))
            }
            "exfalso" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let p = self.parse_proof()?;
                self.expect(Tok::RParen)?;
                Ok(TP::P(Proof::sugar(Sugar::Exfalso(p))))
            }
            "catch" => {
                self.bump();
                let alpha = self.covar_name()?;
                self.expect(Tok::Dot)?;
                self.push(&alpha, Ns::Covar);
                let body = self.parse_proof()?;
                self.pop_n(1);
                Ok(TP::P(Proof::sugar(Sugar::Catch { alpha, body })))
            }
            "throw" => {
                self.bump();
                let alpha = self.covar_name()?;
                self.expect(Tok::Dot)?;
                let arg = self.parse_proof()?;
                Ok(TP::P(Proof::sugar(Sugar::Throw { alpha, arg })))
            }
            "fst" | "snd" => {
                let i = if id == "fst" { 1 } else { 2 };
                self.bump();
                self.expect(Tok::LParen)?;
                let p = self.parse_proof()?;
                self.expect(Tok::RParen)?;
                Ok(TP::P(Proof::sugar(Sugar::Proj { i, p })))
            }
            _ => {
                // plain identifier; sort resolved from the binding context
                let span = self.span();
                self.bump();
                match self.lookup(id) {
                    Some(Ns::Term) => Ok(TP::T(Term::var(id))),
                    Some(Ns::Proof) => Ok(TP::P(Proof::var(id))),
                    Some(Ns::Covar) => self.err(
                        format!("co-variable `{id}` used in expression position"),
                        &[],
                    ),
                    None => match expect {
                        Expect::Term => Ok(TP::T(Term::var(id))),
                        _ => {
                            if id != CTP {
                                self.warnings.push((
                                    id.to_string(),
                                    Diagnostic {
                                        severity: Severity::Warning,
                                        message: format!(
                                            "unbound identifier `{id}` defaults to a proof variable"
                                        ),
                                        span,
                                        expected: vec![],
                                    },
                                ));
                            }
                            Ok(TP::P(Proof::var(id)))
                        }
                    },
                }
            }
        }
    }

    // -- contexts, coterms, commands, closures ------------------------------

    fn parse_context(&mut self) -> PResult<Context> {
        if self.peek_is_covar() {
            let a = self.covar_name()?;
            return Ok(Context::Covar(a));
        }
        if self.eat_ident_kw("abort") {
            return Ok(Context::Forcing(Forcing::Abort));
        }
        if self.is_ident("coshift") {
            self.bump();
            self.expect(Tok::LParen)?;
            self.push(CTP, Ns::Proof);
            let c = self.parse_command()?;
            self.pop_n(1);
            self.expect(Tok::RParen)?;
            return Ok(Context::co_shift(c));
        }
        if self.is_ident("mu") && *self.peek2() == Tok::Tilde {
            self.bump();
            self.bump();
            let a = self.binder_ident("proof-variable")?;
            self.expect(Tok::Dot)?;
            self.push(&a, Ns::Proof);
            let c = self.parse_command()?;
            let store = self.parse_store_bindings()?;
            self.pop_n(1);
            return Ok(Context::MuTilde { a, ann: None, body: Box::new(c), store });
        }
        if self.is_ident("case") && *self.peek2() == Tok::Tilde {
            self.bump();
            self.bump();
            self.expect(Tok::LBrace)?;
            if !self.eat_ident_kw("inj1") {
                return self.err("expected `inj1`", &["inj1"]);
            }
            let a1 = self.binder_ident("proof-variable")?;
            self.expect(Tok::Arrow)?;
            self.push(&a1, Ns::Proof);
            let c1 = self.parse_command()?;
            self.pop_n(1);
            self.expect(Tok::Pipe)?;
            if !self.eat_ident_kw("inj2") {
                return self.err("expected `inj2`", &["inj2"]);
            }
            let a2 = self.binder_ident("proof-variable")?;
            self.expect(Tok::Arrow)?;
            self.push(&a2, Ns::Proof);
            let c2 = self.parse_command()?;
            self.pop_n(1);
            self.expect(Tok::RBrace)?;
            return Ok(Context::Forcing(Forcing::Case {
                a1,
                c1: Box::new(c1),
                a2,
                c2: Box::new(c2),
                ann: None,
            }));
        }
        if self.is_ident("split") && *self.peek2() == Tok::Tilde {
            self.bump();
            self.bump();
            let (a1, a2) = self.binder_pair()?;
            self.expect(Tok::Arrow)?;
            self.push(&a1, Ns::Proof);
            self.push(&a2, Ns::Proof);
            let c = self.parse_command()?;
            self.pop_n(2);
            return Ok(Context::Forcing(Forcing::SplitPair {
                a1,
                a2,
                body: Box::new(c),
                ann: None,
            }));
        }
        if self.is_ident("dest") && *self.peek2() == Tok::Tilde {
            self.bump();
            self.bump();
            let (x, a) = self.binder_pair()?;
            self.expect(Tok::Arrow)?;
            self.push(&x, Ns::Term);
            self.push(&a, Ns::Proof);
            let c = self.parse_command()?;
            self.pop_n(2);
            return Ok(Context::Forcing(Forcing::SplitDep {
                x,
                a,
                body: Box::new(c),
                ann: None,
            }));
        }
        if self.is_ident("eq") && *self.peek2() == Tok::Tilde {
            self.bump();
            self.bump();
            self.expect(Tok::Arrow)?;
            let c = self.parse_command()?;
            return Ok(Context::Forcing(Forcing::EqSplit { body: Box::new(c), ann: None }));
        }
        if *self.peek() == Tok::LParen {
            // Either `(e)` or a parenthesized stack argument `(p, q) . e`.
            let cp = self.checkpoint();
            self.bump();
            if let Ok(e) = self.parse_context() {
                if *self.peek() == Tok::RParen && *self.peek2() != Tok::Dot {
                    self.bump();
                    return Ok(e);
                }
            }
            self.restore(cp);
        }
        // a stack `arg . e`
        let arg = self.parse_expr(Expect::Any)?;
        self.expect(Tok::Dot)?;
        let e = self.parse_context()?;
        Ok(Context::Forcing(match arg {
            TP::T(t) => Forcing::term_stack(t, e),
            TP::P(p) => Forcing::proof_stack(p, e),
        }))
    }

    fn parse_coterm(&mut self) -> PResult<Coterm> {
        if self.is_ident("mu") && *self.peek2() == Tok::Tilde {
            self.bump();
            self.bump();
            let x = self.binder_ident("term-variable")?;
            self.expect(Tok::Dot)?;
            self.push(&x, Ns::Term);
            let c = self.parse_command()?;
            self.pop_n(1);
            return Ok(Coterm::MuTildeTerm { x, ty: None, body: Box::new(c) });
        }
        let u = self.parse_term()?;
        self.expect(Tok::Dot)?;
        let pi = self.parse_coterm()?;
        Ok(Coterm::stack(u, pi))
    }

    fn parse_command(&mut self) -> PResult<Command> {
        self.expect(Tok::LAngle)?;
        let lhs = self.parse_expr(Expect::Any)?;
        self.expect(Tok::Pipe)?;
        let c = match lhs {
            TP::P(p) => {
                let e = self.parse_context()?;
                Command::cut(p, e)
            }
            TP::T(t) => {
                let pi = self.parse_coterm()?;
                Command::cut_term(t, pi)
            }
        };
        self.expect(Tok::RAngle)?;
        Ok(c)
    }

    /// Zero or more `[name := storable]` groups.
    fn parse_store_bindings(&mut self) -> PResult<Store> {
        let mut bindings = Vec::new();
        while *self.peek() == Tok::LBracket
            && matches!(self.peek2(), Tok::Ident(_) | Tok::Covar(_))
        {
            // distinguish from a dependent pair `[t, p]`: require `:=` after
            // the name
            let cp = self.checkpoint();
            self.bump();
            let name = match self.peek().clone() {
                Tok::Covar(s) => {
                    self.bump();
                    s
                }
                Tok::Ident(s) => {
                    self.bump();
                    s
                }
                _ => unreachable!(),
            };
            if *self.peek() != Tok::ColonEq {
                self.restore(cp);
                break;
            }
            self.bump();
            let is_covar = name.starts_with('\'') || is_bare_covar(&name);
            let body = if is_covar {
                self.push(&name, Ns::Covar);
                Storable::Context(self.parse_context()?)
            } else {
                self.push(&name, Ns::Proof);
                Storable::Proof(self.parse_proof()?)
            };
            self.expect(Tok::RBracket)?;
            bindings.push(Binding { name, body, ann: None });
        }
        Ok(Store(bindings))
    }

    fn parse_closure(&mut self) -> PResult<Closure> {
        let command = self.parse_command()?;
        let store = self.parse_store_bindings()?;
        // names that turned out to be store-bound were not really unbound
        let dom = store.domain();
        self.warnings.retain(|(n, _)| !dom.contains(n));
        Ok(Closure::new(command, store))
    }

    fn parse_file(&mut self) -> PResult<File> {
        let mut file = File::default();
        loop {
            if *self.peek() == Tok::Eof {
                return Ok(file);
            }
            if self.eat_ident_kw("def") {
                let span = self.span();
                let name = self.ident("definition")?;
                self.expect(Tok::Colon)?;
                let formula = self.parse_formula()?;
                self.expect(Tok::ColonEq)?;
                let proof = self.parse_proof()?;
                file.defs.push(Def { name, formula, proof, span });
            } else if self.eat_ident_kw("run") {
                let cl = self.parse_closure()?;
                file.runs.push(cl);
            } else {
                return self.err("expected `def` or `run`", &["def", "run"]);
            }
        }
    }
}

fn finish<T>(
    p: Parser,
    node: PResult<T>,
    check_eof: bool,
) -> Result<(T, Vec<Diagnostic>), Vec<Diagnostic>> {
    match node {
        Ok(n) => {
            if check_eof && *p.peek() != Tok::Eof {
                return Err(vec![Diagnostic {
                    severity: Severity::Error,
                    message: format!("trailing input after a complete {}", "node"),
                    span: p.span(),
                    expected: vec!["end of input".into()],
                }]);
            }
            Ok((n, p.warnings.into_iter().map(|(_, d)| d).collect()))
        }
        Err(d) => Err(vec![d]),
    }
}

/// Parse with the full (sugar-bearing) grammar; returns warnings alongside.
pub fn parse_with_sugar(text: &str, sort: Sort) -> Result<(Parsed, Vec<Diagnostic>), Vec<Diagnostic>> {
    let mut p = Parser::new(text).map_err(|d| vec![d])?;
    macro_rules! go {
        ($e:expr, $v:ident) => {{
            let r = $e.map(Parsed::$v);
            finish(p, r, true)
        }};
    }
    match sort {
        Sort::Term => {
            let r = p.parse_term();
            go!(r, Term)
        }
        Sort::Proof => {
            let r = p.parse_proof();
            go!(r, Proof)
        }
        Sort::Context => {
            let r = p.parse_context();
            go!(r, Context)
        }
        Sort::Command => {
            let r = p.parse_command();
            go!(r, Command)
        }
        Sort::Formula => {
            let r = p.parse_formula();
            go!(r, Formula)
        }
        Sort::Type => {
            let r = p.parse_type();
            go!(r, Type)
        }
        Sort::Closure => {
            let r = p.parse_closure();
            go!(r, Closure)
        }
    }
}

/// Parse core syntax: named macro forms (let/split/case/dest/prf/subst/
/// exfalso/catch/throw/fst/snd) are rejected with a pointer to the macro
/// layer; application juxtaposition is expanded inline.
pub fn parse(text: &str, sort: Sort) -> Result<Parsed, Vec<Diagnostic>> {
    let (node, _warnings) = parse_with_sugar(text, sort)?;
    if let Some(name) = named_sugar_in(&node) {
        return Err(vec![Diagnostic {
            severity: Severity::Error,
            message: format!(
                "`{name}` is a macro-layer form, not core syntax; parse it in file mode and run `expand`"
            ),
            span: SourceSpan { begin: 0, end: text.len(), line: 1, col: 1 },
            expected: vec![],
        }]);
    }
    let to_diag = |e: macros::MacroError| {
        vec![Diagnostic {
            severity: Severity::Error,
            message: e.to_string(),
            span: SourceSpan { begin: 0, end: text.len(), line: 1, col: 1 },
            expected: vec![],
        }]
    };
    Ok(match node {
        Parsed::Term(t) => Parsed::Term(macros::expand_term(&t).map_err(to_diag)?),
        Parsed::Proof(p) => Parsed::Proof(macros::expand_proof(&p).map_err(to_diag)?),
        Parsed::Context(e) => Parsed::Context(macros::expand_context(&e).map_err(to_diag)?),
        Parsed::Command(c) => Parsed::Command(macros::expand_command(&c).map_err(to_diag)?),
        Parsed::Closure(cl) => Parsed::Closure(macros::expand_closure(&cl).map_err(to_diag)?),
        other => other,
    })
}

/// Parse a `.dlpaw` file (sugar allowed).
pub fn parse_file(text: &str) -> Result<(File, Vec<Diagnostic>), Vec<Diagnostic>> {
    let mut p = Parser::new(text).map_err(|d| vec![d])?;
    let r = p.parse_file();
    finish(p, r, true)
}

fn named_sugar_in(node: &Parsed) -> Option<&'static str> {
    match node {
        Parsed::Term(t) => macros::find_named_sugar_term(t),
        Parsed::Proof(p) => macros::find_named_sugar_proof(p),
        Parsed::Context(e) => macros::find_named_sugar_context(e),
        Parsed::Command(c) => macros::find_named_sugar_command(c),
        Parsed::Closure(cl) => macros::find_named_sugar_closure(cl),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::names::{alpha_eq, Node};

    fn roundtrip(src: &str, sort: Sort) {
        let (node, _) = parse_with_sugar(src, sort)
            .unwrap_or_else(|d| panic!("parse failed for {src:?}: {}", d[0]));
        let printed = pretty::pretty(&node);
        let (again, _) = parse_with_sugar(&printed, sort)
            .unwrap_or_else(|d| panic!("reparse failed for {printed:?}: {}", d[0]));
        let eq = match (&node, &again) {
            (Parsed::Term(a), Parsed::Term(b)) => alpha_eq(Node::Term(a), Node::Term(b)),
            (Parsed::Proof(a), Parsed::Proof(b)) => alpha_eq(Node::Proof(a), Node::Proof(b)),
            (Parsed::Context(a), Parsed::Context(b)) => {
                alpha_eq(Node::Context(a), Node::Context(b))
            }
            (Parsed::Command(a), Parsed::Command(b)) => {
                alpha_eq(Node::Command(a), Node::Command(b))
            }
            (Parsed::Formula(a), Parsed::Formula(b)) => {
                alpha_eq(Node::Formula(a), Node::Formula(b))
            }
            (Parsed::Type(a), Parsed::Type(b)) => a == b,
            (Parsed::Closure(a), Parsed::Closure(b)) => {
                alpha_eq(Node::Closure(a), Node::Closure(b))
            }
            _ => false,
        };
        assert!(eq, "round-trip mismatch: {src:?} printed as {printed:?}");
    }

    #[test]
    fn terms_roundtrip() {
        for src in [
            "0",
            "3",
            "S(S(x))",
            "lam x. x",
            "lam (x : N). S(x)",
            "rec(n; 0; (x, y). S(y))",
            "f x (g y)",
            "wit(refl)",
            "lam f. lam x. f (f x)",
        ] {
            roundtrip(src, Sort::Term);
        }
    }

    #[test]
    fn numerals_print_as_successors() {
        let (node, _) = parse_with_sugar("2", Sort::Term).unwrap();
        assert_eq!(pretty::pretty(&node), "S(S(0))");
    }

    #[test]
    fn proofs_roundtrip() {
        for src in [
            "refl",
            "inj1(refl)",
            "(refl, refl)",
            "[S(0), refl]",
            "fun a. a",
            "fun (a : top). a",
            "lam x. refl",
            "mu 'k. <refl | 'k>",
            "mu alpha. <a | alpha>",
            "shift(<a | tp>)",
            "fix(n; refl; (a, x). a)",
            "fix[m. m = m](n; refl; (a, x). refl)",
            "cofix(0; (b, x). (a, b))",
            "cofix[f x ^ N. x = x /\\ f(S(x)) = 0](0; (b, y). (refl, b))",
            "(refl : 0 = 0)",
            "let a = p in (a, a)",
            "split p as (a1, a2) in a2",
            "case p of { inj1 a -> inj2(a) | inj2 b -> inj1(b) }",
            "dest p as (x, a) in [x, a]",
            "prf(p)",
            "subst(p; q)",
            "exfalso(p)",
            "catch 'k. throw 'k. p",
            "fst(p)",
            "snd(p)",
            "H n",
            "p q r",
            "f [0, refl]",
        ] {
            roundtrip(src, Sort::Proof);
        }
    }

    #[test]
    fn contexts_roundtrip() {
        for src in [
            "'k",
            "star",
            "abort",
            "mu~ a. <a | 'k>",
            "mu~ a. <a | 'k> [b := refl]",
            "case~ { inj1 a -> <a | 'k> | inj2 b -> <b | 'k> }",
            "split~ (a1, a2) -> <a1 | star>",
            "dest~ (x, a) -> <a | 'k>",
            "eq~ -> <q | 'k>",
            "0 . 'k",
            "refl . abort",
            "(p, q) . 'k",
            "coshift(<ctp | 'k>)",
            "S(0) . refl . 'k",
        ] {
            roundtrip(src, Sort::Context);
        }
    }

    #[test]
    fn commands_and_closures_roundtrip() {
        for src in [
            "<refl | 'k>",
            "<mu alpha. <a | alpha> | mu~ a. <a | star>>",
            "<lam x. S(x) | 0 . mu~ y. <refl | eq~ -> <q | 'k>>>",
        ] {
            roundtrip(src, Sort::Command);
        }
        roundtrip("<a | 'k> [a := refl] ['k := abort]", Sort::Closure);
        roundtrip(
            "<a | 'k> [a := mu beta. <b | beta>] [b := (refl, refl)] ['k := star]",
            Sort::Closure,
        );
    }

    #[test]
    fn closure_binding_suppresses_unbound_warning() {
        let (_, warns) = parse_with_sugar("<a | 'k> [a := refl] ['k := abort]", Sort::Closure)
            .unwrap();
        assert!(warns.is_empty(), "{warns:?}");
        let (_, warns) = parse_with_sugar("<a | 'k>", Sort::Command).unwrap();
        assert_eq!(warns.len(), 1);
    }

    #[test]
    fn formulas_roundtrip() {
        for src in [
            "top",
            "bot",
            "0 = S(0)",
            "top /\\ bot \\/ top",
            "top -> bot -> top",
            "(top -> bot) -> top",
            "pi (a : exists y^N. top). wit(a) = 0",
            "forall x^N. x = x",
            "exists y^N -> N. y 0 = 0",
            "forall x^N. (exists y^N. x = y) /\\ top",
            "nu(0; (x, f). x = x /\\ f(S(x)) = 0)",
            "forall n^N. exists m^N. n = m",
        ] {
            roundtrip(src, Sort::Formula);
        }
    }

    #[test]
    fn implication_is_nondependent_pi() {
        let (node, _) = parse_with_sugar("top -> bot", Sort::Formula).unwrap();
        let Parsed::Formula(Formula::Pi { a, .. }) = node else {
            panic!("expected pi");
        };
        assert_eq!(a, "_imp");
    }

    #[test]
    fn types_roundtrip() {
        for src in ["N", "N -> N", "(N -> N) -> N"] {
            roundtrip(src, Sort::Type);
        }
    }

    #[test]
    fn core_mode_rejects_named_sugar() {
        for (src, what) in [
            ("let a = refl in a", "let"),
            ("prf(p)", "prf"),
            ("fst(p)", "fst"),
            ("catch 'k. p", "catch"),
        ] {
            let err = parse(src, Sort::Proof).unwrap_err();
            assert!(
                err[0].message.contains(what) && err[0].message.contains("macro-layer"),
                "{src}: {}",
                err[0].message
            );
        }
    }

    #[test]
    fn core_mode_expands_applications() {
        let Parsed::Proof(p) = parse("lam n. H n", Sort::Proof).unwrap() else {
            panic!()
        };
        let Proof::LamTerm { body: lam_body, .. } = &p else {
            panic!("expected lam, got {p:?}")
        };
        let Proof::Mu { alpha, body, .. } = lam_body.as_ref() else {
            panic!("expected mu, got {lam_body:?}")
        };
        let Command::Proof { p: head, e } = body.as_ref() else { panic!() };
        assert!(matches!(head.as_ref(), Proof::Var(h) if h == "H"));
        let Context::Forcing(Forcing::TermStack { t, e, .. }) = e.as_ref() else {
            panic!("expected term stack, got {e:?}")
        };
        assert!(matches!(t.as_ref(), Term::Var(n) if n == "n"));
        assert!(matches!(e.as_ref(), Context::Covar(k) if k == alpha));
    }

    #[test]
    fn sort_resolution_uses_binders() {
        // x is term-bound, so `x` in the body is a term and `f x` a term app
        let Parsed::Term(_) = parse("lam x. f x", Sort::Term).unwrap() else {
            panic!()
        };
        // a is proof-bound, so the application is proof-level sugar
        let (node, _) = parse_with_sugar("fun a. g a", Sort::Proof).unwrap();
        let Parsed::Proof(Proof::LamProof { body, .. }) = node else { panic!() };
        assert!(matches!(
            body.as_ref(),
            Proof::Sugar(s) if matches!(s.as_ref(), Sugar::AppP(..))
        ));
    }

    #[test]
    fn file_mode_parses_defs_and_runs() {
        let src = "
-- a tiny file
def idproof : top -> top := fun a. a

def two : 0 = 0 := refl

run <idproof | refl . 'halt> [idproof := fun a. a]
";
        let (file, warns) = parse_file(src).unwrap();
        assert_eq!(file.defs.len(), 2);
        assert_eq!(file.defs[0].name, "idproof");
        assert_eq!(file.runs.len(), 1);
        assert!(warns.is_empty(), "{warns:?}");
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_with_sugar("<refl | >", Sort::Command).unwrap_err();
        assert_eq!(err[0].span.line, 1);
        assert!(err[0].span.col > 1);
    }

    #[test]
    fn covar_in_expression_position_is_an_error() {
        let err = parse_with_sugar("mu alpha. <alpha | alpha>", Sort::Proof).unwrap_err();
        assert!(err[0].message.contains("co-variable"));
    }

    #[test]
    fn trailing_input_is_rejected() {
        assert!(parse_with_sugar("refl refl | x", Sort::Proof).is_err());
    }
}
