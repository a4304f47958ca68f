//! The paper's flagship programs as executable artifacts: the lazily shared
//! choice stream, `nth` access into it (in both the countable-choice and the
//! dependent-choice form), the AC_ℕ / DC realizers, and a witness-extraction
//! harness with sharing instrumentation.
//!
//! Everything is parameterized by the binary predicate P(x, y), which the
//! source material leaves free; the shipped instances are the witness-forcing
//! P(x, y) := x = y and the degenerate P(x, y) := 0 = 0.

use crate::machine::{self, MachineError, Stats};
use crate::macros;
use crate::names::Subst;
use crate::parser::pretty::{pretty_formula, pretty_proof, pretty_term};
use crate::parser::{parse_with_sugar, Parsed, Sort};
use crate::syntax::*;

// -- the predicate parameter ---------------------------------------------------

/// A binary predicate P(x, y) over ℕ.
#[derive(Debug, Clone)]
pub struct Pred {
    x: Name,
    y: Name,
    body: Formula,
}

impl Pred {
    pub fn new(x: &str, y: &str, body: Formula) -> Pred {
        Pred { x: x.to_string(), y: y.to_string(), body }
    }

    /// P(t, u), substituting both arguments simultaneously.
    pub fn at(&self, t: Term, u: Term) -> Formula {
        Subst::term(&self.x, t).add_term(&self.y, u).apply_formula(&self.body)
    }

    /// Surface text of P(t, u) for splicing into program sources.
    fn src(&self, t: Term, u: Term) -> String {
        pretty_formula(&self.at(t, u))
    }
}

/// P(x, y) := x = y — the witness of ∃y.P(n, y) is forced to be n itself.
pub fn eq_pred() -> Pred {
    Pred::new("x", "y", Formula::eq(Term::var("x"), Term::var("y")))
}

/// P(x, y) := 0 = 0 — an always-realizable relation. The calculus has no
/// ⊤-introduction proof term, so a reflexivity proof stands in for the unit.
pub fn unit_pred() -> Pred {
    Pred::new("x", "y", Formula::eq(Term::Zero, Term::Zero))
}

// -- sources -------------------------------------------------------------------

fn parse_proof_src(src: &str) -> Proof {
    match parse_with_sugar(src, Sort::Proof) {
        Ok((Parsed::Proof(p), _)) => p,
        Ok(_) => unreachable!(),
        Err(ds) => panic!("corpus proof source failed to parse: {}\n{src}", ds[0]),
    }
}

fn parse_formula_src(src: &str) -> Formula {
    match parse_with_sugar(src, Sort::Formula) {
        Ok((Parsed::Formula(f), _)) => f,
        Ok(_) => unreachable!(),
        Err(ds) => panic!("corpus formula source failed to parse: {}\n{src}", ds[0]),
    }
}

fn parse_closure_src(src: &str) -> Closure {
    match parse_with_sugar(src, Sort::Closure) {
        Ok((Parsed::Closure(cl), _)) => cl,
        Ok(_) => unreachable!(),
        Err(ds) => panic!("corpus closure source failed to parse: {}\n{src}", ds[0]),
    }
}

/// The invariant of the choice stream starting at x: the head realizes
/// ∃y P(x, y) and the tail continues at S(x). The stream function variable is
/// `f`, the index variable `x`.
fn stream_invariant_src(p: &Pred) -> String {
    format!("(exists y ^ N. {}) /\\ f (S(x)) = 0", p.src(Term::var("x"), Term::var("y")))
}

/// The invariant of the dependent-choice sequence continuing from y: some
/// next element z with P(y, z) and a tail from z. The sequence function
/// variable is `g`, the position variable `y`.
fn seq_invariant_src(p: &Pred) -> String {
    format!("exists z ^ N. ({} /\\ g z = 0)", p.src(Term::var("y"), Term::var("z")))
}

/// Source of `nth n a`: project the head of the n-th tail of the stream
/// (free: term `n`, proof `a`).
fn nth_stream_src(p: &Pred) -> String {
    let inv = stream_invariant_src(p);
    format!("fst(fix[k. nu(k; (x, f). {inv})](n; a; (s, m). snd(s)))")
}

/// Source of `nth n d` for a dependent-choice sequence d : ∃x.ν…: step n
/// times from the packed start (free: term `n`, proof `d`).
fn nth_seq_src(p: &Pred) -> String {
    let inv = seq_invariant_src(p);
    format!(
        "fix[k. exists x ^ N. nu(x; (y, g). {inv})]\
         (n; d; (e, m). [wit(prf(e)), snd(prf(prf(e)))])"
    )
}

/// `nth n a` for the choice stream, with `n` and `a` left free for splicing.
pub fn nth_stream(p: &Pred) -> Proof {
    parse_proof_src(&nth_stream_src(p))
}

/// `nth n d` for a dependent-choice sequence, with `n` and `d` left free.
pub fn nth_seq(p: &Pred) -> Proof {
    parse_proof_src(&nth_seq_src(p))
}

/// The choice stream `cofix … (H x, b (S(x)))` with the hypothesis H inlined.
pub fn choice_stream(p: &Pred, h: &Proof) -> Proof {
    let inv = stream_invariant_src(p);
    let raw = parse_proof_src(&format!(
        "cofix[f x ^ N. {inv}](0; (b, x). (H x, b (S(x))))"
    ));
    Subst::proof("H", h.clone()).apply_proof(&raw)
}

/// The dependent-choice sequence from x0, with H inlined and x0 spliced.
pub fn choice_seq(p: &Pred, h: &Proof, x0: Term) -> Proof {
    let inv = seq_invariant_src(p);
    let raw = parse_proof_src(&format!(
        "cofix[g y ^ N. {inv}](x0; (b, y). dest H y as (z, h) in [z, (h, b z)])"
    ));
    Subst::term("x0", x0).apply_proof(&Subst::proof("H", h.clone()).apply_proof(&raw))
}

// -- the realizers -------------------------------------------------------------

/// The countable-choice realizer over P.
pub fn ac_n_with(p: &Pred) -> Proof {
    let inv = stream_invariant_src(p);
    let nth = nth_stream_src(p);
    parse_proof_src(&format!(
        "fun H. let a = cofix[f x ^ N. {inv}](0; (b, x). (H x, b (S(x)))) in \
         [lam n. wit({nth}), lam n. prf({nth})]"
    ))
}

/// AC_ℕ at the shipped instance P(x, y) := x = y.
pub fn ac_n() -> Proof {
    ac_n_with(&eq_pred())
}

/// ∀x^ℕ ∃y^ℕ P(x,y) → ∃f^{ℕ→ℕ} ∀x^ℕ P(x, f(x)).
pub fn ac_n_type_with(p: &Pred) -> Formula {
    parse_formula_src(&format!(
        "(forall x ^ N. exists y ^ N. {}) -> exists f ^ N -> N. forall x ^ N. {}",
        p.src(Term::var("x"), Term::var("y")),
        p.src(Term::var("x"), Term::app(Term::var("f"), Term::var("x"))),
    ))
}

pub fn ac_n_type() -> Formula {
    ac_n_type_with(&eq_pred())
}

/// The dependent-choice realizer over P. The sequence is packed as a
/// dependent pair [x0, c] so that f(0) = x0 holds by evaluation.
pub fn dc_with(p: &Pred) -> Proof {
    let inv = seq_invariant_src(p);
    let nth = nth_seq_src(p);
    let nth = nth.replace("(n; d;", "(n; [x0, c];");
    parse_proof_src(&format!(
        "fun H. lam x0. \
         let c = cofix[g y ^ N. {inv}](x0; (b, y). dest H y as (z, h) in [z, (h, b z)]) in \
         [lam n. wit({nth}), (refl, lam n. fst(prf(prf({nth}))))]"
    ))
}

/// DC at the shipped instance P(x, y) := 0 = 0.
pub fn dc() -> Proof {
    dc_with(&unit_pred())
}

/// ∀x^ℕ ∃y^ℕ P(x,y) → ∀x0^ℕ ∃f^{ℕ→ℕ} (f(0) = x0 ∧ ∀n^ℕ P(f(n), f(S(n)))).
pub fn dc_type_with(p: &Pred) -> Formula {
    let f = || Term::var("f");
    parse_formula_src(&format!(
        "(forall x ^ N. exists y ^ N. {}) -> forall x0 ^ N. exists f ^ N -> N. \
         (f 0 = x0 /\\ forall n ^ N. {})",
        p.src(Term::var("x"), Term::var("y")),
        p.src(
            Term::app(f(), Term::var("n")),
            Term::app(f(), Term::succ(Term::var("n"))),
        ),
    ))
}

pub fn dc_type() -> Formula {
    dc_type_with(&unit_pred())
}

// -- witness extraction --------------------------------------------------------

pub fn numeral(n: u64) -> Term {
    let mut t = Term::Zero;
    for _ in 0..n {
        t = Term::succ(t);
    }
    t
}

pub fn numeral_value(t: &Term) -> Option<u64> {
    match t {
        Term::Zero => Some(0),
        Term::Succ(u) => numeral_value(u).map(|n| n + 1),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct Extraction {
    /// the extracted numeral f(n)
    pub value: Term,
    /// the store after the query — pass it back in to reuse unfoldings
    pub store: Store,
    pub stats: Stats,
}

/// Name of the store binding holding the shared stream.
pub const STREAM: &str = "a";

/// Evaluate f(n) = wit(nth n a) against the shared choice stream built from
/// `h : ∀x∃y P(x,y)`. Passing the store of a previous extraction reuses the
/// unfoldings it already performed.
pub fn extract_choice(
    p: &Pred,
    h: &Proof,
    n: u64,
    fuel: u64,
    prev: Option<Store>,
) -> Result<Extraction, MachineError> {
    let tau = match prev {
        Some(tau) => tau,
        None => {
            let stream = macros::expand_proof(&choice_stream(p, h))
                .map_err(|e| MachineError { message: e.to_string() })?;
            Store(vec![Binding {
                name: STREAM.to_string(),
                body: Storable::Proof(stream),
                ann: None,
            }])
        }
    };
    let nth = Subst::term("n", numeral(n)).apply_proof(&nth_stream(p));
    let t = macros::expand_term(&Term::wit(nth))
        .map_err(|e| MachineError { message: e.to_string() })?;
    let (value, store, stats) = machine::reduce_term_stats(&t, &tau, fuel)?;
    Ok(Extraction { value, store, stats })
}

// -- demo closures -------------------------------------------------------------

/// A closed command forcing f(n) to a numeral: the answer arrives at the free
/// co-variable 'out as a dependent pair whose witness is the numeral.
fn demo_closure(wit_term: Term, binding: (&str, Proof)) -> Closure {
    let t = pretty_term(&wit_term);
    let (name, stream) = binding;
    let src = format!(
        "<([{t}, refl] : exists w ^ N. w = w) | dest~ (v, b) -> <[v, b] | 'out>> \
         [{name} := {}]",
        pretty_proof(&stream),
    );
    let cl = parse_closure_src(&src);
    macros::expand_closure(&cl).expect("demo closures expand")
}

/// Demo for AC_ℕ: extract f(n) with hypothesis H and predicate P.
pub fn acn_demo(p: &Pred, h: &Proof, n: u64) -> Closure {
    let nth = Subst::term("n", numeral(n)).apply_proof(&nth_stream(p));
    demo_closure(Term::wit(nth), (STREAM, choice_stream(p, h)))
}

/// Demo for DC: extract f(n) for the sequence from x0 = 0.
pub fn dc_demo(p: &Pred, h: &Proof, n: u64) -> Closure {
    let seq = choice_seq(p, h, Term::Zero);
    let packed = Proof::DepPair {
        t: Box::new(Term::Zero),
        p: Box::new(Proof::var("c")),
        ann: None,
    };
    let nth = Subst::proof("d", packed)
        .apply_proof(&Subst::term("n", numeral(n)).apply_proof(&nth_seq(p)));
    demo_closure(Term::wit(nth), ("c", seq))
}

/// Read the numeral out of a finished demo command ⟨[v, b]‖'out⟩.
pub fn demo_answer(command: &Command, store: &Store) -> Option<u64> {
    let Command::Proof { p, .. } = command else { return None };
    match machine::resolve(p, store) {
        Proof::DepPair { t, .. } => numeral_value(&t),
        _ => None,
    }
}

/// The canonical AC hypothesis for P(x, y) := x = y.
pub fn eq_hypothesis() -> Proof {
    parse_proof_src("lam x. [x, refl]")
}

/// The canonical hypothesis for P(x, y) := 0 = 0.
pub fn unit_hypothesis() -> Proof {
    parse_proof_src("lam x. [0, refl]")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::names::{alpha_eq_formula, alpha_eq_term};
    use crate::smallstep;
    use crate::syntax::nef_proof;
    use crate::typecheck::check_closed_proof;

    const FUEL: u64 = 1_000_000;

    #[test]
    fn ac_n_typechecks_at_its_announced_type() {
        let p = macros::expand_proof(&ac_n()).unwrap();
        let r = check_closed_proof(&p, &ac_n_type());
        assert!(r.is_ok(), "{}", r.unwrap_err());
    }

    #[test]
    fn dc_typechecks_at_its_announced_type() {
        let p = macros::expand_proof(&dc()).unwrap();
        let r = check_closed_proof(&p, &dc_type());
        assert!(r.is_ok(), "{}", r.unwrap_err());
    }

    #[test]
    fn expansion_exposes_the_cofix_stream_and_removes_sugar() {
        fn has_cofix(p: &Proof) -> bool {
            pretty_proof(p).contains("cofix")
        }
        let expanded = macros::expand_proof(&ac_n()).unwrap();
        assert!(has_cofix(&expanded));
        assert!(macros::find_named_sugar_proof(&expanded).is_none());
        // erasure panics on leftover sugar nodes, so this doubles as a check
        let _ = machine::erase_proof(&expanded);
        let expanded = macros::expand_proof(&dc()).unwrap();
        let _ = machine::erase_proof(&expanded);
    }

    #[test]
    fn the_extraction_pair_is_nef() {
        // the body of the AC let must be NEF for prf to be admissible
        let nth = nth_stream_src(&eq_pred());
        let pair = parse_proof_src(&format!(
            "[lam n. wit({nth}), lam n. prf({nth})]"
        ));
        assert!(nef_proof(&pair));
        // the stream itself is not: it consumes the hypothesis classically
        assert!(!nef_proof(&choice_stream(&eq_pred(), &eq_hypothesis())));
    }

    #[test]
    fn extraction_matches_the_identity_oracle() {
        let p = eq_pred();
        let h = eq_hypothesis();
        for n in 0..4 {
            let ex = extract_choice(&p, &h, n, FUEL, None).unwrap();
            assert!(
                alpha_eq_term(&ex.value, &numeral(n)),
                "f({n}) = {}",
                pretty_term(&ex.value)
            );
        }
    }

    #[test]
    fn extraction_shares_unfoldings_across_queries() {
        let p = eq_pred();
        let h = eq_hypothesis();
        let first = extract_choice(&p, &h, 3, FUEL, None).unwrap();
        assert!(first.stats.cofix_unfoldings >= 3);
        for n in 0..=3 {
            let again = extract_choice(&p, &h, n, FUEL, Some(first.store.clone())).unwrap();
            assert_eq!(again.stats.cofix_unfoldings, 0, "re-query at {n}");
            assert!(alpha_eq_term(&again.value, &numeral(n)));
        }
    }

    #[test]
    fn demo_closures_agree_on_both_machines() {
        for cl in [
            acn_demo(&eq_pred(), &eq_hypothesis(), 2),
            dc_demo(&unit_pred(), &unit_hypothesis(), 2),
        ] {
            let report = smallstep::agree(&cl, FUEL);
            assert!(report.agree, "{report:?}");
        }
    }

    #[test]
    fn demo_answers_are_the_expected_numerals() {
        let cl = acn_demo(&eq_pred(), &eq_hypothesis(), 3);
        let (out, _) = machine::run(&cl, FUEL);
        let fin = out.closure();
        assert!(out.is_normal());
        assert_eq!(demo_answer(&fin.command, &fin.store), Some(3));
        let cl = dc_demo(&unit_pred(), &unit_hypothesis(), 3);
        let (out, _) = machine::run(&cl, FUEL);
        let fin = out.closure();
        assert!(out.is_normal());
        assert_eq!(demo_answer(&fin.command, &fin.store), Some(0));
    }

    #[test]
    fn types_match_their_displayed_form() {
        assert!(alpha_eq_formula(
            &ac_n_type(),
            &parse_formula_src(
                "(forall x ^ N. exists y ^ N. x = y) -> \
                 exists f ^ N -> N. forall x ^ N. x = f x"
            )
        ));
        assert!(alpha_eq_formula(
            &dc_type(),
            &parse_formula_src(
                "(forall x ^ N. exists y ^ N. 0 = 0) -> forall x0 ^ N. \
                 exists f ^ N -> N. (f 0 = x0 /\\ forall n ^ N. 0 = 0)"
            )
        ));
    }

    #[test]
    fn shipped_source_files_match_the_library_terms() {
        use crate::names::{alpha_eq, Node};
        use crate::parser::parse_file;
        for (src, proof, ty, demo) in [
            (
                include_str!("../../../corpus/ac_n.dlpaw"),
                ac_n(),
                ac_n_type(),
                acn_demo(&eq_pred(), &eq_hypothesis(), 2),
            ),
            (
                include_str!("../../../corpus/dc.dlpaw"),
                dc(),
                dc_type(),
                dc_demo(&unit_pred(), &unit_hypothesis(), 2),
            ),
        ] {
            let (file, _) = parse_file(src).expect("corpus file parses");
            assert_eq!(file.defs.len(), 1);
            assert_eq!(file.runs.len(), 1);
            let def = &file.defs[0];
            assert!(alpha_eq(Node::Formula(&def.formula), Node::Formula(&ty)));
            let lhs = crate::macros::expand_proof(&def.proof).unwrap();
            let rhs = crate::macros::expand_proof(&proof).unwrap();
            assert!(alpha_eq(Node::Proof(&lhs), Node::Proof(&rhs)));
            assert!(alpha_eq(Node::Closure(&file.runs[0]), Node::Closure(&demo)));
        }
    }
}
