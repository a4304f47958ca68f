//! Reference interpreter and type checker for the dLPA^ω sequent calculus:
//! a classical sequent calculus with dependent types, inductive/coinductive
//! fixpoints, lazy stores and (co-)delimited continuations, expressive enough
//! to give a direct computational interpretation of countable and dependent
//! choice over arithmetic in finite types.
//!
//! Module map:
//! + `syntax` — multi-sorted AST, value grammars, NEF classifier, validators.
//! + `names` — free names, alpha-equivalence, substitution, freshening.
//! + `parser` — surface syntax, `.dlpaw` files, pretty-printer.
//! + `store` — the lazy-environment algebra (lookup, compatibility, union).
//! + `machine` — big-step abstract machine, fueled driver, term reduction.
//! + `smallstep` — focused small-step machine and the agreement harness.
//! + `typecheck` — regular/dependent typing with dependency lists.
//! + `macros` — natural-deduction sugar expansion and admissibility instances.
//! + `corpus` — AC_ℕ / DC proof terms and witness extraction.
//! + `suite` — the property-suite drivers shared by tests and the CLI.

pub mod corpus;
pub mod gen;
pub mod machine;
pub mod macros;
pub mod names;
pub mod parser;
pub mod smallstep;
pub mod store;
pub mod suite;
pub mod syntax;
pub mod typecheck;
