//! Store algebra: lookup with positional split, independence, compatibility,
//! ordered union and the extension order. Stores are append-only lists of
//! bindings; a name may be rebound, in which case the rightmost binding wins.

use crate::names::{alpha_eq, binding_ns, NamePool, Node, Ns, Subst};
use crate::syntax::*;
use std::collections::BTreeSet;

/// Rightmost binding for `name`, with its index.
pub fn lookup<'a>(store: &'a Store, name: &str) -> Option<(usize, &'a Binding)> {
    store.0.iter().enumerate().rev().find(|(_, b)| b.name == name)
}

/// Split `τ` as `τ0 [name := body] τ1` around the rightmost binding of `name`.
pub fn lookup_split(store: &Store, name: &str) -> Option<(Store, Binding, Store)> {
    let (i, _) = lookup(store, name)?;
    let before = Store(store.0[..i].to_vec());
    let after = Store(store.0[i + 1..].to_vec());
    Some((before, store.0[i].clone(), after))
}

/// Replace the binding at `idx`, keeping everything else in place.
pub fn replace_at(store: &Store, idx: usize, binding: Binding) -> Store {
    let mut out = store.0.clone();
    out[idx] = binding;
    Store(out)
}

/// Drop the binding at `idx` and splice `mid` in its place.
pub fn splice_at(store: &Store, idx: usize, mid: Vec<Binding>) -> Store {
    let mut out = store.0[..idx].to_vec();
    out.extend(mid);
    out.extend_from_slice(&store.0[idx + 1..]);
    Store(out)
}

fn bindings_eq(a: &Binding, b: &Binding) -> bool {
    match (&a.body, &b.body) {
        (Storable::Proof(p), Storable::Proof(q)) => alpha_eq(Node::Proof(p), Node::Proof(q)),
        (Storable::Context(e), Storable::Context(f)) => {
            alpha_eq(Node::Context(e), Node::Context(f))
        }
        _ => false,
    }
}

/// dom(τ) ∩ dom(τ') = ∅.
pub fn independent(a: &Store, b: &Store) -> bool {
    let da = a.domain();
    b.0.iter().all(|bind| !da.contains(&bind.name))
}

/// Every name bound in both stores is bound to the same (α-equivalent) body.
pub fn compatible(a: &Store, b: &Store) -> bool {
    for bind in &a.0 {
        if let Some((_, other)) = lookup(b, &bind.name) {
            let (_, mine) = lookup(a, &bind.name).unwrap();
            if !bindings_eq(mine, other) {
                return false;
            }
        }
    }
    true
}

/// τ ◁ τ': compatible and dom(τ) ⊆ dom(τ').
pub fn extends(small: &Store, big: &Store) -> bool {
    compatible(small, big) && small.domain().is_subset(&big.domain())
}

/// Ordered compatible union τ ⋈ τ'. Scanning left to right, the first shared
/// binding must be preceded by independent prefixes on both sides and carry
/// the same body; the prefixes are concatenated, the shared binding kept once
/// and the remainders joined recursively. Returns None for incompatible
/// stores or for shared bindings interleaved in different orders.
pub fn union(a: &Store, b: &Store) -> Option<Store> {
    let dom_b = b.domain();
    // first binding of `a` whose name also occurs in `b`
    let shared = a.0.iter().position(|bind| dom_b.contains(&bind.name));
    match shared {
        None => {
            if independent(a, b) {
                let mut out = a.0.clone();
                out.extend(b.0.iter().cloned());
                Some(Store(out))
            } else {
                None
            }
        }
        Some(i) => {
            let name = &a.0[i].name;
            let j = b.0.iter().position(|bind| &bind.name == name).unwrap();
            let (a0, a1) = (Store(a.0[..i].to_vec()), Store(a.0[i + 1..].to_vec()));
            let (b0, b1) = (Store(b.0[..j].to_vec()), Store(b.0[j + 1..].to_vec()));
            if !independent(&a0, &b0) || !bindings_eq(&a.0[i], &b.0[j]) {
                return None;
            }
            // the shared prefix of `b` must not bind names still pending in
            // the tail of `a` in a different order
            if !independent(&b0, &a1) || !independent(&a0, &b1) {
                return None;
            }
            let rest = union(&a1, &b1)?;
            let mut out = a0.0;
            out.extend(b0.0);
            out.push(a.0[i].clone());
            out.extend(rest.0);
            Some(Store(out))
        }
    }
}

/// A binder about to enter the store must be renamed when its name is already
/// live (rightmost-wins lookup would hide the old binding from references that
/// still expect it) or when a fixpoint unfolding has the name detached and due
/// back (the re-graft would then shadow the new binding).
fn must_rename(name: &str, dom: &BTreeSet<Name>, pool: &NamePool) -> bool {
    (dom.contains(name) || pool.is_detached(name)) && !is_reserved(name)
}

/// Bind `binder` in front of the re-grafted `tail`. Only the binder itself
/// is freshened on clash: the tail consists of bindings that were carried
/// inside a μ̃ while a stored fixpoint was unfolded, and references to them
/// elsewhere in the store expect them back under their original names.
pub fn append_regraft(
    base: &Store,
    binder: Binding,
    tail: &Store,
    cmd: &Command,
    pool: &mut NamePool,
) -> (Store, Command) {
    let dom = base.domain();
    let clash = must_rename(&binder.name, &dom, pool)
        || tail.0.iter().any(|b| b.name == binder.name);
    let sub = if clash {
        let n2 = pool.gensym(&format!("{}0", binder.name));
        let sub = match binding_ns(&binder) {
            Ns::Proof => Subst::proof(&binder.name, Proof::var(&n2)),
            Ns::Covar => Subst::covar(&binder.name, Context::covar(&n2)),
            Ns::Term => unreachable!("stores never bind term variables"),
        };
        Some((n2, sub))
    } else {
        pool.reserve(&binder.name);
        None
    };
    let (name, cmd) = match &sub {
        Some((n2, s)) => (n2.clone(), s.apply_command(cmd)),
        None => (binder.name.clone(), cmd.clone()),
    };
    let mut out = base.0.clone();
    out.push(Binding { name, body: binder.body, ann: binder.ann });
    for b in &tail.0 {
        pool.reserve(&b.name);
        let body = match &sub {
            Some((_, s)) => s.apply_storable(&b.body),
            None => b.body.clone(),
        };
        out.push(Binding { name: b.name.clone(), body, ann: b.ann.clone() });
    }
    (Store(out), cmd)
}

/// Append `extra` to `base`, freshening clashing binders in `extra` and in
/// the command that mentions them.
pub fn append_fresh(
    base: &Store,
    extra: &Store,
    cmd: &Command,
    pool: &mut NamePool,
) -> (Store, Command) {
    let mut dom = base.domain();
    let mut sub = Subst::empty();
    let mut renamed = Vec::with_capacity(extra.0.len());
    for b in extra.0.iter() {
        let body = sub.apply_storable(&b.body);
        let ann = sub.apply_oform(&b.ann);
        let name = if must_rename(&b.name, &dom, pool) {
            let n2 = pool.gensym(&format!("{}0", b.name));
            sub = match binding_ns(b) {
                Ns::Proof => sub.add_proof(&b.name, Proof::var(&n2)),
                Ns::Covar => sub.add_covar(&b.name, Context::covar(&n2)),
                Ns::Term => unreachable!("stores never bind term variables"),
            };
            n2
        } else {
            pool.reserve(&b.name);
            b.name.clone()
        };
        dom.insert(name.clone());
        renamed.push(Binding { name, body, ann });
    }
    let cmd = if sub.has_mappings() { sub.apply_command(cmd) } else { cmd.clone() };
    let mut out = base.0.clone();
    out.extend(renamed);
    (Store(out), cmd)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pbind(name: &str, p: Proof) -> Binding {
        Binding { name: name.to_string(), body: Storable::Proof(p), ann: None }
    }
    fn ebind(name: &str, e: Context) -> Binding {
        Binding { name: name.to_string(), body: Storable::Context(e), ann: None }
    }
    fn store(bs: Vec<Binding>) -> Store {
        Store(bs)
    }

    #[test]
    fn lookup_prefers_rightmost() {
        let s = store(vec![pbind("a", Proof::refl()), pbind("a", Proof::inj(1, Proof::refl()))]);
        let (i, b) = lookup(&s, "a").unwrap();
        assert_eq!(i, 1);
        assert!(matches!(&b.body, Storable::Proof(Proof::Inj { .. })));
        let (before, hit, after) = lookup_split(&s, "a").unwrap();
        assert_eq!(before.len(), 1);
        assert!(after.is_empty());
        assert!(matches!(&hit.body, Storable::Proof(Proof::Inj { .. })));
    }

    #[test]
    fn independence_and_compatibility() {
        let s1 = store(vec![pbind("a", Proof::refl())]);
        let s2 = store(vec![pbind("b", Proof::refl())]);
        let s3 = store(vec![pbind("a", Proof::refl())]);
        let s4 = store(vec![pbind("a", Proof::inj(1, Proof::refl()))]);
        assert!(independent(&s1, &s2));
        assert!(!independent(&s1, &s3));
        assert!(compatible(&s1, &s3));
        assert!(!compatible(&s1, &s4));
        // α-equivalent bodies count as coinciding
        let s5 = store(vec![pbind("a", Proof::lam_proof("u", Proof::var("u")))]);
        let s6 = store(vec![pbind("a", Proof::lam_proof("v", Proof::var("v")))]);
        assert!(compatible(&s5, &s6));
    }

    #[test]
    fn union_of_independent_stores_concatenates() {
        let s1 = store(vec![pbind("a", Proof::refl())]);
        let s2 = store(vec![ebind("'k", Context::covar("star"))]);
        let u = union(&s1, &s2).unwrap();
        assert_eq!(u.domain().len(), 2);
        assert_eq!(u.0[0].name, "a");
        assert_eq!(u.0[1].name, "'k");
    }

    #[test]
    fn union_merges_around_shared_bindings() {
        let shared = pbind("s", Proof::refl());
        let s1 = store(vec![pbind("a", Proof::refl()), shared.clone(), pbind("b", Proof::refl())]);
        let s2 = store(vec![pbind("c", Proof::refl()), shared.clone(), pbind("d", Proof::refl())]);
        let u = union(&s1, &s2).unwrap();
        let names: Vec<_> = u.0.iter().map(|b| b.name.as_str()).collect();
        assert_eq!(names, vec!["a", "c", "s", "b", "d"]);
        assert!(extends(&s1, &u));
        assert!(extends(&s2, &u));
    }

    #[test]
    fn union_rejects_mismatched_or_reordered_bindings() {
        let s1 = store(vec![pbind("a", Proof::refl()), pbind("b", Proof::refl())]);
        let s2 = store(vec![pbind("b", Proof::refl()), pbind("a", Proof::refl())]);
        assert!(union(&s1, &s2).is_none());
        let s3 = store(vec![pbind("a", Proof::inj(2, Proof::refl()))]);
        assert!(union(&s1, &s3).is_none());
    }

    #[test]
    fn append_fresh_renames_clashes_in_command_too() {
        let base = store(vec![pbind("a", Proof::refl())]);
        let extra = store(vec![pbind("a", Proof::inj(1, Proof::refl()))]);
        let cmd = Command::cut(Proof::var("a"), Context::covar("'k"));
        let mut pool = NamePool::seeded(Node::Store(&base));
        pool.absorb(Node::Store(&extra));
        pool.absorb(Node::Command(&cmd));
        let (joined, cmd2) = append_fresh(&base, &extra, &cmd, &mut pool);
        assert_eq!(joined.len(), 2);
        assert_ne!(joined.0[1].name, "a");
        let Command::Proof { p, .. } = &cmd2 else { panic!() };
        assert!(matches!(p.as_ref(), Proof::Var(n) if *n == joined.0[1].name));
    }
}
