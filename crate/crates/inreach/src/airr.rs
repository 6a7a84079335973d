//! The deterministic complete automaton of normal forms.
//!
//! A state is the set of proper non-variable left-hand-side subterms
//! (variables anonymized) that a term matches. Terms matching a whole
//! left-hand side, or having a reducible argument, go to the single
//! non-final sink `pred`.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::automata::{StateId, StateLabel, TreeAutomaton};
use crate::rewriting::Trs;
use crate::terms::{for_each_product, positions, subterm_at, Symbol, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AirrError {
    #[error("rule `{0}` is not left-linear")]
    NotLeftLinear(String),
}

/// Normal-form automaton together with its transition function.
#[derive(Debug, Clone)]
pub struct Airr {
    pub automaton: TreeAutomaton,
    pub red: StateId,
    table: HashMap<(Symbol, Vec<StateId>), StateId>,
    fragments: Vec<Term>,
    sets: Vec<Vec<usize>>,
}

impl Airr {
    /// The unique target of `f(args)`.
    pub fn successor(&self, f: &Symbol, args: &[StateId]) -> StateId {
        self.table[&(f.clone(), args.to_vec())]
    }

    /// State reached by a ground term; `None` for open terms or unknown symbols.
    pub fn state_of(&self, t: &Term) -> Option<StateId> {
        match t {
            Term::Var(_) => None,
            Term::App(f, args) => {
                let qs = args
                    .iter()
                    .map(|a| self.state_of(a))
                    .collect::<Option<Vec<_>>>()?;
                self.table.get(&(f.clone(), qs)).copied()
            }
        }
    }

    pub fn is_red(&self, q: StateId) -> bool {
        q == self.red
    }

    /// Fragments matched by terms reaching `q` (empty for `pred`).
    pub fn fragments_of(&self, q: StateId) -> Vec<&Term> {
        self.sets
            .get(q.index())
            .map(|s| s.iter().map(|&i| &self.fragments[i]).collect())
            .unwrap_or_default()
    }
}

/// Shape of a pattern one level deep: root symbol and, per argument, the
/// fragment it must match (`None` for a variable).
type Shape = (Symbol, Vec<Option<usize>>);

fn shape(t: &Term, index: &HashMap<Term, usize>) -> Shape {
    match t {
        Term::App(f, args) => (
            f.clone(),
            args.iter()
                .map(|a| if a.is_var() { None } else { Some(index[a]) })
                .collect(),
        ),
        Term::Var(_) => unreachable!("patterns are rooted by symbols"),
    }
}

fn matches(s: &Shape, f: &Symbol, args: &[&Vec<usize>]) -> bool {
    s.0 == *f
        && s.1
            .iter()
            .zip(args)
            .all(|(req, have)| req.is_none_or(|i| have.binary_search(&i).is_ok()))
}

/// Builds the normal-form automaton of a left-linear TRS.
pub fn build_airr(trs: &Trs) -> Result<Airr, AirrError> {
    if let Some(r) = trs.rules().iter().find(|r| !crate::terms::is_linear(r.lhs())) {
        return Err(AirrError::NotLeftLinear(r.to_string()));
    }
    let sig = trs.signature().clone();
    let lhss: Vec<Term> = trs.rules().iter().map(|r| r.lhs().anonymize()).collect();
    let mut frag_set = BTreeSet::new();
    for l in &lhss {
        for p in positions(l).into_iter().filter(|p| !p.is_root()) {
            let sub = subterm_at(l, &p).expect("valid position");
            if !sub.is_var() {
                frag_set.insert(sub.clone());
            }
        }
    }
    let fragments: Vec<Term> = frag_set.into_iter().collect();
    let index: HashMap<Term, usize> = fragments
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    let frag_shapes: Vec<Shape> = fragments.iter().map(|t| shape(t, &index)).collect();
    let lhs_shapes: Vec<Shape> = lhss.iter().map(|t| shape(t, &index)).collect();

    // None stands for the sink.
    let step = |f: &Symbol, args: &[&Vec<usize>]| -> Option<Vec<usize>> {
        if lhs_shapes.iter().any(|s| matches(s, f, args)) {
            return None;
        }
        Some(
            frag_shapes
                .iter()
                .enumerate()
                .filter(|(_, s)| matches(s, f, args))
                .map(|(i, _)| i)
                .collect(),
        )
    };

    let mut known: BTreeSet<Vec<usize>> = BTreeSet::new();
    loop {
        let current: Vec<Vec<usize>> = known.iter().cloned().collect();
        let mut found = Vec::new();
        for f in sig.iter() {
            let pools: Vec<&Vec<Vec<usize>>> = (0..f.arity()).map(|_| &current).collect();
            for_each_product(&pools, |args| {
                let refs: Vec<&Vec<usize>> = args.iter().collect();
                if let Some(s) = step(f, &refs) {
                    found.push(s);
                }
            });
        }
        let before = known.len();
        known.extend(found);
        if known.len() == before {
            break;
        }
    }

    let sets: Vec<Vec<usize>> = known.into_iter().collect();
    let mut automaton = TreeAutomaton::new(sig.clone());
    for i in 0..sets.len() {
        let q = automaton.add_state(StateLabel::Name(format!("p{}", i)));
        automaton.set_final(q);
    }
    let red = automaton.add_state(StateLabel::name("pred"));
    let id_of: HashMap<&Vec<usize>, StateId> = sets
        .iter()
        .enumerate()
        .map(|(i, s)| (s, StateId(i as u32)))
        .collect();
    let all: Vec<StateId> = automaton.states().collect();
    let mut table = HashMap::new();
    for f in sig.iter() {
        let pools: Vec<&Vec<StateId>> = (0..f.arity()).map(|_| &all).collect();
        for_each_product(&pools, |args| {
            let target = if args.contains(&red) {
                red
            } else {
                let refs: Vec<&Vec<usize>> = args.iter().map(|q| &sets[q.index()]).collect();
                step(f, &refs).map_or(red, |s| id_of[&s])
            };
            table.insert((f.clone(), args.to_vec()), target);
        });
    }
    let mut entries: Vec<_> = table.iter().collect();
    entries.sort();
    for ((f, args), &t) in entries {
        automaton.add_delta(f.clone(), args.clone(), t);
    }
    Ok(Airr {
        automaton,
        red,
        table,
        fragments,
        sets,
    })
}

/// The state a ground term reaches in `airr`.
pub fn airr_state_of(airr: &Airr, t: &Term) -> Option<StateId> {
    airr.state_of(t)
}
