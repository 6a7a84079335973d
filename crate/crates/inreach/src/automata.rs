//! Bottom-up tree automata with colored epsilon transitions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::terms::{compositions, Signature, Symbol, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomatonError {
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("automata are over different signatures")]
    SignatureMismatch,
    #[error("state `{0}` is not a pair state")]
    NotPairAutomaton(String),
    #[error("configuration contains variable `{0}`")]
    UnboundVariable(String),
}

/// Index of a state inside one automaton.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct StateId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Name of a state: a plain identifier or a pair of component names.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum StateLabel {
    Name(String),
    Pair(String, String),
}

impl StateLabel {
    pub fn name(n: &str) -> Self {
        StateLabel::Name(n.to_string())
    }

    pub fn pair(l: &str, r: &str) -> Self {
        StateLabel::Pair(l.to_string(), r.to_string())
    }

    pub fn left(&self) -> Option<&str> {
        match self {
            StateLabel::Pair(l, _) => Some(l),
            StateLabel::Name(_) => None,
        }
    }

    pub fn right(&self) -> Option<&str> {
        match self {
            StateLabel::Pair(_, r) => Some(r),
            StateLabel::Name(_) => None,
        }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateLabel::Name(n) => f.write_str(n),
            StateLabel::Pair(l, r) => write!(f, "{}_{}", l, r),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Color {
    R,
    E,
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Color::R => "R",
            Color::E => "E",
        })
    }
}

/// `symbol(args) -> target`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Delta {
    pub symbol: Symbol,
    pub args: Vec<StateId>,
    pub target: StateId,
}

/// `source ->color target`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Epsilon {
    pub source: StateId,
    pub target: StateId,
    pub color: Color,
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Transition {
    Delta(Delta),
    Epsilon(Epsilon),
}

/// A term whose leaves may be states.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Config {
    State(StateId),
    App(Symbol, Vec<Config>),
}

impl Config {
    /// Converts a term, mapping each variable through `sigma`.
    pub fn instantiate(t: &Term, sigma: &BTreeMap<Var, StateId>) -> Result<Config, AutomatonError> {
        Ok(match t {
            Term::Var(v) => Config::State(
                *sigma
                    .get(v)
                    .ok_or_else(|| AutomatonError::UnboundVariable(v.name().to_string()))?,
            ),
            Term::App(f, args) => Config::App(
                f.clone(),
                args.iter()
                    .map(|a| Config::instantiate(a, sigma))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }

    pub fn from_ground(t: &Term) -> Result<Config, AutomatonError> {
        Config::instantiate(t, &BTreeMap::new())
    }
}

/// Extends a reflexive-transitive closure with the edge `source -> target`.
fn close(fwd: &mut [BTreeSet<StateId>], bwd: &mut [BTreeSet<StateId>], source: StateId, target: StateId) {
    if fwd[source.index()].contains(&target) {
        return;
    }
    let below: Vec<StateId> = fwd[target.index()].iter().copied().collect();
    let above: Vec<StateId> = bwd[source.index()].iter().copied().collect();
    for &x in &above {
        fwd[x.index()].extend(below.iter().copied());
    }
    for &y in &below {
        bwd[y.index()].extend(above.iter().copied());
    }
}

/// A tree automaton. States are numbered densely; epsilon closures are
/// maintained incrementally on every insertion.
#[derive(Clone, Debug)]
pub struct TreeAutomaton {
    signature: Signature,
    labels: Vec<StateLabel>,
    index: HashMap<StateLabel, StateId>,
    finals: BTreeSet<StateId>,
    deltas: BTreeSet<Delta>,
    epsilons: BTreeSet<Epsilon>,
    lhs_index: HashMap<(Symbol, Vec<StateId>), BTreeSet<StateId>>,
    by_symbol: BTreeMap<Symbol, Vec<Delta>>,
    by_target: Vec<Vec<Delta>>,
    by_arg: Vec<Vec<Delta>>,
    eps_out: Vec<Vec<Epsilon>>,
    eps_in: Vec<Vec<Epsilon>>,
    fwd: Vec<BTreeSet<StateId>>,
    bwd: Vec<BTreeSet<StateId>>,
    fwd_e: Vec<BTreeSet<StateId>>,
    bwd_e: Vec<BTreeSet<StateId>>,
}

impl PartialEq for TreeAutomaton {
    fn eq(&self, other: &Self) -> bool {
        self.signature == other.signature
            && self.labels == other.labels
            && self.finals == other.finals
            && self.deltas == other.deltas
            && self.epsilons == other.epsilons
    }
}

impl Eq for TreeAutomaton {}

impl TreeAutomaton {
    pub fn new(signature: Signature) -> Self {
        TreeAutomaton {
            signature,
            labels: Vec::new(),
            index: HashMap::new(),
            finals: BTreeSet::new(),
            deltas: BTreeSet::new(),
            epsilons: BTreeSet::new(),
            lhs_index: HashMap::new(),
            by_symbol: BTreeMap::new(),
            by_target: Vec::new(),
            by_arg: Vec::new(),
            eps_out: Vec::new(),
            eps_in: Vec::new(),
            fwd: Vec::new(),
            bwd: Vec::new(),
            fwd_e: Vec::new(),
            bwd_e: Vec::new(),
        }
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    /// Returns the state with this label, creating it if needed.
    pub fn add_state(&mut self, label: StateLabel) -> StateId {
        if let Some(&id) = self.index.get(&label) {
            return id;
        }
        let id = StateId(self.labels.len() as u32);
        self.index.insert(label.clone(), id);
        self.labels.push(label);
        self.by_target.push(Vec::new());
        self.by_arg.push(Vec::new());
        self.eps_out.push(Vec::new());
        self.eps_in.push(Vec::new());
        self.fwd.push(BTreeSet::from([id]));
        self.bwd.push(BTreeSet::from([id]));
        self.fwd_e.push(BTreeSet::from([id]));
        self.bwd_e.push(BTreeSet::from([id]));
        id
    }

    pub fn state(&self, label: &StateLabel) -> Option<StateId> {
        self.index.get(label).copied()
    }

    /// Looks a state up by its rendered name.
    pub fn state_named(&self, name: &str) -> Option<StateId> {
        self.state(&StateLabel::name(name)).or_else(|| {
            self.labels
                .iter()
                .position(|l| l.to_string() == name)
                .map(|i| StateId(i as u32))
        })
    }

    pub fn label(&self, q: StateId) -> &StateLabel {
        &self.labels[q.index()]
    }

    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.labels.len() as u32).map(StateId)
    }

    pub fn set_final(&mut self, q: StateId) {
        self.finals.insert(q);
    }

    pub fn finals(&self) -> &BTreeSet<StateId> {
        &self.finals
    }

    pub fn set_finals(&mut self, finals: BTreeSet<StateId>) {
        self.finals = finals;
    }

    /// Adds `symbol(args) -> target`; returns false if it was already present.
    pub fn add_delta(&mut self, symbol: Symbol, args: Vec<StateId>, target: StateId) -> bool {
        assert_eq!(symbol.arity(), args.len(), "arity mismatch for {}", symbol);
        let d = Delta {
            symbol,
            args,
            target,
        };
        if self.deltas.contains(&d) {
            return false;
        }
        self.lhs_index
            .entry((d.symbol.clone(), d.args.clone()))
            .or_default()
            .insert(target);
        self.by_symbol.entry(d.symbol.clone()).or_default().push(d.clone());
        self.by_target[target.index()].push(d.clone());
        let mut seen = BTreeSet::new();
        for &a in &d.args {
            if seen.insert(a) {
                self.by_arg[a.index()].push(d.clone());
            }
        }
        self.deltas.insert(d);
        true
    }

    /// Adds `source ->color target`; returns false if it was already present.
    pub fn add_epsilon(&mut self, source: StateId, target: StateId, color: Color) -> bool {
        let e = Epsilon {
            source,
            target,
            color,
        };
        if !self.epsilons.insert(e) {
            return false;
        }
        self.eps_out[source.index()].push(e);
        self.eps_in[target.index()].push(e);
        close(&mut self.fwd, &mut self.bwd, source, target);
        if color == Color::E {
            close(&mut self.fwd_e, &mut self.bwd_e, source, target);
        }
        true
    }

    pub fn add_transition(&mut self, t: Transition) -> bool {
        match t {
            Transition::Delta(d) => self.add_delta(d.symbol, d.args, d.target),
            Transition::Epsilon(e) => self.add_epsilon(e.source, e.target, e.color),
        }
    }

    pub fn deltas(&self) -> &BTreeSet<Delta> {
        &self.deltas
    }

    pub fn epsilons(&self) -> &BTreeSet<Epsilon> {
        &self.epsilons
    }

    pub fn num_transitions(&self) -> usize {
        self.deltas.len() + self.epsilons.len()
    }

    pub fn deltas_with_symbol(&self, f: &Symbol) -> &[Delta] {
        self.by_symbol.get(f).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn deltas_into(&self, q: StateId) -> &[Delta] {
        &self.by_target[q.index()]
    }

    /// Deltas having `q` among their arguments (each listed once).
    pub fn deltas_with_arg(&self, q: StateId) -> &[Delta] {
        &self.by_arg[q.index()]
    }

    pub fn epsilons_from(&self, q: StateId) -> &[Epsilon] {
        &self.eps_out[q.index()]
    }

    pub fn epsilons_into(&self, q: StateId) -> &[Epsilon] {
        &self.eps_in[q.index()]
    }

    /// Targets of the exact delta `f(args)`, if any.
    pub fn targets(&self, f: &Symbol, args: &[StateId]) -> Option<&BTreeSet<StateId>> {
        self.lhs_index.get(&(f.clone(), args.to_vec()))
    }

    /// States reachable from `q` by epsilon transitions of any color, `q` included.
    pub fn closure(&self, q: StateId) -> &BTreeSet<StateId> {
        &self.fwd[q.index()]
    }

    /// States from which `q` is reachable by epsilon transitions, `q` included.
    pub fn co_closure(&self, q: StateId) -> &BTreeSet<StateId> {
        &self.bwd[q.index()]
    }

    /// States reachable from `q` by E-transitions only, `q` included.
    pub fn e_closure(&self, q: StateId) -> &BTreeSet<StateId> {
        &self.fwd_e[q.index()]
    }

    /// States from which `q` is reachable by E-transitions only, `q` included.
    pub fn e_co_closure(&self, q: StateId) -> &BTreeSet<StateId> {
        &self.bwd_e[q.index()]
    }

    /// All states `q` with `c ->* q`.
    pub fn derive_states(&self, c: &Config) -> Result<BTreeSet<StateId>, AutomatonError> {
        match c {
            Config::State(q) => Ok(self.closure(*q).clone()),
            Config::App(f, args) => {
                if !self.signature.contains(f) {
                    return Err(AutomatonError::UnknownSymbol(f.name().to_string()));
                }
                let sets = args
                    .iter()
                    .map(|a| self.derive_states(a))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(self.step_up(f, &sets))
            }
        }
    }

    /// States reached by one delta over argument state sets, closed under epsilons.
    pub fn step_up(&self, f: &Symbol, sets: &[BTreeSet<StateId>]) -> BTreeSet<StateId> {
        let mut out = BTreeSet::new();
        if sets.iter().any(BTreeSet::is_empty) {
            return out;
        }
        for d in self.deltas_with_symbol(f) {
            if d.args.iter().zip(sets).all(|(a, s)| s.contains(a)) {
                out.extend(self.closure(d.target).iter().copied());
            }
        }
        out
    }

    /// States recognizing the ground term `t`.
    pub fn derive_term(&self, t: &Term) -> Result<BTreeSet<StateId>, AutomatonError> {
        self.derive_states(&Config::from_ground(t)?)
    }

    pub fn recognizes(&self, t: &Term, q: StateId) -> bool {
        self.derive_term(t).map(|s| s.contains(&q)).unwrap_or(false)
    }

    /// True when `t` reaches a final state.
    pub fn accepts(&self, t: &Term) -> bool {
        self.derive_term(t)
            .map(|s| s.iter().any(|q| self.finals.contains(q)))
            .unwrap_or(false)
    }

    /// States that can occur in a run ending in one of `targets`.
    fn useful_for(&self, targets: &BTreeSet<StateId>) -> Vec<bool> {
        let mut useful = vec![false; self.num_states()];
        let mut work: Vec<StateId> = Vec::new();
        let mark = |q: StateId, useful: &mut Vec<bool>, work: &mut Vec<StateId>| {
            for &p in self.co_closure(q) {
                if !useful[p.index()] {
                    useful[p.index()] = true;
                    work.push(p);
                }
            }
        };
        for &t in targets {
            mark(t, &mut useful, &mut work);
        }
        while let Some(q) = work.pop() {
            for d in self.deltas_into(q) {
                for &a in &d.args {
                    mark(a, &mut useful, &mut work);
                }
            }
        }
        useful
    }

    /// Every term of size at most `max_size` recognized into one of `targets`.
    pub fn enumerate_language(&self, targets: &BTreeSet<StateId>, max_size: usize) -> BTreeSet<Term> {
        let useful = self.useful_for(targets);
        let mut by_size: Vec<Vec<(Term, BTreeSet<StateId>)>> = vec![Vec::new(); max_size + 1];
        for size in 1..=max_size {
            let mut level = Vec::new();
            for f in self.signature.iter() {
                let deltas: Vec<&Delta> = self
                    .deltas_with_symbol(f)
                    .iter()
                    .filter(|d| useful[d.target.index()])
                    .collect();
                if deltas.is_empty() {
                    continue;
                }
                for split in compositions(size - 1, f.arity()) {
                    let pools: Vec<&Vec<(Term, BTreeSet<StateId>)>> =
                        split.iter().map(|&k| &by_size[k]).collect();
                    if pools.iter().any(|p| p.is_empty()) {
                        continue;
                    }
                    let mut idx = vec![0usize; pools.len()];
                    loop {
                        let mut reached = BTreeSet::new();
                        for d in &deltas {
                            if d
                                .args
                                .iter()
                                .enumerate()
                                .all(|(i, a)| pools[i][idx[i]].1.contains(a))
                            {
                                for &s in self.closure(d.target) {
                                    if useful[s.index()] {
                                        reached.insert(s);
                                    }
                                }
                            }
                        }
                        if !reached.is_empty() {
                            let args = idx
                                .iter()
                                .enumerate()
                                .map(|(i, &j)| pools[i][j].0.clone())
                                .collect();
                            level.push((Term::App(f.clone(), args), reached));
                        }
                        let mut k = pools.len();
                        let mut done = true;
                        while k > 0 {
                            k -= 1;
                            idx[k] += 1;
                            if idx[k] < pools[k].len() {
                                done = false;
                                break;
                            }
                            idx[k] = 0;
                        }
                        if done {
                            break;
                        }
                    }
                }
            }
            by_size[size] = level;
        }
        by_size
            .into_iter()
            .flatten()
            .filter(|(_, s)| s.iter().any(|q| targets.contains(q)))
            .map(|(t, _)| t)
            .collect()
    }

    /// For each state, a smallest recognized term (by size, then canonical order).
    pub fn smallest_terms(&self) -> Vec<Option<Term>> {
        let mut best: Vec<Option<Term>> = vec![None; self.num_states()];
        let better = |cand: &Term, cur: &Option<Term>| match cur {
            None => true,
            Some(c) => (cand.size(), cand) < (c.size(), c),
        };
        loop {
            let mut changed = false;
            for d in &self.deltas {
                let args: Option<Vec<Term>> = d.args.iter().map(|a| best[a.index()].clone()).collect();
                let Some(args) = args else { continue };
                let cand = Term::App(d.symbol.clone(), args);
                for &s in self.closure(d.target) {
                    if better(&cand, &best[s.index()]) {
                        best[s.index()] = Some(cand.clone());
                        changed = true;
                    }
                }
            }
            if !changed {
                return best;
            }
        }
    }

    /// `None` when no target is accessible, otherwise a smallest witness.
    pub fn language_empty(&self, targets: &BTreeSet<StateId>) -> Option<Term> {
        let best = self.smallest_terms();
        targets
            .iter()
            .filter_map(|q| best[q.index()].clone())
            .min_by(|a, b| (a.size(), a).cmp(&(b.size(), b)))
    }

    pub fn accessible_states(&self) -> BTreeSet<StateId> {
        let mut acc = vec![false; self.num_states()];
        loop {
            let mut changed = false;
            for d in &self.deltas {
                if d.args.iter().all(|a| acc[a.index()]) {
                    for &s in self.closure(d.target) {
                        if !acc[s.index()] {
                            acc[s.index()] = true;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        self.states().filter(|q| acc[q.index()]).collect()
    }

    /// Keeps only the states listed (in their current order) and the transitions among them.
    pub fn restrict(&self, keep: &BTreeSet<StateId>) -> TreeAutomaton {
        let mut out = TreeAutomaton::new(self.signature.clone());
        let mut map = HashMap::new();
        for &q in keep {
            map.insert(q, out.add_state(self.label(q).clone()));
        }
        for d in &self.deltas {
            if let (Some(&t), Some(args)) = (
                map.get(&d.target),
                d.args.iter().map(|a| map.get(a).copied()).collect::<Option<Vec<_>>>(),
            ) {
                out.add_delta(d.symbol.clone(), args, t);
            }
        }
        for e in &self.epsilons {
            if let (Some(&s), Some(&t)) = (map.get(&e.source), map.get(&e.target)) {
                out.add_epsilon(s, t, e.color);
            }
        }
        for q in &self.finals {
            if let Some(&m) = map.get(q) {
                out.set_final(m);
            }
        }
        out
    }

    pub fn prune_inaccessible(&self) -> TreeAutomaton {
        self.restrict(&self.accessible_states())
    }

    pub fn is_deterministic(&self) -> bool {
        self.epsilons.is_empty() && self.lhs_index.values().all(|t| t.len() <= 1)
    }

    pub fn is_complete(&self) -> bool {
        let n = self.num_states();
        self.signature.iter().all(|f| {
            let needed = n.checked_pow(f.arity() as u32).unwrap_or(usize::MAX);
            let have = self
                .deltas_with_symbol(f)
                .iter()
                .map(|d| &d.args)
                .collect::<BTreeSet<_>>()
                .len();
            have == needed
        })
    }

    /// The product automaton; pair states are labelled with both component names.
    pub fn product(&self, other: &TreeAutomaton) -> Result<TreeAutomaton, AutomatonError> {
        if self.signature != other.signature {
            return Err(AutomatonError::SignatureMismatch);
        }
        let mut out = TreeAutomaton::new(self.signature.clone());
        let m = other.num_states() as u32;
        for q in self.states() {
            for p in other.states() {
                out.add_state(StateLabel::Pair(
                    self.label(q).to_string(),
                    other.label(p).to_string(),
                ));
            }
        }
        let pair = |q: StateId, p: StateId| StateId(q.0 * m + p.0);
        for f in self.signature.iter() {
            for da in self.deltas_with_symbol(f) {
                for db in other.deltas_with_symbol(f) {
                    let args = da.args.iter().zip(&db.args).map(|(&q, &p)| pair(q, p)).collect();
                    out.add_delta(f.clone(), args, pair(da.target, db.target));
                }
            }
        }
        for e in &self.epsilons {
            for p in other.states() {
                out.add_epsilon(pair(e.source, p), pair(e.target, p), e.color);
            }
        }
        for e in &other.epsilons {
            for q in self.states() {
                out.add_epsilon(pair(q, e.source), pair(q, e.target), e.color);
            }
        }
        for &q in &self.finals {
            for &p in &other.finals {
                out.set_final(pair(q, p));
            }
        }
        Ok(out)
    }

    /// Forgets the right component of every pair state.
    pub fn project_left(&self) -> Result<TreeAutomaton, AutomatonError> {
        let mut out = TreeAutomaton::new(self.signature.clone());
        let mut map = Vec::with_capacity(self.num_states());
        for q in self.states() {
            let l = self
                .label(q)
                .left()
                .ok_or_else(|| AutomatonError::NotPairAutomaton(self.label(q).to_string()))?;
            map.push(out.add_state(StateLabel::name(l)));
        }
        for d in &self.deltas {
            let args = d.args.iter().map(|a| map[a.index()]).collect();
            out.add_delta(d.symbol.clone(), args, map[d.target.index()]);
        }
        for e in &self.epsilons {
            let (s, t) = (map[e.source.index()], map[e.target.index()]);
            if s != t {
                out.add_epsilon(s, t, e.color);
            }
        }
        for q in &self.finals {
            out.set_final(map[q.index()]);
        }
        Ok(out)
    }

    /// Removes every epsilon transition of the given color.
    pub fn strip_color(&self, color: Color) -> TreeAutomaton {
        let mut out = TreeAutomaton::new(self.signature.clone());
        for q in self.states() {
            out.add_state(self.label(q).clone());
        }
        for d in &self.deltas {
            out.add_delta(d.symbol.clone(), d.args.clone(), d.target);
        }
        for e in self.epsilons.iter().filter(|e| e.color != color) {
            out.add_epsilon(e.source, e.target, e.color);
        }
        out.finals = self.finals.clone();
        out
    }

    /// `q` and `q'` are related by single-step `color` transitions in both directions.
    pub fn e_equivalent(&self, q: StateId, q2: StateId) -> bool {
        self.mutual(q, q2, Color::E)
    }

    fn mutual(&self, q: StateId, q2: StateId, color: Color) -> bool {
        q == q2
            || (self.epsilons.contains(&Epsilon {
                source: q,
                target: q2,
                color,
            }) && self.epsilons.contains(&Epsilon {
                source: q2,
                target: q,
                color,
            }))
    }

    /// Class representative (smallest member) of every state under the
    /// equivalence generated by mutual single-step `color` transitions.
    pub fn classes(&self, color: Color) -> Vec<StateId> {
        let mut parent: Vec<u32> = (0..self.num_states() as u32).collect();
        fn find(p: &mut [u32], x: u32) -> u32 {
            let mut r = x;
            while p[r as usize] != r {
                r = p[r as usize];
            }
            let mut c = x;
            while p[c as usize] != r {
                let n = p[c as usize];
                p[c as usize] = r;
                c = n;
            }
            r
        }
        for e in self.epsilons.iter().filter(|e| e.color == color) {
            if self.mutual(e.source, e.target, color) {
                let (a, b) = (find(&mut parent, e.source.0), find(&mut parent, e.target.0));
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                parent[hi as usize] = lo;
            }
        }
        (0..self.num_states() as u32)
            .map(|x| StateId(find(&mut parent, x)))
            .collect()
    }

    /// Merges the classes of the mutual `color` relation into single states.
    pub fn quotient(&self, color: Color) -> TreeAutomaton {
        let rep = self.classes(color);
        let mut out = TreeAutomaton::new(self.signature.clone());
        let mut map = HashMap::new();
        for q in self.states() {
            if rep[q.index()] == q {
                map.insert(q, out.add_state(self.label(q).clone()));
            }
        }
        let m = |q: StateId| map[&rep[q.index()]];
        for d in &self.deltas {
            out.add_delta(d.symbol.clone(), d.args.iter().map(|&a| m(a)).collect(), m(d.target));
        }
        for e in &self.epsilons {
            if m(e.source) != m(e.target) {
                out.add_epsilon(m(e.source), m(e.target), e.color);
            }
        }
        for &q in &self.finals {
            out.set_final(m(q));
        }
        out
    }

    /// Returns a copy whose final states are exactly `finals`.
    pub fn with_finals(&self, finals: BTreeSet<StateId>) -> TreeAutomaton {
        let mut out = self.clone();
        out.finals = finals;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timbuk::{parse_spec, parse_term};

    const EX: &str = include_str!("../../../fixtures/running.tbk");

    fn ex() -> (Signature, TreeAutomaton) {
        let spec = parse_spec(EX).unwrap();
        let a = spec.automaton("A0").unwrap().clone();
        (spec.signature.clone(), a)
    }

    fn term(sig: &Signature, s: &str) -> Term {
        parse_term(sig, &[], s).unwrap()
    }

    fn id(a: &TreeAutomaton, n: &str) -> StateId {
        a.state_named(n).unwrap()
    }

    #[test]
    fn derive_and_recognize() {
        let (sig, a) = ex();
        let t = term(&sig, "f(c(a(s(0)),n))");
        assert_eq!(a.derive_term(&t).unwrap(), BTreeSet::from([id(&a, "qf")]));
        assert!(a.recognizes(&t, id(&a, "qf")));
        assert!(!a.recognizes(&term(&sig, "n"), id(&a, "qf")));
        assert!(a.recognizes(&term(&sig, "0"), id(&a, "q0")));
        let q = id(&a, "q0");
        assert_eq!(a.derive_states(&Config::State(q)).unwrap(), BTreeSet::from([q]));
        let bad = Config::App(Symbol::new("zz", 0), vec![]);
        assert!(matches!(a.derive_states(&bad), Err(AutomatonError::UnknownSymbol(_))));
    }

    #[test]
    fn enumeration_and_emptiness() {
        let (sig, a) = ex();
        let qf = BTreeSet::from([id(&a, "qf")]);
        let lang = a.enumerate_language(&qf, 10);
        assert_eq!(lang, BTreeSet::from([term(&sig, "f(c(a(s(0)),n))")]));
        assert!(a.enumerate_language(&BTreeSet::new(), 10).is_empty());
        assert_eq!(a.language_empty(&qf), Some(term(&sig, "f(c(a(s(0)),n))")));
        let empty = TreeAutomaton::new(sig.clone());
        assert_eq!(empty.language_empty(&BTreeSet::new()), None);
    }

    #[test]
    fn determinism_and_completeness() {
        let (_, mut a) = ex();
        assert!(a.is_deterministic());
        assert!(!a.is_complete());
        let (q0, qs) = (id(&a, "q0"), id(&a, "qs"));
        a.add_epsilon(q0, qs, Color::R);
        assert!(!a.is_deterministic());
    }

    #[test]
    fn pruning_drops_junk() {
        let (_, mut a) = ex();
        let before = a.clone();
        assert_eq!(a.prune_inaccessible(), before);
        let junk = a.add_state(StateLabel::name("junk"));
        let qf = id(&a, "qf");
        a.add_delta(Symbol::new("f", 1), vec![junk], qf);
        let pruned = a.prune_inaccessible();
        assert_eq!(pruned.num_states(), 6);
        assert_eq!(pruned, before);
    }

    #[test]
    fn strip_and_quotient() {
        let sig = Signature::from_pairs(&[("a", 0), ("b", 0), ("s", 1)]).unwrap();
        let mut a = TreeAutomaton::new(sig.clone());
        let [q0, q1, q2] = ["q0", "q1", "q2"].map(|n| a.add_state(StateLabel::name(n)));
        a.add_delta(Symbol::new("a", 0), vec![], q0);
        a.add_delta(Symbol::new("b", 0), vec![], q1);
        a.add_delta(Symbol::new("s", 1), vec![q0], q2);
        a.add_epsilon(q0, q1, Color::E);
        assert!(!a.e_equivalent(q0, q1));
        a.add_epsilon(q1, q0, Color::E);
        assert!(a.e_equivalent(q0, q1));
        assert!(a.e_equivalent(q2, q2));
        let q = a.quotient(Color::E);
        assert_eq!(q.num_states(), 2);
        let c0 = q.state_named("q0").unwrap();
        let c2 = q.state_named("q2").unwrap();
        assert!(q.recognizes(&term(&sig, "b"), c0));
        assert!(q.recognizes(&term(&sig, "s(b)"), c2));
        let stripped = a.strip_color(Color::E);
        assert!(!stripped.recognizes(&term(&sig, "s(b)"), q2));
        assert!(a.recognizes(&term(&sig, "s(b)"), q2));
        assert_eq!(a.strip_color(Color::R).epsilons().len(), 2);
    }

    #[test]
    fn product_and_projection() {
        let (sig, a) = ex();
        let p = a.product(&a).unwrap();
        let qf = id(&a, "qf");
        let pf = p.state(&StateLabel::pair("qf", "qf")).unwrap();
        assert!(p.recognizes(&term(&sig, "f(c(a(s(0)),n))"), pf));
        let left = p.project_left().unwrap();
        assert!(left.recognizes(&term(&sig, "f(c(a(s(0)),n))"), left.state_named("qf").unwrap()));
        assert!(matches!(a.project_left(), Err(AutomatonError::NotPairAutomaton(_))));
        let other = TreeAutomaton::new(Signature::from_pairs(&[("z", 0)]).unwrap());
        assert_eq!(a.product(&other), Err(AutomatonError::SignatureMismatch));
        assert!(a.finals().contains(&qf));
    }
}
