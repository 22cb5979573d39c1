//! Exhaustive interleaving checker for an abstract model of the reclamation
//! protocols under sequential consistency.
//!
//! Each thread runs a short program of abstract steps, one shared action per
//! step. Readers load a reference to an object, reserve it and access it;
//! reclaimers unlink their object, run the scheme's reclamation pass and
//! free it if nothing blocks them. Signal delivery is a handler that may be
//! scheduled at any point after a ping; while it runs the interrupted thread
//! takes no other step. The checker enumerates every interleaving
//! breadth-first over hashed states, so a reported trace is a shortest one.

use std::collections::{HashMap, VecDeque};
use std::fmt;

const NONE: u8 = u8::MAX;
const MAX_THREADS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelScheme {
    /// Classic hazard pointers (no pings).
    Hp,
    HpPop,
    HePop,
    /// EpochPOP with both the epoch path and the ping fallback.
    EpochPop,
}

impl ModelScheme {
    pub const ALL: [ModelScheme; 4] = [
        ModelScheme::Hp,
        ModelScheme::HpPop,
        ModelScheme::HePop,
        ModelScheme::EpochPop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelScheme::Hp => "hp",
            ModelScheme::HpPop => "hp-pop",
            ModelScheme::HePop => "he-pop",
            ModelScheme::EpochPop => "epoch-pop",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    /// The three fault injections that must each be caught.
    pub fn mutants(self) -> [Mutation; 3] {
        match self {
            ModelScheme::Hp => [
                Mutation::DropValidation,
                Mutation::DropFence,
                Mutation::ScanBeforeUnlink,
            ],
            _ => [
                Mutation::DropValidation,
                Mutation::DropFence,
                Mutation::DropWait,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mutation {
    None,
    /// Reader uses the reference without re-checking the source.
    DropValidation,
    /// Reservation store is sunk past the validation and the access.
    DropFence,
    /// Reclaimer leaves the wait without seeing every counter move.
    DropWait,
    /// Classic HP reclaimer scans before unlinking.
    ScanBeforeUnlink,
}

impl Mutation {
    pub fn name(self) -> &'static str {
        match self {
            Mutation::None => "none",
            Mutation::DropValidation => "drop-validation",
            Mutation::DropFence => "drop-fence",
            Mutation::DropWait => "drop-wait",
            Mutation::ScanBeforeUnlink => "scan-before-unlink",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Mutation::None,
            Mutation::DropValidation,
            Mutation::DropFence,
            Mutation::DropWait,
            Mutation::ScanBeforeUnlink,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Reader,
    Reclaimer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub scheme: ModelScheme,
    pub mutation: Mutation,
    pub roles: Vec<Role>,
    /// Maximum number of distinct states before giving up.
    pub budget: usize,
}

impl ModelConfig {
    pub const DEFAULT_BUDGET: usize = 10_000_000;

    pub fn new(scheme: ModelScheme, roles: Vec<Role>) -> Self {
        ModelConfig {
            scheme,
            mutation: Mutation::None,
            roles,
            budget: Self::DEFAULT_BUDGET,
        }
    }

    pub fn with_mutation(mut self, mutation: Mutation) -> Self {
        self.mutation = mutation;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    /// Role layouts explored for a thread count: one reclaimer and readers,
    /// plus (at three threads) two reclaimers racing with one reader.
    pub fn layouts(threads: usize) -> Vec<Vec<Role>> {
        match threads {
            2 => vec![vec![Role::Reclaimer, Role::Reader]],
            3 => vec![
                vec![Role::Reclaimer, Role::Reader, Role::Reader],
                vec![Role::Reclaimer, Role::Reclaimer, Role::Reader],
            ],
            n => panic!("the model supports 2 or 3 threads, not {n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Instr {
    /// Optionally advance the epoch (branches both ways).
    MaybeTick,
    ReadEpoch,
    Announce,
    /// Load the source cell; jump to `on_null` if it no longer holds the object.
    LoadRef {
        on_null: u8,
    },
    StoreLocal,
    StoreShared,
    /// Re-read the source; jump to `retry` if it changed.
    Validate {
        retry: u8,
    },
    Access,
    /// Read the era; jump to `hit` if it equals the last reserved one.
    ReadEra {
        hit: u8,
    },
    /// Reserve the era read and jump back to `retry`.
    StoreLocalEra {
        retry: u8,
    },
    /// Faulty variant: remember the era without storing it, jump to `retry`.
    DeferEra {
        retry: u8,
    },
    StoreDeferredEra,
    EndOp,
    Unlink,
    Retire,
    IncEra,
    /// Branch to the next step (epoch path) or to `fallback`.
    ChoosePath {
        fallback: u8,
    },
    MinScan,
    Snapshot,
    Ping,
    WaitExit,
    ScanPtr,
    ScanEra,
    Free,
    Jump {
        to: u8,
    },
    Done,
}

impl Instr {
    fn name(self) -> &'static str {
        match self {
            Instr::MaybeTick => "MaybeTick",
            Instr::ReadEpoch => "ReadEpoch",
            Instr::Announce => "Announce",
            Instr::LoadRef { .. } => "LoadRef",
            Instr::StoreLocal => "StoreLocal",
            Instr::StoreShared => "StoreShared",
            Instr::Validate { .. } => "Validate",
            Instr::Access => "Access",
            Instr::ReadEra { .. } => "ReadEra",
            Instr::StoreLocalEra { .. } => "StoreLocalEra",
            Instr::DeferEra { .. } => "DeferEra",
            Instr::StoreDeferredEra => "StoreDeferredEra",
            Instr::EndOp => "EndOp",
            Instr::Unlink => "Unlink",
            Instr::Retire => "Retire",
            Instr::IncEra => "IncEra",
            Instr::ChoosePath { .. } => "ChoosePath",
            Instr::MinScan => "MinScan",
            Instr::Snapshot => "Snapshot",
            Instr::Ping => "Ping",
            Instr::WaitExit => "WaitExit",
            Instr::ScanPtr => "Scan",
            Instr::ScanEra => "Scan",
            Instr::Free => "Free",
            Instr::Jump { .. } => "Jump",
            Instr::Done => "Done",
        }
    }
}

fn reader_program(scheme: ModelScheme, m: Mutation) -> Vec<Instr> {
    use Instr::*;
    match scheme {
        ModelScheme::HePop => match m {
            Mutation::DropValidation => vec![
                LoadRef { on_null: 4 },
                ReadEra { hit: 3 },
                StoreLocalEra { retry: 3 },
                Access,
                EndOp,
                Done,
            ],
            Mutation::DropFence => vec![
                LoadRef { on_null: 5 },
                ReadEra { hit: 3 },
                DeferEra { retry: 0 },
                Access,
                StoreDeferredEra,
                EndOp,
                Done,
            ],
            _ => vec![
                LoadRef { on_null: 4 },
                ReadEra { hit: 3 },
                StoreLocalEra { retry: 0 },
                Access,
                EndOp,
                Done,
            ],
        },
        _ => {
            let mut p = Vec::new();
            if scheme == ModelScheme::EpochPop {
                p.extend([MaybeTick, ReadEpoch, Announce]);
            }
            let base = p.len() as u8;
            let store = if scheme == ModelScheme::Hp {
                StoreShared
            } else {
                StoreLocal
            };
            match m {
                Mutation::DropValidation => {
                    p.extend([LoadRef { on_null: base + 3 }, store, Access])
                }
                Mutation::DropFence => p.extend([
                    LoadRef { on_null: base + 4 },
                    Validate { retry: base },
                    store,
                    Access,
                ]),
                _ => p.extend([
                    LoadRef { on_null: base + 4 },
                    store,
                    Validate { retry: base },
                    Access,
                ]),
            }
            p.extend([EndOp, Done]);
            p
        }
    }
}

fn reclaimer_program(scheme: ModelScheme, m: Mutation) -> Vec<Instr> {
    use Instr::*;
    match scheme {
        ModelScheme::Hp if m == Mutation::ScanBeforeUnlink => {
            vec![ScanPtr, Unlink, Retire, Free, Done]
        }
        ModelScheme::Hp => vec![Unlink, Retire, ScanPtr, Free, Done],
        ModelScheme::HpPop => vec![
            Unlink, Retire, Snapshot, Ping, WaitExit, ScanPtr, Free, Done,
        ],
        ModelScheme::HePop => vec![
            Unlink, Retire, IncEra, Snapshot, Ping, WaitExit, ScanEra, Free, Done,
        ],
        ModelScheme::EpochPop => vec![
            // first operation: unlink and retire
            MaybeTick,
            ReadEpoch,
            Announce,
            Unlink,
            Retire,
            EndOp,
            // second operation: one reclamation pass, either path
            MaybeTick,
            ReadEpoch,
            Announce,
            ChoosePath { fallback: 12 },
            MinScan,
            Jump { to: 17 },
            Snapshot,
            Ping,
            WaitExit,
            ScanPtr,
            Jump { to: 17 },
            Free,
            EndOp,
            Done,
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
struct Thread {
    pc: u8,
    /// Object this thread reads (readers) or owns (reclaimers).
    target: u8,
    /// Last reference loaded: `true` if it was the target object.
    loaded: bool,
    era: u8,
    old_era: u8,
    deferred: u8,
    local_ptr: bool,
    shared_ptr: bool,
    local_era: u8,
    shared_era: u8,
    reserved: u8,
    counter: u8,
    pending: bool,
    in_handler: bool,
    snap: [u8; MAX_THREADS],
    /// Between Snapshot and a successful WaitExit.
    has_snap: bool,
    blocked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
struct Object {
    reachable: bool,
    freed: bool,
    retire: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct State {
    clock: u8,
    objects: [Object; MAX_THREADS],
    threads: [Thread; MAX_THREADS],
}

/// One scheduled step of a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub thread: usize,
    pub role: Role,
    pub action: &'static str,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let role = match self.role {
            Role::Reader => "reader",
            Role::Reclaimer => "reclaimer",
        };
        write!(f, "T{} ({role}): {}", self.thread, self.action)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Safe {
        states: usize,
    },
    /// An object was accessed after being freed.
    Violation {
        states: usize,
        trace: Vec<TraceStep>,
    },
    /// Some thread can never finish (e.g. a wait that cannot exit).
    Stuck {
        states: usize,
        trace: Vec<TraceStep>,
    },
    BudgetExceeded {
        states: usize,
    },
}

impl Verdict {
    pub fn states(&self) -> usize {
        match self {
            Verdict::Safe { states }
            | Verdict::Violation { states, .. }
            | Verdict::Stuck { states, .. }
            | Verdict::BudgetExceeded { states } => *states,
        }
    }

    pub fn is_safe(&self) -> bool {
        matches!(self, Verdict::Safe { .. })
    }

    pub fn trace(&self) -> Option<&[TraceStep]> {
        match self {
            Verdict::Violation { trace, .. } | Verdict::Stuck { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Safe { states } => write!(f, "SAFE ({states} states)"),
            Verdict::Violation { states, trace } => {
                writeln!(f, "VIOLATION: use after free ({states} states)")?;
                for (i, s) in trace.iter().enumerate() {
                    writeln!(f, "  {:>2}. {s}", i + 1)?;
                }
                Ok(())
            }
            Verdict::Stuck { states, trace } => {
                writeln!(f, "STUCK: no step enabled ({states} states)")?;
                for (i, s) in trace.iter().enumerate() {
                    writeln!(f, "  {:>2}. {s}", i + 1)?;
                }
                Ok(())
            }
            Verdict::BudgetExceeded { states } => {
                write!(f, "BUDGET EXCEEDED after {states} states")
            }
        }
    }
}

enum Outcome {
    Next(State),
    Violation,
}

struct Machine {
    scheme: ModelScheme,
    mutation: Mutation,
    roles: Vec<Role>,
    programs: Vec<Vec<Instr>>,
}

impl Machine {
    fn n(&self) -> usize {
        self.roles.len()
    }

    fn initial_states(&self) -> Vec<State> {
        let reclaimers: Vec<usize> = (0..self.n())
            .filter(|&t| self.roles[t] == Role::Reclaimer)
            .collect();
        let base = {
            let mut objects = [Object::default(); MAX_THREADS];
            let mut threads = [Thread::default(); MAX_THREADS];
            for (i, &t) in reclaimers.iter().enumerate() {
                objects[i] = Object {
                    reachable: true,
                    freed: false,
                    retire: NONE,
                };
                threads[t].target = i as u8;
            }
            for th in threads.iter_mut() {
                th.era = NONE;
                th.old_era = NONE;
                th.deferred = NONE;
                th.local_era = NONE;
                th.shared_era = NONE;
                th.reserved = NONE;
                th.snap = [0; MAX_THREADS];
            }
            State {
                clock: 0,
                objects,
                threads,
            }
        };
        // Every reader independently picks one of the reclaimers' objects.
        let readers: Vec<usize> = (0..self.n())
            .filter(|&t| self.roles[t] == Role::Reader)
            .collect();
        let mut states = vec![base];
        for &r in &readers {
            let mut next = Vec::new();
            for s in &states {
                for obj in 0..reclaimers.len() {
                    let mut s = s.clone();
                    s.threads[r].target = obj as u8;
                    next.push(s);
                }
            }
            states = next;
        }
        states
    }

    fn finished(&self, s: &State, t: usize) -> bool {
        let th = &s.threads[t];
        self.programs[t][th.pc as usize] == Instr::Done && !th.pending && !th.in_handler
    }

    /// All successor states, each labelled with its step.
    fn successors(&self, s: &State, out: &mut Vec<(TraceStep, Outcome)>) {
        out.clear();
        for t in 0..self.n() {
            let th = s.threads[t];
            let step = |action| TraceStep {
                thread: t,
                role: self.roles[t],
                action,
            };
            if th.in_handler {
                let mut n = s.clone();
                n.threads[t].counter += 1;
                n.threads[t].in_handler = false;
                normalize(&mut n, self.n());
                out.push((step("HandlerCount"), Outcome::Next(n)));
                continue;
            }
            if th.pending {
                let mut n = s.clone();
                let nt = &mut n.threads[t];
                nt.pending = false;
                nt.in_handler = true;
                nt.shared_ptr = nt.local_ptr;
                nt.shared_era = nt.local_era;
                out.push((step("HandlerPublish"), Outcome::Next(n)));
            }
            let instr = self.programs[t][th.pc as usize];
            if instr == Instr::Done {
                continue;
            }
            for outcome in self.exec(s, t, instr) {
                out.push((step(instr.name()), outcome));
            }
        }
    }

    fn exec(&self, s: &State, t: usize, instr: Instr) -> Vec<Outcome> {
        let mut n = s.clone();
        let th = n.threads[t];
        let obj = th.target as usize;
        let advance = |n: &mut State| n.threads[t].pc += 1;
        match instr {
            Instr::MaybeTick => {
                let mut skip = s.clone();
                advance(&mut skip);
                n.clock += 1;
                advance(&mut n);
                return vec![Outcome::Next(skip), Outcome::Next(n)];
            }
            Instr::ReadEpoch => {
                n.threads[t].era = s.clock;
                advance(&mut n);
            }
            Instr::Announce => {
                n.threads[t].reserved = th.era;
                n.threads[t].era = NONE;
                advance(&mut n);
            }
            Instr::LoadRef { on_null } => {
                let loaded = s.objects[obj].reachable;
                n.threads[t].loaded = loaded;
                n.threads[t].pc = if loaded { th.pc + 1 } else { on_null };
            }
            Instr::StoreLocal => {
                n.threads[t].local_ptr = th.loaded;
                advance(&mut n);
            }
            Instr::StoreShared => {
                n.threads[t].shared_ptr = th.loaded;
                advance(&mut n);
            }
            Instr::Validate { retry } => {
                let same = s.objects[obj].reachable == th.loaded;
                n.threads[t].pc = if same { th.pc + 1 } else { retry };
            }
            Instr::Access => {
                if th.loaded && s.objects[obj].freed {
                    return vec![Outcome::Violation];
                }
                advance(&mut n);
            }
            Instr::ReadEra { hit } => {
                n.threads[t].era = s.clock;
                n.threads[t].pc = if s.clock == th.old_era {
                    hit
                } else {
                    th.pc + 1
                };
            }
            Instr::StoreLocalEra { retry } => {
                n.threads[t].local_era = th.era;
                n.threads[t].old_era = th.era;
                n.threads[t].pc = retry;
            }
            Instr::DeferEra { retry } => {
                n.threads[t].deferred = th.era;
                n.threads[t].old_era = th.era;
                n.threads[t].pc = retry;
            }
            Instr::StoreDeferredEra => {
                n.threads[t].local_era = th.deferred;
                advance(&mut n);
            }
            Instr::EndOp => {
                let nt = &mut n.threads[t];
                nt.reserved = NONE;
                nt.local_ptr = false;
                nt.local_era = NONE;
                if self.scheme == ModelScheme::Hp {
                    nt.shared_ptr = false;
                }
                advance(&mut n);
            }
            Instr::Unlink => {
                n.objects[obj].reachable = false;
                advance(&mut n);
            }
            Instr::Retire => {
                n.objects[obj].retire = s.clock;
                advance(&mut n);
            }
            Instr::IncEra => {
                n.clock += 1;
                advance(&mut n);
            }
            Instr::ChoosePath { fallback } => {
                let mut epoch = s.clone();
                advance(&mut epoch);
                n.threads[t].pc = fallback;
                return vec![Outcome::Next(epoch), Outcome::Next(n)];
            }
            Instr::MinScan => {
                let min = (0..self.n())
                    .map(|u| s.threads[u].reserved)
                    .min()
                    .unwrap_or(NONE);
                n.threads[t].blocked = s.objects[obj].retire >= min;
                advance(&mut n);
            }
            Instr::Snapshot => {
                for u in 0..self.n() {
                    n.threads[t].snap[u] = s.threads[u].counter;
                }
                n.threads[t].has_snap = true;
                advance(&mut n);
            }
            Instr::Ping => {
                for u in (0..self.n()).filter(|&u| u != t) {
                    n.threads[u].pending = true;
                }
                advance(&mut n);
            }
            Instr::WaitExit => {
                let all = (0..self.n())
                    .filter(|&u| u != t)
                    .all(|u| s.threads[u].counter > th.snap[u]);
                if !all && self.mutation != Mutation::DropWait {
                    return Vec::new();
                }
                n.threads[t].has_snap = false;
                n.threads[t].snap = [0; MAX_THREADS];
                advance(&mut n);
            }
            Instr::ScanPtr => {
                n.threads[t].blocked = (0..self.n())
                    .any(|u| s.threads[u].shared_ptr && s.threads[u].target as usize == obj);
                advance(&mut n);
            }
            Instr::ScanEra => {
                let retire = s.objects[obj].retire;
                // every object is born at era 0
                n.threads[t].blocked = (0..self.n()).any(|u| {
                    let e = s.threads[u].shared_era;
                    e != NONE && e <= retire
                });
                advance(&mut n);
            }
            Instr::Free => {
                if !th.blocked {
                    n.objects[obj].freed = true;
                }
                n.threads[t].blocked = false;
                advance(&mut n);
            }
            Instr::Jump { to } => {
                n.threads[t].pc = to;
            }
            Instr::Done => return Vec::new(),
        }
        normalize(&mut n, self.n());
        vec![Outcome::Next(n)]
    }
}

/// Rebases each thread's publish counter against the live snapshots that
/// mention it. Only `counter > snap` is ever observed, so states differing
/// by a common offset are equivalent.
fn normalize(s: &mut State, n: usize) {
    for u in 0..n {
        let mut base = s.threads[u].counter;
        for t in 0..n {
            if s.threads[t].has_snap {
                base = base.min(s.threads[t].snap[u]);
            }
        }
        if base == 0 {
            continue;
        }
        s.threads[u].counter -= base;
        for t in 0..n {
            if s.threads[t].has_snap {
                s.threads[t].snap[u] -= base;
            }
        }
    }
    compress_eras(s, n);
}

/// Replaces every era-valued register by its rank among all of them. The
/// machine only ever compares eras with each other, so the order is all
/// that matters.
fn compress_eras(s: &mut State, n: usize) {
    let mut seen = [false; 256];
    let mut mark = |v: u8| seen[v as usize] = true;
    mark(s.clock);
    for o in &s.objects {
        mark(o.retire);
    }
    for th in &s.threads[..n] {
        for v in [
            th.era,
            th.old_era,
            th.deferred,
            th.local_era,
            th.shared_era,
            th.reserved,
        ] {
            mark(v);
        }
    }
    let mut rank = [NONE; 256];
    let mut next = 0u8;
    for v in 0..NONE as usize {
        if seen[v] {
            rank[v] = next;
            next += 1;
        }
    }
    let map = |v: &mut u8| *v = rank[*v as usize];
    map(&mut s.clock);
    for o in s.objects.iter_mut() {
        map(&mut o.retire);
    }
    for th in s.threads[..n].iter_mut() {
        for v in [
            &mut th.era,
            &mut th.old_era,
            &mut th.deferred,
            &mut th.local_era,
            &mut th.shared_era,
            &mut th.reserved,
        ] {
            map(v);
        }
    }
}

/// Explores every interleaving of the configured model.
pub fn explore(config: &ModelConfig) -> Verdict {
    assert!(
        (2..=MAX_THREADS).contains(&config.roles.len()),
        "the model supports 2 or 3 threads"
    );
    assert!(
        config.roles.contains(&Role::Reclaimer),
        "the model needs at least one reclaimer"
    );
    let machine = Machine {
        scheme: config.scheme,
        mutation: config.mutation,
        roles: config.roles.clone(),
        programs: config
            .roles
            .iter()
            .map(|r| match r {
                Role::Reader => reader_program(config.scheme, config.mutation),
                Role::Reclaimer => reclaimer_program(config.scheme, config.mutation),
            })
            .collect(),
    };

    let mut index: HashMap<State, usize> = HashMap::new();
    // parent index and the step that produced each state
    let mut parents: Vec<Option<(usize, TraceStep)>> = Vec::new();
    let mut states: Vec<State> = Vec::new();
    let mut queue = VecDeque::new();
    for s in machine.initial_states() {
        if !index.contains_key(&s) {
            index.insert(s.clone(), states.len());
            queue.push_back(states.len());
            states.push(s);
            parents.push(None);
        }
    }

    let trace_to = |parents: &Vec<Option<(usize, TraceStep)>>, mut i: usize| {
        let mut trace = Vec::new();
        while let Some((p, step)) = &parents[i] {
            trace.push(step.clone());
            i = *p;
        }
        trace.reverse();
        trace
    };

    let mut succ = Vec::new();
    while let Some(i) = queue.pop_front() {
        let s = states[i].clone();
        machine.successors(&s, &mut succ);
        if succ.is_empty() && !(0..machine.n()).all(|t| machine.finished(&s, t)) {
            return Verdict::Stuck {
                states: states.len(),
                trace: trace_to(&parents, i),
            };
        }
        for (step, outcome) in succ.drain(..) {
            match outcome {
                Outcome::Violation => {
                    let mut trace = trace_to(&parents, i);
                    trace.push(step);
                    return Verdict::Violation {
                        states: states.len(),
                        trace,
                    };
                }
                Outcome::Next(n) => {
                    if index.contains_key(&n) {
                        continue;
                    }
                    if states.len() >= config.budget {
                        return Verdict::BudgetExceeded {
                            states: states.len(),
                        };
                    }
                    index.insert(n.clone(), states.len());
                    queue.push_back(states.len());
                    states.push(n);
                    parents.push(Some((i, step)));
                }
            }
        }
    }
    Verdict::Safe {
        states: states.len(),
    }
}

/// Explores every role layout for `threads` threads and returns the first
/// non-safe verdict, or a safe verdict with the summed state count.
pub fn check(scheme: ModelScheme, mutation: Mutation, threads: usize, budget: usize) -> Verdict {
    let mut total = 0;
    for roles in ModelConfig::layouts(threads) {
        let cfg = ModelConfig::new(scheme, roles)
            .with_mutation(mutation)
            .with_budget(budget);
        match explore(&cfg) {
            Verdict::Safe { states } => total += states,
            other => return other,
        }
    }
    Verdict::Safe { states: total }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hp_pop_two_threads_is_safe() {
        let v = check(ModelScheme::HpPop, Mutation::None, 2, 1_000_000);
        assert!(v.is_safe(), "{v}");
        assert!(v.states() > 10);
    }

    #[test]
    fn dropped_wait_is_caught() {
        let v = check(ModelScheme::HpPop, Mutation::DropWait, 2, 1_000_000);
        assert!(matches!(v, Verdict::Violation { .. }), "{v}");
    }

    #[test]
    fn dropped_validation_is_caught() {
        let v = check(ModelScheme::HpPop, Mutation::DropValidation, 2, 1_000_000);
        let trace = v.trace().expect("violation expected");
        assert_eq!(trace.last().unwrap().action, "Access");
    }

    #[test]
    fn budget_is_enforced() {
        let v = check(ModelScheme::EpochPop, Mutation::None, 3, 10);
        assert!(matches!(v, Verdict::BudgetExceeded { .. }));
    }
}
