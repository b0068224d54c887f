//! Best-first branch-and-bound over the assembled selection problems.
//!
//! Two solver variants share one tree policy. The structure-exploiting
//! variant substitutes the bilinear auxiliaries out of every node with a
//! fixed binary (and solves column-reduced restrictions in the heuristic);
//! the standard variant re-solves the full envelope formulation at every
//! node. Both maintain an exclusion set of activation patterns proven
//! infeasible: since deactivating a sensor can only shrink the feasible
//! set, any pattern contained in a recorded infeasible pattern is
//! infeasible too and is rejected without a solve, and a subtree whose
//! *maximal* pattern is excluded is never expanded.
//!
//! Incumbents always come from a certified restriction solve, so a
//! reported solution is a strictly feasible point of its own restricted
//! problem, never just a rounded relaxation.

use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::builders::lmi::GainResult;
use crate::builders::misdp::{polished_selection_gain, recover_selection_gain, Misdp};
use crate::error::CoreError;
use crate::sdp::{
    check_feasibility, presolve, solve, FeasOptions, Feasibility, Reduced, SolveStatus,
    SolverOptions,
};

/// Binaries within this distance of 0 or 1 count as integral.
pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BnbStatus {
    /// Gap closed exactly (up to numerical tolerance).
    Optimal,
    /// Gap closed to within the requested tolerance.
    EpsOptimal,
    /// Search exhausted but some node could not be classified, so the
    /// incumbent is feasible while the bound is not fully trusted.
    Suboptimal,
    Infeasible,
    /// Branching budget hit with the gap still open.
    BranchLimit,
}

/// One line of the per-node run log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeLog {
    pub node: usize,
    pub depth: usize,
    /// `(binary, value)` fixes active at the node.
    pub fixes: Vec<(usize, u8)>,
    pub lb: f64,
    pub ub: f64,
    pub integral: bool,
    pub branched_on: Option<usize>,
    pub relax_secs: f64,
    pub heuristic_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: BnbStatus,
    /// Global lower bound: min over open nodes and the incumbent.
    pub lb: f64,
    /// Bound of the last node popped in best-first order.
    pub lb_popped: f64,
    pub ub: f64,
    /// Full variable vector of the best certified point.
    pub incumbent: Option<Vec<f64>>,
    /// Activation pattern of the incumbent.
    pub active: Option<Vec<bool>>,
    pub gain: Option<GainResult>,
    pub nodes_explored: usize,
    pub sdp_solves: usize,
    pub branchings: usize,
    pub relax_secs: f64,
    pub heuristic_secs: f64,
    pub total_secs: f64,
    pub w_size: usize,
    pub seed: u64,
    /// Whether node problems were structure-exploiting.
    pub exploit: bool,
    pub node_log: Vec<NodeLog>,
}

/// Activation patterns proven infeasible, stored as bitmasks, with a
/// subset query implementing the monotonicity prune.
#[derive(Debug, Clone, Default)]
pub struct ExclusionSet {
    sets: Vec<u64>,
}

impl ExclusionSet {
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// True when `mask` is contained in some recorded infeasible pattern
    /// (and is therefore infeasible itself).
    pub fn prunes(&self, mask: u64) -> bool {
        self.sets.iter().any(|&s| mask & !s == 0)
    }

    /// Records an infeasible pattern, dropping patterns it dominates.
    pub fn insert(&mut self, mask: u64) {
        if self.prunes(mask) {
            return;
        }
        self.sets.retain(|&s| s & !mask != 0);
        self.sets.push(mask);
    }
}

fn mask_of(active: &[bool]) -> u64 {
    active
        .iter()
        .enumerate()
        .filter(|(_, a)| **a)
        .fold(0u64, |m, (i, _)| m | (1 << i))
}

/// Outcome of one node relaxation.
#[derive(Debug, Clone)]
pub enum Relax {
    Solved {
        /// Solution lifted back to the full variable space.
        x: Vec<f64>,
        obj: f64,
    },
    Infeasible,
    /// Solver could not classify the node; callers inherit the parent
    /// bound and must not prune on it.
    Indeterminate,
}

/// Solves the relaxation of a node given by a partial binary assignment.
pub fn relax_sol(
    p: &Misdp,
    fixes: &[(usize, bool)],
    exploit: bool,
    solver: &SolverOptions,
) -> Relax {
    let (q, outer) = match p.node(fixes, exploit) {
        Reduced::Infeasible => return Relax::Infeasible,
        Reduced::Problem(q, m) => (q, m),
    };
    // Fixed binaries leave degenerate inequality pairs behind (the envelope
    // at an integer point); fold them before handing the problem to the
    // interior-point method.
    let (r, inner) = match presolve(&q) {
        Reduced::Infeasible => return Relax::Infeasible,
        Reduced::Problem(r, m) => (r, m),
    };
    let sol = solve(&r, solver);
    match sol.status {
        SolveStatus::Optimal => {
            let x = outer.lift(&inner.lift(&sol.x));
            let obj = p.objective_of(&x);
            Relax::Solved { x, obj }
        }
        SolveStatus::Infeasible => Relax::Infeasible,
        _ => Relax::Indeterminate,
    }
}

/// Shared state of the rounding heuristic: the exclusion set, a cache of
/// restriction solves (no activation pattern is ever solved twice), and
/// the candidate RNG.
pub struct Heuristic<'a> {
    p: &'a Misdp,
    exploit: bool,
    feas_opts: FeasOptions,
    rng: ChaCha8Rng,
    pub w: ExclusionSet,
    /// mask -> certified `(cost, point)`; `None` for patterns that solved
    /// infeasible or unclassifiable.
    cache: HashMap<u64, Option<(f64, Vec<f64>)>>,
    pub sdp_solves: usize,
}

impl<'a> Heuristic<'a> {
    pub fn new(p: &'a Misdp, exploit: bool, seed: u64) -> Self {
        Self {
            p,
            exploit,
            feas_opts: FeasOptions::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            w: ExclusionSet::default(),
            cache: HashMap::new(),
            sdp_solves: 0,
        }
    }

    /// Solves (or recalls) the restriction at one activation pattern.
    /// Returns the certified cost and full-space point when feasible.
    pub fn certify(&mut self, active: &[bool]) -> Option<(f64, Vec<f64>)> {
        let mask = mask_of(active);
        if !self.p.logistic_ok(active) || self.w.prunes(mask) {
            return None;
        }
        if let Some(entry) = self.cache.get(&mask) {
            return entry.clone();
        }
        let reduced = if self.exploit {
            self.p.restriction(active)
        } else {
            let fixes: Vec<(usize, bool)> =
                active.iter().enumerate().map(|(b, &v)| (b, v)).collect();
            self.p.node(&fixes, false)
        };
        let entry = match reduced {
            Reduced::Infeasible => None,
            Reduced::Problem(q, map) => {
                self.sdp_solves += 1;
                let rep = check_feasibility(&q, &self.feas_opts);
                match rep.feasibility {
                    Feasibility::StrictlyFeasible => {
                        let x = map.lift(&rep.point.expect("feasible report carries a point"));
                        Some((self.p.cost(active), x))
                    }
                    Feasibility::Infeasible => {
                        self.w.insert(mask);
                        None
                    }
                    Feasibility::Indeterminate => None,
                }
            }
        };
        self.cache.insert(mask, entry.clone());
        entry
    }

    /// The rounding heuristic at a node: round the relaxation at 1/2, then
    /// retry with up to two random unfixed coordinates flipped, at most
    /// five candidate draws, skipping candidates excluded by the logistic
    /// constraints, the exclusion set, or the cache.
    pub fn feas_sol(
        &mut self,
        fixes: &[(usize, bool)],
        gamma: &[f64],
    ) -> Option<(f64, Vec<f64>)> {
        let nb = gamma.len();
        let mut fixed = vec![None; nb];
        for &(b, v) in fixes {
            fixed[b] = Some(v);
        }
        let base: Vec<bool> = (0..nb)
            .map(|b| fixed[b].unwrap_or(gamma[b] >= 0.5))
            .collect();
        let unfixed: Vec<usize> = (0..nb).filter(|&b| fixed[b].is_none()).collect();

        let draws = if unfixed.is_empty() { 1 } else { 5 };
        for draw in 0..draws {
            let mut cand = base.clone();
            if draw > 0 {
                let k = self.rng.gen_range(1..=2usize.min(unfixed.len()));
                for pick in sample(&mut self.rng, unfixed.len(), k) {
                    let b = unfixed[pick];
                    cand[b] = !cand[b];
                }
            }
            if let Some(found) = self.certify(&cand) {
                return Some(found);
            }
        }
        None
    }
}

/// A live tree node: relaxation solved, awaiting expansion.
#[derive(Debug, Clone)]
struct Node {
    fixes: Vec<(usize, bool)>,
    /// Relaxation solution in the full variable space.
    x: Vec<f64>,
    lb: f64,
    depth: usize,
    order: usize,
    /// Bound inherited from the parent because the own relaxation was
    /// indeterminate.
    inherited: bool,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap; invert so pop yields the smallest bound,
    // ties broken by lowest depth, then first-created.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .lb
            .total_cmp(&self.lb)
            .then(other.depth.cmp(&self.depth))
            .then(other.order.cmp(&self.order))
    }
}

/// Structure-exploiting branch-and-bound: node relaxations and heuristic
/// restrictions are solved in their substituted, reduced form.
pub fn se_bnb(p: &Misdp, eps_f: f64, max_branch: Option<usize>, seed: u64) -> SolveReport {
    run(p, eps_f, max_branch, seed, true)
}

/// Baseline branch-and-bound on the full formulation: identical tree
/// policy, but every node and every heuristic restriction keeps the
/// envelope rows and auxiliary columns.
pub fn standard_bnb(p: &Misdp, eps_f: f64, max_branch: Option<usize>, seed: u64) -> SolveReport {
    run(p, eps_f, max_branch, seed, false)
}

fn run(p: &Misdp, eps_f: f64, max_branch: Option<usize>, seed: u64, exploit: bool) -> SolveReport {
    assert!(eps_f > 0.0, "gap tolerance must be positive");
    let nb = p.n_binaries();
    assert!(nb <= 64, "exclusion set uses 64-bit activation masks");
    let t0 = Instant::now();
    let solver = SolverOptions::default();
    let mut heur = Heuristic::new(p, exploit, seed);

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut node_log = Vec::new();
    let mut ub = f64::INFINITY;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut lb_popped = f64::NEG_INFINITY;
    // Bounds of nodes closed without resolution (branch budget, failed
    // certification): the true optimum may hide there, so they hold the
    // global bound down.
    let mut unresolved_lb = f64::INFINITY;
    let mut order = 0usize;
    let mut nodes_explored = 0usize;
    let mut branchings = 0usize;
    let mut relax_secs = 0.0;
    let mut heuristic_secs = 0.0;
    let mut limit_hit = false;
    let mut trusted = true;

    let tr = Instant::now();
    let root = relax_sol(p, &[], exploit, &solver);
    relax_secs += tr.elapsed().as_secs_f64();
    let mut relax_solves = 1usize;
    match root {
        Relax::Infeasible => {
            return SolveReport {
                status: BnbStatus::Infeasible,
                lb: f64::INFINITY,
                lb_popped,
                ub,
                incumbent: None,
                active: None,
                gain: None,
                nodes_explored: 1,
                sdp_solves: 1,
                branchings: 0,
                relax_secs,
                heuristic_secs,
                total_secs: t0.elapsed().as_secs_f64(),
                w_size: 0,
                seed,
                exploit,
                node_log,
            };
        }
        Relax::Indeterminate => {
            // Unclassified root: enter the tree with a vacuous bound and a
            // half-on pattern so branching can still make progress.
            trusted = false;
            nodes_explored += 1;
            let mut x = vec![0.0; p.sdp.nvars()];
            for g in &p.groups {
                x[g.gamma_var] = 0.5;
            }
            heap.push(Node {
                fixes: Vec::new(),
                x,
                lb: f64::NEG_INFINITY,
                depth: 0,
                order,
                inherited: true,
            });
            order += 1;
        }
        Relax::Solved { x, obj } => {
            nodes_explored += 1;
            heap.push(Node { fixes: Vec::new(), x, lb: obj, depth: 0, order, inherited: false });
            order += 1;
        }
    }

    while let Some(node) = {
        // Prune: anything bounded above the incumbent cannot improve it.
        while heap.peek().map_or(false, |n| n.lb > ub + 1e-12) {
            heap.pop();
        }
        let open_lb = heap.peek().map_or(f64::INFINITY, |n| n.lb);
        let gap = ub - open_lb.min(unresolved_lb).min(ub);
        if gap <= eps_f {
            None
        } else {
            heap.pop()
        }
    } {
        lb_popped = node.lb;
        let gamma = p.gamma_of(&node.x);
        let mut fixed = vec![false; nb];
        for &(b, _) in &node.fixes {
            fixed[b] = true;
        }
        // Most fractional unfixed binary; ties to the smallest index.
        let branch_var = (0..nb)
            .filter(|&b| {
                !fixed[b] && gamma[b].min(1.0 - gamma[b]).abs() > INT_TOL && !node.inherited
            })
            .min_by(|&a, &b| (gamma[a] - 0.5).abs().total_cmp(&(gamma[b] - 0.5).abs()));
        let integral = branch_var.is_none() && !node.inherited;

        let th = Instant::now();
        let found = if integral {
            let cand: Vec<bool> = gamma.iter().map(|&g| g >= 0.5).collect();
            heur.certify(&cand)
        } else {
            heur.feas_sol(&node.fixes, &gamma)
        };
        heuristic_secs += th.elapsed().as_secs_f64();
        if let Some((cost, x)) = &found {
            if *cost < ub {
                ub = *cost;
                incumbent = Some((*cost, x.clone()));
            }
        }

        let mut branched_on = None;
        let closed = integral && found.is_some();
        if !closed {
            // Branch on the most fractional unfixed binary. A node whose
            // relaxation is integral within tolerance but whose rounded
            // pattern did not certify (the envelope admits auxiliaries of
            // size big-M times the tolerance), and a node carrying an
            // inherited bound, branch on the first unfixed binary instead.
            let j_opt = branch_var.or_else(|| (0..nb).find(|&b| !fixed[b]));
            let Some(j) = j_opt else {
                // Fully fixed leaf. If its pattern is excluded it is
                // resolved infeasible; otherwise it stays unresolved and
                // holds the bound down.
                let cand: Vec<bool> = {
                    let mut c = vec![false; nb];
                    for &(b, v) in &node.fixes {
                        c[b] = v;
                    }
                    c
                };
                if p.logistic_ok(&cand) && !heur.w.prunes(mask_of(&cand)) {
                    unresolved_lb = unresolved_lb.min(node.lb);
                    trusted = false;
                }
                node_log.push(NodeLog {
                    node: node.order,
                    depth: node.depth,
                    fixes: node.fixes.iter().map(|&(b, v)| (b, v as u8)).collect(),
                    lb: node.lb,
                    ub,
                    integral,
                    branched_on: None,
                    relax_secs,
                    heuristic_secs,
                });
                continue;
            };
            if max_branch.map_or(false, |mb| branchings >= mb) {
                limit_hit = true;
                unresolved_lb = unresolved_lb.min(node.lb);
            } else {
                branchings += 1;
                branched_on = Some(j);
                for val in [false, true] {
                    let mut fixes = node.fixes.clone();
                    fixes.push((j, val));
                    // Subtree guard: if even the largest pattern the
                    // subtree can activate is excluded, skip it.
                    let mut max_mask = 0u64;
                    let mut child_fixed = vec![None; nb];
                    for &(b, v) in &fixes {
                        child_fixed[b] = Some(v);
                    }
                    for b in 0..nb {
                        if child_fixed[b] != Some(false) {
                            max_mask |= 1 << b;
                        }
                    }
                    if heur.w.prunes(max_mask) {
                        continue;
                    }
                    let tr = Instant::now();
                    let rel = relax_sol(p, &fixes, exploit, &solver);
                    relax_secs += tr.elapsed().as_secs_f64();
                    relax_solves += 1;
                    nodes_explored += 1;
                    match rel {
                        Relax::Infeasible => {}
                        Relax::Solved { x, obj } => {
                            // Relaxations only tighten down the tree.
                            let lb = obj.max(node.lb - 1e-9);
                            heap.push(Node {
                                fixes,
                                x,
                                lb,
                                depth: node.depth + 1,
                                order,
                                inherited: false,
                            });
                            order += 1;
                        }
                        Relax::Indeterminate => {
                            trusted = false;
                            let mut x = node.x.clone();
                            x[p.groups[j].gamma_var] = if val { 1.0 } else { 0.0 };
                            heap.push(Node {
                                fixes,
                                x,
                                lb: node.lb,
                                depth: node.depth + 1,
                                order,
                                inherited: true,
                            });
                            order += 1;
                        }
                    }
                }
            }
        }

        node_log.push(NodeLog {
            node: node.order,
            depth: node.depth,
            fixes: node.fixes.iter().map(|&(b, v)| (b, v as u8)).collect(),
            lb: node.lb,
            ub,
            integral,
            branched_on,
            relax_secs,
            heuristic_secs,
        });
    }

    let open_lb = heap.peek().map_or(f64::INFINITY, |n| n.lb);
    let lb = open_lb.min(unresolved_lb).min(ub);
    let gap = ub - lb;
    let status = match &incumbent {
        None => {
            if limit_hit || !trusted {
                BnbStatus::BranchLimit
            } else {
                BnbStatus::Infeasible
            }
        }
        Some(_) => {
            if gap <= 1e-9 && trusted {
                BnbStatus::Optimal
            } else if gap <= eps_f && trusted {
                BnbStatus::EpsOptimal
            } else if limit_hit {
                BnbStatus::BranchLimit
            } else {
                BnbStatus::Suboptimal
            }
        }
    };

    let (active, gain, incumbent) = match incumbent {
        Some((_, x)) => {
            let active: Vec<bool> = p.gamma_of(&x).iter().map(|&g| g >= 0.5).collect();
            match polished_selection_gain(p, &active) {
                Some((a, xp, g)) => (Some(a), Some(g), Some(xp)),
                None => {
                    let gain = recover_selection_gain(p, &x).ok();
                    (Some(active), gain, Some(x))
                }
            }
        }
        None => (None, None, None),
    };

    SolveReport {
        status,
        lb,
        lb_popped,
        ub,
        incumbent,
        active,
        gain,
        nodes_explored,
        sdp_solves: relax_solves + heur.sdp_solves,
        branchings,
        relax_secs,
        heuristic_secs,
        total_secs: t0.elapsed().as_secs_f64(),
        w_size: heur.w.len(),
        seed,
        exploit,
        node_log,
    }
}

/// Ground-truth solver: enumerates every activation pattern admitted by
/// the logistic constraints in nondecreasing cost order and returns the
/// first strictly feasible one. Guarded to at most 20 binaries.
pub fn exhaustive_oracle(p: &Misdp) -> Result<SolveReport, CoreError> {
    let nb = p.n_binaries();
    if nb > 20 {
        return Err(CoreError::invalid("exhaustive enumeration is capped at 20 binaries"));
    }
    let t0 = Instant::now();
    let mut patterns: Vec<(f64, u64, Vec<bool>)> = (0..1u64 << nb)
        .map(|mask| {
            let active: Vec<bool> = (0..nb).map(|b| mask & (1 << b) != 0).collect();
            (p.cost(&active), mask, active)
        })
        .filter(|(_, _, a)| p.logistic_ok(a))
        .collect();
    patterns.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut heur = Heuristic::new(p, true, 0);
    let mut trusted = true;
    let mut best: Option<(f64, Vec<bool>, Vec<f64>)> = None;
    for (cost, _, active) in &patterns {
        if let Some(prev) = &best {
            if *cost > prev.0 {
                break;
            }
        }
        let before = heur.cache.len();
        match heur.certify(active) {
            Some((c, x)) => {
                if best.is_none() {
                    best = Some((c, active.clone(), x));
                }
            }
            None => {
                // A pattern that solved (cache grew) but came back neither
                // feasible nor excluded was indeterminate.
                let solved = heur.cache.len() > before;
                let excluded = heur.w.prunes(mask_of(active));
                if solved && !excluded {
                    trusted = false;
                }
            }
        }
    }

    let total_secs = t0.elapsed().as_secs_f64();
    match best {
        Some((cost, active, x)) => {
            let (active, x, gain) = match polished_selection_gain(p, &active) {
                Some((a, xp, g)) => (a, xp, Some(g)),
                None => {
                    let gain = recover_selection_gain(p, &x).ok();
                    (active, x, gain)
                }
            };
            Ok(SolveReport {
                status: if trusted { BnbStatus::Optimal } else { BnbStatus::Suboptimal },
                lb: cost,
                lb_popped: cost,
                ub: cost,
                gain,
                incumbent: Some(x),
                active: Some(active),
                nodes_explored: patterns.len(),
                sdp_solves: heur.sdp_solves,
                branchings: 0,
                relax_secs: 0.0,
                heuristic_secs: total_secs,
                total_secs,
                w_size: heur.w.len(),
                seed: 0,
                exploit: true,
                node_log: Vec::new(),
            })
        }
        None => Ok(SolveReport {
            status: if trusted { BnbStatus::Infeasible } else { BnbStatus::BranchLimit },
            lb: f64::INFINITY,
            lb_popped: f64::NEG_INFINITY,
            ub: f64::INFINITY,
            incumbent: None,
            active: None,
            gain: None,
            nodes_explored: patterns.len(),
            sdp_solves: heur.sdp_solves,
            branchings: 0,
            relax_secs: 0.0,
            heuristic_secs: total_secs,
            total_secs,
            w_size: heur.w.len(),
            seed: 0,
            exploit: true,
            node_log: Vec::new(),
        }),
    }
}
