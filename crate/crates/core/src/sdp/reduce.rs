//! Variable substitution and presolve on block SDPs.
//!
//! Branch-and-bound nodes fix binaries to 0/1 and substitute bilinear
//! auxiliaries out of the problem. Fixing a binary turns pairs of envelope
//! inequalities into equalities with no strict interior, which an
//! interior-point method cannot traverse, so paired rows are detected and
//! converted into variable fixes/aliases before solving.

use std::collections::HashMap;

use super::problem::{BlockKind, BlockSdp, Coeff, ConstBlock};

/// Tolerance under which a constant-only row counts as satisfied.
const ROW_FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub struct Reduction {
    /// Variables pinned to a value.
    pub fixes: Vec<(usize, f64)>,
    /// `(src, dst)`: every occurrence of `src` is folded onto `dst`.
    pub aliases: Vec<(usize, usize)>,
    /// `(block, row)` inequality rows to delete outright. Callers use this
    /// for rows made redundant by the fixes (e.g. envelope rows at a fixed
    /// binary); no feasibility check is performed on them.
    pub drop_rows: Vec<(usize, u32)>,
}

impl Reduction {
    pub fn is_empty(&self) -> bool {
        self.fixes.is_empty() && self.aliases.is_empty() && self.drop_rows.is_empty()
    }
}

/// How each original variable maps into the reduced problem.
#[derive(Debug, Clone)]
pub enum VarFate {
    Kept(usize),
    Fixed(f64),
    /// Aliased to the *original* index of its root.
    Aliased(usize),
}

#[derive(Debug, Clone)]
pub struct VarMap {
    pub fates: Vec<VarFate>,
    pub reduced_nvars: usize,
}

impl VarMap {
    /// Lifts a reduced solution vector back to the original variable space.
    pub fn lift(&self, reduced: &[f64]) -> Vec<f64> {
        assert_eq!(reduced.len(), self.reduced_nvars);
        let mut out = vec![0.0; self.fates.len()];
        for (i, fate) in self.fates.iter().enumerate() {
            out[i] = match fate {
                VarFate::Kept(k) => reduced[*k],
                VarFate::Fixed(v) => *v,
                VarFate::Aliased(root) => match &self.fates[*root] {
                    VarFate::Kept(k) => reduced[*k],
                    VarFate::Fixed(v) => *v,
                    VarFate::Aliased(_) => unreachable!("alias chains are resolved"),
                },
            };
        }
        out
    }

    pub fn identity(nvars: usize) -> Self {
        Self { fates: (0..nvars).map(VarFate::Kept).collect(), reduced_nvars: nvars }
    }
}

#[derive(Debug)]
pub enum Reduced {
    Problem(BlockSdp, VarMap),
    /// A constant-only row became violated; the whole problem is infeasible.
    Infeasible,
}

/// Applies fixes and aliases, folds constants, drops rows that no longer
/// reference any variable, and removes empty diagonal blocks.
pub fn apply(p: &BlockSdp, red: &Reduction) -> Reduced {
    let n = p.nvars();
    let dropped: std::collections::HashSet<(usize, u32)> =
        red.drop_rows.iter().copied().collect();
    // Resolve fates, following alias chains onto fixes.
    let mut fates: Vec<Option<VarFate>> = vec![None; n];
    for &(v, val) in &red.fixes {
        fates[v] = Some(VarFate::Fixed(val));
    }
    for &(src, dst) in &red.aliases {
        if fates[src].is_none() {
            fates[src] = Some(VarFate::Aliased(dst));
        }
    }
    // Collapse alias chains; an alias whose root is fixed becomes a fix.
    for i in 0..n {
        let mut root = i;
        let mut hops = 0;
        while let Some(VarFate::Aliased(next)) = fates[root] {
            root = next;
            hops += 1;
            assert!(hops <= n, "alias cycle");
        }
        if root != i {
            match fates[root] {
                Some(VarFate::Fixed(v)) => fates[i] = Some(VarFate::Fixed(v)),
                None | Some(VarFate::Kept(_)) => fates[i] = Some(VarFate::Aliased(root)),
                Some(VarFate::Aliased(_)) => unreachable!(),
            }
        }
    }
    let mut reduced_nvars = 0usize;
    let mut fates: Vec<VarFate> = fates
        .into_iter()
        .map(|f| f.unwrap_or(VarFate::Kept(usize::MAX)))
        .collect();
    for fate in fates.iter_mut() {
        if let VarFate::Kept(slot) = fate {
            *slot = reduced_nvars;
            reduced_nvars += 1;
        }
    }

    let mut out = BlockSdp::new();
    for (i, fate) in fates.iter().enumerate() {
        if matches!(fate, VarFate::Kept(_)) {
            out.add_var(p.var_names[i].clone(), p.objective[i]);
        }
    }
    // Accumulate objective of fixed vars is irrelevant (constant offset kept
    // outside; BnB re-evaluates costs on lifted vectors).

    // Fold coefficients blockwise into dense scratch, then re-sparsify.
    let nblocks = p.spec.blocks.len();
    // For diag blocks: rows as (terms over reduced vars, konst).
    let mut diag_rows: Vec<Vec<(Vec<(usize, f64)>, f64)>> = vec![Vec::new(); nblocks];
    let mut psd_entries: Vec<HashMap<(u32, u32), Vec<(usize, f64)>>> =
        vec![HashMap::new(); nblocks];
    let mut psd_consts: Vec<HashMap<(u32, u32), f64>> = vec![HashMap::new(); nblocks];

    for (b, konst) in p.constant.iter().enumerate() {
        match konst {
            ConstBlock::Sym { entries, .. } => {
                for &(i, j, v) in entries {
                    *psd_consts[b].entry((i, j)).or_insert(0.0) += v;
                }
            }
            ConstBlock::Diag(c) => {
                for &v in c {
                    diag_rows[b].push((Vec::new(), v));
                }
            }
        }
    }
    for (var, blocks) in p.coeff.iter().enumerate() {
        let (target, factor): (Option<usize>, f64) = match &fates[var] {
            VarFate::Kept(_) => (Some(var), 1.0),
            VarFate::Fixed(v) => (None, *v),
            VarFate::Aliased(root) => (Some(*root), 1.0),
        };
        for (b, c) in blocks {
            match c {
                Coeff::Sym(s) => {
                    for &(i, j, v) in &s.entries {
                        match target {
                            Some(t) => {
                                psd_entries[*b].entry((i, j)).or_default().push((t, v));
                            }
                            None => *psd_consts[*b].entry((i, j)).or_insert(0.0) += factor * v,
                        }
                    }
                }
                Coeff::Diag(rows) => {
                    for &(r, v) in rows {
                        match target {
                            Some(t) => diag_rows[*b][r as usize].0.push((t, v)),
                            None => diag_rows[*b][r as usize].1 += factor * v,
                        }
                    }
                }
            }
        }
    }

    // Rebuild blocks in original order.
    for b in 0..nblocks {
        match p.spec.blocks[b].0 {
            BlockKind::Psd => {
                let dim = p.spec.blocks[b].1;
                let nb = out.add_psd_block(dim);
                for ((i, j), v) in &psd_consts[b] {
                    out.add_const_sym(nb, *i as usize, *j as usize, *v);
                }
                for ((i, j), terms) in &psd_entries[b] {
                    for &(orig_var, v) in terms {
                        if let VarFate::Kept(k) = fates[orig_var] {
                            out.add_sym_entry(k, nb, *i as usize, *j as usize, v);
                        } else {
                            unreachable!("target always resolves to a kept var");
                        }
                    }
                }
            }
            BlockKind::NonNegDiag => {
                let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
                for (r, (terms, konst)) in diag_rows[b].drain(..).enumerate() {
                    if dropped.contains(&(b, r as u32)) {
                        continue;
                    }
                    // Merge duplicate vars within a row.
                    let mut merged: Vec<(usize, f64)> = Vec::new();
                    for (v, c) in terms {
                        match merged.iter_mut().find(|(mv, _)| *mv == v) {
                            Some((_, mc)) => *mc += c,
                            None => merged.push((v, c)),
                        }
                    }
                    merged.retain(|&(_, c)| c != 0.0);
                    if merged.is_empty() {
                        if konst < -ROW_FEAS_TOL {
                            return Reduced::Infeasible;
                        }
                        continue; // satisfied constant row
                    }
                    rows.push((merged, konst));
                }
                if rows.is_empty() {
                    continue;
                }
                let nb = out.add_diag_block();
                for (terms, konst) in rows {
                    let mapped: Vec<(usize, f64)> = terms
                        .into_iter()
                        .map(|(v, c)| match fates[v] {
                            VarFate::Kept(k) => (k, c),
                            _ => unreachable!(),
                        })
                        .collect();
                    out.add_row(nb, &mapped, konst);
                }
            }
        }
    }

    Reduced::Problem(out, VarMap { fates, reduced_nvars })
}

/// Finds inequality-row pairs that together pin a variable or force two
/// variables equal, and returns the corresponding reduction.
///
/// Only single-variable pins (`a x = c`) and zero-offset two-variable
/// aliases (`a x - a y = 0`) are converted; anything else is left alone.
pub fn detect_forced_equalities(p: &BlockSdp) -> Reduction {
    #[derive(Hash, PartialEq, Eq)]
    struct Key(Vec<(usize, u64)>, u64);

    // Collapse -0.0 onto 0.0 so negated keys of zero constants match.
    fn bits(v: f64) -> u64 {
        if v == 0.0 { 0 } else { v.to_bits() }
    }

    let mut red = Reduction::default();
    let mut consumed_var = vec![false; p.nvars()];

    for (b, &(kind, _)) in p.spec.blocks.iter().enumerate() {
        if kind != BlockKind::NonNegDiag {
            continue;
        }
        // Gather rows of this block.
        let consts = match &p.constant[b] {
            ConstBlock::Diag(c) => c.clone(),
            _ => unreachable!(),
        };
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); consts.len()];
        for (var, blocks) in p.coeff.iter().enumerate() {
            for (bb, c) in blocks {
                if *bb != b {
                    continue;
                }
                if let Coeff::Diag(entries) = c {
                    for &(r, v) in entries {
                        rows[r as usize].push((var, v));
                    }
                }
            }
        }
        let mut index: HashMap<Key, usize> = HashMap::new();
        let keyed: Vec<(Key, Key)> = rows
            .iter()
            .zip(consts.iter())
            .map(|(terms, &c)| {
                let mut t = terms.clone();
                t.sort_by_key(|&(v, _)| v);
                let fwd = Key(t.iter().map(|&(v, x)| (v, bits(x))).collect(), bits(c));
                let neg = Key(t.iter().map(|&(v, x)| (v, bits(-x))).collect(), bits(-c));
                (fwd, neg)
            })
            .collect();
        for (r, (fwd, _)) in keyed.iter().enumerate() {
            index.entry(Key(fwd.0.clone(), fwd.1)).or_insert(r);
        }
        for (r, (_, neg)) in keyed.iter().enumerate() {
            let Some(&other) = index.get(neg) else { continue };
            if other == r {
                continue;
            }
            // Rows r and other are exact negations: equality c + sum a x = 0.
            let terms = &rows[r];
            let c = consts[r];
            match terms.len() {
                1 => {
                    let (v, a) = terms[0];
                    if !consumed_var[v] {
                        consumed_var[v] = true;
                        red.fixes.push((v, -c / a));
                    }
                }
                2 => {
                    let (v1, a1) = terms[0];
                    let (v2, a2) = terms[1];
                    if c == 0.0 && a1 == -a2 && !consumed_var[v1] && !consumed_var[v2] {
                        consumed_var[v1] = true;
                        red.aliases.push((v1, v2));
                    }
                }
                _ => {}
            }
        }
    }
    red
}

/// Repeatedly presolves forced equalities until a fixed point (or the
/// problem is proven infeasible by a violated constant row).
pub fn presolve(p: &BlockSdp) -> Reduced {
    let mut current = p.clone();
    let mut map = VarMap::identity(p.nvars());
    for _ in 0..5 {
        let red = detect_forced_equalities(&current);
        if red.is_empty() {
            break;
        }
        match apply(&current, &red) {
            Reduced::Infeasible => return Reduced::Infeasible,
            Reduced::Problem(next, step) => {
                map = compose(&map, &step);
                current = next;
            }
        }
    }
    Reduced::Problem(current, map)
}

/// Composition of two variable maps (first `a`, then `b`).
pub fn compose(a: &VarMap, b: &VarMap) -> VarMap {
    let fates = a
        .fates
        .iter()
        .map(|fa| match fa {
            VarFate::Fixed(v) => VarFate::Fixed(*v),
            VarFate::Kept(k) | VarFate::Aliased(k) => {
                // Index into b by the intermediate position of the root.
                let mid = match &a.fates[resolve_root(a, *k)] {
                    VarFate::Kept(m) => *m,
                    VarFate::Fixed(v) => return VarFate::Fixed(*v),
                    VarFate::Aliased(_) => unreachable!(),
                };
                match &b.fates[mid] {
                    VarFate::Kept(k2) => VarFate::Kept(*k2),
                    VarFate::Fixed(v) => VarFate::Fixed(*v),
                    VarFate::Aliased(r) => match &b.fates[*r] {
                        VarFate::Kept(k2) => VarFate::Kept(*k2),
                        VarFate::Fixed(v) => VarFate::Fixed(*v),
                        VarFate::Aliased(_) => unreachable!(),
                    },
                }
            }
        })
        .collect();
    VarMap { fates, reduced_nvars: b.reduced_nvars }
}

fn resolve_root(map: &VarMap, mut i: usize) -> usize {
    while let VarFate::Aliased(next) = map.fates[i] {
        i = next;
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> BlockSdp {
        // min x0 s.t. rows encoding x0 - x1 = 0 (pair) and x1 + 1 >= 0, x2 = 2.
        let mut p = BlockSdp::new();
        let x0 = p.add_var("x0", 1.0);
        let x1 = p.add_var("x1", 0.0);
        let x2 = p.add_var("x2", 0.0);
        let d = p.add_diag_block();
        p.add_row(d, &[(x0, 1.0), (x1, -1.0)], 0.0);
        p.add_row(d, &[(x0, -1.0), (x1, 1.0)], 0.0);
        p.add_row(d, &[(x1, 1.0)], 1.0);
        p.add_row(d, &[(x2, 1.0)], -2.0);
        p.add_row(d, &[(x2, -1.0)], 2.0);
        p
    }

    #[test]
    fn pairs_become_alias_and_fix() {
        let p = toy();
        let red = detect_forced_equalities(&p);
        assert_eq!(red.fixes, vec![(2, 2.0)]);
        assert_eq!(red.aliases, vec![(0, 1)]);
        match presolve(&p) {
            Reduced::Problem(q, map) => {
                assert_eq!(q.nvars(), 1);
                let lifted = map.lift(&[7.0]);
                assert_eq!(lifted, vec![7.0, 7.0, 2.0]);
            }
            Reduced::Infeasible => panic!("feasible toy"),
        }
    }

    #[test]
    fn violated_constant_row_is_infeasible() {
        let mut p = BlockSdp::new();
        let x = p.add_var("x", 0.0);
        let d = p.add_diag_block();
        p.add_row(d, &[(x, 1.0)], -3.0);
        p.add_row(d, &[(x, -1.0)], 3.0);
        p.add_row(d, &[(x, 1.0)], -5.0);
        p.add_row(d, &[(x, -1.0)], 5.0);
        assert!(matches!(presolve(&p), Reduced::Infeasible));
    }
}
