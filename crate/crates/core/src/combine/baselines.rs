//! Amalgam, blend and composition baselines. Every candidate is built as a
//! conceptual expansion with whole, unscaled terms, so each baseline output is
//! also a point of the expansion space.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::search::{evaluate_all, finish, Heuristic, SearchOutcome};
use super::{is_inter_node, ConceptualExpansion, Context, ExpandedNode, Term};
use crate::error::Result;
use crate::graph::Provenance;
use crate::proto::equivalents;
use crate::rng::Rng;

pub const EXHAUSTIVE_CAP: usize = 1_000_000;
pub const SAMPLE_COUNT: usize = 50_000;

#[derive(Clone, Copy, Debug)]
pub struct CandidateCaps {
    /// Enumerate everything when the space is at most this large.
    pub exhaustive: usize,
    /// Otherwise evaluate this many candidates.
    pub samples: usize,
}

impl Default for CandidateCaps {
    fn default() -> Self {
        CandidateCaps {
            exhaustive: EXHAUSTIVE_CAP,
            samples: SAMPLE_COUNT,
        }
    }
}

/// Per output node, the alternative term lists it may take.
type Options = Vec<(String, Vec<Vec<Term>>)>;

fn space_size(counts: impl IntoIterator<Item = u128>) -> u128 {
    counts.into_iter().fold(1u128, |a, c| a.saturating_mul(c))
}

fn assemble(options: &Options, choice: &[usize]) -> ConceptualExpansion {
    let mut ce = ConceptualExpansion::default();
    for ((id, opts), &c) in options.iter().zip(choice) {
        ce.nodes.insert(
            id.clone(),
            ExpandedNode {
                id: id.clone(),
                terms: opts[c].clone(),
            },
        );
    }
    ce
}

fn enumerate_all(options: &Options) -> Vec<ConceptualExpansion> {
    let counts: Vec<usize> = options.iter().map(|(_, o)| o.len()).collect();
    let total = space_size(counts.iter().map(|&c| c as u128)) as usize;
    let mut out = Vec::with_capacity(total);
    let mut choice = vec![0usize; counts.len()];
    for _ in 0..total {
        out.push(assemble(options, &choice));
        for i in (0..choice.len()).rev() {
            choice[i] += 1;
            if choice[i] < counts[i] {
                break;
            }
            choice[i] = 0;
        }
    }
    out
}

fn sample_uniform(options: &Options, n: usize, rng: &mut Rng) -> Vec<ConceptualExpansion> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < n && tries < n * 4 {
        tries += 1;
        let choice: Vec<usize> = options.iter().map(|(_, o)| rng.gen_range(0..o.len())).collect();
        if seen.insert(choice.clone()) {
            out.push(assemble(options, &choice));
        }
    }
    out
}

fn amalgam_options(ctx: &Context) -> Options {
    ctx.proto
        .nodes
        .keys()
        .map(|id| {
            let opts: Vec<Vec<Term>> = ctx.entries(id).iter().map(|e| vec![ctx.full_term(&e.node_ref())]).collect();
            (id.clone(), if opts.is_empty() { vec![Vec::new()] } else { opts })
        })
        .collect()
}

/// Every output node takes exactly one whole mapped kb node.
pub fn amalgam_candidates(ctx: &Context, caps: CandidateCaps, rng: &mut Rng) -> Vec<ConceptualExpansion> {
    let options = amalgam_options(ctx);
    let size = space_size(options.iter().map(|(_, o)| o.len() as u128));
    if size <= caps.exhaustive as u128 {
        enumerate_all(&options)
    } else {
        sample_uniform(&options, caps.samples, rng)
    }
}

/// Non-empty subsets of `n` items as bit masks, largest first.
fn subsets_largest_first(n: usize, limit: usize) -> Vec<u64> {
    assert!(n < 64, "too many mapped nodes for one output node");
    let mut out = Vec::new();
    for size in (1..=n).rev() {
        for mask in combinations(n, size) {
            if out.len() >= limit {
                return out;
            }
            out.push(mask);
        }
    }
    out
}

fn combinations(n: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().fold(0u64, |m, &i| m | 1 << i));
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Every output node takes the union of a non-empty subset of its mapped kb
/// nodes. Larger unions are enumerated first; the full union comes first.
pub fn blend_candidates(ctx: &Context, caps: CandidateCaps) -> Vec<ConceptualExpansion> {
    let mut deficits: Vec<Vec<usize>> = Vec::new();
    let options: Options = ctx
        .proto
        .nodes
        .keys()
        .map(|id| {
            let entries = ctx.entries(id);
            if entries.is_empty() {
                deficits.push(vec![0]);
                return (id.clone(), vec![Vec::new()]);
            }
            let masks = subsets_largest_first(entries.len(), caps.samples.max(1));
            deficits.push(masks.iter().map(|m| entries.len() - m.count_ones() as usize).collect());
            let opts = masks
                .iter()
                .map(|m| {
                    entries
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| m & (1 << i) != 0)
                        .map(|(_, e)| ctx.full_term(&e.node_ref()))
                        .collect()
                })
                .collect();
            (id.clone(), opts)
        })
        .collect();
    let size = space_size(options.iter().map(|(_, o)| o.len() as u128));
    if size <= caps.exhaustive as u128 {
        return enumerate_all(&options);
    }
    // best-first on the total number of dropped terms
    let cost = |c: &[usize]| -> usize { c.iter().zip(&deficits).map(|(&i, d)| d[i]).sum() };
    let start = vec![0usize; options.len()];
    let mut heap = BinaryHeap::from([Reverse((cost(&start), start.clone()))]);
    let mut seen = HashSet::from([start]);
    let mut out = Vec::new();
    while let Some(Reverse((_, choice))) = heap.pop() {
        out.push(assemble(&options, &choice));
        if out.len() >= caps.samples {
            break;
        }
        for i in 0..choice.len() {
            if choice[i] + 1 < options[i].1.len() {
                let mut next = choice.clone();
                next[i] += 1;
                if seen.insert(next.clone()) {
                    heap.push(Reverse((cost(&next), next)));
                }
            }
        }
    }
    out
}

/// Target choices for each included inter-node edge of `term`, original target
/// first. An edge may move to any output node whose mapped set holds a kb node
/// equivalent to its original target.
pub fn rewiring_options(ctx: &Context, home: &str, term: &Term) -> Vec<(usize, Vec<String>)> {
    let Some(src) = ctx.kb_node(&term.source) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (i, (e, f)) in src.edges.iter().zip(&term.filter).enumerate() {
        if !f.include || !is_inter_node(e, &src.id) {
            continue;
        }
        let Some(original) = ctx.mapping.target_of(&term.source.graph, &e.target) else {
            continue;
        };
        let equiv = equivalents(&ctx.mapping, &crate::proto::NodeRef::new(&term.source.graph, &e.target));
        let compatible: BTreeSet<String> = ctx.compatible_targets(&e.kind, home).into_iter().collect();
        let mut targets = vec![original.to_string()];
        for (q, entries) in &ctx.mapping.entries {
            if q != original && compatible.contains(q) && entries.iter().any(|x| equiv.contains(&x.node_ref())) {
                targets.push(q.clone());
            }
        }
        out.push((i, targets));
    }
    out
}

fn rewired_terms(ctx: &Context, home: &str, base: &Term, limit: usize) -> Vec<Term> {
    let opts = rewiring_options(ctx, home, base);
    let mut out = vec![base.clone()];
    for (edge, targets) in opts {
        let mut next = Vec::new();
        for t in &out {
            for (k, q) in targets.iter().enumerate() {
                let mut t = t.clone();
                t.filter[edge].retarget = (k > 0).then(|| q.clone());
                next.push(t);
                if next.len() >= limit {
                    break;
                }
            }
        }
        out = next;
    }
    out
}

pub fn composition_space_size(ctx: &Context) -> u128 {
    space_size(ctx.proto.nodes.keys().map(|id| {
        let entries = ctx.entries(id);
        if entries.is_empty() {
            return 1;
        }
        entries
            .iter()
            .map(|e| {
                let t = ctx.full_term(&e.node_ref());
                space_size(rewiring_options(ctx, id, &t).iter().map(|(_, o)| o.len() as u128))
            })
            .fold(0u128, |a, b| a.saturating_add(b))
    }))
}

pub fn amalgam_space_size(ctx: &Context) -> u128 {
    space_size(ctx.proto.nodes.keys().map(|id| ctx.entries(id).len().max(1) as u128))
}

pub fn composition_candidates(ctx: &Context, caps: CandidateCaps, rng: &mut Rng) -> Vec<ConceptualExpansion> {
    if composition_space_size(ctx) <= caps.exhaustive as u128 {
        let options: Options = amalgam_options(ctx)
            .into_iter()
            .map(|(id, opts)| {
                let expanded = opts
                    .into_iter()
                    .flat_map(|terms| match terms.first() {
                        Some(t) => rewired_terms(ctx, &id, t, caps.exhaustive).into_iter().map(|t| vec![t]).collect(),
                        None => vec![Vec::new()],
                    })
                    .collect();
                (id, expanded)
            })
            .collect();
        return enumerate_all(&options);
    }
    let base = amalgam_options(ctx);
    let mut out = Vec::with_capacity(caps.samples);
    for _ in 0..caps.samples {
        let mut ce = ConceptualExpansion::default();
        for (id, opts) in &base {
            let mut terms = opts.choose(rng).expect("non-empty").clone();
            if let Some(t) = terms.first_mut() {
                for (edge, targets) in rewiring_options(ctx, id, t) {
                    let k = rng.gen_range(0..targets.len());
                    t.filter[edge].retarget = (k > 0).then(|| targets[k].clone());
                }
            }
            ce.nodes.insert(id.clone(), ExpandedNode { id: id.clone(), terms });
        }
        out.push(ce);
    }
    out
}

fn run(
    ctx: &Context,
    candidates: Vec<ConceptualExpansion>,
    id: &str,
    provenance: Provenance,
    h: &Heuristic<'_>,
) -> Result<SearchOutcome> {
    tracing::info!(candidates = candidates.len(), ?provenance, "evaluating baseline candidates");
    let scores = evaluate_all(ctx, &candidates, id, provenance, h);
    let first = scores.first().copied().unwrap_or(f64::NEG_INFINITY);
    finish(ctx, scores.into_iter().zip(candidates).collect(), id, provenance, 0, first)
}

pub fn amalgam_search(
    ctx: &Context,
    id: &str,
    h: &Heuristic<'_>,
    caps: CandidateCaps,
    rng: &mut Rng,
) -> Result<SearchOutcome> {
    run(ctx, amalgam_candidates(ctx, caps, rng), id, Provenance::Amalgam, h)
}

pub fn blend_search(ctx: &Context, id: &str, h: &Heuristic<'_>, caps: CandidateCaps) -> Result<SearchOutcome> {
    run(ctx, blend_candidates(ctx, caps), id, Provenance::Blend, h)
}

pub fn composition_search(
    ctx: &Context,
    id: &str,
    h: &Heuristic<'_>,
    caps: CandidateCaps,
    rng: &mut Rng,
) -> Result<SearchOutcome> {
    run(ctx, composition_candidates(ctx, caps, rng), id, Provenance::Composition, h)
}
