use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use super::{expansion_from_init, is_inter_node, realize, ConceptualExpansion, Context, MAX_SCALE, MIN_SCALE};
use crate::error::{Error, Result};
use crate::graph::{GameGraph, Provenance};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Operator {
    ToggleEdge,
    ScaleEdge,
    AddTerm,
    DropTerm,
    Retarget,
}

impl Operator {
    pub const ALL: [Operator; 5] = [
        Operator::ToggleEdge,
        Operator::ScaleEdge,
        Operator::AddTerm,
        Operator::DropTerm,
        Operator::Retarget,
    ];
}

/// (node, term, edge) coordinates into an expansion.
type Slot = (String, usize, usize);

fn edge_slots(ce: &ConceptualExpansion, keep: impl Fn(&Slot) -> bool) -> Vec<Slot> {
    let mut out = Vec::new();
    for (id, n) in &ce.nodes {
        for (ti, t) in n.terms.iter().enumerate() {
            for ei in 0..t.filter.len() {
                let s = (id.clone(), ti, ei);
                if keep(&s) {
                    out.push(s);
                }
            }
        }
    }
    out
}

fn apply(ctx: &Context, ce: &ConceptualExpansion, op: Operator, rng: &mut Rng) -> Option<ConceptualExpansion> {
    let mut out = ce.clone();
    match op {
        Operator::ToggleEdge => {
            let (n, t, e) = edge_slots(ce, |_| true).choose(rng)?.clone();
            let f = &mut out.nodes.get_mut(&n)?.terms[t].filter[e];
            f.include = !f.include;
        }
        Operator::ScaleEdge => {
            let slots = edge_slots(ce, |(n, t, e)| ce.nodes[n].terms[*t].filter[*e].include);
            let (n, t, e) = slots.choose(rng)?.clone();
            let f = &mut out.nodes.get_mut(&n)?.terms[t].filter[e];
            let factor = 2f64.powf(rng.gen_range(-1.0..=1.0));
            f.scale = (f.scale * factor).clamp(MIN_SCALE, MAX_SCALE);
        }
        Operator::AddTerm => {
            let mut options = Vec::new();
            for (id, n) in &ce.nodes {
                for entry in ctx.entries(id) {
                    let r = entry.node_ref();
                    if !n.terms.iter().any(|t| t.source == r) {
                        options.push((id.clone(), r));
                    }
                }
            }
            let (n, r) = options.choose(rng)?.clone();
            let term = ctx.full_term(&r);
            out.nodes.get_mut(&n)?.terms.push(term);
        }
        Operator::DropTerm => {
            let options: Vec<(String, usize)> = ce
                .nodes
                .iter()
                .filter(|(_, n)| n.terms.len() >= 2)
                .flat_map(|(id, n)| (0..n.terms.len()).map(move |i| (id.clone(), i)))
                .collect();
            let (n, i) = options.choose(rng)?.clone();
            out.nodes.get_mut(&n)?.terms.remove(i);
        }
        Operator::Retarget => {
            let mut options = Vec::new();
            for (n, t, e) in edge_slots(ce, |(n, t, e)| ce.nodes[n].terms[*t].filter[*e].include) {
                let term = &ce.nodes[&n].terms[t];
                let Some(src) = ctx.kb_node(&term.source) else {
                    continue;
                };
                let edge = &src.edges[e];
                if !is_inter_node(edge, &src.id) {
                    continue;
                }
                let current = term.filter[e]
                    .retarget
                    .clone()
                    .or_else(|| ctx.mapping.target_of(&term.source.graph, &edge.target).map(str::to_string));
                let targets: Vec<String> = ctx
                    .compatible_targets(&edge.kind, &n)
                    .into_iter()
                    .filter(|c| Some(c) != current.as_ref())
                    .collect();
                if !targets.is_empty() {
                    options.push(((n, t, e), targets));
                }
            }
            let ((n, t, e), targets) = options.choose(rng)?;
            let to = targets.choose(rng)?.clone();
            out.nodes.get_mut(n)?.terms[*t].filter[*e].retarget = Some(to);
        }
    }
    Some(out)
}

/// A random neighbor and the operator that produced it. Operators are drawn
/// uniformly; one that cannot apply to `ce` is redrawn. `None` when no
/// operator applies.
pub fn get_neighbor_traced(
    ctx: &Context,
    ce: &ConceptualExpansion,
    rng: &mut Rng,
) -> Option<(ConceptualExpansion, Operator)> {
    let mut untried = Operator::ALL.to_vec();
    while !untried.is_empty() {
        let i = rng.gen_range(0..untried.len());
        let op = untried[i];
        if let Some(n) = apply(ctx, ce, op, rng) {
            return Some((n, op));
        }
        untried.swap_remove(i);
    }
    None
}

pub fn get_neighbor(ctx: &Context, ce: &ConceptualExpansion, rng: &mut Rng) -> Option<ConceptualExpansion> {
    get_neighbor_traced(ctx, ce, rng).map(|(n, _)| n)
}

/// Hard stop for the climb. Small filter changes keep nudging novelty upward,
/// so without a cap the search can creep for hundreds of steps.
pub const MAX_STEPS: usize = 40;

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub neighbors: usize,
    pub patience: usize,
    pub max_steps: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            neighbors: 10,
            patience: 10,
            max_steps: MAX_STEPS,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub expansion: ConceptualExpansion,
    pub graph: GameGraph,
    pub score: f64,
    pub initial_score: f64,
    pub steps: usize,
    pub evaluations: usize,
    /// Every candidate scored during the search, best first.
    pub ranked: Vec<(f64, ConceptualExpansion)>,
}

pub type Heuristic<'a> = dyn Fn(&GameGraph) -> f64 + Sync + 'a;

pub(crate) fn evaluate_all(
    ctx: &Context,
    candidates: &[ConceptualExpansion],
    id: &str,
    provenance: Provenance,
    h: &Heuristic<'_>,
) -> Vec<f64> {
    candidates
        .par_iter()
        .map(|ce| match realize(ctx, ce, id, provenance) {
            Ok(g) => h(&g),
            Err(e) => {
                tracing::debug!(error = %e, "candidate failed to realize");
                f64::NEG_INFINITY
            }
        })
        .collect()
}

pub(crate) fn finish(
    ctx: &Context,
    mut ranked: Vec<(f64, ConceptualExpansion)>,
    id: &str,
    provenance: Provenance,
    steps: usize,
    initial_score: f64,
) -> Result<SearchOutcome> {
    let evaluations = ranked.len();
    ranked.retain(|(s, _)| s.is_finite());
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let Some((score, expansion)) = ranked.first().cloned() else {
        return Err(Error::Realize("no candidate could be realized".into()));
    };
    let graph = realize(ctx, &expansion, id, provenance)?;
    Ok(SearchOutcome {
        expansion,
        graph,
        score,
        initial_score,
        steps,
        evaluations,
        ranked,
    })
}

/// Greedy hill climbing over conceptual expansions.
pub fn ce_search(
    ctx: &Context,
    id: &str,
    h: &Heuristic<'_>,
    opts: &SearchOptions,
    rng: &mut Rng,
) -> Result<SearchOutcome> {
    let mut current = expansion_from_init(ctx, rng);
    let mut score = evaluate_all(ctx, std::slice::from_ref(&current), id, Provenance::Expanded, h)[0];
    let initial_score = score;
    let mut seen = vec![(score, current.clone())];
    let mut stale = 0;
    let mut steps = 0;
    while stale < opts.patience && steps < opts.max_steps {
        steps += 1;
        let neighbors: Vec<ConceptualExpansion> =
            (0..opts.neighbors).filter_map(|_| get_neighbor(ctx, &current, rng)).collect();
        if neighbors.is_empty() {
            break;
        }
        let scores = evaluate_all(ctx, &neighbors, id, Provenance::Expanded, h);
        let mut best: Option<usize> = None;
        for (i, s) in scores.iter().enumerate() {
            if best.map_or(true, |b| *s > scores[b]) {
                best = Some(i);
            }
        }
        let b = best.expect("non-empty");
        if scores[b] > score {
            score = scores[b];
            current = neighbors[b].clone();
            stale = 0;
        } else {
            stale += 1;
        }
        seen.extend(scores.into_iter().zip(neighbors));
        tracing::debug!(step = steps, score, stale, "ce search step");
    }
    finish(ctx, seen, id, Provenance::Expanded, steps, initial_score)
}
