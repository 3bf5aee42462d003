//! Forward rounds, neighbor scoring and backpropagation through time.

use alloc::sync::Arc;
use alloc::vec::Vec;

use super::linalg::{add_into, matvec_acc, matvec_t_acc, outer_acc, tanh_in_place};
use super::params::{MessageDirection, ParameterSet, T};
use super::{node_feature_rows, Embeddings, GnnError, EDGE_FEATURES, NODE_FEATURES, OBS_FEATURES};
use crate::linegraph::{DirectedEdgeId, DirectedLineGraph};
use crate::math;
use crate::netsim::NodeId;

/// Line-graph neighbors a node aggregates from, and the physical node the
/// arcs share.
fn sources(graph: &DirectedLineGraph, dir: MessageDirection, i: usize) -> (&[usize], NodeId) {
    let e = graph.node(i);
    match dir {
        MessageDirection::Backward => (graph.successors(i), e.head),
        MessageDirection::Forward => (graph.predecessors(i), e.tail),
    }
}

fn check_features(graph: &DirectedLineGraph, edge_features: &[f64], node_features: &[f64]) -> Result<(), GnnError> {
    let expected = graph.node_count() * EDGE_FEATURES;
    if edge_features.len() != expected {
        return Err(GnnError::EdgeFeatureLength { expected, got: edge_features.len() });
    }
    let covered = node_features.len() / NODE_FEATURES;
    if let Some(e) = graph.nodes().iter().find(|e| e.tail.0 as usize >= covered || e.head.0 as usize >= covered) {
        let v = if e.tail.0 as usize >= covered { e.tail } else { e.head };
        return Err(GnnError::NodeFeaturesMissing(v));
    }
    Ok(())
}

/// Intermediate values of one round, kept for the backward pass.
struct RoundTrace {
    graph: Arc<DirectedLineGraph>,
    /// Row of each node in the previous round's graph (`None` = same graph).
    prev_map: Option<Vec<Option<usize>>>,
    hin: Vec<f64>,
    t1: Vec<f64>,
    hhat: Vec<f64>,
    s: Vec<f64>,
    g: Vec<f64>,
    m: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    hout: Vec<f64>,
}

fn round(
    p: &ParameterSet,
    graph: &Arc<DirectedLineGraph>,
    hin: Vec<f64>,
    ef: &[f64],
    nf: &[f64],
    prev_map: Option<Vec<Option<usize>>>,
) -> RoundTrace {
    let c = p.config();
    let (d, h) = (c.embedding_dim, c.hidden_dim);
    let n_nodes = graph.node_count();
    let n_vertices = nf.len() / NODE_FEATURES;

    // Encode.
    let mut t1 = alloc::vec![0.0; n_nodes * h];
    let mut hhat = alloc::vec![0.0; n_nodes * d];
    let mut inp = alloc::vec![0.0; d + EDGE_FEATURES];
    for i in 0..n_nodes {
        inp[..d].copy_from_slice(&hin[i * d..(i + 1) * d]);
        inp[d..].copy_from_slice(&ef[i * EDGE_FEATURES..(i + 1) * EDGE_FEATURES]);
        let a1 = &mut t1[i * h..(i + 1) * h];
        a1.copy_from_slice(p.get(T::EncB1));
        matvec_acc(p.get(T::EncW1), h, d + EDGE_FEATURES, &inp, a1);
        tanh_in_place(a1);
        let a2 = &mut hhat[i * d..(i + 1) * d];
        a2.copy_from_slice(p.get(T::EncB2));
        matvec_acc(p.get(T::EncW2), d, h, &t1[i * h..(i + 1) * h], a2);
        tanh_in_place(a2);
    }

    // Aggregate: g = tanh(W_self h_e + W_arc x_c + W_nbr h_f + b1) per arc.
    let mut pself = alloc::vec![0.0; n_nodes * h];
    let mut qnbr = alloc::vec![0.0; n_nodes * h];
    for i in 0..n_nodes {
        matvec_acc(p.get(T::AggWSelf), h, d, &hhat[i * d..(i + 1) * d], &mut pself[i * h..(i + 1) * h]);
        matvec_acc(p.get(T::AggWNbr), h, d, &hhat[i * d..(i + 1) * d], &mut qnbr[i * h..(i + 1) * h]);
    }
    let mut rvert: Vec<Option<Vec<f64>>> = alloc::vec![None; n_vertices];
    let mut s = alloc::vec![0.0; n_nodes * h];
    let mut g = Vec::with_capacity(graph.arc_count() * h);
    let mut base = alloc::vec![0.0; h];
    let mut m = alloc::vec![0.0; n_nodes * d];
    for i in 0..n_nodes {
        let (nbrs, cv) = sources(graph, c.direction, i);
        if nbrs.is_empty() {
            continue;
        }
        let rv = rvert[cv.0 as usize].get_or_insert_with(|| {
            let mut r = alloc::vec![0.0; h];
            matvec_acc(p.get(T::AggWArc), h, NODE_FEATURES, &nf[cv.0 as usize * NODE_FEATURES..][..NODE_FEATURES], &mut r);
            r
        });
        for k in 0..h {
            base[k] = pself[i * h + k] + rv[k] + p.get(T::AggB1)[k];
        }
        let si = &mut s[i * h..(i + 1) * h];
        for &j in nbrs {
            let q = &qnbr[j * h..(j + 1) * h];
            for k in 0..h {
                let v = math::tanh(base[k] + q[k]);
                g.push(v);
                si[k] += v;
            }
        }
        let mi = &mut m[i * d..(i + 1) * d];
        let deg = nbrs.len() as f64;
        for (o, b) in mi.iter_mut().zip(p.get(T::AggB2)) {
            *o = deg * b;
        }
        matvec_acc(p.get(T::AggW2), d, h, si, mi);
    }

    // Gated update.
    let mut z = alloc::vec![0.0; n_nodes * d];
    let mut r = alloc::vec![0.0; n_nodes * d];
    let mut nn = alloc::vec![0.0; n_nodes * d];
    let mut hout = alloc::vec![0.0; n_nodes * d];
    let mut u = alloc::vec![0.0; 2 * d];
    for i in 0..n_nodes {
        let hh = &hhat[i * d..(i + 1) * d];
        u[..d].copy_from_slice(hh);
        u[d..].copy_from_slice(&m[i * d..(i + 1) * d]);
        let zi = &mut z[i * d..(i + 1) * d];
        zi.copy_from_slice(p.get(T::GruBz));
        matvec_acc(p.get(T::GruWz), d, 2 * d, &u, zi);
        zi.iter_mut().for_each(|v| *v = math::sigmoid(*v));
        let ri = &mut r[i * d..(i + 1) * d];
        ri.copy_from_slice(p.get(T::GruBr));
        matvec_acc(p.get(T::GruWr), d, 2 * d, &u, ri);
        ri.iter_mut().for_each(|v| *v = math::sigmoid(*v));
        for k in 0..d {
            u[k] = ri[k] * hh[k];
        }
        let ni = &mut nn[i * d..(i + 1) * d];
        ni.copy_from_slice(p.get(T::GruBn));
        matvec_acc(p.get(T::GruWn), d, 2 * d, &u, ni);
        tanh_in_place(ni);
        for k in 0..d {
            hout[i * d + k] = (1.0 - zi[k]) * ni[k] + zi[k] * hh[k];
        }
    }

    RoundTrace { graph: Arc::clone(graph), prev_map, hin, t1, hhat, s, g, m, z, r, n: nn, hout }
}

/// Realign `prev` onto `graph`, returning the rows and the index map.
fn carry(prev: &Embeddings, graph: &Arc<DirectedLineGraph>) -> (Vec<f64>, Option<Vec<Option<usize>>>) {
    if Arc::ptr_eq(prev.graph(), graph) || **prev.graph() == **graph {
        return (prev.data().to_vec(), None);
    }
    let d = prev.dim();
    let mut data = alloc::vec![0.0; graph.node_count() * d];
    let map: Vec<Option<usize>> = graph.nodes().iter().map(|e| prev.graph().index_of(*e)).collect();
    for (j, i) in map.iter().enumerate() {
        if let Some(i) = i {
            data[j * d..(j + 1) * d].copy_from_slice(prev.row(*i));
        }
    }
    (data, Some(map))
}

/// One message-passing round over `graph`. `store` may belong to an older
/// graph; edges new to `graph` start from a zero embedding.
pub fn message_pass(
    params: &ParameterSet,
    store: &Embeddings,
    graph: &Arc<DirectedLineGraph>,
    edge_features: &[f64],
    node_features: &[f64],
) -> Result<Embeddings, GnnError> {
    check_features(graph, edge_features, node_features)?;
    let (hin, _) = carry(store, graph);
    let trace = round(params, graph, hin, edge_features, node_features, None);
    Ok(Embeddings::from_raw(Arc::clone(graph), params.config().embedding_dim, trace.hout))
}

struct ScoreTrace {
    input: Vec<f64>,
    t: Vec<f64>,
    score: f64,
}

fn score_input(
    obs: f64,
    h: &[f64],
    ef: &[f64],
    nf: &[f64],
) -> Vec<f64> {
    let mut x = Vec::with_capacity(OBS_FEATURES + h.len() + EDGE_FEATURES + NODE_FEATURES);
    x.push(obs);
    x.extend_from_slice(h);
    x.extend_from_slice(ef);
    x.extend_from_slice(nf);
    x
}

fn score_forward(p: &ParameterSet, input: Vec<f64>) -> ScoreTrace {
    let hdim = p.config().hidden_dim;
    let mut t = p.get(T::ScB1).to_vec();
    matvec_acc(p.get(T::ScW1), hdim, input.len(), &input, &mut t);
    tanh_in_place(&mut t);
    let score = p.get(T::ScB2)[0] + math::dot(p.get(T::ScW2), &t);
    ScoreTrace { input, t, score }
}

/// Score of moving along line-graph node `i` (directed edge `(v, w)`).
fn score_index(
    p: &ParameterSet,
    obs: f64,
    store: &Embeddings,
    i: usize,
    edge_features: &[f64],
    node_features: &[f64],
) -> Result<ScoreTrace, GnnError> {
    let e = store.graph().node(i);
    let nf = node_feature_rows(node_features, e.head)?;
    let ef = &edge_features[i * EDGE_FEATURES..(i + 1) * EDGE_FEATURES];
    Ok(score_forward(p, score_input(obs, store.row(i), ef, nf)))
}

/// Standalone scorer evaluation for one outgoing edge.
pub fn score_edge(
    params: &ParameterSet,
    observation: f64,
    store: &Embeddings,
    edge: DirectedEdgeId,
    edge_features: &[f64],
    node_features: &[f64],
) -> Result<f64, GnnError> {
    let i = store.graph().index_of(edge).ok_or(GnnError::UnknownEdge(edge))?;
    check_features(store.graph(), edge_features, node_features)?;
    Ok(score_index(params, observation, store, i, edge_features, node_features)?.score)
}

/// One score per neighbor of `current`, in ascending neighbor order.
pub fn score_neighbors(
    params: &ParameterSet,
    observation: f64,
    current: NodeId,
    store: &Embeddings,
    edge_features: &[f64],
    node_features: &[f64],
) -> Result<Vec<(NodeId, f64)>, GnnError> {
    check_features(store.graph(), edge_features, node_features)?;
    let graph = store.graph();
    let out: Vec<(NodeId, f64)> = graph
        .neighbors(current)
        .map(|w| {
            let i = graph.index_of(DirectedEdgeId::new(current, w)).expect("neighbor edge present");
            score_index(params, observation, store, i, edge_features, node_features).map(|s| (w, s.score))
        })
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(GnnError::Isolated(current));
    }
    Ok(out)
}

/// The action taken after a round and the value it should have scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub edge: DirectedEdgeId,
    pub observation: f64,
    pub target: f64,
}

/// One environment step of a training sequence. Steps without a decision
/// still advance the recurrence (warm-up rounds, padding).
#[derive(Debug, Clone, Copy)]
pub struct SequenceStep<'a> {
    pub graph: &'a Arc<DirectedLineGraph>,
    pub edge_features: &'a [f64],
    pub node_features: &'a [f64],
    pub decision: Option<Decision>,
}

/// Sum of squared errors and the number of scored decisions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SequenceLoss {
    pub sse: f64,
    pub count: usize,
}

impl SequenceLoss {
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sse / self.count as f64
        }
    }
}

type Forward = (Vec<RoundTrace>, Vec<Option<(usize, ScoreTrace, f64)>>);

fn sequence_forward(params: &ParameterSet, h0: &Embeddings, steps: &[SequenceStep<'_>]) -> Result<Forward, GnnError> {
    let d = params.config().embedding_dim;
    let mut rounds: Vec<RoundTrace> = Vec::with_capacity(steps.len());
    let mut scores = Vec::with_capacity(steps.len());
    for step in steps {
        check_features(step.graph, step.edge_features, step.node_features)?;
        let (hin, map) = match rounds.last() {
            None => carry(h0, step.graph),
            Some(prev) => {
                let prev = Embeddings::from_raw(Arc::clone(&prev.graph), d, prev.hout.clone());
                carry(&prev, step.graph)
            }
        };
        let trace = round(params, step.graph, hin, step.edge_features, step.node_features, map);
        let scored = match step.decision {
            None => None,
            Some(dec) => {
                let i = step.graph.index_of(dec.edge).ok_or(GnnError::UnknownEdge(dec.edge))?;
                let nf = node_feature_rows(step.node_features, dec.edge.head)?;
                let ef = &step.edge_features[i * EDGE_FEATURES..(i + 1) * EDGE_FEATURES];
                let st = score_forward(params, score_input(dec.observation, &trace.hout[i * d..(i + 1) * d], ef, nf));
                Some((i, st, dec.target))
            }
        };
        rounds.push(trace);
        scores.push(scored);
    }
    Ok((rounds, scores))
}

/// Squared-error loss of a sequence without gradients.
pub fn sequence_loss(params: &ParameterSet, h0: &Embeddings, steps: &[SequenceStep<'_>]) -> Result<SequenceLoss, GnnError> {
    let (_, scores) = sequence_forward(params, h0, steps)?;
    let mut loss = SequenceLoss::default();
    for (_, st, target) in scores.iter().flatten() {
        loss.sse += (st.score - target) * (st.score - target);
        loss.count += 1;
    }
    Ok(loss)
}

/// Adds the gradient of the summed squared error over `steps` to `grad`.
/// `h0` is treated as a constant (truncated backpropagation).
pub fn sequence_gradient(
    params: &ParameterSet,
    h0: &Embeddings,
    steps: &[SequenceStep<'_>],
    grad: &mut ParameterSet,
) -> Result<SequenceLoss, GnnError> {
    let (rounds, scores) = sequence_forward(params, h0, steps)?;
    let d = params.config().embedding_dim;
    let mut loss = SequenceLoss::default();

    let mut gh: Vec<f64> = match rounds.last() {
        Some(r) => alloc::vec![0.0; r.graph.node_count() * d],
        None => return Ok(loss),
    };
    for t in (0..rounds.len()).rev() {
        let tr = &rounds[t];
        let step = &steps[t];
        if let Some((i, st, target)) = &scores[t] {
            let err = st.score - target;
            loss.sse += err * err;
            loss.count += 1;
            let ds = 2.0 * err;
            score_backward(params, grad, st, ds, &mut gh[i * d..(i + 1) * d]);
        }
        let dhin = round_backward(params, grad, tr, step.edge_features, step.node_features, &gh);
        if t == 0 {
            break;
        }
        let prev_n = rounds[t - 1].graph.node_count();
        gh = match &tr.prev_map {
            None => dhin,
            Some(map) => {
                let mut out = alloc::vec![0.0; prev_n * d];
                for (j, i) in map.iter().enumerate() {
                    if let Some(i) = i {
                        add_into(&mut out[i * d..(i + 1) * d], &dhin[j * d..(j + 1) * d]);
                    }
                }
                out
            }
        };
    }
    Ok(loss)
}

fn score_backward(p: &ParameterSet, grad: &mut ParameterSet, st: &ScoreTrace, ds: f64, dh: &mut [f64]) {
    let hdim = p.config().hidden_dim;
    let n_in = st.input.len();
    grad.get_mut(T::ScB2)[0] += ds;
    for (g, t) in grad.get_mut(T::ScW2).iter_mut().zip(&st.t) {
        *g += ds * t;
    }
    let da: Vec<f64> = p.get(T::ScW2).iter().zip(&st.t).map(|(w, t)| ds * w * (1.0 - t * t)).collect();
    add_into(grad.get_mut(T::ScB1), &da);
    outer_acc(grad.get_mut(T::ScW1), hdim, n_in, &da, &st.input);
    let mut dinput = alloc::vec![0.0; n_in];
    matvec_t_acc(p.get(T::ScW1), hdim, n_in, &da, &mut dinput);
    add_into(dh, &dinput[OBS_FEATURES..OBS_FEATURES + dh.len()]);
}

/// Backward through one round given `dL/dh_out`; returns `dL/dh_in`.
fn round_backward(
    p: &ParameterSet,
    grad: &mut ParameterSet,
    tr: &RoundTrace,
    ef: &[f64],
    nf: &[f64],
    gh: &[f64],
) -> Vec<f64> {
    let c = *p.config();
    let (d, h) = (c.embedding_dim, c.hidden_dim);
    let graph = &tr.graph;
    let n_nodes = graph.node_count();
    let n_vertices = nf.len() / NODE_FEATURES;

    let mut dhhat = alloc::vec![0.0; n_nodes * d];
    let mut dm = alloc::vec![0.0; n_nodes * d];
    let mut u = alloc::vec![0.0; 2 * d];
    let mut du = alloc::vec![0.0; 2 * d];
    let mut dtilde = alloc::vec![0.0; 2 * d];
    let mut dan = alloc::vec![0.0; d];
    let mut daz = alloc::vec![0.0; d];
    let mut dar = alloc::vec![0.0; d];

    // Gated update.
    for i in 0..n_nodes {
        let gi = &gh[i * d..(i + 1) * d];
        if gi.iter().all(|x| *x == 0.0) {
            continue;
        }
        let hh = &tr.hhat[i * d..(i + 1) * d];
        let zi = &tr.z[i * d..(i + 1) * d];
        let ri = &tr.r[i * d..(i + 1) * d];
        let ni = &tr.n[i * d..(i + 1) * d];
        let mi = &tr.m[i * d..(i + 1) * d];
        let dh = &mut dhhat[i * d..(i + 1) * d];
        for k in 0..d {
            let dn = gi[k] * (1.0 - zi[k]);
            dan[k] = dn * (1.0 - ni[k] * ni[k]);
            daz[k] = gi[k] * (hh[k] - ni[k]) * zi[k] * (1.0 - zi[k]);
            dh[k] += gi[k] * zi[k];
        }
        // n = tanh(W_n [r * h; m] + b_n)
        for k in 0..d {
            u[k] = ri[k] * hh[k];
        }
        u[d..].copy_from_slice(mi);
        add_into(grad.get_mut(T::GruBn), &dan);
        outer_acc(grad.get_mut(T::GruWn), d, 2 * d, &dan, &u);
        dtilde.iter_mut().for_each(|x| *x = 0.0);
        matvec_t_acc(p.get(T::GruWn), d, 2 * d, &dan, &mut dtilde);
        for k in 0..d {
            let drh = dtilde[k];
            dar[k] = drh * hh[k] * ri[k] * (1.0 - ri[k]);
            dh[k] += drh * ri[k];
        }
        // z and r see u = [h; m].
        u[..d].copy_from_slice(hh);
        add_into(grad.get_mut(T::GruBz), &daz);
        outer_acc(grad.get_mut(T::GruWz), d, 2 * d, &daz, &u);
        add_into(grad.get_mut(T::GruBr), &dar);
        outer_acc(grad.get_mut(T::GruWr), d, 2 * d, &dar, &u);
        du.iter_mut().for_each(|x| *x = 0.0);
        matvec_t_acc(p.get(T::GruWz), d, 2 * d, &daz, &mut du);
        matvec_t_acc(p.get(T::GruWr), d, 2 * d, &dar, &mut du);
        add_into(dh, &du[..d]);
        let dmi = &mut dm[i * d..(i + 1) * d];
        add_into(dmi, &du[d..]);
        add_into(dmi, &dtilde[d..]);
    }

    // Aggregate.
    let mut dp = alloc::vec![0.0; n_nodes * h];
    let mut dq = alloc::vec![0.0; n_nodes * h];
    let mut dr: Vec<Option<Vec<f64>>> = alloc::vec![None; n_vertices];
    let mut ds = alloc::vec![0.0; h];
    let mut arc = 0usize;
    for i in 0..n_nodes {
        let (nbrs, cv) = sources(graph, c.direction, i);
        if nbrs.is_empty() {
            continue;
        }
        let dmi = &dm[i * d..(i + 1) * d];
        let start = arc;
        arc += nbrs.len();
        if dmi.iter().all(|x| *x == 0.0) {
            continue;
        }
        let deg = nbrs.len() as f64;
        for (g, x) in grad.get_mut(T::AggB2).iter_mut().zip(dmi) {
            *g += deg * x;
        }
        outer_acc(grad.get_mut(T::AggW2), d, h, dmi, &tr.s[i * h..(i + 1) * h]);
        ds.iter_mut().for_each(|x| *x = 0.0);
        matvec_t_acc(p.get(T::AggW2), d, h, dmi, &mut ds);
        let drv = dr[cv.0 as usize].get_or_insert_with(|| alloc::vec![0.0; h]);
        for (a, &j) in nbrs.iter().enumerate() {
            let g = &tr.g[(start + a) * h..(start + a + 1) * h];
            for k in 0..h {
                let dag = ds[k] * (1.0 - g[k] * g[k]);
                dp[i * h + k] += dag;
                dq[j * h + k] += dag;
                drv[k] += dag;
            }
        }
    }
    for i in 0..n_nodes {
        let dpi = &dp[i * h..(i + 1) * h];
        let dqi = &dq[i * h..(i + 1) * h];
        let hh = &tr.hhat[i * d..(i + 1) * d];
        add_into(grad.get_mut(T::AggB1), dpi);
        outer_acc(grad.get_mut(T::AggWSelf), h, d, dpi, hh);
        outer_acc(grad.get_mut(T::AggWNbr), h, d, dqi, hh);
        let dh = &mut dhhat[i * d..(i + 1) * d];
        matvec_t_acc(p.get(T::AggWSelf), h, d, dpi, dh);
        matvec_t_acc(p.get(T::AggWNbr), h, d, dqi, dh);
    }
    for (v, drv) in dr.iter().enumerate() {
        if let Some(drv) = drv {
            outer_acc(grad.get_mut(T::AggWArc), h, NODE_FEATURES, drv, &nf[v * NODE_FEATURES..(v + 1) * NODE_FEATURES]);
        }
    }

    // Encode.
    let mut dhin = alloc::vec![0.0; n_nodes * d];
    let mut inp = alloc::vec![0.0; d + EDGE_FEATURES];
    let mut da2 = alloc::vec![0.0; d];
    let mut da1 = alloc::vec![0.0; h];
    let mut dinp = alloc::vec![0.0; d + EDGE_FEATURES];
    for i in 0..n_nodes {
        let dh = &dhhat[i * d..(i + 1) * d];
        if dh.iter().all(|x| *x == 0.0) {
            continue;
        }
        let hh = &tr.hhat[i * d..(i + 1) * d];
        let t1 = &tr.t1[i * h..(i + 1) * h];
        for k in 0..d {
            da2[k] = dh[k] * (1.0 - hh[k] * hh[k]);
        }
        add_into(grad.get_mut(T::EncB2), &da2);
        outer_acc(grad.get_mut(T::EncW2), d, h, &da2, t1);
        da1.iter_mut().for_each(|x| *x = 0.0);
        matvec_t_acc(p.get(T::EncW2), d, h, &da2, &mut da1);
        for k in 0..h {
            da1[k] *= 1.0 - t1[k] * t1[k];
        }
        inp[..d].copy_from_slice(&tr.hin[i * d..(i + 1) * d]);
        inp[d..].copy_from_slice(&ef[i * EDGE_FEATURES..(i + 1) * EDGE_FEATURES]);
        add_into(grad.get_mut(T::EncB1), &da1);
        outer_acc(grad.get_mut(T::EncW1), h, d + EDGE_FEATURES, &da1, &inp);
        dinp.iter_mut().for_each(|x| *x = 0.0);
        matvec_t_acc(p.get(T::EncW1), h, d + EDGE_FEATURES, &da1, &mut dinp);
        dhin[i * d..(i + 1) * d].copy_from_slice(&dinp[..d]);
    }
    dhin
}
