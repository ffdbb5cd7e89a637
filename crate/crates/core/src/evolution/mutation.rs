//! Random network construction and the mutation operators.

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::params::{EAParams, Interval};
use crate::data::Partition;
use crate::error::Result;
use crate::network::{HiddenNode, Individual, OutputNode, PUNetwork};
use crate::rng::Rng;

fn uniform(rng: &mut Rng, range: Interval) -> f64 {
    rng.random_range(range.low..range.high)
}

/// A hidden node on a random non-empty subset of inputs (each input kept
/// with probability 1/2, redrawn while empty).
fn random_hidden_node(n_inputs: usize, range: Interval, rng: &mut Rng) -> HiddenNode {
    loop {
        let inputs: Vec<(usize, f64)> = (0..n_inputs)
            .filter_map(|i| rng.random_bool(0.5).then(|| (i, uniform(rng, range))))
            .collect();
        if !inputs.is_empty() {
            return HiddenNode { inputs };
        }
    }
}

/// Random network with a hidden layer size drawn uniformly from
/// `[1, max_hidden]`.
pub fn random_network(n_inputs: usize, n_classes: usize, params: &EAParams, rng: &mut Rng) -> PUNetwork {
    let n_hidden = rng.random_range(1..=params.max_hidden);
    let hidden = (0..n_hidden)
        .map(|_| random_hidden_node(n_inputs, params.weight_init_range, rng))
        .collect();
    let outputs = (0..params.output_layout.output_count(n_classes))
        .map(|_| OutputNode {
            bias: uniform(rng, params.coeff_init_range),
            hidden: (0..n_hidden)
                .filter_map(|m| rng.random_bool(0.5).then(|| (m, uniform(rng, params.coeff_init_range))))
                .collect(),
        })
        .collect();
    PUNetwork::from_parts_unchecked(n_inputs, n_classes, params.output_layout, hidden, outputs)
}

/// Rechenberg's 1/5 success rule: widen the step when more than a fifth
/// of the mutations succeeded, narrow it when fewer did.
pub fn update_variance_one_fifth(success_ratio: f64, alpha: f64, factor: f64) -> f64 {
    const TARGET: f64 = 0.2;
    if success_ratio > TARGET {
        alpha / factor
    } else if success_ratio < TARGET {
        alpha * factor
    } else {
        alpha
    }
}

fn mutation_count(total: usize, fraction: f64) -> usize {
    ((fraction * total as f64).round() as usize)
        .clamp(1, total.max(1))
        .min(total)
}

/// Adds `N(0, sd)` noise to a random `fraction` of the input-to-hidden
/// exponents. Links are chosen with `index::sample`, sorted, then one
/// normal deviate is drawn per chosen link in order.
pub fn perturb_exponents(net: &PUNetwork, fraction: f64, sd: f64, rng: &mut Rng) -> PUNetwork {
    let mut out = net.clone();
    if sd == 0.0 {
        return out;
    }
    let mut slots: Vec<&mut f64> = out
        .hidden_mut()
        .iter_mut()
        .flat_map(|h| h.inputs.iter_mut().map(|(_, w)| w))
        .collect();
    perturb_slots(&mut slots, fraction, sd, rng);
    out
}

/// As [`perturb_exponents`] for output coefficients. Each output node
/// contributes its bias followed by its hidden links.
pub fn perturb_coefficients(net: &PUNetwork, fraction: f64, sd: f64, rng: &mut Rng) -> PUNetwork {
    let mut out = net.clone();
    if sd == 0.0 {
        return out;
    }
    let mut slots: Vec<&mut f64> = out
        .outputs_mut()
        .iter_mut()
        .flat_map(|o| std::iter::once(&mut o.bias).chain(o.hidden.iter_mut().map(|(_, b)| b)))
        .collect();
    perturb_slots(&mut slots, fraction, sd, rng);
    out
}

fn perturb_slots(slots: &mut [&mut f64], fraction: f64, sd: f64, rng: &mut Rng) {
    if slots.is_empty() {
        return;
    }
    let amount = mutation_count(slots.len(), fraction);
    let mut chosen = index::sample(rng, slots.len(), amount).into_vec();
    chosen.sort_unstable();
    let noise = Normal::new(0.0, sd).expect("finite positive sd");
    for i in chosen {
        *slots[i] += noise.sample(rng);
    }
}

#[derive(Debug, Clone)]
pub struct ParametricOutcome {
    pub individual: Individual,
    /// The exponent step was accepted with a strict fitness gain.
    pub exponent_success: bool,
    /// The coefficient step was accepted with a strict fitness gain.
    pub coefficient_success: bool,
}

impl ParametricOutcome {
    pub fn success(&self) -> bool {
        self.exponent_success || self.coefficient_success
    }
}

/// Temperature-scaled Gaussian mutation with non-worsening acceptance.
///
/// Exponents are perturbed with standard deviation `alpha1 * T(R)` and the
/// step is kept only if fitness does not drop; coefficients are then
/// perturbed with `alpha2 * T(R)` under the same rule. `T(R)` is the
/// temperature of the incoming individual. Each step reports its own
/// success so the two variances adapt independently.
pub fn parametric_mutation(
    ind: &Individual,
    alpha1: f64,
    alpha2: f64,
    params: &EAParams,
    train: &Partition,
    rng: &mut Rng,
) -> Result<ParametricOutcome> {
    let t = ind.temperature();
    let mut current = ind.clone();
    if t == 0.0 {
        return Ok(ParametricOutcome {
            individual: current,
            exponent_success: false,
            coefficient_success: false,
        });
    }

    let candidate = perturb_exponents(current.network(), params.input_link_mutation_pct, alpha1 * t, rng);
    let candidate = Individual::evaluate(candidate, train)?;
    let exponent_success = candidate.fitness() > current.fitness();
    if candidate.fitness() >= current.fitness() {
        current = candidate;
    }

    let candidate = perturb_coefficients(current.network(), params.output_link_mutation_pct, alpha2 * t, rng);
    let candidate = Individual::evaluate(candidate, train)?;
    let coefficient_success = candidate.fitness() > current.fitness();
    if candidate.fitness() >= current.fitness() {
        current = candidate;
    }

    Ok(ParametricOutcome {
        individual: current,
        exponent_success,
        coefficient_success,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructuralOp {
    AddNode,
    DeleteNode,
    AddConnection,
    DeleteConnection,
}

impl StructuralOp {
    pub const ORDER: [StructuralOp; 4] = [
        StructuralOp::AddNode,
        StructuralOp::DeleteNode,
        StructuralOp::AddConnection,
        StructuralOp::DeleteConnection,
    ];
}

#[derive(Debug, Clone)]
pub struct StructuralOutcome {
    pub individual: Individual,
    /// Operators selected this time, in [`StructuralOp::ORDER`].
    pub fired: [bool; 4],
    /// Operators that actually changed the network.
    pub applied: [bool; 4],
}

/// Applies node addition, node deletion, connection addition and
/// connection deletion in that order, each with probability `T(R)`. If
/// none is selected one is picked uniformly. Infeasible operators are
/// skipped.
pub fn structural_mutation(
    ind: &Individual,
    params: &EAParams,
    train: &Partition,
    rng: &mut Rng,
) -> Result<StructuralOutcome> {
    let t = ind.temperature();
    let mut net = ind.network().clone();
    let mut fired = [false; 4];
    for f in &mut fired {
        *f = rng.random::<f64>() < t;
    }
    if !fired.iter().any(|&f| f) {
        fired[rng.random_range(0..4)] = true;
    }
    let mut applied = [false; 4];
    for (k, op) in StructuralOp::ORDER.iter().enumerate() {
        if fired[k] {
            applied[k] = apply_structural(&mut net, *op, params, rng);
        }
    }
    debug_assert!(net.validate(Some(params.max_hidden)).is_ok());
    Ok(StructuralOutcome {
        individual: Individual::evaluate(net, train)?,
        fired,
        applied,
    })
}

/// Applies one structural operator in place; returns whether the network
/// changed.
pub fn apply_structural(net: &mut PUNetwork, op: StructuralOp, params: &EAParams, rng: &mut Rng) -> bool {
    let range = params.nodes_per_structural_op;
    match op {
        StructuralOp::AddNode => {
            let count = rng.random_range(range.min..=range.max);
            add_nodes(net, count, params, rng)
        }
        StructuralOp::DeleteNode => {
            let count = rng.random_range(range.min..=range.max);
            delete_nodes(net, count, rng)
        }
        StructuralOp::AddConnection => add_connection(net, params, rng),
        StructuralOp::DeleteConnection => delete_connection(net, rng),
    }
}

pub fn add_nodes(net: &mut PUNetwork, count: usize, params: &EAParams, rng: &mut Rng) -> bool {
    let room = params.max_hidden.saturating_sub(net.hidden_count());
    let count = count.min(room);
    if count == 0 {
        return false;
    }
    let n_inputs = net.n_inputs();
    for _ in 0..count {
        let m = net.hidden_count();
        let node = random_hidden_node(n_inputs, params.weight_init_range, rng);
        net.hidden_mut().push(node);
        for out in net.outputs_mut() {
            if rng.random_bool(0.5) {
                out.hidden.push((m, uniform(rng, params.coeff_init_range)));
            }
        }
    }
    true
}

pub fn delete_nodes(net: &mut PUNetwork, count: usize, rng: &mut Rng) -> bool {
    let n = net.hidden_count();
    let count = count.min(n.saturating_sub(1));
    if count == 0 {
        return false;
    }
    let mut doomed = index::sample(rng, n, count).into_vec();
    doomed.sort_unstable();
    // old index -> new index
    let mut remap = vec![None; n];
    let mut next = 0;
    for (m, slot) in remap.iter_mut().enumerate() {
        if doomed.binary_search(&m).is_err() {
            *slot = Some(next);
            next += 1;
        }
    }
    let mut m = 0;
    net.hidden_mut().retain(|_| {
        let keep = remap[m].is_some();
        m += 1;
        keep
    });
    for out in net.outputs_mut() {
        out.hidden = out
            .hidden
            .iter()
            .filter_map(|&(m, b)| remap[m].map(|nm| (nm, b)))
            .collect();
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Link {
    /// (hidden node, input)
    Input(usize, usize),
    /// (output node, hidden node)
    Output(usize, usize),
}

fn insert_sorted(links: &mut Vec<(usize, f64)>, idx: usize, w: f64) {
    let pos = links.partition_point(|&(i, _)| i < idx);
    links.insert(pos, (idx, w));
}

/// Adds one link chosen uniformly among all absent input-to-hidden and
/// hidden-to-output links.
pub fn add_connection(net: &mut PUNetwork, params: &EAParams, rng: &mut Rng) -> bool {
    let mut absent = Vec::new();
    for (m, node) in net.hidden().iter().enumerate() {
        let mut present = node.inputs.iter().map(|&(i, _)| i).peekable();
        for i in 0..net.n_inputs() {
            if present.peek() == Some(&i) {
                present.next();
            } else {
                absent.push(Link::Input(m, i));
            }
        }
    }
    for (j, node) in net.outputs().iter().enumerate() {
        let mut present = node.hidden.iter().map(|&(m, _)| m).peekable();
        for m in 0..net.hidden_count() {
            if present.peek() == Some(&m) {
                present.next();
            } else {
                absent.push(Link::Output(j, m));
            }
        }
    }
    if absent.is_empty() {
        return false;
    }
    match absent[rng.random_range(0..absent.len())] {
        Link::Input(m, i) => {
            let w = uniform(rng, params.weight_init_range);
            insert_sorted(&mut net.hidden_mut()[m].inputs, i, w);
        }
        Link::Output(j, m) => {
            let b = uniform(rng, params.coeff_init_range);
            insert_sorted(&mut net.outputs_mut()[j].hidden, m, b);
        }
    }
    true
}

/// Removes one link chosen uniformly among those whose removal leaves
/// every hidden node with at least one input.
pub fn delete_connection(net: &mut PUNetwork, rng: &mut Rng) -> bool {
    let mut candidates = Vec::new();
    for (m, node) in net.hidden().iter().enumerate() {
        if node.inputs.len() >= 2 {
            candidates.extend((0..node.inputs.len()).map(|k| Link::Input(m, k)));
        }
    }
    for (j, node) in net.outputs().iter().enumerate() {
        candidates.extend((0..node.hidden.len()).map(|k| Link::Output(j, k)));
    }
    if candidates.is_empty() {
        return false;
    }
    match candidates[rng.random_range(0..candidates.len())] {
        Link::Input(m, k) => {
            net.hidden_mut()[m].inputs.remove(k);
        }
        Link::Output(j, k) => {
            net.outputs_mut()[j].hidden.remove(k);
        }
    }
    true
}
