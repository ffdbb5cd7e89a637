//! Product-unit network model: representation, forward pass, and the
//! error, fitness and classification-rate measures built on top of it.
//!
//! A network has one hidden layer of product units
//! `h_m(x) = prod_i x_i^{w_mi}` and a linear output layer
//! `f_j(x) = beta_0j + sum_m beta_mj * h_m(x)` fed to a softmax. In the
//! default [`OutputLayout::ReferenceClass`] layout only `l - 1` outputs are
//! modelled and the last class has `f_l = 0`.

use serde::{Deserialize, Serialize};

use crate::data::Partition;
use crate::error::{Error, Result};

/// Sparse list of `(source index, weight)` pairs kept sorted by index.
pub type Links = Vec<(usize, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputLayout {
    /// `l - 1` output nodes, the last class is fixed at `f_l = 0`.
    #[default]
    ReferenceClass,
    /// One output node per class.
    AllClasses,
}

impl OutputLayout {
    pub fn output_count(self, n_classes: usize) -> usize {
        match self {
            OutputLayout::ReferenceClass => n_classes - 1,
            OutputLayout::AllClasses => n_classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenNode {
    /// Input index to exponent.
    pub inputs: Links,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputNode {
    pub bias: f64,
    /// Hidden index to coefficient.
    pub hidden: Links,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PUNetwork {
    n_inputs: usize,
    n_classes: usize,
    layout: OutputLayout,
    hidden: Vec<HiddenNode>,
    outputs: Vec<OutputNode>,
}

impl PUNetwork {
    /// Builds a network and checks every structural invariant.
    pub fn new(
        n_inputs: usize,
        n_classes: usize,
        layout: OutputLayout,
        hidden: Vec<HiddenNode>,
        mut outputs: Vec<OutputNode>,
    ) -> Result<Self> {
        let mut hidden = hidden;
        for node in &mut hidden {
            node.inputs.sort_by_key(|&(i, _)| i);
        }
        for node in &mut outputs {
            node.hidden.sort_by_key(|&(i, _)| i);
        }
        let net = PUNetwork {
            n_inputs,
            n_classes,
            layout,
            hidden,
            outputs,
        };
        net.validate(None)?;
        Ok(net)
    }

    /// Constructor for code that maintains the invariants itself (the
    /// mutation operators). Checked in debug builds.
    pub(crate) fn from_parts_unchecked(
        n_inputs: usize,
        n_classes: usize,
        layout: OutputLayout,
        hidden: Vec<HiddenNode>,
        outputs: Vec<OutputNode>,
    ) -> Self {
        let net = PUNetwork {
            n_inputs,
            n_classes,
            layout,
            hidden,
            outputs,
        };
        debug_assert!(net.validate(None).is_ok(), "{:?}", net.validate(None));
        net
    }

    /// Checks the network invariants; `max_hidden` additionally bounds the
    /// hidden layer size.
    pub fn validate(&self, max_hidden: Option<usize>) -> Result<()> {
        let bad = |msg: String| Err(Error::Precondition(msg));
        if self.n_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.n_classes));
        }
        if self.n_inputs == 0 {
            return bad("network has no inputs".into());
        }
        if self.hidden.is_empty() {
            return bad("network has no hidden nodes".into());
        }
        if let Some(max) = max_hidden {
            if self.hidden.len() > max {
                return bad(format!("{} hidden nodes exceeds maximum {max}", self.hidden.len()));
            }
        }
        let expected = self.layout.output_count(self.n_classes);
        if self.outputs.len() != expected {
            return bad(format!(
                "expected {expected} output nodes for {} classes, got {}",
                self.n_classes,
                self.outputs.len()
            ));
        }
        for (m, node) in self.hidden.iter().enumerate() {
            if node.inputs.is_empty() {
                return bad(format!("hidden node {m} has no input links"));
            }
            check_links(&node.inputs, self.n_inputs, || format!("hidden node {m}"))?;
        }
        for (j, node) in self.outputs.iter().enumerate() {
            if !node.bias.is_finite() {
                return bad(format!("output node {j} has non-finite bias"));
            }
            check_links(&node.hidden, self.hidden.len(), || format!("output node {j}"))?;
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn layout(&self) -> OutputLayout {
        self.layout
    }

    pub fn hidden(&self) -> &[HiddenNode] {
        &self.hidden
    }

    pub fn outputs(&self) -> &[OutputNode] {
        &self.outputs
    }

    pub(crate) fn hidden_mut(&mut self) -> &mut Vec<HiddenNode> {
        &mut self.hidden
    }

    pub(crate) fn outputs_mut(&mut self) -> &mut Vec<OutputNode> {
        &mut self.outputs
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden.len()
    }

    /// Input-to-hidden links plus hidden-to-output links plus one bias per
    /// output node.
    pub fn count_connections(&self) -> usize {
        let input_links: usize = self.hidden.iter().map(|h| h.inputs.len()).sum();
        let output_links: usize = self.outputs.iter().map(|o| o.hidden.len()).sum();
        input_links + output_links + self.outputs.len()
    }

    /// `inputs:hidden:outputs`, e.g. `9:2:1`.
    pub fn topology(&self) -> String {
        format!("{}:{}:{}", self.n_inputs, self.hidden.len(), self.outputs.len())
    }

    /// Product-unit activations evaluated directly with `powf`.
    pub fn hidden_outputs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self
            .hidden
            .iter()
            .map(|node| node.inputs.iter().map(|&(i, w)| x[i].powf(w)).product())
            .collect())
    }

    /// Output-layer values `f_1..f_l` before the softmax.
    pub fn raw_outputs(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h = self.hidden_outputs(x)?;
        let mut f = vec![0.0; self.n_classes];
        for (fj, node) in f.iter_mut().zip(&self.outputs) {
            *fj = node.bias + node.hidden.iter().map(|&(m, b)| b * h[m]).sum::<f64>();
        }
        Ok(f)
    }

    /// Class probabilities for a single pattern.
    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.raw_outputs(x)?))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.raw_outputs(x)?))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs {
            return Err(Error::precondition(format!(
                "pattern has {} features, network expects {}",
                x.len(),
                self.n_inputs
            )));
        }
        match x.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            Some((index, &value)) => Err(Error::Domain { index, value }),
            None => Ok(()),
        }
    }

    /// Forward pass from log-features: `h_m = exp(sum_i w_mi ln x_i)`.
    /// `f` must have length `n_classes`.
    #[inline]
    fn outputs_from_log(&self, ln_x: &[f64], h: &mut [f64], f: &mut [f64]) {
        for (hm, node) in h.iter_mut().zip(&self.hidden) {
            let s: f64 = node.inputs.iter().map(|&(i, w)| w * ln_x[i]).sum();
            *hm = s.exp();
        }
        f.fill(0.0);
        for (fj, node) in f.iter_mut().zip(&self.outputs) {
            *fj = node.bias + node.hidden.iter().map(|&(m, b)| b * h[m]).sum::<f64>();
        }
    }

    /// Mean cross-entropy and hit count over a partition in a single pass.
    pub fn evaluate(&self, part: &Partition) -> Result<Evaluation> {
        if part.is_empty() {
            return Err(Error::precondition("cannot evaluate on an empty partition"));
        }
        self.check_partition(part)?;
        let l = self.n_classes;
        let mut h = vec![0.0; self.hidden.len()];
        let mut f = vec![0.0; l];
        let mut loss = 0.0;
        let mut correct = 0;
        for i in 0..part.len() {
            self.outputs_from_log(part.log_row(i), &mut h, &mut f);
            let y = part.target_row(i);
            let fit: f64 = y.iter().zip(&f).map(|(yj, fj)| yj * fj).sum();
            loss += log_sum_exp(&f) - fit;
            if argmax(&f) == part.label(i) {
                correct += 1;
            }
        }
        Ok(Evaluation {
            loss: loss / part.len() as f64,
            correct,
            n: part.len(),
        })
    }

    fn check_partition(&self, part: &Partition) -> Result<()> {
        if part.n_inputs() != self.n_inputs || part.n_classes() != self.n_classes {
            return Err(Error::precondition(format!(
                "partition is {}x{} (inputs x classes), network is {}x{}",
                part.n_inputs(),
                part.n_classes(),
                self.n_inputs,
                self.n_classes
            )));
        }
        Ok(())
    }
}

fn check_links(links: &Links, bound: usize, owner: impl Fn() -> String) -> Result<()> {
    let mut prev: Option<usize> = None;
    for &(idx, w) in links {
        if idx >= bound {
            return Err(Error::Precondition(format!("{}: link index {idx} >= {bound}", owner())));
        }
        if prev.is_some_and(|p| p >= idx) {
            return Err(Error::Precondition(format!(
                "{}: duplicate or unsorted link {idx}",
                owner()
            )));
        }
        if !w.is_finite() {
            return Err(Error::Precondition(format!(
                "{}: non-finite weight on link {idx}",
                owner()
            )));
        }
        prev = Some(idx);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Mean cross-entropy.
    pub loss: f64,
    pub correct: usize,
    pub n: usize,
}

impl Evaluation {
    pub fn ccr(&self) -> f64 {
        100.0 * self.correct as f64 / self.n as f64
    }
}

/// Softmax with max subtraction.
pub fn softmax(f: &[f64]) -> Vec<f64> {
    let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = f.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_sum_exp(f: &[f64]) -> f64 {
    let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + f.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = j;
        }
    }
    best
}

/// Mean cross-entropy `l(R)` over a partition, in log-sum-exp form.
pub fn cross_entropy(net: &PUNetwork, part: &Partition) -> Result<f64> {
    Ok(net.evaluate(part)?.loss)
}

/// Correct classification rate in percent.
pub fn ccr(net: &PUNetwork, part: &Partition) -> Result<f64> {
    Ok(net.evaluate(part)?.ccr())
}

/// `A(R) = 1 / (1 + l(R))`.
pub fn fitness(error: f64) -> Result<f64> {
    if error.is_nan() || error < 0.0 {
        return Err(Error::precondition(format!("error must be >= 0, got {error}")));
    }
    Ok(1.0 / (1.0 + error))
}

/// `T(R) = 1 - A(R)`.
pub fn temperature(fitness: f64) -> f64 {
    (1.0 - fitness).clamp(0.0, 1.0)
}

/// A network together with its cached training error and fitness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    network: PUNetwork,
    error: f64,
    fitness: f64,
}

impl Individual {
    /// Scores `network` on `train`. A forward pass that overflows is given
    /// the largest finite error, so its fitness stays in `(0, 1]`.
    pub fn evaluate(network: PUNetwork, train: &Partition) -> Result<Self> {
        let loss = network.evaluate(train)?.loss;
        let error = if loss.is_finite() { loss.max(0.0) } else { f64::MAX };
        let fitness = fitness(error)?;
        Ok(Individual {
            network,
            error,
            fitness,
        })
    }

    pub fn network(&self) -> &PUNetwork {
        &self.network
    }

    pub fn into_network(self) -> PUNetwork {
        self.network
    }

    pub fn error(&self) -> f64 {
        self.error
    }

    pub fn fitness(&self) -> f64 {
        self.fitness
    }

    pub fn temperature(&self) -> f64 {
        temperature(self.fitness)
    }
}
