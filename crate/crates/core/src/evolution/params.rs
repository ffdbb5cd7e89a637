use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::OutputLayout;

/// Closed interval used for uniform initialisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub const fn new(low: f64, high: f64) -> Self {
        Interval { low, high }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

/// Evolutionary algorithm settings. Defaults are the common parameters of
/// the original experiments; `max_hidden`, `max_generations` and
/// `alpha2_init` are set per configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EAParams {
    pub population_size: usize,
    pub max_generations: usize,
    pub max_hidden: usize,
    pub weight_init_range: Interval,
    pub coeff_init_range: Interval,
    pub parametric_fraction: f64,
    pub structural_fraction: f64,
    pub alpha1_init: f64,
    pub alpha2_init: f64,
    pub input_link_mutation_pct: f64,
    pub output_link_mutation_pct: f64,
    pub nodes_per_structural_op: CountRange,
    /// Generations between 1/5-rule updates.
    pub one_fifth_window: usize,
    pub one_fifth_factor: f64,
    pub output_layout: OutputLayout,
}

impl Default for EAParams {
    fn default() -> Self {
        EAParams {
            population_size: 1000,
            max_generations: 100,
            max_hidden: 2,
            weight_init_range: Interval::new(-5.0, 5.0),
            coeff_init_range: Interval::new(-5.0, 5.0),
            parametric_fraction: 0.10,
            structural_fraction: 0.90,
            alpha1_init: 0.5,
            alpha2_init: 1.0,
            input_link_mutation_pct: 0.30,
            output_link_mutation_pct: 0.05,
            nodes_per_structural_op: CountRange { min: 1, max: 2 },
            one_fifth_window: 10,
            one_fifth_factor: 0.85,
            output_layout: OutputLayout::ReferenceClass,
        }
    }
}

impl EAParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Precondition(m));
        if self.population_size < 10 {
            return fail(format!("population_size {} < 10", self.population_size));
        }
        if self.max_hidden < 1 {
            return fail("max_hidden must be >= 1".into());
        }
        for (name, r) in [
            ("weight_init_range", self.weight_init_range),
            ("coeff_init_range", self.coeff_init_range),
        ] {
            if !(r.low < r.high) || !r.low.is_finite() || !r.high.is_finite() {
                return fail(format!("{name} [{}, {}] is degenerate", r.low, r.high));
            }
        }
        let fractions = self.parametric_fraction + self.structural_fraction;
        if (fractions - 1.0).abs() > 1e-9 || !(self.parametric_fraction > 0.0 && self.parametric_fraction < 1.0) {
            return fail(format!(
                "parametric ({}) and structural ({}) fractions must be in (0,1) and sum to 1",
                self.parametric_fraction, self.structural_fraction
            ));
        }
        if !(self.alpha1_init > 0.0 && self.alpha2_init > 0.0) {
            return fail("initial alphas must be positive".into());
        }
        for (name, p) in [
            ("input_link_mutation_pct", self.input_link_mutation_pct),
            ("output_link_mutation_pct", self.output_link_mutation_pct),
        ] {
            if !(p > 0.0 && p <= 1.0) {
                return fail(format!("{name} {p} outside (0, 1]"));
            }
        }
        let nodes = self.nodes_per_structural_op;
        if nodes.min < 1 || nodes.min > nodes.max {
            return fail(format!(
                "nodes_per_structural_op [{}, {}] invalid",
                nodes.min, nodes.max
            ));
        }
        if self.one_fifth_window < 1 {
            return fail("one_fifth_window must be >= 1".into());
        }
        if !(self.one_fifth_factor > 0.0 && self.one_fifth_factor < 1.0) {
            return fail(format!("one_fifth_factor {} outside (0, 1)", self.one_fifth_factor));
        }
        Ok(())
    }

    /// Size of the elite that is replicated and parametrically mutated.
    pub fn elite_count(&self) -> usize {
        ((self.parametric_fraction * self.population_size as f64).round() as usize).clamp(1, self.population_size / 2)
    }
}
