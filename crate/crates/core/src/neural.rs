//! Forward semantics of the modular executor: Gumbel-Softmax selection over
//! tagged libraries, key-query slot argument selection, and gated sequential
//! updates of a vector working memory.
//!
//! Everything here is inference-time numerics over pluggable module
//! functions; there are no parameters to train. The engineered encoding at
//! the bottom makes the hard-selection path provably equal to the symbolic
//! executor for position conditions, which is what the equivalence suite
//! checks. Cross-slot conditions (max/min) need context mixing before
//! selection; callers can pre-transform their [`SlotSet`] to supply it, no
//! such transform ships here.

use crate::dsl::{Condition, Operation, Program};
use crate::exec::apply_operation;
use crate::rng::PrngStream;
use crate::scene::Scene;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("non-finite entry in input vector")]
    NonFinite,
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
    #[error("dimension mismatch: expected width {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{kind} index {index} out of range (size {len})")]
    IndexOutOfRange { kind: &'static str, index: usize, len: usize },
    #[error("condition `{}` is not expressible as a single-slot dot product", .0.name())]
    UnsupportedCondition(Condition),
    #[error("slot set must be non-empty with equal-width finite rows")]
    BadSlotSet,
    #[error("gates must lie in [0,1], got {0}")]
    BadGate(f64),
    #[error("template shape invalid: {0} gates, {1} condition indices, {2} module indices")]
    BadTemplateShape(usize, usize, usize),
}

/// Numerically stable softmax: positive entries summing to 1.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>, NeuralError> {
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return Err(NeuralError::NonFinite);
    }
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.iter().map(|e| e / sum).collect())
}

/// Standard Gumbel noise from a uniform draw.
///
/// The draw is clamped to at least 2^-53 so the doubly-logarithmic map stays
/// finite on the stream's half-open unit interval.
fn gumbel_from_uniform(u: f64) -> f64 {
    let u = u.max(2f64.powi(-53));
    -(-u.ln()).ln()
}

/// Gumbel-Softmax with caller-supplied uniforms, one per logit.
///
/// Soft mode returns `softmax((logits + g) / tau)`; hard mode returns a
/// one-hot at `argmax(logits + g)` (ties break at the lowest index), which
/// is temperature-independent by the Gumbel-max property.
pub fn gumbel_softmax_with_noise(
    logits: &[f64],
    tau: f64,
    hard: bool,
    uniforms: &[f64],
) -> Result<Vec<f64>, NeuralError> {
    if tau <= 0.0 || !tau.is_finite() {
        return Err(NeuralError::BadTemperature(tau));
    }
    if uniforms.len() != logits.len() {
        return Err(NeuralError::DimensionMismatch {
            expected: logits.len(),
            got: uniforms.len(),
        });
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(NeuralError::NonFinite);
    }
    let noised: Vec<f64> =
        logits.iter().zip(uniforms).map(|(l, &u)| l + gumbel_from_uniform(u)).collect();
    if hard {
        let mut best = 0;
        for (i, &x) in noised.iter().enumerate() {
            if x > noised[best] {
                best = i;
            }
        }
        let mut one_hot = vec![0.0; noised.len()];
        one_hot[best] = 1.0;
        Ok(one_hot)
    } else {
        softmax(&noised.iter().map(|x| x / tau).collect::<Vec<_>>())
    }
}

/// Gumbel-Softmax drawing its uniforms from `rng`, one per logit in order.
pub fn gumbel_softmax(
    logits: &[f64],
    tau: f64,
    hard: bool,
    rng: &mut PrngStream,
) -> Result<Vec<f64>, NeuralError> {
    let uniforms: Vec<f64> = logits.iter().map(|_| rng.next_f64()).collect();
    gumbel_softmax_with_noise(logits, tau, hard, &uniforms)
}

/// A non-empty set of equal-width finite vectors (slot encodings or tags).
#[derive(Debug, Clone, PartialEq)]
pub struct SlotSet {
    rows: Vec<Vec<f64>>,
}

impl SlotSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, NeuralError> {
        let width = match rows.first() {
            Some(r) if !r.is_empty() => r.len(),
            _ => return Err(NeuralError::BadSlotSet),
        };
        for r in &rows {
            if r.len() != width || r.iter().any(|x| !x.is_finite()) {
                return Err(NeuralError::BadSlotSet);
            }
        }
        Ok(SlotSet { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn weighted_row_sum(weights: &[f64], rows: &[Vec<f64>]) -> Vec<f64> {
    let width = rows[0].len();
    let mut out = vec![0.0; width];
    for (w, row) in weights.iter().zip(rows) {
        for (o, x) in out.iter_mut().zip(row) {
            *o += w * x;
        }
    }
    out
}

/// Scaled dot-product selection of a slot argument.
///
/// Logits are `query . key_i / sqrt(d)`; the returned vector is the
/// Gumbel-Softmax-weighted sum of value rows (exactly one row in hard mode).
pub fn attend_select(
    query: &[f64],
    keys: &SlotSet,
    values: &SlotSet,
    tau: f64,
    hard: bool,
    rng: &mut PrngStream,
) -> Result<Vec<f64>, NeuralError> {
    if query.len() != keys.width() {
        return Err(NeuralError::DimensionMismatch { expected: keys.width(), got: query.len() });
    }
    if values.len() != keys.len() {
        return Err(NeuralError::DimensionMismatch { expected: keys.len(), got: values.len() });
    }
    if query.iter().any(|x| !x.is_finite()) {
        return Err(NeuralError::NonFinite);
    }
    let scale = (keys.width() as f64).sqrt();
    let logits: Vec<f64> = keys.rows().iter().map(|k| dot(query, k) / scale).collect();
    let weights = gumbel_softmax(&logits, tau, hard, rng)?;
    Ok(weighted_row_sum(&weights, values.rows()))
}

/// An affine query projection (the MLP stand-in), `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl AffineMap {
    pub fn new(weight: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self, NeuralError> {
        if weight.is_empty() || weight.len() != bias.len() {
            return Err(NeuralError::BadSlotSet);
        }
        let in_width = weight[0].len();
        if weight.iter().any(|r| r.len() != in_width) {
            return Err(NeuralError::BadSlotSet);
        }
        Ok(AffineMap { weight, bias })
    }

    pub fn identity(width: usize) -> Self {
        let weight = (0..width)
            .map(|i| (0..width).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        AffineMap { weight, bias: vec![0.0; width] }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        if x.len() != self.weight[0].len() {
            return Err(NeuralError::DimensionMismatch {
                expected: self.weight[0].len(),
                got: x.len(),
            });
        }
        Ok(self
            .weight
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| dot(row, x) + b)
            .collect())
    }
}

/// Learned-tag stand-ins: module tags `M`, condition tags `C` and condition
/// vectors `c` (the values returned by condition selection).
#[derive(Debug, Clone, PartialEq)]
pub struct TagLibrary {
    module_tags: SlotSet,
    condition_tags: SlotSet,
    condition_vectors: SlotSet,
}

impl TagLibrary {
    pub fn new(
        module_tags: Vec<Vec<f64>>,
        condition_tags: Vec<Vec<f64>>,
        condition_vectors: Vec<Vec<f64>>,
    ) -> Result<Self, NeuralError> {
        let condition_tags = SlotSet::new(condition_tags)?;
        let condition_vectors = SlotSet::new(condition_vectors)?;
        if condition_vectors.len() != condition_tags.len() {
            return Err(NeuralError::DimensionMismatch {
                expected: condition_tags.len(),
                got: condition_vectors.len(),
            });
        }
        Ok(TagLibrary {
            module_tags: SlotSet::new(module_tags)?,
            condition_tags,
            condition_vectors,
        })
    }

    pub fn num_modules(&self) -> usize {
        self.module_tags.len()
    }

    pub fn num_conditions(&self) -> usize {
        self.condition_tags.len()
    }

    pub fn condition_vector(&self, index: usize) -> &[f64] {
        &self.condition_vectors.rows()[index]
    }
}

/// Module selection weights `W_m = GumbelSoftmax(Q_r(z) . M^T / sqrt(d))`.
pub fn select_module(
    task_embedding: &[f64],
    library: &TagLibrary,
    query_proj: &AffineMap,
    tau: f64,
    hard: bool,
    rng: &mut PrngStream,
) -> Result<Vec<f64>, NeuralError> {
    select_weights(task_embedding, &library.module_tags, query_proj, tau, hard, rng)
}

/// Condition selection: same kernel as [`select_module`] over condition
/// tags, returning the weighted sum of condition vectors.
pub fn select_condition(
    task_embedding: &[f64],
    library: &TagLibrary,
    query_proj: &AffineMap,
    tau: f64,
    hard: bool,
    rng: &mut PrngStream,
) -> Result<Vec<f64>, NeuralError> {
    let weights =
        select_weights(task_embedding, &library.condition_tags, query_proj, tau, hard, rng)?;
    Ok(weighted_row_sum(&weights, library.condition_vectors.rows()))
}

fn select_weights(
    task_embedding: &[f64],
    tags: &SlotSet,
    query_proj: &AffineMap,
    tau: f64,
    hard: bool,
    rng: &mut PrngStream,
) -> Result<Vec<f64>, NeuralError> {
    let query = query_proj.apply(task_embedding)?;
    if query.len() != tags.width() {
        return Err(NeuralError::DimensionMismatch { expected: tags.width(), got: query.len() });
    }
    let scale = (tags.width() as f64).sqrt();
    let logits: Vec<f64> = tags.rows().iter().map(|t| dot(&query, t) / scale).collect();
    gumbel_softmax(&logits, tau, hard, rng)
}

/// A module: transforms the working memory given a selected slot argument.
pub type ModuleFn = Box<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Soft module application: the selection-weighted sum of member outputs.
pub fn weighted_module_apply(
    weights: &[f64],
    modules: &[ModuleFn],
    memory: &[f64],
    argument: &[f64],
) -> Result<Vec<f64>, NeuralError> {
    if weights.len() != modules.len() {
        return Err(NeuralError::DimensionMismatch { expected: modules.len(), got: weights.len() });
    }
    let outputs: Vec<Vec<f64>> = modules.iter().map(|m| m(memory, argument)).collect();
    let width = outputs[0].len();
    if outputs.iter().any(|o| o.len() != width) {
        return Err(NeuralError::DimensionMismatch { expected: width, got: 0 });
    }
    Ok(weighted_row_sum(weights, &outputs))
}

/// The executable layout produced by the selection bottleneck: per-step
/// gates (1 keeps the memory), `T+1` condition indices (the extra one picks
/// the initial memory) and `T` module indices.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralTemplate {
    gates: Vec<f64>,
    condition_indices: Vec<usize>,
    module_indices: Vec<usize>,
}

impl NeuralTemplate {
    pub fn new(
        gates: Vec<f64>,
        condition_indices: Vec<usize>,
        module_indices: Vec<usize>,
    ) -> Result<Self, NeuralError> {
        let t = gates.len();
        if t == 0 || condition_indices.len() != t + 1 || module_indices.len() != t {
            return Err(NeuralError::BadTemplateShape(
                t,
                condition_indices.len(),
                module_indices.len(),
            ));
        }
        if let Some(&g) = gates.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(NeuralError::BadGate(g));
        }
        Ok(NeuralTemplate { gates, condition_indices, module_indices })
    }

    /// All-update template (every gate 0), one step per module index.
    pub fn hard(condition_indices: Vec<usize>, module_indices: Vec<usize>) -> Result<Self, NeuralError> {
        let gates = vec![0.0; module_indices.len()];
        NeuralTemplate::new(gates, condition_indices, module_indices)
    }

    pub fn steps(&self) -> usize {
        self.gates.len()
    }

    pub fn gates(&self) -> &[f64] {
        &self.gates
    }
}

/// Executes a template over a slot set.
///
/// `h_0` is the slot selected by condition index 0; step `t` selects a slot
/// with condition index `t`, applies the indexed module and blends
/// `h_t = g_t * h_{t-1} + (1 - g_t) * module(s_t, h_{t-1})`. Selection draws
/// are consumed for every step, gated or not, so the stream position never
/// depends on gate values.
#[allow(clippy::too_many_arguments)]
pub fn run_template(
    slots: &SlotSet,
    template: &NeuralTemplate,
    condition_vectors: &[Vec<f64>],
    modules: &[ModuleFn],
    readout: impl Fn(&[f64]) -> i64,
    tau: f64,
    hard: bool,
    rng: &mut PrngStream,
) -> Result<i64, NeuralError> {
    for &ci in &template.condition_indices {
        if ci >= condition_vectors.len() {
            return Err(NeuralError::IndexOutOfRange {
                kind: "condition",
                index: ci,
                len: condition_vectors.len(),
            });
        }
    }
    for &mi in &template.module_indices {
        if mi >= modules.len() {
            return Err(NeuralError::IndexOutOfRange {
                kind: "module",
                index: mi,
                len: modules.len(),
            });
        }
    }

    let select = |rng: &mut PrngStream, ci: usize| {
        attend_select(&condition_vectors[ci], slots, slots, tau, hard, rng)
    };
    let mut memory = select(rng, template.condition_indices[0])?;
    for t in 0..template.steps() {
        let argument = select(rng, template.condition_indices[t + 1])?;
        let update = modules[template.module_indices[t]](&memory, &argument);
        if update.len() != memory.len() {
            return Err(NeuralError::DimensionMismatch {
                expected: memory.len(),
                got: update.len(),
            });
        }
        let g = template.gates[t];
        for (h, u) in memory.iter_mut().zip(&update) {
            *h = g * *h + (1.0 - g) * u;
        }
    }
    Ok(readout(&memory))
}

/// Slot width of the engineered encoding: position one-hot plus one value
/// channel.
pub const ENGINEERED_WIDTH: usize = 4;

/// Condition-vector scale. The worst-case Gumbel noise gap under the
/// clamped uniform draw is below 41, so a logit gap of
/// `ENGINEERED_SCALE / sqrt(4) = 50` makes hard selection deterministic.
pub const ENGINEERED_SCALE: f64 = 100.0;

/// Exact encodings that make the neural path reproduce the symbolic one.
pub struct EngineeredEncoding {
    pub slots: SlotSet,
    /// Position condition vectors, indexed left, right, bottom.
    pub condition_vectors: Vec<Vec<f64>>,
    /// Exact arithmetic modules in canonical operation order.
    pub modules: Vec<ModuleFn>,
}

/// Engineered slot encodings for a scene: `[position one-hot | value]`
/// per digit, scaled position one-hots as condition vectors, and exact
/// integer arithmetic on the value channel as the module library.
pub fn engineered_encoding(scene: &Scene) -> EngineeredEncoding {
    let slots = SlotSet::new(
        scene
            .digits()
            .iter()
            .map(|d| {
                let mut row = vec![0.0; ENGINEERED_WIDTH];
                row[d.position.index()] = 1.0;
                row[3] = d.signed_value() as f64;
                row
            })
            .collect(),
    )
    .expect("engineered slots are well-formed");

    let condition_vectors = (0..3)
        .map(|i| {
            let mut row = vec![0.0; ENGINEERED_WIDTH];
            row[i] = ENGINEERED_SCALE;
            row
        })
        .collect();

    let modules = Operation::ALL
        .into_iter()
        .map(|op| {
            Box::new(move |h: &[f64], s: &[f64]| {
                let mut out = vec![0.0; ENGINEERED_WIDTH];
                out[3] = apply_operation(op, h[3].round() as i64, s[3].round() as i64) as f64;
                out
            }) as ModuleFn
        })
        .collect();

    EngineeredEncoding { slots, condition_vectors, modules }
}

/// Integer readout of the engineered value channel.
pub fn engineered_readout(memory: &[f64]) -> i64 {
    memory[3].round() as i64
}

/// Lowers a position-condition program onto the engineered encoding.
///
/// Cross-slot conditions (max/min) are not expressible as a single
/// dot-product query and are refused.
pub fn template_from_program(program: &Program) -> Result<NeuralTemplate, NeuralError> {
    let condition_indices = program
        .used_conditions()
        .iter()
        .map(|&c| match c {
            Condition::Left => Ok(0),
            Condition::Right => Ok(1),
            Condition::Bottom => Ok(2),
            other => Err(NeuralError::UnsupportedCondition(other)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let module_indices = program
        .operations()
        .iter()
        .map(|op| Operation::ALL.iter().position(|o| o == op).unwrap())
        .collect();
    NeuralTemplate::hard(condition_indices, module_indices)
}
