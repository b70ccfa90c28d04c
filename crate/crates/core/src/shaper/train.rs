use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ShaperKind, ShaperModel};
use crate::error::{Error, Result};
use crate::kg::Graph;
use crate::linalg::{axpy, dot, AdamConfig, AdamSlot, Matrix};
use crate::rng::{stream_rng, Stream};
use crate::scalar::{sigmoid, softplus, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Number of `(head, relation)` rows per update.
    pub batch_size: usize,
    pub label_smoothing: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            learning_rate: 1e-3,
            epochs: 500,
            batch_size: 128,
            label_smoothing: 0.1,
            l2: 1e-5,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Validation("dim must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Validation("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::Validation(format!(
                "label_smoothing must lie in [0, 1), got {}",
                self.label_smoothing
            )));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::Validation("l2 must be non-negative".into()));
        }
        Ok(())
    }
}

/// `y·(1−ε) + ε/N`, elementwise, for a 0/1 target vector of length N.
pub fn smooth_targets<T: Scalar>(one_hot: &[T], epsilon: f64) -> Result<Vec<T>> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Validation(format!(
            "label smoothing must lie in [0, 1), got {epsilon}"
        )));
    }
    if let Some(bad) = one_hot.iter().find(|&&y| y != T::zero() && y != T::one()) {
        return Err(Error::Validation(format!("target {bad} is not 0 or 1")));
    }
    let n = T::lit(one_hot.len() as f64);
    let eps = T::lit(epsilon);
    let keep = T::one() - eps;
    Ok(one_hot.iter().map(|&y| y * keep + eps / n).collect())
}

/// The `(head, relation)` rows trained against, in ascending order.
pub fn training_pairs(graph: &Graph) -> Vec<(usize, usize)> {
    graph.query_pairs()
}

/// Gradient buffers shaped like a [`ShaperModel`].
#[derive(Debug, Clone)]
pub struct ShaperGrad<T> {
    pub entity: Matrix<T>,
    pub relation: Matrix<T>,
}

impl<T: Scalar> ShaperGrad<T> {
    pub fn zeros_like(model: &ShaperModel<T>) -> Self {
        Self {
            entity: Matrix::zeros(model.entity_emb.rows(), model.entity_emb.cols()),
            relation: Matrix::zeros(model.relation_emb.rows(), model.relation_emb.cols()),
        }
    }
}

/// Smoothed multi-label BCE over all tails for each pair in `batch`, plus an
/// L2 penalty on every parameter:
///
/// `L = 1/(B·N) Σ_pairs Σ_t [softplus(x_t) − y'_t·x_t] + l2·‖θ‖²`
///
/// where `x_t` is the raw composition score and `y'` the smoothed targets
/// built from the graph's known tails. Gradients are written into `grad`
/// (overwritten) when it is provided.
pub fn loss_and_grad<T: Scalar>(
    model: &ShaperModel<T>,
    graph: &Graph,
    batch: &[(usize, usize)],
    label_smoothing: f64,
    l2: f64,
    mut grad: Option<&mut ShaperGrad<T>>,
) -> T {
    let n = model.num_entities();
    let width = model.entity_emb.cols();
    let scale = T::one() / T::lit((batch.len() * n) as f64);
    let eps = T::lit(label_smoothing);
    let base = eps / T::lit(n as f64);
    let positive = T::one() - eps + base;

    if let Some(g) = grad.as_deref_mut() {
        g.entity.fill_zero();
        g.relation.fill_zero();
    }

    let mut q = vec![T::zero(); width];
    let mut dq = vec![T::zero(); width];
    let mut is_answer = vec![false; n];
    let mut loss = T::zero();
    for &(h, r) in batch {
        let answers = graph.answers(h, r);
        for &a in answers {
            is_answer[a] = true;
        }
        model.query_vector(h, r, &mut q);
        dq.iter_mut().for_each(|v| *v = T::zero());
        for t in 0..n {
            let row = model.entity_emb.row(t);
            let x = dot(&q, row);
            let y = if is_answer[t] { positive } else { base };
            loss = loss + softplus(x) - y * x;
            if let Some(g) = grad.as_deref_mut() {
                let gx = (sigmoid(x) - y) * scale;
                axpy(gx, row, &mut dq);
                axpy(gx, &q, g.entity.row_mut(t));
            }
        }
        for &a in answers {
            is_answer[a] = false;
        }
        if let Some(g) = grad.as_deref_mut() {
            backprop_query(model, h, r, &dq, g);
        }
    }
    loss = loss * scale;

    if l2 > 0.0 {
        let l2 = T::lit(l2);
        let sq = |m: &Matrix<T>| m.as_slice().iter().map(|&v| v * v).sum::<T>();
        loss = loss + l2 * (sq(&model.entity_emb) + sq(&model.relation_emb));
        if let Some(g) = grad {
            let two = l2 + l2;
            axpy(two, model.entity_emb.as_slice(), g.entity.as_mut_slice());
            axpy(two, model.relation_emb.as_slice(), g.relation.as_mut_slice());
        }
    }
    loss
}

/// Chain rule from ∂L/∂q back to the head and relation rows.
fn backprop_query<T: Scalar>(
    model: &ShaperModel<T>,
    head: usize,
    relation: usize,
    dq: &[T],
    grad: &mut ShaperGrad<T>,
) {
    let d = model.dim;
    let h = model.entity_emb.row(head);
    let r = model.relation_emb.row(relation);
    match model.kind {
        ShaperKind::DistMult => {
            for i in 0..d {
                let (hi, ri) = (h[i], r[i]);
                grad.entity.row_mut(head)[i] = grad.entity.row(head)[i] + dq[i] * ri;
                grad.relation.row_mut(relation)[i] = grad.relation.row(relation)[i] + dq[i] * hi;
            }
        }
        ShaperKind::ComplEx => {
            // q_re = a·c − b·e, q_im = a·e + b·c with h = a + bi, r = c + ei.
            for i in 0..d {
                let (a, b) = (h[i], h[d + i]);
                let (c, e) = (r[i], r[d + i]);
                let (gre, gim) = (dq[i], dq[d + i]);
                let gh = grad.entity.row_mut(head);
                gh[i] = gh[i] + c * gre + e * gim;
                gh[d + i] = gh[d + i] - e * gre + c * gim;
                let gr = grad.relation.row_mut(relation);
                gr[i] = gr[i] + a * gre + b * gim;
                gr[d + i] = gr[d + i] - b * gre + a * gim;
            }
        }
    }
}

/// Trains a shaper on every `(head, relation)` row of `graph` with Adam at a
/// constant step size. Deterministic given `cfg.seed`.
pub fn train_shaper<T: Scalar>(
    graph: &Graph,
    kind: ShaperKind,
    cfg: &TrainConfig,
) -> Result<ShaperModel<T>> {
    cfg.validate()?;
    if graph.num_facts() == 0 {
        return Err(Error::Validation("cannot train a shaper on an empty graph".into()));
    }
    let mut rng = stream_rng(cfg.seed, Stream::Shaper);
    let mut model = ShaperModel::<T>::init(
        kind,
        cfg.dim,
        graph.num_entities(),
        graph.num_relations(),
        &mut rng,
    );
    model.trained_on = graph.fingerprint();

    let adam = AdamConfig::with_learning_rate(cfg.learning_rate);
    let mut ent_slot = AdamSlot::new(model.entity_emb.as_slice().len());
    let mut rel_slot = AdamSlot::new(model.relation_emb.as_slice().len());
    let mut grad = ShaperGrad::zeros_like(&model);
    let mut pairs = training_pairs(graph);
    let mut step = 0u64;

    for epoch in 0..cfg.epochs {
        pairs.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for batch in pairs.chunks(cfg.batch_size) {
            let loss = loss_and_grad(
                &model,
                graph,
                batch,
                cfg.label_smoothing,
                cfg.l2,
                Some(&mut grad),
            );
            if !loss.is_finite() || !grad.entity.is_finite() || !grad.relation.is_finite() {
                return Err(Error::Training {
                    epoch,
                    message: format!("loss {loss}"),
                });
            }
            step += 1;
            ent_slot.apply(&adam, step, model.entity_emb.as_mut_slice(), grad.entity.as_slice());
            rel_slot.apply(
                &adam,
                step,
                model.relation_emb.as_mut_slice(),
                grad.relation.as_slice(),
            );
            total += loss.as_f64();
            batches += 1;
        }
        let mean = total / batches as f64;
        model.loss_curve.push(mean);
        if epoch % 50 == 0 || epoch + 1 == cfg.epochs {
            log::debug!("shaper epoch={epoch} loss={mean:.6}");
        }
    }
    if !model.is_finite() {
        return Err(Error::Training {
            epoch: cfg.epochs,
            message: "non-finite parameters".into(),
        });
    }
    Ok(model)
}
