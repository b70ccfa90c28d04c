//! Recurrent walk policy: an LSTM over the path so far and a bilinear score
//! between each candidate action and a projection of the current state.
//!
//! ```text
//! x_t   = [rel(prev relation); ent(e_t)]
//! h_t   = LSTM(x_t, h_{t-1})
//! u_t   = P · [h_t; ent(e_t); rel(r_q)]
//! l(a)  = [rel(a.relation); ent(a.target)] · u_t
//! π(·)  = softmax(l)
//! ```

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::kg::Edge;
use crate::linalg::{axpy, dot, Matrix};
use crate::rng::Rng;
use crate::scalar::{log_softmax, sigmoid, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyShape {
    pub num_entities: usize,
    pub relation_slots: usize,
    pub entity_dim: usize,
    pub hidden_dim: usize,
}

/// All trainable weights of the walk policy. Also used as the gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams<T> {
    pub entity_emb: Matrix<T>,
    pub relation_emb: Matrix<T>,
    /// Gate order in the `4·d_h` rows: input, forget, output, candidate.
    pub lstm_input: Matrix<T>,
    pub lstm_hidden: Matrix<T>,
    pub lstm_bias: Vec<T>,
    /// Maps `[h; ent(e_t); rel(r_q)]` to the action-embedding space.
    pub projection: Matrix<T>,
}

impl<T: Scalar> PolicyParams<T> {
    pub fn zeros(shape: PolicyShape) -> Self {
        let PolicyShape {
            num_entities,
            relation_slots,
            entity_dim: dp,
            hidden_dim: dh,
        } = shape;
        Self {
            entity_emb: Matrix::zeros(num_entities, dp),
            relation_emb: Matrix::zeros(relation_slots, dp),
            lstm_input: Matrix::zeros(4 * dh, 2 * dp),
            lstm_hidden: Matrix::zeros(4 * dh, dh),
            lstm_bias: vec![T::zero(); 4 * dh],
            projection: Matrix::zeros(2 * dp, dh + 2 * dp),
        }
    }

    /// Embeddings uniform in ±0.1, weight matrices Glorot-uniform, biases 0.
    pub fn init(shape: PolicyShape, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(shape);
        let mut fill = |m: &mut Matrix<T>, limit: f64| {
            for v in m.as_mut_slice() {
                *v = T::lit(rng.gen_range(-limit..limit));
            }
        };
        fill(&mut p.entity_emb, 0.1);
        fill(&mut p.relation_emb, 0.1);
        for m in [&mut p.lstm_input, &mut p.lstm_hidden, &mut p.projection] {
            let limit = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
            fill(m, limit);
        }
        p
    }

    pub fn shape(&self) -> PolicyShape {
        PolicyShape {
            num_entities: self.entity_emb.rows(),
            relation_slots: self.relation_emb.rows(),
            entity_dim: self.entity_emb.cols(),
            hidden_dim: self.lstm_hidden.cols(),
        }
    }

    pub fn entity_dim(&self) -> usize {
        self.entity_emb.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.lstm_hidden.cols()
    }

    pub fn blocks(&self) -> [&[T]; 6] {
        [
            self.entity_emb.as_slice(),
            self.relation_emb.as_slice(),
            self.lstm_input.as_slice(),
            self.lstm_hidden.as_slice(),
            &self.lstm_bias,
            self.projection.as_slice(),
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [T]; 6] {
        [
            self.entity_emb.as_mut_slice(),
            self.relation_emb.as_mut_slice(),
            self.lstm_input.as_mut_slice(),
            self.lstm_hidden.as_mut_slice(),
            &mut self.lstm_bias,
            self.projection.as_mut_slice(),
        ]
    }

    pub const BLOCK_NAMES: [&'static str; 6] = [
        "entity_emb",
        "relation_emb",
        "lstm_input",
        "lstm_hidden",
        "lstm_bias",
        "projection",
    ];

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn fill_zero(&mut self) {
        for b in self.blocks_mut() {
            b.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// `[rel(edge.relation); ent(edge.target)]` dotted with `u`.
    #[inline]
    fn action_logit(&self, edge: &Edge, u: &[T]) -> T {
        let dp = self.entity_dim();
        dot(self.relation_emb.row(edge.relation), &u[..dp])
            + dot(self.entity_emb.row(edge.target), &u[dp..])
    }
}

/// Recurrent memory carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Memory<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Scalar> Memory<T> {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            h: vec![T::zero(); hidden_dim],
            c: vec![T::zero(); hidden_dim],
        }
    }
}

/// What the policy observes at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepInput {
    /// Relation of the previous action (the NO_OP slot at the first step).
    pub previous_relation: usize,
    pub current: usize,
    pub query_relation: usize,
}

/// Intermediate values of one forward step kept for back-propagation.
#[derive(Debug, Clone)]
pub struct StepCache<T> {
    input: StepInput,
    x: Vec<T>,
    gates: Vec<T>,
    c_prev: Vec<T>,
    h_prev: Vec<T>,
    tanh_c: Vec<T>,
    state: Vec<T>,
    u: Vec<T>,
    pub log_probs: Vec<T>,
}

impl<T: Scalar> PolicyParams<T> {
    /// Advances the memory and returns action logits.
    pub fn step(
        &self,
        memory: &Memory<T>,
        input: StepInput,
        actions: &[Edge],
    ) -> Result<(Memory<T>, Vec<T>)> {
        let (memory, cache) = self.step_cached(memory, input, actions)?;
        let logits = actions.iter().map(|a| self.action_logit(a, &cache.u)).collect();
        Ok((memory, logits))
    }

    /// Like [`Self::step`] but keeps the cache needed by [`Self::backward_step`].
    pub fn step_cached(
        &self,
        memory: &Memory<T>,
        input: StepInput,
        actions: &[Edge],
    ) -> Result<(Memory<T>, StepCache<T>)> {
        if actions.is_empty() {
            return Err(Error::Action(format!(
                "entity {} has no actions; the walk graph needs self-loops",
                input.current
            )));
        }
        let dp = self.entity_dim();
        let dh = self.hidden_dim();

        let mut x = Vec::with_capacity(2 * dp);
        x.extend_from_slice(self.relation_emb.row(input.previous_relation));
        x.extend_from_slice(self.entity_emb.row(input.current));

        let mut z = self.lstm_bias.clone();
        for (r, zr) in z.iter_mut().enumerate() {
            *zr = *zr + dot(self.lstm_input.row(r), &x) + dot(self.lstm_hidden.row(r), &memory.h);
        }
        let mut gates = z;
        for (k, g) in gates.iter_mut().enumerate() {
            *g = if k < 3 * dh { sigmoid(*g) } else { g.tanh() };
        }
        let mut c = vec![T::zero(); dh];
        let mut h = vec![T::zero(); dh];
        let mut tanh_c = vec![T::zero(); dh];
        for k in 0..dh {
            let (i, f, o, g) = (gates[k], gates[dh + k], gates[2 * dh + k], gates[3 * dh + k]);
            c[k] = f * memory.c[k] + i * g;
            tanh_c[k] = c[k].tanh();
            h[k] = o * tanh_c[k];
        }

        let mut state = Vec::with_capacity(dh + 2 * dp);
        state.extend_from_slice(&h);
        state.extend_from_slice(self.entity_emb.row(input.current));
        state.extend_from_slice(self.relation_emb.row(input.query_relation));
        let mut u = vec![T::zero(); 2 * dp];
        self.projection.matvec(&state, &mut u);

        let logits: Vec<T> = actions.iter().map(|a| self.action_logit(a, &u)).collect();
        let log_probs = log_softmax(&logits);
        let cache = StepCache {
            input,
            x,
            gates,
            c_prev: memory.c.clone(),
            h_prev: memory.h.clone(),
            tanh_c,
            state,
            u,
            log_probs,
        };
        Ok((Memory { h, c }, cache))
    }

    /// Back-propagates `dlogits` of one step (plus the memory gradient flowing
    /// in from the next step) into `grad`, returning the memory gradient for
    /// the previous step.
    pub fn backward_step(
        &self,
        cache: &StepCache<T>,
        actions: &[Edge],
        dlogits: &[T],
        dmemory: &Memory<T>,
        grad: &mut PolicyParams<T>,
    ) -> Memory<T> {
        let dp = self.entity_dim();
        let dh = self.hidden_dim();

        let mut du = vec![T::zero(); 2 * dp];
        for (a, &g) in actions.iter().zip(dlogits) {
            if g == T::zero() {
                continue;
            }
            axpy(g, &cache.u[..dp], grad.relation_emb.row_mut(a.relation));
            axpy(g, &cache.u[dp..], grad.entity_emb.row_mut(a.target));
            axpy(g, self.relation_emb.row(a.relation), &mut du[..dp]);
            axpy(g, self.entity_emb.row(a.target), &mut du[dp..]);
        }

        grad.projection.add_outer(&du, &cache.state);
        let mut dstate = vec![T::zero(); dh + 2 * dp];
        self.projection.matvec_t_acc(&du, &mut dstate);
        axpy(T::one(), &dstate[dh..dh + dp], grad.entity_emb.row_mut(cache.input.current));
        axpy(
            T::one(),
            &dstate[dh + dp..],
            grad.relation_emb.row_mut(cache.input.query_relation),
        );

        let g = &cache.gates;
        let mut dz = vec![T::zero(); 4 * dh];
        let mut dc_prev = vec![T::zero(); dh];
        let one = T::one();
        for k in 0..dh {
            let (i, f, o, cand) = (g[k], g[dh + k], g[2 * dh + k], g[3 * dh + k]);
            let dh_k = dstate[k] + dmemory.h[k];
            let tc = cache.tanh_c[k];
            let dc = dmemory.c[k] + dh_k * o * (one - tc * tc);
            dz[k] = dc * cand * i * (one - i);
            dz[dh + k] = dc * cache.c_prev[k] * f * (one - f);
            dz[2 * dh + k] = dh_k * tc * o * (one - o);
            dz[3 * dh + k] = dc * i * (one - cand * cand);
            dc_prev[k] = dc * f;
        }

        grad.lstm_input.add_outer(&dz, &cache.x);
        grad.lstm_hidden.add_outer(&dz, &cache.h_prev);
        axpy(one, &dz, &mut grad.lstm_bias);

        let mut dx = vec![T::zero(); 2 * dp];
        self.lstm_input.matvec_t_acc(&dz, &mut dx);
        axpy(
            one,
            &dx[..dp],
            grad.relation_emb.row_mut(cache.input.previous_relation),
        );
        axpy(one, &dx[dp..], grad.entity_emb.row_mut(cache.input.current));

        let mut dh_prev = vec![T::zero(); dh];
        self.lstm_hidden.matvec_t_acc(&dz, &mut dh_prev);
        Memory {
            h: dh_prev,
            c: dc_prev,
        }
    }
}

/// Softmax probabilities over `actions` for the given memory and input.
pub fn action_distribution<T: Scalar>(
    params: &PolicyParams<T>,
    memory: &Memory<T>,
    input: StepInput,
    actions: &[Edge],
) -> Result<Vec<T>> {
    let (_, logits) = params.step(memory, input, actions)?;
    Ok(log_softmax(&logits).into_iter().map(|l| l.exp()).collect())
}
