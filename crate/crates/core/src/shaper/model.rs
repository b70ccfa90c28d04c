use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng::Rng;
use crate::scalar::{sigmoid, Scalar};

pub const SHAPER_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShaperKind {
    DistMult,
    ComplEx,
}

impl ShaperKind {
    /// Stored reals per embedding row for `dim` (complex pairs take two).
    pub fn row_width(self, dim: usize) -> usize {
        match self {
            ShaperKind::DistMult => dim,
            ShaperKind::ComplEx => 2 * dim,
        }
    }
}

impl fmt::Display for ShaperKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShaperKind::DistMult => "distmult",
            ShaperKind::ComplEx => "complex",
        })
    }
}

impl FromStr for ShaperKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "distmult" => Ok(ShaperKind::DistMult),
            "complex" => Ok(ShaperKind::ComplEx),
            other => Err(Error::Validation(format!(
                "unknown shaper model '{other}' (expected distmult or complex)"
            ))),
        }
    }
}

/// Entity/relation embedding tables and the composition function over them.
///
/// ComplEx rows store the real parts in the first `dim` columns and the
/// imaginary parts in the last `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShaperModel<T> {
    pub kind: ShaperKind,
    pub dim: usize,
    pub entity_emb: Matrix<T>,
    pub relation_emb: Matrix<T>,
    /// Fingerprint of the graph the model was trained on (empty if untrained).
    pub trained_on: String,
    pub loss_curve: Vec<f64>,
}

impl<T: Scalar> ShaperModel<T> {
    /// Uniform(−0.1, 0.1) initialization, entity table first.
    pub fn init(
        kind: ShaperKind,
        dim: usize,
        num_entities: usize,
        num_relations: usize,
        rng: &mut Rng,
    ) -> Self {
        let width = kind.row_width(dim);
        let mut draw = |_, _| T::lit(rng.gen_range(-0.1..0.1));
        let entity_emb = Matrix::from_fn(num_entities, width, &mut draw);
        let relation_emb = Matrix::from_fn(num_relations, width, &mut draw);
        Self {
            kind,
            dim,
            entity_emb,
            relation_emb,
            trained_on: String::new(),
            loss_curve: Vec::new(),
        }
    }

    pub fn from_parts(kind: ShaperKind, dim: usize, entity_emb: Matrix<T>, relation_emb: Matrix<T>) -> Result<Self> {
        let width = kind.row_width(dim);
        if entity_emb.cols() != width || relation_emb.cols() != width {
            return Err(Error::Format(format!(
                "{kind} with dim {dim} needs rows of width {width}"
            )));
        }
        Ok(Self {
            kind,
            dim,
            entity_emb,
            relation_emb,
            trained_on: String::new(),
            loss_curve: Vec::new(),
        })
    }

    pub fn num_entities(&self) -> usize {
        self.entity_emb.rows()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_emb.rows()
    }

    /// Writes the vector `q` with `raw_score(h, r, t) == q · entity_emb[t]`.
    pub fn query_vector(&self, head: usize, relation: usize, q: &mut [T]) {
        let h = self.entity_emb.row(head);
        let r = self.relation_emb.row(relation);
        match self.kind {
            ShaperKind::DistMult => {
                for i in 0..self.dim {
                    q[i] = h[i] * r[i];
                }
            }
            ShaperKind::ComplEx => {
                let d = self.dim;
                for i in 0..d {
                    let (a, b) = (h[i], h[d + i]);
                    let (c, e) = (r[i], r[d + i]);
                    // Re and Im of h·r; the tail enters conjugated.
                    q[i] = a * c - b * e;
                    q[d + i] = a * e + b * c;
                }
            }
        }
    }

    /// Un-squashed composition value f(h, r, t) before the sigmoid.
    pub fn raw_score(&self, head: usize, relation: usize, tail: usize) -> T {
        let mut q = vec![T::zero(); self.entity_emb.cols()];
        self.query_vector(head, relation, &mut q);
        dot(&q, self.entity_emb.row(tail))
    }

    /// `sigmoid(f(h, r, t))`; errors if any embedding involved is non-finite.
    pub fn score_triple(&self, head: usize, relation: usize, tail: usize) -> Result<T> {
        self.check_ids(head, relation, tail)?;
        let rows = [
            self.entity_emb.row(head),
            self.relation_emb.row(relation),
            self.entity_emb.row(tail),
        ];
        if rows.iter().any(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numeric(format!(
                "non-finite embedding in ({head}, {relation}, {tail})"
            )));
        }
        Ok(sigmoid(self.raw_score(head, relation, tail)))
    }

    /// Sigmoid scores of every candidate tail for `(head, relation)`.
    pub fn score_tails(&self, head: usize, relation: usize) -> Vec<T> {
        let mut q = vec![T::zero(); self.entity_emb.cols()];
        self.query_vector(head, relation, &mut q);
        (0..self.num_entities())
            .map(|t| sigmoid(dot(&q, self.entity_emb.row(t))))
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.entity_emb.is_finite() && self.relation_emb.is_finite()
    }

    fn check_ids(&self, head: usize, relation: usize, tail: usize) -> Result<()> {
        if head >= self.num_entities() || tail >= self.num_entities() {
            return Err(Error::Query(format!(
                "entity id out of range in ({head}, {relation}, {tail})"
            )));
        }
        if relation >= self.num_relations() {
            return Err(Error::Query(format!("relation id {relation} out of range")));
        }
        Ok(())
    }

    pub fn to_checkpoint(&self, vocab_sha: &str) -> ShaperCheckpoint {
        ShaperCheckpoint {
            format_version: SHAPER_FORMAT_VERSION,
            artifact: "shaper".into(),
            kind: self.kind,
            dim: self.dim,
            vocab_sha: vocab_sha.to_owned(),
            trained_on: self.trained_on.clone(),
            entity_shape: [self.entity_emb.rows(), self.entity_emb.cols()],
            relation_shape: [self.relation_emb.rows(), self.relation_emb.cols()],
            loss_curve: self.loss_curve.clone(),
            entity_emb: self.entity_emb.to_f64_vec(),
            relation_emb: self.relation_emb.to_f64_vec(),
        }
    }

    pub fn from_checkpoint(ckpt: &ShaperCheckpoint) -> Result<Self> {
        if ckpt.format_version != SHAPER_FORMAT_VERSION || ckpt.artifact != "shaper" {
            return Err(Error::Format(format!(
                "unsupported shaper checkpoint ({} v{})",
                ckpt.artifact, ckpt.format_version
            )));
        }
        let [er, ec] = ckpt.entity_shape;
        let [rr, rc] = ckpt.relation_shape;
        let mut model = Self::from_parts(
            ckpt.kind,
            ckpt.dim,
            Matrix::from_f64_vec(er, ec, &ckpt.entity_emb)?,
            Matrix::from_f64_vec(rr, rc, &ckpt.relation_emb)?,
        )?;
        if !model.is_finite() {
            return Err(Error::Numeric("checkpoint holds non-finite parameters".into()));
        }
        model.trained_on = ckpt.trained_on.clone();
        model.loss_curve = ckpt.loss_curve.clone();
        Ok(model)
    }
}

/// On-disk form of a [`ShaperModel`]: a JSON object with shapes and flat
/// row-major parameter arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShaperCheckpoint {
    pub format_version: u32,
    pub artifact: String,
    pub kind: ShaperKind,
    pub dim: usize,
    pub vocab_sha: String,
    pub trained_on: String,
    pub entity_shape: [usize; 2],
    pub relation_shape: [usize; 2],
    pub loss_curve: Vec<f64>,
    pub entity_emb: Vec<f64>,
    pub relation_emb: Vec<f64>,
}
