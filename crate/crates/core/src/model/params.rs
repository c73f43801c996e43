use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, ModelError};
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Clone, Debug)]
pub struct MlpIds {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

#[derive(Clone, Debug)]
pub struct AttnLayerIds {
    pub query: ParamId,
    pub key: ParamId,
    pub value: ParamId,
}

/// Where each trainable tensor lives in the [`ParamStore`].
#[derive(Clone, Debug)]
pub struct ParamIds {
    pub exercise_emb: ParamId,
    pub concept_emb: ParamId,
    pub response_emb: ParamId,
    pub student_w: ParamId,
    pub student_b: ParamId,
    pub group_w: ParamId,
    pub group_b: ParamId,
    /// Per-dimension scale applied to a group correct rate.
    pub rate_scale: ParamId,
    pub rate_bias: ParamId,
    pub recip_key: ParamId,
    pub recip_query: ParamId,
    pub recip_score: ParamId,
    pub gcn: Vec<(ParamId, ParamId)>,
    pub attn: Vec<AttnLayerIds>,
    pub initial_state: ParamId,
    pub readout_student: MlpIds,
    pub readout_group: MlpIds,
}

/// Shapes of every parameter for the given sizes, in store order.
pub(crate) fn layout(cfg: &ModelConfig, exercises: usize, concepts: usize) -> Vec<(String, [usize; 2])> {
    let d = cfg.d;
    let mut out = vec![
        ("emb.exercise".to_string(), [exercises, d]),
        ("emb.concept".into(), [concepts, d]),
        ("emb.response".into(), [2, d]),
        ("enc.student.weight".into(), [d, d]),
        ("enc.student.bias".into(), [1, d]),
        ("enc.group.weight".into(), [d, d]),
        ("enc.group.bias".into(), [1, d]),
        ("enc.group.rate_scale".into(), [1, d]),
        ("enc.group.rate_bias".into(), [1, d]),
        ("recip.key".into(), [2 * d, d]),
        ("recip.query".into(), [2 * d, d]),
        ("recip.score".into(), [d, 1]),
    ];
    for l in 0..cfg.gcn_layers {
        out.push((format!("gcn.{l}.weight"), [2 * d, 2 * d]));
        out.push((format!("gcn.{l}.bias"), [1, 2 * d]));
    }
    for l in 0..cfg.attn_layers {
        out.push((format!("attn.{l}.query"), [d, d]));
        out.push((format!("attn.{l}.key"), [d, d]));
        out.push((format!("attn.{l}.value"), [d, d]));
    }
    out.push(("attn.initial_state".into(), [1, d]));
    for head in ["student", "group"] {
        out.push((format!("readout.{head}.w1"), [2 * d, d]));
        out.push((format!("readout.{head}.b1"), [1, d]));
        out.push((format!("readout.{head}.w2"), [d, 1]));
        out.push((format!("readout.{head}.b2"), [1, 1]));
    }
    out
}

pub(crate) fn init_params(cfg: &ModelConfig, exercises: usize, concepts: usize, seed: u64) -> ParamStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    for (name, [r, c]) in layout(cfg, exercises, concepts) {
        let t = if name.starts_with("emb.") || name.ends_with("initial_state") {
            Tensor::uniform(r, c, 0.1, &mut rng)
        } else if name.ends_with("bias") || name.ends_with(".b1") || name.ends_with(".b2") {
            Tensor::zeros(r, c)
        } else if name.ends_with("rate_scale") {
            Tensor::uniform(r, c, 1.0, &mut rng)
        } else {
            Tensor::glorot(r, c, &mut rng)
        };
        store.add(name, t);
    }
    store
}

impl ParamIds {
    pub(crate) fn resolve(cfg: &ModelConfig, store: &ParamStore) -> Result<Self, ModelError> {
        let id = |name: &str| {
            store
                .find(name)
                .ok_or_else(|| ModelError::MissingTensor(name.to_string()))
        };
        let mlp = |head: &str| -> Result<MlpIds, ModelError> {
            Ok(MlpIds {
                w1: id(&format!("readout.{head}.w1"))?,
                b1: id(&format!("readout.{head}.b1"))?,
                w2: id(&format!("readout.{head}.w2"))?,
                b2: id(&format!("readout.{head}.b2"))?,
            })
        };
        Ok(Self {
            exercise_emb: id("emb.exercise")?,
            concept_emb: id("emb.concept")?,
            response_emb: id("emb.response")?,
            student_w: id("enc.student.weight")?,
            student_b: id("enc.student.bias")?,
            group_w: id("enc.group.weight")?,
            group_b: id("enc.group.bias")?,
            rate_scale: id("enc.group.rate_scale")?,
            rate_bias: id("enc.group.rate_bias")?,
            recip_key: id("recip.key")?,
            recip_query: id("recip.query")?,
            recip_score: id("recip.score")?,
            gcn: (0..cfg.gcn_layers)
                .map(|l| Ok((id(&format!("gcn.{l}.weight"))?, id(&format!("gcn.{l}.bias"))?)))
                .collect::<Result<_, ModelError>>()?,
            attn: (0..cfg.attn_layers)
                .map(|l| {
                    Ok(AttnLayerIds {
                        query: id(&format!("attn.{l}.query"))?,
                        key: id(&format!("attn.{l}.key"))?,
                        value: id(&format!("attn.{l}.value"))?,
                    })
                })
                .collect::<Result<_, ModelError>>()?,
            initial_state: id("attn.initial_state")?,
            readout_student: mlp("student")?,
            readout_group: mlp("group")?,
        })
    }
}

/// Parameters recorded on one tape.
pub struct Bound<'a> {
    pub ids: &'a ParamIds,
    vars: Vec<Var>,
}

impl<'a> Bound<'a> {
    pub(crate) fn new(ids: &'a ParamIds, store: &ParamStore, tape: &mut Tape) -> Self {
        Self {
            ids,
            vars: store.bind(tape),
        }
    }

    /// Uses vars already on the tape, one per parameter in store order.
    pub fn from_vars(ids: &'a ParamIds, vars: Vec<Var>) -> Self {
        Self { ids, vars }
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.index()]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}
