use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::corpus::Answer;
use crate::corpus::{Corpus, KBRecord};
use crate::encoder::DocReps;
use crate::error::{Md3Error, Result};
use crate::nlu::{TurnBeliefs, TurnInput};
use crate::policy::{
    ask_distribution, attribute_uncertainty, oracle_distribution, weighted_diff, PolicyConfig,
    PolicyMode, PolicyParams,
};

use super::nlg::Templates;

/// How user responses are understood: by the trained model from text, or
/// by exact matching of the structured answer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NluMode {
    #[default]
    Neural,
    Oracle,
}

impl NluMode {
    pub fn name(self) -> &'static str {
        match self {
            NluMode::Neural => "neural",
            NluMode::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for NluMode {
    type Err = Md3Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "neural" => Ok(NluMode::Neural),
            "oracle" => Ok(NluMode::Oracle),
            _ => Err(Md3Error::InvalidConfig(format!("unknown NLU mode `{s}`"))),
        }
    }
}

/// Everything needed to play the agent's side of a dialogue.
#[derive(Clone, Debug)]
pub struct Agent {
    pub corpus: Arc<Corpus>,
    pub templates: Templates,
    pub policy: PolicyConfig,
    pub nlu: NluMode,
    pub checkpoint: Option<Arc<Checkpoint>>,
    /// Representations of every corpus document, in corpus order.
    pub reps: Option<Arc<DocReps>>,
    pub policy_params: Option<PolicyParams>,
}

/// What the agent needs from the candidate set for one decision.
pub struct Decision {
    pub a: Vec<f64>,
    /// Belief-weighted differentiated rows, kept for the policy gradient.
    pub v: Option<Vec<Vec<f64>>>,
}

impl Agent {
    /// Agent using exact matching and, for the learned modes, nothing
    /// else; only `rand`, `fixed` and `oracle` policies make sense here.
    pub fn oracle(corpus: Arc<Corpus>, policy: PolicyConfig) -> Result<Self> {
        let agent = Agent {
            templates: Templates::for_attributes(&corpus.schema.attributes),
            corpus,
            policy,
            nlu: NluMode::Oracle,
            checkpoint: None,
            reps: None,
            policy_params: None,
        };
        agent.validate()?;
        Ok(agent)
    }

    pub fn with_model(
        corpus: Arc<Corpus>,
        checkpoint: Arc<Checkpoint>,
        reps: Arc<DocReps>,
        policy: PolicyConfig,
        nlu: NluMode,
    ) -> Result<Self> {
        checkpoint.check_schema(&corpus.schema)?;
        let agent = Agent {
            templates: Templates::for_attributes(&corpus.schema.attributes),
            policy_params: checkpoint.policy.clone(),
            corpus,
            policy,
            nlu,
            checkpoint: Some(checkpoint),
            reps: Some(reps),
        };
        agent.validate()?;
        Ok(agent)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.corpus.schema.len();
        self.policy.validate(l)?;
        if let Some(reps) = &self.reps {
            let aligned = reps.len() == self.corpus.len()
                && reps
                    .ids
                    .iter()
                    .zip(&self.corpus.documents)
                    .all(|(a, d)| *a == d.object_id);
            if !aligned {
                return Err(Md3Error::Contract(
                    "representations are not aligned with the corpus".into(),
                ));
            }
        }
        if self.nlu == NluMode::Neural {
            let has_nlu = self.checkpoint.as_ref().is_some_and(|c| c.nlu.is_some());
            if !has_nlu || self.reps.is_none() {
                return Err(Md3Error::InvalidConfig(
                    "neural understanding needs a trained NLU checkpoint".into(),
                ));
            }
        }
        if matches!(self.policy.mode, PolicyMode::Dapo | PolicyMode::DapoNoAb) {
            if self.reps.is_none() {
                return Err(Md3Error::InvalidConfig(format!(
                    "policy `{}` needs document representations",
                    self.policy.mode
                )));
            }
            if self.policy_params.is_none() {
                return Err(Md3Error::InvalidConfig(format!(
                    "policy `{}` needs trained policy parameters",
                    self.policy.mode
                )));
            }
        }
        Ok(())
    }

    pub fn n_attributes(&self) -> usize {
        self.corpus.schema.len()
    }

    pub fn records(&self, candidates: &[usize]) -> Vec<&KBRecord> {
        candidates
            .iter()
            .map(|&i| &self.corpus.records[i])
            .collect()
    }

    pub(crate) fn decide(
        &self,
        candidates: &[usize],
        p: &[f64],
        pi: &[f64],
        asked: &[usize],
    ) -> Result<Decision> {
        let l = self.n_attributes();
        let mode = self.policy.mode;
        match mode {
            PolicyMode::Oracle => Ok(Decision {
                a: oracle_distribution(&self.records(candidates), p, pi),
                v: None,
            }),
            PolicyMode::Dapo | PolicyMode::DapoNoAb => {
                let reps = self.reps.as_ref().expect("validated");
                let params = self.policy_params.as_ref().expect("validated");
                let diffs: Vec<&[f64]> = candidates
                    .iter()
                    .map(|&i| reps.diff[i].as_slice())
                    .collect();
                let v = weighted_diff(&diffs, p, l)?;
                let gamma = attribute_uncertainty(&diffs, p, params, l)?;
                let order = self.policy.order(l);
                Ok(Decision {
                    a: ask_distribution(mode, &gamma, pi, asked, &order),
                    v: Some(v),
                })
            }
            _ => Ok(Decision {
                a: ask_distribution(mode, &vec![1.0; l], pi, asked, &self.policy.order(l)),
                v: None,
            }),
        }
    }

    /// Turn beliefs from either the rendered exchange or the structured
    /// answer, depending on the NLU mode.
    pub fn understand(
        &self,
        candidates: &[usize],
        attribute: usize,
        turn: &TurnInput,
        answer: Option<&Answer>,
    ) -> Result<TurnBeliefs> {
        match self.nlu {
            NluMode::Oracle => {
                let answer = answer.ok_or_else(|| {
                    Md3Error::Contract("exact matching needs a structured answer".into())
                })?;
                TurnBeliefs::oracle(
                    attribute,
                    self.n_attributes(),
                    answer,
                    &self.records(candidates),
                )
            }
            NluMode::Neural => {
                let ck = self.checkpoint.as_ref().expect("validated");
                let nlu = ck.nlu.as_ref().expect("validated");
                let reps = self.reps.as_ref().expect("validated");
                let q: Vec<&[f64]> = candidates.iter().map(|&i| reps.q[i].as_slice()).collect();
                nlu.infer(turn, &ck.encoder, &q)
            }
        }
    }

    /// Copy with a different policy configuration.
    pub fn with_policy(&self, policy: PolicyConfig) -> Result<Self> {
        let mut a = self.clone();
        a.policy = policy;
        a.validate()?;
        Ok(a)
    }
}
