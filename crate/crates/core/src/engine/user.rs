use rand::Rng;

use crate::corpus::{Answer, KBRecord};
use crate::error::Result;

use super::nlg::Templates;

/// Rule-based user holding a secret target. Each attribute is hidden
/// independently at the start of the dialogue and then answered "don't
/// know" every time it is asked.
#[derive(Clone, Debug, PartialEq)]
pub struct UserSim {
    pub target: KBRecord,
    pub masked: Vec<bool>,
}

impl UserSim {
    pub fn new<R: Rng>(target: KBRecord, mask_p: f64, rng: &mut R) -> Self {
        let masked = (0..target.values.len())
            .map(|_| rng.gen_bool(mask_p))
            .collect();
        UserSim { target, masked }
    }

    pub fn answer(&self, j: usize) -> Answer {
        if self.masked[j] {
            Answer::Unknown
        } else {
            Answer::from_record(&self.target, j)
        }
    }

    /// The structured answer and its rendering.
    pub fn respond<R: Rng>(
        &self,
        j: usize,
        templates: &Templates,
        rng: &mut R,
    ) -> Result<(Vec<String>, Answer)> {
        let answer = self.answer(j);
        let text = templates.answer(j, &answer, rng)?;
        Ok((text, answer))
    }
}
