use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{Document, KBRecord};
use crate::nn::{axpy, dot, log_sum_exp, softmax};

use super::params::{EncoderParams, EncoderWeights, Tower};

/// One contrastive example: a target document, an attribute, and `R`
/// candidates of which exactly one shares a value with the target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContrastiveSample {
    pub attribute: usize,
    pub target: usize,
    pub candidates: Vec<usize>,
    pub positive: usize,
}

/// Draws contrastive samples from a set of documents.
///
/// Targets and positives must mention the attribute in their text.
/// Negatives only need the attribute in their record, with no value in
/// common with the target.
#[derive(Clone, Debug)]
pub struct PairSampler {
    by_value: Vec<BTreeMap<String, Vec<usize>>>,
    holders: Vec<Vec<usize>>,
    targets: Vec<Vec<usize>>,
    usable: Vec<usize>,
}

impl PairSampler {
    pub fn new(
        records: &[KBRecord],
        documents: &[Document],
        members: &[usize],
        n_attributes: usize,
    ) -> Self {
        let mut by_value: Vec<BTreeMap<String, Vec<usize>>> = vec![BTreeMap::new(); n_attributes];
        let mut holders = vec![Vec::new(); n_attributes];
        for &i in members {
            for j in 0..n_attributes {
                if !records[i].has(j) {
                    continue;
                }
                holders[j].push(i);
                if documents[i].mentioned[j] {
                    for v in &records[i].values[j] {
                        by_value[j].entry(v.clone()).or_default().push(i);
                    }
                }
            }
        }
        let mut targets = vec![Vec::new(); n_attributes];
        for j in 0..n_attributes {
            let mut t: Vec<usize> = by_value[j]
                .values()
                .filter(|docs| docs.len() > 1)
                .flatten()
                .copied()
                .collect();
            t.sort_unstable();
            t.dedup();
            targets[j] = t;
        }
        let usable = (0..n_attributes)
            .filter(|&j| !targets[j].is_empty() && holders[j].len() > targets[j].len().min(2))
            .collect();
        PairSampler {
            by_value,
            holders,
            targets,
            usable,
        }
    }

    /// Attributes for which no valid sample can be drawn.
    pub fn skipped(&self) -> Vec<usize> {
        (0..self.targets.len())
            .filter(|j| !self.usable.contains(j))
            .collect()
    }

    /// Documents usable as a target for at least one attribute.
    pub fn targets(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self
            .usable
            .iter()
            .flat_map(|&j| self.targets[j].iter().copied())
            .collect();
        t.sort_unstable();
        t.dedup();
        t
    }

    /// A sample with a uniformly chosen attribute and target.
    pub fn sample<R: Rng>(
        &self,
        records: &[KBRecord],
        r: usize,
        rng: &mut R,
    ) -> Option<ContrastiveSample> {
        for _ in 0..20 {
            let &j = self.usable.choose(rng)?;
            let &target = self.targets[j].choose(rng)?;
            if let Some(s) = self.sample_with(records, j, target, r, rng) {
                return Some(s);
            }
        }
        None
    }

    /// A sample for a fixed target over one of its usable attributes.
    pub fn sample_for<R: Rng>(
        &self,
        records: &[KBRecord],
        target: usize,
        r: usize,
        rng: &mut R,
    ) -> Option<ContrastiveSample> {
        let mut attrs: Vec<usize> = self
            .usable
            .iter()
            .copied()
            .filter(|&j| self.targets[j].binary_search(&target).is_ok())
            .collect();
        attrs.shuffle(rng);
        attrs
            .into_iter()
            .find_map(|j| self.sample_with(records, j, target, r, rng))
    }

    fn sample_with<R: Rng>(
        &self,
        records: &[KBRecord],
        j: usize,
        target: usize,
        r: usize,
        rng: &mut R,
    ) -> Option<ContrastiveSample> {
        let shared: Vec<&Vec<usize>> = records[target].values[j]
            .iter()
            .filter_map(|v| self.by_value[j].get(v))
            .filter(|docs| docs.len() > 1)
            .collect();
        let docs = shared.choose(rng)?;
        let others: Vec<usize> = docs.iter().copied().filter(|&d| d != target).collect();
        let &pos = others.choose(rng)?;
        let tvals = &records[target].values[j];
        let mut negatives = Vec::with_capacity(r.saturating_sub(1));
        let mut tries = 0;
        while negatives.len() + 1 < r && tries < 50 * r {
            tries += 1;
            let &d = self.holders[j].choose(rng)?;
            if d == target || negatives.contains(&d) {
                continue;
            }
            if records[d].values[j].iter().any(|v| tvals.contains(v)) {
                continue;
            }
            negatives.push(d);
        }
        if negatives.len() + 1 < r {
            return None;
        }
        let positive = rng.gen_range(0..r);
        negatives.insert(positive, pos);
        Some(ContrastiveSample {
            attribute: j,
            target,
            candidates: negatives,
            positive,
        })
    }
}

/// Similarity scores between the target encoding and each candidate.
pub fn scores(
    params: &EncoderParams,
    ids: &[Vec<Vec<usize>>],
    sample: &ContrastiveSample,
) -> Vec<f64> {
    let a = [sample.attribute];
    let ht = params.forward(&ids[sample.target], Tower::Target, &a);
    sample
        .candidates
        .iter()
        .map(|&c| {
            dot(
                ht.output(0),
                params.forward(&ids[c], Tower::Candidate, &a).output(0),
            )
        })
        .collect()
}

/// Negative log-softmax of the positive score. When `grads` is given the
/// parameter gradient is accumulated into it.
pub fn contrastive_loss(
    params: &EncoderParams,
    ids: &[Vec<Vec<usize>>],
    sample: &ContrastiveSample,
    grads: Option<&mut EncoderWeights>,
) -> f64 {
    let a = [sample.attribute];
    let ht = params.forward(&ids[sample.target], Tower::Target, &a);
    let hc: Vec<_> = sample
        .candidates
        .iter()
        .map(|&c| params.forward(&ids[c], Tower::Candidate, &a))
        .collect();
    let s: Vec<f64> = hc.iter().map(|c| dot(ht.output(0), c.output(0))).collect();
    let loss = log_sum_exp(&s) - s[sample.positive];
    if let Some(grads) = grads {
        let mut ds = softmax(&s);
        ds[sample.positive] -= 1.0;
        let mut d_ht = vec![0.0; ht.output(0).len()];
        for (c, &g) in hc.iter().zip(&ds) {
            axpy(g, c.output(0), &mut d_ht);
            let d_hc: Vec<f64> = ht.output(0).iter().map(|v| g * v).collect();
            params.backward(c, &[d_hc], grads);
        }
        params.backward(&ht, &[d_ht], grads);
    }
    loss
}
