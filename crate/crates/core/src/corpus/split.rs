use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Document;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config(format!(
                "split ratios must be positive, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }

    /// Floor each part, then hand out the remainder one element at a time in
    /// train, validation, test order.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let ratios = [self.train, self.validation, self.test];
        let mut sizes = ratios.map(|r| (r * n as f64 + 1e-9).floor() as usize);
        let mut remainder = n - sizes.iter().sum::<usize>();
        let mut i = 0;
        while remainder > 0 {
            sizes[i % 3] += 1;
            remainder -= 1;
            i += 1;
        }
        sizes
    }
}

/// Persisted split manifest: three disjoint id lists plus the shuffle seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

pub fn split_labeled(docs: &[Document], ratios: SplitRatios, seed: u64) -> Result<DatasetSplit> {
    ratios.validate()?;
    let mut ids: Vec<String> = docs
        .iter()
        .filter(|d| d.is_labeled())
        .map(|d| d.id.clone())
        .collect();
    if ids.is_empty() {
        return Err(Error::Config("no labeled documents to split".into()));
    }
    let [n_train, n_val, _] = ratios.sizes(ids.len());
    ids.shuffle(&mut crate::rng::seeded(seed));
    let test = ids.split_off(n_train + n_val);
    let validation = ids.split_off(n_train);
    Ok(DatasetSplit {
        train: ids,
        validation,
        test,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use chrono::{TimeZone, Utc};

    use super::*;
    use crate::corpus::{LabelSet, Source};

    fn docs(n: usize) -> Vec<Document> {
        (0..n)
            .map(|i| Document {
                id: format!("d{i}"),
                source: Source::DarkWeb,
                timestamp: Utc.with_ymd_and_hms(2022, 1, 5, 0, 0, 0).unwrap(),
                raw_text: String::new(),
                labels: Some(LabelSet::none()),
            })
            .collect()
    }

    fn sizes(s: &DatasetSplit) -> (usize, usize, usize) {
        (s.train.len(), s.validation.len(), s.test.len())
    }

    #[test]
    fn reference_scale_sizes() {
        let s = split_labeled(&docs(1575), SplitRatios::default(), 1).unwrap();
        assert_eq!(sizes(&s), (945, 315, 315));
    }

    #[test]
    fn small_sizes_follow_remainder_rule() {
        let s = split_labeled(&docs(5), SplitRatios::default(), 1).unwrap();
        assert_eq!(sizes(&s), (3, 1, 1));
        // floors (4, 1, 1), one left over goes to train
        let s = split_labeled(&docs(7), SplitRatios::default(), 1).unwrap();
        assert_eq!(sizes(&s), (5, 1, 1));
    }

    #[test]
    fn deterministic_per_seed() {
        let d = docs(10);
        let a = split_labeled(&d, SplitRatios::default(), 42).unwrap();
        let b = split_labeled(&d, SplitRatios::default(), 42).unwrap();
        assert_eq!(a, b);
        let c = split_labeled(&d, SplitRatios::default(), 43).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn rejects_bad_ratios() {
        let bad = SplitRatios {
            train: 0.6,
            validation: 0.3,
            test: 0.2,
        };
        assert!(matches!(
            split_labeled(&docs(10), bad, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn unlabeled_documents_excluded() {
        let mut d = docs(10);
        d[0].labels = None;
        let s = split_labeled(&d, SplitRatios::default(), 3).unwrap();
        let all: HashSet<_> = s.train.iter().chain(&s.validation).chain(&s.test).collect();
        assert_eq!(all.len(), 9);
        assert!(!all.contains(&"d0".to_string()));
    }

    proptest::proptest! {
        #[test]
        fn split_is_partition(n in 1usize..300, seed in 0u64..1000,
                              a in 0.05f64..0.9, b in 0.05f64..0.9) {
            let total = a + b + 0.1;
            let ratios = SplitRatios { train: a / total, validation: b / total, test: 0.1 / total };
            let d = docs(n);
            let s = split_labeled(&d, ratios, seed).unwrap();
            let mut all: Vec<_> = s.train.iter().chain(&s.validation).chain(&s.test).cloned().collect();
            proptest::prop_assert_eq!(all.len(), n);
            all.sort();
            all.dedup();
            proptest::prop_assert_eq!(all.len(), n);
            for (size, r) in [(s.train.len(), ratios.train), (s.validation.len(), ratios.validation), (s.test.len(), ratios.test)] {
                proptest::prop_assert!((size as f64 - r * n as f64).abs() <= 1.0 + 1e-9);
            }
        }
    }
}
