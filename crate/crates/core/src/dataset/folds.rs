use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AdPair;
use crate::error::{Error, Result};

/// Disjoint test folds over pair ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub seed: u64,
    pub folds: Vec<Vec<String>>,
}

impl FoldSplit {
    /// Seeded shuffle of the sorted ids, then dealt round-robin.
    pub fn from_ids<S: AsRef<str>>(ids: &[S], k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
        }
        if ids.len() < k {
            return Err(Error::invalid(format!(
                "{} pairs cannot fill {k} folds",
                ids.len()
            )));
        }
        let mut sorted: Vec<String> = ids.iter().map(|s| s.as_ref().to_string()).collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate pair id `{}`", w[0])));
        }
        sorted.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut folds = vec![Vec::new(); k];
        for (i, id) in sorted.into_iter().enumerate() {
            folds[i % k].push(id);
        }
        Ok(Self { seed, folds })
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Every id in the manifest appears in exactly one fold and nothing else does.
    pub fn validate_for<S: AsRef<str>>(&self, ids: &[S]) -> Result<()> {
        let mut in_folds: Vec<&str> = self.folds.iter().flatten().map(String::as_str).collect();
        in_folds.sort_unstable();
        let mut expected: Vec<&str> = ids.iter().map(AsRef::as_ref).collect();
        expected.sort_unstable();
        if in_folds != expected {
            return Err(Error::invalid("folds do not partition the manifest's pair ids"));
        }
        if let Some(i) = self.folds.iter().position(Vec::is_empty) {
            return Err(Error::invalid(format!("fold {i} is empty")));
        }
        Ok(())
    }
}

pub fn make_folds(pairs: &[AdPair], k: usize, seed: u64) -> Result<FoldSplit> {
    let ids: Vec<&str> = pairs.iter().map(|p| p.pair_id.as_str()).collect();
    FoldSplit::from_ids(&ids, k, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("pair{i:03}")).collect()
    }

    #[test]
    fn hundred_and_two_pairs_balance() {
        let f = FoldSplit::from_ids(&ids(102), 5, 0).unwrap();
        let mut sizes: Vec<usize> = f.folds.iter().map(Vec::len).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![21, 21, 20, 20, 20]);
        f.validate_for(&ids(102)).unwrap();
    }

    #[test]
    fn five_pairs_one_each() {
        let f = FoldSplit::from_ids(&ids(5), 5, 3).unwrap();
        assert!(f.folds.iter().all(|x| x.len() == 1));
    }

    #[test]
    fn seed_determines_folds() {
        let a = FoldSplit::from_ids(&ids(30), 5, 11).unwrap();
        let b = FoldSplit::from_ids(&ids(30), 5, 11).unwrap();
        let c = FoldSplit::from_ids(&ids(30), 5, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.folds, c.folds);
    }

    #[test]
    fn input_order_does_not_matter() {
        let mut rev = ids(17);
        rev.reverse();
        assert_eq!(
            FoldSplit::from_ids(&ids(17), 5, 1).unwrap(),
            FoldSplit::from_ids(&rev, 5, 1).unwrap()
        );
    }

    #[test]
    fn errors() {
        assert!(FoldSplit::from_ids(&ids(4), 5, 0).is_err());
        assert!(FoldSplit::from_ids(&ids(4), 1, 0).is_err());
        assert!(FoldSplit::from_ids(&["a", "a", "b"], 2, 0).is_err());
    }

    proptest! {
        #[test]
        fn partition_and_balance(n in 2usize..200, k in 2usize..10, seed in any::<u64>()) {
            prop_assume!(n >= k);
            let f = FoldSplit::from_ids(&ids(n), k, seed).unwrap();
            prop_assert!(f.validate_for(&ids(n)).is_ok());
            let max = f.folds.iter().map(Vec::len).max().unwrap();
            let min = f.folds.iter().map(Vec::len).min().unwrap();
            prop_assert!(max - min <= 1);
        }
    }
}
