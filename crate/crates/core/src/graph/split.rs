use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Disjoint train/dev/test node sets covering every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Uniform seeded permutation cut 8:1:1.
///
/// `train = floor(0.8 n)`, `dev = floor((n - train) / 2)` and the test set
/// takes the remainder. Classes are not stratified.
pub fn random_split(num_nodes: usize, seed: u64) -> Result<SplitAssignment> {
    if num_nodes < 10 {
        return Err(Error::Validation(format!(
            "{num_nodes} nodes cannot form an 8:1:1 split"
        )));
    }
    let mut perm: Vec<usize> = (0..num_nodes).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    let n_train = num_nodes * 8 / 10;
    let n_dev = (num_nodes - n_train) / 2;
    let test = perm.split_off(n_train + n_dev);
    let dev = perm.split_off(n_train);
    Ok(SplitAssignment {
        train: perm,
        dev,
        test,
        seed,
    })
}

impl SplitAssignment {
    pub fn num_nodes(&self) -> usize {
        self.train.len() + self.dev.len() + self.test.len()
    }

    /// Checks disjointness and full coverage of `0..num_nodes`.
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let mut seen = vec![false; num_nodes];
        for &i in self.train.iter().chain(&self.dev).chain(&self.test) {
            if i >= num_nodes || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Validation(format!(
                    "split index {i} out of range or repeated"
                )));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Validation("split does not cover every node".into()));
        }
        Ok(())
    }

    /// Plain-text form: a `seed` line followed by `train`, `dev` and `test`
    /// sections, each a header with a count and one node index per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "seed {}", self.seed).unwrap();
        for (name, set) in [("train", &self.train), ("dev", &self.dev), ("test", &self.test)] {
            writeln!(out, "[{name}] {}", set.len()).unwrap();
            for i in set {
                writeln!(out, "{i}").unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Parse {
            path: "<split>".into(),
            line,
            message: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let seed = match lines.next() {
            Some((n, l)) => l
                .strip_prefix("seed ")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(n, "expected `seed <int>`"))?,
            None => return Err(bad(1, "empty split file")),
        };
        let mut sets: [Vec<usize>; 3] = Default::default();
        for (k, name) in ["train", "dev", "test"].iter().enumerate() {
            let (n, header) = lines.next().ok_or_else(|| bad(0, "missing section"))?;
            let count: usize = header
                .strip_prefix(&format!("[{name}] "))
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(n, &format!("expected `[{name}] <count>`")))?;
            for _ in 0..count {
                let (n, l) = lines.next().ok_or_else(|| bad(n, "section truncated"))?;
                sets[k].push(l.parse().map_err(|_| bad(n, "expected a node index"))?);
            }
        }
        let [train, dev, test] = sets;
        Ok(Self {
            train,
            dev,
            test,
            seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cora_sized_split() {
        let s = random_split(2708, 0).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (2166, 271, 271));
        s.validate(2708).unwrap();
    }

    #[test]
    fn ten_nodes() {
        let s = random_split(10, 42).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (8, 1, 1));
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(random_split(100, 7).unwrap(), random_split(100, 7).unwrap());
        assert_ne!(random_split(100, 7).unwrap(), random_split(100, 8).unwrap());
    }

    #[test]
    fn too_small() {
        assert!(random_split(9, 0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let s = random_split(57, 3).unwrap();
        assert_eq!(SplitAssignment::from_text(&s.to_text()).unwrap(), s);
        assert!(SplitAssignment::from_text("seed 1\n[train] 2\n0\n").is_err());
    }
}
