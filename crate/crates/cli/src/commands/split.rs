//! `split`: seeded train/val/test partition of the annotated images.

use super::load_annotations;
use crate::config::{require, PipelineConfig};
use crate::error::Result;
use crate::fsutil::{file_stem, write_atomic};
use crate::SplitArgs;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sizes of (train, val, test) for `n` items.
pub fn split_sizes(n: usize, test_fraction: f64, val_fraction: f64) -> (usize, usize, usize) {
    let test = ((n as f64 * test_fraction).round() as usize).min(n);
    let val = (((n - test) as f64 * val_fraction).round() as usize).min(n - test);
    (n - test - val, val, test)
}

/// Shuffle `stems` (sorted first) and cut them into train, val and test, each sorted.
pub fn partition(mut stems: Vec<String>, test_fraction: f64, val_fraction: f64, seed: u64) -> [Vec<String>; 3] {
    stems.sort();
    stems.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, val, _) = split_sizes(stems.len(), test_fraction, val_fraction);
    let test = stems.split_off(train + val);
    let val_part = stems.split_off(train);
    let mut parts = [stems, val_part, test];
    for p in &mut parts {
        p.sort();
    }
    parts
}

pub fn run(mut cfg: PipelineConfig, a: &SplitArgs) -> Result<()> {
    if a.annotations.is_some() {
        cfg.paths.annotations.clone_from(&a.annotations);
    }
    cfg.validate()?;
    let docs = load_annotations(require(&cfg.paths.annotations, "annotations")?)?;
    let stems = docs.iter().map(|(p, _)| file_stem(p)).collect();
    let parts = partition(stems, cfg.split.test_fraction, cfg.split.val_fraction, cfg.seed);
    let dir = cfg.output_dir().join("split");
    for (name, part) in ["train", "val", "test"].iter().zip(&parts) {
        let text: String = part.iter().map(|s| format!("{s}\n")).collect();
        write_atomic(&dir.join(format!("{name}.txt")), text.as_bytes())?;
    }
    println!("train {}, val {}, test {}", parts[0].len(), parts[1].len(), parts[2].len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn sizes() {
        assert_eq!(split_sizes(100, 0.2, 0.2), (64, 16, 20));
        assert_eq!(split_sizes(10, 0.2, 0.2), (6, 2, 2));
        assert_eq!(split_sizes(0, 0.2, 0.2), (0, 0, 0));
        assert_eq!(split_sizes(1, 0.2, 0.2), (1, 0, 0));
    }

    #[test]
    fn partition_is_disjoint_and_seeded() {
        let stems: Vec<String> = (0..37).map(|i| format!("img{i:03}")).collect();
        let a = partition(stems.clone(), 0.2, 0.2, 5);
        let mut reversed = stems.clone();
        reversed.reverse();
        assert_eq!(a, partition(reversed, 0.2, 0.2, 5));
        let all: BTreeSet<_> = a.iter().flatten().cloned().collect();
        assert_eq!(all.len(), 37);
        assert_ne!(a, partition(stems, 0.2, 0.2, 6));
    }
}
