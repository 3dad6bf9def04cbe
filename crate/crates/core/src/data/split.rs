//! 85/10/5 dataset split by per-instance seeded hash. Assignment depends
//! only on (seed, instance content), so it is independent of corpus order
//! and stable across platforms.

use crate::data::instance::Instance;

const TRAIN_FRACTION: f64 = 0.85;
const VALIDATION_FRACTION: f64 = 0.10;

/// FNV-1a, fixed so splits never depend on the std hasher.
fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn instance_unit(inst: &Instance, seed: u64) -> f64 {
    let mut bytes = Vec::with_capacity(
        8 + inst.document.len() + inst.property.len() + 16,
    );
    bytes.extend_from_slice(&seed.to_le_bytes());
    bytes.extend_from_slice(inst.document.as_bytes());
    bytes.push(0x1f);
    bytes.extend_from_slice(inst.property.as_bytes());
    bytes.push(0x1f);
    for a in &inst.answers {
        bytes.extend_from_slice(a.as_bytes());
        bytes.push(0x1e);
    }
    if let Some(id) = &inst.id {
        bytes.push(0x1f);
        bytes.extend_from_slice(id.as_bytes());
    }
    fnv1a64(bytes) as f64 / (u64::MAX as f64 + 1.0)
}

pub fn split_dataset(
    instances: &[Instance],
    seed: u64,
) -> (Vec<Instance>, Vec<Instance>, Vec<Instance>) {
    let mut train = Vec::new();
    let mut validation = Vec::new();
    let mut test = Vec::new();
    for inst in instances {
        let u = instance_unit(inst, seed);
        if u < TRAIN_FRACTION {
            train.push(inst.clone());
        } else if u < TRAIN_FRACTION + VALIDATION_FRACTION {
            validation.push(inst.clone());
        } else {
            test.push(inst.clone());
        }
    }
    (train, validation, test)
}
