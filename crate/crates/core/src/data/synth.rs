//! Synthetic corpus generation: a desk-scale stand-in corpus with known
//! construction, so measured statistics can be validated against ground
//! truth. Categorical properties draw answers from a small closed set via
//! deterministic proportional allocation; relational properties copy a
//! unique name verbatim into the document; date properties embed a date
//! surface form that may differ from the canonical answer rendering.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::dates::{days_in_month, format_timestamp, Date, MONTHS};
use crate::data::instance::Instance;
use crate::data::stats::PropertyClass;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoricalSpec {
    pub name: String,
    pub answers: Vec<String>,
    /// Relative answer weights; empty means uniform.
    #[serde(default)]
    pub weights: Vec<f64>,
    pub instances: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationalSpec {
    pub name: String,
    pub instances: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DateSpec {
    pub name: String,
    pub instances: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GenSpec {
    #[serde(default)]
    pub categorical: Vec<CategoricalSpec>,
    #[serde(default)]
    pub relational: Vec<RelationalSpec>,
    #[serde(default)]
    pub date: Vec<DateSpec>,
}

impl GenSpec {
    pub fn is_empty(&self) -> bool {
        self.categorical.is_empty() && self.relational.is_empty() && self.date.is_empty()
    }

    /// A uniform categorical property over `k` stock answer names.
    pub fn uniform_categorical(name: &str, k: usize, instances: usize) -> CategoricalSpec {
        CategoricalSpec {
            name: name.to_string(),
            answers: (0..k).map(stock_answer).collect(),
            weights: Vec::new(),
            instances,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthKind {
    Categorical,
    Relational,
    Date,
}

/// Construction-side ground truth for one generated property.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyTruth {
    pub property: String,
    pub kind: TruthKind,
    pub instances: usize,
    pub expected_scaled_entropy: f64,
    pub expected_class: PropertyClass,
}

const STOCK_ANSWERS: [&str; 16] = [
    "Arketa", "Belun", "Corvia", "Dramor", "Elvana", "Fenwick", "Galdor", "Harvia", "Istria",
    "Jorvik", "Kastel", "Lumara", "Morvan", "Nerida", "Ostrev", "Pelagia",
];

fn stock_answer(i: usize) -> String {
    if i < STOCK_ANSWERS.len() {
        STOCK_ANSWERS[i].to_string()
    } else {
        format!("Option{i}")
    }
}

const FILLERS: [&str; 48] = [
    "the", "a", "an", "old", "new", "quiet", "broad", "narrow", "river", "valley", "market",
    "harbor", "road", "garden", "bridge", "tower", "stone", "wooden", "records", "show",
    "describe", "mention", "nearby", "distant", "northern", "southern", "eastern", "western",
    "people", "traders", "farmers", "scholars", "keep", "build", "visit", "cross", "small",
    "large", "green", "grey", "early", "late", "winter", "summer", "field", "forest", "coast",
    "plain",
];

const SYLLABLES: [&str; 20] = [
    "ba", "den", "fir", "gol", "hem", "jas", "kel", "lor", "mun", "nev", "pol", "quin", "ros",
    "sil", "tor", "ul", "ven", "wex", "yor", "zan",
];

/// Unique pronounceable name for a global counter; distinct counters give
/// distinct names (base-20 syllable digits plus a disambiguating suffix).
fn unique_name(counter: u64) -> String {
    let mut n = counter;
    let mut name = String::new();
    for _ in 0..3 {
        name.push_str(SYLLABLES[(n % 20) as usize]);
        n /= 20;
    }
    if n > 0 {
        name.push_str(&format!("{n}"));
    }
    let mut chars = name.chars();
    let first = chars.next().unwrap().to_ascii_uppercase();
    format!("{first}{}", chars.as_str())
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn derived_seed(seed: u64, property_index: u64, instance_index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(property_index ^ splitmix64(instance_index.wrapping_add(0xabcd))))
}

/// Largest-remainder proportional allocation of `n` instances over weights.
fn quota_counts(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let shares: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for idx in order.into_iter().take(n - assigned) {
        counts[idx] += 1;
    }
    counts
}

fn answer_index_for(counts: &[usize], i: usize) -> usize {
    let mut cum = 0;
    for (j, &c) in counts.iter().enumerate() {
        cum += c;
        if i < cum {
            return j;
        }
    }
    counts.len() - 1
}

fn filler_phrase(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words)
        .map(|_| FILLERS[rng.gen_range(0..FILLERS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// Scaled entropy on log2, written independently of the pipeline's
/// measurement path; used only for construction-side expected values.
fn construction_entropy(counts: &[usize]) -> f64 {
    let nonzero: Vec<f64> = counts.iter().filter(|&&c| c > 0).map(|&c| c as f64).collect();
    let k = nonzero.len();
    if k <= 1 {
        return 0.0;
    }
    if nonzero.iter().all(|&c| c == nonzero[0]) {
        return 1.0;
    }
    let n: f64 = nonzero.iter().sum();
    let h: f64 = nonzero.iter().map(|&c| -(c / n) * (c / n).log2()).sum();
    h / (k as f64).log2()
}

fn gen_categorical(spec: &CategoricalSpec, counts: &[usize], i: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let answer = &spec.answers[answer_index_for(counts, i)];
    let cue = format!("{}an", answer.to_lowercase());
    let doc = format!(
        "the {} survey calls this a {} place . {} near the {} .",
        spec.name,
        cue,
        filler_phrase(&mut rng, 4),
        FILLERS[rng.gen_range(0..FILLERS.len())],
    );
    Instance::new(doc, spec.name.clone(), vec![answer.clone()])
        .expect("non-empty answers")
        .with_id(format!("{}:{}", spec.name, i))
}

fn gen_relational(spec: &RelationalSpec, property_index: u64, i: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = unique_name(property_index * 1_000_000 + i as u64);
    let doc = format!(
        "records show the {} name is {} . {} holdings remain .",
        spec.name,
        name,
        filler_phrase(&mut rng, 3),
    );
    Instance::new(doc, spec.name.clone(), vec![name])
        .expect("non-empty answers")
        .with_id(format!("{}:{}", spec.name, i))
}

fn gen_date(spec: &DateSpec, i: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let year = rng.gen_range(1800..2100);
    let month = rng.gen_range(1..=12u32);
    let day = rng.gen_range(1..=days_in_month(year, month));
    let date = Date { year, month, day };
    let answer = format_timestamp(&date).expect("generated dates are valid");
    let surface = if rng.gen_bool(0.5) {
        answer.clone()
    } else {
        format!(
            "{} {}, {}",
            MONTHS[(month - 1) as usize],
            day,
            year
        )
    };
    let doc = format!(
        "the {} event began on {} . {} archive .",
        spec.name,
        surface,
        filler_phrase(&mut rng, 3),
    );
    Instance::new(doc, spec.name.clone(), vec![answer])
        .expect("non-empty answers")
        .with_id(format!("{}:{}", spec.name, i))
}

pub fn generate_synthetic(spec: &GenSpec, seed: u64) -> (Vec<Instance>, Vec<PropertyTruth>) {
    generate_impl(spec, seed, cfg!(feature = "parallel"))
}

pub fn generate_synthetic_seq(spec: &GenSpec, seed: u64) -> (Vec<Instance>, Vec<PropertyTruth>) {
    generate_impl(spec, seed, false)
}

fn gen_block<F>(n: usize, parallel: bool, f: F) -> Vec<Instance>
where
    F: Fn(usize) -> Instance + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

fn generate_impl(spec: &GenSpec, seed: u64, parallel: bool) -> (Vec<Instance>, Vec<PropertyTruth>) {
    let mut instances = Vec::new();
    let mut truths = Vec::new();
    let mut prop_index: u64 = 0;

    for cat in &spec.categorical {
        let weights = if cat.weights.is_empty() {
            vec![1.0; cat.answers.len()]
        } else {
            cat.weights.clone()
        };
        let counts = quota_counts(&weights, cat.instances);
        let pi = prop_index;
        let block = gen_block(cat.instances, parallel, |i| {
            gen_categorical(cat, &counts, i, derived_seed(seed, pi, i as u64))
        });
        instances.extend(block);
        let expected = construction_entropy(&counts);
        truths.push(PropertyTruth {
            property: cat.name.clone(),
            kind: TruthKind::Categorical,
            instances: cat.instances,
            expected_scaled_entropy: expected,
            expected_class: if expected < 0.7 {
                PropertyClass::Categorical
            } else {
                PropertyClass::Relational
            },
        });
        prop_index += 1;
    }

    for rel in &spec.relational {
        let pi = prop_index;
        let block = gen_block(rel.instances, parallel, |i| {
            gen_relational(rel, pi, i, derived_seed(seed, pi, i as u64))
        });
        instances.extend(block);
        // unique names: equal counts by construction
        truths.push(PropertyTruth {
            property: rel.name.clone(),
            kind: TruthKind::Relational,
            instances: rel.instances,
            expected_scaled_entropy: if rel.instances > 1 { 1.0 } else { 0.0 },
            expected_class: PropertyClass::Relational,
        });
        prop_index += 1;
    }

    for date in &spec.date {
        let pi = prop_index;
        let block = gen_block(date.instances, parallel, |i| {
            gen_date(date, i, derived_seed(seed, pi, i as u64))
        });
        let mut counts = std::collections::BTreeMap::new();
        for inst in &block {
            *counts.entry(inst.answers[0].clone()).or_insert(0usize) += 1;
        }
        let count_vec: Vec<usize> = counts.values().copied().collect();
        instances.extend(block);
        let expected = construction_entropy(&count_vec);
        truths.push(PropertyTruth {
            property: date.name.clone(),
            kind: TruthKind::Date,
            instances: date.instances,
            expected_scaled_entropy: expected,
            expected_class: PropertyClass::Relational,
        });
        prop_index += 1;
    }

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x5151_5151));
    instances.shuffle(&mut shuffle_rng);
    (instances, truths)
}
