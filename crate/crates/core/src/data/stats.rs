//! Per-property answer statistics: scaled answer entropy, the
//! categorical/relational split at 0.7, and corpus-level summary measures.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::instance::Instance;
use crate::data::label::label_positions;
use crate::data::tokenize::tokenize;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyClass {
    Categorical,
    Relational,
}

impl std::fmt::Display for PropertyClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PropertyClass::Categorical => write!(f, "categorical"),
            PropertyClass::Relational => write!(f, "relational"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyStats {
    pub property: String,
    pub frequency: usize,
    pub scaled_entropy: f64,
    pub class: PropertyClass,
}

/// Shannon entropy of a count distribution divided by the entropy of the
/// uniform distribution over the same support. A single-value support
/// scores exactly 0.0 and any equal-count distribution exactly 1.0.
pub fn answer_entropy_from_counts(counts: &[usize]) -> f64 {
    let k = counts.iter().filter(|&&c| c > 0).count();
    if k <= 1 {
        return 0.0;
    }
    let nonzero: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
    if nonzero.iter().all(|&c| c == nonzero[0]) {
        return 1.0;
    }
    let n: f64 = nonzero.iter().map(|&c| c as f64).sum();
    let h: f64 = nonzero
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    (h / (k as f64).ln()).clamp(0.0, 1.0)
}

/// Scaled entropy of the answer-value distribution over a property's
/// instances. Every value of every instance's answer set contributes one
/// count.
pub fn answer_entropy<'a>(instances: impl IntoIterator<Item = &'a Instance>) -> f64 {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for inst in instances {
        for a in &inst.answers {
            *counts.entry(a.as_str()).or_insert(0) += 1;
        }
    }
    let counts: Vec<usize> = counts.values().copied().collect();
    answer_entropy_from_counts(&counts)
}

/// Properties below 0.7 scaled entropy are categorical; 0.7 and above are
/// relational (strict inequality).
pub fn classify_property(scaled_entropy: f64) -> PropertyClass {
    if scaled_entropy < 0.7 {
        PropertyClass::Categorical
    } else {
        PropertyClass::Relational
    }
}

/// Group instances by property and measure each group. Rows are ordered by
/// descending frequency, ties by property name.
pub fn property_stats(instances: &[Instance]) -> Vec<PropertyStats> {
    property_stats_impl(instances, cfg!(feature = "parallel"))
}

/// Sequential variant (bench baseline; identical output).
pub fn property_stats_seq(instances: &[Instance]) -> Vec<PropertyStats> {
    property_stats_impl(instances, false)
}

fn property_stats_impl(instances: &[Instance], parallel: bool) -> Vec<PropertyStats> {
    let mut groups: BTreeMap<&str, Vec<&Instance>> = BTreeMap::new();
    for inst in instances {
        groups.entry(inst.property.as_str()).or_default().push(inst);
    }
    let groups: Vec<(&str, Vec<&Instance>)> = groups.into_iter().collect();

    let measure = |(name, members): &(&str, Vec<&Instance>)| {
        let scaled_entropy = answer_entropy(members.iter().copied());
        PropertyStats {
            property: name.to_string(),
            frequency: members.len(),
            scaled_entropy,
            class: classify_property(scaled_entropy),
        }
    };

    #[cfg(feature = "parallel")]
    let mut rows: Vec<PropertyStats> = if parallel {
        groups.par_iter().map(measure).collect()
    } else {
        groups.iter().map(measure).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let mut rows: Vec<PropertyStats> = {
        let _ = parallel;
        groups.iter().map(measure).collect()
    };

    rows.sort_by(|a, b| {
        b.frequency
            .cmp(&a.frequency)
            .then_with(|| a.property.cmp(&b.property))
    });
    rows
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusStats {
    pub instances: usize,
    pub properties: Vec<PropertyStats>,
    /// Fraction of answer values occurring exactly once in the corpus.
    pub answer_uniqueness: f64,
    /// Fraction of instances with at least one answer present verbatim in
    /// the document (date answers matched semantically).
    pub verbatim_rate: f64,
    pub doc_len_mean: f64,
    pub doc_len_median: f64,
}

pub fn corpus_stats(instances: &[Instance]) -> CorpusStats {
    corpus_stats_impl(instances, cfg!(feature = "parallel"))
}

pub fn corpus_stats_seq(instances: &[Instance]) -> CorpusStats {
    corpus_stats_impl(instances, false)
}

fn corpus_stats_impl(instances: &[Instance], parallel: bool) -> CorpusStats {
    let properties = property_stats_impl(instances, parallel);

    let mut answer_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for inst in instances {
        for a in &inst.answers {
            *answer_counts.entry(a.as_str()).or_insert(0) += 1;
        }
    }
    let total_values: usize = answer_counts.values().sum();
    let unique_values = answer_counts.values().filter(|&&c| c == 1).count();
    let answer_uniqueness = if total_values == 0 {
        0.0
    } else {
        unique_values as f64 / total_values as f64
    };

    let per_instance = |inst: &Instance| {
        let toks = tokenize(&inst.document);
        let verbatim = label_positions(&toks, &inst.answers).any_answer;
        (toks.len(), verbatim)
    };

    #[cfg(feature = "parallel")]
    let measured: Vec<(usize, bool)> = if parallel {
        instances.par_iter().map(per_instance).collect()
    } else {
        instances.iter().map(per_instance).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let measured: Vec<(usize, bool)> = {
        let _ = parallel;
        instances.iter().map(per_instance).collect()
    };

    let n = instances.len();
    let verbatim = measured.iter().filter(|(_, v)| *v).count();
    let mut lengths: Vec<usize> = measured.iter().map(|(l, _)| *l).collect();
    lengths.sort_unstable();
    let doc_len_mean = if n == 0 {
        0.0
    } else {
        lengths.iter().sum::<usize>() as f64 / n as f64
    };
    let doc_len_median = if n == 0 {
        0.0
    } else if n % 2 == 1 {
        lengths[n / 2] as f64
    } else {
        (lengths[n / 2 - 1] + lengths[n / 2]) as f64 / 2.0
    };

    CorpusStats {
        instances: n,
        properties,
        answer_uniqueness,
        verbatim_rate: if n == 0 { 0.0 } else { verbatim as f64 / n as f64 },
        doc_len_mean,
        doc_len_median,
    }
}

/// Tab-separated report mirroring the property table: summary lines as
/// comments, then one row per property.
pub fn render_stats_tsv(stats: &CorpusStats) -> String {
    let mut out = String::new();
    out.push_str(&format!("# instances\t{}\n", stats.instances));
    out.push_str(&format!(
        "# answer_uniqueness\t{:.6}\n",
        stats.answer_uniqueness
    ));
    out.push_str(&format!("# verbatim_rate\t{:.6}\n", stats.verbatim_rate));
    out.push_str(&format!("# doc_len_mean\t{:.6}\n", stats.doc_len_mean));
    out.push_str(&format!("# doc_len_median\t{:.6}\n", stats.doc_len_median));
    out.push_str("property\tfrequency\tscaled_entropy\tclass\n");
    for row in &stats.properties {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{}\n",
            row.property, row.frequency, row.scaled_entropy, row.class
        ));
    }
    out
}
