//! The (document, property, answer-set) task unit and its newline-delimited
//! JSON file format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub document: String,
    pub property: String,
    /// Non-empty; unique after exact-string deduplication.
    pub answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

impl Instance {
    pub fn new(
        document: impl Into<String>,
        property: impl Into<String>,
        answers: Vec<String>,
    ) -> Result<Self> {
        let mut inst = Instance {
            document: document.into(),
            property: property.into(),
            answers,
            id: None,
        };
        inst.normalize()?;
        Ok(inst)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    fn normalize(&mut self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        self.answers.retain(|a| seen.insert(a.clone()));
        if self.answers.is_empty() {
            return Err(Error::Data("instance has no answers".into()));
        }
        Ok(())
    }

    /// The deterministic training target: lexicographically first gold value.
    pub fn first_answer(&self) -> &str {
        self.answers
            .iter()
            .min()
            .map(|s| s.as_str())
            .expect("answers non-empty")
    }

    /// Identity used in prediction dumps: explicit id, else the corpus index.
    pub fn key(&self, index: usize) -> String {
        self.id.clone().unwrap_or_else(|| index.to_string())
    }
}

pub fn read_instances(path: &Path) -> Result<Vec<Instance>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut inst: Instance = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("line {}: {e}", lineno + 1)))?;
        inst.normalize()
            .map_err(|e| Error::Data(format!("line {}: {e}", lineno + 1)))?;
        out.push(inst);
    }
    if out.is_empty() {
        return Err(Error::Data(format!(
            "no instances in {}",
            path.display()
        )));
    }
    Ok(out)
}

pub fn write_instances(path: &Path, instances: &[Instance]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for inst in instances {
        serde_json::to_writer(&mut w, inst)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answers_are_deduplicated_and_required() {
        let inst = Instance::new("doc", "prop", vec!["a".into(), "a".into(), "b".into()]).unwrap();
        assert_eq!(inst.answers, vec!["a", "b"]);
        assert!(Instance::new("doc", "prop", vec![]).is_err());
    }

    #[test]
    fn first_answer_is_lexicographic_min() {
        let inst = Instance::new("d", "p", vec!["zebra".into(), "apple".into()]).unwrap();
        assert_eq!(inst.first_answer(), "apple");
    }

    #[test]
    fn ndjson_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        let insts = vec![
            Instance::new("Canada is a country.", "country", vec!["Canada".into()]).unwrap(),
            Instance::new("doc2", "p", vec!["x".into(), "y".into()])
                .unwrap()
                .with_id("inst-7"),
        ];
        write_instances(&path, &insts).unwrap();
        let back = read_instances(&path).unwrap();
        assert_eq!(back, insts);
        assert_eq!(back[1].key(1), "inst-7");
        assert_eq!(back[0].key(0), "0");
    }
}
