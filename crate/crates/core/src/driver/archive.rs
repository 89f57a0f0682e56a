use std::collections::BTreeMap;
use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::moea::nondominated_sort;
use crate::space::{ComplexityVector, Genome};

use super::{objective_vector, DriverError, Objective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedArch {
    pub genome: Genome,
    pub accuracy: f64,
    pub complexity: ComplexityVector,
    /// 0 for the initial samples.
    pub iteration: usize,
    pub evaluator: String,
    #[serde(default)]
    pub extras: BTreeMap<String, f64>,
}

impl EvaluatedArch {
    pub fn objectives(&self, objectives: &[Objective]) -> Vec<f64> {
        objective_vector(objectives, self.accuracy, &self.complexity)
    }
}

/// Evaluated architectures in insertion order, keyed by genome text.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Archive {
    entries: IndexMap<String, EvaluatedArch>,
}

pub const ARCHIVE_COLUMNS: [&str; 8] =
    ["genome", "accuracy", "madds", "params", "latency_cpu", "latency_gpu", "iteration", "evaluator"];

impl Archive {
    pub fn new() -> Archive {
        Archive::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, genome: &Genome) -> bool {
        self.entries.contains_key(&genome.encode_text())
    }

    pub fn get(&self, genome: &Genome) -> Option<&EvaluatedArch> {
        self.entries.get(&genome.encode_text())
    }

    /// Stored accuracies are never replaced.
    pub fn insert(&mut self, arch: EvaluatedArch) -> Result<(), DriverError> {
        let key = arch.genome.encode_text();
        if self.entries.contains_key(&key) {
            return Err(DriverError::DuplicateGenome(key));
        }
        self.entries.insert(key, arch);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &EvaluatedArch> {
        self.entries.values()
    }

    pub fn entries(&self) -> Vec<&EvaluatedArch> {
        self.entries.values().collect()
    }

    pub fn genomes(&self) -> Vec<Genome> {
        self.iter().map(|a| a.genome).collect()
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.iter().map(|a| a.accuracy).collect()
    }

    pub fn objectives(&self, objectives: &[Objective]) -> Vec<Vec<f64>> {
        self.iter().map(|a| a.objectives(objectives)).collect()
    }

    /// Non-dominated members, in insertion order.
    pub fn front(&self, objectives: &[Objective]) -> Vec<&EvaluatedArch> {
        let entries = self.entries();
        match nondominated_sort(&self.objectives(objectives)) {
            Ok(fronts) => fronts.into_iter().next().unwrap_or_default().into_iter().map(|i| entries[i]).collect(),
            Err(_) => Vec::new(),
        }
    }

    /// The first `n` entries, as an archive of its own.
    pub fn prefix(&self, n: usize) -> Archive {
        Archive { entries: self.entries.iter().take(n).map(|(k, v)| (k.clone(), v.clone())).collect() }
    }

    /// CSV export, one row per evaluation, preceded by a `# config_hash:`
    /// comment line.
    pub fn write_csv<W: Write>(&self, mut out: W, config_hash: &str) -> std::io::Result<()> {
        writeln!(out, "# config_hash: {config_hash}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(ARCHIVE_COLUMNS)?;
        for a in self.iter() {
            w.write_record([
                a.genome.encode_text(),
                a.accuracy.to_string(),
                a.complexity.madds.to_string(),
                a.complexity.params.to_string(),
                a.complexity.latency_cpu.to_string(),
                a.complexity.latency_gpu.to_string(),
                a.iteration.to_string(),
                a.evaluator.clone(),
            ])?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self, config_hash: &str) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, config_hash).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ComplexityConfig;

    fn arch(g: Genome, acc: f64) -> EvaluatedArch {
        EvaluatedArch {
            genome: g,
            accuracy: acc,
            complexity: ComplexityConfig::default().complexity(&g),
            iteration: 0,
            evaluator: "test".into(),
            extras: BTreeMap::new(),
        }
    }

    #[test]
    fn rejects_duplicates_and_keeps_first_value() {
        let mut a = Archive::new();
        a.insert(arch(Genome::minimal(), 0.3)).unwrap();
        assert!(matches!(a.insert(arch(Genome::minimal(), 0.9)), Err(DriverError::DuplicateGenome(_))));
        assert_eq!(a.get(&Genome::minimal()).unwrap().accuracy, 0.3);
    }

    #[test]
    fn front_and_csv() {
        let mut a = Archive::new();
        a.insert(arch(Genome::minimal(), 0.3)).unwrap();
        a.insert(arch(Genome::maximal(), 0.9)).unwrap();
        let mut genes = *Genome::maximal().genes();
        genes[0] = 0;
        // cheaper than the maximal genome but less accurate than the minimal
        a.insert(arch(Genome::from_genes(&genes).unwrap(), 0.1)).unwrap();
        let front = a.front(&[Objective::Accuracy, Objective::Madds]);
        assert_eq!(front.len(), 2);
        let csv = a.to_csv_string("abc");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# config_hash: abc");
        assert_eq!(lines[1], ARCHIVE_COLUMNS.join(","));
        assert_eq!(lines.len(), 5);
        assert!(lines[2].starts_with(&Genome::minimal().encode_text()));
    }
}
