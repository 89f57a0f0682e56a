//! Precomputed benchmark tables keyed by canonical genome text.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use crate::space::Genome;

use super::{EvalError, EvalRequest, EvalResult, Evaluator};

#[derive(Debug, Clone, PartialEq)]
pub struct TabularRow {
    pub accuracy: f64,
    pub extras: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default)]
pub struct TabularTable {
    rows: HashMap<String, TabularRow>,
}

impl TabularTable {
    pub fn load(path: &Path) -> Result<TabularTable, EvalError> {
        let file = std::fs::File::open(path).map_err(|e| EvalError::Table(format!("{}: {e}", path.display())))?;
        TabularTable::from_reader(file)
    }

    /// CSV with a header row: genome text, accuracy, then any number of
    /// named numeric columns. Lines starting with `#` are ignored.
    pub fn from_reader<R: Read>(reader: R) -> Result<TabularTable, EvalError> {
        let mut csv = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
        let headers = csv.headers().map_err(|e| EvalError::Table(e.to_string()))?.clone();
        if headers.len() < 2 {
            return Err(EvalError::Table("need at least genome and accuracy columns".into()));
        }
        let mut rows = HashMap::new();
        for (line, record) in csv.records().enumerate() {
            let record = record.map_err(|e| EvalError::Table(e.to_string()))?;
            let number = |col: usize| -> Result<f64, EvalError> {
                record[col]
                    .parse::<f64>()
                    .map_err(|e| EvalError::Table(format!("row {}, column '{}': {e}", line + 1, &headers[col])))
            };
            let key = Genome::decode_text(&record[0])?.encode_text();
            let accuracy = number(1)?;
            let mut extras = BTreeMap::new();
            for col in 2..record.len() {
                extras.insert(headers[col].to_string(), number(col)?);
            }
            if rows.insert(key.clone(), TabularRow { accuracy, extras }).is_some() {
                return Err(EvalError::DuplicateKey(key));
            }
        }
        Ok(TabularTable { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn lookup(&self, genome: &Genome) -> Result<&TabularRow, EvalError> {
        let key = genome.encode_text();
        self.rows.get(&key).ok_or(EvalError::MissingEntry(key))
    }
}

#[derive(Debug, Clone)]
pub struct TabularEvaluator {
    table: TabularTable,
}

impl TabularEvaluator {
    pub fn new(table: TabularTable) -> TabularEvaluator {
        TabularEvaluator { table }
    }
}

impl Evaluator for TabularEvaluator {
    fn id(&self) -> &str {
        "tabular"
    }

    fn evaluate(&mut self, batch: &[EvalRequest]) -> Result<Vec<EvalResult>, EvalError> {
        batch
            .iter()
            .map(|req| {
                let row = self.table.lookup(&Genome::decode_text(&req.genome)?)?;
                if !(0.0..=1.0).contains(&row.accuracy) {
                    return Err(EvalError::InvalidAccuracy { id: req.id, value: row.accuracy });
                }
                let mut res = EvalResult::new(req.id, row.accuracy, "tabular");
                res.extras = row.extras.clone();
                Ok(res)
            })
            .collect()
    }
}
