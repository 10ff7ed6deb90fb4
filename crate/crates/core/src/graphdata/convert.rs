use std::io::Read;

use super::{Dataset, Task};
use crate::error::{Error, Result};
use crate::smiles::{featurize, parse_smiles};

/// A CSV row that could not be turned into a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvertFailure {
    /// 1-based line in the CSV file, header included.
    pub line: usize,
    pub message: String,
}

/// Reads a `smiles,label` CSV (an `id` column is optional) and featurizes each
/// row. Bad rows are skipped and reported.
pub fn convert_csv(input: impl Read, task: Task) -> Result<(Dataset, Vec<ConvertFailure>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let (Some(smiles_col), Some(label_col)) = (column("smiles"), column("label")) else {
        return Err(Error::Usage(format!(
            "CSV header must contain 'smiles' and 'label' columns, found {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    };
    let id_col = column("id");

    let mut graphs = Vec::new();
    let mut failures = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                failures.push(ConvertFailure { line, message: e.to_string() });
                continue;
            }
        };
        let smiles = row.get(smiles_col).unwrap_or("");
        let label = match parse_label(row.get(label_col).unwrap_or(""), task) {
            Ok(y) => y,
            Err(message) => {
                failures.push(ConvertFailure { line, message });
                continue;
            }
        };
        match parse_smiles(smiles) {
            Ok(mol) => {
                let id = id_col.and_then(|c| row.get(c)).unwrap_or(smiles);
                graphs.push(featurize(&mol, id, Some(label)));
            }
            Err(e) => failures.push(ConvertFailure {
                line,
                message: format!("{smiles}: {e}"),
            }),
        }
    }
    Ok((Dataset::new(graphs, task)?, failures))
}

fn parse_label(text: &str, task: Task) -> std::result::Result<f64, String> {
    let y: f64 = text.parse().map_err(|_| format!("label '{text}' is not a number"))?;
    if !y.is_finite() {
        return Err(format!("label '{text}' is not finite"));
    }
    if task == Task::Classification && y != 0.0 && y != 1.0 {
        return Err(format!("classification label '{text}' is not 0 or 1"));
    }
    Ok(y)
}
