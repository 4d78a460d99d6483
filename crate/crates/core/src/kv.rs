//! Flat `key = value` text used by configuration files and the checkpoint
//! config block. `#` starts a comment; blank lines are ignored.

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum KvError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
}

pub fn parse(text: &str) -> Result<Vec<(String, String)>, KvError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(KvError::Syntax { line: i + 1 })?;
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(KvError::Syntax { line: i + 1 });
        }
        if out.iter().any(|(k, _)| k == key) {
            return Err(KvError::Duplicate {
                line: i + 1,
                key: key.to_owned(),
            });
        }
        out.push((key.to_owned(), value.trim().to_owned()));
    }
    Ok(out)
}
