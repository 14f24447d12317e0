//! Tag files: `token<TAB>tag` per line, a blank line after each sentence.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: expected `token<TAB>tag`")]
pub struct TagFileError {
    pub line: usize,
}

pub fn read_tag_file(text: &str) -> Result<Vec<Vec<(String, String)>>, TagFileError> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let (tok, tag) = line.split_once('\t').ok_or(TagFileError { line: i + 1 })?;
        if tok.is_empty() || tag.is_empty() || tag.contains('\t') {
            return Err(TagFileError { line: i + 1 });
        }
        cur.push((tok.to_string(), tag.to_string()));
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

pub fn write_tag_file(sentences: &[Vec<(String, String)>]) -> String {
    let mut out = String::new();
    for s in sentences {
        for (tok, tag) in s {
            out.push_str(&format!("{tok}\t{tag}\n"));
        }
        out.push('\n');
    }
    out
}
