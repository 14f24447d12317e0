//! Precomputed contextual word-piece vectors and their pooling to words.
//!
//! Text layout, one record per sentence, records separated by blank lines:
//!
//! ```text
//! pieces<TAB>The<TAB>bo<TAB>##y
//! spans<TAB>0-0<TAB>1-2
//! shape<TAB>LAYERS<TAB>PIECES<TAB>DIM
//! <LAYERS * PIECES lines of DIM numbers, layer-major>
//! ```
//!
//! Spans are inclusive piece ranges, one per word.

use thiserror::Error;

/// Number of top layers averaged per piece.
pub const POOLED_LAYERS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VectorError {
    #[error("need at least {POOLED_LAYERS} layers, found {0}")]
    LayerCount(usize),
    #[error("word spans do not tile the pieces at piece {0}")]
    SpanGap(usize),
    #[error("vector width {found} differs from {expected}")]
    Width { expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceVectors {
    pub pieces: Vec<String>,
    /// Inclusive piece range of each word.
    pub word_spans: Vec<(usize, usize)>,
    /// `layers[l][p]` is the vector of piece `p` in layer `l`.
    pub layers: Vec<Vec<Vec<f64>>>,
}

impl SentenceVectors {
    pub fn width(&self) -> usize {
        self.layers.first().and_then(|l| l.first()).map_or(0, Vec::len)
    }

    fn check(&self) -> Result<(), VectorError> {
        if self.layers.len() < POOLED_LAYERS {
            return Err(VectorError::LayerCount(self.layers.len()));
        }
        let mut next = 0;
        for &(s, e) in &self.word_spans {
            if s != next || e < s {
                return Err(VectorError::SpanGap(next));
            }
            next = e + 1;
        }
        if next != self.pieces.len() {
            return Err(VectorError::SpanGap(next));
        }
        let width = self.width();
        for layer in &self.layers {
            if layer.len() != self.pieces.len() {
                return Err(VectorError::SpanGap(layer.len().min(self.pieces.len())));
            }
            if let Some(v) = layer.iter().find(|v| v.len() != width) {
                return Err(VectorError::Width { expected: width, found: v.len() });
            }
        }
        Ok(())
    }
}

/// Per word: the mean over its pieces of each piece's mean over the last
/// four layers.
pub fn pool_vectors(cv: &SentenceVectors) -> Result<Vec<Vec<f64>>, VectorError> {
    cv.check()?;
    let width = cv.width();
    let top = &cv.layers[cv.layers.len() - POOLED_LAYERS..];
    let piece: Vec<Vec<f64>> = (0..cv.pieces.len())
        .map(|p| {
            let mut v = vec![0.0; width];
            for layer in top {
                for (acc, x) in v.iter_mut().zip(&layer[p]) {
                    *acc += x;
                }
            }
            v.iter_mut().for_each(|x| *x /= POOLED_LAYERS as f64);
            v
        })
        .collect();
    Ok(cv
        .word_spans
        .iter()
        .map(|&(s, e)| {
            let mut v = vec![0.0; width];
            for p in &piece[s..=e] {
                for (acc, x) in v.iter_mut().zip(p) {
                    *acc += x;
                }
            }
            let k = (e - s + 1) as f64;
            v.iter_mut().for_each(|x| *x /= k);
            v
        })
        .collect())
}

pub fn write_vectors(sentences: &[SentenceVectors]) -> String {
    let mut out = String::new();
    for (i, s) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str("pieces");
        for p in &s.pieces {
            out.push('\t');
            out.push_str(p);
        }
        out.push_str("\nspans");
        for (a, b) in &s.word_spans {
            out.push_str(&format!("\t{a}-{b}"));
        }
        out.push_str(&format!("\nshape\t{}\t{}\t{}\n", s.layers.len(), s.pieces.len(), s.width()));
        for layer in &s.layers {
            for v in layer {
                let row: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
    }
    out
}

pub fn read_vectors(text: &str) -> Result<Vec<SentenceVectors>, VectorError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |line: usize, m: &str| VectorError::Format { line: line + 1, message: m.to_string() };
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let field = |i: usize, key: &str| -> Result<Vec<&str>, VectorError> {
            let l = lines.get(i).ok_or_else(|| err(i, &format!("missing `{key}` line")))?;
            let mut parts = l.split('\t');
            if parts.next() != Some(key) {
                return Err(err(i, &format!("expected `{key}`")));
            }
            Ok(parts.collect())
        };
        let pieces: Vec<String> = field(i, "pieces")?.into_iter().map(String::from).collect();
        let word_spans = field(i + 1, "spans")?
            .into_iter()
            .map(|s| {
                let (a, b) = s.split_once('-').ok_or_else(|| err(i + 1, "bad span"))?;
                Ok((a.parse().map_err(|_| err(i + 1, "bad span"))?, b.parse().map_err(|_| err(i + 1, "bad span"))?))
            })
            .collect::<Result<Vec<(usize, usize)>, VectorError>>()?;
        let shape: Vec<usize> = field(i + 2, "shape")?
            .into_iter()
            .map(|s| s.parse().map_err(|_| err(i + 2, "bad shape")))
            .collect::<Result<_, _>>()?;
        let [n_layers, n_pieces, dim] = shape[..] else { return Err(err(i + 2, "shape needs three numbers")) };
        if n_pieces != pieces.len() {
            return Err(err(i + 2, "piece count disagrees with `pieces`"));
        }
        i += 3;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let mut layer = Vec::with_capacity(n_pieces);
            for _ in 0..n_pieces {
                let l = lines.get(i).ok_or_else(|| err(i, "missing vector row"))?;
                let row: Vec<f64> = l
                    .split_whitespace()
                    .map(|x| x.parse().map_err(|_| err(i, "bad number")))
                    .collect::<Result<_, _>>()?;
                if row.len() != dim {
                    return Err(VectorError::Width { expected: dim, found: row.len() });
                }
                layer.push(row);
                i += 1;
            }
            layers.push(layer);
        }
        out.push(SentenceVectors { pieces, word_spans, layers });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(spans: Vec<(usize, usize)>, layers: Vec<Vec<Vec<f64>>>) -> SentenceVectors {
        let n = layers[0].len();
        SentenceVectors { pieces: (0..n).map(|i| format!("p{i}")).collect(), word_spans: spans, layers }
    }

    #[test]
    fn identical_layers_pass_through() {
        let v = vec![1.5, -2.0];
        let s = sv(vec![(0, 0)], vec![vec![v.clone()]; 4]);
        assert_eq!(pool_vectors(&s).unwrap(), vec![v]);
    }

    #[test]
    fn two_pieces_average() {
        let s = sv(vec![(0, 1)], vec![vec![vec![2.0], vec![4.0]]; 5]);
        assert_eq!(pool_vectors(&s).unwrap(), vec![vec![3.0]]);
    }

    #[test]
    fn hand_case_uses_last_four_layers() {
        // layer 0 must be ignored
        let layers: Vec<Vec<Vec<f64>>> =
            [100.0, 1.0, 2.0, 3.0, 6.0].iter().map(|&x| vec![vec![x, -x], vec![2.0 * x, 0.0]]).collect();
        let s = sv(vec![(0, 0), (1, 1)], layers);
        let mean = (1.0 + 2.0 + 3.0 + 6.0) / 4.0;
        assert_eq!(pool_vectors(&s).unwrap(), vec![vec![mean, -mean], vec![2.0 * mean, 0.0]]);
    }

    #[test]
    fn guards() {
        let s = sv(vec![(0, 0)], vec![vec![vec![1.0]]; 3]);
        assert_eq!(pool_vectors(&s), Err(VectorError::LayerCount(3)));
        let s = sv(vec![(0, 0), (2, 2)], vec![vec![vec![1.0]; 3]; 4]);
        assert_eq!(pool_vectors(&s), Err(VectorError::SpanGap(1)));
        let s = sv(vec![(0, 0)], vec![vec![vec![1.0]; 2]; 4]);
        assert_eq!(pool_vectors(&s), Err(VectorError::SpanGap(1)));
    }

    #[test]
    fn text_round_trip() {
        let a = sv(vec![(0, 1), (2, 2)], vec![vec![vec![0.1, 0.2], vec![1.0 / 3.0, 4.0], vec![5.0, 6.0]]; 4]);
        let b = sv(vec![(0, 0)], vec![vec![vec![-1e-9, 7.0]]; 4]);
        let text = write_vectors(&[a.clone(), b.clone()]);
        assert_eq!(read_vectors(&text).unwrap(), vec![a, b]);
    }
}
